//! Subcommand implementations.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use flatlab::error::{Error, Result};
use flatlab::experiments::{
    capture_counting_experiment, l2_lower_bound_check, sumset_growth_experiment, GoodPairSet,
    PairSelection,
};
use flatlab::grid::{transversality_check, CellSet, Direction, Scale};
use flatlab::measure::{DeltaMeasure, Window};
use flatlab::perfectness::{scan_perfectness, CentersMode, PerfectnessQuery};
use flatlab::experiments::{default_eta, row_structure};
use flatlab::spectral::{
    band_limited_flattening, flattening_iteration, fourier_eval, fourier_energy_bridge,
    lp_ball_averages, riesz_energy, EnergyMethod, FourierProfile, SampledField,
};
use flatlab::uniformize::{extract_uniform, verify_uniform};

use crate::config::*;
use crate::report::{config_hash, render_csv, render_report, write_file};

/// True when some property check in the run failed (exit code 4).
pub struct RunOutcome {
    pub property_failures: Vec<String>,
}

impl RunOutcome {
    fn clean() -> Self {
        RunOutcome { property_failures: Vec::new() }
    }
}

pub fn cmd_generate(config: &GenerateConfig, out: &Path, exact: bool) -> Result<RunOutcome> {
    let measure = config.measure.resolve()?;
    let exact = exact || config.arithmetic == Arithmetic::Exact;
    let path = write_file(out, "measure.json", &measure.to_json(exact))?;
    #[derive(Serialize)]
    struct Summary {
        path: String,
        dim: u8,
        m: u32,
        atoms: usize,
        total_mass: f64,
        diam_support: f64,
    }
    let summary = Summary {
        path: path.display().to_string(),
        dim: measure.dim(),
        m: measure.scale().m(),
        atoms: measure.len(),
        total_mass: measure.total_mass(),
        diam_support: measure.diam_support(),
    };
    write_file(out, "report.json", &render_report(config, &summary)?)?;
    println!(
        "wrote {} (dim {}, delta 2^-{}, {} atoms, mass {}, diam {})",
        path.display(),
        summary.dim,
        summary.m,
        summary.atoms,
        summary.total_mass,
        summary.diam_support
    );
    Ok(RunOutcome::clean())
}

pub fn cmd_scan(config: &ScanConfig, out: &Path) -> Result<RunOutcome> {
    let measure = config.measure.resolve()?;
    let centers = match config.centers.as_str() {
        "support" => CentersMode::SupportOnly,
        "all-grid" => CentersMode::AllGrid,
        other => {
            return Err(Error::InvalidParameter(format!(
                "centers must be \"support\" or \"all-grid\", got {other:?}"
            )))
        }
    };
    let window = match &config.window {
        Some(w) => w.resolve(measure.dim())?,
        None => Window::all(measure.dim()),
    };
    let mut reports = Vec::new();
    for &d in &config.d_list {
        let query = PerfectnessQuery {
            d_factor: d,
            window,
            r_min: config.r_min_cells * measure.delta(),
            centers,
        };
        reports.push(scan_perfectness(&measure, &query)?);
    }
    let hash = config_hash(config)?;
    let rows: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "{},{},{},{},{},{},{}",
                r.d_factor,
                r.best_beta,
                r.witness.center[0],
                r.witness.center[1],
                r.witness.radius,
                r.tested_ball_count,
                r.diam_support
            )
        })
        .collect();
    write_file(
        out,
        "scan.csv",
        &render_csv(
            "d,best_beta,witness_x,witness_y,witness_r,tested_balls,diam_support",
            &rows,
            &hash,
        ),
    )?;
    write_file(out, "report.json", &render_report(config, &reports)?)?;
    for r in &reports {
        println!("D = {}: best_beta = {}", r.d_factor, r.best_beta);
    }
    Ok(RunOutcome::clean())
}

pub fn cmd_energy(config: &EnergyConfig, out: &Path) -> Result<RunOutcome> {
    let measure = config.measure.resolve()?;
    let profile = flattening_iteration(&measure, config.t, &config.delta_m_list, config.k_max)?;
    let mut outcome = RunOutcome::clean();
    #[derive(Serialize)]
    struct CrossCheck {
        method: String,
        value: f64,
        kernel_value: f64,
        ratio: f64,
    }
    let cross = match config.cross_check.as_deref() {
        None => None,
        Some(name) => {
            let method = match name {
                "mollified" => EnergyMethod::Mollified,
                "fourier" => EnergyMethod::Fourier,
                "kernel" => EnergyMethod::Kernel,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown energy method {other:?}"
                    )))
                }
            };
            let dm = *config.delta_m_list.first().ok_or_else(|| {
                Error::InvalidParameter("delta_m_list must be nonempty".into())
            })?;
            let scale = Scale::new(dm, measure.dim())?;
            let coarse = measure.coarsen(scale)?;
            let value = riesz_energy(&coarse, config.t, scale.delta(), method)?;
            let kernel_value = riesz_energy(&coarse, config.t, scale.delta(), EnergyMethod::Kernel)?;
            let ratio = kernel_value / value;
            if method == EnergyMethod::Mollified
                && !(ratio <= flatlab::tol::ENERGY_METHOD_FACTOR
                    && ratio >= 1.0 / flatlab::tol::ENERGY_METHOD_FACTOR)
            {
                outcome
                    .property_failures
                    .push(format!("kernel/mollified energies disagree: ratio {ratio}"));
            }
            Some(CrossCheck { method: name.into(), value, kernel_value, ratio })
        }
    };
    #[derive(Serialize)]
    struct Payload<'a> {
        profile: &'a flatlab::spectral::EnergyProfile,
        cross_check: Option<CrossCheck>,
        kappa_nonincreasing: Vec<(u32, bool)>,
    }
    let kappa_flags: Vec<(u32, bool)> = config
        .delta_m_list
        .iter()
        .map(|&dm| (dm, profile.kappa_nonincreasing(dm)))
        .collect();
    let hash = config_hash(config)?;
    write_file(
        out,
        "energy.csv",
        &render_csv(
            flatlab::spectral::EnergyProfile::csv_header(),
            &profile.csv_rows(),
            &hash,
        ),
    )?;
    let payload = Payload { profile: &profile, cross_check: cross, kappa_nonincreasing: kappa_flags };
    write_file(out, "report.json", &render_report(config, &payload)?)?;
    println!("energy table: {} rows", profile.rows.len());
    Ok(outcome)
}

pub fn cmd_fourier(config: &FourierConfig, out: &Path) -> Result<RunOutcome> {
    let measure = config.measure.resolve()?;
    let table = lp_ball_averages(&measure, &config.p_list, &config.r_list, config.h)?;
    if config.dump_spectrum == Some(true) {
        let r_max = config.r_list.iter().cloned().fold(0.0f64, f64::max);
        let field = fourier_eval(&measure, config.h, r_max)?;
        dump_spectrum(&field, out)?;
    }
    let profile = FourierProfile::from_table(&config.p_list, &config.r_list, &table);
    let hash = config_hash(config)?;
    write_file(
        out,
        "fourier.csv",
        &render_csv(FourierProfile::csv_header(), &profile.csv_rows(), &hash),
    )?;
    #[derive(Serialize)]
    struct Payload<'a> {
        profile: &'a FourierProfile,
        slopes: Vec<(u32, Option<f64>)>,
    }
    let slopes: Vec<(u32, Option<f64>)> = config
        .p_list
        .iter()
        .map(|&p| (p, profile.loglog_slope(p)))
        .collect();
    write_file(out, "report.json", &render_report(config, &Payload { profile: &profile, slopes })?)?;
    for row in &profile.rows {
        println!("p = {}, R = {}: lp_avg = {}", row.p, row.r, row.lp_avg);
    }
    Ok(RunOutcome::clean())
}

pub fn cmd_convolve(config: &ConvolveConfig, out: &Path, exact: bool) -> Result<RunOutcome> {
    let a = config.measure.resolve()?;
    let b = config.measure_b.resolve()?;
    let mut conv = a.convolve(&b)?;
    if let Some(k) = config.power {
        conv = conv.self_convolution_power(k)?;
    }
    let exact = exact || config.arithmetic == Arithmetic::Exact;
    let path = write_file(out, "measure.json", &conv.to_json(exact))?;
    #[derive(Serialize)]
    struct Summary {
        path: String,
        atoms: usize,
        total_mass: f64,
    }
    let summary =
        Summary { path: path.display().to_string(), atoms: conv.len(), total_mass: conv.total_mass() };
    write_file(out, "report.json", &render_report(config, &summary)?)?;
    println!("wrote {} ({} atoms, mass {})", path.display(), conv.len(), conv.total_mass());
    Ok(RunOutcome::clean())
}

pub fn cmd_uniformize(config: &UniformizeConfig, out: &Path) -> Result<RunOutcome> {
    let cells = match (&config.measure, config.random_cells) {
        (Some(source), None) => {
            let measure = source.resolve()?;
            let scale = measure.scale();
            if scale.m() != config.t_block * config.m_blocks {
                return Err(Error::ScaleMismatch(format!(
                    "measure at scale 2^-{} does not match mT = {}",
                    scale.m(),
                    config.t_block * config.m_blocks
                )));
            }
            measure.support_cells()
        }
        (None, Some(count)) => {
            let mt = config.t_block * config.m_blocks;
            let scale = Scale::new(mt, 2)?;
            let span = 1i64 << mt;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let cells: Vec<[i64; 2]> = (0..count)
                .map(|_| [rng.gen_range(0..span), rng.gen_range(0..span)])
                .collect();
            CellSet::new(scale, cells)?
        }
        _ => {
            return Err(Error::InvalidParameter(
                "uniformize needs exactly one of measure / random_cells".into(),
            ))
        }
    };
    let report = extract_uniform(
        &cells,
        config.t_block,
        config.m_blocks,
        config.epsilon,
        config.round_cap,
    )?;
    let mut outcome = RunOutcome::clean();
    for rec in &report.records {
        if !matches!(
            verify_uniform(&rec.cells, rec.t_block, rec.m_blocks)?,
            flatlab::uniformize::UniformVerdict::Uniform(_)
        ) {
            outcome.property_failures.push("emitted record failed verification".into());
        }
    }
    let hash = config_hash(config)?;
    let rows: Vec<String> = report
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let b: Vec<String> = r.branching.iter().map(|n| n.to_string()).collect();
            format!("{},{},\"{}\"", i, r.cells.len(), b.join(";"))
        })
        .collect();
    write_file(out, "records.csv", &render_csv("record,cells,branching", &rows, &hash))?;
    write_file(out, "report.json", &render_report(config, &report)?)?;
    println!(
        "{} records, remainder {} (target {}), rounds {}",
        report.records.len(),
        report.remainder.len(),
        report.remainder_target,
        report.rounds
    );
    Ok(outcome)
}

pub fn cmd_experiment(config: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let hash = config_hash(config)?;
    let mut outcome = RunOutcome::clean();
    match config.kind {
        ExperimentKind::CaptureCounting => {
            let mu = required_measure(&config.measure, "measure")?;
            let sigma = required_measure(&config.measure_b, "measure_b")?;
            let alpha = require(config.alpha, "alpha")?;
            let epsilon = require(config.epsilon, "epsilon")?;
            let deltas = config
                .delta_m_list
                .clone()
                .ok_or_else(|| Error::InvalidParameter("delta_m_list is required".into()))?;
            let table = capture_counting_experiment(&mu, &sigma, alpha, epsilon, &deltas)?;
            write_file(
                out,
                "capture.csv",
                &render_csv(
                    flatlab::experiments::CaptureTable::csv_header(),
                    &table.csv_rows(),
                    &hash,
                ),
            )?;
            write_file(out, "report.json", &render_report(config, &table)?)?;
            println!(
                "capture table: {} rows, all_pass = {}, fitted exponent = {:?}",
                table.rows.len(),
                table.all_pass(),
                table.fitted_exponent
            );
        }
        ExperimentKind::SumsetGrowth => {
            let sigma = required_measure(&config.measure, "measure")?;
            let alpha = require(config.alpha, "alpha")?;
            let epsilon = require(config.epsilon, "epsilon")?;
            let t_block = require(config.t_block, "t_block")?;
            let m_blocks = require(config.m_blocks, "m_blocks")?;
            let eps_extract = 0.2f64;
            let extraction = extract_uniform(
                &sigma.support_cells(),
                t_block,
                m_blocks,
                eps_extract,
                flatlab::uniformize::DEFAULT_ROUND_CAP,
            )?;
            let record = extraction
                .records
                .first()
                .ok_or_else(|| Error::Empty("no uniform record extracted".into()))?;
            let selection = match config.selection {
                None | Some(1.0) => PairSelection::AllPairs,
                Some(f) => PairSelection::TopMass(f),
            };
            let rep = sumset_growth_experiment(record, &sigma, selection, alpha, epsilon)?;
            write_file(out, "report.json", &render_report(config, &rep)?)?;
            println!(
                "|X| = {}, sumset = {}, ratio = {}",
                rep.x_size, rep.sumset_size, rep.growth_ratio
            );
        }
        ExperimentKind::L2LowerBound => {
            let instances = require(config.instances, "instances")?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut rows = Vec::new();
            for i in 0..instances {
                let rep = random_l2_instance(&mut rng)?;
                if !rep.ok {
                    outcome
                        .property_failures
                        .push(format!("l2 lower bound failed on instance {i}"));
                }
                rows.push(format!("{},{},{},{},{},{}", i, rep.c, rep.big_c, rep.lhs, rep.rhs, rep.ok));
            }
            write_file(out, "l2.csv", &render_csv("instance,c,big_c,lhs,rhs,ok", &rows, &hash))?;
            #[derive(Serialize)]
            struct Payload {
                instances: u32,
                failures: usize,
            }
            let payload = Payload { instances, failures: outcome.property_failures.len() };
            write_file(out, "report.json", &render_report(config, &payload)?)?;
            println!("l2 lower bound: {} instances, {} failures", instances, payload.failures);
        }
        ExperimentKind::RowStructure => {
            let sigma = required_measure(&config.measure, "measure")?;
            let alpha = require(config.alpha, "alpha")?;
            let x_theta = require(config.x_theta, "x_theta")?;
            let curve_name = config
                .curve
                .clone()
                .ok_or_else(|| Error::InvalidParameter("config field \"curve\" is required".into()))?;
            let curve = crate::config::resolve_curve(&curve_name)?;
            let frame = flatlab::curve::tangent_projection(&curve, x_theta)?;
            // XQ: the support cells inside the fullest coarse square.
            let cells = sigma.support_cells();
            let m = cells.scale().m();
            let shift = m - (m / 2).max(1);
            let mut by_square: std::collections::BTreeMap<[i64; 2], Vec<[i64; 2]>> =
                Default::default();
            for c in cells.indices() {
                by_square.entry([c[0] >> shift, c[1] >> shift]).or_default().push(*c);
            }
            let (_, best) = by_square
                .into_iter()
                .max_by_key(|(k, v)| (v.len(), std::cmp::Reverse(*k)))
                .expect("nonempty support");
            let xq = CellSet::new(cells.scale(), best)?;
            let rep = row_structure(&xq, &frame, default_eta(alpha))?;
            write_file(out, "report.json", &render_report(config, &rep)?)?;
            println!(
                "row structure: {} rectangles, {} full rows (threshold {})",
                rep.rectangles_total, rep.full_rows, rep.full_threshold
            );
        }
        ExperimentKind::Bridge => {
            let sigma = required_measure(&config.measure, "measure")?;
            let p = require(config.p, "p")?;
            let u = require(config.u, "u")?;
            let h = require(config.h, "h")?;
            let rs = config
                .r_list
                .clone()
                .ok_or_else(|| Error::InvalidParameter("r_list is required".into()))?;
            let rows = fourier_energy_bridge(&sigma, p, &rs, u, h)?;
            let csv: Vec<String> = rows
                .iter()
                .map(|r| format!("{},{},{},{},{},{}", r.r, r.p, r.u, r.lhs, r.rhs, r.ratio))
                .collect();
            write_file(out, "bridge.csv", &render_csv("r,p,u,lhs,rhs,ratio", &csv, &hash))?;
            write_file(out, "report.json", &render_report(config, &rows)?)?;
            for r in &rows {
                if !(r.ratio > 0.0) {
                    outcome.property_failures.push(format!("bridge ratio not positive at R = {}", r.r));
                }
                println!("R = {}: ratio = {}", r.r, r.ratio);
            }
        }
        ExperimentKind::BandLimited => {
            let sigma = required_measure(&config.measure, "measure")?;
            let p = require(config.p, "p")?;
            let epsilon = require(config.epsilon, "epsilon")?;
            let h = require(config.h, "h")?;
            let rs = config
                .r_list
                .clone()
                .ok_or_else(|| Error::InvalidParameter("r_list is required".into()))?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut reports = Vec::new();
            for &r in &rs {
                let f_hat = random_spread_spectrum(&mut rng, r, h);
                let rep = band_limited_flattening(&f_hat, &sigma, epsilon, p)?;
                if !rep.chain_ok {
                    outcome
                        .property_failures
                        .push(format!("Hoelder chain violated at R = {r}"));
                }
                reports.push(rep);
            }
            write_file(out, "report.json", &render_report(config, &reports)?)?;
            for rep in &reports {
                println!("R = {}: kappa = {}", rep.radius, rep.kappa);
            }
        }
        ExperimentKind::Transversality => {
            let instances = require(config.instances, "instances")?;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for i in 0..instances {
                let rep = random_transversality_instance(&mut rng)?;
                if !rep.bound_ok {
                    outcome
                        .property_failures
                        .push(format!("transversality bound failed on instance {i}"));
                }
                worst = worst.max(rep.ratio);
                rows.push(format!(
                    "{},{},{},{},{},{},{}",
                    i, rep.alpha, rep.n1, rep.n2, rep.cells, rep.ratio, rep.bound_ok
                ));
            }
            write_file(
                out,
                "transversality.csv",
                &render_csv("instance,alpha,n1,n2,cells,ratio,ok", &rows, &hash),
            )?;
            #[derive(Serialize)]
            struct Payload {
                instances: u32,
                worst_ratio: f64,
                c_t: f64,
            }
            let payload = Payload {
                instances,
                worst_ratio: worst,
                c_t: flatlab::grid::DEFAULT_TRANSVERSALITY_CONSTANT,
            };
            write_file(out, "report.json", &render_report(config, &payload)?)?;
            println!("transversality: worst ratio {} over {} instances", worst, instances);
        }
    }
    Ok(outcome)
}

fn required_measure(source: &Option<MeasureSource>, name: &str) -> Result<DeltaMeasure> {
    source
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter(format!("config field {name:?} is required")))?
        .resolve()
}

fn random_l2_instance(rng: &mut ChaCha8Rng) -> Result<flatlab::experiments::L2LowerBoundReport> {
    let m = 6u32;
    let scale = Scale::new(m, 1)?;
    let span = 1i64 << m;
    let n_supp = rng.gen_range(2..30usize);
    let idx: Vec<[i64; 2]> = (0..n_supp).map(|_| [rng.gen_range(0..span), 0]).collect();
    let mu = DeltaMeasure::uniform_on(scale, &idx)?;
    let mut acc = std::collections::BTreeMap::new();
    for _ in 0..rng.gen_range(1..25usize) {
        *acc.entry([rng.gen_range(0..span), 0]).or_insert(0.0) += rng.gen_range(0.01..1.0);
    }
    let total: f64 = acc.values().sum();
    let acc: std::collections::BTreeMap<_, _> =
        acc.into_iter().map(|(k, v)| (k, v / total)).collect();
    let sigma = DeltaMeasure::from_atoms(scale, acc)?;
    let mut pairs = Vec::new();
    for (p, _) in mu.atoms() {
        for (q, _) in sigma.atoms() {
            if rng.gen_bool(0.6) {
                pairs.push((*p, *q));
            }
        }
    }
    if pairs.is_empty() {
        pairs.push((mu.atoms()[0].0, sigma.atoms()[0].0));
    }
    let g = GoodPairSet { scale, pairs, mass: 0.0 };
    l2_lower_bound_check(&mu, &sigma, &g)
}

fn random_transversality_instance(
    rng: &mut ChaCha8Rng,
) -> Result<flatlab::grid::TransversalityReport> {
    let scale = Scale::new(6, 2)?;
    let span = 1i64 << 6;
    let n = rng.gen_range(1..=200usize);
    let cells: Vec<[i64; 2]> = (0..n)
        .map(|_| [rng.gen_range(0..span), rng.gen_range(0..span)])
        .collect();
    let y = CellSet::new(scale, cells)?;
    loop {
        let e1 = Direction::from_angle(rng.gen_range(0.0..std::f64::consts::PI)).unwrap();
        let e2 = Direction::from_angle(rng.gen_range(0.0..std::f64::consts::PI)).unwrap();
        if e1.projection_distance(&e2) < 1e-6 {
            continue;
        }
        return transversality_check(&y, &e1, &e2, flatlab::grid::DEFAULT_TRANSVERSALITY_CONSTANT);
    }
}

/// A random band-limited spectrum with a spread profile: a cone envelope
/// times a few random low-frequency phase modes. Spatially this is a
/// handful of shifted concentrated kernels, so the L1/L2 spreading
/// hypothesis holds; per-point random amplitudes or phases would spread
/// the function over the whole period box and defeat it.
pub fn random_spread_spectrum(rng: &mut ChaCha8Rng, radius: f64, h: f64) -> SampledField {
    let shifts: Vec<[f64; 2]> = (0..4)
        .map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)])
        .collect();
    let half_n = (radius / h).floor() as i64;
    let side = (2 * half_n + 1) as usize;
    let mut values = vec![num_complex::Complex64::default(); side * side];
    for i in -half_n..=half_n {
        for j in -half_n..=half_n {
            let (x, y) = (i as f64 * h, j as f64 * h);
            let rho = (x * x + y * y).sqrt();
            if rho <= radius {
                let mut mode = num_complex::Complex64::new(1.0, 0.0);
                for v in &shifts {
                    let phase = 2.0 * std::f64::consts::PI * (x * v[0] + y * v[1]);
                    mode += 0.3 * num_complex::Complex64::from_polar(1.0, phase);
                }
                values[((i + half_n) as usize) * side + (j + half_n) as usize] =
                    (1.0 - rho / radius) * mode;
            }
        }
    }
    SampledField { dim: 2, h, half_n, values, radius }
}

/// Binary spectrum dump: interleaved (re, im) little-endian float64,
/// row-major over the sampled square, with a JSON sidecar header.
fn dump_spectrum(field: &SampledField, out: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(field.values.len() * 16);
    for v in &field.values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    std::fs::create_dir_all(out)
        .map_err(|e| Error::InvalidParameter(format!("creating {}: {e}", out.display())))?;
    std::fs::write(out.join("spectrum.f64"), &bytes)
        .map_err(|e| Error::InvalidParameter(format!("writing spectrum: {e}")))?;
    #[derive(Serialize)]
    struct Sidecar {
        layout: &'static str,
        rows: usize,
        cols: usize,
        h: f64,
        radius: f64,
        half_n: i64,
    }
    let side = field.side();
    let sidecar = Sidecar {
        layout: "complex_f64_interleaved_le_row_major",
        rows: if field.dim == 1 { 1 } else { side },
        cols: side,
        h: field.h,
        radius: field.radius,
        half_n: field.half_n,
    };
    let text = serde_json::to_string_pretty(&serde_json::to_value(&sidecar).unwrap()).unwrap();
    std::fs::write(out.join("spectrum.json"), text + "\n")
        .map_err(|e| Error::InvalidParameter(format!("writing sidecar: {e}")))?;
    Ok(())
}
