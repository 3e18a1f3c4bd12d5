//! Orchestrated empirical probes: minimal capture sets and the capture
//! counting table, sumset growth for good-pair sets, row-structure
//! diagnostics inside a single coarse square, and the convolution
//! L2 lower-bound check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{cell_sumset, pair_sumset, CellSet, Scale};
use crate::measure::DeltaMeasure;
use crate::curve::TangentFrame;
use crate::spectral::{riesz_energy_kernel, least_squares_slope};
use crate::tol;
use crate::uniformize::{verify_uniform, UniformSetRecord, UniformVerdict};

// ---------------------------------------------------------------------------
// Minimal capture sets
// ---------------------------------------------------------------------------

/// Shortest prefix of the mass-sorted cells whose cumulative mass reaches
/// the target (ties in weight broken by canonical index order). At the
/// cell level this minimizes cardinality among all capture sets.
pub fn minimal_capture_set(pi: &DeltaMeasure, mass_target: f64) -> Result<CellSet> {
    if !(mass_target > 0.0) {
        return Err(Error::InvalidParameter("mass target must be positive".into()));
    }
    if mass_target > pi.total_mass() * (1.0 + tol::EXACT_INEQ_SLACK) {
        return Err(Error::InvalidParameter(format!(
            "mass target {mass_target} exceeds total mass {}",
            pi.total_mass()
        )));
    }
    let mut order: Vec<([i64; 2], f64)> = pi.atoms().to_vec();
    order.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let mut cum = 0.0;
    let mut cells = Vec::new();
    for (idx, w) in order {
        cells.push(idx);
        cum += w;
        if cum >= mass_target {
            break;
        }
    }
    CellSet::new(pi.scale(), cells)
}

// ---------------------------------------------------------------------------
// Capture counting (the energy -> covering-number probe)
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CaptureRow {
    pub delta_m: u32,
    /// `|E|_delta` for the greedy-minimal capture set of mass `delta^eps`.
    pub capture_cells: usize,
    /// `delta^-(alpha+eps)`.
    pub threshold: f64,
    pub pass: bool,
    /// `I_alpha^delta` of the (coarsened) first factor, for the record.
    pub energy_mu: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CaptureTable {
    pub alpha: f64,
    pub epsilon: f64,
    pub rows: Vec<CaptureRow>,
    /// Least-squares exponent of `|E|_delta` in `1/delta`.
    pub fitted_exponent: Option<f64>,
}

impl CaptureTable {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn csv_header() -> &'static str {
        "delta_m,capture_cells,threshold,pass,energy_mu"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{}",
                    r.delta_m, r.capture_cells, r.threshold, r.pass, r.energy_mu
                )
            })
            .collect()
    }
}

/// For each scale: coarsen both measures, convolve, take the greedy
/// minimal capture set `E` of mass `delta^eps`, and tabulate `|E|_delta`
/// against `delta^-(alpha+eps)`.
pub fn capture_counting_experiment(
    mu: &DeltaMeasure,
    sigma: &DeltaMeasure,
    alpha: f64,
    epsilon: f64,
    delta_ms: &[u32],
) -> Result<CaptureTable> {
    if mu.dim() != sigma.dim() {
        return Err(Error::ScaleMismatch("capture experiment: dimension mismatch".into()));
    }
    let mut rows = Vec::with_capacity(delta_ms.len());
    for &dm in delta_ms {
        let scale = Scale::new(dm, mu.dim())?;
        let mu_d = mu.coarsen(scale)?;
        let sigma_d = sigma.coarsen(scale)?;
        let conv = mu_d.convolve(&sigma_d)?;
        let delta = scale.delta();
        let target = delta.powf(epsilon) * conv.total_mass();
        let capture = minimal_capture_set(&conv, target)?;
        let threshold = delta.powf(-(alpha + epsilon));
        let energy_mu = riesz_energy_kernel(&mu_d, alpha, delta)?;
        rows.push(CaptureRow {
            delta_m: dm,
            capture_cells: capture.len(),
            threshold,
            pass: capture.len() as f64 >= threshold,
            energy_mu,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            (
                (r.delta_m as f64) * std::f64::consts::LN_2,
                (r.capture_cells as f64).ln(),
            )
        })
        .collect();
    Ok(CaptureTable { alpha, epsilon, rows, fitted_exponent: least_squares_slope(&pts) })
}

// ---------------------------------------------------------------------------
// Sumset growth
// ---------------------------------------------------------------------------

/// A set of good pairs `(p, q)` with `p` in the uniform set and `q` a
/// support cell of the measure, with its product mass cached.
#[derive(Clone, Debug, Serialize)]
pub struct GoodPairSet {
    pub scale: Scale,
    pub pairs: Vec<([i64; 2], [i64; 2])>,
    pub mass: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PairSelection {
    AllPairs,
    /// Keep pairs in decreasing product-mass order until the given
    /// fraction of the total pair mass is covered.
    TopMass(f64),
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub x_size: usize,
    pub sumset_size: usize,
    pub growth_ratio: f64,
    /// The growth threshold `delta^-eps |X|` for the configured epsilon.
    pub epsilon: f64,
    pub threshold: f64,
    pub meets_threshold: bool,
    /// `max_Q |X cap Q|` over coarse squares `Q` at scale `sqrt(delta)`
    /// (the local-size hypothesis statistic).
    pub max_local_count: usize,
    /// The local-size bound `delta^-(alpha/2)` it is compared against.
    pub local_bound: f64,
    pub local_hypothesis_ok: bool,
    pub pair_count: usize,
    pub pair_mass: f64,
}

/// Sumset growth of the fibers of a good-pair set built from a verified
/// uniform set and a measure on the curve.
pub fn sumset_growth_experiment(
    x: &UniformSetRecord,
    sigma: &DeltaMeasure,
    selection: PairSelection,
    alpha: f64,
    epsilon: f64,
) -> Result<GrowthReport> {
    match verify_uniform(&x.cells, x.t_block, x.m_blocks)? {
        UniformVerdict::Uniform(_) => {}
        other => {
            return Err(Error::InvalidParameter(format!(
                "sumset growth needs a uniform X: {other:?}"
            )))
        }
    }
    if sigma.dim() != 2 || x.cells.scale() != sigma.scale() {
        return Err(Error::ScaleMismatch(
            "X and sigma must share a planar scale".into(),
        ));
    }
    let delta = sigma.delta();
    let x_size = x.cells.len();
    let nu_weight = 1.0 / x_size as f64;

    let (pairs, pair_mass) = match selection {
        PairSelection::AllPairs => {
            let mut pairs = Vec::with_capacity(x_size * sigma.len());
            for &p in x.cells.indices() {
                for (q, _) in sigma.atoms() {
                    pairs.push((p, *q));
                }
            }
            (pairs, sigma.total_mass())
        }
        PairSelection::TopMass(fraction) => {
            if !(0.0 < fraction && fraction <= 1.0) {
                return Err(Error::InvalidParameter("top-mass fraction must lie in (0,1]".into()));
            }
            // Pair mass nu(p) sigma(q) = sigma(q)/|X|: rank by sigma weight
            // descending, canonical order on ties.
            let mut ranked: Vec<([i64; 2], f64)> = sigma.atoms().to_vec();
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            let want = fraction * sigma.total_mass();
            let mut acc = 0.0;
            let mut fibers = Vec::new();
            for (q, w) in ranked {
                fibers.push(q);
                acc += w;
                if acc >= want {
                    break;
                }
            }
            let mut pairs = Vec::with_capacity(x_size * fibers.len());
            for &p in x.cells.indices() {
                for &q in &fibers {
                    pairs.push((p, q));
                }
            }
            (pairs, acc)
        }
    };
    let pair_mass_total = pair_mass * nu_weight * x_size as f64; // = (nu x sigma)(union G)

    let sumset = match selection {
        PairSelection::AllPairs => cell_sumset(&x.cells, &sigma.support_cells())?,
        PairSelection::TopMass(_) => pair_sumset(sigma.scale(), &pairs)?,
    };

    // Local-size statistic at the coarse scale 2^-floor(m/2).
    let m_half = (sigma.scale().m() / 2).max(1);
    let coarse = Scale::new(m_half, 2)?;
    let max_local = max_cells_per_coarse_square(&x.cells, coarse)?;
    let local_bound = delta.powf(-alpha / 2.0);

    let threshold = delta.powf(-epsilon) * x_size as f64;
    Ok(GrowthReport {
        x_size,
        sumset_size: sumset.len(),
        growth_ratio: sumset.len() as f64 / x_size as f64,
        epsilon,
        threshold,
        meets_threshold: sumset.len() as f64 >= threshold,
        max_local_count: max_local,
        local_bound,
        local_hypothesis_ok: (max_local as f64) <= local_bound,
        pair_count: pairs.len(),
        pair_mass: pair_mass_total,
    })
}

fn max_cells_per_coarse_square(cells: &CellSet, coarse: Scale) -> Result<usize> {
    let shift = cells.scale().m() - coarse.m();
    let mut keyed: Vec<([i64; 2], ())> = cells
        .indices()
        .iter()
        .map(|c| ([c[0] >> shift, c[1] >> shift], ()))
        .collect();
    keyed.sort_unstable_by_key(|(k, _)| *k);
    let mut best = 0usize;
    let mut run = 0usize;
    let mut last: Option<[i64; 2]> = None;
    for (k, _) in keyed {
        if Some(k) == last {
            run += 1;
        } else {
            run = 1;
            last = Some(k);
        }
        best = best.max(run);
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Row structure inside one coarse square
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct RowStructureReport {
    /// Histogram: per-rectangle cell count -> number of rectangles.
    pub histogram: std::collections::BTreeMap<u64, u64>,
    /// Rectangles of the tangent-aligned tiling meeting the square
    /// (bounding-box count in the tilted frame).
    pub rectangles_total: u64,
    /// Count of "full rows": rectangles with at least `Delta^(eta-1)` cells.
    pub full_rows: u64,
    pub full_threshold: f64,
    pub eta: f64,
}

/// Default `eta = (2 - alpha) / 4`.
pub fn default_eta(alpha: f64) -> f64 {
    (2.0 - alpha) / 4.0
}

/// Tile the plane with `delta x Delta` boxes aligned with the tangent
/// frame (long side along the tangent), count the cells of `XQ` per box,
/// and report the histogram together with the number of full rows.
///
/// `XQ` must lie inside a single square of scale `sqrt(delta)`
/// (`Delta = 2^-floor(m/2)`).
pub fn row_structure(
    xq: &CellSet,
    theta: &TangentFrame,
    eta: f64,
) -> Result<RowStructureReport> {
    if xq.scale().dim() != 2 {
        return Err(Error::InvalidParameter("row_structure needs planar cells".into()));
    }
    if xq.is_empty() {
        return Err(Error::Empty("row_structure on empty cell set".into()));
    }
    let m = xq.scale().m();
    let m_half = (m / 2).max(1);
    let shift = m - m_half;
    let first = xq.indices()[0];
    let q_key = [first[0] >> shift, first[1] >> shift];
    for c in xq.indices() {
        if [c[0] >> shift, c[1] >> shift] != q_key {
            return Err(Error::InvalidParameter(
                "row_structure: cells not contained in a single coarse square".into(),
            ));
        }
    }
    let delta = xq.scale().delta();
    let big_delta = (-(m_half as f64)).exp2();

    // Count cells per (tangential slab of length Delta, normal row of
    // width delta), keyed in frame coordinates.
    let mut counts: std::collections::BTreeMap<(i64, i64), u64> = Default::default();
    for c in xq.indices() {
        let p = [
            (c[0] as f64 + 0.5) * delta,
            (c[1] as f64 + 0.5) * delta,
        ];
        let (t, n) = theta.coords(p);
        let key = ((t / big_delta).floor() as i64, (n / delta).floor() as i64);
        *counts.entry(key).or_insert(0) += 1;
    }

    // Rectangles meeting the square: frame bounding box of the square's
    // corners (an overcount for tilted frames, exact for axis-aligned).
    let q_lo = [
        (q_key[0] << shift) as f64 * delta,
        (q_key[1] << shift) as f64 * delta,
    ];
    let mut t_range = (f64::INFINITY, f64::NEG_INFINITY);
    let mut n_range = (f64::INFINITY, f64::NEG_INFINITY);
    for &(dx, dy) in &[(0.0, 0.0), (big_delta, 0.0), (0.0, big_delta), (big_delta, big_delta)] {
        let (t, n) = theta.coords([q_lo[0] + dx, q_lo[1] + dy]);
        t_range = (t_range.0.min(t), t_range.1.max(t));
        n_range = (n_range.0.min(n), n_range.1.max(n));
    }
    let slabs = ((t_range.1 / big_delta).floor() as i64 - (t_range.0 / big_delta).floor() as i64
        + 1) as u64;
    let rows = ((n_range.1 / delta).floor() as i64 - (n_range.0 / delta).floor() as i64 + 1) as u64;
    let rectangles_total = slabs * rows;

    let full_threshold = big_delta.powf(eta - 1.0);
    let full_rows = counts.values().filter(|&&c| c as f64 >= full_threshold).count() as u64;
    let mut histogram: std::collections::BTreeMap<u64, u64> = Default::default();
    for &c in counts.values() {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let nonempty: u64 = histogram.values().sum();
    if rectangles_total > nonempty {
        histogram.insert(0, rectangles_total - nonempty);
    }
    Ok(RowStructureReport { histogram, rectangles_total, full_rows, full_threshold, eta })
}

// ---------------------------------------------------------------------------
// Convolution L2 lower bound
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct L2LowerBoundReport {
    /// `(mu x sigma)(union G)`.
    pub c: f64,
    /// `|{x + y : (x,y) in G}| / |spt mu|`.
    pub big_c: f64,
    /// `||mu * sigma||_{2,Sh}`.
    pub lhs: f64,
    /// `(c / sqrt(C)) ||mu||_{2,Sh}`.
    pub rhs: f64,
    pub ok: bool,
}

/// Check `||mu * sigma||_2 >= (c / sqrt(C)) ||mu||_2` for a constant
/// density `mu` and a pair set `G`. An `ok = false` report is a
/// build-blocking finding: the inequality follows from Cauchy-Schwarz
/// with explicit constants.
pub fn l2_lower_bound_check(
    mu: &DeltaMeasure,
    sigma: &DeltaMeasure,
    g: &GoodPairSet,
) -> Result<L2LowerBoundReport> {
    if mu.dim() != 1 || sigma.dim() != 1 {
        return Err(Error::InvalidParameter("l2 lower bound check is one-dimensional".into()));
    }
    if mu.scale() != sigma.scale() || g.scale != mu.scale() {
        return Err(Error::ScaleMismatch("l2 lower bound: scales must agree".into()));
    }
    if g.pairs.is_empty() {
        return Err(Error::Empty("empty good-pair set (degenerate c = 0)".into()));
    }
    // Constant density on the support, within tolerance.
    let mut min_w = f64::INFINITY;
    let mut max_w = f64::NEG_INFINITY;
    for &(_, w) in mu.atoms() {
        min_w = min_w.min(w);
        max_w = max_w.max(w);
    }
    if (max_w - min_w) / max_w > tol::CONSTANT_DENSITY_TOL {
        return Err(Error::InvalidParameter(
            "mu must have constant density on its support".into(),
        ));
    }
    let mut c = 0.0;
    let mut sums: Vec<i64> = Vec::with_capacity(g.pairs.len());
    for &(p, q) in &g.pairs {
        let wp = mu.weight_at(p);
        let wq = sigma.weight_at(q);
        if wp == 0.0 || wq == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "pair ({p:?}, {q:?}) references cells outside the supports"
            )));
        }
        c += wp * wq;
        sums.push(p[0] + q[0]);
    }
    sums.sort_unstable();
    sums.dedup();
    let big_c = sums.len() as f64 / mu.len() as f64;
    let conv = mu.convolve(sigma)?;
    let lhs = conv.l2_norm_sq().sqrt();
    let rhs = c / big_c.sqrt() * mu.l2_norm_sq().sqrt();
    Ok(L2LowerBoundReport {
        c,
        big_c,
        lhs,
        rhs,
        ok: lhs >= rhs * (1.0 - tol::EXACT_INEQ_SLACK),
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{tangent_projection, CurveSpec};
    use crate::measure::{from_ifs, IfsSpec};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn s(m: u32, dim: u8) -> Scale {
        Scale::new(m, dim).unwrap()
    }

    fn random_prob_1d(rng: &mut ChaCha8Rng, m: u32, atoms: usize) -> DeltaMeasure {
        let mut acc = BTreeMap::new();
        for _ in 0..atoms {
            *acc.entry([rng.gen_range(0..(1i64 << m)), 0]).or_insert(0.0) +=
                rng.gen_range(0.01..1.0);
        }
        let tot: f64 = acc.values().sum();
        let acc: BTreeMap<_, _> = acc.into_iter().map(|(k, v)| (k, v / tot)).collect();
        DeltaMeasure::from_atoms(s(m, 1), acc).unwrap()
    }

    // -- minimal_capture_set -------------------------------------------------

    #[test]
    fn capture_full_mass_is_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let nu = random_prob_1d(&mut rng, 6, 20);
        let e = minimal_capture_set(&nu, nu.total_mass()).unwrap();
        assert_eq!(e.len(), nu.len());
    }

    #[test]
    fn capture_uniform_prefix() {
        let nu = DeltaMeasure::lebesgue_1d(5).unwrap();
        for k in 1..=32usize {
            let e = minimal_capture_set(&nu, k as f64 / 32.0).unwrap();
            assert_eq!(e.len(), k);
        }
    }

    #[test]
    fn capture_matches_exhaustive_minimum() {
        // Brute force over all subsets for N <= 14.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let n_atoms = rng.gen_range(2..14);
            let nu = random_prob_1d(&mut rng, 6, n_atoms);
            let target = rng.gen_range(0.05..nu.total_mass());
            let greedy = minimal_capture_set(&nu, target).unwrap().len();
            let ws: Vec<f64> = nu.atoms().iter().map(|(_, w)| *w).collect();
            let n = ws.len();
            let mut best = usize::MAX;
            for mask in 1u32..(1 << n) {
                let mass: f64 = (0..n)
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| ws[i])
                    .sum();
                if mass >= target {
                    best = best.min(mask.count_ones() as usize);
                }
            }
            assert_eq!(greedy, best);
        }
    }

    #[test]
    fn capture_monotone_in_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let nu = random_prob_1d(&mut rng, 7, 40);
        let mut last = 0;
        for i in 1..=10 {
            let t = i as f64 / 10.0 * nu.total_mass();
            let e = minimal_capture_set(&nu, t).unwrap().len();
            assert!(e >= last);
            last = e;
        }
    }

    // -- capture counting ------------------------------------------------------

    #[test]
    fn atomic_sigma_adds_no_cells() {
        // Convolving with an atom translates: capture cardinalities match
        // those of mu itself, row by row.
        let mu = from_ifs(&IfsSpec::cantor4(), s(12, 1)).unwrap();
        let curve = CurveSpec::parabola();
        let mu2 = mu.lift_to_curve(&curve).unwrap();
        let atom = DeltaMeasure::atom(s(12, 2), [0, 0]).unwrap();
        let table = capture_counting_experiment(&mu2, &atom, 0.4, 0.05, &[8, 10, 12]).unwrap();
        for row in &table.rows {
            let scale = Scale::new(row.delta_m, 2).unwrap();
            let mu_d = mu2.coarsen(scale).unwrap();
            let target = scale.delta().powf(0.05) * mu_d.total_mass();
            let own = minimal_capture_set(&mu_d, target).unwrap().len();
            assert_eq!(row.capture_cells, own);
        }
    }

    #[test]
    fn capture_threshold_monotone_in_alpha() {
        let mu = from_ifs(&IfsSpec::cantor4(), s(10, 1)).unwrap();
        let lifted = mu.lift_to_curve(&CurveSpec::parabola()).unwrap();
        let t1 = capture_counting_experiment(&lifted, &lifted, 0.3, 0.05, &[8, 10]).unwrap();
        let t2 = capture_counting_experiment(&lifted, &lifted, 0.8, 0.05, &[8, 10]).unwrap();
        for (a, b) in t1.rows.iter().zip(t2.rows.iter()) {
            assert!(b.threshold >= a.threshold);
            // A pass can only turn into a fail when alpha grows.
            if b.pass {
                assert!(a.pass);
            }
        }
    }

    // -- sumset growth ---------------------------------------------------------

    fn uniform_record_from(cells: CellSet, t: u32, m: u32) -> UniformSetRecord {
        let branching = match verify_uniform(&cells, t, m).unwrap() {
            UniformVerdict::Uniform(b) => b,
            other => panic!("not uniform: {other:?}"),
        };
        UniformSetRecord { t_block: t, m_blocks: m, branching, cells }
    }

    #[test]
    fn growth_of_single_cell_is_fiber_size() {
        let nu = from_ifs(&IfsSpec::cantor4(), s(8, 1)).unwrap();
        let sigma = nu.lift_to_curve(&CurveSpec::parabola()).unwrap();
        let x = uniform_record_from(CellSet::new(s(8, 2), vec![[7, 3]]).unwrap(), 2, 4);
        let rep = sumset_growth_experiment(&x, &sigma, PairSelection::AllPairs, 0.5, 0.05).unwrap();
        assert_eq!(rep.x_size, 1);
        // One cell + |spt sigma| fibers, spillover included: between the
        // fiber count and 4x of it.
        assert!(rep.sumset_size >= sigma.len());
        assert!(rep.sumset_size <= 4 * sigma.len());
    }

    #[test]
    fn growth_of_full_grid_saturates_and_fails_local_hypothesis() {
        let nu = from_ifs(&IfsSpec::cantor4(), s(6, 1)).unwrap();
        let sigma = nu.lift_to_curve(&CurveSpec::parabola()).unwrap();
        let x = uniform_record_from(CellSet::full_unit_grid(s(6, 2)), 2, 3);
        let rep = sumset_growth_experiment(&x, &sigma, PairSelection::AllPairs, 0.5, 0.05).unwrap();
        // The sumset stays inside a boundedly enlarged grid (sigma spans
        // the unit square), so the ratio is O(1) rather than delta^-eps.
        assert!(rep.growth_ratio < 5.0, "saturated grid grew by {}", rep.growth_ratio);
        // |X cap Q| = delta^-1 > delta^-(alpha/2): hypothesis correctly fails.
        assert!(!rep.local_hypothesis_ok);
    }

    #[test]
    fn uniformized_cantor_slice_grows_at_fine_scale() {
        // A uniform record extracted from the lifted Cantor-4 support at
        // delta = 2^-12 paired against the measure itself: the curved
        // fibers force sumset growth by at least a factor 2 (frozen
        // fixture from the first validated run).
        use crate::uniformize::{extract_uniform, DEFAULT_ROUND_CAP};
        let nu = from_ifs(&IfsSpec::cantor4(), s(12, 1)).unwrap();
        let sigma = nu.lift_to_curve(&CurveSpec::parabola()).unwrap();
        let extraction =
            extract_uniform(&sigma.support_cells(), 2, 6, 0.2, DEFAULT_ROUND_CAP).unwrap();
        let record = extraction.records.first().expect("a record").clone();
        let rep =
            sumset_growth_experiment(&record, &sigma, PairSelection::AllPairs, 0.5, 0.05).unwrap();
        assert!(rep.growth_ratio >= 2.0, "growth ratio {}", rep.growth_ratio);
    }

    #[test]
    fn capture_exponent_monotone_across_dimension_family() {
        // Fitted |E|_delta exponents are nondecreasing across a family of
        // inputs of increasing Frostman dimension (Cantor-4 has dimension
        // 1/2, Lebesgue dimension 1).
        let curve = CurveSpec::parabola();
        let cantor = from_ifs(&IfsSpec::cantor4(), s(10, 1)).unwrap().lift_to_curve(&curve).unwrap();
        let lebesgue = DeltaMeasure::lebesgue_1d(10).unwrap().lift_to_curve(&curve).unwrap();
        let deltas = [8u32, 9, 10];
        let lo = capture_counting_experiment(&cantor, &cantor, 0.4, 0.05, &deltas).unwrap();
        let hi = capture_counting_experiment(&lebesgue, &lebesgue, 0.4, 0.05, &deltas).unwrap();
        let (e_lo, e_hi) = (lo.fitted_exponent.unwrap(), hi.fitted_exponent.unwrap());
        assert!(e_hi >= e_lo, "exponent {e_hi} < {e_lo}");
    }

    #[test]
    fn top_mass_selection_is_subset_of_all_pairs() {
        let nu = from_ifs(&IfsSpec::cantor4(), s(8, 1)).unwrap();
        let sigma = nu.lift_to_curve(&CurveSpec::parabola()).unwrap();
        let cells = CellSet::new(s(8, 2), vec![[3, 9], [200, 77]]).unwrap();
        let x = uniform_record_from(cells, 2, 4);
        let all = sumset_growth_experiment(&x, &sigma, PairSelection::AllPairs, 0.5, 0.05).unwrap();
        let top =
            sumset_growth_experiment(&x, &sigma, PairSelection::TopMass(0.5), 0.5, 0.05).unwrap();
        assert!(top.pair_count <= all.pair_count);
        assert!(top.sumset_size <= all.sumset_size);
        assert!(top.pair_mass <= all.pair_mass + 1e-12);
    }

    // -- row structure ---------------------------------------------------------

    #[test]
    fn one_full_row_histogram() {
        // A full horizontal row inside one Delta-square, axis-aligned frame.
        let m = 8u32;
        let m_half = 4u32;
        let row_cells: Vec<[i64; 2]> = (0..16).map(|i| [i, 5]).collect();
        let xq = CellSet::new(s(m, 2), row_cells).unwrap();
        let curve = CurveSpec::parabola();
        let frame = tangent_projection(&curve, 0.0).unwrap();
        let eta = default_eta(0.5);
        let rep = row_structure(&xq, &frame, eta).unwrap();
        let big_delta = (-(m_half as f64)).exp2();
        let row_len = (big_delta / xq.scale().delta()) as u64; // Delta^-1
        assert_eq!(rep.histogram.get(&row_len), Some(&1));
        // Everything else is empty.
        assert_eq!(rep.histogram.get(&0).copied().unwrap_or(0), rep.rectangles_total - 1);
        assert_eq!(rep.full_rows, 1);
        let total: u64 = rep
            .histogram
            .iter()
            .map(|(count, rects)| count * rects)
            .sum();
        assert_eq!(total, xq.len() as u64);
    }

    #[test]
    fn full_square_all_rows_full() {
        let m = 6u32;
        let mut cells = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                cells.push([i, j]);
            }
        }
        let xq = CellSet::new(s(m, 2), cells).unwrap();
        let frame = tangent_projection(&CurveSpec::parabola(), 0.0).unwrap();
        let rep = row_structure(&xq, &frame, default_eta(0.5)).unwrap();
        // Axis-aligned frame: every normal row of the square is full.
        assert_eq!(rep.full_rows, 8);
        assert_eq!(rep.histogram.get(&8), Some(&8));
    }

    #[test]
    fn product_structured_rows_counted() {
        // Full rows at the heights of a Cantor-like pattern: the full-row
        // count equals the number of pattern heights.
        let m = 8u32;
        let heights = [0i64, 3, 12, 15];
        let mut cells = Vec::new();
        for &h in &heights {
            for i in 0..16 {
                cells.push([i, h]);
            }
        }
        let xq = CellSet::new(s(m, 2), cells).unwrap();
        let frame = tangent_projection(&CurveSpec::parabola(), 0.0).unwrap();
        let rep = row_structure(&xq, &frame, default_eta(0.5)).unwrap();
        assert_eq!(rep.full_rows, heights.len() as u64);
    }

    #[test]
    fn row_structure_rejects_cells_spanning_squares() {
        let xq = CellSet::new(s(8, 2), vec![[0, 0], [200, 200]]).unwrap();
        let frame = tangent_projection(&CurveSpec::parabola(), 0.0).unwrap();
        assert!(row_structure(&xq, &frame, 0.3).is_err());
    }

    // -- l2 lower bound ----------------------------------------------------------

    #[test]
    fn l2_bound_equality_case_with_atom() {
        // G = everything, sigma an atom: conv is a translate, c = 1, C = 1.
        let mu = DeltaMeasure::lebesgue_1d(5).unwrap();
        let sigma = DeltaMeasure::atom(s(5, 1), [3, 0]).unwrap();
        let pairs: Vec<([i64; 2], [i64; 2])> =
            mu.atoms().iter().map(|(p, _)| (*p, [3, 0])).collect();
        let g = GoodPairSet { scale: mu.scale(), pairs, mass: 1.0 };
        let rep = l2_lower_bound_check(&mu, &sigma, &g).unwrap();
        assert!(rep.ok);
        assert!((rep.c - 1.0).abs() < 1e-12);
        assert!((rep.big_c - 1.0).abs() < 1e-12);
        assert!((rep.lhs - rep.rhs).abs() < 1e-12);
    }

    #[test]
    fn l2_bound_holds_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        for _ in 0..50 {
            let m = 6u32;
            let n_supp = rng.gen_range(2..30usize);
            let mut idx: Vec<[i64; 2]> = (0..n_supp)
                .map(|_| [rng.gen_range(0..(1i64 << m)), 0])
                .collect();
            idx.sort_unstable();
            idx.dedup();
            let mu = DeltaMeasure::uniform_on(s(m, 1), &idx).unwrap();
            let sigma = random_prob_1d(&mut rng, m, 25);
            let mut pairs = Vec::new();
            for (p, _) in mu.atoms() {
                for (q, _) in sigma.atoms() {
                    if rng.gen_bool(0.6) {
                        pairs.push((*p, *q));
                    }
                }
            }
            if pairs.is_empty() {
                continue;
            }
            let g = GoodPairSet { scale: mu.scale(), pairs, mass: 0.0 };
            let rep = l2_lower_bound_check(&mu, &sigma, &g).unwrap();
            assert!(rep.ok, "lhs {} < rhs {}", rep.lhs, rep.rhs);
        }
    }

    #[test]
    fn l2_bound_rejects_empty_g_and_nonconstant_mu() {
        let mu = DeltaMeasure::lebesgue_1d(4).unwrap();
        let sigma = DeltaMeasure::atom(s(4, 1), [0, 0]).unwrap();
        let empty = GoodPairSet { scale: mu.scale(), pairs: vec![], mass: 0.0 };
        assert!(l2_lower_bound_check(&mu, &sigma, &empty).is_err());

        let mut acc = BTreeMap::new();
        acc.insert([0i64, 0], 0.7);
        acc.insert([1, 0], 0.3);
        let skew = DeltaMeasure::from_atoms(s(4, 1), acc).unwrap();
        let g = GoodPairSet {
            scale: mu.scale(),
            pairs: vec![([0, 0], [0, 0])],
            mass: 0.0,
        };
        assert!(l2_lower_bound_check(&skew, &sigma, &g).is_err());
    }
}
