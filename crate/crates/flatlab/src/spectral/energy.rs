//! Riesz energies, J-sequences and the flattening iteration.
//!
//! The computational default is the clipped-kernel energy
//! `I_alpha^delta(mu) = sum_{z,z'} mu(z) mu(z') max(|z-z'|, delta)^-alpha`,
//! an exact O(N^2) lattice sum comparable (up to constants absorbed by the
//! cross-check) to the mollified energy `I_alpha(mu * psi_delta)`. The
//! mollified method is a small-input cross-check and must agree with the
//! kernel within a factor of four; the Fourier-side method
//! `int_{B(1/delta)} |mu_hat|^2 |xi|^(alpha-d)` drops the dimensional
//! constant `c(s)` and is used for trend comparisons only.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec;
use crate::fft;
use crate::grid::Scale;
use crate::measure::DeltaMeasure;
use crate::spectral::fourier;
use crate::spectral::mollifier::Mollifier;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EnergyMethod {
    Kernel,
    Mollified,
    Fourier,
}

/// Power kernels get branch-free fast paths for the half-integer exponents
/// the suites use; the fast paths are exact on dyadic squared distances.
#[derive(Clone, Copy)]
enum PowPath {
    Half,
    One,
    ThreeHalves,
    Generic(f64),
}

impl PowPath {
    fn new(alpha: f64) -> Self {
        if alpha == 0.5 {
            PowPath::Half
        } else if alpha == 1.0 {
            PowPath::One
        } else if alpha == 1.5 {
            PowPath::ThreeHalves
        } else {
            PowPath::Generic(alpha)
        }
    }

    /// `d2^(-alpha/2) = |x - y|^(-alpha)`.
    #[inline(always)]
    fn eval(self, d2: f64) -> f64 {
        match self {
            PowPath::Half => 1.0 / d2.sqrt().sqrt(),
            PowPath::One => 1.0 / d2.sqrt(),
            PowPath::ThreeHalves => d2.sqrt().sqrt() / (d2 * d2).sqrt(),
            PowPath::Generic(alpha) => d2.powf(-alpha / 2.0),
        }
    }
}

/// Clipped-kernel Riesz energy (see module docs). `delta` is the clip
/// radius; pairs closer than `delta` contribute `delta^-alpha`.
pub fn riesz_energy_kernel(mu: &DeltaMeasure, alpha: f64, delta: f64) -> Result<f64> {
    // The clip keeps the lattice sum finite for every positive exponent,
    // so the kernel method accepts all alpha in (0, 2); the continuum
    // methods below need alpha < d for local integrability.
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel energy exponent alpha must lie in (0, 2), got {alpha}"
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("energy clip radius must be positive".into()));
    }
    let n = mu.len();
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for (p, w) in mu.positions() {
        xs.push(p[0]);
        ys.push(p[1]);
        ws.push(w);
    }
    let path = PowPath::new(alpha);
    let d2_min = delta * delta;
    let clip = path.eval(d2_min);
    let off_diag = exec::map_tiles(n, 256, |range| {
        let mut acc = 0.0;
        for i in range {
            let (xi, yi, wi) = (xs[i], ys[i], ws[i]);
            let mut row = 0.0;
            for j in i + 1..n {
                let dx = xs[j] - xi;
                let dy = ys[j] - yi;
                let d2 = dx * dx + dy * dy;
                let k = if d2 <= d2_min { clip } else { path.eval(d2) };
                row += ws[j] * k;
            }
            acc += wi * row;
        }
        acc
    });
    let diag: Vec<f64> = ws.iter().map(|w| w * w).collect();
    Ok(2.0 * exec::pairwise_sum(&off_diag) + exec::pairwise_sum(&diag) * clip)
}

/// Mollified energy `I_alpha(mu * psi_delta)` by double Riemann sum on a
/// `delta/4` grid; cross-check only, refused above a small budget.
pub fn riesz_energy_mollified(mu: &DeltaMeasure, alpha: f64, delta: f64) -> Result<f64> {
    check_alpha(mu, alpha)?;
    if mu.len() > 512 {
        return Err(Error::BudgetExceeded(
            "mollified energy is a cross-check; refuse > 512 atoms".into(),
        ));
    }
    let h = delta / 4.0;
    let (lo, hi) = mu.bbox();
    let dim = mu.dim() as usize;
    let mut npts = [1usize; 2];
    for a in 0..dim {
        npts[a] = (((hi[a] - lo[a]) + 2.0 * delta) / h).ceil() as usize + 1;
    }
    let total: usize = npts[0] * npts[1];
    if total > 8192 {
        return Err(Error::BudgetExceeded(format!(
            "mollified energy grid of {total} points"
        )));
    }
    let moll = Mollifier::new(mu.dim())?;
    let atoms: Vec<([f64; 2], f64)> = mu.positions().collect();
    let mut pts = Vec::with_capacity(total);
    let mut dens = Vec::with_capacity(total);
    for i in 0..npts[0] {
        for j in 0..npts[1] {
            let x = lo[0] - delta + i as f64 * h;
            let y = if dim == 2 { lo[1] - delta + j as f64 * h } else { 0.0 };
            let mut v = 0.0;
            for &(p, w) in &atoms {
                let dx = x - p[0];
                let dy = y - p[1];
                v += w * moll.eval_scaled_r2(delta, dx * dx + dy * dy);
            }
            if v > 0.0 {
                pts.push([x, y]);
                dens.push(v);
            }
        }
    }
    let path = PowPath::new(alpha);
    let vol = h.powi(dim as i32);
    let m = pts.len();
    let sums = exec::map_tiles(m, 128, |range| {
        let mut acc = 0.0;
        for i in range {
            let mut row = 0.0;
            for j in 0..m {
                let dx = pts[j][0] - pts[i][0];
                let dy = pts[j][1] - pts[i][1];
                let d2 = dx * dx + dy * dy;
                // Diagonal cell: evaluate the kernel at half a mesh.
                let d2 = d2.max(h * h / 4.0);
                row += dens[j] * path.eval(d2);
            }
            acc += dens[i] * row;
        }
        acc
    });
    Ok(exec::pairwise_sum(&sums) * vol * vol)
}

/// Fourier-side comparative statistic
/// `int_{B(1/delta)} |mu_hat(xi)|^2 |xi|^(alpha-d) dxi` (no `c(s)`):
/// trend cross-checks only, never absolute comparison.
pub fn riesz_energy_fourier(mu: &DeltaMeasure, alpha: f64, delta: f64, h: f64) -> Result<f64> {
    check_alpha(mu, alpha)?;
    let r = 1.0 / delta;
    let d = mu.dim();
    let n_per_axis = (2.0 * r / h).ceil() as usize + 1;
    let total = if d == 1 { n_per_axis } else { n_per_axis * n_per_axis };
    if total > (1 << 24) {
        return Err(Error::BudgetExceeded(format!(
            "fourier energy lattice of {total} points"
        )));
    }
    let field = fourier::fourier_eval(mu, h, r)?;
    let expo = alpha - d as f64;
    let mut acc = 0.0;
    if d == 1 {
        for i in -field.half_n..=field.half_n {
            let xi = (i as f64 * h).abs().max(h / 2.0);
            if xi <= r {
                acc += field.at(i, 0).norm_sqr() * xi.powf(expo);
            }
        }
        Ok(acc * h)
    } else {
        for i in -field.half_n..=field.half_n {
            for j in -field.half_n..=field.half_n {
                let p = field.xi(i, j);
                let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
                if norm <= r {
                    acc += field.at(i, j).norm_sqr() * norm.max(h / 2.0).powf(expo);
                }
            }
        }
        Ok(acc * h * h)
    }
}

fn check_alpha(mu: &DeltaMeasure, alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < mu.dim() as f64) {
        return Err(Error::InvalidParameter(format!(
            "energy exponent alpha must lie in (0, {}), got {alpha}",
            mu.dim()
        )));
    }
    Ok(())
}

/// Dispatch over the three methods. For `Fourier` the lattice spacing is
/// the default `1/8`.
pub fn riesz_energy(mu: &DeltaMeasure, alpha: f64, delta: f64, method: EnergyMethod) -> Result<f64> {
    match method {
        EnergyMethod::Kernel => riesz_energy_kernel(mu, alpha, delta),
        EnergyMethod::Mollified => riesz_energy_mollified(mu, alpha, delta),
        EnergyMethod::Fourier => {
            riesz_energy_fourier(mu, alpha, delta, fourier::DEFAULT_FREQ_SPACING)
        }
    }
}

// ---------------------------------------------------------------------------
// J-sequences
// ---------------------------------------------------------------------------

/// `J_r(k) = || (mu * sigma)^{2^k} * psi_r ||_2` for `k = 0 .. k_max`.
///
/// Powers are exact discrete convolutions (repeated squaring); the
/// mollification is a grid convolution with the sampled `psi_r` kernel and
/// the L2 norm a Riemann sum on the measure's own lattice. Discrete
/// Young's inequality makes the computed sequence nonincreasing.
pub fn j_sequence(
    mu: &DeltaMeasure,
    sigma: &DeltaMeasure,
    r: f64,
    k_max: u32,
) -> Result<Vec<f64>> {
    if mu.scale() != sigma.scale() {
        return Err(Error::ScaleMismatch("j_sequence operands must share scale".into()));
    }
    if !(r >= mu.delta()) {
        return Err(Error::InvalidParameter(
            "mollification radius below the lattice spacing".into(),
        ));
    }
    let moll = Mollifier::new(mu.dim())?;
    let mut current = mu.convolve(sigma)?;
    let mut out = Vec::with_capacity(k_max as usize + 1);
    for k in 0..=k_max {
        out.push(mollified_l2_norm(&current, r, &moll)?);
        if k < k_max {
            current = current.convolve(&current)?;
        }
    }
    Ok(out)
}

/// `|| W * psi_r ||_{L^2}` with the kernel sampled on W's lattice.
pub fn mollified_l2_norm(w: &DeltaMeasure, r: f64, moll: &Mollifier) -> Result<f64> {
    let delta = w.delta();
    let (kernel, hw) = moll.kernel_grid(r, delta);
    let dim = w.dim() as usize;
    // Dense weight grid.
    let mut lo = [i64::MAX; 2];
    let mut hi = [i64::MIN; 2];
    for (idx, _) in w.atoms() {
        for a in 0..2 {
            lo[a] = lo[a].min(idx[a]);
            hi[a] = hi[a].max(idx[a]);
        }
    }
    let side = |a: usize| (hi[a] - lo[a] + 1) as usize;
    let kn = 2 * hw + 1;
    if dim == 1 {
        let n = side(0);
        if n.saturating_mul(kn) > crate::measure::DENSE_CELL_LIMIT {
            return Err(Error::BudgetExceeded("j_sequence grid".into()));
        }
        let mut grid = vec![0.0; n];
        for &(idx, wt) in w.atoms() {
            grid[(idx[0] - lo[0]) as usize] = wt;
        }
        let f = fft::convolve_1d(&grid, &kernel);
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        Ok((exec::pairwise_sum(&sq) * delta).sqrt())
    } else {
        let (nr, nc) = (side(0), side(1));
        let cells = (nr + kn - 1).saturating_mul(nc + kn - 1);
        if cells > crate::measure::DENSE_CELL_LIMIT {
            return Err(Error::BudgetExceeded("j_sequence grid".into()));
        }
        let mut grid = vec![0.0; nr * nc];
        for &(idx, wt) in w.atoms() {
            grid[(idx[0] - lo[0]) as usize * nc + (idx[1] - lo[1]) as usize] = wt;
        }
        let (f, _) = fft::convolve_2d(&grid, (nr, nc), &kernel, (kn, kn));
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        Ok((exec::pairwise_sum(&sq) * delta * delta).sqrt())
    }
}

// ---------------------------------------------------------------------------
// Flattening iteration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct EnergyRow {
    pub alpha: f64,
    pub delta_m: u32,
    pub k: u32,
    pub method: EnergyMethod,
    pub value: f64,
    /// Fitted exponent `log I / log(1/delta)`; signed, since energies of
    /// spread-out self-convolutions may drop below one.
    pub kappa: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct EnergyProfile {
    pub rows: Vec<EnergyRow>,
}

impl EnergyProfile {
    /// kappa values for one delta, in increasing k.
    pub fn kappas_at(&self, delta_m: u32) -> Vec<(u32, f64)> {
        let mut v: Vec<(u32, f64)> = self
            .rows
            .iter()
            .filter(|r| r.delta_m == delta_m)
            .map(|r| (r.k, r.kappa))
            .collect();
        v.sort_by_key(|&(k, _)| k);
        v
    }

    pub fn kappa_nonincreasing(&self, delta_m: u32) -> bool {
        let ks = self.kappas_at(delta_m);
        ks.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12)
    }

    pub fn csv_header() -> &'static str {
        "alpha,delta_m,k,method,value,kappa"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{:?},{},{}",
                    r.alpha, r.delta_m, r.k, r.method, r.value, r.kappa
                )
            })
            .collect()
    }
}

/// Tabulate `k -> I_t^delta(sigma^k)` for `k = 1..k_max` across the given
/// scales, with fitted exponents `kappa_k(delta)`.
pub fn flattening_iteration(
    sigma: &DeltaMeasure,
    t: f64,
    delta_ms: &[u32],
    k_max: u32,
) -> Result<EnergyProfile> {
    if k_max < 1 {
        return Err(Error::InvalidParameter("k_max must be >= 1".into()));
    }
    let mut profile = EnergyProfile::default();
    for &dm in delta_ms {
        let scale = Scale::new(dm, sigma.dim())?;
        if scale.m() > sigma.scale().m() {
            return Err(Error::ScaleTooFine(format!(
                "flattening at 2^-{dm} needs a measure at least that fine"
            )));
        }
        let base = sigma.coarsen(scale)?;
        let delta = scale.delta();
        let log_inv = -(delta.ln());
        let mut power = base.clone();
        for k in 1..=k_max {
            if k > 1 {
                power = power.convolve(&base)?;
            }
            let value = riesz_energy_kernel(&power, t, delta)?;
            profile.rows.push(EnergyRow {
                alpha: t,
                delta_m: dm,
                k,
                method: EnergyMethod::Kernel,
                value,
                kappa: value.ln() / log_inv,
            });
        }
    }
    Ok(profile)
}

// ---------------------------------------------------------------------------
// Fourier <-> energy bridge
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct BridgeRow {
    pub r: f64,
    pub p: u32,
    pub u: f64,
    /// `||sigma_hat||_{L^p(B(R))}^p`.
    pub lhs: f64,
    /// `R^(2-u) * I_u^{1/R}(sigma^{p/2})`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Sweep the bridge inequality `||sigma_hat||_{L^p(B(R))}^p <= C R^(2-u)
/// I_u^{1/R}(sigma^k)` (`p = 2k`) across radii, reporting the empirical
/// ratios.
pub fn fourier_energy_bridge(
    sigma: &DeltaMeasure,
    p: u32,
    radii: &[f64],
    u: f64,
    h: f64,
) -> Result<Vec<BridgeRow>> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::InvalidParameter("bridge exponent p must be even".into()));
    }
    if !(u > 0.0 && u < 2.0) {
        return Err(Error::InvalidParameter("bridge exponent u must lie in (0,2)".into()));
    }
    let k = p / 2;
    let power = sigma.self_convolution_power(k)?;
    let lhs_table = fourier::lp_ball_averages(sigma, &[p], radii, h)?;
    let mut rows = Vec::with_capacity(radii.len());
    for (ri, &r) in radii.iter().enumerate() {
        let lhs = lhs_table[ri][0];
        let energy = riesz_energy_kernel(&power, u, 1.0 / r)?;
        let rhs = r.powf(2.0 - u) * energy;
        rows.push(BridgeRow { r, p, u, lhs, rhs, ratio: lhs / rhs });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
