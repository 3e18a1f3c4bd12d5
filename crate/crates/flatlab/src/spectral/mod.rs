//! Fourier transforms, L^p ball averages, Riesz energies, J-sequences,
//! the flattening iteration and the band-limited verifier.

pub mod energy;
pub mod fourier;
pub mod mollifier;

pub use energy::{
    flattening_iteration, fourier_energy_bridge, j_sequence, riesz_energy, riesz_energy_fourier,
    riesz_energy_kernel, riesz_energy_mollified, BridgeRow, EnergyMethod, EnergyProfile, EnergyRow,
};
pub use fourier::{
    band_limited_flattening, fourier_eval, fourier_eval_fft, lp_ball_average, lp_ball_averages,
    parseval_pair, BandLimitedReport, SampledField, DEFAULT_FREQ_SPACING,
};
pub use mollifier::Mollifier;

use serde::Serialize;

/// One row of a Fourier ball-average sweep.
#[derive(Clone, Debug, Serialize)]
pub struct FourierRow {
    pub p: u32,
    pub r: f64,
    pub lp_avg: f64,
}

/// Tabulated `(p, R) -> ||sigma_hat||_{L^p(B(R))}^p` statistics with
/// log-log slope estimates across R.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FourierProfile {
    pub rows: Vec<FourierRow>,
}

impl FourierProfile {
    pub fn from_table(ps: &[u32], rs: &[f64], table: &[Vec<f64>]) -> Self {
        let mut rows = Vec::new();
        for (ri, &r) in rs.iter().enumerate() {
            for (pi, &p) in ps.iter().enumerate() {
                rows.push(FourierRow { p, r, lp_avg: table[ri][pi] });
            }
        }
        FourierProfile { rows }
    }

    /// Least-squares slope of `log lp_avg` against `log R` for one `p`.
    pub fn loglog_slope(&self, p: u32) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|row| row.p == p && row.lp_avg > 0.0)
            .map(|row| (row.r.ln(), row.lp_avg.ln()))
            .collect();
        least_squares_slope(&pts)
    }

    pub fn csv_header() -> &'static str {
        "p,r,lp_avg"
    }

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| format!("{},{},{}", r.p, r.r, r.lp_avg))
            .collect()
    }
}

/// Slope of the least-squares line through `(x, y)` pairs.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}
