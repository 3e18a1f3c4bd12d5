//! The fixed radial bump used for all mollifications.
//!
//! `psi(x) = c_d * exp(-1/(1-|x|^2))` on `|x| < 1`, zero outside, with
//! `c_d` normalizing the integral to one (computed once by quadrature).
//! `psi_delta(x) = delta^-d psi(x/delta)`. The profile is radially
//! decreasing, so `psi >= psi(1/2)` on the half ball, which is the shape
//! constraint the estimates need up to constants.

use crate::error::{Error, Result};
use crate::tol;

fn bump_raw(r2: f64) -> f64 {
    if r2 < 1.0 {
        (-1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

/// Composite Simpson on [a, b]; the integrands here vanish to all orders
/// at the endpoints, so convergence is fast.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

#[derive(Clone, Copy, Debug)]
pub struct Mollifier {
    dim: u8,
    /// Normalizing constant `c_d`.
    norm_const: f64,
    /// `||psi||_2` (used by the J-sequence bounds).
    l2_norm: f64,
}

impl Mollifier {
    pub fn new(dim: u8) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter("mollifier dimension must be 1 or 2".into()));
        }
        let n = 1 << 14;
        let (raw, raw2) = if dim == 1 {
            (
                simpson(|x| bump_raw(x * x), -1.0, 1.0, n),
                simpson(|x| bump_raw(x * x).powi(2), -1.0, 1.0, n),
            )
        } else {
            let two_pi = 2.0 * std::f64::consts::PI;
            (
                two_pi * simpson(|r| r * bump_raw(r * r), 0.0, 1.0, n),
                two_pi * simpson(|r| r * bump_raw(r * r).powi(2), 0.0, 1.0, n),
            )
        };
        // Self-check the quadrature by halving the mesh.
        let raw_half = if dim == 1 {
            simpson(|x| bump_raw(x * x), -1.0, 1.0, n / 2)
        } else {
            2.0 * std::f64::consts::PI * simpson(|r| r * bump_raw(r * r), 0.0, 1.0, n / 2)
        };
        if (raw - raw_half).abs() > tol::MOLLIFIER_NORM_TOL {
            return Err(Error::PropertyViolated(format!(
                "mollifier quadrature did not converge: {raw} vs {raw_half}"
            )));
        }
        let norm_const = 1.0 / raw;
        let l2_norm = (norm_const * norm_const * raw2).sqrt();
        Ok(Mollifier { dim, norm_const, l2_norm })
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    pub fn norm_const(&self) -> f64 {
        self.norm_const
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm
    }

    /// `psi(x)` as a function of `|x|^2`.
    pub fn eval_r2(&self, r2: f64) -> f64 {
        self.norm_const * bump_raw(r2)
    }

    /// `psi_delta(x)` as a function of `|x|^2` and the scale.
    pub fn eval_scaled_r2(&self, delta: f64, r2: f64) -> f64 {
        let inv = 1.0 / delta;
        let scale = if self.dim == 1 { inv } else { inv * inv };
        scale * self.eval_r2(r2 * inv * inv)
    }

    /// `||psi_r||_2 = r^(-d/2) ||psi||_2`.
    pub fn l2_norm_scaled(&self, r: f64) -> f64 {
        self.l2_norm * r.powf(-(self.dim as f64) / 2.0)
    }

    /// Sampled kernel of `psi_r` on a grid of the given spacing, returned
    /// as a row-major `(2hw+1)^d` array with its halfwidth.
    pub fn kernel_grid(&self, r: f64, spacing: f64) -> (Vec<f64>, usize) {
        let hw = (r / spacing).ceil() as usize;
        let n = 2 * hw + 1;
        if self.dim == 1 {
            let mut k = vec![0.0; n];
            for (i, v) in k.iter_mut().enumerate() {
                let x = (i as f64 - hw as f64) * spacing;
                *v = self.eval_scaled_r2(r, x * x);
            }
            (k, hw)
        } else {
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                let x = (i as f64 - hw as f64) * spacing;
                for j in 0..n {
                    let y = (j as f64 - hw as f64) * spacing;
                    k[i * n + j] = self.eval_scaled_r2(r, x * x + y * y);
                }
            }
            (k, hw)
        }
    }
}
