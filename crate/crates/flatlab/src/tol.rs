//! Centralised numeric tolerances.
//!
//! Every threshold used by the library and its verification suites lives
//! here with a one-line justification; no ad-hoc magic numbers at call
//! sites.

/// Probability-vector and mass-conservation slack: constructors and
/// convolution powers accumulate one rounding per atom merge.
pub const MASS_TOL: f64 = 1e-9;

/// Agreement required between the sparse direct and dense transform
/// convolution backends on overlap-tested inputs (absolute, per atom,
/// relative to the product of masses).
pub const CONV_BACKEND_TOL: f64 = 1e-9;

/// Relative agreement between the direct-sum and dense-transform Fourier
/// field backends.
pub const FOURIER_BACKEND_RTOL: f64 = 1e-8;

/// Relative error admitted for the Parseval bridge
/// `delta * int_0^{1/delta} |nu_hat|^2 = sum nu(z)^2` under quadrature.
pub const PARSEVAL_RTOL: f64 = 1e-6;

/// Mollifier normalisation: `int psi_delta = 1` to this absolute error.
pub const MOLLIFIER_NORM_TOL: f64 = 1e-8;

/// Multiplicative window inside which the clipped-kernel and mollified
/// Riesz energies must agree on cross-checked inputs.
pub const ENERGY_METHOD_FACTOR: f64 = 4.0;

/// Constant-density verification for measures that must be uniform on
/// their support (relative deviation of min/max weight).
pub const CONSTANT_DENSITY_TOL: f64 = 1e-12;

/// Slack for inequalities that hold exactly in real arithmetic and are
/// re-checked in floating point (Cauchy-Schwarz, Young, Hoelder chains).
pub const EXACT_INEQ_SLACK: f64 = 1e-12;

/// Finite-difference consistency between a user-supplied derivative
/// evaluator and its primitive.
pub const DERIVATIVE_CONSISTENCY_RTOL: f64 = 1e-4;

/// Sample count for curve / contraction certificates over their domain.
pub const CERTIFICATE_SAMPLES: usize = 1 << 12;

/// Sample count for derivative consistency checks.
pub const DERIVATIVE_SAMPLES: usize = 1 << 10;
