//! flatlab: a numerical laboratory for discretized measures on the line
//! and on strictly convex planar graphs.
//!
//! The crate implements the multiscale toolkit behind L^2-flattening
//! phenomenology for measures on curved graphs:
//!
//! - [`grid`]: dyadic cells, covering numbers, cell sumsets, directional
//!   projection counts and the transversality bound;
//! - [`measure`]: delta-measures (IFS discretizations, uniform and atomic
//!   examples), coarsening, restriction, similarity pushforwards,
//!   products, lifts to curves, discrete L2 norms, and exact lattice
//!   convolution with sparse and dense backends;
//! - [`perfectness`]: `(D, beta, U)`-uniform perfectness scans with exact
//!   breakpoint radii, Frostman exponents and checks;
//! - [`curve`]: strictly convex C^2 graphs, flatness constants, tangent
//!   frames and curve covers;
//! - [`spectral`]: Fourier fields and L^p ball averages, Riesz energies
//!   (clipped kernel / mollified / Fourier-side), J-sequences, the
//!   flattening iteration, the Fourier-energy bridge and the band-limited
//!   convolution verifier;
//! - [`uniformize`]: extraction and exact verification of uniform subsets;
//! - [`experiments`]: capture-set counting, sumset growth for good-pair
//!   sets, row-structure diagnostics, and the convolution L2 lower-bound
//!   check.
//!
//! Scans, double sums and field sweeps run tiled and data-parallel (rayon)
//! by default; build with `--no-default-features` for the sequential
//! fallback. Results are bit-identical across thread schedules and
//! between the two builds: tiles are fixed-size, reduced sequentially and
//! combined pairwise in order.

pub mod curve;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod fft;
pub mod grid;
pub mod measure;
pub mod perfectness;
pub mod spectral;
pub mod tol;
pub mod uniformize;

pub use error::{Error, ErrorClass, Result};
