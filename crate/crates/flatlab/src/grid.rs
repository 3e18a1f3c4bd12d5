//! Dyadic geometry on the line and in the plane.
//!
//! The whole crate works at scales `delta = 2^-m`. A *cell* at scale
//! `delta` is the half-open interval `[i*delta, (i+1)*delta)` (product of
//! such intervals in 2D), identified by its integer index tuple. Covering
//! numbers `|P|_delta` count the cells at scale `delta` meeting a set; they
//! agree with ball-covering numbers up to multiplicative constants, and all
//! statistics reported by this crate are exact dyadic cell counts.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use crate::error::{Error, Result};

// ---------------------------------------------------------------------------
// Scales, cells, cell sets
// ---------------------------------------------------------------------------

/// A dyadic scale `delta = 2^-m` together with the ambient dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct Scale {
    m: u32,
    dim: u8,
}

impl Scale {
    pub fn new(m: u32, dim: u8) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidParameter("scale exponent m must be >= 1".into()));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidParameter(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(Scale { m, dim })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn dim(&self) -> u8 {
        self.dim
    }

    /// The side length `2^-m`, exact in f64.
    pub fn delta(&self) -> f64 {
        (-(self.m as f64)).exp2()
    }

    /// Scale coarsened by `levels` dyadic levels.
    pub fn coarsen_by(&self, levels: u32) -> Result<Scale> {
        if levels >= self.m {
            return Err(Error::InvalidParameter(format!(
                "cannot coarsen scale 2^-{} by {} levels",
                self.m, levels
            )));
        }
        Scale::new(self.m - levels, self.dim)
    }

    pub fn refine_by(&self, levels: u32) -> Result<Scale> {
        Scale::new(self.m + levels, self.dim)
    }
}

/// A single half-open dyadic cell.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Cell {
    pub scale: Scale,
    pub index: [i64; 2],
}

impl Cell {
    /// Lower corner of the cell.
    pub fn lower(&self) -> [f64; 2] {
        let d = self.scale.delta();
        [self.index[0] as f64 * d, self.index[1] as f64 * d]
    }
}

/// A finite set of dyadic cells at a fixed scale, kept sorted
/// lexicographically so that iteration order is canonical.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CellSet {
    scale: Scale,
    cells: Vec<[i64; 2]>,
}

impl CellSet {
    /// Build from raw indices; sorts and removes duplicates. In 1D the
    /// second coordinate must be zero.
    pub fn new(scale: Scale, mut cells: Vec<[i64; 2]>) -> Result<Self> {
        if scale.dim() == 1 && cells.iter().any(|c| c[1] != 0) {
            return Err(Error::InvalidParameter(
                "1D cell set with nonzero second coordinate".into(),
            ));
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(CellSet { scale, cells })
    }

    pub fn empty(scale: Scale) -> Self {
        CellSet { scale, cells: Vec::new() }
    }

    /// Cells of the full grid on `[0,1)^d`.
    pub fn full_unit_grid(scale: Scale) -> Self {
        let n = 1i64 << scale.m();
        let cells = match scale.dim() {
            1 => (0..n).map(|i| [i, 0]).collect(),
            _ => {
                let mut v = Vec::with_capacity((n * n) as usize);
                for i in 0..n {
                    for j in 0..n {
                        v.push([i, j]);
                    }
                }
                v
            }
        };
        CellSet { scale, cells }
    }

    /// Cells at `scale` containing the given points.
    pub fn from_points(scale: Scale, points: &[[f64; 2]]) -> Self {
        let d = scale.delta();
        let mut cells: Vec<[i64; 2]> = points
            .iter()
            .map(|p| {
                let i = (p[0] / d).floor() as i64;
                let j = if scale.dim() == 2 { (p[1] / d).floor() as i64 } else { 0 };
                [i, j]
            })
            .collect();
        cells.sort_unstable();
        cells.dedup();
        CellSet { scale, cells }
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn indices(&self) -> &[[i64; 2]] {
        &self.cells
    }

    pub fn contains(&self, idx: &[i64; 2]) -> bool {
        self.cells.binary_search(idx).is_ok()
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        let scale = self.scale;
        self.cells.iter().map(move |&index| Cell { scale, index })
    }

    /// Set difference, preserving canonical order.
    pub fn minus(&self, other: &CellSet) -> Result<CellSet> {
        check_same_scale(self.scale, other.scale)?;
        let cells = self
            .cells
            .iter()
            .filter(|c| !other.contains(c))
            .copied()
            .collect();
        Ok(CellSet { scale: self.scale, cells })
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        check_same_scale(self.scale, other.scale)?;
        let mut cells = self.cells.clone();
        cells.extend_from_slice(&other.cells);
        CellSet::new(self.scale, cells)
    }

    pub fn intersect(&self, other: &CellSet) -> Result<CellSet> {
        check_same_scale(self.scale, other.scale)?;
        let cells = self
            .cells
            .iter()
            .filter(|c| other.contains(c))
            .copied()
            .collect();
        Ok(CellSet { scale: self.scale, cells })
    }
}

fn check_same_scale(a: Scale, b: Scale) -> Result<()> {
    if a != b {
        return Err(Error::ScaleMismatch(format!(
            "expected scale 2^-{} (dim {}), got 2^-{} (dim {})",
            a.m(),
            a.dim(),
            b.m(),
            b.dim()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Directions
// ---------------------------------------------------------------------------

/// A direction `e` on the unit circle, canonicalized modulo sign so that
/// the first nonzero component is positive; the associated projection is
/// `pi_e(x) = x . e`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    ux: f64,
    uy: f64,
}

impl Direction {
    pub fn from_vector(x: f64, y: f64) -> Result<Self> {
        let norm = x.hypot(y);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidParameter("direction vector must be nonzero".into()));
        }
        let (mut ux, mut uy) = (x / norm, y / norm);
        if ux < 0.0 || (ux == 0.0 && uy < 0.0) {
            ux = -ux;
            uy = -uy;
        }
        Ok(Direction { ux, uy })
    }

    pub fn from_angle(theta: f64) -> Result<Self> {
        Direction::from_vector(theta.cos(), theta.sin())
    }

    /// Angle in `[0, pi)`.
    pub fn angle(&self) -> f64 {
        let a = self.uy.atan2(self.ux);
        if a < 0.0 {
            a + std::f64::consts::PI
        } else {
            a
        }
    }

    pub fn unit(&self) -> [f64; 2] {
        [self.ux, self.uy]
    }

    pub fn dot(&self, p: [f64; 2]) -> f64 {
        self.ux * p[0] + self.uy * p[1]
    }

    /// Operator distance between the projections onto `self` and `other`,
    /// minimized over the line-orientation sign ambiguity.
    pub fn projection_distance(&self, other: &Direction) -> f64 {
        let d1 = ((self.ux - other.ux).powi(2) + (self.uy - other.uy).powi(2)).sqrt();
        let d2 = ((self.ux + other.ux).powi(2) + (self.uy + other.uy).powi(2)).sqrt();
        d1.min(d2)
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// `|P|_target`: the number of cells at `target` scale meeting `P`.
///
/// `target` may not be finer than the native scale of `P` (that would
/// fabricate information).
pub fn covering_number(p: &CellSet, target: Scale) -> Result<usize> {
    if target.dim() != p.scale().dim() {
        return Err(Error::ScaleMismatch("covering_number: dimension mismatch".into()));
    }
    if target.m() > p.scale().m() {
        return Err(Error::ScaleTooFine(format!(
            "target 2^-{} finer than native 2^-{}",
            target.m(),
            p.scale().m()
        )));
    }
    let shift = p.scale().m() - target.m();
    if shift == 0 {
        return Ok(p.len());
    }
    // Arithmetic right shift is floor division by 2^shift, as needed for
    // half-open dyadic cells including negative indices.
    let mut coarse: Vec<[i64; 2]> = p
        .indices()
        .iter()
        .map(|c| [c[0] >> shift, c[1] >> shift])
        .collect();
    coarse.sort_unstable();
    coarse.dedup();
    Ok(coarse.len())
}

/// Coarsen a cell set to a coarser scale (the cells of `|P|_target`).
pub fn coarsen_cells(p: &CellSet, target: Scale) -> Result<CellSet> {
    if target.dim() != p.scale().dim() {
        return Err(Error::ScaleMismatch("coarsen_cells: dimension mismatch".into()));
    }
    if target.m() > p.scale().m() {
        return Err(Error::ScaleTooFine("coarsen_cells".into()));
    }
    let shift = p.scale().m() - target.m();
    let cells = p
        .indices()
        .iter()
        .map(|c| [c[0] >> shift, c[1] >> shift])
        .collect();
    CellSet::new(target, cells)
}

/// Cells at the common scale meeting the Minkowski sum of the two cell
/// unions. The sum of two half-open cells spans two delta-steps per axis,
/// so this is `{i+j+e : i in A, j in B, e in {0,1}^d}` exactly.
pub fn cell_sumset(a: &CellSet, b: &CellSet) -> Result<CellSet> {
    check_same_scale(a.scale(), b.scale())?;
    let n_ops = a.len().saturating_mul(b.len());
    if n_ops > 50_000_000 {
        return Err(Error::BudgetExceeded(format!(
            "cell_sumset over {} x {} cells",
            a.len(),
            b.len()
        )));
    }
    let dim = a.scale().dim();
    let mut out: HashSet<[i64; 2]> = HashSet::with_capacity(4 * n_ops.max(1));
    for ca in a.indices() {
        for cb in b.indices() {
            let base = [ca[0] + cb[0], ca[1] + cb[1]];
            out.insert(base);
            out.insert([base[0] + 1, base[1]]);
            if dim == 2 {
                out.insert([base[0], base[1] + 1]);
                out.insert([base[0] + 1, base[1] + 1]);
            }
        }
    }
    CellSet::new(a.scale(), out.into_iter().collect())
}

/// Sumset of the fibers of an explicit pair list (same spillover
/// convention as [`cell_sumset`]).
pub fn pair_sumset(scale: Scale, pairs: &[([i64; 2], [i64; 2])]) -> Result<CellSet> {
    let dim = scale.dim();
    let mut out: HashSet<[i64; 2]> = HashSet::with_capacity(4 * pairs.len().max(1));
    for (p, q) in pairs {
        let base = [p[0] + q[0], p[1] + q[1]];
        out.insert(base);
        out.insert([base[0] + 1, base[1]]);
        if dim == 2 {
            out.insert([base[0], base[1] + 1]);
            out.insert([base[0] + 1, base[1] + 1]);
        }
    }
    CellSet::new(scale, out.into_iter().collect())
}

/// `|pi_e(union Y)|_delta`: project every cell (all four corners) onto the
/// line spanned by `e` and count the half-open delta-intervals covered.
pub fn projected_covering_number(y: &CellSet, e: &Direction) -> Result<usize> {
    if y.scale().dim() != 2 {
        return Err(Error::InvalidParameter(
            "projected_covering_number requires a two-dimensional cell set".into(),
        ));
    }
    if y.is_empty() {
        return Ok(0);
    }
    let d = y.scale().delta();
    let [ux, uy] = e.unit();
    let mut ranges: Vec<(i64, i64)> = Vec::with_capacity(y.len());
    for c in y.indices() {
        let x0 = c[0] as f64 * d;
        let y0 = c[1] as f64 * d;
        // Corner dot products; the cell's projection is their hull.
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &(dx, dy) in &[(0.0, 0.0), (d, 0.0), (0.0, d), (d, d)] {
            let t = ux * (x0 + dx) + uy * (y0 + dy);
            lo = lo.min(t);
            hi = hi.max(t);
        }
        // Half-open image [lo, hi): dividing by a power of two is exact, so
        // boundary hits (axis-parallel projections) are detected reliably.
        let a = (lo / d).floor() as i64;
        let hb = hi / d;
        let b = if hb == hb.floor() { hb as i64 - 1 } else { hb.floor() as i64 };
        ranges.push((a, b.max(a)));
    }
    ranges.sort_unstable();
    let mut count: i64 = 0;
    let mut cur: Option<(i64, i64)> = None;
    for (a, b) in ranges {
        match cur {
            None => cur = Some((a, b)),
            Some((ca, cb)) => {
                if a <= cb + 1 {
                    cur = Some((ca, cb.max(b)));
                } else {
                    count += cb - ca + 1;
                    cur = Some((a, b));
                }
            }
        }
    }
    if let Some((ca, cb)) = cur {
        count += cb - ca + 1;
    }
    Ok(count as usize)
}

/// Transversality report for a pair of projections (see
/// [`transversality_check`]).
#[derive(Clone, Debug, Serialize)]
pub struct TransversalityReport {
    pub alpha: f64,
    pub n1: usize,
    pub n2: usize,
    pub cells: usize,
    /// `|Y| * alpha / (n1 * n2)`; the bound holds iff this is <= `c_t`.
    pub ratio: f64,
    pub c_t: f64,
    pub bound_ok: bool,
}

/// Default transversality constant; dominates the tube-intersection
/// geometry with margin. Overridable per call.
pub const DEFAULT_TRANSVERSALITY_CONSTANT: f64 = 8.0;

/// Checks `|Y| <= C_T * alpha^-1 * n1 * n2` where `alpha` is the operator
/// distance of the two projections and `n_j` the projected covering
/// numbers. A `bound_ok = false` report on any input is a finding.
pub fn transversality_check(
    y: &CellSet,
    e1: &Direction,
    e2: &Direction,
    c_t: f64,
) -> Result<TransversalityReport> {
    let alpha = e1.projection_distance(e2);
    if alpha < 1e-12 {
        return Err(Error::ParallelProjections);
    }
    let n1 = projected_covering_number(y, e1)?;
    let n2 = projected_covering_number(y, e2)?;
    let cells = y.len();
    let ratio = cells as f64 * alpha / ((n1 * n2) as f64).max(1.0);
    Ok(TransversalityReport {
        alpha,
        n1,
        n2,
        cells,
        ratio,
        c_t,
        bound_ok: ratio <= c_t,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
