//! Discretized measures on dyadic lattices.
//!
//! A [`DeltaMeasure`] is a finite nonnegative measure of total mass at most
//! one whose atoms sit on the grid `delta * Z^d`, `delta = 2^-m`, `d = 1,2`.
//! It is the carrier for everything downstream: perfectness scans, Riesz
//! energies, Fourier averages, sumset experiments.
//!
//! Weights are stored as `f64`. All spec fixtures use dyadic weights
//! (powers of two and their sums/products), for which every operation here
//! is exact in binary floating point; "exact" serialization mode writes
//! weights as shortest-round-trip decimal strings, which reproduces such
//! weights bit-for-bit on reload.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde_json::Value;

use crate::curve::CurveSpec;
use crate::error::{Error, Result};
use crate::exec;
use crate::fft;
use crate::grid::{CellSet, Scale};
use crate::tol;

/// Direct sparse convolution is used while `|spt mu| * |spt nu|` stays
/// below this operation count; beyond it the dense transform backend runs.
pub const SPARSE_OPS_LIMIT: usize = 10_000_000;

/// Hard ceiling on dense-grid cells for transform-based convolution.
pub const DENSE_CELL_LIMIT: usize = 1 << 24;

/// Dense-backend weights below `DENSE_DROP_EPS * max_weight` are rounding
/// residue of the transform and are dropped.
const DENSE_DROP_EPS: f64 = 1e-13;

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

/// An axis-aligned box (interval in 1D) with nonempty interior.
///
/// Point membership is half-open (`lo <= x < hi`), matching the half-open
/// cell convention; ball containment is closed. The unbounded window uses
/// `+-f64::MAX` so it stays JSON-serializable.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Window {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub dim: u8,
}

impl Window {
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter("window needs nonempty interior".into()));
        }
        Ok(Window { lo: [lo, 0.0], hi: [hi, 1.0], dim: 1 })
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        if !(lo[0] < hi[0] && lo[1] < hi[1]) {
            return Err(Error::InvalidParameter("window needs nonempty interior".into()));
        }
        Ok(Window { lo, hi, dim: 2 })
    }

    /// The whole space.
    pub fn all(dim: u8) -> Self {
        Window { lo: [-f64::MAX; 2], hi: [f64::MAX; 2], dim }
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        for axis in 0..self.dim as usize {
            if !(self.lo[axis] <= p[axis] && p[axis] < self.hi[axis]) {
                return false;
            }
        }
        true
    }

    /// Whether the closed ball `B(c, r)` lies inside the window.
    pub fn contains_closed_ball(&self, c: [f64; 2], r: f64) -> bool {
        for axis in 0..self.dim as usize {
            if c[axis] - r < self.lo[axis] || c[axis] + r > self.hi[axis] {
                return false;
            }
        }
        true
    }

    /// Image under the grid-aligned similarity `x -> lambda x + shift`.
    pub fn map_similarity(&self, lambda: f64, shift: [f64; 2]) -> Window {
        let f = |v: f64, s: f64| (v * lambda + s).clamp(-f64::MAX, f64::MAX);
        Window {
            lo: [f(self.lo[0], shift[0]), f(self.lo[1], shift[1])],
            hi: [f(self.hi[0], shift[0]), f(self.hi[1], shift[1])],
            dim: self.dim,
        }
    }
}

// ---------------------------------------------------------------------------
// The measure type
// ---------------------------------------------------------------------------

/// A probability (or sub-probability) measure on `delta Z^d` with finitely
/// many strictly positive atoms, kept in canonical index order.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaMeasure {
    scale: Scale,
    atoms: Vec<([i64; 2], f64)>,
    total_mass: f64,
}

impl DeltaMeasure {
    pub fn from_atoms(scale: Scale, atoms: BTreeMap<[i64; 2], f64>) -> Result<Self> {
        let mut v: Vec<([i64; 2], f64)> = Vec::with_capacity(atoms.len());
        for (idx, w) in atoms {
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "atom weight must be finite and positive, got {w}"
                )));
            }
            if scale.dim() == 1 && idx[1] != 0 {
                return Err(Error::InvalidParameter(
                    "1D measure with nonzero second index".into(),
                ));
            }
            v.push((idx, w));
        }
        if v.is_empty() {
            return Err(Error::Empty("measure must have at least one atom".into()));
        }
        let total = Self::sum_weights(&v);
        if total > 1.0 + tol::MASS_TOL {
            return Err(Error::InvalidParameter(format!(
                "total mass {total} exceeds 1"
            )));
        }
        Ok(DeltaMeasure { scale, atoms: v, total_mass: total })
    }

    fn sum_weights(atoms: &[([i64; 2], f64)]) -> f64 {
        let ws: Vec<f64> = atoms.iter().map(|(_, w)| *w).collect();
        exec::pairwise_sum(&ws)
    }

    /// Unit point mass at a grid index.
    pub fn atom(scale: Scale, idx: [i64; 2]) -> Result<Self> {
        let mut m = BTreeMap::new();
        m.insert(idx, 1.0);
        Self::from_atoms(scale, m)
    }

    /// Uniform probability measure on the given grid indices.
    pub fn uniform_on(scale: Scale, indices: &[[i64; 2]]) -> Result<Self> {
        let mut uniq: Vec<[i64; 2]> = indices.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.is_empty() {
            return Err(Error::Empty("uniform_on with no indices".into()));
        }
        let w = 1.0 / uniq.len() as f64;
        let mut m = BTreeMap::new();
        for idx in uniq {
            m.insert(idx, w);
        }
        Self::from_atoms(scale, m)
    }

    /// Level-`m` discretization of Lebesgue measure on `[0,1]`.
    pub fn lebesgue_1d(m: u32) -> Result<Self> {
        let scale = Scale::new(m, 1)?;
        let n = 1i64 << m;
        let indices: Vec<[i64; 2]> = (0..n).map(|i| [i, 0]).collect();
        Self::uniform_on(scale, &indices)
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn dim(&self) -> u8 {
        self.scale.dim()
    }

    pub fn delta(&self) -> f64 {
        self.scale.delta()
    }

    pub fn atoms(&self) -> &[([i64; 2], f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Position of the atom with the given index.
    pub fn position(&self, idx: [i64; 2]) -> [f64; 2] {
        let d = self.delta();
        [idx[0] as f64 * d, idx[1] as f64 * d]
    }

    pub fn positions(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        let d = self.delta();
        self.atoms
            .iter()
            .map(move |&(idx, w)| ([idx[0] as f64 * d, idx[1] as f64 * d], w))
    }

    pub fn weight_at(&self, idx: [i64; 2]) -> f64 {
        match self.atoms.binary_search_by(|(i, _)| i.cmp(&idx)) {
            Ok(pos) => self.atoms[pos].1,
            Err(_) => 0.0,
        }
    }

    /// The support as a cell set at the measure's own scale.
    pub fn support_cells(&self) -> CellSet {
        CellSet::new(self.scale, self.atoms.iter().map(|(i, _)| *i).collect())
            .expect("atoms are valid cells")
    }

    /// Bounding box of the support (positions of atoms).
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for (p, _) in self.positions() {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }

    /// Exact diameter of the support (max pairwise atom distance).
    pub fn diam_support(&self) -> f64 {
        if self.dim() == 1 {
            let (lo, hi) = self.bbox();
            return hi[0] - lo[0];
        }
        let pts: Vec<[f64; 2]> = self.positions().map(|(p, _)| p).collect();
        diameter_2d(&pts)
    }

    /// `sum_z nu(z)^2`, the discrete L2 norm squared of the atom weights.
    /// The value depends implicitly on the scale.
    pub fn l2_norm_sq(&self) -> f64 {
        let ws: Vec<f64> = self.atoms.iter().map(|(_, w)| w * w).collect();
        exec::pairwise_sum(&ws)
    }

    // -- operations ---------------------------------------------------------

    /// Re-bin atoms onto a coarser grid; half-open cells, so each fine atom
    /// lands in the unique coarse cell containing it. Total mass preserved.
    pub fn coarsen(&self, target: Scale) -> Result<DeltaMeasure> {
        if target.dim() != self.dim() {
            return Err(Error::ScaleMismatch("coarsen: dimension mismatch".into()));
        }
        if target.m() > self.scale.m() {
            return Err(Error::ScaleTooFine(format!(
                "coarsen target 2^-{} finer than source 2^-{}",
                target.m(),
                self.scale.m()
            )));
        }
        if target.m() == self.scale.m() {
            return Ok(self.clone());
        }
        let shift = self.scale.m() - target.m();
        let mut acc: BTreeMap<[i64; 2], f64> = BTreeMap::new();
        for &(idx, w) in &self.atoms {
            *acc.entry([idx[0] >> shift, idx[1] >> shift]).or_insert(0.0) += w;
        }
        DeltaMeasure::from_atoms(target, acc)
    }

    /// Exact discrete convolution on the index lattice.
    pub fn convolve(&self, other: &DeltaMeasure) -> Result<DeltaMeasure> {
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch("convolve: operands must share scale".into()));
        }
        let ops = self.len().saturating_mul(other.len());
        if ops <= SPARSE_OPS_LIMIT {
            self.convolve_sparse(other)
        } else {
            self.convolve_dense(other)
        }
    }

    /// Direct sparse summation backend.
    pub fn convolve_sparse(&self, other: &DeltaMeasure) -> Result<DeltaMeasure> {
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch("convolve: operands must share scale".into()));
        }
        let mut acc: BTreeMap<[i64; 2], f64> = BTreeMap::new();
        for &(ia, wa) in &self.atoms {
            for &(ib, wb) in &other.atoms {
                *acc.entry([ia[0] + ib[0], ia[1] + ib[1]]).or_insert(0.0) += wa * wb;
            }
        }
        DeltaMeasure::from_atoms(self.scale, acc)
    }

    /// Dense transform backend; agrees with the sparse backend to
    /// [`tol::CONV_BACKEND_TOL`] on overlap-tested inputs.
    pub fn convolve_dense(&self, other: &DeltaMeasure) -> Result<DeltaMeasure> {
        if self.scale != other.scale {
            return Err(Error::ScaleMismatch("convolve: operands must share scale".into()));
        }
        let (ga, oa, da) = self.to_dense_grid()?;
        let (gb, ob, db) = other.to_dense_grid()?;
        let out_cells = (da.0 + db.0 - 1).saturating_mul(da.1 + db.1 - 1);
        if out_cells > DENSE_CELL_LIMIT {
            return Err(Error::BudgetExceeded(format!(
                "dense convolution grid of {out_cells} cells"
            )));
        }
        let (raw, dims) = if self.dim() == 1 {
            let (v, n) = (fft::convolve_1d(&ga, &gb), da.1 + db.1 - 1);
            (v, (1, n))
        } else {
            fft::convolve_2d(&ga, da, &gb, db)
        };
        let max_w = raw.iter().cloned().fold(0.0f64, f64::max);
        let cut = DENSE_DROP_EPS * max_w;
        let mut acc: BTreeMap<[i64; 2], f64> = BTreeMap::new();
        for r in 0..dims.0 {
            for c in 0..dims.1 {
                let w = raw[r * dims.1 + c];
                if w > cut {
                    let idx = if self.dim() == 1 {
                        [oa[0] + ob[0] + c as i64, 0]
                    } else {
                        [oa[0] + ob[0] + r as i64, oa[1] + ob[1] + c as i64]
                    };
                    acc.insert(idx, w);
                }
            }
        }
        DeltaMeasure::from_atoms(self.scale, acc)
    }

    fn to_dense_grid(&self) -> Result<(Vec<f64>, [i64; 2], (usize, usize))> {
        let mut lo = [i64::MAX; 2];
        let mut hi = [i64::MIN; 2];
        for (idx, _) in &self.atoms {
            for a in 0..2 {
                lo[a] = lo[a].min(idx[a]);
                hi[a] = hi[a].max(idx[a]);
            }
        }
        let (nr, nc) = if self.dim() == 1 {
            (1usize, (hi[0] - lo[0] + 1) as usize)
        } else {
            ((hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize)
        };
        if nr.saturating_mul(nc) > DENSE_CELL_LIMIT {
            return Err(Error::BudgetExceeded(format!("dense grid of {} cells", nr * nc)));
        }
        let mut g = vec![0.0; nr * nc];
        for &(idx, w) in &self.atoms {
            let (r, c) = if self.dim() == 1 {
                (0usize, (idx[0] - lo[0]) as usize)
            } else {
                ((idx[0] - lo[0]) as usize, (idx[1] - lo[1]) as usize)
            };
            g[r * nc + c] = w;
        }
        Ok((g, lo, (nr, nc)))
    }

    /// `k`-fold self-convolution by repeated squaring. Mass `m^k` is
    /// preserved within [`tol::MASS_TOL`].
    pub fn self_convolution_power(&self, k: u32) -> Result<DeltaMeasure> {
        if k == 0 {
            return Err(Error::InvalidParameter("convolution power k must be >= 1".into()));
        }
        let mut base = self.clone();
        let mut acc: Option<DeltaMeasure> = None;
        let mut rem = k;
        loop {
            if rem & 1 == 1 {
                acc = Some(match acc {
                    None => base.clone(),
                    Some(a) => a.convolve(&base)?,
                });
            }
            rem >>= 1;
            if rem == 0 {
                break;
            }
            base = base.convolve(&base)?;
        }
        let out = acc.expect("k >= 1");
        let want = self.total_mass.powi(k as i32);
        if (out.total_mass - want).abs() > tol::MASS_TOL {
            return Err(Error::PropertyViolated(format!(
                "self-convolution mass drifted: {} vs {}",
                out.total_mass, want
            )));
        }
        Ok(out)
    }

    /// Drop atoms outside the window (half-open membership of the atom
    /// position). Not renormalized.
    pub fn restrict(&self, window: &Window) -> Result<DeltaMeasure> {
        if window.dim != self.dim() {
            return Err(Error::InvalidParameter("restrict: window dimension mismatch".into()));
        }
        let mut acc = BTreeMap::new();
        for (idx, w) in &self.atoms {
            if window.contains_point(self.position(*idx)) {
                acc.insert(*idx, *w);
            }
        }
        if acc.is_empty() {
            return Err(Error::Empty("restriction has empty support".into()));
        }
        let total: f64 = acc.values().sum();
        let mut out = DeltaMeasure::from_atoms(self.scale, acc)?;
        out.total_mass = total.min(1.0 + tol::MASS_TOL);
        Ok(out)
    }

    /// Push forward under `x -> 2^j x + shift` with a grid-aligned shift.
    /// Atom indices are preserved; the scale is re-labeled to `2^(j-m)` and
    /// the shift must be an integer multiple of the new cell width.
    pub fn pushforward_similarity(&self, log2_lambda: i32, shift: [f64; 2]) -> Result<DeltaMeasure> {
        let new_m = self.scale.m() as i64 - log2_lambda as i64;
        if new_m < 1 || new_m > 62 {
            return Err(Error::NotGridAligned(format!(
                "similarity ratio 2^{log2_lambda} leaves no representable grid (m' = {new_m})"
            )));
        }
        let new_scale = Scale::new(new_m as u32, self.dim())?;
        let inv_delta = (new_m as f64).exp2();
        let mut shift_idx = [0i64; 2];
        for a in 0..self.dim() as usize {
            let t = shift[a] * inv_delta;
            if t.fract() != 0.0 || t.abs() > 4.6e18 {
                return Err(Error::NotGridAligned(format!(
                    "shift component {} is not a multiple of the target cell width",
                    shift[a]
                )));
            }
            shift_idx[a] = t as i64;
        }
        let mut acc = BTreeMap::new();
        for &(idx, w) in &self.atoms {
            acc.insert([idx[0] + shift_idx[0], idx[1] + shift_idx[1]], w);
        }
        let mut out = DeltaMeasure::from_atoms(new_scale, acc)?;
        out.total_mass = self.total_mass;
        Ok(out)
    }

    /// Product measure of two 1D measures on the product grid.
    pub fn product(&self, other: &DeltaMeasure) -> Result<DeltaMeasure> {
        if self.dim() != 1 || other.dim() != 1 {
            return Err(Error::InvalidParameter("product needs two 1D measures".into()));
        }
        if self.scale.m() != other.scale.m() {
            return Err(Error::ScaleMismatch("product: operands must share scale".into()));
        }
        let n = self.len().saturating_mul(other.len());
        if n > 4_000_000 {
            return Err(Error::BudgetExceeded(format!("product with {n} atoms")));
        }
        let scale2 = Scale::new(self.scale.m(), 2)?;
        let mut acc = BTreeMap::new();
        for &(ia, wa) in &self.atoms {
            for &(ib, wb) in &other.atoms {
                acc.insert([ia[0], ib[0]], wa * wb);
            }
        }
        DeltaMeasure::from_atoms(scale2, acc)
    }

    /// Push a 1D measure onto the graph `x -> (x, phi(x))`. Each atom lands
    /// in the 2D grid cell containing its curve point (floor rounding on
    /// the second coordinate, consistent with half-open cells).
    pub fn lift_to_curve(&self, curve: &CurveSpec) -> Result<DeltaMeasure> {
        if self.dim() != 1 {
            return Err(Error::InvalidParameter("lift_to_curve needs a 1D measure".into()));
        }
        let scale2 = Scale::new(self.scale.m(), 2)?;
        let pow = (self.scale.m() as f64).exp2();
        let mut acc: BTreeMap<[i64; 2], f64> = BTreeMap::new();
        for &(idx, w) in &self.atoms {
            let x = idx[0] as f64 * self.delta();
            if !(-1.0..=1.0).contains(&x) {
                return Err(Error::InvalidParameter(format!(
                    "lift_to_curve: abscissa {x} outside the curve domain [-1,1]"
                )));
            }
            let y = curve.eval(x);
            let yi = (y * pow).floor() as i64;
            *acc.entry([idx[0], yi]).or_insert(0.0) += w;
        }
        let mut out = DeltaMeasure::from_atoms(scale2, acc)?;
        out.total_mass = self.total_mass;
        Ok(out)
    }

    // -- serialization ------------------------------------------------------

    /// Measure file format: `{"atoms": [[index..., weight], ...], "dim": d,
    /// "m": m}` with keys sorted and atoms in canonical index order. In
    /// exact mode weights are shortest-round-trip decimal strings.
    pub fn to_json(&self, exact: bool) -> String {
        let mut rows = Vec::with_capacity(self.atoms.len());
        for (idx, w) in &self.atoms {
            let mut row = Vec::new();
            row.push(Value::from(idx[0]));
            if self.dim() == 2 {
                row.push(Value::from(idx[1]));
            }
            if exact {
                row.push(Value::from(format!("{w}")));
            } else {
                row.push(Value::from(*w));
            }
            rows.push(Value::from(row));
        }
        let mut map = serde_json::Map::new();
        map.insert("atoms".into(), Value::from(rows));
        map.insert("dim".into(), Value::from(self.dim()));
        map.insert("m".into(), Value::from(self.scale.m()));
        Value::Object(map).to_string()
    }

    pub fn from_json(s: &str) -> Result<DeltaMeasure> {
        let v: Value = serde_json::from_str(s)
            .map_err(|e| Error::InvalidParameter(format!("measure file: {e}")))?;
        let dim = v
            .get("dim")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidParameter("measure file: missing dim".into()))?
            as u8;
        let m = v
            .get("m")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::InvalidParameter("measure file: missing m".into()))?
            as u32;
        let scale = Scale::new(m, dim)?;
        let rows = v
            .get("atoms")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::InvalidParameter("measure file: missing atoms".into()))?;
        let mut acc = BTreeMap::new();
        for row in rows {
            let row = row
                .as_array()
                .ok_or_else(|| Error::InvalidParameter("measure file: atom row".into()))?;
            if row.len() != dim as usize + 1 {
                return Err(Error::InvalidParameter(format!(
                    "measure file: atom row of length {} for dim {dim}",
                    row.len()
                )));
            }
            let mut idx = [0i64; 2];
            for a in 0..dim as usize {
                idx[a] = row[a].as_i64().ok_or_else(|| {
                    Error::InvalidParameter("measure file: index must be integer".into())
                })?;
            }
            let wv = &row[dim as usize];
            let w = match wv {
                Value::Number(n) => n.as_f64().unwrap_or(f64::NAN),
                Value::String(s) => s.parse::<f64>().map_err(|e| {
                    Error::InvalidParameter(format!("measure file: weight {s:?}: {e}"))
                })?,
                _ => return Err(Error::InvalidParameter("measure file: weight type".into())),
            };
            if acc.insert(idx, w).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "measure file: duplicate atom index {idx:?}"
                )));
            }
        }
        DeltaMeasure::from_atoms(scale, acc)
    }
}

/// Exact diameter of a planar point set (convex hull + pairwise over hull).
fn diameter_2d(pts: &[[f64; 2]]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let mut p: Vec<[f64; 2]> = pts.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    p.dedup();
    if p.len() < 2 {
        return 0.0;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for &pt in p.iter().chain(p.iter().rev()) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0 {
            hull.pop();
        }
        hull.push(pt);
    }
    hull.pop();
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let dx = hull[i][0] - hull[j][0];
            let dy = hull[i][1] - hull[j][1];
            best = best.max(dx * dx + dy * dy);
        }
    }
    best.sqrt()
}

// ---------------------------------------------------------------------------
// Iterated function systems
// ---------------------------------------------------------------------------

/// One contraction of an IFS on the line.
#[derive(Clone)]
pub enum IfsMap {
    /// `x -> ratio * x + shift` with `ratio in (0,1)`.
    Affine { ratio: f64, shift: f64 },
    /// User-supplied `C^1` contraction with derivative evaluator and a
    /// declared Lipschitz bound for the derivative; the contraction
    /// certificate `sup |f'| < 1` is sampled at resolution 2^-12.
    Conformal {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        df: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        lipschitz_df: f64,
    },
}

impl fmt::Debug for IfsMap {
    fn fmt(&self, fm: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IfsMap::Affine { ratio, shift } => {
                write!(fm, "Affine {{ ratio: {ratio}, shift: {shift} }}")
            }
            IfsMap::Conformal { lipschitz_df, .. } => {
                write!(fm, "Conformal {{ lipschitz_df: {lipschitz_df} }}")
            }
        }
    }
}

impl IfsMap {
    fn eval(&self, x: f64) -> f64 {
        match self {
            IfsMap::Affine { ratio, shift } => ratio * x + shift,
            IfsMap::Conformal { f, .. } => f(x),
        }
    }

    /// Certified contraction ratio on `[-1, 1]`.
    fn ratio_certificate(&self) -> Result<f64> {
        match self {
            IfsMap::Affine { ratio, .. } => {
                if *ratio <= 0.0 || *ratio >= 1.0 {
                    return Err(Error::ContractionCertificate(format!(
                        "affine ratio {ratio} outside (0,1)"
                    )));
                }
                Ok(*ratio)
            }
            IfsMap::Conformal { df, lipschitz_df, .. } => {
                let n = tol::CERTIFICATE_SAMPLES;
                let mesh = 2.0 / n as f64;
                let mut sup: f64 = 0.0;
                let mut inf = f64::INFINITY;
                for i in 0..=n {
                    let x = -1.0 + i as f64 * mesh;
                    let d = df(x).abs();
                    sup = sup.max(d);
                    inf = inf.min(d);
                }
                let cert = sup + lipschitz_df * mesh / 2.0;
                if cert >= 1.0 {
                    return Err(Error::ContractionCertificate(format!(
                        "sampled sup |f'| certificate {cert} >= 1"
                    )));
                }
                if inf - lipschitz_df * mesh / 2.0 <= 0.0 {
                    return Err(Error::ContractionCertificate(
                        "derivative may vanish on [-1,1]; conformal maps must have |f'| > 0".into(),
                    ));
                }
                Ok(cert)
            }
        }
    }
}

/// A self-conformal system `nu = sum p_i f_i(nu)` on the line with
/// attractor inside `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct IfsSpec {
    pub maps: Vec<IfsMap>,
    pub weights: Vec<f64>,
}

impl IfsSpec {
    pub fn affine(maps: &[(f64, f64)], weights: &[f64]) -> Result<Self> {
        let spec = IfsSpec {
            maps: maps
                .iter()
                .map(|&(ratio, shift)| IfsMap::Affine { ratio, shift })
                .collect(),
            weights: weights.to_vec(),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The Cantor-4 system `{x/4, x/4 + 3/4}` with equal weights.
    pub fn cantor4() -> Self {
        IfsSpec::affine(&[(0.25, 0.0), (0.25, 0.75)], &[0.5, 0.5]).expect("valid builtin")
    }

    /// Lebesgue on `[0,1]` as the self-similar system `{x/2, x/2 + 1/2}`.
    pub fn lebesgue() -> Self {
        IfsSpec::affine(&[(0.5, 0.0), (0.5, 0.5)], &[0.5, 0.5]).expect("valid builtin")
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.is_empty() || self.maps.len() != self.weights.len() {
            return Err(Error::InvalidParameter(
                "IFS needs equally many maps and weights".into(),
            ));
        }
        if self.weights.iter().any(|&p| p <= 0.0 || !p.is_finite()) {
            return Err(Error::InvalidParameter("IFS weights must be positive".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "IFS weights must sum to 1, got {total}"
            )));
        }
        for map in &self.maps {
            map.ratio_certificate()?;
        }
        self.check_attractor_bound()?;
        Ok(())
    }

    /// Iterate the convex hull map from `[-1,1]`; the attractor must stay
    /// inside `[-1,1]`.
    fn check_attractor_bound(&self) -> Result<()> {
        let (mut lo, mut hi) = (-1.0f64, 1.0f64);
        for _ in 0..256 {
            let mut nlo = f64::INFINITY;
            let mut nhi = f64::NEG_INFINITY;
            for map in &self.maps {
                // |f'| > 0 so maps are monotone: endpoint images hull the image.
                let a = map.eval(lo);
                let b = map.eval(hi);
                nlo = nlo.min(a.min(b));
                nhi = nhi.max(a.max(b));
            }
            if (nlo - lo).abs() < 1e-15 && (nhi - hi).abs() < 1e-15 {
                break;
            }
            lo = nlo;
            hi = nhi;
        }
        if lo < -1.0 - 1e-9 || hi > 1.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "IFS attractor hull [{lo}, {hi}] escapes [-1,1]"
            )));
        }
        Ok(())
    }

    /// Fixed point of the first map (discretization anchor).
    fn anchor(&self) -> f64 {
        match &self.maps[0] {
            IfsMap::Affine { ratio, shift } => shift / (1.0 - ratio),
            IfsMap::Conformal { f, .. } => {
                let mut x = 0.0;
                for _ in 0..256 {
                    let nx = f(x);
                    if (nx - x).abs() < 1e-15 {
                        return nx;
                    }
                    x = nx;
                }
                x
            }
        }
    }
}

/// Default ceiling on the number of cylinder words expanded by
/// [`from_ifs`].
pub const IFS_NODE_BUDGET: usize = 1 << 22;

/// Level-`delta` discretization of the self-conformal measure: expand
/// cylinder words `w` until the product of contraction certificates drops
/// to `delta`, place mass `p_w` at the grid point nearest `f_w(x0)` where
/// `x0` is the fixed point of the first map, and merge collisions.
pub fn from_ifs(spec: &IfsSpec, delta: Scale) -> Result<DeltaMeasure> {
    from_ifs_with_budget(spec, delta, IFS_NODE_BUDGET)
}

pub fn from_ifs_with_budget(
    spec: &IfsSpec,
    delta: Scale,
    node_budget: usize,
) -> Result<DeltaMeasure> {
    if delta.dim() != 1 {
        return Err(Error::InvalidParameter("from_ifs produces a 1D measure".into()));
    }
    spec.validate()?;
    let ratios: Vec<f64> = spec
        .maps
        .iter()
        .map(|m| m.ratio_certificate())
        .collect::<Result<_>>()?;
    let d = delta.delta();
    let x0 = spec.anchor();
    let inv_delta = (delta.m() as f64).exp2();

    // Depth-first in word order; children pushed in reverse so the
    // lexicographically first word is emitted first.
    let mut acc: BTreeMap<[i64; 2], f64> = BTreeMap::new();
    let mut emitted = 0usize;
    let mut stack: Vec<(Vec<u8>, f64, f64)> = vec![(Vec::new(), 1.0, 1.0)]; // (word, prob, ratio product)
    while let Some((word, prob, rat)) = stack.pop() {
        if rat <= d {
            emitted += 1;
            if emitted > node_budget {
                return Err(Error::BudgetExceeded(format!(
                    "IFS expansion exceeded {node_budget} cylinder words"
                )));
            }
            // f_w = f_{w_1} o ... o f_{w_k}: evaluate inside out.
            let mut x = x0;
            for &wi in word.iter().rev() {
                x = spec.maps[wi as usize].eval(x);
            }
            let idx = (x * inv_delta).round() as i64;
            *acc.entry([idx, 0]).or_insert(0.0) += prob;
            continue;
        }
        for i in (0..spec.maps.len()).rev() {
            let mut w = word.clone();
            w.push(i as u8);
            stack.push((w, prob * spec.weights[i], rat * ratios[i]));
        }
    }
    let out = DeltaMeasure::from_atoms(delta, acc)?;
    if (out.total_mass() - 1.0).abs() > tol::MASS_TOL {
        return Err(Error::PropertyViolated(format!(
            "IFS discretization mass {} != 1",
            out.total_mass()
        )));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
