//! Declarative run configurations.
//!
//! One JSON document per run. Mathematical parameters (scales, D, alpha,
//! epsilon, exponents) carry no implicit defaults: a silent default for a
//! math constant makes a run irreproducible, so every config names them
//! explicitly.

use serde::{Deserialize, Serialize};

use flatlab::curve::{CurveSpec, PiecewisePoly};
use flatlab::error::{Error, Result};
use flatlab::grid::Scale;
use flatlab::measure::{from_ifs, DeltaMeasure, IfsSpec, Window};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    /// Weights serialized as shortest-round-trip decimal strings;
    /// byte-identical reruns.
    Exact,
    /// Weights serialized as JSON numbers.
    Double,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsMapConfig {
    pub ratio: f64,
    pub shift: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IfsConfig {
    pub maps: Vec<IfsMapConfig>,
    pub weights: Vec<f64>,
}

/// Where a measure comes from: a built-in name, a measure file, or an
/// inline affine IFS. Exactly one of `builtin` / `file` / `ifs` must be
/// given; `m` names the scale for generated measures; `lift` pushes the
/// 1D result onto a named curve.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSource {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ifs: Option<IfsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lift: Option<String>,
}

impl MeasureSource {
    pub fn resolve(&self) -> Result<DeltaMeasure> {
        let given = [self.builtin.is_some(), self.file.is_some(), self.ifs.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if given != 1 {
            return Err(Error::InvalidParameter(
                "measure source needs exactly one of builtin/file/ifs".into(),
            ));
        }
        let base = if let Some(name) = &self.builtin {
            let m = self.require_m()?;
            let spec = match name.as_str() {
                "cantor4" => IfsSpec::cantor4(),
                "lebesgue" => IfsSpec::lebesgue(),
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown builtin measure {other:?}; names are \"cantor4\" and \"lebesgue\""
                    )))
                }
            };
            from_ifs(&spec, Scale::new(m, 1)?)?
        } else if let Some(path) = &self.file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("reading {path}: {e}")))?;
            DeltaMeasure::from_json(&text)?
        } else {
            let ifs = self.ifs.as_ref().expect("checked above");
            let m = self.require_m()?;
            let maps: Vec<(f64, f64)> = ifs.maps.iter().map(|c| (c.ratio, c.shift)).collect();
            let spec = IfsSpec::affine(&maps, &ifs.weights)?;
            from_ifs(&spec, Scale::new(m, 1)?)?
        };
        match &self.lift {
            None => Ok(base),
            Some(curve_name) => {
                let curve = resolve_curve(curve_name)?;
                base.lift_to_curve(&curve)
            }
        }
    }

    fn require_m(&self) -> Result<u32> {
        self.m.ok_or_else(|| {
            Error::InvalidParameter("generated measures need an explicit scale exponent m".into())
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl WindowConfig {
    pub fn resolve(&self, dim: u8) -> Result<Window> {
        match (dim, self.lo.len(), self.hi.len()) {
            (1, 1, 1) => Window::interval(self.lo[0], self.hi[0]),
            (2, 2, 2) => Window::rect([self.lo[0], self.lo[1]], [self.hi[0], self.hi[1]]),
            _ => Err(Error::InvalidParameter(
                "window lo/hi lengths must match the measure dimension".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Per-command configs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub measure: MeasureSource,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub measure: MeasureSource,
    /// Enlargement factors D to scan.
    pub d_list: Vec<f64>,
    /// Minimum tested radius in units of delta.
    pub r_min_cells: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowConfig>,
    /// "support" (default semantics) or "all-grid".
    pub centers: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub measure: MeasureSource,
    /// Energy exponent t (alpha).
    pub t: f64,
    pub delta_m_list: Vec<u32>,
    /// Convolution powers 1..k_max are tabulated.
    pub k_max: u32,
    /// kernel | mollified | fourier; the tabulation always uses the
    /// kernel, this picks an additional single-row cross-check method.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub measure: MeasureSource,
    pub p_list: Vec<u32>,
    pub r_list: Vec<f64>,
    /// Frequency lattice spacing.
    pub h: f64,
    /// Dump the sampled spectrum over the largest radius as a binary
    /// little-endian float64 grid with a JSON sidecar header.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump_spectrum: Option<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolveConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub measure: MeasureSource,
    pub measure_b: MeasureSource,
    /// Optional self-convolution power applied after the product.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub power: Option<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformizeConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    /// Cells from a measure's support...
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSource>,
    /// ...or a seeded random cell set of this size in [0,1)^2.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub random_cells: Option<usize>,
    pub t_block: u32,
    pub m_blocks: u32,
    pub epsilon: f64,
    pub round_cap: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum ExperimentKind {
    CaptureCounting,
    SumsetGrowth,
    L2LowerBound,
    RowStructure,
    Bridge,
    BandLimited,
    Transversality,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub arithmetic: Arithmetic,
    pub kind: ExperimentKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure_b: Option<MeasureSource>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_m_list: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_list: Option<Vec<f64>>,
    /// sumset_growth: "all-pairs" or a top-mass fraction in (0, 1].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<f64>,
    /// sumset_growth / uniform extraction parameters.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_block: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m_blocks: Option<u32>,
    /// l2_lower_bound / transversality: number of random instances.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instances: Option<u32>,
    /// row_structure: tangent anchor abscissa.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_theta: Option<f64>,
    /// row_structure / band_limited: curve name or table file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<String>,
}

/// A curve is either a built-in name or a path to a piecewise-polynomial
/// table file: `{"breakpoints": [...], "coefficients": [[...], ...],
/// "d2_lipschitz": L}` with coefficients in ascending powers.
pub fn resolve_curve(name: &str) -> Result<CurveSpec> {
    if name.ends_with(".json") {
        let text = std::fs::read_to_string(name)
            .map_err(|e| Error::InvalidParameter(format!("reading curve {name}: {e}")))?;
        let poly: PiecewisePoly = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParameter(format!("curve file {name}: {e}")))?;
        CurveSpec::from_poly(poly)
    } else {
        CurveSpec::by_name(name)
    }
}

pub fn parse_config<T: serde::de::DeserializeOwned>(path: &str) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidParameter(format!("reading config {path}: {e}")))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("config {path}: {e}")))
}

pub fn require<T: Copy>(opt: Option<T>, name: &str) -> Result<T> {
    opt.ok_or_else(|| Error::InvalidParameter(format!("config field {name:?} is required")))
}
