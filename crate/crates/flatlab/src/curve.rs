//! Strictly convex C^2 graphs over `[-1, 1]`.
//!
//! The planar carrier is the truncated graph `{(x, phi(x)) : x in [-1,1]}`
//! of a function with `phi'' > 0 on `[-2, 2]`. Smoothness is not finitely
//! checkable, so curves carry sampled certificates: a positive lower bound
//! for `phi''` (convexity margin) and an upper bound `M` (second derivative
//! sup), both obtained from 2^12 samples plus a user-declared modulus.
//!
//! Near an anchor `z = (x, phi(x))` the curve is flat at scale
//! `delta = Delta^2`: points of the curve within `c * Delta` of `z` stay in
//! the tangent-frame rectangle with tangential halfwidth `Delta` and normal
//! halfwidth `delta / 2`, where `c = min(1, 1/sqrt(2M))`. The normal
//! deviation budget is `delta / 4`, leaving margin for the grid rounding of
//! lifted measures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Direction, Scale};
use crate::measure::DeltaMeasure;
use crate::tol;

// ---------------------------------------------------------------------------
// Curve specifications
// ---------------------------------------------------------------------------

/// Piecewise-polynomial curve data (user-supplied curves).
#[derive(Clone, Debug, PartialEq, serde::Deserialize, Serialize)]
pub struct PiecewisePoly {
    /// Strictly increasing breakpoints; the first must be <= -2 and the
    /// last >= 2 so the curve is defined on the certification domain.
    pub breakpoints: Vec<f64>,
    /// Coefficients per piece, ascending powers of `x`.
    pub coefficients: Vec<Vec<f64>>,
    /// Declared Lipschitz bound for `phi''` (modulus used to turn sampled
    /// bounds into certificates).
    pub d2_lipschitz: f64,
}

impl PiecewisePoly {
    fn piece(&self, x: f64) -> usize {
        let mut i = 0;
        while i + 1 < self.breakpoints.len() - 1 && x >= self.breakpoints[i + 1] {
            i += 1;
        }
        i
    }

    fn eval_deriv(&self, x: f64, order: u32) -> f64 {
        let c = &self.coefficients[self.piece(x)];
        let mut val = 0.0;
        for (k, &a) in c.iter().enumerate() {
            let k = k as u32;
            if k < order {
                continue;
            }
            let mut coef = a;
            for d in 0..order {
                coef *= (k - d) as f64;
            }
            val += coef * x.powi((k - order) as i32);
        }
        val
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
enum CurveKind {
    /// `phi(x) = x^2`.
    Parabola,
    /// `phi(x) = x^2 / 2`.
    HalfParabola,
    Poly(PiecewisePoly),
}

/// Certified bounds for `phi''` on `[-2, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvatureCertificate {
    pub convexity_margin: f64,
    pub second_derivative_sup: f64,
    /// Sampling resolution used for the certificate.
    pub samples: usize,
}

/// A strictly convex C^2 graph with evaluators and curvature certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveSpec {
    kind: CurveKind,
    cert: CurvatureCertificate,
}

impl CurveSpec {
    pub fn parabola() -> Self {
        CurveSpec {
            kind: CurveKind::Parabola,
            cert: CurvatureCertificate {
                convexity_margin: 2.0,
                second_derivative_sup: 2.0,
                samples: 0,
            },
        }
    }

    pub fn half_parabola() -> Self {
        CurveSpec {
            kind: CurveKind::HalfParabola,
            cert: CurvatureCertificate {
                convexity_margin: 1.0,
                second_derivative_sup: 1.0,
                samples: 0,
            },
        }
    }

    /// Built-in curve names accepted by the CLI.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "parabola" => Ok(Self::parabola()),
            "halfparabola" => Ok(Self::half_parabola()),
            other => Err(Error::InvalidParameter(format!(
                "unknown curve {other:?}; built-ins are \"parabola\" and \"halfparabola\""
            ))),
        }
    }

    /// Certify a user-supplied piecewise polynomial: positive sampled
    /// convexity margin, finite second-derivative sup, and finite-difference
    /// consistency of the first derivative.
    pub fn from_poly(poly: PiecewisePoly) -> Result<Self> {
        if poly.breakpoints.len() < 2
            || poly.coefficients.len() + 1 != poly.breakpoints.len()
            || poly.d2_lipschitz < 0.0
        {
            return Err(Error::CurveCertificate("malformed piecewise polynomial".into()));
        }
        if poly.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::CurveCertificate("breakpoints must increase".into()));
        }
        if poly.breakpoints[0] > -2.0 || *poly.breakpoints.last().unwrap() < 2.0 {
            return Err(Error::CurveCertificate(
                "pieces must cover the certification domain [-2,2]".into(),
            ));
        }
        let n = tol::CERTIFICATE_SAMPLES;
        let mesh = 4.0 / n as f64;
        let mut min_d2 = f64::INFINITY;
        let mut max_d2 = f64::NEG_INFINITY;
        for i in 0..=n {
            let x = -2.0 + i as f64 * mesh;
            let d2 = poly.eval_deriv(x, 2);
            min_d2 = min_d2.min(d2);
            max_d2 = max_d2.max(d2);
        }
        let margin = min_d2 - poly.d2_lipschitz * mesh / 2.0;
        let sup = max_d2 + poly.d2_lipschitz * mesh / 2.0;
        if margin <= 0.0 {
            return Err(Error::CurveCertificate(format!(
                "convexity margin {margin} not positive on [-2,2]"
            )));
        }
        // phi' consistency by central differences.
        let h = 1e-5;
        for i in 0..tol::DERIVATIVE_SAMPLES {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / tol::DERIVATIVE_SAMPLES as f64;
            let fd = (poly.eval_deriv(x + h, 0) - poly.eval_deriv(x - h, 0)) / (2.0 * h);
            let an = poly.eval_deriv(x, 1);
            let denom = an.abs().max(1.0);
            if (fd - an).abs() / denom > tol::DERIVATIVE_CONSISTENCY_RTOL {
                return Err(Error::CurveCertificate(format!(
                    "phi' inconsistent with phi at x = {x}: fd {fd} vs {an}"
                )));
            }
        }
        Ok(CurveSpec {
            kind: CurveKind::Poly(poly),
            cert: CurvatureCertificate {
                convexity_margin: margin,
                second_derivative_sup: sup,
                samples: n,
            },
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            CurveKind::Parabola => x * x,
            CurveKind::HalfParabola => 0.5 * x * x,
            CurveKind::Poly(p) => p.eval_deriv(x, 0),
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        match &self.kind {
            CurveKind::Parabola => 2.0 * x,
            CurveKind::HalfParabola => x,
            CurveKind::Poly(p) => p.eval_deriv(x, 1),
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        match &self.kind {
            CurveKind::Parabola => 2.0,
            CurveKind::HalfParabola => 1.0,
            CurveKind::Poly(p) => p.eval_deriv(x, 2),
        }
    }

    pub fn certificate(&self) -> CurvatureCertificate {
        self.cert
    }

    pub fn point(&self, x: f64) -> [f64; 2] {
        [x, self.eval(x)]
    }

    /// Arclength of the graph over `[a, b]` (composite Simpson).
    pub fn arclength(&self, a: f64, b: f64) -> f64 {
        let n = 1 << 12;
        let h = (b - a) / n as f64;
        let f = |x: f64| (1.0 + self.deriv(x).powi(2)).sqrt();
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }
}

// ---------------------------------------------------------------------------
// Flatness constant and tangent frames
// ---------------------------------------------------------------------------

/// `c = min(1, 1/sqrt(2M))` with `M` the certified second-derivative sup:
/// within a `c*Delta`-disc around a curve point, the normal deviation from
/// the tangent is at most `(M/2)(c Delta)^2 <= Delta^2 / 4 = delta / 4`.
pub fn flatness_constant(curve: &CurveSpec) -> f64 {
    let m = curve.certificate().second_derivative_sup;
    (1.0 / (2.0 * m).sqrt()).min(1.0)
}

/// Tangent-normal frame at an anchor abscissa, exposing the projection
/// "along" the tangent rectangle.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TangentFrame {
    pub x_theta: f64,
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
}

impl TangentFrame {
    /// Whether `p` lies in the tangent rectangle `R(theta)` of scales
    /// `(delta, Delta)`: tangential halfwidth `Delta`, normal halfwidth
    /// `delta / 2`.
    pub fn rect_contains(&self, p: [f64; 2], delta: f64, big_delta: f64) -> bool {
        let v = [p[0] - self.point[0], p[1] - self.point[1]];
        let t = self.tangent[0] * v[0] + self.tangent[1] * v[1];
        let n = self.normal[0] * v[0] + self.normal[1] * v[1];
        t.abs() <= big_delta && n.abs() <= delta / 2.0
    }

    /// Tangential and normal coordinates of a point relative to the anchor.
    pub fn coords(&self, p: [f64; 2]) -> (f64, f64) {
        let v = [p[0] - self.point[0], p[1] - self.point[1]];
        (
            self.tangent[0] * v[0] + self.tangent[1] * v[1],
            self.normal[0] * v[0] + self.normal[1] * v[1],
        )
    }

    /// The direction of the normal line: `pi_theta` projects onto it.
    pub fn projection_direction(&self) -> Direction {
        Direction::from_vector(self.normal[0], self.normal[1]).expect("unit normal")
    }
}

/// Frame at `x_theta in [-1, 1]` with tangent `(1, phi'(x))/norm` and left
/// normal.
pub fn tangent_projection(curve: &CurveSpec, x_theta: f64) -> Result<TangentFrame> {
    if !(-1.0..=1.0).contains(&x_theta) {
        return Err(Error::InvalidParameter(format!(
            "anchor {x_theta} outside the curve domain [-1,1]"
        )));
    }
    let slope = curve.deriv(x_theta);
    let norm = (1.0 + slope * slope).sqrt();
    Ok(TangentFrame {
        x_theta,
        point: curve.point(x_theta),
        tangent: [1.0 / norm, slope / norm],
        normal: [-slope / norm, 1.0 / norm],
    })
}

/// Sampled verification of the flatness containment: for every anchor and
/// every curve point within `c * Delta` of it, the point lies in
/// `R(theta)`. Returns the first violating `(anchor, x)` pair if any.
pub fn verify_flatness(
    curve: &CurveSpec,
    c: f64,
    delta: f64,
    anchors: usize,
) -> Option<(f64, f64)> {
    let big_delta = delta.sqrt();
    let r = c * big_delta;
    for ai in 0..anchors {
        let x0 = -1.0 + 2.0 * (ai as f64 + 0.5) / anchors as f64;
        let frame = tangent_projection(curve, x0).expect("anchor in domain");
        let steps = 512;
        for s in 0..=steps {
            let x = x0 - 2.0 * r + 4.0 * r * s as f64 / steps as f64;
            if !(-1.0..=1.0).contains(&x) {
                continue;
            }
            let p = curve.point(x);
            let dx = p[0] - frame.point[0];
            let dy = p[1] - frame.point[1];
            if dx * dx + dy * dy > r * r {
                continue;
            }
            if !frame.rect_contains(p, delta, big_delta) {
                return Some((x0, x));
            }
        }
    }
    None
}

// ---------------------------------------------------------------------------
// Curve covers
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    /// Ball radius `c * Delta`.
    pub radius: f64,
    /// The enlargement constant `A = 10 / c` used by downstream
    /// rectangle arguments; recorded with every cover.
    pub a_constant: f64,
    /// Minimal pairwise separation enforced between centers.
    pub separation: f64,
    pub centers: Vec<[f64; 2]>,
    /// Every support atom lies within `radius` of some center.
    pub cover_ok: bool,
    /// Max number of balls containing a single support atom.
    pub overlap_max: usize,
    /// Balls whose support slice has diameter below `radius / D`.
    pub diameter_violations: Vec<usize>,
}

/// Greedy maximal `(c Delta / 2)`-separated ball cover of the support of a
/// measure on the curve (centers in ascending abscissa order for
/// determinism), with the bounded-overlap and slice-diameter diagnostics.
pub fn curve_cover(
    sigma: &DeltaMeasure,
    curve: &CurveSpec,
    big_delta: Scale,
    d_factor: f64,
) -> Result<CoverReport> {
    if sigma.dim() != 2 {
        return Err(Error::InvalidParameter("curve_cover needs a planar measure".into()));
    }
    if sigma.is_empty() {
        return Err(Error::Empty("curve_cover on empty support".into()));
    }
    let delta = sigma.delta();
    for (p, _) in sigma.positions() {
        if (p[1] - curve.eval(p[0])).abs() > 2.0 * delta {
            return Err(Error::InvalidParameter(format!(
                "support atom {p:?} further than 2 delta from the curve"
            )));
        }
    }
    let c = flatness_constant(curve);
    let radius = c * big_delta.delta();
    let sep = radius / 2.0;
    let pts: Vec<[f64; 2]> = sigma.positions().map(|(p, _)| p).collect();
    // Atoms are already sorted by (x, y): ascending abscissa.
    let mut centers: Vec<[f64; 2]> = Vec::new();
    for p in &pts {
        let ok = centers
            .iter()
            .all(|q| (p[0] - q[0]).hypot(p[1] - q[1]) >= sep);
        if ok {
            centers.push(*p);
        }
    }
    let dist = |a: &[f64; 2], b: &[f64; 2]| (a[0] - b[0]).hypot(a[1] - b[1]);
    let mut cover_ok = true;
    let mut overlap_max = 0usize;
    for p in &pts {
        let within = centers.iter().filter(|q| dist(p, q) <= radius).count();
        if within == 0 {
            cover_ok = false;
        }
        overlap_max = overlap_max.max(within);
    }
    let mut diameter_violations = Vec::new();
    for (bi, q) in centers.iter().enumerate() {
        let members: Vec<[f64; 2]> = pts.iter().filter(|p| dist(p, q) <= radius).copied().collect();
        let mut diam: f64 = 0.0;
        for i in 0..members.len() {
            for j in i + 1..members.len() {
                diam = diam.max(dist(&members[i], &members[j]));
            }
        }
        if diam < radius / d_factor {
            diameter_violations.push(bi);
        }
    }
    Ok(CoverReport {
        radius,
        a_constant: 10.0 / c,
        separation: sep,
        centers,
        cover_ok,
        overlap_max,
        diameter_violations,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{from_ifs, IfsSpec};

    #[test]
    fn flatness_constant_values() {
        assert_eq!(flatness_constant(&CurveSpec::parabola()), 0.5);
        let c = flatness_constant(&CurveSpec::half_parabola());
        assert!((c - 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flatness_containment_across_scales() {
        for curve in [CurveSpec::parabola(), CurveSpec::half_parabola()] {
            let c = flatness_constant(&curve);
            for m in [8u32, 10, 12, 14, 16] {
                let delta = (-(m as f64)).exp2();
                assert!(verify_flatness(&curve, c, delta, 64).is_none());
            }
        }
    }

    #[test]
    fn doubled_constant_breaks_containment() {
        let curve = CurveSpec::parabola();
        let c = flatness_constant(&curve);
        let delta = (-16f64).exp2();
        assert!(verify_flatness(&curve, 2.0 * c, delta, 64).is_some());
    }

    #[test]
    fn tangent_frames_at_parabola_anchors() {
        let curve = CurveSpec::parabola();
        let f0 = tangent_projection(&curve, 0.0).unwrap();
        assert_eq!(f0.tangent, [1.0, 0.0]);
        // Normal at 0 is vertical: the projection direction is the y-axis.
        let d = f0.projection_direction();
        assert!((d.unit()[0] - 0.0).abs() < 1e-15 && (d.unit()[1] - 1.0).abs() < 1e-15);

        let fh = tangent_projection(&curve, 0.5).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((fh.tangent[0] - s).abs() < 1e-12 && (fh.tangent[1] - s).abs() < 1e-12);
        assert!((fh.normal[0] + s).abs() < 1e-12 && (fh.normal[1] - s).abs() < 1e-12);
    }

    #[test]
    fn projection_distance_comparable_to_slope_gap() {
        // || pi_1 - pi_2 || vs |phi'(x1) - phi'(x2)| within [1/4, 4] for
        // interior anchors (the ratio approaches 1/(1+phi'^2) = 1/5 at the
        // domain endpoints, so the band is checked away from them).
        use rand::prelude::*;
        let curve = CurveSpec::parabola();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let x1: f64 = rng.gen_range(-0.75..0.75);
            let x2: f64 = rng.gen_range(-0.75..0.75);
            if (x1 - x2).abs() < 1e-3 {
                continue;
            }
            let d1 = tangent_projection(&curve, x1).unwrap().projection_direction();
            let d2 = tangent_projection(&curve, x2).unwrap().projection_direction();
            let lhs = d1.projection_distance(&d2);
            let rhs = (curve.deriv(x1) - curve.deriv(x2)).abs();
            assert!(lhs >= rhs / 4.0 && lhs <= rhs * 4.0, "lhs {lhs}, rhs {rhs}");
        }
    }

    #[test]
    fn poly_curve_certification() {
        // x^2 + x^4/8 on [-2,2]: phi'' = 2 + 3x^2/2 in [2, 8].
        let poly = PiecewisePoly {
            breakpoints: vec![-2.0, 2.0],
            coefficients: vec![vec![0.0, 0.0, 1.0, 0.0, 0.125]],
            d2_lipschitz: 6.0,
        };
        let curve = CurveSpec::from_poly(poly).unwrap();
        let cert = curve.certificate();
        assert!(cert.convexity_margin > 1.9 && cert.convexity_margin <= 2.0);
        assert!(cert.second_derivative_sup >= 8.0 && cert.second_derivative_sup < 8.1);
    }

    #[test]
    fn poly_curve_rejects_nonconvex() {
        let poly = PiecewisePoly {
            breakpoints: vec![-2.0, 2.0],
            coefficients: vec![vec![0.0, 1.0]], // a line: phi'' = 0
            d2_lipschitz: 0.0,
        };
        assert!(CurveSpec::from_poly(poly).is_err());
    }

    #[test]
    fn cover_of_lifted_lebesgue() {
        // Lebesgue on [-1,1] lifted to the parabola; Delta = 2^-4. Ball
        // count should be comparable to arclength / separation, within a
        // factor 4 of 2 / (c Delta).
        let m = 9u32;
        let scale = Scale::new(m, 1).unwrap();
        let n = 1i64 << m;
        let idx: Vec<[i64; 2]> = (-n..n).map(|i| [i, 0]).collect();
        let nu = DeltaMeasure::uniform_on(scale, &idx).unwrap();
        let curve = CurveSpec::parabola();
        let lifted = nu.lift_to_curve(&curve).unwrap();
        let rep = curve_cover(&lifted, &curve, Scale::new(4, 2).unwrap(), 2.0).unwrap();
        assert!(rep.cover_ok);
        assert!(rep.overlap_max <= 9, "overlap {}", rep.overlap_max);
        let c = flatness_constant(&curve);
        let nominal = 2.0 / (c * Scale::new(4, 2).unwrap().delta());
        let count = rep.centers.len() as f64;
        assert!(count <= 4.0 * nominal && count >= nominal / 4.0, "count {count} vs {nominal}");
        // Pairwise separation >= c Delta / 2.
        for i in 0..rep.centers.len() {
            for j in i + 1..rep.centers.len() {
                let a = rep.centers[i];
                let b = rep.centers[j];
                assert!((a[0] - b[0]).hypot(a[1] - b[1]) >= rep.separation - 1e-12);
            }
        }
    }

    #[test]
    fn cover_single_tight_cluster_is_one_ball() {
        let curve = CurveSpec::parabola();
        let nu = from_ifs(&IfsSpec::cantor4(), Scale::new(12, 1).unwrap()).unwrap();
        let window = crate::measure::Window::interval(0.0, 2.0 * nu.delta()).unwrap();
        let tiny = nu.restrict(&window).unwrap();
        let lifted = tiny.lift_to_curve(&curve).unwrap();
        let rep = curve_cover(&lifted, &curve, Scale::new(4, 2).unwrap(), 16.0).unwrap();
        assert_eq!(rep.centers.len(), 1);
    }

    #[test]
    fn slope_strictly_increases_across_anchors() {
        let curve = CurveSpec::parabola();
        let mut last = f64::NEG_INFINITY;
        for i in 0..32 {
            let x = -1.0 + 2.0 * (i as f64 + 0.5) / 32.0;
            let f = tangent_projection(&curve, x).unwrap();
            let slope = curve.deriv(f.x_theta);
            assert!(slope > last);
            last = slope;
        }
    }
}
