//! Derivative of the metric projection onto a smooth convex body, and what a
//! cascade of such derivatives does to a vector.
//!
//! At an exterior point `x` with `d = ‖x − P(x)‖`, `DP(x)` annihilates the
//! radial direction `x − P(x)` and acts as `(1 + d·κ)⁻¹` on the tangent
//! hyperplane `H`, where `κ` is the curvature operator at `P(x)`.

use serde::{Deserialize, Serialize};

use crate::concentration::PredictionReport;
use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{curvature_operator, prob_lp_norm, tangent_basis, ConvexBody, CurvatureOperator, Vector};
use crate::randgen::{par_trials, unit_unchecked, Experiment, HaarOrthogonal};

/// `DP(x)` for a ball or ellipsoid at an exterior point `x`.
#[derive(Debug, Clone)]
pub struct ProjectionDerivative {
    base_point: Vector,
    projected: Vector,
    dist: f64,
    radial_dir: Vector,
    curvature: CurvatureOperator,
}

impl ProjectionDerivative {
    pub fn new(body: &ConvexBody, x: &Vector) -> Result<Self> {
        check_dim(body.dim(), x.len())?;
        if let ConvexBody::HalfSpaces(_) = body {
            return Err(Error::Unsupported("half-space sets (non-smooth)"));
        }
        let projected = body.project_unchecked(x);
        let offset = x - &projected;
        let dist = offset.norm();
        if dist == 0.0 || body.contains(x)? {
            return Err(Error::NotExterior);
        }
        let curvature = curvature_operator(body, &projected)?;
        Ok(Self {
            base_point: x.clone(),
            radial_dir: offset / dist,
            projected,
            dist,
            curvature,
        })
    }

    pub fn base_point(&self) -> &Vector {
        &self.base_point
    }

    pub fn projected(&self) -> &Vector {
        &self.projected
    }

    pub fn dist(&self) -> f64 {
        self.dist
    }

    pub fn radial_dir(&self) -> &Vector {
        &self.radial_dir
    }

    pub fn curvature(&self) -> &CurvatureOperator {
        &self.curvature
    }

    /// `DP(x)·w`.
    pub fn apply(&self, w: &Vector) -> Result<Vector> {
        self.curvature.resolvent(self.dist, w)
    }

    /// `(‖v‖₁^(π), ‖v‖₂^(π))` of the eigenvalues `v_ℓ = (1 + d·κ_ℓ)⁻¹` of
    /// `DP(x)` on `H`, computed from traces over an orthonormal basis of `H`.
    pub fn tangent_norms(&self) -> (f64, f64) {
        let basis = tangent_basis(self.curvature.normal());
        let m = basis.len().max(1) as f64;
        let (mut tr, mut tr2) = (0.0, 0.0);
        for b in &basis {
            let rb = self.apply(b).expect("dimension matches");
            tr += b.dot(&rb);
            tr2 += rb.norm_squared();
        }
        (tr / m, (tr2 / m).sqrt())
    }
}

/// `DP(x)·w` for the derivative `pd`.
pub fn dp_apply(pd: &ProjectionDerivative, w: &Vector) -> Result<Vector> {
    pd.apply(w)
}

/// Central difference `(P(x + h·w) − P(x − h·w)) / 2h`.
pub fn finite_difference(body: &ConvexBody, x: &Vector, w: &Vector, h: f64) -> Result<Vector> {
    check_dim(body.dim(), x.len())?;
    check_dim(body.dim(), w.len())?;
    let plus = body.project_unchecked(&(x + w * h));
    let minus = body.project_unchecked(&(x - w * h));
    Ok((plus - minus) / (2.0 * h))
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("quad_points", "must be at least 1"));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let step = p1 / dp;
            z -= step;
            if step.abs() <= 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Smallest value of the body's defining gauge along the segment, minus one;
/// positive iff the segment misses the body.
fn segment_clearance(body: &ConvexBody, x0: &Vector, w: &Vector) -> Result<f64> {
    let (center, inv_sq): (&Vector, Vector) = match body {
        ConvexBody::Ball(b) => (
            b.center(),
            Vector::from_element(x0.len(), 1.0 / (b.radius() * b.radius())),
        ),
        ConvexBody::Ellipsoid(e) => (e.center(), e.semi_axes().map(|a| 1.0 / (a * a))),
        ConvexBody::HalfSpaces(_) => return Err(Error::Unsupported("half-space sets (non-smooth)")),
    };
    let z = x0 - center;
    let ww = w.component_mul(&inv_sq).dot(w);
    let t = if ww > 0.0 {
        (-z.component_mul(&inv_sq).dot(w) / ww).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let p = z + w * t;
    Ok(p.component_mul(&inv_sq).dot(&p) - 1.0)
}

/// `‖P(x₁) − P(x₀) − ∫₀¹ DP(x₀ + t·w)·w dt‖` with `w = x₁ − x₀`, using
/// Gauss–Legendre quadrature with `quad_points` nodes. The segment must
/// stay outside the body.
pub fn mean_value_check(body: &ConvexBody, x0: &Vector, x1: &Vector, quad_points: usize) -> Result<f64> {
    check_dim(body.dim(), x0.len())?;
    check_dim(body.dim(), x1.len())?;
    let (nodes, weights) = gauss_legendre(quad_points)?;
    let w = x1 - x0;
    if segment_clearance(body, x0, &w)? <= 0.0 {
        return Err(Error::SegmentMeetsBody);
    }
    if w.iter().all(|c| *c == 0.0) {
        return Ok(0.0);
    }
    let mut integral = Vector::zeros(w.len());
    for (t, wt) in nodes.iter().zip(&weights) {
        let x = x0 + &w * (0.5 * (t + 1.0));
        let pd = ProjectionDerivative::new(body, &x)?;
        integral.axpy(0.5 * wt, &pd.apply(&w)?, 1.0);
    }
    let diff = body.project_unchecked(x1) - body.project_unchecked(x0);
    Ok((diff - integral).norm())
}

/// One step of a cascade: the distance `d_k` and the principal curvatures
/// `κ_ℓ⁽ᵏ⁾` at the projected point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeStep {
    pub dist: f64,
    pub curvatures: Vec<f64>,
}

impl CascadeStep {
    /// `v_ℓ = (1 + d·κ_ℓ)⁻¹`.
    pub fn factors(&self) -> Vec<f64> {
        self.curvatures.iter().map(|k| 1.0 / (1.0 + self.dist * k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CascadeStep>", into = "Vec<CascadeStep>")]
pub struct CascadePath {
    steps: Vec<CascadeStep>,
}

impl CascadePath {
    pub fn new(steps: Vec<CascadeStep>) -> Result<Self> {
        let first = steps
            .first()
            .ok_or_else(|| invalid("steps", "need at least one step"))?;
        let m = first.curvatures.len();
        if m == 0 {
            return Err(invalid("curvatures", "need at least one curvature per step"));
        }
        for s in &steps {
            if !(s.dist.is_finite() && s.dist >= 0.0) {
                return Err(invalid("dist", "must be finite and nonnegative"));
            }
            if s.curvatures.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: s.curvatures.len(),
                });
            }
            if s.curvatures.iter().any(|k| !(k.is_finite() && *k >= 0.0)) {
                return Err(invalid("curvatures", "must be finite and nonnegative"));
            }
        }
        Ok(Self { steps })
    }

    /// `M` steps with the same distance and curvature everywhere, in
    /// dimension `N` (so `N − 1` curvatures per step).
    pub fn uniform(m: usize, n: usize, dist: f64, curvature: f64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("N", "need N >= 2"));
        }
        Self::new(vec![
            CascadeStep {
                dist,
                curvatures: vec![curvature; n - 1],
            };
            m
        ])
    }

    pub fn steps(&self) -> &[CascadeStep] {
        &self.steps
    }
}

impl TryFrom<Vec<CascadeStep>> for CascadePath {
    type Error = Error;
    fn try_from(steps: Vec<CascadeStep>) -> Result<Self> {
        Self::new(steps)
    }
}

impl From<CascadePath> for Vec<CascadeStep> {
    fn from(p: CascadePath) -> Self {
        p.steps
    }
}

/// `Π_k ‖v⁽ᵏ⁾‖₂^(π)`: likely factor by which the cascade shrinks a vector.
pub fn cascade_norm_prediction(path: &CascadePath) -> f64 {
    path.steps
        .iter()
        .map(|s| prob_lp_norm(&s.factors(), 2.0).expect("nonempty"))
        .product()
}

/// `Π_k ‖v⁽ᵏ⁾‖₁^(π)/‖v⁽ᵏ⁾‖₂^(π)`.
pub fn cascade_ratio_product(path: &CascadePath) -> f64 {
    path.steps
        .iter()
        .map(|s| {
            let v = s.factors();
            prob_lp_norm(&v, 1.0).expect("nonempty") / prob_lp_norm(&v, 2.0).expect("nonempty")
        })
        .product()
}

/// `√(2·(1 − Π_k ‖v⁽ᵏ⁾‖₁^(π)/‖v⁽ᵏ⁾‖₂^(π)))`: likely distance between the
/// directions before and after the cascade. Never exceeds `√2`.
pub fn cascade_rotation_prediction(path: &CascadePath) -> f64 {
    (2.0 * (1.0 - cascade_ratio_product(path))).max(0.0).sqrt()
}

/// `(‖v‖₂^(π), ½(‖v‖₂^(π) + 1/‖v‖₂^(π)), ‖v‖₁^(π)/‖v‖₂^(π))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRatioBounds {
    pub lower: f64,
    pub upper: f64,
    pub ratio: f64,
}

impl NormRatioBounds {
    /// `lower ≤ ratio ≤ upper` up to a relative `1e-12`.
    pub fn holds(&self) -> bool {
        let slack = 1e-12 * self.upper;
        self.lower <= self.ratio + slack && self.ratio <= self.upper + slack
    }
}

/// For `v ∈ (0,1]^m`: `‖v‖₂^(π) ≤ ‖v‖₁^(π)/‖v‖₂^(π) ≤ ½(‖v‖₂^(π) + 1/‖v‖₂^(π))`.
/// A ratio near zero therefore forces a small `‖v‖₂^(π)`.
pub fn norm_ratio_bounds(v: &[f64]) -> Result<NormRatioBounds> {
    if v.is_empty() {
        return Err(invalid("v", "must be nonempty"));
    }
    if v.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
        return Err(invalid("v", "entries must lie in (0, 1]"));
    }
    let l1 = prob_lp_norm(v, 1.0)?;
    let l2 = prob_lp_norm(v, 2.0)?;
    let b = NormRatioBounds {
        lower: l2,
        upper: 0.5 * (l2 + 1.0 / l2),
        ratio: l1 / l2,
    };
    debug_assert!(b.holds(), "{b:?}");
    Ok(b)
}

/// One body of a cascade and the distance at which the iterate sits from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeLink {
    pub body: ConvexBody,
    pub distance: f64,
}

/// Norm and direction change of a vector pushed through random cascades.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeReport {
    /// `‖w_M‖/‖w₀‖` against the mean per-trial norm prediction.
    pub norm: PredictionReport,
    /// `‖w_M/‖w_M‖ − w₀/‖w₀‖‖²` against the mean of
    /// `2·(1 − Π ‖v‖₁^(π)/‖v‖₂^(π))`.
    pub rotation: PredictionReport,
    /// The same shift as a distance, against the rotation prediction.
    pub rotation_distance: PredictionReport,
}

struct TrialOutcome {
    norm_ratio: f64,
    shift_sq: f64,
    norm_pred: f64,
    ratio_pred: f64,
}

fn random_boundary_point<R: rand::Rng + ?Sized>(body: &ConvexBody, rng: &mut R) -> Vector {
    let n = body.dim();
    let u = unit_unchecked(n, rng);
    match body {
        ConvexBody::Ball(b) => b.center() + u * b.radius(),
        ConvexBody::Ellipsoid(e) => {
            let scale = u.component_div(e.semi_axes()).norm();
            e.center() + u / scale
        }
        ConvexBody::HalfSpaces(_) => unreachable!("rejected before sampling"),
    }
}

/// Applies `DP` for each link in turn to `w0`. Every link is placed at a
/// fresh random position: balls at a uniform direction from their center,
/// ellipsoids at a random boundary point after an independent Haar-random
/// rotation of the body. Each iterate sits at the link's distance from its
/// body. Trials whose vector is annihilated are discarded and counted.
pub fn mc_cascade(chain: &[CascadeLink], w0: &Vector, trials: usize, exp: &Experiment) -> Result<CascadeReport> {
    if chain.is_empty() {
        return Err(invalid("chain", "need at least one body"));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    let n = w0.len();
    if n < 2 {
        return Err(invalid("N", "need N >= 2"));
    }
    for link in chain {
        check_dim(n, link.body.dim())?;
        if let ConvexBody::HalfSpaces(_) = link.body {
            return Err(Error::Unsupported("half-space sets (non-smooth)"));
        }
        if !(link.distance.is_finite() && link.distance > 0.0) {
            return Err(invalid("distance", "must be finite and > 0"));
        }
    }
    let w0_len = w0.norm();
    if w0_len == 0.0 {
        return Err(invalid("w0", "must be nonzero"));
    }
    let w0_dir = w0 / w0_len;
    let outcomes = par_trials(exp, trials, |rng, _| -> Result<Option<TrialOutcome>> {
        let mut w = w0.clone();
        let (mut norm_pred, mut ratio_pred) = (1.0, 1.0);
        for link in chain {
            let (pd, rotation) = match &link.body {
                ConvexBody::Ball(b) => {
                    let u = unit_unchecked(n, rng);
                    let x = b.center() + u * (b.radius() + link.distance);
                    (ProjectionDerivative::new(&link.body, &x)?, None)
                }
                body => {
                    let q = HaarOrthogonal::sample(n, rng)?;
                    let y = random_boundary_point(body, rng);
                    let x = &y + body.outward_normal(&y)? * link.distance;
                    (ProjectionDerivative::new(body, &x)?, Some(q))
                }
            };
            w = match &rotation {
                None => pd.apply(&w)?,
                Some(q) => q.apply(&pd.apply(&q.apply_transpose(&w)?)?)?,
            };
            let (l1, l2) = pd.tangent_norms();
            norm_pred *= l2;
            ratio_pred *= l1 / l2;
            let len = w.norm();
            if !(len > 0.0 && len.is_finite()) {
                return Ok(None);
            }
        }
        let len = w.norm();
        Ok(Some(TrialOutcome {
            norm_ratio: len / w0_len,
            shift_sq: (w / len - &w0_dir).norm_squared(),
            norm_pred,
            ratio_pred,
        }))
    });
    let mut kept = Vec::with_capacity(trials);
    for o in outcomes {
        if let Some(t) = o? {
            kept.push(t);
        }
    }
    let discarded = trials - kept.len();
    let m = chain.len();
    let seed = exp.master_seed;
    let mean = |f: &dyn Fn(&TrialOutcome) -> f64| {
        crate::stats::Summary::of(&kept.iter().map(f).collect::<Vec<_>>()).map(|s| s.mean)
    };
    let norm_pred = mean(&|t| t.norm_pred).ok_or(Error::NoValidTrials { total: trials })?;
    let rot_sq_pred = mean(&|t| 2.0 * (1.0 - t.ratio_pred)).unwrap_or(0.0).max(0.0);
    let norms: Vec<f64> = kept.iter().map(|t| t.norm_ratio).collect();
    let shifts: Vec<f64> = kept.iter().map(|t| t.shift_sq).collect();
    let dists: Vec<f64> = shifts.iter().map(|s| s.sqrt()).collect();
    Ok(CascadeReport {
        norm: PredictionReport::new("cascade_norm", n, m, norm_pred, &norms, discarded, seed)?,
        rotation: PredictionReport::new("cascade_rotation", n, m, rot_sq_pred, &shifts, discarded, seed)?,
        rotation_distance: PredictionReport::new(
            "cascade_rotation_distance",
            n,
            m,
            rot_sq_pred.sqrt(),
            &dists,
            discarded,
            seed,
        )?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ball, Ellipsoid, HalfSpace};
    use crate::randgen::{uniform_sphere, RngStream};
    use nalgebra::dvector;

    fn unit_ball(n: usize) -> ConvexBody {
        Ball::centered(n, 1.0).unwrap().into()
    }

    #[test]
    fn radial_direction_is_annihilated() {
        let body = unit_ball(3);
        let x = dvector![1.2, -0.9, 2.0];
        let pd = ProjectionDerivative::new(&body, &x).unwrap();
        let out = dp_apply(&pd, &(pd.radial_dir() * 3.0)).unwrap();
        assert!(out.norm() < 1e-15);
    }

    #[test]
    fn ball_closed_form() {
        let pd = ProjectionDerivative::new(&unit_ball(3), &dvector![2.0, 0.0, 0.0]).unwrap();
        assert_eq!(pd.dist(), 1.0);
        let out = pd.apply(&dvector![0.0, 1.0, 0.0]).unwrap();
        assert!((out - dvector![0.0, 0.5, 0.0]).norm() < 1e-15);
        // (1/‖x‖)(I − x̂x̂ᵀ)w, the derivative of x ↦ x/‖x‖
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..20 {
            let x = uniform_sphere(5, &mut rng).unwrap() * 3.7;
            let w = uniform_sphere(5, &mut rng).unwrap();
            let xh = &x / x.norm();
            let oracle = (&w - &xh * xh.dot(&w)) / x.norm();
            let pd = ProjectionDerivative::new(&unit_ball(5), &x).unwrap();
            assert!((pd.apply(&w).unwrap() - oracle).norm() < 1e-14);
        }
    }

    #[test]
    fn matches_finite_differences() {
        let mut rng = RngStream::new(2, 0).rng();
        let bodies: Vec<ConvexBody> = vec![
            Ball::new(dvector![0.3, -1.0, 0.5, 2.0], 1.7).unwrap().into(),
            Ellipsoid::new(dvector![0.0, 1.0, 0.0, -0.5], dvector![2.0, 1.0, 0.5, 3.0])
                .unwrap()
                .into(),
        ];
        for body in &bodies {
            for _ in 0..30 {
                let y = random_boundary_point(body, &mut rng);
                let x = &y + body.outward_normal(&y).unwrap() * (0.1 + 2.0 * rand::Rng::random::<f64>(&mut rng));
                let w = uniform_sphere(4, &mut rng).unwrap();
                let pd = ProjectionDerivative::new(body, &x).unwrap();
                let exact = pd.apply(&w).unwrap();
                let fd = finite_difference(body, &x, &w, 1e-5).unwrap();
                assert!((&exact - &fd).norm() <= 1e-5 * exact.norm(), "{exact} {fd}");
            }
        }
    }

    #[test]
    fn symmetric_contraction() {
        let mut rng = RngStream::new(3, 0).rng();
        let body: ConvexBody = Ellipsoid::centered(dvector![1.0, 4.0, 0.3, 2.0, 1.5]).unwrap().into();
        for _ in 0..50 {
            let x = uniform_sphere(5, &mut rng).unwrap() * 6.0;
            let pd = ProjectionDerivative::new(&body, &x).unwrap();
            let a = uniform_sphere(5, &mut rng).unwrap();
            let b = uniform_sphere(5, &mut rng).unwrap();
            let (da, db) = (pd.apply(&a).unwrap(), pd.apply(&b).unwrap());
            assert!((da.dot(&b) - a.dot(&db)).abs() < 1e-12);
            assert!(da.norm() <= 1.0 + 1e-12);
            assert!(da.dot(&a) >= -1e-12);
        }
    }

    #[test]
    fn interior_and_polyhedra_rejected() {
        assert!(matches!(
            ProjectionDerivative::new(&unit_ball(2), &dvector![0.5, 0.0]),
            Err(Error::NotExterior)
        ));
        assert!(matches!(
            ProjectionDerivative::new(&unit_ball(2), &dvector![1.0, 0.0]),
            Err(Error::NotExterior)
        ));
        let h: ConvexBody = HalfSpace::new(dvector![1.0, 0.0], 0.0).unwrap().into();
        assert!(ProjectionDerivative::new(&h, &dvector![1.0, 0.0]).is_err());
    }

    #[test]
    fn tangent_norms_of_sphere() {
        let pd = ProjectionDerivative::new(&unit_ball(6), &dvector![0.0, 3.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let (l1, l2) = pd.tangent_norms();
        assert!((l1 - 1.0 / 3.0).abs() < 1e-15 && (l2 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 64] {
            let (x, w) = gauss_legendre(n).unwrap();
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((q - exact).abs() < 1e-13, "n={n}");
        }
        let (x, _) = gauss_legendre(2).unwrap();
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn mean_value_examples() {
        let b = unit_ball(2);
        let x0 = dvector![2.0, 0.0];
        assert_eq!(mean_value_check(&b, &x0, &x0, 64).unwrap(), 0.0);
        let r = mean_value_check(&b, &x0, &dvector![2.0, 0.5], 64).unwrap();
        assert!(r < 1e-8 * 0.5);
        let radial = mean_value_check(&b, &x0, &dvector![3.0, 0.0], 64).unwrap();
        assert!(radial < 1e-15);
        assert!(matches!(
            mean_value_check(&b, &dvector![2.0, 0.0], &dvector![-2.0, 0.0], 8),
            Err(Error::SegmentMeetsBody)
        ));
        let e: ConvexBody = Ellipsoid::centered(dvector![2.0, 1.0, 0.5]).unwrap().into();
        let r = mean_value_check(&e, &dvector![3.0, 1.0, 0.0], &dvector![2.0, 2.0, 1.0], 64).unwrap();
        assert!(r < 1e-8 * 3f64.sqrt());
    }

    #[test]
    fn cascade_prediction_examples() {
        let flat = CascadePath::uniform(4, 10, 0.0, 3.0).unwrap();
        assert_eq!(cascade_norm_prediction(&flat), 1.0);
        assert_eq!(cascade_rotation_prediction(&flat), 0.0);
        let one = CascadePath::uniform(1, 10, 2.0, 0.5).unwrap();
        assert!((cascade_norm_prediction(&one) - 0.5).abs() < 1e-15);
        assert!(cascade_rotation_prediction(&one) < 1e-7);
        let huge = CascadePath::uniform(3, 5, 100.0, 1.0).unwrap();
        assert!(cascade_norm_prediction(&huge) < 1e-5);
        let eps = 1e-12;
        let skew = CascadePath::new(vec![CascadeStep {
            dist: 1.0,
            curvatures: vec![0.0, 1.0 / eps - 1.0],
        }])
        .unwrap();
        let limit = (2.0 * (1.0 - 1.0 / 2f64.sqrt())).sqrt();
        assert!((cascade_rotation_prediction(&skew) - limit).abs() < 1e-6);
        assert!(CascadePath::new(vec![]).is_err());
        assert!(CascadePath::uniform(1, 3, -1.0, 1.0).is_err());
    }

    #[test]
    fn ratio_bounds_examples() {
        let b = norm_ratio_bounds(&[1.0; 7]).unwrap();
        assert_eq!((b.lower, b.upper, b.ratio), (1.0, 1.0, 1.0));
        let b = norm_ratio_bounds(&[1.0, 0.01]).unwrap();
        assert!((b.ratio - 0.7142).abs() < 1e-4);
        assert!((b.lower - (1.0001f64 / 2.0).sqrt()).abs() < 1e-15);
        assert!((b.upper - 1.0606).abs() < 1e-4);
        assert!(b.holds());
        assert!(norm_ratio_bounds(&[0.0, 1.0]).is_err());
        assert!(norm_ratio_bounds(&[1.5]).is_err());
    }

    #[test]
    fn grazing_cascade_keeps_norm() {
        let n = 50;
        let chain = vec![
            CascadeLink {
                body: unit_ball(n),
                distance: 1e-6,
            };
            3
        ];
        let mut w0 = Vector::zeros(n);
        w0[0] = 1.0;
        let r = mc_cascade(&chain, &w0, 200, &Experiment::new(5, "graze")).unwrap();
        assert!((r.norm.predicted - 1.0).abs() < 1e-5);
        // radial annihilation removes about 1/N of the squared norm per step
        assert!((r.norm.empirical_mean - (1.0 - 3.0 / n as f64).sqrt()).abs() < 0.02);
    }

    #[test]
    fn ellipsoid_cascade_runs() {
        let n = 12;
        let body: ConvexBody = Ellipsoid::centered(Vector::from_fn(n, |i, _| 1.0 + i as f64 * 0.3))
            .unwrap()
            .into();
        let chain = vec![CascadeLink { body, distance: 0.5 }; 2];
        let w0 = Vector::from_element(n, 1.0);
        let r = mc_cascade(&chain, &w0, 100, &Experiment::new(6, "ell")).unwrap();
        assert_eq!(r.norm.trials, 100);
        assert!(r.norm.predicted < 1.0);
        assert!(r.rotation.empirical_mean <= 2.0 + 1e-12);
    }
}
