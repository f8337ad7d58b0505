//! Vectors, probability-weighted `L^p` norms, convex constraint sets and their
//! metric projections, and boundary curvature for smooth bodies.
//!
//! Three kinds of closed convex set are supported:
//!
//! * [`Ball`]: closed Euclidean ball, projection is radial.
//! * [`Ellipsoid`]: axis-aligned ellipsoid, projection solves the scalar
//!   Lagrange-multiplier equation with safeguarded Newton.
//! * [`HalfSpaceSet`]: finite intersection of half-spaces, projection by
//!   Dykstra's alternating scheme (exact for a single half-space).
//!
//! Balls and ellipsoids have smooth boundaries and expose a
//! [`CurvatureOperator`] (the derivative of the outward unit normal field
//! restricted to the tangent hyperplane).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};

/// Dense real coordinate vector.
pub type Vector = DVector<f64>;

/// Tolerance on `‖normal‖ = 1` for half-spaces.
pub const UNIT_NORMAL_TOL: f64 = 1e-12;

/// Absolute tolerance for "point lies on the boundary".
pub const BOUNDARY_TOL: f64 = 1e-9;

const MULTIPLIER_TOL: f64 = 1e-12;

/// The `L^p` norm of `x` when each index carries probability `1/N`:
/// `((1/N) Σ |x_j|^p)^(1/p)`.
///
/// Nondecreasing in `p`. Computed with max-scaling so large `p` does not
/// overflow.
pub fn prob_lp_norm(x: &[f64], p: f64) -> Result<f64> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(invalid("p", format!("need finite p >= 1, got {p}")));
    }
    if x.is_empty() {
        return Err(invalid("x", "empty vector"));
    }
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mean = x.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>() / x.len() as f64;
    Ok(scale * mean.powf(1.0 / p))
}

fn check_finite(name: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(name, "entries must be finite"))
    }
}

/// The closed half-space `{y : ⟨normal, y⟩ ≤ offset}` with a unit normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHalfSpace", into = "RawHalfSpace")]
pub struct HalfSpace {
    normal: Vector,
    offset: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHalfSpace {
    normal: Vec<f64>,
    offset: f64,
}

impl TryFrom<RawHalfSpace> for HalfSpace {
    type Error = Error;
    fn try_from(raw: RawHalfSpace) -> Result<Self> {
        HalfSpace::new(Vector::from_vec(raw.normal), raw.offset)
    }
}

impl From<HalfSpace> for RawHalfSpace {
    fn from(h: HalfSpace) -> Self {
        RawHalfSpace {
            normal: h.normal.as_slice().to_vec(),
            offset: h.offset,
        }
    }
}

impl HalfSpace {
    /// Builds a half-space; `normal` must already have unit length.
    pub fn new(normal: Vector, offset: f64) -> Result<Self> {
        check_finite("normal", normal.as_slice())?;
        if normal.is_empty() {
            return Err(invalid("normal", "empty vector"));
        }
        if !offset.is_finite() {
            return Err(invalid("offset", "must be finite"));
        }
        let len = normal.norm();
        if (len - 1.0).abs() > UNIT_NORMAL_TOL {
            return Err(invalid("normal", format!("must be unit length, has norm {len}")));
        }
        Ok(Self { normal, offset })
    }

    /// `{y : ⟨a, y⟩ ≤ b}` rescaled so the normal is unit length.
    pub fn from_unnormalized(a: Vector, b: f64) -> Result<Self> {
        let len = a.norm();
        if !(len > 0.0 && len.is_finite()) {
            return Err(invalid("normal", "must be nonzero and finite"));
        }
        Self::new(a / len, b / len)
    }

    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Signed violation `⟨normal, x⟩ − offset`; positive outside.
    pub fn violation(&self, x: &Vector) -> f64 {
        self.normal.dot(x) - self.offset
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.violation(x) <= 0.0
    }

    pub(crate) fn project_unchecked(&self, x: &Vector) -> Vector {
        let excess = self.violation(x);
        if excess <= 0.0 {
            x.clone()
        } else {
            x - &self.normal * excess
        }
    }

    pub(crate) fn distance_unchecked(&self, x: &Vector) -> f64 {
        self.violation(x).max(0.0)
    }
}

/// Closed Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    center: Vector,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vector, radius: f64) -> Result<Self> {
        check_finite("center", center.as_slice())?;
        if center.is_empty() {
            return Err(invalid("center", "empty vector"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Self::new(Vector::zeros(dim), radius)
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Axis-aligned ellipsoid `{y : Σ ((y_i − c_i)/a_i)² ≤ 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    center: Vector,
    semi_axes: Vector,
}

impl Ellipsoid {
    pub fn new(center: Vector, semi_axes: Vector) -> Result<Self> {
        check_finite("center", center.as_slice())?;
        check_finite("semi_axes", semi_axes.as_slice())?;
        if center.is_empty() {
            return Err(invalid("center", "empty vector"));
        }
        check_dim(center.len(), semi_axes.len())?;
        if semi_axes.iter().any(|&a| a <= 0.0) {
            return Err(invalid("semi_axes", "all semi-axes must be positive"));
        }
        Ok(Self { center, semi_axes })
    }

    pub fn centered(semi_axes: Vector) -> Result<Self> {
        Self::new(Vector::zeros(semi_axes.len()), semi_axes)
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn semi_axes(&self) -> &Vector {
        &self.semi_axes
    }

    /// `Σ ((y_i − c_i)/a_i)²`; equals 1 on the boundary.
    pub fn level(&self, y: &Vector) -> f64 {
        y.iter()
            .zip(self.center.iter())
            .zip(self.semi_axes.iter())
            .map(|((y, c), a)| ((y - c) / a).powi(2))
            .sum()
    }

    /// Gradient of the level function up to the factor 2: `D⁻²(y − c)`.
    fn half_gradient(&self, y: &Vector) -> Vector {
        Vector::from_iterator(
            y.len(),
            y.iter()
                .zip(self.center.iter())
                .zip(self.semi_axes.iter())
                .map(|((y, c), a)| (y - c) / (a * a)),
        )
    }

    /// Lagrange multiplier `λ ≥ 0` with `Σ (a_i z_i / (a_i² + λ))² = 1`.
    ///
    /// The left side is convex and decreasing in `λ`; Newton iterates are kept
    /// inside a shrinking bracket and replaced by bisection when they leave it.
    fn multiplier(&self, z: &Vector) -> f64 {
        let az: Vec<(f64, f64)> = self
            .semi_axes
            .iter()
            .zip(z.iter())
            .map(|(a, z)| (a * a, a * z))
            .collect();
        let residual = |lambda: f64| -> (f64, f64) {
            let mut f = -1.0;
            let mut df = 0.0;
            for &(a2, az) in &az {
                let r = az / (a2 + lambda);
                f += r * r;
                df -= 2.0 * r * r / (a2 + lambda);
            }
            (f, df)
        };
        let mut lo = 0.0_f64;
        let mut hi = az.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let (f, df) = residual(lambda);
            if f > 0.0 {
                lo = lo.max(lambda);
            } else {
                hi = hi.min(lambda);
            }
            if f.abs() <= 1e-15 || hi - lo <= f64::EPSILON * hi {
                break;
            }
            let mut next = lambda - f / df;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - lambda).abs() <= 4.0 * f64::EPSILON * next.abs() {
                lambda = next;
                break;
            }
            lambda = next;
        }
        debug_assert!(residual(lambda).0.abs() <= MULTIPLIER_TOL);
        lambda
    }

    fn project(&self, x: &Vector) -> Vector {
        if self.level(x) <= 1.0 {
            return x.clone();
        }
        let z = x - &self.center;
        let lambda = self.multiplier(&z);
        Vector::from_iterator(
            x.len(),
            z.iter()
                .zip(self.semi_axes.iter())
                .zip(self.center.iter())
                .map(|((z, a), c)| c + a * a * z / (a * a + lambda)),
        )
    }
}

/// A finite, nonempty intersection of half-spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpaceSet {
    constraints: Vec<HalfSpace>,
}

impl HalfSpaceSet {
    pub fn new(constraints: Vec<HalfSpace>) -> Result<Self> {
        let first = constraints
            .first()
            .ok_or_else(|| invalid("constraints", "need at least one half-space"))?;
        let dim = first.dim();
        for h in &constraints {
            check_dim(dim, h.dim())?;
        }
        Ok(Self { constraints })
    }

    pub fn constraints(&self) -> &[HalfSpace] {
        &self.constraints
    }

    /// Dykstra's alternating projections; converges to the nearest point.
    fn project(&self, x: &Vector) -> Vector {
        if let [h] = self.constraints.as_slice() {
            return h.project_unchecked(x);
        }
        if self.constraints.iter().all(|h| h.contains(x)) {
            return x.clone();
        }
        let mut y = x.clone();
        let mut corrections = vec![Vector::zeros(x.len()); self.constraints.len()];
        for _ in 0..200_000 {
            let mut moved = 0.0;
            for (h, q) in self.constraints.iter().zip(corrections.iter_mut()) {
                let shifted = &y + &*q;
                let next = h.project_unchecked(&shifted);
                *q = shifted - &next;
                moved += (&next - &y).norm_squared();
                y = next;
            }
            if moved.sqrt() <= 1e-15 * (1.0 + y.norm()) {
                break;
            }
        }
        y
    }
}

/// A closed convex set supporting metric projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBody", into = "RawBody")]
pub enum ConvexBody {
    Ball(Ball),
    Ellipsoid(Ellipsoid),
    HalfSpaces(HalfSpaceSet),
}

/// JSON form of a body, tagged by `kind`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RawBody {
    Ball { center: Vec<f64>, radius: f64 },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
    HalfSpaces { constraints: Vec<HalfSpace> },
}

impl TryFrom<RawBody> for ConvexBody {
    type Error = Error;
    fn try_from(raw: RawBody) -> Result<Self> {
        Ok(match raw {
            RawBody::Ball { center, radius } => ConvexBody::Ball(Ball::new(Vector::from_vec(center), radius)?),
            RawBody::Ellipsoid { center, semi_axes } => {
                ConvexBody::Ellipsoid(Ellipsoid::new(Vector::from_vec(center), Vector::from_vec(semi_axes))?)
            }
            RawBody::HalfSpaces { constraints } => ConvexBody::HalfSpaces(HalfSpaceSet::new(constraints)?),
        })
    }
}

impl From<ConvexBody> for RawBody {
    fn from(body: ConvexBody) -> Self {
        match body {
            ConvexBody::Ball(b) => RawBody::Ball {
                center: b.center.as_slice().to_vec(),
                radius: b.radius,
            },
            ConvexBody::Ellipsoid(e) => RawBody::Ellipsoid {
                center: e.center.as_slice().to_vec(),
                semi_axes: e.semi_axes.as_slice().to_vec(),
            },
            ConvexBody::HalfSpaces(s) => RawBody::HalfSpaces {
                constraints: s.constraints,
            },
        }
    }
}

impl From<Ball> for ConvexBody {
    fn from(b: Ball) -> Self {
        ConvexBody::Ball(b)
    }
}

impl From<Ellipsoid> for ConvexBody {
    fn from(e: Ellipsoid) -> Self {
        ConvexBody::Ellipsoid(e)
    }
}

impl From<HalfSpace> for ConvexBody {
    fn from(h: HalfSpace) -> Self {
        ConvexBody::HalfSpaces(HalfSpaceSet { constraints: vec![h] })
    }
}

impl ConvexBody {
    pub fn dim(&self) -> usize {
        match self {
            ConvexBody::Ball(b) => b.center.len(),
            ConvexBody::Ellipsoid(e) => e.center.len(),
            ConvexBody::HalfSpaces(s) => s.constraints[0].dim(),
        }
    }

    /// Membership by direct evaluation of the defining inequalities.
    pub fn contains(&self, x: &Vector) -> Result<bool> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            ConvexBody::Ball(b) => (x - &b.center).norm() <= b.radius,
            ConvexBody::Ellipsoid(e) => e.level(x) <= 1.0,
            ConvexBody::HalfSpaces(s) => s.constraints.iter().all(|h| h.contains(x)),
        })
    }

    pub(crate) fn project_unchecked(&self, x: &Vector) -> Vector {
        match self {
            ConvexBody::Ball(b) => {
                let offset = x - &b.center;
                let len = offset.norm();
                if len <= b.radius {
                    x.clone()
                } else {
                    &b.center + offset * (b.radius / len)
                }
            }
            ConvexBody::Ellipsoid(e) => e.project(x),
            ConvexBody::HalfSpaces(s) => s.project(x),
        }
    }

    pub(crate) fn distance_unchecked(&self, x: &Vector) -> f64 {
        match self {
            ConvexBody::Ball(b) => ((x - &b.center).norm() - b.radius).max(0.0),
            ConvexBody::HalfSpaces(s) if s.constraints.len() == 1 => s.constraints[0].distance_unchecked(x),
            _ => (x - self.project_unchecked(x)).norm(),
        }
    }

    /// Outward unit normal at a boundary point of a smooth body.
    pub fn outward_normal(&self, y: &Vector) -> Result<Vector> {
        check_dim(self.dim(), y.len())?;
        match self {
            ConvexBody::Ball(b) => {
                let n = y - &b.center;
                let len = n.norm();
                Ok(n / len)
            }
            ConvexBody::Ellipsoid(e) => {
                let g = e.half_gradient(y);
                let len = g.norm();
                Ok(g / len)
            }
            ConvexBody::HalfSpaces(_) => Err(Error::Unsupported("half-space sets (non-smooth)")),
        }
    }

    /// First-order distance of `y` from the boundary.
    pub fn boundary_offset(&self, y: &Vector) -> Result<f64> {
        check_dim(self.dim(), y.len())?;
        match self {
            ConvexBody::Ball(b) => Ok(((y - &b.center).norm() - b.radius).abs()),
            ConvexBody::Ellipsoid(e) => {
                let g = e.half_gradient(y).norm();
                Ok((e.level(y) - 1.0).abs() / (2.0 * g))
            }
            ConvexBody::HalfSpaces(_) => Err(Error::Unsupported("half-space sets (non-smooth)")),
        }
    }
}

/// Nearest point of `body` to `x`.
pub fn project(x: &Vector, body: &ConvexBody) -> Result<Vector> {
    check_dim(body.dim(), x.len())?;
    Ok(body.project_unchecked(x))
}

/// `‖x − project(x, body)‖`.
pub fn distance(x: &Vector, body: &ConvexBody) -> Result<f64> {
    check_dim(body.dim(), x.len())?;
    Ok(body.distance_unchecked(x))
}

/// The derivative of the outward unit normal field at a boundary point,
/// acting on the tangent hyperplane `H = normal^⊥`.
///
/// Stored implicitly; applying it costs `O(N)`.
#[derive(Debug, Clone)]
pub struct CurvatureOperator {
    normal: Vector,
    kind: CurvatureKind,
}

#[derive(Debug, Clone)]
enum CurvatureKind {
    /// `κ = (1/r)·1` on `H`.
    Sphere { inv_radius: f64 },
    /// `κ w = (D⁻² w − n ⟨n, D⁻² w⟩) / ‖D⁻²(y−c)‖` on `H`.
    Ellipsoid { inv_sq_axes: Vector, grad_norm: f64 },
}

/// Curvature operator of a smooth body at `boundary_point`.
pub fn curvature_operator(body: &ConvexBody, boundary_point: &Vector) -> Result<CurvatureOperator> {
    if let ConvexBody::HalfSpaces(_) = body {
        return Err(Error::Unsupported("half-space sets (non-smooth)"));
    }
    let offset = body.boundary_offset(boundary_point)?;
    if offset > BOUNDARY_TOL {
        return Err(Error::NotOnBoundary { offset });
    }
    let normal = body.outward_normal(boundary_point)?;
    let kind = match body {
        ConvexBody::Ball(b) => CurvatureKind::Sphere {
            inv_radius: 1.0 / b.radius,
        },
        ConvexBody::Ellipsoid(e) => CurvatureKind::Ellipsoid {
            inv_sq_axes: e.semi_axes.map(|a| 1.0 / (a * a)),
            grad_norm: e.half_gradient(boundary_point).norm(),
        },
        ConvexBody::HalfSpaces(_) => unreachable!(),
    };
    Ok(CurvatureOperator { normal, kind })
}

impl CurvatureOperator {
    pub fn dim(&self) -> usize {
        self.normal.len()
    }

    /// Outward unit normal; `H` is its orthogonal complement.
    pub fn normal(&self) -> &Vector {
        &self.normal
    }

    /// Orthogonal projection onto `H`.
    pub fn tangent_part(&self, w: &Vector) -> Vector {
        w - &self.normal * self.normal.dot(w)
    }

    /// `κ` applied to the tangential part of `w`.
    pub fn apply(&self, w: &Vector) -> Result<Vector> {
        check_dim(self.dim(), w.len())?;
        let t = self.tangent_part(w);
        Ok(match &self.kind {
            CurvatureKind::Sphere { inv_radius } => t * *inv_radius,
            CurvatureKind::Ellipsoid { inv_sq_axes, grad_norm } => {
                let scaled = t.component_mul(inv_sq_axes);
                self.tangent_part(&scaled) / *grad_norm
            }
        })
    }

    /// `(1 + d·κ)⁻¹` applied to the tangential part of `w`; lies in `H`.
    ///
    /// For the ellipsoid, with `μ = d/‖D⁻²(y−c)‖` and `E = (1 + μD⁻²)⁻¹`
    /// (diagonal), the solution is `E t − (⟨n,Et⟩/⟨n,En⟩) E n`.
    pub fn resolvent(&self, d: f64, w: &Vector) -> Result<Vector> {
        check_dim(self.dim(), w.len())?;
        if !(d >= 0.0 && d.is_finite()) {
            return Err(invalid("d", "must be finite and nonnegative"));
        }
        let t = self.tangent_part(w);
        Ok(match &self.kind {
            CurvatureKind::Sphere { inv_radius } => t / (1.0 + d * inv_radius),
            CurvatureKind::Ellipsoid { inv_sq_axes, grad_norm } => {
                let mu = d / grad_norm;
                let e = inv_sq_axes.map(|s| 1.0 / (1.0 + mu * s));
                let et = t.component_mul(&e);
                let en = self.normal.component_mul(&e);
                let alpha = self.normal.dot(&et) / self.normal.dot(&en);
                et - en * alpha
            }
        })
    }

    /// Principal curvatures (eigenvalues of `κ` on `H`), ascending.
    pub fn principal_curvatures(&self) -> Vec<f64> {
        let n = self.dim();
        if n < 2 {
            return Vec::new();
        }
        let mut eigs = match &self.kind {
            CurvatureKind::Sphere { inv_radius } => vec![*inv_radius; n - 1],
            CurvatureKind::Ellipsoid { .. } => {
                let basis = tangent_basis(&self.normal);
                let images: Vec<Vector> = basis
                    .iter()
                    .map(|b| self.apply(b).expect("dimension checked"))
                    .collect();
                let m = DMatrix::from_fn(n - 1, n - 1, |i, j| {
                    0.5 * (basis[i].dot(&images[j]) + basis[j].dot(&images[i]))
                });
                SymmetricEigen::new(m).eigenvalues.as_slice().to_vec()
            }
        };
        eigs.sort_by(f64::total_cmp);
        eigs
    }
}

/// Orthonormal basis of `normal^⊥` (normal must be a unit vector), built from
/// the Householder reflection that maps `normal` to ±e₁.
pub fn tangent_basis(normal: &Vector) -> Vec<Vector> {
    let n = normal.len();
    let sign = if normal[0] >= 0.0 { 1.0 } else { -1.0 };
    let mut v = normal.clone();
    v[0] += sign;
    let vv = v.norm_squared();
    (1..n)
        .map(|j| {
            // column j of I − 2vvᵀ/⟨v,v⟩
            let mut col = &v * (-2.0 * v[j] / vv);
            col[j] += 1.0;
            col
        })
        .collect()
}
