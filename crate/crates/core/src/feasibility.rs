//! Feasibility-seeking iterations and their superiorized versions.
//!
//! The basic iteration is `x_{n+1} = A_{n+1}(x_n)` and the superiorized one is
//! `x'_{n+1} = A_{n+1}(x'_n + β_n v_n)`, with one perturbation per operator
//! application. `A_t` is a relaxed projection onto one constraint (cyclic
//! mode, constraint `(t − 1) mod I`, so `A_1` uses the first constraint) or a
//! weighted average of projections onto all of them (simultaneous mode).

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{ConvexBody, Vector};

/// Directions may exceed unit norm by at most this much.
pub const DIRECTION_NORM_TOL: f64 = 1e-12;

/// Below this gradient norm [`nonascent_direction`] returns zero.
pub const GRADIENT_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cyclic,
    Simultaneous,
}

/// The operators `(A_t)` of a projection method.
#[derive(Debug, Clone)]
pub struct OperatorSequence {
    mode: Mode,
    constraints: Vec<ConvexBody>,
    weights: Vec<f64>,
    relaxation: f64,
}

impl OperatorSequence {
    /// Sequential (Kaczmarz-type) projections in the given order.
    pub fn cyclic(constraints: Vec<ConvexBody>) -> Result<Self> {
        common_dim(&constraints)?;
        Ok(Self {
            mode: Mode::Cyclic,
            constraints,
            weights: Vec::new(),
            relaxation: 1.0,
        })
    }

    /// Simultaneous (Cimmino-type) projections with convex weights.
    pub fn simultaneous(constraints: Vec<ConvexBody>, weights: Vec<f64>) -> Result<Self> {
        common_dim(&constraints)?;
        if weights.len() != constraints.len() {
            return Err(invalid("weights", "need one weight per constraint"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("weights", "must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("must sum to 1, got {total}")));
        }
        Ok(Self {
            mode: Mode::Simultaneous,
            constraints,
            weights,
            relaxation: 1.0,
        })
    }

    /// Simultaneous projections with equal weights.
    pub fn simultaneous_uniform(constraints: Vec<ConvexBody>) -> Result<Self> {
        let w = 1.0 / constraints.len().max(1) as f64;
        let n = constraints.len();
        Self::simultaneous(constraints, vec![w; n])
    }

    /// Relaxation `λ ∈ (0, 2]`: `A(x) = x + λ(P(x) − x)`.
    pub fn with_relaxation(mut self, relaxation: f64) -> Result<Self> {
        if !(relaxation > 0.0 && relaxation <= 2.0) {
            return Err(invalid("relaxation", format!("must lie in (0, 2], got {relaxation}")));
        }
        self.relaxation = relaxation;
        Ok(self)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn constraints(&self) -> &[ConvexBody] {
        &self.constraints
    }

    pub fn weights(&self) -> Option<&[f64]> {
        match self.mode {
            Mode::Cyclic => None,
            Mode::Simultaneous => Some(&self.weights),
        }
    }

    pub fn relaxation(&self) -> f64 {
        self.relaxation
    }

    pub fn dim(&self) -> usize {
        self.constraints[0].dim()
    }

    /// Number of constraints `I`.
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Operator applications per sweep: `I` when cyclic, 1 when simultaneous.
    pub fn period(&self) -> usize {
        match self.mode {
            Mode::Cyclic => self.constraints.len(),
            Mode::Simultaneous => 1,
        }
    }

    /// Index of the constraint used by `A_t` in cyclic mode.
    pub fn constraint_index(&self, t: usize) -> usize {
        let i = self.constraints.len();
        (t % i + i - 1) % i
    }

    /// `A_t(x)`.
    pub fn apply(&self, t: usize, x: &Vector) -> Result<Vector> {
        check_dim(self.dim(), x.len())?;
        Ok(self.apply_unchecked(t, x))
    }

    pub(crate) fn apply_unchecked(&self, t: usize, x: &Vector) -> Vector {
        let target = match self.mode {
            Mode::Cyclic => self.constraints[self.constraint_index(t)].project_unchecked(x),
            Mode::Simultaneous => {
                let mut acc = Vector::zeros(x.len());
                for (c, w) in self.constraints.iter().zip(&self.weights) {
                    if *w != 0.0 {
                        acc.axpy(*w, &c.project_unchecked(x), 1.0);
                    }
                }
                acc
            }
        };
        if self.relaxation == 1.0 {
            target
        } else {
            x + (target - x) * self.relaxation
        }
    }

    /// `max_i distance(x, C_i)`.
    pub fn residual(&self, x: &Vector) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.residual_unchecked(x))
    }

    pub(crate) fn residual_unchecked(&self, x: &Vector) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.distance_unchecked(x))
            .fold(0.0, f64::max)
    }
}

fn common_dim(constraints: &[ConvexBody]) -> Result<usize> {
    let first = constraints
        .first()
        .ok_or_else(|| invalid("constraints", "need at least one constraint"))?;
    let dim = first.dim();
    for c in constraints {
        check_dim(dim, c.dim())?;
    }
    Ok(dim)
}

/// `A_t(x)` for the sequence `seq`.
pub fn apply_operator(seq: &OperatorSequence, t: usize, x: &Vector) -> Result<Vector> {
    seq.apply(t, x)
}

/// Geometric step sizes `β_n = beta0 · decayⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct PerturbationSchedule {
    beta0: f64,
    decay: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    beta0: f64,
    decay: f64,
}

impl TryFrom<RawSchedule> for PerturbationSchedule {
    type Error = Error;
    fn try_from(r: RawSchedule) -> Result<Self> {
        Self::new(r.beta0, r.decay)
    }
}

impl From<PerturbationSchedule> for RawSchedule {
    fn from(s: PerturbationSchedule) -> Self {
        Self {
            beta0: s.beta0,
            decay: s.decay,
        }
    }
}

impl Default for PerturbationSchedule {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            decay: 0.995,
        }
    }
}

impl PerturbationSchedule {
    /// `beta0 = 0` is allowed and switches perturbations off.
    pub fn new(beta0: f64, decay: f64) -> Result<Self> {
        if !(beta0.is_finite() && beta0 >= 0.0) {
            return Err(invalid("beta0", format!("must be finite and >= 0, got {beta0}")));
        }
        if !(decay > 0.0 && decay < 1.0) {
            return Err(invalid("decay", format!("must lie in (0, 1), got {decay}")));
        }
        Ok(Self { beta0, decay })
    }

    pub fn none() -> Self {
        Self { beta0: 0.0, decay: 0.5 }
    }

    pub fn beta0(&self) -> f64 {
        self.beta0
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn beta(&self, n: usize) -> f64 {
        if self.beta0 == 0.0 {
            0.0
        } else {
            self.beta0 * self.decay.powf(n as f64)
        }
    }

    /// `Σ_{s≥n} β_s`.
    pub fn tail(&self, n: usize) -> f64 {
        self.beta(n) / (1.0 - self.decay)
    }

    /// `Σ_{s≥0} β_s = beta0 / (1 − decay)`.
    pub fn total(&self) -> f64 {
        self.beta0 / (1.0 - self.decay)
    }

    /// `Σ_{s=k}^{n} β_s`.
    pub fn partial_sum(&self, k: usize, n: usize) -> f64 {
        if n < k {
            return 0.0;
        }
        self.tail(k) - self.tail(n + 1)
    }
}

/// Finite proxy for the asymptotic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StoppingRule {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for StoppingRule {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 100_000,
        }
    }
}

impl StoppingRule {
    pub fn new(tol: f64, max_sweeps: usize) -> Result<Self> {
        let rule = Self { tol, max_sweeps };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(invalid("tol", format!("must be finite and > 0, got {}", self.tol)));
        }
        if self.max_sweeps == 0 {
            return Err(invalid("max_sweeps", "must be at least 1"));
        }
        Ok(())
    }
}

/// The function `φ` to be reduced.
pub trait TargetFunction: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
}

/// `φ(x) = ⟨c, x⟩ + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub c: Vector,
    pub a: f64,
}

impl TargetFunction for Linear {
    fn value(&self, x: &Vector) -> f64 {
        self.c.dot(x) + self.a
    }

    fn gradient(&self, _x: &Vector) -> Vector {
        self.c.clone()
    }
}

/// `φ(x) = ‖x‖²`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SquaredNorm;

impl TargetFunction for SquaredNorm {
    fn value(&self, x: &Vector) -> f64 {
        x.norm_squared()
    }

    fn gradient(&self, x: &Vector) -> Vector {
        x * 2.0
    }
}

/// `−∇φ(x)/‖∇φ(x)‖`, or zero where the gradient vanishes.
pub fn nonascent_direction(phi: &dyn TargetFunction, x: &Vector) -> Vector {
    let g = phi.gradient(x);
    let len = g.norm();
    if len < GRADIENT_FLOOR {
        Vector::zeros(x.len())
    } else {
        g / -len
    }
}

/// Chooses the perturbation direction `v_n` at the point `x'_n`.
pub trait DirectionRule: Sync {
    fn direction(&self, n: usize, x: &Vector) -> Vector;

    /// Target function recorded in run histories, if any.
    fn target(&self) -> Option<&dyn TargetFunction> {
        None
    }
}

/// Normalized steepest descent for `φ`.
#[derive(Debug, Clone)]
pub struct Nonascent<F>(pub F);

impl<F: TargetFunction> DirectionRule for Nonascent<F> {
    fn direction(&self, _n: usize, x: &Vector) -> Vector {
        nonascent_direction(&self.0, x)
    }

    fn target(&self) -> Option<&dyn TargetFunction> {
        Some(&self.0)
    }
}

/// The same direction at every step.
#[derive(Debug, Clone)]
pub struct FixedDirection(pub Vector);

impl DirectionRule for FixedDirection {
    fn direction(&self, _n: usize, _x: &Vector) -> Vector {
        self.0.clone()
    }
}

/// `v_n = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDirection;

impl DirectionRule for ZeroDirection {
    fn direction(&self, _n: usize, x: &Vector) -> Vector {
        Vector::zeros(x.len())
    }
}

/// `v_n` checked against `‖v_n‖ ≤ 1`.
pub(crate) fn checked_direction(rule: &dyn DirectionRule, n: usize, x: &Vector) -> Result<Vector> {
    let v = rule.direction(n, x);
    check_dim(x.len(), v.len())?;
    let norm = v.norm();
    if norm.is_nan() || norm > 1.0 + DIRECTION_NORM_TOL {
        return Err(Error::UnboundedDirection { norm });
    }
    Ok(v)
}

/// `x + β v`; returns `x` untouched when `β = 0`.
pub(crate) fn perturb(x: &Vector, beta: f64, v: &Vector) -> Vector {
    if beta == 0.0 {
        x.clone()
    } else {
        x + v * beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub final_point: Vector,
    /// Operator applications performed.
    pub iterations: usize,
    pub converged: bool,
    /// Iteration index of each history entry (start and end of every sweep).
    pub checkpoints: Vec<usize>,
    pub residual_history: Vec<f64>,
    pub phi_history: Option<Vec<f64>>,
}

impl RunResult {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().expect("history is never empty")
    }

    /// `iteration,residual,phi` rows; `phi` is empty when not tracked.
    pub fn write_trajectory_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "residual", "phi"])?;
        for (j, (it, r)) in self.checkpoints.iter().zip(&self.residual_history).enumerate() {
            let phi = self
                .phi_history
                .as_ref()
                .map(|p| format!("{:e}", p[j]))
                .unwrap_or_default();
            w.write_record([it.to_string(), format!("{r:e}"), phi])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Perturbation<'a> {
    schedule: &'a PerturbationSchedule,
    rule: &'a dyn DirectionRule,
}

fn drive(
    seq: &OperatorSequence,
    x0: &Vector,
    perturbation: Option<Perturbation<'_>>,
    stop: &StoppingRule,
    phi: Option<&dyn TargetFunction>,
) -> Result<RunResult> {
    stop.validate()?;
    check_dim(seq.dim(), x0.len())?;
    let mut x = x0.clone();
    let mut n = 0usize;
    let mut checkpoints = vec![0];
    let mut residuals = vec![seq.residual_unchecked(&x)];
    let mut phis = phi.map(|f| vec![f.value(&x)]);
    let tail_ok = |n: usize| match &perturbation {
        Some(p) => p.schedule.tail(n) <= stop.tol,
        None => true,
    };
    let mut converged = residuals[0] < stop.tol && tail_ok(0);
    let mut sweeps = 0;
    while !converged && sweeps < stop.max_sweeps {
        for _ in 0..seq.period() {
            if let Some(p) = &perturbation {
                let beta = p.schedule.beta(n);
                if beta != 0.0 {
                    let v = checked_direction(p.rule, n, &x)?;
                    x = perturb(&x, beta, &v);
                }
            }
            n += 1;
            x = seq.apply_unchecked(n, &x);
        }
        sweeps += 1;
        let r = seq.residual_unchecked(&x);
        checkpoints.push(n);
        residuals.push(r);
        if let (Some(h), Some(f)) = (phis.as_mut(), phi) {
            h.push(f.value(&x));
        }
        converged = r < stop.tol && tail_ok(n);
    }
    Ok(RunResult {
        final_point: x,
        iterations: n,
        converged,
        checkpoints,
        residual_history: residuals,
        phi_history: phis,
    })
}

/// Iterates `x_{n+1} = A_{n+1}(x_n)` until the residual drops below `stop.tol`
/// (checked at the start and after every sweep) or `stop.max_sweeps` sweeps.
/// Running out of sweeps is reported through [`RunResult::converged`].
pub fn run_basic(seq: &OperatorSequence, x0: &Vector, stop: &StoppingRule) -> Result<RunResult> {
    drive(seq, x0, None, stop, None)
}

/// [`run_basic`] that also records `φ` at every checkpoint.
pub fn run_basic_tracking(
    seq: &OperatorSequence,
    x0: &Vector,
    stop: &StoppingRule,
    phi: &dyn TargetFunction,
) -> Result<RunResult> {
    drive(seq, x0, None, stop, Some(phi))
}

/// Iterates `x'_{n+1} = A_{n+1}(x'_n + β_n v_n)`.
///
/// Stops once the residual is below `stop.tol` and the remaining perturbation
/// budget `Σ_{s≥n} β_s` is too, so the iterate cannot be pushed further than
/// `tol` by later steps. `φ` is recorded when the direction rule carries one.
pub fn run_superiorized(
    seq: &OperatorSequence,
    x0: &Vector,
    schedule: &PerturbationSchedule,
    direction: &dyn DirectionRule,
    stop: &StoppingRule,
) -> Result<RunResult> {
    drive(
        seq,
        x0,
        Some(Perturbation {
            schedule,
            rule: direction,
        }),
        stop,
        direction.target(),
    )
}

/// The first `n_max + 1` basic iterates `x_0, …, x_{n_max}`.
pub fn basic_trajectory(seq: &OperatorSequence, x0: &Vector, n_max: usize) -> Result<Vec<Vector>> {
    check_dim(seq.dim(), x0.len())?;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(x0.clone());
    for n in 1..=n_max {
        let next = seq.apply_unchecked(n, &out[n - 1]);
        out.push(next);
    }
    Ok(out)
}

/// The first `n_max + 1` superiorized iterates `x'_0, …, x'_{n_max}`.
pub fn superiorized_trajectory(
    seq: &OperatorSequence,
    x0: &Vector,
    schedule: &PerturbationSchedule,
    direction: &dyn DirectionRule,
    n_max: usize,
) -> Result<Vec<Vector>> {
    check_dim(seq.dim(), x0.len())?;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(x0.clone());
    for n in 0..n_max {
        let x = &out[n];
        let beta = schedule.beta(n);
        let moved = if beta == 0.0 {
            x.clone()
        } else {
            perturb(x, beta, &checked_direction(direction, n, x)?)
        };
        out.push(seq.apply_unchecked(n + 1, &moved));
    }
    Ok(out)
}
