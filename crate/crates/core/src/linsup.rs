//! Random linear superiorization experiments.
//!
//! A problem is a consistent system of `I` half-spaces in `E^N` with a linear
//! target `φ(x) = ⟨c, x⟩ + a`. The basic and superiorized iterations start
//! from the same point and their limits are compared: the interesting event
//! is `φ(x'_∞) ≤ φ(x_∞)`, which is expected with high probability but not
//! guaranteed.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Error, Result};
use crate::feasibility::{
    run_basic, run_superiorized, Linear, Nonascent, OperatorSequence, PerturbationSchedule, StoppingRule,
    TargetFunction,
};
use crate::geometry::{ConvexBody, HalfSpace, Vector};
use crate::randgen::{par_trials, unit_unchecked, Experiment};
use crate::stats::{linear_fit, CompensatedSum, Summary};
use crate::supermatrix::{trace_columns, DriftRow};

#[derive(Debug, Clone, PartialEq)]
pub struct LinSupProblem {
    halfspaces: Vec<HalfSpace>,
    target: Linear,
    witness: Vector,
}

impl LinSupProblem {
    pub fn new(halfspaces: Vec<HalfSpace>, target: Linear, witness: Vector) -> Result<Self> {
        let n = witness.len();
        if halfspaces.is_empty() {
            return Err(invalid("halfspaces", "need at least one"));
        }
        for h in &halfspaces {
            check_dim(n, h.dim())?;
        }
        check_dim(n, target.c.len())?;
        if target.c.norm() == 0.0 {
            return Err(invalid("target_c", "must be nonzero"));
        }
        if let Some(h) = halfspaces.iter().find(|h| !h.contains(&witness)) {
            return Err(invalid(
                "witness",
                format!("violates a constraint by {:e}", h.violation(&witness)),
            ));
        }
        Ok(Self {
            halfspaces,
            target,
            witness,
        })
    }

    pub fn dim(&self) -> usize {
        self.witness.len()
    }

    pub fn halfspaces(&self) -> &[HalfSpace] {
        &self.halfspaces
    }

    pub fn target(&self) -> &Linear {
        &self.target
    }

    pub fn witness(&self) -> &Vector {
        &self.witness
    }

    /// Smallest `offset − ⟨normal, witness⟩` over the constraints.
    pub fn min_slack(&self) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| -h.violation(&self.witness))
            .fold(f64::INFINITY, f64::min)
    }

    /// Cyclic projections onto the half-spaces, relaxation 1.
    pub fn operators(&self) -> OperatorSequence {
        OperatorSequence::cyclic(self.halfspaces.iter().cloned().map(ConvexBody::from).collect())
            .expect("nonempty and dimensions checked")
    }

    /// The same problem with `a` replaced.
    pub fn with_offset(&self, a: f64) -> Self {
        let mut p = self.clone();
        p.target.a = a;
        p
    }
}

/// Shape parameters for [`gen_problem_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    /// Minimum slack of the witness in every constraint.
    pub margin: f64,
    /// Radius of the ball the witness is drawn from.
    pub witness_radius: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            margin: 0.1,
            witness_radius: 1.0,
        }
    }
}

/// Random consistent problem: witness uniform in the unit ball, normals and
/// `c` uniform on the sphere, offsets `⟨u, witness⟩ + slack` with slack
/// uniform in `[margin, 2·margin)`.
pub fn gen_problem<R: Rng + ?Sized>(n: usize, i: usize, margin: f64, rng: &mut R) -> Result<LinSupProblem> {
    gen_problem_with(
        n,
        i,
        GenParams {
            margin,
            ..GenParams::default()
        },
        rng,
    )
}

pub fn gen_problem_with<R: Rng + ?Sized>(n: usize, i: usize, params: GenParams, rng: &mut R) -> Result<LinSupProblem> {
    if n < 2 {
        return Err(invalid("N", "need N >= 2"));
    }
    if i == 0 {
        return Err(invalid("I", "need at least one constraint"));
    }
    if !(params.margin.is_finite() && params.margin > 0.0) {
        return Err(invalid("margin", "must be finite and > 0"));
    }
    if !(params.witness_radius.is_finite() && params.witness_radius >= 0.0) {
        return Err(invalid("witness_radius", "must be finite and >= 0"));
    }
    let radius = params.witness_radius * rng.random::<f64>().powf(1.0 / n as f64);
    let witness = unit_unchecked(n, rng) * radius;
    let halfspaces = (0..i)
        .map(|_| {
            let u = unit_unchecked(n, rng);
            let slack = params.margin * (1.0 + rng.random::<f64>());
            let offset = u.dot(&witness) + slack;
            HalfSpace::new(u, offset)
        })
        .collect::<Result<Vec<_>>>()?;
    let c = unit_unchecked(n, rng);
    LinSupProblem::new(halfspaces, Linear { c, a: 0.0 }, witness)
}

/// Limits of the basic and superiorized runs from a shared start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedOutcome {
    pub phi_basic: f64,
    pub phi_sup: f64,
    /// `phi_basic − phi_sup`; positive when superiorization helped.
    pub gap: f64,
    pub residual_basic: f64,
    pub residual_sup: f64,
    pub iterations_basic: usize,
    pub iterations_sup: usize,
    /// Both runs converged.
    pub valid: bool,
}

impl PairedOutcome {
    /// `1e-9·(1 + |phi_basic|)`.
    pub fn tol_phi(&self) -> f64 {
        1e-9 * (1.0 + self.phi_basic.abs())
    }

    /// `φ(x'_∞) ≤ φ(x_∞) + tol_phi`.
    pub fn success(&self) -> bool {
        self.gap >= -self.tol_phi()
    }
}

/// Runs both iterations from `x0` (the origin when `None`) with direction
/// `−c/‖c‖`.
pub fn run_pair(
    p: &LinSupProblem,
    schedule: &PerturbationSchedule,
    stop: &StoppingRule,
    x0: Option<&Vector>,
) -> Result<PairedOutcome> {
    let origin = Vector::zeros(p.dim());
    let x0 = x0.unwrap_or(&origin);
    let seq = p.operators();
    let basic = run_basic(&seq, x0, stop)?;
    let sup = run_superiorized(&seq, x0, schedule, &Nonascent(p.target.clone()), stop)?;
    let phi_basic = p.target.value(&basic.final_point);
    let phi_sup = p.target.value(&sup.final_point);
    Ok(PairedOutcome {
        phi_basic,
        phi_sup,
        gap: phi_basic - phi_sup,
        residual_basic: basic.final_residual(),
        residual_sup: sup.final_residual(),
        iterations_basic: basic.iterations,
        iterations_sup: sup.iterations,
        valid: basic.converged && sup.converged,
    })
}

/// Parameters of a batch of paired runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinSupConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "I")]
    pub i: usize,
    pub trials: usize,
    pub seed: u64,
    pub margin: f64,
    pub beta0: f64,
    pub decay: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LinSupConfig {
    fn default() -> Self {
        let schedule = PerturbationSchedule::default();
        let stop = StoppingRule::default();
        Self {
            n: 200,
            i: 100,
            trials: 100,
            seed: 0,
            margin: 0.1,
            beta0: schedule.beta0(),
            decay: schedule.decay(),
            tol: stop.tol,
            max_sweeps: stop.max_sweeps,
        }
    }
}

impl LinSupConfig {
    pub fn schedule(&self) -> Result<PerturbationSchedule> {
        PerturbationSchedule::new(self.beta0, self.decay)
    }

    pub fn stopping_rule(&self) -> Result<StoppingRule> {
        StoppingRule::new(self.tol, self.max_sweeps)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("N", "need N >= 2"));
        }
        if self.i == 0 {
            return Err(invalid("I", "need at least one constraint"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(invalid("margin", "must be finite and > 0"));
        }
        self.schedule()?;
        self.stopping_rule()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub trials: usize,
    pub valid: usize,
    /// Fraction of valid trials with `φ(x'_∞) ≤ φ(x_∞) + tol_phi`.
    pub success_rate: f64,
    pub mean_gap: f64,
    pub max_residual: f64,
    pub outcomes: Vec<PairedOutcome>,
}

/// One problem and one paired run per trial; trial `t` uses stream `t` of
/// the experiment `"linsup"` under `config.seed`.
pub fn batch_experiment(config: &LinSupConfig) -> Result<BatchSummary> {
    config.validate()?;
    let schedule = config.schedule()?;
    let stop = config.stopping_rule()?;
    let exp = Experiment::new(config.seed, "linsup");
    let outcomes = par_trials(&exp, config.trials, |rng, _| {
        let p = gen_problem(config.n, config.i, config.margin, rng)?;
        run_pair(&p, &schedule, &stop, None)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let valid: Vec<&PairedOutcome> = outcomes.iter().filter(|o| o.valid).collect();
    if valid.is_empty() {
        return Err(Error::NoValidTrials { total: config.trials });
    }
    let successes = valid.iter().filter(|o| o.success()).count();
    let mean_gap = valid.iter().map(|o| o.gap).collect::<CompensatedSum>().total() / valid.len() as f64;
    let max_residual = valid
        .iter()
        .map(|o| o.residual_basic.max(o.residual_sup))
        .fold(0.0, f64::max);
    Ok(BatchSummary {
        trials: config.trials,
        valid: valid.len(),
        success_rate: successes as f64 / valid.len() as f64,
        mean_gap,
        max_residual,
        outcomes,
    })
}

/// `trial,phi_basic,phi_sup,gap,residual_basic,residual_sup,iters_basic,iters_sup,valid`.
pub fn write_outcomes_csv<W: Write>(outcomes: &[PairedOutcome], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "trial",
        "phi_basic",
        "phi_sup",
        "gap",
        "residual_basic",
        "residual_sup",
        "iters_basic",
        "iters_sup",
        "valid",
    ])?;
    for (t, o) in outcomes.iter().enumerate() {
        w.write_record([
            t.to_string(),
            format!("{:e}", o.phi_basic),
            format!("{:e}", o.phi_sup),
            format!("{:e}", o.gap),
            format!("{:e}", o.residual_basic),
            format!("{:e}", o.residual_sup),
            o.iterations_basic.to_string(),
            o.iterations_sup.to_string(),
            o.valid.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters of the increment-drift experiment: how far `Δ_{i+k,i}` turns
/// away from `v_i` as `k` grows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "I")]
    pub i: usize,
    pub trials: usize,
    pub seed: u64,
    pub margin: f64,
    pub witness_radius: f64,
    pub beta0: f64,
    pub decay: f64,
    /// Column `i` whose increments are followed.
    pub column: usize,
    /// Step counts `k = n − i` at which the angle is measured.
    pub steps: Vec<usize>,
}

impl Default for DriftConfig {
    fn default() -> Self {
        let schedule = PerturbationSchedule::default();
        Self {
            n: 500,
            i: 250,
            trials: 100,
            seed: 0,
            margin: 0.1,
            witness_radius: 1.0,
            beta0: schedule.beta0(),
            decay: schedule.decay(),
            column: 500,
            steps: vec![4, 16, 64],
        }
    }
}

impl DriftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(invalid("N", "need N >= 2"));
        }
        if self.i == 0 {
            return Err(invalid("I", "need at least one constraint"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.steps.is_empty() {
            return Err(invalid("steps", "need at least one step count"));
        }
        if self.steps.contains(&0) {
            return Err(invalid("steps", "step counts must be positive"));
        }
        PerturbationSchedule::new(self.beta0, self.decay)?;
        if self.beta0 == 0.0 {
            return Err(invalid("beta0", "drift needs nonzero perturbations"));
        }
        if !(self.margin.is_finite() && self.margin > 0.0) {
            return Err(invalid("margin", "must be finite and > 0"));
        }
        if !(self.witness_radius.is_finite() && self.witness_radius >= 0.0) {
            return Err(invalid("witness_radius", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// RMS angle at one step count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftPoint {
    pub k: usize,
    pub rms_angle: f64,
    pub mean_delta_norm: f64,
    /// Trials contributing (the increment was nonzero).
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftSummary {
    pub points: Vec<DriftPoint>,
    /// Log-log slope of RMS angle against `k`; `None` with fewer than two
    /// usable points.
    pub slope: Option<f64>,
    pub rows: Vec<DriftRow>,
}

/// Follows columns `i` and `i + 1` of the superiorization matrix of a fresh
/// problem per trial and records the angle between `Δ_{i+k,i}` and `v_i`.
pub fn drift_experiment(config: &DriftConfig) -> Result<DriftSummary> {
    config.validate()?;
    let schedule = PerturbationSchedule::new(config.beta0, config.decay)?;
    let params = GenParams {
        margin: config.margin,
        witness_radius: config.witness_radius,
    };
    let i = config.column;
    let k_max = *config.steps.iter().max().expect("validated nonempty");
    let exp = Experiment::new(config.seed, "drift");
    let per_trial = par_trials(&exp, config.trials, |rng, _| -> Result<Vec<Option<DriftRow>>> {
        let p = gen_problem_with(config.n, config.i, params, rng)?;
        let seq = p.operators();
        let x0 = Vector::zeros(p.dim());
        let trace = trace_columns(
            &seq,
            &x0,
            &schedule,
            &Nonascent(p.target().clone()),
            i + k_max,
            &[i, i + 1],
        )?;
        config
            .steps
            .iter()
            .map(|&k| {
                let n = i + k;
                match trace.angle_drift(i, n) {
                    Ok(angle) => Ok(Some(DriftRow {
                        i,
                        n,
                        angle,
                        delta_norm: trace.increment(n, i)?.delta.norm(),
                    })),
                    Err(Error::ZeroIncrement) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut points = Vec::with_capacity(config.steps.len());
    for (j, &k) in config.steps.iter().enumerate() {
        let rows: Vec<&DriftRow> = per_trial.iter().filter_map(|t| t[j].as_ref()).collect();
        if rows.is_empty() {
            points.push(DriftPoint {
                k,
                rms_angle: f64::NAN,
                mean_delta_norm: f64::NAN,
                trials: 0,
            });
            continue;
        }
        let sq: CompensatedSum = rows.iter().map(|r| r.angle * r.angle).collect();
        let norms: Vec<f64> = rows.iter().map(|r| r.delta_norm).collect();
        points.push(DriftPoint {
            k,
            rms_angle: (sq.total() / rows.len() as f64).sqrt(),
            mean_delta_norm: Summary::of(&norms).expect("nonempty").mean,
            trials: rows.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.rms_angle > 0.0 && p.rms_angle.is_finite())
        .map(|p| ((p.k as f64).ln(), p.rms_angle.ln()))
        .unzip();
    let slope = linear_fit(&xs, &ys).map(|(m, _)| m);
    let rows = per_trial.into_iter().flatten().flatten().collect();
    Ok(DriftSummary { points, slope, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randgen::RngStream;
    use nalgebra::dvector;

    #[test]
    fn witness_has_margin() {
        let mut rng = RngStream::new(1, 0).rng();
        for _ in 0..50 {
            let p = gen_problem(20, 15, 0.1, &mut rng).unwrap();
            assert!(p.min_slack() >= 0.1 - 1e-15);
            assert!(p.witness().norm() <= 1.0);
            assert!((p.target().c.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_constraint_problem() {
        let mut rng = RngStream::new(2, 0).rng();
        let p = gen_problem(5, 1, 0.3, &mut rng).unwrap();
        assert_eq!(p.halfspaces().len(), 1);
        assert!(p.halfspaces()[0].contains(p.witness()));
    }

    #[test]
    fn generation_is_deterministic() {
        let a = gen_problem(30, 10, 0.1, &mut RngStream::new(3, 7).rng()).unwrap();
        let b = gen_problem(30, 10, 0.1, &mut RngStream::new(3, 7).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_parameters() {
        let mut rng = RngStream::new(4, 0).rng();
        assert!(gen_problem(1, 3, 0.1, &mut rng).is_err());
        assert!(gen_problem(3, 0, 0.1, &mut rng).is_err());
        assert!(gen_problem(3, 3, 0.0, &mut rng).is_err());
        let h = HalfSpace::new(dvector![1.0, 0.0], 0.0).unwrap();
        let t = Linear {
            c: dvector![1.0, 0.0],
            a: 0.0,
        };
        assert!(LinSupProblem::new(vec![h.clone()], t.clone(), dvector![1.0, 0.0]).is_err());
        let zero = Linear {
            c: dvector![0.0, 0.0],
            a: 0.0,
        };
        assert!(LinSupProblem::new(vec![h], zero, dvector![-1.0, 0.0]).is_err());
    }

    #[test]
    fn zero_schedule_gives_zero_gap() {
        let mut rng = RngStream::new(5, 0).rng();
        let p = gen_problem(30, 20, 0.1, &mut rng).unwrap();
        let o = run_pair(&p, &PerturbationSchedule::none(), &StoppingRule::default(), None).unwrap();
        assert_eq!(o.gap, 0.0);
        assert!(o.valid && o.success());
    }

    #[test]
    fn feasible_start_still_moves() {
        let mut rng = RngStream::new(6, 0).rng();
        let p = gen_problem(10, 4, 0.1, &mut rng).unwrap();
        let x0 = p.witness().clone();
        let o = run_pair(
            &p,
            &PerturbationSchedule::default(),
            &StoppingRule::default(),
            Some(&x0),
        )
        .unwrap();
        assert_eq!(o.iterations_basic, 0);
        assert_eq!(o.phi_basic, p.target().value(&x0));
        assert!(o.gap > 0.0);
    }

    #[test]
    fn gap_ignores_offset() {
        let mut rng = RngStream::new(7, 0).rng();
        let p = gen_problem(20, 10, 0.1, &mut rng).unwrap();
        let sched = PerturbationSchedule::default();
        let stop = StoppingRule::default();
        let a = run_pair(&p, &sched, &stop, None).unwrap();
        let b = run_pair(&p.with_offset(123.0), &sched, &stop, None).unwrap();
        assert!((a.gap - b.gap).abs() < 1e-9 * (1.0 + a.gap.abs()));
    }

    #[test]
    fn small_batch() {
        let cfg = LinSupConfig {
            n: 20,
            i: 10,
            trials: 8,
            ..LinSupConfig::default()
        };
        let s = batch_experiment(&cfg).unwrap();
        assert_eq!(s.outcomes.len(), 8);
        assert!(s.valid > 0);
        let trivial = batch_experiment(&LinSupConfig {
            beta0: 0.0,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(trivial.success_rate, 1.0);
        assert_eq!(trivial.mean_gap, 0.0);
        let mut buf = Vec::new();
        write_outcomes_csv(&s.outcomes, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 9);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok: LinSupConfig = serde_json::from_str(r#"{"N": 30, "I": 5}"#).unwrap();
        assert_eq!((ok.n, ok.i, ok.trials), (30, 5, 100));
        assert!(serde_json::from_str::<LinSupConfig>(r#"{"N": 30, "J": 5}"#).is_err());
    }

    #[test]
    fn small_drift_run() {
        let cfg = DriftConfig {
            n: 40,
            i: 20,
            trials: 6,
            column: 20,
            steps: vec![1, 4],
            ..DriftConfig::default()
        };
        let s = drift_experiment(&cfg).unwrap();
        assert_eq!(s.points.len(), 2);
        assert!(s.rows.iter().all(|r| (0.0..=std::f64::consts::PI).contains(&r.angle)));
    }
}
