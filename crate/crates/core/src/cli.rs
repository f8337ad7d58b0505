//! Reproducible experiment runner.
//!
//! Each suite is a batch of seeded experiments with pass/fail checks. A run
//! computes everything in memory, then writes its CSV files, a JSON mirror
//! (`summary.json`) and `manifest.json` into the output directory. Every
//! suite writes `checks.csv` (`check,passed,value,limit`) and, in addition:
//!
//! | suite | files and columns |
//! |---|---|
//! | `com-verify` | `reports.csv`: `conclusion_id,N,M,trials,predicted,mean,std,rel_err,seed` |
//! | `scaling` | `scaling.csv`: `series,N,trials,mean,std,deviation`; `scaling_fit.csv`: `series,slope,intercept` |
//! | `projder-check` | `derivative.csv`: `sample,body,N,dist,rel_err,radial_norm,max_factor,min_factor`; `mean_value.csv`: `segment,body,N,w_norm,residual`; `norm_ratio.csv`: `N,samples,violations,max_lower_gap,max_upper_gap`; `cascade.csv`: report columns |
//! | `supmatrix-trace` | `rows.csv`: `instance,n,telescoping_residual,max_step_excess`; `limits.csv`: `instance,column,depth,last_change,settled,beta,next_gap`; `entries.csv`: `n,k,norm,phi` (instance 0) |
//! | `linsup` | `outcomes.csv`: `trial,phi_basic,phi_sup,gap,residual_basic,residual_sup,iters_basic,iters_sup,valid`; `drift.csv`: `i,n,angle,delta_norm`; `drift_points.csv`: `k,rms_angle,mean_delta_norm,trials` |
//!
//! Floats are written in shortest round-trip exponent form (`1.5e-3`), so
//! reruns compare byte for byte.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::concentration::{
    mc_action_norm, mc_rotation_product, mc_sphere_displacement, mc_sum_norm, predict_rotation, write_reports_csv,
    PredictionReport, REPORT_HEADER,
};
use crate::error::{Error, Result};
use crate::feasibility::{basic_trajectory, superiorized_trajectory, Nonascent, PerturbationSchedule};
use crate::geometry::{Ball, ConvexBody, Ellipsoid, Vector};
use crate::linsup::{batch_experiment, drift_experiment, gen_problem, write_outcomes_csv, DriftConfig, LinSupConfig};
use crate::projder::{
    cascade_norm_prediction, cascade_rotation_prediction, finite_difference, mc_cascade, mean_value_check,
    norm_ratio_bounds, CascadeLink, CascadePath, CascadeStep, ProjectionDerivative,
};
use crate::randgen::{gaussian_vector, par_trials, uniform_sphere, Experiment, SingularSpectrum};
use crate::stats::{linear_fit, Summary};
use crate::supermatrix::{build, write_drift_csv, SETTLE_TOL};

/// Environment variable read when neither `--seed` nor the config file sets
/// a seed.
pub const SEED_ENV: &str = "SUPERCON_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    ComVerify,
    Linsup,
    ProjderCheck,
    SupmatrixTrace,
    Scaling,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::ComVerify => "com-verify",
            Suite::Linsup => "linsup",
            Suite::ProjderCheck => "projder-check",
            Suite::SupmatrixTrace => "supmatrix-trace",
            Suite::Scaling => "scaling",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn need_positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(config_err(format!("`{name}` must be at least 1")));
    }
    Ok(())
}

fn need_at_least(name: &str, v: usize, min: usize) -> Result<()> {
    if v < min {
        return Err(config_err(format!("`{name}` must be at least {min}, got {v}")));
    }
    Ok(())
}

fn need_finite_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(config_err(format!("`{name}` must be finite and > 0, got {v}")));
    }
    Ok(())
}

/// Concentration predictions against Monte Carlo means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComVerifyConfig {
    /// Lengths of the summed vectors.
    pub sum_lengths: Vec<f64>,
    pub sum_dim: usize,
    pub sum_trials: usize,
    pub sphere_step: f64,
    pub sphere_steps: usize,
    pub sphere_dim: usize,
    pub sphere_trials: usize,
    pub action_dim: usize,
    pub action_trials: usize,
    pub projector_dim: usize,
    pub projector_trials: usize,
    pub chain_dim: usize,
    pub chain_len: usize,
    pub chain_trials: usize,
}

impl Default for ComVerifyConfig {
    fn default() -> Self {
        Self {
            sum_lengths: vec![3.0, 4.0, 12.0],
            sum_dim: 1000,
            sum_trials: 10_000,
            sphere_step: 0.1,
            sphere_steps: 20,
            sphere_dim: 500,
            sphere_trials: 10_000,
            action_dim: 400,
            action_trials: 1000,
            projector_dim: 100,
            projector_trials: 1000,
            chain_dim: 400,
            chain_len: 5,
            chain_trials: 1000,
        }
    }
}

impl ComVerifyConfig {
    fn validate(&self) -> Result<()> {
        if self.sum_lengths.is_empty() || self.sum_lengths.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(config_err("`sum_lengths` must be nonempty, finite and nonnegative"));
        }
        if !(0.0..=2.0).contains(&self.sphere_step) {
            return Err(config_err("`sphere_step` must lie in [0, 2]"));
        }
        need_positive("sphere_steps", self.sphere_steps)?;
        need_at_least("sum_dim", self.sum_dim, 1)?;
        need_at_least("sphere_dim", self.sphere_dim, 3)?;
        need_at_least("action_dim", self.action_dim, 2)?;
        need_at_least("projector_dim", self.projector_dim, 2)?;
        need_at_least("chain_dim", self.chain_dim, 2)?;
        need_positive("chain_len", self.chain_len)?;
        for (name, t) in [
            ("sum_trials", self.sum_trials),
            ("sphere_trials", self.sphere_trials),
            ("action_trials", self.action_trials),
            ("projector_trials", self.projector_trials),
            ("chain_trials", self.chain_trials),
        ] {
            need_at_least(name, t, 2)?;
        }
        Ok(())
    }

    fn override_with(&mut self, trials: Option<usize>, dim: Option<usize>) {
        if let Some(t) = trials {
            self.sum_trials = t;
            self.sphere_trials = t;
            self.action_trials = t;
            self.projector_trials = t;
            self.chain_trials = t;
        }
        if let Some(n) = dim {
            self.sum_dim = n;
            self.sphere_dim = n;
            self.action_dim = n;
            self.projector_dim = n;
            self.chain_dim = n;
        }
    }
}

/// Log-log slopes of Monte Carlo deviations against dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingConfig {
    pub dims: Vec<usize>,
    pub action_trials: usize,
    pub sphere_trials: usize,
    pub sphere_step: f64,
    pub sphere_steps: usize,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        Self {
            dims: vec![64, 256, 1024],
            action_trials: 1000,
            sphere_trials: 4000,
            sphere_step: 0.1,
            sphere_steps: 20,
        }
    }
}

impl ScalingConfig {
    fn validate(&self) -> Result<()> {
        if self.dims.len() < 3 || self.dims.iter().any(|&n| n < 16) {
            return Err(config_err("`dims` needs at least 3 dimensions, each >= 16"));
        }
        need_at_least("action_trials", self.action_trials, 2)?;
        need_at_least("sphere_trials", self.sphere_trials, 2)?;
        if !(0.0..=2.0).contains(&self.sphere_step) {
            return Err(config_err("`sphere_step` must lie in [0, 2]"));
        }
        need_positive("sphere_steps", self.sphere_steps)
    }

    fn override_with(&mut self, trials: Option<usize>, dim: Option<usize>) {
        if let Some(t) = trials {
            self.action_trials = t;
            self.sphere_trials = t;
        }
        if let Some(n) = dim {
            self.dims = vec![n, 4 * n, 16 * n];
        }
    }
}

/// Projection-derivative oracles and cascade predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProjderConfig {
    pub derivative_samples: usize,
    pub derivative_dim: usize,
    pub fd_step: f64,
    pub segments: usize,
    pub segment_dim: usize,
    pub quad_points: usize,
    pub ratio_samples: usize,
    pub ratio_dims: Vec<usize>,
    pub path_samples: usize,
    pub path_len: usize,
    pub path_dim: usize,
    pub cascade_len: usize,
    pub cascade_dim: usize,
    pub cascade_distance: f64,
    pub cascade_radius: f64,
    pub cascade_trials: usize,
}

impl Default for ProjderConfig {
    fn default() -> Self {
        Self {
            derivative_samples: 100,
            derivative_dim: 8,
            fd_step: 1e-5,
            segments: 20,
            segment_dim: 8,
            quad_points: 64,
            ratio_samples: 100_000,
            ratio_dims: vec![3, 50, 500],
            path_samples: 10_000,
            path_len: 5,
            path_dim: 50,
            cascade_len: 5,
            cascade_dim: 200,
            cascade_distance: 1.0,
            cascade_radius: 1.0,
            cascade_trials: 1000,
        }
    }
}

impl ProjderConfig {
    fn validate(&self) -> Result<()> {
        need_positive("derivative_samples", self.derivative_samples)?;
        need_at_least("derivative_dim", self.derivative_dim, 2)?;
        need_finite_positive("fd_step", self.fd_step)?;
        need_positive("segments", self.segments)?;
        need_at_least("segment_dim", self.segment_dim, 2)?;
        need_positive("quad_points", self.quad_points)?;
        need_positive("ratio_samples", self.ratio_samples)?;
        if self.ratio_dims.is_empty() || self.ratio_dims.iter().any(|&n| n < 2) {
            return Err(config_err("`ratio_dims` must be nonempty with every N >= 2"));
        }
        need_positive("path_samples", self.path_samples)?;
        need_positive("path_len", self.path_len)?;
        need_at_least("path_dim", self.path_dim, 2)?;
        need_positive("cascade_len", self.cascade_len)?;
        need_at_least("cascade_dim", self.cascade_dim, 2)?;
        need_finite_positive("cascade_distance", self.cascade_distance)?;
        need_finite_positive("cascade_radius", self.cascade_radius)?;
        need_at_least("cascade_trials", self.cascade_trials, 2)
    }

    fn override_with(&mut self, trials: Option<usize>, dim: Option<usize>) {
        if let Some(t) = trials {
            self.derivative_samples = t;
            self.segments = t;
            self.ratio_samples = t;
            self.path_samples = t;
            self.cascade_trials = t;
        }
        if let Some(n) = dim {
            self.derivative_dim = n;
            self.segment_dim = n;
            self.path_dim = n;
            self.cascade_dim = n;
        }
    }
}

/// Superiorization matrices of random linear feasibility problems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupmatrixConfig {
    pub instances: usize,
    /// Instances whose column 0 and diagonal are compared with direct runs.
    pub equivalence_instances: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "I")]
    pub i: usize,
    pub n_max: usize,
    pub margin: f64,
    pub beta0: f64,
    pub decay: f64,
}

impl Default for SupmatrixConfig {
    fn default() -> Self {
        let s = PerturbationSchedule::default();
        Self {
            instances: 20,
            equivalence_instances: 10,
            n: 50,
            i: 5,
            n_max: 60,
            margin: 0.1,
            beta0: s.beta0(),
            decay: s.decay(),
        }
    }
}

impl SupmatrixConfig {
    fn validate(&self) -> Result<()> {
        need_positive("instances", self.instances)?;
        if self.equivalence_instances > self.instances {
            return Err(config_err("`equivalence_instances` cannot exceed `instances`"));
        }
        need_at_least("N", self.n, 2)?;
        need_positive("I", self.i)?;
        need_finite_positive("margin", self.margin)?;
        PerturbationSchedule::new(self.beta0, self.decay)?;
        crate::supermatrix::required_bytes(self.n_max, self.n)
            .le(&crate::supermatrix::DEFAULT_MEMORY_BUDGET)
            .then_some(())
            .ok_or_else(|| config_err("`n_max` and `N` exceed the 2 GB matrix budget"))
    }

    fn schedule(&self) -> PerturbationSchedule {
        PerturbationSchedule::new(self.beta0, self.decay).expect("validated")
    }

    fn override_with(&mut self, trials: Option<usize>, dim: Option<usize>) {
        if let Some(t) = trials {
            self.instances = t;
            self.equivalence_instances = self.equivalence_instances.min(t);
        }
        if let Some(n) = dim {
            self.n = n;
        }
    }
}

/// Paired basic/superiorized runs plus the increment-drift experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinsupSuiteConfig {
    pub batch: LinSupConfig,
    pub drift: DriftConfig,
    /// Largest final residual accepted from either run.
    pub residual_limit: f64,
    pub min_success_rate: f64,
}

impl Default for LinsupSuiteConfig {
    fn default() -> Self {
        Self {
            batch: LinSupConfig::default(),
            drift: DriftConfig::default(),
            residual_limit: 1e-6,
            min_success_rate: 0.95,
        }
    }
}

impl LinsupSuiteConfig {
    fn validate(&self) -> Result<()> {
        self.batch.validate()?;
        self.drift.validate()?;
        need_finite_positive("residual_limit", self.residual_limit)?;
        if !(0.0..=1.0).contains(&self.min_success_rate) {
            return Err(config_err("`min_success_rate` must lie in [0, 1]"));
        }
        Ok(())
    }

    fn override_with(&mut self, trials: Option<usize>, dim: Option<usize>) {
        if let Some(t) = trials {
            self.batch.trials = t;
            self.drift.trials = t;
        }
        if let Some(n) = dim {
            self.batch.n = n;
            self.drift.n = n;
        }
    }
}

/// The parameter block of one suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SuiteParams {
    ComVerify(ComVerifyConfig),
    Linsup(LinsupSuiteConfig),
    ProjderCheck(ProjderConfig),
    SupmatrixTrace(SupmatrixConfig),
    Scaling(ScalingConfig),
}

impl SuiteParams {
    fn parse(suite: Suite, raw: Option<serde_json::Value>) -> Result<Self> {
        fn de<T: serde::de::DeserializeOwned + Default>(raw: Option<serde_json::Value>) -> Result<T> {
            match raw {
                None => Ok(T::default()),
                Some(v) => serde_json::from_value(v).map_err(|e| config_err(format!("params: {e}"))),
            }
        }
        Ok(match suite {
            Suite::ComVerify => SuiteParams::ComVerify(de(raw)?),
            Suite::Linsup => SuiteParams::Linsup(de(raw)?),
            Suite::ProjderCheck => SuiteParams::ProjderCheck(de(raw)?),
            Suite::SupmatrixTrace => SuiteParams::SupmatrixTrace(de(raw)?),
            Suite::Scaling => SuiteParams::Scaling(de(raw)?),
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            SuiteParams::ComVerify(c) => c.validate(),
            SuiteParams::Linsup(c) => c.validate(),
            SuiteParams::ProjderCheck(c) => c.validate(),
            SuiteParams::SupmatrixTrace(c) => c.validate(),
            SuiteParams::Scaling(c) => c.validate(),
        }
    }

    fn override_with(&mut self, trials: Option<usize>, dim: Option<usize>) {
        match self {
            SuiteParams::ComVerify(c) => c.override_with(trials, dim),
            SuiteParams::Linsup(c) => c.override_with(trials, dim),
            SuiteParams::ProjderCheck(c) => c.override_with(trials, dim),
            SuiteParams::SupmatrixTrace(c) => c.override_with(trials, dim),
            SuiteParams::Scaling(c) => c.override_with(trials, dim),
        }
    }
}

/// The config file as written: every key optional, unknown keys rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    suite: Option<Suite>,
    output_dir: Option<PathBuf>,
    params: Option<serde_json::Value>,
}

/// A fully resolved and validated run description.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub suite: Suite,
    pub params: SuiteParams,
    pub output_dir: PathBuf,
}

/// Command-line values that take part in config resolution.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub suite: Option<Suite>,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub dim: Option<usize>,
    pub out: Option<PathBuf>,
    /// Value of `SUPERCON_SEED`, if set.
    pub env_seed: Option<String>,
}

pub const DEFAULT_OUTPUT_DIR: &str = "results";

impl ExperimentConfig {
    /// Seed precedence: `--seed`, then the config file, then
    /// `SUPERCON_SEED`, then 0. Flags override the file for suite and
    /// output directory; `--trials` and `--dim` set every trial count and
    /// dimension of the suite.
    pub fn resolve(o: &Overrides) -> Result<Self> {
        let raw = match &o.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str::<RawConfig>(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?
            }
            None => RawConfig::default(),
        };
        let suite = match (o.suite, raw.suite) {
            (Some(a), Some(b)) if a != b => {
                return Err(config_err(format!("--suite {a} conflicts with config suite {b}")))
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(config_err("no suite given (use --suite or the `suite` key)")),
        };
        let env_seed = match &o.env_seed {
            Some(s) => Some(
                s.trim()
                    .parse::<u64>()
                    .map_err(|e| config_err(format!("{SEED_ENV}={s:?}: {e}")))?,
            ),
            None => None,
        };
        let seed = o.seed.or(raw.seed).or(env_seed).unwrap_or(0);
        if o.trials == Some(0) {
            return Err(config_err("--trials must be at least 1"));
        }
        let mut params = SuiteParams::parse(suite, raw.params)?;
        params.override_with(o.trials, o.dim);
        if let SuiteParams::Linsup(c) = &mut params {
            c.batch.seed = seed;
            c.drift.seed = seed;
        }
        params.validate()?;
        let output_dir = o
            .out
            .clone()
            .or(raw.output_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        Ok(Self {
            seed,
            suite,
            params,
            output_dir,
        })
    }

    /// Defaults for `suite` under `seed`.
    pub fn with_defaults(suite: Suite, seed: u64) -> Self {
        Self::resolve(&Overrides {
            suite: Some(suite),
            seed: Some(seed),
            ..Default::default()
        })
        .expect("defaults are valid")
    }
}

/// One pass/fail assertion of a suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// The measured quantity.
    pub value: f64,
    /// The bound it was compared against.
    pub limit: f64,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value <= limit,
            value,
            limit,
        }
    }

    fn below(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value < limit,
            value,
            limit,
        }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value >= limit,
            value,
            limit,
        }
    }

    fn above(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            passed: value > limit,
            value,
            limit,
        }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> [Self; 2] {
        [
            Self::at_least(&format!("{name}_lower"), value, lo),
            Self::at_most(&format!("{name}_upper"), value, hi),
        ]
    }
}

/// Everything a suite produced, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct SuiteOutput {
    pub checks: Vec<Check>,
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub summary: serde_json::Value,
}

impl SuiteOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_slice())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn checks_csv(checks: &[Check]) -> Result<Vec<u8>> {
    csv_bytes(&["check", "passed", "value", "limit"], |w| {
        for c in checks {
            w.write_record([
                c.name.clone(),
                c.passed.to_string(),
                format!("{:e}", c.value),
                format!("{:e}", c.limit),
            ])?;
        }
        Ok(())
    })
}

fn reports_csv(reports: &[PredictionReport]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_reports_csv(reports, &mut buf)?;
    Ok(buf)
}

/// Runs the suite on the current rayon pool.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteOutput> {
    let seed = cfg.seed;
    let mut out = match &cfg.params {
        SuiteParams::ComVerify(c) => com_verify(c, seed)?,
        SuiteParams::Linsup(c) => linsup_suite(c)?,
        SuiteParams::ProjderCheck(c) => projder_check(c, seed)?,
        SuiteParams::SupmatrixTrace(c) => supmatrix_trace(c, seed)?,
        SuiteParams::Scaling(c) => scaling(c, seed)?,
    };
    let checks = checks_csv(&out.checks)?;
    out.files.insert(0, ("checks.csv".into(), checks));
    Ok(out)
}

fn random_spectrum(n: usize, hi: f64, exp: &Experiment, label: u64) -> SingularSpectrum {
    let mut rng = exp.rng(label);
    SingularSpectrum::new((0..n).map(|_| rng.random_range(0.0..hi)).collect()).expect("nonnegative, nonempty")
}

fn com_verify(c: &ComVerifyConfig, seed: u64) -> Result<SuiteOutput> {
    let root = Experiment::new(seed, "com-verify");
    let mut checks = Vec::new();

    let sum = mc_sum_norm(&c.sum_lengths, c.sum_dim, c.sum_trials, &root.child(0))?;
    checks.push(Check::below("sum_norm_mean", sum.relative_error, 0.01));
    checks.push(Check::below(
        "sum_norm_relative_std",
        sum.empirical_std / sum.empirical_mean,
        0.05,
    ));

    let steps = vec![c.sphere_step; c.sphere_steps];
    let sphere = mc_sphere_displacement(&steps, c.sphere_dim, c.sphere_trials, &root.child(1))?;
    checks.push(Check::below("sphere_displacement_mean", sphere.relative_error, 0.02));
    let single = mc_sphere_displacement(&steps[..1], c.sphere_dim, c.sphere_trials, &root.child(2))?;
    checks.push(Check::below(
        "sphere_single_step_exact",
        (single.empirical_mean - single.predicted)
            .abs()
            .max(single.empirical_std),
        1e-14,
    ));

    let spectrum = random_spectrum(c.action_dim, 2.0, &root.child(3), 0);
    let action = mc_action_norm(&spectrum, c.action_trials, &root.child(4))?;
    checks.push(Check::below(
        "action_norm_mean",
        action.norm.relative_error,
        3.0 * action.norm.empirical_std / action.norm.empirical_mean,
    ));
    let ones = mc_action_norm(
        &SingularSpectrum::constant(c.action_dim, 1.0)?,
        c.action_trials,
        &root.child(5),
    )?;
    checks.push(Check::at_most(
        "action_norm_ones_exact",
        (ones.norm.empirical_mean - 1.0).abs().max(ones.norm.empirical_std),
        1e-10,
    ));

    let mut projector = vec![0.0; c.projector_dim];
    projector[0] = 1.0;
    let rank1 = mc_rotation_product(&[SingularSpectrum::new(projector)?], c.projector_trials, &root.child(6))?;
    checks.push(Check::below("rank1_rotation", rank1.relative_error, 0.05));

    let chain: Vec<SingularSpectrum> = (0..c.chain_len)
        .map(|k| random_spectrum(c.chain_dim, 2.0, &root.child(7), k as u64))
        .collect();
    let product = mc_rotation_product(&chain, c.chain_trials, &root.child(8))?;
    let m = c.chain_len as f64;
    checks.push(Check::below(
        "psd_chain_rotation",
        product.relative_error,
        3.0 * m.sqrt() / (c.chain_dim as f64).sqrt(),
    ));
    let max_prediction = [rank1.predicted, product.predicted]
        .into_iter()
        .chain(
            chain
                .iter()
                .map(|s| predict_rotation(&[s.values().to_vec()], true).expect("valid spectrum")),
        )
        .fold(f64::NEG_INFINITY, f64::max);
    checks.push(Check::at_most("psd_prediction_bound", max_prediction, 2.0));

    let reports = vec![
        sum,
        sphere,
        single,
        action.norm,
        action.distortion,
        ones.norm,
        rank1,
        product,
    ];
    Ok(SuiteOutput {
        summary: serde_json::json!({ "reports": reports, "checks": checks }),
        files: vec![("reports.csv".into(), reports_csv(&reports)?)],
        checks,
    })
}

#[derive(Debug, Clone, Serialize)]
struct ScalingRow {
    series: &'static str,
    n: usize,
    trials: usize,
    mean: f64,
    std: f64,
    deviation: f64,
}

fn scaling(c: &ScalingConfig, seed: u64) -> Result<SuiteOutput> {
    let root = Experiment::new(seed, "scaling");
    let mut rows = Vec::new();
    let action_fit = crate::concentration::fit_scaling(&c.dims, |n| {
        let s = random_spectrum(n, 2.0, &root.child(0), n as u64);
        let r = mc_action_norm(&s, c.action_trials, &root.child(1).child(n as u64))?.norm;
        let dev = r.relative_std();
        rows.push(ScalingRow {
            series: "action_norm_relative_std",
            n,
            trials: r.trials,
            mean: r.empirical_mean,
            std: r.empirical_std,
            deviation: dev,
        });
        Ok(dev)
    })?;
    let steps = vec![c.sphere_step; c.sphere_steps];
    let sphere_fit = crate::concentration::fit_scaling(&c.dims, |n| {
        let r = mc_sphere_displacement(&steps, n, c.sphere_trials, &root.child(2).child(n as u64))?;
        rows.push(ScalingRow {
            series: "sphere_displacement_std",
            n,
            trials: r.trials,
            mean: r.empirical_mean,
            std: r.empirical_std,
            deviation: r.empirical_std,
        });
        Ok(r.empirical_std)
    })?;
    let mut checks = Vec::new();
    checks.extend(Check::within("action_norm_slope", action_fit.slope, -0.65, -0.35));
    checks.extend(Check::within(
        "sphere_displacement_slope",
        sphere_fit.slope,
        -0.65,
        -0.35,
    ));
    let table = csv_bytes(&["series", "N", "trials", "mean", "std", "deviation"], |w| {
        for r in &rows {
            w.write_record([
                r.series.to_string(),
                r.n.to_string(),
                r.trials.to_string(),
                format!("{:e}", r.mean),
                format!("{:e}", r.std),
                format!("{:e}", r.deviation),
            ])?;
        }
        Ok(())
    })?;
    let fits = [
        ("action_norm_relative_std", &action_fit),
        ("sphere_displacement_std", &sphere_fit),
    ];
    let fit_table = csv_bytes(&["series", "slope", "intercept"], |w| {
        for (name, f) in &fits {
            w.write_record([name.to_string(), format!("{:e}", f.slope), format!("{:e}", f.intercept)])?;
        }
        Ok(())
    })?;
    Ok(SuiteOutput {
        summary: serde_json::json!({
            "rows": rows,
            "fits": { "action_norm_relative_std": action_fit, "sphere_displacement_std": sphere_fit },
            "checks": checks,
        }),
        files: vec![("scaling.csv".into(), table), ("scaling_fit.csv".into(), fit_table)],
        checks,
    })
}

/// A random ball or ellipsoid (alternating by sample index) with a random
/// center, sizes in `[0.5, 2]`.
fn random_body<R: Rng + ?Sized>(n: usize, ellipsoid: bool, rng: &mut R) -> Result<ConvexBody> {
    let center = gaussian_vector(n, rng)?;
    Ok(if ellipsoid {
        let axes = Vector::from_fn(n, |_, _| rng.random_range(0.5..2.0));
        ConvexBody::Ellipsoid(Ellipsoid::new(center, axes)?)
    } else {
        ConvexBody::Ball(Ball::new(center, rng.random_range(0.5..2.0))?)
    })
}

/// Largest distance from the center to the body.
fn outer_radius(body: &ConvexBody) -> f64 {
    match body {
        ConvexBody::Ball(b) => b.radius(),
        ConvexBody::Ellipsoid(e) => e.semi_axes().max(),
        ConvexBody::HalfSpaces(_) => f64::INFINITY,
    }
}

fn body_center(body: &ConvexBody) -> &Vector {
    match body {
        ConvexBody::Ball(b) => b.center(),
        ConvexBody::Ellipsoid(e) => e.center(),
        ConvexBody::HalfSpaces(_) => unreachable!("only smooth bodies are sampled"),
    }
}

/// A point at distance `(1.1..3)·outer radius` from the center.
fn exterior_point<R: Rng + ?Sized>(body: &ConvexBody, rng: &mut R) -> Result<Vector> {
    let u = uniform_sphere(body.dim(), rng)?;
    Ok(body_center(body) + u * (outer_radius(body) * rng.random_range(1.1..3.0)))
}

fn body_kind(body: &ConvexBody) -> &'static str {
    match body {
        ConvexBody::Ball(_) => "ball",
        ConvexBody::Ellipsoid(_) => "ellipsoid",
        ConvexBody::HalfSpaces(_) => "halfspaces",
    }
}

#[derive(Debug, Clone, Serialize)]
struct DerivativeRow {
    sample: usize,
    body: &'static str,
    dist: f64,
    rel_err: f64,
    radial_norm: f64,
    /// Largest of the eigenvalues `(1 + d·κ)⁻¹` and `‖DP·w‖/‖w‖`.
    max_factor: f64,
    /// Smallest eigenvalue `(1 + d·κ)⁻¹`.
    min_factor: f64,
}

#[derive(Debug, Clone, Serialize)]
struct SegmentRow {
    segment: usize,
    body: &'static str,
    w_norm: f64,
    residual: f64,
}

#[derive(Debug, Clone, Serialize)]
struct RatioRow {
    n: usize,
    samples: usize,
    violations: usize,
    /// Largest `(‖v‖₂^(π))² − ‖v‖₁^(π)`; nonpositive when the lower bound holds.
    max_lower_gap: f64,
    /// Largest `‖v‖₁^(π) − ½((‖v‖₂^(π))² + 1)`.
    max_upper_gap: f64,
}

fn projder_check(c: &ProjderConfig, seed: u64) -> Result<SuiteOutput> {
    let root = Experiment::new(seed, "projder-check");
    let n = c.derivative_dim;
    let derivative = par_trials(
        &root.child(0),
        c.derivative_samples,
        |rng, t| -> Result<DerivativeRow> {
            let body = random_body(n, t % 2 == 1, rng)?;
            let x = exterior_point(&body, rng)?;
            let w = gaussian_vector(n, rng)?;
            let pd = ProjectionDerivative::new(&body, &x)?;
            let dp = pd.apply(&w)?;
            let fd = finite_difference(&body, &x, &w, c.fd_step)?;
            let factors: Vec<f64> = pd
                .curvature()
                .principal_curvatures()
                .iter()
                .map(|k| 1.0 / (1.0 + pd.dist() * k))
                .collect();
            let max_factor = factors.iter().copied().fold(dp.norm() / w.norm(), f64::max);
            let min_factor = factors.iter().copied().fold(f64::INFINITY, f64::min);
            Ok(DerivativeRow {
                sample: t,
                body: body_kind(&body),
                dist: pd.dist(),
                rel_err: (&dp - fd).norm() / dp.norm(),
                radial_norm: pd.apply(pd.radial_dir())?.norm(),
                max_factor,
                min_factor,
            })
        },
    )
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let m = c.segment_dim;
    let segments = par_trials(&root.child(1), c.segments, |rng, t| -> Result<SegmentRow> {
        let body = random_body(m, t % 2 == 1, rng)?;
        loop {
            let x0 = exterior_point(&body, rng)?;
            let x1 = exterior_point(&body, rng)?;
            match mean_value_check(&body, &x0, &x1, c.quad_points) {
                Ok(residual) => {
                    return Ok(SegmentRow {
                        segment: t,
                        body: body_kind(&body),
                        w_norm: (x1 - x0).norm(),
                        residual,
                    })
                }
                Err(Error::SegmentMeetsBody) => continue,
                Err(e) => return Err(e),
            }
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut ratio_rows = Vec::new();
    for (j, &dim) in c.ratio_dims.iter().enumerate() {
        let per = par_trials(&root.child(2).child(j as u64), c.ratio_samples, |rng, _| {
            let v: Vec<f64> = (0..dim - 1).map(|_| 1.0 - rng.random::<f64>()).collect();
            let b = norm_ratio_bounds(&v).expect("entries in (0, 1]");
            let l1 = crate::geometry::prob_lp_norm(&v, 1.0).expect("nonempty");
            let l2sq = crate::geometry::prob_lp_norm(&v, 2.0).expect("nonempty").powi(2);
            (b.holds(), l2sq - l1, l1 - 0.5 * (l2sq + 1.0))
        });
        ratio_rows.push(RatioRow {
            n: dim,
            samples: per.len(),
            violations: per.iter().filter(|p| !p.0).count(),
            max_lower_gap: per.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
            max_upper_gap: per.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max),
        });
    }

    let path_preds = par_trials(&root.child(3), c.path_samples, |rng, _| {
        let steps = (0..c.path_len)
            .map(|_| CascadeStep {
                dist: rng.random_range(0.0..5.0),
                curvatures: (0..c.path_dim - 1).map(|_| rng.random_range(0.0..5.0)).collect(),
            })
            .collect();
        cascade_rotation_prediction(&CascadePath::new(steps).expect("valid path"))
    });
    let max_path_pred = path_preds.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let chain: Vec<CascadeLink> = (0..c.cascade_len)
        .map(|_| -> Result<CascadeLink> {
            Ok(CascadeLink {
                body: ConvexBody::Ball(Ball::centered(c.cascade_dim, c.cascade_radius)?),
                distance: c.cascade_distance,
            })
        })
        .collect::<Result<_>>()?;
    let w0 = uniform_sphere(c.cascade_dim, &mut root.child(4).rng(0))?;
    let cascade = mc_cascade(&chain, &w0, c.cascade_trials, &root.child(5))?;
    let uniform = CascadePath::uniform(c.cascade_len, c.cascade_dim, c.cascade_distance, 1.0 / c.cascade_radius)?;
    let norm_target = cascade_norm_prediction(&uniform);
    let norm_rel = crate::concentration::relative_error(cascade.norm.empirical_mean, norm_target);

    let mut checks = vec![
        Check::at_most(
            "derivative_matches_fd",
            derivative.iter().map(|r| r.rel_err).fold(0.0, f64::max),
            1e-5,
        ),
        Check::at_most(
            "radial_annihilation",
            derivative.iter().map(|r| r.radial_norm).fold(0.0, f64::max),
            1e-14,
        ),
        Check::at_most(
            "contraction_upper",
            derivative.iter().map(|r| r.max_factor).fold(0.0, f64::max),
            1.0 + 1e-12,
        ),
        Check::at_least(
            "contraction_lower",
            derivative.iter().map(|r| r.min_factor).fold(f64::INFINITY, f64::min),
            0.0,
        ),
        Check::below(
            "mean_value_identity",
            segments.iter().map(|s| s.residual / s.w_norm).fold(0.0, f64::max),
            1e-8,
        ),
        Check::at_most(
            "norm_ratio_bounds",
            ratio_rows.iter().map(|r| r.violations).sum::<usize>() as f64,
            0.0,
        ),
        Check::at_most("cascade_rotation_bound", max_path_pred, std::f64::consts::SQRT_2),
        Check::below(
            "cascade_norm_ratio",
            norm_rel,
            5.0 * (c.cascade_len as f64).sqrt() / (c.cascade_dim as f64).sqrt(),
        ),
        Check::below("cascade_rotation", cascade.rotation.empirical_mean, 0.05),
    ];
    checks.push(Check::at_most(
        "cascade_rotation_prediction",
        cascade.rotation.predicted.abs(),
        1e-12,
    ));

    let derivative_csv = csv_bytes(
        &[
            "sample",
            "body",
            "N",
            "dist",
            "rel_err",
            "radial_norm",
            "max_factor",
            "min_factor",
        ],
        |w| {
            for r in &derivative {
                w.write_record([
                    r.sample.to_string(),
                    r.body.to_string(),
                    n.to_string(),
                    format!("{:e}", r.dist),
                    format!("{:e}", r.rel_err),
                    format!("{:e}", r.radial_norm),
                    format!("{:e}", r.max_factor),
                    format!("{:e}", r.min_factor),
                ])?;
            }
            Ok(())
        },
    )?;
    let segment_csv = csv_bytes(&["segment", "body", "N", "w_norm", "residual"], |w| {
        for s in &segments {
            w.write_record([
                s.segment.to_string(),
                s.body.to_string(),
                m.to_string(),
                format!("{:e}", s.w_norm),
                format!("{:e}", s.residual),
            ])?;
        }
        Ok(())
    })?;
    let ratio_csv = csv_bytes(&["N", "samples", "violations", "max_lower_gap", "max_upper_gap"], |w| {
        for r in &ratio_rows {
            w.write_record([
                r.n.to_string(),
                r.samples.to_string(),
                r.violations.to_string(),
                format!("{:e}", r.max_lower_gap),
                format!("{:e}", r.max_upper_gap),
            ])?;
        }
        Ok(())
    })?;
    let reports = vec![
        cascade.norm.clone(),
        cascade.rotation.clone(),
        cascade.rotation_distance.clone(),
    ];
    Ok(SuiteOutput {
        summary: serde_json::json!({
            "derivative": derivative,
            "mean_value": segments,
            "norm_ratio": ratio_rows,
            "max_path_rotation_prediction": max_path_pred,
            "cascade": cascade,
            "cascade_norm_target": norm_target,
            "checks": checks,
        }),
        files: vec![
            ("derivative.csv".into(), derivative_csv),
            ("mean_value.csv".into(), segment_csv),
            ("norm_ratio.csv".into(), ratio_csv),
            ("cascade.csv".into(), reports_csv(&reports)?),
        ],
        checks,
    })
}

#[derive(Debug, Clone, Serialize)]
struct RowStat {
    instance: usize,
    n: usize,
    telescoping_residual: f64,
    /// Largest `‖𝓜(n, s+1) − 𝓜(n, s)‖ − β_s` over the row.
    max_step_excess: f64,
}

#[derive(Debug, Clone, Serialize)]
struct LimitStat {
    instance: usize,
    column: usize,
    depth: usize,
    last_change: f64,
    settled: bool,
    beta: f64,
    /// `‖x_{∞,s+1} − x_{∞,s}‖`.
    next_gap: f64,
}

struct Instance {
    rows: Vec<RowStat>,
    limits: Vec<LimitStat>,
    equivalence_mismatches: Option<(usize, usize)>,
    entries: Option<Vec<u8>>,
}

fn supmatrix_trace(c: &SupmatrixConfig, seed: u64) -> Result<SuiteOutput> {
    let exp = Experiment::new(seed, "supmatrix-trace");
    let schedule = c.schedule();
    let instances = par_trials(&exp, c.instances, |rng, t| -> Result<Instance> {
        let p = gen_problem(c.n, c.i, c.margin, rng)?;
        let seq = p.operators();
        let x0 = Vector::zeros(c.n);
        let dir = Nonascent(p.target().clone());
        let m = build(&seq, &x0, &schedule, &dir, c.n_max)?;
        let mut rows = Vec::with_capacity(c.n_max + 1);
        for n in 0..=c.n_max {
            let row = m.row(n)?;
            let excess = (0..row.len() - 1)
                .map(|s| (&row[s + 1] - &row[s]).norm() - m.beta(s))
                .fold(f64::NEG_INFINITY, f64::max);
            rows.push(RowStat {
                instance: t,
                n,
                telescoping_residual: m.telescoping_residual(n, p.target())?,
                max_step_excess: excess,
            });
        }
        let limits_raw = (0..=c.n_max + 1)
            .map(|k| m.column_limit(k, SETTLE_TOL))
            .collect::<Result<Vec<_>>>()?;
        let limits = limits_raw
            .iter()
            .enumerate()
            .map(|(s, l)| LimitStat {
                instance: t,
                column: s,
                depth: l.depth,
                last_change: l.last_change.unwrap_or(f64::NAN),
                settled: l.settled,
                beta: m.beta(s),
                next_gap: limits_raw
                    .get(s + 1)
                    .map_or(f64::NAN, |next| (&next.point - &l.point).norm()),
            })
            .collect();
        let equivalence_mismatches = (t < c.equivalence_instances)
            .then(|| -> Result<(usize, usize)> {
                let basic = basic_trajectory(&seq, &x0, c.n_max)?;
                let sup = superiorized_trajectory(&seq, &x0, &schedule, &dir, c.n_max)?;
                let mismatches = |a: &[Vector], b: &[&Vector]| {
                    a.iter().zip(b).filter(|(x, y)| x != *y).count() + a.len().abs_diff(b.len())
                };
                Ok((mismatches(&basic, &m.column(0)?), mismatches(&sup, &m.diagonal())))
            })
            .transpose()?;
        let entries = if t == 0 {
            let mut buf = Vec::new();
            m.write_entries_csv(p.target(), &mut buf)?;
            Some(buf)
        } else {
            None
        };
        Ok(Instance {
            rows,
            limits,
            equivalence_mismatches,
            entries,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let rows: Vec<&RowStat> = instances.iter().flat_map(|i| &i.rows).collect();
    let limits: Vec<&LimitStat> = instances.iter().flat_map(|i| &i.limits).collect();
    let (col_mismatch, diag_mismatch) = instances
        .iter()
        .filter_map(|i| i.equivalence_mismatches)
        .fold((0, 0), |acc, m| (acc.0 + m.0, acc.1 + m.1));
    let settled_pairs: Vec<&LimitStat> = instances
        .iter()
        .flat_map(|i| {
            i.limits
                .windows(2)
                .filter(|w| w[0].settled && w[1].settled)
                .map(|w| &w[0])
        })
        .collect();
    let checks = vec![
        Check::below(
            "telescoping_identity",
            rows.iter().map(|r| r.telescoping_residual).fold(0.0, f64::max),
            1e-9,
        ),
        Check::at_most("column0_matches_basic", col_mismatch as f64, 0.0),
        Check::at_most("diagonal_matches_superiorized", diag_mismatch as f64, 0.0),
        Check::at_most(
            "entry_step_bound",
            rows.iter().map(|r| r.max_step_excess).fold(f64::NEG_INFINITY, f64::max),
            1e-12,
        ),
        Check::at_most(
            "limit_step_bound",
            settled_pairs
                .iter()
                .map(|l| l.next_gap - l.beta)
                .fold(f64::NEG_INFINITY, f64::max),
            1e-9,
        ),
        Check::at_least("settled_column_pairs", settled_pairs.len() as f64, 1.0),
    ];
    let rows_csv = csv_bytes(&["instance", "n", "telescoping_residual", "max_step_excess"], |w| {
        for r in &rows {
            w.write_record([
                r.instance.to_string(),
                r.n.to_string(),
                format!("{:e}", r.telescoping_residual),
                format!("{:e}", r.max_step_excess),
            ])?;
        }
        Ok(())
    })?;
    let limits_csv = csv_bytes(
        &[
            "instance",
            "column",
            "depth",
            "last_change",
            "settled",
            "beta",
            "next_gap",
        ],
        |w| {
            for l in &limits {
                w.write_record([
                    l.instance.to_string(),
                    l.column.to_string(),
                    l.depth.to_string(),
                    format!("{:e}", l.last_change),
                    l.settled.to_string(),
                    format!("{:e}", l.beta),
                    format!("{:e}", l.next_gap),
                ])?;
            }
            Ok(())
        },
    )?;
    let entries = instances[0].entries.clone().expect("instance 0 keeps its entries");
    Ok(SuiteOutput {
        summary: serde_json::json!({
            "instances": c.instances,
            "settled_column_pairs": settled_pairs.len(),
            "column0_mismatches": col_mismatch,
            "diagonal_mismatches": diag_mismatch,
            "checks": checks,
        }),
        files: vec![
            ("rows.csv".into(), rows_csv),
            ("limits.csv".into(), limits_csv),
            ("entries.csv".into(), entries),
        ],
        checks,
    })
}

fn linsup_suite(c: &LinsupSuiteConfig) -> Result<SuiteOutput> {
    let batch = batch_experiment(&c.batch)?;
    let drift = drift_experiment(&c.drift)?;
    let max_residual = batch
        .outcomes
        .iter()
        .map(|o| o.residual_basic.max(o.residual_sup))
        .fold(0.0, f64::max);
    let mut checks = vec![
        Check::at_most("linsup_all_converged", (batch.trials - batch.valid) as f64, 0.0),
        Check::below("linsup_max_residual", max_residual, c.residual_limit),
        Check::at_least("linsup_success_rate", batch.success_rate, c.min_success_rate),
        Check::above("linsup_mean_gap", batch.mean_gap, 0.0),
    ];
    checks.extend(Check::within(
        "drift_slope",
        drift.slope.unwrap_or(f64::NAN),
        0.35,
        0.65,
    ));
    let mut outcomes = Vec::new();
    write_outcomes_csv(&batch.outcomes, &mut outcomes)?;
    let mut drift_rows = Vec::new();
    write_drift_csv(&drift.rows, &mut drift_rows)?;
    let points = csv_bytes(&["k", "rms_angle", "mean_delta_norm", "trials"], |w| {
        for p in &drift.points {
            w.write_record([
                p.k.to_string(),
                format!("{:e}", p.rms_angle),
                format!("{:e}", p.mean_delta_norm),
                p.trials.to_string(),
            ])?;
        }
        Ok(())
    })?;
    Ok(SuiteOutput {
        summary: serde_json::json!({
            "trials": batch.trials,
            "valid": batch.valid,
            "success_rate": batch.success_rate,
            "mean_gap": batch.mean_gap,
            "max_residual": max_residual,
            "drift_points": drift.points,
            "drift_slope": drift.slope,
            "checks": checks,
        }),
        files: vec![
            ("outcomes.csv".into(), outcomes),
            ("drift.csv".into(), drift_rows),
            ("drift_points.csv".into(), points),
        ],
        checks,
    })
}

/// What `manifest.json` records next to the results.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub suite: Suite,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a ExperimentConfig,
    pub files: Vec<String>,
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub wall_time_secs: f64,
}

/// Writes the suite's files, `summary.json` and `manifest.json`.
pub fn write_artifacts(
    cfg: &ExperimentConfig,
    output: &SuiteOutput,
    threads: usize,
    wall_time_secs: f64,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut written = Vec::new();
    let mut names = Vec::new();
    for (name, bytes) in &output.files {
        let path = cfg.output_dir.join(name);
        std::fs::write(&path, bytes)?;
        written.push(path);
        names.push(name.clone());
    }
    let summary = cfg.output_dir.join("summary.json");
    let mut text = serde_json::to_string_pretty(&serde_json::json!({
        "suite": cfg.suite,
        "seed": cfg.seed,
        "passed": output.passed(),
        "results": output.summary,
    }))?;
    text.push('\n');
    std::fs::write(&summary, text)?;
    written.push(summary);
    names.push("summary.json".into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        suite: cfg.suite,
        seed: cfg.seed,
        threads,
        config: cfg,
        files: names,
        passed: output.passed(),
        failed_checks: output.failures().map(|c| c.name.clone()).collect(),
        wall_time_secs,
    };
    let path = cfg.output_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    written.push(path);
    Ok(written)
}

/// Runs `cfg` on a pool of `threads` workers (0 picks the rayon default),
/// writes the artifacts and returns the suite output.
pub fn run(cfg: &ExperimentConfig, threads: usize) -> Result<SuiteOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_err(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let output = pool.install(|| run_suite(cfg))?;
    let elapsed = start.elapsed().as_secs_f64();
    write_artifacts(cfg, &output, pool.current_num_threads(), elapsed)?;
    Ok(output)
}

/// Shapes of long-format plot data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PlotKind {
    /// `drift.csv` → RMS angle against `k = n − i`, plus a log-log slope row.
    DriftVsSteps,
    /// `scaling.csv` → `(ln N, ln deviation)` per series, plus slope rows.
    DeviationVsN,
    /// A report CSV → `(predicted, mean)` per conclusion.
    PredictedVsEmpirical,
    /// `outcomes.csv` → histogram of the gaps of converged trials.
    GapHistogram,
}

pub const PLOT_HEADER: [&str; 4] = ["x", "y", "series", "stderr"];

const DRIFT_HEADER: [&str; 4] = ["i", "n", "angle", "delta_norm"];
const SCALING_HEADER: [&str; 6] = ["series", "N", "trials", "mean", "std", "deviation"];
const OUTCOME_HEADER: [&str; 9] = [
    "trial",
    "phi_basic",
    "phi_sup",
    "gap",
    "residual_basic",
    "residual_sup",
    "iters_basic",
    "iters_sup",
    "valid",
];

fn schema_error(kind: PlotKind, expected: &[&str], found: &csv::StringRecord) -> Error {
    config_err(format!(
        "schema mismatch for {kind:?}: expected columns {:?}, found {:?}",
        expected,
        found.iter().collect::<Vec<_>>()
    ))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| config_err(format!("row {line}: cannot parse column {i}")))
}

struct PlotRow {
    x: Option<f64>,
    y: f64,
    series: String,
    stderr: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Converts a results CSV into `x,y,series,stderr` rows. Empty input (no
/// bytes, or a header with no rows) gives a header-only output. Slope rows
/// leave `x` and `stderr` blank and name the series `<series>_slope`.
pub fn emit_plotdata<R: Read, W: Write>(input: R, kind: PlotKind, bins: usize, out: W) -> Result<()> {
    if bins == 0 {
        return Err(config_err("bins must be at least 1"));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = rdr.records();
    let mut rows = Vec::new();
    if let Some(header) = records.next() {
        let header = header?;
        let expected: &[&str] = match kind {
            PlotKind::DriftVsSteps => &DRIFT_HEADER,
            PlotKind::DeviationVsN => &SCALING_HEADER,
            PlotKind::PredictedVsEmpirical => &REPORT_HEADER,
            PlotKind::GapHistogram => &OUTCOME_HEADER,
        };
        if header.iter().ne(expected.iter().copied()) {
            return Err(schema_error(kind, expected, &header));
        }
        let data = records.collect::<std::result::Result<Vec<_>, _>>()?;
        if !data.is_empty() {
            rows = match kind {
                PlotKind::DriftVsSteps => drift_plot(&data)?,
                PlotKind::DeviationVsN => deviation_plot(&data)?,
                PlotKind::PredictedVsEmpirical => scatter_plot(&data)?,
                PlotKind::GapHistogram => gap_histogram(&data, bins)?,
            };
        }
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PLOT_HEADER)?;
    for r in &rows {
        w.write_record([opt(r.x), format!("{:e}", r.y), r.series.clone(), opt(r.stderr)])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `input` and writes the plot data to `output`.
pub fn plotdata_file(input: &Path, kind: PlotKind, bins: usize, output: &Path) -> Result<()> {
    let file = std::fs::File::open(input).map_err(|e| config_err(format!("cannot open {}: {e}", input.display())))?;
    let mut buf = Vec::new();
    emit_plotdata(file, kind, bins, &mut buf)?;
    std::fs::write(output, buf)?;
    Ok(())
}

fn slope_row(series: &str, xs: &[f64], ys: &[f64]) -> Option<PlotRow> {
    linear_fit(xs, ys).map(|(slope, _)| PlotRow {
        x: None,
        y: slope,
        series: format!("{series}_slope"),
        stderr: None,
    })
}

fn drift_plot(data: &[csv::StringRecord]) -> Result<Vec<PlotRow>> {
    let mut by_k: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
    for (line, rec) in data.iter().enumerate() {
        let i: usize = field(rec, 0, line + 2)?;
        let n: usize = field(rec, 1, line + 2)?;
        let angle: f64 = field(rec, 2, line + 2)?;
        if n < i {
            return Err(config_err(format!("row {}: n < i", line + 2)));
        }
        if angle.is_finite() {
            by_k.entry(n - i).or_default().push(angle * angle);
        }
    }
    let mut rows = Vec::new();
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (k, sq) in by_k {
        let s = Summary::of(&sq).expect("nonempty group");
        let rms = s.mean.sqrt();
        let stderr = if rms > 0.0 { s.std_error() / (2.0 * rms) } else { 0.0 };
        rows.push(PlotRow {
            x: Some(k as f64),
            y: rms,
            series: "rms_angle".into(),
            stderr: Some(stderr),
        });
        if k > 0 && rms > 0.0 {
            lx.push((k as f64).ln());
            ly.push(rms.ln());
        }
    }
    rows.extend(slope_row("rms_angle", &lx, &ly));
    Ok(rows)
}

fn deviation_plot(data: &[csv::StringRecord]) -> Result<Vec<PlotRow>> {
    let mut series: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    let mut rows = Vec::new();
    for (line, rec) in data.iter().enumerate() {
        let name = rec.get(0).unwrap_or_default().to_string();
        let n: f64 = field(rec, 1, line + 2)?;
        let trials: f64 = field(rec, 2, line + 2)?;
        let dev: f64 = field(rec, 5, line + 2)?;
        if !(n > 0.0 && dev > 0.0 && dev.is_finite()) {
            continue;
        }
        let (x, y) = (n.ln(), dev.ln());
        rows.push(PlotRow {
            x: Some(x),
            y,
            series: name.clone(),
            stderr: (trials > 1.0).then(|| 1.0 / (2.0 * (trials - 1.0)).sqrt()),
        });
        match series.iter_mut().find(|s| s.0 == name) {
            Some(s) => {
                s.1.push(x);
                s.2.push(y);
            }
            None => series.push((name, vec![x], vec![y])),
        }
    }
    for (name, xs, ys) in &series {
        rows.extend(slope_row(name, xs, ys));
    }
    Ok(rows)
}

fn scatter_plot(data: &[csv::StringRecord]) -> Result<Vec<PlotRow>> {
    data.iter()
        .enumerate()
        .map(|(line, rec)| {
            let trials: f64 = field(rec, 3, line + 2)?;
            let std: f64 = field(rec, 6, line + 2)?;
            Ok(PlotRow {
                x: Some(field(rec, 4, line + 2)?),
                y: field(rec, 5, line + 2)?,
                series: rec.get(0).unwrap_or_default().to_string(),
                stderr: Some(std / trials.max(1.0).sqrt()),
            })
        })
        .collect()
}

fn gap_histogram(data: &[csv::StringRecord], bins: usize) -> Result<Vec<PlotRow>> {
    let mut gaps = Vec::new();
    for (line, rec) in data.iter().enumerate() {
        let gap: f64 = field(rec, 3, line + 2)?;
        let valid: bool = field(rec, 8, line + 2)?;
        if valid && gap.is_finite() {
            gaps.push(gap);
        }
    }
    if gaps.is_empty() {
        return Ok(Vec::new());
    }
    let lo = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for g in &gaps {
        let b = (((g - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(b, &count)| PlotRow {
            x: Some(lo + (b as f64 + 0.5) * width),
            y: count as f64,
            series: "gap".into(),
            stderr: Some((count as f64).sqrt()),
        })
        .collect())
}
