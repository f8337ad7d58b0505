//! Closed-form predictions for concentration of measure and the Monte Carlo
//! estimators that test them.
//!
//! Every `mc_*` estimator takes an [`Experiment`], runs its trials in
//! parallel with one random stream per trial, and summarizes the per-trial
//! statistic in trial order. Results therefore depend only on the seed, the
//! experiment name and the parameters.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::geometry::{prob_lp_norm, Vector};
use crate::randgen::{
    markov_step_unchecked, par_trials, unit_unchecked, Experiment, HaarOrthogonal, SingularSpectrum,
    SingularValueOperator, SymmetricOperator,
};
use crate::stats::{linear_fit, Summary};

/// A prediction next to the Monte Carlo summary of the quantity it predicts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionReport {
    pub conclusion_id: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    /// Trials that produced a value.
    pub trials: usize,
    /// Trials thrown away because the statistic was undefined.
    pub discarded: usize,
    pub predicted: f64,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    pub relative_error: f64,
    pub seed: u64,
}

pub const REPORT_HEADER: [&str; 9] = [
    "conclusion_id",
    "N",
    "M",
    "trials",
    "predicted",
    "mean",
    "std",
    "rel_err",
    "seed",
];

impl PredictionReport {
    pub fn new(
        conclusion_id: impl Into<String>,
        n: usize,
        m: usize,
        predicted: f64,
        samples: &[f64],
        discarded: usize,
        seed: u64,
    ) -> Result<Self> {
        let s = Summary::of(samples).ok_or(Error::NoValidTrials { total: discarded })?;
        Ok(Self {
            conclusion_id: conclusion_id.into(),
            n,
            m,
            trials: s.count,
            discarded,
            predicted,
            empirical_mean: s.mean,
            empirical_std: s.std,
            relative_error: relative_error(s.mean, predicted),
            seed,
        })
    }

    /// `std / |predicted|` (plain `std` when the prediction is 0), the
    /// deviation metric used for scaling fits.
    pub fn relative_std(&self) -> f64 {
        if self.predicted == 0.0 {
            self.empirical_std
        } else {
            self.empirical_std / self.predicted.abs()
        }
    }

    pub fn std_error(&self) -> f64 {
        self.empirical_std / (self.trials as f64).sqrt()
    }

    /// The report as a CSV record in [`REPORT_HEADER`] order.
    pub fn record(&self) -> [String; 9] {
        [
            self.conclusion_id.clone(),
            self.n.to_string(),
            self.m.to_string(),
            self.trials.to_string(),
            format!("{:e}", self.predicted),
            format!("{:e}", self.empirical_mean),
            format!("{:e}", self.empirical_std),
            format!("{:e}", self.relative_error),
            self.seed.to_string(),
        ]
    }
}

/// `|mean − predicted| / |predicted|`, or `|mean|` when the prediction is 0.
pub fn relative_error(mean: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        mean.abs()
    } else {
        (mean - predicted).abs() / predicted.abs()
    }
}

pub fn write_reports_csv<W: Write>(reports: &[PredictionReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REPORT_HEADER)?;
    for r in reports {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        Err(invalid("trials", "must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_dim_at_least(n: usize, min: usize) -> Result<()> {
    if n < min {
        Err(invalid("N", format!("must be at least {min}, got {n}")))
    } else {
        Ok(())
    }
}

fn collect_valid(values: Vec<Option<f64>>) -> (Vec<f64>, usize) {
    let total = values.len();
    let kept: Vec<f64> = values.into_iter().flatten().collect();
    let discarded = total - kept.len();
    (kept, discarded)
}

/// `√(Σ dᵢ²)`: the likely norm of a sum of randomly directed vectors of
/// norms `dᵢ`.
pub fn predict_sum_norm(d: &[f64]) -> Result<f64> {
    if d.is_empty() {
        return Err(invalid("d", "must be nonempty"));
    }
    if d.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(invalid("d", "entries must be finite and nonnegative"));
    }
    Ok(d.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// `‖Σ dᵢ uᵢ‖` with independent uniform unit `uᵢ`.
pub fn mc_sum_norm(d: &[f64], n: usize, trials: usize, exp: &Experiment) -> Result<PredictionReport> {
    let predicted = predict_sum_norm(d)?;
    check_dim_at_least(n, 2)?;
    check_trials(trials)?;
    let samples = par_trials(exp, trials, |rng, _| {
        let mut sum = Vector::zeros(n);
        for &di in d {
            sum.axpy(di, &unit_unchecked(n, rng), 1.0);
        }
        sum.norm()
    });
    PredictionReport::new("sum_norm", n, d.len(), predicted, &samples, 0, exp.master_seed)
}

/// `⟨u₁, u₂⟩` for independent uniform unit vectors; predicted 0.
pub fn mc_pair_inner_product(n: usize, trials: usize, exp: &Experiment) -> Result<PredictionReport> {
    check_dim_at_least(n, 2)?;
    check_trials(trials)?;
    let samples = par_trials(exp, trials, |rng, _| {
        unit_unchecked(n, rng).dot(&unit_unchecked(n, rng))
    });
    PredictionReport::new("sum_orthogonality", n, 2, 0.0, &samples, 0, exp.master_seed)
}

/// `2·(1 − Π(1 − dᵢ²/2))`: the likely squared distance covered by a sphere
/// chain with step lengths `dᵢ`.
pub fn predict_sphere_displacement_sq(d: &[f64]) -> Result<f64> {
    if d.iter().any(|x| !(0.0..=2.0).contains(x)) {
        return Err(invalid("d", "entries must lie in [0, 2]"));
    }
    let prod: f64 = d.iter().map(|x| 1.0 - 0.5 * x * x).product();
    Ok(2.0 * (1.0 - prod))
}

/// `‖u_M − u₀‖²` for the sphere chain with steps `d`.
pub fn mc_sphere_displacement(d: &[f64], n: usize, trials: usize, exp: &Experiment) -> Result<PredictionReport> {
    let predicted = predict_sphere_displacement_sq(d)?;
    check_dim_at_least(n, 3)?;
    check_trials(trials)?;
    let samples = par_trials(exp, trials, |rng, _| {
        let u0 = unit_unchecked(n, rng);
        let mut u = u0.clone();
        for &di in d {
            u = markov_step_unchecked(&u, di, rng);
        }
        (u - u0).norm_squared()
    });
    PredictionReport::new(
        "sphere_displacement",
        n,
        d.len(),
        predicted,
        &samples,
        0,
        exp.master_seed,
    )
}

/// Deviation of `(1/N)·YᵀY` from the identity for Gaussian `Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramReport {
    /// Per-trial mean of the diagonal entries; predicted 1.
    pub diagonal: PredictionReport,
    /// Entry `(0, 1)`; predicted 0 with std `1/√N`.
    pub off_diagonal: PredictionReport,
    /// Per-trial RMS of the off-diagonal entries; predicted `1/√N`.
    pub rms_off_diagonal: PredictionReport,
    /// Per-trial largest entrywise deviation from the identity.
    pub max_deviation: Summary,
    /// `⟨((1/N)YᵀY − 1)u, u⟩` for uniform unit `u`; predicted 0.
    pub quadratic_form: PredictionReport,
}

pub fn mc_gram_identity(n: usize, trials: usize, exp: &Experiment) -> Result<GramReport> {
    check_dim_at_least(n, 1)?;
    check_trials(trials)?;
    let rows = par_trials(exp, trials, |rng, _| {
        let y = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        let mut g = y.tr_mul(&y) / n as f64;
        for i in 0..n {
            g[(i, i)] -= 1.0;
        }
        let diag_mean = 1.0 + (0..n).map(|i| g[(i, i)]).sum::<f64>() / n as f64;
        let off = if n > 1 { g[(0, 1)] } else { 0.0 };
        let off_count = n * n - n;
        let rms_off = if n > 1 {
            let ss: f64 = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|(i, j)| i != j)
                .map(|(i, j)| g[(i, j)] * g[(i, j)])
                .sum();
            (ss / off_count as f64).sqrt()
        } else {
            0.0
        };
        let max_dev = g.abs().max();
        let u = if n > 1 {
            unit_unchecked(n, rng)
        } else {
            Vector::from_element(1, 1.0)
        };
        let quad = (&g * &u).dot(&u);
        [diag_mean, off, rms_off, max_dev, quad]
    });
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    let seed = exp.master_seed;
    let inv_sqrt = 1.0 / (n as f64).sqrt();
    Ok(GramReport {
        diagonal: PredictionReport::new("gram_diagonal", n, 1, 1.0, &col(0), 0, seed)?,
        off_diagonal: PredictionReport::new("gram_off_diagonal", n, 1, 0.0, &col(1), 0, seed)?,
        rms_off_diagonal: PredictionReport::new("gram_rms_off_diagonal", n, 1, inv_sqrt, &col(2), 0, seed)?,
        max_deviation: Summary::of(&col(3)).expect("trials >= 1"),
        quadratic_form: PredictionReport::new("gram_quadratic_form", n, 1, 0.0, &col(4), 0, seed)?,
    })
}

/// `‖s‖₂^(π) = (1/√N)‖T‖_HS`: the factor by which `T` likely scales a
/// random vector.
pub fn predict_action_norm(s: &SingularSpectrum) -> f64 {
    prob_lp_norm(s.values(), 2.0).expect("spectrum is nonempty and p = 2")
}

/// `(1/N)((‖s̃‖₄^(π))⁴ − 1)` with `s̃ = s/‖s‖₂^(π)`: the mean squared
/// inner-product distortion of `T / ‖s‖₂^(π)`.
pub fn predict_action_distortion(s: &SingularSpectrum) -> Result<f64> {
    let scale = predict_action_norm(s);
    if scale == 0.0 {
        return Err(invalid("s", "spectrum is identically zero"));
    }
    let n = s.dim() as f64;
    let q4 = s.values().iter().map(|x| (x / scale).powi(4)).sum::<f64>() / n;
    Ok((q4 - 1.0) / n)
}

/// Norm and orthogonality of a random matrix with given singular values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionReport {
    /// `‖Tu‖` for uniform unit `u`.
    pub norm: PredictionReport,
    /// `(⟨Tu, Tv⟩/‖s‖₂^(π)² − ⟨u, v⟩)²` for independent uniform `u`, `v`.
    pub distortion: PredictionReport,
}

pub fn mc_action_norm(s: &SingularSpectrum, trials: usize, exp: &Experiment) -> Result<ActionReport> {
    let n = s.dim();
    check_dim_at_least(n, 2)?;
    check_trials(trials)?;
    let predicted = predict_action_norm(s);
    let distortion = predict_action_distortion(s)?;
    let scale2 = predicted * predicted;
    let pairs = par_trials(exp, trials, |rng, _| {
        let t = SingularValueOperator::sample(s, rng).expect("dimension checked");
        let u = unit_unchecked(n, rng);
        let v = unit_unchecked(n, rng);
        let tu = t.apply(&u).expect("dimension checked");
        let tv = t.apply(&v).expect("dimension checked");
        let dist = tu.dot(&tv) / scale2 - u.dot(&v);
        (tu.norm(), dist * dist)
    });
    let norms: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let dists: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let seed = exp.master_seed;
    Ok(ActionReport {
        norm: PredictionReport::new("action_norm", n, 1, predicted, &norms, 0, seed)?,
        distortion: PredictionReport::new("action_distortion", n, 1, distortion, &dists, 0, seed)?,
    })
}

/// `(1/√N)‖S U S′‖_HS` for Haar `U` against `‖s‖₂^(π)·‖s′‖₂^(π)`.
pub fn mc_hs_product(
    s: &SingularSpectrum,
    s_prime: &SingularSpectrum,
    trials: usize,
    exp: &Experiment,
) -> Result<PredictionReport> {
    let n = s.dim();
    if s_prime.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: s_prime.dim(),
        });
    }
    check_trials(trials)?;
    let predicted = predict_action_norm(s) * predict_action_norm(s_prime);
    let samples = par_trials(exp, trials, |rng, _| {
        let u = HaarOrthogonal::sample(n, rng).expect("n >= 1").to_matrix();
        let mut ss = 0.0;
        for j in 0..n {
            for i in 0..n {
                let x = s.values()[i] * u[(i, j)] * s_prime.values()[j];
                ss += x * x;
            }
        }
        (ss / n as f64).sqrt()
    });
    PredictionReport::new("hs_product", n, 2, predicted, &samples, 0, exp.master_seed)
}

/// Likely squared distance between `v/‖v‖` and `Av/‖Av‖` for a random
/// symmetric `A` (or a product of independent ones) with the given spectra.
///
/// With `psd` set, every spectrum must be nonnegative and the value is
/// `2·(1 − Π ‖s⁽ⁱ⁾‖₁^(π)/‖s⁽ⁱ⁾‖₂^(π))`. Without it, a single spectrum of
/// signed eigenvalues gives `2·(1 − ((1/N)·tr A)/‖s‖₂^(π))`.
pub fn predict_rotation(eigs: &[Vec<f64>], psd: bool) -> Result<f64> {
    let first = eigs
        .first()
        .ok_or_else(|| invalid("eigs", "need at least one spectrum"))?;
    let n = first.len();
    if n == 0 {
        return Err(invalid("eigs", "spectra must be nonempty"));
    }
    for s in eigs {
        if s.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: s.len(),
            });
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(invalid("eigs", "entries must be finite"));
        }
        if s.iter().all(|x| *x == 0.0) {
            return Err(invalid("eigs", "spectrum is identically zero"));
        }
    }
    if psd {
        if eigs.iter().flatten().any(|x| *x < 0.0) {
            return Err(invalid("eigs", "negative eigenvalue with psd flag set"));
        }
        let prod: f64 = eigs
            .iter()
            .map(|s| prob_lp_norm(s, 1.0).unwrap() / prob_lp_norm(s, 2.0).unwrap())
            .product();
        Ok(2.0 * (1.0 - prod))
    } else {
        if eigs.len() != 1 {
            return Err(Error::Unsupported("products of operators with signed spectra"));
        }
        let trace = first.iter().sum::<f64>() / n as f64;
        Ok(2.0 * (1.0 - trace / prob_lp_norm(first, 2.0).unwrap()))
    }
}

/// `‖A_M⋯A₁v/‖A_M⋯A₁v‖ − v‖²` for uniform unit `v` and independent random
/// symmetric `Aᵢ = Uᵢᵀ·diag(s⁽ⁱ⁾)·Uᵢ`. Trials where the product annihilates
/// `v` are discarded and counted.
pub fn mc_rotation_product(eigs: &[SingularSpectrum], trials: usize, exp: &Experiment) -> Result<PredictionReport> {
    let raw: Vec<Vec<f64>> = eigs.iter().map(|s| s.values().to_vec()).collect();
    let predicted = predict_rotation(&raw, true)?;
    let n = raw[0].len();
    check_dim_at_least(n, 2)?;
    check_trials(trials)?;
    let values = par_trials(exp, trials, |rng, _| {
        let v = unit_unchecked(n, rng);
        let mut w = v.clone();
        for s in eigs {
            let a = SymmetricOperator::sample(s, rng).expect("dimension checked");
            w = a.apply(&w).expect("dimension checked");
        }
        let len = w.norm();
        (len > 0.0 && len.is_finite()).then(|| (w / len - &v).norm_squared())
    });
    let (kept, discarded) = collect_valid(values);
    let id = if eigs.len() == 1 {
        "rotation"
    } else {
        "rotation_product"
    };
    PredictionReport::new(id, n, eigs.len(), predicted, &kept, discarded, exp.master_seed)
}

/// Least-squares fit of `log(deviation)` against `log(N)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub dims: Vec<usize>,
    pub deviations: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// Evaluates `measure` at each dimension and fits the log-log slope.
/// Nonpositive or non-finite deviations are left out of the fit.
pub fn fit_scaling<F>(dims: &[usize], mut measure: F) -> Result<ScalingFit>
where
    F: FnMut(usize) -> Result<f64>,
{
    if dims.len() < 3 {
        return Err(invalid("dims", "need at least 3 dimensions"));
    }
    if let Some(&n) = dims.iter().find(|&&n| n < 16) {
        return Err(invalid("dims", format!("dimensions must be >= 16, got {n}")));
    }
    let mut deviations = Vec::with_capacity(dims.len());
    for &n in dims {
        deviations.push(measure(n)?);
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = dims
        .iter()
        .zip(&deviations)
        .filter(|(_, d)| d.is_finite() && **d > 0.0)
        .map(|(&n, d)| ((n as f64).ln(), d.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::TooFewPoints { usable: xs.len() });
    }
    let (slope, intercept) = linear_fit(&xs, &ys).ok_or(Error::TooFewPoints { usable: xs.len() })?;
    Ok(ScalingFit {
        dims: dims.to_vec(),
        deviations,
        slope,
        intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(name: &str) -> Experiment {
        Experiment::new(42, name)
    }

    #[test]
    fn sum_norm_predictions() {
        assert_eq!(predict_sum_norm(&[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(predict_sum_norm(&[2.5]).unwrap(), 2.5);
        assert_eq!(predict_sum_norm(&[1.0; 4]).unwrap(), 2.0);
        assert!(predict_sum_norm(&[-1.0]).is_err());
        assert!(predict_sum_norm(&[]).is_err());
    }

    #[test]
    fn single_vector_sum_is_exact() {
        let r = mc_sum_norm(&[1.0], 50, 200, &exp("single")).unwrap();
        assert!((r.empirical_mean - 1.0).abs() < 1e-15);
        assert!(r.empirical_std < 1e-15);
    }

    #[test]
    fn sum_norm_concentrates() {
        let r = mc_sum_norm(&[3.0, 4.0], 1000, 2000, &exp("sum")).unwrap();
        assert!(r.relative_error < 0.01, "{r:?}");
        assert!(r.relative_std() < 0.05);
    }

    #[test]
    fn random_directions_are_nearly_orthogonal() {
        let trials = 4000;
        let n = 200;
        let r = mc_pair_inner_product(n, trials, &exp("orth")).unwrap();
        assert!(r.empirical_mean.abs() < 3.0 / ((trials * n) as f64).sqrt());
    }

    #[test]
    fn sphere_predictions() {
        assert!((predict_sphere_displacement_sq(&[2f64.sqrt()]).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(predict_sphere_displacement_sq(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(predict_sphere_displacement_sq(&[1.0, 1.0]).unwrap(), 1.5);
        assert_eq!(predict_sphere_displacement_sq(&[2.0, 2.0]).unwrap(), 0.0);
        assert!(predict_sphere_displacement_sq(&[2.1]).is_err());
    }

    #[test]
    fn single_step_displacement_is_exact() {
        let r = mc_sphere_displacement(&[0.7], 30, 300, &exp("one")).unwrap();
        assert!((r.empirical_mean - 0.49).abs() < 1e-14);
        assert!(r.empirical_std < 1e-14);
        let r = mc_sphere_displacement(&[2.0, 2.0], 30, 50, &exp("two")).unwrap();
        assert!(r.empirical_mean < 1e-28);
    }

    #[test]
    fn gram_diagonal_and_off_diagonal() {
        let n = 64;
        let trials = 400;
        let g = mc_gram_identity(n, trials, &exp("gram")).unwrap();
        // The per-trial diagonal mean has std √(2/N)/√N.
        let se = (2.0 / n as f64).sqrt() / (n as f64).sqrt() / (trials as f64).sqrt();
        assert!((g.diagonal.empirical_mean - 1.0).abs() < 4.0 * se);
        assert!((g.off_diagonal.empirical_std * (n as f64).sqrt() - 1.0).abs() < 0.15);
        assert!(g.rms_off_diagonal.relative_error < 0.05);
        let one = mc_gram_identity(1, 4000, &exp("gram1")).unwrap();
        assert!((one.diagonal.empirical_mean - 1.0).abs() < 0.1);
    }

    #[test]
    fn action_predictions() {
        let n = 10;
        assert_eq!(predict_action_norm(&SingularSpectrum::constant(n, 1.0).unwrap()), 1.0);
        let mut s = vec![0.0; n];
        s[0] = 2.0;
        let v = predict_action_norm(&SingularSpectrum::new(s).unwrap());
        assert!((v - 2.0 / (n as f64).sqrt()).abs() < 1e-15);
        assert_eq!(predict_action_norm(&SingularSpectrum::constant(n, 0.3).unwrap()), 0.3);
        assert_eq!(
            predict_action_distortion(&SingularSpectrum::constant(n, 2.0).unwrap()).unwrap(),
            0.0
        );
    }

    #[test]
    fn orthogonal_action_is_exact() {
        let s = SingularSpectrum::constant(40, 1.0).unwrap();
        let r = mc_action_norm(&s, 50, &exp("ones")).unwrap();
        assert!((r.norm.empirical_mean - 1.0).abs() < 1e-10);
        assert!(r.norm.empirical_std < 1e-10);
        assert!(r.distortion.empirical_mean < 1e-20);
    }

    #[test]
    fn rotation_predictions() {
        let n = 100;
        assert_eq!(predict_rotation(&[vec![1.0; n]], true).unwrap(), 0.0);
        let mut p = vec![0.0; n];
        p[0] = 1.0;
        let r = predict_rotation(&[p.clone()], true).unwrap();
        assert!((r - 1.8).abs() < 1e-12);
        assert!(predict_rotation(&[vec![1.0, -1.0]], true).is_err());
        assert_eq!(predict_rotation(&[vec![1.0, -1.0]], false).unwrap(), 2.0);
        assert!(predict_rotation(&[vec![-1.0, -1.0]], false).unwrap() == 4.0);
        assert!(predict_rotation(&[vec![1.0, 2.0], vec![1.0]], true).is_err());
    }

    #[test]
    fn identity_rotation_is_zero() {
        let s = SingularSpectrum::constant(20, 1.0).unwrap();
        let r = mc_rotation_product(&[s], 50, &exp("id")).unwrap();
        assert!(r.empirical_mean < 1e-24);
    }

    #[test]
    fn zero_spectrum_discards_nothing_but_errors() {
        let s = SingularSpectrum::constant(5, 0.0).unwrap();
        assert!(mc_rotation_product(&[s], 5, &exp("zero")).is_err());
    }

    #[test]
    fn synthetic_scaling_fit() {
        let fit = fit_scaling(&[16, 64, 256, 1024], |n| Ok(3.0 / (n as f64).sqrt())).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit_scaling(&[16, 64], |_| Ok(1.0)).is_err());
        assert!(fit_scaling(&[8, 64, 256], |_| Ok(1.0)).is_err());
        let few = fit_scaling(&[16, 64, 256], |n| Ok(if n == 64 { 0.0 } else { 1.0 }));
        assert!(matches!(few, Err(Error::TooFewPoints { usable: 2 })));
    }

    #[test]
    fn reports_render_fixed_header() {
        let r = PredictionReport::new("x", 3, 1, 2.0, &[1.0, 3.0], 0, 9).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "conclusion_id,N,M,trials,predicted,mean,std,rel_err,seed\nx,3,1,2,2e0,2e0,1.4142135623730951e0,0e0,9\n"
        );
    }

    #[test]
    fn estimators_ignore_thread_count() {
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_sphere_displacement(&[0.1; 5], 20, 300, &exp("threads")).unwrap())
        };
        assert_eq!(run(1), run(3));
    }
}
