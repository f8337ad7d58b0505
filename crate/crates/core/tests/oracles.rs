//! Distributional checks of the samplers and estimators against closed forms
//! computed independently of the library.

use rand::Rng;
use statrs::distribution::{Beta, ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;
use supercon::concentration::{
    mc_action_norm, mc_rotation_product, mc_sphere_displacement, mc_sum_norm, PredictionReport,
};
use supercon::randgen::{gaussian_vector, random_orthogonal, uniform_sphere, Experiment, RngStream, SingularSpectrum};
use supercon::stats::{ks_statistic, Summary};

/// Kolmogorov critical value at level 0.001.
fn ks_limit(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

fn within_se(r: &PredictionReport, truth: f64, k: f64) {
    let se = r.empirical_std / (r.trials as f64).sqrt();
    assert!(
        (r.empirical_mean - truth).abs() <= k * se,
        "{}: mean {} vs {truth}, se {se}",
        r.conclusion_id,
        r.empirical_mean
    );
}

#[test]
fn sphere_coordinate_is_beta() {
    let n = 10;
    let mut rng = RngStream::new(11, 0).rng();
    let xs: Vec<f64> = (0..4000)
        .map(|_| uniform_sphere(n, &mut rng).unwrap()[0].powi(2))
        .collect();
    let beta = Beta::new(0.5, (n as f64 - 1.0) / 2.0).unwrap();
    assert!(ks_statistic(&xs, |x| beta.cdf(x)) < ks_limit(xs.len()));
}

#[test]
fn gaussian_norm_is_chi_squared() {
    let n = 7;
    let mut rng = RngStream::new(12, 0).rng();
    let xs: Vec<f64> = (0..4000)
        .map(|_| gaussian_vector(n, &mut rng).unwrap().norm_squared())
        .collect();
    let chi = ChiSquared::new(n as f64).unwrap();
    assert!(ks_statistic(&xs, |x| chi.cdf(x)) < ks_limit(xs.len()));
}

#[test]
fn haar_column_is_uniform_and_determinant_is_balanced() {
    let n = 6;
    let mut rng = RngStream::new(13, 0).rng();
    let mut entries = Vec::new();
    let mut traces_sq = Vec::new();
    let mut positive = 0usize;
    let trials = 3000;
    for _ in 0..trials {
        let q = random_orthogonal(n, &mut rng).unwrap();
        entries.push(q[(2, 4)].powi(2));
        traces_sq.push(q.trace().powi(2));
        if q.determinant() > 0.0 {
            positive += 1;
        }
    }
    let beta = Beta::new(0.5, (n as f64 - 1.0) / 2.0).unwrap();
    assert!(ks_statistic(&entries, |x| beta.cdf(x)) < ks_limit(trials));
    // E[tr(Q)²] = 1 on the full orthogonal group.
    let s = Summary::of(&traces_sq).unwrap();
    assert!((s.mean - 1.0).abs() < 4.0 * s.std_error(), "{s:?}");
    let frac = positive as f64 / trials as f64;
    assert!((frac - 0.5).abs() < 4.0 * (0.25 / trials as f64).sqrt(), "{frac}");
}

#[test]
fn stream_first_coordinates_are_uncorrelated() {
    let draws: Vec<Vec<f64>> = (0..100u64)
        .map(|s| {
            let mut rng = RngStream::new(99, s).rng();
            (0..1000).map(|_| rng.random::<f64>()).collect()
        })
        .collect();
    let corr = |a: &[f64], b: &[f64]| {
        let (ma, mb) = (a.iter().sum::<f64>() / 1000.0, b.iter().sum::<f64>() / 1000.0);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    };
    let worst = draws.windows(2).map(|w| corr(&w[0], &w[1]).abs()).fold(0.0, f64::max);
    assert!(worst < 0.1, "{worst}");
}

#[test]
fn sum_norm_squared_mean_is_exact() {
    // E‖Σ dᵢuᵢ‖² = Σ dᵢ² for independent uniform directions.
    let r = mc_sum_norm(&[3.0, 4.0, 12.0], 200, 20_000, &Experiment::new(5, "oracle")).unwrap();
    let n = r.trials as f64;
    let mean_sq = r.empirical_mean.powi(2) + r.empirical_std.powi(2) * (n - 1.0) / n;
    let se = 2.0 * r.empirical_mean * r.empirical_std / n.sqrt();
    assert!((mean_sq - 169.0).abs() < 4.0 * se, "{mean_sq} se {se}");
}

#[test]
fn sphere_displacement_mean_is_exact() {
    // E⟨u_M, u₀⟩ = Π(1 − dᵢ²/2) holds exactly for the step chain.
    let d = [0.3, 0.5, 1.1, 0.2];
    let r = mc_sphere_displacement(&d, 40, 20_000, &Experiment::new(6, "oracle")).unwrap();
    let truth = 2.0 * (1.0 - d.iter().map(|x| 1.0 - x * x / 2.0).product::<f64>());
    within_se(&r, truth, 4.0);
}

#[test]
fn action_distortion_mean_is_exact() {
    let mut rng = RngStream::new(7, 0).rng();
    let s: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..2.0)).collect();
    let l2 = (s.iter().map(|x| x * x).sum::<f64>() / 50.0).sqrt();
    let l4 = s.iter().map(|x| (x / l2).powi(4)).sum::<f64>() / 50.0;
    let truth = (l4 - 1.0) / 50.0;
    let r = mc_action_norm(
        &SingularSpectrum::new(s).unwrap(),
        20_000,
        &Experiment::new(7, "oracle"),
    )
    .unwrap();
    within_se(&r.distortion, truth, 4.0);
    assert!((r.distortion.predicted - truth).abs() < 1e-15);
}

#[test]
fn rank_one_rotation_matches_exact_expectation() {
    // A v/‖A v‖ = ±u, so the squared shift is 2 − 2|⟨u, v⟩| with
    // E|⟨u, v⟩| = Γ(N/2) / (√π Γ((N+1)/2)).
    for n in [10usize, 100] {
        let mut s = vec![0.0; n];
        s[0] = 1.0;
        let r = mc_rotation_product(
            &[SingularSpectrum::new(s).unwrap()],
            20_000,
            &Experiment::new(8, "oracle"),
        )
        .unwrap();
        let nf = n as f64;
        let abs_mean = (ln_gamma(nf / 2.0) - ln_gamma((nf + 1.0) / 2.0)).exp() / std::f64::consts::PI.sqrt();
        within_se(&r, 2.0 - 2.0 * abs_mean, 4.0);
        assert!((r.predicted - 2.0 * (1.0 - 1.0 / nf.sqrt())).abs() < 1e-14);
    }
}
