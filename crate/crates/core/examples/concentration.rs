//! Monte Carlo means against concentration-of-measure predictions.

use supercon::concentration::{
    mc_action_norm, mc_rotation_product, mc_sphere_displacement, mc_sum_norm, PredictionReport,
};
use supercon::randgen::{Experiment, SingularSpectrum};

fn show(r: &PredictionReport) {
    println!(
        "{:<20} N={:<4} M={:<2} predicted {:>9.5}  mean {:>9.5} ± {:.5}",
        r.conclusion_id,
        r.n,
        r.m,
        r.predicted,
        r.empirical_mean,
        r.std_error()
    );
}

fn main() -> supercon::Result<()> {
    let exp = Experiment::new(0, "concentration-example");
    show(&mc_sum_norm(&[3.0, 4.0, 12.0], 500, 2000, &exp.child(0))?);
    show(&mc_sphere_displacement(&[0.1; 20], 300, 2000, &exp.child(1))?);

    let s = SingularSpectrum::new((0..200).map(|i| 2.0 * i as f64 / 199.0).collect())?;
    let action = mc_action_norm(&s, 500, &exp.child(2))?;
    show(&action.norm);
    show(&action.distortion);

    let chain: Vec<SingularSpectrum> = (1..=3)
        .map(|k| SingularSpectrum::new((0..200).map(|i| ((i * k) % 7) as f64).collect()))
        .collect::<supercon::Result<_>>()?;
    show(&mc_rotation_product(&chain, 500, &exp.child(3))?);
    Ok(())
}
