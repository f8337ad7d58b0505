//! Fits how the spread of a Monte Carlo statistic shrinks with dimension.

use supercon::concentration::{fit_scaling, mc_sphere_displacement};
use supercon::randgen::Experiment;

fn main() -> supercon::Result<()> {
    let exp = Experiment::new(0, "scaling-example");
    let fit = fit_scaling(&[32, 128, 512], |n| {
        Ok(mc_sphere_displacement(&[0.2; 10], n, 2000, &exp.child(n as u64))?.empirical_std)
    })?;
    for (n, d) in fit.dims.iter().zip(&fit.deviations) {
        println!("N = {n:>4}: std {d:.5}");
    }
    println!("log-log slope {:.3} (1/√N gives −0.5)", fit.slope);
    Ok(())
}
