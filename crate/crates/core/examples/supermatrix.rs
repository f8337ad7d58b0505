//! Builds a superiorization matrix and inspects its telescoping identity,
//! increments and column limits.

use supercon::feasibility::{Nonascent, PerturbationSchedule};
use supercon::geometry::Vector;
use supercon::linsup::gen_problem;
use supercon::randgen::Experiment;
use supercon::supermatrix::{build, SETTLE_TOL};

fn main() -> supercon::Result<()> {
    let mut rng = Experiment::new(3, "supermatrix-example").rng(0);
    let p = gen_problem(30, 5, 0.1, &mut rng)?;
    let sched = PerturbationSchedule::default();
    let m = build(
        &p.operators(),
        &Vector::zeros(30),
        &sched,
        &Nonascent(p.target().clone()),
        40,
    )?;

    let worst = (0..=40)
        .map(|n| m.telescoping_residual(n, p.target()))
        .collect::<supercon::Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    println!("largest telescoping residual: {worst:e}");

    for k in [5, 10, 20, 40] {
        let inc = m.increment(k, 5)?;
        println!(
            "Δ({k},5): norm {:.4e}, angle to v_5 {:.4}",
            inc.delta.norm(),
            m.angle_drift(5, k)?
        );
    }
    for k in 0..6 {
        let lim = m.column_limit(k, SETTLE_TOL)?;
        println!(
            "column {k}: φ at depth {} = {:.5}, settled {}",
            lim.depth,
            p.target().c.dot(&lim.point),
            lim.settled
        );
    }
    Ok(())
}
