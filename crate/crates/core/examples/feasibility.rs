//! Cyclic and simultaneous projection methods on a ball/half-space pair,
//! with and without bounded perturbations.

use supercon::feasibility::{
    run_basic, run_superiorized, Nonascent, OperatorSequence, PerturbationSchedule, SquaredNorm, StoppingRule,
};
use supercon::geometry::{Ball, ConvexBody, HalfSpace, HalfSpaceSet, Vector};

fn main() -> supercon::Result<()> {
    let bodies = vec![
        ConvexBody::Ball(Ball::new(Vector::from_vec(vec![2.0, 0.0]), 1.5)?),
        ConvexBody::HalfSpaces(HalfSpaceSet::new(vec![HalfSpace::from_unnormalized(
            Vector::from_vec(vec![-1.0, -1.0]),
            -1.0,
        )?])?),
    ];
    let x0 = Vector::from_vec(vec![-3.0, 4.0]);
    let stop = StoppingRule::default();

    for seq in [
        OperatorSequence::cyclic(bodies.clone())?,
        OperatorSequence::simultaneous_uniform(bodies.clone())?,
    ] {
        let basic = run_basic(&seq, &x0, &stop)?;
        let sup = run_superiorized(
            &seq,
            &x0,
            &PerturbationSchedule::default(),
            &Nonascent(SquaredNorm),
            &stop,
        )?;
        println!("{:?}", seq.mode());
        println!(
            "  basic        x = ({:.5}, {:.5})  ‖x‖² = {:.5}  iterations {}",
            basic.final_point[0],
            basic.final_point[1],
            basic.final_point.norm_squared(),
            basic.iterations
        );
        println!(
            "  superiorized x = ({:.5}, {:.5})  ‖x‖² = {:.5}  iterations {}",
            sup.final_point[0],
            sup.final_point[1],
            sup.final_point.norm_squared(),
            sup.iterations
        );
    }
    Ok(())
}
