//! The projection derivative against finite differences, the mean-value
//! identity along a segment, and a cascade through several balls.

use supercon::geometry::{Ball, ConvexBody, Ellipsoid, Vector};
use supercon::projder::{
    cascade_norm_prediction, cascade_rotation_prediction, finite_difference, mc_cascade, mean_value_check, CascadeLink,
    CascadePath, ProjectionDerivative,
};
use supercon::randgen::{uniform_sphere, Experiment};

fn main() -> supercon::Result<()> {
    let body = ConvexBody::Ellipsoid(Ellipsoid::centered(Vector::from_vec(vec![2.0, 1.0, 0.5]))?);
    let x = Vector::from_vec(vec![2.5, 1.5, -1.0]);
    let w = Vector::from_vec(vec![0.3, -0.7, 0.2]);
    let pd = ProjectionDerivative::new(&body, &x)?;
    let dp = pd.apply(&w)?;
    let fd = finite_difference(&body, &x, &w, 1e-5)?;
    println!("DP·w        = {:.8?}", dp.as_slice());
    println!("finite diff = {:.8?}", fd.as_slice());
    println!("DP·radial   = {:e}", pd.apply(pd.radial_dir())?.norm());

    let x1 = Vector::from_vec(vec![3.0, 0.5, -1.2]);
    println!("mean-value residual: {:e}", mean_value_check(&body, &x, &x1, 64)?);

    let n = 100;
    let path = CascadePath::uniform(4, n, 0.5, 1.0)?;
    println!(
        "cascade of 4 unit balls at distance 0.5: norm ratio {:.5}, rotation {:.5}",
        cascade_norm_prediction(&path),
        cascade_rotation_prediction(&path)
    );
    let chain = vec![
        CascadeLink {
            body: ConvexBody::Ball(Ball::centered(n, 1.0)?),
            distance: 0.5,
        };
        4
    ];
    let exp = Experiment::new(0, "projder-example");
    let w0 = uniform_sphere(n, &mut exp.rng(0))?;
    let r = mc_cascade(&chain, &w0, 500, &exp.child(1))?;
    println!(
        "Monte Carlo: norm ratio {:.5}, squared shift {:.5}",
        r.norm.empirical_mean, r.rotation.empirical_mean
    );
    Ok(())
}
