//! Projections onto the supported convex bodies and the curvature of an
//! ellipse at its vertex.

use supercon::geometry::{
    curvature_operator, distance, project, Ball, ConvexBody, Ellipsoid, HalfSpace, HalfSpaceSet, Vector,
};

fn main() -> supercon::Result<()> {
    let x = Vector::from_vec(vec![3.0, 1.0]);

    let ball = ConvexBody::Ball(Ball::centered(2, 1.0)?);
    let ellipse = ConvexBody::Ellipsoid(Ellipsoid::centered(Vector::from_vec(vec![2.0, 1.0]))?);
    let box_corner = ConvexBody::HalfSpaces(HalfSpaceSet::new(vec![
        HalfSpace::new(Vector::from_vec(vec![1.0, 0.0]), 1.0)?,
        HalfSpace::new(Vector::from_vec(vec![0.0, 1.0]), 0.5)?,
    ])?);

    for (name, body) in [("ball", &ball), ("ellipse", &ellipse), ("quadrant", &box_corner)] {
        let p = project(&x, body)?;
        println!(
            "{name:>8}: P(x) = ({:.6}, {:.6}), dist = {:.6}",
            p[0],
            p[1],
            distance(&x, body)?
        );
    }

    // Semi-axes a = 2, b = 1: curvature a/b² = 2 at (0, ±1) and b/a² = 1/4 at (±2, 0).
    let vertex = Vector::from_vec(vec![2.0, 0.0]);
    let kappa = curvature_operator(&ellipse, &vertex)?;
    println!("principal curvature at (2, 0): {:?}", kappa.principal_curvatures());
    Ok(())
}
