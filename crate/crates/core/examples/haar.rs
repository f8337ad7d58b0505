//! Haar-random orthogonal matrices and operators with prescribed spectra.

use supercon::randgen::{matrix_with_singular_values, random_orthogonal, Experiment, SingularSpectrum};

fn main() -> supercon::Result<()> {
    let mut rng = Experiment::new(0, "haar-example").rng(0);
    let q = random_orthogonal(5, &mut rng)?;
    let defect = (q.transpose() * &q - nalgebra::DMatrix::<f64>::identity(5, 5))
        .abs()
        .max();
    println!("‖QᵀQ − I‖_max = {defect:e}, det = {:.3}", q.determinant());

    let s = SingularSpectrum::new(vec![3.0, 2.0, 1.0, 0.5, 0.0])?;
    let t = matrix_with_singular_values(&s, &mut rng)?;
    println!("requested singular values {:?}", s.values());
    println!("recovered singular values {:.12?}", t.singular_values().as_slice());
    Ok(())
}
