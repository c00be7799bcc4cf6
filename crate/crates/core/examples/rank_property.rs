//! The EDM of microphones plus source has a Gram matrix of rank ≤ 3; the
//! leading eigenpairs recover the geometry up to a rigid motion, which
//! Procrustes alignment removes.

use edmloc::edm::{
    build_edm, edm_to_gram, procrustes_align, reconstruct_relative_positions,
    symmetric_eigendecompose, PositionMatrix,
};
use nalgebra::Vector3;

fn main() -> edmloc::Result<()> {
    let mics = PositionMatrix::from_arrays(&[
        [2.1, 2.4, 0.3],
        [3.9, 2.0, 0.9],
        [2.6, 3.8, 0.4],
        [3.3, 3.1, 2.1],
        [2.2, 2.9, 1.6],
        [3.7, 3.6, 1.2],
    ])?;
    let source = Vector3::new(3.0, 4.4, 1.3);
    let d: Vec<f64> = mics.points().map(|m| (m - source).norm()).collect();

    let edm = build_edm(&mics, &d)?;
    let gram = edm_to_gram(&edm, 0)?;
    let eig = symmetric_eigendecompose(gram.matrix())?;
    println!("Gram eigenvalues:");
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        println!("  λ{} = {l:+.3e}", i + 1);
    }
    let tail: f64 = eig.eigenvalues.iter().skip(3).map(|l| l.abs()).sum();
    println!("tail / λ1 = {:.3e}", tail / eig.eigenvalues[0]);

    let relative = reconstruct_relative_positions(&eig)?;
    let al = procrustes_align(&relative.head(mics.len()), &mics)?;
    let s = al.rotation * relative.point(mics.len()) + al.translation;
    println!(
        "alignment rms {:.2e} m (reflection: {})",
        al.rms_residual,
        al.is_reflection()
    );
    println!(
        "recovered source [{:.6}, {:.6}, {:.6}], error {:.2e} m",
        s.x,
        s.y,
        s.z,
        (s - source).norm()
    );
    Ok(())
}
