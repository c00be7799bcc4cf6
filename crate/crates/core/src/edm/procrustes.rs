//! Orthogonal Procrustes alignment of reconstructed relative coordinates onto
//! known microphone positions.

use nalgebra::{Matrix3, Vector3};

use super::PositionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// All input columns mapped into the absolute frame.
    pub positions: PositionMatrix,
    /// Orthogonal (possibly improper) part of the transform.
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    /// RMS distance between the aligned microphones and their known positions.
    pub rms_residual: f64,
}

impl Alignment {
    pub fn is_reflection(&self) -> bool {
        self.rotation.determinant() < 0.0
    }
}

/// Finds the orthogonal `Q` and translation `t` minimising
/// `Σ_m ‖Q·rel_m + t − mic_m‖²` over the first `known.len()` columns of
/// `relative`, then applies the transform to every column.
///
/// Reflections are allowed: relative coordinates from an eigendecomposition
/// carry an arbitrary handedness.
pub fn procrustes_align(relative: &PositionMatrix, known: &PositionMatrix) -> Result<Alignment> {
    let m = known.len();
    if relative.len() < m {
        return Err(Error::Dimension(format!(
            "relative set has {} points but {m} microphones must be aligned",
            relative.len()
        )));
    }
    if m < 3 || known.affine_rank(1e-9) < 2 {
        return Err(Error::DegenerateGeometry(
            "need at least three non-colinear microphone positions".into(),
        ));
    }

    let rel_mics = relative.head(m);
    let rel_c = rel_mics.centroid();
    let known_c = known.centroid();

    let mut cross = Matrix3::zeros();
    for (r, k) in rel_mics.points().zip(known.points()) {
        cross += (r - rel_c) * (k - known_c).transpose();
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => {
            return Err(Error::DegenerateGeometry(
                "SVD of the cross-covariance failed".into(),
            ))
        }
    };
    let rotation = v_t.transpose() * u.transpose();
    let translation = known_c - rotation * rel_c;

    let mapped: Vec<Vector3<f64>> = relative
        .points()
        .map(|p| rotation * p + translation)
        .collect();
    let positions = PositionMatrix::from_points(&mapped)?;
    let sq: f64 = mapped
        .iter()
        .zip(known.points())
        .map(|(a, b)| (a - b).norm_squared())
        .sum();
    Ok(Alignment {
        positions,
        rotation,
        translation,
        rms_residual: (sq / m as f64).sqrt(),
    })
}
