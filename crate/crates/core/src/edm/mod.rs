//! Euclidean distance matrix kernel.
//!
//! Squared-distance matrices over a microphone array plus one source, the
//! reference-centred Gram transform, a Jacobi eigen-solver for the small
//! symmetric matrices involved, reconstruction of relative coordinates from
//! the three leading eigenpairs, and orthogonal Procrustes alignment back
//! onto the known microphone positions.
//!
//! Index 0 is the reference microphone throughout.

pub(crate) mod eigen;
mod procrustes;

pub use eigen::{symmetric_eigendecompose, symmetric_eigenvalues, EigenDecomposition};
pub use procrustes::{procrustes_align, Alignment};

use nalgebra::{DMatrix, Matrix3xX, Vector3};

use crate::error::{Error, Result};

/// Coordinates of `N` points in metres, one column per point.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMatrix {
    coords: Matrix3xX<f64>,
}

impl PositionMatrix {
    pub fn new(coords: Matrix3xX<f64>) -> Result<Self> {
        if coords.ncols() == 0 {
            return Err(Error::InvalidInput(
                "position matrix needs at least one point".into(),
            ));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "position matrix contains non-finite coordinates".into(),
            ));
        }
        Ok(Self { coords })
    }

    pub fn from_points(points: &[Vector3<f64>]) -> Result<Self> {
        Self::new(Matrix3xX::from_columns(points))
    }

    pub fn from_arrays(points: &[[f64; 3]]) -> Result<Self> {
        let cols: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::from(*p)).collect();
        Self::from_points(&cols)
    }

    pub fn len(&self) -> usize {
        self.coords.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.ncols() == 0
    }

    pub fn coords(&self) -> &Matrix3xX<f64> {
        &self.coords
    }

    pub fn point(&self, i: usize) -> Vector3<f64> {
        self.coords.column(i).into_owned()
    }

    pub fn points(&self) -> impl Iterator<Item = Vector3<f64>> + '_ {
        self.coords.column_iter().map(|c| c.into_owned())
    }

    pub fn to_arrays(&self) -> Vec<[f64; 3]> {
        self.points().map(|p| [p.x, p.y, p.z]).collect()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.points().sum::<Vector3<f64>>() / self.len() as f64
    }

    /// Copy with `extra` appended as the last column.
    pub fn with_point(&self, extra: Vector3<f64>) -> PositionMatrix {
        let mut cols: Vec<Vector3<f64>> = self.points().collect();
        cols.push(extra);
        PositionMatrix {
            coords: Matrix3xX::from_columns(&cols),
        }
    }

    /// The first `n` columns.
    pub fn head(&self, n: usize) -> PositionMatrix {
        PositionMatrix {
            coords: self.coords.columns(0, n).into_owned(),
        }
    }

    /// Number of affinely independent directions spanned by the points
    /// (0 for a single point, 3 for a proper 3D configuration).
    pub fn affine_rank(&self, rel_tol: f64) -> usize {
        let c = self.centroid();
        let mut centred = self.coords.clone();
        for mut col in centred.column_iter_mut() {
            col -= c;
        }
        let scatter = &centred * centred.transpose();
        let sv = scatter.symmetric_eigenvalues();
        let max = sv.iter().cloned().fold(0.0_f64, f64::max);
        if max <= 0.0 {
            return 0;
        }
        sv.iter().filter(|&&v| v > rel_tol * max).count()
    }
}

/// Square matrix of squared pairwise distances (metres²).
///
/// For the localizer layout the first `M` rows/columns are microphones and
/// the last one is the source.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanDistanceMatrix {
    d2: DMatrix<f64>,
}

impl EuclideanDistanceMatrix {
    /// Validates symmetry, zero diagonal and non-negativity.
    pub fn from_matrix(d2: DMatrix<f64>) -> Result<Self> {
        if !d2.is_square() {
            return Err(Error::Dimension(format!(
                "EDM must be square, got {}x{}",
                d2.nrows(),
                d2.ncols()
            )));
        }
        let n = d2.nrows();
        let scale = d2.amax().max(1.0);
        for i in 0..n {
            if d2[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "EDM diagonal entry {i} is {}",
                    d2[(i, i)]
                )));
            }
            for j in 0..n {
                let v = d2[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "EDM entry ({i},{j}) = {v} is not a squared distance"
                    )));
                }
                if (v - d2[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::NotSymmetric((v - d2[(j, i)]).abs()));
                }
            }
        }
        Ok(Self { d2 })
    }

    /// EDM of an arbitrary point set.
    pub fn from_points(points: &PositionMatrix) -> Self {
        let n = points.len();
        let d2 = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                0.0
            } else {
                (points.coords.column(i) - points.coords.column(j)).norm_squared()
            }
        });
        Self { d2 }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.d2
    }

    pub fn dim(&self) -> usize {
        self.d2.nrows()
    }
}

/// Builds the `(M+1)×(M+1)` EDM from known microphone positions and the
/// source-to-microphone distances `d_1..d_M`.
pub fn build_edm(
    mics: &PositionMatrix,
    source_distances: &[f64],
) -> Result<EuclideanDistanceMatrix> {
    let m = mics.len();
    if m < 4 {
        return Err(Error::InvalidInput(format!(
            "need at least 4 microphones, got {m}"
        )));
    }
    if source_distances.len() != m {
        return Err(Error::Dimension(format!(
            "{} source distances for {m} microphones",
            source_distances.len()
        )));
    }
    if let Some(d) = source_distances
        .iter()
        .find(|d| !d.is_finite() || **d < 0.0)
    {
        return Err(Error::InvalidInput(format!(
            "source distance {d} is negative or non-finite"
        )));
    }
    let mut d2 = DMatrix::zeros(m + 1, m + 1);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = (mics.coords.column(i) - mics.coords.column(j)).norm_squared();
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
        let s = source_distances[i] * source_distances[i];
        d2[(i, m)] = s;
        d2[(m, i)] = s;
    }
    Ok(EuclideanDistanceMatrix { d2 })
}

/// Gram matrix of positions relative to the point at `reference_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    g: DMatrix<f64>,
    reference_index: usize,
}

impl GramMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn reference_index(&self) -> usize {
        self.reference_index
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// `G = -½ (I − 1eᵀ) D (I − e1ᵀ)` with `e` selecting `reference_index`.
///
/// Evaluated entry-wise as `G_ij = -½ (D_ij − D_rj − D_ir + D_rr)`, which makes
/// the reference row and column exactly zero.
pub fn edm_to_gram(edm: &EuclideanDistanceMatrix, reference_index: usize) -> Result<GramMatrix> {
    let d = &edm.d2;
    if !d.is_square() {
        return Err(Error::Dimension("EDM must be square".into()));
    }
    let n = d.nrows();
    if reference_index >= n {
        return Err(Error::InvalidInput(format!(
            "reference index {reference_index} out of range for {n} points"
        )));
    }
    let r = reference_index;
    let g = DMatrix::from_fn(n, n, |i, j| {
        -0.5 * (d[(i, j)] - d[(r, j)] - d[(i, r)] + d[(r, r)])
    });
    Ok(GramMatrix { g, reference_index })
}

/// What to do with a retained eigenvalue that is negative beyond the clamp
/// tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeEigenvalues {
    /// Treat as an inconsistent EDM and fail.
    Reject,
    /// Zero-fill the corresponding coordinate row.
    Clamp,
}

/// Relative coordinates `[diag(√λ₁..√λ₃) | 0] Uᵀ` from the three leading
/// (signed) eigenpairs.
///
/// Eigenvalues in `[-ε, 0)` with `ε = 1e-8·max(1, λ₁)` are treated as zero;
/// anything more negative is an error.
pub fn reconstruct_relative_positions(eig: &EigenDecomposition) -> Result<PositionMatrix> {
    reconstruct_with(eig, NegativeEigenvalues::Reject).map(|(p, _)| p)
}

/// As [`reconstruct_relative_positions`] with a selectable policy. The flag is
/// true when any retained eigenvalue had to be zeroed beyond the tolerance.
pub fn reconstruct_with(
    eig: &EigenDecomposition,
    policy: NegativeEigenvalues,
) -> Result<(PositionMatrix, bool)> {
    let n = eig.eigenvalues.len();
    if n < 3 {
        return Err(Error::Dimension(format!(
            "need at least 3 eigenvalues, got {n}"
        )));
    }
    let tol = 1e-8 * eig.eigenvalues[0].max(1.0);
    let mut clamped = false;
    let mut coords = Matrix3xX::zeros(n);
    for row in 0..3 {
        let lambda = eig.eigenvalues[row];
        let lambda = if lambda >= 0.0 {
            lambda
        } else if lambda >= -tol {
            0.0
        } else {
            match policy {
                NegativeEigenvalues::Reject => {
                    return Err(Error::NegativeEigenvalue {
                        value: lambda,
                        tolerance: tol,
                    });
                }
                NegativeEigenvalues::Clamp => {
                    clamped = true;
                    0.0
                }
            }
        };
        let scale = lambda.sqrt();
        for col in 0..n {
            coords[(row, col)] = scale * eig.eigenvectors[(col, row)];
        }
    }
    Ok((PositionMatrix { coords }, clamped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> PositionMatrix {
        let pts: Vec<Vector3<f64>> = (0..n)
            .map(|_| {
                Vector3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-2.0..2.0),
                )
            })
            .collect();
        PositionMatrix::from_points(&pts).unwrap()
    }

    #[test]
    fn position_matrix_rejects_empty_and_nan() {
        assert!(PositionMatrix::new(Matrix3xX::zeros(0)).is_err());
        assert!(PositionMatrix::from_arrays(&[[0.0, f64::NAN, 0.0]]).is_err());
    }

    #[test]
    fn tetrahedron_edm_has_uniform_entries() {
        let s = 1.0 / 2f64.sqrt();
        let mics = PositionMatrix::from_arrays(&[
            [1.0, 0.0, -s],
            [-1.0, 0.0, -s],
            [0.0, 1.0, s],
            [0.0, -1.0, s],
        ])
        .unwrap();
        let edge = 2.0;
        let edm = build_edm(&mics, &[edge; 4]).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let expect = if i == j { 0.0 } else { edge * edge };
                assert!((edm.matrix()[(i, j)] - expect).abs() < 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn source_at_reference() {
        let mics = PositionMatrix::from_arrays(&[
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        let edm = build_edm(&mics, &[0.0, 1.0, 1.0, 1.0]).unwrap();
        let last: Vec<f64> = edm.matrix().column(4).iter().copied().collect();
        assert_eq!(last, vec![0.0, 1.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn build_edm_matches_pairwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let all = random_points(&mut rng, 7);
        let mics = all.head(6);
        let src = all.point(6);
        let dists: Vec<f64> = mics.points().map(|m| (m - src).norm()).collect();
        let edm = build_edm(&mics, &dists).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let a = all.point(i);
                let b = all.point(j);
                let oracle = (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2);
                assert!((edm.matrix()[(i, j)] - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn build_edm_errors() {
        let mics = PositionMatrix::from_arrays(&[
            [0.0; 3],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(matches!(
            build_edm(&mics, &[1.0; 3]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            build_edm(&mics, &[1.0, -0.1, 1.0, 1.0]),
            Err(Error::InvalidInput(_))
        ));
        assert!(build_edm(&mics.head(3), &[1.0; 3]).is_err());
    }

    #[test]
    fn edm_from_matrix_validates() {
        assert!(EuclideanDistanceMatrix::from_matrix(DMatrix::zeros(2, 3)).is_err());
        let bad = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(matches!(
            EuclideanDistanceMatrix::from_matrix(bad),
            Err(Error::NotSymmetric(_))
        ));
        let neg = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(EuclideanDistanceMatrix::from_matrix(neg).is_err());
    }

    #[test]
    fn gram_of_unit_pair() {
        let edm = EuclideanDistanceMatrix::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, 1.0, 0.0],
        ))
        .unwrap();
        let g = edm_to_gram(&edm, 0).unwrap();
        assert_eq!(
            g.matrix(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn gram_matches_matrix_product_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_points(&mut rng, 5);
        let edm = EuclideanDistanceMatrix::from_points(&p);
        for r in 0..5 {
            let g = edm_to_gram(&edm, r).unwrap();
            // -½ (I − 1eᵀ) D (I − e1ᵀ)
            let n = 5;
            let mut e = nalgebra::DVector::zeros(n);
            e[r] = 1.0;
            let ones = nalgebra::DVector::from_element(n, 1.0);
            let left = DMatrix::identity(n, n) - &ones * e.transpose();
            let right = DMatrix::identity(n, n) - &e * ones.transpose();
            let oracle: DMatrix<f64> = (left * edm.matrix() * right) * -0.5;
            assert!((g.matrix() - &oracle).norm() < 1e-10);
            // P_relᵀ P_rel
            let origin = p.point(r);
            let mut rel = p.coords().clone();
            for mut c in rel.column_iter_mut() {
                c -= origin;
            }
            let direct = rel.transpose() * rel;
            assert!((g.matrix() - direct).norm() < 1e-10);
            for k in 0..n {
                assert_eq!(g.matrix()[(r, k)], 0.0);
                assert_eq!(g.matrix()[(k, r)], 0.0);
            }
        }
    }

    #[test]
    fn gram_reference_out_of_range() {
        let edm = EuclideanDistanceMatrix::from_points(
            &PositionMatrix::from_arrays(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap(),
        );
        assert!(edm_to_gram(&edm, 2).is_err());
    }

    #[test]
    fn colinear_reconstruction_has_one_row() {
        let p = PositionMatrix::from_arrays(&[[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [3.0, 3.0, 0.0]])
            .unwrap();
        let g = edm_to_gram(&EuclideanDistanceMatrix::from_points(&p), 0).unwrap();
        let eig = symmetric_eigendecompose(g.matrix()).unwrap();
        let rel = reconstruct_relative_positions(&eig).unwrap();
        assert!(rel.coords().row(0).norm() > 1.0);
        assert!(rel.coords().row(1).norm() < 1e-7);
        assert!(rel.coords().row(2).norm() < 1e-7);
    }

    #[test]
    fn round_trip_reproduces_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let all = random_points(&mut rng, 7);
            let mics = all.head(6);
            let src = all.point(6);
            let dists: Vec<f64> = mics.points().map(|m| (m - src).norm()).collect();
            let edm = build_edm(&mics, &dists).unwrap();
            let g = edm_to_gram(&edm, 0).unwrap();
            let eig = symmetric_eigendecompose(g.matrix()).unwrap();
            let rel = reconstruct_relative_positions(&eig).unwrap();
            let back = EuclideanDistanceMatrix::from_points(&rel);
            assert!((back.matrix() - edm.matrix()).amax() < 1e-8);
            assert!(rel.point(0).norm() < 1e-7);
        }
    }

    #[test]
    fn exact_rank_three_injection() {
        // U diag(5,3,2,0,0,0,0) Uᵀ built from a random orthonormal basis.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(7, 7, |_, _| rng.random_range(-1.0..1.0));
        let q = a.qr().q();
        let lam = nalgebra::DVector::from_vec(vec![5.0, 3.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let g = &q * DMatrix::from_diagonal(&lam) * q.transpose();
        let g = (&g + g.transpose()) * 0.5;
        let eig = symmetric_eigendecompose(&g).unwrap();
        let rel = reconstruct_relative_positions(&eig).unwrap();
        let rebuilt = rel.coords().transpose() * rel.coords();
        assert!((rebuilt - g).norm() < 1e-10);
    }

    #[test]
    fn strongly_negative_eigenvalue_is_rejected_or_clamped() {
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, -0.5, 0.0]));
        let eig = symmetric_eigendecompose(&g).unwrap();
        // descending signed order puts 0 ahead of -0.5, so the third kept value is 0
        assert!(reconstruct_relative_positions(&eig).is_ok());
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, -1.0, -0.5]));
        let eig = symmetric_eigendecompose(&g).unwrap();
        assert!(matches!(
            reconstruct_relative_positions(&eig),
            Err(Error::NegativeEigenvalue { .. })
        ));
        let (p, clamped) = reconstruct_with(&eig, NegativeEigenvalues::Clamp).unwrap();
        assert!(clamped);
        assert_eq!(p.coords().row(1).norm(), 0.0);
        // tiny negative values within tolerance pass
        let g = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![4.0, 1.0, -1e-9]));
        let eig = symmetric_eigendecompose(&g).unwrap();
        assert!(reconstruct_relative_positions(&eig).is_ok());
    }
}
