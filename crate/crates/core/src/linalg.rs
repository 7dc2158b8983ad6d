//! Small dense linear algebra used for compliance matrices (at most 3×3).

use nalgebra::DMatrix;

/// Smallest singular value below which a compliance matrix is treated as singular.
pub const SINGULARITY_THRESHOLD: f64 = 1e-9;

/// Induced ℓ∞ operator norm: the largest absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(f64::INFINITY, f64::min)
}

/// Inverse used to map ITT means to structural means.
///
/// Square matrices use the ordinary inverse. Tall matrices (more
/// recommendations than treatments) use the least-squares left inverse
/// `(PᵀP)⁻¹Pᵀ`, which coincides with the inverse in the square case.
/// Returns `None` when the matrix is wide or σ_min ≤ [`SINGULARITY_THRESHOLD`].
pub fn identification_inverse(p: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if p.nrows() < p.ncols() || sigma_min(p) <= SINGULARITY_THRESHOLD {
        return None;
    }
    if p.is_square() {
        p.clone().try_inverse()
    } else {
        let gram = p.transpose() * p;
        gram.try_inverse().map(|g| g * p.transpose())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn inf_norm_is_max_row_sum() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.5]);
        assert_abs_diff_eq!(inf_norm(&m), 3.0);
    }

    #[test]
    fn weak_two_by_two_inverse_has_norm_ten() {
        let p = DMatrix::from_row_slice(2, 2, &[0.55, 0.45, 0.45, 0.55]);
        let inv = identification_inverse(&p).unwrap();
        assert_abs_diff_eq!(inf_norm(&inv), 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sigma_min(&p), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn singular_and_wide_matrices_have_no_inverse() {
        let p = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        assert!(identification_inverse(&p).is_none());
        let wide = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        assert!(identification_inverse(&wide).is_none());
    }

    #[test]
    fn left_inverse_recovers_identity() {
        let p = DMatrix::from_row_slice(3, 2, &[0.55, 0.45, 0.45, 0.55, 0.0, 1.0]);
        let left = identification_inverse(&p).unwrap();
        let id = &left * &p;
        assert_abs_diff_eq!((id - DMatrix::identity(2, 2)).abs().max(), 0.0, epsilon = 1e-12);
        // rows of a left inverse of a row-stochastic matrix sum to one
        for row in left.row_iter() {
            assert_abs_diff_eq!(row.sum(), 1.0, epsilon = 1e-12);
        }
    }
}
