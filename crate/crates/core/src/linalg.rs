//! Small dense complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Dense complex matrix used throughout the crate.
pub type CMat = DMatrix<Complex64>;

/// Relative tolerance used when counting nonzero singular values.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-8;

/// Scale-aware singular value threshold: `relative * max(sigma_max, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance {
    pub relative: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self {
            relative: DEFAULT_RANK_TOLERANCE,
        }
    }
}

impl RankTolerance {
    pub fn threshold(&self, sigma_max: f64) -> f64 {
        self.relative * sigma_max.max(1.0)
    }
}

/// Singular values in descending order. Empty matrices have none.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.singular_values().iter().copied().collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Number of singular values at or above the tolerance threshold.
pub fn numeric_rank(a: &CMat, tol: RankTolerance) -> usize {
    let sv = singular_values(a);
    let Some(&largest) = sv.first() else {
        return 0;
    };
    let cut = tol.threshold(largest);
    sv.iter().filter(|&&s| s >= cut).count()
}

/// Returns true when `a` has full column rank under `tol`.
pub fn has_full_column_rank(a: &CMat, tol: RankTolerance) -> bool {
    a.ncols() <= a.nrows() && numeric_rank(a, tol) == a.ncols()
}

pub fn is_finite(a: &CMat) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eigen_ascending(q: &CMat) -> (Vec<f64>, CMat) {
    let n = q.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    // Symmetrize to suppress round-off drift away from Hermitian.
    let herm = (q + q.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Orthonormal basis of the eigenvectors belonging to the `count` smallest eigenvalues.
pub fn least_dominant_eigenvectors(q: &CMat, count: usize) -> CMat {
    let (_, vectors) = hermitian_eigen_ascending(q);
    vectors.columns(0, count).into_owned()
}

/// Matrix with i.i.d. circularly symmetric complex Gaussian entries of unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * scale, im * scale)
    })
}

/// Orthonormalizes the columns of a tall matrix (thin QR, `Q` factor).
pub fn orthonormalize(a: &CMat) -> CMat {
    if a.ncols() == 0 {
        return a.clone();
    }
    let qr = a.clone().qr();
    qr.q().columns(0, a.ncols()).into_owned()
}

/// Squared Frobenius norm.
pub fn frob2(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Determinant of a matrix that is exactly a signed permutation (every row and
/// column has one entry equal to `+1` or `-1`, all others exactly zero).
/// Returns `None` for any other matrix.
pub fn signed_permutation_det(a: &CMat) -> Option<i64> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut perm = vec![usize::MAX; n];
    let mut col_used = vec![false; n];
    let mut sign = 1i64;
    for r in 0..n {
        for c in 0..n {
            let z = a[(r, c)];
            if z == Complex64::new(0.0, 0.0) {
                continue;
            }
            if z.im != 0.0 || z.re.abs() != 1.0 || perm[r] != usize::MAX || col_used[c] {
                return None;
            }
            perm[r] = c;
            col_used[c] = true;
            if z.re < 0.0 {
                sign = -sign;
            }
        }
        if perm[r] == usize::MAX {
            return None;
        }
    }
    // Parity from cycle decomposition.
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    Some(sign)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn rank_of_identity_and_zero() {
        let eye = CMat::identity(3, 3);
        assert_eq!(numeric_rank(&eye, RankTolerance::default()), 3);
        assert_eq!(
            numeric_rank(&CMat::zeros(3, 3), RankTolerance::default()),
            0
        );
        assert_eq!(
            numeric_rank(&CMat::zeros(0, 4), RankTolerance::default()),
            0
        );
    }

    #[test]
    fn rank_of_outer_product_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = complex_gaussian(4, 1, &mut rng);
        let y = complex_gaussian(4, 1, &mut rng);
        let outer = &x * y.adjoint();
        assert_eq!(numeric_rank(&outer, RankTolerance::default()), 1);
    }

    #[test]
    fn tolerance_is_floored_at_one() {
        // A tiny matrix is still rank one: 1e-6 >= 1e-8 * max(1e-6, 1).
        let a = CMat::from_element(1, 1, c(1e-6));
        assert_eq!(numeric_rank(&a, RankTolerance::default()), 1);
        let b = CMat::from_element(1, 1, c(1e-9));
        assert_eq!(numeric_rank(&b, RankTolerance::default()), 0);
    }

    #[test]
    fn eigenvectors_of_diagonal() {
        let q = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c(3.0), c(1.0), c(2.0)]));
        let (vals, _) = hermitian_eigen_ascending(&q);
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        let v = least_dominant_eigenvectors(&q, 1);
        assert!((v[(1, 0)].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn orthonormalize_gives_orthonormal_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = complex_gaussian(5, 3, &mut rng);
        let q = orthonormalize(&a);
        let gram = q.adjoint() * &q;
        assert!((gram - CMat::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn signed_permutation_determinant() {
        let mut p = CMat::zeros(3, 3);
        p[(0, 1)] = c(-1.0);
        p[(1, 0)] = c(-1.0);
        p[(2, 2)] = c(-1.0);
        // One transposition (sign -1) times (-1)^3.
        assert_eq!(signed_permutation_det(&p), Some(1));
        p[(2, 2)] = c(0.5);
        assert_eq!(signed_permutation_det(&p), None);
        assert_eq!(signed_permutation_det(&CMat::identity(4, 4)), Some(1));
    }
}
