//! Dense Hermitian eigendecomposition and operator norms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance on `|M − M*|` entries accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Largest entrywise `|M_jk − conj M_kj|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for k in j..n {
            worst = worst.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    worst
}

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// as columns.
pub fn hermitian_eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigvals(m: &CMatrix) -> Result<Vec<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("eigendecomposition needs a square matrix"));
    }
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Seed used by [`operator_norm`].
pub const NORM_SEED: u64 = 0x5eed_0f_4e77;

/// Spectral norm `‖M‖₂` by power iteration on `M*M` from a seeded random
/// start, stopped at relative change `1e-10`.
pub fn operator_norm(m: &CMatrix) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
    let mut v = CVector::from_fn(n, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let nv = v.norm();
    v /= Complex64::new(nv, 0.0);
    let mh = m.adjoint();
    let mut lambda = 0.0f64;
    for _ in 0..20_000 {
        let w = &mh * (m * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = norm;
        v = w / Complex64::new(norm, 0.0);
        if (next - lambda).abs() <= 1e-10 * next {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda.sqrt()
}

/// `v* M v`.
pub fn quadratic_form(m: &CMatrix, v: &CVector) -> Complex64 {
    v.dotc(&(m * v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let mut m = CMatrix::identity(3, 3);
        m[(0, 1)] = Complex64::new(1e-6, 0.0);
        assert!(matches!(hermitian_eigh(&m), Err(Error::NotHermitian { .. })));
        assert!(hermitian_eigh(&CMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn eigenpairs_ascending_with_small_residual() {
        let n = 12;
        let m = CMatrix::from_fn(n, n, |i, j| {
            let (a, b) = (i as f64, j as f64);
            if i == j {
                Complex64::new(a, 0.0)
            } else {
                Complex64::new((a + b).cos(), (a - b).sin()) * 0.3
            }
        });
        let (vals, vecs) = hermitian_eigh(&m).unwrap();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        for (k, &lam) in vals.iter().enumerate() {
            let v = vecs.column(k).into_owned();
            let r = (&m * &v - &v * Complex64::new(lam, 0.0)).norm();
            assert!(r <= 1e-9 * (1.0 + lam.abs()));
        }
    }

    #[test]
    fn power_iteration_matches_svd() {
        let n = 9;
        let m = CMatrix::from_fn(n, n, |i, j| {
            Complex64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64)
        });
        let svd_max = m.clone().singular_values().max();
        assert!((operator_norm(&m) - svd_max).abs() <= 1e-8 * svd_max);
        assert_eq!(operator_norm(&CMatrix::zeros(4, 4)), 0.0);
    }
}
