use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative diagonal jitter added once when a factorization fails.
pub const JITTER_SCALE: f64 = 1e-8;

/// Cholesky factorization that retries once with `JITTER_SCALE * trace / n`
/// added to the diagonal. The flag reports whether the jitter was needed.
pub fn cholesky_with_jitter(m: DMatrix<f64>, what: &str) -> Result<(Cholesky<f64, Dyn>, bool)> {
    let n = m.nrows();
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok((c, false));
    }
    let bump = JITTER_SCALE * m.trace().abs().max(f64::MIN_POSITIVE) / n.max(1) as f64;
    let mut jittered = m;
    for i in 0..n {
        jittered[(i, i)] += bump;
    }
    Cholesky::new(jittered).map(|c| (c, true)).ok_or_else(|| Error::Numerical {
        what: format!("{what} is not positive definite"),
        jitter_retries: 1,
    })
}

pub fn standard_normals<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draws `N(mean, Q⁻¹)` given the Cholesky factor of the precision `Q`.
pub fn sample_with_precision<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    precision_factor: &Cholesky<f64, Dyn>,
    rng: &mut R,
) -> DVector<f64> {
    let mut z = standard_normals(mean.len(), rng);
    precision_factor.l_dirty().tr_solve_lower_triangular_mut(&mut z);
    z + mean
}

/// Smallest pivot of the Cholesky factorization, or `None` if it breaks down.
pub fn min_cholesky_pivot(m: &DMatrix<f64>) -> Option<f64> {
    let c = Cholesky::new(m.clone())?;
    let l = c.l_dirty();
    (0..m.nrows()).map(|i| l[(i, i)]).reduce(f64::min)
}

pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= rel_tol * scale))
}

/// Submatrix with the given row and column index sets.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let (_, jittered) = cholesky_with_jitter(m, "test").unwrap();
        assert!(jittered);
    }

    #[test]
    fn indefinite_matrix_reports_numerical_error() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]);
        match cholesky_with_jitter(m, "test") {
            Err(Error::Numerical { jitter_retries, .. }) => assert_eq!(jitter_retries, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn precision_sampling_matches_covariance() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, -0.8, -0.8, 1.0]);
        let cov = q.clone().try_inverse().unwrap();
        let chol = Cholesky::new(q).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mean = DVector::from_vec(vec![1.0, -1.0]);
        let n = 100_000;
        let mut acc = DMatrix::zeros(2, 2);
        let mut m = DVector::zeros(2);
        for _ in 0..n {
            let x = sample_with_precision(&mean, &chol, &mut rng);
            let d = &x - &mean;
            acc += &d * d.transpose();
            m += x;
        }
        acc /= n as f64;
        m /= n as f64;
        assert!((m - mean).amax() < 0.02);
        assert!((acc - cov).amax() < 0.03);
    }
}
