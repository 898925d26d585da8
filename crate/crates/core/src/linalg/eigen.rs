//! Smallest eigenpairs of a sparse symmetric-definite pencil `K v = λ M v`
//! by block inverse (subspace) iteration with Rayleigh–Ritz projection.
//! The block carries enough extra vectors to resolve multiple eigenvalues.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{BandLayout, BandedCholesky, Csr};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// `M`-orthonormal eigenvectors, one per value.
    pub vectors: Vec<Vec<f64>>,
    /// `‖K v − λ M v‖ / (λ ‖M v‖)` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

const MAX_ITERS: usize = 500;

fn columns_to_dense(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols[0].len();
    DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// `k` smallest eigenpairs of `K v = λ M v` with both matrices symmetric
/// positive definite.
pub fn smallest_generalized_eigenpairs(k_mat: &Csr, m_mat: &Csr, k: usize, tol: f64) -> Result<EigenPairs> {
    let n = k_mat.nrows;
    assert!(k >= 1 && k <= n, "requested {k} eigenpairs of a {n}x{n} pencil");
    let layout = BandLayout::rcm(k_mat);
    let chol = BandedCholesky::factor(&layout, k_mat)?;
    let p = (2 * k + 8).min(n);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut block: Vec<Vec<f64>> =
        (0..p).map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();

    let mut worst = f64::INFINITY;
    for iter in 1..=MAX_ITERS {
        let y: Vec<Vec<f64>> = block.iter().map(|x| chol.solve(&m_mat.mul_vec(x))).collect();
        let ky: Vec<Vec<f64>> = y.iter().map(|v| k_mat.mul_vec(v)).collect();
        let my: Vec<Vec<f64>> = y.iter().map(|v| m_mat.mul_vec(v)).collect();
        let (yd, kyd, myd) = (columns_to_dense(&y), columns_to_dense(&ky), columns_to_dense(&my));
        let kr = yd.transpose() * &kyd;
        let mr = yd.transpose() * &myd;
        let kr = 0.5 * (&kr + kr.transpose());
        let mr = 0.5 * (&mr + mr.transpose());
        let l = mr
            .cholesky()
            .ok_or_else(|| Error::SolverBreakdown("subspace lost rank".into()))?
            .l();
        let linv = l.clone().try_inverse().ok_or_else(|| Error::SolverBreakdown("subspace lost rank".into()))?;
        let reduced = &linv * kr * linv.transpose();
        let eig = SymmetricEigen::new(0.5 * (&reduced + reduced.transpose()));
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let coeffs = linv.transpose() * &eig.eigenvectors;

        let ritz = |c: usize| -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
            let col = coeffs.column(c);
            let v = (&yd * col).as_slice().to_vec();
            let kv = (&kyd * col).as_slice().to_vec();
            let mv = (&myd * col).as_slice().to_vec();
            (eig.eigenvalues[c], v, kv, mv)
        };
        let mut values = Vec::with_capacity(k);
        let mut vectors = Vec::with_capacity(k);
        let mut residuals = Vec::with_capacity(k);
        let mut next_block = Vec::with_capacity(p);
        for (rank, &c) in order.iter().enumerate() {
            let (lam, v, kv, mv) = ritz(c);
            if rank < k {
                let r: f64 = kv.iter().zip(&mv).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt();
                let mn: f64 = mv.iter().map(|x| x * x).sum::<f64>().sqrt();
                residuals.push(r / (lam.abs() * mn));
                values.push(lam);
                vectors.push(v.clone());
            }
            next_block.push(v);
        }
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= tol {
            return Ok(EigenPairs { values, vectors, residuals, iterations: iter });
        }
        block = next_block;
    }
    Err(Error::ConvergenceFailure { iterations: MAX_ITERS, residual: worst })
}
