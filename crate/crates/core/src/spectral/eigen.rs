//! Smallest eigenpairs of a sparse symmetric positive semi-definite matrix.
//!
//! Two independent routes: a dense direct solver for small matrices, and a
//! block Lanczos iteration on the shift-inverted operator `(L + σI)⁻¹` with
//! full reorthogonalization and thick restarts for everything else. The
//! block size lets the iteration resolve eigenvalues of multiplicity up to
//! the block width, which symmetric meshes routinely produce.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::debug;

use super::cholesky::EnvelopeCholesky;
use super::{SparseMatrix, SpectralError};

/// Matrices up to this size use the dense solver under [`EigenMethod::Auto`].
pub const DENSE_LIMIT: usize = 512;
/// Required residual `‖Lv − λv‖` for every returned unit eigenvector.
pub const RESIDUAL_TOL: f64 = 1e-6;

const CONVERGED_TOL: f64 = 1e-8;
const SHIFT: f64 = 1e-3;
const BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

/// The `m` smallest eigenpairs in ascending order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `n × m`, unit-norm columns.
    pub eigenvectors: DMatrix<f64>,
    pub mean: f64,
    /// Population standard deviation of `eigenvalues`.
    pub std_dev: f64,
}

impl Spectrum {
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: DMatrix<f64>) -> Self {
        let (mean, std_dev) = mean_std(&eigenvalues);
        Self {
            eigenvalues,
            eigenvectors,
            mean,
            std_dev,
        }
    }

    /// Spectrum of eigenvalues only (no vectors), for `predict_k` studies.
    pub fn from_values(eigenvalues: Vec<f64>) -> Self {
        Self::from_parts(eigenvalues, DMatrix::zeros(0, 0))
    }

    pub fn window(&self) -> usize {
        self.eigenvalues.len()
    }
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// The `m` smallest eigenpairs of the symmetric PSD matrix `l`.
pub fn eigendecompose(l: &SparseMatrix, m: usize, seed: u64) -> Result<Spectrum, SpectralError> {
    eigendecompose_with(l, m, seed, EigenMethod::Auto)
}

pub fn eigendecompose_with(
    l: &SparseMatrix,
    m: usize,
    seed: u64,
    method: EigenMethod,
) -> Result<Spectrum, SpectralError> {
    let n = l.dim();
    if m == 0 || m > n {
        return Err(SpectralError::InvalidWindow { m, n });
    }
    let use_dense = match method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => n <= DENSE_LIMIT,
    };
    let (values, mut vectors) = if use_dense {
        dense_smallest(l, m)
    } else {
        lanczos_smallest(l, m, seed)?
    };
    for mut col in vectors.column_iter_mut() {
        canonical_sign(col.as_mut_slice());
    }
    Ok(Spectrum::from_parts(values, vectors))
}

/// Flip so the largest-magnitude entry (lowest index on ties) is positive.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() + 1e-12 {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn dense_smallest(l: &SparseMatrix, m: usize) -> (Vec<f64>, DMatrix<f64>) {
    let dense = l.to_dense();
    let sym = (&dense + dense.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values = order[..m].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(l.dim(), m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

struct ShiftInvert {
    chol: EnvelopeCholesky,
    work: Vec<f64>,
}

fn lanczos_smallest(l: &SparseMatrix, m: usize, seed: u64) -> Result<(Vec<f64>, DMatrix<f64>), SpectralError> {
    let n = l.dim();
    let chol = EnvelopeCholesky::factor(l, SHIFT).map_err(|e| SpectralError::Factorization {
        row: e.row,
        pivot: e.pivot,
    })?;
    debug!(n, envelope = chol.envelope_size(), "factored shifted laplacian");
    let mut op = ShiftInvert {
        chol,
        work: Vec::with_capacity(n),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let block = BLOCK.min(m);
    // Whole blocks only: a restart continues from the images of one full
    // block, and a partial block would drop Krylov directions.
    let round_up = |x: usize| x.div_ceil(block) * block;
    let capacity = round_up(m + m.max(3 * block)).min(n);
    let keep = round_up(m + block).min(capacity);
    let max_restarts = 10 * m;

    let mut basis = DMatrix::<f64>::zeros(n, capacity);
    let mut images = DMatrix::<f64>::zeros(n, capacity);
    // Projection of the operator onto the basis.
    let mut h = DMatrix::<f64>::zeros(capacity, capacity);
    let mut p = 0;
    let mut pending: Vec<DVector<f64>> = (0..block).map(|_| random_vector(n, &mut rng)).collect();
    let mut best_residual = f64::INFINITY;

    for restart in 0..=max_restarts {
        while p < capacity {
            let take = pending.len().min(capacity - p);
            let norms: Vec<f64> = pending[..take].iter().map(|x| x.norm()).collect();
            let mut block_x = DMatrix::from_columns(&pending[..take]);
            pending.clear();
            if p > 0 {
                let q = basis.columns(0, p);
                for _ in 0..2 {
                    let c = q.tr_mul(&block_x);
                    block_x -= &q * c;
                }
            }
            let block_start = p;
            for (j, &before) in norms.iter().enumerate() {
                let mut x = block_x.column(j).into_owned();
                if p > block_start {
                    let q = basis.columns(block_start, p - block_start);
                    for _ in 0..2 {
                        let c = q.tr_mul(&x);
                        x -= &q * c;
                    }
                }
                let after = x.norm();
                if after <= 1e-10 * before {
                    continue;
                }
                basis.set_column(p, &(x / after));
                p += 1;
            }
            if p == block_start {
                // Invariant subspace reached; restart the sequence elsewhere.
                pending = (0..block).map(|_| random_vector(n, &mut rng)).collect();
                continue;
            }
            let mut solved = basis.columns(block_start, p - block_start).into_owned();
            op.chol.solve_many_in_place(solved.as_mut_slice(), &mut op.work);
            images.columns_mut(block_start, p - block_start).copy_from(&solved);
            let cross = basis.columns(0, p).tr_mul(&images.columns(block_start, p - block_start));
            for j in block_start..p {
                for i in 0..p {
                    h[(i, j)] = cross[(i, j - block_start)];
                    h[(j, i)] = cross[(i, j - block_start)];
                }
            }
            pending = (block_start..p).map(|j| images.column(j).into_owned()).collect();
        }

        // Rayleigh–Ritz. The largest θ of (L + σI)⁻¹ belong to the smallest λ of L.
        let eig = SymmetricEigen::new(h.view((0, 0), (p, p)).clone_owned());
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let select = |count: usize| DMatrix::from_fn(p, count, |r, c| eig.eigenvectors[(r, order[c])]);

        let y = select(m);
        let ritz = basis.columns(0, p) * &y;
        let mut values = Vec::with_capacity(m);
        let mut worst: f64 = 0.0;
        for c in 0..m {
            let x = ritz.column(c);
            let lx = DVector::from_vec(l.mul_vec(x.as_slice()));
            let lambda = x.dot(&lx);
            worst = worst.max((lx - x * lambda).norm());
            values.push(lambda);
        }
        best_residual = best_residual.min(worst);
        if worst <= CONVERGED_TOL || p == n || (restart == max_restarts && worst <= RESIDUAL_TOL) {
            if worst > RESIDUAL_TOL {
                break;
            }
            debug!(restart, basis = p, worst, "shift-invert lanczos converged");
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
            let vals = idx.iter().map(|&i| values[i]).collect();
            let vecs = DMatrix::from_fn(n, m, |r, c| ritz[(r, idx[c])]);
            return Ok((vals, vecs));
        }

        // Thick restart: keep the leading Ritz vectors and continue the
        // Krylov sequence from the last block's images.
        let current = basis.columns(0, p);
        let mut next = DMatrix::from_columns(&pending);
        for _ in 0..2 {
            let c = current.tr_mul(&next);
            next -= &current * c;
        }
        pending = next.column_iter().map(|c| c.into_owned()).collect();
        let kept = keep.min(p);
        let yk = select(kept);
        let new_basis = basis.columns(0, p) * &yk;
        let new_images = images.columns(0, p) * &yk;
        basis.columns_mut(0, kept).copy_from(&new_basis);
        images.columns_mut(0, kept).copy_from(&new_images);
        h.fill(0.0);
        for (c, &col) in order[..kept].iter().enumerate() {
            h[(c, c)] = eig.eigenvalues[col];
        }
        p = kept;
    }
    Err(SpectralError::NoConvergence {
        residual: best_residual,
    })
}

fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}
