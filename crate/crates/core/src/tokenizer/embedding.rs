use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TokenizerError;

/// Diagonal jitter added to the sample covariance before factoring.
pub const COVARIANCE_EPS: f64 = 1e-8;

/// Row-major table of `rows` vectors of length `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub rows: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingTable { rows, dim, data: vec![0.0; rows * dim] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == dim), "ragged embedding rows");
        EmbeddingTable { rows: rows.len(), dim, data: rows.concat() }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.rows {
            for (a, v) in m.iter_mut().zip(self.row(i)) {
                *a += v;
            }
        }
        m.iter_mut().for_each(|a| *a /= self.rows as f64);
        m
    }

    /// Sample covariance with the n − 1 denominator, row-major `dim × dim`.
    pub fn covariance(&self) -> Vec<f64> {
        let m = self.mean();
        let d = self.dim;
        let mut c = vec![0.0; d * d];
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..d {
                let da = r[a] - m[a];
                for b in 0..d {
                    c[a * d + b] += da * (r[b] - m[b]);
                }
            }
        }
        let denom = (self.rows.max(2) - 1) as f64;
        c.iter_mut().for_each(|v| *v /= denom);
        c
    }
}

/// Draws `n_new` rows from a Gaussian with the sample mean and covariance of
/// `existing`. The covariance is jittered by [`COVARIANCE_EPS`] on the
/// diagonal; if the factorization still fails the jitter grows tenfold.
pub fn init_token_embeddings(
    existing: &EmbeddingTable,
    n_new: usize,
    seed: u64,
) -> Result<EmbeddingTable, TokenizerError> {
    if existing.rows < 2 || !existing.is_finite() {
        return Err(TokenizerError::DegenerateEmbeddings(existing.rows));
    }
    let d = existing.dim;
    let mean = DVector::from_vec(existing.mean());
    let cov = DMatrix::from_row_slice(d, d, &existing.covariance());

    let mut eps = COVARIANCE_EPS;
    let chol = loop {
        let reg = &cov + DMatrix::identity(d, d) * eps;
        if let Some(c) = reg.cholesky() {
            break c;
        }
        log::warn!("covariance not positive definite at jitter {eps:e}, increasing");
        eps *= 10.0;
    };
    let l = chol.l();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = EmbeddingTable::zeros(n_new, d);
    for i in 0..n_new {
        let z = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let x = &mean + &l * z;
        out.row_mut(i).copy_from_slice(x.as_slice());
    }
    Ok(out)
}
