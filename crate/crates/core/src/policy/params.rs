use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::PolicyError;
use crate::tokenizer::{init_token_embeddings, EmbeddingTable};

/// Rows in the synthetic base vocabulary that new token embeddings are drawn
/// from.
const BASE_VOCAB: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    /// `V × D`, tied input/output token embeddings.
    pub token_embeddings: EmbeddingTable,
    /// `D × F`, row-major.
    pub feature_weights: Vec<f64>,
    /// `D × D`, row-major.
    pub step_weights: Vec<f64>,
    /// Length `V`.
    pub output_bias: Vec<f64>,
    pub n_features: usize,
}

impl PolicyParams {
    pub fn zeros(vocab: usize, dim: usize, n_features: usize) -> Self {
        PolicyParams {
            token_embeddings: EmbeddingTable::zeros(vocab, dim),
            feature_weights: vec![0.0; dim * n_features],
            step_weights: vec![0.0; dim * dim],
            output_bias: vec![0.0; vocab],
            n_features,
        }
    }

    /// Random initialization. Token embeddings are sampled from the mean and
    /// covariance of a synthetic base vocabulary with entries of standard
    /// deviation `scale`; the dense weights are Gaussian with the same scale.
    pub fn init(vocab: usize, dim: usize, n_features: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, scale).expect("finite scale");
        let base = EmbeddingTable {
            rows: BASE_VOCAB,
            dim,
            data: (0..BASE_VOCAB * dim).map(|_| normal.sample(&mut rng)).collect(),
        };
        let token_embeddings = init_token_embeddings(&base, vocab, seed.wrapping_add(1)).expect("base vocabulary is well-formed");
        let feature_weights = (0..dim * n_features).map(|_| normal.sample(&mut rng)).collect();
        let step_weights = (0..dim * dim).map(|_| normal.sample(&mut rng)).collect();
        PolicyParams { token_embeddings, feature_weights, step_weights, output_bias: vec![0.0; vocab], n_features }
    }

    pub fn vocab(&self) -> usize {
        self.token_embeddings.rows
    }

    pub fn dim(&self) -> usize {
        self.token_embeddings.dim
    }

    pub fn zeros_like(&self) -> Self {
        PolicyParams::zeros(self.vocab(), self.dim(), self.n_features)
    }

    pub fn n_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    pub fn blocks(&self) -> [&[f64]; 4] {
        [&self.token_embeddings.data, &self.feature_weights, &self.step_weights, &self.output_bias]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.token_embeddings.data, &mut self.feature_weights, &mut self.step_weights, &mut self.output_bias]
    }

    /// Flat view index `i` over the blocks in declaration order.
    pub fn get(&self, mut i: usize) -> f64 {
        for b in self.blocks() {
            if i < b.len() {
                return b[i];
            }
            i -= b.len();
        }
        panic!("parameter index out of range")
    }

    pub fn set(&mut self, mut i: usize, v: f64) {
        for b in self.blocks_mut() {
            if i < b.len() {
                b[i] = v;
                return;
            }
            i -= b.len();
        }
        panic!("parameter index out of range")
    }

    /// `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &PolicyParams) {
        for (a, b) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += alpha * y;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for b in self.blocks_mut() {
            b.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks().iter().flat_map(|b| b.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|x| x.is_finite()))
    }

    /// `policy v1` text checkpoint.
    pub fn to_text(&self) -> String {
        let (v, d, f) = (self.vocab(), self.dim(), self.n_features);
        let mut out = format!("policy v1\nV={v} D={d} F={f}\n");
        let mut block = |name: &str, data: &[f64], cols: usize| {
            let _ = writeln!(out, "{name}");
            for row in data.chunks(cols.max(1)) {
                let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
        };
        block("token_embeddings", &self.token_embeddings.data, d);
        block("feature_weights", &self.feature_weights, f);
        block("step_weights", &self.step_weights, d);
        block("output_bias", &self.output_bias, v);
        out
    }

    pub fn from_text(text: &str) -> Result<Self, PolicyError> {
        let bad = |m: String| PolicyError::Checkpoint(m);
        let mut lines = text.lines();
        if lines.next() != Some("policy v1") {
            return Err(bad("missing `policy v1` header".into()));
        }
        let dims = lines.next().ok_or_else(|| bad("missing dimensions".into()))?;
        let mut vals = [0usize; 3];
        for (slot, (part, key)) in vals.iter_mut().zip(dims.split_whitespace().zip(["V=", "D=", "F="])) {
            *slot = part
                .strip_prefix(key)
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| bad(format!("bad dimension line {dims:?}")))?;
        }
        let [v, d, f] = vals;
        let mut p = PolicyParams::zeros(v, d, f);
        let names = ["token_embeddings", "feature_weights", "step_weights", "output_bias"];
        let mut rest: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
        rest.reverse();
        for (name, block) in names.into_iter().zip(p.blocks_mut()) {
            if rest.pop() != Some(name) {
                return Err(bad(format!("expected section {name}")));
            }
            let mut filled = 0;
            while filled < block.len() {
                let line = rest.pop().ok_or_else(|| bad(format!("section {name} truncated")))?;
                for tok in line.split_whitespace() {
                    let x: f64 = tok.parse().map_err(|_| bad(format!("bad number {tok:?} in {name}")))?;
                    *block.get_mut(filled).ok_or_else(|| bad(format!("section {name} too long")))? = x;
                    filled += 1;
                }
            }
        }
        if !rest.is_empty() {
            return Err(bad("trailing data".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        PolicyParams::from_text(&std::fs::read_to_string(path)?)
    }
}
