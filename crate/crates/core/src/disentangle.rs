//! Input embeddings (identity, Hadamard, random symmetric), their left
//! inverses, and the first disentanglement step: recovering the coding
//! matrix `C1 = W1 * C0` from a model whose inputs were embedded by `C0`.

use serde::{Deserialize, Serialize};

use crate::formula::Formula;
use crate::matrix::Matrix;
use crate::patterns::{self, PatternHistogram};
use crate::rng::{mix, rng_from};
use crate::trainer::MlpModel;
use crate::{Error, Result};
use rand::Rng;

const INVERSE_TOL: f64 = 1e-10;
const MIN_SINGULAR: f64 = 1e-3;
const REGEN_CAP: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Identity,
    Hadamard,
    RandomSymmetric,
}

impl std::fmt::Display for EmbeddingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbeddingKind::Identity => write!(f, "identity"),
            EmbeddingKind::Hadamard => write!(f, "hadamard"),
            EmbeddingKind::RandomSymmetric => write!(f, "random_symmetric"),
        }
    }
}

/// A fixed, square, invertible input embedding with its cached left inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    kind: EmbeddingKind,
    matrix: Matrix,
    left_inv: Matrix,
}

impl Embedding {
    /// Build the embedding for `kind` at width `n`. `seed` only matters for
    /// the random symmetric kind.
    pub fn build(kind: EmbeddingKind, n: usize, seed: u64) -> Result<Self> {
        let matrix = match kind {
            EmbeddingKind::Identity => Matrix::identity(n),
            EmbeddingKind::Hadamard => hadamard_matrix(n)?,
            EmbeddingKind::RandomSymmetric => random_symmetric_embedding(n, seed)?,
        };
        Embedding::from_matrix(kind, matrix)
    }

    pub fn from_matrix(kind: EmbeddingKind, matrix: Matrix) -> Result<Self> {
        let left_inv = left_inverse(kind, &matrix)?;
        let check = left_inv.matmul(&matrix)?;
        let err = check.max_abs_diff(&Matrix::identity(matrix.cols()));
        if err > 1e-8 {
            return Err(Error::Argument(format!(
                "left inverse check failed: max abs error {err:e}"
            )));
        }
        Ok(Embedding { kind, matrix, left_inv })
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn left_inv(&self) -> &Matrix {
        &self.left_inv
    }

    pub fn width(&self) -> usize {
        self.matrix.rows()
    }

    /// Embed a 0/1 input vector.
    pub fn embed(&self, input: &[u8]) -> Vec<f64> {
        if self.kind == EmbeddingKind::Identity {
            return input.iter().map(|&b| b as f64).collect();
        }
        let x: Vec<f64> = input.iter().map(|&b| b as f64).collect();
        self.matrix.matvec(&x)
    }
}

// Model files store only the kind and matrix; the inverse is rebuilt on load.
#[derive(Serialize, Deserialize)]
struct EmbeddingWire {
    kind: EmbeddingKind,
    matrix: Matrix,
}

impl Serialize for Embedding {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        EmbeddingWire { kind: self.kind, matrix: self.matrix.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Embedding {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let wire = EmbeddingWire::deserialize(d)?;
        Embedding::from_matrix(wire.kind, wire.matrix).map_err(serde::de::Error::custom)
    }
}

/// Sylvester-construction Hadamard matrix; `n` must be a power of two.
/// Entries are exactly +/-1 and `H * H^T = n * I` holds in exact arithmetic.
pub fn hadamard_matrix(n: usize) -> Result<Matrix> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Argument(format!("Hadamard size must be a power of 2, got {n}")));
    }
    let mut h = Matrix::from_rows(vec![vec![1.0]])?;
    let mut size = 1;
    while size < n {
        let mut next = Matrix::zeros(size * 2, size * 2);
        for r in 0..size {
            for c in 0..size {
                let v = h.get(r, c);
                next.set(r, c, v);
                next.set(r, c + size, v);
                next.set(r + size, c, v);
                next.set(r + size, c + size, -v);
            }
        }
        h = next;
        size *= 2;
    }
    Ok(h)
}

/// Symmetric matrix with i.i.d. Uniform(-1,1) upper triangle mirrored,
/// regenerated with a fresh seed stream until it is comfortably invertible.
pub fn random_symmetric_embedding(n: usize, seed: u64) -> Result<Matrix> {
    if n == 0 {
        return Err(Error::Argument("embedding width must be positive".into()));
    }
    for attempt in 0..REGEN_CAP as u64 {
        let mut rng = rng_from(mix(seed, attempt));
        let mut m = Matrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let v = rng.gen_range(-1.0..1.0);
                m.set(r, c, v);
                m.set(c, r, v);
            }
        }
        if let Ok(est) = m.min_singular_estimate(1e-14) {
            if est > MIN_SINGULAR {
                return Ok(m);
            }
        }
    }
    Err(Error::Generation(format!(
        "no well-conditioned symmetric embedding after {REGEN_CAP} regenerations"
    )))
}

/// Left inverse of a square embedding matrix. Identity short-circuits;
/// Hadamard uses `H^T / n`; anything else goes through pivoted elimination.
pub fn left_inverse(kind: EmbeddingKind, matrix: &Matrix) -> Result<Matrix> {
    match kind {
        EmbeddingKind::Identity => Ok(Matrix::identity(matrix.rows())),
        EmbeddingKind::Hadamard => {
            let n = matrix.rows() as f64;
            let mut t = matrix.transpose();
            for v in t.data_mut() {
                *v /= n;
            }
            Ok(t)
        }
        EmbeddingKind::RandomSymmetric => matrix.inverse(INVERSE_TOL),
    }
}

/// First disentanglement step: the coding matrix `C1 = W1 * C0`. With an
/// identity embedding this is exactly `W1`.
pub fn disentangle_layer1(model: &MlpModel) -> Result<Matrix> {
    if model.embedding.kind() == EmbeddingKind::Identity {
        return Ok(model.w1.clone());
    }
    model.w1.matmul(model.embedding.matrix())
}

/// Pattern census on an arbitrary coding matrix, using the model's witness
/// partition. With an identity embedding and `c1 = W1` this coincides with
/// `patterns::count_patterns`.
pub fn census_on_matrix(
    c1: &Matrix,
    model: &MlpModel,
    formula: &Formula,
) -> Result<PatternHistogram> {
    let partition = patterns::witness_partition(model);
    patterns::census(c1, formula, &partition.positive_rows, &partition.negative_rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_base_case() {
        let h = hadamard_matrix(2).unwrap();
        assert_eq!(h.row(0), &[1.0, 1.0]);
        assert_eq!(h.row(1), &[1.0, -1.0]);
        assert!(hadamard_matrix(3).is_err());
        assert!(hadamard_matrix(0).is_err());
    }

    #[test]
    fn hadamard_orthogonality_exact() {
        let h = hadamard_matrix(16).unwrap();
        assert!(h.data().iter().all(|&v| v == 1.0 || v == -1.0));
        let prod = h.matmul(&h.transpose()).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                let expect = if r == c { 16.0 } else { 0.0 };
                assert_eq!(prod.get(r, c), expect);
            }
        }
    }

    #[test]
    fn random_symmetric_is_symmetric_and_invertible() {
        let m = random_symmetric_embedding(12, 5).unwrap();
        for r in 0..12 {
            for c in 0..12 {
                assert_eq!(m.get(r, c), m.get(c, r));
            }
        }
        let inv = m.inverse(1e-12).unwrap();
        let prod = inv.matmul(&m).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(12)) < 1e-8);
        assert_eq!(m, random_symmetric_embedding(12, 5).unwrap());
    }

    #[test]
    fn left_inverse_identity_and_hadamard() {
        let id = Embedding::build(EmbeddingKind::Identity, 8, 0).unwrap();
        assert_eq!(id.left_inv(), &Matrix::identity(8));
        let had = Embedding::build(EmbeddingKind::Hadamard, 8, 0).unwrap();
        let prod = had.left_inv().matmul(had.matrix()).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(8)) < 1e-12);
    }

    #[test]
    fn embedding_serde_rebuilds_inverse() {
        let e = Embedding::build(EmbeddingKind::RandomSymmetric, 6, 9).unwrap();
        let text = serde_json::to_string(&e).unwrap();
        let back: Embedding = serde_json::from_str(&text).unwrap();
        assert_eq!(e, back);
    }
}
