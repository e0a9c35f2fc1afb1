//! Hand-planted feature channel networks: each pair feature gets a code (a
//! set of hidden rows), every code row computes `ReLU(x_a + x_b - 1)`, and a
//! unit layer-2 weight ORs the code rows together. With pairwise-disjoint
//! codes the network computes the DNF exactly; exhaustive verification makes
//! these networks the ground truth for code extraction and tracing.

use serde::{Deserialize, Serialize};

use crate::disentangle::EmbeddingKind;
use crate::formula::{Clause, Formula, FormulaKind, Literal};
use crate::matrix::Matrix;
use crate::trainer::{init_model, MlpModel, ModelDims};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeature {
    pub pair: (usize, usize),
    pub code: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub num_vars: usize,
    pub hidden: usize,
    pub features: Vec<PlantedFeature>,
    /// Layer-1 bias on code rows (zero elsewhere).
    pub bias: f64,
    /// Layer-2 weight on code rows (zero elsewhere).
    pub w2_weight: f64,
}

impl PlantedSpec {
    pub fn new(num_vars: usize, hidden: usize, features: Vec<PlantedFeature>) -> Self {
        PlantedSpec { num_vars, hidden, features, bias: -1.0, w2_weight: 1.0 }
    }

    /// The DNF of pairwise ANDs this network is planted to compute.
    pub fn formula(&self) -> Result<Formula> {
        let clauses = self
            .features
            .iter()
            .map(|f| Clause::new(vec![Literal::pos(f.pair.0), Literal::pos(f.pair.1)]))
            .collect::<Result<Vec<_>>>()?;
        Formula::new(FormulaKind::Dnf, self.num_vars, clauses)
    }

    fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.num_vars];
        for f in &self.features {
            let (a, b) = f.pair;
            if a >= self.num_vars || b >= self.num_vars {
                return Err(Error::Argument("pair variable out of range".into()));
            }
            if a == b || used[a] || used[b] {
                return Err(Error::Argument(format!(
                    "pair variables overlap at ({a}, {b})"
                )));
            }
            used[a] = true;
            used[b] = true;
            if f.code.is_empty() {
                return Err(Error::Argument("planted code must be nonempty".into()));
            }
            if f.code.iter().any(|&r| r >= self.hidden) {
                return Err(Error::Argument("code row out of range".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("planted spec serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("planted spec: {e}")))
    }
}

/// Build the planted network: identity embedding, `W1[r][v] = 1` for each
/// code row and pair variable, bias on code rows, unit W2 on code rows, no
/// output bias.
pub fn build_planted(spec: &PlantedSpec) -> Result<MlpModel> {
    spec.validate()?;
    let dims = ModelDims {
        num_inputs: spec.num_vars,
        hidden: spec.hidden,
        outputs: 1,
        use_b2: false,
    };
    let mut model = init_model(dims, EmbeddingKind::Identity, 0)?;
    model.w1 = Matrix::zeros(spec.hidden, spec.num_vars);
    model.b1 = vec![0.0; spec.hidden];
    model.w2 = Matrix::zeros(1, spec.hidden);
    model.b2 = vec![0.0];
    for feature in &spec.features {
        let (a, b) = feature.pair;
        for &r in &feature.code {
            model.w1.set(r, a, 1.0);
            model.w1.set(r, b, 1.0);
            model.b1[r] = spec.bias;
            model.w2.set(0, r, spec.w2_weight);
        }
    }
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub total: u64,
    pub mismatches: u64,
    pub first_counterexample: Option<Vec<u8>>,
}

impl VerifyReport {
    pub fn is_exact(&self) -> bool {
        self.mismatches == 0
    }

    pub fn mismatch_rate(&self) -> f64 {
        self.mismatches as f64 / self.total as f64
    }
}

/// Compare the thresholded network output (pre-sigmoid > 0) to the formula
/// oracle over all `2^num_vars` inputs. Refuses more than 20 variables.
pub fn verify_exact(model: &MlpModel, formula: &Formula) -> Result<VerifyReport> {
    let num_vars = formula.num_vars();
    if num_vars != model.num_inputs() {
        return Err(Error::Dimension("model/formula width mismatch".into()));
    }
    if num_vars > 20 {
        return Err(Error::Argument(format!(
            "exhaustive verification refuses num_vars {num_vars} > 20"
        )));
    }
    let total = 1u64 << num_vars;
    let mut mismatches = 0u64;
    let mut first = None;
    let mut input = vec![0u8; num_vars];
    for mask in 0..total {
        for (i, bit) in input.iter_mut().enumerate() {
            *bit = ((mask >> i) & 1) as u8;
        }
        let network = model.predict(&input)?[0] > 0.5;
        let truth = formula.eval(&input)?;
        if network != truth {
            mismatches += 1;
            if first.is_none() {
                first = Some(input.clone());
            }
        }
    }
    Ok(VerifyReport { total, mismatches, first_counterexample: first })
}
