//! Feature channel code extraction and its uses: overlap statistics,
//! zero-code clauses, formula reconstruction from column correlations, and
//! the consecutive-four window decoder that classifies from layer-1
//! activations alone.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::formula::Formula;
use crate::matrix::Matrix;
use crate::patterns::witness_partition;
use crate::sampler::{run_positions, Dataset};
use crate::trainer::MlpModel;
use crate::{Error, Result};

/// One coding row of a feature, with the weights at the feature's columns at
/// extraction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRow {
    pub row: usize,
    pub weights: Vec<f64>,
}

/// Map from feature id (clause index or window start position) to its coding
/// rows. Features with no coding rows keep an empty entry so zero-code
/// features stay visible.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CodeSet {
    pub features: BTreeMap<usize, Vec<CodeRow>>,
}

impl CodeSet {
    pub fn rows_of(&self, feature: usize) -> Vec<usize> {
        self.features
            .get(&feature)
            .map(|rows| rows.iter().map(|r| r.row).collect())
            .unwrap_or_default()
    }

    pub fn zero_code_features(&self) -> usize {
        self.features.values().filter(|rows| rows.is_empty()).count()
    }

    /// Rows appearing in at least one code.
    pub fn unique_rows(&self) -> BTreeSet<usize> {
        self.features
            .values()
            .flat_map(|rows| rows.iter().map(|r| r.row))
            .collect()
    }

    /// Text export: one `feature: row row ...` line per feature.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (feature, rows) in &self.features {
            out.push_str(&feature.to_string());
            out.push(':');
            for r in rows {
                out.push(' ');
                out.push_str(&r.row.to_string());
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    /// Mean |code_a intersect code_b| over unordered pairs of coded features;
    /// absent with fewer than two coded features.
    pub mean_overlap: Option<f64>,
    /// Mean code size over coded (nonzero) features.
    pub mean_code_size: Option<f64>,
    pub zero_code_features: usize,
}

/// Rows of `rows` whose signs at a clause's columns match the literal
/// polarities exactly (positive literal -> positive weight, negated ->
/// negative), i.e. 4P for all-positive clauses, 3P1Nc for one-negated
/// clauses, 2P for pairs.
pub fn codes_in_rows(matrix: &Matrix, rows: &[usize], formula: &Formula) -> CodeSet {
    let mut features = BTreeMap::new();
    for (idx, clause) in formula.clauses().iter().enumerate() {
        let mut code = Vec::new();
        for &r in rows {
            let aligned = clause
                .literals()
                .iter()
                .all(|lit| (matrix.get(r, lit.var) > 0.0) != lit.negated);
            if aligned {
                let weights = clause.literals().iter().map(|l| matrix.get(r, l.var)).collect();
                code.push(CodeRow { row: r, weights });
            }
        }
        features.insert(idx, code);
    }
    CodeSet { features }
}

/// Clause codes of a trained model: positive-witness rows exhibiting the
/// clause-aligned positive pattern.
pub fn clause_codes(model: &MlpModel, formula: &Formula) -> CodeSet {
    let partition = witness_partition(model);
    codes_in_rows(&model.w1, &partition.positive_rows, formula)
}

/// Pairwise overlap and size statistics, excluding zero-code features from
/// both means.
pub fn overlap_stats(codes: &CodeSet) -> OverlapStats {
    let coded: Vec<BTreeSet<usize>> = codes
        .features
        .values()
        .filter(|rows| !rows.is_empty())
        .map(|rows| rows.iter().map(|r| r.row).collect())
        .collect();
    let zero = codes.zero_code_features();
    let mean_code_size = if coded.is_empty() {
        None
    } else {
        Some(coded.iter().map(|c| c.len() as f64).sum::<f64>() / coded.len() as f64)
    };
    let mean_overlap = if coded.len() < 2 {
        None
    } else {
        let mut total = 0.0;
        let mut pairs = 0usize;
        for a in 0..coded.len() {
            for b in a + 1..coded.len() {
                total += coded[a].intersection(&coded[b]).count() as f64;
                pairs += 1;
            }
        }
        Some(total / pairs as f64)
    };
    OverlapStats { mean_overlap, mean_code_size, zero_code_features: zero }
}

/// Result of the absolute-value column-correlation pairing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    /// Per column: the other column its |entries| correlate best with. Not
    /// necessarily symmetric.
    pub partner: Vec<usize>,
    /// Columns with zero variance, whose correlations were defined as 0.
    pub zero_variance: Vec<usize>,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// For each column of `|w1|`, the other column it is most closely correlated
/// with (lowest index wins ties, so results are deterministic).
pub fn reconstruct_pairs(w1: &Matrix) -> Result<Pairing> {
    let cols = w1.cols();
    if cols < 2 {
        return Err(Error::Argument("need at least 2 columns to pair".into()));
    }
    let abs_cols: Vec<Vec<f64>> = (0..cols)
        .map(|c| w1.column(c).into_iter().map(f64::abs).collect())
        .collect();
    let variance_zero: Vec<bool> = abs_cols
        .iter()
        .map(|col| {
            let m = col.iter().sum::<f64>() / col.len() as f64;
            col.iter().all(|&v| v == m)
        })
        .collect();
    let mut partner = Vec::with_capacity(cols);
    for i in 0..cols {
        let mut best = (usize::MAX, f64::NEG_INFINITY);
        for j in 0..cols {
            if j == i {
                continue;
            }
            let corr = if variance_zero[i] || variance_zero[j] {
                0.0
            } else {
                pearson(&abs_cols[i], &abs_cols[j])
            };
            if corr > best.1 {
                best = (j, corr);
            }
        }
        partner.push(best.0);
    }
    let zero_variance: Vec<usize> =
        variance_zero.iter().enumerate().filter_map(|(i, &z)| z.then_some(i)).collect();
    Ok(Pairing { partner, zero_variance })
}

/// Fraction of variables whose reconstructed partner matches the formula's
/// pairing.
pub fn pairing_accuracy(pairing: &Pairing, formula: &Formula) -> Result<f64> {
    let truth = formula.pair_partner()?;
    let mut correct = 0usize;
    let mut total = 0usize;
    for (v, want) in truth.iter().enumerate() {
        if let Some(want) = want {
            total += 1;
            if pairing.partner.get(v) == Some(want) {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::Argument("formula has no pairs".into()));
    }
    Ok(correct as f64 / total as f64)
}

/// Symmetric Pearson correlation matrix of raw W1 columns; unit diagonal,
/// zero-variance columns zeroed off-diagonal.
pub fn column_correlation_matrix(w1: &Matrix) -> Matrix {
    let cols = w1.cols();
    let columns: Vec<Vec<f64>> = (0..cols).map(|c| w1.column(c)).collect();
    let mut out = Matrix::identity(cols);
    for i in 0..cols {
        for j in i + 1..cols {
            let corr = pearson(&columns[i], &columns[j]);
            out.set(i, j, corr);
            out.set(j, i, corr);
        }
    }
    out
}

/// Which way "minus its bias" is read in the decoder threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasMode {
    /// Subtract the signed bias (a negative bias raises the threshold).
    Signed,
    /// Subtract the magnitude of the bias.
    Magnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Sliding-window width for the max-weight term.
    pub window: usize,
    /// Run length a feature represents.
    pub run: usize,
    pub slack_factor: f64,
    pub bias_mode: BiasMode,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        DecoderConfig { window: 8, run: 4, slack_factor: 1.9, bias_mode: BiasMode::Signed }
    }
}

/// Window codes of a single-output model: for each start position `i`, the
/// positive-witness rows with `run` consecutive positive W1 values starting
/// at column `i` (a 5-run of positives codes two adjacent positions).
pub fn window_codes(model: &MlpModel) -> Result<CodeSet> {
    window_codes_with_run(model, 4)
}

pub fn window_codes_with_run(model: &MlpModel, run: usize) -> Result<CodeSet> {
    if model.outputs() != 1 {
        return Err(Error::Argument("window codes require a single-output model".into()));
    }
    let cols = model.w1.cols();
    if cols < run {
        return Err(Error::Argument("model narrower than the run length".into()));
    }
    let partition = witness_partition(model);
    let mut features = BTreeMap::new();
    for i in 0..=cols - run {
        let mut code = Vec::new();
        for &r in &partition.positive_rows {
            if (i..i + run).all(|c| model.w1.get(r, c) > 0.0) {
                let weights = (i..i + run).map(|c| model.w1.get(r, c)).collect();
                code.push(CodeRow { row: r, weights });
            }
        }
        features.insert(i, code);
    }
    Ok(CodeSet { features })
}

/// The sliding window over which a row's maximum weight is taken for the
/// position-`i` threshold: the run centered in a `window`-wide span, clipped
/// at the matrix edges. For window 8 / run 4 this is columns i-2 ..= i+5.
fn max_window(cols: usize, i: usize, config: &DecoderConfig) -> (usize, usize) {
    let pre = (config.window - config.run) / 2;
    let post = config.window - config.run - pre;
    let lo = i.saturating_sub(pre);
    let hi = (i + config.run - 1 + post).min(cols - 1);
    (lo, hi)
}

/// Positions whose code is entirely present: every coding row's post-ReLU
/// activation is at least `S - bias_term - slack * M`, where `S` is the sum
/// of the row's `run` positive weights, `M` the row's maximum W1 value in the
/// sliding window, and the bias term follows [`BiasMode`]. Positions with no
/// coding rows are never reported.
pub fn decode_positions(
    model: &MlpModel,
    codes: &CodeSet,
    input: &[u8],
    config: &DecoderConfig,
) -> Result<BTreeSet<usize>> {
    let activations = model.hidden_activations(input)?;
    let cols = model.w1.cols();
    let mut reported = BTreeSet::new();
    for (&i, rows) in &codes.features {
        if rows.is_empty() {
            continue;
        }
        let (lo, hi) = max_window(cols, i, config);
        let all_pass = rows.iter().all(|code_row| {
            let s: f64 = code_row.weights.iter().sum();
            let bias = model.b1[code_row.row];
            let bias_term = match config.bias_mode {
                BiasMode::Signed => bias,
                BiasMode::Magnitude => bias.abs(),
            };
            let m = (lo..=hi)
                .map(|c| model.w1.get(code_row.row, c))
                .fold(f64::NEG_INFINITY, f64::max);
            activations[code_row.row] >= s - bias_term - config.slack_factor * m
        });
        if all_pass {
            reported.insert(i);
        }
    }
    Ok(reported)
}

/// Brute-force truth: start positions of all runs of at least `run` ones.
pub fn scan_truth(input: &[u8], run: usize) -> BTreeSet<usize> {
    run_positions(input, run).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderEval {
    /// Fraction of truly-negative inputs where the decoder reported anything.
    pub decision_fpr: f64,
    /// Fraction of truly-positive inputs where the decoder reported nothing.
    pub decision_fnr: f64,
    /// Fraction of inputs whose reported set equals the scan truth exactly.
    pub fully_correct: f64,
    pub positives: usize,
    pub negatives: usize,
}

/// Evaluate the decoder over a dataset against the run-scan oracle.
pub fn evaluate_decoder(
    model: &MlpModel,
    codes: &CodeSet,
    dataset: &Dataset,
    config: &DecoderConfig,
) -> Result<DecoderEval> {
    let mut positives = 0usize;
    let mut negatives = 0usize;
    let mut false_pos = 0usize;
    let mut false_neg = 0usize;
    let mut exact = 0usize;
    for sample in &dataset.samples {
        let truth = scan_truth(&sample.input, config.run);
        let reported = decode_positions(model, codes, &sample.input, config)?;
        if truth.is_empty() {
            negatives += 1;
            if !reported.is_empty() {
                false_pos += 1;
            }
        } else {
            positives += 1;
            if reported.is_empty() {
                false_neg += 1;
            }
        }
        if truth == reported {
            exact += 1;
        }
    }
    let frac = |num: usize, den: usize| if den > 0 { num as f64 / den as f64 } else { 0.0 };
    Ok(DecoderEval {
        decision_fpr: frac(false_pos, negatives),
        decision_fnr: frac(false_neg, positives),
        fully_correct: frac(exact, dataset.samples.len()),
        positives,
        negatives,
    })
}
