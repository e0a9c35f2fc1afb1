//! Sign-based combinatorial census of trained weights: witness partition,
//! per-clause pattern histograms, matched random baselines, bias statistics,
//! and the packing-limit formula.
//!
//! Sign rule everywhere: an entry is '+' iff it is strictly greater than
//! zero; exact zeros count as '-'. Trained weights are almost surely nonzero,
//! the rule just pins down reproducible behavior.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::formula::{Clause, Formula};
use crate::matrix::Matrix;
use crate::rng::{mix, rng_from};
use crate::trainer::MlpModel;
use crate::{Error, Result};

/// The five sign patterns of a row's four weights at a clause's columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PatternType {
    P4,
    P3N1,
    P2N2,
    N3P1,
    N4,
}

impl PatternType {
    pub const ALL: [PatternType; 5] = [
        PatternType::P4,
        PatternType::P3N1,
        PatternType::P2N2,
        PatternType::N3P1,
        PatternType::N4,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PatternType::P4 => "4P",
            PatternType::P3N1 => "3P1N",
            PatternType::P2N2 => "2P2N",
            PatternType::N3P1 => "3N1P",
            PatternType::N4 => "4N",
        }
    }
}

/// Classify a 4-tuple of signs (`true` = positive) by its positive count.
pub fn classify_pattern(signs: [bool; 4]) -> PatternType {
    match signs.iter().filter(|&&s| s).count() {
        4 => PatternType::P4,
        3 => PatternType::P3N1,
        2 => PatternType::P2N2,
        1 => PatternType::N3P1,
        _ => PatternType::N4,
    }
}

/// Split of hidden rows into positive and negative witnesses; for
/// multi-output models each positive row also records which output it codes
/// for (the output with the largest positive weight, lowest index on ties).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPartition {
    pub positive_rows: Vec<usize>,
    pub negative_rows: Vec<usize>,
    /// Per row: `Some(t)` when the row is a positive witness dominated by
    /// output `t`, `None` for negative witnesses.
    pub dominant_output: Vec<Option<usize>>,
}

impl WitnessPartition {
    /// Positive rows whose dominant output is `t`.
    pub fn rows_for_output(&self, t: usize) -> Vec<usize> {
        self.dominant_output
            .iter()
            .enumerate()
            .filter_map(|(r, d)| (*d == Some(t)).then_some(r))
            .collect()
    }

    pub fn rho(&self) -> f64 {
        let total = self.positive_rows.len() + self.negative_rows.len();
        if total == 0 {
            return 0.0;
        }
        self.positive_rows.len() as f64 / total as f64
    }
}

pub fn witness_partition(model: &MlpModel) -> WitnessPartition {
    let n1 = model.hidden();
    let o = model.outputs();
    let mut positive_rows = Vec::new();
    let mut negative_rows = Vec::new();
    let mut dominant_output = vec![None; n1];
    for r in 0..n1 {
        let mut best: Option<(usize, f64)> = None;
        for t in 0..o {
            let w = model.w2.get(t, r);
            if w > 0.0 && best.map_or(true, |(_, bw)| w > bw) {
                best = Some((t, w));
            }
        }
        match best {
            Some((t, _)) => {
                dominant_output[r] = Some(t);
                positive_rows.push(r);
            }
            None => negative_rows.push(r),
        }
    }
    WitnessPartition { positive_rows, negative_rows, dominant_output }
}

/// Per-clause pattern counts for one row class. Counts are `f64` so that
/// averaged baselines share the type; a single census produces exact
/// integers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PatternCounts {
    pub p4: f64,
    pub p3n1: f64,
    pub p2n2: f64,
    pub n3p1: f64,
    pub n4: f64,
    /// 3P1N with the negative weight at the clause's negated variable
    /// (clauses with exactly one negated literal; zero otherwise).
    pub p3n1c: f64,
    /// 3P1N with the negative weight elsewhere.
    pub p3n1nc: f64,
}

impl PatternCounts {
    pub fn get(&self, p: PatternType) -> f64 {
        match p {
            PatternType::P4 => self.p4,
            PatternType::P3N1 => self.p3n1,
            PatternType::P2N2 => self.p2n2,
            PatternType::N3P1 => self.n3p1,
            PatternType::N4 => self.n4,
        }
    }

    pub fn total(&self) -> f64 {
        self.p4 + self.p3n1 + self.p2n2 + self.n3p1 + self.n4
    }

    fn add(&mut self, other: &PatternCounts) {
        self.p4 += other.p4;
        self.p3n1 += other.p3n1;
        self.p2n2 += other.p2n2;
        self.n3p1 += other.n3p1;
        self.n4 += other.n4;
        self.p3n1c += other.p3n1c;
        self.p3n1nc += other.p3n1nc;
    }

    fn scale(&mut self, f: f64) {
        self.p4 *= f;
        self.p3n1 *= f;
        self.p2n2 *= f;
        self.n3p1 *= f;
        self.n4 *= f;
        self.p3n1c *= f;
        self.p3n1nc *= f;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternHistogram {
    pub num_clauses: usize,
    pub pos_row_count: f64,
    pub neg_row_count: f64,
    /// Fraction of rows that are positive witnesses.
    pub rho: f64,
    /// Per clause, patterns over positive-witness rows.
    pub pos: Vec<PatternCounts>,
    /// Per clause, patterns over negative-witness rows.
    pub neg: Vec<PatternCounts>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowClass {
    Positive,
    Negative,
}

impl RowClass {
    pub fn name(&self) -> &'static str {
        match self {
            RowClass::Positive => "positive",
            RowClass::Negative => "negative",
        }
    }
}

impl PatternHistogram {
    pub fn counts(&self, class: RowClass) -> &[PatternCounts] {
        match class {
            RowClass::Positive => &self.pos,
            RowClass::Negative => &self.neg,
        }
    }

    /// Average count of a pattern per clause within a row class.
    pub fn mean_per_clause(&self, class: RowClass, pattern: PatternType) -> f64 {
        let counts = self.counts(class);
        if counts.is_empty() {
            return 0.0;
        }
        counts.iter().map(|c| c.get(pattern)).sum::<f64>() / counts.len() as f64
    }

    /// Average 3P1Nc / 3P1Nnc per clause (positive class).
    pub fn mean_aligned_split(&self, class: RowClass) -> (f64, f64) {
        let counts = self.counts(class);
        if counts.is_empty() {
            return (0.0, 0.0);
        }
        let n = counts.len() as f64;
        (
            counts.iter().map(|c| c.p3n1c).sum::<f64>() / n,
            counts.iter().map(|c| c.p3n1nc).sum::<f64>() / n,
        )
    }

    /// CSV rows `(k, j, trial, row_class, pattern, clause, count)`, one per
    /// histogram cell, including the aligned 3P1N refinements.
    pub fn to_csv_rows(&self, k: usize, j: usize, trial: usize) -> Vec<String> {
        let mut rows = Vec::new();
        for (class, counts) in [(RowClass::Positive, &self.pos), (RowClass::Negative, &self.neg)] {
            for (clause, c) in counts.iter().enumerate() {
                for p in PatternType::ALL {
                    rows.push(format!(
                        "{k},{j},{trial},{},{},{clause},{}",
                        class.name(),
                        p.name(),
                        c.get(p)
                    ));
                }
                rows.push(format!("{k},{j},{trial},{},3P1Nc,{clause},{}", class.name(), c.p3n1c));
                rows.push(format!("{k},{j},{trial},{},3P1Nnc,{clause},{}", class.name(), c.p3n1nc));
            }
        }
        rows
    }
}

fn clause_signs(matrix: &Matrix, row: usize, clause: &Clause) -> [bool; 4] {
    let mut signs = [false; 4];
    for (i, lit) in clause.literals().iter().enumerate() {
        signs[i] = matrix.get(row, lit.var) > 0.0;
    }
    signs
}

/// Core census: for every clause and every row in each class, classify the
/// sign 4-tuple at the clause's variable columns. Clauses with exactly one
/// negated literal additionally split 3P1N by whether the negative weight
/// sits at the negated variable's column.
pub fn census(
    matrix: &Matrix,
    formula: &Formula,
    pos_rows: &[usize],
    neg_rows: &[usize],
) -> Result<PatternHistogram> {
    if formula.clauses().iter().any(|c| c.len() != 4) {
        return Err(Error::Argument(
            "pattern census requires clauses of exactly 4 literals".into(),
        ));
    }
    if formula.num_vars() > matrix.cols() {
        return Err(Error::Dimension(format!(
            "formula has {} vars but matrix has {} columns",
            formula.num_vars(),
            matrix.cols()
        )));
    }
    let tally = |rows: &[usize]| -> Vec<PatternCounts> {
        formula
            .clauses()
            .iter()
            .map(|clause| {
                let negated_pos: Option<usize> = {
                    let negs: Vec<usize> = clause
                        .literals()
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| l.negated)
                        .map(|(i, _)| i)
                        .collect();
                    if negs.len() == 1 {
                        Some(negs[0])
                    } else {
                        None
                    }
                };
                let mut counts = PatternCounts::default();
                for &r in rows {
                    let signs = clause_signs(matrix, r, clause);
                    match classify_pattern(signs) {
                        PatternType::P4 => counts.p4 += 1.0,
                        PatternType::P3N1 => {
                            counts.p3n1 += 1.0;
                            let neg_at = signs.iter().position(|&s| !s).unwrap();
                            if negated_pos == Some(neg_at) {
                                counts.p3n1c += 1.0;
                            } else {
                                counts.p3n1nc += 1.0;
                            }
                        }
                        PatternType::P2N2 => counts.p2n2 += 1.0,
                        PatternType::N3P1 => counts.n3p1 += 1.0,
                        PatternType::N4 => counts.n4 += 1.0,
                    }
                }
                counts
            })
            .collect()
    };
    let pos = tally(pos_rows);
    let neg = tally(neg_rows);
    let total = pos_rows.len() + neg_rows.len();
    Ok(PatternHistogram {
        num_clauses: formula.clauses().len(),
        pos_row_count: pos_rows.len() as f64,
        neg_row_count: neg_rows.len() as f64,
        rho: if total == 0 { 0.0 } else { pos_rows.len() as f64 / total as f64 },
        pos,
        neg,
    })
}

/// Census of a single-output model's layer-1 matrix against its formula.
pub fn count_patterns(model: &MlpModel, formula: &Formula) -> Result<PatternHistogram> {
    let partition = witness_partition(model);
    census(&model.w1, formula, &partition.positive_rows, &partition.negative_rows)
}

/// Multi-output census for one output: positive class is the rows dominated
/// by that output, negative class is the all-outputs-negative rows.
pub fn count_patterns_for_output(
    model: &MlpModel,
    formula: &Formula,
    output: usize,
) -> Result<PatternHistogram> {
    if output >= model.outputs() {
        return Err(Error::Argument(format!("output {output} out of range")));
    }
    let partition = witness_partition(model);
    let pos = partition.rows_for_output(output);
    census(&model.w1, formula, &pos, &partition.negative_rows)
}

/// Average histogram of random sign matrices matched to a trained network:
/// `round(rho * j)` positive rows, '+' probability `row_bias_pos` in positive
/// rows and `row_bias_neg` in negative rows.
#[allow(clippy::too_many_arguments)]
pub fn random_baseline(
    j: usize,
    num_vars: usize,
    rho: f64,
    row_bias_pos: f64,
    row_bias_neg: f64,
    formula: &Formula,
    n_samples: usize,
    seed: u64,
) -> Result<PatternHistogram> {
    if !(0.0..=1.0).contains(&row_bias_pos) || !(0.0..=1.0).contains(&row_bias_neg) {
        return Err(Error::Argument("sign biases must lie in [0, 1]".into()));
    }
    if n_samples == 0 {
        return Err(Error::Argument("n_samples must be positive".into()));
    }
    let pos_count = ((rho * j as f64).round() as usize).min(j);
    let pos_rows: Vec<usize> = (0..pos_count).collect();
    let neg_rows: Vec<usize> = (pos_count..j).collect();
    let mut acc: Option<PatternHistogram> = None;
    for s in 0..n_samples {
        let m = random_sign_matrix(j, num_vars, pos_count, row_bias_pos, row_bias_neg, mix(seed, s as u64));
        let hist = census(&m, formula, &pos_rows, &neg_rows)?;
        match &mut acc {
            None => acc = Some(hist),
            Some(a) => {
                for (ac, hc) in a.pos.iter_mut().zip(&hist.pos) {
                    ac.add(hc);
                }
                for (ac, hc) in a.neg.iter_mut().zip(&hist.neg) {
                    ac.add(hc);
                }
            }
        }
    }
    let mut hist = acc.unwrap();
    let scale = 1.0 / n_samples as f64;
    for c in hist.pos.iter_mut().chain(hist.neg.iter_mut()) {
        c.scale(scale);
    }
    Ok(hist)
}

/// A +/-1 matrix with the given positive-row count and per-class sign biases.
pub fn random_sign_matrix(
    j: usize,
    num_vars: usize,
    pos_count: usize,
    row_bias_pos: f64,
    row_bias_neg: f64,
    seed: u64,
) -> Matrix {
    let mut rng = rng_from(seed);
    Matrix::from_fn(j, num_vars, |r, _| {
        let bias = if r < pos_count { row_bias_pos } else { row_bias_neg };
        if rng.gen_bool(bias) {
            1.0
        } else {
            -1.0
        }
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub positive_fraction: f64,
    pub mean_abs_weight: f64,
}

/// Witness/bias statistics of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasStats {
    /// Fraction of rows that are positive witnesses.
    pub rho: f64,
    /// Fraction of positive-witness rows whose layer-1 bias is negative.
    pub pos_rows_negative_b1: f64,
    /// Mean layer-1 bias over positive-witness rows.
    pub mean_b1_pos_rows: f64,
    /// Largest |bias| over positive-witness rows.
    pub max_abs_b1_pos_rows: f64,
    /// Fraction of all W1 entries that are positive.
    pub positive_entry_fraction: f64,
    /// [positive rows, negative rows] x [clause columns, non-clause columns].
    pub splits: [[SplitStats; 2]; 2],
}

pub fn bias_stats(model: &MlpModel, formula: &Formula) -> BiasStats {
    let partition = witness_partition(model);
    let clause_vars = formula.used_vars();
    let num_vars = formula.num_vars().min(model.w1.cols());
    let is_clause: Vec<bool> = (0..num_vars).map(|v| clause_vars.contains(&v)).collect();

    let pos_rows = &partition.positive_rows;
    let frac = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };

    let neg_b1 = pos_rows.iter().filter(|&&r| model.b1[r] < 0.0).count() as f64;
    let mean_b1 = frac(pos_rows.iter().map(|&r| model.b1[r]).sum::<f64>(), pos_rows.len() as f64);
    let max_abs_b1 = pos_rows.iter().map(|&r| model.b1[r].abs()).fold(0.0, f64::max);

    let mut pos_entries = 0usize;
    let mut total_entries = 0usize;
    let mut counts = [[(0usize, 0usize, 0.0f64); 2]; 2]; // (positive, total, sum_abs)
    for (class_idx, rows) in [(0, pos_rows), (1, &partition.negative_rows)] {
        for &r in rows.iter() {
            for v in 0..num_vars {
                let w = model.w1.get(r, v);
                let var_idx = usize::from(!is_clause[v]);
                let cell = &mut counts[class_idx][var_idx];
                cell.1 += 1;
                cell.2 += w.abs();
                if w > 0.0 {
                    cell.0 += 1;
                    pos_entries += 1;
                }
                total_entries += 1;
            }
        }
    }
    let splits = counts.map(|row| {
        row.map(|(p, t, s)| SplitStats {
            positive_fraction: frac(p as f64, t as f64),
            mean_abs_weight: frac(s, t as f64),
        })
    });
    BiasStats {
        rho: partition.rho(),
        pos_rows_negative_b1: frac(neg_b1, pos_rows.len() as f64),
        mean_b1_pos_rows: mean_b1,
        max_abs_b1_pos_rows: max_abs_b1,
        positive_entry_fraction: frac(pos_entries as f64, total_entries as f64),
        splits,
    }
}

/// Theoretical cap on average 4P codes per clause: `j * l * rho / (8 * k)`.
pub fn packing_limit(j: usize, num_vars: usize, k: usize, rho: f64) -> Result<f64> {
    if j == 0 || num_vars == 0 || k == 0 || rho <= 0.0 {
        return Err(Error::Argument("packing_limit requires positive arguments".into()));
    }
    Ok(j as f64 * num_vars as f64 * rho / (8.0 * k as f64))
}
