//! One runner per experiment family. Every (grid cell, trial) task derives
//! its own seed from the master seed and the cell parameters, computes in
//! isolation, and lands in its own JSON record file, so interrupted runs
//! resume and parallelism degree never changes the output bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fcc_core::codes::{
    self, codes_in_rows, evaluate_decoder, pairing_accuracy, reconstruct_pairs, window_codes,
    BiasMode, DecoderConfig,
};
use fcc_core::disentangle::{disentangle_layer1, EmbeddingKind};
use fcc_core::formula::{
    all_vars_or, random_cnf_pairs, random_dnf, random_paired_and, Formula,
};
use fcc_core::matrix::Matrix;
use fcc_core::patterns::{
    self, bias_stats, count_patterns, count_patterns_for_output, random_baseline,
    witness_partition, PatternType, RowClass,
};
use fcc_core::rng::mix;
use fcc_core::sampler::{
    sample_cnf, sample_consecutive_four, sample_dnf4, sample_multi, sample_or, sample_paired,
    Dataset,
};
use fcc_core::trainer::{init_model_with, test_error, train, MlpModel, ModelDims, TrainConfig, TrainHistory};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::heatmap::emit_heatmap;
use crate::report::{
    emit_report, pattern_means_map, CellParams, EmergencePoint, RunReport, TrialRecord,
};

#[derive(Debug)]
pub enum ExperimentError {
    Config(String),
    Internal(String),
    Io(std::io::Error),
}

impl std::fmt::Display for ExperimentError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExperimentError::Config(m) => write!(f, "config error: {m}"),
            ExperimentError::Internal(m) => write!(f, "internal error: {m}"),
            ExperimentError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for ExperimentError {}

impl From<std::io::Error> for ExperimentError {
    fn from(e: std::io::Error) -> Self {
        ExperimentError::Io(e)
    }
}

impl From<fcc_core::Error> for ExperimentError {
    fn from(e: fcc_core::Error) -> Self {
        ExperimentError::Internal(e.to_string())
    }
}

type ExpResult<T> = Result<T, ExperimentError>;

// role constants for per-trial seed streams
const ROLE_FORMULA: u64 = 1;
const ROLE_DATA: u64 = 2;
const ROLE_TEST: u64 = 3;
const ROLE_MODEL: u64 = 4;
const ROLE_TRAIN: u64 = 5;
const ROLE_BASELINE: u64 = 6;
const ROLE_SECOND_TASK: u64 = 7;

/// Seed for one (cell, trial) task, keyed by cell values so editing one grid
/// axis never perturbs other cells.
pub fn trial_seed(master: u64, cell: CellParams, trial: usize) -> u64 {
    mix(mix(mix(master, cell.j as u64), cell.k as u64), trial as u64)
}

fn grid(config: &ExperimentConfig) -> Vec<CellParams> {
    let ks: Vec<usize> = if config.clause_counts.is_empty() {
        vec![0]
    } else {
        config.clause_counts.clone()
    };
    let mut cells = Vec::new();
    for &j in &config.hidden_sizes {
        for &k in &ks {
            cells.push(CellParams { j, k });
        }
    }
    cells
}

fn empty_record(cell: CellParams, trial: usize, seed: u64) -> TrialRecord {
    TrialRecord {
        cell,
        trial,
        seed,
        formulas: vec![],
        failed: None,
        metrics: BTreeMap::new(),
        bias: None,
        histogram: None,
        baseline: None,
        overlap: None,
        decoder: None,
        emergence: vec![],
    }
}

struct TrainedTask {
    model: MlpModel,
    history: TrainHistory,
    train_set: Dataset,
    test_set: Dataset,
}

/// Init and train a model for this task; `Err(Training)` aborts are reported
/// as failed trials by the caller.
#[allow(clippy::too_many_arguments)]
fn run_training(
    config: &ExperimentConfig,
    j: usize,
    outputs: usize,
    seed: u64,
    train_set: Dataset,
    test_set: Dataset,
    snapshot_schedule: Vec<f64>,
) -> fcc_core::Result<TrainedTask> {
    let dims = ModelDims {
        num_inputs: config.num_vars,
        hidden: j,
        outputs,
        use_b2: config.use_b2,
    };
    let mut model = init_model_with(dims, config.embedding, mix(seed, ROLE_MODEL), config.bias_init_range)?;
    let train_config = TrainConfig {
        seed: mix(seed, ROLE_TRAIN),
        snapshot_schedule,
        ..config.train.clone()
    };
    let history = train(&mut model, &train_set, &train_config)?;
    Ok(TrainedTask { model, history, train_set, test_set })
}

fn base_metrics(record: &mut TrialRecord, task: &TrainedTask) -> fcc_core::Result<()> {
    let err = test_error(&task.model, &task.test_set, 0.5)?;
    record.metrics.insert("train_error".into(), task.history.final_error);
    record.metrics.insert("train_loss".into(), task.history.final_loss);
    record.metrics.insert("test_error".into(), err.joint);
    record.metrics.insert("epochs".into(), task.history.epochs_run as f64);
    Ok(())
}

/// Fraction of positive entries in the listed rows of a matrix.
fn sign_bias(matrix: &Matrix, rows: &[usize]) -> f64 {
    if rows.is_empty() || matrix.cols() == 0 {
        return 0.5;
    }
    let pos: usize = rows
        .iter()
        .map(|&r| matrix.row(r).iter().filter(|&&v| v > 0.0).count())
        .sum();
    pos as f64 / (rows.len() * matrix.cols()) as f64
}

/// Mean clause-aligned coding rows per clause within a fixed row set.
fn mean_aligned_per_clause(matrix: &Matrix, rows: &[usize], formula: &Formula) -> f64 {
    if formula.clauses().is_empty() {
        return 0.0;
    }
    let codes = codes_in_rows(matrix, rows, formula);
    let total: usize = codes.features.values().map(Vec::len).sum();
    total as f64 / formula.clauses().len() as f64
}

/// Monte-Carlo baseline for [`mean_aligned_per_clause`]: random sign matrices
/// over `n_rows` rows with the given positive-entry bias.
fn aligned_mc_baseline(
    n_rows: usize,
    num_vars: usize,
    bias_pos: f64,
    formula: &Formula,
    samples: usize,
    seed: u64,
) -> f64 {
    if n_rows == 0 || samples == 0 {
        return 0.0;
    }
    let rows: Vec<usize> = (0..n_rows).collect();
    let mut total = 0.0;
    for s in 0..samples {
        let m = patterns::random_sign_matrix(n_rows, num_vars, n_rows, bias_pos, bias_pos, mix(seed, s as u64));
        total += mean_aligned_per_clause(&m, &rows, formula);
    }
    total / samples as f64
}

fn insert_bias_metrics(record: &mut TrialRecord, stats: &patterns::BiasStats) {
    record.metrics.insert("rho".into(), stats.rho);
    record.metrics.insert("pos_rows_negative_b1".into(), stats.pos_rows_negative_b1);
    record.metrics.insert("mean_b1_pos".into(), stats.mean_b1_pos_rows);
    record.metrics.insert("positive_entry_fraction".into(), stats.positive_entry_fraction);
}

// --- per-experiment trial bodies -----------------------------------------

fn paired_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);
    let formula = random_paired_and(config.num_vars, mix(seed, ROLE_FORMULA))?;
    record.formulas.push(formula.to_string());
    let train_set = sample_paired(&formula, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_paired(&formula, config.test_samples, mix(seed, ROLE_TEST))?;
    let task = match run_training(config, cell.j, 1, seed, train_set, test_set, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    base_metrics(&mut record, &task)?;

    let pairing = reconstruct_pairs(&task.model.w1)?;
    record
        .metrics
        .insert("pairing_accuracy".into(), pairing_accuracy(&pairing, &formula)?);

    let stats = bias_stats(&task.model, &formula);
    insert_bias_metrics(&mut record, &stats);
    record.bias = Some(stats);

    let codes = codes::clause_codes(&task.model, &formula);
    let overlap = codes::overlap_stats(&codes);
    record
        .metrics
        .insert("zero_code_clauses".into(), overlap.zero_code_features as f64);
    if let Some(m) = overlap.mean_overlap {
        record.metrics.insert("mean_overlap".into(), m);
    }
    if let Some(m) = overlap.mean_code_size {
        record.metrics.insert("mean_code_size".into(), m);
    }
    record.overlap = Some(overlap);
    *artifacts = Some(TrialArtifacts { model: task.model, formula: Some(formula) });
    Ok(record)
}

fn scaling_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);
    let formula = random_dnf(
        config.num_vars,
        cell.k,
        4,
        config.negatives_per_clause,
        mix(seed, ROLE_FORMULA),
    )?;
    record.formulas.push(formula.to_string());
    let train_set = sample_dnf4(&formula, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_dnf4(&formula, config.test_samples, mix(seed, ROLE_TEST))?;
    let task = match run_training(config, cell.j, 1, seed, train_set, test_set, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    base_metrics(&mut record, &task)?;

    let stats = bias_stats(&task.model, &formula);
    insert_bias_metrics(&mut record, &stats);

    let partition = witness_partition(&task.model);
    let hist = count_patterns(&task.model, &formula)?;
    let baseline = random_baseline(
        cell.j,
        config.num_vars,
        stats.rho,
        sign_bias(&task.model.w1, &partition.positive_rows),
        sign_bias(&task.model.w1, &partition.negative_rows),
        &formula,
        config.baseline_samples,
        mix(seed, ROLE_BASELINE),
    )?;
    for (class, tag) in [(RowClass::Positive, "pos"), (RowClass::Negative, "neg")] {
        for p in PatternType::ALL {
            let name = p.name().to_lowercase();
            record
                .metrics
                .insert(format!("{tag}_{name}"), hist.mean_per_clause(class, p));
            record
                .metrics
                .insert(format!("{tag}_{name}_random"), baseline.mean_per_clause(class, p));
        }
    }
    if config.negatives_per_clause == 1 {
        let (c, nc) = hist.mean_aligned_split(RowClass::Positive);
        let (bc, bnc) = baseline.mean_aligned_split(RowClass::Positive);
        record.metrics.insert("pos_3p1nc".into(), c);
        record.metrics.insert("pos_3p1nnc".into(), nc);
        record.metrics.insert("pos_3p1nc_random".into(), bc);
        record.metrics.insert("pos_3p1nnc_random".into(), bnc);
    }
    record
        .metrics
        .insert("packing_limit".into(), patterns::packing_limit(cell.j, config.num_vars, cell.k, stats.rho.max(1e-9))?);

    let codes = codes::clause_codes(&task.model, &formula);
    let overlap = codes::overlap_stats(&codes);
    record
        .metrics
        .insert("zero_code_clauses".into(), overlap.zero_code_features as f64);
    if let Some(m) = overlap.mean_overlap {
        record.metrics.insert("mean_overlap".into(), m);
    }
    if let Some(m) = overlap.mean_code_size {
        record.metrics.insert("mean_code_size".into(), m);
    }
    record.bias = Some(stats);
    record.histogram = Some(hist);
    record.baseline = Some(baseline);
    record.overlap = Some(overlap);
    *artifacts = Some(TrialArtifacts { model: task.model, formula: Some(formula) });
    Ok(record)
}

fn emergence_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);
    let formula = random_dnf(
        config.num_vars,
        cell.k,
        4,
        config.negatives_per_clause,
        mix(seed, ROLE_FORMULA),
    )?;
    record.formulas.push(formula.to_string());
    let train_set = sample_dnf4(&formula, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_dnf4(&formula, config.test_samples, mix(seed, ROLE_TEST))?;
    let schedule = if config.train.snapshot_schedule.is_empty() {
        crate::config::emergence_schedule(config.train.max_epochs)
    } else {
        config.train.snapshot_schedule.clone()
    };
    let task = match run_training(config, cell.j, 1, seed, train_set, test_set, schedule) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    base_metrics(&mut record, &task)?;

    for point in &task.history.points {
        let hist = count_patterns(&point.model, &formula)?;
        record.emergence.push(EmergencePoint {
            epoch: point.epoch,
            train_error: point.train_error,
            pattern_means: pattern_means_map(&hist),
        });
    }
    let p4_at = |epoch: f64| {
        record
            .emergence
            .iter()
            .find(|p| p.epoch == epoch)
            .and_then(|p| p.pattern_means.get("positive/4P").copied())
    };
    if let Some(v) = p4_at(0.0) {
        record.metrics.insert("p4_init".into(), v);
    }
    if let Some(v) = p4_at(1.0) {
        record.metrics.insert("p4_epoch1".into(), v);
    }
    if let Some(v) = p4_at(2.0) {
        record.metrics.insert("p4_epoch2".into(), v);
    }
    if let Some(p) = record.emergence.last() {
        if let Some(v) = p.pattern_means.get("positive/4P") {
            record.metrics.insert("p4_final".into(), *v);
        }
    }
    let stats = bias_stats(&task.model, &formula);
    insert_bias_metrics(&mut record, &stats);
    record.bias = Some(stats);
    *artifacts = Some(TrialArtifacts { model: task.model, formula: Some(formula) });
    Ok(record)
}

fn and_vs_or_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);

    // AND side: the paired task.
    let and_formula = random_paired_and(config.num_vars, mix(seed, ROLE_FORMULA))?;
    record.formulas.push(and_formula.to_string());
    let train_set = sample_paired(&and_formula, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_paired(&and_formula, config.test_samples, mix(seed, ROLE_TEST))?;
    let and_task = match run_training(config, cell.j, 1, seed, train_set, test_set, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    let and_stats = bias_stats(&and_task.model, &and_formula);
    record.metrics.insert("and_train_error".into(), and_task.history.final_error);
    record
        .metrics
        .insert("and_test_error".into(), test_error(&and_task.model, &and_task.test_set, 0.5)?.joint);
    record.metrics.insert("and_mean_b1_pos".into(), and_stats.mean_b1_pos_rows);
    record
        .metrics
        .insert("and_max_abs_b1_pos".into(), and_stats.max_abs_b1_pos_rows);
    record.bias = Some(and_stats);

    // OR side: same network shape, OR of all variables.
    let or_seed = mix(seed, ROLE_SECOND_TASK);
    let or_formula = all_vars_or(config.num_vars)?;
    record.formulas.push(or_formula.to_string());
    let or_train = sample_or(config.num_vars, config.train_samples, mix(or_seed, ROLE_DATA))?;
    let or_test = sample_or(config.num_vars, config.test_samples, mix(or_seed, ROLE_TEST))?;
    let or_task = match run_training(config, cell.j, 1, or_seed, or_train, or_test, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    let or_stats = bias_stats(&or_task.model, &or_formula);
    record.metrics.insert("or_train_error".into(), or_task.history.final_error);
    record
        .metrics
        .insert("or_test_error".into(), test_error(&or_task.model, &or_task.test_set, 0.5)?.joint);
    record.metrics.insert("or_mean_b1_pos".into(), or_stats.mean_b1_pos_rows);
    record
        .metrics
        .insert("or_max_abs_b1_pos".into(), or_stats.max_abs_b1_pos_rows);
    *artifacts = Some(TrialArtifacts { model: and_task.model, formula: Some(and_formula) });
    Ok(record)
}

fn cnf_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);
    let formula = random_cnf_pairs(config.num_vars, mix(seed, ROLE_FORMULA))?;
    record.formulas.push(formula.to_string());
    let train_set = sample_cnf(&formula, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_cnf(&formula, config.test_samples, mix(seed, ROLE_TEST))?;
    let task = match run_training(config, cell.j, 1, seed, train_set, test_set, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    base_metrics(&mut record, &task)?;

    let stats = bias_stats(&task.model, &formula);
    insert_bias_metrics(&mut record, &stats);
    record.metrics.insert("neg_fraction".into(), 1.0 - stats.rho);

    // The double-De-Morgan signal: negative witnesses code the dual DNF's
    // all-negated pair clauses (both weights negative).
    let partition = witness_partition(&task.model);
    let dual = formula.demorgan_dual()?;
    let aligned = mean_aligned_per_clause(&task.model.w1, &partition.negative_rows, &dual);
    let neg_bias = sign_bias(&task.model.w1, &partition.negative_rows);
    let baseline = aligned_mc_baseline(
        partition.negative_rows.len(),
        config.num_vars,
        neg_bias,
        &dual,
        config.baseline_samples,
        mix(seed, ROLE_BASELINE),
    );
    record.metrics.insert("dual_2n_per_clause".into(), aligned);
    record.metrics.insert("dual_2n_random".into(), baseline);
    record.bias = Some(stats);
    *artifacts = Some(TrialArtifacts { model: task.model, formula: Some(formula) });
    Ok(record)
}

fn vision_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);
    let train_set = sample_consecutive_four(config.num_vars, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_consecutive_four(config.num_vars, config.test_samples, mix(seed, ROLE_TEST))?;
    let task = match run_training(config, cell.j, 1, seed, train_set, test_set, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    base_metrics(&mut record, &task)?;

    // the network's own decision errors
    let mut nn_fp = 0usize;
    let mut nn_fn = 0usize;
    let mut pos = 0usize;
    let mut neg = 0usize;
    for s in &task.test_set.samples {
        let p = task.model.predict(&s.input)?[0];
        let predicted = p > 0.5;
        if s.labels[0] != 0 {
            pos += 1;
            if !predicted {
                nn_fn += 1;
            }
        } else {
            neg += 1;
            if predicted {
                nn_fp += 1;
            }
        }
    }
    record
        .metrics
        .insert("nn_fpr".into(), if neg > 0 { nn_fp as f64 / neg as f64 } else { 0.0 });
    record
        .metrics
        .insert("nn_fnr".into(), if pos > 0 { nn_fn as f64 / pos as f64 } else { 0.0 });

    let codes = window_codes(&task.model)?;
    let unique = codes.unique_rows();
    record.metrics.insert("unique_coding_rows".into(), unique.len() as f64);
    let positions = codes.features.len().max(1);
    let total_rows: usize = codes.features.values().map(Vec::len).sum();
    record
        .metrics
        .insert("rows_per_position".into(), total_rows as f64 / positions as f64);
    let neg_bias_rows = unique.iter().filter(|&&r| task.model.b1[r] < 0.0).count();
    record.metrics.insert(
        "coding_rows_negative_bias".into(),
        if unique.is_empty() { 0.0 } else { neg_bias_rows as f64 / unique.len() as f64 },
    );

    for (mode, tag) in [(BiasMode::Signed, "signed"), (BiasMode::Magnitude, "magnitude")] {
        let cfg = DecoderConfig { bias_mode: mode, ..DecoderConfig::default() };
        let eval = evaluate_decoder(&task.model, &codes, &task.test_set, &cfg)?;
        record.metrics.insert(format!("{tag}_fpr"), eval.decision_fpr);
        record.metrics.insert(format!("{tag}_fnr"), eval.decision_fnr);
        record.metrics.insert(format!("{tag}_fully_correct"), eval.fully_correct);
        if mode == BiasMode::Signed {
            record.decoder = Some(eval);
        }
    }

    // decode the training set too, for calibration of the bias-mode toggle
    for (mode, tag) in [(BiasMode::Signed, "signed"), (BiasMode::Magnitude, "magnitude")] {
        let cfg = DecoderConfig { bias_mode: mode, ..DecoderConfig::default() };
        let eval = evaluate_decoder(&task.model, &codes, &task.train_set, &cfg)?;
        record
            .metrics
            .insert(format!("train_{tag}_decision_error"), 0.5 * (eval.decision_fpr + eval.decision_fnr));
    }
    *artifacts = Some(TrialArtifacts { model: task.model, formula: None });
    Ok(record)
}

fn multi_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);
    let formulas: Vec<Formula> = (0..config.outputs)
        .map(|t| random_paired_clauses_for_output(config, seed, t, cell.k))
        .collect::<fcc_core::Result<Vec<_>>>()?;
    for f in &formulas {
        record.formulas.push(f.to_string());
    }
    let train_set = sample_multi(&formulas, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_multi(&formulas, config.test_samples, mix(seed, ROLE_TEST))?;
    record
        .metrics
        .insert("skipped_combinations".into(), train_set.skipped_combinations as f64);
    let task = match run_training(config, cell.j, config.outputs, seed, train_set, test_set, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    base_metrics(&mut record, &task)?;
    let err = test_error(&task.model, &task.test_set, 0.5)?;
    record.metrics.insert("joint_accuracy".into(), 1.0 - err.joint);
    for (t, e) in err.per_output.iter().enumerate() {
        record.metrics.insert(format!("out{t}_test_error"), *e);
    }

    let partition = witness_partition(&task.model);
    record
        .metrics
        .insert("negative_rows".into(), partition.negative_rows.len() as f64);
    for (t, formula) in formulas.iter().enumerate() {
        let hist = count_patterns_for_output(&task.model, formula, t)?;
        let p4 = hist.mean_per_clause(RowClass::Positive, PatternType::P4);
        record.metrics.insert(format!("out{t}_4p"), p4);
        let rows = partition.rows_for_output(t);
        let bias = sign_bias(&task.model.w1, &rows);
        let baseline = aligned_mc_baseline(
            rows.len(),
            config.num_vars,
            bias,
            formula,
            config.baseline_samples,
            mix(seed, mix(ROLE_BASELINE, t as u64)),
        );
        record.metrics.insert(format!("out{t}_4p_random"), baseline);
        if t == 0 {
            record.histogram = Some(hist);
        }
    }
    *artifacts = Some(TrialArtifacts { model: task.model, formula: None });
    Ok(record)
}

/// Per-output formulas in the multi-output style: each output is a DNF of
/// `k` size-4 clauses that are variable-disjoint within the output (clauses
/// across outputs are drawn independently).
fn random_paired_clauses_for_output(
    config: &ExperimentConfig,
    seed: u64,
    output: usize,
    k: usize,
) -> fcc_core::Result<Formula> {
    let formula_seed = mix(mix(seed, ROLE_FORMULA), output as u64);
    if k * 4 > config.num_vars {
        // not enough variables for disjoint clauses; fall back to random DNF
        return random_dnf(config.num_vars, k, 4, 0, formula_seed);
    }
    fcc_core::formula::random_disjoint_dnf(config.num_vars, k, 4, formula_seed)
}

fn disentangle_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
    artifacts: &mut Option<TrialArtifacts>,
) -> ExpResult<TrialRecord> {
    let seed = trial_seed(config.seed, cell, trial);
    let mut record = empty_record(cell, trial, seed);
    let formula = random_paired_and(config.num_vars, mix(seed, ROLE_FORMULA))?;
    record.formulas.push(formula.to_string());
    let train_set = sample_paired(&formula, config.train_samples, mix(seed, ROLE_DATA))?;
    let test_set = sample_paired(&formula, config.test_samples, mix(seed, ROLE_TEST))?;
    let task = match run_training(config, cell.j, 1, seed, train_set, test_set, vec![]) {
        Ok(t) => t,
        Err(fcc_core::Error::Training(msg)) => {
            record.failed = Some(msg);
            return Ok(record);
        }
        Err(e) => return Err(e.into()),
    };
    base_metrics(&mut record, &task)?;

    let partition = witness_partition(&task.model);
    let c1 = disentangle_layer1(&task.model)?;
    let pos = &partition.positive_rows;

    let c1_2p = mean_aligned_per_clause(&c1, pos, &formula);
    let w1_2p = mean_aligned_per_clause(&task.model.w1, pos, &formula);
    let c1_baseline = aligned_mc_baseline(
        pos.len(),
        config.num_vars,
        sign_bias(&c1, pos),
        &formula,
        config.baseline_samples,
        mix(seed, ROLE_BASELINE),
    );
    let w1_baseline = aligned_mc_baseline(
        pos.len(),
        config.num_vars,
        sign_bias(&task.model.w1, pos),
        &formula,
        config.baseline_samples,
        mix(seed, mix(ROLE_BASELINE, 1)),
    );
    record.metrics.insert("c1_2p".into(), c1_2p);
    record.metrics.insert("c1_2p_random".into(), c1_baseline);
    record.metrics.insert("w1_2p".into(), w1_2p);
    record.metrics.insert("w1_2p_random".into(), w1_baseline);
    let stats = bias_stats(&task.model, &formula);
    insert_bias_metrics(&mut record, &stats);
    *artifacts = Some(TrialArtifacts { model: task.model, formula: Some(formula) });
    Ok(record)
}

/// A freshly trained model (and its target formula, when single-formula)
/// kept around for representative heat-map emission.
pub struct TrialArtifacts {
    pub model: MlpModel,
    pub formula: Option<Formula>,
}

fn run_trial(
    config: &ExperimentConfig,
    cell: CellParams,
    trial: usize,
) -> ExpResult<(TrialRecord, Option<TrialArtifacts>)> {
    let mut artifacts = None;
    let record = match config.experiment {
        ExperimentKind::Paired => paired_trial(config, cell, trial, &mut artifacts),
        ExperimentKind::Scaling => scaling_trial(config, cell, trial, &mut artifacts),
        ExperimentKind::Emergence => emergence_trial(config, cell, trial, &mut artifacts),
        ExperimentKind::AndVsOr => and_vs_or_trial(config, cell, trial, &mut artifacts),
        ExperimentKind::Cnf => cnf_trial(config, cell, trial, &mut artifacts),
        ExperimentKind::Vision => vision_trial(config, cell, trial, &mut artifacts),
        ExperimentKind::Multi => multi_trial(config, cell, trial, &mut artifacts),
        ExperimentKind::Disentangle => disentangle_trial(config, cell, trial, &mut artifacts),
    }?;
    Ok((record, artifacts))
}

fn trial_path(dir: &Path, cell: CellParams, trial: usize) -> PathBuf {
    dir.join(format!("trial_j{}_k{}_t{}.json", cell.j, cell.k, trial))
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Run (or resume) an experiment. Completed trial records are loaded from
/// disk instead of recomputed; fresh ones are written atomically as they
/// finish. Output bytes are independent of `parallel`.
pub fn run_experiment(
    config: &ExperimentConfig,
    outdir: &Path,
    parallel: usize,
) -> ExpResult<RunReport> {
    config.validate().map_err(ExperimentError::Config)?;
    fs::create_dir_all(outdir)?;
    let trials_dir = outdir.join("trials");
    fs::create_dir_all(&trials_dir)?;

    // Reject resumes against a different configuration.
    let config_path = outdir.join("config.json");
    let config_json = config.to_json();
    if config_path.exists() {
        let existing = fs::read_to_string(&config_path)?;
        if existing != config_json {
            return Err(ExperimentError::Config(format!(
                "output directory {} already holds a different config",
                outdir.display()
            )));
        }
    } else {
        fs::write(&config_path, &config_json)?;
    }

    let mut tasks = Vec::new();
    for cell in grid(config) {
        for trial in 0..config.trials {
            tasks.push((cell, trial));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel)
        .build()
        .map_err(|e| ExperimentError::Internal(e.to_string()))?;
    let outcomes: Vec<(TrialRecord, Option<TrialArtifacts>)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, trial)| -> ExpResult<(TrialRecord, Option<TrialArtifacts>)> {
                let path = trial_path(&trials_dir, cell, trial);
                if path.exists() {
                    let text = fs::read_to_string(&path)?;
                    let record = serde_json::from_str(&text).map_err(|e| {
                        ExperimentError::Internal(format!("corrupt trial file {}: {e}", path.display()))
                    })?;
                    return Ok((record, None));
                }
                let (record, artifacts) = run_trial(config, cell, trial)?;
                let mut json = serde_json::to_string_pretty(&record)
                    .map_err(|e| ExperimentError::Internal(e.to_string()))?;
                json.push('\n');
                write_atomic(&path, &json)?;
                Ok((record, artifacts))
            })
            .collect::<ExpResult<Vec<_>>>()
    })?;

    // Representative heat maps from the first task's freshly trained model.
    if let Some((_, Some(artifacts))) = outcomes.first() {
        emit_run_heatmaps(config, artifacts, outdir)?;
    }
    let records: Vec<TrialRecord> = outcomes.into_iter().map(|(r, _)| r).collect();
    let report = RunReport::assemble(config.clone(), records);
    emit_report(&report, outdir)?;
    Ok(report)
}

/// Representative heat maps for the first trial of the first cell: the raw
/// layer-1 matrix, the clause-sorted positive-witness view, and (where
/// applicable) the disentangled coding matrix or column correlations.
fn emit_run_heatmaps(
    config: &ExperimentConfig,
    artifacts: &TrialArtifacts,
    outdir: &Path,
) -> ExpResult<()> {
    let model = &artifacts.model;
    let dir = outdir.join("heatmaps");
    emit_heatmap(&model.w1, None, None, &dir.join("w1_raw.svg"))?;
    if let Some(f) = &artifacts.formula {
        let order = f.clause_column_order();
        let partition = witness_partition(model);
        emit_heatmap(
            &model.w1,
            Some(&partition.positive_rows),
            Some(&order),
            &dir.join("w1_sorted_positive.svg"),
        )?;
    }
    if model.embedding.kind() != EmbeddingKind::Identity {
        let c1 = disentangle_layer1(model)?;
        emit_heatmap(&c1, None, None, &dir.join("c1_raw.svg"))?;
    }
    if config.experiment == ExperimentKind::Vision {
        let corr = codes::column_correlation_matrix(&model.w1);
        emit_heatmap(&corr, None, None, &dir.join("column_correlation.svg"))?;
    }
    Ok(())
}
