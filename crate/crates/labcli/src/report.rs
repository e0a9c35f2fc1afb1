//! Run reports: per-trial records with nested analysis results, flat metric
//! maps, and aggregates that are always recomputable from the records. All
//! maps are ordered so serialized reports are byte-stable.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use fcc_core::codes::{DecoderEval, OverlapStats};
use fcc_core::patterns::{BiasStats, PatternHistogram, PatternType, RowClass};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    /// Hidden-layer size.
    pub j: usize,
    /// Clause count (0 where the experiment has no clause grid).
    pub k: usize,
}

/// Pattern census means at one snapshot during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmergencePoint {
    pub epoch: f64,
    pub train_error: f64,
    /// Mean count per clause, keyed `"<class>/<pattern>"`.
    pub pattern_means: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: CellParams,
    pub trial: usize,
    pub seed: u64,
    /// Target formula text(s), one per output.
    pub formulas: Vec<String>,
    /// Error message when training aborted; such trials are excluded from
    /// aggregates but counted in the report.
    pub failed: Option<String>,
    /// Flat named metrics; aggregates are computed from these.
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<BiasStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<PatternHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline: Option<PatternHistogram>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<OverlapStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoder: Option<DecoderEval>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub emergence: Vec<EmergencePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub trials: Vec<TrialRecord>,
    pub failed_trials: usize,
    /// Mean and sample standard deviation per metric, keyed
    /// `"j<j>/k<k>/<metric>"`, over non-failed trials of that cell.
    pub aggregates: BTreeMap<String, MeanStd>,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    if n == 0 {
        return MeanStd { mean: 0.0, std: 0.0, n: 0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    MeanStd { mean, std, n }
}

/// Aggregates per (cell, metric) over non-failed trials.
pub fn compute_aggregates(trials: &[TrialRecord]) -> BTreeMap<String, MeanStd> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for t in trials {
        if t.failed.is_some() {
            continue;
        }
        for (metric, value) in &t.metrics {
            let key = format!("j{}/k{}/{}", t.cell.j, t.cell.k, metric);
            groups.entry(key).or_default().push(*value);
        }
    }
    groups.into_iter().map(|(k, v)| (k, mean_std(&v))).collect()
}

impl RunReport {
    pub fn assemble(config: ExperimentConfig, trials: Vec<TrialRecord>) -> Self {
        let failed_trials = trials.iter().filter(|t| t.failed.is_some()).count();
        let aggregates = compute_aggregates(&trials);
        RunReport { config, trials, failed_trials, aggregates }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("report: {e}"))
    }

    /// Mean of a metric across every non-failed trial in a cell.
    pub fn cell_mean(&self, j: usize, k: usize, metric: &str) -> Option<f64> {
        self.aggregates.get(&format!("j{j}/k{k}/{metric}")).map(|m| m.mean)
    }
}

fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}

/// Write the report JSON plus flat CSV tables into `dir`.
pub fn emit_report(report: &RunReport, dir: &Path) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_file(&dir.join("report.json"), &report.to_json())?;

    // universal flat metric table
    let mut metrics_csv = String::from("j,k,trial,metric,value\n");
    for t in &report.trials {
        for (metric, value) in &t.metrics {
            metrics_csv.push_str(&format!(
                "{},{},{},{},{}\n",
                t.cell.j, t.cell.k, t.trial, metric, value
            ));
        }
    }
    write_file(&dir.join("metrics.csv"), &metrics_csv)?;

    // pattern histograms (trained and matched random), one row per cell
    if report.trials.iter().any(|t| t.histogram.is_some()) {
        let mut csv = String::from("source,k,j,trial,row_class,pattern,clause,count\n");
        for t in &report.trials {
            for (source, hist) in [("trained", &t.histogram), ("random", &t.baseline)] {
                if let Some(h) = hist {
                    for row in h.to_csv_rows(t.cell.k, t.cell.j, t.trial) {
                        csv.push_str(source);
                        csv.push(',');
                        csv.push_str(&row);
                        csv.push('\n');
                    }
                }
            }
        }
        write_file(&dir.join("patterns.csv"), &csv)?;
    }

    if report.trials.iter().any(|t| !t.emergence.is_empty()) {
        let mut csv = String::from("j,k,trial,epoch,train_error,series,mean_count\n");
        for t in &report.trials {
            for p in &t.emergence {
                for (series, v) in &p.pattern_means {
                    csv.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        t.cell.j, t.cell.k, t.trial, p.epoch, p.train_error, series, v
                    ));
                }
            }
        }
        write_file(&dir.join("emergence.csv"), &csv)?;
    }

    if report.trials.iter().any(|t| t.decoder.is_some()) {
        let mut csv = String::from("trial,fpr_nn,fnr_nn,fpr_codes,fnr_codes,fully_correct\n");
        for t in &report.trials {
            if let Some(d) = &t.decoder {
                let get = |k: &str| t.metrics.get(k).copied().unwrap_or(f64::NAN);
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    t.trial,
                    get("nn_fpr"),
                    get("nn_fnr"),
                    d.decision_fpr,
                    d.decision_fnr,
                    d.fully_correct
                ));
            }
        }
        write_file(&dir.join("decoder.csv"), &csv)?;
    }

    if report.config.experiment == crate::config::ExperimentKind::AndVsOr {
        let mut csv = String::from("task,avg_layer1_bias,max_abs_layer1_bias\n");
        let j = report.config.hidden_sizes[0];
        let k = report.config.clause_counts.first().copied().unwrap_or(0);
        if let (Some(a), Some(am)) = (
            report.cell_mean(j, k, "and_mean_b1_pos"),
            report.cell_mean(j, k, "and_max_abs_b1_pos"),
        ) {
            csv.push_str(&format!("AND,{a},{am}\n"));
        }
        if let (Some(o), Some(om)) = (
            report.cell_mean(j, k, "or_mean_b1_pos"),
            report.cell_mean(j, k, "or_max_abs_b1_pos"),
        ) {
            csv.push_str(&format!("OR,{o},{om}\n"));
        }
        write_file(&dir.join("table1.csv"), &csv)?;
    }
    Ok(())
}

/// Histogram means flattened for emergence tracking.
pub fn pattern_means_map(hist: &PatternHistogram) -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    for class in [RowClass::Positive, RowClass::Negative] {
        for p in PatternType::ALL {
            map.insert(
                format!("{}/{}", class.name(), p.name()),
                hist.mean_per_clause(class, p),
            );
        }
    }
    map
}
