//! Experiment configuration: explicit keys, unknown keys rejected, defaults
//! per experiment family matching the setups the analyses were designed for.

use fcc_core::disentangle::EmbeddingKind;
use fcc_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Paired,
    Scaling,
    Emergence,
    AndVsOr,
    Cnf,
    Vision,
    Multi,
    Disentangle,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Paired,
        ExperimentKind::Scaling,
        ExperimentKind::Emergence,
        ExperimentKind::AndVsOr,
        ExperimentKind::Cnf,
        ExperimentKind::Vision,
        ExperimentKind::Multi,
        ExperimentKind::Disentangle,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Paired => "paired",
            ExperimentKind::Scaling => "scaling",
            ExperimentKind::Emergence => "emergence",
            ExperimentKind::AndVsOr => "and_vs_or",
            ExperimentKind::Cnf => "cnf",
            ExperimentKind::Vision => "vision",
            ExperimentKind::Multi => "multi",
            ExperimentKind::Disentangle => "disentangle",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Hidden-layer sizes to sweep (grid axis).
    pub hidden_sizes: Vec<usize>,
    /// Clause counts to sweep (grid axis; ignored by experiments without a
    /// clause grid).
    pub clause_counts: Vec<usize>,
    pub num_vars: usize,
    /// Negated literals per clause (scaling-family experiments).
    #[serde(default)]
    pub negatives_per_clause: usize,
    /// Output neurons (multi experiment).
    #[serde(default = "one")]
    pub outputs: usize,
    pub trials: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub embedding: EmbeddingKind,
    pub use_b2: bool,
    pub train: TrainConfig,
    /// Master seed; every trial derives its own stream.
    pub seed: u64,
    /// Bias init range r: biases start in Uniform(-r, r).
    #[serde(default = "one_f")]
    pub bias_init_range: f64,
    /// Sign-matrix samples per random baseline.
    #[serde(default = "ten")]
    pub baseline_samples: usize,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

impl ExperimentConfig {
    /// Defaults for each experiment family.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let base_train = TrainConfig {
            lr: 0.001,
            batch_size: 64,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            snapshot_schedule: vec![],
        };
        let mut cfg = ExperimentConfig {
            experiment: kind,
            hidden_sizes: vec![16],
            clause_counts: vec![8],
            num_vars: 32,
            negatives_per_clause: 0,
            outputs: 1,
            trials: 10,
            train_samples: 20_000,
            test_samples: 5_000,
            embedding: EmbeddingKind::Identity,
            use_b2: true,
            train: base_train,
            seed: 0,
            bias_init_range: 1.0,
            baseline_samples: 10,
        };
        match kind {
            ExperimentKind::Paired => {
                cfg.num_vars = 16;
                cfg.hidden_sizes = vec![16];
                cfg.clause_counts = vec![8];
                cfg.train_samples = 30_000;
                cfg.use_b2 = false;
                cfg.train.lr = 0.01;
                cfg.train.max_epochs = 800;
                cfg.train.patience = 25;
            }
            ExperimentKind::Scaling => {
                cfg.hidden_sizes = vec![16, 32, 64];
                cfg.clause_counts = vec![2, 4, 8, 12, 16, 24, 32, 42, 56, 64];
            }
            ExperimentKind::Emergence => {
                cfg.hidden_sizes = vec![32];
                cfg.clause_counts = vec![4];
                cfg.train.max_epochs = 20;
                cfg.train.patience = 0;
                cfg.train.snapshot_schedule = emergence_schedule(20);
            }
            ExperimentKind::AndVsOr => {
                cfg.num_vars = 16;
                cfg.hidden_sizes = vec![16];
                cfg.clause_counts = vec![8];
                cfg.train_samples = 10_000;
                cfg.use_b2 = false;
                cfg.train.lr = 0.01;
                cfg.train.max_epochs = 400;
                cfg.train.patience = 25;
                // Sparse OR inputs (density 0.043) never activate a deeply
                // negative initial bias, freezing it; fan-in-scaled init
                // keeps every row trainable so the learned bias is measured,
                // not the initialization.
                cfg.bias_init_range = 0.25;
            }
            ExperimentKind::Cnf => {
                cfg.num_vars = 16;
                cfg.hidden_sizes = vec![16];
                cfg.clause_counts = vec![8];
                cfg.train_samples = 40_000;
                cfg.use_b2 = false;
                cfg.train.lr = 0.01;
                cfg.train.max_epochs = 400;
                cfg.train.patience = 25;
            }
            ExperimentKind::Vision => {
                cfg.num_vars = 128;
                cfg.hidden_sizes = vec![128];
                cfg.clause_counts = vec![];
                cfg.train_samples = 10_000;
                cfg.test_samples = 2_000;
                cfg.use_b2 = false;
                cfg.train.lr = 0.01;
                cfg.train.max_epochs = 20;
                cfg.train.patience = 0;
                cfg.trials = 3;
            }
            ExperimentKind::Multi => {
                cfg.hidden_sizes = vec![32];
                cfg.clause_counts = vec![8];
                cfg.outputs = 2;
                cfg.train_samples = 50_000;
                cfg.train.max_epochs = 400;
                cfg.trials = 3;
            }
            ExperimentKind::Disentangle => {
                cfg.num_vars = 16;
                cfg.hidden_sizes = vec![16];
                cfg.clause_counts = vec![8];
                cfg.train_samples = 30_000;
                cfg.use_b2 = false;
                cfg.embedding = EmbeddingKind::Hadamard;
                cfg.train.lr = 0.01;
                cfg.train.max_epochs = 2000;
                cfg.train.patience = 0;
                cfg.trials = 5;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.hidden_sizes.is_empty() {
            return Err("hidden_sizes must be nonempty".into());
        }
        if self.num_vars == 0 {
            return Err("num_vars must be positive".into());
        }
        if self.train_samples == 0 {
            return Err("train_samples must be positive".into());
        }
        if !(self.bias_init_range >= 0.0) {
            return Err("bias_init_range must be nonnegative".into());
        }
        let needs_clauses = matches!(
            self.experiment,
            ExperimentKind::Scaling | ExperimentKind::Emergence | ExperimentKind::Multi
        );
        if needs_clauses && self.clause_counts.is_empty() {
            return Err("clause_counts must be nonempty for this experiment".into());
        }
        if self.experiment == ExperimentKind::Multi && self.outputs < 2 {
            return Err("multi experiment needs outputs >= 2".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("config: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// The emergence snapshot schedule: initialization, fifths of the first three
/// epochs, then whole epochs.
pub fn emergence_schedule(max_epochs: usize) -> Vec<f64> {
    let mut points: Vec<f64> = (0..=15).map(|i| i as f64 / 5.0).collect();
    for e in 4..=max_epochs {
        points.push(e as f64);
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in ExperimentKind::ALL {
            let cfg = ExperimentConfig::default_for(kind);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
            assert_eq!(cfg, back);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut json: serde_json::Value =
            serde_json::from_str(&ExperimentConfig::default_for(ExperimentKind::Paired).to_json())
                .unwrap();
        json.as_object_mut()
            .unwrap()
            .insert("typo_key".into(), serde_json::Value::Bool(true));
        assert!(ExperimentConfig::from_json(&json.to_string()).is_err());
    }

    #[test]
    fn emergence_schedule_shape() {
        let s = emergence_schedule(5);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[1], 0.2);
        assert!(s.contains(&3.0));
        assert!(s.contains(&5.0));
        assert!(!s.contains(&3.2));
    }
}
