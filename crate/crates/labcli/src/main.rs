//! `fcclab`: train small MLPs on Boolean formula tasks and interpret their
//! weights combinatorially. One subcommand per pipeline stage plus
//! `experiment` for the full multi-trial studies.
//!
//! Exit codes: 0 success, 2 configuration error, 3 experiment completed with
//! failed trials.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fcc_core::codes::{
    clause_codes, column_correlation_matrix, decode_positions, evaluate_decoder, overlap_stats,
    pairing_accuracy, reconstruct_pairs, scan_truth, window_codes, BiasMode, DecoderConfig,
};
use fcc_core::disentangle::{disentangle_layer1, EmbeddingKind};
use fcc_core::formula::{
    self, all_vars_or, consecutive_four_formula, random_cnf_pairs, random_dnf, random_paired_and,
    Formula,
};
use fcc_core::patterns::{bias_stats, count_patterns, witness_partition};
use fcc_core::sampler::{
    sample_cnf, sample_consecutive_four, sample_dnf4, sample_multi, sample_or, sample_paired,
    Dataset,
};
use fcc_core::trainer::{init_model, test_error, train, MlpModel, ModelDims, TrainConfig};
use fcc_lab::config::{ExperimentConfig, ExperimentKind};
use fcc_lab::experiments::run_experiment;
use fcc_lab::heatmap::emit_heatmap;

#[derive(Parser)]
#[command(name = "fcclab", version, about = "Boolean-formula MLP laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormulaKindArg {
    Paired,
    Dnf,
    CnfPairs,
    Or,
    ConsecutiveFour,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DistArg {
    Paired,
    Dnf4,
    Or,
    Cnf,
    ConsecutiveFour,
    Multi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EmbeddingArg {
    Identity,
    Hadamard,
    RandomSymmetric,
}

impl From<EmbeddingArg> for EmbeddingKind {
    fn from(e: EmbeddingArg) -> Self {
        match e {
            EmbeddingArg::Identity => EmbeddingKind::Identity,
            EmbeddingArg::Hadamard => EmbeddingKind::Hadamard,
            EmbeddingArg::RandomSymmetric => EmbeddingKind::RandomSymmetric,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BiasModeArg {
    Signed,
    Magnitude,
}

impl From<BiasModeArg> for BiasMode {
    fn from(b: BiasModeArg) -> Self {
        match b {
            BiasModeArg::Signed => BiasMode::Signed,
            BiasModeArg::Magnitude => BiasMode::Magnitude,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Hidden-layer width.
    #[arg(long)]
    hidden: usize,
    #[arg(long, value_enum, default_value = "identity")]
    embedding: EmbeddingArg,
    /// Give the output layer a trainable bias.
    #[arg(long)]
    use_b2: bool,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    /// Epochs without improvement before stopping (0 disables).
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the trained model (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Optional held-out dataset to report test error on.
    #[arg(long)]
    test_data: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random target formula.
    GenFormula {
        #[arg(long, value_enum)]
        kind: FormulaKindArg,
        #[arg(long)]
        num_vars: usize,
        /// Clause count (dnf kind).
        #[arg(long, default_value_t = 8)]
        clauses: usize,
        /// Literals per clause (dnf kind).
        #[arg(long, default_value_t = 4)]
        clause_size: usize,
        /// Negated literals per clause (dnf kind).
        #[arg(long, default_value_t = 0)]
        negatives: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a labeled dataset for a distribution.
    GenData {
        #[arg(long, value_enum)]
        dist: DistArg,
        /// Formula file(s); repeat for multi-output.
        #[arg(long)]
        formula: Vec<PathBuf>,
        /// Input width for formula-free distributions (or, consecutive-four).
        #[arg(long)]
        num_vars: Option<usize>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train an MLP on a dataset file.
    Train(TrainArgs),
    /// Static analyses of a trained model against its formula.
    Analyze {
        #[command(subcommand)]
        what: AnalyzeCommand,
    },
    /// Reconstruct a paired formula from the layer-1 weight matrix.
    Reconstruct {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
    },
    /// Extract window codes and run the activation-threshold decoder.
    DecodeVision {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1.9)]
        slack: f64,
        #[arg(long, value_enum, default_value = "signed")]
        bias_mode: BiasModeArg,
        /// Directory for codes and evaluation CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print per-sample matches for the first N samples.
        #[arg(long, default_value_t = 0)]
        show: usize,
    },
    /// Recover the coding matrix C1 = W1 * C0 and optionally census it.
    Disentangle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: Option<PathBuf>,
        /// Write C1 as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a full experiment (grid x trials, resumable).
    Experiment {
        /// Experiment name: paired, scaling, emergence, and_vs_or, cnf,
        /// vision, multi, disentangle.
        name: String,
        /// JSON config; defaults to the experiment's standard setup.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        parallel: usize,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Render a model matrix as an SVG heat map.
    Heatmap {
        #[arg(long)]
        model: PathBuf,
        /// Which matrix: w1, c1, or correlation.
        #[arg(long, default_value = "w1")]
        matrix: String,
        /// Sort columns by this formula's clauses.
        #[arg(long)]
        formula: Option<PathBuf>,
        /// Keep only positive-witness rows.
        #[arg(long)]
        positive_only: bool,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Sign-pattern census per clause (4-literal clauses).
    Patterns {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
        /// Write the census CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Clause codes (positive witnesses aligned with each clause).
    Codes {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Witness and bias statistics.
    Bias {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
    },
    /// Pairwise code overlap statistics.
    Overlap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        formula: PathBuf,
    },
}

fn read_formula(path: &Path) -> Result<Formula, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    formula::from_file_string(&text).map_err(|e| e.to_string())
}

fn read_model(path: &Path) -> Result<MlpModel, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    MlpModel::from_json(&text).map_err(|e| e.to_string())
}

fn read_dataset(path: &Path) -> Result<Dataset, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Dataset::from_file_string(&text).map_err(|e| e.to_string())
}

fn write_out(path: &Path, contents: &str) -> Result<(), String> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| e.to_string())?;
    }
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

/// 2 = config/usage error, 1 = runtime failure, 3 = failed trials present.
fn run(cli: Cli) -> Result<u8, (u8, String)> {
    let conf = |m: String| (2u8, m);
    let fail = |m: String| (1u8, m);
    match cli.command {
        Command::GenFormula { kind, num_vars, clauses, clause_size, negatives, seed, out } => {
            let formula = match kind {
                FormulaKindArg::Paired => random_paired_and(num_vars, seed),
                FormulaKindArg::Dnf => random_dnf(num_vars, clauses, clause_size, negatives, seed),
                FormulaKindArg::CnfPairs => random_cnf_pairs(num_vars, seed),
                FormulaKindArg::Or => all_vars_or(num_vars),
                FormulaKindArg::ConsecutiveFour => consecutive_four_formula(num_vars),
            }
            .map_err(|e| conf(e.to_string()))?;
            write_out(&out, &formula::to_file_string(&formula)).map_err(fail)?;
            println!("wrote {} ({})", out.display(), formula);
            Ok(0)
        }
        Command::GenData { dist, formula, num_vars, n, seed, out } => {
            let dataset = match dist {
                DistArg::Paired | DistArg::Dnf4 | DistArg::Cnf => {
                    let path = formula
                        .first()
                        .ok_or_else(|| conf("this distribution needs --formula".into()))?;
                    let f = read_formula(path).map_err(conf)?;
                    match dist {
                        DistArg::Paired => sample_paired(&f, n, seed),
                        DistArg::Dnf4 => sample_dnf4(&f, n, seed),
                        _ => sample_cnf(&f, n, seed),
                    }
                }
                DistArg::Or => {
                    let nv = num_vars.ok_or_else(|| conf("--num-vars required for or".into()))?;
                    sample_or(nv, n, seed)
                }
                DistArg::ConsecutiveFour => {
                    let nv =
                        num_vars.ok_or_else(|| conf("--num-vars required for consecutive-four".into()))?;
                    sample_consecutive_four(nv, n, seed)
                }
                DistArg::Multi => {
                    if formula.len() < 2 {
                        return Err(conf("multi needs at least two --formula files".into()));
                    }
                    let formulas = formula
                        .iter()
                        .map(|p| read_formula(p))
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(conf)?;
                    sample_multi(&formulas, n, seed)
                }
            }
            .map_err(|e| fail(e.to_string()))?;
            write_out(&out, &dataset.to_file_string()).map_err(fail)?;
            println!(
                "wrote {} ({} samples, positive rate {:.3})",
                out.display(),
                dataset.len(),
                dataset.positive_rate()
            );
            Ok(0)
        }
        Command::Train(args) => {
            let dataset = read_dataset(&args.data).map_err(conf)?;
            let dims = ModelDims {
                num_inputs: dataset.num_vars,
                hidden: args.hidden,
                outputs: dataset.num_outputs,
                use_b2: args.use_b2,
            };
            let mut model =
                init_model(dims, args.embedding.into(), args.seed).map_err(|e| conf(e.to_string()))?;
            let config = TrainConfig {
                lr: args.lr,
                batch_size: args.batch,
                max_epochs: args.epochs,
                patience: args.patience,
                seed: args.seed,
                snapshot_schedule: vec![],
            };
            let history = train(&mut model, &dataset, &config).map_err(|e| fail(e.to_string()))?;
            write_out(&args.out, &model.to_json()).map_err(fail)?;
            println!(
                "trained {} epochs{} | train loss {:.6} | train error {:.4}",
                history.epochs_run,
                if history.stopped_early { " (early stop)" } else { "" },
                history.final_loss,
                history.final_error
            );
            if let Some(test_path) = args.test_data {
                let test_set = read_dataset(&test_path).map_err(conf)?;
                let err = test_error(&model, &test_set, 0.5).map_err(|e| fail(e.to_string()))?;
                println!("test error (all outputs correct): {:.4}", err.joint);
            }
            println!("wrote {}", args.out.display());
            Ok(0)
        }
        Command::Analyze { what } => {
            match what {
                AnalyzeCommand::Patterns { model, formula, out } => {
                    let m = read_model(&model).map_err(conf)?;
                    let f = read_formula(&formula).map_err(conf)?;
                    let hist = count_patterns(&m, &f).map_err(|e| fail(e.to_string()))?;
                    println!("rows: {} positive / {} negative (rho {:.3})", hist.pos_row_count, hist.neg_row_count, hist.rho);
                    for class in [fcc_core::patterns::RowClass::Positive, fcc_core::patterns::RowClass::Negative] {
                        for p in fcc_core::patterns::PatternType::ALL {
                            println!(
                                "{:>8} rows, {}: {:.3} per clause",
                                class.name(),
                                p.name(),
                                hist.mean_per_clause(class, p)
                            );
                        }
                    }
                    if let Some(path) = out {
                        let mut csv = String::from("k,j,trial,row_class,pattern,clause,count\n");
                        for row in hist.to_csv_rows(f.clauses().len(), m.hidden(), 0) {
                            csv.push_str(&row);
                            csv.push('\n');
                        }
                        write_out(&path, &csv).map_err(fail)?;
                        println!("wrote {}", path.display());
                    }
                }
                AnalyzeCommand::Codes { model, formula, out } => {
                    let m = read_model(&model).map_err(conf)?;
                    let f = read_formula(&formula).map_err(conf)?;
                    let codes = clause_codes(&m, &f);
                    print!("{}", codes.to_text());
                    println!("zero-code clauses: {}", codes.zero_code_features());
                    if let Some(path) = out {
                        write_out(&path, &codes.to_text()).map_err(fail)?;
                        println!("wrote {}", path.display());
                    }
                }
                AnalyzeCommand::Bias { model, formula } => {
                    let m = read_model(&model).map_err(conf)?;
                    let f = read_formula(&formula).map_err(conf)?;
                    let stats = bias_stats(&m, &f);
                    println!("{}", serde_json::to_string_pretty(&stats).unwrap());
                }
                AnalyzeCommand::Overlap { model, formula } => {
                    let m = read_model(&model).map_err(conf)?;
                    let f = read_formula(&formula).map_err(conf)?;
                    let stats = overlap_stats(&clause_codes(&m, &f));
                    println!("{}", serde_json::to_string_pretty(&stats).unwrap());
                }
            }
            Ok(0)
        }
        Command::Reconstruct { model, formula } => {
            let m = read_model(&model).map_err(conf)?;
            let f = read_formula(&formula).map_err(conf)?;
            let pairing = reconstruct_pairs(&m.w1).map_err(|e| fail(e.to_string()))?;
            let accuracy = pairing_accuracy(&pairing, &f).map_err(|e| fail(e.to_string()))?;
            for (v, p) in pairing.partner.iter().enumerate() {
                println!("x{v} -> x{p}");
            }
            if !pairing.zero_variance.is_empty() {
                println!("zero-variance columns: {:?}", pairing.zero_variance);
            }
            println!("pairing accuracy: {accuracy:.4}");
            Ok(0)
        }
        Command::DecodeVision { model, data, slack, bias_mode, out, show } => {
            let m = read_model(&model).map_err(conf)?;
            let dataset = read_dataset(&data).map_err(conf)?;
            let codes = window_codes(&m).map_err(|e| fail(e.to_string()))?;
            let config = DecoderConfig {
                slack_factor: slack,
                bias_mode: bias_mode.into(),
                ..DecoderConfig::default()
            };
            let eval =
                evaluate_decoder(&m, &codes, &dataset, &config).map_err(|e| fail(e.to_string()))?;
            for (i, sample) in dataset.samples.iter().take(show).enumerate() {
                let truth: Vec<usize> = scan_truth(&sample.input, config.run).into_iter().collect();
                let decoded: Vec<usize> = decode_positions(&m, &codes, &sample.input, &config)
                    .map_err(|e| fail(e.to_string()))?
                    .into_iter()
                    .collect();
                println!("sample {i}: label {} actual {:?} codes {:?}", sample.labels[0], truth, decoded);
            }
            println!(
                "decoder: FPR {:.4} FNR {:.4} fully-correct {:.4} ({} coding rows)",
                eval.decision_fpr,
                eval.decision_fnr,
                eval.fully_correct,
                codes.unique_rows().len()
            );
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| fail(e.to_string()))?;
                write_out(&dir.join("codes.txt"), &codes.to_text()).map_err(fail)?;
                let csv = format!(
                    "fpr_codes,fnr_codes,fully_correct\n{},{},{}\n",
                    eval.decision_fpr, eval.decision_fnr, eval.fully_correct
                );
                write_out(&dir.join("decoder.csv"), &csv).map_err(fail)?;
                println!("wrote {}", dir.display());
            }
            Ok(0)
        }
        Command::Disentangle { model, formula, out } => {
            let m = read_model(&model).map_err(conf)?;
            let c1 = disentangle_layer1(&m).map_err(|e| fail(e.to_string()))?;
            println!(
                "C1 = W1 * C0: {} x {} (embedding {})",
                c1.rows(),
                c1.cols(),
                m.embedding.kind()
            );
            if let Some(f_path) = formula {
                let f = read_formula(&f_path).map_err(conf)?;
                let partition = witness_partition(&m);
                let codes = fcc_core::codes::codes_in_rows(&c1, &partition.positive_rows, &f);
                let per_clause: f64 = codes.features.values().map(|v| v.len() as f64).sum::<f64>()
                    / f.clauses().len().max(1) as f64;
                println!("clause-aligned coding rows per clause in C1: {per_clause:.3}");
            }
            if let Some(path) = out {
                let mut csv = String::new();
                for r in 0..c1.rows() {
                    let row: Vec<String> = c1.row(r).iter().map(|v| v.to_string()).collect();
                    csv.push_str(&row.join(","));
                    csv.push('\n');
                }
                write_out(&path, &csv).map_err(fail)?;
                println!("wrote {}", path.display());
            }
            Ok(0)
        }
        Command::Experiment { name, config, seed, out, parallel, trials } => {
            let kind = ExperimentKind::parse(&name)
                .ok_or_else(|| conf(format!("unknown experiment '{name}'")))?;
            let mut cfg = match config {
                Some(path) => {
                    let text = fs::read_to_string(&path)
                        .map_err(|e| conf(format!("{}: {e}", path.display())))?;
                    let cfg = ExperimentConfig::from_json(&text).map_err(conf)?;
                    if cfg.experiment != kind {
                        return Err(conf(format!(
                            "config is for '{}' but experiment '{name}' was requested",
                            cfg.experiment
                        )));
                    }
                    cfg
                }
                None => ExperimentConfig::default_for(kind),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let report = run_experiment(&cfg, &out, parallel).map_err(|e| match e {
                fcc_lab::experiments::ExperimentError::Config(m) => conf(m),
                other => fail(other.to_string()),
            })?;
            println!(
                "experiment {} complete: {} trials, {} failed; report at {}",
                kind,
                report.trials.len(),
                report.failed_trials,
                out.join("report.json").display()
            );
            for (key, agg) in &report.aggregates {
                println!("  {key}: mean {:.4} std {:.4} (n={})", agg.mean, agg.std, agg.n);
            }
            Ok(if report.failed_trials > 0 { 3 } else { 0 })
        }
        Command::Heatmap { model, matrix, formula, positive_only, out } => {
            let m = read_model(&model).map_err(conf)?;
            let target = match matrix.as_str() {
                "w1" => m.w1.clone(),
                "c1" => disentangle_layer1(&m).map_err(|e| fail(e.to_string()))?,
                "correlation" => column_correlation_matrix(&m.w1),
                other => return Err(conf(format!("unknown matrix '{other}'"))),
            };
            let col_order: Option<Vec<usize>> = match formula {
                Some(path) => {
                    let f = read_formula(&path).map_err(conf)?;
                    Some(f.clause_column_order())
                }
                None => None,
            };
            let row_order: Option<Vec<usize>> = if positive_only {
                Some(witness_partition(&m).positive_rows)
            } else {
                None
            };
            emit_heatmap(&target, row_order.as_deref(), col_order.as_deref(), &out)
                .map_err(|e| fail(e.to_string()))?;
            println!("wrote {}", out.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
