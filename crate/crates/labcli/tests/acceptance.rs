//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p fcc-lab --test acceptance -- --nocapture` to see
//! the lines for passing criteria too.
//!
//! Every tolerance is pinned in this file; experiment hyperparameters come
//! from the per-experiment defaults (the setups the studies were designed
//! around). The master seed is fixed and was not tuned per criterion.

use std::fs;
use std::path::Path;

use fcc_core::codes::{clause_codes, BiasMode};
use fcc_core::construct::{build_planted, verify_exact, PlantedFeature, PlantedSpec};
use fcc_core::disentangle::{disentangle_layer1, Embedding, EmbeddingKind};
use fcc_core::matrix::Matrix;
use fcc_core::rng::{mix, rng_from};
use fcc_core::trainer::{batch_gradients, batch_loss, init_model, ModelDims};
use fcc_lab::config::{ExperimentConfig, ExperimentKind};
use fcc_lab::experiments::run_experiment;
use fcc_lab::report::RunReport;
use rand::Rng;

const SEED: u64 = 42;

fn run(cfg: ExperimentConfig) -> (RunReport, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let report = run_experiment(&cfg, dir.path(), 0).unwrap_or_else(|e| {
        panic!("experiment {} failed to run: {e}", cfg.experiment)
    });
    assert_eq!(report.failed_trials, 0, "failed trials in {}", cfg.experiment);
    (report, dir)
}

fn mean(report: &RunReport, j: usize, k: usize, metric: &str) -> f64 {
    report
        .cell_mean(j, k, metric)
        .unwrap_or_else(|| panic!("metric {metric} missing for j{j}/k{k}"))
}

/// A1: analytic BCE gradients match central finite differences (h = 1e-4)
/// with relative error < 1e-4 on 20 random small models.
#[test]
fn a01_gradient_correctness() {
    const H: f64 = 1e-4;
    const REL_TOL: f64 = 1e-4;
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let outputs = 1 + (seed % 2) as usize;
        let dims = ModelDims { num_inputs: 6, hidden: 4, outputs, use_b2: true };
        let mut model = init_model(dims, EmbeddingKind::Identity, mix(SEED, seed)).unwrap();
        let mut rng = rng_from(mix(SEED, 1000 + seed));
        let inputs: Vec<Vec<u8>> = (0..16)
            .map(|_| (0..6).map(|_| u8::from(rng.gen_bool(0.5))).collect())
            .collect();
        let labels: Vec<Vec<u8>> = (0..16)
            .map(|_| (0..outputs).map(|_| u8::from(rng.gen_bool(0.5))).collect())
            .collect();
        let embedded: Vec<Vec<f64>> = inputs.iter().map(|x| model.embedding.embed(x)).collect();
        let label_refs: Vec<&[u8]> = labels.iter().map(Vec::as_slice).collect();
        let analytic = batch_gradients(&model, &embedded, &label_refs);
        let n_w1 = model.w1.data().len();
        let n_b1 = model.b1.len();
        let n_w2 = model.w2.data().len();
        let n_b2 = model.b2.len();
        for i in 0..n_w1 + n_b1 + n_w2 + n_b2 {
            let get = |m: &fcc_core::trainer::MlpModel, i: usize| {
                if i < n_w1 {
                    m.w1.data()[i]
                } else if i < n_w1 + n_b1 {
                    m.b1[i - n_w1]
                } else if i < n_w1 + n_b1 + n_w2 {
                    m.w2.data()[i - n_w1 - n_b1]
                } else {
                    m.b2[i - n_w1 - n_b1 - n_w2]
                }
            };
            let set = |m: &mut fcc_core::trainer::MlpModel, i: usize, v: f64| {
                if i < n_w1 {
                    m.w1.data_mut()[i] = v;
                } else if i < n_w1 + n_b1 {
                    m.b1[i - n_w1] = v;
                } else if i < n_w1 + n_b1 + n_w2 {
                    m.w2.data_mut()[i - n_w1 - n_b1] = v;
                } else {
                    m.b2[i - n_w1 - n_b1 - n_w2] = v;
                }
            };
            let an = if i < n_w1 {
                analytic.w1.data()[i]
            } else if i < n_w1 + n_b1 {
                analytic.b1[i - n_w1]
            } else if i < n_w1 + n_b1 + n_w2 {
                analytic.w2.data()[i - n_w1 - n_b1]
            } else {
                analytic.b2[i - n_w1 - n_b1 - n_w2]
            };
            let original = get(&model, i);
            set(&mut model, i, original + H);
            let plus = batch_loss(&model, &embedded, &label_refs);
            set(&mut model, i, original - H);
            let minus = batch_loss(&model, &embedded, &label_refs);
            set(&mut model, i, original);
            let fd = (plus - minus) / (2.0 * H);
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
            assert!(
                rel < REL_TOL,
                "A1 FAIL: seed {seed} param {i}: analytic {an:e} vs fd {fd:e} (rel {rel:e})"
            );
            worst = worst.max(rel);
        }
    }
    println!("A1 PASS: 20 models, worst relative gradient error {worst:.2e} (< 1e-4)");
}

/// A2: the planted network with disjoint codes is exact on all 4096 inputs
/// at 12 variables, and code extraction returns the planted codes.
#[test]
fn a02_explicit_construction_exactness() {
    let spec = PlantedSpec::new(
        12,
        12,
        vec![
            PlantedFeature { pair: (3, 6), code: vec![4, 10] },
            PlantedFeature { pair: (2, 4), code: vec![1, 7] },
            PlantedFeature { pair: (7, 9), code: vec![2, 5] },
            PlantedFeature { pair: (0, 11), code: vec![0, 8, 11] },
        ],
    );
    let model = build_planted(&spec).unwrap();
    let formula = spec.formula().unwrap();
    let report = verify_exact(&model, &formula).unwrap();
    assert_eq!(report.total, 4096, "A2 FAIL: wrong input count");
    assert!(
        report.is_exact(),
        "A2 FAIL: {} mismatches, first {:?}",
        report.mismatches,
        report.first_counterexample
    );
    let codes = clause_codes(&model, &formula);
    for (idx, feature) in spec.features.iter().enumerate() {
        let mut expect = feature.code.clone();
        expect.sort_unstable();
        assert_eq!(codes.rows_of(idx), expect, "A2 FAIL: code mismatch for feature {idx}");
    }
    println!("A2 PASS: exact on 4096 inputs, extraction returned all planted codes");
}

/// A3: paired task, 10 formulas at 30k samples: mean test error <= 5% and
/// mean pairing accuracy >= 90%.
#[test]
fn a03_paired_reconstruction() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Paired);
    cfg.trials = 10;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let test_error = mean(&report, 16, 8, "test_error");
    let pairing = mean(&report, 16, 8, "pairing_accuracy");
    assert!(test_error <= 0.05, "A3 FAIL: mean test error {test_error:.4} > 0.05");
    assert!(pairing >= 0.90, "A3 FAIL: mean pairing accuracy {pairing:.4} < 0.90");
    println!(
        "A3 PASS: mean test error {test_error:.4} (<= 0.05), pairing accuracy {pairing:.4} (>= 0.90)"
    );
}

/// A4: AND task mean positive-witness layer-1 bias <= -0.2; OR task within
/// +/- 0.05, over 10 runs each.
#[test]
fn a04_and_vs_or_bias() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::AndVsOr);
    cfg.trials = 10;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let and_bias = mean(&report, 16, 8, "and_mean_b1_pos");
    let or_bias = mean(&report, 16, 8, "or_mean_b1_pos");
    assert!(and_bias <= -0.2, "A4 FAIL: AND mean bias {and_bias:.4} > -0.2");
    assert!(or_bias.abs() <= 0.05, "A4 FAIL: OR mean bias {or_bias:.4} outside +/-0.05");
    println!("A4 PASS: AND bias {and_bias:.4} (<= -0.2), OR bias {or_bias:.4} (within +/-0.05)");
}

/// A5: error-onset scaling at j=16, l=32: mean train error < 3% at k=4,8 and
/// > 10% at k=32, 5 trials.
#[test]
fn a05_error_onset_scaling() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Scaling);
    cfg.hidden_sizes = vec![16];
    cfg.clause_counts = vec![4, 8, 16, 32];
    cfg.trials = 5;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let e4 = mean(&report, 16, 4, "train_error");
    let e8 = mean(&report, 16, 8, "train_error");
    let e16 = mean(&report, 16, 16, "train_error");
    let e32 = mean(&report, 16, 32, "train_error");
    assert!(e4 < 0.03, "A5 FAIL: train error at k=4 is {e4:.4} (>= 0.03)");
    assert!(e8 < 0.03, "A5 FAIL: train error at k=8 is {e8:.4} (>= 0.03)");
    assert!(
        e32 > 0.10,
        "A5 FAIL: train error at k=32 is {e32:.4} (<= 0.10); curve k=4..32: {e4:.4} {e8:.4} {e16:.4} {e32:.4}"
    );
    println!("A5 PASS: train error k=4 {e4:.4}, k=8 {e8:.4}, k=16 {e16:.4}, k=32 {e32:.4}");
}

/// A6: packing limit at j=k=l=32: mean 4P per clause in positive rows within
/// [1.4, 2.6] and at most 1.25x the measured-rho packing limit.
#[test]
fn a06_packing_limit() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Scaling);
    cfg.hidden_sizes = vec![32];
    cfg.clause_counts = vec![32];
    cfg.trials = 5;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let p4 = mean(&report, 32, 32, "pos_4p");
    let limit = mean(&report, 32, 32, "packing_limit");
    assert!(
        (1.4..=2.6).contains(&p4),
        "A6 FAIL: mean 4P per clause {p4:.4} outside [1.4, 2.6]"
    );
    assert!(
        p4 <= limit * 1.25,
        "A6 FAIL: mean 4P per clause {p4:.4} > 1.25 x packing limit {limit:.4}"
    );
    println!("A6 PASS: 4P per clause {p4:.4} in [1.4, 2.6], packing limit {limit:.4} (cap {:.4})", limit * 1.25);
}

/// A7: trained-vs-random census at j=32, k=8: 4P at least 2x the matched
/// random baseline, positive-row 2P2N at most the baseline.
#[test]
fn a07_trained_vs_random_census() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Scaling);
    cfg.hidden_sizes = vec![32];
    cfg.clause_counts = vec![8];
    cfg.trials = 5;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let p4 = mean(&report, 32, 8, "pos_4p");
    let p4_rand = mean(&report, 32, 8, "pos_4p_random");
    let p2n2 = mean(&report, 32, 8, "pos_2p2n");
    let p2n2_rand = mean(&report, 32, 8, "pos_2p2n_random");
    assert!(
        p4 >= 2.0 * p4_rand,
        "A7 FAIL: trained 4P {p4:.4} < 2x random {p4_rand:.4}"
    );
    assert!(
        p2n2 <= p2n2_rand,
        "A7 FAIL: positive-row 2P2N {p2n2:.4} > random {p2n2_rand:.4}"
    );
    println!(
        "A7 PASS: 4P {p4:.4} vs random {p4_rand:.4} ({:.2}x), 2P2N {p2n2:.4} <= random {p2n2_rand:.4}",
        p4 / p4_rand
    );
}

/// A8: emergence at j=32, k=4: mean 4P count at epoch 2 at least 3x its
/// value at initialization, final train error < 3%.
#[test]
fn a08_emergence() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Emergence);
    cfg.trials = 5;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let p4_init = mean(&report, 32, 4, "p4_init");
    let p4_ep2 = mean(&report, 32, 4, "p4_epoch2");
    let err = mean(&report, 32, 4, "train_error");
    assert!(
        p4_ep2 >= 3.0 * p4_init,
        "A8 FAIL: 4P at epoch 2 {p4_ep2:.4} < 3x init {p4_init:.4}"
    );
    assert!(err < 0.03, "A8 FAIL: final train error {err:.4} >= 0.03");
    println!(
        "A8 PASS: 4P init {p4_init:.4} -> epoch 2 {p4_ep2:.4} ({:.2}x), final error {err:.4}",
        p4_ep2 / p4_init
    );
}

/// A9: one-negated clauses at j=64, k=8: 3P1Nc at least 2x its random
/// baseline and at least 2x 3P1Nnc.
#[test]
fn a09_aligned_3p1n_clauses() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Scaling);
    cfg.hidden_sizes = vec![64];
    cfg.clause_counts = vec![8];
    cfg.negatives_per_clause = 1;
    cfg.trials = 5;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let c = mean(&report, 64, 8, "pos_3p1nc");
    let c_rand = mean(&report, 64, 8, "pos_3p1nc_random");
    let nc = mean(&report, 64, 8, "pos_3p1nnc");
    assert!(c >= 2.0 * c_rand, "A9 FAIL: 3P1Nc {c:.4} < 2x random {c_rand:.4}");
    assert!(c >= 2.0 * nc, "A9 FAIL: 3P1Nc {c:.4} < 2x 3P1Nnc {nc:.4}");
    println!(
        "A9 PASS: 3P1Nc {c:.4} (random {c_rand:.4}, {:.2}x; 3P1Nnc {nc:.4}, {:.2}x)",
        c / c_rand,
        c / nc
    );
}

/// A10: pair-CNF double De Morgan: majority negative witnesses (>= 0.6) and
/// clause-aligned 2N in negative rows at least 1.5x random.
#[test]
fn a10_cnf_double_de_morgan() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Cnf);
    cfg.trials = 5;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let neg_frac = mean(&report, 16, 8, "neg_fraction");
    let aligned = mean(&report, 16, 8, "dual_2n_per_clause");
    let baseline = mean(&report, 16, 8, "dual_2n_random");
    assert!(neg_frac >= 0.6, "A10 FAIL: negative-witness fraction {neg_frac:.4} < 0.6");
    assert!(
        aligned >= 1.5 * baseline,
        "A10 FAIL: 2N aligned {aligned:.4} < 1.5x random {baseline:.4}"
    );
    println!(
        "A10 PASS: negative fraction {neg_frac:.4} (>= 0.6), 2N {aligned:.4} vs random {baseline:.4} ({:.2}x)",
        aligned / baseline
    );
}

/// A11: consecutive-four at 128x128: NN test accuracy >= 97%, >= 95% of
/// coding rows have negative bias, and the code decoder reaches mean
/// decision error <= 12% with fully-correct rate >= 70% after freezing the
/// bias-mode toggle on the first trial's training run.
#[test]
fn a11_consecutive_four_decoder() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Vision);
    cfg.trials = 3;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let j = 128;
    let test_error = mean(&report, j, 0, "test_error");
    assert!(
        test_error <= 0.03,
        "A11 FAIL: NN test accuracy {:.4} < 0.97",
        1.0 - test_error
    );
    let neg_bias = mean(&report, j, 0, "coding_rows_negative_bias");
    assert!(
        neg_bias >= 0.95,
        "A11 FAIL: coding rows with negative bias {neg_bias:.4} < 0.95"
    );

    // freeze the bias-sign toggle on the calibration trial's training set
    let calib = &report.trials[0];
    let signed_err = calib.metrics["train_signed_decision_error"];
    let magnitude_err = calib.metrics["train_magnitude_decision_error"];
    let mode = if signed_err <= magnitude_err { BiasMode::Signed } else { BiasMode::Magnitude };
    let tag = match mode {
        BiasMode::Signed => "signed",
        BiasMode::Magnitude => "magnitude",
    };
    let fpr = mean(&report, j, 0, &format!("{tag}_fpr"));
    let fnr = mean(&report, j, 0, &format!("{tag}_fnr"));
    let fully = mean(&report, j, 0, &format!("{tag}_fully_correct"));
    let decision_error = 0.5 * (fpr + fnr);
    assert!(
        decision_error <= 0.12,
        "A11 FAIL ({tag}): decoder decision error {decision_error:.4} > 0.12 (FPR {fpr:.4}, FNR {fnr:.4})"
    );
    assert!(
        fully >= 0.70,
        "A11 FAIL ({tag}): fully-correct rate {fully:.4} < 0.70"
    );
    println!(
        "A11 PASS: NN accuracy {:.4}, negative-bias coding rows {neg_bias:.4}, decoder[{tag}] \
         decision error {decision_error:.4} (FPR {fpr:.4}/FNR {fnr:.4}), fully-correct {fully:.4}",
        1.0 - test_error
    );
}

/// A12: Hadamard disentanglement: 2P alignment in C1 at least 1.5x random
/// while raw W1 stays within 1.2x random; planted round-trip to 1e-8.
#[test]
fn a12_disentanglement() {
    // planted round-trip
    let n = 16usize;
    let c0 = Embedding::build(EmbeddingKind::Hadamard, n, 0).unwrap();
    let mut rng = rng_from(mix(SEED, 999));
    let c1_star = Matrix::from_fn(12, n, |_, _| rng.gen_range(-1.0..1.0));
    let w1 = c1_star.matmul(c0.left_inv()).unwrap();
    let dims = ModelDims { num_inputs: n, hidden: 12, outputs: 1, use_b2: false };
    let mut planted = init_model(dims, EmbeddingKind::Identity, 0).unwrap();
    planted.embedding = c0;
    planted.w1 = w1;
    let recovered = disentangle_layer1(&planted).unwrap();
    let roundtrip_err = recovered.max_abs_diff(&c1_star);
    assert!(
        roundtrip_err < 1e-8,
        "A12 FAIL: planted round-trip error {roundtrip_err:e} >= 1e-8"
    );

    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Disentangle);
    cfg.trials = 5;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let c1_2p = mean(&report, 16, 8, "c1_2p");
    let c1_rand = mean(&report, 16, 8, "c1_2p_random");
    let w1_2p = mean(&report, 16, 8, "w1_2p");
    let w1_rand = mean(&report, 16, 8, "w1_2p_random");
    assert!(
        c1_2p >= 1.5 * c1_rand,
        "A12 FAIL: C1 2P {c1_2p:.4} < 1.5x random {c1_rand:.4}"
    );
    assert!(
        w1_2p <= 1.2 * w1_rand,
        "A12 FAIL: raw W1 2P {w1_2p:.4} > 1.2x random {w1_rand:.4}"
    );
    println!(
        "A12 PASS: round-trip {roundtrip_err:.2e}, C1 2P {c1_2p:.4} vs random {c1_rand:.4} \
         ({:.2}x), W1 2P {w1_2p:.4} vs random {w1_rand:.4} ({:.2}x)",
        c1_2p / c1_rand,
        w1_2p / w1_rand
    );
}

/// A13: two-output network at j=l=32, 8 clauses per output, 50k samples:
/// fully-correct test accuracy >= 90% and per-output clause-aligned 4P at
/// least 2x random in the dominant rows.
#[test]
fn a13_multi_output() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Multi);
    cfg.trials = 2;
    cfg.seed = SEED;
    let (report, _dir) = run(cfg);
    let acc = mean(&report, 32, 8, "joint_accuracy");
    assert!(acc >= 0.90, "A13 FAIL: fully-correct accuracy {acc:.4} < 0.90");
    for t in 0..2 {
        let p4 = mean(&report, 32, 8, &format!("out{t}_4p"));
        let rand = mean(&report, 32, 8, &format!("out{t}_4p_random"));
        assert!(
            p4 >= 2.0 * rand,
            "A13 FAIL: output {t} 4P {p4:.4} < 2x random {rand:.4}"
        );
    }
    let p4_0 = mean(&report, 32, 8, "out0_4p");
    let r_0 = mean(&report, 32, 8, "out0_4p_random");
    let p4_1 = mean(&report, 32, 8, "out1_4p");
    let r_1 = mean(&report, 32, 8, "out1_4p_random");
    println!(
        "A13 PASS: fully-correct accuracy {acc:.4}, out0 4P {p4_0:.4} vs {r_0:.4} ({:.2}x), \
         out1 4P {p4_1:.4} vs {r_1:.4} ({:.2}x)",
        p4_0 / r_0,
        p4_1 / r_1
    );
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                entries.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    entries.sort();
    entries
}

/// A14: identical config + seed reproduce byte-identical reports at
/// parallelism 1 and 8, and after an interrupted run is resumed.
#[test]
fn a14_determinism_and_resumability() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Scaling);
    cfg.hidden_sizes = vec![8];
    cfg.clause_counts = vec![2, 4];
    cfg.num_vars = 16;
    cfg.trials = 2;
    cfg.train_samples = 1000;
    cfg.test_samples = 300;
    cfg.train.max_epochs = 10;
    cfg.baseline_samples = 3;
    cfg.seed = SEED;

    let dir1 = tempfile::tempdir().unwrap();
    let dir8 = tempfile::tempdir().unwrap();
    run_experiment(&cfg, dir1.path(), 1).unwrap();
    run_experiment(&cfg, dir8.path(), 8).unwrap();
    let bytes1 = read_dir_bytes(dir1.path());
    let bytes8 = read_dir_bytes(dir8.path());
    assert_eq!(
        bytes1.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        bytes8.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "A14 FAIL: file sets differ between parallelism 1 and 8"
    );
    assert_eq!(bytes1, bytes8, "A14 FAIL: bytes differ between parallelism 1 and 8");

    // interrupted run: drop the report and one trial record, resume at 8
    fs::remove_file(dir1.path().join("report.json")).unwrap();
    fs::remove_file(dir1.path().join("trials/trial_j8_k4_t1.json")).unwrap();
    run_experiment(&cfg, dir1.path(), 8).unwrap();
    assert_eq!(
        read_dir_bytes(dir1.path()),
        bytes8,
        "A14 FAIL: resumed run differs from fresh run"
    );
    println!("A14 PASS: reports byte-identical across parallelism 1/8 and across resume");
}
