//! The exhaustive verifier and the dataset-based error computation must agree
//! when the dataset enumerates the whole input cube.

use fcc_core::construct::verify_exact;
use fcc_core::disentangle::EmbeddingKind;
use fcc_core::formula::random_paired_and;
use fcc_core::sampler::{Dataset, Sample};
use fcc_core::trainer::{init_model, test_error, train, ModelDims, TrainConfig};

#[test]
fn exhaustive_mismatch_rate_equals_full_cube_test_error() {
    let num_vars = 10usize;
    let formula = random_paired_and(num_vars, 4).unwrap();
    let train_set = fcc_core::sampler::sample_paired(&formula, 2000, 5).unwrap();
    let dims = ModelDims { num_inputs: num_vars, hidden: num_vars, outputs: 1, use_b2: false };
    let mut model = init_model(dims, EmbeddingKind::Identity, 6).unwrap();
    let config = TrainConfig { lr: 0.01, max_epochs: 30, patience: 0, seed: 7, ..TrainConfig::default() };
    train(&mut model, &train_set, &config).unwrap();

    let report = verify_exact(&model, &formula).unwrap();

    let cube = Dataset {
        num_vars,
        num_outputs: 1,
        spec: "cube".into(),
        seed: 0,
        samples: (0u32..1 << num_vars)
            .map(|mask| {
                let input: Vec<u8> = (0..num_vars).map(|i| ((mask >> i) & 1) as u8).collect();
                let label = u8::from(formula.eval(&input).unwrap());
                Sample { input, labels: vec![label] }
            })
            .collect(),
        skipped_combinations: 0,
    };
    let err = test_error(&model, &cube, 0.5).unwrap();
    assert!(
        (report.mismatch_rate() - err.joint).abs() < 1e-12,
        "verify {} vs test_error {}",
        report.mismatch_rate(),
        err.joint
    );
}
