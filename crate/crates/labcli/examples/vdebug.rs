use fcc_core::codes::window_codes;
use fcc_core::disentangle::EmbeddingKind;
use fcc_core::patterns::witness_partition;
use fcc_core::sampler::sample_consecutive_four;
use fcc_core::trainer::{init_model, train, ModelDims, TrainConfig};

fn main() {
    let train_set = sample_consecutive_four(128, 10_000, 500).unwrap();
    let dims = ModelDims { num_inputs: 128, hidden: 128, outputs: 1, use_b2: false };
    let mut model = init_model(dims, EmbeddingKind::Identity, 502).unwrap();
    let config = TrainConfig {
        lr: 0.01, batch_size: 64, max_epochs: 200, patience: 0, seed: 503,
        snapshot_schedule: vec![0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0],
    };
    let hist = train(&mut model, &train_set, &config).unwrap();
    for p in &hist.points {
        let codes = window_codes(&p.model).unwrap();
        let unique = codes.unique_rows().len();
        let rows_per: f64 = codes.features.values().map(|v| v.len() as f64).sum::<f64>() / codes.features.len() as f64;
        let partition = witness_partition(&p.model);
        let pos_rows = &partition.positive_rows;
        let pos_frac: f64 = pos_rows.iter()
            .map(|&r| p.model.w1.row(r).iter().filter(|&&v| v > 0.0).count() as f64 / 128.0)
            .sum::<f64>() / pos_rows.len().max(1) as f64;
        println!(
            "ep {:>5.1}: err {:.4} | pos rows {} | pos-entry frac {:.3} | unique coding {} | rows/pos {:.2}",
            p.epoch, p.train_error, pos_rows.len(), pos_frac, unique, rows_per
        );
    }
}
