//! Central finite-difference oracle for the analytic BCE gradients, run over
//! randomized small models. The oracle only needs the loss function and a way
//! to perturb a parameter, so it is independent of the backprop path.

use fcc_core::disentangle::EmbeddingKind;
use fcc_core::rng::{mix, rng_from};
use fcc_core::trainer::{batch_gradients, batch_loss, init_model, MlpModel, ModelDims};
use rand::Rng;

const H: f64 = 1e-4;
const REL_TOL: f64 = 1e-4;

fn random_batch(num_inputs: usize, outputs: usize, n: usize, seed: u64) -> (Vec<Vec<u8>>, Vec<Vec<u8>>) {
    let mut rng = rng_from(seed);
    let inputs: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..num_inputs).map(|_| u8::from(rng.gen_bool(0.5))).collect())
        .collect();
    let labels: Vec<Vec<u8>> = (0..n)
        .map(|_| (0..outputs).map(|_| u8::from(rng.gen_bool(0.5))).collect())
        .collect();
    (inputs, labels)
}

/// All parameter slots of a model as (group, index) plus accessors.
fn param_count(model: &MlpModel) -> usize {
    let mut count = model.w1.data().len() + model.b1.len() + model.w2.data().len();
    if model.dims.use_b2 {
        count += model.b2.len();
    }
    count
}

fn get_param(model: &MlpModel, i: usize) -> f64 {
    let n_w1 = model.w1.data().len();
    let n_b1 = model.b1.len();
    let n_w2 = model.w2.data().len();
    if i < n_w1 {
        model.w1.data()[i]
    } else if i < n_w1 + n_b1 {
        model.b1[i - n_w1]
    } else if i < n_w1 + n_b1 + n_w2 {
        model.w2.data()[i - n_w1 - n_b1]
    } else {
        model.b2[i - n_w1 - n_b1 - n_w2]
    }
}

fn set_param(model: &mut MlpModel, i: usize, v: f64) {
    let n_w1 = model.w1.data().len();
    let n_b1 = model.b1.len();
    let n_w2 = model.w2.data().len();
    if i < n_w1 {
        model.w1.data_mut()[i] = v;
    } else if i < n_w1 + n_b1 {
        model.b1[i - n_w1] = v;
    } else if i < n_w1 + n_b1 + n_w2 {
        model.w2.data_mut()[i - n_w1 - n_b1] = v;
    } else {
        model.b2[i - n_w1 - n_b1 - n_w2] = v;
    }
}

fn analytic_as_flat(model: &MlpModel) -> impl Fn(&fcc_core::trainer::Gradients, usize) -> f64 {
    let n_w1 = model.w1.data().len();
    let n_b1 = model.b1.len();
    let n_w2 = model.w2.data().len();
    move |g, i| {
        if i < n_w1 {
            g.w1.data()[i]
        } else if i < n_w1 + n_b1 {
            g.b1[i - n_w1]
        } else if i < n_w1 + n_b1 + n_w2 {
            g.w2.data()[i - n_w1 - n_b1]
        } else {
            g.b2[i - n_w1 - n_b1 - n_w2]
        }
    }
}

fn check_model(seed: u64, outputs: usize) {
    let dims = ModelDims { num_inputs: 6, hidden: 4, outputs, use_b2: true };
    let mut model = init_model(dims, EmbeddingKind::Identity, seed).unwrap();
    let (inputs, labels) = random_batch(6, outputs, 16, mix(seed, 77));
    let embedded: Vec<Vec<f64>> = inputs.iter().map(|x| model.embedding.embed(x)).collect();
    let label_refs: Vec<&[u8]> = labels.iter().map(Vec::as_slice).collect();

    let analytic = batch_gradients(&model, &embedded, &label_refs);
    let flat = analytic_as_flat(&model);

    for i in 0..param_count(&model) {
        let original = get_param(&model, i);
        set_param(&mut model, i, original + H);
        let plus = batch_loss(&model, &embedded, &label_refs);
        set_param(&mut model, i, original - H);
        let minus = batch_loss(&model, &embedded, &label_refs);
        set_param(&mut model, i, original);
        let fd = (plus - minus) / (2.0 * H);
        let an = flat(&analytic, i);
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        assert!(
            rel < REL_TOL,
            "seed {seed} param {i}: analytic {an:e} vs fd {fd:e} (rel {rel:e})"
        );
    }
}

#[test]
fn gradients_match_finite_differences_20_seeds() {
    for seed in 0..20u64 {
        let outputs = 1 + (seed % 2) as usize;
        check_model(seed, outputs);
    }
}

#[test]
fn gradients_match_without_output_bias() {
    let dims = ModelDims { num_inputs: 6, hidden: 4, outputs: 1, use_b2: false };
    let mut model = init_model(dims, EmbeddingKind::Identity, 5).unwrap();
    let (inputs, labels) = random_batch(6, 1, 16, 81);
    let embedded: Vec<Vec<f64>> = inputs.iter().map(|x| model.embedding.embed(x)).collect();
    let label_refs: Vec<&[u8]> = labels.iter().map(Vec::as_slice).collect();
    let analytic = batch_gradients(&model, &embedded, &label_refs);
    let flat = analytic_as_flat(&model);
    for i in 0..param_count(&model) {
        let original = get_param(&model, i);
        set_param(&mut model, i, original + H);
        let plus = batch_loss(&model, &embedded, &label_refs);
        set_param(&mut model, i, original - H);
        let minus = batch_loss(&model, &embedded, &label_refs);
        set_param(&mut model, i, original);
        let fd = (plus - minus) / (2.0 * H);
        let an = flat(&analytic, i);
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        assert!(rel < REL_TOL, "param {i}: analytic {an:e} vs fd {fd:e}");
    }
}

#[test]
fn gradients_match_with_hadamard_embedding() {
    let dims = ModelDims { num_inputs: 8, hidden: 4, outputs: 1, use_b2: true };
    let mut model = init_model(dims, EmbeddingKind::Hadamard, 9).unwrap();
    let (inputs, labels) = random_batch(8, 1, 12, 82);
    let embedded: Vec<Vec<f64>> = inputs.iter().map(|x| model.embedding.embed(x)).collect();
    let label_refs: Vec<&[u8]> = labels.iter().map(Vec::as_slice).collect();
    let analytic = batch_gradients(&model, &embedded, &label_refs);
    let flat = analytic_as_flat(&model);
    for i in 0..param_count(&model) {
        let original = get_param(&model, i);
        set_param(&mut model, i, original + H);
        let plus = batch_loss(&model, &embedded, &label_refs);
        set_param(&mut model, i, original - H);
        let minus = batch_loss(&model, &embedded, &label_refs);
        set_param(&mut model, i, original);
        let fd = (plus - minus) / (2.0 * H);
        let an = flat(&analytic, i);
        let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-6);
        assert!(rel < REL_TOL, "param {i}: analytic {an:e} vs fd {fd:e}");
    }
}
