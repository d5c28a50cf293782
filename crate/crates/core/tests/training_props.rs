use cl4cvr_core::data::{generate_synthetic, Dataset, Sample, SyntheticConfig};
use cl4cvr_core::experiment::{evaluate, evaluate_step, plan_step, train, Hyperparams, Method, NoClock, RunConfig};
use cl4cvr_core::model::{EmbeddingConfig, ModelConfig, ModelParams};
use cl4cvr_core::rng::{stream, StreamRng, MASK_STREAM};
use rand::SeedableRng;

fn small_data() -> Dataset {
    generate_synthetic(&SyntheticConfig {
        vocab_sizes: vec![40, 30, 20],
        train_size: 1500,
        val_size: 800,
        test_size: 800,
        base_ctr: 0.4,
        base_cvr: 0.25,
        popularity_exponent: 0.5,
        seed: 5,
        ..SyntheticConfig::default()
    })
    .unwrap()
    .dataset
}

fn small_hyper() -> Hyperparams {
    Hyperparams {
        batch_size: 16,
        epochs: 3,
        embedding_dim: 4,
        tower_widths: vec![8],
        encoder_widths: vec![8],
        ..Hyperparams::default()
    }
}

#[test]
fn zero_alpha_matches_base_at_every_step() {
    let data = small_data();
    let mut hyper = small_hyper();
    hyper.alpha = 0.0;
    let base = RunConfig::new(Method::Base, 3, hyper.clone());
    let cl = RunConfig::new(Method::Cl4cvr, 3, hyper);
    let init = ModelParams::init(
        base.model_config(&data.vocab_sizes).unwrap(),
        &mut StreamRng::seed_from_u64(base.seeds().init),
    )
    .unwrap();
    let (mut pb, mut pc) = (init.clone(), init.clone());
    let (mut ab, mut ac) = (init.zeros_like(), init.zeros_like());
    let (mut rb, mut rc) = (stream(3, MASK_STREAM), stream(3, MASK_STREAM));
    for (step, batch) in data.train.chunks(16).take(60).enumerate() {
        let plan_b = plan_step(batch, &base, &pb, &mut rb).unwrap();
        let plan_c = plan_step(batch, &cl, &pc, &mut rc).unwrap();
        let ob = evaluate_step(&pb, batch, &plan_b, &base).unwrap();
        let oc = evaluate_step(&pc, batch, &plan_c, &cl).unwrap();
        assert_eq!(ob.losses.total.to_bits(), oc.losses.total.to_bits(), "step {step}");
        pb.apply_adagrad(&ob.grads, &mut ab, 0.05, 1e-8).unwrap();
        pc.apply_adagrad(&oc.grads, &mut ac, 0.05, 1e-8).unwrap();
        assert_eq!(pb, pc, "parameters diverged at step {step}");
        assert_eq!(ab, ac);
    }
}

#[test]
fn training_is_deterministic() {
    let data = small_data();
    let cfg = RunConfig::new(Method::Cl4cvr, 8, small_hyper());
    let a = train(&cfg, &data, &NoClock).unwrap();
    let b = train(&cfg, &data, &NoClock).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    assert_eq!(a.accumulators, b.accumulators);
}

#[test]
fn early_stopping_returns_the_best_validation_epoch() {
    let data = small_data();
    for (method, seed) in [(Method::Base, 1), (Method::Cl4cvr, 2), (Method::Rfm, 3)] {
        let mut hyper = small_hyper();
        hyper.epochs = 8;
        hyper.patience = 2;
        hyper.learning_rate = 0.2;
        let out = train(&RunConfig::new(method, seed, hyper), &data, &NoClock).unwrap();
        let best_seen = out.history.iter().map(|m| m.val.cvr_auc).fold(f64::MIN, f64::max);
        assert_eq!(out.best().val.cvr_auc, best_seen);
        assert_eq!(evaluate(&out.params, &data.val).unwrap(), out.best().val);
        let last = out.history.last().unwrap().epoch;
        assert!(last == 7 || last - out.best_epoch == 2, "stopped at {last}, best {}", out.best_epoch);
    }
}

/// One Adagrad step on a one-field, one-dimensional model with linear
/// towers, checked against a closed-form loss differentiated numerically.
#[test]
fn one_step_matches_scalar_oracle() {
    let config = ModelConfig::new(EmbeddingConfig::new(vec![1], 1).unwrap(), vec![], vec![1]).unwrap();
    let mut params = ModelParams::zeros(config).unwrap();
    let (e, wc, bc, wv, bv) = (0.3, 0.7, -0.2, -0.4, 0.1);
    params.embeddings[0].set(0, 0, e);
    params.ctr_tower.layers[0].weight.set(0, 0, wc);
    params.ctr_tower.layers[0].bias[0] = bc;
    params.cvr_tower.layers[0].weight.set(0, 0, wv);
    params.cvr_tower.layers[0].bias[0] = bv;
    let batch = [Sample::new(vec![0], 1, 1).unwrap(), Sample::new(vec![0], 0, 0).unwrap()];

    // theta = [e, wc, bc, wv, bv]
    let loss = |t: [f64; 5]| -> f64 {
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let yh = s(t[1] * t[0] + t[2]);
        let p = yh * s(t[3] * t[0] + t[4]);
        let ctr = -(yh.ln()) - (1.0 - yh).ln();
        let ctcvr = -(p.ln()) - (1.0 - p).ln();
        (ctr + ctcvr) / 2.0
    };
    let theta = [e, wc, bc, wv, bv];
    let h = 1e-6;
    let grad: Vec<f64> = (0..5)
        .map(|i| {
            let (mut up, mut down) = (theta, theta);
            up[i] += h;
            down[i] -= h;
            (loss(up) - loss(down)) / (2.0 * h)
        })
        .collect();

    let cfg = RunConfig::new(Method::Base, 0, Hyperparams::default());
    let mut rng = stream(0, MASK_STREAM);
    let plan = plan_step(&batch, &cfg, &params, &mut rng).unwrap();
    let out = evaluate_step(&params, &batch, &plan, &cfg).unwrap();
    assert!((out.losses.pred - loss(theta)).abs() < 1e-12);

    let lr = 0.1;
    let mut acc = params.zeros_like();
    params.apply_adagrad(&out.grads, &mut acc, lr, 1e-8).unwrap();
    let after = [
        params.embeddings[0].get(0, 0),
        params.ctr_tower.layers[0].weight.get(0, 0),
        params.ctr_tower.layers[0].bias[0],
        params.cvr_tower.layers[0].weight.get(0, 0),
        params.cvr_tower.layers[0].bias[0],
    ];
    let acc_after = [
        acc.embeddings[0].get(0, 0),
        acc.ctr_tower.layers[0].weight.get(0, 0),
        acc.ctr_tower.layers[0].bias[0],
        acc.cvr_tower.layers[0].weight.get(0, 0),
        acc.cvr_tower.layers[0].bias[0],
    ];
    for i in 0..5 {
        let g2 = grad[i] * grad[i];
        assert!((acc_after[i] - g2).abs() <= 1e-6 * g2, "accumulator {i}: {} vs {g2}", acc_after[i]);
        // first Adagrad step: -lr * g / (sqrt(g^2) + eps)
        let expected = theta[i] - lr * grad[i] / (grad[i].abs() + 1e-8);
        assert!((after[i] - expected).abs() < 1e-7, "param {i}: {} vs {expected}", after[i]);
    }
    // the mask-token row was untouched
    assert_eq!(params.embeddings[0].get(1, 0), 0.0);
}
