use cl4cvr::runner::{run_ablation, sweep, SweepParam, ABLATION_ROWS};
use cl4cvr_core::data::{generate_synthetic, Dataset, SyntheticConfig};
use cl4cvr_core::experiment::{Hyperparams, Method, RunConfig, TrainOutcome};

fn data(signal: f64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        vocab_sizes: vec![60, 30, 10],
        train_size: 3000,
        val_size: 1500,
        test_size: 1500,
        base_ctr: 0.4,
        base_cvr: 0.25,
        click_signal: signal,
        conversion_signal: signal,
        popularity_exponent: 0.5,
        seed: 9,
        ..SyntheticConfig::default()
    })
    .unwrap()
    .dataset
}

fn config() -> RunConfig {
    RunConfig::new(
        Method::Cl4cvr,
        0,
        Hyperparams {
            batch_size: 32,
            epochs: 2,
            embedding_dim: 4,
            tower_widths: vec![8],
            encoder_widths: vec![8],
            ..Hyperparams::default()
        },
    )
}

fn nothing(_: &RunConfig, _: &TrainOutcome) -> anyhow::Result<()> {
    Ok(())
}

#[test]
fn ablation_is_independent_of_job_count() {
    let d = data(1.0);
    let one = run_ablation(&config(), &[1, 2], &d, 1, nothing).unwrap();
    let three = run_ablation(&config(), &[1, 2], &d, 3, nothing).unwrap();
    assert_eq!(one, three);
    assert_eq!(one.rows.len(), 5);
    let methods: Vec<Method> = one.rows.iter().map(|r| r.method).collect();
    assert_eq!(methods, ABLATION_ROWS.map(|(m, _)| m).to_vec());
    assert_eq!(one.gain_vs_base(Method::Base), Some(0.0));
    assert!(one.gain_vs_base(Method::Cl4cvr).is_some());
}

#[test]
fn zero_signal_gives_chance_auc() {
    let d = data(0.0);
    let table = run_ablation(&config(), &[1, 2], &d, 2, nothing).unwrap();
    // ~190 conversions among ~750 clicked test samples: the AUC standard
    // error is about 0.024, so 0.1 is a four-sigma band
    for row in &table.rows {
        let auc = row.runs.mean_test_cvr_auc().unwrap();
        assert!((auc - 0.5).abs() < 0.1, "{} {auc}", row.label);
    }
}

#[test]
fn failing_run_does_not_abort_other_rows() {
    let d = data(1.0);
    let fail_cl4cvr = |c: &RunConfig, _: &TrainOutcome| -> anyhow::Result<()> {
        anyhow::ensure!(c.method != Method::Cl4cvr, "disk full");
        Ok(())
    };
    let table = run_ablation(&config(), &[1, 2], &d, 2, fail_cl4cvr).unwrap();
    let row = table.row(Method::Cl4cvr).unwrap();
    assert_eq!(row.runs.errors().len(), 2);
    assert!(row.runs.errors()[0].contains("disk full"));
    assert!(row.runs.mean_test_cvr_auc().is_none());
    assert!(table.row(Method::EmOnly).unwrap().runs.mean_test_cvr_auc().is_some());
}

#[test]
fn ablation_needs_two_seeds() {
    assert!(run_ablation(&config(), &[1], &data(1.0), 1, nothing).is_err());
}

#[test]
fn alpha_sweep_zero_point_equals_base() {
    let d = data(1.0);
    let curve = sweep(SweepParam::Alpha, &[0.0, 0.3], &config(), &[1, 2], &d, 2, nothing).unwrap();
    let mut base = config();
    base.method = Method::Base;
    let reference = sweep(SweepParam::Alpha, &[0.0], &base, &[1, 2], &d, 1, nothing).unwrap();
    assert_eq!(curve.points[0].runs, reference.points[0].runs);
    assert_ne!(curve.points[1].runs, reference.points[0].runs);
}

#[test]
fn sweep_preconditions() {
    let d = data(1.0);
    assert!(sweep(SweepParam::Alpha, &[0.1], &config(), &[1], &d, 1, nothing).is_err());
    assert!(sweep(SweepParam::Tau, &[], &config(), &[1], &d, 1, nothing).is_err());
    let bad_tau = sweep(SweepParam::Tau, &[0.0], &config(), &[1], &d, 1, nothing).unwrap();
    assert!(bad_tau.points[0].runs.results[0].as_ref().unwrap_err().contains("tau"));
}
