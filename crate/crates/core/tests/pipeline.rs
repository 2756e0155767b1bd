use waic_core::estimators::{evaluate, four_errors, generalization_losses, training_summary};
use waic_core::harness::{run_experiment, run_trial, ExperimentConfig};
use waic_core::posterior::{effective_sample_size, metropolis_sample, McmcConfig};
use waic_core::zoo::{
    exact_bayes_training_loss_bernoulli, make_regular_gaussian, BernoulliBetaConfig,
    RegularGaussianConfig,
};
use waic_core::{sample_dataset, Dataset, Error, Model};

fn gaussian_mcmc(seed: u64) -> McmcConfig {
    McmcConfig {
        burn_in: 2000,
        thin: 10,
        keep: 1000,
        step_scale: 0.05,
        seed,
        ..McmcConfig::default()
    }
}

#[test]
fn dataset_round_trip_keeps_provenance() {
    let model = make_regular_gaussian(RegularGaussianConfig::well_specified(2, 1.0, 1e-3)).unwrap();
    let data = sample_dataset(&model, 40, 123).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    data.write_with_meta(&path, model.describe()).unwrap();
    let back = Dataset::read_csv(&path, 0).unwrap();
    assert_eq!(back.seed(), 123);
    assert_eq!(back.n(), 40);
    for (a, b) in data.iter().zip(back.iter()) {
        assert_eq!(a, b);
    }

    // Reusing the training file as a test set is caught.
    let ens = metropolis_sample(&model, &back, 1.0, &gaussian_mcmc(1)).unwrap();
    let reread = Dataset::read_csv(&path, 0).unwrap();
    assert!(matches!(
        generalization_losses(&ens, &model, &reread),
        Err(Error::Provenance(_))
    ));
    let plain = dir.path().join("plain.csv");
    data.write_csv(&plain).unwrap();
    assert_eq!(Dataset::read_csv(&plain, 9).unwrap().seed(), 9);
}

#[test]
fn malformed_csv_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x1,x2\n1.0,abc\n").unwrap();
    assert!(matches!(Dataset::read_csv(&path, 0), Err(Error::Data(_))));
    std::fs::write(&path, "a,b\n1.0,2.0\n").unwrap();
    assert!(matches!(Dataset::read_csv(&path, 0), Err(Error::Data(_))));
}

#[test]
fn bernoulli_trial_matches_oracle() {
    let text = r#"
        n = 25
        test_size = 2000
        master_seed = 11
        [model]
        type = "bernoulli_beta"
        p0 = 0.6
        a0 = 1.5
        b0 = 1.0
        [mcmc]
        burn_in = 2000
        thin = 5
        keep = 20000
        step_scale = 0.3
    "#;
    let cfg = ExperimentConfig::from_toml_str(text, &[]).unwrap();
    let report = run_trial(&cfg, 0).unwrap();
    let model = cfg.model.build().unwrap();
    let train = sample_dataset(
        model.as_ref(),
        cfg.n,
        cfg.seed(0, waic_core::harness::SeedStream::Train),
    )
    .unwrap();
    let coin_cfg = BernoulliBetaConfig {
        p0: 0.6,
        a0: 1.5,
        b0: 1.0,
    };
    let exact = exact_bayes_training_loss_bernoulli(&train, &coin_cfg, 1.0).unwrap();
    assert!(
        (report.BLt - exact).abs() < 1e-3,
        "{} vs {exact}",
        report.BLt
    );
    assert!(report.Bt <= report.Gt);
}

#[test]
fn regular_gaussian_errors_and_waic3() {
    let model = make_regular_gaussian(RegularGaussianConfig::well_specified(2, 1.0, 1e-4)).unwrap();
    let train = sample_dataset(&model, 1000, 5).unwrap();
    let test = sample_dataset(&model, 5000, 6).unwrap();
    let ens = metropolis_sample(&model, &train, 1.0, &gaussian_mcmc(7)).unwrap();
    let report = evaluate(&ens, &model, &train, &test).unwrap();
    let errors = four_errors(&ens, &model, &train, &test).unwrap();
    assert_eq!(report.Bg, errors.bg);
    assert_eq!(report.Gt, errors.gt);
    assert!(report.Bt <= report.Gt);
    assert!(report.Bg <= report.Gg);
    // n·waic3 is an order smaller than n·Bg for a regular model.
    assert!(1000.0 * report.waic3.abs() < 0.1, "{}", report.waic3);
    // Training-only estimates agree with the full report.
    let summary = training_summary(&ens, &model, &train).unwrap();
    assert_eq!(summary.blt, report.BLt);
    assert!((summary.nu_hat - report.nu_hat).abs() < 1e-9);
    // The four errors differ from the losses by the empirical entropy.
    assert!((report.GLt - report.entropy_train - report.Gt).abs() < 1e-9);
    assert!((report.BLt - report.entropy_train - report.Bt).abs() < 1e-9);
    let ess = effective_sample_size(&ens, |w| w[0]).unwrap();
    assert!(ess.ess > 100.0, "{ess:?}");
}

#[test]
fn experiment_aggregates_all_trials() {
    let text = r#"
        n = 50
        test_size = 500
        trials = 3
        [model]
        type = "regular_gaussian"
        d = 1
        [mcmc]
        burn_in = 200
        thin = 2
        keep = 200
    "#;
    let cfg = ExperimentConfig::from_toml_str(text, &[]).unwrap();
    let agg = run_experiment(&cfg).unwrap();
    assert_eq!(agg.trials, 3);
    assert!(agg.failures.is_empty());
    assert!(!agg.single_trial);
    assert!(agg.std("Bg") > 0.0);
}
