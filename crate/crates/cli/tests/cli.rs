use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use waic_core::sample_dataset;
use waic_core::zoo::{
    exact_bayes_training_loss_bernoulli, make_bernoulli_beta, BernoulliBetaConfig,
};

const COIN: &str = r#"
n = 30
test_size = 2000
trials = 2
master_seed = 3
[model]
type = "bernoulli_beta"
p0 = 0.4
a0 = 1.0
b0 = 1.0
[mcmc]
burn_in = 1000
thin = 5
keep = 20000
step_scale = 0.3
"#;

fn waic(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waic"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| {
            let mut parts = l.split_whitespace();
            (parts.next() == Some(name)).then(|| parts.next().unwrap().parse().unwrap())
        })
        .unwrap_or_else(|| panic!("no `{name}` in output:\n{text}"))
}

#[test]
fn run_single_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "coin.toml", COIN);
    let out_dir = dir.path().join("out");
    let o = waic(&[
        "run",
        &cfg,
        "--set",
        "trials=1",
        "--set",
        &format!("output_dir={}", out_dir.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("trials completed: 1"));
    for f in ["trials.csv", "aggregate.csv", "aggregate.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
}

#[test]
fn seed_flag_changes_results_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "coin.toml", COIN);
    let a = stdout(&waic(&[
        "run",
        &cfg,
        "--seed",
        "5",
        "--set",
        "mcmc.keep=500",
    ]));
    let b = stdout(&waic(&[
        "run",
        &cfg,
        "--seed",
        "5",
        "--set",
        "mcmc.keep=500",
    ]));
    let c = stdout(&waic(&[
        "run",
        &cfg,
        "--seed",
        "6",
        "--set",
        "mcmc.keep=500",
    ]));
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "coin.toml", COIN);
    let o = waic(&["run", &cfg, "--set", "model.Nx=6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model.Nx"), "{}", stderr(&o));
    let missing = waic(&["run", &dir.path().join("none.toml").display().to_string()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn waic_on_coin_data_matches_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "coin.toml", COIN);
    let coin_cfg = BernoulliBetaConfig {
        p0: 0.4,
        a0: 1.0,
        b0: 1.0,
    };
    let model = make_bernoulli_beta(coin_cfg.clone()).unwrap();
    let data = sample_dataset(&model, 30, 77).unwrap();
    let data_path = dir.path().join("coin.csv");
    data.write_csv(&data_path).unwrap();

    let o = waic(&[
        "waic",
        "--data",
        &data_path.display().to_string(),
        "--model",
        &cfg,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(field(&text, "beta"), 1.0);
    let exact = exact_bayes_training_loss_bernoulli(&data, &coin_cfg, 1.0).unwrap();
    assert!((field(&text, "BLt") - exact).abs() < 1e-3, "{text}");
    let w1 = field(&text, "waic1");
    let w2 = field(&text, "waic2");
    assert!(((w1 - w2) - (field(&text, "BLt") - field(&text, "GLt"))).abs() < 1e-9);
    assert!(text.contains("lambda_hat_train     n/a"));

    let with_entropy = stdout(&waic(&[
        "waic",
        "--data",
        &data_path.display().to_string(),
        "--model",
        &cfg,
        "--entropy",
        "0.67",
    ]));
    assert!(field(&with_entropy, "lambda_hat_train").is_finite());
}

#[test]
fn waic_rejects_empty_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "coin.toml", COIN);
    let data = write(dir.path(), "empty.csv", "x1\n");
    let o = waic(&["waic", "--data", &data, "--model", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn identities_pass_and_detect_perturbation() {
    let o = waic(&["identities"]);
    assert!(o.status.success(), "{}", stdout(&o));
    let bad = waic(&["identities", "--perturb-lambda", "0.01"]);
    assert_eq!(bad.status.code(), Some(4));
    assert!(stdout(&bad).contains("FAIL"));
}

#[test]
fn verify_prints_three_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "coin.toml", COIN);
    let o = waic(&[
        "verify",
        &cfg,
        "--set",
        "trials=4",
        "--set",
        "mcmc.keep=2000",
    ]);
    let code = o.status.code().unwrap();
    assert!(code == 0 || code == 4, "{}", stderr(&o));
    let text = stdout(&o);
    for name in ["bayes", "gibbs", "conservation"] {
        assert!(text.contains(name), "{text}");
    }
    let one = waic(&["verify", &cfg, "--set", "trials=1"]);
    assert_eq!(one.status.code(), Some(2));
}

#[test]
fn table1_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "rr.toml",
        r#"
n = 100
test_size = 500
trials = 2
[model]
type = "reduced_rank"
N1 = 3
N2 = 3
H = 1
H0 = 1
[mcmc]
burn_in = 500
thin = 2
keep = 200
"#,
    );
    let out = dir.path().join("t1");
    let o = waic(&[
        "table1",
        &cfg,
        "--ranks",
        "1,2",
        "--set",
        &format!("output_dir={}", out.display()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("table1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "H,theory_lambda_over_n,mean_Bg,std_Bg,mean_WAIC1_excess,std_WAIC1_excess"
    );
    assert_eq!(lines.count(), 2);
    assert!(out.join("H2").join("trials.csv").exists());

    let coin = write(dir.path(), "coin.toml", COIN);
    assert_eq!(waic(&["table1", &coin]).status.code(), Some(2));
}
