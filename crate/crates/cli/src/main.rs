use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use waic_core::estimators::training_summary;
use waic_core::harness::{run_table1, verify_state_equations, StateEquationCheck};
use waic_core::theory::identity_suite;
use waic_core::{
    metropolis_sample, run_experiment, Dataset, Error, ExperimentAggregate, ExperimentConfig,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(
    name = "waic",
    version,
    about = "Tempered-posterior experiments, WAIC and error estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML, dotted keys).
    config: PathBuf,
    /// Override a config key, e.g. `--set model.H=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> waic_core::Result<ExperimentConfig> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("master_seed={seed}"));
        }
        ExperimentConfig::load(&self.config, &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated trials and print the aggregate.
    Run(ConfigArgs),
    /// Sample the posterior for a data file and print training-only criteria.
    Waic {
        /// Data CSV with header x1..xN.
        #[arg(long)]
        data: PathBuf,
        /// Config holding the `model` and optional `mcmc` sections.
        #[arg(long)]
        model: PathBuf,
        /// Inverse temperature.
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Empirical entropy `−(1/n) Σ log q(Xᵢ)`, if known. Enables the
        /// training-only learning coefficient.
        #[arg(long)]
        entropy: Option<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Chain seed; also the data provenance tag when no sidecar exists.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run trials and check the state equations at 3 standard errors.
    Verify(ConfigArgs),
    /// Reduced rank experiment over several model ranks, written to table1.csv.
    Table1 {
        #[command(flatten)]
        config: ConfigArgs,
        /// Model ranks to run.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6")]
        ranks: Vec<usize>,
    },
    /// Check the closed-form identities and reference values.
    Identities {
        /// Shift of λ in the quadrature identity; any nonzero value must fail.
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_lambda: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Waic {
            data,
            model,
            beta,
            entropy,
            overrides,
            seed,
        } => cmd_waic(&data, &model, beta, entropy, &overrides, seed),
        Command::Verify(args) => cmd_verify(&args),
        Command::Table1 { config, ranks } => cmd_table1(&config, &ranks),
        Command::Identities { perturb_lambda } => Ok(cmd_identities(perturb_lambda)),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { EXIT_CONFIG } else { 1 })
        }
    }
}

fn print_aggregate(agg: &ExperimentAggregate) {
    println!("trials completed: {}", agg.trials);
    println!("{:<22}{:>16}{:>16}{:>16}", "metric", "mean", "std", "se");
    for (name, m) in &agg.metrics {
        println!("{name:<22}{:>16.6e}{:>16.6e}{:>16.6e}", m.mean, m.std, m.se);
    }
    for f in &agg.failures {
        eprintln!("trial {} failed: {}", f.trial, f.error);
    }
}

fn partial_status(agg: &ExperimentAggregate) -> ExitCode {
    if agg.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_PARTIAL)
    }
}

fn cmd_run(args: &ConfigArgs) -> waic_core::Result<ExitCode> {
    let cfg = args.load()?;
    let agg = run_experiment(&cfg)?;
    print_aggregate(&agg);
    Ok(partial_status(&agg))
}

fn cmd_waic(
    data: &std::path::Path,
    model: &std::path::Path,
    beta: f64,
    entropy: Option<f64>,
    overrides: &[String],
    seed: u64,
) -> waic_core::Result<ExitCode> {
    let dataset = Dataset::read_csv(data, seed)?;
    let mut all = overrides.to_vec();
    all.push(format!("n={}", dataset.n()));
    all.push(format!("beta={beta}"));
    let cfg = ExperimentConfig::load(model, &all)?;
    let model = cfg.model.build()?;
    if dataset.sample_dim() != model.sample_dim() {
        return Err(Error::Data(format!(
            "data has {} columns, model expects {}",
            dataset.sample_dim(),
            model.sample_dim()
        )));
    }
    let mcmc = waic_core::McmcConfig {
        seed,
        ..cfg.mcmc.clone()
    };
    let ensemble = metropolis_sample(model.as_ref(), &dataset, beta, &mcmc)?;
    let s = training_summary(&ensemble, model.as_ref(), &dataset)?;
    println!("n                    {}", s.n);
    println!("beta                 {}", s.beta);
    println!("BLt                  {:.10}", s.blt);
    println!("GLt                  {:.10}", s.glt);
    println!("V                    {:.10}", s.v);
    println!("waic1                {:.10}", s.waic.waic1);
    println!("waic1_variance_form  {:.10}", s.waic.waic1_variance_form);
    println!("waic2                {:.10}", s.waic.waic2);
    println!("waic3                {:.10}", s.waic3);
    println!("nu_hat               {:.10}", s.nu_hat);
    match entropy {
        Some(sn) => {
            let gt = s.glt - sn;
            let lambda = beta * s.n as f64 * gt + beta * s.nu_hat;
            println!("lambda_hat_train     {lambda:.10}");
        }
        None => println!("lambda_hat_train     n/a (pass --entropy)"),
    }
    println!("accept_rate          {:.4}", ensemble.accept_rate);
    for w in &ensemble.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}

fn print_check(check: &StateEquationCheck) {
    for (name, r) in [
        ("bayes", check.bayes),
        ("gibbs", check.gibbs),
        ("conservation", check.conservation),
    ] {
        println!(
            "{name:<14}residual {:>14.6e}  se {:>12.6e}  {}",
            r.value,
            r.se,
            if r.passed { "PASS" } else { "FAIL" }
        );
    }
}

fn cmd_verify(args: &ConfigArgs) -> waic_core::Result<ExitCode> {
    let cfg = args.load()?;
    let agg = run_experiment(&cfg)?;
    let check = verify_state_equations(&agg, cfg.beta)?;
    print_check(&check);
    if !check.all_passed() {
        return Ok(ExitCode::from(EXIT_CHECK_FAILED));
    }
    Ok(partial_status(&agg))
}

fn cmd_table1(args: &ConfigArgs, ranks: &[usize]) -> waic_core::Result<ExitCode> {
    let cfg = args.load()?;
    let result = run_table1(&cfg, ranks)?;
    println!(
        "{:>3}{:>14}{:>14}{:>14}{:>18}{:>18}",
        "H", "theory", "mean_Bg", "std_Bg", "mean_WAIC1_exc", "std_WAIC1_exc"
    );
    for row in &result.rows {
        let theory = row
            .theory_lambda_over_n
            .map_or_else(|| "-".to_string(), |v| format!("{v:.6}"));
        println!(
            "{:>3}{:>14}{:>14.6}{:>14.6}{:>18.6}{:>18.6}",
            row.h, theory, row.mean_bg, row.std_bg, row.mean_waic1_excess, row.std_waic1_excess
        );
    }
    if result.aggregates.iter().any(|a| !a.failures.is_empty()) {
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_identities(perturb_lambda: f64) -> ExitCode {
    let checks = identity_suite(perturb_lambda);
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    for c in &failed {
        println!(
            "FAIL {}: {:e} (tolerance {:e})",
            c.name, c.value, c.tolerance
        );
    }
    println!(
        "{} of {} identity checks passed",
        checks.len() - failed.len(),
        checks.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
