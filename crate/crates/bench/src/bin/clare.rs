use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use clare_bench::experiment::{generate_data, model_env, weights_for, SeedData};
use clare_bench::{build_env, run_experiment, suite, ExperimentConfig, RunReport, WeightSpec};
use clare_core::{
    behavior_policy, clare_train, empirical_expert, empirical_union, fit_dynamics, Dataset, TrainProblem,
    TRAINING_SMOOTHING,
};

#[derive(Parser)]
#[command(name = "clare", version, about = "Conservative model-based reward learning on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (JSON); defaults to the gridworld suite.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Threshold for the practical weights.
    #[arg(long, global = true)]
    u: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the environment as mdp.json.
    GenMdp,
    /// Sample expert.json and diverse.json.
    GenData,
    /// Fit model.json from the sampled data.
    FitModel,
    /// Compute weights.json.
    Weights,
    /// Train and write policy.json, reward.json and trace.csv.
    Train,
    /// Run every theory check; exits 1 if any fails.
    Verify,
    /// Run the configured experiment, or the built-in suite without --config.
    Bench,
    /// Print the aggregates of a report.json.
    Report,
}

/// Invalid input; maps to exit code 2.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

enum Outcome {
    Done,
    ChecksFailed,
}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

impl Cli {
    fn out_dir(&self, config: &ExperimentConfig) -> PathBuf {
        self.out.clone().unwrap_or_else(|| config.output_dir.clone())
    }

    fn load_config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?
            }
            None => suite::config(
                suite::EXPERT_N,
                suite::practical(suite::U),
                self.seed,
                Path::new("clare-out"),
            ),
        };
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(alpha) = self.alpha {
            config.clare.alpha = alpha;
        }
        if let Some(lambda) = self.lambda {
            config.clare.lambda = lambda;
        }
        if let Some(u) = self.u {
            match &mut config.weights {
                WeightSpec::Practical { u: current, .. } => *current = u,
                _ => return Err(config_error("--u applies to practical weights only")),
            }
        }
        config.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(config)
    }
}

fn read_artifact<T: serde::de::DeserializeOwned>(dir: &Path, name: &str) -> anyhow::Result<T> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path)
        .map_err(|e| config_error(format!("missing artifact {} ({e}); run the earlier stage first", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents).with_context(|| format!("writing {}", dir.join(name).display()))
}

/// Data written by `gen-data`, with the environment rebuilt from the config.
fn stored_data(config: &ExperimentConfig, dir: &Path) -> anyhow::Result<SeedData> {
    let env = build_env(&config.env)?;
    let expert_policy = clare_core::optimal_policy(&env)?;
    let expert: Dataset = read_artifact(dir, "expert.json")?;
    let diverse: Dataset = read_artifact(dir, "diverse.json")?;
    expert.validate(env.dims()).map_err(|e| config_error(e.to_string()))?;
    diverse.validate(env.dims()).map_err(|e| config_error(e.to_string()))?;
    Ok(SeedData {
        env,
        expert_policy,
        expert,
        diverse,
    })
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::GenMdp => {
            let config = cli.load_config()?;
            let env = build_env(&config.env)?;
            write(&cli.out_dir(&config), "mdp.json", &env.to_json()?)?;
        }
        Command::GenData => {
            let config = cli.load_config()?;
            let data = generate_data(&config, cli.seed)?;
            let dir = cli.out_dir(&config);
            write(&dir, "expert.json", &data.expert.to_json()?)?;
            write(&dir, "diverse.json", &data.diverse.to_json()?)?;
            data.expert.write_csv(fs::File::create(dir.join("expert.csv"))?)?;
            data.diverse.write_csv(fs::File::create(dir.join("diverse.csv"))?)?;
        }
        Command::FitModel => {
            let config = cli.load_config()?;
            let dir = cli.out_dir(&config);
            let data = stored_data(&config, &dir)?;
            let model = fit_dynamics(&data.expert, &data.diverse, data.env.dims(), TRAINING_SMOOTHING)?;
            write(&dir, "model.json", &model.to_json()?)?;
        }
        Command::Weights => {
            let config = cli.load_config()?;
            let dir = cli.out_dir(&config);
            let data = stored_data(&config, &dir)?;
            let (weights, _) = weights_for(&config, &data)?;
            write(&dir, "weights.json", &weights.to_json()?)?;
        }
        Command::Train => {
            let config = cli.load_config()?;
            let dir = cli.out_dir(&config);
            let data = stored_data(&config, &dir)?;
            let dims = data.env.dims();
            let weights: clare_core::WeightTable<f64> = read_artifact(&dir, "weights.json")?;
            let model = model_env(&data)?;
            let rho_e = empirical_expert::<f64>(&data.expert, dims)?;
            let rho_d = empirical_union::<f64>(&data.expert, &data.diverse, dims)?;
            let behavior = behavior_policy::<f64>(&data.expert.union(&data.diverse), dims)?;
            let out = clare_train(
                &config.clare,
                &TrainProblem {
                    model: &model,
                    rho_e: &rho_e.mass,
                    rho_d: &rho_d.mass,
                    weights: &weights,
                    behavior: (config.clare.lambda > 0.0).then_some(&behavior),
                    true_env: Some(&data.env),
                },
            )?;
            write(&dir, "policy.json", &serde_json::to_string_pretty(&out.policy)?)?;
            write(&dir, "reward.json", &out.reward.to_json()?)?;
            write(&dir, "trace.json", &out.trace.to_json()?)?;
            out.trace.write_csv(fs::File::create(dir.join("trace.csv"))?)?;
            if let Some(row) = out.trace.last() {
                println!(
                    "iterations {} saddle {:.6} return {:.6}",
                    row.iteration,
                    row.saddle_value,
                    row.return_true_env.unwrap_or(f64::NAN)
                );
            }
        }
        Command::Verify => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("clare-out")).join("verify");
            let reports = clare_verify::run_all(cli.seed)?;
            let mut failed = false;
            for r in &reports {
                write(&dir, &format!("{}.json", r.name), &r.to_json()?)?;
                println!("{}", r.summary_line());
                failed |= !r.passed;
            }
            if failed {
                return Ok(Outcome::ChecksFailed);
            }
        }
        Command::Bench => {
            let runs: Vec<(String, ExperimentConfig)> = if cli.config.is_some() {
                let mut config = cli.load_config()?;
                config.seeds = config.seeds.iter().map(|s| s + cli.seed).collect();
                vec![("experiment".to_string(), config)]
            } else {
                let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("clare-out")).join("bench");
                let mut runs: Vec<(String, ExperimentConfig)> =
                    suite::runs(cli.seed, &root).into_iter().map(|(n, c)| (n.to_string(), c)).collect();
                runs.extend(suite::u_sweep(cli.seed, &root).into_iter().map(|(u, c)| (format!("u_{u}"), c)));
                runs
            };
            for (name, config) in runs {
                let report = run_experiment(&config)?;
                print_report(&name, &report);
            }
        }
        Command::Report => {
            let dir = match (&cli.config, &cli.out) {
                (_, Some(out)) => out.clone(),
                (Some(_), None) => cli.load_config()?.output_dir,
                (None, None) => return Err(config_error("report needs --out or --config")),
            };
            let report: RunReport = read_artifact(&dir, "report.json")?;
            let recomputed = RunReport::from_rows(report.rows.clone());
            if recomputed.aggregates != report.aggregates {
                return Err(anyhow!("aggregates in {} do not match its rows", dir.display()));
            }
            print_report(&dir.display().to_string(), &report);
        }
    }
    Ok(Outcome::Done)
}

fn print_report(name: &str, report: &RunReport) {
    println!("{name}");
    for (metric, a) in &report.aggregates {
        println!("  {metric:<22} {:>10.5} ± {:.5} (n={})", a.mean, a.stddev, a.count);
    }
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        println!("  seed {} failed: {}", row.seed, row.error.as_deref().unwrap_or_default());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<ConfigError>().is_some()
                || matches!(e.downcast_ref::<clare_bench::BenchError>(), Some(clare_bench::BenchError::Config(_)));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
