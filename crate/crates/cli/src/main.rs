use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sau_core::config::{preset, ExperimentConfig, PolicyConfig, PRESETS};
use sau_core::experiment::{ranking, write_outcome, write_ranking, PolicyOutcome};
use sau_core::harness::{
    check_log_regret, check_prop1, check_prop2, check_prop4, check_tau_convergence, read_design_csv,
    read_trace_csv, write_summary_json, CheckReport,
};
use sau_core::rng::Purpose;
use sau_core::{Error, RngStream};
use serde_json::{json, Value};

/// Bandit experiments with sample-average-uncertainty exploration.
#[derive(Debug, Parser)]
#[command(name = "sau", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Named built-in config; see `sau reproduce --list`.
    #[arg(long, global = true)]
    preset: Option<String>,

    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Trials run concurrently.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every policy of a config; writes one CSV and one JSON summary per policy.
    Run(Scale),
    /// Like `run`, plus a ranking by final mean cumulative regret.
    Compare(Scale),
    /// Monte-Carlo checks of the uncertainty estimates; prints a JSON report.
    PropCheck(PropArgs),
    /// Run a named preset as a comparison.
    Reproduce {
        #[command(flatten)]
        scale: Scale,
        /// List the presets and exit.
        #[arg(long)]
        list: bool,
    },
}

/// Desk-scale overrides.
#[derive(Debug, Args, Clone, Copy, Default)]
struct Scale {
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Which {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
    #[value(name = "4")]
    Four,
    TauConvergence,
    LogRegret,
}

#[derive(Debug, Args)]
struct PropArgs {
    which: Which,
    /// Arm mean for the Bernoulli checks.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Pulls of the arm (design rows for check 4).
    #[arg(long)]
    n_a: Option<u64>,
    /// Monte-Carlo repetitions (noise redraws for check 4).
    #[arg(long)]
    trials: Option<usize>,
    /// Feature dimension of the generated design (check 4).
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 0.25)]
    sigma2: f64,
    /// Headerless CSV of design rows (check 4).
    #[arg(long)]
    design: Option<PathBuf>,
    /// Trace CSV to fit (log-regret); without it the config's SAU policies are run.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Steps skipped before the fit; defaults to 10% of the horizon.
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    min_r2: f64,
    /// Horizon override when running the config (log-regret).
    #[arg(long)]
    horizon: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

/// `Ok(false)` means a check ran and failed.
fn dispatch(cli: &Cli) -> sau_core::Result<bool> {
    match &cli.command {
        Command::Run(scale) => run(cli, *scale, false),
        Command::Compare(scale) => run(cli, *scale, true),
        Command::Reproduce { list: true, .. } => {
            for (name, _) in PRESETS {
                println!("{name}");
            }
            Ok(true)
        }
        Command::Reproduce { scale, .. } => {
            if cli.preset.is_none() {
                return Err(Error::Config("`reproduce` needs --preset".into()));
            }
            run(cli, *scale, true)
        }
        Command::PropCheck(args) => prop_check(cli, args),
    }
}

/// Resolves `--config` / `--preset`, falling back to the preset `default` when neither is given.
fn load(cli: &Cli, scale: Scale, default: Option<&str>) -> sau_core::Result<(ExperimentConfig, PathBuf)> {
    if cli.config.is_some() && cli.preset.is_some() {
        return Err(Error::Config("give either --config or --preset, not both".into()));
    }
    let (mut cfg, base) = match (&cli.config, cli.preset.as_deref().or(default)) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(name)) => (preset(name)?, PathBuf::from(".")),
        (None, None) => return Err(Error::Config("missing --config or --preset".into())),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    if let Some(t) = scale.trials {
        cfg.trials = t;
    }
    if let Some(h) = scale.horizon {
        cfg.horizon = h;
    }
    Ok((cfg, base))
}

fn run(cli: &Cli, scale: Scale, rank: bool) -> sau_core::Result<bool> {
    let (cfg, base) = load(cli, scale, None)?;
    let experiment = cfg.prepare(&base)?;
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut outcomes = Vec::new();
    for (i, p) in cfg.policies.iter().enumerate() {
        eprintln!("{}: {} trials x {} steps", p.label(), cfg.trials, cfg.horizon);
        let o = experiment.run_policy(i)?;
        write_outcome(&out, &cfg, &o)?;
        outcomes.push(o);
    }
    if rank {
        let rows = ranking(&outcomes);
        write_ranking(&out, &rows)?;
        print_ranking(&outcomes, &rows);
    }
    Ok(true)
}

fn print_ranking(outcomes: &[PolicyOutcome], rows: &[sau_core::experiment::RankRow]) {
    let width = outcomes.iter().map(|o| o.label.len()).max().unwrap_or(6).max(6);
    println!("{:>4}  {:<width$}  {:>14}  {:>10}", "rank", "policy", "final regret", "sem");
    for r in rows {
        let sem = r.sem_final_regret.map(|s| format!("{s:.3}")).unwrap_or_else(|| "-".into());
        println!("{:>4}  {:<width$}  {:>14.3}  {:>10}", r.rank, r.policy, r.mean_final_regret, sem);
    }
}

fn emit(cli: &Cli, name: &str, report: &Value) -> sau_core::Result<()> {
    println!("{}", serde_json::to_string_pretty(report)?);
    if let Some(dir) = &cli.out {
        write_summary_json(dir.join(format!("prop-check-{name}.json")), report)?;
    }
    Ok(())
}

fn check_json(r: &CheckReport) -> sau_core::Result<Value> {
    Ok(serde_json::to_value(r)?)
}

fn prop_check(cli: &Cli, a: &PropArgs) -> sau_core::Result<bool> {
    let mut rng = RngStream::derive(cli.seed.unwrap_or(2020), 0, Purpose::Check);
    let (name, report) = match a.which {
        Which::One => ("1", check_prop1(a.mu, a.n_a.unwrap_or(500), a.trials.unwrap_or(10_000), &mut rng)?),
        Which::Two => ("2", check_prop2(a.mu, a.n_a.unwrap_or(100), a.trials.unwrap_or(10_000), &mut rng)?),
        Which::TauConvergence => (
            "tau-convergence",
            check_tau_convergence(a.mu, a.n_a.unwrap_or(10_000), a.trials.unwrap_or(200), &mut rng)?,
        ),
        Which::Four => {
            let design = match &a.design {
                Some(p) => read_design_csv(p)?,
                None => {
                    let rows = a.n_a.unwrap_or(200) as usize;
                    (0..rows).map(|_| (0..a.dim).map(|_| rng.standard_normal()).collect()).collect()
                }
            };
            match check_prop4(&design, a.sigma2, a.trials.unwrap_or(10_000), &mut rng) {
                Ok(r) => ("4", r),
                Err(e) => {
                    emit(cli, "4", &json!({ "check": "prop4", "pass": false, "error": e.to_string() }))?;
                    return Err(e);
                }
            }
        }
        Which::LogRegret => return log_regret(cli, a),
    };
    emit(cli, name, &check_json(&report)?)?;
    Ok(report.pass)
}

fn log_regret(cli: &Cli, a: &PropArgs) -> sau_core::Result<bool> {
    let curves: Vec<(String, Vec<f64>)> = match &a.trace {
        Some(path) => vec![(path.display().to_string(), read_trace_csv(path)?)],
        None => {
            let scale = Scale { trials: a.trials, horizon: a.horizon };
            let (mut cfg, base) = load(cli, scale, Some("appendixA-bernoulli"))?;
            let is_sau = |p: &PolicyConfig| matches!(p, PolicyConfig::SauUcb { .. } | PolicyConfig::SauSampling { .. });
            if cfg.policies.iter().any(is_sau) {
                cfg.policies.retain(is_sau);
            }
            let experiment = cfg.prepare(Path::new(&base))?;
            (0..cfg.policies.len())
                .map(|i| experiment.run_policy(i).map(|o| (o.label, o.summary.mean_cumulative)))
                .collect::<sau_core::Result<_>>()?
        }
    };
    let mut all_pass = true;
    let mut fits = Vec::new();
    for (label, curve) in &curves {
        let burn_in = a.burn_in.unwrap_or(curve.len() / 10);
        let fit = check_log_regret(curve, burn_in)?;
        let pass = fit.r2 >= a.min_r2;
        all_pass &= pass;
        fits.push(json!({ "policy": label, "pass": pass, "min_r2": a.min_r2, "fit": fit }));
    }
    emit(cli, "log-regret", &json!({ "check": "log-regret", "pass": all_pass, "fits": fits }))?;
    Ok(all_pass)
}
