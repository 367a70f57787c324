//! `dropctl`: solve, simulate and sweep decentralized LQG models over a
//! packet-drop channel.
//!
//! Exit codes: 0 on success, 2 for user errors (bad arguments, unreadable or
//! invalid configs, unknown policies), 1 for internal failures.

use clap::{Parser, Subcommand, ValueEnum};
use dropctl::control::{baseline_policies, policy_by_name};
use dropctl::numfmt::{format_g, round_sig};
use dropctl::riccati::SolutionDocument;
use dropctl::sim::{evaluate_linear_policy, monte_carlo_cost, run_episode};
use dropctl::{load_model, optimal_expected_cost, solve_backward, Error, NoiseKind, ValidatedModel};
use serde::Serialize;
use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "dropctl", version, about = "Decentralized LQG control over a packet-drop channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the backward recursion and print the optimal expected cost.
    Solve {
        config: PathBuf,
        /// Write the solution JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate policies exactly and by Monte Carlo.
    Simulate {
        config: PathBuf,
        /// Policy to evaluate; repeat for several.
        #[arg(long = "policy", default_value = "optimal")]
        policies: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the first episode of the first policy as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Re-solve for a list of parameter values and print a CSV table.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepParam {
    P,
}

enum CliError {
    User(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::User(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

fn user(e: Error) -> CliError {
    CliError::User(e.to_string())
}

/// Errors past validation are ours, except the ones a user can cause by
/// naming a policy or a parameter value.
fn internal(e: Error) -> CliError {
    match e {
        Error::UnknownPolicy(_) | Error::BadProbability(_) => user(e),
        _ => CliError::Internal(e.to_string()),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read_model(path: &Path) -> CliResult<ValidatedModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read {}: {e}", path.display())))?;
    load_model(&text).and_then(|m| m.validate()).map_err(user)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::User(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn cmd_solve(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let model = read_model(config)?;
    let sol = solve_backward(&model).map_err(internal)?;
    let cost = optimal_expected_cost(&sol, &model).map_err(internal)?;
    let json = to_json(&SolutionDocument::from_solution(&sol, Some(cost), round_sig))?;
    let summary = format!("J* {}", format_g(cost));
    match out {
        Some(path) => {
            write_file(path, &json)?;
            println!("{summary}");
        }
        None => {
            print!("{json}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct ModelSummary {
    horizon: usize,
    n_x: usize,
    n_l: usize,
    n_r: usize,
    noise_kind: NoiseKind,
}

#[derive(Serialize)]
struct PolicyReport {
    name: String,
    exact: f64,
    mc_mean: f64,
    /// Absent when only one episode was run.
    mc_std_err: Option<f64>,
}

#[derive(Serialize)]
struct RunReport {
    model: ModelSummary,
    p: f64,
    episodes: usize,
    seed: u64,
    optimal_cost: f64,
    policies: Vec<PolicyReport>,
}

fn cmd_simulate(config: &Path, names: &[String], episodes: usize, seed: u64, trace: Option<&Path>) -> CliResult<()> {
    if episodes == 0 {
        return Err(CliError::User("--episodes must be at least 1".into()));
    }
    let model = read_model(config)?;
    let sol = solve_backward(&model).map_err(internal)?;
    let optimal_cost = optimal_expected_cost(&sol, &model).map_err(internal)?;
    let policies = names
        .iter()
        .map(|name| policy_by_name(&model, &sol, name).map(|p| (name.clone(), p)))
        .collect::<dropctl::Result<Vec<_>>>()
        .map_err(internal)?;

    let mut reports = Vec::with_capacity(policies.len());
    for (i, (name, policy)) in policies.iter().enumerate() {
        let started = Instant::now();
        let exact = evaluate_linear_policy(&model, policy).map_err(internal)?;
        if exact < optimal_cost - 1e-9 * optimal_cost.abs().max(1.0) {
            return Err(CliError::Internal(format!(
                "policy `{name}` has exact cost {} below the optimum {}",
                format_g(exact),
                format_g(optimal_cost)
            )));
        }
        let (mc_mean, mc_std_err) = if episodes == 1 {
            (run_episode(&model, policy, seed).map_err(internal)?.total_cost, None)
        } else {
            let est = monte_carlo_cost(&model, policy, episodes, seed).map_err(internal)?;
            (est.mean, Some(round_sig(est.std_err)))
        };
        if i == 0 {
            if let Some(path) = trace {
                write_file(path, &run_episode(&model, policy, seed).map_err(internal)?.to_csv())?;
            }
        }
        eprintln!("{name}: {:.3} s", started.elapsed().as_secs_f64());
        reports.push(PolicyReport { name: name.clone(), exact: round_sig(exact), mc_mean: round_sig(mc_mean), mc_std_err });
    }

    let report = RunReport {
        model: ModelSummary {
            horizon: model.horizon,
            n_x: model.n_x(),
            n_l: model.n_l(),
            n_r: model.n_r(),
            noise_kind: model.noise_kind,
        },
        p: model.p,
        episodes,
        seed,
        optimal_cost: round_sig(optimal_cost),
        policies: reports,
    };
    print!("{}", to_json(&report)?);
    Ok(())
}

fn cmd_sweep(config: &Path, param: SweepParam, values: &[f64]) -> CliResult<()> {
    let base = read_model(config)?;
    let SweepParam::P = param;
    let models = values
        .iter()
        .map(|&p| base.with_p(p).validate())
        .collect::<dropctl::Result<Vec<_>>>()
        .map_err(user)?;

    let mut rows = Vec::with_capacity(models.len());
    let mut header = vec!["p".to_string(), "optimal_cost".to_string()];
    for (i, model) in models.iter().enumerate() {
        let sol = solve_backward(model).map_err(internal)?;
        let mut row = vec![format_g(model.p), format_g(optimal_expected_cost(&sol, model).map_err(internal)?)];
        for (name, policy) in baseline_policies(model, &sol).map_err(internal)? {
            if i == 0 {
                header.push(name);
            }
            row.push(format_g(evaluate_linear_policy(model, &policy).map_err(internal)?));
        }
        rows.push(row.join(","));
    }
    println!("{}", header.join(","));
    for row in rows {
        println!("{row}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Solve { config, out } => cmd_solve(config, out.as_deref()),
        Command::Simulate { config, policies, episodes, seed, trace } => {
            cmd_simulate(config, policies, *episodes, *seed, trace.as_deref())
        }
        Command::Sweep { config, param, values } => cmd_sweep(config, *param, values),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
