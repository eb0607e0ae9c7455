use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bayesseg::cluster::{cluster_iterate, cluster_objective, ClusterAssignment, ClusterRule, ObjectiveVariant};
use bayesseg::harness::{brute_force_map, render_dir_text, run_sweep, simulate_datasets, write_tables, Dataset, ExperimentConfig};
use bayesseg::model::{DirichletPrior, NixPrior};
use bayesseg::segment::Problem;
use bayesseg::{Error, Result};

#[derive(Parser)]
#[command(name = "bayesseg", about = "MAP segmentation for Bayesian hidden Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Example {
    Fixed,
    Nix,
}

#[derive(Clone, Copy, ValueEnum)]
enum Rule {
    Mm,
    Em,
}

#[derive(Subcommand)]
enum Command {
    /// Print a built-in configuration as TOML.
    Config {
        #[arg(value_enum)]
        example: Example,
    },
    /// Simulate one replication of a configuration and write it as a dataset.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Zero-based replication index.
        #[arg(long, default_value_t = 0)]
        replication: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a sweep and write table1.csv, table2.csv, table3.csv, runs.csv and notes.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive MAP path of a small dataset under one grid cell of a configuration.
    Oracle {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Base matrix label from the configuration grid.
        #[arg(long, default_value = "Q1")]
        q: String,
        #[arg(long)]
        precision: f64,
    },
    /// Cluster the observations of a dataset, ignoring their order.
    Cluster {
        #[arg(long)]
        dataset: PathBuf,
        /// Prior locations, one per cluster.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        xi: Vec<f64>,
        #[arg(long)]
        kappa0: f64,
        #[arg(long)]
        tau0_sq: f64,
        /// Only used by the finite objective that is reported alongside.
        #[arg(long, default_value_t = 1.0)]
        nu0: f64,
        #[arg(long, value_enum, default_value = "mm")]
        rule: Rule,
        #[arg(long, default_value_t = 1000)]
        max_iters: usize,
    },
    /// Render the CSVs in a directory as aligned text tables.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig> {
    ExperimentConfig::from_toml(&fs::read_to_string(path)?)
}

fn execute(cmd: Command) -> Result<String> {
    match cmd {
        Command::Config { example } => Ok(match example {
            Example::Fixed => ExperimentConfig::example_fixed(),
            Example::Nix => ExperimentConfig::example_nix(),
        }
        .to_toml()),
        Command::Generate { config, replication, out } => {
            let mut cfg = load_config(&config)?;
            if replication >= cfg.replications {
                return Err(Error::Config(format!("replication {replication} >= {}", cfg.replications)));
            }
            cfg.replications = replication + 1;
            let data = simulate_datasets(&cfg)?.swap_remove(replication);
            fs::write(&out, data.to_text())?;
            Ok(format!("wrote {} observations to {}\n", data.obs.len(), out.display()))
        }
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let rows = run_sweep(&cfg)?;
            write_tables(&rows, &out)?;
            let na = rows.iter().filter(|r| r.best_score.is_none()).count();
            Ok(format!("{} rows ({na} na) written to {}\n", rows.len(), out.display()))
        }
        Command::Oracle { config, dataset, q, precision } => {
            let cfg = load_config(&config)?;
            let data = Dataset::parse(&fs::read_to_string(&dataset)?)?;
            let entry = cfg
                .grid
                .iter()
                .find(|g| g.q == q)
                .ok_or_else(|| Error::Config(format!("no grid entry {q:?}")))?;
            let prior = DirichletPrior::new(precision, cfg.base_matrix(entry)?)?;
            let mode = cfg.emission_mode()?;
            let problem = Problem::new(&data.obs, &prior, &mode, &cfg.truth.initial)?;
            let (path, score) = brute_force_map(&problem)?;
            Ok(format!("ln p(x, y) = {score}\npath = {path}\n"))
        }
        Command::Cluster { dataset, xi, kappa0, tau0_sq, nu0, rule, max_iters } => {
            let data = Dataset::parse(&fs::read_to_string(&dataset)?)?;
            let k = xi.len();
            let prior = NixPrior::new(xi.clone(), kappa0, nu0, tau0_sq)?;
            let init = ClusterAssignment::new(
                data.obs
                    .iter()
                    .map(|&x| (0..k).min_by(|&a, &b| (x - xi[a]).abs().total_cmp(&(x - xi[b]).abs())).unwrap_or(0))
                    .collect(),
                k,
            )?;
            let rule = match rule {
                Rule::Mm => ClusterRule::Mm,
                Rule::Em => ClusterRule::Em,
            };
            let run = cluster_iterate(&data.obs, &prior, rule, &init, max_iters)?;
            let limit = cluster_objective(&run.assignment, &data.obs, &prior, ObjectiveVariant::Nu0Limit)?;
            let finite = cluster_objective(&run.assignment, &data.obs, &prior, ObjectiveVariant::FiniteNu0)?;
            let labels: Vec<String> = run.assignment.labels().iter().map(|l| (l + 1).to_string()).collect();
            Ok(format!(
                "iterations = {}{}\nsizes = {:?}\ncenters = {:?}\nobjective = {limit}\nfinite_nu0_objective = {finite}\nlabels = {}\n",
                run.iterations,
                if run.converged { "" } else { " (not converged)" },
                run.assignment.sizes(),
                run.centers,
                labels.join(" ")
            ))
        }
        Command::Report { dir } => render_dir_text(&dir),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
