//! `uq`: command-line front end for the experiment harness.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use uq_core::experiments::{self, BasisChoice, ExperimentConfig, ExperimentId};
use uq_core::maxent::{MaxentBasis, NodeSet};

#[derive(Parser, Debug)]
#[command(
    name = "uq",
    version,
    about = "Chaos-expansion surrogates for linear ODEs with random parameters"
)]
struct Cli {
    /// JSON file with experiment settings; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Maximum-entropy basis utilities.
    #[command(subcommand)]
    Basis(BasisCommand),
    /// Run a single example.
    Run {
        #[arg(value_enum)]
        example: Example,
        #[command(flatten)]
        opts: RunOptions,
    },
    /// Parameter sweeps on example 1.
    #[command(subcommand)]
    Sweep(SweepCommand),
}

#[derive(Subcommand, Debug)]
enum BasisCommand {
    /// Evaluate all basis functions at one point.
    Eval {
        /// Node file: one node per line, coordinates separated by spaces or commas.
        #[arg(long, value_name = "FILE")]
        nodes: PathBuf,
        /// Query point, comma-separated coordinates.
        #[arg(long, value_name = "X", allow_hyphen_values = true)]
        query: String,
        /// Gaussian prior sharpness (0 = uniform prior).
        #[arg(long, default_value_t = 0.0)]
        beta: f64,
    },
}

#[derive(Subcommand, Debug)]
enum SweepCommand {
    /// Errors at the report time against the number of basis functions.
    Basis {
        /// Basis counts, e.g. 2,3,4,5.
        #[arg(long, value_delimiter = ',')]
        list: Option<Vec<usize>>,
        #[command(flatten)]
        opts: RunOptions,
    },
    /// Error statistics over random sample sets of several sizes.
    Samples {
        /// Sample counts, e.g. 50,100,200,400.
        #[arg(long, value_delimiter = ',')]
        list: Option<Vec<usize>>,
        #[command(flatten)]
        opts: RunOptions,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Example {
    Example1,
    Example2,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum BasisArg {
    Maxent,
    Apc,
    Both,
}

impl From<BasisArg> for BasisChoice {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::Maxent => BasisChoice::Maxent,
            BasisArg::Apc => BasisChoice::Apc,
            BasisArg::Both => BasisChoice::Both,
        }
    }
}

#[derive(Args, Debug, Default)]
struct RunOptions {
    /// Number of basis functions n_B.
    #[arg(long)]
    n_basis: Option<usize>,
    /// Number of samples n_D.
    #[arg(long)]
    n_samples: Option<usize>,
    /// Number of labeled points n_D′ (example 2).
    #[arg(long)]
    n_labeled: Option<usize>,
    #[arg(long, value_enum)]
    basis: Option<BasisArg>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Integrator step.
    #[arg(long)]
    step: Option<f64>,
    /// Spacing of reported times.
    #[arg(long)]
    report_every: Option<f64>,
    /// Time at which sweeps record errors.
    #[arg(long)]
    error_time: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Repeats per sample size.
    #[arg(long)]
    repeats: Option<usize>,
    /// Monte Carlo draws for the example-2 reference.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Example 2: use the true coefficient function in the surrogate.
    #[arg(long)]
    oracle: bool,
    /// Example 1: replace the random rate by a constant.
    #[arg(long, allow_hyphen_values = true)]
    constant_rate: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "uq-out")]
    out: PathBuf,
}

impl RunOptions {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$target = v.into(); })*
            };
        }
        set!(n_samples => n_samples, beta => beta, t_end => t_end, step => step,
             report_every => report_every, error_time => error_time, seed => seed,
             repeats => repeats, mc_samples => monte_carlo_samples);
        if self.n_basis.is_some() {
            cfg.n_basis = self.n_basis;
        }
        if self.n_labeled.is_some() {
            cfg.n_labeled = self.n_labeled;
        }
        if let Some(b) = self.basis {
            cfg.basis = b.into();
        }
        if self.oracle {
            cfg.oracle = true;
        }
        if self.constant_rate.is_some() {
            cfg.constant_rate = self.constant_rate;
        }
    }
}

fn load_config(path: Option<&PathBuf>, experiment: ExperimentId) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => ExperimentConfig::for_experiment(experiment),
    };
    cfg.experiment = experiment;
    Ok(cfg)
}

fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let output = experiments::run(cfg).with_context(|| format!("running {}", cfg.experiment))?;
    output
        .write_to(out)
        .with_context(|| format!("writing results to {}", out.display()))?;
    let mut stdout = std::io::stdout().lock();
    for (name, _) in &output.files {
        writeln!(stdout, "{}", out.join(name).display())?;
    }
    writeln!(stdout, "{}", out.join("meta.json").display())?;
    for w in &output.meta.warnings {
        eprintln!("warning: {w}");
    }
    for j in &output.meta.jitter_events {
        eprintln!(
            "warning: Gram matrix of {} regularised with jitter {:e}",
            j.label, j.jitter
        );
    }
    Ok(())
}

fn eval_basis(nodes: &Path, query: &str, beta: f64) -> Result<()> {
    let file = File::open(nodes).with_context(|| format!("opening {}", nodes.display()))?;
    let nodes = NodeSet::<f64>::read(BufReader::new(file)).context("reading nodes")?;
    let point: Vec<f64> = query
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("bad query coordinate '{s}'"))
        })
        .collect::<Result<_>>()?;
    if point.len() != nodes.dim() {
        bail!(
            "query has {} coordinates but nodes are {}-dimensional",
            point.len(),
            nodes.dim()
        );
    }
    let eval = MaxentBasis::new(nodes, beta)?.evaluate(&point)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "index,psi")?;
    for (i, p) in eval.psi.iter().enumerate() {
        writeln!(stdout, "{i},{p}")?;
    }
    let lambda: Vec<String> = eval.lambda.iter().map(|v| v.to_string()).collect();
    eprintln!(
        "lambda = [{}], iterations = {}, residual = {:e}",
        lambda.join(", "),
        eval.iterations,
        eval.residual_norm
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Basis(BasisCommand::Eval { nodes, query, beta }) => eval_basis(nodes, query, *beta),
        Command::Run { example, opts } => {
            let id = match example {
                Example::Example1 => ExperimentId::Example1,
                Example::Example2 => ExperimentId::Example2,
            };
            let mut cfg = load_config(cli.config.as_ref(), id)?;
            opts.apply(&mut cfg);
            run_experiment(&cfg, &opts.out)
        }
        Command::Sweep(SweepCommand::Basis { list, opts }) => {
            let mut cfg = load_config(cli.config.as_ref(), ExperimentId::Convergence)?;
            opts.apply(&mut cfg);
            if let Some(list) = list {
                cfg.basis_list = list.clone();
            }
            run_experiment(&cfg, &opts.out)
        }
        Command::Sweep(SweepCommand::Samples { list, opts }) => {
            let mut cfg = load_config(cli.config.as_ref(), ExperimentId::SampleStudy)?;
            opts.apply(&mut cfg);
            if let Some(list) = list {
                cfg.sample_list = list.clone();
            }
            run_experiment(&cfg, &opts.out)
        }
    }
}
