use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use qudit_floquet_runner::config::ExperimentConfig;
use qudit_floquet_runner::experiment::{execute, Mode, Summary};
use qudit_floquet_runner::{plot, presets};

#[derive(Parser, Debug)]
#[command(name = "qfloq", version, about = "Run qudit Floquet time-crystal experiments")]
struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory under which result directories are created.
    #[arg(long, global = true, env = "QFLOQ_OUTPUT_ROOT", default_value = "results")]
    output_root: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Config file path or shipped experiment name (see `list-presets`).
    config: String,
    /// Explicit result directory instead of `<output-root>/<name>/<mode>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated ε values replacing the config's list.
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,
    /// Replaces the config's realization count.
    #[arg(long)]
    realizations: Option<usize>,
    /// Replaces the config's number of periods.
    #[arg(long)]
    periods: Option<usize>,
    /// Render SVG figures after the run.
    #[arg(long)]
    plot: bool,
    /// Reuse a directory that already holds a manifest.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ensemble dynamics at the config's ε values.
    Run(RunArgs),
    /// Like `run`, with the default log grid when the config lists no ε.
    Sweep(RunArgs),
    /// Eigenphase gap-ratio statistics of the dense Floquet operator.
    Stats(RunArgs),
    /// Closed-form identities and charged-generator scaling fits.
    Identities(RunArgs),
    /// Qudit runs with their qubit baselines on shared disorder draws.
    Baseline(RunArgs),
    /// Render SVG figures for an existing result directory.
    Plot {
        dir: PathBuf,
    },
    /// List shipped protocols and experiment configs.
    ListPresets,
    /// Print the JSON schema of experiment configs.
    Schema,
}

fn run(cli: &Cli, args: &RunArgs, mode: Mode) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(e) = &args.epsilons {
        cfg.epsilons = Some(e.clone());
    }
    if let Some(r) = args.realizations {
        cfg.n_realizations = r;
    }
    if let Some(p) = args.periods {
        cfg.n_periods = p;
    }
    let mode_name = serde_json::to_value(mode)?.as_str().unwrap_or("run").to_string();
    let dir = args.out.clone().unwrap_or_else(|| cli.output_root.join(cfg.output_name()).join(mode_name));
    if dir.join("manifest.json").exists() && !args.force {
        bail!("{} already holds a finished run; pass --force to overwrite", dir.display());
    }
    let summary = execute(&cfg, mode, &dir)?;
    report(&summary);
    if args.plot {
        let index = plot::render_all(&dir)?;
        eprintln!("{} figures in {}", index.files.len(), dir.join("plots").display());
    }
    println!("{}", dir.display());
    Ok(())
}

fn report(s: &Summary) {
    for c in &s.cases {
        for l in c.lines.iter().filter(|l| l.weight.n > 0) {
            eprintln!(
                "{} {} eps={} {} C_{} = {:.4} ± {:.4}",
                c.protocol, c.initial_state, c.epsilon, l.column, l.m, l.weight.mean, l.weight.stderr
            );
        }
    }
    for l in &s.level_stats {
        eprintln!("{} eps={} <r> = {:.4} ± {:.4}", l.protocol, l.epsilon, l.mean_r.mean, l.mean_r.stderr);
    }
    for n in &s.notes {
        eprintln!("note: {n}");
    }
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().context("configuring thread pool")?;
    }
    match &cli.command {
        Command::Run(a) => run(&cli, a, Mode::Run),
        Command::Sweep(a) => run(&cli, a, Mode::Sweep),
        Command::Stats(a) => run(&cli, a, Mode::Stats),
        Command::Identities(a) => run(&cli, a, Mode::Identities),
        Command::Baseline(a) => run(&cli, a, Mode::Baseline),
        Command::Plot { dir } => {
            let index = plot::render_all(dir)?;
            for f in &index.files {
                println!("{}", dir.join("plots").join(&f.path).display());
            }
            Ok(())
        }
        Command::Schema => {
            print!("{}", qudit_floquet_runner::config::SCHEMA);
            Ok(())
        }
        Command::ListPresets => {
            println!("protocols:");
            for p in presets::PROTOCOLS {
                println!("  {p}");
            }
            println!("experiments:");
            for (name, _) in presets::EXPERIMENTS {
                println!("  {name}");
            }
            Ok(())
        }
    }
}
