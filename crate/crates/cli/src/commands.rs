//! Subcommand definitions and their implementations.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use raven_core::annotation::dataset::{read_dataset, write_dataset, Split, MANIFEST_FILE};
use raven_core::grammar::FigureConfiguration;
use raven_core::render::render_sheet;
use raven_core::{generate_problems, RuleMode};

use crate::report::{dataset_stats, evaluate_solver, validate_dataset};
use crate::server::{self, AppState, TrialConfig, FAMILIARIZATION_COUNT};

#[derive(Debug, Parser)]
#[command(
    name = "raven",
    version,
    about = "Generate, annotate, solve and serve progressive-matrix problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset: records, panel images and a manifest.
    Gen(GenArgs),
    /// Re-check every invariant of a dataset.
    Validate(DatasetArg),
    /// Report solver accuracy per configuration.
    Solve(SolveArgs),
    /// Print dataset statistics.
    Stats(DatasetArg),
    /// Render one problem as a preview sheet.
    Preview(PreviewArgs),
    /// Serve the trial API over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DatasetArg {
    /// Dataset root.
    #[arg(long, env = "RAVEN_DATA")]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output directory.
    #[arg(long, env = "RAVEN_DATA")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub per_config: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated configurations (e.g. center,grid_2x2); all by default.
    #[arg(long, value_delimiter = ',')]
    pub configs: Option<Vec<FigureConfiguration>>,
    /// Write records only, without panel images.
    #[arg(long)]
    pub no_images: bool,
    /// Replace an existing dataset in the output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    /// Restrict to one split: train, validation or test.
    #[arg(long)]
    pub split: Option<Split>,
}

#[derive(Debug, Args)]
pub struct PreviewArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[arg(long)]
    pub id: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub dataset: DatasetArg,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    #[arg(long, default_value = "center")]
    pub familiarization_config: FigureConfiguration,
    #[arg(long, default_value_t = FAMILIARIZATION_COUNT)]
    pub familiarization_count: usize,
    /// Test problems per configuration in each session.
    #[arg(long, default_value_t = 2)]
    pub test_per_config: usize,
    /// Append-only response log.
    #[arg(long, default_value = "responses.jsonl")]
    pub log: PathBuf,
    /// Seed of the familiarization problems.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen(args) => gen(&args, out),
        Command::Validate(args) => validate(&args.dataset, out),
        Command::Solve(args) => solve(&args, out),
        Command::Stats(args) => stats(&args.dataset, out),
        Command::Preview(args) => preview(&args, out),
        Command::Serve(args) => serve(args),
    }
}

fn gen(args: &GenArgs, out: &mut dyn Write) -> Result<()> {
    if args.per_config == 0 {
        bail!("--per-config must be positive");
    }
    if args.out.join(MANIFEST_FILE).exists() {
        if !args.force {
            bail!(
                "{} already holds a dataset; pass --force to replace it",
                args.out.display()
            );
        }
        for config in FigureConfiguration::ALL {
            let dir = args.out.join(config.as_str());
            if dir.exists() {
                std::fs::remove_dir_all(&dir).with_context(|| format!("removing {}", dir.display()))?;
            }
        }
        std::fs::remove_file(args.out.join(MANIFEST_FILE))?;
    }
    let configs = args
        .configs
        .clone()
        .unwrap_or_else(|| FigureConfiguration::ALL.to_vec());
    let mut unique = configs.clone();
    unique.sort_by_key(|c| c.ordinal());
    unique.dedup();
    if unique.len() != configs.len() {
        bail!("--configs lists a configuration twice");
    }
    let problems = generate_problems(&configs, args.per_config, args.seed, RuleMode::Full)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let manifest = write_dataset(&args.out, &problems, Some(args.seed), !args.no_images)?;
    writeln!(
        out,
        "wrote {} problems to {} (AvgRule {:.4}, StructAnno {})",
        manifest.stats.problems,
        args.out.display(),
        manifest.stats.avg_rules,
        manifest.stats.struct_annotations
    )?;
    Ok(())
}

fn validate(root: &Path, out: &mut dyn Write) -> Result<()> {
    let dataset = read_dataset(root)?;
    let failures = validate_dataset(root, &dataset);
    for f in &failures {
        writeln!(out, "FAIL {f}")?;
    }
    if !failures.is_empty() {
        bail!("{} check(s) failed", failures.len());
    }
    writeln!(out, "ok: {} problems valid", dataset.problems.len())?;
    Ok(())
}

fn solve(args: &SolveArgs, out: &mut dyn Write) -> Result<()> {
    let dataset = read_dataset(&args.dataset.dataset)?;
    let problems: Vec<_> = dataset
        .problems
        .into_iter()
        .filter(|p| args.split.is_none_or(|s| Split::of_fold(p.fold) == s))
        .collect();
    if problems.is_empty() {
        bail!("no problems in the selected split");
    }
    let report = evaluate_solver(&problems);
    write!(out, "{}", report.table("Solver"))?;
    for id in &report.ambiguous {
        writeln!(out, "ambiguous: {id}")?;
    }
    Ok(())
}

fn stats(root: &Path, out: &mut dyn Write) -> Result<()> {
    let dataset = read_dataset(root)?;
    write!(out, "{}", dataset_stats(&dataset.problems).render())?;
    Ok(())
}

fn preview(args: &PreviewArgs, out: &mut dyn Write) -> Result<()> {
    let dataset = read_dataset(&args.dataset.dataset)?;
    let problem = dataset
        .problems
        .iter()
        .find(|p| p.id == args.id)
        .with_context(|| format!("no problem {} in the dataset", args.id))?;
    let png = render_sheet(problem).to_png()?;
    std::fs::write(&args.out, png).with_context(|| format!("writing {}", args.out.display()))?;
    writeln!(out, "wrote {}", args.out.display())?;
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let dataset = read_dataset(&args.dataset.dataset)?;
    let config = TrialConfig {
        familiarization_config: args.familiarization_config,
        familiarization_count: args.familiarization_count,
        test_per_config: args.test_per_config,
        seed: args.seed,
    };
    let state = AppState::new(dataset.problems, config, &args.log)?;
    let addr = SocketAddr::new(args.host, args.port);
    tokio::runtime::Runtime::new()?.block_on(server::serve(state, addr))
}
