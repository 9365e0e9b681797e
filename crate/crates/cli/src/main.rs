use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ktsvd::metrics::evaluate_runs;
use ktsvd::pipeline::dataset::{read_label_columns, read_labels, save_dataset};
use ktsvd::pipeline::{
    config_with_manifest_kernels, load_dataset, run_pipeline_dir, solve_representations, sweep_csv,
    sweep_lambda, synth_multiview, write_representations, PipelineConfig, SynthKind, SynthParams,
};

#[derive(Parser)]
#[command(
    name = "ktsvd",
    version,
    about = "Kernelized tensor multi-view subspace clustering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on a dataset directory and write all artifacts.
    Cluster {
        dataset: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a seeded synthetic multi-view dataset.
    Synth(SynthArgs),
    /// Score predicted labels against ground truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        /// One column per run; a leading `sample` column is skipped.
        #[arg(long)]
        pred: PathBuf,
    },
    /// Run the pipeline over a grid of lambda values.
    Sweep {
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[command(flatten)]
        config: ConfigArg,
        /// Directory for sweep.csv; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run only the solver and write the learned representations.
    Solve {
        dataset: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ConfigArg {
    /// Pipeline config JSON; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> Result<PipelineConfig> {
        match &self.config {
            Some(p) => PipelineConfig::from_json_file(p)
                .with_context(|| format!("reading config {}", p.display())),
            None => Ok(PipelineConfig::default()),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// linear_subspaces or nonlinear_rings
    #[arg(long)]
    kind: SynthKind,
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    per_cluster: usize,
    /// Feature dimension of each view, e.g. `30,40`.
    #[arg(long, value_delimiter = ',', required = true)]
    views: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 3)]
    subspace_dim: usize,
    #[arg(long)]
    out: PathBuf,
}

fn cluster(dataset: &Path, config: PipelineConfig, out: &Path) -> Result<()> {
    let config = PipelineConfig {
        output_dir: Some(out.to_path_buf()),
        ..config
    };
    let res = run_pipeline_dir(dataset, &config)?;
    let summary = serde_json::to_string_pretty(&res.metrics_file())?;
    println!("{summary}");
    if !res.outcome.converged {
        eprintln!(
            "warning: solver stopped after {} iterations without converging",
            res.outcome.iterations()
        );
    }
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let params = SynthParams {
        noise_sigma: a.noise,
        subspace_dim: a.subspace_dim,
        seed: a.seed,
        ..SynthParams::new(a.kind, a.clusters, a.per_cluster, a.views.clone())
    };
    let ds = synth_multiview(&params)?;
    save_dataset(&ds, &a.out)?;
    println!(
        "wrote {} views x {} samples to {}",
        ds.n_views(),
        ds.n_samples(),
        a.out.display()
    );
    Ok(())
}

fn eval(truth: &Path, pred: &Path) -> Result<()> {
    let truth = read_labels(truth)?;
    let (mut columns, header) = read_label_columns(pred)?;
    if header.as_ref().and_then(|h| h.first()).map(String::as_str) == Some("sample") {
        columns.remove(0);
    }
    if columns.is_empty() {
        bail!("{} has no label columns", pred.display());
    }
    let summary = evaluate_runs(&columns, &truth)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn sweep(dataset: &Path, grid: &[f64], config: PipelineConfig, out: Option<&Path>) -> Result<()> {
    let config = config_with_manifest_kernels(Some(dataset), &config)?;
    let ds = load_dataset(dataset)?;
    let table = sweep_csv(&sweep_lambda(&ds, &config, grid)?);
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join("sweep.csv");
            std::fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}

fn solve(dataset: &Path, config: PipelineConfig, out: &Path) -> Result<()> {
    let config = config_with_manifest_kernels(Some(dataset), &config)?;
    let ds = load_dataset(dataset)?;
    let (_, outcome) = solve_representations(&ds, &config)?;
    write_representations(&outcome, out)?;
    println!(
        "converged: {} after {} iterations; wrote {} representation matrices to {}",
        outcome.converged,
        outcome.iterations(),
        outcome.z.len(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cluster {
            dataset,
            config,
            out,
        } => cluster(&dataset, config.load()?, &out),
        Command::Synth(a) => synth(&a),
        Command::Eval { truth, pred } => eval(&truth, &pred),
        Command::Sweep {
            dataset,
            lambda,
            config,
            out,
        } => sweep(&dataset, &lambda, config.load()?, out.as_deref()),
        Command::Solve {
            dataset,
            config,
            out,
        } => solve(&dataset, config.load()?, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
