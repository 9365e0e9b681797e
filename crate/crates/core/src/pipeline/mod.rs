//! End-to-end orchestration: kernels, solver, affinity, repeated spectral
//! clustering, evaluation and result files.

pub mod dataset;
pub mod synth;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{factor_kernel, gram_matrix, KernelFactor, KernelSpec};
use crate::metrics::{evaluate_runs, MetricsSummary};
use crate::solver::{solve, SolveOutcome, SolverConfig};
use crate::spectral::{
    build_affinity, kmeans, spectral_embedding, AffinityMatrix, DEFAULT_RESTARTS,
};

pub use dataset::{load_dataset, save_dataset, MultiViewDataset};
pub use synth::{synth_multiview, SynthKind, SynthParams};

use dataset::{matrix_csv, write_file};

pub const LABELS_OUT: &str = "labels.csv";
pub const AFFINITY_OUT: &str = "affinity.csv";
pub const TRACE_OUT: &str = "trace.csv";
pub const METRICS_OUT: &str = "metrics.json";
pub const CONFIG_OUT: &str = "resolved_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// One spec per view, a single spec applied to every view, or empty for
    /// the dataset manifest's kernels (linear when it has none).
    pub kernels: Vec<KernelSpec>,
    pub solver: SolverConfig,
    /// Cluster count; 0 means the number of distinct ground-truth labels.
    pub clusters: usize,
    /// Spectral clustering repetitions, run `r` seeded with `seed + r`.
    pub runs: usize,
    /// k-means restarts inside each run.
    pub restarts: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kernels: Vec::new(),
            solver: SolverConfig::default(),
            clusters: 0,
            runs: 10,
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            output_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Kernel specs for every view with data-dependent defaults filled in.
    pub fn resolve_kernels(&self, ds: &MultiViewDataset) -> Result<Vec<KernelSpec>> {
        let v = ds.n_views();
        let specs = match self.kernels.len() {
            0 => vec![KernelSpec::Linear; v],
            1 => vec![self.kernels[0]; v],
            k if k == v => self.kernels.clone(),
            k => {
                return Err(Error::InvalidArgument(format!(
                    "{k} kernel specs given for {v} views"
                )))
            }
        };
        specs
            .into_iter()
            .zip(&ds.views)
            .map(|(s, x)| s.resolve(x))
            .collect()
    }

    /// Copy with kernels, cluster count and penalties made explicit.
    pub fn resolved(&self, ds: &MultiViewDataset) -> Result<Self> {
        if self.runs == 0 {
            return Err(Error::InvalidArgument("runs must be at least 1".into()));
        }
        self.solver.validate()?;
        let clusters = match (self.clusters, ds.n_classes()) {
            (0, Some(c)) => c,
            (0, None) => {
                return Err(Error::InvalidArgument(
                    "cluster count is required when the dataset has no labels".into(),
                ))
            }
            (c, _) => c,
        };
        if clusters > ds.n_samples() {
            return Err(Error::InvalidArgument(format!(
                "cluster count {clusters} exceeds sample count {}",
                ds.n_samples()
            )));
        }
        Ok(PipelineConfig {
            kernels: self.resolve_kernels(ds)?,
            clusters,
            restarts: self.restarts.max(1),
            ..self.clone()
        })
    }
}

/// Gram matrices and their factors for already-resolved kernel specs.
pub fn kernel_factors(
    ds: &MultiViewDataset,
    kernels: &[KernelSpec],
    rank_tol: f64,
) -> Result<Vec<KernelFactor>> {
    ds.views
        .iter()
        .zip(kernels)
        .map(|(x, &spec)| factor_kernel(&gram_matrix(x, spec)?, rank_tol))
        .collect()
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub config: PipelineConfig,
    pub outcome: SolveOutcome,
    pub affinity: AffinityMatrix,
    /// Predicted labels per run.
    pub runs: Vec<Vec<usize>>,
    pub metrics: Option<MetricsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub converged: bool,
    pub iterations: usize,
    pub runs: usize,
    pub labels: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsSummary>,
}

impl PipelineResult {
    pub fn metrics_file(&self) -> MetricsFile {
        MetricsFile {
            converged: self.outcome.converged,
            iterations: self.outcome.iterations(),
            runs: self.runs.len(),
            labels: LABELS_OUT.to_string(),
            metrics: self.metrics,
        }
    }

    /// Labels table: a `sample` column then one column per run.
    pub fn labels_csv(&self) -> String {
        let mut out = String::from("sample");
        for r in 0..self.runs.len() {
            out.push_str(&format!(",run_{r}"));
        }
        out.push('\n');
        let n = self.runs.first().map_or(0, Vec::len);
        for i in 0..n {
            out.push_str(&i.to_string());
            for run in &self.runs {
                out.push_str(&format!(",{}", run[i]));
            }
            out.push('\n');
        }
        out
    }

    /// Writes labels, affinity, trace, metrics and the resolved config into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(&dir.join(LABELS_OUT), self.labels_csv().as_bytes())?;
        write_file(
            &dir.join(AFFINITY_OUT),
            matrix_csv(self.affinity.matrix()).as_bytes(),
        )?;
        write_trace(&self.outcome, &dir.join(TRACE_OUT))?;
        let metrics = serde_json::to_string_pretty(&self.metrics_file())?;
        write_file(&dir.join(METRICS_OUT), metrics.as_bytes())?;
        let config = serde_json::to_string_pretty(&self.config)?;
        write_file(&dir.join(CONFIG_OUT), config.as_bytes())
    }
}

fn write_trace(outcome: &SolveOutcome, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    outcome.trace.write_csv(&mut buf)?;
    write_file(path, &buf)
}

/// `cfg` with the dataset manifest's kernels filled in when it names none.
pub fn config_with_manifest_kernels(
    ds_dir: Option<&Path>,
    cfg: &PipelineConfig,
) -> Result<PipelineConfig> {
    let mut cfg = cfg.clone();
    if cfg.kernels.is_empty() {
        if let Some(dir) = ds_dir {
            if let Some(k) = dataset::Manifest::read(dir)?.and_then(|m| m.kernels()) {
                cfg.kernels = k;
            }
        }
    }
    Ok(cfg)
}

/// Clustering labels for `runs` k-means repetitions on one spectral embedding.
pub fn cluster_runs(
    affinity: &AffinityMatrix,
    clusters: usize,
    runs: usize,
    restarts: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if clusters == 0 || clusters > affinity.n() {
        return Err(Error::InvalidArgument(format!(
            "cluster count {clusters} must be in 1..={}",
            affinity.n()
        )));
    }
    let embedding = spectral_embedding(affinity, clusters)?;
    Ok((0..runs as u64)
        .map(|r| kmeans(&embedding, clusters, seed.wrapping_add(r), restarts).labels)
        .collect())
}

fn run_with_factors(
    ds: &MultiViewDataset,
    config: PipelineConfig,
    factors: &[KernelFactor],
) -> Result<PipelineResult> {
    let outcome = solve(factors, &config.solver)?;
    let affinity = build_affinity(&outcome.z)?;
    let runs = cluster_runs(
        &affinity,
        config.clusters,
        config.runs,
        config.restarts,
        config.seed,
    )?;
    let metrics = match &ds.labels {
        Some(truth) => Some(evaluate_runs(&runs, truth)?),
        None => None,
    };
    Ok(PipelineResult {
        config,
        outcome,
        affinity,
        runs,
        metrics,
    })
}

/// Full pipeline on an in-memory dataset. Writes artifacts when
/// `config.output_dir` is set.
pub fn run_pipeline(ds: &MultiViewDataset, config: &PipelineConfig) -> Result<PipelineResult> {
    let resolved = config.resolved(ds)?;
    let factors = kernel_factors(ds, &resolved.kernels, resolved.solver.rank_tol)?;
    let result = run_with_factors(ds, resolved, &factors)?;
    if let Some(dir) = &result.config.output_dir {
        result.write(dir)?;
    }
    Ok(result)
}

/// Loads `dir` and runs the pipeline, taking kernel defaults from the
/// dataset manifest when the config names none.
pub fn run_pipeline_dir(dir: &Path, config: &PipelineConfig) -> Result<PipelineResult> {
    let ds = load_dataset(dir)?;
    run_pipeline(&ds, &config_with_manifest_kernels(Some(dir), config)?)
}

/// Solver only: the learned representations and the convergence trace.
pub fn solve_representations(
    ds: &MultiViewDataset,
    config: &PipelineConfig,
) -> Result<(Vec<KernelSpec>, SolveOutcome)> {
    config.solver.validate()?;
    let kernels = config.resolve_kernels(ds)?;
    let factors = kernel_factors(ds, &kernels, config.solver.rank_tol)?;
    Ok((kernels, solve(&factors, &config.solver)?))
}

/// Writes `z_view_<v>.csv` for each view and `trace.csv`.
pub fn write_representations(outcome: &SolveOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (v, z) in outcome.z.iter().enumerate() {
        write_file(
            &dir.join(format!("z_view_{}.csv", v + 1)),
            matrix_csv(z).as_bytes(),
        )?;
    }
    write_trace(outcome, &dir.join(TRACE_OUT))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub nmi: f64,
    pub acc: f64,
    pub best: bool,
}

/// Runs the pipeline for every `lambda` in the grid and marks the row with the
/// highest mean NMI (first one on ties).
pub fn sweep_lambda(
    ds: &MultiViewDataset,
    config: &PipelineConfig,
    grid: &[f64],
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("lambda grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be positive, got {bad}"
        )));
    }
    if ds.labels.is_none() {
        return Err(Error::InvalidArgument(
            "lambda sweep needs ground-truth labels".into(),
        ));
    }
    let base = PipelineConfig {
        output_dir: None,
        ..config.resolved(ds)?
    };
    let factors = kernel_factors(ds, &base.kernels, base.solver.rank_tol)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &lambda in grid {
        let mut cfg = base.clone();
        cfg.solver.lambda = lambda;
        let res = run_with_factors(ds, cfg, &factors)?;
        let m = res.metrics.expect("labels present");
        rows.push(SweepRow {
            lambda,
            nmi: m.nmi,
            acc: m.acc,
            best: false,
        });
    }
    let best = rows
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.nmi > rows[b].nmi { i } else { b });
    rows[best].best = true;
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("lambda,nmi,acc,argmax\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.lambda,
            r.nmi,
            r.acc,
            u8::from(r.best)
        ));
    }
    out
}
