//! Python bindings. Matrices cross the boundary as lists of rows; feature
//! matrices are `samples x features`, the same layout as the dataset CSVs.

use std::path::PathBuf;

use ktsvd::kernel::{self, KernelSpec};
use ktsvd::metrics::{self, MetricsSummary};
use ktsvd::pipeline::{self, PipelineConfig, SynthKind, SynthParams};
use ktsvd::solver::{self, SolverConfig};
use ktsvd::spectral::{self, AffinityMatrix};
use ktsvd::Tensor3;
use nalgebra::DMatrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Rows = Vec<Vec<f64>>;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_matrix(rows: &Rows) -> PyResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(err("ragged matrix rows"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn to_rows(m: &DMatrix<f64>) -> Rows {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn to_tensor(t: &[Rows]) -> PyResult<Tensor3> {
    let n1 = t.len();
    let n2 = t.first().map_or(0, Vec::len);
    let n3 = t.first().and_then(|r| r.first()).map_or(0, Vec::len);
    if t.iter()
        .any(|r| r.len() != n2 || r.iter().any(|tube| tube.len() != n3))
    {
        return Err(err("ragged tensor"));
    }
    Ok(Tensor3::from_fn(n1, n2, n3, |i, j, k| t[i][j][k]))
}

fn from_tensor(t: &Tensor3) -> Vec<Rows> {
    let (n1, n2, n3) = t.dims();
    (0..n1)
        .map(|i| {
            (0..n2)
                .map(|j| (0..n3).map(|k| t[(i, j, k)]).collect())
                .collect()
        })
        .collect()
}

fn kernel_spec(kind: &str, bandwidth: Option<f64>) -> PyResult<KernelSpec> {
    match kind {
        "linear" => Ok(KernelSpec::Linear),
        "gaussian" => Ok(KernelSpec::Gaussian { bandwidth }),
        "precomputed" => Ok(KernelSpec::Precomputed),
        other => Err(err(format!("unknown kernel kind {other:?}"))),
    }
}

fn summary_dict<'py>(py: Python<'py>, s: &MetricsSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let value = serde_json::to_value(s).map_err(err)?;
    for (k, v) in value.as_object().expect("summary is an object") {
        d.set_item(k, v.as_f64())?;
    }
    Ok(d)
}

/// Tensor nuclear norm of an `n1 x n2 x n3` nested list `t[i][j][k]`.
#[pyfunction]
fn tnn(t: Vec<Rows>) -> PyResult<f64> {
    ktsvd::tnn(&to_tensor(&t)?).map_err(err)
}

/// Singular value thresholding of every Fourier slice.
#[pyfunction]
fn tnn_prox(t: Vec<Rows>, threshold: f64) -> PyResult<Vec<Rows>> {
    Ok(from_tensor(
        &ktsvd::tnn_prox(&to_tensor(&t)?, threshold).map_err(err)?,
    ))
}

/// Gram matrix of `x` (`samples x features`).
#[pyfunction]
#[pyo3(signature = (x, kind = "linear", bandwidth = None))]
fn gram_matrix(x: Rows, kind: &str, bandwidth: Option<f64>) -> PyResult<Rows> {
    let x = to_matrix(&x)?.transpose();
    let k = kernel::gram_matrix(&x, kernel_spec(kind, bandwidth)?).map_err(err)?;
    Ok(to_rows(&k))
}

/// Eigen-factor of a PSD kernel matrix.
#[pyclass(name = "KernelFactor")]
struct PyKernelFactor(kernel::KernelFactor);

#[pymethods]
impl PyKernelFactor {
    #[new]
    #[pyo3(signature = (k, rank_tol = kernel::DEFAULT_RANK_TOL))]
    fn new(k: Rows, rank_tol: f64) -> PyResult<Self> {
        Ok(PyKernelFactor(
            kernel::factor_kernel(&to_matrix(&k)?, rank_tol).map_err(err)?,
        ))
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    #[getter]
    fn sigmas(&self) -> Vec<f64> {
        self.0.sigmas().iter().copied().collect()
    }

    #[getter]
    fn eigvecs(&self) -> Rows {
        to_rows(self.0.eigvecs())
    }

    /// `sum_i sqrt(p_i^T K p_i)` over the columns of `p`.
    fn h_value(&self, p: Rows) -> PyResult<f64> {
        kernel::h_value(&to_matrix(&p)?, &self.0).map_err(err)
    }
}

/// Runs the solver on one kernel matrix per view. `config` is a JSON object
/// with solver fields; omitted fields take their defaults.
#[pyfunction]
#[pyo3(signature = (kernels, config = None))]
fn solve<'py>(
    py: Python<'py>,
    kernels: Vec<Rows>,
    config: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg: SolverConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(err)?,
        None => SolverConfig::default(),
    };
    let factors = kernels
        .iter()
        .map(|k| kernel::factor_kernel(&to_matrix(k)?, cfg.rank_tol).map_err(err))
        .collect::<PyResult<Vec<_>>>()?;
    let out = solver::solve(&factors, &cfg).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("z", out.z.iter().map(to_rows).collect::<Vec<_>>())?;
    d.set_item("converged", out.converged)?;
    d.set_item("iterations", out.iterations())?;
    let trace: Vec<(f64, f64, f64)> = out
        .trace
        .rows
        .iter()
        .map(|r| (r.recon_error, r.match_error, r.objective))
        .collect();
    d.set_item("trace", trace)?;
    Ok(d)
}

/// `(1/V) sum_v (|Z_v| + |Z_v^T|) / 2`.
#[pyfunction]
fn build_affinity(z: Vec<Rows>) -> PyResult<Rows> {
    let mats = z.iter().map(to_matrix).collect::<PyResult<Vec<_>>>()?;
    Ok(to_rows(
        spectral::build_affinity(&mats).map_err(err)?.matrix(),
    ))
}

#[pyfunction]
#[pyo3(signature = (affinity, clusters, seed = 0, restarts = spectral::DEFAULT_RESTARTS))]
fn spectral_cluster(
    affinity: Rows,
    clusters: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<Vec<usize>> {
    let a = AffinityMatrix::new(to_matrix(&affinity)?).map_err(err)?;
    Ok(spectral::spectral_cluster(&a, clusters, seed, restarts)
        .map_err(err)?
        .labels)
}

#[pyfunction]
fn nmi(truth: Vec<usize>, pred: Vec<usize>) -> PyResult<f64> {
    metrics::nmi(&truth, &pred).map_err(err)
}

#[pyfunction]
fn acc(truth: Vec<usize>, pred: Vec<usize>) -> PyResult<f64> {
    metrics::acc(&truth, &pred).map_err(err)
}

#[pyfunction]
fn adjusted_rand(truth: Vec<usize>, pred: Vec<usize>) -> PyResult<f64> {
    metrics::adjusted_rand(&truth, &pred).map_err(err)
}

/// `(precision, recall, fscore)` over sample pairs.
#[pyfunction]
fn pairwise_prf(truth: Vec<usize>, pred: Vec<usize>) -> PyResult<(f64, f64, f64)> {
    metrics::pairwise_prf(&truth, &pred).map_err(err)
}

/// Mean and population std of all six criteria over several labelings.
#[pyfunction]
fn evaluate_runs<'py>(
    py: Python<'py>,
    runs: Vec<Vec<usize>>,
    truth: Vec<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    summary_dict(py, &metrics::evaluate_runs(&runs, &truth).map_err(err)?)
}

/// Synthetic dataset: returns `(views, labels)` with each view `samples x features`.
#[pyfunction]
#[pyo3(signature = (kind, clusters, per_cluster, dims, noise = 0.01, seed = 0, subspace_dim = 3))]
fn synth(
    kind: &str,
    clusters: usize,
    per_cluster: usize,
    dims: Vec<usize>,
    noise: f64,
    seed: u64,
    subspace_dim: usize,
) -> PyResult<(Vec<Rows>, Vec<usize>)> {
    let kind: SynthKind = kind.parse().map_err(err)?;
    let params = SynthParams {
        noise_sigma: noise,
        seed,
        subspace_dim,
        ..SynthParams::new(kind, clusters, per_cluster, dims)
    };
    let ds = pipeline::synth_multiview(&params).map_err(err)?;
    let views = ds.views.iter().map(|v| to_rows(&v.transpose())).collect();
    Ok((views, ds.labels.unwrap_or_default()))
}

/// Full pipeline on a dataset directory; returns the metrics file as JSON.
#[pyfunction]
#[pyo3(signature = (dataset_dir, config = None, out = None))]
fn run_pipeline(
    dataset_dir: PathBuf,
    config: Option<&str>,
    out: Option<PathBuf>,
) -> PyResult<String> {
    let mut cfg: PipelineConfig = match config {
        Some(s) => serde_json::from_str(s).map_err(err)?,
        None => PipelineConfig::default(),
    };
    if out.is_some() {
        cfg.output_dir = out;
    }
    let res = pipeline::run_pipeline_dir(&dataset_dir, &cfg).map_err(err)?;
    serde_json::to_string_pretty(&res.metrics_file()).map_err(err)
}

#[pymodule]
#[pyo3(name = "ktsvd")]
fn ktsvd_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernelFactor>()?;
    m.add_function(wrap_pyfunction!(tnn, m)?)?;
    m.add_function(wrap_pyfunction!(tnn_prox, m)?)?;
    m.add_function(wrap_pyfunction!(gram_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(build_affinity, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(nmi, m)?)?;
    m.add_function(wrap_pyfunction!(acc, m)?)?;
    m.add_function(wrap_pyfunction!(adjusted_rand, m)?)?;
    m.add_function(wrap_pyfunction!(pairwise_prf, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_runs, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
