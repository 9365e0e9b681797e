//! Seeded synthetic multi-view data.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::dataset::MultiViewDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthKind {
    /// Each cluster spans a random low-dimensional linear subspace in every view.
    LinearSubspaces,
    /// Clusters lie on concentric circles sharing one random 2-plane per view.
    NonlinearRings,
}

impl FromStr for SynthKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_subspaces" | "linear" => Ok(SynthKind::LinearSubspaces),
            "nonlinear_rings" | "rings" => Ok(SynthKind::NonlinearRings),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic kind {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub kind: SynthKind,
    pub clusters: usize,
    pub per_cluster: usize,
    /// Ambient dimension of each view.
    pub dims: Vec<usize>,
    pub noise_sigma: f64,
    /// Subspace dimension for `LinearSubspaces`; ignored for rings.
    pub subspace_dim: usize,
    pub seed: u64,
}

impl SynthParams {
    pub fn new(kind: SynthKind, clusters: usize, per_cluster: usize, dims: Vec<usize>) -> Self {
        SynthParams {
            kind,
            clusters,
            per_cluster,
            dims,
            noise_sigma: 0.01,
            subspace_dim: 3,
            seed: 0,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `d x k` matrix with orthonormal columns.
fn random_frame(rng: &mut ChaCha8Rng, d: usize, k: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, k, |_, _| gaussian(rng));
    g.qr().q()
}

/// Samples are ordered by cluster: cluster `c` occupies columns
/// `c * per_cluster .. (c + 1) * per_cluster`.
pub fn synth_multiview(params: &SynthParams) -> Result<MultiViewDataset> {
    let SynthParams {
        kind,
        clusters,
        per_cluster,
        ref dims,
        noise_sigma,
        subspace_dim,
        seed,
    } = *params;
    if clusters == 0 || per_cluster == 0 || dims.is_empty() || dims.contains(&0) {
        return Err(Error::InvalidArgument(
            "clusters, per_cluster and every view dimension must be positive".into(),
        ));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(
            "noise_sigma must be nonnegative".into(),
        ));
    }
    let n = clusters * per_cluster;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut views = Vec::with_capacity(dims.len());
    for &d in dims {
        let mut x = DMatrix::zeros(d, n);
        match kind {
            SynthKind::LinearSubspaces => {
                if subspace_dim == 0 || subspace_dim > d {
                    return Err(Error::InvalidArgument(format!(
                        "subspace_dim {subspace_dim} must be in 1..={d}"
                    )));
                }
                for c in 0..clusters {
                    let basis = random_frame(&mut rng, d, subspace_dim);
                    for s in 0..per_cluster {
                        let coef = DMatrix::from_fn(subspace_dim, 1, |_, _| gaussian(&mut rng));
                        x.set_column(c * per_cluster + s, &(&basis * coef).column(0));
                    }
                }
            }
            SynthKind::NonlinearRings => {
                if d < 2 {
                    return Err(Error::InvalidArgument(
                        "rings need views of dimension >= 2".into(),
                    ));
                }
                let frame = random_frame(&mut rng, d, 2);
                for c in 0..clusters {
                    let radius = (c + 1) as f64;
                    for s in 0..per_cluster {
                        let theta = rng.random_range(0.0..std::f64::consts::TAU);
                        let p = frame.column(0) * (radius * theta.cos())
                            + frame.column(1) * (radius * theta.sin());
                        x.set_column(c * per_cluster + s, &p);
                    }
                }
            }
        }
        if noise_sigma > 0.0 {
            x.iter_mut()
                .for_each(|v| *v += noise_sigma * gaussian(&mut rng));
        }
        views.push(x);
    }
    let labels = (0..n).map(|i| i / per_cluster).collect();
    let names = (1..=dims.len()).map(|v| format!("view_{v}")).collect();
    MultiViewDataset::new(views, Some(labels), names)
}
