//! Per-view Gram matrices and their eigen-factorization `K = V diag(sigma^2) V^T`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative cutoff below which eigenvalues of `K` count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Symmetry tolerance (relative to `max(1, max|K|)`) for kernels supplied directly.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Kernel used for one view.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    #[default]
    Linear,
    /// `exp(-||x - y||^2 / (2 bandwidth^2))`; a missing bandwidth is filled in
    /// with the median pairwise distance of the view.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bandwidth: Option<f64>,
    },
    /// The view matrix already is the `N x N` kernel.
    Precomputed,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        KernelSpec::Gaussian {
            bandwidth: Some(bandwidth),
        }
    }

    /// Fills in any data-dependent default (the Gaussian bandwidth) for the
    /// `d x N` view `x`.
    pub fn resolve(self, x: &DMatrix<f64>) -> Result<Self> {
        match self {
            KernelSpec::Gaussian { bandwidth: Some(b) } if !(b > 0.0 && b.is_finite()) => Err(
                Error::InvalidArgument(format!("gaussian bandwidth must be positive, got {b}")),
            ),
            KernelSpec::Gaussian { bandwidth: None } => {
                check_finite(x)?;
                Ok(KernelSpec::gaussian(median_pairwise_distance(x)))
            }
            other => Ok(other),
        }
    }
}

fn check_finite(x: &DMatrix<f64>) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "feature matrix contains non-finite values".into(),
        ))
    }
}

fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.ncols();
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = (x.column(i) - x.column(j)).norm_squared();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Median Euclidean distance over all sample pairs. Falls back to 1 when there
/// are fewer than two samples or the median is zero.
pub fn median_pairwise_distance(x: &DMatrix<f64>) -> f64 {
    let n = x.ncols();
    let mut dists: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for j in 0..n {
        for i in 0..j {
            dists.push((x.column(i) - x.column(j)).norm());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Gram matrix of the `d x N` view `x` (columns are samples).
pub fn gram_matrix(x: &DMatrix<f64>, spec: KernelSpec) -> Result<DMatrix<f64>> {
    if x.ncols() == 0 {
        return Err(Error::InvalidArgument("view has no samples".into()));
    }
    check_finite(x)?;
    let k = match spec.resolve(x)? {
        KernelSpec::Linear => x.transpose() * x,
        KernelSpec::Gaussian { bandwidth } => {
            let b = bandwidth.expect("resolved");
            let denom = 2.0 * b * b;
            squared_distances(x).map(|d| (-d / denom).exp())
        }
        KernelSpec::Precomputed => {
            if !x.is_square() {
                return Err(Error::dims(
                    "precomputed kernel",
                    "square matrix",
                    format!("{}x{}", x.nrows(), x.ncols()),
                ));
            }
            check_symmetric(x)?;
            x.clone()
        }
    };
    Ok((&k + k.transpose()) * 0.5)
}

fn check_symmetric(k: &DMatrix<f64>) -> Result<()> {
    let scale = k.amax().max(1.0);
    let asym = (k - k.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InvalidArgument(format!(
            "kernel matrix is not symmetric (max asymmetry {asym:e})"
        )));
    }
    Ok(())
}

/// Retained eigenpairs of a PSD kernel: `K ~= eigvecs diag(sigmas^2) eigvecs^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFactor {
    eigvecs: DMatrix<f64>,
    sigmas: DVector<f64>,
}

impl KernelFactor {
    /// `N x r` matrix with orthonormal columns.
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    /// Square roots of the retained eigenvalues, descending.
    pub fn sigmas(&self) -> &DVector<f64> {
        &self.sigmas
    }

    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    pub fn n(&self) -> usize {
        self.eigvecs.nrows()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.eigvecs.clone();
        for (c, s) in self.sigmas.iter().enumerate() {
            scaled.column_mut(c).scale_mut(s * s);
        }
        scaled * self.eigvecs.transpose()
    }
}

/// Eigen-factorizes a symmetric kernel, clamping negative eigenvalues to zero
/// and keeping those above `rank_tol * lambda_max`.
pub fn factor_kernel(k: &DMatrix<f64>, rank_tol: f64) -> Result<KernelFactor> {
    if !k.is_square() {
        return Err(Error::dims(
            "factor_kernel",
            "square matrix",
            format!("{}x{}", k.nrows(), k.ncols()),
        ));
    }
    if !(rank_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rank tolerance must be positive, got {rank_tol}"
        )));
    }
    if !k.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidArgument(
            "kernel contains non-finite values".into(),
        ));
    }
    check_symmetric(k)?;
    let n = k.nrows();
    let eig = SymmetricEigen::try_new(k.clone(), f64::EPSILON, 100 * n.max(10)).ok_or(
        Error::Numerical {
            context: "kernel eigendecomposition did not converge",
            index: None,
        },
    )?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let lambda_max = order
        .first()
        .map(|&i| eig.eigenvalues[i].max(0.0))
        .unwrap_or(0.0);
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|&i| lambda_max > 0.0 && eig.eigenvalues[i] > rank_tol * lambda_max)
        .collect();
    let mut eigvecs = DMatrix::zeros(n, kept.len());
    for (c, &i) in kept.iter().enumerate() {
        let mut col = eig.eigenvectors.column(i).into_owned();
        // sign: largest-magnitude entry positive
        let lead = col.iamax();
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        eigvecs.set_column(c, &col);
    }
    let sigmas =
        DVector::from_iterator(kept.len(), kept.iter().map(|&i| eig.eigenvalues[i].sqrt()));
    Ok(KernelFactor { eigvecs, sigmas })
}

/// `sum_i sqrt(p_i^T K p_i)` over the columns of `p`, evaluated as
/// `||diag(sigma) V^T p_i||`.
pub fn h_value(p: &DMatrix<f64>, factor: &KernelFactor) -> Result<f64> {
    if p.nrows() != factor.n() {
        return Err(Error::dims(
            "h_value",
            format!("{} rows", factor.n()),
            format!("{} rows", p.nrows()),
        ));
    }
    if factor.rank() == 0 {
        return Ok(0.0);
    }
    let mut proj = factor.eigvecs.tr_mul(p);
    for (r, s) in factor.sigmas.iter().enumerate() {
        proj.row_mut(r).scale_mut(*s);
    }
    Ok(proj.column_iter().map(|c| c.norm()).sum())
}
