//! ADMM solver for the kernelized tensor-regularized self-representation model
//!
//! ```text
//! min  lambda * sum_v h_v(P_v) + ||G||_tnn
//! s.t. P_v = I - Z_v,  G = rotate(Z_1, ..., Z_V)
//! ```
//!
//! where `h_v(P) = sum_i sqrt(p_i^T K_v p_i)`. Every block update has a closed
//! form: `Z` is a weighted average, each column of `P` is a kernel-weighted
//! group shrinkage whose scale solves a scalar equation by bisection, and `G`
//! is the tensor nuclear norm prox.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{h_value, KernelFactor, DEFAULT_RANK_TOL};
use crate::tensor::{rotate, tnn, tnn_prox, unrotate, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Weight of the feature-space reconstruction error.
    pub lambda: f64,
    pub mu0: f64,
    pub rho0: f64,
    /// Penalty growth factor applied every iteration.
    pub eta: f64,
    pub mu_max: f64,
    pub rho_max: f64,
    /// Convergence tolerance on the per-view max-abs constraint residuals.
    pub epsilon: f64,
    pub max_iter: usize,
    /// Accepted relative residual of the bisection root.
    pub bisect_tol: f64,
    pub rank_tol: f64,
    /// Seed for randomized downstream steps; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 0.1,
            mu0: 1e-5,
            rho0: 1e-5,
            eta: 2.0,
            mu_max: 1e13,
            rho_max: 1e13,
            epsilon: 1e-7,
            max_iter: 200,
            bisect_tol: 1e-10,
            rank_tol: DEFAULT_RANK_TOL,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        SolverConfig {
            lambda,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("mu0", self.mu0),
            ("rho0", self.rho0),
            ("epsilon", self.epsilon),
            ("bisect_tol", self.bisect_tol),
            ("rank_tol", self.rank_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.eta > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eta must exceed 1, got {}",
                self.eta
            )));
        }
        if !(self.mu0 <= self.mu_max) || !(self.rho0 <= self.rho_max) {
            return Err(Error::InvalidArgument(
                "initial penalties must not exceed their caps".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// The ADMM iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub z: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub y: Vec<DMatrix<f64>>,
    /// Auxiliary copy of the rotated `Z` tensor, shape `(N, V, N)`.
    pub g: Tensor3,
    /// Multiplier of the `rotate(Z) = G` constraint.
    pub w: Tensor3,
    pub mu: f64,
    pub rho: f64,
    pub iter: usize,
}

impl SolverState {
    /// `Z = Y = 0`, `P = I`, `G = W = 0`.
    pub fn initial(n: usize, views: usize, config: &SolverConfig) -> Self {
        SolverState {
            z: vec![DMatrix::zeros(n, n); views],
            p: vec![DMatrix::identity(n, n); views],
            y: vec![DMatrix::zeros(n, n); views],
            g: Tensor3::zeros(n, views, n),
            w: Tensor3::zeros(n, views, n),
            mu: config.mu0,
            rho: config.rho0,
            iter: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.z[0].nrows()
    }

    pub fn views(&self) -> usize {
        self.z.len()
    }

    fn is_finite(&self) -> bool {
        let mats = self.z.iter().chain(&self.p).chain(&self.y);
        mats.flat_map(|m| m.iter()).all(|x| x.is_finite())
            && self.g.check_finite().is_ok()
            && self.w.check_finite().is_ok()
    }
}

/// Closed-form `Z` update: `(mu I + Y + rho G_v - mu P - W_v) / (mu + rho)`.
pub fn solve_z(
    y: &DMatrix<f64>,
    p: &DMatrix<f64>,
    g_v: &DMatrix<f64>,
    w_v: &DMatrix<f64>,
    mu: f64,
    rho: f64,
) -> DMatrix<f64> {
    let n = y.nrows();
    let mut z = y + g_v * rho - p * mu - w_v;
    for i in 0..n {
        z[(i, i)] += mu;
    }
    z / (mu + rho)
}

fn alpha_equation(alpha: f64, t_u: &[f64], sigmas: &[f64]) -> f64 {
    t_u.iter()
        .zip(sigmas)
        .map(|(t, s)| {
            let s2 = s * s;
            let d = alpha + s2;
            s2 * t * t / (d * d)
        })
        .sum()
}

/// Unique positive root of `sum_i sigma_i^2 t_i^2 / (alpha + sigma_i^2)^2 = 1 / tau^2`.
///
/// The left side is strictly decreasing in `alpha`; a root exists only when
/// `||t / sigma|| > 1 / tau`, otherwise [`Error::Contract`] is returned.
/// The bracket starts at `[0, 1]` and doubles until it straddles the root;
/// bisection then runs to machine precision and the relative residual is
/// checked against `tol`.
pub fn bisect_alpha(t_u: &[f64], sigmas: &[f64], tau: f64, tol: f64) -> Result<f64> {
    if t_u.len() != sigmas.len() {
        return Err(Error::dims(
            "bisect_alpha",
            format!("{} sigmas", t_u.len()),
            sigmas.len(),
        ));
    }
    if !(tau > 0.0) || !(tol > 0.0) || sigmas.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidArgument(
            "bisection needs positive tau, tol and sigmas".into(),
        ));
    }
    let target = 1.0 / (tau * tau);
    let at_zero: f64 = t_u.iter().zip(sigmas).map(|(t, s)| (t / s).powi(2)).sum();
    if !(at_zero > target) {
        return Err(Error::Contract(format!(
            "||t/sigma||^2 = {at_zero:e} does not exceed 1/tau^2 = {target:e}"
        )));
    }
    let f = |a: f64| alpha_equation(a, t_u, sigmas);

    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while f(hi) >= target {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical {
                context: "bisection bracket overflow",
                index: None,
            });
        }
    }
    let mut alpha = 0.5 * (lo + hi);
    for _ in 0..2200 {
        alpha = 0.5 * (lo + hi);
        if alpha <= lo || alpha >= hi {
            break;
        }
        let v = f(alpha);
        if v == target {
            break;
        }
        if v > target {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    let residual = (f(alpha) - target).abs() / target;
    if residual > tol {
        return Err(Error::Numerical {
            context: "bisection root residual above tolerance",
            index: None,
        });
    }
    Ok(alpha)
}

/// Minimizer of `sqrt(p^T K p) + (tau / 2) ||p - c||^2` with `tau = mu / lambda`,
/// where `K` is given by its eigen-factor.
pub fn prox_weighted_l2_column(
    c: &DVector<f64>,
    factor: &KernelFactor,
    tau: f64,
    tol: f64,
) -> Result<DVector<f64>> {
    if c.len() != factor.n() {
        return Err(Error::dims("prox column", factor.n(), c.len()));
    }
    if factor.rank() == 0 {
        return Ok(c.clone());
    }
    let t_u = factor.eigvecs().tr_mul(c);
    let coef = shrink_coefficients(t_u.as_slice(), factor.sigmas().as_slice(), tau, tol)?;
    Ok(c - factor.eigvecs() * t_u.component_mul(&coef))
}

/// Per-component weights `w` such that the prox output is `c - V (w o t_u)`.
fn shrink_coefficients(t_u: &[f64], sigmas: &[f64], tau: f64, tol: f64) -> Result<DVector<f64>> {
    let scaled: f64 = t_u.iter().zip(sigmas).map(|(t, s)| (t / s).powi(2)).sum();
    if scaled.sqrt() > 1.0 / tau {
        let alpha = bisect_alpha(t_u, sigmas, tau, tol)?;
        Ok(DVector::from_iterator(
            sigmas.len(),
            sigmas.iter().map(|s| {
                let s2 = s * s;
                s2 / (alpha + s2)
            }),
        ))
    } else {
        Ok(DVector::from_element(sigmas.len(), 1.0))
    }
}

/// `P` update: column-wise prox of `C = I - Z + Y / mu` with `tau = mu / lambda`.
pub fn solve_p(
    z: &DMatrix<f64>,
    y: &DMatrix<f64>,
    factor: &KernelFactor,
    mu: f64,
    lambda: f64,
    tol: f64,
) -> Result<DMatrix<f64>> {
    let n = z.nrows();
    if factor.n() != n || z.shape() != y.shape() {
        return Err(Error::dims("solve_p", n, factor.n()));
    }
    let mut c = y / mu - z;
    for i in 0..n {
        c[(i, i)] += 1.0;
    }
    if factor.rank() == 0 {
        return Ok(c);
    }
    let tau = mu / lambda;
    let sigmas = factor.sigmas().as_slice();
    let mut t = factor.eigvecs().tr_mul(&c);
    let coefs: Vec<DVector<f64>> = t
        .column_iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|col| shrink_coefficients(col.as_slice(), sigmas, tau, tol))
        .collect::<Result<_>>()?;
    for (j, w) in coefs.iter().enumerate() {
        t.column_mut(j).component_mul_assign(w);
    }
    Ok(c - factor.eigvecs() * t)
}

/// `G` update: tensor nuclear norm prox of `Z + W / rho` with threshold `N / rho`.
pub fn solve_g(z_tensor: &Tensor3, w: &Tensor3, rho: f64) -> Result<Tensor3> {
    if z_tensor.dims() != w.dims() {
        return Err(Error::dims(
            "solve_g",
            format!("{:?}", z_tensor.dims()),
            format!("{:?}", w.dims()),
        ));
    }
    let n3 = z_tensor.dims().2 as f64;
    let f = z_tensor + &(w * (1.0 / rho));
    tnn_prox(&f, n3 / rho)
}

fn identity_residual(z: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let mut r = -(z + p);
    for i in 0..r.nrows() {
        r[(i, i)] += 1.0;
    }
    r
}

fn update_y(state: &mut SolverState) {
    let mu = state.mu;
    for ((y, z), p) in state.y.iter_mut().zip(&state.z).zip(&state.p) {
        *y += identity_residual(z, p) * mu;
    }
}

fn update_w(state: &mut SolverState) -> Result<()> {
    let zt = rotate(&state.z)?;
    state.w = &state.w + &(&(&zt - &state.g) * state.rho);
    Ok(())
}

fn update_penalties(state: &mut SolverState, config: &SolverConfig) {
    state.mu = (config.eta * state.mu).min(config.mu_max);
    state.rho = (config.eta * state.rho).min(config.rho_max);
}

/// Dual ascent on `Y` and `W` followed by penalty growth.
pub fn update_multipliers(state: &mut SolverState, config: &SolverConfig) -> Result<()> {
    update_y(state);
    update_w(state)?;
    update_penalties(state, config);
    Ok(())
}

/// Constraint residuals in max-abs norm, both as the mean over views (what the
/// trace reports) and the max over views (what convergence tests).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub recon_error: f64,
    pub match_error: f64,
    pub recon_max: f64,
    pub match_max: f64,
}

impl Residuals {
    pub fn below(&self, eps: f64) -> bool {
        self.recon_max < eps && self.match_max < eps
    }
}

pub fn residuals(state: &SolverState) -> Result<Residuals> {
    let g_views = unrotate(&state.g)?;
    let views = state.views() as f64;
    let mut out = Residuals {
        recon_error: 0.0,
        match_error: 0.0,
        recon_max: 0.0,
        match_max: 0.0,
    };
    for ((z, p), g) in state.z.iter().zip(&state.p).zip(&g_views) {
        let recon = identity_residual(z, p).amax();
        let matching = (z - g).amax();
        out.recon_error += recon / views;
        out.match_error += matching / views;
        out.recon_max = out.recon_max.max(recon);
        out.match_max = out.match_max.max(matching);
    }
    Ok(out)
}

/// `lambda * sum_v h_v(P_v) + ||rotate(Z)||_tnn`.
pub fn objective(state: &SolverState, factors: &[KernelFactor], lambda: f64) -> Result<f64> {
    if factors.len() != state.views() {
        return Err(Error::dims("objective", state.views(), factors.len()));
    }
    let mut h = 0.0;
    for (p, f) in state.p.iter().zip(factors) {
        h += h_value(p, f)?;
    }
    Ok(lambda * h + tnn(&rotate(&state.z)?)?)
}

/// One row of the convergence trace, recorded after each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub recon_error: f64,
    pub match_error: f64,
    pub objective: f64,
    pub mu: f64,
    pub rho: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveTrace {
    pub rows: Vec<TraceRow>,
}

impl SolveTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "recon_error",
            "match_error",
            "objective",
            "mu",
            "rho",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.iteration.to_string(),
                r.recon_error.to_string(),
                r.match_error.to_string(),
                r.objective.to_string(),
                r.mu.to_string(),
                r.rho.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}

/// Stepwise driver; [`solve`] runs it to convergence.
#[derive(Debug)]
pub struct Solver<'a> {
    factors: &'a [KernelFactor],
    config: SolverConfig,
    state: SolverState,
}

impl<'a> Solver<'a> {
    pub fn new(factors: &'a [KernelFactor], config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidArgument("solver needs at least one view".into()))?;
        let n = first.n();
        if n == 0 {
            return Err(Error::InvalidArgument("views have no samples".into()));
        }
        if let Some(bad) = factors.iter().find(|f| f.n() != n) {
            return Err(Error::dims("solver views", n, bad.n()));
        }
        let state = SolverState::initial(n, factors.len(), &config);
        Ok(Solver {
            factors,
            config,
            state,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// One full sweep: `Z` per view, `P` per view, `Y` per view, `G`, `W`,
    /// then the penalties.
    pub fn step(&mut self) -> Result<(TraceRow, Residuals)> {
        let st = &mut self.state;
        let g_views = unrotate(&st.g)?;
        let w_views = unrotate(&st.w)?;
        for v in 0..st.z.len() {
            st.z[v] = solve_z(&st.y[v], &st.p[v], &g_views[v], &w_views[v], st.mu, st.rho);
        }
        for v in 0..st.p.len() {
            st.p[v] = solve_p(
                &st.z[v],
                &st.y[v],
                &self.factors[v],
                st.mu,
                self.config.lambda,
                self.config.bisect_tol,
            )?;
        }
        update_y(st);
        let zt = rotate(&st.z)?;
        st.g = solve_g(&zt, &st.w, st.rho)?;
        update_w(st)?;
        update_penalties(st, &self.config);
        st.iter += 1;
        if !st.is_finite() {
            return Err(Error::Numerical {
                context: "non-finite iterate",
                index: Some(st.iter),
            });
        }
        let res = residuals(st)?;
        let row = TraceRow {
            iteration: st.iter,
            recon_error: res.recon_error,
            match_error: res.match_error,
            objective: objective(st, self.factors, self.config.lambda)?,
            mu: st.mu,
            rho: st.rho,
        };
        Ok((row, res))
    }

    pub fn into_state(self) -> SolverState {
        self.state
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub z: Vec<DMatrix<f64>>,
    pub trace: SolveTrace,
    pub converged: bool,
    pub state: SolverState,
}

impl SolveOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }
}

/// Runs the ADMM loop until every view's residuals drop below `epsilon` or
/// `max_iter` sweeps are done. Non-convergence is reported, not an error.
pub fn solve(factors: &[KernelFactor], config: &SolverConfig) -> Result<SolveOutcome> {
    let mut solver = Solver::new(factors, config.clone())?;
    let mut trace = SolveTrace::default();
    let mut converged = false;
    while solver.state.iter < config.max_iter {
        let (row, res) = solver.step()?;
        trace.rows.push(row);
        if res.below(config.epsilon) {
            converged = true;
            break;
        }
    }
    let state = solver.into_state();
    Ok(SolveOutcome {
        z: state.z.clone(),
        trace,
        converged,
        state,
    })
}
