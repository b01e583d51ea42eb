//! Derivative-free minimization, multi-start drivers, landscape sweeps and the
//! layer-wise QAOA grid search.
//!
//! Objectives return `Result<f64>`. A failed evaluation is retried up to
//! `max_retries` times and then counted as `+∞`. A run with `FAILURE_LIMIT`
//! consecutive failed evaluations, or with no successful evaluation at all, ends with
//! [`Error::Optimization`] carrying the trace recorded so far.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{readout_distribution, run_noisy_circuit, NoiseModel};
use crate::qubo::QuboInstance;
use crate::rng::{derive_seed, rng, Stage};
use crate::simulator::{
    ising_diagonal, qaoa_circuit_decomposed, qaoa_state_with_diagonal, relabel_distribution, sample_multinomial,
};

pub const FAILURE_LIMIT: usize = 50;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    CobylaStyle,
    NelderMead,
}

fn default_max_evals() -> usize {
    5000
}
fn default_rho_begin() -> f64 {
    0.5
}
fn default_tolerance() -> f64 {
    1e-4
}
fn default_retries() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    /// Starting point; drawn uniformly from `[0, 2π)^dim` with `seed` when absent.
    #[serde(default)]
    pub initial_theta: Option<Vec<f64>>,
    /// Initial trust-region radius or simplex edge.
    #[serde(default = "default_rho_begin")]
    pub rho_begin: f64,
    /// Termination once the radius or simplex size falls to `tolerance · rho_begin`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
    #[serde(default)]
    pub record_thetas: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            method: Method::CobylaStyle,
            max_evals: default_max_evals(),
            initial_theta: None,
            rho_begin: default_rho_begin(),
            tolerance: default_tolerance(),
            seed: 0,
            max_retries: default_retries(),
            record_thetas: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_evals == 0 {
            return Err(Error::InvalidParameter("max_evals must be at least 1".into()));
        }
        if !(self.rho_begin > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("rho_begin and tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        OptimizerConfig { seed, ..self.clone() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub cost: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub method: Method,
    pub rho_begin: f64,
    pub tolerance: f64,
    pub initial_theta: Vec<f64>,
    pub evaluations: Vec<EvalRecord>,
    pub best_so_far: Vec<f64>,
    pub final_theta: Vec<f64>,
    pub final_cost: f64,
    pub n_eval_used: usize,
    pub failed_attempts: usize,
    pub converged: bool,
}

impl OptimizationTrace {
    /// CSV with columns `eval_index,cost,best_so_far`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eval_index,cost,best_so_far\n");
        for (k, (e, b)) in self.evaluations.iter().zip(&self.best_so_far).enumerate() {
            s.push_str(&format!("{k},{},{}\n", e.cost, b));
        }
        s
    }
}

enum Halt {
    Budget,
    Failed(String),
}

/// Budgeted, retrying objective wrapper that records the trace.
struct Evaluator<'a, F> {
    f: &'a mut F,
    max_evals: usize,
    max_retries: usize,
    record: bool,
    trace: OptimizationTrace,
    best_theta: Vec<f64>,
    consecutive_failures: usize,
}

impl<'a, F: FnMut(&[f64]) -> Result<f64>> Evaluator<'a, F> {
    fn eval(&mut self, x: &[f64]) -> std::result::Result<f64, Halt> {
        if self.trace.n_eval_used >= self.max_evals {
            return Err(Halt::Budget);
        }
        let mut value = f64::INFINITY;
        let mut last_err = String::new();
        for _ in 0..=self.max_retries {
            match (self.f)(x) {
                Ok(v) if !v.is_nan() => {
                    value = v;
                    break;
                }
                Ok(_) => last_err = "objective returned NaN".into(),
                Err(e) => last_err = e.to_string(),
            }
            self.trace.failed_attempts += 1;
        }
        self.trace.n_eval_used += 1;
        let best = self.trace.best_so_far.last().copied().unwrap_or(f64::INFINITY);
        if value < best || self.trace.evaluations.is_empty() {
            self.best_theta = x.to_vec();
        }
        self.trace.best_so_far.push(best.min(value));
        self.trace.evaluations.push(EvalRecord { cost: value, theta: self.record.then(|| x.to_vec()) });
        if value == f64::INFINITY {
            self.consecutive_failures += 1;
            if self.consecutive_failures >= FAILURE_LIMIT {
                return Err(Halt::Failed(format!("{FAILURE_LIMIT} consecutive failed evaluations; last error: {last_err}")));
            }
        } else {
            self.consecutive_failures = 0;
        }
        Ok(value)
    }

    fn finish(mut self, converged: bool, halt: Option<Halt>) -> Result<OptimizationTrace> {
        self.trace.final_theta = self.best_theta.clone();
        self.trace.final_cost = self.trace.best_so_far.last().copied().unwrap_or(f64::INFINITY);
        self.trace.converged = converged;
        if let Some(Halt::Failed(reason)) = halt {
            return Err(Error::Optimization { reason, trace: Box::new(self.trace) });
        }
        if self.trace.final_cost == f64::INFINITY {
            return Err(Error::Optimization {
                reason: "no evaluation succeeded".into(),
                trace: Box::new(self.trace),
            });
        }
        Ok(self.trace)
    }
}

/// Draws a starting point uniformly from `[0, 2π)^dim`.
pub fn random_theta(dim: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..dim).map(|_| r.random_range(0.0..2.0 * PI)).collect()
}

/// Minimizes `objective` over `dim` parameters.
pub fn minimize<F>(mut objective: F, dim: usize, config: &OptimizerConfig) -> Result<OptimizationTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    config.validate()?;
    if dim == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let x0 = match &config.initial_theta {
        Some(t) if t.len() != dim => {
            return Err(Error::Dimension(format!("initial theta has length {}, expected {dim}", t.len())))
        }
        Some(t) => t.clone(),
        None => random_theta(dim, config.seed),
    };
    let mut ev = Evaluator {
        f: &mut objective,
        max_evals: config.max_evals,
        max_retries: config.max_retries,
        record: config.record_thetas,
        trace: OptimizationTrace {
            method: config.method,
            rho_begin: config.rho_begin,
            tolerance: config.tolerance,
            initial_theta: x0.clone(),
            evaluations: Vec::new(),
            best_so_far: Vec::new(),
            final_theta: x0.clone(),
            final_cost: f64::INFINITY,
            n_eval_used: 0,
            failed_attempts: 0,
            converged: false,
        },
        best_theta: x0.clone(),
        consecutive_failures: 0,
    };
    let rho_end = config.rho_begin * config.tolerance;
    let outcome = match config.method {
        Method::CobylaStyle => cobyla_style(&mut ev, &x0, config.rho_begin, rho_end),
        Method::NelderMead => {
            let steps = vec![config.rho_begin; dim];
            nelder_mead(&mut ev, &x0, &steps, rho_end)
        }
    };
    match outcome {
        Ok(()) => ev.finish(true, None),
        Err(h) => ev.finish(false, Some(h)),
    }
}

/// Nelder–Mead with explicit initial edge lengths per coordinate.
pub fn minimize_nelder_mead<F>(mut objective: F, x0: &[f64], steps: &[f64], tolerance: f64, max_evals: usize) -> Result<OptimizationTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let config = OptimizerConfig {
        method: Method::NelderMead,
        max_evals,
        initial_theta: Some(x0.to_vec()),
        tolerance,
        ..OptimizerConfig::default()
    };
    config.validate()?;
    let mut ev = Evaluator {
        f: &mut objective,
        max_evals,
        max_retries: config.max_retries,
        record: false,
        trace: OptimizationTrace {
            method: Method::NelderMead,
            rho_begin: steps.iter().cloned().fold(0.0, f64::max),
            tolerance,
            initial_theta: x0.to_vec(),
            evaluations: Vec::new(),
            best_so_far: Vec::new(),
            final_theta: x0.to_vec(),
            final_cost: f64::INFINITY,
            n_eval_used: 0,
            failed_attempts: 0,
            converged: false,
        },
        best_theta: x0.to_vec(),
        consecutive_failures: 0,
    };
    let size_tol = tolerance * steps.iter().cloned().fold(0.0, f64::max);
    match nelder_mead(&mut ev, x0, steps, size_tol) {
        Ok(()) => ev.finish(true, None),
        Err(h) => ev.finish(false, Some(h)),
    }
}

fn axpy(x: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(xi, di)| xi + a * di).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Linear-interpolation trust-region method in the manner of Powell's COBYLA for
/// problems without constraints.
fn cobyla_style<F: FnMut(&[f64]) -> Result<f64>>(
    ev: &mut Evaluator<F>,
    x0: &[f64],
    rho_begin: f64,
    rho_end: f64,
) -> std::result::Result<(), Halt> {
    const ALPHA: f64 = 0.25; // smallest acceptable vertex-to-face distance, in units of rho
    const BETA: f64 = 2.1; // largest acceptable vertex distance, in units of rho
    const GAMMA: f64 = 0.5; // geometry step length, in units of rho
    let n = x0.len();
    let mut pts = vec![x0.to_vec()];
    let mut vals = vec![ev.eval(x0)?];
    for j in 0..n {
        let mut x = x0.to_vec();
        x[j] += rho_begin;
        vals.push(ev.eval(&x)?);
        pts.push(x);
    }
    let mut rho = rho_begin;
    let mut bad_trial = false;
    let mut just_fixed = false;
    loop {
        let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty simplex");
        pts.swap(0, best);
        vals.swap(0, best);
        let base = pts[0].clone();
        let f0 = vals[0];
        let d = DMatrix::from_fn(n, n, |r, c| pts[r + 1][c] - base[c]);
        let Some(dinv) = d.clone().try_inverse() else {
            // Degenerate simplex: rebuild it around the best point.
            for j in 0..n {
                let mut x = base.clone();
                x[j] += rho;
                vals[j + 1] = ev.eval(&x)?;
                pts[j + 1] = x;
            }
            continue;
        };
        let df = DVector::from_fn(n, |r, _| {
            let v = vals[r + 1] - f0;
            if v.is_finite() { v } else { 1e300 }
        });
        let g = &dinv * df;
        let veta: Vec<f64> = (0..n).map(|j| d.row(j).norm()).collect();
        let vsig: Vec<f64> = (0..n).map(|j| 1.0 / dinv.column(j).norm()).collect();
        let far = (0..n).max_by(|&a, &b| veta[a].total_cmp(&veta[b])).expect("n >= 1");
        let flat = (0..n).min_by(|&a, &b| vsig[a].total_cmp(&vsig[b])).expect("n >= 1");
        let acceptable = veta[far] <= BETA * rho && vsig[flat] >= ALPHA * rho;
        if bad_trial {
            bad_trial = false;
            if acceptable {
                if rho <= rho_end {
                    return Ok(());
                }
                rho = if 0.5 * rho <= 1.5 * rho_end { rho_end } else { 0.5 * rho };
                just_fixed = false;
                continue;
            }
        }
        if !acceptable && !just_fixed {
            let j = if veta[far] > BETA * rho { far } else { flat };
            let u = dinv.column(j);
            let dir: Vec<f64> = u.iter().map(|v| v / u.norm()).collect();
            let slope: f64 = dir.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
            let s = if slope > 0.0 { -GAMMA * rho } else { GAMMA * rho };
            let x = axpy(&base, s, &dir);
            vals[j + 1] = ev.eval(&x)?;
            pts[j + 1] = x;
            just_fixed = true;
            continue;
        }
        just_fixed = false;
        let gnorm = g.norm();
        if !(gnorm > 0.0) || !gnorm.is_finite() {
            bad_trial = true;
            continue;
        }
        let step: Vec<f64> = g.iter().map(|gi| -rho * gi / gnorm).collect();
        let x = axpy(&base, 1.0, &step);
        let f = ev.eval(&x)?;
        let predicted = rho * gnorm;
        bad_trial = !((f0 - f) >= 0.1 * predicted);
        let lambda: Vec<f64> = (0..n).map(|j| dinv.column(j).iter().zip(&step).map(|(a, b)| a * b).sum()).collect();
        let j = (0..n)
            .max_by(|&a, &b| {
                let wa = lambda[a].abs() * (dist(&pts[a + 1], &x) / rho).max(1.0);
                let wb = lambda[b].abs() * (dist(&pts[b + 1], &x) / rho).max(1.0);
                wa.total_cmp(&wb)
            })
            .expect("n >= 1");
        pts[j + 1] = x;
        vals[j + 1] = f;
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> Result<f64>>(
    ev: &mut Evaluator<F>,
    x0: &[f64],
    steps: &[f64],
    size_tol: f64,
) -> std::result::Result<(), Halt> {
    let n = x0.len();
    let mut pts = vec![x0.to_vec()];
    let mut vals = vec![ev.eval(x0)?];
    for j in 0..n {
        let mut x = x0.to_vec();
        x[j] += steps[j];
        vals.push(ev.eval(&x)?);
        pts.push(x);
    }
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();
        let size = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size <= size_tol {
            return Ok(());
        }
        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let worst = pts[n].clone();
        let toward = |a: f64| -> Vec<f64> { centroid.iter().zip(&worst).map(|(c, w)| c + a * (c - w)).collect() };
        let xr = toward(1.0);
        let fr = ev.eval(&xr)?;
        if fr < vals[0] {
            let xe = toward(2.0);
            let fe = ev.eval(&xe)?;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, accept_below) = if fr < vals[n] { (toward(0.5), fr) } else { (toward(-0.5), vals[n]) };
        let fc = ev.eval(&xc)?;
        if fc < accept_below || (fr < vals[n] && fc <= fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for j in 1..=n {
            let x: Vec<f64> = pts[0].iter().zip(&pts[j]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[j] = ev.eval(&x)?;
            pts[j] = x;
        }
    }
}

/// Independent restarts; restart `r` starts from `derive_seed(config.seed, InitialTheta, r)`
/// and receives its index so the objective can seed its own randomness.
pub fn multi_start<M, O>(make_objective: M, dim: usize, config: &OptimizerConfig, restarts: usize) -> Result<Vec<Result<OptimizationTrace>>>
where
    M: Fn(usize) -> O + Sync,
    O: FnMut(&[f64]) -> Result<f64>,
{
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    config.validate()?;
    Ok((0..restarts)
        .into_par_iter()
        .map(|r| {
            let cfg = restart_config(config, r);
            minimize(make_objective(r), dim, &cfg)
        })
        .collect())
}

pub fn restart_config(config: &OptimizerConfig, restart: usize) -> OptimizerConfig {
    config.with_seed(derive_seed(config.seed, Stage::InitialTheta, restart as u64))
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Sweeps parameter `index` over `2πk/grid`, `k = 0..grid`, with the others fixed.
/// Evaluations that keep failing after three retries are reported as NaN.
pub fn landscape_sweep<F>(mut objective: F, theta_base: &[f64], index: usize, grid: usize) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if index >= theta_base.len() {
        return Err(Error::Dimension(format!("index {index} out of range for {} parameters", theta_base.len())));
    }
    if grid == 0 {
        return Err(Error::InvalidParameter("grid must be at least 1".into()));
    }
    let mut theta = theta_base.to_vec();
    let mut out = Vec::with_capacity(grid);
    for k in 0..grid {
        theta[index] = 2.0 * PI * k as f64 / grid as f64;
        let v = (0..4).find_map(|_| objective(&theta).ok()).unwrap_or(f64::NAN);
        out.push((theta[index], v));
    }
    Ok(out)
}

fn default_grid() -> (usize, usize) {
    (50, 50)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaConfig {
    pub p_max: usize,
    /// Grid points along `γ ∈ [0, 2π)` and `β ∈ [0, π)`.
    #[serde(default = "default_grid")]
    pub grid: (usize, usize),
    #[serde(default)]
    pub n_meas: Option<u64>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub refine: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaoaLayer {
    pub p: usize,
    pub gamma: f64,
    pub beta: f64,
    pub grid_cost: f64,
    pub refined_cost: Option<f64>,
    pub best_cost: f64,
    pub n_eval: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaoaResult {
    pub uniform_cost: f64,
    pub layers: Vec<QaoaLayer>,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl QaoaResult {
    pub fn best_costs(&self) -> Vec<f64> {
        std::iter::once(self.uniform_cost).chain(self.layers.iter().map(|l| l.best_cost)).collect()
    }
}

/// `⟨H_Ising⟩` estimator shared by grid points.
struct QaoaCost<'a> {
    instance: &'a QuboInstance,
    diag: Vec<f64>,
    config: &'a QaoaConfig,
}

impl QaoaCost<'_> {
    fn distribution(&self, gammas: &[f64], betas: &[f64]) -> Result<Vec<f64>> {
        let n = self.instance.n_c();
        match &self.config.noise {
            None => Ok(qaoa_state_with_diagonal(n, &self.diag, gammas, betas)?.probabilities()),
            Some(model) => {
                let (gates, layout) = qaoa_circuit_decomposed(self.instance, gammas, betas)?;
                let rho = run_noisy_circuit(&gates, n, model)?;
                let dist = readout_distribution(&rho.diagonal(), n, model.readout_error);
                Ok(relabel_distribution(&dist, &layout))
            }
        }
    }

    fn cost(&self, gammas: &[f64], betas: &[f64], seed: u64) -> Result<f64> {
        let dist = self.distribution(gammas, betas)?;
        Ok(match self.config.n_meas {
            None => dist.iter().zip(&self.diag).map(|(p, c)| p * c).sum(),
            Some(m) => {
                let counts = sample_multinomial(&dist, m, &mut rng(seed));
                counts.iter().zip(&self.diag).map(|(&k, c)| k as f64 * c).sum::<f64>() / m as f64
            }
        })
    }
}

/// Layer-wise QAOA: for `p = 1..=p_max`, scan `(γ_p, β_p)` on the grid with earlier
/// layers frozen, then refine the grid optimum with Nelder–Mead using one grid cell as
/// the initial simplex edge. A refined point is kept only if its cost is lower.
pub fn qaoa_grid_search(instance: &QuboInstance, config: &QaoaConfig) -> Result<QaoaResult> {
    let (gg, gb) = config.grid;
    if gg == 0 || gb == 0 {
        return Err(Error::InvalidParameter("grid dimensions must be positive".into()));
    }
    if let Some(m) = &config.noise {
        m.validate()?;
    }
    if config.n_meas == Some(0) {
        return Err(Error::InvalidParameter("n_meas must be at least 1".into()));
    }
    let est = QaoaCost { instance, diag: ising_diagonal(instance)?, config };
    let point_seed = |p: usize, k: usize| derive_seed(config.seed, Stage::Qaoa, ((p as u64) << 32) | k as u64);
    let uniform_cost = est.cost(&[], &[], point_seed(0, 0))?;
    let (dg, db) = (2.0 * PI / gg as f64, PI / gb as f64);
    let mut gammas = Vec::new();
    let mut betas = Vec::new();
    let mut layers = Vec::new();
    for p in 1..=config.p_max {
        let grid: Vec<Result<(f64, f64, f64)>> = (0..gg * gb)
            .into_par_iter()
            .map(|k| {
                let (g, b) = ((k / gb) as f64 * dg, (k % gb) as f64 * db);
                let mut gs = gammas.clone();
                let mut bs = betas.clone();
                gs.push(g);
                bs.push(b);
                Ok((est.cost(&gs, &bs, point_seed(p, k + 1))?, g, b))
            })
            .collect();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for r in grid {
            let r = r?;
            if r.0 < best.0 {
                best = r;
            }
        }
        let (grid_cost, mut gamma, mut beta) = best;
        let mut best_cost = grid_cost;
        let mut refined_cost = None;
        let mut n_eval = gg * gb;
        if config.refine {
            let mut calls = 0u64;
            let trace = minimize_nelder_mead(
                |x: &[f64]| {
                    calls += 1;
                    let mut gs = gammas.clone();
                    let mut bs = betas.clone();
                    gs.push(x[0]);
                    bs.push(x[1]);
                    est.cost(&gs, &bs, point_seed(p, gg * gb + calls as usize))
                },
                &[gamma, beta],
                &[dg, db],
                1e-6,
                200,
            )?;
            n_eval += trace.n_eval_used;
            refined_cost = Some(trace.final_cost);
            if trace.final_cost < best_cost {
                best_cost = trace.final_cost;
                gamma = trace.final_theta[0];
                beta = trace.final_theta[1];
            }
        }
        gammas.push(gamma);
        betas.push(beta);
        layers.push(QaoaLayer { p, gamma, beta, grid_cost, refined_cost, best_cost, n_eval });
    }
    Ok(QaoaResult { uniform_cost, layers, gammas, betas })
}
