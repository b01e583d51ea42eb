//! QUBO instances, generators, oracles, cost normalization and the continuous
//! relaxation baseline.
//!
//! The cost of a binary vector `x` is the quadratic form `C_x = xᵀAx` over a symmetric
//! real matrix `A`.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

/// Default cap on the number of variables accepted by [`exhaustive_oracle`].
pub const EXHAUSTIVE_CAP: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct QuboInstance {
    n_c: usize,
    a: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    n_c: usize,
    a: Vec<Vec<f64>>,
}

impl TryFrom<InstanceFile> for QuboInstance {
    type Error = Error;
    fn try_from(f: InstanceFile) -> Result<Self> {
        let inst = QuboInstance::new(f.a)?;
        if inst.n_c != f.n_c {
            return Err(Error::Dimension(format!(
                "n_c = {} but matrix has {} rows",
                f.n_c, inst.n_c
            )));
        }
        Ok(inst)
    }
}

impl From<QuboInstance> for InstanceFile {
    fn from(q: QuboInstance) -> Self {
        InstanceFile {
            n_c: q.n_c,
            a: q.a.chunks(q.n_c).map(|r| r.to_vec()).collect(),
        }
    }
}

impl QuboInstance {
    /// Builds an instance from a square, exactly symmetric matrix with `n_c ≥ 2`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::InvalidParameter(format!("n_c must be at least 2, got {n}")));
        }
        let mut a = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension(format!("row {i} has length {}, expected {n}", row.len())));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite entry {v} in row {i}")));
            }
            a.extend_from_slice(row);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if a[i * n + j] != a[j * n + i] {
                    return Err(Error::InvalidParameter(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(QuboInstance { n_c: n, a })
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n_c + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n_c..(i + 1) * self.n_c]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.a.chunks(self.n_c).map(|r| r.to_vec()).collect()
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n_c)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Off-diagonal pairs `(i, j)`, `i < j`, with nonzero coupling.
    pub fn coupled_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.n_c;
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.get(i, j) != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Binary vector of the low `n_c` bits of `code`, variable 0 in bit 0.
    pub fn bits_from_code(&self, code: u64) -> Vec<bool> {
        (0..self.n_c).map(|i| code >> i & 1 == 1).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub bits: Vec<bool>,
    pub cost: f64,
}

impl Solution {
    pub fn new(instance: &QuboInstance, bits: Vec<bool>) -> Result<Self> {
        let cost = evaluate(instance, &bits)?;
        Ok(Solution { bits, cost })
    }

    pub fn bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Exhaustive,
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub c_min: f64,
    pub c_max: f64,
    pub argmin: Vec<bool>,
    pub method: OracleMethod,
}

/// Evaluates `Σ_{i,j} x_i A_ij x_j`.
pub fn evaluate(instance: &QuboInstance, bits: &[bool]) -> Result<f64> {
    if bits.len() != instance.n_c {
        return Err(Error::Dimension(format!(
            "bit vector has length {}, instance has n_c = {}",
            bits.len(),
            instance.n_c
        )));
    }
    Ok(evaluate_unchecked(instance, bits))
}

pub(crate) fn evaluate_unchecked(instance: &QuboInstance, bits: &[bool]) -> f64 {
    let n = instance.n_c;
    let mut total = 0.0;
    for i in 0..n {
        if !bits[i] {
            continue;
        }
        let row = instance.row(i);
        for j in 0..n {
            if bits[j] {
                total += row[j];
            }
        }
    }
    total
}

/// Symmetric matrix with entries drawn uniformly from `[-1, 1]`.
pub fn generate_random(n_c: usize, seed: u64) -> Result<QuboInstance> {
    if n_c < 2 {
        return Err(Error::InvalidParameter(format!("n_c must be at least 2, got {n_c}")));
    }
    let mut r = rng(seed);
    let mut rows = vec![vec![0.0; n_c]; n_c];
    for i in 0..n_c {
        for j in i..n_c {
            let v: f64 = r.random_range(-1.0..=1.0);
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    QuboInstance::new(rows)
}

/// Max-Cut matrix of a graph: 1 on every edge, minus the vertex degree on the diagonal,
/// so that `xᵀAx` equals minus the number of cut edges.
pub fn maxcut_instance(n: usize, edges: &[(usize, usize)]) -> Result<QuboInstance> {
    let mut rows = vec![vec![0.0; n]; n];
    for &(i, j) in edges {
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidParameter(format!("bad edge ({i}, {j}) for {n} vertices")));
        }
        rows[i][j] = 1.0;
        rows[j][i] = 1.0;
        rows[i][i] -= 1.0;
        rows[j][j] -= 1.0;
    }
    QuboInstance::new(rows)
}

/// Edges of a connected d-regular graph on `n` vertices sampled with the pairing model.
pub fn sample_regular_graph(n: usize, d: usize, seed: u64) -> Result<Vec<(usize, usize)>> {
    if d == 0 || d >= n {
        return Err(Error::InvalidParameter(format!("degree must satisfy 1 <= d < n_c, got d = {d}, n_c = {n}")));
    }
    if (n * d) % 2 == 1 {
        return Err(Error::InvalidParameter(format!("n_c * d must be even, got {n} * {d}")));
    }
    if d == 1 && n > 2 {
        return Err(Error::InvalidParameter(format!("no connected 1-regular graph on {n} vertices")));
    }
    if n > 64 {
        return Err(Error::ResourceLimit(format!("graph generator supports at most 64 vertices, got {n}")));
    }
    let mut r = rng(seed);
    let complement = 2 * d > n - 1;
    let d_sample = if complement { n - 1 - d } else { d };
    const ATTEMPTS: usize = 1_000_000;
    for _ in 0..ATTEMPTS {
        let Some(adj) = pairing_attempt(n, d_sample, &mut r) else { continue };
        let adj = if complement {
            let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
            adj.iter().enumerate().map(|(v, m)| full & !m & !(1u64 << v)).collect()
        } else {
            adj
        };
        if connected(&adj) {
            let mut edges = Vec::with_capacity(n * d / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    if adj[i] >> j & 1 == 1 {
                        edges.push((i, j));
                    }
                }
            }
            return Ok(edges);
        }
    }
    Err(Error::ResourceLimit(format!(
        "no connected {d}-regular graph on {n} vertices found in {ATTEMPTS} attempts"
    )))
}

fn pairing_attempt(n: usize, d: usize, r: &mut impl Rng) -> Option<Vec<u64>> {
    let mut adj = vec![0u64; n];
    if d == 0 {
        return Some(adj);
    }
    let mut points: Vec<usize> = (0..n * d).map(|p| p / d).collect();
    points.shuffle(r);
    for pair in points.chunks(2) {
        let (u, v) = (pair[0], pair[1]);
        if u == v || adj[u] >> v & 1 == 1 {
            return None;
        }
        adj[u] |= 1 << v;
        adj[v] |= 1 << u;
    }
    Some(adj)
}

pub(crate) fn connected(adj: &[u64]) -> bool {
    let n = adj.len();
    if n == 0 {
        return true;
    }
    let mut seen = 1u64;
    let mut frontier = 1u64;
    while frontier != 0 {
        let v = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let fresh = adj[v] & !seen;
        seen |= fresh;
        frontier |= fresh;
    }
    seen.count_ones() as usize == n
}

/// Max-Cut instance on a uniformly sampled connected d-regular graph.
pub fn generate_regular_maxcut(n_c: usize, d: usize, seed: u64) -> Result<QuboInstance> {
    let edges = sample_regular_graph(n_c, d, seed)?;
    maxcut_instance(n_c, &edges)
}

/// Exact bounds by full enumeration, using the default cap.
pub fn exhaustive_oracle(instance: &QuboInstance) -> Result<OracleSummary> {
    exhaustive_oracle_with_cap(instance, EXHAUSTIVE_CAP)
}

/// Enumerates all `2^{n_c}` assignments in Gray-code order with incremental cost updates.
/// The reported bounds are re-evaluated directly at the extremal assignments.
pub fn exhaustive_oracle_with_cap(instance: &QuboInstance, cap: usize) -> Result<OracleSummary> {
    let n = instance.n_c;
    if n > cap || n > 40 {
        return Err(Error::ResourceLimit(format!(
            "exhaustive enumeration refused for n_c = {n} (cap {cap}); use the heuristic oracle"
        )));
    }
    let mut x = vec![false; n];
    // field[k] = Σ_{j≠k} A_kj x_j
    let mut field = vec![0.0; n];
    let mut cost = 0.0;
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let (mut lo_code, mut hi_code) = (0u64, 0u64);
    let mut code = 0u64;
    for step in 1u64..(1u64 << n) {
        let k = step.trailing_zeros() as usize;
        let sign = if x[k] { -1.0 } else { 1.0 };
        cost += sign * (instance.get(k, k) + 2.0 * field[k]);
        x[k] = !x[k];
        code ^= 1 << k;
        let row = instance.row(k);
        for j in 0..n {
            if j != k {
                field[j] += sign * row[j];
            }
        }
        if cost < lo {
            lo = cost;
            lo_code = code;
        }
        if cost > hi {
            hi = cost;
            hi_code = code;
        }
    }
    let argmin = instance.bits_from_code(lo_code);
    let c_min = evaluate_unchecked(instance, &argmin);
    let c_max = evaluate_unchecked(instance, &instance.bits_from_code(hi_code));
    Ok(OracleSummary { c_min, c_max, argmin, method: OracleMethod::Exhaustive })
}

/// Multi-start simulated annealing.
///
/// `budget` counts single-flip proposals. When the budget allows, half of it searches for
/// low costs and half for high costs so both normalization bounds are estimated.
pub fn heuristic_oracle(instance: &QuboInstance, budget: u64, seed: u64) -> Result<OracleSummary> {
    if budget == 0 {
        return Err(Error::InvalidParameter("budget must be positive".into()));
    }
    let mut r = rng(seed);
    let n = instance.n_c;
    if budget == 1 {
        let bits: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let c = evaluate_unchecked(instance, &bits);
        return Ok(OracleSummary { c_min: c, c_max: c, argmin: bits, method: OracleMethod::Heuristic });
    }
    let down = anneal(instance, budget - budget / 2, 1.0, &mut r);
    let up = anneal(instance, budget / 2, -1.0, &mut r);
    let (argmin, c_min) = if down.lowest.1 <= up.lowest.1 { down.lowest } else { up.lowest };
    let c_max = down.highest.max(up.highest);
    Ok(OracleSummary { c_min, c_max, argmin, method: OracleMethod::Heuristic })
}

struct Anneal {
    lowest: (Vec<bool>, f64),
    highest: f64,
}

/// Anneals `sign * C` and reports the extreme raw costs visited.
fn anneal(instance: &QuboInstance, budget: u64, sign: f64, r: &mut impl Rng) -> Anneal {
    let n = instance.n_c;
    let restarts = (budget / (200 * n as u64)).clamp(1, 16);
    let steps = budget / restarts;
    let scale = (0..n)
        .map(|i| instance.get(i, i).abs() + 2.0 * instance.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let t0 = 0.5 * scale;
    let t1 = 1e-3 * scale;
    let mut lowest = (vec![false; n], f64::INFINITY);
    let mut highest = (vec![false; n], f64::NEG_INFINITY);
    for _ in 0..restarts {
        let mut x: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let mut field: Vec<f64> = (0..n)
            .map(|k| (0..n).filter(|&j| j != k && x[j]).map(|j| instance.get(k, j)).sum())
            .collect();
        let mut cost = evaluate_unchecked(instance, &x);
        let mut track = |x: &[bool], cost: f64| {
            if cost < lowest.1 {
                lowest.1 = cost;
                lowest.0.copy_from_slice(x);
            }
            if cost > highest.1 {
                highest.1 = cost;
                highest.0.copy_from_slice(x);
            }
        };
        track(&x, cost);
        for s in 1..steps {
            let frac = s as f64 / (steps - 1).max(1) as f64;
            let temp = t0 * (t1 / t0).powf(frac);
            let k = r.random_range(0..n);
            let flip = if x[k] { -1.0 } else { 1.0 };
            let delta = flip * (instance.get(k, k) + 2.0 * field[k]);
            let signed = sign * delta;
            if signed <= 0.0 || r.random::<f64>() < (-signed / temp).exp() {
                x[k] = !x[k];
                cost += delta;
                let row = instance.row(k);
                for j in 0..n {
                    if j != k {
                        field[j] += flip * row[j];
                    }
                }
                track(&x, cost);
            }
        }
    }
    lowest.1 = evaluate_unchecked(instance, &lowest.0);
    Anneal { lowest, highest: evaluate_unchecked(instance, &highest.0) }
}

/// Maps a cost to `(value − c_min)/(c_max − c_min)`.
pub fn normalize_cost(value: f64, summary: &OracleSummary) -> Result<f64> {
    let span = summary.c_max - summary.c_min;
    if !(span > 0.0) {
        return Err(Error::DegenerateInstance(summary.c_min));
    }
    Ok((value - summary.c_min) / span)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub weights: Vec<f64>,
    pub cost: f64,
}

impl Relaxation {
    pub fn rounded(&self) -> Vec<bool> {
        self.weights.iter().map(|&w| w >= 0.5).collect()
    }
}

/// Relaxed cost `Σ_{i≠j} A_ij w_i w_j + Σ_i A_ii w_i`.
pub fn relaxed_cost(instance: &QuboInstance, w: &[f64]) -> f64 {
    let n = instance.n_c;
    let mut total = 0.0;
    for i in 0..n {
        let row = instance.row(i);
        for j in 0..n {
            total += if i == j { row[j] * w[i] } else { row[j] * w[i] * w[j] };
        }
    }
    total
}

fn relaxed_gradient(instance: &QuboInstance, w: &[f64], g: &mut [f64]) {
    let n = instance.n_c;
    for k in 0..n {
        let row = instance.row(k);
        let mut s = row[k];
        for j in 0..n {
            if j != k {
                s += 2.0 * row[j] * w[j];
            }
        }
        g[k] = s;
    }
}

/// Projected gradient descent from `w0` with backtracking from step `1/‖A‖_∞`.
/// Returns the relaxed cost after each accepted step, starting with the initial cost.
pub fn relaxation_descent(instance: &QuboInstance, w0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = instance.n_c;
    let mut w: Vec<f64> = w0.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let mut g = vec![0.0; n];
    let mut cost = relaxed_cost(instance, &w);
    let mut history = vec![cost];
    let t_init = 1.0 / instance.inf_norm().max(1e-12);
    for _ in 0..10_000 {
        relaxed_gradient(instance, &w, &mut g);
        let mut t = t_init;
        let mut accepted = None;
        while t > 1e-14 {
            let trial: Vec<f64> = w.iter().zip(&g).map(|(wi, gi)| (wi - t * gi).clamp(0.0, 1.0)).collect();
            let step: Vec<f64> = trial.iter().zip(&w).map(|(a, b)| a - b).collect();
            let lin: f64 = step.iter().zip(&g).map(|(s, gi)| s * gi).sum();
            let quad: f64 = step.iter().map(|s| s * s).sum::<f64>() / (2.0 * t);
            let c = relaxed_cost(instance, &trial);
            if c <= cost + lin + quad {
                accepted = Some((trial, c, step));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, c, step)) = accepted else { break };
        let moved = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if c > cost {
            break;
        }
        w = trial;
        cost = c;
        history.push(cost);
        if moved < 1e-12 {
            break;
        }
    }
    (w, history)
}

/// Moves each coordinate to the endpoint its partial derivative favours. The relaxed
/// cost is affine in every single coordinate, so no move increases it.
fn push_to_vertex(instance: &QuboInstance, w: &mut [f64]) {
    let n = instance.n_c;
    for _ in 0..n {
        let mut changed = false;
        for k in 0..n {
            let row = instance.row(k);
            let mut g = row[k];
            for j in 0..n {
                if j != k {
                    g += 2.0 * row[j] * w[j];
                }
            }
            let target = if g > 0.0 { 0.0 } else if g < 0.0 { 1.0 } else { w[k].round() };
            if target != w[k] {
                w[k] = target;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Multi-start projected gradient descent on the relaxed cost over `[0,1]^{n_c}`.
pub fn relaxation_baseline(instance: &QuboInstance, restarts: usize, seed: u64) -> Result<Relaxation> {
    if restarts == 0 {
        return Err(Error::InvalidParameter("restarts must be at least 1".into()));
    }
    let mut r = rng(seed);
    let mut best: Option<Relaxation> = None;
    for _ in 0..restarts {
        let w0: Vec<f64> = (0..instance.n_c).map(|_| r.random::<f64>()).collect();
        let (mut w, _) = relaxation_descent(instance, &w0);
        push_to_vertex(instance, &mut w);
        let cost = relaxed_cost(instance, &w);
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(Relaxation { weights: w, cost });
        }
    }
    Ok(best.expect("at least one restart"))
}
