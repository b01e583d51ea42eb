//! Drawing classical solutions from optimized states and summarizing them as
//! cumulative distributions of normalized cost.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encodings::{PairDist, PairMarginals};
use crate::error::{Error, Result};
use crate::graphs::PairGraph;
use crate::qubo::{normalize_cost, OracleSummary, QuboInstance, Solution, EXHAUSTIVE_CAP};
use crate::rng::{derive_seed, rng, Stage};
use crate::simulator::{bit_of, sample_multinomial};

pub const CORRELATED_RETRIES: u64 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSource {
    Minimal,
    TwoBody,
    QaoaBitstring,
    Random,
    Exhaustive,
    Relaxation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub solutions: Vec<Solution>,
    pub normalized_costs: Vec<f64>,
    pub source: SampleSource,
}

impl SampleBatch {
    pub fn from_bits(instance: &QuboInstance, summary: &OracleSummary, bits: Vec<Vec<bool>>, source: SampleSource) -> Result<Self> {
        let mut solutions = Vec::with_capacity(bits.len());
        let mut normalized_costs = Vec::with_capacity(bits.len());
        for b in bits {
            let s = Solution::new(instance, b)?;
            normalized_costs.push(normalize_cost(s.cost, summary)?);
            solutions.push(s);
        }
        Ok(SampleBatch { solutions, normalized_costs, source })
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn min_normalized(&self) -> f64 {
        self.normalized_costs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn extend(&mut self, other: SampleBatch) {
        self.solutions.extend(other.solutions);
        self.normalized_costs.extend(other.normalized_costs);
    }

    /// CSV with columns `solution_bits,cost,normalized_cost`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("solution_bits,cost,normalized_cost\n");
        for (sol, c) in self.solutions.iter().zip(&self.normalized_costs) {
            s.push_str(&format!("{},{},{}\n", sol.bitstring(), sol.cost, c));
        }
        s
    }
}

/// Draws `count` assignments with `x_i = 1` independently with probability `p_i`.
pub fn sample_independent_bits(probabilities: &[f64], count: usize, seed: u64) -> Result<Vec<Vec<bool>>> {
    if let Some(i) = probabilities.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Contract(format!("probability {} of variable {i} outside [0, 1]", probabilities[i])));
    }
    let mut r = rng(seed);
    Ok((0..count).map(|_| probabilities.iter().map(|&p| r.random::<f64>() < p).collect()).collect())
}

pub fn sample_independent(
    instance: &QuboInstance,
    summary: &OracleSummary,
    probabilities: &[f64],
    count: usize,
    seed: u64,
) -> Result<SampleBatch> {
    if probabilities.len() != instance.n_c() {
        return Err(Error::Dimension(format!("{} probabilities for {} variables", probabilities.len(), instance.n_c())));
    }
    let bits = sample_independent_bits(probabilities, count, seed)?;
    SampleBatch::from_bits(instance, summary, bits, SampleSource::Minimal)
}

/// Restricts the pair distribution to the slice where the first (`first = true`) or
/// second variable equals `value`, renormalized.
pub fn condition_pair(dist: &PairDist, first: bool, value: bool) -> Option<PairDist> {
    let mut out = PairDist::default();
    for a in [false, true] {
        for b in [false, true] {
            let keep = if first { a == value } else { b == value };
            out.set(a, b, if keep { dist.get(a, b) } else { 0.0 });
        }
    }
    normalized(out)
}

/// Multiplies each entry by the updated marginal `(Pr(x = 0), Pr(x = 1))` of the first or
/// second variable, renormalized.
pub fn reweight_pair(dist: &PairDist, first: bool, marginal: [f64; 2]) -> Option<PairDist> {
    let mut out = PairDist::default();
    for a in [false, true] {
        for b in [false, true] {
            let v = if first { a } else { b };
            out.set(a, b, dist.get(a, b) * marginal[v as usize]);
        }
    }
    normalized(out)
}

fn normalized(mut d: PairDist) -> Option<PairDist> {
    let s = d.sum();
    if !(s > 0.0) || !s.is_finite() {
        return None;
    }
    for v in [&mut d.p00, &mut d.p01, &mut d.p10, &mut d.p11] {
        *v /= s;
    }
    Some(d)
}

fn draw(dist: &PairDist, r: &mut impl Rng) -> (bool, bool) {
    let u = r.random::<f64>() * dist.sum();
    let mut acc = 0.0;
    let cells = [(false, false), (true, false), (false, true), (true, true)];
    for &(a, b) in &cells {
        acc += dist.get(a, b);
        if u < acc {
            return (a, b);
        }
    }
    *cells.iter().rev().find(|&&(a, b)| dist.get(a, b) > 0.0).expect("positive mass")
}

/// One assignment from the two-body marginals:
/// 1. pick the pair with the largest entry among pairs with an unassigned variable;
/// 2. draw its unassigned variables from the (conditional) pair distribution;
/// 3. condition every pair touching a newly assigned variable on its value;
/// 4. reweight the pairs one hop further by the updated neighbor marginal;
/// 5. repeat until all variables are assigned.
pub fn sample_correlated(marginals: &PairMarginals, graph: &PairGraph, seed: u64) -> Result<Vec<bool>> {
    let n = graph.n();
    if marginals.n_c != n {
        return Err(Error::Dimension(format!("marginals for {} variables, graph has {n}", marginals.n_c)));
    }
    if let Some(v) = (0..n).find(|&v| graph.degree(v) == 0) {
        return Err(Error::Contract(format!("variable {v} belongs to no pair")));
    }
    let edges = graph.edges();
    let mut dists = Vec::with_capacity(edges.len());
    for &(i, j) in edges {
        let d = marginals
            .get(i, j)
            .ok_or_else(|| Error::Coverage(vec![(i, j)]))?;
        let clamped = PairDist { p00: d.p00.max(0.0), p01: d.p01.max(0.0), p10: d.p10.max(0.0), p11: d.p11.max(0.0) };
        dists.push(normalized(clamped).ok_or(Error::ZeroSupport(i, j))?);
    }
    let mut assigned: Vec<Option<bool>> = vec![None; n];
    let mut r = rng(seed);
    loop {
        let mut pick: Option<(usize, f64)> = None;
        for (e, &(i, j)) in edges.iter().enumerate() {
            if assigned[i].is_some() && assigned[j].is_some() {
                continue;
            }
            let m = dists[e].max_entry();
            if pick.is_none_or(|(_, best)| m > best) {
                pick = Some((e, m));
            }
        }
        let Some((e, _)) = pick else { break };
        let (i, j) = edges[e];
        let mut slice = dists[e];
        if let Some(v) = assigned[i] {
            slice = condition_pair(&slice, true, v).ok_or(Error::ZeroSupport(i, j))?;
        }
        if let Some(v) = assigned[j] {
            slice = condition_pair(&slice, false, v).ok_or(Error::ZeroSupport(i, j))?;
        }
        let (xi, xj) = draw(&slice, &mut r);
        let mut fresh = Vec::new();
        for (v, x) in [(i, xi), (j, xj)] {
            if assigned[v].is_none() {
                assigned[v] = Some(x);
                fresh.push(v);
            }
        }
        let touches_fresh = |e: usize| fresh.contains(&edges[e].0) || fresh.contains(&edges[e].1);
        let mut updated = Vec::new();
        for &v in &fresh {
            let x = assigned[v].expect("just assigned");
            for w in graph.neighbors(v) {
                let f = graph.edge_index(v, w).expect("neighbor edge");
                if assigned[w].is_some() {
                    continue;
                }
                dists[f] = condition_pair(&dists[f], v < w, x).ok_or(Error::ZeroSupport(edges[f].0, edges[f].1))?;
                updated.push((f, w));
            }
        }
        for (f, w) in updated {
            let first = w == edges[f].0;
            let marginal = [dists[f].marginal(first, false), dists[f].marginal(first, true)];
            for u in graph.neighbors(w) {
                let h = graph.edge_index(w, u).expect("neighbor edge");
                if h == f || touches_fresh(h) {
                    continue;
                }
                if let Some(d) = reweight_pair(&dists[h], w == edges[h].0, marginal) {
                    dists[h] = d;
                }
            }
        }
        debug_assert!(dists.iter().all(|d| (d.sum() - 1.0).abs() < 1e-9));
    }
    Ok(assigned.into_iter().map(|v| v.expect("every variable assigned")).collect())
}

/// `count` correlated draws; a draw that hits a zero-mass slice is retried with a
/// fresh seed up to [`CORRELATED_RETRIES`] times.
pub fn sample_correlated_batch(
    instance: &QuboInstance,
    summary: &OracleSummary,
    marginals: &PairMarginals,
    graph: &PairGraph,
    count: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let mut bits = Vec::with_capacity(count);
    for k in 0..count as u64 {
        let mut last = None;
        for attempt in 0..CORRELATED_RETRIES {
            match sample_correlated(marginals, graph, derive_seed(seed, Stage::Sampling, k * CORRELATED_RETRIES + attempt)) {
                Ok(b) => {
                    last = Some(Ok(b));
                    break;
                }
                Err(e @ Error::ZeroSupport(..)) => last = Some(Err(e)),
                Err(e) => return Err(e),
            }
        }
        bits.push(last.expect("at least one attempt")?);
    }
    SampleBatch::from_bits(instance, summary, bits, SampleSource::TwoBody)
}

/// `count` bitstrings from a distribution over `n_c`-qubit basis states, qubit `q`
/// carrying variable `x_q`.
pub fn sample_bitstrings(
    instance: &QuboInstance,
    summary: &OracleSummary,
    dist: &[f64],
    count: usize,
    seed: u64,
) -> Result<SampleBatch> {
    let n = instance.n_c();
    if dist.len() != 1usize << n {
        return Err(Error::Dimension(format!("distribution has {} entries, expected 2^{n}", dist.len())));
    }
    let counts = sample_multinomial(dist, count as u64, &mut rng(seed));
    let mut bits = Vec::with_capacity(count);
    for (idx, &c) in counts.iter().enumerate() {
        for _ in 0..c {
            bits.push((0..n).map(|q| idx & bit_of(n, q) != 0).collect());
        }
    }
    SampleBatch::from_bits(instance, summary, bits, SampleSource::QaoaBitstring)
}

/// Uniformly random assignments.
pub fn random_baseline(instance: &QuboInstance, summary: &OracleSummary, count: usize, seed: u64) -> Result<SampleBatch> {
    let bits = sample_independent_bits(&vec![0.5; instance.n_c()], count, seed)?;
    SampleBatch::from_bits(instance, summary, bits, SampleSource::Random)
}

/// Every assignment once.
pub fn exhaustive_baseline(instance: &QuboInstance, summary: &OracleSummary) -> Result<SampleBatch> {
    let n = instance.n_c();
    if n > EXHAUSTIVE_CAP {
        return Err(Error::ResourceLimit(format!("{n} variables exceed the exhaustive cap of {EXHAUSTIVE_CAP}")));
    }
    let bits = (0u64..1 << n).map(|c| instance.bits_from_code(c)).collect();
    SampleBatch::from_bits(instance, summary, bits, SampleSource::Exhaustive)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurve {
    pub thresholds: Vec<f64>,
    /// Fraction of samples with normalized cost strictly above each threshold.
    pub fractions: Vec<f64>,
    pub min_normalized: f64,
}

impl CumulativeCurve {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("threshold,fraction_above\n");
        for (t, f) in self.thresholds.iter().zip(&self.fractions) {
            s.push_str(&format!("{t},{f}\n"));
        }
        s
    }
}

/// Fraction of samples above `k/bins` for `k = 0..=bins`.
pub fn cumulative_distribution(batch: &SampleBatch, bins: usize) -> Result<CumulativeCurve> {
    if batch.is_empty() {
        return Err(Error::InvalidParameter("batch is empty".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidParameter("bins must be at least 1".into()));
    }
    let mut sorted = batch.normalized_costs.clone();
    sorted.sort_by(f64::total_cmp);
    let total = sorted.len() as f64;
    let thresholds: Vec<f64> = (0..=bins).map(|k| k as f64 / bins as f64).collect();
    let fractions = thresholds
        .iter()
        .map(|&t| (sorted.len() - sorted.partition_point(|&c| c <= t)) as f64 / total)
        .collect();
    Ok(CumulativeCurve { thresholds, fractions, min_normalized: sorted[0] })
}
