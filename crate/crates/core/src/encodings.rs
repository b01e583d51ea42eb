//! Minimal, two-body and complete encodings with their cost functions, plus qubit
//! counts for grouped encodings.
//!
//! Amplitude layout: basis index `(s << n_r) | r` with the ancilla value `s` on the
//! lowest qubit indices and the register value `r` on the rest. For the two-body
//! encoding of edge `(i, j)`, `i < j`, the ancilla value is `s = 2·x_i + x_j`, so slots
//! `0, 1, 2, 3` hold `a, c, b, d`.
//!
//! Marginal routines take a probability vector over basis states. It can come from
//! exact amplitudes ([`PureState::probabilities`]), from the diagonal of a density
//! matrix, or from shot frequencies ([`ShotRecord::frequencies`]).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{MatchingRatios, PairGraph};
use crate::qubo::QuboInstance;
use crate::simulator::{ising_diagonal, PureState, ShotRecord};

pub fn ceil_log2(n: usize) -> usize {
    if n <= 1 { 0 } else { (usize::BITS - (n - 1).leading_zeros()) as usize }
}

fn check_len(dist: &[f64], n_q: usize) -> Result<()> {
    if dist.len() != 1usize << n_q {
        return Err(Error::Dimension(format!("distribution has {} entries, expected 2^{n_q}", dist.len())));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MinimalEncodingMap {
    n_c: usize,
    n_r: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MinimalTable {
    n_c: usize,
    n_r: usize,
    /// `register[i]` is the register basis state of variable `i`.
    register: Vec<usize>,
}

impl Serialize for MinimalEncodingMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MinimalTable { n_c: self.n_c, n_r: self.n_r, register: (0..self.n_c).collect() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MinimalEncodingMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = MinimalTable::deserialize(d)?;
        let map = MinimalEncodingMap::new(t.n_c).map_err(serde::de::Error::custom)?;
        if t.n_r != map.n_r || t.register != (0..t.n_c).collect::<Vec<_>>() {
            return Err(serde::de::Error::custom("register table does not match the identity layout"));
        }
        Ok(map)
    }
}

impl MinimalEncodingMap {
    pub fn new(n_c: usize) -> Result<Self> {
        if n_c == 0 {
            return Err(Error::InvalidParameter("n_c must be at least 1".into()));
        }
        Ok(MinimalEncodingMap { n_c, n_r: ceil_log2(n_c) })
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_q(&self) -> usize {
        self.n_r + 1
    }

    /// Basis index of variable `i` with ancilla value `anc`.
    pub fn index(&self, i: usize, anc: bool) -> usize {
        ((anc as usize) << self.n_r) | i
    }
}

/// `p_i = ⟨P_i^1⟩/⟨P_i⟩` for every variable.
pub fn minimal_probabilities(dist: &[f64], map: &MinimalEncodingMap) -> Result<Vec<f64>> {
    check_len(dist, map.n_q())?;
    (0..map.n_c)
        .map(|i| {
            let p1 = dist[map.index(i, true)];
            let reg = dist[map.index(i, false)] + p1;
            if reg > 0.0 {
                Ok((p1 / reg).clamp(0.0, 1.0))
            } else {
                Err(Error::UndefinedMarginal(format!("variable {i}")))
            }
        })
        .collect()
}

pub fn minimal_probabilities_from_state(state: &PureState, map: &MinimalEncodingMap) -> Result<Vec<f64>> {
    minimal_probabilities(&state.probabilities(), map)
}

pub fn minimal_probabilities_from_shots(shots: &ShotRecord, map: &MinimalEncodingMap) -> Result<Vec<f64>> {
    if shots.n_q != map.n_q() {
        return Err(Error::Dimension(format!("shots on {} qubits, encoding uses {}", shots.n_q, map.n_q())));
    }
    minimal_probabilities(&shots.frequencies(), map)
}

/// Equal-weight state whose ancillas deterministically encode `bits`.
pub fn deterministic_minimal_state(map: &MinimalEncodingMap, bits: &[bool]) -> Result<PureState> {
    if bits.len() != map.n_c {
        return Err(Error::Dimension(format!("{} bits for {} variables", bits.len(), map.n_c)));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << map.n_q()];
    for (i, &b) in bits.iter().enumerate() {
        amps[map.index(i, b)] = Complex64::new(1.0, 0.0);
    }
    PureState::normalized(map.n_q(), amps)
}

/// `Σ_{i≠j} A_ij p_i p_j + Σ_i A_ii p_i`, accumulated in the same order as
/// [`crate::qubo::evaluate`] so binary `p` reproduces it exactly.
pub fn cost_c1(instance: &QuboInstance, p: &[f64]) -> Result<f64> {
    let n = instance.n_c();
    if p.len() != n {
        return Err(Error::Dimension(format!("{} probabilities for {n} variables", p.len())));
    }
    if let Some(i) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Contract(format!("probability {} of variable {i} outside [0, 1]", p[i])));
    }
    let mut total = 0.0;
    for i in 0..n {
        let row = instance.row(i);
        for j in 0..n {
            total += if i == j { row[i] * p[i] } else { row[j] * (p[i] * p[j]) };
        }
    }
    Ok(total)
}

/// `⟨ψ|H_Ising|ψ⟩` on `n_c` qubits.
pub fn cost_c_complete(instance: &QuboInstance, state: &PureState) -> Result<f64> {
    if state.n_q() != instance.n_c() {
        return Err(Error::Dimension(format!("state has {} qubits, instance has {} variables", state.n_q(), instance.n_c())));
    }
    let diag = ising_diagonal(instance)?;
    Ok(state.probabilities().iter().zip(&diag).map(|(p, c)| p * c).sum())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairEncodingMap {
    graph: PairGraph,
    n_r: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairTable {
    n_c: usize,
    n_r: usize,
    /// `pairs[r]` is the pair held by register basis state `r`.
    pairs: Vec<(usize, usize)>,
}

impl Serialize for PairEncodingMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PairTable { n_c: self.graph.n(), n_r: self.n_r, pairs: self.graph.edges().to_vec() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PairEncodingMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let t = PairTable::deserialize(d)?;
        let graph = PairGraph::new(t.n_c, t.pairs.clone()).map_err(serde::de::Error::custom)?;
        if graph.edges() != t.pairs.as_slice() {
            return Err(serde::de::Error::custom("pairs must be listed as sorted (i, j) with i < j"));
        }
        let map = PairEncodingMap::new(graph).map_err(serde::de::Error::custom)?;
        if map.n_r != t.n_r {
            return Err(serde::de::Error::custom("n_r does not match the pair count"));
        }
        Ok(map)
    }
}

impl PairEncodingMap {
    pub fn new(graph: PairGraph) -> Result<Self> {
        if graph.n_edges() == 0 {
            return Err(Error::InvalidParameter("pair encoding needs at least one pair".into()));
        }
        if let Some(v) = (0..graph.n()).find(|&v| graph.degree(v) == 0) {
            return Err(Error::Contract(format!("variable {v} belongs to no encoded pair")));
        }
        let n_r = ceil_log2(graph.n_edges());
        Ok(PairEncodingMap { graph, n_r })
    }

    pub fn all_pairs(n_c: usize) -> Result<Self> {
        Self::new(PairGraph::complete(n_c)?)
    }

    pub fn graph(&self) -> &PairGraph {
        &self.graph
    }

    pub fn n_c(&self) -> usize {
        self.graph.n()
    }

    pub fn n_pair(&self) -> usize {
        self.graph.n_edges()
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_q(&self) -> usize {
        self.n_r + 2
    }

    /// Basis index of edge `e` with `(x_i, x_j)`.
    pub fn index(&self, e: usize, xi: bool, xj: bool) -> usize {
        ((2 * xi as usize + xj as usize) << self.n_r) | e
    }
}

/// Joint distribution of `(x_i, x_j)`; `p_ab` is the probability of `x_i = a, x_j = b`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PairDist {
    pub p00: f64,
    pub p01: f64,
    pub p10: f64,
    pub p11: f64,
}

impl PairDist {
    pub fn get(&self, xi: bool, xj: bool) -> f64 {
        match (xi, xj) {
            (false, false) => self.p00,
            (false, true) => self.p01,
            (true, false) => self.p10,
            (true, true) => self.p11,
        }
    }

    pub fn set(&mut self, xi: bool, xj: bool, v: f64) {
        match (xi, xj) {
            (false, false) => self.p00 = v,
            (false, true) => self.p01 = v,
            (true, false) => self.p10 = v,
            (true, true) => self.p11 = v,
        }
    }

    pub fn sum(&self) -> f64 {
        self.p00 + self.p01 + self.p10 + self.p11
    }

    /// Marginal of the first (`first = true`) or second variable taking `value`.
    pub fn marginal(&self, first: bool, value: bool) -> f64 {
        if first { self.get(value, false) + self.get(value, true) } else { self.get(false, value) + self.get(true, value) }
    }

    /// Entries in the order `(p00, p10, p01, p11)`.
    pub fn display_order(&self) -> [f64; 4] {
        [self.p00, self.p10, self.p01, self.p11]
    }

    pub fn from_display_order(v: [f64; 4]) -> Self {
        PairDist { p00: v[0], p10: v[1], p01: v[2], p11: v[3] }
    }

    pub fn max_entry(&self) -> f64 {
        self.p00.max(self.p01).max(self.p10).max(self.p11)
    }
}

/// Per-edge joint distributions `|a|², |b|², |c|², |d|²` normalized by `β²`.
pub fn pair_joints(dist: &[f64], map: &PairEncodingMap) -> Result<Vec<PairDist>> {
    check_len(dist, map.n_q())?;
    map.graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(i, j))| {
            let mut d = PairDist {
                p00: dist[map.index(e, false, false)],
                p01: dist[map.index(e, false, true)],
                p10: dist[map.index(e, true, false)],
                p11: dist[map.index(e, true, true)],
            };
            let beta2 = d.sum();
            if !(beta2 > 0.0) {
                return Err(Error::UndefinedMarginal(format!("pair ({i}, {j})")));
            }
            for v in [&mut d.p00, &mut d.p01, &mut d.p10, &mut d.p11] {
                *v /= beta2;
            }
            Ok(d)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub i: usize,
    pub j: usize,
    pub dist: PairDist,
}

/// Averaged pair probabilities `P̄^{i,j}` for the encoded pairs and single-variable
/// probabilities `P̄^i_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMarginals {
    pub n_c: usize,
    /// Sorted by `(i, j)`, `i < j`.
    pub pairs: Vec<PairEntry>,
    pub p1: Vec<f64>,
}

impl PairMarginals {
    pub fn get(&self, i: usize, j: usize) -> Option<PairDist> {
        let key = (i.min(j), i.max(j));
        let e = self.pairs.binary_search_by(|p| (p.i, p.j).cmp(&key)).ok()?;
        let d = self.pairs[e].dist;
        Some(if i <= j { d } else { PairDist { p00: d.p00, p01: d.p10, p10: d.p01, p11: d.p11 } })
    }
}

/// Marginal that variable `v` takes `value` under the joint of edge `(u, w)`.
fn edge_marginal(joints: &[PairDist], g: &PairGraph, v: usize, other: usize, value: bool) -> f64 {
    let e = g.edge_index(v, other).expect("neighbor pair is encoded");
    joints[e].marginal(v < other, value)
}

/// Weights are accumulated as [`MatchingRatios::w_ij`] numerators and divided by the
/// common denominator once.
pub fn pair_marginals(dist: &[f64], map: &PairEncodingMap, ratios: &MatchingRatios) -> Result<PairMarginals> {
    let g = &map.graph;
    if ratios.n() != g.n() {
        return Err(Error::Contract(format!("ratios for {} vertices, encoding has {}", ratios.n(), g.n())));
    }
    let joints = pair_joints(dist, map)?;
    let n = g.n();
    let den = ratios.denominator();
    let mut p1 = vec![0.0; n];
    for (i, slot) in p1.iter_mut().enumerate() {
        for k in g.neighbors(i) {
            *slot += ratios.w_ij(i, k)? * edge_marginal(&joints, g, i, k, true);
        }
        *slot /= den;
    }
    let mut pairs = Vec::with_capacity(g.n_edges());
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        let mut sums = [[0.0f64; 2]; 2];
        for k in g.neighbors(i).filter(|&k| k != j) {
            for l in g.neighbors(j).filter(|&l| l != i && l != k) {
                let r = ratios.w_ijkl(i, j, k, l)?;
                for (a, row) in sums.iter_mut().enumerate() {
                    for (b, s) in row.iter_mut().enumerate() {
                        *s += r * edge_marginal(&joints, g, i, k, a == 1) * edge_marginal(&joints, g, j, l, b == 1);
                    }
                }
            }
        }
        let r = ratios.w_ij(i, j)?;
        let direct = joints[e];
        let p11 = (sums[1][1] + r * direct.p11) / den;
        let p01 = (sums[0][1] + r * direct.p01) / den;
        let p10 = (sums[1][0] + r * direct.p10) / den;
        let dist = PairDist { p00: 1.0 - p01 - p10 - p11, p01, p10, p11 };
        pairs.push(PairEntry { i, j, dist });
    }
    Ok(PairMarginals { n_c: n, pairs, p1 })
}

pub fn pair_marginals_from_state(state: &PureState, map: &PairEncodingMap, ratios: &MatchingRatios) -> Result<PairMarginals> {
    if state.n_q() != map.n_q() {
        return Err(Error::Dimension(format!("state has {} qubits, encoding uses {}", state.n_q(), map.n_q())));
    }
    pair_marginals(&state.probabilities(), map, ratios)
}

/// Equal-weight state whose pair ancillas deterministically encode `bits`.
pub fn deterministic_pair_state(map: &PairEncodingMap, bits: &[bool]) -> Result<PureState> {
    if bits.len() != map.n_c() {
        return Err(Error::Dimension(format!("{} bits for {} variables", bits.len(), map.n_c())));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << map.n_q()];
    for (e, &(i, j)) in map.graph.edges().iter().enumerate() {
        amps[map.index(e, bits[i], bits[j])] = Complex64::new(1.0, 0.0);
    }
    PureState::normalized(map.n_q(), amps)
}

/// `Σ_{i≠j} A_ij P̄^{i,j}_{11} + Σ_i A_ii P̄^i_1`, accumulated in the order of
/// [`crate::qubo::evaluate`].
pub fn cost_c2(instance: &QuboInstance, marginals: &PairMarginals) -> Result<f64> {
    let n = instance.n_c();
    if marginals.n_c != n {
        return Err(Error::Dimension(format!("marginals for {} variables, instance has {n}", marginals.n_c)));
    }
    let missing: Vec<(usize, usize)> = instance
        .coupled_pairs()
        .into_iter()
        .filter(|&(i, j)| marginals.get(i, j).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage(missing));
    }
    let mut total = 0.0;
    for i in 0..n {
        let row = instance.row(i);
        for j in 0..n {
            if i == j {
                total += row[i] * marginals.p1[i];
            } else if row[j] != 0.0 {
                total += row[j] * marginals.get(i, j).expect("coverage checked").p11;
            }
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitScheme {
    IndependentGroups,
    AllGroups,
    RegularTopology,
    Minimal,
    TwoBodyAll,
    TwoBodySelective,
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc.checked_mul((n - t) as u128)? / (t as u128 + 1);
    }
    Some(acc)
}

fn ceil_log2_u128(n: u128) -> usize {
    if n <= 1 { 0 } else { (u128::BITS - (n - 1).leading_zeros()) as usize }
}

/// Qubit counts of the encoding families. `extra` is the pair count for
/// `TwoBodySelective`; the remaining schemes ignore it. For `RegularTopology`, `n_a`
/// is the graph degree.
pub fn qubit_count(scheme: QubitScheme, n_c: usize, n_a: usize, extra: Option<usize>) -> Result<usize> {
    if n_c == 0 {
        return Err(Error::InvalidParameter("n_c must be at least 1".into()));
    }
    let grouped = matches!(scheme, QubitScheme::IndependentGroups | QubitScheme::AllGroups | QubitScheme::RegularTopology);
    if grouped && (n_a == 0 || n_a > n_c) {
        return Err(Error::InvalidParameter(format!("n_a = {n_a} must lie in 1..={n_c}")));
    }
    Ok(match scheme {
        QubitScheme::Minimal => ceil_log2(n_c) + 1,
        QubitScheme::TwoBodyAll => {
            if n_c < 2 {
                return Err(Error::InvalidParameter("two-body encoding needs n_c >= 2".into()));
            }
            ceil_log2(n_c * (n_c - 1) / 2) + 2
        }
        QubitScheme::TwoBodySelective => match extra {
            Some(p) if p >= 1 && p <= n_c * (n_c - 1) / 2 => ceil_log2(p) + 2,
            _ => return Err(Error::InvalidParameter("selective encoding needs a pair count in 1..=n_c(n_c-1)/2".into())),
        },
        QubitScheme::IndependentGroups => ceil_log2(n_c.div_ceil(n_a)) + n_a,
        QubitScheme::AllGroups => {
            let c = binomial(n_c, n_a).ok_or_else(|| Error::ResourceLimit("group count overflows".into()))?;
            ceil_log2_u128(c) + n_a
        }
        QubitScheme::RegularTopology => {
            if n_a >= n_c {
                return Err(Error::InvalidParameter(format!("degree {n_a} must be below n_c = {n_c}")));
            }
            ceil_log2(n_c) + n_a + 1
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{enumerate_perfect_matchings, ratios_complete, ratios_exact, ratios_regular_approx};
    use crate::qubo::{evaluate, exhaustive_oracle, generate_random, generate_regular_maxcut};
    use crate::rng::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_state(n_q: usize, seed: u64) -> PureState {
        let mut r = rng(seed);
        let amps = (0..1 << n_q).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        PureState::normalized(n_q, amps).unwrap()
    }

    /// Average over perfect matchings of the product-of-pairs distribution.
    fn matching_oracle(map: &PairEncodingMap, state: &PureState) -> (Vec<Vec<[[f64; 2]; 2]>>, Vec<f64>) {
        let g = map.graph();
        let n = g.n();
        let joints = pair_joints(&state.probabilities(), map).unwrap();
        let matchings = enumerate_perfect_matchings(g, 100_000).unwrap();
        let mut pair = vec![vec![[[0.0; 2]; 2]; n]; n];
        let mut single = vec![0.0; n];
        for m in &matchings {
            let mut partner = vec![usize::MAX; n];
            for &(u, v) in m {
                partner[u] = v;
                partner[v] = u;
            }
            let joint = |u: usize, v: usize, xu: bool, xv: bool| {
                let e = g.edge_index(u, v).unwrap();
                if u < v { joints[e].get(xu, xv) } else { joints[e].get(xv, xu) }
            };
            let marg = |u: usize, x: bool| joint(u, partner[u], x, false) + joint(u, partner[u], x, true);
            for i in 0..n {
                single[i] += marg(i, true);
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    for (a, row) in pair[i][j].iter_mut().enumerate() {
                        for (b, s) in row.iter_mut().enumerate() {
                            *s += if partner[i] == j { joint(i, j, a == 1, b == 1) } else { marg(i, a == 1) * marg(j, b == 1) };
                        }
                    }
                }
            }
        }
        let c = matchings.len() as f64;
        for row in &mut pair {
            for cell in row.iter_mut() {
                for r in cell.iter_mut() {
                    for v in r.iter_mut() {
                        *v /= c;
                    }
                }
            }
        }
        (pair, single.into_iter().map(|v| v / c).collect())
    }

    fn assert_matches_oracle(map: &PairEncodingMap, ratios: &MatchingRatios, state: &PureState) {
        let m = pair_marginals_from_state(state, map, ratios).unwrap();
        let (pair, single) = matching_oracle(map, state);
        for e in &m.pairs {
            let o = pair[e.i][e.j];
            for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
                assert!((e.dist.get(a, b) - o[a as usize][b as usize]).abs() < 1e-9, "pair ({}, {})", e.i, e.j);
            }
        }
        for (x, y) in m.p1.iter().zip(&single) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn minimal_layout_and_counts() {
        let map = MinimalEncodingMap::new(4).unwrap();
        assert_eq!((map.n_r(), map.n_q()), (2, 3));
        let state = deterministic_minimal_state(&map, &[true, false, false, true]).unwrap();
        assert_eq!(minimal_probabilities_from_state(&state, &map).unwrap(), vec![1.0, 0.0, 0.0, 1.0]);
        let uni = PureState::uniform(3).unwrap();
        for p in minimal_probabilities_from_state(&uni, &map).unwrap() {
            assert!((p - 0.5).abs() < 1e-15);
        }
        let json = serde_json::to_string(&map).unwrap();
        assert_eq!(serde_json::from_str::<MinimalEncodingMap>(&json).unwrap(), map);
    }

    #[test]
    fn minimal_undefined_marginal() {
        let map = MinimalEncodingMap::new(3).unwrap();
        let state = PureState::basis(3, 0).unwrap();
        match minimal_probabilities_from_state(&state, &map) {
            Err(Error::UndefinedMarginal(msg)) => assert!(msg.contains("variable 1")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn minimal_shots_within_four_standard_errors() {
        let map = MinimalEncodingMap::new(8).unwrap();
        let state = random_state(4, 5);
        let exact = minimal_probabilities_from_state(&state, &map).unwrap();
        let shots = crate::simulator::sample_shots(&state, 100_000, 9).unwrap();
        let est = minimal_probabilities_from_shots(&shots, &map).unwrap();
        let probs = state.probabilities();
        for i in 0..8 {
            let hits = 100_000.0 * (probs[map.index(i, false)] + probs[map.index(i, true)]);
            let se = (exact[i] * (1.0 - exact[i]) / hits).sqrt();
            assert!((est[i] - exact[i]).abs() < 4.0 * se, "variable {i}");
        }
    }

    #[test]
    fn c1_examples() {
        let inst = QuboInstance::new(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        assert_eq!(cost_c1(&inst, &[1.0, 1.0]).unwrap(), -2.0);
        assert!(matches!(cost_c1(&inst, &[1.5, 0.0]), Err(Error::Contract(_))));
        let inst = generate_random(7, 4).unwrap();
        let half = cost_c1(&inst, &[0.5; 7]).unwrap();
        let mut closed = 0.0;
        for i in 0..7 {
            for j in 0..7 {
                closed += if i == j { inst.get(i, i) / 2.0 } else { inst.get(i, j) / 4.0 };
            }
        }
        assert!((half - closed).abs() < 1e-12);
        let o = exhaustive_oracle(&inst).unwrap();
        let p: Vec<f64> = o.argmin.iter().map(|&b| b as u8 as f64).collect();
        assert_eq!(cost_c1(&inst, &p).unwrap(), o.c_min);
    }

    #[test]
    fn c1_matches_product_distribution_enumeration() {
        for seed in 0..10 {
            let n = 3 + seed as usize % 8;
            let inst = generate_random(n, seed).unwrap();
            let map = MinimalEncodingMap::new(n).unwrap();
            let state = random_state(map.n_q(), 100 + seed);
            let p = minimal_probabilities_from_state(&state, &map).unwrap();
            let mut expected = 0.0;
            for code in 0u64..1 << n {
                let bits = inst.bits_from_code(code);
                let pr: f64 = bits.iter().zip(&p).map(|(&b, &q)| if b { q } else { 1.0 - q }).product();
                expected += pr * evaluate(&inst, &bits).unwrap();
            }
            assert!((cost_c1(&inst, &p).unwrap() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn complete_encoding_cost() {
        let inst = generate_random(6, 1).unwrap();
        let bits = inst.bits_from_code(0b101101);
        let mut idx = 0;
        for (q, &b) in bits.iter().enumerate() {
            if b {
                idx |= 1 << (5 - q);
            }
        }
        let basis = PureState::basis(6, idx).unwrap();
        assert_eq!(cost_c_complete(&inst, &basis).unwrap(), evaluate(&inst, &bits).unwrap());
        let mean = (0u64..64).map(|c| evaluate(&inst, &inst.bits_from_code(c)).unwrap()).sum::<f64>() / 64.0;
        assert!((cost_c_complete(&inst, &PureState::uniform(6).unwrap()).unwrap() - mean).abs() < 1e-12);
        assert!(cost_c_complete(&inst, &PureState::uniform(5).unwrap()).is_err());
    }

    #[test]
    fn perfect_matching_graph_direct_conditional() {
        let g = PairGraph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let map = PairEncodingMap::new(g.clone()).unwrap();
        let ratios = ratios_exact(&g).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << map.n_q()];
        amps[map.index(0, true, true)] = Complex64::new(1.0, 0.0);
        amps[map.index(1, false, true)] = Complex64::new(0.0, 1.0);
        let state = PureState::normalized(map.n_q(), amps).unwrap();
        let m = pair_marginals_from_state(&state, &map, &ratios).unwrap();
        assert_eq!(m.get(0, 1).unwrap().p11, 1.0);
        assert_eq!(m.get(2, 3).unwrap().p01, 1.0);
        assert_eq!(m.p1, vec![1.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn all_pairs_match_enumeration_oracle() {
        for n in [4, 6] {
            let map = PairEncodingMap::all_pairs(n).unwrap();
            let ratios = ratios_exact(map.graph()).unwrap();
            for seed in 0..5 {
                assert_matches_oracle(&map, &ratios, &random_state(map.n_q(), seed));
            }
            if n >= 6 {
                let closed = ratios_complete(n).unwrap();
                assert_matches_oracle(&map, &closed, &random_state(map.n_q(), 77));
            }
        }
    }

    #[test]
    fn selective_exact_ratios_match_oracle() {
        let g = PairGraph::new(6, vec![(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (0, 3)]).unwrap();
        let map = PairEncodingMap::new(g.clone()).unwrap();
        let ratios = ratios_exact(&g).unwrap();
        for seed in 0..5 {
            assert_matches_oracle(&map, &ratios, &random_state(map.n_q(), 40 + seed));
        }
    }

    #[test]
    fn complement_sums_to_one() {
        let map = PairEncodingMap::all_pairs(8).unwrap();
        let ratios = ratios_complete(8).unwrap();
        let m = pair_marginals_from_state(&random_state(map.n_q(), 3), &map, &ratios).unwrap();
        for e in &m.pairs {
            assert!((e.dist.sum() - 1.0).abs() < 1e-9);
            assert!(e.dist.display_order().iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        }
    }

    #[test]
    fn c2_fixed_point_on_regular_maxcut() {
        let inst = generate_regular_maxcut(8, 3, 2).unwrap();
        let o = exhaustive_oracle(&inst).unwrap();
        let g = PairGraph::from_instance(&inst).unwrap();
        let map = PairEncodingMap::new(g.clone()).unwrap();
        let state = deterministic_pair_state(&map, &o.argmin).unwrap();
        for ratios in [ratios_exact(&g).unwrap(), ratios_regular_approx(&g, 3).unwrap()] {
            let m = pair_marginals_from_state(&state, &map, &ratios).unwrap();
            let c2 = cost_c2(&inst, &m).unwrap();
            if ratios.scheme() == crate::graphs::RatioScheme::ExactEnumeration {
                assert!((c2 - o.c_min).abs() < 1e-12, "{c2} vs {}", o.c_min);
            }
        }
    }

    #[test]
    fn c2_coverage_error_lists_pairs() {
        let inst = generate_random(4, 0).unwrap();
        let g = PairGraph::new(4, vec![(0, 1), (2, 3)]).unwrap();
        let map = PairEncodingMap::new(g.clone()).unwrap();
        let m = pair_marginals_from_state(&PureState::uniform(map.n_q()).unwrap(), &map, &ratios_exact(&g).unwrap()).unwrap();
        match cost_c2(&inst, &m) {
            Err(Error::Coverage(missing)) => assert_eq!(missing, vec![(0, 2), (0, 3), (1, 2), (1, 3)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn qubit_count_examples() {
        assert_eq!(qubit_count(QubitScheme::Minimal, 64, 1, None).unwrap(), 7);
        assert_eq!(qubit_count(QubitScheme::TwoBodyAll, 8, 2, None).unwrap(), 7);
        assert_eq!(qubit_count(QubitScheme::TwoBodySelective, 42, 2, Some(63)).unwrap(), 8);
        assert_eq!(qubit_count(QubitScheme::IndependentGroups, 8, 8, None).unwrap(), 8);
        assert_eq!(qubit_count(QubitScheme::IndependentGroups, 10, 3, None).unwrap(), 5);
        assert_eq!(qubit_count(QubitScheme::AllGroups, 8, 2, None).unwrap(), 7);
        assert_eq!(qubit_count(QubitScheme::AllGroups, 8, 1, None).unwrap(), 4);
        assert_eq!(qubit_count(QubitScheme::RegularTopology, 42, 3, None).unwrap(), 10);
        assert!(qubit_count(QubitScheme::AllGroups, 4, 5, None).is_err());
        assert!(qubit_count(QubitScheme::TwoBodySelective, 4, 2, None).is_err());
    }

    #[test]
    fn pair_map_round_trip() {
        let map = PairEncodingMap::all_pairs(5).unwrap();
        let json = serde_json::to_string(&map).unwrap();
        assert_eq!(serde_json::from_str::<PairEncodingMap>(&json).unwrap(), map);
        assert!(PairEncodingMap::new(PairGraph::new(3, vec![(0, 1)]).unwrap()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn costs_invariant_under_global_phase(seed in 0u64..10_000, phi in 0.0f64..std::f64::consts::TAU) {
            let inst = generate_random(6, seed).unwrap();
            let map1 = MinimalEncodingMap::new(6).unwrap();
            let s1 = random_state(map1.n_q(), seed);
            let ph = Complex64::from_polar(1.0, phi);
            let s1p = PureState::normalized(s1.n_q(), s1.amplitudes().iter().map(|a| a * ph).collect()).unwrap();
            let c = cost_c1(&inst, &minimal_probabilities_from_state(&s1, &map1).unwrap()).unwrap();
            let cp = cost_c1(&inst, &minimal_probabilities_from_state(&s1p, &map1).unwrap()).unwrap();
            prop_assert!((c - cp).abs() < 1e-12);
            let map2 = PairEncodingMap::all_pairs(6).unwrap();
            let ratios = ratios_complete(6).unwrap();
            let s2 = random_state(map2.n_q(), seed + 1);
            let s2p = PureState::normalized(s2.n_q(), s2.amplitudes().iter().map(|a| a * ph).collect()).unwrap();
            let c = cost_c2(&inst, &pair_marginals_from_state(&s2, &map2, &ratios).unwrap()).unwrap();
            let cp = cost_c2(&inst, &pair_marginals_from_state(&s2p, &map2, &ratios).unwrap()).unwrap();
            prop_assert!((c - cp).abs() < 1e-12);
        }

        #[test]
        fn unused_register_states_do_not_matter(seed in 0u64..10_000) {
            let inst = generate_random(5, seed).unwrap();
            let map = MinimalEncodingMap::new(5).unwrap();
            let s = random_state(map.n_q(), seed);
            let mut amps = s.amplitudes().to_vec();
            for r in 5..8 {
                amps.swap(map.index(r, false), map.index(r, true));
            }
            let t = PureState::from_amplitudes(map.n_q(), amps).unwrap();
            let a = cost_c1(&inst, &minimal_probabilities_from_state(&s, &map).unwrap()).unwrap();
            let b = cost_c1(&inst, &minimal_probabilities_from_state(&t, &map).unwrap()).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
