//! Pair-encoding graphs, perfect matchings and matching ratios.
//!
//! A perfect matching is an edge subset covering every vertex exactly once. The ratio
//! `R_ij = N_pm(G − i − j) / N_pm(G)` is the fraction of perfect matchings of `G` that
//! survive the deletion of both vertices, and `R_ijkl` the analogue for four vertices.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::QuboInstance;

/// Default vertex cap for [`ratios_exact`].
pub const EXACT_RATIO_CAP: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct PairGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphFile> for PairGraph {
    type Error = Error;
    fn try_from(f: GraphFile) -> Result<Self> {
        PairGraph::new(f.n, f.edges.into_iter().map(|[i, j]| (i, j)).collect())
    }
}

impl From<PairGraph> for GraphFile {
    fn from(g: PairGraph) -> Self {
        GraphFile { n: g.n, edges: g.edges.iter().map(|&(i, j)| [i, j]).collect() }
    }
}

impl PairGraph {
    /// Canonicalizes each edge to `i < j` and sorts. Rejects loops, duplicates and
    /// out-of-range vertices.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n > 64 {
            return Err(Error::ResourceLimit(format!("pair graphs support at most 64 vertices, got {n}")));
        }
        let mut canon: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(i, j)| if i < j { (i, j) } else { (j, i) })
            .collect();
        canon.sort_unstable();
        let mut adj = vec![0u64; n];
        for (k, &(i, j)) in canon.iter().enumerate() {
            if i == j || j >= n {
                return Err(Error::InvalidParameter(format!("invalid edge ({i}, {j}) for {n} vertices")));
            }
            if k > 0 && canon[k - 1] == (i, j) {
                return Err(Error::InvalidParameter(format!("duplicate edge ({i}, {j})")));
            }
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        Ok(PairGraph { n, edges: canon, adj })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                edges.push((i, j));
            }
        }
        PairGraph::new(n, edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        PairGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect())
    }

    pub fn path(n: usize) -> Result<Self> {
        PairGraph::new(n, (1..n).map(|i| (i - 1, i)).collect())
    }

    /// Graph of the nonzero off-diagonal couplings of an instance.
    pub fn from_instance(instance: &QuboInstance) -> Result<Self> {
        PairGraph::new(instance.n_c(), instance.coupled_pairs())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.adj[i] >> j & 1 == 1
    }

    /// Position of edge `{i, j}` in the sorted edge list.
    pub fn edge_index(&self, i: usize, j: usize) -> Option<usize> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.binary_search(&key).ok()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        let mut m = self.adj[v];
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let u = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(u)
            }
        })
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].count_ones() as usize
    }

    /// The common degree if every vertex has the same degree.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = self.degree(0);
        (0..self.n).all(|v| self.degree(v) == d).then_some(d)
    }

    fn full_mask(&self) -> u64 {
        if self.n == 64 {
            u64::MAX
        } else {
            (1u64 << self.n) - 1
        }
    }
}

/// Memoized perfect-matching counter over vertex subsets of one graph.
struct MatchingCounter<'g> {
    g: &'g PairGraph,
    memo: HashMap<u64, u128>,
}

impl<'g> MatchingCounter<'g> {
    fn new(g: &'g PairGraph) -> Self {
        MatchingCounter { g, memo: HashMap::new() }
    }

    /// Perfect matchings of the subgraph induced by `mask`.
    fn count(&mut self, mask: u64) -> Result<u128> {
        if mask == 0 {
            return Ok(1);
        }
        if mask.count_ones() % 2 == 1 {
            return Ok(0);
        }
        if let Some(&c) = self.memo.get(&mask) {
            return Ok(c);
        }
        let v = mask.trailing_zeros() as usize;
        let rest = mask & !(1u64 << v);
        let mut partners = self.g.adj[v] & rest;
        let mut total: u128 = 0;
        while partners != 0 {
            let u = partners.trailing_zeros() as usize;
            partners &= partners - 1;
            let sub = self.count(rest & !(1u64 << u))?;
            total = total
                .checked_add(sub)
                .ok_or_else(|| Error::ResourceLimit("perfect matching count overflows u128".into()))?;
        }
        self.memo.insert(mask, total);
        Ok(total)
    }
}

/// Exact number of perfect matchings, by recursion on the lowest unmatched vertex.
pub fn count_perfect_matchings(g: &PairGraph) -> Result<u128> {
    MatchingCounter::new(g).count(g.full_mask())
}

/// All perfect matchings in lexicographic order of the lowest-vertex recursion.
pub fn enumerate_perfect_matchings(g: &PairGraph, cap: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    let mut counter = MatchingCounter::new(g);
    let total = counter.count(g.full_mask())?;
    if total > cap as u128 {
        return Err(Error::ResourceLimit(format!("{total} perfect matchings exceed the cap of {cap}")));
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut current = Vec::with_capacity(g.n / 2);
    enumerate_rec(g, &mut counter, g.full_mask(), &mut current, &mut out)?;
    Ok(out)
}

fn enumerate_rec(
    g: &PairGraph,
    counter: &mut MatchingCounter,
    mask: u64,
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) -> Result<()> {
    if mask == 0 {
        out.push(current.clone());
        return Ok(());
    }
    let v = mask.trailing_zeros() as usize;
    let rest = mask & !(1u64 << v);
    let mut partners = g.adj[v] & rest;
    while partners != 0 {
        let u = partners.trailing_zeros() as usize;
        partners &= partners - 1;
        let sub = rest & !(1u64 << u);
        if counter.count(sub)? == 0 {
            continue;
        }
        current.push((v, u));
        enumerate_rec(g, counter, sub, current, out)?;
        current.pop();
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioScheme {
    ExactEnumeration,
    CompleteClosedForm,
    DRegularApprox,
}

#[derive(Clone, Debug)]
enum RatioRule {
    /// Exact fractions keyed by the mask of deleted vertices.
    Exact { total: u128, counts: HashMap<u64, u128> },
    Complete { n: usize },
    Regular { d: usize },
}

/// Matching ratios under one of three schemes.
#[derive(Clone, Debug)]
pub struct MatchingRatios {
    scheme: RatioScheme,
    n: usize,
    rule: RatioRule,
}

impl MatchingRatios {
    pub fn scheme(&self) -> RatioScheme {
        self.scheme
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check_distinct(&self, vs: &[usize]) -> Result<u64> {
        let mut mask = 0u64;
        for &v in vs {
            if v >= self.n {
                return Err(Error::Dimension(format!("vertex {v} out of range for {} vertices", self.n)));
            }
            if mask >> v & 1 == 1 {
                return Err(Error::InvalidParameter(format!("ratio vertices {vs:?} are not distinct")));
            }
            mask |= 1 << v;
        }
        Ok(mask)
    }

    pub fn r_ij(&self, i: usize, j: usize) -> Result<f64> {
        let mask = self.check_distinct(&[i, j])?;
        Ok(match &self.rule {
            RatioRule::Exact { total, counts } => counts[&mask] as f64 / *total as f64,
            RatioRule::Complete { n } => 1.0 / (*n as f64 - 1.0),
            RatioRule::Regular { d } => 1.0 / *d as f64,
        })
    }

    pub fn r_ijkl(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
        let mask = self.check_distinct(&[i, j, k, l])?;
        Ok(match &self.rule {
            RatioRule::Exact { total, counts } => counts[&mask] as f64 / *total as f64,
            RatioRule::Complete { n } => 1.0 / ((*n as f64 - 1.0) * (*n as f64 - 3.0)),
            RatioRule::Regular { d } => {
                if *d <= 2 {
                    return Err(Error::UnsupportedDegree(*d));
                }
                1.0 / (*d as f64 * (*d as f64 - 2.0))
            }
        })
    }

    /// Common denominator of [`Self::w_ij`] and [`Self::w_ijkl`]: `N_pm(𝒢)` under the exact
    /// scheme, 1 otherwise.
    pub fn denominator(&self) -> f64 {
        match &self.rule {
            RatioRule::Exact { total, .. } => *total as f64,
            _ => 1.0,
        }
    }

    /// `R_ij` times [`Self::denominator`]; a matching count under the exact scheme.
    pub fn w_ij(&self, i: usize, j: usize) -> Result<f64> {
        match &self.rule {
            RatioRule::Exact { counts, .. } => Ok(counts[&self.check_distinct(&[i, j])?] as f64),
            _ => self.r_ij(i, j),
        }
    }

    /// `R_ijkl` times [`Self::denominator`].
    pub fn w_ijkl(&self, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
        match &self.rule {
            RatioRule::Exact { counts, .. } => Ok(counts[&self.check_distinct(&[i, j, k, l])?] as f64),
            _ => self.r_ijkl(i, j, k, l),
        }
    }

    /// Exact numerator and denominator of a ratio under the exact scheme.
    pub fn exact_fraction(&self, vertices: &[usize]) -> Option<(u128, u128)> {
        let mask = self.check_distinct(vertices).ok()?;
        match &self.rule {
            RatioRule::Exact { total, counts } => counts.get(&mask).map(|&c| (c, *total)),
            _ => None,
        }
    }
}

/// Exact ratios by counting, with the default vertex cap.
pub fn ratios_exact(g: &PairGraph) -> Result<MatchingRatios> {
    ratios_exact_with_cap(g, EXACT_RATIO_CAP)
}

/// Counts matchings after deleting every pair and quadruple of vertices. One memo table
/// is shared by all counts.
pub fn ratios_exact_with_cap(g: &PairGraph, cap: usize) -> Result<MatchingRatios> {
    let n = g.n;
    if n > cap {
        return Err(Error::ResourceLimit(format!("exact ratios limited to {cap} vertices, got {n}")));
    }
    let mut counter = MatchingCounter::new(g);
    let full = g.full_mask();
    let total = counter.count(full)?;
    if total == 0 {
        return Err(Error::NoPerfectMatching);
    }
    let mut counts = HashMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let m2 = (1u64 << i) | (1u64 << j);
            counts.insert(m2, counter.count(full & !m2)?);
            for k in (j + 1)..n {
                for l in (k + 1)..n {
                    let m4 = m2 | (1u64 << k) | (1u64 << l);
                    counts.insert(m4, counter.count(full & !m4)?);
                }
            }
        }
    }
    Ok(MatchingRatios { scheme: RatioScheme::ExactEnumeration, n, rule: RatioRule::Exact { total, counts } })
}

/// Closed-form ratios of the complete graph on `n` vertices.
pub fn ratios_complete(n: usize) -> Result<MatchingRatios> {
    if n % 2 == 1 || n < 6 {
        return Err(Error::InvalidParameter(format!("complete closed form needs even n >= 6, got {n}")));
    }
    Ok(MatchingRatios { scheme: RatioScheme::CompleteClosedForm, n, rule: RatioRule::Complete { n } })
}

/// Approximate ratios `1/d` and `1/(d(d−2))` for a d-regular graph.
pub fn ratios_regular_approx(g: &PairGraph, d: usize) -> Result<MatchingRatios> {
    if g.n == 0 || d == 0 || g.regular_degree() != Some(d) {
        return Err(Error::InvalidParameter(format!("graph is not {d}-regular")));
    }
    Ok(MatchingRatios { scheme: RatioScheme::DRegularApprox, n: g.n, rule: RatioRule::Regular { d } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn double_factorial(n: u128) -> u128 {
        if n <= 1 { 1 } else { n * double_factorial(n - 2) }
    }

    #[test]
    fn weights_over_denominator_are_ratios() {
        let g = PairGraph::cycle(8).unwrap();
        let r = ratios_exact(&g).unwrap();
        assert_eq!(r.denominator(), 2.0);
        assert_eq!(r.w_ij(0, 1).unwrap() / r.denominator(), r.r_ij(0, 1).unwrap());
        assert_eq!(r.w_ijkl(0, 1, 4, 5).unwrap() / r.denominator(), r.r_ijkl(0, 1, 4, 5).unwrap());
        let c = ratios_complete(6).unwrap();
        assert_eq!((c.denominator(), c.w_ij(0, 1).unwrap()), (1.0, 0.2));
    }

    #[test]
    fn canonical_edges() {
        let g = PairGraph::new(4, vec![(2, 1), (0, 3)]).unwrap();
        assert_eq!(g.edges(), &[(0, 3), (1, 2)]);
        assert_eq!(g.edge_index(2, 1), Some(1));
        assert!(PairGraph::new(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(PairGraph::new(3, vec![(1, 1)]).is_err());
        assert!(PairGraph::new(3, vec![(0, 3)]).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(count_perfect_matchings(&PairGraph::complete(2).unwrap()).unwrap(), 1);
        assert_eq!(count_perfect_matchings(&PairGraph::complete(6).unwrap()).unwrap(), 15);
        assert_eq!(count_perfect_matchings(&PairGraph::cycle(6).unwrap()).unwrap(), 2);
        assert_eq!(count_perfect_matchings(&PairGraph::new(0, vec![]).unwrap()).unwrap(), 1);
        for n in (2..=12).step_by(2) {
            assert_eq!(
                count_perfect_matchings(&PairGraph::complete(n).unwrap()).unwrap(),
                double_factorial(n as u128 - 1)
            );
        }
    }

    #[test]
    fn enumeration() {
        let k4 = enumerate_perfect_matchings(&PairGraph::complete(4).unwrap(), 100).unwrap();
        assert_eq!(k4, vec![vec![(0, 1), (2, 3)], vec![(0, 2), (1, 3)], vec![(0, 3), (1, 2)]]);
        let single = enumerate_perfect_matchings(&PairGraph::complete(2).unwrap(), 10).unwrap();
        assert_eq!(single, vec![vec![(0, 1)]]);
        assert!(enumerate_perfect_matchings(&PairGraph::path(3).unwrap(), 10).unwrap().is_empty());
        assert!(matches!(
            enumerate_perfect_matchings(&PairGraph::complete(8).unwrap(), 10),
            Err(Error::ResourceLimit(_))
        ));
    }

    /// Brute-force oracle: every subset of edges that covers each vertex exactly once.
    fn brute_force_matchings(g: &PairGraph) -> usize {
        let m = g.n_edges();
        (0u64..(1 << m))
            .filter(|&s| {
                let mut cover = 0u64;
                for (k, &(i, j)) in g.edges().iter().enumerate() {
                    if s >> k & 1 == 1 {
                        if cover >> i & 1 == 1 || cover >> j & 1 == 1 {
                            return false;
                        }
                        cover |= (1 << i) | (1 << j);
                    }
                }
                cover == g.full_mask()
            })
            .count()
    }

    #[test]
    fn exact_ratios_on_complete_graphs() {
        let r = ratios_exact(&PairGraph::complete(8).unwrap()).unwrap();
        let c = ratios_complete(8).unwrap();
        assert_eq!(r.r_ij(0, 5).unwrap(), 1.0 / 7.0);
        assert_eq!(r.r_ijkl(0, 2, 5, 7).unwrap(), 1.0 / 35.0);
        assert_eq!(r.exact_fraction(&[1, 2]), Some((15, 105)));
        assert_eq!(r.exact_fraction(&[1, 2, 3, 4]), Some((3, 105)));
        for (i, j) in PairGraph::complete(8).unwrap().edges().iter().copied() {
            assert_eq!(r.r_ij(i, j).unwrap(), c.r_ij(i, j).unwrap());
        }
        assert_eq!(r.r_ijkl(1, 3, 4, 6).unwrap(), c.r_ijkl(1, 3, 4, 6).unwrap());
        let k4 = ratios_exact(&PairGraph::complete(4).unwrap()).unwrap();
        assert_eq!(k4.r_ij(0, 1).unwrap(), 1.0 / 3.0);
        assert!(matches!(ratios_exact(&PairGraph::path(3).unwrap()), Err(Error::NoPerfectMatching)));
        assert!(r.r_ijkl(0, 0, 1, 2).is_err());
    }

    #[test]
    fn closed_forms() {
        let c6 = ratios_complete(6).unwrap();
        assert_eq!(c6.r_ij(0, 1).unwrap(), 1.0 / 5.0);
        assert_eq!(c6.r_ijkl(0, 1, 2, 3).unwrap(), 1.0 / 15.0);
        assert!(ratios_complete(7).is_err());
        let g3 = PairGraph::complete(4).unwrap();
        let r3 = ratios_regular_approx(&g3, 3).unwrap();
        assert_eq!(r3.r_ij(0, 1).unwrap(), 1.0 / 3.0);
        assert_eq!(r3.r_ijkl(0, 1, 2, 3).unwrap(), 1.0 / 3.0);
        let g4 = PairGraph::complete(5).unwrap();
        let r4 = ratios_regular_approx(&g4, 4).unwrap();
        assert_eq!(r4.r_ij(0, 1).unwrap(), 0.25);
        assert_eq!(r4.r_ijkl(0, 1, 2, 3).unwrap(), 0.125);
        let c = PairGraph::cycle(6).unwrap();
        let r2 = ratios_regular_approx(&c, 2).unwrap();
        assert_eq!(r2.r_ij(0, 1).unwrap(), 0.5);
        assert!(matches!(r2.r_ijkl(0, 1, 2, 3), Err(Error::UnsupportedDegree(2))));
        assert!(ratios_regular_approx(&PairGraph::path(4).unwrap(), 2).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = PairGraph::cycle(5).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"n":5,"edges":[[0,1],[0,4],[1,2],[2,3],[3,4]]}"#);
        assert_eq!(serde_json::from_str::<PairGraph>(&s).unwrap(), g);
    }

    fn random_graph(n: usize, bits: u64) -> PairGraph {
        let mut edges = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if bits >> (k % 64) & 1 == 1 {
                    edges.push((i, j));
                }
                k += 1;
            }
        }
        PairGraph::new(n, edges).unwrap()
    }

    proptest! {
        #[test]
        fn enumerate_length_matches_count(n in 1usize..8, bits in any::<u64>()) {
            let g = random_graph(n, bits);
            let c = count_perfect_matchings(&g).unwrap();
            prop_assert_eq!(c as usize, brute_force_matchings(&g));
            let list = enumerate_perfect_matchings(&g, 10_000).unwrap();
            prop_assert_eq!(list.len() as u128, c);
        }

        #[test]
        fn exact_ratios_bounded(half in 2usize..5, bits in any::<u64>()) {
            let g = random_graph(2 * half, bits | 0x5555_5555_5555_5555);
            if let Ok(r) = ratios_exact(&g) {
                for &(i, j) in g.edges() {
                    let v = r.r_ij(i, j).unwrap();
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
