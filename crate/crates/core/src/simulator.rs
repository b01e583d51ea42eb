//! Exact pure-state simulation.
//!
//! Basis index bit `n_q − 1 − q` holds qubit `q`, so qubit 0 is the most significant bit.
//! Rotations follow `R_a(θ) = exp(−iθσ_a/2)`, and `U3(θ, φ, λ)` is
//! `[[cos θ/2, −e^{iλ} sin θ/2], [e^{iφ} sin θ/2, e^{i(φ+λ)} cos θ/2]]`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qubo::QuboInstance;
use crate::rng::rng;

/// Largest pure-state register.
pub const PURE_STATE_CAP: usize = 20;

const DUMP_MAGIC: &[u8; 8] = b"QSTATE01";

pub type Matrix2 = [[Complex64; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
pub enum GateOp {
    Hadamard(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    U3 { qubit: usize, theta: f64, phi: f64, lambda: f64 },
    Cnot { control: usize, target: usize },
    Swap(usize, usize),
    /// Multiplies amplitude `x` by `exp(−i·phases[x])`.
    PhaseDiag(Vec<f64>),
}

impl GateOp {
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            GateOp::Hadamard(q) | GateOp::Rx(q, _) | GateOp::Ry(q, _) | GateOp::Rz(q, _) => vec![q],
            GateOp::U3 { qubit, .. } => vec![qubit],
            GateOp::Cnot { control, target } => vec![control, target],
            GateOp::Swap(a, b) => vec![a, b],
            GateOp::PhaseDiag(_) => vec![],
        }
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, GateOp::Cnot { .. } | GateOp::Swap(..))
    }

    pub fn is_single_qubit(&self) -> bool {
        self.single_qubit().is_some()
    }

    /// Target and 2×2 matrix of a single-qubit gate.
    pub fn single_qubit(&self) -> Option<(usize, Matrix2)> {
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let m = match *self {
            GateOp::Hadamard(_) => {
                let h = c(FRAC_1_SQRT_2, 0.0);
                [[h, h], [h, -h]]
            }
            GateOp::Rx(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]]
            }
            GateOp::Ry(_, t) => {
                let (s, co) = (t / 2.0).sin_cos();
                [[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]]
            }
            GateOp::Rz(_, t) => [[Complex64::from_polar(1.0, -t / 2.0), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::from_polar(1.0, t / 2.0)]],
            GateOp::U3 { theta, phi, lambda, .. } => {
                let (s, co) = (theta / 2.0).sin_cos();
                [
                    [c(co, 0.0), -Complex64::from_polar(s, lambda)],
                    [Complex64::from_polar(s, phi), Complex64::from_polar(co, phi + lambda)],
                ]
            }
            _ => return None,
        };
        Some((self.qubits()[0], m))
    }

    pub fn inverse(&self) -> GateOp {
        match self {
            GateOp::Hadamard(q) => GateOp::Hadamard(*q),
            GateOp::Rx(q, t) => GateOp::Rx(*q, -t),
            GateOp::Ry(q, t) => GateOp::Ry(*q, -t),
            GateOp::Rz(q, t) => GateOp::Rz(*q, -t),
            GateOp::U3 { qubit, theta, phi, lambda } => GateOp::U3 { qubit: *qubit, theta: -theta, phi: -lambda, lambda: -phi },
            GateOp::Cnot { control, target } => GateOp::Cnot { control: *control, target: *target },
            GateOp::Swap(a, b) => GateOp::Swap(*a, *b),
            GateOp::PhaseDiag(p) => GateOp::PhaseDiag(p.iter().map(|v| -v).collect()),
        }
    }

    pub fn validate(&self, n_q: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_q {
                return Err(Error::Dimension(format!("gate {self:?} addresses qubit {q} of {n_q}")));
            }
        }
        match self {
            GateOp::Cnot { control, target } if control == target => {
                Err(Error::Dimension(format!("cnot control equals target ({control})")))
            }
            GateOp::Swap(a, b) if a == b => Err(Error::Dimension(format!("swap on a single qubit ({a})"))),
            GateOp::PhaseDiag(p) if p.len() != 1usize << n_q => {
                Err(Error::Dimension(format!("phase vector of length {} for {n_q} qubits", p.len())))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
pub(crate) fn bit_of(n_q: usize, q: usize) -> usize {
    1usize << (n_q - 1 - q)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n_q: usize,
    amps: Vec<Complex64>,
}

impl PureState {
    /// `|0…0⟩` on `n_q` qubits.
    pub fn zero(n_q: usize) -> Result<Self> {
        Self::check_cap(n_q)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_q];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(PureState { n_q, amps })
    }

    pub fn uniform(n_q: usize) -> Result<Self> {
        Self::check_cap(n_q)?;
        let a = (1.0 / (1u64 << n_q) as f64).sqrt();
        Ok(PureState { n_q, amps: vec![Complex64::new(a, 0.0); 1 << n_q] })
    }

    pub fn basis(n_q: usize, index: usize) -> Result<Self> {
        let mut s = Self::zero(n_q)?;
        if index >= s.amps.len() {
            return Err(Error::Dimension(format!("basis index {index} out of range for {n_q} qubits")));
        }
        s.amps[0] = Complex64::new(0.0, 0.0);
        s.amps[index] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    /// Wraps amplitudes whose squared norm is 1 within 1e−10.
    pub fn from_amplitudes(n_q: usize, amps: Vec<Complex64>) -> Result<Self> {
        Self::check_cap(n_q)?;
        if amps.len() != 1 << n_q {
            return Err(Error::Dimension(format!("{} amplitudes for {n_q} qubits", amps.len())));
        }
        let s = PureState { n_q, amps };
        let norm = s.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("state norm² is {norm}, expected 1")));
        }
        Ok(s)
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(n_q: usize, mut amps: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(n_q, amps)
    }

    fn check_cap(n_q: usize) -> Result<()> {
        if n_q > PURE_STATE_CAP {
            return Err(Error::ResourceLimit(format!("{n_q} qubits exceed the pure-state cap of {PURE_STATE_CAP}")));
        }
        Ok(())
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Applies a gate in place.
    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_q)?;
        self.apply_unchecked(gate);
        Ok(())
    }

    pub(crate) fn apply_unchecked(&mut self, gate: &GateOp) {
        let n = self.n_q;
        if let Some((q, m)) = gate.single_qubit() {
            let mask = bit_of(n, q);
            for i in 0..self.amps.len() {
                if i & mask == 0 {
                    let (a0, a1) = (self.amps[i], self.amps[i | mask]);
                    self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                    self.amps[i | mask] = m[1][0] * a0 + m[1][1] * a1;
                }
            }
            return;
        }
        match gate {
            GateOp::Cnot { control, target } => {
                let (cm, tm) = (bit_of(n, *control), bit_of(n, *target));
                for i in 0..self.amps.len() {
                    if i & cm != 0 && i & tm == 0 {
                        self.amps.swap(i, i | tm);
                    }
                }
            }
            GateOp::Swap(a, b) => {
                let (am, bm) = (bit_of(n, *a), bit_of(n, *b));
                for i in 0..self.amps.len() {
                    if i & am != 0 && i & bm == 0 {
                        self.amps.swap(i, (i & !am) | bm);
                    }
                }
            }
            GateOp::PhaseDiag(p) => {
                for (a, &phi) in self.amps.iter_mut().zip(p) {
                    *a *= Complex64::from_polar(1.0, -phi);
                }
            }
            _ => unreachable!("single-qubit gates handled above"),
        }
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }
}

/// Functional form of [`PureState::apply`].
pub fn apply_gate(state: &PureState, gate: &GateOp) -> Result<PureState> {
    let mut s = state.clone();
    s.apply(gate)?;
    Ok(s)
}

/// Applies `gates` in order to `|0…0⟩`.
pub fn run_circuit(gates: &[GateOp], n_q: usize) -> Result<PureState> {
    let mut s = PureState::zero(n_q)?;
    for g in gates {
        s.apply(g)?;
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    #[default]
    LinearNearestNeighbor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_q: usize,
    pub depth_l: usize,
    #[serde(default)]
    pub topology: Topology,
}

impl AnsatzSpec {
    pub fn new(n_q: usize, depth_l: usize) -> Self {
        AnsatzSpec { n_q, depth_l, topology: Topology::LinearNearestNeighbor }
    }

    pub fn n_params(&self) -> usize {
        self.n_q * self.depth_l
    }
}

/// Hadamard wall followed by `L` layers of a CNOT ladder and one RY per qubit.
/// Layer `l` reads its angles from `theta[l·n_q .. (l+1)·n_q]`.
pub fn build_hardware_efficient(spec: &AnsatzSpec, theta: &[f64]) -> Result<Vec<GateOp>> {
    if theta.len() != spec.n_params() {
        return Err(Error::Dimension(format!(
            "ansatz needs {} parameters, got {}",
            spec.n_params(),
            theta.len()
        )));
    }
    let n = spec.n_q;
    let mut gates = Vec::with_capacity(n + spec.depth_l * (2 * n - 1));
    gates.extend((0..n).map(GateOp::Hadamard));
    for layer in theta.chunks(n.max(1)) {
        gates.extend((1..n).map(|q| GateOp::Cnot { control: q - 1, target: q }));
        gates.extend(layer.iter().enumerate().map(|(q, &t)| GateOp::Ry(q, t)));
    }
    Ok(gates)
}

/// Prepares the hardware-efficient ansatz state directly.
pub fn hardware_efficient_state(spec: &AnsatzSpec, theta: &[f64]) -> Result<PureState> {
    run_circuit(&build_hardware_efficient(spec, theta)?, spec.n_q)
}

/// Probability mass of basis states `(s << n_r) | r` with `register(r)` and, if given,
/// `ancilla(s)`, where the lowest `n_anc` qubit indices form the ancilla.
pub fn projector_expectation(
    state: &PureState,
    n_anc: usize,
    register: &dyn Fn(usize) -> bool,
    ancilla: Option<&dyn Fn(usize) -> bool>,
) -> Result<f64> {
    if n_anc > state.n_q {
        return Err(Error::Contract(format!("{n_anc} ancillas on {} qubits", state.n_q)));
    }
    let n_r = state.n_q - n_anc;
    let reg_mask = (1usize << n_r) - 1;
    let mut any = false;
    let mut total = 0.0;
    for (idx, a) in state.amps.iter().enumerate() {
        let (s, r) = (idx >> n_r, idx & reg_mask);
        if register(r) && ancilla.is_none_or(|f| f(s)) {
            any = true;
            total += a.norm_sqr();
        }
    }
    if !any {
        return Err(Error::Contract("projector predicates select no basis state".into()));
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub n_q: usize,
    /// Bitstring (qubit 0 first) to count.
    pub counts: BTreeMap<String, u64>,
    pub total: u64,
}

impl ShotRecord {
    pub fn from_index_counts(n_q: usize, counts: &[u64]) -> Self {
        let mut map = BTreeMap::new();
        for (idx, &c) in counts.iter().enumerate() {
            if c > 0 {
                map.insert(index_to_bitstring(n_q, idx), c);
            }
        }
        ShotRecord { n_q, counts: map, total: counts.iter().sum() }
    }

    /// Counts indexed by basis state.
    pub fn index_counts(&self) -> Vec<u64> {
        let mut out = vec![0u64; 1 << self.n_q];
        for (k, &c) in &self.counts {
            out[usize::from_str_radix(k, 2).expect("bitstring keys")] += c;
        }
        out
    }

    /// Relative frequencies indexed by basis state.
    pub fn frequencies(&self) -> Vec<f64> {
        let t = self.total.max(1) as f64;
        self.index_counts().into_iter().map(|c| c as f64 / t).collect()
    }
}

pub fn index_to_bitstring(n_q: usize, idx: usize) -> String {
    (0..n_q).map(|q| if idx & bit_of(n_q, q) != 0 { '1' } else { '0' }).collect()
}

/// Multinomial draw through sequential conditional binomials.
pub fn sample_multinomial(probs: &[f64], n: u64, r: &mut impl Rng) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let p = p.max(0.0);
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = if q >= 1.0 { remaining } else if q <= 0.0 { 0 } else { Binomial::new(remaining, q).expect("valid binomial").sample(r) };
        counts[k] = c;
        remaining -= c;
        mass -= p;
    }
    counts
}

/// Finite-shot computational-basis measurement.
pub fn sample_shots(state: &PureState, n_meas: u64, seed: u64) -> Result<ShotRecord> {
    if n_meas == 0 {
        return Err(Error::InvalidParameter("n_meas must be at least 1".into()));
    }
    let counts = sample_multinomial(&state.probabilities(), n_meas, &mut rng(seed));
    Ok(ShotRecord::from_index_counts(state.n_q, &counts))
}

/// `C_x` for every basis state; qubit `q` carries variable `x_q`.
pub fn ising_diagonal(instance: &QuboInstance) -> Result<Vec<f64>> {
    let n = instance.n_c();
    if n > PURE_STATE_CAP {
        return Err(Error::ResourceLimit(format!("{n} variables exceed the pure-state cap of {PURE_STATE_CAP}")));
    }
    let dim = 1usize << n;
    let mut diag = vec![0.0; dim];
    for (idx, d) in diag.iter_mut().enumerate() {
        let bits: Vec<bool> = (0..n).map(|q| idx & bit_of(n, q) != 0).collect();
        *d = crate::qubo::evaluate_unchecked(instance, &bits);
    }
    Ok(diag)
}

/// Ising form `Σ_{i<j} J_ij Z_i Z_j + Σ_i h_i Z_i + offset` of an instance, with
/// `x = (1 − z)/2`.
#[derive(Clone, Debug, PartialEq)]
pub struct IsingModel {
    pub n: usize,
    pub j: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub offset: f64,
}

impl IsingModel {
    pub fn from_qubo(instance: &QuboInstance) -> Self {
        let n = instance.n_c();
        let mut j = vec![vec![0.0; n]; n];
        let mut h = vec![0.0; n];
        let mut offset = 0.0;
        for a in 0..n {
            h[a] -= instance.get(a, a) / 2.0;
            offset += instance.get(a, a) / 2.0;
            for b in 0..n {
                if a != b {
                    j[a][b] = instance.get(a, b) / 2.0;
                    h[a] -= instance.get(a, b) / 2.0;
                    offset += instance.get(a, b) / 4.0;
                }
            }
        }
        IsingModel { n, j, h, offset }
    }

    pub fn energy(&self, z: &[f64]) -> f64 {
        let mut e = self.offset;
        for a in 0..self.n {
            e += self.h[a] * z[a];
            for b in (a + 1)..self.n {
                e += self.j[a][b] * z[a] * z[b];
            }
        }
        e
    }
}

/// `∏_p e^{−iβ_p Σ X} e^{−iγ_p H_Ising}` applied to `|+⟩^{⊗n}`.
pub fn qaoa_state(instance: &QuboInstance, gammas: &[f64], betas: &[f64]) -> Result<PureState> {
    let diag = ising_diagonal(instance)?;
    qaoa_state_with_diagonal(instance.n_c(), &diag, gammas, betas)
}

pub fn qaoa_state_with_diagonal(n: usize, diag: &[f64], gammas: &[f64], betas: &[f64]) -> Result<PureState> {
    if gammas.len() != betas.len() {
        return Err(Error::Dimension(format!("{} gammas and {} betas", gammas.len(), betas.len())));
    }
    let mut s = PureState::uniform(n)?;
    for (&g, &b) in gammas.iter().zip(betas) {
        s.apply(&GateOp::PhaseDiag(diag.iter().map(|c| g * c).collect()))?;
        for q in 0..n {
            s.apply_unchecked(&GateOp::Rx(q, 2.0 * b));
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZzNetwork {
    pub gates: Vec<GateOp>,
    pub blocks: usize,
    pub layers: usize,
    /// `layout[p]` is the logical qubit found at physical position `p` afterwards.
    pub final_layout: Vec<usize>,
}

impl ZzNetwork {
    pub fn two_qubit_gates(&self) -> usize {
        self.gates.iter().filter(|g| g.is_two_qubit()).count()
    }

    pub fn single_qubit_gates(&self) -> usize {
        self.gates.iter().filter(|g| g.is_single_qubit()).count()
    }
}

/// One block realizing `e^{−iθ Z_a Z_b}·SWAP` up to global phase with three CNOTs and
/// four single-qubit gates.
fn zz_swap_block(a: usize, b: usize, theta: f64, out: &mut Vec<GateOp>) {
    use std::f64::consts::{FRAC_PI_2, PI};
    out.push(GateOp::Cnot { control: a, target: b });
    out.push(GateOp::Hadamard(a));
    out.push(GateOp::U3 { qubit: b, theta: FRAC_PI_2, phi: 0.0, lambda: PI + 2.0 * theta });
    out.push(GateOp::Cnot { control: a, target: b });
    out.push(GateOp::Hadamard(a));
    out.push(GateOp::Hadamard(b));
    out.push(GateOp::Cnot { control: a, target: b });
}

/// Odd-even transposition network of zz-SWAP blocks realizing
/// `exp(−iγ Σ_{i<j} J_ij Z_i Z_j)` followed by a full reversal of qubit order.
/// `couplings` defaults to `J_ij = 1`.
pub fn zz_swap_network(n_q: usize, gamma: f64, couplings: Option<&[Vec<f64>]>) -> Result<ZzNetwork> {
    zz_swap_network_from(&(0..n_q).collect::<Vec<_>>(), gamma, couplings)
}

/// Same network starting from an arbitrary layout.
pub fn zz_swap_network_from(layout: &[usize], gamma: f64, couplings: Option<&[Vec<f64>]>) -> Result<ZzNetwork> {
    let n = layout.len();
    if let Some(j) = couplings {
        if j.len() != n || j.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!("coupling matrix must be {n} x {n}")));
        }
    }
    let mut layout = layout.to_vec();
    let mut gates = Vec::new();
    let mut blocks = 0;
    for layer in 0..n {
        let mut p = layer % 2;
        while p + 1 < n {
            let (u, v) = (layout[p], layout[p + 1]);
            let jv = couplings.map_or(1.0, |j| j[u][v]);
            zz_swap_block(p, p + 1, gamma * jv, &mut gates);
            layout.swap(p, p + 1);
            blocks += 1;
            p += 2;
        }
    }
    Ok(ZzNetwork { gates, blocks, layers: n, final_layout: layout })
}

/// Gate-level QAOA circuit on linear connectivity. The returned layout maps physical
/// positions to logical variables at measurement time.
pub fn qaoa_circuit_decomposed(instance: &QuboInstance, gammas: &[f64], betas: &[f64]) -> Result<(Vec<GateOp>, Vec<usize>)> {
    if gammas.len() != betas.len() {
        return Err(Error::Dimension(format!("{} gammas and {} betas", gammas.len(), betas.len())));
    }
    let ising = IsingModel::from_qubo(instance);
    let n = ising.n;
    let mut layout: Vec<usize> = (0..n).collect();
    let mut gates: Vec<GateOp> = (0..n).map(GateOp::Hadamard).collect();
    for (&g, &b) in gammas.iter().zip(betas) {
        let net = zz_swap_network_from(&layout, g, Some(&ising.j))?;
        gates.extend(net.gates);
        layout = net.final_layout;
        for (p, &v) in layout.iter().enumerate() {
            gates.push(GateOp::Rz(p, 2.0 * g * ising.h[v]));
        }
        gates.extend((0..n).map(|p| GateOp::Rx(p, 2.0 * b)));
    }
    Ok((gates, layout))
}

/// Reorders a physical-basis distribution into logical variable order.
pub fn relabel_distribution(dist: &[f64], layout: &[usize]) -> Vec<f64> {
    let n = layout.len();
    let mut out = vec![0.0; dist.len()];
    for (idx, &p) in dist.iter().enumerate() {
        let mut logical = 0usize;
        for (pos, &v) in layout.iter().enumerate() {
            if idx & bit_of(n, pos) != 0 {
                logical |= bit_of(n, v);
            }
        }
        out[logical] += p;
    }
    out
}

/// Writes the 16-byte header (8-byte magic, little-endian u64 qubit count) followed by
/// little-endian (re, im) f64 pairs in basis order.
pub fn write_state(path: &Path, state: &PureState) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(DUMP_MAGIC)?;
    f.write_all(&(state.n_q as u64).to_le_bytes())?;
    for a in &state.amps {
        f.write_all(&a.re.to_le_bytes())?;
        f.write_all(&a.im.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_state(path: &Path) -> Result<PureState> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 16 || &buf[..8] != DUMP_MAGIC {
        return Err(Error::InvalidParameter("not a state dump".into()));
    }
    let n_q = u64::from_le_bytes(buf[8..16].try_into().expect("8 bytes")) as usize;
    PureState::check_cap(n_q)?;
    if buf.len() != 16 + 16 * (1usize << n_q) {
        return Err(Error::Dimension("state dump length does not match its header".into()));
    }
    let f = |k: usize| f64::from_le_bytes(buf[k..k + 8].try_into().expect("8 bytes"));
    let amps = (0..1usize << n_q).map(|i| Complex64::new(f(16 + 16 * i), f(24 + 16 * i))).collect();
    Ok(PureState { n_q, amps })
}
