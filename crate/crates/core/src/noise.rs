//! Density-matrix simulation with thermal relaxation, depolarizing and readout noise.
//!
//! Each gate of a noisy circuit is applied as its exact unitary, then depolarized on its
//! support, then every qubit relaxes thermally for the gate duration. Durations are in
//! units of the single-qubit gate time: 1 for single-qubit gates, `t_cnot` for CNOT and
//! `3·t_cnot` for SWAP. A final measurement epoch relaxes every qubit for `t_meas`.

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;
use crate::simulator::{bit_of, sample_multinomial, GateOp, PureState, ShotRecord};

/// Largest density-matrix register.
pub const DENSITY_CAP: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    n_q: usize,
    dim: usize,
    rho: Vec<Complex64>,
}

impl MixedState {
    fn check_cap(n_q: usize) -> Result<()> {
        if n_q > DENSITY_CAP {
            return Err(Error::ResourceLimit(format!("{n_q} qubits exceed the density-matrix cap of {DENSITY_CAP}")));
        }
        Ok(())
    }

    pub fn zero(n_q: usize) -> Result<Self> {
        Self::check_cap(n_q)?;
        let dim = 1 << n_q;
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        rho[0] = Complex64::new(1.0, 0.0);
        Ok(MixedState { n_q, dim, rho })
    }

    pub fn from_pure(state: &PureState) -> Result<Self> {
        Self::check_cap(state.n_q())?;
        let a = state.amplitudes();
        let dim = a.len();
        let mut rho = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                rho.push(a[r] * a[c].conj());
            }
        }
        Ok(MixedState { n_q: state.n_q(), dim, rho })
    }

    /// Row-major matrix entries; no validation beyond shape.
    pub fn from_matrix(n_q: usize, rho: Vec<Complex64>) -> Result<Self> {
        Self::check_cap(n_q)?;
        let dim = 1 << n_q;
        if rho.len() != dim * dim {
            return Err(Error::Dimension(format!("{} entries for a {dim} x {dim} matrix", rho.len())));
        }
        Ok(MixedState { n_q, dim, rho })
    }

    pub fn maximally_mixed(n_q: usize) -> Result<Self> {
        let mut s = Self::zero(n_q)?;
        let v = 1.0 / s.dim as f64;
        s.rho.iter_mut().for_each(|x| *x = Complex64::new(0.0, 0.0));
        for i in 0..s.dim {
            s.rho[i * s.dim + i] = Complex64::new(v, 0.0);
        }
        Ok(s)
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.rho[r * self.dim + c]
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.rho
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn purity(&self) -> f64 {
        self.rho.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for c in r..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = nalgebra::DMatrix::from_fn(self.dim, self.dim, |r, c| {
            let h = (self.get(r, c) + self.get(c, r).conj()) * 0.5;
            nalgebra::Complex::new(h.re, h.im)
        });
        m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Real parts of the diagonal, clamped to be nonnegative.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i).re.max(0.0)).collect()
    }

    pub fn apply_unitary(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_q)?;
        let (n, d) = (self.n_q, self.dim);
        if let Some((q, u)) = gate.single_qubit() {
            let m = bit_of(n, q);
            for c in 0..d {
                for r in 0..d {
                    if r & m == 0 {
                        let (x0, x1) = (self.rho[r * d + c], self.rho[(r | m) * d + c]);
                        self.rho[r * d + c] = u[0][0] * x0 + u[0][1] * x1;
                        self.rho[(r | m) * d + c] = u[1][0] * x0 + u[1][1] * x1;
                    }
                }
            }
            for r in 0..d {
                let row = &mut self.rho[r * d..(r + 1) * d];
                for c in 0..d {
                    if c & m == 0 {
                        let (y0, y1) = (row[c], row[c | m]);
                        row[c] = y0 * u[0][0].conj() + y1 * u[0][1].conj();
                        row[c | m] = y0 * u[1][0].conj() + y1 * u[1][1].conj();
                    }
                }
            }
            return Ok(());
        }
        let perm: Vec<usize> = match *gate {
            GateOp::Cnot { control, target } => {
                let (cm, tm) = (bit_of(n, control), bit_of(n, target));
                (0..d).map(|i| if i & cm != 0 { i ^ tm } else { i }).collect()
            }
            GateOp::Swap(a, b) => {
                let (am, bm) = (bit_of(n, a), bit_of(n, b));
                (0..d)
                    .map(|i| if (i & am != 0) != (i & bm != 0) { i ^ am ^ bm } else { i })
                    .collect()
            }
            GateOp::PhaseDiag(ref p) => {
                for r in 0..d {
                    for c in 0..d {
                        self.rho[r * d + c] *= Complex64::from_polar(1.0, p[c] - p[r]);
                    }
                }
                return Ok(());
            }
            _ => unreachable!("single-qubit gates handled above"),
        };
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                out[perm[r] * d + perm[c]] = self.rho[r * d + c];
            }
        }
        self.rho = out;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalScheme {
    /// Amplitude damping with decay probability `1 − e^{−t/T1}` and coherences scaled by
    /// `e^{−t/T2}`.
    #[default]
    Standard,
    /// Populations of `|1⟩` scaled by `e^{−t/T1}`, coherences by `e^{−t/T2}`, then the
    /// whole matrix renormalized to unit trace.
    ScaleRenormalize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepolarizingScope {
    #[default]
    Support,
    Global,
}

mod null_is_infinite {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|x| if x.is_finite() { Some(*x) } else { None }).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

fn default_true() -> bool {
    true
}

/// Per-qubit relaxation times (JSON `null` means infinite) and gate error parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(with = "null_is_infinite")]
    pub t1: Vec<f64>,
    #[serde(with = "null_is_infinite")]
    pub t2: Vec<f64>,
    pub f1: f64,
    pub f2: f64,
    pub t_cnot: f64,
    pub t_meas: f64,
    pub readout_error: f64,
    pub seed: u64,
    #[serde(default)]
    pub thermal_scheme: ThermalScheme,
    #[serde(default)]
    pub depolarizing_scope: DepolarizingScope,
    /// Relax qubits outside the acting gate's support as well.
    #[serde(default = "default_true")]
    pub idle_thermal: bool,
}

impl NoiseModel {
    pub fn noiseless(n_q: usize) -> Self {
        NoiseModel {
            t1: vec![f64::INFINITY; n_q],
            t2: vec![f64::INFINITY; n_q],
            f1: 1.0,
            f2: 1.0,
            t_cnot: 6.0,
            t_meas: 30.0,
            readout_error: 0.0,
            seed: 0,
            thermal_scheme: ThermalScheme::Standard,
            depolarizing_scope: DepolarizingScope::Support,
            idle_thermal: true,
        }
    }

    pub fn n_q(&self) -> usize {
        self.t1.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.t1.len() != self.t2.len() {
            return Err(Error::Dimension("t1 and t2 must have one entry per qubit".into()));
        }
        for (q, (&a, &b)) in self.t1.iter().zip(&self.t2).enumerate() {
            if !(a > 0.0) || !(b > 0.0) {
                return Err(Error::InvalidParameter(format!("relaxation times of qubit {q} must be positive")));
            }
            if b > 2.0 * a {
                return Err(Error::InvalidParameter(format!("qubit {q} violates t2 <= 2 t1 ({b} > 2 * {a})")));
            }
        }
        for (name, p) in [("f1", self.f1), ("f2", self.f2), ("readout_error", self.readout_error)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} = {p} is not a probability")));
            }
        }
        if !(self.t_cnot >= 0.0) || !(self.t_meas >= 0.0) {
            return Err(Error::InvalidParameter("gate durations must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Draws per-qubit `T1`, `T2` from `Normal(mean_t, mean_t/20)`, redrawing nonpositive
/// values and clamping `T2 ≤ 2·T1`.
pub fn sample_noise_model(mean_t: f64, f1: f64, f2: f64, readout: f64, n_q: usize, seed: u64) -> Result<NoiseModel> {
    if !(mean_t > 0.0) {
        return Err(Error::InvalidParameter(format!("mean relaxation time must be positive, got {mean_t}")));
    }
    let normal = Normal::new(mean_t, mean_t / 20.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut r = rng(seed);
    let mut draw = || loop {
        let v: f64 = normal.sample(&mut r);
        if v > 0.0 {
            break v;
        }
    };
    let mut t1 = Vec::with_capacity(n_q);
    let mut t2 = Vec::with_capacity(n_q);
    for _ in 0..n_q {
        let a = draw();
        let b = draw();
        t1.push(a);
        t2.push(b.min(2.0 * a));
    }
    let model = NoiseModel {
        t1,
        t2,
        f1,
        f2,
        t_cnot: 6.0,
        t_meas: 30.0,
        readout_error: readout,
        seed,
        ..NoiseModel::noiseless(n_q)
    };
    model.validate()?;
    Ok(model)
}

/// Thermal relaxation of one qubit for `duration` under the model's scheme.
pub fn apply_thermal(state: &mut MixedState, qubit: usize, duration: f64, model: &NoiseModel) -> Result<()> {
    if qubit >= state.n_q || qubit >= model.n_q() {
        return Err(Error::Dimension(format!("qubit {qubit} out of range")));
    }
    if !(duration >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative duration {duration}")));
    }
    thermal(state, qubit, duration, model.t1[qubit], model.t2[qubit], model.thermal_scheme);
    Ok(())
}

fn thermal(state: &mut MixedState, qubit: usize, duration: f64, t1: f64, t2: f64, scheme: ThermalScheme) {
    if duration == 0.0 || (t1.is_infinite() && t2.is_infinite()) {
        return;
    }
    let decay = (-duration / t1).exp();
    let coherence = (-duration / t2).exp();
    let (d, m) = (state.dim, bit_of(state.n_q, qubit));
    let rho = &mut state.rho;
    match scheme {
        ThermalScheme::Standard => {
            let gamma = 1.0 - decay;
            for r in 0..d {
                if r & m != 0 {
                    continue;
                }
                for c in 0..d {
                    if c & m != 0 {
                        continue;
                    }
                    let (r1, c1) = (r | m, c | m);
                    let excited = rho[r1 * d + c1];
                    rho[r * d + c] += excited * gamma;
                    rho[r1 * d + c1] = excited * decay;
                    rho[r * d + c1] *= coherence;
                    rho[r1 * d + c] *= coherence;
                }
            }
        }
        ThermalScheme::ScaleRenormalize => {
            let mut scaled = rho.clone();
            for r in 0..d {
                for c in 0..d {
                    let f = match (r & m != 0, c & m != 0) {
                        (false, false) => 1.0,
                        (true, true) => decay,
                        _ => coherence,
                    };
                    scaled[r * d + c] *= f;
                }
            }
            let tr: f64 = (0..d).map(|i| scaled[i * d + i].re).sum();
            if tr > 0.0 {
                scaled.iter_mut().for_each(|x| *x /= tr);
                *rho = scaled;
            }
        }
    }
}

/// `ρ → (1−λ)ρ + λ·Tr_S(ρ) ⊗ I_S/2^{|S|}` for the qubit set `S`.
pub fn apply_depolarizing(state: &mut MixedState, support: &[usize], lambda: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidParameter(format!("depolarizing strength {lambda} outside [0, 1]")));
    }
    let mut smask = 0usize;
    for &q in support {
        if q >= state.n_q {
            return Err(Error::Dimension(format!("qubit {q} out of range")));
        }
        smask |= bit_of(state.n_q, q);
    }
    if lambda == 0.0 || smask == 0 {
        return Ok(());
    }
    let d = state.dim;
    let k = smask.count_ones();
    let subsets: Vec<usize> = (0..d).filter(|s| s & !smask == 0).collect();
    // reduced[r][c] for r, c with support bits cleared holds Σ_s ρ[r|s][c|s].
    let mut reduced = vec![Complex64::new(0.0, 0.0); d * d];
    for r in (0..d).filter(|r| r & smask == 0) {
        for c in (0..d).filter(|c| c & smask == 0) {
            reduced[r * d + c] = subsets.iter().map(|&s| state.rho[(r | s) * d + (c | s)]).sum();
        }
    }
    let w = lambda / (1u64 << k) as f64;
    for r in 0..d {
        for c in 0..d {
            let mixed = if r & smask == c & smask { reduced[(r & !smask) * d + (c & !smask)] * w } else { Complex64::new(0.0, 0.0) };
            state.rho[r * d + c] = state.rho[r * d + c] * (1.0 - lambda) + mixed;
        }
    }
    Ok(())
}

fn gate_noise(gate: &GateOp, model: &NoiseModel) -> Result<(f64, f64)> {
    Ok(match gate {
        GateOp::Cnot { .. } => (model.t_cnot, 1.0 - model.f2),
        GateOp::Swap(..) => (3.0 * model.t_cnot, 1.0 - model.f2.powi(3)),
        GateOp::PhaseDiag(_) => {
            return Err(Error::Contract(
                "diagonal phase gates have no hardware duration; use the gate-level decomposition".into(),
            ))
        }
        _ => (1.0, 1.0 - model.f1),
    })
}

/// Noisy evolution of `|0…0⟩` through `gates`, including the measurement epoch.
pub fn run_noisy_circuit(gates: &[GateOp], n_q: usize, model: &NoiseModel) -> Result<MixedState> {
    model.validate()?;
    if model.n_q() != n_q {
        return Err(Error::Dimension(format!("noise model covers {} qubits, circuit has {n_q}", model.n_q())));
    }
    let mut s = MixedState::zero(n_q)?;
    let all: Vec<usize> = (0..n_q).collect();
    for g in gates {
        let (duration, lambda) = gate_noise(g, model)?;
        s.apply_unitary(g)?;
        let support = g.qubits();
        let depol = match model.depolarizing_scope {
            DepolarizingScope::Support => &support,
            DepolarizingScope::Global => &all,
        };
        apply_depolarizing(&mut s, depol, lambda.clamp(0.0, 1.0))?;
        let relaxing = if model.idle_thermal { &all } else { &support };
        for &q in relaxing {
            thermal(&mut s, q, duration, model.t1[q], model.t2[q], model.thermal_scheme);
        }
    }
    for q in 0..n_q {
        thermal(&mut s, q, model.t_meas, model.t1[q], model.t2[q], model.thermal_scheme);
    }
    Ok(s)
}

/// Outcome distribution after independent per-bit readout flips with probability `p`.
pub fn readout_distribution(dist: &[f64], n_q: usize, p: f64) -> Vec<f64> {
    let mut out = dist.to_vec();
    if p == 0.0 {
        return out;
    }
    for q in 0..n_q {
        let m = bit_of(n_q, q);
        for i in 0..out.len() {
            if i & m == 0 {
                let (a, b) = (out[i], out[i | m]);
                out[i] = (1.0 - p) * a + p * b;
                out[i | m] = p * a + (1.0 - p) * b;
            }
        }
    }
    out
}

/// Measures `n_meas` shots of the diagonal of `ρ` with per-bit readout flips. Flipping
/// each bit of each shot independently is drawn exactly as one multinomial over the
/// flipped outcome distribution.
pub fn sample_with_readout(state: &MixedState, n_meas: u64, readout_error: f64, seed: u64) -> Result<ShotRecord> {
    if n_meas == 0 {
        return Err(Error::InvalidParameter("n_meas must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&readout_error) {
        return Err(Error::InvalidParameter(format!("readout error {readout_error} is not a probability")));
    }
    let dist = readout_distribution(&state.diagonal(), state.n_q, readout_error);
    let counts = sample_multinomial(&dist, n_meas, &mut rng(seed));
    Ok(ShotRecord::from_index_counts(state.n_q, &counts))
}
