//! Configured end-to-end pipelines and their on-disk artifacts.
//!
//! A run is described by an [`ExperimentConfig`] (JSON, unknown keys rejected). The
//! SHA-256 of its canonical JSON names every output file, and `MANIFEST.json` in the
//! output directory lists the artifacts, per-stage timings and the run status. Result
//! files carry no timings, so reruns of an exact-evaluation config are bit-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encodings::{
    cost_c1, cost_c2, minimal_probabilities, pair_marginals, MinimalEncodingMap, PairEncodingMap, PairMarginals,
};
use crate::error::{Error, Result};
use crate::graphs::{ratios_complete, ratios_exact, ratios_regular_approx, MatchingRatios, PairGraph, EXACT_RATIO_CAP};
use crate::noise::{readout_distribution, run_noisy_circuit, sample_noise_model, NoiseModel, DENSITY_CAP};
use crate::optimizer::{landscape_sweep, mean_std, multi_start, qaoa_grid_search, restart_config, OptimizationTrace, OptimizerConfig, QaoaConfig};
use crate::qubo::{
    exhaustive_oracle, generate_random, generate_regular_maxcut, heuristic_oracle, normalize_cost, OracleSummary, QuboInstance,
};
use crate::rng::{derive_seed, rng, Stage};
use crate::sampling::{
    cumulative_distribution, exhaustive_baseline, random_baseline, sample_bitstrings, sample_correlated_batch, sample_independent,
    CumulativeCurve, SampleBatch,
};
use crate::simulator::{build_hardware_efficient, hardware_efficient_state, ising_diagonal, sample_multinomial, AnsatzSpec, PURE_STATE_CAP};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable holding the worker-pool size.
pub const WORKERS_ENV: &str = "QUBITENC_WORKERS";
pub const MANIFEST: &str = "MANIFEST.json";
/// Exhaustive oracle threshold for `OracleKind::Auto`.
pub const AUTO_EXHAUSTIVE_MAX: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Random {
        n_c: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    Maxcut {
        n_c: usize,
        d: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    Minimal,
    TwoBodySelective,
    TwoBodyAll,
    /// One qubit per variable with the diagonal Ising cost.
    CompleteQaoa,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioChoice {
    /// Closed form for all pairs, exact enumeration up to the cap, else the d-regular rule.
    #[default]
    Auto,
    Exact,
    Complete,
    RegularApprox,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum Evaluation {
    #[default]
    Exact,
    Shots {
        n_meas: u64,
    },
}

impl Evaluation {
    pub fn n_meas(&self) -> Option<u64> {
        match self {
            Evaluation::Exact => None,
            Evaluation::Shots { n_meas } => Some(*n_meas),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    #[default]
    Auto,
    Exhaustive,
    Heuristic,
}

fn default_oracle_budget() -> u64 {
    1_000_000
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub method: OracleKind,
    #[serde(default = "default_oracle_budget")]
    pub budget: u64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { method: OracleKind::Auto, budget: default_oracle_budget() }
    }
}

/// Named hardware noise levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisePreset {
    Noiseless,
    /// `T̄ = 640`, `F1 = 99.9%`, `F2 = 99%`, readout 1%.
    Current,
    /// `T̄ = 1280`, `F1 = 99.9%`, `F2 = 99.9%`, readout 1%.
    Improved,
    /// `T̄ = 3200`, `F1 = F2 = 99.99%`, readout 1%.
    Optimistic,
}

impl NoisePreset {
    pub fn model(self, n_q: usize, seed: u64) -> Result<NoiseModel> {
        let (t, f1, f2) = match self {
            NoisePreset::Noiseless => return Ok(NoiseModel { seed, ..NoiseModel::noiseless(n_q) }),
            NoisePreset::Current => (640.0, 0.999, 0.99),
            NoisePreset::Improved => (1280.0, 0.999, 0.999),
            NoisePreset::Optimistic => (3200.0, 0.9999, 0.9999),
        };
        sample_noise_model(t, f1, f2, 0.01, n_q, seed)
    }
}

fn default_grid() -> (usize, usize) {
    (50, 50)
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaSection {
    pub p_max: usize,
    #[serde(default = "default_grid")]
    pub grid: (usize, usize),
    #[serde(default = "default_true")]
    pub refine: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    pub theta_index: usize,
    pub grid: usize,
    #[serde(default)]
    pub n_meas: Vec<u64>,
}

fn default_depths() -> Vec<usize> {
    vec![4]
}
fn default_restarts() -> usize {
    10
}
fn default_samples() -> usize {
    10
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_random_baseline() -> usize {
    1_000_000
}
fn default_bins() -> usize {
    50
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub encoding: EncodingKind,
    #[serde(default)]
    pub ratios: RatioChoice,
    /// Ansatz depths `L`; `solve` uses the first, `sweep-depth` all of them.
    #[serde(default = "default_depths")]
    pub depths: Vec<usize>,
    #[serde(default)]
    pub evaluation: Evaluation,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_samples")]
    pub samples_per_restart: usize,
    #[serde(default)]
    pub noise_preset: Option<NoisePreset>,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub qaoa: Option<QaoaSection>,
    #[serde(default)]
    pub landscape: Option<LandscapeSection>,
    /// Master seed; every stage seed derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Uniformly random assignments drawn for the baseline curve; 0 disables it.
    #[serde(default = "default_random_baseline")]
    pub random_baseline: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }

    /// Checks that do not need the instance: counts, seeds and section consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return bad("depths must be a nonempty list of positive integers");
        }
        if self.evaluation.n_meas() == Some(0) {
            return bad("n_meas must be at least 1");
        }
        if self.bins == 0 {
            return bad("bins must be at least 1");
        }
        if self.noise.is_some() && self.noise_preset.is_some() {
            return bad("give either noise or noise_preset, not both");
        }
        if let Some(q) = &self.qaoa {
            if q.grid.0 == 0 || q.grid.1 == 0 {
                return bad("qaoa grid dimensions must be positive");
            }
        }
        if let Some(l) = &self.landscape {
            if l.grid == 0 || l.n_meas.contains(&0) {
                return bad("landscape grid and shot counts must be positive");
            }
        }
        self.optimizer.validate()
    }
}

/// Instance from a problem spec; absent generator seeds derive from the master seed.
pub fn load_problem(spec: &ProblemSpec, master: u64) -> Result<QuboInstance> {
    let seed = |s: &Option<u64>| s.unwrap_or_else(|| derive_seed(master, Stage::Problem, 0));
    match spec {
        ProblemSpec::Random { n_c, seed: s } => generate_random(*n_c, seed(s)),
        ProblemSpec::Maxcut { n_c, d, seed: s } => generate_regular_maxcut(*n_c, *d, seed(s)),
        ProblemSpec::File { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("cannot read instance {}: {e}", path.display())))?;
            QuboInstance::from_json(&text)
        }
    }
}

pub fn run_oracle(instance: &QuboInstance, cfg: &OracleConfig, seed: u64) -> Result<OracleSummary> {
    let exhaustive = match cfg.method {
        OracleKind::Auto => instance.n_c() <= AUTO_EXHAUSTIVE_MAX,
        OracleKind::Exhaustive => true,
        OracleKind::Heuristic => false,
    };
    if exhaustive {
        exhaustive_oracle(instance)
    } else {
        heuristic_oracle(instance, cfg.budget, seed)
    }
}

/// An encoding bound to an instance.
#[derive(Clone, Debug)]
pub enum Encoded {
    Minimal(MinimalEncodingMap),
    TwoBody { map: PairEncodingMap, ratios: MatchingRatios },
    Complete { n_c: usize, diagonal: Vec<f64> },
}

impl Encoded {
    pub fn build(instance: &QuboInstance, kind: EncodingKind, choice: RatioChoice) -> Result<Self> {
        let n = instance.n_c();
        Ok(match kind {
            EncodingKind::Minimal => Encoded::Minimal(MinimalEncodingMap::new(n)?),
            EncodingKind::CompleteQaoa => {
                if n > PURE_STATE_CAP {
                    return Err(Error::ResourceLimit(format!("complete encoding of {n} variables exceeds {PURE_STATE_CAP} qubits")));
                }
                Encoded::Complete { n_c: n, diagonal: ising_diagonal(instance)? }
            }
            EncodingKind::TwoBodyAll | EncodingKind::TwoBodySelective => {
                let graph = if kind == EncodingKind::TwoBodyAll {
                    PairGraph::complete(n)?
                } else {
                    PairGraph::from_instance(instance)?
                };
                let map = PairEncodingMap::new(graph)?;
                if map.n_q() > PURE_STATE_CAP {
                    return Err(Error::ResourceLimit(format!("{} qubits exceed the pure-state cap", map.n_q())));
                }
                let ratios = build_ratios(map.graph(), kind == EncodingKind::TwoBodyAll, choice)?;
                Encoded::TwoBody { map, ratios }
            }
        })
    }

    pub fn n_q(&self) -> usize {
        match self {
            Encoded::Minimal(m) => m.n_q(),
            Encoded::TwoBody { map, .. } => map.n_q(),
            Encoded::Complete { n_c, .. } => *n_c,
        }
    }

    /// Encoded cost of a basis-state distribution.
    pub fn cost(&self, instance: &QuboInstance, dist: &[f64]) -> Result<f64> {
        match self {
            Encoded::Minimal(m) => cost_c1(instance, &minimal_probabilities(dist, m)?),
            Encoded::TwoBody { map, ratios } => cost_c2(instance, &pair_marginals(dist, map, ratios)?),
            Encoded::Complete { diagonal, .. } => {
                if dist.len() != diagonal.len() {
                    return Err(Error::Dimension("distribution does not match the complete encoding".into()));
                }
                Ok(dist.iter().zip(diagonal).map(|(p, c)| p * c).sum())
            }
        }
    }

    /// Solutions drawn from a distribution with the encoding's sampling protocol.
    pub fn sample(&self, instance: &QuboInstance, oracle: &OracleSummary, dist: &[f64], count: usize, seed: u64) -> Result<SampleBatch> {
        match self {
            Encoded::Minimal(m) => sample_independent(instance, oracle, &minimal_probabilities(dist, m)?, count, seed),
            Encoded::TwoBody { map, ratios } => {
                let marginals: PairMarginals = pair_marginals(dist, map, ratios)?;
                sample_correlated_batch(instance, oracle, &marginals, map.graph(), count, seed)
            }
            Encoded::Complete { .. } => sample_bitstrings(instance, oracle, dist, count, seed),
        }
    }
}

fn build_ratios(graph: &PairGraph, all_pairs: bool, choice: RatioChoice) -> Result<MatchingRatios> {
    let n = graph.n();
    match choice {
        RatioChoice::Exact => ratios_exact(graph),
        RatioChoice::Complete => {
            if !all_pairs && graph.n_edges() != n * (n - 1) / 2 {
                return Err(Error::InvalidParameter("complete ratios need the all-pairs graph".into()));
            }
            ratios_complete(n)
        }
        RatioChoice::RegularApprox => {
            let d = graph.regular_degree().ok_or_else(|| Error::InvalidParameter("d-regular ratios need a regular graph".into()))?;
            ratios_regular_approx(graph, d)
        }
        RatioChoice::Auto => {
            if graph.n_edges() == n * (n - 1) / 2 && n >= 6 && n.is_multiple_of(2) {
                ratios_complete(n)
            } else if n <= EXACT_RATIO_CAP {
                ratios_exact(graph)
            } else if let Some(d) = graph.regular_degree() {
                ratios_regular_approx(graph, d)
            } else {
                Err(Error::InvalidParameter(format!(
                    "non-regular selective encoding on {n} variables needs exact ratios, which are capped at {EXACT_RATIO_CAP}"
                )))
            }
        }
    }
}

/// Everything a pipeline needs once the instance is known and validated.
pub struct Prepared {
    pub config: ExperimentConfig,
    pub instance: QuboInstance,
    pub oracle: OracleSummary,
    pub encoded: Encoded,
    pub noise: Option<NoiseModel>,
}

/// Loads the instance and checks encoding and simulator caps, then runs the oracle.
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    config.validate()?;
    let instance = load_problem(&config.problem, config.seed)?;
    let encoded = Encoded::build(&instance, config.encoding, config.ratios)?;
    let n_q = encoded.n_q();
    let noise = match (&config.noise, config.noise_preset) {
        (Some(m), _) => Some(m.clone()),
        (None, Some(p)) => Some(p.model(n_q, derive_seed(config.seed, Stage::NoiseModel, 0))?),
        (None, None) => None,
    };
    if let Some(m) = &noise {
        m.validate()?;
        if n_q > DENSITY_CAP {
            return Err(Error::ResourceLimit(format!("noisy simulation of {n_q} qubits exceeds the density-matrix cap of {DENSITY_CAP}")));
        }
        if m.n_q() != n_q {
            return Err(Error::Dimension(format!("noise model covers {} qubits, encoding uses {n_q}", m.n_q())));
        }
    }
    let oracle = run_oracle(&instance, &config.oracle, derive_seed(config.seed, Stage::Oracle, 0))?;
    if !(oracle.c_max > oracle.c_min) {
        return Err(Error::DegenerateInstance(oracle.c_min));
    }
    Ok(Prepared { config: config.clone(), instance, oracle, encoded, noise })
}

impl Prepared {
    /// Basis-state distribution of the ansatz at `theta`, and the purity when noisy.
    pub fn distribution(&self, spec: &AnsatzSpec, theta: &[f64]) -> Result<(Vec<f64>, Option<f64>)> {
        match &self.noise {
            None => Ok((hardware_efficient_state(spec, theta)?.probabilities(), None)),
            Some(m) => {
                let rho = run_noisy_circuit(&build_hardware_efficient(spec, theta)?, spec.n_q, m)?;
                Ok((readout_distribution(&rho.diagonal(), spec.n_q, m.readout_error), Some(rho.purity())))
            }
        }
    }

    /// Normalized cost at `theta`: exact expectation, or a shot estimate drawn with `seed`.
    pub fn normalized_cost(&self, spec: &AnsatzSpec, theta: &[f64], n_meas: Option<u64>, seed: u64) -> Result<f64> {
        let (dist, _) = self.distribution(spec, theta)?;
        let c = match n_meas {
            None => self.encoded.cost(&self.instance, &dist)?,
            Some(m) => {
                let counts = sample_multinomial(&dist, m, &mut rng(seed));
                let freq: Vec<f64> = counts.iter().map(|&k| k as f64 / m as f64).collect();
                self.encoded.cost(&self.instance, &freq)?
            }
        };
        normalize_cost(c, &self.oracle)
    }

    /// Noise-free exact normalized cost at `theta`.
    pub fn exact_noiseless_cost(&self, spec: &AnsatzSpec, theta: &[f64]) -> Result<f64> {
        let dist = hardware_efficient_state(spec, theta)?.probabilities();
        normalize_cost(self.encoded.cost(&self.instance, &dist)?, &self.oracle)
    }

    pub fn ansatz(&self, depth: usize) -> AnsatzSpec {
        AnsatzSpec::new(self.encoded.n_q(), depth)
    }

    /// Multi-start optimization at one depth followed by per-restart sampling.
    pub fn run_depth(&self, depth: usize) -> Result<DepthRun> {
        let cfg = &self.config;
        let spec = self.ansatz(depth);
        let n_meas = cfg.evaluation.n_meas();
        let opt = cfg.optimizer.with_seed(derive_seed(cfg.seed, Stage::InitialTheta, depth as u64));
        let traces = multi_start(
            |r| {
                let spec = &spec;
                let mut k = 0u64;
                move |theta: &[f64]| {
                    k += 1;
                    let seed = derive_seed(cfg.seed, Stage::Shots, ((depth as u64) << 48) | ((r as u64) << 32) | k);
                    self.normalized_cost(spec, theta, n_meas, seed)
                }
            },
            spec.n_params(),
            &opt,
            cfg.restarts,
        )?;
        let mut restarts = Vec::with_capacity(cfg.restarts);
        let mut batches = Vec::with_capacity(cfg.restarts);
        for (r, t) in traces.into_iter().enumerate() {
            let trace = t?;
            let theta = trace.final_theta.clone();
            let exact = self.exact_noiseless_cost(&spec, &theta)?;
            let (dist, purity) = self.distribution(&spec, &theta)?;
            let sample_seed = derive_seed(cfg.seed, Stage::Sampling, ((depth as u64) << 32) | r as u64);
            let batch = self.encoded.sample(&self.instance, &self.oracle, &dist, cfg.samples_per_restart, sample_seed)?;
            let (sampled_mean, _) = mean_std(&batch.normalized_costs);
            restarts.push(RestartResult {
                restart: r,
                seed: restart_config(&opt, r).seed,
                final_cost: trace.final_cost,
                exact_final_cost: exact,
                n_eval: trace.n_eval_used,
                sampled_mean,
                sampled_min: batch.min_normalized(),
                purity,
                final_theta: theta,
                trace,
            });
            batches.push(batch);
        }
        let finals: Vec<f64> = restarts.iter().map(|r| r.final_cost).collect();
        let exacts: Vec<f64> = restarts.iter().map(|r| r.exact_final_cost).collect();
        let sampled: Vec<f64> = restarts.iter().map(|r| r.sampled_mean).collect();
        let (mean_final, std_final) = mean_std(&finals);
        let (mean_exact, std_exact) = mean_std(&exacts);
        let best_restart = (0..exacts.len()).min_by(|&a, &b| exacts[a].total_cmp(&exacts[b])).expect("restarts >= 1");
        let aggregate = Aggregate {
            mean_final,
            std_final,
            mean_exact,
            std_exact,
            best_exact: exacts[best_restart],
            best_restart,
            mean_sampled: mean_std(&sampled).0,
        };
        Ok(DepthRun { depth, n_q: spec.n_q, n_params: spec.n_params(), restarts, aggregate, batches })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartResult {
    pub restart: usize,
    pub seed: u64,
    /// Best cost seen by the optimizer under the configured evaluation.
    pub final_cost: f64,
    /// Noise-free exact cost at the final parameters.
    pub exact_final_cost: f64,
    pub n_eval: usize,
    pub sampled_mean: f64,
    pub sampled_min: f64,
    pub purity: Option<f64>,
    pub final_theta: Vec<f64>,
    #[serde(skip)]
    pub trace: OptimizationTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_final: f64,
    pub std_final: f64,
    pub mean_exact: f64,
    pub std_exact: f64,
    pub best_exact: f64,
    pub best_restart: usize,
    pub mean_sampled: f64,
}

#[derive(Clone, Debug)]
pub struct DepthRun {
    pub depth: usize,
    pub n_q: usize,
    pub n_params: usize,
    pub restarts: Vec<RestartResult>,
    pub aggregate: Aggregate,
    pub batches: Vec<SampleBatch>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub config_hash: String,
    pub version: &'static str,
    pub master_seed: u64,
    pub config: ExperimentConfig,
    pub oracle: OracleSummary,
    pub depth: usize,
    pub n_q: usize,
    pub n_params: usize,
    pub noise: Option<NoiseModel>,
    pub restarts: Vec<RestartResult>,
    pub aggregate: Aggregate,
    pub curves: BTreeMap<String, CumulativeCurve>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub description: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub version: String,
    pub master_seed: u64,
    pub status: String,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub artifacts: Vec<ArtifactEntry>,
    pub timings_ms: BTreeMap<String, f64>,
}

/// Serial writer for one run's artifacts and manifest.
pub struct Artifacts {
    dir: PathBuf,
    prefix: String,
    manifest: Manifest,
    stage: String,
    clock: Instant,
}

impl Artifacts {
    pub fn new(command: &str, config: &ExperimentConfig) -> Result<Self> {
        std::fs::create_dir_all(&config.output_dir)?;
        let hash = config.hash();
        Ok(Artifacts {
            dir: config.output_dir.clone(),
            prefix: format!("{command}-{}", &hash[..12]),
            manifest: Manifest {
                command: command.into(),
                config_hash: hash,
                version: VERSION.into(),
                master_seed: config.seed,
                status: "running".into(),
                failed_stage: None,
                error: None,
                artifacts: Vec::new(),
                timings_ms: BTreeMap::new(),
            },
            stage: "setup".into(),
            clock: Instant::now(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Closes the timing of the current stage and opens `name`.
    pub fn stage(&mut self, name: &str) {
        let ms = self.clock.elapsed().as_secs_f64() * 1e3;
        *self.manifest.timings_ms.entry(self.stage.clone()).or_default() += ms;
        self.stage = name.into();
        self.clock = Instant::now();
    }

    /// Writes `<command>-<hash>-<suffix>` and records it.
    pub fn write(&mut self, suffix: &str, contents: &str, description: &str) -> Result<PathBuf> {
        let file = format!("{}-{suffix}", self.prefix);
        let path = self.dir.join(&file);
        std::fs::write(&path, contents)?;
        self.manifest.artifacts.push(ArtifactEntry { file, description: description.into() });
        Ok(path)
    }

    pub fn finish<T>(mut self, outcome: Result<T>) -> Result<T> {
        let failed = self.stage.clone();
        self.stage("done");
        match &outcome {
            Ok(_) => self.manifest.status = "ok".into(),
            Err(e) => {
                self.manifest.status = "failed".into();
                self.manifest.failed_stage = Some(failed);
                self.manifest.error = Some(e.to_string());
            }
        }
        std::fs::write(self.dir.join(MANIFEST), serde_json::to_string_pretty(&self.manifest)?)?;
        outcome
    }
}

fn restarts_csv(run: &DepthRun) -> String {
    let mut s = String::from("restart,seed,final_cost,exact_final_cost,n_eval,sampled_mean,sampled_min,purity\n");
    for r in &run.restarts {
        let purity = r.purity.map(|p| p.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{purity}",
            r.restart, r.seed, r.final_cost, r.exact_final_cost, r.n_eval, r.sampled_mean, r.sampled_min
        );
    }
    s
}

fn traces_csv(run: &DepthRun) -> String {
    let mut s = String::from("restart,eval_index,cost,best_so_far\n");
    for r in &run.restarts {
        for (k, (e, b)) in r.trace.evaluations.iter().zip(&r.trace.best_so_far).enumerate() {
            let _ = writeln!(s, "{},{k},{},{b}", r.restart, e.cost);
        }
    }
    s
}

fn samples_csv(run: &DepthRun) -> String {
    let mut s = String::from("restart,solution_bits,cost,normalized_cost\n");
    for (r, b) in run.batches.iter().enumerate() {
        for (sol, c) in b.solutions.iter().zip(&b.normalized_costs) {
            let _ = writeln!(s, "{r},{},{},{c}", sol.bitstring(), sol.cost);
        }
    }
    s
}

fn curves_csv(curves: &BTreeMap<String, CumulativeCurve>) -> String {
    let names: Vec<&String> = curves.keys().collect();
    let mut s = String::from("threshold");
    for n in &names {
        let _ = write!(s, ",{n}");
    }
    s.push('\n');
    let thresholds = &curves.values().next().expect("at least one curve").thresholds;
    for (k, t) in thresholds.iter().enumerate() {
        let _ = write!(s, "{t}");
        for n in &names {
            let _ = write!(s, ",{}", curves[*n].fractions[k]);
        }
        s.push('\n');
    }
    s
}

/// Cumulative curves of the best restart, all restarts, and the baselines.
pub fn solution_curves(prep: &Prepared, run: &DepthRun) -> Result<BTreeMap<String, CumulativeCurve>> {
    let cfg = &prep.config;
    let mut curves = BTreeMap::new();
    let best = &run.batches[run.aggregate.best_restart];
    if !best.is_empty() {
        curves.insert("best_restart".into(), cumulative_distribution(best, cfg.bins)?);
        let mut all = best.clone();
        all.solutions.clear();
        all.normalized_costs.clear();
        for b in &run.batches {
            all.extend(b.clone());
        }
        curves.insert("all_restarts".into(), cumulative_distribution(&all, cfg.bins)?);
    }
    if cfg.random_baseline > 0 {
        let b = random_baseline(&prep.instance, &prep.oracle, cfg.random_baseline, derive_seed(cfg.seed, Stage::Baseline, 0))?;
        curves.insert("random".into(), cumulative_distribution(&b, cfg.bins)?);
    }
    if prep.instance.n_c() <= AUTO_EXHAUSTIVE_MAX {
        curves.insert("exhaustive".into(), cumulative_distribution(&exhaustive_baseline(&prep.instance, &prep.oracle)?, cfg.bins)?);
    }
    Ok(curves)
}

/// Oracle, multi-start optimization at the first depth, sampling and curves.
pub fn cmd_solve(config: &ExperimentConfig) -> Result<SolveResult> {
    let mut art = Artifacts::new("solve", config)?;
    let outcome = solve_inner(config, &mut art);
    art.finish(outcome)
}

fn solve_inner(config: &ExperimentConfig, art: &mut Artifacts) -> Result<SolveResult> {
    art.write("config.json", &serde_json::to_string_pretty(config)?, "configuration echo")?;
    art.stage("prepare");
    let prep = prepare(config)?;
    art.stage("optimize");
    let run = prep.run_depth(config.depths[0])?;
    art.write("restarts.csv", &restarts_csv(&run), "per-restart costs, evaluation counts, sampled quality")?;
    art.write("traces.csv", &traces_csv(&run), "per-evaluation optimizer traces")?;
    art.write("samples.csv", &samples_csv(&run), "sampled solutions per restart")?;
    art.stage("statistics");
    let curves = solution_curves(&prep, &run)?;
    if !curves.is_empty() {
        art.write("cumulative.csv", &curves_csv(&curves), "fraction of solutions above each normalized-cost threshold")?;
    }
    let result = SolveResult {
        config_hash: config.hash(),
        version: VERSION,
        master_seed: config.seed,
        config: config.clone(),
        oracle: prep.oracle.clone(),
        depth: run.depth,
        n_q: run.n_q,
        n_params: run.n_params,
        noise: prep.noise.clone(),
        restarts: run.restarts.clone(),
        aggregate: run.aggregate.clone(),
        curves,
    };
    art.write("result.json", &serde_json::to_string_pretty(&result)?, "full result")?;
    Ok(result)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: usize,
    pub n_params: usize,
    pub aggregate: Aggregate,
}

/// One optimization batch per depth; rows `(L, mean, std, ...)`.
pub fn cmd_sweep_depth(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    let mut art = Artifacts::new("sweep", config)?;
    let outcome = (|| {
        art.stage("prepare");
        let prep = prepare(config)?;
        art.stage("optimize");
        let mut rows = Vec::new();
        for &depth in &config.depths {
            let run = prep.run_depth(depth)?;
            rows.push(SweepRow { depth, n_params: run.n_params, aggregate: run.aggregate });
        }
        let mut csv = String::from("depth,n_params,mean_final,std_final,mean_exact,std_exact,best_exact,mean_sampled\n");
        for r in &rows {
            let a = &r.aggregate;
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                r.depth, r.n_params, a.mean_final, a.std_final, a.mean_exact, a.std_exact, a.best_exact, a.mean_sampled
            );
        }
        art.write("depth.csv", &csv, "normalized cost statistics per ansatz depth")?;
        art.write("depth.json", &serde_json::to_string_pretty(&rows)?, "per-depth aggregates")?;
        Ok(rows)
    })();
    art.finish(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeResult {
    pub theta_index: usize,
    pub theta_opt: Vec<f64>,
    pub exact: Vec<(f64, f64)>,
    pub shots: BTreeMap<u64, Vec<(f64, f64)>>,
}

/// Optimizes restart 0 at the first depth, then sweeps one parameter over `[0, 2π)`
/// exactly and with each configured shot count.
pub fn cmd_landscape(config: &ExperimentConfig) -> Result<LandscapeResult> {
    let mut art = Artifacts::new("landscape", config)?;
    let outcome = (|| {
        let section = config
            .landscape
            .clone()
            .ok_or_else(|| Error::InvalidParameter("landscape section is required".into()))?;
        art.stage("prepare");
        let mut single = config.clone();
        single.restarts = 1;
        single.samples_per_restart = 0;
        let prep = prepare(&single)?;
        let depth = config.depths[0];
        let spec = prep.ansatz(depth);
        if section.theta_index >= spec.n_params() {
            return Err(Error::InvalidParameter(format!("theta_index {} out of range for {} parameters", section.theta_index, spec.n_params())));
        }
        art.stage("optimize");
        let run = prep.run_depth(depth)?;
        let theta_opt = run.restarts[0].final_theta.clone();
        art.stage("sweep");
        let exact = landscape_sweep(|t: &[f64]| prep.normalized_cost(&spec, t, None, 0), &theta_opt, section.theta_index, section.grid)?;
        let mut csv = String::from("theta,cost\n");
        for (t, c) in &exact {
            let _ = writeln!(csv, "{t},{c}");
        }
        art.write("exact.csv", &csv, "cost along the swept parameter, exact expectation")?;
        let mut shots = BTreeMap::new();
        for &m in &section.n_meas {
            let mut k = 0u64;
            let curve = landscape_sweep(
                |t: &[f64]| {
                    k += 1;
                    prep.normalized_cost(&spec, t, Some(m), derive_seed(config.seed, Stage::Landscape, (m << 24) | k))
                },
                &theta_opt,
                section.theta_index,
                section.grid,
            )?;
            let mut csv = String::from("theta,cost\n");
            for (t, c) in &curve {
                let _ = writeln!(csv, "{t},{c}");
            }
            art.write(&format!("nmeas{m}.csv"), &csv, &format!("cost along the swept parameter, {m} shots"))?;
            shots.insert(m, curve);
        }
        let result = LandscapeResult { theta_index: section.theta_index, theta_opt, exact, shots };
        art.write("result.json", &serde_json::to_string_pretty(&result)?, "full result")?;
        Ok(result)
    })();
    art.finish(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaoaRow {
    pub p: usize,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub grid_cost: f64,
    pub best_cost: f64,
    pub n_eval: usize,
}

/// Layer-wise QAOA on the complete encoding; costs normalized by the oracle.
pub fn cmd_qaoa(config: &ExperimentConfig) -> Result<Vec<QaoaRow>> {
    let mut art = Artifacts::new("qaoa", config)?;
    let outcome = (|| {
        config.validate()?;
        let section = config.qaoa.clone().ok_or_else(|| Error::InvalidParameter("qaoa section is required".into()))?;
        art.stage("prepare");
        let mut complete = config.clone();
        complete.encoding = EncodingKind::CompleteQaoa;
        let prep = prepare(&complete)?;
        art.stage("optimize");
        let qc = QaoaConfig {
            p_max: section.p_max,
            grid: section.grid,
            n_meas: config.evaluation.n_meas(),
            noise: prep.noise.clone(),
            seed: derive_seed(config.seed, Stage::Qaoa, 0),
            refine: section.refine,
        };
        let res = qaoa_grid_search(&prep.instance, &qc)?;
        let norm = |c: f64| normalize_cost(c, &prep.oracle);
        let u = norm(res.uniform_cost)?;
        let mut rows = vec![QaoaRow { p: 0, gamma: None, beta: None, grid_cost: u, best_cost: u, n_eval: 1 }];
        for l in &res.layers {
            rows.push(QaoaRow {
                p: l.p,
                gamma: Some(l.gamma),
                beta: Some(l.beta),
                grid_cost: norm(l.grid_cost)?,
                best_cost: norm(l.best_cost)?,
                n_eval: l.n_eval,
            });
        }
        let mut csv = String::from("p,gamma,beta,grid_cost,best_cost,n_eval\n");
        for r in &rows {
            let f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(csv, "{},{},{},{},{},{}", r.p, f(r.gamma), f(r.beta), r.grid_cost, r.best_cost, r.n_eval);
        }
        art.write("layers.csv", &csv, "normalized best cost per QAOA depth")?;
        art.write("result.json", &serde_json::to_string_pretty(&rows)?, "full result")?;
        Ok(rows)
    })();
    art.finish(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, encoding: EncodingKind) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{"problem": {{"kind": "random", "n_c": 6, "seed": 3}}, "encoding": "{}", "depths": [2],
                "restarts": 2, "optimizer": {{"max_evals": 200}}, "random_baseline": 1000,
                "output_dir": {:?}}}"#,
            serde_json::to_value(encoding).unwrap().as_str().unwrap(),
            dir
        ))
        .unwrap()
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{"problem": {"kind": "random", "n_c": 6}, "encoding": "minimal", "restart": 3}"#;
        let e = ExperimentConfig::from_json(bad).unwrap_err();
        assert!(e.is_config_error());
        let bad = r#"{"problem": {"kind": "random", "n_c": 6, "d": 2}, "encoding": "minimal"}"#;
        assert!(ExperimentConfig::from_json(bad).is_err());
    }

    #[test]
    fn caps_checked_before_compute() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), EncodingKind::CompleteQaoa);
        c.problem = ProblemSpec::Random { n_c: 22, seed: Some(1) };
        assert!(matches!(prepare(&c), Err(Error::ResourceLimit(_))));
        let mut c = config(dir.path(), EncodingKind::Minimal);
        c.problem = ProblemSpec::Random { n_c: 300, seed: Some(1) };
        c.noise_preset = Some(NoisePreset::Current);
        assert!(matches!(prepare(&c), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn solve_is_reproducible_and_manifested() {
        let dir = tempfile::tempdir().unwrap();
        let c = config(dir.path(), EncodingKind::Minimal);
        let a = cmd_solve(&c).unwrap();
        let first = std::fs::read_to_string(dir.path().join(format!("solve-{}-result.json", c.short_hash()))).unwrap();
        let b = cmd_solve(&c).unwrap();
        let second = std::fs::read_to_string(dir.path().join(format!("solve-{}-result.json", c.short_hash()))).unwrap();
        assert_eq!(first, second);
        assert_eq!(a.aggregate, b.aggregate);
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(m.status, "ok");
        for a in &m.artifacts {
            assert!(a.file.contains(&c.short_hash()));
            assert!(dir.path().join(&a.file).exists());
        }
    }

    #[test]
    fn two_body_and_complete_pipelines() {
        let dir = tempfile::tempdir().unwrap();
        for enc in [EncodingKind::TwoBodyAll, EncodingKind::TwoBodySelective, EncodingKind::CompleteQaoa] {
            let r = cmd_solve(&config(dir.path(), enc)).unwrap();
            assert_eq!(r.restarts.len(), 2);
            assert!(r.restarts.iter().all(|x| (0.0..=1.0 + 1e-9).contains(&x.exact_final_cost)));
        }
    }

    #[test]
    fn failure_recorded_in_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), EncodingKind::Minimal);
        c.problem = ProblemSpec::Maxcut { n_c: 7, d: 3, seed: None };
        assert!(cmd_solve(&c).is_err());
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!((m.status.as_str(), m.failed_stage.as_deref()), ("failed", Some("prepare")));
    }

    #[test]
    fn noisy_solve_records_purity() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), EncodingKind::Minimal);
        c.noise_preset = Some(NoisePreset::Current);
        c.optimizer.max_evals = 40;
        let r = cmd_solve(&c).unwrap();
        assert!(r.restarts.iter().all(|x| x.purity.is_some_and(|p| p < 1.0)));
    }

    #[test]
    fn sweep_landscape_qaoa() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = config(dir.path(), EncodingKind::Minimal);
        c.depths = vec![1, 2];
        assert_eq!(cmd_sweep_depth(&c).unwrap().len(), 2);
        c.landscape = Some(LandscapeSection { theta_index: 1, grid: 16, n_meas: vec![500] });
        let l = cmd_landscape(&c).unwrap();
        assert_eq!((l.exact.len(), l.shots[&500].len()), (16, 16));
        c.qaoa = Some(QaoaSection { p_max: 2, grid: (8, 8), refine: true });
        let rows = cmd_qaoa(&c).unwrap();
        assert_eq!(rows.len(), 3);
        for w in rows.windows(2) {
            assert!(w[1].best_cost <= w[0].best_cost + 1e-12);
        }
    }
}
