//! Seeded random number generation and the master-seed fan-out scheme.
//!
//! Every stochastic stage draws from its own `ChaCha8Rng`. Stage seeds are derived from
//! the master seed as `splitmix64(master ^ splitmix64(tag) ^ index * GOLDEN)`, where the
//! tag identifies the stage and `index` the restart, sample or grid point.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pipeline stages that consume randomness.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Problem,
    Oracle,
    InitialTheta,
    Shots,
    Sampling,
    Baseline,
    NoiseModel,
    Landscape,
    Qaoa,
}

impl Stage {
    fn tag(self) -> u64 {
        match self {
            Stage::Problem => 1,
            Stage::Oracle => 2,
            Stage::InitialTheta => 3,
            Stage::Shots => 4,
            Stage::Sampling => 5,
            Stage::Baseline => 6,
            Stage::NoiseModel => 7,
            Stage::Landscape => 8,
            Stage::Qaoa => 9,
        }
    }
}

pub fn derive_seed(master: u64, stage: Stage, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(stage.tag()) ^ index.wrapping_mul(GOLDEN))
}
