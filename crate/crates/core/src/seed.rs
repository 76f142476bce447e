//! Deterministic seed derivation.
//!
//! `derive_seed(master, role, index) = mix(mix(master) ^ (role_tag << 56 | index))`
//! where `mix` is the SplitMix64 output function (a bijection on `u64`):
//!
//! ```text
//! z = x + 0x9E3779B97F4A7C15
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! mix(x) = z ^ (z >> 31)
//! ```
//!
//! For a fixed master seed the map `(role, index) -> seed` is injective as
//! long as `index < 2^56`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Generator used for every stream. Recorded in provenance blocks.
pub type SimRng = ChaCha8Rng;

/// Name of the generator recorded in provenance.
pub const GENERATOR: &str = "ChaCha8Rng(seed_from_u64)+StandardNormal(ziggurat)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedRole {
    Chain,
    Replication,
    Direction,
    Calibration,
}

impl SeedRole {
    pub fn tag(self) -> u64 {
        match self {
            SeedRole::Chain => 1,
            SeedRole::Replication => 2,
            SeedRole::Direction => 3,
            SeedRole::Calibration => 4,
        }
    }
}

const INDEX_MASK: u64 = (1 << 56) - 1;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, role: SeedRole, index: u64) -> u64 {
    assert!(index <= INDEX_MASK, "seed index {index} exceeds 56 bits");
    splitmix64(splitmix64(master) ^ (role.tag() << 56) ^ index)
}

pub fn rng_for(master: u64, role: SeedRole, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, role, index))
}
