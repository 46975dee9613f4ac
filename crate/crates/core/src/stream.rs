//! Counter-based random streams for replicate-level reproducibility.
//!
//! Replicate `k` of a scenario always reads from ChaCha8 stream `k` under a
//! key derived from `(seed, scenario, purpose)`, so its draws do not depend
//! on which worker evaluates it or in which order replicates run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a stream is used for. Data and posterior draws never share a stream,
/// so switching a sampling-based predictor on or off leaves the data intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Data = 1,
    Posterior = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub scenario: u64,
}

impl StreamKey {
    pub fn new(seed: u64, scenario: u64) -> Self {
        Self { seed, scenario }
    }

    pub fn rng(&self, purpose: Purpose, replicate: u64) -> SimRng {
        let mut state =
            self.seed ^ self.scenario.rotate_left(29) ^ (purpose as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(replicate);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit FNV-1a hash, used to turn scenario names into stream ids.
pub fn scenario_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}
