//! Keyed SplitMix64 streams.
//!
//! A stream is keyed by `(master_seed, scenario_id, index)` so every variation
//! draws from its own sequence regardless of how work is scheduled.

use std::f64::consts::TAU;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a 64-bit hash of the UTF-8 bytes of `text`.
pub fn fnv1a64(text: &str) -> u64 {
    text.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// One SplitMix64 step: advance `state` by the golden gamma and mix.
pub fn splitmix64_next(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Where a stream came from, kept for audit output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamOrigin {
    pub master_seed: u64,
    pub scenario_id: String,
    pub index: u64,
}

#[derive(Debug, Clone)]
pub struct RngStream {
    state: u64,
    origin: StreamOrigin,
}

/// Derives the stream for one variation.
pub fn derive_rng(master_seed: u64, scenario_id: &str, index: u64) -> RngStream {
    let key = splitmix64_next(splitmix64_next(master_seed ^ fnv1a64(scenario_id)) ^ index);
    RngStream {
        state: key,
        origin: StreamOrigin {
            master_seed,
            scenario_id: scenario_id.to_string(),
            index,
        },
    }
}

impl RngStream {
    /// A stream started directly from a raw 64-bit state.
    pub fn from_state(state: u64) -> Self {
        RngStream {
            state,
            origin: StreamOrigin {
                master_seed: state,
                scenario_id: String::new(),
                index: 0,
            },
        }
    }

    pub fn origin(&self) -> &StreamOrigin {
        &self.origin
    }

    pub fn next_u64(&mut self) -> u64 {
        let out = splitmix64_next(self.state);
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        out
    }

    /// Uniform in `[0, 1)` from the upper 53 bits.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; consumes exactly two draws.
    pub fn next_standard_normal(&mut self) -> f64 {
        let u1 = self.next_unit();
        let u2 = self.next_unit();
        let radius = (-2.0 * (1.0 - u1).ln()).sqrt();
        radius * (TAU * u2).cos()
    }

    pub fn next_normal(&mut self, mean: f64, sigma: f64) -> f64 {
        mean + sigma * self.next_standard_normal()
    }
}
