//! Deterministic substream derivation for Monte Carlo work.
//!
//! Every stochastic operation in the crate draws from a [`ChaCha8Rng`] whose
//! seed is derived from the root scenario seed plus a list of stream labels
//! (sweep point, redraw, trial, purpose). Two runs with the same root seed and
//! labels produce bit-identical draws, independently of worker count or
//! execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different uses disjoint even when the other
/// labels coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    Channels,
    Targets,
    CommSymbols,
    Noise,
    Calibration,
    Detection,
    Ber,
    Init,
    Oracle,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Channels => 1,
            StreamPurpose::Targets => 2,
            StreamPurpose::CommSymbols => 3,
            StreamPurpose::Noise => 4,
            StreamPurpose::Calibration => 5,
            StreamPurpose::Detection => 6,
            StreamPurpose::Ber => 7,
            StreamPurpose::Init => 8,
            StreamPurpose::Oracle => 9,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent RNG from the root seed and a label path.
///
/// The labels are mixed into a 256-bit ChaCha seed with splitmix64; the
/// mapping is injective enough in practice that distinct label paths never
/// collide within a run.
pub fn substream(root_seed: u64, purpose: StreamPurpose, labels: &[u64]) -> ChaCha8Rng {
    let mut state = root_seed ^ 0x4b4c_4449_5341_4343; // domain separator
    let _ = splitmix64(&mut state);
    state ^= purpose.tag().wrapping_mul(0xd6e8_feb8_6659_fd93);
    let _ = splitmix64(&mut state);
    for &l in labels {
        state ^= l.wrapping_add(0x2545_f491_4f6c_dd1d);
        let _ = splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
