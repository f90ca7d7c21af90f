//! Deterministic seed derivation.
//!
//! A master seed fans out into independent substreams keyed by component and
//! iteration, so toggling one component (e.g. fitting gradient models) never
//! perturbs the random draws seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Components with their own substreams inside a BO run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    InitDesign,
    FitObjective,
    FitGradients,
    AcqOpt,
    Thompson,
    MonteCarlo,
}

impl Component {
    fn tag(self) -> u64 {
        match self {
            Component::InitDesign => 0x01,
            Component::FitObjective => 0x02,
            Component::FitGradients => 0x03,
            Component::AcqOpt => 0x04,
            Component::Thompson => 0x05,
            Component::MonteCarlo => 0x06,
        }
    }
}

/// SplitMix64 step; decorrelates nearby seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the substream for `component` at `iteration`.
pub fn substream_seed(master: u64, component: Component, iteration: u64) -> u64 {
    mix(mix(master ^ component.tag().wrapping_mul(0xa076_1d64_78bd_642f)) ^ iteration)
}

/// Counter-based generator for a substream.
pub fn substream_rng(master: u64, component: Component, iteration: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, component, iteration))
}

/// 32-bit seed for the Sobol scrambler of a substream.
pub fn substream_seed32(master: u64, component: Component, iteration: u64) -> u32 {
    substream_seed(master, component, iteration) as u32
}
