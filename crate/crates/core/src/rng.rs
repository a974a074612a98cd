//! Seeded random streams.
//!
//! Every consumer draws from its own ChaCha8 stream: the 64-bit seed
//! selects the key and the [`Stream`] selects the stream id. Changing
//! how much one consumer draws never shifts another consumer's values.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Endmembers = 1,
    Abundances = 2,
    ImplantSites = 3,
    NoiseLevels = 4,
    NoiseSamples = 5,
    AnomalySpectrum = 6,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
