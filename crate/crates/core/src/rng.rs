use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every stochastic routine draws from this generator so that a seed fully
/// determines the output, independent of platform and thread scheduling.
pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}
