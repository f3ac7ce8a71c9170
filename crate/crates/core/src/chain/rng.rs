use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent generators for chain `c`: one for minibatch indices and one
/// for Gaussian draws.
///
/// Both are keyed by `seed` and sit on disjoint ChaCha streams `2c` and
/// `2c + 1`, so a chain's randomness does not depend on which other chains
/// run, or in what order.
pub fn chain_rngs(seed: u64, chain: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut batch = ChaCha8Rng::seed_from_u64(seed);
    batch.set_stream(2 * chain);
    let mut noise = ChaCha8Rng::seed_from_u64(seed);
    noise.set_stream(2 * chain + 1);
    (batch, noise)
}
