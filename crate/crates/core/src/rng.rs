//! Counter-based random substreams.
//!
//! Every Monte Carlo draw comes from a stream addressed by
//! `(master seed, block, path)`: the key is derived from the seed and the
//! block (a scenario or a state), and the ChaCha stream id is the path
//! index. Draws therefore do not depend on how paths are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// 256-bit key for one block of paths.
pub fn block_key(seed: u64, block: u64) -> [u8; 32] {
    let mut state = seed ^ block.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Generator for path `path` of block `block`.
pub fn substream(key: &[u8; 32], path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(path);
    rng
}
