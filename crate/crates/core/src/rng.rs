//! Seeded randomness. Every random draw in a run descends from one 64-bit
//! seed through labelled sub-streams, so runs replay bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha20Rng;

pub fn from_seed(seed: u64) -> SimRng {
    derive(seed, &[b"root"])
}

/// Sub-stream keyed by `seed` and a sequence of labels.
pub fn derive(seed: u64, labels: &[&[u8]]) -> SimRng {
    let mut h = Sha256::new();
    h.update(b"glassvault/rng/v1");
    h.update(seed.to_le_bytes());
    for label in labels {
        h.update((label.len() as u32).to_le_bytes());
        h.update(label);
    }
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// The randomness stream a stateful function draws from for decryptor `pid`.
///
/// Both the ideal functionality and the FE enclave use this derivation, which
/// is what makes their outputs comparable for randomized functions.
pub fn function_stream(seed: u64, pid: &str, descriptor: &[u8; 32]) -> SimRng {
    derive(seed, &[b"function", pid.as_bytes(), descriptor])
}
