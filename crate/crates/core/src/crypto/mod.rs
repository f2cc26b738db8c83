//! Cryptographic primitives the protocol is parameterised by: public-key
//! encryption, signatures, a proof-of-plaintext-knowledge interface, hashing
//! and the common reference string.
//!
//! All randomness is injected by the caller.

mod crs;
mod envelope;
mod nizk;
mod pke;
mod sig;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use crs::{Crs, CrsFunctionality};
pub use envelope::{CiphertextMsg, PlaintextEnvelope};
pub use nizk::{NonceBindingProof, ProofStatement, ProofSystem, ProofWitness};
pub use pke::{
    pke_decrypt, pke_encrypt, pke_encrypt_with_coins, pke_keygen, PkeKeyPair, PkePublicKey,
    PkeSecretKey, PKE_OVERHEAD,
};
pub use sig::{
    sig_keygen, sig_sign, sig_verify, SigKeyPair, Signature, SigningKey, VerificationKey,
};

/// Symmetric security level in bits. Configuration only; never serialized.
pub const SECURITY_BITS: u32 = 128;

/// Hard ceiling on a single PKE plaintext.
pub const MAX_PKE_MESSAGE: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CryptoError {
    #[error("decryption failed")]
    DecryptFailed,
    #[error("message of {0} bytes exceeds the PKE limit")]
    MessageTooLarge(usize),
    #[error("witness does not match the statement")]
    InconsistentWitness,
    #[error("malformed encoding: {0}")]
    Malformed(#[from] crate::codec::CodecError),
}

/// Domain-separated SHA-256 over length-prefixed parts.
pub fn hash_parts(domain: &str, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update((domain.len() as u32).to_le_bytes());
    h.update(domain.as_bytes());
    for p in parts {
        h.update((p.len() as u32).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}
