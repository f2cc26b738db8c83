//! Proof of plaintext knowledge.
//!
//! The protocol only verifies these proofs inside the FE enclave, which holds
//! the master secret key and therefore sees the decrypted envelope. The
//! default instantiation binds the statement to a nonce carried inside the
//! envelope: `proof = H(crs || mpk || ct || nonce)`. A production system would
//! put a simulation-extractable NIZK behind the same trait.

use super::{
    hash_parts, pke_encrypt_with_coins, Crs, CryptoError, PkePublicKey, PlaintextEnvelope,
};

#[derive(Debug, Clone, Copy)]
pub struct ProofStatement<'a> {
    pub mpk: &'a PkePublicKey,
    pub ciphertext: &'a [u8],
}

#[derive(Debug, Clone, Copy)]
pub struct ProofWitness<'a> {
    pub envelope: &'a PlaintextEnvelope,
    pub coins: [u8; 32],
}

pub trait ProofSystem {
    fn prove(
        &self,
        crs: &Crs,
        statement: ProofStatement<'_>,
        witness: ProofWitness<'_>,
    ) -> Result<Vec<u8>, CryptoError>;

    /// `envelope` is the plaintext the verifying enclave obtained by
    /// decrypting `statement.ciphertext`.
    fn verify(
        &self,
        crs: &Crs,
        statement: ProofStatement<'_>,
        proof: &[u8],
        envelope: &PlaintextEnvelope,
    ) -> bool;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NonceBindingProof;

impl NonceBindingProof {
    fn digest(crs: &Crs, st: ProofStatement<'_>, nonce: &[u8; 16]) -> [u8; 32] {
        hash_parts(
            "glassvault/nizk/v1",
            &[&crs.bytes, &st.mpk.0, st.ciphertext, nonce],
        )
    }
}

impl ProofSystem for NonceBindingProof {
    fn prove(
        &self,
        crs: &Crs,
        statement: ProofStatement<'_>,
        witness: ProofWitness<'_>,
    ) -> Result<Vec<u8>, CryptoError> {
        let recomputed =
            pke_encrypt_with_coins(statement.mpk, &witness.envelope.encode(), witness.coins)?;
        if recomputed != statement.ciphertext {
            return Err(CryptoError::InconsistentWitness);
        }
        Ok(Self::digest(crs, statement, &witness.envelope.proof_nonce).to_vec())
    }

    fn verify(
        &self,
        crs: &Crs,
        statement: ProofStatement<'_>,
        proof: &[u8],
        envelope: &PlaintextEnvelope,
    ) -> bool {
        proof.len() == 32 && proof == Self::digest(crs, statement, &envelope.proof_nonce)
    }
}
