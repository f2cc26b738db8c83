use ed25519_dalek::{Signer, SigningKey as DalekSigningKey, VerifyingKey};
use rand::{CryptoRng, RngCore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VerificationKey(pub [u8; 32]);

#[derive(Clone)]
pub struct SigningKey(DalekSigningKey);

impl std::fmt::Debug for SigningKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SigningKey(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature(pub [u8; 64]);

impl Signature {
    pub fn from_slice(b: &[u8]) -> Option<Self> {
        b.try_into().ok().map(Self)
    }
}

#[derive(Debug, Clone)]
pub struct SigKeyPair {
    pub verification_key: VerificationKey,
    pub signing_key: SigningKey,
}

pub fn sig_keygen<R: RngCore + CryptoRng>(rng: &mut R) -> SigKeyPair {
    let sk = DalekSigningKey::generate(rng);
    SigKeyPair {
        verification_key: VerificationKey(sk.verifying_key().to_bytes()),
        signing_key: SigningKey(sk),
    }
}

pub fn sig_sign(sk: &SigningKey, m: &[u8]) -> Signature {
    Signature(sk.0.sign(m).to_bytes())
}

/// Never faults: an unparsable key or signature simply fails verification.
pub fn sig_verify(vk: &VerificationKey, m: &[u8], sig: &Signature) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(&vk.0) else {
        return false;
    };
    let sig = ed25519_dalek::Signature::from_bytes(&sig.0);
    vk.verify_strict(m, &sig).is_ok()
}
