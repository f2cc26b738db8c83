//! Hybrid public-key encryption: X25519 key encapsulation to a fresh
//! ephemeral key, HKDF-SHA256 key schedule, ChaCha20-Poly1305 payload.
//!
//! Ciphertext layout: `ephemeral_pk (32) || aead(m) (|m| + 16)`. The length is
//! a function of `|m|` only.

use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};
use hkdf::Hkdf;
use rand::{CryptoRng, RngCore};
use sha2::Sha256;
use x25519_dalek::{PublicKey, StaticSecret};
use zeroize::Zeroizing;

use super::{CryptoError, MAX_PKE_MESSAGE};

/// Bytes added to a plaintext by encryption.
pub const PKE_OVERHEAD: usize = 32 + 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PkePublicKey(pub [u8; 32]);

#[derive(Clone)]
pub struct PkeSecretKey(Zeroizing<[u8; 32]>);

impl PkeSecretKey {
    pub fn from_bytes(b: [u8; 32]) -> Self {
        Self(Zeroizing::new(b))
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        *self.0
    }

    pub fn public_key(&self) -> PkePublicKey {
        PkePublicKey(PublicKey::from(&StaticSecret::from(*self.0)).to_bytes())
    }
}

impl std::fmt::Debug for PkeSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("PkeSecretKey(..)")
    }
}

#[derive(Debug, Clone)]
pub struct PkeKeyPair {
    pub public_key: PkePublicKey,
    pub secret_key: PkeSecretKey,
}

pub fn pke_keygen<R: RngCore + CryptoRng>(rng: &mut R) -> PkeKeyPair {
    let secret = StaticSecret::random_from_rng(&mut *rng);
    let public_key = PkePublicKey(PublicKey::from(&secret).to_bytes());
    PkeKeyPair {
        public_key,
        secret_key: PkeSecretKey::from_bytes(secret.to_bytes()),
    }
}

fn schedule(shared: &[u8; 32], eph: &[u8; 32], recipient: &[u8; 32]) -> (Key, Nonce) {
    let mut info = Vec::with_capacity(16 + 64);
    info.extend_from_slice(b"glassvault/pke/v1");
    info.extend_from_slice(eph);
    info.extend_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(None, shared);
    let mut okm = Zeroizing::new([0u8; 44]);
    hk.expand(&info, okm.as_mut())
        .expect("44 bytes is a valid HKDF-SHA256 output length");
    (*Key::from_slice(&okm[..32]), *Nonce::from_slice(&okm[32..]))
}

/// Deterministic encryption under explicit coins. `coins` is the PKE
/// randomness `r`; the proof system needs it as part of the witness.
pub fn pke_encrypt_with_coins(
    pk: &PkePublicKey,
    m: &[u8],
    coins: [u8; 32],
) -> Result<Vec<u8>, CryptoError> {
    if m.len() > MAX_PKE_MESSAGE {
        return Err(CryptoError::MessageTooLarge(m.len()));
    }
    let eph = StaticSecret::from(coins);
    let eph_pk = PublicKey::from(&eph).to_bytes();
    let shared = eph.diffie_hellman(&PublicKey::from(pk.0));
    if !shared.was_contributory() {
        return Err(CryptoError::DecryptFailed);
    }
    let (key, nonce) = schedule(shared.as_bytes(), &eph_pk, &pk.0);
    let body = ChaCha20Poly1305::new(&key)
        .encrypt(&nonce, m)
        .map_err(|_| CryptoError::MessageTooLarge(m.len()))?;
    let mut out = Vec::with_capacity(PKE_OVERHEAD + m.len());
    out.extend_from_slice(&eph_pk);
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn pke_encrypt<R: RngCore + CryptoRng>(
    pk: &PkePublicKey,
    m: &[u8],
    rng: &mut R,
) -> Result<Vec<u8>, CryptoError> {
    let mut coins = [0u8; 32];
    rng.fill_bytes(&mut coins);
    pke_encrypt_with_coins(pk, m, coins)
}

pub fn pke_decrypt(sk: &PkeSecretKey, ct: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ct.len() < PKE_OVERHEAD {
        return Err(CryptoError::DecryptFailed);
    }
    let eph_pk: [u8; 32] = ct[..32].try_into().expect("32 bytes");
    let secret = StaticSecret::from(*sk.0);
    let shared = secret.diffie_hellman(&PublicKey::from(eph_pk));
    if !shared.was_contributory() {
        return Err(CryptoError::DecryptFailed);
    }
    let recipient = PublicKey::from(&secret).to_bytes();
    let (key, nonce) = schedule(shared.as_bytes(), &eph_pk, &recipient);
    ChaCha20Poly1305::new(&key)
        .decrypt(&nonce, &ct[32..])
        .map_err(|_| CryptoError::DecryptFailed)
}
