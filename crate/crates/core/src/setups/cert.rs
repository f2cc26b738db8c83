use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::{CodecError, Reader, Writer};
use crate::counters::{Meter, Op};
use crate::crypto::{sig_keygen, sig_sign, sig_verify, SigKeyPair, Signature, VerificationKey};
use crate::ids::PartyId;
use crate::rng::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Certificate {
    pub subject_vk: VerificationKey,
    pub signature: Signature,
}

impl Certificate {
    fn signed_bytes(vk: &VerificationKey) -> Vec<u8> {
        Writer::new()
            .str("glassvault/cert/v1")
            .bytes(&vk.0)
            .finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        Writer::new()
            .bytes(&self.subject_vk.0)
            .bytes(&self.signature.0)
            .finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(b);
        let c = Self {
            subject_vk: VerificationKey(r.fixed()?),
            signature: Signature(r.fixed()?),
        };
        r.finish()?;
        Ok(c)
    }
}

/// Offline certificate check against the authority key.
pub fn cert_verify(authority: &VerificationKey, cert: &Certificate) -> bool {
    sig_verify(
        authority,
        &Certificate::signed_bytes(&cert.subject_vk),
        &cert.signature,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CertError {
    #[error("{0} already holds a certificate")]
    AlreadyCertified(PartyId),
}

/// Issues at most one certificate per party id.
#[derive(Debug)]
pub struct CertAuthority {
    rng: SimRng,
    key: Option<SigKeyPair>,
    issued: BTreeMap<PartyId, VerificationKey>,
    meter: Meter,
    actor: PartyId,
}

impl CertAuthority {
    pub fn new(seed: u64, meter: Meter) -> Self {
        Self {
            rng: rng::derive(seed, &[b"cert"]),
            key: None,
            issued: BTreeMap::new(),
            meter,
            actor: PartyId::from("F_cert"),
        }
    }

    fn key(&mut self) -> &SigKeyPair {
        let rng = &mut self.rng;
        self.key.get_or_insert_with(|| sig_keygen(rng))
    }

    pub fn getk(&mut self) -> VerificationKey {
        self.key().verification_key
    }

    pub fn sign(
        &mut self,
        party: &PartyId,
        vk: &VerificationKey,
    ) -> Result<Certificate, CertError> {
        if self.issued.contains_key(party) {
            return Err(CertError::AlreadyCertified(party.clone()));
        }
        let signature = sig_sign(&self.key().signing_key, &Certificate::signed_bytes(vk));
        self.meter.add(&self.actor, Op::SigSign);
        self.issued.insert(party.clone(), *vk);
        Ok(Certificate {
            subject_vk: *vk,
            signature,
        })
    }
}
