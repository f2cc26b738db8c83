use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{CiphertextMsg, Crs, PkePublicKey, Signature, VerificationKey};
use crate::func::{Descriptor, Output};
use crate::ids::{EnclaveId, PartyId, SessionId};
use crate::setups::Certificate;

/// Signature by the attestation master key over `(idx, eid, program, output)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AttestationSig(pub Signature);

/// An encryptor's authorization for a decryptor to evaluate one function.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct KeyShare {
    pub function: Descriptor,
    pub sigma: Signature,
    pub signer_vk: VerificationKey,
    pub cert: Certificate,
}

impl KeyShare {
    /// The statement a share signs: the function and the decryptor's pid.
    pub fn signed_bytes(function: &Descriptor, decryptor: &PartyId) -> Vec<u8> {
        Writer::new()
            .str("glassvault/keyshare/v1")
            .bytes(&function.0)
            .str(decryptor.as_str())
            .finish()
    }

    pub fn encode(&self) -> Vec<u8> {
        Writer::new()
            .bytes(&self.function.0)
            .bytes(&self.sigma.0)
            .bytes(&self.signer_vk.0)
            .bytes(&self.cert.encode())
            .finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(b);
        let s = Self {
            function: Descriptor(r.fixed()?),
            sigma: Signature(r.fixed()?),
            signer_vk: VerificationKey(r.fixed()?),
            cert: Certificate::decode(r.bytes()?)?,
        };
        r.finish()?;
        Ok(s)
    }
}

#[derive(Debug, Clone)]
pub enum EnclaveInput {
    KmeInit {
        crs: Crs,
        sid: SessionId,
    },
    KmeProvision {
        de_quote: AttestationSig,
        eid_de: EnclaveId,
        pk_d: PkePublicKey,
        eid_kme: EnclaveId,
    },
    DeInitSetup {
        eid_kme: EnclaveId,
        crs: Crs,
        idx: SessionId,
        /// Abort on any invalid key share instead of dropping it.
        strict: bool,
    },
    DeCompleteSetup {
        ct_key: Vec<u8>,
        kme_quote: AttestationSig,
    },
    DeProvision {
        shares: Vec<KeyShare>,
        eid_fe: EnclaveId,
        pk_fd: PkePublicKey,
        fe_quote: AttestationSig,
        function: Descriptor,
        pid: PartyId,
    },
    FeInit {
        mpk: PkePublicKey,
        idx: SessionId,
    },
    FeRun {
        de_quote: AttestationSig,
        eid_de: EnclaveId,
        ct_key: Vec<u8>,
        ct_msg: CiphertextMsg,
        lks: u64,
        crs: Crs,
        /// Test hook: when present the enclave returns it untouched.
        short_circuit: Option<Output>,
    },
}

impl EnclaveInput {
    pub fn handler(&self) -> &'static str {
        match self {
            Self::KmeInit { .. } | Self::FeInit { .. } => "init",
            Self::KmeProvision { .. } | Self::DeProvision { .. } => "provision",
            Self::DeInitSetup { .. } => "init-setup",
            Self::DeCompleteSetup { .. } => "complete-setup",
            Self::FeRun { .. } => "run",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnclaveOutput {
    Mpk(PkePublicKey),
    KeyCiphertext(Vec<u8>),
    DeSetup {
        pk_d: PkePublicKey,
        eid_kme: EnclaveId,
        crs: [u8; 32],
    },
    SetupComplete,
    FeProvision {
        ct_key: Vec<u8>,
        count: u64,
        crs: [u8; 32],
    },
    FeKey(PkePublicKey),
    Computed(Output),
}

impl EnclaveOutput {
    /// Canonical bytes the attestation signature covers.
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Self::Mpk(pk) => w.tag(1).bytes(&pk.0),
            Self::KeyCiphertext(ct) => w.tag(2).bytes(ct),
            Self::DeSetup { pk_d, eid_kme, crs } => {
                w.tag(3).bytes(&pk_d.0).u64(eid_kme.0).bytes(crs)
            }
            Self::SetupComplete => w.tag(4),
            Self::FeProvision { ct_key, count, crs } => {
                w.tag(5).bytes(ct_key).u64(*count).bytes(crs)
            }
            Self::FeKey(pk) => w.tag(6).bytes(&pk.0),
            Self::Computed(Output::Pending) => w.tag(7).opt_bytes(None),
            Self::Computed(Output::Value(y)) => w.tag(7).opt_bytes(Some(y)),
        };
        w.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{sig_keygen, sig_sign};
    use crate::rng;

    #[test]
    fn keyshare_roundtrip() {
        let kp = sig_keygen(&mut rng::from_seed(0));
        let share = KeyShare {
            function: Descriptor([3; 32]),
            sigma: sig_sign(&kp.signing_key, b"x"),
            signer_vk: kp.verification_key,
            cert: Certificate {
                subject_vk: kp.verification_key,
                signature: sig_sign(&kp.signing_key, b"y"),
            },
        };
        assert_eq!(KeyShare::decode(&share.encode()).unwrap(), share);
    }

    #[test]
    fn keyshare_statement_binds_decryptor() {
        let d = Descriptor([1; 32]);
        assert_ne!(
            KeyShare::signed_bytes(&d, &"b1".into()),
            KeyShare::signed_bytes(&d, &"b2".into())
        );
    }

    #[test]
    fn outputs_encode_distinctly() {
        let a = EnclaveOutput::Computed(Output::Pending).encode();
        let b = EnclaveOutput::Computed(Output::Value(vec![])).encode();
        assert_ne!(a, b);
        assert_ne!(EnclaveOutput::SetupComplete.encode(), a);
    }
}
