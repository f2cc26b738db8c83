//! Messages parties exchange over secure channels.

use crate::attest::{AttestationSig, KeyShare};
use crate::codec::{CodecError, Reader, Writer};
use crate::crypto::{PkePublicKey, Signature};
use crate::ids::EnclaveId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMsg {
    Setup,
    SetupReply {
        eid_kme: EnclaveId,
        mpk: PkePublicKey,
        kme_quote: AttestationSig,
    },
    Provision {
        eid_de: EnclaveId,
        pk_d: PkePublicKey,
        eid_kme: EnclaveId,
        de_quote: AttestationSig,
    },
    ProvisionReply {
        ct_key: Vec<u8>,
        kme_quote: AttestationSig,
    },
    KeyShareGen(KeyShare),
}

const SETUP: u8 = 1;
const SETUP_REPLY: u8 = 2;
const PROVISION: u8 = 3;
const PROVISION_REPLY: u8 = 4;
const KEY_SHARE_GEN: u8 = 5;

impl WireMsg {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            Self::Setup => w.tag(SETUP),
            Self::SetupReply {
                eid_kme,
                mpk,
                kme_quote,
            } => w
                .tag(SETUP_REPLY)
                .u64(eid_kme.0)
                .bytes(&mpk.0)
                .bytes(&kme_quote.0 .0),
            Self::Provision {
                eid_de,
                pk_d,
                eid_kme,
                de_quote,
            } => w
                .tag(PROVISION)
                .u64(eid_de.0)
                .bytes(&pk_d.0)
                .u64(eid_kme.0)
                .bytes(&de_quote.0 .0),
            Self::ProvisionReply { ct_key, kme_quote } => {
                w.tag(PROVISION_REPLY).bytes(ct_key).bytes(&kme_quote.0 .0)
            }
            Self::KeyShareGen(share) => w.tag(KEY_SHARE_GEN).bytes(&share.encode()),
        };
        w.finish()
    }

    pub fn decode(b: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(b);
        let quote = |r: &mut Reader| Ok::<_, CodecError>(AttestationSig(Signature(r.fixed()?)));
        let msg = match r.tag()? {
            SETUP => Self::Setup,
            SETUP_REPLY => Self::SetupReply {
                eid_kme: EnclaveId(r.u64()?),
                mpk: PkePublicKey(r.fixed()?),
                kme_quote: quote(&mut r)?,
            },
            PROVISION => Self::Provision {
                eid_de: EnclaveId(r.u64()?),
                pk_d: PkePublicKey(r.fixed()?),
                eid_kme: EnclaveId(r.u64()?),
                de_quote: quote(&mut r)?,
            },
            PROVISION_REPLY => Self::ProvisionReply {
                ct_key: r.vec()?,
                kme_quote: quote(&mut r)?,
            },
            KEY_SHARE_GEN => Self::KeyShareGen(KeyShare::decode(r.bytes()?)?),
            t => return Err(CodecError::UnknownTag(t)),
        };
        r.finish()?;
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{sig_keygen, sig_sign};
    use crate::func::Descriptor;
    use crate::rng;
    use crate::setups::Certificate;

    #[test]
    fn roundtrip_all() {
        let kp = sig_keygen(&mut rng::from_seed(0));
        let q = AttestationSig(sig_sign(&kp.signing_key, b"q"));
        let share = KeyShare {
            function: Descriptor([1; 32]),
            sigma: q.0,
            signer_vk: kp.verification_key,
            cert: Certificate {
                subject_vk: kp.verification_key,
                signature: q.0,
            },
        };
        let msgs = [
            WireMsg::Setup,
            WireMsg::SetupReply {
                eid_kme: EnclaveId(1),
                mpk: PkePublicKey([2; 32]),
                kme_quote: q,
            },
            WireMsg::Provision {
                eid_de: EnclaveId(2),
                pk_d: PkePublicKey([3; 32]),
                eid_kme: EnclaveId(1),
                de_quote: q,
            },
            WireMsg::ProvisionReply {
                ct_key: vec![4; 80],
                kme_quote: q,
            },
            WireMsg::KeyShareGen(share),
        ];
        for m in msgs {
            assert_eq!(WireMsg::decode(&m.encode()).unwrap(), m);
        }
        assert!(WireMsg::decode(&[9]).is_err());
    }
}
