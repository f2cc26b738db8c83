//! The three enclave programs: key management (KME), decryption management
//! (DE) and per-function evaluation (FE[F]).

use std::collections::BTreeSet;

use super::messages::{AttestationSig, EnclaveInput, EnclaveOutput, KeyShare};
use super::{attestation_message, AbortCause};
use crate::counters::{Meter, Op};
use crate::crypto::{
    hash_parts, pke_decrypt, pke_encrypt, pke_keygen, sig_verify, Crs, NonceBindingProof,
    PkeKeyPair, PkePublicKey, PkeSecretKey, PlaintextEnvelope, ProofStatement, ProofSystem,
    VerificationKey,
};
use crate::func::{Descriptor, FunctionSpec, FunctionState};
use crate::ids::{EnclaveId, PartyId, SessionId};
use crate::rng::{self, SimRng};
use crate::setups::cert_verify;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProgramKind {
    Kme,
    De,
    Fe(FunctionSpec),
}

/// An enclave program with the certification authority key compiled in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub kind: ProgramKind,
    pub authority_vk: VerificationKey,
}

impl Program {
    pub fn kme(authority_vk: VerificationKey) -> Self {
        Self {
            kind: ProgramKind::Kme,
            authority_vk,
        }
    }

    pub fn de(authority_vk: VerificationKey) -> Self {
        Self {
            kind: ProgramKind::De,
            authority_vk,
        }
    }

    pub fn fe(spec: FunctionSpec, authority_vk: VerificationKey) -> Self {
        Self {
            kind: ProgramKind::Fe(spec),
            authority_vk,
        }
    }

    pub fn descriptor_hash(&self) -> [u8; 32] {
        match &self.kind {
            ProgramKind::Kme => program_hash(b"KME", &[], &self.authority_vk),
            ProgramKind::De => program_hash(b"DE", &[], &self.authority_vk),
            ProgramKind::Fe(spec) => fe_program_hash(&spec.descriptor(), &self.authority_vk),
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            ProgramKind::Kme => "KME".into(),
            ProgramKind::De => "DE".into(),
            ProgramKind::Fe(spec) => format!("FE[{}]", spec.label()),
        }
    }
}

fn program_hash(name: &[u8], function: &[u8], vk: &VerificationKey) -> [u8; 32] {
    hash_parts("glassvault/program/v1", &[name, function, &vk.0])
}

/// FE[F] program hash computed from the function descriptor alone, which is
/// all the DE sees.
pub fn fe_program_hash(function: &Descriptor, vk: &VerificationKey) -> [u8; 32] {
    program_hash(b"FE", &function.0, vk)
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub(super) enum Memory {
    Kme {
        rng: SimRng,
        keys: Option<PkeKeyPair>,
        crs: Option<Crs>,
    },
    De {
        rng: SimRng,
        sk_kd: Option<PkeSecretKey>,
        eid_kme: Option<EnclaveId>,
        crs: Option<Crs>,
        msk: Option<PkeSecretKey>,
        strict: bool,
    },
    Fe {
        rng: SimRng,
        sk_fd: Option<PkeSecretKey>,
        mpk: Option<PkePublicKey>,
        function_rng: Option<SimRng>,
        state: FunctionState,
    },
}

impl Memory {
    pub(super) fn fresh(kind: &ProgramKind, seed: u64, eid: EnclaveId) -> Self {
        let rng = rng::derive(seed, &[b"enclave", &eid.0.to_le_bytes()]);
        match kind {
            ProgramKind::Kme => Self::Kme {
                rng,
                keys: None,
                crs: None,
            },
            ProgramKind::De => Self::De {
                rng,
                sk_kd: None,
                eid_kme: None,
                crs: None,
                msk: None,
                strict: false,
            },
            ProgramKind::Fe(_) => Self::Fe {
                rng,
                sk_fd: None,
                mpk: None,
                function_rng: None,
                state: FunctionState::default(),
            },
        }
    }
}

/// What a running program can see besides its own memory.
pub(super) struct Env<'a> {
    pub vk_att: VerificationKey,
    pub idx: &'a SessionId,
    pub owner: &'a PartyId,
    pub seed: u64,
    pub meter: &'a Meter,
}

impl Env<'_> {
    fn charge(&self, op: Op) {
        self.meter.add(self.owner, op);
    }

    fn verify_quote(
        &self,
        eid: EnclaveId,
        program_hash: &[u8; 32],
        output: &EnclaveOutput,
        sig: &AttestationSig,
    ) -> bool {
        self.charge(Op::SigVerify);
        let m = attestation_message(self.idx, eid, program_hash, &output.encode());
        sig_verify(&self.vk_att, &m, &sig.0)
    }
}

pub(super) fn run(
    program: &Program,
    mem: &mut Memory,
    input: EnclaveInput,
    env: &Env<'_>,
) -> Result<EnclaveOutput, AbortCause> {
    match (&program.kind, mem, input) {
        (
            ProgramKind::Kme,
            Memory::Kme { rng, keys, crs },
            EnclaveInput::KmeInit { crs: c, .. },
        ) => {
            if keys.is_some() {
                return Err(AbortCause::DoubleInit);
            }
            env.charge(Op::PkeKeygen);
            let kp = pke_keygen(rng);
            let mpk = kp.public_key;
            *keys = Some(kp);
            *crs = Some(c);
            Ok(EnclaveOutput::Mpk(mpk))
        }
        (
            ProgramKind::Kme,
            Memory::Kme { rng, keys, crs },
            EnclaveInput::KmeProvision {
                de_quote,
                eid_de,
                pk_d,
                eid_kme,
            },
        ) => {
            let (Some(kp), Some(crs)) = (keys.as_ref(), crs.as_ref()) else {
                return Err(AbortCause::NotInitialized);
            };
            let expected = EnclaveOutput::DeSetup {
                pk_d,
                eid_kme,
                crs: crs.bytes,
            };
            let de_hash = Program::de(program.authority_vk).descriptor_hash();
            if !env.verify_quote(eid_de, &de_hash, &expected, &de_quote) {
                return Err(AbortCause::BadDeQuote);
            }
            env.charge(Op::PkeEncrypt);
            let ct_key = pke_encrypt(&pk_d, &kp.secret_key.to_bytes(), rng)
                .map_err(|_| AbortCause::KeyEncryptFailed)?;
            Ok(EnclaveOutput::KeyCiphertext(ct_key))
        }
        (
            ProgramKind::De,
            Memory::De {
                rng,
                sk_kd,
                eid_kme,
                crs,
                strict,
                ..
            },
            EnclaveInput::DeInitSetup {
                eid_kme: e,
                crs: c,
                strict: s,
                ..
            },
        ) => {
            if sk_kd.is_some() {
                return Err(AbortCause::DoubleInit);
            }
            env.charge(Op::PkeKeygen);
            let kp = pke_keygen(rng);
            let out = EnclaveOutput::DeSetup {
                pk_d: kp.public_key,
                eid_kme: e,
                crs: c.bytes,
            };
            *sk_kd = Some(kp.secret_key);
            *eid_kme = Some(e);
            *crs = Some(c);
            *strict = s;
            Ok(out)
        }
        (
            ProgramKind::De,
            Memory::De {
                sk_kd,
                eid_kme,
                msk,
                ..
            },
            EnclaveInput::DeCompleteSetup { ct_key, kme_quote },
        ) => {
            let (Some(sk_kd), Some(eid_kme)) = (sk_kd.as_ref(), *eid_kme) else {
                return Err(AbortCause::NotInitialized);
            };
            if msk.is_some() {
                return Err(AbortCause::DoubleInit);
            }
            let kme_hash = Program::kme(program.authority_vk).descriptor_hash();
            let expected = EnclaveOutput::KeyCiphertext(ct_key.clone());
            if !env.verify_quote(eid_kme, &kme_hash, &expected, &kme_quote) {
                return Err(AbortCause::BadKmeQuote);
            }
            env.charge(Op::PkeDecrypt);
            let bytes = pke_decrypt(sk_kd, &ct_key).map_err(|_| AbortCause::KeyDecryptFailed)?;
            let key: [u8; 32] = bytes.try_into().map_err(|_| AbortCause::KeyDecryptFailed)?;
            *msk = Some(PkeSecretKey::from_bytes(key));
            Ok(EnclaveOutput::SetupComplete)
        }
        (
            ProgramKind::De,
            Memory::De {
                rng,
                crs,
                msk,
                strict,
                ..
            },
            EnclaveInput::DeProvision {
                shares,
                eid_fe,
                pk_fd,
                fe_quote,
                function,
                pid,
            },
        ) => {
            let (Some(msk), Some(crs)) = (msk.as_ref(), crs.as_ref()) else {
                return Err(AbortCause::NotInitialized);
            };
            let count = validate_shares(
                &shares,
                &function,
                &pid,
                &program.authority_vk,
                *strict,
                env,
            )?;
            let fe_hash = fe_program_hash(&function, &program.authority_vk);
            if !env.verify_quote(eid_fe, &fe_hash, &EnclaveOutput::FeKey(pk_fd), &fe_quote) {
                return Err(AbortCause::BadFeQuote);
            }
            env.charge(Op::PkeEncrypt);
            let ct_key = pke_encrypt(&pk_fd, &msk.to_bytes(), rng)
                .map_err(|_| AbortCause::KeyEncryptFailed)?;
            Ok(EnclaveOutput::FeProvision {
                ct_key,
                count,
                crs: crs.bytes,
            })
        }
        (
            ProgramKind::Fe(spec),
            Memory::Fe {
                rng,
                sk_fd,
                mpk,
                function_rng,
                ..
            },
            EnclaveInput::FeInit { mpk: m, .. },
        ) => {
            if sk_fd.is_some() {
                return Err(AbortCause::DoubleInit);
            }
            env.charge(Op::PkeKeygen);
            let kp = pke_keygen(rng);
            *sk_fd = Some(kp.secret_key);
            *mpk = Some(m);
            *function_rng = Some(rng::function_stream(
                env.seed,
                env.owner.as_str(),
                &spec.descriptor().0,
            ));
            Ok(EnclaveOutput::FeKey(kp.public_key))
        }
        (
            ProgramKind::Fe(spec),
            Memory::Fe {
                sk_fd,
                mpk,
                function_rng,
                state,
                ..
            },
            EnclaveInput::FeRun {
                de_quote,
                eid_de,
                ct_key,
                ct_msg,
                lks,
                crs,
                short_circuit,
            },
        ) => {
            if let Some(y) = short_circuit {
                return Ok(EnclaveOutput::Computed(y));
            }
            let (Some(sk_fd), Some(mpk), Some(function_rng)) =
                (sk_fd.as_ref(), mpk.as_ref(), function_rng.as_mut())
            else {
                return Err(AbortCause::NotInitialized);
            };
            let de_hash = Program::de(program.authority_vk).descriptor_hash();
            let provisioned = EnclaveOutput::FeProvision {
                ct_key: ct_key.clone(),
                count: lks,
                crs: crs.bytes,
            };
            if !env.verify_quote(eid_de, &de_hash, &provisioned, &de_quote) {
                return Err(AbortCause::BadDeAttestation);
            }
            env.charge(Op::PkeDecrypt);
            let key = pke_decrypt(sk_fd, &ct_key).map_err(|_| AbortCause::KeyDecryptFailed)?;
            let key: [u8; 32] = key.try_into().map_err(|_| AbortCause::KeyDecryptFailed)?;
            let msk = PkeSecretKey::from_bytes(key);
            // the default proof binds to a nonce inside the envelope, so the
            // envelope is opened before the proof is checked
            env.charge(Op::PkeDecrypt);
            let envelope = pke_decrypt(&msk, &ct_msg.ciphertext)
                .ok()
                .and_then(|b| PlaintextEnvelope::decode(&b).ok())
                .ok_or(AbortCause::MalformedCiphertext)?;
            env.charge(Op::ProofVerify);
            let statement = ProofStatement {
                mpk,
                ciphertext: &ct_msg.ciphertext,
            };
            if !NonceBindingProof.verify(&crs, statement, &ct_msg.proof, &envelope) {
                return Err(AbortCause::BadProof);
            }
            if !spec.is_f0() && lks < envelope.threshold {
                return Err(AbortCause::PolicyUnsatisfied {
                    have: lks,
                    need: envelope.threshold,
                });
            }
            let (out, next) = spec
                .evaluate(&envelope.message, state, function_rng)
                .map_err(AbortCause::FunctionRejected)?;
            *state = next;
            Ok(EnclaveOutput::Computed(out))
        }
        (_, _, input) => Err(AbortCause::WrongHandler(input.handler())),
    }
}

/// Returns the number of distinct certified signers among `shares`.
fn validate_shares(
    shares: &[KeyShare],
    function: &Descriptor,
    pid: &PartyId,
    authority_vk: &VerificationKey,
    strict: bool,
    env: &Env<'_>,
) -> Result<u64, AbortCause> {
    let statement = KeyShare::signed_bytes(function, pid);
    let mut first_failure = None;
    let mut signers = BTreeSet::new();
    for (i, share) in shares.iter().enumerate() {
        let cause = check_share(share, function, &statement, authority_vk, env);
        match cause {
            Some(c) if strict => return Err(c),
            Some(c) => {
                log::warn!("dropping key share {i} for {pid}: {c}");
                first_failure.get_or_insert(c);
            }
            None => {
                if !signers.insert(share.signer_vk) {
                    return Err(AbortCause::DuplicateSigner);
                }
            }
        }
    }
    match first_failure {
        Some(c) if signers.is_empty() => Err(c),
        _ => Ok(signers.len() as u64),
    }
}

/// Checks in order: function, certificate, share signature.
fn check_share(
    share: &KeyShare,
    function: &Descriptor,
    statement: &[u8],
    authority_vk: &VerificationKey,
    env: &Env<'_>,
) -> Option<AbortCause> {
    if share.function != *function {
        return Some(AbortCause::WrongFunction);
    }
    if share.cert.subject_vk != share.signer_vk {
        return Some(AbortCause::UncertifiedKey);
    }
    env.charge(Op::SigVerify);
    if !cert_verify(authority_vk, &share.cert) {
        return Some(AbortCause::UncertifiedKey);
    }
    env.charge(Op::SigVerify);
    if !sig_verify(&share.signer_vk, statement, &share.sigma) {
        return Some(AbortCause::BadShareSignature);
    }
    None
}
