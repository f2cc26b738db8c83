//! Simulated attested execution: a registry of enclaves that run one of the
//! three fixed programs and sign every output with a master key.

mod messages;
mod programs;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::codec::Writer;
use crate::counters::{Meter, Op};
use crate::crypto::{sig_keygen, sig_sign, sig_verify, SigKeyPair, VerificationKey};
use crate::func::FunctionError;
use crate::ids::{EnclaveId, PartyId, SessionId};
use crate::rng::{self, SimRng};

pub use messages::{AttestationSig, EnclaveInput, EnclaveOutput, KeyShare};
pub use programs::{fe_program_hash, Program, ProgramKind};

use programs::{Env, Memory};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbortCause {
    #[error("already initialized")]
    DoubleInit,
    #[error("not initialized")]
    NotInitialized,
    #[error("program has no {0} handler")]
    WrongHandler(&'static str),
    #[error("bad DE quote")]
    BadDeQuote,
    #[error("bad KME quote")]
    BadKmeQuote,
    #[error("bad FE quote")]
    BadFeQuote,
    #[error("bad DE attestation")]
    BadDeAttestation,
    #[error("key encryption failed")]
    KeyEncryptFailed,
    #[error("key decryption failed")]
    KeyDecryptFailed,
    #[error("malformed ciphertext")]
    MalformedCiphertext,
    #[error("bad proof")]
    BadProof,
    #[error("duplicate signer")]
    DuplicateSigner,
    #[error("uncertified key")]
    UncertifiedKey,
    #[error("bad key share signature")]
    BadShareSignature,
    #[error("key share for another function")]
    WrongFunction,
    #[error("policy unsatisfied: {have} key shares, {need} required")]
    PolicyUnsatisfied { have: u64, need: u64 },
    #[error("function rejected input: {0}")]
    FunctionRejected(FunctionError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AttestError {
    #[error("install rejected: session id mismatch")]
    InstallRejected,
    #[error("no such enclave {0}")]
    NoSuchEnclave(EnclaveId),
    #[error("{0} is not the owner of {1}")]
    ResumeRejected(PartyId, EnclaveId),
    #[error("enclave abort: {0}")]
    EnclaveAbort(AbortCause),
}

/// Bytes covered by an attestation signature.
pub fn attestation_message(
    idx: &SessionId,
    eid: EnclaveId,
    program_hash: &[u8; 32],
    output: &[u8],
) -> Vec<u8> {
    Writer::new()
        .str(&idx.0)
        .u64(eid.0)
        .bytes(program_hash)
        .bytes(output)
        .finish()
}

pub fn verify_attestation(
    vk_att: &VerificationKey,
    idx: &SessionId,
    eid: EnclaveId,
    program_hash: &[u8; 32],
    output: &EnclaveOutput,
    sig: &AttestationSig,
) -> bool {
    sig_verify(
        vk_att,
        &attestation_message(idx, eid, program_hash, &output.encode()),
        &sig.0,
    )
}

#[derive(Debug)]
struct EnclaveRecord {
    idx: SessionId,
    program: Program,
    memory: Memory,
    owner: PartyId,
}

pub struct Gatt {
    seed: u64,
    session: SessionId,
    rng: SimRng,
    master: Option<SigKeyPair>,
    enclaves: BTreeMap<EnclaveId, EnclaveRecord>,
    next_eid: u64,
    meter: Meter,
}

impl Gatt {
    pub fn new(seed: u64, session: SessionId, meter: Meter) -> Self {
        Self {
            seed,
            session,
            rng: rng::derive(seed, &[b"gatt"]),
            master: None,
            enclaves: BTreeMap::new(),
            next_eid: 1,
            meter,
        }
    }

    fn master(&mut self) -> &SigKeyPair {
        let rng = &mut self.rng;
        self.master.get_or_insert_with(|| sig_keygen(rng))
    }

    pub fn getpk(&mut self) -> VerificationKey {
        self.master().verification_key
    }

    pub fn session(&self) -> &SessionId {
        &self.session
    }

    pub fn install(
        &mut self,
        party: &PartyId,
        sid: &SessionId,
        program: Program,
    ) -> Result<EnclaveId, AttestError> {
        if *sid != self.session {
            return Err(AttestError::InstallRejected);
        }
        let eid = EnclaveId(self.next_eid);
        self.next_eid += 1;
        self.meter.add(party, Op::EnclaveInstall);
        log::debug!("{party} installed {} as {eid}", program.label());
        let memory = Memory::fresh(&program.kind, self.seed, eid);
        self.enclaves.insert(
            eid,
            EnclaveRecord {
                idx: sid.clone(),
                program,
                memory,
                owner: party.clone(),
            },
        );
        Ok(eid)
    }

    pub fn resume(
        &mut self,
        party: &PartyId,
        eid: EnclaveId,
        input: EnclaveInput,
    ) -> Result<(EnclaveOutput, AttestationSig), AttestError> {
        let vk_att = self.getpk();
        let record = self
            .enclaves
            .get_mut(&eid)
            .ok_or(AttestError::NoSuchEnclave(eid))?;
        if record.owner != *party {
            return Err(AttestError::ResumeRejected(party.clone(), eid));
        }
        self.meter.add(party, Op::EnclaveResume);
        let env = Env {
            vk_att,
            idx: &record.idx,
            owner: &record.owner,
            seed: self.seed,
            meter: &self.meter,
        };
        // memory is committed only if the handler runs to completion
        let mut memory = record.memory.clone();
        let output = programs::run(&record.program, &mut memory, input, &env).map_err(|cause| {
            log::debug!("{eid} aborted: {cause}");
            AttestError::EnclaveAbort(cause)
        })?;
        record.memory = memory;
        let message = attestation_message(
            &record.idx,
            eid,
            &record.program.descriptor_hash(),
            &output.encode(),
        );
        self.meter.add(party, Op::SigSign);
        let sig = sig_sign(
            &self
                .master
                .as_ref()
                .expect("master key generated above")
                .signing_key,
            &message,
        );
        Ok((output, AttestationSig(sig)))
    }

    /// Program hash of an installed enclave, as a verifier would recompute it.
    pub fn program_hash(&self, eid: EnclaveId) -> Option<[u8; 32]> {
        self.enclaves.get(&eid).map(|r| r.program.descriptor_hash())
    }
}
