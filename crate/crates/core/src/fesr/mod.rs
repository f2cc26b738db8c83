//! Delegated decentralised functional encryption with stateful functions.
//!
//! [`FeBackend`] is the interface both the ideal functionality
//! ([`IdealDdFesr`]) and the enclave protocol (`steel::DdSteel`) expose, so the
//! application layer and the equivalence harness can drive either.

mod ideal;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::attest::{AbortCause, AttestError};
use crate::func::{Descriptor, FunctionError, FunctionSpec, Output};
use crate::ids::{Handle, PartyId, Role};
use crate::setups::CertError;

pub use ideal::IdealDdFesr;

/// Largest plaintext either backend accepts.
pub const MAX_PLAINTEXT: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FesrError {
    #[error("{0} is already set up")]
    AlreadySetup(PartyId),
    #[error("{0} is not set up")]
    NotSetUp(PartyId),
    #[error("encryption failed")]
    EncryptFailed,
    #[error("no such handle {0}")]
    NoSuchHandle(Handle),
    #[error("policy unsatisfied: {have} authorizations, {need} required")]
    PolicyUnsatisfied { have: u64, need: u64 },
    #[error("function rejected input: {0}")]
    FunctionRejected(FunctionError),
    #[error("setup aborted: {0}")]
    SetupAborted(String),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Attest(AttestError),
}

impl From<AttestError> for FesrError {
    fn from(e: AttestError) -> Self {
        match e {
            AttestError::EnclaveAbort(AbortCause::PolicyUnsatisfied { have, need }) => {
                Self::PolicyUnsatisfied { have, need }
            }
            AttestError::EnclaveAbort(AbortCause::FunctionRejected(f)) => Self::FunctionRejected(f),
            other => Self::Attest(other),
        }
    }
}

impl FesrError {
    /// Whether the functionality would answer this with a plain ⊥.
    pub fn is_bottom(&self) -> bool {
        matches!(
            self,
            Self::PolicyUnsatisfied { .. }
                | Self::EncryptFailed
                | Self::NoSuchHandle(_)
                | Self::NotSetUp(_)
                | Self::FunctionRejected(_)
        )
    }
}

/// What corrupting a party reveals: for an encryptor the `(decryptor, F)`
/// pairs it authorized, for a decryptor the `(encryptor, F)` pairs held for it.
pub type Disclosure = BTreeSet<(PartyId, Descriptor)>;

pub trait FeBackend {
    /// Joins `party` as encryptor or decryptor. Role `C` is ignored.
    fn setup(&mut self, party: &PartyId, role: Role) -> Result<(), FesrError>;

    /// `a` authorizes `b` to evaluate `f`. A no-op unless both are set up.
    fn keysharegen(&mut self, a: &PartyId, f: &FunctionSpec, b: &PartyId);

    fn encrypt(&mut self, party: &PartyId, x: &[u8], k: i64) -> Result<Handle, FesrError>;

    fn decrypt(&mut self, b: &PartyId, f: &FunctionSpec, h: Handle) -> Result<Output, FesrError>;

    fn corrupt(&mut self, party: &PartyId) -> Disclosure;

    /// Number of parties that joined as encryptors.
    fn encryptor_count(&self) -> usize;
}
