//! Per-party operation counters.
//!
//! Work done inside an enclave is charged to the party that resumed it.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use serde::Serialize;

use crate::ids::PartyId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Op {
    EnclaveInstall,
    EnclaveResume,
    PkeKeygen,
    PkeEncrypt,
    PkeDecrypt,
    SigKeygen,
    SigSign,
    SigVerify,
    ProofProve,
    ProofVerify,
    ScSend,
}

impl Op {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::EnclaveInstall => "enclave_install",
            Self::EnclaveResume => "enclave_resume",
            Self::PkeKeygen => "pke_keygen",
            Self::PkeEncrypt => "pke_encrypt",
            Self::PkeDecrypt => "pke_decrypt",
            Self::SigKeygen => "sig_keygen",
            Self::SigSign => "sig_sign",
            Self::SigVerify => "sig_verify",
            Self::ProofProve => "proof_prove",
            Self::ProofVerify => "proof_verify",
            Self::ScSend => "sc_send",
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type Counts = BTreeMap<(PartyId, Op), u64>;

/// Shared handle to one run's counters. Cloning shares the same table.
#[derive(Debug, Clone, Default)]
pub struct Meter(Rc<RefCell<Counts>>);

impl Meter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, actor: &PartyId, op: Op) {
        *self.0.borrow_mut().entry((actor.clone(), op)).or_default() += 1;
    }

    pub fn count(&self, actor: &PartyId, op: Op) -> u64 {
        self.0
            .borrow()
            .get(&(actor.clone(), op))
            .copied()
            .unwrap_or(0)
    }

    pub fn snapshot(&self) -> Counts {
        self.0.borrow().clone()
    }

    /// Entries of `after` that grew since `before`, with the increase.
    pub fn delta(before: &Counts, after: &Counts) -> Vec<(PartyId, Op, u64)> {
        after
            .iter()
            .filter_map(|((p, op), &n)| {
                let d = n - before.get(&(p.clone(), *op)).copied().unwrap_or(0);
                (d > 0).then(|| (p.clone(), *op, d))
            })
            .collect()
    }
}
