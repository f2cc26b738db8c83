use std::collections::BTreeMap;

use thiserror::Error;

use crate::crypto::CiphertextMsg;
use crate::ids::Handle;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RepError {
    #[error("no ciphertext under {0}")]
    NoSuchHandle(Handle),
}

/// Write-once ciphertext store; one per run, readable by anyone.
#[derive(Debug, Default)]
pub struct Repository {
    entries: BTreeMap<Handle, CiphertextMsg>,
    next: u64,
}

impl Repository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write(&mut self, payload: CiphertextMsg) -> Handle {
        self.next += 1;
        let h = Handle(self.next);
        self.entries.insert(h, payload);
        h
    }

    pub fn read(&self, h: Handle) -> Result<&CiphertextMsg, RepError> {
        self.entries.get(&h).ok_or(RepError::NoSuchHandle(h))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Handle, &CiphertextMsg)> {
        self.entries.iter()
    }
}
