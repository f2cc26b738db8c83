use std::collections::BTreeMap;

use crate::counters::{Meter, Op};
use crate::ids::PartyId;

/// Synchronous authenticated channels. Only message lengths are recorded;
/// an optional tap keeps contents for test byte-scans.
#[derive(Debug, Default)]
pub struct SecureChannels {
    lengths: BTreeMap<(PartyId, PartyId), Vec<usize>>,
    tap: Option<Vec<(PartyId, PartyId, Vec<u8>)>>,
    meter: Meter,
}

impl SecureChannels {
    pub fn new(meter: Meter) -> Self {
        Self {
            meter,
            ..Self::default()
        }
    }

    pub fn with_tap(mut self) -> Self {
        self.tap = Some(Vec::new());
        self
    }

    pub fn send(&mut self, sender: &PartyId, receiver: &PartyId, message: Vec<u8>) -> Vec<u8> {
        self.meter.add(sender, Op::ScSend);
        self.lengths
            .entry((sender.clone(), receiver.clone()))
            .or_default()
            .push(message.len());
        if let Some(tap) = &mut self.tap {
            tap.push((sender.clone(), receiver.clone(), message.clone()));
        }
        message
    }

    pub fn leak(&self, sender: &PartyId, receiver: &PartyId) -> Vec<usize> {
        self.lengths
            .get(&(sender.clone(), receiver.clone()))
            .cloned()
            .unwrap_or_default()
    }

    pub fn tapped(&self) -> &[(PartyId, PartyId, Vec<u8>)] {
        self.tap.as_deref().unwrap_or(&[])
    }
}
