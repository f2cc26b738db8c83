//! Measurement error functions, reality-faking functions and leakage
//! selectors. None of them ever reads or rewrites the SEC field.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::RealityRecord;
use crate::crypto::hash_parts;
use crate::ids::PartyId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorFunction {
    Identity,
    /// Adds a constant to every distance.
    DistanceOffset {
        meters: f64,
    },
    ZeroTp,
    /// Deterministic per-(user, tick, peer) noise in `[-delta, delta]`,
    /// clamped at zero.
    UniformNoise {
        delta: f64,
        seed: u64,
    },
}

impl ErrorFunction {
    pub fn apply(&self, r: &RealityRecord) -> RealityRecord {
        let mut out = r.clone();
        match self {
            Self::Identity => {}
            Self::DistanceOffset { meters } => {
                for d in out.dist.values_mut() {
                    *d += meters;
                }
            }
            Self::ZeroTp => {
                if out.tp.is_some() {
                    out.tp = Some(0.0);
                }
            }
            Self::UniformNoise { delta, seed } => {
                for (peer, d) in out.dist.iter_mut() {
                    let h = hash_parts(
                        "glassvault/noise/v1",
                        &[
                            &seed.to_le_bytes(),
                            r.user.as_str().as_bytes(),
                            &r.time.to_le_bytes(),
                            peer.as_str().as_bytes(),
                        ],
                    );
                    let u = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) as f64
                        / u64::MAX as f64;
                    *d = (*d + delta * (2.0 * u - 1.0)).max(0.0);
                }
            }
        }
        out
    }
}

/// The allowable error functions E.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSet(pub Vec<ErrorFunction>);

impl Default for ErrorSet {
    fn default() -> Self {
        Self(vec![ErrorFunction::Identity])
    }
}

impl ErrorSet {
    pub fn contains(&self, e: &ErrorFunction) -> bool {
        self.0.contains(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FakingFunction {
    /// Rewrites `user`'s distances to the listed peers (both directions) at
    /// `tick`, or at the user's latest tick. Creates the record if the user
    /// has none at that tick, which is how a relay attack is staged.
    MoveUser {
        user: PartyId,
        dists: BTreeMap<PartyId, f64>,
        #[serde(default)]
        tick: Option<u64>,
    },
    /// One-directional distance override on `from`'s records at `tick`, or on
    /// all of them.
    MarkDistance {
        from: PartyId,
        to: PartyId,
        dist: f64,
        #[serde(default)]
        tick: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FakingKind {
    MoveUser,
    MarkDistance,
}

impl FakingFunction {
    pub fn kind(&self) -> FakingKind {
        match self {
            Self::MoveUser { .. } => FakingKind::MoveUser,
            Self::MarkDistance { .. } => FakingKind::MarkDistance,
        }
    }

    pub fn apply(&self, store: &[RealityRecord]) -> Vec<RealityRecord> {
        let mut out = store.to_vec();
        match self {
            Self::MoveUser { user, dists, tick } => {
                let latest = out.iter().filter(|r| &r.user == user).map(|r| r.time).max();
                let Some(t) = tick.or(latest) else {
                    return out;
                };
                match out.iter_mut().find(|r| &r.user == user && r.time == t) {
                    Some(r) => r.dist.extend(dists.iter().map(|(k, v)| (k.clone(), *v))),
                    None => out.push(RealityRecord {
                        dist: dists.clone(),
                        ..RealityRecord::empty(user.clone(), t)
                    }),
                }
                for r in out.iter_mut().filter(|r| r.time == t) {
                    if let Some(d) = dists.get(&r.user) {
                        r.dist.insert(user.clone(), *d);
                    }
                }
            }
            Self::MarkDistance {
                from,
                to,
                dist,
                tick,
            } => {
                for r in out.iter_mut().filter(|r| &r.user == from) {
                    if tick.is_none_or(|t| t == r.time) {
                        r.dist.insert(to.clone(), *dist);
                    }
                }
            }
        }
        out
    }
}

/// The allowable faking functions Φ, by kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FakingSet(pub Vec<FakingKind>);

impl Default for FakingSet {
    fn default() -> Self {
        Self(vec![FakingKind::MoveUser, FakingKind::MarkDistance])
    }
}

impl FakingSet {
    pub fn contains(&self, phi: &FakingFunction) -> bool {
        self.0.contains(&phi.kind())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakageSelector {
    /// Noisy records with SEC removed, plus the active and shared lists.
    #[default]
    StripSec,
    /// Only the sizes of the three components.
    CountsOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakView {
    pub records: Vec<RealityRecord>,
    pub active: Vec<PartyId>,
    pub shared: Vec<(PartyId, u64)>,
    pub counts: (usize, usize, usize),
}

impl LeakageSelector {
    pub fn leak(
        &self,
        noisy: &[RealityRecord],
        active: &[PartyId],
        shared: &[(PartyId, u64)],
    ) -> LeakView {
        let counts = (noisy.len(), active.len(), shared.len());
        match self {
            Self::StripSec => LeakView {
                records: noisy
                    .iter()
                    .map(|r| RealityRecord {
                        sec: None,
                        ..r.clone()
                    })
                    .collect(),
                active: active.to_vec(),
                shared: shared.to_vec(),
                counts,
            },
            Self::CountsOnly => LeakView {
                records: vec![],
                active: vec![],
                shared: vec![],
                counts,
            },
        }
    }
}
