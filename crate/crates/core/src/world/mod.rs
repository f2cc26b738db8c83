//! Scripted ground truth: the global clock and the physical-reality record
//! store that the exposure-notification layer measures.

mod clock;
mod sec;
mod transforms;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use clock::Clock;
pub use sec::{SecHistory, SensitiveData};
pub use transforms::{
    ErrorFunction, ErrorSet, FakingFunction, FakingKind, FakingSet, LeakView, LeakageSelector,
};

use crate::ids::PartyId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealityRecord {
    pub user: PartyId,
    pub time: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub dist: BTreeMap<PartyId, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infected: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sec: Option<SensitiveData>,
}

impl RealityRecord {
    pub fn empty(user: PartyId, time: u64) -> Self {
        Self {
            user,
            time,
            dist: BTreeMap::new(),
            tp: None,
            infected: None,
            sec: None,
        }
    }

    /// Keeps only the requested fields.
    pub fn restrict(&self, fields: &[Field]) -> Self {
        let mut out = Self::empty(self.user.clone(), self.time);
        for f in fields {
            match f {
                Field::Dist => out.dist = self.dist.clone(),
                Field::Tp => out.tp = self.tp,
                Field::Infected => out.infected = self.infected,
                Field::Sec => out.sec = self.sec,
            }
        }
        out
    }

    fn has(&self, f: Field) -> bool {
        match f {
            Field::Dist => !self.dist.is_empty(),
            Field::Tp => self.tp.is_some(),
            Field::Infected => self.infected.is_some(),
            Field::Sec => self.sec.is_some(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Dist,
    Tp,
    Infected,
    Sec,
}

impl Field {
    pub const PUBLIC: [Field; 3] = [Field::Dist, Field::Tp, Field::Infected];
}

/// Ideal functionalities with full read access to the record store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Functionality {
    ExposureNotification,
    BulletinBoard,
    /// The on-device client that uploads a user's own SEC on sharing.
    GlassVaultClient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Caller {
    User(PartyId),
    Functionality(Functionality),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("validation failed at tick {tick} for {user}: {reason}")]
    ValidationHalt {
        tick: u64,
        user: PartyId,
        reason: String,
    },
    #[error("reality has halted")]
    Halted,
    #[error("caller may not read the requested fields")]
    FieldDenied,
    #[error("caller may not read this record")]
    Denied,
    #[error("no measurement for {0}")]
    NoMeasurement(PartyId),
}

/// The default well-formedness predicate over incoming records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Validator {
    /// Relative tolerance between `dist[a→b]` and `dist[b→a]` in one tick.
    pub symmetry_tolerance: f64,
    /// Meters a single party can move per tick.
    pub max_speed: f64,
}

impl Default for Validator {
    fn default() -> Self {
        Self {
            symmetry_tolerance: 0.10,
            max_speed: 1000.0,
        }
    }
}

impl Validator {
    fn check(&self, store: &[RealityRecord], r: &RealityRecord) -> Result<(), String> {
        for (peer, &d) in &r.dist {
            if !d.is_finite() || d < 0.0 {
                return Err(format!("distance to {peer} is {d}"));
            }
            let mirror = store
                .iter()
                .rev()
                .find(|o| &o.user == peer && o.time == r.time)
                .and_then(|o| o.dist.get(&r.user));
            if let Some(&back) = mirror {
                if (d - back).abs() > self.symmetry_tolerance * d.max(back) {
                    return Err(format!("asymmetric distance to {peer}: {d} vs {back}"));
                }
            }
            let previous = store
                .iter()
                .rev()
                .filter(|o| o.user == r.user && o.time < r.time)
                .find_map(|o| o.dist.get(peer).map(|&p| (o.time, p)));
            if let Some((t0, p)) = previous {
                let limit = 2.0 * self.max_speed * (r.time - t0) as f64;
                if (d - p).abs() > limit {
                    return Err(format!("distance to {peer} jumped from {p} to {d}"));
                }
            }
        }
        Ok(())
    }
}

/// Ground-truth record store. Append-only.
#[derive(Debug, Clone)]
pub struct Reality {
    records: Vec<RealityRecord>,
    validator: Validator,
    privileged: BTreeSet<Functionality>,
    halted: bool,
}

impl Default for Reality {
    fn default() -> Self {
        Self::new(Validator::default())
    }
}

impl Reality {
    pub fn new(validator: Validator) -> Self {
        Self {
            records: Vec::new(),
            validator,
            privileged: [
                Functionality::ExposureNotification,
                Functionality::BulletinBoard,
                Functionality::GlassVaultClient,
            ]
            .into(),
            halted: false,
        }
    }

    pub fn with_privileged(mut self, set: impl IntoIterator<Item = Functionality>) -> Self {
        self.privileged = set.into_iter().collect();
        self
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_halted(&self) -> bool {
        self.halted
    }

    /// Returns `Ok(false)` for a stale record; a predicate failure halts.
    pub fn input(&mut self, record: RealityRecord, now: u64) -> Result<bool, WorldError> {
        if self.halted {
            return Err(WorldError::Halted);
        }
        if record.time != now {
            return Ok(false);
        }
        if let Err(reason) = self.validator.check(&self.records, &record) {
            self.halted = true;
            return Err(WorldError::ValidationHalt {
                tick: now,
                user: record.user,
                reason,
            });
        }
        self.records.push(record);
        Ok(true)
    }

    fn is_privileged(&self, caller: &Caller) -> bool {
        matches!(caller, Caller::Functionality(f) if self.privileged.contains(f))
    }

    /// Latest value of each requested field for `user`, passed through `errfn`.
    /// Each field is taken from the latest record that carries it.
    pub fn my_current_meas(
        &self,
        caller: &Caller,
        user: &PartyId,
        fields: &[Field],
        errfn: &ErrorFunction,
    ) -> Result<RealityRecord, WorldError> {
        let privileged = self.is_privileged(caller);
        if fields.contains(&Field::Sec) && !privileged {
            return Err(WorldError::FieldDenied);
        }
        if !privileged && *caller != Caller::User(user.clone()) {
            return Err(WorldError::Denied);
        }
        let mine: Vec<&RealityRecord> = self.records.iter().filter(|r| &r.user == user).collect();
        let Some(latest) = mine.last() else {
            return Err(WorldError::NoMeasurement(user.clone()));
        };
        let mut out = RealityRecord::empty(user.clone(), latest.time);
        for &f in fields {
            if let Some(r) = mine.iter().rev().find(|r| r.has(f)) {
                let part = r.restrict(&[f]);
                match f {
                    Field::Dist => out.dist = part.dist,
                    Field::Tp => out.tp = part.tp,
                    Field::Infected => out.infected = part.infected,
                    Field::Sec => out.sec = part.sec,
                }
            }
        }
        Ok(errfn.apply(&out))
    }

    pub fn all_meas(
        &self,
        caller: &Caller,
        errfn: &ErrorFunction,
    ) -> Result<Vec<RealityRecord>, WorldError> {
        if !self.is_privileged(caller) {
            return Err(WorldError::Denied);
        }
        Ok(self.records.iter().map(|r| errfn.apply(r)).collect())
    }

    /// Records from index `from` on, through `errfn`. Privileged only.
    pub fn meas_since(
        &self,
        caller: &Caller,
        from: usize,
        errfn: &ErrorFunction,
    ) -> Result<Vec<RealityRecord>, WorldError> {
        if !self.is_privileged(caller) {
            return Err(WorldError::Denied);
        }
        Ok(self
            .records
            .iter()
            .skip(from)
            .map(|r| errfn.apply(r))
            .collect())
    }

    /// Every SEC sample of `user` up to `now`. Privileged only.
    pub fn sec_history(
        &self,
        caller: &Caller,
        user: &PartyId,
        now: u64,
    ) -> Result<SecHistory, WorldError> {
        if !self.is_privileged(caller) {
            return Err(WorldError::FieldDenied);
        }
        Ok(SecHistory {
            as_of_tick: now,
            samples: self
                .records
                .iter()
                .filter(|r| &r.user == user && r.time <= now)
                .filter_map(|r| r.sec.map(|s| (r.time, s)))
                .collect(),
        })
    }
}
