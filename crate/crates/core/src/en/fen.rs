use std::collections::BTreeSet;

use super::{EnError, EnParams};
use crate::ids::PartyId;
use crate::world::{
    Caller, ErrorFunction, FakingFunction, Field, Functionality, LeakView, Reality, RealityRecord,
    SecHistory,
};

/// Exposure notification core: the noisy view of reality, the active users
/// and the list of users who shared exposure.
#[derive(Debug, Clone)]
pub struct FEn {
    params: EnParams,
    errfn: ErrorFunction,
    noisy: Vec<RealityRecord>,
    /// How much of the ground-truth store has been pulled into `noisy`.
    ingested: usize,
    active: Vec<PartyId>,
    shared: Vec<(PartyId, u64)>,
    corrupted: BTreeSet<PartyId>,
}

fn caller() -> Caller {
    Caller::Functionality(Functionality::ExposureNotification)
}

impl FEn {
    pub fn new(params: EnParams) -> Self {
        Self {
            params,
            errfn: ErrorFunction::Identity,
            noisy: vec![],
            ingested: 0,
            active: vec![],
            shared: vec![],
            corrupted: BTreeSet::new(),
        }
    }

    pub fn params(&self) -> &EnParams {
        &self.params
    }

    pub fn noisy(&self) -> &[RealityRecord] {
        &self.noisy
    }

    pub fn active(&self) -> &[PartyId] {
        &self.active
    }

    pub fn shared(&self) -> &[(PartyId, u64)] {
        &self.shared
    }

    pub fn has_shared(&self, u: &PartyId) -> bool {
        self.shared.iter().any(|(v, _)| v == u)
    }

    pub fn is_corrupt(&self, u: &PartyId) -> bool {
        self.corrupted.contains(u)
    }

    pub fn setup(&mut self, errfn: ErrorFunction) -> Result<(), EnError> {
        if !self.params.errors.contains(&errfn) {
            return Err(EnError::ErrorFunctionNotAllowed);
        }
        self.errfn = errfn;
        self.noisy.clear();
        self.ingested = 0;
        Ok(())
    }

    fn refresh(&mut self, reality: &Reality) -> Result<(), EnError> {
        let fresh = reality.meas_since(&caller(), self.ingested, &self.errfn)?;
        self.ingested += fresh.len();
        self.noisy.extend(fresh);
        Ok(())
    }

    pub fn activate(&mut self, u: &PartyId) {
        if !self.active.contains(u) && !self.has_shared(u) {
            self.active.push(u.clone());
        }
    }

    pub fn remove(&mut self, u: &PartyId) {
        self.active.retain(|v| v != u);
    }

    fn infected(&self, u: &PartyId) -> bool {
        self.noisy
            .iter()
            .rev()
            .filter(|r| &r.user == u)
            .find_map(|r| r.infected)
            == Some(true)
    }

    /// Records `u` as having shared at `now` if the noisy view says `u` is
    /// infected.
    pub fn share_exposure(
        &mut self,
        u: &PartyId,
        reality: &Reality,
        now: u64,
    ) -> Result<(), EnError> {
        self.refresh(reality)?;
        if self.has_shared(u) {
            return Err(EnError::AlreadyShared(u.clone()));
        }
        if !self.infected(u) {
            return Err(EnError::NotInfected(u.clone()));
        }
        self.shared.push((u.clone(), now));
        self.remove(u);
        Ok(())
    }

    pub fn exposure_check(
        &mut self,
        u: &PartyId,
        reality: &Reality,
        now: u64,
    ) -> Result<u64, EnError> {
        if !self.active.contains(u) {
            return Err(EnError::NotActive(u.clone()));
        }
        self.refresh(reality)?;
        let exposed: BTreeSet<&PartyId> = self
            .shared
            .iter()
            .map(|(v, _)| v)
            .filter(|v| *v != u)
            .collect();
        let mu = self
            .noisy
            .iter()
            .filter(|r| &r.user == u || exposed.contains(&r.user));
        Ok(default_risk(
            u,
            &exposed,
            mu,
            now,
            self.params.risk.d_max,
            self.params.risk.tau,
        ))
    }

    pub fn fake_reality(&mut self, phi: &FakingFunction) -> bool {
        if !self.params.faking.contains(phi) {
            return false;
        }
        self.noisy = phi.apply(&self.noisy);
        true
    }

    pub fn leak(&self) -> LeakView {
        self.params
            .leakage
            .leak(&self.noisy, &self.active, &self.shared)
    }

    pub fn corrupt(&mut self, u: &PartyId) {
        self.corrupted.insert(u.clone());
    }

    /// Measurement passthrough available for corrupted users only.
    pub fn my_current_meas(
        &self,
        u: &PartyId,
        fields: &[Field],
        errfn: &ErrorFunction,
        reality: &Reality,
    ) -> Option<RealityRecord> {
        if !self.is_corrupt(u) {
            return None;
        }
        reality
            .my_current_meas(&Caller::User(u.clone()), u, fields, errfn)
            .ok()
    }

    /// `u`'s SEC samples in the noisy view up to `tick`.
    pub fn sec_history(&self, u: &PartyId, tick: u64) -> SecHistory {
        SecHistory {
            as_of_tick: tick,
            samples: self
                .noisy
                .iter()
                .filter(|r| &r.user == u && r.time <= tick)
                .filter_map(|r| r.sec.map(|s| (r.time, s)))
                .collect(),
        }
    }
}

/// Number of ticks in `[now - tau, now]` with a record placing `u` within
/// `d_max` of an exposed user, as reported by either side.
pub fn default_risk<'a>(
    u: &PartyId,
    exposed: &BTreeSet<&PartyId>,
    mu: impl Iterator<Item = &'a RealityRecord>,
    now: u64,
    d_max: f64,
    tau: u64,
) -> u64 {
    let from = now.saturating_sub(tau);
    let close = |r: &RealityRecord, peer: &PartyId| r.dist.get(peer).is_some_and(|&d| d <= d_max);
    mu.filter(|r| (from..=now).contains(&r.time))
        .filter(|r| {
            if &r.user == u {
                exposed.iter().any(|v| close(r, v))
            } else {
                close(r, u)
            }
        })
        .map(|r| r.time)
        .collect::<BTreeSet<_>>()
        .len() as u64
}
