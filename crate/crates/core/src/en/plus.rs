use std::collections::{BTreeMap, BTreeSet};

use super::{Analysis, AuthDisclosure, EnError, EnParams, ExposureService, FEn};
use crate::func::{Descriptor, FunctionSpec, FunctionState};
use crate::ids::PartyId;
use crate::rng::{self, SimRng};
use crate::world::{ErrorFunction, FakingFunction, Reality};

#[derive(Debug, Clone)]
struct Registration {
    authorized: Vec<PartyId>,
    state: FunctionState,
    rng: SimRng,
    /// Number of shared users already fed to the analysis.
    cursor: usize,
}

/// The ideal functionality: evaluates analyses directly on the noisy SEC
/// records of users who shared exposure.
#[derive(Debug, Clone)]
pub struct FEnPlus {
    en: FEn,
    seed: u64,
    registrations: BTreeMap<(Descriptor, PartyId), Registration>,
}

impl FEnPlus {
    pub fn new(params: EnParams, seed: u64) -> Self {
        Self {
            en: FEn::new(params),
            seed,
            registrations: BTreeMap::new(),
        }
    }

    /// Analysis state held for `analyst`.
    pub fn analysis_state(
        &self,
        analyst: &PartyId,
        alpha: &FunctionSpec,
    ) -> Option<&FunctionState> {
        self.registrations
            .get(&(alpha.descriptor(), analyst.clone()))
            .map(|r| &r.state)
    }

    pub fn authorizations(&self, analyst: &PartyId, alpha: &FunctionSpec) -> usize {
        self.registrations
            .get(&(alpha.descriptor(), analyst.clone()))
            .map_or(0, |r| r.authorized.iter().collect::<BTreeSet<_>>().len())
    }
}

impl ExposureService for FEnPlus {
    fn en(&self) -> &FEn {
        &self.en
    }

    fn setup(&mut self, errfn: ErrorFunction) -> Result<(), EnError> {
        self.en.setup(errfn)
    }

    fn activate(&mut self, u: &PartyId) {
        self.en.activate(u);
    }

    fn remove(&mut self, u: &PartyId) {
        self.en.remove(u);
    }

    fn share_exposure(&mut self, u: &PartyId, reality: &Reality, now: u64) -> Result<(), EnError> {
        self.en.share_exposure(u, reality, now)
    }

    fn exposure_check(&mut self, u: &PartyId, reality: &Reality, now: u64) -> Result<u64, EnError> {
        self.en.exposure_check(u, reality, now)
    }

    fn register_analyst(
        &mut self,
        analyst: &PartyId,
        alpha: &FunctionSpec,
    ) -> Result<Vec<PartyId>, EnError> {
        if !self.en.params().allows(alpha) {
            return Ok(vec![]);
        }
        let seed = self.seed;
        // the stream matches the one the protocol's enclave draws from
        let wrapped = FunctionSpec::aggs(alpha.clone()).descriptor();
        self.registrations
            .entry((alpha.descriptor(), analyst.clone()))
            .or_insert_with(|| Registration {
                authorized: vec![],
                state: FunctionState::default(),
                rng: rng::function_stream(seed, analyst.as_str(), &wrapped.0),
                cursor: 0,
            });
        Ok(self.en.shared().iter().map(|(u, _)| u.clone()).collect())
    }

    fn accept(
        &mut self,
        u: &PartyId,
        alpha: &FunctionSpec,
        analyst: &PartyId,
    ) -> Result<(), EnError> {
        if !self.en.has_shared(u) {
            return Err(EnError::NotShared(u.clone()));
        }
        let reg = self
            .registrations
            .get_mut(&(alpha.descriptor(), analyst.clone()))
            .ok_or_else(|| EnError::NotRegistered {
                analyst: analyst.clone(),
                alpha: alpha.descriptor(),
            })?;
        reg.authorized.push(u.clone());
        Ok(())
    }

    fn analyse(
        &mut self,
        analyst: &PartyId,
        alpha: &FunctionSpec,
        _reality: &Reality,
        _now: u64,
    ) -> Result<Analysis, EnError> {
        let key = (alpha.descriptor(), analyst.clone());
        let have = self.authorizations(analyst, alpha) as u64;
        let reg = self
            .registrations
            .get(&key)
            .ok_or_else(|| EnError::NotRegistered {
                analyst: analyst.clone(),
                alpha: alpha.descriptor(),
            })?;
        let shared = self.en.shared();
        let need = self.en.params().threshold.required(shared.len());
        if have < need {
            log::info!(
                "{analyst} gated on {}: {have} of {need} authorizations",
                alpha.label()
            );
            return Ok(Analysis::Gated);
        }
        let inputs: Vec<Vec<u8>> = shared[reg.cursor..]
            .iter()
            .map(|(u, t)| self.en.sec_history(u, *t).encode())
            .collect();
        let mut r = reg.rng.clone();
        let (y, next) = alpha.evaluate_list(&inputs, &reg.state, &mut r)?;
        let cursor = shared.len();
        let reg = self.registrations.get_mut(&key).expect("looked up above");
        reg.state = next;
        reg.rng = r;
        reg.cursor = cursor;
        Ok(Analysis::Value(y))
    }

    fn corrupt(&mut self, u: &PartyId) -> AuthDisclosure {
        self.en.corrupt(u);
        self.registrations
            .iter()
            .filter(|(_, r)| r.authorized.contains(u))
            .map(|(k, _)| k.clone())
            .collect()
    }

    fn fake_reality(&mut self, phi: &FakingFunction) -> bool {
        self.en.fake_reality(phi)
    }
}
