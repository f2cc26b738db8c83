use std::collections::{BTreeMap, BTreeSet};

use zeroize::Zeroize;

use super::{Analysis, AuthDisclosure, EnError, EnParams, ExposureService, FEn};
use crate::fesr::{FeBackend, FesrError};
use crate::func::{
    aggs_count_frame, aggs_data_frame, le_integer, Descriptor, FunctionSpec, Output,
};
use crate::ids::{Handle, PartyId, Role};
use crate::setups::BulletinBoard;
use crate::world::{Caller, ErrorFunction, FakingFunction, Functionality, Reality};

#[derive(Debug, Clone)]
struct AnalystEntry {
    /// Number of bulletin-board handles already decrypted.
    cursor: usize,
}

/// The protocol. Users upload their SEC history encrypted under the FE
/// scheme; analysts decrypt the uploads under `AggS[α]`.
pub struct GlassVault<B> {
    en: FEn,
    backend: B,
    tbb: BulletinBoard,
    analysts: BTreeMap<(Descriptor, PartyId), AnalystEntry>,
    analyst_setup: BTreeSet<PartyId>,
    accepts: BTreeMap<PartyId, BTreeMap<(Descriptor, PartyId), FunctionSpec>>,
    last_upload_erased: Option<bool>,
}

impl<B: FeBackend> GlassVault<B> {
    pub fn new(params: EnParams, backend: B) -> Self {
        Self {
            en: FEn::new(params),
            backend,
            tbb: BulletinBoard::new(),
            analysts: BTreeMap::new(),
            analyst_setup: BTreeSet::new(),
            accepts: BTreeMap::new(),
            last_upload_erased: None,
        }
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn bulletin_board(&self) -> &BulletinBoard {
        &self.tbb
    }

    /// Whether the plaintext buffers of the most recent upload were all
    /// zero after erasure.
    pub fn last_upload_erased(&self) -> Option<bool> {
        self.last_upload_erased
    }

    fn upload(&mut self, u: &PartyId, reality: &Reality, now: u64) -> Result<Handle, EnError> {
        self.backend.setup(u, Role::A)?;
        let client = Caller::Functionality(Functionality::GlassVaultClient);
        let mut sec = reality.sec_history(&client, u, now)?.encode();
        let mut frame = aggs_data_frame(&sec);
        let encryptors = self.backend.encryptor_count();
        let shared = self.en.shared().len();
        if encryptors != shared {
            return Err(EnError::ThresholdBasisMismatch { encryptors, shared });
        }
        let k = self.en.params().threshold.required(encryptors) as i64;
        let h = self.backend.encrypt(u, &frame, k);
        sec.as_mut_slice().zeroize();
        frame.as_mut_slice().zeroize();
        self.last_upload_erased = Some(sec.iter().chain(&frame).all(|&b| b == 0));
        Ok(h?)
    }

    fn entry_key(analyst: &PartyId, alpha: &FunctionSpec) -> (Descriptor, PartyId) {
        (alpha.descriptor(), analyst.clone())
    }
}

impl<B: FeBackend> ExposureService for GlassVault<B> {
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
        self.en.share_exposure(u, reality, now)?;
        let h = self.upload(u, reality, now)?;
        if !self.tbb.add(u, h, reality) {
            return Err(EnError::TbbRejected(u.clone()));
        }
        Ok(())
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
        if !self.analyst_setup.contains(analyst) {
            self.backend.setup(analyst, Role::B)?;
            self.analyst_setup.insert(analyst.clone());
        }
        self.analysts
            .entry(Self::entry_key(analyst, alpha))
            .or_insert(AnalystEntry { cursor: 0 });
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
        let key = Self::entry_key(analyst, alpha);
        if !self.analysts.contains_key(&key) {
            return Err(EnError::NotRegistered {
                analyst: analyst.clone(),
                alpha: alpha.descriptor(),
            });
        }
        self.backend
            .keysharegen(u, &FunctionSpec::aggs(alpha.clone()), analyst);
        self.accepts
            .entry(u.clone())
            .or_default()
            .insert(key, alpha.clone());
        Ok(())
    }

    fn analyse(
        &mut self,
        analyst: &PartyId,
        alpha: &FunctionSpec,
        _reality: &Reality,
        _now: u64,
    ) -> Result<Analysis, EnError> {
        let key = Self::entry_key(analyst, alpha);
        let cursor = self
            .analysts
            .get(&key)
            .ok_or_else(|| EnError::NotRegistered {
                analyst: analyst.clone(),
                alpha: alpha.descriptor(),
            })?
            .cursor;
        let handles = self.tbb.retrieve();
        let fresh = &handles[cursor..];
        let f = FunctionSpec::aggs(alpha.clone());
        let h_n = self
            .backend
            .encrypt(analyst, &aggs_count_frame(fresh.len() as u64), 0)?;
        let mut last = self.backend.decrypt(analyst, &f, h_n)?;
        if !fresh.is_empty() && last.value().map(le_integer) != Some(fresh.len() as u64) {
            return Err(EnError::Protocol(format!("count echo {last:?}")));
        }
        for h in fresh {
            match self.backend.decrypt(analyst, &f, *h) {
                Ok(y) => last = y,
                Err(FesrError::PolicyUnsatisfied { have, need }) => {
                    log::info!(
                        "{analyst} gated on {}: {have} of {need} authorizations",
                        alpha.label()
                    );
                    return Ok(Analysis::Gated);
                }
                Err(e) => return Err(e.into()),
            }
        }
        let Output::Value(y) = last else {
            return Err(EnError::Protocol("batch did not complete".into()));
        };
        self.analysts.get_mut(&key).expect("looked up above").cursor = handles.len();
        Ok(Analysis::Value(y))
    }

    fn corrupt(&mut self, u: &PartyId) -> AuthDisclosure {
        self.en.corrupt(u);
        self.backend.corrupt(u);
        let accepted = self.accepts.get(u).cloned().unwrap_or_default();
        // the adversary re-issues every share the user gave before corruption
        for ((_, analyst), alpha) in &accepted {
            self.backend
                .keysharegen(u, &FunctionSpec::aggs(alpha.clone()), analyst);
        }
        accepted.into_keys().collect()
    }

    fn fake_reality(&mut self, phi: &FakingFunction) -> bool {
        self.en.fake_reality(phi)
    }
}
