//! Exposure notification with analyst access to shared sensitive data.
//!
//! [`FEnPlus`] is the ideal functionality; [`GlassVault`] is the protocol,
//! built from [`FEn`], a bulletin board and any [`FeBackend`].

mod fen;
mod glass;
mod params;
mod plus;

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fesr::FesrError;
use crate::func::{Descriptor, FunctionError, FunctionSpec};
use crate::ids::PartyId;
use crate::world::{ErrorFunction, FakingFunction, LeakView, Reality, WorldError};

pub use fen::{default_risk, FEn};
pub use glass::GlassVault;
pub use params::{EnParams, RiskParams, ThresholdPolicy};
pub use plus::FEnPlus;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnError {
    #[error("error function not in the allowed set")]
    ErrorFunctionNotAllowed,
    #[error("{0} is not infected")]
    NotInfected(PartyId),
    #[error("{0} already shared exposure")]
    AlreadyShared(PartyId),
    #[error("{0} is not an active user")]
    NotActive(PartyId),
    #[error("{0} has not shared exposure")]
    NotShared(PartyId),
    #[error("{analyst} is not registered for {alpha}")]
    NotRegistered { analyst: PartyId, alpha: Descriptor },
    #[error("bulletin board rejected the upload of {0}")]
    TbbRejected(PartyId),
    #[error("{encryptors} encryptors but {shared} shared users")]
    ThresholdBasisMismatch { encryptors: usize, shared: usize },
    #[error("unexpected analysis output")]
    Protocol(String),
    #[error(transparent)]
    Fesr(#[from] FesrError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Function(#[from] FunctionError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Analysis {
    Value(Vec<u8>),
    /// Too few users authorized this analyst.
    Gated,
}

/// `(α, analyst)` pairs a corrupted user had authorized.
pub type AuthDisclosure = BTreeSet<(Descriptor, PartyId)>;

/// Operations shared by the ideal functionality and the protocol.
pub trait ExposureService {
    fn en(&self) -> &FEn;

    fn setup(&mut self, errfn: ErrorFunction) -> Result<(), EnError>;

    fn activate(&mut self, u: &PartyId);

    fn remove(&mut self, u: &PartyId);

    fn share_exposure(&mut self, u: &PartyId, reality: &Reality, now: u64) -> Result<(), EnError>;

    fn exposure_check(&mut self, u: &PartyId, reality: &Reality, now: u64) -> Result<u64, EnError>;

    /// Returns the users who receive an authorization request. Functions
    /// outside the allowed set are ignored.
    fn register_analyst(
        &mut self,
        analyst: &PartyId,
        alpha: &FunctionSpec,
    ) -> Result<Vec<PartyId>, EnError>;

    fn accept(
        &mut self,
        u: &PartyId,
        alpha: &FunctionSpec,
        analyst: &PartyId,
    ) -> Result<(), EnError>;

    /// Runs `alpha` over the uploads made since this analyst's last
    /// successful analysis.
    fn analyse(
        &mut self,
        analyst: &PartyId,
        alpha: &FunctionSpec,
        reality: &Reality,
        now: u64,
    ) -> Result<Analysis, EnError>;

    fn corrupt(&mut self, u: &PartyId) -> AuthDisclosure;

    fn fake_reality(&mut self, phi: &FakingFunction) -> bool;

    fn leak(&self) -> LeakView {
        self.en().leak()
    }
}
