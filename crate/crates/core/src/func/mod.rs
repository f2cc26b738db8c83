//! Stateful randomized functions `F(x, s; r) -> (y, s')`, their canonical
//! descriptors, the length leakage `f0`, and the multi-input compilers.

mod agg;
mod state;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agg::{aggs_count_frame, aggs_data_frame, AggsFrame};
pub use state::FunctionState;

use crate::codec::{CodecError, Writer};
use crate::crypto::hash_parts;
use crate::heatmap::{
    self, HeatmapError, HeatmapParams, HeatmapState, MalformedPolicy, UserMatrix,
};
use crate::rng::SimRng;
use crate::world::SecHistory;

/// 32-byte function identifier used on the wire, in signatures and in enclave
/// program names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Descriptor(pub [u8; 32]);

impl Descriptor {
    /// Reserved tag for the length leakage function.
    pub const F0: Descriptor = Descriptor([0; 32]);
}

impl std::fmt::Display for Descriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// What one evaluation hands back to the decryptor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Output {
    /// The empty value returned while a batch is still filling.
    Pending,
    Value(Vec<u8>),
}

impl Output {
    pub fn value(&self) -> Option<&[u8]> {
        match self {
            Self::Pending => None,
            Self::Value(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FunctionError {
    #[error("unknown function {0:?}")]
    UnknownFunction(String),
    #[error("batch size expected before data")]
    RejectInit,
    #[error("{0} cannot be used as a multi-input inner function")]
    NotMultiInput(&'static str),
    #[error("heatmap: {0}")]
    Heatmap(#[from] HeatmapError),
    #[error("state encoding: {0}")]
    State(#[from] CodecError),
}

pub type Evaluation = Result<(Output, FunctionState), FunctionError>;

/// The length leakage.
pub fn f0(x: &[u8]) -> u64 {
    x.len() as u64
}

/// Little-endian integer in the first 8 bytes of `x`, zero-padded.
pub fn le_integer(x: &[u8]) -> u64 {
    let mut b = [0u8; 8];
    let n = x.len().min(8);
    b[..n].copy_from_slice(&x[..n]);
    u64::from_le_bytes(b)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FunctionSpec {
    F0,
    ByteSum,
    IntegerSum,
    ByteConcatLength,
    RunningTotal,
    CoinFlip,
    Heatmap(HeatmapParams),
    Agg {
        inner: Box<FunctionSpec>,
        arity: u32,
    },
    AggS(Box<FunctionSpec>),
}

const TOTAL_KEY: &str = "total";
const HEATMAP_KEY: &str = "heatmap.m";

impl FunctionSpec {
    pub fn agg(inner: FunctionSpec, arity: u32) -> Self {
        assert!(arity >= 1, "aggregation arity must be at least 1");
        Self::Agg {
            inner: Box::new(inner),
            arity,
        }
    }

    pub fn aggs(inner: FunctionSpec) -> Self {
        Self::AggS(Box::new(inner))
    }

    /// Looks up a registered built-in by its scenario name.
    pub fn by_name(name: &str, heatmap: &HeatmapParams) -> Result<Self, FunctionError> {
        Ok(match name {
            "f0" => Self::F0,
            "byte-sum" => Self::ByteSum,
            "integer-sum" => Self::IntegerSum,
            "byte-concat-length" => Self::ByteConcatLength,
            "running-total" => Self::RunningTotal,
            "coin-flip" => Self::CoinFlip,
            "heatmap" => Self::Heatmap(*heatmap),
            other => return Err(FunctionError::UnknownFunction(other.to_owned())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::F0 => "f0",
            Self::ByteSum => "byte-sum",
            Self::IntegerSum => "integer-sum",
            Self::ByteConcatLength => "byte-concat-length",
            Self::RunningTotal => "running-total",
            Self::CoinFlip => "coin-flip",
            Self::Heatmap(_) => "heatmap",
            Self::Agg { .. } => "agg",
            Self::AggS(_) => "aggs",
        }
    }

    pub fn is_f0(&self) -> bool {
        matches!(self, Self::F0)
    }

    /// `name || parameter block`.
    pub fn canonical_encoding(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.str(self.name());
        match self {
            Self::Heatmap(p) => {
                w.u32(p.cells).u32(p.min_users).u32(p.days).u32(p.home_cell);
            }
            Self::Agg { inner, arity } => {
                w.bytes(&inner.canonical_encoding()).u32(*arity);
            }
            Self::AggS(inner) => {
                w.bytes(&inner.canonical_encoding());
            }
            _ => {}
        }
        w.finish()
    }

    pub fn descriptor(&self) -> Descriptor {
        if self.is_f0() {
            return Descriptor::F0;
        }
        Descriptor(hash_parts(
            "glassvault/function/v1",
            &[&self.canonical_encoding()],
        ))
    }

    /// Human-readable label for logs and transcripts.
    pub fn label(&self) -> String {
        match self {
            Self::Agg { inner, arity } => format!("agg({},{arity})", inner.label()),
            Self::AggS(inner) => format!("aggs({})", inner.label()),
            other => other.name().to_owned(),
        }
    }

    /// Single-input evaluation.
    pub fn evaluate(&self, x: &[u8], s: &FunctionState, rng: &mut SimRng) -> Evaluation {
        match self {
            Self::Agg { inner, arity } => agg::agg_step(inner, *arity, x, s, rng),
            Self::AggS(inner) => agg::aggs_step(inner, x, s, rng),
            _ => {
                let (y, s) = self.evaluate_list(&[x.to_vec()], s, rng)?;
                Ok((Output::Value(y), s))
            }
        }
    }

    /// Variable-arity evaluation used inside the compilers.
    pub fn evaluate_list(
        &self,
        xs: &[Vec<u8>],
        s: &FunctionState,
        rng: &mut SimRng,
    ) -> Result<(Vec<u8>, FunctionState), FunctionError> {
        let le = |v: u64| v.to_le_bytes().to_vec();
        match self {
            Self::F0 => Ok((le(xs.iter().map(|x| f0(x)).sum()), s.clone())),
            Self::ByteSum => {
                let total = xs.iter().flatten().map(|&b| u64::from(b)).sum();
                Ok((le(total), s.clone()))
            }
            Self::IntegerSum => {
                let total = xs
                    .iter()
                    .fold(0u64, |acc, x| acc.wrapping_add(le_integer(x)));
                Ok((le(total), s.clone()))
            }
            Self::ByteConcatLength => {
                let total: usize = xs.iter().map(Vec::len).sum();
                let mut out = le(total as u64);
                out.extend(xs.iter().flatten());
                Ok((out, s.clone()))
            }
            Self::RunningTotal => {
                let prev = s.get(TOTAL_KEY).map(le_integer).unwrap_or(0);
                let total = xs
                    .iter()
                    .fold(prev, |acc, x| acc.wrapping_add(le_integer(x)));
                let mut next = s.clone();
                next.insert(TOTAL_KEY, le(total));
                Ok((le(total), next))
            }
            Self::CoinFlip => {
                let flips = xs.iter().map(|_| (rng.next_u32() & 1) as u8).collect();
                Ok((flips, s.clone()))
            }
            Self::Heatmap(p) => heatmap_list(p, xs, s),
            Self::Agg { .. } | Self::AggS(_) => Err(FunctionError::NotMultiInput(self.name())),
        }
    }
}

fn heatmap_list(
    p: &HeatmapParams,
    xs: &[Vec<u8>],
    s: &FunctionState,
) -> Result<(Vec<u8>, FunctionState), FunctionError> {
    let matrices: Vec<UserMatrix> = xs
        .iter()
        .map(|x| {
            SecHistory::decode(x)
                .ok()
                .and_then(|h| heatmap::encode_sec_history(&h, p).ok())
                // an undecodable upload becomes a matrix the validator rejects
                .unwrap_or(UserMatrix { rows: vec![] })
        })
        .collect();
    let prior = match s.get(HEATMAP_KEY) {
        Some(b) => HeatmapState::decode(b)?,
        None => HeatmapState::default(),
    };
    let step = heatmap::heatmap_step(&matrices, &prior, p, MalformedPolicy::RejectIndividually)?;
    if !step.rejected.is_empty() {
        log::warn!("heatmap rejected inputs {:?}", step.rejected);
    }
    let mut next = s.clone();
    next.insert(HEATMAP_KEY, step.state.encode());
    Ok((heatmap::encode_output(&step.output), next))
}

/// Reads the heatmap buffers out of a function state, looking through any
/// compiler wrapping. Used for state introspection in tests and the driver.
pub fn heatmap_state_of(s: &FunctionState) -> Result<HeatmapState, FunctionError> {
    let inner = agg::inner_state(s)?;
    let s = inner.as_ref().unwrap_or(s);
    Ok(match s.get(HEATMAP_KEY) {
        Some(b) => HeatmapState::decode(b)?,
        None => HeatmapState::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn eval(f: &FunctionSpec, x: &[u8]) -> Vec<u8> {
        let (y, _) = f
            .evaluate(x, &FunctionState::default(), &mut rng::from_seed(0))
            .unwrap();
        y.value().unwrap().to_vec()
    }

    #[test]
    fn f0_is_length() {
        assert_eq!(f0(b""), 0);
        assert_eq!(f0(&[1; 5]), 5);
        assert_eq!(f0(&[0; 4096]), 4096);
        assert_eq!(eval(&FunctionSpec::F0, b"hello"), 5u64.to_le_bytes());
    }

    #[test]
    fn byte_sum_of_one_two_three() {
        assert_eq!(eval(&FunctionSpec::ByteSum, &[1, 2, 3]), 6u64.to_le_bytes());
    }

    #[test]
    fn running_total_threads_state() {
        let f = FunctionSpec::RunningTotal;
        let mut r = rng::from_seed(0);
        let (_, s) = f
            .evaluate(&5u64.to_le_bytes(), &FunctionState::default(), &mut r)
            .unwrap();
        let (y, _) = f.evaluate(&7u64.to_le_bytes(), &s, &mut r).unwrap();
        assert_eq!(y, Output::Value(12u64.to_le_bytes().to_vec()));
    }

    #[test]
    fn coin_flip_follows_stream() {
        let f = FunctionSpec::CoinFlip;
        let a = f
            .evaluate(b"x", &FunctionState::default(), &mut rng::from_seed(3))
            .unwrap();
        let b = f
            .evaluate(b"x", &FunctionState::default(), &mut rng::from_seed(3))
            .unwrap();
        assert_eq!(a, b);
        assert!(matches!(&a.0, Output::Value(v) if v.len() == 1 && v[0] <= 1));
    }

    #[test]
    fn descriptors() {
        let hp = |q| HeatmapParams::new(4, q, 3).unwrap();
        assert_eq!(
            FunctionSpec::Heatmap(hp(2)).descriptor(),
            FunctionSpec::Heatmap(hp(2)).descriptor()
        );
        assert_ne!(
            FunctionSpec::Heatmap(hp(2)).descriptor(),
            FunctionSpec::Heatmap(hp(3)).descriptor()
        );
        assert_eq!(FunctionSpec::F0.descriptor(), Descriptor::F0);
        assert_ne!(FunctionSpec::IntegerSum.descriptor(), Descriptor::F0);
        assert_ne!(
            FunctionSpec::aggs(FunctionSpec::IntegerSum).descriptor(),
            FunctionSpec::IntegerSum.descriptor()
        );
    }

    #[test]
    fn unknown_name() {
        let hp = HeatmapParams::new(1, 1, 1).unwrap();
        assert_eq!(
            FunctionSpec::by_name("nope", &hp),
            Err(FunctionError::UnknownFunction("nope".into()))
        );
        assert_eq!(
            FunctionSpec::by_name("heatmap", &hp),
            Ok(FunctionSpec::Heatmap(hp))
        );
    }

    #[test]
    fn integer_sum_pads_short_inputs() {
        assert_eq!(le_integer(&[1]), 1);
        assert_eq!(le_integer(&[0, 1]), 256);
        assert_eq!(le_integer(&[1, 0, 0, 0, 0, 0, 0, 0, 9]), 1);
    }
}
