//! Line-oriented JSON scenarios.
//!
//! The first line is a header:
//! `{"v":1,"seed":7,"params":{...},"users":["u1",...],"analysts":["an"]}`.
//! Every further non-blank line is one event:
//! `{"tick":3,"op":"move","user":"u1","dists":{"u2":1.5}}`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::en::{EnParams, RiskParams, ThresholdPolicy};
use crate::func::FunctionSpec;
use crate::heatmap::HeatmapParams;
use crate::ids::PartyId;
use crate::steel::AUTHORITY;
use crate::world::{
    ErrorFunction, ErrorSet, FakingFunction, FakingSet, LeakageSelector, Validator,
};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unsupported scenario version {0}")]
    Version(u32),
    #[error("scenario file is empty")]
    Empty,
    #[error("line {line}: unknown party {pid}")]
    UnknownParty { line: usize, pid: PartyId },
    #[error("line {line}: tick {tick} is before tick {previous}")]
    TickRegression {
        line: usize,
        tick: u64,
        previous: u64,
    },
    #[error("line {line}: unknown function {name}")]
    UnknownFunction { line: usize, name: String },
    #[error("line {line}: cell {cell} out of range")]
    CellOutOfRange { line: usize, cell: u32 },
    #[error("invalid parameters: {0}")]
    Params(String),
}

fn default_d_max() -> f64 {
    RiskParams::default().d_max
}

fn default_tau() -> u64 {
    RiskParams::default().tau
}

fn default_analyses() -> Vec<String> {
    vec!["heatmap".into()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    pub days: u32,
    pub cells: u32,
    pub q: u32,
    #[serde(default)]
    pub home_cell: u32,
    #[serde(default = "default_d_max")]
    pub d_max: f64,
    #[serde(default = "default_tau")]
    pub tau: u64,
    #[serde(default)]
    pub threshold: ThresholdPolicy,
    #[serde(default = "identity")]
    pub error_function: ErrorFunction,
    #[serde(default)]
    pub error_set: ErrorSet,
    #[serde(default)]
    pub faking_set: FakingSet,
    #[serde(default)]
    pub leakage: LeakageSelector,
    #[serde(default = "default_analyses")]
    pub analyses: Vec<String>,
    #[serde(default)]
    pub strict_shares: bool,
    #[serde(default)]
    pub validator: Validator,
}

fn identity() -> ErrorFunction {
    ErrorFunction::Identity
}

impl ScenarioParams {
    pub fn heatmap(&self) -> HeatmapParams {
        HeatmapParams {
            cells: self.cells,
            min_users: self.q,
            days: self.days,
            home_cell: self.home_cell,
        }
    }

    pub fn function(&self, name: &str) -> Option<FunctionSpec> {
        FunctionSpec::by_name(name, &self.heatmap()).ok()
    }

    pub fn en_params(&self) -> EnParams {
        EnParams {
            risk: RiskParams {
                d_max: self.d_max,
                tau: self.tau,
            },
            threshold: self.threshold,
            errors: self.error_set.clone(),
            faking: self.faking_set.clone(),
            leakage: self.leakage,
            analyses: self
                .analyses
                .iter()
                .filter_map(|n| self.function(n))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Event {
    Move {
        user: PartyId,
        dists: BTreeMap<PartyId, f64>,
    },
    SampleSec {
        user: PartyId,
        cell: u32,
    },
    Infect {
        user: PartyId,
    },
    Activate {
        user: PartyId,
    },
    Remove {
        user: PartyId,
    },
    Share {
        user: PartyId,
    },
    Check {
        user: PartyId,
    },
    Register {
        analyst: PartyId,
        alpha: String,
    },
    Accept {
        user: PartyId,
        alpha: String,
        analyst: PartyId,
    },
    Analyse {
        analyst: PartyId,
        alpha: String,
    },
    Corrupt {
        user: PartyId,
    },
    Fake {
        phi: FakingFunction,
    },
    Leak,
    SetupEn {
        errfn: ErrorFunction,
    },
}

impl Event {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Move { .. } => "move",
            Self::SampleSec { .. } => "sample_sec",
            Self::Infect { .. } => "infect",
            Self::Activate { .. } => "activate",
            Self::Remove { .. } => "remove",
            Self::Share { .. } => "share",
            Self::Check { .. } => "check",
            Self::Register { .. } => "register",
            Self::Accept { .. } => "accept",
            Self::Analyse { .. } => "analyse",
            Self::Corrupt { .. } => "corrupt",
            Self::Fake { .. } => "fake",
            Self::Leak => "leak",
            Self::SetupEn { .. } => "setup_en",
        }
    }

    /// Events that write to the physical-reality store.
    pub fn is_world(&self) -> bool {
        matches!(
            self,
            Self::Move { .. } | Self::SampleSec { .. } | Self::Infect { .. }
        )
    }

    fn parties(&self) -> Vec<&PartyId> {
        match self {
            Self::Move { user, dists } => std::iter::once(user).chain(dists.keys()).collect(),
            Self::SampleSec { user, .. }
            | Self::Infect { user }
            | Self::Activate { user }
            | Self::Remove { user }
            | Self::Share { user }
            | Self::Check { user }
            | Self::Corrupt { user } => vec![user],
            Self::Register { analyst, .. } | Self::Analyse { analyst, .. } => vec![analyst],
            Self::Accept { user, analyst, .. } => vec![user, analyst],
            Self::Fake {
                phi: FakingFunction::MoveUser { user, dists, .. },
            } => std::iter::once(user).chain(dists.keys()).collect(),
            Self::Fake {
                phi: FakingFunction::MarkDistance { from, to, .. },
            } => vec![from, to],
            Self::Leak | Self::SetupEn { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub event: Event,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    v: u32,
    seed: u64,
    params: ScenarioParams,
    users: Vec<PartyId>,
    #[serde(default)]
    analysts: Vec<PartyId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub params: ScenarioParams,
    pub users: Vec<PartyId>,
    pub analysts: Vec<PartyId>,
    pub timeline: Vec<TimedEvent>,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (line, first) = lines.next().ok_or(ScenarioError::Empty)?;
        let header: Header = serde_json::from_str(first).map_err(|e| ScenarioError::Parse {
            line,
            message: e.to_string(),
        })?;
        if header.v != SCENARIO_VERSION {
            return Err(ScenarioError::Version(header.v));
        }
        let mut timeline = vec![];
        let mut numbered = vec![];
        for (line, text) in lines {
            let ev: TimedEvent = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
                line,
                message: e.to_string(),
            })?;
            numbered.push(line);
            timeline.push(ev);
        }
        let s = Self {
            seed: header.seed,
            params: header.params,
            users: header.users,
            analysts: header.analysts,
            timeline,
        };
        s.validate(&numbered)?;
        Ok(s)
    }

    fn validate(&self, lines: &[usize]) -> Result<(), ScenarioError> {
        let p = &self.params;
        p.heatmap()
            .validate()
            .map_err(|e| ScenarioError::Params(e.to_string()))?;
        RiskParams {
            d_max: p.d_max,
            tau: p.tau,
        }
        .validate()
        .map_err(ScenarioError::Params)?;
        if !p.error_set.contains(&p.error_function) {
            return Err(ScenarioError::Params(
                "error function not in the error set".into(),
            ));
        }
        for name in &p.analyses {
            if p.function(name).is_none() {
                return Err(ScenarioError::Params(format!(
                    "unknown analysis function {name}"
                )));
            }
        }
        let mut declared = BTreeSet::new();
        for pid in self.users.iter().chain(&self.analysts) {
            if pid.as_str() == AUTHORITY {
                return Err(ScenarioError::Params(format!("party id {pid} is reserved")));
            }
            if !declared.insert(pid) {
                return Err(ScenarioError::Params(format!("party {pid} declared twice")));
            }
        }
        let mut previous = 0;
        for (ev, &line) in self.timeline.iter().zip(lines) {
            if ev.tick < previous {
                return Err(ScenarioError::TickRegression {
                    line,
                    tick: ev.tick,
                    previous,
                });
            }
            previous = ev.tick;
            for pid in ev.event.parties() {
                if !declared.contains(pid) {
                    return Err(ScenarioError::UnknownParty {
                        line,
                        pid: pid.clone(),
                    });
                }
            }
            match &ev.event {
                Event::Register { alpha, .. }
                | Event::Accept { alpha, .. }
                | Event::Analyse { alpha, .. }
                    if p.function(alpha).is_none() =>
                {
                    return Err(ScenarioError::UnknownFunction {
                        line,
                        name: alpha.clone(),
                    });
                }
                Event::SampleSec { cell, .. } if *cell >= p.cells => {
                    return Err(ScenarioError::CellOutOfRange { line, cell: *cell });
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Serializes back to the line format.
    pub fn to_jsonl(&self) -> String {
        let header = Header {
            v: SCENARIO_VERSION,
            seed: self.seed,
            params: self.params.clone(),
            users: self.users.clone(),
            analysts: self.analysts.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for ev in &self.timeline {
            out.push_str(&serde_json::to_string(ev).expect("event serializes"));
            out.push('\n');
        }
        out
    }
}
