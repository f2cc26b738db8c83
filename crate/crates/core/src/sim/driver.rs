use std::collections::BTreeMap;

use thiserror::Error;

use super::scenario::{Event, Scenario, TimedEvent};
use super::transcript::{EventRecord, HeatmapRow, OpRow, RiskRow, Transcript};
use crate::counters::Meter;
use crate::en::{Analysis, EnError, ExposureService, FEnPlus, GlassVault};
use crate::func::FunctionSpec;
use crate::heatmap::{decode_output, HOURS_PER_DAY};
use crate::ids::PartyId;
use crate::steel::DdSteel;
use crate::world::{Clock, Reality, RealityRecord, SensitiveData, WorldError};

/// Outcome string both modes agree on for a plain ⊥.
pub const BOTTOM: &str = "⊥";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Protocol,
    Ideal,
    Both,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("reality halted at tick {tick} on {record:?}: {source}")]
    Halt {
        tick: u64,
        record: Box<RealityRecord>,
        source: WorldError,
    },
    #[error("error function rejected at start-up: {0}")]
    Setup(EnError),
}

/// First event where the two modes disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub index: usize,
    pub protocol: Option<EventRecord>,
    pub ideal: Option<EventRecord>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    /// Protocol transcript, or the ideal one in ideal mode.
    pub transcript: Transcript,
    pub divergence: Option<Divergence>,
}

pub fn protocol_service(scenario: &Scenario, meter: Meter, tap: bool) -> GlassVault<DdSteel> {
    let mut steel =
        DdSteel::new(scenario.seed, meter).with_strict_shares(scenario.params.strict_shares);
    if tap {
        steel = steel.with_channel_tap();
    }
    GlassVault::new(scenario.params.en_params(), steel)
}

pub fn ideal_service(scenario: &Scenario) -> FEnPlus {
    FEnPlus::new(scenario.params.en_params(), scenario.seed)
}

/// One scenario run against one service.
pub struct Simulation<'a, S> {
    scenario: &'a Scenario,
    service: S,
    reality: Reality,
    clock: Clock,
    meter: Option<Meter>,
    transcript: Transcript,
}

impl<'a, S: ExposureService> Simulation<'a, S> {
    /// `meter` is the counter table the service charges, if any.
    pub fn new(scenario: &'a Scenario, service: S, meter: Option<Meter>) -> Self {
        Self {
            scenario,
            service,
            reality: Reality::new(scenario.params.validator),
            clock: Clock::new(),
            meter,
            transcript: Transcript::new(scenario.params.cells),
        }
    }

    pub fn service(&self) -> &S {
        &self.service
    }

    pub fn reality(&self) -> &Reality {
        &self.reality
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    pub fn run(&mut self) -> Result<(), SimError> {
        self.service
            .setup(self.scenario.params.error_function.clone())
            .map_err(SimError::Setup)?;
        let timeline = &self.scenario.timeline;
        let mut i = 0;
        while i < timeline.len() {
            let tick = timeline[i].tick;
            let end = timeline[i..]
                .iter()
                .position(|e| e.tick != tick)
                .map_or(timeline.len(), |n| i + n);
            self.tick(tick, &timeline[i..end])?;
            i = end;
        }
        Ok(())
    }

    fn tick(&mut self, tick: u64, events: &[TimedEvent]) -> Result<(), SimError> {
        while self.clock.now() < tick {
            self.clock.increment();
        }
        let mut merged: BTreeMap<PartyId, RealityRecord> = BTreeMap::new();
        fn entry<'m>(
            merged: &'m mut BTreeMap<PartyId, RealityRecord>,
            u: &PartyId,
            tick: u64,
        ) -> &'m mut RealityRecord {
            merged
                .entry(u.clone())
                .or_insert_with(|| RealityRecord::empty(u.clone(), tick))
        }
        for ev in events {
            match &ev.event {
                Event::Move { user, dists } => entry(&mut merged, user, tick)
                    .dist
                    .extend(dists.iter().map(|(k, v)| (k.clone(), *v))),
                Event::SampleSec { user, cell } => {
                    let hour = (tick % HOURS_PER_DAY) as u8;
                    entry(&mut merged, user, tick).sec = Some(SensitiveData {
                        location_cell: *cell,
                        hour,
                    });
                }
                Event::Infect { user } => entry(&mut merged, user, tick).infected = Some(true),
                _ => {}
            }
        }
        for (user, record) in merged {
            if let Err(source) = self.reality.input(record.clone(), tick) {
                return Err(SimError::Halt {
                    tick,
                    record: Box::new(record),
                    source,
                });
            }
            self.record(tick, user.as_str(), "reality", "recorded".into());
        }
        for ev in events.iter().filter(|e| !e.event.is_world()) {
            let before = self.meter.as_ref().map(Meter::snapshot);
            let (actor, outcome) = self.dispatch(tick, &ev.event);
            if let (Some(m), Some(before)) = (&self.meter, before) {
                for (party, op, count) in Meter::delta(&before, &m.snapshot()) {
                    self.transcript.opcounts.push(OpRow {
                        tick,
                        event: ev.event.name().into(),
                        actor: party,
                        op,
                        count,
                    });
                }
            }
            self.record(tick, &actor, ev.event.name(), outcome);
        }
        Ok(())
    }

    fn record(&mut self, tick: u64, actor: &str, op: &str, outcome: String) {
        log::debug!("t={tick} {actor} {op}: {outcome}");
        self.transcript.events.push(EventRecord {
            tick,
            actor: actor.into(),
            op: op.into(),
            outcome,
        });
    }

    fn function(&self, name: &str) -> FunctionSpec {
        self.scenario
            .params
            .function(name)
            .expect("validated at load")
    }

    fn dispatch(&mut self, tick: u64, event: &Event) -> (String, String) {
        let svc = &mut self.service;
        let reality = &self.reality;
        match event {
            Event::Activate { user } => {
                svc.activate(user);
                (user.to_string(), "ok".into())
            }
            Event::Remove { user } => {
                svc.remove(user);
                (user.to_string(), "ok".into())
            }
            Event::Share { user } => (
                user.to_string(),
                unit(svc.share_exposure(user, reality, tick)),
            ),
            Event::Check { user } => {
                let outcome = match svc.exposure_check(user, reality, tick) {
                    Ok(risk) => {
                        self.transcript.risks.push(RiskRow {
                            tick,
                            user: user.clone(),
                            risk,
                        });
                        format!("risk {risk}")
                    }
                    Err(e) => failure(&e),
                };
                (user.to_string(), outcome)
            }
            Event::Register { analyst, alpha } => {
                let f = self.function(alpha);
                let svc = &mut self.service;
                let outcome = if !svc.en().params().allows(&f) {
                    "ignored".into()
                } else {
                    match svc.register_analyst(analyst, &f) {
                        Ok(requests) => {
                            let names: Vec<&str> = requests.iter().map(PartyId::as_str).collect();
                            format!("requests [{}]", names.join(","))
                        }
                        Err(e) => failure(&e),
                    }
                };
                (analyst.to_string(), outcome)
            }
            Event::Accept {
                user,
                alpha,
                analyst,
            } => {
                let f = self.function(alpha);
                (
                    user.to_string(),
                    unit(self.service.accept(user, &f, analyst)),
                )
            }
            Event::Analyse { analyst, alpha } => {
                let f = self.function(alpha);
                let outcome = match self.service.analyse(analyst, &f, &self.reality, tick) {
                    Ok(Analysis::Gated) => "gated".into(),
                    Ok(Analysis::Value(y)) => match (&f, decode_output(&y)) {
                        (FunctionSpec::Heatmap(_), Some(cells)) => {
                            let text = cells
                                .iter()
                                .map(u64::to_string)
                                .collect::<Vec<_>>()
                                .join(",");
                            self.transcript.heatmap.push(HeatmapRow { tick, cells });
                            format!("heatmap [{text}]")
                        }
                        _ => format!("value {}", hex(&y)),
                    },
                    Err(e) => failure(&e),
                };
                (analyst.to_string(), outcome)
            }
            Event::Corrupt { user } => {
                let disclosed = svc.corrupt(user);
                let pairs: Vec<String> =
                    disclosed.iter().map(|(d, a)| format!("{d}:{a}")).collect();
                (user.to_string(), format!("disclosed [{}]", pairs.join(",")))
            }
            Event::Fake { phi } => {
                let applied = svc.fake_reality(phi);
                (
                    "adversary".into(),
                    if applied { "applied" } else { "ignored" }.into(),
                )
            }
            Event::Leak => {
                let view = svc.leak();
                let (r, a, s) = view.counts;
                (
                    "adversary".into(),
                    format!("records {r} active {a} shared {s}"),
                )
            }
            Event::SetupEn { errfn } => ("env".into(), unit(svc.setup(errfn.clone()))),
            Event::Move { .. } | Event::SampleSec { .. } | Event::Infect { .. } => {
                unreachable!("world events are merged before dispatch")
            }
        }
    }
}

fn unit(r: Result<(), EnError>) -> String {
    match r {
        Ok(()) => "ok".into(),
        Err(e) => failure(&e),
    }
}

fn failure(e: &EnError) -> String {
    match e {
        EnError::Fesr(f) if f.is_bottom() => BOTTOM.into(),
        other => format!("error: {other}"),
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the protocol and returns its simulation for inspection.
pub fn run_protocol(
    scenario: &Scenario,
    tap: bool,
) -> Result<Simulation<'_, GlassVault<DdSteel>>, SimError> {
    let meter = Meter::new();
    let mut sim = Simulation::new(
        scenario,
        protocol_service(scenario, meter.clone(), tap),
        Some(meter),
    );
    sim.run()?;
    Ok(sim)
}

pub fn run_ideal(scenario: &Scenario) -> Result<Simulation<'_, FEnPlus>, SimError> {
    let mut sim = Simulation::new(scenario, ideal_service(scenario), None);
    sim.run()?;
    Ok(sim)
}

pub fn compare(protocol: &[EventRecord], ideal: &[EventRecord]) -> Option<Divergence> {
    let n = protocol.len().max(ideal.len());
    (0..n)
        .find(|&i| protocol.get(i) != ideal.get(i))
        .map(|index| Divergence {
            index,
            protocol: protocol.get(index).cloned(),
            ideal: ideal.get(index).cloned(),
        })
}

pub fn run(scenario: &Scenario, mode: Mode) -> Result<RunReport, SimError> {
    match mode {
        Mode::Protocol => Ok(RunReport {
            transcript: run_protocol(scenario, false)?.into_transcript(),
            divergence: None,
        }),
        Mode::Ideal => Ok(RunReport {
            transcript: run_ideal(scenario)?.into_transcript(),
            divergence: None,
        }),
        Mode::Both => {
            let ideal = run_ideal(scenario)?.into_transcript();
            let protocol = run_protocol(scenario, false)?.into_transcript();
            let divergence = compare(&protocol.events, &ideal.events);
            Ok(RunReport {
                transcript: protocol,
                divergence,
            })
        }
    }
}
