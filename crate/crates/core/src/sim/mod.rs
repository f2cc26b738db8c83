//! Scenario-driven simulation of the whole stack, in protocol mode, in
//! ideal mode, or both side by side.

mod driver;
mod scenario;
mod trace;
mod transcript;

pub use driver::{
    compare, ideal_service, protocol_service, run, run_ideal, run_protocol, Divergence, Mode,
    RunReport, SimError, Simulation, BOTTOM,
};
pub use scenario::{Event, Scenario, ScenarioError, ScenarioParams, TimedEvent, SCENARIO_VERSION};
pub use trace::{function_pool, normalize, random_trace, run_trace, TraceOp};
pub use transcript::{EventRecord, HeatmapRow, OpRow, RiskRow, Transcript};
