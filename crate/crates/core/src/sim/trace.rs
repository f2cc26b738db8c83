//! Random operation traces over an [`FeBackend`], for checking that the
//! enclave protocol and the ideal functionality answer alike.

use rand::seq::SliceRandom;
use rand::Rng;

use super::driver::BOTTOM;
use crate::fesr::{FeBackend, FesrError, MAX_PLAINTEXT};
use crate::func::{FunctionSpec, Output};
use crate::heatmap::HeatmapParams;
use crate::ids::{Handle, PartyId, Role};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub enum TraceOp {
    Setup {
        party: PartyId,
        role: Role,
    },
    KeyShareGen {
        a: PartyId,
        f: FunctionSpec,
        b: PartyId,
    },
    Encrypt {
        party: PartyId,
        x: Vec<u8>,
        k: i64,
    },
    /// `handle` indexes the handles returned so far; out of range means a
    /// handle that was never issued.
    Decrypt {
        b: PartyId,
        f: FunctionSpec,
        handle: usize,
    },
}

pub fn function_pool() -> Vec<FunctionSpec> {
    let hp = HeatmapParams::new(3, 1, 1).expect("valid heatmap parameters");
    vec![
        FunctionSpec::F0,
        FunctionSpec::ByteSum,
        FunctionSpec::IntegerSum,
        FunctionSpec::ByteConcatLength,
        FunctionSpec::RunningTotal,
        FunctionSpec::CoinFlip,
        FunctionSpec::Heatmap(hp),
        FunctionSpec::agg(FunctionSpec::ByteSum, 2),
        FunctionSpec::aggs(FunctionSpec::IntegerSum),
    ]
}

/// A trace of `len` operations over `parties` parties, without corruption.
pub fn random_trace(seed: u64, parties: usize, len: usize) -> Vec<TraceOp> {
    let mut r = rng::derive(seed, &[b"trace"]);
    let pids: Vec<PartyId> = (0..parties)
        .map(|i| PartyId::new(format!("p{i}")))
        .collect();
    let pool = function_pool();
    let mut issued = 0usize;
    let mut ops = Vec::with_capacity(len);
    let mut roles: Vec<(PartyId, Role)> = vec![];
    // setups first so the rest of the trace has something to act on
    for p in &pids {
        if r.gen_bool(0.85) {
            let role = if r.gen_bool(0.5) { Role::A } else { Role::B };
            roles.push((p.clone(), role));
            ops.push(TraceOp::Setup {
                party: p.clone(),
                role,
            });
        }
    }
    // mostly parties in the right role, sometimes anyone
    let pick = |r: &mut rng::SimRng, want: Option<Role>| {
        let fitting: Vec<&PartyId> = roles
            .iter()
            .filter(|(_, role)| Some(*role) == want)
            .map(|(p, _)| p)
            .collect();
        match fitting.choose(r) {
            Some(p) if r.gen_bool(0.8) => (*p).clone(),
            _ => pids.choose(r).expect("at least one party").clone(),
        }
    };
    while ops.len() < len {
        let op = match r.gen_range(0..10) {
            0 => TraceOp::Setup {
                party: pick(&mut r, None),
                role: if r.gen_bool(0.5) { Role::A } else { Role::B },
            },
            1..=3 => TraceOp::KeyShareGen {
                a: pick(&mut r, Some(Role::A)),
                f: pool[1..].choose(&mut r).expect("non-empty pool").clone(),
                b: pick(&mut r, Some(Role::B)),
            },
            4..=5 => {
                let n = if r.gen_ratio(1, 25) {
                    MAX_PLAINTEXT + 1
                } else {
                    r.gen_range(0..24)
                };
                let mut x = vec![0u8; n];
                r.fill(x.as_mut_slice());
                issued += 1;
                TraceOp::Encrypt {
                    party: pick(&mut r, Some(Role::A)),
                    x,
                    k: r.gen_range(-1..=2),
                }
            }
            _ => TraceOp::Decrypt {
                b: pick(&mut r, Some(Role::B)),
                f: pool.choose(&mut r).expect("non-empty pool").clone(),
                handle: r.gen_range(0..=issued),
            },
        };
        ops.push(op);
    }
    ops.truncate(len);
    ops
}

pub fn normalize(e: &FesrError) -> String {
    if e.is_bottom() {
        BOTTOM.into()
    } else {
        format!("error: {e}")
    }
}

fn output(o: &Output) -> String {
    match o {
        Output::Pending => "pending".into(),
        Output::Value(v) => v.iter().map(|b| format!("{b:02x}")).collect(),
    }
}

/// Replays `trace` and returns one outcome string per operation.
pub fn run_trace<B: FeBackend>(backend: &mut B, trace: &[TraceOp]) -> Vec<String> {
    let mut handles: Vec<Handle> = vec![];
    trace
        .iter()
        .map(|op| match op {
            TraceOp::Setup { party, role } => match backend.setup(party, *role) {
                Ok(()) => "ok".into(),
                Err(e) => normalize(&e),
            },
            TraceOp::KeyShareGen { a, f, b } => {
                backend.keysharegen(a, f, b);
                "ok".into()
            }
            TraceOp::Encrypt { party, x, k } => match backend.encrypt(party, x, *k) {
                Ok(h) => {
                    handles.push(h);
                    "ok".into()
                }
                Err(e) => normalize(&e),
            },
            TraceOp::Decrypt { b, f, handle } => {
                let h = handles.get(*handle).copied().unwrap_or(Handle(u64::MAX));
                match backend.decrypt(b, f, h) {
                    Ok(o) => output(&o),
                    Err(e) => normalize(&e),
                }
            }
        })
        .collect()
}
