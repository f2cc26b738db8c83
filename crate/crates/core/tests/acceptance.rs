//! End-to-end acceptance checks. Run with `--nocapture` to see one line per
//! criterion.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use glassvault::attest::{attestation_message, EnclaveInput, Gatt, KeyShare, Program};
use glassvault::counters::Meter;
use glassvault::crypto::{sig_keygen, sig_verify, CrsFunctionality, Signature};
use glassvault::en::ExposureService;
use glassvault::fesr::{FeBackend, FesrError, IdealDdFesr};
use glassvault::func::{
    aggs_count_frame, aggs_data_frame, heatmap_state_of, le_integer, FunctionSpec, FunctionState,
    Output,
};
use glassvault::heatmap::HeatmapParams;
use glassvault::ids::{PartyId, Role, SessionId};
use glassvault::rng;
use glassvault::setups::{cert_verify, CertAuthority, CertError, Certificate};
use glassvault::sim::{self, random_trace, run_trace, Mode, Scenario, TraceOp};
use glassvault::steel::{DdSteel, WireMsg};
use glassvault::world::{SecHistory, SensitiveData};

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn p(s: &str) -> PartyId {
    PartyId::from(s)
}

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(format!("{name}.jsonl"))
}

fn demo() -> Scenario {
    Scenario::load(&corpus("demo")).expect("demo scenario loads")
}

fn flip(bytes: &[u8], r: &mut impl Rng) -> Vec<u8> {
    let mut out = bytes.to_vec();
    let bit = r.gen_range(0..out.len() * 8);
    out[bit / 8] ^= 1 << (bit % 8);
    out
}

/// Plaintext heatmap recomputation, written from the definition rather than
/// from the library.
mod oracle {
    use super::*;

    pub const HOURS: u64 = 24;

    pub fn matrix(
        samples: &BTreeMap<u64, u32>,
        as_of: u64,
        days: u64,
        cells: usize,
        home: usize,
    ) -> Vec<Vec<u64>> {
        let last_day = (as_of / HOURS) as i64;
        (0..days)
            .map(|d| {
                let day = last_day - (days - 1 - d) as i64;
                let mut row = vec![0u64; cells];
                if day < 0 {
                    row[home] = HOURS;
                    return row;
                }
                for h in 0..HOURS {
                    let t = day as u64 * HOURS + h;
                    let cell = if t <= as_of {
                        samples.get(&t).map_or(home, |&c| c as usize)
                    } else {
                        home
                    };
                    row[cell] += 1;
                }
                row
            })
            .collect()
    }

    #[derive(Default)]
    pub struct Buffers {
        pub live: Vec<VecDeque<Vec<u64>>>,
    }

    impl Buffers {
        /// One daily step; returns the released vector.
        pub fn step(
            &mut self,
            fresh: Vec<Vec<Vec<u64>>>,
            days: usize,
            cells: usize,
            q: usize,
        ) -> Vec<u64> {
            for b in &mut self.live {
                if b.len() == days {
                    b.pop_front();
                }
                b.push_back(vec![0; cells]);
            }
            self.live.retain(|b| b.iter().flatten().any(|&v| v != 0));
            for m in fresh {
                self.live.push(m.into_iter().collect());
            }
            let mut y = vec![0u64; cells];
            if self.live.len() >= q {
                for row in self.live.iter().flatten() {
                    for (acc, v) in y.iter_mut().zip(row) {
                        *acc += v;
                    }
                }
            }
            y
        }
    }

    pub struct Row {
        pub tick: u64,
        pub y: Vec<u64>,
        pub live: usize,
    }

    pub struct Replay {
        pub rows: Vec<Row>,
        pub gated: usize,
        pub infected: BTreeSet<String>,
        pub analyses: usize,
    }

    /// Replays a scenario file from its raw JSON lines.
    pub fn replay(path: &Path) -> Replay {
        let text = std::fs::read_to_string(path).unwrap();
        let mut lines = text
            .lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap());
        let header = lines.next().unwrap();
        let prm = &header["params"];
        let days = prm["days"].as_u64().unwrap();
        let cells = prm["cells"].as_u64().unwrap() as usize;
        let q = prm["q"].as_u64().unwrap() as usize;
        let home = prm.get("home_cell").and_then(|v| v.as_u64()).unwrap_or(0) as usize;

        let mut samples: BTreeMap<String, BTreeMap<u64, u32>> = BTreeMap::new();
        let mut infected = BTreeSet::new();
        let mut shared: Vec<(String, u64)> = vec![];
        let mut accepted: BTreeSet<String> = BTreeSet::new();
        let mut buffers = Buffers::default();
        let mut cursor = 0;
        let mut rows = vec![];
        let (mut gated, mut analyses) = (0, 0);
        for ev in lines {
            let tick = ev["tick"].as_u64().unwrap();
            let user = ev
                .get("user")
                .and_then(|u| u.as_str())
                .unwrap_or_default()
                .to_owned();
            match ev["op"].as_str().unwrap() {
                "sample_sec" => {
                    samples
                        .entry(user)
                        .or_default()
                        .insert(tick, ev["cell"].as_u64().unwrap() as u32);
                }
                "infect" => {
                    infected.insert(user);
                }
                "share" if infected.contains(&user) && !shared.iter().any(|(u, _)| *u == user) => {
                    shared.push((user, tick));
                }
                "accept" if shared.iter().any(|(u, _)| *u == user) => {
                    accepted.insert(user);
                }
                "analyse" => {
                    analyses += 1;
                    let need = shared.len().div_ceil(2);
                    if accepted.len() < need {
                        gated += 1;
                        continue;
                    }
                    let fresh = shared[cursor..]
                        .iter()
                        .map(|(u, t)| {
                            matrix(
                                &samples.get(u).cloned().unwrap_or_default(),
                                *t,
                                days,
                                cells,
                                home,
                            )
                        })
                        .collect();
                    cursor = shared.len();
                    let y = buffers.step(fresh, days as usize, cells, q);
                    rows.push(Row {
                        tick,
                        y,
                        live: buffers.live.len(),
                    });
                }
                _ => {}
            }
        }
        Replay {
            rows,
            gated,
            infected,
            analyses,
        }
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let (mut ops, mut values) = (0, 0);
    for i in 0..50u64 {
        let mut r = rng::derive(i, &[b"shape"]);
        let parties = r.gen_range(2..=6);
        let len = r.gen_range(8..=30);
        let trace = random_trace(1000 + i, parties, len);
        let seed = 500 + i;
        let ideal = run_trace(&mut IdealDdFesr::new(seed), &trace);
        let real = run_trace(&mut DdSteel::new(seed, Meter::new()), &trace);
        for (j, op) in trace.iter().enumerate() {
            let (caller, name) = match op {
                TraceOp::Setup { party, .. } => (party, "setup"),
                TraceOp::KeyShareGen { a, .. } => (a, "keysharegen"),
                TraceOp::Encrypt { party, .. } => (party, "encrypt"),
                TraceOp::Decrypt { b, .. } => (b, "decrypt"),
            };
            ensure!(
                ideal[j] == real[j],
                "trace {i} op {j} ({caller}, {name}): ideal {:?}, protocol {:?}",
                ideal[j],
                real[j]
            );
        }
        ops += trace.len();
        values += trace
            .iter()
            .zip(&ideal)
            .filter(|(op, out)| {
                matches!(op, TraceOp::Decrypt { .. })
                    && *out != "⊥"
                    && *out != "pending"
                    && !out.starts_with("error")
            })
            .count();
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    ensure!(values > 0, "no decryption produced a value");
    Ok(format!(
        "50 traces, {ops} ops, {values} decrypted values, 0 divergences, {:.1}s",
        took.as_secs_f64()
    ))
}

fn share_of(steel: &DdSteel) -> KeyShare {
    let (_, _, bytes) = steel
        .channels()
        .tapped()
        .last()
        .expect("a share was sent")
        .clone();
    match WireMsg::decode(&bytes).expect("wire message decodes") {
        WireMsg::KeyShareGen(share) => share,
        other => panic!("unexpected {other:?}"),
    }
}

fn gating_run<B: FeBackend>(
    mut b: B,
    k: usize,
    order: &[PartyId],
    f: &FunctionSpec,
) -> Result<(), String> {
    let dec = p("dec");
    for a in order {
        b.setup(a, Role::A).map_err(|e| e.to_string())?;
    }
    b.setup(&dec, Role::B).map_err(|e| e.to_string())?;
    let h = b
        .encrypt(&order[order.len() - 1], &[3, 4, 5], k as i64)
        .map_err(|e| e.to_string())?;
    if k >= 1 {
        for a in &order[..k - 1] {
            // every signer twice: duplicates must not count
            b.keysharegen(a, f, &dec);
            b.keysharegen(a, f, &dec);
        }
        let got = b.decrypt(&dec, f, h);
        let want = Err(FesrError::PolicyUnsatisfied {
            have: k as u64 - 1,
            need: k as u64,
        });
        ensure!(got == want, "k={k} with k-1 shares: {got:?}");
        b.keysharegen(&order[k - 1], f, &dec);
    }
    let got = b.decrypt(&dec, f, h);
    ensure!(
        matches!(got, Ok(Output::Value(_))),
        "k={k} with k shares: {got:?}"
    );
    Ok(())
}

fn criterion_2() -> Verdict {
    let pool: Vec<PartyId> = (0..6).map(|i| p(&format!("a{i}"))).collect();
    let mut r = rng::derive(2, &[b"orderings"]);
    let mut runs = 0;
    for k in [0usize, 1, 2, 3, 5] {
        for o in 0..20u64 {
            let mut order = pool.clone();
            order.shuffle(&mut r);
            let f = if r.gen_bool(0.5) {
                FunctionSpec::ByteSum
            } else {
                FunctionSpec::IntegerSum
            };
            gating_run(IdealDdFesr::new(o), k, &order, &f).map_err(|e| format!("ideal: {e}"))?;
            gating_run(DdSteel::new(o, Meter::new()), k, &order, &f)
                .map_err(|e| format!("protocol: {e}"))?;
            runs += 2;

            // a byte-identical share injected next to the original never helps
            if k >= 2 && o < 5 {
                let dec = p("dec");
                let mut s = DdSteel::new(o, Meter::new()).with_channel_tap();
                for a in &order {
                    s.setup(a, Role::A).unwrap();
                }
                s.setup(&dec, Role::B).unwrap();
                let h = s.encrypt(&order[0], &[1], k as i64).unwrap();
                for a in &order[..k - 1] {
                    s.keysharegen(a, &f, &dec);
                }
                s.inject_share(&dec, share_of(&s));
                let got = s.decrypt(&dec, &f, h);
                ensure!(
                    got.is_err(),
                    "k={k}: duplicate injected share decrypted: {got:?}"
                );
            }
        }
    }
    Ok(format!(
        "k in {{0,1,2,3,5}} x 20 orderings on both backends ({runs} runs)"
    ))
}

fn plaintext(f: &FunctionSpec, xs: &[Vec<u8>]) -> Option<Vec<u8>> {
    let le = |v: u64| v.to_le_bytes().to_vec();
    Some(match f {
        FunctionSpec::F0 => le(xs.iter().map(|x| x.len() as u64).sum()),
        FunctionSpec::ByteSum => le(xs.iter().flatten().map(|&b| b as u64).sum()),
        FunctionSpec::IntegerSum => le(xs
            .iter()
            .map(|x| le_integer(x))
            .fold(0u64, u64::wrapping_add)),
        FunctionSpec::ByteConcatLength => {
            let mut out = le(xs.iter().map(|x| x.len() as u64).sum());
            out.extend(xs.concat());
            out
        }
        _ => return None,
    })
}

fn random_history(r: &mut impl Rng, cells: u32) -> SecHistory {
    let as_of = r.gen_range(0..96u64);
    let mut ticks: Vec<u64> = (0..=as_of).filter(|_| r.gen_bool(0.3)).collect();
    ticks.dedup();
    SecHistory {
        as_of_tick: as_of,
        samples: ticks
            .into_iter()
            .map(|t| {
                (
                    t,
                    SensitiveData {
                        location_cell: r.gen_range(0..cells),
                        hour: (t % 24) as u8,
                    },
                )
            })
            .collect(),
    }
}

fn criterion_3() -> Verdict {
    let stateless = [
        FunctionSpec::F0,
        FunctionSpec::ByteSum,
        FunctionSpec::IntegerSum,
        FunctionSpec::ByteConcatLength,
        FunctionSpec::CoinFlip,
    ];
    let mut r = rng::derive(3, &[b"compilers"]);
    for case in 0..200u64 {
        let f = stateless.choose(&mut r).unwrap().clone();
        let n = r.gen_range(1..=8u32);
        let xs: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let mut x = vec![0u8; r.gen_range(0..12)];
                r.fill_bytes(&mut x);
                x
            })
            .collect();
        let wrapped = FunctionSpec::agg(f.clone(), n);
        let mut s = FunctionState::default();
        let mut stream = rng::from_seed(case);
        let mut last = Output::Pending;
        for (i, x) in xs.iter().enumerate() {
            let (y, next) = wrapped
                .evaluate(x, &s, &mut stream)
                .map_err(|e| format!("case {case}: {e}"))?;
            ensure!(
                i + 1 == xs.len() || y == Output::Pending,
                "case {case}: early output at {i}"
            );
            s = next;
            last = y;
        }
        let direct = f
            .evaluate_list(&xs, &FunctionState::default(), &mut rng::from_seed(case))
            .unwrap()
            .0;
        ensure!(
            last == Output::Value(direct.clone()),
            "case {case} {}: agg {last:?} vs direct {direct:?}",
            f.name()
        );
        if let Some(want) = plaintext(&f, &xs) {
            ensure!(
                direct == want,
                "case {case} {}: direct disagrees with plaintext",
                f.name()
            );
        }
    }

    for case in 0..50u64 {
        let running = case % 2 == 0;
        let hp = HeatmapParams::new(3, r.gen_range(1..=2), 2).unwrap();
        let inner = if running {
            FunctionSpec::RunningTotal
        } else {
            FunctionSpec::Heatmap(hp)
        };
        let f = FunctionSpec::aggs(inner);
        let mut s = FunctionState::default();
        let mut stream = rng::from_seed(case);
        let mut total = 0u64;
        let mut buffers = oracle::Buffers::default();
        let batches = r.gen_range(1..=4);
        for batch in 0..batches {
            let n = r.gen_range(0..=4usize);
            let (inputs, want): (Vec<Vec<u8>>, Vec<u8>) = if running {
                let vals: Vec<u64> = (0..n).map(|_| r.gen_range(0..1000)).collect();
                total += vals.iter().sum::<u64>();
                (
                    vals.iter().map(|v| v.to_le_bytes().to_vec()).collect(),
                    total.to_le_bytes().to_vec(),
                )
            } else {
                let hs: Vec<SecHistory> =
                    (0..n).map(|_| random_history(&mut r, hp.cells)).collect();
                let fresh = hs
                    .iter()
                    .map(|h| {
                        let m: BTreeMap<u64, u32> = h
                            .samples
                            .iter()
                            .map(|(t, d)| (*t, d.location_cell))
                            .collect();
                        oracle::matrix(&m, h.as_of_tick, 2, 3, 0)
                    })
                    .collect();
                let y = buffers.step(fresh, 2, 3, hp.min_users as usize);
                (
                    hs.iter().map(SecHistory::encode).collect(),
                    y.iter().flat_map(|v| v.to_le_bytes()).collect(),
                )
            };
            let (mut y, next) = f
                .evaluate(&aggs_count_frame(n as u64), &s, &mut stream)
                .unwrap();
            s = next;
            for x in &inputs {
                let (out, next) = f.evaluate(&aggs_data_frame(x), &s, &mut stream).unwrap();
                s = next;
                y = out;
            }
            ensure!(
                y == Output::Value(want.clone()),
                "aggs case {case} batch {batch}: {y:?} vs {want:?}"
            );
        }
    }
    Ok("200 agg cases and 50 multi-batch aggs cases match".into())
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let s = demo();
    let prm = &s.params;
    let replay = oracle::replay(&corpus("demo"));
    ensure!(
        s.users.len() == 12 && prm.days == 3 && prm.cells == 4 && prm.q == 2,
        "demo shape changed"
    );
    ensure!(
        replay.infected.len() == 5 && replay.analyses == 3,
        "demo shape changed"
    );
    ensure!(
        prm.threshold == glassvault::en::ThresholdPolicy::Majority,
        "demo threshold changed"
    );

    let sim = sim::run_protocol(&s, false).map_err(|e| e.to_string())?;
    let rows = &sim.transcript().heatmap;
    ensure!(
        rows.len() == replay.rows.len(),
        "{} rows vs oracle {}",
        rows.len(),
        replay.rows.len()
    );
    for (got, want) in rows.iter().zip(&replay.rows) {
        ensure!(
            got.tick == want.tick && got.cells == want.y,
            "row at {}: {:?} vs {:?}",
            got.tick,
            got.cells,
            want.y
        );
    }
    let guard = replay
        .rows
        .iter()
        .filter(|r| r.live < prm.q as usize)
        .count();
    ensure!(guard >= 1, "no q-guard row in the demo");
    for row in &replay.rows {
        let sum: u64 = row.y.iter().sum();
        if row.live < prm.q as usize {
            ensure!(sum == 0, "q-guard row at {} is {:?}", row.tick, row.y);
        } else {
            ensure!(
                sum == 24 * u64::from(prm.days) * row.live as u64,
                "conservation fails at {}",
                row.tick
            );
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(format!(
        "{} rows match the oracle, {guard} q-guard row, {} gated, {:.1}s",
        rows.len(),
        replay.gated,
        took.as_secs_f64()
    ))
}

fn criterion_5() -> Verdict {
    let s = Scenario::load(&corpus("eviction")).map_err(|e| e.to_string())?;
    let days = s.params.days as usize;
    let alpha = s.params.function("heatmap").unwrap();
    let sim = sim::run_ideal(&s).map_err(|e| e.to_string())?;
    let rows = &sim.transcript().heatmap;
    ensure!(
        rows.len() == days + 1,
        "expected the upload day plus {days} quiet days, got {} rows",
        rows.len()
    );
    ensure!(
        rows[..days].iter().all(|r| r.cells.iter().any(|&v| v > 0)),
        "buffer released too early"
    );
    let last = rows.last().unwrap();
    ensure!(
        last.cells.iter().all(|&v| v == 0),
        "final row {:?}",
        last.cells
    );
    let state = sim
        .service()
        .analysis_state(&s.analysts[0], &alpha)
        .ok_or("no analysis state")?;
    let buffers = heatmap_state_of(state)
        .map_err(|e| e.to_string())?
        .buffers
        .len();
    ensure!(buffers == 0, "{buffers} buffers left");
    let protocol = sim::run_protocol(&s, false).map_err(|e| e.to_string())?;
    ensure!(
        &protocol.transcript().heatmap == rows,
        "protocol rows differ"
    );
    Ok(format!("zero output and 0 buffers after {days} quiet days"))
}

fn criterion_6() -> Verdict {
    let mut steel = DdSteel::new(6, Meter::new());
    steel.setup(&p("enc"), Role::A).unwrap();
    steel.setup(&p("dec"), Role::B).unwrap();
    let mut r = rng::derive(6, &[b"plaintexts"]);
    for i in 0..100 {
        let mut x = vec![0u8; r.gen_range(0..2048)];
        r.fill_bytes(&mut x);
        let h = steel.encrypt(&p("enc"), &x, r.gen_range(0..=5)).unwrap();
        let got = steel.decrypt(&p("dec"), &FunctionSpec::F0, h);
        ensure!(
            got == Ok(Output::Value((x.len() as u64).to_le_bytes().to_vec())),
            "plaintext {i}: {got:?}"
        );
    }

    let s = demo();
    let ideal = sim::run_ideal(&s).map_err(|e| e.to_string())?;
    let en = ideal.service().en();
    let secrets: Vec<Vec<u8>> = en
        .shared()
        .iter()
        .map(|(u, t)| en.sec_history(u, *t).encode())
        .collect();
    ensure!(
        secrets.len() == 5 && secrets.iter().all(|x| x.len() > 64),
        "unexpected SEC uploads"
    );
    let real = sim::run_protocol(&s, true).map_err(|e| e.to_string())?;
    let backend = real.service().backend();
    let mut observed: Vec<Vec<u8>> = backend
        .channels()
        .tapped()
        .iter()
        .map(|(_, _, m)| m.clone())
        .collect();
    observed.extend(backend.repository().iter().map(|(_, ct)| ct.encode()));
    ensure!(
        backend.repository().len() >= 5,
        "uploads missing from the repository"
    );
    for blob in &observed {
        for sec in &secrets {
            ensure!(
                !blob.windows(sec.len()).any(|w| w == sec.as_slice()),
                "SEC encoding visible to the analyst"
            );
        }
    }
    Ok(format!(
        "100 f0 lengths exact; {} observed blobs free of SEC",
        observed.len()
    ))
}

fn cost_scenario(n: usize) -> Scenario {
    let users: Vec<String> = (0..n).map(|i| format!("u{i:03}")).collect();
    let header = serde_json::json!({
        "v": 1, "seed": 70, "params": {"days": 2, "cells": 3, "q": 1}, "users": users, "analysts": ["an"]
    });
    let mut lines = vec![header.to_string()];
    let ev = |tick: u64, op: &str, user: &str| {
        format!(r#"{{"tick":{tick},"op":"{op}","user":"{user}"}}"#)
    };
    for u in &users {
        lines.push(ev(0, "activate", u));
    }
    lines.push(r#"{"tick":0,"op":"register","analyst":"an","alpha":"heatmap"}"#.into());
    for t in 1..6 {
        for (i, u) in users.iter().enumerate() {
            lines.push(format!(
                r#"{{"tick":{t},"op":"sample_sec","user":"{u}","cell":{}}}"#,
                (i + t as usize) % 3
            ));
        }
    }
    for u in &users[..3] {
        lines.push(ev(6, "infect", u));
    }
    for (i, u) in users[..3].iter().enumerate() {
        lines.push(ev(10 + i as u64, "share", u));
    }
    Scenario::parse(&lines.join("\n")).expect("cost scenario is valid")
}

fn share_rows(dir: &Path) -> Vec<String> {
    std::fs::read_to_string(dir.join("opcounts.csv"))
        .unwrap()
        .lines()
        .filter(|l| l.split(',').nth(1) == Some("share"))
        .map(str::to_owned)
        .collect()
}

fn criterion_7() -> Verdict {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (n, d) in [10, 100].iter().zip(&dirs) {
        let t = sim::run(&cost_scenario(*n), Mode::Protocol)
            .map_err(|e| e.to_string())?
            .transcript;
        ensure!(
            t.events
                .iter()
                .filter(|e| e.op == "share" && e.outcome == "ok")
                .count()
                == 3,
            "shares failed at N={n}"
        );
        t.write_to(d.path()).map_err(|e| e.to_string())?;
    }
    let small = share_rows(dirs[0].path());
    let large = share_rows(dirs[1].path());
    for op in ["pke_encrypt", "sig_keygen", "proof_prove"] {
        ensure!(
            small.iter().any(|l| l.contains(&format!(",u000,{op},"))),
            "no {op} row for a sharer"
        );
    }
    ensure!(
        small == large,
        "share rows differ:\nN=10 {small:?}\nN=100 {large:?}"
    );
    Ok(format!(
        "{} share rows identical at N=10 and N=100",
        small.len()
    ))
}

fn criterion_8() -> Verdict {
    let mut r = rng::derive(8, &[b"flips"]);

    // attestation signatures
    let sid = SessionId("acc".into());
    let mut gatt = Gatt::new(8, sid.clone(), Meter::new());
    let mut ca = CertAuthority::new(8, Meter::new());
    let c = p("C");
    let eid = gatt.install(&c, &sid, Program::kme(ca.getk())).unwrap();
    let crs = CrsFunctionality::new(8).get();
    let (out, sig) = gatt
        .resume(
            &c,
            eid,
            EnclaveInput::KmeInit {
                crs,
                sid: sid.clone(),
            },
        )
        .unwrap();
    let vk_att = gatt.getpk();
    let msg = attestation_message(&sid, eid, &gatt.program_hash(eid).unwrap(), &out.encode());
    ensure!(
        sig_verify(&vk_att, &msg, &sig.0),
        "genuine attestation rejected"
    );
    let signed: Vec<u8> = msg.iter().chain(&sig.0 .0).copied().collect();
    for i in 0..64 {
        let bad = flip(&signed, &mut r);
        let (m, s) = bad.split_at(msg.len());
        let s = Signature::from_slice(s).unwrap();
        ensure!(!sig_verify(&vk_att, m, &s), "attestation flip {i} accepted");
    }

    // key shares, end to end through the decryptor's enclaves
    let fresh = || {
        let mut s = DdSteel::new(80, Meter::new()).with_channel_tap();
        s.setup(&p("a"), Role::A).unwrap();
        s.setup(&p("b"), Role::B).unwrap();
        s
    };
    let f = FunctionSpec::ByteSum;
    let mut source = fresh();
    source.keysharegen(&p("a"), &f, &p("b"));
    let share = share_of(&source);
    let mut control = fresh();
    control.inject_share(&p("b"), share.clone());
    let h = control.encrypt(&p("a"), &[7], 1).unwrap();
    ensure!(
        control.decrypt(&p("b"), &f, h).is_ok(),
        "genuine share rejected"
    );
    let encoded = share.encode();
    for i in 0..64 {
        let bad = flip(&encoded, &mut r);
        let Ok(bad) = KeyShare::decode(&bad) else {
            continue;
        };
        let mut s = fresh();
        s.inject_share(&p("b"), bad);
        let h = s.encrypt(&p("a"), &[7], 1).unwrap();
        let got = s.decrypt(&p("b"), &f, h);
        ensure!(got.is_err(), "key share flip {i} accepted: {got:?}");
    }

    // certificates
    let kp = sig_keygen(&mut rng::derive(8, &[b"subject"]));
    let cert = ca.sign(&p("subject"), &kp.verification_key).unwrap();
    let authority = ca.getk();
    ensure!(
        cert_verify(&authority, &cert),
        "genuine certificate rejected"
    );
    let encoded = cert.encode();
    for i in 0..64 {
        let bad = flip(&encoded, &mut r);
        if let Ok(bad) = Certificate::decode(&bad) {
            ensure!(
                !cert_verify(&authority, &bad),
                "certificate flip {i} accepted"
            );
        }
    }
    let other = sig_keygen(&mut rng::derive(9, &[b"subject"]));
    ensure!(
        ca.sign(&p("subject"), &other.verification_key)
            == Err(CertError::AlreadyCertified(p("subject"))),
        "second certificate issued"
    );
    Ok(
        "64 flips each on attestation, key share and certificate rejected; second cert refused"
            .into(),
    )
}

fn criterion_9() -> Verdict {
    let s = demo();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let report = sim::run(&s, Mode::Both).map_err(|e| e.to_string())?;
        ensure!(
            report.divergence.is_none(),
            "both-mode diverged: {:?}",
            report.divergence
        );
        report
            .transcript
            .write_to(d.path())
            .map_err(|e| e.to_string())?;
    }
    for f in ["events.jsonl", "heatmap.csv", "risks.csv", "opcounts.csv"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        ensure!(a == b, "{f} differs between runs");
    }
    Ok("4 files byte-identical across two runs, no divergence".into())
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        ("1 ideal/real equivalence", criterion_1),
        ("2 threshold gating", criterion_2),
        ("3 compiler equivalence", criterion_3),
        ("4 heatmap end-to-end", criterion_4),
        ("5 eviction", criterion_5),
        ("6 leakage contract", criterion_6),
        ("7 per-user cost", criterion_7),
        ("8 attestation and certification", criterion_8),
        ("9 determinism", criterion_9),
    ];
    let mut failed = vec![];
    for (name, check) in criteria {
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .unwrap_or_else(|| "panicked".into()))
        });
        match verdict {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(why) => {
                println!("criterion {name}: FAIL ({why})");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
