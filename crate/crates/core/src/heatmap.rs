//! Daily location heatmap over exposed users' hourly cell history.
//!
//! Each contributor becomes a `days x cells` matrix of hours; the function
//! keeps one circular buffer of day-rows per contributor, ages every buffer by
//! one day per call, and releases the column sums only when at least
//! `min_users` buffers are live.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{CodecError, Reader, Writer};
use crate::world::SecHistory;

pub const HOURS_PER_DAY: u64 = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HeatmapParams {
    pub cells: u32,
    pub min_users: u32,
    pub days: u32,
    #[serde(default)]
    pub home_cell: u32,
}

impl HeatmapParams {
    pub fn new(cells: u32, min_users: u32, days: u32) -> Result<Self, HeatmapError> {
        let p = Self {
            cells,
            min_users,
            days,
            home_cell: 0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), HeatmapError> {
        if self.cells == 0 || self.min_users == 0 || self.days == 0 {
            return Err(HeatmapError::BadParams);
        }
        if self.home_cell >= self.cells {
            return Err(HeatmapError::CellOutOfRange(self.home_cell));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HeatmapError {
    #[error("cells, min_users and days must all be at least 1")]
    BadParams,
    #[error("cell {0} out of range")]
    CellOutOfRange(u32),
    #[error("matrix {0} is malformed")]
    Malformed(usize),
    #[error("state encoding: {0}")]
    State(#[from] CodecError),
}

/// Hours per cell per day; row 0 is the oldest day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserMatrix {
    pub rows: Vec<Vec<u64>>,
}

impl UserMatrix {
    pub fn is_wellformed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.iter().sum::<u64>() == HOURS_PER_DAY)
    }

    fn has_shape(&self, p: &HeatmapParams) -> bool {
        self.rows.len() == p.days as usize && self.rows.iter().all(|r| r.len() == p.cells as usize)
    }
}

pub fn heatmap_wellformed(u: &UserMatrix) -> bool {
    u.is_wellformed()
}

/// Builds a user's matrix for the `days` days ending on the day of
/// `history.as_of_tick`. Hours with no sample are attributed to `home_cell`.
pub fn encode_sec_history(
    history: &SecHistory,
    p: &HeatmapParams,
) -> Result<UserMatrix, HeatmapError> {
    let last_day = history.as_of_tick / HOURS_PER_DAY;
    let days = u64::from(p.days);
    let first_day = (last_day + 1).saturating_sub(days);
    let pad = days - (last_day + 1 - first_day);

    let mut seen: BTreeMap<(u64, u64), u32> = BTreeMap::new();
    for (tick, data) in &history.samples {
        if data.location_cell >= p.cells {
            return Err(HeatmapError::CellOutOfRange(data.location_cell));
        }
        let day = tick / HOURS_PER_DAY;
        if *tick <= history.as_of_tick && day >= first_day {
            seen.insert(
                (day, u64::from(data.hour) % HOURS_PER_DAY),
                data.location_cell,
            );
        }
    }

    let mut rows = vec![vec![0u64; p.cells as usize]; p.days as usize];
    for (i, row) in rows.iter_mut().enumerate() {
        let i = i as u64;
        if i < pad {
            row[p.home_cell as usize] = HOURS_PER_DAY;
            continue;
        }
        let day = first_day + (i - pad);
        for hour in 0..HOURS_PER_DAY {
            let cell = seen.get(&(day, hour)).copied().unwrap_or(p.home_cell);
            row[cell as usize] += 1;
        }
    }
    Ok(UserMatrix { rows })
}

/// Fixed-capacity FIFO of day vectors; appending past capacity drops the oldest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DayBuffer {
    capacity: usize,
    entries: VecDeque<Vec<u64>>,
}

impl DayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, row: Vec<u64>) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(row);
    }

    pub fn is_all_zero(&self) -> bool {
        self.entries.iter().all(|r| r.iter().all(|&v| v == 0))
    }

    pub fn entries(&self) -> impl Iterator<Item = &Vec<u64>> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeatmapState {
    pub buffers: Vec<DayBuffer>,
}

impl HeatmapState {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.buffers.len() as u32);
        for b in &self.buffers {
            w.u32(b.capacity as u32).u32(b.entries.len() as u32);
            for row in &b.entries {
                w.u32(row.len() as u32);
                for v in row {
                    w.u64(*v);
                }
            }
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut r = Reader::new(bytes);
        let n = r.u32()? as usize;
        let mut buffers = Vec::new();
        for _ in 0..n {
            let capacity = r.u32()? as usize;
            let len = r.u32()? as usize;
            let mut b = DayBuffer::new(capacity);
            for _ in 0..len {
                let cols = r.u32()? as usize;
                let mut row = Vec::with_capacity(cols.min(r.remaining() / 8));
                for _ in 0..cols {
                    row.push(r.u64()?);
                }
                b.push(row);
            }
            buffers.push(b);
        }
        r.finish()?;
        Ok(Self { buffers })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MalformedPolicy {
    /// Drop bad matrices and process the rest.
    #[default]
    RejectIndividually,
    /// Any bad matrix fails the whole call with no state change.
    AbortAll,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapStep {
    pub output: Vec<u64>,
    pub state: HeatmapState,
    pub rejected: Vec<usize>,
}

pub fn heatmap_step(
    inputs: &[UserMatrix],
    state: &HeatmapState,
    p: &HeatmapParams,
    policy: MalformedPolicy,
) -> Result<HeatmapStep, HeatmapError> {
    let (valid, rejected): (Vec<_>, Vec<_>) = inputs
        .iter()
        .enumerate()
        .partition(|(_, u)| u.has_shape(p) && u.is_wellformed());
    let rejected: Vec<usize> = rejected.into_iter().map(|(i, _)| i).collect();
    if policy == MalformedPolicy::AbortAll {
        if let Some(&i) = rejected.first() {
            return Err(HeatmapError::Malformed(i));
        }
    }

    let mut next = state.clone();
    let cells = p.cells as usize;
    for b in &mut next.buffers {
        b.push(vec![0; cells]);
    }
    next.buffers.retain(|b| !b.is_all_zero());

    for (_, u) in valid {
        let mut b = DayBuffer::new(p.days as usize);
        for row in &u.rows {
            b.push(row.clone());
        }
        next.buffers.push(b);
    }

    let mut output = vec![0u64; cells];
    if next.buffers.len() >= p.min_users as usize {
        for row in next.buffers.iter().flat_map(DayBuffer::entries) {
            for (acc, v) in output.iter_mut().zip(row) {
                *acc += v;
            }
        }
    }
    Ok(HeatmapStep {
        output,
        state: next,
        rejected,
    })
}

pub fn encode_output(y: &[u64]) -> Vec<u8> {
    y.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub fn decode_output(bytes: &[u8]) -> Option<Vec<u64>> {
    if !bytes.len().is_multiple_of(8) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
    )
}
