use std::path::Path;

use serde::Serialize;

use crate::counters::Op;
use crate::ids::PartyId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EventRecord {
    pub tick: u64,
    pub actor: String,
    pub op: String,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeatmapRow {
    pub tick: u64,
    pub cells: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RiskRow {
    pub tick: u64,
    pub user: PartyId,
    pub risk: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpRow {
    pub tick: u64,
    pub event: String,
    pub actor: PartyId,
    pub op: Op,
    pub count: u64,
}

fn writer(path: &Path) -> csv::Result<csv::Writer<std::fs::File>> {
    // headers are written by hand so empty tables still get one
    csv::WriterBuilder::new().has_headers(false).from_path(path)
}

/// Everything a run reports.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub cells: u32,
    pub events: Vec<EventRecord>,
    pub heatmap: Vec<HeatmapRow>,
    pub risks: Vec<RiskRow>,
    pub opcounts: Vec<OpRow>,
}

impl Transcript {
    pub fn new(cells: u32) -> Self {
        Self {
            cells,
            ..Self::default()
        }
    }

    pub fn events_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event record serializes") + "\n")
            .collect()
    }

    /// Writes `events.jsonl`, `heatmap.csv`, `risks.csv` and `opcounts.csv`.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("events.jsonl"), self.events_jsonl())?;

        let mut w = writer(&dir.join("heatmap.csv"))?;
        let header =
            std::iter::once("tick".to_owned()).chain((0..self.cells).map(|c| format!("cell_{c}")));
        w.write_record(header)?;
        for row in &self.heatmap {
            w.write_record(
                std::iter::once(row.tick)
                    .chain(row.cells.iter().copied())
                    .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;

        let mut w = writer(&dir.join("risks.csv"))?;
        w.write_record(["tick", "user", "risk"])?;
        for row in &self.risks {
            w.serialize(row)?;
        }
        w.flush()?;

        let mut w = writer(&dir.join("opcounts.csv"))?;
        w.write_record(["tick", "event", "actor", "op", "count"])?;
        for row in &self.opcounts {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}
