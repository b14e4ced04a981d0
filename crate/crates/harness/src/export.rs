//! Episode logs as JSONL, metric tables as CSV.

use crate::eval::{EpisodeRecord, LatencySummary, MetricsSummary};
use anyhow::{Context, Result};
use serde::Serialize;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub fn write_jsonl(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for r in sorted(records) {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn sorted(records: &[EpisodeRecord]) -> Vec<&EpisodeRecord> {
    let mut v: Vec<&EpisodeRecord> = records.iter().collect();
    v.sort_by_key(|r| (r.policy.name(), r.scenario.name(), r.seed));
    v
}

/// Full per-suite breakdown; wall-clock figures live in the latency table
/// so this file is reproducible.
pub fn write_metrics_csv(path: &Path, rows: &[MetricsSummary]) -> Result<()> {
    write_csv(path, rows, &["policy", "scenario", "episodes", "success_rate", "collision_rate", "timeout_rate", "off_road_rate", "mean_speed"])
}

#[derive(Serialize)]
struct TableRow {
    policy: String,
    scenario: String,
    sr: f64,
    cr: f64,
    speed: f64,
}

/// Success rate, collision rate and speed per (policy, scenario).
pub fn write_table_csv(path: &Path, rows: &[MetricsSummary]) -> Result<()> {
    let rows: Vec<TableRow> = rows
        .iter()
        .map(|m| TableRow {
            policy: m.policy.name().into(),
            scenario: m.scenario.name().into(),
            sr: m.success_rate,
            cr: m.collision_rate,
            speed: m.mean_speed,
        })
        .collect();
    write_csv(path, &rows, &["policy", "scenario", "sr", "cr", "speed"])
}

pub fn write_latency_csv(path: &Path, rows: &[LatencySummary]) -> Result<()> {
    write_csv(path, rows, &["policy", "scenario", "decisions", "mean_ms", "p95_ms"])
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsSummary>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// The header is written even when `rows` is empty.
fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
