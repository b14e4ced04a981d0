use crate::eval::EpisodeRecord;
use anyhow::{Context, Result};
use serde::Serialize;
use std::path::Path;

/// One CSV row per (tick, actor); the ego has `agent = -1`.
#[derive(Debug, Serialize)]
struct ReplayRow {
    tick: u64,
    agent: i64,
    x: f64,
    y: f64,
    heading: f64,
    speed: f64,
    visible: bool,
    stopping: bool,
    vr_vertices: usize,
}

pub fn write_replay_csv(path: &Path, record: &EpisodeRecord) -> Result<usize> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut rows = 0;
    for t in &record.ticks {
        let ego = ReplayRow {
            tick: t.tick,
            agent: -1,
            x: t.x,
            y: t.y,
            heading: t.heading,
            speed: t.speed,
            visible: true,
            stopping: t.stopping,
            vr_vertices: t.vr_vertices,
        };
        w.serialize(ego)?;
        rows += 1;
        for a in &t.agents {
            w.serialize(ReplayRow {
                tick: t.tick,
                agent: a.id as i64,
                x: a.x,
                y: a.y,
                heading: a.heading,
                speed: a.speed,
                visible: a.visible,
                stopping: false,
                vr_vertices: t.vr_vertices,
            })?;
            rows += 1;
        }
    }
    w.flush()?;
    Ok(rows)
}
