//! Session instrumentation log and per-stage latency statistics.
//!
//! Times are milliseconds on the server's monotonic clock since session
//! start. The end-to-end latency of a command runs from its receipt to the
//! first emitted frame whose active command is that text; it stops at frame
//! emission and excludes any actuation.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    CommandReceived {
        t_ms: f64,
        text: String,
        client_time_ms: Option<f64>,
    },
    Embed {
        t_ms: f64,
        duration_ms: f64,
    },
    Generate {
        t_ms: f64,
        duration_ms: f64,
        motion_index: u64,
        command: String,
    },
    /// First frame on the wire carrying a newly latched command.
    CommandOnAir {
        t_ms: f64,
        frame_index: u64,
        motion_index: u64,
        command: String,
    },
    Pong {
        t_ms: f64,
        duration_ms: f64,
    },
    Underrun {
        t_ms: f64,
        frame_index: u64,
    },
}

/// Minimum samples per timed stage accepted by [`measure_latency`].
pub const MIN_LATENCY_EVENTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

impl Stats {
    pub fn of(samples: &[f64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        Some(Self {
            count: samples.len(),
            mean,
            sd: var.sqrt(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatencyReport {
    pub embed_ms: Stats,
    pub generator_ms: Stats,
    /// `None` when no command reached the wire.
    pub end_to_end_ms: Option<Stats>,
    pub pong_ms: Option<Stats>,
    pub pong_samples: usize,
    pub underruns: usize,
}

/// Per-stage statistics; errors when embedding or generation has fewer
/// than `min_events` samples.
pub fn measure_latency(events: &[LogEvent], min_events: usize) -> Result<LatencyReport> {
    let mut embed = Vec::new();
    let mut generate = Vec::new();
    let mut pongs = Vec::new();
    let mut underruns = 0;
    for e in events {
        match e {
            LogEvent::Embed { duration_ms, .. } => embed.push(*duration_ms),
            LogEvent::Generate { duration_ms, .. } => generate.push(*duration_ms),
            LogEvent::Pong { duration_ms, .. } => pongs.push(*duration_ms),
            LogEvent::Underrun { .. } => underruns += 1,
            _ => {}
        }
    }
    for (what, n) in [("embed", embed.len()), ("generate", generate.len())] {
        if n < min_events.max(1) {
            return Err(Error::format(
                "latency log",
                format!("{n} {what} events; at least {min_events} needed"),
            ));
        }
    }
    Ok(LatencyReport {
        embed_ms: Stats::of(&embed).expect("non-empty"),
        generator_ms: Stats::of(&generate).expect("non-empty"),
        end_to_end_ms: Stats::of(&end_to_end(events)),
        pong_ms: Stats::of(&pongs),
        pong_samples: pongs.len(),
        underruns,
    })
}

/// Receipt-to-wire delay of every command that reached the wire.
pub fn end_to_end(events: &[LogEvent]) -> Vec<f64> {
    let on_air: Vec<(f64, &str)> = events
        .iter()
        .filter_map(|e| match e {
            LogEvent::CommandOnAir { t_ms, command, .. } => Some((*t_ms, command.as_str())),
            _ => None,
        })
        .collect();
    events
        .iter()
        .filter_map(|e| match e {
            LogEvent::CommandReceived { t_ms, text, .. } => on_air
                .iter()
                .find(|(t, c)| *t >= *t_ms && *c == text)
                .map(|(t, _)| t - t_ms),
            _ => None,
        })
        .collect()
}

pub fn write_log<W: Write>(events: &[LogEvent], mut w: W) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_log<R: BufRead>(r: R) -> Result<Vec<LogEvent>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::parse("session log", i + 1, e.to_string()))?,
        );
    }
    Ok(out)
}
