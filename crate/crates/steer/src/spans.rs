//! Tab-separated annotation spans, text streams and command logs.
//!
//! Span files (annotations and command timelines share the schema):
//!
//! ```text
//! # steer-spans 1
//! 0.0	2.0	stand
//! 2.0	9.0	wave left hand
//! ```
//!
//! Command logs record the command latched by every generated block:
//!
//! ```text
//! # steer-commands 1
//! 0	stand
//! 8	wave left hand
//! ```
//!
//! The version line is optional on input; other `#` lines are comments.
#![allow(clippy::tabs_in_doc_comments)]

use std::fmt::Write as _;

use steer_core::corpus::AnnotationSpan;
use steer_core::primitive::CommandTimeline;

use crate::error::{Error, Result};

pub const SPANS_HEADER: &str = "steer-spans";
pub const COMMANDS_HEADER: &str = "steer-commands";
pub const TSV_VERSION: u32 = 1;

/// Data lines with their 1-based line numbers, after checking an optional
/// `# <magic> <version>` line.
fn records<'a>(text: &'a str, magic: &str, what: &'static str) -> Result<Vec<(usize, &'a str)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if let Some(c) = line.strip_prefix('#') {
            let mut t = c.split_whitespace();
            if t.next() == Some(magic) {
                let v = t.next().unwrap_or("");
                if v != TSV_VERSION.to_string() {
                    return Err(Error::Version {
                        what,
                        found: v.into(),
                        expected: TSV_VERSION.to_string(),
                    });
                }
            }
            continue;
        }
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn parse_spans(text: &str) -> Result<Vec<AnnotationSpan>> {
    const WHAT: &str = "span file";
    records(text, SPANS_HEADER, WHAT)?
        .into_iter()
        .map(|(n, line)| {
            let f: Vec<&str> = line.splitn(3, '\t').collect();
            if f.len() != 3 {
                return Err(Error::parse(WHAT, n, "expected start<TAB>end<TAB>text"));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(WHAT, n, format!("invalid time {s:?}")))
            };
            AnnotationSpan::new(num(f[0])?, num(f[1])?, f[2].trim())
                .map_err(|e| Error::parse(WHAT, n, e.to_string()))
        })
        .collect()
}

pub fn write_spans(spans: &[AnnotationSpan]) -> String {
    let mut out = format!("# {SPANS_HEADER} {TSV_VERSION}\n");
    for s in spans {
        let _ = writeln!(out, "{:?}\t{:?}\t{}", s.start, s.end, s.text);
    }
    out
}

/// Reads a text-stream file into a timeline; gaps between spans become
/// the idle command.
pub fn parse_timeline(text: &str) -> Result<CommandTimeline> {
    Ok(CommandTimeline::from_spans(&parse_spans(text)?)?)
}

pub fn write_timeline(timeline: &CommandTimeline) -> String {
    write_spans(&timeline.to_spans())
}

/// Command latched at the start of each block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandLogEntry {
    pub motion_index: usize,
    pub command: String,
}

pub fn parse_command_log(text: &str) -> Result<Vec<CommandLogEntry>> {
    const WHAT: &str = "command log";
    let mut out: Vec<CommandLogEntry> = Vec::new();
    for (n, line) in records(text, COMMANDS_HEADER, WHAT)? {
        let (idx, cmd) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(WHAT, n, "expected motion_index<TAB>command"))?;
        let motion_index: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::parse(WHAT, n, format!("invalid frame index {idx:?}")))?;
        if out.last().is_some_and(|p| p.motion_index >= motion_index) {
            return Err(Error::parse(WHAT, n, "frame indices must increase"));
        }
        out.push(CommandLogEntry {
            motion_index,
            command: cmd.trim().into(),
        });
    }
    Ok(out)
}

pub fn write_command_log(entries: &[CommandLogEntry]) -> String {
    let mut out = format!("# {COMMANDS_HEADER} {TSV_VERSION}\n");
    for e in entries {
        let _ = writeln!(out, "{}\t{}", e.motion_index, e.command);
    }
    out
}
