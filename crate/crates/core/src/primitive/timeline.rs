use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::AnnotationSpan;
use crate::{Error, Result};

/// Command in effect when no event is active.
pub const IDLE_COMMAND: &str = "stand";

#[derive(Debug, Clone, PartialEq)]
pub struct CommandEvent {
    /// Seconds from session start.
    pub time: f64,
    pub text: String,
}

/// Time-sorted text commands with a total duration.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandTimeline {
    events: Vec<CommandEvent>,
    duration: f64,
}

impl CommandTimeline {
    pub fn new(events: Vec<CommandEvent>, duration: f64) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "timeline duration {duration} must be positive"
            )));
        }
        let mut prev = 0.0;
        for (i, e) in events.iter().enumerate() {
            if !(e.time >= prev && e.time.is_finite()) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "event {i} at {} s is negative or out of order",
                    e.time
                )));
            }
            prev = e.time;
        }
        Ok(Self { events, duration })
    }

    /// Single command for the whole duration.
    pub fn constant(text: &str, duration: f64) -> Result<Self> {
        Self::new(
            alloc::vec![CommandEvent {
                time: 0.0,
                text: text.into(),
            }],
            duration,
        )
    }

    /// Converts sorted spans to events. Gaps between spans, and the time
    /// before the first span, fall back to [`IDLE_COMMAND`]. The duration is
    /// the end of the last span.
    pub fn from_spans(spans: &[AnnotationSpan]) -> Result<Self> {
        let last = spans.last().ok_or(Error::Empty("text stream"))?;
        let mut events = Vec::new();
        let mut cursor = 0.0;
        for s in spans {
            if s.start < cursor - 1e-9 {
                return Err(Error::InvalidArgument(alloc::format!(
                    "span starting at {} s overlaps the previous one",
                    s.start
                )));
            }
            if s.start > cursor + 1e-9 {
                events.push(CommandEvent {
                    time: cursor,
                    text: IDLE_COMMAND.into(),
                });
            }
            events.push(CommandEvent {
                time: s.start,
                text: s.text.clone(),
            });
            cursor = s.end;
        }
        Self::new(events, last.end)
    }

    /// Back to contiguous spans, one per event.
    pub fn to_spans(&self) -> Vec<AnnotationSpan> {
        self.events
            .iter()
            .enumerate()
            .filter_map(|(i, e)| {
                let end = self.events.get(i + 1).map_or(self.duration, |n| n.time);
                AnnotationSpan::new(e.time, end, &e.text).ok()
            })
            .collect()
    }

    pub fn events(&self) -> &[CommandEvent] {
        &self.events
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Text of the latest event with `time <= t`, or [`IDLE_COMMAND`].
    pub fn active_at(&self, t: f64) -> &str {
        self.events
            .iter()
            .take_while(|e| e.time <= t)
            .last()
            .map_or(IDLE_COMMAND, |e| e.text.as_str())
    }
}
