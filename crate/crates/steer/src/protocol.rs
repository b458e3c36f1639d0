//! Line-delimited JSON wire protocol.
//!
//! Every message is one JSON object on one `\n`-terminated line with a
//! `"type"` tag. On connect the server sends [`Outbound::Hello`] carrying
//! the protocol version and the skeleton, so clients can run forward
//! kinematics themselves.

use serde::{Deserialize, Serialize};
use steer_core::kinematics::{Joint, MirrorEntry};
use steer_core::SkeletonSpec;

pub const PROTOCOL_VERSION: u32 = 1;

/// Upper bound on an inbound line, in bytes.
pub const MAX_LINE_BYTES: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Inbound {
    Command {
        text: String,
        /// Echoed into the log; never used for timing.
        #[serde(default)]
        client_time_ms: Option<f64>,
    },
    Ping {
        nonce: serde_json::Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointWire {
    pub name: String,
    /// `-1` for joints attached to the root link.
    pub parent_index: i64,
    pub axis: [f64; 3],
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirrorWire {
    pub source: usize,
    pub sign: f64,
}

/// Skeleton description as sent in the hello message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonWire {
    pub name: String,
    pub joints: Vec<JointWire>,
    pub ankle_indices: [usize; 2],
    pub mirror_map: Option<Vec<MirrorWire>>,
    pub fingerprint: String,
}

impl From<&SkeletonSpec> for SkeletonWire {
    fn from(s: &SkeletonSpec) -> Self {
        Self {
            name: s.name.clone(),
            joints: s
                .joints
                .iter()
                .map(|j| JointWire {
                    name: j.name.clone(),
                    parent_index: j.parent.map_or(-1, |p| p as i64),
                    axis: j.axis,
                    offset: j.offset,
                })
                .collect(),
            ankle_indices: [s.ankles.0, s.ankles.1],
            mirror_map: s.mirror.as_ref().map(|m| {
                m.iter()
                    .map(|e| MirrorWire {
                        source: e.source,
                        sign: e.sign,
                    })
                    .collect()
            }),
            fingerprint: crate::clip::fingerprint_hex(s),
        }
    }
}

impl SkeletonWire {
    pub fn to_spec(&self) -> steer_core::Result<SkeletonSpec> {
        let joints = self
            .joints
            .iter()
            .map(|j| {
                Ok(Joint {
                    name: j.name.clone(),
                    parent: match j.parent_index {
                        -1 => None,
                        p if p >= 0 => Some(p as usize),
                        p => {
                            return Err(steer_core::Error::InvalidSkeleton(format!(
                                "parent index {p}"
                            )))
                        }
                    },
                    axis: j.axis,
                    offset: j.offset,
                })
            })
            .collect::<steer_core::Result<Vec<_>>>()?;
        let mirror = self.mirror_map.as_ref().map(|m| {
            m.iter()
                .map(|e| MirrorEntry {
                    source: e.source,
                    sign: e.sign,
                })
                .collect()
        });
        SkeletonSpec::new(
            self.name.clone(),
            joints,
            (self.ankle_indices[0], self.ankle_indices[1]),
            mirror,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    Hello {
        protocol_version: u32,
        frame_rate: f64,
        frames_per_block: usize,
        idle_command: String,
        skeleton: SkeletonWire,
    },
    Frame {
        /// Emitter tick; increases by one per message.
        frame_index: u64,
        /// Index of the motion frame shown; repeats while held.
        motion_index: u64,
        /// The buffer was empty and the previous frame is repeated.
        held: bool,
        /// Milliseconds since the server session started.
        time_ms: f64,
        root_position: [f64; 3],
        root_quaternion: [f64; 4],
        q: Vec<f64>,
        contacts: Vec<bool>,
        active_command: String,
    },
    Pong {
        nonce: serde_json::Value,
        server_time_ms: f64,
    },
    Status {
        buffer_depth: usize,
        underruns: u64,
        overruns: u64,
        generator_period_ms: f64,
        generator_steps: u64,
    },
    Error {
        code: String,
        message: String,
    },
}

impl Outbound {
    /// Serialised message including the trailing newline.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("outbound messages serialise");
        s.push('\n');
        s
    }
}

/// Parses one inbound line; the error is ready to send back.
pub fn parse_inbound(line: &str) -> Result<Inbound, Outbound> {
    if line.len() > MAX_LINE_BYTES {
        return Err(Outbound::Error {
            code: "line_too_long".into(),
            message: format!("lines are limited to {MAX_LINE_BYTES} bytes"),
        });
    }
    serde_json::from_str(line).map_err(|e| Outbound::Error {
        code: "malformed_message".into(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use steer_core::kinematics::builtin::humanoid29;

    #[test]
    fn inbound_parsing() {
        assert_eq!(
            parse_inbound(r#"{"type":"command","text":"walk","client_time_ms":12.5}"#).unwrap(),
            Inbound::Command {
                text: "walk".into(),
                client_time_ms: Some(12.5)
            }
        );
        assert_eq!(
            parse_inbound(r#"{"type":"ping","nonce":7}"#).unwrap(),
            Inbound::Ping { nonce: 7.into() }
        );
        for bad in ["", "{", r#"{"type":"dance"}"#, r#"{"type":"command"}"#, "[1]"] {
            assert!(matches!(parse_inbound(bad), Err(Outbound::Error { .. })), "{bad}");
        }
    }

    #[test]
    fn skeleton_wire_round_trip() {
        let s = humanoid29();
        let w = SkeletonWire::from(&s);
        let json = serde_json::to_string(&w).unwrap();
        let back: SkeletonWire = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_spec().unwrap(), s);
    }

    #[test]
    fn outbound_is_one_line_with_type_tag() {
        let m = Outbound::Pong {
            nonce: "a".into(),
            server_time_ms: 1.0,
        };
        let line = m.to_line();
        assert!(line.ends_with('\n') && line.matches('\n').count() == 1);
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["type"], "pong");
    }
}
