//! Binary motion-clip container.
//!
//! Layout:
//!
//! 1. the ASCII line `STEERCLIP 1\n`;
//! 2. one line of JSON holding [`ClipHeader`], terminated by `\n`;
//! 3. `frame_count` records of `3 + 4 + n_q + n_c` little-endian `f64`:
//!    root position (m), root quaternion `w x y z`, joint angles (rad),
//!    and contact flags stored as exactly `0.0` or `1.0`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use steer_core::features::{check_dq_consistency, encode_features};
use steer_core::{Quat, RawMotionFrame, SkeletonSpec, FRAME_RATE_HZ};

use crate::error::{Error, Result};

pub const CLIP_MAGIC: &str = "STEERCLIP";
pub const CLIP_VERSION: u32 = 1;

const WHAT: &str = "clip file";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipHeader {
    pub version: u32,
    /// Hex [`SkeletonSpec::fingerprint`] of the skeleton the clip was made for.
    pub skeleton_fingerprint: String,
    pub frame_rate: f64,
    pub frame_count: usize,
    pub n_q: usize,
    pub n_c: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionClip {
    pub header: ClipHeader,
    pub frames: Vec<RawMotionFrame>,
}

impl MotionClip {
    /// Wraps frames recorded at [`FRAME_RATE_HZ`] for `skeleton`.
    pub fn new(skeleton: &SkeletonSpec, frames: Vec<RawMotionFrame>) -> Result<Self> {
        let n_c = frames.first().map_or(steer_core::features::N_CONTACTS, |f| f.contacts.len());
        for (i, f) in frames.iter().enumerate() {
            if f.q.len() != skeleton.n_q() || f.contacts.len() != n_c {
                return Err(Error::format(WHAT, format!("frame {i} has the wrong joint or contact count")));
            }
            check_finite(i, f)?;
        }
        Ok(Self {
            header: ClipHeader {
                version: CLIP_VERSION,
                skeleton_fingerprint: fingerprint_hex(skeleton),
                frame_rate: FRAME_RATE_HZ,
                frame_count: frames.len(),
                n_q: skeleton.n_q(),
                n_c,
            },
            frames,
        })
    }

    /// Errors unless the clip was written for `skeleton`.
    pub fn check_skeleton(&self, skeleton: &SkeletonSpec) -> Result<()> {
        let found = u64::from_str_radix(&self.header.skeleton_fingerprint, 16)
            .map_err(|_| Error::format(WHAT, "malformed skeleton fingerprint"))?;
        if found != skeleton.fingerprint() {
            return Err(Error::SkeletonMismatch {
                expected: skeleton.fingerprint(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = format!("{CLIP_MAGIC} {CLIP_VERSION}\n").into_bytes();
        out.extend(serde_json::to_vec(&self.header).expect("header serialises"));
        out.push(b'\n');
        for f in &self.frames {
            let quat = f.root_orientation.to_array();
            let values = f
                .root_position
                .iter()
                .chain(&quat)
                .chain(&f.q)
                .copied()
                .chain(f.contacts.iter().map(|&c| if c { 1.0 } else { 0.0 }));
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (magic, rest) = split_line(bytes, 0)?;
        let magic = std::str::from_utf8(magic).map_err(|_| Error::format(WHAT, "header is not UTF-8"))?;
        let (name, version) = magic.split_once(' ').unwrap_or((magic, ""));
        if name != CLIP_MAGIC {
            return Err(Error::format(WHAT, "missing STEERCLIP magic"));
        }
        if version != CLIP_VERSION.to_string() {
            return Err(Error::Version {
                what: WHAT,
                found: version.into(),
                expected: CLIP_VERSION.to_string(),
            });
        }
        let offset = bytes.len() - rest.len();
        let (json, body) = split_line(rest, offset)?;
        let header: ClipHeader = serde_json::from_slice(json)?;
        if header.version != CLIP_VERSION {
            return Err(Error::Version {
                what: WHAT,
                found: header.version.to_string(),
                expected: CLIP_VERSION.to_string(),
            });
        }
        if !(header.frame_rate > 0.0 && header.frame_rate.is_finite()) {
            return Err(Error::format(WHAT, format!("frame rate {} must be positive", header.frame_rate)));
        }
        let start = bytes.len() - body.len();
        let width = 7 + header.n_q + header.n_c;
        let record = 8 * width;
        let mut frames = Vec::with_capacity(header.frame_count.min(body.len() / record.max(1)));
        let mut values = vec![0.0; width];
        for i in 0..header.frame_count {
            let at = i * record;
            if body.len() < at + record {
                return Err(Error::Truncated {
                    what: WHAT,
                    offset: start + body.len(),
                    needed: at + record - body.len(),
                });
            }
            for (k, v) in values.iter_mut().enumerate() {
                let b = &body[at + 8 * k..at + 8 * k + 8];
                *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
            }
            let contacts = values[7 + header.n_q..]
                .iter()
                .map(|&c| match c {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    _ => Err(Error::format(WHAT, format!("frame {i} has contact value {c}"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let frame = RawMotionFrame {
                root_position: [values[0], values[1], values[2]],
                root_orientation: Quat::from_array([values[3], values[4], values[5], values[6]]),
                q: values[7..7 + header.n_q].to_vec(),
                contacts,
            };
            check_finite(i, &frame)?;
            frames.push(frame);
        }
        let used = header.frame_count * record;
        if body.len() > used {
            return Err(Error::format(
                WHAT,
                format!("{} trailing bytes after the last frame", body.len() - used),
            ));
        }
        Ok(Self { header, frames })
    }

    /// Human-readable JSON rendering for debugging and interchange.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "header": self.header,
            "frames": self.frames.iter().map(|f| serde_json::json!({
                "root_position": f.root_position,
                "root_quaternion": f.root_orientation.to_array(),
                "q": f.q,
                "contacts": f.contacts,
            })).collect::<Vec<_>>(),
        })
    }
}

fn split_line(bytes: &[u8], offset: usize) -> Result<(&[u8], &[u8])> {
    let nl = bytes.iter().position(|&b| b == b'\n').ok_or(Error::Truncated {
        what: WHAT,
        offset: offset + bytes.len(),
        needed: 1,
    })?;
    Ok((&bytes[..nl], &bytes[nl + 1..]))
}

fn check_finite(i: usize, f: &RawMotionFrame) -> Result<()> {
    let finite = f.root_position.iter().chain(&f.q).all(|v| v.is_finite()) && f.root_orientation.is_finite();
    if !finite {
        return Err(Error::format(WHAT, format!("frame {i} holds a non-finite value")));
    }
    Ok(())
}

pub fn fingerprint_hex(skeleton: &SkeletonSpec) -> String {
    format!("{:016x}", skeleton.fingerprint())
}

pub fn save_clip(clip: &MotionClip, path: &Path) -> Result<()> {
    std::fs::write(path, clip.to_bytes())?;
    Ok(())
}

pub fn load_clip(path: &Path) -> Result<MotionClip> {
    MotionClip::from_bytes(&std::fs::read(path)?)
}

/// Tolerance on quaternion norms and on the joint-increment consistency.
pub const VALIDATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    SkeletonMismatch,
    JointCount,
    NonFinite,
    NonUnitQuaternion,
    DqInconsistent,
    EncodeFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub kind: IssueKind,
    pub frame: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub frames: usize,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks skeleton match, finiteness, quaternion norms, and that the
/// clip encodes to features with consistent joint increments.
pub fn validate_clip(clip: &MotionClip, skeleton: &SkeletonSpec) -> ValidationReport {
    let mut issues = Vec::new();
    let mut push = |kind, frame, detail: String| issues.push(ValidationIssue { kind, frame, detail });
    if let Err(e) = clip.check_skeleton(skeleton) {
        push(IssueKind::SkeletonMismatch, None, e.to_string());
    }
    let mut structurally_ok = true;
    for (i, f) in clip.frames.iter().enumerate() {
        if f.q.len() != skeleton.n_q() {
            push(IssueKind::JointCount, Some(i), format!("{} joint angles for {} joints", f.q.len(), skeleton.n_q()));
            structurally_ok = false;
        }
        let finite = f.root_position.iter().chain(&f.q).all(|v| v.is_finite()) && f.root_orientation.is_finite();
        if !finite {
            push(IssueKind::NonFinite, Some(i), "non-finite value".into());
            structurally_ok = false;
        } else if (f.root_orientation.norm() - 1.0).abs() > VALIDATION_TOL {
            push(
                IssueKind::NonUnitQuaternion,
                Some(i),
                format!("quaternion norm {}", f.root_orientation.norm()),
            );
            structurally_ok = false;
        }
    }
    if structurally_ok && clip.frames.len() >= 2 {
        match encode_features(&clip.frames) {
            Ok(enc) => {
                for m in check_dq_consistency(&enc.features, VALIDATION_TOL) {
                    push(
                        IssueKind::DqInconsistent,
                        Some(m.frame),
                        format!("joint {} increment error {}", m.joint, m.error),
                    );
                }
            }
            Err(e) => push(IssueKind::EncodeFailed, None, e.to_string()),
        }
    }
    ValidationReport {
        frames: clip.frames.len(),
        issues,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use steer_core::kinematics::builtin::biped5;

    fn clip() -> MotionClip {
        let s = biped5();
        let frames = (0..5)
            .map(|t| RawMotionFrame {
                root_position: [0.01 * t as f64, 0.0, 0.8],
                root_orientation: Quat::from_yaw(0.1 * t as f64),
                q: vec![0.1 * t as f64; 5],
                contacts: vec![t % 2 == 0, true],
            })
            .collect();
        MotionClip::new(&s, frames).unwrap()
    }

    #[test]
    fn bytes_round_trip_bitwise() {
        let c = clip();
        let back = MotionClip::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back, c);
        back.check_skeleton(&biped5()).unwrap();
        assert!(validate_clip(&back, &biped5()).is_ok());
    }

    #[test]
    fn truncation_names_offset() {
        let bytes = clip().to_bytes();
        let cut = bytes.len() - 12;
        match MotionClip::from_bytes(&bytes[..cut]) {
            Err(Error::Truncated { offset, needed, .. }) => {
                assert_eq!(offset, cut);
                assert_eq!(needed, 12);
            }
            other => panic!("{other:?}"),
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(MotionClip::from_bytes(&extra).is_err());
    }

    #[test]
    fn version_and_skeleton_checks() {
        let mut bytes = clip().to_bytes();
        bytes[10] = b'9';
        assert!(matches!(MotionClip::from_bytes(&bytes), Err(Error::Version { .. })));
        let other = steer_core::kinematics::builtin::humanoid29();
        assert!(matches!(clip().check_skeleton(&other), Err(Error::SkeletonMismatch { .. })));
    }

    #[test]
    fn validation_flags_bad_quaternion() {
        let mut c = clip();
        c.frames[3].root_orientation = Quat::from_array([1.1, 0.0, 0.0, 0.0]);
        let r = validate_clip(&c, &biped5());
        assert_eq!(r.issues.len(), 1);
        assert_eq!(r.issues[0].kind, IssueKind::NonUnitQuaternion);
        assert_eq!(r.issues[0].frame, Some(3));
    }
}
