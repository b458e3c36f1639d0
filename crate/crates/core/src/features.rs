//! Local incremental motion features for single-DoF robot skeletons.
//!
//! A raw motion of `T + 1` frames (root position, root rotation, joint
//! angles, foot contacts) encodes to `T` feature frames plus the initial
//! root pose. Each feature frame is laid out as
//!
//! ```text
//! [ phi(4) | dyaw | contacts(n_c) | dp_local(3) | height | q(n_q) | dq(n_q) ]
//! ```
//!
//! where `phi = (sin roll, cos roll - 1, sin pitch, cos pitch - 1)`,
//! `dyaw` is the yaw increment wrapped into `(-pi, pi]`, and `dp_local` is
//! the root translation increment expressed in the yaw-aligned frame of
//! the current step. Everything except the initial pose is invariant to
//! yaw rotations and horizontal translations of the whole motion.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{self, Quat, Vec3};
use crate::kinematics::SkeletonSpec;
use crate::{Error, Result};

/// Number of foot contact channels.
pub const N_CONTACTS: usize = 2;

/// Dimension of a flattened feature frame.
pub const fn feature_dim(n_q: usize, n_c: usize) -> usize {
    4 + 1 + n_c + 3 + 1 + 2 * n_q
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawMotionFrame {
    pub root_position: Vec3,
    pub root_orientation: Quat,
    pub q: Vec<f64>,
    pub contacts: Vec<bool>,
}

impl RawMotionFrame {
    /// A frame at rest: given root pose, joint angles, both feet down.
    pub fn standing(root_position: Vec3, root_orientation: Quat, q: Vec<f64>) -> Self {
        Self {
            root_position,
            root_orientation,
            q,
            contacts: alloc::vec![true; N_CONTACTS],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionFeatureFrame {
    pub phi: [f64; 4],
    pub dyaw: f64,
    /// Contact channels. Binary for encoded data; generators may emit
    /// fractional values, which decode thresholds at 0.5.
    pub contacts: Vec<f64>,
    pub dp_local: Vec3,
    pub height: f64,
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialPose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl InitialPose {
    pub fn from_frame(frame: &RawMotionFrame) -> Self {
        Self {
            position: frame.root_position,
            orientation: frame.root_orientation,
        }
    }
}

/// Sizes needed to flatten and unflatten feature frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureLayout {
    pub n_q: usize,
    pub n_c: usize,
}

impl FeatureLayout {
    pub const fn new(n_q: usize, n_c: usize) -> Self {
        Self { n_q, n_c }
    }

    pub fn for_skeleton(skeleton: &SkeletonSpec) -> Self {
        Self::new(skeleton.n_q(), N_CONTACTS)
    }

    pub const fn dim(&self) -> usize {
        feature_dim(self.n_q, self.n_c)
    }

    /// Offset of the joint-angle block inside a flattened frame.
    pub const fn q_offset(&self) -> usize {
        4 + 1 + self.n_c + 3 + 1
    }

    pub fn flatten_into(&self, f: &MotionFeatureFrame, out: &mut Vec<f64>) {
        out.extend_from_slice(&f.phi);
        out.push(f.dyaw);
        out.extend_from_slice(&f.contacts);
        out.extend_from_slice(&f.dp_local);
        out.push(f.height);
        out.extend_from_slice(&f.q);
        out.extend_from_slice(&f.dq);
    }

    pub fn flatten(&self, f: &MotionFeatureFrame) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        self.flatten_into(f, &mut out);
        out
    }

    pub fn flatten_all(&self, frames: &[MotionFeatureFrame]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim() * frames.len());
        for f in frames {
            self.flatten_into(f, &mut out);
        }
        out
    }

    pub fn unflatten(&self, v: &[f64]) -> Result<MotionFeatureFrame> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "feature frame",
                expected: self.dim(),
                got: v.len(),
            });
        }
        let (n_q, n_c) = (self.n_q, self.n_c);
        let c0 = 5;
        let p0 = c0 + n_c;
        let q0 = p0 + 4;
        Ok(MotionFeatureFrame {
            phi: [v[0], v[1], v[2], v[3]],
            dyaw: v[4],
            contacts: v[c0..p0].to_vec(),
            dp_local: [v[p0], v[p0 + 1], v[p0 + 2]],
            height: v[p0 + 3],
            q: v[q0..q0 + n_q].to_vec(),
            dq: v[q0 + n_q..q0 + 2 * n_q].to_vec(),
        })
    }

    pub fn unflatten_all(&self, v: &[f64]) -> Result<Vec<MotionFeatureFrame>> {
        let d = self.dim();
        if !v.len().is_multiple_of(d) {
            return Err(Error::DimensionMismatch {
                what: "flattened feature sequence",
                expected: d * (v.len() / d + 1),
                got: v.len(),
            });
        }
        v.chunks_exact(d).map(|c| self.unflatten(c)).collect()
    }

    pub fn layout_of(frame: &MotionFeatureFrame) -> Self {
        Self::new(frame.q.len(), frame.contacts.len())
    }
}

/// Non-fatal conditions reported by [`encode_features`].
#[derive(Debug, Clone, PartialEq)]
pub enum EncodeWarning {
    /// Root pitch within the singular band at this frame; roll was folded
    /// into yaw and the round trip is not exact there.
    GimbalLock { frame: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub features: Vec<MotionFeatureFrame>,
    pub init: InitialPose,
    pub warnings: Vec<EncodeWarning>,
}

fn validate_raw(raw: &[RawMotionFrame]) -> Result<FeatureLayout> {
    let first = raw.first().ok_or(Error::Empty("raw motion"))?;
    let layout = FeatureLayout::new(first.q.len(), first.contacts.len());
    for (t, f) in raw.iter().enumerate() {
        if f.q.len() != layout.n_q {
            return Err(Error::DimensionMismatch {
                what: "joint vector",
                expected: layout.n_q,
                got: f.q.len(),
            });
        }
        if f.contacts.len() != layout.n_c {
            return Err(Error::DimensionMismatch {
                what: "contact flags",
                expected: layout.n_c,
                got: f.contacts.len(),
            });
        }
        let finite = f.root_position.iter().all(|v| v.is_finite())
            && f.root_orientation.is_finite()
            && f.q.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                what: "raw motion frame",
                index: t,
            });
        }
    }
    Ok(layout)
}

/// Raw motion of `T + 1` frames to `T` feature frames and the initial pose.
pub fn encode_features(raw: &[RawMotionFrame]) -> Result<Encoded> {
    if raw.len() < 2 {
        return Err(Error::TooShort {
            what: "raw motion",
            needed: 2,
            got: raw.len(),
        });
    }
    validate_raw(raw)?;
    let mut warnings = Vec::new();
    let eulers: Vec<_> = raw
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let e = f.root_orientation.normalize().to_euler();
            if e.gimbal_locked {
                warnings.push(EncodeWarning::GimbalLock { frame: t });
            }
            e
        })
        .collect();
    let features = raw
        .windows(2)
        .zip(eulers.windows(2))
        .map(|(w, e)| {
            let (cur, next) = (&w[0], &w[1]);
            let (sr, cr) = libm::sincos(e[0].roll);
            let (sp, cp) = libm::sincos(e[0].pitch);
            MotionFeatureFrame {
                phi: [sr, cr - 1.0, sp, cp - 1.0],
                dyaw: geometry::wrap_angle(e[1].yaw - e[0].yaw),
                contacts: cur.contacts.iter().map(|&c| c as u8 as f64).collect(),
                dp_local: geometry::rotate_z_inv(
                    e[0].yaw,
                    geometry::sub(next.root_position, cur.root_position),
                ),
                height: cur.root_position[2],
                q: cur.q.clone(),
                dq: next.q.iter().zip(&cur.q).map(|(a, b)| a - b).collect(),
            }
        })
        .collect();
    Ok(Encoded {
        features,
        init: InitialPose::from_frame(&raw[0]),
        warnings,
    })
}

/// Inverse transform: `T` feature frames and an initial pose back to `T`
/// raw frames.
pub fn decode_features(
    features: &[MotionFeatureFrame],
    init: &InitialPose,
) -> Result<Vec<RawMotionFrame>> {
    decode_features_with_anchor(features, init).map(|(frames, _)| frames)
}

/// Like [`decode_features`], additionally integrating the increments of the
/// final frame to return the pose the next feature frame would start from.
/// Used to chain consecutively generated blocks.
pub fn decode_features_with_anchor(
    features: &[MotionFeatureFrame],
    init: &InitialPose,
) -> Result<(Vec<RawMotionFrame>, InitialPose)> {
    if features.is_empty() {
        return Err(Error::Empty("feature sequence"));
    }
    let norm = init.orientation.norm();
    if !(norm - 1.0).abs().le(&1e-6) {
        return Err(Error::InvalidArgument(alloc::format!(
            "initial orientation has norm {norm}"
        )));
    }
    let mut yaw = init.orientation.to_euler().yaw;
    let mut p = init.position;
    let mut frames = Vec::with_capacity(features.len());
    for f in features {
        let roll = libm::atan2(f.phi[0], f.phi[1] + 1.0);
        let pitch = libm::atan2(f.phi[2], f.phi[3] + 1.0);
        frames.push(RawMotionFrame {
            root_position: [p[0], p[1], f.height],
            root_orientation: Quat::from_euler(roll, pitch, yaw),
            q: f.q.clone(),
            contacts: f.contacts.iter().map(|&c| c >= 0.5).collect(),
        });
        p = geometry::add(p, geometry::rotate_z(yaw, f.dp_local));
        yaw += f.dyaw;
    }
    let next = InitialPose {
        position: p,
        orientation: Quat::from_yaw(yaw),
    };
    Ok((frames, next))
}

/// A `q`/`dq` disagreement between consecutive feature frames.
#[derive(Debug, Clone, PartialEq)]
pub struct DqMismatch {
    pub frame: usize,
    pub joint: usize,
    pub error: f64,
}

/// Checks `q[t+1] - q[t] == dq[t]` within `tol`. The redundant `dq` channel
/// is never used for reconstruction, so this is the only place it is read.
pub fn check_dq_consistency(features: &[MotionFeatureFrame], tol: f64) -> Vec<DqMismatch> {
    let mut out = Vec::new();
    for (t, w) in features.windows(2).enumerate() {
        for (j, ((a, b), d)) in w[1].q.iter().zip(&w[0].q).zip(&w[0].dq).enumerate() {
            let err = (a - b - d).abs();
            if !(err <= tol) {
                out.push(DqMismatch {
                    frame: t,
                    joint: j,
                    error: err,
                });
            }
        }
    }
    out
}

/// Reflects a raw motion about the sagittal plane using the skeleton's
/// mirror map. Contact channels are swapped.
pub fn mirror_motion(raw: &[RawMotionFrame], skeleton: &SkeletonSpec) -> Result<Vec<RawMotionFrame>> {
    if skeleton.mirror.is_none() {
        return Err(Error::MissingMirrorMap);
    }
    raw.iter()
        .map(|f| {
            let mut contacts = f.contacts.clone();
            contacts.reverse();
            Ok(RawMotionFrame {
                root_position: geometry::reflect_y(f.root_position),
                root_orientation: f.root_orientation.reflect_sagittal(),
                q: skeleton.mirror_joints(&f.q)?,
                contacts,
            })
        })
        .collect()
}

/// Swaps "left" and "right" tokens, matching case-insensitively and keeping
/// the capitalisation pattern of the original token.
pub fn mirror_text(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String| {
        if !word.is_empty() {
            out.push_str(&swap_side(word));
            word.clear();
        }
    };
    for ch in label.chars() {
        if ch.is_alphanumeric() {
            word.push(ch);
        } else {
            flush(&mut word, &mut out);
            out.push(ch);
        }
    }
    flush(&mut word, &mut out);
    out
}

fn swap_side(word: &str) -> String {
    let lower = word.to_lowercase();
    let replacement = match lower.as_str() {
        "left" => "right",
        "right" => "left",
        _ => return String::from(word),
    };
    if word.chars().all(|c| c.is_uppercase()) {
        replacement.to_uppercase()
    } else if word.chars().next().is_some_and(|c| c.is_uppercase()) {
        let mut s = String::new();
        let mut it = replacement.chars();
        if let Some(c) = it.next() {
            s.extend(c.to_uppercase());
        }
        s.extend(it);
        s
    } else {
        String::from(replacement)
    }
}
