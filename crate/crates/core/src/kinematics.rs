//! Skeletons built from single-DoF revolute joints, forward kinematics, and
//! foot-contact extraction.
//!
//! Link indexing: link 0 is the root (pelvis); joint `i` drives link `i + 1`.
//! A joint's `parent` names the joint whose link it hangs from, or `None`
//! when it is attached directly to the root link.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::geometry::{self, Quat, Vec3};
use crate::{Error, Result};

/// Tolerance on joint-axis unit norm.
pub const AXIS_NORM_TOL: f64 = 1e-9;

/// Default contact thresholds: squared per-frame displacement (m^2) and
/// ankle height (m).
pub const CONTACT_EPS_VEL: f64 = 0.002;
pub const CONTACT_EPS_HEIGHT: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub parent: Option<usize>,
    pub axis: Vec3,
    /// Offset of this joint's link origin in the parent link frame.
    pub offset: Vec3,
}

/// Where a joint maps under left/right mirroring: `q'[i] = sign * q[source]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorEntry {
    pub source: usize,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSpec {
    pub name: String,
    pub joints: Vec<Joint>,
    /// Joint indices whose links are the left and right ankles.
    pub ankles: (usize, usize),
    pub mirror: Option<Vec<MirrorEntry>>,
}

impl SkeletonSpec {
    /// Builds and validates a skeleton.
    pub fn new(
        name: impl Into<String>,
        joints: Vec<Joint>,
        ankles: (usize, usize),
        mirror: Option<Vec<MirrorEntry>>,
    ) -> Result<Self> {
        let s = Self {
            name: name.into(),
            joints,
            ankles,
            mirror,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n_q(&self) -> usize {
        self.joints.len()
    }

    /// Number of links including the root.
    pub fn n_links(&self) -> usize {
        self.joints.len() + 1
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::InvalidSkeleton("no joints".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            if let Some(p) = j.parent {
                if p >= i {
                    return Err(Error::InvalidSkeleton(format!(
                        "joint {i} ({}) has parent {p}; joints must be topologically sorted",
                        j.name
                    )));
                }
            }
            let n = geometry::norm(j.axis);
            if (n - 1.0).abs() > AXIS_NORM_TOL {
                return Err(Error::InvalidSkeleton(format!(
                    "joint {i} ({}) axis norm {n} is not unit",
                    j.name
                )));
            }
            if !j.offset.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidSkeleton(format!(
                    "joint {i} ({}) has a non-finite offset",
                    j.name
                )));
            }
        }
        let n = self.n_q();
        if self.ankles.0 >= n || self.ankles.1 >= n {
            return Err(Error::InvalidSkeleton("ankle index out of range".into()));
        }
        if let Some(m) = &self.mirror {
            if m.len() != n {
                return Err(Error::InvalidSkeleton(format!(
                    "mirror map has {} entries for {n} joints",
                    m.len()
                )));
            }
            for (i, e) in m.iter().enumerate() {
                if e.source >= n || (e.sign != 1.0 && e.sign != -1.0) {
                    return Err(Error::InvalidSkeleton(format!(
                        "mirror entry {i} is malformed"
                    )));
                }
                let back = m[e.source];
                if back.source != i || back.sign * e.sign != 1.0 {
                    return Err(Error::InvalidSkeleton(format!(
                        "mirror map is not an involution at joint {i}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a fingerprint over the canonical skeleton content.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv64::new();
        h.write(self.name.as_bytes());
        for j in &self.joints {
            h.write(j.name.as_bytes());
            h.write(&j.parent.map_or(-1i64, |p| p as i64).to_le_bytes());
            for v in j.axis.iter().chain(j.offset.iter()) {
                h.write(&v.to_bits().to_le_bytes());
            }
        }
        h.write(&(self.ankles.0 as u64).to_le_bytes());
        h.write(&(self.ankles.1 as u64).to_le_bytes());
        if let Some(m) = &self.mirror {
            for e in m {
                h.write(&(e.source as u64).to_le_bytes());
                h.write(&e.sign.to_bits().to_le_bytes());
            }
        }
        h.finish()
    }

    /// Applies the mirror map to a joint vector.
    pub fn mirror_joints(&self, q: &[f64]) -> Result<Vec<f64>> {
        let m = self.mirror.as_ref().ok_or(Error::MissingMirrorMap)?;
        check_len("joint vector", self.n_q(), q.len())?;
        Ok(m.iter().map(|e| e.sign * q[e.source]).collect())
    }

    /// Link permutation induced by the mirror map (root maps to itself).
    pub fn mirror_links(&self) -> Result<Vec<usize>> {
        let m = self.mirror.as_ref().ok_or(Error::MissingMirrorMap)?;
        let mut out = Vec::with_capacity(self.n_links());
        out.push(0);
        out.extend(m.iter().map(|e| e.source + 1));
        Ok(out)
    }
}

pub(crate) struct Fnv64(u64);

impl Fnv64 {
    pub(crate) fn new() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
    pub(crate) fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// World-frame poses of every link, root first.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPose {
    pub link_positions: Vec<Vec3>,
    pub link_orientations: Vec<Quat>,
}

impl BodyPose {
    pub fn n_links(&self) -> usize {
        self.link_positions.len()
    }
}

pub fn forward_kinematics(
    skeleton: &SkeletonSpec,
    root_position: Vec3,
    root_orientation: Quat,
    q: &[f64],
) -> Result<BodyPose> {
    check_len("joint vector", skeleton.n_q(), q.len())?;
    crate::error::ensure_finite("joint vector", q)?;
    crate::error::ensure_finite("root position", &root_position)?;
    if !root_orientation.is_finite() {
        return Err(Error::NonFinite {
            what: "root orientation",
            index: 0,
        });
    }
    let n = skeleton.n_links();
    let mut positions = Vec::with_capacity(n);
    let mut orientations = Vec::with_capacity(n);
    positions.push(root_position);
    orientations.push(root_orientation);
    for (i, joint) in skeleton.joints.iter().enumerate() {
        let parent_link = joint.parent.map_or(0, |p| p + 1);
        let (pp, pr) = (positions[parent_link], orientations[parent_link]);
        positions.push(geometry::add(pp, pr.rotate(joint.offset)));
        orientations.push(pr.mul(Quat::from_axis_angle(joint.axis, q[i])));
    }
    Ok(BodyPose {
        link_positions: positions,
        link_orientations: orientations,
    })
}

/// Contact thresholds for [`extract_foot_contacts`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactThresholds {
    /// Bound on squared frame-to-frame ankle displacement (m^2).
    pub eps_vel: f64,
    /// Bound on ankle height (m).
    pub eps_height: f64,
}

impl Default for ContactThresholds {
    fn default() -> Self {
        Self {
            eps_vel: CONTACT_EPS_VEL,
            eps_height: CONTACT_EPS_HEIGHT,
        }
    }
}

/// Per-frame `[left, right]` contact flags from ankle trajectories.
///
/// A foot is in contact at `t` iff `|p[t+1] - p[t]|^2 < eps_vel` and
/// `p[t].z < eps_height`. The last frame has no successor and copies the
/// flag of the frame before it.
pub fn extract_foot_contacts(
    ankles: &[[Vec3; 2]],
    thresholds: ContactThresholds,
) -> Result<Vec<[bool; 2]>> {
    let t_len = ankles.len();
    if t_len < 2 {
        return Err(Error::TooShort {
            what: "ankle trajectory",
            needed: 2,
            got: t_len,
        });
    }
    let mut flags = Vec::with_capacity(t_len);
    for t in 0..t_len - 1 {
        let mut f = [false; 2];
        for (foot, flag) in f.iter_mut().enumerate() {
            let d = geometry::sub(ankles[t + 1][foot], ankles[t][foot]);
            *flag = geometry::dot(d, d) < thresholds.eps_vel
                && ankles[t][foot][2] < thresholds.eps_height;
        }
        flags.push(f);
    }
    flags.push(flags[t_len - 2]);
    Ok(flags)
}

/// Ankle positions of a sequence of poses, in `[left, right]` order.
pub fn ankle_positions(skeleton: &SkeletonSpec, poses: &[BodyPose]) -> Vec<[Vec3; 2]> {
    let (l, r) = skeleton.ankles;
    poses
        .iter()
        .map(|p| [p.link_positions[l + 1], p.link_positions[r + 1]])
        .collect()
}

/// Built-in skeleton descriptions.
pub mod builtin {
    use super::*;

    fn joint(name: &str, parent: Option<usize>, axis: Vec3, offset: Vec3) -> Joint {
        Joint {
            name: name.to_string(),
            parent,
            axis,
            offset,
        }
    }

    const X: Vec3 = [1.0, 0.0, 0.0];
    const Y: Vec3 = [0.0, 1.0, 0.0];
    const Z: Vec3 = [0.0, 0.0, 1.0];

    fn mirror_sign(axis: Vec3) -> f64 {
        // a pitch axis (y) survives reflection about XZ; roll and yaw flip
        if axis == Y {
            1.0
        } else {
            -1.0
        }
    }

    /// Standing root height of [`humanoid29`] (m).
    pub const HUMANOID29_STAND_HEIGHT: f64 = 0.79;

    /// A 29-DoF humanoid with G1-like joint layout and plausible link
    /// offsets: 6 per leg, 3 waist, 7 per arm.
    pub fn humanoid29() -> SkeletonSpec {
        let leg: [(&str, Vec3, Vec3); 6] = [
            ("hip_pitch", Y, [0.0, 0.064, -0.103]),
            ("hip_roll", X, [0.0, 0.052, -0.030]),
            ("hip_yaw", Z, [0.025, 0.0, -0.124]),
            ("knee", Y, [-0.078, 0.002, -0.177]),
            ("ankle_pitch", Y, [0.0, -0.0, -0.300]),
            ("ankle_roll", X, [0.0, 0.0, -0.017]),
        ];
        let arm: [(&str, Vec3, Vec3); 7] = [
            ("shoulder_pitch", Y, [0.004, 0.100, 0.240]),
            ("shoulder_roll", X, [0.0, 0.038, -0.014]),
            ("shoulder_yaw", Z, [0.0, 0.006, -0.100]),
            ("elbow", Y, [0.016, 0.0, -0.080]),
            ("wrist_roll", X, [0.100, 0.002, -0.010]),
            ("wrist_pitch", Y, [0.038, 0.0, 0.0]),
            ("wrist_yaw", Z, [0.046, 0.0, 0.0]),
        ];
        let mut joints = Vec::with_capacity(29);
        for (side, sign) in [("left", 1.0), ("right", -1.0)] {
            let base = joints.len();
            for (k, (n, axis, off)) in leg.iter().enumerate() {
                let parent = if k == 0 { None } else { Some(base + k - 1) };
                joints.push(joint(
                    &format!("{side}_{n}"),
                    parent,
                    *axis,
                    [off[0], sign * off[1], off[2]],
                ));
            }
        }
        joints.push(joint("waist_yaw", None, Z, [0.0, 0.0, 0.0]));
        joints.push(joint("waist_roll", Some(12), X, [-0.004, 0.0, 0.044]));
        joints.push(joint("waist_pitch", Some(13), Y, [0.0, 0.0, 0.0]));
        for (side, sign) in [("left", 1.0), ("right", -1.0)] {
            let base = joints.len();
            for (k, (n, axis, off)) in arm.iter().enumerate() {
                let parent = if k == 0 { Some(14) } else { Some(base + k - 1) };
                joints.push(joint(
                    &format!("{side}_{n}"),
                    parent,
                    *axis,
                    [off[0], sign * off[1], off[2]],
                ));
            }
        }
        let mut mirror = Vec::with_capacity(29);
        for i in 0..29 {
            let source = match i {
                0..=5 => i + 6,
                6..=11 => i - 6,
                12..=14 => i,
                15..=21 => i + 7,
                _ => i - 7,
            };
            mirror.push(MirrorEntry {
                source,
                sign: mirror_sign(joints[i].axis),
            });
        }
        SkeletonSpec::new("humanoid29", joints, (5, 11), Some(mirror))
            .expect("built-in skeleton is valid")
    }

    /// Standing root height of [`biped5`] (m).
    pub const BIPED5_STAND_HEIGHT: f64 = 0.8;

    /// A minimal symmetric 5-DoF biped used in tests.
    pub fn biped5() -> SkeletonSpec {
        let joints = alloc::vec![
            joint("left_hip", None, Y, [0.0, 0.1, -0.1]),
            joint("left_ankle", Some(0), Y, [0.0, 0.0, -0.7]),
            joint("right_hip", None, Y, [0.0, -0.1, -0.1]),
            joint("right_ankle", Some(2), Y, [0.0, 0.0, -0.7]),
            joint("torso_yaw", None, Z, [0.0, 0.0, 0.2]),
        ];
        let mirror = alloc::vec![
            MirrorEntry { source: 2, sign: 1.0 },
            MirrorEntry { source: 3, sign: 1.0 },
            MirrorEntry { source: 0, sign: 1.0 },
            MirrorEntry { source: 1, sign: 1.0 },
            MirrorEntry { source: 4, sign: -1.0 },
        ];
        SkeletonSpec::new("biped5", joints, (1, 3), Some(mirror))
            .expect("built-in skeleton is valid")
    }
}

#[cfg(test)]
mod tests {
    use super::builtin::*;
    use super::*;
    use crate::geometry::{reflect_y, rotate_z};
    use approx::assert_abs_diff_eq;
    use core::f64::consts::FRAC_PI_2;

    fn assert_vec_eq(a: Vec3, b: Vec3, eps: f64) {
        for i in 0..3 {
            assert_abs_diff_eq!(a[i], b[i], epsilon = eps);
        }
    }

    #[test]
    fn zero_configuration_is_cumulative_offsets() {
        let s = humanoid29();
        let pose = forward_kinematics(&s, [0.0; 3], Quat::IDENTITY, &[0.0; 29]).unwrap();
        for (i, j) in s.joints.iter().enumerate() {
            let mut expected = j.offset;
            let mut p = j.parent;
            while let Some(k) = p {
                expected = geometry::add(expected, s.joints[k].offset);
                p = s.joints[k].parent;
            }
            assert_vec_eq(pose.link_positions[i + 1], expected, 1e-15);
        }
    }

    #[test]
    fn quarter_turn_single_joint() {
        let s = SkeletonSpec::new(
            "one",
            alloc::vec![Joint {
                name: "j".into(),
                parent: None,
                axis: [0.0, 0.0, 1.0],
                offset: [0.0; 3],
            }],
            (0, 0),
            None,
        )
        .unwrap();
        let pose = forward_kinematics(&s, [0.0; 3], Quat::IDENTITY, &[FRAC_PI_2]).unwrap();
        // a child hanging (1, 0, 0) off the rotated link ends up on +y
        let child = pose.link_orientations[1].rotate([1.0, 0.0, 0.0]);
        assert_vec_eq(child, [0.0, 1.0, 0.0], 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let s = biped5();
        let err = forward_kinematics(&s, [0.0; 3], Quat::IDENTITY, &[0.0; 4]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 5, got: 4, .. }));
    }

    #[test]
    fn builtin_skeletons_validate() {
        assert_eq!(humanoid29().n_q(), 29);
        assert_eq!(biped5().n_q(), 5);
        assert_ne!(humanoid29().fingerprint(), biped5().fingerprint());
    }

    #[test]
    fn rejects_unsorted_and_non_unit() {
        let mut s = biped5();
        s.joints[1].parent = Some(3);
        assert!(matches!(s.validate(), Err(Error::InvalidSkeleton(_))));
        let mut s = biped5();
        s.joints[0].axis = [0.0, 1.0 + 1e-6, 0.0];
        assert!(s.validate().is_err());
        let mut s = biped5();
        s.mirror.as_mut().unwrap()[4].sign = 1.0;
        s.mirror.as_mut().unwrap()[0].source = 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn yaw_equivariance() {
        let s = humanoid29();
        let q: Vec<f64> = (0..29).map(|i| 0.05 * i as f64 - 0.6).collect();
        let root = Quat::from_euler(0.1, -0.2, 0.3);
        let base = forward_kinematics(&s, [0.2, -0.1, 0.8], root, &q).unwrap();
        let psi = 1.234;
        let d = [3.0, -2.0, 0.0];
        let moved = forward_kinematics(
            &s,
            geometry::add(rotate_z(psi, [0.2, -0.1, 0.8]), d),
            Quat::from_yaw(psi).mul(root),
            &q,
        )
        .unwrap();
        for (a, b) in base.link_positions.iter().zip(&moved.link_positions) {
            assert_vec_eq(geometry::add(rotate_z(psi, *a), d), *b, 1e-9);
        }
    }

    #[test]
    fn mirrored_configuration_reflects_pose() {
        for s in [humanoid29(), biped5()] {
            let n = s.n_q();
            let q: Vec<f64> = (0..n).map(|i| 0.37 * libm::sin(i as f64 + 0.5)).collect();
            let root = Quat::from_euler(0.15, -0.1, 0.7);
            let p = [0.4, 0.3, 0.8];
            let base = forward_kinematics(&s, p, root, &q).unwrap();
            let mq = s.mirror_joints(&q).unwrap();
            let mirrored =
                forward_kinematics(&s, reflect_y(p), root.reflect_sagittal(), &mq).unwrap();
            let links = s.mirror_links().unwrap();
            for (i, &src) in links.iter().enumerate() {
                assert_vec_eq(
                    mirrored.link_positions[i],
                    reflect_y(base.link_positions[src]),
                    1e-9,
                );
            }
        }
    }

    #[test]
    fn contacts_stationary_and_moving() {
        let still = alloc::vec![[[0.0, 0.1, 0.05], [0.0, -0.1, 0.05]]; 10];
        let f = extract_foot_contacts(&still, ContactThresholds::default()).unwrap();
        assert!(f.iter().all(|c| c[0] && c[1]));

        let moving: Vec<[Vec3; 2]> = (0..10)
            .map(|t| {
                let x = 0.1 * t as f64;
                [[x, 0.1, 0.05], [x, -0.1, 0.05]]
            })
            .collect();
        let f = extract_foot_contacts(&moving, ContactThresholds::default()).unwrap();
        assert!(f.iter().all(|c| !c[0] && !c[1]));
    }

    #[test]
    fn contact_velocity_bound_is_strict() {
        // squared displacement exactly eps_vel: choose a displacement whose
        // square is exactly representable relative to the threshold
        let th = ContactThresholds {
            eps_vel: 0.25,
            eps_height: 0.2,
        };
        let seq = [[[0.0, 0.0, 0.1]; 2], [[0.5, 0.0, 0.1]; 2]];
        let f = extract_foot_contacts(&seq, th).unwrap();
        assert_eq!(f, alloc::vec![[false, false], [false, false]]);

        // find a displacement whose computed square is exactly 0.002
        let mut d = libm::sqrt(CONTACT_EPS_VEL);
        let mut found = false;
        for _ in 0..64 {
            let sq = d * d;
            if sq == CONTACT_EPS_VEL {
                found = true;
                break;
            }
            d = if sq < CONTACT_EPS_VEL {
                f64::from_bits(d.to_bits() + 1)
            } else {
                f64::from_bits(d.to_bits() - 1)
            };
        }
        assert!(found);
        let seq = [[[0.0, 0.0, 0.1]; 2], [[d, 0.0, 0.1]; 2]];
        let f = extract_foot_contacts(&seq, ContactThresholds::default()).unwrap();
        assert!(!f[0][0] && !f[0][1]);
    }

    #[test]
    fn contact_last_frame_copies_previous() {
        let seq = [
            [[0.0, 0.0, 0.05]; 2],
            [[0.0, 0.0, 0.05]; 2],
            [[1.0, 0.0, 0.05]; 2],
        ];
        let f = extract_foot_contacts(&seq, ContactThresholds::default()).unwrap();
        assert_eq!(f[1], [false, false]);
        assert_eq!(f[2], f[1]);
    }

    #[test]
    fn contact_too_short() {
        let seq = [[[0.0; 3]; 2]];
        assert!(matches!(
            extract_foot_contacts(&seq, ContactThresholds::default()),
            Err(Error::TooShort { needed: 2, got: 1, .. })
        ));
    }
}
