//! Tracking fidelity between an executed (policy) and a reference
//! trajectory of link positions.
//!
//! Errors average over the non-root links `1..n_links` and are reported in
//! millimetres (per frame, per frame squared for velocity and
//! acceleration).

use crate::geometry::{distance, sub, Vec3};
use crate::kinematics::BodyPose;
use crate::{Error, Result};

/// Success threshold on the worst-frame root-relative error, metres.
pub const SUCCESS_THRESHOLD_M: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingMetrics {
    pub g_mpjpe: f64,
    pub mpjpe: f64,
    pub e_vel: f64,
    pub e_acc: f64,
}

fn check(policy: &[BodyPose], reference: &[BodyPose], min_len: usize) -> Result<usize> {
    if policy.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            what: "trajectory length",
            expected: reference.len(),
            got: policy.len(),
        });
    }
    if policy.len() < min_len {
        return Err(Error::TooShort {
            what: "trajectory",
            needed: min_len,
            got: policy.len(),
        });
    }
    let links = reference[0].link_positions.len();
    if links < 2 {
        return Err(Error::TooShort {
            what: "links per pose",
            needed: 2,
            got: links,
        });
    }
    for p in policy.iter().chain(reference) {
        if p.link_positions.len() != links {
            return Err(Error::DimensionMismatch {
                what: "links per pose",
                expected: links,
                got: p.link_positions.len(),
            });
        }
    }
    Ok(links)
}

fn rel(p: &BodyPose, j: usize) -> Vec3 {
    sub(p.link_positions[j], p.link_positions[0])
}

/// Mean over non-root links of the root-relative position error at one
/// frame, metres.
fn frame_relative_error(pol: &BodyPose, reff: &BodyPose) -> f64 {
    let n = pol.link_positions.len();
    (1..n).map(|j| distance(rel(pol, j), rel(reff, j))).sum::<f64>() / (n - 1) as f64
}

fn mean_link_error(policy: &[BodyPose], reference: &[BodyPose], f: impl Fn(usize, usize) -> f64) -> f64 {
    let links = reference[0].link_positions.len();
    let mut s = 0.0;
    for t in 0..policy.len() {
        for j in 1..links {
            s += f(t, j);
        }
    }
    1000.0 * s / (policy.len() * (links - 1)) as f64
}

pub fn g_mpjpe(policy: &[BodyPose], reference: &[BodyPose]) -> Result<f64> {
    check(policy, reference, 1)?;
    Ok(mean_link_error(policy, reference, |t, j| {
        distance(policy[t].link_positions[j], reference[t].link_positions[j])
    }))
}

pub fn mpjpe(policy: &[BodyPose], reference: &[BodyPose]) -> Result<f64> {
    check(policy, reference, 1)?;
    Ok(mean_link_error(policy, reference, |t, j| {
        distance(rel(&policy[t], j), rel(&reference[t], j))
    }))
}

fn vel(p: &[BodyPose], t: usize, j: usize) -> Vec3 {
    sub(p[t + 1].link_positions[j], p[t].link_positions[j])
}

fn acc(p: &[BodyPose], t: usize, j: usize) -> Vec3 {
    sub(vel(p, t + 1, j), vel(p, t, j))
}

pub fn e_vel(policy: &[BodyPose], reference: &[BodyPose]) -> Result<f64> {
    check(policy, reference, 2)?;
    let n = policy.len() - 1;
    Ok(mean_link_error(&policy[..n], &reference[..n], |t, j| {
        distance(vel(policy, t, j), vel(reference, t, j))
    }))
}

pub fn e_acc(policy: &[BodyPose], reference: &[BodyPose]) -> Result<f64> {
    check(policy, reference, 3)?;
    let n = policy.len() - 2;
    Ok(mean_link_error(&policy[..n], &reference[..n], |t, j| {
        distance(acc(policy, t, j), acc(reference, t, j))
    }))
}

/// All four errors; needs at least three frames.
pub fn tracking_metrics(policy: &[BodyPose], reference: &[BodyPose]) -> Result<TrackingMetrics> {
    Ok(TrackingMetrics {
        g_mpjpe: g_mpjpe(policy, reference)?,
        mpjpe: mpjpe(policy, reference)?,
        e_vel: e_vel(policy, reference)?,
        e_acc: e_acc(policy, reference)?,
    })
}

/// Worst frame of the root-relative mean per-link error, metres.
pub fn max_relative_error(policy: &[BodyPose], reference: &[BodyPose]) -> Result<f64> {
    check(policy, reference, 1)?;
    Ok(policy
        .iter()
        .zip(reference)
        .map(|(p, r)| frame_relative_error(p, r))
        .fold(0.0, f64::max))
}

/// Fraction of (policy, reference) pairs whose worst-frame error is at
/// most `theta` metres.
pub fn success_rate(pairs: &[(&[BodyPose], &[BodyPose])], theta: f64) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("trajectory pairs"));
    }
    let mut ok = 0usize;
    for (p, r) in pairs {
        if max_relative_error(p, r)? <= theta {
            ok += 1;
        }
    }
    Ok(ok as f64 / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{add, Quat};
    use alloc::vec::Vec;

    fn traj(links: usize, frames: usize) -> Vec<BodyPose> {
        (0..frames)
            .map(|t| BodyPose {
                link_positions: (0..links)
                    .map(|j| [0.1 * j as f64, libm::sin(0.2 * t as f64 + j as f64), 0.5 + 0.01 * t as f64])
                    .collect(),
                link_orientations: alloc::vec![Quat::IDENTITY; links],
            })
            .collect()
    }

    #[test]
    fn identical_is_zero() {
        let r = traj(4, 6);
        assert_eq!(tracking_metrics(&r, &r).unwrap(), TrackingMetrics::default());
        assert_eq!(success_rate(&[(&r, &r)], SUCCESS_THRESHOLD_M).unwrap(), 1.0);
    }

    #[test]
    fn global_shift() {
        let r = traj(5, 6);
        let p: Vec<BodyPose> = r
            .iter()
            .map(|b| BodyPose {
                link_positions: b.link_positions.iter().map(|x| add(*x, [0.01, 0.0, 0.0])).collect(),
                link_orientations: b.link_orientations.clone(),
            })
            .collect();
        let m = tracking_metrics(&p, &r).unwrap();
        assert!((m.g_mpjpe - 10.0).abs() < 1e-9);
        assert!(m.mpjpe.abs() < 1e-9 && m.e_vel.abs() < 1e-9 && m.e_acc.abs() < 1e-9);
    }

    #[test]
    fn length_checks() {
        let r = traj(3, 2);
        assert!(e_acc(&r, &r).is_err());
        assert!(e_vel(&r, &r).is_ok());
        assert!(g_mpjpe(&r, &traj(3, 3)).is_err());
    }
}
