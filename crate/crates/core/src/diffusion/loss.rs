//! Training objectives of the motion VAE and latent denoiser, as pure
//! evaluation functions.
//!
//! Every Huber term uses transition point 1 and sums over all compared
//! elements. Reported terms are already multiplied by their weights.

use alloc::vec::Vec;

use super::Latent;
use crate::features::{decode_features, FeatureLayout, InitialPose, MotionFeatureFrame};
use crate::kinematics::{forward_kinematics, BodyPose, SkeletonSpec};
use crate::{Error, Result};

/// Huber transition point.
pub const HUBER_DELTA: f64 = 1.0;

pub fn huber(x: f64) -> f64 {
    let a = x.abs();
    if a <= HUBER_DELTA {
        0.5 * a * a
    } else {
        HUBER_DELTA * (a - 0.5 * HUBER_DELTA)
    }
}

/// Summed elementwise Huber loss.
pub fn huber_sum(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            what: "huber operands",
            expected: target.len(),
            got: pred.len(),
        });
    }
    Ok(pred.iter().zip(target).map(|(p, t)| huber(p - t)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub rec: f64,
    pub kl: f64,
    pub simple: f64,
    pub trans: f64,
    pub rot: f64,
    pub dof: f64,
    pub vel: f64,
    pub contact: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            rec: 1.0,
            kl: 1e-4,
            simple: 1.0,
            trans: 0.05,
            rot: 1e-2,
            dof: 0.03,
            vel: 1e-5,
            contact: 0.01,
        }
    }
}

/// Diagonal Gaussian posterior produced by a motion encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// `KL(N(mean, std^2) || N(0, I))`, summed over dimensions.
pub fn kl_to_standard_normal(dist: &DiagGaussian) -> Result<f64> {
    if dist.mean.len() != dist.std.len() {
        return Err(Error::DimensionMismatch {
            what: "posterior std",
            expected: dist.mean.len(),
            got: dist.std.len(),
        });
    }
    if let Some(i) = dist.std.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument(alloc::format!("posterior std at {i} must be positive")));
    }
    Ok(dist
        .mean
        .iter()
        .zip(&dist.std)
        .map(|(m, s)| 0.5 * (s * s + m * m - 1.0 - 2.0 * libm::log(*s)))
        .sum())
}

/// Unweighted geometric terms, each a summed Huber loss.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeometricTerms {
    /// Link positions.
    pub body_trans: f64,
    /// Geodesic angle between link orientations.
    pub body_rot: f64,
    /// Joint angles.
    pub dof: f64,
    /// Joint increments.
    pub dof_vel: f64,
    /// Ankle positions at frames where the target foot is in contact.
    pub contact: f64,
}

fn poses(
    frames: &[MotionFeatureFrame],
    anchor: &InitialPose,
    skeleton: &SkeletonSpec,
) -> Result<Vec<BodyPose>> {
    decode_features(frames, anchor)?
        .iter()
        .map(|f| forward_kinematics(skeleton, f.root_position, f.root_orientation, &f.q))
        .collect()
}

fn check_shapes(pred: &[MotionFeatureFrame], target: &[MotionFeatureFrame]) -> Result<FeatureLayout> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch {
            what: "predicted frame count",
            expected: target.len(),
            got: pred.len(),
        });
    }
    let first = target.first().ok_or(Error::Empty("target frames"))?;
    let layout = FeatureLayout::layout_of(first);
    for f in pred.iter().chain(target) {
        if FeatureLayout::layout_of(f) != layout {
            return Err(Error::DimensionMismatch {
                what: "feature frame",
                expected: layout.dim(),
                got: FeatureLayout::layout_of(f).dim(),
            });
        }
    }
    Ok(layout)
}

/// Geometric terms after decoding both sequences from the same anchor and
/// running forward kinematics.
pub fn geometric_terms(
    pred: &[MotionFeatureFrame],
    target: &[MotionFeatureFrame],
    anchor: &InitialPose,
    skeleton: &SkeletonSpec,
) -> Result<GeometricTerms> {
    check_shapes(pred, target)?;
    let pp = poses(pred, anchor, skeleton)?;
    let tp = poses(target, anchor, skeleton)?;
    let (l, r) = skeleton.ankles;
    let mut out = GeometricTerms::default();
    for ((p, t), (pf, tf)) in pp.iter().zip(&tp).zip(pred.iter().zip(target)) {
        for (a, b) in p.link_positions.iter().zip(&t.link_positions) {
            out.body_trans += huber_sum(a, b)?;
        }
        for (a, b) in p.link_orientations.iter().zip(&t.link_orientations) {
            out.body_rot += huber(a.angle_to(*b));
        }
        out.dof += huber_sum(&pf.q, &tf.q)?;
        out.dof_vel += huber_sum(&pf.dq, &tf.dq)?;
        for (foot, link) in [l + 1, r + 1].into_iter().enumerate() {
            if tf.contacts.get(foot).is_some_and(|&c| c >= 0.5) {
                out.contact += huber_sum(&p.link_positions[link], &t.link_positions[link])?;
            }
        }
    }
    Ok(out)
}

/// Weighted loss components; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub rec: f64,
    pub kl: f64,
    pub simple: f64,
    pub body_trans: f64,
    pub body_rot: f64,
    pub dof: f64,
    pub dof_vel: f64,
    pub contact: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn with_geometry(mut self, g: GeometricTerms, w: &LossWeights) -> Self {
        self.body_trans = w.trans * g.body_trans;
        self.body_rot = w.rot * g.body_rot;
        self.dof = w.dof * g.dof;
        self.dof_vel = w.vel * g.dof_vel;
        self.contact = w.contact * g.contact;
        self.total = self.rec
            + self.kl
            + self.simple
            + self.body_trans
            + self.body_rot
            + self.dof
            + self.dof_vel
            + self.contact;
        self
    }
}

fn reconstruction(pred: &[MotionFeatureFrame], target: &[MotionFeatureFrame]) -> Result<f64> {
    let layout = check_shapes(pred, target)?;
    huber_sum(&layout.flatten_all(pred), &layout.flatten_all(target))
}

/// `rec * L_rec + kl * L_KL + L_geo`.
pub fn vae_loss(
    pred: &[MotionFeatureFrame],
    target: &[MotionFeatureFrame],
    posterior: &DiagGaussian,
    anchor: &InitialPose,
    skeleton: &SkeletonSpec,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let b = LossBreakdown {
        rec: weights.rec * reconstruction(pred, target)?,
        kl: weights.kl * kl_to_standard_normal(posterior)?,
        ..Default::default()
    };
    Ok(b.with_geometry(geometric_terms(pred, target, anchor, skeleton)?, weights))
}

/// `simple * L_simple + rec * L_rec + L_geo`, where `L_simple` compares the
/// predicted and true clean latents and the feature terms compare decoded
/// blocks.
pub fn ldm_loss(
    z0_hat: &Latent,
    z0: &Latent,
    pred: &[MotionFeatureFrame],
    target: &[MotionFeatureFrame],
    anchor: &InitialPose,
    skeleton: &SkeletonSpec,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    let b = LossBreakdown {
        simple: weights.simple * huber_sum(z0_hat.as_slice(), z0.as_slice())?,
        rec: weights.rec * reconstruction(pred, target)?,
        ..Default::default()
    };
    Ok(b.with_geometry(geometric_terms(pred, target, anchor, skeleton)?, weights))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huber_branches() {
        assert_eq!(huber(0.5), 0.125);
        assert_eq!(huber(-0.5), 0.125);
        assert_eq!(huber(1.0), 0.5);
        assert_eq!(huber(3.0), 2.5);
        assert!(huber_sum(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kl_closed_form() {
        let d = DiagGaussian {
            mean: alloc::vec![0.0; 3],
            std: alloc::vec![2.0; 3],
        };
        let per_dim = (3.0 - 2.0 * core::f64::consts::LN_2) / 2.0;
        assert!((kl_to_standard_normal(&d).unwrap() - 3.0 * per_dim).abs() < 1e-12);
        let unit = DiagGaussian {
            mean: alloc::vec![0.0; 4],
            std: alloc::vec![1.0; 4],
        };
        assert_eq!(kl_to_standard_normal(&unit).unwrap(), 0.0);
    }
}
