use alloc::vec::Vec;

use crate::{Error, Result};

/// Default half width of a transition clip in frames.
pub const TRANSITION_HALF_WINDOW: usize = 15;

/// Third backward difference `q[t] - 3q[t-1] + 3q[t-2] - q[t-3]` of every
/// joint row, in per-frame units. Each output row has `L - 3` samples.
pub fn jerk(joints: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let l = joints.first().ok_or(Error::Empty("joint trajectories"))?.len();
    if l < 4 {
        return Err(Error::TooShort {
            what: "joint trajectory",
            needed: 4,
            got: l,
        });
    }
    joints
        .iter()
        .map(|q| {
            if q.len() != l {
                return Err(Error::DimensionMismatch {
                    what: "joint trajectory length",
                    expected: l,
                    got: q.len(),
                });
            }
            Ok(q.windows(4).map(|w| (w[3] - w[0]) - 3.0 * (w[2] - w[1])).collect())
        })
        .collect()
}

/// Maximum absolute jerk over joints and time.
pub fn peak_jerk(joints: &[Vec<f64>]) -> Result<f64> {
    Ok(jerk(joints)?
        .iter()
        .flatten()
        .fold(0.0f64, |m, j| m.max(j.abs())))
}

/// Sum over jerk samples of the largest per-joint deviation
/// `|j_i(t) - j_avg|`.
pub fn auj(joints: &[Vec<f64>], j_avg: f64) -> Result<f64> {
    let j = jerk(joints)?;
    let steps = j[0].len();
    Ok((0..steps)
        .map(|t| j.iter().fold(0.0f64, |m, row| m.max((row[t] - j_avg).abs())))
        .sum())
}

/// Mean absolute jerk pooled over every joint, sample, and clip.
pub fn jerk_baseline(clips: &[Vec<Vec<f64>>]) -> Result<f64> {
    if clips.is_empty() {
        return Err(Error::Empty("jerk baseline dataset"));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for c in clips {
        for row in jerk(c)? {
            sum += row.iter().map(|v| v.abs()).sum::<f64>();
            n += row.len();
        }
    }
    Ok(sum / n as f64)
}

/// Rows of joint angles (`frames[t][i]`) to per-joint trajectories.
pub fn joints_by_row(frames: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = frames.first().map_or(0, Vec::len);
    (0..k).map(|i| frames.iter().map(|f| f[i]).collect()).collect()
}

/// Windows of `2 * half_window` frames centred on each boundary, i.e.
/// `[b - half_window, b + half_window)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionClips<T> {
    pub clips: Vec<Vec<T>>,
    /// Boundaries kept, in input order.
    pub boundaries: Vec<usize>,
    /// Boundaries too close to either end of the motion.
    pub skipped: Vec<usize>,
}

pub fn transition_clips<T: Clone>(motion: &[T], boundaries: &[usize], half_window: usize) -> TransitionClips<T> {
    let mut out = TransitionClips {
        clips: Vec::new(),
        boundaries: Vec::new(),
        skipped: Vec::new(),
    };
    for &b in boundaries {
        if b < half_window || b + half_window > motion.len() {
            out.skipped.push(b);
        } else {
            out.clips.push(motion[b - half_window..b + half_window].to_vec());
            out.boundaries.push(b);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_has_constant_jerk() {
        let q: Vec<f64> = (0..10).map(|t| (t as f64).powi(3)).collect();
        let j = jerk(&[q.clone()]).unwrap();
        assert!(j[0].iter().all(|v| *v == 6.0));
        assert_eq!(peak_jerk(&[q.clone()]).unwrap(), 6.0);
        assert_eq!(jerk_baseline(&[alloc::vec![q]]).unwrap(), 6.0);
    }

    #[test]
    fn constant_trajectory() {
        let q = alloc::vec![alloc::vec![0.3; 10]; 2];
        assert_eq!(peak_jerk(&q).unwrap(), 0.0);
        assert_eq!(auj(&q, 0.5).unwrap(), 7.0 * 0.5);
        assert!(peak_jerk(&[alloc::vec![0.0; 3]]).is_err());
    }

    #[test]
    fn baseline_pools_clips() {
        let cubic: Vec<f64> = (0..10).map(|t| (t as f64).powi(3)).collect();
        let b = jerk_baseline(&[alloc::vec![alloc::vec![1.0; 10]], alloc::vec![cubic]]).unwrap();
        assert_eq!(b, 3.0);
        assert!(jerk_baseline(&[]).is_err());
    }

    #[test]
    fn clips_around_boundaries() {
        let m: Vec<usize> = (0..200).collect();
        let c = transition_clips(&m, &[100, 5, 150], 15);
        assert_eq!(c.clips.len(), 2);
        assert_eq!(c.clips[0].first(), Some(&85));
        assert_eq!(c.clips[0].last(), Some(&114));
        assert_eq!(c.boundaries, [100, 150]);
        assert_eq!(c.skipped, [5]);
    }
}
