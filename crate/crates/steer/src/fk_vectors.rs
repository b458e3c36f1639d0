//! Forward-kinematics test vectors for clients that reimplement FK.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use steer_core::{forward_kinematics, Quat, SkeletonSpec};

use crate::error::Result;
use crate::protocol::SkeletonWire;

pub const FK_VECTORS_SCHEMA: &str = "steer-fk-vectors/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkCase {
    pub root_position: [f64; 3],
    pub root_quaternion: [f64; 4],
    pub q: Vec<f64>,
    pub link_positions: Vec<[f64; 3]>,
    pub link_quaternions: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FkVectors {
    pub schema: String,
    /// Suggested comparison tolerance for client implementations.
    pub tolerance: f64,
    pub skeleton: SkeletonWire,
    pub cases: Vec<FkCase>,
}

/// The zero configuration followed by `count - 1` random configurations.
pub fn export_fk_vectors(skeleton: &SkeletonSpec, count: usize, seed: u64) -> Result<FkVectors> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(count);
    for i in 0..count {
        let (p, r, q) = if i == 0 {
            ([0.0; 3], Quat::IDENTITY, vec![0.0; skeleton.n_q()])
        } else {
            let p = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(0.5..1.0)];
            let r = Quat::from_euler(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-3.1..3.1),
            );
            let q = (0..skeleton.n_q()).map(|_| rng.random_range(-1.5..1.5)).collect();
            (p, r, q)
        };
        let pose = forward_kinematics(skeleton, p, r, &q)?;
        cases.push(FkCase {
            root_position: p,
            root_quaternion: r.to_array(),
            q,
            link_positions: pose.link_positions,
            link_quaternions: pose.link_orientations.iter().map(|o| o.to_array()).collect(),
        });
    }
    Ok(FkVectors {
        schema: FK_VECTORS_SCHEMA.into(),
        tolerance: 1e-6,
        skeleton: SkeletonWire::from(skeleton),
        cases,
    })
}
