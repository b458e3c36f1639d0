//! Pure algorithmic core for text-steered humanoid motion streaming.
//!
//! Everything here is `no_std` (with `alloc`): skeleton kinematics, the
//! local incremental motion-feature transforms, motion primitives and the
//! autoregressive rollout driver, DDPM sampling with classifier-free
//! guidance, evaluation metrics, and the procedural synthetic corpus.
//! File formats, the streaming server and the CLI live in the `steer`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(feature = "std")]
extern crate std;

pub mod corpus;
pub mod diffusion;
mod error;
pub mod features;
pub mod geometry;
pub mod kinematics;
pub mod metrics;
pub mod primitive;
pub mod text;

pub use error::{Error, Result};
pub use features::{
    decode_features, encode_features, feature_dim, InitialPose, MotionFeatureFrame,
    RawMotionFrame,
};
pub use geometry::{Quat, Vec3};
pub use kinematics::{forward_kinematics, BodyPose, SkeletonSpec};

/// Frames per second of every motion stream.
pub const FRAME_RATE_HZ: f64 = 50.0;
