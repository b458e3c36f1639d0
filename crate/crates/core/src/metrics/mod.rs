//! Generation-quality and tracking-fidelity metrics.

mod fid;
mod jerk;
mod quality;
mod tracking;

pub use fid::{fid, sqrtm_psd, FeatureStats, StatsAccumulator, PSD_TOLERANCE};
pub use jerk::{
    auj, jerk, jerk_baseline, joints_by_row, peak_jerk, transition_clips, TransitionClips,
    TRANSITION_HALF_WINDOW,
};
pub use quality::{
    default_diversity_subset, diversity, mm_dist, r_precision, retrieval_scores, RetrievalScores,
    RETRIEVAL_BATCH,
};
pub use tracking::{
    e_acc, e_vel, g_mpjpe, max_relative_error, mpjpe, success_rate, tracking_metrics,
    TrackingMetrics, SUCCESS_THRESHOLD_M,
};

use alloc::vec::Vec;

use crate::features::MotionFeatureFrame;

/// Maps motions and texts into one embedding space for the quality
/// metrics.
pub trait EmbeddingProvider {
    fn dim(&self) -> usize;
    fn embed_motion(&self, features: &[MotionFeatureFrame]) -> Vec<f64>;
    fn embed_text(&self, text: &str) -> Vec<f64>;
}
