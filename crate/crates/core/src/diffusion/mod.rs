//! Latent diffusion: DDPM schedule and sampler with classifier-free
//! guidance, the denoiser and latent-codec contracts with reference
//! implementations, and training-loss evaluators.

mod codec;
mod denoiser;
mod generator;
pub mod loss;
mod sampler;
mod schedule;

pub use codec::{LatentCodec, PcaCodec, PcaFitOptions};
pub use denoiser::{
    history_summary, DenoiseInput, Denoiser, LinearGaussianDenoiser, RetrievalDenoiser,
    RetrievalEntry, RetrievalIndex,
};
pub use generator::LatentDiffusionGenerator;
pub use sampler::{
    add_noise, cfg_predict, ddpm_sample, predicted_noise, reverse_step, SamplerOptions,
};
pub use schedule::{cosine_schedule, NoiseSchedule, COSINE_OFFSET, MAX_BETA};

use alloc::vec::Vec;

/// Default number of denoising steps.
pub const DEFAULT_STEPS: usize = 5;
/// Default guidance scale.
pub const DEFAULT_CFG_SCALE: f64 = 5.0;
/// Default latent width.
pub const DEFAULT_LATENT_DIM: usize = 128;
/// Probability of dropping the text condition when assembling training
/// batches.
pub const CFG_MASK_PROB: f64 = 0.1;

/// A point in the motion latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent(pub Vec<f64>);

impl Latent {
    pub fn zeros(dim: usize) -> Self {
        Self(alloc::vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for Latent {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}
