use alloc::vec::Vec;

use rand::RngCore;

use super::{ddpm_sample, Denoiser, LatentCodec, NoiseSchedule, SamplerOptions};
use crate::features::MotionFeatureFrame;
use crate::primitive::MotionGenerator;
use crate::text::{TextEmbedding, TextEncoder};
use crate::{Error, Result};

/// Text-conditioned block generator: guided DDPM sampling in the codec's
/// latent space, then decoding to feature frames.
#[derive(Debug, Clone)]
pub struct LatentDiffusionGenerator<C, D, E> {
    pub codec: C,
    pub denoiser: D,
    pub encoder: E,
    pub schedule: NoiseSchedule,
    pub cfg_scale: f64,
    pub options: SamplerOptions,
}

impl<C: LatentCodec, D: Denoiser, E: TextEncoder> LatentDiffusionGenerator<C, D, E> {
    pub fn new(codec: C, denoiser: D, encoder: E, schedule: NoiseSchedule, cfg_scale: f64) -> Result<Self> {
        if codec.latent_dim() != denoiser.latent_dim() {
            return Err(Error::DimensionMismatch {
                what: "denoiser latent",
                expected: codec.latent_dim(),
                got: denoiser.latent_dim(),
            });
        }
        if !cfg_scale.is_finite() {
            return Err(Error::InvalidArgument(alloc::format!("guidance scale {cfg_scale}")));
        }
        Ok(Self {
            codec,
            denoiser,
            encoder,
            schedule,
            cfg_scale,
            options: SamplerOptions::default(),
        })
    }
}

impl<C: LatentCodec, D: Denoiser, E: TextEncoder> MotionGenerator for LatentDiffusionGenerator<C, D, E> {
    fn t_future(&self) -> usize {
        self.codec.t_future()
    }

    fn embed(&self, text: &str) -> Option<TextEmbedding> {
        self.encoder.embed(text)
    }

    fn generate(
        &self,
        history: &[MotionFeatureFrame],
        text: Option<&TextEmbedding>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<MotionFeatureFrame>> {
        let z = ddpm_sample(
            &self.denoiser,
            history,
            text,
            &self.schedule,
            self.cfg_scale,
            self.options,
            rng,
        )?;
        self.codec.decode(history, &z)
    }
}
