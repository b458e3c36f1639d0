use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DenoiseInput, Denoiser, Latent, NoiseSchedule};
use crate::features::MotionFeatureFrame;
use crate::text::TextEmbedding;
use crate::{Error, Result};

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// Forward noising in closed form:
/// `z_k = sqrt(alpha_bar_k) z_0 + sqrt(1 - alpha_bar_k) eps`.
pub fn add_noise(z0: &Latent, k: usize, schedule: &NoiseSchedule, eps: &Latent) -> Result<Latent> {
    schedule.check_step(k)?;
    check_dim("noise", z0.dim(), eps.dim())?;
    let ab = schedule.alpha_bar(k);
    let (a, b) = (libm::sqrt(ab), libm::sqrt(1.0 - ab));
    Ok(Latent(
        z0.0.iter().zip(&eps.0).map(|(z, e)| a * z + b * e).collect(),
    ))
}

/// Noise implied by a clean-latent prediction:
/// `eps = (z_k - sqrt(alpha_bar_k) z0_hat) / sqrt(1 - alpha_bar_k)`.
pub fn predicted_noise(
    z_k: &Latent,
    z0_hat: &Latent,
    k: usize,
    schedule: &NoiseSchedule,
) -> Result<Latent> {
    schedule.check_step(k)?;
    check_dim("clean-latent prediction", z_k.dim(), z0_hat.dim())?;
    let ab = schedule.alpha_bar(k);
    let (a, b) = (libm::sqrt(ab), libm::sqrt(1.0 - ab));
    Ok(Latent(
        z_k.0.iter().zip(&z0_hat.0).map(|(z, x)| (z - a * x) / b).collect(),
    ))
}

/// Classifier-free guidance on clean-latent predictions:
/// `F(null) + scale * (F(e) - F(null))`, evaluated as
/// `(1 - scale) F(null) + scale F(e)` so that scales 0 and 1 return the
/// respective branch exactly. Without text only the unconditional branch
/// is evaluated.
pub fn cfg_predict<D: Denoiser + ?Sized>(
    denoiser: &D,
    z_k: &Latent,
    k: usize,
    schedule: &NoiseSchedule,
    history: &[MotionFeatureFrame],
    text: Option<&TextEmbedding>,
    scale: f64,
) -> Result<Latent> {
    schedule.check_step(k)?;
    let input = |text| DenoiseInput {
        z_k,
        step: k,
        alpha_bar: schedule.alpha_bar(k),
        history,
        text,
    };
    let uncond = denoiser.predict(&input(None))?;
    let Some(text) = text else {
        return Ok(uncond);
    };
    let cond = denoiser.predict(&input(Some(text)))?;
    check_dim("conditional prediction", uncond.dim(), cond.dim())?;
    Ok(Latent(
        uncond
            .0
            .iter()
            .zip(&cond.0)
            .map(|(v, u)| (1.0 - scale) * v + scale * u)
            .collect(),
    ))
}

/// Reverse-process knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SamplerOptions {
    /// Add `sigma_1 * eps` on the final step as well. Off by default: the
    /// last step then returns the mean of the transition, which makes an
    /// exact clean-latent predictor a fixed point of the loop.
    pub terminal_noise: bool,
}

/// One reverse transition:
/// `z_{k-1} = (z_k - (1 - alpha_k) / sqrt(1 - alpha_bar_k) * eps_theta) / sqrt(alpha_k) + sigma_k * noise`
/// with `sigma_k^2 = beta_k` and `eps_theta` derived from `z0_hat`.
pub fn reverse_step(
    z_k: &Latent,
    z0_hat: &Latent,
    k: usize,
    schedule: &NoiseSchedule,
    noise: Option<&Latent>,
) -> Result<Latent> {
    let eps = predicted_noise(z_k, z0_hat, k, schedule)?;
    let alpha = schedule.alpha(k);
    let coef = (1.0 - alpha) / libm::sqrt(1.0 - schedule.alpha_bar(k));
    let inv_sqrt_alpha = 1.0 / libm::sqrt(alpha);
    let mut out: Vec<f64> = z_k
        .0
        .iter()
        .zip(&eps.0)
        .map(|(z, e)| (z - coef * e) * inv_sqrt_alpha)
        .collect();
    if let Some(n) = noise {
        check_dim("reverse-step noise", out.len(), n.dim())?;
        let sigma = libm::sqrt(schedule.beta(k));
        for (o, e) in out.iter_mut().zip(&n.0) {
            *o += sigma * e;
        }
    }
    Ok(Latent(out))
}

fn sample_normal<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Latent {
    Latent((0..dim).map(|_| StandardNormal.sample(rng)).collect())
}

/// Runs the guided reverse process from `z_K ~ N(0, I)` down to `z_0`.
pub fn ddpm_sample<D: Denoiser + ?Sized, R: Rng + ?Sized>(
    denoiser: &D,
    history: &[MotionFeatureFrame],
    text: Option<&TextEmbedding>,
    schedule: &NoiseSchedule,
    cfg_scale: f64,
    options: SamplerOptions,
    rng: &mut R,
) -> Result<Latent> {
    let dim = denoiser.latent_dim();
    let mut z = sample_normal(dim, rng);
    for k in (1..=schedule.steps()).rev() {
        let z0_hat = cfg_predict(denoiser, &z, k, schedule, history, text, cfg_scale)?;
        check_dim("denoiser output", dim, z0_hat.dim())?;
        if z0_hat.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: k,
                what: "non-finite clean-latent prediction",
            });
        }
        let noise = (k > 1 || options.terminal_noise).then(|| sample_normal(dim, rng));
        z = reverse_step(&z, &z0_hat, k, schedule, noise.as_ref())?;
        if z.0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                step: k,
                what: "non-finite latent after reverse step",
            });
        }
    }
    Ok(z)
}
