use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use crate::{Error, Result};

/// Offset `s` of the cosine schedule.
pub const COSINE_OFFSET: f64 = 0.008;
/// Upper clip on every beta.
pub const MAX_BETA: f64 = 0.999;

/// DDPM noise schedule for steps `k = 1..=K`, stored at index `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Builds a schedule from betas; alphas and their cumulative products
    /// are derived.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b <= MAX_BETA)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "beta {b} outside (0, {MAX_BETA}]"
            )));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `beta_k` for `k` in `1..=K`.
    pub fn beta(&self, k: usize) -> f64 {
        self.betas[k - 1]
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alphas[k - 1]
    }

    pub fn alpha_bar(&self, k: usize) -> f64 {
        self.alpha_bars[k - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub(crate) fn check_step(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.steps() {
            return Err(Error::InvalidArgument(alloc::format!(
                "diffusion step {k} outside 1..={}",
                self.steps()
            )));
        }
        Ok(())
    }
}

/// Cosine schedule: `alpha_bar(k) = f(k) / f(0)` with
/// `f(k) = cos^2(((k / K + s) / (1 + s)) * pi / 2)`, betas clipped at
/// [`MAX_BETA`]. Alpha-bars are re-accumulated from the clipped betas so
/// the cumulative-product identity holds exactly.
pub fn cosine_schedule(steps: usize) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::InvalidArgument("cosine schedule needs K >= 1".into()));
    }
    let f = |k: usize| {
        let c = libm::cos(((k as f64 / steps as f64 + COSINE_OFFSET) / (1.0 + COSINE_OFFSET)) * FRAC_PI_2);
        c * c
    };
    let f0 = f(0);
    let betas = (1..=steps)
        .map(|k| (1.0 - (f(k) / f0) / (f(k - 1) / f0)).min(MAX_BETA))
        .collect();
    NoiseSchedule::from_betas(betas)
}
