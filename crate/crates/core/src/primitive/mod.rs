//! Motion primitives, the self-rollout curriculum batch assembler, the
//! autoregressive rollout driver, and the rate-synchronising frame buffer.

mod buffer;
mod rollout;
mod timeline;

pub use buffer::{simulate_rates, FrameBuffer, Popped, RateReport, RateSimConfig, DEFAULT_BUFFER_BLOCKS};
pub use rollout::{
    init_rollout, init_rollout_with, latched_commands, rollout_step, rollout_step_embedded, run_blocks, stream_session,
    HoldGenerator, MotionGenerator, RolloutBlock, RolloutState, Session,
};
pub use timeline::{CommandEvent, CommandTimeline, IDLE_COMMAND};

use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use crate::corpus::AnnotationSpan;
use crate::features::MotionFeatureFrame;
use crate::{Error, Result, FRAME_RATE_HZ};

/// Past frames seen by the generator.
pub const T_HISTORY: usize = 2;
/// Frames produced per generator call.
pub const T_FUTURE: usize = 8;
/// Consecutive primitives per curriculum item.
pub const N_PRIM: usize = 4;
/// Upper bound of the history replacement probability.
pub const CURRICULUM_CAP: f64 = 0.8;

/// Window sizes of the primitive decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrimitiveConfig {
    pub t_history: usize,
    pub t_future: usize,
    pub n_prim: usize,
}

impl Default for PrimitiveConfig {
    fn default() -> Self {
        Self {
            t_history: T_HISTORY,
            t_future: T_FUTURE,
            n_prim: N_PRIM,
        }
    }
}

impl PrimitiveConfig {
    /// Frames covered by one curriculum item.
    pub const fn span(&self) -> usize {
        self.t_history + self.n_prim * self.t_future
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionPrimitive {
    pub history: Vec<MotionFeatureFrame>,
    pub future: Vec<MotionFeatureFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumBatchItem {
    /// First feature frame of the window in the source sequence.
    pub start: usize,
    pub primitives: Vec<MotionPrimitive>,
    /// `true` replaces that primitive's history with the model's own
    /// prediction for the previous primitive during training.
    pub rollout_flags: Vec<bool>,
    pub text: String,
    /// Train this item on the unconditional branch.
    pub text_masked: bool,
}

/// How windows are paired with text.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels<'a> {
    None,
    /// One label for the whole clip.
    Clip(&'a str),
    /// Time-aligned spans (seconds at [`FRAME_RATE_HZ`]); a window takes the
    /// text of the first span covering its midpoint.
    Spans(&'a [AnnotationSpan]),
}

/// Result of [`segment_primitives`]. A sequence below the minimum length
/// yields no items and `too_short = true`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmented {
    pub items: Vec<CurriculumBatchItem>,
    pub too_short: bool,
}

/// Cuts a feature sequence into curriculum items of `n_prim` consecutive
/// primitives, starting every `stride` frames.
///
/// Primitive `i` of a window starting at `s` has history
/// `[s + i*t_future, s + i*t_future + t_history)` followed by `t_future`
/// future frames, so each history is the tail of the previous future.
pub fn segment_primitives(
    features: &[MotionFeatureFrame],
    labels: Labels<'_>,
    stride: usize,
    config: PrimitiveConfig,
) -> Result<Segmented> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be positive".into()));
    }
    if config.t_future < config.t_history || config.t_future == 0 || config.n_prim == 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "primitive config {config:?} needs t_future >= t_history and non-zero sizes"
        )));
    }
    let span = config.span();
    if features.len() < span {
        return Ok(Segmented {
            items: Vec::new(),
            too_short: true,
        });
    }
    let mut items = Vec::new();
    let mut start = 0;
    while start + span <= features.len() {
        let primitives = (0..config.n_prim)
            .map(|i| {
                let h = start + i * config.t_future;
                let f = h + config.t_history;
                MotionPrimitive {
                    history: features[h..f].to_vec(),
                    future: features[f..f + config.t_future].to_vec(),
                }
            })
            .collect();
        let mid = (start as f64 + span as f64 / 2.0) / FRAME_RATE_HZ;
        let text = match labels {
            Labels::None => String::new(),
            Labels::Clip(t) => t.into(),
            Labels::Spans(spans) => spans
                .iter()
                .find(|s| s.start <= mid && mid < s.end)
                .map(|s| s.text.clone())
                .unwrap_or_default(),
        };
        items.push(CurriculumBatchItem {
            start,
            primitives,
            rollout_flags: alloc::vec![false; config.n_prim],
            text,
            text_masked: false,
        });
        start += stride;
    }
    Ok(Segmented {
        items,
        too_short: false,
    })
}

/// `min(cap, step / total_steps)`.
pub fn curriculum_rollout_probability(step: usize, total_steps: usize, cap: f64) -> Result<f64> {
    if total_steps == 0 {
        return Err(Error::InvalidArgument("total_steps must be positive".into()));
    }
    if step > total_steps {
        return Err(Error::InvalidArgument(alloc::format!(
            "step {step} exceeds total_steps {total_steps}"
        )));
    }
    if !(0.0..=1.0).contains(&cap) {
        return Err(Error::InvalidArgument(alloc::format!("cap {cap} outside [0, 1]")));
    }
    Ok((step as f64 / total_steps as f64).min(cap))
}

/// Samples rollout flags and the text mask for a batch at training step
/// `step`. Each primitive after the first is flagged independently with
/// the ramp probability; the first has no predecessor and is never flagged.
pub fn assign_curriculum<R: Rng + ?Sized>(
    items: &mut [CurriculumBatchItem],
    step: usize,
    total_steps: usize,
    cap: f64,
    mask_prob: f64,
    rng: &mut R,
) -> Result<()> {
    let p = curriculum_rollout_probability(step, total_steps, cap)?;
    if !(0.0..=1.0).contains(&mask_prob) {
        return Err(Error::InvalidArgument(alloc::format!(
            "mask probability {mask_prob} outside [0, 1]"
        )));
    }
    for item in items {
        for (i, flag) in item.rollout_flags.iter_mut().enumerate() {
            *flag = i > 0 && rng.random_bool(p);
        }
        item.text_masked = rng.random_bool(mask_prob);
    }
    Ok(())
}
