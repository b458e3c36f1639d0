use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::RngCore;

use super::{CommandTimeline, T_FUTURE, T_HISTORY};
use crate::features::{
    decode_features_with_anchor, encode_features, FeatureLayout, InitialPose, MotionFeatureFrame,
    RawMotionFrame,
};
use crate::text::TextEmbedding;
use crate::{Error, Result, FRAME_RATE_HZ};

/// Produces the next block of feature frames from recent history and an
/// embedded command.
///
/// Embedding and generation are separate calls so that callers can time
/// them independently.
pub trait MotionGenerator {
    /// Frames returned by each [`generate`](Self::generate) call.
    fn t_future(&self) -> usize;
    /// `None` selects unconditional generation.
    fn embed(&self, text: &str) -> Option<TextEmbedding>;
    fn generate(
        &self,
        history: &[MotionFeatureFrame],
        text: Option<&TextEmbedding>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<MotionFeatureFrame>>;
}

impl<G: MotionGenerator + ?Sized> MotionGenerator for Box<G> {
    fn t_future(&self) -> usize {
        (**self).t_future()
    }
    fn embed(&self, text: &str) -> Option<TextEmbedding> {
        (**self).embed(text)
    }
    fn generate(
        &self,
        history: &[MotionFeatureFrame],
        text: Option<&TextEmbedding>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<MotionFeatureFrame>> {
        (**self).generate(history, text, rng)
    }
}

/// Repeats the last history frame with all increments zeroed: the body
/// freezes in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HoldGenerator {
    pub t_future: usize,
}

impl Default for HoldGenerator {
    fn default() -> Self {
        Self { t_future: T_FUTURE }
    }
}

impl MotionGenerator for HoldGenerator {
    fn t_future(&self) -> usize {
        self.t_future
    }

    fn embed(&self, _text: &str) -> Option<TextEmbedding> {
        None
    }

    fn generate(
        &self,
        history: &[MotionFeatureFrame],
        _text: Option<&TextEmbedding>,
        _rng: &mut dyn RngCore,
    ) -> Result<Vec<MotionFeatureFrame>> {
        let last = history.last().ok_or(Error::Empty("history"))?;
        let mut f = last.clone();
        f.dyaw = 0.0;
        f.dp_local = [0.0; 3];
        f.dq.iter_mut().for_each(|v| *v = 0.0);
        Ok(alloc::vec![f; self.t_future])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutState {
    /// The last `T_history` feature frames.
    pub history: Vec<MotionFeatureFrame>,
    /// Root pose at which the next generated frame starts.
    pub anchor: InitialPose,
    /// Frames emitted so far.
    pub frame_index: usize,
    pub active_command: String,
}

/// Starts a rollout at rest in `seed_pose`: the history holds
/// [`T_HISTORY`] copies of the static feature frame of that pose.
pub fn init_rollout(seed_pose: &RawMotionFrame) -> Result<RolloutState> {
    init_rollout_with(seed_pose, T_HISTORY)
}

pub fn init_rollout_with(seed_pose: &RawMotionFrame, t_history: usize) -> Result<RolloutState> {
    if t_history == 0 {
        return Err(Error::InvalidArgument("history length must be positive".into()));
    }
    let enc = encode_features(&[seed_pose.clone(), seed_pose.clone()])?;
    let frame = enc.features.into_iter().next().ok_or(Error::Empty("seed features"))?;
    Ok(RolloutState {
        history: alloc::vec![frame; t_history],
        anchor: enc.init,
        frame_index: 0,
        active_command: super::IDLE_COMMAND.into(),
    })
}

/// One generated block, decoded.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBlock {
    /// Index of the first frame of the block in the session.
    pub first_frame: usize,
    pub command: String,
    pub features: Vec<MotionFeatureFrame>,
    pub frames: Vec<RawMotionFrame>,
}

/// Calls the generator once with the current history and `command`,
/// decodes the block from the state's anchor, and advances the state.
pub fn rollout_step<G: MotionGenerator + ?Sized>(
    state: &mut RolloutState,
    generator: &G,
    command: &str,
    rng: &mut dyn RngCore,
) -> Result<RolloutBlock> {
    let text = generator.embed(command);
    rollout_step_embedded(state, generator, command, text.as_ref(), rng)
}

/// [`rollout_step`] with the command already embedded, so callers can time
/// the two stages separately. `text` must be `generator.embed(command)`.
pub fn rollout_step_embedded<G: MotionGenerator + ?Sized>(
    state: &mut RolloutState,
    generator: &G,
    command: &str,
    text: Option<&TextEmbedding>,
    rng: &mut dyn RngCore,
) -> Result<RolloutBlock> {
    let features = generator.generate(&state.history, text, rng).map_err(|e| {
        Error::Generator(alloc::format!(
            "block starting at frame {} ({command:?}): {e}",
            state.frame_index
        ))
    })?;
    check_block(state, &features, generator.t_future())?;
    let (frames, next) = decode_features_with_anchor(&features, &state.anchor)?;
    let block = RolloutBlock {
        first_frame: state.frame_index,
        command: command.to_string(),
        features,
        frames,
    };
    let keep = state.history.len();
    state.history = block.features[block.features.len() - keep..].to_vec();
    state.anchor = next;
    state.frame_index += block.features.len();
    state.active_command = block.command.clone();
    Ok(block)
}

fn check_block(state: &RolloutState, block: &[MotionFeatureFrame], t_future: usize) -> Result<()> {
    if block.len() != t_future || t_future < state.history.len() {
        return Err(Error::Generator(alloc::format!(
            "generator returned {} frames, expected {t_future} (history {})",
            block.len(),
            state.history.len()
        )));
    }
    let layout = FeatureLayout::layout_of(&state.history[0]);
    for (i, f) in block.iter().enumerate() {
        if FeatureLayout::layout_of(f) != layout {
            return Err(Error::DimensionMismatch {
                what: "generated feature frame",
                expected: layout.dim(),
                got: FeatureLayout::layout_of(f).dim(),
            });
        }
        crate::error::ensure_finite("generated feature frame", &layout.flatten(f))
            .map_err(|_| Error::NonFinite {
                what: "generated block",
                index: i,
            })?;
    }
    Ok(())
}

/// Output of an offline session.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub frames: Vec<RawMotionFrame>,
    pub features: Vec<MotionFeatureFrame>,
    /// Active command of every frame.
    pub frame_commands: Vec<String>,
    /// Latched command of every block.
    pub block_commands: Vec<String>,
}

/// Runs one generator step per entry of `commands`, in order.
pub fn run_blocks<G: MotionGenerator + ?Sized>(
    state: &mut RolloutState,
    generator: &G,
    commands: &[String],
    rng: &mut dyn RngCore,
) -> Result<Session> {
    let mut s = Session {
        frames: Vec::new(),
        features: Vec::new(),
        frame_commands: Vec::new(),
        block_commands: Vec::new(),
    };
    for c in commands {
        let b = rollout_step(state, generator, c, rng)?;
        s.frame_commands.extend(core::iter::repeat_n(c.clone(), b.frames.len()));
        s.block_commands.push(b.command);
        s.frames.extend(b.frames);
        s.features.extend(b.features);
    }
    Ok(s)
}

/// Per-block commands of a timeline: block `b` latches the command active
/// at its start time `b * t_future / FRAME_RATE_HZ`.
pub fn latched_commands(timeline: &CommandTimeline, n_blocks: usize, t_future: usize) -> Vec<String> {
    (0..n_blocks)
        .map(|b| timeline.active_at((b * t_future) as f64 / FRAME_RATE_HZ).into())
        .collect()
}

/// Offline streaming session of `duration` seconds at [`FRAME_RATE_HZ`].
/// Commands are latched at block boundaries; the last block is cut to the
/// requested frame count.
pub fn stream_session<G: MotionGenerator + ?Sized>(
    timeline: &CommandTimeline,
    generator: &G,
    seed_pose: &RawMotionFrame,
    duration: f64,
    rng: &mut dyn RngCore,
) -> Result<Session> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "session duration {duration} must be positive"
        )));
    }
    let t_future = generator.t_future();
    if t_future == 0 {
        return Err(Error::InvalidArgument("generator block size is zero".into()));
    }
    let n_frames = libm::round(duration * FRAME_RATE_HZ) as usize;
    let n_blocks = n_frames.div_ceil(t_future);
    let commands = latched_commands(timeline, n_blocks, t_future);
    let mut state = init_rollout(seed_pose)?;
    let mut s = run_blocks(&mut state, generator, &commands, rng)?;
    s.frames.truncate(n_frames);
    s.features.truncate(n_frames);
    s.frame_commands.truncate(n_frames);
    Ok(s)
}
