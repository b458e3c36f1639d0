//! Dataset plumbing: annotation spans, clip segmentation, evaluation
//! segments, random command streams, and a procedural motion-text corpus.

mod synthetic;

pub use synthetic::{
    build_retrieval_index, clean_template, generate_synthetic_corpus, motion_descriptor,
    training_windows, LabeledClip, NearestLabelClassifier, OracleEmbedder, SyntheticCorpus,
    SyntheticCorpusSpec, DEFAULT_LABELS, TEMPLATE_FRAMES,
};

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::{index, IndexedRandom};
use rand::Rng;

use crate::primitive::{CommandEvent, CommandTimeline, IDLE_COMMAND};
use crate::{Error, Result};

/// A text label over `[start, end)` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSpan {
    pub start: f64,
    pub end: f64,
    pub text: String,
}

impl AnnotationSpan {
    pub fn new(start: f64, end: f64, text: &str) -> Result<Self> {
        if !(start >= 0.0 && end > start && end.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "span [{start}, {end}) must satisfy 0 <= start < end"
            )));
        }
        Ok(Self {
            start,
            end,
            text: text.into(),
        })
    }

    pub fn is_long_form(&self) -> bool {
        self.text.starts_with('\u{27E8}') && self.text.ends_with('\u{27E9}')
    }
}

/// Marks a whole-sequence style label, e.g. `⟨hiphop 1⟩`.
pub fn wrap_long_form(label: &str) -> String {
    alloc::format!("\u{27E8}{label}\u{27E9}")
}

/// Length and overlap bounds of [`segment_dataset`], in frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentConfig {
    pub min_len: usize,
    pub max_len: usize,
    pub min_overlap: usize,
    pub max_overlap: usize,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            min_len: 100,
            max_len: 2000,
            min_overlap: 50,
            max_overlap: 200,
        }
    }
}

impl SegmentConfig {
    fn validate(&self) -> Result<()> {
        let ok = self.min_len > 0
            && self.max_len >= 2 * self.min_len
            && self.min_overlap <= self.max_overlap
            && self.max_overlap < self.max_len;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(alloc::format!(
                "segment config {self:?} needs max_len >= 2 min_len and max_overlap < max_len"
            )))
        }
    }
}

/// Frame ranges cut from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPlan {
    pub ranges: Vec<Range<usize>>,
    /// The source was shorter than `min_len` and passed through whole.
    pub below_min: bool,
}

/// Splits `len` frames into overlapping ranges.
///
/// Sources of at most `max_len` frames pass through as one range. Longer
/// sources are walked left to right: each step draws an overlap, then a
/// length small enough that the rest of the source can still form a valid
/// range. The final range ends at the last frame.
pub fn segment_ranges<R: Rng + ?Sized>(len: usize, config: SegmentConfig, rng: &mut R) -> Result<SegmentPlan> {
    config.validate()?;
    if len == 0 {
        return Ok(SegmentPlan {
            ranges: Vec::new(),
            below_min: true,
        });
    }
    if len <= config.max_len {
        return Ok(SegmentPlan {
            ranges: alloc::vec![0..len],
            below_min: len < config.min_len,
        });
    }
    let mut ranges = Vec::new();
    let mut start = 0;
    loop {
        let rem = len - start;
        if rem <= config.max_len {
            ranges.push(start..len);
            break;
        }
        let overlap = rng.random_range(config.min_overlap..=config.max_overlap);
        let lo = config.min_len.max(overlap + 1);
        let hi = config.max_len.min(rem - config.min_len + overlap);
        let l = rng.random_range(lo..=hi);
        ranges.push(start..start + l);
        start += l - overlap;
    }
    Ok(SegmentPlan {
        ranges,
        below_min: false,
    })
}

/// One output clip of [`segment_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedClip<T> {
    pub source: usize,
    pub range: Range<usize>,
    pub frames: Vec<T>,
}

/// Segments every source clip; `below_min` lists sources passed through
/// shorter than `min_len`.
pub fn segment_dataset<T: Clone, R: Rng + ?Sized>(
    clips: &[Vec<T>],
    config: SegmentConfig,
    rng: &mut R,
) -> Result<(Vec<SegmentedClip<T>>, Vec<usize>)> {
    let mut out = Vec::new();
    let mut below = Vec::new();
    for (i, c) in clips.iter().enumerate() {
        let plan = segment_ranges(c.len(), config, rng)?;
        if plan.below_min {
            below.push(i);
        }
        out.extend(plan.ranges.into_iter().map(|r| SegmentedClip {
            source: i,
            frames: c[r.clone()].to_vec(),
            range: r,
        }));
    }
    Ok((out, below))
}

/// Maximum evaluation segment length in frames.
pub const EVAL_SEGMENT_FRAMES: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSegment {
    pub range: Range<usize>,
    pub text: String,
}

/// Chunks each annotation span of an `n_frames` clip into segments of at
/// most `max_len` frames. Span times are converted with `frame_rate` and
/// clamped to the clip; spans are handled independently, so overlapping
/// spans yield overlapping segments.
pub fn build_eval_segments(
    n_frames: usize,
    spans: &[AnnotationSpan],
    max_len: usize,
    frame_rate: f64,
) -> Result<Vec<EvalSegment>> {
    if max_len == 0 || !(frame_rate > 0.0) {
        return Err(Error::InvalidArgument("max_len and frame_rate must be positive".into()));
    }
    let mut out = Vec::new();
    for s in spans {
        let a = (libm::round(s.start * frame_rate) as usize).min(n_frames);
        let b = (libm::round(s.end * frame_rate) as usize).min(n_frames);
        let mut t = a;
        while t < b {
            let e = (t + max_len).min(b);
            out.push(EvalSegment {
                range: t..e,
                text: s.text.clone(),
            });
            t = e;
        }
    }
    Ok(out)
}

/// Bounds of [`build_random_text_stream`].
#[derive(Debug, Clone, PartialEq)]
pub struct TextStreamConfig {
    pub min_commands: usize,
    pub max_commands: usize,
    /// Candidate durations in seconds.
    pub durations: Vec<f64>,
    /// Length of the leading and trailing idle command.
    pub pad_seconds: f64,
}

impl Default for TextStreamConfig {
    fn default() -> Self {
        Self {
            min_commands: 3,
            max_commands: 5,
            durations: alloc::vec![6.0, 7.0, 8.0, 9.0, 10.0],
            pad_seconds: 2.0,
        }
    }
}

/// Random command stream: an idle pad, then 3-5 vocabulary entries with
/// durations drawn from {6, ..., 10} s, then another idle pad. Entries are
/// drawn without replacement when the vocabulary is large enough.
pub fn build_random_text_stream<R: Rng + ?Sized>(
    vocabulary: &[String],
    config: &TextStreamConfig,
    rng: &mut R,
) -> Result<CommandTimeline> {
    if vocabulary.is_empty() {
        return Err(Error::Empty("vocabulary"));
    }
    if config.durations.is_empty() || config.min_commands > config.max_commands {
        return Err(Error::InvalidArgument("invalid text stream config".into()));
    }
    let n = rng.random_range(config.min_commands..=config.max_commands);
    let picks: Vec<&String> = if vocabulary.len() >= n {
        index::sample(rng, vocabulary.len(), n).into_iter().map(|i| &vocabulary[i]).collect()
    } else {
        (0..n).map(|_| vocabulary.choose(rng).expect("non-empty")).collect()
    };
    let mut events = alloc::vec![CommandEvent {
        time: 0.0,
        text: IDLE_COMMAND.into(),
    }];
    let mut t = config.pad_seconds;
    for w in picks {
        events.push(CommandEvent {
            time: t,
            text: w.clone(),
        });
        t += *config.durations.choose(rng).expect("non-empty");
    }
    events.push(CommandEvent {
        time: t,
        text: IDLE_COMMAND.into(),
    });
    CommandTimeline::new(events, t + config.pad_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn short_and_max_sources_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = segment_ranges(80, SegmentConfig::default(), &mut rng).unwrap();
        assert_eq!(p.ranges, [0..80]);
        assert!(p.below_min);
        let p = segment_ranges(2000, SegmentConfig::default(), &mut rng).unwrap();
        assert_eq!(p.ranges, [0..2000]);
    }

    #[test]
    fn long_source_constraints() {
        let cfg = SegmentConfig::default();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = segment_ranges(4000, cfg, &mut rng).unwrap();
            assert_eq!(p.ranges[0].start, 0);
            assert_eq!(p.ranges.last().unwrap().end, 4000);
            for r in &p.ranges {
                assert!((cfg.min_len..=cfg.max_len).contains(&r.len()), "{r:?}");
            }
            for w in p.ranges.windows(2) {
                let ov = w[0].end - w[1].start;
                assert!((cfg.min_overlap..=cfg.max_overlap).contains(&ov));
            }
        }
    }

    #[test]
    fn eval_segments_chunk() {
        let spans = [AnnotationSpan::new(0.0, 10.0, "walk").unwrap()];
        let s = build_eval_segments(1000, &spans, 200, 50.0).unwrap();
        let lens: Vec<usize> = s.iter().map(|e| e.range.len()).collect();
        assert_eq!(lens, [200, 200, 100]);
        let spans = [AnnotationSpan::new(0.0, 3.0, "a").unwrap()];
        assert_eq!(build_eval_segments(1000, &spans, 200, 50.0).unwrap().len(), 1);
    }

    #[test]
    fn text_stream_bounds() {
        let vocab: Vec<String> = ["walk", "wave left hand", "punch"].iter().map(|s| (*s).into()).collect();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tl = build_random_text_stream(&vocab, &TextStreamConfig::default(), &mut rng).unwrap();
            assert!((22.0..=54.0).contains(&tl.duration()));
            assert_eq!(tl.events()[0].text, IDLE_COMMAND);
            assert_eq!(tl.events().last().unwrap().text, IDLE_COMMAND);
            assert_eq!(tl.duration() - tl.events().last().unwrap().time, 2.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_random_text_stream(&[], &TextStreamConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn long_form_marker() {
        let s = AnnotationSpan::new(0.0, 1.0, &wrap_long_form("hiphop 1")).unwrap();
        assert!(s.is_long_form());
        assert!(AnnotationSpan::new(1.0, 1.0, "x").is_err());
    }
}
