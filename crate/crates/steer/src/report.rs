//! JSON metric reports and the evaluation routines behind `eval-gen` and
//! `eval-track`.
//!
//! Every report has the shape
//! `{"schema": "steer-report/1", "kind": ..., "metrics": {name: number}, "details": {...}}`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;
use steer_core::corpus::{build_eval_segments, AnnotationSpan, LabeledClip, EVAL_SEGMENT_FRAMES};
use steer_core::features::{encode_features, MotionFeatureFrame};
use steer_core::metrics::{
    auj, default_diversity_subset, diversity, fid, jerk_baseline, joints_by_row, peak_jerk,
    retrieval_scores, success_rate, tracking_metrics, transition_clips, EmbeddingProvider,
    FeatureStats, RETRIEVAL_BATCH, SUCCESS_THRESHOLD_M, TRANSITION_HALF_WINDOW,
};
use steer_core::{forward_kinematics, BodyPose, RawMotionFrame, SkeletonSpec, FRAME_RATE_HZ};

use crate::error::{Error, Result};
use crate::spans::CommandLogEntry;

pub const REPORT_SCHEMA: &str = "steer-report/1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub kind: String,
    pub metrics: BTreeMap<String, f64>,
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl Report {
    pub fn new(kind: &str) -> Self {
        Self {
            schema: REPORT_SCHEMA,
            kind: kind.into(),
            metrics: BTreeMap::new(),
            details: serde_json::Map::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.into(), value);
        self
    }

    pub fn detail(&mut self, name: &str, value: impl Serialize) -> &mut Self {
        self.details
            .insert(name.into(), serde_json::to_value(value).expect("detail serialises"));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }
}

/// Feature segments of at most [`EVAL_SEGMENT_FRAMES`] frames with their
/// texts.
pub type Segments = Vec<(Vec<MotionFeatureFrame>, String)>;

fn segments_from_spans(features: &[MotionFeatureFrame], spans: &[AnnotationSpan]) -> Result<Segments> {
    Ok(build_eval_segments(features.len(), spans, EVAL_SEGMENT_FRAMES, FRAME_RATE_HZ)?
        .into_iter()
        .filter(|s| s.range.len() >= 2)
        .map(|s| (features[s.range].to_vec(), s.text))
        .collect())
}

/// Each labelled clip, chunked into evaluation segments.
pub fn reference_segments(clips: &[LabeledClip]) -> Result<Segments> {
    let mut out = Vec::new();
    for c in clips {
        let f = encode_features(&c.frames)?.features;
        let span = AnnotationSpan::new(0.0, f.len() as f64 / FRAME_RATE_HZ, &c.label)?;
        out.extend(segments_from_spans(&f, &[span])?);
    }
    Ok(out)
}

/// Spans of constant command from a block command log covering
/// `n_frames` frames.
pub fn command_spans(log: &[CommandLogEntry], n_frames: usize) -> Result<Vec<AnnotationSpan>> {
    let mut spans: Vec<AnnotationSpan> = Vec::new();
    for (i, e) in log.iter().enumerate() {
        let start = e.motion_index.min(n_frames);
        let end = log.get(i + 1).map_or(n_frames, |n| n.motion_index.min(n_frames));
        if end <= start {
            continue;
        }
        let (a, b) = (start as f64 / FRAME_RATE_HZ, end as f64 / FRAME_RATE_HZ);
        match spans.last_mut() {
            Some(last) if last.text == e.command && last.end == a => last.end = b,
            _ => spans.push(AnnotationSpan::new(a, b, &e.command)?),
        }
    }
    Ok(spans)
}

/// Frames at which the latched command changes.
pub fn command_boundaries(log: &[CommandLogEntry]) -> Vec<usize> {
    log.windows(2)
        .filter(|w| w[0].command != w[1].command)
        .map(|w| w[1].motion_index)
        .collect()
}

/// Generation-quality report of a generated clip against a reference
/// corpus.
pub fn evaluate_generation<E: EmbeddingProvider, R: Rng>(
    embedder: &E,
    reference: &[LabeledClip],
    generated: &[RawMotionFrame],
    log: &[CommandLogEntry],
    rng: &mut R,
) -> Result<Report> {
    let features = encode_features(generated)?.features;
    let spans = command_spans(log, features.len())?;
    let gen = segments_from_spans(&features, &spans)?;
    let refs = reference_segments(reference)?;
    if gen.len() < 2 || refs.len() < 2 {
        return Err(Error::format(
            "evaluation",
            format!("{} generated and {} reference segments; need at least 2 each", gen.len(), refs.len()),
        ));
    }
    let gm: Vec<Vec<f64>> = gen.iter().map(|(f, _)| embedder.embed_motion(f)).collect();
    let gt: Vec<Vec<f64>> = gen.iter().map(|(_, t)| embedder.embed_text(t)).collect();
    let rm: Vec<Vec<f64>> = refs.iter().map(|(f, _)| embedder.embed_motion(f)).collect();
    let mut r = Report::new("generation");
    r.metric(
        "fid",
        fid(&FeatureStats::from_samples(&gm)?, &FeatureStats::from_samples(&rm)?)?,
    );
    r.metric("diversity", diversity(&gm, default_diversity_subset(gm.len()), rng)?);
    let batch = RETRIEVAL_BATCH.min(gm.len());
    let k_max = 3.min(batch);
    let scores = retrieval_scores(&gm, &gt, batch, k_max, rng)?;
    for (k, v) in scores.r_at.iter().enumerate() {
        r.metric(&format!("r_at_{}", k + 1), *v);
    }
    r.metric("mm_dist", scores.mm_dist);

    let ref_q: Vec<Vec<Vec<f64>>> = reference
        .iter()
        .filter(|c| c.frames.len() >= 4)
        .map(|c| joints_by_row(&c.frames.iter().map(|f| f.q.clone()).collect::<Vec<_>>()))
        .collect();
    let j_avg = jerk_baseline(&ref_q)?;
    r.metric("jerk_baseline", j_avg);
    let q_rows: Vec<Vec<f64>> = generated.iter().map(|f| f.q.clone()).collect();
    let tc = transition_clips(&q_rows, &command_boundaries(log), TRANSITION_HALF_WINDOW);
    if !tc.clips.is_empty() {
        let mut pj = 0.0;
        let mut aj = 0.0;
        for c in &tc.clips {
            let j = joints_by_row(c);
            pj += peak_jerk(&j)?;
            aj += auj(&j, j_avg)?;
        }
        let n = tc.clips.len() as f64;
        r.metric("peak_jerk", pj / n);
        r.metric("auj", aj / n);
    }
    r.detail("generated_segments", gen.len())
        .detail("reference_segments", refs.len())
        .detail("retrieval_batch", batch)
        .detail("retrieval_batches", scores.batches)
        .detail("transitions", &tc.boundaries)
        .detail("skipped_transitions", &tc.skipped);
    Ok(r)
}

pub fn poses(skeleton: &SkeletonSpec, frames: &[RawMotionFrame]) -> Result<Vec<BodyPose>> {
    Ok(frames
        .iter()
        .map(|f| forward_kinematics(skeleton, f.root_position, f.root_orientation, &f.q))
        .collect::<steer_core::Result<Vec<_>>>()?)
}

/// Tracking-fidelity report of executed against reference clips.
pub fn evaluate_tracking(
    skeleton: &SkeletonSpec,
    pairs: &[(Vec<RawMotionFrame>, Vec<RawMotionFrame>)],
    theta: f64,
) -> Result<Report> {
    if pairs.is_empty() {
        return Err(Error::format("evaluation", "no trajectory pairs"));
    }
    let posed: Vec<(Vec<BodyPose>, Vec<BodyPose>)> = pairs
        .iter()
        .map(|(p, r)| Ok((poses(skeleton, p)?, poses(skeleton, r)?)))
        .collect::<Result<_>>()?;
    let mut sums = [0.0; 4];
    for (p, r) in &posed {
        let m = tracking_metrics(p, r)?;
        for (s, v) in sums.iter_mut().zip([m.g_mpjpe, m.mpjpe, m.e_vel, m.e_acc]) {
            *s += v;
        }
    }
    let n = posed.len() as f64;
    let refs: Vec<(&[BodyPose], &[BodyPose])> = posed.iter().map(|(p, r)| (p.as_slice(), r.as_slice())).collect();
    let mut r = Report::new("tracking");
    r.metric("g_mpjpe_mm", sums[0] / n)
        .metric("mpjpe_mm", sums[1] / n)
        .metric("e_vel_mm", sums[2] / n)
        .metric("e_acc_mm", sums[3] / n)
        .metric("success_rate", success_rate(&refs, theta)?);
    r.detail("pairs", posed.len()).detail("theta_m", theta);
    Ok(r)
}

pub const DEFAULT_THETA_M: f64 = SUCCESS_THRESHOLD_M;

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(i: usize, c: &str) -> CommandLogEntry {
        CommandLogEntry {
            motion_index: i,
            command: c.into(),
        }
    }

    #[test]
    fn spans_merge_repeated_commands() {
        let log = [entry(0, "stand"), entry(8, "stand"), entry(16, "walk"), entry(24, "walk")];
        let s = command_spans(&log, 30).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].start, s[0].end), (0.0, 16.0 / 50.0));
        assert_eq!((s[1].start, s[1].end), (16.0 / 50.0, 30.0 / 50.0));
        assert_eq!(command_boundaries(&log), vec![16]);
    }

    #[test]
    fn report_shape() {
        let mut r = Report::new("x");
        r.metric("a", 1.5).detail("n", 3);
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["schema"], REPORT_SCHEMA);
        assert_eq!(v["metrics"]["a"], 1.5);
        assert_eq!(v["details"]["n"], 3);
    }
}
