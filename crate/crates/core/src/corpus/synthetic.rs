//! Procedural motion-text corpus.
//!
//! Every clip starts in a neutral standing pose and blends into its
//! label's periodic template over the first [`RAMP_FRAMES`] frames, so the
//! corpus contains transitions out of standing as well as steady motion.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::diffusion::{history_summary, LatentCodec, RetrievalEntry, RetrievalIndex};
use crate::features::{encode_features, FeatureLayout, MotionFeatureFrame, RawMotionFrame};
use crate::geometry::{rotate_z, Quat};
use crate::kinematics::{ankle_positions, extract_foot_contacts, forward_kinematics, ContactThresholds, SkeletonSpec};
use crate::metrics::EmbeddingProvider;
use crate::primitive::{segment_primitives, Labels, MotionPrimitive, PrimitiveConfig};
use crate::text::TextEncoder;
use crate::{Error, Result, FRAME_RATE_HZ};

pub const DEFAULT_LABELS: [&str; 5] = ["stand", "walk", "wave left hand", "wave right hand", "punch"];

/// Length of the clean clips behind the oracle embedder.
pub const TEMPLATE_FRAMES: usize = 250;

const RAMP_FRAMES: f64 = 25.0;
const ANKLE_CLEARANCE: f64 = 0.04;
const WALK_SPEED: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusSpec {
    pub labels: Vec<String>,
    pub clips_per_label: usize,
    pub min_frames: usize,
    pub max_frames: usize,
    /// Standard deviation of per-frame joint jitter (rad); also scales the
    /// per-clip amplitude and tempo perturbations.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            labels: DEFAULT_LABELS.iter().map(|s| s.to_string()).collect(),
            clips_per_label: 4,
            min_frames: 200,
            max_frames: 300,
            noise: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Template {
    Stand,
    Walk,
    WaveLeft,
    WaveRight,
    Punch,
}

impl Template {
    fn parse(label: &str) -> Result<Self> {
        Ok(match label.trim().to_lowercase().as_str() {
            "stand" => Self::Stand,
            "walk" => Self::Walk,
            "wave left hand" => Self::WaveLeft,
            "wave right hand" => Self::WaveRight,
            "punch" => Self::Punch,
            _ => return Err(Error::UnknownLabel(label.into())),
        })
    }

    fn required_joints(self) -> &'static [&'static [&'static str]] {
        match self {
            Self::Stand => &[],
            Self::Walk => &[&["left_hip_pitch", "left_hip"], &["right_hip_pitch", "right_hip"]],
            Self::WaveLeft => &[&["left_shoulder_roll"], &["left_elbow"]],
            Self::WaveRight => &[&["right_shoulder_roll"], &["right_elbow"]],
            Self::Punch => &[&["right_shoulder_pitch"], &["right_elbow"]],
        }
    }
}

/// Per-clip variation of a template.
#[derive(Debug, Clone, Copy)]
struct Variation {
    phase: f64,
    amp: f64,
    tempo: f64,
}

const CLEAN: Variation = Variation {
    phase: 0.0,
    amp: 1.0,
    tempo: 1.0,
};

struct Rig<'a> {
    skeleton: &'a SkeletonSpec,
}

impl Rig<'_> {
    fn find(&self, names: &[&str]) -> Option<usize> {
        names.iter().find_map(|n| self.skeleton.joint_index(n))
    }

    fn set(&self, q: &mut [f64], names: &[&str], v: f64) {
        if let Some(i) = self.find(names) {
            q[i] = v;
        }
    }

    fn check(&self, label: &str, t: Template) -> Result<()> {
        for names in t.required_joints() {
            if self.find(names).is_none() {
                return Err(Error::InvalidArgument(alloc::format!(
                    "label {label:?} needs joint {:?} on skeleton {:?}",
                    names[0],
                    self.skeleton.name
                )));
            }
        }
        Ok(())
    }

    /// Joint angles at time `t` seconds with blend weight `w` in [0, 1].
    fn pose(&self, tpl: Template, t: f64, w: f64, v: Variation) -> Vec<f64> {
        let mut q = alloc::vec![0.0; self.skeleton.n_q()];
        let a = w * v.amp;
        match tpl {
            Template::Stand => {}
            Template::Walk => {
                let s = libm::sin(TAU * 0.8 * v.tempo * t + v.phase);
                for (side, lift) in [("left", s.max(0.0)), ("right", (-s).max(0.0))] {
                    let hip = -0.9 * a * lift;
                    let knee = 1.8 * a * lift;
                    let has_knee = self.skeleton.joint_index(&alloc::format!("{side}_knee")).is_some();
                    let hip = if has_knee { hip } else { -(a * lift) };
                    self.set(&mut q, &[&alloc::format!("{side}_hip_pitch"), &alloc::format!("{side}_hip")], hip);
                    self.set(&mut q, &[&alloc::format!("{side}_knee")], knee);
                    self.set(&mut q, &[&alloc::format!("{side}_ankle_pitch")], -(hip + knee));
                }
                self.set(&mut q, &["left_shoulder_pitch"], 0.35 * a * s);
                self.set(&mut q, &["right_shoulder_pitch"], -0.35 * a * s);
            }
            Template::WaveLeft | Template::WaveRight => {
                let (side, sign) = if tpl == Template::WaveLeft { ("left", 1.0) } else { ("right", -1.0) };
                let osc = libm::sin(TAU * 1.5 * v.tempo * t + v.phase);
                self.set(&mut q, &[&alloc::format!("{side}_shoulder_roll")], sign * 1.4 * a);
                self.set(&mut q, &[&alloc::format!("{side}_shoulder_yaw")], sign * 0.3 * a * osc);
                self.set(&mut q, &[&alloc::format!("{side}_elbow")], a * (1.0 + 0.5 * osc));
            }
            Template::Punch => {
                let s = 0.5 * (1.0 - libm::cos(TAU * 1.0 * v.tempo * t + v.phase));
                self.set(&mut q, &["right_shoulder_pitch"], -1.4 * a * s);
                self.set(&mut q, &["right_elbow"], a * (1.6 - 1.4 * s));
                self.set(&mut q, &["left_shoulder_pitch"], -0.5 * a);
                self.set(&mut q, &["left_elbow"], 1.2 * a);
            }
        }
        q
    }
}

fn blend(frame: usize) -> f64 {
    let x = (frame as f64 / RAMP_FRAMES).min(1.0);
    x * x * (3.0 - 2.0 * x)
}

fn stand_height(skeleton: &SkeletonSpec) -> Result<f64> {
    let pose = forward_kinematics(skeleton, [0.0; 3], Quat::IDENTITY, &alloc::vec![0.0; skeleton.n_q()])?;
    let (l, r) = skeleton.ankles;
    let low = pose.link_positions[l + 1][2].min(pose.link_positions[r + 1][2]);
    Ok(ANKLE_CLEARANCE - low)
}

fn synthesize<R: Rng + ?Sized>(
    label: &str,
    skeleton: &SkeletonSpec,
    frames: usize,
    variation: Variation,
    heading: f64,
    origin: [f64; 2],
    jitter: Option<(f64, &mut R)>,
) -> Result<Vec<RawMotionFrame>> {
    let tpl = Template::parse(label)?;
    let rig = Rig { skeleton };
    rig.check(label, tpl)?;
    let h = stand_height(skeleton)?;
    let orientation = Quat::from_yaw(heading);
    let mut forward = 0.0;
    let mut qs = Vec::with_capacity(frames);
    let mut roots = Vec::with_capacity(frames);
    let mut jitter = jitter;
    for f in 0..frames {
        let t = f as f64 / FRAME_RATE_HZ;
        let w = blend(f);
        let mut q = rig.pose(tpl, t, w, variation);
        if let Some((sd, rng)) = jitter.as_mut() {
            if *sd > 0.0 {
                let n = Normal::new(0.0, *sd).map_err(|_| Error::InvalidArgument("noise".into()))?;
                q.iter_mut().for_each(|v| *v += n.sample(*rng));
            }
        }
        let d = rotate_z(heading, [forward, 0.0, 0.0]);
        roots.push([origin[0] + d[0], origin[1] + d[1], h]);
        qs.push(q);
        if tpl == Template::Walk {
            forward += WALK_SPEED * variation.tempo * w / FRAME_RATE_HZ;
        }
    }
    let poses = roots
        .iter()
        .zip(&qs)
        .map(|(p, q)| forward_kinematics(skeleton, *p, orientation, q))
        .collect::<Result<Vec<_>>>()?;
    let contacts = extract_foot_contacts(&ankle_positions(skeleton, &poses), ContactThresholds::default())?;
    Ok(roots
        .into_iter()
        .zip(qs)
        .zip(contacts)
        .map(|((p, q), c)| RawMotionFrame {
            root_position: p,
            root_orientation: orientation,
            q,
            contacts: c.to_vec(),
        })
        .collect())
}

/// The noise-free template of `label`, facing +x from the origin.
pub fn clean_template(label: &str, skeleton: &SkeletonSpec, frames: usize) -> Result<Vec<RawMotionFrame>> {
    synthesize::<ChaCha8Rng>(label, skeleton, frames, CLEAN, 0.0, [0.0; 2], None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledClip {
    pub label: String,
    pub frames: Vec<RawMotionFrame>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub clips: Vec<LabeledClip>,
    pub embedder: OracleEmbedder,
}

/// Generates `clips_per_label` noisy clips per label with random length,
/// heading, start position, phase, amplitude, and tempo. Bitwise
/// reproducible from the spec.
pub fn generate_synthetic_corpus(spec: &SyntheticCorpusSpec, skeleton: &SkeletonSpec) -> Result<SyntheticCorpus> {
    if spec.labels.is_empty() {
        return Err(Error::Empty("corpus labels"));
    }
    if spec.min_frames < 2 || spec.min_frames > spec.max_frames {
        return Err(Error::InvalidArgument(alloc::format!(
            "clip length range {}..={} is invalid",
            spec.min_frames,
            spec.max_frames
        )));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!("noise {}", spec.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let perturb = Normal::new(0.0, 1.0).expect("unit normal");
    let mut clips = Vec::new();
    for label in &spec.labels {
        for _ in 0..spec.clips_per_label {
            let frames = rng.random_range(spec.min_frames..=spec.max_frames);
            let mut k = |scale: f64| (spec.noise * scale * perturb.sample(&mut rng)).clamp(-0.2, 0.2);
            let variation = Variation {
                amp: 1.0 + k(5.0),
                tempo: 1.0 + k(2.0),
                phase: 0.0,
            };
            let variation = Variation {
                phase: rng.random_range(0.0..TAU),
                ..variation
            };
            let heading = rng.random_range(-PI..PI);
            let origin = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let frames = synthesize(label, skeleton, frames, variation, heading, origin, Some((spec.noise, &mut rng)))?;
            clips.push(LabeledClip {
                label: label.clone(),
                frames,
            });
        }
    }
    let embedder = OracleEmbedder::new(&spec.labels, skeleton)?;
    Ok(SyntheticCorpus { clips, embedder })
}

/// Per-dimension mean and standard deviation of flattened feature frames.
pub fn motion_descriptor(features: &[MotionFeatureFrame]) -> Vec<f64> {
    let Some(first) = features.first() else {
        return Vec::new();
    };
    let layout = FeatureLayout::layout_of(first);
    let d = layout.dim();
    let n = features.len() as f64;
    let mut mean = alloc::vec![0.0; d];
    let mut sq = alloc::vec![0.0; d];
    for f in features {
        for (i, v) in layout.flatten(f).into_iter().enumerate() {
            mean[i] += v;
            sq[i] += v * v;
        }
    }
    let mut out = Vec::with_capacity(2 * d);
    for i in 0..d {
        mean[i] /= n;
        out.push(mean[i]);
    }
    for i in 0..d {
        out.push(libm::sqrt((sq[i] / n - mean[i] * mean[i]).max(0.0)));
    }
    out
}

/// Maps label `k` to the unit vector `e_k`, and a motion to `e_k` of the
/// template whose descriptor is nearest.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEmbedder {
    labels: Vec<String>,
    descriptors: Vec<Vec<f64>>,
}

impl OracleEmbedder {
    pub fn new(labels: &[String], skeleton: &SkeletonSpec) -> Result<Self> {
        let descriptors = labels
            .iter()
            .map(|l| {
                let clip = clean_template(l, skeleton, TEMPLATE_FRAMES)?;
                Ok(motion_descriptor(&encode_features(&clip)?.features))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels: labels.to_vec(),
            descriptors,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    fn basis(&self, k: usize) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.labels.len()];
        v[k] = 1.0;
        v
    }

    /// Index of the template nearest to `features`; ties go to the lower
    /// index.
    pub fn nearest_template(&self, features: &[MotionFeatureFrame]) -> usize {
        let d = motion_descriptor(features);
        let mut best = (0, f64::INFINITY);
        for (k, t) in self.descriptors.iter().enumerate() {
            let dist: f64 = if t.len() == d.len() {
                t.iter().zip(&d).map(|(a, b)| (a - b) * (a - b)).sum()
            } else {
                f64::INFINITY
            };
            if dist < best.1 {
                best = (k, dist);
            }
        }
        best.0
    }

    pub fn label_index(&self, text: &str) -> Option<usize> {
        let t = text.trim().to_lowercase();
        self.labels.iter().position(|l| l.to_lowercase() == t)
    }
}

impl EmbeddingProvider for OracleEmbedder {
    fn dim(&self) -> usize {
        self.labels.len()
    }

    fn embed_motion(&self, features: &[MotionFeatureFrame]) -> Vec<f64> {
        self.basis(self.nearest_template(features))
    }

    /// Unknown text maps to the zero vector.
    fn embed_text(&self, text: &str) -> Vec<f64> {
        self.label_index(text)
            .map_or_else(|| alloc::vec![0.0; self.labels.len()], |k| self.basis(k))
    }
}

/// Single-primitive windows (`t_history` + `t_future` frames, every
/// `stride` frames) of every clip, with their clip labels.
pub fn training_windows(
    clips: &[LabeledClip],
    t_history: usize,
    t_future: usize,
    stride: usize,
) -> Result<(Vec<MotionPrimitive>, Vec<String>)> {
    let config = PrimitiveConfig {
        t_history,
        t_future,
        n_prim: 1,
    };
    let mut windows = Vec::new();
    let mut labels = Vec::new();
    for c in clips {
        let features = encode_features(&c.frames)?.features;
        for item in segment_primitives(&features, Labels::Clip(&c.label), stride, config)?.items {
            labels.push(item.text);
            windows.extend(item.primitives);
        }
    }
    Ok((windows, labels))
}

/// Retrieval index of (history summary, text embedding, clean latent)
/// triples over labelled windows.
pub fn build_retrieval_index<C: LatentCodec + ?Sized, E: TextEncoder + ?Sized>(
    windows: &[MotionPrimitive],
    labels: &[String],
    codec: &C,
    encoder: &E,
) -> Result<RetrievalIndex> {
    if windows.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            what: "window labels",
            expected: windows.len(),
            got: labels.len(),
        });
    }
    let entries = windows
        .iter()
        .zip(labels)
        .map(|(w, l)| {
            Ok(RetrievalEntry {
                history_key: history_summary(&w.history),
                text_key: encoder
                    .embed(l)
                    .map_or_else(|| alloc::vec![0.0; encoder.dim()], |e| e.as_slice().to_vec()),
                latent: codec.encode(&w.history, &w.future)?,
                label: l.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RetrievalIndex::new(entries)
}

/// Brute-force nearest neighbour over flattened future blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestLabelClassifier {
    keys: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl NearestLabelClassifier {
    pub fn new(windows: &[MotionPrimitive], labels: &[String]) -> Result<Self> {
        if windows.is_empty() {
            return Err(Error::Empty("classifier windows"));
        }
        if windows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                what: "window labels",
                expected: windows.len(),
                got: labels.len(),
            });
        }
        let keys = windows
            .iter()
            .map(|w| {
                let layout = FeatureLayout::layout_of(&w.future[0]);
                layout.flatten_all(&w.future)
            })
            .collect();
        Ok(Self {
            keys,
            labels: labels.to_vec(),
        })
    }

    /// Label of the nearest stored block; ties go to the lower index.
    pub fn classify(&self, block: &[MotionFeatureFrame]) -> Result<&str> {
        let first = block.first().ok_or(Error::Empty("block"))?;
        let x = FeatureLayout::layout_of(first).flatten_all(block);
        if x.len() != self.keys[0].len() {
            return Err(Error::DimensionMismatch {
                what: "classified block",
                expected: self.keys[0].len(),
                got: x.len(),
            });
        }
        let mut best = (0, f64::INFINITY);
        for (i, k) in self.keys.iter().enumerate() {
            let d: f64 = k.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(&self.labels[best.0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::builtin::{biped5, humanoid29};

    #[test]
    fn reproducible_and_labelled() {
        let spec = SyntheticCorpusSpec {
            clips_per_label: 1,
            ..Default::default()
        };
        let s = humanoid29();
        let a = generate_synthetic_corpus(&spec, &s).unwrap();
        let b = generate_synthetic_corpus(&spec, &s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.clips.len(), 5);
        assert!(generate_synthetic_corpus(
            &SyntheticCorpusSpec {
                labels: alloc::vec!["fly".into()],
                ..Default::default()
            },
            &s
        )
        .is_err());
    }

    #[test]
    fn stand_is_static_up_to_noise() {
        let spec = SyntheticCorpusSpec {
            labels: alloc::vec!["stand".into()],
            clips_per_label: 2,
            ..Default::default()
        };
        let c = generate_synthetic_corpus(&spec, &humanoid29()).unwrap();
        for clip in &c.clips {
            let f = encode_features(&clip.frames).unwrap().features;
            for x in &f {
                assert!(x.dp_local.iter().all(|v| v.abs() < 1e-12));
                assert!(x.dq.iter().all(|v| v.abs() < 8.0 * spec.noise));
            }
        }
    }

    #[test]
    fn walk_alternates_contacts() {
        for s in [humanoid29(), biped5()] {
            let clip = clean_template("walk", &s, 200).unwrap();
            let (mut l_only, mut r_only) = (0, 0);
            for f in &clip[50..] {
                match (f.contacts[0], f.contacts[1]) {
                    (true, false) => l_only += 1,
                    (false, true) => r_only += 1,
                    _ => {}
                }
            }
            assert!(l_only > 10 && r_only > 10, "{}: {l_only} {r_only}", s.name);
        }
    }

    #[test]
    fn oracle_embedder_aligns_templates() {
        let s = humanoid29();
        let labels: Vec<String> = DEFAULT_LABELS.iter().map(|l| l.to_string()).collect();
        let e = OracleEmbedder::new(&labels, &s).unwrap();
        for l in &labels {
            let f = encode_features(&clean_template(l, &s, TEMPLATE_FRAMES).unwrap()).unwrap().features;
            assert_eq!(e.embed_motion(&f), e.embed_text(l));
        }
        assert!(biped5().joint_index("left_elbow").is_none());
        assert!(OracleEmbedder::new(&labels, &biped5()).is_err());
    }
}
