//! Persistence of codecs, retrieval indices and corpora, and generator
//! assembly from those artifacts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steer_core::corpus::{LabeledClip, OracleEmbedder, SyntheticCorpus};
use steer_core::diffusion::{
    cosine_schedule, Latent, LatentDiffusionGenerator, PcaCodec, RetrievalDenoiser, RetrievalEntry,
    RetrievalIndex, SamplerOptions, DEFAULT_CFG_SCALE, DEFAULT_STEPS,
};
use steer_core::features::FeatureLayout;
use steer_core::primitive::{HoldGenerator, MotionGenerator};
use steer_core::text::HashedBagOfWords;
use steer_core::SkeletonSpec;

use crate::clip::{fingerprint_hex, load_clip, save_clip, MotionClip};
use crate::error::{Error, Result};
use crate::skeleton_file::{parse_skeleton, write_skeleton};
use crate::tensor::{Tensor, TensorFile};

pub fn codec_to_tensors(codec: &PcaCodec) -> TensorFile {
    use steer_core::diffusion::LatentCodec;
    let layout = codec.layout();
    let d_z = codec.latent_dim();
    let mut f = TensorFile::new();
    f.insert(
        "layout",
        Tensor::row(vec![layout.n_q as f64, layout.n_c as f64, codec.t_future() as f64]),
    )
    .insert("mean", Tensor::row(codec.mean().to_vec()))
    .insert(
        "components",
        Tensor::matrix(d_z, codec.mean().len(), codec.components_row_major()),
    )
    .insert("spectrum", Tensor::row(codec.spectrum().to_vec()));
    f
}

fn usize_field(v: f64, what: &'static str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::format(what, format!("invalid count {v}")))
    }
}

pub fn codec_from_tensors(f: &TensorFile) -> Result<PcaCodec> {
    let (_, cols, layout) = f.matrix("layout")?;
    if cols != 3 {
        return Err(Error::format("codec", "layout must hold n_q, n_c, t_future"));
    }
    let layout_v = FeatureLayout::new(usize_field(layout[0], "codec")?, usize_field(layout[1], "codec")?);
    let t_future = usize_field(layout[2], "codec")?;
    let (_, _, comps) = f.matrix("components")?;
    Ok(PcaCodec::from_parts(
        layout_v,
        t_future,
        f.matrix("mean")?.2.to_vec(),
        comps.to_vec(),
        f.matrix("spectrum")?.2.to_vec(),
    )?)
}

pub fn save_codec(codec: &PcaCodec, path: &Path) -> Result<()> {
    codec_to_tensors(codec).save(path)
}

pub fn load_codec(path: &Path) -> Result<PcaCodec> {
    codec_from_tensors(&TensorFile::load(path)?)
}

/// Index plus the width of the hashed text encoder used to build it.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexArtifact {
    pub index: RetrievalIndex,
    pub text_dim: usize,
}

pub fn index_to_tensors(a: &IndexArtifact) -> Result<TensorFile> {
    let e = a.index.entries();
    let mut f = TensorFile::new();
    f.insert(
        "history_keys",
        Tensor::from_rows(&e.iter().map(|x| x.history_key.clone()).collect::<Vec<_>>())?,
    )
    .insert(
        "text_keys",
        Tensor::from_rows(&e.iter().map(|x| x.text_key.clone()).collect::<Vec<_>>())?,
    )
    .insert(
        "latents",
        Tensor::from_rows(&e.iter().map(|x| x.latent.0.clone()).collect::<Vec<_>>())?,
    )
    .insert("labels", Tensor::Strings(e.iter().map(|x| x.label.clone()).collect()))
    .insert(
        "weights",
        Tensor::row(vec![a.index.history_weight, a.index.text_weight]),
    )
    .insert("text_dim", Tensor::row(vec![a.text_dim as f64]));
    Ok(f)
}

pub fn index_from_tensors(f: &TensorFile) -> Result<IndexArtifact> {
    let h = f.rows("history_keys")?;
    let t = f.rows("text_keys")?;
    let z = f.rows("latents")?;
    let labels = f.strings("labels")?;
    if t.len() != h.len() || z.len() != h.len() || labels.len() != h.len() {
        return Err(Error::format("retrieval index", "entry counts disagree"));
    }
    let weights = f.matrix("weights")?.2;
    if weights.len() != 2 {
        return Err(Error::format("retrieval index", "weights must hold two values"));
    }
    let text_dim = usize_field(f.matrix("text_dim")?.2.first().copied().unwrap_or(-1.0), "retrieval index")?;
    let entries = h
        .into_iter()
        .zip(t)
        .zip(z)
        .zip(labels)
        .map(|(((history_key, text_key), latent), label)| RetrievalEntry {
            history_key,
            text_key,
            latent: Latent(latent),
            label: label.clone(),
        })
        .collect();
    Ok(IndexArtifact {
        index: RetrievalIndex::new(entries)?.with_weights(weights[0], weights[1]),
        text_dim,
    })
}

pub fn save_index(a: &IndexArtifact, path: &Path) -> Result<()> {
    index_to_tensors(a)?.save(path)
}

pub fn load_index(path: &Path) -> Result<IndexArtifact> {
    index_from_tensors(&TensorFile::load(path)?)
}

/// Manifest of a corpus directory (`corpus.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub version: u32,
    pub skeleton_fingerprint: String,
    pub labels: Vec<String>,
    pub seed: u64,
    pub noise: f64,
    pub clips: Vec<CorpusEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub file: String,
    pub label: String,
    pub frames: usize,
}

pub const CORPUS_MANIFEST: &str = "corpus.json";
pub const CORPUS_SKELETON: &str = "skeleton.txt";

/// Writes `corpus.json`, `skeleton.txt` and one clip file per clip.
pub fn save_corpus(
    dir: &Path,
    corpus: &SyntheticCorpus,
    skeleton: &SkeletonSpec,
    seed: u64,
    noise: f64,
) -> Result<CorpusManifest> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(CORPUS_SKELETON), write_skeleton(skeleton))?;
    let mut clips = Vec::new();
    for (i, c) in corpus.clips.iter().enumerate() {
        let file = format!("clip_{i:04}.clip");
        save_clip(&MotionClip::new(skeleton, c.frames.clone())?, &dir.join(&file))?;
        clips.push(CorpusEntry {
            file,
            label: c.label.clone(),
            frames: c.frames.len(),
        });
    }
    let manifest = CorpusManifest {
        version: 1,
        skeleton_fingerprint: fingerprint_hex(skeleton),
        labels: corpus.embedder.labels().to_vec(),
        seed,
        noise,
        clips,
    };
    std::fs::write(dir.join(CORPUS_MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// A corpus read back from disk.
#[derive(Debug, Clone)]
pub struct LoadedCorpus {
    pub manifest: CorpusManifest,
    pub skeleton: SkeletonSpec,
    pub clips: Vec<LabeledClip>,
}

impl LoadedCorpus {
    pub fn embedder(&self) -> Result<OracleEmbedder> {
        Ok(OracleEmbedder::new(&self.manifest.labels, &self.skeleton)?)
    }
}

pub fn load_corpus(dir: &Path) -> Result<LoadedCorpus> {
    let manifest: CorpusManifest = serde_json::from_str(&std::fs::read_to_string(dir.join(CORPUS_MANIFEST))?)?;
    if manifest.version != 1 {
        return Err(Error::Version {
            what: "corpus manifest",
            found: manifest.version.to_string(),
            expected: "1".into(),
        });
    }
    let skeleton = parse_skeleton(&std::fs::read_to_string(dir.join(CORPUS_SKELETON))?)?;
    let mut clips = Vec::new();
    for e in &manifest.clips {
        let clip = load_clip(&dir.join(&e.file))?;
        clip.check_skeleton(&skeleton)?;
        clips.push(LabeledClip {
            label: e.label.clone(),
            frames: clip.frames,
        });
    }
    Ok(LoadedCorpus {
        manifest,
        skeleton,
        clips,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Freezes the body in the seed pose.
    Hold,
    /// Guided DDPM over a retrieval denoiser in a PCA latent space.
    Retrieval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub codec: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub cfg_scale: f64,
    pub steps: usize,
    pub terminal_noise: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            kind: GeneratorKind::Retrieval,
            codec: None,
            index: None,
            cfg_scale: DEFAULT_CFG_SCALE,
            steps: DEFAULT_STEPS,
            terminal_noise: false,
        }
    }
}

pub type DynGenerator = Box<dyn MotionGenerator + Send + Sync>;

pub type RetrievalGenerator = LatentDiffusionGenerator<PcaCodec, RetrievalDenoiser, HashedBagOfWords>;

/// Assembles the retrieval generator from in-memory artifacts.
pub fn retrieval_generator(
    codec: PcaCodec,
    index: IndexArtifact,
    cfg_scale: f64,
    steps: usize,
    terminal_noise: bool,
) -> Result<RetrievalGenerator> {
    let mut g = LatentDiffusionGenerator::new(
        codec,
        RetrievalDenoiser::new(index.index)?,
        HashedBagOfWords { dim: index.text_dim },
        cosine_schedule(steps)?,
        cfg_scale,
    )?;
    g.options = SamplerOptions { terminal_noise };
    Ok(g)
}

/// Loads the artifacts named by `config` and builds the generator.
pub fn build_generator(config: &GeneratorConfig) -> Result<DynGenerator> {
    match config.kind {
        GeneratorKind::Hold => Ok(Box::new(HoldGenerator::default())),
        GeneratorKind::Retrieval => {
            let need = |p: &Option<PathBuf>, what: &'static str| {
                p.clone()
                    .ok_or_else(|| Error::format(what, "path required for the retrieval generator"))
            };
            let codec = load_codec(&need(&config.codec, "codec")?)?;
            let index = load_index(&need(&config.index, "retrieval index")?)?;
            Ok(Box::new(retrieval_generator(
                codec,
                index,
                config.cfg_scale,
                config.steps,
                config.terminal_noise,
            )?))
        }
    }
}
