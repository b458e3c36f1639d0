use alloc::string::String;
use alloc::vec::Vec;

use super::Latent;
use crate::features::{FeatureLayout, MotionFeatureFrame};
use crate::text::TextEmbedding;
use crate::{Error, Result};

/// Everything a denoiser may condition on at one reverse step.
#[derive(Debug, Clone, Copy)]
pub struct DenoiseInput<'a> {
    pub z_k: &'a Latent,
    /// Diffusion step `k` in `1..=K`.
    pub step: usize,
    /// `alpha_bar_k` of the schedule in use.
    pub alpha_bar: f64,
    pub history: &'a [MotionFeatureFrame],
    /// `None` selects the unconditional branch.
    pub text: Option<&'a TextEmbedding>,
}

/// Predicts the clean latent from a noisy one.
pub trait Denoiser {
    fn latent_dim(&self) -> usize;
    fn predict(&self, input: &DenoiseInput<'_>) -> Result<Latent>;
}

/// Bayes-optimal denoiser for a diagonal Gaussian prior
/// `z_0 ~ N(mean, diag(var))`. Ignores history and text.
///
/// With `z_k = sqrt(ab) z_0 + sqrt(1 - ab) eps`, the posterior mean is, per
/// coordinate,
///
/// ```text
/// E[z_0 | z_k] = (sqrt(ab) * var * z_k + (1 - ab) * mean) / (ab * var + 1 - ab)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianDenoiser {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl LinearGaussianDenoiser {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch {
                what: "prior variance",
                expected: mean.len(),
                got: var.len(),
            });
        }
        if let Some(i) = var.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(alloc::format!(
                "prior variance at {i} must be positive"
            )));
        }
        crate::error::ensure_finite("prior mean", &mean)?;
        Ok(Self { mean, var })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    /// Posterior mean for a given `alpha_bar`.
    pub fn posterior_mean(&self, z_k: &[f64], alpha_bar: f64) -> Vec<f64> {
        let sa = libm::sqrt(alpha_bar);
        z_k.iter()
            .zip(self.mean.iter().zip(&self.var))
            .map(|(z, (m, v))| (sa * v * z + (1.0 - alpha_bar) * m) / (alpha_bar * v + 1.0 - alpha_bar))
            .collect()
    }
}

impl Denoiser for LinearGaussianDenoiser {
    fn latent_dim(&self) -> usize {
        self.mean.len()
    }

    fn predict(&self, input: &DenoiseInput<'_>) -> Result<Latent> {
        if input.z_k.dim() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                what: "noisy latent",
                expected: self.mean.len(),
                got: input.z_k.dim(),
            });
        }
        Ok(Latent(self.posterior_mean(input.z_k.as_slice(), input.alpha_bar)))
    }
}

/// Flattened history frames scaled by `1 / sqrt(n)`, i.e. so that the
/// Euclidean distance between two summaries is an RMS feature difference.
pub fn history_summary(history: &[MotionFeatureFrame]) -> Vec<f64> {
    let Some(first) = history.first() else {
        return Vec::new();
    };
    let mut v = FeatureLayout::layout_of(first).flatten_all(history);
    let s = 1.0 / libm::sqrt(v.len() as f64);
    v.iter_mut().for_each(|x| *x *= s);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalEntry {
    pub history_key: Vec<f64>,
    pub text_key: Vec<f64>,
    pub latent: Latent,
    pub label: String,
}

/// Stored (history summary, text embedding, clean latent) triples.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalIndex {
    entries: Vec<RetrievalEntry>,
    pub history_weight: f64,
    pub text_weight: f64,
}

impl RetrievalIndex {
    pub fn new(entries: Vec<RetrievalEntry>) -> Result<Self> {
        let first = entries.first().ok_or(Error::Empty("retrieval index"))?;
        let (dh, de, dz) = (first.history_key.len(), first.text_key.len(), first.latent.dim());
        for e in &entries {
            for (what, expected, got) in [
                ("retrieval history key", dh, e.history_key.len()),
                ("retrieval text key", de, e.text_key.len()),
                ("retrieval latent", dz, e.latent.dim()),
            ] {
                if expected != got {
                    return Err(Error::DimensionMismatch {
                        what,
                        expected,
                        got,
                    });
                }
            }
        }
        Ok(Self {
            entries,
            history_weight: 1.0,
            text_weight: 1.0,
        })
    }

    pub fn with_weights(mut self, history_weight: f64, text_weight: f64) -> Self {
        self.history_weight = history_weight;
        self.text_weight = text_weight;
        self
    }

    pub fn entries(&self) -> &[RetrievalEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.entries[0].latent.dim()
    }

    /// Index of the entry minimising
    /// `w_h * |summary - key_h| + w_e * |e - key_e|`; the text term is
    /// dropped when `text` is `None`. Ties go to the earliest entry.
    pub fn nearest(&self, history_key: &[f64], text: Option<&[f64]>) -> Result<usize> {
        let dh = self.entries[0].history_key.len();
        if history_key.len() != dh {
            return Err(Error::DimensionMismatch {
                what: "history summary",
                expected: dh,
                got: history_key.len(),
            });
        }
        if let Some(t) = text {
            let de = self.entries[0].text_key.len();
            if t.len() != de {
                return Err(Error::DimensionMismatch {
                    what: "text embedding",
                    expected: de,
                    got: t.len(),
                });
            }
        }
        let mut best = (0, f64::INFINITY);
        for (i, e) in self.entries.iter().enumerate() {
            let mut d = self.history_weight * euclid(history_key, &e.history_key);
            if let Some(t) = text {
                d += self.text_weight * euclid(t, &e.text_key);
            }
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// Nearest-neighbour stand-in for a trained latent denoiser. Returns the
/// stored clean latent closest in (history, text); the noisy latent and
/// step are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalDenoiser {
    index: RetrievalIndex,
}

impl RetrievalDenoiser {
    pub fn new(index: RetrievalIndex) -> Result<Self> {
        if index.is_empty() {
            return Err(Error::Empty("retrieval index"));
        }
        Ok(Self { index })
    }

    pub fn index(&self) -> &RetrievalIndex {
        &self.index
    }
}

impl Denoiser for RetrievalDenoiser {
    fn latent_dim(&self) -> usize {
        self.index.latent_dim()
    }

    fn predict(&self, input: &DenoiseInput<'_>) -> Result<Latent> {
        let key = history_summary(input.history);
        let i = self
            .index
            .nearest(&key, input.text.map(TextEmbedding::as_slice))?;
        Ok(self.index.entries[i].latent.clone())
    }
}
