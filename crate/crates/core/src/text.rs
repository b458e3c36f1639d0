//! Text command embeddings.

use alloc::string::String;
use alloc::vec::Vec;

use crate::kinematics::Fnv64;
use crate::{Error, Result};

/// Default embedding width of [`HashedBagOfWords`].
pub const DEFAULT_TEXT_DIM: usize = 64;

/// Unit-norm text embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding(Vec<f64>);

impl TextEmbedding {
    /// Normalizes `v` to unit length. Fails on a zero or non-finite vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        crate::error::ensure_finite("text embedding", &v)?;
        let n = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
        if n == 0.0 {
            return Err(Error::InvalidArgument("zero text embedding".into()));
        }
        Ok(Self(v.into_iter().map(|x| x / n).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Maps command text to an embedding. `None` means the text carries no
/// signal and the generator should take its unconditional branch.
pub trait TextEncoder {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Option<TextEmbedding>;
}

/// Deterministic signed feature hashing of lower-cased word tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedBagOfWords {
    pub dim: usize,
}

impl Default for HashedBagOfWords {
    fn default() -> Self {
        Self {
            dim: DEFAULT_TEXT_DIM,
        }
    }
}

/// Lower-cased alphanumeric tokens of `text`.
pub fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

impl TextEncoder for HashedBagOfWords {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Option<TextEmbedding> {
        let mut v = alloc::vec![0.0; self.dim];
        for tok in tokens(text) {
            let mut h = Fnv64::new();
            h.write(tok.as_bytes());
            let h = h.finish();
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim as u64) as usize] += sign;
        }
        TextEmbedding::new(v).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_norm_and_deterministic() {
        let enc = HashedBagOfWords::default();
        let a = enc.embed("wave left hand").unwrap();
        let n: f64 = a.as_slice().iter().map(|x| x * x).sum();
        assert!((n - 1.0).abs() < 1e-12);
        assert_eq!(a, enc.embed("Wave  LEFT hand!").unwrap());
        assert_ne!(a, enc.embed("wave right hand").unwrap());
    }

    #[test]
    fn empty_text_is_unconditional() {
        assert!(HashedBagOfWords::default().embed("  ,, ").is_none());
    }
}
