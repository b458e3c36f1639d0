use alloc::vec::Vec;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::{Error, Result};

/// Batch size of R-precision and MM-Dist.
pub const RETRIEVAL_BATCH: usize = 32;

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
}

fn check_pairs(motion: &[Vec<f64>], text: &[Vec<f64>]) -> Result<()> {
    if motion.len() != text.len() {
        return Err(Error::DimensionMismatch {
            what: "motion/text pair count",
            expected: motion.len(),
            got: text.len(),
        });
    }
    let d = motion.first().ok_or(Error::Empty("embedding batch"))?.len();
    for v in motion.iter().chain(text) {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                what: "embedding",
                expected: d,
                got: v.len(),
            });
        }
    }
    Ok(())
}

/// Default subset size for [`diversity`]: `min(32, n / 2)`.
pub fn default_diversity_subset(n: usize) -> usize {
    (n / 2).min(32)
}

/// Mean distance between two disjoint random subsets of size `d`. The
/// `2d` indices are drawn with `rand::seq::index::sample`; the first half
/// forms one subset, the second half the other.
pub fn diversity<R: Rng + ?Sized>(embeddings: &[Vec<f64>], d: usize, rng: &mut R) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("diversity subset size must be positive".into()));
    }
    if embeddings.len() < 2 * d {
        return Err(Error::TooShort {
            what: "diversity embeddings",
            needed: 2 * d,
            got: embeddings.len(),
        });
    }
    let idx = index::sample(rng, embeddings.len(), 2 * d).into_vec();
    let (a, b) = idx.split_at(d);
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(&i, &j)| euclid(&embeddings[i], &embeddings[j]))
        .sum();
    Ok(total / d as f64)
}

/// Fraction of text queries whose paired motion ranks among the `k`
/// nearest motions. A motion at equal distance ranks ahead when its index
/// is lower.
pub fn r_precision(motion: &[Vec<f64>], text: &[Vec<f64>], k: usize) -> Result<f64> {
    check_pairs(motion, text)?;
    let m = motion.len();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(alloc::format!("k = {k} outside 1..={m}")));
    }
    let hits = (0..m)
        .filter(|&i| {
            let own = euclid(&text[i], &motion[i]);
            let rank = (0..m)
                .filter(|&j| {
                    let d = euclid(&text[i], &motion[j]);
                    d < own || (d == own && j < i)
                })
                .count();
            rank < k
        })
        .count();
    Ok(hits as f64 / m as f64)
}

/// Mean distance between paired motion and text embeddings.
pub fn mm_dist(motion: &[Vec<f64>], text: &[Vec<f64>]) -> Result<f64> {
    check_pairs(motion, text)?;
    Ok(motion.iter().zip(text).map(|(x, h)| euclid(x, h)).sum::<f64>() / motion.len() as f64)
}

/// Batched retrieval scores.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalScores {
    /// R@1, R@2, ... averaged over batches.
    pub r_at: Vec<f64>,
    pub mm_dist: f64,
    pub batches: usize,
}

/// Shuffles the pairs and scores every full batch of `batch` pairs,
/// reporting R@1..=R@`k_max` and MM-Dist averaged over batches.
pub fn retrieval_scores<R: Rng + ?Sized>(
    motion: &[Vec<f64>],
    text: &[Vec<f64>],
    batch: usize,
    k_max: usize,
    rng: &mut R,
) -> Result<RetrievalScores> {
    check_pairs(motion, text)?;
    if batch == 0 || motion.len() < batch {
        return Err(Error::TooShort {
            what: "retrieval pairs",
            needed: batch.max(1),
            got: motion.len(),
        });
    }
    let mut order: Vec<usize> = (0..motion.len()).collect();
    order.shuffle(rng);
    let mut r_at = alloc::vec![0.0; k_max];
    let mut mm = 0.0;
    let chunks: Vec<&[usize]> = order.chunks_exact(batch).collect();
    for chunk in &chunks {
        let ms: Vec<Vec<f64>> = chunk.iter().map(|&i| motion[i].clone()).collect();
        let ts: Vec<Vec<f64>> = chunk.iter().map(|&i| text[i].clone()).collect();
        for (k, r) in r_at.iter_mut().enumerate() {
            *r += r_precision(&ms, &ts, k + 1)?;
        }
        mm += mm_dist(&ms, &ts)?;
    }
    let n = chunks.len() as f64;
    r_at.iter_mut().for_each(|r| *r /= n);
    Ok(RetrievalScores {
        r_at,
        mm_dist: mm / n,
        batches: chunks.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_extractor() {
        let e: Vec<Vec<f64>> = (0..5).map(|i| alloc::vec![i as f64, 0.0]).collect();
        assert_eq!(r_precision(&e, &e, 1).unwrap(), 1.0);
        assert_eq!(mm_dist(&e, &e).unwrap(), 0.0);
        assert_eq!(r_precision(&e, &e, 5).unwrap(), 1.0);
        assert!(r_precision(&e, &e, 6).is_err());
    }

    #[test]
    fn ties_go_to_lower_index() {
        let m = alloc::vec![alloc::vec![0.0], alloc::vec![0.0]];
        // both texts equidistant from both motions
        let t = alloc::vec![alloc::vec![1.0], alloc::vec![1.0]];
        assert_eq!(r_precision(&m, &t, 1).unwrap(), 0.5);
    }

    #[test]
    fn diversity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let same = alloc::vec![alloc::vec![1.0, 2.0]; 6];
        assert_eq!(diversity(&same, 3, &mut rng).unwrap(), 0.0);
        let two = alloc::vec![alloc::vec![0.0, 0.0], alloc::vec![3.0, 4.0]];
        assert_eq!(diversity(&two, 1, &mut rng).unwrap(), 5.0);
        assert!(diversity(&two, 2, &mut rng).is_err());
    }
}
