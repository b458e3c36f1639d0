use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Eigenvalues above this (negative) bound are clipped to zero before
/// square roots; anything lower is reported as a non-PSD input.
pub const PSD_TOLERANCE: f64 = -1e-10;

/// Mean and sample covariance (`n - 1` normalisation) of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl FeatureStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn from_samples(samples: &[Vec<f64>]) -> Result<Self> {
        let mut acc = StatsAccumulator::new(samples.first().ok_or(Error::Empty("feature samples"))?.len());
        for s in samples {
            acc.push(s)?;
        }
        acc.finish()
    }

    /// Builds stats directly from a mean and covariance.
    pub fn from_moments(mean: Vec<f64>, cov: Vec<f64>, n: usize) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch {
                what: "covariance",
                expected: d * d,
                got: cov.len(),
            });
        }
        if n == 0 {
            return Err(Error::Empty("feature stats"));
        }
        crate::error::ensure_finite("feature mean", &mean)?;
        crate::error::ensure_finite("feature covariance", &cov)?;
        Ok(Self {
            mean: DVector::from_vec(mean),
            cov: DMatrix::from_row_slice(d, d, &cov),
            n,
        })
    }
}

/// Mergeable partial sums for [`FeatureStats`]: count, sum, and sum of
/// outer products.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsAccumulator {
    n: usize,
    sum: DVector<f64>,
    outer: DMatrix<f64>,
}

impl StatsAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            sum: DVector::zeros(dim),
            outer: DMatrix::zeros(dim, dim),
        }
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.sum.len() {
            return Err(Error::DimensionMismatch {
                what: "feature sample",
                expected: self.sum.len(),
                got: x.len(),
            });
        }
        crate::error::ensure_finite("feature sample", x)?;
        let v = DVector::from_column_slice(x);
        self.outer.ger(1.0, &v, &v, 1.0);
        self.sum += v;
        self.n += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &StatsAccumulator) -> Result<()> {
        if other.sum.len() != self.sum.len() {
            return Err(Error::DimensionMismatch {
                what: "partial stats",
                expected: self.sum.len(),
                got: other.sum.len(),
            });
        }
        self.n += other.n;
        self.sum += &other.sum;
        self.outer += &other.outer;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Covariance is `(sum xx^T - n mu mu^T) / (n - 1)`, zero for `n = 1`.
    pub fn finish(&self) -> Result<FeatureStats> {
        if self.n == 0 {
            return Err(Error::Empty("feature stats"));
        }
        let n = self.n as f64;
        let mean = &self.sum / n;
        let cov = if self.n > 1 {
            let mut c = &self.outer - (&mean * mean.transpose()) * n;
            c /= n - 1.0;
            symmetrize(&c)
        } else {
            DMatrix::zeros(mean.len(), mean.len())
        };
        Ok(FeatureStats { mean, cov, n: self.n })
    }
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn clipped_eigenvalues(m: &DMatrix<f64>, what: &'static str) -> Result<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>> {
    let mut eig = symmetrize(m).symmetric_eigen();
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    for (i, l) in eig.eigenvalues.iter_mut().enumerate() {
        if !l.is_finite() {
            return Err(Error::NonFinite { what, index: i });
        }
        if *l < PSD_TOLERANCE * scale {
            return Err(Error::InvalidArgument(alloc::format!(
                "{what} is not positive semidefinite (eigenvalue {l})"
            )));
        }
        *l = l.max(0.0);
    }
    Ok(eig)
}

/// Principal square root of a symmetric PSD matrix.
pub fn sqrtm_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = clipped_eigenvalues(m, "matrix")?;
    let s = eig.eigenvalues.map(libm::sqrt);
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose())
}

/// Frechet distance between two Gaussians,
/// `|mu_g - mu_r|^2 + tr(S_g + S_r - 2 (S_g S_r)^{1/2})`.
///
/// The trace of the product square root is taken as
/// `tr((S_r^{1/2} S_g S_r^{1/2})^{1/2})`, which has the same eigenvalues
/// and stays symmetric.
pub fn fid(g: &FeatureStats, r: &FeatureStats) -> Result<f64> {
    if g.dim() != r.dim() {
        return Err(Error::DimensionMismatch {
            what: "feature stats",
            expected: r.dim(),
            got: g.dim(),
        });
    }
    let diff = &g.mean - &r.mean;
    let sr = sqrtm_psd(&r.cov)?;
    let inner = &sr * &g.cov * &sr;
    let tr_sqrt: f64 = clipped_eigenvalues(&inner, "covariance product")?
        .eigenvalues
        .iter()
        .map(|l| libm::sqrt(*l))
        .sum();
    let value = diff.norm_squared() + g.cov.trace() + r.cov.trace() - 2.0 * tr_sqrt;
    if !value.is_finite() {
        return Err(Error::NonFinite {
            what: "fid",
            index: 0,
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(mean: &[f64], diag: &[f64]) -> FeatureStats {
        let d = mean.len();
        let mut cov = alloc::vec![0.0; d * d];
        for (i, v) in diag.iter().enumerate() {
            cov[i * d + i] = *v;
        }
        FeatureStats::from_moments(mean.to_vec(), cov, 10).unwrap()
    }

    #[test]
    fn scalar_closed_form() {
        let g = stats(&[0.0], &[1.0]);
        let r = stats(&[1.0], &[4.0]);
        assert_eq!(fid(&g, &r).unwrap(), 2.0);
    }

    #[test]
    fn diagonal_separability() {
        let g = stats(&[0.0, 1.0, -2.0], &[1.0, 0.5, 3.0]);
        let r = stats(&[1.0, 1.5, 0.0], &[4.0, 2.0, 0.1]);
        let mut expected = 0.0;
        for i in 0..3 {
            let (a, b) = (g.cov[(i, i)], r.cov[(i, i)]);
            expected += (g.mean[i] - r.mean[i]).powi(2) + a + b - 2.0 * libm::sqrt(a * b);
        }
        assert!((fid(&g, &r).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn accumulator_merge_matches_single_pass() {
        let xs: Vec<Vec<f64>> = (0..20)
            .map(|i| alloc::vec![libm::sin(i as f64), libm::cos(0.3 * i as f64), i as f64 * 0.1])
            .collect();
        let whole = FeatureStats::from_samples(&xs).unwrap();
        let mut a = StatsAccumulator::new(3);
        let mut b = StatsAccumulator::new(3);
        xs[..7].iter().for_each(|x| a.push(x).unwrap());
        xs[7..].iter().for_each(|x| b.push(x).unwrap());
        a.merge(&b).unwrap();
        let merged = a.finish().unwrap();
        assert!((merged.cov - &whole.cov).abs().max() < 1e-12);
        assert!(fid(&whole, &whole).unwrap().abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(fid(&stats(&[0.0], &[1.0]), &stats(&[0.0, 0.0], &[1.0, 1.0])).is_err());
    }
}
