use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::Latent;
use crate::features::{FeatureLayout, MotionFeatureFrame};
use crate::primitive::MotionPrimitive;
use crate::{Error, Result};

/// Encodes a block of future frames (given its history) to a latent and
/// back.
pub trait LatentCodec {
    fn latent_dim(&self) -> usize;
    fn t_future(&self) -> usize;
    fn layout(&self) -> FeatureLayout;
    fn encode(&self, history: &[MotionFeatureFrame], future: &[MotionFeatureFrame]) -> Result<Latent>;
    fn decode(&self, history: &[MotionFeatureFrame], z: &Latent) -> Result<Vec<MotionFeatureFrame>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcaFitOptions {
    /// Keep going when the data spans fewer than `d_z` directions; the
    /// basis is completed with null-space eigenvectors.
    pub allow_rank_deficient: bool,
    /// Eigenvalues at or below `rank_tol * lambda_max` count as zero.
    pub rank_tol: f64,
}

impl Default for PcaFitOptions {
    fn default() -> Self {
        Self {
            allow_rank_deficient: false,
            rank_tol: 1e-10,
        }
    }
}

/// Linear latent space spanned by the top principal directions of
/// flattened future blocks. History is accepted but unused.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaCodec {
    layout: FeatureLayout,
    t_future: usize,
    mean: DVector<f64>,
    /// `d_z x D`, rows are orthonormal principal directions.
    components: DMatrix<f64>,
    /// All covariance eigenvalues, descending (population normalisation).
    spectrum: Vec<f64>,
}

impl PcaCodec {
    pub fn fit(windows: &[MotionPrimitive], d_z: usize, options: PcaFitOptions) -> Result<Self> {
        let first = windows.first().ok_or(Error::Empty("codec training windows"))?;
        let t_future = first.future.len();
        let f0 = first.future.first().ok_or(Error::Empty("future block"))?;
        let layout = FeatureLayout::layout_of(f0);
        let dim = layout.dim() * t_future;
        if d_z == 0 || d_z > dim {
            return Err(Error::InvalidArgument(alloc::format!(
                "latent dimension {d_z} must be in 1..={dim}"
            )));
        }
        if windows.len() < d_z + 1 {
            return Err(Error::TooShort {
                what: "codec training windows",
                needed: d_z + 1,
                got: windows.len(),
            });
        }
        let n = windows.len();
        let mut data = DMatrix::<f64>::zeros(n, dim);
        for (i, w) in windows.iter().enumerate() {
            if w.future.len() != t_future {
                return Err(Error::DimensionMismatch {
                    what: "future block length",
                    expected: t_future,
                    got: w.future.len(),
                });
            }
            let flat = layout.flatten_all(&w.future);
            if flat.len() != dim {
                return Err(Error::DimensionMismatch {
                    what: "flattened future block",
                    expected: dim,
                    got: flat.len(),
                });
            }
            crate::error::ensure_finite("codec training window", &flat)?;
            data.row_mut(i).copy_from_slice(&flat);
        }
        let mean = data.row_mean().transpose();
        for mut row in data.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = (data.transpose() * &data) / n as f64;
        let eig = cov.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let top = spectrum[0];
        let rank = if top > 0.0 {
            spectrum.iter().filter(|&&l| l > options.rank_tol * top).count()
        } else {
            0
        };
        if rank < d_z && !options.allow_rank_deficient {
            return Err(Error::RankDeficient {
                requested: d_z,
                achievable: rank,
            });
        }
        let mut components = DMatrix::<f64>::zeros(d_z, dim);
        for (r, &i) in order.iter().take(d_z).enumerate() {
            let mut v = eig.eigenvectors.column(i).into_owned();
            let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if pivot < 0.0 {
                v.neg_mut();
            }
            components.row_mut(r).copy_from(&v.transpose());
        }
        Ok(Self {
            layout,
            t_future,
            mean,
            components,
            spectrum,
        })
    }

    /// Rebuilds a codec from stored parts; `components` is row-major
    /// `d_z x (t_future * layout.dim())`.
    pub fn from_parts(
        layout: FeatureLayout,
        t_future: usize,
        mean: Vec<f64>,
        components: Vec<f64>,
        spectrum: Vec<f64>,
    ) -> Result<Self> {
        let dim = layout.dim() * t_future;
        if mean.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "codec mean",
                expected: dim,
                got: mean.len(),
            });
        }
        if components.is_empty() || !components.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                what: "codec components",
                expected: dim,
                got: components.len(),
            });
        }
        let d_z = components.len() / dim;
        Ok(Self {
            layout,
            t_future,
            mean: DVector::from_vec(mean),
            components: DMatrix::from_row_slice(d_z, dim, &components),
            spectrum,
        })
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.as_slice()
    }

    /// Row-major copy of the principal directions.
    pub fn components_row_major(&self) -> Vec<f64> {
        self.components.transpose().as_slice().to_vec()
    }

    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    /// Sum of the discarded eigenvalues: the mean squared reconstruction
    /// error per training window.
    pub fn residual_variance(&self) -> f64 {
        self.spectrum[self.components.nrows()..].iter().sum()
    }

    fn flat_future(&self, future: &[MotionFeatureFrame]) -> Result<DVector<f64>> {
        if future.len() != self.t_future {
            return Err(Error::DimensionMismatch {
                what: "future block length",
                expected: self.t_future,
                got: future.len(),
            });
        }
        let flat = self.layout.flatten_all(future);
        if flat.len() != self.mean.len() {
            return Err(Error::DimensionMismatch {
                what: "flattened future block",
                expected: self.mean.len(),
                got: flat.len(),
            });
        }
        Ok(DVector::from_vec(flat))
    }
}

impl LatentCodec for PcaCodec {
    fn latent_dim(&self) -> usize {
        self.components.nrows()
    }

    fn t_future(&self) -> usize {
        self.t_future
    }

    fn layout(&self) -> FeatureLayout {
        self.layout
    }

    fn encode(&self, _history: &[MotionFeatureFrame], future: &[MotionFeatureFrame]) -> Result<Latent> {
        let x = self.flat_future(future)? - &self.mean;
        Ok(Latent((&self.components * x).as_slice().to_vec()))
    }

    fn decode(&self, _history: &[MotionFeatureFrame], z: &Latent) -> Result<Vec<MotionFeatureFrame>> {
        if z.dim() != self.latent_dim() {
            return Err(Error::DimensionMismatch {
                what: "latent",
                expected: self.latent_dim(),
                got: z.dim(),
            });
        }
        let x = self.components.tr_mul(&DVector::from_column_slice(z.as_slice())) + &self.mean;
        self.layout.unflatten_all(x.as_slice())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(layout: FeatureLayout, values: &[f64]) -> MotionFeatureFrame {
        layout.unflatten(values).unwrap()
    }

    fn windows_from(layout: FeatureLayout, rows: &[Vec<f64>], t_future: usize) -> Vec<MotionPrimitive> {
        let d = layout.dim();
        rows.iter()
            .map(|r| MotionPrimitive {
                history: Vec::new(),
                future: (0..t_future).map(|t| frame(layout, &r[t * d..(t + 1) * d])).collect(),
            })
            .collect()
    }

    #[test]
    fn identical_windows_decode_to_the_window() {
        let layout = FeatureLayout::new(1, 0);
        let row: Vec<f64> = (0..22).map(|i| 0.1 * i as f64).collect();
        let ws = windows_from(layout, &alloc::vec![row.clone(); 4], 2);
        assert!(matches!(
            PcaCodec::fit(&ws, 2, PcaFitOptions::default()),
            Err(Error::RankDeficient { requested: 2, achievable: 0 })
        ));
        let opts = PcaFitOptions {
            allow_rank_deficient: true,
            ..Default::default()
        };
        let codec = PcaCodec::fit(&ws, 2, opts).unwrap();
        let z0 = codec.encode(&[], &ws[0].future).unwrap();
        for w in &ws {
            assert_eq!(codec.encode(&[], &w.future).unwrap(), z0);
        }
        let back = layout.flatten_all(&codec.decode(&[], &z0).unwrap());
        for (a, b) in back.iter().zip(&row) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_few_windows_and_bad_dim() {
        let layout = FeatureLayout::new(1, 0);
        let ws = windows_from(layout, &alloc::vec![alloc::vec![0.0; 11]; 2], 1);
        assert!(matches!(
            PcaCodec::fit(&ws, 2, PcaFitOptions::default()),
            Err(Error::TooShort { needed: 3, .. })
        ));
        assert!(PcaCodec::fit(&ws, 12, PcaFitOptions::default()).is_err());
    }

    #[test]
    fn parts_round_trip() {
        let layout = FeatureLayout::new(1, 0);
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..11).map(|j| libm::sin(0.37 * ((i * 7 + 1) * (j * j + 3)) as f64)).collect())
            .collect();
        let ws = windows_from(layout, &rows, 1);
        let codec = PcaCodec::fit(&ws, 3, PcaFitOptions::default()).unwrap();
        let copy = PcaCodec::from_parts(
            layout,
            1,
            codec.mean().to_vec(),
            codec.components_row_major(),
            codec.spectrum().to_vec(),
        )
        .unwrap();
        assert_eq!(copy, codec);
    }
}
