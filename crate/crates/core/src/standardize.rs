use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::FeatureSequence;

/// Per-feature affine standardization `(x − mean) / std`, fitted on training
/// data and stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<'a>(seqs: impl IntoIterator<Item = &'a FeatureSequence>) -> Result<Self> {
        let mut dim = None;
        let mut n = 0usize;
        let mut sum = Vec::new();
        let mut sum_sq = Vec::new();
        for seq in seqs {
            let d = *dim.get_or_insert(seq.dim());
            if d != seq.dim() {
                return Err(Error::DimensionMismatch { expected: d, actual: seq.dim() });
            }
            if sum.is_empty() {
                sum = vec![0.0; d];
                sum_sq = vec![0.0; d];
            }
            for frame in seq.frames() {
                for (j, &v) in frame.iter().enumerate() {
                    sum[j] += v;
                    sum_sq[j] += v * v;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Empty("no frames to fit standardization"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / n as f64 - m * m).max(0.0);
                if var > 1e-16 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, seq: &FeatureSequence) -> Result<FeatureSequence> {
        if seq.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: seq.dim() });
        }
        let mut out = seq.clone();
        for frame in out.as_mut_slice().chunks_exact_mut(self.dim()) {
            for ((v, m), s) in frame.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }

    pub fn invert_frame(&self, frame: &mut [f64]) {
        for ((v, m), s) in frame.iter_mut().zip(&self.mean).zip(&self.std) {
            *v = *v * s + m;
        }
    }

    /// `log |det|` of the standardizing map for one frame (`−Σ ln std`).
    pub fn log_det_per_frame(&self) -> f64 {
        -self.std.iter().map(|s| s.ln()).sum::<f64>()
    }
}
