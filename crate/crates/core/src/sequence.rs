use crate::error::{Error, Result};

/// A `T × D` matrix of per-frame feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    data: Vec<f64>,
    dim: usize,
    pub frame_shift_s: f64,
    pub source_id: String,
}

impl FeatureSequence {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be at least 1".into()));
        }
        if data.is_empty() {
            return Err(Error::Empty("feature sequence has no frames"));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: data.len() % dim,
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("feature sequence"));
        }
        Ok(Self {
            data,
            dim,
            frame_shift_s: 0.01,
            source_id: String::new(),
        })
    }

    pub fn from_frames(frames: &[Vec<f64>]) -> Result<Self> {
        let dim = frames.first().map(Vec::len).ok_or(Error::Empty("feature sequence has no frames"))?;
        let mut data = Vec::with_capacity(frames.len() * dim);
        for f in frames {
            if f.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: f.len(),
                });
            }
            data.extend_from_slice(f);
        }
        Self::new(data, dim)
    }

    pub fn with_source(mut self, id: impl Into<String>) -> Self {
        self.source_id = id.into();
        self
    }

    pub fn with_frame_shift(mut self, shift_s: f64) -> Self {
        self.frame_shift_s = shift_s;
        self
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Feature dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the raw values. Callers must keep them finite.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Mean squared value over every entry.
    pub fn mean_power(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_non_finite() {
        assert!(FeatureSequence::new(vec![1.0, 2.0, 3.0], 2).is_err());
        assert!(FeatureSequence::new(vec![1.0, f64::NAN], 2).is_err());
        assert!(FeatureSequence::new(vec![], 2).is_err());
        assert!(FeatureSequence::from_frames(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn frame_access() {
        let s = FeatureSequence::new((0..6).map(f64::from).collect(), 3).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.frame(1), &[3.0, 4.0, 5.0]);
        assert_eq!(s.frames().count(), 2);
    }
}
