use crate::error::{Error, Result};
use crate::sequence::FeatureSequence;

/// Static cepstral dimension expected by [`add_deltas`].
pub const DELTA_INPUT_DIM: usize = 13;

/// Regression deltas over `±half_window` frames with edge replication:
/// `Δ_t = Σ_n n (c_{t+n} − c_{t−n}) / (2 Σ_n n²)`.
pub fn delta(values: &[f64], dim: usize, half_window: usize) -> Vec<f64> {
    let frames = values.len() / dim;
    let denom = 2.0 * (1..=half_window).map(|n| (n * n) as f64).sum::<f64>();
    let at = |t: isize, j: usize| {
        let t = t.clamp(0, frames as isize - 1) as usize;
        values[t * dim + j]
    };
    let mut out = vec![0.0; values.len()];
    for t in 0..frames {
        for j in 0..dim {
            let num: f64 = (1..=half_window)
                .map(|n| n as f64 * (at(t as isize + n as isize, j) - at(t as isize - n as isize, j)))
                .sum();
            out[t * dim + j] = num / denom;
        }
    }
    out
}

/// Appends Δ and ΔΔ columns: `[static | Δ | ΔΔ]`, 13 → 39.
pub fn add_deltas(feats: &FeatureSequence, half_window: usize) -> Result<FeatureSequence> {
    if feats.dim() != DELTA_INPUT_DIM {
        return Err(Error::DimensionMismatch {
            expected: DELTA_INPUT_DIM,
            actual: feats.dim(),
        });
    }
    let dim = feats.dim();
    let d1 = delta(feats.as_slice(), dim, half_window);
    let d2 = delta(&d1, dim, half_window);
    let mut out = Vec::with_capacity(feats.len() * dim * 3);
    for t in 0..feats.len() {
        out.extend_from_slice(feats.frame(t));
        out.extend_from_slice(&d1[t * dim..(t + 1) * dim]);
        out.extend_from_slice(&d2[t * dim..(t + 1) * dim]);
    }
    Ok(FeatureSequence::new(out, dim * 3)?
        .with_frame_shift(feats.frame_shift_s)
        .with_source(feats.source_id.clone()))
}
