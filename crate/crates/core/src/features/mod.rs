//! Audio frontend: framing, MFCCs with Δ/ΔΔ, and additive noise at a target
//! SNR.

mod audio;
mod delta;
mod mfcc;
mod noise;

pub use audio::{read_wav, write_wav, AudioBuffer};
pub use delta::{add_deltas, delta, DELTA_INPUT_DIM};
pub use mfcc::{dct_matrix, frame_signal, mel_filterbank, mfcc, MfccExtractor};
pub use noise::{mix_noise, snr_scale, synth_noise, NoiseKind, NoiseSource, NoiseSpec};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sequence::FeatureSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub window_s: f64,
    pub shift_s: f64,
    pub preemphasis: f64,
    pub num_filters: usize,
    pub num_ceps: usize,
    pub low_hz: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub high_hz: Option<f64>,
    pub log_floor: f64,
    /// Half-width of the delta regression window.
    pub delta_window: usize,
    pub deltas: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            window_s: 0.025,
            shift_s: 0.010,
            preemphasis: 0.97,
            num_filters: 26,
            num_ceps: 13,
            low_hz: 0.0,
            high_hz: None,
            log_floor: 1e-10,
            delta_window: 2,
            deltas: true,
        }
    }
}

impl FeatureConfig {
    pub fn window_samples(&self) -> usize {
        (self.window_s * f64::from(self.sample_rate_hz)).round() as usize
    }

    pub fn shift_samples(&self) -> usize {
        (self.shift_s * f64::from(self.sample_rate_hz)).round() as usize
    }

    /// Output dimension of [`extract`].
    pub fn output_dim(&self) -> usize {
        if self.deltas {
            self.num_ceps * 3
        } else {
            self.num_ceps
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_rate_hz == 0 {
            return Err(Error::Config("sample_rate_hz must be positive".into()));
        }
        if self.window_samples() < 1 {
            return Err(Error::Config("window must span at least one sample".into()));
        }
        if !(self.shift_s > 0.0) || self.shift_samples() < 1 {
            return Err(Error::Config("frame shift must be positive".into()));
        }
        if self.num_ceps == 0 {
            return Err(Error::Config("num_ceps must be at least 1".into()));
        }
        if self.num_filters < self.num_ceps {
            return Err(Error::Config(format!(
                "filter count {} is smaller than cepstral count {}",
                self.num_filters, self.num_ceps
            )));
        }
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        let high = self.high_hz.unwrap_or(nyquist);
        if !(self.low_hz >= 0.0 && self.low_hz < high && high <= nyquist) {
            return Err(Error::Config(format!(
                "filterbank range [{}, {high}] Hz invalid for Nyquist {nyquist} Hz",
                self.low_hz
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(Error::Config("log_floor must be positive".into()));
        }
        if self.delta_window == 0 {
            return Err(Error::Config("delta_window must be at least 1".into()));
        }
        Ok(())
    }

    /// 64-bit hash of the canonical JSON serialization.
    pub fn fingerprint(&self) -> u64 {
        let canonical = serde_json::to_vec(self).expect("feature config serializes");
        let digest = Sha256::digest(&canonical);
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }
}

/// Full pipeline: MFCCs, then Δ/ΔΔ when enabled.
pub fn extract(audio: &AudioBuffer, config: &FeatureConfig) -> Result<FeatureSequence> {
    let statics = mfcc(audio, config)?;
    if config.deltas {
        add_deltas(&statics, config.delta_window)
    } else {
        Ok(statics)
    }
}
