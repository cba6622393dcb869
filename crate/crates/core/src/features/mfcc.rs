use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{AudioBuffer, FeatureConfig};
use crate::error::{Error, Result};
use crate::sequence::FeatureSequence;

/// Splits `audio` into overlapping frames, pre-emphasizing each one and
/// tapering it with a Hamming window. The frame count is
/// `floor((N - W) / S) + 1`.
pub fn frame_signal(
    audio: &AudioBuffer,
    window_s: f64,
    shift_s: f64,
    preemphasis: f64,
) -> Result<Vec<Vec<f64>>> {
    let sr = f64::from(audio.sample_rate_hz);
    let window = (window_s * sr).round() as usize;
    let shift = (shift_s * sr).round() as usize;
    if window < 1 {
        return Err(Error::Config("window must span at least one sample".into()));
    }
    if !(shift_s > 0.0) || shift < 1 {
        return Err(Error::Config("frame shift must be positive".into()));
    }
    let taper = hamming(window);
    frames_with(&audio.samples, window, shift, preemphasis, &taper)
}

fn frames_with(
    samples: &[f64],
    window: usize,
    shift: usize,
    preemphasis: f64,
    taper: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let n = samples.len();
    if n < window {
        return Err(Error::SignalTooShort { samples: n, window });
    }
    let count = (n - window) / shift + 1;
    Ok((0..count)
        .map(|i| {
            let raw = &samples[i * shift..i * shift + window];
            let mut frame = Vec::with_capacity(window);
            frame.push(raw[0] * (1.0 - preemphasis));
            frame.extend(raw.windows(2).map(|w| w[1] - preemphasis * w[0]));
            for (v, w) in frame.iter_mut().zip(taper) {
                *v *= w;
            }
            frame
        })
        .collect())
}

fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (n - 1) as f64).cos())
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the `nfft / 2 + 1` power-spectrum bins, one
/// row per filter.
pub fn mel_filterbank(num_filters: usize, nfft: usize, sample_rate: f64, low_hz: f64, high_hz: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
    let edges: Vec<f64> = (0..num_filters + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (num_filters + 1) as f64))
        .collect();
    let bins = nfft / 2 + 1;
    (0..num_filters)
        .map(|m| {
            let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate / nfft as f64;
                    if f <= left || f >= right {
                        0.0
                    } else if f <= center {
                        (f - left) / (center - left)
                    } else {
                        (right - f) / (right - center)
                    }
                })
                .collect()
        })
        .collect()
}

/// The first `rows` rows of the orthonormal `n × n` DCT-II matrix.
pub fn dct_matrix(rows: usize, n: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|i| {
            let scale = if i == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|j| scale * (PI * i as f64 * (j as f64 + 0.5) / n as f64).cos())
                .collect()
        })
        .collect()
}

/// Precomputed state for MFCC extraction at one configuration.
pub struct MfccExtractor {
    config: FeatureConfig,
    window: usize,
    shift: usize,
    nfft: usize,
    taper: Vec<f64>,
    filters: Vec<Vec<f64>>,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl MfccExtractor {
    pub fn new(config: &FeatureConfig) -> Result<Self> {
        config.validate()?;
        let window = config.window_samples();
        let nfft = window.next_power_of_two();
        let sr = f64::from(config.sample_rate_hz);
        let high = config.high_hz.unwrap_or(sr / 2.0);
        Ok(Self {
            config: config.clone(),
            window,
            shift: config.shift_samples(),
            nfft,
            taper: hamming(window),
            filters: mel_filterbank(config.num_filters, nfft, sr, config.low_hz, high),
            dct: dct_matrix(config.num_ceps, config.num_filters),
            fft: FftPlanner::new().plan_fft_forward(nfft),
        })
    }

    pub fn nfft(&self) -> usize {
        self.nfft
    }

    /// Static cepstra (`D = num_ceps`).
    pub fn compute(&self, audio: &AudioBuffer) -> Result<FeatureSequence> {
        if audio.sample_rate_hz != self.config.sample_rate_hz {
            return Err(Error::Config(format!(
                "audio sampled at {} Hz, features configured for {} Hz",
                audio.sample_rate_hz, self.config.sample_rate_hz
            )));
        }
        let frames = frames_with(&audio.samples, self.window, self.shift, self.config.preemphasis, &self.taper)?;
        let mut buf = vec![Complex::new(0.0, 0.0); self.nfft];
        let mut out = Vec::with_capacity(frames.len() * self.config.num_ceps);
        let mut log_energies = vec![0.0; self.filters.len()];
        for frame in &frames {
            for (b, v) in buf.iter_mut().zip(frame.iter().chain(std::iter::repeat(&0.0))) {
                *b = Complex::new(*v, 0.0);
            }
            self.fft.process(&mut buf);
            let power: Vec<f64> = buf[..self.nfft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
            for (e, filt) in log_energies.iter_mut().zip(&self.filters) {
                let energy: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                *e = energy.max(self.config.log_floor).ln();
            }
            out.extend(
                self.dct
                    .iter()
                    .map(|row| row.iter().zip(&log_energies).map(|(a, b)| a * b).sum::<f64>()),
            );
        }
        Ok(FeatureSequence::new(out, self.config.num_ceps)?.with_frame_shift(self.config.shift_s))
    }
}

/// MFCCs via power spectrum, mel filterbank, log and DCT-II.
pub fn mfcc(audio: &AudioBuffer, config: &FeatureConfig) -> Result<FeatureSequence> {
    MfccExtractor::new(config)?.compute(audio)
}
