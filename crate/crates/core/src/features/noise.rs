use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};
use crate::math::{derive_seed, seeded_rng};

/// Synthetic noise families. `White` and `Pink` have the textbook spectra;
/// `BabbleLike` and `HfLike` are coarse stand-ins for multi-talker babble and
/// a high-frequency channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    White,
    Pink,
    BabbleLike,
    HfLike,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::BabbleLike, NoiseKind::HfLike];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::BabbleLike => "babble-like",
            NoiseKind::HfLike => "hf-like",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown noise kind '{s}'")))
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    Synthetic(NoiseKind),
    Recording { name: String, audio: AudioBuffer },
}

impl NoiseSource {
    pub fn name(&self) -> &str {
        match self {
            NoiseSource::Synthetic(k) => k.name(),
            NoiseSource::Recording { name, .. } => name,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub source: NoiseSource,
    pub snr_db: f64,
    pub offset_seed: u64,
}

/// Seeded noise of `length` samples with unit mean-square amplitude.
pub fn synth_noise(kind: NoiseKind, length: usize, seed: u64, sample_rate_hz: u32) -> AudioBuffer {
    assert!(length >= 1, "noise length must be at least 1");
    let samples = match kind {
        NoiseKind::White => white(length, seed),
        NoiseKind::Pink => spectrally_shaped(length, seed, |f| if f > 0.0 { f.powf(-0.5) } else { 0.0 }),
        NoiseKind::HfLike => spectrally_shaped(length, seed, |f| if f > 0.0 { (f / 0.5).powf(1.0) } else { 0.0 }),
        NoiseKind::BabbleLike => babble(length, seed, sample_rate_hz),
    };
    AudioBuffer {
        samples: normalize_power(samples),
        sample_rate_hz,
    }
}

fn white(length: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..length).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// White noise whose amplitude spectrum is multiplied by `gain(f)`, with `f`
/// in cycles per sample (`0..=0.5`).
fn spectrally_shaped(length: usize, seed: u64, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = white(length, seed).into_iter().map(|v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(length).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let folded = k.min(length - k);
        *c *= gain(folded as f64 / length as f64);
    }
    planner.plan_fft_inverse(length).process(&mut buf);
    buf.into_iter().map(|c| c.re).collect()
}

/// Several low-passed pink streams under slow syllable-rate envelopes.
fn babble(length: usize, seed: u64, sample_rate_hz: u32) -> Vec<f64> {
    let sr = f64::from(sample_rate_hz);
    let mut out = vec![0.0; length];
    for talker in 0..6u64 {
        let s = derive_seed(seed, talker);
        let stream = spectrally_shaped(length, s, |f| {
            let hz = f * sr;
            if hz > 0.0 {
                (hz / 100.0).powf(-0.5).min(1.0) / (1.0 + (hz / 3000.0).powi(4))
            } else {
                0.0
            }
        });
        let mut rng = seeded_rng(derive_seed(s, 99));
        let rate = rng.random_range(3.0..6.0);
        let phase = rng.random_range(0.0..2.0 * PI);
        for (i, (o, v)) in out.iter_mut().zip(stream).enumerate() {
            let env = 0.5 * (1.0 + (2.0 * PI * rate * i as f64 / sr + phase).sin());
            *o += env * v;
        }
    }
    out
}

fn normalize_power(mut xs: Vec<f64>) -> Vec<f64> {
    let p = xs.iter().map(|v| v * v).sum::<f64>() / xs.len() as f64;
    if p > 0.0 {
        let g = p.sqrt().recip();
        xs.iter_mut().for_each(|v| *v *= g);
    }
    xs
}

/// Noise gain `α` such that `P_clean / (α² P_noise) = 10^(snr_db / 10)`.
pub fn snr_scale(p_clean: f64, p_noise: f64, snr_db: f64) -> f64 {
    (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt()
}

/// `clean + α · noise_snippet`, with `α` chosen so the utterance-level SNR
/// equals `spec.snr_db`. Recorded noise is read from an offset drawn from
/// `spec.offset_seed`, wrapping cyclically when shorter than `clean`.
pub fn mix_noise(clean: &AudioBuffer, spec: &NoiseSpec) -> Result<AudioBuffer> {
    if !spec.snr_db.is_finite() {
        return Err(Error::Config("snr_db must be finite".into()));
    }
    let n = clean.len();
    if n == 0 {
        return Err(Error::DegeneratePower { what: "clean signal" });
    }
    let snippet: Vec<f64> = match &spec.source {
        NoiseSource::Synthetic(kind) => synth_noise(*kind, n, spec.offset_seed, clean.sample_rate_hz).samples,
        NoiseSource::Recording { audio, .. } => {
            if audio.sample_rate_hz != clean.sample_rate_hz {
                return Err(Error::Config(format!(
                    "noise sampled at {} Hz, clean audio at {} Hz",
                    audio.sample_rate_hz, clean.sample_rate_hz
                )));
            }
            if audio.is_empty() {
                return Err(Error::DegeneratePower { what: "noise" });
            }
            let m = audio.len();
            let span = if m > n { m - n + 1 } else { m };
            let offset = seeded_rng(spec.offset_seed).random_range(0..span);
            (0..n).map(|i| audio.samples[(offset + i) % m]).collect()
        }
    };
    let p_clean = clean.mean_power();
    if !(p_clean > 0.0) {
        return Err(Error::DegeneratePower { what: "clean signal" });
    }
    let p_noise = snippet.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(p_noise > 0.0) {
        return Err(Error::DegeneratePower { what: "noise" });
    }
    let alpha = snr_scale(p_clean, p_noise, spec.snr_db);
    let samples = clean.samples.iter().zip(&snippet).map(|(c, z)| c + alpha * z).collect();
    AudioBuffer::new(samples, clean.sample_rate_hz)
}
