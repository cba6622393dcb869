//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Two things can be explored interactively: how a flow mixture and a
//! diagonal Gaussian mixture fit the same bent 2-D point cloud, and what
//! MFCCs of a tone look like as noise is mixed in.

use nmmhmm::features::{extract, mix_noise, AudioBuffer, FeatureConfig, NoiseKind, NoiseSource, NoiseSpec};
use nmmhmm::hmm::sequence_log_likelihood;
use nmmhmm::io::Warp;
use nmmhmm::math::seeded_rng;
use nmmhmm::train::{train_class_model, TrainConfig};
use nmmhmm::{EmissionKind, FeatureSequence, HmmModel};
use rand_distr::{Distribution, StandardNormal};
use wasm_bindgen::prelude::*;

/// `n` points `(x, y)` flattened: a thin Gaussian bent into a parabola.
pub fn bent_points(seed: u64, n: usize, bend: f64, thinness: f64) -> Vec<f64> {
    let warp = Warp::Swirl { strength: 0.0, bend };
    let mut rng = seeded_rng(seed);
    let mut out = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        out.extend(warp.apply(&[1.2 * a, 1.2 * b / thinness.max(1.0)]));
    }
    out
}

/// A single-state model fitted to 2-D points, evaluated on a grid.
#[wasm_bindgen]
pub struct DensityFit {
    grid: Vec<f64>,
    mean_log_likelihood: f64,
}

#[wasm_bindgen]
impl DensityFit {
    /// Row-major `res × res` log densities, `y` increasing by row.
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn mean_log_likelihood(&self) -> f64 {
        self.mean_log_likelihood
    }
}

pub struct GridSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub res: usize,
}

pub fn fit_density_native(kind: EmissionKind, components: usize, points: &[f64], iterations: usize, seed: u64, grid: &GridSpec) -> nmmhmm::Result<DensityFit> {
    let seqs: Vec<FeatureSequence> = points.chunks_exact(2).map(|p| FeatureSequence::new(p.to_vec(), 2)).collect::<nmmhmm::Result<_>>()?;
    let config = TrainConfig {
        emission_kind: kind,
        num_components: Some(components),
        num_states: Some(1),
        hidden_units: 16,
        batch_size: 64,
        learning_rate: 5e-3,
        inner_epochs: 5,
        max_outer_iters: iterations.max(1),
        rel_tol: 1e-9,
        seed,
        ..TrainConfig::default()
    };
    let (model, _) = train_class_model("demo", &seqs, &config)?;
    let mean_log_likelihood = mean_ll(&model, &seqs)?;
    let mut out = Vec::with_capacity(grid.res * grid.res);
    let step = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * (i as f64 + 0.5) / grid.res as f64;
    for r in 0..grid.res {
        for c in 0..grid.res {
            let p = FeatureSequence::new(vec![step(grid.x, c), step(grid.y, r)], 2)?;
            out.push(sequence_log_likelihood(&model, &p).unwrap_or(f64::NEG_INFINITY));
        }
    }
    Ok(DensityFit { grid: out, mean_log_likelihood })
}

fn mean_ll(model: &HmmModel, seqs: &[FeatureSequence]) -> nmmhmm::Result<f64> {
    let mut total = 0.0;
    for s in seqs {
        total += sequence_log_likelihood(model, s)?;
    }
    Ok(total / seqs.len() as f64)
}

fn js_err(e: nmmhmm::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn sample_bent_points(seed: u32, n: usize, bend: f64, thinness: f64) -> Vec<f64> {
    bent_points(u64::from(seed), n, bend, thinness)
}

/// Fits `"gmm"` or `"nmm"` with `components` components to `points`
/// (flattened pairs) and returns its log density over the box
/// `[x0, x1] × [y0, y1]`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn fit_density(kind: &str, components: usize, points: &[f64], iterations: usize, seed: u32, x0: f64, x1: f64, y0: f64, y1: f64, res: usize) -> Result<DensityFit, JsError> {
    let kind: EmissionKind = kind.parse().map_err(js_err)?;
    let grid = GridSpec { x: (x0, x1), y: (y0, y1), res };
    fit_density_native(kind, components, points, iterations, u64::from(seed), &grid).map_err(js_err)
}

/// MFCC + Δ + ΔΔ frames of a half-second tone with `noise` (`"none"` or a
/// noise kind name) mixed in at `snr_db`. Row-major, 39 values per frame.
pub fn tone_features_native(freq_hz: f64, noise: &str, snr_db: f64, seed: u64) -> nmmhmm::Result<Vec<f64>> {
    let config = FeatureConfig::default();
    let sr = config.sample_rate_hz;
    let n = sr as usize / 2;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(sr);
            0.5 * (std::f64::consts::TAU * freq_hz * t).sin() * (1.0 - (std::f64::consts::TAU * 2.0 * t).cos()) / 2.0
        })
        .collect();
    let mut audio = AudioBuffer::new(samples, sr)?;
    if noise != "none" {
        let kind: NoiseKind = noise.parse()?;
        audio = mix_noise(&audio, &NoiseSpec { source: NoiseSource::Synthetic(kind), snr_db, offset_seed: seed })?;
    }
    Ok(extract(&audio, &config)?.into_data())
}

#[wasm_bindgen]
pub fn tone_features(freq_hz: f64, noise: &str, snr_db: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    tone_features_native(freq_hz, noise, snr_db, u64::from(seed)).map_err(js_err)
}

#[wasm_bindgen]
pub fn feature_dim() -> usize {
    FeatureConfig::default().output_dim()
}
