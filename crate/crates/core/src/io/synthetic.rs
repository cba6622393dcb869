//! Seeded synthetic classification datasets sampled from known HMMs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::dataset::ClassData;
use crate::emission::{EmissionKind, EmissionModel};
use crate::error::{Error, Result};
use crate::gmm::GmmEmission;
use crate::hmm::{sample_sequence_with, upper_triangular_log_a, HmmModel};
use crate::math::{derive_seed, seeded_rng};
use crate::sequence::FeatureSequence;
use crate::train::TrainConfig;

/// Fixed map applied to every sampled latent frame before it is emitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Warp {
    None,
    /// Rotates each coordinate pair `(z_{2i}, z_{2i+1})` by an angle
    /// proportional to its radius, then bends the second coordinate by a
    /// quadratic in the first: a smooth invertible non-affine map.
    Swirl { strength: f64, bend: f64 },
}

impl Warp {
    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        match *self {
            Warp::None => z.to_vec(),
            Warp::Swirl { strength, bend } => {
                let mut x = z.to_vec();
                for pair in x.chunks_exact_mut(2) {
                    let (a, b) = (pair[0], pair[1]);
                    let theta = strength * (a * a + b * b).sqrt();
                    let (s, c) = theta.sin_cos();
                    pair[0] = c * a - s * b;
                    pair[1] = s * a + c * b + bend * pair[0] * pair[0];
                }
                x
            }
        }
    }

    /// Inverse of [`Warp::apply`].
    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            Warp::None => x.to_vec(),
            Warp::Swirl { strength, bend } => {
                let mut z = x.to_vec();
                for pair in z.chunks_exact_mut(2) {
                    let (a, b) = (pair[0], pair[1] - bend * pair[0] * pair[0]);
                    let theta = strength * (a * a + b * b).sqrt();
                    let (s, c) = theta.sin_cos();
                    pair[0] = c * a + s * b;
                    pair[1] = -s * a + c * b;
                }
                z
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub num_states: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    /// Sequence lengths are uniform on `[min_len, max_len]`.
    pub min_len: usize,
    pub max_len: usize,
    /// Standard deviation of the per-state latent means (divided by
    /// `anisotropy` along the thin dimensions).
    pub mean_spread: f64,
    /// Per-dimension latent standard deviations are uniform on
    /// `[latent_std / 2, latent_std]`.
    pub latent_std: f64,
    /// Latent dimensions after the first have their standard deviation
    /// divided by this factor, giving thin elongated state densities.
    pub anisotropy: f64,
    pub self_loop: f64,
    pub warp: Warp,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            num_classes: 3,
            dim: 4,
            num_states: 3,
            train_per_class: 200,
            test_per_class: 100,
            min_len: 9,
            max_len: 15,
            mean_spread: 2.0,
            latent_std: 1.0,
            anisotropy: 1.0,
            self_loop: 0.6,
            warp: Warp::None,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.num_classes < 1 || self.dim < 1 || self.num_states < 1 {
            return bad("num_classes, dim and num_states must be at least 1");
        }
        if self.train_per_class < 1 {
            return bad("train_per_class must be at least 1");
        }
        if self.min_len < 1 || self.min_len > self.max_len {
            return bad("lengths must satisfy 1 <= min_len <= max_len");
        }
        if !(self.mean_spread >= 0.0 && self.latent_std > 0.0 && self.anisotropy >= 1.0) {
            return bad("mean_spread must be non-negative, latent_std positive and anisotropy at least 1");
        }
        if !(self.self_loop > 0.0 && self.self_loop < 1.0) {
            return bad("self_loop must lie in (0, 1)");
        }
        if let Warp::Swirl { strength, bend } = self.warp {
            if !(strength.is_finite() && bend.is_finite()) {
                return bad("warp parameters must be finite");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// One entry per class, labelled `c0`, `c1`, ...
    pub classes: Vec<ClassData>,
    /// Latent-space generators; observed frames are `warp.apply(latent)`.
    pub generators: Vec<HmmModel>,
    pub warp: Warp,
}

impl SyntheticDataset {
    pub fn train_sets(&self) -> Vec<(String, Vec<FeatureSequence>)> {
        self.classes.iter().map(|c| (c.label.clone(), c.train.clone())).collect()
    }
}

fn generator(label: String, spec: &SyntheticSpec, rng: &mut impl Rng) -> Result<HmmModel> {
    let means: Vec<Vec<Vec<f64>>> = (0..spec.num_states)
        .map(|_| {
            let mean = (0..spec.dim).map(|j| {
                let thin = if j == 0 { 1.0 } else { spec.anisotropy };
                spec.mean_spread / thin * Distribution::<f64>::sample(&StandardNormal, rng)
            });
            vec![mean.collect()]
        })
        .collect();
    let mut em = GmmEmission::from_means(means, &vec![1.0; spec.dim], f64::MIN_POSITIVE)?;
    for st in &mut em.states {
        for (j, lv) in st.log_vars.iter_mut().enumerate() {
            let thin = if j == 0 { 1.0 } else { spec.anisotropy };
            *lv = 2.0 * (spec.latent_std * rng.random_range(0.5..=1.0) / thin).ln();
        }
    }
    let mut log_q = vec![f64::NEG_INFINITY; spec.num_states];
    log_q[0] = 0.0;
    HmmModel::new(label, log_q, upper_triangular_log_a(spec.num_states, spec.self_loop), EmissionModel::Gmm(em))
}

fn sample_set(model: &HmmModel, count: usize, spec: &SyntheticSpec, seed: u64) -> Result<Vec<FeatureSequence>> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| {
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let latent = sample_sequence_with(model, len, &mut rng)?.features;
            let frames: Vec<Vec<f64>> = latent.frames().map(|z| spec.warp.apply(z)).collect();
            FeatureSequence::from_frames(&frames)
        })
        .collect()
}

/// Draws one left-to-right generator per class (single Gaussian per state,
/// means spread `mean_spread`), then samples train and test sequences from
/// it. Identical specs give identical datasets.
pub fn generate_synthetic_dataset(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut classes = Vec::with_capacity(spec.num_classes);
    let mut generators = Vec::with_capacity(spec.num_classes);
    for c in 0..spec.num_classes {
        let class_seed = derive_seed(spec.seed, c as u64);
        let label = format!("c{c}");
        let model = generator(label.clone(), spec, &mut seeded_rng(class_seed))?;
        let train = sample_set(&model, spec.train_per_class, spec, derive_seed(class_seed, 1))?;
        let test = sample_set(&model, spec.test_per_class, spec, derive_seed(class_seed, 2))?;
        classes.push(ClassData { label, train, test });
        generators.push(model);
    }
    Ok(SyntheticDataset { classes, generators, warp: spec.warp })
}

/// Three well-separated classes without a warp.
pub fn separated_benchmark_spec() -> SyntheticSpec {
    SyntheticSpec { mean_spread: 2.0, warp: Warp::None, ..SyntheticSpec::default() }
}

/// Three overlapping classes whose thin state densities are bent by a
/// quadratic warp, so diagonal Gaussians fit them poorly.
pub fn warped_benchmark_spec() -> SyntheticSpec {
    SyntheticSpec {
        dim: 4,
        train_per_class: 300,
        test_per_class: 100,
        min_len: 3,
        max_len: 5,
        mean_spread: 1.0,
        latent_std: 2.0,
        anisotropy: 10.0,
        warp: Warp::Swirl { strength: 0.0, bend: 1.5 },
        ..SyntheticSpec::default()
    }
}

pub fn benchmark_gmm_config() -> TrainConfig {
    TrainConfig { emission_kind: EmissionKind::Gmm, num_components: Some(20), ..TrainConfig::default() }
}

/// Four flow blocks, three components; narrower nets and smaller batches
/// than the defaults keep the benchmark quick on a laptop.
pub fn benchmark_nmm_config() -> TrainConfig {
    TrainConfig {
        emission_kind: EmissionKind::Nmm,
        num_components: Some(3),
        flow_blocks: 4,
        hidden_units: 16,
        batch_size: 32,
        learning_rate: 3e-3,
        max_outer_iters: 15,
        ..TrainConfig::default()
    }
}
