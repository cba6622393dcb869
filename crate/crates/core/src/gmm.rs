//! Diagonal-covariance Gaussian-mixture emissions with the closed-form EM
//! update.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{logsumexp, log_probs_from_masses, LN_2PI};

pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmState {
    pub log_weights: Vec<f64>,
    /// `K × D`, row-major.
    pub means: Vec<f64>,
    /// `K × D` log diagonal variances.
    pub log_vars: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmEmission {
    pub dim: usize,
    pub num_components: usize,
    pub var_floor: f64,
    pub states: Vec<GmmState>,
}

impl GmmEmission {
    /// Uniform weights, the given means (`K` per state) and a shared diagonal
    /// variance.
    pub fn from_means(means: Vec<Vec<Vec<f64>>>, variance: &[f64], var_floor: f64) -> Result<Self> {
        let dim = variance.len();
        let num_components = means.first().map_or(0, Vec::len);
        if num_components == 0 {
            return Err(Error::Config("GMM needs at least one component".into()));
        }
        let log_var: Vec<f64> = variance.iter().map(|v| v.max(var_floor).ln()).collect();
        let states = means
            .into_iter()
            .map(|comps| {
                if comps.len() != num_components || comps.iter().any(|m| m.len() != dim) {
                    return Err(Error::Config("ragged GMM means".into()));
                }
                Ok(GmmState {
                    log_weights: vec![-(num_components as f64).ln(); num_components],
                    means: comps.concat(),
                    log_vars: log_var.repeat(num_components),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { dim, num_components, var_floor, states })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// Writes `log π_k + log N(x; μ_k, diag σ²_k)` into `per_component` and
    /// returns their log-sum-exp.
    pub fn log_density_into(&self, s: usize, x: &[f64], per_component: &mut [f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        let st = &self.states[s];
        let d = self.dim;
        for (k, out) in per_component.iter_mut().enumerate().take(self.num_components) {
            let mu = &st.means[k * d..(k + 1) * d];
            let lv = &st.log_vars[k * d..(k + 1) * d];
            let mut acc = d as f64 * LN_2PI;
            for ((xi, m), l) in x.iter().zip(mu).zip(lv) {
                let diff = xi - m;
                acc += l + diff * diff * (-l).exp();
            }
            *out = st.log_weights[k] - 0.5 * acc;
        }
        Ok(logsumexp(&per_component[..self.num_components]))
    }

    /// Draws `(component, x)` from state `s`.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> (usize, Vec<f64>) {
        let st = &self.states[s];
        let k = sample_log_categorical(&st.log_weights, rng);
        let d = self.dim;
        let x = (0..d)
            .map(|j| {
                let z: f64 = rng.sample(StandardNormal);
                st.means[k * d + j] + z * (0.5 * st.log_vars[k * d + j]).exp()
            })
            .collect();
        (k, x)
    }
}

/// `(total, per_component)` log densities for state `s`.
pub fn gmm_log_density(em: &GmmEmission, s: usize, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut per = vec![0.0; em.num_components];
    let total = em.log_density_into(s, x, &mut per)?;
    Ok((total, per))
}

pub(crate) fn sample_log_categorical<R: Rng + ?Sized>(log_p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, lp) in log_p.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return k;
        }
    }
    log_p.iter().rposition(|lp| lp.is_finite()).unwrap_or(0)
}

/// Responsibility-weighted zeroth, first and second moments per
/// `(state, component)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmStats {
    pub dim: usize,
    pub num_components: usize,
    /// `S × K`.
    pub mass: Vec<f64>,
    /// `S × K × D`.
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl GmmStats {
    pub fn new(num_states: usize, num_components: usize, dim: usize) -> Self {
        Self {
            dim,
            num_components,
            mass: vec![0.0; num_states * num_components],
            sum: vec![0.0; num_states * num_components * dim],
            sum_sq: vec![0.0; num_states * num_components * dim],
        }
    }

    pub fn accumulate(&mut self, s: usize, k: usize, weight: f64, x: &[f64]) {
        let idx = s * self.num_components + k;
        self.mass[idx] += weight;
        let off = idx * self.dim;
        for (j, &v) in x.iter().enumerate() {
            self.sum[off + j] += weight * v;
            self.sum_sq[off + j] += weight * v * v;
        }
    }

    pub fn merge(&mut self, other: &GmmStats) {
        for (a, b) in self.mass.iter_mut().zip(&other.mass) {
            *a += b;
        }
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
    }
}

/// Closed-form M-step. Weights follow the masses; zero-mass components (and
/// states) keep their previous parameters; variances are floored.
pub fn gmm_m_step(prev: &GmmEmission, stats: &GmmStats) -> GmmEmission {
    let (d, kk) = (prev.dim, prev.num_components);
    let mut next = prev.clone();
    for (s, st) in next.states.iter_mut().enumerate() {
        let masses = &stats.mass[s * kk..(s + 1) * kk];
        if let Some(lw) = log_probs_from_masses(masses) {
            st.log_weights = lw;
        }
        for (k, &mass) in masses.iter().enumerate() {
            if !(mass > 0.0) {
                continue;
            }
            let off = (s * kk + k) * d;
            for j in 0..d {
                let mean = stats.sum[off + j] / mass;
                let var = (stats.sum_sq[off + j] / mass - mean * mean).max(prev.var_floor);
                st.means[k * d + j] = mean;
                st.log_vars[k * d + j] = var.ln();
            }
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::seeded_rng;
    use rand::Rng;

    fn random_gmm(seed: u64, s: usize, k: usize, d: usize) -> GmmEmission {
        let mut rng = seeded_rng(seed);
        let states = (0..s)
            .map(|_| {
                let mut lw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0f64).ln()).collect();
                crate::math::log_normalize(&mut lw);
                GmmState {
                    log_weights: lw,
                    means: (0..k * d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                    log_vars: (0..k * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
                }
            })
            .collect();
        GmmEmission { dim: d, num_components: k, var_floor: 1e-3, states }
    }

    #[test]
    fn standard_normal_at_mode() {
        let em = GmmEmission::from_means(vec![vec![vec![0.0]]], &[1.0], 1e-3).unwrap();
        let (total, per) = gmm_log_density(&em, 0, &[0.0]).unwrap();
        assert!((total + 0.918_938_533_204_672_7).abs() < 1e-12);
        assert_eq!(per.len(), 1);
    }

    #[test]
    fn identical_components_marginalize() {
        let one = GmmEmission::from_means(vec![vec![vec![0.5, -1.0]]], &[2.0, 0.5], 1e-3).unwrap();
        let two = GmmEmission::from_means(vec![vec![vec![0.5, -1.0], vec![0.5, -1.0]]], &[2.0, 0.5], 1e-3).unwrap();
        let x = [0.1, 0.3];
        let a = gmm_log_density(&one, 0, &x).unwrap().0;
        let b = gmm_log_density(&two, 0, &x).unwrap().0;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn matches_direct_arithmetic() {
        let mut rng = seeded_rng(77);
        for seed in 0..20 {
            let d = 1 + (seed as usize % 4);
            let em = random_gmm(seed, 1, 3, d);
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let st = &em.states[0];
            let direct: f64 = (0..3)
                .map(|k| {
                    let mut p = st.log_weights[k].exp();
                    for j in 0..d {
                        let var = st.log_vars[k * d + j].exp();
                        let diff = x[j] - st.means[k * d + j];
                        p *= (-(diff * diff) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
                    }
                    p
                })
                .sum();
            let (total, per) = gmm_log_density(&em, 0, &x).unwrap();
            assert!(((total.exp() - direct) / direct).abs() < 1e-10);
            let max = per.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert!(total >= max && total <= max + 3f64.ln());
        }
    }

    #[test]
    fn single_component_m_step_gives_weighted_moments() {
        let em = GmmEmission::from_means(vec![vec![vec![0.0, 0.0]]], &[1.0, 1.0], 1e-3).unwrap();
        let xs = [[1.0, 2.0], [3.0, -1.0], [0.5, 0.0], [2.0, 4.0]];
        let ws = [0.2, 1.0, 0.5, 0.3];
        let mut stats = GmmStats::new(1, 1, 2);
        for (x, w) in xs.iter().zip(&ws) {
            stats.accumulate(0, 0, *w, x);
        }
        let next = gmm_m_step(&em, &stats);
        let total: f64 = ws.iter().sum();
        for j in 0..2 {
            let mean = xs.iter().zip(&ws).map(|(x, w)| w * x[j]).sum::<f64>() / total;
            let var = xs.iter().zip(&ws).map(|(x, w)| w * (x[j] - mean).powi(2)).sum::<f64>() / total;
            assert!((next.states[0].means[j] - mean).abs() < 1e-12);
            assert!((next.states[0].log_vars[j].exp() - var).abs() < 1e-12);
        }
        assert!((next.states[0].log_weights[0]).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_component_is_untouched() {
        let em = random_gmm(3, 1, 2, 3);
        let mut stats = GmmStats::new(1, 2, 3);
        stats.accumulate(0, 0, 1.0, &[1.0, 2.0, 3.0]);
        stats.accumulate(0, 0, 1.0, &[2.0, 2.0, 2.0]);
        let next = gmm_m_step(&em, &stats);
        assert_eq!(next.states[0].means[3..], em.states[0].means[3..]);
        assert_eq!(next.states[0].log_vars[3..], em.states[0].log_vars[3..]);
        assert_eq!(next.states[0].log_weights[1], f64::NEG_INFINITY);
    }

    #[test]
    fn variance_floor_respected() {
        let em = GmmEmission::from_means(vec![vec![vec![0.0]]], &[1.0], 1e-3).unwrap();
        let mut stats = GmmStats::new(1, 1, 1);
        for _ in 0..5 {
            stats.accumulate(0, 0, 1.0, &[0.25]);
        }
        let next = gmm_m_step(&em, &stats);
        assert!((next.states[0].log_vars[0].exp() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_seeded() {
        let em = random_gmm(5, 2, 3, 2);
        let a: Vec<_> = (0..10).map(|_| ()).scan(seeded_rng(1), |r, _| Some(em.sample(1, r))).collect();
        let b: Vec<_> = (0..10).map(|_| ()).scan(seeded_rng(1), |r, _| Some(em.sample(1, r))).collect();
        assert_eq!(a, b);
    }
}
