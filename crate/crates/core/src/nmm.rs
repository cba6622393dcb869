//! Mixture-of-flows emissions: each state is a `K`-component mixture whose
//! components are normalizing flows onto a standard-normal latent.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adam::{adam_step, global_norm, AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::flow::{FlowArchitecture, FlowGenerator};
use crate::gmm::sample_log_categorical;
use crate::hmm::ComponentResponsibilities;
use crate::math::{log_probs_from_masses, logsumexp};
use crate::par;
use crate::sequence::FeatureSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmmState {
    pub log_weights: Vec<f64>,
    pub flows: Vec<FlowGenerator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmmEmission {
    pub dim: usize,
    pub num_components: usize,
    pub states: Vec<NmmState>,
}

impl NmmEmission {
    /// Uniform weights and freshly initialized (identity) flows.
    pub fn new<R: Rng + ?Sized>(num_states: usize, num_components: usize, arch: FlowArchitecture, rng: &mut R) -> Self {
        let states = (0..num_states)
            .map(|_| NmmState {
                log_weights: vec![-(num_components as f64).ln(); num_components],
                flows: (0..num_components).map(|_| FlowGenerator::new(arch, rng)).collect(),
            })
            .collect();
        Self { dim: arch.dim, num_components, states }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn log_density_into(&self, s: usize, x: &[f64], per_component: &mut [f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: x.len() });
        }
        let st = &self.states[s];
        for ((out, flow), lw) in per_component.iter_mut().zip(&st.flows).zip(&st.log_weights) {
            *out = lw + flow.log_density(x)?;
        }
        Ok(logsumexp(&per_component[..self.num_components]))
    }

    /// Draws `k ~ π_s`, `z ~ N(0, I)` and returns `(k, g_{s,k}(z))`.
    pub fn sample<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Result<(usize, Vec<f64>)> {
        let st = &self.states[s];
        let k = sample_log_categorical(&st.log_weights, rng);
        let z: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        Ok((k, st.flows[k].forward(&z)?))
    }

    fn flows(&self) -> impl Iterator<Item = &FlowGenerator> {
        self.states.iter().flat_map(|s| s.flows.iter())
    }

    fn flows_mut(&mut self) -> impl Iterator<Item = &mut FlowGenerator> {
        self.states.iter_mut().flat_map(|s| s.flows.iter_mut())
    }
}

/// `(total, per_component)` log densities for state `s`.
pub fn nmm_log_density(em: &NmmEmission, s: usize, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut per = vec![0.0; em.num_components];
    let total = em.log_density_into(s, x, &mut per)?;
    Ok((total, per))
}

/// Gradient buffers, one flow-shaped buffer per `(state, component)` in
/// state-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct NmmGradients {
    pub flows: Vec<FlowGenerator>,
}

impl NmmGradients {
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.flows.iter().flat_map(|f| f.params())
    }

    pub fn norm(&self) -> f64 {
        global_norm(self.params())
    }

    pub fn scale(&mut self, factor: f64) {
        for f in &mut self.flows {
            for p in f.params_mut() {
                *p *= factor;
            }
        }
    }
}

/// One training sequence with its E-step responsibilities `γ_{t,s,k}`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedSequence<'a> {
    pub seq: &'a FeatureSequence,
    pub resp: &'a ComponentResponsibilities,
}

/// The flow-dependent part of the expected complete-data log-likelihood,
/// `Σ γ_{t,s,k} [log N(f_{s,k}(x_t); 0, I) + log |det ∂f_{s,k}/∂x|]`, and its
/// exact gradient with respect to every coupling-net parameter.
pub fn flow_loss_and_gradients(em: &NmmEmission, batch: &[WeightedSequence<'_>]) -> Result<(f64, NmmGradients)> {
    if batch.is_empty() {
        return Err(Error::Empty("flow batch"));
    }
    for item in batch {
        if item.seq.dim() != em.dim {
            return Err(Error::DimensionMismatch { expected: em.dim, actual: item.seq.dim() });
        }
        let r = item.resp;
        if r.frames != item.seq.len() || r.states != em.num_states() || r.components != em.num_components {
            return Err(Error::Config("responsibility table does not match sequence/model".into()));
        }
    }
    let kk = em.num_components;
    let flows: Vec<&FlowGenerator> = em.flows().collect();
    let results = par::map(&flows, |idx, flow| -> Result<(f64, FlowGenerator)> {
        let (s, k) = (idx / kk, idx % kk);
        let mut grad = flow.zeros_like();
        let mut loss = 0.0;
        for (r, item) in batch.iter().enumerate() {
            for (t, x) in item.seq.frames().enumerate() {
                let w = item.resp.get(t, s, k);
                if w == 0.0 {
                    continue;
                }
                let log_p = flow.accumulate_gradient(x, w, &mut grad).map_err(|e| {
                    Error::non_finite(format!("flow loss at batch item {r}, frame {t} (state {s}, component {k}): {e}"))
                })?;
                loss += w * log_p;
            }
        }
        if !loss.is_finite() {
            return Err(Error::non_finite(format!("flow loss for state {s}, component {k}")));
        }
        Ok((loss, grad))
    });
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(results.len());
    for r in results {
        let (loss, grad) = r?;
        total += loss;
        grads.push(grad);
    }
    Ok((total, NmmGradients { flows: grads }))
}

/// The value of [`flow_loss_and_gradients`] without the backward pass.
pub fn flow_objective(em: &NmmEmission, batch: &[WeightedSequence<'_>]) -> Result<f64> {
    let kk = em.num_components;
    let flows: Vec<&FlowGenerator> = em.flows().collect();
    let results = par::map(&flows, |idx, flow| -> Result<f64> {
        let (s, k) = (idx / kk, idx % kk);
        let mut total = 0.0;
        for item in batch {
            for (t, x) in item.seq.frames().enumerate() {
                let w = item.resp.get(t, s, k);
                if w != 0.0 {
                    total += w * flow.log_density(x)?;
                }
            }
        }
        Ok(total)
    });
    let mut total = 0.0;
    for r in results {
        total += r?;
    }
    if !total.is_finite() {
        return Err(Error::non_finite("flow objective"));
    }
    Ok(total)
}

/// Closed-form mixture-weight update, `π_{s,k} ∝ Σ γ_{t,s,k}`. States with no
/// mass keep their previous weights.
pub fn update_mixture_weights(previous: &[Vec<f64>], masses: &[Vec<f64>]) -> Vec<Vec<f64>> {
    previous
        .iter()
        .zip(masses)
        .map(|(prev, m)| log_probs_from_masses(m).unwrap_or_else(|| prev.clone()))
        .collect()
}

/// Per-flow Adam state plus the shared clipping threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptimizer {
    pub config: AdamConfig,
    pub clip_norm: Option<f64>,
    states: Vec<AdamState>,
}

impl FlowOptimizer {
    pub fn new(em: &NmmEmission, config: AdamConfig, clip_norm: Option<f64>) -> Self {
        Self {
            config,
            clip_norm,
            states: em.flows().map(|f| AdamState::new(f.num_params())).collect(),
        }
    }

    /// Clips by global norm (when enabled) and takes one ascent step.
    pub fn step(&mut self, em: &mut NmmEmission, mut grads: NmmGradients) {
        if let Some(max) = self.clip_norm {
            let norm = grads.norm();
            if norm > max {
                grads.scale(max / norm);
            }
        }
        for ((flow, grad), state) in em.flows_mut().zip(&grads.flows).zip(&mut self.states) {
            adam_step(flow.params_mut(), grad.params(), state, &self.config);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{seeded_rng, std_normal_log_density};

    fn perturbed(em: &mut NmmEmission, seed: u64, scale: f64) {
        let mut rng = seeded_rng(seed);
        for f in em.flows_mut() {
            for p in f.params_mut() {
                *p = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }

    #[test]
    fn identity_flow_single_component_is_standard_normal() {
        let arch = FlowArchitecture { dim: 3, blocks: 2, hidden: 4 };
        let em = NmmEmission::new(1, 1, arch, &mut seeded_rng(0));
        let x = [0.3, -1.2, 2.0];
        let (total, _) = nmm_log_density(&em, 0, &x).unwrap();
        assert!((total - std_normal_log_density(&x)).abs() < 1e-12);
    }

    #[test]
    fn identical_flows_marginalize_weights() {
        let arch = FlowArchitecture { dim: 2, blocks: 1, hidden: 3 };
        let mut em = NmmEmission::new(1, 1, arch, &mut seeded_rng(0));
        perturbed(&mut em, 4, 0.4);
        let flow = em.states[0].flows[0].clone();
        let two = NmmEmission {
            dim: 2,
            num_components: 2,
            states: vec![NmmState { log_weights: vec![0.3f64.ln(), 0.7f64.ln()], flows: vec![flow.clone(), flow] }],
        };
        let x = [0.4, -0.9];
        let a = nmm_log_density(&em, 0, &x).unwrap().0;
        let b = nmm_log_density(&two, 0, &x).unwrap().0;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn mixture_weight_update() {
        let prev = vec![vec![0.0], vec![0.5f64.ln(), 0.5f64.ln()], vec![0.2f64.ln(), 0.8f64.ln()]];
        let masses = vec![vec![4.2], vec![9.0, 1.0], vec![0.0, 0.0]];
        let next = update_mixture_weights(&prev, &masses);
        assert_eq!(next[0], vec![0.0]);
        assert!((next[1][0].exp() - 0.9).abs() < 1e-15 && (next[1][1].exp() - 0.1).abs() < 1e-15);
        assert_eq!(next[2], prev[2]);
        let eq = update_mixture_weights(&prev[1..2], &[vec![2.0, 2.0]]);
        assert!((eq[0][0].exp() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_responsibilities_give_zero_loss_and_gradient() {
        let arch = FlowArchitecture { dim: 2, blocks: 1, hidden: 3 };
        let mut em = NmmEmission::new(2, 2, arch, &mut seeded_rng(0));
        perturbed(&mut em, 1, 0.5);
        let seq = FeatureSequence::new(vec![0.1, 0.2, 0.3, -0.4], 2).unwrap();
        let resp = ComponentResponsibilities::zeros(2, 2, 2);
        let (loss, grads) = flow_loss_and_gradients(&em, &[WeightedSequence { seq: &seq, resp: &resp }]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.params().all(|&g| g == 0.0));
    }

    #[test]
    fn clipping_bounds_the_update_norm() {
        let arch = FlowArchitecture { dim: 2, blocks: 1, hidden: 2 };
        let mut em = NmmEmission::new(1, 1, arch, &mut seeded_rng(0));
        let mut grads = NmmGradients { flows: vec![em.states[0].flows[0].zeros_like()] };
        for g in grads.flows[0].params_mut() {
            *g = 100.0;
        }
        let mut g2 = grads.clone();
        let n = g2.norm();
        g2.scale(5.0 / n);
        assert!((g2.norm() - 5.0).abs() < 1e-9);
        let mut opt = FlowOptimizer::new(&em, AdamConfig::default(), Some(5.0));
        opt.step(&mut em, grads);
        assert!(em.states[0].flows[0].params().all(|p| p.is_finite()));
    }
}
