//! Emission-agnostic HMM machinery in the log domain: forward-backward,
//! closed-form updates of the initial and transition distributions,
//! likelihood evaluation and sampling.

use std::borrow::Cow;

use rand::Rng;

use crate::emission::EmissionModel;
use crate::error::{Error, Result};
use crate::gmm::sample_log_categorical;
use crate::math::{log_probs_from_masses, logsumexp, seeded_rng};
use crate::sequence::FeatureSequence;
use crate::standardize::Standardizer;

/// One class model: initial distribution, transitions, and emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pub label: String,
    pub log_q: Vec<f64>,
    /// `S × S`, row-major; row `i` is `log p(s_t = · | s_{t−1} = i)`.
    pub log_a: Vec<f64>,
    pub emission: EmissionModel,
    /// Applied to raw features before the emission model sees them.
    pub standardizer: Option<Standardizer>,
    /// Fingerprint of the configuration that produced this model.
    pub config_fingerprint: u64,
}

impl HmmModel {
    pub fn new(label: impl Into<String>, log_q: Vec<f64>, log_a: Vec<f64>, emission: EmissionModel) -> Result<Self> {
        let model = Self {
            label: label.into(),
            log_q,
            log_a,
            emission,
            standardizer: None,
            config_fingerprint: 0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn num_states(&self) -> usize {
        self.log_q.len()
    }

    pub fn dim(&self) -> usize {
        self.emission.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.num_states();
        if s == 0 {
            return Err(Error::Config("HMM needs at least one state".into()));
        }
        if self.log_a.len() != s * s {
            return Err(Error::DimensionMismatch { expected: s * s, actual: self.log_a.len() });
        }
        if self.emission.num_states() != s {
            return Err(Error::DimensionMismatch { expected: s, actual: self.emission.num_states() });
        }
        let sums_to_one = |row: &[f64]| (row.iter().map(|v| v.exp()).sum::<f64>() - 1.0).abs() <= 1e-8;
        if !sums_to_one(&self.log_q) {
            return Err(Error::Config("initial probabilities do not sum to 1".into()));
        }
        if let Some(i) = self.log_a.chunks_exact(s).position(|row| !sums_to_one(row)) {
            return Err(Error::Config(format!("transition row {i} does not sum to 1")));
        }
        if let Some(st) = &self.standardizer {
            if st.dim() != self.dim() {
                return Err(Error::DimensionMismatch { expected: self.dim(), actual: st.dim() });
            }
        }
        Ok(())
    }

    /// Features in the emission model's coordinates, plus the per-sequence
    /// log-Jacobian of that change of coordinates.
    fn prepare<'a>(&self, seq: &'a FeatureSequence) -> Result<(Cow<'a, FeatureSequence>, f64)> {
        if seq.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: seq.dim() });
        }
        match &self.standardizer {
            Some(st) => Ok((Cow::Owned(st.apply(seq)?), seq.len() as f64 * st.log_det_per_frame())),
            None => Ok((Cow::Borrowed(seq), 0.0)),
        }
    }
}

/// Uniform initial distribution.
pub fn uniform_log_q(num_states: usize) -> Vec<f64> {
    vec![-(num_states as f64).ln(); num_states]
}

/// Upper-triangular transitions: `self_loop` on the diagonal, the rest split
/// evenly over the later states; the last state is absorbing.
pub fn upper_triangular_log_a(num_states: usize, self_loop: f64) -> Vec<f64> {
    let mut a = vec![f64::NEG_INFINITY; num_states * num_states];
    for i in 0..num_states {
        let later = num_states - i - 1;
        if later == 0 {
            a[i * num_states + i] = 0.0;
            continue;
        }
        a[i * num_states + i] = self_loop.ln();
        let rest = ((1.0 - self_loop) / later as f64).ln();
        for j in i + 1..num_states {
            a[i * num_states + j] = rest;
        }
    }
    a
}

/// `clamp(⌊mean_len / divisor⌋, 3, 5)`.
pub fn num_states_for(mean_len: f64, divisor: usize) -> usize {
    ((mean_len / divisor.max(1) as f64).floor() as usize).clamp(3, 5)
}

/// Per-frame emission log-densities for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTable {
    pub frames: usize,
    pub states: usize,
    pub components: usize,
    /// `T × S × K`: `log π_{s,k} + log p(x_t | s, k)`.
    pub per_component: Vec<f64>,
    /// `T × S`: `log p(x_t | s)`.
    pub totals: Vec<f64>,
}

impl EmissionTable {
    /// Evaluates `emission` on a sequence already in emission coordinates.
    pub fn compute(emission: &EmissionModel, seq: &FeatureSequence) -> Result<Self> {
        if seq.dim() != emission.dim() {
            return Err(Error::DimensionMismatch { expected: emission.dim(), actual: seq.dim() });
        }
        let (t_len, s_len, k_len) = (seq.len(), emission.num_states(), emission.num_components());
        let mut per_component = vec![0.0; t_len * s_len * k_len];
        let mut totals = vec![0.0; t_len * s_len];
        for (t, x) in seq.frames().enumerate() {
            for s in 0..s_len {
                let off = (t * s_len + s) * k_len;
                let total = emission.log_density_into(s, x, &mut per_component[off..off + k_len])?;
                if !total.is_finite() {
                    return Err(Error::non_finite(format!("emission log-density at frame {t}, state {s}")));
                }
                totals[t * s_len + s] = total;
            }
        }
        Ok(Self { frames: t_len, states: s_len, components: k_len, per_component, totals })
    }
}

/// Forward/backward quantities for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTables {
    pub num_states: usize,
    /// `T × S`.
    pub log_alpha: Vec<f64>,
    /// `T × S`.
    pub log_beta: Vec<f64>,
    /// `T × S` state responsibilities.
    pub gamma: Vec<f64>,
    /// `S × S` pairwise responsibilities summed over `t = 2..T`.
    pub xi_sum: Vec<f64>,
    pub log_likelihood: f64,
}

impl PosteriorTables {
    pub fn len(&self) -> usize {
        self.gamma.len() / self.num_states
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn gamma_row(&self, t: usize) -> &[f64] {
        &self.gamma[t * self.num_states..(t + 1) * self.num_states]
    }
}

fn check_inputs(log_q: &[f64], log_a: &[f64], log_b: &[f64]) -> Result<usize> {
    let s = log_q.len();
    if s == 0 || log_a.len() != s * s {
        return Err(Error::DimensionMismatch { expected: s * s, actual: log_a.len() });
    }
    if log_b.is_empty() || !log_b.len().is_multiple_of(s) {
        return Err(Error::DimensionMismatch { expected: s, actual: log_b.len() % s.max(1) });
    }
    if let Some(i) = log_b.iter().position(|v| !v.is_finite()) {
        return Err(Error::non_finite(format!("emission log-density at frame {}, state {}", i / s, i % s)));
    }
    Ok(log_b.len() / s)
}

fn forward_pass(log_q: &[f64], log_a: &[f64], log_b: &[f64], s_len: usize, t_len: usize) -> (Vec<f64>, f64) {
    let mut alpha = vec![0.0; t_len * s_len];
    for s in 0..s_len {
        alpha[s] = log_q[s] + log_b[s];
    }
    let mut scratch = vec![0.0; s_len];
    for t in 1..t_len {
        for j in 0..s_len {
            for (i, v) in scratch.iter_mut().enumerate() {
                *v = alpha[(t - 1) * s_len + i] + log_a[i * s_len + j];
            }
            alpha[t * s_len + j] = logsumexp(&scratch) + log_b[t * s_len + j];
        }
    }
    let ll = logsumexp(&alpha[(t_len - 1) * s_len..]);
    (alpha, ll)
}

/// Forward-backward on precomputed per-state emission log-densities
/// (`log_b`, `T × S`).
pub fn forward_backward_log(log_q: &[f64], log_a: &[f64], log_b: &[f64]) -> Result<PosteriorTables> {
    let t_len = check_inputs(log_q, log_a, log_b)?;
    let s_len = log_q.len();
    let (log_alpha, ll) = forward_pass(log_q, log_a, log_b, s_len, t_len);
    if !ll.is_finite() {
        return Err(Error::non_finite("sequence log-likelihood"));
    }
    let mut log_beta = vec![0.0; t_len * s_len];
    let mut scratch = vec![0.0; s_len];
    for t in (0..t_len - 1).rev() {
        for i in 0..s_len {
            for (j, v) in scratch.iter_mut().enumerate() {
                *v = log_a[i * s_len + j] + log_b[(t + 1) * s_len + j] + log_beta[(t + 1) * s_len + j];
            }
            log_beta[t * s_len + i] = logsumexp(&scratch);
        }
    }
    let mut gamma = vec![0.0; t_len * s_len];
    for t in 0..t_len {
        let row = &mut gamma[t * s_len..(t + 1) * s_len];
        for (s, g) in row.iter_mut().enumerate() {
            *g = (log_alpha[t * s_len + s] + log_beta[t * s_len + s] - ll).exp();
        }
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|g| *g /= z);
    }
    let mut xi_sum = vec![0.0; s_len * s_len];
    for t in 1..t_len {
        for i in 0..s_len {
            let a = log_alpha[(t - 1) * s_len + i] - ll;
            for j in 0..s_len {
                let la = log_a[i * s_len + j];
                if la == f64::NEG_INFINITY {
                    continue;
                }
                xi_sum[i * s_len + j] += (a + la + log_b[t * s_len + j] + log_beta[t * s_len + j]).exp();
            }
        }
    }
    Ok(PosteriorTables { num_states: s_len, log_alpha, log_beta, gamma, xi_sum, log_likelihood: ll })
}

/// Forward pass only: `log p(x̄)` from per-state emission log-densities.
pub fn forward_log_likelihood(log_q: &[f64], log_a: &[f64], log_b: &[f64]) -> Result<f64> {
    let t_len = check_inputs(log_q, log_a, log_b)?;
    let (_, ll) = forward_pass(log_q, log_a, log_b, log_q.len(), t_len);
    if !ll.is_finite() {
        return Err(Error::non_finite("sequence log-likelihood"));
    }
    Ok(ll)
}

/// Posterior tables for a raw feature sequence. The log-likelihood is in raw
/// feature coordinates (the standardizer's Jacobian is included).
pub fn forward_backward(model: &HmmModel, seq: &FeatureSequence) -> Result<PosteriorTables> {
    let (prepared, log_jac) = model.prepare(seq)?;
    let table = EmissionTable::compute(&model.emission, &prepared)?;
    let mut post = forward_backward_log(&model.log_q, &model.log_a, &table.totals)?;
    post.log_likelihood += log_jac;
    Ok(post)
}

/// `log p(x̄ | H)` by the forward recursion.
pub fn sequence_log_likelihood(model: &HmmModel, seq: &FeatureSequence) -> Result<f64> {
    let (prepared, log_jac) = model.prepare(seq)?;
    let table = EmissionTable::compute(&model.emission, &prepared)?;
    Ok(forward_log_likelihood(&model.log_q, &model.log_a, &table.totals)? + log_jac)
}

/// `γ_{t,s,k} = γ_{t,s} · π_{s,k} p(x_t|s,k) / p(x_t|s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentResponsibilities {
    pub frames: usize,
    pub states: usize,
    pub components: usize,
    pub values: Vec<f64>,
}

impl ComponentResponsibilities {
    pub fn zeros(frames: usize, states: usize, components: usize) -> Self {
        Self { frames, states, components, values: vec![0.0; frames * states * components] }
    }

    pub fn from_posteriors(post: &PosteriorTables, table: &EmissionTable) -> Self {
        let (t_len, s_len, k_len) = (table.frames, table.states, table.components);
        let mut values = vec![0.0; t_len * s_len * k_len];
        for t in 0..t_len {
            for s in 0..s_len {
                let g = post.gamma[t * s_len + s];
                let total = table.totals[t * s_len + s];
                let off = (t * s_len + s) * k_len;
                for k in 0..k_len {
                    values[off + k] = g * (table.per_component[off + k] - total).exp();
                }
            }
        }
        Self { frames: t_len, states: s_len, components: k_len, values }
    }

    #[inline]
    pub fn get(&self, t: usize, s: usize, k: usize) -> f64 {
        self.values[(t * self.states + s) * self.components + k]
    }

    /// `Σ_t γ_{t,s,k}` as an `S`-long list of `K`-vectors.
    pub fn masses(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.components]; self.states];
        for chunk in self.values.chunks_exact(self.states * self.components) {
            for (s, row) in m.iter_mut().enumerate() {
                for (k, v) in row.iter_mut().enumerate() {
                    *v += chunk[s * self.components + k];
                }
            }
        }
        m
    }
}

/// `q_s ∝ Σ_r γ_r[1, s]`.
pub fn update_initial<'a>(posteriors: impl IntoIterator<Item = &'a PosteriorTables>) -> Result<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    for p in posteriors {
        let row = p.gamma_row(0);
        let acc = acc.get_or_insert_with(|| vec![0.0; row.len()]);
        if acc.len() != row.len() {
            return Err(Error::DimensionMismatch { expected: acc.len(), actual: row.len() });
        }
        for (a, g) in acc.iter_mut().zip(row) {
            *a += g;
        }
    }
    let acc = acc.ok_or(Error::Empty("no posteriors for the initial-state update"))?;
    log_probs_from_masses(&acc).ok_or_else(|| Error::non_finite("initial-state masses"))
}

/// `A_{ij} ∝ Σ_r ξ_r[i, j]`; rows without mass keep `previous`.
pub fn update_transitions<'a>(
    posteriors: impl IntoIterator<Item = &'a PosteriorTables>,
    previous: &[f64],
) -> Result<Vec<f64>> {
    let mut acc: Option<Vec<f64>> = None;
    let mut any_transitions = false;
    for p in posteriors {
        let acc = acc.get_or_insert_with(|| vec![0.0; p.xi_sum.len()]);
        if acc.len() != p.xi_sum.len() {
            return Err(Error::DimensionMismatch { expected: acc.len(), actual: p.xi_sum.len() });
        }
        any_transitions |= p.len() >= 2;
        for (a, x) in acc.iter_mut().zip(&p.xi_sum) {
            *a += x;
        }
    }
    let acc = acc.ok_or(Error::Empty("no posteriors for the transition update"))?;
    if !any_transitions {
        return Err(Error::Empty("every sequence has a single frame; no transitions to count"));
    }
    if previous.len() != acc.len() {
        return Err(Error::DimensionMismatch { expected: acc.len(), actual: previous.len() });
    }
    let s = (acc.len() as f64).sqrt() as usize;
    let mut out = previous.to_vec();
    for i in 0..s {
        if let Some(row) = log_probs_from_masses(&acc[i * s..(i + 1) * s]) {
            out[i * s..(i + 1) * s].copy_from_slice(&row);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSequence {
    pub features: FeatureSequence,
    pub states: Vec<usize>,
    pub components: Vec<usize>,
}

/// Draws a `length`-frame sequence in raw feature coordinates.
pub fn sample_sequence(model: &HmmModel, length: usize, seed: u64) -> Result<SampledSequence> {
    sample_sequence_with(model, length, &mut seeded_rng(seed))
}

pub fn sample_sequence_with<R: Rng + ?Sized>(model: &HmmModel, length: usize, rng: &mut R) -> Result<SampledSequence> {
    if length < 1 {
        return Err(Error::Config("sample length must be at least 1".into()));
    }
    let s_len = model.num_states();
    let mut states = Vec::with_capacity(length);
    let mut components = Vec::with_capacity(length);
    let mut data = Vec::with_capacity(length * model.dim());
    let mut s = sample_log_categorical(&model.log_q, rng);
    for t in 0..length {
        if t > 0 {
            s = sample_log_categorical(&model.log_a[s * s_len..(s + 1) * s_len], rng);
        }
        let (k, mut x) = model.emission.sample(s, rng)?;
        if let Some(st) = &model.standardizer {
            st.invert_frame(&mut x);
        }
        states.push(s);
        components.push(k);
        data.extend(x);
    }
    Ok(SampledSequence { features: FeatureSequence::new(data, model.dim())?, states, components })
}
