//! Per-class EM training.
//!
//! Each outer iteration runs an E-step under the current model `H_old`, then:
//!
//! * NMM: `inner_epochs` passes over shuffled mini-batches, each taking an
//!   Adam ascent step on the flow parameters using the `H_old`
//!   responsibilities, followed by closed-form updates of `q`, `A` and the
//!   mixture weights;
//! * GMM: the closed-form Baum-Welch update of everything.
//!
//! Training stops when the relative change of the total training
//! log-likelihood drops below `rel_tol` or after `max_outer_iters` updates.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adam::AdamConfig;
use crate::emission::{EmissionKind, EmissionModel};
use crate::error::{Error, Result};
use crate::flow::FlowArchitecture;
use crate::gmm::{gmm_m_step, GmmEmission, GmmStats, DEFAULT_VARIANCE_FLOOR};
use crate::hmm::{
    num_states_for, uniform_log_q, update_initial, update_transitions, upper_triangular_log_a,
    ComponentResponsibilities, EmissionTable, HmmModel, PosteriorTables,
};
use crate::math::{derive_seed, seeded_rng, stable_hash};
use crate::nmm::{flow_loss_and_gradients, flow_objective, update_mixture_weights, FlowOptimizer, NmmEmission, WeightedSequence};
use crate::par;
use crate::sequence::FeatureSequence;
use crate::standardize::Standardizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub emission_kind: EmissionKind,
    /// Mixture components per state; `None` picks 20 for GMM and 3 for NMM.
    pub num_components: Option<usize>,
    pub flow_blocks: usize,
    pub hidden_units: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Full passes over the training set per outer iteration (NMM only).
    pub inner_epochs: usize,
    pub max_outer_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub state_divisor: usize,
    /// Overrides the mean-length heuristic when set.
    pub num_states: Option<usize>,
    pub standardize: bool,
    pub var_floor: f64,
    pub clip_norm: Option<f64>,
    pub self_loop: f64,
    /// After each inner epoch, score the flows on the whole training set and
    /// keep the best parameters seen (including the starting point). This
    /// keeps the flow M-step from lowering its objective, so the outer
    /// log-likelihood cannot fall because of an unlucky last epoch.
    pub keep_best_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            emission_kind: EmissionKind::Nmm,
            num_components: None,
            flow_blocks: 4,
            hidden_units: 64,
            learning_rate: 1e-3,
            batch_size: 128,
            inner_epochs: 10,
            max_outer_iters: 50,
            rel_tol: 1e-4,
            seed: 0,
            state_divisor: 3,
            num_states: None,
            standardize: true,
            var_floor: DEFAULT_VARIANCE_FLOOR,
            clip_norm: Some(5.0),
            self_loop: 0.6,
            keep_best_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn components(&self) -> usize {
        self.num_components.unwrap_or(match self.emission_kind {
            EmissionKind::Gmm => 20,
            EmissionKind::Nmm => 3,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.components() < 1 {
            return bad("num_components must be at least 1");
        }
        if self.emission_kind == EmissionKind::Nmm && (self.flow_blocks < 1 || self.hidden_units < 1) {
            return bad("flow_blocks and hidden_units must be at least 1");
        }
        if self.batch_size < 1 || self.max_outer_iters < 1 || self.state_divisor < 1 {
            return bad("batch_size, max_outer_iters and state_divisor must be at least 1");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.rel_tol > 0.0) {
            return bad("rel_tol must be positive");
        }
        if !(self.var_floor > 0.0) {
            return bad("var_floor must be positive");
        }
        if !(self.self_loop > 0.0 && self.self_loop < 1.0) {
            return bad("self_loop must lie in (0, 1)");
        }
        if self.num_states == Some(0) {
            return bad("num_states must be at least 1");
        }
        Ok(())
    }

    pub fn fingerprint(&self) -> u64 {
        let digest = Sha256::digest(serde_json::to_vec(self).expect("train config serializes"));
        u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig { learning_rate: self.learning_rate, ..AdamConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    /// Total training log-likelihood under the model entering this iteration
    /// (standardized coordinates).
    pub log_likelihood: f64,
    /// Flow objective summed over each inner epoch's mini-batches.
    pub flow_losses: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub iterations: Vec<IterationLog>,
    pub converged: bool,
}

impl TrainLog {
    pub fn log_likelihoods(&self) -> Vec<f64> {
        self.iterations.iter().map(|i| i.log_likelihood).collect()
    }

    /// `iter,loglik,loss,seconds`; `loss` is the final inner epoch's value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loglik,loss,seconds\n");
        for it in &self.iterations {
            let loss = it.flow_losses.last().map(|l| l.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{},{:.3}\n", it.iteration, it.log_likelihood, loss, it.seconds));
        }
        out
    }
}

/// Wall-clock timer; reads zero where the platform has no clock
/// (`wasm32-unknown-unknown`).
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    fn start() -> Self {
        Stopwatch(
            #[cfg(not(target_arch = "wasm32"))]
            std::time::Instant::now(),
        )
    }

    fn seconds(&self) -> f64 {
        #[cfg(not(target_arch = "wasm32"))]
        return self.0.elapsed().as_secs_f64();
        #[cfg(target_arch = "wasm32")]
        return 0.0;
    }
}

struct EStep {
    posteriors: Vec<PosteriorTables>,
    responsibilities: Vec<ComponentResponsibilities>,
    total_log_likelihood: f64,
}

fn e_step(model: &HmmModel, seqs: &[FeatureSequence]) -> Result<EStep> {
    let results = par::map(seqs, |_, seq| -> Result<(PosteriorTables, ComponentResponsibilities)> {
        let table = EmissionTable::compute(&model.emission, seq)?;
        let post = crate::hmm::forward_backward_log(&model.log_q, &model.log_a, &table.totals)?;
        let resp = ComponentResponsibilities::from_posteriors(&post, &table);
        Ok((post, resp))
    });
    let mut posteriors = Vec::with_capacity(seqs.len());
    let mut responsibilities = Vec::with_capacity(seqs.len());
    let mut total = 0.0;
    for r in results {
        let (p, g) = r?;
        total += p.log_likelihood;
        posteriors.push(p);
        responsibilities.push(g);
    }
    if !total.is_finite() {
        return Err(Error::non_finite("total training log-likelihood"));
    }
    Ok(EStep { posteriors, responsibilities, total_log_likelihood: total })
}

/// Frames of each sequence's `s`-th uniform segment, for every state.
fn state_pools(seqs: &[FeatureSequence], num_states: usize) -> Vec<Vec<&[f64]>> {
    let mut pools = vec![Vec::new(); num_states];
    for seq in seqs {
        let t_len = seq.len();
        for (s, pool) in pools.iter_mut().enumerate() {
            let (lo, hi) = (s * t_len / num_states, (s + 1) * t_len / num_states);
            pool.extend((lo..hi).map(|t| seq.frame(t)));
        }
    }
    let all: Vec<&[f64]> = seqs.iter().flat_map(|s| s.frames()).collect();
    for pool in &mut pools {
        if pool.is_empty() {
            pool.clone_from(&all);
        }
    }
    pools
}

fn diagonal_variance(seqs: &[FeatureSequence]) -> Vec<f64> {
    let dim = seqs[0].dim();
    let mut n = 0.0;
    let mut sum = vec![0.0; dim];
    let mut sq = vec![0.0; dim];
    for f in seqs.iter().flat_map(|s| s.frames()) {
        n += 1.0;
        for j in 0..dim {
            sum[j] += f[j];
            sq[j] += f[j] * f[j];
        }
    }
    sum.iter().zip(&sq).map(|(s, q)| (q / n - (s / n).powi(2)).max(0.0)).collect()
}

fn initial_model(label: &str, seqs: &[FeatureSequence], num_states: usize, config: &TrainConfig, seed: u64) -> Result<HmmModel> {
    let mut rng = seeded_rng(seed);
    let k = config.components();
    let pools = state_pools(seqs, num_states);
    let centers: Vec<Vec<Vec<f64>>> = pools
        .iter()
        .map(|pool| (0..k).map(|_| pool[rng.random_range(0..pool.len())].to_vec()).collect())
        .collect();
    let emission = match config.emission_kind {
        EmissionKind::Gmm => EmissionModel::Gmm(GmmEmission::from_means(centers, &diagonal_variance(seqs), config.var_floor)?),
        EmissionKind::Nmm => {
            let arch = FlowArchitecture { dim: seqs[0].dim(), blocks: config.flow_blocks, hidden: config.hidden_units };
            let mut em = NmmEmission::new(num_states, k, arch, &mut rng);
            for (state, comps) in em.states.iter_mut().zip(&centers) {
                for (flow, c) in state.flows.iter_mut().zip(comps) {
                    flow.set_translation(c);
                }
            }
            EmissionModel::Nmm(em)
        }
    };
    let mut model = HmmModel::new(
        label,
        uniform_log_q(num_states),
        upper_triangular_log_a(num_states, config.self_loop),
        emission,
    )?;
    model.config_fingerprint = config.fingerprint();
    Ok(model)
}

fn gmm_update(model: &mut HmmModel, seqs: &[FeatureSequence], estep: &EStep) {
    let EmissionModel::Gmm(gmm) = &model.emission else { unreachable!("gmm_update on a non-GMM model") };
    let (s_len, k_len, dim) = (gmm.num_states(), gmm.num_components, gmm.dim);
    let idx: Vec<usize> = (0..seqs.len()).collect();
    let chunks: Vec<&[usize]> = idx.chunks(32).collect();
    let partial = par::map(&chunks, |_, chunk| {
        let mut stats = GmmStats::new(s_len, k_len, dim);
        for &r in chunk.iter() {
            let resp = &estep.responsibilities[r];
            for (t, x) in seqs[r].frames().enumerate() {
                for s in 0..s_len {
                    for k in 0..k_len {
                        let w = resp.get(t, s, k);
                        if w > 0.0 {
                            stats.accumulate(s, k, w, x);
                        }
                    }
                }
            }
        }
        stats
    });
    let mut stats = GmmStats::new(s_len, k_len, dim);
    for p in &partial {
        stats.merge(p);
    }
    model.emission = EmissionModel::Gmm(gmm_m_step(gmm, &stats));
}

fn summed_masses(estep: &EStep, s_len: usize, k_len: usize) -> Vec<Vec<f64>> {
    let mut total = vec![vec![0.0; k_len]; s_len];
    for resp in &estep.responsibilities {
        for (acc, m) in total.iter_mut().zip(resp.masses()) {
            for (a, v) in acc.iter_mut().zip(m) {
                *a += v;
            }
        }
    }
    total
}

fn nmm_flow_epochs(
    model: &mut HmmModel,
    seqs: &[FeatureSequence],
    estep: &EStep,
    optimizer: &mut FlowOptimizer,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let EmissionModel::Nmm(nmm) = &mut model.emission else { unreachable!("flow epochs on a non-NMM model") };
    let mut losses = Vec::with_capacity(config.inner_epochs);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let everything: Vec<WeightedSequence<'_>> =
        seqs.iter().zip(&estep.responsibilities).map(|(seq, resp)| WeightedSequence { seq, resp }).collect();
    let mut best = if config.keep_best_epoch {
        Some((flow_objective(nmm, &everything)?, nmm.states.clone()))
    } else {
        None
    };
    for epoch in 0..config.inner_epochs {
        order.shuffle(&mut seeded_rng(derive_seed(seed, epoch as u64)));
        let mut epoch_loss = 0.0;
        for batch_idx in order.chunks(config.batch_size) {
            let batch: Vec<WeightedSequence<'_>> = batch_idx
                .iter()
                .map(|&r| WeightedSequence { seq: &seqs[r], resp: &estep.responsibilities[r] })
                .collect();
            let (loss, grads) = flow_loss_and_gradients(nmm, &batch)?;
            epoch_loss += loss;
            optimizer.step(nmm, grads);
        }
        losses.push(epoch_loss);
        if let Some((best_q, best_states)) = &mut best {
            let q = flow_objective(nmm, &everything)?;
            if q > *best_q {
                *best_q = q;
                best_states.clone_from(&nmm.states);
            }
        }
    }
    if let Some((_, states)) = best {
        nmm.states = states;
    }
    Ok(losses)
}

/// Trains one class model on its own sequences.
pub fn train_class_model(label: &str, sequences: &[FeatureSequence], config: &TrainConfig) -> Result<(HmmModel, TrainLog)> {
    config.validate()?;
    let first = sequences.first().ok_or_else(|| Error::EmptyClass(label.to_string()))?;
    if let Some(bad) = sequences.iter().find(|s| s.dim() != first.dim()) {
        return Err(Error::DimensionMismatch { expected: first.dim(), actual: bad.dim() });
    }
    let standardizer = if config.standardize { Some(Standardizer::fit(sequences)?) } else { None };
    let seqs: Vec<FeatureSequence> = match &standardizer {
        Some(st) => sequences.iter().map(|s| st.apply(s)).collect::<Result<_>>()?,
        None => sequences.to_vec(),
    };
    let mean_len = seqs.iter().map(|s| s.len() as f64).sum::<f64>() / seqs.len() as f64;
    let num_states = config.num_states.unwrap_or_else(|| num_states_for(mean_len, config.state_divisor));
    let class_seed = derive_seed(config.seed, stable_hash(label.as_bytes()));

    let mut model = initial_model(label, &seqs, num_states, config, class_seed)?;
    let mut optimizer = match &model.emission {
        EmissionModel::Nmm(nmm) => Some(FlowOptimizer::new(nmm, config.adam(), config.clip_norm)),
        EmissionModel::Gmm(_) => None,
    };
    let finish = |mut m: HmmModel| {
        m.standardizer = standardizer.clone();
        m
    };

    let mut log = TrainLog::default();
    let mut checkpoint: Option<HmmModel> = None;
    let mut previous_ll: Option<f64> = None;
    for iteration in 0..=config.max_outer_iters {
        let started = Stopwatch::start();
        let estep = match e_step(&model, &seqs) {
            Ok(e) => e,
            Err(Error::NonFinite { .. }) if checkpoint.is_some() => {
                return Err(Error::Diverged {
                    iteration,
                    checkpoint: Box::new(finish(checkpoint.take().expect("checked"))),
                });
            }
            Err(e) => return Err(e),
        };
        let ll = estep.total_log_likelihood;
        let converged = previous_ll.is_some_and(|p| ((ll - p) / p.abs()).abs() < config.rel_tol);
        if converged || iteration == config.max_outer_iters {
            log.converged = converged;
            log.iterations.push(IterationLog {
                iteration,
                log_likelihood: ll,
                flow_losses: Vec::new(),
                seconds: started.seconds(),
            });
            break;
        }
        checkpoint = Some(model.clone());

        let mut flow_losses = Vec::new();
        let (s_len, k_len) = (model.num_states(), model.emission.num_components());
        match config.emission_kind {
            EmissionKind::Gmm => gmm_update(&mut model, &seqs, &estep),
            EmissionKind::Nmm => {
                let opt = optimizer.as_mut().expect("optimizer exists for NMM");
                let epoch_seed = derive_seed(class_seed, 1_000 + iteration as u64);
                flow_losses = match nmm_flow_epochs(&mut model, &seqs, &estep, opt, config, epoch_seed) {
                    Ok(l) => l,
                    Err(Error::NonFinite { .. }) => {
                        return Err(Error::Diverged {
                            iteration,
                            checkpoint: Box::new(finish(checkpoint.take().expect("set above"))),
                        })
                    }
                    Err(e) => return Err(e),
                };
                let masses = summed_masses(&estep, s_len, k_len);
                if let EmissionModel::Nmm(nmm) = &mut model.emission {
                    let prev: Vec<Vec<f64>> = nmm.states.iter().map(|s| s.log_weights.clone()).collect();
                    for (st, w) in nmm.states.iter_mut().zip(update_mixture_weights(&prev, &masses)) {
                        st.log_weights = w;
                    }
                }
            }
        }
        model.log_q = update_initial(&estep.posteriors)?;
        if estep.posteriors.iter().any(|p| p.len() >= 2) {
            model.log_a = update_transitions(&estep.posteriors, &model.log_a)?;
        }
        log.iterations.push(IterationLog {
            iteration,
            log_likelihood: ll,
            flow_losses,
            seconds: started.seconds(),
        });
        previous_ll = Some(ll);
    }
    Ok((finish(model), log))
}

pub type ClassOutcome = Result<(HmmModel, TrainLog)>;

/// Trains one model per class, in class order. Classes train independently;
/// a failure in one class is reported in its slot without affecting others.
pub fn train_all_classes(dataset: &[(String, Vec<FeatureSequence>)], config: &TrainConfig) -> Result<Vec<ClassOutcome>> {
    config.validate()?;
    if dataset.len() < 2 {
        return Err(Error::Config(format!("need at least 2 classes, got {}", dataset.len())));
    }
    if let Some((label, _)) = dataset.iter().find(|(_, seqs)| seqs.is_empty()) {
        return Err(Error::EmptyClass(label.clone()));
    }
    Ok(par::map(dataset, |_, (label, seqs)| train_class_model(label, seqs, config)))
}
