//! Maximum-likelihood classification, accuracy, noise sweeps and reports.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{extract, mix_noise, AudioBuffer, FeatureConfig, NoiseSpec};
use crate::hmm::{sequence_log_likelihood, HmmModel};
use crate::math::{derive_seed, seeded_rng};
use crate::par;
use crate::sequence::FeatureSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub features: FeatureSequence,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledAudio {
    pub audio: AudioBuffer,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub class_index: usize,
    pub label: String,
    /// One entry per model, in model order; non-finite values are kept as-is.
    pub log_likelihoods: Vec<f64>,
}

/// Picks the model with the highest sequence log-likelihood. Ties go to the
/// lowest index; models that fail to score are treated as `-inf`.
pub fn classify(models: &[HmmModel], seq: &FeatureSequence) -> Result<Classification> {
    if models.is_empty() {
        return Err(Error::Empty("model collection"));
    }
    let mut lls = Vec::with_capacity(models.len());
    for m in models {
        if m.dim() != seq.dim() {
            return Err(Error::DimensionMismatch { expected: m.dim(), actual: seq.dim() });
        }
        lls.push(sequence_log_likelihood(m, seq).unwrap_or(f64::NEG_INFINITY));
    }
    let best = argmax_first(&lls).ok_or_else(|| Error::non_finite("every class log-likelihood"))?;
    Ok(Classification { class_index: best, label: models[best].label.clone(), log_likelihoods: lls })
}

fn argmax_first(xs: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in xs.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| v > xs[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub n_total: usize,
    pub n_correct: usize,
    /// Class labels indexing `confusion`, in model order.
    pub labels: Vec<String>,
    /// `confusion[true][predicted]` counts; sequences whose label has no model
    /// are not representable and rejected up front.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            out.push_str(l);
            for c in row {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn accuracy_percent(correct: usize, total: usize) -> f64 {
    100.0 * correct as f64 / total as f64
}

pub fn evaluate(models: &[HmmModel], test: &[LabeledSequence]) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let labels: Vec<String> = models.iter().map(|m| m.label.clone()).collect();
    let truth: Vec<usize> = test
        .iter()
        .map(|t| labels.iter().position(|l| *l == t.label).ok_or_else(|| Error::UnmappedLabel(t.label.clone())))
        .collect::<Result<_>>()?;
    let predictions = par::map(test, |_, t| classify(models, &t.features).map(|c| c.class_index));
    let mut confusion = vec![vec![0; labels.len()]; labels.len()];
    let mut n_correct = 0;
    for (&y, p) in truth.iter().zip(predictions) {
        let p = p?;
        confusion[y][p] += 1;
        n_correct += usize::from(y == p);
    }
    Ok(Evaluation { accuracy: accuracy_percent(n_correct, test.len()), n_total: test.len(), n_correct, labels, confusion })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub condition: String,
    pub kind: String,
    pub snr_db: Option<f64>,
    pub accuracy: Option<f64>,
    pub drop: Option<f64>,
    pub n_total: usize,
    pub n_correct: usize,
    pub error: Option<String>,
}

impl EvalRow {
    fn from_outcome(kind: &str, snr_db: Option<f64>, outcome: Result<Evaluation>) -> Self {
        let condition = match snr_db {
            Some(snr) => format!("{kind}@{snr}dB"),
            None => kind.to_string(),
        };
        match outcome {
            Ok(e) => Self {
                condition,
                kind: kind.to_string(),
                snr_db,
                accuracy: Some(e.accuracy),
                drop: None,
                n_total: e.n_total,
                n_correct: e.n_correct,
                error: None,
            },
            Err(err) => Self {
                condition,
                kind: kind.to_string(),
                snr_db,
                accuracy: None,
                drop: None,
                n_total: 0,
                n_correct: 0,
                error: Some(err.to_string()),
            },
        }
    }

    /// `"55.6 (17.2)"`; the clean row has no parenthesized drop.
    pub fn cell(&self) -> String {
        match (self.accuracy, self.drop, self.snr_db) {
            // The drop is taken between the rounded figures so the printed
            // numbers subtract exactly.
            (Some(a), Some(d), Some(_)) => {
                let shown = (a * 10.0).round() as i64;
                let clean = ((a + d) * 10.0).round() as i64;
                format!("{:.1} ({:.1})", shown as f64 / 10.0, (clean - shown) as f64 / 10.0)
            }
            (Some(a), _, _) => format!("{a:.1}"),
            (None, _, _) => "error".to_string(),
        }
    }
}

/// One row per condition; the first row is always the clean condition.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

pub const CLEAN: &str = "clean";

impl EvalReport {
    fn from_rows(mut rows: Vec<EvalRow>) -> Self {
        let clean = rows.first().and_then(|r| r.accuracy);
        for r in &mut rows {
            r.drop = match (clean, r.accuracy) {
                (Some(c), Some(a)) => Some(c - a),
                _ => None,
            };
        }
        Self { rows }
    }

    pub fn clean(&self) -> Option<&EvalRow> {
        self.rows.first()
    }

    pub fn row(&self, kind: &str, snr_db: f64) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.kind == kind && r.snr_db == Some(snr_db))
    }

    pub fn has_errors(&self) -> bool {
        self.rows.iter().any(|r| r.error.is_some())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows = r.deserialize().collect::<std::result::Result<Vec<EvalRow>, _>>()?;
        Ok(Self { rows })
    }

    /// Aligned table: condition, accuracy with drop, correct/total.
    pub fn to_text(&self) -> String {
        let cells: Vec<[String; 3]> = self
            .rows
            .iter()
            .map(|r| {
                let counts = match &r.error {
                    Some(e) => e.clone(),
                    None => format!("{}/{}", r.n_correct, r.n_total),
                };
                [r.condition.clone(), r.cell(), counts]
            })
            .collect();
        render_table(&["condition", "accuracy", "correct"], &cells)
    }
}

fn render_table<const N: usize>(header: &[&str; N], rows: &[[String; N]]) -> String {
    let mut widths = header.map(str::len);
    for row in rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    line(&mut widths.iter().map(|&w| &"----------------------------------------------------------------"[..w.min(64)]));
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

/// Side-by-side comparison: one row per noise kind, one column pair per SNR,
/// with the clean reference accuracies on the first line.
pub fn render_comparison(reports: &[(&str, &EvalReport)]) -> String {
    let mut out = String::from("clean reference:");
    for (i, (name, rep)) in reports.iter().enumerate() {
        let cell = rep.clean().map(EvalRow::cell).unwrap_or_else(|| "-".into());
        let _ = write!(out, "{}{name}: {cell}", if i == 0 { " " } else { ", " });
    }
    out.push_str("\n\n");

    let mut kinds: Vec<String> = Vec::new();
    let mut snrs: Vec<f64> = Vec::new();
    for (_, rep) in reports {
        for r in rep.rows.iter().skip(1) {
            if !kinds.contains(&r.kind) {
                kinds.push(r.kind.clone());
            }
            if let Some(s) = r.snr_db {
                if !snrs.contains(&s) {
                    snrs.push(s);
                }
            }
        }
    }
    if kinds.is_empty() {
        return out;
    }
    let mut header = vec!["noise".to_string()];
    for s in &snrs {
        for (name, _) in reports {
            header.push(format!("{s}dB {name}"));
        }
    }
    let mut rows = Vec::new();
    for kind in &kinds {
        let mut row = vec![kind.clone()];
        for &s in &snrs {
            for (_, rep) in reports {
                row.push(rep.row(kind, s).map(EvalRow::cell).unwrap_or_else(|| "-".into()));
            }
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    for row in std::iter::once(&header).chain(&rows) {
        let parts: Vec<String> = row.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect();
        out.push_str(parts.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

fn check_specs_unique(kinds_snrs: impl Iterator<Item = (String, f64)>) -> Result<()> {
    let mut seen = BTreeSet::new();
    for (k, s) in kinds_snrs {
        if !seen.insert((k.clone(), s.to_bits())) {
            return Err(Error::Config(format!("duplicate noise condition {k}@{s}dB")));
        }
    }
    Ok(())
}

/// Clean-train/noisy-test sweep on audio. Each condition corrupts every test
/// segment with `mix_noise` (segment `i` uses noise seed
/// `derive_seed(spec.offset_seed, i)`), re-extracts features, and classifies.
/// A failing condition becomes an errored row.
pub fn noise_sweep(models: &[HmmModel], clean: &[LabeledAudio], specs: &[NoiseSpec], config: &FeatureConfig) -> Result<EvalReport> {
    check_specs_unique(specs.iter().map(|s| (s.source.name().to_string(), s.snr_db)))?;
    let featurize = |corrupt: &(dyn Fn(usize, &AudioBuffer) -> Result<AudioBuffer> + Sync)| -> Result<Evaluation> {
        let feats = par::map(clean, |i, item| -> Result<LabeledSequence> {
            let audio = corrupt(i, &item.audio)?;
            Ok(LabeledSequence { features: extract(&audio, config)?, label: item.label.clone() })
        });
        let test = feats.into_iter().collect::<Result<Vec<_>>>()?;
        evaluate(models, &test)
    };
    let mut rows = vec![EvalRow::from_outcome(CLEAN, None, featurize(&|_, a| Ok(a.clone())))];
    for spec in specs {
        let outcome = featurize(&|i, a| {
            let per_segment = NoiseSpec { offset_seed: derive_seed(spec.offset_seed, i as u64), ..spec.clone() };
            mix_noise(a, &per_segment)
        });
        rows.push(EvalRow::from_outcome(spec.source.name(), Some(spec.snr_db), outcome));
    }
    Ok(EvalReport::from_rows(rows))
}

pub const FEATURE_NOISE_KIND: &str = "gaussian";

/// Adds `α·e` to a feature sequence, where `e` is standard normal noise drawn
/// from `seed` and `α` sets the per-sequence SNR relative to the sequence's
/// mean squared feature value.
pub fn add_feature_noise(seq: &FeatureSequence, snr_db: f64, seed: u64) -> Result<FeatureSequence> {
    let p = seq.mean_power();
    if !(p > 0.0) {
        return Err(Error::DegeneratePower { what: "feature sequence" });
    }
    let alpha = (p / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = seeded_rng(seed);
    let data = seq
        .as_slice()
        .iter()
        .map(|&v| {
            let e: f64 = StandardNormal.sample(&mut rng);
            v + alpha * e
        })
        .collect();
    let mut out = FeatureSequence::new(data, seq.dim())?;
    out.frame_shift_s = seq.frame_shift_s;
    out.source_id.clone_from(&seq.source_id);
    Ok(out)
}

/// Feature-space counterpart of [`noise_sweep`] using additive Gaussian noise.
/// Sequence `i` uses the same unit-variance draw at every SNR, so conditions
/// differ only by the noise scale.
pub fn feature_noise_sweep(models: &[HmmModel], clean: &[LabeledSequence], snrs_db: &[f64], seed: u64) -> Result<EvalReport> {
    check_specs_unique(snrs_db.iter().map(|&s| (FEATURE_NOISE_KIND.to_string(), s)))?;
    let mut rows = vec![EvalRow::from_outcome(CLEAN, None, evaluate(models, clean))];
    for &snr in snrs_db {
        let noisy = par::map(clean, |i, item| -> Result<LabeledSequence> {
            Ok(LabeledSequence {
                features: add_feature_noise(&item.features, snr, derive_seed(seed, i as u64))?,
                label: item.label.clone(),
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>();
        let outcome = noisy.and_then(|t| evaluate(models, &t));
        rows.push(EvalRow::from_outcome(FEATURE_NOISE_KIND, Some(snr), outcome));
    }
    Ok(EvalReport::from_rows(rows))
}
