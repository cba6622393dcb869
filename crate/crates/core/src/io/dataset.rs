//! Turning a manifest into per-class feature sequences, with caching.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::cache::{cache_path, read_features, round_to_stored, write_features};
use super::manifest::{DatasetManifest, Split};
use crate::error::{Error, Result};
use crate::features::{extract, read_wav, AudioBuffer, FeatureConfig};
use crate::par;
use crate::sequence::FeatureSequence;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassData {
    pub label: String,
    pub train: Vec<FeatureSequence>,
    pub test: Vec<FeatureSequence>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryFailure {
    /// Zero-based manifest entry index.
    pub index: usize,
    pub audio_path: PathBuf,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutput {
    /// Sorted by label; sequences keep manifest order.
    pub classes: Vec<ClassData>,
    pub extracted: usize,
    pub cache_hits: usize,
    pub failures: Vec<EntryFailure>,
}

impl BuildOutput {
    /// Labels whose training set ended up empty.
    pub fn empty_classes(&self) -> Vec<&str> {
        self.classes.iter().filter(|c| c.train.is_empty()).map(|c| c.label.as_str()).collect()
    }

    /// Fails when any entry failed or any class has no training data.
    pub fn require_complete(&self) -> Result<()> {
        if let Some(f) = self.failures.first() {
            return Err(Error::InvalidEntry { index: f.index, message: format!("{}: {}", f.audio_path.display(), f.message) });
        }
        if let Some(label) = self.empty_classes().first() {
            return Err(Error::EmptyClass(label.to_string()));
        }
        Ok(())
    }

    pub fn train_sets(&self) -> Vec<(String, Vec<FeatureSequence>)> {
        self.classes.iter().map(|c| (c.label.clone(), c.train.clone())).collect()
    }
}

/// Extracts one feature sequence per manifest entry. With a cache directory,
/// entries already cached under the same feature configuration are read back
/// instead of extracted, and fresh extractions are written out. Extracted
/// values are rounded through `f32` either way so cold and warm runs agree.
/// Entry-level failures are collected rather than aborting the build.
pub fn build_class_datasets(manifest: &DatasetManifest, config: &FeatureConfig, cache_dir: Option<&Path>) -> Result<BuildOutput> {
    config.validate()?;
    if manifest.entries.is_empty() {
        return Err(Error::Empty("manifest"));
    }
    let fingerprint = config.fingerprint();
    let mut groups: Vec<(&Path, Vec<usize>)> = Vec::new();
    let mut group_of: BTreeMap<&Path, usize> = BTreeMap::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        let g = *group_of.entry(&e.audio_path).or_insert_with(|| {
            groups.push((&e.audio_path, Vec::new()));
            groups.len() - 1
        });
        groups[g].1.push(i);
    }

    let per_group = par::map(&groups, |_, (path, indices)| {
        let mut audio: Option<std::result::Result<AudioBuffer, String>> = None;
        indices
            .iter()
            .map(|&i| {
                let e = &manifest.entries[i];
                let cached = cache_dir.map(|d| cache_path(d, path, e.start_sample, e.end_sample, fingerprint));
                if let Some(Ok(seq)) = cached.as_ref().filter(|p| p.exists()).map(read_features) {
                    if seq.dim() == config.output_dim() {
                        return (i, Ok((seq, true)));
                    }
                }
                let audio = audio.get_or_insert_with(|| read_wav(path).map_err(|e| e.to_string()));
                let result = audio.as_ref().map_err(Clone::clone).and_then(|a| {
                    let seg = a.segment(e.start_sample, e.end_sample).map_err(|e| e.to_string())?;
                    let seq = round_to_stored(&extract(&seg, config).map_err(|e| e.to_string())?);
                    if let Some(p) = &cached {
                        write_features(p, &seq).map_err(|e| e.to_string())?;
                    }
                    Ok((seq, false))
                });
                (i, result)
            })
            .collect::<Vec<_>>()
    });

    let mut results: Vec<Option<std::result::Result<(FeatureSequence, bool), String>>> = vec![None; manifest.entries.len()];
    for (i, r) in per_group.into_iter().flatten() {
        results[i] = Some(r);
    }

    let mut classes: BTreeMap<&str, ClassData> = BTreeMap::new();
    let (mut extracted, mut cache_hits) = (0, 0);
    let mut failures = Vec::new();
    for (i, (e, r)) in manifest.entries.iter().zip(results).enumerate() {
        let class = classes.entry(&e.label).or_insert_with(|| ClassData { label: e.label.clone(), train: Vec::new(), test: Vec::new() });
        match r.expect("every entry processed") {
            Ok((seq, hit)) => {
                if hit {
                    cache_hits += 1;
                } else {
                    extracted += 1;
                }
                let seq = seq
                    .with_source(format!("{}:{}-{}", e.audio_path.display(), e.start_sample, e.end_sample))
                    .with_frame_shift(config.shift_s);
                match e.split {
                    Split::Train => class.train.push(seq),
                    Split::Test => class.test.push(seq),
                }
            }
            Err(message) => failures.push(EntryFailure { index: i, audio_path: e.audio_path.clone(), message }),
        }
    }
    Ok(BuildOutput { classes: classes.into_values().collect(), extracted, cache_hits, failures })
}
