//! The `nmmhmm` command-line tool.
//!
//! Precedence for every setting: command-line flag, then (for the cache
//! location) the `NMMHMM_CACHE_DIR` environment variable, then the `--config`
//! JSON file, then built-in defaults. Logs go to standard error; reports go to
//! files, or to standard output with `--stdout`.

pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nmmhmm::eval::{evaluate, feature_noise_sweep, noise_sweep, render_comparison, EvalReport, LabeledAudio, LabeledSequence};
use nmmhmm::features::{read_wav, FeatureConfig, NoiseKind, NoiseSource, NoiseSpec};
use nmmhmm::hmm::{num_states_for, sample_sequence};
use nmmhmm::io::{
    build_class_datasets, fold_labels, generate_synthetic_dataset, load_folding, load_manifest, read_model, write_features,
    write_model, BuildOutput, DatasetManifest, Split,
};
use nmmhmm::math::derive_seed;
use nmmhmm::train::{train_all_classes, train_class_model, ClassOutcome, TrainConfig};
use nmmhmm::{par, EmissionKind, Error, HmmModel, Result};
use serde_json::json;

pub use config::{BenchConfig, NoiseConfig, RunConfig};

pub const CACHE_ENV: &str = "NMMHMM_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "nmmhmm", version, about = "Train and evaluate HMM sequence classifiers with Gaussian-mixture or flow-mixture emissions")]
pub struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract (and cache) features for every manifest entry.
    Extract(ExtractArgs),
    /// Train one model per class.
    Train(TrainArgs),
    /// Classify the test split, optionally under added noise.
    Eval(EvalArgs),
    /// Synthetic end-to-end benchmark comparing both emission families.
    SynthBench(SynthBenchArgs),
    /// Draw feature sequences from a trained model.
    Sample(SampleArgs),
    /// Render saved report CSV files.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Segment manifest CSV (audio_path,start_sample,end_sample,label,split).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Label folding CSV (raw,folded).
    #[arg(long)]
    pub folding: Option<PathBuf>,
    /// Feature cache directory (overrides NMMHMM_CACHE_DIR and the config).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Validate the manifest and extract features without writing any cache file.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EmissionArg {
    Gmm,
    Nmm,
}

impl From<EmissionArg> for EmissionKind {
    fn from(e: EmissionArg) -> Self {
        match e {
            EmissionArg::Gmm => EmissionKind::Gmm,
            EmissionArg::Nmm => EmissionKind::Nmm,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long, value_enum)]
    pub emission: Option<EmissionArg>,
    /// Mixture components per state.
    #[arg(long = "K", visible_alias = "components")]
    pub components: Option<usize>,
    #[arg(long)]
    pub flow_blocks: Option<usize>,
    #[arg(long)]
    pub hidden_units: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Sequences per mini-batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Flow epochs per EM iteration.
    #[arg(long)]
    pub inner_epochs: Option<usize>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed state count instead of the mean-length heuristic.
    #[arg(long)]
    pub num_states: Option<usize>,
}

impl TrainFlags {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(e) = self.emission {
            cfg.emission_kind = e.into();
        }
        if self.components.is_some() {
            cfg.num_components = self.components;
        }
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {$(
                if let Some(v) = self.$flag {
                    cfg.$field = v;
                }
            )*};
        }
        set!(flow_blocks => flow_blocks, hidden_units => hidden_units, learning_rate => learning_rate,
             batch_size => batch_size, inner_epochs => inner_epochs, max_iters => max_outer_iters,
             rel_tol => rel_tol, seed => seed);
        if self.num_states.is_some() {
            cfg.num_states = self.num_states;
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Output directory for `models/` and `logs/`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Train only these classes (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory of `.nmmh` model files (one per class).
    #[arg(long)]
    pub models_dir: Option<PathBuf>,
    /// Synthetic noise kinds (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub noise: Vec<NoiseKind>,
    /// Recorded noise as NAME=PATH.wav (repeatable).
    #[arg(long = "noise-file", value_parser = parse_named_path)]
    pub noise_files: Vec<(String, PathBuf)>,
    /// SNR levels in dB (comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr: Vec<f64>,
    #[arg(long)]
    pub noise_seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Write the rendered report to standard output.
    #[arg(long)]
    pub stdout: bool,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SynthBenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Seed for the dataset, both trainers and the feature noise.
    #[arg(long)]
    pub seed: Option<u64>,
    /// SNR levels in dB (comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr: Vec<f64>,
    /// Use the well-separated, unwarped dataset instead of the warped one.
    #[arg(long)]
    pub separated: bool,
    #[arg(long)]
    pub stdout: bool,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long)]
    pub length: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report CSV files as NAME=PATH; several are rendered side by side.
    #[arg(required = true, value_parser = parse_named_path)]
    pub reports: Vec<(String, PathBuf)>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_named_path(s: &str) -> std::result::Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_string(), PathBuf::from(path))),
        _ => Ok((Path::new(s).file_stem().map_or_else(|| s.to_string(), |n| n.to_string_lossy().into_owned()), PathBuf::from(s))),
    }
}

/// Output streams, injectable for in-process use.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Io<'_> {
    fn log(&mut self, msg: impl AsRef<str>) {
        let _ = writeln!(self.err, "{}", msg.as_ref());
    }

    /// One JSON object per line on standard error.
    fn report_error(&mut self, value: serde_json::Value) {
        let _ = writeln!(self.err, "{value}");
    }
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run_from<I, T>(args: I, io: &mut Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(io.out, "{text}");
            } else {
                let _ = write!(io.err, "{text}");
            }
            return code;
        }
    };
    let jobs = cli.jobs.unwrap_or(0);
    let result = par::with_jobs(jobs, || {
        // The closure runs on the pool; streams are not Send, so collect output.
        let mut out = Vec::new();
        let mut err = Vec::new();
        let r = dispatch(&cli.command, &mut Io { out: &mut out, err: &mut err });
        (r, out, err)
    });
    let (r, out, err) = result;
    let _ = io.out.write_all(&out);
    let _ = io.err.write_all(&err);
    match r {
        Ok(code) => code,
        Err(e) => {
            io.report_error(json!({ "error": e.to_string() }));
            1
        }
    }
}

fn dispatch(command: &Command, io: &mut Io<'_>) -> Result<i32> {
    match command {
        Command::Extract(a) => cmd_extract(a, io),
        Command::Train(a) => cmd_train(a, io),
        Command::Eval(a) => cmd_eval(a, io),
        Command::SynthBench(a) => cmd_synth_bench(a, io),
        Command::Sample(a) => cmd_sample(a, io),
        Command::Report(a) => cmd_report(a, io),
    }
}

fn resolve_cache_dir(flag: Option<&Path>, cfg: &RunConfig) -> Option<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .or_else(|| cfg.cache_dir.clone())
}

fn load_run_config(data: &DataArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::load_or_default(data.config.as_deref())?;
    if data.manifest.is_some() {
        cfg.manifest.clone_from(&data.manifest);
    }
    if data.folding.is_some() {
        cfg.folding.clone_from(&data.folding);
    }
    cfg.cache_dir = resolve_cache_dir(data.cache_dir.as_deref(), &cfg);
    Ok(cfg)
}

fn load_dataset_manifest(cfg: &RunConfig) -> Result<DatasetManifest> {
    let path = cfg.manifest.as_ref().ok_or_else(|| Error::Config("no manifest given (--manifest or config \"manifest\")".into()))?;
    let manifest = load_manifest(path)?;
    match &cfg.folding {
        Some(f) => fold_labels(&manifest, &load_folding(f)?),
        None => Ok(manifest),
    }
}

/// Extracts features, reporting per-entry failures on standard error.
fn build_datasets(cfg: &RunConfig, cache: Option<&Path>, io: &mut Io<'_>) -> Result<Option<BuildOutput>> {
    let manifest = load_dataset_manifest(cfg)?;
    let built = build_class_datasets(&manifest, &cfg.features, cache)?;
    io.log(format!("features: {} extracted, {} from cache", built.extracted, built.cache_hits));
    for f in &built.failures {
        io.report_error(json!({ "error": "entry failed", "entry": f.index, "path": f.audio_path.display().to_string(), "message": f.message }));
    }
    for label in built.empty_classes() {
        io.report_error(json!({ "error": "class has no training sequences", "class": label }));
    }
    Ok(if built.require_complete().is_ok() { Some(built) } else { None })
}

fn cmd_extract(args: &ExtractArgs, io: &mut Io<'_>) -> Result<i32> {
    let cfg = load_run_config(&args.data)?;
    cfg.validate()?;
    let cache = if args.dry_run { None } else { cfg.cache_dir.clone() };
    if cache.is_none() && !args.dry_run {
        io.log("no cache directory configured; features are not stored");
    }
    let manifest = load_dataset_manifest(&cfg)?;
    let built = build_class_datasets(&manifest, &cfg.features, cache.as_deref())?;
    let _ = writeln!(io.out, "class\ttrain\ttest\tmean_frames\tstates");
    for c in &built.classes {
        let frames: usize = c.train.iter().map(|s| s.len()).sum();
        let mean = if c.train.is_empty() { 0.0 } else { frames as f64 / c.train.len() as f64 };
        let states = num_states_for(mean, cfg.train.state_divisor);
        let _ = writeln!(io.out, "{}\t{}\t{}\t{mean:.2}\t{states}", c.label, c.train.len(), c.test.len());
    }
    io.log(format!("features: {} extracted, {} from cache", built.extracted, built.cache_hits));
    for f in &built.failures {
        io.report_error(json!({ "error": "entry failed", "entry": f.index, "path": f.audio_path.display().to_string(), "message": f.message }));
    }
    for label in built.empty_classes() {
        io.report_error(json!({ "error": "class has no training sequences", "class": label }));
    }
    Ok(if built.require_complete().is_ok() { 0 } else { 1 })
}

/// File-name-safe label, prefixed with the class index to keep class order.
pub fn model_file_name(index: usize, label: &str) -> String {
    let safe: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' }).collect();
    format!("{index:03}_{safe}.nmmh")
}

/// Writes models and logs; returns the number of classes that failed.
fn save_outcomes(out_dir: &Path, labels: &[String], outcomes: Vec<ClassOutcome>, io: &mut Io<'_>) -> Result<usize> {
    let models_dir = out_dir.join("models");
    let logs_dir = out_dir.join("logs");
    std::fs::create_dir_all(&logs_dir).map_err(|e| Error::io(&logs_dir, e))?;
    let mut failed = 0;
    for (i, (label, outcome)) in labels.iter().zip(outcomes).enumerate() {
        let name = model_file_name(i, label);
        match outcome {
            Ok((model, log)) => {
                write_model(models_dir.join(&name), &model)?;
                let log_path = logs_dir.join(name.replace(".nmmh", ".csv"));
                std::fs::write(&log_path, log.to_csv()).map_err(|e| Error::io(&log_path, e))?;
                io.log(format!(
                    "{label}: {} iterations, final log-likelihood {:.3}{}",
                    log.iterations.len(),
                    log.iterations.last().map_or(f64::NAN, |i| i.log_likelihood),
                    if log.converged { " (converged)" } else { "" }
                ));
            }
            Err(Error::Diverged { iteration, checkpoint }) => {
                failed += 1;
                let path = out_dir.join("checkpoints").join(&name);
                write_model(&path, &checkpoint)?;
                io.report_error(json!({ "error": "training diverged", "class": label, "iteration": iteration, "checkpoint": path.display().to_string() }));
            }
            Err(e) => {
                failed += 1;
                io.report_error(json!({ "error": "training failed", "class": label, "message": e.to_string() }));
            }
        }
    }
    Ok(failed)
}

fn train_sets(sets: &[(String, Vec<nmmhmm::FeatureSequence>)], cfg: &TrainConfig) -> Result<Vec<ClassOutcome>> {
    if sets.len() >= 2 {
        train_all_classes(sets, cfg)
    } else {
        Ok(sets.iter().map(|(l, s)| train_class_model(l, s, cfg)).collect())
    }
}

fn cmd_train(args: &TrainArgs, io: &mut Io<'_>) -> Result<i32> {
    let mut cfg = load_run_config(&args.data)?;
    args.train.apply(&mut cfg.train);
    if args.out_dir.is_some() {
        cfg.out_dir.clone_from(&args.out_dir);
    }
    cfg.validate()?;
    let out_dir = cfg.out_dir.clone().ok_or_else(|| Error::Config("no output directory (--out-dir or config \"out_dir\")".into()))?;
    let Some(built) = build_datasets(&cfg, cfg.cache_dir.as_deref(), io)? else {
        return Ok(1);
    };
    let mut sets = built.train_sets();
    if !args.classes.is_empty() {
        if let Some(missing) = args.classes.iter().find(|c| !sets.iter().any(|(l, _)| l == *c)) {
            return Err(Error::UnmappedLabel(missing.clone()));
        }
        sets.retain(|(l, _)| args.classes.contains(l));
    }
    io.log(format!("training {} {} class model(s)", sets.len(), cfg.train.emission_kind));
    let outcomes = train_sets(&sets, &cfg.train)?;
    let labels: Vec<String> = sets.iter().map(|(l, _)| l.clone()).collect();
    let failed = save_outcomes(&out_dir, &labels, outcomes, io)?;
    Ok(i32::from(failed > 0))
}

/// Models in file-name order from a directory of `.nmmh` files.
pub fn load_models(dir: &Path) -> Result<Vec<HmmModel>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "nmmh"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .nmmh model files in {}", dir.display())));
    }
    paths.iter().map(read_model).collect()
}

fn emit_report(text: String, csv: String, out_dir: Option<&Path>, stem: &str, stdout: bool, format: Format, io: &mut Io<'_>) -> Result<()> {
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (ext, body) in [("txt", &text), ("csv", &csv)] {
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
    }
    if stdout || out_dir.is_none() {
        let _ = io.out.write_all(match format {
            Format::Text => text.as_bytes(),
            Format::Csv => csv.as_bytes(),
        });
    }
    Ok(())
}

fn test_audio(manifest: &DatasetManifest, features: &FeatureConfig, io: &mut Io<'_>) -> Result<Option<Vec<LabeledAudio>>> {
    let mut loaded: std::collections::BTreeMap<&Path, Result<nmmhmm::features::AudioBuffer>> = Default::default();
    let mut out = Vec::new();
    let mut failed = false;
    for (i, e) in manifest.entries.iter().enumerate().filter(|(_, e)| e.split == Split::Test) {
        let audio = loaded.entry(&e.audio_path).or_insert_with(|| read_wav(&e.audio_path));
        let seg = audio.as_ref().map_err(|err| err.to_string()).and_then(|a| {
            if a.sample_rate_hz != features.sample_rate_hz {
                return Err(format!("sampled at {} Hz, features expect {} Hz", a.sample_rate_hz, features.sample_rate_hz));
            }
            a.segment(e.start_sample, e.end_sample).map_err(|err| err.to_string())
        });
        match seg {
            Ok(audio) => out.push(LabeledAudio { audio, label: e.label.clone() }),
            Err(message) => {
                failed = true;
                io.report_error(json!({ "error": "entry failed", "entry": i, "path": e.audio_path.display().to_string(), "message": message }));
            }
        }
    }
    Ok(if failed { None } else { Some(out) })
}

fn cmd_eval(args: &EvalArgs, io: &mut Io<'_>) -> Result<i32> {
    let mut cfg = load_run_config(&args.data)?;
    if args.models_dir.is_some() {
        cfg.models_dir.clone_from(&args.models_dir);
    }
    if args.out_dir.is_some() {
        cfg.out_dir.clone_from(&args.out_dir);
    }
    if !args.noise.is_empty() || !args.noise_files.is_empty() {
        cfg.noise.kinds.clone_from(&args.noise);
        cfg.noise.recordings = args.noise_files.iter().cloned().collect();
    }
    if !args.snr.is_empty() {
        cfg.noise.snrs_db.clone_from(&args.snr);
    }
    if let Some(s) = args.noise_seed {
        cfg.noise.seed = s;
    }
    cfg.validate()?;
    let models_dir = cfg
        .models_dir
        .clone()
        .or_else(|| cfg.out_dir.as_ref().map(|d| d.join("models")))
        .ok_or_else(|| Error::Config("no models directory (--models-dir or config \"models_dir\")".into()))?;
    let models = load_models(&models_dir)?;
    io.log(format!("loaded {} models from {}", models.len(), models_dir.display()));
    let manifest = load_dataset_manifest(&cfg)?;
    let Some(clean) = test_audio(&manifest, &cfg.features, io)? else {
        return Ok(1);
    };
    if clean.is_empty() {
        return Err(Error::Empty("test split"));
    }

    let mut specs = Vec::new();
    let mut sources: Vec<NoiseSource> = cfg.noise.kinds.iter().map(|k| NoiseSource::Synthetic(*k)).collect();
    for (name, path) in &cfg.noise.recordings {
        sources.push(NoiseSource::Recording { name: name.clone(), audio: read_wav(path)? });
    }
    for (ci, source) in sources.iter().enumerate() {
        for (si, &snr_db) in cfg.noise.snrs_db.iter().enumerate() {
            let offset_seed = derive_seed(derive_seed(cfg.noise.seed, ci as u64), si as u64);
            specs.push(NoiseSpec { source: source.clone(), snr_db, offset_seed });
        }
    }
    let report = noise_sweep(&models, &clean, &specs, &cfg.features)?;
    for r in report.rows.iter().filter(|r| r.error.is_some()) {
        io.report_error(json!({ "error": "condition failed", "condition": r.condition, "message": r.error }));
    }
    let out_dir = cfg.out_dir.clone();
    emit_report(report.to_text(), report.to_csv()?, out_dir.as_deref(), "report", args.stdout, args.format, io)?;
    Ok(i32::from(report.has_errors()))
}

fn labeled(classes: &[nmmhmm::io::ClassData], split: Split) -> Vec<LabeledSequence> {
    classes
        .iter()
        .flat_map(|c| {
            let seqs = match split {
                Split::Train => &c.train,
                Split::Test => &c.test,
            };
            seqs.iter().map(|s| LabeledSequence { features: s.clone(), label: c.label.clone() })
        })
        .collect()
}

/// Result of a synthetic benchmark run.
pub struct BenchOutcome {
    pub gmm: EvalReport,
    pub nmm: EvalReport,
    pub comparison: String,
}

/// Generates the dataset, trains both families, and sweeps feature noise.
/// Writes `gmm/models`, `nmm/models`, the per-family reports and
/// `comparison.txt` under `out_dir` when given.
pub fn run_synth_bench(bench: &BenchConfig, out_dir: Option<&Path>, io: &mut Io<'_>) -> Result<BenchOutcome> {
    let data = generate_synthetic_dataset(&bench.dataset)?;
    let test = labeled(&data.classes, Split::Test);
    let sets = data.train_sets();
    let labels: Vec<String> = sets.iter().map(|(l, _)| l.clone()).collect();
    let mut reports = Vec::new();
    for (name, cfg) in [("gmm", &bench.gmm), ("nmm", &bench.nmm)] {
        let started = std::time::Instant::now();
        let outcomes = train_sets(&sets, cfg)?;
        let mut models = Vec::new();
        let mut first_error = None;
        for (label, o) in labels.iter().zip(&outcomes) {
            match o {
                Ok((m, _)) => models.push(m.clone()),
                Err(e) => {
                    first_error.get_or_insert_with(|| Error::Config(format!("{name} training failed for {label}: {e}")));
                }
            }
        }
        if let Some(dir) = out_dir {
            save_outcomes(&dir.join(name), &labels, outcomes, io)?;
        }
        if let Some(e) = first_error {
            return Err(e);
        }
        io.log(format!("{name}: trained {} models in {:.1} s", models.len(), started.elapsed().as_secs_f64()));
        let report = feature_noise_sweep(&models, &test, &bench.snrs_db, bench.noise_seed)?;
        if let Some(dir) = out_dir {
            emit_report(report.to_text(), report.to_csv()?, Some(dir), &format!("{name}_report"), false, Format::Text, io)?;
        }
        reports.push(report);
    }
    let nmm = reports.pop().expect("two reports");
    let gmm = reports.pop().expect("two reports");
    let comparison = render_comparison(&[("GMM", &gmm), ("NMM", &nmm)]);
    if let Some(dir) = out_dir {
        let path = dir.join("comparison.txt");
        std::fs::write(&path, &comparison).map_err(|e| Error::io(&path, e))?;
    }
    Ok(BenchOutcome { gmm, nmm, comparison })
}

fn cmd_synth_bench(args: &SynthBenchArgs, io: &mut Io<'_>) -> Result<i32> {
    let mut cfg = RunConfig::load_or_default(args.config.as_deref())?;
    if args.separated {
        cfg.bench.dataset = nmmhmm::io::synthetic::separated_benchmark_spec();
    }
    if let Some(seed) = args.seed {
        cfg.bench.dataset.seed = seed;
        cfg.bench.gmm.seed = seed;
        cfg.bench.nmm.seed = seed;
        cfg.bench.noise_seed = seed;
    }
    if !args.snr.is_empty() {
        cfg.bench.snrs_db.clone_from(&args.snr);
    }
    if args.out_dir.is_some() {
        cfg.out_dir.clone_from(&args.out_dir);
    }
    cfg.validate()?;
    let outcome = run_synth_bench(&cfg.bench, cfg.out_dir.as_deref(), io)?;
    if args.stdout || cfg.out_dir.is_none() {
        let _ = io.out.write_all(outcome.comparison.as_bytes());
    }
    Ok(0)
}

fn cmd_sample(args: &SampleArgs, io: &mut Io<'_>) -> Result<i32> {
    let model = read_model(&args.model)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    for i in 0..args.count {
        let s = sample_sequence(&model, args.length, derive_seed(args.seed, i as u64))?;
        write_features(args.out_dir.join(format!("sample_{i:04}.nmmf")), &s.features)?;
    }
    io.log(format!("wrote {} sequences of {} x {} to {}", args.count, args.length, model.dim(), args.out_dir.display()));
    Ok(0)
}

fn cmd_report(args: &ReportArgs, io: &mut Io<'_>) -> Result<i32> {
    let reports: Vec<(String, EvalReport)> = args
        .reports
        .iter()
        .map(|(name, path)| {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Ok((name.clone(), EvalReport::from_csv(&text)?))
        })
        .collect::<Result<_>>()?;
    let body = match (args.format, reports.as_slice()) {
        (Format::Csv, [(_, r)]) => r.to_csv()?,
        (Format::Csv, _) => return Err(Error::Config("CSV output takes exactly one report".into())),
        (Format::Text, [(_, r)]) => r.to_text(),
        (Format::Text, many) => render_comparison(&many.iter().map(|(n, r)| (n.as_str(), r)).collect::<Vec<_>>()),
    };
    match &args.out {
        Some(p) => std::fs::write(p, body).map_err(|e| Error::io(p, e))?,
        None => {
            let _ = io.out.write_all(body.as_bytes());
        }
    }
    Ok(0)
}

/// Evaluates in-memory models on labeled sequences (clean only).
pub fn accuracy(models: &[HmmModel], test: &[LabeledSequence]) -> Result<f64> {
    Ok(evaluate(models, test)?.accuracy)
}
