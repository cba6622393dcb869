#![allow(dead_code)]

use std::path::{Path, PathBuf};

use nmmhmm::features::{write_wav, AudioBuffer};
use nmmhmm::math::seeded_rng;
use nmmhmm_cli::{run_from, Io};
use rand_distr::{Distribution, StandardNormal};

pub const SR: u32 = 16_000;

/// Runs the CLI in-process and returns `(exit code, stdout, stderr)`.
pub fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = {
        let mut io = Io { out: &mut out, err: &mut err };
        run_from(std::iter::once("nmmhmm").chain(args.iter().copied()), &mut io)
    };
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

/// A tone of `freq` Hz with a slow vibrato and some hiss.
pub fn tone(freq: f64, seconds: f64, seed: u64) -> AudioBuffer {
    let mut rng = seeded_rng(seed);
    let n = (seconds * f64::from(SR)) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / f64::from(SR);
            let f = freq * (1.0 + 0.02 * (std::f64::consts::TAU * 3.0 * t).sin());
            let hiss: f64 = StandardNormal.sample(&mut rng);
            0.4 * (std::f64::consts::TAU * f * t).sin() + 0.02 * hiss
        })
        .collect();
    AudioBuffer::new(samples, SR).unwrap()
}

/// Writes one WAV per recording under `dir/wav` and a manifest that cuts
/// each recording into two segments. Classes are `low` (300 Hz) and `high`
/// (1800 Hz); the last recording of each class is the test split.
pub fn write_tone_corpus(dir: &Path, recordings_per_class: usize) -> PathBuf {
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).unwrap();
    let mut manifest = String::from("audio_path,start_sample,end_sample,label,split\n");
    for (c, (label, freq)) in [("low", 300.0), ("high", 1800.0)].into_iter().enumerate() {
        for r in 0..recordings_per_class {
            let name = format!("{label}_{r}.wav");
            let audio = tone(freq * (1.0 + 0.03 * r as f64), 0.5, (c * 100 + r) as u64);
            write_wav(wav_dir.join(&name), &audio).unwrap();
            let split = if r + 1 == recordings_per_class { "test" } else { "train" };
            for (a, b) in [(0, 4000), (4000, 8000)] {
                manifest.push_str(&format!("wav/{name},{a},{b},{label},{split}\n"));
            }
        }
    }
    let path = dir.join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    path
}

/// `(file name, bytes)` for every file in `dir`, sorted by name.
pub fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}
