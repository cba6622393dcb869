//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! `cargo test -p nmmhmm-cli --test acceptance`

#![allow(clippy::needless_range_loop)]

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nmmhmm::eval::{EvalReport, EvalRow, FEATURE_NOISE_KIND};
use nmmhmm::features::{dct_matrix, extract, frame_signal, mix_noise, AudioBuffer, FeatureConfig, NoiseKind, NoiseSource, NoiseSpec};
use nmmhmm::flow::{FlowArchitecture, FlowGenerator};
use nmmhmm::gmm::GmmEmission;
use nmmhmm::hmm::{forward_backward_log, sample_sequence, upper_triangular_log_a, ComponentResponsibilities};
use nmmhmm::io::synthetic::{benchmark_nmm_config, separated_benchmark_spec, warped_benchmark_spec};
use nmmhmm::io::{generate_synthetic_dataset, SyntheticSpec};
use nmmhmm::math::{derive_seed, logsumexp, seeded_rng};
use nmmhmm::nmm::{flow_loss_and_gradients, NmmEmission, WeightedSequence};
use nmmhmm::train::{train_class_model, TrainConfig};
use nmmhmm::{EmissionKind, EmissionModel, Error, FeatureSequence, HmmModel};
use nmmhmm_cli::{run_synth_bench, BenchConfig, BenchOutcome, Io};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn perturbed_flow(arch: FlowArchitecture, scale: f64, rng: &mut impl Rng) -> FlowGenerator {
    let mut flow = FlowGenerator::new(arch, rng);
    for p in flow.params_mut() {
        *p += scale * normal(rng);
    }
    flow
}

/// `log |det m|` by Gaussian elimination with partial pivoting.
fn log_abs_det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs())).unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        acc += p.abs().ln();
        for r in col + 1..n {
            let f = m[r][col] / p;
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    acc
}

fn flow_correctness() -> Check {
    let mut rng = seeded_rng(11);
    let arch = FlowArchitecture { dim: 39, blocks: 4, hidden: 64 };
    let flow = perturbed_flow(arch, 0.05, &mut rng);
    let mut worst_rt = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..39).map(|_| 2.0 * normal(&mut rng)).collect();
        let (z, _) = flow.inverse(&x).map_err(|e| e.to_string())?;
        let back = flow.forward(&z).map_err(|e| e.to_string())?;
        worst_rt = x.iter().zip(&back).fold(worst_rt, |m, (a, b)| m.max((a - b).abs()));
    }
    ensure(worst_rt < 1e-6, || format!("round trip error {worst_rt:.3e}"))?;

    let mut worst_det = 0.0f64;
    for dim in [1, 2, 3, 5, 8] {
        let flow = perturbed_flow(FlowArchitecture { dim, blocks: 2, hidden: 12 }, 0.3, &mut rng);
        for _ in 0..20 {
            let x: Vec<f64> = (0..dim).map(|_| 1.5 * normal(&mut rng)).collect();
            let (_, analytic) = flow.inverse(&x).map_err(|e| e.to_string())?;
            let h = 1e-5;
            let mut jac = vec![vec![0.0; dim]; dim];
            for j in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let zp = flow.inverse(&xp).map_err(|e| e.to_string())?.0;
                let zm = flow.inverse(&xm).map_err(|e| e.to_string())?.0;
                for i in 0..dim {
                    jac[i][j] = (zp[i] - zm[i]) / (2.0 * h);
                }
            }
            // Relative error of |det J| itself.
            let rel = (analytic - log_abs_det(jac)).exp_m1().abs();
            worst_det = worst_det.max(rel);
        }
    }
    ensure(worst_det < 1e-4, || format!("log-det relative error {worst_det:.3e}"))?;

    let f1 = perturbed_flow(FlowArchitecture { dim: 1, blocks: 2, hidden: 8 }, 0.4, &mut rng);
    let (lo, hi, n) = (-25.0, 25.0, 50_000);
    let step = (hi - lo) / n as f64;
    let mass1: f64 = (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            w * f1.log_density(&[lo + i as f64 * step]).unwrap().exp()
        })
        .sum::<f64>()
        * step;
    let f2 = perturbed_flow(FlowArchitecture { dim: 2, blocks: 2, hidden: 8 }, 0.4, &mut rng);
    let (lo2, hi2, n2) = (-20.0, 20.0, 800);
    let step2 = (hi2 - lo2) / n2 as f64;
    let mut mass2 = 0.0;
    for i in 0..=n2 {
        let wi = if i == 0 || i == n2 { 0.5 } else { 1.0 };
        for j in 0..=n2 {
            let wj = if j == 0 || j == n2 { 0.5 } else { 1.0 };
            let x = [lo2 + i as f64 * step2, lo2 + j as f64 * step2];
            mass2 += wi * wj * f2.log_density(&x).unwrap().exp();
        }
    }
    mass2 *= step2 * step2;
    ensure((mass1 - 1.0).abs() < 0.01 && (mass2 - 1.0).abs() < 0.01, || {
        format!("quadrature mass D=1 {mass1:.5}, D=2 {mass2:.5}")
    })?;
    Ok(format!(
        "round trip {worst_rt:.1e}, |det| rel err {worst_det:.1e}, mass D=1 {mass1:.5} D=2 {mass2:.5}"
    ))
}

fn gradient_check() -> Check {
    let mut rng = seeded_rng(12);
    let (states, k, dim) = (2, 2, 4);
    let arch = FlowArchitecture { dim, blocks: 1, hidden: 6 };
    let mut em = NmmEmission::new(states, k, arch, &mut rng);
    for st in &mut em.states {
        for f in &mut st.flows {
            for p in f.params_mut() {
                *p += 0.3 * normal(&mut rng);
            }
        }
    }
    let seqs: Vec<FeatureSequence> = (0..2)
        .map(|_| {
            let frames: Vec<Vec<f64>> = (0..5).map(|_| (0..dim).map(|_| normal(&mut rng)).collect()).collect();
            FeatureSequence::from_frames(&frames).unwrap()
        })
        .collect();
    let resps: Vec<ComponentResponsibilities> = seqs
        .iter()
        .map(|s| {
            let mut r = ComponentResponsibilities::zeros(s.len(), states, k);
            for chunk in r.values.chunks_exact_mut(states * k) {
                let raw: Vec<f64> = (0..states * k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                for (v, w) in chunk.iter_mut().zip(raw) {
                    *v = w / total;
                }
            }
            r
        })
        .collect();
    let loss = |em: &NmmEmission| -> f64 {
        let batch: Vec<WeightedSequence<'_>> =
            seqs.iter().zip(&resps).map(|(seq, resp)| WeightedSequence { seq, resp }).collect();
        flow_loss_and_gradients(em, &batch).unwrap().0
    };
    let batch: Vec<WeightedSequence<'_>> = seqs.iter().zip(&resps).map(|(seq, resp)| WeightedSequence { seq, resp }).collect();
    let (_, grads) = flow_loss_and_gradients(&em, &batch).map_err(|e| e.to_string())?;
    let h = 1e-3;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (fi, g_flow) in grads.flows.iter().enumerate() {
        let (s, c) = (fi / k, fi % k);
        for (pi, &analytic) in g_flow.params().enumerate() {
            let at = |delta: f64| {
                let mut e = em.clone();
                *e.states[s].flows[c].params_mut().nth(pi).unwrap() += delta;
                loss(&e)
            };
            // Five-point stencil: truncation error O(h^4).
            let numeric = (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    ensure(worst < 1e-4, || format!("worst relative error {worst:.3e} over {checked} parameters"))?;
    Ok(format!("{checked} parameters, worst relative error {worst:.1e}"))
}

fn random_log_probs(rng: &mut impl Rng, n: usize, zero_prob: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> =
            (0..n).map(|_| if rng.random::<f64>() < zero_prob { 0.0 } else { rng.random_range(0.01..1.0) }).collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            return raw.iter().map(|v| (v / total).ln()).collect();
        }
    }
}

fn hmm_oracle() -> Check {
    let mut rng = seeded_rng(13);
    let mut worst_ll = 0.0f64;
    let mut worst_gamma = 0.0f64;
    let mut worst_rows = 0.0f64;
    let mut instances = 0;
    while instances < 200 {
        let s = rng.random_range(1..=3usize);
        let t = rng.random_range(1..=5usize);
        let zero = if instances % 3 == 0 { 0.3 } else { 0.0 };
        let log_q = random_log_probs(&mut rng, s, zero);
        let log_a: Vec<f64> = (0..s).flat_map(|_| random_log_probs(&mut rng, s, zero)).collect();
        let log_b: Vec<f64> = (0..t * s).map(|_| rng.random_range(-40.0..5.0)).collect();

        let mut paths = Vec::new();
        let mut marg = vec![Vec::new(); t * s];
        for code in 0..s.pow(t as u32) {
            let path: Vec<usize> = (0..t).map(|i| code / s.pow(i as u32) % s).collect();
            let mut score = log_q[path[0]] + log_b[path[0]];
            for i in 1..t {
                score += log_a[path[i - 1] * s + path[i]] + log_b[i * s + path[i]];
            }
            paths.push(score);
            for (i, &st) in path.iter().enumerate() {
                marg[i * s + st].push(score);
            }
        }
        let brute = logsumexp(&paths);
        if !brute.is_finite() {
            continue;
        }
        instances += 1;
        let post = forward_backward_log(&log_q, &log_a, &log_b).map_err(|e| e.to_string())?;
        worst_ll = worst_ll.max((post.log_likelihood - brute).abs() / brute.abs());
        for i in 0..t {
            let row = post.gamma_row(i);
            worst_rows = worst_rows.max((row.iter().sum::<f64>() - 1.0).abs());
            for st in 0..s {
                let expect = if marg[i * s + st].is_empty() { 0.0 } else { (logsumexp(&marg[i * s + st]) - brute).exp() };
                worst_gamma = worst_gamma.max((row[st] - expect).abs());
            }
        }
    }
    ensure(worst_ll < 1e-10, || format!("log-likelihood relative error {worst_ll:.3e}"))?;
    ensure(worst_rows < 1e-8, || format!("gamma row sum off by {worst_rows:.3e}"))?;
    ensure(worst_gamma < 1e-8, || format!("gamma differs from enumeration by {worst_gamma:.3e}"))?;
    Ok(format!(
        "{instances} instances, loglik rel err {worst_ll:.1e}, gamma row sums {worst_rows:.1e}, gamma vs enumeration {worst_gamma:.1e}"
    ))
}

fn em_monotonicity() -> Check {
    let mut worst = 0.0f64;
    let mut steps = 0;
    for seed in 0..10u64 {
        let spec = SyntheticSpec { num_classes: 2, dim: 3, train_per_class: 80, test_per_class: 1, seed, ..SyntheticSpec::default() };
        let data = generate_synthetic_dataset(&spec).map_err(|e| e.to_string())?;
        let cfg = TrainConfig {
            emission_kind: EmissionKind::Gmm,
            num_components: Some(4),
            max_outer_iters: 25,
            rel_tol: 1e-9,
            seed,
            ..TrainConfig::default()
        };
        let (_, log) = train_class_model("c0", &data.classes[0].train, &cfg).map_err(|e| e.to_string())?;
        let ll = log.log_likelihoods();
        for w in ll.windows(2) {
            steps += 1;
            let dip = (w[0] - w[1]) / w[0].abs();
            worst = worst.max(dip);
            ensure(dip <= 1e-8, || format!("GMM run {seed}: log-likelihood fell from {} to {}", w[0], w[1]))?;
        }
    }

    let spec = SyntheticSpec { train_per_class: 150, ..warped_benchmark_spec() };
    let data = generate_synthetic_dataset(&spec).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { max_outer_iters: 20, rel_tol: 1e-9, ..benchmark_nmm_config() };
    let (_, log) = train_class_model("c0", &data.classes[0].train, &cfg).map_err(|e| e.to_string())?;
    let ll = log.log_likelihoods();
    let pairs = ll.len().saturating_sub(1);
    let up = ll.windows(2).filter(|w| w[1] >= w[0]).count();
    let frac = up as f64 / pairs.max(1) as f64;
    ensure(pairs > 0 && frac >= 0.9, || format!("NMM non-decreasing in {up}/{pairs} iterations"))?;
    Ok(format!(
        "GMM: {steps} steps over 10 runs, largest relative dip {worst:.1e}; NMM: non-decreasing in {up}/{pairs} iterations"
    ))
}

fn parameter_recovery() -> Check {
    let true_means = [vec![-1.0, 0.5], vec![1.5, -1.0]];
    let emission = GmmEmission::from_means(vec![vec![true_means[0].clone()], vec![true_means[1].clone()]], &[0.3, 0.3], 1e-3)
        .map_err(|e| e.to_string())?;
    let generator = HmmModel::new("g", vec![0.0, f64::NEG_INFINITY], upper_triangular_log_a(2, 0.6), EmissionModel::Gmm(emission))
        .map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(14);
    let seqs: Vec<FeatureSequence> = (0..500)
        .map(|i| {
            let len = rng.random_range(6..=12);
            sample_sequence(&generator, len, derive_seed(14, i)).map(|s| s.features)
        })
        .collect::<Result<_, Error>>()
        .map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        emission_kind: EmissionKind::Gmm,
        num_components: Some(1),
        num_states: Some(2),
        ..TrainConfig::default()
    };
    let (model, _) = train_class_model("g", &seqs, &cfg).map_err(|e| e.to_string())?;
    let EmissionModel::Gmm(em) = &model.emission else {
        return Err("expected a GMM emission".into());
    };
    let learned: Vec<Vec<f64>> = em
        .states
        .iter()
        .map(|st| {
            let mut m = st.means.clone();
            if let Some(z) = &model.standardizer {
                z.invert_frame(&mut m);
            }
            m
        })
        .collect();
    let err = |perm: [usize; 2]| -> f64 {
        (0..2)
            .flat_map(|s| learned[perm[s]].iter().zip(&true_means[s]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max)
    };
    let worst = err([0, 1]).min(err([1, 0]));
    ensure(worst < 0.1, || format!("mean error {worst:.4} (learned {learned:?})"))?;
    Ok(format!("500 sequences, worst mean error {worst:.4}"))
}

fn bench(config: &BenchConfig) -> Result<BenchOutcome, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut io = Io { out: &mut out, err: &mut err };
    run_synth_bench(config, None, &mut io).map_err(|e| e.to_string())
}

fn clean_accuracy(r: &EvalReport) -> f64 {
    r.clean().and_then(|c| c.accuracy).unwrap_or(f64::NAN)
}

fn synthetic_classification(warped_out: &mut Option<BenchOutcome>) -> Check {
    let separated = bench(&BenchConfig { dataset: separated_benchmark_spec(), ..BenchConfig::default() })?;
    let (sg, sn) = (clean_accuracy(&separated.gmm), clean_accuracy(&separated.nmm));
    let warped = bench(&BenchConfig::default())?;
    let (wg, wn) = (clean_accuracy(&warped.gmm), clean_accuracy(&warped.nmm));
    *warped_out = Some(warped);
    let detail = format!("separated GMM {sg:.1} NMM {sn:.1}; warped GMM {wg:.1} NMM {wn:.1} (gap {:+.1})", wn - wg);
    ensure(sg >= 95.0 && sn >= 95.0 && wn - wg >= 5.0, || detail.clone())?;
    Ok(detail)
}

fn parse_cell(cell: &str) -> Option<(i64, i64)> {
    let tenths = |s: &str| -> Option<i64> { Some((s.trim().parse::<f64>().ok()? * 10.0).round() as i64) };
    let (a, rest) = cell.split_once(" (")?;
    Some((tenths(a)?, tenths(rest.strip_suffix(')')?)?))
}

fn robustness_trend(warped: Option<BenchOutcome>) -> Check {
    let outcome = match warped {
        Some(o) => o,
        None => bench(&BenchConfig::default())?,
    };
    let snrs = [25.0, 20.0, 15.0, 10.0];
    let mut summary = Vec::new();
    for (name, report) in [("GMM", &outcome.gmm), ("NMM", &outcome.nmm)] {
        ensure(!report.has_errors(), || format!("{name} report has errored rows"))?;
        let clean = report.clean().ok_or("missing clean row")?;
        let clean_acc = clean.accuracy.ok_or("clean accuracy missing")?;
        let clean_tenths = (clean_acc * 10.0).round() as i64;
        let mut accs = vec![clean_acc];
        for snr in snrs {
            let row: &EvalRow = report.row(FEATURE_NOISE_KIND, snr).ok_or_else(|| format!("{name}: no row at {snr} dB"))?;
            let acc = row.accuracy.ok_or("accuracy missing")?;
            ensure(acc == 100.0 * row.n_correct as f64 / row.n_total as f64, || format!("{name} {snr} dB: accuracy does not match counts"))?;
            ensure(row.drop == Some(clean_acc - acc), || format!("{name} {snr} dB: drop {:?} != {}", row.drop, clean_acc - acc))?;
            let (shown, drop) = parse_cell(&row.cell()).ok_or_else(|| format!("unparseable cell '{}'", row.cell()))?;
            ensure(clean_tenths - shown == drop, || format!("{name} {snr} dB: printed '{}' against clean {clean_acc:.1}", row.cell()))?;
            accs.push(acc);
        }
        ensure(accs.windows(2).all(|w| w[1] <= w[0]), || format!("{name} accuracy not monotone: {accs:?}"))?;
        summary.push(format!("{name} {}", accs.iter().map(|a| format!("{a:.1}")).collect::<Vec<_>>().join(" > ")));
    }
    let text = &outcome.comparison;
    ensure(text.lines().next().is_some_and(|l| l.starts_with("clean reference")), || "comparison header missing".into())?;
    ensure(text.lines().any(|l| l.trim_start().starts_with(FEATURE_NOISE_KIND)), || "comparison has no noise row".into())?;
    let reparsed = EvalReport::from_csv(&outcome.nmm.to_csv().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(reparsed == outcome.nmm, || "report CSV round trip changed values".into())?;
    Ok(summary.join("; "))
}

fn feature_pipeline() -> Check {
    let mut grid = 0;
    for n in [1, 199, 200, 201, 400, 401, 559, 560, 4_000, 16_000, 16_001] {
        for w in [200, 400, 512] {
            for s in [80, 160, 173] {
                let audio = AudioBuffer::new(vec![0.1; n], 16_000).map_err(|e| e.to_string())?;
                let got = frame_signal(&audio, w as f64 / 16_000.0, s as f64 / 16_000.0, 0.97);
                match (n >= w, got) {
                    (true, Ok(frames)) => {
                        let want = (n - w) / s + 1;
                        ensure(frames.len() == want && frames.iter().all(|f| f.len() == w), || {
                            format!("N={n} W={w} S={s}: {} frames, want {want}", frames.len())
                        })?;
                    }
                    (false, Err(Error::SignalTooShort { .. })) => {}
                    (_, other) => return Err(format!("N={n} W={w} S={s}: unexpected {:?}", other.map(|f| f.len()))),
                }
                grid += 1;
            }
        }
    }

    let config = FeatureConfig::default();
    let feats = extract(&common::tone(440.0, 1.0, 1), &config).map_err(|e| e.to_string())?;
    ensure(feats.dim() == 39 && config.output_dim() == 39 && feats.len() == 98, || {
        format!("1 s of audio gave {} x {}", feats.len(), feats.dim())
    })?;

    let clean = common::tone(523.0, 1.0, 2);
    let mut worst_snr = 0.0f64;
    for kind in NoiseKind::ALL {
        for (i, snr) in [-5.0, 0.0, 10.0, 25.0].into_iter().enumerate() {
            let spec = NoiseSpec { source: NoiseSource::Synthetic(kind), snr_db: snr, offset_seed: i as u64 };
            let mixed = mix_noise(&clean, &spec).map_err(|e| e.to_string())?;
            let p_noise =
                mixed.samples.iter().zip(&clean.samples).map(|(m, c)| (m - c).powi(2)).sum::<f64>() / clean.len() as f64;
            let measured = 10.0 * (clean.mean_power() / p_noise).log10();
            worst_snr = worst_snr.max((measured - snr).abs());
        }
    }
    ensure(worst_snr < 0.01, || format!("SNR off by {worst_snr:.4} dB"))?;

    let mut worst_dct = 0.0f64;
    for (rows, n) in [(13, 26), (26, 26), (13, 40)] {
        let d = dct_matrix(rows, n);
        for i in 0..rows {
            for j in 0..rows {
                let dot: f64 = d[i].iter().zip(&d[j]).map(|(a, b)| a * b).sum();
                worst_dct = worst_dct.max((dot - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
    }
    ensure(worst_dct < 1e-10, || format!("DCT rows deviate from orthonormal by {worst_dct:.3e}"))?;
    Ok(format!("{grid} frame-count cases, dim 39, SNR error {worst_snr:.1e} dB, DCT {worst_dct:.1e}"))
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let manifest = common::write_tone_corpus(root, 4);
    let manifest = manifest.to_str().unwrap();
    let cache = root.join("cache");
    let cache = cache.to_str().unwrap();

    let mut compared = 0;
    for emission in ["gmm", "nmm"] {
        let mut runs = Vec::new();
        for (run, jobs) in [(0, "1"), (1, "1"), (2, "4")] {
            let out = root.join(format!("train_{emission}_{run}"));
            let (code, _, err) = common::run(&[
                "--jobs", jobs, "train", "--manifest", manifest, "--cache-dir", cache, "--out-dir", out.to_str().unwrap(),
                "--emission", emission, "--K", "2", "--flow-blocks", "1", "--hidden-units", "8", "--batch-size", "16",
                "--inner-epochs", "2", "--max-iters", "3", "--seed", "5",
            ]);
            ensure(code == 0, || format!("train {emission} exited {code}: {err}"))?;
            runs.push(common::dir_bytes(&out.join("models")));
        }
        ensure(!runs[0].is_empty(), || "no model files written".into())?;
        ensure(runs[0] == runs[1], || format!("train {emission}: repeated runs differ"))?;
        ensure(runs[0] == runs[2], || format!("train {emission}: --jobs 1 and --jobs 4 differ"))?;
        compared += runs[0].len();
    }

    let config = root.join("bench.json");
    std::fs::write(
        &config,
        r#"{"bench": {
            "dataset": {"num_classes": 2, "dim": 3, "train_per_class": 30, "test_per_class": 10, "seed": 3},
            "gmm": {"emission_kind": "gmm", "num_components": 2, "max_outer_iters": 5},
            "nmm": {"emission_kind": "nmm", "num_components": 2, "flow_blocks": 1, "hidden_units": 8,
                    "batch_size": 16, "inner_epochs": 2, "max_outer_iters": 3},
            "snrs_db": [20, 10]
        }}"#,
    )
    .map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (run, jobs) in [(0, "1"), (1, "1"), (2, "4")] {
        let out = root.join(format!("bench_{run}"));
        let (code, _, err) = common::run(&[
            "--jobs", jobs, "synth-bench", "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap(),
        ]);
        ensure(code == 0, || format!("synth-bench exited {code}: {err}"))?;
        runs.push((common::dir_bytes(&out.join("gmm/models")), common::dir_bytes(&out.join("nmm/models"))));
    }
    ensure(runs[0] == runs[1], || "synth-bench: repeated runs differ".into())?;
    ensure(runs[0] == runs[2], || "synth-bench: --jobs 1 and --jobs 4 differ".into())?;
    compared += runs[0].0.len() + runs[0].1.len();
    Ok(format!("{compared} model files identical across repeated runs and --jobs 1/4"))
}

fn main() {
    let mut failures = 0;
    let mut warped = None;
    let mut report = |id: usize, name: &str, budget: Duration, f: &mut dyn FnMut() -> Check| {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = started.elapsed();
        let (status, detail) = match result {
            Ok(d) if elapsed <= budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; exceeded {budget:?}")),
            Err(e) => ("FAIL", e),
        };
        if status == "FAIL" {
            failures += 1;
        }
        println!("criterion {id} [PRIMARY] {name}: {status} ({detail}) [{:.1} s]", elapsed.as_secs_f64());
    };
    let min = |m: u64| Duration::from_secs(60 * m);
    report(1, "flow correctness", min(1), &mut flow_correctness);
    report(2, "flow gradients", min(1), &mut gradient_check);
    report(3, "HMM oracle", min(1), &mut hmm_oracle);
    report(4, "EM monotonicity", min(5), &mut em_monotonicity);
    report(5, "parameter recovery", min(2), &mut parameter_recovery);
    report(6, "synthetic classification", min(20), &mut || synthetic_classification(&mut warped));
    report(7, "robustness trend", min(10), &mut || robustness_trend(warped.take()));
    report(8, "feature pipeline", Duration::from_secs(30), &mut feature_pipeline);
    report(9, "determinism", min(25), &mut determinism);
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
