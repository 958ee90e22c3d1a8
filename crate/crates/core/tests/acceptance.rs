//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL line
//! each and exits non-zero if any failed.

mod common;

use std::f64::consts::TAU;
use std::time::Instant;

use fbg_core::dataset::{
    fit_norm_stats, generate_dynamic, generate_static, normalize, save_dataset, split, Corpus, CorpusKind,
    DynamicConfig, ForceSchedule, Sample, StaticConfig,
};
use fbg_core::eval::{render, run_dynamic_suite, run_static_suite, Estimator, MetricsReport, ModelBased, ReportFormat};
use fbg_core::fbg::{baseline_frame, measure, NoiseModel, SensorLayout};
use fbg_core::force::{decode_force, encode_force, ContactForce};
use fbg_core::geometry::{bend_profile, integrate_shape, shape_error, tip_position_error, BendProfile, WorkspaceConfig};
use fbg_core::model_based::{reconstruct, solve_triad};
use fbg_core::nn::{
    force_loss, joint_loss, rescale_labels, shape_loss, train, Conv1d, Dense, EncoderKind, Heads, Layer, Lstm,
    MaxPool1d, ModelParams, Relu, Sigmoid, Tensor, TrainConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{away_from_zero, check_layer, check_loss, random_vec};

/// Static corpus size for the learning criteria.
const CORPUS_SIZE: usize = 6224;
const CORPUS_SEED: u64 = 42;
const SPLIT_SEED: u64 = 7;
/// Epochs for the full-size learning target.
const TARGET_EPOCHS: usize = 450;
/// Epochs per model in the three-seed ordering check.
const ORDERING_EPOCHS: usize = 60;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// ---------------------------------------------------------------- 1

fn gradients() -> Outcome {
    const CONFIGS: usize = 20;
    const TOL: f64 = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: Vec<(&str, f64)> = Vec::new();
    let mut record = |name: &'static str, e: f64| match worst.iter_mut().find(|w| w.0 == name) {
        Some(w) => w.1 = w.1.max(e),
        None => worst.push((name, e)),
    };
    for _ in 0..CONFIGS {
        let batch = rng.gen_range(1..4);

        let d = Dense::new(rng.gen_range(1..9), rng.gen_range(1..9));
        let p = random_vec(&mut rng, d.param_count(), 1.0);
        let x = Tensor::new(&[batch, d.input], random_vec(&mut rng, batch * d.input, 1.0)).unwrap();
        record("dense", check_layer(&d, &x, &p, &mut rng, 200));

        let n = rng.gen_range(1..12);
        let r = Relu::new(&[n]);
        let x = Tensor::new(&[batch, n], away_from_zero(&mut rng, batch * n)).unwrap();
        record("relu", check_layer(&r, &x, &[], &mut rng, 200));

        let s = Sigmoid { len: n };
        let x = Tensor::new(&[batch, n], random_vec(&mut rng, batch * n, 4.0)).unwrap();
        record("sigmoid", check_layer(&s, &x, &[], &mut rng, 200));

        let kernel = rng.gen_range(1..4);
        let c = Conv1d {
            in_channels: rng.gen_range(1..4),
            out_channels: rng.gen_range(1..5),
            length: rng.gen_range(kernel..10),
            kernel,
            padding: rng.gen_range(0..kernel),
        };
        let p = random_vec(&mut rng, c.param_count(), 1.0);
        let x = Tensor::new(&[batch, c.in_channels, c.length], random_vec(&mut rng, batch * c.input_len(), 1.0)).unwrap();
        record("conv1d", check_layer(&c, &x, &p, &mut rng, 200));

        let size = rng.gen_range(1..4);
        let pool = MaxPool1d {
            channels: rng.gen_range(1..4),
            length: rng.gen_range(size..10),
            size,
        };
        // distinct values keep the maximum away from ties
        let mut vals: Vec<f64> = (0..batch * pool.input_len()).map(|i| i as f64 * 0.01).collect();
        for i in (1..vals.len()).rev() {
            vals.swap(i, rng.gen_range(0..=i));
        }
        let x = Tensor::new(&[batch, pool.channels, pool.length], vals).unwrap();
        record("maxpool", check_layer(&pool, &x, &[], &mut rng, 200));

        let l = Lstm {
            input: rng.gen_range(1..4),
            hidden: rng.gen_range(1..5),
            steps: rng.gen_range(1..6),
        };
        let p = random_vec(&mut rng, l.param_count(), 0.8);
        let x = Tensor::new(&[batch, l.steps, l.input], random_vec(&mut rng, batch * l.input_len(), 1.0)).unwrap();
        record("lstm", check_layer(&l, &x, &p, &mut rng, 120));

        let h = Heads {
            features: rng.gen_range(1..7),
            nodes: rng.gen_range(1..5),
        };
        let p = random_vec(&mut rng, h.param_count(), 1.0);
        let x = Tensor::new(&[batch, h.features], random_vec(&mut rng, batch * h.features, 1.0)).unwrap();
        record("heads", check_layer(&h, &x, &p, &mut rng, 200));

        let m = rng.gen_range(1..6);
        let (kt, pt) = (random_vec(&mut rng, batch * m, 1.0), random_vec(&mut rng, batch * m, 1.0));
        let pred = random_vec(&mut rng, 2 * batch * m, 1.0);
        let split = batch * m;
        let e_shape = check_loss(
            |v: &[f64]| {
                let (l, gk, gp) = shape_loss(&v[..split], &v[split..], &kt, &pt).unwrap();
                (l, [gk, gp].concat())
            },
            &pred,
        );
        record("shape loss", e_shape);

        let ft = random_vec(&mut rng, batch * m, 1.0);
        let fp = random_vec(&mut rng, batch * m, 1.0);
        record("force loss", check_loss(|v: &[f64]| force_loss(v, &ft, batch).unwrap(), &fp));

        let width = 3 * m + 1;
        let jt = random_vec(&mut rng, batch * width, 1.0);
        let jp = random_vec(&mut rng, batch * width, 1.0);
        let wf = rng.gen_range(0.1..3.0);
        record(
            "joint loss",
            check_loss(
                |v: &[f64]| {
                    let (parts, g) = joint_loss(v, &jt, m, wf).unwrap();
                    (parts.total, g)
                },
                &jp,
            ),
        );
    }
    let max = worst.iter().map(|w| w.1).fold(0.0, f64::max);
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    check(
        max <= TOL,
        format!("{CONFIGS} configs per layer, worst relative error {max:.2e} ({})", detail.join(", ")),
    )
}

// ---------------------------------------------------------------- 2

fn model_based_round_trip() -> Outcome {
    let ws = WorkspaceConfig::default();
    let layout = SensorLayout::default();
    let baseline = baseline_frame(&layout).unwrap();
    let (mut tip_max, mut shape_max) = (0.0f64, 0.0f64);
    for k in 0..10 {
        let angle = (-270.0 + 60.0 * k as f64).to_radians();
        let (kappa, twist) = bend_profile(angle, BendProfile::Constant, 40, 0.132, &ws).unwrap();
        let truth = integrate_shape(&kappa, &twist, layout.sample_spacing).unwrap();
        let frame = measure(&truth, &layout, 0.0, 0).unwrap();
        let rec = reconstruct(&frame, &baseline, &layout).unwrap();
        tip_max = tip_max.max(tip_position_error(&rec, &truth).unwrap() * 1e3);
        shape_max = shape_max.max(shape_error(&rec, &truth).unwrap() * 1e3);
    }
    check(
        tip_max <= 0.5 && shape_max <= 0.2,
        format!("10 angles in ±270°: worst tip {tip_max:.2e} mm, worst shape {shape_max:.2e} mm"),
    )
}

// ---------------------------------------------------------------- 3

fn triad_inversion() -> Outcome {
    let layout = SensorLayout::default();
    let az = layout.fbg_azimuths();
    let azimuths = [az[0], az[1], az[2]];
    let radii = [layout.helix_radii[0], layout.helix_radii[1], layout.helix_radii[2]];
    let kappa_max = 1.0 / 7.5e-3;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let kappa = kappa_max * i as f64 / 99.0;
        for j in 0..36 {
            let phi = TAU * j as f64 / 36.0;
            let strains: [f64; 3] = std::array::from_fn(|n| -kappa * radii[n] * (phi + azimuths[n]).sin());
            let sol = solve_triad(&strains, &azimuths, &radii).unwrap();
            worst = worst.max((sol.curvature - kappa).abs());
            if kappa > 0.0 {
                let d = (sol.phase - phi).rem_euclid(TAU);
                worst = worst.max(d.min(TAU - d));
            }
        }
    }
    check(worst <= 1e-8, format!("100×36 grid, worst κ/φ deviation {worst:.2e}"))
}

// ---------------------------------------------------------------- 4

fn force_codec() -> Outcome {
    let layout = SensorLayout::default();
    let grid = layout.node_grid();
    let half = layout.sample_spacing / 2.0;
    let force = 0.3;
    let mut worst = 0.0f64;
    for k in 0..=900 {
        let x = 0.090 * k as f64 / 900.0;
        let d = encode_force(&ContactForce::new(force, x), &grid, 3.0).unwrap();
        let c = decode_force(&d, force / 0.5, (0.0, 0.5), 0.0).unwrap();
        worst = worst.max((c.location - x).abs());
    }
    let mut peaks_exact = true;
    for &x in grid.iter().filter(|&&x| x <= 0.090) {
        let d = encode_force(&ContactForce::new(force, x), &grid, 3.0).unwrap();
        peaks_exact &= d.values[d.peak_index().unwrap()] == force;
    }
    check(
        worst <= half + 1e-12 && peaks_exact,
        format!(
            "901 locations over 90 mm: worst {:.3} mm (limit {:.3}), on-grid peaks exact: {peaks_exact}",
            worst * 1e3,
            half * 1e3
        ),
    )
}

// ---------------------------------------------------------------- shared corpus

struct Static {
    layout: SensorLayout,
    train: Corpus,
    test: Vec<Sample>,
}

fn static_corpus() -> Static {
    let ws = WorkspaceConfig::default();
    let layout = SensorLayout::default();
    let cfg = StaticConfig {
        count: CORPUS_SIZE,
        noise: NoiseModel::gaussian(1e-5),
        seed: CORPUS_SEED,
        ..StaticConfig::default()
    };
    let samples = generate_static(&cfg, &ws, &layout).unwrap();
    let (train, test) = split(&samples, 0.8, SPLIT_SEED).unwrap();
    let stats = fit_norm_stats(&train, ws.force_range).unwrap();
    Static {
        layout: layout.clone(),
        train: Corpus {
            kind: CorpusKind::Static,
            layout,
            workspace: ws,
            seed: cfg.seed,
            noise: cfg.noise,
            stiffness: cfg.stiffness,
            force_sigma: cfg.force_sigma,
            samples: train,
            stats: Some(stats),
        },
        test,
    }
}

fn reference_config(seed: u64, epochs: usize) -> TrainConfig {
    let mut c = TrainConfig {
        epochs,
        seed,
        batch_size: 256,
        ..TrainConfig::default()
    };
    c.adam.learning_rate = 2e-3;
    c.adam.weight_decay = 1e-5;
    c
}

// ---------------------------------------------------------------- 5

fn learning_target(data: &Static) -> (Outcome, Option<ModelParams>) {
    let n = data.train.samples.len() + data.test.len();
    let (model, _) = match train(&data.train, EncoderKind::Conv1d, &reference_config(1, TARGET_EPOCHS)) {
        Ok(m) => m,
        Err(e) => return (Err(format!("training failed: {e}")), None),
    };
    let report = run_static_suite(&data.test, &data.layout, &[&model]).unwrap();
    let m = &report.methods[0].metrics;
    let (tip, force, loc) = (m.tip_mm.mean, m.force_mn.unwrap().mean, m.location_mm.unwrap().mean);
    let outcome = check(
        n >= 5000 && tip <= 2.64 && force <= 75.0 && loc <= 5.0,
        format!(
            "{n} samples, {} test, {TARGET_EPOCHS} epochs: tip {tip:.3} mm (≤ 2.64), force {force:.1} mN (≤ 75), location {loc:.2} mm (≤ 5)",
            data.test.len()
        ),
    );
    (outcome, Some(model))
}

// ---------------------------------------------------------------- 6

fn encoder_ordering(data: &Static) -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in [11, 12, 13] {
        let mut shape = Vec::new();
        for kind in [EncoderKind::Conv1d, EncoderKind::Fc] {
            let (model, _) = train(&data.train, kind, &reference_config(seed, ORDERING_EPOCHS)).map_err(|e| e.to_string())?;
            let report = run_static_suite(&data.test, &data.layout, &[&model]).unwrap();
            shape.push(report.methods[0].metrics.shape_mm.mean);
        }
        ok &= shape[0] <= shape[1];
        lines.push(format!("seed {seed}: conv1d {:.3} vs fc {:.3} mm", shape[0], shape[1]));
    }
    check(ok, format!("{ORDERING_EPOCHS} epochs each; {}", lines.join("; ")))
}

// ---------------------------------------------------------------- 7

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let ws = WorkspaceConfig::default();
    let layout = SensorLayout::default();
    let run = |tag: &str| -> (Vec<u8>, Vec<Vec<f64>>, Vec<Vec<u8>>, Vec<String>) {
        let cfg = StaticConfig {
            count: 400,
            seed: 5,
            ..StaticConfig::default()
        };
        let samples = generate_static(&cfg, &ws, &layout).unwrap();
        let (tr, te) = split(&samples, 0.8, 3).unwrap();
        let corpus = Corpus {
            kind: CorpusKind::Static,
            layout: layout.clone(),
            workspace: ws.clone(),
            seed: cfg.seed,
            noise: cfg.noise,
            stiffness: cfg.stiffness,
            force_sigma: cfg.force_sigma,
            samples: tr,
            stats: None,
        };
        let path = dir.path().join(format!("{tag}.fbgd"));
        save_dataset(&corpus, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut losses = Vec::new();
        let mut models = Vec::new();
        let mut fitted = Vec::new();
        for kind in EncoderKind::ALL {
            let mut c = reference_config(9, 2);
            c.batch_size = 64;
            let (m, h) = train(&corpus, kind, &c).unwrap();
            losses.push([h.train_loss(), h.validation_loss()].concat());
            models.push(m.to_bytes());
            fitted.push(m);
        }
        let mb = ModelBased::new(layout.clone()).unwrap();
        let mut methods: Vec<&dyn Estimator> = vec![&mb];
        methods.extend(fitted.iter().map(|m| m as &dyn Estimator));
        let report = run_static_suite(&te, &layout, &methods).unwrap();
        let reports = [ReportFormat::Text, ReportFormat::Csv, ReportFormat::PlotData]
            .iter()
            .map(|&f| render(&report, f))
            .collect();
        (bytes, losses, models, reports)
    };
    let a = run("a");
    let b = run("b");
    let same = [a.0 == b.0, a.1 == b.1, a.2 == b.2, a.3 == b.3];
    check(
        same.iter().all(|&s| s),
        format!(
            "two runs: dataset {}, loss trajectories {}, model files {}, reports {}",
            same[0], same[1], same[2], same[3]
        ),
    )
}

// ---------------------------------------------------------------- 8

fn normalization(data: &Static) -> Outcome {
    let stats = data.train.stats.as_ref().unwrap();
    let rows: Vec<Vec<f64>> = data.train.samples.iter().map(|s| normalize(&s.strains, stats).unwrap()).collect();
    let n = rows.len() as f64;
    let (mut worst_mean, mut worst_std) = (0.0f64, 0.0f64);
    let mut channels = 0;
    for j in 0..stats.channels() {
        if stats.constant[j] {
            continue;
        }
        channels += 1;
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let std = (rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((std - 1.0).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_rt = 0.0f64;
    for range in [&stats.curvature, &stats.twist, &stats.force] {
        for j in 0..range.width() {
            let (lo, hi) = (range.min[j], range.max[j]);
            let y = rng.gen_range(lo..=hi);
            let back = rescale_labels((y - lo) / (hi - lo), lo, hi).unwrap();
            worst_rt = worst_rt.max((back - y).abs() / y.abs().max(1.0));
        }
    }
    check(
        channels > 0 && worst_mean < 1e-9 && worst_std < 1e-6 && worst_rt <= 1e-12,
        format!(
            "{channels} channels: |mean| ≤ {worst_mean:.1e}, |std − 1| ≤ {worst_std:.1e}; label round trip {worst_rt:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 9

fn dynamic_protocol(model: Option<&ModelParams>) -> Outcome {
    let ws = WorkspaceConfig::default();
    let layout = SensorLayout::default();
    let release = 240f64.to_radians();
    let steps = 101;
    let mut cfg = DynamicConfig::new(
        30f64.to_radians(),
        steps,
        ForceSchedule::Contact {
            magnitude: 0.25,
            location: 0.06,
            release_angle: release,
        },
    );
    cfg.noise = NoiseModel::gaussian(1e-5);
    let samples = generate_dynamic(&cfg, &ws, &layout).unwrap();
    let angles: Vec<f64> = samples.iter().map(|s| s.bend_angle).collect();
    let palindromic = (0..steps).all(|k| angles[k] == angles[steps - 1 - k]);
    let peak_ok = (angles[50] - 270f64.to_radians()).abs() < 1e-12;
    let free: Vec<&Sample> = samples.iter().filter(|s| s.bend_angle > release).collect();
    let labels_ok = !free.is_empty()
        && free.iter().all(|s| {
            s.gt_force == ContactForce::inactive() && s.gt_distribution.values.iter().all(|&v| v == 0.0)
        })
        && samples.iter().filter(|s| s.bend_angle <= release).all(|s| s.gt_force.active);
    let mb = ModelBased::new(layout.clone()).unwrap();
    let mut methods: Vec<&dyn Estimator> = vec![&mb];
    if let Some(m) = model {
        methods.push(m);
    }
    let report: MetricsReport = run_dynamic_suite(&[samples.clone()], &layout, &methods).unwrap();
    let traces_ok = report.methods.iter().all(|m| report.trace(&m.metrics.method, 0).len() == steps);
    check(
        palindromic && peak_ok && labels_ok && traces_ok,
        format!(
            "{steps} steps, {} contact-free: palindromic {palindromic}, peak at step 51 {peak_ok}, (0,0) labels {labels_ok}, traces of length {steps} for {} methods {traces_ok}",
            free.len(),
            report.methods.len()
        ),
    )
}

/// Criteria named on the command line (`-- 1 4 7`), or all of them.
fn selected() -> Vec<u32> {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=9).collect()
    } else {
        picked
    }
}

fn main() {
    let wanted = selected();
    let mut failed = 0;
    let mut run = |id: u32, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted.contains(&id) {
            return;
        }
        let started = Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS  criterion {id}: {name}: {msg} [{secs:.1} s]"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  criterion {id}: {name}: {msg} [{secs:.1} s]");
            }
        }
    };

    run(1, "gradient correctness", &mut gradients);
    run(2, "model-based round trip", &mut model_based_round_trip);
    run(3, "triad inversion", &mut triad_inversion);
    run(4, "force codec", &mut force_codec);

    let needs_corpus = wanted.iter().any(|c| [5, 6, 8].contains(c));
    let data = needs_corpus.then(|| {
        let t = Instant::now();
        let d = static_corpus();
        println!("      corpus: {} train / {} test [{:.1} s]", d.train.samples.len(), d.test.len(), t.elapsed().as_secs_f64());
        d
    });
    let mut model = None;
    if let Some(data) = &data {
        run(5, "learning target", &mut || {
            let (outcome, m) = learning_target(data);
            model = m;
            outcome
        });
        run(6, "encoder ordering", &mut || encoder_ordering(data));
    }
    run(7, "determinism", &mut determinism);
    if let Some(data) = &data {
        run(8, "normalization invariants", &mut || normalization(data));
    }
    run(9, "dynamic protocol", &mut || dynamic_protocol(model.as_ref()));

    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all selected acceptance criteria passed");
}
