use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fbg_core::dataset::{
    fit_norm_stats, generate_dynamic, generate_static, load_dataset, save_dataset, split, Corpus, CorpusKind, Sample,
};
use fbg_core::eval::{render, run_dynamic_suite, run_static_suite, Estimator, MetricsReport, ModelBased, ReportFormat};
use fbg_core::fbg::{baseline_frame, SensorLayout, StrainFrame};
use fbg_core::model_based::reconstruct as model_reconstruct;
use fbg_core::nn::{infer, train_with, EncoderKind, ModelParams, TrainHistory};
use fbg_core::{ContactForce, RodShape};

use crate::config::{RunConfig, DYNAMIC_FILE, TEST_FILE, TRAIN_FILE};
use crate::CliError;

fn model_file(kind: EncoderKind) -> String {
    format!("model_{}.fbgm", kind.name())
}

fn create_output_dir(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| CliError::config(format!("cannot create output directory {}: {e}", cfg.output_dir.display())))
}

fn require(path: &Path, hint: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::data(format!("missing {} (run `fbgsense {hint}` first)", path.display())))
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
}

pub fn gen(cfg: &RunConfig) -> Result<(), CliError> {
    let layout = cfg.layout.build()?;
    let ws = &cfg.workspace;
    let ds = &cfg.dataset;
    let st = &ds.static_config();
    create_output_dir(cfg)?;

    let samples = generate_static(st, ws, &layout)?;
    let (train, test) = split(&samples, ds.train_fraction, ds.split_seed)?;
    let stats = fit_norm_stats(&train, ws.force_range)?;
    let corpus = |samples: Vec<Sample>, stats| Corpus {
        kind: CorpusKind::Static,
        layout: layout.clone(),
        workspace: ws.clone(),
        seed: st.seed,
        noise: st.noise,
        stiffness: st.stiffness,
        force_sigma: st.force_sigma,
        samples,
        stats,
    };
    let (n_train, n_test) = (train.len(), test.len());
    save_dataset(&corpus(train, Some(stats)), cfg.path(TRAIN_FILE))?;
    save_dataset(&corpus(test, None), cfg.path(TEST_FILE))?;
    println!("static: {n_train} train / {n_test} test samples, seed {}", st.seed);

    let dy = &cfg.dynamic;
    let mut samples = Vec::new();
    for sc in dy.scenarios(st.stiffness, st.force_sigma) {
        samples.extend(generate_dynamic(&sc, ws, &layout)?);
    }
    if !samples.is_empty() {
        let n = samples.len();
        let dynamic = Corpus {
            kind: CorpusKind::Dynamic,
            layout: layout.clone(),
            workspace: ws.clone(),
            seed: dy.seed,
            noise: dy.noise,
            stiffness: st.stiffness,
            force_sigma: st.force_sigma,
            samples,
            stats: None,
        };
        save_dataset(&dynamic, cfg.path(DYNAMIC_FILE))?;
        println!("dynamic: {} scenarios, {n} samples, seed {}", dy.initial_angles_deg.len(), dy.seed);
    }
    Ok(())
}

fn history_csv(history: &TrainHistory, seed: u64) -> String {
    let mut out = String::from("seed,epoch,train_total,train_shape,train_force,train_magnitude,validation\n");
    for e in &history.epochs {
        writeln!(
            out,
            "{seed},{},{},{},{},{},{}",
            e.epoch, e.train.total, e.train.shape, e.train.force, e.train.magnitude, e.validation
        )
        .unwrap();
    }
    out
}

pub fn train(cfg: &RunConfig, kind: EncoderKind) -> Result<(), CliError> {
    let path = cfg.path(TRAIN_FILE);
    require(&path, "gen")?;
    let corpus = load_dataset(&path)?;
    let tc = cfg.train.build(corpus.force_sigma)?;
    let (model, history) = train_with(&corpus, kind, &tc, |e| {
        eprintln!("epoch {:>4}  train {:.4e}  validation {:.4e}", e.epoch, e.train.total, e.validation);
    })?;
    model.save(cfg.path(&model_file(kind)))?;
    write(&cfg.path(&format!("loss_{}.csv", kind.name())), &history_csv(&history, tc.seed))?;
    println!("{kind}: kept epoch {} of {}, seed {}", history.best_epoch, tc.epochs, tc.seed);
    Ok(())
}

enum Method {
    ModelBased,
    Network(EncoderKind),
}

fn parse_method(name: &str) -> Result<Method, CliError> {
    match name.trim() {
        "model" | "model-based" => Ok(Method::ModelBased),
        other => other
            .parse()
            .map(Method::Network)
            .map_err(|_| CliError::config(format!("unknown method {other:?} (expected model, fc, lstm or conv1d)"))),
    }
}

fn load_model(cfg: &RunConfig, kind: EncoderKind) -> Result<ModelParams, CliError> {
    let path = cfg.path(&model_file(kind));
    require(&path, &format!("train --encoder {}", kind.name()))?;
    Ok(ModelParams::load(&path)?)
}

fn write_reports(cfg: &RunConfig, tag: &str, report: &MetricsReport, seeds: &str) -> Result<(), CliError> {
    let text = format!("{seeds}\n{}", render(report, ReportFormat::Text));
    write(&cfg.path(&format!("report_{tag}.txt")), &text)?;
    write(&cfg.path(&format!("report_{tag}.csv")), &render(report, ReportFormat::Csv))?;
    write(&cfg.path(&format!("trace_{tag}.csv")), &render(report, ReportFormat::PlotData))?;
    print!("{text}");
    Ok(())
}

pub fn eval(cfg: &RunConfig, methods: Option<&[String]>) -> Result<(), CliError> {
    let names = methods.unwrap_or(&cfg.eval.methods);
    if names.is_empty() {
        return Err(CliError::config("no methods selected"));
    }
    let test_path = cfg.path(TEST_FILE);
    require(&test_path, "gen")?;
    let test = load_dataset(&test_path)?;

    let mut models = Vec::new();
    let mut model_based = None;
    for name in names {
        match parse_method(name)? {
            Method::ModelBased => model_based = Some(ModelBased::new(test.layout.clone())?),
            Method::Network(kind) => models.push(load_model(cfg, kind)?),
        }
    }
    let mut estimators: Vec<&dyn Estimator> = Vec::new();
    if let Some(m) = &model_based {
        estimators.push(m);
    }
    estimators.extend(models.iter().map(|m| m as &dyn Estimator));

    let model_seeds: Vec<String> = models.iter().map(|m| format!("{}={}", m.kind.name(), m.config.seed)).collect();
    let seeds = |corpus: &Corpus| {
        let mut s = format!("dataset seed {}", corpus.seed);
        if !model_seeds.is_empty() {
            write!(s, "; training seeds {}", model_seeds.join(", ")).unwrap();
        }
        s
    };

    let report = run_static_suite(&test.samples, &test.layout, &estimators)?;
    write_reports(cfg, "static", &report, &seeds(&test))?;

    let dyn_path = cfg.path(DYNAMIC_FILE);
    if dyn_path.is_file() {
        let dynamic = load_dataset(&dyn_path)?;
        let mut scenarios: BTreeMap<u64, Vec<Sample>> = BTreeMap::new();
        for s in &dynamic.samples {
            scenarios.entry(s.scenario).or_default().push(s.clone());
        }
        let scenarios: Vec<Vec<Sample>> = scenarios.into_values().collect();
        let report = run_dynamic_suite(&scenarios, &dynamic.layout, &estimators)?;
        println!();
        write_reports(cfg, "dynamic", &report, &seeds(&dynamic))?;
    }
    Ok(())
}

/// Strain values, one per line. Blank lines and `#` comments are skipped.
pub fn read_frame(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|_| CliError::data(format!("{}:{}: not a number: {l:?}", path.display(), i + 1)))
        })
        .collect()
}

fn frame(values: Vec<f64>, layout: &SensorLayout, what: &Path) -> Result<StrainFrame, CliError> {
    if values.len() != layout.node_count {
        return Err(CliError::data(format!(
            "{} holds {} values, the layout has {} samples",
            what.display(),
            values.len(),
            layout.node_count
        )));
    }
    Ok(StrainFrame::new(values, 0)?)
}

fn shape_csv(method: &str, shape: &RodShape, force: Option<ContactForce>) -> String {
    let mut out = format!("method,{method}\n");
    match force {
        Some(f) => writeln!(out, "force_active,{}\nforce_n,{}\nlocation_m,{}", f.active as u8, f.magnitude, f.location).unwrap(),
        None => out.push_str("force_active,NA\nforce_n,NA\nlocation_m,NA\n"),
    }
    out.push_str("\nnode,arc_length_m,x_m,y_m,z_m,curvature_per_m,twist_rad\n");
    let s = shape.arc_lengths();
    for (i, p) in shape.positions().iter().enumerate() {
        let (k, t) = match i.checked_sub(1) {
            Some(j) => (shape.curvatures()[j].to_string(), shape.twists()[j].to_string()),
            None => ("NA".into(), "NA".into()),
        };
        writeln!(out, "{i},{},{},{},{},{k},{t}", s[i], p.x, p.y, p.z).unwrap();
    }
    out
}

pub fn reconstruct(
    cfg: &RunConfig,
    input: &Path,
    baseline: Option<&Path>,
    method: &str,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let values = read_frame(input)?;
    let base_values = baseline.map(read_frame).transpose()?;
    let (shape, force) = match parse_method(method)? {
        Method::ModelBased => {
            let layout = cfg.layout.build()?;
            let f = frame(values, &layout, input)?;
            let b = match (base_values, baseline) {
                (Some(v), Some(p)) => frame(v, &layout, p)?,
                _ => baseline_frame(&layout)?,
            };
            (model_reconstruct(&f, &b, &layout)?, None)
        }
        Method::Network(kind) => {
            let model = load_model(cfg, kind)?;
            let mut f = frame(values, &model.layout, input)?;
            if let (Some(v), Some(p)) = (base_values, baseline) {
                // express the frame relative to the straight rod the model was trained on
                let b = frame(v, &model.layout, p)?;
                let sim = baseline_frame(&model.layout)?;
                for ((x, b), s) in f.strains.iter_mut().zip(&b.strains).zip(&sim.strains) {
                    *x += s - b;
                }
            }
            let (shape, force) = infer(&f, &model)?;
            (shape, Some(force))
        }
    };
    let name = match parse_method(method)? {
        Method::ModelBased => "model-based".to_string(),
        Method::Network(k) => k.name().to_string(),
    };
    let path: PathBuf = match output {
        Some(p) => p.to_path_buf(),
        None => {
            create_output_dir(cfg)?;
            cfg.path("reconstruction.csv")
        }
    };
    write(&path, &shape_csv(&name, &shape, force))?;
    let tip = shape.tip();
    println!("tip ({:.6}, {:.6}, {:.6}) m -> {}", tip.x, tip.y, tip.z, path.display());
    Ok(())
}
