use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use fraclap::estimator::{generate_training_set, TrainingSet};
use fraclap::nn::{train as fit, Checkpoint, CheckpointMeta, Mlp};
use fraclap::problems::{evaluate_model, example, MetricReport, ProblemSpec};
use fraclap::sampler::{ExitRadiusLaw, InnerRadiusSampler, RngStream, DEFAULT_NEWTON_START};
use fraclap::stats::{ks_critical_1pct, ks_distance};

use crate::config::{CommonArgs, RunConfig};
use crate::error::CliError;
use crate::output::{file_sha256, read_manifest, RunOutput};
use crate::EvalArgs;

/// Stream of the evaluation points.
const EVAL_STREAM: u64 = 3;
const PROFILE_POINTS: usize = 5000;

pub fn sample(common: &CommonArgs, n: usize) -> Result<(), CliError> {
    let cfg = RunConfig::resolve("sample", common)?.with_extra("samples", n);
    if n == 0 {
        return Err(CliError::Config("--samples must be at least 1".into()));
    }
    let p = cfg.params()?;
    let mut out = RunOutput::create(&cfg)?;
    let exit = ExitRadiusLaw::new(&p);
    let inner = InnerRadiusSampler::new(&p, DEFAULT_NEWTON_START, cfg.nr_delta)?;

    let mut rng = RngStream::new(cfg.seed, 1);
    let excess: Vec<f64> = (0..n)
        .map(|_| exit.inverse_cdf_excess(rng.uniform()))
        .collect::<Result<_, _>>()?;
    let mut rng = RngStream::new(cfg.seed, 2);
    let radii: Vec<f64> = (0..n)
        .map(|_| inner.sample(&mut rng).map(|d| d.radius))
        .collect::<Result<_, _>>()?;

    let mut body = String::from("index,exit_radius,exit_excess,inner_radius\n");
    for (i, (e, r)) in excess.iter().zip(&radii).enumerate() {
        writeln!(body, "{i},{},{e},{r}", 1.0 + e).unwrap();
    }
    out.csv("samples.csv", &body)?;

    // the exit law is compared in the excess coordinate, which resolves r near 1
    let ks_exit = ks_distance(&mut excess.clone(), |e| exit.cdf_excess(e).unwrap_or(f64::NAN));
    let ks_inner = ks_distance(&mut radii.clone(), |r| inner.law().cdf(r).unwrap_or(f64::NAN));
    let crit = ks_critical_1pct(n);
    let mut body = String::from("law,d,alpha,n,ks,critical_1pct\n");
    for (law, ks) in [("exit_radius", ks_exit), ("inner_radius", ks_inner)] {
        writeln!(body, "{law},{},{},{n},{ks},{crit}", cfg.dim, cfg.alpha).unwrap();
    }
    out.csv("ks_report.csv", &body)?;
    eprintln!("KS distance: exit radius {ks_exit:.5}, inner radius {ks_inner:.5} (1% critical value {crit:.5})");
    out.finish(&cfg)?;
    Ok(())
}

fn problem(cfg: &RunConfig) -> Result<ProblemSpec, CliError> {
    Ok(example(cfg.example, cfg.params()?)?)
}

fn make_dataset(cfg: &RunConfig, sampling_radius: f64) -> Result<TrainingSet, CliError> {
    let prob = problem(cfg)?;
    Ok(generate_training_set(
        &prob,
        cfg.points,
        &cfg.estimator(),
        sampling_radius,
        cfg.seed,
    )?)
}

fn dataset_csv(ts: &TrainingSet) -> String {
    let mut buf = Vec::new();
    ts.write_csv(&mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is ASCII")
}

pub fn dataset(common: &CommonArgs, sampling_radius: f64) -> Result<(), CliError> {
    let cfg = RunConfig::resolve("dataset", common)?.with_extra("sampling_radius", sampling_radius);
    let mut out = RunOutput::create(&cfg)?;
    let ts = make_dataset(&cfg, sampling_radius)?;
    let path = out.csv("dataset.csv", &dataset_csv(&ts))?;
    eprintln!("wrote {} pairs to {}", ts.len(), path.display());
    out.finish(&cfg)?;
    Ok(())
}

fn read_dataset(path: &Path) -> Result<TrainingSet, CliError> {
    let file = File::open(path).map_err(CliError::io(path))?;
    TrainingSet::read_csv(BufReader::new(file)).map_err(|e| match e {
        fraclap::Error::Parse { line, message } => {
            CliError::Config(format!("{}: line {line}: {message}", path.display()))
        }
        other => other.into(),
    })
}

fn checkpoint_meta(cfg: &RunConfig, points: usize, hash: &str) -> CheckpointMeta {
    CheckpointMeta {
        d: cfg.dim,
        alpha: cfg.alpha,
        example: cfg.example,
        seed: cfg.seed,
        n_iter: cfg.n_iter,
        loss: cfg.train().loss,
        paths: cfg.paths,
        points,
        batch: cfg.batch,
        gamma: cfg.gamma,
        manifest_hash: Some(hash.to_string()),
    }
}

fn train_model(cfg: &RunConfig, ts: &TrainingSet) -> Result<(Mlp, Vec<f64>), CliError> {
    if ts.dim() != cfg.dim {
        return Err(CliError::Config(format!(
            "dataset has dimension {}, run is configured for {}",
            ts.dim(),
            cfg.dim
        )));
    }
    if cfg.batch > ts.len() {
        return Err(CliError::Config(format!(
            "batch size {} exceeds the {} training pairs",
            cfg.batch,
            ts.len()
        )));
    }
    let outcome = fit(ts, &cfg.train())?;
    Ok((outcome.model, outcome.loss_trace))
}

/// Paths per point recorded by the run that wrote `path`, checking that the
/// dataset belongs to the configured problem.
fn dataset_paths(path: &Path, data_hash: &str, cfg: &RunConfig) -> Result<Option<usize>, CliError> {
    let manifest = path.with_file_name("dataset.manifest.json");
    if !manifest.exists() {
        return Ok(None);
    }
    let stored = read_manifest(&manifest)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    if stored.artifacts.get(name).map(String::as_str) != Some(data_hash) {
        return Ok(None);
    }
    let c = &stored.config;
    let same = c["example"] == cfg.example && c["dim"] == cfg.dim && c["alpha"].as_f64() == Some(cfg.alpha);
    if !same {
        return Err(CliError::Config(format!(
            "{} was generated for example {} at d = {}, alpha = {}; run is configured for example {} at d = {}, alpha = {}",
            path.display(),
            c["example"],
            c["dim"],
            c["alpha"],
            cfg.example,
            cfg.dim,
            cfg.alpha
        )));
    }
    Ok(c["paths"].as_u64().map(|m| m as usize))
}

pub fn train(common: &CommonArgs, dataset: Option<PathBuf>) -> Result<(), CliError> {
    let path = dataset.unwrap_or_else(|| common.out.join("dataset.csv"));
    let data_hash = file_sha256(&path)?;
    let mut cfg = RunConfig::resolve("train", common)?.with_extra("dataset_sha256", &data_hash);
    if let Some(m) = dataset_paths(&path, &data_hash, &cfg)? {
        cfg.paths = m;
    }
    let ts = read_dataset(&path)?;
    let mut out = RunOutput::create(&cfg)?;
    let (model, trace) = train_model(&cfg, &ts)?;
    let meta = checkpoint_meta(&cfg, ts.len(), out.hash());
    let json = serde_json::to_vec_pretty(&Checkpoint::new(&model, meta)).expect("checkpoint serializes");
    let ckpt = out.file("checkpoint.json", &json)?;
    let mut body = String::from("iter,loss\n");
    for (i, l) in trace.iter().enumerate() {
        writeln!(body, "{},{l}", i + 1).unwrap();
    }
    out.csv("loss_trace.csv", &body)?;
    match trace.last() {
        Some(l) => eprintln!("final batch loss {l:.4e}; checkpoint {}", ckpt.display()),
        None => eprintln!("no iterations run; checkpoint {}", ckpt.display()),
    }
    out.finish(&cfg)?;
    Ok(())
}

/// Loads a checkpoint and refuses it when it disagrees with the run
/// configuration or with the manifest written next to it.
fn load_checkpoint(path: &Path, cfg: &RunConfig) -> Result<(Mlp, CheckpointMeta), CliError> {
    let ckpt = Checkpoint::load(path).map_err(|e| match e {
        fraclap::Error::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CliError::Config(format!("{}: {other}", path.display())),
    })?;
    let meta = ckpt.meta.clone();
    if meta.d != cfg.dim || ckpt.layer_dims.first() != Some(&cfg.dim) {
        return Err(CliError::Config(format!(
            "checkpoint is for dimension {}, run is configured for {}",
            meta.d, cfg.dim
        )));
    }
    if meta.example != cfg.example || meta.alpha != cfg.alpha {
        return Err(CliError::Config(format!(
            "checkpoint is for example {} at alpha {}, run is configured for example {} at alpha {}",
            meta.example, meta.alpha, cfg.example, cfg.alpha
        )));
    }
    let manifest = path.with_file_name("train.manifest.json");
    if let (Some(hash), true) = (&meta.manifest_hash, manifest.exists()) {
        let stored = read_manifest(&manifest)?;
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let recorded = stored.artifacts.get(name);
        if &stored.manifest_sha256 != hash || recorded.is_some_and(|h| *h != file_sha256(path).unwrap_or_default()) {
            return Err(CliError::Config(format!(
                "{} does not match the manifest {}",
                path.display(),
                manifest.display()
            )));
        }
    }
    Ok((ckpt.model()?, meta))
}

fn metrics_csv(rows: &[(&CheckpointMeta, MetricReport, f64)]) -> String {
    let mut body = String::from("example,d,alpha,M,P,L,n_iter,gamma,mse,mre,n_excluded,elapsed_seconds\n");
    for (m, r, secs) in rows {
        writeln!(
            body,
            "{},{},{},{},{},{},{},{},{},{},{},{secs}",
            m.example, m.d, m.alpha, m.paths, m.points, m.batch, m.n_iter, m.gamma, r.mse, r.mre, r.n_excluded
        )
        .unwrap();
    }
    body
}

fn score(model: &Mlp, prob: &ProblemSpec, eval: &EvalArgs, seed: u64) -> Result<MetricReport, CliError> {
    if eval.eval_points == 0 || !(eval.eval_radius > 0.0) {
        return Err(CliError::Config(
            "evaluation needs a positive point count and radius".into(),
        ));
    }
    let mut rng = RngStream::new(seed, EVAL_STREAM);
    Ok(evaluate_model(
        model,
        prob,
        eval.eval_points,
        eval.eval_radius,
        &mut rng,
    )?)
}

fn profile_csv(model: &Mlp, prob: &ProblemSpec) -> Result<String, CliError> {
    let d = prob.dim();
    let end = 1.0 / (d as f64).sqrt() + 0.1;
    let ts: Vec<f64> = (0..PROFILE_POINTS)
        .map(|k| end * k as f64 / (PROFILE_POINTS - 1) as f64)
        .collect();
    let points: Vec<Vec<f64>> = ts.iter().map(|&t| vec![t; d]).collect();
    let pred = model.predict_rows(&points)?;
    let mut body = String::from("t,model,exact\n");
    for ((t, x), y) in ts.iter().zip(&points).zip(&pred) {
        writeln!(body, "{t},{y},{}", prob.exact_at(x)?).unwrap();
    }
    Ok(body)
}

// slice x_1 = ... = x_{d-1} = a, x_d = b over [-1, 1]^2
fn surface_csv(model: &Mlp, prob: &ProblemSpec, grid: usize) -> Result<String, CliError> {
    if grid < 2 {
        return Err(CliError::Config("--grid must be at least 2".into()));
    }
    let d = prob.dim();
    let axis: Vec<f64> = (0..grid).map(|i| -1.0 + 2.0 * i as f64 / (grid - 1) as f64).collect();
    let mut points = Vec::with_capacity(grid * grid);
    for &a in &axis {
        for &b in &axis {
            let mut x = vec![a; d];
            x[d - 1] = b;
            points.push(x);
        }
    }
    let pred = model.predict_rows(&points)?;
    let mut body = String::from("a,b,model,exact\n");
    for (x, y) in points.iter().zip(&pred) {
        let exact = match prob.exact_at(x) {
            Ok(v) => v.to_string(),
            Err(_) => "NaN".into(),
        };
        writeln!(body, "{},{},{y},{exact}", x[0], x[d - 1]).unwrap();
    }
    Ok(body)
}

pub fn evaluate(common: &CommonArgs, eval: &EvalArgs, checkpoint: Option<PathBuf>) -> Result<(), CliError> {
    let path = checkpoint.unwrap_or_else(|| common.out.join("checkpoint.json"));
    let cfg = RunConfig::resolve("evaluate", common)?
        .with_extra("checkpoint_sha256", file_sha256(&path)?)
        .with_extra("eval_points", eval.eval_points)
        .with_extra("eval_radius", eval.eval_radius)
        .with_extra("grid", eval.grid);
    let (model, meta) = load_checkpoint(&path, &cfg)?;
    let prob = problem(&cfg)?;
    let mut out = RunOutput::create(&cfg)?;
    let start = Instant::now();
    let report = score(&model, &prob, eval, cfg.seed)?;
    let secs = start.elapsed().as_secs_f64();
    out.csv("metrics.csv", &metrics_csv(&[(&meta, report, secs)]))?;
    out.csv("profile.csv", &profile_csv(&model, &prob)?)?;
    out.csv("surface.csv", &surface_csv(&model, &prob, eval.grid)?)?;
    eprintln!(
        "mse {:.4e}, mre {:.4e} over {} points ({} excluded from mre)",
        report.mse, report.mre, report.n_points, report.n_excluded
    );
    out.finish(&cfg)?;
    Ok(())
}

struct Cell {
    alpha: f64,
    m: usize,
    p: usize,
    result: Result<MetricReport, CliError>,
    seconds: f64,
}

fn run_cell(cfg: &RunConfig, eval: &EvalArgs) -> Result<MetricReport, CliError> {
    let ts = make_dataset(cfg, fraclap::estimator::DEFAULT_SAMPLING_RADIUS)?;
    let (model, _) = train_model(cfg, &ts)?;
    score(&model, &problem(cfg)?, eval, cfg.seed)
}

pub fn sweep(
    common: &CommonArgs,
    eval: &EvalArgs,
    m_list: &[usize],
    p_list: &[usize],
    alpha_list: &[f64],
) -> Result<(), CliError> {
    let base = RunConfig::resolve("sweep", common)?;
    let alphas = if alpha_list.is_empty() {
        vec![base.alpha]
    } else {
        alpha_list.to_vec()
    };
    if m_list.is_empty() || p_list.is_empty() {
        return Err(CliError::Config("--m-list and --p-list must not be empty".into()));
    }
    let cfg = base
        .clone()
        .with_extra("m_list", m_list)
        .with_extra("p_list", p_list)
        .with_extra("alpha_list", &alphas)
        .with_extra("eval_points", eval.eval_points)
        .with_extra("eval_radius", eval.eval_radius);
    for &alpha in &alphas {
        RunConfig { alpha, ..base.clone() }.params()?;
    }
    let mut out = RunOutput::create(&cfg)?;
    let mut cells = Vec::new();
    for &alpha in &alphas {
        for &m in m_list {
            for &p in p_list {
                let cell_cfg = RunConfig {
                    alpha,
                    paths: m,
                    points: p,
                    batch: base.batch.min(p),
                    ..base.clone()
                };
                let start = Instant::now();
                let result = run_cell(&cell_cfg, eval);
                let seconds = start.elapsed().as_secs_f64();
                match &result {
                    Ok(r) => eprintln!("alpha {alpha} M {m} P {p}: mse {:.4e} [{seconds:.1} s]", r.mse),
                    Err(e) => eprintln!("alpha {alpha} M {m} P {p}: failed: {e}"),
                }
                cells.push(Cell {
                    alpha,
                    m,
                    p,
                    result,
                    seconds,
                });
            }
        }
    }

    let mut timing = String::from("alpha,M");
    for p in p_list {
        write!(timing, ",P_{p}").unwrap();
    }
    timing.push('\n');
    for row in cells.chunks(p_list.len()) {
        write!(timing, "{},{}", row[0].alpha, row[0].m).unwrap();
        for c in row {
            write!(timing, ",{}", c.seconds).unwrap();
        }
        timing.push('\n');
    }
    out.csv("timing.csv", &timing)?;

    let mut errors = String::from("alpha,M,P,mse,mre,n_excluded,status\n");
    for c in &cells {
        match &c.result {
            Ok(r) => writeln!(
                errors,
                "{},{},{},{},{},{},ok",
                c.alpha, c.m, c.p, r.mse, r.mre, r.n_excluded
            ),
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                writeln!(errors, "{},{},{},NaN,NaN,NaN,{msg}", c.alpha, c.m, c.p)
            }
        }
        .unwrap();
    }
    out.csv("errors.csv", &errors)?;
    out.finish(&cfg)?;
    Ok(())
}
