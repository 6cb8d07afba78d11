use std::fs;
use std::path::{Path, PathBuf};

use mpm_hybrid::dataset::{generate_dataset, DatasetManifest, DatasetPlan, SceneStatus};
use mpm_hybrid::fields::PressureTensors;
use mpm_hybrid::hybrid::{
    self, ExactPredictor, HybridConfig, Phase, Predictor, PreviousFramePredictor, SurrogatePredictor, TrajectoryStatus,
    ZeroPredictor,
};
use mpm_hybrid::metrics::{mean_after, psnr_tensors};
use mpm_hybrid::mpm::{SceneConfig, SceneTemplate};
use mpm_hybrid::nn::{checkpoint, LossKind, ModelConfig, SurrogateModel, TrainConfig, Trainer};
use serde::{Deserialize, Serialize};

use crate::{parse, read_config, CliResult, Evaluate, Failure, GenData, Inspect, Simulate, Train};

fn usage(e: mpm_hybrid::Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(mpm_hybrid::Error::from)?;
    fs::write(path, text).map_err(mpm_hybrid::Error::from)?;
    Ok(())
}

pub fn gen_data(a: &GenData, seed: Option<u64>, config: Option<&Path>) -> CliResult {
    let mut plan = match config {
        Some(p) => read_config(p)?,
        None if a.paper => DatasetPlan::paper(),
        None => DatasetPlan::default(),
    };
    if let Some(t) = &a.templates {
        plan.templates = t.iter().map(|s| parse::<SceneTemplate>(s)).collect::<CliResult<_>>()?;
    }
    if let Some(v) = a.scenes_per_template {
        plan.scenes_per_template = v;
    }
    if let Some(v) = a.frames {
        plan.frames = v;
    }
    if let Some(v) = a.resolution {
        plan.resolution = v;
    }
    if let Some(v) = a.solids {
        plan.solid_count = v;
    }
    if let Some(v) = a.density {
        plan.solid_density = v;
    }
    if let Some(s) = seed {
        plan.seed = s;
    }
    plan.validate().map_err(usage)?;

    log::info!(
        "generating {} scenes x {} frames at {}^3 into {}",
        plan.num_scenes(),
        plan.frames,
        plan.resolution,
        a.out.display()
    );
    let manifest = generate_dataset(&plan.scenes(), plan.frames, &a.out)?;
    write_json(&a.out.join("plan.json"), &plan)?;
    let failed: Vec<&str> = manifest
        .scenes
        .iter()
        .filter(|s| s.status != SceneStatus::Ok)
        .map(|s| s.name.as_str())
        .collect();
    println!(
        "{} scenes, {} frames written to {}",
        manifest.scenes.len(),
        manifest.scenes.iter().map(|s| s.frames).sum::<usize>(),
        a.out.display()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Runtime(format!("scenes failed: {}", failed.join(", "))))
    }
}

pub fn train(a: &Train, seed: Option<u64>, config: Option<&Path>) -> CliResult {
    let mut cfg: TrainConfig = match config {
        Some(p) => read_config(p)?,
        None => TrainConfig::default(),
    };
    if let Some(v) = a.iters {
        cfg.max_iterations = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = &a.loss {
        cfg.loss = parse::<LossKind>(v)?;
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(usage)?;

    let manifest = DatasetManifest::load(&a.data)?;
    manifest.verify(&a.data)?;
    let data = manifest.load_sequences(&a.data)?;
    let model = SurrogateModel::new(ModelConfig {
        window: cfg.window,
        seed: cfg.seed,
        ..ModelConfig::default()
    })
    .map_err(usage)?;
    log::info!(
        "training {} parameters on {} sequences for {} iterations",
        model.num_parameters(),
        data.len(),
        cfg.max_iterations
    );
    let mut trainer = Trainer::new(model, data, cfg.clone()).map_err(usage)?;
    fs::create_dir_all(&a.out).map_err(mpm_hybrid::Error::from)?;
    write_json(&a.out.join("train.json"), &cfg)?;
    trainer.run(Some(&a.out))?;
    let first = trainer.losses.first().copied().unwrap_or(f64::NAN);
    let last = trainer.losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "{} iterations, loss {first:.4e} -> {last:.4e}, model at {}",
        trainer.iteration,
        a.out.join("model.mpmw").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scene: &'a str,
    complete: bool,
    failure: Option<String>,
    frames: usize,
    physical_iterations: usize,
    predicted_iterations: usize,
    max_residual: f64,
    max_div: f64,
}

fn simulate_config(a: &Simulate, seed: Option<u64>, config: Option<&Path>) -> CliResult<HybridConfig> {
    let mut hc = match config {
        Some(p) => {
            let value: serde_json::Value = read_config(p)?;
            let invalid = |e: serde_json::Error| Failure::Usage(format!("invalid config {}: {e}", p.display()));
            if value.get("scene").is_some() {
                serde_json::from_value::<HybridConfig>(value).map_err(invalid)?
            } else {
                let scene: SceneConfig = serde_json::from_value(value).map_err(invalid)?;
                HybridConfig {
                    n_physical: a.frames,
                    m_predicted: 0,
                    refine_tol: 1e-3,
                    refine_solver: mpm_hybrid::solvers::SolverKind::GaussSeidel,
                    model: None,
                    scene,
                }
            }
        }
        None => {
            let template = parse::<SceneTemplate>(&a.template)?;
            HybridConfig {
                n_physical: a.frames,
                m_predicted: 0,
                refine_tol: 1e-3,
                refine_solver: mpm_hybrid::solvers::SolverKind::GaussSeidel,
                model: None,
                scene: template.build(a.resolution, seed.unwrap_or(0), a.solids, a.density),
            }
        }
    };
    if let Some(s) = &a.solver {
        hc.scene.solver = parse(s)?;
    }
    if let Some(t) = a.tol {
        hc.scene.tol = t;
    }
    if let Some(n) = a.physical {
        if n > a.frames {
            return Err(Failure::Usage(format!("--physical {n} exceeds --frames {}", a.frames)));
        }
        hc.n_physical = n;
        hc.m_predicted = a.frames - n;
    }
    if let Some(m) = &a.model {
        hc.model = Some(m.clone());
    }
    if let Some(t) = a.refine_tol {
        hc.refine_tol = t;
    }
    if let Some(s) = &a.refine_solver {
        hc.refine_solver = parse(s)?;
    }
    Ok(hc)
}

fn predictor(name: Option<&str>, model: Option<&PathBuf>, predicted: usize) -> CliResult<Box<dyn Predictor>> {
    let name = match (name, model) {
        (Some(n), _) => n,
        (None, Some(_)) => "surrogate",
        (None, None) if predicted > 0 => {
            return Err(Failure::Usage("predicted frames need --model or --predictor".into()));
        }
        (None, None) => "zero",
    };
    Ok(match name {
        "surrogate" => {
            let path = model.ok_or_else(|| Failure::Usage("the surrogate predictor needs --model".into()))?;
            let (model, _) = checkpoint::load(path)?;
            Box::new(SurrogatePredictor { model })
        }
        "previous" => Box::new(PreviousFramePredictor),
        "zero" => Box::new(ZeroPredictor),
        "exact" => Box::new(ExactPredictor),
        other => return Err(Failure::Usage(format!("unknown predictor '{other}'"))),
    })
}

pub fn simulate(a: &Simulate, seed: Option<u64>, config: Option<&Path>) -> CliResult {
    let hc = simulate_config(a, seed, config)?;
    let mut p = predictor(a.predictor.as_deref(), hc.model.as_ref(), hc.m_predicted)?;
    hc.validate(p.window()).map_err(usage)?;
    log::info!(
        "scene {}: {} physical + {} predicted frames",
        hc.scene.name,
        hc.n_physical,
        hc.m_predicted
    );
    let traj = hybrid::run(&hc, p.as_mut())?;
    traj.write(&a.out)?;
    write_json(&a.out.join("config.json"), &hc)?;
    let failure = match &traj.status {
        TrajectoryStatus::Complete => None,
        TrajectoryStatus::Failed { message, .. } => Some(message.clone()),
    };
    let summary = RunSummary {
        scene: &hc.scene.name,
        complete: traj.is_complete(),
        failure: failure.clone(),
        frames: traj.records.len(),
        physical_iterations: traj.total_iterations(Phase::Physical),
        predicted_iterations: traj.total_iterations(Phase::Predicted),
        max_residual: traj.records.iter().map(|r| r.residual).fold(0.0, f64::max),
        max_div: traj.records.iter().map(|r| r.div_max).fold(0.0, f64::max),
    };
    write_json(&a.out.join("summary.json"), &summary)?;
    println!(
        "{} frames written to {} (solver iterations: physical {}, predicted {})",
        summary.frames,
        a.out.display(),
        summary.physical_iterations,
        summary.predicted_iterations
    );
    match failure {
        None => Ok(()),
        Some(msg) => Err(Failure::Runtime(msg)),
    }
}

#[derive(Deserialize)]
struct MetricsRow {
    frame: usize,
    div_max: f64,
    zeta: String,
}

fn read_metrics(dir: &Path) -> CliResult<Vec<MetricsRow>> {
    let path = dir.join("metrics.csv");
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut reader = csv::Reader::from_path(&path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn frame_files(dir: &Path) -> CliResult<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("frame_") && n.ends_with(".pgt"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Failure::Runtime(format!("no frame_*.pgt files in {}", dir.display())));
    }
    Ok(names)
}

#[derive(Serialize)]
struct FrameRow {
    frame: usize,
    psnr_f: Option<f64>,
    psnr_s: Option<f64>,
    psnr_i: Option<f64>,
    div_max: Option<f64>,
    zeta: Option<f64>,
}

#[derive(Serialize)]
struct EvalSummary {
    frames: usize,
    skip: usize,
    psnr_f: Option<f64>,
    psnr_s: Option<f64>,
    psnr_i: Option<f64>,
    div_max: Option<f64>,
    zeta: Option<f64>,
    per_frame: Vec<FrameRow>,
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// PSNR of the stored (normalized) tensors, frame by frame.
pub fn evaluate(a: &Evaluate) -> CliResult {
    let metrics = read_metrics(&a.pred)?;
    let mut rows = Vec::new();
    for name in frame_files(&a.truth)? {
        let truth = PressureTensors::load(&a.truth.join(&name))?;
        let pred_path = a.pred.join(&name);
        if !pred_path.exists() {
            return Err(Failure::Runtime(format!("{} has no {name}", a.pred.display())));
        }
        let pred = PressureTensors::load(&pred_path)?;
        let [f, s, i] = psnr_tensors(&truth, &pred)?;
        let frame = truth.frame_index as usize;
        let m = metrics.iter().find(|r| r.frame == frame);
        rows.push(FrameRow {
            frame,
            psnr_f: f,
            psnr_s: s,
            psnr_i: i,
            div_max: m.map(|r| r.div_max),
            zeta: m.and_then(|r| r.zeta.parse().ok()),
        });
    }
    println!("frame,psnr_f,psnr_s,psnr_i,div_max,zeta");
    for r in &rows {
        println!(
            "{},{},{},{},{},{}",
            r.frame,
            fmt(r.psnr_f),
            fmt(r.psnr_s),
            fmt(r.psnr_i),
            r.div_max.map_or("-".into(), |d| format!("{d:.4e}")),
            fmt(r.zeta)
        );
    }
    let mean = |get: fn(&FrameRow) -> Option<f64>| {
        let v: Vec<(usize, f64)> = rows.iter().filter_map(|r| get(r).map(|x| (r.frame, x))).collect();
        mean_after(&v, a.skip)
    };
    let summary = EvalSummary {
        frames: rows.len(),
        skip: a.skip,
        psnr_f: mean(|r| r.psnr_f),
        psnr_s: mean(|r| r.psnr_s),
        psnr_i: mean(|r| r.psnr_i),
        div_max: mean(|r| r.div_max),
        zeta: mean(|r| r.zeta),
        per_frame: Vec::new(),
    };
    println!(
        "mean over frames >= {}: psnr_f {} psnr_s {} psnr_i {} div_max {} zeta {}",
        a.skip,
        fmt(summary.psnr_f),
        fmt(summary.psnr_s),
        fmt(summary.psnr_i),
        summary.div_max.map_or("-".into(), |d| format!("{d:.4e}")),
        fmt(summary.zeta)
    );
    if let Some(out) = &a.out {
        write_json(out, &EvalSummary { per_frame: rows, ..summary })?;
    }
    Ok(())
}

pub fn inspect(a: &Inspect) -> CliResult {
    let path = &a.path;
    if path.is_dir() {
        let m = DatasetManifest::load(path)?;
        println!("{} v{} (normalized: {}) by {}", m.format, m.version, m.normalized, m.generator);
        for s in &m.scenes {
            let status = match &s.status {
                SceneStatus::Ok => "ok".to_string(),
                SceneStatus::Failed { frame, message } => format!("failed at frame {frame}: {message}"),
            };
            println!("  {:<16} {:>5} frames  {:?}  {status}", s.name, s.frames, s.resolution);
        }
        if a.verify {
            m.verify(path)?;
            let files: usize = m.scenes.iter().map(|s| s.files.len()).sum();
            println!("verified {files} files");
        }
        return Ok(());
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgt") => {
            let t = PressureTensors::load(path)?;
            println!("frame {} shape {:?} (grid {:?})", t.frame_index, t.shape(), t.grid_dims());
            let physical = t.clone().denormalized();
            for (k, name) in ["fluid", "solid", "interface"].iter().enumerate() {
                let c = t.channels()[k];
                let p = physical.channels()[k];
                let nz = c.iter().filter(|v| **v != 0.0).count();
                let range = |x: &[f32]| {
                    x.iter()
                        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
                };
                let (lo, hi) = range(c);
                let (plo, phi) = range(p);
                println!("  {name:<9} nonzero {nz:>6}  normalized [{lo:.4}, {hi:.4}]  pressure [{plo:.4e}, {phi:.4e}]");
            }
            Ok(())
        }
        Some("mpmw") => {
            let (model, iteration) = checkpoint::load(path)?;
            println!("iteration {iteration}, {} parameters", model.num_parameters());
            println!(
                "{}",
                serde_json::to_string(&model.config).map_err(mpm_hybrid::Error::from)?
            );
            for p in model.params() {
                println!("  {:<14} {:?}", p.name, p.shape);
            }
            Ok(())
        }
        _ => Err(Failure::Usage(format!(
            "{}: expected a .pgt tensor, a .mpmw checkpoint or a dataset directory",
            path.display()
        ))),
    }
}
