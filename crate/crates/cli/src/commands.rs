use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use geom_deeponet::dataset::{
    generate_dataset, load_dataset, random_split, save_dataset, similarity, similarity_split, CaseRecord, Dataset,
    Split, SplitMode,
};
use geom_deeponet::evaluation::{
    aggregate_with, case_metrics, similarity_regression, timing_benchmark, CaseMetrics, Grouping, DEFAULT_PERCENTILES,
};
use geom_deeponet::geometry::{sample_design, sample_interior, ShapeFamily, TriMesh, Vec3};
use geom_deeponet::model::{load_model, save_model, Model};
use geom_deeponet::training::{load_train_checkpoint, save_train_checkpoint, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{finish, gen_config, load_object, set_opt, RunConfig};
use crate::error::CliError;
use crate::formats::{
    read_points, read_predictions, read_text, sidecar_path, vtk_point_cloud, write_json, write_text,
    ParamsFile, PredictionRecord, WithConfig,
};
use crate::{BenchArgs, EvalArgs, GenArgs, ModeArg, PredictArgs, SdfArgs, SplitArgs, TrainArgs};

pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.json";
pub const HISTORY_FILE: &str = "history.jsonl";
pub const TIMINGS_FILE: &str = "timings.jsonl";
pub const FINAL_MODEL_FILE: &str = "model_final.json";
pub const BEST_MODEL_FILE: &str = "model_best.json";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

/// Attempts at drawing a non-degenerate design for `bench`.
const BENCH_DESIGN_RETRIES: usize = 16;

fn pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))
}

fn read_split(path: &Path, ds: &Dataset) -> Result<Split, CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!("split file {} does not exist", path.display())));
    }
    let split: Split = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
    split.validate(ds)?;
    Ok(split)
}

fn open_dataset(path: &Path) -> Result<Dataset, CliError> {
    if !path.exists() {
        return Err(CliError::usage(format!("dataset {} does not exist", path.display())));
    }
    Ok(load_dataset(path)?)
}

fn model_family(model: &Model) -> Result<ShapeFamily, CliError> {
    model
        .stats()
        .map(|s| s.family)
        .ok_or_else(|| CliError::usage("model has no normalization stats; was it trained?"))
}

pub fn gen(a: GenArgs) -> Result<(), CliError> {
    let mut cfg = load_object(a.config.as_deref())?;
    set_opt(&mut cfg, "family", a.family.map(ShapeFamily::from))?;
    set_opt(&mut cfg, "count", a.count)?;
    set_opt(&mut cfg, "min_points", a.min_points)?;
    set_opt(&mut cfg, "max_points", a.max_points)?;
    set_opt(&mut cfg, "c", a.c)?;
    set_opt(&mut cfg, "seed", a.seed)?;
    let gc = gen_config(cfg)?;
    let ds = generate_dataset(&gc)?;
    save_dataset(&ds, &a.out)?;
    write_json(&a.out.join(EFFECTIVE_CONFIG_FILE), &gc)?;
    println!("wrote {} cases to {}", ds.len(), a.out.display());
    Ok(())
}

pub fn split(a: SplitArgs) -> Result<(), CliError> {
    let ds = open_dataset(&a.dataset)?;
    let s = match a.mode {
        ModeArg::Random => random_split(&ds, a.fraction, a.seed)?,
        ModeArg::Similarity => similarity_split(&ds, a.fraction)?,
    };
    write_json(&a.out, &s)?;
    println!("{} train / {} test -> {}", s.train.len(), s.test.len(), a.out.display());
    Ok(())
}

fn run_config(a: &TrainArgs) -> Result<RunConfig, CliError> {
    let mut cfg = load_object(a.config.as_deref())?;
    set_opt(&mut cfg, "dataset", a.dataset.as_ref())?;
    set_opt(&mut cfg, "split", a.split.as_ref())?;
    set_opt(&mut cfg, "output_dir", a.out.as_ref())?;
    set_opt(&mut cfg, "model.architecture", a.architecture)?;
    set_opt(&mut cfg, "model.preset", a.preset)?;
    set_opt(&mut cfg, "model.hidden", a.hidden)?;
    set_opt(&mut cfg, "model.seed", a.model_seed)?;
    set_opt(&mut cfg, "train.iterations", a.iterations)?;
    set_opt(&mut cfg, "train.batch_size", a.batch_size)?;
    set_opt(&mut cfg, "train.lr0", a.lr)?;
    set_opt(&mut cfg, "train.decay_coefficient", a.decay)?;
    set_opt(&mut cfg, "train.seed", a.seed)?;
    set_opt(&mut cfg, "train.resample_n", a.resample_n)?;
    set_opt(&mut cfg, "train.eval_every", a.eval_every)?;
    set_opt(&mut cfg, "checkpoint_every", a.checkpoint_every)?;
    let rc: RunConfig = finish(cfg, "train")?;
    rc.validate()?;
    Ok(rc)
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let rc = run_config(&a)?;
    let ds = open_dataset(&rc.dataset)?;
    if let Some(f) = rc.family.filter(|f| *f != ds.family) {
        return Err(CliError::usage(format!("config family {f} but dataset holds {}", ds.family)));
    }
    if let Some(c) = rc.c.filter(|c| *c != ds.c) {
        return Err(CliError::usage(format!("config c = {c} but dataset has c = {}", ds.c)));
    }
    let split = read_split(&rc.split, &ds)?;
    let train = ds.select(&split.train)?;
    let test = ds.select(&split.test)?;
    let out = &rc.output_dir;
    fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    write_json(&out.join(EFFECTIVE_CONFIG_FILE), &rc)?;

    let mut trainer = match &a.resume {
        Some(path) => Trainer::resume(load_train_checkpoint(path)?, &train, &test, rc.train.clone())?,
        None => {
            let cfg = rc.model.resolve(ds.family.n_params(), ds.c)?;
            Trainer::new(Model::init(cfg, rc.model.seed)?, &train, &test, rc.train.clone())?
        }
    };
    let total = rc.train.iterations;
    let every = rc.checkpoint_every.unwrap_or(total.max(1));
    while trainer.iteration() < total {
        let next = ((trainer.iteration() / every + 1) * every).min(total);
        trainer.run_until(next)?;
        save_train_checkpoint(&trainer.checkpoint(), &out.join(CHECKPOINT_FILE))?;
        log::info!("iteration {next}/{total}");
    }
    save_train_checkpoint(&trainer.checkpoint(), &out.join(CHECKPOINT_FILE))?;
    trainer.history().write_jsonl(&out.join(HISTORY_FILE))?;
    trainer.timings().write_jsonl(&out.join(TIMINGS_FILE))?;
    save_model(trainer.model(), &out.join(FINAL_MODEL_FILE))?;
    save_model(&trainer.best_model(), &out.join(BEST_MODEL_FILE))?;
    if let Some(last) = trainer.history().last() {
        println!(
            "iteration {}: train loss {:e}, test loss {}",
            last.iteration,
            last.train_loss,
            last.test_loss.map_or("n/a".into(), |v| format!("{v:e}"))
        );
    }
    Ok(())
}

fn write_vtk(dir: &Path, id: &str, points: &[Vec3], values: &[f64], c: usize) -> Result<(), CliError> {
    write_text(&dir.join(format!("{id}.vtk")), &vtk_point_cloud(id, points, values, c))
}

pub fn predict(a: PredictArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let family = model_family(&model)?;
    let c = model.c();
    let mut lines = String::new();
    if let Some(dir) = &a.dataset {
        let ds = open_dataset(dir)?;
        if ds.family != family {
            return Err(CliError::usage(format!("model was trained on {family}, dataset holds {}", ds.family)));
        }
        if ds.c != c {
            return Err(CliError::usage(format!("model predicts {c} components, dataset has {}", ds.c)));
        }
        let cases: Vec<&CaseRecord> = match &a.split {
            Some(path) => {
                let s = read_split(path, &ds)?;
                s.test.iter().filter_map(|id| ds.case(id)).collect()
            }
            None => ds.cases.iter().collect(),
        };
        let preds = pool(a.workers)?.install(|| {
            cases
                .par_iter()
                .map(|case| model.predict_case(case))
                .collect::<geom_deeponet::Result<Vec<_>>>()
        })?;
        for (case, p) in cases.iter().zip(&preds) {
            lines += &serde_json::to_string(&PredictionRecord::new(&case.id, family, c, p))?;
            lines.push('\n');
            if let Some(vtk) = &a.vtk {
                write_vtk(vtk, &case.id, &case.points, p, c)?;
            }
        }
    } else {
        let (Some(mesh), Some(params), Some(points)) = (&a.mesh, &a.params, &a.points) else {
            return Err(CliError::usage("give either --dataset or all of --mesh, --params and --points"));
        };
        let design = ParamsFile::read(params)?;
        if design.family() != family {
            return Err(CliError::usage(format!(
                "model was trained on {family}, parameters describe {}",
                design.family()
            )));
        }
        let surface = TriMesh::read(mesh)?;
        let pts = read_points(points)?;
        let sdf: Vec<f64> = pts.iter().map(|p| surface.sdf(*p)).collect();
        let outside = sdf.iter().filter(|s| **s > 0.0).count();
        if outside > 0 {
            log::warn!("{outside} of {} points lie outside the mesh", pts.len());
        }
        let p = model.predict_points(&design, &pts, &sdf)?;
        let id = mesh.file_stem().map_or_else(|| "mesh".into(), |s| s.to_string_lossy().into_owned());
        lines += &serde_json::to_string(&PredictionRecord::new(&id, family, c, &p))?;
        lines.push('\n');
        if let Some(vtk) = &a.vtk {
            write_vtk(vtk, &id, &pts, &p, c)?;
        }
    }
    write_text(&a.out, &lines)?;
    write_json(
        &sidecar_path(&a.out),
        &json!({
            "command": "predict",
            "model": a.model,
            "dataset": a.dataset,
            "split": a.split,
            "mesh": a.mesh,
            "params": a.params,
            "points": a.points,
            "vtk": a.vtk,
            "workers": a.workers,
        }),
    )?;
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let ds = open_dataset(&a.dataset)?;
    let preds = read_predictions(&a.predictions)?;
    let split = a.split.as_deref().map(|p| read_split(p, &ds)).transpose()?;
    let wanted: Vec<String> = match &split {
        Some(s) => s.test.clone(),
        None => ds.ids(),
    };
    let by_id: BTreeMap<&str, &PredictionRecord> = preds.iter().map(|p| (p.id.as_str(), p)).collect();
    let missing: Vec<&str> = wanted.iter().map(String::as_str).filter(|id| !by_id.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(CliError::usage(format!("predictions lack ids: {}", missing.join(", "))));
    }
    let known: BTreeSet<&str> = wanted.iter().map(String::as_str).collect();
    let extra: Vec<&str> = by_id.keys().copied().filter(|id| !known.contains(id)).collect();
    if split.is_none() && !extra.is_empty() {
        return Err(CliError::usage(format!("predictions for unknown ids: {}", extra.join(", "))));
    }
    let cases: Vec<&CaseRecord> = wanted.iter().map(|id| ds.case(id).expect("validated id")).collect();
    for case in &cases {
        let p = by_id[case.id.as_str()];
        if p.family != ds.family || p.c != case.c || p.values.len() != case.node_count() {
            return Err(CliError::usage(format!(
                "prediction '{}' has {} rows of {} ({}) but the case has {} rows of {} ({})",
                case.id,
                p.values.len(),
                p.c,
                p.family,
                case.node_count(),
                case.c,
                ds.family
            )));
        }
    }
    let metrics: Vec<CaseMetrics> = pool(a.workers)?.install(|| {
        cases
            .par_iter()
            .map(|case| case_metrics(&case.id, &by_id[case.id.as_str()].flat(), &case.fields, case.c))
            .collect::<geom_deeponet::Result<Vec<_>>>()
    })?;
    let mut percentiles: Vec<f64> = DEFAULT_PERCENTILES.to_vec();
    for p in &a.percentiles {
        if !(*p > 0.0 && *p <= 100.0) {
            return Err(CliError::usage(format!("percentile {p} is outside (0, 100]")));
        }
        percentiles.push(*p);
    }
    percentiles.sort_by(f64::total_cmp);
    percentiles.dedup();
    let mae: Vec<f64> = metrics.iter().map(|m| m.mae[0]).collect();
    let mut report = aggregate_with(metrics, Grouping::FullMesh, &percentiles)?;
    if let Some(s) = split.as_ref().filter(|s| matches!(s.mode, SplitMode::Similarity)) {
        let reference = &ds.cases[0].params;
        let sims = cases
            .iter()
            .map(|c| similarity(&c.params, reference))
            .collect::<geom_deeponet::Result<Vec<_>>>()?;
        report.similarity_fit = Some(similarity_regression(&mae, &sims)?);
        log::info!("similarity split with {} test cases", s.test.len());
    }
    let cfg = json!({
        "command": "eval",
        "predictions": a.predictions,
        "dataset": a.dataset,
        "split": a.split,
        "percentiles": percentiles,
    });
    write_json(&a.out.join(REPORT_JSON), &WithConfig { config: &cfg, body: &report })?;
    write_text(&a.out.join(REPORT_CSV), &report.to_csv())?;
    let join = |v: Vec<String>| v.join(", ");
    println!(
        "{} cases, mean MAE [{}], pooled relative L2 [{}]",
        report.case_count,
        join(report.mean_mae.iter().map(|m| format!("{m:.6e}")).collect()),
        join(report.pooled_relative_l2.iter().map(|r| r.map_or("n/a".into(), |r| format!("{r:.4}"))).collect())
    );
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<(), CliError> {
    if a.sizes.is_empty() || a.sizes.contains(&0) {
        return Err(CliError::usage("--sizes needs positive node counts"));
    }
    let model = load_model(&a.model)?;
    let family = model_family(&model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut drawn = None;
    for _ in 0..BENCH_DESIGN_RETRIES {
        let d = sample_design(family, &mut rng);
        if sample_interior(&d, 1, &mut rng).is_ok() {
            drawn = Some(d);
            break;
        }
    }
    let design = drawn.ok_or_else(|| CliError::Runtime("no usable design for the benchmark".into()))?;
    let clouds = a
        .sizes
        .iter()
        .map(|&n| {
            let s = sample_interior(&design, n, &mut rng)?;
            Ok((s.iter().map(|v| v.point).collect(), s.iter().map(|v| v.sdf).collect()))
        })
        .collect::<geom_deeponet::Result<Vec<(Vec<Vec3>, Vec<f64>)>>>()?;
    let report = timing_benchmark(&model, &design, &clouds, a.repeats)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let cfg: Value = json!({
        "command": "bench",
        "model": a.model,
        "sizes": a.sizes,
        "repeats": a.repeats,
        "seed": a.seed,
        "design": ParamsFile::from_design(&design),
    });
    write_json(&a.out, &WithConfig { config: &cfg, body: &report })?;
    if let Some(f) = &report.fit {
        println!("time ~ n^{:.3}", f.exponent);
    }
    Ok(())
}

pub fn sdf(a: SdfArgs) -> Result<(), CliError> {
    let mesh = TriMesh::read(&a.mesh)?;
    let points = read_points(&a.points)?;
    let mut out = String::with_capacity(points.len() * 24);
    for p in &points {
        out += &format!("{}\n", mesh.sdf(*p));
    }
    write_text(&a.out, &out)?;
    write_json(
        &sidecar_path(&a.out),
        &json!({"command": "sdf", "mesh": a.mesh, "points": a.points}),
    )?;
    Ok(())
}
