use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use candle_core::{Device, Tensor};
use gpc::dataio::synth::{eye_to_gray, generate_split, write_synthetic_split};
use gpc::dataio::{load_manifest, prepare, ConditionSet, Domain, EyeDataset, EyePixels, GazeZone, Raster};
use gpc::eval::{
    comparison_table, condition_grid, evaluate_model, gaze_drift, paired_bootstrap, render_cam_overlay, side_by_side,
    EvalReport,
};
use gpc::nets::{GazeClassifier, Generator};
use gpc::training::{
    epoch_seed, finetune_step3, train_classifier_all_data, train_classifier_on, train_classifier_step1, train_gan_step2,
    Checkpoint, GanData, Role, TrainOptions, Variant,
};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, Command, UsageError};

/// Checkpoint locations under `out_dir`.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn classifier(&self) -> PathBuf {
        self.root.join("classifier.gpck")
    }

    pub fn classifier_all(&self) -> PathBuf {
        self.root.join("classifier_all.gpck")
    }

    pub fn variant_dir(&self, v: Variant) -> PathBuf {
        self.root.join(v.as_str())
    }

    pub fn network(&self, v: Variant, role: Role) -> PathBuf {
        self.variant_dir(v).join(format!("{}.gpck", role.as_str()))
    }

    pub fn finetuned(&self, v: Variant) -> PathBuf {
        self.variant_dir(v).join("classifier_ft.gpck")
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = RunConfig::load(cli.common.config.as_deref(), &cli.common.set)?;
    if let Some(seed) = cli.common.seed {
        cfg.train.seed = seed;
        cfg.synth.spec.rng_seed = seed;
    }
    if let Some(v) = cli.common.variant {
        cfg.train.variant = v;
    }
    if let Some(out) = &cli.common.out {
        match cli.command {
            Command::SynthData => cfg.data.root = out.clone(),
            _ => cfg.out_dir = out.clone(),
        }
    }
    match cli.command {
        Command::SynthData => synth_data(&cfg),
        Command::Train { step, all_data, resume, max_epochs } => train(&cfg, step, all_data, resume, max_epochs),
        Command::Evaluate { model, split } => evaluate(&cfg, &model, &split),
        Command::Grid => grid(&cfg),
        Command::Infer { images, remove_glasses, finetuned, save_intermediate, json } => {
            infer(&cfg, &images, remove_glasses, finetuned, save_intermediate.as_deref(), json.as_deref())
        }
        Command::Visualize { images } => visualize(&cfg, &images),
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
}

fn synth_data(cfg: &RunConfig) -> Result<()> {
    let root = &cfg.data.root;
    create_dir(root)?;
    let plan = &cfg.synth.plan;
    for (k, (name, split)) in [("train", &plan.train), ("val", &plan.val), ("test", &plan.test)].into_iter().enumerate() {
        let seed = epoch_seed(cfg.synth.spec.rng_seed, 0, 40 + k as u64);
        let samples = generate_split(&cfg.synth.spec, split, &plan.conditions, name, seed)?;
        let written = write_synthetic_split(root, name, &samples)?;
        println!("{name}: {} images -> {}", samples.len(), written.manifest.display());
    }
    Ok(())
}

fn load_split(cfg: &RunConfig, split: &str) -> Result<EyeDataset> {
    let manifest = cfg.data.manifest(split);
    let records = load_manifest(&manifest)?;
    let mut ds = EyeDataset::from_records(&records, &cfg.preprocess()).with_context(|| format!("loading {}", manifest.display()))?;
    let pupils = cfg.data.pupils(split);
    if pupils.is_file() {
        let gt: HashMap<PathBuf, (f32, f32)> = gpc::dataio::synth::load_ground_truth(&pupils)?.into_iter().collect();
        for (i, r) in records.iter().enumerate() {
            ds.pupils[i] = gt.get(&r.image_path).copied();
        }
    }
    log::info!("{split}: {} images from {}", ds.len(), manifest.display());
    Ok(ds)
}

fn require(path: PathBuf, step: u8, missing: u8) -> Result<PathBuf> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(gpc::Error::MissingPrerequisiteCheckpoint { step, missing, path }.into())
    }
}

fn load_classifier(path: &Path) -> Result<GazeClassifier> {
    Ok(Checkpoint::load(path)?.to_classifier()?)
}

fn load_generator(path: &Path) -> Result<Generator> {
    Ok(Checkpoint::load(path)?.to_generator()?)
}

fn train(cfg: &RunConfig, step: u8, all_data: bool, resume: bool, max_epochs: Option<usize>) -> Result<()> {
    if all_data && step != 1 {
        return Err(UsageError("--all-data applies to step 1 only".into()).into());
    }
    let layout = Layout { root: cfg.out_dir.clone() };
    create_dir(&layout.root)?;
    write_text(&layout.root.join("config.toml"), &cfg.to_toml()?)?;
    let tc = &cfg.train;
    let v = tc.variant;
    let opts = |dir: PathBuf| TrainOptions { out_dir: Some(dir), tag: None, resume, max_epochs };
    match step {
        1 => {
            let train = load_split(cfg, "train")?;
            let val = load_split(cfg, "val")?;
            let run = if all_data {
                train_classifier_all_data(&train, &val, tc, &opts(layout.root.clone()))?
            } else {
                train_classifier_step1(&train.domain(Domain::X), &val.domain(Domain::X), tc, &opts(layout.root.clone()))?
            };
            let path = if all_data { layout.classifier_all() } else { layout.classifier() };
            println!("step 1: best validation macro accuracy {:.4} at epoch {} -> {}", run.best_metric(), run.checkpoint.meta.epoch, path.display());
        }
        2 => {
            let clf = load_classifier(&require(layout.classifier(), 2, 1)?)?;
            let train = load_split(cfg, "train")?;
            let val = load_split(cfg, "val")?;
            let dir = layout.variant_dir(v);
            create_dir(&dir)?;
            let (tx, ty) = (train.domain(Domain::X), train.domain(Domain::Y));
            let (vx, vy) = (val.domain(Domain::X), val.domain(Domain::Y));
            let data = GanData { train_x: &tx, train_y: &ty, val_x: &vx, val_y: &vy };
            let run = train_gan_step2(data, &clf, tc, &opts(dir.clone()))?;
            println!(
                "step 2 ({}): best validation macro accuracy after removal {:.4} at epoch {} -> {}",
                v.as_str(),
                run.checkpoints[0].meta.val_metric,
                run.checkpoints[0].meta.epoch,
                dir.display()
            );
        }
        3 => {
            let clf = load_classifier(&require(layout.classifier(), 3, 1)?)?;
            let g_ng = load_generator(&require(layout.network(v, Role::GeneratorNg), 3, 2)?)?;
            let train = load_split(cfg, "train")?;
            let val = load_split(cfg, "val")?;
            let dir = layout.variant_dir(v);
            let run = finetune_step3(&clf, &g_ng, &train.domain(Domain::X), &train.domain(Domain::Y), &val, tc, &opts(dir))?;
            println!("step 3 ({}): best validation macro accuracy {:.4} -> {}", v.as_str(), run.best_metric(), layout.finetuned(v).display());
        }
        _ => unreachable!("clap restricts the step"),
    }
    Ok(())
}

/// Pipelines of the comparison table: name, classifier, optional generator.
fn table_rows(layout: &Layout) -> Vec<(String, PathBuf, Option<PathBuf>)> {
    let mut rows = vec![("no-glasses".to_string(), layout.classifier(), None), ("all-data".to_string(), layout.classifier_all(), None)];
    for v in [Variant::CycleGan, Variant::GpCycleGan] {
        let g = layout.network(v, Role::GeneratorNg);
        rows.push((v.as_str().to_string(), layout.classifier(), Some(g.clone())));
        rows.push((format!("{}+ft", v.as_str()), layout.finetuned(v), Some(g)));
    }
    rows
}

fn run_report(name: &str, clf: &Path, gen: Option<&Path>, data: &EyeDataset, dir: &Path) -> Result<EvalReport> {
    let classifier = load_classifier(clf)?;
    let generator = gen.map(load_generator).transpose()?;
    let report = evaluate_model(name, &classifier, generator.as_ref(), data)?;
    report.write(dir, &name.replace('+', "_"))?;
    println!("{name}: micro {:.4} macro {:.4} (n = {})", report.micro, report.macro_, report.n);
    Ok(report)
}

fn evaluate(cfg: &RunConfig, model: &str, split: &str) -> Result<()> {
    let layout = Layout { root: cfg.out_dir.clone() };
    let v = cfg.train.variant;
    let dir = layout.root.join("eval").join(split);
    let single = match model {
        "classifier-only" => Some((layout.classifier(), None)),
        "all-data" => Some((layout.classifier_all(), None)),
        "removal" => Some((layout.classifier(), Some(layout.network(v, Role::GeneratorNg)))),
        "removal-ft" => Some((layout.finetuned(v), Some(layout.network(v, Role::GeneratorNg)))),
        "table" => None,
        other => {
            return Err(UsageError(format!("unknown model {other:?} (expected classifier-only|all-data|removal|removal-ft|table)")).into())
        }
    };
    let data = load_split(cfg, split)?;
    match single {
        Some((clf, gen)) => {
            let name = if gen.is_some() { format!("{model}_{}", v.as_str()) } else { model.to_string() };
            for p in std::iter::once(&clf).chain(gen.as_ref()) {
                if !p.is_file() {
                    return Err(gpc::Error::MissingCheckpoint(p.clone()).into());
                }
            }
            run_report(&name, &clf, gen.as_deref(), &data, &dir)?;
        }
        None => {
            let mut reports = Vec::new();
            for (name, clf, gen) in table_rows(&layout) {
                if !clf.is_file() || gen.as_ref().is_some_and(|g| !g.is_file()) {
                    log::warn!("skipping {name}: checkpoint missing");
                    continue;
                }
                reports.push(run_report(&name, &clf, gen.as_deref(), &data, &dir)?);
            }
            if reports.is_empty() {
                return Err(gpc::Error::MissingCheckpoint(layout.classifier()).into());
            }
            let table = comparison_table(&reports);
            write_text(&dir.join("table.csv"), &table)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn grid(cfg: &RunConfig) -> Result<()> {
    let train = load_split(cfg, "train")?;
    let val = load_split(cfg, "val")?;
    let root = cfg.out_dir.join("grid");
    create_dir(&root)?;
    let result = condition_grid(&ConditionSet::ALL, &ConditionSet::ALL, &train, &val, |set, tr, va| {
        let opts = TrainOptions { out_dir: Some(root.join(set.label().replace(':', "_"))), tag: None, resume: false, max_epochs: None };
        std::fs::create_dir_all(opts.out_dir.as_ref().expect("set")).map_err(|e| gpc::Error::Config(e.to_string()))?;
        Ok(train_classifier_on(tr, va, &cfg.train, &opts, "grid", "classifier")?.model)
    })?;
    write_text(&cfg.out_dir.join("grid.csv"), &result.to_csv())?;
    write_text(&cfg.out_dir.join("grid.json"), &serde_json::to_string_pretty(&result)?)?;
    print!("{}", result.to_csv());
    Ok(())
}

fn to_tensor(px: &EyePixels) -> Result<Tensor> {
    Ok(Tensor::from_vec(px.data.clone(), (1, px.channels, px.size, px.size), &Device::Cpu)?)
}

fn from_tensor(t: &Tensor) -> Result<EyePixels> {
    let (_, c, s, _) = t.dims4()?;
    Ok(EyePixels { size: s, channels: c, data: t.flatten_all()?.to_vec1::<f32>()? })
}

fn load_image(cfg: &RunConfig, path: &Path) -> Result<EyePixels> {
    let raster = Raster::open(path)?;
    Ok(prepare(&raster, None, &cfg.preprocess())?)
}

/// 8-bit rendering of a model-range image.
fn save_eye(px: &EyePixels, path: &Path) -> Result<()> {
    if px.channels == 1 {
        eye_to_gray(px).save(path)?;
    } else {
        let n = px.size * px.size;
        let mut bytes = Vec::with_capacity(3 * n);
        for i in 0..n {
            for c in 0..3 {
                bytes.push(((px.plane(c)[i] + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8);
            }
        }
        image::RgbImage::from_raw(px.size as u32, px.size as u32, bytes).context("rgb buffer")?.save(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Inference {
    image: PathBuf,
    zone: String,
    zone_code: usize,
    probabilities: Vec<f32>,
}

fn infer(cfg: &RunConfig, images: &[PathBuf], remove: bool, finetuned: bool, save: Option<&Path>, json: Option<&Path>) -> Result<()> {
    let layout = Layout { root: cfg.out_dir.clone() };
    let v = cfg.train.variant;
    let clf = load_classifier(&if finetuned { layout.finetuned(v) } else { layout.classifier() })?;
    let gen = if remove { Some(load_generator(&layout.network(v, Role::GeneratorNg))?) } else { None };
    if let Some(dir) = save {
        create_dir(dir)?;
    }
    let mut results = Vec::new();
    for path in images {
        let px = load_image(cfg, path)?;
        let mut x = to_tensor(&px)?;
        if let Some(g) = &gen {
            x = g.forward(&x)?;
            if let Some(dir) = save {
                let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
                save_eye(&from_tensor(&x)?, &dir.join(format!("{stem}_removed.png")))?;
            }
        }
        let probs = clf.forward(&x)?.probs.get(0)?.to_vec1::<f32>()?;
        let code = gpc::eval::argmax(&probs);
        let zone = GazeZone::from_code(code as i64)?;
        let shown: Vec<String> = probs.iter().map(|p| format!("{p:.6}")).collect();
        println!("{}: {} [{}]", path.display(), zone.name(), shown.join(", "));
        results.push(Inference { image: path.clone(), zone: zone.name().to_string(), zone_code: code, probabilities: probs });
    }
    if let Some(p) = json {
        write_text(p, &serde_json::to_string_pretty(&results)?)?;
    }
    Ok(())
}

/// Ground-truth zones of every image listed in the configured manifests.
fn known_zones(cfg: &RunConfig) -> HashMap<PathBuf, GazeZone> {
    let mut out = HashMap::new();
    for split in ["train", "val", "test"] {
        if let Ok(records) = load_manifest(&cfg.data.manifest(split)) {
            for r in records {
                if let Ok(p) = r.image_path.canonicalize() {
                    out.insert(p, r.zone);
                }
            }
        }
    }
    out
}

fn visualize(cfg: &RunConfig, images: &[PathBuf]) -> Result<()> {
    let layout = Layout { root: cfg.out_dir.clone() };
    let v = cfg.train.variant;
    let base = load_classifier(&layout.classifier())?;
    let ft = load_classifier(&layout.finetuned(v))?;
    let g_ng = load_generator(&layout.network(v, Role::GeneratorNg))?;
    let dir = layout.root.join("visualize");
    create_dir(&dir)?;
    let zones = known_zones(cfg);
    for path in images {
        let px = load_image(cfg, path)?;
        let x = to_tensor(&px)?;
        let gt = path.canonicalize().ok().and_then(|p| zones.get(&p).copied());
        let left_out = base.forward(&x)?;
        let removed = g_ng.forward(&x)?;
        let right_out = ft.forward(&removed)?;
        let pick = |probs: &Tensor| -> Result<GazeZone> {
            Ok(match gt {
                Some(z) => z,
                None => GazeZone::from_code(gpc::eval::argmax(&probs.get(0)?.to_vec1::<f32>()?) as i64)?,
            })
        };
        let left = render_cam_overlay(&px, &left_out.cams, pick(&left_out.probs)?)?;
        let right = render_cam_overlay(&from_tensor(&removed)?, &right_out.cams, pick(&right_out.probs)?)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
        let out = dir.join(format!("{stem}_cam.png"));
        side_by_side(&left.image, &right.image).save(&out)?;
        println!("{} -> {}", path.display(), out.display());
    }
    drift_report(cfg, &layout, &dir)
}

/// Gaze drift on the test images without glasses, for each trained variant.
fn drift_report(cfg: &RunConfig, layout: &Layout, dir: &Path) -> Result<()> {
    let test = match load_split(cfg, "test") {
        Ok(d) => d.domain(Domain::X),
        Err(e) => {
            log::warn!("no drift report: {e:#}");
            return Ok(());
        }
    };
    let mut drifts = HashMap::new();
    for v in [Variant::CycleGan, Variant::GpCycleGan] {
        let (wg, ng) = (layout.network(v, Role::GeneratorWg), layout.network(v, Role::GeneratorNg));
        if !wg.is_file() || !ng.is_file() {
            continue;
        }
        let stats = gaze_drift(&load_generator(&wg)?, &load_generator(&ng)?, &test)?;
        println!("drift {}: mean {:.3} median {:.3} p95 {:.3} px, {} not found", v.as_str(), stats.mean, stats.median, stats.p95, stats.not_found);
        write_text(&dir.join(format!("drift_{}.json", v.as_str())), &serde_json::to_string_pretty(&stats)?)?;
        drifts.insert(v, stats);
    }
    if let (Some(a), Some(b)) = (drifts.get(&Variant::CycleGan), drifts.get(&Variant::GpCycleGan)) {
        let gap = paired_bootstrap(&a.drifts, &b.drifts, 2000, cfg.train.seed);
        println!("drift gap cyclegan - gpcyclegan: {:.3} px, one-sided 95% lower bound {:.3}", gap.mean_gap, gap.lower_95);
        write_text(&dir.join("drift_gap.json"), &serde_json::to_string_pretty(&gap)?)?;
    }
    Ok(())
}
