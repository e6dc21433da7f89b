use std::path::PathBuf;
use std::time::Instant;

use candle_core::Device;

use super::adam::Adam;
use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::log::{EpochRecord, TrainLog};
use super::schedule::{early_stop_check, epoch_seed, EarlyStop};
use super::{TrainOptions, CLASSIFIER_BETAS};
use crate::dataio::{index_batches, Domain, EyeDataset, GazeZone};
use crate::eval::{macro_on, translate};
use crate::losses::{cross_entropy_logits, selective_cross_entropy_logits};
use crate::nets::{GazeClassifier, Generator};
use crate::{Error, Result};

/// Result of a classifier training step.
#[derive(Debug, Clone)]
pub struct ClassifierRun {
    /// Parameters at the best validation epoch.
    pub model: GazeClassifier,
    pub checkpoint: Checkpoint,
    /// `(epoch, validation macro accuracy)`, starting with the epoch-0 baseline.
    pub history: Vec<(usize, f64)>,
    pub records: Vec<EpochRecord>,
    pub stopped_early: bool,
    /// False when `max_epochs` cut the run short.
    pub completed: bool,
}

impl ClassifierRun {
    pub fn best_metric(&self) -> f64 {
        self.checkpoint.meta.val_metric
    }

    pub fn initial_metric(&self) -> f64 {
        self.history.first().map(|h| h.1).unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Gate {
    Full,
    Selective,
}

struct Job<'a> {
    step: &'static str,
    tag: &'a str,
    sources: Vec<(&'a EyeDataset, Gate)>,
    val: &'a EyeDataset,
    lr: f64,
    epochs: usize,
}

fn require_all_zones(data: &[&EyeDataset]) -> Result<()> {
    for z in GazeZone::ALL {
        if !data.iter().any(|d| d.zones.contains(&z)) {
            return Err(Error::MissingClass(z.name().to_string()));
        }
    }
    Ok(())
}

fn check_inputs(cfg: &TrainConfig, sets: &[&EyeDataset]) -> Result<()> {
    cfg.validate()?;
    for d in sets {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if d.channels != cfg.channels {
            return Err(Error::ChannelMismatch { expected: cfg.channels, got: d.channels });
        }
    }
    Ok(())
}

/// Step 1: classifier on images without glasses, plain cross-entropy.
pub fn train_classifier_step1(train: &EyeDataset, val: &EyeDataset, cfg: &TrainConfig, opts: &TrainOptions) -> Result<ClassifierRun> {
    if (0..train.len()).any(|i| train.domain_of(i) != Domain::X) {
        return Err(Error::Config("step 1 trains on images without glasses only".into()));
    }
    train_classifier_on(train, val, cfg, opts, "classifier", "classifier")
}

/// Baseline classifier on every training image regardless of eyewear.
pub fn train_classifier_all_data(train: &EyeDataset, val: &EyeDataset, cfg: &TrainConfig, opts: &TrainOptions) -> Result<ClassifierRun> {
    train_classifier_on(train, val, cfg, opts, "all_data", "classifier_all")
}

/// Cross-entropy training on an arbitrary dataset.
pub fn train_classifier_on(
    train: &EyeDataset,
    val: &EyeDataset,
    cfg: &TrainConfig,
    opts: &TrainOptions,
    step: &'static str,
    default_tag: &str,
) -> Result<ClassifierRun> {
    check_inputs(cfg, &[train, val])?;
    require_all_zones(&[train])?;
    let init = GazeClassifier::build(cfg.channels, epoch_seed(cfg.seed, 0, 1), &cfg.model.classifier)?;
    let tag = opts.tag.as_deref().unwrap_or(default_tag);
    let job = Job { step, tag, sources: vec![(train, Gate::Full)], val, lr: cfg.lr_classifier, epochs: cfg.epochs_classifier };
    run(init, job, cfg, opts)
}

/// Step 3: continue training a classifier on real images without glasses and
/// on `generator_ng` outputs for images with glasses, alternating batches 1:1,
/// with selective cross-entropy. Validation applies the generator to every
/// image, matching the deployed pipeline.
pub fn finetune_step3(
    classifier: &GazeClassifier,
    generator_ng: &Generator,
    train_x: &EyeDataset,
    train_y: &EyeDataset,
    val: &EyeDataset,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<ClassifierRun> {
    check_inputs(cfg, &[train_x, train_y, val])?;
    for c in [classifier.channels, generator_ng.channels] {
        if c != cfg.channels {
            return Err(Error::ChannelMismatch { expected: cfg.channels, got: c });
        }
    }
    let fake = translate(generator_ng, train_y)?;
    let val_in = translate(generator_ng, val)?;
    let init = classifier.with_params(classifier.params.deep_clone()?);
    let tag = opts.tag.as_deref().unwrap_or("classifier_ft");
    let job = Job {
        step: "finetune",
        tag,
        sources: vec![(train_x, Gate::Selective), (&fake, Gate::Selective)],
        val: &val_in,
        lr: cfg.lr_finetune,
        epochs: cfg.epochs_finetune,
    };
    run(init, job, cfg, opts)
}

fn paths(opts: &TrainOptions, tag: &str) -> Option<(PathBuf, PathBuf)> {
    opts.out_dir.as_ref().map(|d| (d.join(format!("{tag}.gpck")), d.join(format!("{tag}.last.gpck"))))
}

fn run(init: GazeClassifier, job: Job<'_>, cfg: &TrainConfig, opts: &TrainOptions) -> Result<ClassifierRun> {
    let device = Device::Cpu;
    let model = init;
    let mut adam = Adam::new(&model.params, job.lr, CLASSIFIER_BETAS)?;
    let log = opts.out_dir.as_ref().map(|d| TrainLog::new(&d.join("train_log.csv")));
    let files = paths(opts, job.tag);

    let resumed = match (&files, opts.resume) {
        (Some((best_path, last_path)), true) if last_path.is_file() && best_path.is_file() => {
            let last = Checkpoint::load(last_path)?;
            last.check_config(cfg)?;
            let restored = last.to_classifier()?;
            for (dst, src) in model.params.vars().iter().zip(restored.params.vars()) {
                dst.set(src.as_tensor())?;
            }
            adam.load_state(&last.optimizer, last.meta.optimizer_steps)?;
            log::info!("{}: resuming after epoch {}", job.tag, last.meta.epoch);
            Some((last.meta.history.clone(), Checkpoint::load(best_path)?, last.meta.epoch + 1))
        }
        _ => None,
    };
    let (mut history, mut best, start) = match resumed {
        Some(state) => state,
        None => {
            let m0 = macro_on(&model, None, job.val)?;
            let history = vec![(0, m0)];
            let mut best = Checkpoint::classifier(&model, cfg, 0, m0)?;
            best.meta.history = history.clone();
            if let Some((best_path, _)) = &files {
                best.save(best_path)?;
            }
            let mut rec = EpochRecord::new(job.step, 0);
            rec.val_metric = m0;
            if let Some(log) = &log {
                log.append(&rec)?;
            }
            (history, best, 1)
        }
    };

    let mut records = Vec::new();
    let mut stopped_early = early_stop_check(&history, cfg.early_stop_patience) == EarlyStop::Stop;
    let mut completed = true;
    let mut ran = 0;
    for epoch in start..=job.epochs {
        if stopped_early {
            break;
        }
        if opts.max_epochs.is_some_and(|m| ran >= m) {
            completed = false;
            break;
        }
        ran += 1;
        let t0 = Instant::now();
        let per_source: Vec<Vec<Vec<usize>>> = job
            .sources
            .iter()
            .enumerate()
            .map(|(s, (d, _))| index_batches(d.len(), cfg.batch_size, epoch_seed(cfg.seed, epoch, 100 + s as u64)))
            .collect::<Result<_>>()?;
        let rounds = per_source.iter().map(Vec::len).max().unwrap_or(0);
        let (mut loss_sum, mut n_batches) = (0.0, 0usize);
        for r in 0..rounds {
            for (s, (data, gate)) in job.sources.iter().enumerate() {
                let Some(idx) = per_source[s].get(r) else { continue };
                let x = data.batch_tensor(idx, &device)?;
                let labels: Vec<usize> = data.labels(idx).iter().map(|z| z.code()).collect();
                let logits = model.forward(&x)?.logits;
                let loss = match gate {
                    Gate::Full => cross_entropy_logits(&logits, &labels)?,
                    Gate::Selective => selective_cross_entropy_logits(&logits, &labels)?,
                };
                let v = loss.to_scalar::<f32>()? as f64;
                if !v.is_finite() {
                    return Err(Error::Divergence { epoch, loss: v });
                }
                adam.step(&loss.backward()?)?;
                loss_sum += v;
                n_batches += 1;
            }
        }
        let metric = macro_on(&model, None, job.val)?;
        history.push((epoch, metric));
        let mut rec = EpochRecord::new(job.step, epoch);
        rec.ce = loss_sum / n_batches.max(1) as f64;
        rec.val_metric = metric;
        rec.wall_seconds = t0.elapsed().as_secs_f64();
        log::info!("{} epoch {epoch}: loss {:.4} val macro {:.4}", job.step, rec.ce, metric);

        if metric > best.meta.val_metric {
            best = Checkpoint::classifier(&model, cfg, epoch, metric)?;
            if let Some((best_path, _)) = &files {
                best.meta.history = history.clone();
                best.save(best_path)?;
            }
        }
        if let Some((_, last_path)) = &files {
            let mut last = Checkpoint::classifier(&model, cfg, epoch, metric)?;
            last.meta.history = history.clone();
            last.meta.optimizer_steps = adam.steps();
            last.optimizer = adam.state()?;
            last.save(last_path)?;
        }
        if let Some(log) = &log {
            log.append(&rec)?;
        }
        records.push(rec);
        stopped_early = early_stop_check(&history, cfg.early_stop_patience) == EarlyStop::Stop;
    }
    best.meta.history = history.clone();
    let model = best.to_classifier()?;
    Ok(ClassifierRun { model, checkpoint: best, history, records, stopped_early, completed })
}
