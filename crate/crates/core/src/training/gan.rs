use std::path::PathBuf;
use std::time::Instant;

use candle_core::{Device, Tensor};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::checkpoint::{Checkpoint, Role};
use super::config::{AdversarialForm, TrainConfig, Variant};
use super::log::{EpochRecord, TrainLog};
use super::pool::ImagePool;
use super::schedule::{early_stop_check, epoch_seed, EarlyStop};
use super::{TrainOptions, GAN_BETAS};
use crate::dataio::EyeDataset;
use crate::eval::{macro_on, translate};
use crate::losses::{
    cycle_consistency, discriminator_loss_logits, discriminator_loss_ls, gaze_consistency,
    generator_adversarial_logits, generator_adversarial_ls, identity, l1_mean, total_gpcyclegan, LossParts,
    LossWeights,
};
use crate::nets::{GazeClassifier, Generator, PatchDiscriminator};
use crate::{Error, Result};

/// Loss values of one update.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepLosses {
    /// Non-saturating generator adversarial surrogate, summed over both directions.
    pub adv: f64,
    pub cyc: f64,
    pub identity: f64,
    pub gaze: f64,
    pub generator_total: f64,
    pub discriminator: f64,
}

/// Both generators and discriminators with their optimizers.
///
/// The gaze term is evaluated for both variants; vanilla CycleGAN weights it
/// by zero, so its objective is exactly the reduced one and the computation
/// graph is the same as GPCycleGAN with `lambda3 = 0`.
pub struct GanTrainer {
    pub cfg: TrainConfig,
    pub g_wg: Generator,
    pub g_ng: Generator,
    pub d_wg: PatchDiscriminator,
    pub d_ng: PatchDiscriminator,
    classifier: GazeClassifier,
    opt: [Adam; 4],
    pool_x: ImagePool,
    pool_y: ImagePool,
}

impl GanTrainer {
    pub fn new(cfg: &TrainConfig, classifier: &GazeClassifier) -> Result<Self> {
        cfg.validate()?;
        if classifier.channels != cfg.channels {
            return Err(Error::ChannelMismatch { expected: cfg.channels, got: classifier.channels });
        }
        let c = cfg.channels;
        let seed = |s| epoch_seed(cfg.seed, 0, s);
        let g_wg = Generator::build(c, seed(21), &cfg.model.generator)?;
        let g_ng = Generator::build(c, seed(22), &cfg.model.generator)?;
        let d_wg = PatchDiscriminator::build(c, seed(23), &cfg.model.discriminator)?;
        let d_ng = PatchDiscriminator::build(c, seed(24), &cfg.model.discriminator)?;
        let opt = [
            Adam::new(&g_wg.params, cfg.lr_gan, GAN_BETAS)?,
            Adam::new(&g_ng.params, cfg.lr_gan, GAN_BETAS)?,
            Adam::new(&d_wg.params, cfg.lr_gan, GAN_BETAS)?,
            Adam::new(&d_ng.params, cfg.lr_gan, GAN_BETAS)?,
        ];
        Ok(Self {
            cfg: cfg.clone(),
            g_wg,
            g_ng,
            d_wg,
            d_ng,
            classifier: classifier.with_params(classifier.params.detached()),
            opt,
            pool_x: ImagePool::new(cfg.image_pool_size, seed(25)),
            pool_y: ImagePool::new(cfg.image_pool_size, seed(26)),
        })
    }

    /// Weights actually applied to the generator objective.
    pub fn effective_weights(&self) -> LossWeights {
        let w = self.cfg.weights;
        match self.cfg.variant {
            Variant::GpCycleGan => w,
            Variant::CycleGan => LossWeights { lambda3: 0.0, ..w },
        }
    }

    pub fn reseed_pools(&mut self, epoch: usize) {
        self.pool_x.reseed(epoch_seed(self.cfg.seed, epoch, 27));
        self.pool_y.reseed(epoch_seed(self.cfg.seed, epoch, 28));
    }

    /// One generator update followed by one discriminator update.
    /// `x` holds images without glasses, `y` images with glasses.
    pub fn step(&mut self, x: &Tensor, y: &Tensor) -> Result<StepLosses> {
        let d_wg = self.d_wg.with_params(self.d_wg.params.detached());
        let d_ng = self.d_ng.with_params(self.d_ng.params.detached());

        let fake_y = self.g_wg.forward(x)?;
        let rec_x = self.g_ng.forward(&fake_y)?;
        let fake_x = self.g_ng.forward(y)?;
        let rec_y = self.g_wg.forward(&fake_x)?;
        let idt_y = self.g_wg.forward(y)?;
        let idt_x = self.g_ng.forward(x)?;

        let adv = match self.cfg.adversarial_form {
            AdversarialForm::Log => (generator_adversarial_logits(&d_wg.forward_logits(&fake_y)?)?
                + generator_adversarial_logits(&d_ng.forward_logits(&fake_x)?)?)?,
            AdversarialForm::LeastSquares => (generator_adversarial_ls(&d_wg.forward_logits(&fake_y)?)?
                + generator_adversarial_ls(&d_ng.forward_logits(&fake_x)?)?)?,
        };
        let cyc = cycle_consistency(x, &rec_x, y, &rec_y)?;
        let idt = identity(y, &idt_y, x, &idt_x)?;
        let cams_real = self.classifier.forward(x)?.cams.detach();
        let cams_rec = self.classifier.forward(&rec_x)?.cams;
        let gaze = gaze_consistency(&cams_real, &cams_rec, self.cfg.weights.tau)?;
        let parts = LossParts { adversarial: adv, cycle: cyc, identity: idt, gaze: Some(gaze) };
        let total = total_gpcyclegan(&parts, &self.effective_weights())?;
        let total_v = scalar(&total)?;
        if !total_v.is_finite() {
            return Err(Error::Divergence { epoch: 0, loss: total_v });
        }
        let grads = total.backward()?;
        self.opt[0].step(&grads)?;
        self.opt[1].step(&grads)?;

        let pooled_y = self.pool_y.query(&fake_y)?;
        let pooled_x = self.pool_x.query(&fake_x)?;
        let d_loss = match self.cfg.adversarial_form {
            AdversarialForm::Log => ((discriminator_loss_logits(&self.d_wg.forward_logits(y)?, &self.d_wg.forward_logits(&pooled_y)?)?
                + discriminator_loss_logits(&self.d_ng.forward_logits(x)?, &self.d_ng.forward_logits(&pooled_x)?)?)?
                * 0.5)?,
            AdversarialForm::LeastSquares => (discriminator_loss_ls(&self.d_wg.forward_logits(y)?, &self.d_wg.forward_logits(&pooled_y)?)?
                + discriminator_loss_ls(&self.d_ng.forward_logits(x)?, &self.d_ng.forward_logits(&pooled_x)?)?)?,
        };
        let d_v = scalar(&d_loss)?;
        if !d_v.is_finite() {
            return Err(Error::Divergence { epoch: 0, loss: d_v });
        }
        let grads = d_loss.backward()?;
        self.opt[2].step(&grads)?;
        self.opt[3].step(&grads)?;

        Ok(StepLosses {
            adv: scalar(&parts.adversarial)?,
            cyc: scalar(&parts.cycle)?,
            identity: scalar(&parts.identity)?,
            gaze: parts.gaze.as_ref().map(scalar).transpose()?.unwrap_or(0.0),
            generator_total: total_v,
            discriminator: d_v,
        })
    }

    fn checkpoints(&self, epoch: usize, metric: f64) -> Result<[Checkpoint; 4]> {
        let cfg = &self.cfg;
        Ok([
            Checkpoint::generator(Role::GeneratorWg, &self.g_wg, cfg, epoch, metric)?,
            Checkpoint::generator(Role::GeneratorNg, &self.g_ng, cfg, epoch, metric)?,
            Checkpoint::discriminator(Role::DiscriminatorWg, &self.d_wg, cfg, epoch, metric)?,
            Checkpoint::discriminator(Role::DiscriminatorNg, &self.d_ng, cfg, epoch, metric)?,
        ])
    }

    fn restore(&mut self, cks: &[Checkpoint; 4]) -> Result<()> {
        let stores = [&self.g_wg.params, &self.g_ng.params, &self.d_wg.params, &self.d_ng.params];
        for ((store, ck), opt) in stores.into_iter().zip(cks).zip(self.opt.iter_mut()) {
            let restored = crate::nets::ParamStore::from_arrays(&ck.params, store)?;
            for (dst, src) in store.vars().iter().zip(restored.vars()) {
                dst.set(src.as_tensor())?;
            }
            opt.load_state(&ck.optimizer, ck.meta.optimizer_steps)?;
        }
        Ok(())
    }
}

fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
}

/// Unpaired training and validation images for step 2.
#[derive(Debug, Clone, Copy)]
pub struct GanData<'a> {
    pub train_x: &'a EyeDataset,
    pub train_y: &'a EyeDataset,
    pub val_x: &'a EyeDataset,
    pub val_y: &'a EyeDataset,
}

/// Result of step 2: networks at the best validation epoch.
pub struct GanRun {
    pub g_wg: Generator,
    pub g_ng: Generator,
    pub d_wg: PatchDiscriminator,
    pub d_ng: PatchDiscriminator,
    /// Order: generator_wg, generator_ng, discriminator_wg, discriminator_ng.
    pub checkpoints: [Checkpoint; 4],
    pub history: Vec<(usize, f64)>,
    /// Epoch-0 baseline first.
    pub records: Vec<EpochRecord>,
    pub stopped_early: bool,
    pub completed: bool,
}

/// Mean per-pixel L1 error of the full X cycle.
pub fn cycle_error(g_wg: &Generator, g_ng: &Generator, data: &EyeDataset) -> Result<f64> {
    let rec = translate(g_ng, &translate(g_wg, data)?)?;
    let all: Vec<usize> = (0..data.len()).collect();
    let dev = Device::Cpu;
    Ok(scalar(&l1_mean(&rec.batch_tensor(&all, &dev)?, &data.batch_tensor(&all, &dev)?)?)?)
}

fn file_names(opts: &TrainOptions, suffix: &str) -> Option<[PathBuf; 4]> {
    opts.out_dir.as_ref().map(|d| {
        [Role::GeneratorWg, Role::GeneratorNg, Role::DiscriminatorWg, Role::DiscriminatorNg]
            .map(|r| d.join(format!("{}{suffix}.gpck", r.as_str())))
    })
}

fn shuffled_stream(n: usize, len: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        out.extend(perm);
    }
    out.truncate(len);
    out
}

/// Step 2: trains both translation directions against a frozen classifier.
/// The validation metric is the classifier's macro accuracy on
/// `G_ng(val_y)`; the cycle error on `val_x` is logged alongside.
pub fn train_gan_step2(data: GanData<'_>, classifier: &GazeClassifier, cfg: &TrainConfig, opts: &TrainOptions) -> Result<GanRun> {
    for d in [data.train_x, data.train_y, data.val_x, data.val_y] {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if d.channels != cfg.channels {
            return Err(Error::ChannelMismatch { expected: cfg.channels, got: d.channels });
        }
        let min = cfg.model.discriminator.min_input_size();
        if d.size < min {
            return Err(Error::Config(format!("image size {} is below the discriminator minimum {min}", d.size)));
        }
    }
    let mut trainer = GanTrainer::new(cfg, classifier)?;
    let frozen = trainer.classifier.clone();
    let log = opts.out_dir.as_ref().map(|d| TrainLog::new(&d.join("train_log.csv")));
    let best_files = file_names(opts, "");
    let last_files = file_names(opts, ".last");
    let evaluate = |t: &GanTrainer| -> Result<(f64, f64)> {
        Ok((macro_on(&frozen, Some(&t.g_ng), data.val_y)?, cycle_error(&t.g_wg, &t.g_ng, data.val_x)?))
    };

    let mut history;
    let mut best;
    let mut records = Vec::new();
    let mut start = 1;
    let resumable = opts.resume
        && last_files.as_ref().is_some_and(|f| f.iter().all(|p| p.is_file()))
        && best_files.as_ref().is_some_and(|f| f.iter().all(|p| p.is_file()));
    if resumable {
        let load = |files: &[PathBuf; 4]| -> Result<[Checkpoint; 4]> {
            Ok([Checkpoint::load(&files[0])?, Checkpoint::load(&files[1])?, Checkpoint::load(&files[2])?, Checkpoint::load(&files[3])?])
        };
        let last = load(last_files.as_ref().expect("checked"))?;
        last[0].check_config(cfg)?;
        trainer.restore(&last)?;
        history = last[0].meta.history.clone();
        start = last[0].meta.epoch + 1;
        best = load(best_files.as_ref().expect("checked"))?;
        log::info!("gan: resuming after epoch {}", last[0].meta.epoch);
    } else {
        let (m0, c0) = evaluate(&trainer)?;
        history = vec![(0, m0)];
        best = trainer.checkpoints(0, m0)?;
        if let Some(files) = &best_files {
            for (ck, p) in best.iter().zip(files) {
                ck.save(p)?;
            }
        }
        let mut rec = EpochRecord::new("gan", 0);
        rec.val_metric = m0;
        rec.val_cycle = c0;
        if let Some(log) = &log {
            log.append(&rec)?;
        }
        records.push(rec);
    }

    let bs = cfg.batch_size;
    let device = Device::Cpu;
    let mut stopped_early = early_stop_check(&history, cfg.early_stop_patience) == EarlyStop::Stop;
    let mut completed = true;
    let mut ran = 0;
    for epoch in start..=cfg.epochs_gan {
        if stopped_early {
            break;
        }
        if opts.max_epochs.is_some_and(|m| ran >= m) {
            completed = false;
            break;
        }
        ran += 1;
        let t0 = Instant::now();
        trainer.reseed_pools(epoch);
        let steps = (data.train_x.len().max(data.train_y.len()) / bs).max(1);
        let xs = shuffled_stream(data.train_x.len(), steps * bs, epoch_seed(cfg.seed, epoch, 31));
        let ys = shuffled_stream(data.train_y.len(), steps * bs, epoch_seed(cfg.seed, epoch, 32));
        let mut sum = StepLosses::default();
        for s in 0..steps {
            let x = data.train_x.batch_tensor(&xs[s * bs..(s + 1) * bs], &device)?;
            let y = data.train_y.batch_tensor(&ys[s * bs..(s + 1) * bs], &device)?;
            let l = trainer.step(&x, &y).map_err(|e| match e {
                Error::Divergence { loss, .. } => Error::Divergence { epoch, loss },
                other => other,
            })?;
            sum.adv += l.adv;
            sum.cyc += l.cyc;
            sum.identity += l.identity;
            sum.gaze += l.gaze;
            sum.discriminator += l.discriminator;
        }
        let (metric, cycle) = evaluate(&trainer)?;
        history.push((epoch, metric));
        let n = steps as f64;
        let mut rec = EpochRecord::new("gan", epoch);
        rec.adv = sum.adv / n;
        rec.cyc = sum.cyc / n;
        rec.identity = sum.identity / n;
        rec.gaze = sum.gaze / n;
        rec.d_loss = sum.discriminator / n;
        rec.val_metric = metric;
        rec.val_cycle = cycle;
        rec.wall_seconds = t0.elapsed().as_secs_f64();
        log::info!(
            "gan epoch {epoch}: adv {:.4} cyc {:.4} idt {:.4} gaze {:.4} d {:.4} val macro {:.4} val cyc {:.4}",
            rec.adv, rec.cyc, rec.identity, rec.gaze, rec.d_loss, metric, cycle
        );

        if metric > best[0].meta.val_metric {
            best = trainer.checkpoints(epoch, metric)?;
            if let Some(files) = &best_files {
                for (ck, p) in best.iter_mut().zip(files) {
                    ck.meta.history = history.clone();
                    ck.save(p)?;
                }
            }
        }
        if let Some(files) = &last_files {
            let mut last = trainer.checkpoints(epoch, metric)?;
            for ((ck, p), opt) in last.iter_mut().zip(files).zip(&trainer.opt) {
                ck.meta.history = history.clone();
                ck.meta.optimizer_steps = opt.steps();
                ck.optimizer = opt.state()?;
                ck.save(p)?;
            }
        }
        if let Some(log) = &log {
            log.append(&rec)?;
        }
        records.push(rec);
        stopped_early = early_stop_check(&history, cfg.early_stop_patience) == EarlyStop::Stop;
    }
    for ck in best.iter_mut() {
        ck.meta.history = history.clone();
    }
    Ok(GanRun {
        g_wg: best[0].to_generator()?,
        g_ng: best[1].to_generator()?,
        d_wg: best[2].to_discriminator()?,
        d_ng: best[3].to_discriminator()?,
        checkpoints: best,
        history,
        records,
        stopped_early,
        completed,
    })
}
