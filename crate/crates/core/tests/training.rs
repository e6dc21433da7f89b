use gpc::dataio::synth::{generate_split, SynthSplitPlan};
use gpc::dataio::{CaptureCondition, Domain, EyeDataset, PreprocessConfig, SyntheticSpec};
use gpc::eval::{predict, translate};
use gpc::training::*;

fn split(plan: SynthSplitPlan, conditions: &[CaptureCondition], seed: u64) -> EyeDataset {
    let samples = generate_split(&SyntheticSpec::default(), &plan, conditions, "s", seed).unwrap();
    EyeDataset::from_synth(&samples, &PreprocessConfig { image_size: 32, ..Default::default() }).unwrap()
}

fn desk_config() -> TrainConfig {
    let mut cfg = TrainConfig { batch_size: 16, seed: 3, ..TrainConfig::default() };
    cfg.model.generator.base_channels = 8;
    cfg.model.generator.res_blocks = 2;
    cfg.model.discriminator.base_channels = 8;
    cfg.model.discriminator.strided_layers = 1;
    cfg
}

#[test]
fn classifier_separates_synthetic_zones() {
    let day = [CaptureCondition::ALL[0]];
    let train = split(SynthSplitPlan { subjects: 10, per_zone: 30, subjects_with_glasses: 0 }, &day, 1);
    let val = split(SynthSplitPlan { subjects: 2, per_zone: 10, subjects_with_glasses: 0 }, &day, 2);
    assert_eq!(train.len(), 2100);
    let cfg = TrainConfig { epochs_classifier: 10, ..desk_config() };
    let run = train_classifier_step1(&train, &val, &cfg, &TrainOptions::default()).unwrap();
    assert_eq!(run.history[0].0, 0);
    let preds = predict(&run.model, None, &val).unwrap();
    let correct = preds.iter().zip(&val.zones).filter(|(p, z)| **p == z.code()).count();
    let micro = correct as f64 / val.len() as f64;
    assert!(micro >= 0.95, "validation micro accuracy {micro}");
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let conds = CaptureCondition::ALL;
    let train = split(SynthSplitPlan { subjects: 2, per_zone: 3, subjects_with_glasses: 1 }, &conds, 4).domain(Domain::X);
    let val = split(SynthSplitPlan { subjects: 1, per_zone: 2, subjects_with_glasses: 1 }, &conds, 5).domain(Domain::X);
    let cfg = TrainConfig { epochs_classifier: 3, early_stop_patience: 10, ..desk_config() };
    let full = train_classifier_step1(&train, &val, &cfg, &TrainOptions::default()).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let opts = |resume, max_epochs| TrainOptions { out_dir: Some(dir.path().to_path_buf()), tag: None, resume, max_epochs };
    let first = train_classifier_step1(&train, &val, &cfg, &opts(false, Some(1))).unwrap();
    assert!(!first.completed);
    let rest = train_classifier_step1(&train, &val, &cfg, &opts(true, None)).unwrap();
    assert!(rest.completed);
    assert_eq!(rest.history, full.history);
    assert_eq!(rest.model.params.hash().unwrap(), full.model.params.hash().unwrap());
}

#[test]
fn gan_and_finetune_on_synthetic_pairs() {
    let conds = CaptureCondition::ALL;
    let train = split(SynthSplitPlan { subjects: 6, per_zone: 6, subjects_with_glasses: 6 }, &conds, 6);
    let val = split(SynthSplitPlan { subjects: 2, per_zone: 4, subjects_with_glasses: 2 }, &conds, 7);
    let test = split(SynthSplitPlan { subjects: 2, per_zone: 4, subjects_with_glasses: 2 }, &conds, 8);
    let (tx, ty, vx, vy) = (train.domain(Domain::X), train.domain(Domain::Y), val.domain(Domain::X), val.domain(Domain::Y));
    let cfg = TrainConfig { epochs_classifier: 12, epochs_gan: 12, epochs_finetune: 3, early_stop_patience: 12, ..desk_config() };
    let opts = TrainOptions::default();
    let step1 = train_classifier_step1(&tx, &vx, &cfg, &opts).unwrap();
    let gan = train_gan_step2(GanData { train_x: &tx, train_y: &ty, val_x: &vx, val_y: &vy }, &step1.model, &cfg, &opts).unwrap();

    let cyc: Vec<f64> = gan.records.iter().map(|r| r.val_cycle).collect();
    assert_eq!(gan.records[0].epoch, 0);
    assert!(cyc.last().unwrap() < &(0.5 * cyc[0]), "held-out cycle error by epoch {cyc:?}");

    // The identity term keeps removal close to a no-op on images without glasses.
    let sx = test.domain(Domain::X);
    let plain = predict(&step1.model, None, &sx).unwrap();
    let removed = predict(&step1.model, Some(&gan.g_ng), &sx).unwrap();
    let changed = plain.iter().zip(&removed).filter(|(a, b)| a != b).count();
    assert!((changed as f64) < 0.05 * sx.len() as f64, "{changed}/{} predictions changed", sx.len());
    assert_eq!(translate(&gan.g_ng, &sx).unwrap().len(), sx.len());

    let ft = finetune_step3(&step1.model, &gan.g_ng, &tx, &ty, &val, &cfg, &opts).unwrap();
    let pre = ft.history[0].1;
    assert!(ft.best_metric() >= pre, "{:?}", ft.history);
}
