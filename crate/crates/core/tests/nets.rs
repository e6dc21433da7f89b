use candle_core::{DType, Device, Tensor, D};
use gpc::dataio::NUM_ZONES;
use gpc::nets::*;
use gpc::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_input(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n: usize = shape.iter().product();
    let v: Vec<f32> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor::from_vec(v, shape, &Device::Cpu).unwrap()
}

fn small_generator() -> GeneratorConfig {
    GeneratorConfig { base_channels: 4, res_blocks: 2, downsamplings: 2, ..Default::default() }
}

#[test]
fn classifier_seed_determinism_and_size() {
    let cfg = ClassifierConfig::default();
    let a = GazeClassifier::build(1, 3, &cfg).unwrap();
    let b = GazeClassifier::build(1, 3, &cfg).unwrap();
    let c = GazeClassifier::build(1, 4, &cfg).unwrap();
    assert_eq!(a.params.hash().unwrap(), b.params.hash().unwrap());
    assert_ne!(a.params.hash().unwrap(), c.params.hash().unwrap());
    assert!(a.num_params() < 2_000_000);
    assert!(matches!(GazeClassifier::build(2, 0, &cfg), Err(Error::BadChannelRequest(2))));
}

#[test]
fn classifier_head_on_full_resolution_probe() {
    let clf = GazeClassifier::build(3, 0, &ClassifierConfig::default()).unwrap();
    let x = Tensor::zeros((1, 3, 256, 256), DType::F32, &Device::Cpu).unwrap();
    let out = clf.forward(&x).unwrap();
    // stem /2, two pools /4 -> 32x32
    assert_eq!(out.cams.dims(), &[1, NUM_ZONES, 32, 32]);
    let logits = out.logits.flatten_all().unwrap().to_vec1::<f32>().unwrap();
    assert!(logits.iter().all(|v| v.is_finite()));
    let bad = Tensor::zeros((1, 1, 256, 256), DType::F32, &Device::Cpu).unwrap();
    assert!(matches!(clf.forward(&bad), Err(Error::ShapeMismatch { .. })));
}

#[test]
fn cam_mean_equals_logit_and_probs_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let clf = GazeClassifier::build(1, 1, &ClassifierConfig::default()).unwrap();
    // Larger weights so CAMs are far from zero.
    for name in clf.params.names().map(String::from).collect::<Vec<_>>() {
        clf.params.scale(&name, 20.0).unwrap();
    }
    for _ in 0..5 {
        let x = random_input(&mut rng, &[4, 1, 64, 64]);
        let out = clf.forward(&x).unwrap();
        let means = out.cams.flatten_from(2).unwrap().mean(D::Minus1).unwrap();
        let diff = (means - &out.logits).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(diff < 1e-5, "{diff}");
        let sums = out.probs.sum(1).unwrap().to_vec1::<f32>().unwrap();
        assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-6));
    }
}

#[test]
fn doubling_head_doubles_cams_and_logits() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clf = GazeClassifier::build(1, 2, &ClassifierConfig::default()).unwrap();
    let x = random_input(&mut rng, &[2, 1, 64, 64]);
    let before = clf.forward(&x).unwrap();
    clf.params.scale("head.weight", 2.0).unwrap();
    clf.params.scale("head.bias", 2.0).unwrap();
    let after = clf.forward(&x).unwrap();
    for (a, b) in [(&before.cams, &after.cams), (&before.logits, &after.logits)] {
        let d = ((a * 2.0).unwrap() - b).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
        assert!(d < 1e-6, "{d}");
    }
}

#[test]
fn generator_shape_and_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for c in [1, 3] {
        let g = Generator::build(c, 0, &small_generator()).unwrap();
        for name in g.params.names().map(String::from).collect::<Vec<_>>() {
            g.params.scale(&name, 100.0).unwrap();
        }
        for _ in 0..4 {
            let x = random_input(&mut rng, &[250 / (4 * c), c, 20, 20]).affine(50.0, 0.0).unwrap();
            let y = g.forward(&x).unwrap();
            assert_eq!(y.dims(), x.dims());
            let m = y.abs().unwrap().max_all().unwrap().to_scalar::<f32>().unwrap();
            assert!(m < 1.0, "{m}");
        }
    }
}

#[test]
fn generator_odd_size_round_trips_shape() {
    let g = Generator::build(1, 0, &small_generator()).unwrap();
    let x = Tensor::zeros((1, 1, 25, 25), DType::F32, &Device::Cpu).unwrap();
    assert_eq!(g.forward(&x).unwrap().dims(), &[1, 1, 25, 25]);
}

#[test]
fn generator_information_flows_at_init() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = Generator::build(1, 1, &small_generator()).unwrap();
    let x = random_input(&mut rng, &[1, 1, 16, 16]);
    let base = g.forward(&x).unwrap().mean_all().unwrap().to_scalar::<f32>().unwrap() as f64;
    let mut v = x.flatten_all().unwrap().to_vec1::<f32>().unwrap();
    let h = 1e-2f32;
    let mut nonzero = 0;
    for i in [0usize, 37, 100, 200] {
        v[i] += h;
        let xp = Tensor::from_vec(v.clone(), (1, 1, 16, 16), &Device::Cpu).unwrap();
        let m = g.forward(&xp).unwrap().mean_all().unwrap().to_scalar::<f32>().unwrap() as f64;
        v[i] -= h;
        if (m - base).abs() > 0.0 {
            nonzero += 1;
        }
    }
    assert_eq!(nonzero, 4);
}

#[test]
fn discriminator_scores_in_unit_interval_and_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let d = PatchDiscriminator::build(3, 0, &DiscriminatorConfig { base_channels: 4, strided_layers: 3 }).unwrap();
    let x = random_input(&mut rng, &[2, 3, 256, 256]);
    let a = d.forward(&x).unwrap();
    assert_eq!(a.dims(), &[2, 1, 30, 30]);
    let v = a.flatten_all().unwrap().to_vec1::<f32>().unwrap();
    assert!(v.iter().all(|s| *s > 0.0 && *s < 1.0));
    let b = d.forward(&x).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
    assert_eq!(v, b);
}

fn changed_units(d: &PatchDiscriminator, base: &[f32], img: &[f32], size: usize, px: (usize, usize)) -> Vec<(usize, usize)> {
    let mut v = img.to_vec();
    v[px.1 * size + px.0] += 0.5;
    let x = Tensor::from_vec(v, (1, 1, size, size), &Device::Cpu).unwrap();
    let out = d.forward_logits(&x).unwrap();
    let w = out.dim(3).unwrap();
    let o = out.flatten_all().unwrap().to_vec1::<f32>().unwrap();
    o.iter()
        .zip(base)
        .enumerate()
        .filter(|(_, (a, b))| a != b)
        .map(|(i, _)| (i % w, i / w))
        .collect()
}

#[test]
fn receptive_field_is_70_by_70() {
    let cfg = DiscriminatorConfig { base_channels: 4, strided_layers: 3 };
    assert_eq!(cfg.receptive_field(), 70);
    let d = PatchDiscriminator::build(1, 7, &cfg).unwrap();
    let size = 128;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let img = random_input(&mut rng, &[1, 1, size, size]);
    let base = d.forward_logits(&img).unwrap().flatten_all().unwrap().to_vec1::<f32>().unwrap();
    let img = img.flatten_all().unwrap().to_vec1::<f32>().unwrap();

    // Interior unit: its span lies fully inside the image.
    let u = 7;
    let (s, e) = cfg.receptive_span(u);
    assert!(s >= 0 && e <= size as i64);
    let row = ((s + e) / 2) as usize;
    let mut hits = Vec::new();
    for x in (s - 4).max(0)..(e + 4).min(size as i64) {
        if changed_units(&d, &base, &img, size, (x as usize, row)).contains(&(u, u)) {
            hits.push(x);
        }
    }
    assert_eq!(hits, (s..e).collect::<Vec<_>>());
    let mut vhits = Vec::new();
    for y in (s - 4).max(0)..(e + 4).min(size as i64) {
        if changed_units(&d, &base, &img, size, (row, y as usize)).contains(&(u, u)) {
            vhits.push(y);
        }
    }
    assert_eq!(vhits, (s..e).collect::<Vec<_>>());

    // Any single-pixel perturbation only touches units whose span covers it.
    for _ in 0..12 {
        let px = (rng.gen_range(0..size), rng.gen_range(0..size));
        for (ux, uy) in changed_units(&d, &base, &img, size, px) {
            let (sx, ex) = cfg.receptive_span(ux);
            let (sy, ey) = cfg.receptive_span(uy);
            assert!((sx..ex).contains(&(px.0 as i64)) && (sy..ey).contains(&(px.1 as i64)));
        }
    }
}

#[test]
fn frozen_views_block_parameter_gradients() {
    let clf = GazeClassifier::build(1, 0, &ClassifierConfig::default()).unwrap();
    let frozen = clf.with_params(clf.params.detached());
    let x = candle_core::Var::from_tensor(&Tensor::ones((1, 1, 32, 32), DType::F32, &Device::Cpu).unwrap()).unwrap();
    let loss = frozen.forward(x.as_tensor()).unwrap().logits.sum_all().unwrap();
    let grads = loss.backward().unwrap();
    assert!(grads.get(x.as_tensor()).is_some());
    for v in clf.params.vars() {
        assert!(grads.get(v.as_tensor()).is_none());
    }
}

#[test]
fn param_arrays_round_trip() {
    let g = Generator::build(1, 3, &small_generator()).unwrap();
    let arrays = g.params.to_arrays().unwrap();
    let back = ParamStore::from_arrays(&arrays, &g.params).unwrap();
    assert_eq!(back.hash().unwrap(), g.params.hash().unwrap());
    let mut wrong = arrays.clone();
    wrong[0].shape = vec![1];
    assert!(matches!(ParamStore::from_arrays(&wrong, &g.params), Err(Error::CorruptCheckpoint(_))));
}
