//! Procedural eye images with a known pupil position.
//!
//! Every call renders one scene twice: once bare, once with a glasses frame
//! and (optionally) a glare blob composited on top. Both renders share the
//! pupil centre and sensor noise, so they differ only inside the overlay mask.

use std::path::{Path, PathBuf};

use image::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::manifest::{write_manifest, SampleRecord};
use super::preprocess::{EyeImage, EyePixels};
use super::zone::{CaptureCondition, Domain, Eyewear, GazeZone, Lighting, NUM_ZONES};
use crate::{Error, Result};

/// Side length of rendered synthetic images.
pub const CANVAS: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    /// Canonical pupil centre per zone (indexed by zone code), in canvas pixels.
    pub pupil_center_by_zone: [(f32, f32); NUM_ZONES],
    pub jitter_px: f32,
    /// Inclusive range of frame bar thickness.
    pub glasses_frame_thickness_px: (u32, u32),
    pub glare_probability: f32,
    pub glare_intensity: (f32, f32),
    pub lighting: Lighting,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            pupil_center_by_zone: [
                (72.0, 164.0),  // eyes closed / lap
                (128.0, 126.0), // forward
                (66.0, 126.0),  // left mirror
                (110.0, 158.0), // speedometer
                (160.0, 160.0), // radio
                (164.0, 100.0), // rearview
                (190.0, 126.0), // right mirror
            ],
            jitter_px: 6.0,
            glasses_frame_thickness_px: (6, 16),
            glare_probability: 0.5,
            glare_intensity: (0.6, 0.95),
            lighting: Lighting::Day,
            rng_seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.jitter_px >= 0.0 && self.jitter_px.is_finite()) {
            return bad(format!("jitter_px must be non-negative, got {}", self.jitter_px));
        }
        let (t0, t1) = self.glasses_frame_thickness_px;
        if t0 == 0 || t1 < t0 {
            return bad(format!("frame thickness range ({t0}, {t1}) must be positive and ordered"));
        }
        if !(0.0..=1.0).contains(&self.glare_probability) {
            return bad(format!("glare_probability {} outside [0, 1]", self.glare_probability));
        }
        let (g0, g1) = self.glare_intensity;
        if !(0.0..=1.0).contains(&g0) || !(0.0..=1.0).contains(&g1) || g1 < g0 {
            return bad(format!("glare_intensity range ({g0}, {g1}) must be ordered within [0, 1]"));
        }
        let min_sep = self.min_separation();
        if min_sep < 4.0 * self.jitter_px || min_sep == 0.0 {
            return bad(format!("canonical pupil positions {min_sep:.2}px apart, need >= 4 x jitter ({})", self.jitter_px));
        }
        for &(x, y) in &self.pupil_center_by_zone {
            if !(0.0..CANVAS as f32).contains(&x) || !(0.0..CANVAS as f32).contains(&y) {
                return bad(format!("pupil position ({x}, {y}) outside the canvas"));
            }
        }
        Ok(())
    }

    pub fn canonical(&self, zone: GazeZone) -> (f32, f32) {
        self.pupil_center_by_zone[zone.code()]
    }

    pub fn min_separation(&self) -> f32 {
        let p = &self.pupil_center_by_zone;
        let mut best = f32::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                best = best.min(dist(p[i], p[j]));
            }
        }
        best
    }

    /// Zone whose canonical pupil position is closest to `point`.
    pub fn nearest_zone(&self, point: (f32, f32)) -> GazeZone {
        let (mut best, mut best_d) = (GazeZone::Forward, f32::INFINITY);
        for z in GazeZone::ALL {
            let d = dist(self.canonical(z), point);
            if d < best_d {
                best = z;
                best_d = d;
            }
        }
        best
    }
}

fn dist(a: (f32, f32), b: (f32, f32)) -> f32 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Per-subject appearance: eye geometry, tones and the subject's glasses frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectStyle {
    skin: f32,
    sclera: f32,
    iris: f32,
    pupil: f32,
    eye_axes: (f32, f32),
    iris_radius: f32,
    pupil_radius: f32,
    brow_y: f32,
    brow_half_height: f32,
    brow_tone: f32,
    frame_center: (f32, f32),
    frame_half: (f32, f32),
    frame_tone: f32,
}

impl SubjectStyle {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            skin: rng.gen_range(0.50..0.62),
            sclera: rng.gen_range(0.80..0.90),
            iris: rng.gen_range(0.38..0.48),
            pupil: rng.gen_range(0.04..0.10),
            eye_axes: (rng.gen_range(96.0..104.0), rng.gen_range(52.0..58.0)),
            iris_radius: rng.gen_range(25.0..29.0),
            pupil_radius: rng.gen_range(10.0..13.0),
            brow_y: rng.gen_range(38.0..50.0),
            brow_half_height: rng.gen_range(6.0..9.0),
            brow_tone: rng.gen_range(0.25..0.35),
            frame_center: (rng.gen_range(116.0..140.0), rng.gen_range(116.0..140.0)),
            frame_half: (rng.gen_range(108.0..122.0), rng.gen_range(50.0..68.0)),
            frame_tone: rng.gen_range(0.05..0.2),
        }
    }
}

/// Output of [`synth_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPair {
    pub without_glasses: EyeImage,
    pub with_glasses: EyeImage,
    pub pupil_center: (f32, f32),
    /// Row-major `CANVAS x CANVAS` mask of pixels touched by the glasses overlay.
    pub overlay_mask: Vec<bool>,
}

impl SynthPair {
    pub fn gray(&self, eyewear: Eyewear) -> GrayImage {
        let img = match eyewear {
            Eyewear::WithGlasses => &self.with_glasses,
            Eyewear::WithoutGlasses => &self.without_glasses,
        };
        eye_to_gray(&img.pixels)
    }
}

/// Renders a pair for a freshly sampled subject appearance.
pub fn synth_pair<R: Rng + ?Sized>(spec: &SyntheticSpec, zone: GazeZone, rng: &mut R) -> SynthPair {
    let style = SubjectStyle::sample(rng);
    synth_pair_for(spec, zone, &style, rng)
}

/// Renders a pair for a fixed subject appearance.
pub fn synth_pair_for<R: Rng + ?Sized>(spec: &SyntheticSpec, zone: GazeZone, style: &SubjectStyle, rng: &mut R) -> SynthPair {
    let (cx, cy) = spec.canonical(zone);
    let (jx, jy) = if spec.jitter_px > 0.0 {
        // Uniform over the disc of radius jitter_px.
        let r = spec.jitter_px * rng.gen::<f32>().sqrt();
        let a = rng.gen_range(0.0..std::f32::consts::TAU);
        (r * a.cos(), r * a.sin())
    } else {
        (0.0, 0.0)
    };
    let pupil_center = (cx + jx, cy + jy);
    render_pair(spec, style, pupil_center, rng)
}

/// Renders a pair with an explicit pupil centre; used for controlled-shift tests.
pub fn render_pair<R: Rng + ?Sized>(spec: &SyntheticSpec, style: &SubjectStyle, pupil_center: (f32, f32), rng: &mut R) -> SynthPair {
    let scene = render_scene(style, pupil_center);

    let thickness = rng.gen_range(spec.glasses_frame_thickness_px.0..=spec.glasses_frame_thickness_px.1) as f32;
    let jitter = (rng.gen_range(-4.0..4.0f32), rng.gen_range(-4.0..4.0f32));
    let glare = if rng.gen::<f32>() < spec.glare_probability {
        let (a, b) = style.eye_axes;
        let ang = rng.gen_range(0.0..std::f32::consts::TAU);
        let rad = rng.gen::<f32>().sqrt() * 0.8;
        Some(Glare {
            center: (128.0 + a * rad * ang.cos(), 128.0 + b * rad * ang.sin()),
            sigma: rng.gen_range(10.0..18.0),
            intensity: rng.gen_range(spec.glare_intensity.0..=spec.glare_intensity.1),
        })
    } else {
        None
    };
    let (gain, offset, noise_sd) = match spec.lighting {
        Lighting::Day => (1.0, 0.0, 0.01),
        Lighting::Night => (0.55, 0.08, 0.025),
    };
    let normal = Normal::new(0.0f32, noise_sd).expect("valid sd");
    let noise: Vec<f32> = (0..CANVAS * CANVAS).map(|_| normal.sample(rng)).collect();

    let (fx, fy) = (style.frame_center.0 + jitter.0, style.frame_center.1 + jitter.1);
    let (hw, hh) = style.frame_half;
    let mut with = scene.clone();
    let mut mask = vec![false; CANVAS * CANVAS];
    for y in 0..CANVAS {
        for x in 0..CANVAS {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            let (dx, dy) = ((px - fx).abs(), (py - fy).abs());
            let in_outer = dx <= hw && dy <= hh;
            let in_inner = dx <= hw - thickness && dy <= hh - thickness;
            let i = y * CANVAS + x;
            if in_outer && !in_inner {
                with[i] = style.frame_tone;
                mask[i] = true;
            }
            if let Some(g) = &glare {
                let r2 = (px - g.center.0).powi(2) + (py - g.center.1).powi(2);
                if r2 <= (3.0 * g.sigma).powi(2) {
                    let alpha = g.intensity * (-r2 / (2.0 * g.sigma * g.sigma)).exp();
                    with[i] += alpha * (1.0 - with[i]);
                    mask[i] = true;
                }
            }
        }
    }

    let expose = |v: f32, n: f32| ((offset + gain * v + n).clamp(0.0, 1.0) * 255.0).round();
    let to_eye = |img: &[f32], domain| {
        let data = img.iter().zip(&noise).map(|(&v, &n)| expose(v, n) / 127.5 - 1.0).collect();
        EyeImage {
            pixels: EyePixels { size: CANVAS, channels: 1, data },
            domain,
            zone: spec.nearest_zone(pupil_center),
            subject_id: "synthetic".into(),
        }
    };
    SynthPair {
        without_glasses: to_eye(&scene, Domain::X),
        with_glasses: to_eye(&with, Domain::Y),
        pupil_center,
        overlay_mask: mask,
    }
}

struct Glare {
    center: (f32, f32),
    sigma: f32,
    intensity: f32,
}

/// Anti-aliased scene intensities in `[0, 1]` before lighting and noise.
fn render_scene(style: &SubjectStyle, pupil: (f32, f32)) -> Vec<f32> {
    let (a, b) = style.eye_axes;
    let centre = 128.0f32;
    let mut out = vec![0.0f32; CANVAS * CANVAS];
    for y in 0..CANVAS {
        for x in 0..CANVAS {
            let (px, py) = (x as f32 + 0.5, y as f32 + 0.5);
            let brow = coverage((py - style.brow_y).abs() - style.brow_half_height)
                * coverage((px - centre).abs() - a * 1.05);
            let mut v = style.skin + brow * (style.brow_tone - style.skin);
            // Signed distance to the eye opening, approximated by the scaled radius.
            let rn = (((px - centre) / a).powi(2) + ((py - centre) / b).powi(2)).sqrt();
            let eye = coverage((rn - 1.0) * b);
            if eye > 0.0 {
                let dp = ((px - pupil.0).powi(2) + (py - pupil.1).powi(2)).sqrt();
                let iris = coverage(dp - style.iris_radius);
                let pupil_c = coverage(dp - style.pupil_radius);
                let mut inner = style.sclera + iris * (style.iris - style.sclera);
                inner += pupil_c * (style.pupil - inner);
                v += eye * (inner - v);
            }
            out[y * CANVAS + x] = v;
        }
    }
    out
}

/// Pixel coverage from a signed distance (negative inside).
fn coverage(sd: f32) -> f32 {
    (0.5 - sd).clamp(0.0, 1.0)
}

/// 8-bit grayscale view of model pixels (first channel).
pub fn eye_to_gray(px: &EyePixels) -> GrayImage {
    let bytes = px.plane(0).iter().map(|v| ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8).collect();
    GrayImage::from_raw(px.size as u32, px.size as u32, bytes).expect("square plane")
}

/// Samples per split for a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSplitPlan {
    pub subjects: usize,
    /// Images per (condition, zone) cell.
    pub per_zone: usize,
    /// Subjects that also appear wearing glasses, counted from the first.
    pub subjects_with_glasses: usize,
}

impl Default for SynthSplitPlan {
    fn default() -> Self {
        Self { subjects: 3, per_zone: 10, subjects_with_glasses: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthPlan {
    pub train: SynthSplitPlan,
    pub val: SynthSplitPlan,
    pub test: SynthSplitPlan,
    pub conditions: Vec<CaptureCondition>,
}

impl Default for SynthPlan {
    fn default() -> Self {
        Self {
            train: SynthSplitPlan { subjects: 9, per_zone: 30, subjects_with_glasses: 5 },
            val: SynthSplitPlan { subjects: 1, per_zone: 10, subjects_with_glasses: 1 },
            test: SynthSplitPlan { subjects: 3, per_zone: 10, subjects_with_glasses: 3 },
            conditions: CaptureCondition::ALL.to_vec(),
        }
    }
}

/// One generated image with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthSample {
    pub image: GrayImage,
    pub subject_id: String,
    pub zone: GazeZone,
    pub condition: CaptureCondition,
    pub pupil_center: (f32, f32),
}

/// Generates one split deterministically from `seed`. Each image is one side
/// of a rendered pair; the side is chosen by the cell's eyewear condition.
pub fn generate_split(spec: &SyntheticSpec, plan: &SynthSplitPlan, conditions: &[CaptureCondition], split_name: &str, seed: u64) -> Result<Vec<SynthSample>> {
    spec.validate()?;
    let mut out = Vec::new();
    for s in 0..plan.subjects {
        let subject_id = format!("{split_name}_s{s:02}");
        let mut style_rng = ChaCha8Rng::seed_from_u64(seed);
        style_rng.set_stream(1 + s as u64);
        let style = SubjectStyle::sample(&mut style_rng);
        for (ci, cond) in conditions.iter().enumerate() {
            if cond.eyewear == Eyewear::WithGlasses && s >= plan.subjects_with_glasses {
                continue;
            }
            let cell_spec = SyntheticSpec { lighting: cond.lighting, ..spec.clone() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0000_0000);
            rng.set_stream(((s as u64) << 8) | ci as u64);
            for zone in GazeZone::ALL {
                for _ in 0..plan.per_zone {
                    let pair = synth_pair_for(&cell_spec, zone, &style, &mut rng);
                    out.push(SynthSample {
                        image: pair.gray(cond.eyewear),
                        subject_id: subject_id.clone(),
                        zone,
                        condition: *cond,
                        pupil_center: pair.pupil_center,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Files written by [`write_synthetic_split`].
#[derive(Debug, Clone)]
pub struct WrittenSplit {
    pub manifest: PathBuf,
    pub ground_truth: PathBuf,
    pub records: Vec<SampleRecord>,
}

pub const GROUND_TRUTH_HEADER: [&str; 3] = ["image_path", "pupil_x", "pupil_y"];

/// Writes PNGs under `dir/<split>/`, a manifest `dir/<split>.csv` and the
/// pupil ground-truth sidecar `dir/<split>_pupils.csv`.
pub fn write_synthetic_split(dir: &Path, split_name: &str, samples: &[SynthSample]) -> Result<WrittenSplit> {
    let img_dir = dir.join(split_name);
    std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
    let manifest = dir.join(format!("{split_name}.csv"));
    let ground_truth = dir.join(format!("{split_name}_pupils.csv"));
    let mut records = Vec::with_capacity(samples.len());
    let mut gt = csv::Writer::from_path(&ground_truth).map_err(|e| Error::Config(e.to_string()))?;
    gt.write_record(GROUND_TRUTH_HEADER).map_err(|e| Error::Config(e.to_string()))?;
    for (i, s) in samples.iter().enumerate() {
        let name = format!("{split_name}/{i:06}_{}_{}_{}.png", s.subject_id, s.zone.code(), s.condition.label());
        let path = dir.join(&name);
        s.image.save(&path)?;
        gt.write_record([name.as_str(), &s.pupil_center.0.to_string(), &s.pupil_center.1.to_string()])
            .map_err(|e| Error::Config(e.to_string()))?;
        records.push(SampleRecord {
            image_path: path,
            subject_id: s.subject_id.clone(),
            zone: s.zone,
            condition: s.condition,
            landmarks: None,
        });
    }
    gt.flush().map_err(|e| Error::io(&ground_truth, e))?;
    write_manifest(&manifest, &records)?;
    Ok(WrittenSplit { manifest, ground_truth, records })
}

/// Reads a pupil ground-truth sidecar; paths resolve against its directory.
pub fn load_ground_truth(path: &Path) -> Result<Vec<(PathBuf, (f32, f32))>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Config(e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::MalformedRow { line: i + 2, reason: e.to_string() })?;
        let parse = |s: &str| s.parse::<f32>().map_err(|_| Error::MalformedRow { line: i + 2, reason: format!("bad coordinate {s:?}") });
        if row.len() != 3 {
            return Err(Error::MalformedRow { line: i + 2, reason: "expected 3 fields".into() });
        }
        out.push((base.join(&row[0]), (parse(&row[1])?, parse(&row[2])?)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid_and_separable() {
        let spec = SyntheticSpec::default();
        spec.validate().unwrap();
        assert!(spec.min_separation() >= 4.0 * spec.jitter_px);
        let mut crowded = spec.clone();
        crowded.jitter_px = spec.min_separation() / 3.0;
        assert!(crowded.validate().is_err());
    }

    #[test]
    fn zero_jitter_hits_canonical_position() {
        let spec = SyntheticSpec { jitter_px: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pair = synth_pair(&spec, GazeZone::Forward, &mut rng);
        assert_eq!(pair.pupil_center, spec.canonical(GazeZone::Forward));
    }

    #[test]
    fn same_seed_same_pair() {
        let spec = SyntheticSpec::default();
        let a = synth_pair(&spec, GazeZone::Radio, &mut ChaCha8Rng::seed_from_u64(42));
        let b = synth_pair(&spec, GazeZone::Radio, &mut ChaCha8Rng::seed_from_u64(42));
        assert_eq!(a, b);
    }

    #[test]
    fn pair_differs_only_under_overlay() {
        let spec = SyntheticSpec { glare_probability: 1.0, lighting: Lighting::Night, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for zone in GazeZone::ALL {
            let pair = synth_pair(&spec, zone, &mut rng);
            let (x, y) = (&pair.without_glasses.pixels.data, &pair.with_glasses.pixels.data);
            let mut changed = 0;
            for i in 0..x.len() {
                if pair.overlay_mask[i] {
                    changed += (x[i] != y[i]) as usize;
                } else {
                    assert_eq!(x[i].to_bits(), y[i].to_bits(), "pixel {i} outside overlay differs");
                }
            }
            assert!(changed > 0);
        }
    }

    #[test]
    fn nearest_canonical_classifier_is_exact() {
        let spec = SyntheticSpec::default();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
        let mut correct = 0;
        for zone in GazeZone::ALL {
            for _ in 0..100 {
                let pair = synth_pair(&spec, zone, &mut rng);
                // Brute force over the seven canonical positions.
                let guess = GazeZone::ALL
                    .iter()
                    .min_by(|a, b| {
                        dist(spec.canonical(**a), pair.pupil_center).total_cmp(&dist(spec.canonical(**b), pair.pupil_center))
                    })
                    .unwrap();
                correct += (*guess == zone) as usize;
            }
        }
        assert_eq!(correct, 700);
    }

    #[test]
    fn split_generation_counts_and_subjects() {
        let spec = SyntheticSpec::default();
        let plan = SynthSplitPlan { subjects: 2, per_zone: 2, subjects_with_glasses: 1 };
        let samples = generate_split(&spec, &plan, &CaptureCondition::ALL, "train", 5).unwrap();
        // subject 0: 4 conditions, subject 1: 2 conditions; 7 zones x 2 each.
        assert_eq!(samples.len(), (4 + 2) * 7 * 2);
        let again = generate_split(&spec, &plan, &CaptureCondition::ALL, "train", 5).unwrap();
        assert!(samples.iter().zip(&again).all(|(a, b)| a.image == b.image && a.pupil_center == b.pupil_center));
    }
}
