use candle_core::Tensor;
use image::{Rgb, RgbImage};

use crate::dataio::synth::CANVAS;
use crate::dataio::{EyePixels, GazeZone};
use crate::{Error, Result};

/// Overlay opacity of the heat map.
pub const OVERLAY_ALPHA: f32 = 0.5;

const VIRIDIS: [[f32; 3]; 5] =
    [[68.0, 1.0, 84.0], [59.0, 82.0, 139.0], [33.0, 145.0, 140.0], [94.0, 201.0, 98.0], [253.0, 231.0, 37.0]];

/// Perceptual colour for `t` in `[0, 1]`.
pub fn colormap(t: f32) -> [f32; 3] {
    let t = t.clamp(0.0, 1.0) * (VIRIDIS.len() - 1) as f32;
    let i = (t.floor() as usize).min(VIRIDIS.len() - 2);
    let f = t - i as f32;
    let (a, b) = (VIRIDIS[i], VIRIDIS[i + 1]);
    [a[0] + (b[0] - a[0]) * f, a[1] + (b[1] - a[1]) * f, a[2] + (b[2] - a[2]) * f]
}

/// Bilinear resampling of an `h x w` plane (pixel-centre aligned, edges clamped).
pub fn upsample_bilinear(plane: &[f32], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    let coord = |o: usize, n_in: usize, n_out: usize| -> (usize, usize, f32) {
        let t = ((o as f32 + 0.5) * n_in as f32 / n_out as f32 - 0.5).clamp(0.0, (n_in - 1) as f32);
        let lo = t.floor() as usize;
        (lo, (lo + 1).min(n_in - 1), t - lo as f32)
    };
    let mut out = Vec::with_capacity(out_h * out_w);
    for oy in 0..out_h {
        let (y0, y1, fy) = coord(oy, h, out_h);
        for ox in 0..out_w {
            let (x0, x1, fx) = coord(ox, w, out_w);
            let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
            let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

/// CAM overlay at canvas resolution.
#[derive(Debug, Clone)]
pub struct CamOverlay {
    pub image: RgbImage,
    /// Normalized heat in `[0, 1]`, row-major `CANVAS x CANVAS`.
    pub heat: Vec<f32>,
    /// Upsampled raw CAM of the chosen class.
    pub cam: Vec<f32>,
}

/// Blends the chosen class's CAM, upsampled and min-max normalized, over the
/// grayscale eye image.
pub fn render_cam_overlay(image: &EyePixels, cams: &Tensor, zone: GazeZone) -> Result<CamOverlay> {
    let cams = match cams.rank() {
        4 => cams.get(0)?,
        3 => cams.clone(),
        _ => return Err(Error::shape("(7, h, w)", format!("{:?}", cams.dims()))),
    };
    let (_, h, w) = cams.dims3()?;
    let plane = cams.get(zone.code())?.flatten_all()?.to_vec1::<f32>()?;
    let cam = upsample_bilinear(&plane, h, w, CANVAS, CANVAS);
    let (lo, hi) = cam.iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let heat: Vec<f32> = if hi > lo { cam.iter().map(|v| (v - lo) / (hi - lo)).collect() } else { vec![0.0; cam.len()] };

    let gray_in: Vec<f32> = (0..image.size * image.size)
        .map(|i| (0..image.channels).map(|c| image.plane(c)[i]).sum::<f32>() / image.channels as f32)
        .collect();
    let gray = upsample_bilinear(&gray_in, image.size, image.size, CANVAS, CANVAS);
    let mut out = RgbImage::new(CANVAS as u32, CANVAS as u32);
    for (i, px) in out.pixels_mut().enumerate() {
        let g = (gray[i] + 1.0) * 127.5;
        let c = colormap(heat[i]);
        let mix = |k: usize| ((1.0 - OVERLAY_ALPHA) * g + OVERLAY_ALPHA * c[k]).round().clamp(0.0, 255.0) as u8;
        *px = Rgb([mix(0), mix(1), mix(2)]);
    }
    Ok(CamOverlay { image: out, heat, cam })
}

/// Places two images of equal height next to each other.
pub fn side_by_side(a: &RgbImage, b: &RgbImage) -> RgbImage {
    let mut out = RgbImage::new(a.width() + b.width(), a.height().max(b.height()));
    image::imageops::replace(&mut out, a, 0, 0);
    image::imageops::replace(&mut out, b, a.width() as i64, 0);
    out
}
