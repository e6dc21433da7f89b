//! Eye-crop preprocessing: landmark crop, contrast-limited adaptive histogram
//! equalization and conversion to the `[-1, 1]` model input range.

use std::path::Path;

use image::{DynamicImage, GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use super::zone::{Domain, GazeZone};
use crate::{Error, Result};

/// Side length of the square model input.
pub const MODEL_INPUT_SIZE: usize = 256;

/// Value scale of a [`Raster`]'s samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Depth {
    /// Integers in `0..=255`.
    U8,
    /// Reals in `[0, 1]`.
    Unit,
}

impl Depth {
    fn max(self) -> f32 {
        match self {
            Depth::U8 => 255.0,
            Depth::Unit => 1.0,
        }
    }
}

/// Interleaved (HWC) image with 1 or 3 channels, kept in its native value scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub channels: usize,
    pub depth: Depth,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(width: u32, height: u32, channels: usize, depth: Depth, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::BadChannelRequest(channels));
        }
        if data.len() != width as usize * height as usize * channels {
            return Err(Error::shape(width as usize * height as usize * channels, data.len()));
        }
        Ok(Self { width, height, channels, depth, data })
    }

    pub fn filled(width: u32, height: u32, channels: usize, depth: Depth, value: f32) -> Self {
        Self { width, height, channels, depth, data: vec![value; width as usize * height as usize * channels] }
    }

    pub fn from_gray8(img: &GrayImage) -> Self {
        let data = img.as_raw().iter().map(|&v| v as f32).collect();
        Self { width: img.width(), height: img.height(), channels: 1, depth: Depth::U8, data }
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        match img {
            DynamicImage::ImageLuma8(g) => Self::from_gray8(g),
            DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_) => {
                Self::from_gray8(&img.to_luma8())
            }
            DynamicImage::ImageRgb32F(f) => Self {
                width: f.width(),
                height: f.height(),
                channels: 3,
                depth: Depth::Unit,
                data: f.as_raw().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
            },
            other => {
                let rgb = other.to_rgb8();
                Self {
                    width: rgb.width(),
                    height: rgb.height(),
                    channels: 3,
                    depth: Depth::U8,
                    data: rgb.as_raw().iter().map(|&v| v as f32).collect(),
                }
            }
        }
    }

    pub fn open(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path).map_err(|e| Error::BadImage { path: path.to_path_buf(), reason: e.to_string() })?;
        Ok(Self::from_dynamic(&img))
    }

    /// 8-bit image for writing to disk.
    pub fn to_dynamic(&self) -> DynamicImage {
        let scale = 255.0 / self.depth.max();
        let bytes: Vec<u8> = self.data.iter().map(|&v| (v * scale).round().clamp(0.0, 255.0) as u8).collect();
        if self.channels == 1 {
            DynamicImage::ImageLuma8(GrayImage::from_raw(self.width, self.height, bytes).expect("sized buffer"))
        } else {
            DynamicImage::ImageRgb8(RgbImage::from_raw(self.width, self.height, bytes).expect("sized buffer"))
        }
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0 || self.height == 0
    }

    fn at(&self, x: u32, y: u32, c: usize) -> f32 {
        self.data[(y as usize * self.width as usize + x as usize) * self.channels + c]
    }

    /// BT.601 luminance as a single-channel raster.
    pub fn luminance(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self.data.chunks_exact(3).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect();
        Raster { width: self.width, height: self.height, channels: 1, depth: self.depth, data }
    }
}

/// Pixel tensor in model layout: channel-major (CHW), values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyePixels {
    pub size: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl EyePixels {
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.size * self.size;
        &self.data[c * n..(c + 1) * n]
    }

    /// Back to an image in `[0, 1]`, for inspection or re-processing.
    pub fn to_raster(&self) -> Raster {
        let n = self.size * self.size;
        let mut data = vec![0.0; n * self.channels];
        for c in 0..self.channels {
            for (i, v) in self.plane(c).iter().enumerate() {
                data[i * self.channels + c] = ((v + 1.0) * 0.5).clamp(0.0, 1.0);
            }
        }
        Raster { width: self.size as u32, height: self.size as u32, channels: self.channels, depth: Depth::Unit, data }
    }
}

/// Fully preprocessed eye crop with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeImage {
    pub pixels: EyePixels,
    pub domain: Domain,
    pub zone: GazeZone,
    pub subject_id: String,
}

/// Crop box in frame pixel coordinates: columns `x0..x1`, rows `y0..y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

/// Fractional margin added on every side of the landmark bounding box.
pub const CROP_MARGIN: f32 = 0.25;

/// Landmark bounding box expanded by [`CROP_MARGIN`] of its own width (left
/// and right) and height (top and bottom), clipped to the frame.
pub fn eye_crop_box(width: u32, height: u32, landmarks: &[(f32, f32)]) -> Result<CropBox> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    if landmarks.is_empty() {
        return Err(Error::DegenerateLandmarks);
    }
    for &(x, y) in landmarks {
        if !(x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0 && x <= width as f32 && y <= height as f32) {
            return Err(Error::OutOfBounds { x, y, width, height });
        }
    }
    let (mut xmin, mut ymin, mut xmax, mut ymax) = (f32::MAX, f32::MAX, f32::MIN, f32::MIN);
    for &(x, y) in landmarks {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if xmax == xmin && ymax == ymin {
        return Err(Error::DegenerateLandmarks);
    }
    let (mx, my) = ((xmax - xmin) * CROP_MARGIN, (ymax - ymin) * CROP_MARGIN);
    let x0 = (xmin - mx).floor().max(0.0) as u32;
    let y0 = (ymin - my).floor().max(0.0) as u32;
    let mut x1 = ((xmax + mx).ceil() as u32).min(width);
    let mut y1 = ((ymax + my).ceil() as u32).min(height);
    // Collinear landmarks still yield at least one pixel row/column.
    if x1 <= x0 {
        x1 = (x0 + 1).min(width);
    }
    if y1 <= y0 {
        y1 = (y0 + 1).min(height);
    }
    Ok(CropBox { x0, y0, x1, y1 })
}

/// Crops the eye region around `landmarks` and pads it to a square by
/// replicating edge pixels, keeping the crop centred.
pub fn crop_eye_region(frame: &Raster, landmarks: &[(f32, f32)]) -> Result<Raster> {
    if frame.is_empty() {
        return Err(Error::EmptyImage);
    }
    let b = eye_crop_box(frame.width, frame.height, landmarks)?;
    let (w, h) = (b.x1 - b.x0, b.y1 - b.y0);
    let side = w.max(h);
    let (pad_x, pad_y) = ((side - w) / 2, (side - h) / 2);
    let mut data = Vec::with_capacity(side as usize * side as usize * frame.channels);
    for sy in 0..side {
        let y = b.y0 + sy.saturating_sub(pad_y).min(h - 1);
        for sx in 0..side {
            let x = b.x0 + sx.saturating_sub(pad_x).min(w - 1);
            for c in 0..frame.channels {
                data.push(frame.at(x, y, c));
            }
        }
    }
    Ok(Raster { width: side, height: side, channels: frame.channels, depth: frame.depth, data })
}

/// Contrast-limited adaptive histogram equalization settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    pub clip_limit: f32,
    pub tiles: u32,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self { clip_limit: 2.0, tiles: 8 }
    }
}

/// CLAHE with default parameters.
pub fn equalize_adaptive(crop: &Raster) -> Result<Raster> {
    equalize_adaptive_with(crop, ClaheParams::default())
}

/// CLAHE on grayscale input, or on the luma channel of RGB input (chroma kept).
pub fn equalize_adaptive_with(crop: &Raster, params: ClaheParams) -> Result<Raster> {
    if crop.is_empty() {
        return Err(Error::EmptyImage);
    }
    let (w, h) = (crop.width as usize, crop.height as usize);
    let to_level = 255.0 / crop.depth.max();
    let from_level = crop.depth.max() / 255.0;
    let quantize = |v: f32| (v * to_level).round().clamp(0.0, 255.0) as u8;

    match crop.channels {
        1 => {
            let levels: Vec<u8> = crop.data.iter().map(|&v| quantize(v)).collect();
            let eq = clahe_u8(&levels, w, h, params);
            let data = eq.iter().map(|&v| v as f32 * from_level).collect();
            Ok(Raster { data, ..crop.clone() })
        }
        3 => {
            let mut luma = Vec::with_capacity(w * h);
            let mut chroma = Vec::with_capacity(w * h);
            for p in crop.data.chunks_exact(3) {
                let (r, g, b) = (p[0] * to_level, p[1] * to_level, p[2] * to_level);
                let y = 0.299 * r + 0.587 * g + 0.114 * b;
                luma.push(y.round().clamp(0.0, 255.0) as u8);
                chroma.push((-0.168736 * r - 0.331264 * g + 0.5 * b, 0.5 * r - 0.418688 * g - 0.081312 * b));
            }
            let eq = clahe_u8(&luma, w, h, params);
            let mut data = Vec::with_capacity(crop.data.len());
            for (y, (cb, cr)) in eq.iter().zip(chroma) {
                let y = *y as f32;
                let rgb = [y + 1.402 * cr, y - 0.344136 * cb - 0.714136 * cr, y + 1.772 * cb];
                data.extend(rgb.iter().map(|v| v.round().clamp(0.0, 255.0) * from_level));
            }
            Ok(Raster { data, ..crop.clone() })
        }
        c => Err(Error::BadChannelRequest(c)),
    }
}

fn clahe_u8(src: &[u8], w: usize, h: usize, params: ClaheParams) -> Vec<u8> {
    let tx = (params.tiles.max(1) as usize).min(w);
    let ty = (params.tiles.max(1) as usize).min(h);
    // Equal-sized tiles; pixels past the border are reflected (reflect-101).
    let (tw, th) = (w.div_ceil(tx), h.div_ceil(ty));
    let reflect = |p: usize, n: usize| -> usize {
        if n == 1 {
            return 0;
        }
        let period = 2 * (n - 1);
        let p = p % period;
        if p < n { p } else { period - p }
    };

    let area = (tw * th) as u32;
    let mut luts = vec![[0u8; 256]; tx * ty];
    for j in 0..ty {
        for i in 0..tx {
            let mut hist = [0u32; 256];
            for y in j * th..(j + 1) * th {
                let row = reflect(y, h) * w;
                for x in i * tw..(i + 1) * tw {
                    hist[src[row + reflect(x, w)] as usize] += 1;
                }
            }
            luts[j * tx + i] = tile_lut(&mut hist, area, params.clip_limit);
        }
    }

    // Tile centres in pixel-centre coordinates.
    let tile_w = tw as f32;
    let tile_h = th as f32;
    let locate = |p: usize, size: f32, count: usize| -> (usize, usize, f32) {
        let t = (p as f32 + 0.5) / size - 0.5;
        if t <= 0.0 {
            return (0, 0, 0.0);
        }
        let lo = (t.floor() as usize).min(count - 1);
        let hi = (lo + 1).min(count - 1);
        (lo, hi, (t - lo as f32).min(1.0))
    };

    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        let (j0, j1, fy) = locate(y, tile_h, ty);
        for x in 0..w {
            let (i0, i1, fx) = locate(x, tile_w, tx);
            let v = src[y * w + x] as usize;
            let top = (1.0 - fx) * luts[j0 * tx + i0][v] as f32 + fx * luts[j0 * tx + i1][v] as f32;
            let bot = (1.0 - fx) * luts[j1 * tx + i0][v] as f32 + fx * luts[j1 * tx + i1][v] as f32;
            out[y * w + x] = ((1.0 - fy) * top + fy * bot).round().clamp(0.0, 255.0) as u8;
        }
    }
    out
}

fn tile_lut(hist: &mut [u32; 256], area: u32, clip_limit: f32) -> [u8; 256] {
    if clip_limit > 0.0 {
        let limit = ((clip_limit * area as f32 / 256.0) as u32).max(1);
        let mut excess = 0u32;
        for b in hist.iter_mut() {
            if *b > limit {
                excess += *b - limit;
                *b = limit;
            }
        }
        let (per_bin, residual) = (excess / 256, excess % 256);
        for b in hist.iter_mut() {
            *b += per_bin;
        }
        if residual > 0 {
            let step = (256 / residual).max(1) as usize;
            for b in hist.iter_mut().step_by(step).take(residual as usize) {
                *b += 1;
            }
        }
    }
    let scale = 255.0 / area.max(1) as f32;
    let mut lut = [0u8; 256];
    let mut cdf = 0u32;
    for (v, count) in hist.iter().enumerate() {
        cdf += count;
        lut[v] = (cdf as f32 * scale).round().min(255.0) as u8;
    }
    lut
}

/// Resize to the standard model resolution and map to `[-1, 1]`.
pub fn to_model_input(img: &Raster, channels: usize) -> Result<EyePixels> {
    to_model_input_sized(img, channels, MODEL_INPUT_SIZE)
}

/// [`to_model_input`] with an explicit square output size.
pub fn to_model_input_sized(img: &Raster, channels: usize, size: usize) -> Result<EyePixels> {
    if channels != 1 && channels != 3 {
        return Err(Error::BadChannelRequest(channels));
    }
    if img.is_empty() || size == 0 {
        return Err(Error::EmptyImage);
    }
    let src = if channels == 1 { img.luminance() } else { img.clone() };
    let resized = resize_bilinear(&src, size, size);
    let scale = 2.0 / img.depth.max();
    let n = size * size;
    let mut data = vec![0.0f32; n * channels];
    for c in 0..channels {
        let sc = if src.channels == 1 { 0 } else { c };
        for i in 0..n {
            data[c * n + i] = (resized.data[i * src.channels + sc] * scale - 1.0).clamp(-1.0, 1.0);
        }
    }
    Ok(EyePixels { size, channels, data })
}

/// Separable linear (triangle-filter) resampling with pixel-centre alignment.
/// When shrinking, the filter support widens with the scale factor so every
/// source pixel contributes.
pub fn resize_bilinear(img: &Raster, out_w: usize, out_h: usize) -> Raster {
    let (w, h, ch) = (img.width as usize, img.height as usize, img.channels);
    if w == out_w && h == out_h {
        return img.clone();
    }
    let wx = resample_weights(w, out_w);
    let wy = resample_weights(h, out_h);
    let mut tmp = vec![0.0f32; h * out_w * ch];
    for y in 0..h {
        for (ox, taps) in wx.iter().enumerate() {
            for c in 0..ch {
                tmp[(y * out_w + ox) * ch + c] =
                    taps.iter().map(|&(x, wt)| wt * img.data[(y * w + x) * ch + c]).sum();
            }
        }
    }
    let mut data = vec![0.0f32; out_h * out_w * ch];
    for (oy, taps) in wy.iter().enumerate() {
        for ox in 0..out_w {
            for c in 0..ch {
                data[(oy * out_w + ox) * ch + c] = taps.iter().map(|&(y, wt)| wt * tmp[(y * out_w + ox) * ch + c]).sum();
            }
        }
    }
    Raster { width: out_w as u32, height: out_h as u32, channels: ch, depth: img.depth, data }
}

fn resample_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f32)>> {
    let scale = n_in as f32 / n_out as f32;
    let support = scale.max(1.0);
    (0..n_out)
        .map(|o| {
            let centre = (o as f32 + 0.5) * scale - 0.5;
            let lo = (centre - support).floor().max(0.0) as usize;
            let hi = ((centre + support).ceil() as usize).min(n_in - 1);
            let mut taps: Vec<(usize, f32)> = (lo..=hi)
                .map(|i| (i, (1.0 - ((i as f32 - centre) / support).abs()).max(0.0)))
                .filter(|&(_, wt)| wt > 0.0)
                .collect();
            if taps.is_empty() {
                taps.push((centre.round().clamp(0.0, (n_in - 1) as f32) as usize, 1.0));
            }
            let total: f32 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}
