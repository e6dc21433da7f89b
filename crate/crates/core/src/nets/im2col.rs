//! Convolution as patch extraction plus matrix product. candle's own conv2d
//! backward goes through a naive transposed convolution; this keeps both
//! directions on gemm.

use candle_core::{CpuStorage, CustomOp1, Layout, Shape, Tensor, WithDType};

use crate::Result;

#[derive(Debug, Clone, Copy)]
struct Geometry {
    b: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn out(&self) -> (usize, usize) {
        ((self.h + 2 * self.pad - self.k) / self.stride + 1, (self.w + 2 * self.pad - self.k) / self.stride + 1)
    }

    /// Calls `f(col_start, image_start, len)` for every run of patch entries
    /// that lies inside the image; runs advance by `stride` in the image.
    /// Columns are laid out `(C*k*k, B*Ho*Wo)`.
    fn for_each_run(&self, mut f: impl FnMut(usize, usize, usize)) {
        let (ho, wo) = self.out();
        let l = ho * wo;
        let bl = self.b * l;
        let img = self.c * self.h * self.w;
        let (s, pad) = (self.stride as isize, self.pad as isize);
        for ki in 0..self.k {
            for kj in 0..self.k {
                // Output columns whose input column lands inside [0, w).
                let off = kj as isize - pad;
                let lo = if off >= 0 { 0 } else { ((-off + s - 1) / s) as usize };
                let hi = (((self.w as isize - off) + s - 1) / s).clamp(0, wo as isize) as usize;
                if lo >= hi {
                    continue;
                }
                for oy in 0..ho {
                    let y = (oy * self.stride + ki) as isize - pad;
                    if y < 0 || y >= self.h as isize {
                        continue;
                    }
                    let x0 = (lo as isize * s + off) as usize;
                    for ci in 0..self.c {
                        let row = (ci * self.k + ki) * self.k + kj;
                        for n in 0..self.b {
                            f(row * bl + n * l + oy * wo + lo, n * img + (ci * self.h + y as usize) * self.w + x0, hi - lo);
                        }
                    }
                }
            }
        }
    }
}

fn contiguous<'a, T: WithDType>(s: &'a [T], layout: &Layout) -> candle_core::Result<&'a [T]> {
    match layout.contiguous_offsets() {
        Some((a, b)) => Ok(&s[a..b]),
        None => candle_core::bail!("im2col expects a contiguous tensor"),
    }
}

fn unfold<T: WithDType>(img: &[T], g: Geometry) -> Vec<T> {
    let (ho, wo) = g.out();
    let mut cols = vec![T::zero(); g.c * g.k * g.k * g.b * ho * wo];
    if g.stride == 1 {
        g.for_each_run(|c0, i0, n| cols[c0..c0 + n].copy_from_slice(&img[i0..i0 + n]));
    } else {
        g.for_each_run(|c0, i0, n| {
            for (j, d) in cols[c0..c0 + n].iter_mut().enumerate() {
                *d = img[i0 + j * g.stride];
            }
        });
    }
    cols
}

fn fold<T: WithDType>(cols: &[T], g: Geometry) -> Vec<T> {
    let mut img = vec![T::zero(); g.b * g.c * g.h * g.w];
    if g.stride == 1 {
        g.for_each_run(|c0, i0, n| {
            for (d, s) in img[i0..i0 + n].iter_mut().zip(&cols[c0..c0 + n]) {
                *d += *s;
            }
        });
    } else {
        g.for_each_run(|c0, i0, n| {
            for (j, s) in cols[c0..c0 + n].iter().enumerate() {
                img[i0 + j * g.stride] += *s;
            }
        });
    }
    img
}

/// `(B, C, H, W)` to `(C*k*k, B*Ho*Wo)`, zero padded.
struct Im2Col(Geometry);

/// Adjoint of [`Im2Col`]: sums patch entries back into the image.
struct Col2Im(Geometry);

impl CustomOp1 for Im2Col {
    fn name(&self) -> &'static str {
        "im2col"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let g = self.0;
        let (ho, wo) = g.out();
        let shape = Shape::from((g.c * g.k * g.k, g.b * ho * wo));
        let out = match storage {
            CpuStorage::F32(s) => CpuStorage::F32(unfold(contiguous(s, layout)?, g)),
            CpuStorage::F64(s) => CpuStorage::F64(unfold(contiguous(s, layout)?, g)),
            _ => candle_core::bail!("im2col supports f32 and f64"),
        };
        Ok((out, shape))
    }

    fn bwd(&self, _arg: &Tensor, _res: &Tensor, grad: &Tensor) -> candle_core::Result<Option<Tensor>> {
        Ok(Some(grad.contiguous()?.apply_op1(Col2Im(self.0))?))
    }
}

impl CustomOp1 for Col2Im {
    fn name(&self) -> &'static str {
        "col2im"
    }

    fn cpu_fwd(&self, storage: &CpuStorage, layout: &Layout) -> candle_core::Result<(CpuStorage, Shape)> {
        let g = self.0;
        let shape = Shape::from((g.b, g.c, g.h, g.w));
        let out = match storage {
            CpuStorage::F32(s) => CpuStorage::F32(fold(contiguous(s, layout)?, g)),
            CpuStorage::F64(s) => CpuStorage::F64(fold(contiguous(s, layout)?, g)),
            _ => candle_core::bail!("col2im supports f32 and f64"),
        };
        Ok((out, shape))
    }

    fn bwd(&self, _arg: &Tensor, _res: &Tensor, grad: &Tensor) -> candle_core::Result<Option<Tensor>> {
        Ok(Some(grad.contiguous()?.apply_op1(Im2Col(self.0))?))
    }
}

/// 2-D convolution of `x (B, C, H, W)` with `w (O, C, k, k)`, no bias.
pub(crate) fn conv2d(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let (b, c, h, wd) = x.dims4()?;
    let (o, _, k, _) = w.dims4()?;
    let g = Geometry { b, c, h, w: wd, k, stride, pad };
    let (ho, wo) = g.out();
    let cols = x.contiguous()?.apply_op1(Im2Col(g))?;
    let y = w.reshape((o, c * k * k))?.matmul(&cols)?;
    Ok(y.reshape((o, b, ho, wo))?.transpose(0, 1)?.contiguous()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{Device, Var};

    #[test]
    fn matches_candle_conv_and_gradients() {
        let dev = Device::Cpu;
        for (k, s, p, hw) in [(3, 1, 1, 7), (4, 2, 1, 9), (7, 1, 3, 8), (3, 2, 1, 8), (1, 1, 0, 5)] {
            let x = Var::from_tensor(&Tensor::randn(0f64, 1.0, (2, 3, hw, hw), &dev).unwrap()).unwrap();
            let w = Var::from_tensor(&Tensor::randn(0f64, 1.0, (4, 3, k, k), &dev).unwrap()).unwrap();
            let a = x.conv2d(&w, p, s, 1, 1).unwrap();
            let b = conv2d(&x, &w, s, p).unwrap();
            assert_eq!(a.dims(), b.dims());
            let diff = |u: &Tensor, v: &Tensor| (u - v).unwrap().abs().unwrap().max_all().unwrap().to_scalar::<f64>().unwrap();
            assert!(diff(&a, &b) < 1e-10);
            let r = Tensor::randn(0f64, 1.0, a.dims(), &dev).unwrap();
            let ga = (a * &r).unwrap().sum_all().unwrap().backward().unwrap();
            let gb = (b * &r).unwrap().sum_all().unwrap().backward().unwrap();
            assert!(diff(ga.get(&x).unwrap(), gb.get(&x).unwrap()) < 1e-10);
            assert!(diff(ga.get(&w).unwrap(), gb.get(&w).unwrap()) < 1e-10);
        }
    }
}
