//! Dense row-major (height, width, channel) tensors over f64.
//!
//! Images live in [0, 1] after loading; everything downstream (transforms,
//! latents, gradients) reuses the same container. Layout is row-major with
//! channel fastest: `data[(y * w + x) * c + ch]`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Tensor {
            h,
            w,
            c,
            data: vec![0.0; h * w * c],
        }
    }

    pub fn from_vec(h: usize, w: usize, c: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), h * w * c, "tensor data length mismatch");
        Tensor { h, w, c, data }
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn w(&self) -> usize {
        self.w
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.h, self.w, self.c)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline(always)]
    pub fn at(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.data[(y * self.w + x) * self.c + ch]
    }

    #[inline(always)]
    pub fn at_mut(&mut self, y: usize, x: usize, ch: usize) -> &mut f64 {
        &mut self.data[(y * self.w + x) * self.c + ch]
    }

    /// Contiguous channel slice at one spatial position.
    #[inline(always)]
    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let base = (y * self.w + x) * self.c;
        &self.data[base..base + self.c]
    }

    #[inline(always)]
    pub fn pixel_mut(&mut self, y: usize, x: usize) -> &mut [f64] {
        let base = (y * self.w + x) * self.c;
        &mut self.data[base..base + self.c]
    }

    /// Sum of squares over every element.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape(), other.shape(), "tensor add shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Concatenate along the channel axis; spatial dims must agree.
    pub fn concat_channels(parts: &[&Tensor]) -> Tensor {
        assert!(!parts.is_empty());
        let (h, w) = (parts[0].h, parts[0].w);
        let c_total: usize = parts.iter().map(|p| p.c).sum();
        let mut out = Tensor::zeros(h, w, c_total);
        for y in 0..h {
            for x in 0..w {
                let dst = out.pixel_mut(y, x);
                let mut off = 0;
                for p in parts {
                    assert_eq!((p.h, p.w), (h, w), "concat spatial mismatch");
                    dst[off..off + p.c].copy_from_slice(p.pixel(y, x));
                    off += p.c;
                }
            }
        }
        out
    }

    /// Split the channel axis into consecutive groups of the given widths.
    pub fn split_channels(&self, widths: &[usize]) -> Vec<Tensor> {
        assert_eq!(widths.iter().sum::<usize>(), self.c, "split widths mismatch");
        let mut out: Vec<Tensor> = widths.iter().map(|&c| Tensor::zeros(self.h, self.w, c)).collect();
        for y in 0..self.h {
            for x in 0..self.w {
                let src = self.pixel(y, x);
                let mut off = 0;
                for (i, &cw) in widths.iter().enumerate() {
                    out[i].pixel_mut(y, x).copy_from_slice(&src[off..off + cw]);
                    off += cw;
                }
            }
        }
        out
    }
}

/// Original and padded dimensions of an encoded image. The decoder crops the
/// padded reconstruction back to `orig_h x orig_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ImageMeta {
    pub orig_h: usize,
    pub orig_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
}

/// Mirror index without repeating the edge sample: for n = 4 the extension of
/// 0 1 2 3 continues 2 1 0 1 2 3 2 1 ... Degenerate n = 1 pins everything to 0.
#[inline]
pub(crate) fn reflect_index(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as isize {
        m = period - m;
    }
    m as usize
}

/// Pad on the bottom and right edges by mirrored reflection so each spatial
/// dim becomes the next multiple of `multiple`.
pub fn pad_reflect(t: &Tensor, multiple: usize) -> (Tensor, ImageMeta) {
    let round_up = |v: usize| v.div_ceil(multiple) * multiple;
    let (ph, pw) = (round_up(t.h()), round_up(t.w()));
    let meta = ImageMeta {
        orig_h: t.h(),
        orig_w: t.w(),
        pad_h: ph,
        pad_w: pw,
    };
    if (ph, pw) == (t.h(), t.w()) {
        return (t.clone(), meta);
    }
    let mut out = Tensor::zeros(ph, pw, t.c());
    for y in 0..ph {
        let sy = reflect_index(y as isize, t.h());
        for x in 0..pw {
            let sx = reflect_index(x as isize, t.w());
            out.pixel_mut(y, x).copy_from_slice(t.pixel(sy, sx));
        }
    }
    (out, meta)
}

/// Top-left crop back to the original size recorded in `meta`.
pub fn crop(t: &Tensor, meta: &ImageMeta) -> Tensor {
    assert!(t.h() >= meta.orig_h && t.w() >= meta.orig_w, "crop larger than tensor");
    let mut out = Tensor::zeros(meta.orig_h, meta.orig_w, t.c());
    for y in 0..meta.orig_h {
        for x in 0..meta.orig_w {
            out.pixel_mut(y, x).copy_from_slice(t.pixel(y, x));
        }
    }
    out
}

pub fn mse(a: &Tensor, b: &Tensor) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "mse over {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.len() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// Peak signal-to-noise ratio in dB for signals on [0, 1]. A zero-MSE pair is
/// lossless and reported as +infinity.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / e).log10())
}

/// Clamp to [0, 1] and round half away from zero onto the 8-bit grid.
pub fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
