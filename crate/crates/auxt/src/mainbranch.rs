//! The main transform branch: a small stack of stride-2 convolutions for
//! analysis and their exact-adjoint transposed convolutions for synthesis.
//!
//! Boundaries use mirror reflection (no edge repeat), matching the image
//! padding convention, and the transposed convolution scatters into the same
//! reflected indices, so the up-conv is the exact linear adjoint of a
//! down-conv with identical taps. Activations default to `none`, keeping the
//! whole branch linear; `relu` exists for the nonlinearity experiments and is
//! applied after every stage except the final synthesis output.

use rand::Rng;

use crate::tensor::{reflect_index, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    None,
    Relu,
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Activation::None),
            "relu" => Ok(Activation::Relu),
            other => Err(format!("unknown activation `{other}` (none|relu)")),
        }
    }
}

/// One stride-2 convolution. Weights are stored `[c_out][dy][dx][c_in]` so
/// the inner multiply-accumulate runs over contiguous input channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// One stride-2 transposed convolution. Weights are `[c_in][dy][dx][c_out]`
/// so scattering runs over contiguous output channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvT {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

fn fan_in_uniform(n: usize, fan_in: usize, rng: &mut impl Rng) -> Vec<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl Conv {
    pub fn init(c_in: usize, c_out: usize, k: usize, rng: &mut impl Rng) -> Conv {
        Conv {
            c_in,
            c_out,
            k,
            w: fan_in_uniform(c_out * k * k * c_in, k * k * c_in, rng),
            b: vec![0.0; c_out],
        }
    }

    pub fn zeros_like(&self) -> Conv {
        Conv {
            c_in: self.c_in,
            c_out: self.c_out,
            k: self.k,
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    #[inline]
    fn w_at(&self, co: usize, dy: usize, dx: usize) -> &[f64] {
        let base = ((co * self.k + dy) * self.k + dx) * self.c_in;
        &self.w[base..base + self.c_in]
    }

    /// (h, w, c_in) -> (h/2, w/2, c_out); h, w even.
    pub fn forward(&self, input: &Tensor) -> Tensor {
        assert_eq!(input.c(), self.c_in, "conv input channels");
        let (h, w, _) = input.shape();
        assert!(h % 2 == 0 && w % 2 == 0, "conv input dims must be even");
        let (oh, ow) = (h / 2, w / 2);
        let pad = (self.k / 2) as isize;
        let mut out = Tensor::zeros(oh, ow, self.c_out);
        for oy in 0..oh {
            for ox in 0..ow {
                let dst = out.pixel_mut(oy, ox);
                dst.copy_from_slice(&self.b);
                for dy in 0..self.k {
                    let sy = reflect_index(2 * oy as isize + dy as isize - pad, h);
                    for dx in 0..self.k {
                        let sx = reflect_index(2 * ox as isize + dx as isize - pad, w);
                        let src = input.pixel(sy, sx);
                        for (co, acc) in dst.iter_mut().enumerate() {
                            let taps = self.w_at(co, dy, dx);
                            let mut s = 0.0;
                            for (t, v) in taps.iter().zip(src) {
                                s += t * v;
                            }
                            *acc += s;
                        }
                    }
                }
            }
        }
        out
    }

    /// Input cotangent of `forward` (the exact adjoint, reflections folded).
    pub fn input_grad(&self, g_out: &Tensor, in_h: usize, in_w: usize) -> Tensor {
        let mut g_in = Tensor::zeros(in_h, in_w, self.c_in);
        let pad = (self.k / 2) as isize;
        for oy in 0..g_out.h() {
            for ox in 0..g_out.w() {
                let g = g_out.pixel(oy, ox);
                for dy in 0..self.k {
                    let sy = reflect_index(2 * oy as isize + dy as isize - pad, in_h);
                    for dx in 0..self.k {
                        let sx = reflect_index(2 * ox as isize + dx as isize - pad, in_w);
                        let dst = g_in.pixel_mut(sy, sx);
                        for (co, &gv) in g.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            let taps = self.w_at(co, dy, dx);
                            for (d, t) in dst.iter_mut().zip(taps) {
                                *d += gv * t;
                            }
                        }
                    }
                }
            }
        }
        g_in
    }

    /// Accumulate kernel/bias gradients into `grads`.
    pub fn param_grad(&self, input: &Tensor, g_out: &Tensor, grads: &mut Conv) {
        let (h, w, _) = input.shape();
        let pad = (self.k / 2) as isize;
        for oy in 0..g_out.h() {
            for ox in 0..g_out.w() {
                let g = g_out.pixel(oy, ox);
                for (co, &gv) in g.iter().enumerate() {
                    grads.b[co] += gv;
                }
                for dy in 0..self.k {
                    let sy = reflect_index(2 * oy as isize + dy as isize - pad, h);
                    for dx in 0..self.k {
                        let sx = reflect_index(2 * ox as isize + dx as isize - pad, w);
                        let src = input.pixel(sy, sx);
                        for (co, &gv) in g.iter().enumerate() {
                            if gv == 0.0 {
                                continue;
                            }
                            let base = ((co * self.k + dy) * self.k + dx) * self.c_in;
                            let dst = &mut grads.w[base..base + self.c_in];
                            for (d, v) in dst.iter_mut().zip(src) {
                                *d += gv * v;
                            }
                        }
                    }
                }
            }
        }
    }
}

impl ConvT {
    pub fn init(c_in: usize, c_out: usize, k: usize, rng: &mut impl Rng) -> ConvT {
        ConvT {
            c_in,
            c_out,
            k,
            w: fan_in_uniform(c_in * k * k * c_out, k * k * c_in, rng),
            b: vec![0.0; c_out],
        }
    }

    pub fn zeros_like(&self) -> ConvT {
        ConvT {
            c_in: self.c_in,
            c_out: self.c_out,
            k: self.k,
            w: vec![0.0; self.w.len()],
            b: vec![0.0; self.b.len()],
        }
    }

    #[inline]
    fn w_at(&self, ci: usize, dy: usize, dx: usize) -> &[f64] {
        let base = ((ci * self.k + dy) * self.k + dx) * self.c_out;
        &self.w[base..base + self.c_out]
    }

    /// (h, w, c_in) -> (2h, 2w, c_out): the adjoint scatter of a stride-2
    /// gather conv, plus a per-channel output bias.
    pub fn forward(&self, input: &Tensor) -> Tensor {
        assert_eq!(input.c(), self.c_in, "transposed conv input channels");
        let (h, w, _) = input.shape();
        let (oh, ow) = (2 * h, 2 * w);
        let pad = (self.k / 2) as isize;
        let mut out = Tensor::zeros(oh, ow, self.c_out);
        for y in 0..h {
            for x in 0..w {
                let src = input.pixel(y, x);
                for dy in 0..self.k {
                    let sy = reflect_index(2 * y as isize + dy as isize - pad, oh);
                    for dx in 0..self.k {
                        let sx = reflect_index(2 * x as isize + dx as isize - pad, ow);
                        let dst = out.pixel_mut(sy, sx);
                        for (ci, &v) in src.iter().enumerate() {
                            if v == 0.0 {
                                continue;
                            }
                            let taps = self.w_at(ci, dy, dx);
                            for (d, t) in dst.iter_mut().zip(taps) {
                                *d += v * t;
                            }
                        }
                    }
                }
            }
        }
        for y in 0..oh {
            for x in 0..ow {
                let px = out.pixel_mut(y, x);
                for (p, bias) in px.iter_mut().zip(&self.b) {
                    *p += bias;
                }
            }
        }
        out
    }

    /// Input cotangent of `forward`: gathers g_out with the same taps.
    pub fn input_grad(&self, g_out: &Tensor) -> Tensor {
        let (oh, ow, _) = g_out.shape();
        let (h, w) = (oh / 2, ow / 2);
        let pad = (self.k / 2) as isize;
        let mut g_in = Tensor::zeros(h, w, self.c_in);
        for y in 0..h {
            for x in 0..w {
                let dst = g_in.pixel_mut(y, x);
                for dy in 0..self.k {
                    let sy = reflect_index(2 * y as isize + dy as isize - pad, oh);
                    for dx in 0..self.k {
                        let sx = reflect_index(2 * x as isize + dx as isize - pad, ow);
                        let g = g_out.pixel(sy, sx);
                        for (ci, acc) in dst.iter_mut().enumerate() {
                            let taps = self.w_at(ci, dy, dx);
                            let mut s = 0.0;
                            for (t, gv) in taps.iter().zip(g) {
                                s += t * gv;
                            }
                            *acc += s;
                        }
                    }
                }
            }
        }
        g_in
    }

    pub fn param_grad(&self, input: &Tensor, g_out: &Tensor, grads: &mut ConvT) {
        let (oh, ow, _) = g_out.shape();
        let (h, w) = (oh / 2, ow / 2);
        let pad = (self.k / 2) as isize;
        for y in 0..h {
            for x in 0..w {
                let src = input.pixel(y, x);
                for dy in 0..self.k {
                    let sy = reflect_index(2 * y as isize + dy as isize - pad, oh);
                    for dx in 0..self.k {
                        let sx = reflect_index(2 * x as isize + dx as isize - pad, ow);
                        let g = g_out.pixel(sy, sx);
                        for (ci, &v) in src.iter().enumerate() {
                            if v == 0.0 {
                                continue;
                            }
                            let base = ((ci * self.k + dy) * self.k + dx) * self.c_out;
                            let dst = &mut grads.w[base..base + self.c_out];
                            for (d, gv) in dst.iter_mut().zip(g) {
                                *d += v * gv;
                            }
                        }
                    }
                }
            }
        }
        for y in 0..oh {
            for x in 0..ow {
                let g = g_out.pixel(y, x);
                for (co, acc) in grads.b.iter_mut().enumerate() {
                    *acc += g[co];
                }
            }
        }
    }
}

/// All main-branch parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MainParams {
    pub analysis: Vec<Conv>,
    pub synthesis: Vec<ConvT>,
}

impl MainParams {
    pub fn zeros_like(&self) -> MainParams {
        MainParams {
            analysis: self.analysis.iter().map(Conv::zeros_like).collect(),
            synthesis: self.synthesis.iter().map(ConvT::zeros_like).collect(),
        }
    }
}

/// Apply the activation in place, returning the pre-activation copy needed
/// for the backward mask (None when the activation is the identity).
pub fn activate(t: &mut Tensor, act: Activation) -> Option<Tensor> {
    match act {
        Activation::None => None,
        Activation::Relu => {
            let pre = t.clone();
            for v in t.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            Some(pre)
        }
    }
}

/// Zero the cotangent wherever the forward pre-activation was negative.
pub fn activate_backward(g: &mut Tensor, pre: &Option<Tensor>) {
    if let Some(pre) = pre {
        for (gv, &p) in g.data_mut().iter_mut().zip(pre.data()) {
            if p < 0.0 {
                *gv = 0.0;
            }
        }
    }
}
