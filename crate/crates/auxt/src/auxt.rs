//! The auxiliary transform: stacked wavelet linear shortcut (WLS) stages.
//!
//! One analysis stage takes a (h, w, c) tensor through
//!
//!   dwt2d -> per-subband channel scaling by e^s -> channel concat
//!          -> orthogonal linear projection (OLP)
//!
//! producing (h/2, w/2, d). The concat order is ll, lh, hl, hh and is part
//! of the on-disk parameter layout. Scaling exponents start at 1, 0.5, 0.5, 0
//! for ll, lh, hl, hh, so the smooth bands enter the code amplified and the
//! synthesis division attenuates their quantization noise by the same factor.
//!
//! The synthesis stage (iWLS) runs the mirror image: multiply by the OLP
//! transpose, divide by e^s, inverse DWT. With a square orthogonal OLP the
//! stage pair is an exact inverse; rectangular OLPs keep only the projected
//! subspace and the regularizer below keeps them near-orthogonal.
//!
//! Ablation hooks: `pool` swaps the DWT for a 2x2 average (no detail bands,
//! scaling inert), `scale: false` skips the exponential scaling, and `relu`
//! clamps every projection output at zero — analysis and synthesis alike —
//! to break linearity on purpose.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::mat::Matrix;
use crate::tensor::Tensor;
use crate::wavelet::{
    avgpool2d, avgpool2d_adjoint, dwt2d, dwt2d_adjoint, idwt2d, idwt2d_adjoint, upsample2d,
    upsample2d_adjoint, Basis, Subbands,
};

/// Scaling exponents are clamped to this magnitude after every optimizer
/// step; e^16 keeps well clear of f64 trouble while allowing huge gains.
pub const EXP_CLAMP: f64 = 16.0;

/// Initial exponents for ll, lh, hl, hh.
pub const S_INIT: [f64; 4] = [1.0, 0.5, 0.5, 0.0];

/// Stage behavior switches shared by every stage of one model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxSpec {
    pub basis: Basis,
    /// Replace the DWT with 2x2 average pooling (ablation). Forces scale off.
    pub pool: bool,
    /// Apply the e^s subband scaling.
    pub scale: bool,
    /// Clamp each projection's output at zero, on both the analysis and
    /// synthesis sides (ablation).
    pub relu: bool,
}

impl AuxSpec {
    pub fn linear(basis: Basis) -> Self {
        AuxSpec {
            basis,
            pool: false,
            scale: true,
            relu: false,
        }
    }
}

/// Parameters of one WLS stage: four per-channel exponent vectors (length =
/// stage input channels) and the projection matrix. The projection has
/// 4 * c_in rows (c_in when pooling) and d_out columns.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsStage {
    pub s_ll: Vec<f64>,
    pub s_lh: Vec<f64>,
    pub s_hl: Vec<f64>,
    pub s_hh: Vec<f64>,
    pub olp: Matrix,
}

impl WlsStage {
    pub fn c_in(&self) -> usize {
        self.s_ll.len()
    }

    pub fn d_out(&self) -> usize {
        self.olp.cols()
    }

    /// Same shapes, all zeros; the gradient accumulator for this stage.
    pub fn zeros_like(&self) -> WlsStage {
        WlsStage {
            s_ll: vec![0.0; self.s_ll.len()],
            s_lh: vec![0.0; self.s_lh.len()],
            s_hl: vec![0.0; self.s_hl.len()],
            s_hh: vec![0.0; self.s_hh.len()],
            olp: Matrix::zeros(self.olp.rows(), self.olp.cols()),
        }
    }
}

/// All aux parameters: analysis stages, plus independent synthesis
/// projections when the transpose tie is turned off.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxtParams {
    pub stages: Vec<WlsStage>,
    pub syn_olp: Option<Vec<Matrix>>,
}

impl AuxtParams {
    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// A same-shaped parameter set of zeros, used as a gradient accumulator.
    pub fn zeros_like(&self) -> AuxtParams {
        AuxtParams {
            stages: self.stages.iter().map(|s| s.zeros_like()).collect(),
            syn_olp: self
                .syn_olp
                .as_ref()
                .map(|v| v.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect()),
        }
    }

    /// Every projection matrix subject to the orthogonality regularizer.
    pub fn all_olps(&self) -> Vec<&Matrix> {
        let mut v: Vec<&Matrix> = self.stages.iter().map(|s| &s.olp).collect();
        if let Some(syn) = &self.syn_olp {
            v.extend(syn.iter());
        }
        v
    }
}

/// Build stage parameters for the channel plan `(c_in, d_out)` per stage.
///
/// Exponents start at `S_INIT`. Each projection starts from a seeded
/// standard-normal matrix made exactly orthonormal: column-orthonormal when
/// it has at least as many rows as columns, otherwise row-orthonormal (the
/// overcomplete case, where the Gram matrix cannot reach the identity).
/// `olp_noise` optionally perturbs the result entrywise, which is how the
/// regularizer experiments start from a de-orthogonalized transform.
pub fn init_auxt(
    plan: &[(usize, usize)],
    spec: &AuxSpec,
    tied: bool,
    olp_noise: f64,
    rng: &mut impl Rng,
) -> AuxtParams {
    let mut make_olp = |c_in: usize, d_out: usize| {
        let rows = if spec.pool { c_in } else { 4 * c_in };
        let mut m = Matrix::standard_normal(rows, d_out, rng);
        if d_out <= rows {
            m.orthonormalize_columns();
        } else {
            let mut t = m.transpose();
            t.orthonormalize_columns();
            m = t.transpose();
        }
        if olp_noise != 0.0 {
            for v in m.data_mut() {
                *v += olp_noise * rng.sample::<f64, _>(StandardNormal);
            }
        }
        m
    };
    let stages = plan
        .iter()
        .map(|&(c_in, d_out)| WlsStage {
            s_ll: vec![S_INIT[0]; c_in],
            s_lh: vec![S_INIT[1]; c_in],
            s_hl: vec![S_INIT[2]; c_in],
            s_hh: vec![S_INIT[3]; c_in],
            olp: make_olp(c_in, d_out),
        })
        .collect();
    let syn_olp = if tied {
        None
    } else {
        Some(plan.iter().map(|&(c, d)| make_olp(c, d)).collect())
    };
    AuxtParams { stages, syn_olp }
}

/// || W^T W - I ||_F^2, the regularizer attached to every projection. For a
/// wide matrix this has an unreachable floor of cols - rows; see
/// `orth_penalty_col` for the dual form that reaches zero there.
pub fn orth_penalty(w: &Matrix) -> f64 {
    w.gram().distance_from_identity_sq()
}

/// || W W^T - I ||_F^2, the wide-matrix dual. The two forms differ by
/// exactly cols - rows for any W, so they share minimizers.
pub fn orth_penalty_col(w: &Matrix) -> f64 {
    w.transpose().gram().distance_from_identity_sq()
}

/// Gradient of `orth_penalty`: 4 W (W^T W - I).
pub fn orth_penalty_grad(w: &Matrix) -> Matrix {
    let mut g = w.gram();
    for i in 0..g.rows() {
        *g.at_mut(i, i) -= 1.0;
    }
    w.matmul(&g).scaled(4.0)
}

// Channel-wise projection helpers. `forward` applies W as c_in -> d_out per
// pixel, `transpose` the reverse; both are plain matrix products against the
// pixel channel vectors.

fn project_forward(t: &Tensor, w: &Matrix) -> Tensor {
    let (h, wd, c) = t.shape();
    debug_assert_eq!(c, w.rows());
    let d = w.cols();
    let mut out = Tensor::zeros(h, wd, d);
    for y in 0..h {
        for x in 0..wd {
            let src = t.pixel(y, x);
            let dst = out.pixel_mut(y, x);
            for (ci, &v) in src.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let wrow = w.row(ci);
                for (di, &wv) in wrow.iter().enumerate() {
                    dst[di] += v * wv;
                }
            }
        }
    }
    out
}

fn project_transpose(t: &Tensor, w: &Matrix) -> Tensor {
    let (h, wd, d) = t.shape();
    debug_assert_eq!(d, w.cols());
    let mut out = Tensor::zeros(h, wd, w.rows());
    for y in 0..h {
        for x in 0..wd {
            let src = t.pixel(y, x);
            let dst = out.pixel_mut(y, x);
            for ci in 0..w.rows() {
                let wrow = w.row(ci);
                let mut acc = 0.0;
                for (di, &sv) in src.iter().enumerate() {
                    acc += wrow[di] * sv;
                }
                dst[ci] = acc;
            }
        }
    }
    out
}

/// Accumulate the projection-weight gradient of `out = forward(in, W)`:
/// gW[c][d] += sum_pixels in[c] * g_out[d].
fn accumulate_proj_grad(input: &Tensor, g_out: &Tensor, g_w: &mut Matrix) {
    for y in 0..input.h() {
        for x in 0..input.w() {
            let iv = input.pixel(y, x);
            let gv = g_out.pixel(y, x);
            for (ci, &v) in iv.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let grow = g_w.row_mut(ci);
                for (di, &g) in gv.iter().enumerate() {
                    grow[di] += v * g;
                }
            }
        }
    }
}

fn scale_subbands(sb: &Subbands, stage: &WlsStage) -> Subbands {
    let apply = |t: &Tensor, s: &[f64]| {
        let mut out = t.clone();
        for y in 0..out.h() {
            for x in 0..out.w() {
                let px = out.pixel_mut(y, x);
                for (ch, v) in px.iter_mut().enumerate() {
                    *v *= s[ch].exp();
                }
            }
        }
        out
    };
    Subbands {
        ll: apply(&sb.ll, &stage.s_ll),
        lh: apply(&sb.lh, &stage.s_lh),
        hl: apply(&sb.hl, &stage.s_hl),
        hh: apply(&sb.hh, &stage.s_hh),
    }
}

/// What the backward pass needs from one analysis stage: the scaled concat
/// feeding the projection, and the pre-clamp output when relu is on.
#[derive(Debug, Clone)]
pub struct WlsTape {
    pub concat: Tensor,
    pub pre_relu: Option<Tensor>,
}

/// One analysis stage. Input (h, w, c), output (h/2, w/2, d_out).
pub fn wls_forward(p: &Tensor, stage: &WlsStage, spec: &AuxSpec) -> (Tensor, WlsTape) {
    let concat = if spec.pool {
        avgpool2d(p).expect("stage input dims must be even")
    } else {
        let sb = dwt2d(p, spec.basis).expect("stage input dims must be even");
        let sb = if spec.scale { scale_subbands(&sb, stage) } else { sb };
        Tensor::concat_channels(&[&sb.ll, &sb.lh, &sb.hl, &sb.hh])
    };
    let mut q = project_forward(&concat, &stage.olp);
    let pre_relu = if spec.relu {
        let pre = q.clone();
        for v in q.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Some(pre)
    } else {
        None
    };
    (q, WlsTape { concat, pre_relu })
}

/// Backward of `wls_forward`. Adds parameter gradients into `grads` and
/// returns the input cotangent.
pub fn wls_backward(
    g_q: &Tensor,
    stage: &WlsStage,
    spec: &AuxSpec,
    tape: &WlsTape,
    grads: &mut WlsStage,
) -> Tensor {
    let masked;
    let g_q = if let Some(pre) = &tape.pre_relu {
        let mut m = g_q.clone();
        for (g, &p) in m.data_mut().iter_mut().zip(pre.data()) {
            if p < 0.0 {
                *g = 0.0;
            }
        }
        masked = m;
        &masked
    } else {
        g_q
    };

    accumulate_proj_grad(&tape.concat, g_q, &mut grads.olp);
    let g_concat = project_transpose(g_q, &stage.olp);

    if spec.pool {
        return avgpool2d_adjoint(&g_concat);
    }

    let c = stage.c_in();
    let parts = g_concat.split_channels(&[c, c, c, c]);
    let taped = tape.concat.split_channels(&[c, c, c, c]);
    // d(scaled)/ds = scaled, so gs accumulates g . scaled elementwise.
    let mut g_sb = Vec::with_capacity(4);
    for (band, (g_band, t_band)) in parts.iter().zip(&taped).enumerate() {
        let s = match band {
            0 => (&stage.s_ll, &mut grads.s_ll),
            1 => (&stage.s_lh, &mut grads.s_lh),
            2 => (&stage.s_hl, &mut grads.s_hl),
            _ => (&stage.s_hh, &mut grads.s_hh),
        };
        let mut g_raw = g_band.clone();
        if spec.scale {
            for y in 0..g_band.h() {
                for x in 0..g_band.w() {
                    for ch in 0..c {
                        s.1[ch] += g_band.at(y, x, ch) * t_band.at(y, x, ch);
                    }
                }
            }
            for y in 0..g_raw.h() {
                for x in 0..g_raw.w() {
                    let px = g_raw.pixel_mut(y, x);
                    for (ch, v) in px.iter_mut().enumerate() {
                        *v *= s.0[ch].exp();
                    }
                }
            }
        }
        g_sb.push(g_raw);
    }
    let sb = Subbands {
        ll: g_sb[0].clone(),
        lh: g_sb[1].clone(),
        hl: g_sb[2].clone(),
        hh: g_sb[3].clone(),
    };
    dwt2d_adjoint(&sb, spec.basis)
}

/// Backward tape for one synthesis stage: the stage input and the
/// post-division concat.
#[derive(Debug, Clone)]
pub struct IwlsTape {
    pub q: Tensor,
    pub u: Tensor,
    /// Projected tensor before clamping when relu is on, mirroring the
    /// analysis tape: the backward pass gates gradients where it was negative.
    pub pre_relu: Option<Tensor>,
}

/// One synthesis stage: input (h, w, d_out), output (h*2, w*2, c_in).
/// `olp` is the analysis matrix when tied, or the stage's own when not.
/// `relu` clamps right after the projection, exactly as on the analysis
/// side, so the nonlinearity toggle affects every projection in the model.
pub fn iwls_forward(q: &Tensor, stage: &WlsStage, olp: &Matrix, spec: &AuxSpec) -> (Tensor, IwlsTape) {
    let mut t = project_transpose(q, olp);
    let pre_relu = if spec.relu {
        let pre = t.clone();
        for v in t.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Some(pre)
    } else {
        None
    };
    if spec.pool {
        let out = upsample2d(&t);
        return (
            out,
            IwlsTape {
                q: q.clone(),
                u: t,
                pre_relu,
            },
        );
    }
    let c = stage.c_in();
    let mut u = t;
    if spec.scale {
        for y in 0..u.h() {
            for x in 0..u.w() {
                let px = u.pixel_mut(y, x);
                for band in 0..4 {
                    let s = match band {
                        0 => &stage.s_ll,
                        1 => &stage.s_lh,
                        2 => &stage.s_hl,
                        _ => &stage.s_hh,
                    };
                    for ch in 0..c {
                        px[band * c + ch] *= (-s[ch]).exp();
                    }
                }
            }
        }
    }
    let parts = u.split_channels(&[c, c, c, c]);
    let sb = Subbands {
        ll: parts[0].clone(),
        lh: parts[1].clone(),
        hl: parts[2].clone(),
        hh: parts[3].clone(),
    };
    let out = idwt2d(&sb, spec.basis);
    (
        out,
        IwlsTape {
            q: q.clone(),
            u,
            pre_relu,
        },
    )
}

/// Backward of `iwls_forward`. `g_olp` receives the projection gradient
/// (the analysis accumulator when tied, the synthesis one otherwise).
pub fn iwls_backward(
    g_out: &Tensor,
    stage: &WlsStage,
    olp: &Matrix,
    spec: &AuxSpec,
    tape: &IwlsTape,
    grads: &mut WlsStage,
    g_olp_syn: Option<&mut Matrix>,
) -> Tensor {
    let mut g_t = if spec.pool {
        upsample2d_adjoint(g_out).expect("synthesis cotangent dims must be even")
    } else {
        let c = stage.c_in();
        let sb = idwt2d_adjoint(g_out, spec.basis).expect("synthesis cotangent dims must be even");
        let mut g_u = Tensor::concat_channels(&[&sb.ll, &sb.lh, &sb.hl, &sb.hh]);
        if spec.scale {
            // u = t e^{-s}: ds gets -sum g_u . u, dt gets g_u e^{-s}.
            for y in 0..g_u.h() {
                for x in 0..g_u.w() {
                    for band in 0..4 {
                        let (s, gs) = match band {
                            0 => (&stage.s_ll, &mut grads.s_ll),
                            1 => (&stage.s_lh, &mut grads.s_lh),
                            2 => (&stage.s_hl, &mut grads.s_hl),
                            _ => (&stage.s_hh, &mut grads.s_hh),
                        };
                        for ch in 0..c {
                            let idx = band * c + ch;
                            let g = g_u.at(y, x, idx);
                            gs[ch] -= g * tape.u.at(y, x, idx);
                            *g_u.at_mut(y, x, idx) = g * (-s[ch]).exp();
                        }
                    }
                }
            }
        }
        g_u
    };

    if let Some(pre) = &tape.pre_relu {
        for (g, &p) in g_t.data_mut().iter_mut().zip(pre.data()) {
            if p < 0.0 {
                *g = 0.0;
            }
        }
    }

    // t = W q (per pixel): gW[c][d] += g_t[c] q[d], g_q = W^T g_t.
    match g_olp_syn {
        Some(gm) => accumulate_proj_grad(&g_t, &tape.q, gm),
        None => accumulate_proj_grad(&g_t, &tape.q, &mut grads.olp),
    }
    project_forward(&g_t, olp)
}

/// Run every analysis stage in order; `outputs[k]` feeds the fusion concat
/// at main stage k+1 and `outputs.last()` joins the latent sum.
pub struct AnalysisPass {
    pub outputs: Vec<Tensor>,
    pub tapes: Vec<WlsTape>,
}

pub fn auxt_analysis(x: &Tensor, params: &AuxtParams, spec: &AuxSpec) -> AnalysisPass {
    let mut outputs = Vec::with_capacity(params.stages.len());
    let mut tapes = Vec::with_capacity(params.stages.len());
    let mut cur = x.clone();
    for stage in &params.stages {
        let (q, tape) = wls_forward(&cur, stage, spec);
        cur = q.clone();
        outputs.push(q);
        tapes.push(tape);
    }
    AnalysisPass { outputs, tapes }
}

/// Run every synthesis stage from the latent back to image scale.
/// `intermediates[j]` is the output of inverting stage S-1-j, so
/// `intermediates[0]` sits at twice the latent resolution; the last entry is
/// the image-scale aux reconstruction.
pub struct SynthesisPass {
    pub intermediates: Vec<Tensor>,
    pub tapes: Vec<IwlsTape>,
}

pub fn auxt_synthesis(y: &Tensor, params: &AuxtParams, spec: &AuxSpec) -> SynthesisPass {
    let mut intermediates = Vec::with_capacity(params.stages.len());
    let mut tapes = Vec::with_capacity(params.stages.len());
    let mut cur = y.clone();
    for (i, stage) in params.stages.iter().enumerate().rev() {
        let olp = params
            .syn_olp
            .as_ref()
            .map(|v| &v[i])
            .unwrap_or(&stage.olp);
        let (p, tape) = iwls_forward(&cur, stage, olp, spec);
        cur = p.clone();
        intermediates.push(p);
        tapes.push(tape);
    }
    SynthesisPass {
        intermediates,
        tapes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec() -> AuxSpec {
        AuxSpec::linear(Basis::Haar)
    }

    /// Square plan: d_out = 4 c_in at every stage, so every OLP is a full
    /// orthogonal matrix and the stack is exactly invertible.
    fn square_params(stages: usize, c0: usize, seed: u64) -> AuxtParams {
        let mut plan = Vec::new();
        let mut c = c0;
        for _ in 0..stages {
            plan.push((c, 4 * c));
            c *= 4;
        }
        init_auxt(&plan, &spec(), true, 0.0, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
        Tensor::from_vec(h, w, c, (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn init_exponents_match_subband_roles() {
        let p = init_auxt(&[(2, 8)], &spec(), true, 0.0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(p.stages[0].s_ll, vec![1.0, 1.0]);
        assert_eq!(p.stages[0].s_lh, vec![0.5, 0.5]);
        assert_eq!(p.stages[0].s_hl, vec![0.5, 0.5]);
        assert_eq!(p.stages[0].s_hh, vec![0.0, 0.0]);
    }

    #[test]
    fn init_is_orthonormal_for_tall_and_square_shapes() {
        for seed in 0..5 {
            let p = init_auxt(
                &[(1, 4), (4, 16), (16, 32), (32, 32)],
                &spec(),
                true,
                0.0,
                &mut ChaCha8Rng::seed_from_u64(seed),
            );
            for w in p.all_olps() {
                assert!(orth_penalty(w) <= 1e-12, "penalty {}", orth_penalty(w));
            }
        }
    }

    #[test]
    fn overcomplete_init_is_row_orthonormal() {
        let p = init_auxt(&[(1, 8)], &spec(), true, 0.0, &mut ChaCha8Rng::seed_from_u64(9));
        let w = &p.stages[0].olp;
        assert_eq!((w.rows(), w.cols()), (4, 8));
        assert!(orth_penalty_col(w) <= 1e-12);
        // Row form floor: cols - rows.
        assert!((orth_penalty(w) - 4.0).abs() <= 1e-9);
    }

    #[test]
    fn penalty_of_doubled_identity() {
        let mut w = Matrix::zeros(4, 4);
        for i in 0..4 {
            *w.at_mut(i, i) = 2.0;
        }
        assert_eq!(orth_penalty(&w), 36.0);
    }

    #[test]
    fn penalty_row_col_differ_by_shape_gap() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for (m, n) in [(8, 4), (4, 8), (16, 16), (3, 7)] {
            for _ in 0..20 {
                let w = Matrix::standard_normal(m, n, &mut rng);
                let gap = orth_penalty(&w) - orth_penalty_col(&w);
                assert!(
                    (gap - (n as f64 - m as f64)).abs() < 1e-9 * (1.0 + orth_penalty(&w)),
                    "({m},{n}): gap {gap}"
                );
            }
        }
    }

    #[test]
    fn penalty_invariant_under_orthogonal_left_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Matrix::standard_normal(8, 4, &mut rng);
        let mut q = Matrix::standard_normal(8, 8, &mut rng);
        q.orthonormalize_columns();
        let qw = q.matmul(&w);
        assert!((orth_penalty(&qw) - orth_penalty(&w)).abs() < 1e-9 * (1.0 + orth_penalty(&w)));
    }

    #[test]
    fn penalty_grad_vanishes_at_orthonormal_and_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut w = Matrix::standard_normal(6, 3, &mut rng);
        w.orthonormalize_columns();
        assert!(orth_penalty_grad(&w).frobenius_sq() < 1e-24);

        let mut w = Matrix::standard_normal(5, 3, &mut rng);
        let g = orth_penalty_grad(&w);
        let h = 1e-6;
        for idx in [0, 4, 7, 14] {
            let orig = w.data()[idx];
            w.data_mut()[idx] = orig + h;
            let up = orth_penalty(&w);
            w.data_mut()[idx] = orig - h;
            let dn = orth_penalty(&w);
            w.data_mut()[idx] = orig;
            let fd = (up - dn) / (2.0 * h);
            assert!(
                (fd - g.data()[idx]).abs() < 1e-5 * fd.abs().max(1.0),
                "idx {idx}: fd {fd} vs {}",
                g.data()[idx]
            );
        }
    }

    #[test]
    fn analysis_shapes_follow_the_channel_plan() {
        let plan = [(1, 8), (8, 16), (16, 32), (32, 32)];
        let p = init_auxt(&plan, &spec(), true, 0.0, &mut ChaCha8Rng::seed_from_u64(5));
        let x = Tensor::zeros(32, 32, 1);
        let pass = auxt_analysis(&x, &p, &spec());
        let shapes: Vec<_> = pass.outputs.iter().map(|t| t.shape()).collect();
        assert_eq!(
            shapes,
            vec![(16, 16, 8), (8, 8, 16), (4, 4, 32), (2, 2, 32)]
        );
    }

    #[test]
    fn constant_image_amplifies_by_e2sll_per_stage() {
        let params = square_params(1, 1, 6);
        let x = Tensor::from_vec(8, 8, 1, vec![0.7; 64]);
        let (q, _) = wls_forward(&x, &params.stages[0], &spec());
        let ratio = q.energy() / x.energy();
        assert!((ratio - (2.0_f64).exp()).abs() < 1e-9, "ratio {ratio} vs e^2");
    }

    #[test]
    fn four_stage_constant_energy_gain_is_e8() {
        let params = square_params(4, 1, 7);
        let x = Tensor::from_vec(32, 32, 1, vec![0.5; 1024]);
        let pass = auxt_analysis(&x, &params, &spec());
        let gain = pass.outputs.last().unwrap().energy() / x.energy();
        let want = (8.0_f64).exp();
        assert!(
            (gain - want).abs() / want < 1e-3,
            "gain {gain} vs e^8 = {want}"
        );
    }

    #[test]
    fn zero_exponent_orthogonal_stack_preserves_energy() {
        let mut params = square_params(3, 1, 8);
        for st in &mut params.stages {
            st.s_ll.iter_mut().for_each(|v| *v = 0.0);
            st.s_lh.iter_mut().for_each(|v| *v = 0.0);
            st.s_hl.iter_mut().for_each(|v| *v = 0.0);
            st.s_hh.iter_mut().for_each(|v| *v = 0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_tensor(&mut rng, 16, 16, 1);
        let pass = auxt_analysis(&x, &params, &spec());
        let rel = (pass.outputs.last().unwrap().energy() - x.energy()).abs() / x.energy();
        assert!(rel < 1e-6, "rel {rel}");
    }

    #[test]
    fn square_orthogonal_stack_roundtrips() {
        let params = square_params(4, 1, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(&mut rng, 32, 32, 1);
        let pass = auxt_analysis(&x, &params, &spec());
        let syn = auxt_synthesis(pass.outputs.last().unwrap(), &params, &spec());
        let back = syn.intermediates.last().unwrap();
        let scale = x.data().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let err = x
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
            / scale;
        assert!(err < 1e-5, "roundtrip err {err}");
    }

    #[test]
    fn roundtrip_error_grows_with_orthogonality_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_tensor(&mut rng, 16, 16, 1);
        let mut errs = Vec::new();
        for eps in [1e-6, 1e-4, 1e-2] {
            let mut params = square_params(2, 1, 13);
            for st in &mut params.stages {
                let d = st.olp.cols() as f64;
                let delta = 0.5 * (eps / d).sqrt();
                for v in st.olp.data_mut() {
                    *v *= 1.0 + delta;
                }
                let pen = orth_penalty(&st.olp);
                assert!((pen - eps).abs() < 0.1 * eps, "pen {pen} target {eps}");
            }
            let pass = auxt_analysis(&x, &params, &spec());
            let syn = auxt_synthesis(pass.outputs.last().unwrap(), &params, &spec());
            let back = syn.intermediates.last().unwrap();
            let err = x
                .data()
                .iter()
                .zip(back.data())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                / x.energy().sqrt();
            errs.push(err);
        }
        assert!(errs[0] < errs[1] && errs[1] < errs[2], "{errs:?}");
    }

    #[test]
    fn wls_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for spec in [
            AuxSpec::linear(Basis::Db4),
            AuxSpec {
                relu: true,
                ..AuxSpec::linear(Basis::Haar)
            },
            AuxSpec {
                pool: true,
                scale: false,
                ..AuxSpec::linear(Basis::Haar)
            },
        ] {
            let plan = [(2, 3)];
            let mut params = init_auxt(&plan, &spec, true, 0.05, &mut rng);
            let x = random_tensor(&mut rng, 4, 4, 2);
            // Scalar objective: weighted sum of outputs.
            let wvec = random_tensor(&mut rng, 2, 2, 3);
            let loss = |st: &WlsStage, xin: &Tensor| -> f64 {
                let (q, _) = wls_forward(xin, st, &spec);
                q.data().iter().zip(wvec.data()).map(|(a, b)| a * b).sum()
            };
            let (_, tape) = wls_forward(&x, &params.stages[0], &spec);
            let mut grads = params.stages[0].zeros_like();
            let g_x = wls_backward(&wvec, &params.stages[0], &spec, &tape, &mut grads);

            let h = 1e-6;
            // input gradient
            for idx in [0, 5, 17, 31] {
                let mut xp = x.clone();
                xp.data_mut()[idx] += h;
                let mut xm = x.clone();
                xm.data_mut()[idx] -= h;
                let fd = (loss(&params.stages[0], &xp) - loss(&params.stages[0], &xm)) / (2.0 * h);
                assert!(
                    (fd - g_x.data()[idx]).abs() < 1e-6 * fd.abs().max(1.0),
                    "{spec:?} input idx {idx}"
                );
            }
            // olp gradient
            let n_olp = params.stages[0].olp.data().len();
            for idx in [0, n_olp / 2, n_olp - 1] {
                let orig = params.stages[0].olp.data()[idx];
                params.stages[0].olp.data_mut()[idx] = orig + h;
                let up = loss(&params.stages[0], &x);
                params.stages[0].olp.data_mut()[idx] = orig - h;
                let dn = loss(&params.stages[0], &x);
                params.stages[0].olp.data_mut()[idx] = orig;
                let fd = (up - dn) / (2.0 * h);
                assert!(
                    (fd - grads.olp.data()[idx]).abs() < 1e-6 * fd.abs().max(1.0),
                    "{spec:?} olp idx {idx}"
                );
            }
            // exponent gradient
            if spec.scale {
                for ch in 0..2 {
                    let orig = params.stages[0].s_lh[ch];
                    params.stages[0].s_lh[ch] = orig + h;
                    let up = loss(&params.stages[0], &x);
                    params.stages[0].s_lh[ch] = orig - h;
                    let dn = loss(&params.stages[0], &x);
                    params.stages[0].s_lh[ch] = orig;
                    let fd = (up - dn) / (2.0 * h);
                    assert!(
                        (fd - grads.s_lh[ch]).abs() < 1e-6 * fd.abs().max(1.0),
                        "s_lh {ch}"
                    );
                }
            }
        }
    }

    #[test]
    fn iwls_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let spec = AuxSpec::linear(Basis::Bior2_2);
        let plan = [(2, 5)];
        let mut params = init_auxt(&plan, &spec, true, 0.05, &mut rng);
        let q = random_tensor(&mut rng, 2, 2, 5);
        let wvec = random_tensor(&mut rng, 4, 4, 2);
        let loss = |st: &WlsStage, qin: &Tensor| -> f64 {
            let (p, _) = iwls_forward(qin, st, &st.olp, &spec);
            p.data().iter().zip(wvec.data()).map(|(a, b)| a * b).sum()
        };
        let (_, tape) = iwls_forward(&q, &params.stages[0], &params.stages[0].olp.clone(), &spec);
        let mut grads = params.stages[0].zeros_like();
        let g_q = iwls_backward(
            &wvec,
            &params.stages[0],
            &params.stages[0].olp.clone(),
            &spec,
            &tape,
            &mut grads,
            None,
        );

        let h = 1e-6;
        for idx in [0, 9, 19] {
            let mut qp = q.clone();
            qp.data_mut()[idx] += h;
            let mut qm = q.clone();
            qm.data_mut()[idx] -= h;
            let fd = (loss(&params.stages[0], &qp) - loss(&params.stages[0], &qm)) / (2.0 * h);
            assert!((fd - g_q.data()[idx]).abs() < 1e-6 * fd.abs().max(1.0), "q idx {idx}");
        }
        for idx in [0, 13, 29] {
            let orig = params.stages[0].olp.data()[idx];
            params.stages[0].olp.data_mut()[idx] = orig + h;
            let up = loss(&params.stages[0], &q);
            params.stages[0].olp.data_mut()[idx] = orig - h;
            let dn = loss(&params.stages[0], &q);
            params.stages[0].olp.data_mut()[idx] = orig;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - grads.olp.data()[idx]).abs() < 1e-6 * fd.abs().max(1.0), "olp idx {idx}");
        }
        for ch in 0..2 {
            let orig = params.stages[0].s_ll[ch];
            params.stages[0].s_ll[ch] = orig + h;
            let up = loss(&params.stages[0], &q);
            params.stages[0].s_ll[ch] = orig - h;
            let dn = loss(&params.stages[0], &q);
            params.stages[0].s_ll[ch] = orig;
            let fd = (up - dn) / (2.0 * h);
            assert!((fd - grads.s_ll[ch]).abs() < 1e-6 * fd.abs().max(1.0), "s_ll {ch}");
        }
    }
}
