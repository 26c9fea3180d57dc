//! Full codec model: the convolutional main branch and the wavelet shortcut
//! branch wired together, with forward/backward passes, parameter
//! flattening, content hashing, and the file-level encode/decode pipeline.
//!
//! Analysis runs both branches in lockstep. With fusion on, each shortcut
//! stage output is concatenated onto the next conv's input and the final
//! stage output is added onto the conv latent. Synthesis mirrors this: the
//! shortcut inverse chain runs from the latent back to image scale, each
//! intermediate is concatenated onto the next up-conv's input, and the
//! image-scale shortcut reconstruction is added onto the up-conv output.
//! Placement flags drop the fusion on one side to isolate where the shortcut
//! earns its keep; `fusion = none` removes the shortcut branch entirely and
//! leaves a plain strided autoencoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::auxt::{
    auxt_analysis, auxt_synthesis, init_auxt, iwls_backward, orth_penalty, orth_penalty_grad,
    wls_backward, AnalysisPass, AuxSpec, AuxtParams, SynthesisPass,
};
use crate::bitstream::{read_stream, write_stream, StreamHeader};
use crate::entropy::{
    quantize, rate_bits, rate_backward, GaussianModel, LatentCode, RateMode,
};
use crate::error::{Error, Result};
use crate::mainbranch::{activate, activate_backward, Activation, Conv, ConvT, MainParams};
use crate::tensor::{crop, pad_reflect, ImageMeta, Tensor};
use crate::wavelet::Basis;

/// How the shortcut branch joins the main branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fusion {
    /// Stage outputs are concatenated onto conv inputs and the final stage
    /// output is added onto the latent (and mirrored in synthesis).
    ConcatAdd,
    /// No shortcut branch at all: the plain conv autoencoder baseline.
    None,
}

/// Which side of the codec carries the shortcut fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Both,
    AnalysisOnly,
    SynthesisOnly,
}

impl std::str::FromStr for Fusion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Fusion> {
        match s {
            "concat_add" => Ok(Fusion::ConcatAdd),
            "none" => Ok(Fusion::None),
            _ => Err(Error::Config(format!(
                "unknown fusion '{s}' (expected concat_add or none)"
            ))),
        }
    }
}

impl std::str::FromStr for Placement {
    type Err = Error;
    fn from_str(s: &str) -> Result<Placement> {
        match s {
            "both" => Ok(Placement::Both),
            "analysis_only" => Ok(Placement::AnalysisOnly),
            "synthesis_only" => Ok(Placement::SynthesisOnly),
            _ => Err(Error::Config(format!(
                "unknown placement '{s}' (expected both, analysis_only or synthesis_only)"
            ))),
        }
    }
}

/// Everything that determines parameter shapes and wiring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub channels: usize,
    pub stages: usize,
    pub kernel_size: usize,
    pub fusion: Fusion,
    pub placement: Placement,
    pub basis: Basis,
    /// Replace each DWT with 2x2 average pooling (ablation).
    pub pool: bool,
    /// Per-subband exponential scaling before the projection.
    pub scale: bool,
    /// ReLU after each shortcut projection (ablation; breaks linearity).
    pub aux_relu: bool,
    /// Activation after conv stages; `none` keeps the codec linear.
    pub activation: Activation,
    /// Share each stage's projection between analysis and synthesis.
    pub tied_olp: bool,
}

impl ModelConfig {
    pub fn aux_spec(&self) -> AuxSpec {
        AuxSpec {
            basis: self.basis,
            pool: self.pool,
            scale: self.scale,
            relu: self.aux_relu,
        }
    }

    /// Shortcut stage output widths: 4C at full resolution, then a fixed
    /// ladder. Stage 1 is square so the projection can stay invertible.
    pub fn aux_widths(&self) -> Vec<usize> {
        let mut d = vec![4 * self.channels, 16, 32, 32];
        d.truncate(self.stages);
        d
    }

    /// (input channels, output width) per shortcut stage.
    pub fn aux_plan(&self) -> Vec<(usize, usize)> {
        let d = self.aux_widths();
        (0..self.stages)
            .map(|k| (if k == 0 { self.channels } else { d[k - 1] }, d[k]))
            .collect()
    }

    /// Conv output widths. The last one matches the final shortcut width so
    /// the two latents can be summed.
    pub fn main_widths(&self) -> Vec<usize> {
        let mut m = vec![8usize, 16, 32, 32];
        m.truncate(self.stages);
        *m.last_mut().expect("at least one stage") = *self.aux_widths().last().unwrap();
        m
    }

    pub fn latent_channels(&self) -> usize {
        *self.main_widths().last().unwrap()
    }

    /// Total downsampling factor; input dims must be a multiple of this.
    pub fn factor(&self) -> usize {
        1 << self.stages
    }

    pub fn has_aux(&self) -> bool {
        self.fusion == Fusion::ConcatAdd
    }

    pub fn fused_analysis(&self) -> bool {
        self.has_aux() && self.placement != Placement::SynthesisOnly
    }

    pub fn fused_synthesis(&self) -> bool {
        self.has_aux() && self.placement != Placement::AnalysisOnly
    }

    /// (c_in, c_out) for each analysis conv, concats included.
    pub fn analysis_conv_dims(&self) -> Vec<(usize, usize)> {
        let m = self.main_widths();
        let d = self.aux_widths();
        (0..self.stages)
            .map(|k| {
                let base = if k == 0 { self.channels } else { m[k - 1] };
                let extra = if k > 0 && self.fused_analysis() { d[k - 1] } else { 0 };
                (base + extra, m[k])
            })
            .collect()
    }

    /// (c_in, c_out) for each synthesis up-conv, concats included. The
    /// shortcut intermediate joining up-conv j is the inversion of stage
    /// S-j, whose width is that stage's input channel count.
    pub fn synthesis_conv_dims(&self) -> Vec<(usize, usize)> {
        let m = self.main_widths();
        let d = self.aux_widths();
        let s = self.stages;
        let out = |j: usize| if j + 1 == s { self.channels } else { m[s - 2 - j] };
        (0..s)
            .map(|j| {
                let base = if j == 0 { self.latent_channels() } else { out(j - 1) };
                let extra = if j > 0 && self.fused_synthesis() { d[s - 1 - j] } else { 0 };
                (base + extra, out(j))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.stages) {
            return Err(Error::Config(format!(
                "stages must be 1..=4, got {}",
                self.stages
            )));
        }
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Config(format!(
                "channels must be 1 or 3, got {}",
                self.channels
            )));
        }
        if self.kernel_size != 3 && self.kernel_size != 5 {
            return Err(Error::Config(format!(
                "kernel_size must be 3 or 5, got {}",
                self.kernel_size
            )));
        }
        Ok(())
    }
}

/// All trainable state. Doubles as the gradient accumulator, since gradients
/// have exactly the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub auxt: Option<AuxtParams>,
    pub main: MainParams,
    pub entropy: GaussianModel,
}

impl ModelParams {
    pub fn zeros_like(&self) -> ModelParams {
        ModelParams {
            auxt: self.auxt.as_ref().map(|a| a.zeros_like()),
            main: self.main.zeros_like(),
            entropy: self.entropy.zeros_like(),
        }
    }
}

pub fn init_model(cfg: &ModelConfig, olp_noise: f64, rng: &mut impl Rng) -> ModelParams {
    let auxt = if cfg.has_aux() {
        Some(init_auxt(
            &cfg.aux_plan(),
            &cfg.aux_spec(),
            cfg.tied_olp,
            olp_noise,
            rng,
        ))
    } else {
        None
    };
    let analysis = cfg
        .analysis_conv_dims()
        .into_iter()
        .map(|(i, o)| Conv::init(i, o, cfg.kernel_size, rng))
        .collect();
    let synthesis = cfg
        .synthesis_conv_dims()
        .into_iter()
        .map(|(i, o)| ConvT::init(i, o, cfg.kernel_size, rng))
        .collect();
    ModelParams {
        auxt,
        main: MainParams { analysis, synthesis },
        entropy: GaussianModel::new(cfg.latent_channels()),
    }
}

/// Analysis intermediates kept for the backward pass.
pub struct AnalysisTrace {
    pub aux: Option<AnalysisPass>,
    pub conv_inputs: Vec<Tensor>,
    pub pre_acts: Vec<Option<Tensor>>,
    pub y: Tensor,
}

pub fn run_analysis(params: &ModelParams, cfg: &ModelConfig, x: &Tensor) -> AnalysisTrace {
    assert_eq!(x.c(), cfg.channels, "image channels");
    assert!(
        x.h() % cfg.factor() == 0 && x.w() % cfg.factor() == 0,
        "input dims must be a multiple of {}",
        cfg.factor()
    );
    let aux = if cfg.fused_analysis() {
        Some(auxt_analysis(
            x,
            params.auxt.as_ref().expect("fused model has shortcut params"),
            &cfg.aux_spec(),
        ))
    } else {
        None
    };
    let mut conv_inputs = Vec::with_capacity(cfg.stages);
    let mut pre_acts = Vec::with_capacity(cfg.stages);
    let mut cur = x.clone();
    for (k, conv) in params.main.analysis.iter().enumerate() {
        let input = match (&aux, k) {
            (Some(a), k) if k > 0 => Tensor::concat_channels(&[&cur, &a.outputs[k - 1]]),
            _ => cur,
        };
        let mut out = conv.forward(&input);
        pre_acts.push(activate(&mut out, cfg.activation));
        conv_inputs.push(input);
        cur = out;
    }
    let mut y = cur;
    if let Some(a) = &aux {
        y.add_assign(a.outputs.last().expect("at least one stage"));
    }
    AnalysisTrace {
        aux,
        conv_inputs,
        pre_acts,
        y,
    }
}

/// Synthesis intermediates kept for the backward pass.
pub struct SynthesisTrace {
    pub aux: Option<SynthesisPass>,
    pub conv_inputs: Vec<Tensor>,
    pub pre_acts: Vec<Option<Tensor>>,
    pub recon: Tensor,
}

pub fn run_synthesis(params: &ModelParams, cfg: &ModelConfig, y_tilde: &Tensor) -> SynthesisTrace {
    assert_eq!(y_tilde.c(), cfg.latent_channels(), "latent channels");
    let aux = if cfg.fused_synthesis() {
        Some(auxt_synthesis(
            y_tilde,
            params.auxt.as_ref().expect("fused model has shortcut params"),
            &cfg.aux_spec(),
        ))
    } else {
        None
    };
    let s = cfg.stages;
    let mut conv_inputs = Vec::with_capacity(s);
    let mut pre_acts = Vec::with_capacity(s);
    let mut cur = y_tilde.clone();
    for (j, convt) in params.main.synthesis.iter().enumerate() {
        let input = match (&aux, j) {
            (Some(a), j) if j > 0 => Tensor::concat_channels(&[&cur, &a.intermediates[j - 1]]),
            _ => cur,
        };
        let mut out = convt.forward(&input);
        // the image-scale output stays linear so pixels are unconstrained
        pre_acts.push(if j + 1 < s {
            activate(&mut out, cfg.activation)
        } else {
            None
        });
        conv_inputs.push(input);
        cur = out;
    }
    let mut recon = cur;
    if let Some(a) = &aux {
        recon.add_assign(a.intermediates.last().expect("at least one stage"));
    }
    SynthesisTrace {
        aux,
        conv_inputs,
        pre_acts,
        recon,
    }
}

/// One full differentiable pass: analysis, latent perturbation, rate,
/// synthesis.
pub struct Trace {
    pub analysis: AnalysisTrace,
    pub y_tilde: Tensor,
    pub synthesis: SynthesisTrace,
    pub rate_bits: f64,
}

/// Training-time forward: the latent is perturbed by the caller's additive
/// `noise` (same shape as the latent) and rated with the smooth interval
/// model, so every output is differentiable.
pub fn forward_relaxed(
    params: &ModelParams,
    cfg: &ModelConfig,
    x: &Tensor,
    noise: &Tensor,
) -> Trace {
    let analysis = run_analysis(params, cfg, x);
    let mut y_tilde = analysis.y.clone();
    y_tilde.add_assign(noise);
    let bits = rate_bits(&y_tilde, &params.entropy, RateMode::Relaxed);
    let synthesis = run_synthesis(params, cfg, &y_tilde);
    Trace {
        analysis,
        y_tilde,
        synthesis,
        rate_bits: bits,
    }
}

/// Deployment-path forward: the latent is rounded to integers and rated
/// discretely. Fails if a latent value leaves the coder alphabet.
pub fn forward_hard(
    params: &ModelParams,
    cfg: &ModelConfig,
    x: &Tensor,
) -> Result<(Trace, LatentCode)> {
    let analysis = run_analysis(params, cfg, x);
    let code = quantize(&analysis.y)?;
    let y_tilde = code.to_tensor();
    let bits = rate_bits(&y_tilde, &params.entropy, RateMode::Discrete);
    let synthesis = run_synthesis(params, cfg, &y_tilde);
    Ok((
        Trace {
            analysis,
            y_tilde,
            synthesis,
            rate_bits: bits,
        },
        code,
    ))
}

/// Backward through a relaxed forward pass.
///
/// `g_recon` is the loss cotangent of the reconstruction and `g_rate` the
/// cotangent of total rate bits. Gradients accumulate into `grads`, which
/// must be `params.zeros_like()`-shaped. The image itself receives no
/// gradient. Ordering: main synthesis first (collecting cotangents for each
/// shortcut intermediate), then the shortcut inverse chain back to the
/// latent, then rate, then the main analysis convs (collecting cotangents
/// for each shortcut stage output), then the shortcut forward chain.
pub fn backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    trace: &Trace,
    g_recon: &Tensor,
    g_rate: f64,
    grads: &mut ModelParams,
) {
    let s = cfg.stages;
    let spec = cfg.aux_spec();
    let mut g_y_tilde = Tensor::zeros(trace.y_tilde.h(), trace.y_tilde.w(), trace.y_tilde.c());

    // --- main synthesis ---
    // g_r[j] is the cotangent of the j-th shortcut intermediate (1-based;
    // r_S is the image-scale reconstruction term).
    let mut g_r: Vec<Option<Tensor>> = (0..=s).map(|_| None).collect();
    let mut g_cur = g_recon.clone();
    if cfg.fused_synthesis() {
        g_r[s] = Some(g_recon.clone());
    }
    for j in (0..s).rev() {
        activate_backward(&mut g_cur, &trace.synthesis.pre_acts[j]);
        let convt = &params.main.synthesis[j];
        let input = &trace.synthesis.conv_inputs[j];
        convt.param_grad(input, &g_cur, &mut grads.main.synthesis[j]);
        let g_in = convt.input_grad(&g_cur);
        if j == 0 {
            g_y_tilde.add_assign(&g_in);
        } else if cfg.fused_synthesis() {
            let base = cfg.synthesis_conv_dims()[j - 1].1;
            let mut parts = g_in.split_channels(&[base, input.c() - base]);
            g_r[j] = Some(parts.pop().expect("two parts"));
            g_cur = parts.pop().expect("two parts");
        } else {
            g_cur = g_in;
        }
    }

    // --- shortcut inverse chain ---
    if cfg.fused_synthesis() {
        let aux_params = params.auxt.as_ref().expect("fused model has shortcut params");
        let g_aux = grads.auxt.as_mut().expect("gradient shape mismatch");
        let pass = trace.synthesis.aux.as_ref().expect("trace from fused forward");
        let last = &pass.intermediates[s - 1];
        let mut g_acc = Tensor::zeros(last.h(), last.w(), last.c());
        // tape j inverted stage s-1-j, consuming r_j and producing r_{j+1}
        for j in (0..s).rev() {
            if let Some(g) = g_r[j + 1].take() {
                g_acc.add_assign(&g);
            }
            let stage_idx = s - 1 - j;
            let stage = &aux_params.stages[stage_idx];
            let olp = aux_params
                .syn_olp
                .as_ref()
                .map(|v| &v[stage_idx])
                .unwrap_or(&stage.olp);
            let g_syn = g_aux.syn_olp.as_mut().map(|v| &mut v[stage_idx]);
            g_acc = iwls_backward(
                &g_acc,
                stage,
                olp,
                &spec,
                &pass.tapes[j],
                &mut g_aux.stages[stage_idx],
                g_syn,
            );
        }
        g_y_tilde.add_assign(&g_acc);
    }

    // --- rate ---
    if g_rate != 0.0 {
        rate_backward(
            &trace.y_tilde,
            &params.entropy,
            g_rate,
            &mut g_y_tilde,
            &mut grads.entropy,
        );
    }

    // --- latent fusion add; perturbation is additive so it passes through ---
    let mut g_q: Vec<Option<Tensor>> = (0..=s).map(|_| None).collect();
    if cfg.fused_analysis() {
        g_q[s] = Some(g_y_tilde.clone());
    }
    let mut g_cur = g_y_tilde;

    // --- main analysis ---
    for k in (0..s).rev() {
        activate_backward(&mut g_cur, &trace.analysis.pre_acts[k]);
        let conv = &params.main.analysis[k];
        let input = &trace.analysis.conv_inputs[k];
        conv.param_grad(input, &g_cur, &mut grads.main.analysis[k]);
        if k == 0 {
            break;
        }
        let g_in = conv.input_grad(&g_cur, input.h(), input.w());
        if cfg.fused_analysis() {
            let base = cfg.main_widths()[k - 1];
            let mut parts = g_in.split_channels(&[base, input.c() - base]);
            g_q[k] = Some(parts.pop().expect("two parts"));
            g_cur = parts.pop().expect("two parts");
        } else {
            g_cur = g_in;
        }
    }

    // --- shortcut forward chain ---
    if cfg.fused_analysis() {
        let aux_params = params.auxt.as_ref().expect("fused model has shortcut params");
        let g_aux = grads.auxt.as_mut().expect("gradient shape mismatch");
        let pass = trace.analysis.aux.as_ref().expect("trace from fused forward");
        let last = pass.outputs.last().expect("at least one stage");
        let mut g_acc = Tensor::zeros(last.h(), last.w(), last.c());
        // stage k consumed q_k and produced q_{k+1}
        for k in (0..s).rev() {
            if let Some(g) = g_q[k + 1].take() {
                g_acc.add_assign(&g);
            }
            g_acc = wls_backward(
                &g_acc,
                &aux_params.stages[k],
                &spec,
                &pass.tapes[k],
                &mut g_aux.stages[k],
            );
        }
    }
}

/// Sum of the orthogonality penalty over every projection in the model.
pub fn orth_penalty_total(params: &ModelParams) -> f64 {
    params
        .auxt
        .as_ref()
        .map(|a| a.all_olps().iter().map(|w| orth_penalty(w)).sum())
        .unwrap_or(0.0)
}

/// Backward of `weight * orth_penalty_total`.
pub fn orth_penalty_backward(params: &ModelParams, weight: f64, grads: &mut ModelParams) {
    let (Some(aux), Some(g_aux)) = (&params.auxt, &mut grads.auxt) else {
        return;
    };
    let add = |w: &crate::mat::Matrix, g: &mut crate::mat::Matrix| {
        let pg = orth_penalty_grad(w);
        for (gv, &p) in g.data_mut().iter_mut().zip(pg.data()) {
            *gv += weight * p;
        }
    };
    for (stage, g_stage) in aux.stages.iter().zip(&mut g_aux.stages) {
        add(&stage.olp, &mut g_stage.olp);
    }
    if let (Some(syn), Some(g_syn)) = (&aux.syn_olp, &mut g_aux.syn_olp) {
        for (w, g) in syn.iter().zip(g_syn.iter_mut()) {
            add(w, g);
        }
    }
}

// ---------------------------------------------------------------------------
// Parameter flattening
// ---------------------------------------------------------------------------

/// One named contiguous slice of the flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamGroup {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

fn visit_slices<'a>(params: &'a ModelParams, f: &mut impl FnMut(String, &'a [f64])) {
    if let Some(aux) = &params.auxt {
        for (i, st) in aux.stages.iter().enumerate() {
            f(format!("auxt.stages[{i}].s_ll"), &st.s_ll);
            f(format!("auxt.stages[{i}].s_lh"), &st.s_lh);
            f(format!("auxt.stages[{i}].s_hl"), &st.s_hl);
            f(format!("auxt.stages[{i}].s_hh"), &st.s_hh);
            f(format!("auxt.stages[{i}].olp"), st.olp.data());
        }
        if let Some(syn) = &aux.syn_olp {
            for (i, m) in syn.iter().enumerate() {
                f(format!("auxt.syn_olp[{i}]"), m.data());
            }
        }
    }
    for (i, c) in params.main.analysis.iter().enumerate() {
        f(format!("main.analysis[{i}].w"), &c.w);
        f(format!("main.analysis[{i}].b"), &c.b);
    }
    for (i, c) in params.main.synthesis.iter().enumerate() {
        f(format!("main.synthesis[{i}].w"), &c.w);
        f(format!("main.synthesis[{i}].b"), &c.b);
    }
    f("entropy.mu".into(), &params.entropy.mu);
    f("entropy.log_sigma".into(), &params.entropy.log_sigma);
}

fn visit_slices_mut(params: &mut ModelParams, f: &mut impl FnMut(&mut [f64])) {
    if let Some(aux) = &mut params.auxt {
        for st in &mut aux.stages {
            f(&mut st.s_ll);
            f(&mut st.s_lh);
            f(&mut st.s_hl);
            f(&mut st.s_hh);
            f(st.olp.data_mut());
        }
        if let Some(syn) = &mut aux.syn_olp {
            for m in syn {
                f(m.data_mut());
            }
        }
    }
    for c in &mut params.main.analysis {
        f(&mut c.w);
        f(&mut c.b);
    }
    for c in &mut params.main.synthesis {
        f(&mut c.w);
        f(&mut c.b);
    }
    f(&mut params.entropy.mu);
    f(&mut params.entropy.log_sigma);
}

/// All parameters as one vector, in a stable documented order: shortcut
/// stages (s_ll, s_lh, s_hl, s_hh, olp), synthesis projections, analysis
/// convs (w, b), synthesis convs (w, b), entropy (mu, log_sigma).
pub fn flatten(params: &ModelParams) -> Vec<f64> {
    let mut out = Vec::new();
    visit_slices(params, &mut |_, s| out.extend_from_slice(s));
    out
}

/// Group names and ranges matching `flatten`'s layout.
pub fn layout(params: &ModelParams) -> Vec<ParamGroup> {
    let mut out = Vec::new();
    let mut start = 0;
    visit_slices(params, &mut |name, s| {
        out.push(ParamGroup {
            name,
            start,
            len: s.len(),
        });
        start += s.len();
    });
    out
}

/// Scatter a flat vector (from `flatten`) back into structured parameters.
pub fn unflatten(params: &mut ModelParams, flat: &[f64]) {
    let mut pos = 0;
    visit_slices_mut(params, &mut |s| {
        s.copy_from_slice(&flat[pos..pos + s.len()]);
        pos += s.len();
    });
    assert_eq!(pos, flat.len(), "flat vector length mismatch");
}

/// The group whose range contains flat index `i`, for error reporting.
pub fn group_of(groups: &[ParamGroup], i: usize) -> &str {
    groups
        .iter()
        .find(|g| i >= g.start && i < g.start + g.len)
        .map(|g| g.name.as_str())
        .unwrap_or("<out of range>")
}

/// FNV-1a over the little-endian bytes of the flattened parameters. Pins a
/// bitstream to the exact model that produced it.
pub fn model_hash(params: &ModelParams) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    visit_slices(params, &mut |_, s| {
        for v in s {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
    });
    h
}

// ---------------------------------------------------------------------------
// File-level pipeline
// ---------------------------------------------------------------------------

pub struct EncodeStats {
    pub payload_bytes: usize,
    pub total_bytes: usize,
    /// Pixel count of the original (unpadded) image.
    pub pixels: usize,
    pub latent_shape: (usize, usize, usize),
}

impl EncodeStats {
    /// Payload-only bits per original pixel.
    pub fn payload_bpp(&self) -> f64 {
        self.payload_bytes as f64 * 8.0 / self.pixels as f64
    }

    /// Whole-file bits per original pixel, header included.
    pub fn file_bpp(&self) -> f64 {
        self.total_bytes as f64 * 8.0 / self.pixels as f64
    }
}

/// Compress one image to a self-describing byte stream.
pub fn encode_image(
    params: &ModelParams,
    cfg: &ModelConfig,
    x: &Tensor,
) -> Result<(Vec<u8>, EncodeStats)> {
    if x.c() != cfg.channels {
        return Err(Error::Dimension(format!(
            "image has {} channels, model expects {}",
            x.c(),
            cfg.channels
        )));
    }
    let (padded, meta) = pad_reflect(x, cfg.factor());
    if meta.pad_h > u16::MAX as usize || meta.pad_w > u16::MAX as usize {
        return Err(Error::Dimension(format!(
            "image {}x{} too large for the stream header",
            x.h(),
            x.w()
        )));
    }
    let analysis = run_analysis(params, cfg, &padded);
    let code = quantize(&analysis.y)?;
    let payload = crate::rangecoder::encode_latent(&code, &params.entropy)?;
    let header = StreamHeader {
        orig_h: meta.orig_h as u16,
        orig_w: meta.orig_w as u16,
        pad_h: meta.pad_h as u16,
        pad_w: meta.pad_w as u16,
        lat_h: code.h as u16,
        lat_w: code.w as u16,
        lat_c: code.c as u16,
        model_hash: model_hash(params),
    };
    let stats = EncodeStats {
        payload_bytes: payload.len(),
        total_bytes: crate::bitstream::HEADER_LEN + payload.len(),
        pixels: meta.orig_h * meta.orig_w,
        latent_shape: (code.h, code.w, code.c),
    };
    Ok((write_stream(&header, &payload), stats))
}

/// Decompress a byte stream produced by `encode_image` with the same model.
/// Output pixels are clamped to [0, 1].
pub fn decode_image(params: &ModelParams, cfg: &ModelConfig, bytes: &[u8]) -> Result<Tensor> {
    let (header, payload) = read_stream(bytes)?;
    let hash = model_hash(params);
    if header.model_hash != hash {
        return Err(Error::ModelMismatch {
            bitstream: header.model_hash,
            checkpoint: hash,
        });
    }
    let (lh, lw, lc) = (
        header.lat_h as usize,
        header.lat_w as usize,
        header.lat_c as usize,
    );
    let f = cfg.factor();
    if lc != cfg.latent_channels()
        || lh * f != header.pad_h as usize
        || lw * f != header.pad_w as usize
        || header.orig_h > header.pad_h
        || header.orig_w > header.pad_w
    {
        return Err(Error::Format(format!(
            "stream geometry {}x{}x{} (padded {}x{}) does not fit this model",
            lh, lw, lc, header.pad_h, header.pad_w
        )));
    }
    let code = crate::rangecoder::decode_latent(payload, &params.entropy, lh, lw, lc);
    let synthesis = run_synthesis(params, cfg, &code.to_tensor());
    let meta = ImageMeta {
        orig_h: header.orig_h as usize,
        orig_w: header.orig_w as usize,
        pad_h: header.pad_h as usize,
        pad_w: header.pad_w as usize,
    };
    let mut out = crop(&synthesis.recon, &meta);
    for v in out.data_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}
