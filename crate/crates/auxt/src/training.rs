//! Training: configuration, corpus loading, the data-dependent entropy
//! model initialization, Adam, and the rate-distortion training loop.
//!
//! The objective per batch is `bpp + lambda_rd * mse * 255^2` averaged over
//! patches, plus `lambda_orth` times the orthogonality penalty summed over
//! every projection. Rate uses the additive-noise relaxation so the whole
//! loss is differentiable; evaluation quantizes for real.
//!
//! Runs are deterministic given (seed, config, corpus): one seeded stream
//! drives initialization and then patch/noise sampling, and the corpus is
//! always consumed in sorted filename order.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::auxt::EXP_CLAMP;
use crate::entropy::SIGMA_MIN;
use crate::error::{Error, Result};
use crate::mainbranch::Activation;
use crate::model::{
    backward, flatten, forward_hard, forward_relaxed, group_of, init_model, layout,
    orth_penalty_backward, orth_penalty_total, run_analysis, unflatten, Fusion, ModelConfig,
    ModelParams, Placement,
};
use crate::tensor::{crop, mse, pad_reflect, Tensor};
use crate::wavelet::Basis;

/// How each shortcut stage reduces resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwtMode {
    Wavelet,
    Avgpool,
}

/// Everything a training run needs, deserializable from JSON. Unknown keys
/// are rejected so typos fail loudly instead of training the wrong model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lambda_rd: f64,
    pub lambda_orth: f64,
    pub learning_rate: f64,
    pub iterations: u64,
    pub batch: usize,
    pub patch: usize,
    pub seed: u64,
    pub log_every: u64,
    pub channels: usize,
    pub stages: usize,
    pub kernel_size: usize,
    pub fusion: Fusion,
    pub aux_placement: Placement,
    pub wavelet_basis: Basis,
    pub dwt_mode: DwtMode,
    pub scaling_enabled: bool,
    pub aux_relu: bool,
    pub main_activation: Activation,
    pub tied_olp: bool,
    pub olp_init_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lambda_rd: 0.0483,
            lambda_orth: 0.1,
            learning_rate: 1e-4,
            iterations: 2000,
            batch: 8,
            patch: 64,
            seed: 0,
            log_every: 100,
            channels: 1,
            stages: 4,
            kernel_size: 3,
            fusion: Fusion::ConcatAdd,
            aux_placement: Placement::Both,
            wavelet_basis: Basis::Haar,
            dwt_mode: DwtMode::Wavelet,
            scaling_enabled: true,
            aux_relu: false,
            main_activation: Activation::None,
            tied_olp: true,
            olp_init_noise: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn to_model_config(&self) -> ModelConfig {
        ModelConfig {
            channels: self.channels,
            stages: self.stages,
            kernel_size: self.kernel_size,
            fusion: self.fusion,
            placement: self.aux_placement,
            basis: self.wavelet_basis,
            pool: self.dwt_mode == DwtMode::Avgpool,
            scale: self.scaling_enabled,
            aux_relu: self.aux_relu,
            activation: self.main_activation,
            tied_olp: self.tied_olp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mcfg = self.to_model_config();
        mcfg.validate()?;
        if self.patch == 0 || self.patch % mcfg.factor() != 0 {
            return Err(Error::Config(format!(
                "patch {} must be a positive multiple of {}",
                self.patch,
                mcfg.factor()
            )));
        }
        if self.batch == 0 {
            return Err(Error::Config("batch must be at least 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be at least 1".into()));
        }
        if !(self.lambda_rd >= 0.0) || !(self.lambda_orth >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.olp_init_noise >= 0.0) {
            return Err(Error::Config("olp_init_noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Build a config from an optional JSON file body plus `key=value`
/// overrides. Values parse as JSON when they can (numbers, booleans) and
/// fall back to strings, so `--set fusion=none --set stages=3` both work.
pub fn resolve_config(file_json: Option<&str>, sets: &[String]) -> Result<TrainConfig> {
    let mut v: serde_json::Value = match file_json {
        Some(body) => serde_json::from_str(body)
            .map_err(|e| Error::Config(format!("config file: {e}")))?,
        None => serde_json::json!({}),
    };
    let map = v
        .as_object_mut()
        .ok_or_else(|| Error::Config("config file must hold a JSON object".into()))?;
    for s in sets {
        let (key, raw) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{s}' is not key=value")))?;
        let val = serde_json::from_str(raw)
            .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
        map.insert(key.to_string(), val);
    }
    let cfg: TrainConfig =
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Load every PGM/PPM in a directory, sorted by filename so every run sees
/// the same order.
pub fn load_corpus(dir: impl AsRef<Path>, channels: usize) -> Result<Vec<(String, Tensor)>> {
    let dir = dir.as_ref();
    let mut names: Vec<String> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".pgm") || n.ends_with(".ppm"))
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::Config(format!(
            "no .pgm/.ppm images in {}",
            dir.display()
        )));
    }
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let t = crate::netpbm::load_image(dir.join(&name))?;
        if t.c() != channels {
            return Err(Error::Config(format!(
                "{name} has {} channels, config wants {channels}",
                t.c()
            )));
        }
        out.push((name, t));
    }
    Ok(out)
}

/// Set each latent channel's Gaussian to the empirical moments of the
/// un-perturbed latent over the whole corpus. Deterministic: no sampling,
/// images in sorted order, full-image forward passes.
pub fn init_entropy_from_data(
    params: &mut ModelParams,
    cfg: &ModelConfig,
    images: &[(String, Tensor)],
) {
    let c = cfg.latent_channels();
    let (mut sum, mut sumsq, mut count) = (vec![0.0; c], vec![0.0; c], 0u64);
    for (_, img) in images {
        let (padded, _) = pad_reflect(img, cfg.factor());
        let y = run_analysis(params, cfg, &padded).y;
        for px in 0..y.h() * y.w() {
            let row = &y.data()[px * c..(px + 1) * c];
            for (ch, &v) in row.iter().enumerate() {
                sum[ch] += v;
                sumsq[ch] += v * v;
            }
        }
        count += (y.h() * y.w()) as u64;
    }
    let n = count as f64;
    for ch in 0..c {
        let mean = sum[ch] / n;
        let var = (sumsq[ch] / n - mean * mean).max(0.0);
        params.entropy.mu[ch] = mean;
        params.entropy.log_sigma[ch] = var.sqrt().max(10.0 * SIGMA_MIN).ln();
    }
}

/// Adam with bias correction; hyperparameters are fixed, only the learning
/// rate is scheduled externally.
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    pub fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * g;
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * g * g;
            let mb = self.m[i] / bc1;
            let vb = self.v[i] / bc2;
            params[i] -= lr * mb / (vb.sqrt() + Self::EPS);
        }
    }
}

/// One row of the training log CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iter: u64,
    pub bpp: f64,
    pub mse: f64,
    pub rd_loss: f64,
    pub orth_loss: f64,
    pub top10_ratio: f64,
    pub aux_energy: f64,
    pub main_energy: f64,
}

pub const LOG_HEADER: &str = "iter,bpp,mse,rd_loss,orth_loss,top10_ratio,aux_energy,main_energy";

pub fn log_to_csv(rows: &[LogRow]) -> String {
    let mut s = String::from(LOG_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{:.6},{:.8},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
            r.iter, r.bpp, r.mse, r.rd_loss, r.orth_loss, r.top10_ratio, r.aux_energy, r.main_energy
        ));
    }
    s
}

pub fn parse_log_csv(body: &str) -> Result<Vec<LogRow>> {
    let mut lines = body.lines();
    match lines.next() {
        Some(h) if h.trim() == LOG_HEADER => {}
        _ => return Err(Error::Format("training log: missing or wrong header".into())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 8 {
            return Err(Error::Format(format!(
                "training log line {}: {} fields, want 8",
                i + 2,
                f.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::Format(format!("training log line {}: {e}", i + 2)))
        };
        rows.push(LogRow {
            iter: f[0]
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("training log line {}: {e}", i + 2)))?,
            bpp: num(f[1])?,
            mse: num(f[2])?,
            rd_loss: num(f[3])?,
            orth_loss: num(f[4])?,
            top10_ratio: num(f[5])?,
            aux_energy: num(f[6])?,
            main_energy: num(f[7])?,
        });
    }
    Ok(rows)
}

/// Result of a training run. `diverged` reports a non-finite loss or
/// gradient; the params carried here are then the last finite ones, which
/// the caller should still persist.
pub struct TrainOutput {
    pub params: ModelParams,
    pub log: Vec<LogRow>,
    pub snapshots: Vec<(u64, ModelParams)>,
    pub diverged: Option<(u64, String)>,
}

/// Share of total squared channel energy held by the top 10% of channels
/// (at least one), channels ranked by energy.
fn top10_share(channel_energy: &[f64]) -> f64 {
    let total: f64 = channel_energy.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut v = channel_energy.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = (v.len() / 10).max(1);
    v[..k].iter().sum::<f64>() / total
}

/// Train a model on `images` with `cfg`. `snapshot_iters` asks for deep
/// copies of the parameters right after those iterations (0 = initial
/// state), which ablation studies use to compare mid-run models without
/// retraining.
pub fn train(
    cfg: &TrainConfig,
    images: &[(String, Tensor)],
    snapshot_iters: &[u64],
) -> Result<TrainOutput> {
    cfg.validate()?;
    let mcfg = cfg.to_model_config();
    if images.is_empty() {
        return Err(Error::Config("training corpus is empty".into()));
    }
    for (name, img) in images {
        if img.c() != cfg.channels {
            return Err(Error::Config(format!(
                "{name} has {} channels, config wants {}",
                img.c(),
                cfg.channels
            )));
        }
        if img.h() < cfg.patch || img.w() < cfg.patch {
            return Err(Error::Config(format!(
                "{name} is {}x{}, smaller than the {} patch",
                img.h(),
                img.w(),
                cfg.patch
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = init_model(&mcfg, cfg.olp_init_noise, &mut rng);
    init_entropy_from_data(&mut params, &mcfg, images);

    let mut snapshots = Vec::new();
    if snapshot_iters.contains(&0) {
        snapshots.push((0, params.clone()));
    }

    let groups = layout(&params);
    let s_ranges: Vec<(usize, usize)> = groups
        .iter()
        .filter(|g| g.name.contains("].s_"))
        .map(|g| (g.start, g.start + g.len))
        .collect();
    let mut flat = flatten(&params);
    let mut adam = Adam::new(flat.len());
    let mut log = Vec::new();

    let lat_c = mcfg.latent_channels();
    let lat_hw = cfg.patch / mcfg.factor();
    let pixels_per_patch = (cfg.patch * cfg.patch) as f64;
    let n_latent = (lat_hw * lat_hw * lat_c) as f64;

    for it in 0..cfg.iterations {
        let lr = if (it + 1) as f64 > 0.9 * cfg.iterations as f64 {
            cfg.learning_rate * 0.1
        } else {
            cfg.learning_rate
        };

        let mut grads = params.zeros_like();
        let (mut bpp_acc, mut mse_acc) = (0.0, 0.0);
        let mut chan_energy = vec![0.0; lat_c];
        let (mut aux_e, mut main_e) = (0.0, 0.0);

        for _ in 0..cfg.batch {
            let (_, img) = &images[rng.gen_range(0..images.len())];
            let y0 = rng.gen_range(0..=img.h() - cfg.patch);
            let x0 = rng.gen_range(0..=img.w() - cfg.patch);
            let mut patch = Tensor::zeros(cfg.patch, cfg.patch, cfg.channels);
            for y in 0..cfg.patch {
                for x in 0..cfg.patch {
                    patch
                        .pixel_mut(y, x)
                        .copy_from_slice(img.pixel(y0 + y, x0 + x));
                }
            }
            let noise_data: Vec<f64> = (0..lat_hw * lat_hw * lat_c)
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect();
            let noise = Tensor::from_vec(lat_hw, lat_hw, lat_c, noise_data);

            let trace = forward_relaxed(&params, &mcfg, &patch, &noise);
            let patch_mse = mse(&trace.synthesis.recon, &patch).expect("shapes match");
            bpp_acc += trace.rate_bits / pixels_per_patch;
            mse_acc += patch_mse;

            for px in 0..lat_hw * lat_hw {
                let row = &trace.analysis.y.data()[px * lat_c..(px + 1) * lat_c];
                for (ch, &v) in row.iter().enumerate() {
                    chan_energy[ch] += v * v;
                }
            }
            if let Some(a) = &trace.analysis.aux {
                let q = a.outputs.last().expect("at least one stage");
                aux_e += q.energy();
                let mut f_only = trace.analysis.y.clone();
                for (fv, &qv) in f_only.data_mut().iter_mut().zip(q.data()) {
                    *fv -= qv;
                }
                main_e += f_only.energy();
            } else {
                main_e += trace.analysis.y.energy();
            }

            // d/d recon of lambda_rd*255^2*mse / batch
            let mse_w = cfg.lambda_rd * 255.0 * 255.0 * 2.0
                / (trace.synthesis.recon.len() as f64 * cfg.batch as f64);
            let mut g_recon = trace.synthesis.recon.clone();
            for (g, &xv) in g_recon.data_mut().iter_mut().zip(patch.data()) {
                *g = (*g - xv) * mse_w;
            }
            let g_rate = 1.0 / (pixels_per_patch * cfg.batch as f64);
            backward(&params, &mcfg, &trace, &g_recon, g_rate, &mut grads);
        }
        orth_penalty_backward(&params, cfg.lambda_orth, &mut grads);

        let orth = orth_penalty_total(&params);
        let bpp = bpp_acc / cfg.batch as f64;
        let patch_mse = mse_acc / cfg.batch as f64;
        let rd = bpp + cfg.lambda_rd * patch_mse * 255.0 * 255.0;
        let loss = rd + cfg.lambda_orth * orth;

        if !loss.is_finite() {
            return Ok(TrainOutput {
                params,
                log,
                snapshots,
                diverged: Some((it + 1, format!("loss = {loss}"))),
            });
        }
        let flat_g = flatten(&grads);
        if let Some(bad) = flat_g.iter().position(|g| !g.is_finite()) {
            let what = format!("gradient of {}", group_of(&groups, bad));
            return Ok(TrainOutput {
                params,
                log,
                snapshots,
                diverged: Some((it + 1, what)),
            });
        }

        adam.step(&mut flat, &flat_g, lr);
        for &(a, b) in &s_ranges {
            for v in &mut flat[a..b] {
                *v = v.clamp(-EXP_CLAMP, EXP_CLAMP);
            }
        }
        unflatten(&mut params, &flat);

        if (it + 1) % cfg.log_every == 0 || it + 1 == cfg.iterations {
            let _ = n_latent;
            log.push(LogRow {
                iter: it + 1,
                bpp,
                mse: patch_mse,
                rd_loss: rd,
                orth_loss: orth,
                top10_ratio: top10_share(&chan_energy),
                aux_energy: aux_e / cfg.batch as f64,
                main_energy: main_e / cfg.batch as f64,
            });
        }
        if snapshot_iters.contains(&(it + 1)) {
            snapshots.push((it + 1, params.clone()));
        }
    }

    Ok(TrainOutput {
        params,
        log,
        snapshots,
        diverged: None,
    })
}

/// Deployment-style metrics averaged over whole images: quantized latents,
/// the analytic discrete rate, and distortion on the cropped, clamped
/// reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdSummary {
    pub bpp: f64,
    pub mse: f64,
    pub psnr_db: f64,
    pub rd_loss: f64,
}

pub fn eval_rd(
    params: &ModelParams,
    mcfg: &ModelConfig,
    lambda_rd: f64,
    images: &[(String, Tensor)],
) -> Result<RdSummary> {
    if images.is_empty() {
        return Err(Error::Config("evaluation corpus is empty".into()));
    }
    let (mut bpp_acc, mut mse_acc) = (0.0, 0.0);
    for (_, img) in images {
        let (padded, meta) = pad_reflect(img, mcfg.factor());
        let (trace, _) = forward_hard(params, mcfg, &padded)?;
        let mut recon = crop(&trace.synthesis.recon, &meta);
        for v in recon.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        bpp_acc += trace.rate_bits / (img.h() * img.w()) as f64;
        mse_acc += mse(&recon, img)?;
    }
    let n = images.len() as f64;
    let (bpp, m) = (bpp_acc / n, mse_acc / n);
    Ok(RdSummary {
        bpp,
        mse: m,
        psnr_db: if m > 0.0 { 10.0 * (1.0 / m).log10() } else { f64::INFINITY },
        rd_loss: bpp + lambda_rd * m * 255.0 * 255.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::model_hash;

    fn tiny_corpus(n: usize, size: usize) -> Vec<(String, Tensor)> {
        // deterministic mix of ramps and bumps, enough structure to train on
        (0..n)
            .map(|i| {
                let mut t = Tensor::zeros(size, size, 1);
                for y in 0..size {
                    for x in 0..size {
                        let fy = y as f64 / size as f64;
                        let fx = x as f64 / size as f64;
                        let v = match i % 3 {
                            0 => fx,
                            1 => 0.5 + 0.5 * (6.28318 * fy).sin() * (6.28318 * fx).cos(),
                            _ => {
                                if (fx - 0.5).hypot(fy - 0.5) < 0.3 {
                                    0.9
                                } else {
                                    0.1
                                }
                            }
                        };
                        *t.at_mut(y, x, 0) = v.clamp(0.0, 1.0);
                    }
                }
                (format!("img{i:02}.pgm"), t)
            })
            .collect()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            iterations: 6,
            batch: 2,
            patch: 16,
            stages: 2,
            log_every: 2,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn defaults_parse_from_empty_json() {
        let cfg = resolve_config(Some("{}"), &[]).unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!(cfg.lambda_rd, 0.0483);
        assert_eq!(cfg.patch, 64);
        assert_eq!(cfg.main_activation, Activation::None);
    }

    #[test]
    fn overrides_parse_typed_values() {
        let sets = [
            "stages=3".to_string(),
            "fusion=none".to_string(),
            "scaling_enabled=false".to_string(),
            "lambda_rd=0.013".to_string(),
            "wavelet_basis=db4".to_string(),
        ];
        let cfg = resolve_config(None, &sets).unwrap();
        assert_eq!(cfg.stages, 3);
        assert_eq!(cfg.fusion, Fusion::None);
        assert!(!cfg.scaling_enabled);
        assert_eq!(cfg.lambda_rd, 0.013);
        assert_eq!(cfg.wavelet_basis, Basis::Db4);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(resolve_config(Some(r#"{"lamda_rd":0.1}"#), &[]).is_err());
        assert!(resolve_config(None, &["patch=50".into()]).is_err()); // not a multiple of 16
        assert!(resolve_config(None, &["fusion=sideways".into()]).is_err());
        assert!(resolve_config(None, &["noise".into()]).is_err()); // missing '='
        assert!(resolve_config(None, &["stages=7".into()]).is_err());
    }

    #[test]
    fn training_is_deterministic_and_seed_sensitive() {
        let corpus = tiny_corpus(3, 32);
        let cfg = tiny_cfg();
        let a = train(&cfg, &corpus, &[]).unwrap();
        let b = train(&cfg, &corpus, &[]).unwrap();
        assert!(a.diverged.is_none());
        assert_eq!(model_hash(&a.params), model_hash(&b.params));
        assert_eq!(a.log, b.log);

        let other = TrainConfig {
            seed: 1,
            ..tiny_cfg()
        };
        let c = train(&other, &corpus, &[]).unwrap();
        assert_ne!(model_hash(&a.params), model_hash(&c.params));
    }

    #[test]
    fn entropy_init_matches_corpus_moments() {
        let corpus = tiny_corpus(2, 32);
        let cfg = tiny_cfg();
        let mcfg = cfg.to_model_config();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut params = init_model(&mcfg, 0.0, &mut rng);
        init_entropy_from_data(&mut params, &mcfg, &corpus);

        // recompute channel 0's moments by hand
        let mut vals = Vec::new();
        for (_, img) in &corpus {
            let y = run_analysis(&params, &mcfg, img).y;
            for px in 0..y.h() * y.w() {
                vals.push(y.data()[px * y.c()]);
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
        assert!((params.entropy.mu[0] - mean).abs() < 1e-12);
        assert!((params.entropy.log_sigma[0] - var.sqrt().max(0.01).ln()).abs() < 1e-12);
    }

    #[test]
    fn snapshots_come_back_at_requested_iterations() {
        let corpus = tiny_corpus(2, 32);
        let cfg = tiny_cfg();
        let out = train(&cfg, &corpus, &[0, 3, 6]).unwrap();
        let iters: Vec<u64> = out.snapshots.iter().map(|(i, _)| *i).collect();
        assert_eq!(iters, vec![0, 3, 6]);
        assert_eq!(out.snapshots[2].1, out.params, "final snapshot is the result");
        assert_ne!(
            model_hash(&out.snapshots[0].1),
            model_hash(&out.params),
            "training moved the parameters"
        );
    }

    #[test]
    fn log_rows_follow_the_schedule_and_schema() {
        let corpus = tiny_corpus(2, 32);
        let cfg = TrainConfig {
            iterations: 7,
            log_every: 3,
            ..tiny_cfg()
        };
        let out = train(&cfg, &corpus, &[]).unwrap();
        let iters: Vec<u64> = out.log.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![3, 6, 7], "every log_every plus the final iter");
        for r in &out.log {
            assert!(r.bpp > 0.0 && r.mse >= 0.0 && r.rd_loss > 0.0);
            assert!((0.0..=1.0).contains(&r.top10_ratio));
        }
        let csv = log_to_csv(&out.log);
        assert!(csv.starts_with(LOG_HEADER));
        let back = parse_log_csv(&csv).unwrap();
        assert_eq!(back.len(), out.log.len());
        for (a, b) in back.iter().zip(&out.log) {
            assert_eq!(a.iter, b.iter);
            assert!((a.rd_loss - b.rd_loss).abs() < 1e-5);
        }
        assert!(parse_log_csv("nope\n1,2").is_err());
    }

    #[test]
    fn exponents_stay_inside_the_clamp() {
        let corpus = tiny_corpus(2, 32);
        let cfg = TrainConfig {
            learning_rate: 50.0, // absurd on purpose; adam steps ~ lr
            iterations: 3,
            ..tiny_cfg()
        };
        let out = train(&cfg, &corpus, &[]).unwrap();
        if let Some(aux) = &out.params.auxt {
            for st in &aux.stages {
                for s in [&st.s_ll, &st.s_lh, &st.s_hl, &st.s_hh] {
                    assert!(s.iter().all(|v| v.abs() <= EXP_CLAMP));
                }
            }
        }
    }

    #[test]
    fn absurd_learning_rate_reports_divergence_with_finite_params() {
        let corpus = tiny_corpus(2, 32);
        let cfg = TrainConfig {
            learning_rate: 1e80,
            iterations: 50,
            ..tiny_cfg()
        };
        let out = train(&cfg, &corpus, &[]).unwrap();
        let (at, what) = out.diverged.expect("must diverge");
        assert!(at >= 2, "first step is finite, blow-up happens after");
        assert!(!what.is_empty());
        assert!(flatten(&out.params).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rd_loss_improves_over_training() {
        let corpus = tiny_corpus(3, 32);
        let cfg = TrainConfig {
            iterations: 120,
            batch: 4,
            patch: 16,
            stages: 2,
            log_every: 10,
            learning_rate: 3e-4,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &corpus, &[]).unwrap();
        assert!(out.diverged.is_none());
        let first = out.log.first().unwrap().rd_loss;
        let last = out.log.last().unwrap().rd_loss;
        assert!(
            last < first,
            "rd did not improve: {first} -> {last}"
        );
    }

    #[test]
    fn eval_rd_matches_manual_computation() {
        let corpus = tiny_corpus(1, 32);
        let cfg = tiny_cfg();
        let mcfg = cfg.to_model_config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut params = init_model(&mcfg, 0.0, &mut rng);
        init_entropy_from_data(&mut params, &mcfg, &corpus);
        let summary = eval_rd(&params, &mcfg, 0.01, &corpus).unwrap();

        let (_, img) = &corpus[0];
        let (trace, _) = forward_hard(&params, &mcfg, img).unwrap();
        let mut recon = trace.synthesis.recon.clone();
        for v in recon.data_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        let want_bpp = trace.rate_bits / (32.0 * 32.0);
        let want_mse = mse(&recon, img).unwrap();
        assert!((summary.bpp - want_bpp).abs() < 1e-12);
        assert!((summary.mse - want_mse).abs() < 1e-12);
        assert!((summary.rd_loss - (want_bpp + 0.01 * want_mse * 65025.0)).abs() < 1e-9);
        assert!(summary.psnr_db > 0.0);
    }
}
