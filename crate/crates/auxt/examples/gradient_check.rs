//! The entire training signal flows through one hand-written backward
//! pass. This check perturbs a few parameters in every group, compares the
//! analytic gradient against central finite differences, and prints the
//! worst relative error per group — the same oracle the test suite pins.
//!
//! ```text
//! cargo run --example gradient_check
//! ```

use auxt::mainbranch::Activation;
use auxt::model::{
    backward, flatten, forward_relaxed, init_model, layout, orth_penalty_backward,
    orth_penalty_total, unflatten, Fusion, ModelConfig, ModelParams, Placement,
};
use auxt::tensor::Tensor;
use auxt::wavelet::Basis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LAMBDA_RD: f64 = 0.013;
const LAMBDA_ORTH: f64 = 0.07;

fn loss(params: &ModelParams, cfg: &ModelConfig, x: &Tensor, noise: &Tensor, cot: &[f64]) -> f64 {
    let trace = forward_relaxed(params, cfg, x, noise);
    let recon: f64 = trace
        .synthesis
        .recon
        .data()
        .iter()
        .zip(cot)
        .map(|(r, c)| r * c)
        .sum();
    recon + LAMBDA_RD * trace.rate_bits + LAMBDA_ORTH * orth_penalty_total(params)
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = ModelConfig {
        channels: 1,
        stages: 2,
        kernel_size: 3,
        fusion: Fusion::ConcatAdd,
        placement: Placement::Both,
        basis: Basis::Haar,
        pool: false,
        scale: true,
        aux_relu: false,
        activation: Activation::None,
        tied_olp: false,
    };
    let params = init_model(&cfg, 0.01, &mut rng);

    let f = cfg.factor();
    let x = {
        let mut t = Tensor::zeros(2 * f, 2 * f, 1);
        for v in t.data_mut() {
            *v = rng.gen_range(0.0..1.0);
        }
        t
    };
    let mut noise = Tensor::zeros(2, 2, cfg.latent_channels());
    for v in noise.data_mut() {
        *v = rng.gen_range(-0.5..0.5);
    }
    let cot: Vec<f64> = (0..x.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();

    // analytic gradient
    let trace = forward_relaxed(&params, &cfg, &x, &noise);
    let mut g_recon = Tensor::zeros(2 * f, 2 * f, 1);
    g_recon.data_mut().copy_from_slice(&cot);
    let mut grads = params.zeros_like();
    backward(&params, &cfg, &trace, &g_recon, LAMBDA_RD, &mut grads);
    orth_penalty_backward(&params, LAMBDA_ORTH, &mut grads);

    let flat_g = flatten(&grads);
    let groups = layout(&params);
    let mut flat_p = flatten(&params);
    let mut scratch = params.zeros_like();

    println!("central finite differences, 3 probes per parameter group\n");
    println!("{:<44} {:>14} {:>13}", "group", "max |analytic|", "worst rel err");
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for group in &groups {
        let mut max_abs: f64 = 0.0;
        let mut max_err: f64 = 0.0;
        for probe in 0..group.len.min(3) {
            let idx = group.start + (probe * group.len) / 3;
            let keep = flat_p[idx];
            flat_p[idx] = keep + eps;
            unflatten(&mut scratch, &flat_p);
            let up = loss(&scratch, &cfg, &x, &noise, &cot);
            flat_p[idx] = keep - eps;
            unflatten(&mut scratch, &flat_p);
            let down = loss(&scratch, &cfg, &x, &noise, &cot);
            flat_p[idx] = keep;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = flat_g[idx];
            let err = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
            max_abs = max_abs.max(analytic.abs());
            max_err = max_err.max(err);
        }
        worst = worst.max(max_err);
        println!("{:<44} {max_abs:>14.5} {max_err:>13.2e}", group.name);
    }
    println!("\nworst relative error anywhere: {worst:.2e}");
    assert!(worst < 1e-4, "gradient check failed");
    println!("all gradients agree with finite differences.");
}
