//! Push one toy image through the whole byte pipeline — analysis,
//! quantization, range coding, container, and back — and print what each
//! stage did to it, ending with a coarse ASCII rendering of the original
//! next to the reconstruction.
//!
//! ```text
//! cargo run --example roundtrip_image -- [iterations]
//! ```

use auxt::model::{decode_image, encode_image, init_model};
use auxt::tensor::{psnr, Tensor};
use auxt::toy;
use auxt::training::{resolve_config, train};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ascii(t: &Tensor, cols: usize) -> Vec<String> {
    let ramp: &[u8] = b" .:-=+*#%@";
    let rows = cols / 2; // terminal cells are roughly 1:2
    let mut lines = Vec::new();
    for r in 0..rows {
        let mut line = String::new();
        for c in 0..cols {
            let y = r * t.h() / rows;
            let x = c * t.w() / cols;
            let v = t.data()[(y * t.w() + x) * t.c()];
            let i = ((v * (ramp.len() - 1) as f64).round() as usize).min(ramp.len() - 1);
            line.push(ramp[i] as char);
        }
        lines.push(line);
    }
    lines
}

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iterations must be a number"))
        .unwrap_or(300);

    let train_set = toy::load_split("train").expect("committed corpus");
    let test_set = toy::load_split("test").expect("committed corpus");
    let (name, image) = &test_set[0];

    let cfg = resolve_config(
        None,
        &[
            format!("iterations={iterations}"),
            "patch=32".into(),
            "batch=4".into(),
        ],
    )
    .expect("config");
    let mcfg = cfg.to_model_config();

    // untrained baseline: random projections, moment-matched entropy model
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fresh = init_model(&mcfg, cfg.olp_init_noise, &mut rng);
    let (bytes0, _) = encode_image(&fresh, &mcfg, image).expect("encode untrained");

    println!("training {iterations} iterations...");
    let result = train(&cfg, &train_set, &[]).expect("training");
    assert!(result.diverged.is_none(), "diverged");

    let (bytes, stats) = encode_image(&result.params, &mcfg, image).expect("encode");
    let recon = decode_image(&result.params, &mcfg, &bytes).expect("decode");
    let quality = psnr(&recon, image).expect("psnr");

    println!();
    println!("image {name}: {}x{} px", image.w(), image.h());
    println!("untrained model:  {} byte file", bytes0.len());
    println!(
        "trained model:    {} byte file = {} header + {} payload",
        stats.total_bytes,
        stats.total_bytes - stats.payload_bytes,
        stats.payload_bytes
    );
    println!(
        "latent {}x{}x{}  payload {:.4} bpp  file {:.4} bpp  psnr {quality:.2} dB",
        stats.latent_shape.0,
        stats.latent_shape.1,
        stats.latent_shape.2,
        stats.payload_bpp(),
        stats.file_bpp()
    );
    println!();

    let left = ascii(image, 38);
    let right = ascii(&recon, 38);
    println!("{:^38}   {:^38}", "original", "reconstruction");
    for (l, r) in left.iter().zip(&right) {
        println!("{l}   {r}");
    }
}
