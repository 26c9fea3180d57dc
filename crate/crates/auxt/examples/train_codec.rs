//! Train a small codec on the committed toy corpus through the library API
//! and save a checkpoint plus a CSV training log.
//!
//! ```text
//! cargo run --example train_codec -- [iterations] [out.ckpt]
//! ```
//!
//! Defaults: 400 iterations, checkpoint to target/train_codec.ckpt. The
//! same thing is available from the command line as `auxt train`.

use auxt::checkpoint;
use auxt::toy;
use auxt::training::{log_to_csv, resolve_config, train};

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iterations must be a number"))
        .unwrap_or(400);
    let out = std::env::args()
        .nth(2)
        .unwrap_or_else(|| "target/train_codec.ckpt".to_string());

    let cfg = resolve_config(
        None,
        &[
            format!("iterations={iterations}"),
            "patch=32".into(),
            "batch=4".into(),
            "log_every=50".into(),
        ],
    )
    .expect("config");
    let images = toy::load_split("train").expect("committed corpus");

    println!("training {} iterations on {} images...", cfg.iterations, images.len());
    let result = train(&cfg, &images, &[]).expect("training");
    if let Some((iter, what)) = &result.diverged {
        eprintln!("diverged at iteration {iter}: non-finite {what}");
        std::process::exit(5);
    }

    for row in &result.log {
        println!(
            "iter {:>5}  bpp {:.4}  mse {:.6}  rd {:.4}  top10 {:.3}",
            row.iter, row.bpp, row.mse, row.rd_loss, row.top10_ratio
        );
    }

    let config_json = serde_json::to_string(&cfg).unwrap();
    checkpoint::save(&out, &config_json, &result.params).expect("save checkpoint");
    std::fs::write("target/train_codec_log.csv", log_to_csv(&result.log)).expect("save log");
    println!("checkpoint: {out}");
    println!("log:        target/train_codec_log.csv");
}
