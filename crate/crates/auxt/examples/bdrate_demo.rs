//! Sweep the rate weight to trace two rate-distortion curves — the full
//! model and a conv-only baseline — then collapse the gap between them
//! into a single BD-rate number: the average bitrate change at equal
//! quality. Writes both curves as CSV files that `auxt bdrate` accepts.
//!
//! ```text
//! cargo run --example bdrate_demo -- [iterations-per-point]
//! ```
//!
//! The real operating-point grid is six lambdas; four are enough for the
//! spline and keep this demo quick.

use auxt::analysis::{bd_rate_percent, format_bd, rd_csv};
use auxt::toy;
use auxt::training::{eval_rd, resolve_config, train};

fn sweep(iterations: u64, extra: &[&str]) -> Vec<(f64, f64)> {
    let train_set = toy::load_split("train").expect("committed corpus");
    let test_set = toy::load_split("test").expect("committed corpus");
    let lambdas = [0.0035, 0.0130, 0.0483, 0.25];
    let mut curve = Vec::new();
    for lambda in lambdas {
        let mut args = vec![
            format!("iterations={iterations}"),
            format!("lambda_rd={lambda}"),
            "patch=32".into(),
            "batch=4".into(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        let cfg = resolve_config(None, &args).expect("config");
        let result = train(&cfg, &train_set, &[]).expect("training");
        assert!(result.diverged.is_none(), "diverged at lambda {lambda}");
        let rd = eval_rd(&result.params, &cfg.to_model_config(), lambda, &test_set)
            .expect("eval");
        println!("  lambda {lambda:<7} -> {:.4} bpp, {:.2} dB", rd.bpp, rd.psnr_db);
        curve.push((rd.bpp, rd.psnr_db));
    }
    curve
}

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iterations must be a number"))
        .unwrap_or(250);

    println!("reference: conv-only model, {iterations} iterations per point");
    let reference = sweep(iterations, &["fusion=none"]);
    println!("test: full model with the shortcut branch");
    let test = sweep(iterations, &[]);

    std::fs::create_dir_all("target").ok();
    std::fs::write("target/rd_reference.csv", rd_csv(&reference)).expect("write");
    std::fs::write("target/rd_test.csv", rd_csv(&test)).expect("write");
    println!("\ncurves written to target/rd_reference.csv and target/rd_test.csv");

    match bd_rate_percent(&reference, &test) {
        Ok(pct) => {
            println!("bd-rate of shortcut model vs conv-only: {}", format_bd(pct));
            if pct < 0.0 {
                println!("(negative: same quality for {}% fewer bits)", format_bd(pct).trim_start_matches('-').trim_end_matches('%'));
            }
        }
        Err(e) => println!("bd-rate not computable on these curves: {e}"),
    }
}
