//! Switch the architectural ingredients off one at a time and compare
//! held-out rate-distortion loss after a short training budget, all from
//! the same seed: full model, no subband scaling, average-pool instead of
//! wavelets, a nonlinearity after the projection, shortcut in the analysis
//! side only, synthesis side only, and no shortcut at all.
//!
//! ```text
//! cargo run --example ablation_grid -- [iterations]
//! ```

use auxt::toy;
use auxt::training::{eval_rd, resolve_config, train};

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iterations must be a number"))
        .unwrap_or(300);

    let variants: &[(&str, &[&str])] = &[
        ("full model", &[]),
        ("scaling off", &["scaling_enabled=false"]),
        ("avgpool, no wavelet", &["dwt_mode=avgpool"]),
        ("relu after projection", &["aux_relu=true"]),
        ("analysis side only", &["aux_placement=analysis_only"]),
        ("synthesis side only", &["aux_placement=synthesis_only"]),
        ("no shortcut", &["fusion=none"]),
    ];

    let train_set = toy::load_split("train").expect("committed corpus");
    let test_set = toy::load_split("test").expect("committed corpus");

    println!("{iterations} iterations each, held-out metrics:\n");
    println!(
        "{:<24} {:>10} {:>10} {:>10}",
        "variant", "rd loss", "bpp", "psnr"
    );
    let mut rows = Vec::new();
    for (label, extra) in variants {
        let mut args = vec![
            format!("iterations={iterations}"),
            "patch=32".into(),
            "batch=4".into(),
        ];
        args.extend(extra.iter().map(|s| s.to_string()));
        let cfg = resolve_config(None, &args).expect("config");
        let result = train(&cfg, &train_set, &[]).expect("training");
        assert!(result.diverged.is_none(), "{label} diverged");
        let rd = eval_rd(
            &result.params,
            &cfg.to_model_config(),
            cfg.lambda_rd,
            &test_set,
        )
        .expect("eval");
        println!(
            "{label:<24} {:>10.4} {:>10.4} {:>10.2}",
            rd.rd_loss, rd.bpp, rd.psnr_db
        );
        rows.push((label.to_string(), rd.rd_loss));
    }

    rows.sort_by(|a, b| a.1.total_cmp(&b.1));
    println!("\nranking (best first):");
    for (i, (label, rd)) in rows.iter().enumerate() {
        println!("  {}. {label} ({rd:.4})", i + 1);
    }
}
