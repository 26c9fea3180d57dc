//! Race the full model against the same architecture with the shortcut
//! branch removed, from the same seed on the same data, and watch the
//! rate-distortion loss on held-out images. The shortcut starts from a
//! near-orthogonal multiscale transform instead of random filters, so it
//! reaches a usable operating point far earlier.
//!
//! ```text
//! cargo run --example convergence_race -- [iterations]
//! ```

use auxt::toy;
use auxt::training::{eval_rd, resolve_config, train, TrainConfig};

fn run(label: &str, cfg: &TrainConfig, checkpoints: &[u64]) -> Vec<(u64, f64)> {
    let train_set = toy::load_split("train").expect("committed corpus");
    let test_set = toy::load_split("test").expect("committed corpus");
    let result = train(cfg, &train_set, checkpoints).expect("training");
    assert!(result.diverged.is_none(), "{label} diverged");
    let mcfg = cfg.to_model_config();
    let mut curve = Vec::new();
    for (iter, params) in &result.snapshots {
        let rd = eval_rd(params, &mcfg, cfg.lambda_rd, &test_set).expect("eval");
        curve.push((*iter, rd.rd_loss));
    }
    curve
}

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iterations must be a number"))
        .unwrap_or(600);
    let marks: Vec<u64> = (0..=6).map(|i| i * iterations / 6).collect();

    let base = vec![
        format!("iterations={iterations}"),
        "patch=32".into(),
        "batch=4".into(),
    ];
    let with_aux = resolve_config(None, &base).expect("config");
    let mut no_aux_args = base.clone();
    no_aux_args.push("fusion=none".into());
    let without_aux = resolve_config(None, &no_aux_args).expect("config");

    println!("held-out rd loss (lower is better), same seed and data:\n");
    let a = run("with shortcut", &with_aux, &marks);
    let b = run("without", &without_aux, &marks);

    println!("{:>8} {:>16} {:>16}", "iter", "with shortcut", "conv only");
    for ((it, ra), (_, rb)) in a.iter().zip(&b) {
        let bar_a = "#".repeat((ra / (a[0].1 / 30.0)).round() as usize);
        println!("{it:>8} {ra:>16.4} {rb:>16.4}   {bar_a}");
    }
    let (fa, fb) = (a.last().unwrap().1, b.last().unwrap().1);
    println!();
    if fa < fb {
        println!(
            "after {iterations} iterations the shortcut model leads by {:.1}%",
            100.0 * (fb - fa) / fb
        );
    } else {
        println!(
            "after {iterations} iterations the conv-only model leads by {:.1}% — \
             give the race more iterations to see the early-phase gap",
            100.0 * (fa - fb) / fa
        );
    }
}
