//! How concentrated is the latent's energy? Train briefly, then rank the
//! latent channels by mean squared energy, print the decile breakdown, and
//! split the total between the shortcut branch and the conv branch.
//!
//! ```text
//! cargo run --example energy_compaction -- [iterations]
//! ```

use auxt::analysis::{branch_energy, latent_energy_report};
use auxt::toy;
use auxt::training::{resolve_config, train};

fn main() {
    let iterations: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("iterations must be a number"))
        .unwrap_or(400);

    let cfg = resolve_config(
        None,
        &[
            format!("iterations={iterations}"),
            "patch=32".into(),
            "batch=4".into(),
        ],
    )
    .expect("config");
    let train_set = toy::load_split("train").expect("committed corpus");
    let test_set = toy::load_split("test").expect("committed corpus");

    println!("training {iterations} iterations...");
    let result = train(&cfg, &train_set, &[]).expect("training");
    assert!(result.diverged.is_none(), "diverged");
    let mcfg = cfg.to_model_config();

    let report = latent_energy_report(&result.params, &mcfg, &test_set).expect("energy");
    println!("\nlatent channels by energy (test set):");
    let deciles = report.group_shares(10);
    for (g, share) in deciles.iter().enumerate() {
        let bar = "#".repeat((share * 120.0).round() as usize);
        println!("decile {:>2}: {:>6.2}%  {bar}", g + 1, share * 100.0);
    }
    println!(
        "\ntop 10% of channels hold {:.1}% of the energy",
        100.0 * report.top_fraction_ratio(0.1)
    );
    println!(
        "strongest channel: #{} with {:.1}%",
        report.order[0],
        100.0 * report.share(report.order[0])
    );

    let b = branch_energy(&result.params, &mcfg, &test_set).expect("branch");
    println!("\nwhere the latent energy comes from:");
    println!("  shortcut branch : {:>10.3}  ({:.1}% of latent)", b.aux, 100.0 * b.aux / b.latent);
    println!("  conv branch     : {:>10.3}  ({:.1}% of latent)", b.main, 100.0 * b.main / b.latent);
    println!("  cross term      : {:>10.3}", b.cross);
    println!("  latent total    : {:>10.3}", b.latent);
}
