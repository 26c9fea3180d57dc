//! With no nonlinearities the whole analysis side collapses to one affine
//! map. Build it by probing with unit impulses, then histogram the |cosine|
//! between every pair of its rows: near-zero angles mean the latent
//! channels read independent directions of the input patch.
//!
//! Compares the trained transform against a random-conv baseline of the
//! same shape, and against the orthogonality-regularized model.
//!
//! ```text
//! cargo run --example channel_similarity -- [iterations]
//! ```

use auxt::analysis::{effective_operator, pairwise_similarity, SIMILARITY_BINS};
use auxt::model::init_model;
use auxt::toy;
use auxt::training::{resolve_config, train};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn show(label: &str, h: &auxt::analysis::SimilarityHistogram) {
    println!("{label}: mean |cos| = {:.4} over {} pairs", h.mean_abs_cos, h.pairs);
    // fold 50 bins into 10 bars for the terminal
    let fold = SIMILARITY_BINS / 10;
    for b in 0..10 {
        let count: u64 = h.counts[b * fold..(b + 1) * fold].iter().sum();
        let frac = count as f64 / h.pairs.max(1) as f64;
        let bar = "#".repeat((frac * 100.0).round() as usize);
        println!("  [{:.1},{:.1}) {:>6.1}%  {bar}", b as f64 / 10.0, (b + 1) as f64 / 10.0, frac * 100.0);
    }
    println!();
}

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
    let mcfg = cfg.to_model_config();
    let train_set = toy::load_split("train").expect("committed corpus");

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fresh = init_model(&mcfg, cfg.olp_init_noise, &mut rng);
    let op = effective_operator(&fresh, &mcfg).expect("operator");
    println!(
        "operator: {} latent dims x {} patch inputs\n",
        op.matrix.rows(),
        op.matrix.cols()
    );
    show("untrained", &pairwise_similarity(&op.matrix));

    println!("training {iterations} iterations...");
    let result = train(&cfg, &train_set, &[]).expect("training");
    assert!(result.diverged.is_none(), "diverged");
    let op = effective_operator(&result.params, &mcfg).expect("operator");
    show("trained", &pairwise_similarity(&op.matrix));

    println!("rows that stay near-orthogonal under training indicate the");
    println!("regularizer is holding the projection close to an isometry.");
}
