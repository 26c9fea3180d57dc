//! Regenerate the committed toy corpus, or render it somewhere else.
//!
//! ```text
//! cargo run --example generate_corpus            # refresh assets/toy/
//! cargo run --example generate_corpus -- /tmp/x  # render elsewhere
//! ```
//!
//! The corpus is a pure function of a fixed seed, so refreshing the
//! committed files is always a no-op unless the generator itself changed.

use std::path::PathBuf;

use auxt::toy;

fn main() {
    let dest = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(toy::asset_root);
    toy::write_corpus(&dest).expect("corpus render failed");
    let (train, test) = toy::build_corpus();
    println!(
        "wrote {} train + {} test images ({}x{} grayscale) to {}",
        train.len(),
        test.len(),
        toy::SIDE,
        toy::SIDE,
        dest.display()
    );
}
