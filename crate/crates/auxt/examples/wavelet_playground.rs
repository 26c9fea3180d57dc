//! Poke at the wavelet layer on its own: perfect reconstruction, energy
//! split across subbands, and how the three filter families compare on a
//! smooth ramp versus pure noise.
//!
//! ```text
//! cargo run --example wavelet_playground
//! ```

use auxt::tensor::Tensor;
use auxt::wavelet::{dwt2d, idwt2d, Basis, ALL_BASES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ramp(n: usize) -> Tensor {
    let mut t = Tensor::zeros(n, n, 1);
    for y in 0..n {
        for x in 0..n {
            t.data_mut()[y * n + x] = (x + y) as f64 / (2 * n) as f64;
        }
    }
    t
}

fn noise(n: usize, rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = Tensor::zeros(n, n, 1);
    for v in t.data_mut() {
        *v = rng.gen_range(0.0..1.0);
    }
    t
}

fn report(name: &str, img: &Tensor, basis: Basis) {
    let sb = dwt2d(img, basis).expect("even-sized input");
    let back = idwt2d(&sb, basis);
    let err = img
        .data()
        .iter()
        .zip(back.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let total = sb.ll.energy() + sb.lh.energy() + sb.hl.energy() + sb.hh.energy();
    println!(
        "{name:>8} {basis:?}: ll {:5.1}%  lh {:5.1}%  hl {:5.1}%  hh {:5.1}%  (recon err {err:.2e})",
        100.0 * sb.ll.energy() / total,
        100.0 * sb.lh.energy() / total,
        100.0 * sb.hl.energy() / total,
        100.0 * sb.hh.energy() / total,
    );
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let smooth = ramp(64);
    let rough = noise(64, &mut rng);

    println!("subband energy split after one decomposition level\n");
    for basis in ALL_BASES {
        report("ramp", &smooth, basis);
    }
    println!();
    for basis in ALL_BASES {
        report("noise", &rough, basis);
    }
    println!();
    println!("a smooth image packs nearly everything into LL — that is the");
    println!("compaction the shortcut branch hands to the codec for free.");
}
