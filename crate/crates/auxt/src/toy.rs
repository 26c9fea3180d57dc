//! Deterministic synthetic grayscale corpus: a dozen 96x96 images mixing
//! smooth ramps, polygonal facets, disks, plane waves, and blurred noise.
//! The rendered files are committed under `assets/toy/` and can be
//! regenerated bit-for-bit at any time (see the `generate_corpus` example).

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netpbm::save_image;
use crate::tensor::{reflect_index, Tensor};

/// Side length of every toy image.
pub const SIDE: usize = 96;
/// Seed that fixes the whole corpus.
pub const SEED: u64 = 7;
/// Number of training images.
pub const TRAIN_COUNT: usize = 8;
/// Number of held-out images.
pub const TEST_COUNT: usize = 4;

/// Where the committed corpus lives inside this crate's source tree.
pub fn asset_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/toy")
}

fn render(f: impl Fn(f64, f64) -> f64) -> Tensor {
    let mut t = Tensor::zeros(SIDE, SIDE, 1);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let v = f(x as f64 / SIDE as f64, y as f64 / SIDE as f64);
            t.data_mut()[y * SIDE + x] = v.clamp(0.0, 1.0);
        }
    }
    t
}

/// Linear ramp along a random direction.
fn ramp(rng: &mut ChaCha8Rng) -> Tensor {
    let theta = rng.gen_range(0.0..TAU);
    let (dx, dy) = (libm::cos(theta), libm::sin(theta));
    let base = rng.gen_range(0.15..0.45);
    let amp = rng.gen_range(0.4..0.7);
    render(|x, y| base + amp * (dx * x + dy * y + 0.5 * (1.0 - dx - dy)))
}

/// Piecewise-constant regions built from a handful of half-plane steps.
fn facets(rng: &mut ChaCha8Rng) -> Tensor {
    let base = rng.gen_range(0.3..0.7);
    let k = rng.gen_range(3..=6);
    let steps: Vec<(f64, f64, f64, f64, f64)> = (0..k)
        .map(|_| {
            let px = rng.gen_range(0.15..0.85);
            let py = rng.gen_range(0.15..0.85);
            let theta = rng.gen_range(0.0..TAU);
            let delta = rng.gen_range(0.12..0.3) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (px, py, libm::cos(theta), libm::sin(theta), delta)
        })
        .collect();
    render(|x, y| {
        let mut v = base;
        for &(px, py, nx, ny, d) in &steps {
            if (x - px) * nx + (y - py) * ny > 0.0 {
                v += d;
            }
        }
        v
    })
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Soft-edged disks scattered over a flat background.
fn disks(rng: &mut ChaCha8Rng) -> Tensor {
    let base = rng.gen_range(0.25..0.55);
    let k = rng.gen_range(4..=7);
    let blobs: Vec<(f64, f64, f64, f64, f64)> = (0..k)
        .map(|_| {
            let cx = rng.gen_range(0.1..0.9);
            let cy = rng.gen_range(0.1..0.9);
            let r = rng.gen_range(0.07..0.22);
            let delta = rng.gen_range(0.18..0.45) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let edge = rng.gen_range(0.01..0.04);
            (cx, cy, r, delta, edge)
        })
        .collect();
    render(|x, y| {
        let mut v = base;
        for &(cx, cy, r, d, e) in &blobs {
            let dist = libm::hypot(x - cx, y - cy);
            v += d * smoothstep((r - dist) / e + 0.5);
        }
        v
    })
}

/// A few superposed plane waves.
fn waves(rng: &mut ChaCha8Rng) -> Tensor {
    let k = rng.gen_range(2..=3);
    let comps: Vec<(f64, f64, f64, f64)> = (0..k)
        .map(|_| {
            let cycles = rng.gen_range(2.0..9.0);
            let theta = rng.gen_range(0.0..TAU);
            let phase = rng.gen_range(0.0..TAU);
            let amp = rng.gen_range(0.1..0.25);
            (cycles * libm::cos(theta), cycles * libm::sin(theta), phase, amp)
        })
        .collect();
    render(|x, y| {
        let mut v = 0.5;
        for &(fx, fy, phase, amp) in &comps {
            v += amp * libm::sin(TAU * (fx * x + fy * y) + phase);
        }
        v
    })
}

/// White noise pushed through a few box blurs, then stretched to a fixed
/// dynamic range.
fn smooth_noise(rng: &mut ChaCha8Rng) -> Tensor {
    let mut t = Tensor::zeros(SIDE, SIDE, 1);
    for v in t.data_mut() {
        *v = rng.gen_range(0.0..1.0);
    }
    let radius = rng.gen_range(2..=4) as isize;
    for _ in 0..3 {
        t = box_blur(&t, radius);
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in t.data() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = (hi - lo).max(1e-9);
    for v in t.data_mut() {
        *v = 0.05 + 0.9 * (*v - lo) / span;
    }
    t
}

fn box_blur(t: &Tensor, radius: isize) -> Tensor {
    let (h, w) = (t.h(), t.w());
    let norm = 1.0 / (2 * radius + 1) as f64;
    // horizontal then vertical pass, reflecting at the borders
    let mut mid = Tensor::zeros(h, w, 1);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dx in -radius..=radius {
                acc += t.data()[y * w + reflect_index(x as isize + dx, w)];
            }
            mid.data_mut()[y * w + x] = acc * norm;
        }
    }
    let mut out = Tensor::zeros(h, w, 1);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for dy in -radius..=radius {
                acc += mid.data()[reflect_index(y as isize + dy, h) * w + x];
            }
            out.data_mut()[y * w + x] = acc * norm;
        }
    }
    out
}

fn blend(a: &Tensor, b: &Tensor, w: f64) -> Tensor {
    let mut out = a.clone();
    for (o, &bv) in out.data_mut().iter_mut().zip(b.data()) {
        *o = (w * *o + (1.0 - w) * bv).clamp(0.0, 1.0);
    }
    out
}

fn make(kind: usize, rng: &mut ChaCha8Rng) -> Tensor {
    match kind {
        0 => ramp(rng),
        1 => facets(rng),
        2 => disks(rng),
        3 => waves(rng),
        4 => smooth_noise(rng),
        5 => {
            let a = ramp(rng);
            let b = disks(rng);
            blend(&a, &b, 0.5)
        }
        6 => {
            let a = facets(rng);
            let b = waves(rng);
            blend(&a, &b, 0.6)
        }
        _ => {
            let a = smooth_noise(rng);
            let b = ramp(rng);
            blend(&a, &b, 0.55)
        }
    }
}

/// Render the whole corpus in memory: (train, test), names included.
pub fn build_corpus() -> (Vec<(String, Tensor)>, Vec<(String, Tensor)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let train_kinds = [0, 1, 2, 3, 4, 5, 6, 7];
    let test_kinds = [1, 3, 4, 5];
    let split = |kinds: &[usize], rng: &mut ChaCha8Rng| {
        kinds
            .iter()
            .enumerate()
            .map(|(i, &k)| (format!("toy_{i:02}.pgm"), make(k, rng)))
            .collect::<Vec<_>>()
    };
    let train = split(&train_kinds, &mut rng);
    let test = split(&test_kinds, &mut rng);
    (train, test)
}

/// Write the corpus under `root/train/` and `root/test/`.
pub fn write_corpus(root: &Path) -> Result<()> {
    let (train, test) = build_corpus();
    for (split, images) in [("train", &train), ("test", &test)] {
        let dir = root.join(split);
        fs::create_dir_all(&dir)?;
        for (name, img) in images {
            save_image(dir.join(name), img)?;
        }
    }
    Ok(())
}

/// Load one committed split ("train" or "test") from `assets/toy/`.
pub fn load_split(split: &str) -> Result<Vec<(String, Tensor)>> {
    let dir = asset_root().join(split);
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "missing committed corpus at {}; run the generate_corpus example",
            dir.display()
        )));
    }
    crate::training::load_corpus(&dir, 1)
}
