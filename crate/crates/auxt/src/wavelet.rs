//! Single-level 2-D discrete wavelet transforms with periodic extension.
//!
//! Three filter banks: orthonormal haar and db4, and the biorthogonal
//! bior2_2 spline pair. An even-sized (h, w, c) tensor maps to four
//! half-resolution subbands ll, lh, hl, hh; the first letter is the
//! horizontal band, the second the vertical one, so lh is smooth along x
//! and detail along y.
//!
//! Signals are extended periodically, which keeps analysis/synthesis exact
//! adjoints of each other and gives perfect reconstruction for every even
//! length, including lengths shorter than the filter. Haar additionally has
//! a direct 2x2 block form (each block (a b / c d) maps to half the four
//! sign patterns), used as the fast path; the separable engine remains the
//! equivalence oracle for it.
//!
//! `avgpool2d` is the degraded stand-in used by the ablation that strips the
//! wavelet: a plain 2x2 box average with no detail bands.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Haar,
    Db4,
    Bior2_2,
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Basis::Haar),
            "db4" => Ok(Basis::Db4),
            "bior2_2" => Ok(Basis::Bior2_2),
            other => Err(Error::Config(format!(
                "unknown wavelet basis {other:?}, expected haar, db4 or bior2_2"
            ))),
        }
    }
}

/// One half of a filter bank: lowpass and highpass taps plus the index each
/// filter starts at relative to the output position 2k.
struct FilterPair {
    lo: &'static [f64],
    lo_off: isize,
    hi: Vec<f64>,
    hi_off: isize,
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

static HAAR_LO: [f64; 2] = [FRAC_1_SQRT_2, FRAC_1_SQRT_2];

/// Standard db4 scaling filter (8 taps, 4 vanishing moments), normalized to
/// sum sqrt(2). Validated by the perfect-reconstruction and Parseval
/// property tests below.
static DB4_LO: [f64; 8] = [
    0.23037781330885523,
    0.7148465705525415,
    0.6308807679295904,
    -0.02798376941698385,
    -0.18703481171888114,
    0.030841381835986965,
    0.032883011666982945,
    -0.010597401784997278,
];

/// bior2_2 spline pair: analysis lowpass sqrt(2)(-1/8, 1/4, 3/4, 1/4, -1/8),
/// synthesis lowpass sqrt(2)(1/4, 1/2, 1/4).
static BIOR22_ALO: [f64; 5] = [
    -SQRT_2 / 8.0,
    SQRT_2 / 4.0,
    3.0 * SQRT_2 / 4.0,
    SQRT_2 / 4.0,
    -SQRT_2 / 8.0,
];
static BIOR22_SLO: [f64; 3] = [SQRT_2 / 4.0, SQRT_2 / 2.0, SQRT_2 / 4.0];

/// Quadrature mirror: g(n) = (-1)^n h(L-1-n).
fn qmf(lo: &[f64]) -> Vec<f64> {
    (0..lo.len())
        .map(|n| {
            let v = lo[lo.len() - 1 - n];
            if n % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Alternating-sign dual: g(n) = (-1)^n dual(1 - n), support shifted so the
/// biorthogonality conditions hold at zero offset.
fn dual_hi(dual_lo: &[f64], dual_off: isize) -> (Vec<f64>, isize) {
    // n ranges so that 1 - n covers the dual support [dual_off, dual_off + len)
    let lo_n = 1 - (dual_off + dual_lo.len() as isize - 1);
    let taps = (0..dual_lo.len())
        .map(|i| {
            let n = lo_n + i as isize;
            let v = dual_lo[(1 - n - dual_off) as usize];
            if n.rem_euclid(2) == 0 {
                v
            } else {
                -v
            }
        })
        .collect();
    (taps, lo_n)
}

impl Basis {
    fn analysis(&self) -> FilterPair {
        match self {
            Basis::Haar => FilterPair {
                lo: &HAAR_LO,
                lo_off: 0,
                hi: qmf(&HAAR_LO),
                hi_off: 0,
            },
            Basis::Db4 => FilterPair {
                lo: &DB4_LO,
                lo_off: 0,
                hi: qmf(&DB4_LO),
                hi_off: 0,
            },
            Basis::Bior2_2 => {
                let (hi, hi_off) = dual_hi(&BIOR22_SLO, -1);
                FilterPair {
                    lo: &BIOR22_ALO,
                    lo_off: -2,
                    hi,
                    hi_off,
                }
            }
        }
    }

    fn synthesis(&self) -> FilterPair {
        match self {
            Basis::Haar | Basis::Db4 => self.analysis(),
            Basis::Bior2_2 => {
                let (hi, hi_off) = dual_hi(&BIOR22_ALO, -2);
                FilterPair {
                    lo: &BIOR22_SLO,
                    lo_off: -1,
                    hi,
                    hi_off,
                }
            }
        }
    }
}

/// The four half-resolution subbands of one DWT level.
#[derive(Debug, Clone, PartialEq)]
pub struct Subbands {
    pub ll: Tensor,
    pub lh: Tensor,
    pub hl: Tensor,
    pub hh: Tensor,
}

impl Subbands {
    pub fn zeros_like(t: &Tensor) -> Self {
        let (h, w, c) = (t.h() / 2, t.w() / 2, t.c());
        Subbands {
            ll: Tensor::zeros(h, w, c),
            lh: Tensor::zeros(h, w, c),
            hl: Tensor::zeros(h, w, c),
            hh: Tensor::zeros(h, w, c),
        }
    }

    pub fn energy(&self) -> f64 {
        self.ll.energy() + self.lh.energy() + self.hl.energy() + self.hh.energy()
    }
}

fn check_even(t: &Tensor) -> Result<()> {
    if t.h() % 2 != 0 || t.w() % 2 != 0 || t.h() == 0 || t.w() == 0 {
        return Err(Error::Dimension(format!(
            "DWT needs even spatial dims >= 2, got {}x{}",
            t.h(),
            t.w()
        )));
    }
    Ok(())
}

// Separable engine. Rows (along x) first, then columns (along y); gather for
// analysis, scatter for synthesis, always modulo the signal length. Gather
// and scatter with the same taps are exact transposes, which the fusion
// backward pass relies on.

fn gather_rows(t: &Tensor, taps: &[f64], off: isize) -> Tensor {
    let (h, w, c) = t.shape();
    let mut out = Tensor::zeros(h, w / 2, c);
    for y in 0..h {
        for k in 0..w / 2 {
            for (n, &f) in taps.iter().enumerate() {
                let x = (2 * k as isize + n as isize + off).rem_euclid(w as isize) as usize;
                let src = t.pixel(y, x);
                let dst = out.pixel_mut(y, k);
                for ch in 0..c {
                    dst[ch] += f * src[ch];
                }
            }
        }
    }
    out
}

fn scatter_rows(t: &Tensor, taps: &[f64], off: isize, out_w: usize, out: &mut Tensor) {
    let (h, w, c) = t.shape();
    debug_assert_eq!(out_w, 2 * w);
    for y in 0..h {
        for k in 0..w {
            for (n, &f) in taps.iter().enumerate() {
                let x = (2 * k as isize + n as isize + off).rem_euclid(out_w as isize) as usize;
                let src = t.pixel(y, k);
                let dst = out.pixel_mut(y, x);
                for ch in 0..c {
                    dst[ch] += f * src[ch];
                }
            }
        }
    }
}

fn gather_cols(t: &Tensor, taps: &[f64], off: isize) -> Tensor {
    let (h, w, c) = t.shape();
    let mut out = Tensor::zeros(h / 2, w, c);
    for k in 0..h / 2 {
        for (n, &f) in taps.iter().enumerate() {
            let y = (2 * k as isize + n as isize + off).rem_euclid(h as isize) as usize;
            for x in 0..w {
                let src = t.pixel(y, x);
                let dst = out.pixel_mut(k, x);
                for ch in 0..c {
                    dst[ch] += f * src[ch];
                }
            }
        }
    }
    out
}

fn scatter_cols(t: &Tensor, taps: &[f64], off: isize, out_h: usize, out: &mut Tensor) {
    let (h, w, c) = t.shape();
    debug_assert_eq!(out_h, 2 * h);
    for k in 0..h {
        for (n, &f) in taps.iter().enumerate() {
            let y = (2 * k as isize + n as isize + off).rem_euclid(out_h as isize) as usize;
            for x in 0..w {
                let src = t.pixel(k, x);
                let dst = out.pixel_mut(y, x);
                for ch in 0..c {
                    dst[ch] += f * src[ch];
                }
            }
        }
    }
}

fn dwt2d_separable(t: &Tensor, basis: Basis) -> Subbands {
    let f = basis.analysis();
    let row_lo = gather_rows(t, f.lo, f.lo_off);
    let row_hi = gather_rows(t, &f.hi, f.hi_off);
    Subbands {
        ll: gather_cols(&row_lo, f.lo, f.lo_off),
        lh: gather_cols(&row_lo, &f.hi, f.hi_off),
        hl: gather_cols(&row_hi, f.lo, f.lo_off),
        hh: gather_cols(&row_hi, &f.hi, f.hi_off),
    }
}

fn idwt2d_separable(sb: &Subbands, basis: Basis) -> Tensor {
    let f = basis.synthesis();
    let (hh2, w2, c) = sb.ll.shape();
    let (h, w) = (hh2 * 2, w2 * 2);
    let mut row_lo = Tensor::zeros(h, w2, c);
    scatter_cols(&sb.ll, f.lo, f.lo_off, h, &mut row_lo);
    scatter_cols(&sb.lh, &f.hi, f.hi_off, h, &mut row_lo);
    let mut row_hi = Tensor::zeros(h, w2, c);
    scatter_cols(&sb.hl, f.lo, f.lo_off, h, &mut row_hi);
    scatter_cols(&sb.hh, &f.hi, f.hi_off, h, &mut row_hi);
    let mut out = Tensor::zeros(h, w, c);
    scatter_rows(&row_lo, f.lo, f.lo_off, w, &mut out);
    scatter_rows(&row_hi, &f.hi, f.hi_off, w, &mut out);
    out
}

// Haar fast path: per 2x2 block (a b / c d),
//   ll = (a+b+c+d)/2   lh = (a+b-c-d)/2
//   hl = (a-b+c-d)/2   hh = (a-b-c+d)/2
// The block matrix is symmetric orthogonal, so it is its own inverse and
// its own adjoint.

fn haar_block_forward(t: &Tensor) -> Subbands {
    let mut sb = Subbands::zeros_like(t);
    let c = t.c();
    for y in 0..t.h() / 2 {
        for x in 0..t.w() / 2 {
            for ch in 0..c {
                let a = t.at(2 * y, 2 * x, ch);
                let b = t.at(2 * y, 2 * x + 1, ch);
                let cc = t.at(2 * y + 1, 2 * x, ch);
                let d = t.at(2 * y + 1, 2 * x + 1, ch);
                *sb.ll.at_mut(y, x, ch) = 0.5 * (a + b + cc + d);
                *sb.lh.at_mut(y, x, ch) = 0.5 * (a + b - cc - d);
                *sb.hl.at_mut(y, x, ch) = 0.5 * (a - b + cc - d);
                *sb.hh.at_mut(y, x, ch) = 0.5 * (a - b - cc + d);
            }
        }
    }
    sb
}

fn haar_block_inverse(sb: &Subbands) -> Tensor {
    let (h2, w2, c) = sb.ll.shape();
    let mut out = Tensor::zeros(h2 * 2, w2 * 2, c);
    for y in 0..h2 {
        for x in 0..w2 {
            for ch in 0..c {
                let ll = sb.ll.at(y, x, ch);
                let lh = sb.lh.at(y, x, ch);
                let hl = sb.hl.at(y, x, ch);
                let hh = sb.hh.at(y, x, ch);
                *out.at_mut(2 * y, 2 * x, ch) = 0.5 * (ll + lh + hl + hh);
                *out.at_mut(2 * y, 2 * x + 1, ch) = 0.5 * (ll + lh - hl - hh);
                *out.at_mut(2 * y + 1, 2 * x, ch) = 0.5 * (ll - lh + hl - hh);
                *out.at_mut(2 * y + 1, 2 * x + 1, ch) = 0.5 * (ll - lh - hl + hh);
            }
        }
    }
    out
}

/// One analysis level: (h, w, c) -> four (h/2, w/2, c) subbands.
pub fn dwt2d(t: &Tensor, basis: Basis) -> Result<Subbands> {
    check_even(t)?;
    Ok(match basis {
        Basis::Haar => haar_block_forward(t),
        _ => dwt2d_separable(t, basis),
    })
}

/// One synthesis level, the exact inverse of `dwt2d`.
pub fn idwt2d(sb: &Subbands, basis: Basis) -> Tensor {
    match basis {
        Basis::Haar => haar_block_inverse(sb),
        _ => idwt2d_separable(sb, basis),
    }
}

/// Transpose of the `dwt2d` linear map: subband cotangents back to an image
/// cotangent. Equal to `idwt2d` only for orthonormal bases.
pub fn dwt2d_adjoint(sb: &Subbands, basis: Basis) -> Tensor {
    match basis {
        Basis::Haar => haar_block_inverse(sb),
        _ => {
            let f = basis.analysis();
            let (h2, w2, c) = sb.ll.shape();
            let (h, w) = (h2 * 2, w2 * 2);
            let mut row_lo = Tensor::zeros(h, w2, c);
            scatter_cols(&sb.ll, f.lo, f.lo_off, h, &mut row_lo);
            scatter_cols(&sb.lh, &f.hi, f.hi_off, h, &mut row_lo);
            let mut row_hi = Tensor::zeros(h, w2, c);
            scatter_cols(&sb.hl, f.lo, f.lo_off, h, &mut row_hi);
            scatter_cols(&sb.hh, &f.hi, f.hi_off, h, &mut row_hi);
            let mut out = Tensor::zeros(h, w, c);
            scatter_rows(&row_lo, f.lo, f.lo_off, w, &mut out);
            scatter_rows(&row_hi, &f.hi, f.hi_off, w, &mut out);
            out
        }
    }
}

/// Transpose of the `idwt2d` linear map.
pub fn idwt2d_adjoint(t: &Tensor, basis: Basis) -> Result<Subbands> {
    check_even(t)?;
    Ok(match basis {
        Basis::Haar => haar_block_forward(t),
        _ => {
            let f = basis.synthesis();
            let row_lo = gather_rows(t, f.lo, f.lo_off);
            let row_hi = gather_rows(t, &f.hi, f.hi_off);
            Subbands {
                ll: gather_cols(&row_lo, f.lo, f.lo_off),
                lh: gather_cols(&row_lo, &f.hi, f.hi_off),
                hl: gather_cols(&row_hi, f.lo, f.lo_off),
                hh: gather_cols(&row_hi, &f.hi, f.hi_off),
            }
        }
    })
}

/// 2x2 box average, halving both spatial dims.
pub fn avgpool2d(t: &Tensor) -> Result<Tensor> {
    check_even(t)?;
    let mut out = Tensor::zeros(t.h() / 2, t.w() / 2, t.c());
    for y in 0..t.h() / 2 {
        for x in 0..t.w() / 2 {
            for ch in 0..t.c() {
                *out.at_mut(y, x, ch) = 0.25
                    * (t.at(2 * y, 2 * x, ch)
                        + t.at(2 * y, 2 * x + 1, ch)
                        + t.at(2 * y + 1, 2 * x, ch)
                        + t.at(2 * y + 1, 2 * x + 1, ch));
            }
        }
    }
    Ok(out)
}

/// Transpose of `avgpool2d`: spread each cotangent over its 2x2 block.
pub fn avgpool2d_adjoint(t: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(t.h() * 2, t.w() * 2, t.c());
    for y in 0..t.h() {
        for x in 0..t.w() {
            for ch in 0..t.c() {
                let v = 0.25 * t.at(y, x, ch);
                *out.at_mut(2 * y, 2 * x, ch) = v;
                *out.at_mut(2 * y, 2 * x + 1, ch) = v;
                *out.at_mut(2 * y + 1, 2 * x, ch) = v;
                *out.at_mut(2 * y + 1, 2 * x + 1, ch) = v;
            }
        }
    }
    out
}

/// Nearest-neighbor doubling used when inverting the pooled ablation path.
pub fn upsample2d(t: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(t.h() * 2, t.w() * 2, t.c());
    for y in 0..t.h() {
        for x in 0..t.w() {
            for ch in 0..t.c() {
                let v = t.at(y, x, ch);
                *out.at_mut(2 * y, 2 * x, ch) = v;
                *out.at_mut(2 * y, 2 * x + 1, ch) = v;
                *out.at_mut(2 * y + 1, 2 * x, ch) = v;
                *out.at_mut(2 * y + 1, 2 * x + 1, ch) = v;
            }
        }
    }
    out
}

/// Transpose of `upsample2d`.
pub fn upsample2d_adjoint(t: &Tensor) -> Result<Tensor> {
    check_even(t)?;
    let mut out = Tensor::zeros(t.h() / 2, t.w() / 2, t.c());
    for y in 0..t.h() / 2 {
        for x in 0..t.w() / 2 {
            for ch in 0..t.c() {
                *out.at_mut(y, x, ch) = t.at(2 * y, 2 * x, ch)
                    + t.at(2 * y, 2 * x + 1, ch)
                    + t.at(2 * y + 1, 2 * x, ch)
                    + t.at(2 * y + 1, 2 * x + 1, ch);
            }
        }
    }
    Ok(out)
}

pub const ALL_BASES: [Basis; 3] = [Basis::Haar, Basis::Db4, Basis::Bior2_2];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, h: usize, w: usize, c: usize) -> Tensor {
        Tensor::from_vec(h, w, c, (0..h * w * c).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    fn max_rel_err(a: &Tensor, b: &Tensor) -> f64 {
        let scale = a.data().iter().fold(1e-30_f64, |m, v| m.max(v.abs()));
        a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs() / scale)
            .fold(0.0, f64::max)
    }

    #[test]
    fn haar_block_values() {
        let t = Tensor::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        let sb = dwt2d(&t, Basis::Haar).unwrap();
        assert_eq!(sb.ll.data(), &[5.0]);
        assert_eq!(sb.lh.data(), &[-2.0]);
        assert_eq!(sb.hl.data(), &[-1.0]);
        assert_eq!(sb.hh.data(), &[0.0]);
    }

    #[test]
    fn haar_constant_image_concentrates_in_ll() {
        let t = Tensor::from_vec(4, 4, 1, vec![1.0; 16]);
        let sb = dwt2d(&t, Basis::Haar).unwrap();
        assert!(sb.ll.data().iter().all(|&v| (v - 2.0).abs() < 1e-15));
        assert_eq!(sb.lh.energy() + sb.hl.energy() + sb.hh.energy(), 0.0);
    }

    #[test]
    fn haar_block_path_matches_separable_engine() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (h, w) = (2 * rng.gen_range(1..9), 2 * rng.gen_range(1..9));
            let c = rng.gen_range(1..4);
            let t = random_tensor(&mut rng, h, w, c);
            let fast = dwt2d(&t, Basis::Haar).unwrap();
            let slow = dwt2d_separable(&t, Basis::Haar);
            for (f, s) in [
                (&fast.ll, &slow.ll),
                (&fast.lh, &slow.lh),
                (&fast.hl, &slow.hl),
                (&fast.hh, &slow.hh),
            ] {
                assert!(max_rel_err(f, s) < 1e-12);
            }
            let back_fast = idwt2d(&fast, Basis::Haar);
            let back_slow = idwt2d_separable(&slow, Basis::Haar);
            assert!(max_rel_err(&back_fast, &back_slow) < 1e-12);
        }
    }

    #[test]
    fn roundtrip_all_bases_small_and_odd_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for basis in ALL_BASES {
            for (h, w) in [(2, 2), (2, 6), (4, 4), (6, 10), (16, 16), (12, 2)] {
                let t = random_tensor(&mut rng, h, w, 2);
                let back = idwt2d(&dwt2d(&t, basis).unwrap(), basis);
                assert!(
                    max_rel_err(&t, &back) < 1e-10,
                    "{basis:?} {h}x{w}: {}",
                    max_rel_err(&t, &back)
                );
            }
        }
    }

    #[test]
    fn parseval_for_orthonormal_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for basis in [Basis::Haar, Basis::Db4] {
            for _ in 0..50 {
                let (h, w) = (2 * rng.gen_range(1..10), 2 * rng.gen_range(1..10));
                let t = random_tensor(&mut rng, h, w, 1);
                let sb = dwt2d(&t, basis).unwrap();
                let rel = (sb.energy() - t.energy()).abs() / t.energy();
                assert!(rel < 1e-9, "{basis:?}: {rel}");
            }
        }
    }

    #[test]
    fn odd_dims_rejected() {
        let t = Tensor::zeros(3, 4, 1);
        assert!(matches!(dwt2d(&t, Basis::Haar), Err(Error::Dimension(_))));
        assert!(matches!(avgpool2d(&t), Err(Error::Dimension(_))));
    }

    fn dot(a: &Tensor, b: &Tensor) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn adjoints_satisfy_inner_product_identity() {
        // <A x, y> == <x, A^T y> for analysis and synthesis of every basis.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for basis in ALL_BASES {
            for _ in 0..10 {
                let (h, w) = (2 * rng.gen_range(1..8), 2 * rng.gen_range(1..8));
                let x = random_tensor(&mut rng, h, w, 2);
                let cot = Subbands {
                    ll: random_tensor(&mut rng, h / 2, w / 2, 2),
                    lh: random_tensor(&mut rng, h / 2, w / 2, 2),
                    hl: random_tensor(&mut rng, h / 2, w / 2, 2),
                    hh: random_tensor(&mut rng, h / 2, w / 2, 2),
                };
                let fwd = dwt2d(&x, basis).unwrap();
                let lhs = dot(&fwd.ll, &cot.ll) + dot(&fwd.lh, &cot.lh) + dot(&fwd.hl, &cot.hl) + dot(&fwd.hh, &cot.hh);
                let rhs = dot(&x, &dwt2d_adjoint(&cot, basis));
                assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{basis:?} dwt adjoint");

                let syn = idwt2d(&cot, basis);
                let lhs2 = dot(&syn, &x);
                let adj = idwt2d_adjoint(&x, basis).unwrap();
                let rhs2 = dot(&cot.ll, &adj.ll) + dot(&cot.lh, &adj.lh) + dot(&cot.hl, &adj.hl) + dot(&cot.hh, &adj.hh);
                assert!((lhs2 - rhs2).abs() < 1e-10 * lhs2.abs().max(1.0), "{basis:?} idwt adjoint");
            }
        }
    }

    #[test]
    fn avgpool_and_upsample_behave() {
        let t = Tensor::from_vec(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(avgpool2d(&t).unwrap().data(), &[2.5]);

        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random_tensor(&mut rng, 6, 4, 3);
        let y = random_tensor(&mut rng, 3, 2, 3);
        let lhs = dot(&avgpool2d(&x).unwrap(), &y);
        let rhs = dot(&x, &avgpool2d_adjoint(&y));
        assert!((lhs - rhs).abs() < 1e-12);
        let lhs2 = dot(&upsample2d(&y), &x);
        let rhs2 = dot(&y, &upsample2d_adjoint(&x).unwrap());
        assert!((lhs2 - rhs2).abs() < 1e-12);
    }
}
