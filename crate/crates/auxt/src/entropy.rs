//! Quantization, the additive-noise training relaxation, and the factorized
//! per-channel Gaussian rate model.
//!
//! The model prices a symbol v against channel parameters (mu, sigma) by the
//! probability mass of the unit interval around it,
//!
//!   p = Phi((v - mu + 1/2)/sigma) - Phi((v - mu - 1/2)/sigma),
//!
//! and charges -log2 p bits. All CDF work happens in log space so that
//! symbols hundreds of sigmas out (routine for freshly initialized latents)
//! still produce finite bits and finite gradients: Phi comes from erf/erfc
//! below |z| = 36 and from the standard tail series phi(z)/z (1 - z^-2 +
//! 3 z^-4 - 15 z^-6) beyond, where erfc has already underflowed.

use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SIGMA_MIN: f64 = 1e-3;
/// Upper clamp: past this the interval endpoints (v±1/2-mu)/sigma would sit
/// closer than one ulp apart and the mass difference would vanish.
pub const SIGMA_MAX: f64 = 1e6;
/// Quantized symbols must fit a signed 16-bit alphabet; exceeding it means
/// training diverged rather than anything a clamp should hide.
pub const SYMBOL_BOUND: i32 = 1 << 15;

const LN_SQRT_2PI: f64 = 0.918938533204672741780329736406;
/// Switch from erfc to the asymptotic tail series past this |z|.
const TAIL_SPLIT: f64 = 36.0;

/// Per-channel mean and log standard deviation, shared across space.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl GaussianModel {
    pub fn new(channels: usize) -> GaussianModel {
        GaussianModel {
            mu: vec![0.0; channels],
            log_sigma: vec![0.0; channels],
        }
    }

    pub fn channels(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self, ch: usize) -> f64 {
        self.log_sigma[ch].exp().clamp(SIGMA_MIN, SIGMA_MAX)
    }

    pub fn zeros_like(&self) -> GaussianModel {
        GaussianModel::new(self.channels())
    }
}

/// log Phi_c(z) = log P(Z > z), accurate over the whole real line.
fn log_phic(z: f64) -> f64 {
    if z > TAIL_SPLIT {
        // Phi_c(z) ~ phi(z)/z (1 - z^-2 + 3 z^-4 - 15 z^-6)
        let zi = 1.0 / (z * z);
        -0.5 * z * z - LN_SQRT_2PI - z.ln() + (-zi * (1.0 - zi * (3.0 - 15.0 * zi))).ln_1p()
    } else if z < -TAIL_SPLIT {
        // Phi_c(z) = 1 - Phi_c(-z); the complement is far below 1 ulp.
        (-(-0.5 * z * z - LN_SQRT_2PI - (-z).ln()).exp()).ln_1p()
    } else {
        (0.5 * libm::erfc(z / std::f64::consts::SQRT_2)).ln()
    }
}

/// ln(1 - e^d) for d < 0 without cancellation. A diverging model can push
/// both interval endpoints so far out that their log-probabilities collide
/// (d = 0, zero mass) or both underflow to -inf (d = NaN); those come back
/// as -inf / NaN so the caller's non-finite checks see them instead of a
/// panic here.
fn ln_1m_exp(d: f64) -> f64 {
    if !(d < 0.0) {
        return if d == 0.0 { f64::NEG_INFINITY } else { f64::NAN };
    }
    if d < -std::f64::consts::LN_2 {
        (-d.exp()).ln_1p()
    } else {
        (-d.exp_m1()).ln()
    }
}

fn log_phi(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Bits charged to one value, plus d(bits)/dv, d(bits)/dmu, d(bits)/dlog_sigma.
pub fn symbol_bits_and_grads(v: f64, mu: f64, log_sigma: f64) -> (f64, f64, f64, f64) {
    let sigma_raw = log_sigma.exp();
    let clamped = !(SIGMA_MIN..=SIGMA_MAX).contains(&sigma_raw);
    let sigma = sigma_raw.clamp(SIGMA_MIN, SIGMA_MAX);
    let l = (v - mu - 0.5) / sigma;
    let u = (v - mu + 0.5) / sigma;
    // p = Phi(u) - Phi(l) = Phi_c(a) - Phi_c(b) on the flank where both
    // complements are small; flip signs so a + b >= 0.
    let (a, b) = if l + u >= 0.0 { (l, u) } else { (-u, -l) };
    let log_pa = log_phic(a);
    let log_pb = log_phic(b);
    let log_p = log_pa + ln_1m_exp(log_pb - log_pa);
    let bits = -log_p / std::f64::consts::LN_2;

    // Ratios A = phi(l)/p and B = phi(u)/p stay finite arbitrarily far out.
    let ra = (log_phi(l) - log_p).exp();
    let rb = (log_phi(u) - log_p).exp();
    let dbits_dv = -(rb - ra) / (sigma * std::f64::consts::LN_2);
    let dbits_dmu = -dbits_dv;
    let dbits_dsigma = (u * rb - l * ra) / (sigma * std::f64::consts::LN_2);
    let dbits_dlog = if clamped { 0.0 } else { dbits_dsigma * sigma_raw };
    (bits, dbits_dv, dbits_dmu, dbits_dlog)
}

/// Whether the rate is being taken of noisy training values or of hard
/// quantized symbols; the interval formula is identical for both.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    Relaxed,
    Discrete,
}

/// Total bits for a latent tensor under the factorized model.
pub fn rate_bits(t: &Tensor, model: &GaussianModel, mode: RateMode) -> f64 {
    assert_eq!(t.c(), model.channels(), "rate model channels");
    if mode == RateMode::Discrete {
        debug_assert!(t.data().iter().all(|v| v.fract() == 0.0));
    }
    let mut total = 0.0;
    for ch in 0..t.c() {
        let mu = model.mu[ch];
        let ls = model.log_sigma[ch];
        for y in 0..t.h() {
            for x in 0..t.w() {
                total += symbol_bits_and_grads(t.at(y, x, ch), mu, ls).0;
            }
        }
    }
    total
}

/// Backward of `rate_bits`: with upstream scale `g` (d loss / d bits),
/// accumulates value cotangents into `g_t` and model cotangents into
/// `g_model`.
pub fn rate_backward(
    t: &Tensor,
    model: &GaussianModel,
    g: f64,
    g_t: &mut Tensor,
    g_model: &mut GaussianModel,
) {
    for ch in 0..t.c() {
        let mu = model.mu[ch];
        let ls = model.log_sigma[ch];
        for y in 0..t.h() {
            for x in 0..t.w() {
                let (_, dv, dmu, dlog) = symbol_bits_and_grads(t.at(y, x, ch), mu, ls);
                *g_t.at_mut(y, x, ch) += g * dv;
                g_model.mu[ch] += g * dmu;
                g_model.log_sigma[ch] += g * dlog;
            }
        }
    }
}

/// Integer symbols of one quantized latent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentCode {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub symbols: Vec<i32>,
}

impl LatentCode {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(
            self.h,
            self.w,
            self.c,
            self.symbols.iter().map(|&s| s as f64).collect(),
        )
    }
}

/// Uniform quantization with step 1, rounding halves away from zero.
pub fn quantize(y: &Tensor) -> Result<LatentCode> {
    let mut symbols = Vec::with_capacity(y.data().len());
    for (i, &v) in y.data().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::LatentOverflow { value: v, index: i });
        }
        let r = v.round();
        if r.abs() >= SYMBOL_BOUND as f64 {
            return Err(Error::LatentOverflow { value: v, index: i });
        }
        symbols.push(r as i32);
    }
    Ok(LatentCode {
        h: y.h(),
        w: y.w(),
        c: y.c(),
        symbols,
    })
}

/// Training relaxation: add i.i.d. uniform noise on [-1/2, 1/2).
pub fn noise_relax(y: &Tensor, rng: &mut impl Rng) -> Tensor {
    let mut out = y.clone();
    for v in out.data_mut() {
        *v += rng.gen::<f64>() - 0.5;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Adaptive-free Simpson quadrature of the standard normal density —
    /// the independent oracle for interval probabilities at moderate z.
    fn simpson_interval(l: f64, u: f64) -> f64 {
        let n = 20001; // odd sample count, even panel count
        let hstep = (u - l) / (n - 1) as f64;
        let pdf = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mut acc = pdf(l) + pdf(u);
        for i in 1..n - 1 {
            let z = l + hstep * i as f64;
            acc += pdf(z) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * hstep / 3.0
    }

    #[test]
    fn centered_unit_interval_probability_and_bits() {
        let (bits, _, _, _) = symbol_bits_and_grads(0.0, 0.0, 0.0);
        let p = (-bits * std::f64::consts::LN_2).exp();
        assert!((p - 0.3829249225480261).abs() < 1e-12, "p = {p}");
        assert!((bits - 1.3848665342909887).abs() < 1e-12, "bits = {bits}");
        assert!((p - simpson_interval(-0.5, 0.5)).abs() < 1e-9);
    }

    #[test]
    fn matches_quadrature_over_a_grid() {
        for &dv in &[0.0, 0.7, 2.0, 5.5, 9.0] {
            for &ls in &[-1.0_f64, 0.0, 1.5] {
                let sigma = ls.exp();
                let (bits, _, _, _) = symbol_bits_and_grads(dv, 0.0, ls);
                let p_oracle = simpson_interval((dv - 0.5) / sigma, (dv + 0.5) / sigma);
                let bits_oracle = -p_oracle.log2();
                assert!(
                    (bits - bits_oracle).abs() < 1e-6 * bits_oracle.max(1.0),
                    "dv={dv} ls={ls}: {bits} vs {bits_oracle}"
                );
            }
        }
    }

    #[test]
    fn tail_branches_agree_at_the_split() {
        // The erfc branch and the asymptotic series overlap around z = 36.
        for z in [30.0, 33.0, 35.9] {
            let exact = (0.5 * libm::erfc(z / std::f64::consts::SQRT_2)).ln();
            let zi = 1.0 / (z * z);
            let series = -0.5 * z * z
                - LN_SQRT_2PI
                - z.ln()
                + (-zi * (1.0 - zi * (3.0 - 15.0 * zi))).ln_1p();
            assert!(
                (exact - series).abs() < 1e-9 * exact.abs(),
                "z={z}: {exact} vs {series}"
            );
        }
    }

    #[test]
    fn far_tail_bits_are_finite_and_huge() {
        let (bits, dv, dmu, dls) = symbol_bits_and_grads(400.0, 0.0, 0.0);
        assert!(bits.is_finite() && bits > 100_000.0, "bits = {bits}");
        assert!(dv.is_finite() && dmu.is_finite() && dls.is_finite());
        // Asymptotically bits ~ l^2 / (2 ln 2); check within 1%.
        let approx = 399.5_f64.powi(2) / (2.0 * std::f64::consts::LN_2);
        assert!((bits - approx).abs() / approx < 0.01);
        // Moving toward the mean must reduce bits steeply.
        assert!(dv > 100.0, "dv = {dv}");
    }

    #[test]
    fn near_deterministic_symbol_costs_almost_nothing() {
        let (bits, _, _, _) = symbol_bits_and_grads(3.0, 3.0, SIGMA_MIN.ln() - 2.0);
        assert!(bits >= 0.0 && bits < 1e-9, "bits = {bits}");
    }

    #[test]
    fn rate_is_monotone_in_sigma_at_the_mean() {
        let mut prev = -1.0;
        for i in 0..30 {
            let ls = -4.0 + 0.3 * i as f64;
            let (bits, _, _, _) = symbol_bits_and_grads(1.0, 1.0, ls);
            assert!(bits >= prev, "ls={ls}");
            prev = bits;
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for &(v, mu, ls) in &[
            (0.3, 0.0, 0.0),
            (2.0, -1.0, 0.5),
            (8.0, 0.0, 0.0),   // 8 sigma out
            (-6.5, 1.0, -0.4),
            (120.0, 2.0, 1.3), // deep but not extreme tail
        ] {
            let (_, dv, dmu, dls) = symbol_bits_and_grads(v, mu, ls);
            let fd_v = (symbol_bits_and_grads(v + h, mu, ls).0
                - symbol_bits_and_grads(v - h, mu, ls).0)
                / (2.0 * h);
            let fd_mu = (symbol_bits_and_grads(v, mu + h, ls).0
                - symbol_bits_and_grads(v, mu - h, ls).0)
                / (2.0 * h);
            let fd_ls = (symbol_bits_and_grads(v, mu, ls + h).0
                - symbol_bits_and_grads(v, mu, ls - h).0)
                / (2.0 * h);
            assert!((fd_v - dv).abs() < 1e-4 * fd_v.abs().max(1.0), "v at {v}");
            assert!((fd_mu - dmu).abs() < 1e-4 * fd_mu.abs().max(1.0), "mu at {v}");
            assert!((fd_ls - dls).abs() < 1e-4 * fd_ls.abs().max(1.0), "ls at {v}");
        }
    }

    #[test]
    fn rate_bits_is_additive_over_symbols() {
        let model = GaussianModel {
            mu: vec![0.5, -1.0],
            log_sigma: vec![0.3, -0.2],
        };
        let t = Tensor::from_vec(2, 1, 2, vec![1.0, 0.0, -2.0, 3.0]);
        let total = rate_bits(&t, &model, RateMode::Discrete);
        let mut by_hand = 0.0;
        for y in 0..2 {
            for ch in 0..2 {
                by_hand +=
                    symbol_bits_and_grads(t.at(y, 0, ch), model.mu[ch], model.log_sigma[ch]).0;
            }
        }
        assert!((total - by_hand).abs() < 1e-12);
        assert!(total > 0.0);
    }

    #[test]
    fn quantize_rounds_half_away_from_zero() {
        let y = Tensor::from_vec(1, 6, 1, vec![0.4, -0.4, 0.5, -0.5, 3.0, -2.5]);
        let code = quantize(&y).unwrap();
        assert_eq!(code.symbols, vec![0, 0, 1, -1, 3, -3]);
    }

    #[test]
    fn quantize_rejects_overflow_and_nonfinite() {
        let y = Tensor::from_vec(1, 1, 1, vec![40000.0]);
        assert!(matches!(quantize(&y), Err(Error::LatentOverflow { .. })));
        let y = Tensor::from_vec(1, 1, 1, vec![f64::NAN]);
        assert!(matches!(quantize(&y), Err(Error::LatentOverflow { .. })));
    }

    #[test]
    fn noise_is_bounded_seeded_and_centered() {
        let y = Tensor::zeros(100, 100, 1);
        let a = noise_relax(&y, &mut ChaCha8Rng::seed_from_u64(3));
        let b = noise_relax(&y, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a.data(), b.data());
        assert!(a.data().iter().all(|v| (-0.5..0.5).contains(v)));
        let n = a.data().len() as f64;
        let mean = a.data().iter().sum::<f64>() / n;
        // sd of the mean is (1/sqrt(12))/sqrt(n); allow 4 of those
        assert!(mean.abs() < 4.0 / (12.0_f64.sqrt() * n.sqrt()), "mean {mean}");
    }
}
