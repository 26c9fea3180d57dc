//! Diagnostics: latent energy compaction, branch energy split, the
//! end-to-end linear operator of a linear configuration, channel
//! decorrelation histograms, and BD-rate between two rate-distortion
//! curves, plus the CSV renderings of all of the above.

use crate::error::{Error, Result};
use crate::mainbranch::Activation;
use crate::mat::Matrix;
use crate::model::{
    decode_image, encode_image, run_analysis, ModelConfig, ModelParams,
};
use crate::tensor::{pad_reflect, psnr, Tensor};
use crate::training::LogRow;

// ---------------------------------------------------------------------------
// Energy compaction
// ---------------------------------------------------------------------------

/// Squared-energy distribution over latent channels, averaged over a corpus.
#[derive(Debug, Clone)]
pub struct EnergyReport {
    /// Mean (over images) of the per-channel squared L2 norm of the latent.
    pub sq: Vec<f64>,
    /// Channel indices sorted by descending squared energy.
    pub order: Vec<usize>,
}

impl EnergyReport {
    pub fn from_channel_sq(sq: Vec<f64>) -> EnergyReport {
        let mut order: Vec<usize> = (0..sq.len()).collect();
        order.sort_by(|&a, &b| sq[b].total_cmp(&sq[a]));
        EnergyReport { sq, order }
    }

    pub fn total(&self) -> f64 {
        self.sq.iter().sum()
    }

    pub fn share(&self, ch: usize) -> f64 {
        let t = self.total();
        if t > 0.0 {
            self.sq[ch] / t
        } else {
            0.0
        }
    }

    /// Share of total energy in the top `max(1, floor(f * n))` channels.
    pub fn top_fraction_ratio(&self, f: f64) -> f64 {
        let k = ((f * self.sq.len() as f64).floor() as usize).max(1);
        let t = self.total();
        if t <= 0.0 {
            return 0.0;
        }
        self.order
            .iter()
            .take(k)
            .map(|&c| self.sq[c])
            .sum::<f64>()
            / t
    }

    /// Energy shares of `n_groups` equal-count channel groups, strongest
    /// first. When channels do not divide evenly the remainder joins the
    /// last (weakest) group.
    pub fn group_shares(&self, n_groups: usize) -> Vec<f64> {
        assert!(n_groups >= 1);
        let n = self.sq.len();
        let base = n / n_groups;
        let t = self.total();
        let mut shares = Vec::with_capacity(n_groups);
        let mut taken = 0;
        for g in 0..n_groups {
            let size = if g + 1 == n_groups { n - taken } else { base };
            let e: f64 = self.order[taken..taken + size]
                .iter()
                .map(|&c| self.sq[c])
                .sum();
            shares.push(if t > 0.0 { e / t } else { 0.0 });
            taken += size;
        }
        shares
    }
}

/// Energy report of the (un-quantized) latent over a corpus.
pub fn latent_energy_report(
    params: &ModelParams,
    cfg: &ModelConfig,
    images: &[(String, Tensor)],
) -> Result<EnergyReport> {
    if images.is_empty() {
        return Err(Error::Config("energy report needs at least one image".into()));
    }
    let c = cfg.latent_channels();
    let mut sq = vec![0.0; c];
    for (_, img) in images {
        let (padded, _) = pad_reflect(img, cfg.factor());
        let y = run_analysis(params, cfg, &padded).y;
        for px in 0..y.h() * y.w() {
            let row = &y.data()[px * c..(px + 1) * c];
            for (ch, &v) in row.iter().enumerate() {
                sq[ch] += v * v;
            }
        }
    }
    for v in &mut sq {
        *v /= images.len() as f64;
    }
    Ok(EnergyReport::from_channel_sq(sq))
}

// ---------------------------------------------------------------------------
// Branch energies
// ---------------------------------------------------------------------------

/// How the latent's energy splits between the two branches that sum into
/// it. `cross` is twice the inner product, so aux + main + cross = latent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEnergy {
    pub aux: f64,
    pub main: f64,
    pub latent: f64,
    pub cross: f64,
}

pub fn branch_energy(
    params: &ModelParams,
    cfg: &ModelConfig,
    images: &[(String, Tensor)],
) -> Result<BranchEnergy> {
    if images.is_empty() {
        return Err(Error::Config("branch energy needs at least one image".into()));
    }
    let (mut aux, mut main, mut latent) = (0.0, 0.0, 0.0);
    for (_, img) in images {
        let (padded, _) = pad_reflect(img, cfg.factor());
        let tr = run_analysis(params, cfg, &padded);
        latent += tr.y.energy();
        if let Some(pass) = &tr.aux {
            let q = pass.outputs.last().expect("at least one stage");
            aux += q.energy();
            let mut f_only = tr.y.clone();
            for (fv, &qv) in f_only.data_mut().iter_mut().zip(q.data()) {
                *fv -= qv;
            }
            main += f_only.energy();
        } else {
            main += tr.y.energy();
        }
    }
    let n = images.len() as f64;
    let (aux, main, latent) = (aux / n, main / n, latent / n);
    Ok(BranchEnergy {
        aux,
        main,
        latent,
        cross: latent - aux - main,
    })
}

// ---------------------------------------------------------------------------
// Effective linear operator
// ---------------------------------------------------------------------------

/// The whole analysis transform of a linear configuration collapsed to one
/// affine map on a canonical patch: `latent = matrix * vec(patch) + offset`.
/// Rows are latent dimensions, columns follow the tensor's (y, x, channel)
/// raster order.
pub struct EffectiveOperator {
    pub matrix: Matrix,
    pub offset: Vec<f64>,
    /// Side length of the probed square patch (the downsampling factor).
    pub patch: usize,
    pub channels: usize,
}

pub fn effective_operator(params: &ModelParams, cfg: &ModelConfig) -> Result<EffectiveOperator> {
    if cfg.activation != Activation::None || cfg.aux_relu {
        return Err(Error::Config(
            "model has nonlinearities; no single linear operator exists".into(),
        ));
    }
    let f = cfg.factor();
    let n_in = f * f * cfg.channels;
    let d = cfg.latent_channels();
    let probe = |t: &Tensor| -> Vec<f64> {
        let y = run_analysis(params, cfg, t).y;
        debug_assert_eq!(y.shape(), (1, 1, d));
        y.data().to_vec()
    };
    let offset = probe(&Tensor::zeros(f, f, cfg.channels));
    let mut matrix = Matrix::zeros(d, n_in);
    for j in 0..n_in {
        let mut impulse = Tensor::zeros(f, f, cfg.channels);
        impulse.data_mut()[j] = 1.0;
        let y = probe(&impulse);
        for (i, (v, o)) in y.iter().zip(&offset).enumerate() {
            *matrix.at_mut(i, j) = v - o;
        }
    }
    Ok(EffectiveOperator {
        matrix,
        offset,
        patch: f,
        channels: cfg.channels,
    })
}

// ---------------------------------------------------------------------------
// Pairwise row similarity
// ---------------------------------------------------------------------------

/// Histogram of |cosine| over all pairs of nonzero rows: 50 uniform bins on
/// [0, 1], with 1.0 clamped into the top bin.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityHistogram {
    pub counts: Vec<u64>,
    pub pairs: u64,
    pub zero_rows: usize,
    pub mean_abs_cos: f64,
}

pub const SIMILARITY_BINS: usize = 50;

pub fn pairwise_similarity(m: &Matrix) -> SimilarityHistogram {
    let norms: Vec<f64> = (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let live: Vec<usize> = (0..m.rows()).filter(|&i| norms[i] > 0.0).collect();
    let zero_rows = m.rows() - live.len();
    let mut counts = vec![0u64; SIMILARITY_BINS];
    let mut pairs = 0u64;
    let mut acc = 0.0;
    for (a, &i) in live.iter().enumerate() {
        for &j in &live[a + 1..] {
            let dot: f64 = m
                .row(i)
                .iter()
                .zip(m.row(j))
                .map(|(x, y)| x * y)
                .sum();
            let cos = (dot / (norms[i] * norms[j])).abs().min(1.0);
            let bin = ((cos * SIMILARITY_BINS as f64) as usize).min(SIMILARITY_BINS - 1);
            counts[bin] += 1;
            pairs += 1;
            acc += cos;
        }
    }
    SimilarityHistogram {
        counts,
        pairs,
        zero_rows,
        mean_abs_cos: if pairs > 0 { acc / pairs as f64 } else { 0.0 },
    }
}

// ---------------------------------------------------------------------------
// BD-rate
// ---------------------------------------------------------------------------

/// Natural cubic spline through strictly increasing x.
pub struct CubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    y2: Vec<f64>,
}

impl CubicSpline {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> CubicSpline {
        let n = xs.len();
        assert!(n >= 2 && xs.windows(2).all(|w| w[1] > w[0]));
        // Solve the tridiagonal system for second derivatives with natural
        // (zero-curvature) end conditions.
        let mut y2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (xs[i] - xs[i - 1]) / (xs[i + 1] - xs[i - 1]);
            let p = sig * y2[i - 1] + 2.0;
            y2[i] = (sig - 1.0) / p;
            let d = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
                - (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1]);
            u[i] = (6.0 * d / (xs[i + 1] - xs[i - 1]) - sig * u[i - 1]) / p;
        }
        for i in (0..n - 1).rev() {
            y2[i] = y2[i] * y2[i + 1] + u[i];
        }
        CubicSpline { xs, ys, y2 }
    }

    fn segment(&self, x: f64) -> usize {
        // rightmost segment whose left knot is <= x, clamped to valid range
        match self.xs.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.xs.len() - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let h = self.xs[i + 1] - self.xs[i];
        let a = (self.xs[i + 1] - x) / h;
        let b = (x - self.xs[i]) / h;
        a * self.ys[i]
            + b * self.ys[i + 1]
            + ((a * a * a - a) * self.y2[i] + (b * b * b - b) * self.y2[i + 1]) * h * h / 6.0
    }

    /// Exact integral over [lo, hi] (clamped to the knot range outside of
    /// which the spline is not defined).
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        assert!(hi >= lo);
        let lo = lo.max(self.xs[0]);
        let hi = hi.min(*self.xs.last().unwrap());
        let mut total = 0.0;
        let mut a = lo;
        while a < hi {
            let i = self.segment(a);
            let b = self.xs[i + 1].min(hi);
            total += self.segment_integral(i, a, b);
            a = b;
        }
        total
    }

    fn segment_integral(&self, i: usize, from: f64, to: f64) -> f64 {
        // antiderivative of the cubic form used in eval
        let h = self.xs[i + 1] - self.xs[i];
        let prim = |x: f64| {
            let a = (self.xs[i + 1] - x) / h;
            let b = (x - self.xs[i]) / h;
            // d(a)/dx = -1/h, d(b)/dx = 1/h
            h * (-a * a / 2.0 * self.ys[i] + b * b / 2.0 * self.ys[i + 1])
                + h * h * h / 6.0
                    * (-(a * a * a * a / 4.0 - a * a / 2.0) * self.y2[i]
                        + (b * b * b * b / 4.0 - b * b / 2.0) * self.y2[i + 1])
        };
        prim(to) - prim(from)
    }
}

/// Parse an RD curve file: header `bpp,psnr_db`, one point per line.
pub fn parse_rd_csv(body: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = body.lines();
    match lines.next().map(str::trim) {
        Some("bpp,psnr_db") => {}
        _ => {
            return Err(Error::Format(
                "rd curve: first line must be 'bpp,psnr_db'".into(),
            ))
        }
    }
    let mut pts = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!("rd curve line {}: expected two fields", i + 2))
        })?;
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|e| Error::Format(format!("rd curve line {}: {e}", i + 2)))
        };
        pts.push((parse(a)?, parse(b)?));
    }
    Ok(pts)
}

pub fn rd_csv(points: &[(f64, f64)]) -> String {
    let mut s = String::from("bpp,psnr_db\n");
    for (bpp, q) in points {
        s.push_str(&format!("{bpp:.6},{q:.4}\n"));
    }
    s
}

/// Average log-rate difference of `test` against `reference` over their
/// common quality range, as a signed percent. Negative means `test` spends
/// fewer bits for the same quality. Both curves need at least four points.
pub fn bd_rate_percent(reference: &[(f64, f64)], test: &[(f64, f64)]) -> Result<f64> {
    let prep = |pts: &[(f64, f64)], which: &str| -> Result<(Vec<f64>, Vec<f64>)> {
        if pts.len() < 4 {
            return Err(Error::Usage(format!(
                "{which} curve has {} points; at least 4 are needed",
                pts.len()
            )));
        }
        let mut p = pts.to_vec();
        p.sort_by(|a, b| a.1.total_cmp(&b.1));
        for w in p.windows(2) {
            if w[1].1 <= w[0].1 {
                return Err(Error::Usage(format!(
                    "{which} curve has duplicate quality {:.4}",
                    w[0].1
                )));
            }
        }
        if p.iter().any(|&(bpp, _)| !(bpp > 0.0)) {
            return Err(Error::Usage(format!("{which} curve has non-positive bpp")));
        }
        Ok(p.into_iter().map(|(bpp, q)| (q, bpp.log10())).unzip())
    };
    let (qr, rr) = prep(reference, "reference")?;
    let (qt, rt) = prep(test, "test")?;
    let lo = qr[0].max(qt[0]);
    let hi = qr.last().unwrap().min(*qt.last().unwrap());
    if hi <= lo {
        return Err(Error::Usage(
            "curves share no quality range; cannot integrate".into(),
        ));
    }
    let sr = CubicSpline::new(qr, rr);
    let st = CubicSpline::new(qt, rt);
    let delta = (st.integral(lo, hi) - sr.integral(lo, hi)) / (hi - lo);
    let mut pct = (10f64.powf(delta) - 1.0) * 100.0;
    if pct == 0.0 {
        pct = 0.0; // squash -0.0 so formatting never prints "-0.00%"
    }
    Ok(pct)
}

pub fn format_bd(percent: f64) -> String {
    format!("{percent:+.2}%")
}

// ---------------------------------------------------------------------------
// Per-image compression metrics
// ---------------------------------------------------------------------------

/// Compress and decompress each image through the real byte pipeline.
/// Reported bpp counts the whole file (header included) against original
/// pixels.
pub fn eval_images(
    params: &ModelParams,
    cfg: &ModelConfig,
    images: &[(String, Tensor)],
) -> Result<Vec<(String, f64, f64)>> {
    let mut rows = Vec::with_capacity(images.len());
    for (name, img) in images {
        let (bytes, stats) = encode_image(params, cfg, img)?;
        let recon = decode_image(params, cfg, &bytes)?;
        rows.push((name.clone(), stats.file_bpp(), psnr(&recon, img)?));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// CSV renderings
// ---------------------------------------------------------------------------

pub fn energies_csv(r: &EnergyReport) -> String {
    let mut s = String::from("channel,l2_norm,sq_energy,share\n");
    for &ch in &r.order {
        s.push_str(&format!(
            "{ch},{:.6},{:.6},{:.6}\n",
            r.sq[ch].sqrt(),
            r.sq[ch],
            r.share(ch)
        ));
    }
    s
}

pub fn groups_csv(r: &EnergyReport) -> String {
    let mut s = String::from("group,share\n");
    for (g, share) in r.group_shares(10).iter().enumerate() {
        s.push_str(&format!("{},{share:.6}\n", g + 1));
    }
    s
}

pub fn branch_csv(b: &BranchEnergy) -> String {
    format!(
        "aux,main,latent,cross\n{:.6},{:.6},{:.6},{:.6}\n",
        b.aux, b.main, b.latent, b.cross
    )
}

pub fn similarity_csv(h: &SimilarityHistogram) -> String {
    let mut s = String::from("bin_lo,bin_hi,count,frequency\n");
    let w = 1.0 / SIMILARITY_BINS as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        let freq = if h.pairs > 0 {
            c as f64 / h.pairs as f64
        } else {
            0.0
        };
        s.push_str(&format!(
            "{:.2},{:.2},{c},{freq:.6}\n",
            i as f64 * w,
            (i + 1) as f64 * w
        ));
    }
    s
}

pub fn perimage_csv(rows: &[(String, f64, f64)]) -> String {
    let mut s = String::from("image,bpp,psnr_db\n");
    for (name, bpp, q) in rows {
        s.push_str(&format!("{name},{bpp:.6},{q:.4}\n"));
    }
    if !rows.is_empty() {
        let n = rows.len() as f64;
        let mb = rows.iter().map(|r| r.1).sum::<f64>() / n;
        let mq = rows.iter().map(|r| r.2).sum::<f64>() / n;
        s.push_str(&format!("mean,{mb:.6},{mq:.4}\n"));
    }
    s
}

pub fn evolution_csv(rows: &[LogRow]) -> String {
    let mut s = String::from("iter,top10_ratio,aux_energy,main_energy\n");
    for r in rows {
        s.push_str(&format!(
            "{},{:.6},{:.6},{:.6}\n",
            r.iter, r.top10_ratio, r.aux_energy, r.main_energy
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_model, Fusion, Placement};
    use crate::wavelet::Basis;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> ModelConfig {
        ModelConfig {
            channels: 1,
            stages: 2,
            kernel_size: 3,
            fusion: Fusion::ConcatAdd,
            placement: Placement::Both,
            basis: Basis::Haar,
            pool: false,
            scale: true,
            aux_relu: false,
            activation: Activation::None,
            tied_olp: true,
        }
    }

    fn random_image(h: usize, w: usize, rng: &mut ChaCha8Rng) -> Tensor {
        let data = (0..h * w).map(|_| rng.gen_range(0.0..1.0)).collect();
        Tensor::from_vec(h, w, 1, data)
    }

    #[test]
    fn energy_report_orders_and_groups() {
        // 16 channels with energies 16,15,...,1
        let sq: Vec<f64> = (1..=16).rev().map(|v| v as f64).collect();
        let r = EnergyReport::from_channel_sq(sq);
        assert_eq!(r.order[0], 0);
        assert_eq!(r.order[15], 15);
        let total = 136.0;
        assert!((r.total() - total).abs() < 1e-12);
        assert!((r.top_fraction_ratio(0.1) - 16.0 / total).abs() < 1e-12);
        assert!((r.top_fraction_ratio(1.0) - 1.0).abs() < 1e-12);

        let g = r.group_shares(10);
        assert_eq!(g.len(), 10);
        // 16 channels: nine groups of one, the last takes the remaining 7
        assert!((g[0] - 16.0 / total).abs() < 1e-12);
        assert!((g[9] - (1..=7).sum::<usize>() as f64 / total).abs() < 1e-12);
        assert!((g.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // single-channel groups are ordered strongest first; the pooled
        // remainder group may well outweigh its immediate predecessor
        for w in g[..9].windows(2) {
            assert!(w[0] >= w[1]);
        }
    }

    #[test]
    fn branch_energy_adds_up_and_collapses_when_main_is_silent() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = cfg();
        let mut params = init_model(&cfg, 0.0, &mut rng);
        let images = vec![
            ("a".to_string(), random_image(16, 16, &mut rng)),
            ("b".to_string(), random_image(16, 16, &mut rng)),
        ];
        let b = branch_energy(&params, &cfg, &images).unwrap();
        assert!((b.aux + b.main + b.cross - b.latent).abs() < 1e-9 * b.latent.max(1.0));
        assert!(b.aux > 0.0 && b.main > 0.0);

        for conv in &mut params.main.analysis {
            conv.w.iter_mut().for_each(|v| *v = 0.0);
            conv.b.iter_mut().for_each(|v| *v = 0.0);
        }
        let b = branch_energy(&params, &cfg, &images).unwrap();
        assert_eq!(b.main, 0.0);
        assert!((b.latent - b.aux).abs() < 1e-12 * b.aux.max(1.0));
        assert!(b.cross.abs() < 1e-12 * b.aux.max(1.0));
    }

    #[test]
    fn effective_operator_reproduces_the_analysis_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for stages in [1, 2] {
            let cfg = ModelConfig { stages, ..cfg() };
            let mut params = init_model(&cfg, 0.0, &mut rng);
            // nonzero biases prove the offset is handled
            for conv in &mut params.main.analysis {
                conv.b.iter_mut().for_each(|v| *v = rng.gen_range(-0.2..0.2));
            }
            let op = effective_operator(&params, &cfg).unwrap();
            let f = cfg.factor();
            assert_eq!(op.matrix.rows(), cfg.latent_channels());
            assert_eq!(op.matrix.cols(), f * f);

            let x = random_image(f, f, &mut rng);
            let y = run_analysis(&params, &cfg, &x).y;
            for d in 0..op.matrix.rows() {
                let want: f64 = op
                    .matrix
                    .row(d)
                    .iter()
                    .zip(x.data())
                    .map(|(m, v)| m * v)
                    .sum::<f64>()
                    + op.offset[d];
                assert!(
                    (y.data()[d] - want).abs() < 1e-10,
                    "stages {stages} dim {d}: {} vs {want}",
                    y.data()[d]
                );
            }
        }
    }

    #[test]
    fn effective_operator_refuses_nonlinear_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let relu_main = ModelConfig {
            activation: Activation::Relu,
            ..cfg()
        };
        let params = init_model(&relu_main, 0.0, &mut rng);
        assert!(matches!(
            effective_operator(&params, &relu_main),
            Err(Error::Config(_))
        ));

        let relu_aux = ModelConfig {
            aux_relu: true,
            ..cfg()
        };
        let params = init_model(&relu_aux, 0.0, &mut rng);
        assert!(effective_operator(&params, &relu_aux).is_err());
    }

    #[test]
    fn similarity_histogram_on_known_matrices() {
        // orthogonal rows: every pair lands in the lowest bin
        let eye = Matrix::from_vec(
            3,
            3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        );
        let h = pairwise_similarity(&eye);
        assert_eq!(h.pairs, 3);
        assert_eq!(h.counts[0], 3);
        assert_eq!(h.mean_abs_cos, 0.0);
        assert_eq!(h.zero_rows, 0);

        // parallel and anti-parallel rows clamp into the top bin
        let par = Matrix::from_vec(2, 2, vec![1.0, 1.0, -2.0, -2.0]);
        let h = pairwise_similarity(&par);
        assert_eq!(h.counts[SIMILARITY_BINS - 1], 1);
        assert!((h.mean_abs_cos - 1.0).abs() < 1e-12);

        // zero rows are excluded but counted
        let z = Matrix::from_vec(3, 2, vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let h = pairwise_similarity(&z);
        assert_eq!(h.zero_rows, 1);
        assert_eq!(h.pairs, 1);
    }

    #[test]
    fn spline_reproduces_linear_data_exactly() {
        let xs: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        let sp = CubicSpline::new(xs, ys);
        for x in [0.0, 0.4, 2.5, 4.9, 5.0] {
            assert!((sp.eval(x) - (3.0 * x - 1.0)).abs() < 1e-12);
        }
        // integral of 3x-1 over [1, 4] = 3*15/2 - 3 = 19.5
        assert!((sp.integral(1.0, 4.0) - 19.5).abs() < 1e-12);
    }

    #[test]
    fn spline_integral_agrees_with_dense_trapezoid() {
        let xs = vec![28.0, 30.5, 33.0, 36.0, 39.5, 41.0];
        let ys = vec![-1.2, -0.7, -0.35, 0.02, 0.55, 0.8];
        let sp = CubicSpline::new(xs.clone(), ys);
        let (lo, hi) = (28.0, 41.0);
        let n = 10_000;
        let mut acc = 0.0;
        for i in 0..n {
            let a = lo + (hi - lo) * i as f64 / n as f64;
            let b = lo + (hi - lo) * (i + 1) as f64 / n as f64;
            acc += 0.5 * (sp.eval(a) + sp.eval(b)) * (b - a);
        }
        let exact = sp.integral(lo, hi);
        assert!(
            (acc - exact).abs() <= 1e-4 * exact.abs().max(1.0),
            "trapezoid {acc} vs exact {exact}"
        );
    }

    #[test]
    fn bd_rate_identity_and_exact_shift() {
        let curve: Vec<(f64, f64)> = vec![
            (0.25, 30.0),
            (0.5, 33.5),
            (1.0, 37.2),
            (2.0, 41.0),
            (3.5, 43.8),
        ];
        let same = bd_rate_percent(&curve, &curve).unwrap();
        assert_eq!(format_bd(same), "+0.00%");

        let cheaper: Vec<(f64, f64)> =
            curve.iter().map(|&(b, q)| (b * 0.9, q)).collect();
        let pct = bd_rate_percent(&curve, &cheaper).unwrap();
        assert!((pct + 10.0).abs() < 1e-9, "got {pct}");
        assert_eq!(format_bd(pct), "-10.00%");

        let pricier = bd_rate_percent(&cheaper, &curve).unwrap();
        assert!((pricier - 100.0 / 9.0).abs() < 1e-6);
    }

    #[test]
    fn bd_rate_input_validation() {
        let three: Vec<(f64, f64)> = vec![(0.2, 30.0), (0.4, 33.0), (0.8, 36.0)];
        let four: Vec<(f64, f64)> = vec![(0.2, 30.0), (0.4, 33.0), (0.8, 36.0), (1.6, 39.0)];
        assert!(matches!(
            bd_rate_percent(&three, &four),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            bd_rate_percent(&four, &three),
            Err(Error::Usage(_))
        ));

        let disjoint: Vec<(f64, f64)> =
            vec![(0.2, 10.0), (0.4, 12.0), (0.8, 14.0), (1.6, 16.0)];
        assert!(bd_rate_percent(&four, &disjoint).is_err());

        let dup: Vec<(f64, f64)> = vec![(0.2, 30.0), (0.4, 30.0), (0.8, 36.0), (1.6, 39.0)];
        assert!(bd_rate_percent(&four, &dup).is_err());
    }

    #[test]
    fn rd_csv_roundtrip_and_schema() {
        let pts = vec![(0.25, 30.0), (0.5, 33.5), (1.0, 37.2), (2.0, 41.0)];
        let body = rd_csv(&pts);
        assert!(body.starts_with("bpp,psnr_db\n"));
        let back = parse_rd_csv(&body).unwrap();
        assert_eq!(back.len(), 4);
        for (a, b) in back.iter().zip(&pts) {
            assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-3);
        }
        assert!(parse_rd_csv("rate,quality\n1,2\n").is_err());
    }

    #[test]
    fn csv_schemas_are_pinned() {
        let r = EnergyReport::from_channel_sq(vec![4.0, 1.0]);
        let e = energies_csv(&r);
        assert!(e.starts_with("channel,l2_norm,sq_energy,share\n"));
        assert!(e.contains("0,2.000000,4.000000,0.800000"));
        assert_eq!(groups_csv(&r).lines().count(), 11);

        let b = branch_csv(&BranchEnergy {
            aux: 1.0,
            main: 2.0,
            latent: 3.5,
            cross: 0.5,
        });
        assert_eq!(b, "aux,main,latent,cross\n1.000000,2.000000,3.500000,0.500000\n");

        let h = pairwise_similarity(&Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let s = similarity_csv(&h);
        assert!(s.starts_with("bin_lo,bin_hi,count,frequency\n"));
        assert_eq!(s.lines().count(), 51);

        let p = perimage_csv(&[("a.pgm".into(), 0.5, 30.0), ("b.pgm".into(), 0.7, 32.0)]);
        assert!(p.starts_with("image,bpp,psnr_db\n"));
        assert!(p.trim_end().ends_with("mean,0.600000,31.0000"));
    }

    #[test]
    fn eval_images_runs_the_full_pipeline() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let cfg = cfg();
        let params = init_model(&cfg, 0.0, &mut rng);
        let images = vec![
            ("one.pgm".to_string(), random_image(20, 20, &mut rng)),
            ("two.pgm".to_string(), random_image(16, 24, &mut rng)),
        ];
        let rows = eval_images(&params, &cfg, &images).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].0, "one.pgm");
        for (_, bpp, q) in &rows {
            assert!(*bpp > 0.0, "header alone guarantees nonzero bpp");
            assert!(q.is_finite() && *q > 0.0);
        }
    }
}
