//! Carry-less 32-bit range coder plus the per-channel cumulative frequency
//! tables that adapt the Gaussian rate model to it.
//!
//! The coder keeps `low` as a wrapping accumulator and emits the top byte
//! whenever it is settled; when the range drops below 2^16 before the top
//! byte settles, the range is truncated to the distance to the next carry
//! boundary, which wastes a fraction of a bit but never propagates carries.
//! All frequency tables total exactly 2^16.
//!
//! Symbols far outside a channel's table (beyond mu ± 6 sigma) are sent as an
//! escape followed by the raw 16-bit value in two uniform bytes. The escape
//! path keeps every i16 codable no matter how mismatched the model is.

use crate::entropy::{symbol_bits_and_grads, GaussianModel, LatentCode, SYMBOL_BOUND};
use crate::error::{Error, Result};

const TOP: u32 = 1 << 24;
const BOT: u32 = 1 << 16;
pub const CMF_TOTAL: u32 = 1 << 16;

pub struct RangeEncoder {
    low: u32,
    range: u32,
    out: Vec<u8>,
}

impl RangeEncoder {
    pub fn new() -> RangeEncoder {
        RangeEncoder {
            low: 0,
            range: u32::MAX,
            out: Vec::new(),
        }
    }

    /// Narrow to the slice [cum, cum + freq) of the 2^16-total model.
    pub fn encode(&mut self, cum: u32, freq: u32) {
        debug_assert!(freq > 0 && cum + freq <= CMF_TOTAL);
        let r = self.range / CMF_TOTAL;
        self.low = self.low.wrapping_add(r * cum);
        self.range = r * freq;
        self.normalize();
    }

    fn normalize(&mut self) {
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.out.push((self.low >> 24) as u8);
            self.low = self.low.wrapping_shl(8);
            self.range = self.range.wrapping_shl(8);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..4 {
            self.out.push((self.low >> 24) as u8);
            self.low = self.low.wrapping_shl(8);
        }
        self.out
    }
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

pub struct RangeDecoder<'a> {
    low: u32,
    range: u32,
    code: u32,
    input: &'a [u8],
    pos: usize,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(input: &'a [u8]) -> RangeDecoder<'a> {
        let mut d = RangeDecoder {
            low: 0,
            range: u32::MAX,
            code: 0,
            input,
            pos: 0,
        };
        for _ in 0..4 {
            d.code = (d.code << 8) | d.next_byte() as u32;
        }
        d
    }

    fn next_byte(&mut self) -> u8 {
        let b = self.input.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    /// The cumulative position of the next symbol, in [0, 2^16).
    pub fn decode_cum(&self) -> u32 {
        let r = self.range / CMF_TOTAL;
        (self.code.wrapping_sub(self.low) / r).min(CMF_TOTAL - 1)
    }

    /// Commit to the symbol occupying [cum, cum + freq).
    pub fn decode_update(&mut self, cum: u32, freq: u32) {
        let r = self.range / CMF_TOTAL;
        self.low = self.low.wrapping_add(r * cum);
        self.range = r * freq;
        loop {
            if (self.low ^ self.low.wrapping_add(self.range)) >= TOP {
                if self.range >= BOT {
                    break;
                }
                self.range = self.low.wrapping_neg() & (BOT - 1);
            }
            self.code = (self.code << 8) | self.next_byte() as u32;
            self.low = self.low.wrapping_shl(8);
            self.range = self.range.wrapping_shl(8);
        }
    }
}

/// One channel's quantized symbol distribution: values `lo ..= hi` followed
/// by an escape slot for everything else. `cum` has one entry per slot plus
/// the trailing total 2^16.
#[derive(Debug, Clone)]
pub struct ChannelTable {
    pub lo: i32,
    pub hi: i32,
    pub cum: Vec<u32>,
}

impl ChannelTable {
    pub fn escape_index(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn slot(&self, idx: usize) -> (u32, u32) {
        (self.cum[idx], self.cum[idx + 1] - self.cum[idx])
    }

    /// Map a decoded cumulative position back to its slot index.
    pub fn find(&self, cum_pos: u32) -> usize {
        // cum is strictly increasing; binary search for the last entry <= pos.
        match self.cum.binary_search(&cum_pos) {
            Ok(i) => i,
            Err(i) => i - 1,
        }
    }

    /// Quantize the channel's Gaussian interval masses onto a 2^16 grid with
    /// a floor of one count per slot. The alphabet spans mu ± 6 sigma (one
    /// extra on each side), clamped to the i16 symbol range.
    pub fn build(mu: f64, log_sigma: f64) -> ChannelTable {
        let sigma = log_sigma.exp().clamp(crate::entropy::SIGMA_MIN, crate::entropy::SIGMA_MAX);
        let lo = ((mu - 6.0 * sigma).floor() as i64 - 1)
            .clamp(-(SYMBOL_BOUND as i64), SYMBOL_BOUND as i64 - 2) as i32;
        let hi = ((mu + 6.0 * sigma).ceil() as i64 + 1)
            .clamp(lo as i64 + 1, SYMBOL_BOUND as i64 - 1) as i32;
        let n = (hi - lo + 1) as usize;
        debug_assert!(n + 1 <= CMF_TOTAL as usize);

        // Proportional counts with a floor of 1; the fix-up loop settles the
        // exact total by raiding the largest slots, which barely notice.
        let mut counts = vec![0u64; n + 1];
        let budget = (CMF_TOTAL as u64) - (n as u64 + 1);
        for (i, c) in counts.iter_mut().take(n).enumerate() {
            let v = (lo + i as i32) as f64;
            let bits = symbol_bits_and_grads(v, mu, log_sigma).0;
            let p = (-bits * std::f64::consts::LN_2).exp();
            *c = 1 + (p * budget as f64) as u64;
        }
        counts[n] = 1; // escape
        let mut total: u64 = counts.iter().sum();
        while total != CMF_TOTAL as u64 {
            let idx = (0..n)
                .max_by_key(|&i| counts[i])
                .expect("table has at least one symbol slot");
            if total > CMF_TOTAL as u64 {
                let cut = (total - CMF_TOTAL as u64).min(counts[idx] - 1);
                assert!(cut > 0, "cannot shrink table to total");
                counts[idx] -= cut;
                total -= cut;
            } else {
                let add = CMF_TOTAL as u64 - total;
                counts[idx] += add;
                total += add;
            }
        }
        let mut cum = Vec::with_capacity(n + 2);
        let mut acc = 0u32;
        cum.push(0);
        for c in counts {
            acc += c as u32;
            cum.push(acc);
        }
        debug_assert_eq!(*cum.last().unwrap(), CMF_TOTAL);
        ChannelTable { lo, hi, cum }
    }
}

/// Range-code a latent against the model. Symbols iterate in row-major
/// (y, x, channel) order, matching the tensor layout.
pub fn encode_latent(code: &LatentCode, model: &GaussianModel) -> Result<Vec<u8>> {
    assert_eq!(code.c, model.channels(), "latent/model channel mismatch");
    let tables: Vec<ChannelTable> = (0..code.c)
        .map(|ch| ChannelTable::build(model.mu[ch], model.log_sigma[ch]))
        .collect();
    let mut enc = RangeEncoder::new();
    for (i, &s) in code.symbols.iter().enumerate() {
        if s <= -SYMBOL_BOUND || s >= SYMBOL_BOUND {
            return Err(Error::LatentOverflow {
                value: s as f64,
                index: i,
            });
        }
        let t = &tables[i % code.c];
        if s >= t.lo && s <= t.hi {
            let (cum, freq) = t.slot((s - t.lo) as usize);
            enc.encode(cum, freq);
        } else {
            let (cum, freq) = t.slot(t.escape_index());
            enc.encode(cum, freq);
            let raw = (s + SYMBOL_BOUND) as u32; // 0 .. 2^16
            enc.encode((raw & 0xFF) * 256, 256);
            enc.encode((raw >> 8) * 256, 256);
        }
    }
    Ok(enc.finish())
}

/// Exact inverse of `encode_latent` given the same model and shape.
pub fn decode_latent(
    payload: &[u8],
    model: &GaussianModel,
    h: usize,
    w: usize,
    c: usize,
) -> LatentCode {
    let tables: Vec<ChannelTable> = (0..c)
        .map(|ch| ChannelTable::build(model.mu[ch], model.log_sigma[ch]))
        .collect();
    let mut dec = RangeDecoder::new(payload);
    let n = h * w * c;
    let mut symbols = Vec::with_capacity(n);
    for i in 0..n {
        let t = &tables[i % c];
        let idx = t.find(dec.decode_cum());
        let (cum, freq) = t.slot(idx);
        dec.decode_update(cum, freq);
        if idx == t.escape_index() {
            let pos = dec.decode_cum();
            let lo_byte = pos / 256;
            dec.decode_update(lo_byte * 256, 256);
            let pos = dec.decode_cum();
            let hi_byte = pos / 256;
            dec.decode_update(hi_byte * 256, 256);
            symbols.push((lo_byte + 256 * hi_byte) as i32 - SYMBOL_BOUND);
        } else {
            symbols.push(t.lo + idx as i32);
        }
    }
    LatentCode { h, w, c, symbols }
}
