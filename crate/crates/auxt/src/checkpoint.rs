//! Model checkpoint container: training configuration JSON plus every
//! parameter tensor as a named, shape-tagged section, with a trailing
//! content hash.
//!
//! Layout (all integers little-endian): magic `AUXC` | version u8 |
//! config_len u32 | config JSON | n_sections u32 | sections | hash u64.
//! Each section is name_len u16 | name | ndim u8 | ndim x u32 dims |
//! f64 data. Sections appear in the same fixed order the parameter
//! flattener uses, and the loader insists on that order, so a checkpoint
//! is byte-reproducible from (config, params) alone.

use std::path::Path;

use crate::error::{Error, Result};
use crate::mainbranch::{Conv, ConvT, MainParams};
use crate::mat::Matrix;
use crate::auxt::{AuxtParams, WlsStage};
use crate::entropy::GaussianModel;
use crate::model::{model_hash, ModelConfig, ModelParams};

pub const MAGIC: [u8; 4] = *b"AUXC";
pub const VERSION: u8 = 1;

pub struct Checkpoint {
    pub config_json: String,
    pub params: ModelParams,
}

// --- writer ---------------------------------------------------------------

struct SectionWriter {
    buf: Vec<u8>,
    count: u32,
}

impl SectionWriter {
    fn section(&mut self, name: &str, dims: &[usize], data: &[f64]) {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        self.buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        self.buf.extend_from_slice(name.as_bytes());
        self.buf.push(dims.len() as u8);
        for &d in dims {
            self.buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in data {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
        self.count += 1;
    }
}

pub fn to_bytes(config_json: &str, params: &ModelParams) -> Vec<u8> {
    let mut w = SectionWriter {
        buf: Vec::new(),
        count: 0,
    };
    if let Some(aux) = &params.auxt {
        for (i, st) in aux.stages.iter().enumerate() {
            w.section(&format!("auxt.stages[{i}].s_ll"), &[st.s_ll.len()], &st.s_ll);
            w.section(&format!("auxt.stages[{i}].s_lh"), &[st.s_lh.len()], &st.s_lh);
            w.section(&format!("auxt.stages[{i}].s_hl"), &[st.s_hl.len()], &st.s_hl);
            w.section(&format!("auxt.stages[{i}].s_hh"), &[st.s_hh.len()], &st.s_hh);
            w.section(
                &format!("auxt.stages[{i}].olp"),
                &[st.olp.rows(), st.olp.cols()],
                st.olp.data(),
            );
        }
        if let Some(syn) = &aux.syn_olp {
            for (i, m) in syn.iter().enumerate() {
                w.section(&format!("auxt.syn_olp[{i}]"), &[m.rows(), m.cols()], m.data());
            }
        }
    }
    for (i, c) in params.main.analysis.iter().enumerate() {
        w.section(
            &format!("main.analysis[{i}].w"),
            &[c.c_out, c.k, c.k, c.c_in],
            &c.w,
        );
        w.section(&format!("main.analysis[{i}].b"), &[c.b.len()], &c.b);
    }
    for (i, c) in params.main.synthesis.iter().enumerate() {
        w.section(
            &format!("main.synthesis[{i}].w"),
            &[c.c_in, c.k, c.k, c.c_out],
            &c.w,
        );
        w.section(&format!("main.synthesis[{i}].b"), &[c.b.len()], &c.b);
    }
    w.section("entropy.mu", &[params.entropy.mu.len()], &params.entropy.mu);
    w.section(
        "entropy.log_sigma",
        &[params.entropy.log_sigma.len()],
        &params.entropy.log_sigma,
    );

    let mut out = Vec::with_capacity(13 + config_json.len() + w.buf.len() + 8);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(config_json.len() as u32).to_le_bytes());
    out.extend_from_slice(config_json.as_bytes());
    out.extend_from_slice(&w.count.to_le_bytes());
    out.extend_from_slice(&w.buf);
    out.extend_from_slice(&model_hash(params).to_le_bytes());
    out
}

// --- reader ---------------------------------------------------------------

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format(format!(
                "checkpoint truncated at byte {} (wanted {} more)",
                self.pos, n
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

struct Section {
    name: String,
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Section {
    fn dims2(&self) -> Result<(usize, usize)> {
        if self.dims.len() != 2 {
            return Err(Error::Format(format!(
                "section {} should be 2-d, has {} dims",
                self.name,
                self.dims.len()
            )));
        }
        Ok((self.dims[0], self.dims[1]))
    }
}

fn read_section(c: &mut Cursor) -> Result<Section> {
    let name_len = c.u16()? as usize;
    let name = String::from_utf8(c.take(name_len)?.to_vec())
        .map_err(|_| Error::Format("section name is not UTF-8".into()))?;
    let ndim = c.u8()? as usize;
    if ndim == 0 || ndim > 4 {
        return Err(Error::Format(format!("section {name}: bad rank {ndim}")));
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(c.u32()? as usize);
    }
    let n: usize = dims.iter().product();
    let raw = c.take(8 * n)?;
    let data = raw
        .chunks_exact(8)
        .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
        .collect();
    Ok(Section { name, dims, data })
}

/// A strictly ordered stream of sections; each expectation names what the
/// model structure demands next.
struct SectionStream<'a> {
    cursor: Cursor<'a>,
    remaining: u32,
    peeked: Option<Section>,
}

impl<'a> SectionStream<'a> {
    fn next_name(&mut self) -> Result<Option<&str>> {
        if self.peeked.is_none() {
            if self.remaining == 0 {
                return Ok(None);
            }
            self.remaining -= 1;
            self.peeked = Some(read_section(&mut self.cursor)?);
        }
        Ok(self.peeked.as_ref().map(|s| s.name.as_str()))
    }

    fn expect(&mut self, name: &str) -> Result<Section> {
        let found = self.next_name()?.map(str::to_string);
        match found {
            Some(n) if n == name => Ok(self.peeked.take().expect("just peeked")),
            Some(n) => Err(Error::Format(format!(
                "checkpoint section order: expected {name}, found {n}"
            ))),
            None => Err(Error::Format(format!(
                "checkpoint ends before section {name}"
            ))),
        }
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(Error::Format("bad magic, not a checkpoint".into()));
    }
    let version = c.u8()?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let config_len = c.u32()? as usize;
    let config_json = String::from_utf8(c.take(config_len)?.to_vec())
        .map_err(|_| Error::Format("config block is not UTF-8".into()))?;
    let n_sections = c.u32()?;
    let mut stream = SectionStream {
        cursor: c,
        remaining: n_sections,
        peeked: None,
    };

    // --- shortcut stages, if present ---
    let mut stages: Vec<WlsStage> = Vec::new();
    while stream.next_name()?.is_some_and(|n| {
        n == format!("auxt.stages[{}].s_ll", stages.len())
    }) {
        let i = stages.len();
        let s_ll = stream.expect(&format!("auxt.stages[{i}].s_ll"))?.data;
        let s_lh = stream.expect(&format!("auxt.stages[{i}].s_lh"))?.data;
        let s_hl = stream.expect(&format!("auxt.stages[{i}].s_hl"))?.data;
        let s_hh = stream.expect(&format!("auxt.stages[{i}].s_hh"))?.data;
        let olp_sec = stream.expect(&format!("auxt.stages[{i}].olp"))?;
        let (r, cl) = olp_sec.dims2()?;
        let c_in = s_ll.len();
        if s_lh.len() != c_in || s_hl.len() != c_in || s_hh.len() != c_in {
            return Err(Error::Format(format!(
                "stage {i}: exponent vectors disagree on channel count"
            )));
        }
        stages.push(WlsStage {
            s_ll,
            s_lh,
            s_hl,
            s_hh,
            olp: Matrix::from_vec(r, cl, olp_sec.data),
        });
    }
    let mut syn_olp: Vec<Matrix> = Vec::new();
    while stream.next_name()?.is_some_and(|n| n == format!("auxt.syn_olp[{}]", syn_olp.len())) {
        let sec = stream.expect(&format!("auxt.syn_olp[{}]", syn_olp.len()))?;
        let (r, cl) = sec.dims2()?;
        syn_olp.push(Matrix::from_vec(r, cl, sec.data));
    }
    let auxt = if stages.is_empty() {
        if !syn_olp.is_empty() {
            return Err(Error::Format(
                "synthesis projections without shortcut stages".into(),
            ));
        }
        None
    } else {
        Some(AuxtParams {
            stages,
            syn_olp: if syn_olp.is_empty() { None } else { Some(syn_olp) },
        })
    };

    // --- conv ladders ---
    let conv4 = |sec: Section| -> Result<(usize, usize, usize, Vec<f64>)> {
        if sec.dims.len() != 4 || sec.dims[1] != sec.dims[2] {
            return Err(Error::Format(format!(
                "section {}: expected square 4-d kernel, got {:?}",
                sec.name, sec.dims
            )));
        }
        Ok((sec.dims[0], sec.dims[1], sec.dims[3], sec.data))
    };
    let mut analysis: Vec<Conv> = Vec::new();
    while stream.next_name()?.is_some_and(|n| n == format!("main.analysis[{}].w", analysis.len()))
    {
        let i = analysis.len();
        let (c_out, k, c_in, w) = conv4(stream.expect(&format!("main.analysis[{i}].w"))?)?;
        let b = stream.expect(&format!("main.analysis[{i}].b"))?.data;
        if b.len() != c_out {
            return Err(Error::Format(format!("analysis conv {i}: bias length")));
        }
        analysis.push(Conv { c_in, c_out, k, w, b });
    }
    if analysis.is_empty() {
        return Err(Error::Format("checkpoint has no analysis convs".into()));
    }
    let mut synthesis: Vec<ConvT> = Vec::new();
    while stream
        .next_name()?
        .is_some_and(|n| n == format!("main.synthesis[{}].w", synthesis.len()))
    {
        let i = synthesis.len();
        let (c_in, k, c_out, w) = conv4(stream.expect(&format!("main.synthesis[{i}].w"))?)?;
        let b = stream.expect(&format!("main.synthesis[{i}].b"))?.data;
        if b.len() != c_out {
            return Err(Error::Format(format!("synthesis conv {i}: bias length")));
        }
        synthesis.push(ConvT { c_in, c_out, k, w, b });
    }

    // --- entropy model and trailing hash ---
    let mu = stream.expect("entropy.mu")?.data;
    let log_sigma = stream.expect("entropy.log_sigma")?.data;
    if mu.len() != log_sigma.len() {
        return Err(Error::Format("entropy model channel mismatch".into()));
    }
    if let Some(extra) = stream.next_name()? {
        return Err(Error::Format(format!("unexpected trailing section {extra}")));
    }
    let params = ModelParams {
        auxt,
        main: MainParams { analysis, synthesis },
        entropy: GaussianModel { mu, log_sigma },
    };
    let mut c = stream.cursor;
    let stored_hash = c.u64()?;
    if c.pos != c.bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint hash",
            c.bytes.len() - c.pos
        )));
    }
    let actual = model_hash(&params);
    if stored_hash != actual {
        return Err(Error::Format(format!(
            "checkpoint hash {stored_hash:#018x} does not match parameters ({actual:#018x}); file is corrupt"
        )));
    }
    Ok(Checkpoint {
        config_json,
        params,
    })
}

pub fn save(path: impl AsRef<Path>, config_json: &str, params: &ModelParams) -> Result<()> {
    std::fs::write(path, to_bytes(config_json, params))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes)
}

/// Check that loaded parameters have exactly the shapes the configuration
/// would create, so a config/params mix-up is caught before any math runs.
pub fn check_shapes(params: &ModelParams, cfg: &ModelConfig) -> Result<()> {
    let fail = |what: String| Err(Error::Format(format!("checkpoint does not match config: {what}")));
    match (&params.auxt, cfg.has_aux()) {
        (None, true) => return fail("missing shortcut parameters".into()),
        (Some(_), false) => return fail("unexpected shortcut parameters".into()),
        _ => {}
    }
    if let Some(aux) = &params.auxt {
        let plan = cfg.aux_plan();
        if aux.stages.len() != plan.len() {
            return fail(format!(
                "{} shortcut stages, config wants {}",
                aux.stages.len(),
                plan.len()
            ));
        }
        let rows = |c_in: usize| if cfg.pool { c_in } else { 4 * c_in };
        for (i, (st, &(c_in, d_out))) in aux.stages.iter().zip(&plan).enumerate() {
            if st.c_in() != c_in || st.olp.rows() != rows(c_in) || st.olp.cols() != d_out {
                return fail(format!("shortcut stage {i} shape"));
            }
        }
        match (&aux.syn_olp, cfg.tied_olp) {
            (Some(_), true) => return fail("untied projections in a tied config".into()),
            (None, false) => return fail("tied projections in an untied config".into()),
            (Some(syn), false) => {
                for (i, (m, &(c_in, d_out))) in syn.iter().zip(&plan).enumerate() {
                    if m.rows() != rows(c_in) || m.cols() != d_out {
                        return fail(format!("synthesis projection {i} shape"));
                    }
                }
            }
            _ => {}
        }
    }
    let a_dims = cfg.analysis_conv_dims();
    let s_dims = cfg.synthesis_conv_dims();
    if params.main.analysis.len() != a_dims.len() || params.main.synthesis.len() != s_dims.len() {
        return fail("conv ladder depth".into());
    }
    for (i, (c, &(ci, co))) in params.main.analysis.iter().zip(&a_dims).enumerate() {
        if c.c_in != ci || c.c_out != co || c.k != cfg.kernel_size {
            return fail(format!("analysis conv {i} shape"));
        }
    }
    for (i, (c, &(ci, co))) in params.main.synthesis.iter().zip(&s_dims).enumerate() {
        if c.c_in != ci || c.c_out != co || c.k != cfg.kernel_size {
            return fail(format!("synthesis conv {i} shape"));
        }
    }
    if params.entropy.channels() != cfg.latent_channels() {
        return fail("entropy model width".into());
    }
    Ok(())
}
