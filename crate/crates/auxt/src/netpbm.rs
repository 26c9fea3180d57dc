//! Binary netpbm input and output: 8-bit grayscale PGM (P5) and color PPM (P6).
//!
//! Pixels load as f64 in [0, 1] (value / 255). Saving clamps to [0, 1] and
//! rounds half away from zero back onto the 8-bit grid. Header comments are
//! accepted on load and never written back; only the pixel payload is
//! guaranteed byte-stable across a load/save round trip.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{to_byte, Tensor};

struct HeaderParser<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> HeaderParser<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            offset: self.pos,
            msg: msg.into(),
        }
    }

    /// Skip whitespace and `#` comments that run to end of line.
    fn skip_space(&mut self) -> Result<()> {
        loop {
            match self.bytes.get(self.pos) {
                Some(b) if b.is_ascii_whitespace() => self.pos += 1,
                Some(b'#') => {
                    while let Some(&b) = self.bytes.get(self.pos) {
                        self.pos += 1;
                        if b == b'\n' {
                            break;
                        }
                    }
                }
                Some(_) => return Ok(()),
                None => return Err(self.err("unexpected end of header")),
            }
        }
    }

    fn number(&mut self) -> Result<usize> {
        self.skip_space()?;
        let start = self.pos;
        while matches!(self.bytes.get(self.pos), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.err("expected a decimal number"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|e| self.err(format!("bad number: {e}")))
    }
}

/// Load a binary PGM or PPM file. Grayscale yields one channel, color three.
pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let pstr = path.display().to_string();
    let bytes = fs::read(path)?;
    let mut p = HeaderParser {
        bytes: &bytes,
        pos: 0,
        path: &pstr,
    };

    let channels = match bytes.get(0..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        Some(other) => {
            return Err(Error::UnsupportedFormat {
                path: pstr,
                msg: format!(
                    "magic {:?}, only binary P5/P6 are supported",
                    String::from_utf8_lossy(other)
                ),
            })
        }
        None => return Err(p.err("file shorter than a magic number")),
    };
    p.pos = 2;

    let w = p.number()?;
    let h = p.number()?;
    let maxval = p.number()?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat {
            path: pstr,
            msg: format!("maxval {maxval}, only 8-bit (255) is supported"),
        });
    }
    if w == 0 || h == 0 {
        return Err(p.err("zero image dimension"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(p.pos) {
        Some(b) if b.is_ascii_whitespace() => p.pos += 1,
        _ => return Err(p.err("expected single whitespace before pixel data")),
    }

    let need = w * h * channels;
    let payload = &bytes[p.pos..];
    if payload.len() < need {
        return Err(Error::Parse {
            path: pstr,
            offset: bytes.len(),
            msg: format!("payload has {} bytes, need {need}", payload.len()),
        });
    }
    let data = payload[..need].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(Tensor::from_vec(h, w, channels, data))
}

/// Save as P5 (one channel) or P6 (three channels).
pub fn save_image(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let magic = match t.c() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(Error::Dimension(format!(
                "netpbm output needs 1 or 3 channels, tensor has {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{} {}\n255\n", t.w(), t.h()).into_bytes();
    out.extend(t.data().iter().map(|&v| to_byte(v)));
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("auxt-netpbm-tests");
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn save_load_is_clamp_round() {
        let t = Tensor::from_vec(1, 4, 1, vec![0.5, -0.1, 1.7, 0.2501]);
        let p = tmp("roundtrip.pgm");
        save_image(&p, &t).unwrap();
        let back = load_image(&p).unwrap();
        let want: Vec<f64> = [128u8, 0, 255, 64].iter().map(|&b| b as f64 / 255.0).collect();
        assert_eq!(back.data(), &want[..]);
    }

    #[test]
    fn pixel_payload_survives_header_comments() {
        let p = tmp("comments.pgm");
        fs::write(&p, b"P5 # say\n# more\n 2\n2 255\n\x00\x40\x80\xff").unwrap();
        let t = load_image(&p).unwrap();
        assert_eq!(t.shape(), (2, 2, 1));
        assert_eq!(t.at(1, 1, 0), 1.0);

        let q = tmp("comments-resaved.pgm");
        save_image(&q, &t).unwrap();
        let saved = fs::read(&q).unwrap();
        assert!(saved.ends_with(b"\x00\x40\x80\xff"));
    }

    #[test]
    fn ppm_loads_three_channels() {
        let p = tmp("color.ppm");
        fs::write(&p, b"P6\n1 2\n255\n\xff\x00\x00\x00\xff\x00").unwrap();
        let t = load_image(&p).unwrap();
        assert_eq!(t.shape(), (2, 1, 3));
        assert_eq!(t.pixel(0, 0), &[1.0, 0.0, 0.0]);
        assert_eq!(t.pixel(1, 0), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn errors_name_offsets_and_formats() {
        let p = tmp("bad-magic.pgm");
        fs::write(&p, b"P2\n1 1\n255\n0").unwrap();
        match load_image(&p) {
            Err(Error::UnsupportedFormat { msg, .. }) => assert!(msg.contains("P2")),
            other => panic!("want unsupported format, got {other:?}"),
        }

        let p = tmp("bad-depth.pgm");
        fs::write(&p, b"P5\n1 1\n65535\n\x00\x00").unwrap();
        match load_image(&p) {
            Err(Error::UnsupportedFormat { msg, .. }) => assert!(msg.contains("65535")),
            other => panic!("want unsupported format, got {other:?}"),
        }

        let p = tmp("truncated.pgm");
        fs::write(&p, b"P5\n4 4\n255\n\x00\x01").unwrap();
        match load_image(&p) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 13),
            other => panic!("want parse error, got {other:?}"),
        }

        let p = tmp("no-number.pgm");
        fs::write(&p, b"P5\nx 1\n255\n\x00").unwrap();
        match load_image(&p) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("want parse error, got {other:?}"),
        }
    }
}
