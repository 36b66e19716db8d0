//! Binary PGM (P5, maxval 255).
//!
//! Hand-rolled rather than taken from an image library because errors must
//! carry the byte offset at which the file went wrong.

use std::fs;
use std::path::Path;

use fheede_core::Image;

#[derive(Debug, thiserror::Error)]
pub enum PgmError {
    #[error("byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn bad(offset: usize, reason: impl Into<String>) -> PgmError {
    PgmError::Malformed {
        offset,
        reason: reason.into(),
    }
}

struct Header<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.buf.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.buf.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize, PgmError> {
        self.skip_space();
        let start = self.pos;
        while self.buf.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(bad(start, format!("expected {what}")));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| bad(start, format!("{what} too large")))
    }
}

pub fn decode_pgm(buf: &[u8]) -> Result<Image, PgmError> {
    if buf.len() < 2 || &buf[..2] != b"P5" {
        return Err(bad(0, "not a binary PGM (expected P5)"));
    }
    let mut h = Header { buf, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval_at = {
        h.skip_space();
        h.pos
    };
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(bad(
            maxval_at,
            format!("maxval {maxval} unsupported, need 255"),
        ));
    }
    match buf.get(h.pos) {
        Some(c) if c.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(bad(h.pos, "expected one whitespace byte after maxval")),
    }
    let need = width
        .checked_mul(height)
        .ok_or_else(|| bad(2, "dimensions overflow"))?;
    let data = &buf[h.pos..];
    if data.len() < need {
        return Err(bad(
            buf.len(),
            format!("truncated raster: {} of {need} bytes", data.len()),
        ));
    }
    Ok(Image::new(width, height, data[..need].to_vec()).expect("length checked"))
}

pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.data());
    out
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image, PgmError> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(img: &Image, path: impl AsRef<Path>) -> Result<(), PgmError> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn comments_tolerated() {
        let mut f = b"P5\n# made by hand\n3 # width\n1\n# max\n255\n".to_vec();
        f.extend_from_slice(&[1, 2, 3]);
        let img = decode_pgm(&f).unwrap();
        assert_eq!(
            (img.width(), img.height(), img.data()),
            (3, 1, &[1u8, 2, 3][..])
        );
    }

    #[test]
    fn rejects_with_offsets() {
        let e = decode_pgm(b"P2\n1 1\n255\n\x00").unwrap_err();
        assert!(matches!(e, PgmError::Malformed { offset: 0, .. }));
        let e = decode_pgm(b"P5\n1 1\n65535\n\x00\x00").unwrap_err();
        assert!(matches!(e, PgmError::Malformed { offset: 7, .. }), "{e}");
        let e = decode_pgm(b"P5\n4 4\n255\n\x00\x00").unwrap_err();
        assert!(matches!(e, PgmError::Malformed { offset: 13, .. }), "{e}");
        let e = decode_pgm(b"P5\nx 4\n255\n").unwrap_err();
        assert!(matches!(e, PgmError::Malformed { offset: 3, .. }), "{e}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn roundtrip(w in 0usize..20, h in 0usize..20, seed in any::<u8>()) {
            let data: Vec<u8> = (0..w * h).map(|i| (i as u8).wrapping_mul(31).wrapping_add(seed)).collect();
            let img = Image::new(w, h, data).unwrap();
            prop_assert_eq!(decode_pgm(&encode_pgm(&img)).unwrap(), img);
        }
    }
}
