//! Binary file formats.
//!
//! Keys and ciphertext files start with an 8-byte magic, a little-endian
//! `u16` version and the profile they were made under. Residues are
//! little-endian integers of `ceil(beta / 8)` bytes. Every file size follows
//! from its header.

use std::fs;
use std::path::Path;

use fheede_core::circuits::EncryptedByte;
use fheede_core::de::{self, AvailabilityMap, DeError};
use fheede_core::homomorphic::SwitchingKey;
use fheede_core::lwe::{Ciphertext, PublicKey, SecretKey};
use fheede_core::params::ParamProfile;
use fheede_core::pipeline::{
    Block, CiphertextStore, DataHidingKey, EmbedMode, EncryptedHL, EncryptedPixelPair,
};

pub const VERSION: u16 = 1;

pub const SECRET_MAGIC: &[u8; 8] = b"FHEDSK01";
pub const PUBLIC_MAGIC: &[u8; 8] = b"FHEDPK01";
pub const SWITCH_MAGIC: &[u8; 8] = b"FHEDSW01";
pub const STORE_MAGIC: &[u8; 8] = b"FHEDCT01";
pub const MAP_MAGIC: &[u8; 8] = de::MAP_MAGIC;
pub const PAYLOAD_MAGIC: &[u8; 8] = b"FHEDPAY1";
/// Stand-in for a bootstrapping key. It wraps the secret key, so it only
/// simulates a refresh service and gives no secrecy against its holder.
pub const ORACLE_MAGIC: &[u8; 8] = b"FHEDRO01";

/// Store mode byte for a plain list of bit ciphertexts.
const MODE_BITS: u8 = 2;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected}, found {found:?}")]
    BadMagic {
        expected: &'static str,
        found: Vec<u8>,
    },
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("truncated at byte {offset}: need {need} more bytes")]
    Truncated { offset: usize, need: usize },
    #[error("byte {offset}: {reason}")]
    Invalid { offset: usize, reason: String },
    #[error("{trailing} trailing bytes after the payload")]
    Trailing { trailing: usize },
    #[error("profile mismatch: file has n={found_n} q={found_q} d={found_d}, expected n={n} q={q} d={d}")]
    ProfileMismatch {
        found_n: usize,
        found_q: u32,
        found_d: usize,
        n: usize,
        q: u32,
        d: usize,
    },
    #[error(transparent)]
    Map(#[from] DeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Writer {
    buf: Vec<u8>,
    width: usize,
}

impl Writer {
    fn new(magic: &[u8; 8], p: Option<&ParamProfile>) -> Self {
        let mut w = Writer {
            buf: Vec::new(),
            width: p.map_or(0, |p| p.residue_bytes()),
        };
        w.buf.extend_from_slice(magic);
        w.u16(VERSION);
        if let Some(p) = p {
            w.u32(p.n as u32);
            w.u32(p.q);
            w.u32(p.d as u32);
            w.u32(p.beta);
            w.f64(p.epsilon);
            w.f64(p.sigma);
            w.f64(p.key_sigma);
            w.u32(p.refresh_mult_interval);
            w.u32(p.refresh_add_interval);
        }
        w
    }

    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn residues(&mut self, v: &[u32]) {
        for &x in v {
            self.buf.extend_from_slice(&x.to_le_bytes()[..self.width]);
        }
    }

    fn ciphertext(&mut self, c: &Ciphertext) {
        self.u64(c.noise_bound);
        self.residues(c.as_slice());
    }

    fn byte(&mut self, b: &EncryptedByte) {
        for c in &b.bits {
            self.ciphertext(c);
        }
    }

    fn bytes(&mut self, v: &[u8]) {
        self.u32(v.len() as u32);
        self.buf.extend_from_slice(v);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    profile: Option<ParamProfile>,
}

impl<'a> Reader<'a> {
    fn open(
        buf: &'a [u8],
        magic: &'static [u8; 8],
        with_profile: bool,
        expected: Option<&ParamProfile>,
    ) -> Result<Self, FormatError> {
        let mut r = Reader {
            buf,
            pos: 0,
            profile: None,
        };
        let found = r.take(8)?;
        if found != magic {
            return Err(FormatError::BadMagic {
                expected: std::str::from_utf8(magic).unwrap(),
                found: found.to_vec(),
            });
        }
        let v = r.u16()?;
        if v != VERSION {
            return Err(FormatError::Version(v));
        }
        if with_profile {
            let at = r.pos;
            let p = ParamProfile {
                n: r.u32()? as usize,
                q: r.u32()?,
                d: r.u32()? as usize,
                beta: r.u32()?,
                epsilon: r.f64()?,
                sigma: r.f64()?,
                key_sigma: r.f64()?,
                refresh_mult_interval: r.u32()?,
                refresh_add_interval: r.u32()?,
            };
            p.validate().map_err(|e| FormatError::Invalid {
                offset: at,
                reason: e.to_string(),
            })?;
            if let Some(e) = expected {
                if *e != p {
                    return Err(FormatError::ProfileMismatch {
                        found_n: p.n,
                        found_q: p.q,
                        found_d: p.d,
                        n: e.n,
                        q: e.q,
                        d: e.d,
                    });
                }
            }
            r.profile = Some(p);
        }
        Ok(r)
    }

    fn profile(&self) -> &ParamProfile {
        self.profile.as_ref().expect("header carries a profile")
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(FormatError::Truncated {
                offset: self.pos,
                need: n.saturating_sub(self.buf.len() - self.pos),
            });
        };
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn residues(&mut self, count: usize) -> Result<Vec<u32>, FormatError> {
        let p = self.profile();
        let (w, q) = (p.residue_bytes(), p.q);
        let at = self.pos;
        let raw = self.take(count.checked_mul(w).ok_or(FormatError::Invalid {
            offset: at,
            reason: "length overflows".into(),
        })?)?;
        let mut out = Vec::with_capacity(count);
        for (i, chunk) in raw.chunks_exact(w).enumerate() {
            let mut b = [0u8; 4];
            b[..w].copy_from_slice(chunk);
            let v = u32::from_le_bytes(b);
            if v >= q {
                return Err(FormatError::Invalid {
                    offset: at + i * w,
                    reason: format!("residue {v} not below q = {q}"),
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    fn ciphertext(&mut self) -> Result<Ciphertext, FormatError> {
        let bound = self.u64()?;
        let n = self.profile().n;
        Ok(Ciphertext::new(self.residues(n)?, bound))
    }

    fn byte(&mut self) -> Result<EncryptedByte, FormatError> {
        let mut v = Vec::with_capacity(8);
        for _ in 0..8 {
            v.push(self.ciphertext()?);
        }
        Ok(EncryptedByte::from_vec(v))
    }

    fn bytes(&mut self) -> Result<&'a [u8], FormatError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    fn finish(&self) -> Result<(), FormatError> {
        if self.pos != self.buf.len() {
            return Err(FormatError::Trailing {
                trailing: self.buf.len() - self.pos,
            });
        }
        Ok(())
    }

    fn dims(&mut self, rows_what: &str) -> Result<(usize, usize), FormatError> {
        let at = self.pos;
        let (a, b) = (self.u32()? as usize, self.u32()? as usize);
        if a.checked_mul(b).is_none() {
            return Err(FormatError::Invalid {
                offset: at,
                reason: format!("{rows_what} overflow"),
            });
        }
        Ok((a, b))
    }
}

fn encode_key_vector(magic: &[u8; 8], p: &ParamProfile, sk: &SecretKey) -> Vec<u8> {
    let mut w = Writer::new(magic, Some(p));
    w.residues(sk.as_slice());
    w.buf
}

pub fn encode_secret_key(p: &ParamProfile, sk: &SecretKey) -> Vec<u8> {
    encode_key_vector(SECRET_MAGIC, p, sk)
}

pub fn decode_secret_key(
    buf: &[u8],
    expected: Option<&ParamProfile>,
) -> Result<(ParamProfile, SecretKey), FormatError> {
    decode_key_vector(SECRET_MAGIC, buf, expected)
}

pub fn encode_refresh_oracle(p: &ParamProfile, sk: &SecretKey) -> Vec<u8> {
    encode_key_vector(ORACLE_MAGIC, p, sk)
}

pub fn decode_refresh_oracle(
    buf: &[u8],
    expected: Option<&ParamProfile>,
) -> Result<(ParamProfile, SecretKey), FormatError> {
    decode_key_vector(ORACLE_MAGIC, buf, expected)
}

fn decode_key_vector(
    magic: &'static [u8; 8],
    buf: &[u8],
    expected: Option<&ParamProfile>,
) -> Result<(ParamProfile, SecretKey), FormatError> {
    let mut r = Reader::open(buf, magic, true, expected)?;
    let n = r.profile().n;
    let s = r.residues(n)?;
    r.finish()?;
    let p = r.profile.unwrap();
    let sk = SecretKey::from_vec(s, p.q);
    Ok((p, sk))
}

pub fn encode_public_key(p: &ParamProfile, pk: &PublicKey) -> Vec<u8> {
    let mut w = Writer::new(PUBLIC_MAGIC, Some(p));
    w.u32(pk.rows() as u32);
    w.u32(pk.cols() as u32);
    w.residues(pk.as_slice());
    w.buf
}

pub fn decode_public_key(
    buf: &[u8],
    expected: Option<&ParamProfile>,
) -> Result<(ParamProfile, PublicKey), FormatError> {
    let mut r = Reader::open(buf, PUBLIC_MAGIC, true, expected)?;
    let at = r.pos;
    let (rows, cols) = r.dims("rows x cols")?;
    if cols != r.profile().n {
        return Err(FormatError::Invalid {
            offset: at + 4,
            reason: format!("{cols} columns for n = {}", r.profile().n),
        });
    }
    let a = r.residues(rows * cols)?;
    r.finish()?;
    let p = r.profile.unwrap();
    let q = p.q;
    Ok((p, PublicKey::from_parts(a, rows, cols, q)))
}

pub fn encode_switching_key(p: &ParamProfile, k: &SwitchingKey) -> Vec<u8> {
    let mut w = Writer::new(SWITCH_MAGIC, Some(p));
    w.u32(k.from_dim() as u32);
    w.u32(k.to_dim() as u32);
    w.residues(k.as_slice());
    w.buf
}

pub fn decode_switching_key(
    buf: &[u8],
    expected: Option<&ParamProfile>,
) -> Result<(ParamProfile, SwitchingKey), FormatError> {
    let mut r = Reader::open(buf, SWITCH_MAGIC, true, expected)?;
    let at = r.pos;
    let (from, to) = r.dims("dimensions")?;
    let n = r.profile().n;
    if to != n || (from != n && from != n * n) {
        return Err(FormatError::Invalid {
            offset: at,
            reason: format!("switching key {from} -> {to} does not fit n = {n}"),
        });
    }
    let beta = r.profile().beta;
    let b = r.residues(from * beta as usize * to)?;
    r.finish()?;
    let p = r.profile.unwrap();
    let q = p.q;
    Ok((p, SwitchingKey::from_parts(b, from, to, beta, q)))
}

fn mode_byte(m: EmbedMode) -> u8 {
    match m {
        EmbedMode::Universal => 0,
        EmbedMode::Efficient => 1,
    }
}

pub fn encode_store(s: &CiphertextStore) -> Vec<u8> {
    let mut w = Writer::new(STORE_MAGIC, Some(&s.profile));
    w.u8(mode_byte(s.mode));
    w.u32(s.width as u32);
    w.u32(s.height as u32);
    w.u32(s.embedded as u32);
    w.bytes(&de::compress_map(&s.map));
    w.u32(s.blocks.len() as u32);
    for b in &s.blocks {
        match b {
            Block::Pixels { left, right } => {
                w.u8(0);
                w.byte(left);
                w.byte(right);
            }
            Block::Pair(p) => {
                w.u8(1);
                w.byte(&p.cx);
                w.byte(&p.cy);
            }
            Block::Hl(hl) => {
                w.u8(2);
                w.byte(&hl.ch);
                w.byte(&hl.cl);
            }
        }
    }
    w.u32(s.tail.len() as u32);
    for t in &s.tail {
        w.byte(t);
    }
    w.buf
}

pub fn decode_store(
    buf: &[u8],
    expected: Option<&ParamProfile>,
) -> Result<CiphertextStore, FormatError> {
    let mut r = Reader::open(buf, STORE_MAGIC, true, expected)?;
    let at = r.pos;
    let mode = match r.u8()? {
        0 => EmbedMode::Universal,
        1 => EmbedMode::Efficient,
        MODE_BITS => {
            return Err(FormatError::Invalid {
                offset: at,
                reason: "file holds a bit list, not an image store".into(),
            })
        }
        m => {
            return Err(FormatError::Invalid {
                offset: at,
                reason: format!("unknown mode {m}"),
            })
        }
    };
    let (width, height) = r.dims("width x height")?;
    let embedded = r.u32()? as usize;
    let map_at = r.pos + 4;
    let map = de::decompress_map(r.bytes()?)?;
    if (map.width(), map.height()) != (width, height) {
        return Err(FormatError::Invalid {
            offset: map_at,
            reason: "map shape differs from the image".into(),
        });
    }
    let count = r.u32()? as usize;
    if count != (width / 2) * height {
        return Err(FormatError::Invalid {
            offset: r.pos - 4,
            reason: format!("{count} blocks for a {width}x{height} image"),
        });
    }
    let mut blocks = Vec::with_capacity(count);
    for _ in 0..count {
        let at = r.pos;
        let kind = r.u8()?;
        let (a, b) = (r.byte()?, r.byte()?);
        blocks.push(match kind {
            0 => Block::Pixels { left: a, right: b },
            1 => Block::Pair(EncryptedPixelPair { cx: a, cy: b }),
            2 => Block::Hl(EncryptedHL { ch: a, cl: b }),
            k => {
                return Err(FormatError::Invalid {
                    offset: at,
                    reason: format!("unknown block kind {k}"),
                })
            }
        });
    }
    let tail_n = r.u32()? as usize;
    let mut tail = Vec::new();
    for _ in 0..tail_n {
        tail.push(r.byte()?);
    }
    r.finish()?;
    let store = CiphertextStore {
        profile: r.profile.unwrap(),
        mode,
        width,
        height,
        map,
        embedded,
        blocks,
        tail,
    };
    store.check().map_err(|e| FormatError::Invalid {
        offset: 0,
        reason: e.to_string(),
    })?;
    Ok(store)
}

/// A list of bit ciphertexts in a store container.
pub fn encode_bit_ciphertexts(p: &ParamProfile, bits: &[Ciphertext]) -> Vec<u8> {
    let mut w = Writer::new(STORE_MAGIC, Some(p));
    w.u8(MODE_BITS);
    w.u32(bits.len() as u32);
    for c in bits {
        w.ciphertext(c);
    }
    w.buf
}

pub fn decode_bit_ciphertexts(
    buf: &[u8],
    expected: Option<&ParamProfile>,
) -> Result<(ParamProfile, Vec<Ciphertext>), FormatError> {
    let mut r = Reader::open(buf, STORE_MAGIC, true, expected)?;
    let at = r.pos;
    if r.u8()? != MODE_BITS {
        return Err(FormatError::Invalid {
            offset: at,
            reason: "file holds an image store, not a bit list".into(),
        });
    }
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 20));
    for _ in 0..n {
        out.push(r.ciphertext()?);
    }
    r.finish()?;
    Ok((r.profile.unwrap(), out))
}

/// Whether a store container holds a bit list.
pub fn is_bit_list(buf: &[u8]) -> bool {
    let header = 8 + 2 + 4 * 4 + 8 * 3 + 4 * 2;
    buf.starts_with(STORE_MAGIC) && buf.get(header) == Some(&MODE_BITS)
}

/// Magic, version, bit count (u32), bits packed LSB first.
pub fn encode_bits(bits: &[u8]) -> Vec<u8> {
    let mut w = Writer::new(PAYLOAD_MAGIC, None);
    w.u32(bits.len() as u32);
    for chunk in bits.chunks(8) {
        w.u8(chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | ((b & 1) << i)));
    }
    w.buf
}

pub fn decode_bits(buf: &[u8]) -> Result<Vec<u8>, FormatError> {
    let mut r = Reader::open(buf, PAYLOAD_MAGIC, false, None)?;
    let n = r.u32()? as usize;
    let packed = r.take(n.div_ceil(8))?;
    r.finish()?;
    Ok((0..n).map(|i| (packed[i / 8] >> (i % 8)) & 1).collect())
}

pub fn encode_dh_key(k: &DataHidingKey) -> Vec<u8> {
    encode_bits(k.bits())
}

pub fn decode_dh_key(buf: &[u8]) -> Result<DataHidingKey, FormatError> {
    Ok(DataHidingKey::from_bits(decode_bits(buf)?))
}

pub fn encode_map(m: &AvailabilityMap) -> Vec<u8> {
    de::compress_map(m)
}

pub fn decode_map(buf: &[u8]) -> Result<AvailabilityMap, FormatError> {
    Ok(de::decompress_map(buf)?)
}

/// Whether the bytes start with the secret-key magic.
pub fn is_secret_key(buf: &[u8]) -> bool {
    buf.starts_with(SECRET_MAGIC)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<u8>, FormatError> {
    Ok(fs::read(path)?)
}

pub fn write_file(path: impl AsRef<Path>, bytes: &[u8]) -> Result<(), FormatError> {
    if let Some(dir) = path.as_ref().parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(fs::write(path, bytes)?)
}

/// Size in bytes of a store file, from its header fields alone.
pub fn store_size(p: &ParamProfile, width: usize, height: usize, map_bytes: usize) -> usize {
    let ct = 8 + p.n * p.residue_bytes();
    let header = 8 + 2 + 4 * 4 + 8 * 3 + 4 * 2;
    let blocks = (width / 2) * height;
    let tail = (width % 2) * height;
    header + 1 + 4 + 4 + 4 + 4 + map_bytes + 4 + blocks * (1 + 16 * ct) + 4 + tail * 8 * ct
}
