//! Difference expansion on plaintext images.
//!
//! A pair `(X, Y)` is oriented so that `X` is the larger pixel (the left one
//! on ties). With `h = X - Y` and `l = floor((X + Y) / 2)`, one bit is
//! embedded as `h' = 2h + b` and the pair is rebuilt from `(h', l)`.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DeError {
    #[error("image buffer holds {got} samples, expected {width}x{height}")]
    BadImageSize {
        width: usize,
        height: usize,
        got: usize,
    },
    #[error("dimension mismatch: {a:?} vs {b:?}")]
    DimensionMismatch {
        a: (usize, usize),
        b: (usize, usize),
    },
    #[error("pixel pair ({x}, {y}) outside [0, 255]")]
    OutOfRange { x: i32, y: i32 },
    #[error("pair ({x}, {y}) cannot carry a bit without overflow")]
    Unavailable { x: u8, y: u8 },
    #[error("h_fid = {0} exceeds 127")]
    FidelityTooLarge(u32),
    #[error("requested {requested} pairs but only {available} are available")]
    TargetTooLarge { requested: usize, available: usize },
    #[error("payload of {bits} bits exceeds {capacity} marked pairs")]
    PayloadTooLong { bits: usize, capacity: usize },
    #[error("malformed map stream at byte {offset}: {reason}")]
    MalformedMap { offset: usize, reason: &'static str },
}

/// Row-major 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, DeError> {
        if data.len() != width * height {
            return Err(DeError::BadImageSize {
                width,
                height,
                got: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Image {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: u8) {
        self.data[row * self.width + col] = v;
    }

    /// Pairs per row; an odd last column is left unpaired.
    pub fn pairs_per_row(&self) -> usize {
        self.width / 2
    }

    pub fn pair_count(&self) -> usize {
        self.pairs_per_row() * self.height
    }

    fn same_shape(&self, other: &Image) -> Result<(), DeError> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(DeError::DimensionMismatch {
                a: (self.width, self.height),
                b: (other.width, other.height),
            });
        }
        Ok(())
    }
}

/// Two horizontally adjacent pixels; `(row, col)` locates the left one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelPair {
    pub x: u8,
    pub y: u8,
    pub row: usize,
    pub col: usize,
}

impl PixelPair {
    pub fn new(x: u8, y: u8) -> Self {
        PixelPair {
            x,
            y,
            row: 0,
            col: 0,
        }
    }

    /// Whether the left pixel is the marked ("bigger") one.
    pub fn left_is_bigger(&self) -> bool {
        self.x >= self.y
    }

    /// `(bigger, smaller)`.
    pub fn oriented(&self) -> (u8, u8) {
        if self.left_is_bigger() {
            (self.x, self.y)
        } else {
            (self.y, self.x)
        }
    }

    fn with_oriented(&self, big: u8, small: u8, left_big: bool) -> PixelPair {
        let (x, y) = if left_big { (big, small) } else { (small, big) };
        PixelPair { x, y, ..*self }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbedConfig {
    h_fid: u8,
}

impl EmbedConfig {
    pub const MAX_H_FID: u32 = 127;

    pub fn new(h_fid: u32) -> Result<Self, DeError> {
        if h_fid > Self::MAX_H_FID {
            return Err(DeError::FidelityTooLarge(h_fid));
        }
        Ok(EmbedConfig { h_fid: h_fid as u8 })
    }

    pub fn h_fid(&self) -> u32 {
        self.h_fid as u32
    }
}

/// `(X - Y, floor((X + Y) / 2))` on the pair as given.
pub fn diff_avg(p: PixelPair) -> (i32, i32) {
    let (x, y) = (p.x as i32, p.y as i32);
    (x - y, (x + y).div_euclid(2))
}

/// `X = l + floor((h+1)/2)`, `Y = l - floor(h/2)`.
pub fn inv_diff_avg(h: i32, l: i32) -> Result<(u8, u8), DeError> {
    let x = l + (h + 1).div_euclid(2);
    let y = l - h.div_euclid(2);
    if !(0..=255).contains(&x) || !(0..=255).contains(&y) {
        return Err(DeError::OutOfRange { x, y });
    }
    Ok((x as u8, y as u8))
}

/// `min(2(255 - l), 2l + 1)`.
fn expansion_bound(l: i32) -> i32 {
    (2 * (255 - l)).min(2 * l + 1)
}

/// Overflow constraints for an oriented pair (`h >= 0`): `h` and `2h + b`
/// stay within the bound for both bits.
fn expandable(h: i32, l: i32) -> bool {
    let bound = expansion_bound(l);
    h <= bound && 2 * h < bound
}

/// Overflow constraints plus `|h| <= h_fid`.
pub fn is_available(p: PixelPair, cfg: EmbedConfig) -> bool {
    let (big, small) = p.oriented();
    let h = big as i32 - small as i32;
    let (_, l) = diff_avg(p);
    h <= cfg.h_fid() as i32 && expandable(h, l)
}

/// Horizontal pairs in raster order: columns `(0,1), (2,3), ...` of each row.
pub fn pair_pixels(img: &Image) -> Vec<PixelPair> {
    let mut out = Vec::with_capacity(img.pair_count());
    for row in 0..img.height {
        for k in 0..img.pairs_per_row() {
            let col = 2 * k;
            out.push(PixelPair {
                x: img.get(row, col),
                y: img.get(row, col + 1),
                row,
                col,
            });
        }
    }
    out
}

/// Image-shaped bitmask with one set bit (on the larger pixel) per selected pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AvailabilityMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl AvailabilityMap {
    pub fn empty(width: usize, height: usize) -> Self {
        AvailabilityMap {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    /// Accepts a raw bitmask if no pair has both pixels set and no unpaired
    /// column is set.
    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, DeError> {
        if bits.len() != width * height {
            return Err(DeError::BadImageSize {
                width,
                height,
                got: bits.len(),
            });
        }
        let m = AvailabilityMap {
            width,
            height,
            bits,
        };
        for row in 0..height {
            if width % 2 == 1 && m.get(row, width - 1) {
                return Err(DeError::MalformedMap {
                    offset: row * width + width - 1,
                    reason: "unpaired column marked",
                });
            }
            for k in 0..width / 2 {
                if m.get(row, 2 * k) && m.get(row, 2 * k + 1) {
                    return Err(DeError::MalformedMap {
                        offset: row * width + 2 * k,
                        reason: "both pixels of a pair marked",
                    });
                }
            }
        }
        Ok(m)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    fn mark(&mut self, p: &PixelPair) {
        let col = if p.left_is_bigger() { p.col } else { p.col + 1 };
        self.bits[p.row * self.width + col] = true;
    }

    /// Marked pairs in raster order as `(pair index, left pixel marked)`.
    pub fn marked_pairs(&self) -> Vec<(usize, bool)> {
        let ppr = self.width / 2;
        let mut out = Vec::new();
        for row in 0..self.height {
            for k in 0..ppr {
                let (l, r) = (self.get(row, 2 * k), self.get(row, 2 * k + 1));
                if l || r {
                    out.push((row * ppr + k, l));
                }
            }
        }
        out
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Mark every available pair, or the `target_ec` available pairs with the
/// smallest `|h|` (ties in raster order).
pub fn build_map(
    img: &Image,
    cfg: EmbedConfig,
    target_ec: Option<usize>,
) -> Result<AvailabilityMap, DeError> {
    let mut avail: Vec<(u8, PixelPair)> = pair_pixels(img)
        .into_iter()
        .filter(|p| is_available(*p, cfg))
        .map(|p| (p.x.abs_diff(p.y), p))
        .collect();
    if let Some(t) = target_ec {
        if t > avail.len() {
            return Err(DeError::TargetTooLarge {
                requested: t,
                available: avail.len(),
            });
        }
        // Stable sort keeps raster order among equal |h|.
        avail.sort_by_key(|(h, _)| *h);
        avail.truncate(t);
    }
    let mut m = AvailabilityMap::empty(img.width, img.height);
    for (_, p) in &avail {
        m.mark(p);
    }
    Ok(m)
}

/// Embed bit `b` into an expandable pair, keeping its orientation.
pub fn de_embed(p: PixelPair, b: u8) -> Result<PixelPair, DeError> {
    let left_big = p.left_is_bigger();
    let (big, small) = p.oriented();
    let h = big as i32 - small as i32;
    let (_, l) = diff_avg(p);
    if !expandable(h, l) {
        return Err(DeError::Unavailable { x: p.x, y: p.y });
    }
    let (x, y) = inv_diff_avg(2 * h + (b & 1) as i32, l)?;
    Ok(p.with_oriented(x, y, left_big))
}

/// `LSB(h')` on the oriented pair.
pub fn de_extract(p: PixelPair) -> u8 {
    let (big, small) = p.oriented();
    (big - small) & 1
}

/// Undo [`de_embed`]: `h = floor(h'/2)`, `l` unchanged.
pub fn de_recover(p: PixelPair) -> Result<PixelPair, DeError> {
    let left_big = p.left_is_bigger();
    let (big, small) = p.oriented();
    let hp = big as i32 - small as i32;
    let (_, l) = diff_avg(p);
    let (x, y) = inv_diff_avg(hp.div_euclid(2), l)?;
    Ok(p.with_oriented(x, y, left_big))
}

fn check_payload(map: &AvailabilityMap, bits: usize) -> Result<Vec<(usize, bool)>, DeError> {
    let mut marked = map.marked_pairs();
    if bits > marked.len() {
        return Err(DeError::PayloadTooLong {
            bits,
            capacity: marked.len(),
        });
    }
    marked.truncate(bits);
    Ok(marked)
}

fn pair_at(img: &Image, index: usize) -> PixelPair {
    let ppr = img.pairs_per_row();
    let (row, col) = (index / ppr, 2 * (index % ppr));
    PixelPair {
        x: img.get(row, col),
        y: img.get(row, col + 1),
        row,
        col,
    }
}

fn put_pair(img: &mut Image, p: &PixelPair) {
    img.set(p.row, p.col, p.x);
    img.set(p.row, p.col + 1, p.y);
}

/// Embed `bits` into the first `bits.len()` marked pairs in raster order.
pub fn embed_image(img: &Image, map: &AvailabilityMap, bits: &[u8]) -> Result<Image, DeError> {
    check_map_shape(img, map)?;
    let mut out = img.clone();
    for (&(idx, _), &b) in check_payload(map, bits.len())?.iter().zip(bits) {
        let p = de_embed(pair_at(img, idx), b)?;
        put_pair(&mut out, &p);
    }
    Ok(out)
}

/// Bits carried by the first `n` marked pairs.
pub fn extract_image(img: &Image, map: &AvailabilityMap, n: usize) -> Result<Vec<u8>, DeError> {
    check_map_shape(img, map)?;
    Ok(check_payload(map, n)?
        .iter()
        .map(|&(idx, _)| de_extract(pair_at(img, idx)))
        .collect())
}

/// Restore the first `n` marked pairs.
pub fn recover_image(img: &Image, map: &AvailabilityMap, n: usize) -> Result<Image, DeError> {
    check_map_shape(img, map)?;
    let mut out = img.clone();
    for &(idx, _) in &check_payload(map, n)? {
        let p = de_recover(pair_at(img, idx))?;
        put_pair(&mut out, &p);
    }
    Ok(out)
}

fn check_map_shape(img: &Image, map: &AvailabilityMap) -> Result<(), DeError> {
    if (img.width, img.height) != (map.width, map.height) {
        return Err(DeError::DimensionMismatch {
            a: (img.width, img.height),
            b: (map.width, map.height),
        });
    }
    Ok(())
}

/// `10 log10(255^2 / MSE)`; infinite for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64, DeError> {
    a.same_shape(b)?;
    let sse: u64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(&u, &v)| {
            let d = u as i64 - v as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.data.len() as f64;
    Ok(10.0 * libm::log10(255.0 * 255.0 / mse))
}

pub const MAP_MAGIC: &[u8; 8] = b"FHEDMAP1";

fn put_leb128(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn get_leb128(buf: &[u8], pos: &mut usize) -> Result<u64, DeError> {
    let start = *pos;
    let mut v = 0u64;
    let mut shift = 0u32;
    loop {
        let Some(&byte) = buf.get(*pos) else {
            return Err(DeError::MalformedMap {
                offset: start,
                reason: "truncated run length",
            });
        };
        *pos += 1;
        if shift >= 63 && byte > 1 {
            return Err(DeError::MalformedMap {
                offset: start,
                reason: "run length overflows",
            });
        }
        v |= ((byte & 0x7f) as u64) << shift;
        if byte & 0x80 == 0 {
            return Ok(v);
        }
        shift += 7;
    }
}

/// Magic, width and height (u32 LE), then alternating run lengths as LEB128
/// starting with a run of zeros.
pub fn compress_map(m: &AvailabilityMap) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAP_MAGIC);
    out.extend_from_slice(&(m.width as u32).to_le_bytes());
    out.extend_from_slice(&(m.height as u32).to_le_bytes());
    let mut current = false;
    let mut run = 0u64;
    for &b in &m.bits {
        if b == current {
            run += 1;
        } else {
            put_leb128(&mut out, run);
            current = b;
            run = 1;
        }
    }
    if run > 0 || m.bits.is_empty() {
        put_leb128(&mut out, run);
    }
    out
}

pub fn decompress_map(buf: &[u8]) -> Result<AvailabilityMap, DeError> {
    if buf.len() < 16 {
        return Err(DeError::MalformedMap {
            offset: buf.len(),
            reason: "truncated header",
        });
    }
    if &buf[..8] != MAP_MAGIC {
        return Err(DeError::MalformedMap {
            offset: 0,
            reason: "bad magic",
        });
    }
    let width = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    let total = width.checked_mul(height).ok_or(DeError::MalformedMap {
        offset: 8,
        reason: "dimensions overflow",
    })?;
    let mut bits = Vec::with_capacity(total.min(1 << 26));
    let mut pos = 16;
    let mut current = false;
    let mut first = true;
    while pos < buf.len() {
        let at = pos;
        let run = get_leb128(buf, &mut pos)?;
        if run == 0 && !first {
            return Err(DeError::MalformedMap {
                offset: at,
                reason: "empty run",
            });
        }
        if run > (total - bits.len()) as u64 {
            return Err(DeError::MalformedMap {
                offset: at,
                reason: "runs exceed map size",
            });
        }
        bits.extend(core::iter::repeat_n(current, run as usize));
        current = !current;
        first = false;
    }
    if bits.len() != total {
        return Err(DeError::MalformedMap {
            offset: buf.len(),
            reason: "runs shorter than map size",
        });
    }
    AvailabilityMap::from_bits(width, height, bits)
}
