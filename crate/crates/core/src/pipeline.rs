//! Encrypted-domain reversible data hiding.
//!
//! The client encrypts an image (pixel pairs, or `(h, l)` for marked pairs
//! in the efficient mode) and hands it to the server together with the
//! availability map. The server hides one bit per marked pair by running
//! difference expansion homomorphically, then hides a second, scrambled bit
//! in the ciphertext itself by repeated key switching (KS-LSB). Nothing on
//! the server side takes a secret key.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::circuits::{add8, lsb_byte, shl1, shr1, sub8, EncryptedByte};
use crate::de::{self, AvailabilityMap, DeError, Image};
use crate::homomorphic::{key_switch, EvalContext, HeError, SwitchingKey};
use crate::lwe::{self, Ciphertext, PublicKey, SecretKey};
use crate::params::ParamProfile;

/// Default bound on KS-LSB iterations.
pub const KSLSB_CAP: u32 = 64;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    He(#[from] HeError),
    #[error(transparent)]
    De(#[from] DeError),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("payload of {bits} bits exceeds {capacity} marked pairs")]
    PayloadTooLong { bits: usize, capacity: usize },
    #[error("store already carries {0} embedded bits")]
    AlreadyEmbedded(usize),
    #[error("store block {index} does not match the map")]
    BlockMismatch { index: usize },
}

/// Marked pixel first: `cx` encrypts the larger pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedPixelPair {
    pub cx: EncryptedByte,
    pub cy: EncryptedByte,
}

/// Difference and average of a marked pair, efficient mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedHL {
    pub ch: EncryptedByte,
    pub cl: EncryptedByte,
}

/// Pseudo-random bit sequence `k`; `b_r = k XOR b_s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataHidingKey {
    bits: Vec<u8>,
}

impl DataHidingKey {
    pub fn from_bits(bits: Vec<u8>) -> Self {
        DataHidingKey {
            bits: bits.into_iter().map(|b| b & 1).collect(),
        }
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        DataHidingKey {
            bits: (0..len).map(|_| rng.random_range(0..2u8)).collect(),
        }
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

/// XOR with the key; its own inverse.
pub fn scramble(payload: &[u8], k: &DataHidingKey) -> Result<Vec<u8>, PipelineError> {
    if payload.len() != k.len() {
        return Err(PipelineError::LengthMismatch {
            left: payload.len(),
            right: k.len(),
        });
    }
    Ok(payload
        .iter()
        .zip(k.bits())
        .map(|(&p, &b)| (p ^ b) & 1)
        .collect())
}

pub fn descramble(bits: &[u8], k: &DataHidingKey) -> Result<Vec<u8>, PipelineError> {
    scramble(bits, k)
}

/// Key-switch counts of individual KS-LSB embeddings.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KsLsbStats {
    pub counts: Vec<u32>,
}

impl KsLsbStats {
    pub fn mean(&self) -> f64 {
        if self.counts.is_empty() {
            return 0.0;
        }
        self.counts.iter().map(|&c| c as f64).sum::<f64>() / self.counts.len() as f64
    }

    /// `histogram()[j]` is the number of embeds that needed `j` switches.
    pub fn histogram(&self) -> Vec<u64> {
        let max = self.counts.iter().copied().max().unwrap_or(0) as usize;
        let mut h = alloc::vec![0u64; max + 1];
        for &c in &self.counts {
            h[c as usize] += 1;
        }
        h
    }

    pub fn merge(&mut self, other: &KsLsbStats) {
        self.counts.extend_from_slice(&other.counts);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedMode {
    Universal,
    Efficient,
}

/// One encrypted pixel pair of the store.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Block {
    /// Unmarked pair, left pixel first.
    Pixels {
        left: EncryptedByte,
        right: EncryptedByte,
    },
    /// Marked pair, universal mode.
    Pair(EncryptedPixelPair),
    /// Marked pair, efficient mode.
    Hl(EncryptedHL),
}

/// Everything the client uploads: one block per pixel pair in raster order,
/// the unpaired last column (odd widths), and the availability map.
#[derive(Clone, Debug, PartialEq)]
pub struct CiphertextStore {
    pub profile: ParamProfile,
    pub mode: EmbedMode,
    pub width: usize,
    pub height: usize,
    pub map: AvailabilityMap,
    /// Number of marked pairs (in raster order) currently carrying a bit.
    pub embedded: usize,
    pub blocks: Vec<Block>,
    pub tail: Vec<EncryptedByte>,
}

impl CiphertextStore {
    pub fn marked_indices(&self) -> Vec<usize> {
        self.map
            .marked_pairs()
            .into_iter()
            .map(|(i, _)| i)
            .collect()
    }

    pub fn capacity(&self) -> usize {
        self.map.count()
    }

    /// Ciphertext carrying the KS-LSB bit of a marked block.
    pub fn designated(&self, index: usize) -> Result<&Ciphertext, PipelineError> {
        match &self.blocks[index] {
            Block::Pair(p) => Ok(&p.cx.bits[0]),
            Block::Hl(hl) => Ok(&hl.ch.bits[0]),
            Block::Pixels { .. } => Err(PipelineError::BlockMismatch { index }),
        }
    }

    /// Check block kinds against the map and mode.
    pub fn check(&self) -> Result<(), PipelineError> {
        let ppr = self.width / 2;
        if self.blocks.len() != ppr * self.height
            || self.tail.len() != (self.width % 2) * self.height
            || (self.map.width(), self.map.height()) != (self.width, self.height)
        {
            return Err(PipelineError::LengthMismatch {
                left: self.blocks.len(),
                right: ppr * self.height,
            });
        }
        let marked = self.map.marked_pairs();
        let mut next = marked.iter().peekable();
        for (i, b) in self.blocks.iter().enumerate() {
            let is_marked = next.peek().is_some_and(|&&(j, _)| j == i);
            if is_marked {
                next.next();
            }
            let ok = matches!(
                (b, is_marked, self.mode),
                (Block::Pixels { .. }, false, _)
                    | (Block::Pair(_), true, EmbedMode::Universal)
                    | (Block::Hl(_), true, EmbedMode::Efficient)
            );
            if !ok {
                return Err(PipelineError::BlockMismatch { index: i });
            }
        }
        if self.embedded > marked.len() {
            return Err(PipelineError::PayloadTooLong {
                bits: self.embedded,
                capacity: marked.len(),
            });
        }
        Ok(())
    }
}

/// Client: encrypt an image for the server.
pub fn encrypt_image<R: RngCore + ?Sized>(
    img: &Image,
    map: &AvailabilityMap,
    mode: EmbedMode,
    p: &ParamProfile,
    pk: &PublicKey,
    rng: &mut R,
) -> Result<CiphertextStore, PipelineError> {
    if (map.width(), map.height()) != (img.width(), img.height()) {
        return Err(DeError::DimensionMismatch {
            a: (img.width(), img.height()),
            b: (map.width(), map.height()),
        }
        .into());
    }
    let marked = map.marked_pairs();
    let mut next = marked.iter().peekable();
    let mut blocks = Vec::with_capacity(img.pair_count());
    for (i, pair) in de::pair_pixels(img).into_iter().enumerate() {
        let is_marked = next.peek().is_some_and(|&&(j, _)| j == i);
        if !is_marked {
            blocks.push(Block::Pixels {
                left: EncryptedByte::encrypt(p, pk, pair.x, rng),
                right: EncryptedByte::encrypt(p, pk, pair.y, rng),
            });
            continue;
        }
        let &(_, left_marked) = next.next().unwrap();
        let (big, small) = if left_marked {
            (pair.x, pair.y)
        } else {
            (pair.y, pair.x)
        };
        if big < small {
            return Err(PipelineError::BlockMismatch { index: i });
        }
        blocks.push(match mode {
            EmbedMode::Universal => Block::Pair(EncryptedPixelPair {
                cx: EncryptedByte::encrypt(p, pk, big, rng),
                cy: EncryptedByte::encrypt(p, pk, small, rng),
            }),
            EmbedMode::Efficient => {
                let h = big - small;
                let l = ((big as u16 + small as u16) / 2) as u8;
                Block::Hl(EncryptedHL {
                    ch: EncryptedByte::encrypt(p, pk, h, rng),
                    cl: EncryptedByte::encrypt(p, pk, l, rng),
                })
            }
        });
    }
    let mut tail = Vec::new();
    if img.width() % 2 == 1 {
        for row in 0..img.height() {
            tail.push(EncryptedByte::encrypt(
                p,
                pk,
                img.get(row, img.width() - 1),
                rng,
            ));
        }
    }
    Ok(CiphertextStore {
        profile: p.clone(),
        mode,
        width: img.width(),
        height: img.height(),
        map: map.clone(),
        embedded: 0,
        blocks,
        tail,
    })
}

/// Client: decrypt a store back to pixels.
pub fn decrypt_image(store: &CiphertextStore, sk: &SecretKey) -> Result<Image, PipelineError> {
    store.check()?;
    let (w, h) = (store.width, store.height);
    let mut img = Image::filled(w, h, 0);
    let left_marked: Vec<(usize, bool)> = store.map.marked_pairs();
    let mut next = left_marked.iter().peekable();
    let ppr = w / 2;
    for (i, b) in store.blocks.iter().enumerate() {
        let (row, col) = (i / ppr, 2 * (i % ppr));
        let orient = if next.peek().is_some_and(|&&(j, _)| j == i) {
            next.next().unwrap().1
        } else {
            true
        };
        let (big, small) = match b {
            Block::Pixels { left, right } => (left.decrypt(sk), right.decrypt(sk)),
            Block::Pair(pp) => (pp.cx.decrypt(sk), pp.cy.decrypt(sk)),
            Block::Hl(hl) => de::inv_diff_avg(hl.ch.decrypt(sk) as i32, hl.cl.decrypt(sk) as i32)?,
        };
        let (x, y) = if orient { (big, small) } else { (small, big) };
        img.set(row, col, x);
        img.set(row, col + 1, y);
    }
    for (row, c) in store.tail.iter().enumerate() {
        img.set(row, w - 1, c.decrypt(sk));
    }
    Ok(img)
}

fn zero<R: RngCore>(ctx: &mut EvalContext<'_, R>) -> Ciphertext {
    ctx.encrypt(0)
}

/// Universal hiding of the bit under `c_bs`.
///
/// Operands stay below 256 throughout: `l` is formed as `Y + floor(h/2)`
/// rather than from `X + Y`, and `floor((h'+1)/2)` as
/// `floor(h'/2) + LSB(h')`.
pub fn fheede_hide_universal<R: RngCore>(
    pair: &EncryptedPixelPair,
    c_bs: &Ciphertext,
    ctx: &mut EvalContext<'_, R>,
) -> Result<EncryptedPixelPair, HeError> {
    let ch = sub8(ctx, &pair.cx, &pair.cy)?;
    let z = zero(ctx);
    let cl = add8(ctx, &pair.cy, &shr1(&ch, z))?;
    let z = zero(ctx);
    let b = lsb_byte(ctx, c_bs.clone());
    let chp = add8(ctx, &shl1(&ch, z), &b)?;
    let z = zero(ctx);
    let odd = lsb_byte(ctx, chp.bits[0].clone());
    let half_up = add8(ctx, &shr1(&chp, z), &odd)?;
    let cx = add8(ctx, &cl, &half_up)?;
    let cy = sub8(ctx, &cx, &chp)?;
    Ok(EncryptedPixelPair { cx, cy })
}

/// Undo universal hiding on a marked pair.
pub fn fheede_recover_universal<R: RngCore>(
    pair: &EncryptedPixelPair,
    ctx: &mut EvalContext<'_, R>,
) -> Result<EncryptedPixelPair, HeError> {
    let chp = sub8(ctx, &pair.cx, &pair.cy)?;
    let z = zero(ctx);
    let ch = shr1(&chp, z);
    let cl = add8(ctx, &pair.cy, &ch)?;
    let one = ctx.encrypt(1);
    let one = lsb_byte(ctx, one);
    let s = add8(ctx, &ch, &one)?;
    let z = zero(ctx);
    let cx = add8(ctx, &cl, &shr1(&s, z))?;
    let cy = sub8(ctx, &cx, &ch)?;
    Ok(EncryptedPixelPair { cx, cy })
}

/// Encrypted hidden bit of a universal marked pair: `LSB(X' - Y')`.
pub fn fheede_extract<R: RngCore>(
    pair: &EncryptedPixelPair,
    ctx: &mut EvalContext<'_, R>,
) -> Result<Ciphertext, HeError> {
    let chp = sub8(ctx, &pair.cx, &pair.cy)?;
    let [b0, ..] = chp.bits;
    Ok(b0)
}

/// `h' = 2h + b`; `l` untouched.
pub fn fheede_hide_efficient<R: RngCore>(
    hl: &EncryptedHL,
    c_bs: &Ciphertext,
    ctx: &mut EvalContext<'_, R>,
) -> Result<EncryptedHL, HeError> {
    let z = zero(ctx);
    let b = lsb_byte(ctx, c_bs.clone());
    let ch = add8(ctx, &shl1(&hl.ch, z), &b)?;
    Ok(EncryptedHL {
        ch,
        cl: hl.cl.clone(),
    })
}

/// `h = floor(h'/2)`; no homomorphic operation beyond one zero encryption.
pub fn fheede_recover_efficient<R: RngCore>(
    hl: &EncryptedHL,
    ctx: &mut EvalContext<'_, R>,
) -> EncryptedHL {
    let z = zero(ctx);
    EncryptedHL {
        ch: shr1(&hl.ch, z),
        cl: hl.cl.clone(),
    }
}

pub fn fheede_extract_efficient(hl: &EncryptedHL) -> Ciphertext {
    hl.ch.bits[0].clone()
}

fn last_lsb(c: &Ciphertext) -> u8 {
    (c.last() & 1) as u8
}

/// Switch `c` with `B_LSB` until the last coordinate has LSB `b_r`.
///
/// Returns the new ciphertext and the number of switches performed.
pub fn kslsb_embed(
    c: &Ciphertext,
    b_r: u8,
    b_lsb: &SwitchingKey,
    cap: u32,
) -> Result<(Ciphertext, u32), HeError> {
    let mut cur = c.clone();
    let mut n = 0;
    while last_lsb(&cur) != b_r & 1 {
        if n == cap {
            return Err(HeError::KsLsbCapExceeded(cap));
        }
        let v = key_switch(cur.as_slice(), b_lsb)?;
        cur = Ciphertext::new(v, cur.noise_bound);
        n += 1;
    }
    Ok((cur, n))
}

/// `LSB` of the last coordinate.
pub fn kslsb_extract(c: &Ciphertext) -> u8 {
    last_lsb(c)
}

/// Server: FHEE-DE hide `b_s` in a marked block, then KS-LSB hide `b_r`.
/// Returns the KS-LSB switch count.
pub fn embed_block<R: RngCore>(
    block: &mut Block,
    b_s: u8,
    b_r: u8,
    ctx: &mut EvalContext<'_, R>,
    cap: u32,
) -> Result<u32, PipelineError> {
    let c_bs = ctx.encrypt(b_s & 1);
    let key = ctx.keys().lsb.as_ref().ok_or(HeError::MissingLsbKey)?;
    let target = match block {
        Block::Pair(p) => {
            *p = fheede_hide_universal(p, &c_bs, ctx)?;
            &mut p.cx.bits[0]
        }
        Block::Hl(hl) => {
            *hl = fheede_hide_efficient(hl, &c_bs, ctx)?;
            &mut hl.ch.bits[0]
        }
        Block::Pixels { .. } => return Err(PipelineError::BlockMismatch { index: 0 }),
    };
    let (c, n) = kslsb_embed(target, b_r, key, cap)?;
    *target = c;
    for _ in 0..n {
        ctx.count_switch();
    }
    Ok(n)
}

/// Server: hide `payload` in the first marked pairs, in map raster order.
pub fn embed_image<R: RngCore>(
    store: &mut CiphertextStore,
    payload: &[u8],
    k: &DataHidingKey,
    ctx: &mut EvalContext<'_, R>,
    cap: u32,
) -> Result<KsLsbStats, PipelineError> {
    store.check()?;
    if store.embedded != 0 {
        return Err(PipelineError::AlreadyEmbedded(store.embedded));
    }
    let marked = store.marked_indices();
    if payload.len() > marked.len() {
        return Err(PipelineError::PayloadTooLong {
            bits: payload.len(),
            capacity: marked.len(),
        });
    }
    let scrambled = scramble(payload, k)?;
    let mut stats = KsLsbStats::default();
    for ((&idx, &b_s), &b_r) in marked.iter().zip(payload).zip(&scrambled) {
        let n = embed_block(&mut store.blocks[idx], b_s, b_r, ctx, cap)?;
        stats.counts.push(n);
    }
    store.embedded = payload.len();
    Ok(stats)
}

/// Server: the scrambled KS-LSB bits, descrambled with `k`.
pub fn extract_ct(store: &CiphertextStore, k: &DataHidingKey) -> Result<Vec<u8>, PipelineError> {
    store.check()?;
    let marked = store.marked_indices();
    let mut bits = Vec::with_capacity(store.embedded);
    for &idx in &marked[..store.embedded] {
        bits.push(kslsb_extract(store.designated(idx)?));
    }
    descramble(&bits, k)
}

/// Server: undo the FHEE-DE hiding of one marked block.
pub fn recover_block<R: RngCore>(
    block: &mut Block,
    ctx: &mut EvalContext<'_, R>,
) -> Result<(), PipelineError> {
    match block {
        Block::Pair(p) => *p = fheede_recover_universal(p, ctx)?,
        Block::Hl(hl) => *hl = fheede_recover_efficient(hl, ctx),
        Block::Pixels { .. } => return Err(PipelineError::BlockMismatch { index: 0 }),
    }
    Ok(())
}

/// Server: return the store to its pre-embedding plaintext.
pub fn recover_ct<R: RngCore>(
    store: &mut CiphertextStore,
    ctx: &mut EvalContext<'_, R>,
) -> Result<(), PipelineError> {
    store.check()?;
    let marked = store.marked_indices();
    for &idx in &marked[..store.embedded] {
        recover_block(&mut store.blocks[idx], ctx)?;
    }
    store.embedded = 0;
    Ok(())
}

/// Server: encrypted hidden bit of one marked block.
pub fn extract_block<R: RngCore>(
    block: &Block,
    ctx: &mut EvalContext<'_, R>,
) -> Result<Ciphertext, PipelineError> {
    match block {
        Block::Pair(p) => Ok(fheede_extract(p, ctx)?),
        Block::Hl(hl) => Ok(fheede_extract_efficient(hl)),
        Block::Pixels { .. } => Err(PipelineError::BlockMismatch { index: 0 }),
    }
}

/// Server: encryptions of the FHEE-DE hidden bits.
pub fn extract_enc<R: RngCore>(
    store: &CiphertextStore,
    ctx: &mut EvalContext<'_, R>,
) -> Result<Vec<Ciphertext>, PipelineError> {
    store.check()?;
    let marked = store.marked_indices();
    marked[..store.embedded]
        .iter()
        .map(|&idx| extract_block(&store.blocks[idx], ctx))
        .collect()
}

/// Client: decrypt a list of bit ciphertexts.
pub fn decrypt_bits(sk: &SecretKey, bits: &[Ciphertext]) -> Vec<u8> {
    bits.iter().map(|c| lwe::dec(sk, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::de::{build_map, de_embed, EmbedConfig, PixelPair};
    use crate::homomorphic::{KeySet, NoopRefresher, TrustedRefresher};
    use crate::params::toy_profile;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn keys(seed: u64) -> KeySet {
        KeySet::generate(&toy_profile(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn enc_pair(ks: &KeySet, x: u8, y: u8, r: &mut ChaCha8Rng) -> EncryptedPixelPair {
        let p = toy_profile();
        EncryptedPixelPair {
            cx: EncryptedByte::encrypt(&p, &ks.server.public, x, r),
            cy: EncryptedByte::encrypt(&p, &ks.server.public, y, r),
        }
    }

    fn dec_pair(ks: &KeySet, p: &EncryptedPixelPair) -> (u8, u8) {
        (p.cx.decrypt(&ks.secret), p.cy.decrypt(&ks.secret))
    }

    #[test]
    fn scramble_involution() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let n = r.random_range(0..64);
            let p: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
            let k = DataHidingKey::random(n, &mut r);
            assert_eq!(descramble(&scramble(&p, &k).unwrap(), &k).unwrap(), p);
            let z = DataHidingKey::from_bits(alloc::vec![0; n]);
            assert_eq!(scramble(&p, &z).unwrap(), p);
        }
        let k = DataHidingKey::from_bits(alloc::vec![1; 3]);
        assert!(matches!(
            scramble(&[1, 0], &k),
            Err(PipelineError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn universal_hide_recover_extract_examples() {
        let ks = keys(2);
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(3));
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let p = enc_pair(&ks, 7, 5, &mut r);
        let c1 = ctx.encrypt(1);
        let h = fheede_hide_universal(&p, &c1, &mut ctx).unwrap();
        assert_eq!(dec_pair(&ks, &h), (9, 4));
        let hide_counts = ctx.take_counters();
        assert_eq!(hide_counts.mults, 6 * 84);
        let e = fheede_extract(&h, &mut ctx).unwrap();
        assert_eq!(lwe::dec(&ks.secret, &e), 1);
        assert_eq!(dec_pair(&ks, &h), (9, 4));
        let back = fheede_recover_universal(&h, &mut ctx).unwrap();
        assert_eq!(dec_pair(&ks, &back), (7, 5));

        let k = enc_pair(&ks, 200, 200, &mut r);
        let c0 = ctx.encrypt(0);
        let h = fheede_hide_universal(&k, &c0, &mut ctx).unwrap();
        assert_eq!(dec_pair(&ks, &h), (200, 200));
        let e = fheede_extract(&h, &mut ctx).unwrap();
        assert_eq!(lwe::dec(&ks.secret, &e), 0);
        assert_eq!(
            dec_pair(&ks, &fheede_recover_universal(&h, &mut ctx).unwrap()),
            (200, 200)
        );
    }

    #[test]
    fn universal_handles_large_sums() {
        // X + Y >= 256 and h' = 255 both occur here.
        let ks = keys(5);
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(6));
        let mut r = ChaCha8Rng::seed_from_u64(7);
        for (x, y, b) in [
            (250u8, 249u8, 1u8),
            (191, 64, 1),
            (128, 1, 1),
            (255, 254, 0),
        ] {
            let pair = PixelPair::new(x, y);
            let Ok(want) = de_embed(pair, b) else {
                continue;
            };
            let c = ctx.encrypt(b);
            let h = fheede_hide_universal(&enc_pair(&ks, x, y, &mut r), &c, &mut ctx).unwrap();
            assert_eq!(dec_pair(&ks, &h), (want.x, want.y), "({x},{y}) b={b}");
            let back = fheede_recover_universal(&h, &mut ctx).unwrap();
            assert_eq!(dec_pair(&ks, &back), (x, y));
        }
    }

    #[test]
    fn efficient_examples() {
        let ks = keys(8);
        let p = toy_profile();
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(9));
        let mut r = ChaCha8Rng::seed_from_u64(10);
        let hl = EncryptedHL {
            ch: EncryptedByte::encrypt(&p, &ks.server.public, 2, &mut r),
            cl: EncryptedByte::encrypt(&p, &ks.server.public, 6, &mut r),
        };
        for b in 0..2u8 {
            let c = ctx.encrypt(b);
            let before = *ctx.counters();
            let m = fheede_hide_efficient(&hl, &c, &mut ctx).unwrap();
            assert_eq!(ctx.counters().mults - before.mults, 84);
            assert_eq!(m.ch.decrypt(&ks.secret), 4 + b);
            assert_eq!(lwe::dec(&ks.secret, &fheede_extract_efficient(&m)), b);
            let mults = ctx.counters().mults;
            let back = fheede_recover_efficient(&m, &mut ctx);
            assert_eq!(ctx.counters().mults, mults);
            assert_eq!(
                (back.ch.decrypt(&ks.secret), back.cl.decrypt(&ks.secret)),
                (2, 6)
            );
        }
    }

    #[test]
    fn kslsb_postcondition_and_plaintext() {
        let ks = keys(11);
        let key = ks.server.lsb.as_ref().unwrap();
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(12));
        let mut stats = KsLsbStats::default();
        let mut r = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let m = r.random_range(0..2u8);
            let b = r.random_range(0..2u8);
            let c = ctx.encrypt(m);
            let (out, n) = kslsb_embed(&c, b, key, KSLSB_CAP).unwrap();
            assert_eq!(kslsb_extract(&out), b);
            assert_eq!(lwe::dec(&ks.secret, &out), m);
            stats.counts.push(n);
        }
        let mean = stats.mean();
        assert!((0.85..=1.15).contains(&mean), "{mean}");
        assert_eq!(stats.histogram().iter().sum::<u64>(), 1000);
    }

    #[test]
    fn kslsb_cap_exceeded() {
        let ks = keys(14);
        let key = ks.server.lsb.as_ref().unwrap();
        let p = toy_profile();
        let mut r = ChaCha8Rng::seed_from_u64(15);
        let mut c = lwe::enc(&p, &ks.server.public, 1, &mut r);
        loop {
            let b = 1 - kslsb_extract(&c);
            if let Err(e) = kslsb_embed(&c, b, key, 0) {
                assert_eq!(e, HeError::KsLsbCapExceeded(0));
                break;
            }
            c = lwe::enc(&p, &ks.server.public, 1, &mut r);
        }
    }

    fn test_image() -> Image {
        let mut r = ChaCha8Rng::seed_from_u64(16);
        let data = (0..16 * 16)
            .map(|i| (((i % 16) * 9 + (i / 16) * 5) + r.random_range(-3..=3)).clamp(0, 255) as u8)
            .collect();
        Image::new(16, 16, data).unwrap()
    }

    #[test]
    fn image_end_to_end_efficient() {
        let ks = keys(17);
        let p = toy_profile();
        let img = test_image();
        let map = build_map(&img, EmbedConfig::new(10).unwrap(), Some(24)).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(18);
        let mut store = encrypt_image(
            &img,
            &map,
            EmbedMode::Efficient,
            &p,
            &ks.server.public,
            &mut r,
        )
        .unwrap();
        assert_eq!(decrypt_image(&store, &ks.secret).unwrap(), img);
        let payload: Vec<u8> = (0..24).map(|_| r.random_range(0..2)).collect();
        let k = DataHidingKey::random(24, &mut r);
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(19));
        embed_image(&mut store, &payload, &k, &mut ctx, KSLSB_CAP).unwrap();
        assert_eq!(extract_ct(&store, &k).unwrap(), payload);
        let marked = decrypt_image(&store, &ks.secret).unwrap();
        assert_eq!(marked, de::embed_image(&img, &map, &payload).unwrap());
        let enc = extract_enc(&store, &mut ctx).unwrap();
        assert_eq!(decrypt_bits(&ks.secret, &enc), payload);
        recover_ct(&mut store, &mut ctx).unwrap();
        assert_eq!(decrypt_image(&store, &ks.secret).unwrap(), img);
    }

    #[test]
    fn empty_payload_leaves_store() {
        let ks = keys(20);
        let p = toy_profile();
        let img = test_image();
        let map = build_map(&img, EmbedConfig::new(10).unwrap(), None).unwrap();
        let mut r = ChaCha8Rng::seed_from_u64(21);
        let store = encrypt_image(
            &img,
            &map,
            EmbedMode::Universal,
            &p,
            &ks.server.public,
            &mut r,
        )
        .unwrap();
        let mut s2 = store.clone();
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(22));
        let k = DataHidingKey::from_bits(Vec::new());
        embed_image(&mut s2, &[], &k, &mut ctx, KSLSB_CAP).unwrap();
        assert_eq!(s2, store);
        let too_long = alloc::vec![0u8; map.count() + 1];
        let k = DataHidingKey::from_bits(too_long.clone());
        assert!(matches!(
            embed_image(&mut s2, &too_long, &k, &mut ctx, KSLSB_CAP),
            Err(PipelineError::PayloadTooLong { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scramble_roundtrip(bits in proptest::collection::vec(0u8..2, 0..200), seed in any::<u64>()) {
            let k = DataHidingKey::random(bits.len(), &mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(descramble(&scramble(&bits, &k).unwrap(), &k).unwrap(), bits);
        }
    }
}
