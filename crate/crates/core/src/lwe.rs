//! LWE key generation, bit encryption and decryption.
//!
//! Keys satisfy `A s = 2e (mod q)` with `s = (1, t)`, so a ciphertext
//! `c = (m, 0, .., 0) + A^T a_r` decrypts to the parity of the centered
//! inner product `<c, s>`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};

use crate::params::ParamProfile;

/// Canonical representative of `v mod q`.
#[inline]
pub fn reduce(v: i64, q: u32) -> u32 {
    v.rem_euclid(q as i64) as u32
}

/// Centered representative in `(-q/2, q/2]`.
#[inline]
pub fn centered(v: u32, q: u32) -> i64 {
    if v > q / 2 {
        v as i64 - q as i64
    } else {
        v as i64
    }
}

/// `<a, b> mod q`.
pub fn inner_mod(a: &[u32], b: &[u32], q: u32) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    let q64 = q as u64;
    let mut acc = 0u64;
    for (x, y) in a.iter().zip(b) {
        acc = (acc + (*x as u64) * (*y as u64)) % q64;
    }
    acc as u32
}

/// Draw one centered sample of the rounded Gaussian of width `sigma`.
pub fn sample_chi_centered<R: RngCore + ?Sized>(sigma: f64, rng: &mut R) -> i64 {
    let normal = Normal::new(0.0, sigma).expect("sigma must be positive and finite");
    libm::round(normal.sample(rng)) as i64
}

/// Draw one residue from the noise distribution, reduced mod `q`.
pub fn sample_chi<R: RngCore + ?Sized>(sigma: f64, q: u32, rng: &mut R) -> u32 {
    reduce(sample_chi_centered(sigma, rng), q)
}

/// Secret key `s = (1, t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SecretKey {
    s: Vec<u32>,
    q: u32,
}

impl SecretKey {
    pub fn from_vec(s: Vec<u32>, q: u32) -> Self {
        SecretKey { s, q }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    /// `s ⊗ s` in row-major order: entry `i*n + j` is `s[i] s[j]`.
    pub fn tensor_square(&self) -> Vec<u32> {
        let q = self.q as u64;
        let mut out = Vec::with_capacity(self.s.len() * self.s.len());
        for &a in &self.s {
            for &b in &self.s {
                out.push(((a as u64 * b as u64) % q) as u32);
            }
        }
        out
    }
}

/// Public key `A = (b, -W)`, stored row-major as `rows x cols`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey {
    a: Vec<u32>,
    rows: usize,
    cols: usize,
    q: u32,
}

impl PublicKey {
    pub fn from_parts(a: Vec<u32>, rows: usize, cols: usize, q: u32) -> Self {
        assert_eq!(a.len(), rows * cols, "public key shape mismatch");
        PublicKey { a, rows, cols, q }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.a[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.a
    }

    pub(crate) fn into_parts(self) -> (Vec<u32>, usize, usize) {
        (self.a, self.rows, self.cols)
    }
}

/// One encrypted bit.
///
/// `noise_bound` is a conservative bound on `|<c, s> - m|` maintained from
/// public information only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ciphertext {
    c: Vec<u32>,
    pub noise_bound: u64,
}

impl Ciphertext {
    pub fn new(c: Vec<u32>, noise_bound: u64) -> Self {
        Ciphertext { c, noise_bound }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.c
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    /// Final coordinate, the carrier of the key-switching LSB channel.
    pub fn last(&self) -> u32 {
        *self.c.last().expect("empty ciphertext")
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.c
    }
}

/// Sample `s = (1, t)` with `t` from the rounded Gaussian of width `key_sigma`.
pub fn skgen<R: RngCore + ?Sized>(p: &ParamProfile, rng: &mut R) -> SecretKey {
    let mut s = Vec::with_capacity(p.n);
    s.push(1);
    for _ in 1..p.n {
        s.push(sample_chi(p.key_sigma, p.q, rng));
    }
    SecretKey { s, q: p.q }
}

/// Generate a `rows x len(s)` matrix `A` with `A s = 2e`, the error `e`
/// drawn with width `sigma`.
pub(crate) fn pkgen_rows<R: RngCore + ?Sized>(
    rows: usize,
    s: &[u32],
    q: u32,
    sigma: f64,
    rng: &mut R,
) -> PublicKey {
    let n = s.len();
    let q64 = q as u64;
    let mut a = vec![0u32; rows * n];
    for row in a.chunks_exact_mut(n) {
        // b = W t + 2e, stored as (b, -W).
        let mut acc = 0u64;
        for (j, slot) in row.iter_mut().enumerate().skip(1) {
            let w: u32 = rng.random_range(0..q);
            acc = (acc + w as u64 * s[j] as u64) % q64;
            *slot = if w == 0 { 0 } else { q - w };
        }
        let e = sample_chi_centered(sigma, rng);
        row[0] = reduce(acc as i64 + 2 * e, q);
    }
    PublicKey {
        a,
        rows,
        cols: n,
        q,
    }
}

/// Public key for `sk` under profile `p`.
pub fn pkgen<R: RngCore + ?Sized>(p: &ParamProfile, sk: &SecretKey, rng: &mut R) -> PublicKey {
    pkgen_rows(p.d, &sk.s, p.q, p.sigma, rng)
}

/// Static bound on the noise of a fresh encryption: `2 * d * 8 sigma / 2`.
pub fn fresh_noise_bound(p: &ParamProfile) -> u64 {
    libm::ceil(8.0 * p.sigma * p.d as f64) as u64
}

/// Encrypt one bit under `pk`.
pub fn enc<R: RngCore + ?Sized>(
    p: &ParamProfile,
    pk: &PublicKey,
    m: u8,
    rng: &mut R,
) -> Ciphertext {
    let mask: Vec<bool> = (0..pk.rows).map(|_| rng.random::<bool>()).collect();
    enc_with_mask(p, pk, m, &mask)
}

/// Encrypt with a caller-chosen selector `a_r`.
///
/// Exposed for tests that need a noiseless or otherwise controlled
/// ciphertext; production paths use [`enc`].
pub fn enc_with_mask(p: &ParamProfile, pk: &PublicKey, m: u8, mask: &[bool]) -> Ciphertext {
    assert!(m <= 1, "plaintext must be a bit");
    assert_eq!(mask.len(), pk.rows, "selector length must equal d");
    let n = pk.cols;
    let mut acc = vec![0u64; n];
    acc[0] = m as u64;
    for (i, _) in mask.iter().enumerate().filter(|(_, &on)| on) {
        for (slot, &v) in acc.iter_mut().zip(pk.row(i)) {
            *slot += v as u64;
        }
    }
    let q = pk.q as u64;
    let c = acc.into_iter().map(|v| (v % q) as u32).collect();
    let bound = if mask.iter().any(|&b| b) {
        fresh_noise_bound(p)
    } else {
        0
    };
    Ciphertext::new(c, bound)
}

/// Decrypt: parity of the centered representative of `<c, s>`.
pub fn dec(sk: &SecretKey, ct: &Ciphertext) -> u8 {
    assert_eq!(ct.len(), sk.len(), "ciphertext length does not match key");
    let v = centered(inner_mod(&ct.c, &sk.s, sk.q), sk.q);
    v.rem_euclid(2) as u8
}

/// Binary decomposition `(u_0, .., u_{beta-1})`, each `u_j` of length `x.len()`.
///
/// Output index `j * N + i` holds bit `j` of `x[i]`.
pub fn bit_decompose(x: &[u32], beta: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(x.len() * beta as usize);
    for j in 0..beta {
        out.extend(x.iter().map(|&v| ((v >> j) & 1) as u8));
    }
    out
}

/// Inverse of [`bit_decompose`]: `sum_j 2^j u_j mod q`.
pub fn recompose(bits: &[u8], beta: u32, q: u32) -> Vec<u32> {
    let n = bits.len() / beta as usize;
    let mut out = vec![0u64; n];
    for (j, chunk) in bits.chunks_exact(n).enumerate() {
        for (slot, &b) in out.iter_mut().zip(chunk) {
            *slot += (b as u64) << j;
        }
    }
    out.into_iter().map(|v| (v % q as u64) as u32).collect()
}

/// `(x, 2x, 4x, .., 2^{beta-1} x) mod q`, same layout as [`bit_decompose`].
pub fn powersof(x: &[u32], beta: u32, q: u32) -> Vec<u32> {
    let q64 = q as u64;
    let mut out = Vec::with_capacity(x.len() * beta as usize);
    let mut scale = 1u64;
    for _ in 0..beta {
        out.extend(x.iter().map(|&v| ((v as u64 * scale) % q64) as u32));
        scale = (scale * 2) % q64;
    }
    out
}

/// Exact noise `|centered(<c, s>) - m|`. Needs the secret key, so it only
/// exists for tests.
#[cfg(any(test, feature = "noise-oracle"))]
pub fn noise_of(sk: &SecretKey, ct: &Ciphertext, m: u8) -> u64 {
    let v = centered(inner_mod(&ct.c, &sk.s, sk.q), sk.q);
    (v - m as i64).unsigned_abs()
}
