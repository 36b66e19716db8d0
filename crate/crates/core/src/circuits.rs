//! 8-bit ripple arithmetic over encrypted bits.
//!
//! Both circuits run eight refreshings. Refreshing `i` emits output bit `i`
//! and folds the carry (or borrow) of position `i` into every higher bit of
//! the running first operand. Each conjunction chain is evaluated from
//! scratch, so refreshing `i` (1-based) costs `sum_{mu=1}^{8-i} mu`
//! multiplications and a full circuit costs 84.

use alloc::vec::Vec;
use core::array;
use core::slice;

use rand::RngCore;

use crate::homomorphic::{EvalContext, HeError};
use crate::lwe::{self, Ciphertext, PublicKey, SecretKey};
use crate::params::ParamProfile;

/// Eight bit-ciphertexts, least significant first (`bits[0]` is bit 1).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedByte {
    pub bits: [Ciphertext; 8],
}

impl EncryptedByte {
    pub fn from_vec(bits: Vec<Ciphertext>) -> Self {
        let bits: [Ciphertext; 8] = bits
            .try_into()
            .unwrap_or_else(|v: Vec<Ciphertext>| panic!("expected 8 ciphertexts, got {}", v.len()));
        EncryptedByte { bits }
    }

    pub fn encrypt<R: RngCore + ?Sized>(
        p: &ParamProfile,
        pk: &PublicKey,
        value: u8,
        rng: &mut R,
    ) -> Self {
        EncryptedByte {
            bits: array::from_fn(|i| lwe::enc(p, pk, (value >> i) & 1, rng)),
        }
    }

    pub fn decrypt(&self, sk: &SecretKey) -> u8 {
        self.bits
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, c)| acc | (lwe::dec(sk, c) << i))
    }

    pub fn lsb(&self) -> &Ciphertext {
        &self.bits[0]
    }
}

/// `c` in bit 1 with fresh encryptions of zero above it.
pub fn lsb_byte<R: RngCore>(ctx: &mut EvalContext<'_, R>, c: Ciphertext) -> EncryptedByte {
    let mut bits = Vec::with_capacity(8);
    bits.push(c);
    for _ in 1..8 {
        bits.push(ctx.encrypt(0));
    }
    EncryptedByte::from_vec(bits)
}

/// Multiply by two: drop bit 8, shift up, `c_zero` becomes bit 1.
pub fn shl1(x: &EncryptedByte, c_zero: Ciphertext) -> EncryptedByte {
    let mut bits = Vec::with_capacity(8);
    bits.push(c_zero);
    bits.extend(x.bits[..7].iter().cloned());
    EncryptedByte::from_vec(bits)
}

/// Floor division by two: drop bit 1, shift down, `c_zero` becomes bit 8.
pub fn shr1(x: &EncryptedByte, c_zero: Ciphertext) -> EncryptedByte {
    let mut bits: Vec<Ciphertext> = x.bits[1..].to_vec();
    bits.push(c_zero);
    EncryptedByte::from_vec(bits)
}

/// Fire a refresh event over the live ciphertexts if the schedule says so.
fn checkpoint<R: RngCore>(ctx: &mut EvalContext<'_, R>, live: &mut [&mut [Ciphertext]]) {
    if ctx.refresh_due() {
        ctx.refresh_all(live.iter_mut().flat_map(|g| g.iter_mut()));
    }
}

/// Encrypted `(X + Y) mod 256`.
pub fn add8<R: RngCore>(
    ctx: &mut EvalContext<'_, R>,
    x: &EncryptedByte,
    y: &EncryptedByte,
) -> Result<EncryptedByte, HeError> {
    let mut xs: Vec<Ciphertext> = x.bits.to_vec();
    let mut ys: Vec<Ciphertext> = y.bits.to_vec();
    let mut out: Vec<Ciphertext> = Vec::with_capacity(8);

    for i in 0..8 {
        let s = ctx.hadd(&xs[i], &ys[i])?;
        out.push(s);
        ctx.counters_mut().table_adds += 1;
        checkpoint(ctx, &mut [&mut xs[i..], &mut ys[i..], &mut out]);

        // Highest position first so every chain still sees the bits as they
        // stood when this refreshing began.
        for j in (1..8 - i).rev() {
            let mut acc = ys[i].clone();
            for k in (i..i + j).rev() {
                acc = ctx.hmul(&acc, &xs[k])?;
                checkpoint(
                    ctx,
                    &mut [
                        &mut xs[i..],
                        &mut ys[i..],
                        &mut out,
                        slice::from_mut(&mut acc),
                    ],
                );
            }
            xs[i + j] = ctx.hadd(&xs[i + j], &acc)?;
            checkpoint(ctx, &mut [&mut xs[i..], &mut ys[i..], &mut out]);
        }
    }

    ctx.refresh_all(out.iter_mut());
    Ok(EncryptedByte::from_vec(out))
}

/// Encrypted `X - Y`; the caller guarantees `X >= Y`.
///
/// Bit negation is an addition of a fresh encryption of one.
pub fn sub8<R: RngCore>(
    ctx: &mut EvalContext<'_, R>,
    x: &EncryptedByte,
    y: &EncryptedByte,
) -> Result<EncryptedByte, HeError> {
    let mut ts: Vec<Ciphertext> = x.bits.to_vec();
    let mut ys: Vec<Ciphertext> = y.bits.to_vec();
    let mut out: Vec<Ciphertext> = Vec::with_capacity(8);

    for i in 0..8 {
        let d = ctx.hadd(&ts[i], &ys[i])?;
        out.push(d);
        let k8 = (8 - i) as u64;
        ctx.counters_mut().table_adds += k8 * (k8 + 1) / 2;
        checkpoint(ctx, &mut [&mut ts[i..], &mut ys[i..], &mut out]);

        for j in (1..8 - i).rev() {
            let mut acc = ys[i].clone();
            for k in (i..i + j).rev() {
                let one = ctx.encrypt(1);
                let mut not_k = ctx.hadd(&ts[k], &one)?;
                checkpoint(
                    ctx,
                    &mut [
                        &mut ts[i..],
                        &mut ys[i..],
                        &mut out,
                        slice::from_mut(&mut acc),
                        slice::from_mut(&mut not_k),
                    ],
                );
                acc = ctx.hmul(&acc, &not_k)?;
                checkpoint(
                    ctx,
                    &mut [
                        &mut ts[i..],
                        &mut ys[i..],
                        &mut out,
                        slice::from_mut(&mut acc),
                    ],
                );
            }
            ts[i + j] = ctx.hadd(&ts[i + j], &acc)?;
            checkpoint(ctx, &mut [&mut ts[i..], &mut ys[i..], &mut out]);
        }
    }

    ctx.refresh_all(out.iter_mut());
    Ok(EncryptedByte::from_vec(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homomorphic::{KeySet, NoopRefresher, OpCounters, TrustedRefresher};
    use crate::params::toy_profile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn keys(seed: u64) -> KeySet {
        KeySet::generate(&toy_profile(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn shifts() {
        let ks = keys(1);
        let p = toy_profile();
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let pk = &ks.server.public;
        let z = || lwe::enc(&p, pk, 0, &mut ChaCha8Rng::seed_from_u64(3));
        for (v, l, s) in [
            (0u8, 0u8, 0u8),
            (5, 10, 2),
            (130, 4, 65),
            (13, 26, 6),
            (255, 254, 127),
        ] {
            let e = EncryptedByte::encrypt(&p, pk, v, &mut r);
            assert_eq!(shl1(&e, z()).decrypt(&ks.secret), l);
            assert_eq!(shr1(&e, z()).decrypt(&ks.secret), s);
        }
    }

    #[test]
    fn add8_counts_match_table() {
        let ks = keys(4);
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(5));
        let p = toy_profile();
        let mut r = ChaCha8Rng::seed_from_u64(6);
        let x = EncryptedByte::encrypt(&p, &ks.server.public, 77, &mut r);
        let y = EncryptedByte::encrypt(&p, &ks.server.public, 200, &mut r);
        let s = add8(&mut ctx, &x, &y).unwrap();
        assert_eq!(s.decrypt(&ks.secret), 77u8.wrapping_add(200));
        let c = *ctx.counters();
        assert_eq!(
            (c.mults, c.keyswitches, c.refresh_events, c.pk_consumed),
            (84, 84, 9, 93)
        );
        assert_eq!(c.table_adds, 8);
        assert_eq!(c.adds, 36);
    }

    #[test]
    fn sub8_counts_match_table() {
        let ks = keys(7);
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(8));
        let p = toy_profile();
        let mut r = ChaCha8Rng::seed_from_u64(9);
        let x = EncryptedByte::encrypt(&p, &ks.server.public, 200, &mut r);
        let y = EncryptedByte::encrypt(&p, &ks.server.public, 77, &mut r);
        let d = sub8(&mut ctx, &x, &y).unwrap();
        assert_eq!(d.decrypt(&ks.secret), 123);
        let c = *ctx.counters();
        assert_eq!(
            (c.mults, c.keyswitches, c.refresh_events, c.pk_consumed),
            (84, 84, 9, 93)
        );
        assert_eq!(c.table_adds, 120);
        assert_eq!(c.adds, 120);
    }

    #[test]
    fn per_refreshing_multiplications() {
        // Run the adder refreshing by refreshing through a noop context and
        // watch the multiplication counter between output bits.
        let expected: Vec<u64> = (1..=8u64).map(|i| (8 - i) * (9 - i) / 2).collect();
        assert_eq!(expected.iter().sum::<u64>(), 84);
        let ks = keys(10);
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(1));
        let x = EncryptedByte::encrypt(
            &toy_profile(),
            &ks.server.public,
            1,
            &mut ChaCha8Rng::seed_from_u64(2),
        );
        add8(&mut ctx, &x, &x).unwrap();
        assert_eq!(ctx.counters().mults, expected.iter().sum::<u64>());
    }

    #[test]
    fn small_random_sample() {
        let ks = keys(11);
        let p = toy_profile();
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(12));
        let mut r = ChaCha8Rng::seed_from_u64(13);
        let mut total = OpCounters::default();
        for _ in 0..6 {
            let a: u8 = r.random();
            let b: u8 = r.random();
            let (hi, lo) = (a.max(b), a.min(b));
            let ea = EncryptedByte::encrypt(&p, &ks.server.public, hi, &mut r);
            let eb = EncryptedByte::encrypt(&p, &ks.server.public, lo, &mut r);
            assert_eq!(
                add8(&mut ctx, &ea, &eb).unwrap().decrypt(&ks.secret),
                hi.wrapping_add(lo)
            );
            assert_eq!(
                sub8(&mut ctx, &ea, &eb).unwrap().decrypt(&ks.secret),
                hi - lo
            );
            assert_eq!(sub8(&mut ctx, &ea, &ea).unwrap().decrypt(&ks.secret), 0);
            total.merge(&ctx.take_counters());
        }
        assert_eq!(total.mults, 6 * 3 * 84);
        assert_eq!(total.refresh_events, 6 * 3 * 9);
    }
}
