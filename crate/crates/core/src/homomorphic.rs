//! Homomorphic gates, key switching and noise refresh.
//!
//! Addition of ciphertexts is XOR on plaintexts. Multiplication forms the
//! tensor product (a ciphertext under `s ⊗ s`, length `n^2`) and is always
//! followed by a key switch back to `s`. A refresh event replaces each
//! designated live ciphertext by one carrying fresh-encryption noise; the
//! [`EvalContext`] tracks when one is due.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;
use core::ops::AddAssign;

use rand::RngCore;

use crate::lwe::{self, Ciphertext, PublicKey, SecretKey};
use crate::params::ParamProfile;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum HeError {
    #[error("ciphertext lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("key switch expects input of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no tensor switching key installed")]
    MissingTensorKey,
    #[error("no LSB switching key installed")]
    MissingLsbKey,
    #[error("KS-LSB embedding did not converge within {0} key switches")]
    KsLsbCapExceeded(u32),
}

/// Matrix `B` with `(from_dim * beta)` rows and `to_dim` columns.
///
/// Row `j * from_dim + i` pairs with bit `j` of input coordinate `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SwitchingKey {
    b: Vec<u32>,
    from_dim: usize,
    to_dim: usize,
    beta: u32,
    q: u32,
}

impl SwitchingKey {
    pub fn from_parts(b: Vec<u32>, from_dim: usize, to_dim: usize, beta: u32, q: u32) -> Self {
        assert_eq!(
            b.len(),
            from_dim * beta as usize * to_dim,
            "switching key shape mismatch"
        );
        SwitchingKey {
            b,
            from_dim,
            to_dim,
            beta,
            q,
        }
    }

    pub fn from_dim(&self) -> usize {
        self.from_dim
    }

    pub fn to_dim(&self) -> usize {
        self.to_dim
    }

    pub fn rows(&self) -> usize {
        self.from_dim * self.beta as usize
    }

    pub fn beta(&self) -> u32 {
        self.beta
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.b[r * self.to_dim..(r + 1) * self.to_dim]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.b
    }
}

/// `B = A_temp + Powersof(s1)` in the first column, `A_temp` a public key
/// for `s2` with `from_dim * beta` rows.
pub fn switch_kgen<R: RngCore + ?Sized>(
    s1: &[u32],
    s2: &SecretKey,
    p: &ParamProfile,
    rng: &mut R,
) -> SwitchingKey {
    let rows = s1.len() * p.beta as usize;
    let temp = lwe::pkgen_rows(rows, s2.as_slice(), p.q, p.sigma, rng);
    let (mut b, _, cols) = temp.into_parts();
    let pw = lwe::powersof(s1, p.beta, p.q);
    for (r, w) in pw.into_iter().enumerate() {
        let slot = &mut b[r * cols];
        *slot = ((*slot as u64 + w as u64) % p.q as u64) as u32;
    }
    SwitchingKey::from_parts(b, s1.len(), cols, p.beta, p.q)
}

/// `BitDe(x)^T B mod q`, without counting.
pub fn key_switch(long_ct: &[u32], key: &SwitchingKey) -> Result<Vec<u32>, HeError> {
    if long_ct.len() != key.from_dim {
        return Err(HeError::DimensionMismatch {
            expected: key.from_dim,
            got: long_ct.len(),
        });
    }
    let mut acc = vec![0u64; key.to_dim];
    for j in 0..key.beta {
        let base = j as usize * key.from_dim;
        for (i, &x) in long_ct.iter().enumerate() {
            if (x >> j) & 1 == 1 {
                for (a, &v) in acc.iter_mut().zip(key.row(base + i)) {
                    *a += v as u64;
                }
            }
        }
    }
    let q = key.q as u64;
    Ok(acc.into_iter().map(|v| (v % q) as u32).collect())
}

/// Ciphertext under `s ⊗ s`, row-major: entry `i*n + j` is `c1[i] c2[j]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorCiphertext {
    pub v: Vec<u32>,
}

pub fn tensor(c1: &Ciphertext, c2: &Ciphertext, q: u32) -> Result<TensorCiphertext, HeError> {
    if c1.len() != c2.len() {
        return Err(HeError::LengthMismatch {
            left: c1.len(),
            right: c2.len(),
        });
    }
    let q = q as u64;
    let mut v = Vec::with_capacity(c1.len() * c2.len());
    for &a in c1.as_slice() {
        for &b in c2.as_slice() {
            v.push(((a as u64 * b as u64) % q) as u32);
        }
    }
    Ok(TensorCiphertext { v })
}

/// Operation accounting.
///
/// `table_adds` follows the per-refreshing addition formulas tabulated for
/// the ripple circuits; `adds` is every homomorphic addition performed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub adds: u64,
    pub table_adds: u64,
    pub mults: u64,
    pub keyswitches: u64,
    pub refresh_events: u64,
    pub pk_consumed: u64,
}

impl OpCounters {
    pub fn merge(&mut self, other: &OpCounters) {
        *self += *other;
    }

    /// One `name=value` line per metric.
    pub fn report(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.fields() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn fields(&self) -> [(&'static str, u64); 6] {
        [
            ("adds", self.adds),
            ("table_adds", self.table_adds),
            ("mults", self.mults),
            ("keyswitches", self.keyswitches),
            ("refresh_events", self.refresh_events),
            ("pk_consumed", self.pk_consumed),
        ]
    }

    /// Parse the output of [`OpCounters::report`]. Unknown keys are ignored.
    pub fn parse_report(text: &str) -> Option<OpCounters> {
        let mut c = OpCounters::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=')?;
            let v: u64 = v.trim().parse().ok()?;
            match k.trim() {
                "adds" => c.adds = v,
                "table_adds" => c.table_adds = v,
                "mults" => c.mults = v,
                "keyswitches" => c.keyswitches = v,
                "refresh_events" => c.refresh_events = v,
                "pk_consumed" => c.pk_consumed = v,
                _ => {}
            }
        }
        Some(c)
    }
}

impl AddAssign for OpCounters {
    fn add_assign(&mut self, o: OpCounters) {
        self.adds += o.adds;
        self.table_adds += o.table_adds;
        self.mults += o.mults;
        self.keyswitches += o.keyswitches;
        self.refresh_events += o.refresh_events;
        self.pk_consumed += o.pk_consumed;
    }
}

/// Replaces a noisy ciphertext by one of the same plaintext.
pub trait Refresher: Send + Sync {
    fn refresh(
        &self,
        ct: &Ciphertext,
        p: &ParamProfile,
        pk: &PublicKey,
        rng: &mut dyn RngCore,
    ) -> Ciphertext;
}

/// Decrypt-and-re-encrypt stand-in for bootstrapping.
///
/// Simulation only: it holds the secret key, so it must never be installed
/// on a server that is not trusted with the plaintext.
pub struct TrustedRefresher {
    sk: SecretKey,
}

impl TrustedRefresher {
    pub fn new(sk: SecretKey) -> Self {
        TrustedRefresher { sk }
    }
}

impl Refresher for TrustedRefresher {
    fn refresh(
        &self,
        ct: &Ciphertext,
        p: &ParamProfile,
        pk: &PublicKey,
        rng: &mut dyn RngCore,
    ) -> Ciphertext {
        let m = lwe::dec(&self.sk, ct);
        lwe::enc(p, pk, m, rng)
    }
}

/// Leaves ciphertexts untouched; events are still counted.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoopRefresher;

impl Refresher for NoopRefresher {
    fn refresh(
        &self,
        ct: &Ciphertext,
        _p: &ParamProfile,
        _pk: &PublicKey,
        _rng: &mut dyn RngCore,
    ) -> Ciphertext {
        ct.clone()
    }
}

/// Everything a server may hold: no secret key.
#[derive(Clone, Debug)]
pub struct ServerKeys {
    pub profile: ParamProfile,
    pub public: PublicKey,
    /// `SwitchKGen(s ⊗ s, s)`, needed by multiplication.
    pub tensor: Option<SwitchingKey>,
    /// `SwitchKGen(s, s)`, needed by KS-LSB embedding.
    pub lsb: Option<SwitchingKey>,
}

/// Client-side key material.
pub struct KeySet {
    pub secret: SecretKey,
    pub server: ServerKeys,
}

impl KeySet {
    /// Generate the secret key, public key and both switching keys.
    pub fn generate<R: RngCore + ?Sized>(p: &ParamProfile, rng: &mut R) -> KeySet {
        let secret = lwe::skgen(p, rng);
        let public = lwe::pkgen(p, &secret, rng);
        let tensor = switch_kgen(&secret.tensor_square(), &secret, p, rng);
        let lsb = switch_kgen(secret.as_slice(), &secret, p, rng);
        KeySet {
            secret,
            server: ServerKeys {
                profile: p.clone(),
                public,
                tensor: Some(tensor),
                lsb: Some(lsb),
            },
        }
    }
}

impl KeySet {
    /// Number of key rows whose error term is nonzero.
    ///
    /// Without a refresher that removes noise, encrypted circuits only stay
    /// exact when this is zero.
    pub fn nonzero_errors(&self) -> usize {
        let s = self.secret.as_slice();
        let q = self.secret.modulus();
        let pk = &self.server.public;
        let mut n = (0..pk.rows())
            .filter(|&r| lwe::inner_mod(pk.row(r), s, q) != 0)
            .count();
        for (key, from) in [
            (self.server.tensor.as_ref(), self.secret.tensor_square()),
            (self.server.lsb.as_ref(), s.to_vec()),
        ] {
            let Some(key) = key else { continue };
            let pw = lwe::powersof(&from, key.beta(), q);
            n += (0..key.rows())
                .filter(|&r| lwe::inner_mod(key.row(r), s, q) != pw[r])
                .count();
        }
        n
    }
}

/// Noise added by one switch from dimension `from_dim`: `from_dim * beta * 2 * 8 sigma`.
pub fn switch_noise_bound(p: &ParamProfile, from_dim: usize) -> u64 {
    libm::ceil(from_dim as f64 * p.beta as f64 * 16.0 * p.sigma) as u64
}

/// Evaluation state: keys, refresher, randomness, counters and the refresh
/// schedule. One writer per context; counters of independent contexts can
/// be merged.
pub struct EvalContext<'k, R> {
    keys: &'k ServerKeys,
    refresher: &'k dyn Refresher,
    rng: R,
    counters: OpCounters,
    mults_since: u32,
    adds_since: u32,
}

impl<'k, R: RngCore> EvalContext<'k, R> {
    pub fn new(keys: &'k ServerKeys, refresher: &'k dyn Refresher, rng: R) -> Self {
        EvalContext {
            keys,
            refresher,
            rng,
            counters: OpCounters::default(),
            mults_since: 0,
            adds_since: 0,
        }
    }

    pub fn profile(&self) -> &ParamProfile {
        &self.keys.profile
    }

    pub fn keys(&self) -> &'k ServerKeys {
        self.keys
    }

    pub fn counters(&self) -> &OpCounters {
        &self.counters
    }

    pub(crate) fn counters_mut(&mut self) -> &mut OpCounters {
        &mut self.counters
    }

    pub fn take_counters(&mut self) -> OpCounters {
        core::mem::take(&mut self.counters)
    }

    pub fn rng(&mut self) -> &mut R {
        &mut self.rng
    }

    /// Fresh encryption under the public key.
    pub fn encrypt(&mut self, m: u8) -> Ciphertext {
        lwe::enc(&self.keys.profile, &self.keys.public, m, &mut self.rng)
    }

    /// XOR gate.
    pub fn hadd(&mut self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, HeError> {
        if c1.len() != c2.len() {
            return Err(HeError::LengthMismatch {
                left: c1.len(),
                right: c2.len(),
            });
        }
        let q = self.keys.profile.q;
        let v = c1
            .as_slice()
            .iter()
            .zip(c2.as_slice())
            .map(|(&a, &b)| ((a as u64 + b as u64) % q as u64) as u32)
            .collect();
        self.counters.adds += 1;
        self.adds_since += 1;
        Ok(Ciphertext::new(
            v,
            c1.noise_bound.saturating_add(c2.noise_bound),
        ))
    }

    /// AND gate: tensor product followed by a switch back to `s`.
    pub fn hmul(&mut self, c1: &Ciphertext, c2: &Ciphertext) -> Result<Ciphertext, HeError> {
        let key = self.keys.tensor.as_ref().ok_or(HeError::MissingTensorKey)?;
        let t = tensor(c1, c2, self.keys.profile.q)?;
        let (b1, b2) = (c1.noise_bound, c2.noise_bound);
        let prod = b1.saturating_add(b2).saturating_add(b1.saturating_mul(b2));
        let out = key_switch(&t.v, key)?;
        self.counters.mults += 1;
        self.mults_since += 1;
        self.count_switch();
        let bound = prod.saturating_add(switch_noise_bound(&self.keys.profile, key.from_dim));
        Ok(Ciphertext::new(out, bound))
    }

    /// Counted key switch with the LSB key `SwitchKGen(s, s)`.
    pub fn lsb_switch(&mut self, c: &Ciphertext) -> Result<Ciphertext, HeError> {
        let key = self.keys.lsb.as_ref().ok_or(HeError::MissingLsbKey)?;
        let out = key_switch(c.as_slice(), key)?;
        self.count_switch();
        let bound = c
            .noise_bound
            .saturating_add(switch_noise_bound(&self.keys.profile, key.from_dim));
        Ok(Ciphertext::new(out, bound))
    }

    pub(crate) fn count_switch(&mut self) {
        self.counters.keyswitches += 1;
        self.counters.pk_consumed += 1;
    }

    /// Whether the multiplication or addition interval has been reached.
    pub fn refresh_due(&self) -> bool {
        let p = &self.keys.profile;
        self.mults_since >= p.refresh_mult_interval || self.adds_since >= p.refresh_add_interval
    }

    /// Refresh a single ciphertext as its own event.
    pub fn refresh(&mut self, c: &Ciphertext) -> Ciphertext {
        let mut out = c.clone();
        self.refresh_all([&mut out]);
        out
    }

    /// One refresh event over every ciphertext in `live`.
    pub fn refresh_all<'a, I>(&mut self, live: I)
    where
        I: IntoIterator<Item = &'a mut Ciphertext>,
    {
        let keys = self.keys;
        for ct in live {
            *ct = self
                .refresher
                .refresh(ct, &keys.profile, &keys.public, &mut self.rng);
        }
        self.counters.refresh_events += 1;
        self.counters.pk_consumed += 1;
        self.mults_since = 0;
        self.adds_since = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lwe::{dec, noise_of};
    use crate::params::toy_profile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (KeySet, ChaCha8Rng) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let ks = KeySet::generate(&toy_profile(), &mut r);
        (ks, r)
    }

    #[test]
    fn switching_key_shapes() {
        let (ks, _) = setup(1);
        let t = ks.server.tensor.as_ref().unwrap();
        assert_eq!((t.rows(), t.to_dim()), (40 * 40 * 12, 40));
        let l = ks.server.lsb.as_ref().unwrap();
        assert_eq!((l.rows(), l.to_dim()), (40 * 12, 40));
    }

    #[test]
    fn switching_key_first_column_carries_powers() {
        let (ks, _) = setup(2);
        let p = toy_profile();
        let l = ks.server.lsb.as_ref().unwrap();
        let pw = lwe::powersof(ks.secret.as_slice(), p.beta, p.q);
        for r in 0..l.rows() {
            // B s2 = 2e + Powersof(s1)
            let v = lwe::inner_mod(l.row(r), ks.secret.as_slice(), p.q) as i64 - pw[r] as i64;
            let c = lwe::centered(lwe::reduce(v, p.q), p.q);
            assert_eq!(c.rem_euclid(2), 0);
        }
    }

    #[test]
    fn gate_truth_tables() {
        let (ks, mut r) = setup(3);
        let p = toy_profile();
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(4));
        for a in 0..2u8 {
            for b in 0..2u8 {
                for _ in 0..20 {
                    let ca = lwe::enc(&p, &ks.server.public, a, &mut r);
                    let cb = lwe::enc(&p, &ks.server.public, b, &mut r);
                    let x = ctx.hadd(&ca, &cb).unwrap();
                    let y = ctx.hmul(&ca, &cb).unwrap();
                    assert_eq!(dec(&ks.secret, &x), a ^ b);
                    assert_eq!(dec(&ks.secret, &y), a & b);
                    assert!(noise_of(&ks.secret, &y, a & b) < (p.q / 4) as u64);
                }
            }
        }
        assert_eq!(ctx.counters().mults, 80);
        assert_eq!(ctx.counters().keyswitches, 80);
    }

    #[test]
    fn identities() {
        let (ks, _) = setup(5);
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(6));
        for m in 0..2u8 {
            let c = ctx.encrypt(m);
            let z = ctx.encrypt(0);
            let o = ctx.encrypt(1);
            assert_eq!(dec(&ks.secret, &ctx.hadd(&c, &z).unwrap()), m);
            assert_eq!(dec(&ks.secret, &ctx.hadd(&c, &c).unwrap()), 0);
            assert_eq!(dec(&ks.secret, &ctx.hmul(&c, &z).unwrap()), 0);
            assert_eq!(dec(&ks.secret, &ctx.hmul(&c, &o).unwrap()), m);
        }
    }

    #[test]
    fn xor_associative_on_plaintexts() {
        let (ks, _) = setup(7);
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(8));
        for bits in 0..8u8 {
            let (a, b, c) = (bits & 1, (bits >> 1) & 1, bits >> 2);
            let (ca, cb, cc) = (ctx.encrypt(a), ctx.encrypt(b), ctx.encrypt(c));
            let ab = ctx.hadd(&ca, &cb).unwrap();
            let l = ctx.hadd(&ab, &cc).unwrap();
            let bc = ctx.hadd(&cb, &cc).unwrap();
            let r = ctx.hadd(&ca, &bc).unwrap();
            assert_eq!(dec(&ks.secret, &l), dec(&ks.secret, &r));
            assert_eq!(dec(&ks.secret, &l), a ^ b ^ c);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let (ks, _) = setup(9);
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(8));
        let a = ctx.encrypt(1);
        let b = Ciphertext::new(vec![0; 3], 0);
        assert!(matches!(
            ctx.hadd(&a, &b),
            Err(HeError::LengthMismatch { .. })
        ));
        assert!(matches!(
            ctx.hmul(&a, &b),
            Err(HeError::LengthMismatch { .. })
        ));
        let t = ks.server.tensor.as_ref().unwrap();
        assert!(matches!(
            key_switch(&[1, 2, 3], t),
            Err(HeError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn missing_tensor_key() {
        let (ks, _) = setup(10);
        let mut keys = ks.server.clone();
        keys.tensor = None;
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&keys, &refresher, ChaCha8Rng::seed_from_u64(1));
        let a = ctx.encrypt(1);
        assert_eq!(ctx.hmul(&a, &a), Err(HeError::MissingTensorKey));
    }

    #[test]
    fn zero_input_switches_to_zero() {
        let (ks, _) = setup(11);
        let t = ks.server.tensor.as_ref().unwrap();
        let out = key_switch(&vec![0; t.from_dim()], t).unwrap();
        assert!(out.iter().all(|&v| v == 0));
    }

    #[test]
    fn repeated_lsb_switches_preserve_plaintext() {
        let (ks, _) = setup(12);
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(2));
        for m in 0..2u8 {
            let mut c = ctx.encrypt(m);
            for _ in 0..64 {
                c = ctx.lsb_switch(&c).unwrap();
                assert_eq!(dec(&ks.secret, &c), m);
            }
        }
        assert_eq!(ctx.counters().keyswitches, 128);
        assert_eq!(ctx.counters().pk_consumed, 128);
    }

    #[test]
    fn refresh_schedule_and_accounting() {
        let (ks, _) = setup(13);
        let refresher = TrustedRefresher::new(ks.secret.clone());
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(3));
        let a = ctx.encrypt(1);
        for i in 1..=10 {
            ctx.hmul(&a, &a).unwrap();
            assert_eq!(ctx.refresh_due(), i == 10);
        }
        let mut b = ctx.hmul(&a, &a).unwrap();
        ctx.refresh_all([&mut b]);
        assert!(!ctx.refresh_due());
        for i in 1..=100 {
            ctx.hadd(&a, &a).unwrap();
            assert_eq!(ctx.refresh_due(), i == 100);
        }
        let c = ctx.refresh(&b);
        assert_eq!(dec(&ks.secret, &c), 1);
        assert!(noise_of(&ks.secret, &c, 1) <= lwe::fresh_noise_bound(&toy_profile()));
        let k = ctx.counters();
        assert_eq!(k.refresh_events, 2);
        assert_eq!(k.pk_consumed, k.keyswitches + k.refresh_events);
    }

    /// Fraction of single products that fail to decrypt at the toy profile
    /// when the error width is `sigma`.
    fn product_failure_rate(sigma: f64, trials: usize, seed: u64) -> f64 {
        let p = ParamProfile {
            sigma,
            ..toy_profile()
        };
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let ks = KeySet::generate(&p, &mut r);
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, r);
        let mut bad = 0;
        for i in 0..trials {
            let (a, b) = ((i & 1) as u8, ((i >> 1) & 1) as u8);
            let (ca, cb) = (ctx.encrypt(a), ctx.encrypt(b));
            if dec(&ks.secret, &ctx.hmul(&ca, &cb).unwrap()) != a & b {
                bad += 1;
            }
        }
        bad as f64 / trials as f64
    }

    #[test]
    fn unit_error_width_breaks_one_product() {
        let f = product_failure_rate(1.0, 400, 21);
        assert!(f > 0.05, "{f}");
        assert_eq!(product_failure_rate(toy_profile().sigma, 400, 21), 0.0);
    }

    #[test]
    fn error_free_keys_need_no_refresh() {
        let mut seed = 30;
        let ks = loop {
            let ks = KeySet::generate(&toy_profile(), &mut ChaCha8Rng::seed_from_u64(seed));
            if ks.nonzero_errors() == 0 {
                break ks;
            }
            seed += 1;
        };
        let refresher = NoopRefresher;
        let mut ctx = EvalContext::new(&ks.server, &refresher, ChaCha8Rng::seed_from_u64(1));
        let mut c = ctx.encrypt(1);
        for _ in 0..200 {
            let o = ctx.encrypt(1);
            c = ctx.hmul(&c, &o).unwrap();
        }
        assert_eq!(noise_of(&ks.secret, &c, 1), 0);

        let noisy = ParamProfile {
            sigma: 1.0,
            ..toy_profile()
        };
        let ks = KeySet::generate(&noisy, &mut ChaCha8Rng::seed_from_u64(2));
        assert!(ks.nonzero_errors() > 1000);
    }

    #[test]
    fn counters_merge_and_report() {
        let a = OpCounters {
            adds: 1,
            table_adds: 2,
            mults: 3,
            keyswitches: 4,
            refresh_events: 5,
            pk_consumed: 9,
        };
        let mut b = a;
        b.merge(&a);
        assert_eq!(b.mults, 6);
        assert_eq!(OpCounters::parse_report(&b.report()), Some(b));
        assert!(a.report().contains("pk_consumed=9\n"));
    }
}
