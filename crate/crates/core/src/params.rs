//! Parameter profiles for the LWE bit-encryption scheme.

use alloc::vec::Vec;
use core::fmt;

/// Cryptosystem parameters.
///
/// `sigma` is the standard deviation (in modulus units) of the error
/// vectors `e` sampled for public and switching keys; it alone governs
/// ciphertext noise. `key_sigma` is the width used for the secret key
/// tail `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamProfile {
    /// Secret key length.
    pub n: usize,
    /// Prime modulus in `(n^2, 2n^2)`.
    pub q: u32,
    /// Public key rows.
    pub d: usize,
    /// Bits per residue, `ceil(log2 q)`.
    pub beta: u32,
    pub epsilon: f64,
    pub sigma: f64,
    pub key_sigma: f64,
    pub refresh_mult_interval: u32,
    pub refresh_add_interval: u32,
}

/// One violated profile constraint.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    ZeroDimension,
    NotPrime { q: u32 },
    ModulusOutOfRange { q: u32, lower: u64, upper: u64 },
    TooFewRows { d: usize, required: f64 },
    WrongBeta { beta: u32, expected: u32 },
    NonPositive { field: &'static str },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDimension => write!(f, "n must be positive"),
            Violation::NotPrime { q } => write!(f, "q = {q} is not prime"),
            Violation::ModulusOutOfRange { q, lower, upper } => {
                write!(f, "q = {q} outside the open interval ({lower}, {upper})")
            }
            Violation::TooFewRows { d, required } => {
                write!(
                    f,
                    "d = {d} is below (1+epsilon)(1+n)log2(q) = {required:.2}"
                )
            }
            Violation::WrongBeta { beta, expected } => {
                write!(f, "beta = {beta}, expected ceil(log2 q) = {expected}")
            }
            Violation::NonPositive { field } => write!(f, "{field} must be positive"),
        }
    }
}

/// All constraints a profile failed.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub struct InvalidProfile(pub Vec<Violation>);

impl fmt::Display for InvalidProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid parameter profile")?;
        for (i, v) in self.0.iter().enumerate() {
            write!(f, "{} {v}", if i == 0 { ":" } else { ";" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ParamError {
    #[error("root-Hermite factor must exceed 1, got {0}")]
    BadHermiteFactor(f64),
}

/// Deterministic primality by trial division; adequate for `q < 2^32`.
pub fn is_prime(q: u32) -> bool {
    if q < 2 {
        return false;
    }
    if q.is_multiple_of(2) {
        return q == 2;
    }
    let q = q as u64;
    let mut k = 3u64;
    while k * k <= q {
        if q.is_multiple_of(k) {
            return false;
        }
        k += 2;
    }
    true
}

/// `ceil(log2 q)` for `q >= 2`.
pub fn ceil_log2(q: u32) -> u32 {
    if q <= 1 {
        0
    } else {
        32 - (q - 1).leading_zeros()
    }
}

impl ParamProfile {
    /// `n = 240, q = 57601, d = 4573`.
    ///
    /// `epsilon` is the largest three-decimal value admitted by `d`.
    pub fn paper() -> Self {
        ParamProfile {
            n: 240,
            q: 57601,
            d: 4573,
            beta: 16,
            epsilon: 0.199,
            sigma: DEFAULT_SIGMA,
            key_sigma: 1.0,
            refresh_mult_interval: 10,
            refresh_add_interval: 100,
        }
    }

    /// Desk-scale profile `n = 40, q = 2053, d = 560`. Not secure.
    pub fn toy() -> Self {
        ParamProfile {
            n: 40,
            q: 2053,
            d: 560,
            beta: 12,
            epsilon: 0.2,
            sigma: DEFAULT_SIGMA,
            key_sigma: 1.0,
            refresh_mult_interval: 10,
            refresh_add_interval: 100,
        }
    }

    /// Lower bound on `d` implied by `epsilon`, `n` and `q`.
    pub fn required_rows(&self) -> f64 {
        (1.0 + self.epsilon) * (1.0 + self.n as f64) * libm::log2(self.q as f64)
    }

    pub fn validate(&self) -> Result<(), InvalidProfile> {
        let mut v = Vec::new();
        if self.n == 0 {
            v.push(Violation::ZeroDimension);
        }
        if !is_prime(self.q) {
            v.push(Violation::NotPrime { q: self.q });
        }
        let n2 = (self.n as u64) * (self.n as u64);
        let q = self.q as u64;
        if !(q > n2 && q < 2 * n2) {
            v.push(Violation::ModulusOutOfRange {
                q: self.q,
                lower: n2,
                upper: 2 * n2,
            });
        }
        let required = self.required_rows();
        if (self.d as f64) < required {
            v.push(Violation::TooFewRows {
                d: self.d,
                required,
            });
        }
        let expected = ceil_log2(self.q);
        if self.beta != expected {
            v.push(Violation::WrongBeta {
                beta: self.beta,
                expected,
            });
        }
        for (field, ok) in [
            ("epsilon", self.epsilon > 0.0),
            ("sigma", self.sigma > 0.0),
            ("key_sigma", self.key_sigma > 0.0),
            ("refresh_mult_interval", self.refresh_mult_interval > 0),
            ("refresh_add_interval", self.refresh_add_interval > 0),
        ] {
            if !ok {
                v.push(Violation::NonPositive { field });
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(InvalidProfile(v))
        }
    }

    /// Bytes per serialized residue.
    pub fn residue_bytes(&self) -> usize {
        self.beta.div_ceil(8) as usize
    }
}

/// Error width shared by both shipped profiles.
///
/// With `q` in `(n^2, 2n^2)` a product of two ciphertexts already uses most
/// of the budget, so the 8-bit circuits (chains of up to seven products
/// between refresh events) only decrypt reliably when the error is almost
/// always zero.
pub const DEFAULT_SIGMA: f64 = 0.1;

/// Validate a profile.
pub fn validate_profile(p: &ParamProfile) -> Result<(), InvalidProfile> {
    p.validate()
}

pub fn paper_profile() -> ParamProfile {
    ParamProfile::paper()
}

pub fn toy_profile() -> ParamProfile {
    ParamProfile::toy()
}

/// Lattice dimension `sqrt(n log2 q / log2 delta)` an attacker must reduce.
pub fn security_dimension_estimate(p: &ParamProfile, delta: f64) -> Result<f64, ParamError> {
    if delta.partial_cmp(&1.0) != Some(core::cmp::Ordering::Greater) {
        return Err(ParamError::BadHermiteFactor(delta));
    }
    let num = p.n as f64 * libm::log2(p.q as f64);
    Ok(libm::sqrt(num / libm::log2(delta)))
}
