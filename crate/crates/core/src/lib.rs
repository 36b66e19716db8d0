//! Fully homomorphic encryption encapsulated difference expansion.
//!
//! The crate is split along the data flow of the scheme:
//!
//! - [`params`]: parameter profiles and their validation.
//! - [`lwe`]: bit encryption under learning-with-errors, plus the
//!   bit-decomposition / powers-of-two pair used by key switching.
//! - [`homomorphic`]: XOR/AND gates, key switching, noise refresh and
//!   operation accounting.
//! - [`circuits`]: 8-bit ripple adder and subtractor over encrypted bits.
//! - [`de`]: plaintext difference expansion (pairing, availability,
//!   embed/extract/recover, map side information, PSNR).
//! - [`pipeline`]: the encrypted-domain protocols run by the client and
//!   the server, including key-switching LSB embedding.
//!
//! Everything here is `no_std` + `alloc`; file formats and the command
//! line live in the companion `fheede` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod circuits;
pub mod de;
pub mod homomorphic;
pub mod lwe;
pub mod params;
pub mod pipeline;

pub use circuits::{add8, shl1, shr1, sub8, EncryptedByte};
pub use de::{AvailabilityMap, EmbedConfig, Image, PixelPair};
pub use homomorphic::{
    EvalContext, KeySet, NoopRefresher, OpCounters, Refresher, ServerKeys, SwitchingKey,
    TrustedRefresher,
};
pub use lwe::{Ciphertext, PublicKey, SecretKey};
pub use params::ParamProfile;
pub use pipeline::{CiphertextStore, DataHidingKey, EmbedMode};
