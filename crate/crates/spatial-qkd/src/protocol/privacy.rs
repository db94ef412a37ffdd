//! Privacy amplification with Toeplitz hashing over GF(2).
//!
//! A random binary Toeplitz matrix is a universal-2 hash family and needs
//! only n + l − 1 seed bits for an n-bit input and l-bit output. The seed
//! is expanded from a 64-bit value with a ChaCha stream, so the hash is
//! deterministic per seed. The matrix-vector product is evaluated on
//! 64-bit words.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PrivacyError {
    #[error("requested output length {requested} exceeds input length {available}")]
    OutputTooLong { requested: usize, available: usize },
}

/// Bit vector packed into u64 words, LSB-first within a word.
#[derive(Clone)]
struct PackedBits {
    words: Vec<u64>,
}

impl PackedBits {
    fn from_bits(bits: &[u8]) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                words[i / 64] |= 1u64 << (i % 64);
            }
        }
        Self { words }
    }

    fn from_rng<R: Rng>(len: usize, rng: &mut R) -> Self {
        let mut words = vec![0u64; len.div_ceil(64)];
        for w in &mut words {
            *w = rng.gen();
        }
        if !len.is_multiple_of(64) {
            let last = words.len() - 1;
            words[last] &= (1u64 << (len % 64)) - 1;
        }
        Self { words }
    }

    /// Parity of the AND of `self` with `other` shifted left by `shift`
    /// bit positions, i.e. parity over i of self[i] & other[i + shift].
    fn shifted_and_parity(&self, other: &PackedBits, shift: usize) -> u8 {
        let word_shift = shift / 64;
        let bit_shift = shift % 64;
        let mut acc = 0u64;
        for (i, &w) in self.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let lo = other.words.get(i + word_shift).copied().unwrap_or(0);
            let shifted = if bit_shift == 0 {
                lo
            } else {
                let hi = other.words.get(i + word_shift + 1).copied().unwrap_or(0);
                (lo >> bit_shift) | (hi << (64 - bit_shift))
            };
            acc ^= w & shifted;
        }
        (acc.count_ones() & 1) as u8
    }
}

/// Hash `input` (0/1 bytes) down to `output_len` bits with the Toeplitz
/// matrix drawn from `seed`.
pub fn toeplitz_hash(input: &[u8], output_len: usize, seed: u64) -> Result<Vec<u8>, PrivacyError> {
    if output_len > input.len() {
        return Err(PrivacyError::OutputTooLong {
            requested: output_len,
            available: input.len(),
        });
    }
    if output_len == 0 {
        return Ok(Vec::new());
    }
    let n = input.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    // Toeplitz seed bits t[0 .. n + l - 1]; row j of the matrix is
    // T[j][i] = t[n - 1 + j - i]. Stored reversed so each row is the seed
    // window shifted by l - 1 - j.
    let total = n + output_len - 1;
    let mut reversed = vec![0u8; total];
    {
        let t = PackedBits::from_rng(total, &mut rng);
        for (k, r) in reversed.iter_mut().enumerate() {
            *r = ((t.words[(total - 1 - k) / 64] >> ((total - 1 - k) % 64)) & 1) as u8;
        }
    }
    let u = PackedBits::from_bits(&reversed);
    let x = PackedBits::from_bits(input);
    Ok((0..output_len)
        .map(|j| x.shifted_and_parity(&u, output_len - 1 - j))
        .collect())
}
