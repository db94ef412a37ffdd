//! Two-way cascade error reconciliation.
//!
//! Classic cascade: the key is split into blocks sized to the estimated
//! error rate, block parities are compared over the public channel, and a
//! binary search locates one error inside each odd block. Later passes
//! reshuffle the key with doubled block sizes; every correction is
//! backtracked through the blocks of earlier passes, which frequently
//! uncovers the second error of a masked pair. Every disclosed parity bit
//! is counted toward the leakage.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CascadeError {
    #[error("key length mismatch: {alice} vs {bob}")]
    LengthMismatch { alice: usize, bob: usize },
    #[error("estimated error rate {0} above 0.25; cascade is inefficient and unsafe there")]
    ErrorRateTooHigh(f64),
    #[error("empty key")]
    EmptyKey,
}

/// Result of a reconciliation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadeOutcome {
    /// Bob's key after correction.
    pub corrected: Vec<u8>,
    /// Parity bits disclosed on the public channel.
    pub leaked_bits: u64,
    /// Number of bit flips applied.
    pub corrections: u64,
    /// Passes actually executed (scheduled plus any extra clean-up passes).
    pub passes: usize,
}

/// Scheduled passes with doubling block sizes. Extra passes at the final
/// block size are appended while errors keep being found, so residual
/// errors after return are rare.
const SCHEDULED_PASSES: usize = 4;
const MAX_PASSES: usize = 16;

/// Reconcile `bob` toward `alice` given an estimated bit error rate.
/// `q_hat` = 0 returns the input unchanged with zero leakage.
pub fn cascade_reconcile<R: Rng + ?Sized>(
    alice: &[u8],
    bob: &[u8],
    q_hat: f64,
    rng: &mut R,
) -> Result<CascadeOutcome, CascadeError> {
    if alice.len() != bob.len() {
        return Err(CascadeError::LengthMismatch {
            alice: alice.len(),
            bob: bob.len(),
        });
    }
    if alice.is_empty() {
        return Err(CascadeError::EmptyKey);
    }
    if q_hat > 0.25 {
        return Err(CascadeError::ErrorRateTooHigh(q_hat));
    }
    if q_hat <= 0.0 {
        return Ok(CascadeOutcome {
            corrected: bob.to_vec(),
            leaked_bits: 0,
            corrections: 0,
            passes: 0,
        });
    }

    let n = alice.len();
    let block0 = ((0.73 / q_hat).ceil() as usize).clamp(2, n);
    let mut state = Cascade {
        alice,
        bob: bob.to_vec(),
        passes: Vec::new(),
        leaked: 0,
        corrections: 0,
    };

    let mut pass_idx = 0;
    loop {
        let block = (block0 << pass_idx.min(SCHEDULED_PASSES - 1)).min(n);
        let mut order: Vec<usize> = (0..n).collect();
        if pass_idx > 0 {
            order.shuffle(rng);
        }
        let found = state.run_pass(order, block);
        pass_idx += 1;
        // stop once the schedule is done and the last pass was clean
        if pass_idx >= SCHEDULED_PASSES && found == 0 {
            break;
        }
        if pass_idx >= MAX_PASSES {
            break;
        }
    }

    Ok(CascadeOutcome {
        corrected: state.bob,
        leaked_bits: state.leaked,
        corrections: state.corrections,
        passes: pass_idx,
    })
}

struct PassLayout {
    /// order[p] = key index at shuffled position p
    order: Vec<usize>,
    /// position of each key index in `order`
    position: Vec<usize>,
    block: usize,
}

struct Cascade<'a> {
    alice: &'a [u8],
    bob: Vec<u8>,
    passes: Vec<PassLayout>,
    leaked: u64,
    corrections: u64,
}

impl Cascade<'_> {
    fn run_pass(&mut self, order: Vec<usize>, block: usize) -> u64 {
        let n = order.len();
        let mut position = vec![0usize; n];
        for (pos, &idx) in order.iter().enumerate() {
            position[idx] = pos;
        }
        self.passes.push(PassLayout {
            order,
            position,
            block,
        });
        let pass = self.passes.len() - 1;

        let before = self.corrections;
        let n_blocks = n.div_ceil(block);
        for b in 0..n_blocks {
            // one top-level parity exchange per block
            self.leaked += 1;
            if self.block_parity_diff(pass, b) {
                let idx = self.binary_search(pass, b);
                self.flip(idx, pass);
            }
        }
        self.corrections - before
    }

    fn block_range(&self, pass: usize, b: usize) -> (usize, usize) {
        let layout = &self.passes[pass];
        let lo = b * layout.block;
        let hi = ((b + 1) * layout.block).min(layout.order.len());
        (lo, hi)
    }

    fn parity_diff(&self, pass: usize, lo: usize, hi: usize) -> bool {
        let layout = &self.passes[pass];
        let mut diff = 0u8;
        for p in lo..hi {
            let i = layout.order[p];
            diff ^= self.alice[i] ^ self.bob[i];
        }
        diff == 1
    }

    fn block_parity_diff(&self, pass: usize, b: usize) -> bool {
        let (lo, hi) = self.block_range(pass, b);
        self.parity_diff(pass, lo, hi)
    }

    /// Locate one error in a block of known odd parity. Each halving step
    /// discloses one sub-block parity.
    fn binary_search(&mut self, pass: usize, b: usize) -> usize {
        let (mut lo, mut hi) = self.block_range(pass, b);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            self.leaked += 1;
            if self.parity_diff(pass, lo, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        self.passes[pass].order[lo]
    }

    /// Flip the located bit, then cascade: any earlier (or later, already
    /// executed) pass whose block containing this bit is now odd gets a
    /// fresh binary search. No new top-level parity is disclosed for those
    /// blocks; both sides track the parity flip locally.
    fn flip(&mut self, idx: usize, found_in_pass: usize) {
        self.bob[idx] ^= 1;
        self.corrections += 1;
        let mut queue: Vec<(usize, usize)> = Vec::new();
        for pass in 0..self.passes.len() {
            if pass == found_in_pass {
                continue;
            }
            let b = self.passes[pass].position[idx] / self.passes[pass].block;
            queue.push((pass, b));
        }
        // process smallest blocks first (queue is popped from the back)
        queue.sort_by_key(|&(pass, _)| std::cmp::Reverse(self.passes[pass].block));
        while let Some((pass, b)) = queue.pop() {
            if self.block_parity_diff(pass, b) {
                let idx = self.binary_search(pass, b);
                self.bob[idx] ^= 1;
                self.corrections += 1;
                for other in 0..self.passes.len() {
                    if other == pass {
                        continue;
                    }
                    let ob = self.passes[other].position[idx] / self.passes[other].block;
                    if !queue.contains(&(other, ob)) {
                        queue.push((other, ob));
                    }
                }
                queue.sort_by_key(|&(p, _)| std::cmp::Reverse(self.passes[p].block));
            }
        }
    }
}
