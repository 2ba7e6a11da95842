//! Counter-based randomness.
//!
//! Every random draw is addressed by `(seed, stream, round)`: the stream
//! separates independent sources (channel gains, Alice, Bob, Monte Carlo
//! chunks) and the round selects a disjoint window of the ChaCha keystream.
//! Generating round 17 never depends on having generated rounds 0..16, so
//! rounds and Monte Carlo chunks can be produced in any order or in
//! parallel with identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gf2lin::BitVec;

/// Keystream words reserved per round (2^32 words of 32 bits).
const ROUND_WINDOW_LOG2: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Gains = 1,
    Alice = 2,
    Bob = 3,
    Gaussian = 4,
}

/// Generator positioned at the start of the `round` window of `stream`.
pub fn stream_rng(seed: u64, stream: Stream, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng.set_word_pos(u128::from(round) << ROUND_WINDOW_LOG2);
    rng
}

/// `len` independent uniform bits.
pub fn uniform_bits<R: Rng>(rng: &mut R, len: usize) -> BitVec {
    let mut v = BitVec::zeros(len);
    for i in 0..len {
        v.set(i, rng.random::<bool>());
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn draw(seed: u64, stream: Stream, round: u64, n: usize) -> Vec<u64> {
        let mut rng = stream_rng(seed, stream, round);
        (0..n).map(|_| rng.next_u64()).collect()
    }

    #[test]
    fn same_address_same_stream() {
        assert_eq!(draw(7, Stream::Alice, 3, 4), draw(7, Stream::Alice, 3, 4));
    }

    #[test]
    fn addresses_are_distinct() {
        let base = stream_rng(7, Stream::Alice, 3).next_u64();
        assert_ne!(base, stream_rng(8, Stream::Alice, 3).next_u64());
        assert_ne!(base, stream_rng(7, Stream::Bob, 3).next_u64());
        assert_ne!(base, stream_rng(7, Stream::Alice, 4).next_u64());
    }

    #[test]
    fn round_access_is_order_independent() {
        let forward: Vec<u64> = (0..5).map(|r| stream_rng(1, Stream::Gains, r).next_u64()).collect();
        let backward: Vec<u64> = (0..5).rev().map(|r| stream_rng(1, Stream::Gains, r).next_u64()).collect();
        assert_eq!(forward, backward.into_iter().rev().collect::<Vec<_>>());
    }
}
