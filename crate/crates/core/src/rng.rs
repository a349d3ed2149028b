//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by (seed, stream id, word
//! position), so a particle's draws depend only on its index and never on
//! which worker ran it.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SCALE: f64 = 1.0 / (1u64 << 53) as f64;

/// Explicit random stream handed to samplers.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

fn expand_seed(seed: u64) -> [u8; 32] {
    // splitmix64 expansion of a 64-bit seed into a ChaCha key
    let mut out = [0u8; 32];
    let mut z = seed;
    for chunk in out.chunks_mut(8) {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut x = z;
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
        chunk.copy_from_slice(&x.to_le_bytes());
    }
    out
}

impl RandomStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::from_seed(expand_seed(seed));
        rng.set_stream(stream);
        RandomStream { rng }
    }

    /// Stream for a sub-purpose of `seed` (e.g. wall interactions), positioned
    /// at `word` 32-bit words into `stream`.
    pub fn keyed(seed: u64, tag: u64, stream: u64, word: u128) -> Self {
        let mut r = RandomStream::new(seed ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93), stream);
        r.rng.set_word_pos(word);
        r
    }

    pub fn word_pos(&self) -> u128 {
        self.rng.get_word_pos()
    }

    pub fn set_word_pos(&mut self, word: u128) {
        self.rng.set_word_pos(word);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * SCALE
    }

    /// Standard exponential variate.
    pub fn exponential(&mut self) -> f64 {
        -self.uniform().ln()
    }

    /// Standard normal variate (Box–Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_stream_separated() {
        let a: Vec<u64> = {
            let mut r = RandomStream::new(42, 3);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RandomStream::new(42, 3);
            (0..8).map(|_| r.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RandomStream::new(42, 4);
            (0..8).map(|_| r.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn word_position_addressing() {
        let mut r = RandomStream::new(7, 0);
        let _ = r.next_u64();
        let pos = r.word_pos();
        let x = r.next_u64();
        let mut q = RandomStream::new(7, 0);
        q.set_word_pos(pos);
        assert_eq!(q.next_u64(), x);
        let mut k1 = RandomStream::keyed(7, 1, 5, 64);
        let mut k2 = RandomStream::keyed(7, 1, 5, 64);
        assert_eq!(k1.next_u64(), k2.next_u64());
    }

    #[test]
    fn uniform_open_interval() {
        let mut r = RandomStream::new(1, 1);
        let mut sum = 0.0;
        for _ in 0..100_000 {
            let u = r.uniform();
            assert!(u > 0.0 && u < 1.0);
            sum += u;
        }
        assert!((sum / 100_000.0 - 0.5).abs() < 0.005);
    }
}
