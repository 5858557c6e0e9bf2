//! Deterministic random streams.
//!
//! Every replica, site environment and auxiliary draw is fed from a stream
//! identified by `(seed, stream_id)`. Streams are ChaCha8 keystreams with the
//! stream id mapped onto the cipher's nonce, so two ids never share words and
//! a run is reproducible regardless of how replicas are scheduled.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Child stream labelled by `tag`. Depends only on `(seed, stream_id, tag)`,
    /// never on how many draws the parent has made.
    pub fn derive(&self, tag: u64) -> Self {
        Self::new(self.seed, mix64(self.stream_id ^ mix64(tag.wrapping_add(GOLDEN))))
    }

    /// Child stream keyed by the parent's next word, so successive splits of
    /// one stream are distinct.
    pub fn split(&mut self) -> Self {
        let id = mix64(self.inner.next_u64());
        Self::new(self.seed, id)
    }

    /// Stream for replica `index` of a Monte-Carlo run with master `seed`.
    pub fn replica(seed: u64, index: u64) -> Self {
        Self::new(seed, mix64(index.wrapping_mul(GOLDEN) ^ 0xA5A5_A5A5_A5A5_A5A5))
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        // Lemire's multiply-shift with rejection.
        let mut m = (self.inner.next_u64() as u128) * (n as u128);
        let mut low = m as u64;
        if low < n {
            let threshold = n.wrapping_neg() % n;
            while low < threshold {
                m = (self.inner.next_u64() as u128) * (n as u128);
                low = m as u64;
            }
        }
        (m >> 64) as u64
    }

    /// Uniform site in the inclusive interval `[left, right]`.
    #[inline]
    pub fn site_in(&mut self, left: i64, right: i64) -> i64 {
        left + self.below((right - left + 1) as u64) as i64
    }

    /// Exponential holding time with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        // 1 - unit() lies in (0, 1]
        -(1.0 - self.unit()).ln() / rate
    }

    /// Bernoulli draw with success probability `p`.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Random-access fair coins indexed by site, for lazily extended environments.
///
/// The value at a site is a pure function of the key and the site index, so
/// reads are idempotent and independent of the order in which sites are
/// first touched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SiteCoins {
    key: u64,
}

impl SiteCoins {
    pub fn from_stream(rng: &mut RngStream) -> Self {
        Self { key: rng.next_u64() }
    }

    pub fn with_key(key: u64) -> Self {
        Self { key }
    }

    #[inline]
    pub fn coin(&self, site: i64) -> bool {
        mix64(self.key ^ mix64((site as u64).wrapping_mul(GOLDEN))) >> 63 == 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_and_stream_reproduce() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let xs: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 4);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_ne!(RngStream::replica(1, 0).next_u64(), RngStream::replica(1, 1).next_u64());
    }

    #[test]
    fn derive_ignores_parent_position() {
        let a = RngStream::new(11, 5);
        let mut b = RngStream::new(11, 5);
        b.next_u64();
        assert_eq!(a.derive(9).next_u64(), b.derive(9).next_u64());
    }

    #[test]
    fn successive_splits_differ() {
        let mut a = RngStream::new(11, 5);
        let mut x = a.split();
        let mut y = a.split();
        assert_ne!(x.next_u64(), y.next_u64());
        assert_eq!(RngStream::new(11, 5).split().next_u64(), RngStream::new(11, 5).split().next_u64());
    }

    #[test]
    fn below_stays_in_range_and_covers() {
        let mut rng = RngStream::new(1, 1);
        let mut seen = [false; 7];
        for _ in 0..2000 {
            let x = rng.below(7) as usize;
            seen[x] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn site_coins_are_fair_and_stable() {
        let coins = SiteCoins::with_key(42);
        let ones = (-50_000..50_000).filter(|&s| coins.coin(s)).count() as f64;
        // 3 sigma for 1e5 fair coins is ~474
        assert!((ones - 50_000.0).abs() < 474.0, "ones = {ones}");
        assert_eq!(coins.coin(17), coins.coin(17));
    }
}
