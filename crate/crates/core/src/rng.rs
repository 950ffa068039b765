//! Counter-based, splittable random streams.
//!
//! Every random draw in the crate is a pure function of a small key
//! (base seed, realization index, site or stream index). A key is hashed
//! with the SplitMix64 finalizer into a 64-bit stream seed, which then seeds
//! a xoshiro256** generator through the usual SplitMix64 expansion. Nothing
//! depends on scheduling or call order, so Monte Carlo runs are
//! bit-reproducible for any number of worker threads.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output finalizer (Stafford variant 13).
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit stream seed from a base seed and an ordered list of
/// stream coordinates.
///
/// Each coordinate is folded in as `mix64(acc ^ mix64(coord + GOLDEN_GAMMA * (i + 1)))`,
/// so permuting the coordinates gives an unrelated stream.
pub fn stream_seed(base_seed: u64, coords: &[u64]) -> u64 {
    let mut acc = mix64(base_seed);
    for (i, &c) in coords.iter().enumerate() {
        let salt = GOLDEN_GAMMA.wrapping_mul(i as u64 + 1);
        acc = mix64(acc ^ mix64(c.wrapping_add(salt)));
    }
    acc
}

/// Plain SplitMix64 generator, used to expand a 64-bit seed into xoshiro state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }
}

/// xoshiro256** 1.0.
#[derive(Debug, Clone)]
pub struct Xoshiro256StarStar {
    s: [u64; 4],
}

impl Xoshiro256StarStar {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = SplitMix64::new(seed);
        let s = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
        Self { s }
    }

    /// Generator for the stream keyed by `(base_seed, coords...)`.
    pub fn for_stream(base_seed: u64, coords: &[u64]) -> Self {
        Self::from_seed(stream_seed(base_seed, coords))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform double in `[0, 1)`: top 53 bits scaled by `2^-53`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }

    /// Uniform integer in `0..n` by rejection (no modulo bias).
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Standard exponential variate by inversion.
    pub fn next_exp(&mut self) -> f64 {
        // 1 - U lies in (0, 1], so the log is finite.
        -(1.0 - self.next_f64()).ln()
    }

    /// Poisson variate by sequential inversion; intended for small means.
    pub fn next_poisson(&mut self, mean: f64) -> u64 {
        assert!(
            (0.0..500.0).contains(&mean),
            "poisson mean out of supported range"
        );
        let u = self.next_f64();
        let mut k = 0u64;
        let mut p = (-mean).exp();
        let mut cdf = p;
        while u >= cdf {
            k += 1;
            p *= mean / k as f64;
            cdf += p;
            if p == 0.0 && cdf < 1.0 {
                // Tail underflow; u sits in the last ulp below 1.
                break;
            }
        }
        k
    }
}

/// Maps 64 random bits to `[0, 1)` using the top 53 bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
