//! Counter-based splittable random number generation.
//!
//! Every random draw in the crate is a pure function of
//! `(root seed, stream labels, counter)`, so Monte Carlo batches can be
//! evaluated in any order, or in parallel, and still reproduce bit-identical
//! results. The generator is a keyed variant of the SplitMix64 finalizer:
//! two mixing rounds with the stream key injected between them.

/// SplitMix64 finalizer (Vigna). Bijective on u64 with good avalanche.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SALT_A: u64 = 0xD1B5_4A32_D192_ED03;
const SALT_B: u64 = 0xAEF1_7502_07C2_5E2F;

/// Keyed counter hash: the word at position `ctr` of the stream `(k0, k1)`.
#[inline]
fn word(k0: u64, k1: u64, ctr: u64) -> u64 {
    let z = mix(ctr.wrapping_mul(GOLDEN).wrapping_add(k0));
    mix(z ^ k1)
}

#[inline]
fn u64_to_unit(x: u64) -> f64 {
    // 53 bits, in (0, 1]: never returns 0 so it is safe under log().
    (((x >> 11) + 1) as f64) / (1u64 << 53) as f64
}

/// Derive a stream key from the root seed and two labels.
fn derive_key(seed: u64, label_a: u64, label_b: u64) -> (u64, u64) {
    let k0 = mix(seed ^ SALT_A.wrapping_mul(label_a.wrapping_add(1)));
    let k1 = mix(seed.rotate_left(32) ^ SALT_B.wrapping_mul(label_b.wrapping_add(1)));
    (k0, k1)
}

/// Stateful convenience generator over one stream.
#[derive(Debug, Clone)]
pub struct CounterRng {
    k0: u64,
    k1: u64,
    ctr: u64,
}

impl CounterRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let (k0, k1) = derive_key(seed, stream, stream);
        CounterRng { k0, k1, ctr: 0 }
    }

    /// Independent sub-stream, e.g. one per trajectory of a batch.
    pub fn substream(seed: u64, stream: u64, sub: u64) -> Self {
        let (k0, k1) = derive_key(seed, stream, sub);
        CounterRng { k0, k1, ctr: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let x = word(self.k0, self.k1, self.ctr);
        self.ctr += 1;
        x
    }

    /// Uniform in (0, 1].
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        u64_to_unit(self.next_u64())
    }

    /// Standard normal via Box-Muller (cosine branch).
    #[inline]
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        crate::fx::sqrt(-2.0 * crate::fx::ln(u1))
            * crate::fx::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Uniform in [-1, 1].
    #[inline]
    pub fn next_symmetric(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }
}

/// Stateless noise source for SDE driving increments.
///
/// The normal variate for `(step, mode, slot)` is addressed directly, so two
/// solvers sharing a stream see the same increments regardless of how many
/// modes or steps each of them consumes (the common-random-number coupling
/// used by the finite-difference gradient estimator).
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    k0: u64,
    k1: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        let (k0, k1) = derive_key(seed, 0x4E4F_4953, trajectory);
        NoiseStream { k0, k1 }
    }

    /// Standard normal addressed by (step, mode, slot). `slot` distinguishes
    /// the independent components drawn per step and mode (e.g. the OU
    /// increment and the raw Brownian increment are a correlated pair built
    /// from slots 0 and 1).
    #[inline]
    pub fn normal(&self, step: u64, mode: u64, slot: u64) -> f64 {
        let idx = (step << 20) ^ (mode << 4) ^ slot;
        let u1 = u64_to_unit(word(self.k0, self.k1, idx.wrapping_mul(2)));
        let u2 = u64_to_unit(word(self.k0, self.k1, idx.wrapping_mul(2) + 1));
        crate::fx::sqrt(-2.0 * crate::fx::ln(u1))
            * crate::fx::cos(2.0 * core::f64::consts::PI * u2)
    }
}
