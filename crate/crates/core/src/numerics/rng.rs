use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Seeded random stream used for every stochastic step in the crate.
///
/// The generator is ChaCha8 seeded through `ChaCha8Rng::seed_from_u64`, so a
/// given seed yields the same sequence on every platform. Independent
/// sub-streams are derived with [`RngStream::fork`], which mixes a label into
/// the parent seed with SplitMix64; forking never advances the parent.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream keyed by `label`, independent of how far `self` has advanced.
    pub fn fork(&self, label: &str) -> RngStream {
        RngStream::new(splitmix64(self.seed ^ splitmix64(fnv1a(label))))
    }

    /// Child stream keyed by `label` and an index (fold, run, epoch...).
    pub fn fork_indexed(&self, label: &str, index: u64) -> RngStream {
        RngStream::new(self.derive_seed(label, index))
    }

    /// Seed of the stream `fork_indexed(label, index)` would return.
    pub fn derive_seed(&self, label: &str, index: u64) -> u64 {
        splitmix64(self.seed ^ splitmix64(fnv1a(label) ^ splitmix64(index)))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.inner.gen_range(lo..hi)
    }

    /// Uniform integer in `0..n`. Panics when `n == 0`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.gen_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.inner.gen::<f64>() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }

    /// `k` distinct indices from `0..n` in random order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, k.min(n)).into_vec()
    }

    /// Poisson draw by inversion; fine for the small means used here.
    pub fn poisson(&mut self, mean: f64) -> usize {
        if mean <= 0.0 {
            return 0;
        }
        let limit = (-mean).exp();
        let mut k = 0;
        let mut p = self.inner.gen::<f64>();
        while p > limit {
            k += 1;
            p *= self.inner.gen::<f64>();
        }
        k
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
