use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Explicit, seedable, splittable random stream. Every stochastic operation
/// in the crate takes one of these; nothing reads ambient entropy, so runs
/// are reproducible from a single root seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn seed(seed: u64) -> Self {
        RngStream {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derive an independent child stream. The parent advances, so repeated
    /// splits yield distinct children in a deterministic order.
    pub fn split(&mut self) -> RngStream {
        let mut seed = [0u8; 32];
        self.inner.fill_bytes(&mut seed);
        RngStream {
            inner: ChaCha8Rng::from_seed(seed),
        }
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        self.inner.gen_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        // Fisher-Yates, descending, matching rand's SliceRandom semantics.
        for i in (1..items.len()).rev() {
            let j = self.inner.gen_range(0..=i);
            items.swap(i, j);
        }
    }

    /// k distinct indices drawn from [0, n) in shuffled order.
    pub fn choose_distinct(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "choose_distinct: k={k} > n={n}");
        let mut all: Vec<usize> = (0..n).collect();
        self.shuffle(&mut all);
        all.truncate(k);
        all
    }

    /// Draw an index from unnormalized non-negative weights.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            u -= w;
            if u < 0.0 {
                return i;
            }
        }
        weights.len() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = RngStream::seed(9);
        let mut b = RngStream::seed(9);
        for _ in 0..100 {
            assert_eq!(a.uniform().to_bits(), b.uniform().to_bits());
        }
    }

    #[test]
    fn split_children_are_independent_of_later_parent_use() {
        let mut a = RngStream::seed(3);
        let mut child = a.split();
        let first = child.uniform();
        // Re-derive from a fresh parent: child values must match regardless of
        // what the parent does afterwards.
        let mut b = RngStream::seed(3);
        let mut child2 = b.split();
        let _ = b.uniform();
        assert_eq!(first.to_bits(), child2.uniform().to_bits());
    }

    #[test]
    fn weighted_respects_zero_mass() {
        let mut r = RngStream::seed(1);
        for _ in 0..50 {
            let i = r.weighted(&[0.0, 1.0, 0.0]);
            assert_eq!(i, 1);
        }
    }
}
