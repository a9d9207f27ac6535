use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Uniformly random recommendations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomModel {
    pub seed: u64,
}

impl RandomModel {
    /// Seeded sample of `k` candidates without replacement; the stream is
    /// derived from `(seed, user)`.
    pub fn recommend(&self, user: usize, k: usize, candidates: &[usize]) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(user as u64);
        random_recommend(k, candidates, &mut rng)
    }
}

/// `min(k, n)` candidates drawn uniformly without replacement, in draw order.
pub fn random_recommend(k: usize, candidates: &[usize], rng: &mut ChaCha8Rng) -> Vec<usize> {
    let k = k.min(candidates.len());
    index::sample(rng, candidates.len(), k)
        .into_iter()
        .map(|j| candidates[j])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_draw_is_permutation() {
        let c: Vec<usize> = (10..20).collect();
        let mut got = RandomModel { seed: 3 }.recommend(0, 10, &c);
        got.sort();
        assert_eq!(got, c);
    }

    #[test]
    fn seeded() {
        let c: Vec<usize> = (0..30).collect();
        let m = RandomModel { seed: 42 };
        assert_eq!(m.recommend(5, 4, &c), m.recommend(5, 4, &c));
        assert_ne!(m.recommend(5, 10, &c), m.recommend(6, 10, &c));
    }

    #[test]
    fn frequencies_within_three_sigma() {
        let c: Vec<usize> = (0..10).collect();
        let mut counts = [0usize; 10];
        for seed in 0..10_000u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            counts[random_recommend(1, &c, &mut rng)[0]] += 1;
        }
        // binomial(10000, 0.1): sigma = 30
        for n in counts {
            assert!((n as f64 - 1000.0).abs() <= 90.0, "{counts:?}");
        }
    }
}
