//! Seeded randomness.
//!
//! Every stochastic routine takes an explicit `u64` seed. Independent
//! sub-streams (restarts, trials, rows) are derived with [`derive_seed`],
//! so results do not depend on scheduling order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};

pub type SimRng = ChaCha12Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer over `(seed, index)`; used to give each task of a
/// parallel sweep its own stream.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Multinomial draw of `shots` trials over `probs` via sequential conditional
/// binomials. Probabilities are clamped at zero and renormalized.
pub fn multinomial(rng: &mut SimRng, shots: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let clean: Vec<f64> = probs.iter().map(|p| p.max(0.0)).collect();
    let mut mass: f64 = clean.iter().sum();
    let mut left = shots;
    for (k, &p) in clean.iter().enumerate() {
        if left == 0 || mass <= 0.0 {
            break;
        }
        if k + 1 == clean.len() {
            counts[k] = left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q)
            .expect("probability clamped to [0,1]")
            .sample(rng);
        counts[k] = draw;
        left -= draw;
        mass -= p;
    }
    // Round-off can exhaust `mass` before the last bucket; dump the rest
    // on the largest-probability outcome.
    if left > 0 && counts.iter().sum::<u64>() < shots {
        let (imax, _) = clean
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
        counts[imax] += shots - counts.iter().sum::<u64>();
    }
    counts
}

/// Draw `shots` independent indices from `probs` (cumulative inversion).
pub fn sample_indices(rng: &mut SimRng, shots: usize, probs: &[f64]) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p.max(0.0);
        cdf.push(acc);
    }
    let total = acc;
    (0..shots)
        .map(|_| {
            let r = rng.random::<f64>() * total;
            cdf.partition_point(|&c| c <= r).min(probs.len() - 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let a = derive_seed(7, 0);
        let b = derive_seed(7, 1);
        let c = derive_seed(8, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, 0));
    }

    #[test]
    fn multinomial_sums_to_shots() {
        let mut rng = rng_from_seed(3);
        let counts = multinomial(&mut rng, 1000, &[0.2, 0.0, 0.5, 0.3]);
        assert_eq!(counts.iter().sum::<u64>(), 1000);
        assert_eq!(counts[1], 0);
    }

    #[test]
    fn sample_indices_skips_zero_mass() {
        let mut rng = rng_from_seed(11);
        let idx = sample_indices(&mut rng, 500, &[0.0, 1.0, 0.0]);
        assert!(idx.iter().all(|&i| i == 1));
    }
}
