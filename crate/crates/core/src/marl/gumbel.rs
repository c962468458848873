use rand::Rng;
use rand_distr::{Distribution, Gumbel};

use crate::Scalar;

use super::{MarlError, Result};

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(z: &[T]) -> Vec<T> {
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exp: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exp.iter().copied().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Standard Gumbel draws, one per logit.
pub fn sample_gumbel<T: Scalar, R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<T> {
    let g = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    (0..n).map(|_| T::lit(g.sample(rng))).collect()
}

/// `softmax((logits + noise) / temperature)`.
pub fn gumbel_softmax_with_noise<T: Scalar>(logits: &[T], noise: &[T], temperature: T) -> Result<Vec<T>> {
    if !(temperature > T::zero()) {
        return Err(MarlError::Config(format!("Gumbel-Softmax temperature {temperature} must be positive")));
    }
    if noise.len() != logits.len() {
        return Err(MarlError::Shape(format!("{} noise values for {} logits", noise.len(), logits.len())));
    }
    let z: Vec<T> = logits.iter().zip(noise).map(|(&l, &g)| (l + g) / temperature).collect();
    Ok(softmax(&z))
}

/// Relaxed one-hot sample `softmax((logits + g) / temperature)` with `g`
/// standard Gumbel.
pub fn gumbel_softmax<T: Scalar, R: Rng + ?Sized>(logits: &[T], temperature: T, rng: &mut R) -> Result<Vec<T>> {
    let noise = sample_gumbel(logits.len(), rng);
    gumbel_softmax_with_noise(logits, &noise, temperature)
}

/// Gradient with respect to the logits of `<upstream, y>` where `y` is a
/// Gumbel-Softmax sample with its noise held fixed.
pub fn gumbel_softmax_backward<T: Scalar>(y: &[T], upstream: &[T], temperature: T) -> Vec<T> {
    let inner: T = y.iter().zip(upstream).map(|(&a, &b)| a * b).sum();
    y.iter()
        .zip(upstream)
        .map(|(&yi, &gi)| yi * (gi - inner) / temperature)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn argmax(v: &[f64]) -> usize {
        v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
    }

    proptest! {
        #[test]
        fn sums_to_one(logits in prop::collection::vec(-20.0f64..20.0, 1..6), tau in 0.05f64..5.0, seed in any::<u64>()) {
            let y = gumbel_softmax(&logits, tau, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn confident_logits_pick_their_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| argmax(&gumbel_softmax(&[10.0, 0.0, 0.0], 0.1, &mut rng).unwrap()) == 0)
            .count();
        assert!(hits as f64 >= 0.999 * n as f64, "{hits}");
    }

    #[test]
    fn uniform_logits_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[argmax(&gumbel_softmax(&[0.0, 0.0, 0.0], 1.0, &mut rng).unwrap())] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02, "{counts:?}");
        }
    }

    #[test]
    fn non_positive_temperature_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(gumbel_softmax(&[0.0, 1.0], 0.0, &mut rng), Err(MarlError::Config(_))));
        assert!(matches!(gumbel_softmax(&[0.0, 1.0], -1.0, &mut rng), Err(MarlError::Config(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let logits = [0.3, -1.2, 0.8];
        let noise = [0.1, 0.5, -0.4];
        let up = [1.0, -2.0, 0.5];
        let tau = 0.7;
        let y = gumbel_softmax_with_noise(&logits, &noise, tau).unwrap();
        let g = gumbel_softmax_backward(&y, &up, tau);
        let f = |l: &[f64]| -> f64 {
            let y = gumbel_softmax_with_noise(l, &noise, tau).unwrap();
            y.iter().zip(&up).map(|(a, b)| a * b).sum()
        };
        for i in 0..3 {
            let (mut p, mut m) = (logits, logits);
            p[i] += 1e-6;
            m[i] -= 1e-6;
            let num = (f(&p) - f(&m)) / 2e-6;
            assert!((num - g[i]).abs() < 1e-8, "{i}: {num} vs {}", g[i]);
        }
    }
}
