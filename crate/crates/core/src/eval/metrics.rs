//! Aggregate propagation metrics over `(p, p')` pairs, where `p` is the
//! method's propagation count and `p'` the baseline's on the same instance.

use crate::scalar::MetricScalar;
use crate::{Error, Result};

/// Median of `p / p'` over pairs with `p' > 0`. An even count takes the
/// mean of the two middle ratios.
pub fn mrpp<S: MetricScalar>(pairs: &[(u64, u64)]) -> Result<S> {
    let mut ratios: Vec<S> =
        pairs.iter().filter(|p| p.1 > 0).map(|&(p, base)| S::from_counts(p, base)).collect();
    if ratios.is_empty() {
        return Err(Error::NoBaseline);
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).expect("ratios are comparable"));
    let k = ratios.len();
    Ok(if k % 2 == 1 {
        ratios[k / 2].clone()
    } else {
        S::midpoint(&ratios[k / 2 - 1], &ratios[k / 2])
    })
}

/// Fraction of all pairs with `p' > 0` and `p <= (1 - delta) p'`.
pub fn win_rate<S: MetricScalar>(pairs: &[(u64, u64)], delta: &S) -> Result<S> {
    if pairs.is_empty() {
        return Err(Error::Config("win rate needs at least one instance".into()));
    }
    let bound = S::one() - delta.clone();
    let wins = pairs.iter().filter(|&&(p, base)| base > 0 && S::from_counts(p, base) <= bound).count();
    Ok(S::from_counts(wins as u64, pairs.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    type Q = Ratio<u128>;

    const EXAMPLE: [(u64, u64); 3] = [(50, 100), (80, 100), (120, 100)];

    fn q(n: u128, d: u128) -> Q {
        Ratio::new(n, d)
    }

    #[test]
    fn worked_examples() {
        assert_eq!(mrpp::<Q>(&EXAMPLE).unwrap(), q(4, 5));
        assert_eq!(win_rate::<Q>(&EXAMPLE, &q(1, 100)).unwrap(), q(2, 3));
        let same = [(7, 7), (3, 3), (10, 10), (1, 1)];
        assert_eq!(mrpp::<Q>(&same).unwrap(), q(1, 1));
        assert_eq!(win_rate::<Q>(&same, &q(1, 100)).unwrap(), q(0, 1));
    }

    #[test]
    fn even_count_and_zero_baselines() {
        assert_eq!(mrpp::<Q>(&[(1, 2), (3, 4), (5, 0)]).unwrap(), q(5, 8));
        assert!(matches!(mrpp::<Q>(&[(1, 0)]), Err(Error::NoBaseline)));
        // Zero baselines count in the denominator but never win.
        assert_eq!(win_rate::<Q>(&[(0, 0), (1, 2)], &q(1, 100)).unwrap(), q(1, 2));
        assert!(win_rate::<Q>(&[], &q(1, 100)).is_err());
    }

    #[test]
    fn boundary_is_inclusive() {
        assert_eq!(win_rate::<Q>(&[(99, 100)], &q(1, 100)).unwrap(), q(1, 1));
        assert_eq!(win_rate::<Q>(&[(991, 1000)], &q(1, 100)).unwrap(), q(0, 1));
    }

    #[test]
    fn float_scalars_agree_on_examples() {
        assert!((mrpp::<f64>(&EXAMPLE).unwrap() - 0.8).abs() < 1e-15);
        assert!((win_rate::<f32>(&EXAMPLE, &0.01).unwrap() - 2.0 / 3.0).abs() < 1e-6);
    }

    fn random_pairs(rng: &mut ChaCha8Rng) -> Vec<(u64, u64)> {
        let len = rng.gen_range(1..40);
        (0..len)
            .map(|_| {
                let base = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..2000) };
                (rng.gen_range(0..2500), base)
            })
            .collect()
    }

    /// Reference median: cross-multiplied comparisons on integer pairs, no
    /// rational type involved.
    fn reference_median(pairs: &[(u64, u64)]) -> Option<(u128, u128)> {
        let mut r: Vec<(u128, u128)> =
            pairs.iter().filter(|p| p.1 > 0).map(|&(a, b)| (a as u128, b as u128)).collect();
        if r.is_empty() {
            return None;
        }
        r.sort_by(|x, y| (x.0 * y.1).cmp(&(y.0 * x.1)));
        let k = r.len();
        if k % 2 == 1 {
            Some(r[k / 2])
        } else {
            let (a, b) = r[k / 2 - 1];
            let (c, d) = r[k / 2];
            Some((a * d + c * b, 2 * b * d))
        }
    }

    #[test]
    fn matches_reference_oracles() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..10_000 {
            let pairs = random_pairs(&mut rng);
            match reference_median(&pairs) {
                Some((n, d)) => assert_eq!(mrpp::<Q>(&pairs).unwrap(), q(n, d)),
                None => assert!(mrpp::<Q>(&pairs).is_err()),
            }
            let dn = rng.gen_range(0..50u64);
            // p <= (1 - dn/100) p'  <=>  100 p <= (100 - dn) p'
            let wins = pairs.iter().filter(|&&(p, b)| b > 0 && 100 * p <= (100 - dn) * b).count();
            assert_eq!(
                win_rate::<Q>(&pairs, &q(dn as u128, 100)).unwrap(),
                q(wins as u128, pairs.len() as u128)
            );
        }
    }

    proptest! {
        #[test]
        fn invariant_under_order_and_scale(
            pairs in prop::collection::vec((0u64..5000, 0u64..5000), 1..30),
            seed in any::<u64>(),
            c in 1u64..1000,
        ) {
            use rand::seq::SliceRandom;
            let delta = q(1, 100);
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let scaled: Vec<_> = pairs.iter().map(|&(a, b)| (a * c, b * c)).collect();
            let m = mrpp::<Q>(&pairs).ok();
            prop_assert_eq!(mrpp::<Q>(&shuffled).ok(), m);
            prop_assert_eq!(mrpp::<Q>(&scaled).ok(), m);
            let w = win_rate::<Q>(&pairs, &delta).unwrap();
            prop_assert_eq!(win_rate::<Q>(&shuffled, &delta).unwrap(), w);
            prop_assert_eq!(win_rate::<Q>(&scaled, &delta).unwrap(), w);
            prop_assert!(w <= q(1, 1));
        }
    }
}
