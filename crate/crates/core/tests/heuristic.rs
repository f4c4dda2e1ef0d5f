use lowmult_core::arith::PrimeSet;
use lowmult_core::heuristics::{condition_sum, predicted_count, Verdict};
use num_bigint::BigUint;
use proptest::prelude::*;

const PRIMES: [u64; 10] = [3, 5, 7, 11, 13, 17, 19, 23, 29, 31];

proptest! {
    #[test]
    fn adding_a_prime_raises_sigma(picks in prop::sample::subsequence(PRIMES.to_vec(), 1..9), extra in prop::sample::select(PRIMES.to_vec())) {
        prop_assume!(!picks.contains(&extra));
        let base = condition_sum(&PrimeSet::new(picks.clone()).unwrap()).unwrap();
        let mut more = picks.clone();
        more.push(extra);
        let bigger = condition_sum(&PrimeSet::new(more).unwrap()).unwrap();
        prop_assert!(bigger.sigma > base.sigma);
    }

    #[test]
    fn order_does_not_matter(picks in prop::sample::subsequence(PRIMES.to_vec(), 1..=10), seed in any::<u64>()) {
        let mut shuffled = picks.clone();
        // Deterministic rotation plus reversal stands in for a shuffle.
        let k = (seed as usize) % shuffled.len();
        shuffled.rotate_left(k);
        if seed % 2 == 1 {
            shuffled.reverse();
        }
        let a = condition_sum(&PrimeSet::new(picks).unwrap()).unwrap();
        let b = condition_sum(&PrimeSet::new(shuffled).unwrap()).unwrap();
        prop_assert!((a.sigma - b.sigma).abs() < 1e-15);
        prop_assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn predicted_count_grows_with_limit(a in 1u64..u64::MAX / 2, b in 1u64..u64::MAX / 2) {
        let s = PrimeSet::new(vec![3, 5, 7]).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(predicted_count(&s, &BigUint::from(lo)).unwrap() <= predicted_count(&s, &BigUint::from(hi)).unwrap());
    }
}

#[test]
fn graham_sigma() {
    let r = condition_sum(&PrimeSet::new(vec![3, 5, 7]).unwrap()).unwrap();
    assert!((r.sigma - 0.9740).abs() <= 5e-4);
    assert_eq!(r.verdict, Verdict::ExpectInfinite);
}
