use lowmult_core::arith::{
    central_binomial_factor_oracle, kummer_valuation, small_digits, to_digits, trivial_bound,
    DigitVector, PrimeSet,
};
use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use proptest::prelude::*;

// Legendre: v_p(m!) = sum_i floor(m / p^i).
fn legendre_factorial(m: &BigUint, p: u64) -> BigUint {
    let mut total = BigUint::zero();
    let mut q = m / p;
    while !q.is_zero() {
        total += &q;
        q /= p;
    }
    total
}

fn legendre_central(n: &BigUint, p: u64) -> u64 {
    (legendre_factorial(&(n * 2u32), p) - legendre_factorial(n, p) * 2u32)
        .to_u64()
        .unwrap()
}

#[test]
fn kummer_matches_factorization_up_to_2000() {
    let primes = PrimeSet::new(vec![3, 5, 7, 11, 13]).unwrap();
    for n in 0..=2000u64 {
        let direct = central_binomial_factor_oracle(n, &primes).unwrap();
        for (k, p) in primes.iter().enumerate() {
            let v = kummer_valuation(&BigUint::from(n), p).unwrap().valuation;
            assert_eq!(v, direct[k], "n={n} p={p}");
        }
    }
}

#[test]
fn small_examples() {
    assert_eq!(kummer_valuation(&BigUint::from(5u32), 3).unwrap().valuation, 2);
    assert_eq!(kummer_valuation(&BigUint::from(756u32), 7).unwrap().valuation, 0);
    assert_eq!(kummer_valuation(&BigUint::zero(), 3).unwrap().valuation, 0);
}

proptest! {
    #[test]
    fn digits_round_trip(n in any::<u128>(), base in prop::sample::select(vec![3u64, 5, 7, 10, 11, 1009, 65_537])) {
        let big = BigUint::from(n);
        let d = to_digits(&big, base).unwrap();
        prop_assert_eq!(d.value(), big);
        prop_assert!(d.digits().iter().all(|&x| x < base));
        let small = small_digits(n, base);
        prop_assert_eq!(d.digits(), small.as_slice());
        let again = DigitVector::from_digits(base, d.digits().to_vec()).unwrap();
        prop_assert_eq!(again, d);
    }

    #[test]
    fn kummer_matches_legendre(hi in any::<u128>(), lo in any::<u64>(), p in prop::sample::select(vec![3u64, 5, 7, 11, 13, 101, 1009, 999_983])) {
        let n = (BigUint::from(hi) << 64u32) + lo;
        let rep = kummer_valuation(&n, p).unwrap();
        prop_assert_eq!(rep.valuation as u64, legendre_central(&n, p));
        prop_assert!(rep.valuation <= trivial_bound(&n, p).unwrap());
    }

    #[test]
    fn longhand_doubling_carries(n in any::<u128>(), p in prop::sample::select(vec![3u64, 5, 7, 13])) {
        let d = to_digits(&BigUint::from(n), p).unwrap();
        let (sum, carries) = d.add_longhand(&d).unwrap();
        prop_assert_eq!(sum.value(), BigUint::from(n) * 2u32);
        prop_assert_eq!(carries as u64, legendre_central(&BigUint::from(n), p));
    }
}
