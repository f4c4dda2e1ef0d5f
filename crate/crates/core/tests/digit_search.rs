use lowmult_core::arith::PrimeSet;
use lowmult_core::search::{
    census, enumerate_prefix_pruned, enumerate_qualifying, CapPreset, Caps, DigitConstraintProblem,
    PrunedSearch, SearchCheckpoint,
};
use proptest::prelude::*;

fn set(v: &[u64]) -> PrimeSet {
    PrimeSet::new(v.to_vec()).unwrap()
}

// No carries in n + n base p, i.e. p does not divide binom(2n, n); decided
// through Legendre's formula rather than digits.
fn coprime_to_central(n: u64, p: u64) -> bool {
    let fact = |m: u64| {
        let mut t = 0;
        let mut q = m / p;
        while q > 0 {
            t += q;
            q /= p;
        }
        t
    };
    fact(2 * n) == 2 * fact(n)
}

#[test]
fn graham_set_matches_valuation_oracle() {
    let limit = 100_000u64;
    let problem = DigitConstraintProblem::graham(set(&[3, 5, 7]), limit as u128).unwrap();
    let expect: Vec<u128> = (1..=limit)
        .filter(|&n| [3, 5, 7].iter().all(|&p| coprime_to_central(n, p)))
        .map(u128::from)
        .collect();
    assert_eq!(enumerate_prefix_pruned(&problem).unwrap(), expect);
    assert_eq!(enumerate_qualifying(&problem).unwrap(), expect);
}

#[test]
fn graham_to_ten_million() {
    let problem = DigitConstraintProblem::graham(set(&[3, 5, 7]), 10_000_000).unwrap();
    let found = enumerate_prefix_pruned(&problem).unwrap();
    for n in [1u128, 10, 756, 757, 3160] {
        assert!(found.binary_search(&n).is_ok(), "{n} missing");
    }
    assert!(found.iter().all(|&n| problem.qualifies(n)));
}

#[test]
fn interrupted_search_resumes_to_same_result() {
    let problem = DigitConstraintProblem::graham(set(&[3, 5, 7]), 1_000_000).unwrap();
    let mut whole = PrunedSearch::new(&problem).unwrap();
    assert!(whole.run(None));
    let total_nodes = whole.node_count();
    let expect = whole.into_found();

    let mut first = PrunedSearch::new(&problem).unwrap();
    assert!(!first.run(Some(total_nodes / 2)));
    let bytes = first.into_checkpoint().to_bytes();
    let ck = SearchCheckpoint::load(bytes.as_slice()).unwrap();
    assert!(!ck.is_complete());
    let mut second = PrunedSearch::resume(&problem, ck).unwrap();
    assert!(second.run(None));
    assert_eq!(second.into_found(), expect);
}

#[test]
fn census_is_monotone() {
    let problem = DigitConstraintProblem::graham(set(&[3, 5]), 1 << 20).unwrap();
    let buckets = census(&problem, 4).unwrap();
    assert!(buckets.windows(2).all(|w| w[0].count <= w[1].count && w[0].upper < w[1].upper));
    assert!(buckets.windows(2).all(|w| w[0].predicted <= w[1].predicted));
    assert_eq!(buckets.last().unwrap().upper, 1 << 20);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pruned_agrees_with_exhaustive(
        limit in 1u128..40_000,
        primes in prop::sample::subsequence(vec![3u64, 5, 7, 11, 13], 1..=3),
        third in any::<bool>(),
        relax in prop::option::of(0.05f64..0.5),
    ) {
        let preset = if third { CapPreset::Third } else { CapPreset::Half };
        let problem = DigitConstraintProblem::new(set(&primes), Caps::Preset(preset), limit, relax).unwrap();
        prop_assert_eq!(enumerate_prefix_pruned(&problem).unwrap(), enumerate_qualifying(&problem).unwrap());
    }

    #[test]
    fn more_primes_never_add_solutions(limit in 1u128..20_000) {
        let few = DigitConstraintProblem::graham(set(&[3, 5]), limit).unwrap();
        let many = DigitConstraintProblem::graham(set(&[3, 5, 7]), limit).unwrap();
        let a = enumerate_prefix_pruned(&few).unwrap();
        let b = enumerate_prefix_pruned(&many).unwrap();
        prop_assert!(b.iter().all(|n| a.binary_search(n).is_ok()));
    }
}
