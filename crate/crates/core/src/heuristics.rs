//! The digit-density criterion.
//!
//! For a random `n <= x`, the chance that every base-`p` digit of `n` is at
//! most `(p - 1) / 2` is about `x^(-e_p)` with
//! `e_p = -log(1/2 + 1/(2p)) / log p`. Treating the primes as independent,
//! about `x^(1 - sigma)` integers up to `x` avoid every carry, where
//! `sigma = sum e_p`; `sigma < 1` predicts infinitely many.

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::PrimeSet;
use crate::{Error, Fixed, Result};

/// Half-width of the band around 1 reported as [`Verdict::Borderline`].
pub const BORDERLINE_TOLERANCE: f64 = 1e-9;

/// Fractional bits for the logarithms behind `sigma`.
pub const HEURISTIC_BITS: u32 = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ExpectInfinite,
    ExpectFinite,
    Borderline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicReport {
    pub primes: PrimeSet,
    pub per_prime_exponent: Vec<f64>,
    pub sigma: f64,
    pub verdict: Verdict,
    pub predicted_count_exponent: f64,
}

/// `-log(1/2 + 1/(2p)) / log p = (log 2p - log(p + 1)) / log p`, certified.
pub fn prime_exponent(p: u64) -> Result<Fixed> {
    let w = HEURISTIC_BITS;
    let ln_p = Fixed::ln_u64(p, w)?;
    let num = Fixed::ln_u64(2 * p, w)?.sub(&Fixed::ln_u64(p + 1, w)?);
    num.div(&ln_p)
}

/// Certified `sigma` for a prime set.
pub fn sigma_fixed(primes: &PrimeSet) -> Result<Fixed> {
    let mut acc = Fixed::zero(HEURISTIC_BITS);
    for p in primes.iter() {
        acc = acc.add(&prime_exponent(p)?);
    }
    Ok(acc)
}

pub fn condition_sum(primes: &PrimeSet) -> Result<HeuristicReport> {
    let per_prime = primes
        .iter()
        .map(prime_exponent)
        .collect::<Result<Vec<_>>>()?;
    let mut sigma = Fixed::zero(HEURISTIC_BITS);
    for e in &per_prime {
        sigma = sigma.add(e);
    }
    let verdict = verdict_for(&sigma);
    let sigma_f = sigma.to_f64();
    Ok(HeuristicReport {
        primes: primes.clone(),
        per_prime_exponent: per_prime.iter().map(Fixed::to_f64).collect(),
        sigma: sigma_f,
        verdict,
        predicted_count_exponent: 1.0 - sigma_f,
    })
}

fn verdict_for(sigma: &Fixed) -> Verdict {
    let bits = sigma.bits();
    let lower = Fixed::from_f64(1.0 - BORDERLINE_TOLERANCE, bits);
    let upper = Fixed::from_f64(1.0 + BORDERLINE_TOLERANCE, bits);
    use std::cmp::Ordering::*;
    match (sigma.cmp_certified(&lower), sigma.cmp_certified(&upper)) {
        (Some(Less), _) => Verdict::ExpectInfinite,
        (_, Some(Greater)) => Verdict::ExpectFinite,
        _ => Verdict::Borderline,
    }
}

/// `limit^(1 - sigma)`, the expected number of carry-free `n <= limit`.
pub fn predicted_count(primes: &PrimeSet, limit: &BigUint) -> Result<f64> {
    if limit.is_zero() {
        return Err(Error::InvalidParameter("limit must be positive".into()));
    }
    let report = condition_sum(primes)?;
    Ok((ln_big(limit) * report.predicted_count_exponent).exp())
}

pub(crate) fn ln_big(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        n.to_f64().unwrap_or(f64::INFINITY).ln()
    } else {
        let shift = bits - 64;
        (n >> shift).to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[u64]) -> PrimeSet {
        PrimeSet::new(v.to_vec()).unwrap()
    }

    // f64 closed form, kept independent of the certified path.
    fn naive(p: u64) -> f64 {
        -(0.5 + 0.5 / p as f64).ln() / (p as f64).ln()
    }

    #[test]
    fn graham_primes() {
        let r = condition_sum(&set(&[3, 5, 7])).unwrap();
        assert!((r.sigma - 0.9740).abs() < 5e-4, "sigma = {}", r.sigma);
        assert_eq!(r.verdict, Verdict::ExpectInfinite);
        // Two-decimal exponents 0.37, 0.32, 0.29 (total 0.98 after rounding).
        let rounded: Vec<f64> = r
            .per_prime_exponent
            .iter()
            .map(|e| (e * 100.0).round() / 100.0)
            .collect();
        assert_eq!(rounded, vec![0.37, 0.32, 0.29]);
        assert!((r.predicted_count_exponent - (1.0 - r.sigma)).abs() < 1e-15);
    }

    #[test]
    fn single_and_five_primes() {
        let one = condition_sum(&set(&[3])).unwrap();
        assert!((one.sigma - 0.369_070_246_428_5).abs() < 1e-12);
        assert_eq!(one.verdict, Verdict::ExpectInfinite);
        let five = condition_sum(&set(&[3, 5, 7, 11, 13])).unwrap();
        assert!(five.sigma > 1.0);
        assert_eq!(five.verdict, Verdict::ExpectFinite);
        assert!((five.per_prime_exponent[3] - 0.25278).abs() < 1e-5);
        assert!((five.per_prime_exponent[4] - 0.24134).abs() < 1e-5);
    }

    #[test]
    fn certified_agrees_with_f64() {
        for p in [3u64, 5, 7, 11, 13, 101, 1009, 999_983] {
            let e = prime_exponent(p).unwrap();
            assert!((e.to_f64() - naive(p)).abs() < 1e-14, "p={p}");
            assert!(e.radius_f64() < 1e-30);
        }
    }

    #[test]
    fn rejects_bad_sets() {
        assert!(PrimeSet::new(vec![3, 3]).is_err());
        assert!(PrimeSet::new(vec![2, 3]).is_err());
    }

    #[test]
    fn predicted_counts() {
        let s = set(&[3, 5, 7]);
        let c = predicted_count(&s, &BigUint::from(1_000_000u32)).unwrap();
        assert!((c.log10() - 0.156).abs() < 0.005, "count {c}");
        let c3 = predicted_count(&set(&[3]), &BigUint::from(1_000_000u32)).unwrap();
        assert!((c3.log10() - 3.786).abs() < 0.005);
        assert_eq!(predicted_count(&s, &BigUint::from(1u32)).unwrap(), 1.0);
        assert!(predicted_count(&s, &BigUint::zero()).is_err());
    }

    #[test]
    fn exponent_below_log2_over_logp() {
        for p in [3u64, 5, 7, 101, 10_007, 999_983] {
            let e = naive(p);
            let cap = 2f64.ln() / (p as f64).ln();
            assert!(e > 0.0 && e < cap);
        }
        // Relative gap to the cap shrinks like 1/p.
        let p = 999_983f64;
        let gap = 2f64.ln() / p.ln() - naive(999_983);
        assert!(gap > 0.0 && gap < 2.0 / (p * p.ln()));
    }
}
