//! Digit expansions, Kummer carry counting and the prime-set type.
//!
//! `nu_p(binom(2n, n))` equals the number of carries produced when `n` is
//! added to itself in base `p`. [`kummer_valuation`] counts those carries
//! directly from the base-`p` digits; [`central_binomial_factor_oracle`]
//! builds `binom(2n, n)` exactly and divides the prime out, and exists only
//! to cross-check the former.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Little-endian base-`b` expansion. Zero is the empty digit list.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DigitVector {
    base: u64,
    digits: Vec<u64>,
}

impl DigitVector {
    pub fn base(&self) -> u64 {
        self.base
    }

    pub fn digits(&self) -> &[u64] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Digit at `position`, zero beyond the top.
    pub fn digit(&self, position: usize) -> u64 {
        self.digits.get(position).copied().unwrap_or(0)
    }

    /// Builds a vector from raw digits, trimming high zeros.
    pub fn from_digits(base: u64, mut digits: Vec<u64>) -> Result<Self> {
        if base < 2 {
            return Err(Error::InvalidBase(base));
        }
        if let Some(&d) = digits.iter().find(|&&d| d >= base) {
            return Err(Error::InvalidParameter(format!(
                "digit {d} out of range for base {base}"
            )));
        }
        while digits.last() == Some(&0) {
            digits.pop();
        }
        Ok(Self { base, digits })
    }

    /// Reconstructs `sum digits[i] * base^i`.
    pub fn value(&self) -> BigUint {
        let mut acc = BigUint::zero();
        for &d in self.digits.iter().rev() {
            acc *= self.base;
            acc += d;
        }
        acc
    }

    /// Schoolbook addition of two expansions in the same base.
    ///
    /// Returns the sum and the number of positions that produced a carry.
    pub fn add_longhand(&self, other: &DigitVector) -> Result<(DigitVector, u32)> {
        if self.base != other.base {
            return Err(Error::InvalidParameter(format!(
                "cannot add base {} and base {} expansions",
                self.base, other.base
            )));
        }
        let width = self.len().max(other.len());
        let mut out = Vec::with_capacity(width + 1);
        let mut carry = 0u64;
        let mut carries = 0u32;
        for i in 0..width {
            let column = self.digit(i) + other.digit(i) + carry;
            if column >= self.base {
                out.push(column - self.base);
                carry = 1;
                carries += 1;
            } else {
                out.push(column);
                carry = 0;
            }
        }
        if carry == 1 {
            out.push(1);
        }
        Ok((DigitVector::from_digits(self.base, out)?, carries))
    }
}

/// Canonical little-endian expansion of `n` in `base`.
pub fn to_digits(n: &BigUint, base: u64) -> Result<DigitVector> {
    if base < 2 {
        return Err(Error::InvalidBase(base));
    }
    // Peel off chunks of base^k that fit in a u64, then split each chunk.
    let mut chunk_pow = 1u32;
    let mut chunk = base;
    while let Some(next) = chunk.checked_mul(base) {
        chunk = next;
        chunk_pow += 1;
    }
    let chunk_big = BigUint::from(chunk);
    let mut digits = Vec::new();
    let mut rest = n.clone();
    while !rest.is_zero() {
        let (q, r) = rest.div_rem(&chunk_big);
        let mut r = r.to_u64().expect("remainder below a u64 chunk");
        if q.is_zero() {
            while r > 0 {
                digits.push(r % base);
                r /= base;
            }
        } else {
            for _ in 0..chunk_pow {
                digits.push(r % base);
                r /= base;
            }
        }
        rest = q;
    }
    Ok(DigitVector { base, digits })
}

/// Digits of a machine integer, least significant first.
pub fn small_digits(mut n: u128, base: u64) -> Vec<u64> {
    let b = base as u128;
    let mut out = Vec::new();
    while n > 0 {
        out.push((n % b) as u64);
        n /= b;
    }
    out
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

const TRIAL_DIVISION_LIMIT: u64 = 1 << 20;

/// Witnesses valid for every n < 3.3 * 10^24, which covers u64.
const MILLER_RABIN_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Deterministic primality: trial division below 2^20, Miller-Rabin above.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3u64;
    while d <= TRIAL_DIVISION_LIMIT && d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    if d * d > n {
        return true;
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &MILLER_RABIN_WITNESSES {
        if a % n == 0 {
            continue;
        }
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Rejects anything that is not an odd prime.
pub fn ensure_odd_prime(p: u64) -> Result<()> {
    if p == 2 || !is_prime(p) {
        return Err(Error::NotOddPrime(p));
    }
    Ok(())
}

/// A non-empty list of distinct odd primes, kept in the caller's order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u64>", into = "Vec<u64>")]
pub struct PrimeSet(Vec<u64>);

impl PrimeSet {
    pub fn new(primes: Vec<u64>) -> Result<Self> {
        if primes.is_empty() {
            return Err(Error::EmptyPrimeSet);
        }
        for (i, &p) in primes.iter().enumerate() {
            ensure_odd_prime(p)?;
            if primes[..i].contains(&p) {
                return Err(Error::RepeatedPrime(p));
            }
        }
        Ok(Self(primes))
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.0.iter().copied()
    }

    pub fn min(&self) -> u64 {
        *self.0.iter().min().expect("prime set is non-empty")
    }

    pub fn max(&self) -> u64 {
        *self.0.iter().max().expect("prime set is non-empty")
    }

    /// Parses a comma-separated list such as `3,5,7`.
    pub fn parse(list: &str) -> Result<Self> {
        let primes = list
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<u64>()
                    .map_err(|_| Error::InvalidParameter(format!("not an integer: {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(primes)
    }
}

impl TryFrom<Vec<u64>> for PrimeSet {
    type Error = Error;

    fn try_from(v: Vec<u64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PrimeSet> for Vec<u64> {
    fn from(p: PrimeSet) -> Self {
        p.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationReport {
    #[serde(with = "decimal")]
    pub n: BigUint,
    pub prime: u64,
    pub valuation: u32,
    pub digit_count: u32,
    pub trivial_bound: u32,
}

/// `nu_p(binom(2n, n))` as the number of carries in `n + n` base `p`.
pub fn kummer_valuation(n: &BigUint, p: u64) -> Result<ValuationReport> {
    ensure_odd_prime(p)?;
    let digits = to_digits(n, p)?;
    let valuation = carries_of_doubling(&digits);
    let digit_count = digits.len() as u32;
    Ok(ValuationReport {
        n: n.clone(),
        prime: p,
        valuation,
        digit_count,
        trivial_bound: digit_count.max(1),
    })
}

/// Carry count of `d + d` for an expansion `d`, base `d.base()`.
pub fn carries_of_doubling(d: &DigitVector) -> u32 {
    let p = d.base();
    let mut carry = 0u64;
    let mut count = 0;
    for &digit in d.digits() {
        if 2 * digit + carry >= p {
            carry = 1;
            count += 1;
        } else {
            carry = 0;
        }
    }
    count
}

/// Number of base-`p` digits of `n >= 1`, i.e. `1 + floor(log n / log p)`.
pub fn trivial_bound(n: &BigUint, p: u64) -> Result<u32> {
    if n.is_zero() {
        return Err(Error::InvalidParameter("trivial bound needs n >= 1".into()));
    }
    ensure_odd_prime(p)?;
    Ok(to_digits(n, p)?.len() as u32)
}

pub const FACTOR_ORACLE_CAP: u64 = 10_000;

/// Exact `binom(2n, n)` for `n <= FACTOR_ORACLE_CAP`.
pub fn central_binomial(n: u64) -> Result<BigUint> {
    if n > FACTOR_ORACLE_CAP {
        return Err(Error::OracleCap {
            n,
            cap: FACTOR_ORACLE_CAP,
        });
    }
    // binom(n + k, k) = binom(n + k - 1, k - 1) * (n + k) / k stays integral.
    let mut c = BigUint::one();
    for k in 1..=n {
        c *= n + k;
        c /= k;
    }
    Ok(c)
}

/// `nu_p(binom(2n, n))` for each prime, by building the coefficient and
/// dividing each prime out.
pub fn central_binomial_factor_oracle(n: u64, primes: &PrimeSet) -> Result<Vec<u32>> {
    let c = central_binomial(n)?;
    Ok(primes.iter().map(|p| valuation_by_division(&c, p)).collect())
}

/// Exponent of `p` in `x` by repeated division; `x` must be nonzero.
pub fn valuation_by_division(x: &BigUint, p: u64) -> u32 {
    let p = BigUint::from(p);
    let mut x = x.clone();
    let mut v = 0;
    loop {
        let (q, r) = x.div_rem(&p);
        if !r.is_zero() {
            return v;
        }
        x = q;
        v += 1;
    }
}

/// Serde adapter writing big integers as decimal strings.
pub mod decimal {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(n: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&n.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let s = String::deserialize(d)?;
        BigUint::parse_bytes(s.as_bytes(), 10)
            .ok_or_else(|| serde::de::Error::custom(format!("bad decimal integer {s:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(n: u64) -> BigUint {
        BigUint::from(n)
    }

    #[test]
    fn digits_examples() {
        assert_eq!(to_digits(&big(10), 3).unwrap().digits(), &[1, 0, 1]);
        assert!(to_digits(&big(0), 7).unwrap().is_empty());
        assert_eq!(to_digits(&big(756), 7).unwrap().digits(), &[0, 3, 1, 2]);
        assert!(matches!(to_digits(&big(5), 1), Err(Error::InvalidBase(1))));
    }

    #[test]
    fn digits_of_large_values_split_chunks_correctly() {
        let n = BigUint::from(3u32).pow(100) - 1u32;
        let d = to_digits(&n, 3).unwrap();
        assert_eq!(d.len(), 100);
        assert!(d.digits().iter().all(|&x| x == 2));
        assert_eq!(d.value(), n);
    }

    #[test]
    fn from_digits_trims_and_validates() {
        let d = DigitVector::from_digits(5, vec![1, 0, 0]).unwrap();
        assert_eq!(d.digits(), &[1]);
        assert!(DigitVector::from_digits(5, vec![5]).is_err());
        assert!(DigitVector::from_digits(5, vec![0, 0]).unwrap().is_empty());
    }

    #[test]
    fn kummer_examples() {
        assert_eq!(kummer_valuation(&big(5), 3).unwrap().valuation, 2);
        assert_eq!(kummer_valuation(&big(1), 3).unwrap().valuation, 0);
        assert_eq!(kummer_valuation(&big(10), 7).unwrap().valuation, 0);
        assert!(matches!(
            kummer_valuation(&big(5), 9),
            Err(Error::NotOddPrime(9))
        ));
        assert!(matches!(
            kummer_valuation(&big(5), 2),
            Err(Error::NotOddPrime(2))
        ));
    }

    #[test]
    fn oracle_examples() {
        let s = PrimeSet::new(vec![3, 5, 7]).unwrap();
        assert_eq!(central_binomial_factor_oracle(5, &s).unwrap(), vec![2, 0, 1]);
        assert_eq!(
            central_binomial_factor_oracle(0, &PrimeSet::new(vec![3]).unwrap()).unwrap(),
            vec![0]
        );
        assert_eq!(central_binomial_factor_oracle(10, &s).unwrap(), vec![0, 0, 0]);
        assert!(matches!(
            central_binomial_factor_oracle(10_001, &s),
            Err(Error::OracleCap { .. })
        ));
        assert_eq!(central_binomial(10).unwrap(), big(184_756));
    }

    #[test]
    fn trivial_bound_examples() {
        assert_eq!(trivial_bound(&big(756), 7).unwrap(), 4);
        assert_eq!(trivial_bound(&big(1), 3).unwrap(), 1);
        assert_eq!(trivial_bound(&BigUint::from(3u32).pow(10), 3).unwrap(), 11);
        assert!(trivial_bound(&big(0), 3).is_err());
    }

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            small,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(is_prime(1_000_003));
        assert!(is_prime(18_446_744_073_709_551_557));
        assert!(!is_prime(3_215_031_751)); // strong pseudoprime to 2, 3, 5, 7
        assert!(!is_prime((1u64 << 20) + 1));
        assert!(!is_prime(1_000_003 * 1_000_033));
    }

    #[test]
    fn prime_set_validation() {
        assert!(PrimeSet::new(vec![3, 5, 3]).is_err());
        assert!(PrimeSet::new(vec![2, 3]).is_err());
        assert!(PrimeSet::new(vec![]).is_err());
        assert_eq!(PrimeSet::parse("3, 5,7").unwrap().as_slice(), &[3, 5, 7]);
        assert!(PrimeSet::parse("3,x").is_err());
    }

    #[test]
    fn longhand_addition_counts_carries() {
        let a = to_digits(&big(5), 3).unwrap();
        let (sum, carries) = a.add_longhand(&a).unwrap();
        assert_eq!(sum.value(), big(10));
        assert_eq!(carries, 2);
    }
}
