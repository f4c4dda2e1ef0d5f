//! Block-by-block construction of `n` with few large base-`p` digits.
//!
//! `n` is assembled in base 2 as
//! `n_0 2^(l N' + t) + n_1 2^(l (N' - 1) + t) + ... + n_N' 2^t` with `n_0 = 1`.
//! Block `d` picks the least multiplier `s` for which, for every prime, the
//! base-`p` digits of the running sum at positions `m_{j,d} - H .. m_{j,d} - 1`
//! are all at most `floor(p / 3)`; if none exists within the budget the block
//! is left empty.
//!
//! Every quantity in a build is a ratio of a power of two and a prime power,
//! so membership tests in the build run on exact integers. The certified
//! fixed-point route ([`alpha_fixed`], [`u_membership`], [`find_s_fixed`])
//! serves arbitrary real inputs and cross-checks the exact one.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{decimal, ensure_odd_prime, kummer_valuation, to_digits, PrimeSet};
use crate::{Error, Fixed, Result};

/// Fractional bits carried by `log 2 / log p`.
pub const RATIO_BITS: u32 = 192;

/// Per-prime parameters: the prime, `log 2 / log p` and the window length `H`.
#[derive(Clone, Debug)]
pub struct FracContext {
    prime: u64,
    ratio: Fixed,
    h: u32,
}

impl FracContext {
    pub fn new(prime: u64, h: u32) -> Result<Self> {
        ensure_odd_prime(prime)?;
        if h == 0 {
            return Err(Error::InvalidParameter("H must be positive".into()));
        }
        Ok(Self {
            prime,
            ratio: Fixed::log2_over_log(prime, RATIO_BITS)?,
            h,
        })
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn ratio(&self) -> &Fixed {
        &self.ratio
    }

    /// Largest admissible digit, `floor(p / 3)`.
    pub fn cap(&self) -> u64 {
        self.prime / 3
    }

    /// `p^H`.
    pub fn window_modulus(&self) -> u64 {
        self.prime.pow(self.h)
    }

    /// True when the `H` base-`p` digits of `q < p^H` are all within the cap.
    fn window_ok(&self, mut q: u64) -> bool {
        let cap = self.cap();
        for _ in 0..self.h {
            if q % self.prime > cap {
                return false;
            }
            q /= self.prime;
        }
        true
    }
}

/// `2^two_exp / p^prime_exp`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerFraction {
    pub two_exp: u64,
    pub prime: u64,
    pub prime_exp: u64,
}

impl PowerFraction {
    pub fn numer(&self) -> BigUint {
        BigUint::one() << self.two_exp
    }

    pub fn denom(&self) -> BigUint {
        BigUint::from(self.prime).pow(self.prime_exp as u32)
    }

    pub fn to_fixed(&self, bits: u32) -> Fixed {
        Fixed::from_ratio(&BigInt::from(self.numer()), &BigInt::from(self.denom()), bits)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_fixed(64).to_f64()
    }
}

/// `floor(e log 2 / log p) + 1`: the exponent placing `2^e / p^m` in
/// `[1/p, 1)`. Certified, then confirmed with integer powers.
pub fn exponent_m(e: u64, ctx: &FracContext) -> Result<u64> {
    let m = ctx
        .ratio
        .mul_int(&BigInt::from(e))
        .floor()?
        .to_u64()
        .ok_or_else(|| Error::InvalidParameter(format!("exponent {e} too large")))?
        + 1;
    let two_e = BigUint::one() << e;
    let p = BigUint::from(ctx.prime);
    let upper = p.pow(m as u32);
    let lower = &upper / &p;
    if !(lower <= two_e && two_e < upper) {
        return Err(Error::InvariantViolation(format!(
            "2^{e} / {}^{m} is not in [1/p, 1)",
            ctx.prime
        )));
    }
    Ok(m)
}

/// `p^(frac(n log 2 / log p) - 1)` as the exact fraction `2^n / p^m`.
pub fn alpha(n: u64, ctx: &FracContext) -> Result<PowerFraction> {
    Ok(PowerFraction {
        two_exp: n,
        prime: ctx.prime,
        prime_exp: exponent_m(n, ctx)?,
    })
}

/// `p^(frac(n log 2 / log p) - 1)` through `exp` and `log`, certified.
pub fn alpha_fixed(n: u64, ctx: &FracContext, bits: u32) -> Result<Fixed> {
    let w = bits + 32;
    let ratio = ctx.ratio.with_bits(w);
    let frac = ratio.mul_int(&BigInt::from(n)).frac()?;
    let one = Fixed::from_int(1, w);
    let ln_p = Fixed::ln_u64(ctx.prime, w)?;
    let v = frac.sub(&one).mul(&ln_p).exp()?;
    Ok(v.with_bits(bits))
}

/// Whether `x` lies in `U(H)`: its first `H` base-`p` fractional digits are
/// all at most `floor(p / 3)`.
pub fn u_membership(x: &Fixed, ctx: &FracContext) -> Result<bool> {
    let whole = x.floor()?;
    if !whole.is_zero() {
        return Err(Error::InvalidParameter(format!(
            "u_membership needs x in [0, 1), got {}",
            x.to_f64()
        )));
    }
    let scaled = x.mul_int(&BigInt::from(ctx.window_modulus()));
    let q = scaled.floor()?.to_u64().expect("0 <= q < p^H");
    Ok(ctx.window_ok(q))
}

/// Least `s` in `[1, s_max]` with `frac(s alpha_j + beta_j)` in `U_j(H)` for
/// every `j`, for arbitrary certified reals.
pub fn find_s_fixed(
    alphas: &[Fixed],
    betas: &[Fixed],
    contexts: &[FracContext],
    s_max: u64,
) -> Result<Option<u64>> {
    check_lengths(alphas.len(), betas.len(), contexts.len(), s_max)?;
    'scan: for s in 1..=s_max {
        for ((a, b), ctx) in alphas.iter().zip(betas).zip(contexts) {
            let x = b.add(&a.mul_i64(s as i64)).frac()?;
            if !u_membership(&x, ctx)? {
                continue 'scan;
            }
        }
        return Ok(Some(s));
    }
    Ok(None)
}

/// Residue walk for one prime: `x_s = (start + s step) / modulus mod 1`.
#[derive(Clone, Debug)]
pub struct ExactTarget {
    pub modulus_exp: u64,
    pub step: BigUint,
    pub start: BigUint,
}

impl ExactTarget {
    /// Target for `alpha = 2^e / p^m` and `beta = frac(partial / p^m)`.
    pub fn for_block(e: u64, m: u64, partial: &BigUint, ctx: &FracContext) -> Self {
        let modulus = BigUint::from(ctx.prime).pow(m as u32);
        Self {
            modulus_exp: m,
            step: (BigUint::one() << e) % &modulus,
            start: partial % &modulus,
        }
    }
}

/// Exact counterpart of [`find_s_fixed`] for prime-power denominators.
pub fn find_s_exact(targets: &[ExactTarget], contexts: &[FracContext], s_max: u64) -> Result<Option<u64>> {
    check_lengths(targets.len(), targets.len(), contexts.len(), s_max)?;
    struct Walk<'a> {
        ctx: &'a FracContext,
        modulus: BigUint,
        step: BigUint,
        residue: BigUint,
        down: Option<BigUint>,
        up: u64,
    }
    let mut walks: Vec<Walk> = targets
        .iter()
        .zip(contexts)
        .map(|(t, ctx)| {
            let p = BigUint::from(ctx.prime);
            let modulus = p.pow(t.modulus_exp as u32);
            let h = ctx.h as u64;
            let (down, up) = if t.modulus_exp >= h {
                (Some(p.pow((t.modulus_exp - h) as u32)), 1)
            } else {
                (None, ctx.prime.pow((h - t.modulus_exp) as u32))
            };
            Walk {
                ctx,
                step: &t.step % &modulus,
                residue: &t.start % &modulus,
                modulus,
                down,
                up,
            }
        })
        .collect();
    for s in 1..=s_max {
        let mut all = true;
        for w in walks.iter_mut() {
            w.residue += &w.step;
            if w.residue >= w.modulus {
                w.residue -= &w.modulus;
            }
            if all {
                let q = match &w.down {
                    Some(d) => (&w.residue / d).to_u64().expect("q < p^H"),
                    None => w.residue.to_u64().expect("residue < p^H") * w.up,
                };
                all = w.ctx.window_ok(q);
            }
        }
        if all {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

fn check_lengths(a: usize, b: usize, c: usize, s_max: u64) -> Result<()> {
    if a != b || a != c {
        return Err(Error::InvalidParameter(format!(
            "mismatched lengths {a}, {b}, {c}"
        )));
    }
    if s_max == 0 {
        return Err(Error::InvalidParameter("s_max must be at least 1".into()));
    }
    Ok(())
}

/// The unique `l` with `4^l < p^H < 4^(l+1)`.
pub fn choose_ell(p_min: u64, h: u32) -> u32 {
    let bits = BigUint::from(p_min).pow(h).bits();
    ((bits - 1) / 2) as u32
}

/// `max(2, ceil(log log N))`.
pub fn default_h(big_n: u64) -> u32 {
    let ll = (big_n.max(3) as f64).ln().ln().ceil();
    (ll as u32).max(2)
}

/// `10^(10 r^2 H)`.
pub fn theoretical_s_bound(r: usize, h: u32) -> BigUint {
    BigUint::from(10u32).pow(10 * (r * r) as u32 * h)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Sharp,
    Flat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub d: u64,
    pub kind: BlockKind,
    pub multiplier: u64,
}

/// Which limit on `s` was in force.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SBound {
    Budget,
    Theoretical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    #[serde(with = "decimal")]
    pub n: BigUint,
    pub primes: PrimeSet,
    pub big_n: u64,
    pub h: u32,
    pub ell: u32,
    pub t: u32,
    pub n_prime: u64,
    pub s_max: u64,
    pub s_bound: SBound,
    pub per_prime_digit_count: Vec<(u64, u64)>,
    pub per_prime_bad_digits: Vec<(u64, u64)>,
    pub per_prime_valuation: Vec<(u64, u32)>,
    /// Consecutive `m_{j,h}` pairs whose gap is not in `[1, H - 1]`.
    pub per_prime_gap_violations: Vec<(u64, u64)>,
    pub sharp_blocks: u64,
    pub flat_blocks: u64,
    /// Sharp blocks whose digit window failed direct inspection.
    pub window_violations: u64,
    /// Blocks that changed a digit above the locality cutoff.
    pub locality_violations: u64,
    pub blocks: Vec<BlockRecord>,
}

impl BuildReport {
    /// Largest `bad_j / digit_count_j` as an exact pair.
    pub fn worst_bad_fraction(&self) -> (u64, u64) {
        self.per_prime_bad_digits
            .iter()
            .zip(&self.per_prime_digit_count)
            .map(|(&(_, bad), &(_, len))| (bad, len.max(1)))
            .max_by(|a, b| (a.0 as u128 * b.1 as u128).cmp(&(b.0 as u128 * a.1 as u128)))
            .unwrap_or((0, 1))
    }

    pub fn flat_fraction(&self) -> f64 {
        self.flat_blocks as f64 / (self.sharp_blocks + self.flat_blocks).max(1) as f64
    }
}

/// Per-step state of one build.
#[derive(Clone, Debug)]
pub struct ConstructionState {
    primes: PrimeSet,
    contexts: Vec<FracContext>,
    big_n: u64,
    h: u32,
    ell: u32,
    t: u32,
    n_prime: u64,
    s_max: u64,
    s_bound: SBound,
    partial_n: BigUint,
    d: u64,
    /// `m[j][h]` for `h = 0..=N'`.
    m: Vec<Vec<u64>>,
    betas: Vec<BigUint>,
    ledger: Vec<BlockRecord>,
    window_violations: u64,
    locality_violations: u64,
}

impl ConstructionState {
    pub fn new(primes: &PrimeSet, big_n: u64, h: u32, t: u32, budget: u64) -> Result<Self> {
        if budget == 0 {
            return Err(Error::InvalidParameter("s budget must be at least 1".into()));
        }
        let contexts = primes
            .iter()
            .map(|p| FracContext::new(p, h))
            .collect::<Result<Vec<_>>>()?;
        let ell = choose_ell(primes.min(), h);
        if ell == 0 {
            return Err(Error::InvalidParameter(format!(
                "block length is 0 for p = {} and H = {h}; raise H",
                primes.min()
            )));
        }
        if t >= ell {
            return Err(Error::InvalidParameter(format!("t = {t} outside [0, {ell})")));
        }
        let n_prime = big_n / ell as u64;
        if n_prime < 1 {
            return Err(Error::InvalidParameter(format!(
                "N = {big_n} is shorter than one block of {ell} bits"
            )));
        }
        let m = contexts
            .iter()
            .map(|ctx| {
                (0..=n_prime)
                    .map(|hh| exponent_m(ell as u64 * (n_prime - hh) + t as u64, ctx))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let bound = theoretical_s_bound(primes.len(), h);
        let (s_max, s_bound) = if BigUint::from(budget) < bound {
            (budget, SBound::Budget)
        } else {
            (bound.to_u64().expect("smaller than a u64 budget"), SBound::Theoretical)
        };
        Ok(Self {
            primes: primes.clone(),
            contexts,
            big_n,
            h,
            ell,
            t,
            n_prime,
            s_max,
            s_bound,
            partial_n: BigUint::one() << (ell as u64 * n_prime + t as u64),
            d: 1,
            m,
            betas: vec![BigUint::zero(); primes.len()],
            ledger: Vec::new(),
            window_violations: 0,
            locality_violations: 0,
        })
    }

    pub fn partial_n(&self) -> &BigUint {
        &self.partial_n
    }

    /// Index of the next block to place.
    pub fn next_block(&self) -> u64 {
        self.d
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn n_prime(&self) -> u64 {
        self.n_prime
    }

    pub fn contexts(&self) -> &[FracContext] {
        &self.contexts
    }

    /// `m_{j,h}`.
    pub fn m(&self, j: usize, h: u64) -> u64 {
        self.m[j][h as usize]
    }

    /// Numerators of the most recent `beta_j` (denominator `p_j^m_{j,d}`).
    pub fn betas(&self) -> &[BigUint] {
        &self.betas
    }

    pub fn ledger(&self) -> &[BlockRecord] {
        &self.ledger
    }

    /// Places one block; `None` once all `N'` blocks are placed.
    pub fn step(&mut self) -> Result<Option<BlockRecord>> {
        if self.d > self.n_prime {
            return Ok(None);
        }
        let d = self.d;
        let e = self.ell as u64 * (self.n_prime - d) + self.t as u64;
        let targets: Vec<ExactTarget> = self
            .contexts
            .iter()
            .enumerate()
            .map(|(j, ctx)| ExactTarget::for_block(e, self.m[j][d as usize], &self.partial_n, ctx))
            .collect();
        self.betas = targets.iter().map(|t| t.start.clone()).collect();
        let found = find_s_exact(&targets, &self.contexts, self.s_max)?;
        let record = match found {
            Some(s) => {
                let before = self.partial_n.clone();
                self.partial_n += BigUint::from(s) << e;
                self.inspect(d, s, &before)?;
                BlockRecord {
                    d,
                    kind: BlockKind::Sharp,
                    multiplier: s,
                }
            }
            None => BlockRecord {
                d,
                kind: BlockKind::Flat,
                multiplier: 0,
            },
        };
        self.ledger.push(record.clone());
        self.d += 1;
        Ok(Some(record))
    }

    /// Digit-window and locality checks on the sum just updated by block `d`.
    fn inspect(&mut self, d: u64, s: u64, before: &BigUint) -> Result<()> {
        for (j, ctx) in self.contexts.iter().enumerate() {
            let p = ctx.prime;
            let m = self.m[j][d as usize];
            let after = to_digits(&self.partial_n, p)?;
            let lo = m.saturating_sub(ctx.h as u64);
            if (lo..m).any(|pos| after.digit(pos as usize) > ctx.cap()) {
                self.window_violations += 1;
            }
            let prior = to_digits(before, p)?;
            let s_len = to_digits(&BigUint::from(s), p)?.len() as u64;
            let cutoff = m + (s_len - 1) + 1;
            let top = after.len().max(prior.len()) as u64;
            if (cutoff + 1..top).any(|pos| after.digit(pos as usize) != prior.digit(pos as usize)) {
                self.locality_violations += 1;
            }
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<BuildReport> {
        while self.step()?.is_some() {}
        self.finish()
    }

    fn finish(self) -> Result<BuildReport> {
        let n = self.partial_n;
        let mut digit_count = Vec::new();
        let mut bad = Vec::new();
        let mut valuation = Vec::new();
        let mut gaps = Vec::new();
        for (j, ctx) in self.contexts.iter().enumerate() {
            let p = ctx.prime;
            let digits = to_digits(&n, p)?;
            digit_count.push((p, digits.len() as u64));
            bad.push((p, digits.digits().iter().filter(|&&c| c > ctx.cap()).count() as u64));
            valuation.push((p, kummer_valuation(&n, p)?.valuation));
            let violations = self.m[j]
                .windows(2)
                .filter(|w| {
                    let gap = w[0] as i64 - w[1] as i64;
                    gap <= 0 || gap >= ctx.h as i64
                })
                .count() as u64;
            gaps.push((p, violations));
        }
        let sharp = self
            .ledger
            .iter()
            .filter(|b| b.kind == BlockKind::Sharp)
            .count() as u64;
        Ok(BuildReport {
            n,
            primes: self.primes,
            big_n: self.big_n,
            h: self.h,
            ell: self.ell,
            t: self.t,
            n_prime: self.n_prime,
            s_max: self.s_max,
            s_bound: self.s_bound,
            per_prime_digit_count: digit_count,
            per_prime_bad_digits: bad,
            per_prime_valuation: valuation,
            per_prime_gap_violations: gaps,
            sharp_blocks: sharp,
            flat_blocks: self.ledger.len() as u64 - sharp,
            window_violations: self.window_violations,
            locality_violations: self.locality_violations,
            blocks: self.ledger,
        })
    }
}

pub fn build_n(primes: &PrimeSet, big_n: u64, h: u32, t: u32, budget: u64) -> Result<BuildReport> {
    ConstructionState::new(primes, big_n, h, t, budget)?.run()
}

/// Builds for every `t` in `[0, l)`, in parallel.
pub fn sweep_all(primes: &PrimeSet, big_n: u64, h: u32, budget: u64) -> Result<Vec<BuildReport>> {
    let ell = choose_ell(primes.min(), h);
    (0..ell)
        .into_par_iter()
        .map(|t| build_n(primes, big_n, h, t, budget))
        .collect()
}

/// The `t` minimising the worst per-prime bad-digit fraction; ties go to the
/// smaller `t`.
pub fn best_t_sweep(primes: &PrimeSet, big_n: u64, h: u32, budget: u64) -> Result<(u32, BuildReport)> {
    let reports = sweep_all(primes, big_n, h, budget)?;
    let mut best: Option<BuildReport> = None;
    for r in reports {
        let better = match &best {
            None => true,
            Some(b) => {
                let (x, y) = (r.worst_bad_fraction(), b.worst_bad_fraction());
                (x.0 as u128 * y.1 as u128) < (y.0 as u128 * x.1 as u128)
            }
        };
        if better {
            best = Some(r);
        }
    }
    let best = best.ok_or_else(|| {
        Error::InvalidParameter(format!("block length is 0 for p = {} and H = {h}", primes.min()))
    })?;
    Ok((best.t, best))
}

/// Exact `frac(x)` of a rational given as `numer / p^k`.
pub fn frac_numerator(numer: &BigUint, p: u64, k: u64) -> BigUint {
    numer.mod_floor(&BigUint::from(p).pow(k as u32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ctx(p: u64, h: u32) -> FracContext {
        FracContext::new(p, h).unwrap()
    }

    fn set(v: &[u64]) -> PrimeSet {
        PrimeSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let c = ctx(3, 1);
        for (n, num, den) in [(1u64, 2u64, 3u64), (2, 4, 9), (4, 16, 27), (0, 1, 3)] {
            let a = alpha(n, &c).unwrap();
            assert_eq!((a.numer(), a.denom()), (BigUint::from(num), BigUint::from(den)));
        }
    }

    #[test]
    fn alpha_routes_agree() {
        for p in [3u64, 5, 7, 11, 13] {
            let c = ctx(p, 1);
            for n in 0..=64u64 {
                let exact = alpha(n, &c).unwrap().to_fixed(160);
                let fixed = alpha_fixed(n, &c, 160).unwrap();
                let diff = exact.sub(&fixed);
                assert!(diff.to_f64().abs() <= diff.radius_f64() + 1e-40, "p={p} n={n}");
                let v = exact.to_f64();
                assert!(v >= 1.0 / p as f64 && v < 1.0);
            }
        }
    }

    #[test]
    fn u_membership_examples() {
        let c = ctx(7, 2);
        let f = |x: f64| u_membership(&Fixed::from_f64(x, 128), &c).unwrap();
        assert!(f(0.0));
        assert!(!f(0.5));
        assert!(f(0.3));
        assert!(u_membership(&Fixed::from_f64(1.5, 128), &c).is_err());
        // 1/7 sits on a digit boundary; its rounding interval straddles it.
        let seventh = Fixed::from_ratio(&BigInt::from(1), &BigInt::from(7), 128);
        assert!(matches!(u_membership(&seventh, &c), Err(Error::PrecisionExhausted(_))));
    }

    #[test]
    fn find_s_small_example() {
        let c = ctx(3, 1);
        let a = Fixed::from_ratio(&BigInt::from(2), &BigInt::from(3), 128);
        let b = Fixed::zero(128);
        // 1 * 2/3 lies exactly on a digit boundary: only the exact route decides.
        assert!(matches!(
            find_s_fixed(&[a], &[b], std::slice::from_ref(&c), 100),
            Err(Error::PrecisionExhausted(_))
        ));
        let target = ExactTarget {
            modulus_exp: 1,
            step: BigUint::from(2u32),
            start: BigUint::zero(),
        };
        assert_eq!(find_s_exact(&[target], &[c], 100).unwrap(), Some(2));
    }

    #[test]
    fn find_s_random_two_primes() {
        let cs = vec![ctx(11, 1), ctx(13, 1)];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0;
        for _ in 0..100 {
            let alphas: Vec<Fixed> = cs
                .iter()
                .map(|c| Fixed::from_f64(rng.gen_range(1.0 / c.prime() as f64..1.0), 128))
                .collect();
            let betas: Vec<Fixed> = cs.iter().map(|_| Fixed::from_f64(rng.gen(), 128)).collect();
            if let Some(s) = find_s_fixed(&alphas, &betas, &cs, 10_000).unwrap() {
                for ((a, b), c) in alphas.iter().zip(&betas).zip(&cs) {
                    let x = b.add(&a.mul_i64(s as i64)).frac().unwrap();
                    assert!(u_membership(&x, c).unwrap());
                }
                hits += 1;
            }
        }
        assert!(hits >= 90);
    }

    #[test]
    fn exact_and_fixed_find_s_agree() {
        let cs = vec![ctx(5, 2), ctx(7, 1)];
        for e in 10..40u64 {
            let partial = BigUint::from(3u32).pow(e as u32 / 2) + BigUint::from(e);
            let targets: Vec<ExactTarget> = cs
                .iter()
                .map(|c| ExactTarget::for_block(e, exponent_m(e, c).unwrap(), &partial, c))
                .collect();
            let alphas: Vec<Fixed> = cs.iter().map(|c| alpha(e, c).unwrap().to_fixed(256)).collect();
            let betas: Vec<Fixed> = targets
                .iter()
                .zip(&cs)
                .map(|(t, c)| {
                    Fixed::from_ratio(
                        &BigInt::from(t.start.clone()),
                        &BigInt::from(BigUint::from(c.prime()).pow(t.modulus_exp as u32)),
                        256,
                    )
                })
                .collect();
            assert_eq!(
                find_s_exact(&targets, &cs, 500).unwrap(),
                find_s_fixed(&alphas, &betas, &cs, 500).unwrap(),
                "e={e}"
            );
        }
    }

    #[test]
    fn choose_ell_examples() {
        assert_eq!(choose_ell(11, 3), 5);
        assert_eq!(choose_ell(3, 1), 0);
        assert_eq!(choose_ell(7, 4), 5);
        assert_eq!(choose_ell(1009, 2), 9);
        for (p, h) in [(3u64, 5u32), (5, 3), (101, 2), (1009, 2)] {
            let l = choose_ell(p, h);
            let ph = BigUint::from(p).pow(h);
            assert!(BigUint::from(4u32).pow(l) < ph && ph < BigUint::from(4u32).pow(l + 1));
        }
    }

    #[test]
    fn default_h_grows_slowly() {
        assert_eq!(default_h(200), 2);
        assert_eq!(default_h(10), 2);
        assert_eq!(default_h(1_000_000), 3);
    }

    #[test]
    fn rejects_bad_builds() {
        let s = set(&[3]);
        assert!(build_n(&s, 100, 1, 0, 100).is_err()); // l = 0
        let s = set(&[101]);
        assert!(build_n(&s, 100, 2, 6, 100).is_err()); // t >= l = 6
        assert!(build_n(&s, 3, 2, 0, 100).is_err()); // N' = 0
    }

    #[test]
    fn m_consistency_exact() {
        let s = set(&[5, 7, 11]);
        let st = ConstructionState::new(&s, 120, 2, 1, 1000).unwrap();
        for (j, c) in st.contexts().iter().enumerate() {
            for h in 0..=st.n_prime() {
                let e = st.ell() as u64 * (st.n_prime() - h) + 1;
                let v = BigRational::new(
                    BigInt::from(BigUint::one() << e),
                    BigInt::from(BigUint::from(c.prime()).pow(st.m(j, h) as u32)),
                );
                let lo = BigRational::new(BigInt::one(), BigInt::from(c.prime()));
                assert!(v >= lo && v < BigRational::one());
            }
        }
    }

    #[test]
    fn sharp_windows_and_locality_stepwise() {
        let s = set(&[11, 13]);
        let mut st = ConstructionState::new(&s, 150, 2, 2, 100_000).unwrap();
        assert_eq!(st.partial_n(), &(BigUint::one() << (st.ell() as u64 * st.n_prime() + 2)));
        while let Some(rec) = st.step().unwrap() {
            if rec.kind == BlockKind::Sharp {
                for (j, c) in st.contexts().iter().enumerate() {
                    let digits = to_digits(st.partial_n(), c.prime()).unwrap();
                    let m = st.m(j, rec.d);
                    for pos in m.saturating_sub(2)..m {
                        assert!(digits.digit(pos as usize) <= c.cap());
                    }
                }
            }
        }
        let report = st.run().unwrap();
        assert_eq!(report.window_violations, 0);
    }

    #[test]
    fn report_valuations_match_arith() {
        let s = set(&[101, 103]);
        let r = build_n(&s, 200, 2, 0, 100_000).unwrap();
        for &(p, v) in &r.per_prime_valuation {
            assert_eq!(v, kummer_valuation(&r.n, p).unwrap().valuation);
        }
        assert_eq!(r.sharp_blocks + r.flat_blocks, r.n_prime);
        assert_eq!(r.s_bound, SBound::Budget);
    }

    #[test]
    fn sweep_picks_the_minimum() {
        let s = set(&[101, 103]);
        let all = sweep_all(&s, 200, 2, 100_000).unwrap();
        let (t, best) = best_t_sweep(&s, 200, 2, 100_000).unwrap();
        assert_eq!(all.len(), 6);
        let bf = best.worst_bad_fraction();
        for r in &all {
            let f = r.worst_bad_fraction();
            assert!(bf.0 as u128 * f.1 as u128 <= f.0 as u128 * bf.1 as u128);
        }
        assert_eq!(&all[t as usize], &best);
    }

    #[test]
    fn theoretical_bound_binds_for_tiny_instances() {
        // r = 1 and H = 1 give 10^10, below a 10^12 budget.
        let st = ConstructionState::new(&set(&[7]), 50, 1, 0, 1_000_000_000_000).unwrap();
        assert_eq!((st.s_bound, st.s_max), (SBound::Theoretical, 10_000_000_000));
        let st = ConstructionState::new(&set(&[7]), 50, 1, 0, 1000).unwrap();
        assert_eq!((st.s_bound, st.s_max), (SBound::Budget, 1000));
    }
}
