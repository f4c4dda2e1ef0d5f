//! Finite-sample diagnostics for the orbit `n -> (frac(n log 2 / log p_j))_j`.
//!
//! Orbit coordinates are stored as 128-bit binary fractions. Weyl-sum phases
//! `k . v_n mod 1` are therefore exact (wrapping `u128` arithmetic) and only
//! the final `cos`/`sin` is floating point.
//!
//! The relation-to-curve pipeline works for any [`RatioVector`], including
//! synthetic ones built to satisfy a prescribed rational relation exactly,
//! since true primes are not expected to admit any.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::PrimeSet;
use crate::{Error, Fixed, Result};

/// Fractional bits of `log 2 / log p` in this module.
pub const EQUIDIST_BITS: u32 = 256;

const TWO_PI: f64 = std::f64::consts::TAU;
const U128_SCALE: f64 = 1.0 / 340_282_366_920_938_463_463_374_607_431_768_211_456.0;

/// Real ratios `theta_j = numer_j / denom` sharing one denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatioVector {
    labels: Vec<String>,
    numers: Vec<BigInt>,
    denom: BigUint,
}

impl RatioVector {
    /// `log 2 / log p_j` to 256 bits.
    pub fn for_primes(primes: &PrimeSet) -> Result<Self> {
        let numers = primes
            .iter()
            .map(|p| Fixed::log2_over_log(p, EQUIDIST_BITS).map(|f| f.mid().clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            labels: primes.iter().map(|p| p.to_string()).collect(),
            numers,
            denom: BigUint::one() << EQUIDIST_BITS,
        })
    }

    pub fn exact(labels: Vec<String>, numers: Vec<BigInt>, denom: BigUint) -> Result<Self> {
        if denom.is_zero() || labels.len() != numers.len() || numers.is_empty() {
            return Err(Error::InvalidParameter("malformed ratio vector".into()));
        }
        Ok(Self {
            labels,
            numers,
            denom,
        })
    }

    /// Random ratios in `(0, 1)` for the free coordinates of `system`, with
    /// the dependent ones derived so that every relation holds exactly.
    pub fn synthetic(system: &RelationSystem, seed: u64) -> Result<Self> {
        let r = system.r;
        let lcm = system
            .n
            .iter()
            .fold(BigInt::one(), |acc, n| acc.lcm(&BigInt::from(*n)));
        let denom = lcm.magnitude() << 200u32;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut numers = vec![BigInt::zero(); r];
        for &col in &system.order[..r - system.k] {
            // Multiples of the lcm so that every m/n combination stays integral.
            let x: u128 = rng.gen_range(1u128 << 120..u128::MAX);
            numers[col] = BigInt::from(x) * (BigInt::one() << 72u32) * &lcm;
        }
        for j in 0..system.k {
            let nj = BigInt::from(system.n[j]);
            let mut acc = BigInt::from(system.m[j][r - system.k]) * BigInt::from(denom.clone());
            for h in 0..r - system.k {
                acc += BigInt::from(system.m[j][h]) * &numers[system.order[h]];
            }
            debug_assert!(acc.is_multiple_of(&nj));
            numers[system.dependent_column(j)] = acc / nj;
        }
        Ok(Self {
            labels: (1..=r).map(|i| format!("x{i}")).collect(),
            numers,
            denom,
        })
    }

    /// Adds `delta` (rounded to the shared denominator) to coordinate `j`.
    pub fn perturbed(&self, j: usize, delta: f64) -> Self {
        let mut out = self.clone();
        let shift = Fixed::from_f64(delta, 128);
        let scaled = (shift.mid() * BigInt::from(self.denom.clone())) >> 128u32;
        out.numers[j] += scaled;
        out
    }

    pub fn len(&self) -> usize {
        self.numers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.numers.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn to_fixed(&self, j: usize, bits: u32) -> Fixed {
        Fixed::from_ratio(&self.numers[j], &BigInt::from(self.denom.clone()), bits)
    }

    pub fn to_f64(&self, j: usize) -> f64 {
        self.to_fixed(j, 64).to_f64()
    }

    /// `theta_j * 2^bits`, floored.
    fn scaled(&self, j: usize, bits: u32) -> BigInt {
        (&self.numers[j] << bits).div_floor(&BigInt::from(self.denom.clone()))
    }
}

/// `N x r` fractional parts `frac(n theta_j)`, `n = 1..=N`, as 128-bit
/// fractions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitSample {
    labels: Vec<String>,
    r: usize,
    values: Vec<u128>,
}

impl OrbitSample {
    pub fn from_values(labels: Vec<String>, values: Vec<u128>) -> Result<Self> {
        let r = labels.len();
        if r == 0 || values.is_empty() || !values.len().is_multiple_of(r) {
            return Err(Error::InvalidParameter("malformed orbit sample".into()));
        }
        Ok(Self { labels, r, values })
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.r
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.r
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Row `n` (1-based) as raw 128-bit fractions.
    pub fn point(&self, n: usize) -> &[u128] {
        &self.values[(n - 1) * self.r..n * self.r]
    }

    pub fn value_f64(&self, n: usize, j: usize) -> f64 {
        self.point(n)[j] as f64 * U128_SCALE
    }

    pub fn points(&self) -> impl Iterator<Item = &[u128]> {
        self.values.chunks_exact(self.r)
    }
}

pub fn orbit(ratios: &RatioVector, big_n: usize) -> Result<OrbitSample> {
    if big_n == 0 {
        return Err(Error::InvalidParameter("orbit length must be at least 1".into()));
    }
    let r = ratios.len();
    let denom = BigInt::from(ratios.denom.clone());
    let pow2 = ratios.denom.count_ones() == 1 && ratios.denom.bits() > 128;
    let shift = ratios.denom.bits().saturating_sub(129);
    let mut values = vec![0u128; big_n * r];
    for j in 0..r {
        let step = ratios.numers[j].mod_floor(&denom);
        let mut residue = BigInt::zero();
        for n in 0..big_n {
            residue += &step;
            if residue >= denom {
                residue -= &denom;
            }
            let v = if pow2 {
                &residue >> shift
            } else {
                (&residue << 128u32) / &denom
            };
            values[n * r + j] = v.to_u128().expect("fraction below 2^128");
        }
    }
    Ok(OrbitSample {
        labels: ratios.labels.clone(),
        r,
        values,
    })
}

pub fn orbit_primes(primes: &PrimeSet, big_n: usize) -> Result<OrbitSample> {
    orbit(&RatioVector::for_primes(primes)?, big_n)
}

/// Certified `frac(n theta_j)`, computed directly rather than by the running
/// sum of [`orbit`].
pub fn recompute_entry(ratios: &RatioVector, n: u64, j: usize) -> Result<Fixed> {
    ratios
        .to_fixed(j, EQUIDIST_BITS)
        .mul_int(&BigInt::from(n))
        .frac()
}

/// `|(1/N) sum_n exp(2 pi i k . v_n)|`.
pub fn weyl_sum(sample: &OrbitSample, k: &[i64]) -> Result<f64> {
    if k.len() != sample.r {
        return Err(Error::InvalidParameter(format!(
            "frequency has {} entries for a {}-dimensional sample",
            k.len(),
            sample.r
        )));
    }
    if k.iter().all(|&x| x == 0) {
        return Err(Error::InvalidParameter("frequency must be nonzero".into()));
    }
    const CHUNK: usize = 4096;
    let k: Vec<u128> = k.iter().map(|&x| x as i128 as u128).collect();
    let partial: Vec<(f64, f64)> = sample
        .values
        .par_chunks(CHUNK * sample.r)
        .map(|chunk| {
            let (mut re, mut im) = (0.0, 0.0);
            for point in chunk.chunks_exact(sample.r) {
                let phase = point
                    .iter()
                    .zip(&k)
                    .fold(0u128, |acc, (v, kj)| acc.wrapping_add(v.wrapping_mul(*kj)));
                let angle = phase as f64 * U128_SCALE * TWO_PI;
                re += angle.cos();
                im += angle.sin();
            }
            (re, im)
        })
        .collect();
    let (re, im) = partial
        .iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    Ok(re.hypot(im) / sample.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxReport {
    pub modulus: u64,
    pub points: usize,
    pub boxes_hit: usize,
    pub max_count: u64,
    pub max_fraction: f64,
    /// `P^(r - k - 1)`, the size of the discretised family.
    pub family_size: f64,
    /// `max_fraction * |F| * P`: occupancy relative to the predicted scale.
    pub bound_ratio: f64,
}

/// Largest normalised hit count over the cells `x/P + [0, 1/P)^r` of the
/// exponent torus, with the cell scale predicted for `relations` independent
/// rational relations.
pub fn box_occupancy(sample: &OrbitSample, modulus: u64, relations: usize) -> Result<BoxReport> {
    if modulus < 2 {
        return Err(Error::InvalidParameter("box modulus must be at least 2".into()));
    }
    if relations >= sample.r && sample.r > 0 && relations > 0 {
        return Err(Error::InvalidParameter(format!(
            "{relations} relations leave no free coordinate in dimension {}",
            sample.r
        )));
    }
    let mut counts: HashMap<Vec<u64>, u64> = HashMap::new();
    for point in sample.points() {
        let cell: Vec<u64> = point
            .iter()
            .map(|&v| cell_index(v, modulus))
            .collect();
        *counts.entry(cell).or_insert(0) += 1;
    }
    let max_count = counts.values().copied().max().unwrap_or(0);
    let max_fraction = max_count as f64 / sample.len() as f64;
    let free = (sample.r - relations) as i32;
    let family_size = (modulus as f64).powi(free - 1);
    Ok(BoxReport {
        modulus,
        points: sample.len(),
        boxes_hit: counts.len(),
        max_count,
        max_fraction,
        family_size,
        bound_ratio: max_fraction * family_size * modulus as f64,
    })
}

/// `floor(v P / 2^128)` without overflow.
fn cell_index(v: u128, modulus: u64) -> u64 {
    let p = modulus as u128;
    let hi = (v >> 64) * p;
    let lo = ((v & u64::MAX as u128) * p) >> 64;
    ((hi + lo) >> 64) as u64
}

/// One near-relation `sum c_j theta_j ~ c_{r+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearRelation {
    pub coefficients: Vec<i64>,
    pub residual: f64,
}

const SCREEN_BITS: u32 = 100;

/// All `(c_1..c_r) != 0` with `|c_j| <= height` (first nonzero entry
/// positive) such that `sum c_j theta_j` lies within `tol` of an integer,
/// sorted by residual. Candidates from a meet-in-the-middle screen on
/// 100-bit fixed point are confirmed at 256 bits.
pub fn relation_search(ratios: &RatioVector, height: u32, tol: f64) -> Result<Vec<NearRelation>> {
    if height == 0 {
        return Err(Error::InvalidParameter("height must be at least 1".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let r = ratios.len();
    let scaled: Vec<i128> = (0..r)
        .map(|j| {
            ratios
                .scaled(j, SCREEN_BITS)
                .to_i128()
                .ok_or_else(|| Error::InvalidParameter("ratio too large for the screen".into()))
        })
        .collect::<Result<_>>()?;
    let split = r.div_ceil(2);
    let (left, right) = scaled.split_at(split);
    let width = 2 * height as u64 + 1;
    let modulus: u128 = 1 << SCREEN_BITS;
    let mask = modulus - 1;
    let frac = |coeffs: &[i64], theta: &[i128]| -> u128 {
        let s = coeffs
            .iter()
            .zip(theta)
            .fold(0i128, |acc, (&c, &t)| acc.wrapping_add((c as i128).wrapping_mul(t)));
        (s as u128) & mask
    };
    let decode = |mut idx: u64, len: usize| -> Vec<i64> {
        (0..len)
            .map(|_| {
                let d = (idx % width) as i64 - height as i64;
                idx /= width;
                d
            })
            .collect()
    };
    let right_count = width.pow(right.len() as u32);
    let mut table: Vec<(u128, u64)> = (0..right_count)
        .map(|i| (frac(&decode(i, right.len()), right), i))
        .collect();
    table.sort_unstable();

    let margin: u128 = 1 << 12;
    let window = (tol * modulus as f64).min(modulus as f64) as u128 + margin;
    let left_count = width.pow(left.len() as u32);
    let candidates: Vec<Vec<i64>> = (0..left_count)
        .into_par_iter()
        .flat_map_iter(|i| {
            let a = decode(i, left.len());
            let target = (modulus - frac(&a, left)) & mask;
            let hits: Vec<u64> = if 2 * window >= modulus {
                table.iter().map(|e| e.1).collect()
            } else {
                let lo = (target + modulus - window) & mask;
                let hi = (target + window) & mask;
                let range = |from: u128, to: u128| {
                    let s = table.partition_point(|e| e.0 < from);
                    let e = table.partition_point(|e| e.0 <= to);
                    table[s..e].iter().map(|e| e.1).collect::<Vec<_>>()
                };
                if lo <= hi {
                    range(lo, hi)
                } else {
                    let mut v = range(lo, mask);
                    v.extend(range(0, hi));
                    v
                }
            };
            hits.into_iter().filter_map(move |j| {
                let mut c = a.clone();
                c.extend(decode(j, r - split));
                match c.iter().find(|&&x| x != 0) {
                    Some(&first) if first > 0 => Some(c),
                    _ => None,
                }
            })
        })
        .collect();

    let thetas: Vec<Fixed> = (0..r).map(|j| ratios.to_fixed(j, EQUIDIST_BITS)).collect();
    let tol_fixed = Fixed::from_f64(tol, EQUIDIST_BITS);
    let mut out = Vec::new();
    for c in candidates {
        let mut s = Fixed::zero(EQUIDIST_BITS);
        for (cj, t) in c.iter().zip(&thetas) {
            s = s.add(&t.mul_i64(*cj));
        }
        let nearest = s.to_f64().round();
        let diff = s.sub(&Fixed::from_f64(nearest, EQUIDIST_BITS));
        let abs = if diff.to_f64() < 0.0 { diff.neg() } else { diff };
        match abs.cmp_certified(&tol_fixed) {
            Some(std::cmp::Ordering::Less) => {
                let mut coefficients = c;
                coefficients.push(nearest as i64);
                out.push(NearRelation {
                    coefficients,
                    residual: abs.to_f64(),
                });
            }
            Some(_) => {}
            None => {
                return Err(Error::PrecisionExhausted(format!(
                    "residual of {c:?} is within rounding of tol"
                )))
            }
        }
    }
    out.sort_by(|a, b| {
        a.residual
            .total_cmp(&b.residual)
            .then_with(|| a.coefficients.cmp(&b.coefficients))
    });
    Ok(out)
}

pub fn relation_search_primes(primes: &PrimeSet, height: u32, tol: f64) -> Result<Vec<NearRelation>> {
    relation_search(&RatioVector::for_primes(primes)?, height, tol)
}

/// Row-reduced rational relations.
///
/// Row `i` of the raw input reads `sum_j a_{i,j} theta_j = a_{i,r+1}`. After
/// reduction, coordinate `order[r - j]` (0-based, `j = 1..=k`) depends on the
/// free coordinates `order[0..r-k]` through
/// `theta = (sum_h m[j-1][h] theta_{order[h]} + m[j-1][r-k]) / n[j-1]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSystem {
    pub r: usize,
    pub k: usize,
    pub order: Vec<usize>,
    pub n: Vec<i64>,
    pub m: Vec<Vec<i64>>,
}

impl RelationSystem {
    /// No relations at all.
    pub fn empty(r: usize) -> Self {
        Self {
            r,
            k: 0,
            order: (0..r).collect(),
            n: Vec::new(),
            m: Vec::new(),
        }
    }

    /// Original column of dependent relation `j` (0-based).
    pub fn dependent_column(&self, j: usize) -> usize {
        self.order[self.r - 1 - j]
    }

    fn coefficient(&self, j: usize, h: usize) -> BigRational {
        BigRational::new(BigInt::from(self.m[j][h]), BigInt::from(self.n[j]))
    }

    /// `theta_i(t_1..t_{r-k}) = sum_h (m_{k-i+1,h} / n_{k-i+1}) t_h`, `i` 1-based.
    fn theta_coeffs(&self, i: usize) -> Vec<BigRational> {
        let j = self.k - i;
        (0..self.r - self.k).map(|h| self.coefficient(j, h)).collect()
    }

    fn max_abs_m(&self) -> i64 {
        self.m
            .iter()
            .flat_map(|row| row.iter().map(|x| x.abs()))
            .max()
            .unwrap_or(0)
    }

    fn lcm_n(&self) -> i64 {
        self.n.iter().fold(1i64, |a, &b| a.lcm(&b))
    }
}

/// Parses `"a,b,c;d,e,f"` (entries may be `p/q`) into rational rows.
pub fn parse_matrix(text: &str) -> Result<Vec<Vec<BigRational>>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|row| {
            row.split(',')
                .map(|e| {
                    e.trim()
                        .parse::<BigRational>()
                        .map_err(|_| Error::InvalidParameter(format!("bad matrix entry {e:?}")))
                })
                .collect()
        })
        .collect()
}

pub fn reduce_relations(raw: &[Vec<BigRational>], r: usize) -> Result<RelationSystem> {
    if r == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    if let Some(bad) = raw.iter().position(|row| row.len() != r + 1) {
        return Err(Error::InvalidParameter(format!(
            "row {bad} has {} entries, expected {}",
            raw[bad].len(),
            r + 1
        )));
    }
    let mut rows: Vec<Vec<BigRational>> = raw.to_vec();
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    // Eliminate row by row, choosing each pivot as far right as possible so
    // that dependent coordinates land at the end.
    for i in 0..rows.len() {
        for &(prow, pcol) in &pivots {
            let f = rows[i][pcol].clone();
            if !f.is_zero() {
                for c in 0..=r {
                    let v = &f * &rows[prow][c];
                    rows[i][c] -= v;
                }
            }
        }
        let Some(pcol) = (0..r).rev().find(|&c| !rows[i][c].is_zero()) else {
            return Err(if rows[i][r].is_zero() {
                Error::RankDeficient { row: i }
            } else {
                Error::InconsistentRelation { row: i }
            });
        };
        let inv = rows[i][pcol].recip();
        for c in 0..=r {
            rows[i][c] = &rows[i][c] * &inv;
        }
        for &(prow, _) in &pivots {
            let f = rows[prow][pcol].clone();
            if !f.is_zero() {
                for c in 0..=r {
                    let v = &f * &rows[i][c];
                    rows[prow][c] -= v;
                }
            }
        }
        pivots.push((i, pcol));
    }
    let k = pivots.len();
    if k >= r {
        return Err(Error::FullRankRelations { k });
    }
    pivots.sort_by_key(|&(_, c)| c);
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let free: Vec<usize> = (0..r).filter(|c| !pivot_cols.contains(c)).collect();
    let mut order = free.clone();
    order.extend(&pivot_cols);
    let mut n = Vec::with_capacity(k);
    let mut m = Vec::with_capacity(k);
    // Dependent j = 1 is the last column in `order`.
    for &(prow, _) in pivots.iter().rev() {
        let mut b: Vec<BigRational> = free.iter().map(|&c| -rows[prow][c].clone()).collect();
        b.push(rows[prow][r].clone());
        let den = b.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
        let nums = b
            .iter()
            .map(|x| {
                (x * BigRational::from_integer(den.clone()))
                    .to_integer()
                    .to_i64()
                    .ok_or_else(|| Error::InvalidParameter("relation coefficient overflows i64".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        n.push(den.to_i64().ok_or_else(|| {
            Error::InvalidParameter("relation denominator overflows i64".into())
        })?);
        m.push(nums);
    }
    Ok(RelationSystem { r, k, order, n, m })
}

/// Curves `t -> (p_j^(q_j t + c_j - 1))_j` covering the orbit under a
/// relation system, in the permuted coordinate order of the system.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveFamily {
    pub system: RelationSystem,
    /// Bases of the permuted coordinates.
    pub bases: Vec<u64>,
    /// No relations: the family is the whole box.
    pub full_box: bool,
    pub l: u64,
    pub l_bound: u64,
    pub rho: Vec<BigRational>,
    /// Exponent slope `q_j` of each coordinate.
    pub slopes: Vec<BigRational>,
    /// Integer exponent offsets `o` (the dilates `p_j^(-o)`) per coordinate.
    pub dilate_offsets: Vec<Vec<i64>>,
    /// `r L^r max|m|`.
    pub dilate_bound: u64,
    /// Fractional shifts `c / n_j` per dependent coordinate.
    pub shift_classes: Vec<Vec<BigRational>>,
    /// Shift set in its two-prime form, with the bound `3 n_2^2`.
    pub two_prime_shift_set: Option<(Vec<BigRational>, u64)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurveFamilySummary {
    pub system: RelationSystem,
    pub bases: Vec<u64>,
    pub full_box: bool,
    pub l: u64,
    pub l_bound: u64,
    pub rho: Vec<String>,
    pub slopes: Vec<String>,
    pub dilate_offsets: Vec<Vec<i64>>,
    pub dilate_bound: u64,
    pub shift_classes: Vec<Vec<String>>,
    pub two_prime_shift_set_size: Option<usize>,
    pub two_prime_shift_set_bound: Option<u64>,
    pub curves_per_delta: u64,
}

impl CurveFamily {
    /// Number of distinct curves for one fixed choice of the free shifts.
    pub fn curves_per_delta(&self) -> u64 {
        let dil: u64 = self.dilate_offsets.iter().map(|d| d.len() as u64).product();
        let sh: u64 = self.shift_classes.iter().map(|s| s.len() as u64).product();
        dil * sh
    }

    pub fn summary(&self) -> CurveFamilySummary {
        let s = |v: &[BigRational]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        CurveFamilySummary {
            system: self.system.clone(),
            bases: self.bases.clone(),
            full_box: self.full_box,
            l: self.l,
            l_bound: self.l_bound,
            rho: s(&self.rho),
            slopes: s(&self.slopes),
            dilate_offsets: self.dilate_offsets.clone(),
            dilate_bound: self.dilate_bound,
            shift_classes: self.shift_classes.iter().map(|c| s(c)).collect(),
            two_prime_shift_set_size: self.two_prime_shift_set.as_ref().map(|x| x.0.len()),
            two_prime_shift_set_bound: self.two_prime_shift_set.as_ref().map(|x| x.1),
            curves_per_delta: self.curves_per_delta(),
        }
    }
}

/// `{ frac((b n3 - a n1) / n2) : 0 <= a, b < n2 } + {-1, 0, 1}` for the
/// two-prime relation `n1 theta_1 + n2 theta_2 = n3` with `n2 > 0`.
pub fn two_prime_shift_set(n1: i64, n2: i64, n3: i64) -> Vec<BigRational> {
    let mut out = Vec::new();
    for a in 0..n2 {
        for b in 0..n2 {
            let v = BigRational::new(BigInt::from(b * n3 - a * n1), BigInt::from(n2));
            let f = &v - v.floor();
            for d in -1..=1 {
                out.push(&f + BigRational::from_integer(BigInt::from(d)));
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// `p1 != p2^(-n1/n2)`, checked as `p1^n2 != p2^(-n1)` on integers.
pub fn curve_is_nonlinear(p1: u64, p2: u64, n1: i64, n2: i64) -> bool {
    debug_assert!(n2 > 0);
    if n1 >= 0 {
        // Right side is at most 1 while p1^n2 > 1.
        return true;
    }
    BigUint::from(p1).pow(n2 as u32) != BigUint::from(p2).pow((-n1) as u32)
}

pub fn make_curves(system: &RelationSystem, primes: &PrimeSet) -> Result<CurveFamily> {
    let r = system.r;
    if primes.len() != r {
        return Err(Error::InvalidParameter(format!(
            "{} primes for a {r}-dimensional system",
            primes.len()
        )));
    }
    let bases: Vec<u64> = system.order.iter().map(|&c| primes.as_slice()[c]).collect();
    let free = r - system.k;
    let zero_offsets = vec![0i64];
    if system.k == 0 {
        return Ok(CurveFamily {
            system: system.clone(),
            bases,
            full_box: true,
            l: 1,
            l_bound: 1,
            rho: Vec::new(),
            slopes: vec![BigRational::one(); r],
            dilate_offsets: vec![zero_offsets; r],
            dilate_bound: 0,
            shift_classes: Vec::new(),
            two_prime_shift_set: None,
        });
    }
    let max_m = system.max_abs_m().max(1);
    let l_bound = (2 * system.lcm_n() * max_m) as u64;
    let rho_for = |l: u64| -> Vec<BigRational> {
        (1..=system.k)
            .map(|i| {
                system
                    .theta_coeffs(i)
                    .iter()
                    .enumerate()
                    .map(|(h, c)| c * BigRational::from_integer(BigInt::from(l).pow(h as u32)))
                    .fold(BigRational::zero(), |a, b| a + b)
            })
            .collect()
    };
    let l = (1..=l_bound.max(1))
        .find(|&l| rho_for(l).iter().all(|x| !x.is_zero()))
        .ok_or_else(|| {
            Error::InvalidParameter(
                "no L makes every dependent slope nonzero; a coordinate is constant".into(),
            )
        })?;
    let rho = rho_for(l);

    let mut slopes = Vec::with_capacity(r);
    let mut dilate_offsets = Vec::with_capacity(r);
    slopes.push(BigRational::one());
    dilate_offsets.push(zero_offsets);
    for h in 1..free {
        let lh = l.pow(h as u32) as i64;
        slopes.push(BigRational::from_integer(BigInt::from(lh)));
        // Exponent L^h t + delta ranges over [0, L^h + 1).
        dilate_offsets.push((0..=lh).collect());
    }
    let mut shift_classes = Vec::with_capacity(system.k);
    for i in 1..=system.k {
        let j = system.k - i;
        let nj = system.n[j];
        let coeffs = system.theta_coeffs(i);
        // v = rho t + sum_{h >= 1} c_h delta_h + sigma, sigma in [0, (n-1)/n].
        let mut terms: Vec<BigRational> = vec![rho[i - 1].clone()];
        terms.extend(coeffs[1..].iter().cloned());
        let lo: BigRational = terms
            .iter()
            .filter(|x| x.is_negative())
            .fold(BigRational::zero(), |a, b| a + b);
        let sigma_max = BigRational::new(BigInt::from(nj - 1), BigInt::from(nj));
        let positive: BigRational = terms
            .iter()
            .filter(|x| x.is_positive())
            .fold(BigRational::zero(), |a, b| a + b);
        let hi = &positive + &sigma_max;
        let top = if positive.is_zero() {
            hi.floor()
        } else {
            hi.ceil() - BigRational::one()
        };
        let from = lo.floor().to_integer().to_i64().expect("small offset");
        let to = top.to_integer().to_i64().expect("small offset");
        slopes.push(rho[i - 1].clone());
        dilate_offsets.push((from..=to).collect());
        shift_classes.push(
            (0..nj)
                .map(|c| BigRational::new(BigInt::from(c), BigInt::from(nj)))
                .collect(),
        );
    }
    let dilate_bound = (r as u64) * l.pow(r as u32) * max_m as u64;
    let two_prime_shift_set = (r == 2 && system.k == 1).then(|| {
        // n theta_2 - m_1 theta_1 = m_3.
        let (n1, n2, n3) = (-system.m[0][0], system.n[0], system.m[0][1]);
        (two_prime_shift_set(n1, n2, n3), 3 * (n2 * n2) as u64)
    });
    let family = CurveFamily {
        system: system.clone(),
        bases,
        full_box: false,
        l,
        l_bound,
        rho,
        slopes,
        dilate_offsets,
        dilate_bound,
        shift_classes,
        two_prime_shift_set,
    };
    check_distinct_bases(&family)?;
    Ok(family)
}

/// The curve bases `p_j^(q_j)` are pairwise distinct, by certified
/// comparison of `q_j log p_j`.
pub fn check_distinct_bases(family: &CurveFamily) -> Result<()> {
    let bits = EQUIDIST_BITS;
    let logs = family
        .slopes
        .iter()
        .zip(&family.bases)
        .map(|(q, &p)| {
            let lp = Fixed::ln_u64(p, bits)?;
            Ok(lp.mul_int(q.numer()).div_int(q.denom()))
        })
        .collect::<Result<Vec<_>>>()?;
    for a in 0..logs.len() {
        for b in a + 1..logs.len() {
            match logs[a].cmp_certified(&logs[b]) {
                Some(std::cmp::Ordering::Equal) => {
                    return Err(Error::InvariantViolation(format!(
                        "curve coordinates {a} and {b} share a base"
                    )))
                }
                None => {
                    return Err(Error::PrecisionExhausted(format!(
                        "cannot separate the bases of coordinates {a} and {b}"
                    )))
                }
                Some(_) => {}
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub points: usize,
    pub misses: usize,
    pub first_miss: Option<usize>,
    pub max_error: f64,
}

/// Checks each orbit point `n <= N` against the family: the point's first
/// coordinate fixes `t`, the free coordinates fix the shifts, and every
/// dependent coordinate must then match some shift class and dilate to
/// within `tol` (measured on `p^(x - 1)`).
pub fn verify_curve_cover(
    family: &CurveFamily,
    ratios: &RatioVector,
    big_n: usize,
    tol: f64,
) -> Result<CoverReport> {
    let sys = &family.system;
    if ratios.len() != sys.r {
        return Err(Error::InvalidParameter("ratio vector does not match the system".into()));
    }
    let sample = orbit(ratios, big_n)?;
    if family.full_box {
        // Every stored coordinate is a fraction in [0, 1): the box holds it.
        return Ok(CoverReport {
            points: big_n,
            misses: 0,
            first_miss: None,
            max_error: 0.0,
        });
    }
    let free = sys.r - sys.k;
    let f = |x: &BigRational| x.to_f64().expect("small rational");
    let thetas: Vec<Vec<f64>> = (1..=sys.k)
        .map(|i| sys.theta_coeffs(i).iter().map(f).collect())
        .collect();
    let rho: Vec<f64> = family.rho.iter().map(f).collect();
    let classes: Vec<Vec<f64>> = family
        .shift_classes
        .iter()
        .map(|c| c.iter().map(f).collect())
        .collect();
    let lnp: Vec<f64> = family.bases.iter().map(|&p| (p as f64).ln()).collect();
    let alpha = |x: f64, j: usize| ((x - 1.0) * lnp[j]).exp();

    let mut misses = 0;
    let mut first_miss = None;
    let mut max_error: f64 = 0.0;
    for n in 1..=big_n {
        let x: Vec<f64> = sys.order.iter().map(|&c| sample.value_f64(n, c)).collect();
        let t = x[0];
        let mut deltas = Vec::with_capacity(free.saturating_sub(1));
        let mut ok = true;
        for h in 1..free {
            let e = f(&family.slopes[h]) * t;
            let delta = (x[h] - e).rem_euclid(1.0);
            deltas.push(delta);
            let err = best_match(&family.dilate_offsets[h], &[0.0], |o, _| {
                (alpha(x[h], h) - alpha(e + delta - o as f64, h)).abs()
            });
            max_error = max_error.max(err);
            ok &= err < tol;
        }
        for i in 0..sys.k {
            let j = free + i;
            let base = rho[i] * t
                + thetas[i][1..]
                    .iter()
                    .zip(&deltas)
                    .map(|(c, d)| c * d)
                    .sum::<f64>();
            let err = best_match(&family.dilate_offsets[j], &classes[i], |o, s| {
                (alpha(x[j], j) - alpha(base + s - o as f64, j)).abs()
            });
            max_error = max_error.max(err);
            ok &= err < tol;
        }
        if !ok {
            misses += 1;
            first_miss.get_or_insert(n);
        }
    }
    Ok(CoverReport {
        points: big_n,
        misses,
        first_miss,
        max_error,
    })
}

fn best_match(offsets: &[i64], shifts: &[f64], err: impl Fn(i64, f64) -> f64) -> f64 {
    let mut best = f64::INFINITY;
    for &o in offsets {
        for &s in shifts {
            best = best.min(err(o, s));
        }
    }
    best
}

/// Uniform 128-bit ratios in `[0, 1)`, with no relation built in.
pub fn random_ratios(r: usize, seed: u64) -> RatioVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let numers = (0..r)
        .map(|_| BigInt::from_biguint(Sign::Plus, BigUint::from(rng.gen::<u128>())))
        .collect();
    RatioVector {
        labels: (1..=r).map(|i| format!("x{i}")).collect(),
        numers,
        denom: BigUint::one() << 128u32,
    }
}
