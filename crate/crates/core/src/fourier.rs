//! Desk-scale instances of the additive step modulo a prime `P`: digit sets
//! `A_j`, their large spectrum, the lattice cells `F` hit by an exponential
//! curve, the exceptional cells `E`, and a brute-force check that
//! `n x + beta - delta` lands in `3A_1 x ... x 3A_r`.
//!
//! Transforms use `f^(s) = sum_a f(a) e^(2 pi i a s / P)`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::arith::{ensure_odd_prime, is_prime};
use crate::{Error, Result};

/// Largest modulus transformed by direct summation; FFT above.
pub const EXACT_TRANSFORM_MAX: u64 = 2003;

/// Largest modulus accepted anywhere in this module.
pub const MAX_MODULUS: u64 = 1 << 24;

const MAX_CURVE_EVENTS: usize = 50_000_000;

fn ensure_modulus(modulus: u64) -> Result<()> {
    if !is_prime(modulus) || modulus < 3 {
        return Err(Error::InvalidParameter(format!("modulus {modulus} is not an odd prime")));
    }
    if modulus > MAX_MODULUS {
        return Err(Error::InvalidParameter(format!(
            "modulus {modulus} exceeds {MAX_MODULUS}"
        )));
    }
    Ok(())
}

/// `floor(P^x)`, snapping values within 1e-9 relative of an integer so that
/// `P^eps = 10^H` lands exactly.
pub fn pow_floor(modulus: u64, exponent: f64) -> u128 {
    let v = (exponent * (modulus as f64).ln()).exp();
    if !v.is_finite() || v >= u128::MAX as f64 {
        return u128::MAX;
    }
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.max(1.0) {
        r as u128
    } else {
        v.floor() as u128
    }
}

#[derive(Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

// ---------------------------------------------------------------------------
// Digit sets

fn digit_weights(p: u64, modulus: u64, h: u32) -> Vec<u64> {
    let mut weights = Vec::with_capacity(h as usize);
    let mut pow: u128 = 1;
    for _ in 0..h {
        pow = pow.saturating_mul(p as u128);
        let w = (modulus as u128).div_ceil(pow).max(1);
        weights.push(w as u64);
    }
    weights
}

/// Largest digit `d` with `d < p / 10`.
pub fn digit_cap(p: u64) -> u64 {
    (p - 1) / 10
}

/// `{ sum_i d_i ceil(P/p^i) : 0 <= d_i < p/10 } + {0, .., ceil(P/p^H) - 1}`
/// reduced mod `P`, sorted. Every listed combination is checked distinct.
pub fn build_a(p: u64, modulus: u64, h: u32) -> Result<Vec<u64>> {
    ensure_odd_prime(p)?;
    ensure_modulus(modulus)?;
    if h == 0 {
        return Err(Error::InvalidParameter("window length H must be at least 1".into()));
    }
    let weights = digit_weights(p, modulus, h);
    let digits = digit_cap(p) + 1;
    let width = *weights.last().expect("h >= 1");
    let total = (digits as u128)
        .checked_pow(h)
        .and_then(|c| c.checked_mul(width as u128));
    let collision = || {
        Error::InvariantViolation(format!(
            "digit set for p = {p}, H = {h} collides modulo {modulus}; the modulus is too small"
        ))
    };
    match total {
        Some(t) if t <= modulus as u128 => {}
        _ => return Err(collision()),
    }
    let mut seen = vec![false; modulus as usize];
    let mut d = vec![0u64; h as usize];
    loop {
        let base: u128 = d
            .iter()
            .zip(&weights)
            .map(|(&di, &w)| di as u128 * w as u128)
            .sum();
        for x in 0..width as u128 {
            let v = ((base + x) % modulus as u128) as usize;
            if seen[v] {
                return Err(collision());
            }
            seen[v] = true;
        }
        if !odometer(&mut d, digits) {
            break;
        }
    }
    Ok(indices(&seen))
}

fn odometer(d: &mut [u64], radix: u64) -> bool {
    for slot in d.iter_mut().rev() {
        *slot += 1;
        if *slot < radix {
            return true;
        }
        *slot = 0;
    }
    false
}

fn indices(mask: &[bool]) -> Vec<u64> {
    mask.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i as u64)
        .collect()
}

/// `A + A + A` for a digit set, from its closed form:
/// `{ sum_i e_i ceil(P/p^i) : 0 <= e_i <= 3 floor(p/10) } + {0, .., 3 ceil(P/p^H) - 3}`.
pub fn three_fold_formula(p: u64, modulus: u64, h: u32) -> Result<Vec<bool>> {
    ensure_odd_prime(p)?;
    ensure_modulus(modulus)?;
    if h == 0 {
        return Err(Error::InvalidParameter("window length H must be at least 1".into()));
    }
    let weights = digit_weights(p, modulus, h);
    let radix = 3 * (p / 10) + 1;
    let span = 3 * *weights.last().expect("h >= 1") - 2;
    let mut mask = vec![false; modulus as usize];
    let mut e = vec![0u64; h as usize];
    loop {
        let base: u128 = e
            .iter()
            .zip(&weights)
            .map(|(&ei, &w)| ei as u128 * w as u128)
            .sum();
        if span >= modulus {
            mask.iter_mut().for_each(|m| *m = true);
            break;
        }
        for x in 0..span as u128 {
            mask[((base + x) % modulus as u128) as usize] = true;
        }
        if !odometer(&mut e, radix) {
            break;
        }
    }
    Ok(mask)
}

/// `A + A + A` by FFT convolution of the indicator with itself twice.
pub fn three_fold_fft(set: &[u64], modulus: u64) -> Vec<bool> {
    let n = modulus as usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for &a in set {
        buf[a as usize] = Complex64::new(1.0, 0.0);
    }
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for z in buf.iter_mut() {
        *z = *z * *z * *z;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|z| z.re / n as f64 > 0.5).collect()
}

/// Whether `z / P` lies in `{ sum_i e_i / p^i : 0 <= e_i < 3p/10 } + [0, 4/p^H]`.
/// Decided in integers: some `E = sum_i e_i p^(H-i)` must satisfy
/// `0 <= z p^H - P E <= 4 P`.
pub fn scaled_window_contains(p: u64, modulus: u64, h: u32, z: u64) -> bool {
    let ph = (p as u128).pow(h);
    let zp = z as u128 * ph;
    let hi = zp / modulus as u128;
    let lo = zp.saturating_sub(4 * modulus as u128).div_ceil(modulus as u128);
    (lo..=hi.min(ph - 1)).any(|big_e| {
        let mut v = big_e;
        (0..h).all(|_| {
            let digit = v % p as u128;
            v /= p as u128;
            10 * digit < 3 * p as u128
        })
    })
}

// ---------------------------------------------------------------------------
// Transforms

/// `A^(s)` for `s = 0, .., P - 1`. Direct compensated summation over a table
/// of roots of unity up to [`EXACT_TRANSFORM_MAX`], FFT above.
pub fn transform(set: &[u64], modulus: u64) -> Vec<Complex64> {
    let n = modulus as usize;
    if modulus <= EXACT_TRANSFORM_MAX {
        let roots: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let angle = std::f64::consts::TAU * k as f64 / n as f64;
                (angle.cos(), angle.sin())
            })
            .collect();
        (0..n)
            .into_par_iter()
            .map(|s| {
                let mut re = Neumaier::default();
                let mut im = Neumaier::default();
                for &a in set {
                    let (c, sn) = roots[(a as usize * s) % n];
                    re.add(c);
                    im.add(sn);
                }
                Complex64::new(re.value(), im.value())
            })
            .collect()
    } else {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for &a in set {
            buf[a as usize] = Complex64::new(1.0, 0.0);
        }
        FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut buf);
        buf
    }
}

/// Relative defect `|sum_s |A^(s)|^2 - P |A|| / (P |A|)`.
pub fn parseval_defect(set: &[u64], modulus: u64) -> f64 {
    let t = transform(set, modulus);
    let mut acc = Neumaier::default();
    for z in &t {
        acc.add(z.norm_sqr());
    }
    let target = modulus as f64 * set.len() as f64;
    (acc.value() - target).abs() / target
}

// ---------------------------------------------------------------------------
// Curves

/// `K(t) = (zeta_1 theta_1^t, .., zeta_r theta_r^t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub zeta: Vec<f64>,
    pub theta: Vec<f64>,
}

impl Curve {
    pub fn new(zeta: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if zeta.is_empty() || zeta.len() != theta.len() {
            return Err(Error::InvalidParameter(
                "curve needs equally many zeta and theta values, at least one".into(),
            ));
        }
        for (i, &th) in theta.iter().enumerate() {
            if !th.is_finite() || th <= 0.0 || th == 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "theta_{} = {th} must be positive and not 1",
                    i + 1
                )));
            }
            if theta[..i].contains(&th) {
                return Err(Error::InvalidParameter(format!("theta value {th} repeats")));
            }
        }
        if let Some(z) = zeta.iter().find(|z| !z.is_finite() || **z == 0.0) {
            return Err(Error::InvalidParameter(format!("zeta value {z} must be nonzero")));
        }
        Ok(Curve { zeta, theta })
    }

    /// `theta_j = 2^-j` and `zeta_i = (-1)^(i-1) binom(r-1, i-1)`, for which
    /// the coordinate sum is `theta^t (1 - theta^t)^(r-1)`.
    pub fn alternating(r: usize) -> Result<Self> {
        if r == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let mut zeta = Vec::with_capacity(r);
        let mut binom = 1.0f64;
        for i in 0..r {
            zeta.push(if i % 2 == 0 { binom } else { -binom });
            binom = binom * (r - 1 - i) as f64 / (i + 1) as f64;
        }
        let theta = (1..=r as i32).map(|j| 0.5f64.powi(j)).collect();
        Curve::new(zeta, theta)
    }

    pub fn dim(&self) -> usize {
        self.zeta.len()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.zeta
            .iter()
            .zip(&self.theta)
            .map(|(z, th)| z * th.powf(t))
            .collect()
    }
}

/// A cell `x` of `F` and the first parameter `t` at which the curve enters it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: Vec<u64>,
    pub t: f64,
}

/// All `x in {0..P-1}^r` with `K(t) in x / P + [0, 1/P)^r (mod 1)` for some
/// `t in [0, 1)`, sorted by `x`.
pub fn discretize_curve(curve: &Curve, modulus: u64) -> Result<Vec<CurvePoint>> {
    discretize_range(curve, modulus, 0.0, 1.0)
}

/// As [`discretize_curve`] over `t in [t0, t1)`. Cell changes are located
/// exactly, one event per integer crossed by each `P K_i(t)`.
pub fn discretize_range(curve: &Curve, modulus: u64, t0: f64, t1: f64) -> Result<Vec<CurvePoint>> {
    ensure_modulus(modulus)?;
    if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
        return Err(Error::InvalidParameter(format!("empty parameter range [{t0}, {t1})")));
    }
    let p = modulus as f64;
    let r = curve.dim();
    let mut cells = Vec::with_capacity(r);
    // (t, coordinate, new cell)
    let mut events: Vec<(f64, usize, i64)> = Vec::new();
    for i in 0..r {
        let scale = p * curve.zeta[i];
        let ln_theta = curve.theta[i].ln();
        let v0 = scale * curve.theta[i].powf(t0);
        let v1 = scale * curve.theta[i].powf(t1);
        cells.push(v0.floor() as i64);
        let crossing = |m: i64| ((m as f64 / scale).ln() / ln_theta).clamp(t0, t1);
        let count = (v1 - v0).abs().ceil() as usize + 1;
        if events.len() + count > MAX_CURVE_EVENTS {
            return Err(Error::InvalidParameter(format!(
                "curve crosses more than {MAX_CURVE_EVENTS} cell walls"
            )));
        }
        if v1 > v0 {
            let first = v0.floor() as i64 + 1;
            let last = v1.ceil() as i64 - 1;
            events.extend((first..=last).map(|m| (crossing(m), i, m)));
        } else {
            let first = v0.floor() as i64;
            let last = v1.floor() as i64 + 1;
            events.extend((last..=first).rev().map(|m| (crossing(m), i, m - 1)));
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let reduce = |cells: &[i64]| -> Vec<u64> {
        cells.iter().map(|&c| c.rem_euclid(modulus as i64) as u64).collect()
    };
    let mut hit: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    hit.insert(reduce(&cells), t0);
    let mut k = 0;
    while k < events.len() {
        let t = events[k].0;
        while k < events.len() && events[k].0 == t {
            cells[events[k].1] = events[k].2;
            k += 1;
        }
        if t < t1 {
            hit.entry(reduce(&cells)).or_insert(t);
        }
    }
    Ok(hit.into_iter().map(|(x, t)| CurvePoint { x, t }).collect())
}

// ---------------------------------------------------------------------------
// Instances

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFlags {
    /// `eps >= 1 / (20 r^2)`.
    pub out_of_regime: bool,
    /// `floor(P^(7 r eps)) >= P`: every shift is available.
    pub delta_range_exceeds_modulus: bool,
    /// `P > p_j^(2H)` for every prime, when the sets come from digits.
    pub modulus_exceeds_prime_powers: Option<bool>,
}

/// One curve with its digit sets and cells, immutable after construction.
#[derive(Clone, Debug)]
pub struct FourierInstance {
    modulus: u64,
    h: Option<u32>,
    primes: Vec<u64>,
    epsilon: f64,
    curve: Curve,
    a_sets: Vec<Vec<u64>>,
    three_a: Vec<Vec<bool>>,
    f: Vec<CurvePoint>,
}

impl FourierInstance {
    /// Digit sets `A_j` for each prime, window length `H`. `eps` defaults to
    /// `H log 10 / log P`; an override must keep `|A_j| >= P^(1 - eps)`.
    pub fn from_digits(
        primes: &[u64],
        modulus: u64,
        h: u32,
        curve: Curve,
        epsilon: Option<f64>,
    ) -> Result<Self> {
        if primes.len() != curve.dim() {
            return Err(Error::InvalidParameter(format!(
                "{} primes for a curve of dimension {}",
                primes.len(),
                curve.dim()
            )));
        }
        let a_sets = primes
            .iter()
            .map(|&p| build_a(p, modulus, h))
            .collect::<Result<Vec<_>>>()?;
        let three_a = primes
            .iter()
            .map(|&p| three_fold_formula(p, modulus, h))
            .collect::<Result<Vec<_>>>()?;
        let eps = epsilon.unwrap_or_else(|| default_epsilon(modulus, h));
        Self::assemble(modulus, Some(h), primes.to_vec(), eps, curve, a_sets, three_a)
    }

    /// Arbitrary sets; `3A_j` is computed by convolution.
    pub fn from_sets(modulus: u64, sets: Vec<Vec<u64>>, curve: Curve, epsilon: f64) -> Result<Self> {
        ensure_modulus(modulus)?;
        if sets.len() != curve.dim() {
            return Err(Error::InvalidParameter(format!(
                "{} sets for a curve of dimension {}",
                sets.len(),
                curve.dim()
            )));
        }
        let mut clean = Vec::with_capacity(sets.len());
        for mut s in sets {
            s.sort_unstable();
            s.dedup();
            if s.is_empty() || *s.last().unwrap() >= modulus {
                return Err(Error::InvalidParameter(
                    "sets must be nonempty residues below the modulus".into(),
                ));
            }
            clean.push(s);
        }
        let three_a = clean.iter().map(|s| three_fold_fft(s, modulus)).collect();
        Self::assemble(modulus, None, Vec::new(), epsilon, curve, clean, three_a)
    }

    /// The alternating curve in dimension `r` against intervals
    /// `A_i = {0, .., ceil(P^(1 - eps)) - 1}`.
    pub fn alternating_intervals(r: usize, modulus: u64, epsilon: f64) -> Result<Self> {
        ensure_modulus(modulus)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {epsilon} must lie in (0, 1)")));
        }
        let target = (modulus as f64).powf(1.0 - epsilon);
        let mut len = pow_floor(modulus, 1.0 - epsilon) as u64;
        if (len as f64) < target {
            len += 1;
        }
        let len = len.min(modulus);
        let sets = vec![(0..len).collect::<Vec<u64>>(); r];
        Self::from_sets(modulus, sets, Curve::alternating(r)?, epsilon)
    }

    fn assemble(
        modulus: u64,
        h: Option<u32>,
        primes: Vec<u64>,
        epsilon: f64,
        curve: Curve,
        a_sets: Vec<Vec<u64>>,
        three_a: Vec<Vec<bool>>,
    ) -> Result<Self> {
        ensure_modulus(modulus)?;
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("eps = {epsilon} must lie in (0, 1)")));
        }
        let floor = (modulus as f64).powf(1.0 - epsilon) * (1.0 - 1e-12);
        if let Some((j, s)) = a_sets.iter().enumerate().find(|(_, s)| (s.len() as f64) < floor) {
            return Err(Error::InvalidParameter(format!(
                "|A_{}| = {} is below P^(1 - eps) = {:.3}",
                j + 1,
                s.len(),
                floor
            )));
        }
        let f = discretize_curve(&curve, modulus)?;
        Ok(FourierInstance { modulus, h, primes, epsilon, curve, a_sets, three_a, f })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn dim(&self) -> usize {
        self.curve.dim()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn a_sets(&self) -> &[Vec<u64>] {
        &self.a_sets
    }

    pub fn three_fold(&self, j: usize) -> &[bool] {
        &self.three_a[j]
    }

    pub fn cells(&self) -> &[CurvePoint] {
        &self.f
    }

    /// `min(floor(P^(10 r^2 eps)), P)`.
    pub fn n_budget(&self) -> u64 {
        let r = self.dim() as f64;
        pow_floor(self.modulus, 10.0 * r * r * self.epsilon).min(self.modulus as u128) as u64
    }

    /// `floor(P^(7 r eps))`, saturating.
    pub fn delta_max(&self) -> u64 {
        let r = self.dim() as f64;
        pow_floor(self.modulus, 7.0 * r * self.epsilon).min(u64::MAX as u128) as u64
    }

    pub fn flags(&self) -> InstanceFlags {
        let r = self.dim() as f64;
        let modulus_exceeds_prime_powers = self.h.map(|h| {
            self.primes
                .iter()
                .all(|&p| (p as u128).checked_pow(2 * h).is_some_and(|v| (self.modulus as u128) > v))
        });
        InstanceFlags {
            out_of_regime: self.epsilon >= 1.0 / (20.0 * r * r),
            delta_range_exceeds_modulus: self.delta_max() >= self.modulus,
            modulus_exceeds_prime_powers,
        }
    }

    pub fn report(&self) -> InstanceReport {
        InstanceReport {
            modulus: self.modulus,
            r: self.dim(),
            h: self.h,
            primes: self.primes.clone(),
            epsilon: self.epsilon,
            curve: self.curve.clone(),
            a_sizes: self.a_sets.iter().map(Vec::len).collect(),
            three_a_sizes: self
                .three_a
                .iter()
                .map(|m| m.iter().filter(|&&b| b).count())
                .collect(),
            f_size: self.f.len(),
            n_budget: self.n_budget(),
            delta_max: self.delta_max(),
            flags: self.flags(),
        }
    }
}

/// `H log 10 / log P`, so that `P^eps = 10^H`.
pub fn default_epsilon(modulus: u64, h: u32) -> f64 {
    h as f64 * std::f64::consts::LN_10 / (modulus as f64).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub modulus: u64,
    pub r: usize,
    pub h: Option<u32>,
    pub primes: Vec<u64>,
    pub epsilon: f64,
    pub curve: Curve,
    pub a_sizes: Vec<usize>,
    pub three_a_sizes: Vec<usize>,
    pub f_size: usize,
    pub n_budget: u64,
    pub delta_max: u64,
    pub flags: InstanceFlags,
}

// ---------------------------------------------------------------------------
// Spectrum

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `P^(r (1 - 3 eps))`.
    pub threshold: f64,
    /// `|Q|`.
    pub q_count: u64,
    /// `P^r prod |A_j| / threshold^2`, the Parseval bound on `|Q|`.
    pub parseval_bound: f64,
    /// `P^(6 r eps)`.
    pub epsilon_bound: f64,
    pub zero_in_q: bool,
    /// `floor(P^(1 - 6 r eps))`, capped at `(P - 1) / 2`.
    pub box_bound: u64,
    /// `Q'`, centered representatives in lexicographic order.
    pub q_prime: Vec<Vec<i64>>,
}

impl Spectrum {
    pub fn has_nonzero(&self) -> bool {
        self.q_prime.iter().any(|s| s.iter().any(|&c| c != 0))
    }
}

/// `Q = { s : prod_j |A_j^(s_j)| >= P^(r (1 - 3 eps)) }`, counted through the
/// product structure, and `Q' = Q` restricted to `|s_i| <= P^(1 - 6 r eps)`.
pub fn spectrum(inst: &FourierInstance) -> Spectrum {
    let modulus = inst.modulus;
    let r = inst.dim();
    let p = modulus as f64;
    let eps = inst.epsilon;
    let mags: Vec<Vec<f64>> = inst
        .a_sets
        .par_iter()
        .map(|s| transform(s, modulus).iter().map(|z| z.norm()).collect())
        .collect();
    let threshold = p.powf(r as f64 * (1.0 - 3.0 * eps));

    let mut sorted: Vec<Vec<f64>> = mags.clone();
    for m in sorted.iter_mut() {
        m.sort_by(|a, b| b.total_cmp(a));
    }
    let q_count = count_products(&sorted, threshold);

    let half = (modulus - 1) / 2;
    let exponent = 1.0 - 6.0 * r as f64 * eps;
    let box_bound = if exponent < 0.0 {
        0
    } else {
        (pow_floor(modulus, exponent).min(half as u128)) as u64
    };
    let boxed: Vec<Vec<(i64, f64)>> = mags
        .iter()
        .map(|m| {
            let b = box_bound as i64;
            let mut v: Vec<(i64, f64)> = (-b..=b)
                .map(|s| (s, m[s.rem_euclid(modulus as i64) as usize]))
                .collect();
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            v
        })
        .collect();
    let mut q_prime = Vec::new();
    collect_products(&boxed, threshold, 0, 1.0, &mut Vec::new(), &mut q_prime);
    q_prime.sort();

    let size_product: f64 = inst.a_sets.iter().map(|s| s.len() as f64).product();
    Spectrum {
        threshold,
        q_count,
        parseval_bound: p.powi(r as i32) * size_product / (threshold * threshold),
        epsilon_bound: p.powf(6.0 * r as f64 * eps),
        zero_in_q: mags.iter().map(|m| m[0]).product::<f64>() >= threshold,
        box_bound,
        q_prime,
    }
}

// `sorted[j]` descending.
fn count_products(sorted: &[Vec<f64>], threshold: f64) -> u64 {
    fn go(sorted: &[Vec<f64>], tail_max: &[f64], j: usize, prefix: f64, threshold: f64) -> u64 {
        let col = &sorted[j];
        if j + 1 == sorted.len() {
            let need = threshold / prefix;
            return col.partition_point(|&m| m >= need) as u64;
        }
        let mut total = 0;
        for &m in col {
            if prefix * m * tail_max[j + 1] < threshold {
                break;
            }
            total += go(sorted, tail_max, j + 1, prefix * m, threshold);
        }
        total
    }
    let mut tail_max = vec![1.0; sorted.len() + 1];
    for j in (0..sorted.len()).rev() {
        tail_max[j] = tail_max[j + 1] * sorted[j].first().copied().unwrap_or(0.0);
    }
    go(sorted, &tail_max, 0, 1.0, threshold)
}

fn collect_products(
    cols: &[Vec<(i64, f64)>],
    threshold: f64,
    j: usize,
    prefix: f64,
    cur: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
) {
    if j == cols.len() {
        if prefix >= threshold {
            out.push(cur.clone());
        }
        return;
    }
    let tail: f64 = cols[j + 1..].iter().map(|c| c[0].1).product();
    for &(s, m) in &cols[j] {
        if prefix * m * tail < threshold {
            break;
        }
        cur.push(s);
        collect_products(cols, threshold, j + 1, prefix * m, cur, out);
        cur.pop();
    }
}

// ---------------------------------------------------------------------------
// Exceptional set

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExceptionalSet {
    /// `P^(-8 r^2 eps)`.
    pub tolerance: f64,
    pub f_size: usize,
    pub e_size: usize,
    pub ratio: f64,
    /// Indices into the instance's cells.
    pub members: Vec<usize>,
    pub median_t_f: Option<f64>,
    pub median_t_e: Option<f64>,
}

/// `E = { x in F : ||x . s / P|| < P^(-8 r^2 eps) for some s in Q' \ {0} }`.
pub fn exceptional_set(inst: &FourierInstance, spec: &Spectrum) -> ExceptionalSet {
    let r = inst.dim() as f64;
    let modulus = inst.modulus as i128;
    let tolerance = (inst.modulus as f64).powf(-8.0 * r * r * inst.epsilon);
    let limit = tolerance * inst.modulus as f64;
    let freqs: Vec<&Vec<i64>> = spec.q_prime.iter().filter(|s| s.iter().any(|&c| c != 0)).collect();
    let members: Vec<usize> = inst
        .f
        .par_iter()
        .enumerate()
        .filter(|(_, pt)| {
            freqs.iter().any(|s| {
                let dot: i128 = pt.x.iter().zip(s.iter()).map(|(&x, &c)| x as i128 * c as i128).sum();
                let m = dot.rem_euclid(modulus);
                ((m.min(modulus - m)) as f64) < limit
            })
        })
        .map(|(i, _)| i)
        .collect();
    let median = |ts: Vec<f64>| -> Option<f64> {
        let mut ts = ts;
        if ts.is_empty() {
            return None;
        }
        ts.sort_by(f64::total_cmp);
        Some(ts[ts.len() / 2])
    };
    let f_size = inst.f.len();
    ExceptionalSet {
        tolerance,
        f_size,
        e_size: members.len(),
        ratio: if f_size == 0 { 0.0 } else { members.len() as f64 / f_size as f64 },
        median_t_f: median(inst.f.iter().map(|c| c.t).collect()),
        median_t_e: median(members.iter().map(|&i| inst.f[i].t).collect()),
        members,
    }
}

// ---------------------------------------------------------------------------
// The conclusion

struct WindowIndex {
    modulus: u64,
    prefix: Vec<u32>,
    mask: Vec<bool>,
}

impl WindowIndex {
    fn new(mask: &[bool]) -> Self {
        let mut prefix = Vec::with_capacity(mask.len() + 1);
        prefix.push(0u32);
        for &b in mask {
            prefix.push(prefix.last().unwrap() + b as u32);
        }
        WindowIndex { modulus: mask.len() as u64, prefix, mask: mask.to_vec() }
    }

    fn count(&self, lo: u64, hi: u64) -> u32 {
        self.prefix[hi as usize + 1] - self.prefix[lo as usize]
    }

    /// Some `delta in [0, d]` with `y - delta` in the set.
    fn hit(&self, y: u64, d: u64) -> bool {
        if d + 1 >= self.modulus {
            return *self.prefix.last().unwrap() > 0;
        }
        if d <= y {
            self.count(y - d, y) > 0
        } else {
            self.count(0, y) > 0 || self.count(self.modulus - (d - y), self.modulus - 1) > 0
        }
    }

    fn least_delta(&self, y: u64, d: u64) -> Option<u64> {
        (0..=d.min(self.modulus - 1)).find(|&delta| {
            let v = (y + self.modulus - delta % self.modulus) % self.modulus;
            self.mask[v as usize]
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub n: u64,
    pub delta: Vec<u64>,
}

fn witness_with(
    index: &[WindowIndex],
    modulus: u64,
    n_budget: u64,
    d: u64,
    x: &[u64],
    beta: &[u64],
) -> Option<Witness> {
    (1..=n_budget).find_map(|n| {
        let ys: Vec<u64> = x
            .iter()
            .zip(beta)
            .map(|(&xi, &bi)| ((n as u128 * xi as u128 + bi as u128) % modulus as u128) as u64)
            .collect();
        if ys.iter().zip(index).all(|(&y, w)| w.hit(y, d)) {
            let delta = ys
                .iter()
                .zip(index)
                .map(|(&y, w)| w.least_delta(y, d).expect("window hit"))
                .collect();
            Some(Witness { n, delta })
        } else {
            None
        }
    })
}

/// Least `n <= n_budget` with `n x + beta - delta in 3A_1 x .. x 3A_r` for some
/// `delta in {0..delta_max}^r`, with the least such `delta`.
pub fn find_witness(inst: &FourierInstance, x: &[u64], beta: &[u64]) -> Result<Option<Witness>> {
    if x.len() != inst.dim() || beta.len() != inst.dim() {
        return Err(Error::InvalidParameter("x and beta must match the dimension".into()));
    }
    if x.iter().chain(beta).any(|&v| v >= inst.modulus) {
        return Err(Error::InvalidParameter("x and beta must be residues mod P".into()));
    }
    let index: Vec<WindowIndex> = inst.three_a.iter().map(|m| WindowIndex::new(m)).collect();
    Ok(witness_with(&index, inst.modulus, inst.n_budget(), inst.delta_max(), x, beta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConclusionReport {
    pub n_budget: u64,
    pub delta_max: u64,
    pub trials: u64,
    pub successes: u64,
    pub rate: Option<f64>,
    pub max_least_n: Option<u64>,
    pub exceptional_trials: u64,
    pub exceptional_successes: u64,
    pub exceptional_rate: Option<f64>,
}

/// Random `beta` and random `x in F \ E` per trial, each trial on its own
/// stream of `seed`. The same number of trials is run on `x in E` and
/// reported separately.
pub fn verify_conclusion(
    inst: &FourierInstance,
    exceptional: &ExceptionalSet,
    trials: u64,
    seed: u64,
) -> Result<ConclusionReport> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let index: Vec<WindowIndex> = inst.three_a.iter().map(|m| WindowIndex::new(m)).collect();
    let in_e: std::collections::HashSet<usize> = exceptional.members.iter().copied().collect();
    let regular: Vec<usize> = (0..inst.f.len()).filter(|i| !in_e.contains(i)).collect();
    let n_budget = inst.n_budget();
    let d = inst.delta_max();

    let run = |pool: &[usize], stream_base: u64| -> Vec<Option<u64>> {
        if pool.is_empty() {
            return Vec::new();
        }
        (0..trials)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(stream_base + k);
                let x = &inst.f[pool[rng.gen_range(0..pool.len())]].x;
                let beta: Vec<u64> = (0..inst.dim()).map(|_| rng.gen_range(0..inst.modulus)).collect();
                witness_with(&index, inst.modulus, n_budget, d, x, &beta).map(|w| w.n)
            })
            .collect()
    };
    let main = run(&regular, 0);
    let side = run(&exceptional.members, 1 << 32);
    let rate = |v: &[Option<u64>]| {
        (!v.is_empty()).then(|| v.iter().filter(|w| w.is_some()).count() as f64 / v.len() as f64)
    };
    Ok(ConclusionReport {
        n_budget,
        delta_max: d,
        trials: main.len() as u64,
        successes: main.iter().filter(|w| w.is_some()).count() as u64,
        rate: rate(&main),
        max_least_n: main.iter().flatten().copied().max(),
        exceptional_trials: side.len() as u64,
        exceptional_successes: side.iter().filter(|w| w.is_some()).count() as u64,
        exceptional_rate: rate(&side),
    })
}

// ---------------------------------------------------------------------------
// Alternating-curve obstruction

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RemarkReport {
    pub r: usize,
    pub modulus: u64,
    pub epsilon: f64,
    /// `A_i = {0, .., a_max}` with `a_max = floor(P^(1 - r eps) / 3)`.
    pub a_max: u64,
    /// `P^(-r eps)`.
    pub t_max: f64,
    /// `floor(P^(r (r - 1) eps / 2))`.
    pub n_bound: u64,
    pub cells: usize,
    pub zero_cell: bool,
    /// Pairs `(n, x)`, `x != 0`, with `n x in 3A_1 x .. x 3A_r`.
    pub vector_hits: u64,
    /// Pairs `(n, x)`, `x != 0`, with `n (x_1 + .. + x_r) mod P` in `3A_1 + .. + 3A_r`.
    pub sum_hits: u64,
    pub avoidance_holds: bool,
    pub sum_avoidance_holds: bool,
    pub first_sum_hit: Option<(u64, Vec<u64>)>,
    /// Least `n` above `n_bound` with a vector hit.
    pub first_failing_n: Option<u64>,
}

/// Direct check of the alternating curve against intervals `A_i`, `beta = 0`,
/// over `t in [0, P^(-r eps))` and `n <= P^(r (r - 1) eps / 2)`.
pub fn counterexample_remark(r: usize, modulus: u64, epsilon: f64) -> Result<RemarkReport> {
    if r < 2 {
        return Err(Error::InvalidParameter("the alternating curve needs r >= 2".into()));
    }
    ensure_modulus(modulus)?;
    if !(epsilon > 0.0 && epsilon < 1.0 / r as f64) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1/r), got {epsilon}")));
    }
    let rf = r as f64;
    let a_max = (pow_floor(modulus, 1.0 - rf * epsilon) / 3) as u64;
    let top = 3 * a_max;
    let t_max = (modulus as f64).powf(-rf * epsilon);
    let n_bound = pow_floor(modulus, rf * (rf - 1.0) * epsilon / 2.0).min(modulus as u128) as u64;
    let curve = Curve::alternating(r)?;
    let cells = discretize_range(&curve, modulus, 0.0, t_max)?;
    let zero_cell = cells.iter().any(|c| c.x.iter().all(|&v| v == 0));
    let nonzero: Vec<&CurvePoint> = cells.iter().filter(|c| c.x.iter().any(|&v| v != 0)).collect();

    let m = modulus as u128;
    let vector_hit = |n: u64, x: &[u64]| x.iter().all(|&xi| (n as u128 * xi as u128 % m) as u64 <= top);
    let sum_hit = |n: u64, x: &[u64]| {
        let s: u128 = x.iter().map(|&v| v as u128).sum::<u128>() % m;
        (n as u128 * s % m) as u64 <= rf as u64 * top
    };

    let mut vector_hits = 0;
    let mut sum_hits = 0;
    let mut first_sum_hit = None;
    for n in 1..=n_bound {
        for c in &nonzero {
            if vector_hit(n, &c.x) {
                vector_hits += 1;
            }
            if sum_hit(n, &c.x) {
                sum_hits += 1;
                if first_sum_hit.is_none() {
                    first_sum_hit = Some((n, c.x.clone()));
                }
            }
        }
    }
    let first_failing_n = (n_bound + 1..modulus)
        .into_par_iter()
        .find_first(|&n| nonzero.iter().any(|c| vector_hit(n, &c.x)));
    Ok(RemarkReport {
        r,
        modulus,
        epsilon,
        a_max,
        t_max,
        n_bound,
        cells: cells.len(),
        zero_cell,
        vector_hits,
        sum_hits,
        avoidance_holds: vector_hits == 0,
        sum_avoidance_holds: sum_hits == 0,
        first_sum_hit,
        first_failing_n,
    })
}

// ---------------------------------------------------------------------------
// Exponential sums on a grid

/// `H(t) = sum_i c_i x_i^t` sampled at `2^r` increasing points of `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaInstance {
    coefficients: Vec<f64>,
    bases: Vec<f64>,
    grid: Vec<f64>,
}

impl LemmaInstance {
    pub fn new(coefficients: Vec<f64>, bases: Vec<f64>, grid: Vec<f64>) -> Result<Self> {
        let r = coefficients.len();
        if r == 0 || bases.len() != r {
            return Err(Error::InvalidParameter(
                "need equally many coefficients and bases, at least one".into(),
            ));
        }
        if r > 16 || grid.len() != 1 << r {
            return Err(Error::InvalidParameter(format!("grid must have 2^{r} points")));
        }
        if coefficients.iter().any(|c| !c.is_finite() || *c == 0.0) {
            return Err(Error::InvalidParameter("coefficients must be finite and nonzero".into()));
        }
        for (i, &x) in bases.iter().enumerate() {
            if !x.is_finite() || x <= 0.0 || bases[..i].contains(&x) {
                return Err(Error::InvalidParameter("bases must be positive and distinct".into()));
            }
        }
        let ordered = grid.windows(2).all(|w| w[0] < w[1]);
        if !ordered || grid[0] <= 0.0 || *grid.last().unwrap() >= 1.0 {
            return Err(Error::InvalidParameter(
                "grid must be strictly increasing inside (0, 1)".into(),
            ));
        }
        Ok(LemmaInstance { coefficients, bases, grid })
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn bases(&self) -> &[f64] {
        &self.bases
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Least gap between consecutive grid points.
    pub fn delta(&self) -> f64 {
        self.grid.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// `H(t)` and a bound on its rounding error.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let mut acc = Neumaier::default();
        let mut mass = 0.0;
        for (c, x) in self.coefficients.iter().zip(&self.bases) {
            let term = c * x.powf(t);
            acc.add(term);
            mass += term.abs();
        }
        (acc.value(), 8.0 * f64::EPSILON * mass)
    }

    /// `(1 - e^t)^(r-1)` expanded over bases `e^(j-1)`, sampled at `v_j = j delta`.
    pub fn tightness(r: usize, delta: f64) -> Result<Self> {
        if r < 2 {
            return Err(Error::InvalidParameter("tightness needs r >= 2".into()));
        }
        let mut coefficients = Vec::with_capacity(r);
        let mut binom = 1.0f64;
        for i in 0..r {
            coefficients.push(if i % 2 == 0 { binom } else { -binom });
            binom = binom * (r - 1 - i) as f64 / (i + 1) as f64;
        }
        let bases = (0..r).map(|j| (j as f64).exp()).collect();
        let grid = (1..=1usize << r).map(|j| j as f64 * delta).collect();
        Self::new(coefficients, bases, grid)
    }

    /// Coefficients of magnitude in `[0.1, 10]` with random sign, bases
    /// log-uniform in `[0.1, 10]`, grid uniform.
    pub fn random(r: usize, rng: &mut impl Rng) -> Result<Self> {
        loop {
            let coefficients: Vec<f64> = (0..r)
                .map(|_| {
                    let mag = rng.gen_range(-1.0f64..1.0) * std::f64::consts::LN_10;
                    if rng.gen::<bool>() { mag.exp() } else { -mag.exp() }
                })
                .collect();
            let bases: Vec<f64> = (0..r)
                .map(|_| (rng.gen_range(-1.0f64..1.0) * std::f64::consts::LN_10).exp())
                .collect();
            let mut grid: Vec<f64> = (0..1usize << r).map(|_| rng.gen::<f64>()).collect();
            grid.sort_by(f64::total_cmp);
            if let Ok(inst) = Self::new(coefficients, bases, grid) {
                return Ok(inst);
            }
        }
    }
}

/// The constant `c(x_1, .., x_r)` obtained by unwinding the induction:
/// `c = min(1, x_1)` for one term; otherwise, with `i0` the index of the
/// largest `|c_i|` and `j0 = 2` if `i0 = 1` else `1`,
/// `c = c'(x_k / x_j0) * min_{k != j0} |log(x_k / x_j0)| * min(1, x_j0)` where
/// `c'` is taken for the derivative's coefficients `c_k log(x_k / x_j0)`.
pub fn lemma_constant(coefficients: &[f64], bases: &[f64]) -> f64 {
    if coefficients.len() == 1 {
        return bases[0].min(1.0);
    }
    let i0 = coefficients
        .iter()
        .enumerate()
        .fold(0, |best, (i, c)| if c.abs() > coefficients[best].abs() { i } else { best });
    let j0 = if i0 == 0 { 1 } else { 0 };
    let pivot = bases[j0];
    let mut next_c = Vec::with_capacity(bases.len() - 1);
    let mut next_x = Vec::with_capacity(bases.len() - 1);
    let mut min_log = f64::INFINITY;
    for k in (0..bases.len()).filter(|&k| k != j0) {
        let ratio = bases[k] / pivot;
        let log = ratio.ln();
        next_c.push(coefficients[k] * log);
        next_x.push(ratio);
        min_log = min_log.min(log.abs());
    }
    lemma_constant(&next_c, &next_x) * min_log * pivot.min(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub r: usize,
    /// 1-based index of the grid point with the largest `|H|`.
    pub j: usize,
    pub max_value: f64,
    pub constant: f64,
    pub max_coefficient: f64,
    pub delta: f64,
    /// `delta^(r-1) * constant * max_coefficient`.
    pub certified_bound: f64,
    pub holds: bool,
}

pub fn lemma_lower_bound(inst: &LemmaInstance) -> LemmaReport {
    let r = inst.dim();
    let (j, max_value, err) = inst
        .grid
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let (h, e) = inst.eval(v);
            (k + 1, h.abs(), e)
        })
        .fold((0, -1.0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    let constant = lemma_constant(&inst.coefficients, &inst.bases);
    let max_coefficient = inst.coefficients.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let delta = inst.delta();
    let certified_bound = delta.powi(r as i32 - 1) * constant * max_coefficient;
    LemmaReport {
        r,
        j,
        max_value,
        constant,
        max_coefficient,
        delta,
        certified_bound,
        holds: max_value + err >= certified_bound,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaSweep {
    pub instances: u64,
    pub violations: u64,
    /// Least `max |H| / bound` seen.
    pub min_ratio: f64,
    pub first_violation: Option<LemmaInstance>,
}

/// Random instances with `r` uniform in `1..=max_r`, one stream per instance.
pub fn lemma_sweep(count: u64, max_r: usize, seed: u64) -> Result<LemmaSweep> {
    if max_r == 0 || max_r > 8 {
        return Err(Error::InvalidParameter("max r must lie in 1..=8".into()));
    }
    let results: Vec<(LemmaInstance, LemmaReport)> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let r = rng.gen_range(1..=max_r);
            let inst = LemmaInstance::random(r, &mut rng)?;
            let rep = lemma_lower_bound(&inst);
            Ok((inst, rep))
        })
        .collect::<Result<_>>()?;
    let violations = results.iter().filter(|(_, r)| !r.holds).count() as u64;
    Ok(LemmaSweep {
        instances: count,
        violations,
        min_ratio: results
            .iter()
            .map(|(_, r)| r.max_value / r.certified_bound)
            .fold(f64::INFINITY, f64::min),
        first_violation: results.into_iter().find(|(_, r)| !r.holds).map(|(i, _)| i),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance_11() -> FourierInstance {
        let curve = Curve::new(vec![1.0 / 11.0], vec![11.0]).unwrap();
        FourierInstance::from_digits(&[11], 1009, 1, curve, None).unwrap()
    }

    #[test]
    fn digit_set_examples() {
        let a = build_a(11, 1009, 1).unwrap();
        assert_eq!(a, (0..184).collect::<Vec<u64>>());
        assert!(a.len() as f64 >= 100.9);
        let b = build_a(31, 1009, 1).unwrap();
        // d in 0..=3, weight 33, interval 0..33
        assert_eq!(b.len(), 4 * 33);
        assert!(matches!(build_a(11, 1009, 0), Err(Error::InvalidParameter(_))));
        let err = build_a(31, 37, 2).unwrap_err();
        assert!(err.is_invariant_violation());
    }

    #[test]
    fn three_fold_agrees_with_convolution() {
        for (p, modulus, h) in [(11, 1009, 1), (31, 1009, 1), (13, 1999, 1), (11, 2003, 2)] {
            let a = build_a(p, modulus, h).unwrap();
            assert_eq!(three_fold_formula(p, modulus, h).unwrap(), three_fold_fft(&a, modulus));
        }
    }

    #[test]
    fn parseval_small() {
        let a = build_a(11, 1009, 1).unwrap();
        assert!(parseval_defect(&a, 1009) < 1e-12);
        let big = build_a(101, 20011, 1).unwrap();
        assert!(parseval_defect(&big, 20011) < 1e-9);
    }

    #[test]
    fn one_dimensional_curve() {
        let curve = Curve::new(vec![1.0], vec![2.0]).unwrap();
        let f = discretize_curve(&curve, 101).unwrap();
        let xs: Vec<u64> = f.iter().map(|c| c.x[0]).collect();
        // floor(101 * 2^t) for t in [0, 1) takes 101..=201, i.e. 0..=100 mod 101.
        assert_eq!(xs, (0..101).collect::<Vec<u64>>());
    }

    #[test]
    fn two_dimensional_curve_size() {
        let curve = Curve::new(vec![1.0, 1.0], vec![2.0, 3.0]).unwrap();
        let f = discretize_curve(&curve, 101).unwrap();
        assert!(f.len() >= 51 && f.len() <= 303, "|F| = {}", f.len());
    }

    #[test]
    fn curve_validation() {
        assert!(Curve::new(vec![1.0], vec![1.0]).is_err());
        assert!(Curve::new(vec![0.0], vec![2.0]).is_err());
        assert!(Curve::new(vec![1.0, 1.0], vec![2.0, 2.0]).is_err());
        assert!(Curve::new(vec![1.0], vec![-2.0]).is_err());
        let alt = Curve::alternating(3).unwrap();
        assert_eq!(alt.zeta, vec![1.0, -2.0, 1.0]);
        assert_eq!(alt.theta, vec![0.5, 0.25, 0.125]);
    }

    #[test]
    fn spectrum_of_full_set() {
        let curve = Curve::new(vec![0.5], vec![1.5]).unwrap();
        let inst = FourierInstance::from_sets(101, vec![(0..101).collect()], curve, 0.1).unwrap();
        let s = spectrum(&inst);
        assert_eq!(s.q_count, 1);
        assert!(s.zero_in_q);
        assert_eq!(exceptional_set(&inst, &s).e_size, 0);
    }

    #[test]
    fn instance_11_pipeline() {
        let inst = instance_11();
        let rep = inst.report();
        assert!(rep.flags.out_of_regime);
        assert!(rep.flags.delta_range_exceeds_modulus);
        assert_eq!(rep.flags.modulus_exceeds_prime_powers, Some(true));
        assert_eq!(inst.n_budget(), 1009);
        let s = spectrum(&inst);
        assert!(s.zero_in_q);
        assert!((s.q_count as f64) <= s.parseval_bound * (1.0 + 1e-9));
        assert!((s.q_count as f64) <= 4.0 * s.epsilon_bound);
        let e = exceptional_set(&inst, &s);
        assert!(e.ratio <= 0.2);
        let c = verify_conclusion(&inst, &e, 100, 7).unwrap();
        assert!(c.rate.unwrap() >= 0.95);
    }

    #[test]
    fn witness_for_member() {
        let inst = instance_11();
        let x = [5u64];
        assert!(inst.three_fold(0)[5]);
        let w = find_witness(&inst, &x, &[0]).unwrap().unwrap();
        assert_eq!(w, Witness { n: 1, delta: vec![0] });
    }

    #[test]
    fn scaled_window() {
        for (p, modulus, h) in [(11u64, 1009u64, 1u32), (31, 1009, 1), (11, 14653, 2)] {
            let mask = three_fold_formula(p, modulus, h).unwrap();
            for z in indices(&mask) {
                assert!(scaled_window_contains(p, modulus, h, z), "p={p} P={modulus} z={z}");
            }
        }
    }

    #[test]
    fn lemma_examples() {
        let one = LemmaInstance::new(vec![5.0], vec![2.0], vec![0.3, 0.6]).unwrap();
        let rep = lemma_lower_bound(&one);
        assert_eq!(rep.constant, 1.0);
        assert_eq!(rep.certified_bound, 5.0);
        assert!(rep.holds);
        let two =
            LemmaInstance::new(vec![1.0, -1.0], vec![2.0, 3.0], vec![0.1, 0.3, 0.5, 0.7]).unwrap();
        let rep = lemma_lower_bound(&two);
        assert!(rep.holds, "{rep:?}");
        // i0 = 1, j0 = 2: c = min(1, 2/3) * |log(2/3)| * min(1, 3).
        let expect = (2.0f64 / 3.0) * (1.5f64).ln();
        assert!((rep.constant - expect).abs() < 1e-15);
    }

    #[test]
    fn tightness_coefficients() {
        let inst = LemmaInstance::tightness(3, 1e-3).unwrap();
        assert_eq!(inst.coefficients(), &[1.0, -2.0, 1.0]);
        let (h, _) = inst.eval(0.5);
        assert!((h - (0.5f64.exp() - 1.0).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn lemma_rejects_bad_instances() {
        assert!(LemmaInstance::new(vec![1.0, 1.0], vec![2.0, 2.0], vec![0.1, 0.2, 0.3, 0.4]).is_err());
        assert!(LemmaInstance::new(vec![1.0], vec![2.0], vec![0.2, 0.1]).is_err());
        assert!(LemmaInstance::new(vec![0.0], vec![2.0], vec![0.1, 0.2]).is_err());
    }

    #[test]
    fn alternating_exceptional_cells_sit_near_start() {
        let inst = FourierInstance::alternating_intervals(2, 1009, 0.05).unwrap();
        let s = spectrum(&inst);
        assert!(s.has_nonzero());
        let e = exceptional_set(&inst, &s);
        assert_eq!(e.e_size, 2);
        assert!(e.median_t_e.unwrap() < 0.01);
        assert!(e.median_t_f.unwrap() > 0.3);
    }

    #[test]
    fn alternating_obstruction() {
        let rep = counterexample_remark(2, 10007, 0.1).unwrap();
        assert_eq!((rep.a_max, rep.n_bound, rep.cells), (528, 2, 3015));
        assert!(rep.zero_cell);
        assert!(rep.avoidance_holds);
        // The coordinate sum is small and nonnegative, so it lands in the sum of
        // intervals; only the coordinates themselves avoid 3A.
        assert!(!rep.sum_avoidance_holds);
        assert_eq!(rep.first_failing_n, Some(57));
    }

    #[test]
    fn remark_rejects_r1() {
        assert!(counterexample_remark(1, 10007, 0.1).is_err());
    }
}
