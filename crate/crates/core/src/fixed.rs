//! Certified fixed-point reals.
//!
//! A [`Fixed`] value is a midpoint and a radius, both integers scaled by
//! `2^-bits`; the represented real is guaranteed to lie in
//! `[(mid - rad) / 2^bits, (mid + rad) / 2^bits]`. Every operation widens the
//! radius enough to keep that guarantee, and every decision that depends on
//! which side of a boundary a value lies ([`Fixed::floor`],
//! [`Fixed::cmp_certified`]) refuses to answer when the interval straddles the
//! boundary.

use std::cmp::Ordering;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{Float, One, ToPrimitive, Zero};

use crate::{Error, Result};

const GUARD_BITS: u32 = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixed {
    mid: BigInt,
    rad: BigUint,
    bits: u32,
}

fn shr_floor(x: &BigInt, k: u32) -> BigInt {
    x.div_floor(&(BigInt::one() << k))
}

fn shr_ceil(x: &BigUint, k: u32) -> BigUint {
    let d = BigUint::one() << k;
    (x + &d - 1u32) / d
}

impl Fixed {
    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn mid(&self) -> &BigInt {
        &self.mid
    }

    pub fn rad(&self) -> &BigUint {
        &self.rad
    }

    pub fn zero(bits: u32) -> Self {
        Self::from_int(0, bits)
    }

    pub fn from_int(v: impl Into<BigInt>, bits: u32) -> Self {
        Self {
            mid: v.into() << bits,
            rad: BigUint::zero(),
            bits,
        }
    }

    /// `num / den`, truncated to `bits` fractional bits.
    pub fn from_ratio(num: &BigInt, den: &BigInt, bits: u32) -> Self {
        assert!(!den.is_zero(), "zero denominator");
        let (q, r) = (num << bits).div_mod_floor(den);
        Self {
            mid: q,
            rad: if r.is_zero() {
                BigUint::zero()
            } else {
                BigUint::one()
            },
            bits,
        }
    }

    pub fn from_f64(x: f64, bits: u32) -> Self {
        assert!(x.is_finite(), "non-finite f64");
        let (mantissa, exponent, sign) = x.integer_decode();
        let m = BigInt::from(mantissa) * i64::from(sign);
        let shift = i64::from(exponent) + i64::from(bits);
        if shift >= 0 {
            Self {
                mid: m << shift as u32,
                rad: BigUint::zero(),
                bits,
            }
        } else {
            Self::from_ratio(&m, &(BigInt::one() << (-shift) as u32), bits)
        }
    }

    /// Lowers or raises the number of fractional bits.
    pub fn with_bits(&self, bits: u32) -> Self {
        match bits.cmp(&self.bits) {
            Ordering::Equal => self.clone(),
            Ordering::Greater => {
                let k = bits - self.bits;
                Self {
                    mid: &self.mid << k,
                    rad: &self.rad << k,
                    bits,
                }
            }
            Ordering::Less => {
                let k = self.bits - bits;
                Self {
                    mid: shr_floor(&self.mid, k),
                    rad: shr_ceil(&self.rad, k) + 1u32,
                    bits,
                }
            }
        }
    }

    fn check_bits(&self, other: &Fixed) {
        assert_eq!(self.bits, other.bits, "mixed-precision Fixed arithmetic");
    }

    pub fn add(&self, other: &Fixed) -> Fixed {
        self.check_bits(other);
        Fixed {
            mid: &self.mid + &other.mid,
            rad: &self.rad + &other.rad,
            bits: self.bits,
        }
    }

    pub fn sub(&self, other: &Fixed) -> Fixed {
        self.check_bits(other);
        Fixed {
            mid: &self.mid - &other.mid,
            rad: &self.rad + &other.rad,
            bits: self.bits,
        }
    }

    pub fn neg(&self) -> Fixed {
        Fixed {
            mid: -&self.mid,
            rad: self.rad.clone(),
            bits: self.bits,
        }
    }

    pub fn mul(&self, other: &Fixed) -> Fixed {
        self.check_bits(other);
        let w = self.bits;
        let a = self.mid.magnitude();
        let b = other.mid.magnitude();
        let err = a * &other.rad + b * &self.rad + &self.rad * &other.rad;
        Fixed {
            mid: shr_floor(&(&self.mid * &other.mid), w),
            rad: shr_ceil(&err, w) + 1u32,
            bits: w,
        }
    }

    pub fn mul_int(&self, k: &BigInt) -> Fixed {
        Fixed {
            mid: &self.mid * k,
            rad: &self.rad * k.magnitude(),
            bits: self.bits,
        }
    }

    pub fn mul_i64(&self, k: i64) -> Fixed {
        self.mul_int(&BigInt::from(k))
    }

    pub fn div_int(&self, k: &BigInt) -> Fixed {
        assert!(!k.is_zero(), "division by zero");
        let mag = k.magnitude();
        let mid = self.mid.div_floor(k);
        let rem_free = (&mid * k) == self.mid;
        Fixed {
            mid,
            rad: (&self.rad + mag - 1u32) / mag + if rem_free { 0u32 } else { 1u32 },
            bits: self.bits,
        }
    }

    /// Quotient of two intervals; the divisor must certainly be nonzero.
    pub fn div(&self, other: &Fixed) -> Result<Fixed> {
        self.check_bits(other);
        let b = other.mid.magnitude();
        if b <= &other.rad {
            return Err(Error::PrecisionExhausted(
                "division by an interval containing zero".into(),
            ));
        }
        let w = self.bits;
        let mid = (&self.mid << w).div_floor(&other.mid);
        let a = self.mid.magnitude();
        let num = (&self.rad * b + a * &other.rad) << w;
        let den = b * (b - &other.rad);
        Ok(Fixed {
            mid,
            rad: (num + &den - 1u32) / den + 2u32,
            bits: w,
        })
    }

    fn lo(&self) -> BigInt {
        &self.mid - BigInt::from(self.rad.clone())
    }

    fn hi(&self) -> BigInt {
        &self.mid + BigInt::from(self.rad.clone())
    }

    /// `floor(x)` when the whole interval has the same floor.
    pub fn floor(&self) -> Result<BigInt> {
        let lo = shr_floor(&self.lo(), self.bits);
        let hi = shr_floor(&self.hi(), self.bits);
        if lo == hi {
            Ok(lo)
        } else {
            Err(Error::PrecisionExhausted(format!(
                "floor of a value near the integer {hi}"
            )))
        }
    }

    /// `x - floor(x)`, certified to lie in `[0, 1)`.
    pub fn frac(&self) -> Result<Fixed> {
        let f = self.floor()?;
        Ok(self.sub(&Fixed::from_int(f, self.bits)))
    }

    /// Ordering against `other` if the two intervals are disjoint (or both
    /// exact and equal).
    pub fn cmp_certified(&self, other: &Fixed) -> Option<Ordering> {
        self.check_bits(other);
        if self.hi() < other.lo() {
            Some(Ordering::Less)
        } else if self.lo() > other.hi() {
            Some(Ordering::Greater)
        } else if self.rad.is_zero() && other.rad.is_zero() && self.mid == other.mid {
            Some(Ordering::Equal)
        } else {
            None
        }
    }

    /// True when zero is outside the interval.
    pub fn is_certainly_nonzero(&self) -> bool {
        self.mid.magnitude() > &self.rad
    }

    pub fn to_f64(&self) -> f64 {
        let m = self.mid.to_f64().unwrap_or(f64::NAN);
        m * 2f64.powi(-(self.bits as i32))
    }

    pub fn radius_f64(&self) -> f64 {
        self.rad.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-(self.bits as i32))
    }

    /// Top 128 fractional bits of a value certified to lie in `[0, 1)`.
    pub fn to_unit_u128(&self) -> Result<u128> {
        if self.bits < 128 {
            return Err(Error::InvalidParameter(
                "to_unit_u128 needs at least 128 fractional bits".into(),
            ));
        }
        if self.floor()? != BigInt::zero() {
            return Err(Error::InvalidParameter("value is not in [0, 1)".into()));
        }
        let top = shr_floor(&self.mid, self.bits - 128);
        Ok(top.to_u128().unwrap_or(u128::MAX))
    }

    /// Certified `atanh(num / den)` for `0 <= num / den <= 1/3`.
    fn atanh_small(num: &BigInt, den: &BigInt, bits: u32) -> Fixed {
        let w = bits + GUARD_BITS;
        let z = (num << w).div_floor(den);
        let z2 = shr_floor(&(&z * &z), w);
        let mut term = z.clone();
        let mut sum = z;
        let mut k = 1u32;
        let mut terms = 1u32;
        loop {
            term = shr_floor(&(&term * &z2), w);
            if term.is_zero() {
                break;
            }
            sum += &term / BigInt::from(2 * k + 1);
            k += 1;
            terms += 1;
        }
        Fixed {
            mid: sum,
            rad: BigUint::from(5 * terms + 10),
            bits: w,
        }
        .with_bits(bits)
    }

    pub fn ln2(bits: u32) -> Fixed {
        Self::atanh_small(&BigInt::from(1), &BigInt::from(3), bits + 2).mul_i64(2).with_bits(bits)
    }

    /// Certified natural logarithm of a positive integer.
    pub fn ln_biguint(n: &BigUint, bits: u32) -> Result<Fixed> {
        if n.is_zero() {
            return Err(Error::InvalidParameter("ln(0)".into()));
        }
        if n.is_one() {
            return Ok(Self::zero(bits));
        }
        let w = bits + 8;
        let k = n.bits() - 1;
        let two_k = BigUint::one() << k;
        let num = BigInt::from_biguint(Sign::Plus, n - &two_k);
        let den = BigInt::from_biguint(Sign::Plus, n + &two_k);
        let series = Self::atanh_small(&num, &den, w).mul_i64(2);
        let head = Self::ln2(w).mul_int(&BigInt::from(k));
        Ok(head.add(&series).with_bits(bits))
    }

    pub fn ln_u64(n: u64, bits: u32) -> Result<Fixed> {
        Self::ln_biguint(&BigUint::from(n), bits)
    }

    /// `log 2 / log p` for an integer `p >= 2`.
    pub fn log2_over_log(p: u64, bits: u32) -> Result<Fixed> {
        let w = bits + 16;
        let ln_p = Self::ln_u64(p, w)?;
        Ok(Self::ln2(w).div(&ln_p)?.with_bits(bits))
    }

    /// Certified `e^x` for moderate `|x|` (at most a few thousand).
    pub fn exp(&self) -> Result<Fixed> {
        let approx = self.to_f64();
        if !approx.is_finite() || approx.abs() > 1.0e5 {
            return Err(Error::InvalidParameter(format!("exp argument {approx} too large")));
        }
        let w = self.bits + GUARD_BITS;
        let x = self.with_bits(w);
        let q = (approx / std::f64::consts::LN_2).round() as i64;
        let r = x.sub(&Self::ln2(w).mul_i64(q));
        let one = BigInt::one() << w;
        let mut term = one.clone();
        let mut sum = one;
        let mut i = 1i64;
        loop {
            term = shr_floor(&(&term * &r.mid), w).div_floor(&BigInt::from(i));
            if term.is_zero() {
                break;
            }
            sum += &term;
            i += 1;
        }
        let taylor = Fixed {
            mid: sum,
            rad: BigUint::from(4 * i as u64 + 4) + (&r.rad << 1u32),
            bits: w,
        };
        let scaled = if q >= 0 {
            Fixed {
                mid: taylor.mid << q as u32,
                rad: taylor.rad << q as u32,
                bits: w,
            }
        } else {
            let k = (-q) as u32;
            Fixed {
                mid: shr_floor(&taylor.mid, k),
                rad: shr_ceil(&taylor.rad, k) + 1u32,
                bits: w,
            }
        };
        Ok(scaled.with_bits(self.bits))
    }
}
