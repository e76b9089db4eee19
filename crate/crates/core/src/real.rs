//! Extended-precision real and complex scalars.
//!
//! [`Real`] wraps an `astro_float::BigFloat` and carries its own significand
//! width. Binary operations run at the wider of the two operand precisions.
//! The exponent range is effectively unbounded, so moments of size
//! `e^{-1000}` and their reciprocals are representable without scaling.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::rc::Rc;
use std::str::FromStr;

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const RM: RoundingMode = RoundingMode::ToEven;

/// Significand width used when a value carries no precision (NaN, infinity).
pub const FALLBACK_BITS: usize = 256;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("astro-float constant cache"));
}

thread_local! {
    static INV_FACTORIALS: RefCell<HashMap<usize, Rc<Vec<Real>>>> = RefCell::new(HashMap::new());
}

/// `1/i!` for `i < 96` at `bits`.
fn inv_factorials(bits: usize) -> Rc<Vec<Real>> {
    INV_FACTORIALS.with(|m| {
        m.borrow_mut()
            .entry(bits)
            .or_insert_with(|| {
                let mut out = vec![Real::one(bits)];
                for i in 1..96u64 {
                    let next = out.last().expect("nonempty") / &Real::from_u64(i, bits);
                    out.push(next);
                }
                Rc::new(out)
            })
            .clone()
    })
}

fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
    CONSTS.with(|cc| f(&mut cc.borrow_mut()))
}

/// Extended-precision real number.
#[derive(Clone)]
pub struct Real {
    v: BigFloat,
    bits: usize,
}

/// `Some(n)` when `e` is an integer of modest size.
fn small_integer(e: &Real) -> Option<i64> {
    let f = e.to_f64();
    if f.fract() != 0.0 || f.abs() > 4096.0 {
        return None;
    }
    (Real::from_f64(f, e.precision()) == *e).then_some(f as i64)
}

impl Real {
    pub fn from_f64(x: f64, bits: usize) -> Self {
        Real { v: BigFloat::from_f64(x, bits), bits }
    }

    pub fn from_i64(x: i64, bits: usize) -> Self {
        Real { v: BigFloat::from_i64(x, bits), bits }
    }

    pub fn from_u64(x: u64, bits: usize) -> Self {
        Real { v: BigFloat::from_u64(x, bits), bits }
    }

    pub fn zero(bits: usize) -> Self {
        Real::from_u64(0, bits)
    }

    pub fn one(bits: usize) -> Self {
        Real::from_u64(1, bits)
    }

    /// `num / den`, rounded once.
    pub fn ratio(num: i64, den: i64, bits: usize) -> Self {
        Real::from_i64(num, bits) / Real::from_i64(den, bits)
    }

    pub fn from_bigint(x: &BigInt, bits: usize) -> Self {
        Real::parse(&x.to_string(), bits).expect("integer literal parses")
    }

    pub fn from_rational(q: &BigRational, bits: usize) -> Self {
        Real::from_bigint(q.numer(), bits) / Real::from_bigint(q.denom(), bits)
    }

    pub fn pi(bits: usize) -> Self {
        Real { v: with_consts(|cc| cc.pi(bits, RM)), bits }
    }

    /// Parses a decimal literal such as `"0.25"`, `"-1.5e-300"` or `"7"`.
    pub fn parse(s: &str, bits: usize) -> Option<Self> {
        let v = with_consts(|cc| BigFloat::parse(s.trim(), Radix::Dec, bits, RM, cc));
        if v.is_nan() {
            None
        } else {
            Some(Real { v, bits })
        }
    }

    pub fn precision(&self) -> usize {
        self.bits
    }

    pub fn with_precision(&self, bits: usize) -> Self {
        let mut v = self.v.clone();
        if !v.is_zero() && v.set_precision(bits, RM).is_err() {
            return Real::nan(bits);
        }
        Real { v, bits }
    }

    fn p2(&self, other: &Real) -> usize {
        self.precision().max(other.precision())
    }

    pub fn is_zero(&self) -> bool {
        self.v.is_zero()
    }

    pub fn is_nan(&self) -> bool {
        self.v.is_nan()
    }

    pub fn is_finite(&self) -> bool {
        !self.v.is_nan() && !self.v.is_inf()
    }

    pub fn is_negative(&self) -> bool {
        !self.is_zero() && self.v.is_negative()
    }

    pub fn is_positive(&self) -> bool {
        !self.is_zero() && self.v.is_positive()
    }

    pub fn abs(&self) -> Self {
        Real { v: self.v.abs(), bits: self.bits }
    }

    pub fn recip(&self) -> Self {
        self.wrap(self.v.reciprocal(self.bits, RM))
    }

    /// Newton iteration for `1/√x` from a double-precision seed, then `x · (1/√x)`.
    pub fn sqrt(&self) -> Self {
        let Some(e) = self.v.exponent().filter(|_| self.is_positive() && self.is_finite()) else {
            return self.sqrt_reference();
        };
        let p = self.bits;
        let w = p + 16;
        let half_e = (e as i64).div_euclid(2);
        let mut m = self.v.clone();
        m.set_exponent((e as i64 - 2 * half_e) as i32);
        let mut y = Real::from_f64(1.0 / self.wrap(m).to_f64().sqrt(), w);
        let ye = y.v.exponent().expect("finite seed") as i64 - half_e;
        y.v.set_exponent(ye as i32);
        let x = self.with_precision(w);
        let three = Real::from_u64(3, w);
        let half = Real::ratio(1, 2, w);
        let mut good_bits = 48;
        while good_bits < w {
            y = &(&y * &(&three - &(&x * &(&y * &y)))) * &half;
            good_bits *= 2;
        }
        (&x * &y).with_precision(p)
    }

    fn sqrt_reference(&self) -> Self {
        self.wrap(self.v.sqrt(self.bits, RM))
    }

    /// Argument reduction by `ln 2` and `2^k`, Taylor series, `k` squarings.
    pub fn exp(&self) -> Self {
        let p = self.bits;
        let xf = self.to_f64();
        if self.is_zero() {
            return Real::one(p);
        }
        if !self.is_finite() || !(xf.abs() < 1e8) {
            return self.exp_reference();
        }
        let n = (xf / std::f64::consts::LN_2).round() as i64;
        let k = ((p as f64).sqrt() * 0.7).clamp(4.0, 32.0) as usize;
        let w = p + k + 24;
        let wr = w + (64 - n.unsigned_abs().leading_zeros()) as usize;
        let ln2 = Real { v: with_consts(|cc| cc.ln_2(wr, RM)), bits: wr };
        let r = (self.with_precision(wr) - ln2 * Real::from_i64(n, wr)).with_precision(w) * Real::from_f64(2f64.powi(-(k as i32)), w);
        let coeffs = inv_factorials(w);
        let log2_r = r.to_f64().abs().log2();
        let mut terms = 1;
        let mut log2_term = 0.0;
        while terms + 1 < coeffs.len() {
            log2_term += log2_r - ((terms + 1) as f64).log2();
            terms += 1;
            if log2_term < -(w as f64) {
                break;
            }
        }
        let mut s = coeffs[terms].clone();
        for c in coeffs[..terms].iter().rev() {
            s = &(&s * &r) + c;
        }
        for _ in 0..k {
            s = &s * &s;
        }
        let e = s.v.exponent().map(|e| e as i64 + n);
        match e {
            Some(e) if e.abs() < (i32::MAX / 2) as i64 => {
                s.v.set_exponent(e as i32);
                s.with_precision(p)
            }
            _ => self.exp_reference(),
        }
    }

    fn exp_reference(&self) -> Self {
        let p = self.precision();
        self.wrap(with_consts(|cc| self.v.exp(p, RM, cc)))
    }

    /// Halley iteration on `exp`, or the `atanh` series when `self` is close to 1.
    pub fn ln(&self) -> Self {
        let p = self.bits;
        if !self.is_positive() || !self.is_finite() {
            return self.ln_reference();
        }
        let w = p + 32;
        let one = Real::one(w);
        let x = self.with_precision(w);
        let d = &x - &one;
        if d.is_zero() {
            return Real::zero(p);
        }
        if d.abs() < Real::from_f64(2f64.powi(-10), w) {
            // ln x = 2 atanh(u), u = (x-1)/(x+1)
            let u = &d / &(&x + &one);
            let u2 = &u * &u;
            let mut sum = u.clone();
            let mut power = u;
            let mut i = 3u64;
            loop {
                power = &power * &u2;
                let term = &power / &Real::from_u64(i, w);
                sum += &term;
                if term.is_zero() || term.abs() < &sum.abs() * &Real::from_f64(2f64.powi(-(w as i32)), w) {
                    break;
                }
                i += 2;
            }
            return (&sum * &Real::from_u64(2, w)).with_precision(p);
        }
        let e = self.v.exponent().unwrap_or(0) as i64;
        let mut mant = self.v.clone();
        mant.set_exponent(0);
        let mut y = Real::from_f64(self.wrap(mant).to_f64().ln() + e as f64 * std::f64::consts::LN_2, w);
        let mut good_bits = 48.0;
        while good_bits < w as f64 {
            let ey = y.exp();
            y = &y + &(&(&Real::from_u64(2, w) * &(&x - &ey)) / &(&x + &ey));
            good_bits *= 3.0;
        }
        y.with_precision(p)
    }

    fn ln_reference(&self) -> Self {
        let p = self.precision();
        self.wrap(with_consts(|cc| self.v.ln(p, RM, cc)))
    }

    pub fn sinh(&self) -> Self {
        let p = self.precision();
        self.wrap(with_consts(|cc| self.v.sinh(p, RM, cc)))
    }

    pub fn cosh(&self) -> Self {
        let p = self.precision();
        self.wrap(with_consts(|cc| self.v.cosh(p, RM, cc)))
    }

    pub fn sin(&self) -> Self {
        let p = self.precision();
        self.wrap(with_consts(|cc| self.v.sin(p, RM, cc)))
    }

    pub fn cos(&self) -> Self {
        let p = self.precision();
        self.wrap(with_consts(|cc| self.v.cos(p, RM, cc)))
    }

    /// `self^e` for a real exponent; `self` must be positive unless `e` is zero.
    pub fn powf(&self, e: &Real) -> Self {
        if e.is_zero() {
            return Real::one(self.precision());
        }
        if self.is_zero() {
            return if e.is_positive() { Real::zero(self.precision()) } else { Real::nan(self.bits) };
        }
        let p = self.p2(e);
        if let Some(n) = small_integer(e) {
            return self.with_precision(p).powi_signed(n);
        }
        // BigFloat::pow does not terminate when the result is exactly representable
        let w = p + 64;
        let x = self.with_precision(w);
        (x.ln() * e.with_precision(w)).exp().with_precision(p)
    }

    pub fn powi(&self, n: u64) -> Self {
        if n == 0 {
            return Real::one(self.precision());
        }
        self.wrap(self.v.powi(n as usize, self.bits, RM))
    }

    /// Integer power with a possibly negative exponent.
    pub fn powi_signed(&self, n: i64) -> Self {
        if n >= 0 {
            self.powi(n as u64)
        } else {
            self.powi(n.unsigned_abs()).recip()
        }
    }

    pub fn max(&self, other: &Real) -> Self {
        if self >= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    pub fn min(&self, other: &Real) -> Self {
        if self <= other {
            self.clone()
        } else {
            other.clone()
        }
    }

    /// Nearest `f64`; saturates to `0.0` / `±inf` outside the double range.
    pub fn to_f64(&self) -> f64 {
        if self.v.is_nan() {
            return f64::NAN;
        }
        if self.v.is_inf() {
            return if self.v.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        if self.is_zero() {
            return 0.0;
        }
        let (words, _, sign, exp, _) = self.v.as_raw_parts().expect("finite value");
        // value = 0.m * 2^exp, most significant word last
        let top = *words.last().expect("nonempty mantissa") as f64;
        let next = if words.len() > 1 { words[words.len() - 2] as f64 } else { 0.0 };
        let mant = (top + next / 18446744073709551616.0) / 18446744073709551616.0;
        let e = exp as i64;
        let mag = if e > 2000 {
            f64::INFINITY
        } else if e < -2000 {
            0.0
        } else {
            mant * 2f64.powi(e as i32)
        };
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    /// Binary exponent `e` with `|self| = 0.m * 2^e`; `None` for zero and non-finite values.
    pub fn binary_exponent(&self) -> Option<i64> {
        if self.is_zero() || !self.is_finite() {
            return None;
        }
        self.v.exponent().map(|e| e as i64)
    }

    /// Natural log as `f64`, valid far outside the double range of `self`.
    pub fn ln_f64(&self) -> f64 {
        if !self.is_positive() {
            return f64::NAN;
        }
        self.ln().to_f64()
    }

    /// Decimal representation with enough digits to round-trip at this precision.
    pub fn to_decimal_string(&self) -> String {
        with_consts(|cc| self.v.format(Radix::Dec, RM, cc)).unwrap_or_else(|_| "NaN".to_string())
    }

    /// Relative difference `|a - b| / max(|a|, |b|)`, zero when both vanish.
    pub fn rel_diff(a: &Real, b: &Real) -> Real {
        let scale = a.abs().max(&b.abs());
        if scale.is_zero() {
            return Real::zero(a.p2(b));
        }
        (a - b).abs() / scale
    }

    pub fn inner(&self) -> &BigFloat {
        &self.v
    }

    pub fn nan(bits: usize) -> Self {
        Real { v: BigFloat::nan(None), bits }
    }

    fn wrap(&self, v: BigFloat) -> Real {
        Real { v, bits: self.bits }
    }
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Real({})", self.to_decimal_string())
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialEq for Real {
    fn eq(&self, other: &Self) -> bool {
        self.v.cmp(&other.v) == Some(0)
    }
}

impl PartialOrd for Real {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.v.cmp(&other.v).map(|c| c.cmp(&0))
    }
}

impl FromStr for Real {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Real::parse(s, FALLBACK_BITS).ok_or_else(|| format!("not a decimal number: {s:?}"))
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_decimal_string())
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        // enough bits to hold every printed digit
        let bits = ((s.len() as f64) * 3.33).ceil() as usize + 64;
        Real::parse(&s, bits.max(128)).ok_or_else(|| serde::de::Error::custom(format!("bad real {s:?}")))
    }
}

impl Real {
    /// Exact decomposition `(M, k)` with `self = M · 2^k` and `M` an integer.
    pub fn to_exact_parts(&self) -> Option<(BigInt, i64)> {
        if self.is_zero() {
            return Some((BigInt::from(0), 0));
        }
        let (words, _, sign, exp, _) = self.v.as_raw_parts()?;
        let digits: Vec<u32> = words.iter().flat_map(|w| [*w as u32, (*w >> 32) as u32]).collect();
        let mag = num_bigint::BigUint::new(digits);
        let m = BigInt::from_biguint(if sign == Sign::Neg { num_bigint::Sign::Minus } else { num_bigint::Sign::Plus }, mag);
        Some((m, exp as i64 - 64 * words.len() as i64))
    }

    /// Inverse of [`Real::to_exact_parts`] at the given precision.
    pub fn from_exact_parts(m: &BigInt, k: i64, bits: usize) -> Option<Real> {
        let (sign, mag) = m.clone().into_parts();
        if mag.bits() == 0 {
            return Some(Real::zero(bits));
        }
        let words: Vec<u64> = mag.to_u64_digits();
        let e = k + 64 * words.len() as i64;
        let e = i32::try_from(e).ok()?;
        let s = if sign == num_bigint::Sign::Minus { Sign::Neg } else { Sign::Pos };
        let mut v = BigFloat::from_words(&words, s, e);
        if v.is_nan() {
            return None;
        }
        if v.precision().unwrap_or(0) < bits && v.set_precision(bits, RM).is_err() {
            return None;
        }
        Some(Real { v, bits })
    }
}

/// Serde adapter storing a [`Real`] exactly as `{significand, exp2, bits}`,
/// the significand an integer in decimal.
pub mod exact {
    use super::Real;
    use num_bigint::BigInt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Parts {
        significand: String,
        exp2: i64,
        bits: usize,
    }

    pub fn serialize<S: Serializer>(x: &Real, s: S) -> Result<S::Ok, S::Error> {
        let (m, k) = x.to_exact_parts().ok_or_else(|| serde::ser::Error::custom("non-finite real"))?;
        Parts { significand: m.to_string(), exp2: k, bits: x.precision() }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Real, D::Error> {
        let p = Parts::deserialize(d)?;
        let m: BigInt = p.significand.parse().map_err(serde::de::Error::custom)?;
        Real::from_exact_parts(&m, p.exp2, p.bits).ok_or_else(|| serde::de::Error::custom("exponent out of range"))
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $inner:ident) => {
        impl<'a, 'b> $tr<&'b Real> for &'a Real {
            type Output = Real;
            fn $m(self, rhs: &'b Real) -> Real {
                let p = self.p2(rhs);
                Real { v: self.v.$inner(&rhs.v, p, RM), bits: p }
            }
        }
        impl $tr<Real> for Real {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                (&self).$m(&rhs)
            }
        }
        impl<'b> $tr<&'b Real> for Real {
            type Output = Real;
            fn $m(self, rhs: &'b Real) -> Real {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Real> for &'a Real {
            type Output = Real;
            fn $m(self, rhs: Real) -> Real {
                self.$m(&rhs)
            }
        }
    };
}

binop!(Add, add, add);
binop!(Sub, sub, sub);
binop!(Mul, mul, mul);
binop!(Div, div, div);

impl AddAssign<&Real> for Real {
    fn add_assign(&mut self, rhs: &Real) {
        *self = &*self + rhs;
    }
}

impl AddAssign<Real> for Real {
    fn add_assign(&mut self, rhs: Real) {
        *self = &*self + &rhs;
    }
}

impl SubAssign<&Real> for Real {
    fn sub_assign(&mut self, rhs: &Real) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&Real> for Real {
    fn mul_assign(&mut self, rhs: &Real) {
        *self = &*self * rhs;
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real { v: -self.v, bits: self.bits }
    }
}

impl Neg for &Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real { v: -self.v.clone(), bits: self.bits }
    }
}

/// Complex number over [`Real`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: Real,
    pub im: Real,
}

impl Complex {
    pub fn new(re: Real, im: Real) -> Self {
        Complex { re, im }
    }

    pub fn zero(bits: usize) -> Self {
        Complex::new(Real::zero(bits), Real::zero(bits))
    }

    pub fn one(bits: usize) -> Self {
        Complex::new(Real::one(bits), Real::zero(bits))
    }

    pub fn from_real(re: Real) -> Self {
        let bits = re.precision();
        Complex::new(re, Real::zero(bits))
    }

    pub fn from_f64(re: f64, im: f64, bits: usize) -> Self {
        Complex::new(Real::from_f64(re, bits), Real::from_f64(im, bits))
    }

    /// `r e^{iθ}`.
    pub fn from_polar(r: &Real, theta: &Real) -> Self {
        Complex::new(r * theta.cos(), r * theta.sin())
    }

    pub fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -&self.im)
    }

    pub fn norm_sqr(&self) -> Real {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn abs(&self) -> Real {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, k: &Real) -> Self {
        Complex::new(&self.re * k, &self.im * k)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn powi(&self, n: u64) -> Self {
        let mut acc = Complex::one(self.re.precision());
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            base = &base * &base;
            k >>= 1;
        }
        acc
    }
}

impl<'b> Add<&'b Complex> for &Complex {
    type Output = Complex;
    fn add(self, rhs: &'b Complex) -> Complex {
        Complex::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl<'b> Sub<&'b Complex> for &Complex {
    type Output = Complex;
    fn sub(self, rhs: &'b Complex) -> Complex {
        Complex::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl<'b> Mul<&'b Complex> for &Complex {
    type Output = Complex;
    fn mul(self, rhs: &'b Complex) -> Complex {
        Complex::new(&self.re * &rhs.re - &self.im * &rhs.im, &self.re * &rhs.im + &self.im * &rhs.re)
    }
}

impl AddAssign<&Complex> for Complex {
    fn add_assign(&mut self, rhs: &Complex) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl Neg for &Complex {
    type Output = Complex;
    fn neg(self) -> Complex {
        Complex::new(-&self.re, -&self.im)
    }
}
