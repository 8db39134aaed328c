//! Exact algebraic converters between log-Laplace asymptotics
//! `ln E e^{-pξ} ∼ -α p^τ (ln p)^β` and small-ball asymptotics
//! `ln P(ξ ≤ ε) ∼ -𝔠 ε^{-ϖ} |ln ε|^{β'}`, with
//! `ϖ = τ/(1-τ)`, `β' = β/(1-τ)` and
//! `𝔠 = ((1-τ)α)^{1/(1-τ)} ϖ^ϖ`.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::Rational64;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{domain, Result};

/// A real exponent kept as an exact rational whenever it is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Exact(Rational64),
    Approx(f64),
}

const MAX_DENOMINATOR: i64 = 1_000_000;

/// The rational with denominator at most `max_den` that rounds to exactly
/// `x`, found among the continued-fraction convergents of `x`.
pub fn exact_rational(x: f64, max_den: i64) -> Option<Rational64> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        let ai = a as i64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        if h2 as f64 / k2 as f64 == x {
            return Some(Rational64::new(h2, k2));
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Nearest rational with denominator at most `max_den`, if it lies within
/// `tol` of `x`.
pub fn snap_rational(x: f64, max_den: i64, tol: f64) -> Option<Rational64> {
    let mut best: Option<(f64, Rational64)> = None;
    for den in 1..=max_den {
        let num = (x * den as f64).round() as i64;
        let r = Rational64::new(num, den);
        let err = (r.to_f64().unwrap_or(f64::NAN) - x).abs();
        if err <= tol && best.is_none_or(|(e, _)| err < e - 1e-15) {
            best = Some((err, r));
        }
    }
    best.map(|(_, r)| r)
}

impl Exponent {
    pub fn from_f64(x: f64) -> Self {
        match exact_rational(x, MAX_DENOMINATOR) {
            Some(r) => Exponent::Exact(r),
            None => Exponent::Approx(x),
        }
    }

    pub fn int(n: i64) -> Self {
        Exponent::Exact(Rational64::from_integer(n))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Exponent::Exact(Rational64::new(n, d))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Exact(r) => *r.numer() as f64 / *r.denom() as f64,
            Exponent::Approx(x) => *x,
        }
    }

    pub fn exact(&self) -> Option<Rational64> {
        match self {
            Exponent::Exact(r) => Some(*r),
            Exponent::Approx(_) => None,
        }
    }

    fn combine(
        self,
        other: Exponent,
        exact: impl Fn(Rational64, Rational64) -> Option<Rational64>,
        approx: impl Fn(f64, f64) -> f64,
    ) -> Exponent {
        if let (Exponent::Exact(a), Exponent::Exact(b)) = (self, other) {
            if let Some(r) = exact(a, b) {
                return Exponent::Exact(r);
            }
        }
        Exponent::Approx(approx(self.to_f64(), other.to_f64()))
    }

    /// The exponent as an integer, when it is an exact integer.
    pub fn as_integer(&self) -> Option<i32> {
        match self {
            Exponent::Exact(r) if r.is_integer() => r.numer().to_i32(),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.to_f64() == 0.0
    }
}

/// `x^e`, by repeated multiplication when `e` is an exact integer.
pub fn pow(x: f64, e: Exponent) -> f64 {
    match e.as_integer() {
        Some(n) => x.powi(n),
        None => x.powf(e.to_f64()),
    }
}

impl Add for Exponent {
    type Output = Exponent;
    fn add(self, other: Exponent) -> Exponent {
        self.combine(other, |a, b| a.checked_add(&b), |a, b| a + b)
    }
}

impl Sub for Exponent {
    type Output = Exponent;
    fn sub(self, other: Exponent) -> Exponent {
        self.combine(other, |a, b| a.checked_sub(&b), |a, b| a - b)
    }
}

impl Mul for Exponent {
    type Output = Exponent;
    fn mul(self, other: Exponent) -> Exponent {
        self.combine(other, |a, b| a.checked_mul(&b), |a, b| a * b)
    }
}

impl Div for Exponent {
    type Output = Exponent;
    fn div(self, other: Exponent) -> Exponent {
        self.combine(
            other,
            |a, b| if b.is_zero() { None } else { a.checked_div(&b) },
            |a, b| a / b,
        )
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Exact(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Exponent::Exact(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Exponent::Approx(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Exact(_) => s.serialize_str(&self.to_string()),
            Exponent::Approx(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Exponent::Approx(x)),
            Raw::Text(t) => parse_rational(&t)
                .map(Exponent::Exact)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid rational '{t}'"))),
        }
    }
}

fn parse_rational(t: &str) -> Option<Rational64> {
    let t = t.trim();
    match t.split_once('/') {
        Some((n, d)) => {
            let n: i64 = n.trim().parse().ok()?;
            let d: i64 = d.trim().parse().ok()?;
            (d != 0).then(|| Rational64::new(n, d))
        }
        None => t.parse::<i64>().ok().map(Rational64::from_integer),
    }
}

/// `ln E e^{-pξ} ∼ -α p^τ (ln p)^β` as `p → ∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLaplaceAsymptotic {
    pub alpha: f64,
    pub tau: Exponent,
    pub beta: Exponent,
}

/// `ln P(ξ ≤ ε) ∼ -𝔠 ε^{-ϖ} |ln ε|^{β'}` as `ε → 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallAsymptotic {
    pub constant: f64,
    pub rate: Exponent,
    pub log_power: Exponent,
}

impl LogLaplaceAsymptotic {
    pub fn new(alpha: f64, tau: Exponent, beta: Exponent) -> Result<Self> {
        let a = Self { alpha, tau, beta };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.tau.to_f64();
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return domain(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(t > 0.0 && t < 1.0) {
            return domain(format!("tau must lie in (0, 1), got {t}"));
        }
        if !(self.beta.to_f64() >= 0.0) {
            return domain(format!("beta must be non-negative, got {}", self.beta));
        }
        Ok(())
    }

    /// `-α p^τ (ln p)^β`.
    pub fn evaluate(&self, p: f64) -> f64 {
        let base = -self.alpha * p.powf(self.tau.to_f64());
        if self.beta.is_zero() {
            base
        } else {
            base * pow(p.ln(), self.beta)
        }
    }
}

impl SmallBallAsymptotic {
    pub fn validate(&self) -> Result<()> {
        if !(self.constant > 0.0 && self.constant.is_finite()) {
            return domain(format!("small-ball constant must be positive, got {}", self.constant));
        }
        if !(self.rate.to_f64() > 0.0) {
            return domain(format!("small-ball rate must be positive, got {}", self.rate));
        }
        if !(self.log_power.to_f64() >= 0.0) {
            return domain(format!("log power must be non-negative, got {}", self.log_power));
        }
        Ok(())
    }

    /// `-𝔠 ε^{-ϖ} |ln ε|^{β'}`.
    pub fn evaluate(&self, eps: f64) -> f64 {
        let base = -self.constant * eps.powf(-self.rate.to_f64());
        if self.log_power.is_zero() {
            base
        } else {
            base * pow(eps.ln().abs(), self.log_power)
        }
    }
}

/// Convert a log-Laplace asymptotic into the equivalent small-ball asymptotic.
pub fn small_ball_from_laplace(a: &LogLaplaceAsymptotic) -> Result<SmallBallAsymptotic> {
    a.validate()?;
    let one = Exponent::int(1);
    let one_minus_tau = one.sub(a.tau);
    let rate = a.tau.div(one_minus_tau);
    let log_power = a.beta.div(one_minus_tau);
    let inv = one.div(one_minus_tau);
    let constant = pow(one_minus_tau.to_f64() * a.alpha, inv) * pow(rate.to_f64(), rate);
    Ok(SmallBallAsymptotic {
        constant,
        rate,
        log_power,
    })
}

/// Exact inverse of [`small_ball_from_laplace`].
pub fn laplace_from_small_ball(s: &SmallBallAsymptotic) -> Result<LogLaplaceAsymptotic> {
    s.validate()?;
    let one = Exponent::int(1);
    let tau = s.rate.div(one.add(s.rate));
    let one_minus_tau = one.sub(tau);
    let beta = s.log_power.mul(one_minus_tau);
    let w = s.rate.to_f64();
    let scaled = s.constant / pow(w, s.rate);
    let alpha = pow(scaled, one_minus_tau) / one_minus_tau.to_f64();
    LogLaplaceAsymptotic::new(alpha, tau, beta)
}

pub fn rational_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}
