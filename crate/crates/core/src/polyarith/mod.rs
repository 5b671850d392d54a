//! Exact multivariate polynomial and rational-function arithmetic over the
//! strategy parameters of a game.
//!
//! Coefficients are arbitrary-precision rationals. Polynomials are kept in a
//! canonical sparse form (no zero coefficients, no zero exponents) ordered by
//! the graded-lexicographic monomial order, so structural equality is
//! polynomial equality.

mod compiled;
mod monomial;
mod parse;
mod poly;
mod ratfun;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use thiserror::Error;

pub use compiled::CompiledPoly;
pub use monomial::Monomial;
pub use poly::Polynomial;
pub use ratfun::RationalFunction;

/// Exact rational number; always normalised (positive denominator, reduced).
pub type Rational = num_rational::BigRational;

/// Default term-count guard for polynomials produced by enumeration.
pub const DEFAULT_TERM_LIMIT: usize = 100_000;

/// A strategy parameter. Names one agent's probability for one action
/// (possibly tied across several states); the owning model keeps the
/// agent/state/action mapping.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(Arc<str>);

impl ParamId {
    pub fn new(name: impl AsRef<str>) -> Self {
        ParamId(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ParamId {
    fn from(s: &str) -> Self {
        ParamId::new(s)
    }
}

/// An assignment of exact values to parameters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParamValuation {
    assignment: BTreeMap<ParamId, Rational>,
}

impl ParamValuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, p: impl Into<ParamId>, v: Rational) -> Self {
        self.set(p, v);
        self
    }

    pub fn set(&mut self, p: impl Into<ParamId>, v: Rational) {
        self.assignment.insert(p.into(), v);
    }

    pub fn get(&self, p: &ParamId) -> Option<&Rational> {
        self.assignment.get(p)
    }

    pub fn remove(&mut self, p: &ParamId) -> Option<Rational> {
        self.assignment.remove(p)
    }

    pub fn contains(&self, p: &ParamId) -> bool {
        self.assignment.contains_key(p)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Rational)> {
        self.assignment.iter()
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Entries of `other` override entries of `self`.
    pub fn merged(&self, other: &ParamValuation) -> ParamValuation {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k.clone(), v.clone());
        }
        out
    }
}

impl FromIterator<(ParamId, Rational)> for ParamValuation {
    fn from_iter<T: IntoIterator<Item = (ParamId, Rational)>>(iter: T) -> Self {
        ParamValuation {
            assignment: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("missing value for parameter `{0}`")]
    MissingParameter(ParamId),
    #[error("division by zero")]
    DivisionByZero,
    #[error("polynomial has {terms} terms, exceeding the limit of {limit}")]
    TooManyTerms { terms: usize, limit: usize },
    #[error("{pos}: {msg}")]
    Parse { pos: usize, msg: String },
}

/// Parse an exact rational literal: `3`, `-3/4`, `0.3` (taken as 3/10), `1e-3`.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if t.is_empty() {
        return None;
    }
    if let Some((n, d)) = t.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let num: BigInt = digits.parse().ok()?;
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10u32);
    let mut value = Rational::from_integer(num);
    if scale >= 0 {
        value *= Rational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= Rational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -value } else { value })
}

/// Render as `num/den`, omitting the denominator when it is 1.
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational equal to the given finite float.
pub fn rational_from_f64(x: f64) -> Rational {
    Rational::from_float(x).unwrap_or_else(Rational::zero)
}

pub fn rat(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Addition of two polynomials (canonical result).
pub fn poly_add(a: &Polynomial, b: &Polynomial) -> Polynomial {
    a + b
}

pub fn poly_mul(a: &Polynomial, b: &Polynomial) -> Polynomial {
    a * b
}

pub fn poly_eval(p: &Polynomial, v: &ParamValuation) -> Result<Rational, PolyError> {
    p.eval(v)
}

pub fn poly_substitute(p: &Polynomial, bindings: &BTreeMap<ParamId, Polynomial>) -> Polynomial {
    p.substitute(bindings)
}

pub fn rf_simplify(r: &RationalFunction) -> RationalFunction {
    r.simplified()
}

/// Identity test of two rational functions.
///
/// Random rational points drawn from the unit box (deterministic in `seed`)
/// reject quickly; the answer is decided by the canonical form of the
/// cross-multiplied difference.
pub fn rf_equal_on_box(a: &RationalFunction, b: &RationalFunction, samples: usize, seed: u64) -> bool {
    use rand::{Rng, SeedableRng};
    let lhs = a.numer() * b.denom();
    let rhs = b.numer() * a.denom();
    let diff = &lhs - &rhs;
    if diff.is_zero() {
        return true;
    }
    let vars: Vec<ParamId> = diff.params().into_iter().collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples.max(1) {
        let v: ParamValuation = vars
            .iter()
            .map(|p| (p.clone(), rat(rng.random_range(0..=997), 997)))
            .collect();
        if let Ok(x) = diff.eval(&v) {
            if !x.is_zero() {
                return false;
            }
        }
    }
    false
}
