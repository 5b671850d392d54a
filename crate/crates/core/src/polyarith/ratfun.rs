use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use super::{ParamValuation, PolyError, Polynomial, Rational};

/// Ratio of two polynomials. The denominator is never the zero polynomial
/// and its leading coefficient is positive.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RationalFunction {
    num: Polynomial,
    den: Polynomial,
}

impl RationalFunction {
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self, PolyError> {
        if den.is_zero() {
            return Err(PolyError::DivisionByZero);
        }
        let flip = den.leading().is_some_and(|(_, c)| c.is_negative());
        Ok(if flip {
            RationalFunction { num: -num, den: -den }
        } else {
            RationalFunction { num, den }
        })
    }

    pub fn zero() -> Self {
        Polynomial::zero().into()
    }

    pub fn one() -> Self {
        Polynomial::one().into()
    }

    pub fn constant(c: Rational) -> Self {
        Polynomial::constant(c).into()
    }

    pub fn numer(&self) -> &Polynomial {
        &self.num
    }

    pub fn denom(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.as_constant().is_some()
    }

    /// Constant value if numerator and denominator are proportional.
    pub fn as_constant(&self) -> Option<Rational> {
        self.num.ratio_to(&self.den)
    }

    /// Remove rational content from numerator and denominator, collapse
    /// proportional pairs to constants and constant denominators into the
    /// numerator.
    pub fn simplified(&self) -> RationalFunction {
        if self.num.is_zero() {
            return RationalFunction::zero();
        }
        if let Some(c) = self.as_constant() {
            return RationalFunction::constant(c);
        }
        if let Some(d) = self.den.as_constant() {
            return RationalFunction {
                num: self.num.scale(&d.recip()),
                den: Polynomial::one(),
            };
        }
        let cd = self.den.content().recip();
        RationalFunction {
            num: self.num.scale(&cd),
            den: self.den.scale(&cd),
        }
    }

    pub fn eval(&self, v: &ParamValuation) -> Result<Rational, PolyError> {
        let d = self.den.eval(v)?;
        if d.is_zero() {
            return Err(PolyError::DivisionByZero);
        }
        Ok(self.num.eval(v)? / d)
    }

    pub fn partial_eval(&self, v: &ParamValuation) -> Result<RationalFunction, PolyError> {
        RationalFunction::new(self.num.partial_eval(v), self.den.partial_eval(v)).map(|r| r.simplified())
    }

    pub fn substitute(
        &self,
        bindings: &std::collections::BTreeMap<super::ParamId, Polynomial>,
    ) -> Result<RationalFunction, PolyError> {
        RationalFunction::new(self.num.substitute(bindings), self.den.substitute(bindings))
    }

    pub fn scale(&self, c: &Rational) -> RationalFunction {
        RationalFunction {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn checked_div(&self, other: &RationalFunction) -> Result<RationalFunction, PolyError> {
        RationalFunction::new(&self.num * &other.den, &self.den * &other.num)
    }

    pub fn params(&self) -> std::collections::BTreeSet<super::ParamId> {
        let mut ps = self.num.params();
        ps.extend(self.den.params());
        ps
    }

    pub fn parse(text: &str) -> Result<RationalFunction, PolyError> {
        super::parse::parse_rational_function(text)
    }

    fn combine(&self, other: &RationalFunction, sign: bool) -> RationalFunction {
        if self.den == other.den {
            let num = if sign {
                &self.num + &other.num
            } else {
                &self.num - &other.num
            };
            return RationalFunction {
                num,
                den: self.den.clone(),
            };
        }
        let a = &self.num * &other.den;
        let b = &other.num * &self.den;
        let num = if sign { &a + &b } else { &a - &b };
        RationalFunction {
            num,
            den: &self.den * &other.den,
        }
    }
}

impl From<Polynomial> for RationalFunction {
    fn from(p: Polynomial) -> Self {
        RationalFunction {
            num: p,
            den: Polynomial::one(),
        }
    }
}

impl<'a> Add<&'a RationalFunction> for &'a RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &'a RationalFunction) -> RationalFunction {
        self.combine(rhs, true)
    }
}

impl<'a> Sub<&'a RationalFunction> for &'a RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &'a RationalFunction) -> RationalFunction {
        self.combine(rhs, false)
    }
}

impl<'a> Mul<&'a RationalFunction> for &'a RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &'a RationalFunction) -> RationalFunction {
        RationalFunction {
            num: &self.num * &rhs.num,
            den: &self.den * &rhs.den,
        }
    }
}

impl Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &Polynomial| {
            if p.num_terms() == 1
                && p.terms()
                    .next()
                    .is_some_and(|(_, c)| !c.is_negative() && c.denom().is_one())
            {
                p.to_string()
            } else {
                format!("({p})")
            }
        };
        write!(f, "{}/{}", wrap(&self.num), wrap(&self.den))
    }
}

impl fmt::Debug for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RationalFunction({self})")
    }
}

impl Zero for RationalFunction {
    fn zero() -> Self {
        RationalFunction::zero()
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

impl Add for RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: RationalFunction) -> RationalFunction {
        &self + &rhs
    }
}

impl One for RationalFunction {
    fn one() -> Self {
        RationalFunction::one()
    }
}

impl Mul for RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: RationalFunction) -> RationalFunction {
        &self * &rhs
    }
}
