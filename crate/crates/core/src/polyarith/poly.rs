use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use super::{format_rational, Monomial, ParamId, ParamValuation, PolyError, Rational};

/// Sparse multivariate polynomial with exact rational coefficients.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, Rational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Polynomial::term(c, Monomial::one())
    }

    pub fn var(p: impl Into<ParamId>) -> Self {
        Polynomial::term(Rational::one(), Monomial::var(p.into()))
    }

    pub fn term(c: Rational, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Polynomial { terms }
    }

    /// `1 - p`, handy for eliminated simplex parameters.
    pub fn one_minus(p: &Polynomial) -> Self {
        &Polynomial::one() - p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.as_constant().is_some_and(|c| c.is_one())
    }

    /// The value if this polynomial is constant (zero included).
    pub fn as_constant(&self) -> Option<Rational> {
        match self.terms.len() {
            0 => Some(Rational::zero()),
            1 => {
                let (m, c) = self.terms.iter().next()?;
                m.is_one().then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Leading term under the graded-lexicographic order.
    pub fn leading(&self) -> Option<(&Monomial, &Rational)> {
        self.terms.iter().next_back()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn params(&self) -> BTreeSet<ParamId> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|(p, _)| p.clone()))
            .collect()
    }

    pub fn ensure_within(&self, limit: usize) -> Result<(), PolyError> {
        if self.terms.len() > limit {
            Err(PolyError::TooManyTerms {
                terms: self.terms.len(),
                limit,
            })
        } else {
            Ok(())
        }
    }

    fn add_term(&mut self, m: Monomial, c: Rational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, k)| (m.clone(), k * c)).collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut out = Polynomial::one();
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                out = &out * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        out
    }

    /// Exact evaluation; every parameter that occurs must be assigned.
    pub fn eval(&self, v: &ParamValuation) -> Result<Rational, PolyError> {
        let mut total = Rational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (p, e) in m.factors() {
                let x = v.get(p).ok_or_else(|| PolyError::MissingParameter(p.clone()))?;
                t *= num_traits::pow(x.clone(), *e as usize);
            }
            total += t;
        }
        Ok(total)
    }

    /// Substitute the assigned parameters by their values, leaving the others
    /// symbolic.
    pub fn partial_eval(&self, v: &ParamValuation) -> Polynomial {
        let bindings: BTreeMap<ParamId, Polynomial> = self
            .params()
            .into_iter()
            .filter_map(|p| v.get(&p).map(|x| (p.clone(), Polynomial::constant(x.clone()))))
            .collect();
        self.substitute(&bindings)
    }

    /// Simultaneous substitution of parameters by polynomials.
    pub fn substitute(&self, bindings: &BTreeMap<ParamId, Polynomial>) -> Polynomial {
        if bindings.is_empty() {
            return self.clone();
        }
        let mut powers: BTreeMap<(ParamId, u32), Polynomial> = BTreeMap::new();
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut kept = Vec::new();
            let mut acc = Polynomial::constant(c.clone());
            for (p, e) in m.factors() {
                match bindings.get(p) {
                    Some(b) => {
                        let pw = powers.entry((p.clone(), *e)).or_insert_with(|| b.pow(*e)).clone();
                        acc = &acc * &pw;
                    }
                    None => kept.push((p.clone(), *e)),
                }
            }
            if acc.is_zero() {
                continue;
            }
            let rest = Monomial::from_factors(kept);
            for (m2, c2) in acc.terms {
                out.add_term(m2.mul(&rest), c2);
            }
        }
        out
    }

    pub fn derivative(&self, p: &ParamId) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let (e, rest) = m.split_off(p);
            if e == 0 {
                continue;
            }
            let lowered = if e > 1 {
                rest.mul(&Monomial::from_factors([(p.clone(), e - 1)]))
            } else {
                rest
            };
            out.add_term(lowered, c * Rational::from_integer(e.into()));
        }
        out
    }

    /// Rational content: positive `c` with `self / c` having coprime integer
    /// coefficients. Zero for the zero polynomial.
    pub fn content(&self) -> Rational {
        use num_integer::Integer;
        let mut num_gcd = num_bigint::BigInt::zero();
        let mut den_lcm = num_bigint::BigInt::one();
        for c in self.terms.values() {
            num_gcd = num_gcd.gcd(c.numer());
            den_lcm = den_lcm.lcm(c.denom());
        }
        if num_gcd.is_zero() {
            return Rational::zero();
        }
        Rational::new(num_gcd.abs(), den_lcm)
    }

    /// If `self = c * other` for a rational `c`, return `c`.
    pub fn ratio_to(&self, other: &Polynomial) -> Option<Rational> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Rational::zero());
        }
        if self.terms.len() != other.terms.len() {
            return None;
        }
        let (m0, c0) = self.leading()?;
        let (n0, d0) = other.leading()?;
        if m0 != n0 {
            return None;
        }
        let ratio = c0 / d0;
        let same = self
            .terms
            .iter()
            .zip(other.terms.iter())
            .all(|((m, a), (n, b))| m == n && *a == b * &ratio);
        same.then_some(ratio)
    }

    pub fn parse(text: &str) -> Result<Polynomial, PolyError> {
        super::parse::parse_polynomial(text)
    }
}

impl<'a> Add<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &'a Polynomial) -> Polynomial {
        let (big, small) = if self.terms.len() >= rhs.terms.len() {
            (self, rhs)
        } else {
            (rhs, self)
        };
        let mut out = big.clone();
        for (m, c) in &small.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<'a> Sub<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &'a Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl<'a> Mul<&'a Polynomial> for &'a Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &'a Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            for (n, d) in &rhs.terms {
                out.add_term(m.mul(n), c * d);
            }
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: Polynomial) -> Polynomial {
        &self + &rhs
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: Polynomial) -> Polynomial {
        &self - &rhs
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: Polynomial) -> Polynomial {
        &self * &rhs
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

impl std::iter::Sum for Polynomial {
    fn sum<I: Iterator<Item = Polynomial>>(iter: I) -> Polynomial {
        let mut out = Polynomial::zero();
        for p in iter {
            for (m, c) in p.terms {
                out.add_term(m, c);
            }
        }
        out
    }
}

impl std::iter::Product for Polynomial {
    fn product<I: Iterator<Item = Polynomial>>(iter: I) -> Polynomial {
        iter.fold(Polynomial::one(), |acc, p| &acc * &p)
    }
}

impl From<Rational> for Polynomial {
    fn from(c: Rational) -> Self {
        Polynomial::constant(c)
    }
}

// Terms in descending monomial order, e.g. `x1^2 - 3/2*x1*x2 + 1`.
impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if k == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            let mag = c.abs();
            if m.is_one() {
                f.write_str(&format_rational(&mag))?;
            } else if mag.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{}*{m}", format_rational(&mag))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyarith::{int, rat};

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    #[test]
    fn addition_cancels_like_terms() {
        assert_eq!(&p("x1 + 1") + &p("x1 - 1"), p("2*x1"));
        let q = p("3*x1*x2 - x2^2 + 7");
        assert_eq!(&q + &Polynomial::zero(), q);
        // x1·x2 + x1·(1−x2) = x1
        assert_eq!(&p("x1*x2") + &p("x1*(1 - x2)"), p("x1"));
    }

    #[test]
    fn multiplication_expands() {
        assert_eq!(&p("1 - x1") * &p("1 - x2"), p("1 - x1 - x2 + x1*x2"));
        let q = p("x1^2 + 2/3*x2");
        assert_eq!(&q * &Polynomial::one(), q);
        assert!((&q * &Polynomial::zero()).is_zero());
    }

    #[test]
    fn evaluation() {
        let v = ParamValuation::new().with("x1", rat(1, 2)).with("x2", rat(1, 3));
        assert_eq!(p("x1*x2").eval(&v).unwrap(), rat(1, 6));
        let v = ParamValuation::new().with("x", rat(1, 2));
        assert_eq!(p("1 - x + x^2").eval(&v).unwrap(), rat(3, 4));
        let err = p("x1*x3").eval(&ParamValuation::new().with("x1", int(1))).unwrap_err();
        assert_eq!(err, PolyError::MissingParameter(ParamId::new("x3")));
    }

    #[test]
    fn evaluation_near_irrational_root() {
        use crate::polyarith::rational_to_f64;
        let q = p("2*x^2 + x - 2");
        let v = ParamValuation::new().with("x", rat(780_776_406, 1_000_000_000));
        assert!(rational_to_f64(&q.eval(&v).unwrap()).abs() < 1e-6);
        // 7655/9806 is only a three-digit approximation of the root
        let v = ParamValuation::new().with("x", rat(7655, 9806));
        let coarse = rational_to_f64(&q.eval(&v).unwrap());
        assert!(coarse.abs() < 1e-3 && coarse.abs() > 1e-6);
    }

    #[test]
    fn substitution() {
        let mut b = BTreeMap::new();
        b.insert(ParamId::new("x2"), p("1 - x1"));
        assert_eq!(p("x1 + x2").substitute(&b), Polynomial::one());
        let q = p("x1*x2");
        assert_eq!(q.substitute(&BTreeMap::new()), q);
        let mut z = BTreeMap::new();
        z.insert(ParamId::new("x1"), Polynomial::zero());
        assert!(q.substitute(&z).is_zero());
        // simultaneous, not sequential
        let mut swap = BTreeMap::new();
        swap.insert(ParamId::new("a"), p("b"));
        swap.insert(ParamId::new("b"), p("a"));
        assert_eq!(p("a^2 + b").substitute(&swap), p("b^2 + a"));
    }

    #[test]
    fn derivative_and_content() {
        assert_eq!(p("2*x^2 + x - 2").derivative(&"x".into()), p("4*x + 1"));
        assert_eq!(p("x*y^3").derivative(&"y".into()), p("3*x*y^2"));
        assert!(p("y").derivative(&"x".into()).is_zero());
        assert_eq!(p("4/3*x + 2/9").content(), rat(2, 9));
        assert_eq!(p("2*x + 2").ratio_to(&p("x + 1")), Some(int(2)));
        assert_eq!(p("2*x + 3").ratio_to(&p("x + 1")), None);
    }

    #[test]
    fn renders_in_descending_order() {
        assert_eq!(p("1 - x1 - x2 + x1*x2").to_string(), "x1*x2 - x1 - x2 + 1");
        assert_eq!(p("-3/2*x^2 + 1/2").to_string(), "-3/2*x^2 + 1/2");
        assert_eq!(Polynomial::zero().to_string(), "0");
        let q = p("x1^3*x2 - 5/7*x2^2 + x1 - 4");
        assert_eq!(p(&q.to_string()), q);
    }

    #[test]
    fn term_limit_guard() {
        let q = p("x1 + x2 + x3");
        assert!(q.ensure_within(3).is_ok());
        assert!(matches!(
            q.ensure_within(2),
            Err(PolyError::TooManyTerms { terms: 3, limit: 2 })
        ));
    }
}
