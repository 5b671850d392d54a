//! Formulas: state formulas with coalition probability, reward and
//! responsibility-degree operators over bounded path formulas.

mod parse;

use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::polyarith::{format_rational, Rational};

pub use parse::{parse_formula, parse_path_formula};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LogicError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl CompareOp {
    pub fn holds(self, lhs: &Rational, rhs: &Rational) -> bool {
        match self {
            CompareOp::Le => lhs <= rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Ge => lhs >= rhs,
            CompareOp::Gt => lhs > rhs,
        }
    }

    pub fn holds_f64(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Le => lhs <= rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Ge => lhs >= rhs,
            CompareOp::Gt => lhs > rhs,
        }
    }

    /// True when larger values of the left side make the comparison easier
    /// to satisfy.
    pub fn prefers_large(self) -> bool {
        matches!(self, CompareOp::Ge | CompareOp::Gt)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Le => "<=",
            CompareOp::Lt => "<",
            CompareOp::Ge => ">=",
            CompareOp::Gt => ">",
        }
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DegreeKind {
    Car,
    Cpr,
}

impl fmt::Display for DegreeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DegreeKind::Car => "CAR",
            DegreeKind::Cpr => "CPR",
        })
    }
}

/// Agents are referred to by name; coalitions are kept in declared agent
/// order without duplicates.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StateFormula {
    True,
    Atom(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    Prob {
        coalition: Vec<String>,
        cmp: CompareOp,
        bound: Rational,
        path: PathFormula,
    },
    Reward {
        coalition: Vec<String>,
        cmp: CompareOp,
        bound: Rational,
        agent: String,
        k: u32,
        target: Box<StateFormula>,
    },
    Degree {
        coalition: Vec<String>,
        cmp: CompareOp,
        bound: Rational,
        kind: DegreeKind,
        agent: String,
        plan: String,
        path: PathFormula,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PathFormula {
    Next(Box<StateFormula>),
    Until(Box<StateFormula>, u32, Box<StateFormula>),
}

impl StateFormula {
    pub fn atom(name: &str) -> StateFormula {
        StateFormula::Atom(name.to_string())
    }

    pub fn not(f: StateFormula) -> StateFormula {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> StateFormula {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    /// `a | b`, encoded as `!(!a & !b)`.
    pub fn or(a: StateFormula, b: StateFormula) -> StateFormula {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    pub fn falsum() -> StateFormula {
        Self::not(StateFormula::True)
    }

    /// Whether evaluating this formula needs a probability, reward or
    /// degree computation.
    pub fn is_quantitative(&self) -> bool {
        match self {
            StateFormula::True | StateFormula::Atom(_) => false,
            StateFormula::Not(f) => f.is_quantitative(),
            StateFormula::And(a, b) => a.is_quantitative() || b.is_quantitative(),
            _ => true,
        }
    }
}

impl PathFormula {
    pub fn next(f: StateFormula) -> PathFormula {
        PathFormula::Next(Box::new(f))
    }

    pub fn until(l: StateFormula, k: u32, r: StateFormula) -> PathFormula {
        PathFormula::Until(Box::new(l), k, Box::new(r))
    }

    /// `F<=k f`, i.e. `true U<=k f`.
    pub fn eventually(k: u32, f: StateFormula) -> PathFormula {
        Self::until(StateFormula::True, k, f)
    }
}

/// Number of steps the path formula can inspect.
pub fn horizon(psi: &PathFormula) -> u32 {
    match psi {
        PathFormula::Next(_) => 1,
        PathFormula::Until(_, k, _) => *k,
    }
}

fn write_coalition(f: &mut fmt::Formatter<'_>, c: &[String]) -> fmt::Result {
    write!(f, "<{}>", c.join(","))
}

fn write_operand(f: &mut fmt::Formatter<'_>, s: &StateFormula) -> fmt::Result {
    match s {
        StateFormula::True | StateFormula::Atom(_) | StateFormula::Not(_) => write!(f, "{s}"),
        _ => write!(f, "({s})"),
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("true"),
            StateFormula::Atom(a) => f.write_str(a),
            StateFormula::Not(inner) => {
                if **inner == StateFormula::True {
                    return f.write_str("false");
                }
                f.write_str("!")?;
                write_operand(f, inner)
            }
            StateFormula::And(a, b) => {
                write_operand(f, a)?;
                f.write_str(" & ")?;
                write_operand(f, b)
            }
            StateFormula::Prob {
                coalition,
                cmp,
                bound,
                path,
            } => {
                write_coalition(f, coalition)?;
                write!(f, " P{cmp}{} [ {path} ]", format_rational(bound))
            }
            StateFormula::Reward {
                coalition,
                cmp,
                bound,
                agent,
                k,
                target,
            } => {
                write_coalition(f, coalition)?;
                write!(f, " R{cmp}{} [ F<={k} ", format_rational(bound))?;
                write_operand(f, target)?;
                write!(f, " @ {agent} ]")
            }
            StateFormula::Degree {
                coalition,
                cmp,
                bound,
                kind,
                agent,
                plan,
                path,
            } => {
                write_coalition(f, coalition)?;
                write!(
                    f,
                    " D{cmp}{} [ {kind}({agent}, {plan}, {path}) ]",
                    format_rational(bound)
                )
            }
        }
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(s) => {
                f.write_str("X ")?;
                write_operand(f, s)
            }
            PathFormula::Until(l, k, r) if **l == StateFormula::True => {
                write!(f, "F<={k} ")?;
                write_operand(f, r)
            }
            PathFormula::Until(l, k, r) => {
                write_operand(f, l)?;
                write!(f, " U<={k} ")?;
                write_operand(f, r)
            }
        }
    }
}

/// Bounds of the probability operator must lie in [0,1].
pub(crate) fn valid_probability(p: &Rational) -> bool {
    *p >= Rational::zero() && *p <= Rational::one()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizons() {
        assert_eq!(horizon(&PathFormula::next(StateFormula::True)), 1);
        assert_eq!(horizon(&PathFormula::eventually(2, StateFormula::atom("a"))), 2);
        assert_eq!(
            horizon(&PathFormula::until(StateFormula::atom("a"), 0, StateFormula::atom("b"))),
            0
        );
    }

    #[test]
    fn comparisons() {
        let half = Rational::new(1.into(), 2.into());
        let one = Rational::one();
        assert!(CompareOp::Le.holds(&half, &one));
        assert!(!CompareOp::Gt.holds(&half, &one));
        assert!(CompareOp::Ge.holds(&one, &one));
        assert!(!CompareOp::Lt.holds(&one, &one));
    }
}
