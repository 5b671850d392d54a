//! Recursive evaluation of formulas over a parametric model.
//!
//! Symbolic mode keeps every answer as a rational function of the strategy
//! parameters. Evaluated mode fixes a valuation; coalition parameters of
//! probability and reward operators are then searched for a witness.

mod degree;
mod search;

use std::fmt;

use num_traits::Zero;
use thiserror::Error;

use crate::logic::{CompareOp, PathFormula, StateFormula};
use crate::model::{AgentId, ModelError, Plan, Psmas, StateId};
use crate::polyarith::{
    format_rational, ParamId, ParamValuation, PolyError, Polynomial, Rational, RationalFunction, DEFAULT_TERM_LIMIT,
};
use crate::trace::{decided_histories, TraceError, Verdict, DEFAULT_PATH_LIMIT};

pub use degree::{car_degree, cpr_degree, degree, eval_ratio, DegreeResult};
pub(crate) use search::lattice;
pub use search::{coalition_params, MAX_SEARCH_DIM};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("degenerate query: {0}")]
    Degenerate(String),
    #[error("a valuation is required: {0}")]
    NeedsValuation(String),
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("inadmissible valuation: {0}")]
    Inadmissible(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    Symbolic,
    Evaluated(ParamValuation),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryContext {
    pub mode: Mode,
    pub path_limit: usize,
    pub term_limit: usize,
}

impl QueryContext {
    pub fn symbolic() -> Self {
        QueryContext {
            mode: Mode::Symbolic,
            path_limit: DEFAULT_PATH_LIMIT,
            term_limit: DEFAULT_TERM_LIMIT,
        }
    }

    pub fn evaluated(v: ParamValuation) -> Self {
        QueryContext {
            mode: Mode::Evaluated(v),
            ..Self::symbolic()
        }
    }

    pub fn valuation(&self) -> Option<&ParamValuation> {
        match &self.mode {
            Mode::Symbolic => None,
            Mode::Evaluated(v) => Some(v),
        }
    }

    fn check_poly(&self, p: &Polynomial) -> Result<(), CheckError> {
        p.ensure_within(self.term_limit).map_err(CheckError::from)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExtendedValue {
    Finite(RationalFunction),
    Infinite,
}

impl fmt::Display for ExtendedValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(r) => write!(f, "{r}"),
            ExtendedValue::Infinite => f.write_str("inf"),
        }
    }
}

/// An undecided condition on the parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    Const(bool),
    Constraint {
        value: RationalFunction,
        cmp: CompareOp,
        bound: Rational,
    },
    Not(Box<Region>),
    And(Box<Region>, Box<Region>),
}

impl Region {
    fn constraint(value: RationalFunction, cmp: CompareOp, bound: Rational) -> Region {
        match value.as_constant() {
            Some(c) => Region::Const(cmp.holds(&c, &bound)),
            None => Region::Constraint { value, cmp, bound },
        }
    }

    fn negate(self) -> Region {
        match self {
            Region::Const(b) => Region::Const(!b),
            Region::Not(r) => *r,
            r => Region::Not(Box::new(r)),
        }
    }

    fn conj(a: Region, b: Region) -> Region {
        match (a, b) {
            (Region::Const(false), _) | (_, Region::Const(false)) => Region::Const(false),
            (Region::Const(true), r) | (r, Region::Const(true)) => r,
            (a, b) => Region::And(Box::new(a), Box::new(b)),
        }
    }

    /// Decide the region at a valuation of every parameter it mentions.
    pub fn eval(&self, v: &ParamValuation) -> Result<bool, CheckError> {
        Ok(match self {
            Region::Const(b) => *b,
            Region::Constraint { value, cmp, bound } => cmp.holds(&eval_ratio(value.numer(), value.denom(), v)?, bound),
            Region::Not(r) => !r.eval(v)?,
            Region::And(a, b) => a.eval(v)? && b.eval(v)?,
        })
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Const(b) => write!(f, "{b}"),
            Region::Constraint { value, cmp, bound } => write!(f, "{value} {cmp} {}", format_rational(bound)),
            Region::Not(r) => write!(f, "!({r})"),
            Region::And(a, b) => write!(f, "({a}) & ({b})"),
        }
    }
}

/// Result of checking a state formula at one state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Decided {
        holds: bool,
        /// Coalition parameter values found for a top-level probability or
        /// reward operator.
        witness: Option<ParamValuation>,
    },
    Region(Region),
}

fn agent_ids(m: &Psmas, names: &[String]) -> Result<Vec<AgentId>, CheckError> {
    names
        .iter()
        .map(|n| m.csg().agent_id(n).map_err(CheckError::from))
        .collect()
}

fn require_admissible(m: &Psmas, ctx: &QueryContext) -> Result<(), CheckError> {
    if let Some(v) = ctx.valuation() {
        let r = m.check_admissible_partial(v);
        if let Some(first) = r.violations.first() {
            return Err(CheckError::Inadmissible(first.to_string()));
        }
    }
    Ok(())
}

/// States satisfying `phi`. Quantitative subformulas need Evaluated mode.
pub fn sat(m: &Psmas, phi: &StateFormula, ctx: &QueryContext) -> Result<Vec<bool>, CheckError> {
    let n = m.csg().states().len();
    Ok(match phi {
        StateFormula::True => vec![true; n],
        StateFormula::Atom(a) => (0..n).map(|s| m.csg().labels(s).contains(a)).collect(),
        StateFormula::Not(f) => sat(m, f, ctx)?.into_iter().map(|b| !b).collect(),
        StateFormula::And(a, b) => {
            let (x, y) = (sat(m, a, ctx)?, sat(m, b, ctx)?);
            x.into_iter().zip(y).map(|(p, q)| p && q).collect()
        }
        quant => {
            if ctx.valuation().is_none() {
                return Err(CheckError::NeedsValuation(format!(
                    "nested operator `{quant}` can only be decided at a valuation"
                )));
            }
            let mut out = Vec::with_capacity(n);
            for s in 0..n {
                match check(m, s, quant, ctx)? {
                    Outcome::Decided { holds, .. } => out.push(holds),
                    Outcome::Region(_) => unreachable!("evaluated mode decides"),
                }
            }
            out
        }
    })
}

/// Per-step classifier of a bounded path formula.
pub struct PathClassifier {
    kind: PathKind,
}

enum PathKind {
    Next(Vec<bool>),
    Until(Vec<bool>, usize, Vec<bool>),
}

impl PathClassifier {
    pub fn new(m: &Psmas, psi: &PathFormula, ctx: &QueryContext) -> Result<Self, CheckError> {
        let kind = match psi {
            PathFormula::Next(f) => PathKind::Next(sat(m, f, ctx)?),
            PathFormula::Until(l, k, r) => PathKind::Until(sat(m, l, ctx)?, *k as usize, sat(m, r, ctx)?),
        };
        Ok(PathClassifier { kind })
    }

    pub fn horizon(&self) -> usize {
        match &self.kind {
            PathKind::Next(_) => 1,
            PathKind::Until(_, k, _) => *k,
        }
    }

    pub fn classify(&self, step: usize, s: StateId) -> Verdict {
        match &self.kind {
            PathKind::Next(target) => {
                if step == 0 {
                    Verdict::Open
                } else if target[s] {
                    Verdict::Satisfied
                } else {
                    Verdict::Violated
                }
            }
            PathKind::Until(left, k, right) => {
                if right[s] {
                    Verdict::Satisfied
                } else if !left[s] || step >= *k {
                    Verdict::Violated
                } else {
                    Verdict::Open
                }
            }
        }
    }

    /// Verdict of a complete state sequence.
    pub fn classify_run(&self, states: &[StateId]) -> bool {
        for (j, s) in states.iter().enumerate() {
            match self.classify(j, *s) {
                Verdict::Satisfied => return true,
                Verdict::Violated => return false,
                Verdict::Open => {}
            }
        }
        false
    }
}

/// Probability of the histories from `s` satisfying `psi`, summed over
/// minimal satisfying prefixes.
pub fn path_sat_prob(
    m: &Psmas,
    s: StateId,
    psi: &PathFormula,
    ctx: &QueryContext,
) -> Result<RationalFunction, CheckError> {
    let (sat_p, _) = path_probs(m, s, psi, ctx)?;
    Ok(sat_p.into())
}

/// (satisfying, violating) probability polynomials.
fn path_probs(
    m: &Psmas,
    s: StateId,
    psi: &PathFormula,
    ctx: &QueryContext,
) -> Result<(Polynomial, Polynomial), CheckError> {
    let cl = PathClassifier::new(m, psi, ctx)?;
    let hs = decided_histories(
        m,
        s,
        cl.horizon(),
        &|_, _| true,
        &|j, st| cl.classify(j, st),
        ctx.path_limit,
    )?;
    let mut yes = Polynomial::zero();
    let mut no = Polynomial::zero();
    for (h, v) in hs {
        if v {
            yes = &yes + &h.prob;
        } else {
            no = &no + &h.prob;
        }
    }
    ctx.check_poly(&yes)?;
    Ok((yes, no))
}

/// Expected reward accumulated until `target` first holds within `k` steps,
/// or `Infinite` when the target may be missed.
pub fn reward_value(
    m: &Psmas,
    s: StateId,
    agent: AgentId,
    target: &StateFormula,
    k: u32,
    ctx: &QueryContext,
) -> Result<ExtendedValue, CheckError> {
    let (value, missed) = reward_parts(m, s, agent, target, k, ctx)?;
    let infinite = match ctx.valuation() {
        None => !missed.is_zero(),
        Some(v) => missed.eval(v)? > Rational::zero(),
    };
    Ok(if infinite {
        ExtendedValue::Infinite
    } else {
        ExtendedValue::Finite(value.into())
    })
}

/// (expected reward over reaching prefixes, probability of missing).
pub fn reward_parts(
    m: &Psmas,
    s: StateId,
    agent: AgentId,
    target: &StateFormula,
    k: u32,
    ctx: &QueryContext,
) -> Result<(Polynomial, Polynomial), CheckError> {
    let cl = PathClassifier::new(m, &PathFormula::eventually(k, target.clone()), ctx)?;
    let r = m.csg().reward(agent);
    let hs = decided_histories(
        m,
        s,
        k as usize,
        &|_, _| true,
        &|j, st| cl.classify(j, st),
        ctx.path_limit,
    )?;
    let mut value = Polynomial::zero();
    let mut missed = Polynomial::zero();
    for (h, reached) in hs {
        if reached {
            let acc: Rational = h
                .actions
                .iter()
                .zip(&h.states)
                .map(|(a, st)| r.action(a) + r.state(*st))
                .sum();
            if !acc.is_zero() {
                value = &value + &h.prob.scale(&acc);
            }
        } else {
            missed = &missed + &h.prob;
        }
    }
    ctx.check_poly(&value)?;
    Ok((value, missed))
}

/// Decide `<coalition> P cmp bound [ psi ]` at `s`.
pub fn check_prob(
    m: &Psmas,
    s: StateId,
    coalition: &[AgentId],
    cmp: CompareOp,
    bound: &Rational,
    psi: &PathFormula,
    ctx: &QueryContext,
) -> Result<Outcome, CheckError> {
    let (p, _) = path_probs(m, s, psi, ctx)?;
    match ctx.valuation() {
        None => Ok(Outcome::Region(Region::constraint(p.into(), cmp, bound.clone()))),
        Some(v) => {
            let missed = Polynomial::zero();
            search::exists(m, coalition, &p, &missed, cmp, bound, v)
        }
    }
}

fn check_reward(
    m: &Psmas,
    s: StateId,
    coalition: &[AgentId],
    cmp: CompareOp,
    bound: &Rational,
    agent: AgentId,
    target: &StateFormula,
    k: u32,
    ctx: &QueryContext,
) -> Result<Outcome, CheckError> {
    let (value, missed) = reward_parts(m, s, agent, target, k, ctx)?;
    match ctx.valuation() {
        None => {
            let region = if missed.is_zero() {
                Region::constraint(value.into(), cmp, bound.clone())
            } else if missed.as_constant().is_some() {
                Region::Const(cmp.prefers_large())
            } else {
                return Err(CheckError::NeedsValuation(
                    "whether the reward is infinite depends on the parameters".into(),
                ));
            };
            Ok(Outcome::Region(region))
        }
        Some(v) => search::exists(m, coalition, &value, &missed, cmp, bound, v),
    }
}

/// Check a state formula at one state.
pub fn check(m: &Psmas, s: StateId, phi: &StateFormula, ctx: &QueryContext) -> Result<Outcome, CheckError> {
    require_admissible(m, ctx)?;
    let decided = |holds| Outcome::Decided { holds, witness: None };
    match phi {
        StateFormula::True | StateFormula::Atom(_) => Ok(decided(sat(m, phi, ctx)?[s])),
        StateFormula::Not(f) => Ok(match check(m, s, f, ctx)? {
            Outcome::Decided { holds, .. } => decided(!holds),
            Outcome::Region(r) => Outcome::Region(r.negate()),
        }),
        StateFormula::And(a, b) => {
            let (x, y) = (check(m, s, a, ctx)?, check(m, s, b, ctx)?);
            Ok(match (x, y) {
                (Outcome::Decided { holds: p, .. }, Outcome::Decided { holds: q, .. }) => decided(p && q),
                (x, y) => Outcome::Region(Region::conj(to_region(x), to_region(y))),
            })
        }
        StateFormula::Prob {
            coalition,
            cmp,
            bound,
            path,
        } => check_prob(m, s, &agent_ids(m, coalition)?, *cmp, bound, path, ctx),
        StateFormula::Reward {
            coalition,
            cmp,
            bound,
            agent,
            k,
            target,
        } => {
            let agent = m.csg().agent_id(agent)?;
            check_reward(m, s, &agent_ids(m, coalition)?, *cmp, bound, agent, target, *k, ctx)
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
            let agent = m.csg().agent_id(agent)?;
            let base = m.csg().plan(plan)?;
            let plan = Plan {
                start: s,
                steps: base.steps.clone(),
            };
            let d = degree(m, *kind, agent, &plan, path, &agent_ids(m, coalition)?, ctx)?;
            match ctx.valuation() {
                None => Ok(Outcome::Region(Region::constraint(d.value, *cmp, bound.clone()))),
                Some(v) => {
                    let x = d.eval(v)?;
                    Ok(decided(cmp.holds(&x, bound)))
                }
            }
        }
    }
}

fn to_region(o: Outcome) -> Region {
    match o {
        Outcome::Decided { holds, .. } => Region::Const(holds),
        Outcome::Region(r) => r,
    }
}

/// The parameters of `p` that are free parameters of the model.
pub fn model_params_of(m: &Psmas, p: &Polynomial) -> Vec<ParamId> {
    let ps = p.params();
    m.free_params().iter().filter(|x| ps.contains(x)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, parse_path_formula};
    use crate::model::{build_psmas, parse_model};
    use crate::polyarith::{int, rat};

    fn fixture(name: &str) -> Psmas {
        let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
        build_psmas(parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
    }

    fn poly(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    #[test]
    fn next_probabilities() {
        let m = fixture("ball.game");
        let ctx = QueryContext::symbolic();
        let psi = parse_path_formula("X (dropped | score2)", &m).unwrap();
        assert_eq!(path_sat_prob(&m, 0, &psi, &ctx).unwrap(), poly("x1").into());
        let psi = parse_path_formula("X true", &m).unwrap();
        assert_eq!(path_sat_prob(&m, 0, &psi, &ctx).unwrap(), RationalFunction::one());
        let psi = parse_path_formula("X collision", &m).unwrap();
        let p = path_sat_prob(&m, 0, &psi, &ctx).unwrap();
        assert_eq!(p, poly("(1-x1)*(1-x2)").into());
    }

    #[test]
    fn symbolic_region() {
        let m = fixture("ball.game");
        let f = parse_formula("<A1,A2> P>0 [ X collision ]", &m).unwrap();
        match check(&m, 0, &f, &QueryContext::symbolic()).unwrap() {
            Outcome::Region(r) => assert_eq!(r.to_string(), "x1*x2 - x1 - x2 + 1 > 0"),
            other => panic!("unexpected {other:?}"),
        }
        let f = parse_formula("<A1,A2> P>=1 [ X true ]", &m).unwrap();
        assert_eq!(
            check(&m, 0, &f, &QueryContext::symbolic()).unwrap(),
            Outcome::Region(Region::Const(true))
        );
    }

    #[test]
    fn coalition_search_finds_witness() {
        let m = fixture("ball.game");
        let f = parse_formula("<A1> P>=3/4 [ X score1 ]", &m).unwrap();
        let ctx = QueryContext::evaluated(ParamValuation::new().with("x2", int(1)));
        match check(&m, 0, &f, &ctx).unwrap() {
            Outcome::Decided { holds, witness } => {
                assert!(holds);
                let w = witness.unwrap();
                assert_eq!(w.get(&"x1".into()), Some(&int(0)));
            }
            other => panic!("unexpected {other:?}"),
        }
        let f = parse_formula("<A1> P>=3/4 [ X score1 ]", &m).unwrap();
        let ctx = QueryContext::evaluated(ParamValuation::new().with("x2", rat(1, 2)));
        assert!(matches!(
            check(&m, 0, &f, &ctx).unwrap(),
            Outcome::Decided { holds: false, .. }
        ));
    }

    #[test]
    fn non_coalition_parameters_must_be_bound() {
        let m = fixture("ball.game");
        let f = parse_formula("<A1> P>=3/4 [ X score1 ]", &m).unwrap();
        let ctx = QueryContext::evaluated(ParamValuation::new());
        assert!(matches!(
            check(&m, 0, &f, &ctx),
            Err(CheckError::Poly(PolyError::MissingParameter(_)))
        ));
    }

    #[test]
    fn until_uses_minimal_prefixes() {
        let m = fixture("ball.game");
        let ctx = QueryContext::symbolic();
        // From s2, collision or dropped within two steps.
        let psi = parse_path_formula("F<=2 (collision | dropped)", &m).unwrap();
        let p = path_sat_prob(&m, 2, &psi, &ctx).unwrap();
        let hit = poly("x1*x2 + (1-x1)*(1-x2)");
        let miss = poly("(1-x1)*x2 + x1*(1-x2)");
        assert_eq!(p, (&hit + &(&miss * &hit)).into());
        // Already satisfied at s0.
        assert_eq!(path_sat_prob(&m, 0, &psi, &ctx).unwrap(), RationalFunction::one());
        let psi0 = parse_path_formula("true U<=0 score1", &m).unwrap();
        assert_eq!(path_sat_prob(&m, 0, &psi0, &ctx).unwrap(), RationalFunction::zero());
        assert_eq!(path_sat_prob(&m, 2, &psi0, &ctx).unwrap(), RationalFunction::one());
    }

    #[test]
    fn reward_infinite_and_finite() {
        let m = fixture("courier.game");
        let ctx = QueryContext::symbolic();
        let goal = StateFormula::atom("goal");
        assert_eq!(reward_value(&m, 0, 0, &goal, 1, &ctx).unwrap(), ExtendedValue::Infinite);
        assert!(matches!(
            reward_value(&m, 0, 0, &goal, 2, &ctx).unwrap(),
            ExtendedValue::Finite(_)
        ));
        assert_eq!(
            reward_value(&m, 2, 0, &goal, 0, &ctx).unwrap(),
            ExtendedValue::Finite(RationalFunction::zero())
        );
    }

    #[test]
    fn nested_operators_need_a_valuation() {
        let m = fixture("ball.game");
        let f = parse_formula("<A1,A2> P>=1/2 [ X (<A1> P>=1/2 [ X score1 ]) ]", &m).unwrap();
        assert!(matches!(
            check(&m, 0, &f, &QueryContext::symbolic()),
            Err(CheckError::NeedsValuation(_))
        ));
        let v = ParamValuation::new().with("x1", rat(1, 2)).with("x2", rat(1, 2));
        assert!(matches!(
            check(&m, 0, &f, &QueryContext::evaluated(v)).unwrap(),
            Outcome::Decided { holds: true, .. }
        ));
    }
}
