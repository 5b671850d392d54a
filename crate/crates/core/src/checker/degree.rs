use num_traits::Zero;

use crate::logic::{horizon, DegreeKind, PathFormula};
use crate::model::{AgentId, Plan, Psmas};
use crate::polyarith::{ParamValuation, PolyError, Polynomial, Rational, RationalFunction};
use crate::trace::{compatible_plans_limited, decided_histories, decided_plan_union, plans_matching, TraceError};

use super::{CheckError, PathClassifier, QueryContext};

/// A responsibility degree together with the pieces it is built from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeResult {
    pub value: RationalFunction,
    /// Avoidability (CAR) or achievability (CPR) of the outcome.
    pub kappa: bool,
    pub numerator: Polynomial,
    pub denominator: Polynomial,
    pub numerator_paths: usize,
    pub denominator_paths: usize,
}

impl DegreeResult {
    fn zero(numerator: Polynomial, denominator: Polynomial, np: usize, dp: usize) -> DegreeResult {
        DegreeResult {
            value: RationalFunction::zero(),
            kappa: false,
            numerator,
            denominator,
            numerator_paths: np,
            denominator_paths: dp,
        }
    }

    /// Value at a valuation. When numerator and denominator both vanish the
    /// outcome carries no mass and the degree is 0.
    pub fn eval(&self, v: &ParamValuation) -> Result<Rational, PolyError> {
        if !self.kappa {
            return Ok(Rational::zero());
        }
        eval_ratio(&self.numerator, &self.denominator, v)
    }
}

/// `num / den` at `v`, with `0/0` read as 0.
pub fn eval_ratio(num: &Polynomial, den: &Polynomial, v: &ParamValuation) -> Result<Rational, PolyError> {
    let d = den.eval(v)?;
    let n = num.eval(v)?;
    if d.is_zero() {
        if n.is_zero() {
            return Ok(Rational::zero());
        }
        return Err(PolyError::DivisionByZero);
    }
    Ok(n / d)
}

fn prepare(
    m: &Psmas,
    plan: &Plan,
    psi: &PathFormula,
    ctx: &QueryContext,
) -> Result<(Plan, PathClassifier), CheckError> {
    let k = horizon(psi) as usize;
    if plan.steps.len() < k {
        return Err(CheckError::Unsupported(format!(
            "plan has {} steps but the path formula needs {k}",
            plan.steps.len()
        )));
    }
    let plan = Plan {
        start: plan.start,
        steps: plan.steps[..k].to_vec(),
    };
    m.csg().check_plan(&plan).map_err(TraceError::IllFormedPlan)?;
    Ok((plan, PathClassifier::new(m, psi, ctx)?))
}

fn sum(ps: impl IntoIterator<Item = Polynomial>) -> Polynomial {
    ps.into_iter().fold(Polynomial::zero(), |acc, p| &acc + &p)
}

fn finish(
    num: Polynomial,
    den: Polynomial,
    np: usize,
    dp: usize,
    kappa: bool,
    ctx: &QueryContext,
) -> Result<DegreeResult, CheckError> {
    ctx.check_poly(&num)?;
    ctx.check_poly(&den)?;
    if !kappa {
        return Ok(DegreeResult::zero(num, den, np, dp));
    }
    if den.is_zero() {
        return Err(CheckError::Degenerate(
            "the reference probability is identically zero".into(),
        ));
    }
    let value = RationalFunction::new(num.clone(), den.clone())?.simplified();
    Ok(DegreeResult {
        value,
        kappa,
        numerator: num,
        denominator: den,
        numerator_paths: np,
        denominator_paths: dp,
    })
}

/// Degree of active responsibility of `agent` for `psi` under `plan`.
///
/// Numerator: histories of plans sharing the agent's actions that satisfy
/// `psi`. Denominator: every history satisfying `psi`. Zero when no plan
/// can avoid `psi`.
pub fn car_degree(
    m: &Psmas,
    agent: AgentId,
    plan: &Plan,
    psi: &PathFormula,
    coalition: &[AgentId],
    ctx: &QueryContext,
) -> Result<DegreeResult, CheckError> {
    check_member(agent, coalition)?;
    let (plan, cl) = prepare(m, plan, psi, ctx)?;
    let k = plan.steps.len();
    let classify = |j: usize, s| cl.classify(j, s);

    let all = decided_histories(m, plan.start, k, &|_, _| true, &classify, ctx.path_limit)?;
    let den_paths: Vec<Polynomial> = all.into_iter().filter(|(_, v)| *v).map(|(h, _)| h.prob).collect();
    let dp = den_paths.len();
    let den = sum(den_paths);

    let class = compatible_plans_limited(m, &plan, &[agent], ctx.path_limit)?;
    let plus = decided_plan_union(m, &class.members, k, &classify, true, ctx.path_limit)?;
    let np = plus.len();
    let num = sum(plus.into_values());

    let every = plans_matching(m, plan.start, k, |_, _| None, ctx.path_limit)?;
    let minus = decided_plan_union(m, &every, k, &classify, false, ctx.path_limit)?;
    finish(num, den, np, dp, !minus.is_empty(), ctx)
}

/// Degree of passive responsibility of `agent` for `psi` under `plan`.
///
/// Numerator: histories violating `psi` of plans sharing every other
/// coalition member's actions. Denominator: every history violating `psi`.
/// Zero when the coalition's plan cannot achieve `psi`.
pub fn cpr_degree(
    m: &Psmas,
    agent: AgentId,
    plan: &Plan,
    psi: &PathFormula,
    coalition: &[AgentId],
    ctx: &QueryContext,
) -> Result<DegreeResult, CheckError> {
    check_member(agent, coalition)?;
    let (plan, cl) = prepare(m, plan, psi, ctx)?;
    let k = plan.steps.len();
    let classify = |j: usize, s| cl.classify(j, s);

    let all = decided_histories(m, plan.start, k, &|_, _| true, &classify, ctx.path_limit)?;
    let den_paths: Vec<Polynomial> = all.into_iter().filter(|(_, v)| !*v).map(|(h, _)| h.prob).collect();
    let dp = den_paths.len();
    let den = sum(den_paths);

    let achievers = compatible_plans_limited(m, &plan, coalition, ctx.path_limit)?;
    let plus = decided_plan_union(m, &achievers.members, k, &classify, true, ctx.path_limit)?;

    let others: Vec<AgentId> = coalition.iter().copied().filter(|i| *i != agent).collect();
    let class = compatible_plans_limited(m, &plan, &others, ctx.path_limit)?;
    let minus = decided_plan_union(m, &class.members, k, &classify, false, ctx.path_limit)?;
    let np = minus.len();
    let num = sum(minus.into_values());
    finish(num, den, np, dp, !plus.is_empty(), ctx)
}

pub fn degree(
    m: &Psmas,
    kind: DegreeKind,
    agent: AgentId,
    plan: &Plan,
    psi: &PathFormula,
    coalition: &[AgentId],
    ctx: &QueryContext,
) -> Result<DegreeResult, CheckError> {
    match kind {
        DegreeKind::Car => car_degree(m, agent, plan, psi, coalition, ctx),
        DegreeKind::Cpr => cpr_degree(m, agent, plan, psi, coalition, ctx),
    }
}

fn check_member(agent: AgentId, coalition: &[AgentId]) -> Result<(), CheckError> {
    if coalition.contains(&agent) {
        Ok(())
    } else {
        Err(CheckError::Unsupported(
            "the responsible agent must belong to the coalition".into(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_path_formula;
    use crate::model::{build_psmas, parse_model};
    use crate::polyarith::{rat, ParamId};
    use std::collections::BTreeMap;

    fn ball() -> Psmas {
        let path = format!("{}/../../fixtures/ball.game", env!("CARGO_MANIFEST_DIR"));
        build_psmas(parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
    }

    fn poly(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    fn symmetric(p: &Polynomial) -> Polynomial {
        let x = Polynomial::var("x");
        let b: BTreeMap<ParamId, Polynomial> = [("x1".into(), x.clone()), ("x2".into(), x)].into();
        p.substitute(&b)
    }

    #[test]
    fn car_of_skipping() {
        let m = ball();
        let ctx = QueryContext::symbolic();
        let psi = parse_path_formula("X (dropped | score2)", &m).unwrap();
        let d = car_degree(&m, 0, m.csg().plan("pi_skip").unwrap(), &psi, &[0, 1], &ctx).unwrap();
        assert!(d.kappa);
        assert_eq!(d.value, RationalFunction::one());
        assert_eq!(d.numerator, poly("x1"));
    }

    #[test]
    fn car_unavoidable_is_zero() {
        let m = ball();
        let ctx = QueryContext::symbolic();
        let psi = parse_path_formula("X true", &m).unwrap();
        let d = car_degree(&m, 0, m.csg().plan("pi_skip").unwrap(), &psi, &[0, 1], &ctx).unwrap();
        assert!(!d.kappa);
        assert!(d.value.is_zero());
    }

    #[test]
    fn cpr_of_collision() {
        let m = ball();
        let ctx = QueryContext::symbolic();
        let psi = parse_path_formula("X collision", &m).unwrap();
        let d = cpr_degree(&m, 0, m.csg().plan("pi_catch").unwrap(), &psi, &[0, 1], &ctx).unwrap();
        assert!(d.kappa);
        assert_eq!(symmetric(&d.numerator), poly("x*(1-x)"));
        assert_eq!(symmetric(&d.denominator), poly("2*x - x^2"));
        let v = ParamValuation::new().with("x1", rat(1, 2)).with("x2", rat(1, 2));
        assert_eq!(d.eval(&v).unwrap(), rat(1, 3));
    }

    #[test]
    fn cpr_unachievable_is_zero() {
        let m = ball();
        let ctx = QueryContext::symbolic();
        let psi = parse_path_formula("X collision", &m).unwrap();
        let d = cpr_degree(&m, 0, m.csg().plan("pi_skip").unwrap(), &psi, &[0, 1], &ctx).unwrap();
        assert!(!d.kappa);
        assert!(d.value.is_zero());
    }

    #[test]
    fn two_step_car_numerators() {
        let m = ball();
        let ctx = QueryContext::symbolic();
        let psi = parse_path_formula("F<=2 (collision | dropped)", &m).unwrap();
        let plan = m.csg().plan("pi9").unwrap();
        let a1 = car_degree(&m, 0, plan, &psi, &[0, 1], &ctx).unwrap();
        assert_eq!(a1.numerator, poly("(1-x1)*x2^2*x1 + (1-x1)*(1-x2)"));
        let a2 = car_degree(&m, 1, plan, &psi, &[0, 1], &ctx).unwrap();
        assert_eq!(a2.numerator, poly("x1*x2*(x2 - x1*x2 + 1)"));
        assert_eq!(a1.denominator, a2.denominator);
    }

    #[test]
    fn zero_over_zero_reads_as_zero() {
        let num = poly("x*(1-x)");
        let den = poly("x");
        let v = ParamValuation::new().with("x", rat(0, 1));
        assert_eq!(eval_ratio(&num, &den, &v).unwrap(), rat(0, 1));
    }
}
