//! Utilities that weigh payoff against responsibility, and Nash equilibrium
//! synthesis over the strategy parameters.

mod solve;
mod system;

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::checker::{car_degree, cpr_degree, eval_ratio, CheckError, DegreeResult, QueryContext};
use crate::logic::PathFormula;
use crate::model::{ActionId, AgentId, Plan, Psmas, StateId};
use crate::polyarith::{
    rational_to_f64, ParamId, ParamValuation, PolyError, Polynomial, Rational, RationalFunction, DEFAULT_TERM_LIMIT,
};
use crate::trace::{enumerate_histories_limited, payoff, plan_histories, TraceError, DEFAULT_PATH_LIMIT};

pub use solve::{solve_ne, SolveOptions};
pub use system::{build_ne_system, relevant_groups, support_profiles, NeSystem, Support};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SynthError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("unsupported query: {0}")]
    Unsupported(String),
    #[error("no solution found (best residual {best_residual:e})")]
    NoSolution { best_residual: f64 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UtilityConfig {
    pub lambda1: Rational,
    pub lambda2: Rational,
    pub theta: Rational,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        UtilityConfig {
            lambda1: Rational::one(),
            lambda2: Rational::zero(),
            theta: Rational::one(),
        }
    }
}

/// The plan and outcome that responsibility is measured against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponsibilitySpec {
    pub plan: Plan,
    pub psi: PathFormula,
}

/// Everything that determines the agents' utilities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GameSpec {
    /// State the payoff histories start from.
    pub start: StateId,
    pub horizon: usize,
    pub cfg: UtilityConfig,
    pub resp: Option<ResponsibilitySpec>,
    pub path_limit: usize,
    pub term_limit: usize,
}

impl GameSpec {
    pub fn new(start: StateId, horizon: usize, cfg: UtilityConfig) -> Self {
        GameSpec {
            start,
            horizon,
            cfg,
            resp: None,
            path_limit: DEFAULT_PATH_LIMIT,
            term_limit: DEFAULT_TERM_LIMIT,
        }
    }

    pub fn with_resp(mut self, plan: Plan, psi: PathFormula) -> Self {
        self.resp = Some(ResponsibilitySpec { plan, psi });
        self
    }

    fn ctx(&self) -> QueryContext {
        QueryContext {
            path_limit: self.path_limit,
            term_limit: self.term_limit,
            ..QueryContext::symbolic()
        }
    }
}

pub enum PayoffScope<'a> {
    Plan(&'a Plan),
    Horizon { start: StateId, depth: usize },
}

/// Sum of the agent's payoff over the histories in scope.
pub fn payoff_valuation(
    m: &Psmas,
    scope: PayoffScope<'_>,
    agent: AgentId,
    limit: usize,
) -> Result<Polynomial, SynthError> {
    let r = m.csg().reward(agent);
    let hs = match scope {
        PayoffScope::Plan(p) => plan_histories(m, p),
        PayoffScope::Horizon { start, depth } => enumerate_histories_limited(m, start, depth, limit)?,
    };
    Ok(hs.iter().map(|h| payoff(m, h, r)).sum())
}

/// CAR plus `theta` times CPR, with every agent in the coalition.
pub fn resp_valuation(
    m: &Psmas,
    agent: AgentId,
    plan: &Plan,
    psi: &PathFormula,
    theta: &Rational,
    ctx: &QueryContext,
) -> Result<RationalFunction, SynthError> {
    let all: Vec<AgentId> = (0..m.csg().agents().len()).collect();
    let car = car_degree(m, agent, plan, psi, &all, ctx)?;
    if theta.is_zero() {
        return Ok(car.value);
    }
    let cpr = cpr_degree(m, agent, plan, psi, &all, ctx)?;
    Ok((&car.value + &cpr.value.scale(theta)).simplified())
}

/// One agent's utility, kept in components so that vanishing degree
/// denominators can be handled at each point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utility {
    pub agent: AgentId,
    pub cfg: UtilityConfig,
    pub payoff: Polynomial,
    pub car: Option<DegreeResult>,
    pub cpr: Option<DegreeResult>,
}

fn degree_part(d: &Option<DegreeResult>) -> Option<(&Polynomial, &Polynomial)> {
    d.as_ref().filter(|d| d.kappa).map(|d| (&d.numerator, &d.denominator))
}

impl Utility {
    pub fn build(m: &Psmas, game: &GameSpec, agent: AgentId) -> Result<Utility, SynthError> {
        let ctx = game.ctx();
        let cfg = game.cfg.clone();
        let payoff = if cfg.lambda1.is_zero() {
            Polynomial::zero()
        } else {
            payoff_valuation(
                m,
                PayoffScope::Horizon {
                    start: game.start,
                    depth: game.horizon,
                },
                agent,
                game.path_limit,
            )?
        };
        let (mut car, mut cpr) = (None, None);
        if let (Some(resp), false) = (&game.resp, cfg.lambda2.is_zero()) {
            let all: Vec<AgentId> = (0..m.csg().agents().len()).collect();
            car = Some(car_degree(m, agent, &resp.plan, &resp.psi, &all, &ctx)?);
            if !cfg.theta.is_zero() {
                cpr = Some(cpr_degree(m, agent, &resp.plan, &resp.psi, &all, &ctx)?);
            }
        }
        Ok(Utility {
            agent,
            cfg,
            payoff,
            car,
            cpr,
        })
    }

    pub fn params(&self) -> std::collections::BTreeSet<ParamId> {
        let mut ps = self.payoff.params();
        for (n, d) in [degree_part(&self.car), degree_part(&self.cpr)].into_iter().flatten() {
            ps.extend(n.params());
            ps.extend(d.params());
        }
        ps
    }

    /// `lambda1 * payoff - lambda2 * (car + theta * cpr)`.
    pub fn rational_function(&self) -> Result<RationalFunction, SynthError> {
        self.substitute(&BTreeMap::new())
    }

    /// The utility after substituting `bindings`. A degree whose
    /// denominator vanishes identically contributes 0.
    pub fn substitute(&self, bindings: &BTreeMap<ParamId, Polynomial>) -> Result<RationalFunction, SynthError> {
        let mut u: RationalFunction = self.payoff.substitute(bindings).scale(&self.cfg.lambda1).into();
        let weights = [self.cfg.lambda2.clone(), &self.cfg.lambda2 * &self.cfg.theta];
        for (part, w) in [degree_part(&self.car), degree_part(&self.cpr)]
            .into_iter()
            .zip(weights)
        {
            let Some((n, d)) = part else { continue };
            let d = d.substitute(bindings);
            if d.is_zero() || w.is_zero() {
                continue;
            }
            let r = RationalFunction::new(n.substitute(bindings), d)?.scale(&-w);
            u = (&u + &r).simplified();
        }
        Ok(u)
    }

    pub fn eval(&self, v: &ParamValuation) -> Result<Rational, SynthError> {
        let mut u = &self.cfg.lambda1 * self.payoff.eval(v)?;
        let weights = [self.cfg.lambda2.clone(), &self.cfg.lambda2 * &self.cfg.theta];
        for (part, w) in [degree_part(&self.car), degree_part(&self.cpr)]
            .into_iter()
            .zip(weights)
        {
            if let Some((n, d)) = part {
                if !w.is_zero() {
                    u -= w * eval_ratio(n, d, v)?;
                }
            }
        }
        Ok(u)
    }
}

pub fn utilities(m: &Psmas, game: &GameSpec) -> Result<Vec<Utility>, SynthError> {
    (0..m.csg().agents().len())
        .map(|i| Utility::build(m, game, i))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeSolution {
    pub valuation: ParamValuation,
    /// Largest absolute equation value at `valuation`, computed exactly.
    pub residual: f64,
    /// Best-response gap, when the solution was verified against a game.
    pub epsilon: Option<f64>,
    pub support: Support,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    pub ok: bool,
    pub gap: f64,
    /// Largest gain per agent.
    pub gains: Vec<f64>,
}

/// The valuation with one group's parameters at the vertex of `action`.
pub(crate) fn vertex_bindings(m: &Psmas, group: usize, action: ActionId) -> BTreeMap<ParamId, Rational> {
    let g = &m.groups()[group];
    let pos = g.position(action).expect("action belongs to group");
    g.free_params()
        .iter()
        .enumerate()
        .map(|(k, p)| (p.clone(), if k == pos { Rational::one() } else { Rational::zero() }))
        .collect()
}

const JOINT_DEVIATION_LIMIT: usize = 1024;

/// Largest gain any agent gets from a pure deviation, with the others fixed
/// at `candidate`.
pub fn verify_with(
    m: &Psmas,
    utils: &[Utility],
    candidate: &ParamValuation,
    epsilon: f64,
) -> Result<Verification, SynthError> {
    let relevant = relevant_groups(m, utils);
    let mut gains = Vec::with_capacity(utils.len());
    for u in utils {
        let base = u.eval(candidate)?;
        let mine: Vec<usize> = relevant
            .iter()
            .copied()
            .filter(|g| m.groups()[*g].agent == u.agent)
            .collect();
        let mut deviations: Vec<Vec<(usize, ActionId)>> = Vec::new();
        for g in &mine {
            for a in &m.groups()[*g].actions {
                deviations.push(vec![(*g, *a)]);
            }
        }
        let joint: usize = mine.iter().map(|g| m.groups()[*g].actions.len()).product();
        if mine.len() > 1 && joint <= JOINT_DEVIATION_LIMIT {
            let mut combos: Vec<Vec<(usize, ActionId)>> = vec![Vec::new()];
            for g in &mine {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        m.groups()[*g].actions.iter().map(move |a| {
                            let mut c = c.clone();
                            c.push((*g, *a));
                            c
                        })
                    })
                    .collect();
            }
            deviations.extend(combos);
        }
        let mut best = Rational::zero();
        for dev in deviations {
            let mut v = candidate.clone();
            for (g, a) in dev {
                for (p, x) in vertex_bindings(m, g, a) {
                    v.set(p, x);
                }
            }
            let gain = u.eval(&v)? - &base;
            if gain > best {
                best = gain;
            }
        }
        gains.push(rational_to_f64(&best));
    }
    let gap = gains.iter().copied().fold(0.0, f64::max);
    Ok(Verification {
        ok: gap <= epsilon,
        gap,
        gains,
    })
}

pub fn verify_ne(
    m: &Psmas,
    game: &GameSpec,
    candidate: &ParamValuation,
    epsilon: f64,
) -> Result<Verification, SynthError> {
    verify_with(m, &utilities(m, game)?, candidate, epsilon)
}

/// Upper bound on support profiles tried by [`enumerate_equilibria`].
pub const SUPPORT_LIMIT: usize = 4096;

/// Solve the indifference system of every support profile and keep the
/// verified, admissible solutions.
pub fn enumerate_equilibria(m: &Psmas, game: &GameSpec, opts: &SolveOptions) -> Result<Vec<NeSolution>, SynthError> {
    let utils = utilities(m, game)?;
    let profiles = support_profiles(m, &utils, SUPPORT_LIMIT)?;
    let per_profile: Vec<Result<(Vec<NeSolution>, f64), SynthError>> = profiles
        .par_iter()
        .map(|support| {
            let sys = build_ne_system(m, &utils, support)?;
            if sys.variables.len() > solve::MAX_VARIABLES {
                return Ok((Vec::new(), f64::INFINITY));
            }
            let found = match solve_ne(&sys, opts) {
                Ok(s) => s,
                Err(SynthError::NoSolution { best_residual }) => return Ok((Vec::new(), best_residual)),
                Err(e) => return Err(e),
            };
            let mut kept = Vec::new();
            for mut sol in found {
                let full = sys.full_valuation(&sol.valuation)?;
                if !m.check_admissible_partial(&full).ok {
                    continue;
                }
                let ver = verify_with(m, &utils, &full, opts.epsilon)?;
                if ver.ok {
                    sol.valuation = full;
                    sol.epsilon = Some(ver.gap);
                    kept.push(sol);
                }
            }
            Ok((kept, f64::INFINITY))
        })
        .collect();
    let mut out: Vec<NeSolution> = Vec::new();
    let mut best_residual = f64::INFINITY;
    for r in per_profile {
        let (sols, res) = r?;
        best_residual = best_residual.min(res);
        for s in sols {
            if !out.iter().any(|o| solve::close(&o.valuation, &s.valuation, 1e-6)) {
                out.push(s);
            }
        }
    }
    if out.is_empty() {
        return Err(SynthError::NoSolution { best_residual });
    }
    Ok(out)
}
