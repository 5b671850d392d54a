//! Independent reference computations: Monte-Carlo simulation of an
//! instantiated model and exhaustive grid search for best responses.

use std::collections::BTreeSet;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::checker::{degree, lattice, CheckError, PathClassifier, QueryContext};
use crate::logic::{horizon, DegreeKind, PathFormula};
use crate::model::{AgentId, JointAction, ModelError, Plan, Psmas, StateId};
use crate::polyarith::{rat, rational_to_f64, ParamValuation, PolyError, Rational};
use crate::synth::{utilities, GameSpec, SynthError};
use crate::trace::{compatible_plans_limited, decided_plan_union, TraceError, Verdict};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error("inadmissible valuation: {0}")]
    Inadmissible(String),
    #[error("estimate undefined: {0}")]
    Undefined(String),
    #[error("unsupported query: {0}")]
    Unsupported(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SimConfig {
    pub samples: usize,
    pub seed: u64,
    pub horizon: usize,
    pub valuation: ParamValuation,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    fn bernoulli(hits: usize, n: usize) -> Estimate {
        let mean = if n == 0 { 0.0 } else { hits as f64 / n as f64 };
        Estimate {
            mean,
            stderr: if n == 0 {
                0.0
            } else {
                (mean * (1.0 - mean) / n as f64).sqrt()
            },
            samples: n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub states: Vec<StateId>,
    pub actions: Vec<JointAction>,
}

const CHUNK: usize = 4096;

/// Float tables of an instantiated model.
struct Sampler {
    /// Per state and agent: (action, probability).
    choices: Vec<Vec<Vec<(usize, f64)>>>,
    model: Psmas,
    valuation: ParamValuation,
}

impl Sampler {
    fn new(m: &Psmas, v: &ParamValuation) -> Result<Sampler, OracleError> {
        let report = m.check_admissible(v)?;
        if let Some(first) = report.violations.first() {
            return Err(OracleError::Inadmissible(first.to_string()));
        }
        let csg = m.csg();
        let mut choices = Vec::new();
        for s in 0..csg.states().len() {
            let mut per_agent = Vec::new();
            for i in 0..csg.agents().len() {
                let mut row = Vec::new();
                for a in csg.available(i, s) {
                    let p = m.action_prob(i, s, *a).expect("available action").eval(v)?;
                    row.push((*a, rational_to_f64(&p)));
                }
                per_agent.push(row);
            }
            choices.push(per_agent);
        }
        Ok(Sampler {
            choices,
            model: m.clone(),
            valuation: v.clone(),
        })
    }

    fn pick<T: Copy>(rng: &mut ChaCha8Rng, items: &[(T, f64)]) -> T {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (x, p) in items {
            acc += p;
            if u < acc {
                return *x;
            }
        }
        items
            .iter()
            .rev()
            .find(|(_, p)| *p > 0.0)
            .unwrap_or(&items[items.len() - 1])
            .0
    }

    fn step(&self, rng: &mut ChaCha8Rng, s: StateId) -> (JointAction, StateId) {
        let ja = JointAction(self.choices[s].iter().map(|row| Self::pick(rng, row)).collect());
        let succ: Vec<(StateId, f64)> = self
            .model
            .csg()
            .delta(s, &ja)
            .iter()
            .map(|(t, p)| (*t, rational_to_f64(p)))
            .collect();
        let t = Self::pick(rng, &succ);
        (ja, t)
    }

    fn path(&self, rng: &mut ChaCha8Rng, start: StateId, len: usize) -> Sample {
        let mut states = vec![start];
        let mut actions = Vec::with_capacity(len);
        for _ in 0..len {
            let (a, t) = self.step(rng, *states.last().expect("non-empty"));
            actions.push(a);
            states.push(t);
        }
        Sample { states, actions }
    }

    /// Runs `f` on every sample and sums the per-sample counts. Sample `k`
    /// always comes from stream `k / CHUNK` of the seed, so the result does
    /// not depend on the number of threads.
    fn count<F>(&self, cfg: &SimConfig, start: StateId, len: usize, f: F) -> (usize, usize)
    where
        F: Fn(&Sample) -> (bool, bool) + Sync,
    {
        let chunks = cfg.samples.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(c as u64);
                let n = CHUNK.min(cfg.samples - c * CHUNK);
                let mut acc = (0, 0);
                for _ in 0..n {
                    let (a, b) = f(&self.path(&mut rng, start, len));
                    acc.0 += a as usize;
                    acc.1 += b as usize;
                }
                acc
            })
            .reduce(|| (0, 0), |x, y| (x.0 + y.0, x.1 + y.1))
    }
}

/// `cfg.samples` independent histories of length `cfg.horizon` from `start`.
pub fn simulate_paths(m: &Psmas, start: StateId, cfg: &SimConfig) -> Result<Vec<Sample>, OracleError> {
    let sampler = Sampler::new(m, &cfg.valuation)?;
    let chunks = cfg.samples.div_ceil(CHUNK);
    Ok((0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64);
            let n = CHUNK.min(cfg.samples - c * CHUNK);
            let sampler = &sampler;
            (0..n)
                .map(move |_| sampler.path(&mut rng, start, cfg.horizon))
                .collect::<Vec<_>>()
        })
        .collect())
}

/// Frequency of histories from `start` satisfying `psi`.
pub fn estimate_probability(
    m: &Psmas,
    start: StateId,
    psi: &PathFormula,
    cfg: &SimConfig,
) -> Result<Estimate, OracleError> {
    let sampler = Sampler::new(m, &cfg.valuation)?;
    let cl = PathClassifier::new(m, psi, &QueryContext::evaluated(sampler.valuation.clone()))?;
    let len = (horizon(psi) as usize).max(cfg.horizon);
    let (hits, _) = sampler.count(cfg, start, len, |h| (cl.classify_run(&h.states), false));
    Ok(Estimate::bernoulli(hits, cfg.samples))
}

type Key = (Vec<StateId>, Vec<JointAction>);

/// Decided prefix of a sample and its verdict.
fn decided_prefix(cl: &PathClassifier, h: &Sample) -> (Key, bool) {
    for (j, s) in h.states.iter().enumerate() {
        match cl.classify(j, *s) {
            Verdict::Open => {}
            v => {
                return (
                    (h.states[..=j].to_vec(), h.actions[..j].to_vec()),
                    v == Verdict::Satisfied,
                )
            }
        }
    }
    ((h.states.clone(), h.actions.clone()), false)
}

/// Sampled responsibility degree. Each sample is classified exactly against
/// the enumerated compatibility classes; the avoidability or achievability
/// flag is computed by enumeration.
pub fn estimate_degree(
    m: &Psmas,
    cfg: &SimConfig,
    agent: AgentId,
    plan: &Plan,
    psi: &PathFormula,
    kind: DegreeKind,
    coalition: &[AgentId],
) -> Result<Estimate, OracleError> {
    let ctx = QueryContext::evaluated(cfg.valuation.clone());
    let exact = degree(m, kind, agent, plan, psi, coalition, &ctx)?;
    if !exact.kappa {
        return Ok(Estimate {
            mean: 0.0,
            stderr: 0.0,
            samples: cfg.samples,
        });
    }
    let sampler = Sampler::new(m, &cfg.valuation)?;
    let cl = PathClassifier::new(m, psi, &ctx)?;
    let k = horizon(psi) as usize;
    let plan = Plan {
        start: plan.start,
        steps: plan.steps[..k].to_vec(),
    };
    let classify = |j: usize, s: StateId| cl.classify(j, s);
    let (members, want) = match kind {
        DegreeKind::Car => (compatible_plans_limited(m, &plan, &[agent], usize::MAX)?.members, true),
        DegreeKind::Cpr => {
            let others: Vec<AgentId> = coalition.iter().copied().filter(|i| *i != agent).collect();
            (compatible_plans_limited(m, &plan, &others, usize::MAX)?.members, false)
        }
    };
    let numerator: BTreeSet<Key> = decided_plan_union(m, &members, k, &classify, want, usize::MAX)?
        .into_keys()
        .collect();
    let (num, den) = sampler.count(cfg, plan.start, k, |h| {
        let (key, verdict) = decided_prefix(&cl, h);
        if verdict != want {
            return (false, false);
        }
        (numerator.contains(&key), true)
    });
    if den == 0 {
        return Err(OracleError::Undefined("no sampled history in the reference set".into()));
    }
    let r = num as f64 / den as f64;
    Ok(Estimate {
        mean: r,
        stderr: (r * (1.0 - r) / den as f64).sqrt(),
        samples: cfg.samples,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BestResponse {
    pub value: Rational,
    pub maximizers: Vec<ParamValuation>,
    pub grid_points: usize,
}

const GRID_POINT_LIMIT: usize = 2_000_000;

/// Exhaustive search over the agent's parameters at step `1/resolution`,
/// with exact utilities. Returns every grid point within 1e-12 of the best.
pub fn grid_best_response(
    m: &Psmas,
    game: &GameSpec,
    agent: AgentId,
    others: &ParamValuation,
    resolution: usize,
) -> Result<BestResponse, OracleError> {
    let utils = utilities(m, game)?;
    let u = &utils[agent];
    let groups: Vec<usize> = (0..m.groups().len())
        .filter(|g| m.groups()[*g].agent == agent && !m.groups()[*g].free_params().is_empty())
        .collect();
    let per_group: Vec<Vec<Vec<usize>>> = groups
        .iter()
        .map(|g| lattice(m.groups()[*g].free_params().len(), resolution))
        .collect();
    let total = per_group.iter().try_fold(1usize, |acc, g| acc.checked_mul(g.len()));
    if total.is_none_or(|t| t > GRID_POINT_LIMIT) {
        return Err(OracleError::Unsupported("best-response grid is too large".into()));
    }
    let total = total.expect("checked above");
    let points: Vec<ParamValuation> = (0..total)
        .map(|mut idx| {
            let mut v = others.clone();
            for (g, lat) in groups.iter().zip(&per_group) {
                let point = &lat[idx % lat.len()];
                idx /= lat.len();
                for (p, k) in m.groups()[*g].free_params().iter().zip(point) {
                    v.set(p.clone(), rat(*k as i64, resolution as i64));
                }
            }
            v
        })
        .collect();
    let values: Vec<Rational> = points.par_iter().map(|v| u.eval(v)).collect::<Result<_, _>>()?;
    let best = values.iter().max().cloned().unwrap_or_else(Rational::zero);
    let tol = rat(1, 1_000_000_000_000);
    let maximizers = points
        .into_iter()
        .zip(&values)
        .filter(|(_, x)| &best - *x <= tol)
        .map(|(mut v, _)| {
            for (p, _) in others.iter() {
                if !groups.iter().any(|g| m.groups()[*g].free_params().contains(p)) {
                    v.remove(&p.clone());
                }
            }
            v
        })
        .collect();
    Ok(BestResponse {
        value: best,
        maximizers,
        grid_points: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_path_formula;
    use crate::model::{build_psmas, parse_model};
    use crate::polyarith::int;
    use crate::synth::UtilityConfig;

    fn ball() -> Psmas {
        let path = format!("{}/../../fixtures/ball.game", env!("CARGO_MANIFEST_DIR"));
        build_psmas(parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
    }

    fn cfg(x1: Rational, x2: Rational, samples: usize) -> SimConfig {
        SimConfig {
            samples,
            seed: 7,
            horizon: 1,
            valuation: ParamValuation::new().with("x1", x1).with("x2", x2),
        }
    }

    #[test]
    fn degenerate_strategies_are_deterministic() {
        let m = ball();
        let paths = simulate_paths(&m, 0, &cfg(int(1), int(1), 100)).unwrap();
        assert!(paths.iter().all(|p| p.states == vec![0, 0]));
    }

    #[test]
    fn same_seed_same_stream() {
        let m = ball();
        let c = cfg(rat(1, 2), rat(1, 3), 10_000);
        assert_eq!(simulate_paths(&m, 0, &c).unwrap(), simulate_paths(&m, 0, &c).unwrap());
    }

    #[test]
    fn fair_coins() {
        let m = ball();
        let psi = parse_path_formula("X collision", &m).unwrap();
        let e = estimate_probability(&m, 0, &psi, &cfg(rat(1, 2), rat(1, 2), 200_000)).unwrap();
        assert!((e.mean - 0.25).abs() <= 4.0 * e.stderr);
    }

    #[test]
    fn kappa_zero_is_exact() {
        let m = ball();
        let psi = parse_path_formula("X true", &m).unwrap();
        let plan = m.csg().plan("pi_skip").unwrap();
        let e = estimate_degree(
            &m,
            &cfg(rat(1, 2), rat(1, 2), 1000),
            0,
            plan,
            &psi,
            DegreeKind::Car,
            &[0, 1],
        )
        .unwrap();
        assert_eq!(e.mean, 0.0);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn best_response_to_payoff() {
        let m = ball();
        let game = GameSpec::new(0, 2, UtilityConfig::default());
        let others = ParamValuation::new().with("x2", int(1));
        let br = grid_best_response(&m, &game, 0, &others, 1000).unwrap();
        assert_eq!(br.grid_points, 1001);
        assert_eq!(br.maximizers.len(), 1);
        assert_eq!(br.maximizers[0].get(&"x1".into()), Some(&int(0)));
        assert_eq!(br.value, int(16));
    }

    #[test]
    fn constant_utility_returns_whole_grid() {
        let m = ball();
        let cfg = UtilityConfig {
            lambda1: int(0),
            ..UtilityConfig::default()
        };
        let game = GameSpec::new(0, 1, cfg);
        let br = grid_best_response(&m, &game, 0, &ParamValuation::new(), 10).unwrap();
        assert_eq!(br.grid_points, 11);
        assert_eq!(br.maximizers.len(), 11);
    }
}
