//! Bounded histories with parametric probabilities, pure joint plans and
//! compatibility classes.

use std::collections::BTreeMap;

use num_traits::Zero;
use thiserror::Error;

use crate::model::{ActionId, AgentId, JointAction, Plan, Psmas, RewardStructure, StateId};
use crate::polyarith::{Polynomial, Rational};

pub const DEFAULT_PATH_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("{what} needs {size} items, exceeding the limit of {limit}")]
    ResourceLimit {
        what: &'static str,
        size: u128,
        limit: usize,
    },
    #[error("plan is not well formed: {0}")]
    IllFormedPlan(String),
}

/// `s0 α0 s1 … sk` with the product of its transition polynomials.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct History {
    pub states: Vec<StateId>,
    pub actions: Vec<JointAction>,
    pub prob: Polynomial,
}

impl History {
    pub fn start(s: StateId) -> History {
        History {
            states: vec![s],
            actions: Vec::new(),
            prob: Polynomial::one(),
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn last(&self) -> StateId {
        *self.states.last().expect("histories are non-empty")
    }

    pub fn key(&self) -> (Vec<StateId>, Vec<JointAction>) {
        (self.states.clone(), self.actions.clone())
    }

    fn extend(&self, a: &JointAction, t: StateId, p: &Polynomial) -> History {
        let mut states = self.states.clone();
        states.push(t);
        let mut actions = self.actions.clone();
        actions.push(a.clone());
        History {
            states,
            actions,
            prob: &self.prob * p,
        }
    }

    pub fn render(&self, m: &Psmas) -> String {
        let g = m.csg();
        let mut out = g.states()[self.states[0]].clone();
        for (a, s) in self.actions.iter().zip(&self.states[1..]) {
            out.push_str(&format!(" -{}-> {}", g.render_joint(a), g.states()[*s]));
        }
        out
    }
}

/// Plans sharing the anchor's coalition actions at every step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompatClass {
    pub anchor: Plan,
    pub coalition: Vec<AgentId>,
    pub members: Vec<Plan>,
}

impl CompatClass {
    pub fn contains(&self, p: &Plan) -> bool {
        self.members.contains(p)
    }
}

fn max_joint_actions(m: &Psmas) -> u128 {
    (0..m.csg().states().len())
        .map(|s| m.transitions(s).len().max(1) as u128)
        .max()
        .unwrap_or(1)
}

fn check_volume(m: &Psmas, depth: usize, limit: usize) -> Result<(), TraceError> {
    let branching = max_joint_actions(m);
    let mut size = m.csg().states().len() as u128;
    for _ in 0..depth {
        size = size.saturating_mul(branching);
        if size > limit as u128 {
            return Err(TraceError::ResourceLimit {
                what: "history enumeration",
                size,
                limit,
            });
        }
    }
    Ok(())
}

/// All histories of exactly `depth` steps from `s`.
pub fn enumerate_histories(m: &Psmas, s: StateId, depth: usize) -> Result<Vec<History>, TraceError> {
    enumerate_histories_limited(m, s, depth, DEFAULT_PATH_LIMIT)
}

pub fn enumerate_histories_limited(
    m: &Psmas,
    s: StateId,
    depth: usize,
    limit: usize,
) -> Result<Vec<History>, TraceError> {
    check_volume(m, depth, limit)?;
    let mut layer = vec![History::start(s)];
    for _ in 0..depth {
        let mut next = Vec::new();
        for h in &layer {
            for tr in m.transitions(h.last()) {
                next.push(h.extend(&tr.action, tr.target, &tr.prob));
            }
        }
        layer = next;
    }
    Ok(layer)
}

/// Histories that follow the plan's joint actions; only the successor
/// choice branches.
pub fn plan_histories(m: &Psmas, p: &Plan) -> Vec<History> {
    let mut layer = vec![History::start(p.start)];
    for ja in &p.steps {
        let mut next = Vec::new();
        for h in &layer {
            for tr in m.transitions(h.last()).iter().filter(|t| t.action == *ja) {
                next.push(h.extend(&tr.action, tr.target, &tr.prob));
            }
        }
        layer = next;
    }
    layer
}

/// Every well-formed plan of length `len` from `start` in which agent `i`
/// plays `fixed(step, i)` whenever that is `Some`; other agents range over
/// every action they have anywhere in the model.
pub fn plans_matching(
    m: &Psmas,
    start: StateId,
    len: usize,
    fixed: impl Fn(usize, AgentId) -> Option<ActionId>,
    limit: usize,
) -> Result<Vec<Plan>, TraceError> {
    let g = m.csg();
    let n = g.agents().len();
    let pools: Vec<Vec<ActionId>> = (0..n).map(|i| g.all_actions_of(i)).collect();
    let mut per_step: Vec<Vec<JointAction>> = Vec::with_capacity(len);
    let mut size: u128 = 1;
    for step in 0..len {
        let mut combos: Vec<Vec<ActionId>> = vec![Vec::new()];
        for i in 0..n {
            let choices: Vec<ActionId> = match fixed(step, i) {
                Some(a) => vec![a],
                None => pools[i].clone(),
            };
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    choices.iter().map(move |a| {
                        let mut c = c.clone();
                        c.push(*a);
                        c
                    })
                })
                .collect();
        }
        size = size.saturating_mul(combos.len() as u128);
        if size > limit as u128 {
            return Err(TraceError::ResourceLimit {
                what: "plan enumeration",
                size,
                limit,
            });
        }
        per_step.push(combos.into_iter().map(JointAction).collect());
    }
    let mut plans: Vec<Vec<JointAction>> = vec![Vec::new()];
    for options in &per_step {
        plans = plans
            .into_iter()
            .flat_map(|p| {
                options.iter().map(move |a| {
                    let mut p = p.clone();
                    p.push(a.clone());
                    p
                })
            })
            .collect();
    }
    Ok(plans
        .into_iter()
        .map(|steps| Plan { start, steps })
        .filter(|p| g.check_plan(p).is_ok())
        .collect())
}

/// Class of plans agreeing with `p` on every coalition agent's action.
pub fn compatible_plans(m: &Psmas, p: &Plan, coalition: &[AgentId]) -> Result<CompatClass, TraceError> {
    compatible_plans_limited(m, p, coalition, DEFAULT_PATH_LIMIT)
}

pub fn compatible_plans_limited(
    m: &Psmas,
    p: &Plan,
    coalition: &[AgentId],
    limit: usize,
) -> Result<CompatClass, TraceError> {
    m.csg().check_plan(p).map_err(TraceError::IllFormedPlan)?;
    let members = plans_matching(
        m,
        p.start,
        p.steps.len(),
        |step, i| coalition.contains(&i).then(|| p.steps[step].get(i)),
        limit,
    )?;
    let mut coalition = coalition.to_vec();
    coalition.sort_unstable();
    coalition.dedup();
    Ok(CompatClass {
        anchor: p.clone(),
        coalition,
        members,
    })
}

/// Whether two plans agree on the coalition's actions at every step.
pub fn are_compatible(a: &Plan, b: &Plan, coalition: &[AgentId]) -> bool {
    a.start == b.start
        && a.steps.len() == b.steps.len()
        && a.steps
            .iter()
            .zip(&b.steps)
            .all(|(x, y)| coalition.iter().all(|i| x.get(*i) == y.get(*i)))
}

/// `Σ_j (r_a(α_j) + r_s(s_j)) · transition(s_j, α_j, s_{j+1})`.
pub fn payoff(m: &Psmas, h: &History, r: &RewardStructure) -> Polynomial {
    let mut total = Polynomial::zero();
    for (j, a) in h.actions.iter().enumerate() {
        let w: Rational = r.action(a) + r.state(h.states[j]);
        if w.is_zero() {
            continue;
        }
        let step = m.transition(h.states[j], a, h.states[j + 1]);
        total = &total + &step.scale(&w);
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    Open,
}

/// Histories that stop as soon as a path property is decided. `classify`
/// sees the step index and the current state; a history still open at
/// `depth` counts as violating. Only joint actions accepted by `allowed` are
/// followed. Returns each decided history with its verdict (`true` for
/// satisfied).
pub fn decided_histories(
    m: &Psmas,
    s: StateId,
    depth: usize,
    allowed: &dyn Fn(usize, &JointAction) -> bool,
    classify: &dyn Fn(usize, StateId) -> Verdict,
    limit: usize,
) -> Result<Vec<(History, bool)>, TraceError> {
    let mut out = Vec::new();
    let mut layer = vec![History::start(s)];
    let mut visited: u128 = 1;
    for step in 0..=depth {
        let mut next = Vec::new();
        for h in layer {
            match classify(step, h.last()) {
                Verdict::Satisfied => out.push((h, true)),
                Verdict::Violated => out.push((h, false)),
                Verdict::Open if step == depth => out.push((h, false)),
                Verdict::Open => {
                    for tr in m.transitions(h.last()) {
                        if allowed(step, &tr.action) {
                            next.push(h.extend(&tr.action, tr.target, &tr.prob));
                        }
                    }
                }
            }
        }
        visited += next.len() as u128;
        if visited > limit as u128 {
            return Err(TraceError::ResourceLimit {
                what: "history enumeration",
                size: visited,
                limit,
            });
        }
        layer = next;
    }
    Ok(out)
}

/// Union (as a set of histories) of the decided histories of every plan in
/// `plans`, keeping those with the requested verdict.
pub fn decided_plan_union(
    m: &Psmas,
    plans: &[Plan],
    depth: usize,
    classify: &dyn Fn(usize, StateId) -> Verdict,
    want: bool,
    limit: usize,
) -> Result<BTreeMap<(Vec<StateId>, Vec<JointAction>), Polynomial>, TraceError> {
    let mut out = BTreeMap::new();
    for p in plans {
        let allowed = |step: usize, a: &JointAction| p.steps.get(step) == Some(a);
        for (h, v) in decided_histories(m, p.start, depth, &allowed, classify, limit)? {
            if v == want {
                let key = h.key();
                out.entry(key).or_insert(h.prob);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_psmas, parse_model};

    fn fixture(name: &str) -> Psmas {
        let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
        build_psmas(parse_model(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
    }

    fn p(s: &str) -> Polynomial {
        Polynomial::parse(s).unwrap()
    }

    #[test]
    fn depth_one_histories() {
        let m = fixture("ball.game");
        let hs = enumerate_histories(&m, 0, 1).unwrap();
        let probs: Vec<Polynomial> = hs.iter().map(|h| h.prob.clone()).collect();
        assert_eq!(hs.len(), 4);
        for want in ["x1*x2", "(1-x1)*(1-x2)", "(1-x1)*x2", "x1*(1-x2)"] {
            assert!(probs.contains(&p(want)), "{want}");
        }
        assert_eq!(enumerate_histories(&m, 0, 0).unwrap(), vec![History::start(0)]);
    }

    #[test]
    fn partition_of_unity_depth_two() {
        let m = fixture("ball.game");
        let hs = enumerate_histories(&m, 0, 2).unwrap();
        assert_eq!(hs.len(), 16);
        let total: Polynomial = hs.into_iter().map(|h| h.prob).sum();
        assert!(total.is_one());
    }

    #[test]
    fn volume_limit() {
        let m = fixture("ball.game");
        assert!(matches!(
            enumerate_histories_limited(&m, 0, 8, 1000),
            Err(TraceError::ResourceLimit { .. })
        ));
    }

    #[test]
    fn plan_history_of_self_loop() {
        let m = fixture("ball.game");
        let hs = plan_histories(&m, m.csg().plan("pi_skip").unwrap());
        assert_eq!(hs.len(), 1);
        assert_eq!(hs[0].states, vec![0, 0]);
        assert_eq!(hs[0].prob, p("x1*x2"));
    }

    #[test]
    fn compatibility_classes() {
        let m = fixture("ball.game");
        let g = m.csg();
        let pi1 = g.plan("pi1").unwrap();
        let pi2 = g.plan("pi2").unwrap();
        let c = compatible_plans(&m, pi1, &[0]).unwrap();
        assert!(c.contains(pi2));
        assert!(c.contains(pi1));
        assert_eq!(c.members.len(), 4);
        assert_eq!(compatible_plans(&m, pi1, &[0, 1]).unwrap().members, vec![pi1.clone()]);
        assert_eq!(compatible_plans(&m, pi1, &[]).unwrap().members.len(), 16);
    }

    #[test]
    fn example_payoff() {
        let m = fixture("ball.game");
        let pi1 = m.csg().plan("pi1").unwrap();
        let r = m.csg().reward(0);
        let total: Polynomial = plan_histories(&m, pi1).iter().map(|h| payoff(&m, h, r)).sum();
        assert_eq!(total, p("2*(1-x1)*x2 + x1*(1-x2)"));
    }
}
