//! Game models: concurrent stochastic games with reward structures, and the
//! parametric system obtained by replacing each agent's action choice with a
//! strategy parameter.

mod parse;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use crate::polyarith::{format_rational, ParamId, ParamValuation, PolyError, Polynomial, Rational};

pub use parse::parse_model;

pub type AgentId = usize;
pub type StateId = usize;
pub type ActionId = usize;

/// One action per agent, in declared agent order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointAction(pub Vec<ActionId>);

impl JointAction {
    pub fn get(&self, agent: AgentId) -> ActionId {
        self.0[agent]
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Per-agent rewards. Action rewards may be given per individual action
/// (read off the agent's component of the joint action) or per joint action;
/// the joint form takes precedence. Unspecified rewards are 0.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RewardStructure {
    pub agent: AgentId,
    pub state_reward: BTreeMap<StateId, Rational>,
    pub own_action_reward: BTreeMap<ActionId, Rational>,
    pub joint_action_reward: BTreeMap<JointAction, Rational>,
}

impl RewardStructure {
    pub fn new(agent: AgentId) -> Self {
        RewardStructure {
            agent,
            ..Default::default()
        }
    }

    pub fn state(&self, s: StateId) -> Rational {
        self.state_reward.get(&s).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn action(&self, a: &JointAction) -> Rational {
        if let Some(r) = self.joint_action_reward.get(a) {
            return r.clone();
        }
        self.own_action_reward
            .get(&a.get(self.agent))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.state_reward.values().all(Zero::is_zero)
            && self.own_action_reward.values().all(Zero::is_zero)
            && self.joint_action_reward.values().all(Zero::is_zero)
    }
}

/// A pure joint plan: one joint action per step, applied from `start`
/// regardless of the states visited.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Plan {
    pub start: StateId,
    pub steps: Vec<JointAction>,
}

/// Declaration tying one action's parameter across several states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamDecl {
    pub name: String,
    pub agent: AgentId,
    pub action: ActionId,
    pub states: Vec<StateId>,
}

/// A concurrent stochastic game with labels, rewards and named plans.
#[derive(Clone, Debug)]
pub struct Csg {
    agents: Vec<String>,
    states: Vec<String>,
    actions: Vec<String>,
    initial: StateId,
    available: Vec<Vec<Vec<ActionId>>>,
    delta: Vec<BTreeMap<JointAction, Vec<(StateId, Rational)>>>,
    labels: Vec<BTreeSet<String>>,
    rewards: Vec<RewardStructure>,
    plans: BTreeMap<String, Plan>,
    param_decls: Vec<ParamDecl>,
}

/// Incremental construction of a [`Csg`]; `build` checks every invariant.
#[derive(Clone, Debug, Default)]
pub struct CsgBuilder {
    agents: Vec<String>,
    states: Vec<String>,
    actions: Vec<String>,
    initial: Option<StateId>,
    available: BTreeMap<(AgentId, StateId), Vec<ActionId>>,
    delta: BTreeMap<(StateId, JointAction), Vec<(StateId, Rational)>>,
    labels: BTreeMap<StateId, BTreeSet<String>>,
    rewards: BTreeMap<AgentId, RewardStructure>,
    plans: BTreeMap<String, Plan>,
    param_decls: Vec<ParamDecl>,
}

fn find(names: &[String], name: &str, kind: &'static str) -> Result<usize, ModelError> {
    names.iter().position(|n| n == name).ok_or_else(|| ModelError::Unknown {
        kind,
        name: name.to_string(),
    })
}

impl CsgBuilder {
    pub fn new<S: AsRef<str>>(agents: &[S], states: &[S]) -> Self {
        CsgBuilder {
            agents: agents.iter().map(|a| a.as_ref().to_string()).collect(),
            states: states.iter().map(|s| s.as_ref().to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn agent(&self, name: &str) -> Result<AgentId, ModelError> {
        find(&self.agents, name, "agent")
    }

    pub fn state(&self, name: &str) -> Result<StateId, ModelError> {
        find(&self.states, name, "state")
    }

    pub fn action(&self, name: &str) -> Result<ActionId, ModelError> {
        find(&self.actions, name, "action")
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial(&mut self, state: &str) -> Result<&mut Self, ModelError> {
        self.initial = Some(self.state(state)?);
        Ok(self)
    }

    pub fn label(&mut self, state: &str, prop: &str) -> Result<&mut Self, ModelError> {
        let s = self.state(state)?;
        self.labels.entry(s).or_default().insert(prop.to_string());
        Ok(self)
    }

    /// Declare the actions of `agent` at `state`; the last one is the action
    /// whose probability is eliminated as one minus the others.
    pub fn actions(&mut self, agent: &str, state: &str, actions: &[&str]) -> Result<&mut Self, ModelError> {
        let (i, s) = (self.agent(agent)?, self.state(state)?);
        if actions.is_empty() {
            return Err(ModelError::Invalid(format!("agent {agent} has no actions at {state}")));
        }
        let mut ids = Vec::new();
        for a in actions {
            let id = match self.actions.iter().position(|n| n == a) {
                Some(id) => id,
                None => {
                    self.actions.push(a.to_string());
                    self.actions.len() - 1
                }
            };
            if ids.contains(&id) {
                return Err(ModelError::Invalid(format!(
                    "duplicate action {a} for {agent} at {state}"
                )));
            }
            ids.push(id);
        }
        if self.available.insert((i, s), ids).is_some() {
            return Err(ModelError::Invalid(format!(
                "actions of {agent} at {state} declared twice"
            )));
        }
        Ok(self)
    }

    pub fn available(&self, agent: AgentId, state: StateId) -> Option<&[ActionId]> {
        self.available.get(&(agent, state)).map(Vec::as_slice)
    }

    pub fn param(&mut self, name: &str, agent: &str, action: &str, states: &[&str]) -> Result<&mut Self, ModelError> {
        let decl = ParamDecl {
            name: name.to_string(),
            agent: self.agent(agent)?,
            action: self.action(action)?,
            states: states.iter().map(|s| self.state(s)).collect::<Result<_, _>>()?,
        };
        self.param_decls.push(decl);
        Ok(self)
    }

    pub fn transition(
        &mut self,
        state: &str,
        joint: &[&str],
        dist: &[(&str, Rational)],
    ) -> Result<&mut Self, ModelError> {
        let s = self.state(state)?;
        let ja = JointAction(joint.iter().map(|a| self.action(a)).collect::<Result<_, _>>()?);
        let d = dist
            .iter()
            .map(|(t, p)| Ok((self.state(t)?, p.clone())))
            .collect::<Result<Vec<_>, ModelError>>()?;
        self.transition_ids(s, ja, d)
    }

    pub(crate) fn transition_ids(
        &mut self,
        s: StateId,
        ja: JointAction,
        dist: Vec<(StateId, Rational)>,
    ) -> Result<&mut Self, ModelError> {
        if self.delta.contains_key(&(s, ja.clone())) {
            return Err(ModelError::Invalid(format!(
                "duplicate transition for {} at {}",
                self.render_joint(&ja),
                self.states[s]
            )));
        }
        let mut merged: BTreeMap<StateId, Rational> = BTreeMap::new();
        for (t, p) in dist {
            *merged.entry(t).or_insert_with(Rational::zero) += p;
        }
        self.delta.insert((s, ja), merged.into_iter().collect());
        Ok(self)
    }

    pub(crate) fn has_transition(&self, s: StateId, ja: &JointAction) -> bool {
        self.delta.contains_key(&(s, ja.clone()))
    }

    fn render_joint(&self, ja: &JointAction) -> String {
        let names: Vec<&str> = ja.0.iter().map(|a| self.actions[*a].as_str()).collect();
        format!("({})", names.join(", "))
    }

    pub fn state_reward(&mut self, agent: &str, state: &str, r: Rational) -> Result<&mut Self, ModelError> {
        let (i, s) = (self.agent(agent)?, self.state(state)?);
        self.rewards
            .entry(i)
            .or_insert_with(|| RewardStructure::new(i))
            .state_reward
            .insert(s, r);
        Ok(self)
    }

    pub fn action_reward(&mut self, agent: &str, action: &str, r: Rational) -> Result<&mut Self, ModelError> {
        let (i, a) = (self.agent(agent)?, self.action(action)?);
        self.rewards
            .entry(i)
            .or_insert_with(|| RewardStructure::new(i))
            .own_action_reward
            .insert(a, r);
        Ok(self)
    }

    pub fn joint_reward(&mut self, agent: &str, joint: &[&str], r: Rational) -> Result<&mut Self, ModelError> {
        let i = self.agent(agent)?;
        let ja = JointAction(joint.iter().map(|a| self.action(a)).collect::<Result<_, _>>()?);
        if ja.0.len() != self.agents.len() {
            return Err(ModelError::Invalid(format!(
                "joint action arity {} != {}",
                ja.0.len(),
                self.agents.len()
            )));
        }
        self.rewards
            .entry(i)
            .or_insert_with(|| RewardStructure::new(i))
            .joint_action_reward
            .insert(ja, r);
        Ok(self)
    }

    pub fn plan(&mut self, name: &str, start: &str, steps: &[&[&str]]) -> Result<&mut Self, ModelError> {
        let start = self.state(start)?;
        let steps = steps
            .iter()
            .map(|j| Ok(JointAction(j.iter().map(|a| self.action(a)).collect::<Result<_, _>>()?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        if self.plans.insert(name.to_string(), Plan { start, steps }).is_some() {
            return Err(ModelError::Invalid(format!("plan {name} declared twice")));
        }
        Ok(self)
    }

    pub fn build(self) -> Result<Csg, ModelError> {
        let n_agents = self.agents.len();
        let n_states = self.states.len();
        if n_agents == 0 || n_states == 0 {
            return Err(ModelError::Invalid(
                "a model needs at least one agent and one state".into(),
            ));
        }
        let initial = self
            .initial
            .ok_or_else(|| ModelError::Invalid("missing initial state".into()))?;
        let mut available = vec![vec![Vec::new(); n_agents]; n_states];
        for s in 0..n_states {
            for (i, slot) in available[s].iter_mut().enumerate() {
                *slot = self.available.get(&(i, s)).cloned().ok_or_else(|| {
                    ModelError::Invalid(format!(
                        "no actions declared for {} at {}",
                        self.agents[i], self.states[s]
                    ))
                })?;
            }
        }
        let mut delta = vec![BTreeMap::new(); n_states];
        for ((s, ja), dist) in &self.delta {
            if ja.0.len() != n_agents || ja.0.iter().enumerate().any(|(i, a)| !available[*s][i].contains(a)) {
                return Err(ModelError::Invalid(format!(
                    "transition {} at {} uses unavailable actions",
                    self.render_joint(ja),
                    self.states[*s]
                )));
            }
            delta[*s].insert(ja.clone(), dist.clone());
        }
        for (s, row) in delta.iter().enumerate() {
            for ja in joint_actions_of(&available[s]) {
                let dist = row.get(&ja).ok_or_else(|| {
                    ModelError::Invalid(format!(
                        "no transition for {} at {}",
                        self.render_joint(&ja),
                        self.states[s]
                    ))
                })?;
                let mut total = Rational::zero();
                for (_, p) in dist {
                    if *p < Rational::zero() || *p > Rational::one() {
                        return Err(ModelError::Invalid(format!(
                            "probability {} outside [0,1] at {}",
                            format_rational(p),
                            self.states[s]
                        )));
                    }
                    total += p;
                }
                if !total.is_one() {
                    return Err(ModelError::Invalid(format!(
                        "distribution for {} at {} sums to {}",
                        self.render_joint(&ja),
                        self.states[s],
                        format_rational(&total)
                    )));
                }
            }
        }
        let labels = (0..n_states)
            .map(|s| self.labels.get(&s).cloned().unwrap_or_default())
            .collect();
        let rewards = (0..n_agents)
            .map(|i| self.rewards.get(&i).cloned().unwrap_or_else(|| RewardStructure::new(i)))
            .collect();
        let csg = Csg {
            agents: self.agents,
            states: self.states,
            actions: self.actions,
            initial,
            available,
            delta,
            labels,
            rewards,
            plans: self.plans,
            param_decls: self.param_decls,
        };
        for (name, plan) in &csg.plans {
            csg.check_plan(plan)
                .map_err(|e| ModelError::Invalid(format!("plan {name}: {e}")))?;
        }
        Ok(csg)
    }
}

fn joint_actions_of(per_agent: &[Vec<ActionId>]) -> Vec<JointAction> {
    let mut out = vec![Vec::with_capacity(per_agent.len())];
    for acts in per_agent {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                acts.iter().map(move |a| {
                    let mut v = prefix.clone();
                    v.push(*a);
                    v
                })
            })
            .collect();
    }
    out.into_iter().map(JointAction).collect()
}

impl Csg {
    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn agent_id(&self, name: &str) -> Result<AgentId, ModelError> {
        find(&self.agents, name, "agent")
    }

    pub fn state_id(&self, name: &str) -> Result<StateId, ModelError> {
        find(&self.states, name, "state")
    }

    pub fn action_id(&self, name: &str) -> Result<ActionId, ModelError> {
        find(&self.actions, name, "action")
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a]
    }

    pub fn available(&self, agent: AgentId, state: StateId) -> &[ActionId] {
        &self.available[state][agent]
    }

    /// Every action the agent can take somewhere in the model, in first
    /// declaration order.
    pub fn all_actions_of(&self, agent: AgentId) -> Vec<ActionId> {
        let mut out = Vec::new();
        for s in 0..self.states.len() {
            for a in &self.available[s][agent] {
                if !out.contains(a) {
                    out.push(*a);
                }
            }
        }
        out
    }

    /// Joint actions available at `s`, first agent varying slowest.
    pub fn joint_actions(&self, s: StateId) -> Vec<JointAction> {
        joint_actions_of(&self.available[s])
    }

    pub fn delta(&self, s: StateId, a: &JointAction) -> &[(StateId, Rational)] {
        self.delta[s].get(a).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn labels(&self, s: StateId) -> &BTreeSet<String> {
        &self.labels[s]
    }

    pub fn propositions(&self) -> BTreeSet<String> {
        self.labels.iter().flatten().cloned().collect()
    }

    pub fn reward(&self, agent: AgentId) -> &RewardStructure {
        &self.rewards[agent]
    }

    pub fn plans(&self) -> &BTreeMap<String, Plan> {
        &self.plans
    }

    pub fn plan(&self, name: &str) -> Result<&Plan, ModelError> {
        self.plans.get(name).ok_or_else(|| ModelError::Unknown {
            kind: "plan",
            name: name.to_string(),
        })
    }

    pub fn param_decls(&self) -> &[ParamDecl] {
        &self.param_decls
    }

    pub fn render_joint(&self, ja: &JointAction) -> String {
        let names: Vec<&str> = ja.0.iter().map(|a| self.actions[*a].as_str()).collect();
        format!("({})", names.join(", "))
    }

    pub fn render_plan(&self, p: &Plan) -> String {
        let steps: Vec<String> = p.steps.iter().map(|j| self.render_joint(j)).collect();
        format!("{} @ {}", steps.join(" "), self.states[p.start])
    }

    /// A plan is well formed when every step's joint action is available at
    /// every state reachable by following the earlier steps.
    pub fn check_plan(&self, p: &Plan) -> Result<(), String> {
        self.check_plan_from(p, p.start)
    }

    pub fn check_plan_from(&self, p: &Plan, start: StateId) -> Result<(), String> {
        let mut frontier: BTreeSet<StateId> = [start].into();
        for (k, ja) in p.steps.iter().enumerate() {
            if ja.0.len() != self.agents.len() {
                return Err(format!(
                    "step {k} has {} actions for {} agents",
                    ja.0.len(),
                    self.agents.len()
                ));
            }
            let mut next = BTreeSet::new();
            for &s in &frontier {
                let ok = ja.0.iter().enumerate().all(|(i, a)| self.available[s][i].contains(a));
                if !ok {
                    return Err(format!(
                        "step {k} {} is not available at {}",
                        self.render_joint(ja),
                        self.states[s]
                    ));
                }
                next.extend(self.delta(s, ja).iter().filter(|(_, p)| !p.is_zero()).map(|(t, _)| *t));
            }
            frontier = next;
        }
        Ok(())
    }
}

/// The action choices of one agent at a set of states sharing one
/// distribution. One parameter per action; the last action's parameter is
/// eliminated as one minus the others.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyGroup {
    pub agent: AgentId,
    pub states: Vec<StateId>,
    pub actions: Vec<ActionId>,
    pub params: Vec<ParamId>,
}

impl StrategyGroup {
    pub fn free_params(&self) -> &[ParamId] {
        &self.params[..self.params.len() - 1]
    }

    pub fn dependent_param(&self) -> &ParamId {
        &self.params[self.params.len() - 1]
    }

    /// Probability of the `k`-th action as a polynomial in the free
    /// parameters.
    pub fn action_poly(&self, k: usize) -> Polynomial {
        let free = self.free_params();
        if k < free.len() {
            Polynomial::var(free[k].clone())
        } else {
            let sum: Polynomial = free.iter().map(|p| Polynomial::var(p.clone())).sum();
            Polynomial::one_minus(&sum)
        }
    }

    pub fn position(&self, a: ActionId) -> Option<usize> {
        self.actions.iter().position(|b| *b == a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub action: JointAction,
    pub target: StateId,
    pub prob: Polynomial,
}

/// Parametric stochastic multi-agent system built from a [`Csg`].
#[derive(Clone, Debug)]
pub struct Psmas {
    base: Csg,
    groups: Vec<StrategyGroup>,
    group_of: Vec<Vec<usize>>,
    transitions: Vec<Vec<Transition>>,
    free: Vec<ParamId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    /// 1: transition value, 2: action probability, 3: simplex sum.
    pub condition: u8,
    pub location: String,
    pub value: Rational,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "condition {} violated at {} (value {})",
            self.condition,
            self.location,
            format_rational(&self.value)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdmissibilityReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

fn in_unit(x: &Rational) -> bool {
    *x >= Rational::zero() && *x <= Rational::one()
}

/// Build the parametric system: one parameter per agent, state group and
/// action, with
/// `transition(s, α, t) = δ(s, α)(t) · Π_i x_{i, s, α_i}`.
pub fn build_psmas(g: Csg) -> Result<Psmas, ModelError> {
    let n_states = g.states.len();
    let n_agents = g.agents.len();
    let mut group_of = vec![vec![usize::MAX; n_agents]; n_states];
    let mut groups: Vec<StrategyGroup> = Vec::new();

    // Tied groups: declarations sharing agent and state list form one group.
    let mut tied: BTreeMap<(AgentId, Vec<StateId>), Vec<&ParamDecl>> = BTreeMap::new();
    for d in &g.param_decls {
        let mut states = d.states.clone();
        states.sort_unstable();
        states.dedup();
        tied.entry((d.agent, states)).or_default().push(d);
    }
    let mut used_names: BTreeSet<String> = BTreeSet::new();
    for ((agent, states), decls) in tied {
        let actions = g.available[states[0]][agent].clone();
        for &s in &states {
            if g.available[s][agent] != actions {
                return Err(ModelError::Invalid(format!(
                    "cannot tie parameters of {} across states with different actions ({} vs {})",
                    g.agents[agent], g.states[states[0]], g.states[s]
                )));
            }
            if group_of[s][agent] != usize::MAX {
                return Err(ModelError::Invalid(format!(
                    "state {} of {} belongs to two parameter groups",
                    g.states[s], g.agents[agent]
                )));
            }
            group_of[s][agent] = groups.len();
        }
        let mut params: Vec<ParamId> = actions
            .iter()
            .map(|a| default_param_name(&g, agent, states[0], *a))
            .collect();
        for d in decls {
            let k = actions.iter().position(|a| *a == d.action).ok_or_else(|| {
                ModelError::Invalid(format!(
                    "parameter {}: {} has no action {}",
                    d.name, g.agents[agent], g.actions[d.action]
                ))
            })?;
            params[k] = ParamId::new(&d.name);
        }
        groups.push(StrategyGroup {
            agent,
            states,
            actions,
            params,
        });
    }
    for s in 0..n_states {
        for i in 0..n_agents {
            if group_of[s][i] == usize::MAX {
                group_of[s][i] = groups.len();
                let actions = g.available[s][i].clone();
                let params = actions.iter().map(|a| default_param_name(&g, i, s, *a)).collect();
                groups.push(StrategyGroup {
                    agent: i,
                    states: vec![s],
                    actions,
                    params,
                });
            }
        }
    }
    for gr in &groups {
        for p in &gr.params {
            if !used_names.insert(p.name().to_string()) {
                return Err(ModelError::Invalid(format!("parameter name {p} used twice")));
            }
        }
    }
    groups.sort_by(|a, b| (a.agent, &a.states).cmp(&(b.agent, &b.states)));
    for (k, gr) in groups.iter().enumerate() {
        for &s in &gr.states {
            group_of[s][gr.agent] = k;
        }
    }

    let mut transitions = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let mut row = Vec::new();
        for ja in g.joint_actions(s) {
            let choice: Polynomial = (0..n_agents)
                .map(|i| {
                    let gr = &groups[group_of[s][i]];
                    gr.action_poly(gr.position(ja.get(i)).expect("available action"))
                })
                .product();
            for (t, p) in g.delta(s, &ja) {
                if p.is_zero() {
                    continue;
                }
                row.push(Transition {
                    action: ja.clone(),
                    target: *t,
                    prob: choice.scale(p),
                });
            }
        }
        transitions.push(row);
    }
    let free = groups.iter().flat_map(|gr| gr.free_params().iter().cloned()).collect();
    Ok(Psmas {
        base: g,
        groups,
        group_of,
        transitions,
        free,
    })
}

fn default_param_name(g: &Csg, agent: AgentId, state: StateId, action: ActionId) -> ParamId {
    ParamId::new(format!(
        "x_{}_{}_{}",
        g.agents[agent], g.states[state], g.actions[action]
    ))
}

impl Psmas {
    pub fn csg(&self) -> &Csg {
        &self.base
    }

    pub fn groups(&self) -> &[StrategyGroup] {
        &self.groups
    }

    pub fn group(&self, agent: AgentId, state: StateId) -> &StrategyGroup {
        &self.groups[self.group_of[state][agent]]
    }

    pub fn group_index(&self, agent: AgentId, state: StateId) -> usize {
        self.group_of[state][agent]
    }

    /// Free (non-eliminated) parameters in group order.
    pub fn free_params(&self) -> &[ParamId] {
        &self.free
    }

    pub fn owner(&self, p: &ParamId) -> Option<AgentId> {
        self.groups.iter().find(|g| g.params.contains(p)).map(|g| g.agent)
    }

    pub fn agent_free_params(&self, agent: AgentId) -> Vec<ParamId> {
        self.groups
            .iter()
            .filter(|g| g.agent == agent)
            .flat_map(|g| g.free_params().iter().cloned())
            .collect()
    }

    pub fn transitions(&self, s: StateId) -> &[Transition] {
        &self.transitions[s]
    }

    pub fn transition(&self, s: StateId, a: &JointAction, t: StateId) -> Polynomial {
        self.transitions[s]
            .iter()
            .find(|tr| tr.action == *a && tr.target == t)
            .map(|tr| tr.prob.clone())
            .unwrap_or_default()
    }

    pub fn action_prob(&self, agent: AgentId, state: StateId, action: ActionId) -> Option<Polynomial> {
        let g = self.group(agent, state);
        g.position(action).map(|k| g.action_poly(k))
    }

    /// Completes a valuation of the free parameters with the derived values
    /// of eliminated parameters.
    pub fn derived_valuation(&self, v: &ParamValuation) -> Result<ParamValuation, ModelError> {
        let mut out = v.clone();
        for g in &self.groups {
            let dep = g.action_poly(g.actions.len() - 1).eval(v)?;
            out.set(g.dependent_param().clone(), dep);
        }
        Ok(out)
    }

    /// Admissibility of a valuation: transition values and action
    /// probabilities within [0,1], and per-group probabilities summing to 1.
    /// Eliminated parameters may be given explicitly; they are then checked
    /// against the simplex identity instead of being derived.
    pub fn check_admissible(&self, v: &ParamValuation) -> Result<AdmissibilityReport, ModelError> {
        for p in &self.free {
            if !v.contains(p) {
                return Err(PolyError::MissingParameter(p.clone()).into());
            }
        }
        Ok(self.admissibility(v))
    }

    /// As [`Psmas::check_admissible`] but only checks what the assigned
    /// parameters determine.
    pub fn check_admissible_partial(&self, v: &ParamValuation) -> AdmissibilityReport {
        self.admissibility(v)
    }

    fn admissibility(&self, v: &ParamValuation) -> AdmissibilityReport {
        let mut violations = Vec::new();
        for g in &self.groups {
            let free = g.free_params();
            let mut values = Vec::new();
            for p in free {
                if let Some(x) = v.get(p) {
                    if !in_unit(x) {
                        violations.push(Violation {
                            condition: 2,
                            location: p.to_string(),
                            value: x.clone(),
                        });
                    }
                    values.push(x.clone());
                }
            }
            let complete = values.len() == free.len();
            let dep = g.dependent_param();
            match v.get(dep) {
                Some(x) if free.is_empty() || complete => {
                    if !in_unit(x) {
                        violations.push(Violation {
                            condition: 2,
                            location: dep.to_string(),
                            value: x.clone(),
                        });
                    }
                    let total: Rational = values.iter().cloned().sum::<Rational>() + x;
                    if !total.is_one() {
                        violations.push(Violation {
                            condition: 3,
                            location: format!("{} at {}", self.base.agents[g.agent], self.group_states(g)),
                            value: total,
                        });
                    }
                }
                _ if complete => {
                    let derived = Rational::one() - values.iter().cloned().sum::<Rational>();
                    if !in_unit(&derived) {
                        violations.push(Violation {
                            condition: 2,
                            location: dep.to_string(),
                            value: derived,
                        });
                    }
                }
                _ => {}
            }
        }
        for (s, row) in self.transitions.iter().enumerate() {
            for tr in row {
                if let Ok(x) = tr.prob.eval(v) {
                    if !in_unit(&x) {
                        violations.push(Violation {
                            condition: 1,
                            location: format!(
                                "{} --{}--> {}",
                                self.base.states[s],
                                self.base.render_joint(&tr.action),
                                self.base.states[tr.target]
                            ),
                            value: x,
                        });
                    }
                }
            }
        }
        AdmissibilityReport {
            ok: violations.is_empty(),
            violations,
        }
    }

    fn group_states(&self, g: &StrategyGroup) -> String {
        let names: Vec<&str> = g.states.iter().map(|s| self.base.states[*s].as_str()).collect();
        names.join(",")
    }

    /// Exact transition matrix at a valuation: per state, the list of
    /// (joint action, successor, probability).
    pub fn instantiate(&self, v: &ParamValuation) -> Result<Vec<Vec<(JointAction, StateId, Rational)>>, ModelError> {
        self.transitions
            .iter()
            .map(|row| {
                row.iter()
                    .map(|tr| Ok((tr.action.clone(), tr.target, tr.prob.eval(v)?)))
                    .collect()
            })
            .collect()
    }
}
