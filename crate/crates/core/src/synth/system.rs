use std::collections::{BTreeMap, BTreeSet};

use crate::model::{ActionId, Psmas};
use crate::polyarith::{ParamId, ParamValuation, PolyError, Polynomial};

use super::{vertex_bindings, SynthError, Utility};

/// Actions assumed to be played with positive probability, per strategy
/// group index.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Support(pub Vec<(usize, Vec<ActionId>)>);

/// Polynomial equations `eq = 0` over `variables`, each variable in [0,1]
/// and each `simplex` block summing to at most 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeSystem {
    pub variables: Vec<ParamId>,
    pub equations: Vec<Polynomial>,
    pub simplex: Vec<Vec<usize>>,
    /// Eliminated parameters as polynomials in `variables`.
    pub bindings: BTreeMap<ParamId, Polynomial>,
    pub support: Support,
}

impl NeSystem {
    pub fn standalone(variables: Vec<ParamId>, equations: Vec<Polynomial>) -> NeSystem {
        NeSystem {
            variables,
            equations,
            simplex: Vec::new(),
            bindings: BTreeMap::new(),
            support: Support::default(),
        }
    }

    /// The solved variables together with the eliminated parameters.
    pub fn full_valuation(&self, v: &ParamValuation) -> Result<ParamValuation, PolyError> {
        let mut out = v.clone();
        for (p, e) in &self.bindings {
            out.set(p.clone(), e.eval(v)?);
        }
        Ok(out)
    }
}

/// Strategy groups whose parameters influence some utility.
pub fn relevant_groups(m: &Psmas, utils: &[Utility]) -> Vec<usize> {
    let used: BTreeSet<ParamId> = utils.iter().flat_map(|u| u.params()).collect();
    (0..m.groups().len())
        .filter(|g| m.groups()[*g].free_params().iter().any(|p| used.contains(p)))
        .collect()
}

/// Every combination of non-empty action subsets over the relevant groups,
/// full supports first.
pub fn support_profiles(m: &Psmas, utils: &[Utility], limit: usize) -> Result<Vec<Support>, SynthError> {
    let groups = relevant_groups(m, utils);
    let count: f64 = groups
        .iter()
        .map(|g| 2f64.powi(m.groups()[*g].actions.len() as i32) - 1.0)
        .product();
    if count > limit as f64 {
        return Err(SynthError::Unsupported(format!(
            "{count} support profiles exceed the limit of {limit}"
        )));
    }
    let mut out = vec![Support::default()];
    for g in groups {
        let acts = &m.groups()[g].actions;
        let subsets: Vec<Vec<ActionId>> = (1u32..(1 << acts.len()))
            .rev()
            .map(|mask| {
                acts.iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, a)| *a)
                    .collect()
            })
            .collect();
        out = out
            .into_iter()
            .flat_map(|s| {
                subsets.iter().map(move |sub| {
                    let mut s = s.clone();
                    s.0.push((g, sub.clone()));
                    s
                })
            })
            .collect();
    }
    Ok(out)
}

/// Indifference equations between every pair of supported actions of the
/// same strategy group, with unsupported actions pinned to 0.
pub fn build_ne_system(m: &Psmas, utils: &[Utility], support: &Support) -> Result<NeSystem, SynthError> {
    let mut variables = Vec::new();
    let mut simplex = Vec::new();
    let mut bindings: BTreeMap<ParamId, Polynomial> = BTreeMap::new();
    for (g, acts) in &support.0 {
        let group = &m.groups()[*g];
        let free = group.free_params();
        let supported: Vec<usize> = (0..free.len()).filter(|k| acts.contains(&group.actions[*k])).collect();
        for (k, p) in free.iter().enumerate() {
            if !supported.contains(&k) {
                bindings.insert(p.clone(), Polynomial::zero());
            }
        }
        let dependent_supported = acts.contains(group.actions.last().expect("group has actions"));
        let mut kept = supported.clone();
        if !dependent_supported {
            let last = kept.pop().expect("support is non-empty");
            let rest: Polynomial = kept.iter().map(|k| Polynomial::var(free[*k].clone())).sum();
            bindings.insert(free[last].clone(), Polynomial::one_minus(&rest));
        }
        let block: Vec<usize> = (variables.len()..variables.len() + kept.len()).collect();
        variables.extend(kept.iter().map(|k| free[*k].clone()));
        if !block.is_empty() {
            simplex.push(block);
        }
    }

    let mut equations = Vec::new();
    for (g, acts) in &support.0 {
        if acts.len() < 2 {
            continue;
        }
        let group = &m.groups()[*g];
        let u = &utils[group.agent];
        let at = |a: ActionId| -> Result<_, SynthError> {
            let mut b = bindings.clone();
            for (p, x) in vertex_bindings(m, *g, a) {
                b.insert(p, Polynomial::constant(x));
            }
            u.substitute(&b)
        };
        let values: Vec<_> = acts.iter().map(|a| at(*a)).collect::<Result<_, _>>()?;
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let (a, b) = (&values[i], &values[j]);
                let eq = &(a.numer() * b.denom()) - &(b.numer() * a.denom());
                if !eq.is_zero() {
                    equations.push(eq);
                }
            }
        }
    }
    Ok(NeSystem {
        variables,
        equations,
        simplex,
        bindings,
        support: support.clone(),
    })
}
