//! Existential search over coalition parameters in Evaluated mode.

use num_traits::Zero;

use crate::logic::CompareOp;
use crate::model::{AgentId, Psmas};
use crate::polyarith::{
    rat, rational_from_f64, CompiledPoly, ParamId, ParamValuation, PolyError, Polynomial, Rational,
};

use super::{CheckError, Outcome};

/// Largest number of coalition parameters searched at once.
pub const MAX_SEARCH_DIM: usize = 6;
const GRID_STEPS: usize = 50;
const GRID_BUDGET: f64 = 2e6;

/// Free parameters of the coalition's strategy groups that occur in any of
/// `polys`, one vector per group.
pub fn coalition_params(m: &Psmas, coalition: &[AgentId], polys: &[&Polynomial]) -> Vec<Vec<ParamId>> {
    let used: std::collections::BTreeSet<ParamId> = polys.iter().flat_map(|p| p.params()).collect();
    m.groups()
        .iter()
        .filter(|g| coalition.contains(&g.agent))
        .filter(|g| g.free_params().iter().any(|p| used.contains(p)))
        .map(|g| g.free_params().to_vec())
        .collect()
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Integer points with non-negative coordinates summing to at most `n`.
pub(crate) fn lattice(dim: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(dim);
    fn rec(dim: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(dim, left - k, cur, out);
            cur.pop();
        }
    }
    rec(dim, n, &mut cur, &mut out);
    out
}

struct Objective {
    value: CompiledPoly,
    missed: CompiledPoly,
    large: bool,
}

impl Objective {
    /// Higher is better.
    fn score(&self, x: &[f64]) -> f64 {
        let v = if self.missed.eval(x) > 1e-12 {
            f64::INFINITY
        } else {
            self.value.eval(x)
        };
        if self.large {
            v
        } else {
            -v
        }
    }
}

fn feasible(x: &[f64], groups: &[usize]) -> bool {
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return false;
    }
    let mut i = 0;
    groups.iter().all(|len| {
        let s: f64 = x[i..i + len].iter().sum();
        i += len;
        s <= 1.0 + 1e-15
    })
}

fn polish(obj: &Objective, start: Vec<f64>, groups: &[usize], step: f64) -> Vec<f64> {
    let mut x = start;
    let mut best = obj.score(&x);
    let mut h = step;
    let mut iters = 0;
    while h > 1e-10 && iters < 20_000 {
        iters += 1;
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] = (y[i] + dir * h).clamp(0.0, 1.0);
                if feasible(&y, groups) {
                    let s = obj.score(&y);
                    if s > best {
                        best = s;
                        x = y;
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            h /= 2.0;
        }
    }
    x
}

/// Nearby rational with a small denominator, or the exact float value.
fn snap(x: f64) -> Rational {
    for d in [1i64, 2, 3, 4, 5, 6, 8, 10, 100, 1000] {
        let n = (x * d as f64).round();
        if (n / d as f64 - x).abs() < 1e-9 {
            return rat(n as i64, d);
        }
    }
    rational_from_f64(x)
}

fn exact_holds(
    value: &Polynomial,
    missed: &Polynomial,
    cmp: CompareOp,
    bound: &Rational,
    w: &ParamValuation,
) -> Result<bool, PolyError> {
    if missed.eval(w)? > Rational::zero() {
        return Ok(cmp.prefers_large());
    }
    Ok(cmp.holds(&value.eval(w)?, bound))
}

fn in_simplex(w: &[Rational], groups: &[usize]) -> bool {
    let mut i = 0;
    groups.iter().all(|len| {
        let part = &w[i..i + len];
        i += len;
        part.iter().all(|v| *v >= Rational::zero()) && part.iter().sum::<Rational>() <= rat(1, 1)
    })
}

/// Is there a choice of the coalition's parameters for which
/// `value cmp bound` holds? `missed` is the probability mass that makes the
/// value infinite.
pub(super) fn exists(
    m: &Psmas,
    coalition: &[AgentId],
    value: &Polynomial,
    missed: &Polynomial,
    cmp: CompareOp,
    bound: &Rational,
    v: &ParamValuation,
) -> Result<Outcome, CheckError> {
    let grouped = coalition_params(m, coalition, &[value, missed]);
    let vars: Vec<ParamId> = grouped.iter().flatten().cloned().collect();
    let mut fixed = v.clone();
    for p in &vars {
        fixed.remove(p);
    }
    let value = value.partial_eval(&fixed);
    let missed = missed.partial_eval(&fixed);
    for p in value.params().into_iter().chain(missed.params()) {
        if !vars.contains(&p) {
            return Err(PolyError::MissingParameter(p).into());
        }
    }
    if vars.is_empty() {
        let holds = exact_holds(&value, &missed, cmp, bound, &ParamValuation::new())?;
        return Ok(Outcome::Decided { holds, witness: None });
    }
    if vars.len() > MAX_SEARCH_DIM {
        return Err(CheckError::Unsupported(format!(
            "{} coalition parameters exceed the search limit of {MAX_SEARCH_DIM}",
            vars.len()
        )));
    }
    let sizes: Vec<usize> = grouped.iter().map(Vec::len).collect();
    let obj = Objective {
        value: CompiledPoly::new(&value, &vars),
        missed: CompiledPoly::new(&missed, &vars),
        large: cmp.prefers_large(),
    };

    let mut n = GRID_STEPS;
    while n > 1 && sizes.iter().map(|f| binom(n + f, *f)).product::<f64>() > GRID_BUDGET {
        n -= 1;
    }
    let per_group: Vec<Vec<Vec<usize>>> = sizes.iter().map(|f| lattice(*f, n)).collect();
    let mut idx = vec![0usize; sizes.len()];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let point: Vec<usize> = idx.iter().zip(&per_group).flat_map(|(i, g)| g[*i].clone()).collect();
        let x: Vec<f64> = point.iter().map(|k| *k as f64 / n as f64).collect();
        let s = obj.score(&x);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, point));
        }
        let mut j = 0;
        while j < idx.len() {
            idx[j] += 1;
            if idx[j] < per_group[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == idx.len() {
            break;
        }
    }
    let (_, grid_best) = best.expect("grid is non-empty");

    let grid_exact: Vec<Rational> = grid_best.iter().map(|k| rat(*k as i64, n as i64)).collect();
    let start: Vec<f64> = grid_best.iter().map(|k| *k as f64 / n as f64).collect();
    let polished = polish(&obj, start, &sizes, 1.0 / n as f64);
    let mut candidates = vec![grid_exact];
    candidates.push(polished.iter().map(|x| snap(*x)).collect());
    candidates.push(polished.iter().map(|x| rational_from_f64(*x)).collect());

    for c in candidates {
        if !in_simplex(&c, &sizes) {
            continue;
        }
        let mut w = ParamValuation::new();
        for (p, x) in vars.iter().zip(&c) {
            w.set(p.clone(), x.clone());
        }
        if exact_holds(&value, &missed, cmp, bound, &w)? {
            return Ok(Outcome::Decided {
                holds: true,
                witness: Some(w),
            });
        }
    }
    Ok(Outcome::Decided {
        holds: false,
        witness: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lattice_counts() {
        assert_eq!(lattice(1, 4).len(), 5);
        assert_eq!(lattice(2, 3).len(), 10);
        assert_eq!(binom(5, 2), 10.0);
    }

    #[test]
    fn snapping() {
        assert_eq!(snap(0.5), rat(1, 2));
        assert_eq!(snap(1.0 / 3.0 + 1e-12), rat(1, 3));
        assert_eq!(snap(0.123), rat(123, 1000));
    }
}
