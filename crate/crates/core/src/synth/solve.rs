//! Multi-start Levenberg-Marquardt on polynomial systems, with exact
//! residuals computed at rational points near the numeric roots.

use nalgebra::{DMatrix, DVector};
use num_traits::Signed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::polyarith::{rat, rational_from_f64, rational_to_f64, CompiledPoly, ParamValuation, Rational};

use super::{NeSolution, NeSystem, SynthError};

pub const MAX_VARIABLES: usize = 6;
const PRIMES: [u32; MAX_VARIABLES] = [2, 3, 5, 7, 11, 13];

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub starts: usize,
    pub seed: u64,
    /// Largest accepted exact residual.
    pub tolerance: f64,
    /// Largest accepted best-response gain.
    pub epsilon: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            starts: 64,
            seed: 0,
            tolerance: 1e-9,
            epsilon: 1e-6,
        }
    }
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as f64;
    let (mut f, mut r) = (1.0 / b, 0.0);
    while i > 0 {
        r += f * (i % base as u64) as f64;
        i /= base as u64;
        f /= b;
    }
    r
}

/// Euclidean projection onto {x >= 0, sum x <= 1}.
fn project_block(x: &mut [f64]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    if x.iter().sum::<f64>() <= 1.0 {
        return;
    }
    let mut u: Vec<f64> = x.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut tau = 0.0;
    for (k, v) in u.iter().enumerate() {
        acc += v;
        let t = (acc - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            tau = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - tau).max(0.0);
    }
}

struct Compiled {
    eqs: Vec<CompiledPoly>,
    jac: Vec<Vec<CompiledPoly>>,
    simplex: Vec<Vec<usize>>,
}

impl Compiled {
    fn new(sys: &NeSystem) -> Compiled {
        let v = &sys.variables;
        Compiled {
            eqs: sys.equations.iter().map(|e| CompiledPoly::new(e, v)).collect(),
            jac: sys
                .equations
                .iter()
                .map(|e| v.iter().map(|p| CompiledPoly::new(&e.derivative(p), v)).collect())
                .collect(),
            simplex: sys.simplex.clone(),
        }
    }

    fn project(&self, x: &mut [f64]) {
        for v in x.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        for block in &self.simplex {
            let mut part: Vec<f64> = block.iter().map(|i| x[*i]).collect();
            project_block(&mut part);
            for (i, v) in block.iter().zip(part) {
                x[*i] = v;
            }
        }
    }

    fn residual(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.eqs.len(), self.eqs.iter().map(|e| e.eval(x)))
    }

    fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = x.len();
        DMatrix::from_fn(self.eqs.len(), n, |i, j| self.jac[i][j].eval(x))
    }

    fn run(&self, start: Vec<f64>) -> Vec<f64> {
        let n = start.len();
        let mut x = start;
        self.project(&mut x);
        let mut f = self.residual(&x);
        let mut cost = f.norm_squared();
        let mut mu = 1e-3;
        for _ in 0..300 {
            if f.amax() < 1e-15 {
                break;
            }
            let j = self.jacobian(&x);
            let jt = j.transpose();
            let a = &jt * &j + DMatrix::identity(n, n) * mu;
            let g = &jt * &f;
            let Some(step) = a.lu().solve(&(-g)) else {
                mu *= 10.0;
                continue;
            };
            let mut y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            self.project(&mut y);
            let fy = self.residual(&y);
            let cy = fy.norm_squared();
            if cy < cost {
                x = y;
                f = fy;
                cost = cy;
                mu = (mu / 3.0).max(1e-15);
            } else {
                mu *= 4.0;
                if mu > 1e12 {
                    break;
                }
            }
        }
        x
    }
}

/// Nearby rational with a small denominator, or the exact float value.
fn snap(x: f64) -> Rational {
    for d in [1i64, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 16, 100, 1000] {
        let n = (x * d as f64).round();
        if (n / d as f64 - x).abs() < 1e-10 {
            return rat(n as i64, d);
        }
    }
    rational_from_f64(x)
}

fn exact_residual(sys: &NeSystem, v: &ParamValuation) -> Result<f64, SynthError> {
    let mut worst = Rational::from_integer(0.into());
    for e in &sys.equations {
        let r = e.eval(v)?.abs();
        if r > worst {
            worst = r;
        }
    }
    Ok(rational_to_f64(&worst))
}

fn valuation(sys: &NeSystem, xs: &[Rational]) -> ParamValuation {
    let mut v = ParamValuation::new();
    for (p, x) in sys.variables.iter().zip(xs) {
        v.set(p.clone(), x.clone());
    }
    v
}

pub(crate) fn close(a: &ParamValuation, b: &ParamValuation, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().all(|(p, x)| {
            b.get(p)
                .is_some_and(|y| (rational_to_f64(x) - rational_to_f64(y)).abs() < tol)
        })
}

/// Roots of the system inside its box, found from `opts.starts`
/// quasi-random starts and checked by exact residual. Deterministic for a
/// given seed.
pub fn solve_ne(sys: &NeSystem, opts: &SolveOptions) -> Result<Vec<NeSolution>, SynthError> {
    let n = sys.variables.len();
    if n > MAX_VARIABLES {
        return Err(SynthError::Unsupported(format!(
            "{n} variables exceed the solver limit of {MAX_VARIABLES}"
        )));
    }
    let solution = |xs: Vec<Rational>, residual| NeSolution {
        valuation: valuation(sys, &xs),
        residual,
        epsilon: None,
        support: sys.support.clone(),
    };
    if n == 0 {
        let r = exact_residual(sys, &ParamValuation::new())?;
        if r <= opts.tolerance {
            return Ok(vec![solution(Vec::new(), r)]);
        }
        return Err(SynthError::NoSolution { best_residual: r });
    }

    let compiled = Compiled::new(sys);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shift: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let starts: Vec<Vec<f64>> = (0..opts.starts.max(1) as u64)
        .map(|i| {
            (0..n)
                .map(|d| (radical_inverse(i + 1, PRIMES[d]) + shift[d]).fract())
                .collect()
        })
        .collect();
    let finals: Vec<Vec<f64>> = starts.into_par_iter().map(|s| compiled.run(s)).collect();

    let mut out: Vec<NeSolution> = Vec::new();
    let mut best_residual = f64::INFINITY;
    for x in finals {
        let snapped: Vec<Rational> = x.iter().map(|v| snap(*v)).collect();
        let raw: Vec<Rational> = x.iter().map(|v| rational_from_f64(*v)).collect();
        let rs = exact_residual(sys, &valuation(sys, &snapped))?;
        let (xs, r) = if rs <= opts.tolerance {
            (snapped, rs)
        } else {
            let rr = exact_residual(sys, &valuation(sys, &raw))?;
            (raw, rr)
        };
        best_residual = best_residual.min(r);
        if r > opts.tolerance {
            continue;
        }
        let cand = solution(xs, r);
        if !out.iter().any(|o| close(&o.valuation, &cand.valuation, 1e-6)) {
            out.push(cand);
        }
    }
    if out.is_empty() {
        return Err(SynthError::NoSolution { best_residual });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyarith::{int, ParamId, Polynomial};

    fn sys(eqs: &[&str], vars: &[&str]) -> NeSystem {
        NeSystem::standalone(
            vars.iter().map(|v| ParamId::new(v)).collect(),
            eqs.iter().map(|e| Polynomial::parse(e).unwrap()).collect(),
        )
    }

    #[test]
    fn quadratic_root() {
        let s = sys(&["2*x^2 + x - 2"], &["x"]);
        let sols = solve_ne(&s, &SolveOptions::default()).unwrap();
        assert_eq!(sols.len(), 1);
        let x = rational_to_f64(sols[0].valuation.get(&"x".into()).unwrap());
        assert!((x - (17f64.sqrt() - 1.0) / 4.0).abs() < 1e-12);
        assert!(sols[0].residual <= 1e-9);
    }

    #[test]
    fn linear_root_is_exact() {
        let s = sys(&["x - 1"], &["x"]);
        let sols = solve_ne(&s, &SolveOptions::default()).unwrap();
        assert_eq!(sols[0].valuation.get(&"x".into()), Some(&int(1)));
        assert_eq!(sols[0].residual, 0.0);
    }

    #[test]
    fn no_root_in_box() {
        let s = sys(&["x + 1"], &["x"]);
        assert!(matches!(
            solve_ne(&s, &SolveOptions::default()),
            Err(SynthError::NoSolution { .. })
        ));
    }

    #[test]
    fn deterministic() {
        let s = sys(&["x*y - 1/6", "x + y - 5/6"], &["x", "y"]);
        let a = solve_ne(&s, &SolveOptions::default()).unwrap();
        let b = solve_ne(&s, &SolveOptions::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        for (i, p) in a.iter().enumerate() {
            for q in &a[i + 1..] {
                assert!(!close(&p.valuation, &q.valuation, 1e-6));
            }
        }
    }

    #[test]
    fn simplex_projection() {
        let mut x = [0.9, 0.8];
        project_block(&mut x);
        assert!((x[0] - 0.55).abs() < 1e-12 && (x[1] - 0.45).abs() < 1e-12);
        let mut y = [0.2, -0.1];
        project_block(&mut y);
        assert_eq!(y, [0.2, 0.0]);
    }
}
