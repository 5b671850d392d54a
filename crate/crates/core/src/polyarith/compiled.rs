use super::{rational_to_f64, ParamId, Polynomial};

/// Floating-point evaluator for a polynomial over a fixed variable order.
/// Used by the numeric search and solver loops; exact answers always go
/// back through [`Polynomial::eval`].
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl CompiledPoly {
    /// Parameters of `p` missing from `vars` are treated as zero.
    pub fn new(p: &Polynomial, vars: &[ParamId]) -> Self {
        let terms = p
            .terms()
            .filter_map(|(m, c)| {
                let mut idx = Vec::with_capacity(m.factors().len());
                for (q, e) in m.factors() {
                    let i = vars.iter().position(|v| v == q)?;
                    idx.push((i, *e as i32));
                }
                Some((rational_to_f64(c), idx))
            })
            .collect();
        CompiledPoly { terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, idx)| idx.iter().fold(*c, |acc, (i, e)| acc * x[*i].powi(*e)))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_exact_evaluation() {
        let p = Polynomial::parse("2*x^2 + x*y - 2").unwrap();
        let c = CompiledPoly::new(&p, &["x".into(), "y".into()]);
        assert!((c.eval(&[0.5, 2.0]) - (-0.5)).abs() < 1e-15);
    }
}
