use std::cmp::Ordering;
use std::fmt;

use super::ParamId;

/// Power product of parameters. Exponents are positive and the factors are
/// sorted by parameter, so the representation is canonical.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Monomial {
    factors: Vec<(ParamId, u32)>,
}

impl Monomial {
    pub fn one() -> Self {
        Monomial { factors: Vec::new() }
    }

    pub fn var(p: ParamId) -> Self {
        Monomial { factors: vec![(p, 1)] }
    }

    pub fn from_factors(factors: impl IntoIterator<Item = (ParamId, u32)>) -> Self {
        let mut fs: Vec<(ParamId, u32)> = factors.into_iter().filter(|(_, e)| *e > 0).collect();
        fs.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(ParamId, u32)> = Vec::with_capacity(fs.len());
        for (p, e) in fs {
            match merged.last_mut() {
                Some((q, f)) if *q == p => *f += e,
                _ => merged.push((p, e)),
            }
        }
        Monomial { factors: merged }
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|(_, e)| e).sum()
    }

    pub fn exponent(&self, p: &ParamId) -> u32 {
        self.factors
            .binary_search_by(|(q, _)| q.cmp(p))
            .map(|i| self.factors[i].1)
            .unwrap_or(0)
    }

    pub fn factors(&self) -> &[(ParamId, u32)] {
        &self.factors
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (a, b) = (&self.factors, &other.factors);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0.clone(), a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Monomial { factors: out }
    }

    /// Remove `p` entirely, returning its exponent and the remaining monomial.
    pub(crate) fn split_off(&self, p: &ParamId) -> (u32, Monomial) {
        let mut rest = self.factors.clone();
        match rest.binary_search_by(|(q, _)| q.cmp(p)) {
            Ok(i) => {
                let (_, e) = rest.remove(i);
                (e, Monomial { factors: rest })
            }
            Err(_) => (0, Monomial { factors: rest }),
        }
    }
}

/// Lexicographic comparison with the smallest parameter most significant.
fn lex_cmp(a: &[(ParamId, u32)], b: &[(ParamId, u32)]) -> Ordering {
    let (mut i, mut j) = (0, 0);
    loop {
        match (a.get(i), b.get(j)) {
            (None, None) => return Ordering::Equal,
            (Some(_), None) => return Ordering::Greater,
            (None, Some(_)) => return Ordering::Less,
            (Some((p, e)), Some((q, f))) => match p.cmp(q) {
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => {
                    if e != f {
                        return e.cmp(f);
                    }
                    i += 1;
                    j += 1;
                }
            },
        }
    }
}

// Graded lexicographic order.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| lex_cmp(&self.factors, &other.factors))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return f.write_str("1");
        }
        for (k, (p, e)) in self.factors.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{p}")?;
            } else {
                write!(f, "{p}^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}
