//! Text grammar shared by polynomials and rational functions:
//!
//! ```text
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ['^' uint]
//! atom   := number | ident | '(' expr ')'
//! ```

use super::{parse_rational, PolyError, Polynomial, RationalFunction};

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, PolyError> {
        Err(PolyError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn bump(&mut self) {
        if let Some(c) = self.src[self.pos..].chars().next() {
            self.pos += c.len_utf8();
        }
    }

    fn expr(&mut self) -> Result<RationalFunction, PolyError> {
        let neg = match self.peek() {
            Some('-') => {
                self.bump();
                true
            }
            Some('+') => {
                self.bump();
                false
            }
            _ => false,
        };
        let mut acc = self.term()?;
        if neg {
            acc = -&acc;
        }
        loop {
            match self.peek() {
                Some('+') => {
                    self.bump();
                    let t = self.term()?;
                    acc = &acc + &t;
                }
                Some('-') => {
                    self.bump();
                    let t = self.term()?;
                    acc = &acc - &t;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<RationalFunction, PolyError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some('*') => {
                    self.bump();
                    let f = self.factor()?;
                    acc = &acc * &f;
                }
                Some('/') => {
                    self.bump();
                    let at = self.pos;
                    let f = self.factor()?;
                    if f.is_zero() {
                        self.pos = at;
                        return self.err("division by zero");
                    }
                    acc = acc.checked_div(&f)?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<RationalFunction, PolyError> {
        let base = self.atom()?;
        if self.peek() == Some('^') {
            self.bump();
            self.skip_ws();
            let start = self.pos;
            while self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit()) {
                self.pos += 1;
            }
            let e: u32 = match self.src[start..self.pos].parse() {
                Ok(e) => e,
                Err(_) => {
                    self.pos = start;
                    return self.err("expected exponent");
                }
            };
            let num = base.numer().pow(e);
            let den = base.denom().pow(e);
            return RationalFunction::new(num, den);
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<RationalFunction, PolyError> {
        match self.peek() {
            Some('(') => {
                self.bump();
                let e = self.expr()?;
                if self.peek() != Some(')') {
                    return self.err("expected `)`");
                }
                self.bump();
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self.src[self.pos..].starts_with(|c: char| c.is_ascii_digit() || c == '.') {
                    self.pos += 1;
                }
                match parse_rational(&self.src[start..self.pos]) {
                    Some(r) => Ok(RationalFunction::constant(r)),
                    None => {
                        self.pos = start;
                        self.err("malformed number")
                    }
                }
            }
            Some(c) if c.is_alphabetic() || c == '_' => {
                let start = self.pos;
                while let Some(c) = self.src[self.pos..].chars().next() {
                    if c.is_alphanumeric() || c == '_' || c == '.' {
                        self.pos += c.len_utf8();
                    } else {
                        break;
                    }
                }
                Ok(Polynomial::var(&self.src[start..self.pos]).into())
            }
            Some(c) => self.err(format!("unexpected `{c}`")),
            None => self.err("unexpected end of input"),
        }
    }
}

pub(super) fn parse_rational_function(text: &str) -> Result<RationalFunction, PolyError> {
    let mut p = Parser { src: text, pos: 0 };
    let r = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(r)
}

pub(super) fn parse_polynomial(text: &str) -> Result<Polynomial, PolyError> {
    let r = parse_rational_function(text)?;
    match r.denom().as_constant() {
        Some(d) => Ok(r.numer().scale(&d.recip())),
        None => Err(PolyError::Parse {
            pos: 0,
            msg: "not a polynomial: denominator depends on parameters".into(),
        }),
    }
}
