//! Concrete syntax:
//!
//! ```text
//! state   := and ('|' and)*
//! and     := unary ('&' unary)*
//! unary   := '!' unary | 'true' | 'false' | atom | '(' state ')' | coop
//! coop    := '<' agents '>' ( 'P' cmp num '[' path ']'
//!                           | 'R' cmp num '[' 'F' '<=' nat state '@' agent ']'
//!                           | 'D' cmp num '[' ('CAR'|'CPR') '(' agent ',' plan ',' path ')' ']' )
//! path    := 'X' state | 'F' '<=' nat state | state 'U' '<=' nat state
//! ```

use crate::model::Psmas;
use crate::polyarith::{parse_rational, Rational};

use super::{valid_probability, CompareOp, DegreeKind, LogicError, PathFormula, StateFormula};

const KEYWORDS: &[&str] = &["true", "false", "X", "F", "U", "P", "R", "D", "CAR", "CPR"];

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Op(&'static str),
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<(Vec<Token>, (usize, usize)), LogicError> {
    const OPS: &[&str] = &["<=", ">=", "<", ">", "!", "&", "|", "(", ")", "[", "]", ",", "@"];
    let mut toks = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let start_col = col;
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len()
                && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '.' || chars[i] == '\'')
            {
                i += 1;
            }
            let w: String = chars[start..i].iter().collect();
            col += i - start;
            toks.push(Token {
                tok: Tok::Ident(w),
                line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.' || chars[i] == '/') {
                i += 1;
            }
            let w: String = chars[start..i].iter().collect();
            col += i - start;
            toks.push(Token {
                tok: Tok::Num(w),
                line,
                col: start_col,
            });
            continue;
        }
        let rest: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        match OPS.iter().find(|op| rest.starts_with(**op)) {
            Some(op) => {
                toks.push(Token {
                    tok: Tok::Op(op),
                    line,
                    col: start_col,
                });
                i += op.len();
                col += op.len();
            }
            None => {
                return Err(LogicError::Parse {
                    line,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok((toks, (line, col)))
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
    model: &'a Psmas,
}

impl<'a> Parser<'a> {
    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.end)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, LogicError> {
        self.err_at(self.here(), msg)
    }

    fn err_at<T>(&self, at: (usize, usize), msg: impl Into<String>) -> Result<T, LogicError> {
        Err(LogicError::Parse {
            line: at.0,
            col: at.1,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn peek_op(&self, op: &str) -> bool {
        matches!(self.peek(), Some(Tok::Op(o)) if *o == op)
    }

    fn peek_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.peek_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), LogicError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            self.err(format!("expected `{op}`"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), LogicError> {
        if self.peek_kw(kw) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, LogicError> {
        match self.peek() {
            Some(Tok::Ident(w)) if !KEYWORDS.contains(&w.as_str()) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn number(&mut self) -> Result<Rational, LogicError> {
        match self.peek() {
            Some(Tok::Num(w)) => {
                let w = w.clone();
                match parse_rational(&w) {
                    Some(r) => {
                        self.pos += 1;
                        Ok(r)
                    }
                    None => self.err(format!("malformed number `{w}`")),
                }
            }
            _ => self.err("expected a number"),
        }
    }

    fn natural(&mut self) -> Result<u32, LogicError> {
        match self.peek() {
            Some(Tok::Num(w)) => match w.parse::<u32>() {
                Ok(k) => {
                    self.pos += 1;
                    Ok(k)
                }
                Err(_) => self.err(format!("expected a step bound, found `{w}`")),
            },
            _ => self.err("expected a step bound"),
        }
    }

    fn compare(&mut self) -> Result<CompareOp, LogicError> {
        let op = match self.peek() {
            Some(Tok::Op("<=")) => CompareOp::Le,
            Some(Tok::Op("<")) => CompareOp::Lt,
            Some(Tok::Op(">=")) => CompareOp::Ge,
            Some(Tok::Op(">")) => CompareOp::Gt,
            _ => return self.err("expected one of `<=`, `<`, `>=`, `>`"),
        };
        self.pos += 1;
        Ok(op)
    }

    fn agent(&mut self) -> Result<String, LogicError> {
        let at = self.here();
        let a = self.ident("an agent")?;
        if self.model.csg().agent_id(&a).is_err() {
            return self.err_at(at, format!("unknown agent `{a}`"));
        }
        Ok(a)
    }

    fn state(&mut self) -> Result<StateFormula, LogicError> {
        let mut acc = self.and()?;
        while self.eat_op("|") {
            let rhs = self.and()?;
            acc = StateFormula::or(acc, rhs);
        }
        Ok(acc)
    }

    fn and(&mut self) -> Result<StateFormula, LogicError> {
        let mut acc = self.unary()?;
        while self.eat_op("&") {
            let rhs = self.unary()?;
            acc = StateFormula::and(acc, rhs);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<StateFormula, LogicError> {
        if self.eat_op("!") {
            return Ok(StateFormula::not(self.unary()?));
        }
        if self.eat_op("(") {
            let f = self.state()?;
            self.expect_op(")")?;
            return Ok(f);
        }
        if self.peek_op("<") {
            return self.coalition_operator();
        }
        let at = self.here();
        match self.peek() {
            Some(Tok::Ident(w)) if w == "true" => {
                self.pos += 1;
                Ok(StateFormula::True)
            }
            Some(Tok::Ident(w)) if w == "false" => {
                self.pos += 1;
                Ok(StateFormula::falsum())
            }
            Some(Tok::Ident(w)) if !KEYWORDS.contains(&w.as_str()) => {
                let w = w.clone();
                if !self.model.csg().propositions().contains(&w) {
                    return self.err_at(at, format!("unknown proposition `{w}`"));
                }
                self.pos += 1;
                Ok(StateFormula::Atom(w))
            }
            _ => self.err("expected a state formula"),
        }
    }

    fn coalition(&mut self) -> Result<Vec<String>, LogicError> {
        self.expect_op("<")?;
        let mut names = Vec::new();
        if !self.eat_op(">") {
            loop {
                let a = self.agent()?;
                if !names.contains(&a) {
                    names.push(a);
                }
                if self.eat_op(">") {
                    break;
                }
                self.expect_op(",")?;
            }
        }
        let agents = self.model.csg().agents();
        Ok(agents.iter().filter(|a| names.contains(a)).cloned().collect())
    }

    fn coalition_operator(&mut self) -> Result<StateFormula, LogicError> {
        let coalition = self.coalition()?;
        let op = match self.peek() {
            Some(Tok::Ident(w)) if w == "P" || w == "R" || w == "D" => w.clone(),
            _ => return self.err("expected `P`, `R` or `D`"),
        };
        self.pos += 1;
        let cmp = self.compare()?;
        let bound_at = self.here();
        let bound = self.number()?;
        self.expect_op("[")?;
        let f = match op.as_str() {
            "P" => {
                if !valid_probability(&bound) {
                    return self.err_at(bound_at, "probability bound must lie in [0,1]");
                }
                let path = self.path()?;
                StateFormula::Prob {
                    coalition,
                    cmp,
                    bound,
                    path,
                }
            }
            "R" => {
                self.expect_kw("F")?;
                self.expect_op("<=")?;
                let k = self.natural()?;
                let target = self.state()?;
                self.expect_op("@")?;
                let agent = self.agent()?;
                StateFormula::Reward {
                    coalition,
                    cmp,
                    bound,
                    agent,
                    k,
                    target: Box::new(target),
                }
            }
            _ => {
                let kind = if self.peek_kw("CAR") {
                    DegreeKind::Car
                } else if self.peek_kw("CPR") {
                    DegreeKind::Cpr
                } else {
                    return self.err("expected `CAR` or `CPR`");
                };
                self.pos += 1;
                self.expect_op("(")?;
                let agent_at = self.here();
                let agent = self.agent()?;
                if !coalition.contains(&agent) {
                    return self.err_at(agent_at, format!("agent `{agent}` is not in the coalition"));
                }
                self.expect_op(",")?;
                let plan_at = self.here();
                let plan = self.ident("a plan name")?;
                if self.model.csg().plan(&plan).is_err() {
                    return self.err_at(plan_at, format!("unknown plan `{plan}`"));
                }
                self.expect_op(",")?;
                let path = self.path()?;
                self.expect_op(")")?;
                StateFormula::Degree {
                    coalition,
                    cmp,
                    bound,
                    kind,
                    agent,
                    plan,
                    path,
                }
            }
        };
        self.expect_op("]")?;
        Ok(f)
    }

    fn path(&mut self) -> Result<PathFormula, LogicError> {
        if self.peek_kw("X") {
            self.pos += 1;
            return Ok(PathFormula::next(self.state()?));
        }
        if self.peek_kw("F") {
            self.pos += 1;
            self.expect_op("<=")?;
            let k = self.natural()?;
            return Ok(PathFormula::eventually(k, self.state()?));
        }
        let left = self.state()?;
        self.expect_kw("U")?;
        self.expect_op("<=")?;
        let k = self.natural()?;
        let right = self.state()?;
        Ok(PathFormula::until(left, k, right))
    }
}

fn run<T>(
    text: &str,
    model: &Psmas,
    f: impl FnOnce(&mut Parser<'_>) -> Result<T, LogicError>,
) -> Result<T, LogicError> {
    let (toks, end) = tokenize(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end,
        model,
    };
    let out = f(&mut p)?;
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(out)
}

/// Parse a state formula, checking propositions, agents and plans against
/// the model.
pub fn parse_formula(text: &str, model: &Psmas) -> Result<StateFormula, LogicError> {
    run(text, model, |p| p.state())
}

pub fn parse_path_formula(text: &str, model: &Psmas) -> Result<PathFormula, LogicError> {
    run(text, model, |p| p.path())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_psmas, parse_model};
    use crate::polyarith::rat;

    fn ball() -> Psmas {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/ball.game")).unwrap();
        build_psmas(parse_model(&text).unwrap()).unwrap()
    }

    #[test]
    fn parses_probability_operator() {
        let m = ball();
        let f = parse_formula("<A1,A2> P>=1/2 [ X collision ]", &m).unwrap();
        assert_eq!(
            f,
            StateFormula::Prob {
                coalition: vec!["A1".into(), "A2".into()],
                cmp: CompareOp::Ge,
                bound: rat(1, 2),
                path: PathFormula::next(StateFormula::atom("collision")),
            }
        );
    }

    #[test]
    fn parses_degree_with_disjunction() {
        let m = ball();
        let f = parse_formula("<A1,A2> D<=1 [ CAR(A1, pi1, X (dropped | score2)) ]", &m).unwrap();
        match f {
            StateFormula::Degree {
                kind,
                agent,
                plan,
                path,
                ..
            } => {
                assert_eq!(kind, DegreeKind::Car);
                assert_eq!(agent, "A1");
                assert_eq!(plan, "pi1");
                assert_eq!(
                    path,
                    PathFormula::next(StateFormula::or(
                        StateFormula::atom("dropped"),
                        StateFormula::atom("score2")
                    ))
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parses_reward_operator() {
        let m = ball();
        match parse_formula("<A1> R>=3 [ F<=2 score1 @ A1 ]", &m).unwrap() {
            StateFormula::Reward { k, agent, target, .. } => {
                assert_eq!(k, 2);
                assert_eq!(agent, "A1");
                assert_eq!(*target, StateFormula::atom("score1"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eventually_is_sugar() {
        let m = ball();
        assert_eq!(
            parse_path_formula("F<=2 collision", &m).unwrap(),
            parse_path_formula("true U<=2 collision", &m).unwrap()
        );
    }

    #[test]
    fn coalition_is_normalised() {
        let m = ball();
        assert_eq!(
            parse_formula("<A2,A1,A2> P>0 [ X true ]", &m).unwrap(),
            parse_formula("<A1,A2> P>0 [ X true ]", &m).unwrap()
        );
    }

    #[test]
    fn rejects_bad_input() {
        let m = ball();
        let cases = [
            ("<A2> D<=1 [ CAR(A1, pi1, X dropped) ]", (1, 17)),
            ("<A1> P>=1/2 [ X nowhere ]", (1, 17)),
            ("<A3> P>=1/2 [ X dropped ]", (1, 2)),
            ("<A1> D<=1 [ CAR(A1, nope, X dropped) ]", (1, 21)),
            ("<A1> P>=2 [ X dropped ]", (1, 9)),
            ("<A1> P>=1/2 [ X dropped", (1, 24)),
            ("<A1> P>=1/2\n [ X # ]", (2, 6)),
        ];
        for (text, (line, col)) in cases {
            match parse_formula(text, &m) {
                Err(LogicError::Parse { line: l, col: c, .. }) => {
                    assert_eq!((l, c), (line, col), "{text}");
                }
                other => panic!("{text}: unexpected {other:?}"),
            }
        }
    }
}
