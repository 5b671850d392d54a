//! Line-oriented model file reader.
//!
//! Sections come in a fixed order: `agents`, `states`, `init`, `labels`,
//! `actions`, `param`, `trans`, `reward`, `plan`. `#` starts a comment.

use crate::polyarith::{parse_rational, Rational};

use super::{Csg, CsgBuilder, ModelError};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Word(String),
    Punct(char),
    Arrow,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    col: usize,
}

fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, ModelError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = line.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (byte, c) = chars[i];
        let col = line[..byte].chars().count() + 1;
        if c == '#' {
            break;
        }
        if c.is_whitespace() {
            i += 1;
        } else if c == '-' && chars.get(i + 1).map(|x| x.1) == Some('>') {
            out.push(Token { tok: Tok::Arrow, col });
            i += 2;
        } else if ":{}(),@*".contains(c) {
            out.push(Token {
                tok: Tok::Punct(c),
                col,
            });
            i += 1;
        } else {
            let start = i;
            while i < chars.len() {
                let d = chars[i].1;
                if d.is_whitespace()
                    || ":{}(),@*#".contains(d)
                    || (d == '-' && chars.get(i + 1).map(|x| x.1) == Some('>'))
                {
                    break;
                }
                i += 1;
            }
            let end = chars.get(i).map(|x| x.0).unwrap_or(line.len());
            let word = &line[chars[start].0..end];
            if word.is_empty() {
                return Err(ModelError::Parse {
                    line: line_no,
                    col,
                    msg: format!("unexpected `{c}`"),
                });
            }
            out.push(Token {
                tok: Tok::Word(word.to_string()),
                col,
            });
        }
    }
    Ok(out)
}

struct Line {
    no: usize,
    toks: Vec<Token>,
    pos: usize,
    end_col: usize,
}

impl Line {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ModelError> {
        let col = self.toks.get(self.pos).map(|t| t.col).unwrap_or(self.end_col);
        Err(ModelError::Parse {
            line: self.no,
            col,
            msg: msg.into(),
        })
    }

    fn err_at<T>(&self, col: usize, msg: impl Into<String>) -> Result<T, ModelError> {
        Err(ModelError::Parse {
            line: self.no,
            col,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.col).unwrap_or(self.end_col)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn word(&mut self, what: &str) -> Result<String, ModelError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => self.err(format!("expected {what}")),
        }
    }

    fn punct(&mut self, c: char) -> Result<(), ModelError> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{c}`"))
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_end(&self) -> Result<(), ModelError> {
        if self.at_end() {
            Ok(())
        } else {
            self.err("unexpected trailing input")
        }
    }

    fn words_until_end(&mut self, what: &str) -> Result<Vec<(String, usize)>, ModelError> {
        let mut out = Vec::new();
        while !self.at_end() {
            let col = self.col();
            out.push((self.word(what)?, col));
        }
        Ok(out)
    }

    fn rational(&mut self) -> Result<Rational, ModelError> {
        let col = self.col();
        let w = self.word("a number")?;
        parse_rational(&w).map_or_else(|| self.err_at(col, format!("malformed number `{w}`")), Ok)
    }

    /// `( a, b, ... )` where each entry is an action name or `*`.
    fn tuple(&mut self) -> Result<Vec<Option<(String, usize)>>, ModelError> {
        self.punct('(')?;
        let mut out = Vec::new();
        loop {
            let col = self.col();
            if self.eat('*') {
                out.push(None);
            } else {
                out.push(Some((self.word("an action")?, col)));
            }
            if self.eat(')') {
                return Ok(out);
            }
            self.punct(',')?;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Agents,
    States,
    Init,
    Labels,
    Actions,
    Param,
    Trans,
    Reward,
    Plan,
}

impl Section {
    fn from_keyword(w: &str) -> Option<Section> {
        Some(match w {
            "agents" => Section::Agents,
            "states" => Section::States,
            "init" => Section::Init,
            "labels" => Section::Labels,
            "actions" => Section::Actions,
            "param" => Section::Param,
            "trans" => Section::Trans,
            "reward" => Section::Reward,
            "plan" => Section::Plan,
            _ => return None,
        })
    }
}

/// Parse a model file. Errors carry 1-based line and column.
pub fn parse_model(text: &str) -> Result<Csg, ModelError> {
    let mut agents: Option<Vec<String>> = None;
    let mut builder: Option<CsgBuilder> = None;
    let mut last = Section::Agents;
    let mut seen_agents = false;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        last_line = no;
        let toks = tokenize(raw, no)?;
        if toks.is_empty() {
            continue;
        }
        let mut ln = Line {
            no,
            toks,
            pos: 0,
            end_col: raw.chars().count() + 1,
        };
        let kw_col = ln.col();
        let kw = ln.word("a section keyword")?;
        let section = match Section::from_keyword(&kw) {
            Some(s) => s,
            None => return ln.err_at(kw_col, format!("unknown section `{kw}`")),
        };
        if section < last {
            return ln.err_at(kw_col, format!("`{kw}` is out of order"));
        }
        let repeatable = matches!(
            section,
            Section::Labels | Section::Actions | Section::Param | Section::Trans | Section::Reward | Section::Plan
        );
        if section == last && !repeatable && (section != Section::Agents || seen_agents) {
            return ln.err_at(kw_col, format!("`{kw}` given twice"));
        }
        if section > Section::States && builder.is_none() {
            return ln.err_at(kw_col, "`agents` and `states` must come first");
        }
        last = section;

        match section {
            Section::Agents => {
                seen_agents = true;
                ln.punct(':')?;
                let names = ln.words_until_end("an agent name")?;
                if names.is_empty() {
                    return ln.err("expected at least one agent");
                }
                check_unique(&ln, &names)?;
                agents = Some(names.into_iter().map(|n| n.0).collect());
            }
            Section::States => {
                let Some(ags) = agents.as_ref() else {
                    return ln.err_at(kw_col, "`agents` must come first");
                };
                ln.punct(':')?;
                let names = ln.words_until_end("a state name")?;
                if names.is_empty() {
                    return ln.err("expected at least one state");
                }
                check_unique(&ln, &names)?;
                let states: Vec<String> = names.into_iter().map(|n| n.0).collect();
                builder = Some(CsgBuilder::new(ags, &states));
            }
            _ => {
                let b = builder.as_mut().expect("checked above");
                section_line(section, &mut ln, b)?;
            }
        }
    }
    match builder {
        Some(b) => b.build(),
        None => Err(ModelError::Parse {
            line: last_line.max(1),
            col: 1,
            msg: "missing `agents` or `states`".into(),
        }),
    }
}

fn check_unique(ln: &Line, names: &[(String, usize)]) -> Result<(), ModelError> {
    for (k, (n, col)) in names.iter().enumerate() {
        if names[..k].iter().any(|(m, _)| m == n) {
            return ln.err_at(*col, format!("duplicate name `{n}`"));
        }
    }
    Ok(())
}

fn lift<T>(ln: &Line, col: usize, r: Result<T, ModelError>) -> Result<T, ModelError> {
    r.or_else(|e| match e {
        ModelError::Parse { .. } => Err(e),
        other => ln.err_at(col, other.to_string()),
    })
}

fn section_line(section: Section, ln: &mut Line, b: &mut CsgBuilder) -> Result<(), ModelError> {
    match section {
        Section::Init => {
            ln.punct(':')?;
            let col = ln.col();
            let s = ln.word("a state")?;
            lift(ln, col, b.initial(&s).map(|_| ()))?;
            ln.expect_end()
        }
        Section::Labels => {
            ln.punct(':')?;
            while !ln.at_end() {
                let col = ln.col();
                let s = ln.word("a state")?;
                ln.punct('{')?;
                while !ln.eat('}') {
                    let p = ln.word("a proposition or `}`")?;
                    lift(ln, col, b.label(&s, &p).map(|_| ()))?;
                }
            }
            Ok(())
        }
        Section::Actions => {
            let col = ln.col();
            let agent = ln.word("an agent")?;
            ln.punct('@')?;
            let mut states = Vec::new();
            while ln.peek() != Some(&Tok::Punct(':')) {
                if ln.at_end() {
                    return ln.err("expected `:`");
                }
                let c = ln.col();
                states.push((ln.word("a state")?, c));
            }
            ln.punct(':')?;
            let acts = ln.words_until_end("an action")?;
            if acts.is_empty() {
                return ln.err("expected at least one action");
            }
            if states.is_empty() {
                return ln.err_at(col, "expected at least one state");
            }
            let names: Vec<&str> = acts.iter().map(|a| a.0.as_str()).collect();
            for (s, c) in &states {
                lift(ln, *c, b.actions(&agent, s, &names).map(|_| ()))?;
            }
            Ok(())
        }
        Section::Param => {
            let col = ln.col();
            let name = ln.word("a parameter name")?;
            ln.punct(':')?;
            let agent = ln.word("an agent")?;
            let action = ln.word("an action")?;
            ln.punct('@')?;
            let states = ln.words_until_end("a state")?;
            if states.is_empty() {
                return ln.err("expected at least one state");
            }
            let names: Vec<&str> = states.iter().map(|s| s.0.as_str()).collect();
            lift(ln, col, b.param(&name, &agent, &action, &names).map(|_| ()))
        }
        Section::Trans => trans_line(ln, b),
        Section::Reward => {
            let col = ln.col();
            let agent = ln.word("an agent")?;
            let kind_col = ln.col();
            let kind = ln.word("`action` or `state`")?;
            match kind.as_str() {
                "action" => {
                    if ln.peek() == Some(&Tok::Punct('(')) {
                        let t = ln.tuple()?;
                        let mut names = Vec::new();
                        for e in t {
                            match e {
                                Some((n, _)) => names.push(n),
                                None => return ln.err("`*` is not allowed in reward tuples"),
                            }
                        }
                        ln.punct(':')?;
                        let r = ln.rational()?;
                        ln.expect_end()?;
                        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                        lift(ln, col, b.joint_reward(&agent, &refs, r).map(|_| ()))
                    } else {
                        let a = ln.word("an action")?;
                        ln.punct(':')?;
                        let r = ln.rational()?;
                        ln.expect_end()?;
                        lift(ln, col, b.action_reward(&agent, &a, r).map(|_| ()))
                    }
                }
                "state" => {
                    let s = ln.word("a state")?;
                    ln.punct(':')?;
                    let r = ln.rational()?;
                    ln.expect_end()?;
                    lift(ln, col, b.state_reward(&agent, &s, r).map(|_| ()))
                }
                _ => ln.err_at(kind_col, "expected `action` or `state`"),
            }
        }
        Section::Plan => {
            let col = ln.col();
            let name = ln.word("a plan name")?;
            ln.punct('@')?;
            let start = ln.word("a state")?;
            ln.punct(':')?;
            let mut steps: Vec<Vec<String>> = Vec::new();
            while !ln.at_end() {
                let t = ln.tuple()?;
                let mut step = Vec::new();
                for e in t {
                    match e {
                        Some((n, _)) => step.push(n),
                        None => return ln.err("`*` is not allowed in plans"),
                    }
                }
                steps.push(step);
            }
            let refs: Vec<Vec<&str>> = steps.iter().map(|s| s.iter().map(String::as_str).collect()).collect();
            let slices: Vec<&[&str]> = refs.iter().map(Vec::as_slice).collect();
            lift(ln, col, b.plan(&name, &start, &slices).map(|_| ()))
        }
        Section::Agents | Section::States => unreachable!(),
    }
}

/// `trans S (a, b) -> { t: p, ... }`. `S` may be `*` (every state where the
/// tuple is available) and tuple entries may be `*` (every available action);
/// explicit lines are not overridden by wildcard expansions that come later.
fn trans_line(ln: &mut Line, b: &mut CsgBuilder) -> Result<(), ModelError> {
    let state_col = ln.col();
    let state = if ln.eat('*') {
        None
    } else {
        Some(ln.word("a state or `*`")?)
    };
    let tuple_col = ln.col();
    let tuple = ln.tuple()?;
    if tuple.len() != b.num_agents() {
        return ln.err_at(
            tuple_col,
            format!(
                "joint action has {} entries but there are {} agents",
                tuple.len(),
                b.num_agents()
            ),
        );
    }
    if !matches!(ln.peek(), Some(Tok::Arrow)) {
        return ln.err("expected `->`");
    }
    ln.pos += 1;
    ln.punct('{')?;
    let mut dist: Vec<(usize, Rational)> = Vec::new();
    loop {
        let col = ln.col();
        let t = ln.word("a successor state")?;
        let t = lift(ln, col, b.state(&t))?;
        ln.punct(':')?;
        let p = ln.rational()?;
        dist.push((t, p));
        if ln.eat('}') {
            break;
        }
        ln.punct(',')?;
    }
    ln.expect_end()?;

    let mut action_ids = Vec::new();
    for e in &tuple {
        match e {
            Some((a, col)) => action_ids.push(Some(lift(ln, *col, b.action(a))?)),
            None => action_ids.push(None),
        }
    }
    let states: Vec<usize> = match &state {
        Some(s) => vec![lift(ln, state_col, b.state(s))?],
        None => (0..b.num_states()).collect(),
    };
    let wildcard = state.is_none() || action_ids.iter().any(Option::is_none);
    let mut added = 0;
    for s in states {
        let mut per_agent = Vec::new();
        let mut ok = true;
        for (i, a) in action_ids.iter().enumerate() {
            let avail = match b.available(i, s) {
                Some(v) => v,
                None => return ln.err_at(state_col, "actions must be declared before transitions"),
            };
            match a {
                Some(a) if avail.contains(a) => per_agent.push(vec![*a]),
                Some(_) => {
                    ok = false;
                    break;
                }
                None => per_agent.push(avail.to_vec()),
            }
        }
        if !ok {
            if wildcard {
                continue;
            }
            return ln.err_at(tuple_col, "joint action is not available at this state");
        }
        for ja in super::joint_actions_of(&per_agent) {
            if wildcard && b.has_transition(s, &ja) {
                continue;
            }
            lift(ln, tuple_col, b.transition_ids(s, ja, dist.clone()).map(|_| ()))?;
            added += 1;
        }
    }
    if added == 0 && !wildcard {
        return ln.err_at(tuple_col, "no transition added");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JointAction;

    const SMALL: &str = "\
agents: A B
states: s t
init: s
labels: t { goal }
actions A @ s t: go stay
actions B @ s t: wait
trans s (go, wait) -> { t: 1/2, s: 1/2 }
trans * (*, *) -> { t: 1 }
reward A action go: 1
reward A state t: 3/2
plan p @ s: (go, wait) (stay, wait)
";

    #[test]
    fn parses_small_model() {
        let g = parse_model(SMALL).unwrap();
        assert_eq!(g.agents(), &["A", "B"]);
        assert_eq!(g.states().len(), 2);
        let go = g.action_id("go").unwrap();
        let wait = g.action_id("wait").unwrap();
        let ja = JointAction(vec![go, wait]);
        assert_eq!(g.delta(0, &ja).len(), 2);
        assert_eq!(g.delta(1, &ja), &[(1, Rational::from_integer(1.into()))]);
        assert!(g.labels(1).contains("goal"));
        assert_eq!(g.plans().len(), 1);
    }

    #[test]
    fn errors_carry_positions() {
        let bad = SMALL.replace("trans s (go, wait)", "trans s (go, nope)");
        match parse_model(&bad) {
            Err(ModelError::Parse { line, col, .. }) => {
                assert_eq!(line, 7);
                assert_eq!(col, 14);
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = SMALL.replace("t: 1/2, s: 1/2", "t: 1/2 s: 1/2");
        assert!(matches!(parse_model(&bad), Err(ModelError::Parse { line: 7, .. })));
        let bad = SMALL.replace("init: s\n", "") + "init: s\n";
        assert!(matches!(parse_model(&bad), Err(ModelError::Parse { .. })));
    }

    #[test]
    fn rejects_incomplete_distribution() {
        let bad = SMALL.replace("{ t: 1/2, s: 1/2 }", "{ t: 1/2 }");
        assert!(matches!(parse_model(&bad), Err(ModelError::Invalid(_))));
    }
}
