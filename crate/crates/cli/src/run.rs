use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use respgames::checker::{check, degree, path_sat_prob, CheckError, Outcome, QueryContext, Region};
use respgames::logic::{parse_formula, parse_path_formula, DegreeKind, LogicError};
use respgames::model::{build_psmas, parse_model, AgentId, ModelError, Psmas, StateId};
use respgames::oracle::{estimate_degree, estimate_probability, grid_best_response, OracleError, SimConfig};
use respgames::polyarith::{
    format_rational, parse_rational, rational_to_f64, ParamId, ParamValuation, PolyError, Rational, RationalFunction,
};
use respgames::synth::{
    enumerate_equilibria, utilities, GameSpec, NeSolution, SolveOptions, SynthError, UtilityConfig,
};
use respgames::trace::TraceError;

use crate::{CheckArgs, Command, Common, DegreeArgs, EvalArgs, FormulaArgs, Kind, NeArgs, Output, SimulateArgs};

pub struct Report {
    digest: String,
    result: Value,
    human: String,
    warnings: Vec<String>,
    code: u8,
}

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Failure {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn resource(message: impl Into<String>) -> Failure {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

fn poly_code(e: &PolyError) -> u8 {
    match e {
        PolyError::MissingParameter(_) | PolyError::Parse { .. } => 2,
        PolyError::DivisionByZero | PolyError::TooManyTerms { .. } => 3,
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Poly(p) => poly_code(p),
        _ => 2,
    }
}

fn trace_code(e: &TraceError) -> u8 {
    match e {
        TraceError::ResourceLimit { .. } => 3,
        TraceError::IllFormedPlan(_) => 2,
    }
}

fn check_code(e: &CheckError) -> u8 {
    match e {
        CheckError::Trace(t) => trace_code(t),
        CheckError::Poly(p) => poly_code(p),
        CheckError::Model(m) => model_code(m),
        CheckError::NeedsValuation(_) => 2,
        CheckError::Degenerate(_) | CheckError::Unsupported(_) | CheckError::Inadmissible(_) => 3,
    }
}

fn synth_code(e: &SynthError) -> u8 {
    match e {
        SynthError::Check(c) => check_code(c),
        SynthError::Trace(t) => trace_code(t),
        SynthError::Poly(p) => poly_code(p),
        SynthError::Unsupported(_) => 3,
        SynthError::NoSolution { .. } => 1,
    }
}

fn oracle_code(e: &OracleError) -> u8 {
    match e {
        OracleError::Check(c) => check_code(c),
        OracleError::Synth(s) => synth_code(s),
        OracleError::Trace(t) => trace_code(t),
        OracleError::Model(m) => model_code(m),
        OracleError::Poly(p) => poly_code(p),
        OracleError::Inadmissible(_) | OracleError::Undefined(_) | OracleError::Unsupported(_) => 3,
    }
}

macro_rules! failure_from {
    ($ty:ty, $f:ident) => {
        impl From<$ty> for Failure {
            fn from(e: $ty) -> Failure {
                Failure {
                    code: $f(&e),
                    message: e.to_string(),
                }
            }
        }
    };
}

failure_from!(PolyError, poly_code);
failure_from!(ModelError, model_code);
failure_from!(TraceError, trace_code);
failure_from!(CheckError, check_code);
failure_from!(SynthError, synth_code);
failure_from!(OracleError, oracle_code);

/// Model, bindings and limits shared by every subcommand.
struct Session {
    model: Psmas,
    model_text: String,
    bindings: ParamValuation,
    ctx: QueryContext,
    notes: Vec<String>,
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn parse_binding(text: &str) -> Result<(String, Rational), Failure> {
    let (name, value) = text
        .split_once('=')
        .ok_or_else(|| Failure::usage(format!("binding `{text}` is not of the form name=value")))?;
    let value = parse_rational(value)
        .ok_or_else(|| Failure::usage(format!("binding `{text}`: `{value}` is not a rational")))?;
    Ok((name.trim().to_string(), value))
}

fn open(common: &Common) -> Result<Session, Failure> {
    if let Some(n) = common.threads {
        // Fails only when a pool already exists, which keeps the old size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let text = read(&common.model)?;
    let path = common.model.display();
    let csg = parse_model(&text).map_err(|e| Failure {
        code: model_code(&e),
        message: match e {
            ModelError::Parse { .. } => format!("{path}:{e}"),
            _ => format!("{path}: {e}"),
        },
    })?;
    let model = build_psmas(csg).map_err(|e| Failure {
        code: model_code(&e),
        message: format!("{path}: {e}"),
    })?;
    let known: BTreeSet<ParamId> = model.groups().iter().flat_map(|g| g.params.iter().cloned()).collect();
    let mut bindings = ParamValuation::new();
    for b in &common.bind {
        let (name, value) = parse_binding(b)?;
        let id = ParamId::new(&name);
        if !known.contains(&id) {
            return Err(Failure::usage(format!("unknown parameter `{name}`")));
        }
        bindings.set(id, value);
    }
    let report = model.check_admissible_partial(&bindings);
    if let Some(v) = report.violations.first() {
        return Err(Failure::resource(format!("inadmissible binding: {v}")));
    }
    let mut ctx = if bindings.is_empty() {
        QueryContext::symbolic()
    } else {
        QueryContext::evaluated(bindings.clone())
    };
    if let Some(t) = common.limit_terms {
        ctx.term_limit = t;
    }
    if let Some(p) = common.limit_paths {
        ctx.path_limit = p;
    }
    let notes = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix("# note:"))
        .map(|n| n.trim().to_string())
        .collect();
    Ok(Session {
        model,
        model_text: text,
        bindings,
        ctx,
        notes,
    })
}

impl Session {
    fn digest(&self, parts: &[&str]) -> String {
        let mut h = Sha256::new();
        h.update(self.model_text.as_bytes());
        for p in parts {
            h.update([0u8]);
            h.update(p.as_bytes());
        }
        for (p, v) in self.bindings.iter() {
            h.update([0u8]);
            h.update(format!("{p}={}", format_rational(v)).as_bytes());
        }
        hex::encode(h.finalize())
    }

    fn state(&self, name: Option<&str>) -> Result<StateId, Failure> {
        match name {
            None => Ok(self.model.csg().initial()),
            Some(n) => Ok(self.model.csg().state_id(n)?),
        }
    }

    fn coalition(&self, text: Option<&str>) -> Result<Vec<AgentId>, Failure> {
        let csg = self.model.csg();
        match text {
            None => Ok((0..csg.agents().len()).collect()),
            Some(t) => {
                let mut ids: Vec<AgentId> = t
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| csg.agent_id(s.trim()))
                    .collect::<Result<_, _>>()?;
                ids.sort();
                ids.dedup();
                Ok(ids)
            }
        }
    }

    fn report(&self, digest: String, result: Value, human: String, code: u8) -> Report {
        Report {
            digest,
            result,
            human,
            warnings: self.notes.clone(),
            code,
        }
    }
}

/// The formula text and the name used in error positions.
fn formula_text(f: &FormulaArgs) -> Result<(String, String), Failure> {
    match (&f.formula, &f.formula_file) {
        (Some(t), _) => Ok((t.clone(), "<formula>".into())),
        (None, Some(p)) => Ok((read(p)?.trim().to_string(), p.display().to_string())),
        (None, None) => Err(Failure::usage("a formula is required (--formula or --formula-file)")),
    }
}

fn logic_failure(source: &str, e: LogicError) -> Failure {
    Failure::usage(format!("{source}:{e}"))
}

fn valuation_json(v: &ParamValuation) -> Value {
    Value::Object(
        v.iter()
            .map(|(p, x)| (p.to_string(), Value::String(format_rational(x))))
            .collect(),
    )
}

fn render_valuation(v: &ParamValuation) -> String {
    v.iter()
        .map(|(p, x)| format!("{p}={}", format_rational(x)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn decimal(r: &Rational) -> Value {
    json!(rational_to_f64(r))
}

fn exact_and_decimal(r: &Rational) -> String {
    format!("{} ({})", format_rational(r), rational_to_f64(r))
}

fn parse_weight(text: &Option<String>, default: Rational, flag: &str) -> Result<Rational, Failure> {
    match text {
        None => Ok(default),
        Some(t) => parse_rational(t).ok_or_else(|| Failure::usage(format!("--{flag}: `{t}` is not a rational"))),
    }
}

fn check_cmd(a: &CheckArgs) -> Result<Report, Failure> {
    let s = open(&a.common)?;
    let (text, source) = formula_text(&a.formula)?;
    let phi = parse_formula(&text, &s.model).map_err(|e| logic_failure(&source, e))?;
    let state = s.state(a.state.as_deref())?;
    let digest = s.digest(&["check", &text, a.state.as_deref().unwrap_or("")]);
    let mut result = Map::new();
    result.insert("formula".into(), json!(phi.to_string()));
    result.insert("state".into(), json!(s.model.csg().states()[state]));
    let decided = |holds: bool, witness: Option<ParamValuation>, mut result: Map<String, Value>| {
        result.insert("holds".into(), json!(holds));
        let mut human = holds.to_string();
        if let Some(w) = witness {
            human.push_str(&format!("\nwitness: {}", render_valuation(&w)));
            result.insert("witness".into(), valuation_json(&w));
        }
        (Value::Object(result), human, if holds { 0 } else { 1 })
    };
    let (result, human, code) = match check(&s.model, state, &phi, &s.ctx)? {
        Outcome::Decided { holds, witness } => decided(holds, witness, result),
        Outcome::Region(Region::Const(b)) => decided(b, None, result),
        Outcome::Region(r) => {
            result.insert("region".into(), json!(r.to_string()));
            (Value::Object(result), format!("holds iff {r}"), 0)
        }
    };
    Ok(s.report(digest, result, human, code))
}

fn degree_cmd(a: &DegreeArgs) -> Result<Report, Failure> {
    let s = open(&a.common)?;
    let (text, source) = formula_text(&a.formula)?;
    let psi = parse_path_formula(&text, &s.model).map_err(|e| logic_failure(&source, e))?;
    let csg = s.model.csg();
    let agent = csg.agent_id(&a.agent)?;
    let plan = csg.plan(&a.plan)?;
    let coalition = s.coalition(a.coalition.as_deref())?;
    let kind = match a.kind {
        Kind::Car => DegreeKind::Car,
        Kind::Cpr => DegreeKind::Cpr,
    };
    let digest = s.digest(&["degree", &text, &kind.to_string(), &a.agent, &a.plan]);
    let d = degree(&s.model, kind, agent, plan, &psi, &coalition, &s.ctx)?;
    let mut result = Map::new();
    result.insert("kind".into(), json!(kind.to_string()));
    result.insert("agent".into(), json!(a.agent));
    result.insert("plan".into(), json!(csg.render_plan(plan)));
    result.insert("value".into(), json!(d.value.to_string()));
    result.insert("kappa".into(), json!(d.kappa));
    let mode = if s.bindings.is_empty() { "symbolic" } else { "evaluated" };
    result.insert("mode".into(), json!(mode));
    result.insert("numerator".into(), json!(d.numerator.to_string()));
    result.insert("denominator".into(), json!(d.denominator.to_string()));
    result.insert("numerator_paths".into(), json!(d.numerator_paths));
    result.insert("denominator_paths".into(), json!(d.denominator_paths));
    let mut human = format!(
        "value: {}\nkappa: {}\nnumerator: {}\ndenominator: {}",
        d.value, d.kappa, d.numerator, d.denominator
    );
    if !s.bindings.is_empty() {
        let x = d.eval(&s.bindings)?;
        result.insert("evaluated".into(), json!(format_rational(&x)));
        result.insert("decimal".into(), decimal(&x));
        human.push_str(&format!(
            "\nat {}: {}",
            render_valuation(&s.bindings),
            exact_and_decimal(&x)
        ));
    }
    Ok(s.report(digest, Value::Object(result), human, 0))
}

fn support_json(m: &Psmas, sol: &NeSolution) -> Value {
    let csg = m.csg();
    Value::Object(
        sol.support
            .0
            .iter()
            .map(|(g, acts)| {
                let group = &m.groups()[*g];
                let states: Vec<&str> = group.states.iter().map(|s| csg.states()[*s].as_str()).collect();
                let key = format!("{}@{}", csg.agents()[group.agent], states.join(","));
                let names: Vec<Value> = acts.iter().map(|a| json!(csg.action_name(*a))).collect();
                (key, Value::Array(names))
            })
            .collect(),
    )
}

fn grid_gap(m: &Psmas, game: &GameSpec, sol: &NeSolution, resolution: usize) -> Result<f64, Failure> {
    let utils = utilities(m, game)?;
    let mut gap: f64 = 0.0;
    for (i, u) in utils.iter().enumerate() {
        let mut others = sol.valuation.clone();
        for p in m.agent_free_params(i) {
            others.remove(&p);
        }
        let br = grid_best_response(m, game, i, &others, resolution)?;
        gap = gap.max(rational_to_f64(&(br.value - u.eval(&sol.valuation)?)));
    }
    Ok(gap)
}

fn ne_cmd(a: &NeArgs) -> Result<Report, Failure> {
    let s = open(&a.common)?;
    let defaults = UtilityConfig::default();
    let cfg = UtilityConfig {
        lambda1: parse_weight(&a.lambda1, defaults.lambda1, "lambda1")?,
        lambda2: parse_weight(&a.lambda2, defaults.lambda2, "lambda2")?,
        theta: parse_weight(&a.theta, defaults.theta, "theta")?,
    };
    let start = s.state(a.state.as_deref())?;
    let mut game = GameSpec::new(start, a.horizon, cfg.clone());
    game.path_limit = s.ctx.path_limit;
    game.term_limit = s.ctx.term_limit;
    let mut formula = String::new();
    if let Some(plan) = &a.plan {
        let (text, source) = formula_text(&a.formula)?;
        let psi = parse_path_formula(&text, &s.model).map_err(|e| logic_failure(&source, e))?;
        game = game.with_resp(s.model.csg().plan(plan)?.clone(), psi);
        formula = format!("{plan} {text}");
    }
    let weights = format!(
        "{} {} {} {} {}",
        a.horizon,
        format_rational(&cfg.lambda1),
        format_rational(&cfg.lambda2),
        format_rational(&cfg.theta),
        start
    );
    let digest = s.digest(&["ne", &weights, &formula]);
    let opts = SolveOptions {
        starts: a.starts,
        seed: a.seed,
        ..SolveOptions::default()
    };
    let (sols, note) = match enumerate_equilibria(&s.model, &game, &opts) {
        Ok(sols) => (sols, None),
        Err(e @ SynthError::NoSolution { .. }) => (Vec::new(), Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let mut entries = Vec::new();
    let mut human = Vec::new();
    for sol in &sols {
        let mut entry = Map::new();
        entry.insert(
            "params".into(),
            Value::Object(sol.valuation.iter().map(|(p, x)| (p.to_string(), decimal(x))).collect()),
        );
        entry.insert("exact".into(), valuation_json(&sol.valuation));
        entry.insert("residual".into(), json!(sol.residual));
        entry.insert("gap".into(), json!(sol.epsilon.unwrap_or(0.0)));
        entry.insert("support".into(), support_json(&s.model, sol));
        let mut line = format!(
            "{}  residual {:.1e}  gap {:.1e}",
            render_valuation(&sol.valuation),
            sol.residual,
            sol.epsilon.unwrap_or(0.0)
        );
        if let Some(n) = a.grid {
            let g = grid_gap(&s.model, &game, sol, n)?;
            entry.insert("grid_gap".into(), json!(g));
            line.push_str(&format!("  grid gap {g:.1e}"));
        }
        entries.push(Value::Object(entry));
        human.push(line);
    }
    let mut report = s.report(
        digest,
        json!({ "solutions": entries }),
        if human.is_empty() {
            "no equilibrium found".into()
        } else {
            human.join("\n")
        },
        if sols.is_empty() { 1 } else { 0 },
    );
    report.warnings.extend(note);
    Ok(report)
}

fn simulate_cmd(a: &SimulateArgs) -> Result<Report, Failure> {
    let s = open(&a.common)?;
    let (text, source) = formula_text(&a.formula)?;
    let psi = parse_path_formula(&text, &s.model).map_err(|e| logic_failure(&source, e))?;
    let cfg = SimConfig {
        samples: a.samples.max(1),
        seed: a.seed,
        horizon: 0,
        valuation: s.bindings.clone(),
    };
    let digest = s.digest(&["simulate", &text, &a.samples.to_string(), &a.seed.to_string()]);
    let e = match a.kind {
        None => estimate_probability(&s.model, s.state(a.state.as_deref())?, &psi, &cfg)?,
        Some(kind) => {
            let csg = s.model.csg();
            let agent = csg.agent_id(a.agent.as_deref().unwrap_or_default())?;
            let plan = csg.plan(a.plan.as_deref().unwrap_or_default())?;
            let kind = match kind {
                Kind::Car => DegreeKind::Car,
                Kind::Cpr => DegreeKind::Cpr,
            };
            let coalition = s.coalition(a.coalition.as_deref())?;
            estimate_degree(&s.model, &cfg, agent, plan, &psi, kind, &coalition)?
        }
    };
    let result = json!({ "estimate": e.mean, "stderr": e.stderr, "samples": e.samples, "seed": a.seed });
    let human = format!("{} +- {} ({} samples)", e.mean, e.stderr, e.samples);
    Ok(s.report(digest, result, human, 0))
}

fn eval_cmd(a: &EvalArgs) -> Result<Report, Failure> {
    let s = open(&a.common)?;
    let (expr, digest) = match &a.expr {
        Some(t) => {
            let r = RationalFunction::parse(t).map_err(|e| Failure::usage(format!("<expr>:{e}")))?;
            (r, s.digest(&["eval", t]))
        }
        None => {
            let (text, source) = formula_text(&a.formula)?;
            let psi = parse_path_formula(&text, &s.model).map_err(|e| logic_failure(&source, e))?;
            let state = s.state(a.state.as_deref())?;
            let p = path_sat_prob(&s.model, state, &psi, &s.ctx)?;
            (p, s.digest(&["eval", &text, a.state.as_deref().unwrap_or("")]))
        }
    };
    let x = expr.eval(&s.bindings)?;
    let result = json!({
        "expression": expr.to_string(),
        "value": format_rational(&x),
        "decimal": rational_to_f64(&x),
    });
    Ok(s.report(digest, result, exact_and_decimal(&x), 0))
}

pub fn dispatch(cmd: &Command) -> Result<Report, Failure> {
    match cmd {
        Command::Check(a) => check_cmd(a),
        Command::Degree(a) => degree_cmd(a),
        Command::Ne(a) => ne_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Eval(a) => eval_cmd(a),
    }
}

fn name_and_output(cmd: &Command) -> (&'static str, Output) {
    match cmd {
        Command::Check(a) => ("check", a.common.output),
        Command::Degree(a) => ("degree", a.common.output),
        Command::Ne(a) => ("ne", a.common.output),
        Command::Simulate(a) => ("simulate", a.common.output),
        Command::Eval(a) => ("eval", a.common.output),
    }
}

/// Print the outcome and return the exit code.
pub fn emit(cmd: &Command, out: Result<Report, Failure>, elapsed: Duration) -> u8 {
    let (name, output) = name_and_output(cmd);
    let elapsed_ms = elapsed.as_secs_f64() * 1000.0;
    match out {
        Ok(r) => {
            match output {
                Output::Json => {
                    let env = json!({
                        "subcommand": name,
                        "digest": r.digest,
                        "result": r.result,
                        "warnings": r.warnings,
                        "elapsed_ms": elapsed_ms,
                    });
                    println!("{env}");
                }
                Output::Human => {
                    println!("{}", r.human);
                    for w in &r.warnings {
                        eprintln!("warning: {w}");
                    }
                }
            }
            r.code
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            if output == Output::Json {
                let env = json!({
                    "subcommand": name,
                    "digest": Value::Null,
                    "error": { "code": f.code, "message": f.message },
                    "warnings": [],
                    "elapsed_ms": elapsed_ms,
                });
                println!("{env}");
            }
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use respgames::polyarith::rat;

    #[test]
    fn bindings_parse_exactly() {
        assert_eq!(parse_binding("x1=0.3").unwrap(), ("x1".to_string(), rat(3, 10)));
        assert_eq!(parse_binding("x2 = 2/7").unwrap().1, rat(2, 7));
        assert_eq!(parse_binding("x1").unwrap_err().code, 2);
        assert_eq!(parse_binding("x1=abc").unwrap_err().code, 2);
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(poly_code(&PolyError::DivisionByZero), 3);
        assert_eq!(poly_code(&PolyError::MissingParameter(ParamId::new("x"))), 2);
        assert_eq!(synth_code(&SynthError::NoSolution { best_residual: 1.0 }), 1);
        assert_eq!(check_code(&CheckError::Degenerate("d".into())), 3);
    }
}
