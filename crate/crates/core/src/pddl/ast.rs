//! Lifted (ungrounded) domain and problem structures.

use super::sexpr::{Pos, Sexpr};
use super::ParseDiagnostic;
use crate::model::Comparator;

pub const SUPPORTED_REQUIREMENTS: [&str; 5] = [
    ":durative-actions",
    ":fluents",
    ":typing",
    ":duration-inequalities",
    ":continuous-effects",
];

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(String),
    Const(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub name: String,
    pub args: Vec<Term>,
    pub pos: Pos,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Fluent(Atom),
    Duration,
    Time,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Timing {
    Start,
    End,
    OverAll,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cond {
    Atom(Atom),
    Compare(Comparator, Expr, Expr, Pos),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NumOp {
    Assign,
    Increase,
    Decrease,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Effect {
    Add(Atom),
    Del(Atom),
    Numeric(NumOp, Atom, Expr),
    /// `(increase f (* #t rate))` and friends; the expression is the rate.
    /// Stored with [`Timing::OverAll`].
    Continuous(NumOp, Atom, Expr),
}

pub type TypedList = Vec<(String, String)>;

#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub name: String,
    pub params: TypedList,
    pub durative: bool,
    pub duration: Vec<(Comparator, Expr)>,
    pub conditions: Vec<(Timing, Cond)>,
    pub effects: Vec<(Timing, Effect)>,
    pub pos: Pos,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    /// `(type, parent)`; roots have parent `object`.
    pub types: TypedList,
    pub constants: TypedList,
    pub predicates: Vec<(String, TypedList)>,
    pub functions: Vec<(String, TypedList)>,
    pub schemas: Vec<Schema>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProblemDef {
    pub name: String,
    pub domain: String,
    pub objects: TypedList,
    pub init_atoms: Vec<Atom>,
    pub init_values: Vec<(Atom, f64)>,
    pub goal: Vec<Cond>,
    pub warnings: Vec<ParseDiagnostic>,
}

type PResult<T> = Result<T, ParseDiagnostic>;

fn err<T>(pos: Pos, msg: impl Into<String>) -> PResult<T> {
    Err(ParseDiagnostic::error(pos, msg))
}

fn unsupported<T>(pos: Pos, construct: &str) -> PResult<T> {
    err(pos, format!("unsupported feature: {construct}"))
}

fn expect_list<'a>(e: &'a Sexpr, what: &str) -> PResult<&'a [Sexpr]> {
    e.list()
        .map_or_else(|| err(e.pos(), format!("expected {what}")), Ok)
}

fn expect_atom<'a>(e: &'a Sexpr, what: &str) -> PResult<&'a str> {
    e.atom()
        .map_or_else(|| err(e.pos(), format!("expected {what}")), Ok)
}

/// Parses `a b - t c - u d` into pairs; untyped names get `object`.
fn typed_list(items: &[Sexpr]) -> PResult<TypedList> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = expect_atom(&items[i], "a name")?;
        if s == "-" {
            let Some(t) = items.get(i + 1) else {
                return err(items[i].pos(), "missing type after `-`");
            };
            if t.head() == Some("either") {
                return unsupported(t.pos(), "either types");
            }
            let t = expect_atom(t, "a type name")?;
            out.extend(pending.drain(..).map(|n| (n, t.to_string())));
            i += 2;
        } else {
            pending.push(s.to_string());
            i += 1;
        }
    }
    out.extend(pending.into_iter().map(|n| (n, "object".to_string())));
    Ok(out)
}

fn term(e: &Sexpr) -> PResult<Term> {
    let s = expect_atom(e, "a term")?;
    Ok(if s.starts_with('?') {
        Term::Var(s.to_string())
    } else {
        Term::Const(s.to_string())
    })
}

fn atom(e: &Sexpr) -> PResult<Atom> {
    let items = expect_list(e, "an atom")?;
    let name = items
        .first()
        .map(|h| expect_atom(h, "a predicate name"))
        .transpose()?
        .ok_or_else(|| ParseDiagnostic::error(e.pos(), "empty atom"))?;
    Ok(Atom {
        name: name.to_string(),
        args: items[1..].iter().map(term).collect::<PResult<_>>()?,
        pos: e.pos(),
    })
}

fn comparator(s: &str) -> Option<Comparator> {
    Some(match s {
        "<" => Comparator::Lt,
        "<=" => Comparator::Le,
        "=" => Comparator::Eq,
        ">=" => Comparator::Ge,
        ">" => Comparator::Gt,
        _ => return None,
    })
}

pub fn expr(e: &Sexpr) -> PResult<Expr> {
    match e {
        Sexpr::Atom(s, pos) => match s.as_str() {
            "?duration" => Ok(Expr::Duration),
            "#t" => Ok(Expr::Time),
            _ => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Expr::Num)
                .map_or_else(|| err(*pos, format!("expected a number, found `{s}`")), Ok),
        },
        Sexpr::List(items, pos) => {
            let head = items.first().and_then(Sexpr::atom).unwrap_or("");
            let args = &items[1.min(items.len())..];
            let bin = |f: fn(Box<Expr>, Box<Expr>) -> Expr| -> PResult<Expr> {
                let mut it = args.iter().map(expr);
                let first = it
                    .next()
                    .ok_or_else(|| ParseDiagnostic::error(*pos, format!("`{head}` needs operands")))??;
                let mut acc = first;
                let mut n = 1;
                for x in it {
                    acc = f(Box::new(acc), Box::new(x?));
                    n += 1;
                }
                if n < 2 {
                    return err(*pos, format!("`{head}` needs two operands"));
                }
                Ok(acc)
            };
            match head {
                "+" => bin(Expr::Add),
                "*" => bin(Expr::Mul),
                "/" => {
                    if args.len() != 2 {
                        return err(*pos, "`/` takes two operands");
                    }
                    bin(Expr::Div)
                }
                "-" => match args.len() {
                    1 => Ok(Expr::Neg(Box::new(expr(&args[0])?))),
                    2 => bin(Expr::Sub),
                    _ => err(*pos, "`-` takes one or two operands"),
                },
                "^" | "sqrt" | "exp" | "log" | "abs" | "min" | "max" => {
                    unsupported(*pos, &format!("numeric operator `{head}`"))
                }
                _ => Ok(Expr::Fluent(atom(e)?)),
            }
        }
    }
}

/// Flattens `(and ...)` and applies `f` to each conjunct.
fn conjuncts(e: &Sexpr) -> PResult<Vec<&Sexpr>> {
    match e.head() {
        Some("and") => {
            let mut out = Vec::new();
            for c in &e.list().unwrap()[1..] {
                out.extend(conjuncts(c)?);
            }
            Ok(out)
        }
        _ => {
            if matches!(e.list(), Some([])) {
                Ok(Vec::new())
            } else {
                Ok(vec![e])
            }
        }
    }
}

pub fn condition(e: &Sexpr) -> PResult<Cond> {
    let items = expect_list(e, "a condition")?;
    let head = items.first().and_then(Sexpr::atom).unwrap_or("");
    if let Some(cmp) = comparator(head) {
        if items.len() != 3 {
            return err(e.pos(), "comparison takes two operands");
        }
        return Ok(Cond::Compare(cmp, expr(&items[1])?, expr(&items[2])?, e.pos()));
    }
    match head {
        "not" => unsupported(e.pos(), "negative preconditions"),
        "or" | "imply" | "exists" | "forall" | "when" => unsupported(e.pos(), &format!("`{head}` conditions")),
        "at" | "over" => err(e.pos(), "temporal qualifier outside of a durative action"),
        _ => Ok(Cond::Atom(atom(e)?)),
    }
}

pub fn conditions(e: &Sexpr) -> PResult<Vec<Cond>> {
    conjuncts(e)?.into_iter().map(condition).collect()
}

fn timed(e: &Sexpr) -> PResult<Option<(Timing, &Sexpr)>> {
    let items = expect_list(e, "an expression")?;
    let t = match (items.first().and_then(Sexpr::atom), items.get(1).and_then(Sexpr::atom)) {
        (Some("at"), Some("start")) => Timing::Start,
        (Some("at"), Some("end")) => Timing::End,
        (Some("over"), Some("all")) => Timing::OverAll,
        _ => return Ok(None),
    };
    if items.len() != 3 {
        return err(e.pos(), "temporal qualifier wraps exactly one expression");
    }
    Ok(Some((t, &items[2])))
}

fn num_op(s: &str) -> Option<NumOp> {
    Some(match s {
        "assign" => NumOp::Assign,
        "increase" => NumOp::Increase,
        "decrease" => NumOp::Decrease,
        _ => return None,
    })
}

fn mentions_time(e: &Expr) -> bool {
    match e {
        Expr::Time => true,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            mentions_time(a) || mentions_time(b)
        }
        Expr::Neg(a) => mentions_time(a),
        _ => false,
    }
}

/// Extracts the rate from `#t`, `(* #t r)` or `(* r #t)`.
fn rate_of(e: &Expr, pos: Pos) -> PResult<Expr> {
    match e {
        Expr::Time => Ok(Expr::Num(1.0)),
        Expr::Mul(a, b) if **a == Expr::Time && !mentions_time(b) => Ok((**b).clone()),
        Expr::Mul(a, b) if **b == Expr::Time && !mentions_time(a) => Ok((**a).clone()),
        _ => unsupported(pos, "nonlinear #t expression"),
    }
}

fn effect(e: &Sexpr) -> PResult<Effect> {
    let items = expect_list(e, "an effect")?;
    let head = items.first().and_then(Sexpr::atom).unwrap_or("");
    if let Some(op) = num_op(head) {
        if items.len() != 3 {
            return err(e.pos(), format!("`{head}` takes a fluent and an expression"));
        }
        let target = atom(&items[1])?;
        let value = expr(&items[2])?;
        if mentions_time(&value) {
            if op == NumOp::Assign {
                return unsupported(e.pos(), "assign with #t");
            }
            return Ok(Effect::Continuous(op, target, rate_of(&value, e.pos())?));
        }
        return Ok(Effect::Numeric(op, target, value));
    }
    match head {
        "not" => {
            if items.len() != 2 {
                return err(e.pos(), "`not` takes one atom");
            }
            Ok(Effect::Del(atom(&items[1])?))
        }
        "when" | "forall" => unsupported(e.pos(), &format!("`{head}` effects")),
        "scale-up" | "scale-down" => unsupported(e.pos(), &format!("`{head}` effects")),
        _ => Ok(Effect::Add(atom(e)?)),
    }
}

fn durative_schema(name: &str, items: &[Sexpr], pos: Pos) -> PResult<Schema> {
    let mut s = Schema {
        name: name.to_string(),
        params: Vec::new(),
        durative: true,
        duration: Vec::new(),
        conditions: Vec::new(),
        effects: Vec::new(),
        pos,
    };
    let mut i = 0;
    while i < items.len() {
        let key = expect_atom(&items[i], "a keyword")?;
        let Some(value) = items.get(i + 1) else {
            return err(items[i].pos(), format!("`{key}` without a value"));
        };
        match key {
            ":parameters" => s.params = typed_list(expect_list(value, "a parameter list")?)?,
            ":duration" => {
                for c in conjuncts(value)? {
                    let l = expect_list(c, "a duration constraint")?;
                    let cmp = l.first().and_then(Sexpr::atom).and_then(comparator);
                    match (cmp, l.len()) {
                        (Some(cmp), 3) if l[1].is_atom("?duration") => {
                            s.duration.push((cmp, expr(&l[2])?))
                        }
                        _ => return err(c.pos(), "expected (<cmp> ?duration <expr>)"),
                    }
                }
            }
            ":condition" => {
                for c in conjuncts(value)? {
                    let Some((t, inner)) = timed(c)? else {
                        return err(c.pos(), "durative condition must be at start, at end or over all");
                    };
                    for cc in conjuncts(inner)? {
                        s.conditions.push((t, condition(cc)?));
                    }
                }
            }
            ":effect" => {
                for c in conjuncts(value)? {
                    match timed(c)? {
                        Some((Timing::OverAll, _)) => {
                            return err(c.pos(), "effects cannot be over all")
                        }
                        Some((t, inner)) => {
                            for cc in conjuncts(inner)? {
                                let eff = effect(cc)?;
                                if matches!(eff, Effect::Continuous(..)) {
                                    return err(cc.pos(), "continuous effects are not time-qualified");
                                }
                                s.effects.push((t, eff));
                            }
                        }
                        None => {
                            let eff = effect(c)?;
                            if !matches!(eff, Effect::Continuous(..)) {
                                return err(c.pos(), "discrete effect must be at start or at end");
                            }
                            s.effects.push((Timing::OverAll, eff));
                        }
                    }
                }
            }
            _ => return err(items[i].pos(), format!("unknown durative-action field `{key}`")),
        }
        i += 2;
    }
    Ok(s)
}

fn instant_schema(name: &str, items: &[Sexpr], pos: Pos) -> PResult<Schema> {
    let mut s = Schema {
        name: name.to_string(),
        params: Vec::new(),
        durative: false,
        duration: Vec::new(),
        conditions: Vec::new(),
        effects: Vec::new(),
        pos,
    };
    let mut i = 0;
    while i < items.len() {
        let key = expect_atom(&items[i], "a keyword")?;
        let Some(value) = items.get(i + 1) else {
            return err(items[i].pos(), format!("`{key}` without a value"));
        };
        match key {
            ":parameters" => s.params = typed_list(expect_list(value, "a parameter list")?)?,
            ":precondition" => {
                for c in conjuncts(value)? {
                    s.conditions.push((Timing::Start, condition(c)?));
                }
            }
            ":effect" => {
                for c in conjuncts(value)? {
                    let eff = effect(c)?;
                    if matches!(eff, Effect::Continuous(..)) {
                        return err(c.pos(), "continuous effect on an instantaneous action");
                    }
                    s.effects.push((Timing::Start, eff));
                }
            }
            _ => return err(items[i].pos(), format!("unknown action field `{key}`")),
        }
        i += 2;
    }
    Ok(s)
}

fn signature(e: &Sexpr) -> PResult<(String, TypedList)> {
    let items = expect_list(e, "a declaration")?;
    let name = items
        .first()
        .ok_or_else(|| ParseDiagnostic::error(e.pos(), "empty declaration"))
        .and_then(|h| expect_atom(h, "a name"))?;
    Ok((name.to_string(), typed_list(&items[1..])?))
}

/// Checks the `(define (<kind> <name>) ...)` wrapper and returns the name and sections.
fn define<'a>(e: &'a Sexpr, kind: &str) -> PResult<(String, &'a [Sexpr])> {
    let items = expect_list(e, "(define ...)")?;
    if !items.first().is_some_and(|h| h.is_atom("define")) {
        return err(e.pos(), "expected (define ...)");
    }
    let header = items
        .get(1)
        .ok_or_else(|| ParseDiagnostic::error(e.pos(), "missing header"))?;
    let h = expect_list(header, "a header")?;
    match h {
        [k, n] if k.is_atom(kind) => Ok((expect_atom(n, "a name")?.to_string(), &items[2..])),
        _ => err(header.pos(), format!("expected ({kind} <name>)")),
    }
}

pub fn parse_domain(e: &Sexpr) -> PResult<Domain> {
    let (name, sections) = define(e, "domain")?;
    let mut d = Domain {
        name,
        ..Domain::default()
    };
    for sec in sections {
        let items = expect_list(sec, "a domain section")?;
        let key = items.first().and_then(Sexpr::atom).unwrap_or("");
        let rest = &items[1.min(items.len())..];
        match key {
            ":requirements" => {
                for r in rest {
                    let r = expect_atom(r, "a requirement")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return unsupported(sec.pos(), &format!("requirement `{r}`"));
                    }
                    d.requirements.push(r.to_string());
                }
            }
            ":types" => d.types = typed_list(rest)?,
            ":constants" => d.constants = typed_list(rest)?,
            ":predicates" => {
                d.predicates = rest.iter().map(signature).collect::<PResult<_>>()?;
            }
            ":functions" => {
                let mut i = 0;
                while i < rest.len() {
                    d.functions.push(signature(&rest[i])?);
                    // optional `- number` return type
                    if rest.get(i + 1).is_some_and(|s| s.is_atom("-")) {
                        match rest.get(i + 2).and_then(Sexpr::atom) {
                            Some("number") => i += 2,
                            _ => return unsupported(rest[i].pos(), "non-number function type"),
                        }
                    }
                    i += 1;
                }
            }
            ":durative-action" | ":action" => {
                let name = rest
                    .first()
                    .ok_or_else(|| ParseDiagnostic::error(sec.pos(), "action without a name"))
                    .and_then(|n| expect_atom(n, "an action name"))?;
                let schema = if key == ":action" {
                    instant_schema(name, &rest[1..], sec.pos())?
                } else {
                    durative_schema(name, &rest[1..], sec.pos())?
                };
                d.schemas.push(schema);
            }
            ":derived" => return unsupported(sec.pos(), "derived predicates"),
            _ => return unsupported(sec.pos(), &format!("domain section `{key}`")),
        }
    }
    Ok(d)
}

pub fn parse_problem(e: &Sexpr) -> PResult<ProblemDef> {
    let (name, sections) = define(e, "problem")?;
    let mut p = ProblemDef {
        name,
        ..ProblemDef::default()
    };
    for sec in sections {
        let items = expect_list(sec, "a problem section")?;
        let key = items.first().and_then(Sexpr::atom).unwrap_or("");
        let rest = &items[1.min(items.len())..];
        match key {
            ":domain" => p.domain = expect_atom(rest.first().unwrap_or(sec), "a domain name")?.to_string(),
            ":objects" => p.objects = typed_list(rest)?,
            ":init" => {
                for f in rest {
                    match f.head() {
                        Some("=") => {
                            let l = f.list().unwrap();
                            if l.len() != 3 {
                                return err(f.pos(), "expected (= (f ...) value)");
                            }
                            let v = match expr(&l[2])? {
                                Expr::Num(v) => v,
                                Expr::Neg(b) if matches!(*b, Expr::Num(_)) => match *b {
                                    Expr::Num(v) => -v,
                                    _ => unreachable!(),
                                },
                                _ => return err(l[2].pos(), "initial value must be a number"),
                            };
                            p.init_values.push((atom(&l[1])?, v));
                        }
                        Some("at") => return unsupported(f.pos(), "timed initial literals"),
                        Some("not") => {}
                        _ => p.init_atoms.push(atom(f)?),
                    }
                }
            }
            ":goal" => p.goal = conditions(rest.first().unwrap_or(sec))?,
            ":metric" => p.warnings.push(ParseDiagnostic::warning(
                sec.pos(),
                "plan metric ignored; the planner minimises plan length",
            )),
            ":requirements" => {
                for r in rest {
                    let r = expect_atom(r, "a requirement")?;
                    if !SUPPORTED_REQUIREMENTS.contains(&r) {
                        return unsupported(sec.pos(), &format!("requirement `{r}`"));
                    }
                }
            }
            _ => return unsupported(sec.pos(), &format!("problem section `{key}`")),
        }
    }
    Ok(p)
}
