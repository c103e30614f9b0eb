//! Front end for the two input dialects: SMT-LIB2 scripts in the HORN
//! fragment and Z3's Datalog-style `rule`/`query` files.
//!
//! A clause is accepted when it has the shape
//! `(forall (vars) (=> body head))`, `(not (exists (vars) body))`, a
//! ground implication, or a bare (possibly quantified) head application.
//! Bodies mix constraint atoms with positive predicate applications; any
//! predicate occurrence nested under other connectives is rejected, as are
//! sorts outside Int/Bool. `let` bindings are inlined and may appear inside
//! constraint terms, not across the clause skeleton.
//!
//! Interpreted heads are folded into the body: `body -> psi` becomes the
//! query `body /\ not psi -> false`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::chc::{ChcError, ChcSystem, Clause, ClauseHead, PredApp, Predicate};
use crate::expr::{Expr, Sort, Variable};

/// Input dialect selector. `Auto` accepts the union of both command sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Auto,
    Smt2,
    Datalog,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    fn at(pos: Pos, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: pos.line,
            col: pos.col,
            msg: msg.into(),
        }
    }

    fn whole_file(msg: impl Into<String>) -> ParseError {
        ParseError {
            line: 0,
            col: 0,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "parse error: {}", self.msg)
        } else {
            write!(f, "parse error at {}:{}: {}", self.line, self.col, self.msg)
        }
    }
}

impl std::error::Error for ParseError {}

impl From<ChcError> for ParseError {
    fn from(e: ChcError) -> Self {
        ParseError::whole_file(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Debug, Clone)]
enum SExpr {
    Atom(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    fn pos(&self) -> Pos {
        match self {
            SExpr::Atom(_, p) | SExpr::List(_, p) => *p,
        }
    }

    fn as_atom(&self) -> Option<&str> {
        match self {
            SExpr::Atom(s, _) => Some(s),
            SExpr::List(_, _) => None,
        }
    }
}

fn read_sexprs(src: &str) -> Result<Vec<SExpr>, ParseError> {
    let mut chars = src.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut top = Vec::new();

    macro_rules! push {
        ($e:expr) => {
            match stack.last_mut() {
                Some((list, _)) => list.push($e),
                None => top.push($e),
            }
        };
    }

    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        line += 1;
                        col = 1;
                        break;
                    }
                }
            }
            '(' => {
                chars.next();
                col += 1;
                stack.push((Vec::new(), pos));
            }
            ')' => {
                chars.next();
                col += 1;
                match stack.pop() {
                    Some((list, open)) => push!(SExpr::List(list, open)),
                    None => return Err(ParseError::at(pos, "unbalanced ')'")),
                }
            }
            '|' => {
                chars.next();
                col += 1;
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('|') => {
                            col += 1;
                            break;
                        }
                        Some('\n') => {
                            name.push('\n');
                            line += 1;
                            col = 1;
                        }
                        Some(c) => {
                            name.push(c);
                            col += 1;
                        }
                        None => return Err(ParseError::at(pos, "unterminated '|' symbol")),
                    }
                }
                push!(SExpr::Atom(name, pos));
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::from("\"");
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            // SMT-LIB escapes a quote by doubling it
                            if chars.peek() == Some(&'"') {
                                chars.next();
                                col += 1;
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some('\n') => {
                            s.push('\n');
                            line += 1;
                            col = 1;
                        }
                        Some(c) => {
                            s.push(c);
                            col += 1;
                        }
                        None => return Err(ParseError::at(pos, "unterminated string")),
                    }
                }
                s.push('"');
                push!(SExpr::Atom(s, pos));
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';' | '|' | '"') {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                    col += 1;
                }
                push!(SExpr::Atom(atom, pos));
            }
        }
    }
    if let Some((_, open)) = stack.pop() {
        return Err(ParseError::at(open, "unclosed '('"));
    }
    Ok(top)
}

/// Parse a problem in the given dialect.
pub fn parse_str(src: &str, format: Format) -> Result<ChcSystem, ParseError> {
    let sexprs = read_sexprs(src)?;
    let mut st = Script::new(format);
    for s in &sexprs {
        st.command(s)?;
    }
    st.finish()
}

/// Guess the dialect from command names, then parse.
pub fn parse_auto(src: &str) -> Result<ChcSystem, ParseError> {
    parse_str(src, Format::Auto)
}

struct Script {
    format: Format,
    preds: HashMap<String, Arc<Predicate>>,
    pred_order: Vec<Arc<Predicate>>,
    global_vars: BTreeMap<String, Variable>,
    clauses: Vec<Clause>,
}

impl Script {
    fn new(format: Format) -> Script {
        Script {
            format,
            preds: HashMap::new(),
            pred_order: Vec::new(),
            global_vars: BTreeMap::new(),
            clauses: Vec::new(),
        }
    }

    fn command(&mut self, s: &SExpr) -> Result<(), ParseError> {
        let items = match s {
            SExpr::List(items, _) if !items.is_empty() => items,
            _ => return Err(ParseError::at(s.pos(), "expected a command")),
        };
        let head = items[0]
            .as_atom()
            .ok_or_else(|| ParseError::at(items[0].pos(), "expected a command name"))?;
        match head {
            "set-logic" | "set-info" | "set-option" | "check-sat" | "get-model"
            | "get-info" | "exit" | "echo" => Ok(()),
            "declare-fun" => {
                self.expect_dialect(s, Format::Smt2)?;
                self.declare_fun(items, s.pos())
            }
            "declare-const" => {
                self.expect_dialect(s, Format::Smt2)?;
                self.declare_const(items, s.pos())
            }
            "assert" => {
                self.expect_dialect(s, Format::Smt2)?;
                if items.len() != 2 {
                    return Err(ParseError::at(s.pos(), "assert takes one argument"));
                }
                self.assert_clause(&items[1])
            }
            "declare-rel" => {
                self.expect_dialect(s, Format::Datalog)?;
                self.declare_rel(items, s.pos())
            }
            "declare-var" => {
                self.expect_dialect(s, Format::Datalog)?;
                self.declare_var(items, s.pos())
            }
            "rule" => {
                self.expect_dialect(s, Format::Datalog)?;
                if items.len() != 2 {
                    return Err(ParseError::at(s.pos(), "rule takes one argument"));
                }
                self.datalog_rule(&items[1])
            }
            "query" => {
                self.expect_dialect(s, Format::Datalog)?;
                if items.len() != 2 {
                    return Err(ParseError::at(s.pos(), "query takes one argument"));
                }
                self.datalog_query(&items[1])
            }
            other => Err(ParseError::at(
                s.pos(),
                format!("unsupported command '{other}'"),
            )),
        }
    }

    fn expect_dialect(&self, s: &SExpr, d: Format) -> Result<(), ParseError> {
        if self.format == Format::Auto || self.format == d {
            Ok(())
        } else {
            Err(ParseError::at(
                s.pos(),
                format!("command not available in {:?} format", self.format),
            ))
        }
    }

    fn declare_pred(
        &mut self,
        name: &str,
        sorts: Vec<Sort>,
        pos: Pos,
    ) -> Result<(), ParseError> {
        if self.preds.contains_key(name) {
            return Err(ParseError::at(pos, format!("'{name}' declared twice")));
        }
        let p = Arc::new(Predicate::new(name.to_string(), sorts));
        self.preds.insert(name.to_string(), p.clone());
        self.pred_order.push(p);
        Ok(())
    }

    fn declare_fun(&mut self, items: &[SExpr], pos: Pos) -> Result<(), ParseError> {
        if items.len() != 4 {
            return Err(ParseError::at(pos, "declare-fun takes name, domain, codomain"));
        }
        let name = items[1]
            .as_atom()
            .ok_or_else(|| ParseError::at(items[1].pos(), "expected a name"))?;
        let domain = match &items[2] {
            SExpr::List(ds, _) => ds.iter().map(parse_sort).collect::<Result<Vec<_>, _>>()?,
            other => return Err(ParseError::at(other.pos(), "expected a sort list")),
        };
        match parse_sort(&items[3])? {
            Sort::Bool => self.declare_pred(name, domain, pos),
            Sort::Int => Err(ParseError::at(
                items[3].pos(),
                "only Bool-valued declarations are supported",
            )),
        }
    }

    fn declare_const(&mut self, items: &[SExpr], pos: Pos) -> Result<(), ParseError> {
        if items.len() != 3 {
            return Err(ParseError::at(pos, "declare-const takes name and sort"));
        }
        let name = items[1]
            .as_atom()
            .ok_or_else(|| ParseError::at(items[1].pos(), "expected a name"))?;
        match parse_sort(&items[2])? {
            Sort::Bool => self.declare_pred(name, vec![], pos),
            Sort::Int => Err(ParseError::at(
                items[2].pos(),
                "only Bool-valued declarations are supported",
            )),
        }
    }

    fn declare_rel(&mut self, items: &[SExpr], pos: Pos) -> Result<(), ParseError> {
        if items.len() != 3 {
            return Err(ParseError::at(pos, "declare-rel takes name and domain"));
        }
        let name = items[1]
            .as_atom()
            .ok_or_else(|| ParseError::at(items[1].pos(), "expected a name"))?;
        let domain = match &items[2] {
            SExpr::List(ds, _) => ds.iter().map(parse_sort).collect::<Result<Vec<_>, _>>()?,
            other => return Err(ParseError::at(other.pos(), "expected a sort list")),
        };
        self.declare_pred(name, domain, pos)
    }

    fn declare_var(&mut self, items: &[SExpr], pos: Pos) -> Result<(), ParseError> {
        if items.len() != 3 {
            return Err(ParseError::at(pos, "declare-var takes name and sort"));
        }
        let name = items[1]
            .as_atom()
            .ok_or_else(|| ParseError::at(items[1].pos(), "expected a name"))?;
        let sort = parse_sort(&items[2])?;
        self.global_vars
            .insert(name.to_string(), Variable::new(name.to_string(), sort));
        Ok(())
    }

    fn assert_clause(&mut self, body: &SExpr) -> Result<(), ParseError> {
        let body = strip_annotation(body);
        // (forall (vars) skeleton)
        if let SExpr::List(items, pos) = body {
            if items.first().and_then(|h| h.as_atom()) == Some("forall") {
                if items.len() != 3 {
                    return Err(ParseError::at(*pos, "forall takes bindings and a body"));
                }
                let vars = parse_bindings(&items[1])?;
                return self.skeleton(&items[2], vars);
            }
            // (not (exists (vars) conj)) is the negated-query spelling
            if items.first().and_then(|h| h.as_atom()) == Some("not") && items.len() == 2 {
                if let SExpr::List(inner, ipos) = strip_annotation(&items[1]) {
                    if inner.first().and_then(|h| h.as_atom()) == Some("exists") {
                        if inner.len() != 3 {
                            return Err(ParseError::at(
                                *ipos,
                                "exists takes bindings and a body",
                            ));
                        }
                        let vars = parse_bindings(&inner[1])?;
                        let scope = self.scope(&vars);
                        let (constraint, apps) = self.parse_body(&inner[2], &scope)?;
                        self.push_clause(Clause {
                            vars,
                            constraint,
                            body_apps: apps,
                            head: ClauseHead::False,
                        });
                        return Ok(());
                    }
                }
            }
        }
        // ground clause
        self.skeleton(body, Vec::new())
    }

    /// Parse `(=> body head)`, a bare head application, or an interpreted
    /// ground formula, under the given bound variables.
    fn skeleton(&mut self, s: &SExpr, vars: Vec<Variable>) -> Result<(), ParseError> {
        let s = strip_annotation(s);
        let scope = self.scope(&vars);
        if let SExpr::List(items, _) = s {
            if items.first().and_then(|h| h.as_atom()) == Some("=>") && items.len() >= 3 {
                // right-assoc: (=> a b c) is a -> (b -> c)
                let head = &items[items.len() - 1];
                let body_parts = &items[1..items.len() - 1];
                let mut constraint = Vec::new();
                let mut apps = Vec::new();
                for part in body_parts {
                    let (c, a) = self.parse_body(part, &scope)?;
                    if !c.is_true() {
                        constraint.push(c);
                    }
                    apps.extend(a);
                }
                return self.finish_clause(vars, Expr::and(constraint), apps, head, &scope);
            }
        }
        // no implication: the whole thing is the head, body is empty
        self.finish_clause(vars, Expr::tt(), Vec::new(), s, &scope)
    }

    fn finish_clause(
        &mut self,
        vars: Vec<Variable>,
        mut constraint: Expr,
        apps: Vec<PredApp>,
        head: &SExpr,
        scope: &HashMap<String, Variable>,
    ) -> Result<(), ParseError> {
        let head = strip_annotation(head);
        let head = match self.try_pred_app(head, scope)? {
            Some(app) => ClauseHead::Pred(app),
            None => match head.as_atom() {
                Some("false") => ClauseHead::False,
                Some("true") => return Ok(()), // vacuous clause
                _ => {
                    // (not app) head is sugar for a query
                    if let SExpr::List(items, _) = head {
                        if items.first().and_then(|h| h.as_atom()) == Some("not")
                            && items.len() == 2
                        {
                            if let Some(app) = self.try_pred_app(&items[1], scope)? {
                                let mut apps = apps;
                                apps.push(app);
                                self.push_clause(Clause {
                                    vars,
                                    constraint,
                                    body_apps: apps,
                                    head: ClauseHead::False,
                                });
                                return Ok(());
                            }
                        }
                    }
                    // interpreted head: fold its negation into the body
                    let psi = self.parse_constraint(head, scope)?;
                    constraint = Expr::and(vec![constraint, Expr::not(psi)]);
                    ClauseHead::False
                }
            },
        };
        self.push_clause(Clause {
            vars,
            constraint,
            body_apps: apps,
            head,
        });
        Ok(())
    }

    fn push_clause(&mut self, mut clause: Clause) {
        // keep only variables the clause actually mentions
        let mut used = clause.constraint.free_vars();
        for app in &clause.body_apps {
            used.extend(app.free_vars());
        }
        if let ClauseHead::Pred(app) = &clause.head {
            used.extend(app.free_vars());
        }
        clause.vars.retain(|v| used.contains(v));
        self.clauses.push(clause);
    }

    fn datalog_rule(&mut self, s: &SExpr) -> Result<(), ParseError> {
        // variables come from declare-var; collect the used ones afterwards
        let vars: Vec<Variable> = self.global_vars.values().cloned().collect();
        self.skeleton(s, vars)
    }

    fn datalog_query(&mut self, s: &SExpr) -> Result<(), ParseError> {
        // (query pred) names a relation; (query (pred x y)) applies it
        if let Some(name) = s.as_atom() {
            if let Some(p) = self.preds.get(name).cloned() {
                let vars = p.canonical_vars();
                let args = vars.iter().cloned().map(Expr::var).collect();
                self.push_clause(Clause {
                    vars,
                    constraint: Expr::tt(),
                    body_apps: vec![PredApp::new(p, args)],
                    head: ClauseHead::False,
                });
                return Ok(());
            }
            return Err(ParseError::at(s.pos(), format!("unknown relation '{name}'")));
        }
        let scope = self.scope(&[]);
        match self.try_pred_app(s, &scope)? {
            Some(app) => {
                let vars: Vec<Variable> = app.free_vars().into_iter().collect();
                self.push_clause(Clause {
                    vars,
                    constraint: Expr::tt(),
                    body_apps: vec![app],
                    head: ClauseHead::False,
                });
                Ok(())
            }
            None => Err(ParseError::at(s.pos(), "query expects a relation")),
        }
    }

    fn scope(&self, vars: &[Variable]) -> HashMap<String, Variable> {
        let mut scope: HashMap<String, Variable> = self
            .global_vars
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        for v in vars {
            scope.insert(v.name.to_string(), v.clone());
        }
        scope
    }

    /// Split a body into its constraint and its predicate applications.
    fn parse_body(
        &self,
        s: &SExpr,
        scope: &HashMap<String, Variable>,
    ) -> Result<(Expr, Vec<PredApp>), ParseError> {
        let s = strip_annotation(s);
        let mut constraint = Vec::new();
        let mut apps = Vec::new();
        let mut queue = vec![s];
        while let Some(part) = queue.pop() {
            let part = strip_annotation(part);
            if let SExpr::List(items, _) = part {
                if items.first().and_then(|h| h.as_atom()) == Some("and") {
                    // conjuncts may mix constraints and applications
                    queue.extend(items[1..].iter());
                    continue;
                }
            }
            match self.try_pred_app(part, scope)? {
                Some(app) => apps.push(app),
                None => constraint.push(self.parse_constraint(part, scope)?),
            }
        }
        apps.reverse();
        constraint.reverse();
        Ok((Expr::and(constraint), apps))
    }

    /// Recognize `p` or `(p t1 .. tn)` for a declared predicate `p`.
    fn try_pred_app(
        &self,
        s: &SExpr,
        scope: &HashMap<String, Variable>,
    ) -> Result<Option<PredApp>, ParseError> {
        let s = strip_annotation(s);
        match s {
            SExpr::Atom(name, pos) => match self.preds.get(name) {
                Some(p) if p.arity() == 0 => Ok(Some(PredApp::new(p.clone(), vec![]))),
                Some(_) => Err(ParseError::at(
                    *pos,
                    format!("relation '{name}' used without arguments"),
                )),
                None => Ok(None),
            },
            SExpr::List(items, pos) => {
                let name = match items.first().and_then(|h| h.as_atom()) {
                    Some(n) => n,
                    None => return Ok(None),
                };
                let p = match self.preds.get(name) {
                    Some(p) => p.clone(),
                    None => return Ok(None),
                };
                if items.len() - 1 != p.arity() {
                    return Err(ParseError::at(
                        *pos,
                        format!(
                            "relation '{name}' expects {} arguments, got {}",
                            p.arity(),
                            items.len() - 1
                        ),
                    ));
                }
                let mut args = Vec::with_capacity(p.arity());
                for (i, (raw, want)) in items[1..].iter().zip(&p.arg_sorts).enumerate() {
                    let arg = self.parse_term(raw, scope, &HashMap::new())?;
                    let got = arg.sort();
                    if got != Some(*want) {
                        return Err(ParseError::at(
                            raw.pos(),
                            format!("argument {i} of '{name}' must be {want}"),
                        ));
                    }
                    args.push(arg);
                }
                Ok(Some(PredApp::new(p, args)))
            }
        }
    }

    /// Parse a predicate-free Boolean formula.
    fn parse_constraint(
        &self,
        s: &SExpr,
        scope: &HashMap<String, Variable>,
    ) -> Result<Expr, ParseError> {
        let e = self.parse_term(s, scope, &HashMap::new())?;
        if e.sort() != Some(Sort::Bool) {
            return Err(ParseError::at(s.pos(), "expected a Boolean formula"));
        }
        Ok(e)
    }

    fn parse_term(
        &self,
        s: &SExpr,
        scope: &HashMap<String, Variable>,
        lets: &HashMap<String, Expr>,
    ) -> Result<Expr, ParseError> {
        let s = strip_annotation(s);
        match s {
            SExpr::Atom(a, pos) => {
                if let Some(e) = lets.get(a) {
                    return Ok(e.clone());
                }
                if let Some(v) = scope.get(a) {
                    return Ok(Expr::var(v.clone()));
                }
                match a.as_str() {
                    "true" => return Ok(Expr::tt()),
                    "false" => return Ok(Expr::ff()),
                    _ => {}
                }
                if let Some(n) = parse_numeral(a) {
                    return Ok(Expr::int(n));
                }
                if self.preds.contains_key(a) {
                    return Err(ParseError::at(
                        *pos,
                        format!("relation '{a}' may not appear under other operators"),
                    ));
                }
                Err(ParseError::at(*pos, format!("unknown symbol '{a}'")))
            }
            SExpr::List(items, pos) => {
                let op = match items.first().and_then(|h| h.as_atom()) {
                    Some(op) => op,
                    None => return Err(ParseError::at(*pos, "expected an operator")),
                };
                if self.preds.contains_key(op) {
                    return Err(ParseError::at(
                        *pos,
                        format!("relation '{op}' may not appear under other operators"),
                    ));
                }
                let args = &items[1..];
                match op {
                    "let" => {
                        if items.len() != 3 {
                            return Err(ParseError::at(*pos, "let takes bindings and a body"));
                        }
                        let bindings = match &items[1] {
                            SExpr::List(bs, _) => bs,
                            other => {
                                return Err(ParseError::at(other.pos(), "expected bindings"))
                            }
                        };
                        let mut extended = lets.clone();
                        for b in bindings {
                            match b {
                                SExpr::List(kv, _) if kv.len() == 2 => {
                                    let name = kv[0].as_atom().ok_or_else(|| {
                                        ParseError::at(kv[0].pos(), "expected a name")
                                    })?;
                                    // bindings are parallel: parse in the outer env
                                    let val = self.parse_term(&kv[1], scope, lets)?;
                                    extended.insert(name.to_string(), val);
                                }
                                other => {
                                    return Err(ParseError::at(
                                        other.pos(),
                                        "expected (name term)",
                                    ))
                                }
                            }
                        }
                        self.parse_term(&items[2], scope, &extended)
                    }
                    "+" | "*" => {
                        let parsed = self.int_args(op, args, *pos, scope, lets, 1)?;
                        Ok(if op == "+" {
                            Expr::add(parsed)
                        } else {
                            Expr::mul(parsed)
                        })
                    }
                    "-" => {
                        let parsed = self.int_args(op, args, *pos, scope, lets, 1)?;
                        let mut it = parsed.into_iter();
                        let first = it.next().unwrap();
                        let rest: Vec<Expr> = it.collect();
                        if rest.is_empty() {
                            Ok(match first {
                                Expr::IntLit(n) => Expr::int(-n),
                                e => Expr::neg(e),
                            })
                        } else {
                            Ok(rest.into_iter().fold(first, Expr::sub))
                        }
                    }
                    "div" | "mod" => {
                        let parsed = self.int_args(op, args, *pos, scope, lets, 2)?;
                        if parsed.len() != 2 {
                            return Err(ParseError::at(*pos, format!("{op} takes 2 arguments")));
                        }
                        let mut it = parsed.into_iter();
                        let a = it.next().unwrap();
                        let b = it.next().unwrap();
                        Ok(if op == "div" {
                            Expr::div(a, b)
                        } else {
                            Expr::modulo(a, b)
                        })
                    }
                    "abs" => {
                        let parsed = self.int_args(op, args, *pos, scope, lets, 1)?;
                        if parsed.len() != 1 {
                            return Err(ParseError::at(*pos, "abs takes 1 argument"));
                        }
                        let a = parsed.into_iter().next().unwrap();
                        Ok(Expr::ite(
                            Expr::ge(a.clone(), Expr::int(0)),
                            a.clone(),
                            Expr::neg(a),
                        ))
                    }
                    "<=" | "<" | ">=" | ">" => {
                        let parsed = self.int_args(op, args, *pos, scope, lets, 2)?;
                        let cmp = |a: Expr, b: Expr| match op {
                            "<=" => Expr::le(a, b),
                            "<" => Expr::lt(a, b),
                            ">=" => Expr::ge(a, b),
                            _ => Expr::gt(a, b),
                        };
                        Ok(Expr::and(
                            parsed.windows(2).map(|w| cmp(w[0].clone(), w[1].clone())).collect(),
                        ))
                    }
                    "=" => {
                        let parsed = self.sorted_args(op, args, *pos, scope, lets, 2)?;
                        Ok(Expr::and(
                            parsed
                                .windows(2)
                                .map(|w| Expr::eq(w[0].clone(), w[1].clone()))
                                .collect(),
                        ))
                    }
                    "distinct" => {
                        let parsed = self.sorted_args(op, args, *pos, scope, lets, 2)?;
                        let mut out = Vec::new();
                        for i in 0..parsed.len() {
                            for j in i + 1..parsed.len() {
                                out.push(Expr::not(Expr::eq(
                                    parsed[i].clone(),
                                    parsed[j].clone(),
                                )));
                            }
                        }
                        Ok(Expr::and(out))
                    }
                    "and" | "or" => {
                        let parsed = self.bool_args(op, args, *pos, scope, lets, 0)?;
                        Ok(if op == "and" {
                            Expr::and(parsed)
                        } else {
                            Expr::or(parsed)
                        })
                    }
                    "not" => {
                        let parsed = self.bool_args(op, args, *pos, scope, lets, 1)?;
                        if parsed.len() != 1 {
                            return Err(ParseError::at(*pos, "not takes 1 argument"));
                        }
                        Ok(Expr::not(parsed.into_iter().next().unwrap()))
                    }
                    "=>" => {
                        let parsed = self.bool_args(op, args, *pos, scope, lets, 2)?;
                        let mut it = parsed.into_iter().rev();
                        let last = it.next().unwrap();
                        Ok(it.fold(last, |acc, a| Expr::implies(a, acc)))
                    }
                    "xor" => {
                        let parsed = self.bool_args(op, args, *pos, scope, lets, 2)?;
                        let mut it = parsed.into_iter();
                        let first = it.next().unwrap();
                        Ok(it.fold(first, |acc, a| Expr::not(Expr::eq(acc, a))))
                    }
                    "ite" => {
                        if args.len() != 3 {
                            return Err(ParseError::at(*pos, "ite takes 3 arguments"));
                        }
                        let c = self.parse_term(&args[0], scope, lets)?;
                        let t = self.parse_term(&args[1], scope, lets)?;
                        let e = self.parse_term(&args[2], scope, lets)?;
                        if c.sort() != Some(Sort::Bool) {
                            return Err(ParseError::at(
                                args[0].pos(),
                                "ite condition must be Bool",
                            ));
                        }
                        if t.sort() != e.sort() {
                            return Err(ParseError::at(
                                args[2].pos(),
                                "ite branches must have the same sort",
                            ));
                        }
                        Ok(Expr::ite(c, t, e))
                    }
                    other => Err(ParseError::at(
                        *pos,
                        format!("unsupported function '{other}'"),
                    )),
                }
            }
        }
    }

    fn int_args(
        &self,
        op: &str,
        args: &[SExpr],
        pos: Pos,
        scope: &HashMap<String, Variable>,
        lets: &HashMap<String, Expr>,
        min: usize,
    ) -> Result<Vec<Expr>, ParseError> {
        if args.len() < min {
            return Err(ParseError::at(pos, format!("'{op}' needs arguments")));
        }
        args.iter()
            .map(|a| {
                let e = self.parse_term(a, scope, lets)?;
                if e.sort() != Some(Sort::Int) {
                    return Err(ParseError::at(a.pos(), format!("'{op}' expects Int")));
                }
                Ok(e)
            })
            .collect()
    }

    fn bool_args(
        &self,
        op: &str,
        args: &[SExpr],
        pos: Pos,
        scope: &HashMap<String, Variable>,
        lets: &HashMap<String, Expr>,
        min: usize,
    ) -> Result<Vec<Expr>, ParseError> {
        if args.len() < min {
            return Err(ParseError::at(pos, format!("'{op}' needs arguments")));
        }
        args.iter()
            .map(|a| {
                let e = self.parse_term(a, scope, lets)?;
                if e.sort() != Some(Sort::Bool) {
                    return Err(ParseError::at(a.pos(), format!("'{op}' expects Bool")));
                }
                Ok(e)
            })
            .collect()
    }

    fn sorted_args(
        &self,
        op: &str,
        args: &[SExpr],
        pos: Pos,
        scope: &HashMap<String, Variable>,
        lets: &HashMap<String, Expr>,
        min: usize,
    ) -> Result<Vec<Expr>, ParseError> {
        if args.len() < min {
            return Err(ParseError::at(pos, format!("'{op}' needs arguments")));
        }
        let parsed: Vec<Expr> = args
            .iter()
            .map(|a| self.parse_term(a, scope, lets))
            .collect::<Result<_, _>>()?;
        for (raw, e) in args.iter().zip(&parsed).skip(1) {
            if e.sort() != parsed[0].sort() {
                return Err(ParseError::at(
                    raw.pos(),
                    format!("'{op}' arguments must share a sort"),
                ));
            }
        }
        Ok(parsed)
    }

    fn finish(self) -> Result<ChcSystem, ParseError> {
        Ok(ChcSystem::new(self.pred_order, self.clauses)?)
    }
}

/// Drop `(! e :attr ..)` annotations.
fn strip_annotation(s: &SExpr) -> &SExpr {
    if let SExpr::List(items, _) = s {
        if items.len() >= 2 && items[0].as_atom() == Some("!") {
            return strip_annotation(&items[1]);
        }
    }
    s
}

fn parse_bindings(s: &SExpr) -> Result<Vec<Variable>, ParseError> {
    let items = match s {
        SExpr::List(items, _) => items,
        other => return Err(ParseError::at(other.pos(), "expected sorted variables")),
    };
    let mut vars = Vec::with_capacity(items.len());
    for b in items {
        match b {
            SExpr::List(kv, _) if kv.len() == 2 => {
                let name = kv[0]
                    .as_atom()
                    .ok_or_else(|| ParseError::at(kv[0].pos(), "expected a name"))?;
                let sort = parse_sort(&kv[1])?;
                vars.push(Variable::new(name.to_string(), sort));
            }
            other => return Err(ParseError::at(other.pos(), "expected (name Sort)")),
        }
    }
    Ok(vars)
}

fn parse_sort(s: &SExpr) -> Result<Sort, ParseError> {
    match s.as_atom() {
        Some("Int") => Ok(Sort::Int),
        Some("Bool") => Ok(Sort::Bool),
        Some(other) => Err(ParseError::at(s.pos(), format!("unsupported sort '{other}'"))),
        None => Err(ParseError::at(s.pos(), "unsupported parametric sort")),
    }
}

fn parse_numeral(a: &str) -> Option<i64> {
    let stripped = a.strip_prefix('-').unwrap_or(a);
    if stripped.is_empty() || !stripped.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    a.parse::<i64>().ok()
}

/// Render a system back to an SMT-LIB2 HORN script.
pub fn to_smt2(sys: &ChcSystem) -> String {
    use std::fmt::Write;
    let mut out = String::from("(set-logic HORN)\n");
    for p in &sys.predicates {
        let sorts: Vec<String> = p.arg_sorts.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(out, "(declare-fun {} ({}) Bool)", p.name, sorts.join(" "));
    }
    for c in &sys.clauses {
        let mut body = vec![c.constraint.to_string()];
        body.extend(c.body_apps.iter().map(|a| a.to_string()));
        let body = if body.len() == 1 {
            body.pop().unwrap()
        } else {
            format!("(and {})", body.join(" "))
        };
        let head = match &c.head {
            ClauseHead::Pred(app) => app.to_string(),
            ClauseHead::False => "false".to_string(),
        };
        let imp = format!("(=> {body} {head})");
        if c.vars.is_empty() {
            let _ = writeln!(out, "(assert {imp})");
        } else {
            let binds: Vec<String> = c
                .vars
                .iter()
                .map(|v| format!("({} {})", v.name, v.sort))
                .collect();
            let _ = writeln!(out, "(assert (forall ({}) {imp}))", binds.join(" "));
        }
    }
    out.push_str("(check-sat)\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chc::ClauseKind;

    const COUNTER: &str = r#"
(set-logic HORN)
(declare-fun inv (Int Int) Bool)
(assert (forall ((x Int) (y Int)) (=> (and (= x 0) (= y 0)) (inv x y))))
(assert (forall ((x Int) (y Int) (x1 Int) (y1 Int))
  (=> (and (inv x y) (= x1 (+ x 1)) (= y1 (+ y x))) (inv x1 y1))))
(assert (forall ((x Int) (y Int)) (=> (and (inv x y) (< y 0)) false)))
(check-sat)
"#;

    #[test]
    fn parses_horn_script() {
        let sys = parse_str(COUNTER, Format::Smt2).unwrap();
        assert_eq!(sys.predicates.len(), 1);
        assert_eq!(sys.clauses.len(), 3);
        assert_eq!(sys.clauses[0].kind(), ClauseKind::Fact);
        assert_eq!(sys.clauses[1].kind(), ClauseKind::Rule);
        assert_eq!(sys.clauses[2].kind(), ClauseKind::Query);
        // unused binder variables are pruned
        assert_eq!(sys.clauses[1].vars.len(), 4);
    }

    #[test]
    fn parses_datalog_rules() {
        let src = r#"
(declare-rel inv (Int Int))
(declare-var x Int)
(declare-var y Int)
(rule (=> (and (= x 0) (= y 0)) (inv x y)))
(rule (=> (and (inv x y) (>= x 0)) (inv (+ x 1) y)))
(query (inv x y))
"#;
        let sys = parse_str(src, Format::Datalog).unwrap();
        assert_eq!(sys.clauses.len(), 3);
        assert_eq!(sys.queries().count(), 1);
        let (_, q) = sys.queries().next().unwrap();
        assert_eq!(q.body_apps.len(), 1);
    }

    #[test]
    fn dialects_are_enforced() {
        let err = parse_str("(rule true)", Format::Smt2).unwrap_err();
        assert!(err.msg.contains("not available"));
    }

    #[test]
    fn auto_accepts_both() {
        assert!(parse_auto(COUNTER).is_ok());
    }

    #[test]
    fn negated_exists_query() {
        let src = r#"
(declare-fun p (Int) Bool)
(assert (forall ((x Int)) (=> (= x 0) (p x))))
(assert (not (exists ((x Int)) (and (p x) (> x 10)))))
"#;
        let sys = parse_str(src, Format::Smt2).unwrap();
        let (_, q) = sys.queries().next().unwrap();
        assert_eq!(q.body_apps.len(), 1);
        assert_eq!(q.constraint.to_string(), "(> x 10)");
    }

    #[test]
    fn interpreted_head_becomes_query() {
        let src = r#"
(declare-fun p (Int) Bool)
(assert (forall ((x Int)) (=> true (p x))))
(assert (forall ((x Int)) (=> (p x) (>= x 0))))
"#;
        let sys = parse_str(src, Format::Smt2).unwrap();
        let (_, q) = sys.queries().next().unwrap();
        assert_eq!(q.constraint.to_string(), "(not (>= x 0))");
    }

    #[test]
    fn let_bindings_inline() {
        let src = r#"
(declare-fun p (Int) Bool)
(assert (forall ((x Int)) (=> (let ((y (+ x 1))) (and (> y 0) (< y 5))) (p x))))
(assert (forall ((x Int)) (=> (p x) false)))
"#;
        let sys = parse_str(src, Format::Smt2).unwrap();
        let fact = sys.facts().next().unwrap().1;
        assert_eq!(
            fact.constraint.to_string(),
            "(and (> (+ x 1) 0) (< (+ x 1) 5))"
        );
    }

    #[test]
    fn error_positions_point_at_cause() {
        let src = "(declare-fun p (Real) Bool)";
        let err = parse_str(src, Format::Smt2).unwrap_err();
        assert_eq!((err.line, err.col), (1, 17));
        assert!(err.msg.contains("unsupported sort"));
    }

    #[test]
    fn rejects_nested_relation() {
        let src = r#"
(declare-fun p (Int) Bool)
(assert (forall ((x Int)) (=> (or (p x) (> x 0)) (p x))))
"#;
        let err = parse_str(src, Format::Smt2).unwrap_err();
        assert!(err.msg.contains("may not appear under"), "{}", err.msg);
    }

    #[test]
    fn chained_comparison_expands() {
        let src = r#"
(declare-fun p (Int) Bool)
(assert (forall ((x Int) (y Int) (z Int)) (=> (< x y z) (p x))))
(assert (forall ((x Int)) (=> (p x) false)))
"#;
        let sys = parse_str(src, Format::Smt2).unwrap();
        let fact = sys.facts().next().unwrap().1;
        assert_eq!(fact.constraint.to_string(), "(and (< x y) (< y z))");
    }

    #[test]
    fn ground_fact_and_trivial_assert() {
        let src = r#"
(declare-fun p (Int) Bool)
(assert (p 3))
(assert (forall ((x Int)) (=> (p x) false)))
(assert (> 2 1))
"#;
        let sys = parse_str(src, Format::Smt2).unwrap();
        assert_eq!(sys.facts().count(), 1);
        let trivial: Vec<_> = sys
            .clauses
            .iter()
            .filter(|c| c.kind() == ClauseKind::Trivial)
            .collect();
        assert_eq!(trivial.len(), 1);
        assert_eq!(trivial[0].constraint.to_string(), "(not (> 2 1))");
    }

    #[test]
    fn roundtrip_through_printer() {
        let sys = parse_str(COUNTER, Format::Smt2).unwrap();
        let printed = to_smt2(&sys);
        let again = parse_str(&printed, Format::Smt2).unwrap();
        assert_eq!(again.clauses.len(), sys.clauses.len());
        for (a, b) in again.clauses.iter().zip(&sys.clauses) {
            assert_eq!(a.kind(), b.kind());
        }
    }

    #[test]
    fn quoted_symbols_and_comments() {
        let src = r#"
; a comment
(declare-fun |my pred| (Int) Bool)
(assert (forall ((|x!| Int)) (=> (> |x!| 0) (|my pred| |x!|))))
(assert (forall ((x Int)) (=> (|my pred| x) false)))
"#;
        let sys = parse_str(src, Format::Smt2).unwrap();
        assert_eq!(&*sys.predicates[0].name, "my pred");
    }

    #[test]
    fn rejects_int_codomain() {
        let err = parse_str("(declare-fun f (Int) Int)", Format::Smt2).unwrap_err();
        assert!(err.msg.contains("Bool-valued"));
    }
}
