//! Sorted expression trees over integer and Boolean variables.
//!
//! Every formula handled by the solver (clause constraints, zones, learned
//! partitions, hypotheses) is an [`Expr`]. Expressions are immutable and
//! reference-counted, so sharing subtrees across clauses and zones is cheap
//! and thread-safe.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

/// Sort of a variable or expression. The solver is restricted to integer
/// arithmetic with Booleans; richer theories are rejected at parse time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    Bool,
}

impl fmt::Display for Sort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sort::Int => write!(f, "Int"),
            Sort::Bool => write!(f, "Bool"),
        }
    }
}

/// A sorted variable. Identity is name + sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variable {
    pub name: Arc<str>,
    pub sort: Sort,
}

impl Variable {
    pub fn new(name: impl Into<Arc<str>>, sort: Sort) -> Self {
        Variable {
            name: name.into(),
            sort,
        }
    }

    pub fn int(name: impl Into<Arc<str>>) -> Self {
        Variable::new(name, Sort::Int)
    }

    pub fn bool(name: impl Into<Arc<str>>) -> Self {
        Variable::new(name, Sort::Bool)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// A constant value, as found in models and data points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn sort(&self) -> Sort {
        match self {
            Value::Int(_) => Sort::Int,
            Value::Bool(_) => Sort::Bool,
        }
    }

    pub fn to_expr(&self) -> Expr {
        match self {
            Value::Int(n) => Expr::int(*n),
            Value::Bool(b) => Expr::bool(*b),
        }
    }

    /// Numeric view used by the learner (Booleans count as 0/1).
    pub fn as_i64(&self) -> i64 {
        match self {
            Value::Int(n) => *n,
            Value::Bool(b) => *b as i64,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Comparison operators between integer terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn smt_name(&self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// Expression tree. Integer-sorted nodes: literals, variables, arithmetic.
/// Boolean-sorted nodes: comparisons, connectives, quantifiers.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    IntLit(i64),
    BoolLit(bool),
    Var(Variable),
    /// Unary integer negation.
    Neg(Arc<Expr>),
    Add(Vec<Arc<Expr>>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Vec<Arc<Expr>>),
    /// Euclidean integer division (SMT-LIB `div`).
    Div(Arc<Expr>, Arc<Expr>),
    /// Euclidean remainder (SMT-LIB `mod`), always non-negative for a
    /// positive modulus.
    Mod(Arc<Expr>, Arc<Expr>),
    /// Comparison between two terms. `Eq` also covers Boolean equality.
    Cmp(CmpOp, Arc<Expr>, Arc<Expr>),
    Not(Arc<Expr>),
    And(Vec<Arc<Expr>>),
    Or(Vec<Arc<Expr>>),
    Implies(Arc<Expr>, Arc<Expr>),
    Ite(Arc<Expr>, Arc<Expr>, Arc<Expr>),
    Exists(Vec<Variable>, Arc<Expr>),
    Forall(Vec<Variable>, Arc<Expr>),
}

impl Expr {
    pub fn int(n: i64) -> Expr {
        Expr::IntLit(n)
    }

    pub fn bool(b: bool) -> Expr {
        Expr::BoolLit(b)
    }

    pub fn tt() -> Expr {
        Expr::BoolLit(true)
    }

    pub fn ff() -> Expr {
        Expr::BoolLit(false)
    }

    pub fn var(v: Variable) -> Expr {
        Expr::Var(v)
    }

    pub fn neg(e: Expr) -> Expr {
        Expr::Neg(Arc::new(e))
    }

    /// N-ary sum; nested sums are flattened.
    pub fn add(args: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(args.len());
        for a in args {
            match a {
                Expr::Add(inner) => flat.extend(inner),
                other => flat.push(Arc::new(other)),
            }
        }
        match flat.len() {
            0 => Expr::int(0),
            1 => flat.pop().map(unwrap_arc).unwrap(),
            _ => Expr::Add(flat),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Arc::new(a), Arc::new(b))
    }

    /// N-ary product; nested products are flattened.
    pub fn mul(args: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(args.len());
        for a in args {
            match a {
                Expr::Mul(inner) => flat.extend(inner),
                other => flat.push(Arc::new(other)),
            }
        }
        match flat.len() {
            0 => Expr::int(1),
            1 => flat.pop().map(unwrap_arc).unwrap(),
            _ => Expr::Mul(flat),
        }
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::Div(Arc::new(a), Arc::new(b))
    }

    pub fn modulo(a: Expr, b: Expr) -> Expr {
        Expr::Mod(Arc::new(a), Arc::new(b))
    }

    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> Expr {
        Expr::Cmp(op, Arc::new(a), Arc::new(b))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Eq, a, b)
    }

    pub fn le(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Le, a, b)
    }

    pub fn lt(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Lt, a, b)
    }

    pub fn ge(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Ge, a, b)
    }

    pub fn gt(a: Expr, b: Expr) -> Expr {
        Expr::cmp(CmpOp::Gt, a, b)
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Not(Arc::new(e))
    }

    /// N-ary conjunction; nested conjunctions are flattened, `true` is
    /// dropped and `false` absorbs. Empty is true.
    pub fn and(args: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(args.len());
        for a in args {
            match a {
                Expr::BoolLit(true) => {}
                Expr::BoolLit(false) => return Expr::ff(),
                Expr::And(inner) => flat.extend(inner),
                other => flat.push(Arc::new(other)),
            }
        }
        match flat.len() {
            0 => Expr::tt(),
            1 => flat.pop().map(unwrap_arc).unwrap(),
            _ => Expr::And(flat),
        }
    }

    /// N-ary disjunction; nested disjunctions are flattened, `false` is
    /// dropped and `true` absorbs. Empty is false.
    pub fn or(args: Vec<Expr>) -> Expr {
        let mut flat = Vec::with_capacity(args.len());
        for a in args {
            match a {
                Expr::BoolLit(false) => {}
                Expr::BoolLit(true) => return Expr::tt(),
                Expr::Or(inner) => flat.extend(inner),
                other => flat.push(Arc::new(other)),
            }
        }
        match flat.len() {
            0 => Expr::ff(),
            1 => flat.pop().map(unwrap_arc).unwrap(),
            _ => Expr::Or(flat),
        }
    }

    pub fn implies(a: Expr, b: Expr) -> Expr {
        Expr::Implies(Arc::new(a), Arc::new(b))
    }

    pub fn iff(a: Expr, b: Expr) -> Expr {
        Expr::eq(a, b)
    }

    pub fn ite(c: Expr, t: Expr, e: Expr) -> Expr {
        Expr::Ite(Arc::new(c), Arc::new(t), Arc::new(e))
    }

    pub fn exists(vars: Vec<Variable>, body: Expr) -> Expr {
        if vars.is_empty() {
            body
        } else {
            Expr::Exists(vars, Arc::new(body))
        }
    }

    pub fn forall(vars: Vec<Variable>, body: Expr) -> Expr {
        if vars.is_empty() {
            body
        } else {
            Expr::Forall(vars, Arc::new(body))
        }
    }

    pub fn is_true(&self) -> bool {
        matches!(self, Expr::BoolLit(true))
    }

    pub fn is_false(&self) -> bool {
        matches!(self, Expr::BoolLit(false))
    }

    /// Node count of the expression tree. Quantified variables count one
    /// node each. This is the "length" metric that gates zone expansion.
    pub fn size(&self) -> usize {
        match self {
            Expr::IntLit(_) | Expr::BoolLit(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Not(a) => 1 + a.size(),
            Expr::Add(args) | Expr::Mul(args) | Expr::And(args) | Expr::Or(args) => {
                1 + args.iter().map(|a| a.size()).sum::<usize>()
            }
            Expr::Sub(a, b)
            | Expr::Div(a, b)
            | Expr::Mod(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::Implies(a, b) => 1 + a.size() + b.size(),
            Expr::Ite(c, t, e) => 1 + c.size() + t.size() + e.size(),
            Expr::Exists(vars, body) | Expr::Forall(vars, body) => {
                1 + vars.len() + body.size()
            }
        }
    }

    /// Free variables of the expression.
    pub fn free_vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        self.collect_free_vars(&mut out, &mut Vec::new());
        out
    }

    fn collect_free_vars(&self, out: &mut BTreeSet<Variable>, bound: &mut Vec<Variable>) {
        match self {
            Expr::IntLit(_) | Expr::BoolLit(_) => {}
            Expr::Var(v) => {
                if !bound.contains(v) {
                    out.insert(v.clone());
                }
            }
            Expr::Neg(a) | Expr::Not(a) => a.collect_free_vars(out, bound),
            Expr::Add(args) | Expr::Mul(args) | Expr::And(args) | Expr::Or(args) => {
                for a in args {
                    a.collect_free_vars(out, bound);
                }
            }
            Expr::Sub(a, b)
            | Expr::Div(a, b)
            | Expr::Mod(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::Implies(a, b) => {
                a.collect_free_vars(out, bound);
                b.collect_free_vars(out, bound);
            }
            Expr::Ite(c, t, e) => {
                c.collect_free_vars(out, bound);
                t.collect_free_vars(out, bound);
                e.collect_free_vars(out, bound);
            }
            Expr::Exists(vars, body) | Expr::Forall(vars, body) => {
                let depth = bound.len();
                bound.extend(vars.iter().cloned());
                body.collect_free_vars(out, bound);
                bound.truncate(depth);
            }
        }
    }

    /// Capture-unaware parallel substitution of free variables. Callers
    /// must ensure replacement terms contain no variables captured by
    /// quantifiers in `self`; all internal uses substitute fresh or
    /// quantifier-free material.
    pub fn subst(&self, map: &dyn Fn(&Variable) -> Option<Expr>) -> Expr {
        match self {
            Expr::IntLit(_) | Expr::BoolLit(_) => self.clone(),
            Expr::Var(v) => map(v).unwrap_or_else(|| self.clone()),
            Expr::Neg(a) => Expr::neg(a.subst(map)),
            Expr::Not(a) => Expr::not(a.subst(map)),
            Expr::Add(args) => Expr::add(args.iter().map(|a| a.subst(map)).collect()),
            Expr::Mul(args) => Expr::mul(args.iter().map(|a| a.subst(map)).collect()),
            Expr::And(args) => Expr::and(args.iter().map(|a| a.subst(map)).collect()),
            Expr::Or(args) => Expr::or(args.iter().map(|a| a.subst(map)).collect()),
            Expr::Sub(a, b) => Expr::sub(a.subst(map), b.subst(map)),
            Expr::Div(a, b) => Expr::div(a.subst(map), b.subst(map)),
            Expr::Mod(a, b) => Expr::modulo(a.subst(map), b.subst(map)),
            Expr::Cmp(op, a, b) => Expr::cmp(*op, a.subst(map), b.subst(map)),
            Expr::Implies(a, b) => Expr::implies(a.subst(map), b.subst(map)),
            Expr::Ite(c, t, e) => Expr::ite(c.subst(map), t.subst(map), e.subst(map)),
            Expr::Exists(vars, body) => {
                let shadowed = |v: &Variable| {
                    if vars.contains(v) {
                        Some(Expr::Var(v.clone()))
                    } else {
                        map(v)
                    }
                };
                Expr::exists(vars.clone(), body.subst(&shadowed))
            }
            Expr::Forall(vars, body) => {
                let shadowed = |v: &Variable| {
                    if vars.contains(v) {
                        Some(Expr::Var(v.clone()))
                    } else {
                        map(v)
                    }
                };
                Expr::forall(vars.clone(), body.subst(&shadowed))
            }
        }
    }

    /// Substitution from a variable→expression table.
    pub fn subst_map(&self, map: &std::collections::HashMap<Variable, Expr>) -> Expr {
        self.subst(&|v| map.get(v).cloned())
    }

    /// Sort of the expression, if well-sorted.
    pub fn sort(&self) -> Option<Sort> {
        match self {
            Expr::IntLit(_)
            | Expr::Neg(_)
            | Expr::Add(_)
            | Expr::Sub(_, _)
            | Expr::Mul(_)
            | Expr::Div(_, _)
            | Expr::Mod(_, _) => Some(Sort::Int),
            Expr::BoolLit(_)
            | Expr::Cmp(_, _, _)
            | Expr::Not(_)
            | Expr::And(_)
            | Expr::Or(_)
            | Expr::Implies(_, _)
            | Expr::Exists(_, _)
            | Expr::Forall(_, _) => Some(Sort::Bool),
            Expr::Var(v) => Some(v.sort),
            Expr::Ite(_, t, _) => t.sort(),
        }
    }

    /// All constant moduli `k >= 2` appearing in `mod`/`div` atoms.
    pub fn collect_moduli(&self, out: &mut BTreeSet<u64>) {
        match self {
            Expr::Mod(a, b) | Expr::Div(a, b) => {
                if let Expr::IntLit(k) = **b {
                    if k >= 2 {
                        out.insert(k as u64);
                    }
                }
                a.collect_moduli(out);
                b.collect_moduli(out);
            }
            Expr::IntLit(_) | Expr::BoolLit(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Not(a) => a.collect_moduli(out),
            Expr::Add(args) | Expr::Mul(args) | Expr::And(args) | Expr::Or(args) => {
                for a in args {
                    a.collect_moduli(out);
                }
            }
            Expr::Sub(a, b) | Expr::Cmp(_, a, b) | Expr::Implies(a, b) => {
                a.collect_moduli(out);
                b.collect_moduli(out);
            }
            Expr::Ite(c, t, e) => {
                c.collect_moduli(out);
                t.collect_moduli(out);
                e.collect_moduli(out);
            }
            Expr::Exists(_, body) | Expr::Forall(_, body) => body.collect_moduli(out),
        }
    }

    /// Bottom-up constant folding. Preserves semantics exactly; folds that
    /// would overflow i64 are left in place.
    pub fn fold(&self) -> Expr {
        match self {
            Expr::IntLit(_) | Expr::BoolLit(_) | Expr::Var(_) => self.clone(),
            Expr::Neg(a) => match a.fold() {
                Expr::IntLit(n) if n.checked_neg().is_some() => Expr::int(-n),
                e => Expr::neg(e),
            },
            Expr::Add(args) => {
                let mut lit: i64 = 0;
                let mut rest = Vec::new();
                let mut overflow = false;
                for a in args {
                    match a.fold() {
                        Expr::IntLit(n) => match lit.checked_add(n) {
                            Some(s) => lit = s,
                            None => {
                                overflow = true;
                                rest.push(Expr::int(n));
                            }
                        },
                        e => rest.push(e),
                    }
                }
                if rest.is_empty() {
                    Expr::int(lit)
                } else {
                    if lit != 0 || overflow {
                        rest.push(Expr::int(lit));
                    }
                    Expr::add(rest)
                }
            }
            Expr::Sub(a, b) => match (a.fold(), b.fold()) {
                (Expr::IntLit(x), Expr::IntLit(y)) if x.checked_sub(y).is_some() => {
                    Expr::int(x - y)
                }
                (a, Expr::IntLit(0)) => a,
                (a, b) => Expr::sub(a, b),
            },
            Expr::Mul(args) => {
                let mut lit: i64 = 1;
                let mut rest = Vec::new();
                let mut overflow = false;
                for a in args {
                    match a.fold() {
                        Expr::IntLit(n) => match lit.checked_mul(n) {
                            Some(p) => lit = p,
                            None => {
                                overflow = true;
                                rest.push(Expr::int(n));
                            }
                        },
                        e => rest.push(e),
                    }
                }
                if lit == 0 {
                    return Expr::int(0);
                }
                if rest.is_empty() {
                    Expr::int(lit)
                } else {
                    if lit != 1 || overflow {
                        rest.insert(0, Expr::int(lit));
                    }
                    Expr::mul(rest)
                }
            }
            Expr::Div(a, b) => match (a.fold(), b.fold()) {
                (Expr::IntLit(x), Expr::IntLit(y)) if y != 0 => {
                    Expr::int(x.div_euclid(y.abs()) * y.signum())
                }
                (a, b) => Expr::div(a, b),
            },
            Expr::Mod(a, b) => match (a.fold(), b.fold()) {
                (Expr::IntLit(x), Expr::IntLit(y)) if y != 0 => {
                    Expr::int(x.rem_euclid(y.abs()))
                }
                (a, b) => Expr::modulo(a, b),
            },
            Expr::Cmp(op, a, b) => match (a.fold(), b.fold()) {
                (Expr::IntLit(x), Expr::IntLit(y)) => Expr::bool(match op {
                    CmpOp::Eq => x == y,
                    CmpOp::Le => x <= y,
                    CmpOp::Lt => x < y,
                    CmpOp::Ge => x >= y,
                    CmpOp::Gt => x > y,
                }),
                (Expr::BoolLit(x), Expr::BoolLit(y)) if *op == CmpOp::Eq => {
                    Expr::bool(x == y)
                }
                (a, b) => Expr::cmp(*op, a, b),
            },
            Expr::Not(a) => match a.fold() {
                Expr::BoolLit(b) => Expr::bool(!b),
                Expr::Not(inner) => (*inner).clone(),
                e => Expr::not(e),
            },
            Expr::And(args) => Expr::and(args.iter().map(|a| a.fold()).collect()),
            Expr::Or(args) => Expr::or(args.iter().map(|a| a.fold()).collect()),
            Expr::Implies(a, b) => match (a.fold(), b.fold()) {
                (Expr::BoolLit(false), _) => Expr::tt(),
                (Expr::BoolLit(true), b) => b,
                (_, Expr::BoolLit(true)) => Expr::tt(),
                (a, Expr::BoolLit(false)) => Expr::not(a),
                (a, b) => Expr::implies(a, b),
            },
            Expr::Ite(c, t, e) => match c.fold() {
                Expr::BoolLit(true) => t.fold(),
                Expr::BoolLit(false) => e.fold(),
                c => Expr::ite(c, t.fold(), e.fold()),
            },
            Expr::Exists(vars, body) => Expr::exists(vars.clone(), body.fold()),
            Expr::Forall(vars, body) => Expr::forall(vars.clone(), body.fold()),
        }
    }

    /// True if any subterm is a quantifier.
    pub fn has_quantifier(&self) -> bool {
        match self {
            Expr::Exists(_, _) | Expr::Forall(_, _) => true,
            Expr::IntLit(_) | Expr::BoolLit(_) | Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Not(a) => a.has_quantifier(),
            Expr::Add(args) | Expr::Mul(args) | Expr::And(args) | Expr::Or(args) => {
                args.iter().any(|a| a.has_quantifier())
            }
            Expr::Sub(a, b)
            | Expr::Div(a, b)
            | Expr::Mod(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::Implies(a, b) => a.has_quantifier() || b.has_quantifier(),
            Expr::Ite(c, t, e) => {
                c.has_quantifier() || t.has_quantifier() || e.has_quantifier()
            }
        }
    }
}

fn unwrap_arc(a: Arc<Expr>) -> Expr {
    Arc::try_unwrap(a).unwrap_or_else(|a| (*a).clone())
}

/// SMT-LIB2 rendering. Negative integer literals print as `(- n)`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_smt(f)
    }
}

impl Expr {
    fn fmt_smt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::IntLit(n) => {
                if *n < 0 {
                    write!(f, "(- {})", n.unsigned_abs())
                } else {
                    write!(f, "{n}")
                }
            }
            Expr::BoolLit(b) => write!(f, "{b}"),
            Expr::Var(v) => write!(f, "{}", v.name),
            Expr::Neg(a) => write!(f, "(- {a})"),
            Expr::Add(args) => write_app(f, "+", args),
            Expr::Sub(a, b) => write!(f, "(- {a} {b})"),
            Expr::Mul(args) => write_app(f, "*", args),
            Expr::Div(a, b) => write!(f, "(div {a} {b})"),
            Expr::Mod(a, b) => write!(f, "(mod {a} {b})"),
            Expr::Cmp(op, a, b) => write!(f, "({} {a} {b})", op.smt_name()),
            Expr::Not(a) => write!(f, "(not {a})"),
            Expr::And(args) => write_app(f, "and", args),
            Expr::Or(args) => write_app(f, "or", args),
            Expr::Implies(a, b) => write!(f, "(=> {a} {b})"),
            Expr::Ite(c, t, e) => write!(f, "(ite {c} {t} {e})"),
            Expr::Exists(vars, body) => write_quant(f, "exists", vars, body),
            Expr::Forall(vars, body) => write_quant(f, "forall", vars, body),
        }
    }
}

fn write_app(f: &mut fmt::Formatter<'_>, op: &str, args: &[Arc<Expr>]) -> fmt::Result {
    write!(f, "({op}")?;
    for a in args {
        write!(f, " {a}")?;
    }
    write!(f, ")")
}

fn write_quant(
    f: &mut fmt::Formatter<'_>,
    kw: &str,
    vars: &[Variable],
    body: &Expr,
) -> fmt::Result {
    write!(f, "({kw} (")?;
    for (i, v) in vars.iter().enumerate() {
        if i > 0 {
            write!(f, " ")?;
        }
        write!(f, "({} {})", v.name, v.sort)?;
    }
    write!(f, ") {body})")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Expr {
        Expr::var(Variable::int("x"))
    }

    fn y() -> Expr {
        Expr::var(Variable::int("y"))
    }

    #[test]
    fn size_counts_nodes() {
        // var, const, comparison
        let atom = Expr::gt(x(), Expr::int(0));
        assert_eq!(atom.size(), 3);

        let conj = Expr::and(vec![
            Expr::gt(x(), Expr::int(0)),
            Expr::gt(y(), Expr::int(0)),
        ]);
        assert_eq!(conj.size(), 7);
    }

    #[test]
    fn size_of_negation_adds_one() {
        for f in [
            Expr::gt(x(), Expr::int(0)),
            Expr::and(vec![Expr::eq(x(), y()), Expr::lt(y(), Expr::int(3))]),
            Expr::tt(),
        ] {
            assert_eq!(Expr::not(f.clone()).size(), f.size() + 1);
        }
    }

    #[test]
    fn size_strictly_positive_and_monotone_under_conjunction() {
        let f = Expr::le(x(), Expr::int(5));
        let g = Expr::ge(y(), Expr::int(1));
        assert!(f.size() > 0);
        assert!(Expr::And(vec![Arc::new(f.clone()), Arc::new(g)]).size() > f.size());
    }

    #[test]
    fn free_vars_respect_binders() {
        let vx = Variable::int("x");
        let vy = Variable::int("y");
        let e = Expr::exists(
            vec![vx.clone()],
            Expr::and(vec![Expr::eq(x(), y()), Expr::gt(x(), Expr::int(0))]),
        );
        let fv = e.free_vars();
        assert!(!fv.contains(&vx));
        assert!(fv.contains(&vy));
    }

    #[test]
    fn subst_avoids_bound_vars() {
        let vx = Variable::int("x");
        let e = Expr::exists(vec![vx.clone()], Expr::eq(x(), y()));
        let mut map = std::collections::HashMap::new();
        map.insert(vx, Expr::int(7));
        // x is bound, so nothing changes
        assert_eq!(e.subst_map(&map), e);
    }

    #[test]
    fn smart_constructors_flatten() {
        let e = Expr::and(vec![
            Expr::and(vec![Expr::lt(x(), y()), Expr::lt(y(), Expr::int(9))]),
            Expr::gt(x(), Expr::int(0)),
        ]);
        match e {
            Expr::And(args) => assert_eq!(args.len(), 3),
            other => panic!("expected flat conjunction, got {other:?}"),
        }
        assert!(Expr::and(vec![Expr::tt(), Expr::ff()]).is_false());
        assert!(Expr::or(vec![Expr::ff(), Expr::tt()]).is_true());
        assert!(Expr::and(vec![]).is_true());
        assert!(Expr::or(vec![]).is_false());
    }

    #[test]
    fn display_is_smtlib() {
        let e = Expr::and(vec![
            Expr::le(Expr::add(vec![x(), Expr::int(-1)]), Expr::int(3)),
            Expr::eq(Expr::modulo(y(), Expr::int(2)), Expr::int(0)),
        ]);
        assert_eq!(
            e.to_string(),
            "(and (<= (+ x (- 1)) 3) (= (mod y 2) 0))"
        );
    }

    #[test]
    fn fold_reduces_ground_subterms() {
        let e = Expr::and(vec![
            Expr::eq(x(), Expr::add(vec![Expr::int(1), Expr::int(0)])),
            Expr::le(Expr::int(2), Expr::int(3)),
            Expr::gt(Expr::mul(vec![Expr::int(1), y()]), Expr::int(0)),
        ]);
        assert_eq!(e.fold().to_string(), "(and (= x 1) (> y 0))");
        // folding a false conjunct collapses the conjunction
        let dead = Expr::and(vec![Expr::lt(Expr::int(3), Expr::int(1)), Expr::eq(x(), y())]);
        assert!(dead.fold().is_false());
        // Euclidean semantics in the folder too
        let m = Expr::modulo(Expr::int(-7), Expr::int(3));
        assert_eq!(m.fold(), Expr::int(2));
    }

    #[test]
    fn collect_moduli_finds_constants() {
        let e = Expr::and(vec![
            Expr::eq(Expr::modulo(x(), Expr::int(2)), Expr::int(0)),
            Expr::eq(Expr::modulo(y(), Expr::int(5)), y()),
        ]);
        let mut ks = BTreeSet::new();
        e.collect_moduli(&mut ks);
        assert_eq!(ks.into_iter().collect::<Vec<_>>(), vec![2, 5]);
    }
}
