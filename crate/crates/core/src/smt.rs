//! Z3 bridge: satisfiability checks with models, quantifier elimination,
//! and simplification.
//!
//! Expressions are converted to Z3 ASTs per call; nothing is cached across
//! calls, so a single [`Smt`] handle can serve the whole solver run. QE
//! failures (timeout, unsupported fragment, residual quantifier) are
//! reported as errors so callers can freeze the affected zone instead of
//! diverging.

use std::time::Duration;

use z3::ast::{exists_const, forall_const, Ast, Bool, Dynamic, Int};
use z3::{AstKind, Config, Context, DeclKind, Goal, SatResult, SortKind, Solver, Tactic};

use crate::eval::Assignment;
use crate::expr::{CmpOp, Expr, Sort, Value, Variable};

/// Knobs for the backend. The timeout bounds each individual query; the
/// driver enforces its own wall-clock budget on top.
#[derive(Debug, Clone)]
pub struct SmtOptions {
    pub timeout_ms: u32,
    pub seed: u64,
}

impl Default for SmtOptions {
    fn default() -> Self {
        SmtOptions {
            timeout_ms: 10_000,
            seed: 0,
        }
    }
}

/// Outcome of a satisfiability query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SmtResult {
    /// Satisfiable, with a model over the requested variables.
    Sat(Assignment),
    Unsat,
    /// Solver gave up (timeout, incomplete theory, model out of range).
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SmtError {
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("quantifier elimination failed: {0}")]
    Qe(String),
    #[error("conversion failed: {0}")]
    Conversion(String),
}

pub struct Smt {
    ctx: Context,
    timeout: Duration,
}

enum Z3Term<'a> {
    I(Int<'a>),
    B(Bool<'a>),
}

impl Smt {
    pub fn new(opts: &SmtOptions) -> Smt {
        let seed = (opts.seed as u32).to_string();
        z3::set_global_param("smt.random_seed", &seed);
        z3::set_global_param("sat.random_seed", &seed);
        let mut cfg = Config::new();
        cfg.set_param_value("timeout", &opts.timeout_ms.to_string());
        cfg.set_model_generation(true);
        Smt {
            ctx: Context::new(&cfg),
            timeout: Duration::from_millis(opts.timeout_ms as u64),
        }
    }

    /// Check satisfiability of `e`; on sat, return a model over `model_vars`
    /// (missing assignments are completed with defaults).
    pub fn check(&self, e: &Expr, model_vars: &[Variable]) -> SmtResult {
        let b = match self.to_bool(e) {
            Ok(b) => b,
            Err(err) => return SmtResult::Unknown(err.to_string()),
        };
        let solver = Solver::new(&self.ctx);
        solver.assert(&b);
        match solver.check() {
            SatResult::Unsat => SmtResult::Unsat,
            SatResult::Unknown => SmtResult::Unknown("solver returned unknown".into()),
            SatResult::Sat => {
                let model = match solver.get_model() {
                    Some(m) => m,
                    None => return SmtResult::Unknown("sat without model".into()),
                };
                let mut asg = Assignment::new();
                for v in model_vars {
                    let value = match v.sort {
                        Sort::Int => {
                            let c = Int::new_const(&self.ctx, &*v.name);
                            match model.eval(&c, true).and_then(|i| i.as_i64()) {
                                Some(n) => Value::Int(n),
                                None => {
                                    return SmtResult::Unknown(format!(
                                        "model value for {} out of range",
                                        v.name
                                    ))
                                }
                            }
                        }
                        Sort::Bool => {
                            let c = Bool::new_const(&self.ctx, &*v.name);
                            match model.eval(&c, true).and_then(|b| b.as_bool()) {
                                Some(b) => Value::Bool(b),
                                None => {
                                    return SmtResult::Unknown(format!(
                                        "no model value for {}",
                                        v.name
                                    ))
                                }
                            }
                        }
                    };
                    asg.insert(v.clone(), value);
                }
                SmtResult::Sat(asg)
            }
        }
    }

    /// Check `a -> b` for validity. `Unsat` means the implication holds;
    /// `Sat` carries a countermodel over `model_vars`.
    pub fn check_implication(&self, a: &Expr, b: &Expr, model_vars: &[Variable]) -> SmtResult {
        self.check(
            &Expr::and(vec![a.clone(), Expr::not(b.clone())]),
            model_vars,
        )
    }

    /// True iff `a` and `b` are equivalent formulas.
    pub fn equivalent(&self, a: &Expr, b: &Expr) -> bool {
        matches!(
            self.check(&Expr::not(Expr::iff(a.clone(), b.clone())), &[]),
            SmtResult::Unsat
        )
    }

    /// Eliminate `vars` from `exists vars. body`, returning an equivalent
    /// quantifier-free formula over the remaining variables.
    pub fn qelim(&self, vars: &[Variable], body: &Expr) -> Result<Expr, SmtError> {
        if vars.is_empty() {
            return Ok(body.clone());
        }
        let zbody = self.to_bool(body)?;
        let bounds: Vec<Dynamic> = vars.iter().map(|v| self.var_dyn(v)).collect();
        let refs: Vec<&dyn Ast> = bounds.iter().map(|d| d as &dyn Ast).collect();
        let quantified = exists_const(&self.ctx, &refs, &[], &zbody);
        let goal = Goal::new(&self.ctx, false, false, false);
        goal.assert(&quantified);
        let tactic = Tactic::new(&self.ctx, "qe")
            .and_then(&Tactic::new(&self.ctx, "simplify"))
            .try_for(self.timeout);
        let result = tactic
            .apply(&goal, None)
            .map_err(|e| SmtError::Qe(format!("{e:?}")))?;
        let mut conj = Vec::new();
        for sub in result.list_subgoals() {
            for f in sub.get_formulas::<Bool>() {
                conj.push(self.from_dyn(&Dynamic::from_ast(&f))?);
            }
        }
        let out = Expr::and(conj);
        if out.has_quantifier() {
            return Err(SmtError::Qe("residual quantifier".into()));
        }
        Ok(out)
    }

    /// Best-effort rewriting simplification; returns the input on failure.
    pub fn simplify(&self, e: &Expr) -> Expr {
        let z = match self.to_bool(e) {
            Ok(z) => z,
            Err(_) => return e.clone(),
        };
        let s = z.simplify();
        self.from_dyn(&Dynamic::from_ast(&s)).unwrap_or_else(|_| e.clone())
    }

    fn var_dyn(&self, v: &Variable) -> Dynamic<'_> {
        match v.sort {
            Sort::Int => Dynamic::from_ast(&Int::new_const(&self.ctx, &*v.name)),
            Sort::Bool => Dynamic::from_ast(&Bool::new_const(&self.ctx, &*v.name)),
        }
    }

    fn to_bool(&self, e: &Expr) -> Result<Bool<'_>, SmtError> {
        match self.to_z3(e)? {
            Z3Term::B(b) => Ok(b),
            Z3Term::I(_) => Err(SmtError::Conversion(format!("expected Bool: {e}"))),
        }
    }

    fn to_int(&self, e: &Expr) -> Result<Int<'_>, SmtError> {
        match self.to_z3(e)? {
            Z3Term::I(i) => Ok(i),
            Z3Term::B(_) => Err(SmtError::Conversion(format!("expected Int: {e}"))),
        }
    }

    fn to_z3(&self, e: &Expr) -> Result<Z3Term<'_>, SmtError> {
        let ctx = &self.ctx;
        Ok(match e {
            Expr::IntLit(n) => Z3Term::I(Int::from_i64(ctx, *n)),
            Expr::BoolLit(b) => Z3Term::B(Bool::from_bool(ctx, *b)),
            Expr::Var(v) => match v.sort {
                Sort::Int => Z3Term::I(Int::new_const(ctx, &*v.name)),
                Sort::Bool => Z3Term::B(Bool::new_const(ctx, &*v.name)),
            },
            Expr::Neg(a) => Z3Term::I(self.to_int(a)?.unary_minus()),
            Expr::Add(args) => {
                let items = args
                    .iter()
                    .map(|a| self.to_int(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let refs: Vec<&Int> = items.iter().collect();
                Z3Term::I(Int::add(ctx, &refs))
            }
            Expr::Sub(a, b) => {
                let a = self.to_int(a)?;
                let b = self.to_int(b)?;
                Z3Term::I(Int::sub(ctx, &[&a, &b]))
            }
            Expr::Mul(args) => {
                let items = args
                    .iter()
                    .map(|a| self.to_int(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let refs: Vec<&Int> = items.iter().collect();
                Z3Term::I(Int::mul(ctx, &refs))
            }
            Expr::Div(a, b) => Z3Term::I(self.to_int(a)?.div(&self.to_int(b)?)),
            Expr::Mod(a, b) => Z3Term::I(self.to_int(a)?.modulo(&self.to_int(b)?)),
            Expr::Cmp(op, a, b) => {
                let lhs = self.to_z3(a)?;
                let rhs = self.to_z3(b)?;
                let out = match (op, lhs, rhs) {
                    (CmpOp::Eq, Z3Term::I(a), Z3Term::I(b)) => a._eq(&b),
                    (CmpOp::Eq, Z3Term::B(a), Z3Term::B(b)) => a._eq(&b),
                    (CmpOp::Le, Z3Term::I(a), Z3Term::I(b)) => a.le(&b),
                    (CmpOp::Lt, Z3Term::I(a), Z3Term::I(b)) => a.lt(&b),
                    (CmpOp::Ge, Z3Term::I(a), Z3Term::I(b)) => a.ge(&b),
                    (CmpOp::Gt, Z3Term::I(a), Z3Term::I(b)) => a.gt(&b),
                    _ => return Err(SmtError::Conversion(format!("ill-sorted {e}"))),
                };
                Z3Term::B(out)
            }
            Expr::Not(a) => Z3Term::B(self.to_bool(a)?.not()),
            Expr::And(args) => {
                let items = args
                    .iter()
                    .map(|a| self.to_bool(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let refs: Vec<&Bool> = items.iter().collect();
                Z3Term::B(Bool::and(ctx, &refs))
            }
            Expr::Or(args) => {
                let items = args
                    .iter()
                    .map(|a| self.to_bool(a))
                    .collect::<Result<Vec<_>, _>>()?;
                let refs: Vec<&Bool> = items.iter().collect();
                Z3Term::B(Bool::or(ctx, &refs))
            }
            Expr::Implies(a, b) => Z3Term::B(self.to_bool(a)?.implies(&self.to_bool(b)?)),
            Expr::Ite(c, t, f) => {
                let c = self.to_bool(c)?;
                match (self.to_z3(t)?, self.to_z3(f)?) {
                    (Z3Term::I(t), Z3Term::I(f)) => Z3Term::I(c.ite(&t, &f)),
                    (Z3Term::B(t), Z3Term::B(f)) => Z3Term::B(c.ite(&t, &f)),
                    _ => return Err(SmtError::Conversion(format!("ill-sorted {e}"))),
                }
            }
            Expr::Exists(vars, body) => {
                let zbody = self.to_bool(body)?;
                let bounds: Vec<Dynamic> = vars.iter().map(|v| self.var_dyn(v)).collect();
                let refs: Vec<&dyn Ast> = bounds.iter().map(|d| d as &dyn Ast).collect();
                Z3Term::B(exists_const(ctx, &refs, &[], &zbody))
            }
            Expr::Forall(vars, body) => {
                let zbody = self.to_bool(body)?;
                let bounds: Vec<Dynamic> = vars.iter().map(|v| self.var_dyn(v)).collect();
                let refs: Vec<&dyn Ast> = bounds.iter().map(|d| d as &dyn Ast).collect();
                Z3Term::B(forall_const(ctx, &refs, &[], &zbody))
            }
        })
    }

    fn from_dyn(&self, d: &Dynamic) -> Result<Expr, SmtError> {
        match d.kind() {
            AstKind::Numeral => {
                let i = d
                    .as_int()
                    .ok_or_else(|| SmtError::Conversion("non-integer numeral".into()))?;
                i.as_i64()
                    .map(Expr::int)
                    .ok_or_else(|| SmtError::Conversion("numeral exceeds i64".into()))
            }
            AstKind::App => self.from_app(d),
            other => Err(SmtError::Unsupported(format!("ast kind {other:?}"))),
        }
    }

    fn from_app(&self, d: &Dynamic) -> Result<Expr, SmtError> {
        let decl = d.decl();
        let children: Vec<Expr> = d
            .children()
            .iter()
            .map(|c| self.from_dyn(c))
            .collect::<Result<_, _>>()?;
        let arity = children.len();
        let need = |n: usize| -> Result<(), SmtError> {
            if arity == n {
                Ok(())
            } else {
                Err(SmtError::Conversion(format!(
                    "{:?} arity {arity}",
                    decl.kind()
                )))
            }
        };
        let mut args = children;
        Ok(match decl.kind() {
            DeclKind::TRUE => Expr::tt(),
            DeclKind::FALSE => Expr::ff(),
            DeclKind::AND => Expr::and(args),
            DeclKind::OR => Expr::or(args),
            DeclKind::NOT => {
                need(1)?;
                Expr::not(args.pop().unwrap())
            }
            DeclKind::IMPLIES => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::implies(args.pop().unwrap(), b)
            }
            DeclKind::EQ | DeclKind::IFF => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::eq(args.pop().unwrap(), b)
            }
            DeclKind::XOR => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::not(Expr::eq(args.pop().unwrap(), b))
            }
            DeclKind::DISTINCT => {
                let mut pairs = Vec::new();
                for i in 0..args.len() {
                    for j in i + 1..args.len() {
                        pairs.push(Expr::not(Expr::eq(args[i].clone(), args[j].clone())));
                    }
                }
                Expr::and(pairs)
            }
            DeclKind::ITE => {
                need(3)?;
                let e = args.pop().unwrap();
                let t = args.pop().unwrap();
                Expr::ite(args.pop().unwrap(), t, e)
            }
            DeclKind::LE => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::le(args.pop().unwrap(), b)
            }
            DeclKind::LT => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::lt(args.pop().unwrap(), b)
            }
            DeclKind::GE => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::ge(args.pop().unwrap(), b)
            }
            DeclKind::GT => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::gt(args.pop().unwrap(), b)
            }
            DeclKind::ADD => Expr::add(args),
            DeclKind::MUL => Expr::mul(args),
            DeclKind::SUB => {
                if args.is_empty() {
                    return Err(SmtError::Conversion("empty subtraction".into()));
                }
                let mut it = args.into_iter();
                let first = it.next().unwrap();
                it.fold(first, Expr::sub)
            }
            DeclKind::UMINUS => {
                need(1)?;
                Expr::neg(args.pop().unwrap())
            }
            DeclKind::IDIV => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::div(args.pop().unwrap(), b)
            }
            DeclKind::MOD => {
                need(2)?;
                let b = args.pop().unwrap();
                Expr::modulo(args.pop().unwrap(), b)
            }
            DeclKind::ANUM => {
                let i = d
                    .as_int()
                    .and_then(|i| i.as_i64())
                    .ok_or_else(|| SmtError::Conversion("numeral exceeds i64".into()))?;
                Expr::int(i)
            }
            DeclKind::UNINTERPRETED if arity == 0 => {
                let name = decl.name();
                let sort = match d.get_sort().kind() {
                    SortKind::Int => Sort::Int,
                    SortKind::Bool => Sort::Bool,
                    other => {
                        return Err(SmtError::Unsupported(format!("sort {other:?}")))
                    }
                };
                Expr::var(Variable::new(name, sort))
            }
            other => return Err(SmtError::Unsupported(format!("op {other:?}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smt() -> Smt {
        Smt::new(&SmtOptions::default())
    }

    fn x() -> Variable {
        Variable::int("x")
    }

    fn y() -> Variable {
        Variable::int("y")
    }

    #[test]
    fn sat_with_model() {
        let s = smt();
        let f = Expr::and(vec![
            Expr::gt(Expr::var(x()), Expr::int(3)),
            Expr::lt(Expr::var(x()), Expr::int(5)),
        ]);
        match s.check(&f, &[x()]) {
            SmtResult::Sat(m) => assert_eq!(m[&x()], Value::Int(4)),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn unsat_nonlinear() {
        let s = smt();
        // x*x < 0 has no integer solution
        let f = Expr::lt(
            Expr::mul(vec![Expr::var(x()), Expr::var(x())]),
            Expr::int(0),
        );
        assert_eq!(s.check(&f, &[]), SmtResult::Unsat);
    }

    #[test]
    fn qelim_projects_variable() {
        let s = smt();
        // exists y. x = y + 1 /\ y >= 0   <=>   x >= 1
        let body = Expr::and(vec![
            Expr::eq(
                Expr::var(x()),
                Expr::add(vec![Expr::var(y()), Expr::int(1)]),
            ),
            Expr::ge(Expr::var(y()), Expr::int(0)),
        ]);
        let out = s.qelim(&[y()], &body).unwrap();
        assert!(out.free_vars().iter().all(|v| v.name.as_ref() == "x"));
        assert!(s.equivalent(&out, &Expr::ge(Expr::var(x()), Expr::int(1))));
    }

    #[test]
    fn qelim_empty_binder_is_identity() {
        let s = smt();
        let f = Expr::gt(Expr::var(x()), Expr::int(0));
        assert_eq!(s.qelim(&[], &f).unwrap(), f);
    }

    #[test]
    fn model_completion_fills_missing_vars() {
        let s = smt();
        let f = Expr::gt(Expr::var(x()), Expr::int(0));
        match s.check(&f, &[x(), y()]) {
            SmtResult::Sat(m) => {
                assert!(m[&x()].as_i64() > 0);
                assert!(m.contains_key(&y()));
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn implication_countermodel() {
        let s = smt();
        let a = Expr::ge(Expr::var(x()), Expr::int(0));
        let b = Expr::ge(Expr::var(x()), Expr::int(5));
        match s.check_implication(&a, &b, &[x()]) {
            SmtResult::Sat(m) => {
                let v = m[&x()].as_i64();
                assert!((0..5).contains(&v));
            }
            other => panic!("expected countermodel, got {other:?}"),
        }
        assert_eq!(s.check_implication(&b, &a, &[]), SmtResult::Unsat);
    }

    #[test]
    fn roundtrip_preserves_semantics() {
        let s = smt();
        let f = Expr::or(vec![
            Expr::eq(Expr::modulo(Expr::var(x()), Expr::int(2)), Expr::int(0)),
            Expr::lt(
                Expr::sub(Expr::var(x()), Expr::var(y())),
                Expr::neg(Expr::int(3)),
            ),
        ]);
        let simplified = s.simplify(&f);
        assert!(s.equivalent(&f, &simplified));
    }
}
