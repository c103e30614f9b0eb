//! Ground evaluation of expressions under a variable assignment.
//!
//! `div` and `mod` follow SMT-LIB semantics (Euclidean): the remainder is
//! always non-negative, regardless of the sign of the dividend. Rust's
//! `div_euclid`/`rem_euclid` match this for positive divisors; for negative
//! divisors SMT-LIB still requires `0 <= mod < |b|`, which is what
//! `rem_euclid` computes.

use std::collections::HashMap;

use crate::expr::{CmpOp, Expr, Value, Variable};

/// Why an evaluation failed.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("sort mismatch at {0}")]
    SortMismatch(String),
    #[error("arithmetic overflow")]
    Overflow,
    #[error("cannot evaluate quantified formula")]
    Quantifier,
}

/// An assignment of concrete values to variables.
pub type Assignment = HashMap<Variable, Value>;

/// Evaluate a closed-under-`env` expression to a value.
pub fn eval(e: &Expr, env: &Assignment) -> Result<Value, EvalError> {
    match e {
        Expr::IntLit(n) => Ok(Value::Int(*n)),
        Expr::BoolLit(b) => Ok(Value::Bool(*b)),
        Expr::Var(v) => env
            .get(v)
            .copied()
            .ok_or_else(|| EvalError::Unbound(v.name.to_string())),
        Expr::Neg(a) => {
            let a = eval_int(a, env)?;
            a.checked_neg().map(Value::Int).ok_or(EvalError::Overflow)
        }
        Expr::Add(args) => {
            let mut acc: i64 = 0;
            for a in args {
                acc = acc
                    .checked_add(eval_int(a, env)?)
                    .ok_or(EvalError::Overflow)?;
            }
            Ok(Value::Int(acc))
        }
        Expr::Sub(a, b) => {
            let a = eval_int(a, env)?;
            let b = eval_int(b, env)?;
            a.checked_sub(b).map(Value::Int).ok_or(EvalError::Overflow)
        }
        Expr::Mul(args) => {
            let mut acc: i64 = 1;
            for a in args {
                acc = acc
                    .checked_mul(eval_int(a, env)?)
                    .ok_or(EvalError::Overflow)?;
            }
            Ok(Value::Int(acc))
        }
        Expr::Div(a, b) => {
            let a = eval_int(a, env)?;
            let b = eval_int(b, env)?;
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            // Euclidean division: quotient such that remainder >= 0.
            let q = a.div_euclid(b.abs()) * b.signum();
            Ok(Value::Int(q))
        }
        Expr::Mod(a, b) => {
            let a = eval_int(a, env)?;
            let b = eval_int(b, env)?;
            if b == 0 {
                return Err(EvalError::DivisionByZero);
            }
            Ok(Value::Int(a.rem_euclid(b.abs())))
        }
        Expr::Cmp(op, a, b) => {
            let a = eval(a, env)?;
            let b = eval(b, env)?;
            let r = match (op, a, b) {
                (CmpOp::Eq, a, b) => {
                    if a.sort() != b.sort() {
                        return Err(EvalError::SortMismatch(e.to_string()));
                    }
                    a == b
                }
                (op, Value::Int(a), Value::Int(b)) => match op {
                    CmpOp::Eq => unreachable!(),
                    CmpOp::Le => a <= b,
                    CmpOp::Lt => a < b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Gt => a > b,
                },
                _ => return Err(EvalError::SortMismatch(e.to_string())),
            };
            Ok(Value::Bool(r))
        }
        Expr::Not(a) => Ok(Value::Bool(!eval_bool(a, env)?)),
        Expr::And(args) => {
            for a in args {
                if !eval_bool(a, env)? {
                    return Ok(Value::Bool(false));
                }
            }
            Ok(Value::Bool(true))
        }
        Expr::Or(args) => {
            for a in args {
                if eval_bool(a, env)? {
                    return Ok(Value::Bool(true));
                }
            }
            Ok(Value::Bool(false))
        }
        Expr::Implies(a, b) => Ok(Value::Bool(!eval_bool(a, env)? || eval_bool(b, env)?)),
        Expr::Ite(c, t, f) => {
            if eval_bool(c, env)? {
                eval(t, env)
            } else {
                eval(f, env)
            }
        }
        Expr::Exists(_, _) | Expr::Forall(_, _) => Err(EvalError::Quantifier),
    }
}

fn eval_int(e: &Expr, env: &Assignment) -> Result<i64, EvalError> {
    match eval(e, env)? {
        Value::Int(n) => Ok(n),
        Value::Bool(_) => Err(EvalError::SortMismatch(e.to_string())),
    }
}

fn eval_bool(e: &Expr, env: &Assignment) -> Result<bool, EvalError> {
    match eval(e, env)? {
        Value::Bool(b) => Ok(b),
        Value::Int(_) => Err(EvalError::SortMismatch(e.to_string())),
    }
}

/// Evaluate a Boolean formula at a point, treating evaluation failure as
/// "don't know" (`None`).
pub fn holds(e: &Expr, env: &Assignment) -> Option<bool> {
    match eval(e, env) {
        Ok(Value::Bool(b)) => Some(b),
        _ => None,
    }
}
