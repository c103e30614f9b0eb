//! Inductive synthesis of candidate predicate regions.
//!
//! Labeled points are lifted to integer attribute rows (unary variables,
//! octagon pairs, SVM hyperplanes, discovered moduli), a decision tree is
//! grown to purity, and the positive paths come back as a DNF formula over
//! the predicate's canonical variables.

pub mod svm;
pub mod tree;

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::chc::{ChcSystem, Predicate};
use crate::expr::{Expr, Sort, Value, Variable};
use svm::{fit_svm, Hyperplane, SvmConfig, SvmError};
use tree::{induce_tree, Tree, TreeError};

/// An integer-valued feature `Σ cᵢ·vᵢ`, optionally reduced modulo `k`. The
/// tree turns it into literals of the form `lhs ≤ c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Attribute {
    pub terms: Vec<(usize, i64)>,
    pub modk: Option<u64>,
}

impl Attribute {
    fn unary(i: usize) -> Attribute {
        Attribute {
            terms: vec![(i, 1)],
            modk: None,
        }
    }

    fn pair(i: usize, si: i64, j: usize, sj: i64) -> Attribute {
        Attribute {
            terms: vec![(i, si), (j, sj)],
            modk: None,
        }
    }

    fn modular(i: usize, k: u64) -> Attribute {
        Attribute {
            terms: vec![(i, 1)],
            modk: Some(k),
        }
    }

    /// Plane lhs, gcd-reduced with a positive leading coefficient.
    fn from_plane(h: &Hyperplane) -> Option<Attribute> {
        let mut terms: Vec<(usize, i64)> = h
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0)
            .map(|(i, c)| (i, *c))
            .collect();
        if terms.is_empty() {
            return None;
        }
        let g = terms.iter().fold(0u64, |g, (_, c)| gcd(g, c.unsigned_abs()));
        for (_, c) in &mut terms {
            *c /= g as i64;
        }
        if terms[0].1 < 0 {
            for (_, c) in &mut terms {
                *c = -*c;
            }
        }
        Some(Attribute { terms, modk: None })
    }

    pub fn eval(&self, point: &[i64]) -> i64 {
        let mut s = 0i64;
        for (i, c) in &self.terms {
            s = s.saturating_add(c.saturating_mul(point[*i]));
        }
        match self.modk {
            Some(k) => s.rem_euclid(k as i64),
            None => s,
        }
    }

    pub fn to_expr(&self, vars: &[Variable]) -> Expr {
        let term = |i: usize| -> Expr {
            let v = &vars[i];
            match v.sort {
                Sort::Int => Expr::var(v.clone()),
                Sort::Bool => Expr::ite(Expr::var(v.clone()), Expr::int(1), Expr::int(0)),
            }
        };
        let parts: Vec<Expr> = self
            .terms
            .iter()
            .map(|(i, c)| match c {
                1 => term(*i),
                -1 => Expr::neg(term(*i)),
                _ => Expr::mul(vec![Expr::int(*c), term(*i)]),
            })
            .collect();
        let sum = Expr::add(parts);
        match self.modk {
            Some(k) => Expr::modulo(sum, Expr::int(k as i64)),
            None => sum,
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Unary variables, the four signed octagon combinations of every variable
/// pair, the plane left-hand sides, and `vᵢ mod k` features; duplicates
/// (same term vector and modulus) are dropped, which folds planes into the
/// octagon templates they repeat.
pub fn generate_attributes(
    pred: &Predicate,
    planes: &[Hyperplane],
    mod_ks: &BTreeSet<u64>,
) -> Vec<Attribute> {
    let n = pred.arity();
    let mut out: Vec<Attribute> = Vec::new();
    let mut push = |a: Attribute| {
        if !out.contains(&a) {
            out.push(a);
        }
    };
    for i in 0..n {
        push(Attribute::unary(i));
    }
    for i in 0..n {
        for j in i + 1..n {
            for (si, sj) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                push(Attribute::pair(i, si, j, sj));
            }
        }
    }
    for h in planes {
        if let Some(a) = Attribute::from_plane(h) {
            push(a);
        }
    }
    for &k in mod_ks {
        for i in 0..n {
            push(Attribute::modular(i, k));
        }
    }
    out
}

/// All constant moduli (≥ 2) in mod/div atoms of the clause constraints.
pub fn find_mod_patterns(sys: &ChcSystem) -> BTreeSet<u64> {
    let mut out = BTreeSet::new();
    for c in &sys.clauses {
        c.constraint.collect_moduli(&mut out);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LearnError {
    /// A point carries both labels.
    Degenerate(Vec<Value>),
    /// Two opposite-label points no attribute can tell apart.
    Unseparable(Vec<Value>, Vec<Value>),
}

impl std::fmt::Display for LearnError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LearnError::Degenerate(p) => write!(f, "point labeled both ways: {p:?}"),
            LearnError::Unseparable(a, b) => {
                write!(f, "indistinguishable opposite samples: {a:?} / {b:?}")
            }
        }
    }
}

/// Learn a DNF region for one predicate from its labeled points. Empty or
/// single-class data short-circuits to ⊤/⊥.
pub fn induce_partition(
    pred: &Arc<Predicate>,
    rows: &[(Vec<Value>, bool)],
    mod_ks: &BTreeSet<u64>,
    cfg: &SvmConfig,
) -> Result<Expr, LearnError> {
    let mut pos: Vec<Vec<i64>> = Vec::new();
    let mut neg: Vec<Vec<i64>> = Vec::new();
    for (p, label) in rows {
        let ints: Vec<i64> = p.iter().map(Value::as_i64).collect();
        if *label {
            pos.push(ints);
        } else {
            neg.push(ints);
        }
    }
    if pos.is_empty() && neg.is_empty() {
        return Ok(Expr::tt());
    }
    if neg.is_empty() {
        return Ok(Expr::tt());
    }
    if pos.is_empty() {
        return Ok(Expr::ff());
    }
    let planes = fit_svm(&pos, &neg, cfg).map_err(|SvmError::DegenerateData(p)| {
        LearnError::Degenerate(p.into_iter().map(Value::Int).collect())
    })?;
    let attrs = generate_attributes(pred, &planes, mod_ks);
    let all: Vec<(&Vec<i64>, bool)> = pos
        .iter()
        .map(|p| (p, true))
        .chain(neg.iter().map(|n| (n, false)))
        .collect();
    let matrix: Vec<Vec<i64>> = all
        .iter()
        .map(|(p, _)| attrs.iter().map(|a| a.eval(p)).collect())
        .collect();
    let labels: Vec<bool> = all.iter().map(|(_, l)| *l).collect();
    let tree = induce_tree(&matrix, &labels).map_err(|TreeError::Unseparable { pos_row, neg_row }| {
        let to_vals = |r: usize| all[r].0.iter().map(|v| Value::Int(*v)).collect();
        LearnError::Unseparable(to_vals(pos_row), to_vals(neg_row))
    })?;
    debug_assert!(matrix
        .iter()
        .zip(&labels)
        .all(|(row, l)| tree.classify(row) == *l));
    let vars = pred.canonical_vars();
    Ok(tree_to_formula(&tree, &attrs, &vars))
}

/// Disjunction over root-to-Positive-leaf paths; each edge contributes
/// `attr ≤ c` or its strict complement.
pub fn tree_to_formula(tree: &Tree, attrs: &[Attribute], vars: &[Variable]) -> Expr {
    let mut paths: Vec<Expr> = Vec::new();
    let mut prefix: Vec<Expr> = Vec::new();
    collect_paths(tree, attrs, vars, &mut prefix, &mut paths);
    Expr::or(paths).fold()
}

fn collect_paths(
    tree: &Tree,
    attrs: &[Attribute],
    vars: &[Variable],
    prefix: &mut Vec<Expr>,
    out: &mut Vec<Expr>,
) {
    match tree {
        Tree::Leaf(true) => out.push(Expr::and(prefix.clone())),
        Tree::Leaf(false) => {}
        Tree::Node { attr, cut, le, gt } => {
            let lhs = attrs[*attr].to_expr(vars);
            prefix.push(Expr::le(lhs.clone(), Expr::int(*cut)));
            collect_paths(le, attrs, vars, prefix, out);
            prefix.pop();
            prefix.push(Expr::gt(lhs, Expr::int(*cut)));
            collect_paths(gt, attrs, vars, prefix, out);
            prefix.pop();
        }
    }
}
