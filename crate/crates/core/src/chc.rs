//! Constrained Horn clause systems.
//!
//! A clause is `phi /\ p1(T1) /\ ... /\ pk(Tk) -> head` where `phi` is a
//! constraint over background theory (here: linear and nonlinear integer
//! arithmetic with booleans), the `pi(Ti)` are applications of unknown
//! predicates, and the head is either a predicate application or `false`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::Arc;

use crate::expr::{Expr, Sort, Variable};

/// An uninterpreted predicate symbol with its argument signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Predicate {
    pub name: Arc<str>,
    pub arg_sorts: Vec<Sort>,
}

impl Predicate {
    pub fn new(name: impl Into<Arc<str>>, arg_sorts: Vec<Sort>) -> Self {
        Predicate {
            name: name.into(),
            arg_sorts,
        }
    }

    pub fn arity(&self) -> usize {
        self.arg_sorts.len()
    }

    /// Canonical argument variables `v0..vN` used when states of this
    /// predicate are expressed as formulas (zones, hypotheses).
    pub fn canonical_vars(&self) -> Vec<Variable> {
        self.arg_sorts
            .iter()
            .enumerate()
            .map(|(i, s)| Variable::new(format!("v{i}"), *s))
            .collect()
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// An application `p(t1, .., tn)` of an unknown predicate to terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredApp {
    pub pred: Arc<Predicate>,
    pub args: Vec<Expr>,
}

impl PredApp {
    pub fn new(pred: Arc<Predicate>, args: Vec<Expr>) -> Self {
        debug_assert_eq!(pred.arity(), args.len());
        PredApp { pred, args }
    }

    /// Instantiate a state formula over canonical vars `v0..vN` at this
    /// application's argument terms.
    pub fn instantiate(&self, state: &Expr) -> Expr {
        let vars = self.pred.canonical_vars();
        let map: HashMap<Variable, Expr> = vars
            .into_iter()
            .zip(self.args.iter().cloned())
            .collect();
        state.subst_map(&map)
    }

    pub fn free_vars(&self) -> BTreeSet<Variable> {
        let mut out = BTreeSet::new();
        for a in &self.args {
            out.extend(a.free_vars());
        }
        out
    }
}

impl fmt::Display for PredApp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            return write!(f, "{}", self.pred.name);
        }
        write!(f, "({}", self.pred.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Head of a clause: an application, or `false` for queries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClauseHead {
    Pred(PredApp),
    False,
}

impl ClauseHead {
    pub fn as_pred(&self) -> Option<&PredApp> {
        match self {
            ClauseHead::Pred(p) => Some(p),
            ClauseHead::False => None,
        }
    }
}

/// Structural classification of a clause.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClauseKind {
    /// No predicate applications in the body; head is an application.
    Fact,
    /// Predicate applications in the body; head is an application.
    Rule,
    /// Head is `false`; body has predicate applications.
    Query,
    /// Neither side mentions an unknown predicate.
    Trivial,
}

/// One Horn clause. `vars` lists every variable occurring in the clause;
/// all are implicitly universally quantified.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub vars: Vec<Variable>,
    pub constraint: Expr,
    pub body_apps: Vec<PredApp>,
    pub head: ClauseHead,
}

impl Clause {
    pub fn kind(&self) -> ClauseKind {
        match (&self.head, self.body_apps.is_empty()) {
            (ClauseHead::Pred(_), true) => ClauseKind::Fact,
            (ClauseHead::Pred(_), false) => ClauseKind::Rule,
            (ClauseHead::False, false) => ClauseKind::Query,
            (ClauseHead::False, true) => ClauseKind::Trivial,
        }
    }

    /// A clause is linear if its body has at most one predicate application.
    pub fn is_linear(&self) -> bool {
        self.body_apps.len() <= 1
    }

    /// Distinct predicates mentioned anywhere in the clause.
    pub fn predicates(&self) -> BTreeSet<Arc<Predicate>> {
        let mut out: BTreeSet<Arc<Predicate>> = self
            .body_apps
            .iter()
            .map(|a| a.pred.clone())
            .collect();
        if let ClauseHead::Pred(h) = &self.head {
            out.insert(h.pred.clone());
        }
        out
    }

    /// Variables of the clause not mentioned in the head application.
    /// These are the ones projected out during forward expansion.
    pub fn non_head_vars(&self) -> Vec<Variable> {
        let head_vars: BTreeSet<Variable> = match &self.head {
            ClauseHead::Pred(app) => app.free_vars(),
            ClauseHead::False => BTreeSet::new(),
        };
        self.vars
            .iter()
            .filter(|v| !head_vars.contains(v))
            .cloned()
            .collect()
    }

    /// Variables of the clause not mentioned in the single body application
    /// (callers ensure linearity). Projected out during backward expansion.
    pub fn non_body_vars(&self) -> Vec<Variable> {
        let body_vars: BTreeSet<Variable> = self
            .body_apps
            .iter()
            .flat_map(|a| a.free_vars())
            .collect();
        self.vars
            .iter()
            .filter(|v| !body_vars.contains(v))
            .cloned()
            .collect()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constraint)?;
        for app in &self.body_apps {
            write!(f, " /\\ {app}")?;
        }
        match &self.head {
            ClauseHead::Pred(app) => write!(f, " -> {app}"),
            ClauseHead::False => write!(f, " -> false"),
        }
    }
}

/// Errors raised while assembling or validating a system.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ChcError {
    #[error("predicate {0} used with inconsistent signature")]
    SignatureMismatch(String),
    #[error("system has no query clause")]
    NoQuery,
    #[error("system has no fact or rule clause")]
    NoRule,
    #[error("trivial clause is unsatisfiable: {0}")]
    TrivialUnsat(String),
}

/// A complete CHC satisfiability problem.
#[derive(Debug, Clone)]
pub struct ChcSystem {
    pub predicates: Vec<Arc<Predicate>>,
    pub clauses: Vec<Clause>,
}

impl ChcSystem {
    /// Assemble a system, checking signature consistency and the basic
    /// well-formedness requirements (at least one fact/rule, at least one
    /// query). Trivial clauses whose constraint is satisfiable make the
    /// whole system unsat and are surfaced as an error by `normalize`.
    pub fn new(predicates: Vec<Arc<Predicate>>, clauses: Vec<Clause>) -> Result<Self, ChcError> {
        let mut seen: BTreeMap<Arc<str>, Vec<Sort>> = BTreeMap::new();
        for p in &predicates {
            if let Some(prev) = seen.insert(p.name.clone(), p.arg_sorts.clone()) {
                if prev != p.arg_sorts {
                    return Err(ChcError::SignatureMismatch(p.name.to_string()));
                }
            }
        }
        let check_app = |app: &PredApp| -> Result<(), ChcError> {
            match seen.get(&app.pred.name) {
                Some(sig) if *sig == app.pred.arg_sorts => Ok(()),
                _ => Err(ChcError::SignatureMismatch(app.pred.name.to_string())),
            }
        };
        let mut has_query = false;
        let mut has_rule = false;
        for c in &clauses {
            for app in &c.body_apps {
                check_app(app)?;
            }
            if let ClauseHead::Pred(app) = &c.head {
                check_app(app)?;
            }
            match c.kind() {
                ClauseKind::Query => has_query = true,
                ClauseKind::Fact | ClauseKind::Rule => has_rule = true,
                ClauseKind::Trivial => {}
            }
        }
        if !has_query {
            return Err(ChcError::NoQuery);
        }
        if !has_rule {
            return Err(ChcError::NoRule);
        }
        Ok(ChcSystem {
            predicates,
            clauses,
        })
    }

    pub fn pred_by_name(&self, name: &str) -> Option<Arc<Predicate>> {
        self.predicates
            .iter()
            .find(|p| &*p.name == name)
            .cloned()
    }

    pub fn facts(&self) -> impl Iterator<Item = (usize, &Clause)> {
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind() == ClauseKind::Fact)
    }

    pub fn rules(&self) -> impl Iterator<Item = (usize, &Clause)> {
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind() == ClauseKind::Rule)
    }

    pub fn queries(&self) -> impl Iterator<Item = (usize, &Clause)> {
        self.clauses
            .iter()
            .enumerate()
            .filter(|(_, c)| c.kind() == ClauseKind::Query)
    }

    /// Assemble without well-formedness validation. Used for the residual
    /// system after normalization, which may legitimately lack queries.
    pub fn new_unchecked(predicates: Vec<Arc<Predicate>>, clauses: Vec<Clause>) -> Self {
        ChcSystem {
            predicates,
            clauses,
        }
    }

    /// Substitute an interpretation for every predicate, producing one
    /// verification condition per clause: `phi /\ I(body..) /\ not I(head)`
    /// must be unsat for the clause to hold.
    pub fn clause_vc(&self, clause: &Clause, interp: &HashMap<Arc<Predicate>, Expr>) -> Expr {
        let mut conj = vec![clause.constraint.clone()];
        for app in &clause.body_apps {
            let state = interp
                .get(&app.pred)
                .cloned()
                .unwrap_or_else(Expr::tt);
            conj.push(app.instantiate(&state));
        }
        match &clause.head {
            ClauseHead::Pred(app) => {
                let state = interp
                    .get(&app.pred)
                    .cloned()
                    .unwrap_or_else(Expr::tt);
                conj.push(Expr::not(app.instantiate(&state)));
            }
            ClauseHead::False => {}
        }
        Expr::and(conj)
    }
}

/// Result of structural preprocessing.
#[derive(Debug, Clone)]
pub struct Normalized {
    /// Clauses still mentioning unresolved predicates (validation relaxed:
    /// the residue may have no queries left, which means sat).
    pub system: ChcSystem,
    /// Predicates resolved to a constant interpretation (true or false).
    pub fixed: HashMap<Arc<Predicate>, Expr>,
    /// Predicate-free clauses; each is unsat iff its constraint is
    /// satisfiable, so they must be discharged before solving.
    pub trivial: Vec<Clause>,
}

/// Resolve predicates that are structurally unconstrained, to fixpoint.
///
/// A predicate heading no fact or rule is unreachable and can be fixed to
/// `false`, which silences every clause using it in a body. A predicate
/// appearing in no body is unobserved and can be fixed to `true`, which
/// discharges every clause deriving it. Each resolution may expose more,
/// hence the loop.
pub fn normalize(sys: &ChcSystem) -> Normalized {
    let mut fixed: HashMap<Arc<Predicate>, Expr> = HashMap::new();
    let mut trivial = Vec::new();
    let mut clauses = sys.clauses.clone();
    clauses.retain(|c| {
        if c.kind() == ClauseKind::Trivial {
            trivial.push(c.clone());
            false
        } else {
            true
        }
    });
    loop {
        let mut in_head = BTreeSet::new();
        let mut in_body = BTreeSet::new();
        for c in &clauses {
            if let ClauseHead::Pred(app) = &c.head {
                in_head.insert(app.pred.clone());
            }
            for app in &c.body_apps {
                in_body.insert(app.pred.clone());
            }
        }
        let mut newly: Vec<(Arc<Predicate>, Expr)> = Vec::new();
        for p in &sys.predicates {
            if fixed.contains_key(p) {
                continue;
            }
            if !in_head.contains(p) {
                newly.push((p.clone(), Expr::ff()));
            } else if !in_body.contains(p) {
                newly.push((p.clone(), Expr::tt()));
            }
        }
        if newly.is_empty() {
            break;
        }
        for (p, v) in &newly {
            fixed.insert(p.clone(), v.clone());
        }
        let mut next = Vec::with_capacity(clauses.len());
        for mut c in clauses {
            // a false body app silences the clause; true apps just vanish
            let mut dead = false;
            c.body_apps.retain(|app| match fixed.get(&app.pred) {
                Some(v) if v.is_false() => {
                    dead = true;
                    false
                }
                Some(_) => false,
                None => true,
            });
            if dead {
                continue;
            }
            if let ClauseHead::Pred(app) = &c.head {
                match fixed.get(&app.pred) {
                    Some(v) if v.is_true() => continue,
                    Some(_) => c.head = ClauseHead::False,
                    None => {}
                }
            }
            if c.kind() == ClauseKind::Trivial {
                trivial.push(c);
            } else {
                next.push(c);
            }
        }
        clauses = next;
    }
    let remaining: Vec<Arc<Predicate>> = sys
        .predicates
        .iter()
        .filter(|p| !fixed.contains_key(*p))
        .cloned()
        .collect();
    Normalized {
        system: ChcSystem::new_unchecked(remaining, clauses),
        fixed,
        trivial,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::CmpOp;

    fn inv3() -> Arc<Predicate> {
        Arc::new(Predicate::new("inv", vec![Sort::Int; 3]))
    }

    fn v(n: &str) -> Variable {
        Variable::int(n)
    }

    fn ev(n: &str) -> Expr {
        Expr::var(v(n))
    }

    #[test]
    fn clause_classification() {
        let p = inv3();
        let app = |names: [&str; 3]| PredApp::new(p.clone(), names.map(ev).to_vec());

        let fact = Clause {
            vars: vec![v("x"), v("y"), v("z")],
            constraint: Expr::eq(ev("x"), Expr::int(0)),
            body_apps: vec![],
            head: ClauseHead::Pred(app(["x", "y", "z"])),
        };
        assert_eq!(fact.kind(), ClauseKind::Fact);
        assert!(fact.is_linear());

        let rule = Clause {
            vars: vec![v("x"), v("y"), v("z")],
            constraint: Expr::tt(),
            body_apps: vec![app(["x", "y", "z"])],
            head: ClauseHead::Pred(app(["x", "y", "z"])),
        };
        assert_eq!(rule.kind(), ClauseKind::Rule);

        let query = Clause {
            vars: vec![v("x"), v("y"), v("z")],
            constraint: Expr::cmp(CmpOp::Lt, ev("x"), Expr::int(0)),
            body_apps: vec![app(["x", "y", "z"])],
            head: ClauseHead::False,
        };
        assert_eq!(query.kind(), ClauseKind::Query);

        let nonlinear = Clause {
            vars: vec![v("x"), v("y"), v("z")],
            constraint: Expr::tt(),
            body_apps: vec![app(["x", "y", "z"]), app(["x", "x", "x"])],
            head: ClauseHead::Pred(app(["x", "y", "z"])),
        };
        assert!(!nonlinear.is_linear());

        let sys = ChcSystem::new(vec![p], vec![fact, rule, query, nonlinear]).unwrap();
        assert_eq!(sys.facts().count(), 1);
        assert_eq!(sys.rules().count(), 2);
        assert_eq!(sys.queries().count(), 1);
    }

    #[test]
    fn system_requires_rule_and_query() {
        let p = inv3();
        let app = PredApp::new(p.clone(), vec![ev("x"), ev("y"), ev("z")]);
        let fact = Clause {
            vars: vec![v("x"), v("y"), v("z")],
            constraint: Expr::tt(),
            body_apps: vec![],
            head: ClauseHead::Pred(app.clone()),
        };
        let query = Clause {
            vars: vec![v("x"), v("y"), v("z")],
            constraint: Expr::tt(),
            body_apps: vec![app],
            head: ClauseHead::False,
        };
        assert_eq!(
            ChcSystem::new(vec![p.clone()], vec![fact.clone()]).unwrap_err(),
            ChcError::NoQuery
        );
        assert_eq!(
            ChcSystem::new(vec![p.clone()], vec![query.clone()]).unwrap_err(),
            ChcError::NoRule
        );
        assert!(ChcSystem::new(vec![p], vec![fact, query]).is_ok());
    }

    #[test]
    fn instantiation_maps_canonical_vars() {
        let p = inv3();
        let app = PredApp::new(
            p,
            vec![ev("a"), Expr::add(vec![ev("b"), Expr::int(1)]), Expr::int(0)],
        );
        // state over canonical vars: v0 <= v1 /\ v2 = 0
        let state = Expr::and(vec![
            Expr::le(ev("v0"), ev("v1")),
            Expr::eq(ev("v2"), Expr::int(0)),
        ]);
        let inst = app.instantiate(&state);
        assert_eq!(inst.to_string(), "(and (<= a (+ b 1)) (= 0 0))");
    }

}
