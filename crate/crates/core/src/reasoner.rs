//! Symbolic reasoner: grows a safe zone (states reachable from the facts)
//! and an unsafe zone (states doomed to reach a query violation) for every
//! predicate, by quantifier elimination over clause images.
//!
//! Both zones are unions of disjuncts over the predicate's canonical
//! variables `v0..vN`. Every disjunct is an exact image of concrete
//! executions, so the zones under-approximate their ideal counterparts and
//! any overlap between a safe and an unsafe zone refutes the system. Each
//! disjunct records where it came from, so a concrete derivation can be
//! reconstructed later for the unsat witness.
//!
//! Expansion is gated three ways: clauses whose body constraint exceeds
//! `body_skip` nodes are never imaged, a zone whose formula would exceed `zone_stop`
//! nodes is frozen (the candidate is discarded), and a failed or timed-out
//! elimination freezes the target zone as well.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::chc::{ChcSystem, Clause, Predicate};
use crate::eval::{holds, Assignment};
use crate::expr::{CmpOp, Expr, Value, Variable};
use crate::smt::{Smt, SmtError, SmtResult};

/// How a disjunct was derived; the `*_len(s)` fields bound which disjuncts
/// of the source zones existed at creation time, keeping reconstruction
/// well-founded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    /// Image of a fact clause.
    Fact { clause: usize },
    /// Forward image of a rule over the body predicates' safe zones.
    Forward { clause: usize, body_lens: Vec<usize> },
    /// Seeded by a linear query clause.
    Query { clause: usize },
    /// Backward image of a linear rule over the head predicate's unsafe zone.
    Backward { clause: usize, head_len: usize },
}

#[derive(Debug, Clone)]
pub struct Disjunct {
    /// Quantifier-free formula over the predicate's canonical variables.
    pub formula: Expr,
    pub origin: Origin,
}

#[derive(Debug, Clone, Default)]
pub struct Zone {
    pub disjuncts: Vec<Disjunct>,
    pub frozen: bool,
}

impl Zone {
    pub fn formula(&self) -> Expr {
        Expr::or(self.disjuncts.iter().map(|d| d.formula.clone()).collect())
    }

    fn size_with(&self, extra: usize) -> usize {
        let base: usize = self.disjuncts.iter().map(|d| d.formula.size()).sum();
        if self.disjuncts.is_empty() {
            extra
        } else {
            1 + base + extra
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReasonerOptions {
    pub body_skip: usize,
    pub zone_stop: usize,
    pub safe_enabled: bool,
    pub unsafe_enabled: bool,
}

impl Default for ReasonerOptions {
    fn default() -> Self {
        ReasonerOptions {
            body_skip: 500,
            zone_stop: 1500,
            safe_enabled: true,
            unsafe_enabled: true,
        }
    }
}

pub struct Reasoner {
    opts: ReasonerOptions,
    pub safe: BTreeMap<Arc<Predicate>, Zone>,
    pub doomed: BTreeMap<Arc<Predicate>, Zone>,
}

/// Assignment binding a predicate's canonical variables to a point.
pub fn point_env(pred: &Predicate, point: &[Value]) -> Assignment {
    pred.canonical_vars().into_iter().zip(point.iter().copied()).collect()
}

/// Conjunction pinning the canonical variables to a point.
pub fn point_eqs(pred: &Predicate, point: &[Value]) -> Expr {
    Expr::and(
        pred.canonical_vars()
            .into_iter()
            .zip(point)
            .map(|(v, val)| Expr::eq(Expr::var(v), val.to_expr()))
            .collect(),
    )
}

impl Reasoner {
    pub fn new(sys: &ChcSystem, opts: ReasonerOptions) -> Reasoner {
        let mut safe = BTreeMap::new();
        let mut doomed = BTreeMap::new();
        for p in &sys.predicates {
            safe.insert(p.clone(), Zone::default());
            doomed.insert(p.clone(), Zone::default());
        }
        Reasoner { opts, safe, doomed }
    }

    /// Safe-zone formula for `p` (false when disabled or empty).
    pub fn safe_formula(&self, p: &Arc<Predicate>) -> Expr {
        if !self.opts.safe_enabled {
            return Expr::ff();
        }
        self.safe.get(p).map_or_else(Expr::ff, Zone::formula)
    }

    /// Unsafe-zone formula for `p` (false when disabled or empty).
    pub fn unsafe_formula(&self, p: &Arc<Predicate>) -> Expr {
        if !self.opts.unsafe_enabled {
            return Expr::ff();
        }
        self.doomed.get(p).map_or_else(Expr::ff, Zone::formula)
    }

    /// Compute the initial zones: fact images seed the safe side, linear
    /// queries seed the unsafe side.
    pub fn seed(&mut self, sys: &ChcSystem, smt: &Smt) {
        if self.opts.safe_enabled {
            for (ci, clause) in sys.facts() {
                if clause.constraint.size() > self.opts.body_skip {
                    continue;
                }
                let head = clause.head.as_pred().unwrap().clone();
                match image(smt, clause, &[], &head.args) {
                    Ok(f) => {
                        self.add_disjunct(true, &head.pred, f, Origin::Fact { clause: ci }, smt);
                    }
                    Err(_) => self.freeze(true, &head.pred),
                }
            }
        }
        if self.opts.unsafe_enabled {
            for (ci, clause) in sys.queries() {
                if clause.body_apps.len() != 1 || clause.constraint.size() > self.opts.body_skip {
                    continue;
                }
                let app = clause.body_apps[0].clone();
                match image(smt, clause, &[], &app.args) {
                    Ok(f) => {
                        self.add_disjunct(false, &app.pred, f, Origin::Query { clause: ci }, smt);
                    }
                    Err(_) => self.freeze(false, &app.pred),
                }
            }
        }
    }

    /// One synchronous round of forward expansion over all rules. Returns
    /// true if any zone gained a disjunct.
    pub fn forward_round(&mut self, sys: &ChcSystem, smt: &Smt) -> bool {
        if !self.opts.safe_enabled {
            return false;
        }
        let snapshot: BTreeMap<Arc<Predicate>, (Expr, usize)> = self
            .safe
            .iter()
            .map(|(p, z)| (p.clone(), (z.formula(), z.disjuncts.len())))
            .collect();
        let mut changed = false;
        for (ci, clause) in sys.rules() {
            let head = clause.head.as_pred().unwrap().clone();
            if self.safe.get(&head.pred).is_none_or(|z| z.frozen) {
                continue;
            }
            if clause.constraint.size() > self.opts.body_skip {
                continue;
            }
            let mut body = Vec::with_capacity(clause.body_apps.len());
            let mut body_lens = Vec::with_capacity(clause.body_apps.len());
            let mut empty = false;
            for app in &clause.body_apps {
                match snapshot.get(&app.pred) {
                    Some((f, len)) if !f.is_false() => {
                        body.push(app.instantiate(f));
                        body_lens.push(*len);
                    }
                    _ => {
                        empty = true;
                        break;
                    }
                }
            }
            if empty {
                continue;
            }
            match image(smt, clause, &body, &head.args) {
                Ok(f) => {
                    changed |= self.add_disjunct(
                        true,
                        &head.pred,
                        f,
                        Origin::Forward { clause: ci, body_lens },
                        smt,
                    );
                }
                Err(_) => self.freeze(true, &head.pred),
            }
        }
        changed
    }

    /// One synchronous round of backward expansion over the linear rules.
    pub fn backward_round(&mut self, sys: &ChcSystem, smt: &Smt) -> bool {
        if !self.opts.unsafe_enabled {
            return false;
        }
        let snapshot: BTreeMap<Arc<Predicate>, (Expr, usize)> = self
            .doomed
            .iter()
            .map(|(p, z)| (p.clone(), (z.formula(), z.disjuncts.len())))
            .collect();
        let mut changed = false;
        for (ci, clause) in sys.rules() {
            if clause.body_apps.len() != 1 {
                continue;
            }
            let body = clause.body_apps[0].clone();
            if self.doomed.get(&body.pred).is_none_or(|z| z.frozen) {
                continue;
            }
            if clause.constraint.size() > self.opts.body_skip {
                continue;
            }
            let head = clause.head.as_pred().unwrap();
            let (head_zone, head_len) = match snapshot.get(&head.pred) {
                Some((f, len)) if !f.is_false() => (f.clone(), *len),
                _ => continue,
            };
            let doomed_head = head.instantiate(&head_zone);
            match image(smt, clause, &[doomed_head], &body.args) {
                Ok(f) => {
                    changed |= self.add_disjunct(
                        false,
                        &body.pred,
                        f,
                        Origin::Backward { clause: ci, head_len },
                        smt,
                    );
                }
                Err(_) => self.freeze(false, &body.pred),
            }
        }
        changed
    }

    /// Scan for a predicate whose zones overlap; any shared point is a
    /// state both reachable and doomed, refuting the system.
    pub fn zone_conflict(
        &self,
        sys: &ChcSystem,
        smt: &Smt,
    ) -> Option<(Arc<Predicate>, Vec<Value>)> {
        for p in &sys.predicates {
            let s = self.safe_formula(p);
            let u = self.unsafe_formula(p);
            if s.is_false() || u.is_false() {
                continue;
            }
            let vars = p.canonical_vars();
            if let SmtResult::Sat(m) = smt.check(&Expr::and(vec![s, u]), &vars) {
                let point: Vec<Value> = vars.iter().map(|v| m[v]).collect();
                return Some((p.clone(), point));
            }
        }
        None
    }

    /// Index of a safe-zone disjunct containing `point`, looking only at
    /// the first `limit` disjuncts when given.
    pub fn find_safe_disjunct(
        &self,
        smt: &Smt,
        p: &Arc<Predicate>,
        point: &[Value],
        limit: Option<usize>,
    ) -> Option<usize> {
        self.find_disjunct(smt, self.safe.get(p)?, p, point, limit)
    }

    /// Index of an unsafe-zone disjunct containing `point`.
    pub fn find_unsafe_disjunct(
        &self,
        smt: &Smt,
        p: &Arc<Predicate>,
        point: &[Value],
        limit: Option<usize>,
    ) -> Option<usize> {
        self.find_disjunct(smt, self.doomed.get(p)?, p, point, limit)
    }

    fn find_disjunct(
        &self,
        smt: &Smt,
        zone: &Zone,
        p: &Arc<Predicate>,
        point: &[Value],
        limit: Option<usize>,
    ) -> Option<usize> {
        let n = limit.unwrap_or(zone.disjuncts.len()).min(zone.disjuncts.len());
        let env = point_env(p, point);
        for (i, d) in zone.disjuncts[..n].iter().enumerate() {
            match holds(&d.formula, &env) {
                Some(true) => return Some(i),
                Some(false) => continue,
                None => {
                    // ground evaluation hit div-by-zero or overflow
                    let pinned = Expr::and(vec![d.formula.clone(), point_eqs(p, point)]);
                    if smt.check(&pinned, &[]) == SmtResult::Sat(Assignment::new()) {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    fn freeze(&mut self, safe_side: bool, p: &Arc<Predicate>) {
        let map = if safe_side { &mut self.safe } else { &mut self.doomed };
        if let Some(z) = map.get_mut(p) {
            z.frozen = true;
        }
    }

    fn add_disjunct(
        &mut self,
        safe_side: bool,
        p: &Arc<Predicate>,
        formula: Expr,
        origin: Origin,
        smt: &Smt,
    ) -> bool {
        let formula = formula.fold();
        if formula.is_false() {
            return false;
        }
        let map = if safe_side { &mut self.safe } else { &mut self.doomed };
        let zone = match map.get_mut(p) {
            Some(z) => z,
            None => return false,
        };
        if zone.frozen {
            return false;
        }
        if !zone.disjuncts.is_empty() {
            let existing = zone.formula();
            let novel = Expr::and(vec![formula.clone(), Expr::not(existing)]);
            if smt.check(&novel, &[]) == SmtResult::Unsat {
                return false;
            }
        }
        if zone.size_with(formula.size()) > self.opts.zone_stop {
            zone.frozen = true;
            return false;
        }
        zone.disjuncts.push(Disjunct { formula, origin });
        true
    }
}

/// Image of a clause body onto target states: conjoin the clause constraint
/// with `extra` state formulas (already instantiated at clause terms), pin
/// the canonical variables to `target_args`, and project out every clause
/// variable. Clause variables are renamed first so they cannot collide with
/// the canonical ones.
fn image(
    smt: &Smt,
    clause: &Clause,
    extra: &[Expr],
    target_args: &[Expr],
) -> Result<Expr, SmtError> {
    let mut prefix = String::from("w!");
    while clause.vars.iter().any(|v| v.name.starts_with(&prefix)) {
        prefix.push('!');
    }
    let rename: HashMap<Variable, Expr> = clause
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| {
            (
                v.clone(),
                Expr::var(Variable::new(format!("{prefix}{i}"), v.sort)),
            )
        })
        .collect();
    let renamed_vars: Vec<Variable> = clause
        .vars
        .iter()
        .enumerate()
        .map(|(i, v)| Variable::new(format!("{prefix}{i}"), v.sort))
        .collect();

    let mut parts = vec![clause.constraint.subst_map(&rename)];
    for e in extra {
        parts.push(e.subst_map(&rename));
    }
    for (i, arg) in target_args.iter().enumerate() {
        let sort = arg.sort().unwrap_or(crate::expr::Sort::Int);
        let target = Variable::new(format!("v{i}"), sort);
        parts.push(Expr::eq(Expr::var(target), arg.subst_map(&rename)));
    }
    project(smt, renamed_vars, parts)
}

/// Eliminate `vars` from the conjunction of `parts`. Equated variables are
/// substituted away syntactically; whatever remains goes to the backend.
fn project(smt: &Smt, vars: Vec<Variable>, parts: Vec<Expr>) -> Result<Expr, SmtError> {
    let mut conj: Vec<Expr> = Vec::new();
    for p in parts {
        match p {
            Expr::And(items) => conj.extend(items.iter().map(|a| (**a).clone())),
            other => conj.push(other),
        }
    }
    let mut remaining: Vec<Variable> = vars;
    loop {
        let mut solved: Option<(usize, Variable, Expr)> = None;
        'search: for (i, part) in conj.iter().enumerate() {
            if let Expr::Cmp(CmpOp::Eq, a, b) = part {
                for (lhs, rhs) in [(a, b), (b, a)] {
                    if let Expr::Var(v) = &**lhs {
                        if remaining.contains(v) {
                            let t_vars = rhs.free_vars();
                            if !remaining.iter().any(|r| t_vars.contains(r)) {
                                solved = Some((i, v.clone(), (**rhs).clone()));
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        let (i, v, t) = match solved {
            Some(s) => s,
            None => break,
        };
        conj.remove(i);
        let mut map = HashMap::new();
        map.insert(v.clone(), t);
        conj = conj.iter().map(|p| p.subst_map(&map).fold()).collect();
        remaining.retain(|r| *r != v);
    }
    conj.retain(|p| !p.is_true());
    if conj.iter().any(|p| p.is_false()) {
        return Ok(Expr::ff());
    }
    let body = Expr::and(conj);
    let used = body.free_vars();
    remaining.retain(|v| used.contains(v));
    if remaining.is_empty() {
        Ok(body)
    } else {
        Ok(smt.qelim(&remaining, &body)?.fold())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::{parse_str, Format};
    use crate::smt::SmtOptions;

    const COUNTER: &str = r#"
(set-logic HORN)
(declare-fun inv (Int Int) Bool)
(assert (forall ((x Int) (y Int)) (=> (and (= x 0) (= y 0)) (inv x y))))
(assert (forall ((x Int) (y Int) (x1 Int) (y1 Int))
  (=> (and (inv x y) (= x1 (+ x 1)) (= y1 (+ y x))) (inv x1 y1))))
(assert (forall ((x Int) (y Int)) (=> (and (inv x y) (< y 0)) false)))
(check-sat)
"#;

    const MULT: &str = r#"
(set-logic HORN)
(declare-fun inv (Int Int Int Int Int) Bool)
(assert (forall ((a Int) (b Int) (c Int) (d Int) (e Int))
  (=> (and (not (<= a 0)) (<= b a) (= c 0) (= d 0) (= e 0)) (inv a b c d e))))
(assert (forall ((a Int) (b Int) (c Int) (d Int) (e Int) (c1 Int) (d1 Int) (e1 Int))
  (=> (and (inv a b c d e) (= c1 (+ c 1)) (= d1 (+ d a)) (= e1 (+ e b)))
      (inv a b c1 d1 e1))))
(assert (forall ((a Int) (b Int) (c Int) (d Int) (e Int))
  (=> (and (inv a b c d e) (not (>= e (* a c)))) false)))
(check-sat)
"#;

    fn setup(src: &str) -> (crate::chc::ChcSystem, Smt) {
        let sys = parse_str(src, Format::Smt2).unwrap();
        (sys, Smt::new(&SmtOptions::default()))
    }

    #[test]
    fn seed_builds_initial_zones() {
        let (sys, smt) = setup(COUNTER);
        let mut r = Reasoner::new(&sys, ReasonerOptions::default());
        r.seed(&sys, &smt);
        let p = sys.pred_by_name("inv").unwrap();
        let expected_s = Expr::and(vec![
            Expr::eq(Expr::var(Variable::int("v0")), Expr::int(0)),
            Expr::eq(Expr::var(Variable::int("v1")), Expr::int(0)),
        ]);
        assert!(smt.equivalent(&r.safe_formula(&p), &expected_s));
        let expected_u = Expr::lt(Expr::var(Variable::int("v1")), Expr::int(0));
        assert!(smt.equivalent(&r.unsafe_formula(&p), &expected_u));
    }

    #[test]
    fn forward_round_images_the_rule() {
        let (sys, smt) = setup(COUNTER);
        let mut r = Reasoner::new(&sys, ReasonerOptions::default());
        r.seed(&sys, &smt);
        assert!(r.forward_round(&sys, &smt));
        let p = sys.pred_by_name("inv").unwrap();
        // one step from (0,0) lands on (1,0)
        let step = Expr::and(vec![
            Expr::eq(Expr::var(Variable::int("v0")), Expr::int(1)),
            Expr::eq(Expr::var(Variable::int("v1")), Expr::int(0)),
        ]);
        let zone = r.safe_formula(&p);
        assert!(matches!(
            smt.check_implication(&step, &zone, &[]),
            SmtResult::Unsat
        ));
        assert!(r.zone_conflict(&sys, &smt).is_none());
    }

    #[test]
    fn zones_overlap_on_the_buggy_multiplier() {
        let (sys, smt) = setup(MULT);
        let mut r = Reasoner::new(&sys, ReasonerOptions::default());
        r.seed(&sys, &smt);
        assert!(r.zone_conflict(&sys, &smt).is_none());
        assert!(r.forward_round(&sys, &smt));
        let (p, point) = r.zone_conflict(&sys, &smt).expect("conflict after one round");
        assert_eq!(&*p.name, "inv");
        // the conflict point really lies in both zones
        let env = point_env(&p, &point);
        assert_eq!(holds(&r.safe_formula(&p), &env), Some(true));
        assert_eq!(holds(&r.unsafe_formula(&p), &env), Some(true));
        // and it is locatable for witness reconstruction
        assert!(r.find_safe_disjunct(&smt, &p, &point, None).is_some());
        assert!(r.find_unsafe_disjunct(&smt, &p, &point, None).is_some());
    }

    #[test]
    fn zone_stop_freezes_without_growing() {
        let (sys, smt) = setup(COUNTER);
        let mut r = Reasoner::new(
            &sys,
            ReasonerOptions {
                zone_stop: 5,
                ..ReasonerOptions::default()
            },
        );
        r.seed(&sys, &smt);
        let p = sys.pred_by_name("inv").unwrap();
        // the seed disjunct (7 nodes) exceeds the cap: discarded, frozen
        assert!(r.safe_formula(&p).is_false());
        assert!(r.safe[&p].frozen);
        assert!(!r.forward_round(&sys, &smt));
    }

    #[test]
    fn body_skip_gates_on_constraint_size() {
        let (sys, smt) = setup(COUNTER);
        let mut r = Reasoner::new(
            &sys,
            ReasonerOptions {
                body_skip: 3,
                ..ReasonerOptions::default()
            },
        );
        r.seed(&sys, &smt);
        let p = sys.pred_by_name("inv").unwrap();
        // fact constraint is 7 nodes, over the cap; query is exactly 3, kept
        assert!(r.safe_formula(&p).is_false());
        assert!(!r.unsafe_formula(&p).is_false());
    }

    #[test]
    fn disabled_zones_stay_false() {
        let (sys, smt) = setup(COUNTER);
        let mut r = Reasoner::new(
            &sys,
            ReasonerOptions {
                safe_enabled: false,
                ..ReasonerOptions::default()
            },
        );
        r.seed(&sys, &smt);
        let p = sys.pred_by_name("inv").unwrap();
        assert!(r.safe_formula(&p).is_false());
        assert!(!r.unsafe_formula(&p).is_false());
        assert!(!r.forward_round(&sys, &smt));
    }

    #[test]
    fn subsumed_images_are_not_added() {
        let src = r#"
(set-logic HORN)
(declare-fun p (Int) Bool)
(assert (forall ((x Int)) (=> (> x 0) (p x))))
(assert (forall ((x Int)) (=> (and (p x) (> x 5)) (p x))))
(assert (forall ((x Int)) (=> (and (p x) (< x 0)) false)))
(check-sat)
"#;
        let (sys, smt) = setup(src);
        let mut r = Reasoner::new(&sys, ReasonerOptions::default());
        r.seed(&sys, &smt);
        let p = sys.pred_by_name("p").unwrap();
        assert_eq!(r.safe[&p].disjuncts.len(), 1);
        // the rule's image x>5 is inside x>0 already
        assert!(!r.forward_round(&sys, &smt));
        assert_eq!(r.safe[&p].disjuncts.len(), 1);
    }
}
