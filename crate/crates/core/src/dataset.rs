//! Labeled program states per predicate.
//!
//! Points arrive from teacher counterexamples, from zone sampling, and from
//! implication resolution. Firm labels are ground truth: a positive point is
//! reachable, a negative point is doomed, and each carries a justification
//! from which a concrete derivation can be rebuilt. Tentative labels are
//! guesses attached to unresolved implication samples; they steer the
//! learner but never participate in unsat conflicts and are cleared
//! periodically.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::chc::Predicate;
use crate::eval::{holds, Assignment};
use crate::expr::{Expr, Value};
use crate::reasoner::{point_env, point_eqs, Reasoner};
use crate::smt::{Smt, SmtResult};

/// A concrete state of one predicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct DataPoint {
    pub pred: Arc<Predicate>,
    pub values: Vec<Value>,
}

impl std::fmt::Display for DataPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}(", self.pred.name)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Why a point is known reachable.
#[derive(Debug, Clone)]
pub enum PosJust {
    /// Counterexample to a fact clause.
    FactCex { clause: usize, assign: Assignment },
    /// Rule whose body points were all positive.
    RuleCex {
        clause: usize,
        assign: Assignment,
        body: Vec<DataPoint>,
    },
    /// Member of the safe zone (derivation recoverable from the zone).
    SafeZone,
}

/// Why a point is known doomed.
#[derive(Debug, Clone)]
pub enum NegJust {
    /// Counterexample to a linear query clause.
    QueryCex { clause: usize, assign: Assignment },
    /// Rule step into a negative head point.
    RuleCex {
        clause: usize,
        assign: Assignment,
        head: DataPoint,
    },
    /// Member of the unsafe zone.
    UnsafeZone,
}

/// An unresolved implication constraint between sampled points. A `None`
/// head stands for ⊥ (the sample came from a non-linear query).
#[derive(Debug, Clone)]
pub struct Implication {
    pub clause: usize,
    pub assign: Assignment,
    pub body: Vec<DataPoint>,
    pub head: Option<DataPoint>,
}

/// Retention policy for firm samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Accumulate,
    /// Keep the most recent `a` positives and `b` negatives per predicate.
    Queue { a: usize, b: usize },
}

#[derive(Debug, Clone, Default)]
struct PredData {
    positives: Vec<(Vec<Value>, PosJust)>,
    negatives: Vec<(Vec<Value>, NegJust)>,
    tentative_positives: Vec<Vec<Value>>,
    tentative_negatives: Vec<Vec<Value>>,
    /// Evicted firm points, kept so witness chains stay reconstructible.
    archive_pos: Vec<(Vec<Value>, PosJust)>,
    archive_neg: Vec<(Vec<Value>, NegJust)>,
}

/// A firm-label contradiction; each one refutes the system.
#[derive(Debug, Clone)]
pub enum SampleConflict {
    /// The point is both positive and negative.
    SampleSample { pred: Arc<Predicate>, point: Vec<Value> },
    /// A reachable point lies in the unsafe zone.
    PositiveInUnsafe { pred: Arc<Predicate>, point: Vec<Value> },
    /// A doomed point lies in the safe zone.
    NegativeInSafe { pred: Arc<Predicate>, point: Vec<Value> },
    /// A ⊥-headed implication whose body points all became positive.
    ImplicationFalse(Implication),
}

#[derive(Debug, Clone)]
pub struct Dataset {
    mode: Mode,
    data: BTreeMap<Arc<Predicate>, PredData>,
    pub pending: Vec<Implication>,
    tentative_clear_period: usize,
    iters_since_clear: usize,
}

impl Dataset {
    pub fn new(mode: Mode, tentative_clear_period: usize) -> Dataset {
        Dataset {
            mode,
            data: BTreeMap::new(),
            pending: Vec::new(),
            tentative_clear_period,
            iters_since_clear: 0,
        }
    }

    fn entry(&mut self, pred: &Arc<Predicate>) -> &mut PredData {
        self.data.entry(pred.clone()).or_default()
    }

    pub fn positives(&self, pred: &Arc<Predicate>) -> Vec<Vec<Value>> {
        self.data
            .get(pred)
            .map(|d| d.positives.iter().map(|(p, _)| p.clone()).collect())
            .unwrap_or_default()
    }

    pub fn negatives(&self, pred: &Arc<Predicate>) -> Vec<Vec<Value>> {
        self.data
            .get(pred)
            .map(|d| d.negatives.iter().map(|(p, _)| p.clone()).collect())
            .unwrap_or_default()
    }

    /// Training rows for the learner: firm and tentative points with their
    /// current labels (true = positive).
    pub fn labeled(&self, pred: &Arc<Predicate>) -> Vec<(Vec<Value>, bool)> {
        let mut out = Vec::new();
        if let Some(d) = self.data.get(pred) {
            for (p, _) in &d.positives {
                out.push((p.clone(), true));
            }
            for p in &d.tentative_positives {
                out.push((p.clone(), true));
            }
            for (p, _) in &d.negatives {
                out.push((p.clone(), false));
            }
            for p in &d.tentative_negatives {
                out.push((p.clone(), false));
            }
        }
        out
    }

    /// Total number of firm samples across predicates (stall detection).
    pub fn firm_count(&self) -> usize {
        self.data
            .values()
            .map(|d| d.positives.len() + d.negatives.len())
            .sum()
    }

    pub fn is_firm_positive(&self, pred: &Arc<Predicate>, point: &[Value]) -> bool {
        self.data
            .get(pred)
            .is_some_and(|d| d.positives.iter().any(|(p, _)| p == point))
    }

    pub fn is_firm_negative(&self, pred: &Arc<Predicate>, point: &[Value]) -> bool {
        self.data
            .get(pred)
            .is_some_and(|d| d.negatives.iter().any(|(p, _)| p == point))
    }

    /// Justification of a firm positive, consulting the eviction archive too.
    pub fn pos_just(&self, pred: &Arc<Predicate>, point: &[Value]) -> Option<&PosJust> {
        let d = self.data.get(pred)?;
        d.positives
            .iter()
            .chain(&d.archive_pos)
            .find(|(p, _)| p == point)
            .map(|(_, j)| j)
    }

    pub fn neg_just(&self, pred: &Arc<Predicate>, point: &[Value]) -> Option<&NegJust> {
        let d = self.data.get(pred)?;
        d.negatives
            .iter()
            .chain(&d.archive_neg)
            .find(|(p, _)| p == point)
            .map(|(_, j)| j)
    }

    /// Record a firm positive. Tentative entries for the point are dropped;
    /// in Queue mode the oldest positive is evicted past the cap. Returns
    /// true if the point is new.
    pub fn add_positive(&mut self, pred: &Arc<Predicate>, point: Vec<Value>, just: PosJust) -> bool {
        let mode = self.mode;
        let d = self.entry(pred);
        if d.positives.iter().any(|(p, _)| *p == point) {
            return false;
        }
        d.tentative_positives.retain(|p| *p != point);
        d.tentative_negatives.retain(|p| *p != point);
        d.positives.push((point, just));
        if let Mode::Queue { a, .. } = mode {
            while d.positives.len() > a {
                let old = d.positives.remove(0);
                d.archive_pos.push(old);
            }
        }
        true
    }

    pub fn add_negative(&mut self, pred: &Arc<Predicate>, point: Vec<Value>, just: NegJust) -> bool {
        let mode = self.mode;
        let d = self.entry(pred);
        if d.negatives.iter().any(|(p, _)| *p == point) {
            return false;
        }
        d.tentative_positives.retain(|p| *p != point);
        d.tentative_negatives.retain(|p| *p != point);
        d.negatives.push((point, just));
        if let Mode::Queue { b, .. } = mode {
            while d.negatives.len() > b {
                let old = d.negatives.remove(0);
                d.archive_neg.push(old);
            }
        }
        true
    }

    fn add_tentative_negative(&mut self, pred: &Arc<Predicate>, point: Vec<Value>) {
        if self.is_firm_positive(pred, &point) || self.is_firm_negative(pred, &point) {
            return;
        }
        let d = self.entry(pred);
        if !d.tentative_negatives.contains(&point) {
            // a fresh negative guess overrides an older positive guess
            d.tentative_positives.retain(|p| *p != point);
            d.tentative_negatives.push(point);
        }
    }

    /// Remove the tentative entries for a point (wrong guess discovered by
    /// the learner); returns true if anything was removed.
    pub fn drop_tentative(&mut self, pred: &Arc<Predicate>, point: &[Value]) -> bool {
        let d = self.entry(pred);
        let before = d.tentative_positives.len() + d.tentative_negatives.len();
        d.tentative_positives.retain(|p| p != point);
        d.tentative_negatives.retain(|p| p != point);
        before != d.tentative_positives.len() + d.tentative_negatives.len()
    }

    pub fn add_implication(&mut self, imp: Implication) -> bool {
        let dup = self.pending.iter().any(|i| {
            i.clause == imp.clause && i.body == imp.body && i.head == imp.head
        });
        if dup {
            return false;
        }
        self.pending.push(imp);
        true
    }

    /// One learner iteration has happened; clear tentative labels when the
    /// period elapses.
    pub fn tick_learner_iteration(&mut self) {
        self.iters_since_clear += 1;
        if self.iters_since_clear >= self.tentative_clear_period {
            self.iters_since_clear = 0;
            for d in self.data.values_mut() {
                d.tentative_positives.clear();
                d.tentative_negatives.clear();
            }
        }
    }

    pub fn tentatives_empty(&self) -> bool {
        self.data
            .values()
            .all(|d| d.tentative_positives.is_empty() && d.tentative_negatives.is_empty())
    }

    /// Apply the implication-converting rules to fixpoint:
    /// (i) all body points positive ⇒ head positive;
    /// (ii) head negative (or ⊥) with a single body point ⇒ that point
    /// negative; (iii) leftover implications mark their unresolved points
    /// tentative-negative. A ⊥-headed implication whose body is entirely
    /// positive is a refutation and is returned as a conflict.
    pub fn resolve_implications(&mut self) -> Option<SampleConflict> {
        loop {
            let mut progressed = false;
            let mut idx = 0;
            while idx < self.pending.len() {
                let imp = self.pending[idx].clone();
                let all_pos = imp
                    .body
                    .iter()
                    .all(|p| self.is_firm_positive(&p.pred, &p.values));
                let head_neg = match &imp.head {
                    None => true,
                    Some(h) => self.is_firm_negative(&h.pred, &h.values),
                };
                let head_pos = imp
                    .head
                    .as_ref()
                    .is_some_and(|h| self.is_firm_positive(&h.pred, &h.values));
                let any_body_neg = imp
                    .body
                    .iter()
                    .any(|p| self.is_firm_negative(&p.pred, &p.values));
                if all_pos {
                    match &imp.head {
                        Some(h) => {
                            self.add_positive(
                                &h.pred,
                                h.values.clone(),
                                PosJust::RuleCex {
                                    clause: imp.clause,
                                    assign: imp.assign.clone(),
                                    body: imp.body.clone(),
                                },
                            );
                        }
                        None => return Some(SampleConflict::ImplicationFalse(imp)),
                    }
                    self.pending.remove(idx);
                    progressed = true;
                    continue;
                }
                if head_neg && imp.body.len() == 1 {
                    let b = &imp.body[0];
                    let just = match &imp.head {
                        Some(h) => NegJust::RuleCex {
                            clause: imp.clause,
                            assign: imp.assign.clone(),
                            head: h.clone(),
                        },
                        None => NegJust::QueryCex {
                            clause: imp.clause,
                            assign: imp.assign.clone(),
                        },
                    };
                    self.add_negative(&b.pred, b.values.clone(), just);
                    self.pending.remove(idx);
                    progressed = true;
                    continue;
                }
                // already-discharged implications impose nothing further
                if head_pos || any_body_neg {
                    self.pending.remove(idx);
                    progressed = true;
                    continue;
                }
                idx += 1;
            }
            if !progressed {
                break;
            }
        }
        // rule (iii): tag whatever stays unresolved
        let pending = self.pending.clone();
        for imp in &pending {
            for p in &imp.body {
                if !self.is_firm_positive(&p.pred, &p.values)
                    && !self.is_firm_negative(&p.pred, &p.values)
                {
                    self.add_tentative_negative(&p.pred, p.values.clone());
                }
            }
            if let Some(h) = &imp.head {
                if !self.is_firm_positive(&h.pred, &h.values)
                    && !self.is_firm_negative(&h.pred, &h.values)
                {
                    self.add_tentative_negative(&h.pred, h.values.clone());
                }
            }
        }
        None
    }

    /// Relabel tentative points that the zones pin down, then scan for firm
    /// conflicts. Sample-sample collisions are reported before sample-zone
    /// ones; tentative points never produce a conflict.
    pub fn check_conflicts(
        &mut self,
        reasoner: &Reasoner,
        smt: &Smt,
    ) -> Option<SampleConflict> {
        let preds: Vec<Arc<Predicate>> = self.data.keys().cloned().collect();
        // tentative points inside a zone take the zone's firm label
        for pred in &preds {
            let safe = reasoner.safe_formula(pred);
            let doomed = reasoner.unsafe_formula(pred);
            let d = &self.data[pred];
            let tneg = d.tentative_negatives.clone();
            let tpos = d.tentative_positives.clone();
            if !safe.is_false() {
                for point in &tneg {
                    if in_zone(&safe, pred, point, smt) {
                        self.add_positive(pred, point.clone(), PosJust::SafeZone);
                    }
                }
            }
            if !doomed.is_false() {
                for point in &tpos {
                    if in_zone(&doomed, pred, point, smt) {
                        self.add_negative(pred, point.clone(), NegJust::UnsafeZone);
                    }
                }
            }
        }
        for pred in &preds {
            let d = &self.data[pred];
            for (p, _) in &d.positives {
                if d.negatives.iter().any(|(n, _)| n == p) {
                    return Some(SampleConflict::SampleSample {
                        pred: pred.clone(),
                        point: p.clone(),
                    });
                }
            }
        }
        for pred in &preds {
            let safe = reasoner.safe_formula(pred);
            let doomed = reasoner.unsafe_formula(pred);
            let d = &self.data[pred];
            if !doomed.is_false() {
                for (p, _) in &d.positives {
                    if in_zone(&doomed, pred, p, smt) {
                        return Some(SampleConflict::PositiveInUnsafe {
                            pred: pred.clone(),
                            point: p.clone(),
                        });
                    }
                }
            }
            if !safe.is_false() {
                for (n, _) in &d.negatives {
                    if in_zone(&safe, pred, n, smt) {
                        return Some(SampleConflict::NegativeInSafe {
                            pred: pred.clone(),
                            point: n.clone(),
                        });
                    }
                }
            }
        }
        None
    }

    /// Draw a fresh point from a zone formula and store it with the zone's
    /// firm label. Points already stored with that polarity are excluded by
    /// disequalities; exhausted or undecidable zones yield nothing.
    pub fn sample_from_zone(
        &mut self,
        pred: &Arc<Predicate>,
        zone: &Expr,
        positive: bool,
        smt: &Smt,
    ) -> Option<Vec<Value>> {
        if zone.is_false() {
            return None;
        }
        let stored = if positive {
            self.positives(pred)
        } else {
            self.negatives(pred)
        };
        let mut constraint = vec![zone.clone()];
        for p in &stored {
            constraint.push(Expr::not(point_eqs(pred, p)));
        }
        let vars = pred.canonical_vars();
        match smt.check(&Expr::and(constraint), &vars) {
            SmtResult::Sat(m) => {
                let point: Vec<Value> = vars.iter().map(|v| m[v]).collect();
                if positive {
                    self.add_positive(pred, point.clone(), PosJust::SafeZone);
                } else {
                    self.add_negative(pred, point.clone(), NegJust::UnsafeZone);
                }
                Some(point)
            }
            _ => None,
        }
    }

    /// One line per stored sample, for debugging.
    pub fn dump(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        for (pred, d) in &self.data {
            let mut write_points = |label: &str, pts: &mut dyn Iterator<Item = &Vec<Value>>| {
                for p in pts {
                    let vals: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                    let _ = writeln!(out, "{} {label} ({})", pred.name, vals.join(", "));
                }
            };
            write_points("pos", &mut d.positives.iter().map(|(p, _)| p));
            write_points("neg", &mut d.negatives.iter().map(|(p, _)| p));
            write_points("tent-pos", &mut d.tentative_positives.iter());
            write_points("tent-neg", &mut d.tentative_negatives.iter());
        }
        out
    }
}

fn in_zone(zone: &Expr, pred: &Arc<Predicate>, point: &[Value], smt: &Smt) -> bool {
    match holds(zone, &point_env(pred, point)) {
        Some(b) => b,
        None => {
            let pinned = Expr::and(vec![zone.clone(), point_eqs(pred, point)]);
            matches!(smt.check(&pinned, &[]), SmtResult::Sat(_))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chc::ChcSystem;
    use crate::expr::Sort;
    use crate::parse::{parse_str, Format};
    use crate::reasoner::ReasonerOptions;
    use crate::smt::SmtOptions;

    fn pred(n: usize) -> Arc<Predicate> {
        Arc::new(Predicate::new("p", vec![Sort::Int; n]))
    }

    fn pt(vals: &[i64]) -> Vec<Value> {
        vals.iter().map(|v| Value::Int(*v)).collect()
    }

    fn dp(p: &Arc<Predicate>, vals: &[i64]) -> DataPoint {
        DataPoint {
            pred: p.clone(),
            values: pt(vals),
        }
    }

    fn imp(p: &Arc<Predicate>, body: &[&[i64]], head: Option<&[i64]>) -> Implication {
        Implication {
            clause: 0,
            assign: Assignment::new(),
            body: body.iter().map(|b| dp(p, b)).collect(),
            head: head.map(|h| dp(p, h)),
        }
    }

    #[test]
    fn resolution_rule_one_promotes_head() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_positive(
            &p,
            pt(&[0]),
            PosJust::FactCex {
                clause: 0,
                assign: Assignment::new(),
            },
        );
        d.add_implication(imp(&p, &[&[0]], Some(&[1])));
        assert!(d.resolve_implications().is_none());
        assert!(d.is_firm_positive(&p, &pt(&[1])));
        assert!(d.pending.is_empty());
    }

    #[test]
    fn resolution_rule_two_needs_single_body() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_negative(
            &p,
            pt(&[5]),
            NegJust::QueryCex {
                clause: 1,
                assign: Assignment::new(),
            },
        );
        d.add_implication(imp(&p, &[&[4]], Some(&[5])));
        assert!(d.resolve_implications().is_none());
        assert!(d.is_firm_negative(&p, &pt(&[4])));

        // two body points: rule (ii) does not apply, both go tentative
        d.add_implication(imp(&p, &[&[7], &[8]], Some(&[5])));
        assert!(d.resolve_implications().is_none());
        assert!(!d.is_firm_negative(&p, &pt(&[7])));
        let rows = d.labeled(&p);
        assert!(rows.contains(&(pt(&[7]), false)));
        assert!(rows.contains(&(pt(&[8]), false)));
    }

    #[test]
    fn resolution_chains_to_fixpoint() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_implication(imp(&p, &[&[1]], Some(&[2])));
        d.add_implication(imp(&p, &[&[0]], Some(&[1])));
        d.add_positive(
            &p,
            pt(&[0]),
            PosJust::FactCex {
                clause: 0,
                assign: Assignment::new(),
            },
        );
        assert!(d.resolve_implications().is_none());
        // 0 -> 1 -> 2 all promoted in one call
        assert!(d.is_firm_positive(&p, &pt(&[2])));
    }

    #[test]
    fn bottom_head_with_positive_body_is_a_conflict() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_positive(
            &p,
            pt(&[3]),
            PosJust::FactCex {
                clause: 0,
                assign: Assignment::new(),
            },
        );
        d.add_implication(imp(&p, &[&[3]], None));
        match d.resolve_implications() {
            Some(SampleConflict::ImplicationFalse(i)) => assert_eq!(i.body.len(), 1),
            other => panic!("expected ImplicationFalse, got {other:?}"),
        }
    }

    #[test]
    fn bottom_head_single_body_is_negative() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_implication(imp(&p, &[&[9]], None));
        assert!(d.resolve_implications().is_none());
        assert!(d.is_firm_negative(&p, &pt(&[9])));
    }

    #[test]
    fn queue_mode_evicts_oldest() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Queue { a: 2, b: 2 }, 10);
        for i in 0..4 {
            d.add_positive(
                &p,
                pt(&[i]),
                PosJust::FactCex {
                    clause: 0,
                    assign: Assignment::new(),
                },
            );
        }
        assert_eq!(d.positives(&p), vec![pt(&[2]), pt(&[3])]);
        // evicted points keep their justification for witnesses
        assert!(d.pos_just(&p, &pt(&[0])).is_some());
    }

    #[test]
    fn tentatives_clear_on_schedule() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Accumulate, 3);
        d.add_implication(imp(&p, &[&[1], &[2]], None));
        d.resolve_implications();
        assert!(!d.tentatives_empty());
        for _ in 0..3 {
            d.tick_learner_iteration();
        }
        assert!(d.tentatives_empty());
    }

    #[test]
    fn firm_labels_override_tentative() {
        let p = pred(1);
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_implication(imp(&p, &[&[1], &[2]], None));
        d.resolve_implications();
        d.add_positive(
            &p,
            pt(&[1]),
            PosJust::FactCex {
                clause: 0,
                assign: Assignment::new(),
            },
        );
        let rows = d.labeled(&p);
        assert!(rows.contains(&(pt(&[1]), true)));
        assert!(!rows.contains(&(pt(&[1]), false)));
    }

    fn zone_fixture() -> (ChcSystem, Smt, Reasoner) {
        let src = r#"
(set-logic HORN)
(declare-fun p (Int) Bool)
(assert (forall ((x Int)) (=> (and (>= x 0) (<= x 3)) (p x))))
(assert (forall ((x Int)) (=> (and (p x) (>= x 10)) false)))
(check-sat)
"#;
        let sys = parse_str(src, Format::Smt2).unwrap();
        let smt = Smt::new(&SmtOptions::default());
        let mut r = Reasoner::new(&sys, ReasonerOptions::default());
        r.seed(&sys, &smt);
        (sys, smt, r)
    }

    #[test]
    fn sample_sample_conflict_detected() {
        let (sys, smt, r) = zone_fixture();
        let p = sys.pred_by_name("p").unwrap();
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_positive(
            &p,
            pt(&[7]),
            PosJust::FactCex {
                clause: 0,
                assign: Assignment::new(),
            },
        );
        d.add_negative(
            &p,
            pt(&[7]),
            NegJust::QueryCex {
                clause: 1,
                assign: Assignment::new(),
            },
        );
        match d.check_conflicts(&r, &smt) {
            Some(SampleConflict::SampleSample { point, .. }) => assert_eq!(point, pt(&[7])),
            other => panic!("expected sample-sample, got {other:?}"),
        }
    }

    #[test]
    fn sample_zone_conflicts_and_tentative_rescue() {
        let (sys, smt, r) = zone_fixture();
        let p = sys.pred_by_name("p").unwrap();

        // firm negative inside the safe zone [0,3]
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_negative(
            &p,
            pt(&[2]),
            NegJust::QueryCex {
                clause: 1,
                assign: Assignment::new(),
            },
        );
        assert!(matches!(
            d.check_conflicts(&r, &smt),
            Some(SampleConflict::NegativeInSafe { .. })
        ));

        // firm positive inside the unsafe zone x >= 10
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_positive(
            &p,
            pt(&[11]),
            PosJust::FactCex {
                clause: 0,
                assign: Assignment::new(),
            },
        );
        assert!(matches!(
            d.check_conflicts(&r, &smt),
            Some(SampleConflict::PositiveInUnsafe { .. })
        ));

        // tentative negative inside the safe zone is relabeled, not fatal
        let mut d = Dataset::new(Mode::Accumulate, 10);
        d.add_implication(imp(&p, &[&[1], &[2]], None));
        d.resolve_implications();
        assert!(d.check_conflicts(&r, &smt).is_none());
        assert!(d.is_firm_positive(&p, &pt(&[1])));
        assert!(d.is_firm_positive(&p, &pt(&[2])));
    }

    #[test]
    fn zone_sampling_is_fresh_and_labeled() {
        let (sys, smt, r) = zone_fixture();
        let p = sys.pred_by_name("p").unwrap();
        let mut d = Dataset::new(Mode::Accumulate, 10);
        let safe = r.safe_formula(&p);
        // the zone [0,3] holds exactly 4 points; a 5th draw must fail
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..4 {
            let got = d.sample_from_zone(&p, &safe, true, &smt).unwrap();
            assert!(in_zone(&safe, &p, &got, &smt));
            assert!(seen.insert(got));
        }
        assert!(d.sample_from_zone(&p, &safe, true, &smt).is_none());
        assert_eq!(d.positives(&p).len(), 4);
    }
}
