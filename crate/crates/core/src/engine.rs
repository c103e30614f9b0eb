//! The guess-and-check loop tying zones, samples, and partitions together.
//!
//! A hypothesis (one formula per predicate, assembled from the safe zone,
//! the learned partition, and the complement of the unsafe zone) is checked
//! clause by clause. Counterexamples become labeled samples, samples feed
//! the learner, and firm-label contradictions short-circuit to unsat with a
//! replayable derivation.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::chc::{ChcSystem, Clause, ClauseHead, ClauseKind, Normalized, PredApp, Predicate};
use crate::dataset::{
    DataPoint, Dataset, Implication, Mode, NegJust, PosJust, SampleConflict,
};
use crate::eval::{eval, Assignment};
use crate::expr::{Expr, Value};
use crate::learner::svm::SvmConfig;
use crate::learner::{find_mod_patterns, induce_partition, LearnError};
use crate::reasoner::{Origin, Reasoner, ReasonerOptions};
use crate::smt::{Smt, SmtOptions, SmtResult};

/// Hypothesis shapes from the candidate table: the safe zone alone, the
/// learned partition alone, and their combinations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    S,
    L,
    Lu,
    Sl,
    Slu,
}

impl StrategyKind {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::S => "s",
            StrategyKind::L => "l",
            StrategyKind::Lu => "lu",
            StrategyKind::Sl => "sl",
            StrategyKind::Slu => "slu",
        }
    }

    fn next(self) -> StrategyKind {
        match self {
            StrategyKind::Slu => StrategyKind::Sl,
            StrategyKind::Sl => StrategyKind::Lu,
            StrategyKind::Lu => StrategyKind::L,
            StrategyKind::L => StrategyKind::S,
            StrategyKind::S => StrategyKind::Slu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheduler {
    Fixed,
    /// Rotate SLU → SL → LU → L → S after this many consecutive learner
    /// iterations without a new firm sample.
    RotateOnStall(usize),
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub strategy: StrategyKind,
    pub scheduler: Scheduler,
    pub no_learner: bool,
    pub reasoner: ReasonerOptions,
    pub expand_rounds: usize,
    pub mode: Mode,
    pub tentative_clear_period: usize,
    pub svm: SvmConfig,
    pub seed: u64,
    pub timeout: Duration,
    pub smt_timeout_ms: u32,
    pub batch: usize,
    /// Rebuild the hypothesis once per counterexample and move to the next
    /// clause instead of re-checking the same clause to quiescence.
    pub single_update: bool,
}

impl Default for EngineConfig {
    fn default() -> EngineConfig {
        EngineConfig {
            strategy: StrategyKind::Slu,
            scheduler: Scheduler::Fixed,
            no_learner: false,
            reasoner: ReasonerOptions::default(),
            expand_rounds: 3,
            mode: Mode::Accumulate,
            tentative_clear_period: 10,
            svm: SvmConfig::default(),
            seed: 0,
            timeout: Duration::from_secs(360),
            smt_timeout_ms: 10_000,
            batch: 1,
            single_update: false,
        }
    }
}

pub type Interpretation = HashMap<Arc<Predicate>, Expr>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessKind {
    SampleSample,
    SampleZone,
    ZoneZone,
    TrivialClause,
}

impl WitnessKind {
    pub fn name(&self) -> &'static str {
        match self {
            WitnessKind::SampleSample => "sample-sample",
            WitnessKind::SampleZone => "sample-zone",
            WitnessKind::ZoneZone => "zone-zone",
            WitnessKind::TrivialClause => "trivial-clause",
        }
    }
}

/// One resolution step: this clause fires under this assignment.
#[derive(Debug, Clone)]
pub struct Step {
    pub clause: Clause,
    pub assign: Assignment,
}

/// A ground refutation: the derivation runs every step in order, deriving
/// each head point from already-derived body points, and ends at a ⊥ head.
#[derive(Debug, Clone)]
pub struct UnsatWitness {
    pub kind: WitnessKind,
    pub pred: Option<Arc<Predicate>>,
    pub point: Vec<Value>,
    pub derivation: Vec<Step>,
}

#[derive(Debug, Clone)]
pub enum Verdict {
    Sat(Interpretation),
    Unsat(UnsatWitness),
    Unknown(String),
}

#[derive(Debug, Clone, Default)]
pub struct Stats {
    pub iterations: usize,
    pub counterexamples: usize,
    pub epochs: usize,
    pub expansion_rounds: usize,
    pub strategy_used: String,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub verdict: Verdict,
    pub stats: Stats,
}

/// Assemble one predicate's hypothesis from its zones and partition.
pub fn make_hypothesis(kind: StrategyKind, safe: &Expr, doomed: &Expr, part: &Expr) -> Expr {
    let f = match kind {
        StrategyKind::S => safe.clone(),
        StrategyKind::L => part.clone(),
        StrategyKind::Lu => Expr::and(vec![part.clone(), Expr::not(doomed.clone())]),
        StrategyKind::Sl => Expr::or(vec![safe.clone(), part.clone()]),
        StrategyKind::Slu => Expr::or(vec![
            safe.clone(),
            Expr::and(vec![part.clone(), Expr::not(doomed.clone())]),
        ]),
    };
    f.fold()
}

#[derive(Debug, Clone)]
pub enum CheckOutcome {
    Ok,
    Failing(usize, Assignment),
    Undecided(usize, String),
}

/// Check every clause's verification condition under `interp`; the first
/// satisfiable negation comes back as a counterexample assignment over that
/// clause's variables.
pub fn check_hypothesis(sys: &ChcSystem, interp: &Interpretation, smt: &Smt) -> CheckOutcome {
    for ci in 0..sys.clauses.len() {
        match check_clause(sys, ci, interp, &[], smt) {
            ClauseOutcome::Pass => {}
            ClauseOutcome::Fail(a) => return CheckOutcome::Failing(ci, a),
            ClauseOutcome::Undecided(r) => return CheckOutcome::Undecided(ci, r),
        }
    }
    CheckOutcome::Ok
}

enum ClauseOutcome {
    Pass,
    Fail(Assignment),
    Undecided(String),
}

fn check_clause(
    sys: &ChcSystem,
    ci: usize,
    interp: &Interpretation,
    blocked: &[Expr],
    smt: &Smt,
) -> ClauseOutcome {
    let clause = &sys.clauses[ci];
    let mut vc = vec![sys.clause_vc(clause, interp)];
    vc.extend_from_slice(blocked);
    match smt.check(&Expr::and(vc), &clause.vars) {
        SmtResult::Unsat => ClauseOutcome::Pass,
        SmtResult::Sat(m) => ClauseOutcome::Fail(m),
        SmtResult::Unknown(r) => ClauseOutcome::Undecided(r),
    }
}

pub fn solve(norm: &Normalized, cfg: &EngineConfig) -> SolveResult {
    let started = Instant::now();
    let mut stats = Stats {
        strategy_used: cfg.strategy.name().to_string(),
        ..Stats::default()
    };
    let verdict = Engine::new(norm, cfg, started, &mut stats).run();
    stats.wall_time = started.elapsed();
    SolveResult { verdict, stats }
}

struct Engine<'a> {
    norm: &'a Normalized,
    cfg: &'a EngineConfig,
    started: Instant,
    stats: &'a mut Stats,
    smt: Smt,
    reasoner: Reasoner,
    dataset: Dataset,
    partitions: HashMap<Arc<Predicate>, Expr>,
    kind: StrategyKind,
    stall: usize,
    prev_firm: usize,
    unseparable_failures: usize,
    mod_ks: BTreeSet<u64>,
}

/// Shorthand for the early returns threaded through the loop.
enum Flow {
    Done(Verdict),
    Continue,
}

macro_rules! done {
    ($e:expr) => {
        if let Flow::Done(v) = $e {
            return v;
        }
    };
}

impl<'a> Engine<'a> {
    fn new(
        norm: &'a Normalized,
        cfg: &'a EngineConfig,
        started: Instant,
        stats: &'a mut Stats,
    ) -> Engine<'a> {
        let smt = Smt::new(&SmtOptions {
            timeout_ms: cfg.smt_timeout_ms,
            seed: cfg.seed,
        });
        let reasoner = Reasoner::new(&norm.system, cfg.reasoner.clone());
        let dataset = Dataset::new(cfg.mode, cfg.tentative_clear_period);
        let partitions = norm
            .system
            .predicates
            .iter()
            .map(|p| (p.clone(), Expr::tt()))
            .collect();
        let mod_ks = find_mod_patterns(&norm.system);
        Engine {
            norm,
            cfg,
            started,
            stats,
            smt,
            reasoner,
            dataset,
            partitions,
            kind: cfg.strategy,
            stall: 0,
            prev_firm: 0,
            unseparable_failures: 0,
            mod_ks,
        }
    }

    fn out_of_time(&self) -> bool {
        self.started.elapsed() >= self.cfg.timeout
    }

    fn budget(&self) -> Flow {
        if self.out_of_time() {
            Flow::Done(Verdict::Unknown("timeout".to_string()))
        } else {
            Flow::Continue
        }
    }

    fn run(&mut self) -> Verdict {
        let sys = &self.norm.system;
        for t in &self.norm.trivial {
            done!(self.budget());
            match self.smt.check(&t.constraint, &t.vars) {
                SmtResult::Unsat => {}
                SmtResult::Sat(m) => {
                    let w = UnsatWitness {
                        kind: WitnessKind::TrivialClause,
                        pred: None,
                        point: Vec::new(),
                        derivation: vec![Step {
                            clause: t.clone(),
                            assign: m,
                        }],
                    };
                    return self.finish_unsat(w);
                }
                SmtResult::Unknown(r) => {
                    return Verdict::Unknown(format!("trivial clause undecided: {r}"))
                }
            }
        }
        if sys.clauses.iter().all(|c| c.kind() != ClauseKind::Query) {
            // nothing can reach ⊥; everything-true is a solution
            let interp = sys
                .predicates
                .iter()
                .map(|p| (p.clone(), Expr::tt()))
                .collect();
            return Verdict::Sat(self.compose(interp));
        }

        self.reasoner.seed(sys, &self.smt);
        done!(self.conflict_scan());
        for _ in 0..self.cfg.expand_rounds {
            done!(self.budget());
            let forward = self.reasoner.forward_round(sys, &self.smt);
            let backward = self.reasoner.backward_round(sys, &self.smt);
            self.stats.expansion_rounds += 1;
            done!(self.conflict_scan());
            if !forward && !backward {
                break;
            }
        }

        if self.cfg.no_learner {
            return self.reasoner_only();
        }
        loop {
            done!(self.budget());
            self.stats.epochs += 1;
            done!(self.epoch_sampling());
            match self.dataset.check_conflicts(&self.reasoner, &self.smt) {
                Some(c) => return self.finish_conflict(c),
                None => {}
            }
            let mut blocked: HashMap<usize, Vec<Expr>> = HashMap::new();
            let mut harvested = false;
            for ci in 0..sys.clauses.len() {
                loop {
                    done!(self.budget());
                    let interp = self.hypothesis();
                    let outcome = check_clause(
                        sys,
                        ci,
                        &interp,
                        blocked.get(&ci).map_or(&[], |v| v.as_slice()),
                        &self.smt,
                    );
                    match outcome {
                        ClauseOutcome::Pass => break,
                        ClauseOutcome::Undecided(r) => match self.rotate_for_undecided(&r) {
                            Flow::Done(v) => return v,
                            Flow::Continue => continue,
                        },
                        ClauseOutcome::Fail(first) => {
                            harvested = true;
                            match self.absorb_batch(ci, first, &interp, &mut blocked) {
                                Flow::Done(v) => return v,
                                Flow::Continue => {}
                            }
                            match self.learn() {
                                Flow::Done(v) => return v,
                                Flow::Continue => {}
                            }
                            if self.cfg.single_update {
                                break;
                            }
                        }
                    }
                }
            }
            if !harvested {
                // the pass above checked every clause against one fixed
                // hypothesis and found nothing to refute
                return Verdict::Sat(self.compose(self.hypothesis()));
            }
        }
    }

    /// Zone overlap check; a hit is refutation-complete on its own.
    fn conflict_scan(&mut self) -> Flow {
        if let Some((pred, point)) = self.reasoner.zone_conflict(&self.norm.system, &self.smt) {
            let w = self.zone_zone_witness(&pred, &point);
            return Flow::Done(self.finish_witness(w));
        }
        Flow::Continue
    }

    fn reasoner_only(&mut self) -> Verdict {
        let interp: Interpretation = self
            .norm
            .system
            .predicates
            .iter()
            .map(|p| (p.clone(), self.reasoner.safe_formula(p)))
            .collect();
        match check_hypothesis(&self.norm.system, &interp, &self.smt) {
            CheckOutcome::Ok => Verdict::Sat(self.compose(interp)),
            CheckOutcome::Failing(ci, _) => Verdict::Unknown(format!(
                "learner disabled and safe zones do not close clause {ci}"
            )),
            CheckOutcome::Undecided(ci, r) => {
                Verdict::Unknown(format!("clause {ci} undecided: {r}"))
            }
        }
    }

    /// Draw one fresh firm sample per non-⊥ zone.
    fn epoch_sampling(&mut self) -> Flow {
        let preds: Vec<Arc<Predicate>> = self.norm.system.predicates.clone();
        for p in &preds {
            if self.out_of_time() {
                return self.budget();
            }
            let safe = self.reasoner.safe_formula(p);
            if !safe.is_false() {
                self.dataset.sample_from_zone(p, &safe, true, &self.smt);
            }
            let doomed = self.reasoner.unsafe_formula(p);
            if !doomed.is_false() {
                self.dataset.sample_from_zone(p, &doomed, false, &self.smt);
            }
        }
        Flow::Continue
    }

    fn hypothesis(&self) -> Interpretation {
        self.norm
            .system
            .predicates
            .iter()
            .map(|p| {
                let safe = self.reasoner.safe_formula(p);
                let doomed = self.reasoner.unsafe_formula(p);
                let part = &self.partitions[p];
                (p.clone(), make_hypothesis(self.kind, &safe, &doomed, part))
            })
            .collect()
    }

    /// Full output interpretation: solved predicates plus the ones fixed
    /// during normalization.
    fn compose(&self, mut interp: Interpretation) -> Interpretation {
        for (p, f) in &self.norm.fixed {
            interp.insert(p.clone(), f.clone());
        }
        interp
    }

    /// Harvest up to `batch` distinct counterexamples from one failing
    /// clause, blocking each exact assignment for the rest of the epoch.
    fn absorb_batch(
        &mut self,
        ci: usize,
        first: Assignment,
        interp: &Interpretation,
        blocked: &mut HashMap<usize, Vec<Expr>>,
    ) -> Flow {
        let sys = &self.norm.system;
        let mut cex = Some(first);
        for round in 0..self.cfg.batch.max(1) {
            let assign = match cex.take() {
                Some(a) => a,
                None => break,
            };
            self.stats.counterexamples += 1;
            blocked
                .entry(ci)
                .or_default()
                .push(block_assignment(&sys.clauses[ci], &assign));
            if let Err(reason) = self.convert(ci, assign) {
                return Flow::Done(Verdict::Unknown(reason));
            }
            if let Some(c) = self.dataset.resolve_implications() {
                return Flow::Done(self.finish_conflict(c));
            }
            if let Some(c) = self.dataset.check_conflicts(&self.reasoner, &self.smt) {
                return Flow::Done(self.finish_conflict(c));
            }
            if round + 1 < self.cfg.batch {
                if self.out_of_time() {
                    return self.budget();
                }
                match check_clause(
                    sys,
                    ci,
                    interp,
                    blocked.get(&ci).map_or(&[], |v| v.as_slice()),
                    &self.smt,
                ) {
                    ClauseOutcome::Fail(a) => cex = Some(a),
                    _ => break,
                }
            }
        }
        Flow::Continue
    }

    /// Turn a counterexample into samples per the clause's shape.
    fn convert(&mut self, ci: usize, assign: Assignment) -> Result<(), String> {
        let clause = &self.norm.system.clauses[ci];
        let point_of = |app: &PredApp| -> Result<DataPoint, String> {
            let values = app
                .args
                .iter()
                .map(|a| eval(a, &assign))
                .collect::<Result<Vec<Value>, _>>()
                .map_err(|e| format!("counterexample evaluation failed: {e}"))?;
            Ok(DataPoint {
                pred: app.pred.clone(),
                values,
            })
        };
        match (&clause.head, clause.body_apps.len()) {
            (ClauseHead::Pred(h), 0) => {
                let p = point_of(h)?;
                self.dataset.add_positive(
                    &p.pred,
                    p.values,
                    PosJust::FactCex {
                        clause: ci,
                        assign,
                    },
                );
            }
            (ClauseHead::False, 1) => {
                let p = point_of(&clause.body_apps[0])?;
                self.dataset.add_negative(
                    &p.pred,
                    p.values,
                    NegJust::QueryCex {
                        clause: ci,
                        assign,
                    },
                );
            }
            (head, _) => {
                let body = clause
                    .body_apps
                    .iter()
                    .map(point_of)
                    .collect::<Result<Vec<_>, _>>()?;
                let head_point = match head {
                    ClauseHead::Pred(h) => Some(point_of(h)?),
                    ClauseHead::False => None,
                };
                self.dataset.add_implication(Implication {
                    clause: ci,
                    assign,
                    body,
                    head: head_point,
                });
            }
        }
        Ok(())
    }

    /// One learner iteration: refresh every predicate's partition from the
    /// current samples, then advance the stall/rotation bookkeeping.
    fn learn(&mut self) -> Flow {
        self.dataset.tick_learner_iteration();
        self.stats.iterations += 1;
        let preds: Vec<Arc<Predicate>> = self.norm.system.predicates.clone();
        for p in &preds {
            let rows = self.dataset.labeled(p);
            match induce_partition(p, &rows, &self.mod_ks, &self.cfg.svm) {
                Ok(f) => {
                    self.partitions.insert(p.clone(), f);
                }
                Err(LearnError::Degenerate(point)) => {
                    return Flow::Done(Verdict::Unknown(format!(
                        "internal: degenerate training data at {point:?}"
                    )));
                }
                Err(LearnError::Unseparable(a, b)) => {
                    self.unseparable_failures += 1;
                    if self.unseparable_failures > 3 {
                        return Flow::Done(Verdict::Unknown(
                            "unseparable training data".to_string(),
                        ));
                    }
                    // a tentative guess collides with a firm point; drop it
                    // and relearn next round
                    self.dataset.drop_tentative(p, &a);
                    self.dataset.drop_tentative(p, &b);
                }
            }
        }
        let firm = self.dataset.firm_count();
        if firm == self.prev_firm {
            self.stall += 1;
        } else {
            self.stall = 0;
            self.prev_firm = firm;
        }
        if let Scheduler::RotateOnStall(k) = self.cfg.scheduler {
            if self.stall >= k {
                self.kind = self.kind.next();
                self.stats.strategy_used = self.kind.name().to_string();
                self.stall = 0;
            }
        }
        Flow::Continue
    }

    /// A backend Unknown during a clause check: rotate to a simpler
    /// hypothesis when a scheduler is on, otherwise give up.
    fn rotate_for_undecided(&mut self, reason: &str) -> Flow {
        if let Scheduler::RotateOnStall(_) = self.cfg.scheduler {
            if self.kind != StrategyKind::S {
                self.kind = self.kind.next();
                self.stats.strategy_used = self.kind.name().to_string();
                return Flow::Continue;
            }
        }
        Flow::Done(Verdict::Unknown(format!("hypothesis undecided: {reason}")))
    }

    fn finish_conflict(&mut self, c: SampleConflict) -> Verdict {
        let witness = match c {
            SampleConflict::SampleSample { pred, point } => self
                .pos_chain(&pred, &point)
                .and_then(|mut steps| {
                    steps.extend(self.neg_chain(&pred, &point)?);
                    Ok(steps)
                })
                .map(|derivation| UnsatWitness {
                    kind: WitnessKind::SampleSample,
                    pred: Some(pred),
                    point,
                    derivation,
                }),
            SampleConflict::PositiveInUnsafe { pred, point } => self
                .pos_chain(&pred, &point)
                .and_then(|mut steps| {
                    steps.extend(self.zone_neg_chain(&pred, &point, None, 0)?);
                    Ok(steps)
                })
                .map(|derivation| UnsatWitness {
                    kind: WitnessKind::SampleZone,
                    pred: Some(pred),
                    point,
                    derivation,
                }),
            SampleConflict::NegativeInSafe { pred, point } => self
                .zone_pos_chain(&pred, &point, None, 0)
                .and_then(|mut steps| {
                    steps.extend(self.neg_chain(&pred, &point)?);
                    Ok(steps)
                })
                .map(|derivation| UnsatWitness {
                    kind: WitnessKind::SampleZone,
                    pred: Some(pred),
                    point,
                    derivation,
                }),
            SampleConflict::ImplicationFalse(imp) => {
                let mut steps = Ok(Vec::new());
                for b in &imp.body {
                    steps = steps.and_then(|mut s: Vec<Step>| {
                        s.extend(self.pos_chain(&b.pred, &b.values)?);
                        Ok(s)
                    });
                }
                steps.map(|mut derivation| {
                    derivation.push(Step {
                        clause: self.norm.system.clauses[imp.clause].clone(),
                        assign: imp.assign.clone(),
                    });
                    UnsatWitness {
                        kind: WitnessKind::SampleSample,
                        pred: imp.body.first().map(|b| b.pred.clone()),
                        point: imp.body.first().map(|b| b.values.clone()).unwrap_or_default(),
                        derivation,
                    }
                })
            }
        };
        match witness {
            Ok(w) => self.finish_unsat(w),
            Err(e) => Verdict::Unknown(format!("witness reconstruction failed: {e}")),
        }
    }

    fn zone_zone_witness(&self, pred: &Arc<Predicate>, point: &[Value]) -> Result<UnsatWitness, String> {
        let mut steps = self.zone_pos_chain(pred, point, None, 0)?;
        steps.extend(self.zone_neg_chain(pred, point, None, 0)?);
        Ok(UnsatWitness {
            kind: WitnessKind::ZoneZone,
            pred: Some(pred.clone()),
            point: point.to_vec(),
            derivation: steps,
        })
    }

    fn finish_witness(&mut self, w: Result<UnsatWitness, String>) -> Verdict {
        match w {
            Ok(w) => self.finish_unsat(w),
            Err(e) => Verdict::Unknown(format!("witness reconstruction failed: {e}")),
        }
    }

    fn finish_unsat(&mut self, w: UnsatWitness) -> Verdict {
        if replay_witness(&w) {
            Verdict::Unsat(w)
        } else {
            Verdict::Unknown("internal: unsat witness failed to replay".to_string())
        }
    }

    /// Derivation of a firm positive from its recorded justification.
    fn pos_chain(&self, pred: &Arc<Predicate>, point: &[Value]) -> Result<Vec<Step>, String> {
        self.pos_chain_at(pred, point, 0)
    }

    fn pos_chain_at(
        &self,
        pred: &Arc<Predicate>,
        point: &[Value],
        depth: usize,
    ) -> Result<Vec<Step>, String> {
        if depth > 10_000 {
            return Err("derivation too deep".to_string());
        }
        let sys = &self.norm.system;
        match self.dataset.pos_just(pred, point) {
            Some(PosJust::FactCex { clause, assign }) => Ok(vec![Step {
                clause: sys.clauses[*clause].clone(),
                assign: assign.clone(),
            }]),
            Some(PosJust::RuleCex {
                clause,
                assign,
                body,
            }) => {
                let mut steps = Vec::new();
                for b in body {
                    steps.extend(self.pos_chain_at(&b.pred, &b.values, depth + 1)?);
                }
                steps.push(Step {
                    clause: sys.clauses[*clause].clone(),
                    assign: assign.clone(),
                });
                Ok(steps)
            }
            Some(PosJust::SafeZone) | None => self.zone_pos_chain(pred, point, None, depth),
        }
    }

    fn neg_chain(&self, pred: &Arc<Predicate>, point: &[Value]) -> Result<Vec<Step>, String> {
        self.neg_chain_at(pred, point, 0)
    }

    fn neg_chain_at(
        &self,
        pred: &Arc<Predicate>,
        point: &[Value],
        depth: usize,
    ) -> Result<Vec<Step>, String> {
        if depth > 10_000 {
            return Err("derivation too deep".to_string());
        }
        let sys = &self.norm.system;
        match self.dataset.neg_just(pred, point) {
            Some(NegJust::QueryCex { clause, assign }) => Ok(vec![Step {
                clause: sys.clauses[*clause].clone(),
                assign: assign.clone(),
            }]),
            Some(NegJust::RuleCex {
                clause,
                assign,
                head,
            }) => {
                let mut steps = vec![Step {
                    clause: sys.clauses[*clause].clone(),
                    assign: assign.clone(),
                }];
                steps.extend(self.neg_chain_at(&head.pred, &head.values, depth + 1)?);
                Ok(steps)
            }
            Some(NegJust::UnsafeZone) | None => self.zone_neg_chain(pred, point, None, depth),
        }
    }

    /// Rebuild the derivation of a safe-zone member by walking disjunct
    /// provenance. `limit` restricts the search to the disjuncts that
    /// existed when the consuming disjunct was created, which keeps the
    /// recursion well-founded.
    fn zone_pos_chain(
        &self,
        pred: &Arc<Predicate>,
        point: &[Value],
        limit: Option<usize>,
        depth: usize,
    ) -> Result<Vec<Step>, String> {
        if depth > 10_000 {
            return Err("derivation too deep".to_string());
        }
        let sys = &self.norm.system;
        let idx = self
            .reasoner
            .find_safe_disjunct(&self.smt, pred, point, limit)
            .ok_or_else(|| format!("{} point not found in safe zone", pred.name))?;
        let disjunct = &self.reasoner.safe[pred].disjuncts[idx];
        match &disjunct.origin {
            Origin::Fact { clause } => {
                let c = &sys.clauses[*clause];
                let head = head_app(c)?;
                let pinned = Expr::and(vec![c.constraint.clone(), args_eq(head, point)]);
                let assign = self.model_of(&pinned, c)?;
                Ok(vec![Step {
                    clause: c.clone(),
                    assign,
                }])
            }
            Origin::Forward { clause, body_lens } => {
                let c = &sys.clauses[*clause];
                let head = head_app(c)?;
                let mut parts = vec![c.constraint.clone(), args_eq(head, point)];
                for (app, len) in c.body_apps.iter().zip(body_lens) {
                    let zone = zone_prefix(&self.reasoner.safe[&app.pred], *len);
                    parts.push(app.instantiate(&zone));
                }
                let assign = self.model_of(&Expr::and(parts), c)?;
                let mut steps = Vec::new();
                for (app, len) in c.body_apps.iter().zip(body_lens) {
                    let bp = eval_args(app, &assign)?;
                    steps.extend(self.zone_pos_chain(&app.pred, &bp, Some(*len), depth + 1)?);
                }
                steps.push(Step {
                    clause: c.clone(),
                    assign,
                });
                Ok(steps)
            }
            other => Err(format!("safe disjunct carries {other:?}")),
        }
    }

    fn zone_neg_chain(
        &self,
        pred: &Arc<Predicate>,
        point: &[Value],
        limit: Option<usize>,
        depth: usize,
    ) -> Result<Vec<Step>, String> {
        if depth > 10_000 {
            return Err("derivation too deep".to_string());
        }
        let sys = &self.norm.system;
        let idx = self
            .reasoner
            .find_unsafe_disjunct(&self.smt, pred, point, limit)
            .ok_or_else(|| format!("{} point not found in unsafe zone", pred.name))?;
        let disjunct = &self.reasoner.doomed[pred].disjuncts[idx];
        match &disjunct.origin {
            Origin::Query { clause } => {
                let c = &sys.clauses[*clause];
                let pinned = Expr::and(vec![
                    c.constraint.clone(),
                    args_eq(&c.body_apps[0], point),
                ]);
                let assign = self.model_of(&pinned, c)?;
                Ok(vec![Step {
                    clause: c.clone(),
                    assign,
                }])
            }
            Origin::Backward { clause, head_len } => {
                let c = &sys.clauses[*clause];
                let head = head_app(c)?;
                let zone = zone_prefix(&self.reasoner.doomed[&head.pred], *head_len);
                let parts = vec![
                    c.constraint.clone(),
                    args_eq(&c.body_apps[0], point),
                    head.instantiate(&zone),
                ];
                let assign = self.model_of(&Expr::and(parts), c)?;
                let hp = eval_args(head, &assign)?;
                let mut steps = vec![Step {
                    clause: c.clone(),
                    assign,
                }];
                steps.extend(self.zone_neg_chain(&head.pred, &hp, Some(*head_len), depth + 1)?);
                Ok(steps)
            }
            other => Err(format!("unsafe disjunct carries {other:?}")),
        }
    }

    fn model_of(&self, f: &Expr, clause: &Clause) -> Result<Assignment, String> {
        match self.smt.check(f, &clause.vars) {
            SmtResult::Sat(m) => Ok(m),
            other => Err(format!("no model for derivation step: {other:?}")),
        }
    }
}

fn head_app(c: &Clause) -> Result<&PredApp, String> {
    match &c.head {
        ClauseHead::Pred(app) => Ok(app),
        ClauseHead::False => Err("expected a predicate head".to_string()),
    }
}

fn args_eq(app: &PredApp, point: &[Value]) -> Expr {
    let eqs: Vec<Expr> = app
        .args
        .iter()
        .zip(point)
        .map(|(a, v)| Expr::eq(a.clone(), v.to_expr()))
        .collect();
    Expr::and(eqs)
}

fn eval_args(app: &PredApp, assign: &Assignment) -> Result<Vec<Value>, String> {
    app.args
        .iter()
        .map(|a| eval(a, assign).map_err(|e| format!("step evaluation failed: {e}")))
        .collect()
}

fn zone_prefix(zone: &crate::reasoner::Zone, len: usize) -> Expr {
    let n = len.min(zone.disjuncts.len());
    Expr::or(zone.disjuncts[..n].iter().map(|d| d.formula.clone()).collect())
}

fn block_assignment(clause: &Clause, assign: &Assignment) -> Expr {
    let eqs: Vec<Expr> = clause
        .vars
        .iter()
        .filter_map(|v| assign.get(v).map(|val| Expr::eq(Expr::var(v.clone()), val.to_expr())))
        .collect();
    Expr::not(Expr::and(eqs))
}

/// Replay a witness from scratch with the ground evaluator: every step's
/// constraint must hold, every body point must already be derived, and the
/// final step must land on ⊥.
pub fn replay_witness(w: &UnsatWitness) -> bool {
    let mut derived: HashSet<(Arc<str>, Vec<Value>)> = HashSet::new();
    for (i, step) in w.derivation.iter().enumerate() {
        let env = &step.assign;
        if !matches!(eval(&step.clause.constraint, env), Ok(Value::Bool(true))) {
            return false;
        }
        let mut points = Vec::new();
        for app in &step.clause.body_apps {
            match eval_args(app, env) {
                Ok(p) => points.push((app.pred.name.clone(), p)),
                Err(_) => return false,
            }
        }
        if !points.iter().all(|p| derived.contains(p)) {
            return false;
        }
        match &step.clause.head {
            ClauseHead::Pred(app) => match eval_args(app, env) {
                Ok(p) => {
                    derived.insert((app.pred.name.clone(), p));
                }
                Err(_) => return false,
            },
            ClauseHead::False => {
                return i == w.derivation.len() - 1;
            }
        }
    }
    false
}
