//! Solver state: clause database, two-watched-literal propagation, first-UIP
//! analysis, backjumping and VSIDS selection.
//!
//! Every assignment is logged as a [`TrailEvent`]. Implied literals (unit
//! clauses at level 0 and everything found by propagation) are `A` events;
//! the asserting literal enqueued right after a backjump is carried by the
//! `BT` event itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::trail::TrailEvent;
use super::vsids::Vsids;
use super::SolverConfig;
use crate::cnf::{Assignment, Formula, Lit};
use crate::keytrace::KeyTrace;
use crate::scalar::Activity;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClauseRef(u32);

impl ClauseRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug)]
struct StoredClause<A> {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: A,
}

#[derive(Clone, Copy, Debug)]
struct Watcher {
    clause: ClauseRef,
    blocker: Lit,
}

/// Result of first-UIP conflict analysis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    /// Learned clause; `learned[0]` is the asserting literal and, when the
    /// clause has more than one literal, `learned[1]` sits at `backjump_level`.
    pub learned: Vec<Lit>,
    pub backjump_level: u32,
    pub asserting: Lit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Counts {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learned_clauses: u64,
}

#[derive(Clone, Debug)]
pub struct Solver<A: Activity = f64> {
    config: SolverConfig,
    num_vars: usize,
    clauses: Vec<StoredClause<A>>,
    learnts: Vec<ClauseRef>,
    /// Indexed by literal code: clauses watching that literal.
    watches: Vec<Vec<Watcher>>,
    values: Vec<Option<bool>>,
    levels: Vec<u32>,
    reasons: Vec<Option<ClauseRef>>,
    polarity: Vec<bool>,
    assigned: Vec<Lit>,
    level_starts: Vec<usize>,
    qhead: usize,
    vsids: Vsids<A>,
    clause_inc: A,
    clause_decay: A,
    seen: Vec<bool>,
    to_clear: Vec<Lit>,
    stack: Vec<Lit>,
    learned_buf: Vec<Lit>,
    events: Vec<TrailEvent>,
    keytrace: Option<KeyTrace>,
    inconsistent: bool,
    max_learnts: f64,
    rng: ChaCha8Rng,
    pub(crate) counts: Counts,
}

impl<A: Activity> Solver<A> {
    pub fn new(formula: &Formula, config: SolverConfig) -> Solver<A> {
        Solver::with_keytrace(formula, config, false)
    }

    /// When `track_keytrace` is set, the solver maintains the KeyTrace of its
    /// own trail incrementally (see [`Solver::keytrace`]).
    pub fn with_keytrace(formula: &Formula, config: SolverConfig, track_keytrace: bool) -> Solver<A> {
        let n = formula.num_vars() as usize;
        let mut solver = Solver {
            num_vars: n,
            clauses: Vec::with_capacity(formula.num_clauses()),
            learnts: Vec::new(),
            watches: vec![Vec::new(); 2 * n],
            values: vec![None; n],
            levels: vec![0; n],
            reasons: vec![None; n],
            polarity: vec![false; n],
            assigned: Vec::with_capacity(n),
            level_starts: Vec::new(),
            qhead: 0,
            vsids: Vsids::new(n, config.var_decay),
            clause_inc: A::one(),
            clause_decay: A::from_f64(config.clause_decay),
            seen: vec![false; n],
            to_clear: Vec::new(),
            stack: Vec::new(),
            learned_buf: Vec::new(),
            events: Vec::new(),
            keytrace: track_keytrace.then(KeyTrace::new),
            inconsistent: false,
            max_learnts: (formula.num_clauses() as f64 / 3.0).max(1.0),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            counts: Counts::default(),
            config,
        };

        let mut units = Vec::new();
        for clause in formula.clauses() {
            match clause.lits() {
                [] => solver.inconsistent = true,
                [unit] => units.push(*unit),
                lits => {
                    solver.add_clause(lits.to_vec(), false);
                }
            }
        }
        for unit in units {
            match solver.value(unit) {
                Some(true) => {}
                Some(false) => solver.inconsistent = true,
                None => {
                    solver.enqueue(unit, None);
                    solver.record(TrailEvent::Implied { lit: unit, level: 0 });
                    solver.counts.propagations += 1;
                }
            }
        }
        solver
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars as u32
    }

    /// True if the input already contains a contradiction (empty clause or
    /// complementary unit clauses).
    pub fn is_inconsistent(&self) -> bool {
        self.inconsistent
    }

    pub fn decision_level(&self) -> u32 {
        self.level_starts.len() as u32
    }

    #[inline]
    pub fn value(&self, lit: Lit) -> Option<bool> {
        self.values[lit.index()].map(|v| v == lit.is_positive())
    }

    pub fn var_level(&self, var: u32) -> Option<u32> {
        let i = var as usize - 1;
        self.values[i].map(|_| self.levels[i])
    }

    pub fn num_assigned(&self) -> usize {
        self.assigned.len()
    }

    pub fn all_assigned(&self) -> bool {
        self.assigned.len() == self.num_vars
    }

    /// In range and unassigned.
    pub fn is_legal(&self, lit: Lit) -> bool {
        lit.var() as usize <= self.num_vars && self.values[lit.index()].is_none()
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::from_values(self.values.clone())
    }

    /// Assigned literals in assignment order.
    pub fn assigned_lits(&self) -> &[Lit] {
        &self.assigned
    }

    pub fn events(&self) -> &[TrailEvent] {
        &self.events
    }

    pub(crate) fn take_events(&mut self) -> Vec<TrailEvent> {
        std::mem::take(&mut self.events)
    }

    /// The KeyTrace of the trail so far, if tracking was requested.
    pub fn keytrace(&self) -> Option<&KeyTrace> {
        self.keytrace.as_ref()
    }

    pub fn clause_lits(&self, clause: ClauseRef) -> &[Lit] {
        &self.clauses[clause.index()].lits
    }

    pub fn activity(&self, var: u32) -> A {
        self.vsids.activity(var as usize - 1)
    }

    pub fn bump_var(&mut self, var: u32) {
        self.vsids.bump(var as usize - 1);
    }

    /// Learned clauses currently in the database.
    pub fn learned_clauses(&self) -> impl Iterator<Item = &[Lit]> + '_ {
        self.learnts.iter().map(|c| self.clauses[c.index()].lits.as_slice())
    }

    fn record(&mut self, event: TrailEvent) {
        if let Some(k) = self.keytrace.as_mut() {
            k.apply(&event);
        }
        self.events.push(event);
    }

    fn add_clause(&mut self, lits: Vec<Lit>, learnt: bool) -> ClauseRef {
        debug_assert!(lits.len() >= 2);
        let cref = ClauseRef(self.clauses.len() as u32);
        self.watches[lits[0].code()].push(Watcher { clause: cref, blocker: lits[1] });
        self.watches[lits[1].code()].push(Watcher { clause: cref, blocker: lits[0] });
        self.clauses.push(StoredClause { lits, learnt, deleted: false, activity: A::zero() });
        if learnt {
            self.learnts.push(cref);
        }
        cref
    }

    fn enqueue(&mut self, lit: Lit, reason: Option<ClauseRef>) {
        let v = lit.index();
        debug_assert!(self.values[v].is_none());
        self.values[v] = Some(lit.is_positive());
        self.levels[v] = self.decision_level();
        self.reasons[v] = reason;
        self.assigned.push(lit);
    }

    /// Opens a new decision level and assigns `lit` there.
    pub fn decide(&mut self, lit: Lit) {
        assert!(self.is_legal(lit), "decision {lit} is not legal");
        self.level_starts.push(self.assigned.len());
        self.enqueue(lit, None);
        self.counts.decisions += 1;
        let level = self.decision_level();
        self.record(TrailEvent::Decision { lit, level });
    }

    /// Unit propagation to fixpoint. Returns the falsified clause on conflict.
    pub fn propagate(&mut self) -> Option<ClauseRef> {
        let mut conflict = None;
        while self.qhead < self.assigned.len() {
            let false_lit = !self.assigned[self.qhead];
            self.qhead += 1;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut i = 0;
            let mut j = 0;
            'watchers: while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == Some(true) {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let cref = w.clause;
                let lits = &mut self.clauses[cref.index()].lits;
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let moved = Watcher { clause: cref, blocker: first };
                if first != w.blocker && self.values[first.index()] == Some(first.is_positive()) {
                    ws[j] = moved;
                    j += 1;
                    continue;
                }
                for k in 2..lits.len() {
                    let l = lits[k];
                    if self.values[l.index()] != Some(!l.is_positive()) {
                        lits.swap(1, k);
                        self.watches[l.code()].push(moved);
                        continue 'watchers;
                    }
                }
                ws[j] = moved;
                j += 1;
                if self.value(first) == Some(false) {
                    conflict = Some(cref);
                    self.qhead = self.assigned.len();
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(cref));
                    self.counts.propagations += 1;
                    let level = self.decision_level();
                    self.record(TrailEvent::Implied { lit: first, level });
                }
            }
            ws.truncate(j);
            self.watches[false_lit.code()] = ws;
        }
        conflict
    }

    fn abstract_level(&self, var: usize) -> u32 {
        1 << (self.levels[var] & 31)
    }

    /// First-UIP analysis of `conflict`, which must occur above level 0.
    /// Bumps the activities of all variables seen and of learned clauses used.
    pub fn analyze(&mut self, conflict: ClauseRef) -> Analysis {
        assert!(self.decision_level() > 0, "conflict at level 0 means UNSAT");
        self.counts.conflicts += 1;
        let current = self.decision_level();
        let mut learned = std::mem::take(&mut self.learned_buf);
        learned.clear();
        learned.push(Lit::from_var(1, true));
        let mut pending = 0usize;
        let mut index = self.assigned.len();
        let mut clause = conflict;
        let mut resolved: Option<Lit> = None;

        loop {
            if self.clauses[clause.index()].learnt {
                self.bump_clause(clause);
            }
            let start = usize::from(resolved.is_some());
            for k in start..self.clauses[clause.index()].lits.len() {
                let q = self.clauses[clause.index()].lits[k];
                let v = q.index();
                if !self.seen[v] && self.levels[v] > 0 {
                    self.vsids.bump(v);
                    self.seen[v] = true;
                    if self.levels[v] >= current {
                        pending += 1;
                    } else {
                        learned.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.assigned[index].index()] {
                    break;
                }
            }
            let p = self.assigned[index];
            self.seen[p.index()] = false;
            pending -= 1;
            resolved = Some(p);
            if pending == 0 {
                break;
            }
            clause = self.reasons[p.index()].expect("implied literal has a reason");
        }
        let asserting = !resolved.unwrap();
        learned[0] = asserting;

        // Recursive minimization: drop literals implied by the rest of the clause.
        self.to_clear.clear();
        self.to_clear.extend_from_slice(&learned);
        if self.config.minimize {
            let levels =
                learned[1..].iter().fold(0u32, |acc, l| acc | self.abstract_level(l.index()));
            let mut kept = 1;
            for i in 1..learned.len() {
                let l = learned[i];
                if self.reasons[l.index()].is_none() || !self.lit_redundant(l, levels) {
                    learned[kept] = l;
                    kept += 1;
                }
            }
            learned.truncate(kept);
        }

        let backjump_level = if learned.len() == 1 {
            0
        } else {
            let mut max_i = 1;
            for i in 2..learned.len() {
                if self.levels[learned[i].index()] > self.levels[learned[max_i].index()] {
                    max_i = i;
                }
            }
            learned.swap(1, max_i);
            self.levels[learned[1].index()]
        };

        for l in self.to_clear.drain(..) {
            self.seen[l.index()] = false;
        }
        let result = learned.clone();
        self.learned_buf = learned;
        Analysis { learned: result, backjump_level, asserting }
    }

    fn lit_redundant(&mut self, p: Lit, levels: u32) -> bool {
        self.stack.clear();
        self.stack.push(p);
        let top = self.to_clear.len();
        while let Some(q) = self.stack.pop() {
            let reason = self.reasons[q.index()].expect("only implied literals are expanded");
            for k in 1..self.clauses[reason.index()].lits.len() {
                let l = self.clauses[reason.index()].lits[k];
                let v = l.index();
                if self.seen[v] || self.levels[v] == 0 {
                    continue;
                }
                if self.reasons[v].is_some() && self.abstract_level(v) & levels != 0 {
                    self.seen[v] = true;
                    self.stack.push(l);
                    self.to_clear.push(l);
                } else {
                    for c in self.to_clear.drain(top..) {
                        self.seen[c.index()] = false;
                    }
                    return false;
                }
            }
        }
        true
    }

    fn cancel_until(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let start = self.level_starts[level as usize];
        for i in (start..self.assigned.len()).rev() {
            let lit = self.assigned[i];
            let v = lit.index();
            self.values[v] = None;
            self.reasons[v] = None;
            if self.config.phase_saving {
                self.polarity[v] = lit.is_positive();
            }
            self.vsids.insert(v);
        }
        self.assigned.truncate(start);
        self.qhead = start;
        self.level_starts.truncate(level as usize);
    }

    /// Undoes every level above `level` and logs `(BT, asserting, level)`.
    /// The caller enqueues `asserting` next via [`Solver::learn`].
    pub fn backjump(&mut self, level: u32, asserting: Lit) {
        assert!(level < self.decision_level(), "backjump must go down");
        self.cancel_until(level);
        self.record(TrailEvent::Backjump { lit: asserting, level });
    }

    /// Stores the learned clause (units go straight to level 0) and enqueues
    /// its asserting literal. Call right after [`Solver::backjump`].
    pub fn learn(&mut self, analysis: &Analysis) {
        self.counts.learned_clauses += 1;
        if analysis.learned.len() == 1 {
            self.enqueue(analysis.asserting, None);
        } else {
            let cref = self.add_clause(analysis.learned.clone(), true);
            self.bump_clause(cref);
            self.enqueue(analysis.asserting, Some(cref));
        }
    }

    /// Per-conflict activity decay.
    pub fn decay_activities(&mut self) {
        self.vsids.decay();
        self.clause_inc = self.clause_inc / self.clause_decay;
    }

    fn bump_clause(&mut self, cref: ClauseRef) {
        let c = &mut self.clauses[cref.index()];
        c.activity = c.activity + self.clause_inc;
        if c.activity > A::from_f64(1e20) {
            let factor = A::from_f64(1e-20);
            for &l in &self.learnts {
                let c = &mut self.clauses[l.index()];
                c.activity = c.activity * factor;
            }
            self.clause_inc = self.clause_inc * factor;
        }
    }

    /// Backtracks to level 0. Logged only if there was something to undo.
    pub fn restart(&mut self) {
        self.counts.restarts += 1;
        if self.decision_level() > 0 {
            self.cancel_until(0);
            self.record(TrailEvent::Restart);
        }
    }

    /// Highest-activity unassigned variable with its saved (or `false`) phase.
    pub fn vsids_pick(&mut self) -> Option<Lit> {
        if self.config.random_var_freq > 0.0 && self.rng.gen_bool(self.config.random_var_freq) {
            let unassigned: Vec<usize> =
                (0..self.num_vars).filter(|&v| self.values[v].is_none()).collect();
            if !unassigned.is_empty() {
                let v = unassigned[self.rng.gen_range(0..unassigned.len())];
                return Some(Lit::from_var(v as u32 + 1, self.polarity[v]));
            }
        }
        while let Some(v) = self.vsids.peek() {
            if self.values[v].is_none() {
                return Some(Lit::from_var(v as u32 + 1, self.polarity[v]));
            }
            self.vsids.pop();
        }
        None
    }

    fn locked(&self, cref: ClauseRef) -> bool {
        let first = self.clauses[cref.index()].lits[0];
        self.reasons[first.index()] == Some(cref) && self.value(first) == Some(true)
    }

    /// Learned clause database reduction; returns true if it ran.
    pub fn maybe_reduce_db(&mut self) -> bool {
        if (self.learnts.len() as f64) - (self.assigned.len() as f64) < self.max_learnts {
            return false;
        }
        self.reduce_db();
        self.max_learnts *= self.config.learned_db_growth;
        true
    }

    /// Drops the less active half of the learned clauses, keeping binary
    /// clauses and current reasons.
    pub fn reduce_db(&mut self) {
        if self.learnts.is_empty() {
            return;
        }
        let extra_lim = self.clause_inc / A::from_f64(self.learnts.len() as f64);
        let mut order = std::mem::take(&mut self.learnts);
        order.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a.index()], &self.clauses[b.index()]);
            let key = |c: &StoredClause<A>| c.lits.len() > 2;
            key(cb)
                .cmp(&key(ca))
                .then(ca.activity.partial_cmp(&cb.activity).unwrap())
                .then(a.cmp(&b))
        });
        let half = order.len() / 2;
        let mut kept = Vec::with_capacity(order.len());
        for (i, cref) in order.into_iter().enumerate() {
            let c = &self.clauses[cref.index()];
            if c.lits.len() > 2 && !self.locked(cref) && (i < half || c.activity < extra_lim) {
                self.remove_clause(cref);
            } else {
                kept.push(cref);
            }
        }
        kept.sort();
        self.learnts = kept;
    }

    fn remove_clause(&mut self, cref: ClauseRef) {
        let (a, b) = {
            let lits = &self.clauses[cref.index()].lits;
            (lits[0], lits[1])
        };
        self.watches[a.code()].retain(|w| w.clause != cref);
        self.watches[b.code()].retain(|w| w.clause != cref);
        let c = &mut self.clauses[cref.index()];
        c.deleted = true;
        c.lits = Vec::new();
    }

    /// Checks the two-watched-literal invariant: every live clause that is
    /// neither satisfied nor unit has both watched literals non-false, and
    /// each live clause is watched exactly by its first two literals.
    pub fn check_watches(&self) -> bool {
        for (i, c) in self.clauses.iter().enumerate() {
            if c.deleted {
                continue;
            }
            let cref = ClauseRef(i as u32);
            for w in 0..2 {
                let count =
                    self.watches[c.lits[w].code()].iter().filter(|x| x.clause == cref).count();
                if count != 1 {
                    return false;
                }
            }
            let satisfied = c.lits.iter().any(|&l| self.value(l) == Some(true));
            let open = c.lits.iter().filter(|&&l| self.value(l).is_none()).count();
            if !satisfied && open >= 2
                && (self.value(c.lits[0]) == Some(false) || self.value(c.lits[1]) == Some(false)) {
                    return false;
                }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdcl::trail::Tag;
    use crate::cnf::{brute_force_solve, Clause};
    use crate::keytrace::tests::golden_formula;
    use rand::{Rng, SeedableRng};

    fn lit(v: i32) -> Lit {
        Lit::new(v).unwrap()
    }

    fn solver(f: &Formula) -> Solver<f64> {
        Solver::new(f, SolverConfig::default())
    }

    #[test]
    fn unit_chain() {
        let f = Formula::from_ints(2, &[&[1], &[-1, 2]]);
        let mut s = solver(&f);
        assert_eq!(s.propagate(), None);
        let lits: Vec<i32> = s.assigned_lits().iter().map(|l| l.value()).collect();
        assert_eq!(lits, vec![1, 2]);
        assert_eq!(s.events().iter().filter(|e| e.tag() == Tag::A).count(), 2);
    }

    #[test]
    fn complementary_units() {
        let f = Formula::from_ints(1, &[&[1], &[-1]]);
        let s = solver(&f);
        assert!(s.is_inconsistent());
        assert_eq!(s.value(lit(1)), Some(true));
    }

    #[test]
    fn binary_conflict_keeps_first_unit() {
        let f = Formula::from_ints(2, &[&[1], &[-1, 2], &[-1, -2]]);
        let mut s = solver(&f);
        assert!(s.propagate().is_some());
        assert_eq!(s.value(lit(1)), Some(true));
    }

    #[test]
    fn fresh_pick_is_var1_false() {
        let mut s = solver(&golden_formula());
        assert_eq!(s.vsids_pick(), Some(lit(-1)));
        s.bump_var(3);
        assert_eq!(s.vsids_pick(), Some(lit(-3)));
    }

    #[test]
    fn golden_first_conflict() {
        let f = golden_formula();
        let mut s = solver(&f);
        assert!(s.propagate().is_none());
        s.decide(lit(4));
        assert!(s.propagate().is_none());
        s.decide(lit(3));
        let conflict = s.propagate().expect("x4, x3 conflict");
        let a = s.analyze(conflict);
        assert_eq!(a.asserting, lit(-3));
        assert_eq!(a.backjump_level, 1);
        let mut learned: Vec<i32> = a.learned.iter().map(|l| l.value()).collect();
        learned.sort();
        assert_eq!(learned, vec![-4, -3]);
        s.backjump(a.backjump_level, a.asserting);
        s.learn(&a);
        assert_eq!(s.value(lit(-3)), Some(true));
        assert_eq!(s.var_level(3), Some(1));
        let ev = s.events();
        assert_eq!(ev[0], TrailEvent::Decision { lit: lit(4), level: 1 });
        assert_eq!(ev[1], TrailEvent::Decision { lit: lit(3), level: 2 });
        assert_eq!(*ev.last().unwrap(), TrailEvent::Backjump { lit: lit(-3), level: 1 });
    }

    #[test]
    fn backjump_to_root_after_unit_learn() {
        let f = Formula::from_ints(3, &[&[-1, 2], &[-1, -2]]);
        let mut s = solver(&f);
        s.decide(lit(1));
        let c = s.propagate().unwrap();
        let a = s.analyze(c);
        assert_eq!(a.learned, vec![lit(-1)]);
        assert_eq!(a.backjump_level, 0);
        s.backjump(0, a.asserting);
        s.learn(&a);
        assert_eq!(s.decision_level(), 0);
        assert_eq!(*s.events().last().unwrap(), TrailEvent::Backjump { lit: lit(-1), level: 0 });
        assert!(s.propagate().is_none());
    }

    #[test]
    fn conflict_with_one_lower_level_literal() {
        // x1 at level 1, then x2 at level 2 conflicts through clauses using only x2 plus x1.
        let f = Formula::from_ints(3, &[&[-2, 3], &[-2, -3, -1]]);
        let mut s = solver(&f);
        s.decide(lit(1));
        assert!(s.propagate().is_none());
        s.decide(lit(2));
        let c = s.propagate().unwrap();
        let a = s.analyze(c);
        assert_eq!(a.backjump_level, 1);
        assert_eq!(a.asserting, lit(-2));
    }

    /// Naive fixpoint propagator: repeatedly scan all clauses for units.
    fn naive_closure(f: &Formula, decisions: &[Lit]) -> Option<Vec<Option<bool>>> {
        let mut vals: Vec<Option<bool>> = vec![None; f.num_vars() as usize];
        for d in decisions {
            vals[d.index()] = Some(d.is_positive());
        }
        loop {
            let mut changed = false;
            for c in f.clauses() {
                let lv = |l: &Lit| vals[l.index()].map(|b| b == l.is_positive());
                if c.iter().any(|l| lv(l) == Some(true)) {
                    continue;
                }
                let open: Vec<Lit> = c.iter().copied().filter(|l| lv(l).is_none()).collect();
                match open.len() {
                    0 => return None,
                    1 => {
                        vals[open[0].index()] = Some(open[0].is_positive());
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return Some(vals);
            }
        }
    }

    #[test]
    fn propagation_matches_naive_fixpoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.gen_range(3..=12u32);
            let m = rng.gen_range(1..=(4 * n as usize));
            let clauses: Vec<Clause> = (0..m)
                .map(|_| {
                    let w = rng.gen_range(2..=3);
                    Clause::new((0..w).map(|_| Lit::from_var(rng.gen_range(1..=n), rng.gen_bool(0.5))))
                })
                .filter(|c| c.len() >= 2 && !c.is_tautology())
                .collect();
            let f = Formula::new(n, clauses).unwrap();
            let mut s = solver(&f);
            let k = rng.gen_range(1..=3);
            let mut decisions = Vec::new();
            let mut conflict = false;
            for _ in 0..k {
                if s.propagate().is_some() {
                    conflict = true;
                    break;
                }
                let unassigned: Vec<u32> =
                    (1..=n).filter(|&v| s.var_level(v).is_none()).collect();
                if unassigned.is_empty() {
                    break;
                }
                let v = unassigned[rng.gen_range(0..unassigned.len())];
                let d = Lit::from_var(v, rng.gen_bool(0.5));
                s.decide(d);
                decisions.push(d);
            }
            if conflict {
                continue;
            }
            let got = s.propagate();
            let expected = naive_closure(&f, &decisions);
            match expected {
                None => assert!(got.is_some()),
                Some(vals) => {
                    assert!(got.is_none());
                    assert_eq!(s.assignment().values(), vals.as_slice());
                    assert!(s.check_watches());
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn learned_clauses_are_implied() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let n = rng.gen_range(4..=10u32);
            let m = (rng.gen_range(3.5..5.0) * n as f64) as usize;
            let clauses: Vec<Clause> = (0..m)
                .map(|_| Clause::new((0..3).map(|_| Lit::from_var(rng.gen_range(1..=n), rng.gen_bool(0.5)))))
                .collect();
            let f = Formula::new(n, clauses).unwrap().simplify();
            let mut s = solver(&f);
            let mut learned = Vec::new();
            for _ in 0..200 {
                if s.is_inconsistent() {
                    break;
                }
                if let Some(c) = s.propagate() {
                    if s.decision_level() == 0 {
                        break;
                    }
                    let before = s.assignment();
                    let a = s.analyze(c);
                    // Falsified before the backjump, unit after it.
                    for l in &a.learned {
                        assert_eq!(before.lit_value(*l), Some(false));
                    }
                    s.backjump(a.backjump_level, a.asserting);
                    let open: Vec<&Lit> = a.learned.iter().filter(|l| s.value(**l).is_none()).collect();
                    assert_eq!(open, vec![&a.asserting]);
                    s.learn(&a);
                    learned.push(Clause::new(a.learned.clone()));
                    s.decay_activities();
                } else {
                    match s.vsids_pick() {
                        Some(l) => s.decide(l),
                        None => break,
                    }
                }
            }
            let mut all = f.clauses().to_vec();
            all.extend(learned);
            let g = Formula::new(n, all).unwrap();
            assert_eq!(
                brute_force_solve(&f).unwrap().is_sat(),
                brute_force_solve(&g).unwrap().is_sat()
            );
        }
    }

    #[test]
    fn backjump_restores_lower_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..300 {
            let n = 12u32;
            let clauses: Vec<Clause> = (0..40)
                .map(|_| Clause::new((0..3).map(|_| Lit::from_var(rng.gen_range(1..=n), rng.gen_bool(0.5)))))
                .filter(|c| c.len() >= 2)
                .collect();
            let f = Formula::new(n, clauses).unwrap().simplify();
            let mut s = solver(&f);
            let mut snapshots: Vec<Vec<Lit>> = Vec::new();
            for _ in 0..6 {
                if s.propagate().is_some() {
                    break;
                }
                snapshots.push(s.assigned_lits().to_vec());
                match s.vsids_pick() {
                    Some(l) => s.decide(l),
                    None => break,
                }
            }
            let level = s.decision_level();
            if level < 2 {
                continue;
            }
            let target = rng.gen_range(0..level);
            let filler = Lit::from_var(1, true);
            s.backjump(target, filler);
            assert_eq!(s.assigned_lits(), snapshots[target as usize].as_slice());
            assert_eq!(s.decision_level(), target);
        }
    }
}
