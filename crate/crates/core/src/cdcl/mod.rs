//! MiniSat 2.2 style CDCL search with an instrumented event trail.

mod luby;
mod solver;
pub mod trail;
mod vsids;

pub use luby::luby;
pub use solver::{Analysis, ClauseRef, Solver};
pub use trail::{Tag, Trail, TrailEvent};
pub use vsids::Vsids;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cnf::{evaluate, Assignment, Evaluation, Formula, Lit};
use crate::policy::{BranchingPolicy, Budget, NoPolicy};
use crate::scalar::Activity;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub var_decay: f64,
    pub clause_decay: f64,
    /// Luby unit, in conflicts.
    pub restart_base: u64,
    pub restarts: bool,
    pub phase_saving: bool,
    /// Growth factor of the learned clause limit after each reduction.
    pub learned_db_growth: f64,
    /// Recursive learned clause minimization.
    pub minimize: bool,
    /// Probability of a random decision; 0 disables the RNG entirely.
    pub random_var_freq: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            var_decay: 0.95,
            clause_decay: 0.999,
            restart_base: 100,
            restarts: true,
            phase_saving: true,
            learned_db_growth: 1.1,
            minimize: true,
            random_var_freq: 0.0,
            seed: 91_648_253,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> crate::Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.var_decay) || !unit(self.clause_decay) {
            return Err(crate::Error::Config("decay factors must lie in (0, 1)".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if self.restart_base == 0 || !(self.learned_db_growth > 1.0) {
            return Err(crate::Error::Config(
                "restart_base must be positive and learned_db_growth > 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.random_var_freq) {
            return Err(crate::Error::Config("random_var_freq must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    #[serde(rename = "SAT")]
    Sat,
    #[serde(rename = "UNSAT")]
    Unsat,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Sat => "SAT",
            Outcome::Unsat => "UNSAT",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub decisions: u64,
    /// Implied literal assignments, i.e. `A` events.
    pub propagations: u64,
    /// Conflicts that went through analysis (the final level-0 conflict is not counted).
    pub conflicts: u64,
    pub restarts: u64,
    pub learned_clauses: u64,
    pub policy_queries: u64,
    pub policy_accepted: u64,
    pub extern_failures: u64,
    pub time_propagate: Duration,
    pub time_analyze: Duration,
    pub time_decide: Duration,
    /// From search loop entry to verdict; excludes parsing and simplification.
    pub wall_time: Duration,
    pub outcome: Outcome,
    pub model: Option<Assignment>,
}

/// The timing-free part of [`RunStats`]; equal for identical runs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Counters {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub restarts: u64,
    pub learned_clauses: u64,
    pub policy_queries: u64,
    pub policy_accepted: u64,
    pub extern_failures: u64,
    pub outcome: Outcome,
    pub model: Option<Vec<i32>>,
}

impl RunStats {
    pub fn counters(&self) -> Counters {
        Counters {
            decisions: self.decisions,
            propagations: self.propagations,
            conflicts: self.conflicts,
            restarts: self.restarts,
            learned_clauses: self.learned_clauses,
            policy_queries: self.policy_queries,
            policy_accepted: self.policy_accepted,
            extern_failures: self.extern_failures,
            outcome: self.outcome,
            model: self.model.as_ref().map(|m| m.lits().map(Lit::value).collect()),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "outcome": self.outcome,
            "decisions": self.decisions,
            "propagations": self.propagations,
            "conflicts": self.conflicts,
            "restarts": self.restarts,
            "learned_clauses": self.learned_clauses,
            "policy_queries": self.policy_queries,
            "policy_accepted": self.policy_accepted,
            "extern_failures": self.extern_failures,
            "time_propagate_s": self.time_propagate.as_secs_f64(),
            "time_analyze_s": self.time_analyze.as_secs_f64(),
            "time_decide_s": self.time_decide.as_secs_f64(),
            "wall_time_s": self.wall_time.as_secs_f64(),
            "model": self.model.as_ref().map(|m| m.lits().map(Lit::value).collect::<Vec<_>>()),
        })
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub stats: RunStats,
    pub trail: Trail,
}

/// Solves with pure VSIDS branching.
pub fn solve(formula: &Formula, config: &SolverConfig) -> SolveResult {
    solve_with::<f64>(formula, config, &mut NoPolicy, Budget::none())
}

/// Solves `formula`, consulting `policy` at decisions admitted by `budget`.
///
/// Tautologies are removed before search. The run is deterministic for a
/// fixed formula, configuration and policy behaviour.
pub fn solve_with<A: Activity>(
    formula: &Formula,
    config: &SolverConfig,
    policy: &mut dyn BranchingPolicy,
    mut budget: Budget,
) -> SolveResult {
    let simplified = formula.simplify();
    let mut solver = Solver::<A>::with_keytrace(&simplified, config.clone(), budget.total() > 0);

    let mut time_propagate = Duration::ZERO;
    let mut time_analyze = Duration::ZERO;
    let mut time_decide = Duration::ZERO;
    let mut policy_queries = 0u64;
    let mut policy_accepted = 0u64;
    let mut restart_index = 0u64;
    let mut restart_limit = restart_budget(config, restart_index);
    let mut conflicts_since_restart = 0u64;

    let start = Instant::now();
    let outcome = if solver.is_inconsistent() {
        Outcome::Unsat
    } else {
        loop {
            let t = Instant::now();
            let conflict = solver.propagate();
            time_propagate += t.elapsed();

            if let Some(conflict) = conflict {
                if solver.decision_level() == 0 {
                    break Outcome::Unsat;
                }
                let t = Instant::now();
                let analysis = solver.analyze(conflict);
                solver.backjump(analysis.backjump_level, analysis.asserting);
                solver.learn(&analysis);
                solver.decay_activities();
                time_analyze += t.elapsed();
                conflicts_since_restart += 1;
                continue;
            }

            if config.restarts && conflicts_since_restart >= restart_limit {
                solver.restart();
                restart_index += 1;
                restart_limit = restart_budget(config, restart_index);
                conflicts_since_restart = 0;
                continue;
            }
            solver.maybe_reduce_db();

            if solver.all_assigned() {
                break Outcome::Sat;
            }
            let t = Instant::now();
            let choice = crate::policy::budgeted_decide(
                &mut solver,
                formula,
                policy,
                &mut budget,
                &mut policy_queries,
            );
            if choice.accepted {
                policy_accepted += 1;
            }
            solver.decide(choice.lit);
            time_decide += t.elapsed();
        }
    };
    let wall_time = start.elapsed();

    let model = (outcome == Outcome::Sat).then(|| solver.assignment());
    if let Some(m) = &model {
        assert_eq!(evaluate(formula, m), Evaluation::Satisfied, "solver produced a bad model");
    }
    let counts = solver.counts;
    let stats = RunStats {
        decisions: counts.decisions,
        propagations: counts.propagations,
        conflicts: counts.conflicts,
        restarts: counts.restarts,
        learned_clauses: counts.learned_clauses,
        policy_queries,
        policy_accepted,
        extern_failures: policy.failures(),
        time_propagate,
        time_analyze,
        time_decide,
        wall_time,
        outcome,
        model,
    };
    let trail = Trail::from_events(formula.num_vars(), solver.take_events());
    SolveResult { stats, trail }
}

fn restart_budget(config: &SolverConfig, index: u64) -> u64 {
    (luby(2.0, index) * config.restart_base as f64) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{brute_force_solve, Clause};
    use crate::gen::{generate_planted, GenSpec};
    use crate::keytrace::tests::golden_formula;
    use crate::policy::{Schedule, ScriptedPolicy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lit(v: i32) -> Lit {
        Lit::new(v).unwrap()
    }

    fn random_formula(rng: &mut ChaCha8Rng, n: u32, ratio: f64) -> Formula {
        let m = (ratio * n as f64).round() as usize;
        let clauses = (0..m)
            .map(|_| Clause::new((0..3).map(|_| Lit::from_var(rng.gen_range(1..=n), rng.gen_bool(0.5)))))
            .collect();
        Formula::new(n, clauses).unwrap()
    }

    fn check_trail_consistency(r: &SolveResult) {
        let t = &r.trail;
        assert_eq!(t.count(Tag::D) as u64, r.stats.decisions);
        assert_eq!(t.count(Tag::A) as u64, r.stats.propagations);
        let backjumps =
            t.events.iter().filter(|e| matches!(e, TrailEvent::Backjump { .. })).count();
        assert_eq!(backjumps as u64, r.stats.conflicts);
        let mut level = 0u32;
        for (i, e) in t.events.iter().enumerate() {
            match *e {
                TrailEvent::Decision { level: h, .. } => {
                    assert!(h >= 1);
                    assert_eq!(h, level + 1);
                    level = h;
                }
                TrailEvent::Implied { level: h, .. } => assert_eq!(h, level),
                TrailEvent::Backjump { level: h, .. } => {
                    assert!(i > 0 && h < t.events[i - 1].level());
                    level = h;
                }
                TrailEvent::Restart => {
                    assert!(i > 0 && 0 < t.events[i - 1].level());
                    level = 0;
                }
            }
        }
    }

    #[test]
    fn contradiction_unsat_without_decisions() {
        let f = Formula::from_ints(1, &[&[1], &[-1]]);
        let r = solve(&f, &SolverConfig::default());
        assert_eq!(r.stats.outcome, Outcome::Unsat);
        assert_eq!(r.stats.decisions, 0);
    }

    #[test]
    fn empty_clause_unsat_immediately() {
        let f = Formula::new(2, vec![Clause::from_ints(&[1, 2]), Clause::new([])]).unwrap();
        let r = solve(&f, &SolverConfig::default());
        assert_eq!(r.stats.outcome, Outcome::Unsat);
        assert!(r.trail.is_empty());
    }

    #[test]
    fn empty_formula_sat() {
        let f = Formula::from_ints(3, &[]);
        let r = solve(&f, &SolverConfig::default());
        assert_eq!(r.stats.outcome, Outcome::Sat);
        assert_eq!(r.stats.decisions, 3);
    }

    #[test]
    fn forced_golden_start() {
        let f = golden_formula();
        let mut policy = ScriptedPolicy::new(vec![Some(lit(4)), Some(lit(3))]);
        let r = solve_with::<f64>(
            &f,
            &SolverConfig::default(),
            &mut policy,
            Budget::new(2, Schedule::FrontLoaded),
        );
        let ev = &r.trail.events;
        assert_eq!(ev[0], TrailEvent::Decision { lit: lit(4), level: 1 });
        assert_eq!(ev[1], TrailEvent::Decision { lit: lit(3), level: 2 });
        assert!(r.stats.conflicts >= 1);
        assert!(ev.iter().any(|e| *e == TrailEvent::Backjump { lit: lit(-3), level: 1 }));
        assert_eq!(r.stats.outcome, Outcome::Sat);
        check_trail_consistency(&r);
    }

    #[test]
    fn verdicts_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut sat = 0;
        for _ in 0..500 {
            let n = rng.gen_range(3..=12);
            let ratio = rng.gen_range(3.0..5.0);
            let f = random_formula(&mut rng, n, ratio);
            let r = solve(&f, &SolverConfig::default());
            let expected = brute_force_solve(&f).unwrap().is_sat();
            assert_eq!(r.stats.outcome == Outcome::Sat, expected);
            check_trail_consistency(&r);
            sat += expected as usize;
        }
        assert!(sat > 50 && sat < 450, "verdict mix {sat}/500");
    }

    #[test]
    fn f32_activities_agree_on_verdicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let f = random_formula(&mut rng, 10, 4.3);
            let a = solve_with::<f32>(&f, &SolverConfig::default(), &mut NoPolicy, Budget::none());
            let b = solve(&f, &SolverConfig::default());
            assert_eq!(a.stats.outcome, b.stats.outcome);
        }
    }

    #[test]
    fn deterministic_runs() {
        let (f, _) = generate_planted(&GenSpec::new(80, 3)).unwrap();
        let a = solve(&f, &SolverConfig::default());
        let b = solve(&f, &SolverConfig::default());
        assert_eq!(a.stats.counters(), b.stats.counters());
        assert_eq!(a.trail, b.trail);
        check_trail_consistency(&a);
    }

    #[test]
    fn restarts_and_reductions_on_harder_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut restarted = false;
        for _ in 0..20 {
            let f = random_formula(&mut rng, 120, 4.26);
            let r = solve(&f, &SolverConfig::default());
            check_trail_consistency(&r);
            restarted |= r.stats.restarts > 0;
        }
        assert!(restarted);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig { var_decay: 1.0, ..SolverConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn phase_saving_toggle_keeps_verdicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let cfg = SolverConfig { phase_saving: false, random_var_freq: 0.05, ..Default::default() };
        for _ in 0..100 {
            let f = random_formula(&mut rng, 11, 4.5);
            let r = solve(&f, &cfg);
            assert_eq!(r.stats.outcome == Outcome::Sat, brute_force_solve(&f).unwrap().is_sat());
        }
    }
}
