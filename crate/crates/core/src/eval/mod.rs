//! Dataset runner and reports.
//!
//! Every instance is solved by the VSIDS baseline and by the method under the
//! same configuration and per-instance seed (`seed + index`), so results do
//! not depend on the number of workers. Metrics are computed exactly over
//! rationals and also reported as floats.

mod metrics;

pub use metrics::{mrpp, win_rate};

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use num_rational::Ratio;
use rayon::prelude::*;
use serde::Serialize;

use crate::cdcl::{solve, solve_with, Outcome, RunStats, SolverConfig};
use crate::cnf::{read_dimacs_file, Formula};
use crate::keytrace::{extract_keytrace, replay};
use crate::policy::{
    bc_policy, expert_policy, extern_policy, BcModel, BranchingPolicy, Budget, NoPolicy, Schedule,
    DEFAULT_TIMEOUT,
};
use crate::scalar::MetricScalar;
use crate::{Error, Result};

/// Exact metric scalar used in reports.
pub type Exact = Ratio<u128>;

/// A named formula of a dataset.
#[derive(Clone, Debug)]
pub struct Instance {
    pub id: String,
    pub formula: Formula,
}

/// Loads every `*.cnf` file of `dir`, ordered by file name.
pub fn load_dataset(dir: &Path) -> Result<Vec<Instance>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "cnf"));
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no .cnf files in {}", dir.display())));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(Instance { id, formula: read_dimacs_file(p)? })
        })
        .collect()
}

/// How the method run chooses branches.
#[derive(Clone, Debug)]
pub enum PolicySpec {
    Vsids,
    /// Expert built from the baseline run's KeyTrace on the same instance.
    Expert,
    Bc(Arc<BcModel>),
    Extern(String),
}

impl PolicySpec {
    /// `vsids`, `expert`, `bc:FILE` or `extern:CMD`.
    pub fn parse(spec: &str) -> Result<PolicySpec> {
        match spec {
            "vsids" => Ok(PolicySpec::Vsids),
            "expert" => Ok(PolicySpec::Expert),
            _ => {
                if let Some(path) = spec.strip_prefix("bc:") {
                    Ok(PolicySpec::Bc(Arc::new(BcModel::load(Path::new(path))?)))
                } else if let Some(cmd) = spec.strip_prefix("extern:") {
                    Ok(PolicySpec::Extern(cmd.to_string()))
                } else {
                    Err(Error::Config(format!("unknown method `{spec}`")))
                }
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            PolicySpec::Vsids => "vsids",
            PolicySpec::Expert => "expert",
            PolicySpec::Bc(_) => "bc",
            PolicySpec::Extern(_) => "extern",
        }
    }

    fn solve(
        &self,
        formula: &Formula,
        cfg: &SolverConfig,
        budget: Budget,
        baseline: &crate::cdcl::SolveResult,
    ) -> Result<RunStats> {
        let mut policy: Box<dyn BranchingPolicy> = match self {
            PolicySpec::Vsids => Box::new(NoPolicy),
            PolicySpec::Expert => Box::new(expert_policy(&extract_keytrace(&baseline.trail))),
            PolicySpec::Bc(model) => Box::new(bc_policy(Arc::clone(model))),
            PolicySpec::Extern(cmd) => Box::new(extern_policy(cmd, DEFAULT_TIMEOUT)?),
        };
        Ok(solve_with::<f64>(formula, cfg, policy.as_mut(), budget).stats)
    }
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub budget: u64,
    pub schedule: Schedule,
    pub solver: SolverConfig,
    /// Base seed; instance `i` runs with `seed + i`.
    pub seed: u64,
    pub workers: usize,
    pub delta: Exact,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            budget: 0,
            schedule: Schedule::FrontLoaded,
            solver: SolverConfig::default(),
            seed: SolverConfig::default().seed,
            workers: 1,
            delta: Ratio::new(1, 100),
        }
    }
}

/// Parses `0.01`, `1/100` or `1` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Exact> {
    let bad = || Error::Config(format!("`{text}` is not a non-negative rational"));
    if let Some((n, d)) = text.split_once('/') {
        let n: u128 = n.trim().parse().map_err(|_| bad())?;
        let d: u128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Ratio::new(n, d));
    }
    let (int, frac) = text.split_once('.').unwrap_or((text, ""));
    if frac.len() > 30 || (int.is_empty() && frac.is_empty()) {
        return Err(bad());
    }
    let digits = format!("{int}{frac}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let n: u128 = digits.parse().map_err(|_| bad())?;
    Ok(Ratio::new(n, 10u128.pow(frac.len() as u32)))
}

fn ratio_text(r: &Exact) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceRow {
    pub id: String,
    pub n: u32,
    pub m: usize,
    pub verdict: Outcome,
    pub p_base: u64,
    pub p_method: u64,
    pub conf_base: u64,
    pub conf_method: u64,
    pub dec_base: u64,
    pub dec_method: u64,
    pub queries: u64,
    pub accepted: u64,
    pub extern_failures: u64,
    #[serde(serialize_with = "secs")]
    pub wall_base: Duration,
    #[serde(serialize_with = "secs")]
    pub wall_method: Duration,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Mean solver-phase times and their shares of the total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Breakdown {
    pub propagate_s: f64,
    pub analyze_s: f64,
    pub decide_s: f64,
    pub propagate: f64,
    pub analyze: f64,
    pub decide: f64,
}

impl Breakdown {
    pub fn from_runs<'a>(runs: impl IntoIterator<Item = &'a RunStats>) -> Breakdown {
        let (mut p, mut a, mut d, mut k) = (0.0, 0.0, 0.0, 0usize);
        for r in runs {
            p += r.time_propagate.as_secs_f64();
            a += r.time_analyze.as_secs_f64();
            d += r.time_decide.as_secs_f64();
            k += 1;
        }
        if k == 0 {
            return Breakdown::default();
        }
        let total = p + a + d;
        let share = |x: f64| if total > 0.0 { x / total } else { 0.0 };
        let k = k as f64;
        Breakdown {
            propagate_s: p / k,
            analyze_s: a / k,
            decide_s: d / k,
            propagate: share(p),
            analyze: share(a),
            decide: share(d),
        }
    }
}

#[derive(Clone, Debug)]
pub struct EvalReport {
    pub method: String,
    pub budget: u64,
    pub schedule: Schedule,
    pub seed: u64,
    pub per_instance: Vec<InstanceRow>,
    pub mrpp: Exact,
    pub win_rate: Exact,
    pub delta: Exact,
    /// Phase shares of the baseline runs.
    pub breakdown: Breakdown,
}

impl EvalReport {
    pub fn pairs(&self) -> Vec<(u64, u64)> {
        self.per_instance.iter().map(|r| (r.p_method, r.p_base)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "budget": self.budget,
            "schedule": self.schedule.to_string(),
            "seed": self.seed,
            "instances": self.per_instance.len(),
            "mrpp": ratio_text(&self.mrpp),
            "mrpp_f64": self.mrpp.to_f64(),
            "win_rate": ratio_text(&self.win_rate),
            "win_rate_f64": self.win_rate.to_f64(),
            "delta": ratio_text(&self.delta),
            "breakdown": self.breakdown,
            "per_instance": self.per_instance,
        })
    }

    /// CSV with one row per instance. Wall-clock columns are left empty
    /// unless `timing` is set, so that reruns are byte-identical.
    pub fn to_csv(&self, timing: bool) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "id", "n", "m", "verdict", "p_base", "p_method", "conf_base", "conf_method", "dec_base",
            "dec_method", "wall_base", "wall_method",
        ])?;
        for r in &self.per_instance {
            let wall = |d: Duration| if timing { format!("{:.6}", d.as_secs_f64()) } else { String::new() };
            w.write_record([
                r.id.clone(),
                r.n.to_string(),
                r.m.to_string(),
                r.verdict.to_string(),
                r.p_base.to_string(),
                r.p_method.to_string(),
                r.conf_base.to_string(),
                r.conf_method.to_string(),
                r.dec_base.to_string(),
                r.dec_method.to_string(),
                wall(r.wall_base),
                wall(r.wall_method),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Stdio(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

fn instance_config(cfg: &EvalConfig, index: usize) -> SolverConfig {
    cfg.solver.clone().with_seed(cfg.seed.wrapping_add(index as u64))
}

/// Runs baseline and method on every instance and aggregates.
pub fn run_eval(instances: &[Instance], method: &PolicySpec, cfg: &EvalConfig) -> Result<EvalReport> {
    if instances.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let rows: Vec<(InstanceRow, RunStats)> = pool(cfg.workers)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let scfg = instance_config(cfg, i);
                let base = solve(&inst.formula, &scfg);
                let budget = Budget::new(cfg.budget, cfg.schedule);
                let m = method.solve(&inst.formula, &scfg, budget, &base)?;
                if m.outcome != base.stats.outcome {
                    return Err(Error::Config(format!(
                        "verdicts differ on {}: baseline {}, method {}",
                        inst.id, base.stats.outcome, m.outcome
                    )));
                }
                let row = InstanceRow {
                    id: inst.id.clone(),
                    n: inst.formula.num_vars(),
                    m: inst.formula.num_clauses(),
                    verdict: base.stats.outcome,
                    p_base: base.stats.propagations,
                    p_method: m.propagations,
                    conf_base: base.stats.conflicts,
                    conf_method: m.conflicts,
                    dec_base: base.stats.decisions,
                    dec_method: m.decisions,
                    queries: m.policy_queries,
                    accepted: m.policy_accepted,
                    extern_failures: m.extern_failures,
                    wall_base: base.stats.wall_time,
                    wall_method: m.wall_time,
                };
                Ok((row, base.stats))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let breakdown = Breakdown::from_runs(rows.iter().map(|(_, s)| s));
    let per_instance: Vec<InstanceRow> = rows.into_iter().map(|(r, _)| r).collect();
    let pairs: Vec<(u64, u64)> = per_instance.iter().map(|r| (r.p_method, r.p_base)).collect();
    Ok(EvalReport {
        method: method.name().to_string(),
        budget: cfg.budget,
        schedule: cfg.schedule,
        seed: cfg.seed,
        mrpp: mrpp::<Exact>(&pairs)?,
        win_rate: win_rate::<Exact>(&pairs, &cfg.delta)?,
        delta: cfg.delta,
        breakdown,
        per_instance,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ReplayRow {
    pub id: String,
    pub p_orig: u64,
    pub p_replay: u64,
    pub conf_orig: u64,
    pub conf_replay: u64,
    pub dec_orig: u64,
    pub dec_replay: u64,
}

/// Original-versus-replay statistics plus the baseline phase breakdown.
#[derive(Clone, Debug)]
pub struct ReplayReport {
    pub rows: Vec<ReplayRow>,
    /// Median of `p_replay / p_orig` over instances with `p_orig > 0`.
    pub propagation_ratio: Exact,
    /// Median of `conf_replay / max(1, conf_orig)`.
    pub conflict_ratio: Exact,
    pub breakdown: Breakdown,
}

impl ReplayReport {
    pub fn to_json(&self) -> serde_json::Value {
        let mean = |f: fn(&ReplayRow) -> u64| {
            self.rows.iter().map(|r| f(r) as f64).sum::<f64>() / self.rows.len().max(1) as f64
        };
        serde_json::json!({
            "instances": self.rows.len(),
            "breakdown": self.breakdown,
            "replay": {
                "median_propagation_ratio": ratio_text(&self.propagation_ratio),
                "median_propagation_ratio_f64": self.propagation_ratio.to_f64(),
                "median_conflict_ratio": ratio_text(&self.conflict_ratio),
                "median_conflict_ratio_f64": self.conflict_ratio.to_f64(),
                "mean_propagations_orig": mean(|r| r.p_orig),
                "mean_propagations_replay": mean(|r| r.p_replay),
                "mean_conflicts_orig": mean(|r| r.conf_orig),
                "mean_conflicts_replay": mean(|r| r.conf_replay),
                "mean_decisions_orig": mean(|r| r.dec_orig),
                "mean_decisions_replay": mean(|r| r.dec_replay),
            },
            "per_instance": self.rows,
        })
    }
}

/// Solves every instance with VSIDS, then replays its KeyTrace.
pub fn replay_report(instances: &[Instance], cfg: &EvalConfig) -> Result<ReplayReport> {
    if instances.is_empty() {
        return Err(Error::Config("empty dataset".into()));
    }
    let runs: Vec<(ReplayRow, RunStats)> = pool(cfg.workers)?.install(|| {
        instances
            .par_iter()
            .enumerate()
            .map(|(i, inst)| {
                let scfg = instance_config(cfg, i);
                let base = solve(&inst.formula, &scfg);
                let r = replay(&inst.formula, &extract_keytrace(&base.trail), &scfg);
                let row = ReplayRow {
                    id: inst.id.clone(),
                    p_orig: base.stats.propagations,
                    p_replay: r.stats.propagations,
                    conf_orig: base.stats.conflicts,
                    conf_replay: r.stats.conflicts,
                    dec_orig: base.stats.decisions,
                    dec_replay: r.stats.decisions,
                };
                (row, base.stats)
            })
            .collect()
    });
    let breakdown = Breakdown::from_runs(runs.iter().map(|(_, s)| s));
    let rows: Vec<ReplayRow> = runs.into_iter().map(|(r, _)| r).collect();
    let props: Vec<(u64, u64)> = rows.iter().map(|r| (r.p_replay, r.p_orig)).collect();
    let confs: Vec<(u64, u64)> = rows.iter().map(|r| (r.conf_replay, r.conf_orig.max(1))).collect();
    Ok(ReplayReport {
        propagation_ratio: mrpp::<Exact>(&props)?,
        conflict_ratio: mrpp::<Exact>(&confs)?,
        breakdown,
        rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScheduleRow {
    pub variant: String,
    pub schedule: String,
    pub budget: u64,
    pub mrpp: String,
    pub mrpp_f64: f64,
    pub win_rate: String,
    pub win_rate_f64: f64,
    /// Instances whose query count differs from `min(budget, admitted decisions)`.
    pub accounting_violations: usize,
    /// Instances with fewer admitted decisions than the budget.
    pub short_runs: usize,
    #[serde(skip)]
    pub report: Option<EvalReport>,
}

/// Compares one query at the first decision with one query after three
/// VSIDS decisions.
pub fn schedule_experiment(
    instances: &[Instance],
    method: &PolicySpec,
    cfg: &EvalConfig,
) -> Result<Vec<ScheduleRow>> {
    let variants = [("call_at_first", Schedule::FrontLoaded), ("call_after_3", Schedule::AfterK(3))];
    variants
        .iter()
        .map(|&(name, schedule)| {
            let vcfg = EvalConfig { schedule, ..cfg.clone() };
            let report = run_eval(instances, method, &vcfg)?;
            let skip = match schedule {
                Schedule::FrontLoaded => 0,
                Schedule::AfterK(k) => k,
            };
            let mut violations = 0;
            let mut short = 0;
            for r in &report.per_instance {
                let admitted = r.dec_method.saturating_sub(skip);
                if admitted < vcfg.budget {
                    short += 1;
                }
                if r.queries != admitted.min(vcfg.budget) {
                    violations += 1;
                }
            }
            Ok(ScheduleRow {
                variant: name.to_string(),
                schedule: schedule.to_string(),
                budget: vcfg.budget,
                mrpp: ratio_text(&report.mrpp),
                mrpp_f64: report.mrpp.to_f64(),
                win_rate: ratio_text(&report.win_rate),
                win_rate_f64: report.win_rate.to_f64(),
                accounting_violations: violations,
                short_runs: short,
                report: Some(report),
            })
        })
        .collect()
}

/// Builds an in-memory dataset from generated planted instances.
pub fn planted_dataset(
    n_min: u32,
    n_max: u32,
    count: usize,
    base_seed: u64,
) -> Result<Vec<Instance>> {
    Ok(crate::gen::generate_dataset(n_min, n_max, count, 4.1, 4.4, base_seed)?
        .into_iter()
        .map(|p| Instance { id: format!("{:05}", p.index), formula: p.formula })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse_exactly() {
        assert_eq!(parse_rational("0.01").unwrap(), Ratio::new(1, 100));
        assert_eq!(parse_rational("1/100").unwrap(), Ratio::new(1, 100));
        assert_eq!(parse_rational("1").unwrap(), Ratio::new(1, 1));
        assert_eq!(parse_rational(".5").unwrap(), Ratio::new(1, 2));
        for bad in ["", ".", "-1", "1/0", "x", "0.1.2"] {
            assert!(parse_rational(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn self_comparison_is_neutral() {
        let data = planted_dataset(10, 30, 30, 5).unwrap();
        let r = run_eval(&data, &PolicySpec::Vsids, &EvalConfig { budget: 5, ..EvalConfig::default() }).unwrap();
        assert_eq!(r.mrpp, Ratio::new(1, 1));
        assert_eq!(r.win_rate, Ratio::new(0, 1));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let data = planted_dataset(10, 40, 24, 6).unwrap();
        let cfg = EvalConfig { budget: 4, ..EvalConfig::default() };
        let a = run_eval(&data, &PolicySpec::Expert, &cfg).unwrap();
        let b = run_eval(&data, &PolicySpec::Expert, &EvalConfig { workers: 4, ..cfg }).unwrap();
        assert_eq!(a.to_csv(false).unwrap(), b.to_csv(false).unwrap());
        assert!(a.to_csv(false).unwrap().starts_with(
            "id,n,m,verdict,p_base,p_method,conf_base,conf_method,dec_base,dec_method,wall_base,wall_method\n"
        ));
    }

    #[test]
    fn budget_zero_schedule_control() {
        let data = planted_dataset(5, 15, 30, 7).unwrap();
        let rows = schedule_experiment(&data, &PolicySpec::Expert, &EvalConfig::default()).unwrap();
        for row in &rows {
            assert_eq!(row.mrpp, "1/1");
            assert_eq!(row.accounting_violations, 0);
        }
        assert_eq!(rows[0].report.as_ref().unwrap().to_csv(false).unwrap(), rows[1].report.as_ref().unwrap().to_csv(false).unwrap());
    }

    #[test]
    fn breakdown_shares_sum_to_one() {
        let data = planted_dataset(30, 40, 10, 8).unwrap();
        let r = replay_report(&data, &EvalConfig::default()).unwrap();
        let b = r.breakdown;
        assert!((b.propagate + b.analyze + b.decide - 1.0).abs() < 1e-9);
        assert_eq!(r.rows.len(), 10);
    }
}
