use std::collections::HashMap;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use keytrace_sat::cdcl::{solve, solve_with, Outcome, SolverConfig};
use keytrace_sat::cnf::{read_dimacs_file, write_dimacs, Lit};
use keytrace_sat::eval::{
    load_dataset, parse_rational, replay_report, run_eval, schedule_experiment, EvalConfig,
    PolicySpec,
};
use keytrace_sat::gen::generate_dataset;
use keytrace_sat::keytrace::{deserialize, replay, serialize, TokenStream};
use keytrace_sat::policy::{
    bc_policy, expert_policy, extern_policy, serve, train_bc, BcConfig, BcModel, BranchingPolicy,
    Budget, NoPolicy, Schedule, DEFAULT_TIMEOUT,
};
use keytrace_sat::{extract_keytrace, harvest_probes, KeyTrace, ProbeSample, Trail};

#[derive(Parser)]
#[command(name = "keytrace-sat", version, about = "CDCL solver with KeyTrace imitation tooling")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate planted random 3-SAT instances.
    Gen(GenArgs),
    /// Solve one DIMACS file.
    Solve(SolveArgs),
    /// Collapse a trail file into a KeyTrace file.
    Extract {
        trail: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Re-solve a formula following a KeyTrace.
    Replay {
        cnf: PathBuf,
        ktrace: PathBuf,
        #[arg(long)]
        stats_out: Option<PathBuf>,
        #[arg(long)]
        trail_out: Option<PathBuf>,
    },
    /// Solve every instance of a directory and write one probe per KeyTrace decision.
    Probes {
        cnf_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SolverConfig::default().seed)]
        seed: u64,
    },
    /// Train the count-based cloned policy.
    TrainBc(TrainArgs),
    /// Compare a method against the VSIDS baseline on a dataset.
    Eval(EvalArgs),
    /// Baseline phase timing and KeyTrace replay statistics.
    BenchBreakdown {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = SolverConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One query at the first decision versus one after three VSIDS decisions.
    Schedule {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "expert")]
        method: String,
        #[arg(long, default_value_t = 1)]
        budget: u64,
        #[arg(long, default_value_t = SolverConfig::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer the external policy protocol on stdin/stdout.
    Serve {
        /// `vsids` (always PASS), `expert:KTRACE` or `bc:MODEL`.
        #[arg(long)]
        policy: String,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n_min: u32,
    #[arg(long)]
    n_max: u32,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 4.1)]
    ratio_min: f64,
    #[arg(long, default_value_t = 4.4)]
    ratio_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    cnf: PathBuf,
    /// `vsids`, `expert:KTRACE`, `bc:MODEL` or `extern:CMD`.
    #[arg(long, default_value = "vsids")]
    policy: String,
    /// Number of policy queries; unlimited if omitted.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value = "front")]
    schedule: Schedule,
    #[arg(long, default_value_t = SolverConfig::default().seed)]
    seed: u64,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    trail_out: Option<PathBuf>,
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Print the model line.
    #[arg(long)]
    model: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    probes: PathBuf,
    #[arg(long, default_value_t = 24)]
    order: usize,
    #[arg(long, default_value_t = 16)]
    digest: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    perms: usize,
    /// Comma-separated bucket names, trained first in this order.
    #[arg(long, value_delimiter = ',')]
    curriculum: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `vsids`, `expert`, `bc:FILE` or `extern:CMD`.
    #[arg(long)]
    method: String,
    #[arg(long, default_value_t = 0)]
    budget: u64,
    #[arg(long, default_value = "front")]
    schedule: Schedule,
    #[arg(long, default_value_t = SolverConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "0.01")]
    delta: String,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Include wall-clock columns in the CSV (makes it nondeterministic).
    #[arg(long)]
    timing: bool,
}

fn main() -> Result<()> {
    run(Cli::parse().command)
}

fn run(command: Cmd) -> Result<()> {
    match command {
        Cmd::Gen(a) => cmd_gen(a),
        Cmd::Solve(a) => cmd_solve(a),
        Cmd::Extract { trail, out } => {
            let text = read(&trail)?;
            let t = Trail::parse(&text).with_context(|| format!("reading {}", trail.display()))?;
            write(&out, &extract_keytrace(&t).to_text(t.num_vars))
        }
        Cmd::Replay { cnf, ktrace, stats_out, trail_out } => {
            let f = read_dimacs_file(&cnf)?;
            let (_, k) = KeyTrace::parse(&read(&ktrace)?)?;
            let r = replay(&f, &k, &SolverConfig::default());
            report_run(&r.stats.outcome, &r.stats.to_json(), stats_out.as_deref())?;
            if let Some(p) = trail_out {
                write(&p, &r.trail.to_text())?;
            }
            Ok(())
        }
        Cmd::Probes { cnf_dir, out, seed } => cmd_probes(&cnf_dir, &out, seed),
        Cmd::TrainBc(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::BenchBreakdown { dataset, seed, workers, out } => {
            let data = load_dataset(&dataset)?;
            let cfg = EvalConfig { seed, workers, ..EvalConfig::default() };
            emit(&replay_report(&data, &cfg)?.to_json(), out.as_deref())
        }
        Cmd::Schedule { dataset, method, budget, seed, workers, out } => {
            let data = load_dataset(&dataset)?;
            let cfg = EvalConfig { budget, seed, workers, ..EvalConfig::default() };
            let rows = schedule_experiment(&data, &PolicySpec::parse(&method)?, &cfg)?;
            emit(&json!({ "method": method, "variants": rows }), out.as_deref())
        }
        Cmd::Serve { policy } => {
            let mut p = serve_policy(&policy)?;
            let stdin = io::stdin();
            serve(stdin.lock(), BufWriter::new(io::stdout().lock()), p.as_mut())?;
            Ok(())
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes pretty JSON to `out`, or to stdout.
fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => write(p, &text),
        None => Ok(io::stdout().write_all(text.as_bytes())?),
    }
}

fn report_run(outcome: &Outcome, stats: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    println!(
        "s {}",
        match outcome {
            Outcome::Sat => "SATISFIABLE",
            Outcome::Unsat => "UNSATISFIABLE",
        }
    );
    match out {
        Some(p) => write(p, &(serde_json::to_string_pretty(stats)? + "\n")),
        None => {
            eprintln!("{}", serde_json::to_string(stats)?);
            Ok(())
        }
    }
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let data = generate_dataset(a.n_min, a.n_max, a.count, a.ratio_min, a.ratio_max, a.seed)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut entries = Vec::with_capacity(data.len());
    for inst in &data {
        let file = format!("{:05}.cnf", inst.index);
        write(&a.out_dir.join(&file), &write_dimacs(&inst.formula))?;
        entries.push(json!({
            "file": file,
            "seed": inst.spec.seed,
            "num_vars": inst.formula.num_vars(),
            "num_clauses": inst.formula.num_clauses(),
            "planted": inst.planted.lits().map(Lit::value).collect::<Vec<_>>(),
        }));
    }
    let manifest = json!({
        "generator": "planted-3sat",
        "prng": "ChaCha8Rng::seed_from_u64(base_seed + i)",
        "seed": a.seed,
        "n_min": a.n_min,
        "n_max": a.n_max,
        "ratio_min": a.ratio_min,
        "ratio_max": a.ratio_max,
        "instances": entries,
    });
    emit(&manifest, Some(&a.out_dir.join("manifest.json")))
}

fn load_expert(path: &Path) -> Result<KeyTrace> {
    Ok(KeyTrace::parse(&read(path)?).with_context(|| format!("reading {}", path.display()))?.1)
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let f = read_dimacs_file(&a.cnf)?;
    let cfg = SolverConfig::default().with_seed(a.seed);
    let timeout = a.timeout_ms.map_or(DEFAULT_TIMEOUT, Duration::from_millis);
    let mut policy: Box<dyn BranchingPolicy> = match a.policy.split_once(':') {
        _ if a.policy == "vsids" => Box::new(NoPolicy),
        Some(("expert", path)) => Box::new(expert_policy(&load_expert(Path::new(path))?)),
        Some(("bc", path)) => Box::new(bc_policy(Arc::new(BcModel::load(Path::new(path))?))),
        Some(("extern", cmd)) => Box::new(extern_policy(cmd, timeout)?),
        _ => bail!("unknown policy `{}`", a.policy),
    };
    let total = match (a.budget, a.policy.as_str()) {
        (Some(b), _) => b,
        (None, "vsids") => 0,
        (None, _) => u64::MAX,
    };
    let r = solve_with::<f64>(&f, &cfg, policy.as_mut(), Budget::new(total, a.schedule));
    report_run(&r.stats.outcome, &r.stats.to_json(), a.stats_out.as_deref())?;
    if a.model {
        if let Some(m) = &r.stats.model {
            let lits: Vec<String> = m.lits().map(|l| l.value().to_string()).collect();
            println!("v {} 0", lits.join(" "));
        }
    }
    if let Some(p) = a.trail_out {
        write(&p, &r.trail.to_text())?;
    }
    Ok(())
}

fn cmd_probes(dir: &Path, out: &Path, seed: u64) -> Result<()> {
    let data = load_dataset(dir)?;
    let cfg = SolverConfig::default().with_seed(seed);
    let mut w = BufWriter::new(fs::File::create(out).with_context(|| format!("creating {}", out.display()))?);
    let mut count = 0;
    for inst in &data {
        let r = solve(&inst.formula, &cfg);
        let path = dir.join(format!("{}.cnf", inst.id));
        for p in harvest_probes(&inst.formula, &r.trail) {
            let line = json!({
                "cnf_path": path,
                "num_vars": inst.formula.num_vars(),
                "prefix_tokens": serialize(&p.formula, &p.prefix)?.to_text(),
                "target": p.target.value(),
                "verdict": r.stats.outcome,
            });
            writeln!(w, "{line}")?;
            count += 1;
        }
    }
    w.flush()?;
    eprintln!("{count} probes from {} instances", data.len());
    Ok(())
}

/// Reads probes back; formulas from the same file share one allocation.
fn load_probes(path: &Path) -> Result<Vec<ProbeSample>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut formulas = HashMap::new();
    let mut probes = Vec::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = || format!("{}:{}", path.display(), i + 1);
        let v: serde_json::Value = serde_json::from_str(&line).with_context(ctx)?;
        let n = v["num_vars"].as_u64().with_context(ctx)? as u32;
        let tokens = TokenStream::parse(v["prefix_tokens"].as_str().with_context(ctx)?)?;
        let (formula, prefix) = deserialize(&tokens, n).with_context(ctx)?;
        let target = v["target"].as_i64().and_then(|t| Lit::new(t as i32)).with_context(ctx)?;
        let key = v["cnf_path"].as_str().unwrap_or_default().to_string();
        let formula = Arc::clone(formulas.entry(key).or_insert_with(|| Arc::new(formula)));
        probes.push(ProbeSample { formula, prefix, target });
    }
    Ok(probes)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let probes = load_probes(&a.probes)?;
    let cfg = BcConfig {
        order: a.order,
        digest: a.digest,
        alpha: a.alpha,
        permutations_per_sample: a.perms,
        curriculum: a.curriculum,
        seed: a.seed,
    };
    let (model, report) = train_bc(&probes, &cfg)?;
    model.save(&a.out)?;
    eprintln!(
        "{} samples, {} contexts, nll {:.4}, top-1 accuracy {:.4}",
        report.samples,
        model.num_contexts(),
        report.nll,
        report.accuracy
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let data = load_dataset(&a.dataset)?;
    let cfg = EvalConfig {
        budget: a.budget,
        schedule: a.schedule,
        seed: a.seed,
        workers: a.workers,
        delta: parse_rational(&a.delta)?,
        ..EvalConfig::default()
    };
    let report = run_eval(&data, &PolicySpec::parse(&a.method)?, &cfg)?;
    if let Some(p) = &a.csv {
        write(p, &report.to_csv(a.timing)?)?;
    }
    let mut summary = report.to_json();
    if a.out.is_none() {
        summary.as_object_mut().expect("report is an object").remove("per_instance");
    }
    emit(&summary, a.out.as_deref())
}

fn serve_policy(spec: &str) -> Result<Box<dyn BranchingPolicy>> {
    Ok(match spec.split_once(':') {
        _ if spec == "vsids" => Box::new(NoPolicy),
        Some(("expert", path)) => Box::new(expert_policy(&load_expert(Path::new(path))?)),
        Some(("bc", path)) => Box::new(bc_policy(Arc::new(BcModel::load(Path::new(path))?))),
        _ => bail!("unknown policy `{spec}`"),
    })
}
