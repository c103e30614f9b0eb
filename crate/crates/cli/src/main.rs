//! Command-line driver: solve a single instance or run a directory of them
//! in isolated worker processes.

mod suite;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use chc_core::chc::{normalize, ChcSystem};
use chc_core::dataset::Mode;
use chc_core::engine::{
    check_hypothesis, replay_witness, solve, CheckOutcome, EngineConfig, Interpretation,
    Scheduler, StrategyKind, Verdict,
};
use chc_core::learner::svm::SvmConfig;
use chc_core::parse::{parse_str, Format};
use chc_core::reasoner::ReasonerOptions;
use chc_core::smt::{Smt, SmtOptions};

/// Exit statuses: 0 solved, 1 crash (bad input, internal failure), 2 unknown
/// because the budget ran out, 3 unknown for any other reason.
pub const EXIT_SOLVED: u8 = 0;
pub const EXIT_CRASH: u8 = 1;
pub const EXIT_TIMEOUT: u8 = 2;
pub const EXIT_UNKNOWN: u8 = 3;

#[derive(Parser)]
#[command(name = "chc", version, about = "Constrained Horn clause solver")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one instance and print sat/unsat/unknown on stdout.
    Solve(SolveArgs),
    /// Solve every instance under a directory, one process per run.
    Suite(suite::SuiteArgs),
}

#[derive(Args, Clone)]
pub struct SolveArgs {
    /// Input file.
    pub file: PathBuf,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum FormatOpt {
    Auto,
    Smt2,
    Datalog,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum StrategyOpt {
    S,
    L,
    Lu,
    Sl,
    Slu,
}

impl StrategyOpt {
    fn kind(self) -> StrategyKind {
        match self {
            StrategyOpt::S => StrategyKind::S,
            StrategyOpt::L => StrategyKind::L,
            StrategyOpt::Lu => StrategyKind::Lu,
            StrategyOpt::Sl => StrategyKind::Sl,
            StrategyOpt::Slu => StrategyKind::Slu,
        }
    }
}

/// Options shared by `solve` and (forwarded to child processes by) `suite`.
#[derive(Args, Clone)]
pub struct RunOpts {
    /// Input dialect; auto picks by command names.
    #[arg(long, value_enum, default_value_t = FormatOpt::Auto)]
    pub format: FormatOpt,

    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 360.0)]
    pub timeout: f64,

    /// Initial hypothesis strategy.
    #[arg(long, value_enum, default_value_t = StrategyOpt::Slu)]
    pub strategy: StrategyOpt,

    /// Rotate to the next strategy after K learner rounds without new
    /// firm samples.
    #[arg(long, value_name = "K")]
    pub rotate_on_stall: Option<usize>,

    /// Disable safe-zone expansion.
    #[arg(long)]
    pub no_safe_zone: bool,

    /// Disable unsafe-zone expansion.
    #[arg(long)]
    pub no_unsafe_zone: bool,

    /// Run on zones alone, without the learner.
    #[arg(long)]
    pub no_learner: bool,

    /// Keep at most A positive and B negative samples per predicate,
    /// evicting the oldest.
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub queue: Option<Vec<usize>>,

    /// Zone expansion rounds before learning starts.
    #[arg(long, default_value_t = 3, value_name = "N")]
    pub expand_rounds: usize,

    /// Skip expansion through clauses whose body constraint has more than
    /// this many nodes.
    #[arg(long, default_value_t = 500, value_name = "N")]
    pub body_skip: usize,

    /// Freeze a zone once its formula would exceed this many nodes.
    #[arg(long, default_value_t = 1500, value_name = "N")]
    pub zone_stop: usize,

    /// Soft-margin penalty for the SVM.
    #[arg(long, default_value_t = 1.0, value_name = "C")]
    pub svm_c: f64,

    /// Largest absolute coefficient allowed in learned hyperplanes.
    #[arg(long, default_value_t = 10, value_name = "N")]
    pub coef_cap: i64,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Skip independent re-verification of the final answer.
    #[arg(long)]
    pub no_verify: bool,

    /// Append a JSONL report to this file.
    #[arg(long, value_name = "FILE")]
    pub stats: Option<PathBuf>,
}

impl RunOpts {
    pub fn engine_config(&self, seed: u64) -> EngineConfig {
        EngineConfig {
            strategy: self.strategy.kind(),
            scheduler: match self.rotate_on_stall {
                Some(k) => Scheduler::RotateOnStall(k.max(1)),
                None => Scheduler::Fixed,
            },
            no_learner: self.no_learner,
            reasoner: ReasonerOptions {
                body_skip: self.body_skip,
                zone_stop: self.zone_stop,
                safe_enabled: !self.no_safe_zone,
                unsafe_enabled: !self.no_unsafe_zone,
            },
            expand_rounds: self.expand_rounds,
            mode: match self.queue.as_deref() {
                Some([a, b]) => Mode::Queue { a: *a, b: *b },
                _ => Mode::Accumulate,
            },
            svm: SvmConfig {
                c_penalty: self.svm_c,
                coef_cap: self.coef_cap,
                ..SvmConfig::default()
            },
            seed,
            timeout: Duration::from_secs_f64(self.timeout.max(0.0)),
            ..EngineConfig::default()
        }
    }

    fn format(&self) -> Format {
        match self.format {
            FormatOpt::Auto => Format::Auto,
            FormatOpt::Smt2 => Format::Smt2,
            FormatOpt::Datalog => Format::Datalog,
        }
    }

    /// Rebuild the flag list for a child process, overriding the seed.
    pub fn child_args(&self, seed: u64) -> Vec<String> {
        let mut a = Vec::new();
        match self.format {
            FormatOpt::Auto => {}
            FormatOpt::Smt2 => a.extend(["--format".into(), "smt2".into()]),
            FormatOpt::Datalog => a.extend(["--format".into(), "datalog".into()]),
        }
        a.extend(["--timeout".into(), self.timeout.to_string()]);
        let strat = match self.strategy {
            StrategyOpt::S => "s",
            StrategyOpt::L => "l",
            StrategyOpt::Lu => "lu",
            StrategyOpt::Sl => "sl",
            StrategyOpt::Slu => "slu",
        };
        a.extend(["--strategy".into(), strat.into()]);
        if let Some(k) = self.rotate_on_stall {
            a.extend(["--rotate-on-stall".into(), k.to_string()]);
        }
        if self.no_safe_zone {
            a.push("--no-safe-zone".into());
        }
        if self.no_unsafe_zone {
            a.push("--no-unsafe-zone".into());
        }
        if self.no_learner {
            a.push("--no-learner".into());
        }
        if let Some([qa, qb]) = self.queue.as_deref() {
            a.extend(["--queue".into(), qa.to_string(), qb.to_string()]);
        }
        a.extend(["--expand-rounds".into(), self.expand_rounds.to_string()]);
        a.extend(["--body-skip".into(), self.body_skip.to_string()]);
        a.extend(["--zone-stop".into(), self.zone_stop.to_string()]);
        a.extend(["--svm-c".into(), self.svm_c.to_string()]);
        a.extend(["--coef-cap".into(), self.coef_cap.to_string()]);
        a.extend(["--seed".into(), seed.to_string()]);
        if self.no_verify {
            a.push("--no-verify".into());
        }
        a
    }
}

/// One line of the JSONL stats stream.
#[derive(Serialize, Deserialize, Clone, Debug)]
pub struct InstanceReport {
    pub path: String,
    pub verdict: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub wall_time_s: f64,
    pub iterations: usize,
    pub counterexamples: usize,
    pub strategy_used: String,
    pub verified: bool,
    pub seed: u64,
}

pub const STATS_HEADER: &str = "{\"format\":\"chc-stats\",\"version\":1}";

/// Append `line` to a JSONL file, writing the version header first when the
/// file is new or empty.
pub fn append_jsonl(path: &std::path::Path, line: &str) -> std::io::Result<()> {
    use std::io::Write;
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{STATS_HEADER}")?;
    }
    writeln!(f, "{line}")
}

fn emit_report(opts: &RunOpts, report: &InstanceReport) {
    if let Some(path) = &opts.stats {
        let line = serde_json::to_string(report).expect("report serializes");
        if let Err(e) = append_jsonl(path, &line) {
            eprintln!("chc: cannot write stats to {}: {e}", path.display());
        }
    }
}

fn print_model(sys: &ChcSystem, interp: &Interpretation) {
    for p in &sys.predicates {
        let args = p
            .arg_sorts
            .iter()
            .enumerate()
            .map(|(i, s)| format!("(v{i} {s})"))
            .collect::<Vec<_>>()
            .join(" ");
        let body = interp
            .get(p)
            .cloned()
            .unwrap_or_else(chc_core::expr::Expr::tt);
        println!("(define-fun {} ({}) Bool {})", p.name, args, body);
    }
}

fn cmd_solve(args: &SolveArgs) -> u8 {
    let opts = &args.run;
    let path = args.file.display().to_string();
    let mut report = InstanceReport {
        path: path.clone(),
        verdict: "unknown".into(),
        reason: None,
        wall_time_s: 0.0,
        iterations: 0,
        counterexamples: 0,
        strategy_used: String::new(),
        verified: false,
        seed: opts.seed,
    };

    macro_rules! crash {
        ($($msg:tt)*) => {{
            let msg = format!($($msg)*);
            eprintln!("chc: {msg}");
            println!("unknown {msg}");
            report.reason = Some(msg);
            emit_report(opts, &report);
            return EXIT_CRASH;
        }};
    }

    let src = match fs::read_to_string(&args.file) {
        Ok(s) => s,
        Err(e) => crash!("cannot read {path}: {e}"),
    };
    let sys = match parse_str(&src, opts.format()) {
        Ok(s) => s,
        Err(e) => crash!("parse error: {e}"),
    };
    let norm = normalize(&sys);
    let cfg = opts.engine_config(opts.seed);

    let start = Instant::now();
    let res = solve(&norm, &cfg);
    report.wall_time_s = start.elapsed().as_secs_f64();
    report.iterations = res.stats.iterations;
    report.counterexamples = res.stats.counterexamples;
    report.strategy_used = res.stats.strategy_used.clone();

    if !opts.no_verify {
        match &res.verdict {
            Verdict::Sat(interp) => {
                let smt = Smt::new(&SmtOptions {
                    timeout_ms: cfg.smt_timeout_ms,
                    seed: cfg.seed,
                });
                match check_hypothesis(&sys, interp, &smt) {
                    CheckOutcome::Ok => report.verified = true,
                    CheckOutcome::Failing(ci, _) => {
                        crash!("internal: reported model violates clause {ci}")
                    }
                    CheckOutcome::Undecided(ci, why) => {
                        crash!("internal: could not re-verify clause {ci}: {why}")
                    }
                }
            }
            Verdict::Unsat(w) => {
                if replay_witness(w) {
                    report.verified = true;
                } else {
                    crash!("internal: unsat witness does not replay")
                }
            }
            Verdict::Unknown(_) => {}
        }
    }

    let code = match &res.verdict {
        Verdict::Sat(interp) => {
            report.verdict = "sat".into();
            println!("sat");
            print_model(&sys, interp);
            EXIT_SOLVED
        }
        Verdict::Unsat(_) => {
            report.verdict = "unsat".into();
            println!("unsat");
            EXIT_SOLVED
        }
        Verdict::Unknown(reason) => {
            let reason = reason.replace('\n', " ");
            println!("unknown {reason}");
            report.reason = Some(reason.clone());
            if reason == "timeout" {
                EXIT_TIMEOUT
            } else {
                EXIT_UNKNOWN
            }
        }
    };
    emit_report(opts, &report);
    code
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match &cli.cmd {
        Cmd::Solve(args) => cmd_solve(args),
        Cmd::Suite(args) => suite::cmd_suite(args),
    };
    ExitCode::from(code)
}
