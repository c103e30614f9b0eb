//! Batch runner: every instance goes through a fresh child process so a
//! crash, hang, or allocator blowup in one run cannot touch the others.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;
use std::time::{Duration, Instant};

use clap::Args;
use serde::Serialize;

use crate::{append_jsonl, InstanceReport, RunOpts, EXIT_CRASH};

#[derive(Args, Clone)]
pub struct SuiteArgs {
    /// Directory scanned (recursively) for .smt2 and .dl files.
    pub dir: PathBuf,

    /// Instances solved concurrently.
    #[arg(long, default_value_t = 1, value_name = "J")]
    pub jobs: usize,

    /// Runs per instance (seeds seed..seed+N-1); the best one is kept.
    #[arg(long, default_value_t = 3, value_name = "N")]
    pub repeats: usize,

    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Serialize)]
struct Summary {
    total: usize,
    safe: usize,
    r#unsafe: usize,
    percentage: f64,
    avg_t: f64,
    avg_t_solved: f64,
}

pub fn cmd_suite(args: &SuiteArgs) -> u8 {
    let mut instances = Vec::new();
    if let Err(e) = collect_instances(&args.dir, &mut instances) {
        eprintln!("chc: cannot scan {}: {e}", args.dir.display());
        return EXIT_CRASH;
    }
    instances.sort();
    if instances.is_empty() {
        eprintln!("chc: no .smt2 or .dl instances under {}", args.dir.display());
        return EXIT_CRASH;
    }
    let exe = match std::env::current_exe() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("chc: cannot locate own binary: {e}");
            return EXIT_CRASH;
        }
    };

    let n = instances.len();
    let jobs = args.jobs.max(1).min(n);
    let next = Arc::new(AtomicUsize::new(0));
    let (tx, rx) = mpsc::channel::<(usize, InstanceReport)>();
    thread::scope(|scope| {
        for _ in 0..jobs {
            let next = Arc::clone(&next);
            let tx = tx.clone();
            let instances = &instances;
            let exe = &exe;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= instances.len() {
                    break;
                }
                let report = run_instance(exe, &instances[i], args);
                if tx.send((i, report)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut reports: Vec<Option<InstanceReport>> = (0..n).map(|_| None).collect();
        let mut done = 0usize;
        while let Ok((i, report)) = rx.recv() {
            done += 1;
            let outcome = match report.reason.as_deref() {
                Some(r) => format!("{} ({r})", report.verdict),
                None => report.verdict.clone(),
            };
            eprintln!(
                "[{done}/{n}] {} {} {:.2}s",
                report.path, outcome, report.wall_time_s
            );
            reports[i] = Some(report);
        }
        let reports: Vec<InstanceReport> = reports.into_iter().flatten().collect();

        let summary = summarize(&reports, args.run.timeout);
        if let Some(path) = &args.run.stats {
            if let Err(e) = write_stats(path, &reports, &summary) {
                eprintln!("chc: cannot write stats to {}: {e}", path.display());
            }
        }
        println!("#total {}", summary.total);
        println!("#safe {}", summary.safe);
        println!("#unsafe {}", summary.r#unsafe);
        println!("percentage {:.1}", summary.percentage);
        println!("avg-T {:.2}", summary.avg_t);
        println!("avg-T-solved {:.2}", summary.avg_t_solved);
    });
    0
}

fn collect_instances(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_instances(&path, out)?;
        } else if matches!(
            path.extension().and_then(|e| e.to_str()),
            Some("smt2") | Some("dl")
        ) {
            out.push(path);
        }
    }
    Ok(())
}

/// Solve one instance `repeats` times varying only the seed; keep the best
/// run (solved beats unknown, then smallest wall time).
fn run_instance(exe: &Path, path: &Path, args: &SuiteArgs) -> InstanceReport {
    let mut best: Option<InstanceReport> = None;
    for r in 0..args.repeats.max(1) as u64 {
        let report = run_child(exe, path, &args.run, args.run.seed + r);
        let better = match &best {
            None => true,
            Some(b) => match (solved(&report), solved(b)) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => report.wall_time_s < b.wall_time_s,
                (false, false) => false,
            },
        };
        if better {
            best = Some(report);
        }
    }
    best.expect("at least one repeat")
}

fn solved(r: &InstanceReport) -> bool {
    r.verdict == "sat" || r.verdict == "unsat"
}

static CHILD_ID: AtomicUsize = AtomicUsize::new(0);

fn run_child(exe: &Path, path: &Path, run: &RunOpts, seed: u64) -> InstanceReport {
    let crash = |reason: String, wall: f64| InstanceReport {
        path: path.display().to_string(),
        verdict: "unknown".into(),
        reason: Some(reason),
        wall_time_s: wall,
        iterations: 0,
        counterexamples: 0,
        strategy_used: String::new(),
        verified: false,
        seed,
    };

    let tmp = std::env::temp_dir().join(format!(
        "chc-suite-{}-{}.jsonl",
        std::process::id(),
        CHILD_ID.fetch_add(1, Ordering::SeqCst)
    ));
    let _ = fs::remove_file(&tmp);

    let mut cmd = Command::new(exe);
    cmd.arg("solve")
        .arg(path)
        .args(run.child_args(seed))
        .arg("--stats")
        .arg(&tmp)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::null());
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return crash(format!("spawn failed: {e}"), 0.0),
    };

    // The child enforces the budget itself; the hard deadline here only
    // catches a wedged process.
    let start = Instant::now();
    let deadline = Duration::from_secs_f64(run.timeout.max(1.0) * 2.0 + 10.0);
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) => {
                if start.elapsed() > deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                thread::sleep(Duration::from_millis(20));
            }
            Err(e) => {
                let _ = child.kill();
                let _ = child.wait();
                let _ = fs::remove_file(&tmp);
                return crash(format!("wait failed: {e}"), start.elapsed().as_secs_f64());
            }
        }
    };

    let report = fs::read_to_string(&tmp)
        .ok()
        .and_then(|text| {
            text.lines()
                .rev()
                .find_map(|l| serde_json::from_str::<InstanceReport>(l).ok())
        })
        .unwrap_or_else(|| match status {
            Some(s) => crash(format!("crash: {s}"), start.elapsed().as_secs_f64()),
            None => crash("hard kill: process wedged".into(), run.timeout),
        });
    let _ = fs::remove_file(&tmp);
    report
}

/// `total`/`safe`/`unsafe` count solved instances; `avg_t` averages over all
/// instances with unsolved ones charged the full budget, `avg_t_solved` over
/// solved ones alone.
fn summarize(reports: &[InstanceReport], timeout: f64) -> Summary {
    let safe = reports.iter().filter(|r| r.verdict == "sat").count();
    let uns = reports.iter().filter(|r| r.verdict == "unsat").count();
    let total = safe + uns;
    let all_t: f64 = reports
        .iter()
        .map(|r| if solved(r) { r.wall_time_s } else { timeout })
        .sum();
    let solved_t: f64 = reports
        .iter()
        .filter(|r| solved(r))
        .map(|r| r.wall_time_s)
        .sum();
    Summary {
        total,
        safe,
        r#unsafe: uns,
        percentage: if reports.is_empty() {
            0.0
        } else {
            100.0 * total as f64 / reports.len() as f64
        },
        avg_t: if reports.is_empty() {
            0.0
        } else {
            all_t / reports.len() as f64
        },
        avg_t_solved: if total == 0 { 0.0 } else { solved_t / total as f64 },
    }
}

fn write_stats(
    path: &Path,
    reports: &[InstanceReport],
    summary: &Summary,
) -> std::io::Result<()> {
    for r in reports {
        append_jsonl(path, &serde_json::to_string(r).expect("report serializes"))?;
    }
    let line = format!(
        "{{\"summary\":{}}}",
        serde_json::to_string(summary).expect("summary serializes")
    );
    append_jsonl(path, &line)?;
    // One flush at the end so a watcher never sees a torn summary line.
    fs::OpenOptions::new().append(true).open(path)?.flush()
}
