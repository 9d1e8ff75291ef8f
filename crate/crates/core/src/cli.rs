//! The `vclock` command line.
//!
//! Exit status: 0 on success, 1 when an assertion or equivalence check
//! fails, 2 for usage and parse errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::clock::{ActorId, FixedClock, PruneBounds, Timestamp, VClock};
use crate::codec::{self, peano};
use crate::oracle::{self, CheckSummary};
use crate::simulator::{run_scenario, RunOptions, Scenario, WriteMode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// A wall-clock timestamp in seconds; the bench extrapolates its unary size.
pub const REFERENCE_TIMESTAMP: u64 = 1_390_525_760;

#[derive(Debug, Parser)]
#[command(
    name = "vclock",
    version,
    about = "Vector clock algebra, replica scenarios and causality checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Apply one clock operation to clocks in canonical text form
    Clock {
        #[command(subcommand)]
        op: ClockOp,
    },
    /// Run a scenario script against the replica simulator
    Run {
        scenario: PathBuf,
        /// Keep other replicas' siblings on update instead of superseding them
        #[arg(long)]
        no_collapse: bool,
        /// Also write the report to this file
        #[arg(long, value_name = "PATH")]
        report: Option<PathBuf>,
    },
    /// Check clocks against graph happened-before
    Check(CheckArgs),
    /// Measure unary numeral encoding cost
    PeanoBench { max_n: u64 },
}

#[derive(Debug, Subcommand)]
enum ClockOp {
    /// Print Equal, Descends, Dominated or Concurrent
    Compare { left: String, right: String },
    /// Print the merged clock
    Merge { left: String, right: String },
    /// Print whether LEFT descends RIGHT
    Descends { left: String, right: String },
    /// Increment ACTOR in CLOCK at time NOW
    Increment {
        actor: String,
        clock: String,
        #[arg(long)]
        now: String,
    },
    /// Prune CLOCK at time NOW under the given bounds
    Prune {
        clock: String,
        #[arg(long)]
        now: String,
        #[arg(long)]
        small: usize,
        #[arg(long)]
        large: usize,
        #[arg(long)]
        young: u64,
        #[arg(long)]
        old: u64,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct CheckArgs {
    /// Every history with up to EVENTS events over up to ACTORS actors
    #[arg(long, num_args = 2, value_names = ["EVENTS", "ACTORS"])]
    exhaustive: Option<Vec<usize>>,
    /// SEEDS random histories of EVENTS events over ACTORS actors
    #[arg(long, num_args = 3, value_names = ["SEEDS", "EVENTS", "ACTORS"])]
    random: Option<Vec<u64>>,
}

struct UsageError(String);

type CmdResult = Result<i32, UsageError>;

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

/// Entry point used by the binary; output goes to `out`, diagnostics to
/// `err`. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                EXIT_USAGE
            } else {
                let _ = write!(out, "{text}");
                EXIT_OK
            };
        }
    };
    let result = match cli.command {
        Cmd::Clock { op } => cmd_clock(op, out),
        Cmd::Run {
            scenario,
            no_collapse,
            report,
        } => cmd_run(&scenario, no_collapse, report.as_deref(), out),
        Cmd::Check(args) => cmd_check(args, out),
        Cmd::PeanoBench { max_n } => cmd_peano_bench(max_n, out),
    };
    match result {
        Ok(code) => code,
        Err(UsageError(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
    }
}

fn clock_arg(name: &str, text: &str) -> Result<VClock, UsageError> {
    codec::decode(text).map_err(|e| usage(format!("argument {name} ({text:?}): {e}")))
}

fn time_arg(text: &str) -> Result<Timestamp, UsageError> {
    codec::parse_natural(text)
        .map(Timestamp::from)
        .ok_or_else(|| {
            usage(format!(
                "argument --now ({text:?}): not a non-negative integer"
            ))
        })
}

fn io_error(e: std::io::Error) -> UsageError {
    usage(format!("write failed: {e}"))
}

fn cmd_clock(op: ClockOp, out: &mut dyn Write) -> CmdResult {
    let text = match op {
        ClockOp::Compare { left, right } => {
            let (l, r) = (clock_arg("LEFT", &left)?, clock_arg("RIGHT", &right)?);
            l.compare(&r).to_string()
        }
        ClockOp::Merge { left, right } => {
            let (l, r) = (clock_arg("LEFT", &left)?, clock_arg("RIGHT", &right)?);
            l.merge(&r).to_string()
        }
        ClockOp::Descends { left, right } => {
            let (l, r) = (clock_arg("LEFT", &left)?, clock_arg("RIGHT", &right)?);
            l.descends(&r).to_string()
        }
        ClockOp::Increment { actor, clock, now } => {
            let actor = ActorId::new(actor.as_str())
                .map_err(|e| usage(format!("argument ACTOR ({actor:?}): {e}")))?;
            let clock = clock_arg("CLOCK", &clock)?;
            clock
                .increment(&actor, &FixedClock(time_arg(&now)?))
                .to_string()
        }
        ClockOp::Prune {
            clock,
            now,
            small,
            large,
            young,
            old,
        } => {
            let clock = clock_arg("CLOCK", &clock)?;
            let bounds = PruneBounds::new(small, large, young, old)
                .map_err(|e| usage(format!("prune bounds: {e}")))?;
            clock.prune(&time_arg(&now)?, &bounds).to_string()
        }
    };
    writeln!(out, "{text}").map_err(io_error)?;
    Ok(EXIT_OK)
}

fn cmd_run(
    path: &std::path::Path,
    no_collapse: bool,
    report_path: Option<&std::path::Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let text = fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read scenario {}: {e}", path.display())))?;
    let scenario = Scenario::parse(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let options = RunOptions {
        write_mode: if no_collapse {
            WriteMode::Blind
        } else {
            WriteMode::Collapse
        },
    };
    let report = run_scenario(&scenario, options);
    let rendered = report.render();
    out.write_all(rendered.as_bytes()).map_err(io_error)?;
    if let Some(p) = report_path {
        fs::write(p, &rendered)
            .map_err(|e| usage(format!("cannot write report {}: {e}", p.display())))?;
    }
    Ok(if report.is_success() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn cmd_check(args: CheckArgs, out: &mut dyn Write) -> CmdResult {
    let summary = match (args.exhaustive, args.random) {
        (Some(v), None) => {
            oracle::check_exhaustive(v[0], v[1]).map_err(|e| usage(e.to_string()))?
        }
        (None, Some(v)) => {
            let (seeds, events, actors) = (v[0], v[1], v[2]);
            if actors == 0 {
                return Err(usage("--random needs at least one actor"));
            }
            let events = usize::try_from(events).map_err(|_| usage("--random EVENTS too large"))?;
            oracle::check_random(seeds, events, actors as usize)
        }
        _ => unreachable!("clap enforces exactly one mode"),
    };
    write_summary(&summary, out).map_err(io_error)?;
    Ok(if summary.is_clean() {
        EXIT_OK
    } else {
        EXIT_FAILURE
    })
}

fn write_summary(summary: &CheckSummary, out: &mut dyn Write) -> std::io::Result<()> {
    let mut current: Option<&str> = None;
    for (label, violation) in &summary.violations {
        if current != Some(label.as_str()) {
            writeln!(out, "history {label}")?;
            current = Some(label);
        }
        writeln!(out, "{violation}")?;
    }
    writeln!(
        out,
        "checked histories={} pairs={} violations={}",
        summary.histories,
        summary.pairs,
        summary.violations.len()
    )
}

/// One row of the unary numeral benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: u64,
    pub nodes: u128,
    pub encode_micros: f64,
    pub decode_micros: f64,
}

/// Sizes benchmarked for a given ceiling: 100, 1000, ... up to `max_n`.
pub fn bench_sizes(max_n: u64) -> Vec<u64> {
    std::iter::successors(Some(100u64), |n| n.checked_mul(10))
        .take_while(|&n| n <= max_n)
        .collect()
}

/// Best of `repeats` timings for building and then reading back the
/// numeral for `n`.
pub fn bench_row(n: u64, repeats: usize) -> Result<BenchRow, peano::CapacityError> {
    let mut encode = f64::INFINITY;
    let mut decode = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let numeral = peano::natural_to_peano(n)?;
        encode = encode.min(start.elapsed().as_secs_f64() * 1e6);

        let start = Instant::now();
        let back = peano::peano_to_natural(std::hint::black_box(&numeral));
        decode = decode.min(start.elapsed().as_secs_f64() * 1e6);
        assert_eq!(back, n);
    }
    Ok(BenchRow {
        n,
        nodes: peano::peano_cost(n),
        encode_micros: encode,
        decode_micros: decode,
    })
}

fn cmd_peano_bench(max_n: u64, out: &mut dyn Write) -> CmdResult {
    if max_n > peano::MATERIALIZE_LIMIT {
        return Err(usage(format!(
            "MAX_N {max_n} exceeds the materialization limit {}",
            peano::MATERIALIZE_LIMIT
        )));
    }
    writeln!(out, "n,nodes,encode_micros,decode_micros").map_err(io_error)?;
    for n in bench_sizes(max_n) {
        let row = bench_row(n, 5).map_err(|e| usage(e.to_string()))?;
        writeln!(
            out,
            "{},{},{:.3},{:.3}",
            row.n, row.nodes, row.encode_micros, row.decode_micros
        )
        .map_err(io_error)?;
    }
    let nodes = peano::peano_cost(REFERENCE_TIMESTAMP);
    writeln!(
        out,
        "# extrapolation n={REFERENCE_TIMESTAMP} nodes={nodes} heap_bytes>={}",
        nodes * peano::NODE_BYTES as u128
    )
    .map_err(io_error)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("vclock").chain(args.iter().copied());
        let code = run(argv, &mut out, &mut err);
        (
            code,
            String::from_utf8(out).unwrap(),
            String::from_utf8(err).unwrap(),
        )
    }

    #[test]
    fn clock_examples() {
        assert_eq!(
            call(&["clock", "compare", "a:1:1", "a:1:9"]),
            (0, "Equal\n".into(), String::new())
        );
        assert_eq!(
            call(&["clock", "merge", "a:2:10", "b:1:5"]).1,
            "a:2:10;b:1:5\n"
        );
        assert_eq!(call(&["clock", "descends", "-", "a:1:1"]).1, "false\n");
        assert_eq!(call(&["clock", "descends", "a:1:1", "-"]).1, "true\n");
        assert_eq!(
            call(&["clock", "increment", "b", "a:2:105", "--now", "106"]).1,
            "a:2:105;b:1:106\n"
        );
        assert_eq!(
            call(&[
                "clock",
                "prune",
                "a:1:1;b:1:5;c:1:9",
                "--now",
                "10",
                "--small",
                "1",
                "--large",
                "1",
                "--young",
                "0",
                "--old",
                "100"
            ])
            .1,
            "c:1:9\n"
        );
    }

    #[test]
    fn clock_parse_errors_name_the_argument() {
        let (code, out, err) = call(&["clock", "compare", "a:1:1", "a:x:1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(out.is_empty());
        assert!(err.contains("argument RIGHT"), "{err}");
        let (code, _, err) = call(&["clock", "increment", "a b", "-", "--now", "1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("argument ACTOR"), "{err}");
        let (code, _, err) = call(&["clock", "increment", "a", "-", "--now", "-1"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("--now"), "{err}");
        let (code, _, _) = call(&[
            "clock", "prune", "-", "--now", "1", "--small", "3", "--large", "1", "--young", "0",
            "--old", "0",
        ]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(call(&[]).0, EXIT_USAGE);
        assert_eq!(call(&["frob"]).0, EXIT_USAGE);
        assert_eq!(call(&["check"]).0, EXIT_USAGE);
        assert_eq!(
            call(&["check", "--exhaustive", "2", "2", "--random", "1", "1", "1"]).0,
            EXIT_USAGE
        );
        assert_eq!(call(&["--help"]).0, EXIT_OK);
    }

    #[test]
    fn check_modes() {
        let (code, out, _) = call(&["check", "--exhaustive", "3", "2"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.ends_with("violations=0\n"), "{out}");
        let (code, _, err) = call(&["check", "--exhaustive", "20", "5"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("budget"), "{err}");
        assert_eq!(call(&["check", "--random", "5", "20", "3"]).0, EXIT_OK);
        assert_eq!(call(&["check", "--random", "5", "20", "0"]).0, EXIT_USAGE);
    }

    #[test]
    fn peano_bench_zero_is_header_and_extrapolation() {
        let (code, out, _) = call(&["peano-bench", "0"]);
        assert_eq!(code, EXIT_OK);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], "n,nodes,encode_micros,decode_micros");
        assert!(lines[1].starts_with("# extrapolation n=1390525760 nodes=1390525761 "));
        assert_eq!(call(&["peano-bench", "10000001"]).0, EXIT_USAGE);
    }

    #[test]
    fn sizes() {
        assert!(bench_sizes(99).is_empty());
        assert_eq!(bench_sizes(10_000), vec![100, 1000, 10_000]);
        assert_eq!(bench_sizes(u64::MAX).len(), 18);
    }
}
