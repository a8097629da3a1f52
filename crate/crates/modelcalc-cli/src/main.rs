//! Command-line front end for running accuracy experiments.
//!
//! Three subcommands:
//!
//! - `modelcalc run <configs…>` parses experiment configs, builds the model
//!   trees, measures errors against the certified bounds, prints one verdict
//!   line per check, and writes CSV/JSON reports.
//! - `modelcalc counterexamples` rebuilds the classical divergence
//!   constructions (what happens when a hypothesis is dropped) and reports
//!   their error growth.
//! - `modelcalc selftest` cross-checks every catalogue function — and a set
//!   of combined ones — against finite differences, then runs a small
//!   invariant suite end to end.
//!
//! Exit status: 0 when everything passed, 1 when any check failed or any
//! expected divergence was absent, 2 for configuration or I/O problems.
//! Reports land in `--out`, else `$MODELCALC_OUT`, else `./reports`; file
//! contents are bitwise deterministic for a given config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modelcalc::{
    combine_oracles, finite_difference_check, halton_points, oracle_by_name, parse_config,
    run_counterexamples, run_experiment, write_reports, CheckOutcome, CombineKind, Config,
    ExperimentResult, Point, SmoothOracle,
};

#[derive(Parser)]
#[command(
    name = "modelcalc",
    version,
    about = "Build model-class trees, derive error bounds, and verify them empirically"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiment configs and write CSV/JSON reports.
    Run {
        /// Experiment config files.
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Report directory (default: $MODELCALC_OUT, else ./reports).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the grid point count of every config.
        #[arg(long)]
        grid_count: Option<usize>,
        /// Override the master seed of every config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rebuild the divergence counterexamples and report their error growth.
    Counterexamples {
        /// Report directory (default: $MODELCALC_OUT, else ./reports).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the catalogue against finite differences and run the
    /// built-in invariant suite.
    Selftest,
}

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            configs,
            out,
            grid_count,
            seed,
        } => cmd_run(&configs, out, grid_count, seed),
        Command::Counterexamples { out } => cmd_counterexamples(out),
        Command::Selftest => cmd_selftest(),
    };
    ExitCode::from(code)
}

fn resolve_out(out: Option<PathBuf>) -> PathBuf {
    out.or_else(|| std::env::var_os("MODELCALC_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("reports"))
}

fn outcome_line(name: &str, o: &CheckOutcome) -> String {
    let mut line = format!("{name} {}/{} {}", o.level, o.locality, o.verdict);
    if !o.ok && o.verdict == modelcalc::Verdict::PreconditionFailed {
        line.push_str(" (unexpected)");
    }
    if !o.rule.is_empty() {
        line.push_str(&format!(" rule={}", o.rule));
    }
    if let (Some(order), Some(constant)) = (o.claimed_order, o.constant) {
        line.push_str(&format!(" order={order} constant={constant}"));
    }
    if let Some(slope) = o.slope {
        line.push_str(&format!(" slope={slope:.3}"));
    }
    if o.exact {
        line.push_str(" exact");
    }
    if let Some(msg) = &o.message {
        line.push_str(&format!(" — {msg}"));
    }
    line
}

fn load_config(path: &Path, grid_count: Option<usize>, seed: Option<u64>) -> Result<Config, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    let mut cfg = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(n) = grid_count {
        cfg.grid.count = n;
        cfg.grid
            .to_grid()
            .map_err(|e| format!("{}: --grid-count {n}: {e}", path.display()))?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn cmd_run(
    configs: &[PathBuf],
    out: Option<PathBuf>,
    grid_count: Option<usize>,
    seed: Option<u64>,
) -> u8 {
    let out_dir = resolve_out(out);
    let mut results: Vec<ExperimentResult> = Vec::new();
    for path in configs {
        let cfg = match load_config(path, grid_count, seed) {
            Ok(cfg) => cfg,
            Err(msg) => {
                eprintln!("error: {msg}");
                return EXIT_CONFIG;
            }
        };
        match run_experiment(&cfg) {
            Ok(result) => results.push(result),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_CONFIG;
            }
        }
    }
    let mut all_pass = true;
    for result in &results {
        match write_reports(result, &out_dir) {
            Ok(pass) => all_pass &= pass,
            Err(e) => {
                eprintln!("error: writing reports for '{}': {e}", result.name);
                return EXIT_CONFIG;
            }
        }
        for o in &result.outcomes {
            println!("{}", outcome_line(&result.name, o));
        }
    }
    let total: usize = results.iter().map(|r| r.outcomes.len()).sum();
    let passed: usize = results
        .iter()
        .map(|r| r.outcomes.iter().filter(|o| o.ok).count())
        .sum();
    println!(
        "{passed}/{total} checks passed across {} experiment(s); reports in {}",
        results.len(),
        out_dir.display()
    );
    if all_pass {
        0
    } else {
        EXIT_FAIL
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| std::io::Error::other("invalid report path"))?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn cmd_counterexamples(out: Option<PathBuf>) -> u8 {
    let out_dir = resolve_out(out);
    let report = match run_counterexamples() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!("error: creating {}: {e}", out_dir.display());
        return EXIT_CONFIG;
    }
    let mut cases = Vec::new();
    for case in &report.cases {
        let path = out_dir.join(format!("{}.{}.csv", case.name, case.level));
        let mut text = String::from("delta,measured_error\n");
        for p in &case.series.points {
            text.push_str(&format!("{},{}\n", p.delta, p.error));
        }
        if let Err(e) = write_atomic(&path, text.as_bytes()) {
            eprintln!("error: writing {}: {e}", path.display());
            return EXIT_CONFIG;
        }
        let ratios: Vec<String> = case.halving_ratios.iter().map(|r| format!("{r:.2}")).collect();
        println!(
            "{} [{}] {} — error ratios per halving: {}{}",
            case.name,
            case.level,
            if case.diverges { "DIVERGES" } else { "UNEXPECTEDLY BOUNDED" },
            ratios.join(", "),
            case.spot
                .map(|(d, e)| format!("; spot check: error {e} at radius {d}"))
                .unwrap_or_default()
        );
        cases.push(serde_json::json!({
            "name": case.name,
            "level": case.level.to_string(),
            "diverges": case.diverges,
            "halving_ratios": case.halving_ratios,
            "spot": case.spot.map(|(d, e)| serde_json::json!([d, e])),
        }));
    }
    let summary = serde_json::json!({ "pass": report.pass, "cases": cases });
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    text.push('\n');
    if let Err(e) = write_atomic(&out_dir.join("counterexamples.summary.json"), text.as_bytes()) {
        eprintln!("error: writing summary: {e}");
        return EXIT_CONFIG;
    }
    if report.pass {
        println!("all constructions diverge once their hypothesis is dropped");
        0
    } else {
        EXIT_FAIL
    }
}

/// Ten deterministic low-discrepancy probe points in `[-0.5, 0.5]^d`.
fn probe_points(dim: usize) -> Vec<Point> {
    halton_points(dim, 10)
        .into_iter()
        .map(|p| p.map(|c| c - 0.5))
        .collect()
}

fn combined_selftest_oracles() -> Vec<SmoothOracle> {
    let get = |name: &str| oracle_by_name(name).expect("catalogue name");
    let mut combos = Vec::new();
    let mut push = |kind, parts: Vec<SmoothOracle>| {
        combos.push(combine_oracles(kind, &parts).expect("selftest combination is well-formed"));
    };
    push(CombineKind::Product, vec![get("quad1"), get("sincos1")]);
    push(
        CombineKind::Product,
        vec![get("exp2"), get("sincos2"), get("affine2")],
    );
    push(CombineKind::Quotient, vec![get("sincos1"), get("pos1")]);
    push(CombineKind::Quotient, vec![get("quad2"), get("pos2")]);
    push(CombineKind::Power(3), vec![get("sincos1")]);
    push(CombineKind::Composition, vec![get("linmap2"), get("sincos2")]);
    push(CombineKind::Composition, vec![get("curve2"), get("exp2")]);
    combos
}

const INVARIANT_CONFIGS: [&str; 3] = [
    "name selftest-exact-product\n\
     base 0.25\n\
     delta_bar 0.125\n\
     tree (product (leaf quad1 exact) (leaf sincos1 exact))\n\
     check function at expect exact\n\
     check function near expect exact\n\
     check gradient near expect exact\n\
     check hessian near expect exact\n",
    "name selftest-recentered-leaf\n\
     base 0.4\n\
     delta_bar 0.125\n\
     tree (shift (leaf sincos1 (synthetic (function 1 0.5 near) (gradient 1 0.5 near))))\n\
     check function at expect exact\n\
     check gradient near expect 1\n",
    "name selftest-synthetic-product\n\
     base 0.3\n\
     delta_bar 0.125\n\
     tree (product\n\
       (leaf sincos1 (synthetic (function 1 1.0 near)))\n\
       (leaf exp1 (synthetic (function 2 1.0 near))))\n\
     check function near expect 1\n\
     check function at expect 1\n",
];

fn cmd_selftest() -> u8 {
    let mut failures = 0usize;
    let mut total = 0usize;

    let mut oracles = modelcalc::make_test_suite();
    oracles.extend(combined_selftest_oracles());
    for oracle in &oracles {
        total += 1;
        let points = probe_points(oracle.dim_in);
        match finite_difference_check(oracle, &points) {
            Ok(r) if r.pass => println!(
                "fd {} ok (worst gradient {:.2e}, worst hessian {:.2e})",
                oracle.name, r.worst_gradient, r.worst_hessian
            ),
            Ok(r) => {
                failures += 1;
                println!("fd {} FAILED: {}", oracle.name, r.failures.join("; "));
            }
            Err(e) => {
                failures += 1;
                println!("fd {} ERROR: {e}", oracle.name);
            }
        }
    }

    for text in INVARIANT_CONFIGS {
        total += 1;
        let cfg = match parse_config(text) {
            Ok(cfg) => cfg,
            Err(e) => {
                failures += 1;
                println!("invariant config ERROR: {e}");
                continue;
            }
        };
        match run_experiment(&cfg) {
            Ok(result) if result.pass => println!("invariant {} ok", result.name),
            Ok(result) => {
                failures += 1;
                for o in result.outcomes.iter().filter(|o| !o.ok) {
                    println!("invariant {}", outcome_line(&result.name, o));
                }
            }
            Err(e) => {
                failures += 1;
                println!("invariant {} ERROR: {e}", cfg.name);
            }
        }
    }

    total += 1;
    match run_counterexamples() {
        Ok(r) if r.pass => println!("counterexamples ok (all constructions diverge)"),
        Ok(_) => {
            failures += 1;
            println!("counterexamples FAILED: a construction stayed bounded");
        }
        Err(e) => {
            failures += 1;
            println!("counterexamples ERROR: {e}");
        }
    }

    println!("selftest: {}/{} checks passed", total - failures, total);
    if failures == 0 {
        0
    } else {
        EXIT_FAIL
    }
}
