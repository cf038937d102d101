//! `cxl0` — command-line front end for the coherent-disaggregated-memory
//! model checker.
//!
//! Subcommands:
//!
//! - `litmus`: parse and exhaustively run litmus tests, comparing each
//!   verdict against the test's stated expectation.
//! - `props`: check the store/flush strength laws over small bounded
//!   universes, and the volatile-memory durability property over a
//!   workload file.
//! - `flit`: run a durability-transformation workload and check every
//!   produced history for durable linearizability.
//! - `check-history`: decide durable linearizability of one history file.
//!
//! Exit codes: 0 all checks pass, 1 a verdict or property failed, 2 usage
//! or parse error, 3 resource limit exceeded. Reports are deterministic:
//! byte-identical across repeated runs and across `--jobs` settings.

use clap::{Parser, Subcommand};
use cxl0_core::explorer::ExploreError;
use cxl0_core::flit::{BudgetSpec, ObjectKind, ObjectSpec, Variant, Workload, WorkloadReport};
use cxl0_core::linearize::{is_durably_linearizable, CheckError, History, LinStep};
use cxl0_core::litmus::{
    format_report, parse_litmus, run_litmus_custom, LitmusError, LitmusTest, Verdict,
};
use cxl0_core::props::{check_prop1_with, prop2_report, PropError, PropReport, PropUniverse};
use cxl0_core::semantics::{MachineId, StepFn, StoreClass, Topology, Volatility};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_RESOURCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cxl0",
    version,
    about = "Model checker for coherent disaggregated memory with per-machine crashes"
)]
struct Cli {
    /// Worker threads for parallel sections (default: one per CPU).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Write a machine-readable JSON report to this path.
    #[arg(long, global = true, value_name = "OUT")]
    json: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run litmus tests (.lit files or directories of them).
    Litmus {
        /// Test files, or directories searched for *.lit.
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Replace the transition function with a broken catalogue entry.
        #[arg(long, hide = true, value_name = "NAME")]
        mutate: Option<String>,
    },
    /// Check the strength laws (items 1-8) and the volatile-memory
    /// durability property (p2).
    Props {
        /// Items to check: e.g. "1-8", "1,4,7", "p2", "1-6,p2".
        #[arg(long, default_value = "1-8")]
        items: String,
        /// Machine count of the law universe.
        #[arg(long, default_value_t = 2)]
        machines: u32,
        /// Location count of the law universe (every owner map is checked).
        #[arg(long, default_value_t = 1)]
        locs: u32,
        /// Value-domain size (values 0..vals).
        #[arg(long, default_value_t = 2)]
        vals: u32,
        /// Silent-propagation interleaving bound (default 2·machines·locs).
        #[arg(long, value_name = "D")]
        tau_depth: Option<u32>,
        /// Workload file for the p2 item.
        #[arg(long, value_name = "FILE")]
        workload: Option<PathBuf>,
        /// Replace the transition function with a broken catalogue entry.
        #[arg(long, hide = true, value_name = "NAME")]
        mutate: Option<String>,
    },
    /// Run a workload under a durability transformation and check all
    /// histories for durable linearizability.
    Flit {
        /// Workload file (JSON).
        workload: PathBuf,
        /// Override the workload's variant: mstore, lstore, rstore,
        /// naive(-mstore), or none.
        #[arg(long)]
        variant: Option<String>,
        /// Override the crash budget: at most N crashes of any machines.
        #[arg(long, value_name = "N")]
        crashes: Option<u32>,
        /// Store class of counter increments: m (memory) or l (local).
        #[arg(long, value_name = "CLASS")]
        counter_class: Option<String>,
        /// Succeed when violations are found instead of when they are not.
        #[arg(long)]
        expect_violation: bool,
    },
    /// Check one history file (JSON lines) for durable linearizability.
    CheckHistory {
        /// History file.
        file: PathBuf,
        /// Sequential object: register or two-key-set.
        #[arg(long, default_value = "register")]
        object: String,
    },
}

/// What was run, echoed into every JSON report.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    inputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    machines: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    locs: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vals: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau_depth: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    items: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crashes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    object: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mutate: Option<String>,
    /// Always true: there is no randomness anywhere in the pipeline.
    deterministic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<String>,
}

impl RunManifest {
    fn new(command: &str, inputs: Vec<String>, output: &Option<PathBuf>) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            inputs,
            machines: None,
            locs: None,
            vals: None,
            tau_depth: None,
            items: None,
            variant: None,
            crashes: None,
            object: None,
            mutate: None,
            deterministic: true,
            output: output.as_ref().map(|p| p.display().to_string()),
        }
    }
}

/// A failure that terminates the command with a message and exit code.
#[derive(Debug)]
struct CmdError {
    code: u8,
    message: String,
}

impl CmdError {
    fn usage(message: impl Into<String>) -> CmdError {
        CmdError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn resource(message: impl Into<String>) -> CmdError {
        CmdError {
            code: EXIT_RESOURCE,
            message: message.into(),
        }
    }
}

fn explore_error_code(err: &ExploreError) -> u8 {
    match err {
        ExploreError::StateBudget { .. } | ExploreError::ConfigSpace { .. } => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

impl From<LitmusError> for CmdError {
    fn from(err: LitmusError) -> CmdError {
        let code = match &err {
            LitmusError::Explore(e) => explore_error_code(e),
            _ => EXIT_USAGE,
        };
        CmdError {
            code,
            message: err.to_string(),
        }
    }
}

impl From<PropError> for CmdError {
    fn from(err: PropError) -> CmdError {
        let code = match &err {
            PropError::Explore(e) => explore_error_code(e),
            PropError::Flit(e) => flit_error_code(e),
            _ => EXIT_USAGE,
        };
        CmdError {
            code,
            message: err.to_string(),
        }
    }
}

fn flit_error_code(err: &cxl0_core::flit::FlitError) -> u8 {
    use cxl0_core::flit::FlitError;
    match err {
        FlitError::Explore(e) => explore_error_code(e),
        FlitError::Check(CheckError::TooManyOps { .. }) => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

impl From<cxl0_core::flit::FlitError> for CmdError {
    fn from(err: cxl0_core::flit::FlitError) -> CmdError {
        CmdError {
            code: flit_error_code(&err),
            message: err.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        // Ignore the error from a second initialization; tests that call
        // main-like code twice in one process keep the first pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let json = cli.json.clone();
    let outcome = match cli.cmd {
        Cmd::Litmus { paths, mutate } => cmd_litmus(&paths, mutate.as_deref(), &json),
        Cmd::Props {
            items,
            machines,
            locs,
            vals,
            tau_depth,
            workload,
            mutate,
        } => cmd_props(
            &items,
            machines,
            locs,
            vals,
            tau_depth,
            workload.as_deref(),
            mutate.as_deref(),
            &json,
        ),
        Cmd::Flit {
            workload,
            variant,
            crashes,
            counter_class,
            expect_violation,
        } => cmd_flit(
            &workload,
            variant.as_deref(),
            crashes,
            counter_class.as_deref(),
            expect_violation,
            &json,
        ),
        Cmd::CheckHistory { file, object } => cmd_check_history(&file, &object, &json),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

/// Resolve a step-function mutation flag against the catalogue.
fn resolve_mutant(
    name: Option<&str>,
) -> Result<Option<Box<dyn Fn(&cxl0_core::semantics::Configuration, &Topology, &cxl0_core::semantics::Label) -> Result<cxl0_core::semantics::Configuration, cxl0_core::semantics::SemanticsError> + Sync>>, CmdError> {
    match name {
        None => Ok(None),
        Some(name) => match cxl0_core::props::mutant_step(name) {
            Some(f) => Ok(Some(f)),
            None => Err(CmdError::usage(format!(
                "unknown mutant {name:?}; expected one of {}",
                cxl0_core::props::MUTANT_NAMES.join(", ")
            ))),
        },
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CmdError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| CmdError::usage(format!("cannot serialize report: {err}")))?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(|err| CmdError::usage(format!("cannot write {}: {err}", path.display())))
}

// ---------------------------------------------------------------------------
// litmus
// ---------------------------------------------------------------------------

/// Expand files-or-directories into a sorted list of test files.
fn collect_litmus_paths(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CmdError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found = Vec::new();
            let entries = std::fs::read_dir(p)
                .map_err(|err| CmdError::usage(format!("cannot read {}: {err}", p.display())))?;
            for entry in entries {
                let entry = entry
                    .map_err(|err| CmdError::usage(format!("cannot read {}: {err}", p.display())))?;
                let path = entry.path();
                if path.extension().is_some_and(|e| e == "lit") {
                    found.push(path);
                }
            }
            found.sort();
            if found.is_empty() {
                return Err(CmdError::usage(format!(
                    "directory {} contains no .lit files",
                    p.display()
                )));
            }
            out.extend(found);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CmdError::usage(format!("no such file: {}", p.display())));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct LitmusJson {
    manifest: RunManifest,
    verdicts: Vec<Verdict>,
}

fn cmd_litmus(
    paths: &[PathBuf],
    mutate: Option<&str>,
    json: &Option<PathBuf>,
) -> Result<u8, CmdError> {
    let files = collect_litmus_paths(paths)?;
    let mutant = resolve_mutant(mutate)?;
    let step: Option<&StepFn> = mutant.as_deref();

    let mut tests: Vec<LitmusTest> = Vec::with_capacity(files.len());
    for path in &files {
        let text = std::fs::read_to_string(path)
            .map_err(|err| CmdError::usage(format!("cannot read {}: {err}", path.display())))?;
        let test = parse_litmus(&text)
            .map_err(|err| CmdError::usage(format!("{}: {err}", path.display())))?;
        tests.push(test);
    }

    let verdicts: Vec<Verdict> = tests
        .par_iter()
        .map(|t| run_litmus_custom(t, step))
        .collect::<Result<_, _>>()
        .map_err(CmdError::from)?;

    if let Some(name) = mutate {
        println!("mutant semantics: {name}");
    }
    print!("{}", format_report(&verdicts));

    if let Some(out) = json {
        let mut manifest = RunManifest::new(
            "litmus",
            files.iter().map(|p| p.display().to_string()).collect(),
            json,
        );
        manifest.mutate = mutate.map(str::to_string);
        write_json(
            out,
            &LitmusJson {
                manifest,
                verdicts: verdicts.clone(),
            },
        )?;
    }
    Ok(if verdicts.iter().all(|v| v.pass) {
        EXIT_PASS
    } else {
        EXIT_FAIL
    })
}

// ---------------------------------------------------------------------------
// props
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum ItemSel {
    Law(u8),
    VolatileDurability,
}

/// Parse "1-8", "1,4,7", "p2", "1-6,p2" into a deduplicated item list.
fn parse_items(spec: &str) -> Result<Vec<ItemSel>, CmdError> {
    let mut items = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(CmdError::usage(format!("empty entry in --items {spec:?}")));
        }
        if part.eq_ignore_ascii_case("p2") {
            items.push(ItemSel::VolatileDurability);
            continue;
        }
        let parse_one = |s: &str| -> Result<u8, CmdError> {
            let n: u8 = s
                .parse()
                .map_err(|_| CmdError::usage(format!("bad item {s:?} in --items {spec:?}")))?;
            if (1..=8).contains(&n) {
                Ok(n)
            } else {
                Err(CmdError::usage(format!(
                    "item {n} out of range; the strength laws are items 1-8"
                )))
            }
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse_one(a.trim())?, parse_one(b.trim())?);
                if a > b {
                    return Err(CmdError::usage(format!("empty range {part:?}")));
                }
                items.extend((a..=b).map(ItemSel::Law));
            }
            None => items.push(ItemSel::Law(parse_one(part)?)),
        }
    }
    items.sort();
    items.dedup();
    Ok(items)
}

/// Every owner map: each location assigned to each machine.
fn owner_maps(machines: u32, locs: u32) -> Vec<Vec<MachineId>> {
    let mut maps = vec![Vec::new()];
    for _ in 0..locs {
        maps = maps
            .into_iter()
            .flat_map(|m| {
                (1..=machines).map(move |o| {
                    let mut m = m.clone();
                    m.push(MachineId(o));
                    m
                })
            })
            .collect();
    }
    maps
}

fn loc_name(i: usize) -> String {
    const NAMES: [&str; 4] = ["x", "y", "z", "w"];
    NAMES
        .get(i)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("l{i}"))
}

fn universe_for(
    machines: u32,
    owners: &[MachineId],
    vals: u32,
    tau_depth: Option<u32>,
) -> Result<PropUniverse, CmdError> {
    let locs = owners
        .iter()
        .enumerate()
        .map(|(i, &o)| (loc_name(i), o))
        .collect();
    let domain = (0..vals as i64).collect();
    let topo = Topology::new(
        machines,
        locs,
        vec![Volatility::NonVolatile; machines as usize],
        domain,
    )
    .map_err(|err| CmdError::usage(err.to_string()))?;
    let mut universe = PropUniverse::new(topo);
    if let Some(d) = tau_depth {
        universe.tau_depth = d;
    }
    Ok(universe)
}

#[derive(Serialize)]
struct PropsJson {
    manifest: RunManifest,
    reports: Vec<PropReport>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_props(
    items: &str,
    machines: u32,
    locs: u32,
    vals: u32,
    tau_depth: Option<u32>,
    workload: Option<&Path>,
    mutate: Option<&str>,
    json: &Option<PathBuf>,
) -> Result<u8, CmdError> {
    let selected = parse_items(items)?;
    if machines == 0 || locs == 0 || vals == 0 {
        return Err(CmdError::usage(
            "--machines, --locs and --vals must be positive",
        ));
    }
    let mutant = resolve_mutant(mutate)?;
    let step: Option<&StepFn> = mutant.as_deref();

    let laws: Vec<u8> = selected
        .iter()
        .filter_map(|s| match s {
            ItemSel::Law(n) => Some(*n),
            ItemSel::VolatileDurability => None,
        })
        .collect();
    let maps = owner_maps(machines, locs);

    // One task per (law, owner map); order-deterministic aggregation.
    let tasks: Vec<(u8, usize)> = laws
        .iter()
        .flat_map(|&n| (0..maps.len()).map(move |m| (n, m)))
        .collect();
    let law_reports: Vec<PropReport> = tasks
        .par_iter()
        .map(|&(item, mi)| -> Result<PropReport, PropError> {
            let universe = universe_for(machines, &maps[mi], vals, tau_depth)
                .map_err(|e| PropError::Explore(ExploreError::IllFormed(e.message)))?;
            match step {
                Some(f) => check_prop1_with(item, &universe, f),
                None => check_prop1_with(item, &universe, &cxl0_core::semantics::step),
            }
        })
        .collect::<Result<_, _>>()
        .map_err(CmdError::from)?;

    let mut reports = law_reports;
    if selected.contains(&ItemSel::VolatileDurability) {
        let path = workload.ok_or_else(|| {
            CmdError::usage("item p2 needs --workload FILE (a volatile-memory workload)")
        })?;
        let text = std::fs::read_to_string(path)
            .map_err(|err| CmdError::usage(format!("cannot read {}: {err}", path.display())))?;
        let wl = Workload::from_json(&text)
            .map_err(|err| CmdError::usage(format!("{}: {err}", path.display())))?;
        reports.push(prop2_report(&wl).map_err(CmdError::from)?);
    }

    if let Some(name) = mutate {
        println!("mutant semantics: {name}");
    }
    let mut failures = 0u64;
    let mut by_item: Vec<(String, u64, u64, Option<String>)> = Vec::new();
    for r in &reports {
        let label = if r.item == 0 {
            "p2".to_string()
        } else {
            r.item.to_string()
        };
        match by_item.iter_mut().find(|(l, ..)| *l == label) {
            Some(row) => {
                row.1 += r.instances_checked;
                row.2 += r.counterexamples.len() as u64;
                if row.3.is_none() {
                    row.3 = r.counterexamples.first().map(render_cx);
                }
            }
            None => by_item.push((
                label,
                r.instances_checked,
                r.counterexamples.len() as u64,
                r.counterexamples.first().map(render_cx),
            )),
        }
    }
    for (label, instances, cxs, first) in &by_item {
        if *cxs == 0 {
            println!("item {label}: ok — {instances} instances");
        } else {
            failures += cxs;
            println!("item {label}: {cxs} counterexamples over {instances} instances");
            if let Some(first) = first {
                println!("  first: {first}");
            }
        }
    }

    if let Some(out) = json {
        let mut manifest = RunManifest::new(
            "props",
            workload
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            json,
        );
        manifest.machines = Some(machines);
        manifest.locs = Some(locs);
        manifest.vals = Some(vals);
        manifest.tau_depth = tau_depth;
        manifest.items = Some(items.to_string());
        manifest.mutate = mutate.map(str::to_string);
        write_json(out, &PropsJson { manifest, reports })?;
    }
    Ok(if failures == 0 { EXIT_PASS } else { EXIT_FAIL })
}

fn render_cx(cx: &cxl0_core::props::Counterexample) -> String {
    format!(
        "start {} | labels [{}] | expected {} | got {}",
        cx.start_config,
        cx.labels.join("; "),
        cx.expected,
        cx.got
    )
}

// ---------------------------------------------------------------------------
// flit
// ---------------------------------------------------------------------------

fn parse_variant(s: &str) -> Result<Variant, CmdError> {
    let canonical = if s == "naive" { "naive-mstore" } else { s };
    canonical.parse().map_err(CmdError::usage)
}

#[derive(Serialize)]
struct FlitJson {
    manifest: RunManifest,
    report: WorkloadReport,
}

fn cmd_flit(
    workload: &Path,
    variant: Option<&str>,
    crashes: Option<u32>,
    counter_class: Option<&str>,
    expect_violation: bool,
    json: &Option<PathBuf>,
) -> Result<u8, CmdError> {
    let text = std::fs::read_to_string(workload)
        .map_err(|err| CmdError::usage(format!("cannot read {}: {err}", workload.display())))?;
    let mut wl = Workload::from_json(&text)
        .map_err(|err| CmdError::usage(format!("{}: {err}", workload.display())))?;
    if let Some(v) = variant {
        wl.variant = parse_variant(v)?;
    }
    if let Some(k) = crashes {
        wl.crash_budget = BudgetSpec::Total(k);
    }
    if let Some(class) = counter_class {
        wl.counter_inc_class = match class {
            "m" | "memory" => StoreClass::Memory,
            "l" | "local" => StoreClass::Local,
            other => {
                return Err(CmdError::usage(format!(
                    "bad --counter-class {other:?}; expected m or l"
                )))
            }
        };
    }

    let report = wl.run().map_err(CmdError::from)?;
    println!(
        "object {} | variant {} | {} threads | {} operations",
        report.object, report.variant, report.threads, report.operations
    );
    println!(
        "histories checked: {} | states visited: {}",
        report.histories_checked, report.stats.states_visited
    );
    println!("violations: {}", report.violations.len());
    for v in &report.violations {
        println!("  history: {}", v.history);
        println!("  witness: {}", v.witness.join(" ; "));
    }

    if let Some(out) = json {
        let mut manifest = RunManifest::new(
            "flit",
            vec![workload.display().to_string()],
            json,
        );
        manifest.variant = Some(report.variant.to_string());
        manifest.crashes = crashes;
        write_json(
            out,
            &FlitJson {
                manifest,
                report: report.clone(),
            },
        )?;
    }

    let found = !report.violations.is_empty();
    Ok(if found == expect_violation {
        EXIT_PASS
    } else {
        EXIT_FAIL
    })
}

// ---------------------------------------------------------------------------
// check-history
// ---------------------------------------------------------------------------

fn parse_object(s: &str) -> Result<ObjectKind, CmdError> {
    match s {
        "register" => Ok(ObjectKind::Register),
        "two-key-set" => Ok(ObjectKind::TwoKeySet),
        other => Err(CmdError::usage(format!(
            "unknown object {other:?}; expected register or two-key-set"
        ))),
    }
}

#[derive(Serialize)]
struct CheckHistoryJson {
    manifest: RunManifest,
    durably_linearizable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    witness: Option<Vec<LinStep>>,
}

fn cmd_check_history(
    file: &Path,
    object: &str,
    json: &Option<PathBuf>,
) -> Result<u8, CmdError> {
    let kind = parse_object(object)?;
    let text = std::fs::read_to_string(file)
        .map_err(|err| CmdError::usage(format!("cannot read {}: {err}", file.display())))?;
    let history = History::from_jsonl(&text)
        .map_err(|err| CmdError::usage(format!("{}: {err}", file.display())))?;
    let spec = ObjectSpec { kind };
    let outcome = is_durably_linearizable(&history, &spec).map_err(|err| match err {
        CheckError::TooManyOps { .. } => CmdError::resource(err.to_string()),
        other => CmdError::usage(other.to_string()),
    })?;

    if outcome.linearizable {
        println!("durably linearizable");
        if let Some(witness) = &outcome.witness {
            let mut line = String::from("witness:");
            for step in witness {
                let args = step
                    .args
                    .iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                let ret = match step.ret {
                    Some(v) => format!(" -> {v}"),
                    None => String::new(),
                };
                let pending = if step.completed_pending {
                    " (completed pending)"
                } else {
                    ""
                };
                let _ = write!(line, " p{} {}({args}){ret}{pending};", step.proc, step.op);
            }
            println!("{}", line.trim_end_matches(';'));
        }
    } else {
        println!("NOT durably linearizable");
        println!(
            "no completion/omission of pending operations admits an order that \
             replays against {} after crash events are removed",
            spec.name()
        );
    }

    if let Some(out) = json {
        let mut manifest =
            RunManifest::new("check-history", vec![file.display().to_string()], json);
        manifest.object = Some(spec.name().to_string());
        write_json(
            out,
            &CheckHistoryJson {
                manifest,
                durably_linearizable: outcome.linearizable,
                witness: outcome.witness,
            },
        )?;
    }
    Ok(if outcome.linearizable {
        EXIT_PASS
    } else {
        EXIT_FAIL
    })
}
