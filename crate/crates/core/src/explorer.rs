//! Exhaustive, deterministic exploration of the transition system.
//!
//! Two front doors:
//!
//! - [`feasible_trace`] takes a [`FabricTrace`] — a fixed sequence of
//!   machine-annotated operations and crashes — and decides whether the
//!   fabric can execute it, inserting internal `tau` steps anywhere. It
//!   returns a full label witness when feasible.
//! - [`explore`] takes a [`Program`] — threads pinned to machines, each
//!   running a straight-line instruction list — and enumerates every
//!   interleaving, every `tau` placement, and every crash injection within
//!   the crash budget. It returns the set of reachable final outcomes, the
//!   set of operation histories (when threads carry operation spans), a
//!   witness schedule per outcome and history, and exploration statistics.
//!
//! Both searches are depth-first over a visited set, so they terminate on
//! the finite state space and are complete for it. The visited key includes
//! the emitted history, which keeps executions distinct when they reach the
//! same fabric state through observably different event orders; without
//! this, histories that differ only in invoke/respond interleaving would be
//! lost.
//!
//! Exploration order is fixed (threads by index, then `tau` moves, then
//! crashes), so outcome sets, witnesses and statistics are deterministic.
//! The visited-set size is capped by the `CXL0_STATE_BUDGET` environment
//! variable (default [`DEFAULT_STATE_BUDGET`]); exceeding it is a hard
//! error, never a silent truncation.
//!
//! [`reachable_configs`] enumerates the configuration universe of a
//! topology: exactly the configurations satisfying cache uniqueness, which
//! coincide with the ones reachable from the initial configuration.

use crate::linearize::{Event, History, ProcId};
use crate::semantics::{
    self, check_cache_invariant, enabled_taus, init_config, Configuration, FlushClass, Label,
    LocId, MachineId, RmwFunc, SemanticsError, StepFn, StoreClass, Topology, Value,
};
use serde::Serialize;
use std::collections::{BTreeMap, HashSet};
use thiserror::Error;

/// Index of a register in a thread's (or, for traces, a machine's) register
/// file.
pub type RegId = u16;

/// Default cap on visited states per search, overridable via the
/// `CXL0_STATE_BUDGET` environment variable.
pub const DEFAULT_STATE_BUDGET: u64 = 2_000_000;

/// An immediate value or a register read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Imm(Value),
    Reg(RegId),
}

/// One straight-line instruction of a trace event or program thread.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instr {
    /// Store at the given persistence class; the source is an immediate or
    /// a register.
    Store {
        class: StoreClass,
        loc: LocId,
        src: Operand,
    },
    /// Load that is only executable when the given value is readable; used
    /// by traces to express observations.
    LoadExpect { loc: LocId, expect: Value },
    /// Load into a register.
    LoadReg { dest: RegId, loc: LocId },
    Flush { class: FlushClass, loc: LocId },
    /// Global persistence fence.
    Gpf,
    /// Atomic read-modify-write; the read value is discarded.
    Rmw {
        class: StoreClass,
        loc: LocId,
        func: RmwFunc,
    },
    /// Flush only when the guard register holds a positive value; the
    /// expansion of the counter-guarded flush in load wrappers.
    FlushIfPositive {
        guard: RegId,
        class: FlushClass,
        loc: LocId,
    },
    /// Ordering fence from conventional persistency interfaces; a no-op
    /// here, kept so translated programs stay recognizable.
    Fence,
}

impl Instr {
    /// Render for listings, resolving location and register names.
    pub fn render(&self, topo: &Topology, reg_names: &[String]) -> String {
        let reg = |r: RegId| reg_names[r as usize].clone();
        match *self {
            Instr::Store { class, loc, src } => {
                let src = match src {
                    Operand::Imm(v) => v.to_string(),
                    Operand::Reg(r) => reg(r),
                };
                format!("{}Store {} {src}", class.letter(), topo.loc_name(loc))
            }
            Instr::LoadExpect { loc, expect } => {
                format!("Load {} = {expect}", topo.loc_name(loc))
            }
            Instr::LoadReg { dest, loc } => format!("{} = Load {}", reg(dest), topo.loc_name(loc)),
            Instr::Flush { class, loc } => {
                format!("{}Flush {}", class.letter(), topo.loc_name(loc))
            }
            Instr::Gpf => "GPF".to_string(),
            Instr::Rmw { class, loc, func } => {
                format!("{}Rmw {} ({func})", class.letter(), topo.loc_name(loc))
            }
            Instr::FlushIfPositive { guard, class, loc } => format!(
                "if {} > 0 then {}Flush {}",
                reg(guard),
                class.letter(),
                topo.loc_name(loc)
            ),
            Instr::Fence => "Fence".to_string(),
        }
    }
}

/// One event of an annotated trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Op { machine: MachineId, instr: Instr },
    Crash { machine: MachineId },
}

/// A fixed sequence of machine-annotated operations and crashes, executed
/// in order with `tau` steps inserted freely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FabricTrace {
    pub topology: Topology,
    pub events: Vec<TraceEvent>,
    /// Register names per machine (index = machine id - 1); registers in
    /// trace events index into their machine's table.
    pub reg_names: Vec<Vec<String>>,
}

/// Comparison operator of a thread assertion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
}

/// A thread assertion over final register values, evaluated when the thread
/// completes. Threads killed by a crash never complete, so their assertions
/// do not count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssertExpr {
    pub lhs: RegId,
    pub op: CmpOp,
    pub rhs: Operand,
}

/// An operation wrapper inside a thread: instructions `first..=last`
/// implement one object operation. The invocation event is emitted with the
/// first instruction, the response with the last; `ret_reg` supplies the
/// return value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpSpan {
    pub first: u32,
    pub last: u32,
    pub op: String,
    pub args: Vec<Value>,
    pub ret_reg: Option<RegId>,
}

/// One program thread: a straight-line instruction list pinned to a
/// machine, with optional assertions and operation spans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThreadSpec {
    /// Display id used in reports and outcome keys (`t1`, `t2`, ...).
    pub display_id: u32,
    pub machine: MachineId,
    pub instrs: Vec<Instr>,
    pub asserts: Vec<AssertExpr>,
    /// Register names; length is the register file size.
    pub reg_names: Vec<String>,
    pub spans: Vec<OpSpan>,
}

impl ThreadSpec {
    pub fn plain(display_id: u32, machine: MachineId, instrs: Vec<Instr>) -> ThreadSpec {
        ThreadSpec {
            display_id,
            machine,
            instrs,
            asserts: Vec::new(),
            reg_names: Vec::new(),
            spans: Vec::new(),
        }
    }
}

/// How many crashes the explorer may inject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrashBudget {
    /// Per-machine maximum (index = machine id - 1).
    pub per_machine: Vec<u32>,
    /// Optional cap across all machines.
    pub total: Option<u32>,
}

impl CrashBudget {
    pub fn none(machines: u32) -> CrashBudget {
        CrashBudget {
            per_machine: vec![0; machines as usize],
            total: None,
        }
    }

    /// Any machine may crash, with a shared total cap.
    pub fn total_any(machines: u32, total: u32) -> CrashBudget {
        CrashBudget {
            per_machine: vec![total; machines as usize],
            total: Some(total),
        }
    }
}

/// A multi-threaded program over a topology, explored exhaustively by
/// [`explore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub topology: Topology,
    pub threads: Vec<ThreadSpec>,
    /// Recovery bodies: when machine `spec.machine` crashes, a fresh thread
    /// instance with this body (and a fresh proc id) starts.
    pub recovery: Vec<ThreadSpec>,
    pub crash_budget: CrashBudget,
    /// Number of full-system crash sequences the explorer may inject; each
    /// injection crashes every machine consecutively, in every permutation
    /// order.
    pub full_crash_budget: u32,
}

impl Program {
    pub fn new(topology: Topology, threads: Vec<ThreadSpec>) -> Program {
        let machines = topology.machine_count();
        Program {
            topology,
            threads,
            recovery: Vec::new(),
            crash_budget: CrashBudget::none(machines),
            full_crash_budget: 0,
        }
    }
}

/// Exploration statistics. `invariant_checks` counts configurations checked
/// for cache uniqueness (one per visited state); `invariant_failures` stays
/// zero for the unmodified semantics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ExploreStats {
    pub states_visited: u64,
    pub invariant_checks: u64,
    pub invariant_failures: u64,
    pub terminal_states: u64,
}

impl ExploreStats {
    pub fn merge(&mut self, other: &ExploreStats) {
        self.states_visited += other.states_visited;
        self.invariant_checks += other.invariant_checks;
        self.invariant_failures += other.invariant_failures;
        self.terminal_states += other.terminal_states;
    }
}

/// One final result of a program execution.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Outcome {
    /// Registers of completed threads: thread name, then register name, to
    /// value. Threads killed mid-run do not appear.
    pub regs: BTreeMap<String, BTreeMap<String, Value>>,
    /// Final memory, by location name.
    pub mem: BTreeMap<String, Value>,
    /// True when some completed thread's assertion failed.
    pub assert_failed: bool,
}

/// The set of reachable final results, each with one witness schedule
/// (rendered labels).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct OutcomeSet {
    pub outcomes: BTreeMap<Outcome, Vec<String>>,
    pub assertion_can_fail: bool,
    pub assertion_failure_witness: Option<Vec<String>>,
}

/// Full result of [`explore`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreResult {
    pub outcomes: OutcomeSet,
    /// Distinct operation histories with one witness schedule each; empty
    /// when no thread carries operation spans.
    pub histories: BTreeMap<History, Vec<String>>,
    pub stats: ExploreStats,
}

/// Result of [`feasible_trace`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceResult {
    pub feasible: bool,
    /// A full label sequence executing the trace, when feasible.
    pub witness: Option<Vec<Label>>,
    pub stats: ExploreStats,
}

/// Errors from exploration.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExploreError {
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(
        "state budget of {budget} visited states exhausted ({frontier} frontier states \
         unexplored); set CXL0_STATE_BUDGET higher to continue"
    )]
    StateBudget { budget: u64, frontier: usize },
    #[error("CXL0_STATE_BUDGET is set to {value:?}, which is not a positive integer")]
    BadStateBudget { value: String },
    #[error("configuration space holds {count} configurations, over the limit of {limit}")]
    ConfigSpace { count: u128, limit: u64 },
    #[error("ill-formed input: {0}")]
    IllFormed(String),
}

fn parse_budget(raw: Option<String>) -> Result<u64, ExploreError> {
    match raw {
        None => Ok(DEFAULT_STATE_BUDGET),
        Some(raw) => match raw.trim().parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(ExploreError::BadStateBudget { value: raw }),
        },
    }
}

/// The visited-state cap: `CXL0_STATE_BUDGET` or [`DEFAULT_STATE_BUDGET`].
pub fn state_budget() -> Result<u64, ExploreError> {
    parse_budget(std::env::var("CXL0_STATE_BUDGET").ok())
}

// ---------------------------------------------------------------------------
// Trace feasibility
// ---------------------------------------------------------------------------

impl FabricTrace {
    /// Static checks: machines and locations exist, register reads follow a
    /// write on the same machine (crashes clear register files), immediate
    /// values lie in the domain, and instructions are trace-expressible.
    pub fn validate(&self) -> Result<(), ExploreError> {
        let topo = &self.topology;
        if self.reg_names.len() != topo.machine_count() as usize {
            return Err(ExploreError::IllFormed(format!(
                "register name tables for {} machines, topology has {}",
                self.reg_names.len(),
                topo.machine_count()
            )));
        }
        let mut defined: Vec<HashSet<RegId>> = vec![HashSet::new(); topo.machine_count() as usize];
        for (i, ev) in self.events.iter().enumerate() {
            let err = |msg: String| ExploreError::IllFormed(format!("event {}: {msg}", i + 1));
            match ev {
                TraceEvent::Crash { machine } => {
                    check_machine(topo, *machine, i)?;
                    defined[(machine.0 - 1) as usize].clear();
                }
                TraceEvent::Op { machine, instr } => {
                    check_machine(topo, *machine, i)?;
                    let defs = &mut defined[(machine.0 - 1) as usize];
                    match instr {
                        Instr::Store { loc, src, .. } => {
                            check_loc(topo, *loc, i)?;
                            match src {
                                Operand::Imm(v) if !topo.in_domain(*v) => {
                                    return Err(err(format!("store value {v} outside domain")))
                                }
                                Operand::Reg(r) if !defs.contains(r) => {
                                    return Err(err(format!(
                                        "register index {r} read before any write on machine \
                                         {machine}"
                                    )))
                                }
                                _ => {}
                            }
                        }
                        Instr::LoadExpect { loc, expect } => {
                            check_loc(topo, *loc, i)?;
                            if !topo.in_domain(*expect) {
                                return Err(err(format!(
                                    "expected load value {expect} outside domain"
                                )));
                            }
                        }
                        Instr::LoadReg { loc, dest } => {
                            check_loc(topo, *loc, i)?;
                            defs.insert(*dest);
                        }
                        Instr::Flush { loc, .. } | Instr::Rmw { loc, .. } => {
                            check_loc(topo, *loc, i)?
                        }
                        Instr::FlushIfPositive { guard, loc, .. } => {
                            check_loc(topo, *loc, i)?;
                            if !defs.contains(guard) {
                                return Err(err(format!(
                                    "guard register index {guard} read before any write on \
                                     machine {machine}"
                                )));
                            }
                        }
                        Instr::Gpf | Instr::Fence => {}
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_machine(topo: &Topology, m: MachineId, event: usize) -> Result<(), ExploreError> {
    if m.0 == 0 || m.0 > topo.machine_count() {
        return Err(ExploreError::IllFormed(format!(
            "event {}: machine {m} does not exist (topology has {})",
            event + 1,
            topo.machine_count()
        )));
    }
    Ok(())
}

fn check_loc(topo: &Topology, l: LocId, event: usize) -> Result<(), ExploreError> {
    if l.0 >= topo.loc_count() {
        return Err(ExploreError::IllFormed(format!(
            "event {}: location index {} does not exist",
            event + 1,
            l.0
        )));
    }
    Ok(())
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct TraceState {
    idx: u32,
    cfg: Configuration,
    /// Per-machine register files.
    regs: Vec<Box<[Option<Value>]>>,
}

#[derive(Clone, Copy)]
enum TraceChoice {
    Event,
    Tau(Label),
}

struct TraceFrame {
    state: TraceState,
    choices: Vec<TraceChoice>,
    next: usize,
    /// Labels contributed by the edge into this frame (0 for the root).
    pushed: usize,
}

/// Decide whether the fabric can execute `trace` (with `tau` steps inserted
/// anywhere), returning a full label witness when it can.
pub fn feasible_trace(trace: &FabricTrace) -> Result<TraceResult, ExploreError> {
    feasible_trace_custom(trace, state_budget()?, None)
}

/// [`feasible_trace`] with an explicit visited-state cap.
pub fn feasible_trace_with_budget(
    trace: &FabricTrace,
    budget: u64,
) -> Result<TraceResult, ExploreError> {
    feasible_trace_custom(trace, budget, None)
}

/// Run the step override if one is given, the honest semantics otherwise.
fn do_step(
    step: Option<&StepFn>,
    cfg: &Configuration,
    topo: &Topology,
    label: &Label,
) -> Result<Configuration, SemanticsError> {
    match step {
        Some(f) => f(cfg, topo, label),
        None => semantics::step(cfg, topo, label),
    }
}

/// [`feasible_trace`] with a cap and an optional replacement transition
/// function (enabledness stays honest; only successor states change).
pub fn feasible_trace_custom(
    trace: &FabricTrace,
    budget: u64,
    step: Option<&StepFn>,
) -> Result<TraceResult, ExploreError> {
    trace.validate()?;
    let topo = &trace.topology;
    let mut stats = ExploreStats::default();
    let mut visited: HashSet<TraceState> = HashSet::new();
    let mut stack: Vec<TraceFrame> = Vec::new();
    let mut path: Vec<Label> = Vec::new();

    let root = TraceState {
        idx: 0,
        cfg: init_config(topo),
        regs: trace
            .reg_names
            .iter()
            .map(|names| vec![None; names.len()].into_boxed_slice())
            .collect(),
    };
    visit_trace_state(&root, &mut visited, &mut stats, budget, 0)?;
    if root.idx as usize == trace.events.len() {
        stats.terminal_states += 1;
        return Ok(TraceResult {
            feasible: true,
            witness: Some(path),
            stats,
        });
    }
    let choices = trace_choices(trace, &root)?;
    stack.push(TraceFrame {
        state: root,
        choices,
        next: 0,
        pushed: 0,
    });

    while let Some(top) = stack.len().checked_sub(1) {
        if stack[top].next >= stack[top].choices.len() {
            let frame = stack.pop().expect("frame present");
            path.truncate(path.len() - frame.pushed);
            continue;
        }
        let choice = stack[top].choices[stack[top].next];
        stack[top].next += 1;
        let (new_state, label) = apply_trace_choice(trace, &stack[top].state, choice, step)?;
        if !visit_trace_state(&new_state, &mut visited, &mut stats, budget, stack.len())? {
            continue;
        }
        let pushed = label.is_some() as usize;
        path.extend(label);
        if new_state.idx as usize == trace.events.len() {
            stats.terminal_states += 1;
            return Ok(TraceResult {
                feasible: true,
                witness: Some(path),
                stats,
            });
        }
        let choices = trace_choices(trace, &new_state)?;
        stack.push(TraceFrame {
            state: new_state,
            choices,
            next: 0,
            pushed,
        });
    }
    Ok(TraceResult {
        feasible: false,
        witness: None,
        stats,
    })
}

fn visit_trace_state(
    state: &TraceState,
    visited: &mut HashSet<TraceState>,
    stats: &mut ExploreStats,
    budget: u64,
    frontier: usize,
) -> Result<bool, ExploreError> {
    if visited.contains(state) {
        return Ok(false);
    }
    if visited.len() as u64 >= budget {
        return Err(ExploreError::StateBudget { budget, frontier });
    }
    visited.insert(state.clone());
    stats.states_visited += 1;
    stats.invariant_checks += 1;
    if !check_cache_invariant(&state.cfg) {
        stats.invariant_failures += 1;
    }
    Ok(true)
}

fn trace_choices(trace: &FabricTrace, state: &TraceState) -> Result<Vec<TraceChoice>, ExploreError> {
    let topo = &trace.topology;
    let mut out = Vec::new();
    if let Some(ev) = trace.events.get(state.idx as usize) {
        if trace_event_enabled(topo, state, ev)? {
            out.push(TraceChoice::Event);
        }
    }
    out.extend(
        enabled_taus(&state.cfg, topo)
            .into_iter()
            .map(TraceChoice::Tau),
    );
    Ok(out)
}

fn trace_event_enabled(
    topo: &Topology,
    state: &TraceState,
    ev: &TraceEvent,
) -> Result<bool, ExploreError> {
    let (machine, instr) = match ev {
        TraceEvent::Crash { .. } => return Ok(true),
        TraceEvent::Op { machine, instr } => (*machine, instr),
    };
    let regs = &state.regs[(machine.0 - 1) as usize];
    instr_enabled(topo, &state.cfg, machine, regs, instr)
}

fn apply_trace_choice(
    trace: &FabricTrace,
    state: &TraceState,
    choice: TraceChoice,
    step: Option<&StepFn>,
) -> Result<(TraceState, Option<Label>), ExploreError> {
    let topo = &trace.topology;
    let mut next = state.clone();
    let label = match choice {
        TraceChoice::Tau(label) => {
            next.cfg = do_step(step, &state.cfg, topo, &label)?;
            Some(label)
        }
        TraceChoice::Event => match &trace.events[state.idx as usize] {
            TraceEvent::Crash { machine } => {
                let mi = (machine.0 - 1) as usize;
                next.regs[mi] = vec![None; state.regs[mi].len()].into_boxed_slice();
                let label = Label::Crash { machine: *machine };
                next.cfg = do_step(step, &state.cfg, topo, &label)?;
                next.idx += 1;
                Some(label)
            }
            TraceEvent::Op { machine, instr } => {
                let mi = (machine.0 - 1) as usize;
                let regs = state.regs[mi].clone();
                let (label, reg_write) = instr_label(&state.cfg, *machine, &regs, instr);
                if let Some(label) = &label {
                    next.cfg = do_step(step, &state.cfg, topo, label)?;
                }
                if let Some((r, v)) = reg_write {
                    next.regs[mi][r as usize] = Some(v);
                }
                next.idx += 1;
                label
            }
        },
    };
    Ok((next, label))
}

/// Enabledness of one instruction for a machine with the given registers.
fn instr_enabled(
    topo: &Topology,
    cfg: &Configuration,
    machine: MachineId,
    regs: &[Option<Value>],
    instr: &Instr,
) -> Result<bool, ExploreError> {
    Ok(match instr {
        Instr::Store { .. } | Instr::LoadReg { .. } | Instr::Fence => true,
        Instr::LoadExpect { loc, expect } => cfg.readable_value(*loc) == *expect,
        Instr::Flush { class, loc } => semantics::enabled(
            cfg,
            topo,
            &Label::Flush {
                class: *class,
                machine,
                loc: *loc,
            },
        )?,
        Instr::Gpf => semantics::enabled(cfg, topo, &Label::Gpf { machine })?,
        Instr::Rmw { loc, func, .. } => match func.apply(cfg.readable_value(*loc)) {
            Some(w) if !topo.in_domain(w) => {
                return Err(SemanticsError::RmwOutOfDomain { value: w }.into())
            }
            _ => true,
        },
        Instr::FlushIfPositive { guard, class, loc } => {
            let g = regs[*guard as usize].expect("validated: guard defined");
            if g > 0 {
                semantics::enabled(
                    cfg,
                    topo,
                    &Label::Flush {
                        class: *class,
                        machine,
                        loc: *loc,
                    },
                )?
            } else {
                true
            }
        }
    })
}

/// The label an instruction emits (None for silent no-ops) plus any
/// register write it performs. Must only be called when enabled.
fn instr_label(
    cfg: &Configuration,
    machine: MachineId,
    regs: &[Option<Value>],
    instr: &Instr,
) -> (Option<Label>, Option<(RegId, Value)>) {
    match instr {
        Instr::Store { class, loc, src } => {
            let value = match src {
                Operand::Imm(v) => *v,
                Operand::Reg(r) => regs[*r as usize].expect("validated: register defined"),
            };
            (
                Some(Label::Store {
                    class: *class,
                    machine,
                    loc: *loc,
                    value,
                }),
                None,
            )
        }
        Instr::LoadExpect { loc, expect } => (
            Some(Label::Load {
                machine,
                loc: *loc,
                value: *expect,
            }),
            None,
        ),
        Instr::LoadReg { dest, loc } => {
            let value = cfg.readable_value(*loc);
            (
                Some(Label::Load {
                    machine,
                    loc: *loc,
                    value,
                }),
                Some((*dest, value)),
            )
        }
        Instr::Flush { class, loc } => (
            Some(Label::Flush {
                class: *class,
                machine,
                loc: *loc,
            }),
            None,
        ),
        Instr::Gpf => (Some(Label::Gpf { machine }), None),
        Instr::Rmw { class, loc, func } => (
            Some(Label::Rmw {
                class: *class,
                machine,
                loc: *loc,
                func: *func,
            }),
            None,
        ),
        Instr::FlushIfPositive { guard, class, loc } => {
            let g = regs[*guard as usize].expect("validated: guard defined");
            (
                (g > 0).then_some(Label::Flush {
                    class: *class,
                    machine,
                    loc: *loc,
                }),
                None,
            )
        }
        Instr::Fence => (None, None),
    }
}

// ---------------------------------------------------------------------------
// Program exploration
// ---------------------------------------------------------------------------

/// Identity of a thread instance: a base thread, or the `occurrence`-th
/// recovery of a machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ThreadName {
    Base(u32),
    Recovery { machine: u32, occurrence: u32 },
}

impl ThreadName {
    fn render(self) -> String {
        match self {
            ThreadName::Base(id) => format!("t{id}"),
            ThreadName::Recovery {
                machine,
                occurrence,
            } => format!("rec{machine}#{occurrence}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct ThreadRt {
    /// Index into `Program::threads` or `Program::recovery`.
    spec: u32,
    recovery: bool,
    name: ThreadName,
    pc: u32,
    /// Cleared when the thread's machine crashes before completion.
    alive: bool,
    regs: Box<[Option<Value>]>,
}

/// Compact history event; materialized into [`History`] at terminals.
#[derive(Clone, PartialEq, Eq, Hash)]
enum HEvent {
    Inv {
        proc: u32,
        spec: u32,
        recovery: bool,
        span: u32,
    },
    Res {
        proc: u32,
        ret: Option<Value>,
    },
    Crash {
        machine: u32,
    },
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct SState {
    cfg: Configuration,
    threads: Vec<ThreadRt>,
    crashes_left: Box<[u32]>,
    /// `u32::MAX` when no total cap.
    total_left: u32,
    full_left: u32,
    history: Vec<HEvent>,
}

#[derive(Clone, Copy)]
enum Choice {
    Thread(usize),
    Tau(Label),
    Crash(MachineId),
    FullCrash(usize),
}

struct Frame {
    state: SState,
    choices: Vec<Choice>,
    next: usize,
    pushed: usize,
}

impl Program {
    fn spec_of(&self, rt: &ThreadRt) -> &ThreadSpec {
        if rt.recovery {
            &self.recovery[rt.spec as usize]
        } else {
            &self.threads[rt.spec as usize]
        }
    }

    /// Do any threads carry operation spans? Only then are histories
    /// collected (and crash events recorded into them).
    fn has_spans(&self) -> bool {
        self.threads
            .iter()
            .chain(&self.recovery)
            .any(|t| !t.spans.is_empty())
    }

    /// Static checks mirroring [`FabricTrace::validate`], plus span and
    /// budget shape checks.
    pub fn validate(&self) -> Result<(), ExploreError> {
        let topo = &self.topology;
        let mut seen_ids = HashSet::new();
        for t in &self.threads {
            if !seen_ids.insert(t.display_id) {
                return Err(ExploreError::IllFormed(format!(
                    "thread id {} declared twice",
                    t.display_id
                )));
            }
        }
        for (kind, t) in self
            .threads
            .iter()
            .map(|t| ("thread", t))
            .chain(self.recovery.iter().map(|t| ("recovery thread", t)))
        {
            let tname = format!("{kind} {}", t.display_id);
            if t.machine.0 == 0 || t.machine.0 > topo.machine_count() {
                return Err(ExploreError::IllFormed(format!(
                    "{tname}: machine {} does not exist",
                    t.machine
                )));
            }
            let reg_ok = |r: RegId| (r as usize) < t.reg_names.len();
            let mut defined: HashSet<RegId> = HashSet::new();
            for (i, instr) in t.instrs.iter().enumerate() {
                let err = |msg: String| {
                    ExploreError::IllFormed(format!("{tname}, instruction {}: {msg}", i + 1))
                };
                match instr {
                    Instr::Store { loc, src, .. } => {
                        check_loc(topo, *loc, i)?;
                        match src {
                            Operand::Imm(v) if !topo.in_domain(*v) => {
                                return Err(err(format!("store value {v} outside domain")))
                            }
                            Operand::Reg(r) => {
                                if !reg_ok(*r) || !defined.contains(r) {
                                    return Err(err("register read before any write".into()));
                                }
                            }
                            _ => {}
                        }
                    }
                    Instr::LoadExpect { loc, expect } => {
                        check_loc(topo, *loc, i)?;
                        if !topo.in_domain(*expect) {
                            return Err(err(format!(
                                "expected load value {expect} outside domain"
                            )));
                        }
                    }
                    Instr::LoadReg { dest, loc } => {
                        check_loc(topo, *loc, i)?;
                        if !reg_ok(*dest) {
                            return Err(err(format!("register index {dest} unnamed")));
                        }
                        defined.insert(*dest);
                    }
                    Instr::Flush { loc, .. } | Instr::Rmw { loc, .. } => check_loc(topo, *loc, i)?,
                    Instr::FlushIfPositive { guard, loc, .. } => {
                        check_loc(topo, *loc, i)?;
                        if !reg_ok(*guard) || !defined.contains(guard) {
                            return Err(err("guard register read before any write".into()));
                        }
                    }
                    Instr::Gpf | Instr::Fence => {}
                }
            }
            for (i, a) in t.asserts.iter().enumerate() {
                let err = |msg: String| {
                    ExploreError::IllFormed(format!("{tname}, assertion {}: {msg}", i + 1))
                };
                if !reg_ok(a.lhs) || !defined.contains(&a.lhs) {
                    return Err(err("left-hand register never written".into()));
                }
                if let Operand::Reg(r) = a.rhs {
                    if !reg_ok(r) || !defined.contains(&r) {
                        return Err(err("right-hand register never written".into()));
                    }
                }
            }
            let mut last_end: Option<u32> = None;
            for (i, s) in t.spans.iter().enumerate() {
                let err = |msg: String| {
                    ExploreError::IllFormed(format!("{tname}, span {}: {msg}", i + 1))
                };
                if s.first > s.last || s.last as usize >= t.instrs.len() {
                    return Err(err("span out of range".into()));
                }
                if let Some(prev) = last_end {
                    if s.first <= prev {
                        return Err(err("spans overlap or are out of order".into()));
                    }
                }
                last_end = Some(s.last);
                if let Some(r) = s.ret_reg {
                    if !reg_ok(r) {
                        return Err(err(format!("return register index {r} unnamed")));
                    }
                }
            }
        }
        if self.crash_budget.per_machine.len() != topo.machine_count() as usize {
            return Err(ExploreError::IllFormed(format!(
                "crash budget covers {} machines, topology has {}",
                self.crash_budget.per_machine.len(),
                topo.machine_count()
            )));
        }
        Ok(())
    }
}

/// Explore every interleaving, `tau` placement and crash injection of
/// `program`, returning outcomes, histories, witnesses and statistics.
pub fn explore(program: &Program) -> Result<ExploreResult, ExploreError> {
    explore_custom(program, state_budget()?, None)
}

/// [`explore`] with an explicit visited-state cap.
pub fn explore_with_budget(
    program: &Program,
    budget: u64,
) -> Result<ExploreResult, ExploreError> {
    explore_custom(program, budget, None)
}

/// [`explore`] with a cap and an optional replacement transition function
/// (enabledness stays honest; only successor states change).
pub fn explore_custom(
    program: &Program,
    budget: u64,
    step: Option<&StepFn>,
) -> Result<ExploreResult, ExploreError> {
    program.validate()?;
    let topo = &program.topology;
    let has_spans = program.has_spans();
    let perms = lex_permutations(topo.machine_count());

    let root = SState {
        cfg: init_config(topo),
        threads: program
            .threads
            .iter()
            .enumerate()
            .map(|(i, t)| ThreadRt {
                spec: i as u32,
                recovery: false,
                name: ThreadName::Base(t.display_id),
                pc: 0,
                alive: true,
                regs: vec![None; t.reg_names.len()].into_boxed_slice(),
            })
            .collect(),
        crashes_left: program.crash_budget.per_machine.clone().into_boxed_slice(),
        total_left: program.crash_budget.total.unwrap_or(u32::MAX),
        full_left: program.full_crash_budget,
        history: Vec::new(),
    };

    let mut result = ExploreResult {
        outcomes: OutcomeSet::default(),
        histories: BTreeMap::new(),
        stats: ExploreStats::default(),
    };
    let mut visited: HashSet<SState> = HashSet::new();
    let mut stack: Vec<Frame> = Vec::new();
    let mut path: Vec<Label> = Vec::new();

    visit_state(&root, &mut visited, &mut result.stats, budget, 0)?;
    let done = all_done(program, &root);
    if done {
        record_terminal(program, &root, &path, has_spans, &mut result);
    }
    let choices = if done {
        // Crashes are environment events; they may still strike after the
        // program finishes, which is what recovery code exists to survive.
        crash_choices(&root, topo, perms.len())
    } else {
        program_choices(program, &root, perms.len())?
    };
    if !choices.is_empty() {
        stack.push(Frame {
            state: root,
            choices,
            next: 0,
            pushed: 0,
        });
    }

    while let Some(top) = stack.len().checked_sub(1) {
        if stack[top].next >= stack[top].choices.len() {
            let frame = stack.pop().expect("frame present");
            path.truncate(path.len() - frame.pushed);
            continue;
        }
        let choice = stack[top].choices[stack[top].next];
        stack[top].next += 1;
        let (new_state, labels) = apply_choice(program, &stack[top].state, choice, &perms, step)?;
        if !visit_state(&new_state, &mut visited, &mut result.stats, budget, stack.len())? {
            continue;
        }
        let done = all_done(program, &new_state);
        path.extend(labels.iter().copied());
        if done {
            record_terminal(program, &new_state, &path, has_spans, &mut result);
        }
        let choices = if done {
            crash_choices(&new_state, topo, perms.len())
        } else {
            program_choices(program, &new_state, perms.len())?
        };
        if choices.is_empty() {
            path.truncate(path.len() - labels.len());
        } else {
            stack.push(Frame {
                state: new_state,
                choices,
                next: 0,
                pushed: labels.len(),
            });
        }
    }
    Ok(result)
}

fn visit_state(
    state: &SState,
    visited: &mut HashSet<SState>,
    stats: &mut ExploreStats,
    budget: u64,
    frontier: usize,
) -> Result<bool, ExploreError> {
    if visited.contains(state) {
        return Ok(false);
    }
    if visited.len() as u64 >= budget {
        return Err(ExploreError::StateBudget { budget, frontier });
    }
    visited.insert(state.clone());
    stats.states_visited += 1;
    stats.invariant_checks += 1;
    if !check_cache_invariant(&state.cfg) {
        stats.invariant_failures += 1;
    }
    Ok(true)
}

/// All threads have completed or been killed; a final result is readable.
fn all_done(program: &Program, state: &SState) -> bool {
    state
        .threads
        .iter()
        .all(|rt| !rt.alive || rt.pc as usize == program.spec_of(rt).instrs.len())
}

fn crash_choices(state: &SState, topo: &Topology, n_perms: usize) -> Vec<Choice> {
    let mut out = Vec::new();
    if state.total_left > 0 {
        for m in topo.machine_ids() {
            if state.crashes_left[(m.0 - 1) as usize] > 0 {
                out.push(Choice::Crash(m));
            }
        }
    }
    if state.full_left > 0 {
        out.extend((0..n_perms).map(Choice::FullCrash));
    }
    out
}

fn program_choices(
    program: &Program,
    state: &SState,
    n_perms: usize,
) -> Result<Vec<Choice>, ExploreError> {
    let topo = &program.topology;
    let mut out = Vec::new();
    for (i, rt) in state.threads.iter().enumerate() {
        let spec = program.spec_of(rt);
        if !rt.alive || rt.pc as usize >= spec.instrs.len() {
            continue;
        }
        let instr = &spec.instrs[rt.pc as usize];
        if instr_enabled(topo, &state.cfg, spec.machine, &rt.regs, instr)? {
            out.push(Choice::Thread(i));
        }
    }
    out.extend(enabled_taus(&state.cfg, topo).into_iter().map(Choice::Tau));
    out.extend(crash_choices(state, topo, n_perms));
    Ok(out)
}

fn apply_choice(
    program: &Program,
    state: &SState,
    choice: Choice,
    perms: &[Vec<MachineId>],
    step: Option<&StepFn>,
) -> Result<(SState, Vec<Label>), ExploreError> {
    let topo = &program.topology;
    let mut next = state.clone();
    let mut labels = Vec::new();
    match choice {
        Choice::Tau(label) => {
            next.cfg = do_step(step, &state.cfg, topo, &label)?;
            labels.push(label);
        }
        Choice::Crash(m) => {
            apply_crash(program, &mut next, m, &mut labels, step)?;
            next.crashes_left[(m.0 - 1) as usize] -= 1;
            if next.total_left != u32::MAX {
                next.total_left -= 1;
            }
        }
        Choice::FullCrash(p) => {
            for &m in &perms[p] {
                apply_crash(program, &mut next, m, &mut labels, step)?;
            }
            next.full_left -= 1;
        }
        Choice::Thread(t) => {
            let rt = &state.threads[t];
            let spec = program.spec_of(rt);
            let ic = rt.pc;
            let instr = &spec.instrs[ic as usize];
            let (label, reg_write) = instr_label(&state.cfg, spec.machine, &rt.regs, instr);
            if let Some(label) = label {
                next.cfg = do_step(step, &state.cfg, topo, &label)?;
                labels.push(label);
            }
            let rt_next = &mut next.threads[t];
            if let Some((r, v)) = reg_write {
                rt_next.regs[r as usize] = Some(v);
            }
            rt_next.pc += 1;
            // History events attached to this instruction: invoke on a
            // span's first instruction, respond on its last.
            let proc = t as u32 + 1;
            for (si, span) in spec.spans.iter().enumerate() {
                if span.first == ic {
                    next.history.push(HEvent::Inv {
                        proc,
                        spec: rt.spec,
                        recovery: rt.recovery,
                        span: si as u32,
                    });
                }
            }
            for span in &spec.spans {
                if span.last == ic {
                    let ret = span.ret_reg.and_then(|r| next.threads[t].regs[r as usize]);
                    next.history.push(HEvent::Res { proc, ret });
                }
            }
        }
    }
    Ok((next, labels))
}

fn apply_crash(
    program: &Program,
    state: &mut SState,
    m: MachineId,
    labels: &mut Vec<Label>,
    step: Option<&StepFn>,
) -> Result<(), ExploreError> {
    let topo = &program.topology;
    state.cfg = do_step(step, &state.cfg, topo, &Label::Crash { machine: m })?;
    labels.push(Label::Crash { machine: m });
    for rt in &mut state.threads {
        let spec = if rt.recovery {
            &program.recovery[rt.spec as usize]
        } else {
            &program.threads[rt.spec as usize]
        };
        if spec.machine == m && rt.alive && (rt.pc as usize) < spec.instrs.len() {
            rt.alive = false;
            // Local state dies with the machine; clearing keeps state keys
            // canonical across paths that killed the thread differently.
            rt.regs = vec![None; rt.regs.len()].into_boxed_slice();
        }
    }
    if program.has_spans() {
        state.history.push(HEvent::Crash { machine: m.0 });
    }
    let occurrence = 1 + state
        .threads
        .iter()
        .filter(|rt| matches!(rt.name, ThreadName::Recovery { machine, .. } if machine == m.0))
        .count() as u32;
    for (ri, rspec) in program.recovery.iter().enumerate() {
        if rspec.machine == m {
            state.threads.push(ThreadRt {
                spec: ri as u32,
                recovery: true,
                name: ThreadName::Recovery {
                    machine: m.0,
                    occurrence,
                },
                pc: 0,
                alive: true,
                regs: vec![None; rspec.reg_names.len()].into_boxed_slice(),
            });
        }
    }
    Ok(())
}

fn eval_assert(a: &AssertExpr, regs: &[Option<Value>]) -> bool {
    let lhs = regs[a.lhs as usize].expect("validated: assertion register defined");
    let rhs = match a.rhs {
        Operand::Imm(v) => v,
        Operand::Reg(r) => regs[r as usize].expect("validated: assertion register defined"),
    };
    match a.op {
        CmpOp::Eq => lhs == rhs,
        CmpOp::Ne => lhs != rhs,
    }
}

fn record_terminal(
    program: &Program,
    state: &SState,
    path: &[Label],
    has_spans: bool,
    result: &mut ExploreResult,
) {
    let topo = &program.topology;
    result.stats.terminal_states += 1;
    let mut regs_out: BTreeMap<String, BTreeMap<String, Value>> = BTreeMap::new();
    let mut assert_failed = false;
    for rt in &state.threads {
        let spec = program.spec_of(rt);
        if rt.pc as usize != spec.instrs.len() {
            continue;
        }
        let mut file = BTreeMap::new();
        for (ri, name) in spec.reg_names.iter().enumerate() {
            if let Some(v) = rt.regs[ri] {
                file.insert(name.clone(), v);
            }
        }
        regs_out.insert(rt.name.render(), file);
        if !spec.asserts.iter().all(|a| eval_assert(a, &rt.regs)) {
            assert_failed = true;
        }
    }
    let mem = topo
        .loc_ids()
        .map(|l| (topo.loc_name(l).to_string(), state.cfg.mem(l)))
        .collect();
    let outcome = Outcome {
        regs: regs_out,
        mem,
        assert_failed,
    };
    let witness = || path.iter().map(|l| l.render(topo)).collect::<Vec<_>>();
    if assert_failed && !result.outcomes.assertion_can_fail {
        result.outcomes.assertion_can_fail = true;
        result.outcomes.assertion_failure_witness = Some(witness());
    }
    result.outcomes.outcomes.entry(outcome).or_insert_with(witness);
    if has_spans {
        let history = materialize_history(program, state);
        result.histories.entry(history).or_insert_with(witness);
    }
}

fn materialize_history(program: &Program, state: &SState) -> History {
    let mut events = Vec::with_capacity(state.history.len());
    for he in &state.history {
        events.push(match he {
            HEvent::Inv {
                proc,
                spec,
                recovery,
                span,
            } => {
                let s = if *recovery {
                    &program.recovery[*spec as usize]
                } else {
                    &program.threads[*spec as usize]
                };
                let span = &s.spans[*span as usize];
                Event::Invoke {
                    proc: ProcId(*proc),
                    op: span.op.clone(),
                    args: span.args.clone(),
                }
            }
            HEvent::Res { proc, ret } => Event::Respond {
                proc: ProcId(*proc),
                ret: *ret,
            },
            HEvent::Crash { machine } => Event::Crash {
                machine: MachineId(*machine),
            },
        });
    }
    let proc_machine = state
        .threads
        .iter()
        .enumerate()
        .map(|(i, rt)| (ProcId(i as u32 + 1), program.spec_of(rt).machine))
        .collect();
    History::new(events, proc_machine)
}

/// Lexicographic permutations of `1..=n`, used for full-crash injection.
fn lex_permutations(n: u32) -> Vec<Vec<MachineId>> {
    fn go(prefix: &mut Vec<MachineId>, rest: &[MachineId], out: &mut Vec<Vec<MachineId>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for (i, &m) in rest.iter().enumerate() {
            prefix.push(m);
            let mut rem = rest.to_vec();
            rem.remove(i);
            go(prefix, &rem, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(
        &mut Vec::new(),
        &(1..=n).map(MachineId).collect::<Vec<_>>(),
        &mut out,
    );
    out
}

// ---------------------------------------------------------------------------
// Configuration-space enumeration
// ---------------------------------------------------------------------------

/// Enumerate every configuration of `topo` satisfying cache uniqueness, in
/// a fixed order. These are exactly the configurations reachable from the
/// initial one: memory cells are set by direct stores, and any pattern of
/// agreeing cache entries arises from a store followed by loads.
///
/// Fails with [`ExploreError::ConfigSpace`] when the universe exceeds
/// `max_configs`.
pub fn reachable_configs(
    topo: &Topology,
    max_configs: u64,
) -> Result<Vec<Configuration>, ExploreError> {
    let n = topo.machine_count();
    let l = topo.loc_count() as usize;
    let v = topo.domain().len() as u128;
    let subsets = (1u128 << n) - 1;
    // Per location: the all-invalid column, or a value times a non-empty
    // machine subset; independently, a memory value.
    let per_loc = (1 + v * subsets) * v;
    let count = per_loc.pow(l as u32);
    if count > max_configs as u128 {
        return Err(ExploreError::ConfigSpace {
            count,
            limit: max_configs,
        });
    }

    // Options for one location: (cache column, memory value).
    let mut options: Vec<(Vec<Option<Value>>, Value)> = Vec::new();
    let mut columns: Vec<Vec<Option<Value>>> = vec![vec![None; n as usize]];
    for &val in topo.domain() {
        for mask in 1u32..(1 << n) {
            columns.push(
                (0..n)
                    .map(|b| (mask & (1 << b) != 0).then_some(val))
                    .collect(),
            );
        }
    }
    for column in &columns {
        for &mv in topo.domain() {
            options.push((column.clone(), mv));
        }
    }

    let mut out = Vec::with_capacity(count as usize);
    for mut index in 0..count {
        let mut cache = vec![None; n as usize * l];
        let mut mem = vec![0; l];
        for li in 0..l {
            let (column, mv) = &options[(index % options.len() as u128) as usize];
            index /= options.len() as u128;
            for (mi, &entry) in column.iter().enumerate() {
                cache[mi * l + li] = entry;
            }
            mem[li] = *mv;
        }
        out.push(Configuration::from_parts(l as u32, cache, mem));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::{Topology, Volatility};

    fn topo(n: u32, locs: &[(&str, u32)], domain: Vec<Value>) -> Topology {
        Topology::new(
            n,
            locs.iter()
                .map(|(name, owner)| (name.to_string(), MachineId(*owner)))
                .collect(),
            vec![Volatility::NonVolatile; n as usize],
            domain,
        )
        .unwrap()
    }

    /// Independent oracle for the configuration universe: enumerate the full
    /// (cache, mem) product brute-force and keep what satisfies the cache
    /// invariant. Exponentially wasteful, which is fine at oracle sizes.
    fn oracle_configs(t: &Topology) -> Vec<String> {
        let n = t.machine_count() as usize;
        let l = t.loc_count() as usize;
        let dom = t.domain();
        let cache_opts = dom.len() + 1;
        let mut renders = Vec::new();
        let mut cache_idx = vec![0usize; n * l];
        loop {
            let mut mem_idx = vec![0usize; l];
            loop {
                let cache: Vec<Option<Value>> = cache_idx
                    .iter()
                    .map(|&ci| (ci > 0).then(|| dom[ci - 1]))
                    .collect();
                let mem: Vec<Value> = mem_idx.iter().map(|&mi| dom[mi]).collect();
                let cfg = Configuration::from_parts(l as u32, cache, mem);
                if check_cache_invariant(&cfg) {
                    renders.push(cfg.render(t));
                }
                if !bump(&mut mem_idx, dom.len()) {
                    break;
                }
            }
            if !bump(&mut cache_idx, cache_opts) {
                break;
            }
        }
        renders.sort();
        renders
    }

    /// Advance a mixed-radix counter; false on wrap-around.
    fn bump(digits: &mut [usize], base: usize) -> bool {
        for d in digits.iter_mut() {
            *d += 1;
            if *d < base {
                return true;
            }
            *d = 0;
        }
        false
    }

    #[test]
    fn config_universe_one_machine_one_loc() {
        // Oracle-first: 1 machine, 1 location, 2 values. The cache entry has
        // 3 options and memory 2: six configurations.
        let t = topo(1, &[("x", 1)], vec![0, 1]);
        let oracle = oracle_configs(&t);
        assert_eq!(oracle.len(), 6);
        let got = reachable_configs(&t, 1_000).unwrap();
        let mut renders: Vec<String> = got.iter().map(|c| c.render(&t)).collect();
        renders.sort();
        assert_eq!(renders, oracle);
    }

    #[test]
    fn config_universe_two_machines_excludes_disagreeing_caches() {
        // 3 x 3 cache pairs minus the two disagreeing ones, times 2 memory
        // values: 14 configurations. The oracle counts by brute force.
        let t = topo(2, &[("x", 1)], vec![0, 1]);
        let oracle = oracle_configs(&t);
        assert_eq!(oracle.len(), 14);
        let got = reachable_configs(&t, 1_000).unwrap();
        assert_eq!(got.len(), 14);
        let mut renders: Vec<String> = got.iter().map(|c| c.render(&t)).collect();
        renders.sort();
        assert_eq!(renders, oracle);
        assert!(got.iter().all(check_cache_invariant));
    }

    #[test]
    fn config_universe_is_per_location_product() {
        let t = topo(2, &[("x", 1), ("y", 2)], vec![0, 1]);
        let oracle = oracle_configs(&t);
        // Locations are independent: 14 options each, so 196 configurations.
        assert_eq!(oracle.len(), 196);
        let got = reachable_configs(&t, 1_000).unwrap();
        let mut renders: Vec<String> = got.iter().map(|c| c.render(&t)).collect();
        renders.sort();
        assert_eq!(renders, oracle);
    }

    #[test]
    fn config_universe_respects_limit() {
        let t = topo(3, &[("x", 1), ("y", 2)], vec![0, 1, 2]);
        match reachable_configs(&t, 10) {
            Err(ExploreError::ConfigSpace { count, limit: 10 }) => {
                // (1 + 3 * 7) * 3 = 66 options per location, squared.
                assert_eq!(count, 66 * 66);
            }
            other => panic!("expected ConfigSpace error, got {other:?}"),
        }
    }

    #[test]
    fn state_budget_parser_accepts_integers_and_rejects_garbage() {
        assert_eq!(parse_budget(None).unwrap(), DEFAULT_STATE_BUDGET);
        assert_eq!(parse_budget(Some("123".into())).unwrap(), 123);
        assert!(matches!(
            parse_budget(Some("lots".into())),
            Err(ExploreError::BadStateBudget { .. })
        ));
        assert!(matches!(
            parse_budget(Some("0".into())),
            Err(ExploreError::BadStateBudget { .. })
        ));
    }

    fn trace_of(t: &Topology, events: Vec<TraceEvent>) -> FabricTrace {
        FabricTrace {
            topology: t.clone(),
            events,
            reg_names: vec![Vec::new(); t.machine_count() as usize],
        }
    }

    fn op(m: u32, instr: Instr) -> TraceEvent {
        TraceEvent::Op {
            machine: MachineId(m),
            instr,
        }
    }

    #[test]
    fn trace_store_then_remote_load_is_feasible() {
        let t = topo(2, &[("x", 2)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let trace = trace_of(
            &t,
            vec![
                op(
                    1,
                    Instr::Store {
                        class: StoreClass::Local,
                        loc: x,
                        src: Operand::Imm(1),
                    },
                ),
                op(2, Instr::LoadExpect { loc: x, expect: 1 }),
            ],
        );
        let res = feasible_trace(&trace).unwrap();
        assert!(res.feasible);
        let witness = res.witness.unwrap();
        // The witness replays step by step through the core semantics.
        let mut cfg = init_config(&t);
        for label in &witness {
            cfg = semantics::step(&cfg, &t, label).unwrap();
        }
        assert_eq!(cfg.readable_value(x), 1);
    }

    #[test]
    fn trace_requiring_impossible_value_is_infeasible() {
        let t = topo(1, &[("x", 1)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let trace = trace_of(&t, vec![op(1, Instr::LoadExpect { loc: x, expect: 2 })]);
        let res = feasible_trace(&trace).unwrap();
        assert!(!res.feasible);
        assert!(res.witness.is_none());
    }

    #[test]
    fn empty_trace_is_vacuously_feasible() {
        let t = topo(1, &[("x", 1)], vec![0, 1]);
        let res = feasible_trace(&trace_of(&t, vec![])).unwrap();
        assert!(res.feasible);
        assert_eq!(res.witness.unwrap(), Vec::<Label>::new());
    }

    #[test]
    fn trace_register_flows_value_between_locations() {
        let t = topo(2, &[("x", 2), ("y", 1)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let y = t.loc("y").unwrap();
        let mut trace = trace_of(
            &t,
            vec![
                op(
                    1,
                    Instr::Store {
                        class: StoreClass::Remote,
                        loc: x,
                        src: Operand::Imm(2),
                    },
                ),
                op(2, Instr::LoadReg { dest: 0, loc: x }),
                op(
                    2,
                    Instr::Store {
                        class: StoreClass::Remote,
                        loc: y,
                        src: Operand::Reg(0),
                    },
                ),
                op(1, Instr::LoadExpect { loc: y, expect: 2 }),
            ],
        );
        trace.reg_names[1] = vec!["r".to_string()];
        assert!(feasible_trace(&trace).unwrap().feasible);
    }

    #[test]
    fn trace_validation_catches_undefined_register() {
        let t = topo(1, &[("x", 1)], vec![0, 1]);
        let x = t.loc("x").unwrap();
        let mut trace = trace_of(
            &t,
            vec![op(
                1,
                Instr::Store {
                    class: StoreClass::Local,
                    loc: x,
                    src: Operand::Reg(0),
                },
            )],
        );
        trace.reg_names[0] = vec!["r".to_string()];
        assert!(matches!(
            feasible_trace(&trace),
            Err(ExploreError::IllFormed(_))
        ));
    }

    #[test]
    fn crash_clears_trace_registers() {
        let t = topo(1, &[("x", 1)], vec![0, 1]);
        let x = t.loc("x").unwrap();
        let mut trace = trace_of(
            &t,
            vec![
                op(1, Instr::LoadReg { dest: 0, loc: x }),
                TraceEvent::Crash {
                    machine: MachineId(1),
                },
                op(
                    1,
                    Instr::Store {
                        class: StoreClass::Local,
                        loc: x,
                        src: Operand::Reg(0),
                    },
                ),
            ],
        );
        trace.reg_names[0] = vec!["r".to_string()];
        assert!(matches!(
            feasible_trace(&trace),
            Err(ExploreError::IllFormed(_))
        ));
    }

    #[test]
    fn single_thread_outcomes_capture_drained_and_undrained_memory() {
        let t = topo(2, &[("x", 2)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let mut th = ThreadSpec::plain(
            1,
            MachineId(1),
            vec![
                Instr::Store {
                    class: StoreClass::Local,
                    loc: x,
                    src: Operand::Imm(1),
                },
                Instr::LoadReg { dest: 0, loc: x },
            ],
        );
        th.reg_names = vec!["r".to_string()];
        let result = explore(&Program::new(t.clone(), vec![th])).unwrap();
        // The register always reads back 1; memory may or may not have
        // drained by the time the thread finishes.
        let mems: Vec<Value> = result
            .outcomes
            .outcomes
            .keys()
            .map(|o| o.mem["x"])
            .collect();
        assert_eq!(mems, vec![0, 1]);
        assert!(result
            .outcomes
            .outcomes
            .keys()
            .all(|o| o.regs["t1"]["r"] == 1));
        assert!(!result.outcomes.assertion_can_fail);
        assert!(result.histories.is_empty());
        assert_eq!(result.stats.invariant_failures, 0);
        assert_eq!(result.stats.invariant_checks, result.stats.states_visited);
    }

    #[test]
    fn racing_reader_sees_old_or_new_value() {
        let t = topo(2, &[("x", 2)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let writer = ThreadSpec::plain(
            1,
            MachineId(1),
            vec![Instr::Store {
                class: StoreClass::Remote,
                loc: x,
                src: Operand::Imm(1),
            }],
        );
        let mut reader =
            ThreadSpec::plain(2, MachineId(2), vec![Instr::LoadReg { dest: 0, loc: x }]);
        reader.reg_names = vec!["r".to_string()];
        reader.asserts = vec![AssertExpr {
            lhs: 0,
            op: CmpOp::Eq,
            rhs: Operand::Imm(1),
        }];
        let result = explore(&Program::new(t.clone(), vec![writer, reader])).unwrap();
        let reads: std::collections::BTreeSet<Value> = result
            .outcomes
            .outcomes
            .keys()
            .map(|o| o.regs["t2"]["r"])
            .collect();
        assert_eq!(reads.into_iter().collect::<Vec<_>>(), vec![0, 1]);
        // The assertion r == 1 can fail: the read may run before the write.
        assert!(result.outcomes.assertion_can_fail);
        let witness = result.outcomes.assertion_failure_witness.as_ref().unwrap();
        assert!(witness.iter().any(|l| l.starts_with("Load_2")));
    }

    #[test]
    fn crash_injection_respects_budget_and_monotonicity() {
        let t = topo(2, &[("x", 2)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let mk = |budget: CrashBudget| {
            let mut th = ThreadSpec::plain(
                1,
                MachineId(1),
                vec![
                    Instr::Store {
                        class: StoreClass::Remote,
                        loc: x,
                        src: Operand::Imm(1),
                    },
                    Instr::LoadReg { dest: 0, loc: x },
                ],
            );
            th.reg_names = vec!["r".to_string()];
            let mut p = Program::new(t.clone(), vec![th]);
            p.crash_budget = budget;
            p
        };
        let none = explore(&mk(CrashBudget::none(2))).unwrap();
        let one = explore(&mk(CrashBudget::total_any(2, 1))).unwrap();
        let two = explore(&mk(CrashBudget::total_any(2, 2))).unwrap();
        // Without crashes the read is always 1; with the owner crashing the
        // value can be lost, reading 0.
        let reads = |r: &ExploreResult| {
            r.outcomes
                .outcomes
                .keys()
                .filter_map(|o| o.regs.get("t1").map(|f| f["r"]))
                .collect::<std::collections::BTreeSet<_>>()
        };
        assert_eq!(reads(&none).into_iter().collect::<Vec<_>>(), vec![1]);
        assert!(reads(&one).contains(&0));
        // Outcome sets grow monotonically with the budget.
        let o0: std::collections::BTreeSet<_> = none.outcomes.outcomes.keys().cloned().collect();
        let o1: std::collections::BTreeSet<_> = one.outcomes.outcomes.keys().cloned().collect();
        let o2: std::collections::BTreeSet<_> = two.outcomes.outcomes.keys().cloned().collect();
        assert!(o0.is_subset(&o1));
        assert!(o1.is_subset(&o2));
    }

    #[test]
    fn killed_thread_reports_no_registers() {
        let t = topo(1, &[("x", 1)], vec![0, 1]);
        let x = t.loc("x").unwrap();
        let mut th = ThreadSpec::plain(1, MachineId(1), vec![Instr::LoadReg { dest: 0, loc: x }]);
        th.reg_names = vec!["r".to_string()];
        let mut p = Program::new(t.clone(), vec![th]);
        p.crash_budget = CrashBudget::total_any(1, 1);
        let result = explore(&p).unwrap();
        // Some outcome lacks t1 entirely: the machine crashed first.
        assert!(result.outcomes.outcomes.keys().any(|o| o.regs.is_empty()));
    }

    #[test]
    fn exploration_is_deterministic() {
        let t = topo(2, &[("x", 2), ("y", 1)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let y = t.loc("y").unwrap();
        let prog = || {
            let mut a = ThreadSpec::plain(
                1,
                MachineId(1),
                vec![
                    Instr::Store {
                        class: StoreClass::Local,
                        loc: x,
                        src: Operand::Imm(1),
                    },
                    Instr::LoadReg { dest: 0, loc: y },
                ],
            );
            a.reg_names = vec!["ra".to_string()];
            let mut b = ThreadSpec::plain(
                2,
                MachineId(2),
                vec![
                    Instr::Store {
                        class: StoreClass::Local,
                        loc: y,
                        src: Operand::Imm(2),
                    },
                    Instr::LoadReg { dest: 0, loc: x },
                ],
            );
            b.reg_names = vec!["rb".to_string()];
            let mut p = Program::new(t.clone(), vec![a, b]);
            p.crash_budget = CrashBudget::total_any(2, 1);
            p
        };
        let r1 = explore(&prog()).unwrap();
        let r2 = explore(&prog()).unwrap();
        assert_eq!(r1, r2);
    }

    #[test]
    fn state_budget_exhaustion_is_a_hard_error() {
        let t = topo(2, &[("x", 2)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let th = ThreadSpec::plain(
            1,
            MachineId(1),
            vec![Instr::Store {
                class: StoreClass::Local,
                loc: x,
                src: Operand::Imm(1),
            }],
        );
        let mut p = Program::new(t.clone(), vec![th]);
        p.crash_budget = CrashBudget::total_any(2, 2);
        assert!(matches!(
            explore_with_budget(&p, 3),
            Err(ExploreError::StateBudget { budget: 3, .. })
        ));
    }

    #[test]
    fn recovery_thread_spawns_with_fresh_identity() {
        let t = topo(2, &[("x", 2)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let mut main = ThreadSpec::plain(
            1,
            MachineId(1),
            vec![Instr::Store {
                class: StoreClass::Memory,
                loc: x,
                src: Operand::Imm(1),
            }],
        );
        main.spans = vec![OpSpan {
            first: 0,
            last: 0,
            op: "write".into(),
            args: vec![1],
            ret_reg: None,
        }];
        let mut rec = ThreadSpec::plain(0, MachineId(1), vec![Instr::LoadReg { dest: 0, loc: x }]);
        rec.reg_names = vec!["r".to_string()];
        rec.spans = vec![OpSpan {
            first: 0,
            last: 0,
            op: "read".into(),
            args: vec![],
            ret_reg: Some(0),
        }];
        let mut p = Program::new(t.clone(), vec![main]);
        p.recovery = vec![rec];
        p.crash_budget = CrashBudget {
            per_machine: vec![1, 0],
            total: Some(1),
        };
        let result = explore(&p).unwrap();
        // Histories where machine 1 crashed contain proc 2: the recovery
        // instance, distinct from the original proc 1.
        let crashed: Vec<&History> = result
            .histories
            .keys()
            .filter(|h| h.events.iter().any(|e| matches!(e, Event::Crash { .. })))
            .collect();
        assert!(!crashed.is_empty());
        assert!(crashed.iter().all(|h| h
            .events
            .iter()
            .any(|e| matches!(e, Event::Invoke { proc: ProcId(2), .. }))));
        // A recovery read after the completed memory store returns 1.
        assert!(crashed.iter().any(|h| h
            .events
            .iter()
            .any(|e| matches!(e, Event::Respond { proc: ProcId(2), ret: Some(1) }))));
    }

    #[test]
    fn full_crash_injects_every_permutation() {
        let t = topo(2, &[("x", 2)], vec![0, 1, 2]);
        let x = t.loc("x").unwrap();
        let mut th = ThreadSpec::plain(
            1,
            MachineId(1),
            vec![Instr::Store {
                class: StoreClass::Memory,
                loc: x,
                src: Operand::Imm(1),
            }],
        );
        th.spans = vec![OpSpan {
            first: 0,
            last: 0,
            op: "write".into(),
            args: vec![1],
            ret_reg: None,
        }];
        let mut p = Program::new(t.clone(), vec![th]);
        p.full_crash_budget = 1;
        let result = explore(&p).unwrap();
        // Histories with crashes contain both machines' crash events
        // consecutively, in both orders.
        let orders: std::collections::BTreeSet<Vec<u32>> = result
            .histories
            .keys()
            .map(|h| {
                h.events
                    .iter()
                    .filter_map(|e| match e {
                        Event::Crash { machine } => Some(machine.0),
                        _ => None,
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|v| !v.is_empty())
            .collect();
        assert!(orders.contains(&vec![1, 2]));
        assert!(orders.contains(&vec![2, 1]));
    }
}
