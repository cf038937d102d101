//! Durability transformations and object workloads.
//!
//! Linearizable objects built from plain loads and stores are not durably
//! linearizable on a fabric with per-machine crashes: a value can be read
//! while it still lives only in a cache that a crash will erase. The
//! wrappers here close that gap. Four variants are provided, from strongest
//! to weakest store primitive:
//!
//! - `naive-mstore` / `mstore`: every flagged store becomes a memory
//!   store. Persistence is immediate, so loads need no help and no
//!   counters are kept. The naive form is the blanket mapping; `mstore`
//!   is the same mapping presented through the private/shared interface.
//! - `rstore`: flagged stores go to the owner's cache and are propagated
//!   by a remote flush; loads consult a per-location counter and help
//!   flush in-flight stores.
//! - `lstore` (the weakest): like `rstore` but stores stay in the issuing
//!   machine's cache until flushed.
//! - `none`: the untransformed baseline — local stores, plain loads. It
//!   exists to demonstrate the anomaly the wrappers remove.
//!
//! Counted variants bracket each flagged store between a counter increment
//! and decrement; a positive counter tells readers the value they just read
//! may not be persistent yet, and a guarded flush makes it so. Increments
//! default to the memory-store class so that a crash cannot erase the
//! signal while the data survives elsewhere; decrements stay local since a
//! lost decrement only causes benign extra flushes.
//!
//! A [`Workload`] names an object, a variant, per-thread operation lists,
//! and a crash budget; [`Workload::run`] generates the wrapped program,
//! explores every schedule and crash placement, and checks each resulting
//! operation history for durable linearizability.
//!
//! [`translate_durable`] handles the neighboring porting problem: code
//! written for full-system-crash durability (plain stores, non-temporal
//! stores, flushes, fences) is mapped onto the fabric's primitives, with
//! each full-system crash expanded into per-machine crashes in every
//! order.

use crate::explorer::{
    self, CrashBudget, ExploreError, ExploreStats, FabricTrace, Instr, OpSpan, Operand, Program,
    RegId, ThreadSpec, TraceEvent,
};
use crate::linearize::{is_durably_linearizable, CheckError, Event, History, SequentialObject};
use crate::semantics::{
    FlushClass, LocId, MachineId, RmwFunc, StoreClass, Topology, TopologyError, Value, Volatility,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Errors from transformation, workload parsing, and workload execution.
#[derive(Debug, Error)]
pub enum FlitError {
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("unsupported configuration: {0}")]
    UnsupportedConfig(String),
    #[error("volatile shared location {0:?}: durable translation requires non-volatile memory, since volatile contents cannot be recovered after the owner crashes")]
    VolatileShared(String),
    #[error("bad workload: {0}")]
    BadWorkload(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// The transformation applied to every object access.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Mstore,
    Lstore,
    Rstore,
    NaiveMstore,
    /// Untransformed baseline.
    None,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Mstore,
        Variant::Lstore,
        Variant::Rstore,
        Variant::NaiveMstore,
        Variant::None,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Mstore => "mstore",
            Variant::Lstore => "lstore",
            Variant::Rstore => "rstore",
            Variant::NaiveMstore => "naive-mstore",
            Variant::None => "none",
        }
    }

    /// Whether the variant brackets stores with counter operations.
    pub fn counted(self) -> bool {
        matches!(self, Variant::Lstore | Variant::Rstore)
    }
}

impl std::str::FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Variant, String> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| format!("unknown variant {s:?}; expected one of mstore, lstore, rstore, naive-mstore, none"))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Instruction-stream ordering assumption. Only in-order execution is
/// modeled; out-of-order targets would need memory-model-specific fences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecOrder {
    #[default]
    InOrder,
    OutOfOrder,
}

/// The bundled sequential objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectKind {
    /// One read/write cell: `write(v)` and `read() -> v`.
    Register,
    /// Two membership flags: `insert(k)`, `remove(k)`, `contains(k) -> 0/1`
    /// for keys `k ∈ {0, 1}`. Every operation touches exactly one
    /// location, so the untransformed object is linearizable.
    TwoKeySet,
}

/// A bundled object: its name, fields, and sequential semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectSpec {
    pub kind: ObjectKind,
}

impl ObjectSpec {
    pub fn name(&self) -> &'static str {
        match self.kind {
            ObjectKind::Register => "register",
            ObjectKind::TwoKeySet => "two-key-set",
        }
    }

    /// Field names, one memory location each.
    pub fn fields(&self) -> &'static [&'static str] {
        match self.kind {
            ObjectKind::Register => &["x"],
            ObjectKind::TwoKeySet => &["k0", "k1"],
        }
    }
}

/// The single memory access performed by one object operation.
enum Access {
    Store { field: usize, value: Value },
    Load { field: usize },
}

impl ObjectSpec {
    /// Map an operation to its one memory access. Each bundled operation
    /// performs exactly one shared access, which is what makes the
    /// untransformed objects linearizable to begin with.
    fn access(&self, op: &str, args: &[Value]) -> Result<Access, FlitError> {
        let bad = |msg: String| FlitError::BadWorkload(msg);
        let key = |args: &[Value]| -> Result<usize, FlitError> {
            match args {
                [k @ (0 | 1)] => Ok(*k as usize),
                _ => Err(bad(format!("set operations take one key in {{0, 1}}, got {args:?}"))),
            }
        };
        match (self.kind, op) {
            (ObjectKind::Register, "write") => match args {
                [v] => Ok(Access::Store { field: 0, value: *v }),
                _ => Err(bad(format!("write takes one value, got {args:?}"))),
            },
            (ObjectKind::Register, "read") => match args {
                [] => Ok(Access::Load { field: 0 }),
                _ => Err(bad(format!("read takes no arguments, got {args:?}"))),
            },
            (ObjectKind::TwoKeySet, "insert") => Ok(Access::Store { field: key(args)?, value: 1 }),
            (ObjectKind::TwoKeySet, "remove") => Ok(Access::Store { field: key(args)?, value: 0 }),
            (ObjectKind::TwoKeySet, "contains") => Ok(Access::Load { field: key(args)? }),
            _ => Err(bad(format!("object {} has no operation {op:?}", self.name()))),
        }
    }
}

impl SequentialObject for ObjectSpec {
    /// One value per field, in [`ObjectSpec::fields`] order.
    type State = Vec<Value>;

    fn init_state(&self) -> Vec<Value> {
        vec![0; self.fields().len()]
    }

    fn apply(
        &self,
        state: &Vec<Value>,
        op: &str,
        args: &[Value],
    ) -> Result<(Vec<Value>, Option<Value>), String> {
        match self.access(op, args) {
            Ok(Access::Store { field, value }) => {
                let mut next = state.clone();
                next[field] = value;
                Ok((next, None))
            }
            Ok(Access::Load { field }) => Ok((state.clone(), Some(state[field]))),
            Err(err) => Err(err.to_string()),
        }
    }
}

/// Everything the instruction generators need to wrap one access.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransformConfig {
    pub variant: Variant,
    /// Persistence flag per data location; a flagged location gets the
    /// variant's durability treatment, an unflagged one a plain local
    /// store. Lookups of unlisted locations fail.
    pub pflag: BTreeMap<LocId, bool>,
    /// Counter location per data location, for the counted variants.
    pub counter_of: BTreeMap<LocId, LocId>,
    pub counter_inc_class: StoreClass,
    pub counter_dec_class: StoreClass,
    /// Class of the flushes in counted-variant wrappers. Remote reaches
    /// memory; the local class is the fallback for volatile memory, where
    /// reaching physical memory buys nothing.
    pub flush_class: FlushClass,
    pub exec_order: ExecOrder,
}

impl TransformConfig {
    /// Default policy over the given data locations: everything flagged,
    /// memory-class increments, local decrements, remote flushes.
    pub fn new(variant: Variant, data_locs: &[LocId]) -> TransformConfig {
        TransformConfig {
            variant,
            pflag: data_locs.iter().map(|&l| (l, true)).collect(),
            counter_of: BTreeMap::new(),
            counter_inc_class: StoreClass::Memory,
            counter_dec_class: StoreClass::Local,
            flush_class: FlushClass::Remote,
            exec_order: ExecOrder::InOrder,
        }
    }

    fn pflag(&self, loc: LocId) -> Result<bool, FlitError> {
        self.pflag
            .get(&loc)
            .copied()
            .ok_or_else(|| FlitError::UnknownLocation(format!("no pflag for location index {}", loc.0)))
    }

    fn counter(&self, loc: LocId) -> Result<LocId, FlitError> {
        self.counter_of
            .get(&loc)
            .copied()
            .ok_or_else(|| FlitError::UnknownLocation(format!("no counter for location index {}", loc.0)))
    }
}

fn store(class: StoreClass, loc: LocId, src: Operand) -> Instr {
    Instr::Store { class, loc, src }
}

/// The shared-store wrapper for one data location.
///
/// Baseline and unflagged locations get a bare local store. The memory
/// variants store straight to memory — persistence is part of the store,
/// so neither counters nor flushes are needed. The counted variants
/// announce the store by incrementing the location's counter, store at
/// their class, flush the location, and retract the announcement.
pub fn transform_store(
    cfg: &TransformConfig,
    loc: LocId,
    value: Operand,
) -> Result<Vec<Instr>, FlitError> {
    if cfg.variant == Variant::None || !cfg.pflag(loc)? {
        return Ok(vec![store(StoreClass::Local, loc, value)]);
    }
    Ok(match cfg.variant {
        Variant::Mstore | Variant::NaiveMstore => vec![store(StoreClass::Memory, loc, value)],
        Variant::Lstore | Variant::Rstore => {
            let data_class = if cfg.variant == Variant::Lstore {
                StoreClass::Local
            } else {
                StoreClass::Remote
            };
            let cnt = cfg.counter(loc)?;
            vec![
                Instr::Rmw {
                    class: cfg.counter_inc_class,
                    loc: cnt,
                    func: RmwFunc::Add(1),
                },
                store(data_class, loc, value),
                Instr::Flush {
                    class: cfg.flush_class,
                    loc,
                },
                Instr::Rmw {
                    class: cfg.counter_dec_class,
                    loc: cnt,
                    func: RmwFunc::Add(-1),
                },
            ]
        }
        Variant::None => unreachable!("handled above"),
    })
}

/// The shared-load wrapper: load the value into `dest`; under a counted
/// variant also load the location's counter into `tmp` and flush the
/// location if the counter was positive — the value just read may then
/// still be in flight, and the flush sees it to persistence before the
/// operation completes.
pub fn transform_load(
    cfg: &TransformConfig,
    loc: LocId,
    dest: RegId,
    tmp: RegId,
) -> Result<Vec<Instr>, FlitError> {
    let mut seq = vec![Instr::LoadReg { dest, loc }];
    if cfg.variant.counted() && cfg.pflag(loc)? {
        seq.push(Instr::LoadReg {
            dest: tmp,
            loc: cfg.counter(loc)?,
        });
        seq.push(Instr::FlushIfPositive {
            guard: tmp,
            class: cfg.flush_class,
            loc,
        });
    }
    Ok(seq)
}

/// The private-store wrapper: no concurrent helpers exist, so no counter
/// is kept — a flagged store is simply made persistent before returning.
pub fn transform_private_store(
    cfg: &TransformConfig,
    loc: LocId,
    value: Operand,
) -> Result<Vec<Instr>, FlitError> {
    if cfg.variant == Variant::None || !cfg.pflag(loc)? {
        return Ok(vec![store(StoreClass::Local, loc, value)]);
    }
    Ok(match cfg.variant {
        Variant::Mstore | Variant::NaiveMstore => vec![store(StoreClass::Memory, loc, value)],
        Variant::Lstore | Variant::Rstore => {
            let data_class = if cfg.variant == Variant::Lstore {
                StoreClass::Local
            } else {
                StoreClass::Remote
            };
            vec![
                store(data_class, loc, value),
                Instr::Flush {
                    class: cfg.flush_class,
                    loc,
                },
            ]
        }
        Variant::None => unreachable!("handled above"),
    })
}

/// The private-load wrapper: a bare load in every variant.
pub fn transform_private_load(_cfg: &TransformConfig, loc: LocId, dest: RegId) -> Vec<Instr> {
    vec![Instr::LoadReg { dest, loc }]
}

/// The operation-completion hook. Empty under in-order execution: stores
/// persist inside their own wrappers and guarded flushes block until done,
/// so nothing remains to wait for. Out-of-order mode is rejected — correct
/// fence placement there depends on the target memory model.
pub fn complete_op(cfg: &TransformConfig) -> Result<Vec<Instr>, FlitError> {
    match cfg.exec_order {
        ExecOrder::InOrder => Ok(Vec::new()),
        ExecOrder::OutOfOrder => Err(FlitError::UnsupportedConfig(
            "out-of-order execution would need memory-model-specific fences in completion hooks; \
             only in-order mode is modeled"
                .to_string(),
        )),
    }
}

// ---------------------------------------------------------------------------
// Workloads
// ---------------------------------------------------------------------------

/// One object operation call in a workload file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCall {
    pub op: String,
    #[serde(default)]
    pub args: Vec<Value>,
}

/// The operations one thread performs, in order, on its machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThreadOps {
    pub machine: u32,
    pub ops: Vec<OpCall>,
}

/// Crash budget in a workload file: either a total across all machines or
/// an explicit per-machine map (machine number to maximum crashes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum BudgetSpec {
    Total(u32),
    PerMachine(BTreeMap<u32, u32>),
}

impl Default for BudgetSpec {
    fn default() -> BudgetSpec {
        BudgetSpec::PerMachine(BTreeMap::new())
    }
}

// Hand-written so that a JSON object like {"1": 1} parses: JSON map keys
// are strings, and serde's untagged machinery does not convert them back
// to integers.
impl<'de> serde::Deserialize<'de> for BudgetSpec {
    fn deserialize<D>(deserializer: D) -> Result<BudgetSpec, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        struct BudgetVisitor;

        impl<'de> serde::de::Visitor<'de> for BudgetVisitor {
            type Value = BudgetSpec;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a crash count or a {machine: count} map")
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<BudgetSpec, E> {
                u32::try_from(v)
                    .map(BudgetSpec::Total)
                    .map_err(|_| E::custom("crash budget out of range"))
            }

            fn visit_map<A>(self, mut access: A) -> Result<BudgetSpec, A::Error>
            where
                A: serde::de::MapAccess<'de>,
            {
                let mut per = BTreeMap::new();
                while let Some((key, count)) = access.next_entry::<String, u32>()? {
                    let machine: u32 = key.parse().map_err(|_| {
                        serde::de::Error::custom(format!("machine key `{key}` is not a number"))
                    })?;
                    per.insert(machine, count);
                }
                Ok(BudgetSpec::PerMachine(per))
            }
        }

        deserializer.deserialize_any(BudgetVisitor)
    }
}

/// Per-machine volatility in a workload file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolatilitySpec {
    Volatile,
    Nonvolatile,
}

/// A complete object workload: what to run, under which transformation,
/// with which crashes. Parsed from JSON; unspecified fields default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Workload {
    pub object: ObjectKind,
    pub variant: Variant,
    #[serde(default)]
    pub threads: Vec<ThreadOps>,
    #[serde(default)]
    pub crash_budget: BudgetSpec,
    /// Persistence flags by field name; unlisted fields are flagged.
    #[serde(default)]
    pub pflags: BTreeMap<String, bool>,
    /// Machine count; defaults to the highest machine mentioned.
    #[serde(default)]
    pub machines: Option<u32>,
    /// Machine owning the data locations; defaults to a dedicated machine
    /// after the highest thread machine.
    #[serde(default)]
    pub data_machine: Option<u32>,
    /// Machine owning the counters; defaults to the lowest non-volatile
    /// machine, keeping the store-in-progress signal crash-proof.
    #[serde(default)]
    pub counter_machine: Option<u32>,
    /// Volatility by machine number; unlisted machines are non-volatile.
    #[serde(default)]
    pub volatility: BTreeMap<u32, VolatilitySpec>,
    /// Store class of counter increments.
    #[serde(default = "default_inc_class")]
    pub counter_inc_class: StoreClass,
    /// Store class of counter decrements.
    #[serde(default = "default_dec_class")]
    pub counter_dec_class: StoreClass,
    /// Flush class of the counted-variant wrappers.
    #[serde(default = "default_flush_class")]
    pub flush_class: FlushClass,
    #[serde(default)]
    pub exec_order: ExecOrder,
}

fn default_inc_class() -> StoreClass {
    StoreClass::Memory
}

fn default_dec_class() -> StoreClass {
    StoreClass::Local
}

fn default_flush_class() -> FlushClass {
    FlushClass::Remote
}

/// One non-durably-linearizable history found by [`Workload::run`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Compact rendering of the offending history.
    pub history: String,
    /// The witness schedule (rendered labels) that produced it.
    pub witness: Vec<String>,
}

/// Result of running one workload: every distinct operation history was
/// generated and checked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WorkloadReport {
    pub object: String,
    pub variant: Variant,
    pub threads: usize,
    pub operations: usize,
    pub histories_checked: u64,
    pub violations: Vec<Violation>,
    pub stats: ExploreStats,
}

/// Compact one-line rendering of a history for reports.
pub fn render_history(h: &History) -> String {
    let parts: Vec<String> = h
        .events
        .iter()
        .map(|e| match e {
            Event::Invoke { proc, op, args } => {
                let args: Vec<String> = args.iter().map(Value::to_string).collect();
                format!("inv p{} {}({})", proc.0, op, args.join(","))
            }
            Event::Respond { proc, ret } => match ret {
                Some(v) => format!("res p{} {v}", proc.0),
                None => format!("res p{} -", proc.0),
            },
            Event::Crash { machine } => format!("crash m{machine}"),
        })
        .collect();
    parts.join("; ")
}

/// The derived placement of a workload: topology plus transform config.
struct Layout {
    topology: Topology,
    cfg: TransformConfig,
    /// Field index to data location.
    data_loc: Vec<LocId>,
}

impl Workload {
    /// Parse a workload from its JSON file format.
    pub fn from_json(text: &str) -> Result<Workload, FlitError> {
        serde_json::from_str(text).map_err(|err| FlitError::BadWorkload(err.to_string()))
    }

    fn total_ops(&self) -> usize {
        self.threads.iter().map(|t| t.ops.len()).sum()
    }

    fn layout(&self) -> Result<Layout, FlitError> {
        let bad = |msg: String| FlitError::BadWorkload(msg);
        for t in &self.threads {
            if t.machine == 0 {
                return Err(bad("machines are numbered from 1".to_string()));
            }
        }
        let max_thread_machine = self.threads.iter().map(|t| t.machine).max().unwrap_or(0);
        let data_machine = match self.data_machine {
            Some(0) => return Err(bad("machines are numbered from 1".to_string())),
            Some(m) => m,
            None => max_thread_machine + 1,
        };
        let mut machines = max_thread_machine
            .max(data_machine)
            .max(self.machines.unwrap_or(0))
            .max(1);
        if let Some(declared) = self.machines {
            if declared < machines {
                return Err(bad(format!(
                    "machines is {declared}, but machine {machines} is referenced"
                )));
            }
        }
        // Volatility, defaulting to non-volatile; may extend the machine
        // count when listing a higher machine than any referenced.
        if let Some(&m) = self.volatility.keys().max() {
            if m == 0 {
                return Err(bad("machines are numbered from 1".to_string()));
            }
            machines = machines.max(m);
        }
        let volatility: Vec<Volatility> = (1..=machines)
            .map(|m| match self.volatility.get(&m) {
                Some(VolatilitySpec::Volatile) => Volatility::Volatile,
                _ => Volatility::NonVolatile,
            })
            .collect();
        let counter_machine = match self.counter_machine {
            Some(0) => return Err(bad("machines are numbered from 1".to_string())),
            Some(m) if m > machines => return Err(bad(format!(
                "counter machine {m} is beyond the {machines}-machine fabric"
            ))),
            Some(m) => m,
            None => match volatility.iter().position(|&v| v == Volatility::NonVolatile) {
                Some(idx) => idx as u32 + 1,
                None => {
                    return Err(bad(
                        "every machine is volatile; counters need a non-volatile home"
                            .to_string(),
                    ))
                }
            },
        };

        let spec = ObjectSpec { kind: self.object };
        let fields = spec.fields();
        for name in self.pflags.keys() {
            if !fields.contains(&name.as_str()) {
                return Err(bad(format!(
                    "pflag for unknown field {name:?}; {} has fields {fields:?}",
                    spec.name()
                )));
            }
        }
        let mut locs: Vec<(String, MachineId)> = fields
            .iter()
            .map(|f| (f.to_string(), MachineId(data_machine)))
            .collect();
        if self.variant.counted() {
            for f in fields {
                locs.push((format!("c_{f}"), MachineId(counter_machine)));
            }
        }

        // Domain: every stored value, plus headroom for counters. A
        // memory-class increment invalidates any cached decrement, so lost
        // decrements can pile up one per store wrapper: the counter ranges
        // over ±total_ops in the worst case, in either class assignment.
        let total_ops = self.total_ops() as Value;
        let args_min = self
            .threads
            .iter()
            .flat_map(|t| t.ops.iter().flat_map(|o| o.args.iter().copied()))
            .min()
            .unwrap_or(0);
        let args_max = self
            .threads
            .iter()
            .flat_map(|t| t.ops.iter().flat_map(|o| o.args.iter().copied()))
            .max()
            .unwrap_or(0);
        let lo = args_min.min(-total_ops).min(0);
        let hi = args_max.max(total_ops).max(1);
        let domain: Vec<Value> = (lo..=hi).collect();

        let topology = Topology::new(machines, locs, volatility, domain)?;
        let data_loc: Vec<LocId> = fields
            .iter()
            .map(|f| topology.loc(f).expect("declared above"))
            .collect();
        let mut cfg = TransformConfig::new(self.variant, &data_loc);
        for (name, &flag) in &self.pflags {
            let l = topology.loc(name).expect("field names checked above");
            cfg.pflag.insert(l, flag);
        }
        if self.variant.counted() {
            for (i, f) in fields.iter().enumerate() {
                let c = topology
                    .loc(&format!("c_{f}"))
                    .expect("declared above");
                cfg.counter_of.insert(data_loc[i], c);
            }
        }
        cfg.counter_inc_class = self.counter_inc_class;
        cfg.counter_dec_class = self.counter_dec_class;
        cfg.flush_class = self.flush_class;
        cfg.exec_order = self.exec_order;
        Ok(Layout {
            topology,
            cfg,
            data_loc,
        })
    }

    /// Generate the explorable program: every operation wrapped per the
    /// variant, with invocation/response spans for history extraction.
    pub fn build_program(&self) -> Result<Program, FlitError> {
        let layout = self.layout()?;
        let spec = ObjectSpec { kind: self.object };
        let machines = layout.topology.machine_count();
        let mut threads = Vec::new();
        for (ti, t) in self.threads.iter().enumerate() {
            let mut instrs: Vec<Instr> = Vec::new();
            let mut spans: Vec<OpSpan> = Vec::new();
            let mut reg_names: Vec<String> = Vec::new();
            for (oi, call) in t.ops.iter().enumerate() {
                let first = instrs.len() as u32;
                let ret_reg = match spec.access(&call.op, &call.args)? {
                    Access::Store { field, value } => {
                        let loc = layout.data_loc[field];
                        if !layout.topology.in_domain(value) {
                            return Err(FlitError::BadWorkload(format!(
                                "stored value {value} escapes the derived domain"
                            )));
                        }
                        let mut seq =
                            transform_store(&layout.cfg, loc, Operand::Imm(value))?;
                        seq.extend(complete_op(&layout.cfg)?);
                        instrs.extend(seq);
                        None
                    }
                    Access::Load { field } => {
                        let loc = layout.data_loc[field];
                        let dest = reg_names.len() as RegId;
                        reg_names.push(format!("r{}", oi + 1));
                        // The counter scratch register; unused (and not
                        // allocated) outside the counted variants.
                        let tmp = dest + 1;
                        let seq = transform_load(&layout.cfg, loc, dest, tmp)?;
                        if seq.iter().any(|i| matches!(i, Instr::LoadReg { dest, .. } if *dest == tmp))
                        {
                            reg_names.push(format!("c{}", oi + 1));
                        }
                        let mut seq = seq;
                        seq.extend(complete_op(&layout.cfg)?);
                        instrs.extend(seq);
                        Some(dest)
                    }
                };
                spans.push(OpSpan {
                    first,
                    last: instrs.len() as u32 - 1,
                    op: call.op.clone(),
                    args: call.args.clone(),
                    ret_reg,
                });
            }
            threads.push(ThreadSpec {
                display_id: ti as u32 + 1,
                machine: MachineId(t.machine),
                instrs,
                asserts: Vec::new(),
                reg_names,
                spans,
            });
        }
        let crash_budget = match &self.crash_budget {
            BudgetSpec::Total(k) => CrashBudget::total_any(machines, *k),
            BudgetSpec::PerMachine(map) => {
                for &m in map.keys() {
                    if m == 0 || m > machines {
                        return Err(FlitError::BadWorkload(format!(
                            "crash budget names machine {m}, outside the {machines}-machine fabric"
                        )));
                    }
                }
                CrashBudget {
                    per_machine: (1..=machines)
                        .map(|m| map.get(&m).copied().unwrap_or(0))
                        .collect(),
                    total: None,
                }
            }
        };
        let mut program = Program::new(layout.topology, threads);
        program.crash_budget = crash_budget;
        program.validate()?;
        Ok(program)
    }

    /// Run the workload: explore exhaustively and check every distinct
    /// history for durable linearizability.
    pub fn run(&self) -> Result<WorkloadReport, FlitError> {
        let program = self.build_program()?;
        let mut result = explorer::explore(&program)?;
        // A workload with no operations still has one observable history:
        // the empty one. The explorer only records histories at operation
        // boundaries, so synthesise it here.
        if self.total_ops() == 0 {
            result.histories.entry(History::default()).or_default();
        }
        let spec = ObjectSpec { kind: self.object };
        let mut violations = Vec::new();
        for (history, witness) in &result.histories {
            let outcome = is_durably_linearizable(history, &spec)?;
            if !outcome.linearizable {
                violations.push(Violation {
                    history: render_history(history),
                    witness: witness.clone(),
                });
            }
        }
        Ok(WorkloadReport {
            object: spec.name().to_string(),
            variant: self.variant,
            threads: self.threads.len(),
            operations: self.total_ops(),
            histories_checked: result.histories.len() as u64,
            violations,
            stats: result.stats,
        })
    }
}

// ---------------------------------------------------------------------------
// Durable-code translation
// ---------------------------------------------------------------------------

/// One event of a program written against full-system-crash durability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DurableEvent {
    /// Regular (temporal) store.
    Store { machine: u32, loc: String, value: Value },
    /// Non-temporal store, bypassing the cache.
    NtStore { machine: u32, loc: String, value: Value },
    /// Load observing a particular value.
    Load { machine: u32, loc: String, expect: Value },
    Flush { machine: u32, loc: String },
    Fence { machine: u32 },
    /// Full-system crash: every machine crashes, in some order.
    CrashFull,
}

/// A program in the full-system-crash vocabulary, plus its memory layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurableInput {
    pub machines: u32,
    /// Location names and owning machines.
    pub locs: Vec<(String, u32)>,
    pub volatility: Vec<Volatility>,
    pub domain: Vec<Value>,
    pub events: Vec<DurableEvent>,
}

/// All permutations of `1..=n`, in lexicographic order.
fn permutations(n: u32) -> Vec<Vec<u32>> {
    fn build(prefix: &mut Vec<u32>, rest: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let x = rest.remove(i);
            prefix.push(x);
            build(prefix, rest, out);
            prefix.pop();
            rest.insert(i, x);
        }
    }
    let mut out = Vec::new();
    build(&mut Vec::new(), &mut (1..=n).collect(), &mut out);
    out
}

/// Translate full-system-crash durable code to fabric traces.
///
/// Regular stores become local stores, non-temporal stores memory stores,
/// flushes remote flushes; loads and fences pass through. Each full-system
/// crash expands into consecutive per-machine crashes, and since the fabric
/// distinguishes crash orders, one trace is produced for every combination
/// of orders. Volatile memory is rejected: nothing written there can
/// survive its owner's crash, so the source program's durability contract
/// cannot be preserved.
pub fn translate_durable(input: &DurableInput) -> Result<Vec<FabricTrace>, FlitError> {
    for (i, v) in input.volatility.iter().enumerate() {
        if *v == Volatility::Volatile {
            let m = MachineId(i as u32 + 1);
            let name = input
                .locs
                .iter()
                .find(|(_, owner)| *owner == m.0)
                .map(|(n, _)| n.clone())
                .unwrap_or_else(|| format!("memory of machine {m}"));
            return Err(FlitError::VolatileShared(name));
        }
    }
    let topology = Topology::new(
        input.machines,
        input
            .locs
            .iter()
            .map(|(n, o)| (n.clone(), MachineId(*o)))
            .collect(),
        input.volatility.clone(),
        input.domain.clone(),
    )?;
    let lookup = |name: &str| -> Result<LocId, FlitError> {
        topology
            .loc(name)
            .ok_or_else(|| FlitError::UnknownLocation(name.to_string()))
    };

    // Translate instruction by instruction; full crashes become slots to
    // fill with one machine permutation each.
    enum Piece {
        Fixed(TraceEvent),
        FullCrash,
    }
    let mut pieces = Vec::new();
    for ev in &input.events {
        match ev {
            DurableEvent::Store { machine, loc, value } => pieces.push(Piece::Fixed(TraceEvent::Op {
                machine: MachineId(*machine),
                instr: store(StoreClass::Local, lookup(loc)?, Operand::Imm(*value)),
            })),
            DurableEvent::NtStore { machine, loc, value } => pieces.push(Piece::Fixed(TraceEvent::Op {
                machine: MachineId(*machine),
                instr: store(StoreClass::Memory, lookup(loc)?, Operand::Imm(*value)),
            })),
            DurableEvent::Load { machine, loc, expect } => pieces.push(Piece::Fixed(TraceEvent::Op {
                machine: MachineId(*machine),
                instr: Instr::LoadExpect {
                    loc: lookup(loc)?,
                    expect: *expect,
                },
            })),
            DurableEvent::Flush { machine, loc } => pieces.push(Piece::Fixed(TraceEvent::Op {
                machine: MachineId(*machine),
                instr: Instr::Flush {
                    class: FlushClass::Remote,
                    loc: lookup(loc)?,
                },
            })),
            DurableEvent::Fence { machine } => pieces.push(Piece::Fixed(TraceEvent::Op {
                machine: MachineId(*machine),
                instr: Instr::Fence,
            })),
            DurableEvent::CrashFull => pieces.push(Piece::FullCrash),
        }
    }

    let n_full = pieces.iter().filter(|p| matches!(p, Piece::FullCrash)).count();
    let perms = permutations(input.machines);
    // One choice of permutation per full crash; odometer over them.
    let mut selector = vec![0usize; n_full];
    let mut traces = Vec::new();
    loop {
        let mut events = Vec::new();
        let mut slot = 0;
        for p in &pieces {
            match p {
                Piece::Fixed(ev) => events.push(ev.clone()),
                Piece::FullCrash => {
                    for &m in &perms[selector[slot]] {
                        events.push(TraceEvent::Crash {
                            machine: MachineId(m),
                        });
                    }
                    slot += 1;
                }
            }
        }
        let trace = FabricTrace {
            topology: topology.clone(),
            events,
            reg_names: vec![Vec::new(); input.machines as usize],
        };
        trace.validate()?;
        traces.push(trace);
        // Advance the odometer; done when it wraps (or there is nothing
        // to advance and the single fixed trace is emitted).
        let mut i = 0;
        loop {
            if i == selector.len() {
                return Ok(traces);
            }
            selector[i] += 1;
            if selector[i] < perms.len() {
                break;
            }
            selector[i] = 0;
            i += 1;
        }
    }
}
