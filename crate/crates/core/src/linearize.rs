//! Concurrent histories and a decision procedure for (durable)
//! linearizability.
//!
//! A [`History`] is a finite sequence of invocation, response and crash
//! events. Procs are logical operation issuers: each belongs to a machine,
//! issues operations one at a time, and stops issuing forever once its
//! machine crashes. Code that runs after a crash (recovery) uses fresh proc
//! ids, so a proc never adopts another proc's pending operation.
//!
//! [`is_linearizable`] decides classic linearizability against a sequential
//! object: there must be a total order of the operations that respects
//! real-time precedence (a response before an invocation orders the two
//! operations) and replays correctly on the sequential object. Pending
//! operations (invoked, never responded) may either take effect with some
//! return value or be dropped entirely.
//!
//! [`is_durably_linearizable`] additionally accepts crash events: the
//! history is checked for crash well-formedness and then, with all crash
//! events removed, for plain linearizability. Operations that were pending
//! at a crash remain pending and are completed or dropped like any others.
//!
//! The search is exact and exponential in the worst case, tamed by
//! memoizing failed `(linearized-set, object-state)` pairs, which keeps
//! realistic small histories cheap. Histories beyond [`MAX_OPS`] operations
//! are rejected with a resource error rather than silently truncated.

use crate::semantics::{MachineId, Value};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::Hash;
use thiserror::Error;

/// A logical operation issuer. Proc ids are positive and never reused.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct ProcId(pub u32);

impl fmt::Display for ProcId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One history event.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Event {
    Invoke {
        proc: ProcId,
        op: String,
        args: Vec<Value>,
    },
    Respond {
        proc: ProcId,
        /// `None` models an operation that returns nothing.
        ret: Option<Value>,
    },
    Crash { machine: MachineId },
}

/// A finite concurrent history plus the proc-to-machine assignment used to
/// interpret crash events.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct History {
    pub events: Vec<Event>,
    /// Machine of each proc. Procs not listed default to the machine with
    /// the proc's own number, which covers the common one-proc-per-machine
    /// case.
    pub proc_machine: BTreeMap<ProcId, MachineId>,
}

impl History {
    pub fn new(events: Vec<Event>, proc_machine: BTreeMap<ProcId, MachineId>) -> History {
        History {
            events,
            proc_machine,
        }
    }

    /// The machine a proc runs on (defaulting to the proc's own number).
    pub fn machine_of(&self, p: ProcId) -> MachineId {
        self.proc_machine.get(&p).copied().unwrap_or(MachineId(p.0))
    }

    /// The same history with every crash event removed.
    pub fn strip_crashes(&self) -> History {
        History {
            events: self
                .events
                .iter()
                .filter(|e| !matches!(e, Event::Crash { .. }))
                .cloned()
                .collect(),
            proc_machine: self.proc_machine.clone(),
        }
    }

    /// Keep only events of procs selected by `keep`, dropping crashes too.
    /// Used to project composed-object histories onto one component.
    pub fn project(&self, mut keep: impl FnMut(&str) -> bool) -> History {
        let mut events = Vec::new();
        let mut included: HashSet<ProcId> = HashSet::new();
        let mut pending_kept: HashMap<ProcId, bool> = HashMap::new();
        for e in &self.events {
            match e {
                Event::Invoke { proc, op, .. } => {
                    let k = keep(op);
                    pending_kept.insert(*proc, k);
                    if k {
                        included.insert(*proc);
                        events.push(e.clone());
                    }
                }
                Event::Respond { proc, .. } => {
                    if pending_kept.remove(proc).unwrap_or(false) {
                        events.push(e.clone());
                    }
                }
                Event::Crash { .. } => {}
            }
        }
        History {
            events,
            proc_machine: self
                .proc_machine
                .iter()
                .filter(|(p, _)| included.contains(p))
                .map(|(p, m)| (*p, *m))
                .collect(),
        }
    }

    /// Parse one history from JSON-lines text. Blank lines are skipped.
    ///
    /// ```text
    /// {"e":"inv","p":1,"op":"write","args":[1]}
    /// {"e":"res","p":1,"ret":null}
    /// {"e":"crash","m":2}
    /// ```
    ///
    /// An invocation may carry `"m"` to place the proc on a machine; without
    /// it, proc `p` is assumed to run on machine `p`.
    pub fn from_jsonl(text: &str) -> Result<History, HistoryError> {
        let mut events = Vec::new();
        let mut proc_machine = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let wire: WireEvent = serde_json::from_str(line).map_err(|err| {
                HistoryError::Syntax {
                    line: lineno + 1,
                    message: err.to_string(),
                }
            })?;
            let bad = |message: &str| HistoryError::Syntax {
                line: lineno + 1,
                message: message.to_string(),
            };
            match wire.e.as_str() {
                "inv" => {
                    let p = ProcId(wire.p.ok_or_else(|| bad("\"inv\" event needs \"p\""))?);
                    if let Some(m) = wire.m {
                        proc_machine.insert(p, MachineId(m));
                    }
                    events.push(Event::Invoke {
                        proc: p,
                        op: wire.op.ok_or_else(|| bad("\"inv\" event needs \"op\""))?,
                        args: wire.args.unwrap_or_default(),
                    });
                }
                "res" => events.push(Event::Respond {
                    proc: ProcId(wire.p.ok_or_else(|| bad("\"res\" event needs \"p\""))?),
                    ret: wire.ret,
                }),
                "crash" => events.push(Event::Crash {
                    machine: MachineId(
                        wire.m.ok_or_else(|| bad("\"crash\" event needs \"m\""))?,
                    ),
                }),
                other => {
                    return Err(bad(&format!(
                        "unknown event kind {other:?} (expected inv, res or crash)"
                    )))
                }
            }
        }
        Ok(History::new(events, proc_machine))
    }

    /// Serialize to the JSON-lines wire form; inverse of [`History::from_jsonl`].
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let wire = match e {
                Event::Invoke { proc, op, args } => WireEvent {
                    e: "inv".into(),
                    p: Some(proc.0),
                    op: Some(op.clone()),
                    args: Some(args.clone()),
                    ret: None,
                    m: self.proc_machine.get(proc).map(|m| m.0),
                },
                Event::Respond { proc, ret } => WireEvent {
                    e: "res".into(),
                    p: Some(proc.0),
                    op: None,
                    args: None,
                    ret: *ret,
                    m: None,
                },
                Event::Crash { machine } => WireEvent {
                    e: "crash".into(),
                    p: None,
                    op: None,
                    args: None,
                    ret: None,
                    m: Some(machine.0),
                },
            };
            out.push_str(&serde_json::to_string(&wire).expect("wire events serialize"));
            out.push('\n');
        }
        out
    }
}

/// JSON-lines wire representation of one event.
#[derive(Serialize, Deserialize)]
struct WireEvent {
    e: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    op: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    args: Option<Vec<Value>>,
    // "ret":null is meaningful (an operation that returns nothing), so it is
    // always emitted for responses and never for other events.
    #[serde(default)]
    ret: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    m: Option<u32>,
}

/// Ill-formed histories and parse failures.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum HistoryError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("event {index}: proc {proc} responds without a pending invocation")]
    ResponseWithoutInvocation { index: usize, proc: ProcId },
    #[error("event {index}: proc {proc} invokes while a previous operation is still pending")]
    OverlappingInvocation { index: usize, proc: ProcId },
    #[error(
        "event {index}: proc {proc} acts after its machine {machine} crashed; \
         recovery must use fresh proc ids"
    )]
    ProcAfterCrash {
        index: usize,
        proc: ProcId,
        machine: MachineId,
    },
}

/// Check history well-formedness: per proc, invocations and responses
/// alternate starting with an invocation, and no proc acts once its machine
/// has crashed.
pub fn check_well_formed(h: &History) -> Result<(), HistoryError> {
    let mut pending: HashSet<ProcId> = HashSet::new();
    let mut crashed: HashSet<MachineId> = HashSet::new();
    for (index, e) in h.events.iter().enumerate() {
        match e {
            Event::Invoke { proc, .. } => {
                let machine = h.machine_of(*proc);
                if crashed.contains(&machine) {
                    return Err(HistoryError::ProcAfterCrash {
                        index,
                        proc: *proc,
                        machine,
                    });
                }
                if !pending.insert(*proc) {
                    return Err(HistoryError::OverlappingInvocation { index, proc: *proc });
                }
            }
            Event::Respond { proc, .. } => {
                let machine = h.machine_of(*proc);
                if crashed.contains(&machine) {
                    return Err(HistoryError::ProcAfterCrash {
                        index,
                        proc: *proc,
                        machine,
                    });
                }
                if !pending.remove(proc) {
                    return Err(HistoryError::ResponseWithoutInvocation { index, proc: *proc });
                }
            }
            Event::Crash { machine } => {
                crashed.insert(*machine);
            }
        }
    }
    Ok(())
}

/// A deterministic sequential object that histories are checked against.
pub trait SequentialObject {
    /// Sequential object state; must be cheap to clone and hashable for
    /// memoization.
    type State: Clone + Eq + Hash + Ord;

    fn init_state(&self) -> Self::State;

    /// Apply one operation, returning the next state and the return value
    /// (`None` for operations that return nothing). Fails on unknown
    /// operations or bad arities.
    fn apply(
        &self,
        state: &Self::State,
        op: &str,
        args: &[Value],
    ) -> Result<(Self::State, Option<Value>), String>;
}

/// Hard cap on the number of operations the exact search accepts.
pub const MAX_OPS: usize = 16;

/// Errors from the linearizability checkers.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("history is ill-formed: {0}")]
    Malformed(#[from] HistoryError),
    #[error("history has {ops} operations, beyond the checker limit of {limit}")]
    TooManyOps { ops: usize, limit: usize },
    #[error("sequential object rejected operation {op:?}: {message}")]
    BadOperation { op: String, message: String },
}

/// One step of a linearization witness: the operation as it took effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LinStep {
    pub proc: ProcId,
    pub op: String,
    pub args: Vec<Value>,
    pub ret: Option<Value>,
    /// True when the operation was pending in the history and the witness
    /// chose to complete it.
    pub completed_pending: bool,
}

/// Result of a linearizability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinOutcome {
    pub linearizable: bool,
    /// A legal linearization order when `linearizable` holds. Pending
    /// operations the witness dropped simply do not appear.
    pub witness: Option<Vec<LinStep>>,
}

#[derive(Debug, Clone)]
struct OpRec {
    proc: ProcId,
    op: String,
    args: Vec<Value>,
    inv_idx: usize,
    /// `None` while pending.
    res_idx: Option<usize>,
    /// Observed return value; `None` while pending.
    ret: Option<Option<Value>>,
}

fn collect_ops(h: &History) -> Vec<OpRec> {
    let mut ops: Vec<OpRec> = Vec::new();
    let mut open: HashMap<ProcId, usize> = HashMap::new();
    for (idx, e) in h.events.iter().enumerate() {
        match e {
            Event::Invoke { proc, op, args } => {
                open.insert(*proc, ops.len());
                ops.push(OpRec {
                    proc: *proc,
                    op: op.clone(),
                    args: args.clone(),
                    inv_idx: idx,
                    res_idx: None,
                    ret: None,
                });
            }
            Event::Respond { proc, ret } => {
                let at = open.remove(proc).expect("well-formedness checked");
                ops[at].res_idx = Some(idx);
                ops[at].ret = Some(*ret);
            }
            Event::Crash { .. } => {}
        }
    }
    ops
}

/// Decide linearizability of a crash-free history against `object`.
///
/// The history must be well-formed and contain no crash events (use
/// [`is_durably_linearizable`] for crashing histories).
pub fn is_linearizable<O: SequentialObject>(
    h: &History,
    object: &O,
) -> Result<LinOutcome, CheckError> {
    check_well_formed(h)?;
    if h.events.iter().any(|e| matches!(e, Event::Crash { .. })) {
        // Deliberately strict: passing a crashing history here is almost
        // always a mistake; the durable checker strips crashes explicitly.
        return Err(CheckError::BadOperation {
            op: "crash".into(),
            message: "plain linearizability is defined on crash-free histories".into(),
        });
    }
    let ops = collect_ops(h);
    if ops.len() > MAX_OPS {
        return Err(CheckError::TooManyOps {
            ops: ops.len(),
            limit: MAX_OPS,
        });
    }

    let completed_mask: u32 = ops
        .iter()
        .enumerate()
        .filter(|(_, o)| o.res_idx.is_some())
        .fold(0, |acc, (i, _)| acc | (1 << i));

    let mut search = Search {
        ops: &ops,
        object,
        completed_mask,
        failed: HashSet::new(),
        witness: Vec::new(),
    };
    let found = search.run(0, object.init_state())?;
    Ok(LinOutcome {
        linearizable: found,
        witness: found.then(|| search.witness.clone()),
    })
}

struct Search<'a, O: SequentialObject> {
    ops: &'a [OpRec],
    object: &'a O,
    completed_mask: u32,
    /// (linearized-set, state) pairs known not to extend to a full
    /// linearization.
    failed: HashSet<(u32, O::State)>,
    witness: Vec<LinStep>,
}

impl<O: SequentialObject> Search<'_, O> {
    fn run(&mut self, done: u32, state: O::State) -> Result<bool, CheckError> {
        if done & self.completed_mask == self.completed_mask {
            // Every completed operation is linearized; remaining pending
            // operations are dropped.
            return Ok(true);
        }
        if self.failed.contains(&(done, state.clone())) {
            return Ok(false);
        }
        // An operation may linearize next only if no *other* unlinearized
        // operation responded before it was invoked.
        let min_res = self
            .ops
            .iter()
            .enumerate()
            .filter(|(i, _)| done & (1 << i) == 0)
            .filter_map(|(_, o)| o.res_idx)
            .min()
            .unwrap_or(usize::MAX);
        for (i, op) in self.ops.iter().enumerate() {
            if done & (1 << i) != 0 || op.inv_idx > min_res {
                continue;
            }
            let (next_state, ret) =
                self.object
                    .apply(&state, &op.op, &op.args)
                    .map_err(|message| CheckError::BadOperation {
                        op: op.op.clone(),
                        message,
                    })?;
            match op.ret {
                // Completed operation: the sequential return must match the
                // observed one.
                Some(observed) if observed != ret => continue,
                _ => {}
            }
            self.witness.push(LinStep {
                proc: op.proc,
                op: op.op.clone(),
                args: op.args.clone(),
                ret,
                completed_pending: op.ret.is_none(),
            });
            if self.run(done | (1 << i), next_state)? {
                return Ok(true);
            }
            self.witness.pop();
        }
        self.failed.insert((done, state));
        Ok(false)
    }
}

/// Decide durable linearizability: the history must be crash-well-formed,
/// and with every crash event removed it must be linearizable. Operations
/// pending at a crash stay pending and may be completed or dropped.
pub fn is_durably_linearizable<O: SequentialObject>(
    h: &History,
    object: &O,
) -> Result<LinOutcome, CheckError> {
    check_well_formed(h)?;
    is_linearizable(&h.strip_crashes(), object)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A single integer register: `write v` returns nothing, `read` returns
    /// the current value. Initial value 0.
    struct Register;

    impl SequentialObject for Register {
        type State = Value;

        fn init_state(&self) -> Value {
            0
        }

        fn apply(
            &self,
            state: &Value,
            op: &str,
            args: &[Value],
        ) -> Result<(Value, Option<Value>), String> {
            match (op, args) {
                ("write", [v]) => Ok((*v, None)),
                ("read", []) => Ok((*state, Some(*state))),
                _ => Err(format!("unknown operation {op:?} with {} args", args.len())),
            }
        }
    }

    fn inv(p: u32, op: &str, args: &[Value]) -> Event {
        Event::Invoke {
            proc: ProcId(p),
            op: op.into(),
            args: args.to_vec(),
        }
    }

    fn res(p: u32, ret: Option<Value>) -> Event {
        Event::Respond {
            proc: ProcId(p),
            ret,
        }
    }

    fn crash(m: u32) -> Event {
        Event::Crash {
            machine: MachineId(m),
        }
    }

    fn h(events: Vec<Event>) -> History {
        History::new(events, BTreeMap::new())
    }

    #[test]
    fn sequential_history_is_linearizable() {
        let history = h(vec![
            inv(1, "write", &[1]),
            res(1, None),
            inv(2, "read", &[]),
            res(2, Some(1)),
        ]);
        let out = is_linearizable(&history, &Register).unwrap();
        assert!(out.linearizable);
        let w = out.witness.unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].op, "write");
        assert_eq!(w[1].ret, Some(1));
    }

    #[test]
    fn stale_read_after_acknowledged_write_is_not_linearizable() {
        // write(1) completes before the read begins, yet the read sees 0.
        let history = h(vec![
            inv(1, "write", &[1]),
            res(1, None),
            inv(2, "read", &[]),
            res(2, Some(0)),
        ]);
        assert!(!is_linearizable(&history, &Register).unwrap().linearizable);
    }

    #[test]
    fn overlapping_operations_may_order_either_way() {
        // The read overlaps the write, so both 0 and 1 are fine.
        for seen in [0, 1] {
            let history = h(vec![
                inv(1, "write", &[1]),
                inv(2, "read", &[]),
                res(2, Some(seen)),
                res(1, None),
            ]);
            assert!(
                is_linearizable(&history, &Register).unwrap().linearizable,
                "read of {seen} should linearize"
            );
        }
    }

    #[test]
    fn pending_write_may_take_effect_or_not() {
        // The write never responds; a read of 1 is justified by completing
        // it, a read of 0 by dropping it.
        for seen in [0, 1] {
            let history = h(vec![
                inv(1, "write", &[1]),
                inv(2, "read", &[]),
                res(2, Some(seen)),
            ]);
            let out = is_linearizable(&history, &Register).unwrap();
            assert!(out.linearizable, "read of {seen} should linearize");
            if seen == 1 {
                assert!(out
                    .witness
                    .unwrap()
                    .iter()
                    .any(|s| s.op == "write" && s.completed_pending));
            }
        }
    }

    #[test]
    fn reads_disagreeing_on_order_are_not_linearizable() {
        // Both reads complete after the write completed; one sees the write,
        // the later one does not.
        let history = h(vec![
            inv(1, "write", &[1]),
            res(1, None),
            inv(2, "read", &[]),
            res(2, Some(1)),
            inv(2, "read", &[]),
            res(2, Some(0)),
        ]);
        assert!(!is_linearizable(&history, &Register).unwrap().linearizable);
    }

    #[test]
    fn durable_check_strips_crashes() {
        // Completed write persists across a crash of machine 3; the read
        // after recovery sees it. Proc 4 is the post-crash reader.
        let history = History::new(
            vec![
                inv(1, "write", &[1]),
                res(1, None),
                crash(3),
                inv(4, "read", &[]),
                res(4, Some(1)),
            ],
            BTreeMap::new(),
        );
        assert!(is_durably_linearizable(&history, &Register)
            .unwrap()
            .linearizable);
    }

    #[test]
    fn lost_acknowledged_write_is_a_durability_violation() {
        let history = h(vec![
            inv(1, "write", &[1]),
            res(1, None),
            crash(1),
            inv(4, "read", &[]),
            res(4, Some(0)),
        ]);
        assert!(!is_durably_linearizable(&history, &Register)
            .unwrap()
            .linearizable);
    }

    #[test]
    fn proc_continuing_after_its_machine_crash_is_rejected() {
        let history = h(vec![inv(1, "write", &[1]), crash(1), res(1, None)]);
        assert_eq!(
            check_well_formed(&history),
            Err(HistoryError::ProcAfterCrash {
                index: 2,
                proc: ProcId(1),
                machine: MachineId(1),
            })
        );
    }

    #[test]
    fn proc_machine_map_controls_crash_scope() {
        // Proc 1 runs on machine 9; a crash of machine 1 does not stop it.
        let history = History::new(
            vec![inv(1, "write", &[1]), crash(1), res(1, None)],
            BTreeMap::from([(ProcId(1), MachineId(9))]),
        );
        assert_eq!(check_well_formed(&history), Ok(()));
    }

    #[test]
    fn double_invocation_and_orphan_response_are_rejected() {
        assert_eq!(
            check_well_formed(&h(vec![inv(1, "read", &[]), inv(1, "read", &[])])),
            Err(HistoryError::OverlappingInvocation {
                index: 1,
                proc: ProcId(1)
            })
        );
        assert_eq!(
            check_well_formed(&h(vec![res(1, None)])),
            Err(HistoryError::ResponseWithoutInvocation {
                index: 0,
                proc: ProcId(1)
            })
        );
    }

    #[test]
    fn jsonl_round_trip() {
        let text = concat!(
            "{\"e\":\"inv\",\"p\":1,\"op\":\"write\",\"args\":[1]}\n",
            "{\"e\":\"res\",\"p\":1,\"ret\":null}\n",
            "{\"e\":\"inv\",\"p\":2,\"op\":\"read\",\"args\":[],\"m\":3}\n",
            "{\"e\":\"crash\",\"m\":3}\n",
        );
        let history = History::from_jsonl(text).unwrap();
        assert_eq!(history.events.len(), 4);
        assert_eq!(history.machine_of(ProcId(2)), MachineId(3));
        assert_eq!(history.machine_of(ProcId(1)), MachineId(1));
        let reparsed = History::from_jsonl(&history.to_jsonl()).unwrap();
        assert_eq!(reparsed, history);
    }

    #[test]
    fn jsonl_rejects_garbage() {
        assert!(matches!(
            History::from_jsonl("{\"e\":\"boom\"}"),
            Err(HistoryError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            History::from_jsonl("{\"e\":\"inv\",\"p\":1}"),
            Err(HistoryError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn op_count_limit_is_enforced() {
        let mut events = Vec::new();
        for p in 1..=(MAX_OPS as u32 + 1) {
            events.push(inv(p, "read", &[]));
        }
        assert_eq!(
            is_linearizable(&h(events), &Register),
            Err(CheckError::TooManyOps {
                ops: MAX_OPS + 1,
                limit: MAX_OPS
            })
        );
    }

    #[test]
    fn projection_keeps_only_selected_ops_and_their_procs() {
        let history = History::new(
            vec![
                inv(1, "write.a", &[1]),
                inv(2, "read.b", &[]),
                res(1, None),
                crash(2),
                inv(3, "read.a", &[]),
                res(3, Some(1)),
            ],
            BTreeMap::from([(ProcId(3), MachineId(1))]),
        );
        let a = history.project(|op| op.ends_with(".a"));
        assert_eq!(
            a.events,
            vec![
                inv(1, "write.a", &[1]),
                res(1, None),
                inv(3, "read.a", &[]),
                res(3, Some(1)),
            ]
        );
        assert_eq!(a.proc_machine.len(), 1);
    }
}
