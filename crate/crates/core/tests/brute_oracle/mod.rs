//! A deliberately naive linearizability oracle and an exhaustive
//! enumerator of small register histories.
//!
//! The oracle is the independent reference the real checker is validated
//! against. It shares nothing with the library implementation: it tries
//! every completion choice for pending operations and every permutation
//! of the chosen operations, filters the permutations by real-time order,
//! and replays each survivor against the sequential object. No
//! memoization, no frontier sets, no pruning beyond the definition
//! itself.

use cxl0_core::linearize::{Event, History, ProcId, SequentialObject};
use cxl0_core::semantics::Value;
use std::collections::BTreeMap;
use std::collections::HashMap;

/// One operation extracted from a history.
struct OpRec {
    op: String,
    args: Vec<Value>,
    /// `Some(ret)` when the operation responded with `ret`; `None` when it
    /// is pending at the end of the history.
    observed: Option<Option<Value>>,
    inv_index: usize,
    /// Position of the response; `usize::MAX` for pending operations (a
    /// completion appended by the oracle responds after every real event).
    res_index: usize,
}

fn collect_ops(h: &History) -> Vec<OpRec> {
    let mut ops: Vec<OpRec> = Vec::new();
    let mut open: HashMap<ProcId, usize> = HashMap::new();
    for (index, e) in h.events.iter().enumerate() {
        match e {
            Event::Invoke { proc, op, args } => {
                let slot = ops.len();
                ops.push(OpRec {
                    op: op.clone(),
                    args: args.clone(),
                    observed: None,
                    inv_index: index,
                    res_index: usize::MAX,
                });
                open.insert(*proc, slot);
            }
            Event::Respond { proc, ret } => {
                let slot = open.remove(proc).expect("well-formed history");
                ops[slot].observed = Some(*ret);
                ops[slot].res_index = index;
            }
            Event::Crash { .. } => panic!("oracle takes crash-free histories"),
        }
    }
    ops
}

/// Every ordering of `0..n`, produced by plain recursion.
fn all_orderings(n: usize) -> Vec<Vec<usize>> {
    fn go(remaining: &mut Vec<usize>, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if remaining.is_empty() {
            out.push(current.clone());
            return;
        }
        for i in 0..remaining.len() {
            let x = remaining.remove(i);
            current.push(x);
            go(remaining, current, out);
            current.pop();
            remaining.insert(i, x);
        }
    }
    let mut out = Vec::new();
    go(&mut (0..n).collect(), &mut Vec::new(), &mut out);
    out
}

/// Decide linearizability of a crash-free history by exhaustive search:
/// some subset of pending operations is completed (the rest are omitted),
/// and some permutation of the chosen operations respects real-time order
/// and replays correctly, with completed operations reproducing their
/// observed return values.
pub fn oracle_linearizable<O: SequentialObject>(h: &History, object: &O) -> bool {
    let ops = collect_ops(h);
    let pending: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].observed.is_none()).collect();
    let completed: Vec<usize> = (0..ops.len()).filter(|&i| ops[i].observed.is_some()).collect();
    for mask in 0u32..(1u32 << pending.len()) {
        let mut chosen = completed.clone();
        for (bit, &slot) in pending.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                chosen.push(slot);
            }
        }
        'perm: for perm in all_orderings(chosen.len()) {
            for a in 0..perm.len() {
                for b in (a + 1)..perm.len() {
                    let x = &ops[chosen[perm[a]]];
                    let y = &ops[chosen[perm[b]]];
                    // The permutation puts x before y; real time demands
                    // the opposite when y responded before x was invoked.
                    if y.res_index < x.inv_index {
                        continue 'perm;
                    }
                }
            }
            let mut state = object.init_state();
            let mut ok = true;
            for &k in &perm {
                let rec = &ops[chosen[k]];
                match object.apply(&state, &rec.op, &rec.args) {
                    Ok((next, ret)) => {
                        if let Some(observed) = &rec.observed {
                            if *observed != ret {
                                ok = false;
                                break;
                            }
                        }
                        state = next;
                    }
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return true;
            }
        }
    }
    false
}

/// Exhaustively enumerate well-formed crash-free register histories and
/// feed each one to `visit`.
///
/// The family: at most `max_ops` operations spread over at most
/// `max_procs` procs, operations drawn from `write(0)`, `write(1)` and
/// `read()`, read responses drawn from `{0, 1}`, and any suffix of
/// operations left pending. Proc ids are canonical (proc n+1 first acts
/// only after proc n has acted), which quotients away proc renaming;
/// linearizability is invariant under renaming, so no generality is lost.
pub fn for_each_register_history(
    max_ops: usize,
    max_procs: usize,
    visit: &mut impl FnMut(&History),
) {
    let mut events = Vec::new();
    let mut pending: Vec<Option<&'static str>> = vec![None; max_procs];
    go(&mut events, &mut pending, 0, 0, max_ops, visit);
}

fn go(
    events: &mut Vec<Event>,
    pending: &mut Vec<Option<&'static str>>,
    procs_used: usize,
    ops_started: usize,
    max_ops: usize,
    visit: &mut impl FnMut(&History),
) {
    let h = History::new(events.clone(), BTreeMap::new());
    visit(&h);
    if ops_started < max_ops {
        let introducible = (procs_used + 1).min(pending.len());
        for proc in 0..introducible {
            if pending[proc].is_none() {
                for (op, args) in [
                    ("write", vec![0]),
                    ("write", vec![1]),
                    ("read", vec![]),
                ] {
                    events.push(Event::Invoke {
                        proc: ProcId(proc as u32 + 1),
                        op: op.to_string(),
                        args,
                    });
                    pending[proc] = Some(op);
                    go(
                        events,
                        pending,
                        procs_used.max(proc + 1),
                        ops_started + 1,
                        max_ops,
                        visit,
                    );
                    pending[proc] = None;
                    events.pop();
                }
            }
        }
    }
    for proc in 0..procs_used {
        if let Some(op) = pending[proc] {
            let rets: &[Option<Value>] = if op == "read" {
                &[Some(0), Some(1)]
            } else {
                &[None]
            };
            for &ret in rets {
                events.push(Event::Respond {
                    proc: ProcId(proc as u32 + 1),
                    ret,
                });
                pending[proc] = None;
                go(events, pending, procs_used, ops_started, max_ops, visit);
                pending[proc] = Some(op);
                events.pop();
            }
        }
    }
}
