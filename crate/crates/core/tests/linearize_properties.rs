//! Cross-validation of the linearizability checker against a naive
//! brute-force oracle, plus the structural history invariants: crash
//! stripping is idempotent and length-monotone, and durable
//! linearizability is local (a composed history of two independent
//! registers is durably linearizable exactly when both projections are).

mod brute_oracle;

use brute_oracle::{for_each_register_history, oracle_linearizable};
use cxl0_core::flit::{ObjectKind, ObjectSpec};
use cxl0_core::linearize::{
    check_well_formed, is_durably_linearizable, is_linearizable, Event, History, ProcId,
    SequentialObject,
};
use cxl0_core::semantics::{MachineId, Value};
use std::collections::BTreeMap;

/// Replay a witness sequentially and check every recorded return value.
fn witness_replays<O: SequentialObject>(
    witness: &[cxl0_core::linearize::LinStep],
    object: &O,
) -> bool {
    let mut state = object.init_state();
    for step in witness {
        match object.apply(&state, &step.op, &step.args) {
            Ok((next, ret)) => {
                if ret != step.ret {
                    return false;
                }
                state = next;
            }
            Err(_) => return false,
        }
    }
    true
}

fn agreement_over(max_ops: usize, max_procs: usize) -> (u64, u64) {
    let register = ObjectSpec {
        kind: ObjectKind::Register,
    };
    let mut histories = 0u64;
    let mut linearizable = 0u64;
    for_each_register_history(max_ops, max_procs, &mut |h| {
        histories += 1;
        let expected = oracle_linearizable(h, &register);
        let outcome = is_linearizable(h, &register).expect("well-formed by construction");
        assert_eq!(
            outcome.linearizable,
            expected,
            "checker disagrees with brute force on {:?}",
            h.events
        );
        if expected {
            linearizable += 1;
            let witness = outcome.witness.as_ref().expect("witness when linearizable");
            assert!(
                witness_replays(witness, &register),
                "witness does not replay for {:?}: {witness:?}",
                h.events
            );
        }
    });
    (histories, linearizable)
}

// The family sizes below are frozen so that an accidental change to the
// enumeration (which would silently shrink coverage) fails loudly.

#[test]
fn checker_agrees_with_brute_force_on_two_proc_histories() {
    let (histories, linearizable) = agreement_over(4, 2);
    assert_eq!((histories, linearizable), (33_041, 16_380));
}

#[test]
fn checker_agrees_with_brute_force_on_four_proc_histories() {
    let (histories, linearizable) = agreement_over(4, 4);
    assert_eq!((histories, linearizable), (195_605, 115_319));
}

// ---------------------------------------------------------------------------
// crash stripping
// ---------------------------------------------------------------------------

#[test]
fn strip_crashes_is_idempotent_and_length_monotone() {
    let mut base = Vec::new();
    for_each_register_history(3, 2, &mut |h| base.push(h.clone()));
    let mut checked = 0u64;
    for h in &base {
        // Insert one crash event at every position and keep the well-formed
        // results; machine 5 never hosts a proc, machines 1 and 2 do.
        for machine in [1u32, 2, 5] {
            for at in 0..=h.events.len() {
                let mut events = h.events.clone();
                events.insert(
                    at,
                    Event::Crash {
                        machine: MachineId(machine),
                    },
                );
                let crashed = History::new(events, BTreeMap::new());
                if check_well_formed(&crashed).is_err() {
                    continue;
                }
                checked += 1;
                let once = crashed.strip_crashes();
                let twice = once.strip_crashes();
                assert_eq!(once, twice, "strip_crashes is not idempotent");
                assert!(once.events.len() <= crashed.events.len());
                assert_eq!(once.events.len(), crashed.events.len() - 1);
                assert!(once
                    .events
                    .iter()
                    .all(|e| !matches!(e, Event::Crash { .. })));
            }
        }
        // Crash-free histories are untouched.
        assert_eq!(&h.strip_crashes(), h);
    }
    assert_eq!(checked, 21_204, "crash-placement coverage changed");
}

// ---------------------------------------------------------------------------
// locality
// ---------------------------------------------------------------------------

/// Two independent registers under one roof; op names carry the register.
struct PairOfRegisters;

impl SequentialObject for PairOfRegisters {
    type State = (Value, Value);

    fn init_state(&self) -> (Value, Value) {
        (0, 0)
    }

    fn apply(
        &self,
        state: &(Value, Value),
        op: &str,
        args: &[Value],
    ) -> Result<((Value, Value), Option<Value>), String> {
        match op {
            "write.a" => Ok(((args[0], state.1), None)),
            "write.b" => Ok(((state.0, args[0]), None)),
            "read.a" => Ok((*state, Some(state.0))),
            "read.b" => Ok((*state, Some(state.1))),
            other => Err(format!("unknown op {other}")),
        }
    }
}

/// One of the pair's registers, accepting only its own suffixed ops.
struct OneRegister {
    suffix: &'static str,
}

impl SequentialObject for OneRegister {
    type State = Value;

    fn init_state(&self) -> Value {
        0
    }

    fn apply(&self, state: &Value, op: &str, args: &[Value]) -> Result<(Value, Option<Value>), String> {
        if op == format!("write.{}", self.suffix) {
            Ok((args[0], None))
        } else if op == format!("read.{}", self.suffix) {
            Ok((*state, Some(*state)))
        } else {
            Err(format!("op {op} is not on register {}", self.suffix))
        }
    }
}

/// Enumerate composed histories over the two registers: at most `max_ops`
/// operations on at most 2 procs, ops `write.<r>(1)` and `read.<r>()`,
/// read responses in {0, 1}, any suffix pending, optionally ending with a
/// machine-1 crash.
fn for_each_pair_history(max_ops: usize, visit: &mut impl FnMut(&History)) {
    const KINDS: [(&str, &[Value]); 4] = [
        ("write.a", &[1]),
        ("read.a", &[]),
        ("write.b", &[1]),
        ("read.b", &[]),
    ];
    fn go(
        events: &mut Vec<Event>,
        pending: &mut [Option<&'static str>; 2],
        procs_used: usize,
        ops_started: usize,
        max_ops: usize,
        visit: &mut impl FnMut(&History),
    ) {
        let plain = History::new(events.clone(), BTreeMap::new());
        visit(&plain);
        // A trailing crash is always well-formed and exercises the
        // durable (crash-stripping) path of the check.
        let mut crashed = events.clone();
        crashed.push(Event::Crash {
            machine: MachineId(1),
        });
        visit(&History::new(crashed, BTreeMap::new()));
        if ops_started < max_ops {
            let introducible = (procs_used + 1).min(2);
            for proc in 0..introducible {
                if pending[proc].is_none() {
                    for (op, args) in KINDS {
                        events.push(Event::Invoke {
                            proc: ProcId(proc as u32 + 1),
                            op: op.to_string(),
                            args: args.to_vec(),
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
                let rets: &[Option<Value>] = if op.starts_with("read") {
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
    go(&mut Vec::new(), &mut [None, None], 0, 0, max_ops, visit);
}

#[test]
fn durable_linearizability_is_local_over_independent_registers() {
    let pair = PairOfRegisters;
    let reg_a = OneRegister { suffix: "a" };
    let reg_b = OneRegister { suffix: "b" };
    let mut histories = 0u64;
    let mut composable = 0u64;
    for_each_pair_history(4, &mut |h| {
        histories += 1;
        let whole = is_durably_linearizable(h, &pair)
            .expect("well-formed by construction")
            .linearizable;
        let part_a = is_durably_linearizable(&h.project(|op| op.ends_with(".a")), &reg_a)
            .expect("projection stays well-formed")
            .linearizable;
        let part_b = is_durably_linearizable(&h.project(|op| op.ends_with(".b")), &reg_b)
            .expect("projection stays well-formed")
            .linearizable;
        assert_eq!(
            whole,
            part_a && part_b,
            "locality fails on {:?} (whole {whole}, a {part_a}, b {part_b})",
            h.events
        );
        if whole {
            composable += 1;
        }
    });
    assert_eq!((histories, composable), (307_734, 98_314));
}
