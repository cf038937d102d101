//! An executable model of coherent disaggregated memory with per-machine
//! crash failures.
//!
//! The model is a labeled transition system over configurations that pair a
//! per-machine cache with a partitioned shared memory. Machines issue stores
//! at three persistence classes (cache-local, remote-cache, memory-direct),
//! loads, two flush classes, global persistence fences, and atomic
//! read-modify-writes; the fabric moves data between caches and memory via
//! internal `tau` steps; and any machine may crash at any time, losing its
//! cache and, if its memory segment is volatile, its memory contents.
//!
//! On top of the transition system the crate provides:
//!
//! - [`explorer`]: exhaustive, deterministic exploration of annotated traces
//!   and small multi-threaded programs, including crash injection;
//! - [`litmus`]: a small text format for litmus tests plus a runner and
//!   report formatter;
//! - [`props`]: bounded checkers for the algebraic laws relating the store
//!   and flush classes, and for the durability of the weakest store
//!   transformation under restricted crash assumptions;
//! - [`flit`]: transformations that compile object-level store/load wrappers
//!   down to model instructions at several persistence strengths, a workload
//!   runner that harvests concurrent histories, and a translation for
//!   programs written against a conventional persistency interface;
//! - [`linearize`]: a decision procedure for linearizability and durable
//!   linearizability of concurrent histories against small sequential
//!   objects.
//!
//! All exploration is deterministic: the same input produces the same
//! outcome sets, the same witnesses, and byte-identical serialized reports.

pub mod explorer;
pub mod flit;
pub mod linearize;
pub mod litmus;
pub mod props;
pub mod semantics;

pub use explorer::{ExploreError, ExploreStats, FabricTrace, OutcomeSet, Program};
pub use flit::{FlitError, ObjectKind, ObjectSpec, Variant, Workload, WorkloadReport};
pub use linearize::{Event, History, HistoryError, ProcId};
pub use litmus::{Expectation, LitmusError, LitmusTest, Verdict};
pub use props::{check_prop1, check_prop2, PropError, PropReport, PropUniverse};
pub use semantics::{
    Configuration, FlushClass, Label, LocId, MachineId, RmwFunc, SemanticsError, StoreClass,
    Topology, TopologyError, Value, Volatility,
};
