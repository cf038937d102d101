//! Bounded, exhaustive checkers for the operation-strength laws and the
//! volatile-memory durability guarantee.
//!
//! The strength laws relate the three store classes and two flush classes:
//! remote stores are simulated by local stores plus propagation, memory
//! stores by remote stores, flushes after sufficiently strong stores are
//! redundant, and (hardest) a local store followed by a flush simulates the
//! stronger store outright. Each law is an implication between transition
//! traces; [`check_prop1`] verifies one law over *every* configuration of a
//! topology's universe and every admissible machine/location/value choice,
//! by explicit search over `tau`-interleaved traces.
//!
//! `tau`-interleaving is bounded by [`PropUniverse::tau_depth`]. The bound
//! loses nothing: every `tau` step strictly decreases a measure (cache
//! entries weighted by their distance from home memory, at most
//! `2 * machines * locations` in total and replenished by at most one store
//! per trace), so no `tau`-interleaved trace of the checked shapes is
//! longer. The default bound is that measure's ceiling.
//!
//! The checkers accept an injected step function so that deliberately
//! broken semantics (the [`mutant_step`] catalogue) demonstrably fail:
//! every seeded mutant is caught by a strength law, the cache-uniqueness
//! invariant, or a bundled litmus verdict.
//!
//! [`check_prop2`] covers the claimed durability guarantee for volatile
//! memory: under the local-flush variant of the weakest store wrapper,
//! histories are supposed to remain durably linearizable provided machines
//! hosting volatile shared memory never crash. The claim holds when each
//! location is stored at most once, but the model refutes it in general: a
//! later store to the same location invalidates (discards) the protected
//! owner's cached copy of an earlier completed store, and a crash of the
//! storing machine then loses both values. The checker reports whatever
//! the search finds; the tests pin both the clean and the violating cases.

use crate::explorer::ExploreError;
use crate::flit;
use crate::semantics::{
    self, check_cache_invariant, Configuration, FlushClass, Label, LocId, MachineId,
    SemanticsError, StoreClass, Topology, Value,
};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

pub use crate::semantics::StepFn;

/// The quantification universe of a strength-law check: one topology (the
/// caller enumerates owner assignments) and the `tau`-interleaving bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropUniverse {
    pub topology: Topology,
    pub tau_depth: u32,
}

/// Errors from property checking.
#[derive(Debug, Error)]
pub enum PropError {
    #[error("item {0} does not exist; the strength laws are numbered 1 to 8")]
    NoSuchItem(u8),
    #[error(
        "tau depth {depth} is below machines*locations = {min}, too shallow to drain every cache"
    )]
    TauDepthTooShallow { depth: u32, min: u32 },
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Flit(#[from] flit::FlitError),
}

/// One refuting instance of a law.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Counterexample {
    /// Rendered start configuration.
    pub start_config: String,
    /// Rendered labels of the left-hand trace that has no right-hand match
    /// (or whose required follow-up step misbehaved).
    pub labels: Vec<String>,
    pub expected: String,
    pub got: String,
}

/// Outcome of checking one law over one universe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropReport {
    pub item: u8,
    /// Rendered universe: machine count, locations with owners, domain,
    /// `tau` depth.
    pub universe: String,
    pub instances_checked: u64,
    pub counterexamples: Vec<Counterexample>,
}

impl PropUniverse {
    /// Universe over `topology` with the default `tau` bound
    /// `2 * machines * locations`, the ceiling of the propagation measure.
    pub fn new(topology: Topology) -> PropUniverse {
        let tau_depth = 2 * topology.machine_count() * topology.loc_count();
        PropUniverse { topology, tau_depth }
    }

    fn render(&self) -> String {
        let t = &self.topology;
        let locs: Vec<String> = t
            .loc_ids()
            .map(|l| format!("{}@{}", t.loc_name(l), t.owner(l)))
            .collect();
        let domain: Vec<String> = t.domain().iter().map(Value::to_string).collect();
        format!(
            "machines={} locs=[{}] domain={{{}}} tau_depth={}",
            t.machine_count(),
            locs.join(","),
            domain.join(","),
            self.tau_depth
        )
    }
}

/// Cap on enumerated configuration universes for property checks.
const UNIVERSE_LIMIT: u64 = 1_000_000;

struct Checker<'a> {
    topo: &'a Topology,
    tau_depth: u32,
    step: &'a StepFn,
    report: PropReport,
}

impl Checker<'_> {
    fn counterexample(
        &mut self,
        start: &Configuration,
        labels: &[Label],
        expected: impl Into<String>,
        got: impl Into<String>,
    ) {
        self.report.counterexamples.push(Counterexample {
            start_config: start.render(self.topo),
            labels: labels.iter().map(|l| l.render(self.topo)).collect(),
            expected: expected.into(),
            got: got.into(),
        });
    }

    /// All configurations reachable from `start` by executing `program`
    /// labels in order, interleaved with at most `tau_depth` `tau` steps in
    /// total. Keyed by final configuration; the value is the lowest-τ
    /// witness trace, found breadth-first so witnesses are shortest.
    fn tau_closure(
        &self,
        start: &Configuration,
        program: &[Label],
    ) -> Result<HashMap<Configuration, Vec<Label>>, SemanticsError> {
        // (phase, config) -> fewest τ steps used to get there. A state
        // reached again with at least as many τ steps can only reach a
        // subset of completions.
        let mut best: HashMap<(usize, Configuration), u32> = HashMap::new();
        let mut out: HashMap<Configuration, Vec<Label>> = HashMap::new();
        let mut queue: std::collections::VecDeque<(usize, Configuration, u32, Vec<Label>)> =
            std::collections::VecDeque::new();
        best.insert((0, start.clone()), 0);
        queue.push_back((0, start.clone(), 0, Vec::new()));
        while let Some((phase, cfg, tau_used, path)) = queue.pop_front() {
            if phase == program.len() {
                out.entry(cfg.clone()).or_insert_with(|| path.clone());
            }
            // Program label, when one is pending.
            if let Some(label) = program.get(phase) {
                if semantics::enabled(&cfg, self.topo, label)? {
                    let next = (self.step)(&cfg, self.topo, label)?;
                    let key = (phase + 1, next.clone());
                    if best.get(&key).is_none_or(|&t| tau_used < t) {
                        best.insert(key, tau_used);
                        let mut p = path.clone();
                        p.push(*label);
                        queue.push_back((phase + 1, next, tau_used, p));
                    }
                }
            }
            // Silent steps, within the budget.
            if tau_used < self.tau_depth {
                for tau in semantics::enabled_taus(&cfg, self.topo) {
                    let next = (self.step)(&cfg, self.topo, &tau)?;
                    let key = (phase, next.clone());
                    if best.get(&key).is_none_or(|&t| tau_used + 1 < t) {
                        best.insert(key, tau_used + 1);
                        let mut p = path.clone();
                        p.push(tau);
                        queue.push_back((phase, next, tau_used + 1, p));
                    }
                }
            }
        }
        Ok(out)
    }

    /// The left-hand side took `start` to `end` via `labels`; require that
    /// the τ-interleaved `program` can reach `end` too.
    fn require_simulated(
        &mut self,
        start: &Configuration,
        labels: &[Label],
        end: &Configuration,
        program: &[Label],
    ) -> Result<(), SemanticsError> {
        let reachable = self.tau_closure(start, program)?;
        if !reachable.contains_key(end) {
            let rendered: Vec<String> =
                program.iter().map(|l| l.render(self.topo)).collect();
            self.counterexample(
                start,
                labels,
                format!(
                    "a tau-interleaved [{}] trace reaching {}",
                    rendered.join(", "),
                    end.render(self.topo)
                ),
                format!("{} configurations, none matching", reachable.len()),
            );
        }
        Ok(())
    }

    /// Single mandatory step; flags invariant breakage on the successor.
    fn apply(
        &mut self,
        start: &Configuration,
        label: Label,
    ) -> Result<Option<Configuration>, SemanticsError> {
        if !semantics::enabled(start, self.topo, &label)? {
            return Ok(None);
        }
        let next = (self.step)(start, self.topo, &label)?;
        if !check_cache_invariant(&next) {
            self.counterexample(
                start,
                &[label],
                "all valid cache entries for a location agree",
                format!("cache disagreement in {}", next.render(self.topo)),
            );
            return Ok(None);
        }
        Ok(Some(next))
    }
}

/// Check strength law `item` (1–8) over every configuration of the
/// universe and every admissible machine/location/value instance.
pub fn check_prop1(item: u8, universe: &PropUniverse) -> Result<PropReport, PropError> {
    check_prop1_with(item, universe, &semantics::step)
}

/// [`check_prop1`] with an injected step function (see [`mutant_step`]).
pub fn check_prop1_with(
    item: u8,
    universe: &PropUniverse,
    step: &StepFn,
) -> Result<PropReport, PropError> {
    if !(1..=8).contains(&item) {
        return Err(PropError::NoSuchItem(item));
    }
    let topo = &universe.topology;
    let min_depth = topo.machine_count() * topo.loc_count();
    if universe.tau_depth < min_depth {
        return Err(PropError::TauDepthTooShallow {
            depth: universe.tau_depth,
            min: min_depth,
        });
    }
    let configs = crate::explorer::reachable_configs(topo, UNIVERSE_LIMIT)?;
    let mut ck = Checker {
        topo,
        tau_depth: universe.tau_depth,
        step,
        report: PropReport {
            item,
            universe: universe.render(),
            instances_checked: 0,
            counterexamples: Vec::new(),
        },
    };
    for start in &configs {
        for x in topo.loc_ids() {
            let owner = topo.owner(x);
            for i in topo.machine_ids() {
                match item {
                    // Stores take a value; flush-only laws (4) do not.
                    4 => {
                        ck.report.instances_checked += 1;
                        check_item4(&mut ck, start, i, x).map_err(ExploreError::from)?;
                    }
                    _ => {
                        for &v in topo.domain() {
                            let res = match item {
                                1 => check_item1(&mut ck, start, i, x, v),
                                2 => {
                                    if i != owner {
                                        continue;
                                    }
                                    check_item2(&mut ck, start, owner, x, v)
                                }
                                3 => check_item3(&mut ck, start, i, x, v),
                                5 => {
                                    if i == owner {
                                        continue;
                                    }
                                    check_item5(&mut ck, start, i, x, v)
                                }
                                6 => check_item6(&mut ck, start, i, x, v),
                                7 => {
                                    if i == owner {
                                        continue;
                                    }
                                    check_item7(&mut ck, start, i, x, v)
                                }
                                8 => check_item8(&mut ck, start, i, x, v),
                                _ => unreachable!("item range checked"),
                            };
                            res.map_err(ExploreError::from)?;
                            ck.report.instances_checked += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(ck.report)
}

fn store(class: StoreClass, machine: MachineId, loc: LocId, value: Value) -> Label {
    Label::Store {
        class,
        machine,
        loc,
        value,
    }
}

fn flush(class: FlushClass, machine: MachineId, loc: LocId) -> Label {
    Label::Flush {
        class,
        machine,
        loc,
    }
}

/// A remote store is simulated by a τ-interleaved local store.
fn check_item1(
    ck: &mut Checker,
    start: &Configuration,
    i: MachineId,
    x: LocId,
    v: Value,
) -> Result<(), SemanticsError> {
    let lhs = store(StoreClass::Remote, i, x, v);
    let Some(end) = ck.apply(start, lhs)? else {
        return Ok(());
    };
    ck.require_simulated(start, &[lhs], &end, &[store(StoreClass::Local, i, x, v)])
}

/// By the owner, local and remote stores step to the same configuration.
fn check_item2(
    ck: &mut Checker,
    start: &Configuration,
    k: MachineId,
    x: LocId,
    v: Value,
) -> Result<(), SemanticsError> {
    let l = store(StoreClass::Local, k, x, v);
    let r = store(StoreClass::Remote, k, x, v);
    let (Some(after_l), Some(after_r)) = (ck.apply(start, l)?, ck.apply(start, r)?) else {
        return Ok(());
    };
    if after_l != after_r {
        ck.counterexample(
            start,
            &[l],
            format!("the same successor as {}", r.render(ck.topo)),
            format!(
                "{} versus {}",
                after_l.render(ck.topo),
                after_r.render(ck.topo)
            ),
        );
    }
    Ok(())
}

/// A memory store is simulated by a τ-interleaved remote store.
fn check_item3(
    ck: &mut Checker,
    start: &Configuration,
    i: MachineId,
    x: LocId,
    v: Value,
) -> Result<(), SemanticsError> {
    let lhs = store(StoreClass::Memory, i, x, v);
    let Some(end) = ck.apply(start, lhs)? else {
        return Ok(());
    };
    ck.require_simulated(start, &[lhs], &end, &[store(StoreClass::Remote, i, x, v)])
}

/// Wherever a remote flush steps, a local flush takes the same step. Both
/// are no-ops when enabled, so this is an enabledness implication plus
/// successor equality.
fn check_item4(
    ck: &mut Checker,
    start: &Configuration,
    i: MachineId,
    x: LocId,
) -> Result<(), SemanticsError> {
    let r = flush(FlushClass::Remote, i, x);
    let l = flush(FlushClass::Local, i, x);
    let Some(after_r) = ck.apply(start, r)? else {
        return Ok(());
    };
    match ck.apply(start, l)? {
        None => ck.counterexample(
            start,
            &[r],
            format!("{} enabled wherever {} is", l.render(ck.topo), r.render(ck.topo)),
            "local flush not enabled".to_string(),
        ),
        Some(after_l) if after_l != after_r => ck.counterexample(
            start,
            &[r],
            "the same successor from both flushes".to_string(),
            format!(
                "{} versus {}",
                after_r.render(ck.topo),
                after_l.render(ck.topo)
            ),
        ),
        Some(_) => {}
    }
    Ok(())
}

/// After a non-owner's remote store, that machine's local flush is enabled
/// and changes nothing.
fn check_item5(
    ck: &mut Checker,
    start: &Configuration,
    j: MachineId,
    x: LocId,
    v: Value,
) -> Result<(), SemanticsError> {
    let s = store(StoreClass::Remote, j, x, v);
    let Some(mid) = ck.apply(start, s)? else {
        return Ok(());
    };
    follow_up_is_noop(ck, start, s, &mid, flush(FlushClass::Local, j, x))
}

/// After a memory store, the storing machine's remote flush is enabled and
/// changes nothing.
fn check_item6(
    ck: &mut Checker,
    start: &Configuration,
    i: MachineId,
    x: LocId,
    v: Value,
) -> Result<(), SemanticsError> {
    let s = store(StoreClass::Memory, i, x, v);
    let Some(mid) = ck.apply(start, s)? else {
        return Ok(());
    };
    follow_up_is_noop(ck, start, s, &mid, flush(FlushClass::Remote, i, x))
}

fn follow_up_is_noop(
    ck: &mut Checker,
    start: &Configuration,
    first: Label,
    mid: &Configuration,
    follow: Label,
) -> Result<(), SemanticsError> {
    if !semantics::enabled(mid, ck.topo, &follow)? {
        ck.counterexample(
            start,
            &[first, follow],
            format!("{} enabled after {}", follow.render(ck.topo), first.render(ck.topo)),
            "not enabled".to_string(),
        );
        return Ok(());
    }
    let after = (ck.step)(mid, ck.topo, &follow)?;
    if after != *mid {
        ck.counterexample(
            start,
            &[first, follow],
            "the flush to change nothing".to_string(),
            format!("{} became {}", mid.render(ck.topo), after.render(ck.topo)),
        );
    }
    Ok(())
}

/// Every τ-interleaved non-owner local-store + local-flush trace is
/// simulated by a τ-interleaved remote store.
fn check_item7(
    ck: &mut Checker,
    start: &Configuration,
    j: MachineId,
    x: LocId,
    v: Value,
) -> Result<(), SemanticsError> {
    let lhs = [
        store(StoreClass::Local, j, x, v),
        flush(FlushClass::Local, j, x),
    ];
    let rhs = [store(StoreClass::Remote, j, x, v)];
    simulate_traces(ck, start, &lhs, &rhs)
}

/// Every τ-interleaved local-store + remote-flush trace is simulated by a
/// τ-interleaved memory store.
fn check_item8(
    ck: &mut Checker,
    start: &Configuration,
    i: MachineId,
    x: LocId,
    v: Value,
) -> Result<(), SemanticsError> {
    let lhs = [
        store(StoreClass::Local, i, x, v),
        flush(FlushClass::Remote, i, x),
    ];
    let rhs = [store(StoreClass::Memory, i, x, v)];
    simulate_traces(ck, start, &lhs, &rhs)
}

fn simulate_traces(
    ck: &mut Checker,
    start: &Configuration,
    lhs: &[Label],
    rhs: &[Label],
) -> Result<(), SemanticsError> {
    let left = ck.tau_closure(start, lhs)?;
    let right = ck.tau_closure(start, rhs)?;
    // Deterministic counterexample order.
    let mut ends: Vec<(&Configuration, &Vec<Label>)> = left.iter().collect();
    ends.sort_by_key(|(cfg, _)| cfg.render(ck.topo));
    for (end, path) in ends {
        if !right.contains_key(end) {
            let rendered: Vec<String> = rhs.iter().map(|l| l.render(ck.topo)).collect();
            ck.counterexample(
                start,
                path,
                format!(
                    "a tau-interleaved [{}] trace reaching {}",
                    rendered.join(", "),
                    end.render(ck.topo)
                ),
                format!("{} configurations, none matching", right.len()),
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Seeded semantics mutations
// ---------------------------------------------------------------------------

/// Names of the seeded semantics mutations, for listings and validation.
pub const MUTANT_NAMES: [&str; 4] = [
    "mstore-keep-caches",
    "lstore-keep-others",
    "rstore-local-target",
    "crash-keep-cache",
];

/// A deliberately broken step function, for exercising the checkers:
///
/// - `mstore-keep-caches`: memory stores skip cache invalidation.
/// - `lstore-keep-others`: local stores skip invalidating other caches.
/// - `rstore-local-target`: remote stores write the issuer's cache instead
///   of the owner's.
/// - `crash-keep-cache`: crashes preserve the crashed machine's cache.
///
/// Returns `None` for unknown names. Each catalogue entry is caught by a
/// strength law, the cache invariant, or a bundled litmus verdict.
pub fn mutant_step(
    name: &str,
) -> Option<Box<dyn Fn(&Configuration, &Topology, &Label) -> Result<Configuration, SemanticsError> + Sync>>
{
    match name {
        "mstore-keep-caches" => Some(Box::new(|cfg, topo, label| match label {
            Label::Store {
                class: StoreClass::Memory,
                loc,
                value,
                machine,
            } => {
                // Write memory like a normal memory store, then restore
                // every cache entry the real rule would have invalidated.
                let honest = semantics::step(cfg, topo, label)?;
                let mut broken = honest;
                for m in topo.machine_ids() {
                    broken = copy_cache_entry(cfg, &broken, topo, m, *loc);
                }
                let _ = (machine, value);
                Ok(broken)
            }
            other => semantics::step(cfg, topo, other),
        })),
        "lstore-keep-others" => Some(Box::new(|cfg, topo, label| match label {
            Label::Store {
                class: StoreClass::Local,
                loc,
                machine,
                ..
            } => {
                let honest = semantics::step(cfg, topo, label)?;
                let mut broken = honest;
                for m in topo.machine_ids() {
                    if m != *machine {
                        broken = copy_cache_entry(cfg, &broken, topo, m, *loc);
                    }
                }
                Ok(broken)
            }
            other => semantics::step(cfg, topo, other),
        })),
        "rstore-local-target" => Some(Box::new(|cfg, topo, label| match label {
            Label::Store {
                class: StoreClass::Remote,
                machine,
                loc,
                value,
            } => semantics::step(
                cfg,
                topo,
                &Label::Store {
                    class: StoreClass::Local,
                    machine: *machine,
                    loc: *loc,
                    value: *value,
                },
            ),
            other => semantics::step(cfg, topo, other),
        })),
        "crash-keep-cache" => Some(Box::new(|cfg, topo, label| match label {
            Label::Crash { machine } => {
                let honest = semantics::step(cfg, topo, label)?;
                let mut broken = honest;
                for l in topo.loc_ids() {
                    broken = copy_cache_entry(cfg, &broken, topo, *machine, l);
                }
                Ok(broken)
            }
            other => semantics::step(cfg, topo, other),
        })),
        _ => None,
    }
}

/// Rebuild `patched` with machine `m`'s entry for `loc` taken from `from`.
/// Only used by mutants, which deliberately bypass the real rules.
fn copy_cache_entry(
    from: &Configuration,
    patched: &Configuration,
    topo: &Topology,
    m: MachineId,
    loc: LocId,
) -> Configuration {
    let n_locs = topo.loc_count();
    let mut cache: Vec<Option<Value>> = (0..topo.machine_count())
        .flat_map(|mi| (0..n_locs).map(move |li| patched.cache(MachineId(mi + 1), LocId(li))))
        .collect();
    cache[((m.0 - 1) * n_locs + loc.0) as usize] = from.cache(m, loc);
    let mem: Vec<Value> = (0..n_locs).map(|li| patched.mem(LocId(li))).collect();
    Configuration::from_parts(n_locs, cache, mem)
}

// ---------------------------------------------------------------------------
// Volatile-memory durability (the second guarantee)
// ---------------------------------------------------------------------------

/// Check the volatile-memory durability claim on one workload: under the
/// local-flush build of the weakest store wrapper, histories are supposed
/// to stay durably linearizable as long as the machines hosting volatile
/// shared memory never crash.
///
/// The checker forces the workload onto that wrapper build (`lstore`
/// variant, local flushes) and runs it. Excluding volatile-memory machines
/// from the crash budget is the caller's side of the bargain. Even with a
/// compliant budget the report is only guaranteed clean when every
/// location is stored at most once: a second store to a location discards
/// the protected owner's cached copy of the first (completed) one, and a
/// crash of the storing machine before the new value propagates loses
/// both. See the volatile tests in [`flit`] for both pinned outcomes.
pub fn check_prop2(workload: &flit::Workload) -> Result<flit::WorkloadReport, PropError> {
    let mut wl = workload.clone();
    wl.variant = flit::Variant::Lstore;
    wl.flush_class = FlushClass::Local;
    Ok(wl.run()?)
}

/// Convenience wrapper: [`check_prop2`] result summarized like the
/// strength-law reports.
pub fn prop2_report(workload: &flit::Workload) -> Result<PropReport, PropError> {
    let report = check_prop2(workload)?;
    let counterexamples = report
        .violations
        .iter()
        .map(|v| Counterexample {
            start_config: "initial".to_string(),
            labels: v.witness.clone(),
            expected: "a durably linearizable history".to_string(),
            got: v.history.clone(),
        })
        .collect();
    Ok(PropReport {
        item: 0,
        universe: format!(
            "workload object={} threads={}",
            report.object, report.threads
        ),
        instances_checked: report.histories_checked,
        counterexamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::Volatility;

    fn universe(n: u32, locs: &[(&str, u32)], vals: &[Value]) -> PropUniverse {
        PropUniverse::new(
            Topology::new(
                n,
                locs.iter()
                    .map(|(s, o)| (s.to_string(), MachineId(*o)))
                    .collect(),
                vec![Volatility::NonVolatile; n as usize],
                vals.to_vec(),
            )
            .unwrap(),
        )
    }

    /// Every owner assignment for `n` machines over `l` locations.
    fn owner_assignments(n: u32, l: u32) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for _ in 0..l {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (1..=n).map(move |o| {
                        let mut p = prefix.clone();
                        p.push(o);
                        p
                    })
                })
                .collect();
        }
        out
    }

    fn check_all_owners(item: u8, n: u32, nlocs: u32, vals: &[Value]) -> u64 {
        let names = ["x", "y"];
        let mut instances = 0;
        for owners in owner_assignments(n, nlocs) {
            let locs: Vec<(&str, u32)> = names[..nlocs as usize]
                .iter()
                .zip(&owners)
                .map(|(&s, &o)| (s, o))
                .collect();
            let u = universe(n, &locs, vals);
            let report = check_prop1(item, &u).unwrap();
            assert_eq!(
                report.counterexamples,
                Vec::new(),
                "item {item} owners {owners:?}"
            );
            instances += report.instances_checked;
        }
        instances
    }

    #[test]
    fn items_one_to_six_hold_on_two_machines() {
        for item in 1..=6 {
            check_all_owners(item, 2, 1, &[0, 1]);
        }
    }

    #[test]
    fn items_one_to_six_hold_on_two_locations() {
        for item in 1..=6 {
            check_all_owners(item, 2, 2, &[0, 1]);
        }
    }

    #[test]
    fn trace_simulation_items_hold_on_two_machines() {
        for item in 7..=8 {
            check_all_owners(item, 2, 1, &[0, 1]);
        }
    }

    #[test]
    fn instance_count_matches_hand_enumeration() {
        // Independent count for item 1 on 2 machines, 1 location, 2 values:
        // the universe test pinned 14 configurations, and item 1 ranges
        // over 2 machines and 2 values at the single location.
        let configs = 14u64;
        let mut tuples = 0u64;
        for _i in 1..=2u32 {
            for _v in [0, 1] {
                tuples += 1;
            }
        }
        let report = check_prop1(1, &universe(2, &[("x", 1)], &[0, 1])).unwrap();
        assert_eq!(report.instances_checked, configs * tuples);
        assert_eq!(report.instances_checked, 56);
    }

    #[test]
    fn shallow_tau_depth_is_rejected() {
        let mut u = universe(2, &[("x", 1)], &[0, 1]);
        u.tau_depth = 1;
        assert!(matches!(
            check_prop1(1, &u),
            Err(PropError::TauDepthTooShallow { depth: 1, min: 2 })
        ));
        assert!(matches!(check_prop1(9, &u), Err(PropError::NoSuchItem(9))));
    }

    #[test]
    fn reports_serialize_deterministically() {
        let u = universe(2, &[("x", 2)], &[0, 1]);
        let a = serde_json::to_string(&check_prop1(7, &u).unwrap()).unwrap();
        let b = serde_json::to_string(&check_prop1(7, &u).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"instances_checked\""));
    }

    #[test]
    fn broken_memory_store_is_caught() {
        let u = universe(2, &[("x", 2)], &[0, 1]);
        let step = mutant_step("mstore-keep-caches").unwrap();
        let r3 = check_prop1_with(3, &u, &step).unwrap();
        let r6 = check_prop1_with(6, &u, &step).unwrap();
        assert!(
            !r3.counterexamples.is_empty() || !r6.counterexamples.is_empty(),
            "the memory-store mutant must fail a strength law"
        );
    }

    #[test]
    fn broken_local_store_is_caught_by_the_invariant_or_equivalence() {
        let u = universe(2, &[("x", 1)], &[0, 1]);
        let step = mutant_step("lstore-keep-others").unwrap();
        let caught = (1..=8).any(|item| {
            !check_prop1_with(item, &u, &step)
                .unwrap()
                .counterexamples
                .is_empty()
        });
        assert!(caught, "the local-store mutant must be caught");
    }

    #[test]
    fn broken_remote_store_is_caught() {
        let u = universe(2, &[("x", 2)], &[0, 1]);
        let step = mutant_step("rstore-local-target").unwrap();
        let report = check_prop1_with(5, &u, &step).unwrap();
        assert!(
            !report.counterexamples.is_empty(),
            "a remote store that writes the issuer's cache leaves the line locally cached, \
             so the follow-up local flush cannot be enabled"
        );
    }

    #[test]
    fn unknown_mutant_is_rejected() {
        assert!(mutant_step("no-such-mutant").is_none());
        for name in MUTANT_NAMES {
            assert!(mutant_step(name).is_some(), "{name}");
        }
    }
}
