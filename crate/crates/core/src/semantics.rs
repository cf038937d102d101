//! The labeled transition system at the heart of the crate.
//!
//! A [`Topology`] fixes the static world: how many machines exist, which
//! machine owns each named location, which machines have volatile memory
//! segments, and the finite value domain. A [`Configuration`] is one dynamic
//! state: a cache entry per machine and location (possibly invalid) plus one
//! memory cell per location, held by the location's owner.
//!
//! Transitions are described by [`Label`]s and implemented by [`enabled`],
//! [`step`] and [`rmw_step`]. The visible labels are the three store classes,
//! loads, the two flush classes, the global persistence fence, atomic
//! read-modify-writes, and per-machine crashes. The internal `tau` labels
//! model the fabric silently moving a cached value towards its home: from a
//! non-owner cache into the owner's cache, or from the owner's cache into
//! memory.
//!
//! Every reachable configuration satisfies *cache uniqueness*: two valid
//! cache entries for the same location always agree on the value
//! ([`check_cache_invariant`]). Stores at any class invalidate every other
//! cache entry for the written location, which is what maintains the
//! invariant.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Values stored in caches and memory. The model is finite-state: every
/// value must come from the topology's declared domain.
pub type Value = i64;

/// A machine identifier; machines are numbered `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MachineId(pub u32);

impl fmt::Display for MachineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a location in a [`Topology`]. Locations are kept sorted by name,
/// so indices are stable and name-ordered for a given topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LocId(pub u32);

/// Whether a machine's memory segment survives a crash of that machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Volatility {
    NonVolatile,
    Volatile,
}

/// Persistence class of a store or read-modify-write: into the issuing
/// machine's cache, into the owner's cache, or directly into memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreClass {
    Local,
    Remote,
    Memory,
}

impl StoreClass {
    /// One-letter prefix used in label and instruction rendering.
    pub fn letter(self) -> char {
        match self {
            StoreClass::Local => 'L',
            StoreClass::Remote => 'R',
            StoreClass::Memory => 'M',
        }
    }
}

/// Scope of a flush: local waits for the issuing machine's own entry to
/// drain, remote waits for every cache entry of the location to drain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlushClass {
    Local,
    Remote,
}

impl FlushClass {
    pub fn letter(self) -> char {
        match self {
            FlushClass::Local => 'L',
            FlushClass::Remote => 'R',
        }
    }
}

/// The update function of an atomic read-modify-write.
///
/// `apply` returns `None` when the operation fails (a compare-and-set whose
/// expectation does not match); a failed read-modify-write behaves exactly
/// like a load of the read value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RmwFunc {
    /// Fetch-and-add by the given delta.
    Add(Value),
    /// Compare-and-set: write `new` iff the read value equals `expected`.
    CompareAndSet { expected: Value, new: Value },
    /// Unconditionally write the given value, returning the old one.
    Exchange(Value),
}

impl RmwFunc {
    /// The value written for a read of `v`, or `None` if the operation fails.
    pub fn apply(self, v: Value) -> Option<Value> {
        match self {
            RmwFunc::Add(d) => Some(v + d),
            RmwFunc::CompareAndSet { expected, new } => (v == expected).then_some(new),
            RmwFunc::Exchange(new) => Some(new),
        }
    }
}

impl fmt::Display for RmwFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RmwFunc::Add(d) => write!(f, "add {d}"),
            RmwFunc::CompareAndSet { expected, new } => write!(f, "cas {expected} {new}"),
            RmwFunc::Exchange(new) => write!(f, "xchg {new}"),
        }
    }
}

/// An internal fabric step: values drift from non-owner caches to the
/// owner's cache, and from the owner's cache into memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TauKind {
    /// Move the value cached by `machine` (a non-owner) into the owner's
    /// cache, invalidating `machine`'s entry.
    CacheToCache { machine: MachineId, loc: LocId },
    /// Write the owner's cached value to memory and invalidate every cache
    /// entry for the location.
    CacheToMem { loc: LocId },
}

/// A transition label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Store {
        class: StoreClass,
        machine: MachineId,
        loc: LocId,
        value: Value,
    },
    /// `Load` labels carry the value read; the label is enabled only if that
    /// exact value is readable.
    Load {
        machine: MachineId,
        loc: LocId,
        value: Value,
    },
    Flush {
        class: FlushClass,
        machine: MachineId,
        loc: LocId,
    },
    /// Global persistence fence: enabled only when every cache entry of
    /// every machine is invalid.
    Gpf { machine: MachineId },
    Rmw {
        class: StoreClass,
        machine: MachineId,
        loc: LocId,
        func: RmwFunc,
    },
    Tau(TauKind),
    Crash { machine: MachineId },
}

impl Label {
    /// Render the label in the report syntax, e.g. `LStore_1(x,1)`,
    /// `tau(cache-mem x)`, `crash_2`.
    pub fn render(&self, topo: &Topology) -> String {
        let name = |l: LocId| topo.loc_name(l);
        match *self {
            Label::Store {
                class,
                machine,
                loc,
                value,
            } => format!("{}Store_{machine}({},{value})", class.letter(), name(loc)),
            Label::Load {
                machine,
                loc,
                value,
            } => format!("Load_{machine}({},{value})", name(loc)),
            Label::Flush {
                class,
                machine,
                loc,
            } => format!("{}Flush_{machine}({})", class.letter(), name(loc)),
            Label::Gpf { machine } => format!("GPF_{machine}"),
            Label::Rmw {
                class,
                machine,
                loc,
                func,
            } => format!("{}Rmw_{machine}({},{func})", class.letter(), name(loc)),
            Label::Tau(TauKind::CacheToCache { machine, loc }) => {
                format!("tau(cache-cache {machine},{})", name(loc))
            }
            Label::Tau(TauKind::CacheToMem { loc }) => format!("tau(cache-mem {})", name(loc)),
            Label::Crash { machine } => format!("crash_{machine}"),
        }
    }

    /// True for the internal fabric labels.
    pub fn is_tau(&self) -> bool {
        matches!(self, Label::Tau(_))
    }
}

/// Errors raised when building a [`Topology`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("a topology needs at least one machine")]
    NoMachines,
    #[error("location {loc} is owned by machine {owner}, but there are only {machines} machines")]
    OwnerOutOfRange { loc: String, owner: u32, machines: u32 },
    #[error("location {0} is declared twice")]
    DuplicateLocation(String),
    #[error("location name {0:?} is empty or not an identifier")]
    BadLocationName(String),
    #[error("the value domain is empty")]
    EmptyDomain,
    #[error("the value domain must contain 0 (the post-crash memory value)")]
    DomainMissingZero,
    #[error("volatility list has {got} entries for {machines} machines")]
    VolatilityLen { got: usize, machines: u32 },
}

/// Static description of a fabric: machine count, named-and-owned locations,
/// per-machine volatility, and the finite value domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    machines: u32,
    /// Sorted by name; `LocId` indexes into this.
    locs: Vec<LocInfo>,
    /// Indexed by machine id minus one.
    volatility: Vec<Volatility>,
    /// Sorted ascending, deduplicated, contains 0.
    domain: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct LocInfo {
    name: String,
    owner: MachineId,
}

impl Topology {
    /// Build a topology. Location order is normalized to name order, so the
    /// same declarations in any order produce the same topology.
    pub fn new(
        machines: u32,
        locs: Vec<(String, MachineId)>,
        volatility: Vec<Volatility>,
        mut domain: Vec<Value>,
    ) -> Result<Topology, TopologyError> {
        if machines == 0 {
            return Err(TopologyError::NoMachines);
        }
        if volatility.len() != machines as usize {
            return Err(TopologyError::VolatilityLen {
                got: volatility.len(),
                machines,
            });
        }
        let mut infos: Vec<LocInfo> = Vec::with_capacity(locs.len());
        for (name, owner) in locs {
            if name.is_empty()
                || !name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
                || !name.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
            {
                return Err(TopologyError::BadLocationName(name));
            }
            if owner.0 == 0 || owner.0 > machines {
                return Err(TopologyError::OwnerOutOfRange {
                    loc: name,
                    owner: owner.0,
                    machines,
                });
            }
            infos.push(LocInfo { name, owner });
        }
        infos.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = infos.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(TopologyError::DuplicateLocation(w[0].name.clone()));
        }
        domain.sort_unstable();
        domain.dedup();
        if domain.is_empty() {
            return Err(TopologyError::EmptyDomain);
        }
        if !domain.contains(&0) {
            return Err(TopologyError::DomainMissingZero);
        }
        Ok(Topology {
            machines,
            locs: infos,
            volatility,
            domain,
        })
    }

    /// The default value domain used when a test declares none.
    pub fn default_domain() -> Vec<Value> {
        vec![0, 1, 2]
    }

    pub fn machine_count(&self) -> u32 {
        self.machines
    }

    /// Iterate machine ids `1..=n`.
    pub fn machine_ids(&self) -> impl Iterator<Item = MachineId> {
        (1..=self.machines).map(MachineId)
    }

    pub fn loc_count(&self) -> u32 {
        self.locs.len() as u32
    }

    /// Iterate location ids in name order.
    pub fn loc_ids(&self) -> impl Iterator<Item = LocId> {
        (0..self.loc_count()).map(LocId)
    }

    /// Look up a location by name.
    pub fn loc(&self, name: &str) -> Option<LocId> {
        self.locs
            .binary_search_by(|info| info.name.as_str().cmp(name))
            .ok()
            .map(|i| LocId(i as u32))
    }

    pub fn loc_name(&self, loc: LocId) -> &str {
        &self.locs[loc.0 as usize].name
    }

    pub fn owner(&self, loc: LocId) -> MachineId {
        self.locs[loc.0 as usize].owner
    }

    pub fn volatility(&self, machine: MachineId) -> Volatility {
        self.volatility[(machine.0 - 1) as usize]
    }

    /// The sorted value domain.
    pub fn domain(&self) -> &[Value] {
        &self.domain
    }

    pub fn in_domain(&self, v: Value) -> bool {
        self.domain.binary_search(&v).is_ok()
    }

    fn check_machine(&self, m: MachineId) -> Result<(), SemanticsError> {
        if m.0 == 0 || m.0 > self.machines {
            return Err(SemanticsError::UnknownMachine(m.0));
        }
        Ok(())
    }

    fn check_loc(&self, l: LocId) -> Result<(), SemanticsError> {
        if l.0 >= self.loc_count() {
            return Err(SemanticsError::UnknownLocation(l.0));
        }
        Ok(())
    }

    fn check_value(&self, v: Value) -> Result<(), SemanticsError> {
        if !self.in_domain(v) {
            return Err(SemanticsError::OutOfDomain { value: v });
        }
        Ok(())
    }
}

/// Errors raised by [`enabled`], [`step`] and [`rmw_step`].
#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticsError {
    #[error("machine {0} does not exist in this topology")]
    UnknownMachine(u32),
    #[error("location index {0} does not exist in this topology")]
    UnknownLocation(u32),
    #[error("value {value} is outside the declared value domain")]
    OutOfDomain { value: Value },
    #[error("read-modify-write result {value} is outside the declared value domain")]
    RmwOutOfDomain { value: Value },
    #[error("label {label} is not enabled in this configuration")]
    NotEnabled { label: String },
    #[error("rmw_step requires a read-modify-write label, got {label}")]
    NotRmw { label: String },
}

/// One dynamic state of the fabric: a cache entry per (machine, location)
/// and one memory cell per location. `None` is an invalid cache entry.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    n_locs: u32,
    /// Row-major by machine: entry for machine `m`, location `l` lives at
    /// `(m-1) * n_locs + l`.
    cache: Box<[Option<Value>]>,
    mem: Box<[Value]>,
}

impl Configuration {
    /// Build a configuration from raw parts. Crate-internal: ordinary code
    /// reaches configurations only through [`init_config`] and [`step`], so
    /// every public configuration satisfies cache uniqueness by
    /// construction; the explorer's universe enumerator uses this directly.
    pub(crate) fn from_parts(
        n_locs: u32,
        cache: Vec<Option<Value>>,
        mem: Vec<Value>,
    ) -> Configuration {
        Configuration {
            n_locs,
            cache: cache.into_boxed_slice(),
            mem: mem.into_boxed_slice(),
        }
    }

    fn idx(&self, m: MachineId, l: LocId) -> usize {
        (m.0 - 1) as usize * self.n_locs as usize + l.0 as usize
    }

    fn machine_count(&self) -> u32 {
        if self.n_locs == 0 {
            // Zero-location configurations carry no cache entries, so the
            // machine count is not recoverable from the arrays; it is also
            // irrelevant, since every cache predicate is vacuously true.
            0
        } else {
            (self.cache.len() / self.n_locs as usize) as u32
        }
    }

    /// The cache entry of `machine` for `loc`.
    pub fn cache(&self, machine: MachineId, loc: LocId) -> Option<Value> {
        self.cache[self.idx(machine, loc)]
    }

    /// The memory cell of `loc`.
    pub fn mem(&self, loc: LocId) -> Value {
        self.mem[loc.0 as usize]
    }

    /// The unique cached value for `loc`, if any machine caches it. Under
    /// cache uniqueness all valid entries agree, so the first one suffices.
    pub fn cached_value(&self, loc: LocId) -> Option<Value> {
        (1..=self.machine_count()).find_map(|m| self.cache(MachineId(m), loc))
    }

    /// The machine a load would read from: `Some` machine caching the
    /// location, or `None` when the value comes from memory.
    pub fn cache_holder(&self, loc: LocId) -> Option<MachineId> {
        (1..=self.machine_count())
            .map(MachineId)
            .find(|&m| self.cache(m, loc).is_some())
    }

    /// The value a load of `loc` returns right now: the unique cached value
    /// if one exists, the memory cell otherwise.
    pub fn readable_value(&self, loc: LocId) -> Value {
        self.cached_value(loc).unwrap_or_else(|| self.mem(loc))
    }

    fn set_cache(&mut self, m: MachineId, l: LocId, v: Option<Value>) {
        let i = self.idx(m, l);
        self.cache[i] = v;
    }

    /// Invalidate every cache entry for `loc` except (optionally) `keep`'s.
    fn invalidate_others(&mut self, loc: LocId, keep: Option<MachineId>) {
        for m in 1..=self.machine_count() {
            let m = MachineId(m);
            if Some(m) != keep {
                self.set_cache(m, loc, None);
            }
        }
    }

    /// Render the canonical single-line form, e.g.
    /// `C[1:x=1,y=_;2:x=_,y=_] M[x=0,y=0]`. Locations appear in name order
    /// and machines in ascending order.
    pub fn render(&self, topo: &Topology) -> String {
        use fmt::Write as _;
        let mut out = String::from("C[");
        for m in topo.machine_ids() {
            if m.0 > 1 {
                out.push(';');
            }
            let _ = write!(out, "{m}:");
            for l in topo.loc_ids() {
                if l.0 > 0 {
                    out.push(',');
                }
                match self.cache(m, l) {
                    Some(v) => {
                        let _ = write!(out, "{}={v}", topo.loc_name(l));
                    }
                    None => {
                        let _ = write!(out, "{}=_", topo.loc_name(l));
                    }
                }
            }
        }
        out.push_str("] M[");
        for l in topo.loc_ids() {
            if l.0 > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}={}", topo.loc_name(l), self.mem(l));
        }
        out.push(']');
        out
    }
}

/// The initial configuration: every cache entry invalid, every memory cell 0.
pub fn init_config(topo: &Topology) -> Configuration {
    Configuration {
        n_locs: topo.loc_count(),
        cache: vec![None; (topo.machine_count() * topo.loc_count()) as usize].into_boxed_slice(),
        mem: vec![0; topo.loc_count() as usize].into_boxed_slice(),
    }
}

/// Cache uniqueness: for every location, all valid cache entries agree on
/// the value. Holds in every configuration reachable from [`init_config`].
pub fn check_cache_invariant(cfg: &Configuration) -> bool {
    for l in 0..cfg.n_locs {
        let l = LocId(l);
        let mut seen: Option<Value> = None;
        for m in 1..=cfg.machine_count() {
            if let Some(v) = cfg.cache(MachineId(m), l) {
                match seen {
                    Some(w) if w != v => return false,
                    _ => seen = Some(v),
                }
            }
        }
    }
    true
}

fn validate_label(topo: &Topology, label: &Label) -> Result<(), SemanticsError> {
    match *label {
        Label::Store {
            machine, loc, value, ..
        } => {
            topo.check_machine(machine)?;
            topo.check_loc(loc)?;
            topo.check_value(value)
        }
        Label::Load {
            machine, loc, value
        } => {
            topo.check_machine(machine)?;
            topo.check_loc(loc)?;
            topo.check_value(value)
        }
        Label::Flush { machine, loc, .. } => {
            topo.check_machine(machine)?;
            topo.check_loc(loc)
        }
        Label::Gpf { machine } | Label::Crash { machine } => topo.check_machine(machine),
        Label::Rmw { machine, loc, .. } => {
            topo.check_machine(machine)?;
            topo.check_loc(loc)
        }
        Label::Tau(TauKind::CacheToCache { machine, loc }) => {
            topo.check_machine(machine)?;
            topo.check_loc(loc)
        }
        Label::Tau(TauKind::CacheToMem { loc }) => topo.check_loc(loc),
    }
}

/// Is `label` enabled in `cfg`? Errors only on ill-formed labels (unknown
/// machine or location, value outside the domain).
pub fn enabled(cfg: &Configuration, topo: &Topology, label: &Label) -> Result<bool, SemanticsError> {
    validate_label(topo, label)?;
    Ok(match *label {
        // Stores of in-domain values and crashes are always enabled.
        Label::Store { .. } | Label::Crash { .. } => true,
        Label::Load { loc, value, .. } => cfg.readable_value(loc) == value,
        Label::Flush {
            class: FlushClass::Local,
            machine,
            loc,
        } => cfg.cache(machine, loc).is_none(),
        Label::Flush {
            class: FlushClass::Remote,
            loc,
            ..
        } => cfg.cache_holder(loc).is_none(),
        Label::Gpf { .. } => topo
            .loc_ids()
            .all(|l| cfg.cache_holder(l).is_none()),
        Label::Rmw { loc, func, .. } => {
            // Enabled unless the write would leave the domain; a failed
            // compare-and-set writes nothing and is always enabled.
            match func.apply(cfg.readable_value(loc)) {
                Some(w) => topo.in_domain(w),
                None => true,
            }
        }
        Label::Tau(TauKind::CacheToCache { machine, loc }) => {
            machine != topo.owner(loc) && cfg.cache(machine, loc).is_some()
        }
        Label::Tau(TauKind::CacheToMem { loc }) => cfg.cache(topo.owner(loc), loc).is_some(),
    })
}

/// A drop-in replacement for [`step`]: either the honest transition
/// function or a deliberately broken variant injected for testing the
/// checkers themselves.
pub type StepFn =
    dyn Fn(&Configuration, &Topology, &Label) -> Result<Configuration, SemanticsError> + Sync;

/// Apply `label` to `cfg`, failing if it is not enabled. Read-modify-write
/// labels are applied via [`rmw_step`], discarding the read value.
pub fn step(
    cfg: &Configuration,
    topo: &Topology,
    label: &Label,
) -> Result<Configuration, SemanticsError> {
    if let Label::Rmw {
        class,
        machine,
        loc,
        func,
    } = *label
    {
        return rmw_step(cfg, topo, class, machine, loc, func).map(|(next, _)| next);
    }
    if !enabled(cfg, topo, label)? {
        return Err(SemanticsError::NotEnabled {
            label: label.render(topo),
        });
    }
    let mut next = cfg.clone();
    match *label {
        Label::Store {
            class,
            machine,
            loc,
            value,
        } => {
            match class {
                StoreClass::Local => {
                    next.set_cache(machine, loc, Some(value));
                    next.invalidate_others(loc, Some(machine));
                }
                StoreClass::Remote => {
                    let owner = topo.owner(loc);
                    next.set_cache(owner, loc, Some(value));
                    next.invalidate_others(loc, Some(owner));
                }
                StoreClass::Memory => {
                    next.mem[loc.0 as usize] = value;
                    next.invalidate_others(loc, None);
                }
            }
        }
        Label::Load { machine, loc, value } => {
            // A load served by a cache copies the value into the reader's
            // cache; a load served by memory leaves the configuration alone.
            if cfg.cache_holder(loc).is_some() {
                next.set_cache(machine, loc, Some(value));
            }
        }
        // Flushes and the global fence are pure waiting: once enabled they
        // change nothing.
        Label::Flush { .. } | Label::Gpf { .. } => {}
        Label::Tau(TauKind::CacheToCache { machine, loc }) => {
            let v = cfg.cache(machine, loc).expect("enabled checked");
            next.set_cache(topo.owner(loc), loc, Some(v));
            next.set_cache(machine, loc, None);
        }
        Label::Tau(TauKind::CacheToMem { loc }) => {
            let owner = topo.owner(loc);
            let v = cfg.cache(owner, loc).expect("enabled checked");
            next.mem[loc.0 as usize] = v;
            next.invalidate_others(loc, None);
        }
        Label::Crash { machine } => {
            for l in topo.loc_ids() {
                next.set_cache(machine, l, None);
            }
            if topo.volatility(machine) == Volatility::Volatile {
                for l in topo.loc_ids() {
                    if topo.owner(l) == machine {
                        next.mem[l.0 as usize] = 0;
                    }
                }
            }
        }
        Label::Rmw { .. } => unreachable!("handled above"),
    }
    Ok(next)
}

/// Apply an atomic read-modify-write and return the value read.
///
/// The read value is the unique cached value if any cache holds the
/// location, the memory cell otherwise. A successful update writes at the
/// class target (own cache, owner's cache, or memory) and invalidates every
/// other cache entry for the location, exactly like the matching store. A
/// failed update (compare-and-set mismatch) behaves like a load of the read
/// value, including the copy into the reader's cache when the value came
/// from a cache.
pub fn rmw_step(
    cfg: &Configuration,
    topo: &Topology,
    class: StoreClass,
    machine: MachineId,
    loc: LocId,
    func: RmwFunc,
) -> Result<(Configuration, Value), SemanticsError> {
    topo.check_machine(machine)?;
    topo.check_loc(loc)?;
    let read = cfg.readable_value(loc);
    let mut next = cfg.clone();
    match func.apply(read) {
        None => {
            if cfg.cache_holder(loc).is_some() {
                next.set_cache(machine, loc, Some(read));
            }
        }
        Some(written) => {
            if !topo.in_domain(written) {
                return Err(SemanticsError::RmwOutOfDomain { value: written });
            }
            match class {
                StoreClass::Local => {
                    next.set_cache(machine, loc, Some(written));
                    next.invalidate_others(loc, Some(machine));
                }
                StoreClass::Remote => {
                    let owner = topo.owner(loc);
                    next.set_cache(owner, loc, Some(written));
                    next.invalidate_others(loc, Some(owner));
                }
                StoreClass::Memory => {
                    next.mem[loc.0 as usize] = written;
                    next.invalidate_others(loc, None);
                }
            }
        }
    }
    Ok((next, read))
}

/// Enumerate the `tau` labels enabled in `cfg`, in deterministic order:
/// for each location (name order), first cache-to-cache moves by machine
/// order, then the cache-to-mem move.
pub fn enabled_taus(cfg: &Configuration, topo: &Topology) -> Vec<Label> {
    let mut out = Vec::new();
    for l in topo.loc_ids() {
        for m in topo.machine_ids() {
            if m != topo.owner(l) && cfg.cache(m, l).is_some() {
                out.push(Label::Tau(TauKind::CacheToCache { machine: m, loc: l }));
            }
        }
        if cfg.cache(topo.owner(l), l).is_some() {
            out.push(Label::Tau(TauKind::CacheToMem { loc: l }));
        }
    }
    out
}
