//! Litmus-test DSL: parser, canonical printer, and runner.
//!
//! A litmus test names a topology, then gives either a *trace* — a fixed,
//! serialized sequence of fabric events whose expectation is `allowed`
//! (some execution realizes it) or `forbidden` (none does) — or a
//! *program* — one straight-line thread per `thread` clause with optional
//! crash budgets, whose expectation is `assert-may-fail` or
//! `assert-never-fails` over the thread assertions.
//!
//! The grammar (`#` comments run to end of line; files use the `.lit`
//! extension):
//!
//! ```text
//! test  := 'test' STRING 'machines' INT decl*
//!          ('domain' '{' INT (',' INT)* '}')? body 'expect' expectation
//! decl  := 'loc' IDENT '@' INT ('volatile' | 'nonvolatile')?
//! body  := 'trace' '{' [ event (';' event)* ] '}'
//!        | thread+ ('crashes' '{' INT ':' 'max' INT
//!                             (',' INT ':' 'max' INT)* '}')?
//! event := INT ':' op | 'crash' INT
//! op    := ('LStore'|'RStore'|'MStore') IDENT (INT|REG)
//!        | 'Load' IDENT '=' INT  |  REG '=' 'Load' IDENT
//!        | ('LFlush'|'RFlush') IDENT | 'GPF'
//!        | ('LFaa'|'RFaa'|'MFaa') IDENT INT
//! thread := 'thread' INT 'on' INT '{' stmt (';' stmt)* '}'
//! stmt  := op | 'assert' REG ('=='|'!=') (REG|INT)
//! expectation := 'allowed' | 'forbidden'
//!              | 'assert-may-fail' | 'assert-never-fails'
//! ```
//!
//! Trace expectations pair with trace bodies and assertion expectations
//! with program bodies; mixing them is a parse error. `Load x = v` blocks
//! until `v` is readable — in traces it constrains which executions
//! realize the trace, in programs it acts as a scheduling guard. Stores
//! may take a register source, which is how a data dependency between
//! fabric events is written down. The default value domain is {0, 1, 2}
//! and the default volatility is non-volatile; a `volatile` location marks
//! its owning machine's memory as lost on crash.

use crate::explorer::{
    self, AssertExpr, CmpOp, CrashBudget, ExploreError, FabricTrace, Instr, Operand, Program,
    RegId, ThreadSpec, TraceEvent,
};
use crate::semantics::{
    FlushClass, LocId, MachineId, RmwFunc, StoreClass, Topology, Value, Volatility,
};
use serde::Serialize;
use std::fmt;
use thiserror::Error;

/// Expected (and computed) result of a litmus test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    /// Trace mode: some execution realizes the trace.
    Allowed,
    /// Trace mode: no execution realizes the trace.
    Forbidden,
    /// Program mode: some execution fails an assertion.
    AssertMayFail,
    /// Program mode: assertions hold in every execution.
    AssertNeverFails,
}

impl Expectation {
    fn keyword(self) -> &'static str {
        match self {
            Expectation::Allowed => "allowed",
            Expectation::Forbidden => "forbidden",
            Expectation::AssertMayFail => "assert-may-fail",
            Expectation::AssertNeverFails => "assert-never-fails",
        }
    }

    fn is_trace(self) -> bool {
        matches!(self, Expectation::Allowed | Expectation::Forbidden)
    }
}

impl fmt::Display for Expectation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Body of a litmus test: a serialized trace or a thread program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LitmusBody {
    Trace(FabricTrace),
    Program(Program),
}

/// A parsed litmus test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LitmusTest {
    pub name: String,
    pub body: LitmusBody,
    pub expect: Expectation,
}

impl LitmusTest {
    pub fn topology(&self) -> &Topology {
        match &self.body {
            LitmusBody::Trace(t) => &t.topology,
            LitmusBody::Program(p) => &p.topology,
        }
    }
}

/// Errors from parsing, printing, or running a litmus test.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum LitmusError {
    #[error("{line}:{col}: {message}")]
    Parse { line: u32, col: u32, message: String },
    #[error("test is not expressible in the litmus format: {0}")]
    Unprintable(String),
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(Value),
    Str(String),
    Colon,
    Semi,
    Comma,
    At,
    LBrace,
    RBrace,
    Assign,
    EqEq,
    NotEq,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Colon => "`:`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::At => "`@`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Assign => "`=`".into(),
            Tok::EqEq => "`==`".into(),
            Tok::NotEq => "`!=`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(text: &str) -> Result<(Vec<Token>, (u32, u32)), LitmusError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let mut chars = text.chars().peekable();
    let err = |line: u32, col: u32, message: String| LitmusError::Parse { line, col, message };
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().expect("peeked");
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        match c {
            ' ' | '\t' | '\r' | '\n' => {
                bump(&mut chars);
            }
            '#' => {
                while chars.peek().is_some_and(|&c| c != '\n') {
                    bump(&mut chars);
                }
            }
            '"' => {
                bump(&mut chars);
                let mut s = String::new();
                loop {
                    match chars.peek() {
                        None => return Err(err(tl, tc, "unterminated string".into())),
                        Some('\n') => {
                            return Err(err(tl, tc, "string not closed before end of line".into()))
                        }
                        Some('"') => {
                            bump(&mut chars);
                            break;
                        }
                        Some(_) => s.push(bump(&mut chars)),
                    }
                }
                out.push(Token {
                    tok: Tok::Str(s),
                    line: tl,
                    col: tc,
                });
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut s = String::new();
                s.push(bump(&mut chars));
                if c == '-' && !chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    return Err(err(tl, tc, "`-` must begin a number".into()));
                }
                while chars.peek().is_some_and(|d| d.is_ascii_digit()) {
                    s.push(bump(&mut chars));
                }
                let n = s
                    .parse::<Value>()
                    .map_err(|_| err(tl, tc, format!("number `{s}` out of range")))?;
                out.push(Token {
                    tok: Tok::Int(n),
                    line: tl,
                    col: tc,
                });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut s = String::new();
                while chars
                    .peek()
                    .is_some_and(|&d| d.is_ascii_alphanumeric() || d == '_' || d == '-')
                {
                    s.push(bump(&mut chars));
                }
                out.push(Token {
                    tok: Tok::Ident(s),
                    line: tl,
                    col: tc,
                });
            }
            _ => {
                bump(&mut chars);
                let tok = match c {
                    ':' => Tok::Colon,
                    ';' => Tok::Semi,
                    ',' => Tok::Comma,
                    '@' => Tok::At,
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '=' => {
                        if chars.peek() == Some(&'=') {
                            bump(&mut chars);
                            Tok::EqEq
                        } else {
                            Tok::Assign
                        }
                    }
                    '!' => {
                        if chars.peek() == Some(&'=') {
                            bump(&mut chars);
                            Tok::NotEq
                        } else {
                            return Err(err(tl, tc, "expected `!=`".into()));
                        }
                    }
                    other => return Err(err(tl, tc, format!("unexpected character `{other}`"))),
                };
                out.push(Token { tok, line: tl, col: tc });
            }
        }
    }
    Ok((out, (line, col)))
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    eof: (u32, u32),
}

/// A location declaration before topology construction.
struct LocDecl {
    name: String,
    owner: u32,
    volatility: Option<Volatility>,
    line: u32,
    col: u32,
}

impl Parser {
    fn here(&self) -> (u32, u32) {
        self.tokens
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.eof)
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, LitmusError> {
        let (line, col) = self.here();
        Err(LitmusError::Parse {
            line,
            col,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn next(&mut self, what: &str) -> Result<Tok, LitmusError> {
        match self.tokens.get(self.pos) {
            Some(t) => {
                self.pos += 1;
                Ok(t.tok.clone())
            }
            None => self.fail(format!("expected {what}, found end of input")),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), LitmusError> {
        let got = self.next(&tok.describe())?;
        if got == tok {
            Ok(())
        } else {
            self.pos -= 1;
            self.fail(format!("expected {}, found {}", tok.describe(), got.describe()))
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), LitmusError> {
        let got = self.next(&format!("`{kw}`"))?;
        match got {
            Tok::Ident(s) if s == kw => Ok(()),
            other => {
                self.pos -= 1;
                self.fail(format!("expected `{kw}`, found {}", other.describe()))
            }
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn int(&mut self, what: &str) -> Result<Value, LitmusError> {
        match self.next(what)? {
            Tok::Int(n) => Ok(n),
            other => {
                self.pos -= 1;
                self.fail(format!("expected {what}, found {}", other.describe()))
            }
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, LitmusError> {
        match self.next(what)? {
            Tok::Ident(s) => Ok(s),
            other => {
                self.pos -= 1;
                self.fail(format!("expected {what}, found {}", other.describe()))
            }
        }
    }

    fn machine(&mut self, machines: u32) -> Result<MachineId, LitmusError> {
        let save = self.pos;
        let n = self.int("a machine id")?;
        if n < 1 || n > machines as Value {
            self.pos = save;
            return self.fail(format!("unknown machine {n} (declared machines: {machines})"));
        }
        Ok(MachineId(n as u32))
    }
}

/// Shared context while parsing trace events or thread statements.
struct BodyCtx<'a> {
    topo: &'a Topology,
}

/// Register scope during parsing: the name table (which only grows and
/// fixes the register-file layout) and the set of registers currently
/// holding a value (reset when the machine crashes mid-trace).
struct RegScope<'a> {
    names: &'a mut Vec<String>,
    defined: &'a mut std::collections::HashSet<RegId>,
}

impl BodyCtx<'_> {
    fn loc(&self, p: &mut Parser) -> Result<LocId, LitmusError> {
        let save = p.pos;
        let name = p.ident("a location name")?;
        match self.topo.loc(&name) {
            Some(l) => Ok(l),
            None => {
                p.pos = save;
                p.fail(format!("unknown location `{name}`"))
            }
        }
    }

    fn domain_value(&self, p: &mut Parser, what: &str) -> Result<Value, LitmusError> {
        let save = p.pos;
        let v = p.int(what)?;
        if !self.topo.in_domain(v) {
            p.pos = save;
            return p.fail(format!("value {v} outside the declared domain"));
        }
        Ok(v)
    }

    /// Parse one op. `regs` is the active register scope (per machine in
    /// trace mode, per thread in program mode); loads define registers,
    /// reads must hit a currently defined one.
    fn op(&self, p: &mut Parser, regs: &mut RegScope) -> Result<Instr, LitmusError> {
        let save = p.pos;
        let head = p.ident("an operation")?;
        let store_class = |s: &str| match s {
            "LStore" => Some(StoreClass::Local),
            "RStore" => Some(StoreClass::Remote),
            "MStore" => Some(StoreClass::Memory),
            _ => None,
        };
        let faa_class = |s: &str| match s {
            "LFaa" => Some(StoreClass::Local),
            "RFaa" => Some(StoreClass::Remote),
            "MFaa" => Some(StoreClass::Memory),
            _ => None,
        };
        if let Some(class) = store_class(&head) {
            let loc = self.loc(p)?;
            let src = match p.peek() {
                Some(Tok::Int(_)) => Operand::Imm(self.domain_value(p, "a stored value")?),
                _ => Operand::Reg(self.reg_read(p, regs)?),
            };
            return Ok(Instr::Store { class, loc, src });
        }
        if let Some(class) = faa_class(&head) {
            let loc = self.loc(p)?;
            let addend = p.int("an addend")?;
            return Ok(Instr::Rmw {
                class,
                loc,
                func: RmwFunc::Add(addend),
            });
        }
        match head.as_str() {
            "Load" => {
                let loc = self.loc(p)?;
                p.expect(Tok::Assign)?;
                let expect = self.domain_value(p, "an expected value")?;
                Ok(Instr::LoadExpect { loc, expect })
            }
            "LFlush" | "RFlush" => {
                let class = if head == "LFlush" {
                    FlushClass::Local
                } else {
                    FlushClass::Remote
                };
                let loc = self.loc(p)?;
                Ok(Instr::Flush { class, loc })
            }
            "GPF" => Ok(Instr::Gpf),
            _ => {
                // REG '=' 'Load' IDENT — a load into a register.
                p.pos = save;
                let dest = self.reg_define(p, regs)?;
                p.expect(Tok::Assign)?;
                p.keyword("Load")?;
                let loc = self.loc(p)?;
                Ok(Instr::LoadReg { dest, loc })
            }
        }
    }

    fn reg_read(&self, p: &mut Parser, regs: &RegScope) -> Result<RegId, LitmusError> {
        let save = p.pos;
        let name = p.ident("a value or register")?;
        match regs.names.iter().position(|r| *r == name) {
            Some(i) if regs.defined.contains(&(i as RegId)) => Ok(i as RegId),
            _ => {
                p.pos = save;
                p.fail(format!("register `{name}` has not been loaded yet"))
            }
        }
    }

    fn reg_define(&self, p: &mut Parser, regs: &mut RegScope) -> Result<RegId, LitmusError> {
        let name = p.ident("a register name")?;
        let i = match regs.names.iter().position(|r| *r == name) {
            Some(i) => i,
            None => {
                regs.names.push(name);
                regs.names.len() - 1
            }
        };
        regs.defined.insert(i as RegId);
        Ok(i as RegId)
    }
}

/// Parse the text of one `.lit` file into a [`LitmusTest`].
pub fn parse_litmus(text: &str) -> Result<LitmusTest, LitmusError> {
    let (tokens, eof) = lex(text)?;
    let mut p = Parser { tokens, pos: 0, eof };

    p.keyword("test")?;
    let name = match p.next("a test name string")? {
        Tok::Str(s) => s,
        other => {
            p.pos -= 1;
            return p.fail(format!("expected a test name string, found {}", other.describe()));
        }
    };
    p.keyword("machines")?;
    let machines_pos = p.here();
    let machines = p.int("a machine count")?;
    if machines < 1 {
        return Err(LitmusError::Parse {
            line: machines_pos.0,
            col: machines_pos.1,
            message: format!("machine count must be at least 1, got {machines}"),
        });
    }
    let machines = machines as u32;

    let mut decls: Vec<LocDecl> = Vec::new();
    while p.at_keyword("loc") {
        p.keyword("loc")?;
        let (line, col) = p.here();
        let name = p.ident("a location name")?;
        if decls.iter().any(|d| d.name == name) {
            return Err(LitmusError::Parse {
                line,
                col,
                message: format!("location `{name}` declared twice"),
            });
        }
        p.expect(Tok::At)?;
        let owner_pos = p.here();
        let owner = p.int("an owner machine id")?;
        if owner < 1 || owner > machines as Value {
            return Err(LitmusError::Parse {
                line: owner_pos.0,
                col: owner_pos.1,
                message: format!("unknown machine {owner} (declared machines: {machines})"),
            });
        }
        let volatility = if p.at_keyword("volatile") {
            p.keyword("volatile")?;
            Some(Volatility::Volatile)
        } else if p.at_keyword("nonvolatile") {
            p.keyword("nonvolatile")?;
            Some(Volatility::NonVolatile)
        } else {
            None
        };
        decls.push(LocDecl {
            name,
            owner: owner as u32,
            volatility,
            line,
            col,
        });
    }

    let mut domain = Topology::default_domain();
    if p.at_keyword("domain") {
        p.keyword("domain")?;
        let domain_pos = p.here();
        p.expect(Tok::LBrace)?;
        let mut vals = vec![p.int("a domain value")?];
        while p.peek() == Some(&Tok::Comma) {
            p.expect(Tok::Comma)?;
            vals.push(p.int("a domain value")?);
        }
        p.expect(Tok::RBrace)?;
        if !vals.contains(&0) {
            return Err(LitmusError::Parse {
                line: domain_pos.0,
                col: domain_pos.1,
                message: "the domain must contain 0, the initial value".into(),
            });
        }
        domain = vals;
    }

    // Volatile/nonvolatile location annotations induce per-machine
    // volatility; two locations of one owner must not disagree.
    let mut volatility = vec![None::<Volatility>; machines as usize];
    for d in &decls {
        if let Some(v) = d.volatility {
            let slot = &mut volatility[(d.owner - 1) as usize];
            match slot {
                None => *slot = Some(v),
                Some(prev) if *prev != v => {
                    return Err(LitmusError::Parse {
                        line: d.line,
                        col: d.col,
                        message: format!(
                            "location `{}` marks machine {} {v:?}, but an earlier location \
                             marked it {prev:?}",
                            d.name, d.owner
                        ),
                    })
                }
                Some(_) => {}
            }
        }
    }
    let volatility: Vec<Volatility> = volatility
        .into_iter()
        .map(|v| v.unwrap_or(Volatility::NonVolatile))
        .collect();

    let topo = Topology::new(
        machines,
        decls
            .iter()
            .map(|d| (d.name.clone(), MachineId(d.owner)))
            .collect(),
        volatility,
        domain,
    )
    .map_err(|e| LitmusError::Parse {
        line: 1,
        col: 1,
        message: e.to_string(),
    })?;
    let ctx = BodyCtx { topo: &topo };

    let body = if p.at_keyword("trace") {
        p.keyword("trace")?;
        p.expect(Tok::LBrace)?;
        let mut events = Vec::new();
        let mut reg_names: Vec<Vec<String>> = vec![Vec::new(); machines as usize];
        let mut defined = vec![std::collections::HashSet::new(); machines as usize];
        if p.peek() != Some(&Tok::RBrace) {
            loop {
                if p.at_keyword("crash") {
                    p.keyword("crash")?;
                    let machine = p.machine(machines)?;
                    // Local state is lost: the machine's registers reset.
                    defined[(machine.0 - 1) as usize].clear();
                    events.push(TraceEvent::Crash { machine });
                } else {
                    let machine = p.machine(machines)?;
                    p.expect(Tok::Colon)?;
                    let mi = (machine.0 - 1) as usize;
                    let mut scope = RegScope {
                        names: &mut reg_names[mi],
                        defined: &mut defined[mi],
                    };
                    let instr = ctx.op(&mut p, &mut scope)?;
                    events.push(TraceEvent::Op { machine, instr });
                }
                if p.peek() == Some(&Tok::Semi) {
                    p.expect(Tok::Semi)?;
                } else {
                    break;
                }
            }
        }
        p.expect(Tok::RBrace)?;
        LitmusBody::Trace(FabricTrace {
            topology: topo.clone(),
            events,
            reg_names,
        })
    } else if p.at_keyword("thread") {
        let mut threads: Vec<ThreadSpec> = Vec::new();
        while p.at_keyword("thread") {
            p.keyword("thread")?;
            let id_pos = p.here();
            let display_id = p.int("a thread id")?;
            if display_id < 1 {
                return Err(LitmusError::Parse {
                    line: id_pos.0,
                    col: id_pos.1,
                    message: format!("thread id must be at least 1, got {display_id}"),
                });
            }
            if threads.iter().any(|t| t.display_id == display_id as u32) {
                return Err(LitmusError::Parse {
                    line: id_pos.0,
                    col: id_pos.1,
                    message: format!("thread id {display_id} declared twice"),
                });
            }
            p.keyword("on")?;
            let machine = p.machine(machines)?;
            p.expect(Tok::LBrace)?;
            let mut spec = ThreadSpec::plain(display_id as u32, machine, Vec::new());
            let mut defined = std::collections::HashSet::new();
            if p.peek() != Some(&Tok::RBrace) {
                loop {
                    let mut scope = RegScope {
                        names: &mut spec.reg_names,
                        defined: &mut defined,
                    };
                    if p.at_keyword("assert") {
                        p.keyword("assert")?;
                        let lhs = ctx.reg_read(&mut p, &scope)?;
                        let op = match p.next("`==` or `!=`")? {
                            Tok::EqEq => CmpOp::Eq,
                            Tok::NotEq => CmpOp::Ne,
                            other => {
                                p.pos -= 1;
                                return p.fail(format!(
                                    "expected `==` or `!=`, found {}",
                                    other.describe()
                                ));
                            }
                        };
                        let rhs = match p.peek() {
                            Some(Tok::Int(_)) => Operand::Imm(p.int("a value")?),
                            _ => Operand::Reg(ctx.reg_read(&mut p, &scope)?),
                        };
                        spec.asserts.push(AssertExpr { lhs, op, rhs });
                    } else {
                        let instr = ctx.op(&mut p, &mut scope)?;
                        spec.instrs.push(instr);
                    }
                    if p.peek() == Some(&Tok::Semi) {
                        p.expect(Tok::Semi)?;
                    } else {
                        break;
                    }
                }
            }
            p.expect(Tok::RBrace)?;
            threads.push(spec);
        }
        let mut program = Program::new(topo.clone(), threads);
        if p.at_keyword("crashes") {
            p.keyword("crashes")?;
            p.expect(Tok::LBrace)?;
            let mut per_machine = vec![0u32; machines as usize];
            let mut seen = vec![false; machines as usize];
            loop {
                let m_pos = p.here();
                let m = p.machine(machines)?;
                if seen[(m.0 - 1) as usize] {
                    return Err(LitmusError::Parse {
                        line: m_pos.0,
                        col: m_pos.1,
                        message: format!("machine {m} listed twice in the crash budget"),
                    });
                }
                seen[(m.0 - 1) as usize] = true;
                p.expect(Tok::Colon)?;
                p.keyword("max")?;
                let max_pos = p.here();
                let max = p.int("a crash count")?;
                if max < 0 {
                    return Err(LitmusError::Parse {
                        line: max_pos.0,
                        col: max_pos.1,
                        message: format!("crash count must not be negative, got {max}"),
                    });
                }
                per_machine[(m.0 - 1) as usize] = max as u32;
                if p.peek() == Some(&Tok::Comma) {
                    p.expect(Tok::Comma)?;
                } else {
                    break;
                }
            }
            p.expect(Tok::RBrace)?;
            program.crash_budget = CrashBudget {
                per_machine,
                total: None,
            };
        }
        LitmusBody::Program(program)
    } else {
        return p.fail("expected `trace` or `thread`");
    };

    p.keyword("expect")?;
    let expect_pos = p.here();
    let expect = match p.ident("an expectation")?.as_str() {
        "allowed" => Expectation::Allowed,
        "forbidden" => Expectation::Forbidden,
        "assert-may-fail" => Expectation::AssertMayFail,
        "assert-never-fails" => Expectation::AssertNeverFails,
        other => {
            return Err(LitmusError::Parse {
                line: expect_pos.0,
                col: expect_pos.1,
                message: format!(
                    "expected `allowed`, `forbidden`, `assert-may-fail` or \
                     `assert-never-fails`, found `{other}`"
                ),
            })
        }
    };
    let trace_body = matches!(body, LitmusBody::Trace(_));
    if expect.is_trace() != trace_body {
        let (mode, wanted) = if trace_body {
            ("trace", "`allowed` or `forbidden`")
        } else {
            ("program", "`assert-may-fail` or `assert-never-fails`")
        };
        return Err(LitmusError::Parse {
            line: expect_pos.0,
            col: expect_pos.1,
            message: format!("a {mode} body takes {wanted}, not `{expect}`"),
        });
    }
    if p.peek().is_some() {
        return p.fail("expected end of input after the expectation");
    }

    let test = LitmusTest { name, body, expect };
    match &test.body {
        LitmusBody::Trace(t) => t.validate()?,
        LitmusBody::Program(pr) => pr.validate()?,
    }
    Ok(test)
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

fn print_operand(src: Operand, regs: &[String]) -> Result<String, LitmusError> {
    Ok(match src {
        Operand::Imm(v) => v.to_string(),
        Operand::Reg(r) => regs
            .get(r as usize)
            .ok_or_else(|| LitmusError::Unprintable(format!("register index {r} unnamed")))?
            .clone(),
    })
}

fn print_op(instr: &Instr, topo: &Topology, regs: &[String]) -> Result<String, LitmusError> {
    Ok(match instr {
        Instr::Store { class, loc, src } => format!(
            "{}Store {} {}",
            class.letter(),
            topo.loc_name(*loc),
            print_operand(*src, regs)?
        ),
        Instr::LoadExpect { loc, expect } => format!("Load {} = {expect}", topo.loc_name(*loc)),
        Instr::LoadReg { dest, loc } => format!(
            "{} = Load {}",
            print_operand(Operand::Reg(*dest), regs)?,
            topo.loc_name(*loc)
        ),
        Instr::Flush { class, loc } => format!("{}Flush {}", class.letter(), topo.loc_name(*loc)),
        Instr::Gpf => "GPF".into(),
        Instr::Rmw {
            class,
            loc,
            func: RmwFunc::Add(n),
        } => format!("{}Faa {} {n}", class.letter(), topo.loc_name(*loc)),
        Instr::Rmw { func, .. } => {
            return Err(LitmusError::Unprintable(format!(
                "read-modify-write `{func}` has no litmus syntax"
            )))
        }
        Instr::FlushIfPositive { .. } | Instr::Fence => {
            return Err(LitmusError::Unprintable(
                "conditional flushes and fences have no litmus syntax".into(),
            ))
        }
    })
}

/// Render a test in the canonical `.lit` layout. Parsing the output yields
/// the test back. Fails on constructs the format cannot express (recovery
/// bodies, full-crash budgets, operation spans, compare-and-set).
pub fn print_litmus(test: &LitmusTest) -> Result<String, LitmusError> {
    let topo = test.topology();
    let mut out = String::new();
    out.push_str(&format!("test \"{}\"\n", test.name));
    out.push_str(&format!("machines {}\n", topo.machine_count()));
    for l in topo.loc_ids() {
        let owner = topo.owner(l);
        out.push_str(&format!("loc {} @ {}", topo.loc_name(l), owner));
        if topo.volatility(owner) == Volatility::Volatile {
            out.push_str(" volatile");
        }
        out.push('\n');
    }
    for m in topo.machine_ids() {
        if topo.volatility(m) == Volatility::Volatile
            && !topo.loc_ids().any(|l| topo.owner(l) == m)
        {
            return Err(LitmusError::Unprintable(format!(
                "machine {m} is volatile but owns no location to carry the annotation"
            )));
        }
    }
    if topo.domain() != Topology::default_domain() {
        let vals: Vec<String> = topo.domain().iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("domain {{ {} }}\n", vals.join(", ")));
    }
    match &test.body {
        LitmusBody::Trace(t) => {
            let mut parts = Vec::new();
            for ev in &t.events {
                parts.push(match ev {
                    TraceEvent::Crash { machine } => format!("crash {machine}"),
                    TraceEvent::Op { machine, instr } => format!(
                        "{machine}: {}",
                        print_op(instr, topo, &t.reg_names[(machine.0 - 1) as usize])?
                    ),
                });
            }
            if parts.is_empty() {
                out.push_str("trace { }\n");
            } else {
                out.push_str(&format!("trace {{ {} }}\n", parts.join(" ; ")));
            }
        }
        LitmusBody::Program(p) => {
            if !p.recovery.is_empty() || p.full_crash_budget > 0 {
                return Err(LitmusError::Unprintable(
                    "recovery bodies and full-crash budgets have no litmus syntax".into(),
                ));
            }
            if p.crash_budget.total.is_some() {
                return Err(LitmusError::Unprintable(
                    "a shared crash-total cap has no litmus syntax".into(),
                ));
            }
            for t in &p.threads {
                if !t.spans.is_empty() {
                    return Err(LitmusError::Unprintable(
                        "operation spans have no litmus syntax".into(),
                    ));
                }
                let mut parts = Vec::new();
                for instr in &t.instrs {
                    parts.push(print_op(instr, topo, &t.reg_names)?);
                }
                for a in &t.asserts {
                    let op = match a.op {
                        CmpOp::Eq => "==",
                        CmpOp::Ne => "!=",
                    };
                    parts.push(format!(
                        "assert {} {op} {}",
                        print_operand(Operand::Reg(a.lhs), &t.reg_names)?,
                        print_operand(a.rhs, &t.reg_names)?
                    ));
                }
                out.push_str(&format!(
                    "thread {} on {} {{ {} }}\n",
                    t.display_id,
                    t.machine,
                    parts.join(" ; ")
                ));
            }
            let budget: Vec<String> = p
                .crash_budget
                .per_machine
                .iter()
                .enumerate()
                .filter(|(_, &max)| max > 0)
                .map(|(i, max)| format!("{}: max {max}", i + 1))
                .collect();
            if !budget.is_empty() {
                out.push_str(&format!("crashes {{ {} }}\n", budget.join(", ")));
            }
        }
    }
    out.push_str(&format!("expect {}\n", test.expect));
    Ok(out)
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Result of running one litmus test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub expectation: Expectation,
    /// What the exhaustive run actually established.
    pub computed: Expectation,
    pub pass: bool,
    pub details: String,
    /// Witness schedule: the realizing execution (trace mode) or an
    /// assertion-failing execution (program mode), when one exists.
    pub witness: Option<Vec<String>>,
    pub states_visited: u64,
}

/// Run a litmus test exhaustively and compare against its expectation.
pub fn run_litmus(test: &LitmusTest) -> Result<Verdict, LitmusError> {
    run_litmus_custom(test, None)
}

/// [`run_litmus`] with an optional replacement transition function, used to
/// demonstrate that broken semantics flip verdicts.
pub fn run_litmus_custom(
    test: &LitmusTest,
    step: Option<&crate::semantics::StepFn>,
) -> Result<Verdict, LitmusError> {
    let budget = explorer::state_budget()?;
    let (computed, details, witness, states) = match &test.body {
        LitmusBody::Trace(trace) => {
            let res = explorer::feasible_trace_custom(trace, budget, step)?;
            if res.feasible {
                let w = res
                    .witness
                    .expect("feasible traces carry a witness")
                    .iter()
                    .map(|l| l.render(&trace.topology))
                    .collect::<Vec<_>>();
                (
                    Expectation::Allowed,
                    format!("an execution realizes the trace in {} labels", w.len()),
                    Some(w),
                    res.stats.states_visited,
                )
            } else {
                (
                    Expectation::Forbidden,
                    format!(
                        "no execution realizes the trace ({} states examined)",
                        res.stats.states_visited
                    ),
                    None,
                    res.stats.states_visited,
                )
            }
        }
        LitmusBody::Program(program) => {
            let res = explorer::explore_custom(program, budget, step)?;
            if res.outcomes.assertion_can_fail {
                let w = res
                    .outcomes
                    .assertion_failure_witness
                    .clone()
                    .expect("failing assertions carry a witness");
                (
                    Expectation::AssertMayFail,
                    format!("an execution fails an assertion after {} labels", w.len()),
                    Some(w),
                    res.stats.states_visited,
                )
            } else {
                (
                    Expectation::AssertNeverFails,
                    format!(
                        "assertions hold in all {} terminal results ({} states examined)",
                        res.stats.terminal_states, res.stats.states_visited
                    ),
                    None,
                    res.stats.states_visited,
                )
            }
        }
    };
    Ok(Verdict {
        name: test.name.clone(),
        expectation: test.expect,
        computed,
        pass: computed == test.expect,
        details,
        witness,
        states_visited: states,
    })
}

/// Render verdicts as a fixed-width table, a `N passed, M failed` summary,
/// and one machine-readable JSON line.
pub fn format_report(verdicts: &[Verdict]) -> String {
    let mut out = String::new();
    let name_w = verdicts
        .iter()
        .map(|v| v.name.len())
        .chain([4])
        .max()
        .expect("nonempty iterator");
    out.push_str(&format!(
        "{:<name_w$}  {:<19}  {:<19}  result\n",
        "name", "expected", "computed"
    ));
    for v in verdicts {
        out.push_str(&format!(
            "{:<name_w$}  {:<19}  {:<19}  {}\n",
            v.name,
            v.expectation.to_string(),
            v.computed.to_string(),
            if v.pass { "pass" } else { "FAIL" }
        ));
        if !v.pass {
            out.push_str(&format!("  details: {}\n", v.details));
            if let Some(w) = &v.witness {
                out.push_str(&format!("  witness: {}\n", w.join(" ; ")));
            }
        }
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    let failed = verdicts.len() - passed;
    out.push_str(&format!("{passed} passed, {failed} failed\n"));
    let json = serde_json::json!({
        "passed": passed,
        "failed": failed,
        "verdicts": verdicts,
    });
    out.push_str(&format!("JSON: {json}\n"));
    out
}
