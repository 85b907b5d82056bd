//! OpenQASM 2.0 reader and writer for the supported `qelib1` subset.
//!
//! All `qreg` declarations are concatenated into one qubit index space in
//! declaration order, and likewise for `creg`. `barrier` statements are
//! accepted and dropped. Gate definitions, `opaque`, `reset` and `if` are
//! rejected.

use std::fmt::Write as _;

use crate::circuit::{Circuit, CircuitError};
use crate::gate::{Gate, GateOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct QasmError {
    pub line: usize,
    pub col: usize,
    pub kind: QasmErrorKind,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QasmErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unsupported gate `{0}`")]
    UnsupportedGate(String),
    #[error("unsupported statement `{0}`")]
    UnsupportedStatement(String),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("index {index} out of range for register `{reg}` of size {size}")]
    IndexOutOfRange { reg: String, index: usize, size: usize },
    #[error("parameter expression is not finite")]
    NonFiniteParameter,
    #[error("register `{0}` declared twice")]
    DuplicateRegister(String),
    #[error("{0}")]
    Circuit(#[from] CircuitError),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Sym(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, QasmError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| QasmError {
        line,
        col,
        kind: QasmErrorKind::Syntax(msg),
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            col += 2;
            while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                if chars[i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                i += 1;
            }
            if i >= chars.len() {
                return Err(err(tl, tc, "unterminated comment".into()));
            }
            i += 2;
            col += 2;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let s: String = chars[start..i].iter().collect();
            col += i - start;
            let v: f64 = s
                .parse()
                .map_err(|_| err(tl, tc, format!("malformed number `{s}`")))?;
            out.push(Token {
                tok: Tok::Number(v),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '"' {
            let start = i + 1;
            i += 1;
            while i < chars.len() && chars[i] != '"' && chars[i] != '\n' {
                i += 1;
            }
            if i >= chars.len() || chars[i] != '"' {
                return Err(err(tl, tc, "unterminated string".into()));
            }
            let s: String = chars[start..i].iter().collect();
            i += 1;
            col += s.chars().count() + 2;
            out.push(Token {
                tok: Tok::Str(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'>') {
            i += 2;
            col += 2;
            out.push(Token {
                tok: Tok::Arrow,
                line: tl,
                col: tc,
            });
            continue;
        }
        if "[](),;+-*/^{}".contains(c) {
            i += 1;
            col += 1;
            out.push(Token {
                tok: Tok::Sym(c),
                line: tl,
                col: tc,
            });
            continue;
        }
        return Err(err(tl, tc, format!("unexpected character `{c}`")));
    }
    Ok(out)
}

struct Register {
    name: String,
    offset: usize,
    size: usize,
}

/// A gate operand: one element or a whole register (broadcast).
enum Operand {
    Bit(usize),
    Reg { offset: usize, size: usize },
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    qregs: Vec<Register>,
    cregs: Vec<Register>,
    eof: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.line, t.col))
            .unwrap_or(self.eof)
    }

    fn error(&self, kind: QasmErrorKind) -> QasmError {
        let (line, col) = self.here();
        QasmError { line, col, kind }
    }

    fn syntax(&self, msg: impl Into<String>) -> QasmError {
        self.error(QasmErrorKind::Syntax(msg.into()))
    }

    fn next(&mut self) -> Result<Tok, QasmError> {
        let t = self
            .toks
            .get(self.pos)
            .map(|t| t.tok.clone())
            .ok_or_else(|| self.syntax("unexpected end of input"))?;
        self.pos += 1;
        Ok(t)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), QasmError> {
        match self.peek() {
            Some(Tok::Sym(s)) if *s == c => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("expected `{c}`"))),
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(s)) if *s == c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, QasmError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.syntax("expected identifier")),
        }
    }

    fn integer(&mut self) -> Result<usize, QasmError> {
        match self.peek() {
            Some(Tok::Number(v)) if v.fract() == 0.0 && *v >= 0.0 => {
                let v = *v as usize;
                self.pos += 1;
                Ok(v)
            }
            _ => Err(self.syntax("expected non-negative integer")),
        }
    }

    fn declare(&mut self, quantum: bool) -> Result<(), QasmError> {
        let name = self.ident()?;
        self.expect_sym('[')?;
        let size = self.integer()?;
        self.expect_sym(']')?;
        self.expect_sym(';')?;
        let regs = if quantum { &self.qregs } else { &self.cregs };
        if self.qregs.iter().chain(&self.cregs).any(|r| r.name == name) {
            return Err(self.error(QasmErrorKind::DuplicateRegister(name)));
        }
        let offset = regs.iter().map(|r| r.size).sum();
        let reg = Register { name, offset, size };
        if quantum {
            self.qregs.push(reg);
        } else {
            self.cregs.push(reg);
        }
        Ok(())
    }

    fn operand(&mut self, quantum: bool) -> Result<Operand, QasmError> {
        let at = self.here();
        let name = self.ident()?;
        let regs = if quantum { &self.qregs } else { &self.cregs };
        let (offset, size) = match regs.iter().find(|r| r.name == name) {
            Some(r) => (r.offset, r.size),
            None => {
                return Err(QasmError {
                    line: at.0,
                    col: at.1,
                    kind: QasmErrorKind::UnknownRegister(name),
                })
            }
        };
        if self.eat_sym('[') {
            let index = self.integer()?;
            self.expect_sym(']')?;
            if index >= size {
                return Err(QasmError {
                    line: at.0,
                    col: at.1,
                    kind: QasmErrorKind::IndexOutOfRange {
                        reg: name,
                        index,
                        size,
                    },
                });
            }
            Ok(Operand::Bit(offset + index))
        } else {
            Ok(Operand::Reg { offset, size })
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut v = self.term()?;
        loop {
            if self.eat_sym('+') {
                v += self.term()?;
            } else if self.eat_sym('-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, QasmError> {
        let mut v = self.unary()?;
        loop {
            if self.eat_sym('*') {
                v *= self.unary()?;
            } else if self.eat_sym('/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, QasmError> {
        if self.eat_sym('-') {
            return Ok(-self.unary()?);
        }
        if self.eat_sym('+') {
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<f64, QasmError> {
        match self.next()? {
            Tok::Number(v) => Ok(v),
            Tok::Ident(s) if s == "pi" => Ok(std::f64::consts::PI),
            Tok::Sym('(') => {
                let v = self.expr()?;
                self.expect_sym(')')?;
                Ok(v)
            }
            _ => {
                self.pos -= 1;
                Err(self.syntax("expected number, `pi` or `(`"))
            }
        }
    }

    fn statement(&mut self, c: &mut Circuit) -> Result<(), QasmError> {
        let at = self.here();
        let kw = self.ident()?;
        match kw.as_str() {
            "OPENQASM" => {
                match self.next()? {
                    Tok::Number(2.0) => {}
                    _ => return Err(self.syntax("only OPENQASM 2.0 is supported")),
                }
                self.expect_sym(';')
            }
            "include" => {
                match self.next()? {
                    Tok::Str(_) => {}
                    _ => return Err(self.syntax("expected file name")),
                }
                self.expect_sym(';')
            }
            "qreg" => {
                self.declare(true)?;
                let n = self.qregs.iter().map(|r| r.size).sum();
                let (_, ops, ms) = std::mem::take(c).into_parts();
                *c = Circuit::from_parts_unchecked(n, ops, ms);
                Ok(())
            }
            "creg" => self.declare(false),
            "barrier" => {
                while !matches!(self.peek(), Some(Tok::Sym(';')) | None) {
                    self.pos += 1;
                }
                self.expect_sym(';')
            }
            "measure" => {
                let q = self.operand(true)?;
                match self.next()? {
                    Tok::Arrow => {}
                    _ => return Err(self.syntax("expected `->`")),
                }
                let b = self.operand(false)?;
                self.expect_sym(';')?;
                let pairs: Vec<(usize, usize)> = match (q, b) {
                    (Operand::Bit(q), Operand::Bit(b)) => vec![(q, b)],
                    (
                        Operand::Reg { offset, size },
                        Operand::Reg {
                            offset: boff,
                            size: bsize,
                        },
                    ) if size == bsize => (0..size).map(|i| (offset + i, boff + i)).collect(),
                    _ => {
                        return Err(QasmError {
                            line: at.0,
                            col: at.1,
                            kind: QasmErrorKind::Syntax("mismatched measure operands".into()),
                        })
                    }
                };
                for (q, b) in pairs {
                    c.measure(q, b).map_err(|e| QasmError {
                        line: at.0,
                        col: at.1,
                        kind: e.into(),
                    })?;
                }
                Ok(())
            }
            "gate" | "opaque" | "reset" | "if" | "U" | "CX" => Err(QasmError {
                line: at.0,
                col: at.1,
                kind: QasmErrorKind::UnsupportedStatement(kw),
            }),
            name => {
                let gate: Gate = name.parse().map_err(|_| QasmError {
                    line: at.0,
                    col: at.1,
                    kind: QasmErrorKind::UnsupportedGate(name.to_string()),
                })?;
                let mut params = Vec::new();
                if self.eat_sym('(') && !self.eat_sym(')') {
                    loop {
                        let pat = self.here();
                        let v = self.expr()?;
                        if !v.is_finite() {
                            return Err(QasmError {
                                line: pat.0,
                                col: pat.1,
                                kind: QasmErrorKind::NonFiniteParameter,
                            });
                        }
                        params.push(v);
                        if self.eat_sym(')') {
                            break;
                        }
                        self.expect_sym(',')?;
                    }
                }
                let mut args = vec![self.operand(true)?];
                while self.eat_sym(',') {
                    args.push(self.operand(true)?);
                }
                self.expect_sym(';')?;
                // Broadcast whole-register operands; all must agree in size.
                let width = args
                    .iter()
                    .filter_map(|a| match a {
                        Operand::Reg { size, .. } => Some(*size),
                        Operand::Bit(_) => None,
                    })
                    .try_fold(None, |acc: Option<usize>, s| match acc {
                        Some(w) if w != s => Err(()),
                        _ => Ok(Some(s)),
                    })
                    .map_err(|_| QasmError {
                        line: at.0,
                        col: at.1,
                        kind: QasmErrorKind::Syntax("register sizes differ".into()),
                    })?;
                let reps = width.unwrap_or(1);
                for i in 0..reps {
                    let qubits: Vec<usize> = args
                        .iter()
                        .map(|a| match a {
                            Operand::Bit(q) => *q,
                            Operand::Reg { offset, .. } => offset + i,
                        })
                        .collect();
                    let op = GateOp::new(gate, &params, &qubits).map_err(|e| QasmError {
                        line: at.0,
                        col: at.1,
                        kind: QasmErrorKind::Circuit(e.into()),
                    })?;
                    c.push(op).map_err(|e| QasmError {
                        line: at.0,
                        col: at.1,
                        kind: e.into(),
                    })?;
                }
                Ok(())
            }
        }
    }
}

/// Parses OpenQASM 2.0 source into a [`Circuit`].
pub fn parse_qasm(text: &str) -> Result<Circuit, QasmError> {
    let toks = lex(text)?;
    let lines = text.lines().count().max(1);
    let mut p = Parser {
        toks,
        pos: 0,
        qregs: Vec::new(),
        cregs: Vec::new(),
        eof: (lines, 1),
    };
    let mut c = Circuit::new(0);
    while p.pos < p.toks.len() {
        p.statement(&mut c)?;
    }
    Ok(c)
}

/// Writes a circuit as OpenQASM 2.0 with a single `q` and `c` register.
///
/// Parameters use the shortest decimal form that parses back to the same
/// `f64`, so `parse_qasm(serialize_qasm(c)) == c`.
pub fn serialize_qasm(c: &Circuit) -> String {
    let mut s = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(s, "qreg q[{}];", c.num_qubits());
    if let Some(nc) = c.measurements().iter().map(|m| m.clbit + 1).max() {
        let _ = writeln!(s, "creg c[{nc}];");
    }
    for op in c.ops() {
        let _ = writeln!(s, "{op};");
    }
    for m in c.measurements() {
        let _ = writeln!(s, "measure q[{}] -> c[{}];", m.qubit, m.clbit);
    }
    s
}
