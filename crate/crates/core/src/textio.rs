//! Text formats for mappings, instances and queries, plus JSON answer output.
//!
//! ```text
//! # mapping
//! source R/2.
//! target E/2, F/2.
//! tgd R(x,y) -> exists z: E(x,z), F(z,y).
//! egd E(x,y), E(x,y2) -> y = y2.
//! constraint forall x: P(x) -> exists[2,3] z: E(x,z).
//!
//! # instance
//! E(a,_n1). F(_n1,b).
//!
//! # query
//! q(x,y) := forall z: Rp(x,y) /\ (Rp(x,z) -> z = y).
//! ```
//!
//! In dependencies bare identifiers are variables and quoted ones constants.
//! In queries and constraints an identifier that is neither quantified nor a
//! head variable is a constant. Nulls (`_name`) occur only in instances.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::logic::{FOQuery, Formula, TupleSet};
use crate::model::{sym, Atom, Egd, Instance, PAtom, Schema, SchemaMapping, StTgd, Sym, Term, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextErrorKind {
    SyntaxError,
    ArityMismatch,
    SchemaViolation,
    UnknownRelation,
    UnboundVariable,
}

impl fmt::Display for TextErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextErrorKind::SyntaxError => "syntax error",
            TextErrorKind::ArityMismatch => "arity mismatch",
            TextErrorKind::SchemaViolation => "schema violation",
            TextErrorKind::UnknownRelation => "unknown relation",
            TextErrorKind::UnboundVariable => "unbound variable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct TextError {
    pub kind: TextErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub file: Option<String>,
}

impl fmt::Display for TextError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}:")?;
        }
        write!(f, "{}:{}: {}: {}", self.line, self.col, self.kind, self.message)
    }
}

impl TextError {
    pub fn in_file(mut self, name: &str) -> TextError {
        self.file = Some(name.to_string());
        self
    }
}

/// Raw text with a name for diagnostics.
#[derive(Debug, Clone)]
pub struct SourceText {
    pub name: String,
    pub text: String,
}

impl SourceText {
    pub fn new(name: &str, text: &str) -> SourceText {
        SourceText { name: name.to_string(), text: text.to_string() }
    }

    pub fn read(path: &std::path::Path) -> std::io::Result<SourceText> {
        Ok(SourceText { name: path.display().to_string(), text: std::fs::read_to_string(path)? })
    }

    /// The source line an error points at, with a caret under the column.
    pub fn excerpt(&self, e: &TextError) -> Option<String> {
        let line = self.text.lines().nth(e.line.checked_sub(1)?)?;
        Some(format!("{line}\n{}^", " ".repeat(e.col.saturating_sub(1))))
    }
}

type TResult<T> = std::result::Result<T, TextError>;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Quoted(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    Define,
    Slash,
    And,
    Or,
    Not,
    Arrow,
    Eq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Quoted(s) => write!(f, "\"{s}\""),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Define => f.write_str("`:=`"),
            Tok::Slash => f.write_str("`/`"),
            Tok::And => f.write_str("`/\\`"),
            Tok::Or => f.write_str("`\\/`"),
            Tok::Not => f.write_str("`~`"),
            Tok::Arrow => f.write_str("`->`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(kind: TextErrorKind, line: usize, col: usize, message: impl Into<String>) -> TextError {
    TextError { kind, line, col, message: message.into(), file: None }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '\''
}

fn lex(text: &str) -> TResult<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let bump = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                bump(1, &mut i, &mut col);
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            _ => {}
        }
        let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
        let tok = match two.as_str() {
            ":=" => Some((Tok::Define, 2)),
            "/\\" => Some((Tok::And, 2)),
            "\\/" => Some((Tok::Or, 2)),
            "->" => Some((Tok::Arrow, 2)),
            _ => None,
        };
        if let Some((tok, n)) = tok {
            out.push(Spanned { tok, line: l0, col: c0 });
            bump(n, &mut i, &mut col);
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            ':' => Some(Tok::Colon),
            '/' => Some(Tok::Slash),
            '~' | '¬' => Some(Tok::Not),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned { tok, line: l0, col: c0 });
            bump(1, &mut i, &mut col);
            continue;
        }
        if c == '"' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < chars.len() && chars[j] != '"' && chars[j] != '\n' {
                s.push(chars[j]);
                j += 1;
            }
            if j >= chars.len() || chars[j] != '"' {
                return Err(err(TextErrorKind::SyntaxError, l0, c0, "unterminated quoted constant"));
            }
            out.push(Spanned { tok: Tok::Quoted(s), line: l0, col: c0 });
            let n = j + 1 - i;
            bump(n, &mut i, &mut col);
            continue;
        }
        if is_ident_char(c) && c != '\'' {
            let mut j = i;
            while j < chars.len() && is_ident_char(chars[j]) {
                j += 1;
            }
            out.push(Spanned { tok: Tok::Ident(chars[i..j].iter().collect()), line: l0, col: c0 });
            let n = j - i;
            bump(n, &mut i, &mut col);
            continue;
        }
        return Err(err(TextErrorKind::SyntaxError, l0, c0, format!("unexpected character `{c}`")));
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn new(text: &str) -> TResult<Parser> {
        Ok(Parser { toks: lex(text)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, kind: TextErrorKind, msg: impl Into<String>) -> TResult<T> {
        let (l, c) = self.here();
        Err(err(kind, l, c, msg))
    }

    fn expect(&mut self, tok: Tok) -> TResult<()> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            self.fail(TextErrorKind::SyntaxError, format!("expected {tok}, found {}", self.peek()))
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> TResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            t => self.fail(TextErrorKind::SyntaxError, format!("expected identifier, found {t}")),
        }
    }

    fn number(&mut self) -> TResult<usize> {
        let (l, c) = self.here();
        let s = self.ident()?;
        s.parse().map_err(|_| err(TextErrorKind::SyntaxError, l, c, format!("expected a number, found `{s}`")))
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }
}

fn check_arity(schema: &Schema, rel: &str, n: usize, line: usize, col: usize) -> TResult<()> {
    match schema.arity(rel) {
        None => Err(err(TextErrorKind::UnknownRelation, line, col, format!("relation `{rel}` is not declared"))),
        Some(k) if k != n => {
            Err(err(TextErrorKind::ArityMismatch, line, col, format!("`{rel}` has arity {k}, used with {n} arguments")))
        }
        Some(_) => Ok(()),
    }
}

// ---------- mappings ----------

struct RawAtom {
    atom: PAtom,
    line: usize,
    col: usize,
}

fn dependency_term(p: &mut Parser) -> TResult<Term> {
    match p.peek().clone() {
        Tok::Quoted(s) => {
            p.next();
            Ok(Term::Val(Value::Const(sym(&s))))
        }
        Tok::Ident(s) if s.starts_with('_') => p.fail(TextErrorKind::SyntaxError, "nulls are not allowed in mappings"),
        Tok::Ident(s) => {
            p.next();
            Ok(Term::Var(sym(&s)))
        }
        t => p.fail(TextErrorKind::SyntaxError, format!("expected a term, found {t}")),
    }
}

fn dependency_atom(p: &mut Parser) -> TResult<RawAtom> {
    let (line, col) = p.here();
    let rel = p.ident()?;
    p.expect(Tok::LParen)?;
    let mut args = vec![dependency_term(p)?];
    while p.eat(&Tok::Comma) {
        args.push(dependency_term(p)?);
    }
    p.expect(Tok::RParen)?;
    Ok(RawAtom { atom: PAtom { rel: sym(&rel), args }, line, col })
}

fn conjunction(p: &mut Parser) -> TResult<Vec<RawAtom>> {
    let mut out = vec![dependency_atom(p)?];
    while p.eat(&Tok::Comma) || p.eat(&Tok::And) {
        out.push(dependency_atom(p)?);
    }
    Ok(out)
}

fn side_check(
    atoms: &[RawAtom],
    own: &Schema,
    other: &Schema,
    side: &str,
) -> TResult<()> {
    for a in atoms {
        if !own.contains(&a.atom.rel) && other.contains(&a.atom.rel) {
            return Err(err(
                TextErrorKind::SchemaViolation,
                a.line,
                a.col,
                format!("`{}` is not a {side} relation", a.atom.rel),
            ));
        }
        check_arity(own, &a.atom.rel, a.atom.args.len(), a.line, a.col)?;
    }
    Ok(())
}

fn declarations(p: &mut Parser, schema: &mut Schema, other: &Schema) -> TResult<()> {
    loop {
        let (l, c) = p.here();
        let name = p.ident()?;
        if name.starts_with('_') {
            return Err(err(TextErrorKind::SyntaxError, l, c, "relation names may not start with `_`"));
        }
        p.expect(Tok::Slash)?;
        let (nl, nc) = p.here();
        let n = p.number()?;
        if n == 0 {
            return Err(err(TextErrorKind::SyntaxError, nl, nc, "arity must be positive"));
        }
        if other.contains(&name) {
            return Err(err(TextErrorKind::SchemaViolation, l, c, format!("`{name}` is declared in both schemas")));
        }
        if schema.relations.insert(sym(&name), n).is_some_and(|old| old != n) {
            return Err(err(TextErrorKind::ArityMismatch, l, c, format!("`{name}` redeclared with arity {n}")));
        }
        if !p.eat(&Tok::Comma) {
            break;
        }
    }
    p.expect(Tok::Dot)
}

/// Parses a mapping file.
pub fn parse_mapping(text: &str) -> TResult<SchemaMapping> {
    let mut p = Parser::new(text)?;
    let mut m = SchemaMapping::default();
    while *p.peek() != Tok::Eof {
        let (l, c) = p.here();
        let kw = p.ident()?;
        match kw.as_str() {
            "source" => {
                let target = m.target.clone();
                declarations(&mut p, &mut m.source, &target)?;
            }
            "target" => {
                let source = m.source.clone();
                declarations(&mut p, &mut m.target, &source)?;
            }
            "tgd" => m.st_tgds.push(tgd(&mut p, &m)?),
            "egd" => m.egds.push(egd(&mut p, &m)?),
            "constraint" => {
                let schema = m.source.union(&m.target);
                let f = formula_top(&mut p, &schema, &[])?;
                p.expect(Tok::Dot)?;
                m.constraints.push(f);
            }
            other => {
                return Err(err(
                    TextErrorKind::SyntaxError,
                    l,
                    c,
                    format!("expected `source`, `target`, `tgd`, `egd` or `constraint`, found `{other}`"),
                ))
            }
        }
    }
    Ok(m)
}

fn tgd(p: &mut Parser, m: &SchemaMapping) -> TResult<StTgd> {
    let body = conjunction(p)?;
    side_check(&body, &m.source, &m.target, "source")?;
    p.expect(Tok::Arrow)?;
    let mut exists: Vec<(Sym, usize, usize)> = Vec::new();
    if p.keyword("exists") {
        p.next();
        loop {
            let (l, c) = p.here();
            let v = p.ident()?;
            exists.push((sym(&v), l, c));
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
        p.expect(Tok::Colon)?;
    }
    let head = conjunction(p)?;
    side_check(&head, &m.target, &m.source, "target")?;
    p.expect(Tok::Dot)?;

    let body_vars: BTreeSet<Sym> = body.iter().flat_map(|a| a.atom.vars().cloned()).collect();
    for (v, l, c) in &exists {
        if body_vars.contains(v) {
            return Err(err(TextErrorKind::SchemaViolation, *l, *c, format!("existential `{v}` also occurs in the body")));
        }
        if !head.iter().any(|a| a.atom.vars().any(|w| w == v)) {
            return Err(err(TextErrorKind::SchemaViolation, *l, *c, format!("existential `{v}` does not occur in the head")));
        }
    }
    for a in &head {
        for v in a.atom.vars() {
            if !body_vars.contains(v) && !exists.iter().any(|(e, _, _)| e == v) {
                return Err(err(
                    TextErrorKind::SchemaViolation,
                    a.line,
                    a.col,
                    format!("head variable `{v}` is neither in the body nor existentially quantified"),
                ));
            }
        }
    }
    Ok(StTgd {
        body: body.into_iter().map(|a| a.atom).collect(),
        exists: exists.into_iter().map(|(v, _, _)| v).collect(),
        head: head.into_iter().map(|a| a.atom).collect(),
    })
}

fn egd(p: &mut Parser, m: &SchemaMapping) -> TResult<Egd> {
    let body = conjunction(p)?;
    side_check(&body, &m.target, &m.source, "target")?;
    p.expect(Tok::Arrow)?;
    let vars: BTreeSet<Sym> = body.iter().flat_map(|a| a.atom.vars().cloned()).collect();
    let side = |p: &mut Parser| -> TResult<Sym> {
        let (l, c) = p.here();
        let v = sym(&p.ident()?);
        if !vars.contains(&v) {
            return Err(err(TextErrorKind::UnboundVariable, l, c, format!("`{v}` does not occur in the egd body")));
        }
        Ok(v)
    };
    let left = side(p)?;
    p.expect(Tok::Eq)?;
    let right = side(p)?;
    p.expect(Tok::Dot)?;
    Ok(Egd { body: body.into_iter().map(|a| a.atom).collect(), left, right })
}

// ---------- formulas ----------

fn formula_top(p: &mut Parser, schema: &Schema, free: &[Sym]) -> TResult<Formula> {
    let mut bound: Vec<Sym> = free.to_vec();
    implication(p, schema, &mut bound)
}

fn quantifier(p: &mut Parser, schema: &Schema, bound: &mut Vec<Sym>) -> TResult<Option<Formula>> {
    if !(p.keyword("forall") || p.keyword("exists")) || *p.peek2() == Tok::LParen {
        return Ok(None);
    }
    let kw = p.ident()?;
    let mut count = None;
    if kw == "exists" && p.eat(&Tok::LBracket) {
        let (l, c) = p.here();
        let lo = p.number()?;
        p.expect(Tok::Comma)?;
        let hi = p.number()?;
        p.expect(Tok::RBracket)?;
        if lo > hi {
            return Err(err(TextErrorKind::SyntaxError, l, c, "empty counting range"));
        }
        count = Some((lo, hi));
    }
    let mut vars = Vec::new();
    loop {
        let (l, c) = p.here();
        let v = p.ident()?;
        if v.starts_with('_') {
            return Err(err(TextErrorKind::SyntaxError, l, c, "nulls are not allowed in formulas"));
        }
        vars.push(sym(&v));
        if count.is_some() || !p.eat(&Tok::Comma) {
            break;
        }
    }
    p.expect(Tok::Colon)?;
    let n = bound.len();
    bound.extend(vars.iter().cloned());
    let body = implication(p, schema, bound);
    bound.truncate(n);
    let body = Box::new(body?);
    Ok(Some(match (kw.as_str(), count) {
        ("exists", Some((lo, hi))) => Formula::Count { lo, hi, var: vars.remove(0), body },
        ("exists", None) => Formula::Exists(vars, body),
        _ => Formula::Forall(vars, body),
    }))
}

fn implication(p: &mut Parser, schema: &Schema, bound: &mut Vec<Sym>) -> TResult<Formula> {
    if let Some(q) = quantifier(p, schema, bound)? {
        return Ok(q);
    }
    let lhs = disjunction(p, schema, bound)?;
    if p.eat(&Tok::Arrow) {
        let rhs = implication(p, schema, bound)?;
        return Ok(Formula::implies(lhs, rhs));
    }
    Ok(lhs)
}

fn disjunction(p: &mut Parser, schema: &Schema, bound: &mut Vec<Sym>) -> TResult<Formula> {
    let mut parts = vec![conjunction_f(p, schema, bound)?];
    while p.eat(&Tok::Or) {
        parts.push(conjunction_f(p, schema, bound)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::Or(parts) })
}

fn conjunction_f(p: &mut Parser, schema: &Schema, bound: &mut Vec<Sym>) -> TResult<Formula> {
    let mut parts = vec![unary(p, schema, bound)?];
    while p.eat(&Tok::And) {
        parts.push(unary(p, schema, bound)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { Formula::And(parts) })
}

fn unary(p: &mut Parser, schema: &Schema, bound: &mut Vec<Sym>) -> TResult<Formula> {
    if p.eat(&Tok::Not) {
        return Ok(Formula::not(unary(p, schema, bound)?));
    }
    if let Some(q) = quantifier(p, schema, bound)? {
        return Ok(q);
    }
    if p.eat(&Tok::LParen) {
        let f = implication(p, schema, bound)?;
        p.expect(Tok::RParen)?;
        return Ok(f);
    }
    let (line, col) = p.here();
    if matches!(p.peek(), Tok::Ident(_)) && *p.peek2() == Tok::LParen {
        let rel = p.ident()?;
        p.next();
        let mut args = vec![formula_term(p, bound)?];
        while p.eat(&Tok::Comma) {
            args.push(formula_term(p, bound)?);
        }
        p.expect(Tok::RParen)?;
        check_arity(schema, &rel, args.len(), line, col)?;
        return Ok(Formula::atom(PAtom { rel: sym(&rel), args }));
    }
    let lhs = formula_term(p, bound)?;
    p.expect(Tok::Eq)?;
    let rhs = formula_term(p, bound)?;
    Ok(Formula::eq(lhs, rhs))
}

fn formula_term(p: &mut Parser, bound: &[Sym]) -> TResult<Term> {
    match p.peek().clone() {
        Tok::Quoted(s) => {
            p.next();
            Ok(Term::Val(Value::Const(sym(&s))))
        }
        Tok::Ident(s) if s.starts_with('_') => p.fail(TextErrorKind::SyntaxError, "nulls are not allowed in formulas"),
        Tok::Ident(s) => {
            p.next();
            let v = sym(&s);
            Ok(if bound.contains(&v) { Term::Var(v) } else { Term::Val(Value::Const(v)) })
        }
        t => p.fail(TextErrorKind::SyntaxError, format!("expected a term, found {t}")),
    }
}

fn query_at(p: &mut Parser, schema: &Schema) -> TResult<FOQuery> {
    let name = p.ident()?;
    p.expect(Tok::LParen)?;
    let mut free: Vec<(Sym, usize, usize)> = Vec::new();
    if *p.peek() != Tok::RParen {
        loop {
            let (l, c) = p.here();
            let v = p.ident()?;
            if v.starts_with('_') {
                return Err(err(TextErrorKind::SyntaxError, l, c, "nulls are not allowed in queries"));
            }
            if free.iter().any(|(w, _, _)| **w == *v) {
                return Err(err(TextErrorKind::SyntaxError, l, c, format!("head variable `{v}` repeated")));
            }
            free.push((sym(&v), l, c));
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
    }
    p.expect(Tok::RParen)?;
    p.expect(Tok::Define)?;
    let vars: Vec<Sym> = free.iter().map(|(v, _, _)| v.clone()).collect();
    let body = formula_top(p, schema, &vars)?;
    p.expect(Tok::Dot)?;
    let used = body.free_vars();
    for (v, l, c) in &free {
        if !used.contains(v) {
            return Err(err(TextErrorKind::UnboundVariable, *l, *c, format!("head variable `{v}` does not occur in the body")));
        }
    }
    Ok(FOQuery { name, free: vars, body })
}

/// Parses exactly one query.
pub fn parse_query(text: &str, schema: &Schema) -> TResult<FOQuery> {
    let mut p = Parser::new(text)?;
    let q = query_at(&mut p, schema)?;
    if *p.peek() != Tok::Eof {
        return p.fail(TextErrorKind::SyntaxError, format!("expected end of input, found {}", p.peek()));
    }
    Ok(q)
}

/// Parses a file holding one or more queries.
pub fn parse_queries(text: &str, schema: &Schema) -> TResult<Vec<FOQuery>> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while *p.peek() != Tok::Eof {
        out.push(query_at(&mut p, schema)?);
    }
    Ok(out)
}

// ---------- instances ----------

/// Parses facts. `_name` tokens are nulls; `_n<k>` keeps id k, other
/// names get ids above the largest explicit one in order of appearance.
pub fn parse_instance(text: &str, schema: &Schema) -> TResult<Instance> {
    enum Arg {
        Const(String),
        Null(String),
    }
    let mut p = Parser::new(text)?;
    let mut facts: Vec<(String, Vec<Arg>)> = Vec::new();
    while *p.peek() != Tok::Eof {
        let (line, col) = p.here();
        let rel = p.ident()?;
        p.expect(Tok::LParen)?;
        let mut args = Vec::new();
        loop {
            match p.peek().clone() {
                Tok::Quoted(s) => args.push(Arg::Const(s)),
                Tok::Ident(s) if s.starts_with('_') => args.push(Arg::Null(s)),
                Tok::Ident(s) => args.push(Arg::Const(s)),
                t => return p.fail(TextErrorKind::SyntaxError, format!("expected a value, found {t}")),
            }
            p.next();
            if !p.eat(&Tok::Comma) {
                break;
            }
        }
        p.expect(Tok::RParen)?;
        p.expect(Tok::Dot)?;
        check_arity(schema, &rel, args.len(), line, col)?;
        facts.push((rel, args));
    }
    let explicit = |s: &str| s.strip_prefix("_n").and_then(|d| d.parse::<u32>().ok());
    let mut next = facts
        .iter()
        .flat_map(|(_, a)| a.iter())
        .filter_map(|a| match a {
            Arg::Null(s) => explicit(s),
            Arg::Const(_) => None,
        })
        .max()
        .unwrap_or(0)
        + 1;
    let mut ids: BTreeMap<String, u32> = BTreeMap::new();
    let mut out = Instance::new();
    for (rel, args) in facts {
        let vals = args
            .into_iter()
            .map(|a| match a {
                Arg::Const(s) => Value::Const(sym(&s)),
                Arg::Null(s) => Value::Null(*ids.entry(s.clone()).or_insert_with(|| {
                    explicit(&s).unwrap_or_else(|| {
                        next += 1;
                        next - 1
                    })
                })),
            })
            .collect();
        out.insert(Atom { rel: sym(&rel), args: vals });
    }
    Ok(out)
}

// ---------- serialization ----------

fn schema_line(kw: &str, s: &Schema) -> String {
    let decls: Vec<String> = s.relations.iter().map(|(r, n)| format!("{r}/{n}")).collect();
    format!("{kw} {}.\n", decls.join(", "))
}

fn conj_string(atoms: &[PAtom]) -> String {
    atoms.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn mapping_to_string(m: &SchemaMapping) -> String {
    let mut out = String::new();
    if !m.source.relations.is_empty() {
        out += &schema_line("source", &m.source);
    }
    if !m.target.relations.is_empty() {
        out += &schema_line("target", &m.target);
    }
    for t in &m.st_tgds {
        out += &format!("tgd {} -> ", conj_string(&t.body));
        if !t.exists.is_empty() {
            out += &format!("exists {}: ", t.exists.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
        }
        out += &format!("{}.\n", conj_string(&t.head));
    }
    for e in &m.egds {
        out += &format!("egd {} -> {} = {}.\n", conj_string(&e.body), e.left, e.right);
    }
    for c in &m.constraints {
        out += &format!("constraint {c}.\n");
    }
    out
}

pub fn instance_to_string(i: &Instance) -> String {
    i.iter().map(|a| format!("{a}.\n")).collect()
}

pub fn query_to_string(q: &FOQuery) -> String {
    format!("{q}\n")
}

/// One query's answers in the machine-readable format.
#[derive(Serialize, Debug, Clone, PartialEq)]
pub struct AnswerDoc {
    pub query: String,
    pub semantics: String,
    pub answers: Vec<Vec<String>>,
    pub meta: serde_json::Value,
}

fn value_string(v: &Value) -> String {
    match v {
        Value::Const(c) => c.to_string(),
        Value::Null(_) => v.to_string(),
    }
}

impl AnswerDoc {
    pub fn new(query: &str, semantics: &str, answers: &TupleSet, meta: &serde_json::Value) -> AnswerDoc {
        AnswerDoc {
            query: query.to_string(),
            semantics: semantics.to_string(),
            answers: answers.iter().map(|t| t.iter().map(value_string).collect()).collect(),
            meta: meta.clone(),
        }
    }
}

/// The machine-readable answer document.
pub fn answers_json(query: &str, semantics: &str, answers: &TupleSet, meta: &serde_json::Value) -> String {
    serde_json::to_string_pretty(&AnswerDoc::new(query, semantics, answers, meta)).expect("answer document serializes") + "\n"
}
