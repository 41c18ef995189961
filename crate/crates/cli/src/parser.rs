//! Parser for the model file format.
//!
//! The format is declarative and token-based; `#` starts a comment that
//! runs to the end of the line. Identifiers beginning with an uppercase
//! letter are variables, everything else (including bare numbers) is a
//! constant.
//!
//! ```text
//! buffers goal, retrieval.
//! type order(first, second).
//! chunk 1.                                  # slotless nil-typed chunk
//! chunk a : order(first: 1, second: 2).
//! buffer goal = b0.                         # initial contents, delay 0
//! buffer goal = b0 @ 1/2.                   # explicit rational delay
//! facts p/1.                                # opaque fact signature
//! fact p(a).
//! rule count {
//!   goal: g(current: X); retrieval: order(first: X, second: Y)
//!   ==> modify goal g(current: Y); request retrieval order(first: Y)
//! }
//! ```
//!
//! Buffers without an initial assignment hold a shared nil chunk. The
//! type name `nil` and the chunk identifier `nil0` are reserved.

use std::collections::BTreeMap;

use actr_confluence_core::actr::{
    Action, ActionKind, ActrModel, ActrRule, ActrValue, BufferTest, Chunk, ValidationError,
};
use actr_confluence_core::term::Delay;
use actr_confluence_core::translate::{NIL_ID, NIL_TYPE};
use actr_confluence_core::ChunkType;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{0}")]
    Validation(#[from] ValidationError),
}

impl ParseError {
    fn at(tok: &Token, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: tok.line,
            col: tok.col,
            message: message.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Punct(char),
    Arrow, // ==>
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = source.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tline, tcol) = (line, col);
        let bump = |c: char, line: &mut usize, col: &mut usize| {
            if c == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        };
        match c {
            '#' => {
                while let Some(&c) = chars.peek() {
                    chars.next();
                    bump(c, &mut line, &mut col);
                    if c == '\n' {
                        break;
                    }
                }
            }
            c if c.is_whitespace() => {
                chars.next();
                bump(c, &mut line, &mut col);
            }
            c if c.is_ascii_alphanumeric() => {
                let mut ident = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        ident.push(c);
                        chars.next();
                        bump(c, &mut line, &mut col);
                    } else {
                        break;
                    }
                }
                out.push(Token {
                    tok: Tok::Ident(ident),
                    line: tline,
                    col: tcol,
                });
            }
            '=' => {
                chars.next();
                bump('=', &mut line, &mut col);
                if chars.peek() == Some(&'=') {
                    chars.next();
                    bump('=', &mut line, &mut col);
                    match chars.peek() {
                        Some('>') => {
                            chars.next();
                            bump('>', &mut line, &mut col);
                            out.push(Token {
                                tok: Tok::Arrow,
                                line: tline,
                                col: tcol,
                            });
                        }
                        _ => {
                            return Err(ParseError::Syntax {
                                line: tline,
                                col: tcol,
                                message: "expected ==> or =".into(),
                            })
                        }
                    }
                } else {
                    out.push(Token {
                        tok: Tok::Punct('='),
                        line: tline,
                        col: tcol,
                    });
                }
            }
            '.' | ',' | ':' | ';' | '(' | ')' | '{' | '}' | '@' | '/' => {
                chars.next();
                bump(c, &mut line, &mut col);
                out.push(Token {
                    tok: Tok::Punct(c),
                    line: tline,
                    col: tcol,
                });
            }
            other => {
                return Err(ParseError::Syntax {
                    line: tline,
                    col: tcol,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        let t = self.next();
        if t.tok == Tok::Punct(c) {
            Ok(())
        } else {
            Err(ParseError::at(&t, format!("expected {c:?}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, Token), ParseError> {
        let t = self.next();
        match &t.tok {
            Tok::Ident(s) => Ok((s.clone(), t.clone())),
            _ => Err(ParseError::at(&t, format!("expected {what}"))),
        }
    }

    fn constant(&mut self, what: &str) -> Result<String, ParseError> {
        let (s, t) = self.ident(what)?;
        if s.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            return Err(ParseError::at(
                &t,
                format!("expected {what}, found variable {s}"),
            ));
        }
        Ok(s)
    }

    fn value(&mut self) -> Result<ActrValue, ParseError> {
        let (s, _) = self.ident("a constant or variable")?;
        if s.chars().next().is_some_and(|c| c.is_ascii_uppercase()) {
            Ok(ActrValue::Var(s))
        } else {
            Ok(ActrValue::Const(s))
        }
    }

    /// `name: value` pairs between parentheses; parentheses may be absent
    /// for slotless forms.
    fn svp_list(&mut self) -> Result<Vec<(String, ActrValue)>, ParseError> {
        let mut out = Vec::new();
        if self.peek().tok != Tok::Punct('(') {
            return Ok(out);
        }
        self.expect_punct('(')?;
        if self.peek().tok == Tok::Punct(')') {
            self.next();
            return Ok(out);
        }
        loop {
            let slot = self.constant("a slot name")?;
            self.expect_punct(':')?;
            out.push((slot, self.value()?));
            match self.next() {
                t if t.tok == Tok::Punct(',') => continue,
                t if t.tok == Tok::Punct(')') => break,
                t => return Err(ParseError::at(&t, "expected , or )")),
            }
        }
        Ok(out)
    }

    fn rational(&mut self) -> Result<Delay, ParseError> {
        let (n, t) = self.ident("a number")?;
        let numer: u64 = n
            .parse()
            .map_err(|_| ParseError::at(&t, format!("{n} is not a non-negative integer")))?;
        if self.peek().tok == Tok::Punct('/') {
            self.next();
            let (d, t) = self.ident("a denominator")?;
            let denom: u64 = d
                .parse()
                .map_err(|_| ParseError::at(&t, format!("{d} is not a positive integer")))?;
            if denom == 0 {
                return Err(ParseError::at(&t, "zero denominator"));
            }
            Ok(Delay::new(numer, denom))
        } else {
            Ok(Delay::from_integer(numer))
        }
    }
}

/// Parses and validates a model file.
pub fn parse_model(source: &str) -> Result<ActrModel, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut model = ActrModel::new(Vec::<String>::new());
    let mut buffer_inits: BTreeMap<String, (String, Delay)> = BTreeMap::new();

    loop {
        let t = p.peek().clone();
        let keyword = match &t.tok {
            Tok::Eof => break,
            Tok::Ident(s) => s.clone(),
            _ => return Err(ParseError::at(&t, "expected a declaration")),
        };
        match keyword.as_str() {
            "buffers" => {
                p.next();
                loop {
                    let b = p.constant("a buffer name")?;
                    model.buffers.insert(b);
                    match p.next() {
                        t if t.tok == Tok::Punct(',') => continue,
                        t if t.tok == Tok::Punct('.') => break,
                        t => return Err(ParseError::at(&t, "expected , or .")),
                    }
                }
            }
            "type" => {
                p.next();
                let (name, tname) = p.ident("a type name")?;
                if name == NIL_TYPE {
                    return Err(ParseError::at(&tname, "the type name nil is reserved"));
                }
                let mut slots = std::collections::BTreeSet::new();
                if p.peek().tok == Tok::Punct('(') {
                    p.next();
                    if p.peek().tok != Tok::Punct(')') {
                        loop {
                            let (slot, stok) = p.ident("a slot name")?;
                            if !slots.insert(slot.clone()) {
                                return Err(ParseError::at(
                                    &stok,
                                    format!("slot {slot} declared twice"),
                                ));
                            }
                            match p.next() {
                                t if t.tok == Tok::Punct(',') => continue,
                                t if t.tok == Tok::Punct(')') => break,
                                t => return Err(ParseError::at(&t, "expected , or )")),
                            }
                        }
                    } else {
                        p.next();
                    }
                }
                p.expect_punct('.')?;
                if model.types.contains_key(&name) {
                    return Err(ParseError::at(&tname, format!("type {name} declared twice")));
                }
                model.types.insert(
                    name.clone(),
                    ChunkType {
                        name,
                        slots,
                    },
                );
            }
            "chunk" => {
                p.next();
                let (id, idtok) = p.ident("a chunk identifier")?;
                if id == NIL_ID {
                    return Err(ParseError::at(&idtok, "the chunk identifier nil0 is reserved"));
                }
                let (ctype, svp) = if p.peek().tok == Tok::Punct(':') {
                    p.next();
                    let ctype = p.constant("a type name")?;
                    let svp = p.svp_list()?;
                    (ctype, svp)
                } else {
                    (NIL_TYPE.to_string(), Vec::new())
                };
                p.expect_punct('.')?;
                let mut values = BTreeMap::new();
                for (slot, v) in svp {
                    let value = match v {
                        ActrValue::Const(c) => c,
                        ActrValue::Var(x) => {
                            return Err(ParseError::at(
                                &idtok,
                                format!("chunk {id}: slot {slot} has variable value {x}"),
                            ))
                        }
                    };
                    if values.insert(slot.clone(), value).is_some() {
                        return Err(ParseError::at(
                            &idtok,
                            format!("chunk {id}: slot {slot} given twice"),
                        ));
                    }
                }
                model
                    .initial
                    .store
                    .insert(Chunk { id, ctype, values })
                    .map_err(ParseError::Validation)?;
            }
            "buffer" => {
                p.next();
                let buffer = p.constant("a buffer name")?;
                p.expect_punct('=')?;
                let chunk = p.constant("a chunk identifier")?;
                let delay = if p.peek().tok == Tok::Punct('@') {
                    p.next();
                    p.rational()?
                } else {
                    Delay::zero()
                };
                p.expect_punct('.')?;
                buffer_inits.insert(buffer, (chunk, delay));
            }
            "facts" => {
                p.next();
                loop {
                    let functor = p.constant("a fact symbol")?;
                    p.expect_punct('/')?;
                    let (n, ntok) = p.ident("an arity")?;
                    let arity: usize = n
                        .parse()
                        .map_err(|_| ParseError::at(&ntok, format!("{n} is not an arity")))?;
                    model.fact_arities.insert(functor, arity);
                    match p.next() {
                        t if t.tok == Tok::Punct(',') => continue,
                        t if t.tok == Tok::Punct('.') => break,
                        t => return Err(ParseError::at(&t, "expected , or .")),
                    }
                }
            }
            "fact" => {
                p.next();
                let functor = p.constant("a fact symbol")?;
                let mut args = Vec::new();
                p.expect_punct('(')?;
                if p.peek().tok != Tok::Punct(')') {
                    loop {
                        args.push(p.constant("a constant")?);
                        match p.next() {
                            t if t.tok == Tok::Punct(',') => continue,
                            t if t.tok == Tok::Punct(')') => break,
                            t => return Err(ParseError::at(&t, "expected , or )")),
                        }
                    }
                } else {
                    p.next();
                }
                p.expect_punct('.')?;
                model
                    .initial
                    .upsilon
                    .push(actr_confluence_core::Fact { functor, args });
            }
            "rule" => {
                p.next();
                let name = p.constant("a rule name")?;
                p.expect_punct('{')?;
                let mut lhs = Vec::new();
                loop {
                    let buffer = p.constant("a buffer name")?;
                    p.expect_punct(':')?;
                    let ctype = p.constant("a type name")?;
                    let svp = p.svp_list()?;
                    lhs.push(BufferTest { buffer, ctype, svp });
                    match p.peek().tok.clone() {
                        Tok::Punct(';') => {
                            p.next();
                        }
                        Tok::Arrow => {
                            p.next();
                            break;
                        }
                        _ => {
                            let t = p.next();
                            return Err(ParseError::at(&t, "expected ; or ==>"));
                        }
                    }
                }
                let mut rhs = Vec::new();
                if p.peek().tok != Tok::Punct('}') {
                    loop {
                        let (kw, ktok) = p.ident("an action")?;
                        let action = match kw.as_str() {
                            "modify" | "request" => {
                                let kind = if kw == "modify" {
                                    ActionKind::Modify
                                } else {
                                    ActionKind::Request
                                };
                                let buffer = p.constant("a buffer name")?;
                                let ctype = p.constant("a type name")?;
                                let svp = p.svp_list()?;
                                Action {
                                    kind,
                                    buffer,
                                    ctype,
                                    svp,
                                }
                            }
                            "clear" => {
                                let buffer = p.constant("a buffer name")?;
                                Action {
                                    kind: ActionKind::Clear,
                                    buffer,
                                    ctype: NIL_TYPE.to_string(),
                                    svp: Vec::new(),
                                }
                            }
                            other => {
                                return Err(ParseError::at(
                                    &ktok,
                                    format!("expected modify, request or clear, found {other}"),
                                ))
                            }
                        };
                        rhs.push(action);
                        match p.peek().tok.clone() {
                            Tok::Punct(';') => {
                                p.next();
                            }
                            Tok::Punct('}') => break,
                            _ => {
                                let t = p.next();
                                return Err(ParseError::at(&t, "expected ; or }"));
                            }
                        }
                    }
                }
                p.expect_punct('}')?;
                model.rules.push(ActrRule { name, lhs, rhs });
            }
            other => {
                return Err(ParseError::at(
                    &t,
                    format!("unknown declaration {other} (expected buffers, type, chunk, buffer, facts, fact or rule)"),
                ))
            }
        }
    }

    // unassigned buffers share a nil chunk
    let needs_nil = model
        .buffers
        .iter()
        .any(|b| !buffer_inits.contains_key(b));
    if needs_nil && !model.initial.store.contains(NIL_ID) {
        model
            .initial
            .store
            .insert(Chunk {
                id: NIL_ID.to_string(),
                ctype: NIL_TYPE.to_string(),
                values: BTreeMap::new(),
            })
            .map_err(ParseError::Validation)?;
    }
    for b in model.buffers.clone() {
        let (id, delay) = buffer_inits
            .get(&b)
            .cloned()
            .unwrap_or_else(|| (NIL_ID.to_string(), Delay::zero()));
        model.initial.gamma.insert(b, (id, delay));
    }
    for b in buffer_inits.keys() {
        if !model.buffers.contains(b) {
            return Err(ParseError::Validation(ValidationError::UndeclaredBuffer(
                b.clone(),
            )));
        }
    }

    model.initial.upsilon.sort();
    model.validate()?;
    Ok(model)
}

/// Prints a model in the file format; `parse_model` of the output is the
/// identity on the abstract syntax. Reserved artifacts (the nil type, the
/// shared nil chunk, default buffer contents) are omitted and re-created
/// on parsing.
pub fn print_model(model: &ActrModel) -> String {
    let mut out = String::new();
    if !model.buffers.is_empty() {
        out.push_str("buffers ");
        out.push_str(
            &model
                .buffers
                .iter()
                .cloned()
                .collect::<Vec<_>>()
                .join(", "),
        );
        out.push_str(".\n");
    }
    for (name, t) in &model.types {
        if name == NIL_TYPE {
            continue;
        }
        out.push_str(&format!(
            "type {name}({}).\n",
            t.slots.iter().cloned().collect::<Vec<_>>().join(", ")
        ));
    }
    if !model.fact_arities.is_empty() {
        out.push_str("facts ");
        out.push_str(
            &model
                .fact_arities
                .iter()
                .map(|(f, a)| format!("{f}/{a}"))
                .collect::<Vec<_>>()
                .join(", "),
        );
        out.push_str(".\n");
    }
    for chunk in model.initial.store.chunks() {
        if chunk.id == NIL_ID {
            continue;
        }
        if chunk.ctype == NIL_TYPE {
            out.push_str(&format!("chunk {}.\n", chunk.id));
        } else {
            out.push_str(&format!(
                "chunk {} : {}({}).\n",
                chunk.id,
                chunk.ctype,
                chunk
                    .values
                    .iter()
                    .map(|(s, v)| format!("{s}: {v}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ));
        }
    }
    for (b, (id, delay)) in &model.initial.gamma {
        if id == NIL_ID && delay.is_zero() {
            continue;
        }
        if delay.is_zero() {
            out.push_str(&format!("buffer {b} = {id}.\n"));
        } else {
            out.push_str(&format!("buffer {b} = {id} @ {delay}.\n"));
        }
    }
    for fact in &model.initial.upsilon {
        out.push_str(&format!("fact {}({}).\n", fact.functor, fact.args.join(", ")));
    }
    for rule in &model.rules {
        out.push_str(&format!("rule {} {{\n", rule.name));
        let tests: Vec<String> = rule
            .lhs
            .iter()
            .map(|t| {
                format!(
                    "  {}: {}({})",
                    t.buffer,
                    t.ctype,
                    t.svp
                        .iter()
                        .map(|(s, v)| format!("{s}: {v}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            })
            .collect();
        out.push_str(&tests.join(";\n"));
        out.push_str("\n  ==>\n");
        let actions: Vec<String> = rule
            .rhs
            .iter()
            .map(|a| match a.kind {
                ActionKind::Clear => format!("  clear {}", a.buffer),
                kind => format!(
                    "  {} {} {}({})",
                    kind,
                    a.buffer,
                    a.ctype,
                    a.svp
                        .iter()
                        .map(|(s, v)| format!("{s}: {v}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            })
            .collect();
        out.push_str(&actions.join(";\n"));
        out.push_str("\n}\n");
    }
    out
}
