//! Concrete syntax: formulas, rules, programs, vocabularies and structure
//! files, plus the canonical pretty printer. The grammar is fully
//! parenthesized for binary connectives; `=` is infix; `#` starts a line
//! comment.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::structure::{ElemId, Structure};
use crate::syntax::{
    eq_ident, validate, Formula, FunDecl, Ident, Polarity, Program, RelDecl, Rule, Term,
    Violation, Vocabulary,
};

/// Byte offsets into the source plus 1-based line/column of the start.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("validation failed: {0:?}")]
    Validation(Vec<Violation>),
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Semi,
    Bang,
    Amp,
    Pipe,
    Eq,
    Arrow, // <-
}

#[derive(Clone, Debug)]
struct SpannedTok {
    tok: Tok,
    span: SourceSpan,
}

fn lex(src: &str) -> Result<Vec<SpannedTok>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1usize;
    let mut col = 1usize;
    let err = |line: usize, col: usize, msg: String| ParseError::Syntax {
        line,
        column: col,
        message: msg,
    };
    while i < bytes.len() {
        let c = bytes[i] as char;
        let span_here = |end: usize, line: usize, col: usize| SourceSpan {
            start: i,
            end,
            line,
            column: col,
        };
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '(' | ')' | ',' | '.' | ';' | '!' | '&' | '|' | '=' => {
                let tok = match c {
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    ',' => Tok::Comma,
                    '.' => Tok::Dot,
                    ';' => Tok::Semi,
                    '!' => Tok::Bang,
                    '&' => Tok::Amp,
                    '|' => Tok::Pipe,
                    _ => Tok::Eq,
                };
                out.push(SpannedTok { tok, span: span_here(i + 1, line, col) });
                i += 1;
                col += 1;
            }
            '<' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'-' {
                    out.push(SpannedTok { tok: Tok::Arrow, span: span_here(i + 2, line, col) });
                    i += 2;
                    col += 2;
                } else {
                    return Err(err(line, col, "expected `<-`".into()));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let scol = col;
                while i < bytes.len() {
                    let b = bytes[i] as char;
                    if b.is_ascii_alphanumeric() || b == '_' || b == '\'' {
                        i += 1;
                        col += 1;
                    } else {
                        break;
                    }
                }
                out.push(SpannedTok {
                    tok: Tok::Ident(src[start..i].to_string()),
                    span: SourceSpan { start, end: i, line, column: scol },
                });
            }
            other => return Err(err(line, col, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
    end_line: usize,
    end_col: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ParseError> {
        let toks = lex(src)?;
        let end_line = src.lines().count().max(1);
        let end_col = src.lines().last().map(|l| l.len() + 1).unwrap_or(1);
        Ok(Parser { toks, pos: 0, end_line, end_col })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|t| (t.span.line, t.span.column))
            .unwrap_or((self.end_line, self.end_col))
    }

    fn err(&self, msg: &str) -> ParseError {
        let (line, column) = self.here();
        ParseError::Syntax { line, column, message: msg.to_string() }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Tok, what: &str) -> Result<(), ParseError> {
        if self.peek() == Some(want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<Ident, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if !is_keyword(s) => {
                let id = Ident::new(s);
                self.pos += 1;
                Ok(id)
            }
            _ => Err(self.err(&format!("expected {what}"))),
        }
    }

    fn at_ident(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        let name = self.ident("a term")?;
        if self.peek() == Some(&Tok::LParen) {
            self.pos += 1;
            let mut args = Vec::new();
            if self.peek() != Some(&Tok::RParen) {
                loop {
                    args.push(self.term()?);
                    if self.peek() == Some(&Tok::Comma) {
                        self.pos += 1;
                    } else {
                        break;
                    }
                }
            }
            self.expect(&Tok::RParen, "`)`")?;
            Ok(Term::App(name, args))
        } else {
            Ok(Term::Var(name))
        }
    }

    /// atom := IDENT "(" termlist? ")" | term "=" term
    fn atom(&mut self) -> Result<Formula, ParseError> {
        let t = self.term()?;
        match (&t, self.peek()) {
            (Term::App(name, args), tok) if tok != Some(&Tok::Eq) => {
                // Relation application, unless an `=` follows (then it was a term).
                Ok(Formula::Atom(name.clone(), args.clone()))
            }
            (_, Some(Tok::Eq)) => {
                self.pos += 1;
                let rhs = self.term()?;
                Ok(Formula::Atom(eq_ident(), vec![t, rhs]))
            }
            _ => Err(self.err("expected `=` or `(` after identifier in atom")),
        }
    }

    fn rule(&mut self) -> Result<Rule, ParseError> {
        let head = self.ident("a rule head")?;
        self.expect(&Tok::LParen, "`(`")?;
        let mut head_vars = Vec::new();
        if self.peek() != Some(&Tok::RParen) {
            loop {
                head_vars.push(self.ident("a head variable")?);
                if self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
        }
        self.expect(&Tok::RParen, "`)`")?;
        self.expect(&Tok::Arrow, "`<-`")?;
        let body = self.formula()?;
        Ok(Rule { head, head_vars, body })
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        match self.peek() {
            Some(Tok::Bang) => {
                self.pos += 1;
                // `!atom` or `!(atom)`; the parenthesized form reads better
                // for equality.
                let parens = self.peek() == Some(&Tok::LParen);
                if parens {
                    self.pos += 1;
                }
                let atom = self.atom()?;
                if parens {
                    self.expect(&Tok::RParen, "`)`")?;
                }
                match atom {
                    Formula::Atom(r, args) => Ok(Formula::NegAtom(r, args)),
                    _ => Err(self.err("negation applies to an atom")),
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let a = self.formula()?;
                let op = self.bump().ok_or_else(|| self.err("expected `&` or `|`"))?;
                let b = self.formula()?;
                self.expect(&Tok::RParen, "`)`")?;
                match op {
                    Tok::Amp => Ok(Formula::Conj(Box::new(a), Box::new(b))),
                    Tok::Pipe => Ok(Formula::Disj(Box::new(a), Box::new(b))),
                    _ => Err(self.err("expected `&` or `|`")),
                }
            }
            Some(Tok::Ident(s)) if s == "exists" => {
                self.pos += 1;
                let v = self.ident("a variable")?;
                self.expect(&Tok::Dot, "`.`")?;
                let body = self.formula()?;
                Ok(Formula::Exists(v, Box::new(body)))
            }
            Some(Tok::Ident(s)) if s == "let" => {
                self.pos += 1;
                let mut rules = vec![self.rule()?];
                while self.peek() == Some(&Tok::Semi) {
                    self.pos += 1;
                    rules.push(self.rule()?);
                }
                if !self.at_ident("then") {
                    return Err(self.err("expected `then`"));
                }
                self.pos += 1;
                let body = self.formula()?;
                Ok(Formula::Let(Program { rules }, Box::new(body)))
            }
            Some(Tok::Ident(_)) => self.atom(),
            _ => Err(self.err("expected a formula")),
        }
    }

    fn at_end(&self) -> bool {
        self.pos == self.toks.len()
    }
}

fn is_keyword(s: &str) -> bool {
    matches!(s, "exists" | "let" | "then")
}

/// Parse and validate a formula against `vocab`.
pub fn parse_formula(text: &str, vocab: &Vocabulary) -> Result<Formula, ParseError> {
    let f = parse_formula_unchecked(text)?;
    let violations = validate(&f, vocab);
    if violations.is_empty() {
        Ok(f)
    } else {
        Err(ParseError::Validation(violations))
    }
}

/// Parse without validation (callers that assemble the vocabulary later).
pub fn parse_formula_unchecked(text: &str) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text)?;
    let f = p.formula()?;
    if !p.at_end() {
        return Err(p.err("trailing input after formula"));
    }
    Ok(f)
}

/// Parse a program: rules separated by `;`, optional trailing `;`.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    let mut p = Parser::new(text)?;
    let mut rules = vec![p.rule()?];
    while p.peek() == Some(&Tok::Semi) {
        p.pos += 1;
        if p.at_end() {
            break;
        }
        rules.push(p.rule()?);
    }
    if !p.at_end() {
        return Err(p.err("trailing input after program"));
    }
    Ok(Program { rules })
}

pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    write_term(&mut s, t);
    s
}

fn write_term(out: &mut String, t: &Term) {
    match t {
        Term::Var(v) => {
            let _ = write!(out, "{v}");
        }
        Term::App(f, args) => {
            let _ = write!(out, "{f}(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_term(out, a);
            }
            out.push(')');
        }
    }
}

/// Canonical fully parenthesized form; `parse_formula . print_formula` is
/// the identity on ASTs.
pub fn print_formula(f: &Formula) -> String {
    let mut s = String::new();
    write_formula(&mut s, f);
    s
}

fn write_atom(out: &mut String, r: &Ident, args: &[Term], negated: bool) {
    if r == &eq_ident() {
        if negated {
            out.push_str("!(");
        }
        write_term(out, &args[0]);
        out.push_str(" = ");
        write_term(out, &args[1]);
        if negated {
            out.push(')');
        }
    } else {
        if negated {
            out.push('!');
        }
        let _ = write!(out, "{r}(");
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            write_term(out, a);
        }
        out.push(')');
    }
}

fn write_formula(out: &mut String, f: &Formula) {
    match f {
        Formula::Atom(r, args) => write_atom(out, r, args, false),
        Formula::NegAtom(r, args) => write_atom(out, r, args, true),
        Formula::Conj(a, b) => {
            out.push('(');
            write_formula(out, a);
            out.push_str(" & ");
            write_formula(out, b);
            out.push(')');
        }
        Formula::Disj(a, b) => {
            out.push('(');
            write_formula(out, a);
            out.push_str(" | ");
            write_formula(out, b);
            out.push(')');
        }
        Formula::Exists(v, body) => {
            let _ = write!(out, "exists {v}. ");
            write_formula(out, body);
        }
        Formula::Let(p, body) => {
            out.push_str("let ");
            for (i, r) in p.rules.iter().enumerate() {
                if i > 0 {
                    out.push_str("; ");
                }
                write_rule(out, r);
            }
            out.push_str(" then ");
            write_formula(out, body);
        }
    }
}

fn write_rule(out: &mut String, r: &Rule) {
    let _ = write!(out, "{}(", r.head);
    for (i, v) in r.head_vars.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{v}");
    }
    out.push_str(") <- ");
    write_formula(out, &r.body);
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    for r in &p.rules {
        write_rule(&mut out, r);
        out.push_str(";\n");
    }
    out
}

/// Render a vocabulary in the declaration syntax used by structure files.
pub fn print_vocabulary(v: &Vocabulary) -> String {
    let mut out = String::new();
    for f in &v.functions {
        let _ = writeln!(out, "fun {}/{}", f.name, f.arity);
    }
    for r in &v.relations {
        let pol = match r.polarity {
            Polarity::Negatable => "negatable",
            Polarity::Positive => "positive",
        };
        let _ = writeln!(out, "rel {}/{} {}", r.name, r.arity, pol);
    }
    out
}

struct LineErr {
    line: usize,
    message: String,
}

fn split_decl(word: &str) -> Result<(Ident, usize), String> {
    let (name, arity) = word
        .split_once('/')
        .ok_or_else(|| format!("expected `name/arity`, got `{word}`"))?;
    let arity: usize = arity
        .parse()
        .map_err(|_| format!("bad arity in `{word}`"))?;
    if name.is_empty() {
        return Err(format!("empty name in `{word}`"));
    }
    Ok((Ident::new(name), arity))
}

/// Parse a vocabulary file: `fun name/arity` and
/// `rel name/arity negatable|positive` lines.
pub fn parse_vocabulary(text: &str) -> Result<Vocabulary, ParseError> {
    let mut vocab = Vocabulary::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        parse_decl_line(line, lineno + 1, &mut vocab).map_err(|e| ParseError::Syntax {
            line: e.line,
            column: 1,
            message: e.message,
        })?;
    }
    vocab.check().map_err(|m| ParseError::Syntax { line: 0, column: 0, message: m })?;
    Ok(vocab)
}

fn parse_decl_line(line: &str, lineno: usize, vocab: &mut Vocabulary) -> Result<(), LineErr> {
    let mut words = line.split_whitespace();
    let kind = words.next().unwrap_or("");
    let fail = |m: String| LineErr { line: lineno, message: m };
    match kind {
        "fun" => {
            let w = words.next().ok_or_else(|| fail("missing declaration".into()))?;
            let (name, arity) = split_decl(w).map_err(|m| fail(m))?;
            vocab.functions.push(FunDecl { name, arity });
        }
        "rel" => {
            let w = words.next().ok_or_else(|| fail("missing declaration".into()))?;
            let (name, arity) = split_decl(w).map_err(|m| fail(m))?;
            let pol = match words.next() {
                Some("negatable") => Polarity::Negatable,
                Some("positive") => Polarity::Positive,
                other => {
                    return Err(fail(format!(
                        "expected `negatable` or `positive`, got {other:?}"
                    )))
                }
            };
            vocab.relations.push(RelDecl { name, arity, polarity: pol });
        }
        other => return Err(fail(format!("unknown declaration `{other}`"))),
    }
    Ok(())
}

/// Parse a structure file. Format (line oriented, `#` comments):
///
/// ```text
/// universe a b c
/// fun c/0 -> a
/// fun s/1: a -> b, b -> c, c -> c
/// rel Edge/2 negatable: (a,b) (b,c)
/// rel Color/1 positive: (a)
/// ```
pub fn parse_structure(text: &str) -> Result<(Vocabulary, Structure), ParseError> {
    let mut vocab = Vocabulary::new();
    let mut universe: Vec<Ident> = Vec::new();
    // (name, arity, rows) with rows (args, value)
    let mut fun_rows: Vec<(Ident, usize, Vec<(Vec<Ident>, Ident)>, usize)> = Vec::new();
    let mut rel_rows: Vec<(Ident, usize, Vec<Vec<Ident>>, usize)> = Vec::new();

    let syntax_err = |line: usize, message: String| ParseError::Syntax { line, column: 1, message };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (kind, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match kind {
            "universe" => {
                for w in rest.split_whitespace() {
                    universe.push(Ident::new(w));
                }
            }
            "fun" => {
                let rest = rest.trim();
                // `c/0 -> a` or `s/1: a -> b, b -> c`
                if let Some((decl, val)) = rest.split_once("->").filter(|(d, _)| !d.contains(':')) {
                    let (name, arity) = split_decl(decl.trim())
                        .map_err(|m| syntax_err(lineno, m))?;
                    if arity != 0 {
                        return Err(syntax_err(
                            lineno,
                            format!("`->` without argument tuple requires arity 0 (`{name}`)"),
                        ));
                    }
                    vocab.functions.push(FunDecl { name: name.clone(), arity });
                    fun_rows.push((name, 0, vec![(vec![], Ident::new(val.trim()))], lineno));
                } else {
                    let (decl, rows) = rest
                        .split_once(':')
                        .ok_or_else(|| syntax_err(lineno, "expected `:` in fun line".into()))?;
                    let (name, arity) = split_decl(decl.trim())
                        .map_err(|m| syntax_err(lineno, m))?;
                    vocab.functions.push(FunDecl { name: name.clone(), arity });
                    let mut parsed = Vec::new();
                    for row in rows.split(',') {
                        let row = row.trim();
                        if row.is_empty() {
                            continue;
                        }
                        let (args, val) = row.split_once("->").ok_or_else(|| {
                            syntax_err(lineno, format!("expected `->` in `{row}`"))
                        })?;
                        let args = parse_tuple(args.trim())
                            .map_err(|m| syntax_err(lineno, m))?;
                        if args.len() != arity {
                            return Err(syntax_err(
                                lineno,
                                format!("tuple arity mismatch for `{name}`"),
                            ));
                        }
                        parsed.push((args, Ident::new(val.trim())));
                    }
                    fun_rows.push((name, arity, parsed, lineno));
                }
            }
            "rel" => {
                let rest = rest.trim();
                let (head, rows) = match rest.split_once(':') {
                    Some((h, r)) => (h.trim(), r.trim()),
                    None => (rest, ""),
                };
                let mut words = head.split_whitespace();
                let w = words
                    .next()
                    .ok_or_else(|| syntax_err(lineno, "missing declaration".into()))?;
                let (name, arity) = split_decl(w).map_err(|m| syntax_err(lineno, m))?;
                let pol = match words.next() {
                    Some("negatable") => Polarity::Negatable,
                    Some("positive") => Polarity::Positive,
                    other => {
                        return Err(syntax_err(
                            lineno,
                            format!("expected `negatable` or `positive`, got {other:?}"),
                        ))
                    }
                };
                vocab.relations.push(RelDecl { name: name.clone(), arity, polarity: pol });
                let mut parsed = Vec::new();
                for tup in split_tuples(rows) {
                    let args = parse_tuple(&tup).map_err(|m| syntax_err(lineno, m))?;
                    if args.len() != arity {
                        return Err(syntax_err(lineno, format!("tuple arity mismatch for `{name}`")));
                    }
                    parsed.push(args);
                }
                rel_rows.push((name, arity, parsed, lineno));
            }
            other => return Err(syntax_err(lineno, format!("unknown line kind `{other}`"))),
        }
    }

    vocab
        .check()
        .map_err(|m| ParseError::Syntax { line: 0, column: 0, message: m })?;
    if universe.is_empty() {
        return Err(ParseError::Syntax {
            line: 0,
            column: 0,
            message: "structure must declare a non-empty universe".into(),
        });
    }

    let mut st = Structure::new(vocab.clone(), universe.clone()).map_err(|m| {
        ParseError::Syntax { line: 0, column: 0, message: m }
    })?;

    let lookup = |name: &Ident, lineno: usize, st: &Structure| -> Result<ElemId, ParseError> {
        st.elem(name).ok_or_else(|| ParseError::Syntax {
            line: lineno,
            column: 1,
            message: format!("element `{name}` not in universe"),
        })
    };

    let mut fun_tables: BTreeMap<Ident, BTreeMap<Vec<ElemId>, ElemId>> = BTreeMap::new();
    for (name, _arity, rows, lineno) in fun_rows {
        let table = fun_tables.entry(name.clone()).or_default();
        for (args, val) in rows {
            let args: Vec<ElemId> = args
                .iter()
                .map(|a| lookup(a, lineno, &st))
                .collect::<Result<_, _>>()?;
            let val = lookup(&val, lineno, &st)?;
            if let Some(prev) = table.insert(args, val) {
                if prev != val {
                    return Err(ParseError::Syntax {
                        line: lineno,
                        column: 1,
                        message: format!("function `{name}` not single-valued"),
                    });
                }
            }
        }
    }
    for (name, table) in fun_tables {
        st.set_function(&name, table).map_err(|m| ParseError::Syntax {
            line: 0,
            column: 0,
            message: m,
        })?;
    }
    for (name, _arity, rows, lineno) in rel_rows {
        for args in rows {
            let args: Vec<ElemId> = args
                .iter()
                .map(|a| lookup(a, lineno, &st))
                .collect::<Result<_, _>>()?;
            st.add_tuple(&name, args);
        }
    }
    st.check_total().map_err(|m| ParseError::Syntax {
        line: 0,
        column: 0,
        message: format!("function not total: {m}"),
    })?;
    Ok((vocab, st))
}

fn parse_tuple(s: &str) -> Result<Vec<Ident>, String> {
    let inner = if s.starts_with('(') {
        let t = s.strip_prefix('(').unwrap();
        t.strip_suffix(')').ok_or_else(|| format!("unclosed tuple `{s}`"))?
    } else {
        s
    };
    let inner = inner.trim();
    if inner.is_empty() {
        return Ok(vec![]);
    }
    Ok(inner
        .split(',')
        .map(|w| Ident::new(w.trim()))
        .collect())
}

fn split_tuples(s: &str) -> Vec<String> {
    // "(a,b) (b,c)" -> ["(a,b)", "(b,c)"]; bare words for arity-1 shorthand.
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => {
                depth += 1;
                cur.push(c);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
                if depth == 0 {
                    out.push(cur.trim().to_string());
                    cur.clear();
                }
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.trim().is_empty() {
                    out.push(cur.trim().to_string());
                }
                cur.clear();
            }
            _ => cur.push(c),
        }
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::free_vars;

    fn vocab() -> Vocabulary {
        Vocabulary::new()
            .with_fun("c", 0)
            .with_fun("s", 1)
            .with_rel("E", 2, Polarity::Negatable)
            .with_rel("P", 1, Polarity::Positive)
    }

    #[test]
    fn parse_exists_atom() {
        let f = parse_formula("exists x. E(c(), x)", &vocab()).unwrap();
        assert_eq!(
            f,
            Formula::Exists(
                Ident::new("x"),
                Box::new(Formula::Atom(
                    Ident::new("E"),
                    vec![Term::app("c", vec![]), Term::var("x")]
                ))
            )
        );
    }

    #[test]
    fn parse_let_rule() {
        let f = parse_formula(
            "let R(x) <- (E(x,x) | exists y.(E(x,y) & R(y))) then R(z)",
            &vocab(),
        )
        .unwrap();
        match &f {
            Formula::Let(p, body) => {
                assert_eq!(p.rules.len(), 1);
                assert_eq!(p.rules[0].head, Ident::new("R"));
                assert_eq!(**body, Formula::Atom(Ident::new("R"), vec![Term::var("z")]));
            }
            _ => panic!("expected let"),
        }
        assert_eq!(free_vars(&f), [Ident::new("z")].into_iter().collect());
    }

    #[test]
    fn parse_rejects_negated_positive() {
        let err = parse_formula("!P(x)", &vocab()).unwrap_err();
        match err {
            ParseError::Validation(v) => {
                assert!(v[0].message.contains("negation can be applied") || v[0].message.contains("negation of positive"))
            }
            other => panic!("expected validation error, got {other}"),
        }
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_formula("exists . E(x,x)", &vocab()).unwrap_err();
        match err {
            ParseError::Syntax { line, column, .. } => {
                assert_eq!(line, 1);
                assert!(column > 1);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn print_equality_infix() {
        let f = Formula::Atom(eq_ident(), vec![Term::var("x"), Term::var("y")]);
        assert_eq!(print_formula(&f), "x = y");
        let g = Formula::NegAtom(eq_ident(), vec![Term::var("x"), Term::var("y")]);
        assert_eq!(print_formula(&g), "!(x = y)");
    }

    #[test]
    fn roundtrip_golden() {
        let cases = [
            "exists x. E(c(), x)",
            "(E(x, y) & !(x = y))",
            "let R(x) <- (x = c() | exists y. (R(y) & E(y, x))) then R(z)",
            "let R(x) <- E(x, x); Q(x, y) <- (R(x) & R(y)) then exists u. Q(u, u)",
            "!E(s(c()), c())",
        ];
        for c in cases {
            let f = parse_formula(c, &vocab()).unwrap();
            let printed = print_formula(&f);
            let f2 = parse_formula(&printed, &vocab()).unwrap();
            assert_eq!(f, f2, "roundtrip failed for `{c}`");
            // Printing is idempotent on canonical forms.
            assert_eq!(print_formula(&f2), printed);
        }
    }

    #[test]
    fn structure_file_graph() {
        let text = "\
universe a b c
fun c/0 -> a
fun s/1: a -> b, b -> c, c -> c
rel Edge/2 negatable: (a,b) (b,c)
rel Color/1 positive: (a)
";
        let (vocab, st) = parse_structure(text).unwrap();
        assert_eq!(vocab.functions.len(), 2);
        assert_eq!(st.universe_len(), 3);
        let a = st.elem(&Ident::new("a")).unwrap();
        let b = st.elem(&Ident::new("b")).unwrap();
        assert!(st.rel_contains(&Ident::new("Edge"), &[a, b]));
        assert!(!st.rel_contains(&Ident::new("Edge"), &[b, a]));
    }

    #[test]
    fn structure_file_rejects_non_total() {
        let text = "\
universe a b
fun s/1: a -> b
";
        let err = parse_structure(text).unwrap_err();
        assert!(err.to_string().contains("not total"));
    }

    #[test]
    fn structure_file_rejects_double_valued() {
        let text = "\
universe a b
fun s/1: a -> b, a -> a, b -> b
";
        let err = parse_structure(text).unwrap_err();
        assert!(err.to_string().contains("single-valued"));
    }

    #[test]
    fn structure_file_rejects_unknown_element() {
        let text = "\
universe a b
rel Edge/2 negatable: (a,q)
";
        let err = parse_structure(text).unwrap_err();
        assert!(err.to_string().contains("not in universe"));
    }
}
