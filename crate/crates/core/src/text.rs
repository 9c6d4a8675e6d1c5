//! Surface syntax: parsing programs and fact sets, rendering ground programs.
//!
//! ```text
//! r(X,Y) :- e(X,Y), not ab(X).
//! r(X,Z) | s(X,Z) :- e(X,Y), r(Y,Z).
//! :- p, not q.          % constraint
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::ast::{check_safety, Atom, FactSet, Program, Rule, Symbol, Term};
use crate::error::{Error, Result, SourceSpan};
use crate::ground::{DeletedStore, GroundProgram, SimplifiedRule};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Name(String),
    Var(String),
    LParen,
    RParen,
    Comma,
    Pipe,
    If,
    Dot,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::If => "`:-`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, SourceSpan)>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    let (mut line, mut col) = (1usize, 1usize);
    while let Some(&(i, c)) = chars.peek() {
        let span = SourceSpan {
            line,
            column: col,
            length: 1,
        };
        if c == '\n' {
            chars.next();
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            col += 1;
            continue;
        }
        if c == '%' {
            while chars.peek().is_some_and(|&(_, c)| c != '\n') {
                chars.next();
            }
            continue;
        }
        if c.is_alphanumeric() || c == '_' {
            let start = i;
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    end = j + d.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let word = &text[start..end];
            let len = word.chars().count();
            let tok = if Symbol::is_variable_name(word) {
                Tok::Var(word.to_string())
            } else {
                Tok::Name(word.to_string())
            };
            out.push((
                tok,
                SourceSpan {
                    length: len,
                    ..span
                },
            ));
            col += len;
            continue;
        }
        chars.next();
        let tok = match c {
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            '|' => Tok::Pipe,
            '.' => Tok::Dot,
            ':' if chars.peek().is_some_and(|&(_, d)| d == '-') => {
                chars.next();
                col += 1;
                out.push((Tok::If, SourceSpan { length: 2, ..span }));
                col += 1;
                continue;
            }
            other => {
                return Err(Error::Syntax {
                    span,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        out.push((tok, span));
        col += 1;
    }
    let span = SourceSpan {
        line,
        column: col,
        length: 0,
    };
    out.push((Tok::Eof, span));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
}

/// One parsed statement with the span of each of its atoms.
struct Statement {
    rule: Rule,
    atom_spans: Vec<(Atom, SourceSpan)>,
    span: SourceSpan,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if t.0 != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T> {
        Err(Error::Syntax {
            span: self.span(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(&tok.describe())
        }
    }

    fn atom(&mut self, spans: &mut Vec<(Atom, SourceSpan)>) -> Result<Atom> {
        let span = self.span();
        let predicate = match self.peek() {
            Tok::Name(n) => n.clone(),
            _ => return self.error("an atom"),
        };
        self.bump();
        let mut args = Vec::new();
        if *self.peek() == Tok::LParen {
            self.bump();
            loop {
                match self.bump() {
                    (Tok::Name(n), _) => args.push(Term::Const(Symbol::new(&n))),
                    (Tok::Var(v), _) => args.push(Term::Var(Symbol::new(&v))),
                    _ => {
                        self.pos -= 1;
                        return self.error("a term");
                    }
                }
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => {
                        self.bump();
                        break;
                    }
                    _ => return self.error("`,` or `)`"),
                }
            }
        }
        let atom = Atom::new(Symbol::new(&predicate), args);
        spans.push((atom.clone(), span));
        Ok(atom)
    }

    fn statement(&mut self) -> Result<Statement> {
        let span = self.span();
        let mut spans = Vec::new();
        let mut head = BTreeSet::new();
        if *self.peek() != Tok::If {
            loop {
                head.insert(self.atom(&mut spans)?);
                if *self.peek() == Tok::Pipe {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        let (mut pos, mut neg) = (BTreeSet::new(), BTreeSet::new());
        if *self.peek() == Tok::If {
            self.bump();
            // `:- .` is the always-violated constraint
            if !(head.is_empty() && *self.peek() == Tok::Dot) {
                loop {
                    if matches!(self.peek(), Tok::Name(n) if n == "not") {
                        self.bump();
                        neg.insert(self.atom(&mut spans)?);
                    } else {
                        pos.insert(self.atom(&mut spans)?);
                    }
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
            }
        }
        self.expect(Tok::Dot)?;
        Ok(Statement {
            rule: Rule { head, pos, neg },
            atom_spans: spans,
            span,
        })
    }

    fn statements(text: &str) -> Result<Vec<Statement>> {
        let mut p = Parser {
            toks: lex(text)?,
            pos: 0,
        };
        let mut out = Vec::new();
        while *p.peek() != Tok::Eof {
            out.push(p.statement()?);
        }
        Ok(out)
    }
}

fn check_arities<'a>(
    sig: &mut HashMap<Symbol, usize>,
    atoms: impl IntoIterator<Item = &'a (Atom, SourceSpan)>,
) -> Result<()> {
    for (atom, span) in atoms {
        let expected = *sig.entry(atom.predicate.clone()).or_insert(atom.arity());
        if expected != atom.arity() {
            return Err(Error::ArityMismatch {
                predicate: atom.predicate.to_string(),
                expected,
                found: atom.arity(),
                span: Some(*span),
            });
        }
    }
    Ok(())
}

/// Parses a program; every rule must be safe and every predicate used with a
/// single arity.
pub fn parse_program(text: &str) -> Result<Program> {
    let stmts = Parser::statements(text)?;
    let mut sig = HashMap::new();
    let mut rules = Vec::with_capacity(stmts.len());
    for (i, st) in stmts.into_iter().enumerate() {
        check_arities(&mut sig, &st.atom_spans)?;
        if let Some(v) = check_safety(&st.rule, i).into_iter().next() {
            return Err(Error::Unsafe {
                variable: v.variable.to_string(),
                rule: format!("{} (line {})", st.rule, st.span.line),
            });
        }
        rules.push(st.rule);
    }
    Ok(Program::new(rules))
}

/// Parses a set of ground facts `p(c1,...,cn).`
pub fn parse_fact_set(text: &str) -> Result<FactSet> {
    let mut sig = HashMap::new();
    let mut atoms = BTreeSet::new();
    for st in Parser::statements(text)? {
        check_arities(&mut sig, &st.atom_spans)?;
        let r = st.rule;
        if r.head.len() != 1 || !r.pos.is_empty() || !r.neg.is_empty() {
            return Err(Error::Syntax {
                span: st.span,
                message: format!("expected a fact, found `{r}`"),
            });
        }
        let atom = r.head.into_iter().next().unwrap();
        if !atom.is_ground() {
            return Err(Error::NonGroundFact {
                atom: atom.to_string(),
                span: Some(st.span),
            });
        }
        atoms.insert(atom);
    }
    FactSet::new(atoms)
}

/// Which body to print for a simplified rule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BodyMode {
    /// The current body, without removed atoms.
    #[default]
    Simplified,
    /// The full body of the homologous rule.
    Homologous,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RenderOptions {
    pub body: BodyMode,
    /// Append deleted rules as `% deleted: <rule>` comments.
    pub include_deleted: bool,
}

fn sort_key(head: &BTreeSet<Atom>, text: String) -> (Vec<String>, String) {
    (head.iter().map(|a| a.predicate.to_string()).collect(), text)
}

/// Renders rules one per line in canonical order, without a trailing newline.
pub fn render_rules<'a>(
    rules: impl IntoIterator<Item = &'a SimplifiedRule>,
    body: BodyMode,
) -> String {
    let mut lines: Vec<_> = rules
        .into_iter()
        .map(|s| {
            let text = match body {
                BodyMode::Simplified => s.to_string(),
                BodyMode::Homologous => s.hom().to_string(),
            };
            sort_key(s.head(), text)
        })
        .collect();
    lines.sort();
    lines.dedup();
    let mut out = String::new();
    for (i, (_, text)) in lines.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(text);
    }
    out
}

pub fn render_ground_program(
    g: &GroundProgram,
    deleted: Option<&DeletedStore>,
    opts: &RenderOptions,
) -> String {
    let mut out = render_rules(g.iter(), opts.body);
    if let (true, Some(d)) = (opts.include_deleted, deleted) {
        let mut lines: Vec<_> = d
            .iter()
            .map(|(r, _)| sort_key(&r.head, r.to_string()))
            .collect();
        lines.sort();
        for (_, text) in lines {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = write!(out, "% deleted: {text}");
        }
    }
    out
}

/// Splits a framed stream into shot texts. Each shot ends with a line that
/// holds only `#endshot`; trailing text after the last marker is a final
/// shot unless it is blank.
pub fn split_frames(stream: &str) -> Vec<String> {
    let mut shots = Vec::new();
    let mut cur = String::new();
    for line in stream.lines() {
        if line.trim() == "#endshot" {
            shots.push(std::mem::take(&mut cur));
        } else {
            cur.push_str(line);
            cur.push('\n');
        }
    }
    if !cur.trim().is_empty() {
        shots.push(cur);
    }
    shots
}
