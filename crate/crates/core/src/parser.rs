//! Text format for sentences.
//!
//! ```text
//! sig { fn f/2; fn i/1; rel P/1; const a; }
//! steps 2;                      # optional closure bound
//! forall x y . P(x) & !P(y) -> x < y
//! forall x . !P(a)
//! ```
//!
//! Several `forall` statements are read as their conjunction; variables are
//! shared by position. `t1 <= t2` abbreviates `t1 < t2 | t1 = t2` and
//! `t1 != t2` abbreviates `!(t1 = t2)`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::syntax::{Atom, Formula, Sentence, Signature, Symbol, Term};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(usize),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Comma,
    Semi,
    Slash,
    Dot,
    Eq,
    Ne,
    Lt,
    Le,
    Bang,
    Amp,
    Bar,
    Arrow,
    DArrow,
    Eof,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, column, message: String| Error::Syntax {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
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
                advance(1, &mut i, &mut col);
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
        let peek = |k: usize| chars.get(i + k).copied();
        let (tok, len) = match c {
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            '/' => (Tok::Slash, 1),
            '.' => (Tok::Dot, 1),
            '=' => (Tok::Eq, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Bar, 1),
            '!' if peek(1) == Some('=') => (Tok::Ne, 2),
            '!' => (Tok::Bang, 1),
            '<' if peek(1) == Some('-') && peek(2) == Some('>') => (Tok::DArrow, 3),
            '<' if peek(1) == Some('=') => (Tok::Le, 2),
            '<' => (Tok::Lt, 1),
            '-' if peek(1) == Some('>') => (Tok::Arrow, 2),
            c if c.is_ascii_digit() => {
                let start = i;
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let s: String = chars[start..j].iter().collect();
                let n = s
                    .parse()
                    .map_err(|_| err(l0, c0, format!("number `{s}` too large")))?;
                (Tok::Num(n), j - start)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                (Tok::Ident(chars[start..j].iter().collect()), j - start)
            }
            other => return Err(err(l0, c0, format!("unexpected character `{other}`"))),
        };
        out.push(Spanned {
            tok,
            line: l0,
            column: c0,
        });
        advance(len, &mut i, &mut col);
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

/// Result of reading a sentence file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentenceFile {
    pub sentence: Sentence,
    /// Closure bound declared with `steps n;`, if any.
    pub steps: Option<usize>,
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> Error {
        let t = &self.toks[self.pos];
        Error::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error_here(format!("expected {what}, found {}", describe(&other)))),
        }
    }

    fn number(&mut self) -> Result<usize> {
        match *self.peek() {
            Tok::Num(n) => {
                self.next();
                Ok(n)
            }
            ref other => {
                Err(self.error_here(format!("expected a number, found {}", describe(other))))
            }
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn signature(&mut self) -> Result<Signature> {
        let mut sig = Signature::new();
        if !self.is_keyword("sig") {
            return Ok(sig);
        }
        self.next();
        self.expect(Tok::LBrace, "`{`")?;
        while *self.peek() != Tok::RBrace {
            let at = self.pos;
            let kind = self.ident("`fn`, `rel` or `const`")?;
            let name = self.ident("a symbol name")?;
            let res = match kind.as_str() {
                "fn" | "rel" => {
                    self.expect(Tok::Slash, "`/`")?;
                    let arity = self.number()?;
                    if kind == "fn" {
                        sig.add_function(&name, arity).map(|_| ())
                    } else {
                        sig.add_relation(&name, arity).map(|_| ())
                    }
                }
                "const" => sig.add_constant(&name).map(|_| ()),
                _ => {
                    self.pos = at;
                    return Err(self.error_here(format!("unknown declaration `{kind}`")));
                }
            };
            if let Err(e) = res {
                self.pos = at;
                return Err(self.error_here(e.to_string()));
            }
            self.expect(Tok::Semi, "`;`")?;
        }
        self.expect(Tok::RBrace, "`}`")?;
        Ok(sig)
    }

    fn statements(
        &mut self,
        sig: &Signature,
        steps: &mut Option<usize>,
    ) -> Result<Vec<(usize, Formula)>> {
        let mut parts = Vec::new();
        loop {
            if self.is_keyword("steps") {
                self.next();
                *steps = Some(self.number()?);
                self.expect(Tok::Semi, "`;`")?;
                continue;
            }
            if *self.peek() == Tok::Eof {
                break;
            }
            if !self.is_keyword("forall") {
                return Err(self.error_here(format!(
                    "expected `forall`, found {}",
                    describe(self.peek())
                )));
            }
            self.next();
            let mut vars: Vec<String> = Vec::new();
            while let Tok::Ident(name) = self.peek().clone() {
                if sig.lookup(&name).is_some() {
                    return Err(self
                        .error_here(format!("variable `{name}` clashes with a declared symbol")));
                }
                if vars.contains(&name) {
                    return Err(self.error_here(format!("variable `{name}` bound twice")));
                }
                vars.push(name);
                self.next();
            }
            self.expect(Tok::Dot, "`.` after the quantified variables")?;
            let f = FormulaParser {
                p: self,
                sig,
                vars: &vars,
            }
            .iff()?;
            parts.push((vars.len(), f));
        }
        Ok(parts)
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(n) => format!("`{n}`"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

struct FormulaParser<'p, 's> {
    p: &'p mut Parser,
    sig: &'s Signature,
    vars: &'s [String],
}

impl FormulaParser<'_, '_> {
    fn iff(&mut self) -> Result<Formula> {
        let mut lhs = self.implies()?;
        while *self.p.peek() == Tok::DArrow {
            self.p.next();
            let rhs = self.implies()?;
            lhs = Formula::iff(lhs, rhs);
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        if *self.p.peek() == Tok::Arrow {
            self.p.next();
            let rhs = self.implies()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Formula> {
        let mut parts = vec![self.and()?];
        while *self.p.peek() == Tok::Bar {
            self.p.next();
            parts.push(self.and()?);
        }
        Ok(Formula::or(parts))
    }

    fn and(&mut self) -> Result<Formula> {
        let mut parts = vec![self.unary()?];
        while *self.p.peek() == Tok::Amp {
            self.p.next();
            parts.push(self.unary()?);
        }
        Ok(Formula::and(parts))
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.p.peek().clone() {
            Tok::Bang => {
                self.p.next();
                Ok(Formula::not(self.unary()?))
            }
            Tok::LParen => {
                self.p.next();
                let f = self.iff()?;
                self.p.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" => {
                self.p.next();
                Ok(Formula::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.p.next();
                Ok(Formula::False)
            }
            Tok::Ident(s) if matches!(self.sig.lookup(&s), Some(Symbol::Relation(_))) => {
                let Some(Symbol::Relation(r)) = self.sig.lookup(&s) else {
                    unreachable!()
                };
                let at = self.p.pos;
                self.p.next();
                let args = self.args()?;
                if args.len() != self.sig.rel_arity(r) {
                    self.p.pos = at;
                    return Err(self.arity_error(&s, self.sig.rel_arity(r), args.len()));
                }
                Ok(Formula::rel(r, args))
            }
            _ => {
                let lhs = self.term()?;
                let op = self.p.peek().clone();
                match op {
                    Tok::Eq | Tok::Ne | Tok::Lt | Tok::Le => {
                        self.p.next();
                        let rhs = self.term()?;
                        Ok(match op {
                            Tok::Eq => Formula::eq(lhs, rhs),
                            Tok::Ne => Formula::ne(lhs, rhs),
                            Tok::Lt => Formula::Atom(Atom::Lt(lhs, rhs)),
                            _ => Formula::le(lhs, rhs),
                        })
                    }
                    other => Err(self.p.error_here(format!(
                        "expected `=`, `!=`, `<` or `<=`, found {}",
                        describe(&other)
                    ))),
                }
            }
        }
    }

    fn arity_error(&self, symbol: &str, expected: usize, found: usize) -> Error {
        let e = Error::Arity {
            symbol: symbol.to_string(),
            expected,
            found,
        };
        self.p.error_here(e.to_string())
    }

    fn args(&mut self) -> Result<Vec<Term>> {
        self.p.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while *self.p.peek() == Tok::Comma {
            self.p.next();
            args.push(self.term()?);
        }
        self.p.expect(Tok::RParen, "`)`")?;
        Ok(args)
    }

    fn term(&mut self) -> Result<Term> {
        let at = self.p.pos;
        let name = self.p.ident("a term")?;
        if let Some(i) = self.vars.iter().position(|v| *v == name) {
            return Ok(Term::Var(i));
        }
        match self.sig.lookup(&name) {
            Some(Symbol::Constant(c)) => Ok(Term::Const(c)),
            Some(Symbol::Function(f)) => {
                let args = self.args()?;
                if args.len() != self.sig.fn_arity(f) {
                    self.p.pos = at;
                    return Err(self.arity_error(&name, self.sig.fn_arity(f), args.len()));
                }
                Ok(Term::App(f, args))
            }
            Some(Symbol::Relation(_)) => {
                self.p.pos = at;
                Err(self
                    .p
                    .error_here(format!("relation `{name}` used as a term")))
            }
            None => {
                self.p.pos = at;
                Err(self.p.error_here(Error::UnknownSymbol(name).to_string()))
            }
        }
    }
}

/// Parses a complete sentence file.
pub fn parse_file(text: &str) -> Result<SentenceFile> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let sig = p.signature()?;
    let mut steps = None;
    let parts = p.statements(&sig, &mut steps)?;
    let sentence = Sentence::conjunction(Arc::new(sig), parts)?;
    Ok(SentenceFile { sentence, steps })
}

/// Parses a sentence (signature block plus statements).
pub fn parse_sentence(text: &str) -> Result<Sentence> {
    parse_file(text).map(|f| f.sentence)
}

/// Parses statements against an existing signature; the text must not
/// contain a `sig` block.
pub fn parse_sentence_with(sig: Arc<Signature>, text: &str) -> Result<Sentence> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut steps = None;
    let parts = p.statements(&sig, &mut steps)?;
    Sentence::conjunction(sig, parts)
}

/// Parses the statements of `text` against `sig`, returning each statement
/// as `(number of variables, matrix)`.
pub fn parse_statements_with(sig: &Signature, text: &str) -> Result<Vec<(usize, Formula)>> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let mut steps = None;
    p.statements(sig, &mut steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_axiom() {
        let s = parse_sentence("forall x . x = x").unwrap();
        assert_eq!(s.q(), 1);
        assert_eq!(*s.matrix(), Formula::eq(Term::Var(0), Term::Var(0)));
        assert_eq!(s.signature().num_functions(), 0);
    }

    #[test]
    fn unclosed_paren_reports_position() {
        let err = parse_sentence("sig { fn f/2; }\nforall x . f(x,x").unwrap_err();
        match err {
            Error::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 17);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn arity_and_unknown_symbols() {
        let e = parse_sentence("sig { fn f/2; }\nforall x . f(x) = x").unwrap_err();
        assert!(e.to_string().contains("expects 2 arguments"), "{e}");
        let e = parse_sentence("forall x . g(x) = x").unwrap_err();
        assert!(e.to_string().contains("unknown symbol `g`"), "{e}");
        let e = parse_sentence("sig { rel </2; }").unwrap_err();
        assert!(matches!(e, Error::Syntax { .. }));
    }

    #[test]
    fn sugar_expands() {
        let s = parse_sentence("forall x y . x <= y | x != y").unwrap();
        let expected = Formula::or(vec![
            Formula::le(Term::Var(0), Term::Var(1)),
            Formula::ne(Term::Var(0), Term::Var(1)),
        ]);
        assert_eq!(*s.matrix(), expected);
    }

    #[test]
    fn statements_conjoin_and_share_variables() {
        let s = parse_file(
            "sig { rel P/1; const a; }\nsteps 2;\nforall x y z . x = x\nforall u . !P(a)",
        )
        .unwrap();
        assert_eq!(s.steps, Some(2));
        assert_eq!(s.sentence.q(), 3);
        assert_eq!(s.sentence.matrix().conjuncts().len(), 2);
    }

    #[test]
    fn precedence() {
        let s = parse_sentence("sig { rel P/1; }\nforall x . P(x) & P(x) | !P(x) -> P(x) <-> P(x)")
            .unwrap();
        assert!(matches!(s.matrix(), Formula::Iff(l, _) if matches!(**l, Formula::Implies(..))));
    }

    #[test]
    fn round_trip_canonical_form() {
        let text = "sig { fn f/2; fn i/1; rel P/1; const a; }\n\
                    forall x y z . (P(x) -> (x < y -> y < z)) & !(f(x, a) = i(z)) <-> P(a) & (P(x) | P(y) & P(z))";
        let s = parse_sentence(text).unwrap();
        let printed = s.to_string();
        let again = parse_sentence(&printed).unwrap();
        assert_eq!(s, again);
        assert_eq!(printed, again.to_string());
    }
}
