//! Signatures, terms, quantifier-free formulas and universal sentences.
//!
//! Every signature implicitly carries the binary order `<` and equality `=`;
//! neither can be declared by the user. Symbols are referred to by dense ids
//! into the owning [`Signature`].

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Index of a function symbol in its signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FnId(pub usize);

/// Index of a relation symbol in its signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelId(pub usize);

/// Index of a constant symbol in its signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstId(pub usize);

/// A resolved non-logical symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symbol {
    Function(FnId),
    Relation(RelId),
    Constant(ConstId),
}

const RESERVED: &[&str] = &[
    "forall", "sig", "fn", "rel", "const", "steps", "true", "false",
];

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A finite signature. `<` and `=` are implicit and reserved.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Signature {
    functions: Vec<(String, usize)>,
    relations: Vec<(String, usize)>,
    constants: Vec<String>,
}

impl Signature {
    pub fn new() -> Self {
        Self::default()
    }

    fn check_fresh(&self, name: &str) -> Result<()> {
        if !is_identifier(name) || RESERVED.contains(&name) {
            return Err(Error::Signature(format!(
                "`{name}` is not a valid symbol name"
            )));
        }
        if self.lookup(name).is_some() {
            return Err(Error::Signature(format!("symbol `{name}` declared twice")));
        }
        Ok(())
    }

    pub fn add_function(&mut self, name: &str, arity: usize) -> Result<FnId> {
        self.check_fresh(name)?;
        if arity == 0 {
            return Err(Error::Signature(format!(
                "function `{name}` must have arity >= 1"
            )));
        }
        self.functions.push((name.to_string(), arity));
        Ok(FnId(self.functions.len() - 1))
    }

    pub fn add_relation(&mut self, name: &str, arity: usize) -> Result<RelId> {
        self.check_fresh(name)?;
        if arity == 0 {
            return Err(Error::Signature(format!(
                "relation `{name}` must have arity >= 1"
            )));
        }
        self.relations.push((name.to_string(), arity));
        Ok(RelId(self.relations.len() - 1))
    }

    pub fn add_constant(&mut self, name: &str) -> Result<ConstId> {
        self.check_fresh(name)?;
        self.constants.push(name.to_string());
        Ok(ConstId(self.constants.len() - 1))
    }

    /// Builder-style helper used heavily by the combinators and tests.
    pub fn with_function(mut self, name: &str, arity: usize) -> Result<Self> {
        self.add_function(name, arity)?;
        Ok(self)
    }

    pub fn with_relation(mut self, name: &str, arity: usize) -> Result<Self> {
        self.add_relation(name, arity)?;
        Ok(self)
    }

    pub fn with_constant(mut self, name: &str) -> Result<Self> {
        self.add_constant(name)?;
        Ok(self)
    }

    pub fn lookup(&self, name: &str) -> Option<Symbol> {
        if let Some(i) = self.functions.iter().position(|(n, _)| n == name) {
            return Some(Symbol::Function(FnId(i)));
        }
        if let Some(i) = self.relations.iter().position(|(n, _)| n == name) {
            return Some(Symbol::Relation(RelId(i)));
        }
        self.constants
            .iter()
            .position(|n| n == name)
            .map(|i| Symbol::Constant(ConstId(i)))
    }

    pub fn function(&self, name: &str) -> Option<FnId> {
        match self.lookup(name) {
            Some(Symbol::Function(f)) => Some(f),
            _ => None,
        }
    }

    pub fn relation(&self, name: &str) -> Option<RelId> {
        match self.lookup(name) {
            Some(Symbol::Relation(r)) => Some(r),
            _ => None,
        }
    }

    pub fn constant(&self, name: &str) -> Option<ConstId> {
        match self.lookup(name) {
            Some(Symbol::Constant(c)) => Some(c),
            _ => None,
        }
    }

    pub fn num_functions(&self) -> usize {
        self.functions.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn num_constants(&self) -> usize {
        self.constants.len()
    }

    pub fn functions(&self) -> impl Iterator<Item = FnId> + '_ {
        (0..self.functions.len()).map(FnId)
    }

    pub fn relations(&self) -> impl Iterator<Item = RelId> + '_ {
        (0..self.relations.len()).map(RelId)
    }

    pub fn constants(&self) -> impl Iterator<Item = ConstId> + '_ {
        (0..self.constants.len()).map(ConstId)
    }

    pub fn fn_name(&self, f: FnId) -> &str {
        &self.functions[f.0].0
    }

    pub fn fn_arity(&self, f: FnId) -> usize {
        self.functions[f.0].1
    }

    pub fn rel_name(&self, r: RelId) -> &str {
        &self.relations[r.0].0
    }

    pub fn rel_arity(&self, r: RelId) -> usize {
        self.relations[r.0].1
    }

    pub fn const_name(&self, c: ConstId) -> &str {
        &self.constants[c.0]
    }

    /// All declared symbol names (without `<`).
    pub fn names(&self) -> BTreeSet<String> {
        self.functions
            .iter()
            .map(|(n, _)| n.clone())
            .chain(self.relations.iter().map(|(n, _)| n.clone()))
            .chain(self.constants.iter().cloned())
            .collect()
    }

    /// True when every function symbol is at most unary.
    pub fn is_unary(&self) -> bool {
        self.functions.iter().all(|&(_, a)| a <= 1)
    }

    pub fn max_function_arity(&self) -> usize {
        self.functions.iter().map(|&(_, a)| a).max().unwrap_or(0)
    }

    pub fn max_relation_arity(&self) -> usize {
        self.relations.iter().map(|&(_, a)| a).max().unwrap_or(0)
    }

    /// True when the signature has neither function symbols nor constants.
    pub fn is_relational(&self) -> bool {
        self.functions.is_empty() && self.constants.is_empty()
    }
}

/// A term: variable, constant, or function application.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(usize),
    Const(ConstId),
    App(FnId, Vec<Term>),
}

impl Term {
    pub fn app(f: FnId, args: Vec<Term>) -> Term {
        Term::App(f, args)
    }

    /// Maximum nesting depth of function applications; variables and
    /// constants have complexity 0.
    pub fn complexity(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 0,
            Term::App(_, args) => 1 + args.iter().map(Term::complexity).max().unwrap_or(0),
        }
    }

    /// Number of closure steps needed to produce the value of this term from
    /// the values of its variables: constants enter at step 1, every
    /// application adds one step.
    pub fn closure_height(&self) -> usize {
        match self {
            Term::Var(_) => 0,
            Term::Const(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::closure_height).max().unwrap_or(0),
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Term::Var(v) => {
                out.insert(*v);
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn map_vars(&self, f: &impl Fn(usize) -> Term) -> Term {
        match self {
            Term::Var(v) => f(*v),
            Term::Const(c) => Term::Const(*c),
            Term::App(g, args) => Term::App(*g, args.iter().map(|a| a.map_vars(f)).collect()),
        }
    }

    /// Rewrites symbols through `map`, used when moving a term to another
    /// signature.
    pub fn translate(&self, map: &SymbolMap) -> Term {
        match self {
            Term::Var(v) => Term::Var(*v),
            Term::Const(c) => map.constant(*c),
            Term::App(g, args) => Term::App(
                map.function(*g),
                args.iter().map(|a| a.translate(map)).collect(),
            ),
        }
    }

    fn check(&self, sig: &Signature, q: usize) -> Result<()> {
        match self {
            Term::Var(v) if *v >= q => Err(Error::Malformed(format!(
                "variable index {v} out of range {q}"
            ))),
            Term::Var(_) => Ok(()),
            Term::Const(c) if c.0 >= sig.num_constants() => Err(Error::Malformed(format!(
                "constant id {} out of range",
                c.0
            ))),
            Term::Const(_) => Ok(()),
            Term::App(f, args) => {
                if f.0 >= sig.num_functions() {
                    return Err(Error::Malformed(format!(
                        "function id {} out of range",
                        f.0
                    )));
                }
                if sig.fn_arity(*f) != args.len() {
                    return Err(Error::Arity {
                        symbol: sig.fn_name(*f).to_string(),
                        expected: sig.fn_arity(*f),
                        found: args.len(),
                    });
                }
                args.iter().try_for_each(|a| a.check(sig, q))
            }
        }
    }
}

/// Atomic formulas: equality, the order, or a declared relation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Atom {
    Eq(Term, Term),
    Lt(Term, Term),
    Rel(RelId, Vec<Term>),
}

impl Atom {
    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Atom::Eq(a, b) | Atom::Lt(a, b) => vec![a, b],
            Atom::Rel(_, args) => args.iter().collect(),
        }
    }

    fn map_terms(&self, f: &impl Fn(&Term) -> Term) -> Atom {
        match self {
            Atom::Eq(a, b) => Atom::Eq(f(a), f(b)),
            Atom::Lt(a, b) => Atom::Lt(f(a), f(b)),
            Atom::Rel(r, args) => Atom::Rel(*r, args.iter().map(f).collect()),
        }
    }
}

/// Quantifier-free formula.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Atom(Atom::Eq(a, b))
    }

    pub fn lt(a: Term, b: Term) -> Formula {
        Formula::Atom(Atom::Lt(a, b))
    }

    /// `a <= b`, i.e. `a < b | a = b`.
    pub fn le(a: Term, b: Term) -> Formula {
        Formula::Or(vec![Formula::lt(a.clone(), b.clone()), Formula::eq(a, b)])
    }

    pub fn ne(a: Term, b: Term) -> Formula {
        Formula::not(Formula::eq(a, b))
    }

    pub fn rel(r: RelId, args: Vec<Term>) -> Formula {
        Formula::Atom(Atom::Rel(r, args))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Conjunction; collapses the empty and singleton cases.
    pub fn and(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::True,
            1 => parts.pop().unwrap(),
            _ => Formula::And(parts),
        }
    }

    /// Disjunction; collapses the empty and singleton cases.
    pub fn or(mut parts: Vec<Formula>) -> Formula {
        match parts.len() {
            0 => Formula::False,
            1 => parts.pop().unwrap(),
            _ => Formula::Or(parts),
        }
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<usize>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => a.terms().into_iter().for_each(|t| t.collect_vars(out)),
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_vars(out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    /// Applies `f` to every maximal term of every atom.
    pub fn map_terms(&self, f: &impl Fn(&Term) -> Term) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => Formula::Atom(a.map_terms(f)),
            Formula::Not(g) => Formula::not(g.map_terms(f)),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.map_terms(f)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.map_terms(f)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.map_terms(f), b.map_terms(f)),
            Formula::Iff(a, b) => Formula::iff(a.map_terms(f), b.map_terms(f)),
        }
    }

    pub fn map_vars(&self, f: &impl Fn(usize) -> Term) -> Formula {
        self.map_terms(&|t| t.map_vars(f))
    }

    pub fn map_relations(&self, f: &impl Fn(RelId) -> RelId) -> Formula {
        match self {
            Formula::Atom(Atom::Rel(r, args)) => Formula::rel(f(*r), args.clone()),
            Formula::Not(g) => Formula::not(g.map_relations(f)),
            Formula::And(gs) => Formula::And(gs.iter().map(|g| g.map_relations(f)).collect()),
            Formula::Or(gs) => Formula::Or(gs.iter().map(|g| g.map_relations(f)).collect()),
            Formula::Implies(a, b) => Formula::implies(a.map_relations(f), b.map_relations(f)),
            Formula::Iff(a, b) => Formula::iff(a.map_relations(f), b.map_relations(f)),
            other => other.clone(),
        }
    }

    /// Rewrites every symbol through `map`.
    pub fn translate(&self, map: &SymbolMap) -> Formula {
        self.map_terms(&|t| t.translate(map))
            .map_relations(&|r| map.relation(r))
    }

    /// Top-level conjuncts with nested conjunctions flattened.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
            match f {
                Formula::And(fs) => fs.iter().for_each(|g| walk(g, out)),
                Formula::True => {}
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        fn walk<'a>(f: &'a Formula, out: &mut Vec<&'a Atom>) {
            match f {
                Formula::Atom(a) => out.push(a),
                Formula::Not(g) => walk(g, out),
                Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| walk(g, out)),
                Formula::Implies(a, b) | Formula::Iff(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Formula::True | Formula::False => {}
            }
        }
        walk(self, &mut out);
        out
    }

    fn check(&self, sig: &Signature, q: usize) -> Result<()> {
        match self {
            Formula::True | Formula::False => Ok(()),
            Formula::Atom(Atom::Eq(a, b)) | Formula::Atom(Atom::Lt(a, b)) => {
                a.check(sig, q)?;
                b.check(sig, q)
            }
            Formula::Atom(Atom::Rel(r, args)) => {
                if r.0 >= sig.num_relations() {
                    return Err(Error::Malformed(format!(
                        "relation id {} out of range",
                        r.0
                    )));
                }
                if sig.rel_arity(*r) != args.len() {
                    return Err(Error::Arity {
                        symbol: sig.rel_name(*r).to_string(),
                        expected: sig.rel_arity(*r),
                        found: args.len(),
                    });
                }
                args.iter().try_for_each(|a| a.check(sig, q))
            }
            Formula::Not(g) => g.check(sig, q),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().try_for_each(|g| g.check(sig, q)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.check(sig, q)?;
                b.check(sig, q)
            }
        }
    }
}

/// Maps symbol ids of one signature onto terms/ids of another.
///
/// Constants may be mapped to arbitrary terms (the star construction turns
/// constants into unary functions applied to a variable).
#[derive(Clone, Debug, Default)]
pub struct SymbolMap {
    pub functions: Vec<FnId>,
    pub relations: Vec<RelId>,
    pub constants: Vec<Term>,
}

impl SymbolMap {
    fn function(&self, f: FnId) -> FnId {
        self.functions[f.0]
    }

    fn relation(&self, r: RelId) -> RelId {
        self.relations[r.0]
    }

    fn constant(&self, c: ConstId) -> Term {
        self.constants[c.0].clone()
    }

    /// Maps every symbol of `from` onto the symbol with the same name in `to`.
    pub fn by_name(from: &Signature, to: &Signature) -> Result<SymbolMap> {
        let missing =
            |n: &str| Error::Signature(format!("symbol `{n}` missing from target signature"));
        let functions = from
            .functions()
            .map(|f| {
                to.function(from.fn_name(f))
                    .ok_or_else(|| missing(from.fn_name(f)))
            })
            .collect::<Result<_>>()?;
        let relations = from
            .relations()
            .map(|r| {
                to.relation(from.rel_name(r))
                    .ok_or_else(|| missing(from.rel_name(r)))
            })
            .collect::<Result<_>>()?;
        let constants = from
            .constants()
            .map(|c| {
                to.constant(from.const_name(c))
                    .map(Term::Const)
                    .ok_or_else(|| missing(from.const_name(c)))
            })
            .collect::<Result<_>>()?;
        Ok(SymbolMap {
            functions,
            relations,
            constants,
        })
    }
}

/// A universal sentence `forall x1 .. xq . matrix`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    signature: Arc<Signature>,
    q: usize,
    matrix: Formula,
}

impl Sentence {
    pub fn new(signature: Arc<Signature>, q: usize, matrix: Formula) -> Result<Sentence> {
        matrix.check(&signature, q)?;
        Ok(Sentence {
            signature,
            q,
            matrix,
        })
    }

    /// Conjunction of universal sentences over the same signature; the
    /// quantifier block is shared by position.
    pub fn conjunction(
        signature: Arc<Signature>,
        parts: Vec<(usize, Formula)>,
    ) -> Result<Sentence> {
        let q = parts.iter().map(|(q, _)| *q).max().unwrap_or(0);
        let matrix = Formula::and(parts.into_iter().map(|(_, f)| f).collect());
        Sentence::new(signature, q, matrix)
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn signature_arc(&self) -> &Arc<Signature> {
        &self.signature
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn matrix(&self) -> &Formula {
        &self.matrix
    }

    /// The same sentence over the symbols that actually occur in it.
    pub fn restrict_to_used_symbols(&self) -> Sentence {
        let sig = &self.signature;
        let mut used_f = vec![false; sig.num_functions()];
        let mut used_r = vec![false; sig.num_relations()];
        let mut used_c = vec![false; sig.num_constants()];
        fn mark(t: &Term, f: &mut [bool], c: &mut [bool]) {
            match t {
                Term::Var(_) => {}
                Term::Const(k) => c[k.0] = true,
                Term::App(g, args) => {
                    f[g.0] = true;
                    args.iter().for_each(|a| mark(a, f, c));
                }
            }
        }
        for atom in self.matrix.atoms() {
            if let Atom::Rel(r, _) = atom {
                used_r[r.0] = true;
            }
            for t in atom.terms() {
                mark(t, &mut used_f, &mut used_c);
            }
        }
        let mut out = Signature::new();
        let mut map = SymbolMap::default();
        for f in sig.functions() {
            map.functions.push(if used_f[f.0] {
                out.add_function(sig.fn_name(f), sig.fn_arity(f))
                    .expect("names stay unique")
            } else {
                FnId(usize::MAX)
            });
        }
        for r in sig.relations() {
            map.relations.push(if used_r[r.0] {
                out.add_relation(sig.rel_name(r), sig.rel_arity(r))
                    .expect("names stay unique")
            } else {
                RelId(usize::MAX)
            });
        }
        for c in sig.constants() {
            map.constants.push(if used_c[c.0] {
                Term::Const(
                    out.add_constant(sig.const_name(c))
                        .expect("names stay unique"),
                )
            } else {
                Term::Const(ConstId(usize::MAX))
            });
        }
        Sentence {
            signature: Arc::new(out),
            q: self.q,
            matrix: self.matrix.translate(&map),
        }
    }

    /// True when no atom mentions a function symbol of arity > 1.
    pub fn is_unary(&self) -> bool {
        self.signature.is_unary()
    }
}

/// Variable names used when printing: `x1, x2, ...` unless that clashes with
/// a declared symbol.
pub(crate) fn variable_names(sig: &Signature, q: usize) -> Vec<String> {
    let names = sig.names();
    for prefix in ["x", "v", "var"] {
        let cand: Vec<String> = (1..=q).map(|i| format!("{prefix}{i}")).collect();
        if cand.iter().all(|c| !names.contains(c)) {
            return cand;
        }
    }
    (1..=q).map(|i| format!("var_{i}_")).collect()
}

/// Precedence levels used by printer and parser.
fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Iff(..) => 0,
        Formula::Implies(..) => 1,
        Formula::Or(_) => 2,
        Formula::And(_) => 3,
        Formula::Not(_) => 4,
        _ => 5,
    }
}

/// Renders terms and formulas with symbol names.
pub struct Printer<'a> {
    sig: &'a Signature,
    vars: Vec<String>,
}

impl<'a> Printer<'a> {
    pub fn new(sig: &'a Signature, q: usize) -> Self {
        Printer {
            sig,
            vars: variable_names(sig, q),
        }
    }

    pub fn with_names(sig: &'a Signature, vars: Vec<String>) -> Self {
        Printer { sig, vars }
    }

    pub fn var_names(&self) -> &[String] {
        &self.vars
    }

    pub fn term(&self, t: &Term) -> String {
        match t {
            Term::Var(v) => self
                .vars
                .get(*v)
                .cloned()
                .unwrap_or_else(|| format!("?{v}")),
            Term::Const(c) => self.sig.const_name(*c).to_string(),
            Term::App(f, args) => {
                let args: Vec<String> = args.iter().map(|a| self.term(a)).collect();
                format!("{}({})", self.sig.fn_name(*f), args.join(", "))
            }
        }
    }

    pub fn atom(&self, a: &Atom) -> String {
        match a {
            Atom::Eq(x, y) => format!("{} = {}", self.term(x), self.term(y)),
            Atom::Lt(x, y) => format!("{} < {}", self.term(x), self.term(y)),
            Atom::Rel(r, args) => {
                let args: Vec<String> = args.iter().map(|a| self.term(a)).collect();
                format!("{}({})", self.sig.rel_name(*r), args.join(", "))
            }
        }
    }

    fn wrapped(&self, f: &Formula, parens: bool) -> String {
        let s = self.formula(f);
        if parens {
            format!("({s})")
        } else {
            s
        }
    }

    pub fn formula(&self, f: &Formula) -> String {
        let p = precedence(f);
        match f {
            Formula::True => "true".into(),
            Formula::False => "false".into(),
            Formula::Atom(a) => self.atom(a),
            Formula::Not(g) => {
                let needs = !matches!(
                    **g,
                    Formula::Atom(Atom::Rel(..)) | Formula::True | Formula::False | Formula::Not(_)
                );
                format!("!{}", self.wrapped(g, needs))
            }
            Formula::And(gs) | Formula::Or(gs) => {
                let sep = if matches!(f, Formula::And(_)) {
                    " & "
                } else {
                    " | "
                };
                gs.iter()
                    .map(|g| self.wrapped(g, precedence(g) <= p))
                    .collect::<Vec<_>>()
                    .join(sep)
            }
            Formula::Implies(a, b) => format!(
                "{} -> {}",
                self.wrapped(a, precedence(a) <= p),
                self.wrapped(b, precedence(b) < p)
            ),
            Formula::Iff(a, b) => format!(
                "{} <-> {}",
                self.wrapped(a, precedence(a) < p),
                self.wrapped(b, precedence(b) <= p)
            ),
        }
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sig {{")?;
        for (name, arity) in &self.functions {
            write!(f, " fn {name}/{arity};")?;
        }
        for (name, arity) in &self.relations {
            write!(f, " rel {name}/{arity};")?;
        }
        for name in &self.constants {
            write!(f, " const {name};")?;
        }
        write!(f, " }}")
    }
}

/// Canonical text form: signature block, then one `forall` statement with
/// one top-level conjunct per line.
impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.signature)?;
        let printer = Printer::new(&self.signature, self.q);
        write!(f, "forall")?;
        for v in printer.var_names() {
            write!(f, " {v}")?;
        }
        write!(f, " .")?;
        match &self.matrix {
            Formula::And(parts) => {
                for (i, part) in parts.iter().enumerate() {
                    let lead = if i == 0 { "\n    " } else { "\n  & " };
                    write!(f, "{lead}{}", printer.wrapped(part, precedence(part) <= 3))?;
                }
                writeln!(f)
            }
            other => writeln!(f, " {}", printer.formula(other)),
        }
    }
}
