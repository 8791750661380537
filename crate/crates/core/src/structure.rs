//! Finite ordered structures, evaluation and closure.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::syntax::{Atom, ConstId, FnId, Formula, RelId, Sentence, Signature, Symbol, Term};

/// A finite structure on `0..size`, ordered naturally.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FiniteStructure {
    signature: Arc<Signature>,
    size: usize,
    functions: Vec<Vec<usize>>,
    relations: Vec<Vec<bool>>,
    constants: Vec<usize>,
}

fn table_len(size: usize, arity: usize) -> usize {
    (0..arity).fold(1usize, |acc, _| {
        acc.checked_mul(size).expect("table too large")
    })
}

impl FiniteStructure {
    /// A structure of the given size with every function, constant and
    /// relation set to `0` / empty.
    pub fn new(signature: Arc<Signature>, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::Precondition("domains are non-empty".into()));
        }
        let functions = signature
            .functions()
            .map(|f| vec![0; table_len(size, signature.fn_arity(f))])
            .collect();
        let relations = signature
            .relations()
            .map(|r| vec![false; table_len(size, signature.rel_arity(r))])
            .collect();
        let constants = vec![0; signature.num_constants()];
        Ok(FiniteStructure {
            signature,
            size,
            functions,
            relations,
            constants,
        })
    }

    pub fn signature(&self) -> &Signature {
        &self.signature
    }

    pub fn signature_arc(&self) -> &Arc<Signature> {
        &self.signature
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn index(&self, args: &[usize]) -> usize {
        args.iter().fold(0, |acc, &a| acc * self.size + a)
    }

    fn check_elems(&self, elems: &[usize]) -> Result<()> {
        match elems.iter().find(|&&e| e >= self.size) {
            Some(&e) => Err(Error::OutOfDomain(e)),
            None => Ok(()),
        }
    }

    pub fn function(&self, f: FnId, args: &[usize]) -> usize {
        self.functions[f.0][self.index(args)]
    }

    pub fn set_function(&mut self, f: FnId, args: &[usize], value: usize) -> Result<()> {
        if args.len() != self.signature.fn_arity(f) {
            return Err(Error::Arity {
                symbol: self.signature.fn_name(f).into(),
                expected: self.signature.fn_arity(f),
                found: args.len(),
            });
        }
        self.check_elems(args)?;
        self.check_elems(&[value])?;
        let i = self.index(args);
        self.functions[f.0][i] = value;
        Ok(())
    }

    /// The raw table of `f`, indexed by the arguments read as a base-`size`
    /// numeral (most significant first).
    pub fn function_table(&self, f: FnId) -> &[usize] {
        &self.functions[f.0]
    }

    pub fn holds(&self, r: RelId, args: &[usize]) -> bool {
        self.relations[r.0][self.index(args)]
    }

    pub fn set_relation(&mut self, r: RelId, args: &[usize], value: bool) -> Result<()> {
        if args.len() != self.signature.rel_arity(r) {
            return Err(Error::Arity {
                symbol: self.signature.rel_name(r).into(),
                expected: self.signature.rel_arity(r),
                found: args.len(),
            });
        }
        self.check_elems(args)?;
        let i = self.index(args);
        self.relations[r.0][i] = value;
        Ok(())
    }

    pub fn constant(&self, c: ConstId) -> usize {
        self.constants[c.0]
    }

    pub fn set_constant(&mut self, c: ConstId, value: usize) -> Result<()> {
        self.check_elems(&[value])?;
        self.constants[c.0] = value;
        Ok(())
    }

    pub fn eval_term(&self, t: &Term, env: &[usize]) -> usize {
        match t {
            Term::Var(v) => env[*v],
            Term::Const(c) => self.constants[c.0],
            Term::App(f, args) => {
                let idx = args
                    .iter()
                    .fold(0, |acc, a| acc * self.size + self.eval_term(a, env));
                self.functions[f.0][idx]
            }
        }
    }

    pub fn eval_atom(&self, a: &Atom, env: &[usize]) -> bool {
        match a {
            Atom::Eq(x, y) => self.eval_term(x, env) == self.eval_term(y, env),
            Atom::Lt(x, y) => self.eval_term(x, env) < self.eval_term(y, env),
            Atom::Rel(r, args) => {
                let idx = args
                    .iter()
                    .fold(0, |acc, a| acc * self.size + self.eval_term(a, env));
                self.relations[r.0][idx]
            }
        }
    }

    pub fn eval_formula(&self, f: &Formula, env: &[usize]) -> bool {
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Atom(a) => self.eval_atom(a, env),
            Formula::Not(g) => !self.eval_formula(g, env),
            Formula::And(gs) => gs.iter().all(|g| self.eval_formula(g, env)),
            Formula::Or(gs) => gs.iter().any(|g| self.eval_formula(g, env)),
            Formula::Implies(a, b) => !self.eval_formula(a, env) || self.eval_formula(b, env),
            Formula::Iff(a, b) => self.eval_formula(a, env) == self.eval_formula(b, env),
        }
    }

    /// An assignment of the `q` variables falsifying the matrix, if any.
    /// Variables a conjunct does not mention are reported as `0`.
    pub fn counterexample(&self, s: &Sentence) -> Result<Option<Vec<usize>>> {
        if *s.signature() != *self.signature {
            return Err(Error::SignatureMismatch);
        }
        let mut env = vec![0; s.q()];
        for conjunct in s.matrix().conjuncts() {
            let vars: Vec<usize> = conjunct.vars().into_iter().collect();
            env.iter_mut().for_each(|e| *e = 0);
            loop {
                if !self.eval_formula(conjunct, &env) {
                    return Ok(Some(env));
                }
                if !advance(&mut env, &vars, self.size) {
                    break;
                }
            }
        }
        Ok(None)
    }

    /// `M |= s`.
    pub fn satisfies(&self, s: &Sentence) -> Result<bool> {
        Ok(self.counterexample(s)?.is_none())
    }

    /// One application layer: `X ∪ f(X^n) ∪ constants`.
    pub fn closure_step(&self, x: &[bool]) -> Vec<bool> {
        let mut out = x.to_vec();
        for c in &self.constants {
            out[*c] = true;
        }
        let members: Vec<usize> = (0..self.size).filter(|&e| x[e]).collect();
        let mut args = Vec::new();
        for (fi, table) in self.functions.iter().enumerate() {
            let arity = self.signature.fn_arity(FnId(fi));
            for pos in tuples(members.len(), arity) {
                args.clear();
                args.extend(pos.iter().map(|&p| members[p]));
                out[table[self.index(&args)]] = true;
            }
        }
        out
    }

    /// The chain `cl^1(X) ⊆ cl^2(X) ⊆ ...` up to stabilization.
    pub fn closure(&self, x: &BTreeSet<usize>) -> Result<ClosureTrace> {
        let xs: Vec<usize> = x.iter().copied().collect();
        self.check_elems(&xs)?;
        let mut current = vec![false; self.size];
        for &e in x {
            current[e] = true;
        }
        let mut layers = Vec::new();
        loop {
            let next = self.closure_step(&current);
            let stable = next == current && !layers.is_empty();
            if stable {
                break;
            }
            layers.push(to_set(&next));
            current = next;
        }
        Ok(ClosureTrace { layers })
    }

    /// `cl^steps(X)` as a membership vector.
    pub fn closure_within(&self, x: &[usize], steps: usize) -> Vec<bool> {
        let mut current = vec![false; self.size];
        for &e in x {
            current[e] = true;
        }
        for _ in 0..steps {
            let next = self.closure_step(&current);
            if next == current {
                break;
            }
            current = next;
        }
        current
    }

    /// The restriction to a set closed under all functions and constants,
    /// re-indexed in order. Returns the structure and the map from new to
    /// old elements.
    pub fn restrict(&self, set: &[bool]) -> Result<(FiniteStructure, Vec<usize>)> {
        let old: Vec<usize> = (0..self.size).filter(|&e| set[e]).collect();
        if old.is_empty() {
            return Err(Error::Precondition("empty substructure".into()));
        }
        let mut new_of = vec![usize::MAX; self.size];
        for (i, &e) in old.iter().enumerate() {
            new_of[e] = i;
        }
        let mut sub = FiniteStructure::new(self.signature.clone(), old.len())?;
        for c in self.signature.constants() {
            let v = new_of[self.constant(c)];
            if v == usize::MAX {
                return Err(Error::Precondition(
                    "set is not closed under constants".into(),
                ));
            }
            sub.constants[c.0] = v;
        }
        for f in self.signature.functions() {
            for tuple in tuples(old.len(), self.signature.fn_arity(f)) {
                let args: Vec<usize> = tuple.iter().map(|&i| old[i]).collect();
                let v = new_of[self.function(f, &args)];
                if v == usize::MAX {
                    return Err(Error::Precondition(
                        "set is not closed under functions".into(),
                    ));
                }
                let idx = sub.index(&tuple);
                sub.functions[f.0][idx] = v;
            }
        }
        for r in self.signature.relations() {
            for tuple in tuples(old.len(), self.signature.rel_arity(r)) {
                let args: Vec<usize> = tuple.iter().map(|&i| old[i]).collect();
                let idx = sub.index(&tuple);
                sub.relations[r.0][idx] = self.holds(r, &args);
            }
        }
        Ok((sub, old))
    }

    /// The substructure generated by `X` together with its index map.
    pub fn generated_substructure(
        &self,
        x: &BTreeSet<usize>,
    ) -> Result<(FiniteStructure, Vec<usize>)> {
        let trace = self.closure(x)?;
        let mut set = vec![false; self.size];
        for &e in trace.closure() {
            set[e] = true;
        }
        self.restrict(&set)
    }

    /// Canonical text dump.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

/// Advances `env` on the positions `vars` as a base-`size` counter.
pub(crate) fn advance(env: &mut [usize], vars: &[usize], size: usize) -> bool {
    for &v in vars.iter().rev() {
        env[v] += 1;
        if env[v] < size {
            return true;
        }
        env[v] = 0;
    }
    false
}

/// All tuples in `0..size` of the given length, lexicographically.
pub fn tuples(size: usize, len: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = if size == 0 && len > 0 {
        0
    } else {
        table_len(size, len)
    };
    (0..total).map(move |mut n| {
        let mut t = vec![0; len];
        for slot in t.iter_mut().rev() {
            *slot = n % size;
            n /= size;
        }
        t
    })
}

fn to_set(v: &[bool]) -> BTreeSet<usize> {
    v.iter()
        .enumerate()
        .filter(|(_, &b)| b)
        .map(|(i, _)| i)
        .collect()
}

/// Iterated closure of a set: `layers[i]` is `cl^{i+1}(X)`; the last layer
/// is the closure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClosureTrace {
    pub layers: Vec<BTreeSet<usize>>,
}

impl ClosureTrace {
    /// The least `s >= 1` with `cl^{s+1} = cl^s`.
    pub fn stabilization_step(&self) -> usize {
        self.layers.len()
    }

    pub fn closure(&self) -> &BTreeSet<usize> {
        self.layers.last().expect("at least one layer")
    }
}

fn fmt_tuple(t: &[usize]) -> String {
    let parts: Vec<String> = t.iter().map(|e| e.to_string()).collect();
    format!("({})", parts.join(", "))
}

impl fmt::Display for FiniteStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = &self.signature;
        writeln!(f, "domain {}", self.size)?;
        let mut fns: Vec<FnId> = sig.functions().collect();
        fns.sort_by_key(|g| sig.fn_name(*g));
        for g in fns {
            for t in tuples(self.size, sig.fn_arity(g)) {
                writeln!(
                    f,
                    "fn {}: {} -> {}",
                    sig.fn_name(g),
                    fmt_tuple(&t),
                    self.function(g, &t)
                )?;
            }
        }
        let mut rels: Vec<RelId> = sig.relations().collect();
        rels.sort_by_key(|r| sig.rel_name(*r));
        for r in rels {
            for t in tuples(self.size, sig.rel_arity(r)) {
                if self.holds(r, &t) {
                    writeln!(f, "rel {}: {}", sig.rel_name(r), fmt_tuple(&t))?;
                }
            }
        }
        let mut consts: Vec<ConstId> = sig.constants().collect();
        consts.sort_by_key(|c| sig.const_name(*c));
        for c in consts {
            writeln!(f, "const {} = {}", sig.const_name(c), self.constant(c))?;
        }
        Ok(())
    }
}

fn parse_tuple(s: &str) -> Option<Vec<usize>> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    inner.split(',').map(|p| p.trim().parse().ok()).collect()
}

/// Reads a model dump. Lines starting with other keywords are returned
/// unparsed (with their line numbers) for callers that extend the format.
pub fn parse_dump_with_extras(
    sig: Arc<Signature>,
    text: &str,
) -> Result<(FiniteStructure, Vec<(usize, String)>)> {
    let mut model: Option<FiniteStructure> = None;
    let mut extras = Vec::new();
    let mut seen_fn = BTreeSet::new();
    let mut seen_const = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: &str| Error::Dump {
            line: line_no,
            message: message.to_string(),
        };
        let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        if kw == "domain" {
            if model.is_some() {
                return Err(bad("duplicate `domain` line"));
            }
            let k: usize = rest.parse().map_err(|_| bad("expected a domain size"))?;
            model = Some(FiniteStructure::new(sig.clone(), k).map_err(|e| bad(&e.to_string()))?);
            continue;
        }
        if !matches!(kw, "fn" | "rel" | "const") {
            extras.push((line_no, line.to_string()));
            continue;
        }
        let m = model
            .as_mut()
            .ok_or_else(|| bad("`domain` must come first"))?;
        match kw {
            "fn" => {
                let (name, body) = rest
                    .split_once(':')
                    .ok_or_else(|| bad("expected `fn f: (args) -> v`"))?;
                let (args, val) = body.split_once("->").ok_or_else(|| bad("expected `->`"))?;
                let Some(Symbol::Function(g)) = sig.lookup(name.trim()) else {
                    return Err(bad(&format!("`{}` is not a function symbol", name.trim())));
                };
                let args = parse_tuple(args).ok_or_else(|| bad("malformed argument tuple"))?;
                let val: usize = val.trim().parse().map_err(|_| bad("malformed value"))?;
                m.set_function(g, &args, val)
                    .map_err(|e| bad(&e.to_string()))?;
                if !seen_fn.insert((g, args)) {
                    return Err(bad("duplicate function entry"));
                }
            }
            "rel" => {
                let (name, body) = rest
                    .split_once(':')
                    .ok_or_else(|| bad("expected `rel R: (tuple)`"))?;
                let Some(Symbol::Relation(r)) = sig.lookup(name.trim()) else {
                    return Err(bad(&format!("`{}` is not a relation symbol", name.trim())));
                };
                let args = parse_tuple(body).ok_or_else(|| bad("malformed tuple"))?;
                m.set_relation(r, &args, true)
                    .map_err(|e| bad(&e.to_string()))?;
            }
            _ => {
                let (name, val) = rest
                    .split_once('=')
                    .ok_or_else(|| bad("expected `const a = v`"))?;
                let Some(Symbol::Constant(c)) = sig.lookup(name.trim()) else {
                    return Err(bad(&format!("`{}` is not a constant symbol", name.trim())));
                };
                let val: usize = val.trim().parse().map_err(|_| bad("malformed value"))?;
                m.set_constant(c, val).map_err(|e| bad(&e.to_string()))?;
                seen_const.insert(c);
            }
        }
    }
    let m = model.ok_or(Error::Dump {
        line: 0,
        message: "missing `domain` line".into(),
    })?;
    let expected: usize = sig
        .functions()
        .map(|g| table_len(m.size, sig.fn_arity(g)))
        .sum();
    if seen_fn.len() != expected {
        return Err(Error::Dump {
            line: 0,
            message: "function tables are not total".into(),
        });
    }
    if seen_const.len() != sig.num_constants() {
        return Err(Error::Dump {
            line: 0,
            message: "some constant is not assigned".into(),
        });
    }
    Ok((m, extras))
}

/// Reads a model dump, rejecting unknown lines.
pub fn parse_dump(sig: Arc<Signature>, text: &str) -> Result<FiniteStructure> {
    let (m, extras) = parse_dump_with_extras(sig, text)?;
    if let Some((line, text)) = extras.into_iter().next() {
        return Err(Error::Dump {
            line,
            message: format!("unexpected line `{text}`"),
        });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_sentence;

    pub(crate) const EXAMPLE: &str = include_str!("../fixtures/example2.sent");

    fn example_model() -> FiniteStructure {
        let s = parse_sentence(EXAMPLE).unwrap();
        let sig = s.signature_arc().clone();
        let mut m = FiniteStructure::new(sig.clone(), 2).unwrap();
        let p = sig.relation("P").unwrap();
        let i = sig.function("i").unwrap();
        m.set_relation(p, &[0], true).unwrap();
        m.set_function(i, &[0], 0).unwrap();
        m.set_function(i, &[1], 0).unwrap();
        m.set_constant(sig.constant("a").unwrap(), 1).unwrap();
        m
    }

    #[test]
    fn example_two_element_model() {
        let s = parse_sentence(EXAMPLE).unwrap();
        let m = example_model();
        assert!(m.satisfies(&s).unwrap());
        let mut one = FiniteStructure::new(s.signature_arc().clone(), 1).unwrap();
        one.set_relation(s.signature().relation("P").unwrap(), &[0], true)
            .unwrap();
        assert!(!one.satisfies(&s).unwrap());
    }

    #[test]
    fn closure_traces() {
        let m = example_model();
        let t = m.closure(&BTreeSet::new()).unwrap();
        assert_eq!(t.layers, vec![BTreeSet::from([1]), BTreeSet::from([0, 1])]);
        assert_eq!(t.stabilization_step(), 2);
        let all = m.closure(&BTreeSet::from([0, 1])).unwrap();
        assert_eq!(all.stabilization_step(), 1);
        let (sub, map) = m.generated_substructure(&BTreeSet::from([1])).unwrap();
        assert_eq!(sub.size(), 2);
        assert_eq!(map, vec![0, 1]);
    }

    #[test]
    fn relational_closure_is_identity() {
        let sig = Arc::new(Signature::new().with_relation("R", 2).unwrap());
        let m = FiniteStructure::new(sig, 4).unwrap();
        let t = m.closure(&BTreeSet::from([2])).unwrap();
        assert_eq!(t.layers, vec![BTreeSet::from([2])]);
        let (sub, map) = m.generated_substructure(&BTreeSet::from([2])).unwrap();
        assert_eq!((sub.size(), map), (1, vec![2]));
    }

    #[test]
    fn dump_round_trip() {
        let m = example_model();
        let text = m.dump();
        assert_eq!(
            text,
            "domain 2\nfn i: (0) -> 0\nfn i: (1) -> 0\nrel P: (0)\nconst a = 1\n"
        );
        let back = parse_dump(m.signature_arc().clone(), &text).unwrap();
        assert_eq!(back, m);
        assert!(parse_dump(m.signature_arc().clone(), "domain 2\nconst a = 1\n").is_err());
        assert!(parse_dump(m.signature_arc().clone(), "domain 2\nfn i: (0) -> 5\n").is_err());
    }

    #[test]
    fn binary_closure_step() {
        let sig = Arc::new(Signature::new().with_function("f", 2).unwrap());
        let mut m = FiniteStructure::new(sig.clone(), 4).unwrap();
        let f = sig.function("f").unwrap();
        for t in tuples(4, 2) {
            m.set_function(f, &t, (t[0] + t[1]).min(3)).unwrap();
        }
        let t = m.closure(&BTreeSet::from([1])).unwrap();
        assert_eq!(
            t.layers,
            vec![BTreeSet::from([1, 2]), BTreeSet::from([1, 2, 3])]
        );
    }
}
