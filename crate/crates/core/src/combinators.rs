//! Sentence constructions: star, star-ψ, the `φ_n` tower, `Φ`, `S_n`,
//! `ψ′_n` and `T_n`, each with its closure bound.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::syntax::{FnId, Formula, RelId, Sentence, Signature, SymbolMap, Term};

/// A constructed sentence with its closure bound and how it was built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CombinatorResult {
    pub sentence: Sentence,
    /// Closure bound.
    pub n: usize,
    /// Short name, e.g. `star_psi(theta, beta)`.
    pub name: String,
    /// Construction stages, innermost first.
    pub provenance: Vec<String>,
}

impl CombinatorResult {
    /// Wraps a sentence given with its closure bound.
    pub fn base(name: &str, sentence: Sentence, n: usize) -> CombinatorResult {
        CombinatorResult {
            sentence,
            n,
            name: name.to_string(),
            provenance: vec![format!("{name}: given, n = {n}")],
        }
    }

    fn derived(
        name: String,
        sentence: Sentence,
        n: usize,
        inputs: &[&CombinatorResult],
    ) -> CombinatorResult {
        let mut provenance: Vec<String> = inputs
            .iter()
            .flat_map(|r| r.provenance.iter().cloned())
            .collect();
        provenance.push(format!("{name}: n = {n}"));
        CombinatorResult {
            sentence,
            n,
            name,
            provenance,
        }
    }
}

impl fmt::Display for CombinatorResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.provenance {
            writeln!(f, "# {line}")?;
        }
        let text = self.sentence.to_string();
        let (sig, body) = text.split_once('\n').unwrap_or((&text, ""));
        write!(f, "{sig}\nsteps {};\n{body}", self.n)
    }
}

fn var(i: usize) -> Term {
    Term::Var(i)
}

fn vars(range: std::ops::Range<usize>) -> Vec<Term> {
    range.map(var).collect()
}

fn le(a: Term, b: Term) -> Formula {
    Formula::le(a, b)
}

/// `t = min(xs)`.
fn is_min(t: Term, xs: &[Term]) -> Formula {
    Formula::or(
        xs.iter()
            .map(|x| {
                let mut parts = vec![Formula::eq(t.clone(), x.clone())];
                parts.extend(xs.iter().map(|y| le(x.clone(), y.clone())));
                Formula::and(parts)
            })
            .collect(),
    )
}

/// `(x <= y | y <= x) & ((x <= y & y <= x) <-> x = y) & ((x <= y & y <= z) -> x <= z)`.
fn linear_order() -> (usize, Formula) {
    let (x, y, z) = (var(0), var(1), var(2));
    let f = Formula::and(vec![
        Formula::or(vec![le(x.clone(), y.clone()), le(y.clone(), x.clone())]),
        Formula::iff(
            Formula::and(vec![le(x.clone(), y.clone()), le(y.clone(), x.clone())]),
            Formula::eq(x.clone(), y.clone()),
        ),
        Formula::implies(
            Formula::and(vec![le(x.clone(), y.clone()), le(y, z.clone())]),
            le(x, z),
        ),
    ]);
    (3, f)
}

/// Accumulates a signature and universal conjuncts.
struct Builder {
    sig: Signature,
    parts: Vec<(usize, Formula)>,
}

impl Builder {
    fn new() -> Builder {
        Builder {
            sig: Signature::new(),
            parts: Vec::new(),
        }
    }

    fn fresh(&self, base: &str) -> String {
        if self.sig.lookup(base).is_none() {
            return base.to_string();
        }
        (1..)
            .map(|i| format!("{base}_{i}"))
            .find(|n| self.sig.lookup(n).is_none())
            .expect("unbounded")
    }

    fn function(&mut self, base: &str, arity: usize) -> FnId {
        let name = self.fresh(base);
        self.sig.add_function(&name, arity).expect("fresh name")
    }

    fn relation(&mut self, base: &str, arity: usize) -> RelId {
        let name = self.fresh(base);
        self.sig.add_relation(&name, arity).expect("fresh name")
    }

    /// Adds a symbol that must not exist yet.
    fn exact_function(&mut self, name: &str, arity: usize) -> Result<FnId> {
        if self.sig.lookup(name).is_some() {
            return Err(Error::SymbolClash(name.to_string()));
        }
        self.sig.add_function(name, arity)
    }

    /// Copies every symbol of `from`; any name already present is a clash.
    fn import(&mut self, from: &Signature) -> Result<SymbolMap> {
        let mut map = SymbolMap::default();
        for f in from.functions() {
            map.functions
                .push(self.exact_function(from.fn_name(f), from.fn_arity(f))?);
        }
        for r in from.relations() {
            let name = from.rel_name(r);
            if self.sig.lookup(name).is_some() {
                return Err(Error::SymbolClash(name.to_string()));
            }
            map.relations
                .push(self.sig.add_relation(name, from.rel_arity(r))?);
        }
        for c in from.constants() {
            let name = from.const_name(c);
            if self.sig.lookup(name).is_some() {
                return Err(Error::SymbolClash(name.to_string()));
            }
            map.constants
                .push(Term::Const(self.sig.add_constant(name)?));
        }
        Ok(map)
    }

    fn add(&mut self, q: usize, f: Formula) {
        self.parts.push((q, f));
    }

    fn finish(self) -> Result<Sentence> {
        Sentence::conjunction(Arc::new(self.sig), self.parts)
    }
}

/// Symbols of an imported sentence, in the builder's numbering.
struct Imported {
    map: SymbolMap,
    functions: Vec<(FnId, usize)>,
    relations: Vec<(RelId, usize)>,
    constants: Vec<Term>,
}

impl Imported {
    fn new(map: SymbolMap, from: &Signature) -> Imported {
        Imported {
            functions: from
                .functions()
                .map(|f| (map.functions[f.0], from.fn_arity(f)))
                .collect(),
            relations: from
                .relations()
                .map(|r| (map.relations[r.0], from.rel_arity(r)))
                .collect(),
            constants: from
                .constants()
                .map(|c| map.constants[c.0].clone())
                .collect(),
            map,
        }
    }
}

/// `guard(x_0) & ... & guard(x_{k-1})`.
fn all_in(k: usize, guard: &impl Fn(Term) -> Formula) -> Formula {
    Formula::and((0..k).map(|i| guard(var(i))).collect())
}

/// Closure of a definable set under imported symbols, trivialization to
/// the first argument outside it, relations inside it, and the imported
/// sentence relativized to it.
fn embed_on(b: &mut Builder, s: &Sentence, imp: &Imported, guard: &impl Fn(Term) -> Formula) {
    for &(f, k) in &imp.functions {
        let xs = vars(0..k);
        b.add(
            k,
            Formula::implies(all_in(k, guard), guard(Term::app(f, xs.clone()))),
        );
        let outside = Formula::or((0..k).map(|i| Formula::not(guard(var(i)))).collect());
        b.add(
            k,
            Formula::implies(outside, Formula::eq(Term::app(f, xs), var(0))),
        );
    }
    for &(r, k) in &imp.relations {
        b.add(
            k,
            Formula::implies(Formula::rel(r, vars(0..k)), all_in(k, guard)),
        );
    }
    for c in &imp.constants {
        b.add(0, guard(c.clone()));
    }
    let q = s.q();
    b.add(
        q,
        Formula::implies(all_in(q, guard), s.matrix().translate(&imp.map)),
    );
}

/// Injection from `{y in S | y < x}` into `T` for each `x` in `S`, via a
/// fresh binary function, trivial elsewhere.
fn injection(
    b: &mut Builder,
    name: &str,
    from: &impl Fn(Term) -> Formula,
    into: &impl Fn(Term) -> Formula,
) -> FnId {
    let t = b.function(name, 2);
    add_injection_clauses(b, t, from, into);
    t
}

struct Star {
    builder: Builder,
    segment: FnId,
}

fn star_builder(phi: &Sentence) -> Result<Star> {
    let sig = phi.signature();
    let mut b = Builder::new();
    let mut map = SymbolMap::default();
    for f in sig.functions() {
        map.functions
            .push(b.exact_function(sig.fn_name(f), sig.fn_arity(f))?);
    }
    let mut relations = Vec::new();
    for r in sig.relations() {
        let name = sig.rel_name(r);
        if b.sig.lookup(name).is_some() {
            return Err(Error::SymbolClash(name.to_string()));
        }
        relations.push(b.sig.add_relation(name, sig.rel_arity(r))?);
    }
    map.relations = relations;
    let mut e_fns = Vec::new();
    for c in sig.constants() {
        e_fns.push(b.exact_function(sig.const_name(c), 1)?);
    }
    let i = b.exact_function("I", 1)?;
    let seg = |t: Term| Term::app(i, vec![t]);
    let (x, y) = (var(0), var(1));
    // (1) linear order
    let (q, lo) = linear_order();
    b.add(q, lo);
    // (2) segments
    b.add(
        2,
        Formula::and(vec![
            le(seg(x.clone()), x.clone()),
            Formula::implies(le(x.clone(), y.clone()), le(seg(x.clone()), seg(y.clone()))),
            Formula::implies(
                Formula::and(vec![
                    le(seg(x.clone()), y.clone()),
                    le(y.clone(), x.clone()),
                ]),
                Formula::eq(seg(y.clone()), seg(x.clone())),
            ),
        ]),
    );
    // (3) constants become functions constant on segments (and valued in them)
    for &e in &e_fns {
        let ex = Term::app(e, vec![x.clone()]);
        b.add(
            2,
            Formula::and(vec![
                Formula::implies(
                    Formula::eq(seg(x.clone()), seg(y.clone())),
                    Formula::eq(ex.clone(), Term::app(e, vec![y.clone()])),
                ),
                Formula::eq(seg(ex), seg(x.clone())),
            ]),
        );
    }
    // (4), (5) functions: trivial across segments, closed within them
    for f in sig.functions() {
        let k = sig.fn_arity(f);
        let xs = vars(0..k);
        let fx = Term::app(map.functions[f.0], xs.clone());
        let mut differ = Vec::new();
        let mut same = Vec::new();
        for a in 0..k {
            for c in a + 1..k {
                differ.push(Formula::ne(seg(var(a)), seg(var(c))));
                same.push(Formula::eq(seg(var(a)), seg(var(c))));
            }
        }
        b.add(
            k,
            Formula::implies(Formula::or(differ), is_min(fx.clone(), &xs)),
        );
        if k > 0 {
            b.add(
                k,
                Formula::implies(Formula::and(same), Formula::eq(seg(fx), seg(var(0)))),
            );
        }
    }
    // (6) every segment is a model
    map.constants = e_fns.iter().map(|&e| Term::app(e, vec![var(0)])).collect();
    let q = phi.q();
    let guard = Formula::and(
        (1..=q)
            .map(|v| Formula::eq(seg(var(v)), seg(var(0))))
            .collect(),
    );
    let body = phi.matrix().map_vars(&|v| var(v + 1)).translate(&map);
    b.add(q + 1, Formula::implies(guard, body));
    Ok(Star {
        builder: b,
        segment: i,
    })
}

/// Direct sums of models of `phi`: segments marked by `I`, constants
/// turned into unary functions.
pub fn star(phi: &CombinatorResult) -> Result<CombinatorResult> {
    let st = star_builder(&phi.sentence)?;
    let sentence = st.builder.finish()?;
    Ok(CombinatorResult::derived(
        format!("star({})", phi.name),
        sentence,
        phi.n + 1,
        &[phi],
    ))
}

/// Sums of models of `phi` ordered along a model of `psi`.
pub fn star_psi(phi: &CombinatorResult, psi: &CombinatorResult) -> Result<CombinatorResult> {
    let Star {
        builder: mut b,
        segment: i,
    } = star_builder(&phi.sentence)?;
    let psig = psi.sentence.signature();
    let map = b.import(psig)?;
    let imp = Imported::new(map, psig);
    let p = b.relation("P", 1);
    let in_p = |t: Term| Formula::rel(p, vec![t]);
    let x = var(0);
    // (2)
    b.add(
        1,
        Formula::iff(
            in_p(x.clone()),
            Formula::eq(Term::app(i, vec![x.clone()]), x),
        ),
    );
    for &(t, k) in &imp.functions {
        let xs = vars(0..k);
        // (3)
        b.add(
            k,
            Formula::implies(all_in(k, &in_p), in_p(Term::app(t, xs.clone()))),
        );
        // (5)
        let outside = Formula::or((0..k).map(|a| Formula::not(in_p(var(a)))).collect());
        b.add(
            k,
            Formula::implies(outside, is_min(Term::app(t, xs.clone()), &xs)),
        );
    }
    // (4)
    for c in &imp.constants {
        b.add(0, in_p(c.clone()));
    }
    // (6)
    for &(r, k) in &imp.relations {
        b.add(
            k,
            Formula::implies(Formula::rel(r, vars(0..k)), all_in(k, &in_p)),
        );
    }
    // (7)
    let q = psi.sentence.q();
    b.add(
        q,
        Formula::implies(all_in(q, &in_p), psi.sentence.matrix().translate(&imp.map)),
    );
    let sentence = b.finish()?;
    Ok(CombinatorResult::derived(
        format!("star_psi({}, {})", phi.name, psi.name),
        sentence,
        phi.n + psi.n + 1,
        &[phi, psi],
    ))
}

fn level_names(k: usize) -> (String, String) {
    if k == 1 {
        ("Q".into(), "g".into())
    } else {
        (format!("Q_{k}"), format!("g_{k}"))
    }
}

/// One level of the `φ_n` tower: an initial segment `Q` carrying the
/// previous level, and an injection of each proper initial segment of the
/// complement into `Q`.
fn wrap_level(prev: &CombinatorResult, k: usize) -> Result<CombinatorResult> {
    let (qn, gn) = level_names(k);
    let psig = prev.sentence.signature();
    let mut b = Builder::new();
    let map = b.import(psig)?;
    let imp = Imported::new(map, psig);
    if b.sig.lookup(&qn).is_some() || b.sig.lookup(&gn).is_some() {
        return Err(Error::SymbolClash(qn));
    }
    let q = b.sig.add_relation(&qn, 1)?;
    let in_q = |t: Term| Formula::rel(q, vec![t]);
    let (x, y) = (var(0), var(1));
    // (1)
    let (n3, lo) = linear_order();
    b.add(n3, lo);
    // (2)
    b.add(
        2,
        Formula::implies(
            Formula::and(vec![in_q(x.clone()), Formula::not(in_q(y.clone()))]),
            Formula::lt(x, y),
        ),
    );
    // (3), (4)
    for &(f, a) in &imp.functions {
        b.add(
            a,
            Formula::implies(all_in(a, &in_q), in_q(Term::app(f, vars(0..a)))),
        );
    }
    // (5), (6)
    for &(f, a) in &imp.functions {
        let outside = Formula::or((0..a).map(|i| Formula::not(in_q(var(i)))).collect());
        b.add(
            a,
            Formula::implies(outside, Formula::eq(Term::app(f, vars(0..a)), var(0))),
        );
    }
    // (7)
    let qp = prev.sentence.q();
    b.add(
        qp,
        Formula::implies(
            all_in(qp, &in_q),
            prev.sentence.matrix().translate(&imp.map),
        ),
    );
    // (8)-(10)
    let not_q = |t: Term| Formula::not(in_q(t));
    let g = b.sig.add_function(&gn, 2)?;
    add_injection_clauses(&mut b, g, &not_q, &in_q);
    let sentence = b.finish()?;
    let name = if k == 1 {
        "phi1".to_string()
    } else {
        format!("phi_{k}")
    };
    Ok(CombinatorResult::derived(
        name,
        sentence,
        prev.n + 1,
        &[prev],
    ))
}

fn add_injection_clauses(
    b: &mut Builder,
    t: FnId,
    from: &impl Fn(Term) -> Formula,
    into: &impl Fn(Term) -> Formula,
) {
    let (x, y, z) = (var(0), var(1), var(2));
    let app = |a: &Term, c: &Term| Term::app(t, vec![a.clone(), c.clone()]);
    b.add(
        2,
        Formula::implies(
            Formula::and(vec![
                from(x.clone()),
                from(y.clone()),
                Formula::lt(y.clone(), x.clone()),
            ]),
            into(app(&x, &y)),
        ),
    );
    b.add(
        3,
        Formula::implies(
            Formula::and(vec![
                from(x.clone()),
                from(y.clone()),
                from(z.clone()),
                Formula::lt(y.clone(), z.clone()),
                Formula::lt(z.clone(), x.clone()),
            ]),
            Formula::ne(app(&x, &y), app(&x, &z)),
        ),
    );
    b.add(
        2,
        Formula::implies(
            Formula::or(vec![
                Formula::not(from(x.clone())),
                Formula::not(from(y.clone())),
                Formula::not(Formula::lt(y.clone(), x.clone())),
            ]),
            Formula::eq(app(&x, &y), x),
        ),
    );
}

fn check_phi0(phi0: &CombinatorResult) -> Result<()> {
    let sig = phi0.sentence.signature();
    let ok = sig.num_functions() == 3
        && sig.num_relations() == 1
        && sig.num_constants() == 0
        && sig.relation("P").is_some_and(|r| sig.rel_arity(r) == 1)
        && sig.function("f").is_some_and(|f| sig.fn_arity(f) == 2)
        && ["p1", "p2"]
            .iter()
            .all(|n| sig.function(n).is_some_and(|f| sig.fn_arity(f) == 1));
    if ok {
        Ok(())
    } else {
        Err(Error::Signature(
            "the base sentence must have signature {<, P, f/2, p1/1, p2/1}".into(),
        ))
    }
}

/// The first level of the tower over `phi0`.
pub fn build_phi1(phi0: &CombinatorResult) -> Result<CombinatorResult> {
    check_phi0(phi0)?;
    wrap_level(phi0, 1)
}

/// `φ_n`: `n` levels over `phi0` (`φ_0 = phi0`).
pub fn build_phi_n(phi0: &CombinatorResult, n: usize) -> Result<CombinatorResult> {
    check_phi0(phi0)?;
    let mut cur = phi0.clone();
    for k in 1..=n {
        cur = wrap_level(&cur, k)?;
    }
    Ok(cur)
}

/// The symbols of `Φ` other than `<`.
pub const PHI_SYMBOLS: [&str; 17] = [
    "P0", "P1", "P2", "P3", "Q", "p1", "p2", "f", "g", "prec", "p", "I", "i", "j", "h", "k", "l",
];

/// The sentence `Φ` built over `φ_1 = build_phi1(phi0)`; the base sentence
/// must not use `P` (it does not occur in `Φ`'s signature).
pub fn build_big_phi(phi0: &CombinatorResult) -> Result<CombinatorResult> {
    let phi1 = build_phi1(phi0)?;
    if phi0
        .sentence
        .matrix()
        .atoms()
        .iter()
        .any(|a| matches!(a, crate::syntax::Atom::Rel(..)))
    {
        return Err(Error::Signature(
            "the base sentence of the tree encoding must not use P".into(),
        ));
    }
    let inner = phi1.sentence.restrict_to_used_symbols();
    let mut b = Builder::new();
    let p: Vec<RelId> = (0..4)
        .map(|i| b.sig.add_relation(&format!("P{i}"), 1).expect("fresh"))
        .collect();
    let map = b.import(inner.signature())?;
    let imp = Imported::new(map, inner.signature());
    let qrel = b
        .sig
        .relation("Q")
        .ok_or_else(|| Error::Signature("Q missing".into()))?;
    let prec = b.sig.add_relation("prec", 2)?;
    let pf = b.sig.add_function("p", 2)?;
    let ifn = b.sig.add_function("I", 1)?;
    let i_inj = b.sig.add_function("i", 1)?;
    let j_inc = b.sig.add_function("j", 1)?;
    let h = b.sig.add_function("h", 2)?;
    let k = b.sig.add_function("k", 2)?;
    let l = b.sig.add_function("l", 2)?;

    let (x, y, z) = (var(0), var(1), var(2));
    let pi = |n: usize, t: Term| Formula::rel(p[n], vec![t]);
    let i_of = |t: Term| Term::app(ifn, vec![t]);
    let precf = |a: Term, c: Term| Formula::rel(prec, vec![a, c]);
    let app2 = |f: FnId, a: Term, c: Term| Term::app(f, vec![a, c]);
    let low = |t: Term| Formula::or(vec![pi(0, t.clone()), pi(1, t)]);

    // Φ1: four successive segments
    let (n3, lo) = linear_order();
    b.add(n3, lo);
    let mut order = Vec::new();
    for a in 0..4 {
        for c in a + 1..4 {
            order.push(Formula::implies(
                Formula::and(vec![pi(a, x.clone()), pi(c, y.clone())]),
                Formula::lt(x.clone(), y.clone()),
            ));
        }
    }
    b.add(2, Formula::and(order));

    // Φ2: φ_1 on P0 ∪ P1 with Q = P0
    b.add(
        1,
        Formula::iff(Formula::rel(qrel, vec![x.clone()]), pi(0, x.clone())),
    );
    for &(f, a) in &imp.functions {
        b.add(
            a,
            Formula::implies(all_in(a, &low), low(Term::app(f, vars(0..a)))),
        );
    }
    for &(f, a) in &imp.functions {
        let outside = Formula::or((0..a).map(|v| Formula::not(low(var(v)))).collect());
        b.add(
            a,
            Formula::implies(outside, Formula::eq(Term::app(f, vars(0..a)), var(0))),
        );
    }
    let q1 = inner.q();
    b.add(
        q1,
        Formula::implies(all_in(q1, &low), inner.matrix().translate(&imp.map)),
    );

    // Φ3: tree order on P2
    b.add(
        2,
        Formula::implies(
            precf(x.clone(), y.clone()),
            Formula::and(vec![pi(2, x.clone()), pi(2, y.clone())]),
        ),
    );
    let preceq =
        |a: Term, c: Term| Formula::or(vec![precf(a.clone(), c.clone()), Formula::eq(a, c)]);
    b.add(
        3,
        Formula::and(vec![
            Formula::iff(
                Formula::and(vec![
                    preceq(x.clone(), y.clone()),
                    preceq(y.clone(), x.clone()),
                ]),
                Formula::eq(x.clone(), y.clone()),
            ),
            Formula::implies(
                Formula::and(vec![
                    precf(x.clone(), y.clone()),
                    precf(y.clone(), z.clone()),
                ]),
                precf(x.clone(), z.clone()),
            ),
        ]),
    );
    b.add(
        2,
        Formula::implies(
            precf(x.clone(), y.clone()),
            Formula::lt(x.clone(), y.clone()),
        ),
    );

    // Φ4: levels
    let in2 = |t: Term| pi(2, t);
    let both2 = Formula::and(vec![in2(x.clone()), in2(y.clone())]);
    b.add(
        2,
        Formula::implies(
            both2.clone(),
            Formula::and(vec![
                le(i_of(y.clone()), y.clone()),
                Formula::implies(
                    le(y.clone(), x.clone()),
                    le(i_of(y.clone()), i_of(x.clone())),
                ),
                Formula::implies(
                    Formula::and(vec![
                        le(i_of(y.clone()), x.clone()),
                        le(x.clone(), y.clone()),
                    ]),
                    Formula::eq(i_of(x.clone()), i_of(y.clone())),
                ),
            ]),
        ),
    );
    b.add(
        2,
        Formula::implies(
            both2.clone(),
            Formula::implies(
                precf(x.clone(), y.clone()),
                Formula::lt(i_of(x.clone()), i_of(y.clone())),
            ),
        ),
    );
    b.add(
        3,
        Formula::implies(
            Formula::and(vec![in2(x.clone()), in2(y.clone()), in2(z.clone())]),
            Formula::implies(
                Formula::and(vec![
                    precf(x.clone(), y.clone()),
                    precf(z.clone(), y.clone()),
                    Formula::eq(i_of(x.clone()), i_of(z.clone())),
                ]),
                Formula::eq(x.clone(), z.clone()),
            ),
        ),
    );
    let pxy = app2(pf, i_of(x.clone()), y.clone());
    b.add(
        2,
        Formula::implies(
            both2,
            Formula::implies(
                Formula::lt(i_of(x.clone()), i_of(y.clone())),
                Formula::and(vec![
                    Formula::eq(i_of(pxy.clone()), i_of(x.clone())),
                    precf(pxy, y.clone()),
                ]),
            ),
        ),
    );
    b.add(
        2,
        Formula::implies(
            Formula::or(vec![
                Formula::not(in2(x.clone())),
                Formula::not(in2(y.clone())),
                Formula::ne(i_of(x.clone()), x.clone()),
                le(i_of(y.clone()), i_of(x.clone())),
            ]),
            Formula::eq(app2(pf, x.clone(), y.clone()), x.clone()),
        ),
    );
    b.add(
        1,
        Formula::implies(
            Formula::not(in2(x.clone())),
            Formula::eq(i_of(x.clone()), x.clone()),
        ),
    );

    // Φ5: countable levels, height at most ω_1
    let un = |f: FnId, t: Term| Term::app(f, vec![t]);
    b.add(
        1,
        Formula::implies(in2(x.clone()), pi(0, un(i_inj, x.clone()))),
    );
    b.add(
        2,
        Formula::implies(
            Formula::and(vec![
                in2(x.clone()),
                in2(y.clone()),
                Formula::eq(i_of(x.clone()), i_of(y.clone())),
                Formula::ne(x.clone(), y.clone()),
            ]),
            Formula::ne(un(i_inj, x.clone()), un(i_inj, y.clone())),
        ),
    );
    b.add(
        1,
        Formula::implies(in2(x.clone()), pi(1, un(j_inc, x.clone()))),
    );
    b.add(
        2,
        Formula::implies(
            Formula::and(vec![
                in2(x.clone()),
                in2(y.clone()),
                Formula::lt(x.clone(), y.clone()),
            ]),
            Formula::lt(un(j_inc, x.clone()), un(j_inc, y.clone())),
        ),
    );
    b.add(
        1,
        Formula::implies(
            Formula::not(in2(x.clone())),
            Formula::eq(un(i_inj, x.clone()), x.clone()),
        ),
    );
    b.add(
        1,
        Formula::implies(
            Formula::not(in2(x.clone())),
            Formula::eq(un(j_inc, x.clone()), x.clone()),
        ),
    );

    // Φ6: branches
    let in3 = |t: Term| pi(3, t);
    let hx = |a: Term, c: Term| app2(h, a, c);
    b.add(
        2,
        Formula::implies(
            Formula::and(vec![in2(x.clone()), in3(y.clone())]),
            Formula::and(vec![
                in2(hx(i_of(x.clone()), y.clone())),
                Formula::eq(i_of(hx(i_of(x.clone()), y.clone())), i_of(x.clone())),
            ]),
        ),
    );
    b.add(
        3,
        Formula::implies(
            Formula::and(vec![
                in2(x.clone()),
                in2(y.clone()),
                in3(z.clone()),
                Formula::lt(i_of(x.clone()), i_of(y.clone())),
            ]),
            precf(
                hx(i_of(x.clone()), z.clone()),
                hx(i_of(y.clone()), z.clone()),
            ),
        ),
    );
    b.add(
        2,
        Formula::implies(
            Formula::or(vec![
                Formula::not(in2(x.clone())),
                Formula::not(in3(y.clone())),
                Formula::ne(x.clone(), i_of(x.clone())),
            ]),
            Formula::eq(hx(x.clone(), y.clone()), x.clone()),
        ),
    );
    let kxy = app2(k, x.clone(), y.clone());
    let distinct3 = Formula::and(vec![
        in3(x.clone()),
        in3(y.clone()),
        Formula::ne(x.clone(), y.clone()),
    ]);
    b.add(
        2,
        Formula::implies(
            distinct3.clone(),
            Formula::and(vec![
                Formula::eq(i_of(kxy.clone()), kxy.clone()),
                in2(kxy.clone()),
            ]),
        ),
    );
    b.add(
        2,
        Formula::implies(
            distinct3,
            Formula::ne(hx(kxy.clone(), x.clone()), hx(kxy.clone(), y.clone())),
        ),
    );
    b.add(
        2,
        Formula::implies(
            Formula::or(vec![
                Formula::not(in3(x.clone())),
                Formula::not(in3(y.clone())),
                Formula::eq(x.clone(), y.clone()),
            ]),
            Formula::eq(kxy, x.clone()),
        ),
    );

    // Φ7: injections of initial segments of P3 into P2
    add_injection_clauses(&mut b, l, &in3, &in2);

    let sentence = b.finish()?;
    Ok(CombinatorResult::derived(
        "Phi".into(),
        sentence,
        7,
        &[&phi1],
    ))
}

fn segments(b: &mut Builder, names: &[&str]) -> Vec<RelId> {
    let rs: Vec<RelId> = names.iter().map(|n| b.relation(n, 1)).collect();
    let x = var(0);
    let y = var(1);
    b.add(
        1,
        Formula::or(
            rs.iter()
                .map(|&r| Formula::rel(r, vec![x.clone()]))
                .collect(),
        ),
    );
    for a in 0..rs.len() {
        for c in a + 1..rs.len() {
            b.add(
                1,
                Formula::not(Formula::and(vec![
                    Formula::rel(rs[a], vec![x.clone()]),
                    Formula::rel(rs[c], vec![x.clone()]),
                ])),
            );
            b.add(
                2,
                Formula::implies(
                    Formula::and(vec![
                        Formula::rel(rs[a], vec![x.clone()]),
                        Formula::rel(rs[c], vec![y.clone()]),
                    ]),
                    Formula::lt(x.clone(), y.clone()),
                ),
            );
        }
    }
    rs
}

/// `S_n(φ)`: three successive segments carrying `φ_n`, `φ`, and a segment
/// whose proper initial segments inject into the second.
pub fn build_sn(
    phi: &CombinatorResult,
    phi0: &CombinatorResult,
    n: usize,
) -> Result<CombinatorResult> {
    let phin = build_phi_n(phi0, n)?;
    let mut b = Builder::new();
    let map_n = b.import(phin.sentence.signature())?;
    let imp_n = Imported::new(map_n, phin.sentence.signature());
    let map = b.import(phi.sentence.signature())?;
    let imp = Imported::new(map, phi.sentence.signature());
    let (n3, lo) = linear_order();
    b.add(n3, lo);
    let rs = segments(&mut b, &["R1", "R2", "R3"]);
    let r1 = |t: Term| Formula::rel(rs[0], vec![t]);
    let r2 = |t: Term| Formula::rel(rs[1], vec![t]);
    let r3 = |t: Term| Formula::rel(rs[2], vec![t]);
    // the restriction of R1 to S(φ_n) is a model of φ_n
    embed_on(&mut b, &phin.sentence, &imp_n, &r1);
    // the restriction of R2 to S(φ) is a model of φ
    embed_on(&mut b, &phi.sentence, &imp, &r2);
    // s is strictly increasing from R2 into R1, s(x) = x elsewhere
    let s = b.function("s", 1);
    let (x, y) = (var(0), var(1));
    let sx = |t: Term| Term::app(s, vec![t]);
    b.add(1, Formula::implies(r2(x.clone()), r1(sx(x.clone()))));
    b.add(
        2,
        Formula::implies(
            Formula::and(vec![
                r2(x.clone()),
                r2(y.clone()),
                Formula::lt(x.clone(), y.clone()),
            ]),
            Formula::lt(sx(x.clone()), sx(y.clone())),
        ),
    );
    b.add(
        1,
        Formula::implies(Formula::not(r2(x.clone())), Formula::eq(sx(x.clone()), x)),
    );
    // t injects {x in R3 | x < a} into R2 for every a in R3
    injection(&mut b, "t", &r3, &r2);
    let sentence = b.finish()?;
    Ok(CombinatorResult::derived(
        format!("S_{n}({})", phi.name),
        sentence,
        phi.n + phin.n + 2,
        &[phi, &phin],
    ))
}

/// `ψ′_n`: an initial segment `R` carrying `φ_{n-1}`, its complement
/// carrying `ψ`, and injections of proper initial segments of `¬R` into
/// `R`.
pub fn build_psi_prime_n(
    psi: &CombinatorResult,
    phi0: &CombinatorResult,
    n: usize,
) -> Result<CombinatorResult> {
    if n == 0 {
        return Err(Error::Precondition("psi' needs n >= 1".into()));
    }
    let prev = build_phi_n(phi0, n - 1)?;
    let mut b = Builder::new();
    let map_p = b.import(prev.sentence.signature())?;
    let imp_p = Imported::new(map_p, prev.sentence.signature());
    let map = b.import(psi.sentence.signature())?;
    let imp = Imported::new(map, psi.sentence.signature());
    let (n3, lo) = linear_order();
    b.add(n3, lo);
    let r = b.relation("R", 1);
    let in_r = |t: Term| Formula::rel(r, vec![t]);
    let not_r = |t: Term| Formula::not(Formula::rel(r, vec![t]));
    let (x, y) = (var(0), var(1));
    // R is an initial segment
    b.add(
        2,
        Formula::implies(
            Formula::and(vec![in_r(x.clone()), not_r(y.clone())]),
            Formula::lt(x, y),
        ),
    );
    // R carries φ_{n-1}, its complement carries ψ
    embed_on(&mut b, &prev.sentence, &imp_p, &in_r);
    embed_on(&mut b, &psi.sentence, &imp, &not_r);
    // t injects {x in ¬R | x < a} into R for every a in ¬R
    injection(&mut b, "t", &not_r, &in_r);
    let sentence = b.finish()?;
    Ok(CombinatorResult::derived(
        format!("psi'_{n}({})", psi.name),
        sentence,
        psi.n + 1 + prev.n,
        &[psi, &prev],
    ))
}

/// `T_n(ψ) = star_psi(θ, ψ′_n)`.
pub fn build_tn(
    theta: &CombinatorResult,
    psi: &CombinatorResult,
    phi0: &CombinatorResult,
    n: usize,
) -> Result<CombinatorResult> {
    let inner = build_psi_prime_n(psi, phi0, n)?;
    let mut out = star_psi(theta, &inner)?;
    out.name = format!("T_{n}({})", psi.name);
    out.provenance.push(format!(
        "{} = star_psi({}, {})",
        out.name, theta.name, inner.name
    ));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_sentence;

    fn base(name: &str, text: &str, n: usize) -> CombinatorResult {
        CombinatorResult::base(name, parse_sentence(text).unwrap(), n)
    }

    fn theta() -> CombinatorResult {
        base("theta", "sig { const a; }\nforall y . y <= a", 1)
    }

    #[test]
    fn star_adds_segment_function() {
        let s = star(&theta()).unwrap();
        assert_eq!(s.n, 2);
        let sig = s.sentence.signature();
        assert!(sig.function("I").is_some());
        assert_eq!(sig.function("a").map(|f| sig.fn_arity(f)), Some(1));
        assert_eq!(sig.num_constants(), 0);
    }

    #[test]
    fn star_rejects_existing_segment_symbol() {
        let phi = base("x", "sig { fn I/1; }\nforall x . I(x) = x", 1);
        assert!(matches!(star(&phi), Err(Error::SymbolClash(_))));
    }

    #[test]
    fn star_psi_picks_fresh_marker() {
        let beta = base(
            "beta",
            "sig { rel P/1; fn s/1; }\nforall x . s(s(x)) = x",
            1,
        );
        let out = star_psi(&theta(), &beta).unwrap();
        assert_eq!(out.n, 3);
        assert!(out.sentence.signature().relation("P_1").is_some());
    }

    #[test]
    fn star_psi_rejects_overlap() {
        let psi = base("psi", "sig { const a; }\nforall y . a <= y", 1);
        assert!(matches!(
            star_psi(&theta(), &psi),
            Err(Error::SymbolClash(_))
        ));
    }

    #[test]
    fn output_round_trips_through_parser() {
        let beta = base(
            "beta",
            "sig { rel P/1; fn s/1; }\nforall x . s(s(x)) = x",
            1,
        );
        let out = star_psi(&theta(), &beta).unwrap();
        let text = out.sentence.to_string();
        let back = parse_sentence(&text).unwrap();
        assert_eq!(back.signature(), out.sentence.signature());
        let file = crate::parser::parse_file(&out.to_string()).unwrap();
        assert_eq!(file.steps, Some(out.n));
        assert_eq!(file.sentence, out.sentence);
    }
}
