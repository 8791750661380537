//! Naive oracles and random generators shared by the property tests and
//! the acceptance harness.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use locsent::structure::{tuples, FiniteStructure};
use locsent::syntax::{Atom, ConstId, FnId, Formula, RelId, Sentence, Signature, Term};
use proptest::prelude::*;

pub fn unary_sig() -> Arc<Signature> {
    Arc::new(
        Signature::new()
            .with_function("f", 1)
            .unwrap()
            .with_relation("P", 1)
            .unwrap()
            .with_constant("c")
            .unwrap(),
    )
}

pub fn binary_sig() -> Arc<Signature> {
    Arc::new(
        Signature::new()
            .with_function("g", 2)
            .unwrap()
            .with_relation("R", 2)
            .unwrap(),
    )
}

pub fn sig(which: bool) -> Arc<Signature> {
    if which {
        binary_sig()
    } else {
        unary_sig()
    }
}

/// Fills every table of a structure from a stream of random words.
pub fn build(sig: Arc<Signature>, size: usize, words: &[u32]) -> FiniteStructure {
    let mut it = words.iter().cycle();
    let mut next = || *it.next().unwrap() as usize;
    let mut m = FiniteStructure::new(sig.clone(), size).unwrap();
    for c in sig.constants() {
        m.set_constant(c, next() % size).unwrap();
    }
    for f in sig.functions() {
        for args in tuples(size, sig.fn_arity(f)) {
            m.set_function(f, &args, next() % size).unwrap();
        }
    }
    for r in sig.relations() {
        for args in tuples(size, sig.rel_arity(r)) {
            m.set_relation(r, &args, next() % 2 == 1).unwrap();
        }
    }
    m
}

pub fn structure() -> impl Strategy<Value = FiniteStructure> {
    (
        any::<bool>(),
        1usize..=3,
        prop::collection::vec(any::<u32>(), 40),
    )
        .prop_map(|(b, k, w)| build(sig(b), k, &w))
}

#[derive(Clone, Debug)]
pub enum Shape {
    Var(u8),
    Const,
    App(u8, Vec<Shape>),
}

#[derive(Clone, Debug)]
pub enum FShape {
    True,
    False,
    Eq(Shape, Shape),
    Lt(Shape, Shape),
    Rel(Vec<Shape>),
    Not(Box<FShape>),
    And(Vec<FShape>),
    Or(Vec<FShape>),
    Implies(Box<FShape>, Box<FShape>),
    Iff(Box<FShape>, Box<FShape>),
}

pub fn shape() -> impl Strategy<Value = Shape> {
    let leaf = prop_oneof![4 => (0u8..3).prop_map(Shape::Var), 1 => Just(Shape::Const)];
    leaf.prop_recursive(3, 12, 2, |inner| {
        (any::<u8>(), prop::collection::vec(inner, 1..=2)).prop_map(|(f, a)| Shape::App(f, a))
    })
}

pub fn fshape() -> impl Strategy<Value = FShape> {
    let leaf = prop_oneof![
        1 => Just(FShape::True),
        1 => Just(FShape::False),
        4 => (shape(), shape()).prop_map(|(a, b)| FShape::Eq(a, b)),
        4 => (shape(), shape()).prop_map(|(a, b)| FShape::Lt(a, b)),
        4 => prop::collection::vec(shape(), 2).prop_map(FShape::Rel),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| FShape::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(FShape::And),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(FShape::Or),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FShape::Implies(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| FShape::Iff(Box::new(a), Box::new(b))),
        ]
    })
}

pub fn term(sig: &Signature, s: &Shape) -> Term {
    match s {
        Shape::Var(v) => Term::Var(*v as usize),
        Shape::Const if sig.num_constants() > 0 => Term::Const(ConstId(0)),
        Shape::Const => Term::Var(0),
        Shape::App(f, args) => {
            if sig.num_functions() == 0 {
                return Term::Var(0);
            }
            let f = FnId(*f as usize % sig.num_functions());
            let args = (0..sig.fn_arity(f))
                .map(|i| term(sig, &args[i % args.len()]))
                .collect();
            Term::App(f, args)
        }
    }
}

pub fn formula(sig: &Signature, s: &FShape) -> Formula {
    let t = |x: &Shape| term(sig, x);
    let b = |x: &FShape| Box::new(formula(sig, x));
    match s {
        FShape::True => Formula::True,
        FShape::False => Formula::False,
        FShape::Eq(a, c) => Formula::Atom(Atom::Eq(t(a), t(c))),
        FShape::Lt(a, c) => Formula::Atom(Atom::Lt(t(a), t(c))),
        FShape::Rel(args) => {
            let r = RelId(0);
            Formula::Atom(Atom::Rel(
                r,
                (0..sig.rel_arity(r))
                    .map(|i| t(&args[i % args.len()]))
                    .collect(),
            ))
        }
        FShape::Not(f) => Formula::Not(b(f)),
        FShape::And(fs) => Formula::And(fs.iter().map(|f| formula(sig, f)).collect()),
        FShape::Or(fs) => Formula::Or(fs.iter().map(|f| formula(sig, f)).collect()),
        FShape::Implies(a, c) => Formula::Implies(b(a), b(c)),
        FShape::Iff(a, c) => Formula::Iff(b(a), b(c)),
    }
}

pub fn naive_term(m: &FiniteStructure, t: &Term, env: &[usize]) -> usize {
    match t {
        Term::Var(v) => env[*v],
        Term::Const(c) => m.constant(*c),
        Term::App(f, args) => {
            let vals: Vec<usize> = args.iter().map(|a| naive_term(m, a, env)).collect();
            m.function(*f, &vals)
        }
    }
}

pub fn naive_formula(m: &FiniteStructure, f: &Formula, env: &[usize]) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(Atom::Eq(a, b)) => naive_term(m, a, env) == naive_term(m, b, env),
        Formula::Atom(Atom::Lt(a, b)) => naive_term(m, a, env) < naive_term(m, b, env),
        Formula::Atom(Atom::Rel(r, args)) => {
            let vals: Vec<usize> = args.iter().map(|a| naive_term(m, a, env)).collect();
            m.holds(*r, &vals)
        }
        Formula::Not(g) => !naive_formula(m, g, env),
        Formula::And(gs) => gs.iter().all(|g| naive_formula(m, g, env)),
        Formula::Or(gs) => gs.iter().any(|g| naive_formula(m, g, env)),
        Formula::Implies(a, b) => !naive_formula(m, a, env) || naive_formula(m, b, env),
        Formula::Iff(a, b) => naive_formula(m, a, env) == naive_formula(m, b, env),
    }
}

pub fn naive_satisfies(m: &FiniteStructure, s: &Sentence) -> bool {
    tuples(m.size(), s.q()).all(|env| naive_formula(m, s.matrix(), &env))
}

/// Closure layers from least term depths: variables 0, constants 1,
/// `f(t..)` one more than its deepest argument. Relaxed to a fixpoint over
/// the whole domain.
pub fn naive_layers(m: &FiniteStructure, x: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let sig = m.signature();
    let k = m.size();
    let mut depth = vec![usize::MAX; k];
    for &e in x {
        depth[e] = 0;
    }
    for c in sig.constants() {
        let v = m.constant(c);
        depth[v] = depth[v].min(1);
    }
    loop {
        let mut changed = false;
        for f in sig.functions() {
            for args in tuples(k, sig.fn_arity(f)) {
                let d = args.iter().map(|&a| depth[a]).max().unwrap_or(0);
                if d == usize::MAX {
                    continue;
                }
                let v = m.function(f, &args);
                if d + 1 < depth[v] {
                    depth[v] = d + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let top = depth
        .iter()
        .copied()
        .filter(|&d| d != usize::MAX)
        .max()
        .unwrap_or(0)
        .max(1);
    (1..=top)
        .map(|s| (0..k).filter(|&e| depth[e] <= s).collect())
        .collect()
}

/// Terms over `vars` variables and the constants, of height at most `cap`.
pub fn all_terms(sig: &Signature, vars: usize, cap: usize) -> Vec<Term> {
    let mut terms: Vec<Term> = (0..vars)
        .map(Term::Var)
        .chain(sig.constants().map(Term::Const))
        .collect();
    for _ in 0..cap {
        let base = terms.clone();
        for f in sig.functions() {
            for pos in tuples(base.len(), sig.fn_arity(f)) {
                terms.push(Term::App(f, pos.iter().map(|&p| base[p].clone()).collect()));
            }
        }
        terms.sort_by_key(|t| format!("{t:?}"));
        terms.dedup();
    }
    terms
}

pub fn increasing(x: &[usize], len: usize) -> Vec<Vec<usize>> {
    (0..1usize << x.len())
        .filter(|mask| mask.count_ones() as usize == len)
        .map(|mask| {
            (0..x.len())
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| x[i])
                .collect()
        })
        .collect()
}

/// Every atom over terms of height at most `cap` has the same truth value
/// on all increasing tuples of each length.
pub fn naive_plain(m: &FiniteStructure, x: &[usize], cap: usize) -> bool {
    let sig = m.signature();
    (1..=x.len()).all(|len| {
        let terms = all_terms(sig, len, cap);
        let profiles: Vec<(Vec<bool>, Vec<bool>, Vec<bool>)> = increasing(x, len)
            .iter()
            .map(|tup| {
                let vals: Vec<usize> = terms.iter().map(|t| naive_term(m, t, tup)).collect();
                let eq = tuples(vals.len(), 2)
                    .map(|p| vals[p[0]] == vals[p[1]])
                    .collect();
                let lt = tuples(vals.len(), 2)
                    .map(|p| vals[p[0]] < vals[p[1]])
                    .collect();
                let rel = sig
                    .relations()
                    .flat_map(|r| {
                        tuples(vals.len(), sig.rel_arity(r))
                            .map(|p| m.holds(r, &p.iter().map(|&i| vals[i]).collect::<Vec<_>>()))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                (eq, lt, rel)
            })
            .collect();
        profiles.windows(2).all(|w| w[0] == w[1])
    })
}
