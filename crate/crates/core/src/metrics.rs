//! Syntactic measures: term complexity, `v`, `v'`, `N`, closure-bound
//! sentences `C_n` and the size bound on generated structures.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::syntax::{Formula, Sentence, Signature, Term};

/// Number of nested function applications along the deepest path.
pub fn term_complexity(t: &Term) -> usize {
    t.complexity()
}

/// Syntactic metrics of a sentence relative to a closure bound `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Metrics {
    /// Closure bound (steps).
    pub n: usize,
    /// Maximum number of variables of a term of complexity at most `n + 1`.
    pub v: usize,
    /// Maximum number of variables of an atomic formula over such terms.
    pub v_prime: usize,
    /// Number of universally quantified variables.
    pub q: usize,
    /// Witness size `max {3v, v' + v, q v'}`.
    pub big_n: usize,
}

impl Metrics {
    pub fn of_signature(sig: &Signature, q: usize, n: usize) -> Metrics {
        let v = max_term_variables(sig, n + 1);
        let v_prime = max_atom_variables(sig, n + 1);
        let big_n = (3 * v).max(v_prime + v).max(q * v_prime);
        Metrics {
            n,
            v,
            v_prime,
            q,
            big_n,
        }
    }
}

/// Computes `v`, `v'`, `q` and `N` for `s` with closure bound `n`.
pub fn compute_metrics(s: &Sentence, n: usize) -> Metrics {
    Metrics::of_signature(s.signature(), s.q(), n)
}

/// Largest variable count of a term with at most `depth` applications.
///
/// A term with `d` nested applications of symbols of arity at most `a` has
/// at most `a^d` leaves, and the full `a`-ary tree of depth `depth` attains
/// that with pairwise distinct variables. Signatures without functions have
/// no non-trivial terms and report 0.
pub fn max_term_variables(sig: &Signature, depth: usize) -> usize {
    match sig.max_function_arity() {
        0 => 0,
        a => saturating_pow(a, depth),
    }
}

/// Largest variable count of an atom whose arguments have at most `depth`
/// applications. `=` and `<` count as binary relations.
pub fn max_atom_variables(sig: &Signature, depth: usize) -> usize {
    let arity = sig.max_relation_arity().max(2);
    arity.saturating_mul(max_term_variables(sig, depth).max(1))
}

fn saturating_pow(base: usize, exp: usize) -> usize {
    (0..exp).fold(1usize, |acc, _| acc.saturating_mul(base))
}

/// Upper bound on `|cl^steps(X, M)|` for `|X| = generators`.
pub fn closure_size_bound(sig: &Signature, generators: usize, steps: usize) -> usize {
    let mut size = generators;
    for step in 0..steps {
        let mut next = size;
        if step == 0 {
            next = next.saturating_add(sig.num_constants());
        }
        for f in sig.functions() {
            next = next.saturating_add(saturating_pow(size, sig.fn_arity(f)));
        }
        if next == size {
            break;
        }
        size = next;
    }
    size
}

/// All terms over variables `0..vars` with closure height at most `height`,
/// grouped by height (index `h` holds the terms of height exactly `h`).
pub fn terms_by_height(sig: &Signature, vars: usize, height: usize) -> Vec<Vec<Term>> {
    let mut layers: Vec<Vec<Term>> = vec![(0..vars).map(Term::Var).collect()];
    for h in 1..=height {
        let below: Vec<&Term> = layers.iter().flatten().collect();
        let mut layer = Vec::new();
        if h == 1 {
            layer.extend(sig.constants().map(Term::Const));
        }
        for f in sig.functions() {
            for args in products(&below, sig.fn_arity(f)) {
                if args.iter().any(|t| t.closure_height() == h - 1) {
                    layer.push(Term::App(f, args.into_iter().cloned().collect()));
                }
            }
        }
        layers.push(layer);
    }
    layers
}

fn products<'a, T>(items: &[&'a T], k: usize) -> Vec<Vec<&'a T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                items.iter().map(move |it| {
                    let mut p = prefix.clone();
                    p.push(*it);
                    p
                })
            })
            .collect();
    }
    out
}

/// Terms of closure height exactly `height` with variables numbered by first
/// occurrence (one representative per renaming class).
pub fn canonical_terms(sig: &Signature, height: usize) -> Vec<Term> {
    // Shapes use `Var(0)` as a placeholder for every variable leaf.
    let shapes = terms_by_height(sig, 1, height).pop().unwrap_or_default();
    let mut out = Vec::new();
    for shape in shapes {
        let leaves = count_var_leaves(&shape);
        for labels in restricted_growth_strings(leaves) {
            let mut it = labels.into_iter();
            out.push(relabel(&shape, &mut it));
        }
    }
    out
}

fn count_var_leaves(t: &Term) -> usize {
    match t {
        Term::Var(_) => 1,
        Term::Const(_) => 0,
        Term::App(_, args) => args.iter().map(count_var_leaves).sum(),
    }
}

fn relabel(t: &Term, labels: &mut impl Iterator<Item = usize>) -> Term {
    match t {
        Term::Var(_) => Term::Var(labels.next().expect("one label per leaf")),
        Term::Const(c) => Term::Const(*c),
        Term::App(f, args) => Term::App(*f, args.iter().map(|a| relabel(a, labels)).collect()),
    }
}

/// Sequences `a_0..a_{len-1}` with `a_0 = 0` and `a_i <= 1 + max(a_0..a_{i-1})`.
pub fn restricted_growth_strings(len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s: Vec<usize>| {
                let bound = s.iter().map(|&x| x + 1).max().unwrap_or(0);
                (0..=bound).map(move |x| {
                    let mut t = s.clone();
                    t.push(x);
                    t
                })
            })
            .collect();
    }
    out
}

/// Upper limit on the number of clauses `generate_cn` will emit.
pub const CN_CLAUSE_LIMIT: usize = 200_000;

/// The universal sentence expressing that closure takes at most `n` steps:
/// every term of closure height `n + 1` equals one of height at most `n` over
/// the same variables.
pub fn generate_cn(sig: &Arc<Signature>, n: usize) -> Result<Sentence> {
    if n == 0 {
        return Err(Error::Precondition(
            "closure bound must be at least 1".into(),
        ));
    }
    let mut parts = Vec::new();
    let mut budget = 0usize;
    for t in canonical_terms(sig, n + 1) {
        let vars: BTreeSet<usize> = t.vars();
        let k = vars.len();
        let candidates: Vec<Term> = terms_by_height(sig, k, n).into_iter().flatten().collect();
        budget += candidates.len();
        if budget > CN_CLAUSE_LIMIT {
            return Err(Error::Precondition(format!(
                "C_{n} exceeds {CN_CLAUSE_LIMIT} disjuncts over this signature"
            )));
        }
        let disjuncts = candidates
            .into_iter()
            .map(|u| Formula::eq(t.clone(), u))
            .collect();
        parts.push((k, Formula::or(disjuncts)));
    }
    Sentence::conjunction(sig.clone(), parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_sentence;
    use crate::syntax::FnId;

    /// Independent oracle: enumerate term shapes of depth at most `d` and
    /// count their leaves.
    fn oracle_max_leaves(arities: &[usize], d: usize) -> usize {
        if arities.is_empty() {
            return 0;
        }
        fn best(arities: &[usize], d: usize) -> usize {
            let mut m = 1;
            if d > 0 {
                for &a in arities {
                    m = m.max(a * best(arities, d - 1));
                }
            }
            m
        }
        best(arities, d)
    }

    #[test]
    fn complexity_counts_depth() {
        let sig = Signature::new()
            .with_function("i", 1)
            .unwrap()
            .with_constant("a")
            .unwrap();
        let s = parse_sentence("sig { fn i/1; const a; }\nforall x . i(i(a)) = x").unwrap();
        let crate::syntax::Formula::Atom(crate::syntax::Atom::Eq(t, x)) = s.matrix() else {
            panic!()
        };
        assert_eq!(term_complexity(t), 2);
        assert_eq!(term_complexity(x), 0);
        assert_eq!(sig.num_functions(), 1);
        let g = Term::App(
            FnId(1),
            vec![
                Term::Var(0),
                Term::App(FnId(0), vec![Term::Var(1), Term::Var(2)]),
            ],
        );
        assert_eq!(term_complexity(&g), 2);
    }

    #[test]
    fn metrics_of_small_signatures() {
        let unary = Signature::new()
            .with_function("i", 1)
            .unwrap()
            .with_relation("P", 1)
            .unwrap();
        let m = Metrics::of_signature(&unary, 3, 2);
        assert_eq!((m.v, m.v_prime, m.q, m.big_n), (1, 2, 3, 6));
        let rel = Signature::new();
        let m = Metrics::of_signature(&rel, 2, 1);
        assert_eq!((m.v, m.v_prime, m.big_n), (0, 2, 4));
        let bin = Signature::new().with_function("f", 2).unwrap();
        assert_eq!(Metrics::of_signature(&bin, 1, 1).v, 4);
    }

    #[test]
    fn closed_form_matches_enumeration() {
        for arities in [vec![], vec![1], vec![2], vec![1, 3], vec![2, 2]] {
            let mut sig = Signature::new();
            for (i, a) in arities.iter().enumerate() {
                sig.add_function(&format!("f{i}"), *a).unwrap();
            }
            for d in 0..4 {
                assert_eq!(max_term_variables(&sig, d), oracle_max_leaves(&arities, d));
            }
        }
    }

    #[test]
    fn canonical_terms_for_one_unary() {
        let sig = Signature::new().with_function("f", 1).unwrap();
        let ts = canonical_terms(&sig, 2);
        assert_eq!(ts.len(), 1);
        let sig = Arc::new(sig);
        let cn = generate_cn(&sig, 1).unwrap();
        assert_eq!(
            cn.to_string().lines().nth(1).unwrap().trim(),
            "forall x1 . f(f(x1)) = x1 | f(f(x1)) = f(x1)"
        );
    }

    #[test]
    fn relational_cn_is_trivial() {
        let sig = Arc::new(Signature::new().with_relation("P", 2).unwrap());
        let cn = generate_cn(&sig, 1).unwrap();
        assert_eq!(*cn.matrix(), Formula::True);
        assert_eq!(cn.q(), 0);
    }

    #[test]
    fn restricted_growth_counts_are_bell_numbers() {
        let bell = [1, 1, 2, 5, 15, 52];
        for (n, b) in bell.iter().enumerate() {
            assert_eq!(restricted_growth_strings(n).len(), *b);
        }
    }

    #[test]
    fn closure_bound_grows_per_layer() {
        let sig = Signature::new()
            .with_function("i", 1)
            .unwrap()
            .with_constant("a")
            .unwrap();
        assert_eq!(closure_size_bound(&sig, 3, 2), 3 + 1 + 3 + 7);
        assert_eq!(closure_size_bound(&Signature::new(), 5, 9), 5);
    }
}
