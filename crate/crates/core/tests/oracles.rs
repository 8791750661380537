//! Library routines against naive exhaustive oracles on random small
//! structures over two signatures.

mod common;

use std::collections::BTreeSet;

use common::*;
use locsent::indiscernible::check_plain_indiscernibles;
use locsent::parser::parse_sentence;
use locsent::spectrum::ordered_sums;
use locsent::structure::{tuples, FiniteStructure};
use locsent::syntax::Sentence;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn eval_agrees_with_naive_evaluation(m in structure(), f in fshape()) {
        let s = Sentence::new(m.signature_arc().clone(), 3, formula(m.signature(), &f)).unwrap();
        prop_assert_eq!(m.satisfies(&s).unwrap(), naive_satisfies(&m, &s));
        for env in tuples(m.size(), 3) {
            prop_assert_eq!(m.eval_formula(s.matrix(), &env), naive_formula(&m, s.matrix(), &env));
        }
    }

    #[test]
    fn closure_agrees_with_term_depths(m in structure(), mask in any::<u8>()) {
        let x: BTreeSet<usize> = (0..m.size()).filter(|e| mask >> e & 1 == 1).collect();
        let trace = m.closure(&x).unwrap();
        prop_assert_eq!(&trace.layers, &naive_layers(&m, &x));
    }

    #[test]
    fn plain_check_agrees_with_atom_enumeration(m in structure(), mask in 1u8..8, cap in 0usize..=2) {
        let x: Vec<usize> = (0..m.size()).filter(|e| mask >> e & 1 == 1).collect();
        prop_assume!(!x.is_empty());
        let cap = if m.signature().is_unary() { cap } else { cap.min(1) };
        prop_assert_eq!(check_plain_indiscernibles(&m, &x, cap).unwrap(), naive_plain(&m, &x, cap));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printing_round_trips(m in structure(), f in fshape()) {
        let s = Sentence::new(m.signature_arc().clone(), 3, formula(m.signature(), &f)).unwrap();
        let text = s.to_string();
        let back = parse_sentence(&text).unwrap();
        prop_assert_eq!(back.to_string(), text);
        prop_assert_eq!(back.signature(), s.signature());
        let m2 = FiniteStructure::new(back.signature_arc().clone(), m.size()).unwrap();
        prop_assert_eq!(m2.signature(), m.signature());
        prop_assert_eq!(naive_satisfies(&m, &back), naive_satisfies(&m, &s));
    }

    #[test]
    fn closure_is_monotone(m in structure(), a in any::<u8>(), b in any::<u8>()) {
        let small: BTreeSet<usize> = (0..m.size()).filter(|e| (a & b) >> e & 1 == 1).collect();
        let large: BTreeSet<usize> = (0..m.size()).filter(|e| a >> e & 1 == 1).collect();
        let cs = m.closure(&small).unwrap();
        let cl = m.closure(&large).unwrap();
        prop_assert!(cs.closure().is_subset(cl.closure()));
    }

    #[test]
    fn spectrum_sums_extend_with_the_ceiling(
        inner in prop::collection::btree_set(1usize..8, 0..4),
        outer in prop::collection::btree_set(1usize..8, 0..4),
        c in 1usize..10,
    ) {
        let inner: Vec<usize> = inner.into_iter().collect();
        let outer: Vec<usize> = outer.into_iter().collect();
        let low = ordered_sums(&inner, &outer, c);
        let high: Vec<usize> = ordered_sums(&inner, &outer, c + 3).into_iter().filter(|&t| t <= c).collect();
        prop_assert_eq!(low, high);
    }
}
