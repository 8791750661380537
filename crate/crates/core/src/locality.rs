//! Bounded certification of locality: every generated substructure of a
//! model is a model, and closure stabilizes within the claimed bound.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::metrics::{closure_size_bound, compute_metrics, Metrics};
use crate::search::{Problem, SearchEnd, SearchStats, Strategy};
use crate::structure::FiniteStructure;
use crate::syntax::Sentence;

/// Why a model refutes locality at the claimed bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Counterexample {
    /// `cl(X)` is not a model.
    SubstructureFails {
        model: FiniteStructure,
        generators: BTreeSet<usize>,
    },
    /// Closure of `X` needs more than the claimed number of steps.
    SlowClosure {
        model: FiniteStructure,
        generators: BTreeSet<usize>,
        steps: usize,
    },
}

impl Counterexample {
    pub fn model(&self) -> &FiniteStructure {
        match self {
            Counterexample::SubstructureFails { model, .. }
            | Counterexample::SlowClosure { model, .. } => model,
        }
    }
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterexample::SubstructureFails { generators, .. } => {
                write!(
                    f,
                    "the substructure generated by {generators:?} is not a model"
                )
            }
            Counterexample::SlowClosure {
                generators, steps, ..
            } => {
                write!(f, "closure of {generators:?} takes {steps} steps")
            }
        }
    }
}

/// Outcome of bounded certification.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(Box<Counterexample>),
    BudgetExceeded,
}

/// Result of `verify_local_on_bounded_models`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalityReport {
    pub verdict: Verdict,
    /// Claimed closure bound.
    pub n: usize,
    /// Largest domain size examined.
    pub m: usize,
    /// Models enumerated.
    pub models: u64,
    /// Largest stabilization step seen; the least bound valid on the
    /// models examined.
    pub observed_steps: usize,
    pub stats: SearchStats,
}

impl LocalityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// A sentence with a closure bound confirmed on all models up to size `m`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalCertificate {
    pub sentence: Sentence,
    pub metrics: Metrics,
    pub m: usize,
    pub observed_steps: usize,
}

impl LocalCertificate {
    pub fn n(&self) -> usize {
        self.metrics.n
    }

    /// A certificate taken on trust, without bounded verification.
    pub fn assume(sentence: Sentence, n: usize) -> Result<LocalCertificate> {
        if n == 0 {
            return Err(Error::Precondition(
                "closure bound must be at least 1".into(),
            ));
        }
        let metrics = compute_metrics(&sentence, n);
        Ok(LocalCertificate {
            sentence,
            metrics,
            m: 0,
            observed_steps: n,
        })
    }
}

/// The default bound on model sizes: the size reachable from `q`
/// generators in `n + 1` steps.
pub fn default_model_bound(s: &Sentence, n: usize) -> usize {
    closure_size_bound(s.signature(), s.q(), n + 1)
}

/// Checks every model of `s` with at most `m` elements.
pub fn verify_local_on_bounded_models(
    s: &Sentence,
    n: usize,
    m: usize,
    budget: u64,
) -> Result<LocalityReport> {
    let mut report = LocalityReport {
        verdict: Verdict::Pass,
        n,
        m,
        models: 0,
        observed_steps: 0,
        stats: SearchStats::default(),
    };
    for k in 1..=m {
        let mut p = Problem::new(s.signature_arc().clone(), k)?;
        p.add_sentence(s)?;
        let mut failure: Option<Result<Counterexample>> = None;
        let remaining = budget.saturating_sub(report.stats.nodes);
        let (end, stats) = p.search(&Strategy::Dynamic, remaining, |model| {
            report.models += 1;
            match check_model(model, s, n, &mut report.observed_steps) {
                Ok(None) => ControlFlow::Continue(()),
                Ok(Some(cx)) => {
                    failure = Some(Ok(cx));
                    ControlFlow::Break(())
                }
                Err(e) => {
                    failure = Some(Err(e));
                    ControlFlow::Break(())
                }
            }
        });
        report.stats += stats;
        if let Some(f) = failure {
            report.verdict = Verdict::Fail(Box::new(f?));
            return Ok(report);
        }
        if end == SearchEnd::BudgetExceeded {
            report.verdict = Verdict::BudgetExceeded;
            return Ok(report);
        }
    }
    Ok(report)
}

fn check_model(
    model: &FiniteStructure,
    s: &Sentence,
    n: usize,
    observed: &mut usize,
) -> Result<Option<Counterexample>> {
    let k = model.size();
    let mut checked: HashSet<Vec<bool>> = HashSet::new();
    for mask in 0u64..(1u64 << k) {
        let x: BTreeSet<usize> = (0..k).filter(|&e| mask >> e & 1 == 1).collect();
        let trace = model.closure(&x)?;
        let steps = trace.stabilization_step();
        *observed = (*observed).max(steps);
        if steps > n {
            return Ok(Some(Counterexample::SlowClosure {
                model: model.clone(),
                generators: x,
                steps,
            }));
        }
        let closed = trace.closure();
        if closed.is_empty() {
            continue;
        }
        let set: Vec<bool> = (0..k).map(|e| closed.contains(&e)).collect();
        if !checked.insert(set.clone()) {
            continue;
        }
        let (sub, _) = model.restrict(&set)?;
        if !sub.satisfies(s)? {
            return Ok(Some(Counterexample::SubstructureFails {
                model: model.clone(),
                generators: x,
            }));
        }
    }
    Ok(None)
}

/// Certifies `s` at bound `n` on models of size at most `m`.
pub fn certify(
    s: &Sentence,
    n: usize,
    m: usize,
    budget: u64,
) -> Result<(LocalityReport, Option<LocalCertificate>)> {
    if n == 0 {
        return Err(Error::Precondition(
            "closure bound must be at least 1".into(),
        ));
    }
    let report = verify_local_on_bounded_models(s, n, m, budget)?;
    let cert = report.passed().then(|| LocalCertificate {
        sentence: s.clone(),
        metrics: compute_metrics(s, n),
        m,
        observed_steps: report.observed_steps,
    });
    Ok((report, cert))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_sentence;

    #[test]
    fn example_is_local_with_bound_two() {
        let s = parse_sentence(include_str!("../fixtures/example2.sent")).unwrap();
        let r = verify_local_on_bounded_models(&s, 2, 4, u64::MAX).unwrap();
        assert!(r.passed(), "{:?}", r.verdict);
        assert_eq!(r.observed_steps, 2);
        let r = verify_local_on_bounded_models(&s, 1, 4, u64::MAX).unwrap();
        assert!(matches!(r.verdict, Verdict::Fail(_)));
    }

    #[test]
    fn trivial_sentence_over_unary_function_is_not_local_at_one() {
        let s = parse_sentence("sig { fn f/1; }\nforall x . true").unwrap();
        let r = verify_local_on_bounded_models(&s, 1, 3, u64::MAX).unwrap();
        let Verdict::Fail(cx) = r.verdict else {
            panic!("expected failure")
        };
        let Counterexample::SlowClosure {
            model,
            generators,
            steps,
        } = *cx
        else {
            panic!()
        };
        assert_eq!(model.size(), 3);
        assert_eq!(steps, 2);
        let start = *generators.iter().next().unwrap();
        let f = model.signature().function("f").unwrap();
        let a = model.function(f, &[start]);
        let b = model.function(f, &[a]);
        assert_eq!(BTreeSet::from([start, a, b]).len(), 3);
    }

    #[test]
    fn constant_top_element() {
        let s = parse_sentence("sig { fn f/1; const c; }\nforall x . f(x) = c & (x = c | x < c)")
            .unwrap();
        let r = verify_local_on_bounded_models(&s, 2, 3, u64::MAX).unwrap();
        assert!(r.passed());
        assert_eq!(r.models, 3);
    }

    #[test]
    fn budget_exceeded_is_explicit() {
        let s = parse_sentence("sig { fn f/1; }\nforall x . true").unwrap();
        let r = verify_local_on_bounded_models(&s, 3, 4, 5).unwrap();
        assert_eq!(r.verdict, Verdict::BudgetExceeded);
    }
}
