//! Finite models generated by indiscernibles, and the decision procedures
//! built on them.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::indiscernible::{check_plain_indiscernibles, increasing, IndiscernibleWitness, Kind};
use crate::locality::LocalCertificate;
use crate::metrics::closure_size_bound;
use crate::search::{Problem, SearchEnd, SearchStats, Strategy};
use crate::syntax::{Atom, Formula, Sentence, Signature, Term};
use crate::template::{search_template, TemplateOptions, TemplateOutcome};

/// Questions answered by [`decide`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Question {
    ArbitrarilyLargeFinite,
    Infinite,
    OmegaModel,
    RegularCardinalModel,
}

impl Question {
    pub const ALL: [Question; 4] = [
        Question::ArbitrarilyLargeFinite,
        Question::Infinite,
        Question::OmegaModel,
        Question::RegularCardinalModel,
    ];

    /// Indiscernibles whose existence answers the question.
    pub fn kind(self) -> Kind {
        match self {
            Question::ArbitrarilyLargeFinite | Question::Infinite => Kind::Plain,
            Question::OmegaModel | Question::RegularCardinalModel => Kind::Special,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Question::ArbitrarilyLargeFinite => "arbitrarily-large-finite",
            Question::Infinite => "infinite",
            Question::OmegaModel => "omega-model",
            Question::RegularCardinalModel => "regular-cardinal-model",
        }
    }
}

impl fmt::Display for Question {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Question {
    type Err = Error;

    fn from_str(s: &str) -> Result<Question> {
        Question::ALL
            .into_iter()
            .find(|q| q.tag() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown question `{s}`")))
    }
}

/// Outcome of [`find_witness`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FindOutcome {
    Found(Box<IndiscernibleWitness>),
    /// The bounded space holds no witness.
    Exhausted,
    BudgetExceeded,
}

/// Parameters of the witness search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FinderOptions {
    /// Number of indiscernibles.
    pub generators: usize,
    /// Closure bound.
    pub steps: usize,
    /// Term-complexity cap of the indiscernibility check.
    pub cap: usize,
    /// Node budget (per generator placement for plain witnesses).
    pub budget: u64,
    /// Overrides the closure-growth bound on domain sizes.
    pub max_size: Option<usize>,
}

impl FinderOptions {
    /// Defaults taken from a certificate: `N_φ` generators, `n_φ` steps,
    /// cap `n_φ + 1`.
    pub fn from_certificate(cert: &LocalCertificate, budget: u64) -> FinderOptions {
        FinderOptions {
            generators: cert.metrics.big_n,
            steps: cert.n(),
            cap: cert.n() + 1,
            budget,
            max_size: None,
        }
    }

    /// Largest domain a witness can have.
    pub fn size_bound(&self, sig: &Signature) -> usize {
        self.max_size
            .unwrap_or_else(|| closure_size_bound(sig, self.generators, self.steps))
    }
}

/// Statistics and bounds of one witness search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FindStats {
    pub search: SearchStats,
    /// Largest domain size considered.
    pub size_bound: usize,
    /// Generator placements tried.
    pub placements: u64,
}

/// Searches for a finite model of `s` generated by `opts.generators`
/// indiscernibles of the given kind within `opts.steps` closure steps.
pub fn find_witness(
    s: &Sentence,
    kind: Kind,
    opts: FinderOptions,
) -> Result<(FindOutcome, FindStats)> {
    if opts.generators == 0 {
        return Err(Error::Precondition(
            "at least one generator is required".into(),
        ));
    }
    match kind {
        Kind::Plain => find_plain(s, opts),
        Kind::Special => find_special(s, opts),
    }
}

fn find_special(s: &Sentence, opts: FinderOptions) -> Result<(FindOutcome, FindStats)> {
    let topts = TemplateOptions {
        generators: opts.generators,
        steps: opts.steps,
        cap: opts.cap,
        budget: opts.budget,
    };
    let (outcome, search) = search_template(s, topts)?;
    let mut stats = FindStats {
        search,
        size_bound: opts.size_bound(s.signature()),
        placements: 1,
    };
    let out = match outcome {
        TemplateOutcome::Found(found) => {
            let (_, witness) = *found;
            stats.size_bound = stats.size_bound.max(witness.model.size());
            FindOutcome::Found(Box::new(witness))
        }
        TemplateOutcome::Exhausted => FindOutcome::Exhausted,
        TemplateOutcome::BudgetExceeded => FindOutcome::BudgetExceeded,
    };
    Ok((out, stats))
}

/// Atoms over terms of complexity at most one in variables `0..len`.
fn shallow_atoms(sig: &Signature, len: usize) -> Vec<Atom> {
    const LIMIT: usize = 4096;
    let mut base: Vec<Term> = (0..len).map(Term::Var).collect();
    base.extend(sig.constants().map(Term::Const));
    let mut terms = base.clone();
    for f in sig.functions() {
        for args in crate::structure::tuples(base.len(), sig.fn_arity(f)) {
            terms.push(Term::app(
                f,
                args.iter().map(|&i| base[i].clone()).collect(),
            ));
            if terms.len() > LIMIT {
                return Vec::new();
            }
        }
    }
    let mut atoms = Vec::new();
    for (i, a) in terms.iter().enumerate() {
        for b in &terms[i + 1..] {
            atoms.push(Atom::Eq(a.clone(), b.clone()));
            atoms.push(Atom::Lt(a.clone(), b.clone()));
            atoms.push(Atom::Lt(b.clone(), a.clone()));
        }
    }
    for r in sig.relations() {
        for args in crate::structure::tuples(terms.len(), sig.rel_arity(r)) {
            atoms.push(Atom::Rel(
                r,
                args.iter().map(|&i| terms[i].clone()).collect(),
            ));
            if atoms.len() > LIMIT {
                break;
            }
        }
    }
    atoms.retain(|a| a.terms().iter().any(|t| !t.vars().is_empty()));
    atoms.truncate(LIMIT);
    atoms
}

fn plain_problem(s: &Sentence, size: usize, gens: &[usize]) -> Result<Problem> {
    let sig = s.signature_arc();
    let mut p = Problem::new(sig.clone(), size)?;
    p.add_sentence(s)?;
    for len in 1..=2.min(gens.len().saturating_sub(1)) {
        let subs = increasing(gens.len(), len);
        for atom in shallow_atoms(sig, len) {
            let a = Formula::Atom(atom);
            let shifted = a.map_vars(&|v| Term::Var(v + len));
            let idx = p.add_formula(Formula::iff(a, shifted));
            for pair in subs.windows(2) {
                let env: Vec<usize> = pair[0].iter().chain(&pair[1]).map(|&i| gens[i]).collect();
                p.add_instance(idx, &env)?;
            }
        }
    }
    Ok(p)
}

enum Placement {
    Found(IndiscernibleWitness),
    Exhausted,
    Budget,
}

fn find_plain(s: &Sentence, opts: FinderOptions) -> Result<(FindOutcome, FindStats)> {
    let bound = opts.size_bound(s.signature());
    let mut stats = FindStats {
        size_bound: bound,
        ..FindStats::default()
    };
    let mut budget_hit = false;
    for size in opts.generators..=bound {
        let placements = increasing(size, opts.generators);
        stats.placements += placements.len() as u64;
        let results: Vec<Result<(Placement, SearchStats)>> = placements
            .par_iter()
            .map(|gens| {
                let p = plain_problem(s, size, gens)?;
                let strategy = Strategy::Generated {
                    generators: gens.clone(),
                    steps: opts.steps,
                };
                let mut found = None;
                let mut failure = None;
                let (end, st) = p.search(&strategy, opts.budget, |m| {
                    let ok = m
                        .satisfies(s)
                        .and_then(|sat| Ok(sat && check_plain_indiscernibles(m, gens, opts.cap)?));
                    match ok {
                        Ok(true) => {
                            found = Some(m.clone());
                            ControlFlow::Break(())
                        }
                        Ok(false) => ControlFlow::Continue(()),
                        Err(e) => {
                            failure = Some(e);
                            ControlFlow::Break(())
                        }
                    }
                });
                if let Some(e) = failure {
                    return Err(e);
                }
                let out = match (found, end) {
                    (Some(model), _) => Placement::Found(IndiscernibleWitness {
                        model,
                        generators: gens.clone(),
                        kind: Kind::Plain,
                        steps: opts.steps,
                    }),
                    (None, SearchEnd::BudgetExceeded) => Placement::Budget,
                    (None, _) => Placement::Exhausted,
                };
                Ok((out, st))
            })
            .collect();
        let mut winner = None;
        for r in results {
            let (out, st) = r?;
            stats.search += st;
            match out {
                Placement::Found(w) if winner.is_none() => winner = Some(w),
                Placement::Budget => budget_hit = true,
                _ => {}
            }
        }
        if let Some(w) = winner {
            return Ok((FindOutcome::Found(Box::new(w)), stats));
        }
    }
    let out = if budget_hit {
        FindOutcome::BudgetExceeded
    } else {
        FindOutcome::Exhausted
    };
    Ok((out, stats))
}

/// Answer of a decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Answer {
    Yes,
    /// The bounded search space was covered exhaustively.
    No,
    BudgetExceeded,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::BudgetExceeded => "budget-exceeded",
        })
    }
}

/// A decided question with its evidence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionReport {
    pub question: Question,
    pub answer: Answer,
    pub witness: Option<IndiscernibleWitness>,
    pub generators: usize,
    pub steps: usize,
    /// Model-size bound used by the certificate.
    pub certified_up_to: usize,
    pub stats: FindStats,
}

impl fmt::Display for DecisionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "question {}", self.question)?;
        writeln!(f, "answer {}", self.answer)?;
        writeln!(f, "generators {}", self.generators)?;
        writeln!(f, "steps {}", self.steps)?;
        writeln!(f, "certified-up-to {}", self.certified_up_to)?;
        writeln!(f, "witness-size-bound {}", self.stats.size_bound)?;
        writeln!(
            f,
            "nodes {} conflicts {} prunes {} placements {}",
            self.stats.search.nodes,
            self.stats.search.conflicts,
            self.stats.search.prunes,
            self.stats.placements
        )?;
        if let Some(w) = &self.witness {
            write!(f, "{}", w.dump())?;
        }
        Ok(())
    }
}

/// Decides `question` for a certified sentence with default parameters.
pub fn decide(cert: &LocalCertificate, question: Question, budget: u64) -> Result<DecisionReport> {
    decide_with(
        cert,
        question,
        FinderOptions::from_certificate(cert, budget),
    )
}

/// Decides `question` with explicit search parameters.
pub fn decide_with(
    cert: &LocalCertificate,
    question: Question,
    opts: FinderOptions,
) -> Result<DecisionReport> {
    let sig = cert.sentence.signature();
    if question.kind() == Kind::Special && !sig.is_unary() {
        let f = sig
            .functions()
            .find(|&f| sig.fn_arity(f) != 1)
            .expect("non-unary function");
        return Err(Error::NotUnary(sig.fn_name(f).to_string()));
    }
    let (outcome, stats) = find_witness(&cert.sentence, question.kind(), opts)?;
    let (answer, witness) = match outcome {
        FindOutcome::Found(w) => (Answer::Yes, Some(*w)),
        FindOutcome::Exhausted => (Answer::No, None),
        FindOutcome::BudgetExceeded => (Answer::BudgetExceeded, None),
    };
    Ok(DecisionReport {
        question,
        answer,
        witness,
        generators: opts.generators,
        steps: opts.steps,
        certified_up_to: cert.m,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_sentence;

    fn cert(text: &str, n: usize) -> LocalCertificate {
        LocalCertificate::assume(parse_sentence(text).unwrap(), n).unwrap()
    }

    #[test]
    fn example_has_plain_witness_with_six_generators() {
        let c = cert(include_str!("../fixtures/example2.sent"), 2);
        assert_eq!(c.metrics.big_n, 6);
        let r = decide(&c, Question::Infinite, 1_000_000).unwrap();
        assert_eq!(r.answer, Answer::Yes);
        let w = r.witness.unwrap();
        assert!(w.model.satisfies(&c.sentence).unwrap());
        assert!(w.verify(3).unwrap());
    }

    #[test]
    fn last_element_has_plain_but_no_special_witness() {
        let c = cert("sig { const a; }\nforall y . y <= a", 1);
        assert_eq!(
            decide(&c, Question::ArbitrarilyLargeFinite, 100_000)
                .unwrap()
                .answer,
            Answer::Yes
        );
        assert_eq!(
            decide(&c, Question::OmegaModel, 100_000).unwrap().answer,
            Answer::No
        );
    }

    #[test]
    fn pinned_size_is_exhausted() {
        let c = cert(
            "sig { const a; const b; }\nforall x . a < b & (x = a | x = b)",
            1,
        );
        let mut opts = FinderOptions::from_certificate(&c, 100_000);
        opts.generators = 3;
        let (out, stats) = find_witness(&c.sentence, Kind::Plain, opts).unwrap();
        assert_eq!(out, FindOutcome::Exhausted);
        assert_eq!(stats.size_bound, 5);
    }

    #[test]
    fn special_questions_need_unary_signatures() {
        let c = cert("sig { fn g/2; }\nforall x y . g(x, y) = x", 1);
        assert!(matches!(
            decide(&c, Question::OmegaModel, 10),
            Err(Error::NotUnary(_))
        ));
    }

    #[test]
    fn questions_parse() {
        for q in Question::ALL {
            assert_eq!(q.tag().parse::<Question>().unwrap(), q);
        }
    }
}
