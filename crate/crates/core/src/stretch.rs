//! Stretching models generated by special indiscernibles along linear
//! orders, embeddings between stretchings, and the words they spell.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::indiscernible::{IndiscernibleWitness, Kind};
use crate::structure::{tuples, FiniteStructure};
use crate::syntax::{FnId, RelId};
use crate::template::{pattern, Target, Template};

/// How a unary term behaves on the generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TermClass {
    /// Takes the same ground value on every generator.
    ConstantOnTail(usize),
    /// Sends each generator into its own block, at this position.
    Interleaved(usize),
}

/// A template extracted from a special witness, with its classified terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StretchTemplate {
    pub witness: IndiscernibleWitness,
    pub template: Template,
    /// Every term `f_1(...f_d(x))` with `d <= steps`, innermost symbol last.
    pub terms: Vec<(Vec<FnId>, TermClass)>,
}

/// A finite linear order, or the first `p` points of `ω`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderSpec {
    Finite(usize),
    OmegaPrefix(usize),
}

impl OrderSpec {
    /// Number of generators to lay out.
    pub fn points(self) -> usize {
        match self {
            OrderSpec::Finite(k) | OrderSpec::OmegaPrefix(k) => k,
        }
    }
}

impl std::str::FromStr for OrderSpec {
    type Err = Error;

    /// `k` or `omega-prefix(p)`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            Error::Precondition(format!(
                "order spec `{s}`: expected `k` or `omega-prefix(p)`"
            ))
        };
        let s = s.trim();
        let spec = match s
            .strip_prefix("omega-prefix(")
            .and_then(|r| r.strip_suffix(')'))
        {
            Some(p) => OrderSpec::OmegaPrefix(p.trim().parse().map_err(|_| bad())?),
            None => OrderSpec::Finite(s.parse().map_err(|_| bad())?),
        };
        if spec.points() == 0 {
            return Err(bad());
        }
        Ok(spec)
    }
}

impl fmt::Display for OrderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderSpec::Finite(k) => write!(f, "{k}"),
            OrderSpec::OmegaPrefix(p) => write!(f, "omega-prefix({p})"),
        }
    }
}

/// Order type of a stretching.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderType {
    Finite(usize),
    /// `prefix` ground elements followed by `ω` blocks of `block` elements.
    Omega {
        prefix: usize,
        block: usize,
    },
}

impl fmt::Display for OrderType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderType::Finite(k) => write!(f, "{k}"),
            OrderType::Omega { prefix, block } => {
                write!(f, "omega (prefix {prefix}, block {block})")
            }
        }
    }
}

/// Recovers the ground part and block layout of a special witness.
///
/// The witness must be block-shaped: ground elements first, then one
/// contiguous block per generator, all of the same size. Witnesses returned
/// by the finder always are.
pub fn build_template(w: &IndiscernibleWitness) -> Result<StretchTemplate> {
    let m = &w.model;
    let sig = m.signature_arc().clone();
    if let Some(f) = sig.functions().find(|&f| sig.fn_arity(f) != 1) {
        return Err(Error::NotUnary(sig.fn_name(f).to_string()));
    }
    if w.kind != Kind::Special {
        return Err(Error::Precondition(
            "stretching needs a special witness".into(),
        ));
    }
    let n = w.generators.len();
    if n < 3 {
        return Err(Error::Precondition(format!(
            "stretching needs at least 3 generators, found {n}"
        )));
    }
    if !w.verify(w.steps + 1)? {
        return Err(Error::Precondition(
            "witness fails special re-verification".into(),
        ));
    }
    if let Some(r) = sig.relations().find(|&r| sig.rel_arity(r) > n) {
        return Err(Error::Precondition(format!(
            "relation `{}` has more arguments than generators",
            sig.rel_name(r)
        )));
    }
    let size = m.size();
    let ground_set = m.closure_within(&[], size);
    let mut owners = vec![Vec::new(); size];
    for (j, &x) in w.generators.iter().enumerate() {
        for (e, reached) in m.closure_within(&[x], size).into_iter().enumerate() {
            if reached && !ground_set[e] {
                owners[e].push(j);
            }
        }
    }
    let ground = owners
        .iter()
        .zip(&ground_set)
        .take_while(|(o, &g)| g || o.len() > 1)
        .count();
    let shape = || Error::Precondition("witness is not block-shaped".into());
    if !(size - ground).is_multiple_of(n) {
        return Err(shape());
    }
    let block = (size - ground) / n;
    for (e, o) in owners.iter().enumerate().skip(ground) {
        if o.as_slice() != [(e - ground) / block] {
            return Err(shape());
        }
    }
    let generator = w.generators[0].checked_sub(ground).ok_or_else(shape)?;
    let to_target = |v: usize| {
        if v < ground {
            Target::Ground(v)
        } else {
            Target::Block((v - ground) % block)
        }
    };
    let ground_map = (0..ground)
        .map(|g| sig.functions().map(|f| m.function(f, &[g])).collect())
        .collect();
    let block_map = (0..block)
        .map(|b| {
            sig.functions()
                .map(|f| to_target(m.function(f, &[ground + b])))
                .collect()
        })
        .collect();
    let constants = sig.constants().map(|c| m.constant(c)).collect();
    let mut template = Template {
        signature: sig.clone(),
        ground,
        block,
        generator,
        ground_map,
        block_map,
        constants,
        relations: BTreeMap::new(),
        steps: w.steps,
    };
    for r in sig.relations() {
        for args in tuples(size, sig.rel_arity(r)) {
            let located: Vec<(Target, Option<usize>)> =
                args.iter().map(|&e| template.locate(e)).collect();
            let idx: Vec<Option<usize>> = located.iter().map(|l| l.1).collect();
            let key = (r, located.iter().map(|l| l.0).collect(), pattern(&idx));
            let v = m.holds(r, &args);
            if *template.relations.entry(key).or_insert(v) != v {
                return Err(Error::Precondition(
                    "relations are not uniform across blocks".into(),
                ));
            }
        }
    }
    template.relations.retain(|_, v| *v);
    if template.materialize(n)?.0 != *m {
        return Err(shape());
    }
    let terms = classify_terms(&template);
    Ok(StretchTemplate {
        witness: w.clone(),
        template,
        terms,
    })
}

fn classify_terms(t: &Template) -> Vec<(Vec<FnId>, TermClass)> {
    let fns: Vec<FnId> = t.signature.functions().collect();
    let mut out = vec![(Vec::new(), Target::Block(t.generator))];
    let mut frontier = out.clone();
    for _ in 0..t.steps {
        let mut next = Vec::new();
        for (word, at) in &frontier {
            for &f in &fns {
                let to = match *at {
                    Target::Ground(g) => Target::Ground(t.ground_map[g][f.0]),
                    Target::Block(b) => t.block_map[b][f.0],
                };
                let mut w = vec![f];
                w.extend_from_slice(word);
                next.push((w, to));
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.into_iter()
        .map(|(w, at)| {
            let class = match at {
                Target::Ground(g) => TermClass::ConstantOnTail(g),
                Target::Block(b) => TermClass::Interleaved(b),
            };
            (w, class)
        })
        .collect()
}

impl StretchTemplate {
    /// `M(Y)` and its generators. An `ω`-prefix of `p` points is exact: the
    /// first `p` blocks of `M(ω)` with all function values and relations.
    pub fn stretch(&self, y: OrderSpec) -> Result<(FiniteStructure, Vec<usize>)> {
        self.template.materialize(y.points())
    }

    pub fn order_type(&self, y: OrderSpec) -> OrderType {
        let t = &self.template;
        match y {
            OrderSpec::Finite(k) => OrderType::Finite(t.ground + k * t.block),
            OrderSpec::OmegaPrefix(_) => OrderType::Omega {
                prefix: t.ground,
                block: t.block,
            },
        }
    }

    /// The extension `M(f)` of an increasing map `f: k -> l` to an
    /// embedding `M(k) -> M(l)`: ground fixed, block `j` onto block `f(j)`.
    pub fn embedding(&self, f: &[usize], l: usize) -> Result<Vec<usize>> {
        if f.windows(2).any(|p| p[0] >= p[1]) || f.last().is_some_and(|&v| v >= l) {
            return Err(Error::Precondition(format!(
                "{f:?} is not an increasing map into {l}"
            )));
        }
        let t = &self.template;
        let mut map: Vec<usize> = (0..t.ground).collect();
        for &j in f {
            map.extend((0..t.block).map(|b| t.element(j, b)));
        }
        Ok(map)
    }
}

/// Whether `map` is an order-preserving embedding of `a` into `b`: it
/// commutes with functions and constants and preserves relations both ways.
pub fn is_embedding(a: &FiniteStructure, b: &FiniteStructure, map: &[usize]) -> bool {
    let sig = a.signature();
    if map.len() != a.size()
        || map.iter().any(|&v| v >= b.size())
        || map.windows(2).any(|p| p[0] >= p[1])
    {
        return false;
    }
    sig.constants().all(|c| map[a.constant(c)] == b.constant(c))
        && sig.functions().all(|f| {
            tuples(a.size(), sig.fn_arity(f)).all(|args| {
                let image: Vec<usize> = args.iter().map(|&e| map[e]).collect();
                map[a.function(f, &args)] == b.function(f, &image)
            })
        })
        && sig.relations().all(|r| {
            tuples(a.size(), sig.rel_arity(r)).all(|args| {
                let image: Vec<usize> = args.iter().map(|&e| map[e]).collect();
                a.holds(r, &args) == b.holds(r, &image)
            })
        })
}

/// Letters of a model in `<`-order, one per element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Word {
    pub alphabet: Vec<String>,
    pub letters: Vec<usize>,
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.alphabet.iter().all(|a| a.chars().count() == 1) {
            ""
        } else {
            " "
        };
        let parts: Vec<&str> = self
            .letters
            .iter()
            .map(|&l| self.alphabet[l].as_str())
            .collect();
        f.write_str(&parts.join(sep))
    }
}

/// The word spelled by predicates that partition the domain.
pub fn word_of_model(m: &FiniteStructure, letters: &[RelId]) -> Result<Word> {
    let sig = m.signature();
    if let Some(&r) = letters.iter().find(|&&r| sig.rel_arity(r) != 1) {
        return Err(Error::NotAPartition(format!(
            "`{}` is not unary",
            sig.rel_name(r)
        )));
    }
    let letters_at = (0..m.size())
        .map(|e| {
            let hits: Vec<usize> = (0..letters.len())
                .filter(|&i| m.holds(letters[i], &[e]))
                .collect();
            match hits.as_slice() {
                [l] => Ok(*l),
                _ => Err(Error::NotAPartition(format!(
                    "element {e} lies in {} letters",
                    hits.len()
                ))),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Word {
        alphabet: letters
            .iter()
            .map(|&r| sig.rel_name(r).to_string())
            .collect(),
        letters: letters_at,
    })
}

/// The word of unary types: each element is labelled by the set of unary
/// predicates it satisfies (`-` for none). Always a partition.
pub fn type_word(m: &FiniteStructure) -> Word {
    let sig = m.signature();
    let preds: Vec<RelId> = sig.relations().filter(|&r| sig.rel_arity(r) == 1).collect();
    let mut alphabet: Vec<String> = Vec::new();
    let letters = (0..m.size())
        .map(|e| {
            let held: Vec<&str> = preds
                .iter()
                .filter(|&&r| m.holds(r, &[e]))
                .map(|&r| sig.rel_name(r))
                .collect();
            let name = if held.is_empty() {
                "-".to_string()
            } else {
                held.join("+")
            };
            alphabet.iter().position(|a| *a == name).unwrap_or_else(|| {
                alphabet.push(name);
                alphabet.len() - 1
            })
        })
        .collect();
    Word { alphabet, letters }
}

/// Shape `u v^ω` of a word prefix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Periodicity {
    pub u: usize,
    pub v: usize,
}

impl fmt::Display for Periodicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u={} v={}", self.u, self.v)
    }
}

/// Shortest `u` such that the rest of the word has period `period` and
/// holds at least two full periods. `None` if there is none.
pub fn ultimately_periodic(letters: &[usize], period: usize) -> Option<Periodicity> {
    if period == 0 {
        return None;
    }
    let mut u = letters.len().saturating_sub(period);
    while u > 0 && letters[u - 1] == letters[u - 1 + period] {
        u -= 1;
    }
    (letters.len() >= u + 2 * period).then_some(Periodicity { u, v: period })
}

/// Whether blocks `from..` of a stretched prefix spell the same letters.
pub fn blocks_agree(word: &Word, ground: usize, block: usize, from: usize) -> bool {
    let blocks: Vec<&[usize]> = word.letters[ground..].chunks(block.max(1)).collect();
    blocks
        .iter()
        .skip(from)
        .all(|b| *b == blocks[from.min(blocks.len().saturating_sub(1))])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fixture;
    use crate::template::{search_template, TemplateOptions, TemplateOutcome};

    fn found(name: &str) -> (Template, IndiscernibleWitness) {
        let f = fixture(name).unwrap();
        let opts = TemplateOptions {
            generators: 6,
            steps: f.n,
            cap: f.n + 1,
            budget: 1_000_000,
        };
        match search_template(&f.sentence, opts).unwrap().0 {
            TemplateOutcome::Found(b) => *b,
            _ => panic!("{name}: no template"),
        }
    }

    #[test]
    fn extraction_recovers_the_search_template() {
        for name in ["ab_blocks", "first_marked", "order"] {
            let (mut t, w) = found(name);
            t.relations.retain(|_, v| *v);
            assert_eq!(build_template(&w).unwrap().template, t, "{name}");
        }
    }

    #[test]
    fn order_types_count_blocks() {
        let st = build_template(&found("first_marked").1).unwrap();
        let (g, b) = (st.template.ground, st.template.block);
        for k in 1..5 {
            assert_eq!(
                st.order_type(OrderSpec::Finite(k)),
                OrderType::Finite(g + k * b)
            );
            assert_eq!(
                st.stretch(OrderSpec::Finite(k)).unwrap().0.size(),
                g + k * b
            );
        }
        assert_eq!(
            st.order_type(OrderSpec::OmegaPrefix(3)),
            OrderType::Omega {
                prefix: g,
                block: b
            }
        );
    }

    #[test]
    fn stretched_words_are_periodic_in_the_block() {
        for (name, word, u) in [
            ("ab_blocks", "ABABABABABAB", 0),
            ("first_marked", "M------", 1),
        ] {
            let st = build_template(&found(name).1).unwrap();
            let (m, _) = st.stretch(OrderSpec::OmegaPrefix(6)).unwrap();
            let w = type_word(&m);
            let shown = w
                .to_string()
                .replace('-', if name == "ab_blocks" { "B" } else { "-" });
            assert_eq!(shown, word, "{name}");
            let b = st.template.block;
            assert_eq!(
                ultimately_periodic(&w.letters, b),
                Some(Periodicity { u, v: b })
            );
            assert!(blocks_agree(&w, st.template.ground, b, 1));
        }
    }

    #[test]
    fn plain_witness_is_refused() {
        let (_, mut w) = found("order");
        w.kind = Kind::Plain;
        assert!(matches!(build_template(&w), Err(Error::Precondition(_))));
    }

    #[test]
    fn periodicity_of_constant_and_prefixed_words() {
        assert_eq!(
            ultimately_periodic(&[0; 6], 1),
            Some(Periodicity { u: 0, v: 1 })
        );
        assert_eq!(
            ultimately_periodic(&[1, 0, 2, 0, 2, 0, 2], 2),
            Some(Periodicity { u: 1, v: 2 })
        );
        assert_eq!(ultimately_periodic(&[0, 1, 2], 2), None);
    }

    #[test]
    fn order_spec_parses() {
        assert_eq!("4".parse::<OrderSpec>().unwrap(), OrderSpec::Finite(4));
        assert_eq!(
            "omega-prefix(3)".parse::<OrderSpec>().unwrap(),
            OrderSpec::OmegaPrefix(3)
        );
        assert!("omega-prefix(0)".parse::<OrderSpec>().is_err());
        assert_eq!(OrderSpec::OmegaPrefix(3).to_string(), "omega-prefix(3)");
    }
}
