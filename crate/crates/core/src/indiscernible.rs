//! Indiscernibility checks and witnesses.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::structure::{parse_dump_with_extras, tuples, FiniteStructure};
use crate::syntax::{FnId, Signature};

/// Which indiscernibility property a witness certifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Kind {
    Plain,
    Special,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Plain => "plain",
            Kind::Special => "special",
        })
    }
}

/// Builds the relation `{(t(a), t(b))}` for all terms `t` of complexity at
/// most `cap` and checks that it is a partial isomorphism.
fn same_atoms(m: &FiniteStructure, a: &[usize], b: &[usize], cap: usize) -> bool {
    let k = m.size();
    let sig = m.signature();
    // fwd[x] = y records the pair (x, y); bwd is the inverse.
    let mut fwd = vec![usize::MAX; k];
    let mut bwd = vec![usize::MAX; k];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let add = |x: usize,
               y: usize,
               fwd: &mut Vec<usize>,
               bwd: &mut Vec<usize>,
               pairs: &mut Vec<(usize, usize)>| {
        if fwd[x] == usize::MAX && bwd[y] == usize::MAX {
            fwd[x] = y;
            bwd[y] = x;
            pairs.push((x, y));
            true
        } else {
            fwd[x] == y && bwd[y] == x
        }
    };
    for (&x, &y) in a.iter().zip(b) {
        if !add(x, y, &mut fwd, &mut bwd, &mut pairs) {
            return false;
        }
    }
    for c in sig.constants() {
        let v = m.constant(c);
        if !add(v, v, &mut fwd, &mut bwd, &mut pairs) {
            return false;
        }
    }
    let mut frontier_start = 0;
    for _ in 0..cap {
        let level_end = pairs.len();
        if frontier_start == level_end {
            break;
        }
        let snapshot = pairs.clone();
        for f in sig.functions() {
            let arity = sig.fn_arity(f);
            for pos in tuples(snapshot.len(), arity) {
                if pos.iter().all(|&p| p < frontier_start) {
                    continue;
                }
                let xs: Vec<usize> = pos.iter().map(|&p| snapshot[p].0).collect();
                let ys: Vec<usize> = pos.iter().map(|&p| snapshot[p].1).collect();
                if !add(
                    m.function(f, &xs),
                    m.function(f, &ys),
                    &mut fwd,
                    &mut bwd,
                    &mut pairs,
                ) {
                    return false;
                }
            }
        }
        frontier_start = level_end;
    }
    for (i, &(x1, y1)) in pairs.iter().enumerate() {
        for &(x2, y2) in &pairs[i + 1..] {
            if (x1 < x2) != (y1 < y2) {
                return false;
            }
        }
    }
    for r in sig.relations() {
        for pos in tuples(pairs.len(), sig.rel_arity(r)) {
            let xs: Vec<usize> = pos.iter().map(|&p| pairs[p].0).collect();
            let ys: Vec<usize> = pos.iter().map(|&p| pairs[p].1).collect();
            if m.holds(r, &xs) != m.holds(r, &ys) {
                return false;
            }
        }
    }
    true
}

/// Increasing `len`-subsequences of `0..n`, lexicographically.
pub(crate) fn increasing(n: usize, len: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, len: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            if n - i < len - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, len, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, len, &mut Vec::new(), &mut out);
    out
}

fn strictly_increasing(x: &[usize]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

/// Order-isomorphic tuples from `x` (of every length up to `|x|`) satisfy
/// the same atomic formulas whose terms have complexity at most `cap`.
pub fn check_plain_indiscernibles(m: &FiniteStructure, x: &[usize], cap: usize) -> Result<bool> {
    check_plain_up_to(m, x, cap, x.len())
}

/// As `check_plain_indiscernibles`, comparing tuples of length at most
/// `max_len` only.
pub fn check_plain_up_to(
    m: &FiniteStructure,
    x: &[usize],
    cap: usize,
    max_len: usize,
) -> Result<bool> {
    if let Some(&e) = x.iter().find(|&&e| e >= m.size()) {
        return Err(Error::OutOfDomain(e));
    }
    if !strictly_increasing(x) {
        return Err(Error::Precondition(
            "indiscernible sequences are strictly increasing".into(),
        ));
    }
    for len in 1..=max_len.min(x.len()) {
        let all = increasing(x.len(), len);
        let Some(first) = all.first() else { continue };
        let a: Vec<usize> = first.iter().map(|&i| x[i]).collect();
        for other in &all[1..] {
            let b: Vec<usize> = other.iter().map(|&i| x[i]).collect();
            if !same_atoms(m, &a, &b, cap) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn unary_functions(sig: &Signature) -> Result<Vec<FnId>> {
    match sig.functions().find(|&f| sig.fn_arity(f) != 1) {
        Some(f) => Err(Error::NotUnary(sig.fn_name(f).to_string())),
        None => Ok(sig.functions().collect()),
    }
}

/// Value vectors of the distinct unary terms of complexity at most `cap`
/// evaluated on `points`, plus the values of ground terms.
pub(crate) fn unary_term_values(
    m: &FiniteStructure,
    points: &[usize],
    cap: usize,
) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    let fns = unary_functions(m.signature())?;
    let mut seen = std::collections::BTreeSet::new();
    let mut layer = vec![points.to_vec()];
    seen.insert(points.to_vec());
    let mut all = layer.clone();
    let mut ground: std::collections::BTreeSet<usize> =
        m.signature().constants().map(|c| m.constant(c)).collect();
    let mut ground_layer: Vec<usize> = ground.iter().copied().collect();
    for _ in 0..cap {
        let mut next = Vec::new();
        for v in &layer {
            for &f in &fns {
                let w: Vec<usize> = v.iter().map(|&e| m.function(f, &[e])).collect();
                if seen.insert(w.clone()) {
                    next.push(w);
                }
            }
        }
        let mut next_ground = Vec::new();
        for &g in &ground_layer {
            for &f in &fns {
                let w = m.function(f, &[g]);
                if ground.insert(w) {
                    next_ground.push(w);
                }
            }
        }
        all.extend(next.iter().cloned());
        layer = next;
        ground_layer = next_ground;
    }
    Ok((all, ground.into_iter().collect()))
}

/// Conditions (i) and (ii) for unary terms of complexity at most `cap`,
/// together with plain indiscernibility.
///
/// (i) `t(x) < y` for `x < y` in `X`; (ii) `t(y) < x < y` implies `t` is
/// constant on the part of `X` above `x`. Ground terms are included in (i).
pub fn check_special_indiscernibles(m: &FiniteStructure, x: &[usize], cap: usize) -> Result<bool> {
    let (terms, ground) = unary_term_values(m, x, cap)?;
    if !check_plain_indiscernibles(m, x, cap)? {
        return Ok(false);
    }
    let n = x.len();
    for vals in &terms {
        for i in 0..n {
            for j in i + 1..n {
                if vals[i] >= x[j] {
                    return Ok(false);
                }
                if vals[j] < x[i] && (i + 1..n).any(|z| vals[z] != vals[j]) {
                    return Ok(false);
                }
            }
        }
    }
    if n >= 2 && ground.iter().any(|&g| g >= x[1]) {
        return Ok(false);
    }
    Ok(true)
}

/// A finite model with a sequence of generators certified indiscernible.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndiscernibleWitness {
    pub model: FiniteStructure,
    pub generators: Vec<usize>,
    pub kind: Kind,
    /// Closure bound: the generators generate the model in this many steps.
    pub steps: usize,
}

impl IndiscernibleWitness {
    /// Re-checks generation and the indiscernibility property with the
    /// given term-complexity cap.
    pub fn verify(&self, cap: usize) -> Result<bool> {
        let reach = self.model.closure_within(&self.generators, self.steps);
        if reach.iter().any(|&b| !b) {
            return Ok(false);
        }
        match self.kind {
            Kind::Plain => check_plain_indiscernibles(&self.model, &self.generators, cap),
            Kind::Special => check_special_indiscernibles(&self.model, &self.generators, cap),
        }
    }

    /// Model dump followed by `generators`, `kind` and `steps` lines.
    pub fn dump(&self) -> String {
        let gens: Vec<String> = self.generators.iter().map(|g| g.to_string()).collect();
        format!(
            "{}generators ({})\nkind {}\nsteps {}\n",
            self.model.dump(),
            gens.join(", "),
            self.kind,
            self.steps
        )
    }

    /// Reads the format written by `dump`.
    pub fn parse(sig: Arc<Signature>, text: &str) -> Result<IndiscernibleWitness> {
        let (model, extras) = parse_dump_with_extras(sig, text)?;
        let (mut generators, mut kind, mut steps) = (None, None, None);
        for (line, text) in extras {
            let bad = |message: &str| Error::Dump {
                line,
                message: message.into(),
            };
            let (kw, rest) = text.split_once(char::is_whitespace).unwrap_or((&text, ""));
            let rest = rest.trim();
            match kw {
                "generators" => {
                    let inner = rest
                        .strip_prefix('(')
                        .and_then(|r| r.strip_suffix(')'))
                        .ok_or_else(|| bad("expected `generators (..)`"))?;
                    let gens: std::result::Result<Vec<usize>, _> = if inner.trim().is_empty() {
                        Ok(Vec::new())
                    } else {
                        inner
                            .split(',')
                            .map(|p| p.trim().parse::<usize>())
                            .collect()
                    };
                    generators = Some(gens.map_err(|_| bad("malformed generator"))?);
                }
                "kind" => {
                    kind = Some(match rest {
                        "plain" => Kind::Plain,
                        "special" => Kind::Special,
                        _ => return Err(bad("kind is `plain` or `special`")),
                    })
                }
                "steps" => steps = Some(rest.parse().map_err(|_| bad("malformed steps"))?),
                _ => return Err(bad(&format!("unexpected line `{text}`"))),
            }
        }
        let missing = |what: &str| Error::Dump {
            line: 0,
            message: format!("missing `{what}` line"),
        };
        let generators = generators.ok_or_else(|| missing("generators"))?;
        if let Some(&g) = generators.iter().find(|&&g| g >= model.size()) {
            return Err(Error::OutOfDomain(g));
        }
        Ok(IndiscernibleWitness {
            model,
            generators,
            kind: kind.ok_or_else(|| missing("kind"))?,
            steps: steps.ok_or_else(|| missing("steps"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_sentence;

    fn structure(text: &str, size: usize) -> FiniteStructure {
        let s = parse_sentence(text).unwrap();
        FiniteStructure::new(s.signature_arc().clone(), size).unwrap()
    }

    #[test]
    fn pure_orders_are_indiscernible() {
        let m = structure("forall x . x = x", 5);
        assert!(check_plain_indiscernibles(&m, &[0, 1, 2, 3, 4], 3).unwrap());
        assert!(check_special_indiscernibles(&m, &[0, 1, 2, 3, 4], 3).unwrap());
        assert!(check_plain_indiscernibles(&m, &[3], 3).unwrap());
    }

    #[test]
    fn identity_function_is_special() {
        let mut m = structure("sig { fn f/1; }\nforall x . x = x", 4);
        let f = m.signature().function("f").unwrap();
        for e in 0..4 {
            m.set_function(f, &[e], e).unwrap();
        }
        assert!(check_special_indiscernibles(&m, &[0, 1, 3], 2).unwrap());
    }

    #[test]
    fn condition_two_detects_varying_tail() {
        // X = (1, 2, 3): f(2) = 0 < 1 but f(3) = 1 differs.
        let mut m = structure("sig { fn f/1; }\nforall x . x = x", 4);
        let f = m.signature().function("f").unwrap();
        for (e, v) in [(0, 0), (1, 0), (2, 0), (3, 1)] {
            m.set_function(f, &[e], v).unwrap();
        }
        assert!(!check_special_indiscernibles(&m, &[1, 2, 3], 1).unwrap());
    }

    #[test]
    fn relation_breaks_indiscernibility() {
        let mut m = structure("sig { rel P/1; }\nforall x . x = x", 3);
        let p = m.signature().relation("P").unwrap();
        m.set_relation(p, &[1], true).unwrap();
        assert!(!check_plain_indiscernibles(&m, &[0, 1, 2], 1).unwrap());
        assert!(check_plain_indiscernibles(&m, &[0, 2], 1).unwrap());
    }

    #[test]
    fn non_unary_is_rejected() {
        let m = structure("sig { fn g/2; }\nforall x . x = x", 2);
        assert_eq!(
            check_special_indiscernibles(&m, &[0, 1], 1),
            Err(Error::NotUnary("g".into()))
        );
    }

    #[test]
    fn witness_dump_round_trip() {
        let mut m = structure("sig { fn f/1; const a; }\nforall x . x = x", 3);
        let f = m.signature().function("f").unwrap();
        for e in 0..3 {
            m.set_function(f, &[e], 0).unwrap();
        }
        let w = IndiscernibleWitness {
            model: m,
            generators: vec![1, 2],
            kind: Kind::Special,
            steps: 1,
        };
        let text = w.dump();
        assert!(text.ends_with("generators (1, 2)\nkind special\nsteps 1\n"));
        let back = IndiscernibleWitness::parse(w.model.signature_arc().clone(), &text).unwrap();
        assert_eq!(back, w);
        assert!(back.verify(2).unwrap());
    }
}
