//! Finite spectra: which domain sizes carry a model.

use rayon::prelude::*;

use crate::error::Result;
use crate::search::{Problem, SearchEnd, SearchStats, Strategy};
use crate::structure::FiniteStructure;
use crate::syntax::Sentence;

/// Membership of one finite size in the spectrum.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    /// The least model of that size.
    Member(FiniteStructure),
    NonMember,
    BudgetExceeded,
}

impl Membership {
    pub fn is_member(&self) -> bool {
        matches!(self, Membership::Member(_))
    }
}

/// Spectrum restricted to sizes `1..=ceiling`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpectrumTable {
    pub rows: Vec<(usize, Membership)>,
    pub stats: SearchStats,
}

impl SpectrumTable {
    /// Sizes known to carry a model.
    pub fn members(&self) -> Vec<usize> {
        self.rows
            .iter()
            .filter(|(_, m)| m.is_member())
            .map(|(k, _)| *k)
            .collect()
    }

    /// True when no size ran out of budget.
    pub fn complete(&self) -> bool {
        self.rows
            .iter()
            .all(|(_, m)| *m != Membership::BudgetExceeded)
    }
}

/// Searches for a model of each size independently; `budget` applies per
/// size.
pub fn finite_spectrum(s: &Sentence, ceiling: usize, budget: u64) -> Result<SpectrumTable> {
    let rows: Vec<Result<((usize, Membership), SearchStats)>> = (1..=ceiling)
        .into_par_iter()
        .map(|k| {
            let mut p = Problem::new(s.signature_arc().clone(), k)?;
            p.add_sentence(s)?;
            let (model, end, stats) = p.first_model(&Strategy::Dynamic, budget);
            let m = match (model, end) {
                (Some(m), _) => Membership::Member(m),
                (None, SearchEnd::BudgetExceeded) => Membership::BudgetExceeded,
                (None, _) => Membership::NonMember,
            };
            Ok(((k, m), stats))
        })
        .collect();
    let mut table = SpectrumTable {
        rows: Vec::new(),
        stats: SearchStats::default(),
    };
    for r in rows {
        let (row, stats) = r?;
        table.rows.push(row);
        table.stats += stats;
    }
    Ok(table)
}

/// Finite sums `a_0 + ... + a_{ν-1}` with `ν` in `outer` and every `a_i` in
/// `inner`, restricted to `1..=ceiling`.
pub fn ordered_sums(inner: &[usize], outer: &[usize], ceiling: usize) -> Vec<usize> {
    // reach[c][t]: some sum of exactly c summands from `inner` equals t.
    let max_count = outer.iter().copied().max().unwrap_or(0);
    let mut reach = vec![vec![false; ceiling + 1]; max_count + 1];
    reach[0][0] = true;
    for c in 1..=max_count {
        for t in 0..=ceiling {
            reach[c][t] = inner
                .iter()
                .any(|&a| a >= 1 && a <= t && reach[c - 1][t - a]);
        }
    }
    (1..=ceiling)
        .filter(|&t| outer.iter().any(|&nu| reach[nu][t]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sums_of_even_many_blocks() {
        assert_eq!(
            ordered_sums(&[1, 2, 3, 4, 5, 6], &[2, 4, 6], 6),
            vec![2, 3, 4, 5, 6]
        );
        assert_eq!(
            ordered_sums(&[2, 4, 6], &[1, 2, 3, 4, 5, 6], 6),
            vec![2, 4, 6]
        );
        assert_eq!(ordered_sums(&[3], &[1, 2], 6), vec![3, 6]);
        assert!(ordered_sums(&[], &[1], 6).is_empty());
    }
}
