//! Bundled sentences with their closure bounds.
//!
//! | name | finite spectrum | ω-model |
//! |------|-----------------|---------|
//! | `example2` | sizes ≥ 2 | no |
//! | `theta` | all sizes | no |
//! | `beta` | even sizes | no |
//! | `theta_star_beta` | sizes ≥ 2 | no |
//! | `single` | {1} | no |
//! | `ab_blocks` | even sizes | yes |
//! | `first_marked` | all sizes | yes |
//! | `order` | all sizes | yes |
//! | `pinning` | {2} | no |
//! | `nonlocal` | not local at its stated bound | |
//! | `phi0` | stand-in base of the `φ_n` tower | |

use crate::combinators::{star_psi, CombinatorResult};
use crate::error::{Error, Result};
use crate::parser::parse_file;

const SOURCES: [(&str, &str); 10] = [
    ("example2", include_str!("../fixtures/example2.sent")),
    ("theta", include_str!("../fixtures/theta.sent")),
    ("beta", include_str!("../fixtures/beta.sent")),
    ("single", include_str!("../fixtures/single.sent")),
    ("ab_blocks", include_str!("../fixtures/ab_blocks.sent")),
    (
        "first_marked",
        include_str!("../fixtures/first_marked.sent"),
    ),
    ("order", include_str!("../fixtures/order.sent")),
    ("pinning", include_str!("../fixtures/pinning.sent")),
    ("nonlocal", include_str!("../fixtures/nonlocal.sent")),
    ("phi0", include_str!("../fixtures/phi0.sent")),
];

/// Every fixture name, including derived ones.
pub fn names() -> Vec<&'static str> {
    let mut v: Vec<&str> = SOURCES.iter().map(|(n, _)| *n).collect();
    v.push("theta_star_beta");
    v
}

/// Source text of a file-backed fixture.
pub fn source(name: &str) -> Option<&'static str> {
    SOURCES.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Loads a fixture by name.
pub fn fixture(name: &str) -> Result<CombinatorResult> {
    if name == "theta_star_beta" {
        return star_psi(&fixture("theta")?, &fixture("beta")?);
    }
    let text = source(name).ok_or_else(|| Error::UnknownSymbol(format!("fixture `{name}`")))?;
    let file = parse_file(text)?;
    let n = file
        .steps
        .ok_or_else(|| Error::Precondition(format!("fixture `{name}` has no steps line")))?;
    Ok(CombinatorResult::base(name, file.sentence, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::finite_spectrum;

    #[test]
    fn all_fixtures_load() {
        for n in names() {
            let f = fixture(n).unwrap();
            assert!(f.n >= 1, "{n}");
        }
        assert_eq!(fixture("theta_star_beta").unwrap().n, 3);
    }

    #[test]
    fn documented_spectra_hold_up_to_six() {
        let expected: [(&str, Vec<usize>); 5] = [
            ("single", vec![1]),
            ("ab_blocks", vec![2, 4, 6]),
            ("first_marked", (1..=6).collect()),
            ("order", (1..=6).collect()),
            ("pinning", vec![2]),
        ];
        for (name, sizes) in expected {
            let table = finite_spectrum(&fixture(name).unwrap().sentence, 6, u64::MAX).unwrap();
            assert!(table.complete());
            assert_eq!(table.members(), sizes, "{name}");
        }
    }
}
