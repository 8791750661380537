pub mod combinators;
pub mod error;
pub mod finder;
pub mod fixtures;
pub mod indiscernible;
pub mod locality;
pub mod metrics;
pub mod parser;
pub mod search;
pub mod spectrum;
pub mod stretch;
pub mod structure;
pub mod syntax;
pub mod template;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/sentences.md")]
    struct Sentences;
    #[doc = include_str!("../../../book/src/locality.md")]
    struct Locality;
    #[doc = include_str!("../../../book/src/spectra.md")]
    struct Spectra;
    #[doc = include_str!("../../../book/src/indiscernibles.md")]
    struct Indiscernibles;
    #[doc = include_str!("../../../book/src/stretching.md")]
    struct Stretching;
    #[doc = include_str!("../../../book/src/combinators.md")]
    struct Combinators;
}
