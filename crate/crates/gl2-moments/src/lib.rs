//! Second moments of twisted GL(2) L-series: coefficients, characters,
//! central values, main terms and the Eisenstein bookkeeping around them.

pub mod arith;
pub mod characters;
pub mod cli;
pub mod eisenstein;
pub mod error;
pub mod lseries;
pub mod mainterms;
pub mod modforms;
pub mod moments;
pub mod numeric;
pub mod residuals;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/overview.md")]
pub struct BookOverview;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/forms.md")]
pub struct BookForms;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/characters.md")]
pub struct BookCharacters;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/lvalues.md")]
pub struct BookLvalues;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/moments.md")]
pub struct BookMoments;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/mainterms.md")]
pub struct BookMainterms;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/eisenstein.md")]
pub struct BookEisenstein;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
pub struct BookCli;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/limits.md")]
pub struct BookLimits;
