//! The book under `book/` is the narrative documentation of the `scs2s`
//! crate, and its code snippets must keep working as the library evolves.
//! mdbook cannot run snippets against a local crate, so each chapter is
//! included here as a doc comment: `cargo test -p scs2s-guide --doc` runs
//! every ```rust fence in the book as an ordinary doctest, one module per
//! chapter so a failure names its chapter.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/data-pipeline.md")]
pub mod data_pipeline {}

#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/detection.md")]
pub mod detection {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
