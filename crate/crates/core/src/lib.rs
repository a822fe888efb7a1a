pub mod checkpoint;
pub mod corpus;
pub mod cv;
pub mod digest;
pub mod eval;
pub mod features;
pub mod model;
pub mod nn;
pub mod optim;
pub mod report;
pub mod stats;
pub mod svg;
pub mod synthetic;
pub mod text;
pub mod train;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/text.md")]
    mod text {}
    #[doc = include_str!("../../../book/src/features.md")]
    mod features {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    mod statistics {}
}
