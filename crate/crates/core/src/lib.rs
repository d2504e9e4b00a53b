pub mod clocks;
pub mod dfs;
pub mod engine;
pub mod experiments;
pub mod fifo;
pub mod scenario;
pub mod taskgraph;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/clocks.md")]
    mod clocks {}
    #[doc = include_str!("../../../book/src/fifo.md")]
    mod fifo {}
    #[doc = include_str!("../../../book/src/taskgraph.md")]
    mod taskgraph {}
    #[doc = include_str!("../../../book/src/engine.md")]
    mod engine {}
    #[doc = include_str!("../../../book/src/dfs.md")]
    mod dfs {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/scenario-format.md")]
    mod scenario_format {}
    #[doc = include_str!("../../../book/src/plotting.md")]
    mod plotting {}
}
