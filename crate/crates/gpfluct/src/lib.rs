//! Exact-arithmetic and Monte Carlo analysis of polynomial observables of
//! randomly sampled metric measure spaces.
//!
//! The crate computes moments, cumulants and limiting fluctuation parameters
//! of monomial observables of the sample model of a metric measure space,
//! evaluates the observables exactly on the circle through a graph-reduction
//! calculus, and implements a statistical test for the homogeneity of a
//! compact space. Start with the `examples/` directory for runnable tours of
//! each capability, or with the `gpfluct` binary for the command-line entry
//! points.

pub mod circle;
pub mod mmspace;
pub mod moments;
pub mod montecarlo;
pub mod multigraph;
pub mod poly;
pub mod rational;
pub mod setpart;
pub mod symtest;

pub use circle::{CircleEvaluator, CircleValue, EvaluationResult, GraphCombination};
pub use mmspace::{MmSpace, Point};
pub use moments::LimitReport;
pub use montecarlo::{ObservableSpec, ReplicateSample};
pub use multigraph::{CanonicalKey, Multigraph};
pub use poly::{FactorialPolynomial, StandardPolynomial};
pub use rational::Rational;
pub use setpart::{RowLayout, SetPartition};
pub use symtest::{TestConfig, TestReport};

/// Caps the global worker pool from `GPFLUCT_THREADS` if the variable is set
/// and the pool has not been configured yet. Safe to call repeatedly.
pub fn init_thread_pool_from_env() {
    if let Ok(raw) = std::env::var("GPFLUCT_THREADS") {
        if let Ok(threads) = raw.trim().parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
        }
    }
}
