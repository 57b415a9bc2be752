//! Property and oracle suites shared by `ace check` and the acceptance runner.

pub mod dims;
mod fitting;
mod numerics;
mod symmetry;

pub use fitting::{conditioning, convergence, ConditioningCell, ConvergenceParams};
pub use numerics::{coupling, evaluators, gradients, orthogonality, performance, EvaluatorParams};
pub use symmetry::{cylindrical, invariance, InvarianceParams};

use crate::error::Result;
use serde::Serialize;
use std::time::Instant;

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seed: u64,
    /// Wall time in seconds.
    pub elapsed: f64,
}

impl std::fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} (seed {}, {:.1}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seed,
            self.elapsed,
            self.detail
        )
    }
}

pub(crate) fn timed(name: &str, seed: u64, f: impl FnOnce() -> Result<(bool, String)>) -> Result<CheckOutcome> {
    let t = Instant::now();
    let (passed, detail) = f()?;
    Ok(CheckOutcome { name: name.to_string(), passed, detail, seed, elapsed: t.elapsed().as_secs_f64() })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Invariance,
    Dims,
    Coupling,
    Evaluators,
    Gradients,
    Orthogonality,
    Convergence,
    Conditioning,
    Performance,
    Cylindrical,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Invariance,
        Suite::Dims,
        Suite::Coupling,
        Suite::Evaluators,
        Suite::Gradients,
        Suite::Orthogonality,
        Suite::Convergence,
        Suite::Conditioning,
        Suite::Performance,
        Suite::Cylindrical,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Invariance => "invariance",
            Suite::Dims => "dims",
            Suite::Coupling => "coupling",
            Suite::Evaluators => "evaluators",
            Suite::Gradients => "gradients",
            Suite::Orthogonality => "orthogonality",
            Suite::Convergence => "convergence",
            Suite::Conditioning => "conditioning",
            Suite::Performance => "performance",
            Suite::Cylindrical => "cyl",
        }
    }

    pub fn parse(s: &str) -> Option<Suite> {
        Suite::ALL.into_iter().find(|x| x.name() == s)
    }

    /// Runs the suite at its default (acceptance) size.
    pub fn run(&self, seed: u64) -> Result<CheckOutcome> {
        match self {
            Suite::Invariance => invariance(&InvarianceParams::default(), seed),
            Suite::Dims => dims::check(),
            Suite::Coupling => coupling(5, 4),
            Suite::Evaluators => evaluators(&EvaluatorParams::default(), seed),
            Suite::Gradients => gradients(50, seed),
            Suite::Orthogonality => orthogonality(),
            Suite::Convergence => convergence(&ConvergenceParams::default(), seed),
            Suite::Conditioning => conditioning(seed).map(|(o, _)| o),
            Suite::Performance => performance(seed).map(|(o, _)| o),
            Suite::Cylindrical => cylindrical(200, seed),
        }
    }
}
