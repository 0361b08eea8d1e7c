//! Learning optimal feedback-feedforward gains for spacecraft relative-motion
//! tracking by data-driven value iteration.
//!
//! The crate is organised bottom-up:
//!
//! * [`linops`]: vectorization maps, Kronecker products, spectra, least squares.
//! * [`plant`]: Hill-frame relative motion under differential drag and J2.
//! * [`riccati`]: exact ARE solve, Kleinman policy iteration, model-based VI.
//! * [`regulator`]: regulator equations and the feedforward gain.
//! * [`adp`]: data-driven value iteration from recorded trajectories.
//! * [`sim`]: fixed-step closed-loop simulator and run metrics.
//! * [`config`], [`io`], [`scenario`]: scenario files, outputs, orchestration.

// `!(x > 0.0)` is used deliberately so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, t): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= t, "{} vs {} (tol {})", a, b, t);
    }};
}

pub mod adp;
pub mod config;
pub mod error;
pub mod io;
pub mod linops;
pub mod plant;
pub mod regulator;
pub mod riccati;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
