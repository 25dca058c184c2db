//! Renewal Hawkes processes: expectations on a uniform grid, closed forms for
//! exponential kernels, thinning simulation, renewal quantities and the
//! periodic-replacement cost curves built on top of them.
//!
//! Three renewal classes are covered besides the classical process and the
//! WFS process (baseline renewed at every immigrant):
//!
//! - `R1`: the baseline age resets at the exogenous times `Y1, Y1+Y2, ...`.
//! - `R2`: it resets at `min(Y, first immigrant)`.
//! - `R3`: it resets at `max(Y, first immigrant)`.
//!
//! Every expectation solves a renewal equation `m = Psi + m * n` with the
//! right-endpoint recursion of [`volterra::solve_second_kind`].

pub mod closed_form;
pub mod error;
pub mod expectations;
pub mod maintenance;
pub mod model;
mod quad;
pub mod renewal;
pub mod simulate;
pub mod validation;
pub mod volterra;

pub use error::{Error, Result};
pub use model::{BaselineHazard, ExogenousLaw, Grid, ModelSpec, OffspringKernel, ProcessClass};
