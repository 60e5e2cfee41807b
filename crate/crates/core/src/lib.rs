//! Minimum-time frictionless expansion of a particle in a box with a
//! bounded auxiliary harmonic trap.
//!
//! Times are in units of `T0 = sqrt(m/k0)`, lengths in units of the initial
//! width `a0`, and `hbar = m = 1`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod inverse;
pub mod optimal;
pub mod output;
pub mod plan;
pub mod quantum;
pub mod search;
pub mod thermo;
pub mod units;
