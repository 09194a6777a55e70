//! Two-strain epidemic model with asymmetric temporary immunity and partial
//! cross-immunity.
//!
//! The crate covers simulation of the full five-compartment system and of
//! its planar reduction, steady states and reproduction numbers,
//! phase-plane diagnostics, region scans over parameter space and
//! least-squares fitting to strain-split incidence data.

// Negated float comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcation;
pub mod data;
pub mod dynamics;
pub mod equilibria;
pub mod fitting;
pub mod model;
pub mod numeric;
pub mod phase;
pub mod reproduction;

pub use model::{FullState, ModelParams, RateName, ReducedState, ReproductionSet};
