//! Globally optimal AC transmission network expansion planning.
//!
//! This crate builds the mixed-integer semidefinite program for AC
//! transmission expansion planning (circuit additions per corridor under the
//! rectangular AC power-flow model), strengthens it with fence and per-line
//! conic valid inequalities, decomposes the PSD constraint along the chordal
//! structure of the network graph, and certifies globally optimal expansion
//! plans with a specialized branch-and-cut driven by a self-contained conic
//! interior-point solver.
//!
//! The main entry points are:
//! - [`network::PowerNetwork`] and [`network::parse_case`] for case data,
//! - [`opf`] for the SDP relaxation of the AC optimal power flow,
//! - [`tnep`] for the mixed-integer expansion model,
//! - [`cuts`] for the valid inequalities,
//! - [`sparsity`] for the chordal clique decomposition,
//! - [`solver`] for the conic interior-point backend,
//! - [`bnc`] for the branch-and-cut search.
//!
//! See the `examples/` directory for one runnable example per capability.

pub mod bnc;
pub mod conic;
pub mod cuts;
pub mod network;
pub mod opf;
pub mod solver;
pub mod sparsity;
pub mod tnep;

pub mod graph;

pub use bnc::{branch_and_cut, BncSettings, SearchStats};
pub use conic::{ConicProgram, LinExpr, VarId};
pub use network::{parse_case, Bus, Corridor, Generator, PowerNetwork};
pub use solver::{SolveResult, SolverSettings, SolverStatus};
pub use tnep::{build_tnep, ExpansionPlan, TnepModel};
