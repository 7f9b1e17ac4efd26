//! Feasibility of linear interference alignment on K-user MIMO interference
//! channels: necessary-condition checks, DoF bounds, Jacobian certificates,
//! a leakage-minimizing solver and a WMMSE sum-rate benchmark.

pub mod algebra;
pub mod benchmark;
pub mod error;
pub mod feasibility;
pub mod linalg;
pub mod model;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
pub use feasibility::{
    check_pairwise, check_per_user, check_subsets, feasibility_verdict, is_proper, max_dof_bound,
    DofBoundResult, FeasibilityReport, SubsetStrategy, Verdict,
};
pub use linalg::{CMat, RankTolerance};
pub use model::{BeamformerSet, ChannelRealization, Pair, PairSet, SystemConfig};
pub use num_complex::Complex64;
pub use solver::{min_leakage, verify_alignment, SolveOptions, SolveResult};
