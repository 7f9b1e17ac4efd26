//! The reduced bilinear alignment system, its Jacobian, the block graph of
//! the equal-stream case and the matching-based Jacobian certificate.

mod certificate;
mod graph;
mod reduced;

pub use certificate::{
    certify_generic_feasibility, construct_certificate, random_instance, Certificate,
    Certification, CertificationOutcome,
};
pub use graph::{
    build_block_graph, complete_matching, BlockGraph, HallViolator, Matching, MatchingOutcome,
    VarBlock,
};
pub use reduced::{
    eval_polymap, jacobian, partition_channels, variable_coords, PairBlocks, ReducedSystem,
    ReducedVars, VarCoord,
};

pub use crate::linalg::{numeric_rank, RankTolerance};
