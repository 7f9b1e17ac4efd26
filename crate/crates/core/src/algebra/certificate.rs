use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{build_block_graph, Matching, VarBlock};
use super::reduced::{jacobian, PairBlocks, ReducedSystem, ReducedVars, VarCoord};
use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, numeric_rank, signed_permutation_det, CMat, RankTolerance};
use crate::model::SystemConfig;
use crate::seed;

/// A 0/1 channel instance whose Jacobian, restricted to the variables kept by
/// a complete matching, is a signed permutation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub system: ReducedSystem,
    pub vars: ReducedVars,
    /// Variable blocks left unmatched and frozen at zero.
    pub removed: Vec<VarBlock>,
}

impl Certificate {
    pub fn jacobian(&self) -> CMat {
        jacobian(&self.system, &self.vars).expect("certificate shapes are consistent")
    }

    /// Exact determinant when the Jacobian is a signed permutation.
    pub fn jacobian_det(&self) -> Option<i64> {
        signed_permutation_det(&self.jacobian())
    }
}

fn block_coords(cfg: &SystemConfig, b: VarBlock, d: usize) -> Vec<VarCoord> {
    let mut out = Vec::with_capacity(d * d);
    for col in 0..d {
        for i in 0..d {
            out.push(match b {
                VarBlock::Recv { user, block } => VarCoord::Recv {
                    user,
                    row: block * d + i,
                    col,
                },
                VarBlock::Send { user, block } => VarCoord::Send {
                    user,
                    row: block * d + i,
                    col,
                },
            });
        }
    }
    debug_assert!(out.iter().all(|c| match *c {
        VarCoord::Recv { user, row, .. } => row < cfg.rx()[user] - d,
        VarCoord::Send { user, row, .. } => row < cfg.tx()[user] - d,
    }));
    out
}

/// Builds the certificate channels for a complete matching: `H4 = 0`,
/// `H1 = 0`, and the `d x d` block of `H3` (`H2`) belonging to a `Ubar_k`
/// (`Vbar_j`) block is the identity exactly when that block is matched to the
/// pair, zero otherwise.
pub fn construct_certificate(cfg: &SystemConfig, matching: &Matching) -> Result<Certificate> {
    let g = build_block_graph(cfg)?;
    matching.validate(&g)?;
    let d = g.block_size();
    let one = Complex64::new(1.0, 0.0);

    let blocks = g
        .y_nodes()
        .iter()
        .zip(&matching.y_to_x)
        .map(|(&p, &x)| {
            let (nk, mj) = (cfg.rx()[p.rx], cfg.tx()[p.tx]);
            let mut h2 = CMat::zeros(d, mj - d);
            let mut h3 = CMat::zeros(nk - d, d);
            match g.x_nodes()[x] {
                VarBlock::Recv { block, .. } => {
                    for i in 0..d {
                        h3[(block * d + i, i)] = one;
                    }
                }
                VarBlock::Send { block, .. } => {
                    for i in 0..d {
                        h2[(i, block * d + i)] = one;
                    }
                }
            }
            PairBlocks {
                pair: p,
                h1: CMat::zeros(d, d),
                h2,
                h3,
                h4: CMat::zeros(nk - d, mj - d),
            }
        })
        .collect();
    let system = ReducedSystem::new(cfg.clone(), blocks)?;

    let removed: Vec<VarBlock> = matching
        .unmatched_x(&g)
        .into_iter()
        .map(|x| g.x_nodes()[x])
        .collect();
    let frozen: Vec<VarCoord> = removed
        .iter()
        .flat_map(|&b| block_coords(cfg, b, d))
        .collect();
    let vars = ReducedVars::zeros(cfg)?.freeze(frozen);
    Ok(Certificate {
        system,
        vars,
        removed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificationOutcome {
    CertifiedFullRank,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certification {
    pub equations: usize,
    pub variables: usize,
    /// Numeric Jacobian rank at each sampled point, in trial order.
    pub ranks: Vec<usize>,
    pub outcome: CertificationOutcome,
}

/// Random reduced system and random point for one trial.
pub fn random_instance(cfg: &SystemConfig, seed: u64) -> Result<(ReducedSystem, ReducedVars)> {
    let mut rng = seed::rng(seed);
    let blocks = cfg
        .cross_pairs()
        .map(|p| {
            let (dk, dj) = (cfg.streams()[p.rx], cfg.streams()[p.tx]);
            let (nk, mj) = (cfg.rx()[p.rx], cfg.tx()[p.tx]);
            PairBlocks {
                pair: p,
                h1: complex_gaussian(dk, dj, &mut rng),
                h2: complex_gaussian(dk, mj.saturating_sub(dj), &mut rng),
                h3: complex_gaussian(nk.saturating_sub(dk), dj, &mut rng),
                h4: complex_gaussian(nk.saturating_sub(dk), mj.saturating_sub(dj), &mut rng),
            }
        })
        .collect();
    let system = ReducedSystem::new(cfg.clone(), blocks)?;
    let (ubar, vbar) = (0..cfg.users())
        .map(|k| {
            let d = cfg.streams()[k];
            (
                complex_gaussian(cfg.rx()[k] - d, d, &mut rng),
                complex_gaussian(cfg.tx()[k] - d, d, &mut rng),
            )
        })
        .unzip();
    let vars = ReducedVars::new(cfg, ubar, vbar)?;
    Ok((system, vars))
}

/// Samples `trials` random (channel, point) pairs and reports full row rank of
/// the Jacobian at any of them as a certificate of generic feasibility.
pub fn certify_generic_feasibility(
    cfg: &SystemConfig,
    trials: usize,
    seed: u64,
) -> Result<Certification> {
    if trials == 0 {
        return Err(Error::InvalidOptions("trials must be at least 1".into()));
    }
    let equations = cfg.equation_count();
    let ranks = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (rs, rv) =
                random_instance(cfg, seed::derive(seed, &[seed::tags::CERTIFY, t as u64]))?;
            Ok(numeric_rank(&jacobian(&rs, &rv)?, RankTolerance::default()))
        })
        .collect::<Result<Vec<usize>>>()?;
    let outcome = if ranks.contains(&equations) {
        CertificationOutcome::CertifiedFullRank
    } else {
        CertificationOutcome::RankDeficient
    };
    Ok(Certification {
        equations,
        variables: cfg.variable_count(),
        ranks,
        outcome,
    })
}
