//! Alternating interference-leakage minimization and independent verification
//! of the alignment conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, complex_gaussian, least_dominant_eigenvectors, orthonormalize, CMat, RankTolerance,
};
use crate::model::{self, cross_pairs, BeamformerSet, ChannelRealization, Pair, SystemConfig};
use crate::seed;

/// Iterations between stall checks.
pub const STALL_WINDOW: usize = 50;
/// Minimum relative leakage decrease per stall window.
pub const STALL_RELATIVE_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub leakage_tol: f64,
    pub rank_tol: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            leakage_tol: 1e-10,
            rank_tol: 1e-6,
            seed: 0,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidOptions("max_iters must be at least 1".into()));
        }
        if !(self.leakage_tol > 0.0 && self.leakage_tol.is_finite()) {
            return Err(Error::InvalidOptions("leakage_tol must be positive".into()));
        }
        if !(self.rank_tol > 0.0 && self.rank_tol.is_finite()) {
            return Err(Error::InvalidOptions("rank_tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub beamformers: BeamformerSet,
    /// Leakage after the initial receive step, then after every iteration.
    pub leakage_trace: Vec<f64>,
    pub converged: bool,
    pub rank_ok: bool,
    pub iterations: usize,
    pub stop: StopReason,
}

impl SolveResult {
    pub fn final_leakage(&self) -> f64 {
        *self
            .leakage_trace
            .last()
            .expect("trace holds the initial leakage")
    }
}

fn receive_step(ch: &ChannelRealization, v: &[CMat], streams: &[usize]) -> Vec<CMat> {
    let k_users = ch.users();
    (0..k_users)
        .map(|k| {
            let n = ch.rx()[k];
            let mut q = CMat::zeros(n, n);
            for j in (0..k_users).filter(|&j| j != k) {
                let hv = ch.get(k, j) * &v[j];
                q += &hv * hv.adjoint();
            }
            least_dominant_eigenvectors(&q, streams[k])
        })
        .collect()
}

fn transmit_step(ch: &ChannelRealization, u: &[CMat], streams: &[usize]) -> Vec<CMat> {
    let k_users = ch.users();
    (0..k_users)
        .map(|j| {
            let m = ch.tx()[j];
            let mut q = CMat::zeros(m, m);
            for k in (0..k_users).filter(|&k| k != j) {
                let hu = ch.get(k, j).adjoint() * &u[k];
                q += &hu * hu.adjoint();
            }
            least_dominant_eigenvectors(&q, streams[j])
        })
        .collect()
}

fn leakage_of(ch: &ChannelRealization, v: &[CMat], u: &[CMat]) -> f64 {
    cross_pairs(ch.users())
        .map(|p| linalg::frob2(&(u[p.rx].adjoint() * ch.get(p.rx, p.tx) * &v[p.tx])))
        .sum()
}

/// Alternates receive and transmit steps, each choosing the least-dominant
/// eigenvectors of the interference covariance it sees. Each step minimizes
/// the leakage over one side with the other fixed, so the trace never
/// increases beyond round-off.
pub fn min_leakage(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if ch.tx() != cfg.tx() || ch.rx() != cfg.rx() {
        return Err(Error::InvalidConfig(
            "channel antenna counts do not match the configuration".into(),
        ));
    }
    let streams = cfg.streams();
    for (k, &dk) in streams.iter().enumerate() {
        let cap = cfg.tx()[k].min(cfg.rx()[k]);
        if dk > cap {
            return Err(Error::StreamsExceedAntennas {
                user: k,
                streams: dk,
                antennas: cap,
            });
        }
    }

    let mut rng = seed::rng(seed::derive(opts.seed, &[seed::tags::SOLVER_INIT]));
    let mut v: Vec<CMat> = (0..cfg.users())
        .map(|k| orthonormalize(&complex_gaussian(cfg.tx()[k], streams[k], &mut rng)))
        .collect();
    let mut u = receive_step(ch, &v, streams);
    let mut trace = vec![leakage_of(ch, &v, &u)];

    let mut stop = StopReason::MaxIterations;
    let mut iterations = 0;
    if trace[0] <= opts.leakage_tol {
        stop = StopReason::Converged;
    } else {
        while iterations < opts.max_iters {
            v = transmit_step(ch, &u, streams);
            u = receive_step(ch, &v, streams);
            iterations += 1;
            let current = leakage_of(ch, &v, &u);
            trace.push(current);
            if current <= opts.leakage_tol {
                stop = StopReason::Converged;
                break;
            }
            if iterations % STALL_WINDOW == 0 {
                let before = trace[iterations - STALL_WINDOW];
                if before - current < STALL_RELATIVE_DECREASE * before {
                    stop = StopReason::Stalled;
                    break;
                }
            }
        }
    }

    let beamformers = BeamformerSet::from_shapes(v, u)?;
    let margins = model::signal_rank_margin(ch, &beamformers)?;
    let rank_ok = margins.iter().all(|&m| m > opts.rank_tol);
    Ok(SolveResult {
        beamformers,
        converged: stop == StopReason::Converged,
        rank_ok,
        iterations,
        stop,
        leakage_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCheck {
    /// Largest squared Frobenius norm of any zero-forcing residual.
    pub max_zf_residual: f64,
    pub worst_pair: Option<Pair>,
    pub ranks_ok: Vec<bool>,
    pub aligned: bool,
}

/// Recomputes every residual `U_k^H H_kj V_j` and the direct-link ranks.
pub fn verify_alignment(
    ch: &ChannelRealization,
    bf: &BeamformerSet,
    tol: f64,
) -> Result<AlignmentCheck> {
    let ranks_ok = model::signal_rank_ok(ch, bf, RankTolerance::default())?;
    let mut max_zf_residual = 0.0;
    let mut worst_pair = None;
    for p in cross_pairs(ch.users()) {
        let r = linalg::frob2(&model::residual(ch, bf, p));
        if worst_pair.is_none() || r > max_zf_residual {
            max_zf_residual = r;
            worst_pair = Some(p);
        }
    }
    let aligned = max_zf_residual <= tol && ranks_ok.iter().all(|&ok| ok);
    Ok(AlignmentCheck {
        max_zf_residual,
        worst_pair,
        ranks_ok,
        aligned,
    })
}
