//! Rayleigh channel ensembles, WMMSE sum-rate maximization and DoF-slope
//! estimation against the DoF upper bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::max_dof_bound;
use crate::linalg::{complex_gaussian, hermitian_eigen_ascending, CMat};
use crate::model::{validate_antennas, BeamformerSet, ChannelRealization};
use crate::seed;

/// I.i.d. circularly symmetric unit-variance complex Gaussian channels.
pub fn sample_rayleigh(tx: &[usize], rx: &[usize], seed: u64) -> Result<ChannelRealization> {
    validate_antennas(tx.len(), tx, rx)?;
    let mut rng = seed::rng(seed);
    let k = tx.len();
    let grid = (0..k)
        .map(|r| {
            (0..k)
                .map(|t| complex_gaussian(rx[r], tx[t], &mut rng))
                .collect()
        })
        .collect();
    ChannelRealization::new(tx, rx, grid)
}

/// `log2 det` of a Hermitian positive definite matrix.
fn log2_det_hpd(a: &CMat) -> Result<f64> {
    let herm = (a + a.adjoint()).scale(0.5);
    let chol = herm
        .cholesky()
        .ok_or(Error::NonFinite("covariance is not positive definite"))?;
    Ok(chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|z| 2.0 * z.re.log2())
        .sum())
}

fn check_dims(ch: &ChannelRealization, v: &[CMat]) -> Result<()> {
    if v.len() != ch.users() {
        return Err(Error::InvalidConfig(format!(
            "channel has {} users but {} precoders were given",
            ch.users(),
            v.len()
        )));
    }
    for (k, vk) in v.iter().enumerate() {
        if vk.nrows() != ch.tx()[k] {
            return Err(Error::BeamformerShape {
                user: k,
                which: "V",
                expected: (ch.tx()[k], vk.ncols()),
                found: vk.shape(),
            });
        }
    }
    Ok(())
}

/// Shannon sum rate of precoders `x`, with each receiver treating
/// interference as noise.
fn rate_of_precoders(ch: &ChannelRealization, x: &[CMat], noise_power: f64) -> Result<f64> {
    let k_users = ch.users();
    let mut total = 0.0;
    for k in 0..k_users {
        let n = ch.rx()[k];
        let mut interference = CMat::identity(n, n).scale(noise_power);
        for j in (0..k_users).filter(|&j| j != k) {
            let hx = ch.get(k, j) * &x[j];
            interference += &hx * hx.adjoint();
        }
        let hx = ch.get(k, k) * &x[k];
        let received = &interference + &hx * hx.adjoint();
        total += (log2_det_hpd(&received)? - log2_det_hpd(&interference)?).max(0.0);
    }
    Ok(total)
}

fn scale_precoders(v: &[CMat], power: f64) -> Vec<CMat> {
    v.iter()
        .map(|vk| {
            if vk.ncols() == 0 {
                vk.clone()
            } else {
                vk.scale((power / vk.ncols() as f64).sqrt())
            }
        })
        .collect()
}

/// Sum rate in bits per channel use. User `k` transmits `X_k = sqrt(P / d_k) V_k`
/// with `P = snr * noise_power`, so orthonormal `V_k` splits the power equally
/// across streams. Receive beamformers are not used: each receiver decodes
/// optimally with interference treated as noise.
pub fn sum_rate(
    ch: &ChannelRealization,
    bf: &BeamformerSet,
    snr: f64,
    noise_power: f64,
) -> Result<f64> {
    if !(snr > 0.0 && snr.is_finite()) || !(noise_power > 0.0 && noise_power.is_finite()) {
        return Err(Error::InvalidOptions(
            "snr and noise power must be positive".into(),
        ));
    }
    let v: Vec<CMat> = (0..bf.users()).map(|k| bf.v(k).clone()).collect();
    check_dims(ch, &v)?;
    rate_of_precoders(ch, &scale_precoders(&v, snr * noise_power), noise_power)
}

/// High-SNR WMMSE improves slowly; looser stopping leaves the slope estimate
/// well short of the achievable DoF.
pub const DEFAULT_WMMSE_MAX_ITERS: usize = 5000;
pub const DEFAULT_WMMSE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseOptions {
    pub noise_power: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    /// Streams per user; `min(M_k, N_k)` when absent.
    pub streams: Option<Vec<usize>>,
    /// Starting precoder directions, rescaled to the power budget. Random
    /// when absent; when present they also fix the stream counts.
    pub init: Option<Vec<CMat>>,
}

impl Default for WmmseOptions {
    fn default() -> Self {
        Self {
            noise_power: 1.0,
            max_iters: DEFAULT_WMMSE_MAX_ITERS,
            rel_tol: DEFAULT_WMMSE_REL_TOL,
            seed: 0,
            streams: None,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WmmseResult {
    /// `V_k = X_k / sqrt(P / d_k)`, so `sum_rate` reproduces the achieved rate.
    pub beamformers: BeamformerSet,
    pub sum_rate: f64,
    /// Sum rate of the initial point, then after every iteration.
    pub trace: Vec<f64>,
}

/// `X = (A + mu I)^{-1} B` with the smallest `mu >= 0` meeting `||X||_F^2 <= power`.
fn power_constrained_solve(a: &CMat, b: &CMat, power: f64) -> CMat {
    let (lambda, q) = hermitian_eigen_ascending(a);
    let c = q.adjoint() * b;
    let row_energy: Vec<f64> = c
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let lambda: Vec<f64> = lambda.into_iter().map(|l| l.max(0.0)).collect();
    let floor = 1e-12 * lambda.last().copied().unwrap_or(0.0).max(1e-300);
    let energy = |mu: f64| -> f64 {
        lambda
            .iter()
            .zip(&row_energy)
            .map(|(&l, &e)| {
                let den = l + mu;
                if den <= floor {
                    if e > 0.0 {
                        f64::INFINITY
                    } else {
                        0.0
                    }
                } else {
                    e / (den * den)
                }
            })
            .sum()
    };
    let mu = if energy(0.0) <= power {
        0.0
    } else {
        let total: f64 = row_energy.iter().sum();
        let (mut lo, mut hi) = (0.0, (total / power).sqrt().max(floor * 2.0));
        while energy(hi) > power {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if energy(mid) > power {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    };
    let scaled = CMat::from_fn(c.nrows(), c.ncols(), |r, col| {
        let den = lambda[r] + mu;
        if den <= floor {
            num_complex::Complex64::new(0.0, 0.0)
        } else {
            c[(r, col)] / den
        }
    });
    q * scaled
}

/// Weighted-MMSE sum-rate maximization under a per-user power budget
/// `snr * noise_power`. Alternates MMSE receivers, weights `E_k^{-1}` and
/// power-constrained transmit updates.
pub fn wmmse_maximize(
    ch: &ChannelRealization,
    snr: f64,
    opts: &WmmseOptions,
) -> Result<WmmseResult> {
    if !(snr > 0.0 && snr.is_finite()) || !(opts.noise_power > 0.0 && opts.noise_power.is_finite())
    {
        return Err(Error::InvalidOptions(
            "snr and noise power must be positive".into(),
        ));
    }
    if opts.max_iters == 0 || opts.rel_tol.is_nan() || opts.rel_tol < 0.0 {
        return Err(Error::InvalidOptions(
            "max_iters must be positive and rel_tol nonnegative".into(),
        ));
    }
    let k_users = ch.users();
    let streams: Vec<usize> = match (&opts.init, &opts.streams) {
        (Some(init), _) => {
            check_dims(ch, init)?;
            init.iter().map(|v| v.ncols()).collect()
        }
        (None, Some(s)) if s.len() == k_users => s.clone(),
        (None, Some(s)) => {
            return Err(Error::InvalidOptions(format!(
                "{} stream counts given for {k_users} users",
                s.len()
            )))
        }
        (None, None) => (0..k_users).map(|k| ch.tx()[k].min(ch.rx()[k])).collect(),
    };
    let sigma2 = opts.noise_power;
    let power = snr * sigma2;

    let mut rng = seed::rng(opts.seed);
    let mut x: Vec<CMat> = (0..k_users)
        .map(|k| {
            let g = match &opts.init {
                Some(init) => init[k].clone(),
                None => complex_gaussian(ch.tx()[k], streams[k], &mut rng),
            };
            let norm2: f64 = g.iter().map(|z| z.norm_sqr()).sum();
            if norm2 > 0.0 {
                g.scale((power / norm2).sqrt())
            } else {
                g
            }
        })
        .collect();
    let mut trace = vec![rate_of_precoders(ch, &x, sigma2)?];
    let mut u: Vec<CMat> = Vec::new();

    for _ in 0..opts.max_iters {
        // MMSE receivers and weights.
        u.clear();
        let mut w: Vec<CMat> = Vec::with_capacity(k_users);
        for k in 0..k_users {
            let n = ch.rx()[k];
            let mut cov = CMat::identity(n, n).scale(sigma2);
            for (j, xj) in x.iter().enumerate() {
                let hx = ch.get(k, j) * xj;
                cov += &hx * hx.adjoint();
            }
            let hx = ch.get(k, k) * &x[k];
            let cov = (&cov + cov.adjoint()).scale(0.5);
            let uk = cov
                .cholesky()
                .ok_or(Error::NonFinite("receive covariance"))?
                .solve(&hx);
            let d = streams[k];
            let e = CMat::identity(d, d) - uk.adjoint() * &hx;
            let e = (&e + e.adjoint()).scale(0.5);
            let wk = e
                .cholesky()
                .map(|c| c.inverse())
                .ok_or(Error::NonFinite("MSE matrix"))?;
            u.push(uk);
            w.push(wk);
        }
        // Transmit update.
        x = (0..k_users)
            .map(|k| {
                let m = ch.tx()[k];
                let mut a = CMat::zeros(m, m);
                for j in 0..k_users {
                    let hu = ch.get(j, k).adjoint() * &u[j];
                    a += &hu * &w[j] * hu.adjoint();
                }
                let b = ch.get(k, k).adjoint() * &u[k] * &w[k];
                power_constrained_solve(&a, &b, power)
            })
            .collect();
        let rate = rate_of_precoders(ch, &x, sigma2)?;
        let prev = *trace.last().expect("nonempty");
        debug_assert!(
            rate >= prev - 1e-9 * prev.max(1.0),
            "WMMSE sum rate decreased from {prev} to {rate}"
        );
        trace.push(rate);
        if (rate - prev).abs() <= opts.rel_tol * prev.abs().max(1e-12) {
            break;
        }
    }

    let v: Vec<CMat> = x
        .iter()
        .map(|xk| {
            if xk.ncols() == 0 {
                xk.clone()
            } else {
                xk.scale((xk.ncols() as f64 / power).sqrt())
            }
        })
        .collect();
    let u_final: Vec<CMat> = (0..k_users)
        .map(|k| {
            u.get(k)
                .cloned()
                .unwrap_or_else(|| CMat::zeros(ch.rx()[k], streams[k]))
        })
        .collect();
    let beamformers = BeamformerSet::from_shapes(v, u_final)?;
    let sum_rate = sum_rate(ch, &beamformers, snr, sigma2)?;
    Ok(WmmseResult {
        beamformers,
        sum_rate,
        trace,
    })
}

/// Default number of top grid points used for the slope fit.
pub const DEFAULT_SLOPE_POINTS: usize = 3;

/// Least-squares slope of rate (bits) against `log2(snr)` over the `top`
/// highest grid points.
pub fn estimate_dof_slope(snr_grid_db: &[f64], mean_rates: &[f64], top: usize) -> Result<f64> {
    if snr_grid_db.len() != mean_rates.len() {
        return Err(Error::InvalidOptions("grid and rate lengths differ".into()));
    }
    let used = top.min(snr_grid_db.len());
    if used < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: used,
        });
    }
    let mut idx: Vec<usize> = (0..snr_grid_db.len()).collect();
    idx.sort_by(|&a, &b| snr_grid_db[a].total_cmp(&snr_grid_db[b]));
    let idx = &idx[idx.len() - used..];
    let xs: Vec<f64> = idx
        .iter()
        .map(|&i| snr_grid_db[i] / 10.0 * std::f64::consts::LOG2_10)
        .collect();
    let ys: Vec<f64> = idx.iter().map(|&i| mean_rates[i]).collect();
    let n = used as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints { needed: 2, got: 1 });
    }
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub tx: Vec<usize>,
    pub rx: Vec<usize>,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub noise_power: f64,
    pub wmmse_max_iters: usize,
    pub wmmse_rel_tol: f64,
    pub slope_points: usize,
    /// Start each grid point from the previous point's precoders of the same
    /// trial instead of a fresh random draw.
    pub warm_start: bool,
}

impl BenchConfig {
    pub fn new(tx: Vec<usize>, rx: Vec<usize>) -> Self {
        Self {
            tx,
            rx,
            snr_grid_db: vec![30.0, 40.0, 50.0, 60.0],
            trials: 20,
            seed: 0,
            noise_power: 1.0,
            wmmse_max_iters: DEFAULT_WMMSE_MAX_ITERS,
            wmmse_rel_tol: DEFAULT_WMMSE_REL_TOL,
            slope_points: DEFAULT_SLOPE_POINTS,
            warm_start: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_antennas(self.tx.len(), &self.tx, &self.rx)?;
        if self.snr_grid_db.is_empty() || self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidOptions(
                "snr grid must be nonempty and finite".into(),
            ));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidOptions(
                "snr grid must be strictly increasing".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidOptions("trials must be at least 1".into()));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return Err(Error::InvalidOptions("noise power must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSample {
    pub snr_db: f64,
    pub trial: usize,
    pub sum_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    /// One sample per (snr, trial), snr-major.
    pub samples: Vec<RateSample>,
    pub mean_rates: Vec<f64>,
    /// Absent when the grid has fewer than two points.
    pub estimated_dof_slope: Option<f64>,
    pub theoretical_bound: usize,
}

/// Runs WMMSE on every (snr, trial) cell. Trial `t` uses one channel draw for
/// the whole grid. The lowest grid point starts from a seeded random draw;
/// later points start from the previous point's precoders when warm starts
/// are enabled, and from their own seeded draw otherwise.
pub fn run_benchmark(bc: &BenchConfig) -> Result<BenchmarkRecord> {
    bc.validate()?;
    let bound = max_dof_bound(&bc.tx, &bc.rx)?.max_total;
    let channels = (0..bc.trials)
        .into_par_iter()
        .map(|t| {
            sample_rayleigh(
                &bc.tx,
                &bc.rx,
                seed::derive(bc.seed, &[seed::tags::CHANNEL, t as u64]),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let per_trial = channels
        .par_iter()
        .enumerate()
        .map(|(t, ch)| {
            let mut rates = Vec::with_capacity(bc.snr_grid_db.len());
            let mut previous: Option<Vec<CMat>> = None;
            for (s, &snr_db) in bc.snr_grid_db.iter().enumerate() {
                let opts = WmmseOptions {
                    noise_power: bc.noise_power,
                    max_iters: bc.wmmse_max_iters,
                    rel_tol: bc.wmmse_rel_tol,
                    seed: seed::derive(bc.seed, &[seed::tags::WMMSE_INIT, t as u64, s as u64]),
                    streams: None,
                    init: if bc.warm_start { previous.take() } else { None },
                };
                let res = wmmse_maximize(ch, 10f64.powf(snr_db / 10.0), &opts)?;
                rates.push(res.sum_rate);
                previous = Some(
                    (0..ch.users())
                        .map(|k| res.beamformers.v(k).clone())
                        .collect(),
                );
            }
            Ok(rates)
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let cells: Vec<(usize, usize)> = (0..bc.snr_grid_db.len())
        .flat_map(|s| (0..bc.trials).map(move |t| (s, t)))
        .collect();
    let rates: Vec<f64> = cells.iter().map(|&(s, t)| per_trial[t][s]).collect();
    let samples: Vec<RateSample> = cells
        .iter()
        .zip(&rates)
        .map(|(&(s, t), &r)| RateSample {
            snr_db: bc.snr_grid_db[s],
            trial: t,
            sum_rate: r,
        })
        .collect();
    let mean_rates: Vec<f64> = rates
        .chunks(bc.trials)
        .map(|c| c.iter().sum::<f64>() / bc.trials as f64)
        .collect();
    let estimated_dof_slope = if bc.snr_grid_db.len() >= 2 {
        Some(estimate_dof_slope(
            &bc.snr_grid_db,
            &mean_rates,
            bc.slope_points.max(2),
        )?)
    } else {
        None
    };
    Ok(BenchmarkRecord {
        samples,
        mean_rates,
        estimated_dof_slope,
        theoretical_bound: bound,
    })
}
