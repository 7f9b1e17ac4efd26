//! System configuration, channels and beamformers, and direct evaluation of
//! the zero-forcing and signal-rank alignment conditions.
//!
//! Users are indexed from zero in the API and from one in every serialized
//! form. The channel from transmitter `j` to receiver `k` is an `N_k x M_j`
//! matrix (receive x transmit).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, RankTolerance};

/// Upper limit on the user count; subset enumeration works on `u32` bitmasks.
pub const MAX_USERS: usize = 24;

/// User count, per-user antenna counts and the requested DoF tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct SystemConfig {
    tx: Vec<usize>,
    rx: Vec<usize>,
    streams: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    #[serde(rename = "K")]
    users: usize,
    #[serde(rename = "M")]
    tx: Vec<usize>,
    #[serde(rename = "N")]
    rx: Vec<usize>,
    d: Vec<usize>,
}

impl TryFrom<RawConfig> for SystemConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        SystemConfig::new(raw.users, raw.tx, raw.rx, raw.d)
    }
}

impl From<SystemConfig> for RawConfig {
    fn from(cfg: SystemConfig) -> Self {
        RawConfig {
            users: cfg.users(),
            tx: cfg.tx,
            rx: cfg.rx,
            d: cfg.streams,
        }
    }
}

impl SystemConfig {
    /// `tx[k] = M_k`, `rx[k] = N_k`, `streams[k] = d_k`.
    pub fn new(users: usize, tx: Vec<usize>, rx: Vec<usize>, streams: Vec<usize>) -> Result<Self> {
        validate_antennas(users, &tx, &rx)?;
        if streams.len() != users {
            return Err(Error::InvalidConfig(format!(
                "expected {users} stream counts, got {}",
                streams.len()
            )));
        }
        if let Some(k) = streams.iter().position(|&d| d == 0) {
            return Err(Error::InvalidConfig(format!(
                "user {} has zero streams",
                k + 1
            )));
        }
        Ok(Self { tx, rx, streams })
    }

    /// `K` users with `M` transmit, `N` receive antennas and `d` streams each.
    pub fn symmetric(users: usize, m: usize, n: usize, d: usize) -> Result<Self> {
        Self::new(users, vec![m; users], vec![n; users], vec![d; users])
    }

    pub fn users(&self) -> usize {
        self.tx.len()
    }

    pub fn tx(&self) -> &[usize] {
        &self.tx
    }

    pub fn rx(&self) -> &[usize] {
        &self.rx
    }

    pub fn streams(&self) -> &[usize] {
        &self.streams
    }

    /// The common stream count, if every user has the same one.
    pub fn equal_streams(&self) -> Option<usize> {
        let d = self.streams[0];
        self.streams.iter().all(|&x| x == d).then_some(d)
    }

    /// `Some((M, N))` when all users share the same antenna counts.
    pub fn symmetric_antennas(&self) -> Option<(usize, usize)> {
        let (m, n) = (self.tx[0], self.rx[0]);
        (self.tx.iter().all(|&x| x == m) && self.rx.iter().all(|&x| x == n)).then_some((m, n))
    }

    /// All cross pairs `(k, j)`, `k != j`, in lexicographic order.
    pub fn cross_pairs(&self) -> impl Iterator<Item = Pair> {
        cross_pairs(self.users())
    }

    /// Scalar equation count `sum_{k != j} d_k d_j` of the zero-forcing system.
    pub fn equation_count(&self) -> usize {
        self.cross_pairs()
            .map(|p| self.streams[p.rx] * self.streams[p.tx])
            .sum()
    }

    /// Scalar variable count `sum_k (M_k + N_k - 2 d_k) d_k` of the reduced system.
    /// Requires `d_k <= min(M_k, N_k)`.
    pub fn variable_count(&self) -> usize {
        (0..self.users())
            .map(|k| (self.tx[k] + self.rx[k] - 2 * self.streams[k]) * self.streams[k])
            .sum()
    }
}

pub(crate) fn validate_antennas(users: usize, tx: &[usize], rx: &[usize]) -> Result<()> {
    if users == 0 {
        return Err(Error::InvalidConfig("user count must be positive".into()));
    }
    if users > MAX_USERS {
        return Err(Error::InvalidConfig(format!(
            "at most {MAX_USERS} users are supported, got {users}"
        )));
    }
    if tx.len() != users || rx.len() != users {
        return Err(Error::InvalidConfig(format!(
            "expected {users} antenna counts per side, got M: {}, N: {}",
            tx.len(),
            rx.len()
        )));
    }
    if tx.iter().chain(rx).any(|&a| a == 0) {
        return Err(Error::InvalidConfig(
            "antenna counts must be positive".into(),
        ));
    }
    Ok(())
}

/// Ordered cross pair: receiver `rx` (the `k` index) and transmitter `tx` (the `j` index).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Pair {
    #[serde(with = "one_based")]
    pub rx: usize,
    #[serde(with = "one_based")]
    pub tx: usize,
}

/// Serializes a zero-based user index as one-based.
pub mod one_based {
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(index: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*index as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        match u64::deserialize(d)? {
            0 => Err(D::Error::custom("user indices start at 1")),
            n => Ok(n as usize - 1),
        }
    }
}

impl Pair {
    pub fn new(rx: usize, tx: usize) -> Self {
        Self { rx, tx }
    }
}

pub fn cross_pairs(users: usize) -> impl Iterator<Item = Pair> {
    (0..users).flat_map(move |k| {
        (0..users)
            .filter(move |&j| j != k)
            .map(move |j| Pair::new(k, j))
    })
}

/// A set of cross pairs, i.e. a subset of the zero-forcing equations.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Pair>", into = "Vec<Pair>")]
pub struct PairSet(BTreeSet<Pair>);

impl PairSet {
    pub fn new(pairs: impl IntoIterator<Item = Pair>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for p in pairs {
            if p.rx == p.tx {
                return Err(Error::InvalidConfig(format!(
                    "pair ({0}, {0}) is not a cross pair",
                    p.rx + 1
                )));
            }
            if !set.insert(p) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate pair ({}, {})",
                    p.rx + 1,
                    p.tx + 1
                )));
            }
        }
        Ok(Self(set))
    }

    /// Every cross pair of a `users`-user system.
    pub fn all(users: usize) -> Self {
        Self(cross_pairs(users).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, p: Pair) -> bool {
        self.0.contains(&p)
    }

    pub fn iter(&self) -> impl Iterator<Item = Pair> + '_ {
        self.0.iter().copied()
    }

    /// Distinct receiver indices appearing in the set.
    pub fn receivers(&self) -> BTreeSet<usize> {
        self.0.iter().map(|p| p.rx).collect()
    }

    /// Distinct transmitter indices appearing in the set.
    pub fn transmitters(&self) -> BTreeSet<usize> {
        self.0.iter().map(|p| p.tx).collect()
    }
}

impl TryFrom<Vec<Pair>> for PairSet {
    type Error = Error;

    fn try_from(v: Vec<Pair>) -> Result<Self> {
        PairSet::new(v)
    }
}

impl From<PairSet> for Vec<Pair> {
    fn from(s: PairSet) -> Self {
        s.0.into_iter().collect()
    }
}

/// The `K x K` grid of channel matrices; `H[k][j]` is `N_k x M_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    tx: Vec<usize>,
    rx: Vec<usize>,
    grid: Vec<CMat>,
}

impl ChannelRealization {
    /// Builds a realization from a row-per-receiver grid, checking every shape.
    pub fn new(tx: &[usize], rx: &[usize], grid: Vec<Vec<CMat>>) -> Result<Self> {
        let users = tx.len();
        validate_antennas(users, tx, rx)?;
        if grid.len() != users || grid.iter().any(|row| row.len() != users) {
            return Err(Error::InvalidConfig(format!(
                "channel grid must be {users} x {users}"
            )));
        }
        let mut flat = Vec::with_capacity(users * users);
        for (k, row) in grid.into_iter().enumerate() {
            for (j, h) in row.into_iter().enumerate() {
                if h.shape() != (rx[k], tx[j]) {
                    return Err(Error::DimensionMismatch {
                        pair: Pair::new(k, j),
                        expected: (rx[k], tx[j]),
                        found: h.shape(),
                    });
                }
                if !linalg::is_finite(&h) {
                    return Err(Error::NonFinite("channel"));
                }
                flat.push(h);
            }
        }
        Ok(Self {
            tx: tx.to_vec(),
            rx: rx.to_vec(),
            grid: flat,
        })
    }

    pub fn for_config(cfg: &SystemConfig, grid: Vec<Vec<CMat>>) -> Result<Self> {
        Self::new(cfg.tx(), cfg.rx(), grid)
    }

    pub fn users(&self) -> usize {
        self.tx.len()
    }

    pub fn tx(&self) -> &[usize] {
        &self.tx
    }

    pub fn rx(&self) -> &[usize] {
        &self.rx
    }

    /// Channel from transmitter `tx` to receiver `rx`.
    pub fn get(&self, rx: usize, tx: usize) -> &CMat {
        &self.grid[rx * self.users() + tx]
    }

    /// Returns a copy with every cross channel multiplied by `c`.
    pub fn scale_cross(&self, c: num_complex::Complex64) -> Self {
        let k = self.users();
        let grid = self
            .grid
            .iter()
            .enumerate()
            .map(|(i, h)| if i / k != i % k { h * c } else { h.clone() })
            .collect();
        Self {
            tx: self.tx.clone(),
            rx: self.rx.clone(),
            grid,
        }
    }
}

/// Transmit beamformers `V_k` (`M_k x d_k`) and receive beamformers `U_k` (`N_k x d_k`).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    v: Vec<CMat>,
    u: Vec<CMat>,
}

impl BeamformerSet {
    /// Checks shapes and that every `V_k`, `U_k` has full column rank.
    pub fn new(v: Vec<CMat>, u: Vec<CMat>) -> Result<Self> {
        let bf = Self::from_shapes(v, u)?;
        let tol = RankTolerance::default();
        for k in 0..bf.users() {
            if bf.v[k].ncols() == 0 || !linalg::has_full_column_rank(&bf.v[k], tol) {
                return Err(Error::RankDeficientBeamformer {
                    user: k,
                    which: "V",
                });
            }
            if bf.u[k].ncols() == 0 || !linalg::has_full_column_rank(&bf.u[k], tol) {
                return Err(Error::RankDeficientBeamformer {
                    user: k,
                    which: "U",
                });
            }
        }
        Ok(bf)
    }

    /// Shape checks only. Used for precoders that may switch streams off.
    pub fn from_shapes(v: Vec<CMat>, u: Vec<CMat>) -> Result<Self> {
        if v.len() != u.len() || v.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "need the same positive number of V and U matrices, got {} and {}",
                v.len(),
                u.len()
            )));
        }
        for k in 0..v.len() {
            if u[k].ncols() != v[k].ncols() {
                return Err(Error::BeamformerShape {
                    user: k,
                    which: "U",
                    expected: (u[k].nrows(), v[k].ncols()),
                    found: u[k].shape(),
                });
            }
            if !linalg::is_finite(&v[k]) || !linalg::is_finite(&u[k]) {
                return Err(Error::NonFinite("beamformer"));
            }
        }
        Ok(Self { v, u })
    }

    pub fn users(&self) -> usize {
        self.v.len()
    }

    pub fn v(&self, k: usize) -> &CMat {
        &self.v[k]
    }

    pub fn u(&self, k: usize) -> &CMat {
        &self.u[k]
    }

    pub fn streams(&self) -> Vec<usize> {
        self.v.iter().map(|m| m.ncols()).collect()
    }

    /// Right-multiplies `V_k` by `p[k]` and `U_k` by `q[k]`.
    pub fn rotate(&self, p: &[CMat], q: &[CMat]) -> Self {
        Self {
            v: self.v.iter().zip(p).map(|(v, p)| v * p).collect(),
            u: self.u.iter().zip(q).map(|(u, q)| u * q).collect(),
        }
    }
}

fn check_compatible(ch: &ChannelRealization, bf: &BeamformerSet) -> Result<()> {
    let k_users = ch.users();
    if bf.users() != k_users {
        return Err(Error::InvalidConfig(format!(
            "channel has {k_users} users but beamformers have {}",
            bf.users()
        )));
    }
    for k in 0..k_users {
        for j in 0..k_users {
            let (rows, cols) = (bf.u(k).nrows(), bf.v(j).nrows());
            if rows != ch.rx()[k] || cols != ch.tx()[j] {
                return Err(Error::DimensionMismatch {
                    pair: Pair::new(k, j),
                    expected: ch.get(k, j).shape(),
                    found: (rows, cols),
                });
            }
        }
    }
    Ok(())
}

/// Zero-forcing residual `U_k^H H_kj V_j`.
pub(crate) fn residual(ch: &ChannelRealization, bf: &BeamformerSet, p: Pair) -> CMat {
    bf.u(p.rx).adjoint() * ch.get(p.rx, p.tx) * bf.v(p.tx)
}

/// Total interference leakage: `sum_{k != j} ||U_k^H H_kj V_j||_F^2`.
pub fn leakage(ch: &ChannelRealization, bf: &BeamformerSet) -> Result<f64> {
    check_compatible(ch, bf)?;
    Ok(cross_pairs(ch.users())
        .map(|p| linalg::frob2(&residual(ch, bf, p)))
        .sum())
}

/// Per-user `d_k`-th singular value of the effective direct channel `U_k^H H_kk V_k`.
pub fn signal_rank_margin(ch: &ChannelRealization, bf: &BeamformerSet) -> Result<Vec<f64>> {
    check_compatible(ch, bf)?;
    Ok((0..ch.users())
        .map(|k| {
            let eff = residual(ch, bf, Pair::new(k, k));
            let d = bf.v(k).ncols();
            linalg::singular_values(&eff)
                .get(d.wrapping_sub(1))
                .copied()
                .unwrap_or(0.0)
        })
        .collect())
}

/// Whether `U_k^H H_kk V_k` has rank `d_k` under the rank tolerance.
pub fn signal_rank_ok(
    ch: &ChannelRealization,
    bf: &BeamformerSet,
    tol: RankTolerance,
) -> Result<Vec<bool>> {
    check_compatible(ch, bf)?;
    Ok((0..ch.users())
        .map(|k| {
            let eff = residual(ch, bf, Pair::new(k, k));
            linalg::numeric_rank(&eff, tol) == bf.v(k).ncols()
        })
        .collect())
}
