use std::collections::BTreeSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::model::{ChannelRealization, Pair, SystemConfig};

/// The four blocks of one cross channel after splitting off the first `d_k`
/// receive rows and the first `d_j` transmit columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBlocks {
    pub pair: Pair,
    /// `d_k x d_j`
    pub h1: CMat,
    /// `d_k x (M_j - d_j)`
    pub h2: CMat,
    /// `(N_k - d_k) x d_j`
    pub h3: CMat,
    /// `(N_k - d_k) x (M_j - d_j)`
    pub h4: CMat,
}

impl PairBlocks {
    /// Reassembles `[[H1, H2], [H3, H4]]`.
    pub fn reassemble(&self) -> CMat {
        let (dk, dj) = self.h1.shape();
        let rows = dk + self.h3.nrows();
        let cols = dj + self.h2.ncols();
        let mut h = CMat::zeros(rows, cols);
        h.view_mut((0, 0), (dk, dj)).copy_from(&self.h1);
        h.view_mut((0, dj), self.h2.shape()).copy_from(&self.h2);
        h.view_mut((dk, 0), self.h3.shape()).copy_from(&self.h3);
        h.view_mut((dk, dj), self.h4.shape()).copy_from(&self.h4);
        h
    }
}

fn check_streams_fit(cfg: &SystemConfig) -> Result<()> {
    for k in 0..cfg.users() {
        let cap = cfg.tx()[k].min(cfg.rx()[k]);
        if cfg.streams()[k] > cap {
            return Err(Error::StreamsExceedAntennas {
                user: k,
                streams: cfg.streams()[k],
                antennas: cap,
            });
        }
    }
    Ok(())
}

/// Expected shapes `(H1, H2, H3, H4)` for a pair.
fn block_shapes(cfg: &SystemConfig, p: Pair) -> [(usize, usize); 4] {
    let (dk, dj) = (cfg.streams()[p.rx], cfg.streams()[p.tx]);
    let (nk, mj) = (cfg.rx()[p.rx], cfg.tx()[p.tx]);
    [(dk, dj), (dk, mj - dj), (nk - dk, dj), (nk - dk, mj - dj)]
}

/// Channel blocks of every cross pair, stored in lexicographic pair order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedSystem {
    cfg: SystemConfig,
    blocks: Vec<PairBlocks>,
}

impl ReducedSystem {
    pub fn new(cfg: SystemConfig, blocks: Vec<PairBlocks>) -> Result<Self> {
        check_streams_fit(&cfg)?;
        let pairs: Vec<Pair> = cfg.cross_pairs().collect();
        if blocks.len() != pairs.len() {
            return Err(Error::InvalidConfig(format!(
                "expected {} pair blocks, got {}",
                pairs.len(),
                blocks.len()
            )));
        }
        for (b, &p) in blocks.iter().zip(&pairs) {
            if b.pair != p {
                return Err(Error::InvalidConfig(format!(
                    "blocks out of order: expected pair ({}, {})",
                    p.rx + 1,
                    p.tx + 1
                )));
            }
            let found = [b.h1.shape(), b.h2.shape(), b.h3.shape(), b.h4.shape()];
            for (want, got) in block_shapes(&cfg, p).into_iter().zip(found) {
                if want != got {
                    return Err(Error::DimensionMismatch {
                        pair: p,
                        expected: want,
                        found: got,
                    });
                }
            }
            if ![&b.h1, &b.h2, &b.h3, &b.h4]
                .into_iter()
                .all(linalg::is_finite)
            {
                return Err(Error::NonFinite("channel block"));
            }
        }
        Ok(Self { cfg, blocks })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn blocks(&self) -> &[PairBlocks] {
        &self.blocks
    }

    pub fn block(&self, p: Pair) -> &PairBlocks {
        let k = self.cfg.users();
        let col = if p.tx < p.rx { p.tx } else { p.tx - 1 };
        &self.blocks[p.rx * (k - 1) + col]
    }

    pub fn equation_count(&self) -> usize {
        self.cfg.equation_count()
    }
}

/// Splits each cross channel into the four blocks of the reduced system.
/// Row and column permutations are the identity.
pub fn partition_channels(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<ReducedSystem> {
    if ch.tx() != cfg.tx() || ch.rx() != cfg.rx() {
        return Err(Error::InvalidConfig(
            "channel antenna counts do not match the configuration".into(),
        ));
    }
    check_streams_fit(cfg)?;
    let blocks = cfg
        .cross_pairs()
        .map(|p| {
            let h = ch.get(p.rx, p.tx);
            let (dk, dj) = (cfg.streams()[p.rx], cfg.streams()[p.tx]);
            let (rows, cols) = h.shape();
            PairBlocks {
                pair: p,
                h1: h.view((0, 0), (dk, dj)).into_owned(),
                h2: h.view((0, dj), (dk, cols - dj)).into_owned(),
                h3: h.view((dk, 0), (rows - dk, dj)).into_owned(),
                h4: h.view((dk, dj), (rows - dk, cols - dj)).into_owned(),
            }
        })
        .collect();
    ReducedSystem::new(cfg.clone(), blocks)
}

/// One scalar coordinate of the reduced variables. Receive coordinates refer
/// to entries of `Ubar_k`, but the coordinate itself is the conjugate entry
/// (an entry of `Ubar_k^H`), which keeps the map holomorphic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum VarCoord {
    Recv {
        #[serde(with = "crate::model::one_based")]
        user: usize,
        row: usize,
        col: usize,
    },
    Send {
        #[serde(with = "crate::model::one_based")]
        user: usize,
        row: usize,
        col: usize,
    },
}

/// All coordinates: every `Ubar_k` (column-major, users in order), then every `Vbar_k`.
pub fn variable_coords(cfg: &SystemConfig) -> Vec<VarCoord> {
    let mut out = Vec::with_capacity(cfg.variable_count());
    for k in 0..cfg.users() {
        let d = cfg.streams()[k];
        for col in 0..d {
            for row in 0..cfg.rx()[k] - d {
                out.push(VarCoord::Recv { user: k, row, col });
            }
        }
    }
    for k in 0..cfg.users() {
        let d = cfg.streams()[k];
        for col in 0..d {
            for row in 0..cfg.tx()[k] - d {
                out.push(VarCoord::Send { user: k, row, col });
            }
        }
    }
    out
}

/// Reduced beamformer variables `Ubar_k` (`(N_k - d_k) x d_k`) and
/// `Vbar_k` (`(M_k - d_k) x d_k`), plus coordinates frozen at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVars {
    ubar: Vec<CMat>,
    vbar: Vec<CMat>,
    frozen: BTreeSet<VarCoord>,
}

impl ReducedVars {
    pub fn new(cfg: &SystemConfig, ubar: Vec<CMat>, vbar: Vec<CMat>) -> Result<Self> {
        check_streams_fit(cfg)?;
        if ubar.len() != cfg.users() || vbar.len() != cfg.users() {
            return Err(Error::InvalidConfig(
                "one Ubar and one Vbar per user required".into(),
            ));
        }
        for k in 0..cfg.users() {
            let d = cfg.streams()[k];
            let want_u = (cfg.rx()[k] - d, d);
            if ubar[k].shape() != want_u {
                return Err(Error::BeamformerShape {
                    user: k,
                    which: "Ubar",
                    expected: want_u,
                    found: ubar[k].shape(),
                });
            }
            let want_v = (cfg.tx()[k] - d, d);
            if vbar[k].shape() != want_v {
                return Err(Error::BeamformerShape {
                    user: k,
                    which: "Vbar",
                    expected: want_v,
                    found: vbar[k].shape(),
                });
            }
        }
        Ok(Self {
            ubar,
            vbar,
            frozen: BTreeSet::new(),
        })
    }

    pub fn zeros(cfg: &SystemConfig) -> Result<Self> {
        check_streams_fit(cfg)?;
        let ubar = (0..cfg.users())
            .map(|k| CMat::zeros(cfg.rx()[k] - cfg.streams()[k], cfg.streams()[k]))
            .collect();
        let vbar = (0..cfg.users())
            .map(|k| CMat::zeros(cfg.tx()[k] - cfg.streams()[k], cfg.streams()[k]))
            .collect();
        Self::new(cfg, ubar, vbar)
    }

    /// Freezes `coords` at zero, removing them from the Jacobian.
    pub fn freeze(mut self, coords: impl IntoIterator<Item = VarCoord>) -> Self {
        for c in coords {
            self.set(c, Complex64::new(0.0, 0.0));
            self.frozen.insert(c);
        }
        self
    }

    pub fn ubar(&self, k: usize) -> &CMat {
        &self.ubar[k]
    }

    pub fn vbar(&self, k: usize) -> &CMat {
        &self.vbar[k]
    }

    pub fn frozen(&self) -> &BTreeSet<VarCoord> {
        &self.frozen
    }

    /// Value of a coordinate (conjugated entry for receive coordinates).
    pub fn get(&self, c: VarCoord) -> Complex64 {
        match c {
            VarCoord::Recv { user, row, col } => self.ubar[user][(row, col)].conj(),
            VarCoord::Send { user, row, col } => self.vbar[user][(row, col)],
        }
    }

    pub fn set(&mut self, c: VarCoord, value: Complex64) {
        match c {
            VarCoord::Recv { user, row, col } => self.ubar[user][(row, col)] = value.conj(),
            VarCoord::Send { user, row, col } => self.vbar[user][(row, col)] = value,
        }
    }

    /// Coordinates not frozen, in [`variable_coords`] order.
    pub fn free_coords(&self, cfg: &SystemConfig) -> Vec<VarCoord> {
        variable_coords(cfg)
            .into_iter()
            .filter(|c| !self.frozen.contains(c))
            .collect()
    }

    /// Entry-wise complex conjugate of every variable.
    pub fn conj(&self) -> Self {
        Self {
            ubar: self.ubar.iter().map(|m| m.map(|z| z.conj())).collect(),
            vbar: self.vbar.iter().map(|m| m.map(|z| z.conj())).collect(),
            frozen: self.frozen.clone(),
        }
    }

    fn check_against(&self, cfg: &SystemConfig) -> Result<()> {
        Self::new(cfg, self.ubar.clone(), self.vbar.clone()).map(|_| ())
    }
}

/// Stacks `F_kj = -(Ubar_k^H H3 + H2 Vbar_j + Ubar_k^H H4 Vbar_j)` over all
/// cross pairs in lexicographic order, each block column-major.
pub fn eval_polymap(rs: &ReducedSystem, rv: &ReducedVars) -> Result<Vec<Complex64>> {
    rv.check_against(rs.config())?;
    let mut out = Vec::with_capacity(rs.equation_count());
    for b in rs.blocks() {
        let (k, j) = (b.pair.rx, b.pair.tx);
        let uh = rv.ubar(k).adjoint();
        let v = rv.vbar(j);
        let f = -(&uh * &b.h3 + &b.h2 * v + &uh * &b.h4 * v);
        out.extend(f.iter().copied());
    }
    Ok(out)
}

/// Analytic Jacobian of [`eval_polymap`] with respect to the free coordinates.
///
/// With `W_k = Ubar_k^H`:
/// `dF_kj[p,q] / dW_k[c,r] = -[p = c] (H3 + H4 Vbar_j)[r,q]` and
/// `dF_kj[p,q] / dVbar_j[r,c] = -[q = c] (H2 + W_k H4)[p,r]`.
pub fn jacobian(rs: &ReducedSystem, rv: &ReducedVars) -> Result<CMat> {
    let cfg = rs.config();
    rv.check_against(cfg)?;
    let coords = rv.free_coords(cfg);
    let mut jac = CMat::zeros(rs.equation_count(), coords.len());

    let mut offsets = Vec::with_capacity(rs.blocks().len());
    let mut acc = 0;
    for b in rs.blocks() {
        offsets.push(acc);
        acc += b.h1.nrows() * b.h1.ncols();
    }
    // Per-pair derivative factors.
    let recv_factor: Vec<CMat> = rs
        .blocks()
        .iter()
        .map(|b| &b.h3 + &b.h4 * rv.vbar(b.pair.tx))
        .collect();
    let send_factor: Vec<CMat> = rs
        .blocks()
        .iter()
        .map(|b| &b.h2 + rv.ubar(b.pair.rx).adjoint() * &b.h4)
        .collect();

    for (col_idx, coord) in coords.iter().enumerate() {
        for (i, b) in rs.blocks().iter().enumerate() {
            let dk = b.h1.nrows();
            match *coord {
                VarCoord::Recv { user, row, col } if user == b.pair.rx => {
                    let g = &recv_factor[i];
                    for q in 0..b.h1.ncols() {
                        jac[(offsets[i] + q * dk + col, col_idx)] = -g[(row, q)];
                    }
                }
                VarCoord::Send { user, row, col } if user == b.pair.tx => {
                    let h = &send_factor[i];
                    for p in 0..dk {
                        jac[(offsets[i] + col * dk + p, col_idx)] = -h[(p, row)];
                    }
                }
                _ => {}
            }
        }
    }
    Ok(jac)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::complex_gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(cfg: &SystemConfig, seed: u64) -> ChannelRealization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = cfg.users();
        let grid = (0..k)
            .map(|r| {
                (0..k)
                    .map(|t| complex_gaussian(cfg.rx()[r], cfg.tx()[t], &mut rng))
                    .collect()
            })
            .collect();
        ChannelRealization::for_config(cfg, grid).unwrap()
    }

    fn random_vars(cfg: &SystemConfig, seed: u64) -> ReducedVars {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rv = ReducedVars::zeros(cfg).unwrap();
        for c in variable_coords(cfg) {
            let z = complex_gaussian(1, 1, &mut rng)[(0, 0)];
            rv.set(c, z);
        }
        rv
    }

    #[test]
    fn partition_round_trip() {
        let cfg = SystemConfig::symmetric(2, 4, 4, 2).unwrap();
        let ch = random_channel(&cfg, 5);
        let rs = partition_channels(&ch, &cfg).unwrap();
        for b in rs.blocks() {
            assert_eq!(b.h1.shape(), (2, 2));
            assert_eq!(b.h4.shape(), (2, 2));
            assert_eq!(&b.reassemble(), ch.get(b.pair.rx, b.pair.tx));
        }
    }

    #[test]
    fn partition_degenerate_receive_side() {
        let cfg = SystemConfig::new(2, vec![3, 3], vec![2, 1], vec![2, 1]).unwrap();
        let ch = random_channel(&cfg, 6);
        let rs = partition_channels(&ch, &cfg).unwrap();
        for b in rs.blocks() {
            assert_eq!(b.h3.nrows(), 0);
            assert_eq!(b.h4.nrows(), 0);
            assert_eq!(&b.reassemble(), ch.get(b.pair.rx, b.pair.tx));
        }
    }

    #[test]
    fn partition_toy_shapes() {
        let cfg = SystemConfig::symmetric(3, 3, 2, 1).unwrap();
        let rs = partition_channels(&random_channel(&cfg, 1), &cfg).unwrap();
        let b = rs.block(Pair::new(0, 1));
        assert_eq!(b.h1.shape(), (1, 1));
        assert_eq!(b.h2.shape(), (1, 2));
        assert_eq!(b.h3.shape(), (1, 1));
        assert_eq!(b.h4.shape(), (1, 2));
        assert_eq!(rs.block(Pair::new(2, 1)).pair, Pair::new(2, 1));
    }

    #[test]
    fn partition_rejects_too_many_streams() {
        let cfg = SystemConfig::new(2, vec![3, 3], vec![1, 3], vec![2, 1]).unwrap();
        let ch = random_channel(&cfg, 2);
        assert!(matches!(
            partition_channels(&ch, &cfg),
            Err(Error::StreamsExceedAntennas { user: 0, .. })
        ));
    }

    #[test]
    fn polymap_at_origin_is_zero() {
        let cfg = SystemConfig::symmetric(3, 3, 2, 1).unwrap();
        let rs = partition_channels(&random_channel(&cfg, 3), &cfg).unwrap();
        let f = eval_polymap(&rs, &ReducedVars::zeros(&cfg).unwrap()).unwrap();
        assert_eq!(f.len(), 6);
        assert!(f.iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    }

    #[test]
    fn polymap_conjugation_consistency() {
        let cfg = SystemConfig::symmetric(3, 4, 4, 2).unwrap();
        let ch = random_channel(&cfg, 4);
        let rs = partition_channels(&ch, &cfg).unwrap();
        let conj_ch = ChannelRealization::for_config(
            &cfg,
            (0..3)
                .map(|k| (0..3).map(|j| ch.get(k, j).map(|z| z.conj())).collect())
                .collect(),
        )
        .unwrap();
        let rs_conj = partition_channels(&conj_ch, &cfg).unwrap();
        let rv = random_vars(&cfg, 8);
        let f = eval_polymap(&rs, &rv).unwrap();
        let g = eval_polymap(&rs_conj, &rv.conj()).unwrap();
        for (a, b) in f.iter().zip(&g) {
            assert!((a.conj() - b).norm() < 1e-12);
        }
    }

    #[test]
    fn polymap_matches_alignment_condition() {
        // F equals H1 exactly when [I Ubar^H] H [I; Vbar] = 0.
        let cfg = SystemConfig::symmetric(2, 3, 3, 1).unwrap();
        let ch = random_channel(&cfg, 11);
        let rs = partition_channels(&ch, &cfg).unwrap();
        let rv = random_vars(&cfg, 12);
        let f = eval_polymap(&rs, &rv).unwrap();
        for (i, b) in rs.blocks().iter().enumerate() {
            let (k, j) = (b.pair.rx, b.pair.tx);
            let mut u = CMat::identity(3, 1);
            u.view_mut((1, 0), (2, 1)).copy_from(rv.ubar(k));
            let mut v = CMat::identity(3, 1);
            v.view_mut((1, 0), (2, 1)).copy_from(rv.vbar(j));
            let zf = (u.adjoint() * ch.get(k, j) * v)[(0, 0)];
            assert!((zf - (b.h1[(0, 0)] - f[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn jacobian_at_origin_is_channel_blocks() {
        let cfg = SystemConfig::symmetric(3, 3, 2, 1).unwrap();
        let rs = partition_channels(&random_channel(&cfg, 21), &cfg).unwrap();
        let jac = jacobian(&rs, &ReducedVars::zeros(&cfg).unwrap()).unwrap();
        assert_eq!(jac.shape(), (6, 9));
        // Column 0 is u_1: equations F_12 and F_13 see -H3.
        assert_eq!(jac[(0, 0)], -rs.block(Pair::new(0, 1)).h3[(0, 0)]);
        assert_eq!(jac[(1, 0)], -rs.block(Pair::new(0, 2)).h3[(0, 0)]);
        // Column 3 is v_{1_1}: equations F_21 (row 2) and F_31 (row 4) see -H2.
        assert_eq!(jac[(2, 3)], -rs.block(Pair::new(1, 0)).h2[(0, 0)]);
        assert_eq!(jac[(4, 3)], -rs.block(Pair::new(2, 0)).h2[(0, 0)]);
        assert_eq!(jac[(0, 3)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn frozen_coordinates_are_zero_and_dropped() {
        let cfg = SystemConfig::symmetric(3, 3, 2, 1).unwrap();
        let rv = random_vars(&cfg, 2);
        let c = VarCoord::Send {
            user: 0,
            row: 0,
            col: 0,
        };
        let rv = rv.freeze([c]);
        assert_eq!(rv.get(c), Complex64::new(0.0, 0.0));
        assert_eq!(rv.free_coords(&cfg).len(), 8);
        let rs = partition_channels(&random_channel(&cfg, 1), &cfg).unwrap();
        assert_eq!(jacobian(&rs, &rv).unwrap().ncols(), 8);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let cfg = SystemConfig::symmetric(2, 3, 3, 1).unwrap();
        let other = SystemConfig::symmetric(2, 3, 3, 2).unwrap();
        let rs = partition_channels(&random_channel(&cfg, 1), &cfg).unwrap();
        let rv = ReducedVars::zeros(&other).unwrap();
        assert!(eval_polymap(&rs, &rv).is_err());
        assert!(jacobian(&rs, &rv).is_err());
    }
}
