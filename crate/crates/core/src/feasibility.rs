//! Necessary conditions for linear interference alignment, the properness
//! test, sufficiency in the equal-stream divisible case, and the maximum
//! total DoF admitted by the necessary conditions.
//!
//! Every subset condition is expressed on cross pairs `(k, j)` = (receiver,
//! transmitter). Equation `(k, j)` involves the reduced receive variables of
//! user `k`, `(N_k - d_k) d_k` scalars, and the reduced transmit variables of
//! user `j`, `(M_j - d_j) d_j` scalars. Transposing a pair set swaps the two
//! sides, so the condition "for every subset" is the same whichever side the
//! antenna counts are attached to.

use serde::{Deserialize, Serialize};

use crate::algebra::{build_block_graph, complete_matching, MatchingOutcome};
use crate::error::{Error, Result};
use crate::model::{cross_pairs, validate_antennas, Pair, PairSet, SystemConfig, MAX_USERS};

/// Largest `|J|` accepted by [`SubsetStrategy::Brute`].
pub const BRUTE_MAX_PAIRS: usize = 20;

/// Upper limit on the number of tuples scanned by [`max_dof_bound`].
pub const DOF_ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetStrategy {
    /// Every nonempty subset of the cross pairs.
    Brute,
    /// Only the maximal sets `{(k, j) : k in T, j in R, k != j}`.
    MaximalTr,
    /// Hall's condition on the block graph (equal, dividing stream counts).
    Matching,
}

impl SubsetStrategy {
    fn name(self) -> &'static str {
        match self {
            Self::Brute => "brute",
            Self::MaximalTr => "maximal_tr",
            Self::Matching => "matching",
        }
    }
}

/// Outcome of the subset (properness) condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCheck {
    pub holds: bool,
    pub strategy: SubsetStrategy,
    /// A violating pair set, present exactly when `holds` is false.
    pub witness: Option<PairSet>,
}

/// Stream/antenna view allowing zero-stream (inactive) users.
#[derive(Clone, Copy)]
struct Tuple<'a> {
    tx: &'a [usize],
    rx: &'a [usize],
    d: &'a [usize],
}

impl<'a> Tuple<'a> {
    fn of(cfg: &'a SystemConfig) -> Self {
        Self {
            tx: cfg.tx(),
            rx: cfg.rx(),
            d: cfg.streams(),
        }
    }

    fn users(&self) -> usize {
        self.d.len()
    }

    /// Receive-side reduced variable count of user `k`.
    fn recv_vars(&self, k: usize) -> i64 {
        (self.rx[k] as i64 - self.d[k] as i64) * self.d[k] as i64
    }

    /// Transmit-side reduced variable count of user `j`.
    fn send_vars(&self, j: usize) -> i64 {
        (self.tx[j] as i64 - self.d[j] as i64) * self.d[j] as i64
    }

    fn per_user(&self) -> Vec<bool> {
        (0..self.users())
            .map(|k| self.tx[k].min(self.rx[k]) >= self.d[k])
            .collect()
    }

    fn pair_ok(&self, p: Pair) -> bool {
        self.tx[p.rx].max(self.rx[p.tx]) >= self.d[p.rx] + self.d[p.tx]
    }

    /// `equations - variables` of a pair set; positive means the set violates the condition.
    fn deficiency(&self, pairs: &PairSet) -> i64 {
        let vars: i64 = pairs
            .receivers()
            .into_iter()
            .map(|k| self.recv_vars(k))
            .sum::<i64>()
            + pairs
                .transmitters()
                .into_iter()
                .map(|j| self.send_vars(j))
                .sum::<i64>();
        let eqs: i64 = pairs
            .iter()
            .map(|p| (self.d[p.rx] * self.d[p.tx]) as i64)
            .sum();
        eqs - vars
    }

    fn brute(&self) -> Result<Option<PairSet>> {
        let pairs: Vec<Pair> = cross_pairs(self.users()).collect();
        if pairs.len() > BRUTE_MAX_PAIRS {
            return Err(Error::StrategyUnavailable {
                strategy: SubsetStrategy::Brute.name(),
                reason: format!(
                    "{} cross pairs exceed the limit of {BRUTE_MAX_PAIRS}",
                    pairs.len()
                ),
            });
        }
        let recv: Vec<i64> = (0..self.users()).map(|k| self.recv_vars(k)).collect();
        let send: Vec<i64> = (0..self.users()).map(|k| self.send_vars(k)).collect();
        let mut best: Option<(i64, u32)> = None;
        for mask in 1u32..(1u32 << pairs.len()) {
            let (mut rows, mut cols, mut eqs) = (0u32, 0u32, 0i64);
            for (i, p) in pairs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    rows |= 1 << p.rx;
                    cols |= 1 << p.tx;
                    eqs += (self.d[p.rx] * self.d[p.tx]) as i64;
                }
            }
            let vars: i64 =
                bits(rows).map(|k| recv[k]).sum::<i64>() + bits(cols).map(|j| send[j]).sum::<i64>();
            let def = eqs - vars;
            if def > 0 && best.is_none_or(|(b, _)| def > b) {
                best = Some((def, mask));
            }
        }
        Ok(best.map(|(_, mask)| {
            PairSet::new(
                pairs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, p)| *p),
            )
            .expect("subset of cross pairs")
        }))
    }

    /// For a fixed receiver set `T` and a transmitter set `R` with
    /// `rows(I(T, R)) = T` and `cols(I(T, R)) = R`, the deficiency is
    /// `sum_{j in R} c_j(T) - vars(T)` where
    /// `c_j(T) = d_j * D_T - [j in T] d_j^2 - send_vars(j)`. Every nonempty
    /// `I(T, R)` equals one such exact pair, so maximizing over `R` in closed
    /// form for each `T` covers all `(T, R)` pairs.
    fn maximal_tr(&self) -> Option<PairSet> {
        let k_users = self.users();
        let mut best: Option<(i64, u32, u32)> = None;
        for t in 1u32..(1u32 << k_users) {
            let d_t: i64 = bits(t).map(|k| self.d[k] as i64).sum();
            let vars_t: i64 = bits(t).map(|k| self.recv_vars(k)).sum();
            let gains: Vec<i64> = (0..k_users)
                .map(|j| {
                    let dj = self.d[j] as i64;
                    let own = if t >> j & 1 == 1 { dj * dj } else { 0 };
                    dj * d_t - own - self.send_vars(j)
                })
                .collect();
            let Some((total, r)) = best_transmitter_set(t, &gains) else {
                continue;
            };
            let def = total - vars_t;
            if def > 0 && best.is_none_or(|(b, _, _)| def > b) {
                best = Some((def, t, r));
            }
        }
        best.map(|(_, t, r)| {
            PairSet::new(bits(t).flat_map(|k| {
                bits(r)
                    .filter(move |&j| j != k)
                    .map(move |j| Pair::new(k, j))
            }))
            .expect("maximal pair set")
        })
    }
}

/// Best `R` for receiver set `t` among sets with `rows = T` and `cols = R`:
/// nonempty, not a singleton inside `T`, and not containing `k` when `T = {k}`.
fn best_transmitter_set(t: u32, gains: &[i64]) -> Option<(i64, u32)> {
    let in_t = |j: usize| t >> j & 1 == 1;
    let allowed: Vec<usize> = if t.count_ones() == 1 {
        (0..gains.len()).filter(|&j| !in_t(j)).collect()
    } else {
        (0..gains.len()).collect()
    };
    let valid = |r: u32| r != 0 && !(r.count_ones() == 1 && r & t == r);

    let positive: u32 = allowed
        .iter()
        .filter(|&&j| gains[j] > 0)
        .fold(0, |m, &j| m | 1 << j);
    if valid(positive) {
        return Some((bits(positive).map(|j| gains[j]).sum(), positive));
    }

    // Fall back to the best two-element set or the best singleton outside T.
    let mut candidates: Vec<(i64, u32)> = Vec::new();
    let mut order = allowed.clone();
    order.sort_by(|&a, &b| gains[b].cmp(&gains[a]).then(a.cmp(&b)));
    if positive != 0 {
        let j = positive.trailing_zeros() as usize;
        if let Some(&other) = order.iter().find(|&&x| x != j) {
            candidates.push((gains[j] + gains[other], 1 << j | 1 << other));
        }
    } else if order.len() >= 2 {
        candidates.push((
            gains[order[0]] + gains[order[1]],
            1 << order[0] | 1 << order[1],
        ));
    }
    if let Some(&j) = order.iter().find(|&&j| !in_t(j)) {
        candidates.push((gains[j], 1 << j));
    }
    candidates
        .into_iter()
        .filter(|&(_, r)| valid(r))
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
}

fn bits(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |i| mask >> i & 1 == 1)
}

/// Condition (per user): `min(M_k, N_k) >= d_k`.
pub fn check_per_user(cfg: &SystemConfig) -> Vec<bool> {
    Tuple::of(cfg).per_user()
}

/// Result of the pairwise condition for one ordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCheck {
    pub pair: Pair,
    pub ok: bool,
}

/// Pairwise condition `max(M_k, N_j) >= d_k + d_j` on every ordered pair.
pub fn check_pairwise(cfg: &SystemConfig) -> Vec<PairCheck> {
    let t = Tuple::of(cfg);
    cfg.cross_pairs()
        .map(|pair| PairCheck {
            pair,
            ok: t.pair_ok(pair),
        })
        .collect()
}

/// Whether the equal-stream block graph exists (every antenna count divisible by `d`).
pub fn matching_applicable(cfg: &SystemConfig) -> bool {
    cfg.equal_streams()
        .is_some_and(|d| cfg.tx().iter().chain(cfg.rx()).all(|&a| a % d == 0))
}

/// Subset condition: for every nonempty `I` of cross pairs, the reduced
/// variables touched by `I` are at least as many as its scalar equations.
pub fn check_subsets(cfg: &SystemConfig, strategy: SubsetStrategy) -> Result<SubsetCheck> {
    let t = Tuple::of(cfg);
    let witness = match strategy {
        SubsetStrategy::Brute => t.brute()?,
        SubsetStrategy::MaximalTr => t.maximal_tr(),
        SubsetStrategy::Matching => {
            if !matching_applicable(cfg) {
                return Err(Error::StrategyUnavailable {
                    strategy: strategy.name(),
                    reason: "needs equal stream counts dividing every antenna count".into(),
                });
            }
            let graph = build_block_graph(cfg)?;
            match complete_matching(&graph) {
                MatchingOutcome::Complete(_) => None,
                MatchingOutcome::Deficient(v) => Some(v.pairs),
            }
        }
    };
    Ok(SubsetCheck {
        holds: witness.is_none(),
        strategy,
        witness,
    })
}

/// Preferred strategy: the polynomial matching path when available, else MaximalTR.
pub fn default_strategy(cfg: &SystemConfig) -> SubsetStrategy {
    if matching_applicable(cfg) {
        SubsetStrategy::Matching
    } else {
        SubsetStrategy::MaximalTr
    }
}

/// Scalar deficiency (`equations - variables`) of a pair set.
pub fn deficiency(cfg: &SystemConfig, pairs: &PairSet) -> i64 {
    Tuple::of(cfg).deficiency(pairs)
}

/// Properness: every subsystem has at least as many variables as equations.
pub fn is_proper(cfg: &SystemConfig) -> bool {
    check_subsets(cfg, default_strategy(cfg))
        .expect("default strategy preconditions hold")
        .holds
}

/// Exact non-negative rational number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn new(num: u64, den: u64) -> Self {
        let g = num_integer::gcd(num, den).max(1);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `x <= self` for an integer `x`.
    pub fn admits(self, x: u64) -> bool {
        x as u128 * self.den as u128 <= self.num as u128
    }
}

/// Bounds on the DoF tuple that follow from the subset condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorollaryBounds {
    /// Largest common stream count `sum_k (M_k + N_k) / (K (K + 1))`.
    pub a_max_d: Rational,
    /// Whether the configured tuple respects `a_max_d` (only for equal streams).
    pub a_holds: Option<bool>,
    /// Present when `M_k + N_k` is the same for every user.
    pub b: Option<CorollaryB>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorollaryB {
    /// The common antenna total `M + N`.
    pub antenna_total: usize,
    /// `(sum d)^2 + sum d^2 <= (M + N) sum d`.
    pub holds: bool,
    /// Largest integer total DoF compatible with `sum d < M + N`.
    pub strict_total: usize,
}

pub fn corollary_bounds(cfg: &SystemConfig) -> CorollaryBounds {
    let k = cfg.users() as u64;
    let total_antennas: u64 = cfg.tx().iter().chain(cfg.rx()).map(|&a| a as u64).sum();
    let a_max_d = Rational::new(total_antennas, k * (k + 1));
    let a_holds = cfg.equal_streams().map(|d| a_max_d.admits(d as u64));

    let per_user: Vec<usize> = (0..cfg.users())
        .map(|i| cfg.tx()[i] + cfg.rx()[i])
        .collect();
    let b = per_user.iter().all(|&s| s == per_user[0]).then(|| {
        let s = per_user[0] as u64;
        let sum: u64 = cfg.streams().iter().map(|&d| d as u64).sum();
        let sum_sq: u64 = cfg.streams().iter().map(|&d| (d * d) as u64).sum();
        CorollaryB {
            antenna_total: per_user[0],
            holds: sum * sum + sum_sq <= s * sum,
            strict_total: per_user[0] - 1,
        }
    });
    CorollaryBounds {
        a_max_d,
        a_holds,
        b,
    }
}

/// Largest total DoF admitted by the necessary conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofBoundResult {
    pub max_total: usize,
    pub argmax_tuple: Vec<usize>,
    /// Number of candidate tuples in the search space.
    pub enumeration_count: u64,
}

/// Enumerates every tuple `0 <= d_k <= min(M_k, N_k)` and returns the largest
/// total satisfying the pairwise and subset conditions. A zero entry means the
/// user is inactive. Ties prefer more active users, then the lexicographically
/// largest tuple.
pub fn max_dof_bound(tx: &[usize], rx: &[usize]) -> Result<DofBoundResult> {
    validate_antennas(tx.len(), tx, rx)?;
    let caps: Vec<usize> = tx.iter().zip(rx).map(|(&m, &n)| m.min(n)).collect();
    let count = caps
        .iter()
        .try_fold(1u128, |acc, &c| acc.checked_mul(c as u128 + 1))
        .unwrap_or(u128::MAX);
    if count > DOF_ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard {
            tuples: count,
            limit: DOF_ENUMERATION_LIMIT,
        });
    }

    let k_users = caps.len();
    let mut d = vec![0usize; k_users];
    let mut best_key: (usize, usize) = (0, 0);
    let mut best_tuple = vec![0usize; k_users];
    loop {
        let total: usize = d.iter().sum();
        let active = d.iter().filter(|&&x| x > 0).count();
        let key = (total, active);
        if key > best_key || (key == best_key && d > best_tuple) {
            let t = Tuple { tx, rx, d: &d };
            let pairwise = cross_pairs(k_users).all(|p| t.pair_ok(p));
            if pairwise && t.maximal_tr().is_none() {
                best_key = key;
                best_tuple.clone_from(&d);
            }
        }
        // Odometer increment.
        let mut i = 0;
        while i < k_users && d[i] == caps[i] {
            d[i] = 0;
            i += 1;
        }
        if i == k_users {
            break;
        }
        d[i] += 1;
    }
    Ok(DofBoundResult {
        max_total: best_key.0,
        argmax_tuple: best_tuple,
        enumeration_count: count as u64,
    })
}

/// Why a configuration is generically infeasible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum InfeasibilityReason {
    PerUser {
        #[serde(with = "crate::model::one_based")]
        user: usize,
    },
    Pairwise {
        pair: Pair,
    },
    Subset {
        witness: PairSet,
    },
}

/// Which sufficiency argument applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityBasis {
    /// Equal stream count dividing every antenna count, plus properness.
    EqualStreamsDivisible,
    /// Symmetric system with only one side divisible, plus properness.
    SymmetricOneSideDivisible,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    InfeasibleGeneric { reasons: Vec<InfeasibilityReason> },
    FeasibleGeneric { basis: FeasibilityBasis },
    Unknown { reason: String },
}

impl Verdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Self::FeasibleGeneric { .. })
    }

    pub fn is_infeasible(&self) -> bool {
        matches!(self, Self::InfeasibleGeneric { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub per_user_ok: Vec<bool>,
    pub pairwise_ok: Vec<PairCheck>,
    pub subset: SubsetCheck,
    pub proper: bool,
    pub corollary: CorollaryBounds,
    pub verdict: Verdict,
}

pub fn feasibility_verdict(cfg: &SystemConfig) -> FeasibilityReport {
    let per_user_ok = check_per_user(cfg);
    let pairwise_ok = check_pairwise(cfg);
    let subset =
        check_subsets(cfg, default_strategy(cfg)).expect("default strategy preconditions hold");
    let proper = subset.holds;

    let mut reasons: Vec<InfeasibilityReason> = per_user_ok
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(user, _)| InfeasibilityReason::PerUser { user })
        .collect();
    reasons.extend(
        pairwise_ok
            .iter()
            .filter(|c| !c.ok)
            .map(|c| InfeasibilityReason::Pairwise { pair: c.pair }),
    );
    if let Some(w) = &subset.witness {
        reasons.push(InfeasibilityReason::Subset { witness: w.clone() });
    }

    let verdict = if !reasons.is_empty() {
        Verdict::InfeasibleGeneric { reasons }
    } else {
        sufficiency(cfg)
    };
    FeasibilityReport {
        per_user_ok,
        pairwise_ok,
        subset,
        proper,
        corollary: corollary_bounds(cfg),
        verdict,
    }
}

/// Sufficiency rules, applied once every necessary condition holds.
fn sufficiency(cfg: &SystemConfig) -> Verdict {
    let Some(d) = cfg.equal_streams() else {
        return Verdict::Unknown {
            reason: "stream counts differ between users".into(),
        };
    };
    if matching_applicable(cfg) {
        return Verdict::FeasibleGeneric {
            basis: FeasibilityBasis::EqualStreamsDivisible,
        };
    }
    if let Some((m, n)) = cfg.symmetric_antennas() {
        if (m % d == 0 || n % d == 0) && m >= d && n >= d {
            return Verdict::FeasibleGeneric {
                basis: FeasibilityBasis::SymmetricOneSideDivisible,
            };
        }
        return Verdict::Unknown {
            reason: format!("neither M = {m} nor N = {n} is divisible by d = {d}"),
        };
    }
    Verdict::Unknown {
        reason: format!("antenna counts are not all divisible by d = {d}"),
    }
}

/// Checks the symmetric closed form `(K + 1) d <= M + N`.
pub fn symmetric_proper(users: usize, m: usize, n: usize, d: usize) -> bool {
    (users + 1) * d <= m + n
}

const _: () = assert!(MAX_USERS <= 32);
