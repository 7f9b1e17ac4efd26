use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feasibility::matching_applicable;
use crate::model::{Pair, PairSet, SystemConfig};

/// A `d x d` block of reduced variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "side", rename_all = "snake_case")]
pub enum VarBlock {
    /// Rows `block*d .. (block+1)*d` of `Ubar_user`.
    Recv {
        #[serde(with = "crate::model::one_based")]
        user: usize,
        block: usize,
    },
    /// Rows `block*d .. (block+1)*d` of `Vbar_user`.
    Send {
        #[serde(with = "crate::model::one_based")]
        user: usize,
        block: usize,
    },
}

/// Bipartite graph between variable blocks (X) and pair equations (Y).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGraph {
    block_size: usize,
    x: Vec<VarBlock>,
    y: Vec<Pair>,
    adj: Vec<Vec<usize>>,
}

impl BlockGraph {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn x_nodes(&self) -> &[VarBlock] {
        &self.x
    }

    pub fn y_nodes(&self) -> &[Pair] {
        &self.y
    }

    /// X indices adjacent to equation node `y`, ascending.
    pub fn neighbours(&self, y: usize) -> &[usize] {
        &self.adj[y]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn x_index(&self, b: VarBlock) -> Option<usize> {
        self.x.binary_search(&b).ok()
    }
}

/// Block graph of an equal-stream system whose stream count divides every
/// antenna count. `Ubar_k` contributes `N_k/d - 1` blocks, `Vbar_j` contributes
/// `M_j/d - 1`; equation `(k, j)` touches all blocks of `Ubar_k` and `Vbar_j`.
pub fn build_block_graph(cfg: &SystemConfig) -> Result<BlockGraph> {
    if !matching_applicable(cfg) {
        return Err(Error::StrategyUnavailable {
            strategy: "matching",
            reason: "needs equal stream counts dividing every antenna count".into(),
        });
    }
    let d = cfg.streams()[0];
    let k_users = cfg.users();
    let mut x = Vec::new();
    for user in 0..k_users {
        x.extend((0..cfg.rx()[user] / d - 1).map(|block| VarBlock::Recv { user, block }));
    }
    for user in 0..k_users {
        x.extend((0..cfg.tx()[user] / d - 1).map(|block| VarBlock::Send { user, block }));
    }
    let y: Vec<Pair> = cfg.cross_pairs().collect();
    let adj = y
        .iter()
        .map(|p| {
            x.iter()
                .enumerate()
                .filter(|(_, b)| match **b {
                    VarBlock::Recv { user, .. } => user == p.rx,
                    VarBlock::Send { user, .. } => user == p.tx,
                })
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    Ok(BlockGraph {
        block_size: d,
        x,
        y,
        adj,
    })
}

/// A matching covering every equation node: `y_to_x[y]` is its variable block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matching {
    pub y_to_x: Vec<usize>,
}

impl Matching {
    /// X indices not used by the matching.
    pub fn unmatched_x(&self, g: &BlockGraph) -> Vec<usize> {
        let mut used = vec![false; g.x.len()];
        for &x in &self.y_to_x {
            used[x] = true;
        }
        (0..g.x.len()).filter(|&i| !used[i]).collect()
    }

    /// Checks that this is a valid matching of `g` covering all of Y.
    pub fn validate(&self, g: &BlockGraph) -> Result<()> {
        if self.y_to_x.len() != g.y.len() {
            return Err(Error::IncompleteMatching);
        }
        let mut used = vec![false; g.x.len()];
        for (y, &x) in self.y_to_x.iter().enumerate() {
            if x >= g.x.len() || used[x] || !g.adj[y].contains(&x) {
                return Err(Error::IncompleteMatching);
            }
            used[x] = true;
        }
        Ok(())
    }
}

/// A set of equation nodes with fewer neighbouring variable blocks than members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HallViolator {
    pub equations: Vec<usize>,
    pub neighbours: Vec<usize>,
    pub pairs: PairSet,
    /// Size of the maximum matching found.
    pub matching_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MatchingOutcome {
    Complete(Matching),
    Deficient(HallViolator),
}

fn augment(y: usize, adj: &[Vec<usize>], x_match: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &x in &adj[y] {
        if seen[x] {
            continue;
        }
        seen[x] = true;
        if x_match[x].is_none_or(|other| augment(other, adj, x_match, seen)) {
            x_match[x] = Some(y);
            return true;
        }
    }
    false
}

/// Maximum matching by augmenting paths in node order. Returns a complete
/// matching, or the Hall violator reachable by alternating paths from the
/// unmatched equation nodes (its deficiency equals the number of unmatched nodes).
pub fn complete_matching(g: &BlockGraph) -> MatchingOutcome {
    let mut x_match: Vec<Option<usize>> = vec![None; g.x.len()];
    for y in 0..g.y.len() {
        let mut seen = vec![false; g.x.len()];
        augment(y, &g.adj, &mut x_match, &mut seen);
    }
    let mut y_match: Vec<Option<usize>> = vec![None; g.y.len()];
    for (x, m) in x_match.iter().enumerate() {
        if let Some(y) = *m {
            y_match[y] = Some(x);
        }
    }
    if y_match.iter().all(Option::is_some) {
        return MatchingOutcome::Complete(Matching {
            y_to_x: y_match.into_iter().flatten().collect(),
        });
    }

    let matching_size = y_match.iter().flatten().count();
    let mut y_seen = vec![false; g.y.len()];
    let mut x_seen = vec![false; g.x.len()];
    let mut queue: Vec<usize> = (0..g.y.len()).filter(|&y| y_match[y].is_none()).collect();
    for &y in &queue {
        y_seen[y] = true;
    }
    while let Some(y) = queue.pop() {
        for &x in &g.adj[y] {
            if x_seen[x] {
                continue;
            }
            x_seen[x] = true;
            let next = x_match[x].expect("maximum matching saturates reachable blocks");
            if !y_seen[next] {
                y_seen[next] = true;
                queue.push(next);
            }
        }
    }
    let equations: Vec<usize> = (0..g.y.len()).filter(|&y| y_seen[y]).collect();
    let neighbours: Vec<usize> = (0..g.x.len()).filter(|&x| x_seen[x]).collect();
    let pairs = PairSet::new(equations.iter().map(|&y| g.y[y])).expect("distinct cross pairs");
    MatchingOutcome::Deficient(HallViolator {
        equations,
        neighbours,
        pairs,
        matching_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_graph_counts() {
        let g = build_block_graph(&SystemConfig::symmetric(3, 3, 2, 1).unwrap()).unwrap();
        assert_eq!(g.x_nodes().len(), 9);
        assert_eq!(g.y_nodes().len(), 6);
        // Each equation sees one Ubar block and two Vbar blocks.
        assert!((0..6).all(|y| g.neighbours(y).len() == 3));
        assert_eq!(g.edge_count(), 18);
    }

    #[test]
    fn single_user_graph_is_empty() {
        let g = build_block_graph(&SystemConfig::symmetric(1, 4, 2, 2).unwrap()).unwrap();
        assert!(g.y_nodes().is_empty());
        assert_eq!(g.edge_count(), 0);
        assert_eq!(
            complete_matching(&g),
            MatchingOutcome::Complete(Matching { y_to_x: vec![] })
        );
    }

    #[test]
    fn four_user_counts_and_violator() {
        let g = build_block_graph(&SystemConfig::symmetric(4, 2, 2, 1).unwrap()).unwrap();
        assert_eq!(g.x_nodes().len(), 8);
        assert_eq!(g.y_nodes().len(), 12);
        match complete_matching(&g) {
            MatchingOutcome::Deficient(v) => {
                assert_eq!(v.pairs, PairSet::all(4));
                assert_eq!(v.neighbours.len(), 8);
                assert_eq!(v.matching_size, 8);
                assert!(v.neighbours.len() < v.equations.len());
            }
            other => panic!("expected a violator, got {other:?}"),
        }
    }

    #[test]
    fn toy_has_complete_matching() {
        let g = build_block_graph(&SystemConfig::symmetric(3, 3, 2, 1).unwrap()).unwrap();
        let MatchingOutcome::Complete(m) = complete_matching(&g) else {
            panic!("toy graph must match");
        };
        assert_eq!(m.y_to_x.len(), 6);
        m.validate(&g).unwrap();
        assert_eq!(m.unmatched_x(&g).len(), 3);
    }

    #[test]
    fn violator_neighbourhood_is_exact() {
        // Asymmetric case: every reported neighbour is adjacent to the set and vice versa.
        let cfg = SystemConfig::new(3, vec![2, 4, 2], vec![2, 2, 2], vec![2, 2, 2]).unwrap();
        let g = build_block_graph(&cfg).unwrap();
        if let MatchingOutcome::Deficient(v) = complete_matching(&g) {
            let mut nb: Vec<usize> = v
                .equations
                .iter()
                .flat_map(|&y| g.neighbours(y).to_vec())
                .collect();
            nb.sort();
            nb.dedup();
            assert_eq!(nb, v.neighbours);
            assert!(v.neighbours.len() < v.equations.len());
        } else {
            panic!("expected deficiency");
        }
    }

    #[test]
    fn rejects_non_divisible() {
        assert!(build_block_graph(&SystemConfig::symmetric(2, 3, 3, 2).unwrap()).is_err());
    }
}
