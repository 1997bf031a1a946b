//! Chain-selection rules, looked up by name.

use crate::error::{Error, Result};
use crate::netmodel::NetworkScenario;

use super::tree::{BlockRef, BlockTree};

pub trait ForkChoice: Send + Sync {
    fn name(&self) -> &'static str;

    fn validate(&self, _scenario: &NetworkScenario) -> Result<()> {
        Ok(())
    }

    /// Whether mined blocks must carry knowledge bits.
    fn tracks_knowledge(&self) -> bool {
        false
    }

    /// Synchronization phase. `delivered[i * n + j]` is set when miner `i`'s
    /// view reached miner `j` this slot. Views are exchanged simultaneously.
    fn synchronize(&self, tree: &mut BlockTree, tips: &mut [BlockRef], delivered: &[bool]);

    /// Deepest block that every future chain is guaranteed to contain.
    fn settled(&self, tree: &BlockTree, tips: &[BlockRef]) -> BlockRef;
}

/// Adopt the longest received chain when it is strictly longer than one's
/// own. Among equally long received chains the lowest sender wins.
#[derive(Debug, Clone, Copy, Default)]
pub struct LongestChain;

impl ForkChoice for LongestChain {
    fn name(&self) -> &'static str {
        "longest-chain"
    }

    fn synchronize(&self, tree: &mut BlockTree, tips: &mut [BlockRef], delivered: &[bool]) {
        let n = tips.len();
        let before = tips.to_vec();
        for (j, tip) in tips.iter_mut().enumerate() {
            let mut best = before[j];
            let mut best_height = tree.height(best);
            for (i, &sent) in before.iter().enumerate() {
                if i != j && delivered[i * n + j] && tree.height(sent) > best_height {
                    best = sent;
                    best_height = tree.height(sent);
                }
            }
            *tip = best;
        }
    }

    fn settled(&self, tree: &BlockTree, tips: &[BlockRef]) -> BlockRef {
        tree.lca_all(tips)
    }
}

/// Greedy heaviest observed subtree for two miners. A delivery hands over the
/// sender's whole known tree.
#[derive(Debug, Clone, Copy, Default)]
pub struct GhostTwoMiner;

impl ForkChoice for GhostTwoMiner {
    fn name(&self) -> &'static str {
        "ghost-two-miner"
    }

    fn validate(&self, scenario: &NetworkScenario) -> Result<()> {
        if scenario.miners() != 2 {
            return Err(Error::InvalidParameter(format!(
                "rule ghost-two-miner needs exactly 2 miners, got {}",
                scenario.miners()
            )));
        }
        Ok(())
    }

    fn tracks_knowledge(&self) -> bool {
        true
    }

    fn synchronize(&self, tree: &mut BlockTree, tips: &mut [BlockRef], delivered: &[bool]) {
        let n = tips.len();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && delivered[i * n + j])
            .collect();
        if !pairs.is_empty() {
            for blk in tree.blocks_mut() {
                let old = blk.known;
                for &(i, j) in &pairs {
                    if old & (1 << i) != 0 {
                        blk.known |= 1 << j;
                    }
                }
            }
        }
        for (j, tip) in tips.iter_mut().enumerate() {
            *tip = ghost_parent(tree, Some(j));
        }
    }

    fn settled(&self, tree: &BlockTree, tips: &[BlockRef]) -> BlockRef {
        let all = (1u64 << tips.len()) - 1;
        let shared = tree.blocks().iter().all(|b| b.known & all == all);
        if shared && tips.iter().all(|&t| t == tips[0]) {
            tips[0]
        } else {
            tree.root()
        }
    }
}

/// Leaf reached from the root by always stepping into the child with the
/// heaviest subtree, counting only blocks known to `viewer` (all blocks when
/// `None`). Ties go to the child mined by the lower miner index, then to the
/// older block.
pub fn ghost_parent(tree: &BlockTree, viewer: Option<usize>) -> BlockRef {
    let blocks = tree.blocks();
    let visible = |b: usize| viewer.is_none_or(|v| blocks[b].known & (1 << v) != 0);
    let mut weight = vec![0u64; blocks.len()];
    for b in (0..blocks.len()).rev() {
        if !visible(b) {
            continue;
        }
        weight[b] += 1;
        if let Some(p) = tree.parent(b as BlockRef) {
            weight[p as usize] += weight[b];
        }
    }
    let mut best: Vec<Option<usize>> = vec![None; blocks.len()];
    for b in 1..blocks.len() {
        if !visible(b) {
            continue;
        }
        let p = blocks[b].parent as usize;
        let better = match best[p] {
            None => true,
            Some(c) => {
                (weight[b], std::cmp::Reverse(blocks[b].miner), std::cmp::Reverse(blocks[b].id))
                    > (weight[c], std::cmp::Reverse(blocks[c].miner), std::cmp::Reverse(blocks[c].id))
            }
        };
        if better {
            best[p] = Some(b);
        }
    }
    let mut cur = tree.root() as usize;
    while let Some(c) = best[cur] {
        cur = c;
    }
    cur as BlockRef
}

pub const FORK_CHOICE_NAMES: [&str; 2] = ["longest-chain", "ghost-two-miner"];

pub fn fork_choice_by_name(name: &str) -> Result<Box<dyn ForkChoice>> {
    match name {
        "longest-chain" => Ok(Box::new(LongestChain)),
        "ghost-two-miner" => Ok(Box::new(GhostTwoMiner)),
        other => Err(Error::UnknownStrategy {
            kind: "fork-choice rule",
            name: other.to_string(),
            available: FORK_CHOICE_NAMES.join(", "),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_chain_gives_tip() {
        let mut t = BlockTree::new();
        let a = t.push(0, 0, 0, 3);
        let b = t.push(a, 1, 1, 3);
        assert_eq!(ghost_parent(&t, None), b);
        assert_eq!(ghost_parent(&t, Some(1)), b);
    }

    #[test]
    fn equal_branches_prefer_lower_miner() {
        let mut t = BlockTree::new();
        t.push(0, 1, 0, 3);
        let by0 = t.push(0, 0, 0, 3);
        assert_eq!(ghost_parent(&t, None), by0);
    }

    #[test]
    fn heavier_subtree_beats_longer_branch() {
        // Miner 1's branch is longer (height 3) but miner 0's bushy branch
        // holds four blocks against three.
        let mut t = BlockTree::new();
        let y = t.push(0, 1, 0, 1);
        let y1 = t.push(y, 1, 1, 1);
        t.push(y1, 1, 2, 1);
        let x = t.push(0, 0, 0, 1);
        let x1 = t.push(x, 0, 1, 1);
        t.push(x, 0, 1, 1);
        t.push(x, 0, 1, 1);
        let leaf = ghost_parent(&t, None);
        assert_eq!(leaf, x1);
        assert_eq!(t.height(leaf), 2);
    }

    #[test]
    fn viewer_restricts_tree() {
        let mut t = BlockTree::new();
        let a = t.push(0, 0, 0, 1);
        let b = t.push(0, 1, 0, 2);
        let b2 = t.push(b, 1, 1, 2);
        assert_eq!(ghost_parent(&t, Some(0)), a);
        assert_eq!(ghost_parent(&t, Some(1)), b2);
    }

    #[test]
    fn longest_chain_adoption() {
        let mut t = BlockTree::new();
        let a = t.push(0, 0, 0, 0);
        let a2 = t.push(a, 0, 1, 0);
        let b = t.push(0, 1, 0, 0);
        let c = t.push(0, 2, 0, 0);
        let c2 = t.push(c, 2, 1, 0);
        let mut tips = vec![a2, b, c2];
        let mut delivered = vec![false; 9];
        // 0 -> 1 and 2 -> 1 both longer and tied: lowest sender wins.
        delivered[1] = true;
        delivered[2 * 3 + 1] = true;
        // 1 -> 0 is shorter: ignored. 2 -> 0 ties: keep own.
        delivered[3] = true;
        delivered[2 * 3] = true;
        LongestChain.synchronize(&mut t, &mut tips, &delivered);
        assert_eq!(tips, vec![a2, a2, c2]);
        assert_eq!(LongestChain.settled(&t, &tips), t.root());
    }

    #[test]
    fn registry() {
        assert_eq!(fork_choice_by_name("longest-chain").unwrap().name(), "longest-chain");
        assert_eq!(fork_choice_by_name("ghost-two-miner").unwrap().name(), "ghost-two-miner");
        assert!(fork_choice_by_name("heaviest").is_err());
        let three = NetworkScenario::complete(vec![0.1; 3], 0.5).unwrap();
        assert!(GhostTwoMiner.validate(&three).is_err());
    }
}
