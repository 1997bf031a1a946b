//! Arena of blocks above the last settled block.

use serde::Serialize;

/// Index of a block in the arena. Only valid until the next compaction.
pub type BlockRef = u32;

pub const NO_MINER: u32 = u32::MAX;
const NO_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Block {
    /// Unique over the whole run.
    pub id: u64,
    pub parent: BlockRef,
    pub height: u64,
    pub miner: u32,
    pub slot: u64,
    /// Bit `i` set when miner `i` knows the block. Only maintained for
    /// rules that track knowledge.
    pub known: u64,
}

/// One entry of a local chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChainBlock {
    pub height: u64,
    pub miner: u32,
    pub id: u64,
}

/// Blocks of one miner's chain above the settled root, lowest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LocalChain {
    pub blocks: Vec<ChainBlock>,
    pub length: u64,
}

#[derive(Debug, Clone)]
pub struct BlockTree {
    blocks: Vec<Block>,
    next_id: u64,
    keep: Vec<bool>,
    remap: Vec<BlockRef>,
}

impl BlockTree {
    /// A tree holding only the genesis block, known to everyone.
    pub fn new() -> Self {
        Self {
            blocks: vec![Block {
                id: 0,
                parent: NO_PARENT,
                height: 0,
                miner: NO_MINER,
                slot: 0,
                known: u64::MAX,
            }],
            next_id: 1,
            keep: Vec::new(),
            remap: Vec::new(),
        }
    }

    /// The settled block every live block descends from.
    pub fn root(&self) -> BlockRef {
        0
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, b: BlockRef) -> &Block {
        &self.blocks[b as usize]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub(crate) fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn height(&self, b: BlockRef) -> u64 {
        self.blocks[b as usize].height
    }

    pub fn parent(&self, b: BlockRef) -> Option<BlockRef> {
        let p = self.blocks[b as usize].parent;
        (p != NO_PARENT).then_some(p)
    }

    /// Appends a block mined by `miner` on top of `parent`.
    pub fn push(&mut self, parent: BlockRef, miner: u32, slot: u64, known: u64) -> BlockRef {
        let height = self.height(parent) + 1;
        self.blocks.push(Block {
            id: self.next_id,
            parent,
            height,
            miner,
            slot,
            known,
        });
        self.next_id += 1;
        (self.blocks.len() - 1) as BlockRef
    }

    /// Deepest common ancestor of two blocks.
    pub fn lca(&self, mut x: BlockRef, mut y: BlockRef) -> BlockRef {
        while x != y {
            if self.height(x) >= self.height(y) {
                x = self.blocks[x as usize].parent;
            } else {
                y = self.blocks[y as usize].parent;
            }
        }
        x
    }

    pub fn lca_all(&self, tips: &[BlockRef]) -> BlockRef {
        tips.iter().skip(1).fold(tips[0], |acc, &t| self.lca(acc, t))
    }

    /// Blocks strictly above `ancestor` on the path to `b`, lowest first.
    pub fn path_above(&self, mut b: BlockRef, ancestor: BlockRef) -> Vec<BlockRef> {
        let mut out = Vec::new();
        while b != ancestor {
            out.push(b);
            b = self.blocks[b as usize].parent;
        }
        out.reverse();
        out
    }

    pub fn local_chain(&self, tip: BlockRef) -> LocalChain {
        let blocks = self
            .path_above(tip, self.root())
            .into_iter()
            .map(|b| {
                let blk = self.get(b);
                ChainBlock {
                    height: blk.height,
                    miner: blk.miner,
                    id: blk.id,
                }
            })
            .collect();
        LocalChain {
            blocks,
            length: self.height(tip),
        }
    }

    /// Makes `new_root` the root and drops everything that is not an ancestor
    /// of some tip. Tips are remapped in place.
    pub fn reroot(&mut self, new_root: BlockRef, tips: &mut [BlockRef]) {
        let n = self.blocks.len();
        self.keep.clear();
        self.keep.resize(n, false);
        self.keep[new_root as usize] = true;
        let root_height = self.height(new_root);
        for &t in tips.iter() {
            let mut b = t;
            while !self.keep[b as usize] {
                debug_assert!(self.height(b) > root_height);
                self.keep[b as usize] = true;
                b = self.blocks[b as usize].parent;
            }
        }
        self.remap.clear();
        self.remap.resize(n, NO_PARENT);
        let mut w = 0usize;
        for r in 0..n {
            if !self.keep[r] {
                continue;
            }
            let mut blk = self.blocks[r];
            blk.parent = if r == new_root as usize {
                NO_PARENT
            } else {
                self.remap[blk.parent as usize]
            };
            self.blocks[w] = blk;
            self.remap[r] = w as BlockRef;
            w += 1;
        }
        self.blocks.truncate(w);
        for t in tips.iter_mut() {
            *t = self.remap[*t as usize];
        }
        debug_assert_eq!(self.blocks[0].height, root_height);
    }
}

impl Default for BlockTree {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lca_and_paths() {
        let mut t = BlockTree::new();
        let a1 = t.push(0, 0, 0, 1);
        let a2 = t.push(a1, 0, 1, 1);
        let b2 = t.push(a1, 1, 1, 2);
        let b3 = t.push(b2, 1, 2, 2);
        assert_eq!(t.lca(a2, b3), a1);
        assert_eq!(t.lca_all(&[a2, b3, a1]), a1);
        assert_eq!(t.path_above(b3, a1), vec![b2, b3]);
        let chain = t.local_chain(b3);
        assert_eq!(chain.length, 3);
        assert_eq!(
            chain.blocks.iter().map(|b| b.height).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
    }

    #[test]
    fn reroot_keeps_tip_ancestry() {
        let mut t = BlockTree::new();
        let a1 = t.push(0, 0, 0, 1);
        t.push(0, 1, 0, 2);
        let a2 = t.push(a1, 0, 1, 1);
        let b2 = t.push(a1, 1, 1, 2);
        let ids = (t.get(a2).id, t.get(b2).id);
        let mut tips = [a2, b2];
        t.reroot(a1, &mut tips);
        assert_eq!(t.len(), 3);
        assert_eq!(t.get(t.root()).height, 1);
        assert_eq!((t.get(tips[0]).id, t.get(tips[1]).id), ids);
        assert_eq!(t.parent(tips[0]), Some(t.root()));
        assert_eq!(t.parent(t.root()), None);
        let fresh = t.push(tips[0], 0, 2, 1);
        assert_eq!(t.get(fresh).id, 5);
        assert_eq!(t.height(fresh), 3);
    }
}
