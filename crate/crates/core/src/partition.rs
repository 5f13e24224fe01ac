use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, ONE, ZERO};
use crate::{Error, Result};

/// Disjoint blocks of on-site levels. Levels in no block are inactive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct LevelPartition {
    local_dim: usize,
    blocks: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawPartition {
    local_dim: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<RawPartition> for LevelPartition {
    type Error = Error;
    fn try_from(raw: RawPartition) -> Result<Self> {
        LevelPartition::new(raw.local_dim, raw.blocks)
    }
}

impl LevelPartition {
    pub fn new(local_dim: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        if local_dim < 2 {
            return Err(Error::InvalidPartition(format!("local dimension {local_dim} < 2")));
        }
        let mut seen = vec![false; local_dim];
        for (b, block) in blocks.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::InvalidPartition(format!("block {b} is empty")));
            }
            for &l in block {
                if l >= local_dim {
                    return Err(Error::InvalidPartition(format!(
                        "level {l} in block {b} exceeds local dimension {local_dim}"
                    )));
                }
                if seen[l] {
                    return Err(Error::InvalidPartition(format!("level {l} appears twice")));
                }
                seen[l] = true;
            }
        }
        Ok(Self { local_dim, blocks })
    }

    /// Partition that must cover every level.
    pub fn complete(local_dim: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let p = Self::new(local_dim, blocks)?;
        if !p.is_complete() {
            return Err(Error::InvalidPartition(format!(
                "levels {:?} are not covered",
                p.inactive()
            )));
        }
        Ok(p)
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn inactive(&self) -> Vec<usize> {
        (0..self.local_dim).filter(|l| self.block_of(*l).is_none()).collect()
    }

    pub fn is_complete(&self) -> bool {
        self.inactive().is_empty()
    }

    pub fn block_of(&self, level: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&level))
    }

    /// Same blocks plus the inactive levels appended as a final block, if any.
    pub fn completed(&self) -> Self {
        let mut blocks = self.blocks.clone();
        let rest = self.inactive();
        if !rest.is_empty() {
            blocks.push(rest);
        }
        Self { local_dim: self.local_dim, blocks }
    }

    /// Projector `Π_b` onto block `b`.
    pub fn projector(&self, b: usize) -> CMatrix {
        let d = self.local_dim;
        let block = &self.blocks[b];
        CMatrix::from_fn(d, d, |r, c| if r == c && block.contains(&r) { ONE } else { ZERO })
    }

    /// Projector onto all active levels.
    pub fn active_projector(&self) -> CMatrix {
        let d = self.local_dim;
        CMatrix::from_fn(d, d, |r, c| {
            if r == c && self.block_of(r).is_some() {
                ONE
            } else {
                ZERO
            }
        })
    }
}
