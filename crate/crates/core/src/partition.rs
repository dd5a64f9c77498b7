//! Subset-resource-block (SRB) partition of each BS's subchannels.

use crate::error::{Error, Result};
use crate::system::PartitionStyle;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SrbPartition {
    subchannels: usize,
    srbs: usize,
    /// `blocks[n][m]` lists the subchannel indices of SRB `m` at BS `n`.
    blocks: Vec<Vec<Vec<usize>>>,
    /// `group[n][f]` is the SRB index owning subchannel `f` at BS `n`.
    group: Vec<Vec<usize>>,
}

/// Contiguous blocks `{m F/M, ..., (m+1) F/M - 1}` for a single BS.
pub fn build_partition(subchannels: usize, srbs: usize) -> Result<Vec<Vec<usize>>> {
    if srbs == 0 || subchannels == 0 || subchannels % srbs != 0 {
        return Err(Error::Config(format!(
            "cannot split {subchannels} subchannels into {srbs} equal SRBs"
        )));
    }
    let size = subchannels / srbs;
    Ok((0..srbs).map(|m| (m * size..(m + 1) * size).collect()).collect())
}

impl SrbPartition {
    pub fn new(n_bs: usize, subchannels: usize, srbs: usize, style: PartitionStyle) -> Result<Self> {
        let base = build_partition(subchannels, srbs)?;
        let blocks = (0..n_bs)
            .map(|n| match style {
                PartitionStyle::Contiguous => base.clone(),
                PartitionStyle::Shifted => base
                    .iter()
                    .map(|b| b.iter().map(|&f| (f + n) % subchannels).collect())
                    .collect(),
            })
            .collect();
        Self::from_blocks(subchannels, blocks)
    }

    pub fn aligned(n_bs: usize, subchannels: usize, srbs: usize) -> Result<Self> {
        Self::new(n_bs, subchannels, srbs, PartitionStyle::Contiguous)
    }

    /// Validates equal cardinality and per-BS coverage.
    pub fn from_blocks(subchannels: usize, blocks: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let srbs = blocks.first().map_or(0, Vec::len);
        if srbs == 0 {
            return Err(Error::Config("partition needs at least one SRB".into()));
        }
        let size = subchannels / srbs;
        let mut group = Vec::with_capacity(blocks.len());
        for (n, bs) in blocks.iter().enumerate() {
            if bs.len() != srbs {
                return Err(Error::Config(format!("BS {n} has {} SRBs, expected {srbs}", bs.len())));
            }
            let mut owner = vec![usize::MAX; subchannels];
            for (m, block) in bs.iter().enumerate() {
                if block.len() != size {
                    return Err(Error::Config(format!(
                        "SRB ({n}, {m}) has {} subchannels, expected {size}",
                        block.len()
                    )));
                }
                for &f in block {
                    if f >= subchannels || owner[f] != usize::MAX {
                        return Err(Error::Config(format!(
                            "subchannel {f} of BS {n} is out of range or assigned twice"
                        )));
                    }
                    owner[f] = m;
                }
            }
            group.push(owner);
        }
        Ok(Self {
            subchannels,
            srbs,
            blocks,
            group,
        })
    }

    pub fn block(&self, n: usize, m: usize) -> &[usize] {
        &self.blocks[n][m]
    }

    pub fn group_of(&self, n: usize, f: usize) -> usize {
        self.group[n][f]
    }

    pub fn srbs(&self) -> usize {
        self.srbs
    }

    pub fn subchannels(&self) -> usize {
        self.subchannels
    }

    pub fn srb_size(&self) -> usize {
        self.subchannels / self.srbs
    }

    pub fn n_bs(&self) -> usize {
        self.blocks.len()
    }

    /// True when SRB `m` occupies the same frequencies at every BS.
    pub fn is_frequency_aligned(&self) -> bool {
        let mut sorted: Vec<Vec<Vec<usize>>> = self.blocks.clone();
        for bs in &mut sorted {
            for b in bs.iter_mut() {
                b.sort_unstable();
            }
        }
        sorted.windows(2).all(|w| w[0] == w[1])
    }
}
