//! Set partitions of `[1..m]`: enumeration in restricted-growth-string order,
//! Möbius values against the one-block partition, and the row-layout
//! classifiers that drive cumulant vanishing.
//!
//! Partitions are kept in a canonical form (blocks sorted by minimum element,
//! elements sorted within a block), so equal partitions always serialize
//! identically. The text form is `1,6|2,3,4|5`.

use std::fmt;
use thiserror::Error;

/// Hard cap on the ground-set size. `𝔔(12)` has ~4.2M elements, which is the
/// practical ceiling for the full contraction sweeps built on top of this
/// module; larger requests are refused rather than attempted.
pub const MAX_GROUND_SET: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SetPartError {
    #[error("ground-set size {0} outside the supported range 1..={MAX_GROUND_SET}")]
    GroundSetBound(usize),
    #[error("blocks do not partition 1..={0}")]
    NotAPartition(usize),
    #[error("ragged rows: row {row} has length {len}, expected {expected}")]
    RaggedRows {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("indices must be positive")]
    NonPositiveIndex,
    #[error("partition covers {got} elements but the layout requires {expected}")]
    LayoutMismatch { got: usize, expected: usize },
    #[error("index {0} outside 1..={1}")]
    IndexRange(usize, usize),
    #[error("row layout sides must be positive")]
    EmptyLayout,
}

/// A partition of `[1..m]` into disjoint non-empty blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SetPartition {
    m: usize,
    blocks: Vec<Vec<usize>>,
    /// 0-based block index of each element `1..=m`.
    block_of: Vec<usize>,
}

impl SetPartition {
    pub fn new(m: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self, SetPartError> {
        let mut seen = vec![false; m];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(SetPartError::NotAPartition(m));
            }
            block.sort_unstable();
            for &e in block.iter() {
                if e == 0 || e > m || seen[e - 1] {
                    return Err(SetPartError::NotAPartition(m));
                }
                seen[e - 1] = true;
            }
        }
        if !seen.into_iter().all(|s| s) {
            return Err(SetPartError::NotAPartition(m));
        }
        blocks.sort_unstable_by_key(|b| b[0]);
        let mut block_of = vec![0; m];
        for (i, block) in blocks.iter().enumerate() {
            for &e in block {
                block_of[e - 1] = i;
            }
        }
        Ok(Self { m, blocks, block_of })
    }

    /// Rebuilds a partition from a restricted growth string (0-based block
    /// labels, first occurrences increasing).
    pub fn from_rgs(rgs: &[usize]) -> Self {
        let m = rgs.len();
        let blocks_n = rgs.iter().copied().max().map_or(0, |x| x + 1);
        let mut blocks = vec![Vec::new(); blocks_n];
        for (i, &b) in rgs.iter().enumerate() {
            blocks[b].push(i + 1);
        }
        Self {
            m,
            blocks,
            block_of: rgs.to_vec(),
        }
    }

    pub fn ground_set_size(&self) -> usize {
        self.m
    }

    /// ℓ(π), the number of blocks.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    /// 0-based index (in canonical block order) of the block containing the
    /// 1-based element `e`.
    pub fn block_index_of(&self, e: usize) -> usize {
        self.block_of[e - 1]
    }

    pub fn is_singleton(&self, e: usize) -> bool {
        self.blocks[self.block_of[e - 1]].len() == 1
    }

    /// Möbius value μ(π, 1̂) = (−1)^{ℓ−1} (ℓ−1)! in the partition lattice.
    pub fn moebius_to_top(&self) -> i64 {
        let l = self.block_count() as i64;
        let mut fact = 1i64;
        for i in 1..l {
            fact *= i;
        }
        if (l - 1) % 2 == 0 {
            fact
        } else {
            -fact
        }
    }
}

impl fmt::Display for SetPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, block) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, "|")?;
            }
            for (j, e) in block.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", e)?;
            }
        }
        Ok(())
    }
}

/// Streams every partition of `[1..m]` exactly once, in lexicographic
/// restricted-growth-string order. The count is the Bell number B(m).
pub fn enumerate_partitions(m: usize) -> Result<Partitions, SetPartError> {
    if m == 0 || m > MAX_GROUND_SET {
        return Err(SetPartError::GroundSetBound(m));
    }
    Ok(Partitions {
        rgs: vec![0; m],
        max: (0..m).map(|i| usize::from(i > 0)).collect(),
        done: false,
    })
}

pub struct Partitions {
    rgs: Vec<usize>,
    /// `max[i]` = largest label allowed at position i, i.e. 1 + max of the
    /// prefix labels.
    max: Vec<usize>,
    done: bool,
}

impl Iterator for Partitions {
    type Item = SetPartition;

    fn next(&mut self) -> Option<SetPartition> {
        if self.done {
            return None;
        }
        let out = SetPartition::from_rgs(&self.rgs);
        // advance to the lexicographic successor
        let m = self.rgs.len();
        let mut i = m;
        loop {
            if i <= 1 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.rgs[i] < self.max[i] {
                self.rgs[i] += 1;
                for j in i + 1..m {
                    self.rgs[j] = 0;
                    self.max[j] = self.max[j - 1].max(self.rgs[j - 1] + 1);
                }
                break;
            }
        }
        Some(out)
    }
}

/// Bell numbers via the Bell triangle; `bell(12) = 4_213_597` fits easily.
pub fn bell(m: usize) -> u64 {
    let mut row = vec![1u64];
    for _ in 1..m {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(*row.last().unwrap());
        for &x in &row {
            let last = *next.last().unwrap();
            next.push(last + x);
        }
        row = next;
    }
    *row.last().unwrap()
}

/// Identification of the `r` rows of length `p` with `[1..p·r]`, preserving
/// lexicographic order: row `k`, column `l` sits at position `(k−1)p + l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLayout {
    pub p: usize,
    pub r: usize,
}

impl RowLayout {
    pub fn new(p: usize, r: usize) -> Result<Self, SetPartError> {
        if p == 0 || r == 0 {
            return Err(SetPartError::EmptyLayout);
        }
        Ok(Self { p, r })
    }

    pub fn total(&self) -> usize {
        self.p * self.r
    }

    /// 1-based row of the 1-based position.
    pub fn row_of(&self, pos: usize) -> usize {
        (pos - 1) / self.p + 1
    }

    /// The 1-based positions of row `k`.
    pub fn row_positions(&self, k: usize) -> std::ops::RangeInclusive<usize> {
        ((k - 1) * self.p + 1)..=(k * self.p)
    }

    fn check(&self, pi: &SetPartition) -> Result<(), SetPartError> {
        if pi.ground_set_size() != self.total() {
            return Err(SetPartError::LayoutMismatch {
                got: pi.ground_set_size(),
                expected: self.total(),
            });
        }
        Ok(())
    }
}

/// The partition of `[1..p·r]` induced by index equality across `r` rows of
/// `p` indices each: positions share a block iff the index values coincide.
pub fn partition_of_tuple(rows: &[Vec<usize>]) -> Result<SetPartition, SetPartError> {
    let p = rows.first().map(Vec::len).unwrap_or(0);
    if p == 0 {
        return Err(SetPartError::EmptyLayout);
    }
    for (k, row) in rows.iter().enumerate() {
        if row.len() != p {
            return Err(SetPartError::RaggedRows {
                row: k + 1,
                len: row.len(),
                expected: p,
            });
        }
    }
    let mut first_pos: Vec<(usize, usize)> = Vec::new(); // (value, block label)
    let mut rgs = Vec::with_capacity(p * rows.len());
    let mut next = 0usize;
    for row in rows {
        for &v in row {
            if v == 0 {
                return Err(SetPartError::NonPositiveIndex);
            }
            match first_pos.iter().find(|(val, _)| *val == v) {
                Some(&(_, b)) => rgs.push(b),
                None => {
                    first_pos.push((v, next));
                    rgs.push(next);
                    next += 1;
                }
            }
        }
    }
    Ok(SetPartition::from_rgs(&rgs))
}

/// Connectivity of the row graph H_π: rows are vertices, and two rows are
/// adjacent when some block of π meets both. A disconnected row graph forces
/// κ(π, φ) = 0 for every φ, because the two groups of rows are independent.
pub fn row_graph_connected(pi: &SetPartition, layout: RowLayout) -> Result<bool, SetPartError> {
    layout.check(pi)?;
    if layout.r == 1 {
        return Ok(true);
    }
    let mut parent: Vec<usize> = (0..layout.r).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for block in pi.blocks() {
        let base = layout.row_of(block[0]) - 1;
        for &e in &block[1..] {
            let row = layout.row_of(e) - 1;
            let (a, b) = (find(&mut parent, base), find(&mut parent, row));
            parent[a] = b;
        }
    }
    let root = find(&mut parent, 0);
    Ok((1..layout.r).all(|k| find(&mut parent, k) == root))
}

/// True iff some row has at least `p − 1` of its positions as singleton
/// blocks of π. On a compact homogeneous space, such a partition has
/// κ(π, φ) = 0 for every φ: the row's single shared index can be decoupled
/// by transitivity of the isometry group.
pub fn is_homogeneously_vanishing(
    pi: &SetPartition,
    layout: RowLayout,
) -> Result<bool, SetPartError> {
    layout.check(pi)?;
    for k in 1..=layout.r {
        let singles = layout
            .row_positions(k)
            .filter(|&pos| pi.is_singleton(pos))
            .count();
        if singles + 1 >= layout.p {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The named two- and three-row partitions entering the limiting variance
/// and third cumulant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoRowPattern {
    /// `π_{k,l}`: the pair `{k, l+p}` in `[1..2p]`, all else singletons.
    Pair { k: usize, l: usize },
    /// `π_{i,j,k,l}`: pairs `{i, j+p}` and `{k+p, l+2p}` in `[1..3p]`, merged
    /// into the triple `{i, j+p, l+2p}` when `j = k`.
    Chain {
        i: usize,
        j: usize,
        k: usize,
        l: usize,
    },
}

pub fn canonical_two_row_partition(
    kind: TwoRowPattern,
    p: usize,
) -> Result<SetPartition, SetPartError> {
    let check = |idx: usize| {
        if idx == 0 || idx > p {
            Err(SetPartError::IndexRange(idx, p))
        } else {
            Ok(())
        }
    };
    match kind {
        TwoRowPattern::Pair { k, l } => {
            check(k)?;
            check(l)?;
            let mut blocks = vec![vec![k, l + p]];
            blocks.extend((1..=2 * p).filter(|&t| t != k && t != l + p).map(|t| vec![t]));
            SetPartition::new(2 * p, blocks)
        }
        TwoRowPattern::Chain { i, j, k, l } => {
            for idx in [i, j, k, l] {
                check(idx)?;
            }
            let joined: Vec<Vec<usize>> = if j == k {
                vec![vec![i, j + p, l + 2 * p]]
            } else {
                vec![vec![i, j + p], vec![k + p, l + 2 * p]]
            };
            let used: Vec<usize> = joined.iter().flatten().copied().collect();
            let mut blocks = joined;
            blocks.extend((1..=3 * p).filter(|t| !used.contains(t)).map(|t| vec![t]));
            SetPartition::new(3 * p, blocks)
        }
    }
}
