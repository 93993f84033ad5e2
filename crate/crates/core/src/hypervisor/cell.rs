//! Cells: static partitions with exclusive harts, memory, and interrupt
//! sources.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{CellId, HartId};

/// Normalized set of half-open address ranges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeSet {
    ranges: Vec<(u64, u64)>,
}

impl RangeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_range(base: u64, len: u64) -> Self {
        let mut s = Self::new();
        s.insert(base, len);
        s
    }

    pub fn ranges(&self) -> &[(u64, u64)] {
        &self.ranges
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn insert(&mut self, base: u64, len: u64) {
        if len == 0 {
            return;
        }
        let (mut lo, mut hi) = (base, base + len);
        let mut out = Vec::with_capacity(self.ranges.len() + 1);
        for &(a, b) in &self.ranges {
            if b < lo || a > hi {
                out.push((a, b));
            } else {
                lo = lo.min(a);
                hi = hi.max(b);
            }
        }
        out.push((lo, hi));
        out.sort_unstable();
        self.ranges = out;
    }

    pub fn remove(&mut self, base: u64, len: u64) {
        let (lo, hi) = (base, base + len);
        let mut out = Vec::with_capacity(self.ranges.len() + 1);
        for &(a, b) in &self.ranges {
            if b <= lo || a >= hi {
                out.push((a, b));
                continue;
            }
            if a < lo {
                out.push((a, lo));
            }
            if b > hi {
                out.push((hi, b));
            }
        }
        self.ranges = out;
    }

    pub fn contains_range(&self, base: u64, len: u64) -> bool {
        self.ranges
            .iter()
            .any(|&(a, b)| a <= base && base + len <= b)
    }

    pub fn overlaps(&self, base: u64, len: u64) -> bool {
        self.ranges
            .iter()
            .any(|&(a, b)| base < b && a < base + len)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemRegion {
    pub base: u64,
    pub len: u64,
}

/// Requested resources of a non-root cell.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub name: String,
    pub harts: Vec<HartId>,
    #[serde(default)]
    pub memory: Vec<MemRegion>,
    #[serde(default)]
    pub irq_sources: Vec<u32>,
    /// Page shared with the root cell for communication.
    #[serde(default)]
    pub comm_page: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Created,
    Running,
    Stopped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub name: String,
    pub harts: BTreeSet<HartId>,
    pub memory: RangeSet,
    pub irq_sources: BTreeSet<u32>,
    pub comm_page: Option<u64>,
    pub state: CellState,
}

impl Cell {
    pub fn owns_hart(&self, h: HartId) -> bool {
        self.harts.contains(&h)
    }

    pub fn owns_source(&self, s: u32) -> bool {
        self.irq_sources.contains(&s)
    }

    /// Bitmask of owned sources.
    pub fn source_mask(&self) -> u64 {
        self.irq_sources
            .iter()
            .filter(|&&s| s < 64)
            .fold(0, |m, &s| m | (1 << s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_merges_and_remove_splits() {
        let mut r = RangeSet::from_range(0, 100);
        r.insert(100, 50);
        assert_eq!(r.ranges(), &[(0, 150)]);
        r.remove(40, 20);
        assert_eq!(r.ranges(), &[(0, 40), (60, 150)]);
        assert!(r.contains_range(60, 90));
        assert!(!r.contains_range(30, 20));
        assert!(r.overlaps(30, 20));
        r.insert(40, 20);
        assert_eq!(r.ranges(), &[(0, 150)]);
    }
}
