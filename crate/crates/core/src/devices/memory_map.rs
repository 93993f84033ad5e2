//! Page-granular device memory map with ownership metadata.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::CellId;

pub const PAGE_SIZE: u64 = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeviceId {
    Clint,
    Plic,
    Aplic,
    ImsicM,
    ImsicS,
    Sswi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PageOwner {
    /// Exclusively mapped into one cell's G-stage.
    Cell(CellId),
    /// Holds registers of contexts that belong to more than one cell.
    Shared,
    Hypervisor,
    /// Firmware-only (PMP protected).
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub base: u64,
    pub len: u64,
    pub device: DeviceId,
    pub owner: PageOwner,
}

impl Region {
    pub fn end(&self) -> u64 {
        self.base + self.len
    }

    pub fn contains(&self, addr: u64) -> bool {
        addr >= self.base && addr < self.end()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("region {base:#x}+{len:#x} is not page aligned")]
    Unaligned { base: u64, len: u64 },
    #[error("region {base:#x}+{len:#x} overlaps an existing region")]
    Overlap { base: u64, len: u64 },
    #[error("no region starts at {0:#x}")]
    NoRegion(u64),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryMap {
    regions: Vec<Region>,
}

impl MemoryMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: Region) -> Result<(), MapError> {
        let Region { base, len, .. } = region;
        if base % PAGE_SIZE != 0 || len % PAGE_SIZE != 0 || len == 0 {
            return Err(MapError::Unaligned { base, len });
        }
        if self
            .regions
            .iter()
            .any(|r| base < r.end() && r.base < base + len)
        {
            return Err(MapError::Overlap { base, len });
        }
        let at = self.regions.partition_point(|r| r.base < base);
        self.regions.insert(at, region);
        Ok(())
    }

    pub fn lookup(&self, addr: u64) -> Option<&Region> {
        let idx = self.regions.partition_point(|r| r.base <= addr);
        idx.checked_sub(1)
            .map(|i| &self.regions[i])
            .filter(|r| r.contains(addr))
    }

    pub fn set_owner(&mut self, base: u64, owner: PageOwner) -> Result<PageOwner, MapError> {
        let r = self
            .regions
            .iter_mut()
            .find(|r| r.base == base)
            .ok_or(MapError::NoRegion(base))?;
        Ok(std::mem::replace(&mut r.owner, owner))
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn region(base: u64, len: u64) -> Region {
        Region {
            base,
            len,
            device: DeviceId::Plic,
            owner: PageOwner::Shared,
        }
    }

    #[test]
    fn rejects_overlap_and_misalignment() {
        let mut m = MemoryMap::new();
        m.insert(region(0x1000, 0x2000)).unwrap();
        assert!(matches!(m.insert(region(0x2000, 0x1000)), Err(MapError::Overlap { .. })));
        assert!(matches!(m.insert(region(0x3001, 0x1000)), Err(MapError::Unaligned { .. })));
        m.insert(region(0x3000, 0x1000)).unwrap();
        m.insert(region(0x0, 0x1000)).unwrap();
        let bases: Vec<u64> = m.regions().iter().map(|r| r.base).collect();
        assert_eq!(bases, [0x0, 0x1000, 0x3000]);
    }

    #[test]
    fn lookup_finds_containing_region() {
        let mut m = MemoryMap::new();
        m.insert(region(0x1000, 0x2000)).unwrap();
        assert_eq!(m.lookup(0x2ffc).unwrap().base, 0x1000);
        assert!(m.lookup(0x3000).is_none());
        assert!(m.lookup(0x0fff).is_none());
    }

    #[test]
    fn owner_reassignment() {
        let mut m = MemoryMap::new();
        m.insert(region(0x1000, 0x1000)).unwrap();
        let old = m.set_owner(0x1000, PageOwner::Cell(3)).unwrap();
        assert_eq!(old, PageOwner::Shared);
        assert_eq!(m.lookup(0x1004).unwrap().owner, PageOwner::Cell(3));
        assert_eq!(m.set_owner(0x5000, PageOwner::Shared), Err(MapError::NoRegion(0x5000)));
    }
}
