//! Incoming MSI controller: one interrupt file per hart and level.

use serde::{Deserialize, Serialize};

use crate::HartId;

/// Offset of `seteipnum_le` inside a file page.
pub const SETEIPNUM_LE: u64 = 0x0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FileLevel {
    M,
    S,
    VS,
}

impl FileLevel {
    fn index(self) -> usize {
        match self {
            FileLevel::M => 0,
            FileLevel::S => 1,
            FileLevel::VS => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterruptFile {
    pub eip: u64,
    pub eie: u64,
}

impl InterruptFile {
    pub fn top(&self) -> Option<u32> {
        let ready = self.eip & self.eie;
        (ready != 0).then(|| ready.trailing_zeros())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImsicStats {
    pub msi_writes: u64,
    pub eip_sets: u64,
    pub claims: u64,
    pub ignored: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImsicState {
    pub identities: u32,
    pub files: Vec<[InterruptFile; 3]>,
    pub stats: ImsicStats,
}

impl ImsicState {
    pub fn new(harts: usize, identities: u32) -> Self {
        assert!(identities <= 64, "at most 64 identities");
        Self {
            identities,
            files: vec![[InterruptFile::default(); 3]; harts],
            stats: ImsicStats::default(),
        }
    }

    pub fn file(&self, hart: HartId, level: FileLevel) -> &InterruptFile {
        &self.files[hart][level.index()]
    }

    pub fn file_mut(&mut self, hart: HartId, level: FileLevel) -> &mut InterruptFile {
        &mut self.files[hart][level.index()]
    }

    /// Sets exactly `eip[identity]`. Identity 0 and out-of-range identities
    /// are ignored.
    pub fn msi_write(&mut self, hart: HartId, level: FileLevel, identity: u32) -> bool {
        if identity == 0 || identity >= self.identities {
            self.stats.ignored += 1;
            return false;
        }
        self.stats.msi_writes += 1;
        let f = self.file_mut(hart, level);
        f.eip |= 1 << identity;
        self.stats.eip_sets += 1;
        true
    }

    pub fn set_enabled(&mut self, hart: HartId, level: FileLevel, identity: u32, on: bool) {
        if identity == 0 || identity >= self.identities {
            return;
        }
        let f = self.file_mut(hart, level);
        if on {
            f.eie |= 1 << identity;
        } else {
            f.eie &= !(1 << identity);
        }
    }

    pub fn line(&self, hart: HartId, level: FileLevel) -> bool {
        self.file(hart, level).top().is_some()
    }

    /// Claims the lowest enabled pending identity (`*topei` read-and-clear).
    pub fn claim(&mut self, hart: HartId, level: FileLevel) -> Option<u32> {
        let f = self.file_mut(hart, level);
        let id = f.top()?;
        f.eip &= !(1 << id);
        self.stats.claims += 1;
        Some(id)
    }
}
