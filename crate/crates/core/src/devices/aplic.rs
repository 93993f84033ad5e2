//! Advanced PLIC: wired sources either delivered directly (PLIC-like
//! claim/complete through per-hart delivery controls) or forwarded as MSIs
//! into IMSIC files.

use serde::{Deserialize, Serialize};

use super::imsic::FileLevel;
use super::plic::PlicState;
use crate::HartId;

pub const SOURCECFG_BASE: u64 = 0x0004;
pub const SETIENUM: u64 = 0x1edc;
pub const CLRIENUM: u64 = 0x1fdc;
pub const TARGET_BASE: u64 = 0x3004;
pub const IDC_BASE: u64 = 0x4000;
pub const IDC_STRIDE: u64 = 32;
pub const IDC_ITHRESHOLD: u64 = 0x08;
pub const IDC_CLAIMI: u64 = 0x1c;
pub const APLIC_SIZE: u64 = 0x8000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AplicMode {
    Direct,
    Msi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceTarget {
    Unconfigured,
    Direct { hart: HartId, priority: u32 },
    Msi { hart: HartId, file: FileLevel, identity: u32 },
}

impl SourceTarget {
    /// Target register image: hart index in bits 31:18; direct mode keeps
    /// the priority in 7:0, MSI mode the file selector in 13:12 (0 S,
    /// 1 VS, 2 M) and the identity in 10:0.
    pub fn encode(self) -> u64 {
        match self {
            SourceTarget::Unconfigured => 0,
            SourceTarget::Direct { hart, priority } => ((hart as u64) << 18) | (priority as u64 & 0xff),
            SourceTarget::Msi { hart, file, identity } => {
                let sel = match file {
                    FileLevel::S => 0,
                    FileLevel::VS => 1,
                    FileLevel::M => 2,
                };
                ((hart as u64) << 18) | (sel << 12) | (identity as u64 & 0x7ff)
            }
        }
    }

    pub fn decode(mode: AplicMode, raw: u64) -> Option<Self> {
        let hart = (raw >> 18) as HartId;
        Some(match mode {
            AplicMode::Direct => SourceTarget::Direct {
                hart,
                priority: (raw & 0xff) as u32,
            },
            AplicMode::Msi => SourceTarget::Msi {
                hart,
                file: match (raw >> 12) & 0x3 {
                    0 => FileLevel::S,
                    1 => FileLevel::VS,
                    2 => FileLevel::M,
                    _ => return None,
                },
                identity: (raw & 0x7ff) as u32,
            },
        })
    }
}

/// Effect of routing one wired assertion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Routed {
    /// Pending in the direct-delivery claim state of a hart.
    Direct(HartId),
    Msi { hart: HartId, file: FileLevel, identity: u32 },
    Unconfigured,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AplicState {
    pub mode: AplicMode,
    pub targets: Vec<SourceTarget>,
    pub sourcecfg: Vec<u32>,
    pub enabled: u64,
    /// Direct-mode delivery: one context per hart.
    pub direct: PlicState,
    pub msi_forwards: u64,
    pub unconfigured_hits: u64,
}

impl AplicState {
    pub fn new(mode: AplicMode, sources: u32, harts: usize) -> Self {
        Self {
            mode,
            targets: vec![SourceTarget::Unconfigured; sources as usize],
            sourcecfg: vec![0; sources as usize],
            enabled: 0,
            direct: PlicState::new(sources, harts),
            msi_forwards: 0,
            unconfigured_hits: 0,
        }
    }

    pub fn configure(&mut self, source: u32, target: SourceTarget) {
        if source == 0 || source as usize >= self.targets.len() {
            return;
        }
        self.targets[source as usize] = target;
        self.enabled |= 1 << source;
        if let SourceTarget::Direct { hart, priority } = target {
            self.direct.priority[source as usize] = priority;
            for (h, en) in self.direct.enable.iter_mut().enumerate() {
                if h == hart {
                    *en |= 1 << source;
                } else {
                    *en &= !(1 << source);
                }
            }
        }
    }

    /// Decides where an assertion goes. The caller performs the MSI write.
    pub fn route(&mut self, source: u32) -> Routed {
        let idx = source as usize;
        if source == 0 || idx >= self.targets.len() || self.enabled & (1 << source) == 0 {
            self.unconfigured_hits += 1;
            return Routed::Unconfigured;
        }
        match (self.mode, self.targets[idx]) {
            (AplicMode::Msi, SourceTarget::Msi { hart, file, identity }) => {
                self.msi_forwards += 1;
                Routed::Msi { hart, file, identity }
            }
            (AplicMode::Direct, SourceTarget::Direct { hart, .. }) => {
                self.direct.assert(source);
                Routed::Direct(hart)
            }
            _ => {
                self.unconfigured_hits += 1;
                Routed::Unconfigured
            }
        }
    }

    pub fn read(&mut self, offset: u64) -> Option<u64> {
        let n = self.targets.len() as u64;
        match offset {
            o if (SOURCECFG_BASE..SOURCECFG_BASE + 4 * (n - 1)).contains(&o) && o % 4 == 0 => {
                Some(self.sourcecfg[((o - SOURCECFG_BASE) / 4 + 1) as usize] as u64)
            }
            o if (TARGET_BASE..TARGET_BASE + 4 * (n - 1)).contains(&o) && o % 4 == 0 => {
                Some(self.targets[((o - TARGET_BASE) / 4 + 1) as usize].encode())
            }
            o if o >= IDC_BASE => {
                let (hart, reg) = self.idc(o)?;
                match reg {
                    IDC_ITHRESHOLD => Some(self.direct.threshold[hart] as u64),
                    IDC_CLAIMI => Some(self.direct.claim(hart) as u64),
                    _ => None,
                }
            }
            _ => None,
        }
    }

    pub fn write(&mut self, offset: u64, value: u64) -> Option<()> {
        let n = self.targets.len() as u64;
        match offset {
            o if (SOURCECFG_BASE..SOURCECFG_BASE + 4 * (n - 1)).contains(&o) && o % 4 == 0 => {
                self.sourcecfg[((o - SOURCECFG_BASE) / 4 + 1) as usize] = value as u32;
                Some(())
            }
            o if (TARGET_BASE..TARGET_BASE + 4 * (n - 1)).contains(&o) && o % 4 == 0 => {
                let src = ((o - TARGET_BASE) / 4 + 1) as u32;
                let t = SourceTarget::decode(self.mode, value)?;
                if t_hart(t) >= self.direct.contexts() {
                    return None;
                }
                self.configure(src, t);
                Some(())
            }
            SETIENUM | CLRIENUM => {
                let s = value as u32;
                if s == 0 || s as usize >= self.targets.len() {
                    return Some(());
                }
                if offset == SETIENUM {
                    self.enabled |= 1 << s;
                } else {
                    self.enabled &= !(1 << s);
                }
                Some(())
            }
            o if o >= IDC_BASE => {
                let (hart, reg) = self.idc(o)?;
                match reg {
                    IDC_ITHRESHOLD => self.direct.threshold[hart] = value as u32,
                    // Completion is modelled PLIC-style: write the claimed id back.
                    IDC_CLAIMI => {
                        self.direct.complete(hart, value as u32);
                    }
                    _ => return None,
                }
                Some(())
            }
            _ => None,
        }
    }

    fn idc(&self, offset: u64) -> Option<(HartId, u64)> {
        let rel = offset - IDC_BASE;
        let hart = (rel / IDC_STRIDE) as usize;
        (hart < self.direct.contexts()).then_some((hart, rel % IDC_STRIDE))
    }

    pub fn claim_offset(hart: HartId) -> u64 {
        IDC_BASE + IDC_STRIDE * hart as u64 + IDC_CLAIMI
    }

    pub fn target_offset(source: u32) -> u64 {
        TARGET_BASE + 4 * (source as u64 - 1)
    }
}

fn t_hart(t: SourceTarget) -> HartId {
    match t {
        SourceTarget::Unconfigured => 0,
        SourceTarget::Direct { hart, .. } | SourceTarget::Msi { hart, .. } => hart,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msi_mode_routes_to_configured_file() {
        let mut a = AplicState::new(AplicMode::Msi, 32, 4);
        a.configure(12, SourceTarget::Msi { hart: 3, file: FileLevel::VS, identity: 12 });
        assert_eq!(a.route(12), Routed::Msi { hart: 3, file: FileLevel::VS, identity: 12 });
        assert_eq!(a.direct.pending, 0);
    }

    #[test]
    fn direct_mode_pends_like_plic() {
        let mut a = AplicState::new(AplicMode::Direct, 32, 4);
        a.configure(12, SourceTarget::Direct { hart: 2, priority: 1 });
        assert_eq!(a.route(12), Routed::Direct(2));
        assert_eq!(a.direct.claimable(2), Some(12));
        assert_eq!(a.direct.claimable(1), None);
        assert_eq!(a.read(AplicState::claim_offset(2)), Some(12));
        a.write(AplicState::claim_offset(2), 12).unwrap();
        assert!(a.direct.violations.is_empty());
        assert_eq!(a.direct.stats[12].completions, 1);
    }

    #[test]
    fn unconfigured_source_is_reported() {
        let mut a = AplicState::new(AplicMode::Msi, 32, 4);
        assert_eq!(a.route(7), Routed::Unconfigured);
        assert_eq!(a.unconfigured_hits, 1);
    }

    #[test]
    fn target_register_round_trip() {
        let mut a = AplicState::new(AplicMode::Msi, 32, 4);
        let t = SourceTarget::Msi { hart: 1, file: FileLevel::M, identity: 40 };
        a.write(AplicState::target_offset(5), t.encode()).unwrap();
        assert_eq!(a.targets[5], t);
        assert_eq!(a.read(AplicState::target_offset(5)), Some(t.encode()));
    }
}
