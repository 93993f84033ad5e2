//! Register-level interrupt controllers behind a page-granular memory map.

pub mod aplic;
pub mod clint;
pub mod imsic;
pub mod memory_map;
pub mod plic;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;
use crate::machine::PrivilegeMode;
use crate::{CellId, HartId};

pub use aplic::{AplicMode, AplicState, Routed, SourceTarget};
pub use clint::ClintState;
pub use imsic::{FileLevel, ImsicState};
pub use memory_map::{DeviceId, MemoryMap, PageOwner, Region, PAGE_SIZE};
pub use plic::{PlicLayout, PlicReg, PlicState};

/// Which interrupt architecture the platform implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrqChip {
    /// PLIC for wired interrupts, CLINT for timer and software interrupts.
    PlicClint,
    /// APLIC in direct mode plus ACLINT (MTIMER, MSWI, SSWI).
    AiaDirect,
    /// APLIC forwarding MSIs into per-hart IMSICs; IPIs as MSIs.
    AiaMsi,
}

impl IrqChip {
    pub const ALL: [IrqChip; 3] = [IrqChip::PlicClint, IrqChip::AiaDirect, IrqChip::AiaMsi];

    pub fn as_str(self) -> &'static str {
        match self {
            IrqChip::PlicClint => "plic_clint",
            IrqChip::AiaDirect => "aia_direct",
            IrqChip::AiaMsi => "aia_msi",
        }
    }
}

impl fmt::Display for IrqChip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for IrqChip {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "plic_clint" => Ok(IrqChip::PlicClint),
            "aia_direct" => Ok(IrqChip::AiaDirect),
            "aia_msi" => Ok(IrqChip::AiaMsi),
            _ => Err(format!("unknown irqchip '{s}'")),
        }
    }
}

/// Base addresses and sizes; part of the machine description.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeviceLayout {
    pub clint_base: u64,
    pub plic_base: u64,
    pub plic_size: u64,
    pub plic: PlicLayout,
    pub aplic_base: u64,
    pub imsic_m_base: u64,
    /// S-level IMSIC area: per hart an S-file page followed by a VS-file page.
    pub imsic_s_base: u64,
    pub sswi_base: u64,
    pub sources: u32,
    pub identities: u32,
}

impl Default for DeviceLayout {
    fn default() -> Self {
        Self {
            clint_base: 0x0200_0000,
            plic_base: 0x0c00_0000,
            plic_size: 0x0400_0000,
            plic: PlicLayout::default(),
            aplic_base: 0x0d00_0000,
            imsic_m_base: 0x2400_0000,
            imsic_s_base: 0x2800_0000,
            sswi_base: 0x0210_0000,
            sources: 32,
            identities: 64,
        }
    }
}

impl DeviceLayout {
    pub fn imsic_file_addr(&self, hart: HartId, level: FileLevel) -> u64 {
        match level {
            FileLevel::M => self.imsic_m_base + PAGE_SIZE * hart as u64,
            FileLevel::S => self.imsic_s_base + 2 * PAGE_SIZE * hart as u64,
            FileLevel::VS => self.imsic_s_base + 2 * PAGE_SIZE * hart as u64 + PAGE_SIZE,
        }
    }

    pub fn plic_reg_addr(&self, reg: PlicReg) -> u64 {
        self.plic_base + self.plic.offset(reg)
    }

    pub fn sswi_addr(&self, hart: HartId) -> u64 {
        self.sswi_base + 4 * hart as u64
    }

    /// Register a guest reads to claim (and writes to complete) on the
    /// wired-interrupt controller.
    pub fn claim_addr(&self, chip: IrqChip, hart: HartId) -> Option<u64> {
        match chip {
            IrqChip::PlicClint => Some(self.plic_reg_addr(PlicReg::Claim(plic::s_context(hart)))),
            IrqChip::AiaDirect => Some(self.aplic_base + AplicState::claim_offset(hart)),
            IrqChip::AiaMsi => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Initiator {
    pub hart: HartId,
    pub mode: PrivilegeMode,
    pub cell: Option<CellId>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MmioOp {
    Read,
    Write(u64),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MmioOutcome {
    Value(u64),
    /// Stage-2 fault: the hypervisor must emulate or deny.
    GuestFault,
    Denied(String),
}

/// Side effects on hart state that the platform applies after an access.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeviceEffect {
    /// ACLINT SSWI doorbell: S-level software interrupt on `hart`.
    SupervisorSoft(HartId),
}

/// Single-page-per-register-block SSWI: one `setssip` word per hart.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SswiState {
    pub harts: usize,
    pub doorbells: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Devices {
    pub chip: IrqChip,
    pub layout: DeviceLayout,
    pub map: MemoryMap,
    pub clint: ClintState,
    pub plic: Option<PlicState>,
    pub aplic: Option<AplicState>,
    pub imsic: Option<ImsicState>,
    pub sswi: Option<SswiState>,
    pub effects: Vec<DeviceEffect>,
    pub diagnostics: Vec<String>,
}

impl Devices {
    pub fn new(chip: IrqChip, layout: DeviceLayout, harts: usize) -> Result<Self, memory_map::MapError> {
        let mut map = MemoryMap::new();
        map.insert(Region {
            base: layout.clint_base,
            len: clint::CLINT_SIZE,
            device: DeviceId::Clint,
            owner: PageOwner::Machine,
        })?;
        let (mut plic, mut aplic, mut imsic, mut sswi) = (None, None, None, None);
        match chip {
            IrqChip::PlicClint => {
                // Enable words of many contexts share pages; claim pages are
                // treated as shared too since the real layout is unknown.
                map.insert(Region {
                    base: layout.plic_base,
                    len: layout.plic_size,
                    device: DeviceId::Plic,
                    owner: PageOwner::Shared,
                })?;
                plic = Some(PlicState::new(layout.sources, 2 * harts));
            }
            IrqChip::AiaDirect | IrqChip::AiaMsi => {
                map.insert(Region {
                    base: layout.aplic_base,
                    len: aplic::APLIC_SIZE,
                    device: DeviceId::Aplic,
                    owner: PageOwner::Shared,
                })?;
                map.insert(Region {
                    base: layout.sswi_base,
                    len: PAGE_SIZE,
                    device: DeviceId::Sswi,
                    owner: PageOwner::Hypervisor,
                })?;
                sswi = Some(SswiState { harts, doorbells: 0 });
                let mode = if chip == IrqChip::AiaMsi {
                    AplicMode::Msi
                } else {
                    AplicMode::Direct
                };
                aplic = Some(AplicState::new(mode, layout.sources, harts));
                if chip == IrqChip::AiaMsi {
                    for h in 0..harts {
                        map.insert(Region {
                            base: layout.imsic_file_addr(h, FileLevel::M),
                            len: PAGE_SIZE,
                            device: DeviceId::ImsicM,
                            owner: PageOwner::Machine,
                        })?;
                        for level in [FileLevel::S, FileLevel::VS] {
                            map.insert(Region {
                                base: layout.imsic_file_addr(h, level),
                                len: PAGE_SIZE,
                                device: DeviceId::ImsicS,
                                owner: PageOwner::Hypervisor,
                            })?;
                        }
                    }
                    imsic = Some(ImsicState::new(harts, layout.identities));
                }
            }
        }
        Ok(Self {
            chip,
            layout,
            map,
            clint: ClintState::new(harts),
            plic,
            aplic,
            imsic,
            sswi,
            effects: Vec::new(),
            diagnostics: Vec::new(),
        })
    }

    pub fn set_mtime(&mut self, now: SimTime) {
        self.clint.mtime = now;
    }

    /// Access check plus device effect. VS-mode accesses reach a device only
    /// through pages exclusively owned by the accessor's cell.
    pub fn mmio_access(&mut self, who: Initiator, addr: u64, op: MmioOp) -> MmioOutcome {
        let Some(region) = self.map.lookup(addr).copied() else {
            return MmioOutcome::Denied(format!("unmapped address {addr:#x}"));
        };
        match who.mode {
            PrivilegeMode::VS => match (region.owner, who.cell) {
                (PageOwner::Cell(c), Some(mine)) if c == mine => {}
                _ => return MmioOutcome::GuestFault,
            },
            PrivilegeMode::SBare if region.owner == PageOwner::Machine => {
                return MmioOutcome::Denied(format!("{addr:#x} is machine-only"));
            }
            PrivilegeMode::HS if region.owner == PageOwner::Machine => {
                return MmioOutcome::Denied(format!("{addr:#x} is machine-only"));
            }
            PrivilegeMode::U => return MmioOutcome::Denied("user access to device".into()),
            _ => {}
        }
        match self.device_access(region, addr - region.base, op) {
            Some(v) => MmioOutcome::Value(v),
            None => MmioOutcome::Denied(format!("no register at {addr:#x}")),
        }
    }

    fn device_access(&mut self, region: Region, offset: u64, op: MmioOp) -> Option<u64> {
        match region.device {
            DeviceId::Clint => match op {
                MmioOp::Read => self.clint.read(offset),
                MmioOp::Write(v) => self.clint.write(offset, v).map(|_| 0),
            },
            DeviceId::Plic => {
                let plic = self.plic.as_mut()?;
                let reg = self.layout.plic.decode(offset, plic.sources, plic.contexts())?;
                match op {
                    MmioOp::Read => Some(plic.read(reg)),
                    MmioOp::Write(v) => {
                        plic.write(reg, v);
                        Some(0)
                    }
                }
            }
            DeviceId::Aplic => {
                let aplic = self.aplic.as_mut()?;
                match op {
                    MmioOp::Read => aplic.read(offset),
                    MmioOp::Write(v) => aplic.write(offset, v).map(|_| 0),
                }
            }
            DeviceId::ImsicM | DeviceId::ImsicS => {
                if offset != imsic::SETEIPNUM_LE {
                    return None;
                }
                let (hart, level) = self.imsic_file_at(region.base)?;
                match op {
                    MmioOp::Read => Some(0),
                    MmioOp::Write(v) => {
                        let imsic = self.imsic.as_mut()?;
                        if !imsic.msi_write(hart, level, v as u32) {
                            self.diagnostics
                                .push(format!("ignored MSI identity {v} to hart {hart} {level:?}"));
                        }
                        Some(0)
                    }
                }
            }
            DeviceId::Sswi => {
                let sswi = self.sswi.as_mut()?;
                let hart = (offset / 4) as usize;
                if !offset.is_multiple_of(4) || hart >= sswi.harts {
                    return None;
                }
                match op {
                    MmioOp::Read => Some(0),
                    MmioOp::Write(v) => {
                        if v & 1 != 0 {
                            sswi.doorbells += 1;
                            self.effects.push(DeviceEffect::SupervisorSoft(hart));
                        }
                        Some(0)
                    }
                }
            }
        }
    }

    pub fn imsic_file_at(&self, base: u64) -> Option<(HartId, FileLevel)> {
        let l = &self.layout;
        if base >= l.imsic_s_base {
            let rel = (base - l.imsic_s_base) / PAGE_SIZE;
            let level = if rel.is_multiple_of(2) { FileLevel::S } else { FileLevel::VS };
            Some(((rel / 2) as HartId, level))
        } else if base >= l.imsic_m_base {
            Some((((base - l.imsic_m_base) / PAGE_SIZE) as HartId, FileLevel::M))
        } else {
            None
        }
    }

    /// A wired source raises its line.
    pub fn assert_wire(&mut self, source: u32) -> bool {
        match self.chip {
            IrqChip::PlicClint => self.plic.as_mut().is_some_and(|p| p.assert(source)),
            IrqChip::AiaDirect | IrqChip::AiaMsi => self.aplic_route(source),
        }
    }

    /// APLIC delivery: MSI write into the target file, or direct pending.
    pub fn aplic_route(&mut self, source: u32) -> bool {
        let Some(aplic) = self.aplic.as_mut() else {
            return false;
        };
        match aplic.route(source) {
            Routed::Direct(_) => true,
            Routed::Msi { hart, file, identity } => {
                self.imsic.as_mut().is_some_and(|m| m.msi_write(hart, file, identity))
            }
            Routed::Unconfigured => {
                self.diagnostics.push(format!("APLIC source {source} not configured"));
                false
            }
        }
    }

    pub fn imsic_msi_write(&mut self, hart: HartId, file: FileLevel, identity: u32) -> bool {
        let ok = self
            .imsic
            .as_mut()
            .is_some_and(|m| m.msi_write(hart, file, identity));
        if !ok {
            self.diagnostics
                .push(format!("ignored MSI identity {identity} to hart {hart} {file:?}"));
        }
        ok
    }

    /// External-interrupt line levels seen by `hart`: (M, S, VS). VS is
    /// `None` when the hypervisor owns that bit.
    pub fn external_lines(&self, hart: HartId) -> (bool, bool, Option<bool>) {
        match self.chip {
            IrqChip::PlicClint => {
                let p = self.plic.as_ref().expect("plic present");
                (
                    p.claimable(plic::m_context(hart)).is_some(),
                    p.claimable(plic::s_context(hart)).is_some(),
                    None,
                )
            }
            IrqChip::AiaDirect => {
                let a = self.aplic.as_ref().expect("aplic present");
                (false, a.direct.claimable(hart).is_some(), None)
            }
            IrqChip::AiaMsi => {
                let m = self.imsic.as_ref().expect("imsic present");
                (
                    m.line(hart, FileLevel::M),
                    m.line(hart, FileLevel::S),
                    Some(m.line(hart, FileLevel::VS)),
                )
            }
        }
    }

    pub fn protocol_violations(&self) -> usize {
        self.plic.as_ref().map_or(0, |p| p.violations.len())
            + self.aplic.as_ref().map_or(0, |a| a.direct.violations.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vs(hart: HartId, cell: CellId) -> Initiator {
        Initiator { hart, mode: PrivilegeMode::VS, cell: Some(cell) }
    }

    fn bare(hart: HartId) -> Initiator {
        Initiator { hart, mode: PrivilegeMode::SBare, cell: None }
    }

    #[test]
    fn vs_plic_claim_faults() {
        let mut d = Devices::new(IrqChip::PlicClint, DeviceLayout::default(), 6).unwrap();
        let addr = d.layout.claim_addr(IrqChip::PlicClint, 4).unwrap();
        assert_eq!(d.mmio_access(vs(4, 1), addr, MmioOp::Read), MmioOutcome::GuestFault);
    }

    #[test]
    fn bare_plic_claim_reaches_device() {
        let mut d = Devices::new(IrqChip::PlicClint, DeviceLayout::default(), 6).unwrap();
        let p = d.plic.as_mut().unwrap();
        p.priority[12] = 1;
        p.enable[plic::s_context(4)] |= 1 << 12;
        d.assert_wire(12);
        let addr = d.layout.claim_addr(IrqChip::PlicClint, 4).unwrap();
        assert_eq!(d.mmio_access(bare(4), addr, MmioOp::Read), MmioOutcome::Value(12));
    }

    #[test]
    fn owned_vs_file_is_direct() {
        let mut d = Devices::new(IrqChip::AiaMsi, DeviceLayout::default(), 6).unwrap();
        let page = d.layout.imsic_file_addr(5, FileLevel::VS);
        d.map.set_owner(page, PageOwner::Cell(1)).unwrap();
        assert_eq!(d.mmio_access(vs(4, 1), page, MmioOp::Write(3)), MmioOutcome::Value(0));
        assert_eq!(d.imsic.as_ref().unwrap().file(5, FileLevel::VS).eip, 1 << 3);
        let foreign = d.layout.imsic_file_addr(0, FileLevel::VS);
        assert_eq!(d.mmio_access(vs(4, 1), foreign, MmioOp::Write(3)), MmioOutcome::GuestFault);
    }

    #[test]
    fn unmapped_access_denied() {
        let mut d = Devices::new(IrqChip::PlicClint, DeviceLayout::default(), 2).unwrap();
        assert!(matches!(d.mmio_access(bare(0), 0x10, MmioOp::Read), MmioOutcome::Denied(_)));
    }

    #[test]
    fn vs_sswi_faults_but_s_rings() {
        let mut d = Devices::new(IrqChip::AiaDirect, DeviceLayout::default(), 4).unwrap();
        let addr = d.layout.sswi_addr(2);
        assert_eq!(d.mmio_access(vs(1, 1), addr, MmioOp::Write(1)), MmioOutcome::GuestFault);
        assert_eq!(d.mmio_access(bare(1), addr, MmioOp::Write(1)), MmioOutcome::Value(0));
        assert_eq!(d.effects, vec![DeviceEffect::SupervisorSoft(2)]);
    }

    #[test]
    fn msi_mode_routes_to_m_file_only_m_line() {
        let mut d = Devices::new(IrqChip::AiaMsi, DeviceLayout::default(), 4).unwrap();
        d.aplic.as_mut().unwrap().configure(
            9,
            SourceTarget::Msi { hart: 0, file: FileLevel::M, identity: 9 },
        );
        d.imsic.as_mut().unwrap().set_enabled(0, FileLevel::M, 9, true);
        assert!(d.assert_wire(9));
        assert_eq!(d.external_lines(0), (true, false, Some(false)));
    }

    #[test]
    fn bare_s_cannot_touch_clint() {
        let mut d = Devices::new(IrqChip::PlicClint, DeviceLayout::default(), 2).unwrap();
        let addr = d.layout.clint_base;
        assert!(matches!(d.mmio_access(bare(0), addr, MmioOp::Write(1)), MmioOutcome::Denied(_)));
    }
}
