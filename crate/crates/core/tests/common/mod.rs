//! Adversarial guest actions shared by the isolation tests.
#![allow(dead_code)]

use rand::Rng;
use rvpart::devices::{aplic, clint, plic, Devices, FileLevel, MmioOp, MmioOutcome, PlicReg};
use rvpart::firmware::{HartMask, SbiFunction, SbiStatus};
use rvpart::machine::IrqSet;
use rvpart::system::System;
use rvpart::HartId;

pub const GUEST: HartId = 4;
pub const ROOT_HARTS: [HartId; 4] = [0, 1, 2, 3];
pub const OWN_SOURCE: u32 = 12;

#[derive(Clone, Debug)]
pub enum Attack {
    Sbi(SbiFunction),
    Mmio { addr: u64, op: MmioOp },
}

fn foreign_source(rng: &mut impl Rng) -> u32 {
    loop {
        let s = rng.gen_range(1..32);
        if s != OWN_SOURCE {
            return s;
        }
    }
}

fn root_hart(rng: &mut impl Rng) -> HartId {
    ROOT_HARTS[rng.gen_range(0..ROOT_HARTS.len())]
}

fn any_hart(rng: &mut impl Rng) -> HartId {
    rng.gen_range(0..6)
}

fn op(rng: &mut impl Rng) -> MmioOp {
    if rng.gen_bool(0.3) {
        MmioOp::Read
    } else {
        MmioOp::Write(rng.gen::<u32>() as u64 | 1)
    }
}

/// Draws one request that names something outside the guest's cell.
pub fn attack(d: &Devices, rng: &mut impl Rng) -> Attack {
    let l = &d.layout;
    let plic = |r: PlicReg| l.plic_reg_addr(r);
    let w = |v: u64| MmioOp::Write(v);
    match rng.gen_range(0..17) {
        0 => {
            // Mixed masks: some own harts plus at least one root hart.
            let mut m = 1u64 << root_hart(rng);
            m |= rng.gen_range(0..64u64) & 0b11_1111;
            Attack::Sbi(SbiFunction::SendIpi(HartMask(m)))
        }
        1 => Attack::Sbi(SbiFunction::RemoteFence(HartMask(1 << root_hart(rng) | 1 << GUEST))),
        2 => Attack::Sbi(SbiFunction::HartStop),
        3 => Attack::Sbi(SbiFunction::HartStart(any_hart(rng))),
        4 => {
            let ctx = if rng.gen_bool(0.5) {
                plic::s_context(root_hart(rng))
            } else {
                plic::m_context(any_hart(rng))
            };
            Attack::Mmio { addr: plic(PlicReg::Enable { ctx, word: 0 }), op: op(rng) }
        }
        5 => Attack::Mmio { addr: plic(PlicReg::Priority(foreign_source(rng))), op: op(rng) },
        6 => Attack::Mmio { addr: plic(PlicReg::Threshold(plic::s_context(root_hart(rng)))), op: op(rng) },
        7 => Attack::Mmio { addr: plic(PlicReg::Claim(plic::m_context(any_hart(rng)))), op: op(rng) },
        8 => Attack::Mmio {
            addr: plic(PlicReg::Claim(plic::s_context(GUEST))),
            op: w(foreign_source(rng) as u64),
        },
        9 => Attack::Mmio {
            addr: plic(PlicReg::Enable { ctx: plic::s_context(GUEST), word: 0 }),
            op: w(1 << OWN_SOURCE | 1 << foreign_source(rng)),
        },
        10 => Attack::Mmio { addr: plic(PlicReg::Pending(0)), op: w(1 << foreign_source(rng)) },
        11 => {
            let h = any_hart(rng) as u64;
            let off = if rng.gen_bool(0.5) {
                clint::MSIP_OFFSET + 4 * h
            } else {
                clint::MTIMECMP_OFFSET + 8 * h
            };
            Attack::Mmio { addr: l.clint_base + off, op: op(rng) }
        }
        12 => {
            let (h, level) = match rng.gen_range(0..3) {
                0 => (any_hart(rng), FileLevel::M),
                1 => (any_hart(rng), FileLevel::S),
                _ => (root_hart(rng), FileLevel::VS),
            };
            Attack::Mmio { addr: l.imsic_file_addr(h, level), op: w(rng.gen_range(1..64)) }
        }
        13 => Attack::Mmio {
            addr: l.aplic_base + aplic::AplicState::target_offset(foreign_source(rng)),
            op: op(rng),
        },
        14 => {
            let reg = if rng.gen_bool(0.5) { aplic::SETIENUM } else { aplic::CLRIENUM };
            Attack::Mmio { addr: l.aplic_base + reg, op: w(foreign_source(rng) as u64) }
        }
        15 => Attack::Mmio {
            addr: l.aplic_base + aplic::AplicState::claim_offset(root_hart(rng)),
            op: op(rng),
        },
        _ => Attack::Mmio {
            addr: l.sswi_addr(root_hart(rng)),
            op: w(1),
        },
    }
}

/// Everything a guest outside the root cell must not be able to change.
#[derive(Debug, PartialEq)]
pub struct ForeignState {
    msip: Vec<bool>,
    mtimecmp: Vec<rvpart::kernel::SimTime>,
    plic: Option<rvpart::devices::PlicState>,
    aplic: Option<rvpart::devices::AplicState>,
    imsic: Option<rvpart::devices::ImsicState>,
    sswi: Option<u64>,
    harts: Vec<(IrqSet, IrqSet)>,
}

pub fn snapshot(sys: &System) -> ForeignState {
    let d = &sys.plat.devices;
    ForeignState {
        msip: d.clint.msip.clone(),
        mtimecmp: d.clint.mtimecmp.clone(),
        plic: d.plic.clone(),
        aplic: d.aplic.clone(),
        imsic: d.imsic.clone(),
        sswi: d.sswi.as_ref().map(|s| s.doorbells),
        harts: ROOT_HARTS
            .iter()
            .map(|&h| (sys.plat.machine.harts[h].pending, sys.plat.machine.harts[h].enable))
            .collect(),
    }
}

/// Runs the attack from the guest hart. Returns whether it was refused.
pub fn launch(sys: &mut System, a: &Attack) -> bool {
    match *a {
        Attack::Sbi(f) => sys.ecall(GUEST, f).unwrap().status == SbiStatus::Denied,
        Attack::Mmio { addr, op } => matches!(sys.mmio(GUEST, addr, op).unwrap(), MmioOutcome::Denied(_)),
    }
}
