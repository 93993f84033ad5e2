mod common;

use common::{attack, launch, snapshot, Attack};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::scenarios::{build_system, RunSpec, Scenario};

fn check(chip: IrqChip, seed: u64, n: usize) {
    let spec = RunSpec::new(BenchmarkKind::SyncTrap, Scenario::B, chip);
    let mut sys = build_system(&spec).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let before = snapshot(&sys);
    let denied_before = sys.hv.as_ref().unwrap().counters.denied;
    let mut by_hv = 0;
    for _ in 0..n {
        let a = attack(&sys.plat.devices, &mut rng);
        let entries = sys.total_hs_entries();
        assert!(launch(&mut sys, &a), "{chip}: {a:?} was not refused");
        assert_eq!(snapshot(&sys), before, "{chip}: {a:?} changed foreign state");
        if sys.total_hs_entries() > entries {
            by_hv += 1;
        }
        if matches!(a, Attack::Sbi(_)) {
            assert!(sys.total_hs_entries() > entries, "SBI call bypassed the hypervisor");
        }
    }
    assert_eq!(sys.hv.as_ref().unwrap().counters.denied - denied_before, by_hv);
}

#[test]
fn thousand_attacks_per_irqchip() {
    for chip in IrqChip::ALL {
        check(chip, 0x15_0a7e, 1000);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn attacks_never_leak(seed in any::<u64>(), chip in 0usize..3) {
        check(IrqChip::ALL[chip], seed, 100);
    }
}

#[test]
fn own_cell_accesses_still_work() {
    use rvpart::devices::{plic, MmioOp, MmioOutcome, PlicReg};
    use rvpart::firmware::{HartMask, SbiFunction, SbiStatus};
    let mut sys = build_system(&RunSpec::new(BenchmarkKind::SyncTrap, Scenario::B, IrqChip::PlicClint)).unwrap();
    let addr = sys.plat.devices.layout.plic_reg_addr(PlicReg::Enable { ctx: plic::s_context(4), word: 0 });
    assert_eq!(sys.mmio(4, addr, MmioOp::Write(1 << 12)).unwrap(), MmioOutcome::Value(0));
    assert_eq!(sys.mmio(4, addr, MmioOp::Read).unwrap(), MmioOutcome::Value(1 << 12));
    let ipi = sys.ecall(4, SbiFunction::SendIpi(HartMask::of(&[5]))).unwrap();
    assert_eq!(ipi.status, SbiStatus::Ok);
}
