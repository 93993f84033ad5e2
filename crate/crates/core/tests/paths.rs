//! End-to-end path checks. Expected cycle counts are re-derived here from
//! the cost-model terms of each code path, independently of the simulator.

use rvpart::devices::IrqChip;
use rvpart::guests::BenchmarkKind;
use rvpart::kernel::TraceKind;
use rvpart::machine::CostModel;
use rvpart::scenarios::{build_system, run, ResultSet, RunSpec, Scenario};

const N: usize = 300;

fn go(b: BenchmarkKind, s: Scenario, c: IrqChip) -> ResultSet {
    run(&RunSpec::new(b, s, c).with_iterations(N).with_seed(7)).unwrap()
}

fn constant(r: &ResultSet) -> u64 {
    assert_eq!(r.summary.min, r.summary.max, "{:?}/{:?}/{:?} not constant", r.benchmark, r.scenario, r.irqchip);
    r.summary.min
}

/// One doorbell-IPI leg: mailbox post, SBI send, propagation, M detour,
/// then the poll that notices the bit, with HS moderation and injection
/// added under the hypervisor.
fn sbi_ipi_leg(c: &CostModel, virtualized: bool) -> u64 {
    let hv = if virtualized { 2 * (c.trap_cost_hs + c.hv_handler_cost) } else { 0 };
    c.mailbox_cost + c.trap_cost_m + c.sbi_cost + c.ipi_propagation + c.trap_cost_m + c.fw_handler_cost + c.poll_granularity + hv
}

#[test]
fn timer_jitter_matches_path_sum() {
    let c = CostModel::default();
    let a = c.irq_signal_delay + c.trap_cost_m + c.fw_handler_cost + c.trap_cost_s;
    let b = c.irq_signal_delay + c.trap_cost_m + c.fw_handler_cost + c.trap_cost_hs + c.hv_handler_cost + c.trap_cost_vs;
    for chip in IrqChip::ALL {
        assert_eq!(constant(&go(BenchmarkKind::TimerJitter, Scenario::A, chip)), a);
        assert_eq!(constant(&go(BenchmarkKind::TimerJitter, Scenario::B, chip)), b);
    }
}

#[test]
fn sync_trap_b_adds_one_moderation_round_trip() {
    let c = CostModel::default();
    let a = c.trap_cost_m + c.sbi_cost;
    for chip in IrqChip::ALL {
        assert_eq!(constant(&go(BenchmarkKind::SyncTrap, Scenario::A, chip)), a);
        assert_eq!(
            constant(&go(BenchmarkKind::SyncTrap, Scenario::B, chip)),
            a + c.trap_cost_hs + c.hv_handler_cost
        );
    }
}

#[test]
fn ipi_round_trips() {
    let c = CostModel::default();
    // Echo leg plus the receiver's mailbox read before it replies.
    let doorbell = |virt| 2 * sbi_ipi_leg(&c, virt) + c.mailbox_cost;
    assert_eq!(constant(&go(BenchmarkKind::IpiRtt, Scenario::A, IrqChip::PlicClint)), doorbell(false));
    assert_eq!(constant(&go(BenchmarkKind::IpiRtt, Scenario::B, IrqChip::PlicClint)), doorbell(true));
    assert_eq!(constant(&go(BenchmarkKind::IpiRtt, Scenario::B, IrqChip::AiaDirect)), doorbell(true));
    let sswi_leg = c.mailbox_cost + c.mmio_base_cost + c.poll_granularity;
    assert_eq!(
        constant(&go(BenchmarkKind::IpiRtt, Scenario::A, IrqChip::AiaDirect)),
        2 * sswi_leg + c.mailbox_cost
    );
    let msi = c.mmio_base_cost + c.poll_granularity + c.imsic_claim_cost + c.mmio_base_cost + c.poll_granularity;
    for s in [Scenario::A, Scenario::B] {
        assert_eq!(constant(&go(BenchmarkKind::IpiRtt, s, IrqChip::AiaMsi)), msi);
    }
    assert!(msi < doorbell(true));
}

#[test]
fn external_path_phases() {
    let c = CostModel::default();
    let emulated = c.trap_cost_hs + c.hv_handler_cost + c.hv_emulation_cost + c.mmio_base_cost;
    for chip in [IrqChip::PlicClint, IrqChip::AiaDirect] {
        let a = go(BenchmarkKind::PlicPath, Scenario::A, chip);
        let b = go(BenchmarkKind::PlicPath, Scenario::B, chip);
        assert_eq!(constant(&a), c.mmio_base_cost);
        assert_eq!(constant(&b), emulated);
        let pa = a.samples[0].phases.unwrap();
        let pb = b.samples[0].phases.unwrap();
        assert_eq!(pa.injection, c.irq_signal_delay + c.trap_cost_s);
        assert_eq!(pa.complete, c.mmio_base_cost);
        assert_eq!(
            pb.injection,
            c.irq_signal_delay + c.trap_cost_hs + c.hv_handler_cost + c.trap_cost_vs
        );
        assert_eq!(pb.complete, emulated);
    }
    let m = go(BenchmarkKind::PlicPath, Scenario::B, IrqChip::AiaMsi);
    assert_eq!(constant(&m), c.imsic_claim_cost);
    let p = m.samples[0].phases.unwrap();
    assert_eq!(p.injection, c.irq_signal_delay + c.trap_cost_vs);
    assert_eq!(p.complete, 0);
}

#[test]
fn per_iteration_trap_counts() {
    let table = [
        (BenchmarkKind::TimerJitter, IrqChip::PlicClint, 2, 2),
        (BenchmarkKind::IpiRtt, IrqChip::PlicClint, 4, 4),
        (BenchmarkKind::PlicPath, IrqChip::PlicClint, 3, 0),
        (BenchmarkKind::SyncTrap, IrqChip::PlicClint, 1, 1),
        (BenchmarkKind::IpiRtt, IrqChip::AiaMsi, 0, 0),
        (BenchmarkKind::PlicPath, IrqChip::AiaMsi, 0, 0),
        (BenchmarkKind::PlicPath, IrqChip::AiaDirect, 3, 0),
    ];
    for (b, chip, hs, m) in table {
        for s in [Scenario::B, Scenario::C] {
            let r = go(b, s, chip);
            assert_eq!(r.summary.hs_traps.constant(), Some(hs), "{b}/{s}/{chip}");
            assert_eq!(r.summary.m_entries.constant(), Some(m), "{b}/{s}/{chip}");
            for sample in &r.samples {
                assert_eq!(sample.interventions.total(), sample.hs_traps);
            }
        }
        assert_eq!(go(b, Scenario::A, chip).summary.hs_traps.max, 0);
    }
}

#[test]
fn scenario_a_has_no_hypervisor() {
    for b in BenchmarkKind::ALL {
        let spec = RunSpec::new(b, Scenario::A, IrqChip::PlicClint);
        assert!(build_system(&spec).unwrap().hv.is_none());
        let r = go(b, Scenario::A, IrqChip::PlicClint);
        assert_eq!(r.interventions.total(), 0);
    }
}

#[test]
fn interventions_account_for_every_hs_entry() {
    for b in BenchmarkKind::ALL {
        for chip in IrqChip::ALL {
            let spec = RunSpec::new(b, Scenario::C, chip).with_iterations(50);
            let mut sys = build_system(&spec).unwrap();
            let p = spec.config.bench;
            let mut wl = rvpart::guests::build(
                b,
                rvpart::guests::BenchParams {
                    iterations: 50,
                    hart: p.hart,
                    peer: p.peer,
                    source: p.source,
                    period: p.period,
                },
            );
            sys.run(wl.as_mut()).unwrap();
            assert_eq!(sys.hv.as_ref().unwrap().counters.total(), sys.total_hs_entries(), "{b}/{chip}");
        }
    }
}

#[test]
fn conservation_holds_everywhere() {
    for b in BenchmarkKind::ALL {
        for chip in IrqChip::ALL {
            for s in Scenario::ALL {
                let r = go(b, s, chip);
                assert!(r.conservation.holds(), "{b}/{s}/{chip}: {:?}", r.conservation);
            }
        }
    }
}

#[test]
fn every_vs_sbi_call_follows_one_moderation_trap() {
    let mut spec = RunSpec::new(BenchmarkKind::IpiRtt, Scenario::B, IrqChip::PlicClint).with_iterations(20);
    spec.trace = true;
    let r = run(&spec).unwrap();
    assert!(r.trace.windows(2).all(|w| w[0].time <= w[1].time));
    let calls: Vec<_> = r.trace.iter().filter(|t| t.kind == TraceKind::SbiCall).collect();
    assert!(!calls.is_empty());
    for call in calls {
        let entries = r
            .trace
            .iter()
            .filter(|t| t.hart == call.hart && t.kind == TraceKind::TrapEntry && t.time <= call.time)
            .collect::<Vec<_>>();
        let last_vs_exit = entries
            .iter()
            .rev()
            .find(|t| t.detail.contains("VS->HS"))
            .expect("moderation trap before the call");
        assert!(last_vs_exit.detail.starts_with("ecall-from-VS"), "{}", last_vs_exit.detail);
    }
    let moderations = r
        .trace
        .iter()
        .filter(|t| t.kind == TraceKind::TrapEntry && t.detail.starts_with("ecall-from-VS"))
        .count();
    assert_eq!(moderations, r.trace.iter().filter(|t| t.kind == TraceKind::SbiCall).count());
}

#[test]
fn equal_seeds_replay_exactly() {
    let spec = RunSpec::new(BenchmarkKind::PlicPath, Scenario::C, IrqChip::PlicClint)
        .with_iterations(500)
        .with_seed(3);
    assert_eq!(run(&spec).unwrap(), run(&spec).unwrap());
    let other = run(&spec.clone().with_seed(4)).unwrap();
    assert_ne!(run(&spec).unwrap().samples, other.samples);
}

#[test]
fn zero_intensity_degenerates_to_b() {
    for b in BenchmarkKind::ALL {
        let mut c = RunSpec::new(b, Scenario::C, IrqChip::PlicClint).with_iterations(200);
        c.config.load.intensity = 0.0;
        let b_run = run(&RunSpec { scenario: Scenario::B, ..c.clone() }).unwrap();
        let c_run = run(&c).unwrap();
        assert_eq!(b_run.samples, c_run.samples, "{b}");
    }
}

#[test]
fn half_intensity_is_dominated_by_full() {
    let mut half = RunSpec::new(BenchmarkKind::SyncTrap, Scenario::C, IrqChip::PlicClint).with_iterations(10_000);
    half.config.load.intensity = 0.5;
    let full = RunSpec { config: { let mut c = half.config.clone(); c.load.intensity = 1.0; c }, ..half.clone() };
    let mut h: Vec<u64> = run(&half).unwrap().samples.iter().map(|s| s.cycles).collect();
    let mut f: Vec<u64> = run(&full).unwrap().samples.iter().map(|s| s.cycles).collect();
    h.sort_unstable();
    f.sort_unstable();
    // Empirical CDF of the full-load run lies at or below the half-load
    // one at every decile.
    for q in 1..10 {
        let i = q * h.len() / 10;
        assert!(h[i] <= f[i], "decile {q}: {} > {}", h[i], f[i]);
    }
}

#[test]
fn peer_outside_cell_fails_setup() {
    let mut spec = RunSpec::new(BenchmarkKind::IpiRtt, Scenario::B, IrqChip::PlicClint).with_iterations(5);
    spec.config.bench.peer = 1;
    let err = run(&spec).unwrap_err();
    assert!(matches!(err, rvpart::scenarios::RunError::Sim(rvpart::system::SimError::Setup(_))), "{err}");
}
