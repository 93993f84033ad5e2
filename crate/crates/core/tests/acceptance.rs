//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Every expected value is computed here from the
//! raw samples or from an independent model, not taken from a summary.

mod common;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rvpart::devices::{IrqChip, PlicState};
use rvpart::guests::{BenchmarkKind, BenchmarkSample};
use rvpart::hypervisor::InterventionCounter;
use rvpart::scenarios::{build_system, run, sweep, ResultSet, RunSpec, Scenario};

const N: usize = 10_000;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn spec(b: BenchmarkKind, s: Scenario, c: IrqChip) -> RunSpec {
    RunSpec::new(b, s, c).with_iterations(N).with_seed(42)
}

fn go(b: BenchmarkKind, s: Scenario, c: IrqChip) -> Result<ResultSet, String> {
    run(&spec(b, s, c)).map_err(|e| format!("{b}/{s}/{c}: {e}"))
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn variance(xs: &[BenchmarkSample]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().map(|s| s.cycles as f64).sum::<f64>() / n;
    xs.iter().map(|s| (s.cycles as f64 - mean).powi(2)).sum::<f64>() / n
}

fn every<F: Fn(&BenchmarkSample) -> bool>(r: &ResultSet, what: &str, f: F) -> Result<(), String> {
    match r.samples.iter().find(|s| !f(s)) {
        None if r.samples.len() == r.iterations => Ok(()),
        None => Err(format!("{} samples for {} iterations", r.samples.len(), r.iterations)),
        Some(s) => Err(format!("iteration {}: {what} violated: {s:?}", s.iteration)),
    }
}

fn ipi_four_interceptions() -> Outcome {
    let t = Instant::now();
    let r = go(BenchmarkKind::IpiRtt, Scenario::B, IrqChip::PlicClint)?;
    let took = t.elapsed();
    every(&r, "2 moderations + 2 injections", |s| {
        let i = s.interventions;
        s.hs_traps == 4 && i.sbi_moderation == 2 && i.ipi_injection == 2 && i.total() == 4
    })?;
    let v = variance(&r.samples);
    ensure(v == 0.0, || format!("variance {v}"))?;
    ensure(took < Duration::from_secs(10), || format!("took {took:?}"))?;
    Ok(format!("rtt {} cycles, 4 HS/iter, {took:.2?}", r.samples[0].cycles))
}

fn external_three_traps() -> Outcome {
    let r = go(BenchmarkKind::PlicPath, Scenario::B, IrqChip::PlicClint)?;
    every(&r, "1 injection + 2 emulations", |s| {
        let i = s.interventions;
        s.hs_traps == 3 && i.external_injection == 1 && i.plic_emulation == 2 && i.total() == 3
    })?;
    Ok("3 HS traps per interrupt".into())
}

fn timer_two_traps() -> Outcome {
    let b = go(BenchmarkKind::TimerJitter, Scenario::B, IrqChip::PlicClint)?;
    every(&b, "1 moderation + 1 injection", |s| {
        let i = s.interventions;
        s.hs_traps == 2 && i.sbi_moderation == 1 && i.timer_injection == 1 && i.total() == 2
    })?;
    let a = go(BenchmarkKind::TimerJitter, Scenario::A, IrqChip::PlicClint)?;
    every(&a, "no HS traps", |s| s.hs_traps == 0)?;
    let v = variance(&a.samples);
    ensure(v == 0.0, || format!("scenario A jitter variance {v}"))?;
    Ok(format!("B 2 HS/period, A jitter {} constant", a.samples[0].cycles))
}

fn claim_cost_growth() -> Outcome {
    let a = go(BenchmarkKind::PlicPath, Scenario::A, IrqChip::PlicClint)?;
    every(&a, "bare-metal claim = 3 cycles", |s| s.cycles == 3)?;
    let c = go(BenchmarkKind::PlicPath, Scenario::C, IrqChip::PlicClint)?;
    let max = c.samples.iter().map(|s| s.cycles).max().unwrap_or(0);
    let ratio = max as f64 / 3.0;
    ensure((1_000.0..=10_000.0).contains(&ratio), || format!("max {max}, ratio {ratio:.0}x"))?;
    Ok(format!("A 3 cycles, C max {max} ({ratio:.0}x)"))
}

fn msi_avoids_hypervisor() -> Outcome {
    for b in [BenchmarkKind::IpiRtt, BenchmarkKind::PlicPath] {
        let r = go(b, Scenario::B, IrqChip::AiaMsi)?;
        let sum = r.samples.iter().fold(InterventionCounter::default(), |mut acc, s| {
            acc.ipi_injection += s.interventions.ipi_injection;
            acc.external_injection += s.interventions.external_injection;
            acc.plic_emulation += s.interventions.plic_emulation;
            acc
        });
        ensure(sum.ipi_injection + sum.external_injection + sum.plic_emulation == 0, || {
            format!("{b}: {sum:?}")
        })?;
    }
    let r = go(BenchmarkKind::SyncTrap, Scenario::B, IrqChip::AiaMsi)?;
    every(&r, "1 moderation per call", |s| s.interventions.sbi_moderation == 1)?;
    Ok("0 injections/emulations; sync_trap 1 moderation".into())
}

fn median_max(r: &ResultSet) -> (u64, u64) {
    let mut v: Vec<u64> = r.samples.iter().map(|s| s.cycles).collect();
    v.sort_unstable();
    // Lower median, matching the ceil(q*n)-th order statistic.
    (v[v.len().div_ceil(2) - 1], v[v.len() - 1])
}

fn monotone() -> Outcome {
    let mut specs = Vec::new();
    for b in BenchmarkKind::ALL {
        for c in IrqChip::ALL {
            for s in Scenario::ALL {
                specs.push(spec(b, s, c));
            }
        }
    }
    let results: Vec<ResultSet> = sweep(&specs)
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    for trio in results.chunks(3) {
        let [a, b, c] = [median_max(&trio[0]), median_max(&trio[1]), median_max(&trio[2])];
        let tag = format!("{}/{}", trio[0].benchmark, trio[0].irqchip);
        ensure(a.0 <= b.0 && b.0 <= c.0, || format!("{tag} medians {} {} {}", a.0, b.0, c.0))?;
        ensure(a.1 <= b.1 && b.1 <= c.1, || format!("{tag} maxima {} {} {}", a.1, b.1, c.1))?;
    }
    // Trap counts must not depend on the seed.
    for r in &results {
        let other = run(&RunSpec::new(r.benchmark, r.scenario, r.irqchip).with_iterations(1_000).with_seed(7))
            .map_err(|e| e.to_string())?;
        let traps = |x: &ResultSet| x.samples.iter().take(1_000).map(|s| (s.hs_traps, s.m_entries)).collect::<Vec<_>>();
        ensure(traps(r) == traps(&other), || format!("{}/{}/{} trap counts vary with seed", r.benchmark, r.scenario, r.irqchip))?;
    }
    Ok(format!("{} combinations ordered A <= B <= C", results.len() / 3))
}

fn conserved() -> Outcome {
    let n = 2_000;
    for b in BenchmarkKind::ALL {
        for c in IrqChip::ALL {
            for s in Scenario::ALL {
                let r = run(&RunSpec::new(b, s, c).with_iterations(n)).map_err(|e| e.to_string())?;
                let k = &r.conservation;
                let tag = format!("{b}/{s}/{c}");
                ensure(k.irq_asserts == k.irq_claims && k.irq_claims == k.irq_completions, || {
                    format!("{tag}: asserts {} claims {} completions {}", k.irq_asserts, k.irq_claims, k.irq_completions)
                })?;
                ensure(k.msi_writes == k.msi_claims, || format!("{tag}: msi {} vs {}", k.msi_writes, k.msi_claims))?;
                ensure(k.pending_sets == k.pending_clears, || {
                    format!("{tag}: pending sets {:?} clears {:?}", k.pending_sets, k.pending_clears)
                })?;
                ensure(k.protocol_violations == 0, || format!("{tag}: {} violations", k.protocol_violations))?;
                ensure(r.interventions.other == 0 && r.interventions.denied == 0, || {
                    format!("{tag}: other {} denied {}", r.interventions.other, r.interventions.denied)
                })?;
                // Expected traffic follows from the benchmark definition.
                let (wired, msi) = match (b, c) {
                    (BenchmarkKind::PlicPath, IrqChip::AiaMsi) => (0, n),
                    (BenchmarkKind::PlicPath, _) => (n, 0),
                    (BenchmarkKind::IpiRtt, IrqChip::AiaMsi) => (0, 2 * n),
                    _ => (0, 0),
                };
                ensure(k.irq_asserts == wired as u64 && k.msi_writes == msi as u64, || {
                    format!("{tag}: expected {wired} wired / {msi} msi, got {} / {}", k.irq_asserts, k.msi_writes)
                })?;
            }
        }
    }
    Ok("36 runs balanced, other = denied = 0".into())
}

fn isolated() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x150);
    let mut total = 0;
    for chip in IrqChip::ALL {
        let mut sys = build_system(&RunSpec::new(BenchmarkKind::SyncTrap, Scenario::B, chip)).map_err(|e| e.to_string())?;
        let before = common::snapshot(&sys);
        for _ in 0..1_000 {
            let a = common::attack(&sys.plat.devices, &mut rng);
            ensure(common::launch(&mut sys, &a), || format!("{chip}: {a:?} not denied"))?;
            ensure(common::snapshot(&sys) == before, || format!("{chip}: {a:?} changed foreign state"))?;
            total += 1;
        }
    }
    Ok(format!("{total} attacks denied, no foreign change"))
}

fn deterministic() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for b in BenchmarkKind::ALL {
        for c in IrqChip::ALL {
            for s in Scenario::ALL {
                let mut sp = RunSpec::new(b, s, c).with_iterations(300).with_seed(11);
                sp.trace = true;
                let mut bundles = Vec::new();
                for k in 0..2 {
                    let dir = root.path().join(format!("{b}_{s}_{c}_{k}"));
                    let r = run(&sp).map_err(|e| e.to_string())?;
                    let files = rvpart::report::write_bundle(&dir, &sp, &r, rvpart::report::Format::All)
                        .map_err(|e| e.to_string())?;
                    let bytes: Vec<_> = files
                        .iter()
                        .map(|f| (f.file_name().unwrap().to_owned(), std::fs::read(f).unwrap()))
                        .collect();
                    bundles.push(bytes);
                }
                ensure(bundles[0] == bundles[1], || format!("{b}/{s}/{c} bundles differ"))?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} specs replayed byte-identically"))
}

/// Straight scan: every qualifying source, keep the strictly higher
/// priority so the earliest id wins ties.
fn brute_force_claim(prio: &[u32], pending: &[bool], enabled: &[bool], busy: &[bool], threshold: u32) -> u32 {
    let mut best = 0;
    let mut best_p = 0;
    for s in 1..prio.len() {
        if pending[s] && enabled[s] && !busy[s] && prio[s] > threshold && prio[s] > best_p {
            best = s as u32;
            best_p = prio[s];
        }
    }
    best
}

fn claim_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..10_000 {
        let sources = rng.gen_range(2..=32u32);
        let contexts = rng.gen_range(1..=4usize);
        let ctx = rng.gen_range(0..contexts);
        let mut p = PlicState::new(sources, contexts);
        let n = sources as usize;
        let prio: Vec<u32> = (0..n).map(|s| if s == 0 { 0 } else { rng.gen_range(0..8) }).collect();
        let pending: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let enabled: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.6)).collect();
        let busy: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.15)).collect();
        let threshold = rng.gen_range(0..8);
        for s in 1..n {
            p.priority[s] = prio[s];
            if pending[s] {
                p.pending |= 1 << s;
            }
            if enabled[s] {
                p.enable[ctx] |= 1 << s;
            }
            if busy[s] {
                // Claimed earlier, possibly by another context.
                p.in_service[rng.gen_range(0..contexts)] |= 1 << s;
            }
        }
        p.threshold[ctx] = threshold;
        let want = brute_force_claim(&prio, &pending, &enabled, &busy, threshold);
        let got = p.claim(ctx);
        ensure(got == want, || format!("trial {trial}: claim {got}, oracle {want}"))?;
        if got != 0 {
            ensure(p.pending & (1 << got) == 0 && p.in_service[ctx] & (1 << got) != 0, || {
                format!("trial {trial}: claim of {got} did not move it to in-service")
            })?;
        }
    }
    Ok("10000 random states match".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("ipi_rtt B plic_clint: 4 interceptions, zero variance", ipi_four_interceptions),
        ("plic_path B plic_clint: 3 hypervisor traps", external_three_traps),
        ("timer_jitter: B 2 traps, A 0 traps and zero jitter variance", timer_two_traps),
        ("claim cost: A 3 cycles, C max within 1000x..10000x", claim_cost_growth),
        ("aia_msi B: no injection or emulation", msi_avoids_hypervisor),
        ("monotonicity A <= B <= C", monotone),
        ("conservation", conserved),
        ("isolation under 1000 adversarial actions", isolated),
        ("determinism of bundles", deterministic),
        ("claim matches brute-force oracle", claim_oracle),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
