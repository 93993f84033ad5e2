//! Carving a cell out of the root cell, then freezing the layout. Shows
//! which requests the partitioning rules reject.

use rvpart::hypervisor::{CellConfig, Hypervisor, MemRegion, RangeSet};

fn main() {
    let ram = RangeSet::from_range(0x8000_0000, 0x4000_0000);
    let mut hv = Hypervisor::new(6, 32, ram);

    let rtos = CellConfig {
        name: "rtos".into(),
        harts: vec![4, 5],
        memory: vec![MemRegion { base: 0xa000_0000, len: 0x0100_0000 }],
        irq_sources: vec![12],
        comm_page: Some(0xa0ff_f000),
    };
    let id = hv.create_cell(&rtos).expect("resources are free");
    hv.start_cell(id).unwrap();

    // Second claim on the same hart and an out-of-RAM region.
    let greedy = CellConfig { name: "greedy".into(), harts: vec![3, 4], ..rtos.clone() };
    println!("overlapping hart:   {}", hv.create_cell(&greedy).unwrap_err());
    let outside = CellConfig {
        name: "outside".into(),
        harts: vec![3],
        memory: vec![MemRegion { base: 0x1_0000_0000, len: 0x1000 }],
        irq_sources: vec![],
        comm_page: None,
    };
    println!("memory not in root: {}", hv.create_cell(&outside).unwrap_err());

    for c in hv.cells() {
        println!(
            "cell {} {:<5} harts {:?} sources {:#x} memory {:x?}",
            c.id,
            c.name,
            c.harts,
            c.source_mask(),
            c.memory.ranges()
        );
    }

    hv.enter_operational_phase();
    println!("after freeze:       {}", hv.destroy_cell(id).unwrap_err());
    println!("foreign harts of {}: {:?}", rtos.name, hv.foreign_harts(id));
}
