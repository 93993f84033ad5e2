//! Discrete-event model of a statically partitioned multi-hart RISC-V
//! system. It reproduces hypervisor trap paths and interrupt-delivery costs
//! at the level of architectural events and compares the PLIC/CLINT
//! interrupt architecture with AIA (IMSIC, APLIC, ACLINT).

pub mod cli;
pub mod config;
pub mod devices;
pub mod firmware;
pub mod guests;
pub mod hypervisor;
pub mod kernel;
pub mod machine;
pub mod report;
pub mod scenarios;
pub mod system;

/// Hart index `0..N`.
pub type HartId = usize;
/// Cell index; the root cell is 0.
pub type CellId = u32;
