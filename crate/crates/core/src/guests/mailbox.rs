//! Shared-memory slots that carry the payload of doorbell IPIs.

use std::collections::{BTreeMap, VecDeque};

use crate::system::System;
use crate::HartId;

/// One FIFO per (sender, receiver) pair on the cell's shared page.
#[derive(Clone, Debug, Default)]
pub struct Mailbox {
    slots: BTreeMap<(HartId, HartId), VecDeque<u64>>,
    pub posted: u64,
    pub taken: u64,
}

impl Mailbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Without a system the accesses are free; used by unit tests.
    pub fn push(&mut self, from: HartId, to: HartId, value: u64) {
        self.slots.entry((from, to)).or_default().push_back(value);
        self.posted += 1;
    }

    pub fn pop(&mut self, from: HartId, to: HartId) -> Option<u64> {
        let v = self.slots.get_mut(&(from, to))?.pop_front()?;
        self.taken += 1;
        Some(v)
    }

    pub fn post(&mut self, sys: &mut System, from: HartId, to: HartId, value: u64) {
        sys.shared_access(from);
        self.push(from, to, value);
    }

    pub fn take(&mut self, sys: &mut System, from: HartId, to: HartId) -> Option<u64> {
        sys.shared_access(to);
        self.pop(from, to)
    }

    pub fn in_flight(&self) -> usize {
        self.slots.values().map(VecDeque::len).sum()
    }
}
