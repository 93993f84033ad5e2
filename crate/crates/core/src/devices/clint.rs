use serde::{Deserialize, Serialize};

use crate::kernel::SimTime;
use crate::HartId;

pub const MSIP_OFFSET: u64 = 0x0;
pub const MTIMECMP_OFFSET: u64 = 0x4000;
pub const MTIME_OFFSET: u64 = 0xbff8;
pub const CLINT_SIZE: u64 = 0x1_0000;

/// Core-local interruptor: M-level timer comparators and software bits.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClintState {
    pub mtime: SimTime,
    pub mtimecmp: Vec<SimTime>,
    pub msip: Vec<bool>,
}

impl ClintState {
    pub fn new(harts: usize) -> Self {
        Self {
            mtime: SimTime::ZERO,
            mtimecmp: vec![SimTime::NEVER; harts],
            msip: vec![false; harts],
        }
    }

    pub fn timer_pending(&self, hart: HartId) -> bool {
        self.mtime >= self.mtimecmp[hart]
    }

    pub fn read(&self, offset: u64) -> Option<u64> {
        let harts = self.msip.len() as u64;
        match offset {
            o if o < MSIP_OFFSET + 4 * harts && o % 4 == 0 => Some(self.msip[(o / 4) as usize] as u64),
            o if (MTIMECMP_OFFSET..MTIMECMP_OFFSET + 8 * harts).contains(&o) && o % 8 == 0 => {
                Some(self.mtimecmp[((o - MTIMECMP_OFFSET) / 8) as usize].0)
            }
            MTIME_OFFSET => Some(self.mtime.0),
            _ => None,
        }
    }

    pub fn write(&mut self, offset: u64, value: u64) -> Option<()> {
        let harts = self.msip.len() as u64;
        match offset {
            o if o < MSIP_OFFSET + 4 * harts && o % 4 == 0 => {
                self.msip[(o / 4) as usize] = value & 1 != 0;
                Some(())
            }
            o if (MTIMECMP_OFFSET..MTIMECMP_OFFSET + 8 * harts).contains(&o) && o % 8 == 0 => {
                self.mtimecmp[((o - MTIMECMP_OFFSET) / 8) as usize] = SimTime(value);
                Some(())
            }
            _ => None,
        }
    }
}
