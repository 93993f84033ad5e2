//! Platform-level interrupt controller with claim/complete semantics.

use serde::{Deserialize, Serialize};

use crate::HartId;

/// Register offsets. Defaults follow the common SiFive map; the enable
/// stride packs 32 contexts onto one 4 KiB page.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlicLayout {
    pub priority_base: u64,
    pub pending_base: u64,
    pub enable_base: u64,
    pub enable_stride: u64,
    pub context_base: u64,
    pub context_stride: u64,
}

impl Default for PlicLayout {
    fn default() -> Self {
        Self {
            priority_base: 0x0,
            pending_base: 0x1000,
            enable_base: 0x2000,
            enable_stride: 0x80,
            context_base: 0x20_0000,
            context_stride: 0x1000,
        }
    }
}

/// SiFive context numbering: two contexts per hart, M then S.
pub fn s_context(hart: HartId) -> usize {
    2 * hart + 1
}

pub fn m_context(hart: HartId) -> usize {
    2 * hart
}

pub fn context_hart(ctx: usize) -> (HartId, bool) {
    (ctx / 2, ctx % 2 == 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlicReg {
    Priority(u32),
    Pending(usize),
    Enable { ctx: usize, word: usize },
    Threshold(usize),
    Claim(usize),
}

impl PlicLayout {
    pub fn decode(&self, offset: u64, sources: u32, contexts: usize) -> Option<PlicReg> {
        if !offset.is_multiple_of(4) {
            return None;
        }
        let words = sources.div_ceil(32) as u64;
        if (self.priority_base..self.priority_base + 4 * sources as u64).contains(&offset) {
            return Some(PlicReg::Priority(((offset - self.priority_base) / 4) as u32));
        }
        if (self.pending_base..self.pending_base + 4 * words).contains(&offset) {
            return Some(PlicReg::Pending(((offset - self.pending_base) / 4) as usize));
        }
        let enable_end = self.enable_base + self.enable_stride * contexts as u64;
        if (self.enable_base..enable_end).contains(&offset) {
            let rel = offset - self.enable_base;
            let word = rel % self.enable_stride / 4;
            if word < words {
                return Some(PlicReg::Enable {
                    ctx: (rel / self.enable_stride) as usize,
                    word: word as usize,
                });
            }
            return None;
        }
        let ctx_end = self.context_base + self.context_stride * contexts as u64;
        if (self.context_base..ctx_end).contains(&offset) {
            let rel = offset - self.context_base;
            let ctx = (rel / self.context_stride) as usize;
            return match rel % self.context_stride {
                0 => Some(PlicReg::Threshold(ctx)),
                4 => Some(PlicReg::Claim(ctx)),
                _ => None,
            };
        }
        None
    }

    pub fn offset(&self, reg: PlicReg) -> u64 {
        match reg {
            PlicReg::Priority(s) => self.priority_base + 4 * s as u64,
            PlicReg::Pending(w) => self.pending_base + 4 * w as u64,
            PlicReg::Enable { ctx, word } => {
                self.enable_base + self.enable_stride * ctx as u64 + 4 * word as u64
            }
            PlicReg::Threshold(ctx) => self.context_base + self.context_stride * ctx as u64,
            PlicReg::Claim(ctx) => self.context_base + self.context_stride * ctx as u64 + 4,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    pub asserts: u64,
    pub claims: u64,
    pub completions: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolViolation {
    pub context: usize,
    pub source: u32,
}

/// Gateway and per-context claim state. Source 0 is reserved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlicState {
    pub sources: u32,
    pub priority: Vec<u32>,
    pub pending: u64,
    pub enable: Vec<u64>,
    pub threshold: Vec<u32>,
    /// Claimed but not completed, per context.
    pub in_service: Vec<u64>,
    pub stats: Vec<SourceStats>,
    pub violations: Vec<ProtocolViolation>,
}

impl PlicState {
    pub fn new(sources: u32, contexts: usize) -> Self {
        assert!(sources <= 64, "at most 64 sources");
        Self {
            sources,
            priority: vec![0; sources as usize],
            pending: 0,
            enable: vec![0; contexts],
            threshold: vec![0; contexts],
            in_service: vec![0; contexts],
            stats: vec![SourceStats::default(); sources as usize],
            violations: Vec::new(),
        }
    }

    pub fn contexts(&self) -> usize {
        self.enable.len()
    }

    fn valid_source(&self, s: u32) -> bool {
        s != 0 && s < self.sources
    }

    fn all_in_service(&self) -> u64 {
        self.in_service.iter().fold(0, |a, b| a | b)
    }

    /// Gateway: raise the source's pending bit.
    pub fn assert(&mut self, source: u32) -> bool {
        if !self.valid_source(source) {
            return false;
        }
        self.pending |= 1 << source;
        self.stats[source as usize].asserts += 1;
        true
    }

    /// Best candidate for `ctx` without side effects.
    pub fn claimable(&self, ctx: usize) -> Option<u32> {
        let eligible = self.pending & self.enable[ctx] & !self.all_in_service() & !1;
        let mut best: Option<(u32, u32)> = None;
        let mut bits = eligible;
        while bits != 0 {
            let s = bits.trailing_zeros();
            bits &= bits - 1;
            let p = self.priority[s as usize];
            if p > self.threshold[ctx] && best.is_none_or(|(bp, _)| p > bp) {
                best = Some((p, s));
            }
        }
        best.map(|(_, s)| s)
    }

    /// Highest priority pending enabled source above threshold, ties to the
    /// lowest id. 0 when nothing qualifies.
    pub fn claim(&mut self, ctx: usize) -> u32 {
        match self.claimable(ctx) {
            Some(s) => {
                self.pending &= !(1 << s);
                self.in_service[ctx] |= 1 << s;
                self.stats[s as usize].claims += 1;
                s
            }
            None => 0,
        }
    }

    pub fn complete(&mut self, ctx: usize, source: u32) -> bool {
        if !self.valid_source(source) || self.in_service[ctx] & (1 << source) == 0 {
            self.violations.push(ProtocolViolation {
                context: ctx,
                source,
            });
            return false;
        }
        self.in_service[ctx] &= !(1 << source);
        self.stats[source as usize].completions += 1;
        true
    }

    pub fn read(&mut self, reg: PlicReg) -> u64 {
        match reg {
            PlicReg::Priority(s) => self.priority[s as usize] as u64,
            PlicReg::Pending(w) => (self.pending >> (32 * w)) & 0xffff_ffff,
            PlicReg::Enable { ctx, word } => (self.enable[ctx] >> (32 * word)) & 0xffff_ffff,
            PlicReg::Threshold(ctx) => self.threshold[ctx] as u64,
            PlicReg::Claim(ctx) => self.claim(ctx) as u64,
        }
    }

    pub fn write(&mut self, reg: PlicReg, value: u64) {
        match reg {
            PlicReg::Priority(s) => {
                if s != 0 {
                    self.priority[s as usize] = value as u32;
                }
            }
            PlicReg::Pending(_) => {}
            PlicReg::Enable { ctx, word } => {
                let shift = 32 * word;
                let mask = 0xffff_ffffu64 << shift;
                self.enable[ctx] = (self.enable[ctx] & !mask) | ((value & 0xffff_ffff) << shift);
                self.enable[ctx] &= !1;
            }
            PlicReg::Threshold(ctx) => self.threshold[ctx] = value as u32,
            PlicReg::Claim(ctx) => {
                self.complete(ctx, value as u32);
            }
        }
    }
}
