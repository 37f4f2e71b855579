//! Slot bitmaps and contiguous block placement.
//!
//! A set bit means the slot is free. Bitmaps keep their length for life;
//! every binary operation checks that both operands agree on it.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};

use crate::error::{Error, Result};

const WORD: usize = 64;
/// Words stored without a heap allocation; covers 320-slot links.
const INLINE_WORDS: usize = 5;

/// A run of consecutive slot indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotBlock {
    pub start: usize,
    pub len: usize,
}

impl SlotBlock {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end()
    }

    pub fn overlaps(&self, other: &SlotBlock) -> bool {
        self.start < other.end() && other.start < self.end()
    }

    /// The common part of two blocks, if any.
    pub fn intersection(&self, other: &SlotBlock) -> Option<SlotBlock> {
        let start = self.start.max(other.start);
        let end = self.end().min(other.end());
        (start < end).then(|| SlotBlock::new(start, end - start))
    }
}

impl fmt::Display for SlotBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end())
    }
}

/// Fixed-length free/busy map of the slots on a link or along a path.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SpectrumBitmap {
    words: SmallVec<[u64; INLINE_WORDS]>,
    len: usize,
}

impl SpectrumBitmap {
    pub fn all_free(len: usize) -> Self {
        let mut words: SmallVec<[u64; INLINE_WORDS]> = smallvec![u64::MAX; len.div_ceil(WORD)];
        if len % WORD != 0 {
            if let Some(last) = words.last_mut() {
                *last = (1u64 << (len % WORD)) - 1;
            }
        }
        Self { words, len }
    }

    pub fn all_busy(len: usize) -> Self {
        Self { words: smallvec![0; len.div_ceil(WORD)], len }
    }

    /// Builds a bitmap from per-slot flags, `true` meaning free.
    pub fn from_flags(flags: &[bool]) -> Self {
        let mut b = Self::all_busy(flags.len());
        for (i, &free) in flags.iter().enumerate() {
            if free {
                b.words[i / WORD] |= 1 << (i % WORD);
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_free(&self, slot: usize) -> bool {
        slot < self.len && self.words[slot / WORD] >> (slot % WORD) & 1 == 1
    }

    pub fn count_free(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn count_busy(&self) -> usize {
        self.len - self.count_free()
    }

    pub fn to_flags(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.is_free(i)).collect()
    }

    fn check_len(&self, other: &SpectrumBitmap) -> Result<()> {
        if self.len != other.len {
            return Err(Error::LengthMismatch(self.len, other.len));
        }
        Ok(())
    }

    fn check_block(&self, block: SlotBlock) -> Result<()> {
        if block.len == 0 || block.end() > self.len {
            return Err(Error::BlockOutOfRange {
                start: block.start,
                end: block.end(),
                len: self.len,
            });
        }
        Ok(())
    }

    /// Slot-wise AND.
    pub fn intersect(&self, other: &SpectrumBitmap) -> Result<SpectrumBitmap> {
        let mut out = self.clone();
        out.intersect_with(other)?;
        Ok(out)
    }

    pub fn intersect_with(&mut self, other: &SpectrumBitmap) -> Result<()> {
        self.check_len(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
        Ok(())
    }

    /// Marks every slot that is free in `other` as free here too.
    pub fn union_with(&mut self, other: &SpectrumBitmap) -> Result<()> {
        self.check_len(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    /// Index of the next free slot at or after `from`.
    fn next_free(&self, from: usize) -> Option<usize> {
        if from >= self.len {
            return None;
        }
        let mut w = from / WORD;
        let mut word = self.words[w] & (u64::MAX << (from % WORD));
        loop {
            if word != 0 {
                let i = w * WORD + word.trailing_zeros() as usize;
                return (i < self.len).then_some(i);
            }
            w += 1;
            if w == self.words.len() {
                return None;
            }
            word = self.words[w];
        }
    }

    /// Index of the next busy slot at or after `from`, or `len` if none.
    fn next_busy(&self, from: usize) -> usize {
        if from >= self.len {
            return self.len;
        }
        let mut w = from / WORD;
        let mut word = !self.words[w] & (u64::MAX << (from % WORD));
        loop {
            if word != 0 {
                return (w * WORD + word.trailing_zeros() as usize).min(self.len);
            }
            w += 1;
            if w == self.words.len() {
                return self.len;
            }
            word = !self.words[w];
        }
    }

    /// Maximal runs of free slots, lowest index first.
    pub fn free_runs(&self) -> impl Iterator<Item = SlotBlock> + '_ {
        let mut pos = 0;
        std::iter::from_fn(move || {
            let start = self.next_free(pos)?;
            let end = self.next_busy(start);
            pos = end;
            Some(SlotBlock::new(start, end - start))
        })
    }

    pub fn max_free_run(&self) -> usize {
        self.free_runs().map(|r| r.len).max().unwrap_or(0)
    }

    /// True iff some run of at least `need` consecutive free slots exists.
    pub fn is_feasible(&self, need: usize) -> bool {
        need <= self.len && self.free_runs().any(|r| r.len >= need)
    }

    /// Lowest-index block of exactly `need` free slots.
    pub fn first_fit(&self, need: usize) -> Result<SlotBlock> {
        if need == 0 {
            return Err(Error::NoFit { need });
        }
        self.free_runs()
            .find(|r| r.len >= need)
            .map(|r| SlotBlock::new(r.start, need))
            .ok_or(Error::NoFit { need })
    }

    pub fn block_is_free(&self, block: SlotBlock) -> bool {
        block.len > 0 && block.end() <= self.len && self.next_busy(block.start) >= block.end()
    }

    pub fn block_is_busy(&self, block: SlotBlock) -> bool {
        block.len > 0
            && block.end() <= self.len
            && self.next_free(block.start).is_none_or(|i| i >= block.end())
    }

    fn fill(&mut self, block: SlotBlock, free: bool) {
        for i in block.range() {
            let bit = 1u64 << (i % WORD);
            if free {
                self.words[i / WORD] |= bit;
            } else {
                self.words[i / WORD] &= !bit;
            }
        }
    }

    /// Marks a block free regardless of its current state.
    pub fn set_free(&mut self, block: SlotBlock) -> Result<()> {
        self.check_block(block)?;
        self.fill(block, true);
        Ok(())
    }

    /// Marks a block busy regardless of its current state.
    pub fn set_busy(&mut self, block: SlotBlock) -> Result<()> {
        self.check_block(block)?;
        self.fill(block, false);
        Ok(())
    }
}

impl fmt::Debug for SpectrumBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SpectrumBitmap({self})")
    }
}

impl fmt::Display for SpectrumBitmap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.is_free(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for SpectrumBitmap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let flags = s
            .chars()
            .filter(|c| !c.is_whitespace() && *c != '_')
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::Parse {
                    line: 1,
                    msg: format!("unexpected bitmap character `{other}`"),
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_flags(&flags))
    }
}

pub fn intersect(a: &SpectrumBitmap, b: &SpectrumBitmap) -> Result<SpectrumBitmap> {
    a.intersect(b)
}

pub fn is_feasible(bitmap: &SpectrumBitmap, need: usize) -> bool {
    bitmap.is_feasible(need)
}

pub fn first_fit(bitmap: &SpectrumBitmap, need: usize) -> Result<SlotBlock> {
    bitmap.first_fit(need)
}

/// Number of slots for a demand: the payload rounded up to whole slots plus
/// the guard band rounded up to whole slots.
pub fn demand_to_slots(rate_gbps: f64, slot_ghz: f64, guard_ghz: f64) -> usize {
    fn whole_slots(x: f64, slot: f64) -> usize {
        // Tolerate representation error in exact multiples (e.g. 100 / 12.5).
        let q = x / slot;
        let r = q.round();
        if (q - r).abs() < 1e-9 {
            r as usize
        } else {
            q.ceil() as usize
        }
    }
    whole_slots(rate_gbps, slot_ghz) + whole_slots(guard_ghz, slot_ghz)
}

/// Occupies `block` on every bitmap, or on none of them.
pub fn allocate(bitmaps: &mut [&mut SpectrumBitmap], block: SlotBlock) -> Result<()> {
    for (i, b) in bitmaps.iter().enumerate() {
        b.check_block(block)?;
        if !b.block_is_free(block) {
            return Err(Error::Conflict(crate::topology::LinkId(i)));
        }
    }
    for b in bitmaps.iter_mut() {
        b.fill(block, false);
    }
    Ok(())
}

/// Frees `block` on every bitmap, or on none of them.
pub fn release(bitmaps: &mut [&mut SpectrumBitmap], block: SlotBlock) -> Result<()> {
    for (i, b) in bitmaps.iter().enumerate() {
        b.check_block(block)?;
        if !b.block_is_busy(block) {
            return Err(Error::DoubleFree(crate::topology::LinkId(i)));
        }
    }
    for b in bitmaps.iter_mut() {
        b.fill(block, true);
    }
    Ok(())
}
