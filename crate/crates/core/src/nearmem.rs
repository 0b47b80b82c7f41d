//! Per-row near-memory compute unit.
//!
//! Each unit has two operand latches fed one bit per cycle, a full-adder
//! slice with a stored carry for bit-serial add/sub, a result latch, and a
//! Barrett multiplier modeled as a fixed-latency box. Subtraction is
//! `a + !b + 1`: the subtrahend arrives inverted and the carry is preset.

use crate::error::{Error, Result};
use crate::field::{Barrett, NttParams};
use crate::transform::{Direction, TwiddleTable};

/// Cycles charged for one modular multiplication.
pub const MODMUL_CYCLES: u32 = 16;

/// Cycles charged for the conditional `±q` after a serial add/sub.
pub const CORRECTION_CYCLES: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AluOp {
    Add,
    Sub,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LatchId {
    A,
    B,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Latch {
    bits: u64,
    filled: u32,
}

impl Latch {
    fn full(width: u32, word: u64) -> Self {
        Self {
            bits: word,
            filled: width,
        }
    }

    fn value(&self, width: u32) -> Option<u64> {
        (self.filled == width).then_some(self.bits)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct SerialPass {
    op: AluOp,
    next_bit: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NearMemUnit {
    lane: usize,
    width: u32,
    latch_a: Latch,
    latch_b: Latch,
    carry: bool,
    result: Latch,
    pass: Option<SerialPass>,
}

impl NearMemUnit {
    pub fn new(lane: usize, width: u32) -> Self {
        debug_assert!((1..=64).contains(&width));
        Self {
            lane,
            width,
            latch_a: Latch::default(),
            latch_b: Latch::default(),
            carry: false,
            result: Latch::default(),
            pass: None,
        }
    }

    pub fn lane(&self) -> usize {
        self.lane
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn carry(&self) -> bool {
        self.carry
    }

    pub fn is_busy(&self) -> bool {
        self.pass.is_some()
    }

    fn mask(&self) -> u64 {
        if self.width == 64 {
            u64::MAX
        } else {
            (1u64 << self.width) - 1
        }
    }

    fn latch_mut(&mut self, which: LatchId) -> &mut Latch {
        match which {
            LatchId::A => &mut self.latch_a,
            LatchId::B => &mut self.latch_b,
        }
    }

    fn latch_ref(&self, which: LatchId) -> &Latch {
        match which {
            LatchId::A => &self.latch_a,
            LatchId::B => &self.latch_b,
        }
    }

    /// A fully loaded latch value, or `None` while it is empty or filling.
    pub fn latch(&self, which: LatchId) -> Option<u64> {
        self.latch_ref(which).value(self.width)
    }

    pub fn result(&self) -> Option<u64> {
        self.result.value(self.width)
    }

    /// Latches bit `index` of an operand. Index 0 starts a new word; later
    /// indices must arrive in order. Streaming during a serial pass is how
    /// the adder is fed.
    pub fn load_bit(&mut self, which: LatchId, index: u32, bit: bool) -> Result<()> {
        let (lane, width) = (self.lane, self.width);
        let latch = self.latch_mut(which);
        if index == 0 {
            *latch = Latch::default();
        }
        if index != latch.filled || index >= width {
            return Err(Error::BitOrder {
                lane,
                expected: latch.filled,
                found: index,
            });
        }
        latch.bits |= (bit as u64) << index;
        latch.filled += 1;
        Ok(())
    }

    /// Loads a whole word LSB first. Returns the cycles charged (`L`).
    pub fn serial_load(&mut self, which: LatchId, word: u64) -> Result<u64> {
        if self.is_busy() {
            return Err(Error::UnitBusy { lane: self.lane });
        }
        for i in 0..self.width {
            self.load_bit(which, i, (word >> i) & 1 == 1)?;
        }
        Ok(self.width as u64)
    }

    /// Places a word arriving over an inter-unit channel into latch B.
    pub fn receive(&mut self, word: u64) -> Result<()> {
        if self.is_busy() {
            return Err(Error::UnitBusy { lane: self.lane });
        }
        self.latch_b = Latch::full(self.width, word & self.mask());
        Ok(())
    }

    /// Copies latch A into latch B, staging it for a channel exchange.
    pub fn stage_for_exchange(&mut self) -> Result<()> {
        let word = self
            .latch(LatchId::A)
            .ok_or(Error::EmptyLatch { lane: self.lane })?;
        self.latch_b = Latch::full(self.width, word);
        Ok(())
    }

    /// Bit `index` of a loaded latch, for write-back passes.
    pub fn latch_bit(&self, which: LatchId, index: u32) -> Result<bool> {
        let word = self
            .latch(which)
            .ok_or(Error::EmptyLatch { lane: self.lane })?;
        Ok((word >> index) & 1 == 1)
    }

    pub fn result_bit(&self, index: u32) -> Result<bool> {
        let word = self.result().ok_or(Error::EmptyLatch { lane: self.lane })?;
        Ok((word >> index) & 1 == 1)
    }

    /// Resets the carry (add) or presets it to 1 (sub) and opens a pass.
    pub fn begin_addsub(&mut self, op: AluOp) -> Result<()> {
        if self.is_busy() {
            return Err(Error::UnitBusy { lane: self.lane });
        }
        self.carry = op == AluOp::Sub;
        self.result = Latch::default();
        self.pass = Some(SerialPass { op, next_bit: 0 });
        Ok(())
    }

    /// One full-adder step: `s = a ^ b ^ c`, `c' = maj(a, b, c)`.
    pub fn addsub_step(&mut self, op: AluOp, bit_index: u32) -> Result<bool> {
        let lane = self.lane;
        let pass = self.pass.ok_or(Error::NoActivePass { lane })?;
        if pass.op != op || pass.next_bit != bit_index || bit_index >= self.width {
            return Err(Error::BitOrder {
                lane,
                expected: pass.next_bit,
                found: bit_index,
            });
        }
        if self.latch_a.filled <= bit_index || self.latch_b.filled <= bit_index {
            return Err(Error::EmptyLatch { lane });
        }
        let a = (self.latch_a.bits >> bit_index) & 1 == 1;
        let b = (self.latch_b.bits >> bit_index) & 1 == 1;
        let c = self.carry;
        let s = a ^ b ^ c;
        self.carry = (a & b) | (a & c) | (b & c);
        self.result.bits |= (s as u64) << bit_index;
        self.result.filled += 1;
        self.pass = Some(SerialPass {
            op,
            next_bit: bit_index + 1,
        });
        Ok(s)
    }

    /// Raw `L`-bit sum and carry-out of a completed pass, before correction.
    pub fn raw_sum(&self) -> Result<(u64, bool)> {
        match self.pass {
            Some(p) if p.next_bit == self.width => Ok((self.result.bits, self.carry)),
            Some(p) => Err(Error::BitOrder {
                lane: self.lane,
                expected: p.next_bit,
                found: self.width,
            }),
            None => Err(Error::NoActivePass { lane: self.lane }),
        }
    }

    /// Applies the final modular correction and closes the pass. For add:
    /// subtract `q` when the sum overflowed or reached `q`. For sub: add `q`
    /// when a borrow occurred (carry-out 0).
    pub fn finish_addsub(&mut self, q: u64) -> Result<u64> {
        let (raw, carry) = self.raw_sum()?;
        let op = self.pass.map(|p| p.op).expect("pass checked above");
        let mask = self.mask();
        let value = match op {
            AluOp::Add if carry || raw >= q => raw.wrapping_sub(q) & mask,
            AluOp::Sub if !carry => raw.wrapping_add(q) & mask,
            _ => raw,
        };
        self.result = Latch::full(self.width, value);
        self.pass = None;
        Ok(value)
    }

    /// The full serial add/sub on the latched operands, both `< q`. For sub
    /// the unit inverts latch B itself as the subtrahend is read out.
    pub fn run_addsub(&mut self, op: AluOp, q: u64) -> Result<u64> {
        let a = self.latch(LatchId::A).ok_or(Error::EmptyLatch { lane: self.lane })?;
        let b = self.latch(LatchId::B).ok_or(Error::EmptyLatch { lane: self.lane })?;
        for v in [a, b] {
            if v >= q {
                return Err(Error::ValueOutOfRange { value: v, q });
            }
        }
        if op == AluOp::Sub {
            self.latch_b.bits = !b & self.mask();
        }
        self.begin_addsub(op)?;
        for i in 0..self.width {
            self.addsub_step(op, i)?;
        }
        self.finish_addsub(q)
    }

    /// Modular multiplication into the result latch. Returns the product and
    /// the fixed cycle charge.
    pub fn run_modmul(&mut self, a: u64, b: u64, barrett: &Barrett) -> Result<(u64, u32)> {
        if self.is_busy() {
            return Err(Error::UnitBusy { lane: self.lane });
        }
        let q = barrett.modulus();
        for v in [a, b] {
            if v >= q {
                return Err(Error::ValueOutOfRange { value: v, q });
            }
        }
        let product = barrett.mul(a, b);
        self.result = Latch::full(self.width, product);
        Ok((product, MODMUL_CYCLES))
    }
}

/// Swaps the channel-facing latches (latch B) of two units on the same lane.
pub fn exchange_operands(x: &mut NearMemUnit, y: &mut NearMemUnit) -> Result<()> {
    if x.lane != y.lane {
        return Err(Error::UnpairedLanes {
            a: x.lane,
            b: y.lane,
        });
    }
    for u in [&*x, &*y] {
        if u.is_busy() {
            return Err(Error::UnitBusy { lane: u.lane });
        }
        if u.latch(LatchId::B).is_none() {
            return Err(Error::EmptyLatch { lane: u.lane });
        }
    }
    std::mem::swap(&mut x.latch_b, &mut y.latch_b);
    Ok(())
}

/// Twiddle-factor memory: a read-only copy of the transform table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwiddleRom {
    direction: Direction,
    table: Vec<u64>,
}

impl TwiddleRom {
    pub fn load(table: &TwiddleTable, direction: Direction) -> Self {
        Self {
            direction,
            table: table.get(direction).to_vec(),
        }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn get(&self, index: usize) -> u64 {
        self.table[index]
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }
}

/// Convenience for tests and tools: serial add/sub of two field elements on
/// a fresh unit.
pub fn serial_addsub(a: u64, b: u64, op: AluOp, params: &NttParams) -> Result<u64> {
    let mut unit = NearMemUnit::new(0, params.bitwidth());
    unit.serial_load(LatchId::A, a)?;
    unit.serial_load(LatchId::B, b)?;
    unit.run_addsub(op, params.q())
}
