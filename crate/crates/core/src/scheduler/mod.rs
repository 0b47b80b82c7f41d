//! Cycle-accurate scheduling of the three-stage butterfly dataflow over the
//! SRAM sub-arrays and their near-memory units.

mod ledger;
mod stats;

use serde::{Deserialize, Serialize};

pub use ledger::{
    read_trace, validate_trace, write_trace, Ledger, PhaseCounts, TraceAddress, TraceEvent,
    TraceOp, TraceSummary,
};
pub use stats::{
    report_stats, stage3_cycles, Calibration, CycleStats, LayerCycles, Operation, PhaseEnergy,
    StatsReport,
};

use crate::error::{Error, Result};
use crate::nearmem::{exchange_operands, AluOp, LatchId, NearMemUnit, TwiddleRom, MODMUL_CYCLES};
use crate::sram::{AccessMode, ArrayId, SramSubArray};
use crate::transform::{bit_reverse_permute, Direction, Ntt, Polynomial};
use stats::StatsParts;

/// Sub-phases of one clock cycle, in firing order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlitchPhase {
    Select,
    Read,
    Compute,
    WriteBack,
}

pub const PHASE_ORDER: [GlitchPhase; 4] = [
    GlitchPhase::Select,
    GlitchPhase::Read,
    GlitchPhase::Compute,
    GlitchPhase::WriteBack,
];

/// The phase sequence of a cycle. Every cycle uses the same order.
pub fn phase_sequence(_cycle: u64) -> [GlitchPhase; 4] {
    PHASE_ORDER
}

/// A point in time: a cycle and one of its phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stamp {
    pub cycle: u64,
    pub phase: GlitchPhase,
}

/// Word slots along a row. Each slot is `L` bit columns wide.
pub const SLOT_RESIDENT: usize = 0;
pub const SLOT_MIGRATED: usize = 1;
pub const SLOT_PRODUCT: usize = 2;
pub const SLOT_INVERTED: usize = 3;
pub const SLOTS: usize = 4;

/// Where a word lives: a sub-array of a bank and a row (= lane).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Loc {
    pub array: ArrayId,
    pub row: usize,
}

impl Loc {
    pub const fn new(array: ArrayId, row: usize) -> Self {
        Self { array, row }
    }
}

fn array_label(bank: usize, id: ArrayId) -> String {
    format!("{id}{bank}")
}

fn row_addr(bank: usize, id: ArrayId, col: usize) -> Option<TraceAddress> {
    Some(TraceAddress {
        array: array_label(bank, id),
        row: None,
        col,
    })
}

const ARRAYS: [ArrayId; 2] = [ArrayId::A, ArrayId::B];

/// A pair of sub-arrays with one near-memory unit per row each.
struct Bank {
    index: usize,
    a: SramSubArray,
    b: SramSubArray,
    units_a: Vec<NearMemUnit>,
    units_b: Vec<NearMemUnit>,
    /// `layout[i]` is where element `i` resides. Natural order between
    /// transforms, in-place butterfly order while one runs.
    layout: Vec<Loc>,
}

impl Bank {
    fn new(index: usize, n: usize, width: u32) -> Result<Self> {
        let rows = n / 2;
        let cols = SLOTS * width as usize;
        let units = |_| (0..rows).map(|lane| NearMemUnit::new(lane, width)).collect();
        Ok(Self {
            index,
            a: SramSubArray::new(ArrayId::A, rows, cols, width)?,
            b: SramSubArray::new(ArrayId::B, rows, cols, width)?,
            units_a: units(()),
            units_b: units(()),
            layout: (0..n)
                .map(|i| {
                    if i < rows {
                        Loc::new(ArrayId::A, i)
                    } else {
                        Loc::new(ArrayId::B, i - rows)
                    }
                })
                .collect(),
        })
    }

    fn array(&self, id: ArrayId) -> &SramSubArray {
        match id {
            ArrayId::A => &self.a,
            ArrayId::B => &self.b,
        }
    }

    fn array_mut(&mut self, id: ArrayId) -> &mut SramSubArray {
        match id {
            ArrayId::A => &mut self.a,
            ArrayId::B => &mut self.b,
        }
    }

    fn units(&self, id: ArrayId) -> &[NearMemUnit] {
        match id {
            ArrayId::A => &self.units_a,
            ArrayId::B => &self.units_b,
        }
    }

    fn units_mut(&mut self, id: ArrayId) -> &mut [NearMemUnit] {
        match id {
            ArrayId::A => &mut self.units_a,
            ArrayId::B => &mut self.units_b,
        }
    }

    fn unit(&self, at: Loc) -> &NearMemUnit {
        &self.units(at.array)[at.row]
    }

    fn unit_mut(&mut self, at: Loc) -> &mut NearMemUnit {
        &mut self.units_mut(at.array)[at.row]
    }

    /// Every row of both arrays holds exactly one element.
    fn check_layout(&self) -> Result<()> {
        let rows = self.a.rows();
        let mut seen = vec![false; 2 * rows];
        for (i, loc) in self.layout.iter().enumerate() {
            let slot = loc.row + if loc.array == ArrayId::B { rows } else { 0 };
            if loc.row >= rows || std::mem::replace(&mut seen[slot], true) {
                return Err(Error::Arrangement(format!(
                    "bank {}: element {i} maps to an occupied or invalid row",
                    self.index
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
struct RowRead {
    bank: usize,
    array: ArrayId,
    slot: usize,
    latch: LatchId,
}

#[derive(Clone, Copy)]
enum Source {
    LatchA,
    LatchB,
    InvertedLatchB,
    Result,
}

impl Source {
    fn bit(self, unit: &NearMemUnit, i: u32) -> Result<bool> {
        match self {
            Source::LatchA => unit.latch_bit(LatchId::A, i),
            Source::LatchB => unit.latch_bit(LatchId::B, i),
            Source::InvertedLatchB => unit.latch_bit(LatchId::B, i).map(|b| !b),
            Source::Result => unit.result_bit(i),
        }
    }
}

#[derive(Clone, Copy)]
struct RowWrite {
    bank: usize,
    array: ArrayId,
    slot: usize,
    source: Source,
    op: TraceOp,
}

/// A word sent over the inter-unit channel into a unit's latch B.
#[derive(Clone, Copy)]
struct Delivery {
    bank: usize,
    to: Loc,
    word: u64,
}

#[derive(Clone, Copy)]
struct ModmulJob {
    bank: usize,
    at: Loc,
    a: u64,
    b: u64,
}

/// The accelerator: one or more banks driven by a single cycle ledger.
pub struct Accelerator<'a> {
    ntt: &'a Ntt,
    calib: Calibration,
    ledger: Ledger,
    banks: Vec<Bank>,
    forward_rom: TwiddleRom,
    inverse_rom: TwiddleRom,
    layers: Vec<LayerCycles>,
    io_cycles: u64,
    pointwise_cycles: u64,
    modmul_charges: Vec<u64>,
}

impl<'a> Accelerator<'a> {
    pub fn new(ntt: &'a Ntt, calib: Calibration, banks: usize, trace: bool) -> Result<Self> {
        calib.validate()?;
        let p = ntt.params();
        let banks = (0..banks.max(1))
            .map(|i| Bank::new(i, p.n(), p.bitwidth()))
            .collect::<Result<_>>()?;
        Ok(Self {
            ntt,
            calib,
            ledger: Ledger::new(trace),
            banks,
            forward_rom: TwiddleRom::load(ntt.twiddles(), Direction::Forward),
            inverse_rom: TwiddleRom::load(ntt.twiddles(), Direction::Inverse),
            layers: Vec::new(),
            io_cycles: 0,
            pointwise_cycles: 0,
            modmul_charges: Vec::new(),
        })
    }

    pub fn cycle(&self) -> u64 {
        self.ledger.cycle()
    }

    fn width(&self) -> u32 {
        self.ntt.params().bitwidth()
    }

    fn col(&self, slot: usize, bit: u32) -> usize {
        slot * self.width() as usize + bit as usize
    }

    fn bank_ref(&self, bank: usize) -> Result<&Bank> {
        self.banks
            .get(bank)
            .ok_or_else(|| Error::Arrangement(format!("no bank {bank}")))
    }

    fn rom(&self, direction: Direction) -> &TwiddleRom {
        match direction {
            Direction::Forward => &self.forward_rom,
            Direction::Inverse => &self.inverse_rom,
        }
    }

    /// Resident coefficients of a bank in natural order, read without
    /// spending cycles.
    pub fn resident(&self, bank: usize) -> Result<Vec<u64>> {
        let b = self.bank_ref(bank)?;
        Ok(b.layout
            .iter()
            .map(|loc| b.array(loc.array).peek_word(loc.row, SLOT_RESIDENT))
            .collect())
    }

    /// Raw bit dump of one sub-array.
    pub fn dump(&self, bank: usize, array: ArrayId) -> Result<String> {
        Ok(self.bank_ref(bank)?.array(array).dump())
    }

    /// Opens a cycle: `active` arrays take `mode`, every other array idles.
    fn select(&mut self, active: &[(usize, ArrayId)], mode: AccessMode) -> Result<()> {
        let stamp = self.ledger.enter(GlitchPhase::Select)?;
        for bank in self.banks.iter_mut() {
            for id in ARRAYS {
                let want = if active.contains(&(bank.index, id)) {
                    mode
                } else {
                    AccessMode::Idle
                };
                let arr = bank.array_mut(id);
                if arr.mode() == want {
                    continue;
                }
                arr.set_access_mode(want, stamp)?;
                let op = match want {
                    AccessMode::Idle => TraceOp::ModeIdle,
                    AccessMode::RowPort => TraceOp::ModeRowPort,
                    AccessMode::ColumnPort => TraceOp::ModeColumnPort,
                };
                let index = bank.index;
                self.ledger.emit(op, None, || {
                    (format!("{}.wl", array_label(index, id)), row_addr(index, id, 0))
                });
            }
        }
        Ok(())
    }

    fn overhead(&mut self, cycles: u64) -> Result<()> {
        for _ in 0..cycles {
            self.ledger.enter(GlitchPhase::Select)?;
            self.ledger
                .emit(TraceOp::Overhead, None, || ("ctrl".into(), None));
            self.ledger.end_cycle();
        }
        Ok(())
    }

    /// `L` cycles of row-port reads, one bit column per cycle, latched by
    /// every unit of the array. `hook` runs in the Compute phase of the last
    /// cycle, once the words are complete.
    fn row_read_pass<F>(&mut self, reads: &[RowRead], hook: F) -> Result<()>
    where
        F: FnOnce(&mut Self) -> Result<()>,
    {
        let width = self.width();
        let active: Vec<_> = reads.iter().map(|r| (r.bank, r.array)).collect();
        let mut hook = Some(hook);
        for i in 0..width {
            self.select(&active, AccessMode::RowPort)?;
            self.ledger.enter(GlitchPhase::Read)?;
            let mut columns = Vec::with_capacity(reads.len());
            for r in reads {
                let col = self.col(r.slot, i);
                columns.push(self.banks[r.bank].array_mut(r.array).row_read(col)?);
                self.ledger.emit(TraceOp::RowRead, None, || {
                    (
                        format!("{}.row", array_label(r.bank, r.array)),
                        row_addr(r.bank, r.array, col),
                    )
                });
            }
            self.ledger.enter(GlitchPhase::Compute)?;
            for (r, bits) in reads.iter().zip(&columns) {
                let units = self.banks[r.bank].units_mut(r.array);
                for (unit, &bit) in units.iter_mut().zip(bits) {
                    unit.load_bit(r.latch, i, bit)?;
                }
                self.ledger.emit(TraceOp::Latch, Some(i as u64), || {
                    (format!("{}.lanes", array_label(r.bank, r.array)), None)
                });
            }
            if i + 1 == width {
                if let Some(h) = hook.take() {
                    h(self)?;
                }
            }
            self.ledger.end_cycle();
        }
        Ok(())
    }

    /// `L` cycles of row-port writes. Deliveries land in the Compute phase of
    /// the first cycle, ahead of its write-back.
    fn row_write_pass(&mut self, writes: &[RowWrite], deliveries: &[Delivery]) -> Result<()> {
        let width = self.width();
        let active: Vec<_> = writes.iter().map(|w| (w.bank, w.array)).collect();
        for i in 0..width {
            self.select(&active, AccessMode::RowPort)?;
            if i == 0 && !deliveries.is_empty() {
                self.ledger.enter(GlitchPhase::Compute)?;
                self.deliver(deliveries)?;
            }
            self.ledger.enter(GlitchPhase::WriteBack)?;
            for w in writes {
                let col = self.col(w.slot, i);
                let bank = &mut self.banks[w.bank];
                let bits = match w.array {
                    ArrayId::A => &bank.units_a,
                    ArrayId::B => &bank.units_b,
                }
                .iter()
                .map(|u| w.source.bit(u, i))
                .collect::<Result<Vec<_>>>()?;
                bank.array_mut(w.array).row_write(col, &bits)?;
                self.ledger.emit(w.op, None, || {
                    (
                        format!("{}.row", array_label(w.bank, w.array)),
                        row_addr(w.bank, w.array, col),
                    )
                });
            }
            self.ledger.end_cycle();
        }
        Ok(())
    }

    fn deliver(&mut self, deliveries: &[Delivery]) -> Result<()> {
        let mut groups: Vec<(usize, ArrayId, u64)> = Vec::new();
        for d in deliveries {
            self.banks[d.bank].unit_mut(d.to).receive(d.word)?;
            match groups.iter_mut().find(|g| (g.0, g.1) == (d.bank, d.to.array)) {
                Some(g) => g.2 += 1,
                None => groups.push((d.bank, d.to.array, 1)),
            }
        }
        for (bank, id, count) in groups {
            self.ledger.emit(TraceOp::Exchange, Some(count), || {
                (format!("{}.lanes", array_label(bank, id)), None)
            });
        }
        Ok(())
    }

    /// All jobs start together and share the fixed modmul charge.
    fn modmul_pass(&mut self, jobs: &[ModmulJob]) -> Result<()> {
        let barrett = *self.ntt.params().barrett();
        let mut charge = MODMUL_CYCLES;
        for j in jobs {
            let (_, cost) = self.banks[j.bank].unit_mut(j.at).run_modmul(j.a, j.b, &barrett)?;
            charge = cost;
        }
        for c in 0..charge {
            self.ledger.enter(GlitchPhase::Compute)?;
            self.ledger.emit(TraceOp::Modmul, Some(c as u64), || {
                ("units".into(), None)
            });
            self.ledger.end_cycle();
        }
        self.modmul_charges.push(charge as u64);
        Ok(())
    }

    /// Column-port transfer of whole words between the I/O bus and the
    /// resident slot. The bus moves `io_width_bits` per cycle and a word
    /// lands in the cycle its last bit arrives.
    fn column_pass(&mut self, bank: usize, words: &mut [(Loc, u64)], write: bool) -> Result<u64> {
        let width = self.width() as u64;
        let bus = self.calib.io_width_bits;
        let total = words.len() as u64 * width;
        let cycles = total.div_ceil(bus);
        let active = [(bank, ArrayId::A), (bank, ArrayId::B)];
        let (phase, op) = if write {
            (GlitchPhase::WriteBack, TraceOp::ColWrite)
        } else {
            (GlitchPhase::Read, TraceOp::ColRead)
        };
        let mut next = 0usize;
        let mut moved = 0u64;
        for c in 0..cycles {
            self.select(&active, AccessMode::ColumnPort)?;
            self.ledger.enter(phase)?;
            let horizon = ((c + 1) * bus).min(total);
            while next < words.len() && (next as u64 + 1) * width <= horizon {
                let (loc, word) = &mut words[next];
                let arr = self.banks[bank].array_mut(loc.array);
                moved += if write {
                    arr.column_write(loc.row, SLOT_RESIDENT, *word)?
                } else {
                    let (w, cost) = arr.column_read(loc.row, SLOT_RESIDENT)?;
                    *word = w;
                    cost
                };
                let (loc, word) = (*loc, *word);
                self.ledger.emit(op, Some(word), || {
                    (
                        "io".into(),
                        Some(TraceAddress {
                            array: array_label(bank, loc.array),
                            row: Some(loc.row),
                            col: SLOT_RESIDENT,
                        }),
                    )
                });
                next += 1;
            }
            self.ledger.end_cycle();
        }
        if moved != total || next != words.len() {
            return Err(Error::Ledger(format!(
                "column transfer moved {moved} of {total} bits"
            )));
        }
        self.io_cycles += cycles;
        Ok(cycles)
    }

    /// Streams a polynomial into a bank in natural order.
    pub fn load(&mut self, bank: usize, p: &Polynomial) -> Result<u64> {
        let params = self.ntt.params();
        if p.len() != params.n() {
            return Err(Error::LengthMismatch {
                expected: params.n(),
                found: p.len(),
            });
        }
        for &c in p.coeffs() {
            params.check_element(c)?;
        }
        let b = self.bank_ref(bank)?;
        let mut words: Vec<_> = b.layout.iter().copied().zip(p.coeffs().iter().copied()).collect();
        self.column_pass(bank, &mut words, true)
    }

    /// Streams a bank's resident polynomial out in natural order.
    pub fn unload(&mut self, bank: usize) -> Result<Polynomial> {
        let b = self.bank_ref(bank)?;
        let mut words: Vec<_> = b.layout.iter().map(|&l| (l, 0)).collect();
        self.column_pass(bank, &mut words, false)?;
        Ok(Polynomial::from_raw(words.into_iter().map(|(_, w)| w).collect()))
    }

    /// Runs butterfly layer `layer` (0 = widest span) on a bank. `scale`
    /// multiplies every output in the Stage-3 modular tail.
    pub fn run_butterfly_layer(
        &mut self,
        bank: usize,
        layer: u32,
        direction: Direction,
        scale: u64,
    ) -> Result<LayerCycles> {
        let params = self.ntt.params();
        let (n, q) = (params.n(), params.q());
        if layer >= params.log_n() {
            return Err(Error::Arrangement(format!(
                "layer {layer} out of range for n = {n}"
            )));
        }
        let b = self.bank_ref(bank)?;
        b.check_layout()?;
        let half = n / 2;
        let len = half >> layer;
        let rom = self.rom(direction);
        // (t source, u source, twiddle) per butterfly k
        let pairs: Vec<(Loc, Loc, u64)> = (0..half)
            .map(|k| {
                let blk = k / len;
                let j = 2 * blk * len + k % len;
                (b.layout[j], b.layout[j + len], rom.get(blk))
            })
            .collect();
        let both = |slot, latch| {
            [
                RowRead { bank, array: ArrayId::A, slot, latch },
                RowRead { bank, array: ArrayId::B, slot, latch },
            ]
        };
        let write_both = |slot, source, op| {
            [
                RowWrite { bank, array: ArrayId::A, slot, source, op },
                RowWrite { bank, array: ArrayId::B, slot, source, op },
            ]
        };
        let fan_out = |k: usize, word: u64| {
            [
                Delivery { bank, to: Loc::new(ArrayId::A, k), word },
                Delivery { bank, to: Loc::new(ArrayId::B, k), word },
            ]
        };

        // Stage 1: read, route t to both halves, store it, restore residents.
        let start = self.cycle();
        let reads = both(SLOT_RESIDENT, LatchId::A);
        self.row_read_pass(&reads, |s| {
            let bk = &s.banks[bank];
            let deliveries = pairs
                .iter()
                .enumerate()
                .map(|(k, &(t, _, _))| {
                    bk.unit(t)
                        .latch(LatchId::A)
                        .map(|w| fan_out(k, w))
                        .ok_or(Error::EmptyLatch { lane: t.row })
                })
                .collect::<Result<Vec<_>>>()?
                .concat();
            s.deliver(&deliveries)
        })?;
        self.row_write_pass(&write_both(SLOT_MIGRATED, Source::LatchB, TraceOp::RowWrite), &[])?;
        self.row_write_pass(&write_both(SLOT_RESIDENT, Source::LatchA, TraceOp::CopyBack), &[])?;
        self.overhead(self.calib.stage1_overhead)?;
        let stage1 = self.cycle() - start;

        // Stage 2: u * w at u's unit, product routed to both halves.
        let start = self.cycle();
        self.row_read_pass(&both(SLOT_RESIDENT, LatchId::A), |_| Ok(()))?;
        let jobs = pairs
            .iter()
            .map(|&(_, u, w)| {
                let a = self.banks[bank]
                    .unit(u)
                    .latch(LatchId::A)
                    .ok_or(Error::EmptyLatch { lane: u.row })?;
                Ok(ModmulJob { bank, at: u, a, b: w })
            })
            .collect::<Result<Vec<_>>>()?;
        self.modmul_pass(&jobs)?;
        let deliveries = pairs
            .iter()
            .enumerate()
            .map(|(k, &(_, u, _))| {
                self.banks[bank]
                    .unit(u)
                    .result()
                    .map(|w| fan_out(k, w))
                    .ok_or(Error::EmptyLatch { lane: u.row })
            })
            .collect::<Result<Vec<_>>>()?
            .concat();
        self.row_write_pass(&write_both(SLOT_PRODUCT, Source::LatchB, TraceOp::RowWrite), &deliveries)?;
        self.overhead(self.calib.stage2_overhead)?;
        let stage2 = self.cycle() - start;

        // Stage 3: invert the subtrahend in B, then add in A and subtract in B.
        let start = self.cycle();
        let inv_read = [RowRead { bank, array: ArrayId::B, slot: SLOT_PRODUCT, latch: LatchId::B }];
        self.row_read_pass(&inv_read, |_| Ok(()))?;
        let inv_write = [RowWrite {
            bank,
            array: ArrayId::B,
            slot: SLOT_INVERTED,
            source: Source::InvertedLatchB,
            op: TraceOp::RowWrite,
        }];
        self.row_write_pass(&inv_write, &[])?;
        self.serial_addsub_pass(bank)?;

        self.ledger.enter(GlitchPhase::Compute)?;
        {
            let bk = &mut self.banks[bank];
            for unit in bk.units_a.iter_mut().chain(bk.units_b.iter_mut()) {
                unit.finish_addsub(q)?;
            }
        }
        self.ledger
            .emit(TraceOp::Correct, None, || ("units".into(), None));
        self.ledger.end_cycle();

        let jobs = {
            let bk = &self.banks[bank];
            ARRAYS
                .iter()
                .flat_map(|&id| (0..half).map(move |k| Loc::new(id, k)))
                .map(|at| {
                    let a = bk.unit(at).result().ok_or(Error::EmptyLatch { lane: at.row })?;
                    Ok(ModmulJob { bank, at, a, b: scale })
                })
                .collect::<Result<Vec<_>>>()?
        };
        self.modmul_pass(&jobs)?;
        self.row_write_pass(&write_both(SLOT_RESIDENT, Source::Result, TraceOp::RowWrite), &[])?;
        let stage3 = self.cycle() - start;

        let bk = &mut self.banks[bank];
        for k in 0..half {
            let blk = k / len;
            let j = 2 * blk * len + k % len;
            bk.layout[j] = Loc::new(ArrayId::A, k);
            bk.layout[j + len] = Loc::new(ArrayId::B, k);
        }
        let cycles = LayerCycles { stage1, stage2, stage3 };
        self.layers.push(cycles);
        Ok(cycles)
    }

    /// `L` cycles: A units add `t + u`, B units add `t + ~u` with the carry
    /// preset, both streaming operand bits straight from the row port.
    fn serial_addsub_pass(&mut self, bank: usize) -> Result<()> {
        let width = self.width();
        let active = [(bank, ArrayId::A), (bank, ArrayId::B)];
        for i in 0..width {
            self.select(&active, AccessMode::RowPort)?;
            self.ledger.enter(GlitchPhase::Read)?;
            let (c_t, c_u, c_nu) = (
                self.col(SLOT_MIGRATED, i),
                self.col(SLOT_PRODUCT, i),
                self.col(SLOT_INVERTED, i),
            );
            let plan = [
                (ArrayId::A, AluOp::Add, c_t, c_u),
                (ArrayId::B, AluOp::Sub, c_t, c_nu),
            ];
            let mut operands = Vec::with_capacity(2);
            for &(id, _, ct, cu) in &plan {
                let arr = self.banks[bank].array_mut(id);
                operands.push((arr.row_read(ct)?, arr.row_read(cu)?));
                for col in [ct, cu] {
                    self.ledger.emit(TraceOp::RowRead, None, || {
                        (format!("{}.row", array_label(bank, id)), row_addr(bank, id, col))
                    });
                }
            }
            self.ledger.enter(GlitchPhase::Compute)?;
            for (&(id, op, _, _), (ts, us)) in plan.iter().zip(&operands) {
                let units = self.banks[bank].units_mut(id);
                for (unit, (&t, &u)) in units.iter_mut().zip(ts.iter().zip(us)) {
                    if i == 0 {
                        unit.begin_addsub(op)?;
                    }
                    unit.load_bit(LatchId::A, i, t)?;
                    unit.load_bit(LatchId::B, i, u)?;
                    unit.addsub_step(op, i)?;
                }
                self.ledger.emit(TraceOp::Addsub, Some(i as u64), || {
                    (format!("{}.lanes", array_label(bank, id)), None)
                });
            }
            self.ledger.end_cycle();
        }
        Ok(())
    }

    /// All layers of a transform, leaving the result in natural order. The
    /// inverse uses the same dataflow with the inverse ROM and folds `1/n`
    /// into the last layer.
    pub fn transform(&mut self, bank: usize, direction: Direction) -> Result<()> {
        let params = self.ntt.params();
        let log_n = params.log_n();
        let n_inv = params.n_inv();
        for layer in 0..log_n {
            let scale = if direction == Direction::Inverse && layer + 1 == log_n {
                n_inv
            } else {
                1
            };
            self.run_butterfly_layer(bank, layer, direction, scale)?;
        }
        let b = &mut self.banks[bank];
        b.layout = bit_reverse_permute(&b.layout)?;
        Ok(())
    }

    /// Multiplies bank `dst` elementwise by bank `src`. Both read their
    /// resident words, trade them over the channel, and `dst` keeps the
    /// products. Costs one Stage-2-equivalent pass.
    pub fn pointwise(&mut self, dst: usize, src: usize) -> Result<()> {
        if dst == src || self.bank_ref(dst)?.layout != self.bank_ref(src)?.layout {
            return Err(Error::Arrangement(format!(
                "banks {dst} and {src} are not aligned for pointwise product"
            )));
        }
        let start = self.cycle();
        let mut reads = Vec::with_capacity(4);
        for bank in [dst, src] {
            for array in ARRAYS {
                reads.push(RowRead { bank, array, slot: SLOT_RESIDENT, latch: LatchId::A });
            }
        }
        self.row_read_pass(&reads, |s| {
            for bank in s.banks.iter_mut() {
                for u in bank.units_a.iter_mut().chain(bank.units_b.iter_mut()) {
                    u.stage_for_exchange()?;
                }
            }
            let (lo, hi) = s.banks.split_at_mut(dst.max(src));
            let (x, y) = if dst < src {
                (&mut lo[dst], &mut hi[0])
            } else {
                (&mut hi[0], &mut lo[src])
            };
            for id in ARRAYS {
                let lanes = x.units(id).len() as u64;
                for (ux, uy) in x.units_mut(id).iter_mut().zip(y.units_mut(id).iter_mut()) {
                    exchange_operands(ux, uy)?;
                }
                s.ledger.emit(TraceOp::Exchange, Some(lanes), || {
                    (format!("{}.lanes", array_label(dst, id)), None)
                });
            }
            Ok(())
        })?;
        let jobs = {
            let bk = &self.banks[dst];
            ARRAYS
                .iter()
                .flat_map(|&id| (0..bk.units(id).len()).map(move |k| Loc::new(id, k)))
                .map(|at| {
                    let u = bk.unit(at);
                    let a = u.latch(LatchId::A).ok_or(Error::EmptyLatch { lane: at.row })?;
                    let b = u.latch(LatchId::B).ok_or(Error::EmptyLatch { lane: at.row })?;
                    Ok(ModmulJob { bank: dst, at, a, b })
                })
                .collect::<Result<Vec<_>>>()?
        };
        self.modmul_pass(&jobs)?;
        let writes = ARRAYS.map(|array| RowWrite {
            bank: dst,
            array,
            slot: SLOT_RESIDENT,
            source: Source::Result,
            op: TraceOp::RowWrite,
        });
        self.row_write_pass(&writes, &[])?;
        self.overhead(self.calib.stage2_overhead)?;
        self.pointwise_cycles += self.cycle() - start;
        Ok(())
    }

    /// Closes the run. Fails if the per-stage ledger does not add up.
    pub fn finish(mut self, operation: Operation) -> Result<(CycleStats, Option<Vec<TraceEvent>>)> {
        let p = self.ntt.params();
        let stats = CycleStats::new(StatsParts {
            operation,
            n: p.n(),
            q: p.q(),
            bitwidth: p.bitwidth(),
            layers: std::mem::take(&mut self.layers),
            io_cycles: self.io_cycles,
            pointwise_cycles: self.pointwise_cycles,
            modmul_charges: std::mem::take(&mut self.modmul_charges),
            phase_counts: self.ledger.counts(),
            elapsed: self.ledger.cycle(),
        })?;
        Ok((stats, self.ledger.take_trace()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub calibration: Calibration,
    pub freq_mhz: f64,
    pub trace: bool,
}

impl SimConfig {
    pub fn new(freq_mhz: f64) -> Self {
        Self {
            calibration: Calibration::default(),
            freq_mhz,
            trace: false,
        }
    }
}

/// Output of one simulated operation.
#[derive(Clone, Debug)]
pub struct SimRun {
    pub output: Polynomial,
    pub stats: CycleStats,
    pub report: StatsReport,
    pub trace: Option<Vec<TraceEvent>>,
}

fn check_freq(freq_mhz: f64) -> Result<()> {
    if freq_mhz > 0.0 && freq_mhz.is_finite() {
        Ok(())
    } else {
        Err(Error::ZeroFrequency(freq_mhz))
    }
}

fn wrap_up(acc: Accelerator<'_>, op: Operation, output: Polynomial, config: &SimConfig) -> Result<SimRun> {
    let (stats, trace) = acc.finish(op)?;
    let report = report_stats(
        &stats,
        config.freq_mhz,
        config.calibration.phase_energy_nj.as_ref(),
    )?;
    Ok(SimRun {
        output,
        stats,
        report,
        trace,
    })
}

/// Load, transform and unload one polynomial.
pub fn simulate_transform(
    ntt: &Ntt,
    input: &Polynomial,
    direction: Direction,
    config: &SimConfig,
) -> Result<SimRun> {
    check_freq(config.freq_mhz)?;
    let mut acc = Accelerator::new(ntt, config.calibration.clone(), 1, config.trace)?;
    acc.load(0, input)?;
    acc.transform(0, direction)?;
    let output = acc.unload(0)?;
    let op = match direction {
        Direction::Forward => Operation::Ntt,
        Direction::Inverse => Operation::Intt,
    };
    wrap_up(acc, op, output, config)
}

/// Cyclic product: both operands are transformed in their own banks, then
/// multiplied pointwise and inverse-transformed in the first bank.
pub fn simulate_polymul(
    ntt: &Ntt,
    a: &Polynomial,
    b: &Polynomial,
    config: &SimConfig,
) -> Result<SimRun> {
    check_freq(config.freq_mhz)?;
    let mut acc = Accelerator::new(ntt, config.calibration.clone(), 2, config.trace)?;
    acc.load(0, a)?;
    acc.load(1, b)?;
    acc.transform(0, Direction::Forward)?;
    acc.transform(1, Direction::Forward)?;
    acc.pointwise(0, 1)?;
    acc.transform(0, Direction::Inverse)?;
    let output = acc.unload(0)?;
    wrap_up(acc, Operation::Polymul, output, config)
}
