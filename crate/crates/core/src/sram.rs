//! Behavioral model of a 10T-SRAM sub-array.
//!
//! Two mutually exclusive access paths are modeled. The row port moves one
//! bit column per call across every row at once, which is how all
//! near-memory lanes are fed in parallel. The column port moves one word
//! of one row to or from external I/O. Row-port reads are destructive;
//! the cells read are left at zero until rewritten.
//!
//! Words are stored LSB first starting at their base column.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheduler::Stamp;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArrayId {
    A,
    B,
}

impl fmt::Display for ArrayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArrayId::A => f.write_str("A"),
            ArrayId::B => f.write_str("B"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessMode {
    #[default]
    Idle,
    RowPort,
    ColumnPort,
}

/// Word-line levels driven for a mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WordLines {
    pub rwl: bool,
    pub hwl: bool,
    pub cwl: bool,
}

impl AccessMode {
    pub fn word_lines(self) -> WordLines {
        match self {
            AccessMode::Idle => WordLines {
                rwl: false,
                hwl: false,
                cwl: false,
            },
            AccessMode::RowPort => WordLines {
                rwl: true,
                hwl: true,
                cwl: false,
            },
            AccessMode::ColumnPort => WordLines {
                rwl: true,
                hwl: false,
                cwl: true,
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WordAddress {
    pub array: ArrayId,
    pub row: usize,
    pub col_base: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SramSubArray {
    id: ArrayId,
    rows: usize,
    cols: usize,
    word_bits: usize,
    bits: Vec<bool>,
    mode: AccessMode,
    // Last (stamp, mode) the array was configured or accessed in.
    touched: Option<(Stamp, AccessMode)>,
}

impl SramSubArray {
    pub fn new(id: ArrayId, rows: usize, cols: usize, word_bits: u32) -> Result<Self> {
        let word_bits = word_bits as usize;
        if rows == 0 || cols == 0 || word_bits == 0 {
            return Err(Error::InvalidDimensions { rows, cols });
        }
        if word_bits > cols {
            return Err(Error::AddressOutOfRange {
                row: 0,
                col: 0,
                width: word_bits,
                rows,
                cols,
            });
        }
        Ok(Self {
            id,
            rows,
            cols,
            word_bits,
            bits: vec![false; rows * cols],
            mode: AccessMode::Idle,
            touched: None,
        })
    }

    pub fn id(&self) -> ArrayId {
        self.id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn word_bits(&self) -> u32 {
        self.word_bits as u32
    }

    pub fn mode(&self) -> AccessMode {
        self.mode
    }

    /// Changes the port configuration. A mode fixed in one phase cannot be
    /// replaced by another active mode within the same phase; dropping to
    /// `Idle` is always allowed.
    pub fn set_access_mode(&mut self, mode: AccessMode, at: Stamp) -> Result<()> {
        if let Some((stamp, held)) = self.touched {
            if stamp == at && held != mode && mode != AccessMode::Idle && held != AccessMode::Idle {
                return Err(Error::ModeSwitchMidPhase {
                    array: self.id,
                    from: held,
                    to: mode,
                    cycle: at.cycle,
                    phase: at.phase,
                });
            }
        }
        self.mode = mode;
        self.touched = Some((at, mode));
        Ok(())
    }

    fn require(&self, expected: AccessMode) -> Result<()> {
        if self.mode != expected {
            return Err(Error::WrongMode {
                array: self.id,
                expected,
                found: self.mode,
            });
        }
        Ok(())
    }

    fn check_col(&self, col: usize) -> Result<()> {
        if col >= self.cols {
            return Err(Error::AddressOutOfRange {
                row: 0,
                col,
                width: 1,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    fn check_word(&self, row: usize, col_base: usize) -> Result<()> {
        if row >= self.rows || col_base + self.word_bits > self.cols {
            return Err(Error::AddressOutOfRange {
                row,
                col: col_base,
                width: self.word_bits,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    /// Row-port read of bit column `col` across all rows. One cycle.
    pub fn row_read(&mut self, col: usize) -> Result<Vec<bool>> {
        self.require(AccessMode::RowPort)?;
        self.check_col(col)?;
        let cols = self.cols;
        Ok((0..self.rows)
            .map(|r| std::mem::take(&mut self.bits[r * cols + col]))
            .collect())
    }

    /// Row-port write of `lane_bits` into bit column `col`. One cycle.
    pub fn row_write(&mut self, col: usize, lane_bits: &[bool]) -> Result<()> {
        self.require(AccessMode::RowPort)?;
        self.check_col(col)?;
        if lane_bits.len() != self.rows {
            return Err(Error::LaneWidth {
                expected: self.rows,
                found: lane_bits.len(),
            });
        }
        for (r, &bit) in lane_bits.iter().enumerate() {
            self.bits[r * self.cols + col] = bit;
        }
        Ok(())
    }

    /// Column-port write of one word. Returns the cost in bit cycles (`L`).
    pub fn column_write(&mut self, row: usize, col_base: usize, word: u64) -> Result<u64> {
        self.require(AccessMode::ColumnPort)?;
        self.check_word(row, col_base)?;
        self.store_word(row, col_base, word);
        Ok(self.word_bits as u64)
    }

    /// Column-port read of one word. Non-destructive. Returns the word and
    /// its cost in bit cycles (`L`).
    pub fn column_read(&mut self, row: usize, col_base: usize) -> Result<(u64, u64)> {
        self.require(AccessMode::ColumnPort)?;
        self.check_word(row, col_base)?;
        Ok((self.peek_word(row, col_base), self.word_bits as u64))
    }

    /// Rewrites a word consumed by a destructive row-port read. Returns the
    /// cost in cycles (`L`).
    pub fn copy_back(&mut self, addr: WordAddress, word: u64) -> Result<u64> {
        self.require(AccessMode::RowPort)?;
        self.check_word(addr.row, addr.col_base)?;
        self.store_word(addr.row, addr.col_base, word);
        Ok(self.word_bits as u64)
    }

    fn store_word(&mut self, row: usize, col_base: usize, word: u64) {
        let base = row * self.cols + col_base;
        for i in 0..self.word_bits {
            self.bits[base + i] = (word >> i) & 1 == 1;
        }
    }

    /// Inspects a word without going through a port.
    pub fn peek_word(&self, row: usize, col_base: usize) -> u64 {
        let base = row * self.cols + col_base;
        (0..self.word_bits).fold(0u64, |acc, i| acc | (self.bits[base + i] as u64) << i)
    }

    pub fn bit(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    /// Debug dump: one line per row, `'0'`/`'1'` per column.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for row in self.bits.chunks(self.cols) {
            out.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
            out.push('\n');
        }
        out
    }

    /// Hash of the bit matrix only, independent of mode bookkeeping.
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.bits.hash(&mut h);
        h.finish()
    }
}
