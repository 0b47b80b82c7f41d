use crate::scheduler::GlitchPhase;
use crate::sram::{AccessMode, ArrayId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("transform size {0} is not a power of two >= 2")]
    InvalidSize(usize),
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {q} is not congruent to 1 mod {n}")]
    NoRootOfUnity { q: u64, n: usize },
    #[error("modulus {q} does not fit in {bitwidth} bits")]
    BitwidthTooSmall { q: u64, bitwidth: u32 },
    #[error("unsupported bit width {0} (expected 2..=32)")]
    UnsupportedBitwidth(u32),
    #[error("expected {expected} coefficients, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("value {value} is out of range for modulus {q}")]
    ValueOutOfRange { value: u64, q: u64 },

    #[error("sub-array dimensions must be non-zero (got {rows}x{cols})")]
    InvalidDimensions { rows: usize, cols: usize },
    #[error("sub-array {array} cannot switch from {from:?} to {to:?} within cycle {cycle} phase {phase:?}")]
    ModeSwitchMidPhase {
        array: ArrayId,
        from: AccessMode,
        to: AccessMode,
        cycle: u64,
        phase: GlitchPhase,
    },
    #[error("sub-array {array} is in {found:?} mode, operation needs {expected:?}")]
    WrongMode {
        array: ArrayId,
        expected: AccessMode,
        found: AccessMode,
    },
    #[error("address row {row}, column {col} (+{width}) is outside a {rows}x{cols} sub-array")]
    AddressOutOfRange {
        row: usize,
        col: usize,
        width: usize,
        rows: usize,
        cols: usize,
    },
    #[error("lane vector has {found} bits, sub-array has {expected} rows")]
    LaneWidth { expected: usize, found: usize },

    #[error("unit {lane} is in the middle of a serial pass")]
    UnitBusy { lane: usize },
    #[error("unit {lane}: expected bit {expected}, got bit {found}")]
    BitOrder {
        lane: usize,
        expected: u32,
        found: u32,
    },
    #[error("unit {lane} has no serial pass in progress")]
    NoActivePass { lane: usize },
    #[error("unit {lane}: latch is empty")]
    EmptyLatch { lane: usize },
    #[error("units on lanes {a} and {b} are not connected by a channel")]
    UnpairedLanes { a: usize, b: usize },

    #[error("phase {next:?} cannot follow {current:?} in cycle {cycle}")]
    PhaseOrder {
        cycle: u64,
        current: GlitchPhase,
        next: GlitchPhase,
    },
    #[error("operand arrangement check failed: {0}")]
    Arrangement(String),
    #[error("cycle ledger violated: {0}")]
    Ledger(String),
    #[error("trace check failed: {0}")]
    Trace(String),
    #[error("invalid calibration: {0}")]
    Calibration(String),
    #[error("clock frequency must be positive (got {0} MHz)")]
    ZeroFrequency(f64),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}
