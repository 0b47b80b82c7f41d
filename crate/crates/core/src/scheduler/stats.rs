use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ledger::PhaseCounts;
use crate::error::{Error, Result};
use crate::nearmem::MODMUL_CYCLES;

/// Stage-1/Stage-2 overheads and the I/O bus width are fitted constants, not
/// published figures. With L = 14 the defaults give 295 cycles per layer
/// plus n cycles of I/O, which lands within 0.3% of the 256/512/1024-point
/// reference latencies (14.9, 19.4 and 26.8 µs at 176, 163 and 148 MHz).
/// Only the sum of the two overheads is constrained by those figures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Calibration {
    /// Extra cycles per Stage 1 on top of read + exchanged write + copy-back.
    pub stage1_overhead: u64,
    /// Extra cycles per Stage 2 on top of read + modmul + write-back.
    pub stage2_overhead: u64,
    /// Bits moved per cycle by the column-port I/O interface.
    pub io_width_bits: u64,
    /// Per-phase-activation energy in nJ. Uncalibrated; absent by default.
    pub phase_energy_nj: Option<PhaseEnergy>,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            stage1_overhead: 68,
            stage2_overhead: 68,
            io_width_bits: 28,
            phase_energy_nj: None,
        }
    }
}

impl Calibration {
    pub fn from_json(text: &str) -> Result<Self> {
        let calib: Self =
            serde_json::from_str(text).map_err(|e| Error::Calibration(e.to_string()))?;
        calib.validate()?;
        Ok(calib)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Calibration(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.io_width_bits == 0 {
            return Err(Error::Calibration("io_width_bits must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseEnergy {
    pub select: f64,
    pub read: f64,
    pub compute: f64,
    pub write_back: f64,
}

impl PhaseEnergy {
    pub fn total(&self, counts: &PhaseCounts) -> f64 {
        self.select * counts.select as f64
            + self.read * counts.read as f64
            + self.compute * counts.compute as f64
            + self.write_back * counts.write_back as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCycles {
    pub stage1: u64,
    pub stage2: u64,
    pub stage3: u64,
}

impl LayerCycles {
    pub fn total(&self) -> u64 {
        self.stage1 + self.stage2 + self.stage3
    }
}

/// Stage 3 costs `4L + 17` cycles.
pub const fn stage3_cycles(bitwidth: u32) -> u64 {
    4 * bitwidth as u64 + 17
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operation {
    Ntt,
    Intt,
    Polymul,
}

/// Cycle ledger of one simulated run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleStats {
    pub operation: Operation,
    pub n: usize,
    pub q: u64,
    pub bitwidth: u32,
    pub layers: u32,
    pub stage1_cycles: Vec<u64>,
    pub stage2_cycles: Vec<u64>,
    pub stage3_cycles: Vec<u64>,
    pub io_cycles: u64,
    pub pointwise_cycles: u64,
    pub total_cycles: u64,
    pub modmul_charges: Vec<u64>,
    pub phase_counts: PhaseCounts,
}

pub(crate) struct StatsParts {
    pub operation: Operation,
    pub n: usize,
    pub q: u64,
    pub bitwidth: u32,
    pub layers: Vec<LayerCycles>,
    pub io_cycles: u64,
    pub pointwise_cycles: u64,
    pub modmul_charges: Vec<u64>,
    pub phase_counts: PhaseCounts,
    pub elapsed: u64,
}

impl CycleStats {
    /// Enforces the Stage-3 law, the fixed modmul charge, and
    /// `total = io + Σ layers + pointwise = elapsed clock cycles`.
    pub(crate) fn new(parts: StatsParts) -> Result<Self> {
        let s3 = stage3_cycles(parts.bitwidth);
        if let Some((i, l)) = parts.layers.iter().enumerate().find(|(_, l)| l.stage3 != s3) {
            return Err(Error::Ledger(format!(
                "layer {i}: stage 3 took {} cycles, expected {s3}",
                l.stage3
            )));
        }
        if let Some(c) = parts.modmul_charges.iter().find(|&&c| c != MODMUL_CYCLES as u64) {
            return Err(Error::Ledger(format!("modmul charged {c} cycles")));
        }
        let total = parts.io_cycles
            + parts.pointwise_cycles
            + parts.layers.iter().map(LayerCycles::total).sum::<u64>();
        if total != parts.elapsed {
            return Err(Error::Ledger(format!(
                "stage sum {total} differs from elapsed {}",
                parts.elapsed
            )));
        }
        Ok(Self {
            operation: parts.operation,
            n: parts.n,
            q: parts.q,
            bitwidth: parts.bitwidth,
            layers: parts.layers.len() as u32,
            stage1_cycles: parts.layers.iter().map(|l| l.stage1).collect(),
            stage2_cycles: parts.layers.iter().map(|l| l.stage2).collect(),
            stage3_cycles: parts.layers.iter().map(|l| l.stage3).collect(),
            io_cycles: parts.io_cycles,
            pointwise_cycles: parts.pointwise_cycles,
            total_cycles: total,
            modmul_charges: parts.modmul_charges,
            phase_counts: parts.phase_counts,
        })
    }

    pub fn layer(&self, i: usize) -> LayerCycles {
        LayerCycles {
            stage1: self.stage1_cycles[i],
            stage2: self.stage2_cycles[i],
            stage3: self.stage3_cycles[i],
        }
    }
}

/// The serialized stats record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    #[serde(flatten)]
    pub stats: CycleStats,
    pub freq_mhz: f64,
    pub latency_us: f64,
    pub throughput_kntts: f64,
    pub energy_nj: Option<f64>,
}

impl StatsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stats serialize")
    }
}

/// Derives latency (`cycles / MHz`), throughput (`1000 / latency`) and the
/// optional energy estimate.
pub fn report_stats(
    stats: &CycleStats,
    freq_mhz: f64,
    energy: Option<&PhaseEnergy>,
) -> Result<StatsReport> {
    if !(freq_mhz > 0.0 && freq_mhz.is_finite()) {
        return Err(Error::ZeroFrequency(freq_mhz));
    }
    let latency_us = stats.total_cycles as f64 / freq_mhz;
    Ok(StatsReport {
        stats: stats.clone(),
        freq_mhz,
        latency_us,
        throughput_kntts: 1000.0 / latency_us,
        energy_nj: energy.map(|e| e.total(&stats.phase_counts)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats_with_total(total: u64) -> CycleStats {
        CycleStats {
            operation: Operation::Ntt,
            n: 256,
            q: 12289,
            bitwidth: 14,
            layers: 0,
            stage1_cycles: vec![],
            stage2_cycles: vec![],
            stage3_cycles: vec![],
            io_cycles: total,
            pointwise_cycles: 0,
            total_cycles: total,
            modmul_charges: vec![],
            phase_counts: PhaseCounts::default(),
        }
    }

    #[test]
    fn latency_and_throughput_arithmetic() {
        let r = report_stats(&stats_with_total(2622), 176.0, None).unwrap();
        assert!((r.latency_us - 14.9).abs() < 0.005, "{}", r.latency_us);
        assert!((r.throughput_kntts - 67.1).abs() < 0.05, "{}", r.throughput_kntts);
        assert_eq!(r.energy_nj, None);

        let r = report_stats(&stats_with_total(3966), 148.0, None).unwrap();
        assert!((r.latency_us - 26.8).abs() < 0.005);
        assert!((r.throughput_kntts - 37.3).abs() < 0.05);

        assert_eq!(
            report_stats(&stats_with_total(1), 0.0, None),
            Err(Error::ZeroFrequency(0.0))
        );
    }

    #[test]
    fn energy_hook_sums_phase_counts() {
        let mut s = stats_with_total(10);
        s.phase_counts = PhaseCounts {
            select: 10,
            read: 4,
            compute: 2,
            write_back: 1,
        };
        let e = PhaseEnergy {
            select: 0.5,
            read: 1.0,
            compute: 2.0,
            write_back: 4.0,
        };
        let r = report_stats(&s, 100.0, Some(&e)).unwrap();
        assert_eq!(r.energy_nj, Some(5.0 + 4.0 + 4.0 + 4.0));
    }

    #[test]
    fn constructor_enforces_ledger_laws() {
        let parts = |stage3, elapsed, charges: Vec<u64>| StatsParts {
            operation: Operation::Ntt,
            n: 4,
            q: 17,
            bitwidth: 5,
            layers: vec![LayerCycles {
                stage1: 10,
                stage2: 20,
                stage3,
            }],
            io_cycles: 4,
            pointwise_cycles: 0,
            modmul_charges: charges,
            phase_counts: PhaseCounts::default(),
            elapsed,
        };
        assert!(CycleStats::new(parts(37, 71, vec![16])).is_ok());
        assert!(CycleStats::new(parts(36, 70, vec![16])).is_err());
        assert!(CycleStats::new(parts(37, 72, vec![16])).is_err());
        assert!(CycleStats::new(parts(37, 71, vec![15])).is_err());
    }

    #[test]
    fn calibration_parsing() {
        let c = Calibration::from_json("{}").unwrap();
        assert_eq!(c, Calibration::default());
        let c = Calibration::from_json(r#"{"stage1_overhead": 3, "io_width_bits": 14}"#).unwrap();
        assert_eq!((c.stage1_overhead, c.stage2_overhead, c.io_width_bits), (3, 68, 14));
        assert!(Calibration::from_json(r#"{"io_width_bits": 0}"#).is_err());
        assert!(Calibration::from_json(r#"{"bogus": 1}"#).is_err());
        let shipped = include_str!("../../calib/default.json");
        assert_eq!(Calibration::from_json(shipped).unwrap(), Calibration::default());
    }
}
