use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::{GlitchPhase, Stamp};
use crate::error::{Error, Result};

/// Number of times each glitch phase fired.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCounts {
    pub select: u64,
    pub read: u64,
    pub compute: u64,
    pub write_back: u64,
}

impl PhaseCounts {
    fn bump(&mut self, phase: GlitchPhase) {
        match phase {
            GlitchPhase::Select => self.select += 1,
            GlitchPhase::Read => self.read += 1,
            GlitchPhase::Compute => self.compute += 1,
            GlitchPhase::WriteBack => self.write_back += 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceOp {
    ModeIdle,
    ModeRowPort,
    ModeColumnPort,
    RowRead,
    RowWrite,
    CopyBack,
    ColRead,
    ColWrite,
    Latch,
    Exchange,
    Modmul,
    Addsub,
    Correct,
    Overhead,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Port {
    Idle,
    Row,
    Column,
}

impl TraceOp {
    fn port(self) -> Option<Port> {
        match self {
            TraceOp::ModeIdle => Some(Port::Idle),
            TraceOp::ModeRowPort | TraceOp::RowRead | TraceOp::RowWrite | TraceOp::CopyBack => {
                Some(Port::Row)
            }
            TraceOp::ModeColumnPort | TraceOp::ColRead | TraceOp::ColWrite => Some(Port::Column),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceAddress {
    pub array: String,
    pub row: Option<usize>,
    pub col: usize,
}

/// One event of the per-phase trace. Field order is the serialized order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub phase: GlitchPhase,
    pub unit: String,
    pub op: TraceOp,
    pub address: Option<TraceAddress>,
    pub data: Option<u64>,
}

/// The authoritative cycle counter. Phases inside a cycle must be entered in
/// glitch order; the optional trace records what happened in each.
#[derive(Debug, Default)]
pub struct Ledger {
    cycle: u64,
    phase: Option<GlitchPhase>,
    counts: PhaseCounts,
    trace: Option<Vec<TraceEvent>>,
}

impl Ledger {
    pub fn new(trace: bool) -> Self {
        Self {
            trace: trace.then(Vec::new),
            ..Self::default()
        }
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn counts(&self) -> PhaseCounts {
        self.counts
    }

    pub fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    pub fn enter(&mut self, phase: GlitchPhase) -> Result<Stamp> {
        if let Some(current) = self.phase {
            if phase <= current {
                return Err(Error::PhaseOrder {
                    cycle: self.cycle,
                    current,
                    next: phase,
                });
            }
        }
        self.phase = Some(phase);
        self.counts.bump(phase);
        Ok(Stamp {
            cycle: self.cycle,
            phase,
        })
    }

    pub fn end_cycle(&mut self) {
        self.cycle += 1;
        self.phase = None;
    }

    /// Records an event in the current phase. No-op when tracing is off.
    pub fn emit(
        &mut self,
        op: TraceOp,
        data: Option<u64>,
        describe: impl FnOnce() -> (String, Option<TraceAddress>),
    ) {
        if let Some(trace) = self.trace.as_mut() {
            let phase = self.phase.expect("events are emitted inside a phase");
            let (unit, address) = describe();
            trace.push(TraceEvent {
                cycle: self.cycle,
                phase,
                unit,
                op,
                address,
                data,
            });
        }
    }

    pub fn take_trace(&mut self) -> Option<Vec<TraceEvent>> {
        self.trace.take()
    }
}

/// Serializes a trace as JSON lines.
pub fn write_trace<W: Write>(mut out: W, events: &[TraceEvent]) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_trace(text: &str) -> std::result::Result<Vec<TraceEvent>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TraceSummary {
    pub events: usize,
    pub cycles: u64,
    pub port_accesses: usize,
}

/// Replays a trace and checks that cycle numbers never decrease, phases
/// inside a cycle never go backwards, and no sub-array is driven through
/// two different ports within one phase.
pub fn validate_trace(events: &[TraceEvent]) -> Result<TraceSummary> {
    let mut summary = TraceSummary {
        events: events.len(),
        ..TraceSummary::default()
    };
    let mut last: Option<(u64, GlitchPhase)> = None;
    let mut ports: BTreeMap<&str, Port> = BTreeMap::new();
    for (i, e) in events.iter().enumerate() {
        if let Some((cycle, phase)) = last {
            if e.cycle < cycle {
                return Err(Error::Trace(format!(
                    "event {i}: cycle {} after cycle {cycle}",
                    e.cycle
                )));
            }
            if e.cycle == cycle && e.phase < phase {
                return Err(Error::Trace(format!(
                    "event {i}: phase {:?} after {phase:?} in cycle {cycle}",
                    e.phase
                )));
            }
            if (e.cycle, e.phase) != (cycle, phase) {
                ports.clear();
            }
        }
        last = Some((e.cycle, e.phase));
        summary.cycles = summary.cycles.max(e.cycle + 1);

        let (Some(port), Some(addr)) = (e.op.port(), e.address.as_ref()) else {
            continue;
        };
        if port != Port::Idle {
            summary.port_accesses += 1;
        }
        match ports.get(addr.array.as_str()) {
            Some(&held) if held != port && held != Port::Idle && port != Port::Idle => {
                return Err(Error::Trace(format!(
                    "event {i}: array {} used as {port:?} and {held:?} in cycle {} phase {:?}",
                    addr.array, e.cycle, e.phase
                )));
            }
            _ => {
                ports.insert(addr.array.as_str(), port);
            }
        }
    }
    Ok(summary)
}
