use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gate::Gate;
use super::lower::lower_gate;
use super::Circuit;
use crate::error::Result;

/// Counts after lowering to {X, H, CNOT, PhaseRot}.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GateStats {
    pub two_qubit_count: u64,
    pub single_qubit_count: u64,
    /// Greedy ASAP layering on the lowered gates.
    pub depth: u64,
    /// High-level gate counts before lowering, by kind.
    pub by_kind: BTreeMap<String, u64>,
}

/// Incremental accumulator, so long repeated circuits can be counted
/// without materialising them.
#[derive(Clone, Debug)]
pub struct StatsBuilder {
    n_qubits: usize,
    levels: Vec<u64>,
    stats: GateStats,
}

impl StatsBuilder {
    pub fn new(n_qubits: usize) -> Self {
        StatsBuilder {
            n_qubits,
            levels: vec![0; n_qubits],
            stats: GateStats::default(),
        }
    }

    pub fn add(&mut self, g: &Gate) -> Result<()> {
        *self.stats.by_kind.entry(g.kind().to_string()).or_default() += 1;
        let lowered = lower_gate(g, self.n_qubits)?;
        self.add_lowered(&lowered.gates);
        Ok(())
    }

    /// Adds gates that are already one- or two-qubit primitives.
    pub fn add_lowered(&mut self, gates: &[Gate]) {
        for g in gates {
            let q = g.qubits();
            if q.len() == 2 {
                self.stats.two_qubit_count += 1;
            } else {
                self.stats.single_qubit_count += 1;
            }
            let level = q.iter().map(|&x| self.levels[x]).max().unwrap_or(0) + 1;
            q.iter().for_each(|&x| self.levels[x] = level);
            self.stats.depth = self.stats.depth.max(level);
        }
    }

    pub fn finish(self) -> GateStats {
        self.stats
    }
}

pub fn gate_stats(c: &Circuit) -> Result<GateStats> {
    let mut b = StatsBuilder::new(c.n_qubits);
    for g in &c.gates {
        b.add(g)?;
    }
    Ok(b.finish())
}
