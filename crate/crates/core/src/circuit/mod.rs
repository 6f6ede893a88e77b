//! Gate-level IR, Trotter circuit emission, statevector simulation and gate
//! accounting.

pub mod emit;
pub mod gate;
pub mod lower;
pub mod sim;
pub mod stats;

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use emit::{ancilla_prep, emit_trotter_circuit, trotter_program, TrotterProgram};
pub use gate::{Control, Gate, GateRecord};
pub use lower::{lower_gate, mcrz_lowering, Lowered};
pub use sim::{simulate, simulate_checked, StateVector};
pub use stats::{gate_stats, GateStats, StatsBuilder};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CircuitMeta {
    pub scenario: String,
    pub dt: f64,
    pub steps: usize,
    pub n_system: usize,
    pub n_ancilla: usize,
    /// Phase dropped from the gate list (the circuit implements
    /// `e^{i·global_phase}` times the product of its gates).
    pub global_phase: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    pub n_qubits: usize,
    pub gates: Vec<Gate>,
    pub meta: CircuitMeta,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            ..Default::default()
        }
    }

    pub fn push(&mut self, g: Gate) -> Result<()> {
        g.validate(self.n_qubits)?;
        self.gates.push(g);
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.gates.iter().try_for_each(|g| g.validate(self.n_qubits))
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// JSON export: `{"n_qubits", "meta", "gates": [{kind, qubits, angle, ..}]}`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            n_qubits: usize,
            meta: &'a CircuitMeta,
            gates: Vec<GateRecord>,
        }
        Ok(serde_json::to_string_pretty(&Export {
            n_qubits: self.n_qubits,
            meta: &self.meta,
            gates: self.gates.iter().map(Gate::record).collect(),
        })?)
    }
}
