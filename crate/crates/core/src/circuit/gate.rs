use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A control line: fires when the qubit reads `on_one ? 1 : 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Control {
    pub qubit: usize,
    pub on_one: bool,
}

impl Control {
    pub fn on1(qubit: usize) -> Self {
        Control { qubit, on_one: true }
    }

    pub fn on0(qubit: usize) -> Self {
        Control { qubit, on_one: false }
    }
}

/// Gate set. `PhaseRot(θ) = exp(iθZ/2) = diag(e^{iθ/2}, e^{-iθ/2})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Gate {
    PauliX {
        qubit: usize,
    },
    /// Hadamard.
    BasisSuperpose {
        qubit: usize,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    PhaseRot {
        qubit: usize,
        theta: f64,
    },
    MultiControlledRot {
        controls: Vec<Control>,
        target: usize,
        theta: f64,
    },
    /// QFT over `qubits`, listed least significant first:
    /// `|j⟩ → Σ_k e^{±2πi jk/N} |k⟩ / √N` (`+` forward).
    FourierTransform {
        qubits: Vec<usize>,
        inverse: bool,
    },
    Swap {
        a: usize,
        b: usize,
    },
}

impl Gate {
    pub fn x(qubit: usize) -> Self {
        Gate::PauliX { qubit }
    }

    pub fn h(qubit: usize) -> Self {
        Gate::BasisSuperpose { qubit }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn rz(qubit: usize, theta: f64) -> Self {
        Gate::PhaseRot { qubit, theta }
    }

    pub fn mcrz(controls: Vec<Control>, target: usize, theta: f64) -> Self {
        Gate::MultiControlledRot {
            controls,
            target,
            theta,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Gate::PauliX { .. } => "pauli_x",
            Gate::BasisSuperpose { .. } => "basis_superpose",
            Gate::Cnot { .. } => "cnot",
            Gate::PhaseRot { .. } => "phase_rot",
            Gate::MultiControlledRot { .. } => "multi_controlled_rot",
            Gate::FourierTransform { .. } => "fourier_transform",
            Gate::Swap { .. } => "swap",
        }
    }

    /// Operand qubits; for controlled gates the controls come first.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::PauliX { qubit } | Gate::BasisSuperpose { qubit } | Gate::PhaseRot { qubit, .. } => {
                vec![*qubit]
            }
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::MultiControlledRot { controls, target, .. } => {
                controls.iter().map(|c| c.qubit).chain([*target]).collect()
            }
            Gate::FourierTransform { qubits, .. } => qubits.clone(),
            Gate::Swap { a, b } => vec![*a, *b],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match self {
            Gate::PhaseRot { theta, .. } | Gate::MultiControlledRot { theta, .. } => Some(*theta),
            _ => None,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let q = self.qubits();
        if let Some(bad) = q.iter().find(|&&x| x >= n_qubits) {
            return Err(Error::Range(format!(
                "{} acts on qubit {bad} of a {n_qubits}-qubit register",
                self.kind()
            )));
        }
        let mut sorted = q.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != q.len() {
            return Err(Error::Range(format!("{} has repeated operands {q:?}", self.kind())));
        }
        Ok(())
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::PhaseRot { qubit, theta } => Gate::rz(*qubit, -theta),
            Gate::MultiControlledRot {
                controls,
                target,
                theta,
            } => Gate::mcrz(controls.clone(), *target, -theta),
            Gate::FourierTransform { qubits, inverse } => Gate::FourierTransform {
                qubits: qubits.clone(),
                inverse: !inverse,
            },
            g => g.clone(),
        }
    }

    /// Flat export record.
    pub fn record(&self) -> GateRecord {
        let (polarities, inverse) = match self {
            Gate::MultiControlledRot { controls, .. } => {
                (Some(controls.iter().map(|c| u8::from(c.on_one)).collect()), None)
            }
            Gate::FourierTransform { inverse, .. } => (None, Some(*inverse)),
            _ => (None, None),
        };
        GateRecord {
            kind: self.kind().to_string(),
            qubits: self.qubits(),
            angle: self.angle(),
            polarities,
            inverse,
        }
    }
}

/// Stable export form: `kind`, `qubits` (controls first, target last),
/// `angle`, optional control `polarities` and QFT `inverse` flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateRecord {
    pub kind: String,
    pub qubits: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polarities: Option<Vec<u8>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inverse: Option<bool>,
}

/// Time-ordered inverse of a gate sequence.
pub fn inverse_sequence(gates: &[Gate]) -> Vec<Gate> {
    gates.iter().rev().map(Gate::inverse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(Gate::cnot(0, 1).validate(2).is_ok());
        assert!(Gate::cnot(1, 1).validate(2).is_err());
        assert!(Gate::x(3).validate(2).is_err());
        assert!(Gate::mcrz(vec![Control::on1(0), Control::on0(0)], 1, 0.1)
            .validate(2)
            .is_err());
    }

    #[test]
    fn record_shape() {
        let r = Gate::mcrz(vec![Control::on0(2)], 0, 0.5).record();
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(j, r#"{"kind":"multi_controlled_rot","qubits":[2,0],"angle":0.5,"polarities":[0]}"#);
    }
}
