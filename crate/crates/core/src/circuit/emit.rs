//! First-order Trotter circuit for the lifted dynamics.
//!
//! Layout: system qubits `0..n`, ancilla (p register) `n..n+n_a`; amplitude
//! index `j·2^n + s`. Each step applies every H2 block, then the ancilla QFT,
//! the H1 blocks with the rotation split over ancilla bits (ξ is linear in
//! the bits of the frequency index), and the inverse QFT.

use std::f64::consts::FRAC_PI_2;

use super::gate::{Control, Gate};
use super::sim::StateVector;
use super::{Circuit, CircuitMeta};
use crate::bell::CompiledOperator;
use crate::error::{Error, Result};
use crate::schrodinger::PRegister;

/// Prep plus one repeated step, kept apart so long runs need not
/// materialise every gate.
#[derive(Clone, Debug, PartialEq)]
pub struct TrotterProgram {
    pub n_system: usize,
    pub reg: PRegister,
    pub dt: f64,
    pub prep: Vec<Gate>,
    pub step: Vec<Gate>,
    /// Global phase contributed by one step.
    pub step_phase: f64,
}

impl TrotterProgram {
    pub fn n_qubits(&self) -> usize {
        self.n_system + self.reg.n_a
    }

    pub fn ancilla(&self) -> Vec<usize> {
        (self.n_system..self.n_qubits()).collect()
    }

    pub fn circuit(&self, steps: usize, scenario: &str) -> Circuit {
        let mut gates = self.prep.clone();
        for _ in 0..steps {
            gates.extend(self.step.iter().cloned());
        }
        Circuit {
            n_qubits: self.n_qubits(),
            gates,
            meta: CircuitMeta {
                scenario: scenario.to_string(),
                dt: self.dt,
                steps,
                n_system: self.n_system,
                n_ancilla: self.reg.n_a,
                global_phase: self.step_phase * steps as f64,
            },
        }
    }

    pub fn apply_prep(&self, psi: &mut StateVector) -> Result<()> {
        self.prep.iter().try_for_each(|g| psi.apply(g))
    }

    pub fn apply_step(&self, psi: &mut StateVector) -> Result<()> {
        self.step.iter().try_for_each(|g| psi.apply(g))
    }

    /// Initial register state `|0⟩_anc ⊗ u`, `u` normalised.
    pub fn initial_state(&self, system: &[f64]) -> Result<StateVector> {
        let dim = 1usize << self.n_system;
        if system.len() != dim {
            return Err(Error::Dimension {
                expected: dim,
                got: system.len(),
            });
        }
        let norm = system.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Normalization("system state has zero norm".into()));
        }
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); dim << self.reg.n_a];
        for (a, v) in amps.iter_mut().zip(system) {
            *a = num_complex::Complex64::new(v / norm, 0.0);
        }
        StateVector::from_amplitudes(amps)
    }
}

/// `RY(θ)` from the gate set, optionally with the rotation conditioned on
/// `controls`: `PhaseRot(π/2) · H · PhaseRot(−θ) · H · PhaseRot(−π/2)`.
fn controlled_ry(q: usize, theta: f64, controls: Vec<Control>) -> Vec<Gate> {
    vec![
        Gate::rz(q, FRAC_PI_2),
        Gate::h(q),
        Gate::mcrz(controls, q, -theta),
        Gate::h(q),
        Gate::rz(q, -FRAC_PI_2),
    ]
}

/// Binary tree of controlled `RY` rotations loading amplitudes
/// `∝ e^{-|p_j|}` onto the ancilla register from `|0…0⟩`.
pub fn ancilla_prep(reg: &PRegister, first: usize) -> Vec<Gate> {
    let n_a = reg.n_a;
    let weights: Vec<f64> = reg.p_points().iter().map(|p| (-2.0 * p.abs()).exp()).collect();
    let mut gates = Vec::new();
    for q in (0..n_a).rev() {
        let upper_bits = n_a - 1 - q;
        for prefix in 0..1usize << upper_bits {
            let mass = |bit: usize| -> f64 {
                (0..1usize << q)
                    .map(|low| (prefix << (q + 1)) | (bit << q) | low)
                    .map(|j| weights[j])
                    .sum()
            };
            let (m0, m1) = (mass(0), mass(1));
            if m0 + m1 == 0.0 {
                continue;
            }
            let theta = 2.0 * m1.sqrt().atan2(m0.sqrt());
            let controls = (0..upper_bits)
                .map(|b| Control {
                    qubit: first + q + 1 + b,
                    on_one: prefix >> b & 1 == 1,
                })
                .collect();
            gates.extend(controlled_ry(first + q, theta, controls));
        }
    }
    gates
}

/// Angle multiplier of ancilla bit `q` in `ξ = Δξ · k_signed`
/// (two's complement: the top bit weighs `-2^{n_a-1}`).
fn bit_weight(reg: &PRegister, q: usize) -> f64 {
    let w = (1u64 << q) as f64;
    if q + 1 == reg.n_a {
        -w * reg.dxi()
    } else {
        w * reg.dxi()
    }
}

pub fn trotter_program(
    h1: &CompiledOperator,
    h2: &CompiledOperator,
    reg: &PRegister,
    n_system: usize,
    dt: f64,
) -> Result<TrotterProgram> {
    reg.validate()?;
    let check = |op: &CompiledOperator| -> Result<()> {
        let bad = op
            .blocks
            .iter()
            .map(|b| b.factors.len())
            .chain(op.diagonal.iter().map(|d| d.factors.len()))
            .find(|&n| n != n_system);
        match bad {
            Some(n) => Err(Error::Dimension {
                expected: n_system,
                got: n,
            }),
            None => Ok(()),
        }
    };
    check(h1)?;
    check(h2)?;
    let anc: Vec<usize> = (n_system..n_system + reg.n_a).collect();
    let mut step = Vec::new();
    let mut phase = 0.0;
    for b in &h2.blocks {
        step.extend(b.gates());
    }
    for d in &h2.diagonal {
        let (g, p) = d.gates(None, 1.0);
        step.extend(g);
        phase += p;
    }
    if !h1.is_empty() {
        step.push(Gate::FourierTransform {
            qubits: anc.clone(),
            inverse: false,
        });
        let rotations: Vec<(Option<Control>, f64)> = anc
            .iter()
            .enumerate()
            .map(|(q, &a)| (Some(Control::on1(a)), bit_weight(reg, q)))
            .collect();
        for b in &h1.blocks {
            step.extend(b.gates_scaled(&rotations));
        }
        for d in &h1.diagonal {
            for (q, &a) in anc.iter().enumerate() {
                let (g, p) = d.gates(Some(a), bit_weight(reg, q));
                step.extend(g);
                phase += p;
            }
        }
        step.push(Gate::FourierTransform {
            qubits: anc.clone(),
            inverse: true,
        });
    }
    let n_qubits = n_system + reg.n_a;
    let prep = ancilla_prep(reg, n_system);
    for g in prep.iter().chain(&step) {
        g.validate(n_qubits)?;
    }
    Ok(TrotterProgram {
        n_system,
        reg: *reg,
        dt,
        prep,
        step,
        step_phase: phase,
    })
}

/// Materialised circuit: ancilla prep followed by `steps` Trotter steps.
/// With `steps = 0` only the prep remains.
pub fn emit_trotter_circuit(
    h1: &CompiledOperator,
    h2: &CompiledOperator,
    reg: &PRegister,
    n_system: usize,
    dt: f64,
    steps: usize,
) -> Result<Circuit> {
    Ok(trotter_program(h1, h2, reg, n_system, dt)?.circuit(steps, ""))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prep_loads_profile() {
        let reg = PRegister::new(3, -4.0, 4.0).unwrap();
        let mut psi = StateVector::zero(4);
        for g in ancilla_prep(&reg, 1) {
            psi.apply(&g).unwrap();
        }
        let w: Vec<f64> = reg.p_points().iter().map(|p| (-p.abs()).exp()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (j, wj) in w.iter().enumerate() {
            let a = psi.amps[j << 1];
            assert!((a.re - wj / norm).abs() < 1e-12, "{j}: {a}");
            assert!(a.im.abs() < 1e-12);
        }
    }

    #[test]
    fn zero_steps_is_prep_only() {
        let reg = PRegister::default();
        let c = emit_trotter_circuit(&CompiledOperator::default(), &CompiledOperator::default(), &reg, 2, 0.1, 0)
            .unwrap();
        assert_eq!(c.gates, ancilla_prep(&reg, 2));
        assert_eq!(c.n_qubits, 3);
    }
}
