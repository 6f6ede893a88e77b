//! Lowering to single-qubit gates and CNOTs.
//!
//! Multi-controlled rotations use Toffoli ladders over borrowed ("dirty")
//! qubits, which are returned to their input state, so no clean ancillas are
//! needed and the CNOT count grows linearly with the number of controls.

use std::f64::consts::PI;

use super::gate::{Control, Gate};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lowered {
    pub gates: Vec<Gate>,
    /// Phase `φ` such that the original gate equals `e^{iφ}` times the product
    /// of `gates`.
    pub global_phase: f64,
}

impl Lowered {
    fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn cnot_count(&self) -> usize {
        self.gates.iter().filter(|g| matches!(g, Gate::Cnot { .. })).count()
    }

    /// `T = e^{iπ/8} PhaseRot(-π/4)`.
    fn t(&mut self, q: usize) {
        self.push(Gate::rz(q, -PI / 4.0));
        self.global_phase += PI / 8.0;
    }

    fn tdg(&mut self, q: usize) {
        self.push(Gate::rz(q, PI / 4.0));
        self.global_phase -= PI / 8.0;
    }

    /// Six-CNOT Toffoli.
    fn toffoli(&mut self, a: usize, b: usize, t: usize) {
        self.push(Gate::h(t));
        self.push(Gate::cnot(b, t));
        self.tdg(t);
        self.push(Gate::cnot(a, t));
        self.t(t);
        self.push(Gate::cnot(b, t));
        self.tdg(t);
        self.push(Gate::cnot(a, t));
        self.t(b);
        self.t(t);
        self.push(Gate::h(t));
        self.push(Gate::cnot(a, b));
        self.t(a);
        self.tdg(b);
        self.push(Gate::cnot(a, b));
    }

    /// Singly controlled `PhaseRot(θ)`.
    fn crz(&mut self, c: usize, t: usize, theta: f64) {
        self.push(Gate::rz(t, theta / 2.0));
        self.push(Gate::cnot(c, t));
        self.push(Gate::rz(t, -theta / 2.0));
        self.push(Gate::cnot(c, t));
    }

    /// Controlled phase `diag(1, 1, 1, e^{iφ})`.
    fn cphase(&mut self, c: usize, t: usize, phi: f64) {
        self.push(Gate::rz(c, -phi / 2.0));
        self.push(Gate::rz(t, -phi / 2.0));
        self.push(Gate::cnot(c, t));
        self.push(Gate::rz(t, phi / 2.0));
        self.push(Gate::cnot(c, t));
        self.global_phase += phi / 4.0;
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.push(Gate::cnot(a, b));
        self.push(Gate::cnot(b, a));
        self.push(Gate::cnot(a, b));
    }

    /// Multi-controlled X with all controls on 1, borrowing qubits from `pool`.
    fn mcx(&mut self, x: &[usize], y: usize, pool: &[usize]) -> Result<()> {
        let m = x.len();
        match m {
            0 => self.push(Gate::x(y)),
            1 => self.push(Gate::cnot(x[0], y)),
            2 => self.toffoli(x[0], x[1], y),
            _ if pool.len() >= m - 2 => self.ladder(x, y, &pool[..m - 2]),
            _ => {
                let Some((&a, rest)) = pool.split_first() else {
                    return Err(Error::Usage(format!(
                        "{m}-controlled X needs at least one spare qubit"
                    )));
                };
                let m1 = m.div_ceil(2);
                let (g1, g2) = x.split_at(m1);
                let g2a: Vec<usize> = g2.iter().copied().chain([a]).collect();
                let pool1: Vec<usize> = g2.iter().copied().chain([y]).chain(rest.iter().copied()).collect();
                let pool2: Vec<usize> = g1.iter().copied().chain(rest.iter().copied()).collect();
                self.mcx(g1, a, &pool1)?;
                self.mcx(&g2a, y, &pool2)?;
                self.mcx(g1, a, &pool1)?;
                self.mcx(&g2a, y, &pool2)?;
            }
        }
        Ok(())
    }

    /// `m >= 3` controls with `m - 2` dirty ancillas, `4(m - 2)` Toffolis.
    fn ladder(&mut self, x: &[usize], y: usize, a: &[usize]) {
        let m = x.len();
        let down = |s: &mut Self| {
            for i in (2..=m - 2).rev() {
                s.toffoli(x[i], a[i - 2], a[i - 1]);
            }
        };
        let up = |s: &mut Self| {
            for i in 2..=m - 2 {
                s.toffoli(x[i], a[i - 2], a[i - 1]);
            }
        };
        self.toffoli(x[m - 1], a[m - 3], y);
        down(self);
        self.toffoli(x[0], x[1], a[0]);
        up(self);
        self.toffoli(x[m - 1], a[m - 3], y);
        down(self);
        self.toffoli(x[0], x[1], a[0]);
        up(self);
    }
}

/// Lowers `PhaseRot(θ)` on `target` conditioned on `controls` into a
/// register of `n_qubits` qubits.
pub fn mcrz_lowering(controls: &[Control], target: usize, theta: f64, n_qubits: usize) -> Result<Lowered> {
    let mut out = Lowered::default();
    let flips: Vec<usize> = controls.iter().filter(|c| !c.on_one).map(|c| c.qubit).collect();
    flips.iter().for_each(|&q| out.push(Gate::x(q)));
    let c: Vec<usize> = controls.iter().map(|c| c.qubit).collect();
    match c.len() {
        0 => out.push(Gate::rz(target, theta)),
        1 => out.crz(c[0], target, theta),
        k => {
            let (head, last) = (&c[..k - 1], c[k - 1]);
            let pool: Vec<usize> = (0..n_qubits)
                .filter(|q| *q != target && !head.contains(q))
                .collect();
            out.mcx(head, target, &pool)?;
            out.crz(last, target, -theta / 2.0);
            out.mcx(head, target, &pool)?;
            out.crz(last, target, theta / 2.0);
        }
    }
    flips.iter().for_each(|&q| out.push(Gate::x(q)));
    Ok(out)
}

/// Gate-level QFT (or inverse) over `qubits`, least significant first.
pub fn qft_lowering(qubits: &[usize], inverse: bool) -> Lowered {
    let mut fwd = Lowered::default();
    let m = qubits.len();
    for j in (0..m).rev() {
        fwd.push(Gate::h(qubits[j]));
        for k in (0..j).rev() {
            let phi = 2.0 * PI / (1u64 << (j - k + 1)) as f64;
            fwd.cphase(qubits[k], qubits[j], phi);
        }
    }
    for i in 0..m / 2 {
        fwd.swap(qubits[i], qubits[m - 1 - i]);
    }
    if !inverse {
        return fwd;
    }
    Lowered {
        gates: super::gate::inverse_sequence(&fwd.gates),
        global_phase: -fwd.global_phase,
    }
}

/// Lowers any gate to {X, H, CNOT, PhaseRot}.
pub fn lower_gate(g: &Gate, n_qubits: usize) -> Result<Lowered> {
    Ok(match g {
        Gate::MultiControlledRot {
            controls,
            target,
            theta,
        } => mcrz_lowering(controls, *target, *theta, n_qubits)?,
        Gate::FourierTransform { qubits, inverse } => qft_lowering(qubits, *inverse),
        Gate::Swap { a, b } => {
            let mut l = Lowered::default();
            l.swap(*a, *b);
            l
        }
        g => Lowered {
            gates: vec![g.clone()],
            global_phase: 0.0,
        },
    })
}
