//! Dense statevector simulation. Bit `q` of a basis index is qubit `q`.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::gate::{Control, Gate};
use super::Circuit;
use crate::error::{Error, Result};

type C = Complex64;

/// Below this many amplitudes kernels run on one thread.
const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub n: usize,
    pub amps: Vec<C>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n: usize) -> Self {
        let mut amps = vec![C::new(0.0, 0.0); 1 << n];
        amps[0] = C::new(1.0, 0.0);
        StateVector { n, amps }
    }

    pub fn basis(n: usize, index: usize) -> Result<Self> {
        if index >= 1 << n {
            return Err(Error::Range(format!("basis index {index} outside {n} qubits")));
        }
        let mut amps = vec![C::new(0.0, 0.0); 1 << n];
        amps[index] = C::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    pub fn from_amplitudes(amps: Vec<C>) -> Result<Self> {
        if !amps.len().is_power_of_two() {
            return Err(Error::Size(format!("{} amplitudes is not a power of two", amps.len())));
        }
        let n = amps.len().trailing_zeros() as usize;
        Ok(StateVector { n, amps })
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &StateVector) -> C {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n)?;
        match gate {
            Gate::PauliX { qubit } => pair_map(&mut self.amps, *qubit, |_, a, b| std::mem::swap(a, b)),
            Gate::BasisSuperpose { qubit } => pair_map(&mut self.amps, *qubit, |_, a, b| {
                let (x, y) = (*a, *b);
                *a = (x + y) * FRAC_1_SQRT_2;
                *b = (x - y) * FRAC_1_SQRT_2;
            }),
            Gate::Cnot { control, target } => {
                let cm = 1usize << control;
                pair_map(&mut self.amps, *target, |i, a, b| {
                    if i & cm != 0 {
                        std::mem::swap(a, b)
                    }
                })
            }
            Gate::PhaseRot { qubit, theta } => {
                diagonal(&mut self.amps, &[], *qubit, *theta);
            }
            Gate::MultiControlledRot {
                controls,
                target,
                theta,
            } => diagonal(&mut self.amps, controls, *target, *theta),
            Gate::FourierTransform { qubits, inverse } => fourier(&mut self.amps, qubits, *inverse),
            Gate::Swap { a, b } => {
                let (ma, mb) = (1usize << a, 1usize << b);
                // visit each unordered pair once, from the index with a=1,b=0
                let amps = &mut self.amps;
                for i in 0..amps.len() {
                    if i & ma != 0 && i & mb == 0 {
                        amps.swap(i, i ^ ma ^ mb);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Calls `f(i0, a0, a1)` for every amplitude pair differing in bit `q`,
/// `i0` being the index with the bit cleared.
fn pair_map<F>(amps: &mut [C], q: usize, f: F)
where
    F: Fn(usize, &mut C, &mut C) + Sync,
{
    let half = 1usize << q;
    let block = half << 1;
    let run = |(bi, chunk): (usize, &mut [C])| {
        let (lo, hi) = chunk.split_at_mut(half);
        for (off, (a, b)) in lo.iter_mut().zip(hi.iter_mut()).enumerate() {
            f(bi * block + off, a, b);
        }
    };
    if amps.len() < PAR_THRESHOLD {
        amps.chunks_mut(block).enumerate().for_each(run);
    } else if amps.len() / block >= 64 {
        amps.par_chunks_mut(block).enumerate().for_each(run);
    } else {
        for (bi, chunk) in amps.chunks_mut(block).enumerate() {
            let (lo, hi) = chunk.split_at_mut(half);
            lo.par_iter_mut()
                .zip(hi.par_iter_mut())
                .enumerate()
                .for_each(|(off, (a, b))| f(bi * block + off, a, b));
        }
    }
}

fn diagonal(amps: &mut [C], controls: &[Control], target: usize, theta: f64) {
    let mask = controls.iter().fold(0usize, |m, c| m | 1 << c.qubit);
    let want = controls
        .iter()
        .fold(0usize, |m, c| if c.on_one { m | 1 << c.qubit } else { m });
    let tm = 1usize << target;
    let p0 = C::from_polar(1.0, theta / 2.0);
    let p1 = p0.conj();
    let op = |(i, a): (usize, &mut C)| {
        if i & mask == want {
            *a *= if i & tm == 0 { p0 } else { p1 };
        }
    };
    if amps.len() < PAR_THRESHOLD {
        amps.iter_mut().enumerate().for_each(op);
    } else {
        amps.par_iter_mut().enumerate().with_min_len(4096).for_each(op);
    }
}

fn fourier(amps: &mut [C], qubits: &[usize], inverse: bool) {
    let m = qubits.len();
    if m == 0 {
        return;
    }
    let points = 1usize << m;
    let mut planner = FftPlanner::new();
    // forward QFT carries e^{+2πi jk/N}: rustfft's (unnormalised) inverse
    let fft = if inverse {
        planner.plan_fft_forward(points)
    } else {
        planner.plan_fft_inverse(points)
    };
    let norm = 1.0 / (points as f64).sqrt();
    let sub_mask = qubits.iter().fold(0usize, |acc, q| acc | 1 << q);
    let offsets: Vec<usize> = (0..points)
        .map(|j| {
            qubits
                .iter()
                .enumerate()
                .fold(0usize, |acc, (bit, q)| if j >> bit & 1 == 1 { acc | 1 << q } else { acc })
        })
        .collect();
    let bases: Vec<usize> = (0..amps.len()).filter(|i| i & sub_mask == 0).collect();
    let columns: Vec<Vec<C>> = bases
        .par_iter()
        .with_min_len(64)
        .map(|&base| {
            let mut col: Vec<C> = offsets.iter().map(|o| amps[base | o]).collect();
            fft.process(&mut col);
            col
        })
        .collect();
    for (base, col) in bases.iter().zip(columns) {
        for (o, v) in offsets.iter().zip(col) {
            amps[base | o] = v * norm;
        }
    }
}

/// Runs the circuit's gates in order on `psi0`.
pub fn simulate(c: &Circuit, psi0: &StateVector) -> Result<StateVector> {
    if psi0.n != c.n_qubits {
        return Err(Error::Dimension {
            expected: 1 << c.n_qubits,
            got: psi0.len(),
        });
    }
    let mut psi = psi0.clone();
    for g in &c.gates {
        psi.apply(g)?;
    }
    Ok(psi)
}

/// As [`simulate`], asserting ‖ψ‖ = 1 ± `tol` after every gate.
pub fn simulate_checked(c: &Circuit, psi0: &StateVector, tol: f64) -> Result<StateVector> {
    if psi0.n != c.n_qubits {
        return Err(Error::Dimension {
            expected: 1 << c.n_qubits,
            got: psi0.len(),
        });
    }
    let mut psi = psi0.clone();
    let n0 = psi.norm();
    for (k, g) in c.gates.iter().enumerate() {
        psi.apply(g)?;
        let drift = (psi.norm() - n0).abs();
        if drift > tol {
            return Err(Error::Normalization(format!(
                "norm drifted by {drift:.3e} after gate {k} ({})",
                g.kind()
            )));
        }
    }
    Ok(psi)
}
