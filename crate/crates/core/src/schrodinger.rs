//! Warped-phase lift of `du/dt = A u` into a family of unitary evolutions.
//!
//! `A = H1 + i H2` with both parts Hermitian. The lifted variable
//! `v(t, p) = e^{-|p|} u(t)` for `p > 0` obeys `dv/dt = -H1 ∂p v + i H2 v`,
//! which Fourier transforms in `p` into independent branches
//! `dṽ/dt = i (ξ H1 + H2) ṽ`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FieldLayout, FieldState};
use crate::linalg::{expmv, par_apply};
use crate::sparse::{ComplexOperator, SparseOperator};

type C = Complex64;

#[derive(Clone, Debug)]
pub struct HermitianPair {
    /// `(A + Aᵀ)/2`, real symmetric.
    pub h1: SparseOperator,
    /// `(A - Aᵀ)/(2i)`, purely imaginary Hermitian.
    pub h2: ComplexOperator,
}

pub fn hermitian_split(a: &SparseOperator) -> Result<HermitianPair> {
    if !a.is_square() {
        return Err(Error::Size(format!("{}x{} operator is not square", a.nrows(), a.ncols())));
    }
    let at = a.transpose();
    let h1 = a.add(&at)?.scale(0.5);
    let h2 = a.sub(&at)?.map(|v| C::new(0.0, -0.5 * v));
    Ok(HermitianPair { h1, h2 })
}

impl HermitianPair {
    pub fn dim(&self) -> usize {
        self.h1.nrows()
    }

    /// True when the symmetric part vanishes identically.
    pub fn h1_is_zero(&self) -> bool {
        self.h1.nnz() == 0
    }

    /// `H1 + i H2`, which reproduces `A`.
    pub fn reconstruct(&self) -> ComplexOperator {
        self.h1
            .to_complex()
            .add(&self.h2.scale(C::new(0.0, 1.0)))
            .expect("same shape")
    }

    /// Worst of ‖H - H†‖_F over both parts.
    pub fn hermiticity_defect(&self) -> f64 {
        let d1 = self.h1.sub(&self.h1.transpose()).expect("square").frobenius();
        let d2 = self.h2.sub(&self.h2.adjoint()).expect("square").frobenius();
        d1.max(d2)
    }
}

/// `ξ H1 + H2`.
pub fn lifted_hamiltonian(pair: &HermitianPair, xi: f64) -> ComplexOperator {
    pair.h1
        .to_complex()
        .scale(C::new(xi, 0.0))
        .add(&pair.h2)
        .expect("same shape")
}

/// Uniform cell-centred grid of `2^n_a` points on `[p_min, p_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PRegister {
    pub n_a: usize,
    pub p_min: f64,
    pub p_max: f64,
}

impl Default for PRegister {
    fn default() -> Self {
        PRegister {
            n_a: 1,
            p_min: -std::f64::consts::PI,
            p_max: std::f64::consts::PI,
        }
    }
}

impl PRegister {
    pub fn new(n_a: usize, p_min: f64, p_max: f64) -> Result<Self> {
        let reg = PRegister { n_a, p_min, p_max };
        reg.validate()?;
        Ok(reg)
    }

    /// Symmetric window `[-half_width, half_width)`.
    pub fn symmetric(n_a: usize, half_width: f64) -> Result<Self> {
        Self::new(n_a, -half_width, half_width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_a == 0 || self.n_a > 20 {
            return Err(Error::Config(format!("n_a must be in 1..=20, got {}", self.n_a)));
        }
        if !(self.p_max > 0.0 && self.p_min < self.p_max && self.p_min.is_finite() && self.p_max.is_finite()) {
            return Err(Error::Config(format!(
                "p window [{}, {}) must be finite with p_max > 0",
                self.p_min, self.p_max
            )));
        }
        Ok(())
    }

    pub fn n_points(&self) -> usize {
        1 << self.n_a
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / self.n_points() as f64
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + (j as f64 + 0.5) * self.dp()
    }

    pub fn p_points(&self) -> Vec<f64> {
        (0..self.n_points()).map(|j| self.p(j)).collect()
    }

    /// Signed DFT index of frequency slot `k`.
    pub fn signed_index(&self, k: usize) -> i64 {
        let n = self.n_points();
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    pub fn xi(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.signed_index(k) as f64 / (self.n_points() as f64 * self.dp())
    }

    pub fn xi_values(&self) -> Vec<f64> {
        (0..self.n_points()).map(|k| self.xi(k)).collect()
    }

    /// Frequency spacing Δξ.
    pub fn dxi(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n_points() as f64 * self.dp())
    }
}

/// Unit-norm lifted amplitudes plus the physical scale they stand for.
/// Index `j * dim + s`: p point `j` outer, field index `s` inner.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedState {
    pub amplitudes: Vec<C>,
    pub dim: usize,
    pub reg: PRegister,
    /// ‖v(0)‖ of the unnormalised lifted vector.
    pub scale: f64,
    pub time: f64,
}

impl LiftedState {
    pub fn slice(&self, j: usize) -> &[C] {
        &self.amplitudes[j * self.dim..(j + 1) * self.dim]
    }

    /// Unnormalised slice `v(t, p_j)`.
    pub fn physical_slice(&self, j: usize) -> Vec<C> {
        self.slice(j).iter().map(|a| a * self.scale).collect()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn initial_lifted_state(u0: &FieldState, reg: &PRegister) -> Result<LiftedState> {
    reg.validate()?;
    let dim = u0.values.len();
    let unorm = u0.norm();
    if unorm == 0.0 || !unorm.is_finite() {
        return Err(Error::Normalization("initial field has zero norm".into()));
    }
    let profile: Vec<f64> = reg.p_points().iter().map(|p| (-p.abs()).exp()).collect();
    let scale = unorm * profile.iter().map(|f| f * f).sum::<f64>().sqrt();
    let amplitudes = profile
        .iter()
        .flat_map(|f| u0.values.iter().map(move |u| C::new(f * u / scale, 0.0)))
        .collect();
    Ok(LiftedState {
        amplitudes,
        dim,
        reg: *reg,
        scale,
        time: u0.time,
    })
}

/// Applies the unitary `QFT` (kernel `e^{+2πi jk/N}/√N`) or its inverse along
/// the p axis of a `points x dim` array.
pub fn fourier_p_axis(data: &mut [C], points: usize, dim: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    // QFT uses the positive exponent, i.e. the unnormalised inverse DFT
    let fft = if inverse {
        planner.plan_fft_forward(points)
    } else {
        planner.plan_fft_inverse(points)
    };
    let norm = 1.0 / (points as f64).sqrt();
    let columns: Vec<Vec<C>> = (0..dim)
        .into_par_iter()
        .with_min_len(256)
        .map(|s| {
            let mut col: Vec<C> = (0..points).map(|j| data[j * dim + s]).collect();
            fft.process(&mut col);
            col
        })
        .collect();
    for (s, col) in columns.into_iter().enumerate() {
        for (j, v) in col.into_iter().enumerate() {
            data[j * dim + s] = v * norm;
        }
    }
}

/// Per-branch generator `i(ξ H1 + H2)` applied matrix-free.
fn branch_apply(pair: &HermitianPair, xi: f64, x: &[C], y: &mut [C], tmp: &mut [C]) {
    par_apply(&pair.h2, x, y);
    if xi != 0.0 && pair.h1.nnz() > 0 {
        par_apply(&pair.h1, x, tmp);
        y.iter_mut().zip(tmp.iter()).for_each(|(a, b)| *a += xi * b);
    }
    y.iter_mut().for_each(|a| *a *= C::new(0.0, 1.0));
}

/// `exp(i (ξ H1 + H2) t) w` by Krylov action.
pub fn evolve_branch(pair: &HermitianPair, xi: f64, w: &[C], t: f64) -> Vec<C> {
    let bound = xi.abs() * pair.h1.norm_inf() + pair.h2.norm_inf();
    expmv(
        |x, y| {
            let mut tmp = vec![C::new(0.0, 0.0); x.len()];
            branch_apply(pair, xi, x, y, &mut tmp);
        },
        bound,
        w,
        t,
    )
}

/// Circuit-free reference: QFT along p, exact branch propagation, QFT†.
pub fn evolve_lifted_exact(pair: &HermitianPair, v0: &LiftedState, t: f64) -> Result<LiftedState> {
    let dim = pair.dim();
    if v0.dim != dim || v0.amplitudes.len() != dim * v0.reg.n_points() {
        return Err(Error::Dimension {
            expected: dim * v0.reg.n_points(),
            got: v0.amplitudes.len(),
        });
    }
    if t == 0.0 {
        return Ok(v0.clone());
    }
    let reg = v0.reg;
    let points = reg.n_points();
    let mut data = v0.amplitudes.clone();
    fourier_p_axis(&mut data, points, dim, false);
    let branches: Vec<Vec<C>> = (0..points)
        .into_par_iter()
        .map(|k| evolve_branch(pair, reg.xi(k), &data[k * dim..(k + 1) * dim], t))
        .collect();
    let mut data: Vec<C> = branches.into_iter().flatten().collect();
    fourier_p_axis(&mut data, points, dim, true);
    Ok(LiftedState {
        amplitudes: data,
        time: v0.time + t,
        ..v0.clone()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralBoundOptions {
    pub iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for SpectralBoundOptions {
    fn default() -> Self {
        SpectralBoundOptions {
            iterations: 30,
            tolerance: 1e-8,
            seed: 0x5eed,
        }
    }
}

/// Largest eigenvalue of the real symmetric `h1`, by power iteration on the
/// shifted operator `h1 + ρI` (ρ a Gershgorin bound, so the shift is PSD).
pub fn spectral_bound(h1: &SparseOperator, opts: SpectralBoundOptions) -> f64 {
    let rho = h1.norm_inf();
    if rho == 0.0 {
        return 0.0;
    }
    let n = h1.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let normalize = |v: &mut Vec<f64>| {
        let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= nv);
    };
    normalize(&mut x);
    let mut lambda = 0.0;
    for _ in 0..opts.iterations {
        let mut y = h1.matvec(&x).expect("square");
        y.iter_mut().zip(&x).for_each(|(a, b)| *a += rho * b);
        let next: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        normalize(&mut y);
        x = y;
        let done = (next - lambda).abs() <= opts.tolerance * next.abs().max(1.0);
        lambda = next;
        if done {
            break;
        }
    }
    lambda - rho
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecoveryMode {
    /// Single slice at the first p point above the threshold.
    SingleSlice,
    /// Least-squares fit of `v_j = e^{-p_j} u` over all admissible points.
    LeastSquares,
}

#[derive(Clone, Debug)]
pub struct Recovery {
    pub field: FieldState,
    pub p_star: f64,
    pub slice: usize,
    /// Factor mapping unit-norm amplitudes of the slice to field values.
    pub factor: f64,
    /// Largest imaginary part discarded from the recovered field.
    pub imag_residual: f64,
}

/// Smallest p point strictly above `max(0, λ t)`.
pub fn recovery_point(reg: &PRegister, lambda_max: f64, t: f64) -> Result<(usize, f64)> {
    let threshold = (lambda_max * t).max(0.0);
    reg.p_points()
        .into_iter()
        .enumerate()
        .find(|(_, p)| *p > threshold)
        .ok_or(Error::RecoveryInfeasible {
            required_p: threshold,
            max_p: reg.p(reg.n_points() - 1),
        })
}

pub fn recover_solution(
    v: &LiftedState,
    layout: &FieldLayout,
    lambda_max: f64,
    mode: RecoveryMode,
) -> Result<Recovery> {
    if v.dim != layout.len() {
        return Err(Error::Dimension {
            expected: layout.len(),
            got: v.dim,
        });
    }
    if v.amplitudes.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
        return Err(Error::Normalization("lifted state holds non-finite values".into()));
    }
    let (slice, p_star) = recovery_point(&v.reg, lambda_max, v.time)?;
    let factor = p_star.exp() * v.scale;
    let values: Vec<C> = match mode {
        RecoveryMode::SingleSlice => v.slice(slice).iter().map(|a| a * factor).collect(),
        RecoveryMode::LeastSquares => {
            let pts: Vec<(usize, f64)> = v
                .reg
                .p_points()
                .into_iter()
                .enumerate()
                .skip(slice)
                .collect();
            let denom: f64 = pts.iter().map(|(_, p)| (-2.0 * p).exp()).sum();
            let mut acc = vec![C::new(0.0, 0.0); v.dim];
            for (j, p) in pts {
                let w = (-p).exp() * v.scale / denom;
                acc.iter_mut().zip(v.slice(j)).for_each(|(a, b)| *a += b * w);
            }
            acc
        }
    };
    let imag_residual = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let field = FieldState::from_values(layout, values.iter().map(|z| z.re).collect(), v.time)?;
    Ok(Recovery {
        field,
        p_star,
        slice,
        factor,
        imag_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curl::assemble_generator;
    use crate::grid::{pack_initial_condition, Boundary, Component, Faces, GridSpec, Impulse};
    use crate::oracle::exact_evolution;

    fn scenario(n: usize, faces: Faces) -> (GridSpec, SparseOperator, FieldState) {
        let spec = GridSpec::new_2d(n, n).unwrap().with_boundaries(faces);
        let a = assemble_generator(&spec).unwrap();
        let u0 = pack_initial_condition(&spec, &[Impulse::new(Component::Ez, [n / 2, n / 2, 0], 1.0)])
            .unwrap();
        (spec, a, u0)
    }

    #[test]
    fn skew_input_has_zero_h1() {
        let a = SparseOperator::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, -1.0)]).unwrap();
        let p = hermitian_split(&a).unwrap();
        assert!(p.h1_is_zero());
        assert_eq!(p.h2.get(0, 1), C::new(0.0, -1.0));
    }

    #[test]
    fn symmetric_input_has_zero_h2() {
        let a = SparseOperator::from_triplets(2, 2, vec![(0, 1, 2.0), (1, 0, 2.0)]).unwrap();
        let p = hermitian_split(&a).unwrap();
        assert_eq!(p.h2.nnz(), 0);
        assert_eq!(p.h1, a);
    }

    #[test]
    fn lifted_hamiltonian_at_zero_is_h2() {
        let (_, a, _) = scenario(4, Faces::default());
        let p = hermitian_split(&a).unwrap();
        assert_eq!(lifted_hamiltonian(&p, 0.0), p.h2);
    }

    #[test]
    fn p_grid_defaults() {
        let reg = PRegister::default();
        let p = reg.p_points();
        assert!((p[0] + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!((p[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(PRegister::new(2, 1.0, 0.5).is_err());
        assert!(PRegister::new(2, -2.0, -1.0).is_err());
    }

    #[test]
    fn initial_profile() {
        let (_, _, u0) = scenario(4, Faces::default());
        let reg = PRegister::new(3, -4.0, 4.0).unwrap();
        let v = initial_lifted_state(&u0, &reg).unwrap();
        for (j, p) in reg.p_points().iter().enumerate() {
            let n: f64 = v.physical_slice(j).iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            assert!((n - (-p.abs()).exp()).abs() < 1e-14);
        }
        let zero = FieldState::zeros(&u0.layout);
        assert!(matches!(initial_lifted_state(&zero, &reg), Err(Error::Normalization(_))));
    }

    #[test]
    fn zero_time_recovery() {
        let (spec, a, u0) = scenario(4, Faces::default());
        let pair = hermitian_split(&a).unwrap();
        let v = initial_lifted_state(&u0, &PRegister::default()).unwrap();
        let v = evolve_lifted_exact(&pair, &v, 0.0).unwrap();
        let r = recover_solution(&v, &spec.layout(), 1.0, RecoveryMode::SingleSlice).unwrap();
        let d = r.field.values.iter().zip(&u0.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-12);
    }

    #[test]
    fn exact_when_h1_vanishes() {
        let (spec, a, u0) = scenario(4, Faces::uniform(Boundary::Pec));
        let pair = hermitian_split(&a).unwrap();
        assert!(pair.h1_is_zero());
        let v0 = initial_lifted_state(&u0, &PRegister::default()).unwrap();
        let v = evolve_lifted_exact(&pair, &v0, 1.3).unwrap();
        let r = recover_solution(&v, &spec.layout(), 0.0, RecoveryMode::SingleSlice).unwrap();
        let exact = exact_evolution(&a, &u0, 1.3).unwrap();
        let d = r.field.values.iter().zip(&exact.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-11, "{d}");
    }

    #[test]
    fn infeasible_recovery_is_reported() {
        let reg = PRegister::default();
        let e = recovery_point(&reg, 0.7, 8.0);
        assert!(matches!(e, Err(Error::RecoveryInfeasible { .. })));
    }

    #[test]
    fn spectral_bound_of_pmc_grid() {
        let (_, a, _) = scenario(8, Faces::default());
        let pair = hermitian_split(&a).unwrap();
        let lam = spectral_bound(&pair.h1, SpectralBoundOptions { iterations: 500, ..Default::default() });
        assert!((lam - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3, "{lam}");
    }
}
