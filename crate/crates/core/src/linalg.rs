//! Matrix exponentials: dense Padé, Krylov action, and a classical RK4
//! integrator used as an independent check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::sparse::{Scalar, Sparse};

type C = Complex64;

/// Arnoldi subspace size.
const KRYLOV_DIM: usize = 30;
/// Largest ‖M‖·τ per Krylov substep.
const KRYLOV_STEP_NORM: f64 = 3.0;

/// `y = M x`, parallel over rows for large operators.
pub fn par_apply<T: Scalar>(m: &Sparse<T>, x: &[C], y: &mut [C]) {
    let row = |r: usize| {
        m.row(r)
            .fold(C::new(0.0, 0.0), |acc, (c, v)| acc + v.to_complex() * x[c])
    };
    if m.nrows() >= 4096 {
        y.par_iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
    } else {
        y.iter_mut().enumerate().for_each(|(r, out)| *out = row(r));
    }
}

pub fn to_dense_complex<T: Scalar>(m: &Sparse<T>) -> DMatrix<C> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.triplets() {
        d[(r, c)] = v.to_complex();
    }
    d
}

pub fn to_dense_real(m: &Sparse<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.triplets() {
        d[(r, c)] = v;
    }
    d
}

/// Dense `exp(t M)` by scaling and squaring.
pub fn expm_dense(m: &DMatrix<C>, t: f64) -> DMatrix<C> {
    (m * C::new(t, 0.0)).exp()
}

pub fn expm_dense_real(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    (m * t).exp()
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(t M) v` where `apply` computes `M x` and `norm_bound` bounds ‖M‖.
pub fn expmv<F>(apply: F, norm_bound: f64, v: &[C], t: f64) -> Vec<C>
where
    F: Fn(&[C], &mut [C]),
{
    let n = v.len();
    if n == 0 || t == 0.0 || norm_bound == 0.0 {
        return v.to_vec();
    }
    let m = KRYLOV_DIM.min(n);
    let substeps = ((norm_bound * t.abs()) / KRYLOV_STEP_NORM).ceil().max(1.0) as usize;
    let tau = t / substeps as f64;
    let mut w = v.to_vec();
    let mut z = vec![C::new(0.0, 0.0); n];
    for _ in 0..substeps {
        let beta = norm(&w);
        if beta == 0.0 {
            break;
        }
        let mut basis: Vec<Vec<C>> = vec![w.iter().map(|x| x / beta).collect()];
        let mut h = DMatrix::<C>::zeros(m + 1, m);
        let mut size = m;
        for j in 0..m {
            apply(&basis[j], &mut z);
            // two passes of Gram-Schmidt
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate() {
                    let c = dot(b, &z);
                    h[(i, j)] += c;
                    z.iter_mut().zip(b).for_each(|(zi, bi)| *zi -= c * bi);
                }
            }
            let hn = norm(&z);
            h[(j + 1, j)] = C::new(hn, 0.0);
            if hn <= 1e-13 * beta.max(1.0) {
                size = j + 1;
                break;
            }
            basis.push(z.iter().map(|x| x / hn).collect());
        }
        let hm = h.view((0, 0), (size, size)).into_owned();
        let e = expm_dense(&hm, tau);
        w.iter_mut().for_each(|x| *x = C::new(0.0, 0.0));
        for (i, b) in basis.iter().take(size).enumerate() {
            let coef = e[(i, 0)] * beta;
            w.iter_mut().zip(b).for_each(|(wi, bi)| *wi += coef * bi);
        }
    }
    w
}

/// Krylov action of a sparse operator scaled by `scale`: `exp(t·scale·M) v`.
pub fn expmv_sparse<T: Scalar>(m: &Sparse<T>, scale: C, v: &[C], t: f64) -> Vec<C> {
    let bound = m.norm_inf() * scale.norm();
    expmv(
        |x, y| {
            par_apply(m, x, y);
            y.iter_mut().for_each(|yi| *yi *= scale);
        },
        bound,
        v,
        t,
    )
}

/// Classical fourth-order Runge-Kutta for `du/dt = A u`.
pub fn rk4(a: &Sparse<f64>, u0: &[f64], t: f64, dt: f64) -> Vec<f64> {
    let steps = (t / dt).round().max(0.0) as usize;
    let h = if steps > 0 { t / steps as f64 } else { 0.0 };
    let f = |x: &[f64]| a.matvec(x).expect("dimension checked by caller");
    let axpy = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        x.iter().zip(k).map(|(xi, ki)| xi + s * ki).collect()
    };
    let mut u = u0.to_vec();
    for _ in 0..steps {
        let k1 = f(&u);
        let k2 = f(&axpy(&u, &k1, h / 2.0));
        let k3 = f(&axpy(&u, &k2, h / 2.0));
        let k4 = f(&axpy(&u, &k3, h));
        for i in 0..u.len() {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseOperator;

    fn rotation() -> SparseOperator {
        SparseOperator::from_triplets(2, 2, vec![(0, 1, -1.0), (1, 0, 1.0)]).unwrap()
    }

    #[test]
    fn dense_rotation() {
        let e = expm_dense_real(&to_dense_real(&rotation()), 0.3);
        assert!((e[(0, 0)] - 0.3f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)] - 0.3f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn krylov_matches_dense_on_rotation() {
        let v = [C::new(1.0, 0.0), C::new(0.0, 0.0)];
        let y = expmv_sparse(&rotation(), C::new(1.0, 0.0), &v, 7.5);
        assert!((y[0].re - 7.5f64.cos()).abs() < 1e-12);
        assert!((y[1].re - 7.5f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn rk4_rotation() {
        let u = rk4(&rotation(), &[1.0, 0.0], 1.0, 1e-3);
        assert!((u[0] - 1f64.cos()).abs() < 1e-10);
    }

    #[test]
    fn zero_time_is_identity() {
        let v = [C::new(0.5, 0.1), C::new(-0.2, 0.0)];
        assert_eq!(expmv_sparse(&rotation(), C::new(0.0, 1.0), &v, 0.0), v.to_vec());
    }
}
