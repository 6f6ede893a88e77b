//! Shared helpers for the integration suites: a loop-based stencil for the
//! curl update that never touches the Kronecker assembly.
#![allow(dead_code)]

use qmaxwell::grid::{Axis, Component, DofStatus, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// (row component, column component, sign, derivative axis), written
/// straight from ∂E/∂t = ∇×H / ε and ∂H/∂t = −∇×E / μ.
fn terms(row: Component) -> Vec<(Component, f64, Axis)> {
    use Component::*;
    match row {
        Ex => vec![(Hz, 1.0, Axis::Y), (Hy, -1.0, Axis::Z)],
        Ey => vec![(Hx, 1.0, Axis::Z), (Hz, -1.0, Axis::X)],
        Ez => vec![(Hy, 1.0, Axis::X), (Hx, -1.0, Axis::Y)],
        Hx => vec![(Ez, -1.0, Axis::Y), (Ey, 1.0, Axis::Z)],
        Hy => vec![(Ex, -1.0, Axis::Z), (Ez, 1.0, Axis::X)],
        Hz => vec![(Ey, -1.0, Axis::X), (Ex, 1.0, Axis::Y)],
    }
}

/// Value of `c` at doubled position `pos` as seen from a row at `from`,
/// applying wall and body reflections for missing magnetic samples.
fn sample(spec: &GridSpec, u: &[f64], c: Component, pos: [i64; 3], from: [i64; 3], axis: Axis) -> f64 {
    let layout = spec.layout();
    let k = axis.index();
    let wall_hi = 2 * (spec.extent(axis) as i64 - 1);
    if pos[k] < 0 || pos[k] > wall_hi {
        // outside the wall: odd reflection for PMC, even for PEC
        let high = pos[k] > wall_hi;
        let b = spec.boundaries.get(axis, high);
        let mut m = pos;
        m[k] = if high { 2 * wall_hi - pos[k] } else { -pos[k] };
        return b.ghost_sign() * sample(spec, u, c, m, from, axis);
    }
    let Some(idx) = layout.sample_at(c, pos) else {
        return 0.0;
    };
    match spec.dof_status(c, idx) {
        DofStatus::Active => u[layout.flat_index(c, idx[0], idx[1], idx[2]).unwrap()],
        DofStatus::Padded => 0.0,
        DofStatus::Excluded => {
            // inside the body: electric rows see a reflection across the face
            let body = spec.scatterer.filter(|_| !c.is_electric() && from != pos);
            let Some(body) = body else { return 0.0 };
            if !body.strictly_inside(spec.dim, pos) {
                return 0.0;
            }
            let below = pos[k] < from[k];
            let mut m = pos;
            m[k] = 2 * from[k] - pos[k];
            let Some(midx) = layout.sample_at(c, m) else { return 0.0 };
            if spec.dof_status(c, midx) != DofStatus::Active {
                return 0.0;
            }
            body.faces.get(axis, below).ghost_sign() * u[layout.flat_index(c, midx[0], midx[1], midx[2]).unwrap()]
        }
    }
}

/// `du/dt` for the full padded state, computed sample by sample.
pub fn stencil_apply(spec: &GridSpec, u: &[f64]) -> Vec<f64> {
    let layout = spec.layout();
    let mut out = vec![0.0; layout.len()];
    for (flat, o) in out.iter_mut().enumerate() {
        let Some((row, idx)) = layout.locate(flat) else { continue };
        if spec.dof_status(row, idx) != DofStatus::Active {
            continue;
        }
        let p = layout.position(row, idx);
        let material = if row.is_electric() { spec.epsilon } else { spec.mu };
        for (col, sign, axis) in terms(row) {
            if !layout.contains(col) || !spec.dim.axes().contains(&axis) {
                continue;
            }
            let k = axis.index();
            let (mut lo, mut hi) = (p, p);
            lo[k] -= 1;
            hi[k] += 1;
            let d = (sample(spec, u, col, hi, p, axis) - sample(spec, u, col, lo, p, axis)) / spec.spacing(axis);
            *o += sign * d / material;
        }
    }
    out
}

/// Random state with zeros on every non-active slot.
pub fn random_state(spec: &GridSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    spec.active_mask()
        .into_iter()
        .map(|a| if a { rng.gen_range(-1.0..1.0) } else { 0.0 })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
