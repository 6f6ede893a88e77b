//! Assembly of the discrete curl generator `A` (du/dt = A u).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Axis, Boundary, Component, Dim, DofStatus, GridSpec};
use crate::sparse::SparseOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// Node-aligned samples to half-offset samples.
    NodeToEdge,
    /// Half-offset samples to node-aligned samples.
    EdgeToNode,
}

/// One-dimensional staggered difference with the same condition on both ends.
pub fn staggered_derivative(
    n: usize,
    delta: f64,
    orientation: Orientation,
    bc: Boundary,
) -> Result<SparseOperator> {
    staggered_derivative_faces(n, delta, orientation, bc, bc)
}

/// One-dimensional staggered difference with per-end boundary conditions.
///
/// Half-offset samples `h[i]` live at `i + 1/2`; `h[n-1]` is padding and is
/// never read or written. At a wall the missing half-offset neighbour is the
/// ghost `s * h[0]` (resp. `s * h[n-2]`), `s = -1` for PMC and `+1` for PEC.
pub fn staggered_derivative_faces(
    n: usize,
    delta: f64,
    orientation: Orientation,
    lo: Boundary,
    hi: Boundary,
) -> Result<SparseOperator> {
    if n < 2 {
        return Err(Error::Size(format!("derivative needs n >= 2, got {n}")));
    }
    let inv = 1.0 / delta;
    let mut t = Vec::with_capacity(2 * n);
    match orientation {
        Orientation::NodeToEdge => {
            for i in 0..n - 1 {
                t.push((i, i + 1, inv));
                t.push((i, i, -inv));
            }
            // tangential E on a PEC wall is pinned to zero
            t.retain(|&(_, c, _)| {
                !(c == 0 && lo == Boundary::Pec || c == n - 1 && hi == Boundary::Pec)
            });
        }
        Orientation::EdgeToNode => {
            for i in 1..n - 1 {
                t.push((i, i, inv));
                t.push((i, i - 1, -inv));
            }
            t.push((0, 0, (1.0 - lo.ghost_sign()) * inv));
            t.push((n - 1, n - 2, (hi.ghost_sign() - 1.0) * inv));
        }
    }
    SparseOperator::from_triplets(n, n, t)
}

/// `I ⊗ .. ⊗ D ⊗ .. ⊗ I` acting on the given axis of an x-fastest grid.
fn along_axis(d: &SparseOperator, axis: Axis, n: [usize; 3]) -> SparseOperator {
    [Axis::Z, Axis::Y, Axis::X]
        .iter()
        .map(|&a| {
            if a == axis {
                d.clone()
            } else {
                SparseOperator::identity(n[a.index()])
            }
        })
        .reduce(|acc, f| acc.kron(&f))
        .expect("three factors")
}

/// (row component, column component, sign, derivative axis)
const CURL_TERMS: [(Component, Component, f64, Axis); 12] = {
    use Component::*;
    [
        (Ex, Hz, 1.0, Axis::Y),
        (Ex, Hy, -1.0, Axis::Z),
        (Ey, Hx, 1.0, Axis::Z),
        (Ey, Hz, -1.0, Axis::X),
        (Ez, Hy, 1.0, Axis::X),
        (Ez, Hx, -1.0, Axis::Y),
        (Hx, Ez, -1.0, Axis::Y),
        (Hx, Ey, 1.0, Axis::Z),
        (Hy, Ex, -1.0, Axis::Z),
        (Hy, Ez, 1.0, Axis::X),
        (Hz, Ey, -1.0, Axis::X),
        (Hz, Ex, 1.0, Axis::Y),
    ]
};

fn assemble(spec: &GridSpec) -> Result<SparseOperator> {
    spec.validate()?;
    let layout = spec.layout();
    let cells = layout.cells();
    let dim = layout.len();
    let mut entries = Vec::new();
    for &(row_c, col_c, sign, axis) in &CURL_TERMS {
        let (Some(rb), Some(cb)) = (layout.block_of(row_c), layout.block_of(col_c)) else {
            continue;
        };
        if !spec.dim.axes().contains(&axis) {
            continue;
        }
        let orientation = if row_c.is_electric() {
            Orientation::EdgeToNode
        } else {
            Orientation::NodeToEdge
        };
        let material = if row_c.is_electric() {
            1.0 / spec.epsilon
        } else {
            1.0 / spec.mu
        };
        let d = staggered_derivative_faces(
            spec.extent(axis),
            spec.spacing(axis),
            orientation,
            spec.boundaries.get(axis, false),
            spec.boundaries.get(axis, true),
        )?;
        let block = along_axis(&d, axis, layout.n);
        entries.extend(
            block
                .triplets()
                .map(|(r, c, v)| (rb * cells + r, cb * cells + c, sign * material * v)),
        );
    }
    let a = SparseOperator::from_triplets(dim, dim, entries)?;
    let mut outer = spec.clone();
    outer.scatterer = None;
    let mask = outer.active_mask();
    Ok(a.retain_indices(|f| mask[f]))
}

pub fn assemble_generator_2d(spec: &GridSpec) -> Result<SparseOperator> {
    if spec.dim != Dim::TwoD {
        return Err(Error::Usage("assemble_generator_2d needs a 2D grid".into()));
    }
    finish(spec, assemble(spec)?)
}

pub fn assemble_generator_3d(spec: &GridSpec) -> Result<SparseOperator> {
    if spec.dim != Dim::ThreeD {
        return Err(Error::Usage("assemble_generator_3d needs a 3D grid".into()));
    }
    finish(spec, assemble(spec)?)
}

/// Dispatches on the grid dimensionality.
pub fn assemble_generator(spec: &GridSpec) -> Result<SparseOperator> {
    match spec.dim {
        Dim::TwoD => assemble_generator_2d(spec),
        Dim::ThreeD => assemble_generator_3d(spec),
    }
}

fn finish(spec: &GridSpec, a: SparseOperator) -> Result<SparseOperator> {
    match spec.scatterer {
        Some(_) => apply_scatterer(&a, spec),
        None => Ok(a),
    }
}

/// Freezes samples inside the body and closes the stencils of the exterior
/// samples around it with the face's ghost rule.
pub fn apply_scatterer(a: &SparseOperator, spec: &GridSpec) -> Result<SparseOperator> {
    let Some(body) = spec.scatterer else {
        return Ok(a.clone());
    };
    spec.check_scatterer(&body)?;
    if body.is_empty(spec.dim) {
        return Ok(a.clone());
    }
    let layout = spec.layout();
    if a.nrows() != layout.len() || !a.is_square() {
        return Err(Error::Dimension {
            expected: layout.len(),
            got: a.nrows(),
        });
    }
    let status: Vec<DofStatus> = (0..layout.len()).map(|f| spec.dof_status_flat(f)).collect();
    let mut entries = Vec::with_capacity(a.nnz());
    for (r, c, v) in a.triplets() {
        if status[r] != DofStatus::Active {
            continue;
        }
        if status[c] == DofStatus::Active {
            entries.push((r, c, v));
            continue;
        }
        let (Some((rc, ridx)), Some((cc, cidx))) = (layout.locate(r), layout.locate(c)) else {
            continue;
        };
        if !rc.is_electric() || cc.is_electric() {
            continue;
        }
        let pr = layout.position(rc, ridx);
        let pc = layout.position(cc, cidx);
        let Some(axis) = spec.dim.axes().iter().copied().find(|ax| pr[ax.index()] != pc[ax.index()])
        else {
            continue;
        };
        let k = axis.index();
        let face = body.faces.get(axis, pc[k] < pr[k]);
        let mut mirror = pc;
        mirror[k] = 2 * pr[k] - pc[k];
        if let Some(midx) = layout.sample_at(cc, mirror) {
            let m = layout.flat_index(cc, midx[0], midx[1], midx[2])?;
            if status[m] == DofStatus::Active {
                entries.push((r, m, face.ghost_sign() * v));
            }
        }
    }
    SparseOperator::from_triplets(a.nrows(), a.ncols(), entries)
}

#[derive(Clone, Debug, Serialize)]
pub struct SkewReport {
    /// ‖A + Aᵀ‖_F / ‖A‖_F
    pub defect: f64,
    /// Rows of `A + Aᵀ` holding nonzeros.
    pub asymmetric_rows: Vec<usize>,
}

pub fn skew_defect(a: &SparseOperator) -> SkewReport {
    let sym = a.add(&a.transpose()).expect("square");
    let norm = a.frobenius();
    let mut rows: Vec<usize> = sym.triplets().map(|(r, _, _)| r).collect();
    rows.dedup();
    SkewReport {
        defect: if norm > 0.0 { sym.frobenius() / norm } else { 0.0 },
        asymmetric_rows: rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Faces, Scatterer};

    fn dense(a: &SparseOperator) -> Vec<Vec<f64>> {
        a.to_dense()
    }

    #[test]
    fn rejects_tiny_n() {
        assert!(matches!(
            staggered_derivative(1, 1.0, Orientation::NodeToEdge, Boundary::Pmc),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn interior_rows_kill_constants() {
        for o in [Orientation::NodeToEdge, Orientation::EdgeToNode] {
            let d = staggered_derivative(6, 0.5, o, Boundary::Pmc).unwrap();
            let y = d.matvec(&[1.0; 6]).unwrap();
            for v in &y[1..4] {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn edge_to_node_ramp() {
        let d = staggered_derivative(4, 1.0, Orientation::EdgeToNode, Boundary::Pmc).unwrap();
        let y = d.matvec(&[0.0, 1.0, 2.0, 0.0]).unwrap();
        assert_eq!(y[1], 1.0);
        assert_eq!(y[2], 1.0);
    }

    #[test]
    fn pmc_ghost_doubles_boundary_coefficient() {
        let d = staggered_derivative(4, 1.0, Orientation::EdgeToNode, Boundary::Pmc).unwrap();
        let m = dense(&d);
        assert_eq!(m[0], vec![2.0, 0.0, 0.0, 0.0]);
        assert_eq!(m[3], vec![0.0, 0.0, -2.0, 0.0]);
        let half = staggered_derivative(4, 0.5, Orientation::EdgeToNode, Boundary::Pmc).unwrap();
        assert_eq!(half.get(0, 0), 4.0);
    }

    #[test]
    fn pec_ghost_zeroes_boundary_row() {
        let d = staggered_derivative(4, 1.0, Orientation::EdgeToNode, Boundary::Pec).unwrap();
        assert!(d.row(0).next().is_none());
        assert!(d.row(3).next().is_none());
        let n2e = staggered_derivative(4, 1.0, Orientation::NodeToEdge, Boundary::Pec).unwrap();
        assert!(n2e.triplets().all(|(_, c, _)| c != 0 && c != 3));
    }

    #[test]
    fn pad_row_and_column_are_zero() {
        let n2e = staggered_derivative(8, 1.0, Orientation::NodeToEdge, Boundary::Pmc).unwrap();
        assert!(n2e.row(7).next().is_none());
        let e2n = staggered_derivative(8, 1.0, Orientation::EdgeToNode, Boundary::Pmc).unwrap();
        assert!(e2n.triplets().all(|(_, c, _)| c != 7));
    }

    #[test]
    fn generator_2d_structure() {
        let spec = GridSpec::new_2d(4, 4).unwrap();
        let a = assemble_generator_2d(&spec).unwrap();
        assert_eq!(a.nrows(), 64);
        assert!(a.triplets().all(|(r, c, _)| r != c && r < 48 && c < 48));
        // E couples only to H and vice versa
        assert!(a.triplets().all(|(r, c, _)| (r < 16) != (c < 16)));
        let mut ez = vec![0.0; 64];
        ez[..16].fill(1.0);
        let du = a.matvec(&ez).unwrap();
        assert!(du.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn generator_3d_pad_blocks_are_zero() {
        let spec = GridSpec::new_3d(2, 2, 2).unwrap();
        let a = assemble_generator_3d(&spec).unwrap();
        assert_eq!(a.nrows(), 64);
        assert!(a.triplets().all(|(r, c, _)| r < 48 && c < 48));
    }

    #[test]
    fn wrong_dimensionality_is_usage_error() {
        let s2 = GridSpec::new_2d(4, 4).unwrap();
        assert!(matches!(assemble_generator_3d(&s2), Err(Error::Usage(_))));
        let s3 = GridSpec::new_3d(4, 4, 4).unwrap();
        assert!(matches!(assemble_generator_2d(&s3), Err(Error::Usage(_))));
    }

    #[test]
    fn pec_walls_give_skew_operator() {
        let spec = GridSpec::new_2d(8, 8)
            .unwrap()
            .with_boundaries(Faces::uniform(Boundary::Pec));
        let a = assemble_generator_2d(&spec).unwrap();
        assert_eq!(skew_defect(&a).defect, 0.0);
        let pmc = assemble_generator_2d(&GridSpec::new_2d(8, 8).unwrap()).unwrap();
        let rep = skew_defect(&pmc);
        assert!(rep.defect > 0.1);
        assert!(!rep.asymmetric_rows.is_empty());
    }

    #[test]
    fn empty_body_leaves_operator_unchanged() {
        let spec = GridSpec::new_2d(8, 8).unwrap();
        let a = assemble_generator_2d(&spec).unwrap();
        let mut with_body = spec.clone();
        with_body.scatterer = Some(Scatterer::new_2d([3, 3], [3, 3]));
        assert_eq!(apply_scatterer(&a, &with_body).unwrap(), a);
    }

    #[test]
    fn body_interior_rows_are_zero() {
        let spec = GridSpec::new_2d(16, 16)
            .unwrap()
            .with_scatterer(Scatterer::new_2d([4, 4], [12, 12]))
            .unwrap();
        let a = assemble_generator_2d(&spec).unwrap();
        let excluded: Vec<usize> = (0..a.nrows())
            .filter(|&f| spec.dof_status_flat(f) == DofStatus::Excluded)
            .collect();
        // Ez: 7x7 interior nodes, Hx: 7x8, Hy: 8x7
        assert_eq!(excluded.len(), 49 + 56 + 56);
        for f in excluded {
            assert!(a.row(f).next().is_none());
            assert!(a.triplets().all(|(_, c, _)| c != f));
        }
    }

    #[test]
    fn body_touching_boundary_is_rejected() {
        let spec = GridSpec::new_2d(8, 8).unwrap();
        let a = assemble_generator_2d(&spec).unwrap();
        let mut bad = spec.clone();
        bad.scatterer = Some(Scatterer::new_2d([2, 2], [7, 5]));
        assert!(matches!(apply_scatterer(&a, &bad), Err(Error::Geometry(_))));
    }
}
