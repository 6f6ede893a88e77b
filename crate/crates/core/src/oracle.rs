//! Classical reference evolution, error tables and field snapshots.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Axis, Component, Dim, FieldState};
use crate::linalg::{expm_dense_real, expmv_sparse, rk4, to_dense_real};
use crate::sparse::SparseOperator;

/// Largest state dimension the oracle accepts.
pub const DIMENSION_CAP: usize = 1 << 16;
/// Below this dimension `Auto` uses the dense exponential.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    Auto,
    Dense,
    Krylov,
    Rk4 { dt: f64 },
}

/// Exact evolution `e^{At}` with cached dense propagators.
pub struct Oracle<'a> {
    a: &'a SparseOperator,
    method: OracleMethod,
    dense: Option<DMatrix<f64>>,
    cache: HashMap<u64, DMatrix<f64>>,
}

impl<'a> Oracle<'a> {
    pub fn new(a: &'a SparseOperator, method: OracleMethod) -> Result<Self> {
        if a.nrows() > DIMENSION_CAP {
            return Err(Error::DimensionCap {
                dim: a.nrows(),
                cap: DIMENSION_CAP,
            });
        }
        let method = match method {
            OracleMethod::Auto if a.nrows() < DENSE_LIMIT => OracleMethod::Dense,
            OracleMethod::Auto => OracleMethod::Krylov,
            m => m,
        };
        let dense = (method == OracleMethod::Dense).then(|| to_dense_real(a));
        Ok(Oracle {
            a,
            method,
            dense,
            cache: HashMap::new(),
        })
    }

    pub fn method(&self) -> OracleMethod {
        self.method
    }

    pub fn propagate(&mut self, u: &[f64], t: f64) -> Result<Vec<f64>> {
        if u.len() != self.a.ncols() {
            return Err(Error::Dimension {
                expected: self.a.ncols(),
                got: u.len(),
            });
        }
        if t == 0.0 {
            return Ok(u.to_vec());
        }
        Ok(match self.method {
            OracleMethod::Dense => {
                let a = self.dense.as_ref().expect("dense matrix built");
                let e = self
                    .cache
                    .entry(t.to_bits())
                    .or_insert_with(|| expm_dense_real(a, t));
                (&*e * DVector::from_column_slice(u)).as_slice().to_vec()
            }
            OracleMethod::Krylov | OracleMethod::Auto => {
                let v: Vec<Complex64> = u.iter().map(|x| Complex64::new(*x, 0.0)).collect();
                expmv_sparse(self.a, Complex64::new(1.0, 0.0), &v, t)
                    .into_iter()
                    .map(|z| z.re)
                    .collect()
            }
            OracleMethod::Rk4 { dt } => rk4(self.a, u, t, dt),
        })
    }

    pub fn evolve(&mut self, u0: &FieldState, t: f64) -> Result<FieldState> {
        let values = self.propagate(&u0.values, t)?;
        FieldState::from_values(&u0.layout, values, u0.time + t)
    }

    /// States at each of the increasing `times`, propagated incrementally.
    pub fn trace(&mut self, u0: &FieldState, times: &[f64]) -> Result<Vec<FieldState>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = u0.clone();
        let mut now = 0.0;
        for &t in times {
            if t < now {
                return Err(Error::Usage("trace times must be nondecreasing".into()));
            }
            cur = self.evolve(&cur, round_time(t - now))?;
            cur.time = t;
            now = t;
            out.push(cur.clone());
        }
        Ok(out)
    }
}

/// Snaps a time difference onto a 1e-12 lattice so equal steps share a
/// cached propagator.
fn round_time(t: f64) -> f64 {
    (t * 1e12).round() / 1e12
}

pub fn exact_evolution(a: &SparseOperator, u0: &FieldState, t: f64) -> Result<FieldState> {
    Oracle::new(a, OracleMethod::Auto)?.evolve(u0, t)
}

pub fn exact_evolution_with(
    a: &SparseOperator,
    u0: &FieldState,
    t: f64,
    method: OracleMethod,
) -> Result<FieldState> {
    Oracle::new(a, method)?.evolve(u0, t)
}

/// ℓ2 norm of `a - b` restricted to each component block.
pub fn component_errors(a: &FieldState, b: &FieldState) -> Result<Vec<(Component, f64)>> {
    if a.layout != b.layout {
        return Err(Error::Layout("states have different layouts".into()));
    }
    a.layout
        .components()
        .map(|c| {
            let (x, y) = (a.component(c)?, b.component(c)?);
            let e = x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            Ok((c, e))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub time: f64,
    pub dt: f64,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTable {
    pub components: Vec<Component>,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    pub fn new(components: Vec<Component>) -> Self {
        ErrorTable {
            components,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, time: f64, dt: f64, errors: Vec<f64>) {
        self.rows.push(ErrorRow { time, dt, errors });
    }

    pub fn get(&self, time: f64, dt: f64) -> Option<&ErrorRow> {
        self.rows
            .iter()
            .find(|r| (r.time - time).abs() < 1e-12 && (r.dt - dt).abs() < 1e-15)
    }

    pub fn dts(&self) -> Vec<f64> {
        let mut d: Vec<f64> = self.rows.iter().map(|r| r.dt).collect();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    }

    pub fn times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.rows.iter().map(|r| r.time).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Places where the error decreases with T at fixed dt.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for dt in self.dts() {
            let mut rows: Vec<&ErrorRow> = self.rows.iter().filter(|r| r.dt == dt).collect();
            rows.sort_by(|a, b| a.time.total_cmp(&b.time));
            for w in rows.windows(2) {
                for (ci, c) in self.components.iter().enumerate() {
                    if w[1].errors[ci] < w[0].errors[ci] {
                        out.push(format!(
                            "{c} error drops from {:.4e} (T={}) to {:.4e} (T={}) at dt={dt}",
                            w[0].errors[ci], w[0].time, w[1].errors[ci], w[1].time
                        ));
                    }
                }
            }
        }
        out
    }

    /// Wide layout: one row per time, a column group per dt (ascending),
    /// components in layout order within each group.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let dts = self.dts();
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["time".to_string()];
        for dt in &dts {
            header.extend(self.components.iter().map(|c| format!("{c}_dt{dt}")));
        }
        out.write_record(&header)?;
        for t in self.times() {
            let mut rec = vec![t.to_string()];
            for &dt in &dts {
                match self.get(t, dt) {
                    Some(r) => rec.extend(r.errors.iter().map(|e| format!("{e:.6e}"))),
                    None => rec.extend(self.components.iter().map(|_| String::new())),
                }
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    /// Constant z; in 2D the whole grid (index 0).
    Xy(usize),
    Xz(usize),
    Yz(usize),
}

impl Plane {
    fn axes(self) -> (Axis, Axis, Axis, usize) {
        match self {
            Plane::Xy(k) => (Axis::X, Axis::Y, Axis::Z, k),
            Plane::Xz(j) => (Axis::X, Axis::Z, Axis::Y, j),
            Plane::Yz(i) => (Axis::Y, Axis::Z, Axis::X, i),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub component: Component,
    pub plane: Plane,
    pub time: f64,
    /// `values[row][col]`: row along the plane's second axis, column along
    /// its first.
    pub values: Vec<Vec<f64>>,
}

pub fn snapshot(state: &FieldState, component: Component, plane: Plane) -> Result<Snapshot> {
    let layout = &state.layout;
    let (ax_col, ax_row, ax_fixed, at) = plane.axes();
    if layout.dim == Dim::TwoD && !matches!(plane, Plane::Xy(0)) {
        return Err(Error::Range(format!("2D snapshots need the xy plane at 0, got {plane:?}")));
    }
    if at >= layout.n[ax_fixed.index()] {
        return Err(Error::Range(format!(
            "plane index {at} outside 0..{}",
            layout.n[ax_fixed.index()]
        )));
    }
    let (nc, nr) = (layout.n[ax_col.index()], layout.n[ax_row.index()]);
    let values = (0..nr)
        .map(|r| {
            (0..nc)
                .map(|c| {
                    let mut idx = [0usize; 3];
                    idx[ax_col.index()] = c;
                    idx[ax_row.index()] = r;
                    idx[ax_fixed.index()] = at;
                    state.get(component, idx)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Snapshot {
        component,
        plane,
        time: state.time,
        values,
    })
}

impl Snapshot {
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flatten().copied().collect()
    }

    pub fn file_name(&self) -> String {
        format!("{}_T{}.csv", self.component, self.time)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let ncols = self.values.first().map_or(0, Vec::len);
        let mut header = vec!["row".to_string()];
        header.extend((0..ncols).map(|c| c.to_string()));
        out.write_record(&header)?;
        for (r, row) in self.values.iter().enumerate() {
            let mut rec = vec![r.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.12e}")));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_to_dir(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(self.file_name());
        self.write_csv(std::fs::File::create(&path)?)?;
        Ok(path)
    }
}

/// Normalised cross-correlation (cosine similarity) of two equal-length
/// arrays; 0 when either is identically zero.
pub fn ncc(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curl::assemble_generator;
    use crate::grid::{pack_initial_condition, GridSpec, Impulse};

    fn impulse_2d(n: usize) -> (SparseOperator, FieldState) {
        let spec = GridSpec::new_2d(n, n).unwrap();
        let a = assemble_generator(&spec).unwrap();
        let u0 = pack_initial_condition(&spec, &[Impulse::new(Component::Ez, [n / 2, n / 2, 0], 1.0)])
            .unwrap();
        (a, u0)
    }

    #[test]
    fn zero_time_is_identity() {
        let (a, u0) = impulse_2d(4);
        assert_eq!(exact_evolution(&a, &u0, 0.0).unwrap().values, u0.values);
    }

    #[test]
    fn dense_and_krylov_agree() {
        let (a, u0) = impulse_2d(8);
        let d = exact_evolution_with(&a, &u0, 3.0, OracleMethod::Dense).unwrap();
        let k = exact_evolution_with(&a, &u0, 3.0, OracleMethod::Krylov).unwrap();
        let diff = d.values.iter().zip(&k.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn trace_matches_direct() {
        let (a, u0) = impulse_2d(4);
        let mut o = Oracle::new(&a, OracleMethod::Dense).unwrap();
        let tr = o.trace(&u0, &[0.5, 1.0, 1.5]).unwrap();
        let direct = exact_evolution(&a, &u0, 1.5).unwrap();
        let diff = tr[2].values.iter().zip(&direct.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        assert_eq!(tr[2].time, 1.5);
    }

    #[test]
    fn snapshot_of_impulse_has_one_pixel() {
        let (_, u0) = impulse_2d(8);
        let s = snapshot(&u0, Component::Ez, Plane::Xy(0)).unwrap();
        assert_eq!(s.flatten().iter().filter(|v| **v != 0.0).count(), 1);
        assert_eq!(s.values[4][4], 1.0);
        assert_eq!(s.file_name(), "Ez_T0.csv");
        assert!(snapshot(&u0, Component::Ez, Plane::Xz(0)).is_err());
    }

    #[test]
    fn error_table_csv_layout() {
        let mut t = ErrorTable::new(vec![Component::Ez, Component::Hx, Component::Hy]);
        t.push(8.0, 0.1, vec![0.15, 0.11, 0.11]);
        t.push(8.0, 0.01, vec![0.015, 0.011, 0.011]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let header = s.lines().next().unwrap();
        assert_eq!(header, "time,Ez_dt0.01,Hx_dt0.01,Hy_dt0.01,Ez_dt0.1,Hx_dt0.1,Hy_dt0.1");
        assert_eq!(s.lines().count(), 2);
    }

    #[test]
    fn ncc_basics() {
        assert!((ncc(&[1.0, 2.0], &[2.0, 4.0]) - 1.0).abs() < 1e-15);
        assert_eq!(ncc(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
