//! Yee grid description, field layout and index arithmetic.
//!
//! Positions are handled in doubled integer coordinates: a node sits at an
//! even coordinate `2i`, a half-offset sample at `2i + 1`. Along each axis the
//! domain spans nodes `0..n`, i.e. doubled coordinates `0..=2(n-1)`. A
//! half-offset component therefore has only `n - 1` physical samples; its last
//! storage slot (`i = n - 1`) is a padding sample that is zero for all time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "3d")]
    ThreeD,
}

impl Dim {
    pub fn axes(self) -> &'static [Axis] {
        match self {
            Dim::TwoD => &[Axis::X, Axis::Y],
            Dim::ThreeD => &[Axis::X, Axis::Y, Axis::Z],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Perfect magnetic conductor: tangential H vanishes at the wall.
    Pmc,
    /// Perfect electric conductor: tangential E vanishes at the wall.
    Pec,
}

impl Boundary {
    /// Sign of the ghost reflection applied to a tangential H sample across a
    /// wall: antisymmetric for PMC, symmetric for PEC.
    pub fn ghost_sign(self) -> f64 {
        match self {
            Boundary::Pmc => -1.0,
            Boundary::Pec => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Per-face boundary conditions of a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Faces {
    pub x_lo: Boundary,
    pub x_hi: Boundary,
    pub y_lo: Boundary,
    pub y_hi: Boundary,
    pub z_lo: Boundary,
    pub z_hi: Boundary,
}

impl Faces {
    pub fn uniform(b: Boundary) -> Self {
        Faces {
            x_lo: b,
            x_hi: b,
            y_lo: b,
            y_hi: b,
            z_lo: b,
            z_hi: b,
        }
    }

    pub fn get(&self, axis: Axis, high: bool) -> Boundary {
        match (axis, high) {
            (Axis::X, false) => self.x_lo,
            (Axis::X, true) => self.x_hi,
            (Axis::Y, false) => self.y_lo,
            (Axis::Y, true) => self.y_hi,
            (Axis::Z, false) => self.z_lo,
            (Axis::Z, true) => self.z_hi,
        }
    }

    pub fn set(&mut self, axis: Axis, high: bool, b: Boundary) {
        let slot = match (axis, high) {
            (Axis::X, false) => &mut self.x_lo,
            (Axis::X, true) => &mut self.x_hi,
            (Axis::Y, false) => &mut self.y_lo,
            (Axis::Y, true) => &mut self.y_hi,
            (Axis::Z, false) => &mut self.z_lo,
            (Axis::Z, true) => &mut self.z_hi,
        };
        *slot = b;
    }
}

impl Default for Faces {
    fn default() -> Self {
        Faces::uniform(Boundary::Pmc)
    }
}

/// Axis-aligned conducting body occupying the closed node box `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
    #[serde(default = "Scatterer::default_faces")]
    pub faces: Faces,
}

impl Scatterer {
    /// PMC on the lateral faces and PEC on the z faces.
    pub fn default_faces() -> Faces {
        Faces {
            z_lo: Boundary::Pec,
            z_hi: Boundary::Pec,
            ..Faces::uniform(Boundary::Pmc)
        }
    }

    pub fn new_2d(lo: [usize; 2], hi: [usize; 2]) -> Self {
        Scatterer {
            lo: [lo[0], lo[1], 0],
            hi: [hi[0], hi[1], 0],
            faces: Self::default_faces(),
        }
    }

    pub fn new_3d(lo: [usize; 3], hi: [usize; 3]) -> Self {
        Scatterer {
            lo,
            hi,
            faces: Self::default_faces(),
        }
    }

    /// True when the box has zero extent along some active axis.
    pub fn is_empty(&self, dim: Dim) -> bool {
        dim.axes()
            .iter()
            .any(|a| self.hi[a.index()] <= self.lo[a.index()])
    }

    pub fn strictly_inside(&self, dim: Dim, pos: [i64; 3]) -> bool {
        dim.axes().iter().all(|a| {
            let k = a.index();
            (2 * self.lo[k] as i64) < pos[k] && pos[k] < 2 * self.hi[k] as i64
        })
    }

    pub fn in_closed_box(&self, dim: Dim, pos: [i64; 3]) -> bool {
        dim.axes().iter().all(|a| {
            let k = a.index();
            (2 * self.lo[k] as i64) <= pos[k] && pos[k] <= 2 * self.hi[k] as i64
        })
    }
}

/// Discrete field components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    Ex,
    Ey,
    Ez,
    Hx,
    Hy,
    Hz,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::Ex,
        Component::Ey,
        Component::Ez,
        Component::Hx,
        Component::Hy,
        Component::Hz,
    ];

    pub fn is_electric(self) -> bool {
        matches!(self, Component::Ex | Component::Ey | Component::Ez)
    }

    pub fn axis(self) -> Axis {
        match self {
            Component::Ex | Component::Hx => Axis::X,
            Component::Ey | Component::Hy => Axis::Y,
            Component::Ez | Component::Hz => Axis::Z,
        }
    }

    /// Yee half-cell offsets (0 = node aligned, 1 = half offset) per axis.
    pub fn offset(self) -> [u8; 3] {
        match self {
            Component::Ex => [1, 0, 0],
            Component::Ey => [0, 1, 0],
            Component::Ez => [0, 0, 1],
            Component::Hx => [0, 1, 1],
            Component::Hy => [1, 0, 1],
            Component::Hz => [1, 1, 0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Ex => "Ex",
            Component::Ey => "Ey",
            Component::Ez => "Ez",
            Component::Hx => "Hx",
            Component::Hy => "Hy",
            Component::Hz => "Hz",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Component::ALL
            .iter()
            .copied()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown field component '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: Dim,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    #[serde(default)]
    pub boundaries: Faces,
    #[serde(default)]
    pub scatterer: Option<Scatterer>,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub mu: f64,
}

fn one() -> f64 {
    1.0
}

impl GridSpec {
    pub fn new_2d(nx: usize, ny: usize) -> Result<Self> {
        let spec = GridSpec {
            dim: Dim::TwoD,
            nx,
            ny,
            nz: 1,
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
            boundaries: Faces::default(),
            scatterer: None,
            epsilon: 1.0,
            mu: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn new_3d(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let spec = GridSpec {
            dim: Dim::ThreeD,
            nx,
            ny,
            nz,
            ..GridSpec::new_2d(nx, ny)?
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_boundaries(mut self, faces: Faces) -> Self {
        self.boundaries = faces;
        self
    }

    pub fn with_spacing(mut self, dx: f64, dy: f64, dz: f64) -> Result<Self> {
        self.dx = dx;
        self.dy = dy;
        self.dz = dz;
        self.validate()?;
        Ok(self)
    }

    pub fn with_material(mut self, epsilon: f64, mu: f64) -> Result<Self> {
        self.epsilon = epsilon;
        self.mu = mu;
        self.validate()?;
        Ok(self)
    }

    pub fn with_scatterer(mut self, body: Scatterer) -> Result<Self> {
        self.scatterer = Some(body);
        self.validate()?;
        Ok(self)
    }

    pub fn extent(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
            Axis::Z => self.nz,
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx,
            Axis::Y => self.dy,
            Axis::Z => self.dz,
        }
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn validate(&self) -> Result<()> {
        for &axis in self.dim.axes() {
            let n = self.extent(axis);
            if n < 2 || !n.is_power_of_two() {
                return Err(Error::Grid(format!(
                    "extent along {axis:?} must be a power of two >= 2, got {n}"
                )));
            }
            let d = self.spacing(axis);
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Grid(format!("spacing along {axis:?} must be positive")));
            }
        }
        if self.dim == Dim::TwoD && self.nz != 1 {
            return Err(Error::Grid(format!("2D grids need nz = 1, got {}", self.nz)));
        }
        if !(self.epsilon > 0.0 && self.mu > 0.0) {
            return Err(Error::Grid("epsilon and mu must be positive".into()));
        }
        if let Some(body) = &self.scatterer {
            self.check_scatterer(body)?;
        }
        Ok(())
    }

    /// The body must sit strictly inside the domain (no contact with an
    /// outer face).
    pub(crate) fn check_scatterer(&self, body: &Scatterer) -> Result<()> {
        for &axis in self.dim.axes() {
            let k = axis.index();
            let n = self.extent(axis);
            if body.lo[k] > body.hi[k] {
                return Err(Error::Geometry(format!(
                    "scatterer lo > hi along {axis:?}"
                )));
            }
            if body.is_empty(self.dim) {
                continue;
            }
            if body.lo[k] == 0 || body.hi[k] + 1 >= n {
                return Err(Error::Geometry(format!(
                    "scatterer [{}, {}] along {axis:?} touches the outer boundary of 0..{}",
                    body.lo[k],
                    body.hi[k],
                    n - 1
                )));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> FieldLayout {
        FieldLayout::new(self.dim, [self.nx, self.ny, self.nz])
    }

    /// Classification of a storage slot: active unknown, zero padding, or a
    /// sample frozen at zero (inside the scatterer or tangential E on a PEC
    /// face).
    pub fn dof_status(&self, component: Component, idx: [usize; 3]) -> DofStatus {
        let layout = self.layout();
        if layout.is_pad_sample(component, idx) {
            return DofStatus::Padded;
        }
        let pos = layout.position(component, idx);
        let off = component.offset();
        if component.is_electric() {
            for &axis in self.dim.axes() {
                let k = axis.index();
                if off[k] != 0 {
                    continue;
                }
                let wall_hi = 2 * (self.extent(axis) as i64 - 1);
                if (pos[k] == 0 && self.boundaries.get(axis, false) == Boundary::Pec)
                    || (pos[k] == wall_hi && self.boundaries.get(axis, true) == Boundary::Pec)
                {
                    return DofStatus::Excluded;
                }
            }
        }
        if let Some(body) = self.scatterer.as_ref().filter(|b| !b.is_empty(self.dim)) {
            if body.strictly_inside(self.dim, pos) {
                return DofStatus::Excluded;
            }
            if component.is_electric() && body.in_closed_box(self.dim, pos) {
                for &axis in self.dim.axes() {
                    let k = axis.index();
                    if off[k] != 0 {
                        continue;
                    }
                    let on_lo = pos[k] == 2 * body.lo[k] as i64;
                    let on_hi = pos[k] == 2 * body.hi[k] as i64;
                    if (on_lo && body.faces.get(axis, false) == Boundary::Pec)
                        || (on_hi && body.faces.get(axis, true) == Boundary::Pec)
                    {
                        return DofStatus::Excluded;
                    }
                }
            }
        }
        DofStatus::Active
    }

    /// Status of a flat state index; pad blocks report `Padded`.
    pub fn dof_status_flat(&self, flat: usize) -> DofStatus {
        match self.layout().locate(flat) {
            Some((c, idx)) => self.dof_status(c, idx),
            None => DofStatus::Padded,
        }
    }

    /// Mask over the padded state: true for active unknowns.
    pub fn active_mask(&self) -> Vec<bool> {
        let layout = self.layout();
        (0..layout.len())
            .map(|f| self.dof_status_flat(f) == DofStatus::Active)
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofStatus {
    Active,
    Padded,
    Excluded,
}

/// Block ordering and flat-index rule of the stacked field vector.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLayout {
    pub dim: Dim,
    pub n: [usize; 3],
    /// Component stored in each block; `None` marks a zero pad block.
    pub blocks: Vec<Option<Component>>,
}

impl FieldLayout {
    pub fn new(dim: Dim, n: [usize; 3]) -> Self {
        use Component::*;
        let blocks = match dim {
            Dim::TwoD => vec![Some(Ez), Some(Hx), Some(Hy), None],
            Dim::ThreeD => vec![
                Some(Ex),
                Some(Ey),
                Some(Ez),
                Some(Hx),
                Some(Hy),
                Some(Hz),
                None,
                None,
            ],
        };
        let n = match dim {
            Dim::TwoD => [n[0], n[1], 1],
            Dim::ThreeD => n,
        };
        FieldLayout { dim, n, blocks }
    }

    pub fn cells(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Padded state length (a power of two).
    pub fn len(&self) -> usize {
        self.blocks.len() * self.cells()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of the non-pad blocks.
    pub fn active_len(&self) -> usize {
        self.components().count() * self.cells()
    }

    pub fn components(&self) -> impl Iterator<Item = Component> + '_ {
        self.blocks.iter().flatten().copied()
    }

    pub fn block_of(&self, c: Component) -> Option<usize> {
        self.blocks.iter().position(|b| *b == Some(c))
    }

    pub fn contains(&self, c: Component) -> bool {
        self.block_of(c).is_some()
    }

    /// Cell index within a block; x runs fastest.
    pub fn cell_index(&self, idx: [usize; 3]) -> usize {
        (idx[2] * self.n[1] + idx[1]) * self.n[0] + idx[0]
    }

    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let i = cell % self.n[0];
        let j = (cell / self.n[0]) % self.n[1];
        let k = cell / (self.n[0] * self.n[1]);
        [i, j, k]
    }

    pub fn flat_index(&self, c: Component, i: usize, j: usize, k: usize) -> Result<usize> {
        let block = self
            .block_of(c)
            .ok_or_else(|| Error::Range(format!("component {c} is not part of a {:?} layout", self.dim)))?;
        let idx = [i, j, k];
        for a in 0..3 {
            if idx[a] >= self.n[a] {
                return Err(Error::Range(format!(
                    "{c} index {:?} outside grid {:?}",
                    idx, self.n
                )));
            }
        }
        Ok(block * self.cells() + self.cell_index(idx))
    }

    /// Inverse of [`flat_index`](Self::flat_index); `None` inside pad blocks.
    pub fn locate(&self, flat: usize) -> Option<(Component, [usize; 3])> {
        let block = flat / self.cells();
        let c = (*self.blocks.get(block)?)?;
        Some((c, self.cell_coords(flat % self.cells())))
    }

    /// Doubled integer position of a sample. In 2D the z coordinate is 0.
    pub fn position(&self, c: Component, idx: [usize; 3]) -> [i64; 3] {
        let off = c.offset();
        let mut p = [0i64; 3];
        for &axis in self.dim.axes() {
            let k = axis.index();
            p[k] = 2 * idx[k] as i64 + off[k] as i64;
        }
        p
    }

    /// Storage slot at the high end of a staggered axis, beyond the last
    /// physical half-offset sample.
    pub fn is_pad_sample(&self, c: Component, idx: [usize; 3]) -> bool {
        let off = c.offset();
        self.dim
            .axes()
            .iter()
            .any(|a| off[a.index()] == 1 && idx[a.index()] == self.n[a.index()] - 1)
    }

    /// Sample of `c` at a doubled position, if it lies on the storage grid.
    pub fn sample_at(&self, c: Component, pos: [i64; 3]) -> Option<[usize; 3]> {
        let off = c.offset();
        let mut idx = [0usize; 3];
        for &axis in self.dim.axes() {
            let k = axis.index();
            let shifted = pos[k] - off[k] as i64;
            if shifted < 0 || shifted % 2 != 0 {
                return None;
            }
            let i = (shifted / 2) as usize;
            if i >= self.n[k] {
                return None;
            }
            idx[k] = i;
        }
        Some(idx)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub values: Vec<f64>,
    pub layout: FieldLayout,
    pub time: f64,
}

impl FieldState {
    pub fn zeros(layout: &FieldLayout) -> Self {
        FieldState {
            values: vec![0.0; layout.len()],
            layout: layout.clone(),
            time: 0.0,
        }
    }

    pub fn from_values(layout: &FieldLayout, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Dimension {
                expected: layout.len(),
                got: values.len(),
            });
        }
        Ok(FieldState {
            values,
            layout: layout.clone(),
            time,
        })
    }

    pub fn get(&self, c: Component, idx: [usize; 3]) -> Result<f64> {
        Ok(self.values[self.layout.flat_index(c, idx[0], idx[1], idx[2])?])
    }

    /// Values of one component block.
    pub fn component(&self, c: Component) -> Result<&[f64]> {
        let block = self
            .layout
            .block_of(c)
            .ok_or_else(|| Error::Range(format!("component {c} not in layout")))?;
        let n = self.layout.cells();
        Ok(&self.values[block * n..(block + 1) * n])
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// True when every pad-block entry is exactly zero.
    pub fn pad_is_zero(&self) -> bool {
        let n = self.layout.cells();
        self.layout
            .blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.is_none())
            .all(|(blk, _)| self.values[blk * n..(blk + 1) * n].iter().all(|v| *v == 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Impulse {
    pub component: Component,
    pub index: [usize; 3],
    pub amplitude: f64,
}

impl Impulse {
    pub fn new(component: Component, index: [usize; 3], amplitude: f64) -> Self {
        Impulse {
            component,
            index,
            amplitude,
        }
    }
}

pub fn flat_index(layout: &FieldLayout, c: Component, i: usize, j: usize, k: usize) -> Result<usize> {
    layout.flat_index(c, i, j, k)
}

/// Number of system qubits: log2 of the padded state length.
pub fn qubit_count(spec: &GridSpec) -> usize {
    spec.layout().len().trailing_zeros() as usize
}

pub fn pack_initial_condition(spec: &GridSpec, impulses: &[Impulse]) -> Result<FieldState> {
    let layout = spec.layout();
    let mut state = FieldState::zeros(&layout);
    for imp in impulses {
        let [i, j, k] = imp.index;
        let flat = layout.flat_index(imp.component, i, j, k)?;
        match spec.dof_status(imp.component, imp.index) {
            DofStatus::Active => state.values[flat] += imp.amplitude,
            DofStatus::Padded => {
                return Err(Error::Placement(format!(
                    "{} at {:?} is a padding sample",
                    imp.component, imp.index
                )))
            }
            DofStatus::Excluded => {
                return Err(Error::Placement(format!(
                    "{} at {:?} lies inside the scatterer or on a frozen PEC face",
                    imp.component, imp.index
                )))
            }
        }
    }
    Ok(state)
}

/// Nonzero entries of a state as impulses, in flat-index order.
pub fn unpack_impulses(state: &FieldState) -> Vec<Impulse> {
    state
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .filter_map(|(f, v)| {
            state
                .layout
                .locate(f)
                .map(|(c, idx)| Impulse::new(c, idx, *v))
        })
        .collect()
}
