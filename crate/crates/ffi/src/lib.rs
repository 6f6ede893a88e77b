//! C interface to the qmaxwell pipeline.
//!
//! Every call returns a [`QmStatus`]; results go through out-pointers.
//! After a failure [`qm_last_error`] describes it until the next call on
//! the same thread. Handles are opaque and must be released with their
//! `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qmaxwell::grid::{self, Boundary, Component, Faces, GridSpec, Impulse};
use qmaxwell::measure::ProbeRequest;
use qmaxwell::pipeline::{probe_trace, Backend, Frame, Pipeline, ProbeOutcome, ProbeSettings, Scenario, ScenarioKind};
use qmaxwell::schrodinger::PRegister;
use qmaxwell::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Infeasible = 3,
    Io = 4,
    IndeterminateSign = 5,
    NoResult = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmComponent {
    Ex = 0,
    Ey = 1,
    Ez = 2,
    Hx = 3,
    Hy = 4,
    Hz = 5,
}

impl From<QmComponent> for Component {
    fn from(c: QmComponent) -> Self {
        match c {
            QmComponent::Ex => Component::Ex,
            QmComponent::Ey => Component::Ey,
            QmComponent::Ez => Component::Ez,
            QmComponent::Hx => Component::Hx,
            QmComponent::Hy => Component::Hy,
            QmComponent::Hz => Component::Hz,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmBackend {
    Oracle = 0,
    LiftedExact = 1,
    Circuit = 2,
}

impl From<QmBackend> for Backend {
    fn from(b: QmBackend) -> Self {
        match b {
            QmBackend::Oracle => Backend::Oracle,
            QmBackend::LiftedExact => Backend::LiftedExact,
            QmBackend::Circuit => Backend::Circuit,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QmWalls {
    Pmc = 0,
    Pec = 1,
}

/// Grid geometry and wall conditions.
pub struct QmGrid {
    spec: GridSpec,
}

/// A grid with its initial impulses, register and the most recent run.
pub struct QmSimulation {
    spec: GridSpec,
    impulses: Vec<Impulse>,
    reg: PRegister,
    pipeline: Option<Pipeline>,
    last: Option<Frame>,
}

/// Signed probe result. `sign` is 0 when the sign could not be resolved,
/// in which case `value` is NaN.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct QmProbe {
    pub value: f64,
    pub magnitude: f64,
    pub sign: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QmStatus {
    match e {
        Error::IndeterminateSign { .. } => QmStatus::IndeterminateSign,
        Error::Io(_) => QmStatus::Io,
        e if e.exit_code() == 3 => QmStatus::Infeasible,
        _ => QmStatus::Config,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
    NoResult(&'static str),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QmStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QmStatus::NullPointer
        }
        Ok(Err(Fail::NoResult(what))) => {
            set_error(what.to_string());
            QmStatus::NoResult
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            QmStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn qm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a 2D grid (`nz` = 0) or a 3D grid. Sizes must be powers of two.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qm_grid_new(nx: usize, ny: usize, nz: usize, walls: QmWalls, out: *mut *mut QmGrid) -> QmStatus {
    guard(|| {
        let out = deref_mut(out, "out")?;
        let spec = if nz == 0 { GridSpec::new_2d(nx, ny)? } else { GridSpec::new_3d(nx, ny, nz)? };
        let b = match walls {
            QmWalls::Pmc => Boundary::Pmc,
            QmWalls::Pec => Boundary::Pec,
        };
        let spec = spec.with_boundaries(Faces::uniform(b));
        *out = Box::into_raw(Box::new(QmGrid { spec }));
        Ok(())
    })
}

/// # Safety
/// `grid` must come from [`qm_grid_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn qm_grid_free(grid: *mut QmGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Number of qubits in the system register.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_grid_qubit_count(grid: *const QmGrid, out: *mut usize) -> QmStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        *deref_mut(out, "out")? = grid::qubit_count(&g.spec);
        Ok(())
    })
}

/// Position of a sample in the state vector.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_grid_flat_index(
    grid: *const QmGrid,
    component: QmComponent,
    i: usize,
    j: usize,
    k: usize,
    out: *mut usize,
) -> QmStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        *deref_mut(out, "out")? = g.spec.layout().flat_index(component.into(), i, j, k)?;
        Ok(())
    })
}

/// Starts a simulation on a copy of `grid` with an `n_a`-qubit momentum
/// register spanning `[p_min, p_max)`.
///
/// # Safety
/// `grid` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_simulation_new(
    grid: *const QmGrid,
    n_a: usize,
    p_min: f64,
    p_max: f64,
    out: *mut *mut QmSimulation,
) -> QmStatus {
    guard(|| {
        let g = deref(grid, "grid")?;
        let out = deref_mut(out, "out")?;
        let reg = PRegister::new(n_a, p_min, p_max)?;
        *out = Box::into_raw(Box::new(QmSimulation {
            spec: g.spec.clone(),
            impulses: Vec::new(),
            reg,
            pipeline: None,
            last: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `sim` must come from [`qm_simulation_new`] and not be used afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn qm_simulation_free(sim: *mut QmSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Adds a point source to the initial condition. Clears any previous run.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qm_simulation_add_impulse(
    sim: *mut QmSimulation,
    component: QmComponent,
    i: usize,
    j: usize,
    k: usize,
    amplitude: f64,
) -> QmStatus {
    guard(|| {
        let s = deref_mut(sim, "sim")?;
        let imp = Impulse::new(component.into(), [i, j, k], amplitude);
        grid::pack_initial_condition(&s.spec, std::slice::from_ref(&imp))?;
        s.impulses.push(imp);
        s.pipeline = None;
        s.last = None;
        Ok(())
    })
}

impl QmSimulation {
    fn pipeline(&mut self) -> Result<&Pipeline, Fail> {
        if self.impulses.is_empty() {
            return Err(Fail::NoResult("no impulse has been added"));
        }
        if self.pipeline.is_none() {
            let kind = if self.spec.dim == grid::Dim::ThreeD { ScenarioKind::Empty3d } else { ScenarioKind::Empty2d };
            let scenario = Scenario {
                kind,
                spec: self.spec.clone(),
                impulses: self.impulses.clone(),
            };
            self.pipeline = Some(Pipeline::new(scenario, self.reg)?);
        }
        Ok(self.pipeline.as_ref().expect("built above"))
    }
}

/// Evolves the initial condition for `steps` of `dt` and keeps the final field.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qm_simulation_run(sim: *mut QmSimulation, backend: QmBackend, dt: f64, steps: usize) -> QmStatus {
    guard(|| {
        let s = deref_mut(sim, "sim")?;
        s.last = None;
        let p = s.pipeline()?;
        let u0 = p.scenario.initial_state()?;
        let frame = p.run(backend.into(), &u0, dt, steps, &[steps])?.pop();
        s.last = frame;
        Ok(())
    })
}

/// Time reached by the last run.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_simulation_time(sim: *const QmSimulation, out: *mut f64) -> QmStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let f = s.last.as_ref().ok_or(Fail::NoResult("no completed run"))?;
        *deref_mut(out, "out")? = f.time;
        Ok(())
    })
}

/// Reads one sample of the field from the last run.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_simulation_read_field(
    sim: *const QmSimulation,
    component: QmComponent,
    i: usize,
    j: usize,
    k: usize,
    out: *mut f64,
) -> QmStatus {
    guard(|| {
        let s = deref(sim, "sim")?;
        let f = s.last.as_ref().ok_or(Fail::NoResult("no completed run"))?;
        *deref_mut(out, "out")? = f.field.get(component.into(), [i, j, k])?;
        Ok(())
    })
}

/// Runs the offset protocol and returns the signed value of one sample at
/// `steps · dt`. `shots` = 0 reads the amplitudes exactly; otherwise the
/// magnitudes are estimated from that many samples drawn with `seed`.
/// The oracle backend is rejected.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qm_simulation_probe(
    sim: *mut QmSimulation,
    backend: QmBackend,
    dt: f64,
    steps: usize,
    component: QmComponent,
    i: usize,
    j: usize,
    k: usize,
    shots: u64,
    seed: u64,
    out: *mut QmProbe,
) -> QmStatus {
    guard(|| {
        let s = deref_mut(sim, "sim")?;
        let out = deref_mut(out, "out")?;
        let p = s.pipeline()?;
        let req = ProbeRequest {
            component: component.into(),
            index: [i, j, k],
            reference: None,
        };
        let settings = ProbeSettings {
            shots: (shots > 0).then_some(shots),
            seed,
            ..Default::default()
        };
        let trace = probe_trace(p, backend.into(), dt, steps, &[steps], &[req], &settings)?;
        let sample = trace.samples.last().ok_or(Fail::NoResult("probe produced no sample"))?;
        *out = match sample.outcome {
            ProbeOutcome::Signed(r) => QmProbe {
                value: r.value,
                magnitude: r.magnitude,
                sign: r.sign as i32,
            },
            ProbeOutcome::Indeterminate { magnitude, .. } => QmProbe {
                value: f64::NAN,
                magnitude,
                sign: 0,
            },
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_out_pointer_is_reported() {
        let st = unsafe { qm_grid_new(4, 4, 0, QmWalls::Pmc, ptr::null_mut()) };
        assert_eq!(st, QmStatus::NullPointer);
        assert!(!qm_last_error().is_null());
    }

    #[test]
    fn bad_size_maps_to_config() {
        let mut g = ptr::null_mut();
        let st = unsafe { qm_grid_new(12, 4, 0, QmWalls::Pmc, &mut g) };
        assert_eq!(st, QmStatus::Config);
        assert!(g.is_null());
    }

    #[test]
    fn success_clears_the_error() {
        let mut g = ptr::null_mut();
        unsafe {
            qm_grid_new(3, 4, 0, QmWalls::Pmc, &mut g);
            assert_eq!(qm_grid_new(4, 4, 0, QmWalls::Pmc, &mut g), QmStatus::Ok);
            assert!(qm_last_error().is_null());
            qm_grid_free(g);
        }
    }
}
