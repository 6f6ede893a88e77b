//! Scenarios and the end-to-end evolution pipeline: assembly, Hermitian
//! split, lifting, circuit simulation or exact evolution, and recovery.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bell::compile_operator;
use crate::circuit::{StatsBuilder, TrotterProgram};
use crate::curl::assemble_generator;
use crate::error::{Error, Result};
use crate::grid::{pack_initial_condition, Boundary, Component, Dim, Faces, FieldState, GridSpec, Impulse, Scatterer};
use crate::measure::{
    apply_offset, offset_field, signed_field_at, OffsetResponse, ProbeContext, ProbeRequest, Readout, RemovalMode,
    SignedReading,
};
use crate::oracle::{component_errors, ErrorTable, Oracle, OracleMethod};
use crate::schrodinger::{
    evolve_lifted_exact, hermitian_split, initial_lifted_state, recover_solution, spectral_bound, HermitianPair,
    LiftedState, PRegister, RecoveryMode, SpectralBoundOptions,
};
use crate::sparse::{Sparse, SparseOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "2d-empty")]
    Empty2d,
    #[serde(rename = "2d-scatterer")]
    Scatterer2d,
    #[serde(rename = "3d-empty")]
    Empty3d,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [ScenarioKind::Empty2d, ScenarioKind::Scatterer2d, ScenarioKind::Empty3d];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Empty2d => "2d-empty",
            ScenarioKind::Scatterer2d => "2d-scatterer",
            ScenarioKind::Empty3d => "3d-empty",
        }
    }

    /// Default grid edge length.
    pub fn default_size(self) -> [usize; 3] {
        match self {
            ScenarioKind::Empty2d => [32, 32, 1],
            ScenarioKind::Scatterer2d => [16, 16, 1],
            ScenarioKind::Empty3d => [16, 16, 16],
        }
    }

    pub fn dim(self) -> Dim {
        match self {
            ScenarioKind::Empty3d => Dim::ThreeD,
            _ => Dim::TwoD,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

/// Grid plus initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub spec: GridSpec,
    pub impulses: Vec<Impulse>,
}

impl Scenario {
    pub fn preset(kind: ScenarioKind) -> Result<Self> {
        Scenario::sized(kind, kind.default_size())
    }

    /// The scenario on an `n` grid: centred unit `Ez` impulse for the empty
    /// grids; for the scatterer a body over `[n/4, 3n/4]` and the impulse at
    /// its lower corner `(n/4, n/4)`.
    pub fn sized(kind: ScenarioKind, n: [usize; 3]) -> Result<Self> {
        let (spec, at) = match kind {
            ScenarioKind::Empty2d => (GridSpec::new_2d(n[0], n[1])?, [n[0] / 2, n[1] / 2, 0]),
            ScenarioKind::Scatterer2d => {
                let body = Scatterer::new_2d([n[0] / 4, n[1] / 4], [3 * n[0] / 4, 3 * n[1] / 4]);
                (
                    GridSpec::new_2d(n[0], n[1])?.with_scatterer(body)?,
                    [n[0] / 4, n[1] / 4, 0],
                )
            }
            ScenarioKind::Empty3d => (GridSpec::new_3d(n[0], n[1], n[2])?, [n[0] / 2, n[1] / 2, n[2] / 2]),
        };
        let s = Scenario {
            kind,
            spec,
            impulses: vec![Impulse::new(Component::Ez, at, 1.0)],
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_boundaries(mut self, faces: Faces) -> Self {
        self.spec = self.spec.with_boundaries(faces);
        self
    }

    /// Same scenario with every outer wall a perfect electric conductor.
    pub fn with_pec_walls(self) -> Self {
        self.with_boundaries(Faces::uniform(Boundary::Pec))
    }

    pub fn with_impulses(mut self, impulses: Vec<Impulse>) -> Result<Self> {
        self.impulses = impulses;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        pack_initial_condition(&self.spec, &self.impulses).map(|_| ())
    }

    pub fn initial_state(&self) -> Result<FieldState> {
        pack_initial_condition(&self.spec, &self.impulses)
    }

    /// The excitation point, used as the default sign reference.
    pub fn excitation(&self) -> (Component, [usize; 3]) {
        self.impulses
            .first()
            .map(|i| (i.component, i.index))
            .unwrap_or((Component::Ez, [0, 0, 0]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// `e^{At}` directly.
    Oracle,
    /// Lifted system evolved exactly, then recovered.
    LiftedExact,
    /// Trotter circuit on a statevector, then recovered.
    Circuit,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Oracle => "oracle",
            Backend::LiftedExact => "lifted-exact",
            Backend::Circuit => "circuit",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Backend::Oracle, Backend::LiftedExact, Backend::Circuit]
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown backend {s:?}")))
    }
}

/// One recorded point of a run.
#[derive(Clone, Debug)]
pub struct Frame {
    pub step: usize,
    pub time: f64,
    pub field: FieldState,
    /// Register amplitudes behind `field`; `None` for the oracle.
    pub readout: Option<Readout>,
    pub imag_residual: f64,
}

/// Operators derived once per scenario and register.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub scenario: Scenario,
    pub a: SparseOperator,
    pub pair: HermitianPair,
    pub lambda_max: f64,
    pub reg: PRegister,
    pub recovery: RecoveryMode,
    pub oracle_method: OracleMethod,
}

impl Pipeline {
    pub fn new(scenario: Scenario, reg: PRegister) -> Result<Self> {
        Pipeline::with_seed(scenario, reg, SpectralBoundOptions::default().seed)
    }

    pub fn with_seed(scenario: Scenario, reg: PRegister, seed: u64) -> Result<Self> {
        scenario.validate()?;
        reg.validate()?;
        let a = assemble_generator(&scenario.spec)?;
        let pair = hermitian_split(&a)?;
        let lambda_max = spectral_bound(
            &pair.h1,
            SpectralBoundOptions {
                seed,
                ..Default::default()
            },
        );
        Ok(Pipeline {
            scenario,
            a,
            pair,
            lambda_max,
            reg,
            recovery: RecoveryMode::SingleSlice,
            oracle_method: OracleMethod::Auto,
        })
    }

    pub fn n_system(&self) -> usize {
        self.a.nrows().trailing_zeros() as usize
    }

    pub fn program(&self, dt: f64) -> Result<TrotterProgram> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step must be positive, got {dt}")));
        }
        let h1 = compile_operator(&self.pair.h1, dt)?;
        let h2 = compile_operator(&self.pair.h2, dt)?;
        crate::circuit::trotter_program(&h1, &h2, &self.reg, self.n_system(), dt)
    }

    /// Evolves `u0` for `steps` of `dt`, keeping the frames at the listed
    /// step numbers (sorted, deduplicated, at most `steps`).
    pub fn run(&self, backend: Backend, u0: &FieldState, dt: f64, steps: usize, record: &[usize]) -> Result<Vec<Frame>> {
        let mut record: Vec<usize> = record.iter().copied().filter(|&s| s <= steps).collect();
        record.sort_unstable();
        record.dedup();
        // snapped so 3 × 0.1 prints as 0.3
        let time = |s: usize| (s as f64 * dt * 1e9).round() / 1e9;
        match backend {
            Backend::Oracle => {
                let mut oracle = Oracle::new(&self.a, self.oracle_method)?;
                let times: Vec<f64> = record.iter().map(|&s| time(s)).collect();
                let states = oracle.trace(u0, &times)?;
                Ok(record
                    .iter()
                    .zip(states)
                    .map(|(&step, field)| Frame {
                        step,
                        time: time(step),
                        field,
                        readout: None,
                        imag_residual: 0.0,
                    })
                    .collect())
            }
            Backend::LiftedExact => {
                let v0 = initial_lifted_state(u0, &self.reg)?;
                record
                    .iter()
                    .map(|&step| {
                        let mut v = evolve_lifted_exact(&self.pair, &v0, time(step))?;
                        v.time = time(step);
                        self.frame(step, v)
                    })
                    .collect()
            }
            Backend::Circuit => {
                let program = self.program(dt)?;
                let v0 = initial_lifted_state(u0, &self.reg)?;
                let mut psi = program.initial_state(&u0.values)?;
                program.apply_prep(&mut psi)?;
                let mut frames = Vec::with_capacity(record.len());
                let mut done = 0;
                for &step in &record {
                    while done < step {
                        program.apply_step(&mut psi)?;
                        done += 1;
                    }
                    let phase = Complex64::from_polar(1.0, program.step_phase * step as f64);
                    let v = LiftedState {
                        amplitudes: psi.amps.iter().map(|a| a * phase).collect(),
                        time: time(step),
                        ..v0.clone()
                    };
                    frames.push(self.frame(step, v)?);
                }
                Ok(frames)
            }
        }
    }

    fn frame(&self, step: usize, v: LiftedState) -> Result<Frame> {
        let rec = recover_solution(&v, &self.scenario.spec.layout(), self.lambda_max, self.recovery)?;
        Ok(Frame {
            step,
            time: v.time,
            field: rec.field,
            imag_residual: rec.imag_residual,
            readout: Some(Readout {
                dim: v.dim,
                amps: v.amplitudes,
                slice: rec.slice,
                factor: rec.factor,
            }),
        })
    }

    /// Evolution of the offset alone at each recorded step, through the
    /// same backend so that subtraction cancels its discretisation error
    /// exactly (the evolution is linear).
    pub fn offset_responses(
        &self,
        backend: Backend,
        component: Component,
        c: f64,
        dt: f64,
        steps: usize,
        record: &[usize],
    ) -> Result<Vec<OffsetResponse>> {
        let base = offset_field(&self.scenario.spec, component, c)?;
        let frames = self.run(backend, &base, dt, steps, record)?;
        Ok(frames
            .into_iter()
            .map(|f| OffsetResponse {
                component,
                c,
                evolved: f.field,
            })
            .collect())
    }
}

/// A signed reading, or the magnitude alone when its sign was
/// indistinguishable from shot noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbeOutcome {
    Signed(SignedReading),
    Indeterminate { magnitude: f64, shots: Option<u64> },
}

#[derive(Clone, Debug)]
pub struct ProbeSample {
    pub time: f64,
    pub request: ProbeRequest,
    pub outcome: ProbeOutcome,
}

#[derive(Clone, Debug)]
pub struct ProbeSettings {
    pub offset: f64,
    pub removal: RemovalMode,
    pub shots: Option<u64>,
    pub seed: u64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            offset: 1.0,
            removal: RemovalMode::Evolved,
            shots: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ProbeTrace {
    pub samples: Vec<ProbeSample>,
    pub warnings: Vec<String>,
    /// Recovered (still offset) fields at each recorded step.
    pub frames: Vec<Frame>,
    /// Offset evolution matching each frame.
    pub responses: Vec<OffsetResponse>,
}

/// Runs the offset-shifted initial state and reads each probe with its
/// sign resolved against the excitation point.
pub fn probe_trace(
    pipeline: &Pipeline,
    backend: Backend,
    dt: f64,
    steps: usize,
    record: &[usize],
    probes: &[ProbeRequest],
    settings: &ProbeSettings,
) -> Result<ProbeTrace> {
    if backend == Backend::Oracle {
        return Err(Error::Usage("signed probes need a quantum backend".into()));
    }
    let u0 = pipeline.scenario.initial_state()?;
    let reference = pipeline.scenario.excitation();
    let shifted = apply_offset(&pipeline.scenario.spec, &u0, reference.0, settings.offset)?;
    let frames = pipeline.run(backend, &shifted.state, dt, steps, record)?;
    let steps_kept: Vec<usize> = frames.iter().map(|f| f.step).collect();
    let responses = pipeline.offset_responses(backend, reference.0, settings.offset, dt, steps, &steps_kept)?;
    let layout = pipeline.scenario.spec.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut samples = Vec::new();
    for (frame, response) in frames.iter().zip(&responses) {
        let readout = frame.readout.as_ref().expect("quantum backends carry a readout");
        let ctx = ProbeContext {
            readout,
            layout: &layout,
            response,
            removal: settings.removal,
            default_reference: reference,
        };
        for req in probes {
            let shots = settings.shots.map(|n| (n, &mut rng));
            let outcome = match signed_field_at(req, &ctx, shots) {
                Ok(r) => ProbeOutcome::Signed(r),
                Err(Error::IndeterminateSign { .. }) => {
                    let flat = layout.flat_index(req.component, req.index[0], req.index[1], req.index[2])?;
                    ProbeOutcome::Indeterminate {
                        magnitude: readout.factor * readout.amplitude(flat)?.norm(),
                        shots: settings.shots,
                    }
                }
                Err(e) => return Err(e),
            };
            samples.push(ProbeSample {
                time: frame.time,
                request: *req,
                outcome,
            });
        }
    }
    Ok(ProbeTrace {
        samples,
        warnings: shifted.warning.into_iter().collect(),
        frames,
        responses,
    })
}

/// Steps at which a run of `dt` reaches each of `times`.
pub fn steps_for(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let s = (t / dt).round();
            if (s * dt - t).abs() > 1e-9 * t.abs().max(1.0) || s < 0.0 {
                Err(Error::Config(format!("time {t} is not a multiple of dt {dt}")))
            } else {
                Ok(s as usize)
            }
        })
        .collect()
}

/// Per-component ℓ2 error of the circuit backend against the oracle.
pub fn trotter_error_table(pipeline: &Pipeline, dts: &[f64], times: &[f64]) -> Result<ErrorTable> {
    let u0 = pipeline.scenario.initial_state()?;
    let mut table = ErrorTable::new(pipeline.scenario.spec.layout().components().collect());
    let mut oracle = Oracle::new(&pipeline.a, pipeline.oracle_method)?;
    let reference = oracle.trace(&u0, times)?;
    for &dt in dts {
        let steps = steps_for(times, dt)?;
        let last = steps.iter().copied().max().unwrap_or(0);
        let frames = pipeline.run(Backend::Circuit, &u0, dt, last, &steps)?;
        for (&t, &s) in times.iter().zip(&steps) {
            let frame = frames
                .iter()
                .find(|f| f.step == s)
                .ok_or_else(|| Error::Usage(format!("no frame at step {s}")))?;
            let exact = reference
                .iter()
                .find(|r| (r.time - t).abs() < 1e-12)
                .expect("oracle traced every time");
            let errs = component_errors(&frame.field, exact)?;
            table.push(t, dt, errs.into_iter().map(|(_, e)| e).collect());
        }
    }
    Ok(table)
}

/// Two-qubit count after lowering of a representative block on `n` qubits:
/// flip factors on the upper half of the qubits, controls on the rest.
pub fn block_two_qubit_count(n: usize) -> Result<u64> {
    if !(2..=20).contains(&n) {
        return Err(Error::Range(format!("block width {n} outside 2..=20")));
    }
    let flips = n.div_ceil(2);
    let row = 0usize;
    let col = ((1usize << flips) - 1) << (n - flips);
    let dim = 1usize << n;
    let h = Sparse::from_triplets(
        dim,
        dim,
        vec![
            (row, col, Complex64::new(0.0, 1.0)),
            (col, row, Complex64::new(0.0, -1.0)),
        ],
    )?;
    let op = compile_operator(&h, 0.1)?;
    let mut stats = StatsBuilder::new(n);
    for g in op.blocks.iter().flat_map(|b| b.gates()) {
        stats.add(&g)?;
    }
    Ok(stats.finish().two_qubit_count)
}

/// Gate statistics of the full circuit, counted step by step.
pub fn circuit_stats(program: &TrotterProgram, steps: usize) -> Result<crate::circuit::GateStats> {
    let mut stats = StatsBuilder::new(program.n_qubits());
    for g in &program.prep {
        stats.add(g)?;
    }
    for _ in 0..steps {
        for g in &program.step {
            stats.add(g)?;
        }
    }
    Ok(stats.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::qubit_count;

    #[test]
    fn preset_qubit_counts() {
        let q: Vec<usize> = ScenarioKind::ALL
            .iter()
            .map(|&k| qubit_count(&Scenario::preset(k).unwrap().spec))
            .collect();
        assert_eq!(q, [12, 10, 15]);
    }

    #[test]
    fn names_round_trip() {
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!("4d".parse::<ScenarioKind>().is_err());
        assert_eq!("lifted-exact".parse::<Backend>().unwrap(), Backend::LiftedExact);
    }

    #[test]
    fn steps_for_rejects_off_lattice() {
        assert_eq!(steps_for(&[0.5, 1.0], 0.1).unwrap(), [5, 10]);
        assert!(steps_for(&[0.55], 0.1).is_err());
    }

    #[test]
    fn backends_agree_at_zero_steps() {
        let s = Scenario::sized(ScenarioKind::Empty2d, [4, 4, 1]).unwrap();
        let p = Pipeline::new(s, PRegister::default()).unwrap();
        let u0 = p.scenario.initial_state().unwrap();
        for b in [Backend::Oracle, Backend::LiftedExact, Backend::Circuit] {
            let f = p.run(b, &u0, 0.1, 0, &[0]).unwrap();
            let d: f64 = f[0].field.values.iter().zip(&u0.values).map(|(a, b)| (a - b).abs()).sum();
            assert!(d < 1e-12, "{b}: {d}");
        }
    }

    #[test]
    fn circuit_error_is_first_order() {
        let s = Scenario::sized(ScenarioKind::Empty2d, [4, 4, 1]).unwrap().with_pec_walls();
        let p = Pipeline::new(s, PRegister::default()).unwrap();
        let u0 = p.scenario.initial_state().unwrap();
        let o = p.run(Backend::Oracle, &u0, 0.01, 50, &[50]).unwrap();
        let err = |dt: f64, steps: usize| -> f64 {
            let c = p.run(Backend::Circuit, &u0, dt, steps, &[steps]).unwrap();
            component_errors(&c[0].field, &o[0].field).unwrap().iter().map(|e| e.1).sum()
        };
        let ratio = err(0.01, 50) / err(0.001, 500);
        assert!((7.0..13.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn block_counts_grow() {
        let a = block_two_qubit_count(4).unwrap();
        let b = block_two_qubit_count(8).unwrap();
        assert!(b > a && a > 0);
    }
}
