//! Offset protocol and sign-resolved readout of field values from the
//! lifted quantum state.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Component, DofStatus, FieldLayout, FieldState, GridSpec};

type C = Complex64;

/// Combined standard errors below which a sign is reported indeterminate.
pub const SIGN_SIGMA: f64 = 3.0;

#[derive(Clone, Debug)]
pub struct OffsetApplied {
    pub state: FieldState,
    pub component: Component,
    pub c: f64,
    pub warning: Option<String>,
}

/// Adds `c` to `component` at every active sample.
pub fn apply_offset(spec: &GridSpec, u0: &FieldState, component: Component, c: f64) -> Result<OffsetApplied> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Offset(format!("offset must be positive, got {c}")));
    }
    let layout = &u0.layout;
    let block = layout
        .block_of(component)
        .ok_or_else(|| Error::Offset(format!("{component} is not part of the layout")))?;
    let mut state = u0.clone();
    let cells = layout.cells();
    for cell in 0..cells {
        let idx = layout.cell_coords(cell);
        if spec.dof_status(component, idx) == DofStatus::Active {
            state.values[block * cells + cell] += c;
        }
    }
    // without sources the field never exceeds its initial peak
    let peak = u0.component(component)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let warning = (c <= peak).then(|| {
        format!("offset {c} does not exceed the initial peak {peak} of {component}; sign protection holds only at the boundary")
    });
    Ok(OffsetApplied {
        state,
        component,
        c,
        warning,
    })
}

/// The constant initial state `c · 1_component` on active samples.
pub fn offset_field(spec: &GridSpec, component: Component, c: f64) -> Result<FieldState> {
    let zero = FieldState::zeros(&spec.layout());
    Ok(apply_offset(spec, &zero, component, c)?.state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RemovalMode {
    /// Subtract the offset evolved by the same backend (exact by linearity).
    Evolved,
    /// Subtract the constant `c` from the offset component only.
    Constant,
}

/// Evolution of the offset alone, `c · 1_component`, by the backend in use.
#[derive(Clone, Debug)]
pub struct OffsetResponse {
    pub component: Component,
    pub c: f64,
    pub evolved: FieldState,
}

impl OffsetResponse {
    /// Correction to subtract at a flat index.
    pub fn correction(&self, flat: usize, mode: RemovalMode) -> f64 {
        match mode {
            RemovalMode::Evolved => self.evolved.values[flat],
            RemovalMode::Constant => {
                let initial_on = self
                    .evolved
                    .layout
                    .locate(flat)
                    .is_some_and(|(comp, _)| comp == self.component);
                // frozen samples never carried the offset and stay at zero
                if initial_on && self.evolved.values[flat] != 0.0 {
                    self.c
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn remove_offset(
    reading: &FieldState,
    response: &OffsetResponse,
    c: f64,
    mode: RemovalMode,
) -> Result<FieldState> {
    if (c - response.c).abs() > 1e-15 * c.abs().max(1.0) {
        return Err(Error::Offset(format!(
            "reading was shifted by {c} but the response is for {}",
            response.c
        )));
    }
    if reading.layout != response.evolved.layout {
        return Err(Error::Layout("offset response layout differs from the reading".into()));
    }
    let values = reading
        .values
        .iter()
        .enumerate()
        .map(|(f, v)| v - response.correction(f, mode))
        .collect();
    FieldState::from_values(&reading.layout, values, reading.time)
}

pub fn remove_offset_at(value: f64, flat: usize, response: &OffsetResponse, c: f64, mode: RemovalMode) -> Result<f64> {
    if (c - response.c).abs() > 1e-15 * c.abs().max(1.0) {
        return Err(Error::Offset(format!(
            "reading was shifted by {c} but the response is for {}",
            response.c
        )));
    }
    Ok(value - response.correction(flat, mode))
}

/// Unit-norm register amplitudes with the map back to physical values:
/// field value at flat index `s` is `factor · amps[slice · dim + s]`.
#[derive(Clone, Debug)]
pub struct Readout {
    pub amps: Vec<C>,
    pub dim: usize,
    pub slice: usize,
    pub factor: f64,
}

impl Readout {
    pub fn amplitude(&self, flat: usize) -> Result<C> {
        if flat >= self.dim {
            return Err(Error::Range(format!("flat index {flat} outside 0..{}", self.dim)));
        }
        self.amps
            .get(self.slice * self.dim + flat)
            .copied()
            .ok_or_else(|| Error::Range("ancilla slice outside the register".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard error; zero in exact mode.
    pub se: f64,
}

/// `|field|` at a flat index. With `shots`, estimated from simulated
/// measurement counts of the basis state.
pub fn magnitude_at<R: Rng>(readout: &Readout, flat: usize, shots: Option<(u64, &mut R)>) -> Result<Estimate> {
    let amp = readout.amplitude(flat)?;
    match shots {
        None => Ok(Estimate {
            value: readout.factor * amp.norm(),
            se: 0.0,
        }),
        Some((n, rng)) => {
            let p = amp.norm_sqr().clamp(0.0, 1.0);
            let hat = sample_fraction(p, n, rng)?;
            let se_p = (hat * (1.0 - hat) / n as f64).sqrt();
            let se = if hat > 0.0 {
                se_p / (2.0 * hat.sqrt())
            } else {
                1.0 / (n as f64).sqrt()
            };
            Ok(Estimate {
                value: readout.factor * hat.sqrt(),
                se: readout.factor * se,
            })
        }
    }
}

fn sample_fraction<R: Rng>(p: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::Config("shot count must be positive".into()));
    }
    let b = Binomial::new(shots, p).map_err(|e| Error::Config(format!("binomial: {e}")))?;
    Ok(b.sample(rng) as f64 / shots as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignEstimate {
    pub sign: i8,
    /// Estimates of `(M_ref + M)²` and `(M_ref − M)²` in physical units.
    pub plus: f64,
    pub minus: f64,
}

/// Relative sign of two real amplitudes from the interference estimator.
pub fn relative_sign<R: Rng>(
    readout: &Readout,
    reference: usize,
    target: usize,
    shots: Option<(u64, &mut R)>,
) -> Result<SignEstimate> {
    let (r, t) = (readout.amplitude(reference)?, readout.amplitude(target)?);
    let f2 = readout.factor * readout.factor;
    let (plus, minus, floor) = match shots {
        None => {
            let cross = (t * r.conj()).im.abs();
            if cross > 1e-6 * r.norm() * t.norm() {
                return Err(Error::ComplexPhase(format!(
                    "amplitudes {r} and {t} are not relatively real"
                )));
            }
            ((r + t).norm_sqr() * f2, (r - t).norm_sqr() * f2, 0.0)
        }
        Some((n, rng)) => {
            // each interference outcome fires with probability |r ± t|²/2
            let q_plus = ((r + t).norm_sqr() / 2.0).clamp(0.0, 1.0);
            let q_minus = ((r - t).norm_sqr() / 2.0).clamp(0.0, 1.0);
            let hp = sample_fraction(q_plus, n, rng)?;
            let hm = sample_fraction(q_minus, n, rng)?;
            let se = |h: f64| 2.0 * (h * (1.0 - h) / n as f64).sqrt();
            let combined = (se(hp).powi(2) + se(hm).powi(2)).sqrt();
            (2.0 * hp * f2, 2.0 * hm * f2, SIGN_SIGMA * combined * f2)
        }
    };
    if (plus - minus).abs() <= floor || plus == minus {
        return Err(Error::IndeterminateSign { plus, minus, floor });
    }
    Ok(SignEstimate {
        sign: if plus > minus { 1 } else { -1 },
        plus,
        minus,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRequest {
    pub component: Component,
    pub index: [usize; 3],
    /// Defaults to the offset component at the excitation point.
    pub reference: Option<(Component, [usize; 3])>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignedReading {
    pub magnitude: f64,
    pub sign: i8,
    pub value: f64,
    /// `None` in exact mode.
    pub shots: Option<u64>,
}

/// Everything needed to read signed values out of one evolved state.
pub struct ProbeContext<'a> {
    pub readout: &'a Readout,
    pub layout: &'a FieldLayout,
    pub response: &'a OffsetResponse,
    pub removal: RemovalMode,
    pub default_reference: (Component, [usize; 3]),
}

/// Magnitude, sign relative to the offset reference, then offset removal.
pub fn signed_field_at<R: Rng>(
    req: &ProbeRequest,
    ctx: &ProbeContext<'_>,
    mut shots: Option<(u64, &mut R)>,
) -> Result<SignedReading> {
    let flat = |c: Component, i: [usize; 3]| ctx.layout.flat_index(c, i[0], i[1], i[2]);
    let target = flat(req.component, req.index)?;
    let (rc, ri) = req.reference.unwrap_or(ctx.default_reference);
    let reference = flat(rc, ri)?;
    let n_shots = shots.as_ref().map(|(n, _)| *n);
    let m = magnitude_at(ctx.readout, target, shots.as_mut().map(|(n, r)| (*n, &mut **r)))?;
    let sign = if target == reference
        || (n_shots.is_none() && ctx.readout.amplitude(target)?.norm() * ctx.readout.factor < 1e-12)
    {
        1
    } else {
        relative_sign(ctx.readout, reference, target, shots.as_mut().map(|(n, r)| (*n, &mut **r)))?.sign
    };
    let raw = f64::from(sign) * m.value;
    let value = remove_offset_at(raw, target, ctx.response, ctx.response.c, ctx.removal)?;
    Ok(SignedReading {
        magnitude: value.abs(),
        sign: if value < 0.0 { -1 } else { 1 },
        value,
        shots: n_shots,
    })
}

/// Streams probe rows `time,component,i,j,k,value,magnitude,sign,shots`.
pub struct ProbeWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> ProbeWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(w);
        inner.write_record(["time", "component", "i", "j", "k", "value", "magnitude", "sign", "shots"])?;
        Ok(ProbeWriter { inner })
    }

    pub fn write(&mut self, time: f64, req: &ProbeRequest, r: &SignedReading) -> Result<()> {
        let [i, j, k] = req.index;
        self.inner.write_record([
            time.to_string(),
            req.component.to_string(),
            i.to_string(),
            j.to_string(),
            k.to_string(),
            format!("{:.12e}", r.value),
            format!("{:.12e}", r.magnitude),
            r.sign.to_string(),
            r.shots.map_or_else(|| "exact".to_string(), |s| s.to_string()),
        ])?;
        Ok(())
    }

    /// Row for a reading whose sign could not be resolved.
    pub fn write_indeterminate(&mut self, time: f64, req: &ProbeRequest, magnitude: f64, shots: Option<u64>) -> Result<()> {
        let [i, j, k] = req.index;
        self.inner.write_record([
            time.to_string(),
            req.component.to_string(),
            i.to_string(),
            j.to_string(),
            k.to_string(),
            "nan".to_string(),
            format!("{magnitude:.12e}"),
            "0".to_string(),
            shots.map_or_else(|| "exact".to_string(), |s| s.to_string()),
        ])?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.inner.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Impulse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type NoRng = ChaCha8Rng;

    fn readout(amps: Vec<C>) -> Readout {
        let dim = amps.len();
        Readout {
            amps,
            dim,
            slice: 0,
            factor: 1.0,
        }
    }

    #[test]
    fn offset_requires_positive_c() {
        let spec = GridSpec::new_2d(4, 4).unwrap();
        let u0 = FieldState::zeros(&spec.layout());
        assert!(matches!(apply_offset(&spec, &u0, Component::Ez, 0.0), Err(Error::Offset(_))));
    }

    #[test]
    fn unit_impulse_offset_is_flagged() {
        let spec = GridSpec::new_2d(4, 4).unwrap();
        let u0 = crate::grid::pack_initial_condition(&spec, &[Impulse::new(Component::Ez, [2, 2, 0], 1.0)]).unwrap();
        let o = apply_offset(&spec, &u0, Component::Ez, 1.0).unwrap();
        let ez = o.state.component(Component::Ez).unwrap();
        assert!(ez.iter().all(|v| (1.0..=2.0).contains(v)));
        assert!(o.warning.is_some());
        assert_eq!(o.state.component(Component::Hx).unwrap(), u0.component(Component::Hx).unwrap());
        assert!(apply_offset(&spec, &u0, Component::Ez, 1.5).unwrap().warning.is_none());
    }

    #[test]
    fn basis_state_magnitude() {
        let mut a = vec![C::new(0.0, 0.0); 4];
        a[2] = C::new(1.0, 0.0);
        let m = magnitude_at::<NoRng>(&readout(a), 2, None).unwrap();
        assert_eq!(m.value, 1.0);
        let u = readout(vec![C::new(0.5, 0.0); 4]);
        assert_eq!(magnitude_at::<NoRng>(&u, 3, None).unwrap().value, 0.5);
    }

    #[test]
    fn sign_arithmetic() {
        let r = readout(vec![C::new(0.5, 0.0), C::new(0.3, 0.0), C::new(0.4, 0.0), C::new(-0.4, 0.0)]);
        let s = relative_sign::<NoRng>(&r, 0, 1, None).unwrap();
        assert_eq!(s.sign, 1);
        assert!((s.plus - 0.64).abs() < 1e-15 && (s.minus - 0.04).abs() < 1e-15);
        let s = relative_sign::<NoRng>(&r, 2, 3, None).unwrap();
        assert_eq!(s.sign, -1);
        assert!(s.plus.abs() < 1e-15);
    }

    #[test]
    fn complex_relative_phase_is_rejected() {
        let r = readout(vec![C::new(0.5, 0.0), C::new(0.0, 0.5)]);
        assert!(matches!(relative_sign::<NoRng>(&r, 0, 1, None), Err(Error::ComplexPhase(_))));
    }

    #[test]
    fn shot_noise_floor() {
        let r = readout(vec![C::new(0.001, 0.0), C::new(0.0, 0.0), C::new(0.999999, 0.0), C::new(0.0, 0.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let e = relative_sign(&r, 0, 1, Some((100, &mut rng)));
        assert!(matches!(e, Err(Error::IndeterminateSign { .. })));
    }

    #[test]
    fn probe_csv_header() {
        let mut buf = Vec::new();
        {
            let mut w = ProbeWriter::new(&mut buf).unwrap();
            let req = ProbeRequest {
                component: Component::Hx,
                index: [1, 2, 0],
                reference: None,
            };
            let r = SignedReading {
                magnitude: 0.25,
                sign: -1,
                value: -0.25,
                shots: None,
            };
            w.write(0.5, &req, &r).unwrap();
            w.flush().unwrap();
        }
        let s = String::from_utf8(buf).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next().unwrap(), "time,component,i,j,k,value,magnitude,sign,shots");
        assert!(lines.next().unwrap().starts_with("0.5,Hx,1,2,0,-2.5"));
    }
}
