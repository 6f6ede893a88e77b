//! Tensor-product decomposition over {σ00, σ01, σ10, σ11, I} and compilation
//! of each Hermitian pair `S + S†` into a Bell block `O · CRZ · O†`.

use std::collections::HashMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::gate::{inverse_sequence, Control, Gate};
use crate::error::{Error, Result};
use crate::sparse::{ComplexOperator, Scalar, Sparse};

type C = Complex64;

/// Single-qubit factor. `S01 = |0⟩⟨1|`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    S00,
    S01,
    S10,
    S11,
    Id,
}

impl Tag {
    pub fn is_flip(self) -> bool {
        matches!(self, Tag::S01 | Tag::S10)
    }

    /// (row bit, column bit) of a rank-one tag.
    fn bits(self) -> Option<(u8, u8)> {
        match self {
            Tag::S00 => Some((0, 0)),
            Tag::S01 => Some((0, 1)),
            Tag::S10 => Some((1, 0)),
            Tag::S11 => Some((1, 1)),
            Tag::Id => None,
        }
    }

    fn adjoint(self) -> Tag {
        match self {
            Tag::S01 => Tag::S10,
            Tag::S10 => Tag::S01,
            t => t,
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::S00 => "S00",
            Tag::S01 => "S01",
            Tag::S10 => "S10",
            Tag::S11 => "S11",
            Tag::Id => "I",
        };
        f.write_str(s)
    }
}

/// `coefficient · ⊗_q factors[q]`, qubit `q` being bit `q` of the index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorTerm {
    pub coefficient: C,
    pub factors: Vec<Tag>,
}

impl TensorTerm {
    pub fn n_qubits(&self) -> usize {
        self.factors.len()
    }

    pub fn is_diagonal(&self) -> bool {
        !self.factors.iter().any(|t| t.is_flip())
    }

    pub fn flip_qubits(&self) -> Vec<usize> {
        (0..self.factors.len()).filter(|&q| self.factors[q].is_flip()).collect()
    }

    pub fn adjoint(&self) -> TensorTerm {
        TensorTerm {
            coefficient: self.coefficient.conj(),
            factors: self.factors.iter().map(|t| t.adjoint()).collect(),
        }
    }

    /// Nonzero (row, col) positions of the tensor product.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0usize, 0usize)];
        for (q, t) in self.factors.iter().enumerate() {
            let choices: Vec<(u8, u8)> = match t.bits() {
                Some(b) => vec![b],
                None => vec![(0, 0), (1, 1)],
            };
            out = out
                .iter()
                .flat_map(|&(r, c)| {
                    choices
                        .iter()
                        .map(move |&(rb, cb)| (r | (rb as usize) << q, c | (cb as usize) << q))
                })
                .collect();
        }
        out
    }

    pub fn to_sparse(&self) -> ComplexOperator {
        let dim = 1usize << self.n_qubits();
        Sparse::from_triplets(
            dim,
            dim,
            self.positions().into_iter().map(|(r, c)| (r, c, self.coefficient)),
        )
        .expect("in range")
    }
}

type Partial = (Vec<Tag>, C);

fn key(f: &[Tag], c: C) -> (Vec<Tag>, u64, u64) {
    (f.to_vec(), c.re.to_bits(), c.im.to_bits())
}

/// Quadtree split on the most significant remaining qubit; identical σ00 and
/// σ11 sub-terms are merged into I. Terms partition the nonzero entries.
fn split(entries: Vec<(usize, usize, C)>, n: usize) -> Vec<Partial> {
    if n == 0 {
        return entries
            .into_iter()
            .filter(|e| e.2 != C::new(0.0, 0.0))
            .map(|e| (Vec::new(), e.2))
            .collect();
    }
    let q = n - 1;
    let mut quads: [Vec<(usize, usize, C)>; 4] = Default::default();
    let low = !(1usize << q);
    for (r, c, v) in entries {
        let slot = (r >> q & 1) << 1 | (c >> q & 1);
        quads[slot].push((r & low, c & low, v));
    }
    let [e00, e01, e10, e11] = quads;
    let t00 = if e00.is_empty() { Vec::new() } else { split(e00, q) };
    let t11 = if e11.is_empty() { Vec::new() } else { split(e11, q) };
    let mut pending: HashMap<(Vec<Tag>, u64, u64), Vec<usize>> = HashMap::new();
    for (i, (f, c)) in t11.iter().enumerate() {
        pending.entry(key(f, *c)).or_default().push(i);
    }
    for v in pending.values_mut() {
        v.reverse();
    }
    let mut used = vec![false; t11.len()];
    let mut common = Vec::new();
    let mut only00 = Vec::new();
    for (f, c) in t00 {
        match pending.get_mut(&key(&f, c)).and_then(Vec::pop) {
            Some(i) => {
                used[i] = true;
                common.push((f, c));
            }
            None => only00.push((f, c)),
        }
    }
    let tagged = |tag: Tag| move |(mut f, c): Partial| {
        f.push(tag);
        (f, c)
    };
    let mut out: Vec<Partial> = common.into_iter().map(tagged(Tag::Id)).collect();
    out.extend(only00.into_iter().map(tagged(Tag::S00)));
    out.extend(
        t11.into_iter()
            .zip(used)
            .filter(|(_, u)| !u)
            .map(|(t, _)| t)
            .map(tagged(Tag::S11)),
    );
    if !e01.is_empty() {
        out.extend(split(e01, q).into_iter().map(tagged(Tag::S01)));
    }
    if !e10.is_empty() {
        out.extend(split(e10, q).into_iter().map(tagged(Tag::S10)));
    }
    out
}

pub fn tensorize<T: Scalar>(h: &Sparse<T>) -> Result<Vec<TensorTerm>> {
    let dim = h.nrows();
    if !h.is_square() || !dim.is_power_of_two() {
        return Err(Error::Size(format!(
            "{}x{} operator is not a square power-of-two matrix",
            h.nrows(),
            h.ncols()
        )));
    }
    let n = dim.trailing_zeros() as usize;
    let entries = h.triplets().map(|(r, c, v)| (r, c, v.to_complex())).collect();
    Ok(split(entries, n)
        .into_iter()
        .map(|(factors, coefficient)| TensorTerm {
            coefficient,
            factors,
        })
        .collect())
}

/// Dense sum of the terms.
pub fn reconstruct(terms: &[TensorTerm], dim: usize) -> DMatrix<C> {
    let mut m = DMatrix::zeros(dim, dim);
    for t in terms {
        for (r, c) in t.positions() {
            m[(r, c)] += t.coefficient;
        }
    }
    m
}

pub fn reconstruct_sparse(terms: &[TensorTerm], dim: usize) -> ComplexOperator {
    Sparse::from_triplets(
        dim,
        dim,
        terms
            .iter()
            .flat_map(|t| t.positions().into_iter().map(move |(r, c)| (r, c, t.coefficient))),
    )
    .expect("in range")
}

/// `S` together with its adjoint: `S + S† = w (e^{iλ} M + e^{-iλ} M†)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdjointPair {
    /// Representative whose lowest flip factor is `S01`.
    pub term: TensorTerm,
    pub weight: f64,
    pub phase: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub pairs: Vec<AdjointPair>,
    pub diagonal: Vec<TensorTerm>,
}

pub fn pair_adjoints(terms: &[TensorTerm]) -> Result<Decomposition> {
    let lookup: HashMap<&[Tag], C> = terms
        .iter()
        .filter(|t| !t.is_diagonal())
        .map(|t| (t.factors.as_slice(), t.coefficient))
        .collect();
    let mut out = Decomposition::default();
    for t in terms {
        if t.is_diagonal() {
            if t.coefficient.im.abs() > 1e-12 * t.coefficient.norm().max(1.0) {
                return Err(Error::Hermiticity(format!(
                    "diagonal term {} has complex weight {}",
                    describe(&t.factors),
                    t.coefficient
                )));
            }
            out.diagonal.push(t.clone());
            continue;
        }
        let adj = t.adjoint();
        let partner = lookup.get(adj.factors.as_slice()).copied();
        match partner {
            Some(c) if (c - adj.coefficient).norm() <= 1e-12 * c.norm().max(1.0) => {}
            _ => {
                return Err(Error::Hermiticity(format!(
                    "term {} ({}) has no matching adjoint",
                    describe(&t.factors),
                    t.coefficient
                )))
            }
        }
        let first_flip = t.flip_qubits()[0];
        if t.factors[first_flip] == Tag::S01 {
            out.pairs.push(AdjointPair {
                term: t.clone(),
                weight: t.coefficient.norm(),
                phase: t.coefficient.arg(),
            });
        }
    }
    Ok(out)
}

fn describe(f: &[Tag]) -> String {
    f.iter().map(Tag::to_string).collect::<Vec<_>>().join("⊗")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlRole {
    On0,
    On1,
    /// Non-target flip qubit, controlled on 1 after the basis change.
    Bell,
    None,
}

/// Circuit for `exp(i dt (S + S†))`: `O†`, then a rotation on the target
/// controlled by the other qubits, then `O`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BellBlock {
    pub factors: Vec<Tag>,
    /// Row / column bitstrings in qubit order (char `q` is qubit `q`); `*`
    /// marks identity spectators.
    pub a: String,
    pub b: String,
    pub flip_qubits: Vec<usize>,
    pub controls: Vec<ControlRole>,
    pub target: usize,
    /// `2 · weight · dt`.
    pub theta: f64,
    pub weight: f64,
    /// Phase λ of the coefficient, absorbed into `O`.
    pub phase: f64,
}

pub fn build_bell_block(pair: &AdjointPair, dt: f64) -> Result<BellBlock> {
    let f = &pair.term.factors;
    let flip_qubits = pair.term.flip_qubits();
    let Some(&target) = flip_qubits.first() else {
        return Err(Error::Usage(
            "diagonal term has no flip qubits; compile it as a DiagonalBlock".into(),
        ));
    };
    let bitstring = |pick: fn((u8, u8)) -> u8| -> String {
        f.iter()
            .map(|t| t.bits().map_or('*', |b| if pick(b) == 1 { '1' } else { '0' }))
            .collect()
    };
    let controls = f
        .iter()
        .enumerate()
        .map(|(q, t)| match t {
            _ if q == target => ControlRole::None,
            Tag::S01 | Tag::S10 => ControlRole::Bell,
            Tag::S00 => ControlRole::On0,
            Tag::S11 => ControlRole::On1,
            Tag::Id => ControlRole::None,
        })
        .collect();
    Ok(BellBlock {
        factors: f.clone(),
        a: bitstring(|b| b.0),
        b: bitstring(|b| b.1),
        flip_qubits,
        controls,
        target,
        theta: 2.0 * pair.weight * dt,
        weight: pair.weight,
        phase: pair.phase,
    })
}

impl BellBlock {
    fn a_bit(&self, q: usize) -> bool {
        self.a.as_bytes()[q] == b'1'
    }

    /// `O` in time order: maps `|0⟩_t|1…1⟩` to `(|a⟩ + e^{-iλ}|b⟩)/√2` and
    /// `|1⟩_t|1…1⟩` to `(|a⟩ − e^{-iλ}|b⟩)/√2` (up to `e^{iλ/2}`).
    pub fn basis_change(&self) -> Vec<Gate> {
        let t = self.target;
        let mut g = vec![Gate::h(t)];
        if self.phase != 0.0 {
            g.push(Gate::rz(t, self.phase));
        }
        let others = &self.flip_qubits[1..];
        g.extend(others.iter().map(|&k| Gate::cnot(t, k)));
        if self.a_bit(t) {
            g.push(Gate::x(t));
        }
        g.extend(others.iter().filter(|&&k| !self.a_bit(k)).map(|&k| Gate::x(k)));
        g
    }

    pub fn rotation_controls(&self) -> Vec<Control> {
        self.controls
            .iter()
            .enumerate()
            .filter_map(|(q, r)| match r {
                ControlRole::On0 => Some(Control::on0(q)),
                ControlRole::On1 | ControlRole::Bell => Some(Control::on1(q)),
                ControlRole::None => None,
            })
            .collect()
    }

    /// Full block in time order.
    pub fn gates(&self) -> Vec<Gate> {
        self.gates_scaled(&[(None, 1.0)])
    }

    /// `O†`, one rotation per `(extra control, angle scale)` entry, `O`.
    pub fn gates_scaled(&self, rotations: &[(Option<Control>, f64)]) -> Vec<Gate> {
        let o = self.basis_change();
        let mut g = inverse_sequence(&o);
        let base = self.rotation_controls();
        for &(extra, scale) in rotations {
            let mut c = base.clone();
            c.extend(extra);
            g.push(Gate::mcrz(c, self.target, self.theta * scale));
        }
        g.extend(o);
        g
    }
}

/// `exp(i c dt P)` for a diagonal product of projectors (and identities).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalBlock {
    pub factors: Vec<Tag>,
    pub coefficient: f64,
    pub dt: f64,
}

impl DiagonalBlock {
    pub fn new(term: &TensorTerm, dt: f64) -> Result<Self> {
        if !term.is_diagonal() {
            return Err(Error::Usage("term is not diagonal".into()));
        }
        Ok(DiagonalBlock {
            factors: term.factors.clone(),
            coefficient: term.coefficient.re,
            dt,
        })
    }

    /// Gates and global phase for `exp(i scale c dt P)`, optionally
    /// conditioned on `extra` being 1 (the phase is then a rotation on it).
    pub fn gates(&self, extra: Option<usize>, scale: f64) -> (Vec<Gate>, f64) {
        let fixed: Vec<(usize, bool)> = self
            .factors
            .iter()
            .enumerate()
            .filter_map(|(q, t)| match t {
                Tag::S00 => Some((q, false)),
                Tag::S11 => Some((q, true)),
                _ => None,
            })
            .collect();
        let mut tau = self.coefficient * self.dt * scale;
        let mut gates = Vec::with_capacity(fixed.len() + 1);
        for (i, &(q, one)) in fixed.iter().enumerate() {
            let mut controls: Vec<Control> = fixed[i + 1..]
                .iter()
                .map(|&(p, o)| Control { qubit: p, on_one: o })
                .collect();
            controls.extend(extra.map(Control::on1));
            let s = if one { -1.0 } else { 1.0 };
            gates.push(Gate::mcrz(controls, q, s * tau));
            tau /= 2.0;
        }
        match extra {
            Some(e) => {
                gates.push(Gate::rz(e, -tau));
                (gates, tau / 2.0)
            }
            None => (gates, tau),
        }
    }
}

/// All blocks of one Hermitian operator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CompiledOperator {
    pub blocks: Vec<BellBlock>,
    pub diagonal: Vec<DiagonalBlock>,
}

impl CompiledOperator {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty() && self.diagonal.is_empty()
    }

    pub fn len(&self) -> usize {
        self.blocks.len() + self.diagonal.len()
    }
}

pub fn compile_operator<T: Scalar>(h: &Sparse<T>, dt: f64) -> Result<CompiledOperator> {
    let terms = tensorize(h)?;
    let dec = pair_adjoints(&terms)?;
    Ok(CompiledOperator {
        blocks: dec
            .pairs
            .iter()
            .map(|p| build_bell_block(p, dt))
            .collect::<Result<_>>()?,
        diagonal: dec
            .diagonal
            .iter()
            .map(|t| DiagonalBlock::new(t, dt))
            .collect::<Result<_>>()?,
    })
}

pub fn blocks_to_json(blocks: &[BellBlock]) -> Result<String> {
    Ok(serde_json::to_string_pretty(blocks)?)
}
