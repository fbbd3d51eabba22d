//! Circuit representation: gate lists and classically specified basis rules.
//!
//! A circuit is compiled to its unitary, applied to a single basis state,
//! or reduced to `tr_{leftmost t}(U_C)` column by column without ever
//! materializing `U_C`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{is_unitary, qubit_mask, ComplexMatrix, UnitarityCheck, C64, DEFAULT_TOL, ONE, ZERO};

/// Widest circuit [`CircuitSpec::compile_unitary`] will materialize.
pub const DENSE_CAP: usize = 14;
/// Widest circuit [`CircuitSpec::traced_block_unitary`] accepts.
pub const TRACED_CAP: usize = 18;
/// Basis rules up to this width get a full orthonormality check.
pub const FULL_CHECK_WIDTH: usize = 12;
/// Column pairs inspected by the sampled unitarity check.
pub const SAMPLED_PAIRS: usize = 256;

/// `R½`, the rotation used by the USAT circuit.
pub fn r_half() -> [C64; 4] {
    let s = 0.75f64.sqrt();
    [C64::new(0.5, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(0.5, 0.0)]
}

#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    X,
    Cnot,
    Swap,
    Toffoli,
    RHalf,
    /// Row-major 2x2 unitary.
    Custom1Q([C64; 4]),
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::X | GateKind::RHalf | GateKind::Custom1Q(_) => 1,
            GateKind::Cnot | GateKind::Swap => 2,
            GateKind::Toffoli => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    kind: GateKind,
    targets: Vec<usize>,
}

impl Gate {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Result<Self> {
        if targets.len() != kind.arity() {
            return Err(Error::Validation(format!(
                "{:?} takes {} targets, got {}",
                kind,
                kind.arity(),
                targets.len()
            )));
        }
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                return Err(Error::Validation(format!("repeated target qubit {t}")));
            }
        }
        if let GateKind::Custom1Q(u) = &kind {
            let m = ComplexMatrix::new(2, 2, u.to_vec())?;
            let check = is_unitary(&m, DEFAULT_TOL)?;
            if !check.unitary {
                return Err(Error::Validation(format!(
                    "custom gate is not unitary (residual {:.3e})",
                    check.residual
                )));
            }
        }
        Ok(Self { kind, targets })
    }

    pub fn x(q: usize) -> Self {
        Self::new(GateKind::X, vec![q]).unwrap()
    }

    pub fn cnot(control: usize, target: usize) -> Result<Self> {
        Self::new(GateKind::Cnot, vec![control, target])
    }

    pub fn swap(a: usize, b: usize) -> Result<Self> {
        Self::new(GateKind::Swap, vec![a, b])
    }

    pub fn toffoli(a: usize, b: usize, target: usize) -> Result<Self> {
        Self::new(GateKind::Toffoli, vec![a, b, target])
    }

    pub fn r_half(q: usize) -> Self {
        Self::new(GateKind::RHalf, vec![q]).unwrap()
    }

    pub fn custom(q: usize, u: [C64; 4]) -> Result<Self> {
        Self::new(GateKind::Custom1Q(u), vec![q])
    }

    pub fn kind(&self) -> &GateKind {
        &self.kind
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Applies the gate in place to a `width`-qubit state vector.
    pub fn apply(&self, width: usize, state: &mut [C64]) {
        let mask = |q: usize| qubit_mask(width, q);
        match &self.kind {
            GateKind::X => {
                let m = mask(self.targets[0]);
                for i in (0..state.len()).filter(|i| i & m == 0) {
                    state.swap(i, i | m);
                }
            }
            GateKind::Cnot => {
                let (mc, mt) = (mask(self.targets[0]), mask(self.targets[1]));
                for i in (0..state.len()).filter(|i| i & mc != 0 && i & mt == 0) {
                    state.swap(i, i | mt);
                }
            }
            GateKind::Swap => {
                let (ma, mb) = (mask(self.targets[0]), mask(self.targets[1]));
                for i in (0..state.len()).filter(|i| i & ma != 0 && i & mb == 0) {
                    state.swap(i, i ^ ma ^ mb);
                }
            }
            GateKind::Toffoli => {
                let (ma, mb, mt) = (
                    mask(self.targets[0]),
                    mask(self.targets[1]),
                    mask(self.targets[2]),
                );
                for i in (0..state.len()).filter(|i| i & ma != 0 && i & mb != 0 && i & mt == 0) {
                    state.swap(i, i | mt);
                }
            }
            GateKind::RHalf => apply_1q(&r_half(), mask(self.targets[0]), state),
            GateKind::Custom1Q(u) => apply_1q(u, mask(self.targets[0]), state),
        }
    }
}

fn apply_1q(u: &[C64; 4], m: usize, state: &mut [C64]) {
    for i in 0..state.len() {
        if i & m == 0 {
            let (a, b) = (state[i], state[i | m]);
            state[i] = u[0] * a + u[1] * b;
            state[i | m] = u[2] * a + u[3] * b;
        }
    }
}

/// Sparse image of one basis state: `(output index, amplitude)` pairs.
pub type SparseColumn = Vec<(usize, C64)>;

type RuleFn = dyn Fn(usize) -> SparseColumn + Send + Sync;

/// A circuit given by its action on each computational basis state.
#[derive(Clone)]
pub struct BasisRule {
    width: usize,
    rule: Arc<RuleFn>,
    cost: usize,
    label: String,
}

impl fmt::Debug for BasisRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisRule")
            .field("width", &self.width)
            .field("cost", &self.cost)
            .field("label", &self.label)
            .finish()
    }
}

impl BasisRule {
    /// `cost` is the circuit size charged when the rule is submitted as a
    /// query.
    pub fn new(
        width: usize,
        cost: usize,
        label: impl Into<String>,
        rule: impl Fn(usize) -> SparseColumn + Send + Sync + 'static,
    ) -> Self {
        Self {
            width,
            rule: Arc::new(rule),
            cost,
            label: label.into(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cost(&self) -> usize {
        self.cost
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[derive(Debug, Clone)]
pub enum CircuitBody {
    Gates(Vec<Gate>),
    Rule(BasisRule),
}

/// A square `width`-qubit circuit.
#[derive(Debug, Clone)]
pub struct CircuitSpec {
    width: usize,
    body: CircuitBody,
}

impl CircuitSpec {
    pub fn from_gates(width: usize, gates: Vec<Gate>) -> Result<Self> {
        if width == 0 {
            return Err(Error::Validation("circuit width must be positive".into()));
        }
        if width >= usize::BITS as usize - 1 {
            return Err(Error::Resource(format!("width {width} cannot be indexed")));
        }
        for g in &gates {
            if let Some(t) = g.targets.iter().find(|&&t| t >= width) {
                return Err(Error::Validation(format!(
                    "gate target {t} outside a {width}-qubit circuit"
                )));
            }
        }
        Ok(Self {
            width,
            body: CircuitBody::Gates(gates),
        })
    }

    pub fn identity(width: usize) -> Result<Self> {
        Self::from_gates(width, Vec::new())
    }

    pub fn from_rule(rule: BasisRule) -> Result<Self> {
        if rule.width == 0 {
            return Err(Error::Validation("circuit width must be positive".into()));
        }
        if rule.width >= usize::BITS as usize - 1 {
            return Err(Error::Resource(format!("width {} cannot be indexed", rule.width)));
        }
        Ok(Self {
            width: rule.width,
            body: CircuitBody::Rule(rule),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn body(&self) -> &CircuitBody {
        &self.body
    }

    pub fn dim(&self) -> usize {
        1 << self.width
    }

    /// Circuit size `|C|`: gate count, or the rule's declared cost.
    pub fn size(&self) -> usize {
        match &self.body {
            CircuitBody::Gates(g) => g.len(),
            CircuitBody::Rule(r) => r.cost,
        }
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.dim() {
            return Err(Error::dim(format!(
                "basis index {index} outside a {}-qubit register",
                self.width
            )));
        }
        Ok(())
    }

    /// Applies a gate-list body to a dense state; rules are applied
    /// column by column.
    pub fn apply_to_state(&self, state: &[C64]) -> Result<Vec<C64>> {
        if state.len() != self.dim() {
            return Err(Error::dim(format!(
                "state of length {} for a {}-qubit circuit",
                state.len(),
                self.width
            )));
        }
        match &self.body {
            CircuitBody::Gates(gates) => {
                let mut out = state.to_vec();
                for g in gates {
                    g.apply(self.width, &mut out);
                }
                Ok(out)
            }
            CircuitBody::Rule(_) => {
                let mut out = vec![ZERO; self.dim()];
                for (i, &amp) in state.iter().enumerate() {
                    if amp == ZERO {
                        continue;
                    }
                    for (j, a) in self.column_sparse(i)? {
                        out[j] += amp * a;
                    }
                }
                Ok(out)
            }
        }
    }

    /// The nonzero entries of column `index` of `U_C`.
    pub fn column_sparse(&self, index: usize) -> Result<SparseColumn> {
        self.check_index(index)?;
        match &self.body {
            CircuitBody::Gates(gates) => {
                let mut v = vec![ZERO; self.dim()];
                v[index] = ONE;
                for g in gates {
                    g.apply(self.width, &mut v);
                }
                Ok(v.into_iter()
                    .enumerate()
                    .filter(|(_, z)| *z != ZERO)
                    .collect())
            }
            CircuitBody::Rule(rule) => {
                let raw = (rule.rule)(index);
                if raw.is_empty() {
                    return Err(Error::Validation(format!(
                        "basis rule produced no output for index {index}"
                    )));
                }
                let mut merged: Vec<(usize, C64)> = Vec::with_capacity(raw.len());
                for (j, a) in raw {
                    if j >= self.dim() {
                        return Err(Error::Validation(format!(
                            "basis rule output index {j} outside the register"
                        )));
                    }
                    if !a.re.is_finite() || !a.im.is_finite() {
                        return Err(Error::Validation("basis rule amplitude is not finite".into()));
                    }
                    match merged.iter_mut().find(|(k, _)| *k == j) {
                        Some((_, acc)) => *acc += a,
                        None => merged.push((j, a)),
                    }
                }
                Ok(merged)
            }
        }
    }

    /// Column `index` of `U_C` as a dense vector.
    pub fn apply_to_basis(&self, index: usize) -> Result<Vec<C64>> {
        let mut v = vec![ZERO; self.dim()];
        for (j, a) in self.column_sparse(index)? {
            v[j] = a;
        }
        Ok(v)
    }

    /// Same as [`apply_to_basis`](Self::apply_to_basis), taking the index
    /// as a bit string (leftmost character = qubit 0).
    pub fn apply_to_basis_bits(&self, bits: &str) -> Result<Vec<C64>> {
        if bits.len() != self.width {
            return Err(Error::dim(format!(
                "basis string of length {} for a {}-qubit circuit",
                bits.len(),
                self.width
            )));
        }
        let index = usize::from_str_radix(bits, 2)
            .map_err(|_| Error::Validation(format!("{bits:?} is not a bit string")))?;
        self.apply_to_basis(index)
    }

    pub fn compile_unitary(&self) -> Result<ComplexMatrix> {
        self.compile_unitary_capped(DENSE_CAP)
    }

    pub fn compile_unitary_capped(&self, cap: usize) -> Result<ComplexMatrix> {
        if self.width > cap {
            return Err(Error::Resource(format!(
                "{}-qubit circuit exceeds the dense cap of {cap} qubits",
                self.width
            )));
        }
        if let CircuitBody::Rule(_) = &self.body {
            let check = self.check_unitary(DEFAULT_TOL)?;
            if !check.unitary {
                return Err(Error::Validation(format!(
                    "basis rule is not unitary (residual {:.3e})",
                    check.residual
                )));
            }
        }
        let dim = self.dim();
        let mut u = ComplexMatrix::zeros(dim, dim);
        for c in 0..dim {
            for (r, a) in self.column_sparse(c)? {
                u[(r, c)] = a;
            }
        }
        Ok(u)
    }

    /// `tr_{leftmost traced_qubits}(U_C)`, accumulated from basis columns:
    /// `V[y', y] = Σ_x ⟨x, y'| U_C |x, y⟩`.
    pub fn traced_block_unitary(&self, traced_qubits: usize) -> Result<ComplexMatrix> {
        if traced_qubits > self.width {
            return Err(Error::dim(format!(
                "cannot trace {traced_qubits} qubits of a {}-qubit circuit",
                self.width
            )));
        }
        if self.width > TRACED_CAP {
            return Err(Error::Resource(format!(
                "{}-qubit circuit exceeds the traced-path cap of {TRACED_CAP} qubits",
                self.width
            )));
        }
        let rest_bits = self.width - traced_qubits;
        let rest = 1usize << rest_bits;
        let blocks = 1usize << traced_qubits;
        let columns: Vec<Vec<C64>> = (0..rest)
            .into_par_iter()
            .map(|y| {
                let mut col = vec![ZERO; rest];
                for x in 0..blocks {
                    let input = (x << rest_bits) | y;
                    for (out, a) in self.column_sparse(input)? {
                        if out >> rest_bits == x {
                            col[out & (rest - 1)] += a;
                        }
                    }
                }
                Ok(col)
            })
            .collect::<Result<_>>()?;
        let mut v = ComplexMatrix::zeros(rest, rest);
        for (y, col) in columns.iter().enumerate() {
            v.set_col(y, col);
        }
        Ok(v)
    }

    /// Unitarity of `U_C`.
    ///
    /// Gate lists up to 10 qubits and basis rules up to
    /// [`FULL_CHECK_WIDTH`] qubits get an exact Gram-matrix check. Wider
    /// circuits get every column norm plus [`SAMPLED_PAIRS`] seeded random
    /// column pairs; the residual then covers only the inspected entries.
    pub fn check_unitary(&self, tol: f64) -> Result<UnitarityCheck> {
        match &self.body {
            CircuitBody::Gates(_) if self.width <= 10 => {
                is_unitary(&self.compile_unitary_unchecked()?, tol)
            }
            CircuitBody::Rule(_) if self.width <= FULL_CHECK_WIDTH => self.sparse_gram_check(tol),
            _ => self.sampled_check(tol),
        }
    }

    fn compile_unitary_unchecked(&self) -> Result<ComplexMatrix> {
        let dim = self.dim();
        let mut u = ComplexMatrix::zeros(dim, dim);
        for c in 0..dim {
            for (r, a) in self.column_sparse(c)? {
                u[(r, c)] = a;
            }
        }
        Ok(u)
    }

    // Columns are orthonormal iff U†U = I; for a square matrix that also
    // gives UU† = I.
    fn sparse_gram_check(&self, tol: f64) -> Result<UnitarityCheck> {
        let dim = self.dim();
        let mut by_row: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        let mut diag_err = 0.0;
        for c in 0..dim {
            let col = self.column_sparse(c)?;
            let norm: f64 = col.iter().map(|(_, a)| a.norm_sqr()).sum();
            diag_err += (norm - 1.0).powi(2);
            for (r, a) in col {
                by_row[r].push((c, a));
            }
        }
        let mut off: HashMap<(usize, usize), C64> = HashMap::new();
        for row in &by_row {
            for (i, &(c1, a1)) in row.iter().enumerate() {
                for &(c2, a2) in &row[i + 1..] {
                    let key = if c1 < c2 { (c1, c2) } else { (c2, c1) };
                    let v = if c1 < c2 { a1.conj() * a2 } else { a2.conj() * a1 };
                    *off.entry(key).or_insert(ZERO) += v;
                }
            }
        }
        let off_err: f64 = off.values().map(|z| 2.0 * z.norm_sqr()).sum();
        let residual = (diag_err + off_err).sqrt();
        Ok(UnitarityCheck {
            unitary: residual <= tol,
            residual,
        })
    }

    fn sampled_check(&self, tol: f64) -> Result<UnitarityCheck> {
        let dim = self.dim();
        let mut acc = 0.0;
        for c in 0..dim {
            let norm: f64 = self.column_sparse(c)?.iter().map(|(_, a)| a.norm_sqr()).sum();
            acc += (norm - 1.0).powi(2);
        }
        let mut rng = rng::stream(self.width as u64, "unitarity-sample", 0);
        for _ in 0..SAMPLED_PAIRS {
            let c1 = rng.random_range(0..dim);
            let mut c2 = rng.random_range(0..dim - 1);
            if c2 >= c1 {
                c2 += 1;
            }
            let a = self.column_sparse(c1)?;
            let b = self.column_sparse(c2)?;
            let mut inner = ZERO;
            for &(i, x) in &a {
                for &(j, y) in &b {
                    if i == j {
                        inner += x.conj() * y;
                    }
                }
            }
            acc += 2.0 * inner.norm_sqr();
        }
        let residual = acc.sqrt();
        Ok(UnitarityCheck {
            unitary: residual <= tol,
            residual,
        })
    }

    /// Text form of a gate-list circuit; `None` for basis rules.
    pub fn to_text(&self) -> Option<String> {
        let CircuitBody::Gates(gates) = &self.body else {
            return None;
        };
        let mut out = format!("qubits {}\n", self.width);
        for g in gates {
            let t = &g.targets;
            let line = match &g.kind {
                GateKind::X => format!("X {}", t[0]),
                GateKind::Cnot => format!("CNOT {} {}", t[0], t[1]),
                GateKind::Swap => format!("SWAP {} {}", t[0], t[1]),
                GateKind::Toffoli => format!("TOF {} {} {}", t[0], t[1], t[2]),
                GateKind::RHalf => format!("RHALF {}", t[0]),
                GateKind::Custom1Q(u) => {
                    let mut s = format!("CUSTOM {}", t[0]);
                    for z in u {
                        s.push_str(&format!(" {:?} {:?}", z.re, z.im));
                    }
                    s
                }
            };
            out.push_str(&line);
            out.push('\n');
        }
        Some(out)
    }
}

/// Parses the circuit text format:
///
/// ```text
/// qubits 3
/// X 0
/// CNOT 0 1
/// SWAP 1 2
/// TOF 0 1 2
/// RHALF 2
/// CUSTOM 0 re00 im00 re01 im01 re10 im10 re11 im11
/// ```
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_circuit(text: &str) -> Result<CircuitSpec> {
    let mut width: Option<usize> = None;
    let mut gates = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        let args: Vec<&str> = tokens.collect();
        let ints = |expected: usize| -> Result<Vec<usize>> {
            if args.len() != expected {
                return Err(Error::parse(
                    line_no,
                    format!("{head} expects {expected} arguments, got {}", args.len()),
                ));
            }
            args.iter()
                .map(|a| {
                    a.parse::<usize>()
                        .map_err(|_| Error::parse(line_no, format!("bad qubit index {a:?}")))
                })
                .collect()
        };
        if head.eq_ignore_ascii_case("qubits") {
            if width.is_some() {
                return Err(Error::parse(line_no, "duplicate qubits header"));
            }
            let w = ints(1)?[0];
            if w == 0 {
                return Err(Error::parse(line_no, "width must be positive"));
            }
            width = Some(w);
            continue;
        }
        let w = width.ok_or_else(|| Error::parse(line_no, "missing `qubits <width>` header"))?;
        let gate = match head.to_ascii_uppercase().as_str() {
            "X" => Gate::new(GateKind::X, ints(1)?),
            "CNOT" => Gate::new(GateKind::Cnot, ints(2)?),
            "SWAP" => Gate::new(GateKind::Swap, ints(2)?),
            "TOF" => Gate::new(GateKind::Toffoli, ints(3)?),
            "RHALF" => Gate::new(GateKind::RHalf, ints(1)?),
            "CUSTOM" => {
                if args.len() != 9 {
                    return Err(Error::parse(line_no, "CUSTOM expects a qubit and 8 reals"));
                }
                let q = args[0]
                    .parse::<usize>()
                    .map_err(|_| Error::parse(line_no, format!("bad qubit index {:?}", args[0])))?;
                let mut vals = [0.0f64; 8];
                for (v, a) in vals.iter_mut().zip(&args[1..]) {
                    *v = a
                        .parse::<f64>()
                        .map_err(|_| Error::parse(line_no, format!("bad real {a:?}")))?;
                }
                let u = [
                    C64::new(vals[0], vals[1]),
                    C64::new(vals[2], vals[3]),
                    C64::new(vals[4], vals[5]),
                    C64::new(vals[6], vals[7]),
                ];
                Gate::new(GateKind::Custom1Q(u), vec![q])
            }
            other => return Err(Error::parse(line_no, format!("unknown gate {other:?}"))),
        }
        .map_err(|e| Error::parse(line_no, e.to_string()))?;
        if let Some(t) = gate.targets.iter().find(|&&t| t >= w) {
            return Err(Error::parse(
                line_no,
                format!("target {t} outside a {w}-qubit circuit"),
            ));
        }
        gates.push(gate);
    }
    let w = width.ok_or_else(|| Error::parse(1, "missing `qubits <width>` header"))?;
    CircuitSpec::from_gates(w, gates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::partial_trace_left;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_gate_circuit(rng: &mut ChaCha8Rng, width: usize, len: usize) -> CircuitSpec {
        let mut gates = Vec::new();
        while gates.len() < len {
            let pick = rng.random_range(0..6);
            let q = |rng: &mut ChaCha8Rng| rng.random_range(0..width);
            let g = match pick {
                0 => Some(Gate::x(q(rng))),
                1 if width >= 2 => Gate::cnot(q(rng), q(rng)).ok(),
                2 if width >= 2 => Gate::swap(q(rng), q(rng)).ok(),
                3 if width >= 3 => Gate::toffoli(q(rng), q(rng), q(rng)).ok(),
                4 => Some(Gate::r_half(q(rng))),
                5 => {
                    let th: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let ph: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                    let (c, s) = (th.cos(), th.sin());
                    let e = C64::from_polar(1.0, ph);
                    Gate::custom(q(rng), [C64::new(c, 0.0), -s * e.conj(), C64::new(s, 0.0), c * e.conj()]).ok()
                }
                _ => None,
            };
            if let Some(g) = g {
                gates.push(g);
            }
        }
        CircuitSpec::from_gates(width, gates).unwrap()
    }

    #[test]
    fn single_gate_compilation() {
        let c = CircuitSpec::from_gates(1, vec![Gate::x(0)]).unwrap();
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(c.compile_unitary().unwrap(), x);

        let c = CircuitSpec::from_gates(1, vec![Gate::r_half(0)]).unwrap();
        let s = 0.75f64.sqrt();
        let r = ComplexMatrix::from_real(2, 2, &[0.5, -s, s, 0.5]).unwrap();
        assert_eq!(c.compile_unitary().unwrap(), r);
    }

    #[test]
    fn cnot_uses_leftmost_qubit_as_msb() {
        let c = CircuitSpec::from_gates(2, vec![Gate::cnot(0, 1).unwrap()]).unwrap();
        let u = c.compile_unitary().unwrap();
        let expect = ComplexMatrix::from_real(
            4,
            4,
            &[
                1.0, 0.0, 0.0, 0.0, //
                0.0, 1.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 1.0, //
                0.0, 0.0, 1.0, 0.0,
            ],
        )
        .unwrap();
        assert_eq!(u, expect);
    }

    #[test]
    fn basis_application() {
        let id = CircuitSpec::identity(3).unwrap();
        for x in 0..8 {
            let v = id.apply_to_basis(x).unwrap();
            assert_eq!(v[x], ONE);
            assert_eq!(v.iter().filter(|z| **z != ZERO).count(), 1);
        }
        let flip = CircuitSpec::from_gates(3, vec![Gate::x(2)]).unwrap();
        for x in 0..8 {
            assert_eq!(flip.apply_to_basis(x).unwrap()[x ^ 1], ONE);
        }
        assert_eq!(flip.apply_to_basis_bits("110").unwrap()[0b111], ONE);
        assert!(flip.apply_to_basis_bits("11").is_err());
        assert!(flip.apply_to_basis(8).is_err());
    }

    #[test]
    fn random_circuits_columns_match_compiled_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for width in 1..=6 {
            let c = random_gate_circuit(&mut rng, width, 12);
            let u = c.compile_unitary().unwrap();
            assert!(is_unitary(&u, 1e-10).unwrap().unitary);
            for x in 0..c.dim() {
                let col = c.apply_to_basis(x).unwrap();
                let expect = u.col(x);
                for (a, b) in col.iter().zip(&expect) {
                    assert!((a - b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn traced_block_agrees_with_dense_partial_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for width in 1..=8 {
            let c = random_gate_circuit(&mut rng, width, 10);
            let u = c.compile_unitary().unwrap();
            for t in 0..=width {
                let fast = c.traced_block_unitary(t).unwrap();
                let dense = partial_trace_left(&u, t).unwrap();
                assert!(fast.frobenius_distance(&dense) < 1e-10);
            }
        }
    }

    #[test]
    fn traced_identity_is_scaled_identity() {
        let c = CircuitSpec::identity(5).unwrap();
        let v = c.traced_block_unitary(2).unwrap();
        assert_eq!(v, ComplexMatrix::identity(8).scale(C64::new(4.0, 0.0)));
    }

    #[test]
    fn non_unitary_rule_is_rejected() {
        let rule = BasisRule::new(2, 1, "collapse", |_| vec![(0, ONE)]);
        let c = CircuitSpec::from_rule(rule).unwrap();
        assert!(!c.check_unitary(1e-10).unwrap().unitary);
        assert!(matches!(c.compile_unitary(), Err(Error::Validation(_))));

        let empty = BasisRule::new(1, 1, "empty", |_| vec![]);
        let c = CircuitSpec::from_rule(empty).unwrap();
        assert!(c.apply_to_basis(0).is_err());
    }

    #[test]
    fn sampled_check_flags_collapsing_rule() {
        // a permutation on 14 qubits except that two columns coincide
        let rule = BasisRule::new(14, 1, "almost", |x| {
            let y = if x == 1 { 0 } else { x };
            vec![(y, ONE)]
        });
        let c = CircuitSpec::from_rule(rule).unwrap();
        // the broken column pair is not necessarily sampled, but the norms are fine
        // and the orthogonality defect is the only error, so the residual is
        // either 0 or √2
        let r = c.check_unitary(1e-10).unwrap().residual;
        assert!(r == 0.0 || (r - 2f64.sqrt()).abs() < 1e-12);

        let ok = BasisRule::new(14, 1, "xor", |x| vec![(x ^ 0b101, ONE)]);
        let c = CircuitSpec::from_rule(ok).unwrap();
        assert!(c.check_unitary(1e-10).unwrap().unitary);
    }

    #[test]
    fn compile_cap_enforced() {
        let c = CircuitSpec::identity(15).unwrap();
        assert!(matches!(c.compile_unitary(), Err(Error::Resource(_))));
        let c = CircuitSpec::identity(19).unwrap();
        assert!(matches!(c.traced_block_unitary(9), Err(Error::Resource(_))));
    }

    #[test]
    fn gate_validation() {
        assert!(Gate::cnot(1, 1).is_err());
        assert!(CircuitSpec::from_gates(2, vec![Gate::x(2)]).is_err());
        let bad = [ONE, ONE, ZERO, ONE];
        assert!(Gate::custom(0, bad).is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let text = "qubits 3\n# comment\nX 0\nCNOT 0 1\nSWAP 1 2\nTOF 0 1 2\nRHALF 2\nCUSTOM 1 0 0 1 0 1 0 0 0\n";
        let c = parse_circuit(text).unwrap();
        assert_eq!(c.size(), 6);
        let again = parse_circuit(&c.to_text().unwrap()).unwrap();
        assert_eq!(c.compile_unitary().unwrap(), again.compile_unitary().unwrap());

        for (bad, line) in [
            ("X 0\n", 1),
            ("qubits 2\nX 2\n", 2),
            ("qubits 2\nFOO 1\n", 2),
            ("qubits 2\n\nCNOT 0\n", 3),
            ("qubits 1\nCUSTOM 0 1 0 1 0 0 0 1 0\n", 2),
        ] {
            match parse_circuit(bad) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{bad:?}"),
                other => panic!("{bad:?} gave {other:?}"),
            }
        }
    }
}
