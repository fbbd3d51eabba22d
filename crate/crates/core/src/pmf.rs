//! Process-matrix machinery: double kets, the Choi-Jamiolkowski map and its
//! inverse, the indefinite operator, and the process-matrix channel (PMO)
//! of a generator query.
//!
//! Four-factor operators always use the order `A_I ⊗ P ⊗ A_O ⊗ F`. The CJ
//! matrix of a channel `(A_I ⊗ P) → (A_O ⊗ F)` is laid out as
//! `input ⊗ output`, which is exactly that order, so no permutation is
//! needed between [`cj`] and [`indefinite_operator`].

use serde::Serialize;

use crate::circuit::CircuitSpec;
use crate::error::{Error, Result};
use crate::tensor::{
    hermitian_eigenvalues, is_unitary, isometry_residual, partial_trace_right, ComplexMatrix, C64,
    DEFAULT_TOL, ZERO,
};

/// Largest input register (qubits) accepted by the dense CJ path.
pub const CJ_INPUT_CAP: usize = 6;
/// Largest total circuit width for the full-CJ PMO path.
pub const FULL_CJ_CAP: usize = 6;
/// Choi matrices up to this dimension get an eigenvalue check.
pub const EIG_DIM_CAP: usize = 1 << 10;

#[derive(Debug, Clone, PartialEq)]
pub enum ChannelForm {
    Unitary(ComplexMatrix),
    /// Appends `ancillas` qubits in `|0⟩` on the right, then applies `unitary`.
    Isometry {
        unitary: ComplexMatrix,
        ancillas: usize,
    },
    Kraus(Vec<ComplexMatrix>),
    /// CJ matrix laid out `input ⊗ output`.
    Choi(ComplexMatrix),
    /// `ρ ↦ (1 − p)ρ + p·tr(ρ)·I/d`.
    Depolarizing { p: f64 },
}

/// A linear map between qubit registers, usually a quantum channel.
///
/// Constructors that check the channel conditions set `verified`; the
/// `_unchecked` variants carry arbitrary linear maps, such as the PMO of a
/// query that is not a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRep {
    form: ChannelForm,
    in_qubits: usize,
    out_qubits: usize,
    verified: bool,
}

impl ChannelRep {
    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        let q = u.qubits()?;
        let check = is_unitary(&u, DEFAULT_TOL)?;
        if !check.unitary {
            return Err(Error::Validation(format!(
                "matrix is not unitary (residual {:.3e})",
                check.residual
            )));
        }
        Ok(Self {
            form: ChannelForm::Unitary(u),
            in_qubits: q,
            out_qubits: q,
            verified: true,
        })
    }

    pub fn identity(qubits: usize) -> Self {
        Self {
            form: ChannelForm::Unitary(ComplexMatrix::identity(1 << qubits)),
            in_qubits: qubits,
            out_qubits: qubits,
            verified: true,
        }
    }

    /// Unitary channel whose unitarity the caller has already established.
    pub(crate) fn unitary_prechecked(u: ComplexMatrix) -> Result<Self> {
        let q = u.qubits()?;
        Ok(Self {
            form: ChannelForm::Unitary(u),
            in_qubits: q,
            out_qubits: q,
            verified: true,
        })
    }

    pub fn isometry(unitary: ComplexMatrix, ancillas: usize) -> Result<Self> {
        let q = unitary.qubits()?;
        if ancillas > q {
            return Err(Error::dim(format!(
                "{ancillas} ancillas for a {q}-qubit unitary"
            )));
        }
        let check = is_unitary(&unitary, DEFAULT_TOL)?;
        if !check.unitary {
            return Err(Error::Validation(format!(
                "isometry unitary is not unitary (residual {:.3e})",
                check.residual
            )));
        }
        Ok(Self {
            form: ChannelForm::Isometry { unitary, ancillas },
            in_qubits: q - ancillas,
            out_qubits: q,
            verified: true,
        })
    }

    /// Kraus channel; rejects operator sets that are not trace preserving.
    pub fn kraus(ops: Vec<ComplexMatrix>, in_qubits: usize, out_qubits: usize) -> Result<Self> {
        let c = Self::kraus_unchecked(ops, in_qubits, out_qubits)?;
        let residual = c.tp_residual_kraus();
        if residual > DEFAULT_TOL {
            return Err(Error::Validation(format!(
                "Kraus operators are not complete (residual {residual:.3e})"
            )));
        }
        Ok(Self { verified: true, ..c })
    }

    pub fn kraus_unchecked(
        ops: Vec<ComplexMatrix>,
        in_qubits: usize,
        out_qubits: usize,
    ) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::Validation("empty Kraus list".into()));
        }
        for k in &ops {
            if k.rows() != 1 << out_qubits || k.cols() != 1 << in_qubits {
                return Err(Error::dim(format!(
                    "{}x{} Kraus operator for a {in_qubits}-to-{out_qubits} qubit map",
                    k.rows(),
                    k.cols()
                )));
            }
        }
        Ok(Self {
            form: ChannelForm::Kraus(ops),
            in_qubits,
            out_qubits,
            verified: false,
        })
    }

    /// Channel from its CJ matrix; rejects matrices that are not CPTP.
    pub fn choi(m: ComplexMatrix, in_qubits: usize, out_qubits: usize) -> Result<Self> {
        let c = Self::choi_unchecked(m, in_qubits, out_qubits)?;
        let check = is_cptp(&c, DEFAULT_TOL)?;
        if !check.cptp {
            return Err(Error::Validation(format!(
                "CJ matrix is not CPTP (psd min eig {:?}, tp residual {:.3e})",
                check.psd_min_eig, check.tp_residual
            )));
        }
        Ok(Self { verified: true, ..c })
    }

    pub fn choi_unchecked(m: ComplexMatrix, in_qubits: usize, out_qubits: usize) -> Result<Self> {
        let dim = 1usize << (in_qubits + out_qubits);
        if m.rows() != dim || m.cols() != dim {
            return Err(Error::dim(format!(
                "{}x{} CJ matrix for a {in_qubits}-to-{out_qubits} qubit map",
                m.rows(),
                m.cols()
            )));
        }
        Ok(Self {
            form: ChannelForm::Choi(m),
            in_qubits,
            out_qubits,
            verified: false,
        })
    }

    pub fn depolarizing(p: f64, qubits: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Validation(format!(
                "depolarizing probability {p} outside [0, 1]"
            )));
        }
        Ok(Self {
            form: ChannelForm::Depolarizing { p },
            in_qubits: qubits,
            out_qubits: qubits,
            verified: true,
        })
    }

    pub fn form(&self) -> &ChannelForm {
        &self.form
    }

    pub fn in_qubits(&self) -> usize {
        self.in_qubits
    }

    pub fn out_qubits(&self) -> usize {
        self.out_qubits
    }

    /// Whether a constructor confirmed the channel conditions.
    pub fn is_verified(&self) -> bool {
        self.verified
    }

    /// Kraus operators, when the form provides them directly.
    pub fn kraus_operators(&self) -> Option<Vec<ComplexMatrix>> {
        match &self.form {
            ChannelForm::Unitary(u) => Some(vec![u.clone()]),
            ChannelForm::Isometry { unitary, ancillas } => Some(vec![isometry_columns(unitary, *ancillas)]),
            ChannelForm::Kraus(ops) => Some(ops.clone()),
            ChannelForm::Choi(_) | ChannelForm::Depolarizing { .. } => None,
        }
    }

    /// The single operator `K` with `C(ρ) = KρK†`, for unitary, isometry
    /// and one-element Kraus forms.
    pub fn single_operator(&self) -> Option<ComplexMatrix> {
        match &self.form {
            ChannelForm::Unitary(u) => Some(u.clone()),
            ChannelForm::Isometry { unitary, ancillas } => Some(isometry_columns(unitary, *ancillas)),
            ChannelForm::Kraus(ops) if ops.len() == 1 => Some(ops[0].clone()),
            _ => None,
        }
    }

    /// `C(ρ)`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d_in = 1usize << self.in_qubits;
        if rho.rows() != d_in || rho.cols() != d_in {
            return Err(Error::dim(format!(
                "{}x{} input for a channel on {} qubits",
                rho.rows(),
                rho.cols(),
                self.in_qubits
            )));
        }
        match &self.form {
            ChannelForm::Choi(m) => CjInverse::new(m.clone(), self.in_qubits, self.out_qubits)?.apply(rho),
            ChannelForm::Depolarizing { p } => {
                let d = d_in as f64;
                let tr = rho.trace();
                let mut out = rho.scale(C64::new(1.0 - p, 0.0));
                for i in 0..d_in {
                    out[(i, i)] += tr * (p / d);
                }
                Ok(out)
            }
            _ => {
                let ops = self.kraus_operators().expect("Kraus-like form");
                let d_out = 1usize << self.out_qubits;
                let mut out = ComplexMatrix::zeros(d_out, d_out);
                for k in &ops {
                    out = &out + &(&(k * rho) * &k.adjoint());
                }
                Ok(out)
            }
        }
    }

    fn tp_residual_kraus(&self) -> f64 {
        let ops = self.kraus_operators().expect("Kraus-like form");
        let d_in = 1usize << self.in_qubits;
        let mut sum = ComplexMatrix::zeros(d_in, d_in);
        for k in &ops {
            sum = &sum + &(&k.adjoint() * k);
        }
        sum.frobenius_distance(&ComplexMatrix::identity(d_in))
    }
}

/// `U · (I ⊗ |0^k⟩)`: the columns of `U` whose ancilla bits are zero.
pub fn isometry_columns(u: &ComplexMatrix, ancillas: usize) -> ComplexMatrix {
    let cols = u.cols() >> ancillas;
    ComplexMatrix::from_fn(u.rows(), cols, |r, c| u[(r, c << ancillas)])
}

/// `‖M⟩⟩ = Σ_x |x⟩ ⊗ M|x⟩`, unnormalized.
pub fn double_ket(m: &ComplexMatrix) -> Vec<C64> {
    let (d_out, d_in) = (m.rows(), m.cols());
    let mut v = vec![ZERO; d_in * d_out];
    for x in 0..d_in {
        for o in 0..d_out {
            v[x * d_out + o] = m[(o, x)];
        }
    }
    v
}

/// CJ matrix `Σ_{x,y} |x⟩⟨y| ⊗ C(|x⟩⟨y|)`.
///
/// Kraus-like forms are evaluated as `Σ_i ‖K_i⟩⟩⟨⟨K_i‖`, which is the same
/// sum written through the columns `K_i|x⟩`.
pub fn cj(c: &ChannelRep) -> Result<ComplexMatrix> {
    if let ChannelForm::Choi(m) = &c.form {
        return Ok(m.clone());
    }
    if c.in_qubits > CJ_INPUT_CAP || c.in_qubits + c.out_qubits > 2 * CJ_INPUT_CAP {
        return Err(Error::Resource(format!(
            "dense CJ of a {}-to-{} qubit channel exceeds the cap of {CJ_INPUT_CAP} input qubits",
            c.in_qubits, c.out_qubits
        )));
    }
    let dim = 1usize << (c.in_qubits + c.out_qubits);
    match &c.form {
        ChannelForm::Depolarizing { p } => {
            let d = (1usize << c.in_qubits) as f64;
            let id = double_ket(&ComplexMatrix::identity(1 << c.in_qubits));
            let mut m = ComplexMatrix::outer(&id, &id).scale(C64::new(1.0 - p, 0.0));
            for i in 0..dim {
                m[(i, i)] += C64::new(p / d, 0.0);
            }
            Ok(m)
        }
        _ => {
            let mut m = ComplexMatrix::zeros(dim, dim);
            for k in c.kraus_operators().expect("Kraus-like form") {
                let v = double_ket(&k);
                for r in 0..dim {
                    if v[r] == ZERO {
                        continue;
                    }
                    for (col, w) in v.iter().enumerate() {
                        m[(r, col)] += v[r] * w.conj();
                    }
                }
            }
            Ok(m)
        }
    }
}

/// The linear map recovered from a CJ matrix.
#[derive(Debug, Clone)]
pub struct CjInverse {
    choi: ComplexMatrix,
    in_qubits: usize,
    out_qubits: usize,
}

impl CjInverse {
    pub fn new(choi: ComplexMatrix, in_qubits: usize, out_qubits: usize) -> Result<Self> {
        let dim = 1usize << (in_qubits + out_qubits);
        if choi.rows() != dim || choi.cols() != dim {
            return Err(Error::dim(format!(
                "{}x{} matrix cannot split as {in_qubits} ⊗ {out_qubits} qubits",
                choi.rows(),
                choi.cols()
            )));
        }
        Ok(Self {
            choi,
            in_qubits,
            out_qubits,
        })
    }

    /// `X ↦ tr_in((Xᵀ ⊗ I) · M)`. The transpose makes this the exact inverse
    /// of [`cj`]; without it the map would return `C(Xᵀ)`.
    pub fn apply(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d_in = 1usize << self.in_qubits;
        let d_out = 1usize << self.out_qubits;
        if x.rows() != d_in || x.cols() != d_in {
            return Err(Error::dim(format!(
                "{}x{} input for a map on {} qubits",
                x.rows(),
                x.cols(),
                self.in_qubits
            )));
        }
        let mut out = ComplexMatrix::zeros(d_out, d_out);
        for c in 0..d_in {
            for a in 0..d_in {
                let s = x[(c, a)];
                if s == ZERO {
                    continue;
                }
                for o in 0..d_out {
                    for o2 in 0..d_out {
                        out[(o, o2)] += s * self.choi[(c * d_out + o, a * d_out + o2)];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Dense superoperator `S` with `vec(C(X)) = S · vec(X)`, row-major vec.
    pub fn superoperator(&self) -> ComplexMatrix {
        let d_in = 1usize << self.in_qubits;
        let d_out = 1usize << self.out_qubits;
        ComplexMatrix::from_fn(d_out * d_out, d_in * d_in, |row, col| {
            let (o, o2) = (row / d_out, row % d_out);
            let (c, a) = (col / d_in, col % d_in);
            self.choi[(c * d_out + o, a * d_out + o2)]
        })
    }
}

pub fn cj_inverse(m: &ComplexMatrix, in_qubits: usize, out_qubits: usize) -> Result<CjInverse> {
    CjInverse::new(m.clone(), in_qubits, out_qubits)
}

/// Indefinite operator on `P ⊗ F` of `w` on `A_I(n) ⊗ P(r) ⊗ A_O(n) ⊗ F(ℓ)`:
/// `tr_{A_I, A_O}(W · |A_I,P,F⟩⟨A_I,P,F|)`, which entrywise is
/// `G[(p,f), (p',f')] = Σ_{x,y} W[(y,p,y,f), (x,p',x,f')]`.
pub fn indefinite_operator(
    w: &ComplexMatrix,
    n: usize,
    r: usize,
    l: usize,
) -> Result<ComplexMatrix> {
    let total = 2 * n + r + l;
    if !w.is_square() || w.rows() != 1usize << total {
        return Err(Error::dim(format!(
            "{}x{} matrix does not fit the layout A_I({n}) P({r}) A_O({n}) F({l})",
            w.rows(),
            w.cols()
        )));
    }
    let (da, dp, df) = (1usize << n, 1usize << r, 1usize << l);
    let index = |a: usize, p: usize, ao: usize, f: usize| ((a * dp + p) * da + ao) * df + f;
    Ok(ComplexMatrix::from_fn(dp * df, dp * df, |row, col| {
        let (p, f) = (row / df, row % df);
        let (p2, f2) = (col / df, col % df);
        let mut acc = ZERO;
        for y in 0..da {
            let wr = index(y, p, y, f);
            for x in 0..da {
                acc += w[(wr, index(x, p2, x, f2))];
            }
        }
        acc
    }))
}

/// Outcome of [`is_cptp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CptpCheck {
    pub cptp: bool,
    /// Smallest CJ eigenvalue; `None` when complete positivity holds by
    /// construction (Kraus forms too large to diagonalize).
    pub psd_min_eig: Option<f64>,
    /// `‖tr_out(CJ) − I‖_F`.
    pub tp_residual: f64,
}

pub fn is_cptp(c: &ChannelRep, tol: f64) -> Result<CptpCheck> {
    let d_in = 1usize << c.in_qubits;
    let choi_dim = 1usize << (c.in_qubits + c.out_qubits);
    match &c.form {
        ChannelForm::Choi(m) => {
            let tp = partial_trace_right(m, c.out_qubits)?
                .frobenius_distance(&ComplexMatrix::identity(d_in));
            if choi_dim > EIG_DIM_CAP {
                return Err(Error::Resource(format!(
                    "CJ matrix of dimension {choi_dim} is too large to diagonalize"
                )));
            }
            let min = match hermitian_eigenvalues(m, tol) {
                Ok(vals) => vals[0],
                // a non-Hermitian CJ matrix cannot be completely positive
                Err(Error::Shape(_)) => f64::NEG_INFINITY,
                Err(e) => return Err(e),
            };
            Ok(CptpCheck {
                cptp: min >= -tol && tp <= tol,
                psd_min_eig: Some(min),
                tp_residual: tp,
            })
        }
        ChannelForm::Depolarizing { p } => Ok(CptpCheck {
            cptp: (0.0..=1.0).contains(p),
            psd_min_eig: Some(p / d_in as f64),
            tp_residual: 0.0,
        }),
        _ => {
            let tp = c.tp_residual_kraus();
            let psd_min_eig = if choi_dim <= 256 {
                Some(hermitian_eigenvalues(&cj(c)?, 1e-8)?[0])
            } else {
                None
            };
            Ok(CptpCheck {
                cptp: tp <= tol && psd_min_eig.is_none_or(|m| m >= -tol),
                psd_min_eig,
                tp_residual: tp,
            })
        }
    }
}

/// Whether `c(ρ) = VρV†` for a unitary `V`; returns the residual.
pub fn unitary_channel_check(c: &ChannelRep, tol: f64) -> Result<(bool, f64)> {
    if c.in_qubits != c.out_qubits {
        return Ok((false, f64::INFINITY));
    }
    if let Some(k) = c.single_operator() {
        let check = is_unitary(&k, tol)?;
        return Ok((check.unitary, check.residual));
    }
    if let ChannelForm::Depolarizing { p } = c.form {
        return Ok((p == 0.0, p));
    }
    // CJ of a unitary channel is the rank-one projector onto ‖V⟩⟩.
    let m = cj(c)?;
    let d = 1usize << c.out_qubits;
    let (j, peak) = (0..m.rows())
        .map(|i| (i, m[(i, i)].re))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    if peak <= 0.0 {
        return Ok((false, f64::INFINITY));
    }
    let v: Vec<C64> = m.col(j).iter().map(|z| z / peak.sqrt()).collect();
    let rank_one = m.frobenius_distance(&ComplexMatrix::outer(&v, &v));
    let op = ComplexMatrix::from_fn(d, d, |o, x| v[x * d + o]);
    let residual = rank_one.max(is_unitary(&op, tol)?.residual);
    Ok((residual <= tol, residual))
}

/// A generator query `(m, C)`: `C` acts on `m + r + k` qubits, takes
/// `m + r` input qubits and appends `k` ancillas in `|0⟩`.
#[derive(Debug, Clone)]
pub struct PmgQuery {
    m: usize,
    circuit: CircuitSpec,
    ancillas: usize,
}

impl PmgQuery {
    /// Square query, `k = 0`.
    pub fn new(m: usize, circuit: CircuitSpec) -> Result<Self> {
        Self::with_ancillas(m, circuit, 0)
    }

    pub fn with_ancillas(m: usize, circuit: CircuitSpec, ancillas: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Validation("traced register must have at least one qubit".into()));
        }
        if circuit.width() < m + ancillas + 1 {
            return Err(Error::Validation(format!(
                "{}-qubit circuit leaves no P register after {m} traced qubits and {ancillas} ancillas",
                circuit.width()
            )));
        }
        Ok(Self {
            m,
            circuit,
            ancillas,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn circuit(&self) -> &CircuitSpec {
        &self.circuit
    }

    pub fn ancillas(&self) -> usize {
        self.ancillas
    }

    /// Qubits of `P`.
    pub fn r(&self) -> usize {
        self.circuit.width() - self.m - self.ancillas
    }

    /// Qubits of `F`.
    pub fn l(&self) -> usize {
        self.r() + self.ancillas
    }

    pub fn is_square(&self) -> bool {
        self.ancillas == 0
    }

    /// Cost `|C|` charged for submitting the query.
    pub fn cost(&self) -> usize {
        self.circuit.size()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PmoPath {
    /// `CJ → indefinite operator → CJ⁻¹`, dense.
    FullCj,
    /// Trace the leftmost `m` qubits of `U` directly.
    Simplified,
    Both,
}

/// Verdict on a generator query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessCheckReport {
    pub is_pmg: bool,
    pub is_pure_pmg: bool,
    /// Unitarity residual of `tr_{A_I}(U)`.
    pub unitarity_residual: f64,
    pub psd_min_eig: Option<f64>,
    pub tp_residual: f64,
    /// Frobenius gap between the full-CJ and simplified indefinite operators.
    pub path_disagreement: Option<f64>,
    #[serde(skip)]
    pub input_unitary: bool,
    #[serde(skip)]
    pub input_unitarity_residual: f64,
    /// The PMO is an isometric channel (relevant when `k > 0`).
    #[serde(skip)]
    pub pmo_isometric: bool,
}

/// The process-matrix channel `P → F` of a query together with its report.
#[derive(Debug, Clone)]
pub struct PmoResult {
    pub channel: ChannelRep,
    pub report: ProcessCheckReport,
    /// `tr_{A_I}(U)`, when the simplified path ran.
    pub traced: Option<ComplexMatrix>,
}

pub fn pmo(q: &PmgQuery, path: PmoPath, tol: f64) -> Result<PmoResult> {
    let (m, r, l, k) = (q.m, q.r(), q.l(), q.ancillas);
    let width = q.circuit.width();
    if matches!(path, PmoPath::FullCj | PmoPath::Both) && width > FULL_CJ_CAP {
        return Err(Error::Resource(format!(
            "full-CJ path is capped at {FULL_CJ_CAP} qubits, query has {width}"
        )));
    }
    let input = q.circuit.check_unitary(tol)?;

    let simplified = if matches!(path, PmoPath::Simplified | PmoPath::Both) {
        let traced = q.circuit.traced_block_unitary(m)?;
        let op = isometry_columns(&traced, k);
        let channel = ChannelRep::kraus_unchecked(vec![op.clone()], r, l)?;
        Some((traced, op, channel))
    } else {
        None
    };

    let full = if matches!(path, PmoPath::FullCj | PmoPath::Both) {
        let u = q.circuit.compile_unitary()?;
        let input_channel = ChannelRep::isometry(u, k)?;
        let w = cj(&input_channel)?;
        let g = indefinite_operator(&w, m, r, l)?;
        Some(ChannelRep::choi_unchecked(g, r, l)?)
    } else {
        None
    };

    let path_disagreement = match (&simplified, &full) {
        (Some((_, _, s)), Some(f)) => Some(cj(s)?.frobenius_distance(&cj(f)?)),
        _ => None,
    };

    let (channel, traced, unitarity_residual, tp_residual, psd_min_eig, is_pmg, pmo_isometric) =
        match (simplified, full) {
            (Some((traced, op, channel)), full) => {
                let tp = isometry_residual(&op);
                let unitarity = is_unitary(&traced, tol)?.residual;
                // CP holds for any single-Kraus map; report the eigenvalue
                // when the full path produced a CJ matrix small enough.
                let psd = match &full {
                    Some(f) if (1usize << (r + l)) <= EIG_DIM_CAP => is_cptp(f, tol)?.psd_min_eig,
                    _ => None,
                };
                let is_pmg = tp <= tol && psd.is_none_or(|e| e >= -tol);
                (channel, Some(traced), unitarity, tp, psd, is_pmg, tp <= tol)
            }
            (None, Some(f)) => {
                let check = is_cptp(&f, tol)?;
                let unitarity = if k == 0 {
                    unitary_channel_check(&f, tol)?.1
                } else {
                    f64::INFINITY
                };
                (f, None, unitarity, check.tp_residual, check.psd_min_eig, check.cptp, check.cptp)
            }
            (None, None) => unreachable!("at least one path runs"),
        };

    let pmo_unitary = unitarity_residual <= tol;
    let is_pure_pmg = q.is_square() && input.unitary && is_pmg && pmo_unitary;
    Ok(PmoResult {
        channel,
        traced,
        report: ProcessCheckReport {
            is_pmg,
            is_pure_pmg,
            unitarity_residual,
            psd_min_eig,
            tp_residual,
            path_disagreement,
            input_unitary: input.unitary,
            input_unitarity_residual: input.residual,
            pmo_isometric,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Gate;
    use crate::tensor::{kron, partial_trace_left, permute_subsystems, SubsystemDims, ONE};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn basis_op(d: usize, x: usize, y: usize) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(d, d);
        m[(x, y)] = ONE;
        m
    }

    /// CJ straight from its defining sum, using the channel's action.
    fn cj_by_definition(c: &ChannelRep) -> ComplexMatrix {
        let d = 1usize << c.in_qubits();
        let dout = 1usize << c.out_qubits();
        let mut m = ComplexMatrix::zeros(d * dout, d * dout);
        for x in 0..d {
            for y in 0..d {
                let term = kron(&basis_op(d, x, y), &c.apply(&basis_op(d, x, y)).unwrap());
                m = &m + &term;
            }
        }
        m
    }

    fn random_unitary(rng: &mut ChaCha8Rng, q: usize) -> ComplexMatrix {
        crate::ctc::haar_unitary(rng, 1 << q)
    }

    #[test]
    fn double_ket_examples() {
        let v = double_ket(&ComplexMatrix::identity(2));
        assert_eq!(v, vec![ONE, ZERO, ZERO, ONE]);
        let v = double_ket(&pauli_x());
        assert_eq!(v, vec![ZERO, ONE, ONE, ZERO]);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = ComplexMatrix::from_fn(4, 2, |_, _| C64::new(rng.random(), rng.random()));
        let v = double_ket(&m);
        let norm: C64 = v.iter().map(|z| z.conj() * z).sum();
        let tr = (&m.adjoint() * &m).trace();
        assert!((norm - tr).norm() < 1e-12);
    }

    #[test]
    fn cj_identity_is_bell_projector() {
        let m = cj(&ChannelRep::identity(1)).unwrap();
        let bell = [ONE, ZERO, ZERO, ONE];
        assert_eq!(m, ComplexMatrix::outer(&bell, &bell));
    }

    #[test]
    fn cj_matches_definition_and_double_ket() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = random_unitary(&mut rng, 2);
        let c = ChannelRep::unitary(u.clone()).unwrap();
        let fast = cj(&c).unwrap();
        let dk = double_ket(&u);
        assert!(fast.frobenius_distance(&ComplexMatrix::outer(&dk, &dk)) < 1e-12);
        assert!(fast.frobenius_distance(&cj_by_definition(&c)) < 1e-12);

        let dep = ChannelRep::depolarizing(0.3, 1).unwrap();
        assert!(cj(&dep).unwrap().frobenius_distance(&cj_by_definition(&dep)) < 1e-12);

        let iso = ChannelRep::isometry(random_unitary(&mut rng, 3), 1).unwrap();
        assert!(cj(&iso).unwrap().frobenius_distance(&cj_by_definition(&iso)) < 1e-12);
    }

    #[test]
    fn cj_inverse_examples() {
        let bell = [ONE, ZERO, ZERO, ONE];
        let inv = cj_inverse(&ComplexMatrix::outer(&bell, &bell), 1, 1).unwrap();
        let p0 = basis_op(2, 0, 0);
        assert_eq!(inv.apply(&p0).unwrap(), p0);

        let x = cj(&ChannelRep::unitary(pauli_x()).unwrap()).unwrap();
        let inv = cj_inverse(&x, 1, 1).unwrap();
        assert_eq!(inv.apply(&p0).unwrap(), basis_op(2, 1, 1));

        assert!(cj_inverse(&x, 1, 2).is_err());
        assert!(inv.apply(&ComplexMatrix::identity(4)).is_err());
    }

    #[test]
    fn cj_inverse_transpose_matters() {
        // |0⟩⟨1| ↦ U|0⟩⟨1|U† must not become U|1⟩⟨0|U†
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = ChannelRep::unitary(random_unitary(&mut rng, 1)).unwrap();
        let inv = cj_inverse(&cj(&c).unwrap(), 1, 1).unwrap();
        let x = basis_op(2, 0, 1);
        assert!(inv.apply(&x).unwrap().frobenius_distance(&c.apply(&x).unwrap()) < 1e-12);
        let s = inv.superoperator();
        let vx = x.clone().into_vec();
        let out = s.apply(&vx).unwrap();
        let expect = c.apply(&x).unwrap().into_vec();
        for (a, b) in out.iter().zip(&expect) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn trace_over_output_of_cj_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for q in 1..=2 {
            let c = crate::ctc::random_kraus_channel(&mut rng, q, 3);
            let m = cj(&c).unwrap();
            let tr = partial_trace_right(&m, q).unwrap();
            assert!(tr.frobenius_distance(&ComplexMatrix::identity(1 << q)) < 1e-10);
            assert!(is_cptp(&c, 1e-10).unwrap().cptp);
        }
    }

    /// The indefinite operator evaluated literally: build
    /// `|A_I,P,F⟩⟨A_I,P,F|`, multiply, move `A_I, A_O` to the left and trace.
    fn indefinite_by_definition(w: &ComplexMatrix, n: usize, r: usize, l: usize) -> ComplexMatrix {
        let da = 1 << n;
        let mut proj = ComplexMatrix::zeros(w.rows(), w.cols());
        for x in 0..da {
            for y in 0..da {
                let term = kron(
                    &kron(&basis_op(da, x, y), &ComplexMatrix::identity(1 << r)),
                    &kron(&basis_op(da, x, y), &ComplexMatrix::identity(1 << l)),
                );
                proj = &proj + &term;
            }
        }
        let prod = w * &proj;
        let dims = SubsystemDims::from_qubits(&[n, r, n, l]).unwrap();
        let moved = permute_subsystems(&prod, &dims, &[0, 2, 1, 3]).unwrap();
        partial_trace_left(&moved, 2 * n).unwrap()
    }

    #[test]
    fn indefinite_operator_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (n, r, l) in [(1, 1, 1), (1, 1, 2), (2, 1, 1), (1, 2, 1)] {
            let d = 1usize << (2 * n + r + l);
            let w = ComplexMatrix::from_fn(d, d, |_, _| {
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            });
            let fast = indefinite_operator(&w, n, r, l).unwrap();
            let slow = indefinite_by_definition(&w, n, r, l);
            assert!(fast.frobenius_distance(&slow) < 1e-10);
        }
        assert!(indefinite_operator(&ComplexMatrix::identity(8), 1, 1, 1).is_err());
    }

    #[test]
    fn indefinite_operator_of_identity_wiring() {
        // identity channel A_I⊗P → A_O⊗F at one qubit each: A_I feeds A_O and
        // P feeds F, so the loop closes on A and leaves the identity P → F.
        // The unnormalized loop contributes tr(I_A) = 2 to the Kraus operator,
        // hence 4 to the CJ matrix.
        let w = cj(&ChannelRep::identity(2)).unwrap();
        let g = indefinite_operator(&w, 1, 1, 1).unwrap();
        let expect = cj(&ChannelRep::identity(1)).unwrap().scale(C64::new(4.0, 0.0));
        assert!(g.frobenius_distance(&expect) < 1e-12);
    }

    #[test]
    fn indefinite_operator_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let d = 16;
        let w1 = ComplexMatrix::from_fn(d, d, |_, _| C64::new(rng.random(), rng.random()));
        let w2 = ComplexMatrix::from_fn(d, d, |_, _| C64::new(rng.random(), rng.random()));
        let (a, b) = (C64::new(0.3, -1.2), C64::new(2.0, 0.5));
        let lhs = indefinite_operator(&(&w1.scale(a) + &w2.scale(b)), 1, 1, 1).unwrap();
        let rhs = &indefinite_operator(&w1, 1, 1, 1).unwrap().scale(a)
            + &indefinite_operator(&w2, 1, 1, 1).unwrap().scale(b);
        assert!(lhs.frobenius_distance(&rhs) < 1e-12);
    }

    #[test]
    fn isometry_lemma_on_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (n, r, k) in [(1, 1, 0), (1, 1, 1), (2, 1, 1), (1, 2, 2), (2, 2, 0)] {
            let u = random_unitary(&mut rng, n + r + k);
            let w = cj(&ChannelRep::isometry(u.clone(), k).unwrap()).unwrap();
            let g = indefinite_operator(&w, n, r, r + k).unwrap();
            let traced = partial_trace_left(&u, n).unwrap();
            let reduced = ChannelRep::kraus_unchecked(vec![isometry_columns(&traced, k)], r, r + k).unwrap();
            assert!(g.frobenius_distance(&cj(&reduced).unwrap()) < 1e-10);
        }
    }

    #[test]
    fn swap_query_report() {
        let c = CircuitSpec::from_gates(2, vec![Gate::swap(0, 1).unwrap()]).unwrap();
        let q = PmgQuery::new(1, c.clone()).unwrap();
        let res = pmo(&q, PmoPath::Both, 1e-10).unwrap();
        // Σ_x (⟨x| ⊗ I) SWAP (|x⟩ ⊗ I) = Σ_x |x⟩⟨x| = I
        let dense = partial_trace_left(&c.compile_unitary().unwrap(), 1).unwrap();
        assert_eq!(res.traced.as_ref().unwrap(), &dense);
        assert_eq!(dense, ComplexMatrix::identity(2));
        assert!(res.report.path_disagreement.unwrap() < 1e-10);
        assert!(res.report.is_pure_pmg);
        assert!(res.report.is_pmg);
    }

    #[test]
    fn identity_query_is_not_a_generator() {
        let q = PmgQuery::new(1, CircuitSpec::identity(2).unwrap()).unwrap();
        let res = pmo(&q, PmoPath::Both, 1e-10).unwrap();
        assert!(!res.report.is_pmg);
        assert!(!res.report.is_pure_pmg);
        assert!(res.report.path_disagreement.unwrap() < 1e-10);
        // traced matrix is 2·I, so the PMO is 4× trace scaling
        assert!((res.report.tp_residual - 3.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn full_path_alone_matches_simplified_verdict() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let u = random_unitary(&mut rng, 3);
            let rule_u = u.clone();
            let rule = crate::circuit::BasisRule::new(3, 1, "dense", move |x| {
                (0..8).map(|r| (r, rule_u[(r, x)])).collect()
            });
            let q = PmgQuery::new(1, CircuitSpec::from_rule(rule).unwrap()).unwrap();
            let full = pmo(&q, PmoPath::FullCj, 1e-10).unwrap();
            let simple = pmo(&q, PmoPath::Simplified, 1e-10).unwrap();
            assert_eq!(full.report.is_pmg, simple.report.is_pmg);
            assert_eq!(full.report.is_pure_pmg, simple.report.is_pure_pmg);
        }
    }

    #[test]
    fn oversize_full_path_is_a_resource_error() {
        let q = PmgQuery::new(1, CircuitSpec::identity(7).unwrap()).unwrap();
        assert!(matches!(pmo(&q, PmoPath::FullCj, 1e-10), Err(Error::Resource(_))));
        assert!(pmo(&q, PmoPath::Simplified, 1e-10).is_ok());
    }

    #[test]
    fn cptp_examples() {
        assert!(is_cptp(&ChannelRep::identity(1), 1e-10).unwrap().cptp);
        let zero = ChannelRep::kraus_unchecked(vec![ComplexMatrix::zeros(2, 2)], 1, 1).unwrap();
        let check = is_cptp(&zero, 1e-10).unwrap();
        assert!(!check.cptp);
        assert!((check.tp_residual - 2f64.sqrt()).abs() < 1e-15);
        let zero_choi = ChannelRep::choi_unchecked(ComplexMatrix::zeros(4, 4), 1, 1).unwrap();
        assert!(!is_cptp(&zero_choi, 1e-10).unwrap().cptp);

        let z = 0b10usize;
        let xor = ComplexMatrix::from_fn(4, 4, |r, c| if r == c ^ z { ONE } else { ZERO });
        assert!(is_cptp(&ChannelRep::unitary(xor).unwrap(), 1e-10).unwrap().cptp);

        // transpose map: trace preserving, not completely positive
        let swap = ComplexMatrix::from_fn(4, 4, |r, c| {
            let (a, b) = (r / 2, r % 2);
            let (a2, b2) = (c / 2, c % 2);
            if a == b2 && b == a2 { ONE } else { ZERO }
        });
        let t = ChannelRep::choi_unchecked(swap, 1, 1).unwrap();
        let check = is_cptp(&t, 1e-10).unwrap();
        assert!(!check.cptp);
        assert!(check.tp_residual < 1e-12);
        assert!((check.psd_min_eig.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn unitary_channel_detection_through_choi() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = random_unitary(&mut rng, 2);
        let c = ChannelRep::choi(cj(&ChannelRep::unitary(u).unwrap()).unwrap(), 2, 2).unwrap();
        assert!(unitary_channel_check(&c, 1e-10).unwrap().0);
        let dep = ChannelRep::choi(cj(&ChannelRep::depolarizing(0.5, 1).unwrap()).unwrap(), 1, 1).unwrap();
        assert!(!unitary_channel_check(&dep, 1e-10).unwrap().0);
    }

    #[test]
    fn query_validation() {
        assert!(PmgQuery::new(2, CircuitSpec::identity(2).unwrap()).is_err());
        assert!(PmgQuery::new(0, CircuitSpec::identity(2).unwrap()).is_err());
        assert!(PmgQuery::with_ancillas(1, CircuitSpec::identity(3).unwrap(), 2).is_err());
        let q = PmgQuery::with_ancillas(1, CircuitSpec::identity(4).unwrap(), 1).unwrap();
        assert_eq!((q.r(), q.l()), (2, 3));
    }

    #[test]
    fn report_json_fields() {
        let q = PmgQuery::new(1, CircuitSpec::from_gates(2, vec![Gate::swap(0, 1).unwrap()]).unwrap()).unwrap();
        let res = pmo(&q, PmoPath::Both, 1e-10).unwrap();
        let v: serde_json::Value = serde_json::to_value(&res.report).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(
            keys,
            ["is_pmg", "is_pure_pmg", "path_disagreement", "psd_min_eig", "tp_residual", "unitarity_residual"]
        );
    }
}
