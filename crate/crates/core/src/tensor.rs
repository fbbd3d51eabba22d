//! Dense complex linear algebra.
//!
//! Index convention used everywhere in the crate: in a register of `w`
//! qubits, qubit 0 is the leftmost tensor factor and is the most significant
//! bit of the basis-state index. [`qubit_mask`] is the one place that encodes
//! this.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance for every numerical predicate.
pub const DEFAULT_TOL: f64 = 1e-10;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Bit mask selecting qubit `q` of a `width`-qubit basis index.
#[inline]
pub fn qubit_mask(width: usize, q: usize) -> usize {
    debug_assert!(q < width);
    1usize << (width - 1 - q)
}

/// `Some(k)` when `d == 2^k`.
pub fn log2_exact(d: usize) -> Option<usize> {
    if d.is_power_of_two() {
        Some(d.trailing_zeros() as usize)
    } else {
        None
    }
}

/// Dense complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows.min(16) {
            write!(f, "  ")?;
            for c in 0..self.cols.min(16) {
                let z = self[(r, c)];
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dim("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim(format!(
                "{} entries supplied for a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    /// Builds a matrix from real row-major entries.
    pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::new(rows, cols, entries.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Column vector holding `v`.
    pub fn column(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// `|u⟩⟨v|`.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self::from_fn(u.len(), v.len(), |r, c| u[r] * v[c].conj())
    }

    pub fn diag(entries: &[C64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &z) in entries.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, c: usize) -> Vec<C64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_col(&mut self, c: usize, v: &[C64]) {
        assert_eq!(v.len(), self.rows);
        for (r, &z) in v.iter().enumerate() {
            self[(r, c)] = z;
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Frobenius norm of `self - other`; panics on shape mismatch.
    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::dim(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::dim(format!(
                "vector of length {} for a {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|r| {
                self.data[r * self.cols..(r + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Qubit count of a square `2^k`-dimensional matrix.
    pub fn qubits(&self) -> Result<usize> {
        if !self.is_square() {
            return Err(Error::dim(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        log2_exact(self.rows)
            .ok_or_else(|| Error::dim(format!("dimension {} is not a power of two", self.rows)))
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }

    pub fn to_dump(&self) -> MatrixDump {
        MatrixDump {
            rows: self.rows,
            cols: self.cols,
            re: self.data.iter().map(|z| z.re).collect(),
            im: self.data.iter().map(|z| z.im).collect(),
        }
    }

    pub fn from_dump(d: &MatrixDump) -> Result<Self> {
        if d.re.len() != d.im.len() {
            return Err(Error::dim("re and im arrays differ in length"));
        }
        Self::new(
            d.rows,
            d.cols,
            d.re.iter().zip(&d.im).map(|(&r, &i)| C64::new(r, i)).collect(),
        )
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

/// JSON debugging dump of a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDump {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

/// Ordered tensor-factor dimensions annotating a square matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemDims {
    dims: Vec<usize>,
}

impl SubsystemDims {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::dim("at least one subsystem is required"));
        }
        if let Some(d) = dims.iter().find(|d| !d.is_power_of_two()) {
            return Err(Error::dim(format!("subsystem dimension {d} is not a power of two")));
        }
        Ok(Self { dims })
    }

    /// Factors of the given qubit counts.
    pub fn from_qubits(qubits: &[usize]) -> Result<Self> {
        Self::new(qubits.iter().map(|&q| 1usize << q).collect())
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let rows = a.rows * b.rows;
    let cols = a.cols * b.cols;
    let mut data = vec![ZERO; rows * cols];
    for ar in 0..a.rows {
        for ac in 0..a.cols {
            let s = a[(ar, ac)];
            if s == ZERO {
                continue;
            }
            for br in 0..b.rows {
                let base = (ar * b.rows + br) * cols + ac * b.cols;
                let brow = &b.data[br * b.cols..(br + 1) * b.cols];
                for (o, &z) in data[base..base + b.cols].iter_mut().zip(brow) {
                    *o = s * z;
                }
            }
        }
    }
    ComplexMatrix { rows, cols, data }
}

/// Kronecker product of state vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// Traces out the leftmost `traced_qubits` qubits:
/// `Σ_x (⟨x| ⊗ I) · m · (|x⟩ ⊗ I)`.
pub fn partial_trace_left(m: &ComplexMatrix, traced_qubits: usize) -> Result<ComplexMatrix> {
    let total = m.qubits()?;
    if traced_qubits > total {
        return Err(Error::dim(format!(
            "cannot trace {traced_qubits} qubits out of a {total}-qubit operator"
        )));
    }
    let rest = 1usize << (total - traced_qubits);
    let blocks = 1usize << traced_qubits;
    let mut out = ComplexMatrix::zeros(rest, rest);
    for x in 0..blocks {
        let off = x * rest;
        for r in 0..rest {
            for c in 0..rest {
                out.data[r * rest + c] += m[(off + r, off + c)];
            }
        }
    }
    Ok(out)
}

/// Traces out the rightmost `traced_qubits` qubits.
pub fn partial_trace_right(m: &ComplexMatrix, traced_qubits: usize) -> Result<ComplexMatrix> {
    let total = m.qubits()?;
    if traced_qubits > total {
        return Err(Error::dim(format!(
            "cannot trace {traced_qubits} qubits out of a {total}-qubit operator"
        )));
    }
    let inner = 1usize << traced_qubits;
    let keep = 1usize << (total - traced_qubits);
    Ok(ComplexMatrix::from_fn(keep, keep, |r, c| {
        (0..inner).map(|e| m[(r * inner + e, c * inner + e)]).sum()
    }))
}

/// Outcome of [`is_unitary`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitarityCheck {
    pub unitary: bool,
    /// `max(‖m†m − I‖_F, ‖mm† − I‖_F)`.
    pub residual: f64,
}

pub fn is_unitary(m: &ComplexMatrix, tol: f64) -> Result<UnitarityCheck> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "unitarity requires a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let id = ComplexMatrix::identity(m.rows);
    let adj = m.adjoint();
    let left = (&adj * m).frobenius_distance(&id);
    let right = (m * &adj).frobenius_distance(&id);
    let residual = left.max(right);
    Ok(UnitarityCheck {
        unitary: residual <= tol,
        residual,
    })
}

/// `‖m†m − I‖_F` for a (possibly rectangular) matrix: zero iff `m` is an isometry.
pub fn isometry_residual(m: &ComplexMatrix) -> f64 {
    (&m.adjoint() * m).frobenius_distance(&ComplexMatrix::identity(m.cols))
}

/// `‖m − m†‖_F`.
pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    assert!(m.is_square());
    let mut acc = 0.0;
    for r in 0..m.rows {
        for c in 0..m.cols {
            acc += (m[(r, c)] - m[(c, r)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Outcome of [`is_psd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &ComplexMatrix, tol: f64) -> Result<Vec<f64>> {
    if !m.is_square() {
        return Err(Error::dim(format!(
            "eigenvalues require a square matrix, got {}x{}",
            m.rows, m.cols
        )));
    }
    let herm = hermiticity_residual(m);
    if herm > tol {
        return Err(Error::Shape(format!(
            "matrix is not Hermitian (residual {herm:.3e})"
        )));
    }
    let n = m.rows;
    let h = faer::Mat::<C64>::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5);
    let mut vals: Vec<f64> = h
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Validation(format!("eigenvalue solver failed: {e:?}")))?;
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

pub fn is_psd(m: &ComplexMatrix, tol: f64) -> Result<PsdCheck> {
    let vals = hermitian_eigenvalues(m, tol)?;
    let min_eigenvalue = vals[0];
    Ok(PsdCheck {
        psd: min_eigenvalue >= -tol,
        min_eigenvalue,
    })
}

/// Index map for a factor permutation: `map[new] = old`.
fn permutation_index_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    // stride of each old factor in the old index
    let mut old_strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        old_strides[i] = old_strides[i + 1] * dims[i + 1];
    }
    let total: usize = dims.iter().product();
    let mut map = vec![0usize; total];
    let mut digits = vec![0usize; dims.len()];
    for (new_idx, slot) in map.iter_mut().enumerate() {
        let mut rem = new_idx;
        for i in (0..new_dims.len()).rev() {
            digits[i] = rem % new_dims[i];
            rem /= new_dims[i];
        }
        *slot = perm
            .iter()
            .zip(&digits)
            .map(|(&old_factor, &d)| d * old_strides[old_factor])
            .sum();
    }
    map
}

/// Reorders tensor factors: factor `i` of the result is factor `perm[i]`
/// of the input. `permute_subsystems(a ⊗ b, [2^p, 2^q], [1, 0]) == b ⊗ a`.
pub fn permute_subsystems(
    m: &ComplexMatrix,
    dims: &SubsystemDims,
    perm: &[usize],
) -> Result<ComplexMatrix> {
    if !m.is_square() || m.rows != dims.total() {
        return Err(Error::dim(format!(
            "subsystem dims {:?} do not match a {}x{} matrix",
            dims.dims(),
            m.rows,
            m.cols
        )));
    }
    validate_permutation(perm, dims.dims().len())?;
    let map = permutation_index_map(dims.dims(), perm);
    Ok(ComplexMatrix::from_fn(m.rows, m.cols, |r, c| m[(map[r], map[c])]))
}

/// Applies the same factor permutation to a state vector.
pub fn permute_vector(v: &[C64], dims: &SubsystemDims, perm: &[usize]) -> Result<Vec<C64>> {
    if v.len() != dims.total() {
        return Err(Error::dim("subsystem dims do not match vector length"));
    }
    validate_permutation(perm, dims.dims().len())?;
    let map = permutation_index_map(dims.dims(), perm);
    Ok(map.iter().map(|&old| v[old]).collect())
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

fn validate_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::dim(format!(
            "permutation of length {} for {} factors",
            perm.len(),
            n
        )));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::dim(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn r_half() -> ComplexMatrix {
        let s = 0.75f64.sqrt();
        ComplexMatrix::from_real(2, 2, &[0.5, -s, s, 0.5]).unwrap()
    }

    #[test]
    fn kron_identity_and_projector() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), ComplexMatrix::identity(4));

        let p0 = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let x = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let expected = ComplexMatrix::from_real(
            4,
            4,
            &[
                0.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0, //
                0.0, 0.0, 0.0, 0.0,
            ],
        )
        .unwrap();
        assert_eq!(kron(&p0, &x), expected);
    }

    #[test]
    fn kron_matches_scalar_index_loop() {
        let a = r_half();
        let b = ComplexMatrix::identity(2);
        let k = kron(&a, &b);
        for i in 0..4 {
            for j in 0..4 {
                let expect = a[(i / 2, j / 2)] * b[(i % 2, j % 2)];
                assert_eq!(k[(i, j)], expect);
            }
        }
    }

    #[test]
    fn partial_trace_of_identity() {
        for (n, m) in [(1, 1), (2, 1), (1, 3), (3, 0)] {
            let id = ComplexMatrix::identity(1 << (n + m));
            let pt = partial_trace_left(&id, n).unwrap();
            let expect = ComplexMatrix::identity(1 << m).scale(c((1 << n) as f64));
            assert_eq!(pt, expect);
        }
    }

    #[test]
    fn partial_trace_of_product_is_scaled_factor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (n, m) in [(1, 1), (2, 1), (1, 2), (2, 2)] {
            let a = random_matrix(&mut rng, 1 << n, 1 << n);
            let b = random_matrix(&mut rng, 1 << m, 1 << m);
            let pt = partial_trace_left(&kron(&a, &b), n).unwrap();
            let mut tr = ZERO;
            for i in 0..(1 << n) {
                tr += a[(i, i)];
            }
            assert!(pt.max_abs_diff(&b.scale(tr)) < 1e-12);
            let ptr = partial_trace_right(&kron(&a, &b), m).unwrap();
            let mut trb = ZERO;
            for i in 0..(1 << m) {
                trb += b[(i, i)];
            }
            assert!(ptr.max_abs_diff(&a.scale(trb)) < 1e-12);
        }
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let m = ComplexMatrix::identity(3);
        assert!(matches!(partial_trace_left(&m, 1), Err(Error::Dimension(_))));
        let m = ComplexMatrix::identity(4);
        assert!(matches!(partial_trace_left(&m, 3), Err(Error::Dimension(_))));
        let m = ComplexMatrix::zeros(2, 4);
        assert!(partial_trace_left(&m, 1).is_err());
    }

    #[test]
    fn unitarity_predicate() {
        let check = is_unitary(&r_half(), 1e-12).unwrap();
        assert!(check.unitary, "residual {}", check.residual);

        let z = ComplexMatrix::zeros(4, 4);
        let check = is_unitary(&z, 1e-12).unwrap();
        assert!(!check.unitary);
        assert!((check.residual - 2.0).abs() < 1e-15);

        // Σ_y |y⊕z⟩⟨y| for z = 101 on three qubits
        let perm = ComplexMatrix::from_fn(8, 8, |r, c| if r == c ^ 0b101 { ONE } else { ZERO });
        for col in 0..8 {
            let norm: f64 = perm.col(col).iter().map(|z| z.norm_sqr()).sum();
            assert_eq!(norm, 1.0);
        }
        assert!(is_unitary(&perm, 1e-12).unwrap().unitary);
        assert!(is_unitary(&ComplexMatrix::zeros(2, 3), 1e-12).is_err());
    }

    #[test]
    fn psd_predicate() {
        let p0 = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let check = is_psd(&p0, 1e-10).unwrap();
        assert!(check.psd);
        assert!(check.min_eigenvalue.abs() < 1e-14);

        let d = ComplexMatrix::diag(&[c(1.0), c(-0.5)]);
        let check = is_psd(&d, 1e-10).unwrap();
        assert!(!check.psd);
        assert!((check.min_eigenvalue + 0.5).abs() < 1e-14);

        let nonherm = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(is_psd(&nonherm, 1e-10), Err(Error::Shape(_))));
    }

    #[test]
    fn permutation_identity_swap_and_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 2, 2);
        let b = random_matrix(&mut rng, 4, 4);
        let ab = kron(&a, &b);
        let dims = SubsystemDims::new(vec![2, 4]).unwrap();
        assert_eq!(permute_subsystems(&ab, &dims, &[0, 1]).unwrap(), ab);
        let swapped = permute_subsystems(&ab, &dims, &[1, 0]).unwrap();
        assert_eq!(swapped, kron(&b, &a));

        let m = random_matrix(&mut rng, 4, 4);
        let d2 = SubsystemDims::new(vec![2, 2]).unwrap();
        let twice =
            permute_subsystems(&permute_subsystems(&m, &d2, &[1, 0]).unwrap(), &d2, &[1, 0]).unwrap();
        assert_eq!(twice, m);

        assert!(permute_subsystems(&m, &dims, &[1, 0]).is_err());
        assert!(permute_subsystems(&m, &d2, &[0, 0]).is_err());
    }

    #[test]
    fn dump_round_trip() {
        let m = r_half();
        let json = serde_json::to_string(&m.to_dump()).unwrap();
        let back: MatrixDump = serde_json::from_str(&json).unwrap();
        assert_eq!(ComplexMatrix::from_dump(&back).unwrap(), m);
    }

    #[test]
    fn constructor_validates() {
        assert!(ComplexMatrix::new(2, 2, vec![ONE; 3]).is_err());
        assert!(ComplexMatrix::new(1, 1, vec![C64::new(f64::NAN, 0.0)]).is_err());
        assert!(ComplexMatrix::new(0, 1, vec![]).is_err());
    }
}
