//! Valiant-Vazirani isolation by random affine GF(2) constraints.
//!
//! A constraint is `A·x = b` with `k` uniform on `{0, …, n+1}` and `A`, `b`
//! uniform. Over satisfiable formulas it leaves exactly one model with
//! probability `Ω(1/n)`; it never creates models.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::cnf::{CnfFormula, Literal};
use crate::error::{Error, Result};
use crate::rng;

/// Widest XOR row the direct encoding expands (it emits `2^(w-1)` clauses).
pub const DIRECT_ROW_CAP: usize = 10;

/// The affine system `A·x = b` over GF(2). Row `i` of `A` is a bit mask in
/// which variable `j` (1-based) is bit `n - j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashConstraint {
    n: usize,
    rows: Vec<u64>,
    rhs: Vec<bool>,
}

impl HashConstraint {
    pub fn new(n: usize, rows: Vec<u64>, rhs: Vec<bool>) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::Validation(format!("hash over {n} variables unsupported")));
        }
        if rows.len() != rhs.len() {
            return Err(Error::dim("row count differs from right-hand side length"));
        }
        if rows.len() > n + 1 {
            return Err(Error::Validation(format!(
                "{} rows exceed the n + 1 = {} bound",
                rows.len(),
                n + 1
            )));
        }
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        if rows.iter().any(|r| r & !mask != 0) {
            return Err(Error::Validation("row touches a variable beyond n".into()));
        }
        Ok(Self { n, rows, rhs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of rows `k`.
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn rhs(&self) -> &[bool] {
        &self.rhs
    }

    /// 1-based variables of row `i`, increasing.
    pub fn row_vars(&self, i: usize) -> Vec<usize> {
        (1..=self.n)
            .filter(|&v| self.rows[i] >> (self.n - v) & 1 == 1)
            .collect()
    }

    /// Whether the assignment with index `x` (variable 1 most significant)
    /// satisfies every row.
    pub fn holds(&self, x: u64) -> bool {
        self.rows
            .iter()
            .zip(&self.rhs)
            .all(|(&r, &b)| ((r & x).count_ones() & 1 == 1) == b)
    }
}

/// How XOR rows become clauses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingMode {
    /// Forbid every wrong-parity assignment of the row's variables; no new
    /// variables.
    Direct,
    /// Chain each row through fresh parity variables, four clauses per link.
    Auxiliary,
}

impl EncodingMode {
    /// Direct up to 8 variables, auxiliary beyond.
    pub fn default_for(n: usize) -> Self {
        if n <= 8 {
            EncodingMode::Direct
        } else {
            EncodingMode::Auxiliary
        }
    }
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingMode::Direct => "direct",
            EncodingMode::Auxiliary => "auxiliary",
        })
    }
}

impl FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(EncodingMode::Direct),
            "auxiliary" | "aux" => Ok(EncodingMode::Auxiliary),
            other => Err(Error::Validation(format!(
                "unknown encoding {other:?}; expected direct or auxiliary"
            ))),
        }
    }
}

/// Draws `k` uniformly from `{0, …, n+1}`, then `A` and `b` uniformly.
pub fn sample_constraint(n: usize, seed: u64) -> Result<HashConstraint> {
    if n == 0 || n > 64 {
        return Err(Error::Validation(format!("hash over {n} variables unsupported")));
    }
    let mut rng = rng::stream(seed, rng::labels::VV, n as u64);
    let k = rng.random_range(0..=n + 1);
    let mut rows = Vec::with_capacity(k);
    let mut rhs = Vec::with_capacity(k);
    for _ in 0..k {
        let row = (1..=n).fold(0u64, |acc, _| (acc << 1) | u64::from(rng.random_bool(0.5)));
        rows.push(row);
        rhs.push(rng.random_bool(0.5));
    }
    HashConstraint::new(n, rows, rhs)
}

/// Conjoins `phi` with the constraint over its first `h.n()` variables.
pub fn encode(phi: &CnfFormula, h: &HashConstraint, mode: EncodingMode) -> Result<CnfFormula> {
    if h.n() > phi.num_vars() {
        return Err(Error::dim(format!(
            "constraint over {} variables for a formula with {}",
            h.n(),
            phi.num_vars()
        )));
    }
    let mut clauses: Vec<Vec<Literal>> = phi.clauses().to_vec();
    let mut num_vars = phi.num_vars();
    for i in 0..h.k() {
        let vars = h.row_vars(i);
        let b = h.rhs()[i];
        if vars.is_empty() {
            if b {
                clauses.push(Vec::new());
            }
            continue;
        }
        match mode {
            EncodingMode::Direct => {
                if vars.len() > DIRECT_ROW_CAP {
                    return Err(Error::Resource(format!(
                        "XOR row over {} variables exceeds the direct-encoding cap of {DIRECT_ROW_CAP}",
                        vars.len()
                    )));
                }
                clauses.extend(direct_xor_clauses(&vars, b));
            }
            EncodingMode::Auxiliary => {
                let mut acc = vars[0] as Literal;
                for &v in &vars[1..] {
                    num_vars += 1;
                    let t = num_vars as Literal;
                    let x = v as Literal;
                    // t ↔ acc ⊕ x
                    clauses.push(vec![-t, acc, x]);
                    clauses.push(vec![-t, -acc, -x]);
                    clauses.push(vec![t, -acc, x]);
                    clauses.push(vec![t, acc, -x]);
                    acc = t;
                }
                clauses.push(vec![if b { acc } else { -acc }]);
            }
        }
    }
    CnfFormula::new(num_vars, clauses)?.with_original_vars(phi.original_vars())
}

/// One clause per assignment of `vars` with the wrong parity.
fn direct_xor_clauses(vars: &[usize], parity: bool) -> Vec<Vec<Literal>> {
    let w = vars.len();
    (0u32..1 << w)
        .filter(|s| (s.count_ones() & 1 == 1) != parity)
        .map(|s| {
            vars.iter()
                .enumerate()
                .map(|(i, &v)| {
                    let set = s >> i & 1 == 1;
                    if set {
                        -(v as Literal)
                    } else {
                        v as Literal
                    }
                })
                .collect()
        })
        .collect()
}

/// `encode(phi, sample_constraint(original_vars, seed), mode)`.
pub fn vv_reduce(phi: &CnfFormula, seed: u64, mode: EncodingMode) -> Result<(CnfFormula, HashConstraint)> {
    let n = phi.original_vars();
    if n == 0 {
        return Ok((phi.clone(), HashConstraint { n: 0, rows: vec![], rhs: vec![] }));
    }
    let h = sample_constraint(n, seed)?;
    Ok((encode(phi, &h, mode)?, h))
}
