//! CNF formulas, DIMACS I/O, and the brute-force oracles everything else
//! is checked against.
//!
//! Variable `1` is the leftmost bit of an assignment string and the most
//! significant bit of its integer index, matching the qubit convention in
//! [`crate::tensor`].

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

/// Largest variable count [`count_models`] will enumerate.
pub const COUNT_CAP: usize = 24;
/// Largest variable count [`enumerate_models`] will list.
pub const ENUMERATE_CAP: usize = 16;

pub type Literal = i32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<Literal>>,
    original_vars: usize,
}

impl CnfFormula {
    /// Builds a normalized formula: literals inside a clause are deduplicated
    /// and sorted by variable, and tautological clauses are dropped.
    pub fn new(num_vars: usize, clauses: Vec<Vec<Literal>>) -> Result<Self> {
        let mut out = Vec::with_capacity(clauses.len());
        for clause in clauses {
            if let Some(c) = normalize_clause(num_vars, clause)? {
                out.push(c);
            }
        }
        Ok(Self {
            num_vars,
            clauses: out,
            original_vars: num_vars,
        })
    }

    /// Marks variables `original_vars + 1 ..= num_vars` as auxiliary.
    pub fn with_original_vars(mut self, original_vars: usize) -> Result<Self> {
        if original_vars > self.num_vars {
            return Err(Error::Validation(format!(
                "original_vars {original_vars} exceeds num_vars {}",
                self.num_vars
            )));
        }
        self.original_vars = original_vars;
        Ok(self)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn original_vars(&self) -> usize {
        self.original_vars
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    /// Total literal occurrences.
    pub fn size(&self) -> usize {
        self.clauses.iter().map(Vec::len).sum()
    }

    pub fn compile(&self) -> Result<CompiledCnf> {
        CompiledCnf::new(self)
    }
}

fn normalize_clause(num_vars: usize, mut clause: Vec<Literal>) -> Result<Option<Vec<Literal>>> {
    for &lit in &clause {
        if lit == 0 {
            return Err(Error::Validation("literal 0 inside a clause".into()));
        }
        if lit.unsigned_abs() as usize > num_vars {
            return Err(Error::Validation(format!(
                "literal {lit} out of range for {num_vars} variables"
            )));
        }
    }
    clause.sort_by_key(|l| (l.unsigned_abs(), *l));
    clause.dedup();
    if clause.windows(2).any(|w| w[0] == -w[1]) {
        return Ok(None);
    }
    Ok(Some(clause))
}

/// Bitmask form of a formula with at most 64 variables.
///
/// Clause `i` is satisfied by index `x` iff `x & pos[i] != 0` or
/// `!x & neg[i] != 0`.
#[derive(Debug, Clone)]
pub struct CompiledCnf {
    num_vars: usize,
    pos: Vec<u64>,
    neg: Vec<u64>,
}

impl CompiledCnf {
    fn new(phi: &CnfFormula) -> Result<Self> {
        if phi.num_vars > 64 {
            return Err(Error::Resource(format!(
                "{} variables exceed the 64-variable bitmask form",
                phi.num_vars
            )));
        }
        let bit = |v: usize| 1u64 << (phi.num_vars - v);
        let mut pos = Vec::with_capacity(phi.clauses.len());
        let mut neg = Vec::with_capacity(phi.clauses.len());
        for clause in &phi.clauses {
            let (mut p, mut n) = (0u64, 0u64);
            for &lit in clause {
                if lit > 0 {
                    p |= bit(lit as usize);
                } else {
                    n |= bit(lit.unsigned_abs() as usize);
                }
            }
            pos.push(p);
            neg.push(n);
        }
        Ok(Self {
            num_vars: phi.num_vars,
            pos,
            neg,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    #[inline]
    pub fn eval_index(&self, x: u64) -> bool {
        let nx = !x;
        self.pos
            .iter()
            .zip(&self.neg)
            .all(|(&p, &n)| x & p != 0 || nx & n != 0)
    }
}

/// A truth assignment; `bits[0]` is variable 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    bits: Vec<bool>,
}

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Reads the `n` low bits of `index`, most significant first.
    pub fn from_index(index: u64, n: usize) -> Self {
        Self {
            bits: (0..n).map(|i| (index >> (n - 1 - i)) & 1 == 1).collect(),
        }
    }

    pub fn to_index(&self) -> u64 {
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// First `n` variables.
    pub fn project(&self, n: usize) -> Self {
        Self {
            bits: self.bits[..n.min(self.bits.len())].to_vec(),
        }
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Validation(format!("{other:?} is not a bit"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Assignment::new)
    }
}

pub fn evaluate(phi: &CnfFormula, a: &Assignment) -> Result<bool> {
    if a.len() != phi.num_vars {
        return Err(Error::dim(format!(
            "assignment of length {} for {} variables",
            a.len(),
            phi.num_vars
        )));
    }
    Ok(phi.clauses.iter().all(|clause| {
        clause.iter().any(|&lit| {
            let value = a.bits[lit.unsigned_abs() as usize - 1];
            if lit > 0 {
                value
            } else {
                !value
            }
        })
    }))
}

pub fn count_models(phi: &CnfFormula) -> Result<u64> {
    if phi.num_vars > COUNT_CAP {
        return Err(Error::Resource(format!(
            "counting over {} variables exceeds the cap of {COUNT_CAP}",
            phi.num_vars
        )));
    }
    let compiled = phi.compile()?;
    let total = 1u64 << phi.num_vars;
    const CHUNK: u64 = 1 << 12;
    let chunks = total.div_ceil(CHUNK);
    Ok((0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(total);
            (start..end).filter(|&x| compiled.eval_index(x)).count() as u64
        })
        .sum())
}

/// Every model, in increasing index order.
pub fn enumerate_models(phi: &CnfFormula) -> Result<Vec<Assignment>> {
    if phi.num_vars > ENUMERATE_CAP {
        return Err(Error::Resource(format!(
            "enumerating {} variables exceeds the cap of {ENUMERATE_CAP}",
            phi.num_vars
        )));
    }
    let compiled = phi.compile()?;
    Ok((0..1u64 << phi.num_vars)
        .filter(|&x| compiled.eval_index(x))
        .map(|x| Assignment::from_index(x, phi.num_vars))
        .collect())
}

/// Result of extending an `(n-1)`-bit prefix by its last bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Completion {
    /// Exactly one completion satisfies the formula.
    Unique(bool),
    /// Neither completion satisfies it.
    None,
    /// Both do: the formula is not uniquely satisfiable.
    Ambiguous,
}

/// Completion of a prefix given as the integer index of its bits.
pub fn prefix_completion_index(compiled: &CompiledCnf, prefix: u64) -> Completion {
    match (
        compiled.eval_index(prefix << 1),
        compiled.eval_index((prefix << 1) | 1),
    ) {
        (true, true) => Completion::Ambiguous,
        (true, false) => Completion::Unique(false),
        (false, true) => Completion::Unique(true),
        (false, false) => Completion::None,
    }
}

pub fn prefix_completion(phi: &CnfFormula, prefix: &Assignment) -> Result<Completion> {
    if phi.num_vars == 0 || prefix.len() + 1 != phi.num_vars {
        return Err(Error::dim(format!(
            "prefix of length {} for {} variables",
            prefix.len(),
            phi.num_vars
        )));
    }
    Ok(prefix_completion_index(&phi.compile()?, prefix.to_index()))
}

/// Seeded random formula with `num_clauses` clauses over `clause_width`
/// distinct variables each, signs uniform.
pub fn random_cnf(n: usize, num_clauses: usize, clause_width: usize, seed: u64) -> Result<CnfFormula> {
    if n == 0 || clause_width == 0 || clause_width > n {
        return Err(Error::Validation(format!(
            "cannot draw width-{clause_width} clauses over {n} variables"
        )));
    }
    let mut rng = rng::stream(seed, "random-cnf", 0);
    let clauses = (0..num_clauses)
        .map(|_| {
            sample(&mut rng, n, clause_width)
                .into_iter()
                .map(|v| {
                    let lit = (v + 1) as Literal;
                    if rng.random_bool(0.5) {
                        lit
                    } else {
                        -lit
                    }
                })
                .collect()
        })
        .collect();
    CnfFormula::new(n, clauses)
}

/// Benchmark formula with `2^(n - ceil(n/2))` models: the first
/// `ceil(n/2)` variables are forced true, the rest are free but each must
/// appear in some clause.
pub fn half_fixed_formula(n: usize) -> Result<CnfFormula> {
    let fixed = n.div_ceil(2);
    let mut clauses: Vec<Vec<Literal>> = (1..=fixed).map(|v| vec![v as Literal]).collect();
    for v in fixed + 1..=n {
        clauses.push(vec![1, v as Literal]);
    }
    CnfFormula::new(n, clauses)
}

/// Parses DIMACS CNF: optional `c` comment lines, one `p cnf <vars>
/// <clauses>` header, then whitespace-separated signed literals with each
/// clause terminated by `0`.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut current_start = 0usize;
    let mut last_line = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(Error::parse(line_no, "duplicate problem line"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(Error::parse(line_no, "expected `p cnf <vars> <clauses>`"));
            }
            let vars = parts[2]
                .parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("bad variable count {:?}", parts[2])))?;
            let count = parts[3]
                .parse::<usize>()
                .map_err(|_| Error::parse(line_no, format!("bad clause count {:?}", parts[3])))?;
            if vars > i32::MAX as usize {
                return Err(Error::parse(line_no, "variable count too large"));
            }
            header = Some((vars, count, line_no));
            continue;
        }
        let (vars, _, _) =
            header.ok_or_else(|| Error::parse(line_no, "clause before the `p cnf` header"))?;
        for tok in line.split_whitespace() {
            let lit = tok
                .parse::<Literal>()
                .map_err(|_| Error::parse(line_no, format!("bad literal {tok:?}")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if lit.unsigned_abs() as usize > vars {
                return Err(Error::parse(
                    line_no,
                    format!("literal {lit} out of range for {vars} variables"),
                ));
            }
            if current.is_empty() {
                current_start = line_no;
            }
            current.push(lit);
        }
    }

    let (vars, count, header_line) =
        header.ok_or_else(|| Error::parse(last_line.max(1), "missing `p cnf` header"))?;
    if !current.is_empty() {
        return Err(Error::parse(current_start, "clause missing terminating 0"));
    }
    if clauses.len() != count {
        return Err(Error::parse(
            header_line,
            format!("header declares {count} clauses, found {}", clauses.len()),
        ));
    }
    CnfFormula::new(vars, clauses).map_err(|e| Error::parse(header_line, e.to_string()))
}

/// Emits DIMACS text; each entry of `comments` becomes a `c` line.
pub fn emit_dimacs(phi: &CnfFormula, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        out.push_str("c ");
        out.push_str(c);
        out.push('\n');
    }
    out.push_str(&format!("p cnf {} {}\n", phi.num_vars, phi.clauses.len()));
    for clause in &phi.clauses {
        for lit in clause {
            out.push_str(&lit.to_string());
            out.push(' ');
        }
        out.push_str("0\n");
    }
    out
}
