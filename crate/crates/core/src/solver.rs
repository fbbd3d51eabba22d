//! The single-query unique-SAT routine and the SAT decision loop.
//!
//! [`build_usat_rule`] turns a formula on `n` variables into a `2n`-qubit
//! circuit whose traced block is the shift `|y⟩ ↦ |y ⊕ z⟩` when `z` is the
//! formula's unique model. Querying the CTC generator with it and feeding
//! `|0ⁿ⟩` to the returned channel yields `|z⟩` after one query.

use std::fmt;

use rand::Rng;

use crate::circuit::{r_half, BasisRule, CircuitSpec, SparseColumn, TRACED_CAP};
use crate::cnf::{evaluate, prefix_completion_index, Assignment, CnfFormula, Completion};
use crate::ctc::{AdversarialPolicy, QuantumState, UnitaryCtcGenerator};
use crate::error::{Error, Result};
use crate::pmf::PmgQuery;
use crate::rng::{self, labels};
use crate::tensor::{DEFAULT_TOL, ONE};
use crate::vv::{vv_reduce, EncodingMode};

/// Default bound on the variables of a formula handed to [`m_usat`].
pub const DEFAULT_MAX_N: usize = 8;

/// Hard bound: the USAT circuit has `2n` qubits and is traced column by
/// column.
pub const HARD_MAX_N: usize = TRACED_CAP / 2;

/// The USAT circuit for `phi` as a basis rule on `2n` qubits.
///
/// Basis index `(x << n) | y`, with `x` the traced register. Writing
/// `x = (p, x_n)`: when `p` completes to a model `(p, b)` the rule adds
/// `(p, b)` into `y` and rotates `x_n` by R½; otherwise it flips `x_n`.
/// A prefix with two completing bits is treated as completing with `b = 0`.
pub fn build_usat_rule(phi: &CnfFormula) -> Result<CircuitSpec> {
    let n = phi.num_vars();
    if n == 0 {
        return Err(Error::Validation("the USAT circuit needs at least one variable".into()));
    }
    if n > HARD_MAX_N {
        return Err(Error::Resource(format!(
            "USAT circuit on {} qubits exceeds the {TRACED_CAP}-qubit simulation cap",
            2 * n
        )));
    }
    let compiled = phi.compile()?;
    let table: Vec<Option<usize>> = (0..1u64 << (n - 1))
        .map(|p| match prefix_completion_index(&compiled, p) {
            Completion::Unique(b) => Some(((p as usize) << 1) | usize::from(b)),
            Completion::Ambiguous => Some((p as usize) << 1),
            Completion::None => None,
        })
        .collect();
    let literals: usize = phi.clauses().iter().map(Vec::len).sum();
    let [a, b, c, d] = r_half();
    let y_mask = (1usize << n) - 1;
    let rule = move |index: usize| -> SparseColumn {
        let x = index >> n;
        let y = index & y_mask;
        match table[x >> 1] {
            Some(z) => {
                let y2 = y ^ z;
                let x0 = x & !1;
                let x1 = x | 1;
                if x & 1 == 0 {
                    vec![((x0 << n) | y2, a), ((x1 << n) | y2, c)]
                } else {
                    vec![((x0 << n) | y2, b), ((x1 << n) | y2, d)]
                }
            }
            None => vec![(((x ^ 1) << n) | y, ONE)],
        }
    };
    CircuitSpec::from_rule(BasisRule::new(2 * n, 2 * n + literals, format!("usat-{n}"), rule))
}

/// Summary of the one query issued by [`m_usat`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuerySummary {
    pub m: usize,
    pub width: usize,
    pub cost: usize,
}

/// Result of one run of the USAT routine.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsatOutcome {
    pub witness: Option<Assignment>,
    /// The witness satisfies the queried formula.
    pub verified: bool,
    pub query: QuerySummary,
    /// Whether the query was a pure PMG; `None` unless introspection was
    /// requested.
    pub was_valid_pure_pmg: Option<bool>,
}

/// One query, one channel application, one measurement, one check.
///
/// `measurement` drives the computational-basis sample; it is only
/// consulted when the channel output is not a basis state.
pub fn m_usat(
    phi: &CnfFormula,
    generator: &UnitaryCtcGenerator,
    measurement: &mut impl Rng,
    max_n: usize,
    introspect: bool,
) -> Result<UsatOutcome> {
    let n = phi.num_vars();
    if n > max_n.min(HARD_MAX_N) {
        return Err(Error::Resource(format!(
            "formula has {n} variables; the solver is capped at {}",
            max_n.min(HARD_MAX_N)
        )));
    }
    let circuit = build_usat_rule(phi)?;
    let query = PmgQuery::new(n, circuit)?;
    let summary = QuerySummary {
        m: n,
        width: 2 * n,
        cost: query.cost(),
    };
    let handle = generator.generate(&query)?;
    let out = handle.apply(&QuantumState::basis(n, 0))?;
    let z = Assignment::from_index(out.measure(measurement) as u64, n);
    let verified = evaluate(phi, &z)?;
    Ok(UsatOutcome {
        witness: Some(z),
        verified,
        query: summary,
        was_valid_pure_pmg: introspect.then(|| handle.was_valid_pure_pmg()),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// A model of the input, on its original variables.
    Sat(Assignment),
    Unsat,
}

impl fmt::Display for SatResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SatResult::Sat(a) => write!(f, "SAT {a}"),
            SatResult::Unsat => f.write_str("UNSAT"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SatDecision {
    pub result: SatResult,
    /// Rounds executed, including the accepting one.
    pub iterations_used: usize,
    pub total_query_cost: usize,
    pub seed: u64,
    /// The accepting round's full witness, auxiliaries included.
    pub extended_witness: Option<Assignment>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Rounds to run; `None` means `n²`.
    pub iterations: Option<usize>,
    pub seed: u64,
    /// Seed for the adversary's channels; `None` reuses `seed`.
    pub adversary_seed: Option<u64>,
    pub policy: AdversarialPolicy,
    /// Isolation encoding; `None` picks per formula size.
    pub mode: Option<EncodingMode>,
    pub max_n: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: None,
            seed: 0,
            adversary_seed: None,
            policy: AdversarialPolicy::Identity,
            mode: None,
            max_n: DEFAULT_MAX_N,
            tol: DEFAULT_TOL,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    /// Rounds for a formula on `n` original variables.
    pub fn rounds_for(&self, n: usize) -> usize {
        self.iterations.unwrap_or(n * n).max(1)
    }
}

/// Isolate, query, verify; accept at the first verified round.
///
/// Round `i` draws its isolation constraint, adversary and measurement from
/// sub-streams of the run seed indexed by `i`, so a run is reproducible and
/// independent of how many rounds preceded acceptance.
pub fn sat_decide(phi: &CnfFormula, config: &SolverConfig) -> Result<SatDecision> {
    let n = phi.original_vars();
    let cap = config.max_n.min(HARD_MAX_N);
    if n > cap {
        return Err(Error::Resource(format!(
            "formula has {n} variables; the solver is capped at {cap}"
        )));
    }
    let mode = config.mode.unwrap_or_else(|| EncodingMode::default_for(n));
    let adversary_seed = config.adversary_seed.unwrap_or(config.seed);
    let rounds = config.rounds_for(n);
    let mut total_query_cost = 0;

    if n == 0 {
        // No variables: the only assignment is empty, and no query is needed.
        let sat = phi.clauses().iter().all(|c| !c.is_empty());
        return Ok(SatDecision {
            result: if sat { SatResult::Sat(Assignment::new(vec![])) } else { SatResult::Unsat },
            iterations_used: 0,
            total_query_cost,
            seed: config.seed,
            extended_witness: None,
        });
    }

    for i in 0..rounds {
        let idx = i as u64;
        let (star, _) = vv_reduce(phi, rng::derive_seed(config.seed, labels::VV, idx), mode)?;
        let generator = UnitaryCtcGenerator {
            policy: config.policy,
            seed: rng::derive_seed(adversary_seed, labels::ROUND, idx),
            tol: config.tol,
        };
        let mut meas = rng::stream(config.seed, labels::MEASUREMENT, idx);
        let outcome = m_usat(&star, &generator, &mut meas, cap, false)?;
        total_query_cost += outcome.query.cost;
        if outcome.verified {
            let full = outcome.witness.expect("verified outcomes carry a witness");
            let projected = full.project(n);
            return Ok(SatDecision {
                result: SatResult::Sat(projected),
                iterations_used: i + 1,
                total_query_cost,
                seed: config.seed,
                extended_witness: Some(full),
            });
        }
    }
    Ok(SatDecision {
        result: SatResult::Unsat,
        iterations_used: rounds,
        total_query_cost,
        seed: config.seed,
        extended_witness: None,
    })
}
