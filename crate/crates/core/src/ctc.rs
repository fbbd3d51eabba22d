//! The unitary CTC generator.
//!
//! Given a query `(m, C)` the generator returns `PMO_(m,C)` when the query
//! is a pure process matrix generator. Otherwise it may return any `r`-to-`r`
//! channel; here that freedom is exercised by an [`AdversarialPolicy`]
//! drawn non-adaptively from a seed.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::pmf::{pmo, ChannelForm, ChannelRep, PmgQuery, PmoPath};
use crate::rng::{self, StreamRng};
use crate::tensor::{ComplexMatrix, C64, DEFAULT_TOL, ONE, ZERO};

/// What the generator returns for a query that is not a pure PMG.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdversarialPolicy {
    Identity,
    /// A seeded random basis permutation.
    FixedPermutation,
    /// A seeded Haar-random unitary.
    RandomUnitary,
    Depolarizing(f64),
}

impl AdversarialPolicy {
    /// One representative of each policy kind.
    pub fn all() -> [AdversarialPolicy; 4] {
        [
            AdversarialPolicy::Identity,
            AdversarialPolicy::FixedPermutation,
            AdversarialPolicy::RandomUnitary,
            AdversarialPolicy::Depolarizing(1.0),
        ]
    }

    /// The policy's `r`-qubit channel for the given seed.
    pub fn channel(&self, qubits: usize, seed: u64) -> Result<ChannelRep> {
        let d = 1usize << qubits;
        let mut rng = rng::stream(seed, rng::labels::ADVERSARY, qubits as u64);
        match *self {
            AdversarialPolicy::Identity => Ok(ChannelRep::identity(qubits)),
            AdversarialPolicy::FixedPermutation => {
                let mut perm: Vec<usize> = (0..d).collect();
                perm.shuffle(&mut rng);
                let m = ComplexMatrix::from_fn(d, d, |r, c| if perm[c] == r { ONE } else { ZERO });
                ChannelRep::unitary(m)
            }
            AdversarialPolicy::RandomUnitary => ChannelRep::unitary(haar_unitary(&mut rng, d)),
            AdversarialPolicy::Depolarizing(p) => ChannelRep::depolarizing(p, qubits),
        }
    }
}

impl fmt::Display for AdversarialPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarialPolicy::Identity => f.write_str("identity"),
            AdversarialPolicy::FixedPermutation => f.write_str("perm"),
            AdversarialPolicy::RandomUnitary => f.write_str("random"),
            AdversarialPolicy::Depolarizing(p) => write!(f, "depol:{p}"),
        }
    }
}

impl FromStr for AdversarialPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(AdversarialPolicy::Identity),
            "perm" => Ok(AdversarialPolicy::FixedPermutation),
            "random" => Ok(AdversarialPolicy::RandomUnitary),
            other => {
                let p = other
                    .strip_prefix("depol:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Validation(format!(
                            "unknown policy {other:?}; expected identity, perm, random or depol:<p>"
                        ))
                    })?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Validation(format!(
                        "depolarizing probability {p} outside [0, 1]"
                    )));
                }
                Ok(AdversarialPolicy::Depolarizing(p))
            }
        }
    }
}

/// Haar-random `d x d` unitary: QR of a complex Gaussian matrix with the
/// phases of `R`'s diagonal moved into `Q`.
pub fn haar_unitary(rng: &mut StreamRng, d: usize) -> ComplexMatrix {
    let g = DMatrix::<C64>::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    });
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for c in 0..d {
        let diag = r[(c, c)];
        let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { ONE };
        for row in 0..d {
            q[(row, c)] *= phase;
        }
    }
    ComplexMatrix::from_nalgebra(&q)
}

/// Random CPTP channel on `qubits` qubits with `ops` Kraus operators, cut
/// from the first columns of a Haar unitary (a Stinespring isometry).
pub fn random_kraus_channel(rng: &mut StreamRng, qubits: usize, ops: usize) -> ChannelRep {
    let d = 1usize << qubits;
    let u = haar_unitary(rng, d * ops);
    let kraus = (0..ops)
        .map(|i| ComplexMatrix::from_fn(d, d, |r, c| u[(i * d + r, c)]))
        .collect();
    ChannelRep::kraus(kraus, qubits, qubits).expect("Stinespring blocks are complete")
}

/// Access to the channel granted for one query.
#[derive(Debug, Clone)]
pub struct CtcHandle {
    channel: ChannelRep,
    was_valid_pure_pmg: bool,
    query_cost: usize,
}

impl CtcHandle {
    pub fn channel(&self) -> &ChannelRep {
        &self.channel
    }

    /// Whether the query was a pure PMG. Introspection for tests and
    /// demos; the solver never branches on it.
    pub fn was_valid_pure_pmg(&self) -> bool {
        self.was_valid_pure_pmg
    }

    /// `|C|` of the query that produced this handle.
    pub fn query_cost(&self) -> usize {
        self.query_cost
    }

    pub fn apply(&self, state: &QuantumState) -> Result<QuantumState> {
        apply(self, state)
    }
}

/// A register state: pure vector or density matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState {
    Pure(Vec<C64>),
    Mixed(ComplexMatrix),
}

impl QuantumState {
    pub fn basis(qubits: usize, index: usize) -> Self {
        let mut v = vec![ZERO; 1 << qubits];
        v[index] = ONE;
        QuantumState::Pure(v)
    }

    pub fn dim(&self) -> usize {
        match self {
            QuantumState::Pure(v) => v.len(),
            QuantumState::Mixed(m) => m.rows(),
        }
    }

    pub fn to_density(&self) -> ComplexMatrix {
        match self {
            QuantumState::Pure(v) => ComplexMatrix::outer(v, v),
            QuantumState::Mixed(m) => m.clone(),
        }
    }

    /// Computational-basis outcome probabilities.
    pub fn probabilities(&self) -> Vec<f64> {
        match self {
            QuantumState::Pure(v) => v.iter().map(|z| z.norm_sqr()).collect(),
            QuantumState::Mixed(m) => (0..m.rows()).map(|i| m[(i, i)].re.max(0.0)).collect(),
        }
    }

    /// Samples a computational-basis measurement. A basis state always
    /// yields its own index.
    pub fn measure(&self, rng: &mut impl Rng) -> usize {
        let probs = self.probabilities();
        let total: f64 = probs.iter().sum();
        if total <= 0.0 {
            return 0;
        }
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

/// Applies a handle's channel. Pure inputs stay pure under single-operator
/// channels and are promoted to density matrices otherwise.
pub fn apply(h: &CtcHandle, state: &QuantumState) -> Result<QuantumState> {
    let d = 1usize << h.channel.in_qubits();
    if state.dim() != d {
        return Err(Error::dim(format!(
            "state of dimension {} for a channel on {} qubits",
            state.dim(),
            h.channel.in_qubits()
        )));
    }
    match (state, h.channel.single_operator()) {
        (QuantumState::Pure(v), Some(k)) => Ok(QuantumState::Pure(k.apply(v)?)),
        _ => Ok(QuantumState::Mixed(h.channel.apply(&state.to_density())?)),
    }
}

/// A unitary CTC generator with a fixed adversarial policy and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitaryCtcGenerator {
    pub policy: AdversarialPolicy,
    pub seed: u64,
    pub tol: f64,
}

impl UnitaryCtcGenerator {
    pub fn new(policy: AdversarialPolicy, seed: u64) -> Self {
        Self {
            policy,
            seed,
            tol: DEFAULT_TOL,
        }
    }

    pub fn generate(&self, q: &PmgQuery) -> Result<CtcHandle> {
        generate(q, self.policy, self.seed, self.tol)
    }
}

/// Answers a query: the exact PMO for a pure PMG, the policy's channel
/// otherwise. Only non-square queries are rejected outright.
pub fn generate(q: &PmgQuery, policy: AdversarialPolicy, seed: u64, tol: f64) -> Result<CtcHandle> {
    if !q.is_square() {
        return Err(Error::Validation(format!(
            "generator queries must be square; this one appends {} ancillas",
            q.ancillas()
        )));
    }
    let result = pmo(q, PmoPath::Simplified, tol)?;
    let valid = result.report.is_pure_pmg;
    let channel = if valid {
        let traced = result.traced.expect("simplified path yields the traced matrix");
        ChannelRep::unitary_prechecked(traced)?
    } else {
        policy.channel(q.r(), seed)?
    };
    Ok(CtcHandle {
        channel,
        was_valid_pure_pmg: valid,
        query_cost: q.cost(),
    })
}

/// Whether a channel's form promises a pure output for pure input.
pub fn preserves_purity(c: &ChannelRep) -> bool {
    !matches!(c.form(), ChannelForm::Choi(_) | ChannelForm::Depolarizing { .. })
        && c.single_operator().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitSpec, Gate};
    use crate::pmf::is_cptp;

    #[test]
    fn policies_parse_and_print() {
        for s in ["identity", "perm", "random", "depol:0.25"] {
            let p: AdversarialPolicy = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("depol:2".parse::<AdversarialPolicy>().is_err());
        assert!("nope".parse::<AdversarialPolicy>().is_err());
    }

    #[test]
    fn adversarial_channels_are_cptp_and_deterministic() {
        for policy in AdversarialPolicy::all() {
            for q in 1..=3 {
                let c = policy.channel(q, 17).unwrap();
                assert_eq!(c.in_qubits(), q);
                assert!(is_cptp(&c, 1e-10).unwrap().cptp, "{policy} on {q}");
                assert_eq!(c, policy.channel(q, 17).unwrap());
            }
        }
        let a = AdversarialPolicy::RandomUnitary.channel(2, 1).unwrap();
        let b = AdversarialPolicy::RandomUnitary.channel(2, 2).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn identity_query_falls_to_the_adversary() {
        let q = PmgQuery::new(1, CircuitSpec::identity(3).unwrap()).unwrap();
        let h = generate(&q, AdversarialPolicy::Identity, 0, 1e-10).unwrap();
        assert!(!h.was_valid_pure_pmg());
        assert_eq!(h.channel(), &ChannelRep::identity(2));
    }

    #[test]
    fn valid_query_ignores_policy_and_seed() {
        // tracing qubit 0 out of SWAP leaves I_2, a unitary PMO
        let c = CircuitSpec::from_gates(2, vec![Gate::swap(0, 1).unwrap()]).unwrap();
        let q = PmgQuery::new(1, c).unwrap();
        let mut seen = Vec::new();
        for policy in AdversarialPolicy::all() {
            for seed in 0..3 {
                let h = generate(&q, policy, seed, 1e-10).unwrap();
                assert!(h.was_valid_pure_pmg());
                assert_eq!(h.query_cost(), 1);
                seen.push(h.channel().clone());
            }
        }
        assert!(seen.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn isometric_query_is_rejected() {
        let q = PmgQuery::with_ancillas(1, CircuitSpec::identity(3).unwrap(), 1).unwrap();
        assert!(matches!(
            generate(&q, AdversarialPolicy::Identity, 0, 1e-10),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn application_examples() {
        let z = 0b101usize;
        let xor = ComplexMatrix::from_fn(8, 8, |r, c| if r == c ^ z { ONE } else { ZERO });
        let h = CtcHandle {
            channel: ChannelRep::unitary(xor).unwrap(),
            was_valid_pure_pmg: true,
            query_cost: 1,
        };
        let out = h.apply(&QuantumState::basis(3, 0)).unwrap();
        assert_eq!(out, QuantumState::basis(3, z));

        let id = CtcHandle {
            channel: ChannelRep::identity(1),
            was_valid_pure_pmg: false,
            query_cost: 1,
        };
        let psi = QuantumState::Pure(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        assert_eq!(id.apply(&psi).unwrap(), psi);

        let dep = CtcHandle {
            channel: ChannelRep::depolarizing(1.0, 2).unwrap(),
            was_valid_pure_pmg: false,
            query_cost: 1,
        };
        let out = dep.apply(&QuantumState::basis(2, 3)).unwrap();
        let QuantumState::Mixed(rho) = out else { panic!("expected a density matrix") };
        assert!(rho.frobenius_distance(&ComplexMatrix::identity(4).scale(C64::new(0.25, 0.0))) < 1e-15);

        assert!(dep.apply(&QuantumState::basis(1, 0)).is_err());
    }

    #[test]
    fn measurement_of_basis_state_is_deterministic() {
        let mut r = rng::stream(1, "t", 0);
        for _ in 0..100 {
            assert_eq!(QuantumState::basis(3, 6).measure(&mut r), 6);
        }
        let mixed = QuantumState::Mixed(ComplexMatrix::identity(4).scale(C64::new(0.25, 0.0)));
        let mut counts = [0usize; 4];
        for _ in 0..4000 {
            counts[mixed.measure(&mut r)] += 1;
        }
        assert!(counts.iter().all(|&c| (800..1200).contains(&c)), "{counts:?}");
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let mut r = rng::stream(5, "t", 0);
        for d in [2, 4, 16, 64] {
            let u = haar_unitary(&mut r, d);
            assert!(crate::tensor::is_unitary(&u, 1e-10).unwrap().unitary);
        }
        assert!(preserves_purity(&ChannelRep::identity(1)));
        assert!(!preserves_purity(&ChannelRep::depolarizing(0.1, 1).unwrap()));
    }
}
