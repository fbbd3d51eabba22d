//! Criterion benchmarks for the simulation paths.
//!
//! `benches/paths.rs` only wires these groups into a harness; the workloads
//! live here so they can be reused from other harnesses.

use std::hint::black_box;

use criterion::{BenchmarkId, Criterion};

use ctcsat::cnf::{count_models, random_cnf};
use ctcsat::ctc::haar_unitary;
use ctcsat::solver::build_usat_rule;
use ctcsat::vv::{vv_reduce, EncodingMode};
use ctcsat::{BasisRule, CircuitSpec, PmgQuery, PmoPath, SolverConfig};

/// Seed shared by every workload so runs are comparable.
pub const SEED: u64 = 0x5eed;

/// A square query over a Haar-random unitary on `n + r` qubits.
pub fn haar_query(n: usize, r: usize) -> PmgQuery {
    let mut rng = ctcsat::rng::stream(SEED, "bench", (n * 8 + r) as u64);
    let u = haar_unitary(&mut rng, 1 << (n + r));
    let rule = BasisRule::new(n + r, 1, "haar", move |i| {
        (0..u.rows()).map(|row| (row, u[(row, i)])).collect()
    });
    PmgQuery::new(n, CircuitSpec::from_rule(rule).expect("width is positive")).expect("valid query")
}

/// Full CJ path against the traced shortcut on the same query.
pub fn pmo_paths(c: &mut Criterion) {
    let mut group = c.benchmark_group("pmo");
    for (n, r) in [(1, 1), (1, 2), (2, 2), (3, 3)] {
        let q = haar_query(n, r);
        let id = format!("n{n}_r{r}");
        group.bench_with_input(BenchmarkId::new("full_cj", &id), &q, |b, q| {
            b.iter(|| ctcsat::pmf::pmo(black_box(q), PmoPath::FullCj, 1e-10).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("simplified", &id), &q, |b, q| {
            b.iter(|| ctcsat::pmf::pmo(black_box(q), PmoPath::Simplified, 1e-10).unwrap())
        });
    }
    group.finish();
}

/// Traced block of the USAT circuit as the variable count grows.
pub fn usat_traced(c: &mut Criterion) {
    let mut group = c.benchmark_group("usat_traced");
    group.sample_size(20);
    for n in [2usize, 4, 6, 8] {
        let phi = random_cnf(n, 4 * n, 3.min(n), SEED).unwrap();
        let circuit = build_usat_rule(&phi).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &circuit, |b, circuit| {
            b.iter(|| circuit.traced_block_unitary(black_box(n)).unwrap())
        });
    }
    group.finish();
}

/// Isolation step plus brute-force count, the unit of the statistics sweep.
pub fn isolation(c: &mut Criterion) {
    let mut group = c.benchmark_group("isolation");
    for n in [4usize, 8] {
        let phi = ctcsat::cnf::half_fixed_formula(n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &phi, |b, phi| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                let star = vv_reduce(phi, seed, EncodingMode::Direct).unwrap().0;
                count_models(&star).unwrap()
            })
        });
    }
    group.finish();
}

/// One full decision run on a fixed random 3-CNF.
pub fn decide(c: &mut Criterion) {
    let mut group = c.benchmark_group("sat_decide");
    group.sample_size(10);
    for n in [3usize, 5] {
        let phi = random_cnf(n, 4 * n, 3, SEED).unwrap();
        let config = SolverConfig {
            iterations: Some(10 * n),
            ..SolverConfig::with_seed(SEED)
        };
        group.bench_with_input(BenchmarkId::from_parameter(n), &phi, |b, phi| {
            b.iter(|| ctcsat::solver::sat_decide(black_box(phi), &config).unwrap())
        });
    }
    group.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    pmo_paths(c);
    usat_traced(c);
    isolation(c);
    decide(c);
}
