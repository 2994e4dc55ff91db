#![allow(dead_code)]

use lattice_transport::closed::{make_initial_state, propagate_populations, time_averaged_distribution, InitialKind};
use lattice_transport::dimer::dimer_population;
use lattice_transport::eigen::{diagonalize, Eigensystem};
use lattice_transport::ensemble::{run_ensemble, EnsembleConfig, Experiment};
use lattice_transport::lattice::{build_hamiltonian, sample_disorder, LatticeSpec, Tridiagonal};
use lattice_transport::ode::OdeOptions;
use lattice_transport::open::hsr::{density_invariants, pure_state};
use lattice_transport::open::hsr_dimer::dimer_bloch_rate;
use lattice_transport::open::secular::eigen_populations_of_site;
use lattice_transport::open::{kappa_tensor, lindblad_propagate, secular_propagate, HsrParams};
use lattice_transport::stats::CoMoments;
use lattice_transport::widths::{eigenstate_widths, width_histogram, WidthHistogram};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub type Case = Result<(), TestCaseError>;

pub fn system(n: usize, sigma: f64, seed: u64) -> (LatticeSpec, Tridiagonal, Eigensystem) {
    let spec = LatticeSpec::new(n, 1.0, sigma).unwrap();
    let h = build_hamiltonian(&spec, &sample_disorder(&spec, seed, 0)).unwrap();
    let es = diagonalize(&h).unwrap();
    (spec, h, es)
}

pub fn chain_case() -> impl Strategy<Value = (usize, f64, u64)> {
    (2usize..40, 0.0f64..30.0, any::<u64>())
}

pub fn eigensystem_accurate((n, sigma, seed): (usize, f64, u64)) -> Case {
    let (_, h, es) = system(n, sigma, seed);
    let scale = 1.0 + h.norm_inf();
    prop_assert!(es.orthogonality_error() < 1e-11 * n as f64, "orthogonality {}", es.orthogonality_error());
    prop_assert!(es.reconstruction_error(&h) < 1e-11 * scale * n as f64, "reconstruction {}", es.reconstruction_error(&h));
    prop_assert!(es.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    Ok(())
}

pub fn closed_norm((n, sigma, seed): (usize, f64, u64)) -> Case {
    let (spec, _, es) = system(n, sigma, seed);
    let psi = make_initial_state(&spec, InitialKind::Site { n0: n / 2 }).unwrap();
    let times = [0.0, 0.37, 3.0, 41.0];
    let tr = propagate_populations(&es, &psi, &times).unwrap();
    for ti in 0..times.len() {
        let p = tr.at(ti);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(p.iter().all(|&x| x >= -1e-14));
    }
    Ok(())
}

pub fn stationary_normalized((n, sigma, seed): (usize, f64, u64)) -> Case {
    let (_, _, es) = system(n, sigma, seed);
    let d = time_averaged_distribution(&es, n / 2).unwrap();
    prop_assert!((d.total() - 1.0).abs() < 1e-10);
    prop_assert!(d.values.iter().all(|&x| x >= -1e-15));
    Ok(())
}

pub fn widths_bounded((n, sigma, seed): (usize, f64, u64)) -> Case {
    let (_, _, es) = system(n, sigma, seed);
    let w = eigenstate_widths(&es).unwrap();
    prop_assert!(w.iter().all(|&x| (0.0..=n as f64 / 2.0 + 1e-12).contains(&x)));
    let h = width_histogram(&w, &WidthHistogram::uniform_edges(0.0, n as f64, 17)).unwrap();
    prop_assert_eq!(h.counts.iter().sum::<u64>() + h.underflow + h.overflow, n as u64);
    Ok(())
}

pub fn kappa_stochastic((n, sigma, seed): (usize, f64, u64)) -> Case {
    let (_, _, es) = system(n, sigma, seed);
    let k = kappa_tensor(&es);
    for s in k.column_sums() {
        prop_assert!((s - 1.0).abs() < 1e-10, "column sum {s}");
    }
    for i in 0..n {
        for j in 0..n {
            prop_assert!(k.k(i, j) >= 0.0);
            prop_assert_eq!(k.k(i, j), k.k(j, i));
        }
    }
    Ok(())
}

pub fn open_case() -> impl Strategy<Value = (usize, f64, u64, f64)> {
    (2usize..8, 0.0f64..25.0, any::<u64>(), 0.0f64..1.5)
}

pub fn lindblad_invariants((n, sigma, seed, gamma): (usize, f64, u64, f64)) -> Case {
    let (spec, h, _) = system(n, sigma, seed);
    let psi = make_initial_state(&spec, InitialKind::Site { n0: n / 2 }).unwrap();
    let times = [0.0, 0.5, 2.0, 9.0];
    let tr = lindblad_propagate(&h, &HsrParams::new(gamma).unwrap(), &pure_state(&psi.amplitudes), &times, &OdeOptions::default()).unwrap();
    for m in &tr.matrices {
        let inv = density_invariants(m, n);
        prop_assert!(inv.trace_error < 1e-8, "trace {}", inv.trace_error);
        prop_assert!(inv.hermiticity_error < 1e-10, "hermiticity {}", inv.hermiticity_error);
        prop_assert!(inv.min_eigenvalue > -1e-8, "min eigenvalue {}", inv.min_eigenvalue);
    }
    Ok(())
}

pub fn purity_monotone_without_hopping((n, sigma, seed, gamma): (usize, f64, u64, f64)) -> Case {
    let spec = LatticeSpec::new(n, 1.0, sigma).unwrap();
    let diag = sample_disorder(&spec, seed, 0).energies;
    let h = Tridiagonal::new(diag, vec![0.0; n - 1]).unwrap();
    let amp = num_complex::Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
    let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.25).collect();
    let tr = lindblad_propagate(&h, &HsrParams::new(gamma).unwrap(), &pure_state(&vec![amp; n]), &times, &OdeOptions::default()).unwrap();
    let purity: Vec<f64> = tr.matrices.iter().map(|m| m.iter().map(|z| z.norm_sqr()).sum()).collect();
    prop_assert!(purity.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    Ok(())
}

pub fn secular_conserves(((n, sigma, seed), gamma): ((usize, f64, u64), f64)) -> Case {
    let (_, _, es) = system(n, sigma, seed);
    let p0 = eigen_populations_of_site(&es, n / 2);
    let times = [0.0, 1.0, 30.0, 1e4];
    let tr = secular_propagate(&es, &HsrParams::new(gamma).unwrap(), &p0, &times).unwrap();
    for ti in 0..times.len() {
        let p = tr.at(ti);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(p.iter().all(|&x| (-1e-10..=1.0 + 1e-10).contains(&x)));
    }
    Ok(())
}

pub fn dimer_case() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.1f64..3.0, -40.0f64..40.0, 0.0f64..2.0, 0.0f64..20.0)
}

pub fn dimer_populations_bounded((j, eps, _, t): (f64, f64, f64, f64)) -> Case {
    let p = dimer_population(j, eps, t);
    prop_assert!((-1e-15..=1.0 + 1e-15).contains(&p));
    Ok(())
}

pub fn dephased_dimer_matches_generator((j, eps, gamma, t): (f64, f64, f64, f64)) -> Case {
    let m = nalgebra::Matrix3::new(0.0, 0.0, -4.0 * j, 0.0, -gamma, eps, j, -eps, -gamma);
    let x = (m * t).exp() * nalgebra::Vector3::new(1.0, 0.0, 0.0);
    let a = dimer_bloch_rate(j, eps, gamma, t);
    prop_assert!((a - 2.0 * j * x[2]).abs() < 1e-9 * (1.0 + j * j), "{a} vs {}", 2.0 * j * x[2]);
    Ok(())
}

pub fn merge_case() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (prop::collection::vec(-1e3f64..1e3, 2..200), any::<usize>())
}

pub fn streaming_matches_two_pass((xs, split): (Vec<f64>, usize)) -> Case {
    let split = split % xs.len();
    let (mut a, mut b) = (CoMoments::new(1, 1), CoMoments::new(1, 1));
    for x in &xs[..split] {
        a.push(&[*x]).unwrap();
    }
    for x in &xs[split..] {
        b.push(&[*x]).unwrap();
    }
    a.merge(&b).unwrap();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let scale = xs.iter().map(|x| x * x).sum::<f64>() / n;
    prop_assert!((a.mean(0, 0) - mean).abs() <= 1e-12 * scale.sqrt().max(1.0));
    prop_assert!((a.covariance(0, 0, 0) - var).abs() <= 1e-12 * scale.max(1.0));
    Ok(())
}

/// Closed and open ensembles give bit-identical statistics on 1 and 3 workers.
pub fn thread_count_determinism() -> Result<(), String> {
    let spec = LatticeSpec::new(11, 1.0, 5.0).unwrap();
    for exp in [
        Experiment::ClosedDiffusivity,
        Experiment::OpenDiffusivity {
            hsr: HsrParams::new(0.2).unwrap(),
            secular_after: None,
        },
        Experiment::StationaryDistribution,
    ] {
        let mut cfg = EnsembleConfig::new(spec, 75, 7, exp);
        cfg.grid = lattice_transport::closed::TimeGrid::new(2.0, 0.05).unwrap();
        cfg.threads = Some(1);
        let a = run_ensemble(&cfg).map_err(|e| e.to_string())?;
        cfg.threads = Some(3);
        let b = run_ensemble(&cfg).map_err(|e| e.to_string())?;
        let same = a.mean.iter().zip(&b.mean).all(|(x, y)| x.to_bits() == y.to_bits())
            && a.stderr.iter().zip(&b.stderr).all(|(x, y)| x.to_bits() == y.to_bits());
        if !same {
            return Err(format!("{} differs between worker counts", a.experiment));
        }
    }
    Ok(())
}

/// Runs a property with a fixed-seed runner; returns a failure description.
pub fn run_property<S, F>(cases: u32, strategy: S, check: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Case,
{
    let config = Config {
        cases,
        failure_persistence: None,
        rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, proptest::test_runner::TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha));
    runner.run(&strategy, check).map_err(|e| e.to_string())
}
