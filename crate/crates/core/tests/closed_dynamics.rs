use approx::assert_abs_diff_eq;
use lattice_transport::closed::*;
use lattice_transport::eigen::{diagonalize, Eigensystem};
use lattice_transport::lattice::{build_hamiltonian, sample_disorder, LatticeSpec, Tridiagonal};
use std::f64::consts::PI;

fn disordered(n: usize, sigma: f64, seed: u64) -> (LatticeSpec, Eigensystem) {
    let spec = LatticeSpec::new(n, 1.0, sigma).unwrap();
    let es = diagonalize(&build_hamiltonian(&spec, &sample_disorder(&spec, seed, 0)).unwrap()).unwrap();
    (spec, es)
}

#[test]
fn ordered_spectrum_is_cosine_band() {
    for &(n, j) in &[(7usize, 1.0), (50, 1.0), (33, -0.6)] {
        let es = diagonalize(&Tridiagonal::chain(vec![0.0; n], j)).unwrap();
        let mut want: Vec<f64> = (1..=n).map(|k| 2.0 * j * (k as f64 * PI / (n as f64 + 1.0)).cos()).collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in es.eigenvalues.iter().zip(&want) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }
}

#[test]
fn ordered_infinite_time_average_closed_form() {
    // Sums of sin² products over the open-chain modes: 1/(N+1) everywhere
    // except the start site and its mirror image, which carry 3/(2(N+1)).
    let n = 20;
    let n0 = 3;
    let es = diagonalize(&Tridiagonal::chain(vec![0.0; n], 1.0)).unwrap();
    let d = time_averaged_distribution(&es, n0).unwrap();
    let base = 1.0 / (n as f64 + 1.0);
    for site in 0..n {
        let m = site as i64 - n0 as i64;
        let want = if site == n0 || site == n - 1 - n0 { 1.5 * base } else { base };
        assert_abs_diff_eq!(d.values[(d.origin as i64 + m) as usize], want, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(d.total(), 1.0, epsilon = 1e-12);
}

#[test]
fn infinite_time_average_matches_long_run() {
    let (spec, es) = disordered(21, 3.0, 4);
    let n0 = 10;
    let psi = make_initial_state(&spec, InitialKind::Site { n0 }).unwrap();
    let times = TimeGrid::new(4000.0, 0.05).unwrap().times();
    let tr = propagate_populations(&es, &psi, &times).unwrap();
    let mut avg = [0.0; 21];
    for ti in 0..times.len() {
        for (a, p) in avg.iter_mut().zip(tr.at(ti)) {
            *a += p / times.len() as f64;
        }
    }
    let d = time_averaged_distribution(&es, n0).unwrap();
    let mut l1 = 0.0;
    for (site, a) in avg.iter().enumerate() {
        let exact = d.values[d.origin + site - n0];
        assert!((a - exact).abs() < 2e-3, "site {site}: {a} vs {exact}");
        l1 += (a - exact).abs();
    }
    assert!(l1 < 0.01, "L1 {l1}");
}

#[test]
fn narrow_gaussian_behaves_like_site_start() {
    let (spec, es) = disordered(41, 2.0, 9);
    let times = TimeGrid::new(10.0, 0.1).unwrap().times();
    let site = make_initial_state(&spec, InitialKind::Site { n0: 20 }).unwrap();
    let narrow = make_initial_state(&spec, InitialKind::Gaussian { n0: 20, w: 0.1 }).unwrap();
    let a = diffusivity(&es, &site, &times).unwrap().d_values;
    let b = diffusivity(&es, &narrow, &times).unwrap().d_values;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-3 * scale);
    }
}

#[test]
fn diffusivity_starts_at_zero_with_ballistic_slope() {
    let (spec, es) = disordered(31, 5.0, 2);
    let psi = make_initial_state(&spec, InitialKind::Site { n0: 15 }).unwrap();
    let m = moments(&es, &psi, &[0.0, 1e-4], MomentOptions { second_derivatives: true, edge_threshold: None }).unwrap();
    let d = m.diffusivity();
    assert_abs_diff_eq!(d[0], 0.0, epsilon = 1e-12);
    assert_abs_diff_eq!(m.diffusivity_rate().unwrap()[0], 2.0, epsilon = 1e-9);
    assert_abs_diff_eq!(d[1] / 1e-4, 2.0, epsilon = 1e-3);
}

#[test]
fn strong_disorder_freezes_the_particle() {
    let (_, es) = disordered(51, 1e4, 1);
    let d = time_averaged_distribution(&es, 25).unwrap();
    assert!(d.values[d.origin] > 0.999);
    assert!(stationary_width(&d).unwrap() < 0.05);
}

#[test]
fn stationary_width_shrinks_with_disorder() {
    let widths: Vec<f64> = [0.5, 2.0, 8.0]
        .iter()
        .map(|&s| {
            let (_, es) = disordered(101, s, 3);
            stationary_width(&site_averaged_distribution(&es, bulk_sites(101)).unwrap()).unwrap()
        })
        .collect();
    assert!(widths.windows(2).all(|w| w[0] > w[1]), "{widths:?}");
}

#[test]
fn edge_monitor_reports_population() {
    let (spec, es) = disordered(21, 0.0, 0);
    let psi = make_initial_state(&spec, InitialKind::Site { n0: 10 }).unwrap();
    let opts = MomentOptions { second_derivatives: false, edge_threshold: Some(EDGE_THRESHOLD) };
    assert!(moments(&es, &psi, &[0.0, 1.0], opts).unwrap().max_edge_population < EDGE_THRESHOLD);
    match moments(&es, &psi, &[0.0, 1.0, 20.0], opts) {
        Err(lattice_transport::Error::BoundaryReached { population, threshold }) => assert!(population > threshold),
        other => panic!("expected boundary error, got {other:?}"),
    }
}

#[test]
fn ensemble_long_run_converges_to_infinite_time_average() {
    let (n, n0, m) = (51, 25, 100);
    let times = TimeGrid::new(1000.0, 0.1).unwrap().times();
    let mut long = vec![0.0; 2 * n - 1];
    let mut exact = vec![0.0; 2 * n - 1];
    for i in 0..m {
        let spec = LatticeSpec::new(n, 1.0, 2.0).unwrap();
        let es = diagonalize(&build_hamiltonian(&spec, &sample_disorder(&spec, 21, i)).unwrap()).unwrap();
        let psi = make_initial_state(&spec, InitialKind::Site { n0 }).unwrap();
        let tr = propagate_populations(&es, &psi, &times).unwrap();
        for ti in 0..times.len() {
            for (site, p) in tr.at(ti).iter().enumerate() {
                long[n - 1 + site - n0] += p / (times.len() * m as usize) as f64;
            }
        }
        for (e, v) in exact.iter_mut().zip(time_averaged_distribution(&es, n0).unwrap().values) {
            *e += v / m as f64;
        }
    }
    let l1: f64 = long.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum();
    assert!(l1 < 0.01, "L1 {l1}");
    assert!(long.iter().zip(&exact).all(|(a, b)| (a - b).abs() < 1e-3));
}

// The per-realization spread of D grows like w², so resolving a 10% difference
// at w = 4 takes a few hundred thousand realizations.
#[test]
#[ignore = "heavy: 2.5e5 realizations per width"]
fn diffusivity_barely_depends_on_gaussian_width() {
    use lattice_transport::ensemble::{run_ensemble, EnsembleConfig, Experiment};
    let mut curves = Vec::new();
    for &w in &[1.0, 2.0, 4.0] {
        let mut cfg = EnsembleConfig::new(LatticeSpec::new(41, 1.0, 20.0).unwrap(), 250_000, 5, Experiment::ClosedDiffusivity);
        cfg.grid = TimeGrid::new(6.0, 0.05).unwrap();
        cfg.initial = InitialKind::Gaussian { n0: 20, w };
        curves.push(run_ensemble(&cfg).unwrap());
    }
    let d0 = &curves[0].mean;
    let peak = (1..d0.len()).find(|&i| d0[i] < d0[i - 1]).unwrap();
    let amp = d0[peak..].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for c in &curves[1..] {
        let dev = c.mean[peak..].iter().zip(&d0[peak..]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let noise = c.stderr[peak..].iter().fold(0.0f64, |a, &v| a.max(v));
        assert!(dev < 0.1 * amp, "{dev} vs amplitude {amp} (stderr up to {noise})");
    }
}
