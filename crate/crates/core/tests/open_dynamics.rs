use approx::assert_abs_diff_eq;
use lattice_transport::closed::{diffusivity, make_initial_state, InitialKind};
use lattice_transport::eigen::{diagonalize, Eigensystem};
use lattice_transport::lattice::{build_hamiltonian, sample_disorder, LatticeSpec, Tridiagonal};
use lattice_transport::ode::OdeOptions;
use lattice_transport::open::hsr::{density_invariants, lindblad_rhs, pure_state, superoperator};
use lattice_transport::open::kappa::{eigenbasis_rhs, to_eigenbasis, to_site_basis};
use lattice_transport::open::secular::{eigen_populations_of_site, rate_matrix, site_populations};
use lattice_transport::open::*;
use num_complex::Complex64;

fn disordered(n: usize, sigma: f64, index: u64) -> (Tridiagonal, Eigensystem) {
    let spec = LatticeSpec::new(n, 1.0, sigma).unwrap();
    let h = build_hamiltonian(&spec, &sample_disorder(&spec, 11, index)).unwrap();
    let es = diagonalize(&h).unwrap();
    (h, es)
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn grid(t_max: f64, dt: f64) -> Vec<f64> {
    let n = (t_max / dt).round() as usize;
    (0..=n).map(|i| i as f64 * dt).collect()
}

#[test]
fn zero_dephasing_matches_spectral_evolution() {
    let (h, es) = disordered(11, 2.0, 3);
    let n = 11;
    let times = grid(10.0, 0.5);
    let tr = lindblad_propagate(&h, &HsrParams::new(0.0).unwrap(), &site_projector(n, 5), &times, &OdeOptions::default()).unwrap();
    for (ti, &t) in times.iter().enumerate() {
        let mut psi = vec![Complex64::new(0.0, 0.0); n];
        for k in 0..n {
            let c = es.u(k, 5) * Complex64::from_polar(1.0, -es.eigenvalues[k] * t);
            for (p, u) in psi.iter_mut().zip(es.row(k)) {
                *p += c * u;
            }
        }
        assert!(max_diff(&tr.matrices[ti], &pure_state(&psi)) < 1e-7, "t = {t}");
    }
}

#[test]
fn zero_dephasing_diffusivity_matches_closed() {
    let (h, es) = disordered(15, 1.0, 0);
    let spec = LatticeSpec::new(15, 1.0, 1.0).unwrap();
    let psi0 = make_initial_state(&spec, InitialKind::Site { n0: 7 }).unwrap();
    let times = grid(6.0, 0.25);
    let closed = diffusivity(&es, &psi0, &times).unwrap();
    let tr = lindblad_propagate(&h, &HsrParams::new(0.0).unwrap(), &site_projector(15, 7), &times, &OdeOptions::default()).unwrap();
    let open = diffusivity_from_rho(&tr, &h, 7);
    for (a, b) in closed.d_values.iter().zip(&open.d_values) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-7);
    }
}

#[test]
fn eigenprojector_mixtures_are_stationary_without_dephasing() {
    let (h, es) = disordered(6, 1.5, 1);
    let n = 6;
    let weights = [0.3, 0.1, 0.25, 0.05, 0.2, 0.1];
    let mut rho = vec![Complex64::new(0.0, 0.0); n * n];
    for (k, w) in weights.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                rho[i * n + j] += w * es.u(k, i) * es.u(k, j);
            }
        }
    }
    let times = [0.0, 2.0, 7.0];
    let tr = lindblad_propagate(&h, &HsrParams::new(0.0).unwrap(), &rho, &times, &OdeOptions::default()).unwrap();
    for m in &tr.matrices {
        assert!(max_diff(m, &rho) < 1e-7);
    }
}

#[test]
fn ordered_chain_with_dephasing_has_saturating_diffusivity() {
    let n = 81;
    let gamma = 0.5;
    let h = Tridiagonal::chain(vec![0.0; n], 1.0);
    let times = grid(10.0, 0.5);
    let tr = lindblad_propagate(&h, &HsrParams::new(gamma).unwrap(), &site_projector(n, 40), &times, &OdeOptions::default()).unwrap();
    let d = diffusivity_from_rho(&tr, &h, 40);
    for (&t, &v) in times.iter().zip(&d.d_values) {
        let exact = 2.0 / gamma * (1.0 - (-gamma * t).exp());
        assert_abs_diff_eq!(v, exact, epsilon = 1e-6);
    }
}

#[test]
fn streaming_moments_match_stored_trace() {
    let (h, _) = disordered(9, 3.0, 2);
    let params = HsrParams::new(0.2).unwrap();
    let times = grid(5.0, 0.5);
    let rho0 = site_projector(9, 4);
    let tr = lindblad_propagate(&h, &params, &rho0, &times, &OdeOptions::default()).unwrap();
    let stored = diffusivity_from_rho(&tr, &h, 4);
    let streamed = open_moments(&h, &params, &rho0, 4, &times, &OdeOptions::default(), None).unwrap();
    assert_eq!(stored.d_values, streamed.diffusivity());
}

#[test]
fn runge_kutta_matches_superoperator_exponential() {
    let (h, _) = disordered(6, 1.0, 4);
    let params = HsrParams::new(0.3).unwrap();
    let times = grid(8.0, 1.0);
    let rho0 = site_projector(6, 2);
    let rk = lindblad_propagate(&h, &params, &rho0, &times, &OdeOptions::default()).unwrap();
    let ex = superoperator_propagate(&h, &params, &rho0, &times).unwrap();
    for (a, b) in rk.matrices.iter().zip(&ex.matrices) {
        assert!(max_diff(a, b) < 1e-7);
    }
    assert!(superoperator_propagate(&Tridiagonal::chain(vec![0.0; 9], 1.0), &params, &site_projector(9, 0), &times).is_err());
}

#[test]
fn superoperator_agrees_with_rhs() {
    let (h, _) = disordered(4, 1.0, 5);
    let n = 4;
    let l = superoperator(&h, 0.7);
    let rho: Vec<Complex64> = (0..n * n).map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    lindblad_rhs(&h, 0.7, &rho, &mut out);
    let v = &l * nalgebra::DVector::from_column_slice(&rho);
    assert!(max_diff(v.as_slice(), &out) < 1e-13);
}

#[test]
fn density_matrix_invariants_along_trajectory() {
    let (h, _) = disordered(10, 20.0, 6);
    let spec = LatticeSpec::new(10, 1.0, 20.0).unwrap();
    let psi = make_initial_state(&spec, InitialKind::Gaussian { n0: 5, w: 1.0 }).unwrap();
    let times = grid(20.0, 1.0);
    let tr = lindblad_propagate(&h, &HsrParams::new(0.1).unwrap(), &pure_state(&psi.amplitudes), &times, &OdeOptions::default()).unwrap();
    for m in &tr.matrices {
        let inv = density_invariants(m, 10);
        assert!(inv.trace_error < 1e-8);
        assert!(inv.hermiticity_error < 1e-10);
        assert!(inv.min_eigenvalue > -1e-8);
    }
}

#[test]
fn invalid_initial_density_matrix_is_rejected() {
    let h = Tridiagonal::chain(vec![0.0; 3], 1.0);
    let mut rho = site_projector(3, 1);
    rho[4] = Complex64::new(2.0, 0.0);
    assert!(lindblad_propagate(&h, &HsrParams::new(0.1).unwrap(), &rho, &[0.0, 1.0], &OdeOptions::default()).is_err());
    assert!(HsrParams::new(-0.1).is_err());
}

#[test]
fn purity_decreases_under_pure_dephasing() {
    let n = 5;
    let h = Tridiagonal::new(vec![0.3, -0.2, 0.0, 1.0, 0.5], vec![0.0; 4]).unwrap();
    let psi: Vec<Complex64> = (0..n).map(|_| Complex64::new(1.0 / (n as f64).sqrt(), 0.0)).collect();
    let times = grid(5.0, 0.1);
    let tr = lindblad_propagate(&h, &HsrParams::new(0.4).unwrap(), &pure_state(&psi), &times, &OdeOptions::default()).unwrap();
    let purity: Vec<f64> = tr.matrices.iter().map(|m| m.iter().map(|z| z.norm_sqr()).sum()).collect();
    assert!(purity.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(purity.last().unwrap() < &0.3);
}

#[test]
fn kappa_examples() {
    let id = Eigensystem::from_parts(vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let k = kappa_tensor(&id);
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(k.k(i, j), if i == j { 1.0 } else { 0.0 });
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rot = Eigensystem::from_parts(vec![-1.0, 1.0], vec![s, -s, s, s]).unwrap();
    let k = kappa_tensor(&rot);
    for v in k.diagonal_block() {
        assert_abs_diff_eq!(*v, 0.5, epsilon = 1e-15);
    }
}

#[test]
fn kappa_block_matches_full_tensor() {
    let (_, es) = disordered(5, 1.0, 7);
    let k = kappa_tensor(&es);
    let full = k.full().unwrap();
    let n = 5;
    for i in 0..n {
        for j in 0..n {
            assert_abs_diff_eq!(k.k(i, j), full[((i * n + i) * n + j) * n + j], epsilon = 1e-15);
            assert_abs_diff_eq!(k.k(i, j), k.k(j, i), epsilon = 0.0);
        }
    }
}

#[test]
fn eigenbasis_rhs_matches_explicit_kappa_sum() {
    let (_, es) = disordered(4, 2.0, 8);
    let n = 4;
    let gamma = 0.6;
    let full = kappa_tensor(&es).full().unwrap();
    let rho: Vec<Complex64> = (0..n * n).map(|k| Complex64::new((k as f64 * 0.7).cos(), (k as f64).sin())).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    let mut scratch = out.clone();
    eigenbasis_rhs(&es, gamma, &rho, &mut out, &mut scratch);
    for i in 0..n {
        for j in 0..n {
            let w = es.eigenvalues[i] - es.eigenvalues[j];
            let mut v = -Complex64::new(0.0, 1.0) * Complex64::new(w, -gamma) * rho[i * n + j];
            for k in 0..n {
                for l in 0..n {
                    v += gamma * full[((i * n + j) * n + k) * n + l] * rho[k * n + l];
                }
            }
            assert!((v - out[i * n + j]).norm() < 1e-13);
        }
    }
}

#[test]
fn eigenbasis_path_matches_site_basis() {
    for &(n, idx) in &[(2usize, 9u64), (7, 10)] {
        let (h, es) = disordered(n, 2.0, idx);
        let params = HsrParams::new(0.25).unwrap();
        let times = grid(10.0, 1.0);
        let rho0 = site_projector(n, n / 2);
        let site = lindblad_propagate(&h, &params, &rho0, &times, &OdeOptions::default()).unwrap();
        let eig = eigenbasis_propagate(&es, &params, &to_eigenbasis(&es, &rho0), &times, &OdeOptions::default()).unwrap();
        for (a, b) in site.matrices.iter().zip(&eig.matrices) {
            assert!(max_diff(a, &to_site_basis(&es, b)) < 1e-7);
        }
    }
}

#[test]
fn eigenbasis_without_dephasing_rotates_phases() {
    let (_, es) = disordered(5, 1.0, 12);
    let rho0 = to_eigenbasis(&es, &site_projector(5, 2));
    let t = 3.0;
    let tr = eigenbasis_propagate(&es, &HsrParams::new(0.0).unwrap(), &rho0, &[0.0, t], &OdeOptions::default()).unwrap();
    for i in 0..5 {
        for j in 0..5 {
            let w = es.eigenvalues[i] - es.eigenvalues[j];
            let expect = rho0[i * 5 + j] * Complex64::from_polar(1.0, -w * t);
            assert!((tr.matrices[1][i * 5 + j] - expect).norm() < 1e-8);
        }
    }
}

#[test]
fn secular_rates_and_conservation() {
    let (_, es) = disordered(12, 5.0, 13);
    let gamma = 0.1;
    let k = kappa_tensor(&es);
    let r = rate_matrix(&k, gamma);
    for i in 0..12 {
        for j in 0..12 {
            if i != j {
                assert_abs_diff_eq!(r[i * 12 + j], gamma * k.k(i, j), epsilon = 1e-16);
            }
        }
    }
    let p0 = eigen_populations_of_site(&es, 6);
    let times = [0.0, 1.0, 10.0, 100.0, 1e5];
    let tr = secular_propagate(&es, &HsrParams::new(gamma).unwrap(), &p0, &times).unwrap();
    for ti in 0..times.len() {
        let p = tr.at(ti);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(p.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    }
    for &x in tr.at(4) {
        assert_abs_diff_eq!(x, 1.0 / 12.0, epsilon = 1e-9);
    }
    let site = site_populations(&es, tr.at(0));
    // coherences are dropped, so the site state is smeared over the eigenstates
    assert_abs_diff_eq!(site.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    assert_abs_diff_eq!(site[6], (0..12).map(|i| es.u(i, 6).powi(4)).sum::<f64>(), epsilon = 1e-12);
    assert!(secular_propagate(&es, &HsrParams::new(gamma).unwrap(), &[-0.1; 12], &times).is_err());
}

#[test]
fn secular_with_identity_kappa_is_frozen() {
    let id = Eigensystem::from_parts(vec![0.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let tr = secular_propagate(&id, &HsrParams::new(1.0).unwrap(), &[0.4, 0.6], &[0.0, 50.0]).unwrap();
    assert_abs_diff_eq!(tr.at(1)[0], 0.4, epsilon = 1e-15);
}

#[test]
fn secular_moments_match_populations() {
    let (_, es) = disordered(9, 4.0, 14);
    let params = HsrParams::new(0.2).unwrap();
    let p0 = eigen_populations_of_site(&es, 4);
    let times = [0.0, 3.0, 30.0];
    let m = secular_moments(&es, &params, &p0, 4, &times).unwrap();
    let tr = secular_propagate(&es, &params, &p0, &times).unwrap();
    for ti in 0..3 {
        let site = site_populations(&es, tr.at(ti));
        let m2: f64 = site.iter().enumerate().map(|(i, p)| (i as f64 - 4.0).powi(2) * p).sum();
        assert_abs_diff_eq!(m.m2[ti], m2, epsilon = 1e-12);
    }
    let h = 1e-5;
    let fd = secular_moments(&es, &params, &p0, 4, &[3.0 - h, 3.0 + h]).unwrap();
    assert_abs_diff_eq!((fd.m2[1] - fd.m2[0]) / (2.0 * h), m.dm2[1], epsilon = 1e-6);
}
