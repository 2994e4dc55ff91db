use std::path::Path;
use std::process::{Command, Output};

use lattice_cli::manifest::RunManifest;
use lattice_cli::table::read_csv;

fn lattice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lattice")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = lattice(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn columns(dir: &Path, file: &str) -> Vec<String> {
    read_csv(&dir.join(file)).unwrap().columns
}

#[test]
fn dimer_curves() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("d");
    run_ok(&["dimer", "--sigma", "20", "--t-max", "20", "--dt", "0.01", "--out", out.to_str().unwrap()]);
    let t = read_csv(&out.join("dimer.csv")).unwrap();
    assert_eq!(t.columns, ["t_invJ", "D_exact_a2J", "D_asym_a2J", "D_turnover_a2J"]);
    assert_eq!(t.rows.len(), 2000);
    assert!((t.rows[0][0] - 0.01).abs() < 1e-15);
    // Late-time exact and asymptotic curves agree to a fraction of the oscillation amplitude.
    let last = t.rows.last().unwrap();
    assert!((last[1] - last[2]).abs() < 0.01, "{last:?}");

    let m = RunManifest::load(&out).unwrap();
    assert_eq!(m.command, "dimer");
    assert_eq!(m.config.sigma, 20.0);
    assert!(m.verify(&out).unwrap().is_empty());
}

#[test]
fn repeated_runs_are_byte_identical_and_manifest_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        run_ok(&[
            "diffuse-closed", "--sigma", "20", "--n", "21", "--realizations", "40", "--seed", "7", "--t-max", "2", "--dt", "0.1", "--out",
            dir.to_str().unwrap(),
        ]);
    }
    let bytes = |d: &Path| std::fs::read(d.join("diffusivity.csv")).unwrap();
    assert_eq!(bytes(&a), bytes(&b));
    assert_eq!(columns(&a, "diffusivity.csv"), ["t_invJ", "D_mean_a2J", "D_stderr_a2J", "msd_mean_a2", "msd_stderr_a2"]);

    let m = RunManifest::load(&a).unwrap();
    assert_eq!(RunManifest::from_toml(&m.to_toml().unwrap()).unwrap(), m);
    assert_eq!((m.master_seed, m.config.realizations, m.config.n_sites), (7, 40, 21));
    assert_eq!(m.ensembles[0].used, 40);
    assert_eq!(m.outputs.keys().collect::<Vec<_>>(), ["diffusivity.csv"]);
    assert_eq!(RunManifest::load(&b).unwrap().outputs, m.outputs);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "n_sites = 11\nsigma = 5.0\nrealizations = 10\nseed = 3\n").unwrap();
    let out = tmp.path().join("o");
    run_ok(&["stationary", "--config", cfg.to_str().unwrap(), "--sigma", "2", "--out", out.to_str().unwrap()]);
    let m = RunManifest::load(&out).unwrap();
    assert_eq!((m.config.n_sites, m.config.sigma, m.config.realizations, m.master_seed), (11, 2.0, 10, 3));
    let dist = read_csv(&out.join("distribution.csv")).unwrap();
    assert_eq!(dist.rows.len(), 21);
    let total: f64 = dist.column("P").unwrap().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn config_errors_exit_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "sigma = 1.0\nsigmaa = 2.0\n").unwrap();
    let o = lattice(&["stationary", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2") && stderr(&o).contains("sigmaa"), "{}", stderr(&o));

    std::fs::write(&cfg, "n_sites = 11\n\nrealizations = 0\n").unwrap();
    let o = lattice(&["stationary", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3") && stderr(&o).contains("`realizations`"), "{}", stderr(&o));

    let o = lattice(&["diffuse-open", "--gamma", "-0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("flag --gamma"), "{}", stderr(&o));

    let o = lattice(&["sweep", "--values", "1,2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sweep_parameter"));

    assert_eq!(lattice(&["stationary", "--sigma", "abc"]).status.code(), Some(2));
    assert_eq!(lattice(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(lattice(&["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failure_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("t");
    // The window ends before the first diffusivity peak.
    let o = lattice(&["turnover", "--sigmas", "20", "--t-max", "0.02", "--dt", "0.001", "--realizations", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("no maximum"));
    assert!(!out.exists(), "no partial output on failure");
}

/// Columns each figure recipe reads.
#[test]
fn plotting_contract_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let d = |name: &str| tmp.path().join(name);
    let p = |name: &str| d(name).to_str().unwrap().to_string();
    let small = ["--n", "11", "--realizations", "8"];
    let run = |args: &[&str], extra: &[&str]| {
        let mut v: Vec<&str> = args.to_vec();
        v.extend_from_slice(extra);
        run_ok(&v);
    };

    run(&["stationary", "--sigma", "1", "--out", &p("fig1a")], &small);
    assert_eq!(columns(&d("fig1a"), "distribution.csv"), ["m_a", "P", "P_stderr"]);
    assert_eq!(columns(&d("fig1a"), "width.csv"), ["sigma_J", "W_a", "W_stderr_a"]);

    run(&["sweep", "--param", "sigma", "--values", "0.5,5", "--out", &p("fig1b")], &small);
    let sw = read_csv(&d("fig1b").join("sweep.csv")).unwrap();
    assert_eq!(sw.columns, ["sigma_J", "W_a", "W_stderr_a"]);
    assert_eq!(sw.column("sigma_J").unwrap(), [0.5, 5.0]);

    run(&["eigens", "--sigma", "20", "--out", &p("fig2")], &small);
    assert_eq!(columns(&d("fig2"), "widths.csv"), ["w_a", "density_inv_a", "density_stderr_inv_a", "fraction", "count"]);
    let w = read_csv(&d("fig2").join("widths.csv")).unwrap();
    assert_eq!(w.rows.len(), 300);
    assert_eq!(w.column("count").unwrap().iter().sum::<f64>(), 88.0);
    assert_eq!(columns(&d("fig2"), "summary.csv"), ["sigma_J", "mean_width_a", "mean_width_stderr_a", "overflow_fraction"]);

    run(&["diffuse-closed", "--t-max", "1", "--dt", "0.1", "--out", &p("fig3")], &small);
    assert_eq!(columns(&d("fig3"), "diffusivity.csv")[..3], ["t_invJ", "D_mean_a2J", "D_stderr_a2J"]);

    run(&["turnover", "--sigmas", "15,30", "--out", &p("fig4")], &small);
    let tt = read_csv(&d("fig4").join("turnover.csv")).unwrap();
    assert_eq!(
        tt.columns,
        ["sigma_J", "tp_chain_invJ", "D_tp_chain_a2J", "D_tp_chain_stderr_a2J", "tp_dimer_invJ", "D_tp_dimer_a2J", "tp_formula_invJ", "D_tp_formula_a2J"]
    );
    assert_eq!(tt.rows.len(), 2);
    assert_eq!(columns(&d("fig4"), "curves.csv"), ["sigma_J", "t_invJ", "D_mean_a2J", "D_stderr_a2J", "D_dimer_a2J"]);

    run(&["diffuse-open", "--gamma", "0.2", "--t-max", "1", "--dt", "0.1", "--out", &p("fig5")], &small);
    assert_eq!(columns(&d("fig5"), "diffusivity.csv")[..3], ["t_invJ", "D_mean_a2J", "D_stderr_a2J"]);
    run(&["diffuse-open", "--experiment", "secular", "--gamma", "0.2", "--t-max", "1", "--dt", "0.1", "--out", &p("fig5s")], &small);
    run(&["sweep", "--param", "gamma", "--values", "0,0.5", "--experiment", "diffuse-open", "--t-max", "1", "--dt", "0.5", "--out", &p("g")], &small);
    let g = read_csv(&d("g").join("sweep.csv")).unwrap();
    assert_eq!(g.columns, ["gamma_J", "t_invJ", "D_mean_a2J", "D_stderr_a2J"]);
    assert_eq!(g.rows.len(), 6);
}
