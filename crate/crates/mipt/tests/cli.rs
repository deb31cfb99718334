//! End-to-end smoke tests of the `mipt` binary: exit codes, config
//! plumbing, and the simulate -> analyze -> collapse pipeline on tiny runs.

use std::path::Path;
use std::process::Command;

fn mipt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mipt"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn print_config_shows_all_defaults() {
    let out = mipt()
        .args(["simulate", "--print-config"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for key in [
        "d =", "l =", "j =", "gamma =", "rho =", "time =", "initial =", "trajectories =",
        "seed =", "workers =", "correlators =", "covariance =", "entropy-profile =", "out =",
    ] {
        assert!(text.contains(key), "missing `{key}` in printed config");
    }
}

#[test]
fn usage_errors_exit_with_one() {
    let out = mipt().args(["analyze", "--mode", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = mipt()
        .args(["simulate", "--config", "/nonexistent/file.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3)); // I/O failure
    let out = mipt().args(["no-such-subcommand"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gamma_zero_smoke_run_full_band() {
    // a fully filled band is an exact product state: no measurements, no
    // fluctuations, C identically zero
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d = 2\nl = 4\ngamma = 0\nrho = 1.0\ntime = 2.0\ntrajectories = 2\nseed = 5\ncovariance = true\n",
    );
    let out_dir = dir.path().join("run");
    let out = mipt()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(out_dir.join("correlator_x.csv")).unwrap();
    let (_, _, rows) = mipt::run::read_table(&text).unwrap();
    for row in rows {
        let c: f64 = row[2].parse().unwrap();
        assert!(c.abs() < 1e-12, "correlator {c} should vanish");
    }
    // trajectory scatter also vanishes (every trajectory is identical)
    let text = std::fs::read_to_string(out_dir.join("covariance.csv")).unwrap();
    let (_, _, rows) = mipt::run::read_table(&text).unwrap();
    let err: f64 = rows[0][3].parse().unwrap();
    assert_eq!(err, 0.0);
}

#[test]
fn simulate_analyze_collapse_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("sweepout");
    let cfg = write_config(
        dir.path(),
        "d = 2\nl = 4\ngamma = 1.0\ntime = 2.5\ntrajectories = 4\nseed = 11\n",
    );
    let out = mipt()
        .args([
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            root.to_str().unwrap(),
            "--sizes",
            "4,8,12",
            "--gammas",
            "0.8,1.2,1.6,2.0",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let dataset = root.join("dataset.csv");
    assert!(dataset.exists());

    // analyze covariance passes the dataset through
    let fig2 = dir.path().join("fig2.csv");
    let out = mipt()
        .args([
            "analyze",
            "--mode",
            "covariance",
            "--input",
            root.to_str().unwrap(),
            "--out",
            fig2.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let (_, header, rows) =
        mipt::run::read_table(&std::fs::read_to_string(&fig2).unwrap()).unwrap();
    assert_eq!(header, ["l", "gamma", "g_ab", "err"]);
    assert_eq!(rows.len(), 12);

    // analyze momentum on one cell
    let fig1 = dir.path().join("fig1.csv");
    let out = mipt()
        .args([
            "analyze",
            "--mode",
            "momentum",
            "--input",
            root.join("L8_g1.2").to_str().unwrap(),
            "--out",
            fig1.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&fig1).unwrap();
    let (_, header, rows) = mipt::run::read_table(&text).unwrap();
    assert_eq!(
        header,
        ["gamma", "q_tilde", "q_tilde_l0", "c_q", "err", "ratio", "ratio_err"]
    );
    // q_tilde column really is 2 sin(q/2) on the L = 8 grid
    let expect: Vec<f64> = (1..=4).map(|m| mipt::observables::q_tilde(m, 8)).collect();
    for (row, qt) in rows.iter().zip(expect) {
        let got: f64 = row[1].parse().unwrap();
        assert!((got - qt).abs() < 1e-12);
    }

    // collapse on the tiny dataset: no crossing claims here, just schema +
    // JSON output (window spans the grid; init inside it)
    let json_path = dir.path().join("collapse.json");
    let out = mipt()
        .args([
            "collapse",
            "--input",
            dataset.to_str().unwrap(),
            "--window",
            "0.8,2.0",
            "--init",
            "1.4,1.0",
            "--out",
            json_path.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: mipt::run::CollapseSummary =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    assert!(summary.n_points > 0);
    assert_eq!(summary.window, (0.8, 2.0));
}

#[test]
fn entropy_profile_ell_tilde_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d = 2\nl = 8\ngamma = 1.5\ntime = 3.0\ntrajectories = 3\nseed = 2\nentropy-profile = true\n",
    );
    let out_dir = dir.path().join("run");
    let out = mipt()
        .args([
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let figs1 = dir.path().join("figs1.csv");
    let out = mipt()
        .args([
            "analyze",
            "--mode",
            "entropy",
            "--input",
            out_dir.to_str().unwrap(),
            "--out",
            figs1.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let (_, header, rows) =
        mipt::run::read_table(&std::fs::read_to_string(&figs1).unwrap()).unwrap();
    assert_eq!(
        header,
        ["gamma", "ell", "ell_tilde", "entropy", "entropy_err", "c2", "c2_err", "ratio", "ratio_err"]
    );
    assert_eq!(rows.len(), 4); // ell = 1..=L/2
    for row in rows {
        let ell: usize = row[1].parse().unwrap();
        let lt: f64 = row[2].parse().unwrap();
        assert!((lt - mipt::observables::ell_tilde(ell, 8)).abs() < 1e-12);
    }
}

#[test]
fn oracle_check_subcommand_passes() {
    let out = mipt()
        .args(["oracle-check", "--d", "1", "--l", "4", "--events", "30", "--seed", "5"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("max born dev"));
}

#[test]
fn theory_subcommand_tables() {
    let out = mipt()
        .args(["theory", "--what", "critical", "--d", "2", "--gamma", "2.9"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("epsilon,g_c,nu,zeta"));
    let out = mipt()
        .args(["theory", "--what", "nonsense"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
