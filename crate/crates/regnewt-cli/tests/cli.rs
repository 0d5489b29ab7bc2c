//! End-to-end tests of the `regnewt` binary: exit codes, emitted files and
//! the debug negative control.

use std::path::Path;
use std::process::{Command, Output};

fn regnewt(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regnewt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

const SMALL_DIAGONAL: &str = r#"
[problem]
kind = "diagonal"
dim = 8
sigma_scale = 0.6
sigma_decay = 1.0
rho = 100.0
x_true = { kind = "uniform", norm = 1.0 }

[filter]
kind = "iterated-tikhonov"
order = 1

[schedule]
kind = "geometric"
alpha0 = 1.0
ratio = 1.5

[run]
tau = 1.5
delta_list = [1e-2, 1e-3]
seeds = [7, 8]
kmax = 200
"#;

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "[problem]\nkind = \"diagonal\"\n");
    let out = regnewt(&["run", &cfg, "--out", "outdir"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("outdir").exists(), "no partial output on parse failure");
}

#[test]
fn trivial_start_stops_at_zero_everywhere() {
    // No [source] section: the run starts at the exact solution, so the very
    // first residual equals delta <= tau*delta.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", SMALL_DIAGONAL);
    let out = regnewt(&["run", &cfg, "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = regnewt_cli::csvio::read_summary_csv(&tmp.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.len(), 4);
    for row in &summary {
        assert!(row.stopped());
        assert_eq!(row.k_delta, Some(0));
    }
    regnewt_cli::csvio::validate_emitted_runs(&tmp.path().join("out")).unwrap();
}

#[test]
fn seed_override_collapses_the_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", SMALL_DIAGONAL);
    let out = regnewt(&["run", &cfg, "--out", "out", "--seed-override", "99"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let summary = regnewt_cli::csvio::read_summary_csv(&tmp.path().join("out/summary.csv")).unwrap();
    assert_eq!(summary.len(), 2);
    assert!(summary.iter().all(|r| r.seed == 99));
}

#[test]
fn non_stopping_run_exits_1() {
    // kmax too small for the tiny noise level: the run reaches kmax instead
    // of stopping, which the run command reports as a failure exit code.
    let cfg_text = SMALL_DIAGONAL
        .replace("x_true = { kind = \"uniform\", norm = 1.0 }", "x_true = { kind = \"zeros\" }")
        .replace("delta_list = [1e-2, 1e-3]", "delta_list = [1e-9]")
        .replace("kmax = 200", "kmax = 3")
        + "\n[source]\nkind = \"holder\"\nnu = 0.5\nomega = { kind = \"uniform\", norm = 1.0 }\n";
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", &cfg_text);
    let out = regnewt(&["run", &cfg, "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("reached-kmax"));
}

#[test]
fn rate_study_emits_deterministic_artifacts() {
    let cfg_text = SMALL_DIAGONAL
        .replace("x_true = { kind = \"uniform\", norm = 1.0 }", "x_true = { kind = \"zeros\" }")
        .replace("delta_list = [1e-2, 1e-3]", "delta_list = [1e-1, 3e-2, 1e-2, 3e-3]")
        + "\n[source]\nkind = \"holder\"\nnu = 1.0\nomega = { kind = \"uniform\", norm = 1.0 }\n";
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", &cfg_text);
    let a = regnewt(&["rate-study", &cfg, "--out", "a"], tmp.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = regnewt(&["rate-study", &cfg, "--out", "b", "--workers", "2"], tmp.path());
    assert_eq!(b.status.code(), Some(0));
    for name in ["rate_points.csv", "rate_fit.csv", "rate.svg", "summary.csv"] {
        let fa = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let fb = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(fa, fb, "{name} differs between runs");
    }
    regnewt_cli::csvio::validate_emitted_runs(&tmp.path().join("a")).unwrap();
}

#[test]
fn rate_study_aborts_identifying_the_failing_cell() {
    let cfg_text = SMALL_DIAGONAL
        .replace("x_true = { kind = \"uniform\", norm = 1.0 }", "x_true = { kind = \"zeros\" }")
        .replace("delta_list = [1e-2, 1e-3]", "delta_list = [1e-1, 3e-2, 1e-2, 1e-9]")
        .replace("kmax = 200", "kmax = 10")
        + "\n[source]\nkind = \"holder\"\nnu = 1.0\nomega = { kind = \"uniform\", norm = 1.0 }\n";
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", &cfg_text);
    let out = regnewt(&["rate-study", &cfg, "--out", "out"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("delta=1e-9"), "missing cell id in: {err}");
}

const VERIFY_MINIMAL: &str = r#"
[problem]
kind = "diagonal"
dim = 8
sigma_scale = 0.6
sigma_decay = 1.0
rho = 10.0
x_true = { kind = "uniform", norm = 1.0 }

[filter]
kind = "landweber"

[schedule]
kind = "reciprocal-int"
n0 = 1
q = 1

[run]
tau = 1.5
delta_list = [1e-2]
seeds = [1]

[verify]
families = [{ kind = "landweber" }]
nus = [0.5, 1.0]
mus = [1.0]
lemma_trials = 50
commutator_pairs = 40
commutator_families = [{ kind = "landweber" }]
nonlinearity_samples = 4
seed = 11
"#;

#[test]
fn verify_passes_on_landweber_suite() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", VERIFY_MINIMAL);
    let out = regnewt(&["verify", &cfg], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("0 failed"), "{stdout}");
}

#[test]
fn verify_empty_check_list_is_vacuous() {
    let cfg_text = VERIFY_MINIMAL
        .replace("families = [{ kind = \"landweber\" }]", "families = []")
        .replace("commutator_families = [{ kind = \"landweber\" }]", "commutator_families = []")
        .replace("nonlinearity_samples = 4", "nonlinearity_samples = 0");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", &cfg_text);
    let out = regnewt(&["verify", &cfg], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}");
    assert!(stdout.contains("0 checks, 0 failed"), "{stdout}");
}

#[test]
fn verify_lardy_zero_based_flag_fails_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "cfg.toml", VERIFY_MINIMAL);
    let out = regnewt(&["verify", &cfg, "--lardy-zero-based"], tmp.path());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(1), "{stdout}");
    assert!(stdout.contains("negative control"), "{stdout}");
    assert!(stdout.contains("FAIL"), "{stdout}");
    assert!(stdout.contains("minimum at (alpha="), "witness missing: {stdout}");
}
