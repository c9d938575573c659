use std::fs;
use std::path::Path;
use std::process::Command;

const TINY: &str = "\
[curve]
preset = synthetic-cusp
t1 = 0.1
sigma_t = 0.01
amplitude = 0.5

[potential]
a = 0.05
eps_a = -0.0506606
R = 1
w = 2

";

const STRAIGHT: &str = "\
[curve]
preset = straight

[potential]
a = 0.1
eps_a = -0.0506606
R = 10
w = 2
";

fn run(dir: &Path, config: &str, args: &[&str]) -> i32 {
    let cfg = dir.join("scenario.ini");
    fs::write(&cfg, config).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_cusp-transfer"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    status.status.code().unwrap()
}


#[test]
fn exit_codes_follow_the_failure_class() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, STRAIGHT, &["bound-state"]), 0);
    assert!(d.join("out/manifest.txt").exists());
    assert_eq!(run(d, "[potential]\neps_a = 0.3\n", &["bound-state"]), 2);
    assert_eq!(run(d, "[potential\n", &["bound-state"]), 2);
    assert_eq!(run(d, STRAIGHT, &["no-such-command"]), 2);

    let one_panel = format!("{TINY}\n[quad]\nmax_panels = 1\n");
    assert_eq!(run(d, &one_panel, &["field"]), 3);
    let manifest = fs::read_to_string(d.join("out/manifest.txt")).unwrap();
    assert!(manifest.contains("status = failed (exit 3)"), "{manifest}");

    let small_budget = format!("{TINY}\n[quad]\nmax_field_nodes = 10\n");
    assert_eq!(run(d, &small_budget, &["field"]), 4);

    // Every sample sits below ten times the absolute tolerance.
    let coarse = format!("{STRAIGHT}\n[quad]\nabs_tol = 10\n");
    assert_eq!(run(d, &coarse, &["tail-fit"]), 5);
}

#[test]
fn missing_config_is_a_usage_error() {
    let status = Command::new(env!("CARGO_BIN_EXE_cusp-transfer"))
        .arg("bound-state")
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
}

#[test]
fn manifest_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), STRAIGHT, &["domain-q"]), 0);
    let m = fs::read_to_string(dir.path().join("out/manifest.txt")).unwrap();
    for key in ["quad.rel_tol = 1e-8", "spectrum.sigma3 = 1e0", "experiment.domain_q_max = 1e12", "subcommand = domain-q"] {
        assert!(m.contains(key), "{key} missing from\n{m}");
    }
    let q = fs::read_to_string(dir.path().join("out/domain_q.csv")).unwrap();
    assert!(q.contains("1e12,true,false"), "{q}");
}
