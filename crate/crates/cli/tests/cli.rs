// End-to-end runs of the installed binary: exit codes, provenance headers,
// reproducibility, and the error paths users actually hit.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ecokin"))
}

const BASE_CONFIG: &str = r#"
[model]
mortality = 1.0
fertility = 2.0
mechanism = "establishment"
dispersal = "independent"

[model.dispersal_kernel]
family = "top-hat"
height = 1.0
radius = 0.5

[model.suppression_kernel]
family = "top-hat"
height = 0.3
radius = 0.5

[domain]
dim = 1
length = 20.0
grid_cells = 64

[ibm]
replicas = 2
t_end = 0.5
sample_interval = 0.25
snapshot_times = [0.5]
initial = { kind = "poisson", density = 1.0 }
seed = 42

[kinetics]
dt = 0.01
t_end = 0.2
record_every = 10
"#;

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("run.toml");
    // A test that supplies its own initial condition replaces the default one.
    let initial = if extra.contains("[kinetics.initial]") {
        ""
    } else {
        "\n[kinetics.initial]\nkind = \"constant\"\ndensity = 1.0\n"
    };
    std::fs::write(&path, format!("{BASE_CONFIG}{initial}\n{extra}")).expect("write config");
    path
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

#[test]
fn fixed_seed_simulations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let run = || {
        bin()
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .expect("run simulate")
    };
    let first = run();
    assert!(first.status.success(), "stderr: {}", stderr_of(&first));
    let trajectory_a = std::fs::read(out.join("trajectory_0.csv")).unwrap();
    let snapshots_a = std::fs::read(out.join("snapshots_0.csv")).unwrap();
    let second = run();
    assert!(second.status.success(), "stderr: {}", stderr_of(&second));
    let trajectory_b = std::fs::read(out.join("trajectory_0.csv")).unwrap();
    let snapshots_b = std::fs::read(out.join("snapshots_0.csv")).unwrap();
    assert_eq!(trajectory_a, trajectory_b, "trajectory files must match byte for byte");
    assert_eq!(snapshots_a, snapshots_b, "snapshot files must match byte for byte");
}

#[test]
fn outputs_open_with_a_provenance_header() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let text = std::fs::read_to_string(out.join("trajectory_0.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# ecokin "), "first line: {}", lines[0]);
    assert!(lines[1].starts_with("# command: "), "second line: {}", lines[1]);
    assert!(lines[2].starts_with("# config-hash: "), "third line: {}", lines[2]);
    assert!(lines[3].starts_with("# seed: "), "fourth line: {}", lines[3]);
    assert_eq!(lines[4], "t,population,births,deaths,rejections,extinct");
}

#[test]
fn zero_mortality_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let output = bin()
        .args(["check", "--config"])
        .arg(&config)
        .args(["--set", "model.mortality=0.0"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr_of(&output));
    assert!(
        stderr_of(&output).contains("mortality must be strictly positive"),
        "stderr: {}",
        stderr_of(&output)
    );
}

#[test]
fn unknown_config_keys_exit_with_the_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[typo_section]\nvalue = 1\n");
    let output = bin()
        .args(["check", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr_of(&output));
    assert!(
        stderr_of(&output).contains("typo_section"),
        "stderr: {}",
        stderr_of(&output)
    );
}

#[test]
fn missing_config_is_a_usage_error() {
    let output = bin().args(["simulate"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(stderr_of(&output).contains("--config"));
}

#[test]
fn failing_conditions_exit_one_and_passing_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    // Small mortality: every threshold is violated.
    let failing = bin()
        .args(["check", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(failing.status.code(), Some(1), "stderr: {}", stderr_of(&failing));
    let csv = std::fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(csv.contains("verdict,violated"), "csv was: {csv}");

    // Large mortality clears every threshold.
    let passing = bin()
        .args(["check", "--config"])
        .arg(&config)
        .args(["--set", "model.mortality=50.0"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(passing.status.code(), Some(0), "stderr: {}", stderr_of(&passing));
    let csv = std::fs::read_to_string(out.join("checks.csv")).unwrap();
    assert!(csv.contains("verdict,satisfied"), "csv was: {csv}");
}

#[test]
fn extinction_sets_the_trajectory_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--set", "model.fertility=0.0"])
        .args(["--set", "model.mortality=30.0"])
        .args(["--set", "ibm.t_end=4.0"])
        .args(["--set", "ibm.replicas=1"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let trajectory = std::fs::read_to_string(out.join("trajectory_0.csv")).unwrap();
    let last = trajectory.lines().last().unwrap();
    assert!(last.ends_with(",1"), "final row should carry the extinct flag: {last}");
    let manifest = std::fs::read_to_string(out.join("manifest.csv")).unwrap();
    assert!(manifest.lines().last().unwrap().ends_with(",1"));
}

#[test]
fn solve_separates_the_two_mechanisms_on_a_two_bump_field() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[kinetics.initial]
kind = "two-bump"
baseline = 0.2
amplitude = 2.0
width = 0.8
centers = [[5.0], [13.0]]
"#,
    );
    let out = dir.path().join("out");
    let output = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--set", "kinetics.compare_mechanisms=true"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success(), "stderr: {}", stderr_of(&output));
    let summary = std::fs::read_to_string(out.join("solve_summary.csv")).unwrap();
    let gap: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("final_mechanism_gap,"))
        .expect("summary must report the mechanism gap")
        .parse()
        .unwrap();
    assert!(gap > 1e-4, "mechanisms should differ on a two-bump field, gap {gap}");
    assert!(out.join("mechanism_gap.csv").exists());
}

#[test]
fn partial_initial_overrides_fail_loudly() {
    // --set merges into the raw document and cannot delete keys, so turning
    // a constant initial condition into a bump leaves `density` behind; that
    // must be rejected as a config error, not silently half-applied.
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let output = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--set", "kinetics.initial.kind=gaussian-bump"])
        .args(["--set", "kinetics.initial.width=1.0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr_of(&output));
}

#[test]
fn picard_divergence_is_a_domain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = dir.path().join("out");
    let output = bin()
        .args(["solve", "--config"])
        .arg(&config)
        .args(["--set", "kinetics.picard=true"])
        .args(["--set", "kinetics.picard_max_iterations=1"])
        .args(["--set", "kinetics.picard_tolerance=1e-14"])
        .args(["--set", "model.fertility=9.0"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1), "stderr: {}", stderr_of(&output));
    assert!(
        stderr_of(&output).contains("did not converge"),
        "stderr: {}",
        stderr_of(&output)
    );
    assert!(out.join("picard.csv").exists(), "diagnostics must still be written");
}

#[test]
fn verify_passes_normally_and_fails_when_corrupted() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[verify]
expansion_instances = 4
transform_instances = 4
mc_samples = 1500
"#,
    );
    let out = dir.path().join("out");
    let clean = bin()
        .args(["verify", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(clean.status.code(), Some(0), "stderr: {}", stderr_of(&clean));
    let csv = std::fs::read_to_string(out.join("verify.csv")).unwrap();
    assert!(csv.contains("expansion-establishment"), "csv was: {csv}");

    let corrupted = bin()
        .args(["verify", "--config"])
        .arg(&config)
        .args(["--set", "verify.corrupt_expansion=0.001"])
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(corrupted.status.code(), Some(1), "corruption must fail the suite");
    assert!(
        stderr_of(&corrupted).contains("identity families failed"),
        "stderr: {}",
        stderr_of(&corrupted)
    );
}

#[test]
fn limit_study_emits_the_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[limit]
epsilons = [1.0, 0.5]
replicas = 6
times = [0.3]
initial_density = 1.0
bins = 8
grid_cells = 32
dt = 0.02
seed = 7
bootstrap = 40
"#,
    );
    let out = dir.path().join("out");
    let output = bin()
        .args(["limit-study", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    // Monotonicity may fail at this tiny replica count; the table must
    // exist and be well formed either way.
    assert!(
        matches!(output.status.code(), Some(0) | Some(1)),
        "stderr: {}",
        stderr_of(&output)
    );
    let csv = std::fs::read_to_string(out.join("limit.csv")).unwrap();
    let mut lines = csv.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next(), Some("eps,t,L2_error,stderr"));
    assert_eq!(lines.count(), 2, "one row per scaling strength");
}
