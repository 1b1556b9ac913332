use std::path::Path;
use std::process::{Command, Output};

fn filterlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_filterlab"))
        .args(args)
        .env("FILTERLAB_OUT", out)
        .output()
        .expect("binary runs")
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL_STABILITY: &str = r#"
kind = "stability"
name = "small"
horizon = 1.0
dt = 0.01
cadence = 10
seeds = [3, 4]

[model]
type = "linear_gaussian"
a = [[1.0]]
b = [[1.0]]
c = [[1.0]]
d = [[1.0]]

[prior_mu]
type = "gaussian"
mean = [0.0]
cov = [[1.0]]

[prior_nu]
type = "gaussian"
mean = [2.0]
cov = [[3.0]]
"#;

#[test]
fn stability_writes_traces_plot_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL_STABILITY);
    let o = filterlab(&["stability", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("small");
    for f in ["trace_seed3.csv", "trace_seed4.csv", "plot.svg", "summary.txt", "checks.csv"] {
        assert!(dir.join(f).exists(), "{f} missing");
    }
    let trace = std::fs::read_to_string(dir.join("trace_seed3.csv")).unwrap();
    assert!(trace.starts_with("t,bl,bl_upper,bl_lower,tv,mean_gap,gap_0,aux,path_hash\n"));
    assert_eq!(trace.lines().count(), 1 + 11);
    assert!(std::fs::read_to_string(dir.join("plot.svg")).unwrap().contains("<polyline"));
}

#[test]
fn outputs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "s.toml", SMALL_STABILITY);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(filterlab(&["stability", "--config", &cfg, "--out", a.to_str().unwrap()], tmp.path()).status.code(), Some(0));
    assert_eq!(filterlab(&["stability", "--config", &cfg, "--out", b.to_str().unwrap()], tmp.path()).status.code(), Some(0));
    for f in ["trace_seed3.csv", "trace_seed4.csv", "plot.svg", "summary.txt"] {
        let read = |d: &Path| std::fs::read_to_string(d.join("small").join(f)).unwrap();
        assert_eq!(read(&a), read(&b), "{f}");
    }
}

#[test]
fn unknown_key_is_a_config_error_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "bad.toml", "kind = \"convolution\"\n\nwibble = 1\n");
    let o = filterlab(&["convolution", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("wibble") && err.contains("line 3"), "{err}");
}

#[test]
fn kind_mismatch_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("convolution.toml");
    let o = filterlab(&["stability", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_threshold_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "kind = \"convolution\"\nname = \"strict\"\n[convolution]\nn_values = [1, 2]\nnoise_var = 1.0\n[thresholds]\ntv_tolerance = 0.0\n";
    let cfg = write(tmp.path(), "c.toml", text);
    let o = filterlab(&["convolution", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL tv_convolved_closed_form"));
    let summary = std::fs::read_to_string(tmp.path().join("strict").join("summary.txt")).unwrap();
    assert!(summary.lines().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
}

#[test]
fn impossible_threshold_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = SMALL_STABILITY.to_owned() + "\n[thresholds]\nmax_final_bl = 0.0\n";
    let cfg = write(tmp.path(), "s.toml", &text);
    let o = filterlab(&["stability", "--config", &cfg], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL final_bl"));
}

#[test]
fn observability_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = filterlab(&["observability", "--A", "0,0;0,0", "--C", "1,0"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8_lossy(&o.stdout);
    assert!(s.contains("rank: 1") && s.contains("observable: no"), "{s}");
    let o = filterlab(&["observability", "--A", "0,1;-1,0", "--C", "1,0"], tmp.path());
    assert!(String::from_utf8_lossy(&o.stdout).contains("observable: yes"));
    let o = filterlab(&["observability", "--A", "0,x", "--C", "1,0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn shipped_lemma42_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("lemma42_two.toml");
    let o = filterlab(&["lemma42", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("lemma42_two").join("discrepancy.csv").exists());
}

#[test]
fn check_all_subset() {
    let tmp = tempfile::tempdir().unwrap();
    let o = filterlab(&["check-all", "9", "12"], tmp.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let s = String::from_utf8_lossy(&o.stdout);
    assert_eq!(s.lines().filter(|l| l.starts_with("PASS ")).count(), 2);
    assert_eq!(filterlab(&["check-all", "99"], tmp.path()).status.code(), Some(2));
}

#[test]
fn simulate_and_filter_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = configs().join("simulate_diffusion.toml");
    assert_eq!(filterlab(&["simulate", "--config", sim.to_str().unwrap()], tmp.path()).status.code(), Some(0));
    assert!(tmp.path().join("simulate_diffusion").join("path_seed1.csv").exists());
    let fil = configs().join("filter_linear.toml");
    assert_eq!(filterlab(&["filter", "--config", fil.to_str().unwrap()], tmp.path()).status.code(), Some(0));
    let files: Vec<_> = std::fs::read_dir(tmp.path().join("filter_linear")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(files.iter().any(|f| f.to_string_lossy().starts_with("kalman_seed0")), "{files:?}");
}
