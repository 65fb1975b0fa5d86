use std::path::Path;
use std::process::{Command, Output};

const TWO_REGIME: &str = "
m = 2
Q = [[-1, 1], [1, -1]]
r = [0.05, 0.08]
sigma = [0.2, 0.4]
delta = 0.02
T = 1
x = 100
";

const ONE_REGIME: &str = "
r = 0.05
sigma = 0.3
delta = 0.01
T = 1
x = 100
";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.cfg");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_asian-pricer"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, after: &str) -> f64 {
    let tail = &text[text.find(after).unwrap() + after.len()..];
    tail.split_whitespace().next().unwrap().trim_end_matches(',').parse().unwrap()
}

#[test]
fn single_regime_price_reports_inactive_operator() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), ONE_REGIME, &["price"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("F inactive"));
    // records append, header once
    run(dir.path(), ONE_REGIME, &["price"]);
    let csv = std::fs::read_to_string(dir.path().join("out/price.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("style,regime,"));
}

#[test]
fn two_regime_price_reports_rho_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), TWO_REGIME, &["price"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rho = field(&text, "rho ");
    assert!(rho > 0.0 && rho < 1.0);
    assert!(text.contains("a-posteriori bound"));
}

#[test]
fn malformed_generator_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = TWO_REGIME.replace("[[-1, 1], [1, -1]]", "[[-1, 1], [1, -2]]");
    let o = run(dir.path(), &bad, &["price"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("RowSumNonZero"));
}

#[test]
fn zero_volatility_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &ONE_REGIME.replace("sigma = 0.3", "sigma = 0"), &["oracle"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("NonPositiveVolatility"));
}

#[test]
fn oracle_is_reproducible_and_scales_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(dir.path(), TWO_REGIME, &["oracle", "--paths", "20000", "--seed", "9"]);
    let b = run(dir.path(), TWO_REGIME, &["oracle", "--paths", "20000", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = run(dir.path(), TWO_REGIME, &["oracle", "--paths", "40000", "--seed", "9"]);
    let ratio = field(&stdout(&c), "+- ") / field(&stdout(&a), "+- ");
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.1, "{ratio}");
}

#[test]
fn compare_passes_for_one_regime() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), ONE_REGIME, &["compare", "--paths", "50000"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn coarse_grid_compare_gives_hint_when_it_fails() {
    let dir = tempfile::tempdir().unwrap();
    let coarse = format!("{TWO_REGIME}layout = full\ntime_nodes = 5\nz_nodes = 5\na_nodes = 5\n");
    let o = run(dir.path(), &coarse, &["compare", "--paths", "50000"]);
    let text = stdout(&o);
    match o.status.code() {
        Some(0) => assert!(text.contains("PASS")),
        Some(1) => assert!(text.contains("FAIL") && text.contains("hint")),
        other => panic!("unexpected exit {other:?}: {}", String::from_utf8_lossy(&o.stderr)),
    }
}

#[test]
fn converge_report_lists_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), TWO_REGIME, &["converge-report", "--epsilon", "1e-5"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("a-priori count"));
    let csv = std::fs::read_to_string(dir.path().join("out/converge.csv")).unwrap();
    assert!(csv.lines().count() >= 4);
}

#[test]
fn density_check_accepts_derived_form_only() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), TWO_REGIME, &["density-check", "--paths", "200000"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("accepted form: derived"));
    assert!(text.contains("printed form rejected"));
}
