use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn zoar() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zoar"));
    c.env_remove("ZOAR_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    zoar().args(args).output().expect("spawn zoar")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SMALL: &str = "\
[objective]
kind = quadratic
dim = 8
[estimator]
kind = zoar
n = 3
[run]
iterations = 40
repeats = 3
seed = 5
";

/// Trace CSV without its `wall_ms` column.
fn strip_wall(path: &Path) -> String {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn run_minimal_config_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "a.cfg", "[objective]\nkind = levy\ndim = 5\n[run]\niterations = 10\nrepeats = 2\n");
    let out = dir.path().join("out");
    let o = run(&["run", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["trace_0.csv", "trace_1.csv", "aggregate.csv", "summary.json"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["completed"], 2);
    assert_eq!(summary["queries_per_iteration"], 10);
    assert!(summary["final_mean_gap"].is_number());
    let trace = fs::read_to_string(out.join("trace_0.csv")).unwrap();
    assert_eq!(trace.lines().count(), 12);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let bad = write_cfg(dir.path(), "bad.cfg", "[objective]\nkind = quadratic\ndim = 3\n[optimizer]\nlr=0.1\n");
    let o = run(&["run", p(&bad), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("`lr`"), "{}", stderr(&o));
    assert!(stderr(&o).contains("line 5"));

    let o = run(&["run", p(&dir.path().join("missing.cfg")), "--out", p(&out)]);
    assert_eq!(code(&o), 2);

    let list = write_cfg(dir.path(), "list.cfg", "[objective]\nkind = quadratic\ndim = [3, 4]\n");
    let o = run(&["run", p(&list), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("only allowed in sweep"));

    let o = zoar().args(["run", p(&list), "--out", p(&out)]).output().unwrap();
    assert_eq!(code(&o), 2);
    let ok = write_cfg(dir.path(), "ok.cfg", SMALL);
    let o = zoar().env("ZOAR_SEED", "abc").args(["run", p(&ok), "--out", p(&out)]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn all_repeats_diverging_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "div.cfg",
        "[objective]\nkind = rosenbrock\ndim = 4\n[estimator]\nkind = vanilla\n[optimizer]\nrule = sgd\neta = 10\n[run]\niterations = 200\nrepeats = 2\ntheta0 = fixed(2)\n",
    );
    let out = dir.path().join("out");
    let o = run(&["run", p(&cfg), "--out", p(&out)]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(out.join("summary.json").exists());
    assert!(!out.join("aggregate.csv").exists());
}

#[test]
fn seed_env_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "s.cfg", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    assert_eq!(code(&run(&["run", p(&cfg), "--out", p(&a)])), 0);
    let o = zoar().env("ZOAR_SEED", "5").args(["run", p(&cfg), "--out", p(&b)]).output().unwrap();
    assert_eq!(code(&o), 0);
    let o = zoar().env("ZOAR_SEED", "6").args(["run", p(&cfg), "--out", p(&c)]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(strip_wall(&a.join("trace_0.csv")), strip_wall(&b.join("trace_0.csv")));
    assert_ne!(strip_wall(&a.join("trace_0.csv")), strip_wall(&c.join("trace_0.csv")));
    let summary = fs::read_to_string(c.join("summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 6"));
}

#[test]
fn run_with_reference_reports_speedup() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "s.cfg", SMALL);
    let a = dir.path().join("a");
    assert_eq!(code(&run(&["run", p(&cfg), "--out", p(&a)])), 0);
    let b = dir.path().join("b");
    let o = run(&["run", p(&cfg), "--out", p(&b), "--reference", p(&a.join("aggregate.csv"))]);
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["speedup"]["iterations"], 1.0);
}

#[test]
fn verify_suite_names_and_report() {
    let o = run(&["verify", "everything"]);
    assert_eq!(code(&o), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.json");
    let start = std::time::Instant::now();
    let o = run(&["verify", "exact", "--seed", "3", "--out", p(&out)]);
    assert!(start.elapsed().as_secs_f64() < 10.0);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["suite"], "exact");
    assert_eq!(doc["passed"], true);
    let checks = doc["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        for field in ["name", "passed", "statistic", "threshold", "trials"] {
            assert!(c.get(field).is_some(), "missing {field}");
        }
    }
}

#[test]
fn sweep_product_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "sw.cfg",
        "[objective]\nkind = quadratic\ndim = 6\n[estimator]\nkind = [vanilla, zoar]\nn = [1, 6]\n[run]\niterations = 30\nrepeats = 2\n",
    );
    let out = dir.path().join("sw");
    let o = run(&["sweep", p(&cfg), "--out", p(&out), "--reference", "estimator.kind=vanilla,estimator.n=1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut reader = csv::Reader::from_path(out.join("speedup.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header[..7],
        ["cell", "name", "estimator", "zoar", "reference", "final_mean_gap", "speedup_x100"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| &r[3] == "true").count(), 2);
    assert_eq!(&rows[0][1], "estimator.kind=vanilla,estimator.n=1");
    assert_eq!(&rows[0][4], "true");
    assert_eq!(&rows[0][8], "1");
    for i in 0..4 {
        assert!(out.join(format!("cell_{i:03}/aggregate.csv")).exists());
    }

    let o = run(&["sweep", p(&cfg), "--out", p(&out), "--reference", "nope"]);
    assert_eq!(code(&o), 2);
    let empty = write_cfg(dir.path(), "e.cfg", "[objective]\nkind = quadratic\ndim = 6\n[estimator]\nn = []\n");
    assert_eq!(code(&run(&["sweep", p(&empty), "--out", p(&out)])), 2);
}

#[test]
fn single_cell_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "s.cfg", SMALL);
    let r = dir.path().join("r");
    let s = dir.path().join("s");
    assert_eq!(code(&run(&["run", p(&cfg), "--out", p(&r)])), 0);
    assert_eq!(code(&run(&["sweep", p(&cfg), "--out", p(&s)])), 0);
    let cell = s.join("cell_000");
    for f in ["trace_0.csv", "trace_1.csv", "trace_2.csv"] {
        assert_eq!(strip_wall(&r.join(f)), strip_wall(&cell.join(f)));
    }
    for f in ["aggregate.csv", "summary.json"] {
        assert_eq!(fs::read(r.join(f)).unwrap(), fs::read(cell.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn plot_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let agg = dir.path().join("ref.csv");
    fs::write(&agg, "iter,mean_gap,std_gap,n\n0,4,0,1\n1,2,0,1\n2,1,0,1\n").unwrap();
    let svg = dir.path().join("p.svg");
    let o = run(&["plot", p(&agg), "--out", p(&svg), "--log-y"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<?xml"));
    assert_eq!(text.matches("<polyline").count(), 1);
    assert!(text.contains(">ref<"));
    // log axis: larger gaps sit higher (smaller y coordinate)
    let pts: Vec<f64> = text
        .split("points=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap()
        .split(' ')
        .map(|xy| xy.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(pts.windows(2).all(|w| w[0] < w[1]));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "iter,mean_gap,std_gap,n\n0,1,0,1\n1,x,0,1\n").unwrap();
    let o = run(&["plot", p(&bad), "--out", p(&svg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
}

#[test]
fn threads_flag() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "s.cfg", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(code(&run(&["--threads", "1", "run", p(&cfg), "--out", p(&a)])), 0);
    assert_eq!(code(&run(&["run", p(&cfg), "--out", p(&b), "--threads", "4"])), 0);
    assert_eq!(fs::read(a.join("aggregate.csv")).unwrap(), fs::read(b.join("aggregate.csv")).unwrap());
    assert_eq!(code(&run(&["--threads", "0", "run", p(&cfg), "--out", p(&a)])), 2);
}
