use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn vstencil(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vstencil")).args(args).output().expect("spawn vstencil")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TIMING: [&str; 3] = ["seconds", "layout_seconds", "gflops"];

/// Reads a CSV and drops the timing columns.
fn stable_rows(path: &Path) -> Vec<Vec<String>> {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_owned).collect();
    let keep: Vec<usize> = (0..header.len()).filter(|&i| !TIMING.contains(&header[i].as_str())).collect();
    let mut out = vec![keep.iter().map(|&i| header[i].clone()).collect()];
    for rec in rd.records() {
        let rec = rec.unwrap();
        out.push(keep.iter().map(|&i| rec[i].to_owned()).collect());
    }
    out
}

#[test]
fn plan_prints_the_network_and_schedule() {
    let o = vstencil(&["plan", "--vl", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("8 ops in 2 stages"), "{s}");
    assert!(s.contains("issue cycles 8, makespan 9, stall-free yes"), "{s}");

    let s = stdout(&vstencil(&["plan", "--vl", "8"]));
    assert!(s.contains("24 ops in 3 stages"), "{s}");

    let s = stdout(&vstencil(&["plan", "--stencil", "1d3p", "--size", "4096", "--steps", "32", "--block", "256", "--tile-height", "16", "--jam-k", "2"]));
    assert!(s.to_lowercase().contains("tile"), "{s}");
}

#[test]
fn verify_passes_for_each_method() {
    for m in ["scalar", "multiload", "reorg", "dlt", "transpose"] {
        let o = vstencil(&["verify", "--stencil", "2d9p", "--size", "64", "--steps", "3", "--method", m]);
        assert!(o.status.success(), "{m}: {}{}", stdout(&o), stderr(&o));
        assert!(stdout(&o).contains("PASS"), "{m}");
    }
    let o = vstencil(&["verify", "--stencil", "1d5p", "--size", "5120", "--steps", "6", "--jam-k", "2", "--block", "512", "--tile-height", "32"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn invalid_combinations_are_usage_errors() {
    let cases: &[&[&str]] = &[
        &["run", "--method", "dlt", "--jam-k", "2"],
        &["run", "--method", "multiload", "--jam-k", "2"],
        &["run", "--stencil", "2d5p", "--jam-k", "2"],
        &["run", "--vl", "3"],
        &["run", "--stencil", "9d9p"],
        &["run", "--size", "1024", "--block", "16", "--tile-height", "16"],
        &["run", "--no-such-flag"],
    ];
    for args in cases {
        let o = vstencil(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty(), "{args:?}");
    }
    let o = vstencil(&["run", "--size", "1024", "--block", "16", "--tile-height", "16"]);
    assert!(stderr(&o).contains("B >= 2*r*T_b"), "{}", stderr(&o));
}

#[test]
fn run_writes_a_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("out.csv");
    let o = vstencil(&["run", "--stencil", "3d7p", "--size", "24", "--steps", "2", "--csv", p.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), vstencil::harness::CSV_HEADER.join(","));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "3d7p");
    assert_eq!(row[4], "24x24x24");
    assert_eq!(row[12], "", "run does not verify");
    assert!(lines.next().is_none());
}

fn golden_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/verify.csv")
}

/// Everything except timings is deterministic: inputs are seeded, and the
/// counters and errors depend only on the configuration.
#[test]
fn verify_csv_matches_golden() {
    let configs: &[&[&str]] = &[
        &["--stencil", "1d3p", "--size", "1000", "--steps", "4", "--method", "multiload"],
        &["--stencil", "1d3p", "--size", "1000", "--steps", "4", "--method", "reorg", "--vl", "8"],
        &["--stencil", "1d5p", "--size", "1024", "--steps", "4", "--method", "dlt"],
        &["--stencil", "1d5p", "--size", "4000", "--steps", "8", "--jam-k", "2"],
        &["--stencil", "1d3p", "--size", "4096", "--steps", "10", "--jam-k", "2", "--block", "512", "--tile-height", "64"],
        &["--stencil", "2d5p", "--size", "48", "--steps", "3", "--block", "16", "--tile-height", "4"],
        &["--stencil", "3d27p", "--size", "16", "--steps", "2", "--vl", "8"],
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut rows = Vec::new();
    for (i, cfg) in configs.iter().enumerate() {
        let p = dir.path().join(format!("{i}.csv"));
        let mut args = vec!["verify"];
        args.extend_from_slice(cfg);
        args.extend_from_slice(&["--csv", p.to_str().unwrap()]);
        let o = vstencil(&args);
        assert!(o.status.success(), "{cfg:?}: {}", stderr(&o));
        let mut r = stable_rows(&p);
        if rows.is_empty() {
            rows.push(r.remove(0));
        } else {
            r.remove(0);
        }
        rows.extend(r);
    }
    let text: String = rows.iter().map(|r| r.join(",") + "\n").collect();
    let golden = golden_path();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &text).unwrap();
    }
    let want = std::fs::read_to_string(&golden).expect("golden file; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(text, want);
}
