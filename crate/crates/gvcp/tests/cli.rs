//! End-to-end tests of the `gvcp` binary: flags, exit codes, file formats,
//! and report contents.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const EXAMPLE: &str =
    "4 5\n10 20 30 40\n1 2 50 30 20\n1 3 40 40 30\n1 4 50 20 20\n2 3 30 20 10\n3 4 20 20 20\n";

fn gvcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gvcp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("no signal")
}

fn write_example(dir: &TempDir) -> String {
    let path = dir.path().join("example1.gvcp");
    std::fs::write(&path, EXAMPLE).unwrap();
    path.display().to_string()
}

#[test]
fn gen_writes_complete_graph() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("a.gvcp");
    let result = gvcp(&[
        "gen",
        "--n",
        "4",
        "--p",
        "1.0",
        "--cost-max",
        "50",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 0);
    assert_eq!(stdout(&result).trim(), "n=4 m=6");
    let text = std::fs::read_to_string(&out).unwrap();
    let inst = gvcp::instance::parse_instance(&text).unwrap();
    assert_eq!(inst.vertex_count(), 4);
    assert_eq!(inst.edge_count(), 6);
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.gvcp");
    let b = dir.path().join("b.gvcp");
    for out in [&a, &b] {
        let result = gvcp(&[
            "gen",
            "--n",
            "20",
            "--p",
            "0.4",
            "--cost-max",
            "9",
            "--seed",
            "33",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(exit_code(&result), 0);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn gen_rejects_invalid_parameters() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("a.gvcp");
    let result = gvcp(&["gen", "--n", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 2);
    let result = gvcp(&[
        "gen",
        "--n",
        "3",
        "--p",
        "0.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 2);
}

#[test]
fn solve_exact_on_worked_example() {
    let dir = TempDir::new().unwrap();
    let input = write_example(&dir);
    let result = gvcp(&["solve", "--algo", "exact", "--in", &input]);
    assert_eq!(exit_code(&result), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&result)).unwrap();
    assert_eq!(report["algorithm"], "exact");
    assert_eq!(report["best_cost"], 150.0);
    assert_eq!(report["best_vertices"], serde_json::json!([1]));
    assert_eq!(report["best_bitstring"], "1000");
    assert_eq!(report["generations_run"], 0);
    assert_eq!(
        report["instance_sha256"],
        gvcp::report::sha256_hex(EXAMPLE.as_bytes())
    );
}

#[test]
fn solve_exact_enforces_cap_with_exit_3() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("big.gvcp");
    let inst = gvcp::instance::generate_instance(30, 0.1, 10, 1).unwrap();
    std::fs::write(&path, gvcp::instance::write_instance(&inst)).unwrap();
    let result = gvcp(&["solve", "--algo", "exact", "--in", path.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 3);
    assert!(String::from_utf8_lossy(&result.stderr).contains("capped"));
}

#[test]
fn solve_ga_reaches_optimum_and_writes_report() {
    let dir = TempDir::new().unwrap();
    let input = write_example(&dir);
    let report_path = dir.path().join("run.json");
    let result = gvcp(&[
        "solve",
        "--algo",
        "ga",
        "--in",
        &input,
        "--seed",
        "1",
        "--gens",
        "20",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&result), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&result)).unwrap();
    assert_eq!(report["algorithm"], "ga");
    assert_eq!(report["best_cost"], 150.0);
    assert_eq!(report["best_vertices"], serde_json::json!([1]));
    assert_eq!(report["master_seed"], 1);
    assert_eq!(report["ga_config"]["population_size"], 150);
    assert_eq!(report["history"].as_array().unwrap().len(), 20);

    let saved: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(saved, report);
}

#[test]
fn solve_ga_is_reproducible_across_invocations() {
    let dir = TempDir::new().unwrap();
    let input = write_example(&dir);
    let run = || {
        stdout(&gvcp(&[
            "solve", "--algo", "ga", "--in", &input, "--seed", "7", "--gens", "10",
        ]))
    };
    let a: serde_json::Value = serde_json::from_str(&run()).unwrap();
    let b: serde_json::Value = serde_json::from_str(&run()).unwrap();
    // wall times differ between runs; everything else must match
    for field in [
        "best_cost",
        "best_bitstring",
        "generations_run",
        "instance_sha256",
    ] {
        assert_eq!(a[field], b[field], "field {field}");
    }
    let rows = |v: &serde_json::Value| -> Vec<(i64, f64, f64, i64)> {
        v["history"]
            .as_array()
            .unwrap()
            .iter()
            .map(|r| {
                (
                    r["generation"].as_i64().unwrap(),
                    r["best_cost"].as_f64().unwrap(),
                    r["mean_cost"].as_f64().unwrap(),
                    r["frozen_count"].as_i64().unwrap(),
                )
            })
            .collect()
    };
    assert_eq!(rows(&a), rows(&b));
}

#[test]
fn solve_csv_format_exports_history() {
    let dir = TempDir::new().unwrap();
    let input = write_example(&dir);
    let result = gvcp(&[
        "solve", "--algo", "ga", "--in", &input, "--gens", "3", "--format", "csv",
    ]);
    assert_eq!(exit_code(&result), 0);
    let text = stdout(&result);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "generation,best_cost,mean_cost,frozen_count,elapsed_ms"
    );
    assert_eq!(lines.count(), 3);
}

#[test]
fn solve_rejects_bad_input() {
    let result = gvcp(&["solve", "--algo", "exact", "--in", "/nonexistent.gvcp"]);
    assert_eq!(exit_code(&result), 2);

    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.gvcp");
    std::fs::write(&path, "2 1\n1 2\n1 2 30 50 20\n").unwrap();
    let result = gvcp(&["solve", "--algo", "exact", "--in", path.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 2);
    assert!(String::from_utf8_lossy(&result.stderr).contains("line 3"));

    // clap usage errors also exit 2
    let result = gvcp(&["solve", "--algo", "simplex", "--in", path.to_str().unwrap()]);
    assert_eq!(exit_code(&result), 2);
}

#[test]
fn verify_small_run_passes_and_reports_gaps() {
    let result = gvcp(&[
        "verify", "--count", "6", "--n-min", "5", "--n-max", "8", "--seed", "7", "--gens", "120",
        "--stall", "40",
    ]);
    assert_eq!(
        exit_code(&result),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let text = stdout(&result);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "idx\tn\tm\tp\toptimum\tga_best\tgap");
    let mut rows = 0;
    for line in lines {
        if line.starts_with("hit_rate=") {
            assert!(line.contains("min_hit_rate=0.95"));
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 7);
        let gap: f64 = fields[6].parse().unwrap();
        assert!(gap >= 0.0, "negative gap in {line}");
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn verify_rejects_bad_flags() {
    assert_eq!(exit_code(&gvcp(&["verify", "--count", "0"])), 2);
    assert_eq!(
        exit_code(&gvcp(&["verify", "--n-min", "9", "--n-max", "6"])),
        2
    );
    assert_eq!(exit_code(&gvcp(&["verify", "--n-max", "40"])), 2);
}

#[test]
fn bench_times_workers_and_verifies_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let trace = dir.path().join("trace.tsv");
    let result = gvcp(&[
        "bench",
        "--n",
        "40",
        "--p",
        "0.2",
        "--workers-list",
        "1,2",
        "--gens",
        "3",
        "--seed",
        "5",
        "--pop",
        "32",
        "--elite",
        "8",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(
        exit_code(&result),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&result.stderr)
    );
    let text = stdout(&result);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "workers\ttotal_ms\tmean_gen_ms\tbest_cost");
    assert_eq!(lines.len(), 3);
    let best: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split('\t').next_back().unwrap())
        .collect();
    assert_eq!(
        best[0], best[1],
        "best cost must not depend on worker count"
    );

    // trace: per generation, per worker count, three phase lines
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    let map_lines = trace_text.lines().filter(|l| l.contains("\tmap\t")).count();
    assert_eq!(map_lines, 2 * 3); // 2 worker counts x 3 generations
}

#[test]
fn bench_needs_an_instance_source() {
    assert_eq!(exit_code(&gvcp(&["bench"])), 2);
    assert_eq!(
        exit_code(&gvcp(&["bench", "--n", "10", "--workers-list", "0"])),
        2
    );
}

#[test]
fn reports_bind_to_instance_content() {
    // same flags, different instance bytes -> different hashes in reports
    let dir = TempDir::new().unwrap();
    let p1 = dir.path().join("one.gvcp");
    let p2 = dir.path().join("two.gvcp");
    std::fs::write(&p1, EXAMPLE).unwrap();
    std::fs::write(&p2, "3 0\n1 2 3\n").unwrap();
    let solve = |p: &Path| -> serde_json::Value {
        serde_json::from_str(&stdout(&gvcp(&[
            "solve",
            "--algo",
            "exact",
            "--in",
            p.to_str().unwrap(),
        ])))
        .unwrap()
    };
    assert_ne!(solve(&p1)["instance_sha256"], solve(&p2)["instance_sha256"]);
}
