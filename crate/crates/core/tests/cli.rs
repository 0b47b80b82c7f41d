use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gdntt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gdntt"))
        .args(args)
        .output()
        .expect("run gdntt")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn ntt_intt_polymul_examples() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "1 2 3 4");
    let o = gdntt(&["ntt", "--n", "4", "--q", "17", "--input", &a]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "10 7 15 6\n");

    let f = write(dir.path(), "f.txt", "10 7 15 6\n");
    let o = gdntt(&["intt", "--n", "4", "--q", "17", "--input", &f]);
    assert_eq!(stdout(&o), "1 2 3 4\n");

    let ones = write(dir.path(), "ones.txt", "1 1 1 1");
    let out = dir.path().join("p.txt");
    let o = gdntt(&[
        "polymul", "--n", "4", "--q", "17", "--input", &ones, "--input-b", &ones, "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "4 4 4 4\n");
}

#[test]
fn simulate_reports_table_latency() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("s.json");
    let o = gdntt(&[
        "simulate", "--n", "256", "--q", "12289", "--bitwidth", "14", "--freq-mhz", "176",
        "--stats", stats.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    let lat = v["latency_us"].as_f64().unwrap();
    assert!((lat - 14.9).abs() / 14.9 < 0.05, "{lat}");
    assert!(v["energy_nj"].is_null());
    assert_eq!(v["stage3_cycles"].as_array().unwrap().len(), 8);
}

#[test]
fn simulate_stats_golden() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "1 2 3 4");
    let out = dir.path().join("o.txt");
    let o = gdntt(&[
        "simulate", "--n", "4", "--q", "17", "--bitwidth", "5", "--freq-mhz", "100", "--input",
        &a, "--output", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "10 7 15 6\n");
    assert_eq!(
        stdout(&o),
        concat!(
            r#"{"operation":"ntt","n":4,"q":17,"bitwidth":5,"layers":2,"#,
            r#""stage1_cycles":[83,83],"stage2_cycles":[94,94],"stage3_cycles":[37,37],"#,
            r#""io_cycles":2,"pointwise_cycles":0,"total_cycles":430,"modmul_charges":[16,16,16,16],"#,
            r#""phase_counts":{"select":364,"read":41,"compute":108,"write_back":51},"#,
            r#""freq_mhz":100.0,"latency_us":4.3,"throughput_kntts":232.55813953488374,"energy_nj":null}"#,
            "\n"
        )
    );
}

#[test]
fn trace_lines_have_fixed_field_order() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.jsonl");
    let o = gdntt(&[
        "simulate", "--n", "4", "--q", "17", "--bitwidth", "5", "--freq-mhz", "100", "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&trace).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        r#"{"cycle":0,"phase":"select","unit":"A0.wl","op":"mode_column_port","address":{"array":"A0","row":null,"col":0},"data":null}"#
    );
    let events = gdntt::scheduler::read_trace(&text).unwrap();
    let s = gdntt::scheduler::validate_trace(&events).unwrap();
    assert_eq!(s.cycles, 430);
}

#[test]
fn sweep_emits_three_increasing_records() {
    let o = gdntt(&["sweep", "--n", "256,512,1024"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let totals: Vec<u64> = text
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["total_cycles"].as_u64().unwrap())
        .collect();
    assert_eq!(totals.len(), 3);
    assert!(totals[0] < totals[1] && totals[1] < totals[2], "{totals:?}");
}

#[test]
fn verify_is_repeatable() {
    let args = ["verify", "--n", "16", "--q", "12289", "--seed", "1"];
    let a = gdntt(&args);
    let b = gdntt(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).ends_with("verify: PASS\n"));
}

#[test]
fn errors_exit_nonzero_without_stats() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("s.json");
    let s = stats.to_str().unwrap();
    let short = write(dir.path(), "short.txt", "1 2 3");
    let big = write(dir.path(), "big.txt", "99999 0 0 0");
    let junk = write(dir.path(), "junk.txt", "1 two 3 4");
    let bad_calib = write(dir.path(), "c.json", r#"{"io_width_bits": 0}"#);
    let missing = dir.path().join("nope.txt").display().to_string();
    let cases: Vec<Vec<&str>> = vec![
        vec!["simulate", "--n", "100", "--stats", s],
        vec!["simulate", "--n", "16", "--stats", s],
        vec!["simulate", "--n", "256", "--freq-mhz", "0", "--stats", s],
        vec!["simulate", "--n", "4", "--q", "17", "--freq-mhz", "1", "--input", &short, "--stats", s],
        vec!["simulate", "--n", "4", "--freq-mhz", "1", "--input", &big, "--stats", s],
        vec!["simulate", "--n", "4", "--freq-mhz", "1", "--input", &junk, "--stats", s],
        vec!["simulate", "--n", "4", "--freq-mhz", "1", "--input", &missing, "--stats", s],
        vec!["simulate", "--n", "256", "--calib", &bad_calib, "--stats", s],
        vec!["simulate", "--n", "256", "--q", "12288", "--stats", s],
        vec!["ntt", "--n", "4", "--q", "17"],
        vec!["sweep", "--n", "256,300", "--stats", s],
    ];
    for args in cases {
        let o = gdntt(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
        assert!(!stats.exists(), "{args:?} left a stats file");
    }
}

#[test]
fn calibration_file_overrides_costs() {
    let dir = tempfile::tempdir().unwrap();
    let calib = write(
        dir.path(),
        "c.json",
        r#"{"stage1_overhead": 0, "stage2_overhead": 0, "io_width_bits": 14}"#,
    );
    let o = gdntt(&["simulate", "--n", "256", "--calib", &calib]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    // 8 layers of 3L + 2L + 16 + 4L + 17 plus 2n cycles of I/O
    assert_eq!(v["total_cycles"].as_u64().unwrap(), 8 * (42 + 44 + 73) + 512);
}
