//! End-to-end checks of the installed binary: exit codes, output formats,
//! and byte-level determinism of the CSV emitters.

use sgp::distributions::Dist;
use sgp::scenario::{save_scenario, Externality, Mode, Scenario};
use std::path::Path;
use std::process::{Command, Output};

fn sgp(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sgp"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn the CLI binary")
}

fn write_scenario(dir: &Path, name: &str, s: &Scenario) -> String {
    let path = dir.join(name);
    save_scenario(s, &path).unwrap();
    path.to_str().unwrap().to_owned()
}

fn full_sim(n: usize) -> Scenario {
    Scenario::new(
        vec![Dist::uniform(0.0, 1.0).unwrap(); n],
        Externality::Full,
        Mode::Simultaneous,
    )
    .unwrap()
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", &full_sim(2));

    let ok = sgp(&["eval", "--scenario", &path, "--scheme", "ear_prices"], &[]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));

    let unknown_scheme = sgp(&["eval", "--scenario", &path, "--scheme", "warp_drive"], &[]);
    assert_eq!(unknown_scheme.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown_scheme.stderr).contains("unknown scheme"));

    let bad_flag = sgp(&["eval", "--scenario", &path, "--warp"], &[]);
    assert_eq!(bad_flag.status.code(), Some(1));

    let bad_pair = sgp(&["eval", "--scenario", &path, "--scheme", "seq_full_prices"], &[]);
    assert_eq!(bad_pair.status.code(), Some(1));

    let low_grid = sgp(
        &["eval", "--scenario", &path, "--scheme", "ear_prices", "--grid", "9"],
        &[],
    );
    assert_eq!(low_grid.status.code(), Some(1));

    let missing_file = sgp(
        &["eval", "--scenario", "/nonexistent/s.json", "--scheme", "ear_prices"],
        &[],
    );
    assert_eq!(missing_file.status.code(), Some(1));

    let help = sgp(&["--help"], &[]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("Schemes"));
}

#[test]
fn csv_output_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", &full_sim(3));
    let args = [
        "simulate",
        "--scenario",
        &path,
        "--scheme",
        "exante_transform",
        "--trials",
        "5000",
        "--seed",
        "123",
        "--format",
        "csv",
    ];
    let a = sgp(&args, &[]);
    let b = sgp(&args, &[]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout, "two identical runs must emit identical bytes");

    // worker count caps change nothing either
    let one = sgp(&args, &[("SGP_THREADS", "1")]);
    let four = sgp(&args, &[("SGP_THREADS", "4")]);
    assert_eq!(one.stdout, four.stdout, "worker cap changed the output");
}

#[test]
fn csv_rows_parse_back_to_the_reported_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", &full_sim(2));
    let out = sgp(
        &[
            "simulate", "--scenario", &path, "--scheme", "halve_anonymous", "--trials", "2000",
            "--seed", "9", "--format", "csv",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        [
            "scenario_id",
            "scheme",
            "mode",
            "revenue_closed",
            "mc_mean",
            "mc_stderr",
            "worst_eq",
            "best_eq",
            "benchmark",
            "ratio"
        ]
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), header.len());
    assert_eq!(row[1], "halve_anonymous");
    let closed: f64 = row[3].parse().unwrap();
    let mean: f64 = row[4].parse().unwrap();
    let stderr: f64 = row[5].parse().unwrap();
    let worst: f64 = row[6].parse().unwrap();
    let best: f64 = row[7].parse().unwrap();
    assert!(worst <= best && best <= 1.0);
    assert!((mean - closed).abs() <= 6.0 * stderr + 1e-12);
    // a second identical run parses to bit-equal values
    let again = sgp(
        &[
            "simulate", "--scenario", &path, "--scheme", "halve_anonymous", "--trials", "2000",
            "--seed", "9", "--format", "csv",
        ],
        &[],
    );
    assert_eq!(text, String::from_utf8(again.stdout).unwrap());
}

#[test]
fn out_flag_writes_the_rendered_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", &full_sim(2));
    let target = dir.path().join("row.csv");
    let out = sgp(
        &[
            "eval",
            "--scenario",
            &path,
            "--scheme",
            "ear_prices",
            "--format",
            "csv",
            "--out",
            target.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let written = std::fs::read_to_string(&target).unwrap();
    assert!(written.starts_with("scenario_id,"));
    assert_eq!(written.lines().count(), 2);
}

#[test]
fn json_documents_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_scenario(dir.path(), "s.json", &full_sim(2));
    for (cmd, scheme) in [
        ("eq", "halve_anonymous"),
        ("price", "exante_transform"),
        ("eval", "ear_prices"),
    ] {
        let out = sgp(
            &[cmd, "--scenario", &path, "--scheme", scheme, "--format", "json"],
            &[],
        );
        assert_eq!(out.status.code(), Some(0), "{cmd} failed");
        let doc: serde_json::Value = serde_json::from_slice(&out.stdout)
            .unwrap_or_else(|e| panic!("{cmd} emitted invalid JSON: {e}"));
        assert!(doc.is_object() || doc.is_array());
    }
}

#[test]
fn bench_covers_every_applicable_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let sim = write_scenario(dir.path(), "sim.json", &full_sim(2));
    let seq = write_scenario(
        dir.path(),
        "seq.json",
        &Scenario::new(
            vec![Dist::uniform(0.0, 1.0).unwrap(); 2],
            Externality::Full,
            Mode::sequential(),
        )
        .unwrap(),
    );
    let out = sgp(
        &[
            "bench", "--scenario", &sim, "--scenario", &seq, "--grid", "512", "--format", "csv",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let schemes: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    // simultaneous scenario rows first, then the sequential ones
    assert!(schemes.contains(&"ear_prices"));
    assert!(schemes.contains(&"iid_nondiscriminatory"));
    assert!(schemes.contains(&"seq_full_prices"));
    assert!(!text.contains("availability_grad2"), "wrong model benched");
}

#[test]
fn price_command_emits_schedule_and_guarantee() {
    let dir = tempfile::tempdir().unwrap();
    let avail = write_scenario(
        dir.path(),
        "avail.json",
        &Scenario::new(
            vec![Dist::uniform(0.0, 1.0).unwrap(); 3],
            Externality::Availability {
                w: vec![0.0, 0.5, 0.8],
            },
            Mode::sequential(),
        )
        .unwrap(),
    );
    let out = sgp(
        &["price", "--scenario", &avail, "--scheme", "availability_best_bucket", "--format", "json"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["scheme"], "availability_best_bucket");
    assert!(doc["prices"]["p"].is_array());
    assert!(doc["guarantee"]["factor"].as_f64().unwrap() > 1.0);

    // price-only schemes work here even though eval refuses them
    let k_uniform = sgp(&["price", "--scenario", &avail, "--scheme", "k_uniform_prices:2"], &[]);
    assert_eq!(k_uniform.status.code(), Some(0));
    let refused = sgp(&["eval", "--scenario", &avail, "--scheme", "k_uniform_prices:2"], &[]);
    assert_eq!(refused.status.code(), Some(1));
}

#[test]
fn hardness_prints_an_independence_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_scenario(
        dir.path(),
        "net.json",
        &Scenario::new(
            vec![Dist::uniform(0.0, 1.0).unwrap(); 4],
            Externality::Network {
                edges: vec![(0, 1), (1, 2), (2, 3), (3, 0)],
            },
            Mode::Simultaneous,
        )
        .unwrap(),
    );
    let out = sgp(&["hardness", "--scenario", &net, "--scheme", "anonymous:0.5"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("max independent set 2"));
    assert!(text.contains("revenue <= MaxIS: yes"));
}
