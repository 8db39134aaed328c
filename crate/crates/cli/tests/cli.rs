use std::path::Path;
use std::process::{Command, Output};

use serde::de::DeserializeOwned;
use smallball::asymptotics::RateRow;
use smallball::tauberian::Exponent;
use smallball_cli::commands::{asym_records, laplace_records, table_rows, AsymRecord, LaplaceRecord, Status};
use smallball_cli::config::RunConfig;
use smallball_cli::output::Document;
use smallball_cli::verify::{verify_records, CheckRecord};

fn smallball(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smallball"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn parse<T: DeserializeOwned>(bytes: &[u8]) -> Document<T> {
    serde_json::from_slice(bytes).expect("output parses")
}

const SMALL_MC: &str = r#""monte_carlo": {"n_modes": 8, "n_time_steps": 64, "n_paths": 2000}"#;

#[test]
fn asym_json_round_trips() {
    let text =
        r#"{"schema_version": 1, "preset": "example-pe", "gammas": [0.0, 0.4, 0.6, 1.0, 2.0], "eps": [1e-3, 0.01]}"#;
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "asym.json", text);
    let out = smallball(&["asym", "--config", &config]);
    assert_eq!(out.status.code(), Some(2), "noise at γ = 0 and 0.4 is flagged");
    let doc: Document<AsymRecord> = parse(&out.stdout);
    assert_eq!(doc.schema_version, 1);
    assert_eq!(doc.command, "asym");
    let expected = asym_records(&RunConfig::parse(text).unwrap().resolved()).unwrap();
    assert_eq!(doc.records, expected);

    let find = |process: &str, gamma: f64| {
        doc.records
            .iter()
            .find(|r| r.process == process && r.gamma == Some(gamma))
            .unwrap()
    };
    assert_eq!(find("noise", 0.4).status, Status::OutOfRegime);
    let heat = find("solution", 0.0).report.as_ref().unwrap();
    assert_eq!(heat.asymptotic.rate, Exponent::int(3));
    assert_eq!(find("solution", 1.0).values.len(), 2);
}

#[test]
fn other_commands_round_trip() {
    let text = format!(
        r#"{{"schema_version": 1, "preset": "harmonic-oscillator", "p_grid": [0.0, 1.0, 1e6], "checks": ["tauberian-algebra", "monte-carlo"], {SMALL_MC}}}"#
    );
    let config = RunConfig::parse(&text).unwrap().resolved();
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "run.json", &text);

    let out = smallball(&["table", "--config", &path]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(parse::<RateRow>(&out.stdout).records, table_rows(&config).unwrap());

    let out = smallball(&["laplace", "--config", &path]);
    assert_eq!(out.status.code(), Some(0));
    let doc = parse::<LaplaceRecord>(&out.stdout);
    assert_eq!(doc.records, laplace_records(&config).unwrap());
    let zero = doc.records[0].parts.unwrap();
    assert_eq!((zero.total, zero.s1, zero.s2, zero.s3), (0.0, 0.0, 0.0, 0.0));

    let out = smallball(&["verify", "--config", &path]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(
        parse::<CheckRecord>(&out.stdout).records,
        verify_records(&config).unwrap()
    );
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "mc.json",
        &format!(r#"{{"schema_version": 1, "checks": ["monte-carlo"], {SMALL_MC}}}"#),
    );
    let run = |name: &str, seed: &str, format: &str| {
        let out = dir.path().join(name);
        let status = smallball(&[
            "verify",
            "--config",
            &config,
            "--seed",
            seed,
            "--format",
            format,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(status.status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json", "7", "json"), run("b.json", "7", "json"));
    assert_eq!(run("a.csv", "7", "csv"), run("b.csv", "7", "csv"));
    assert_ne!(run("c.json", "8", "json"), run("a.json", "7", "json"));

    let table = |name: &str| {
        let out = dir.path().join(name);
        smallball(&[
            "table",
            "--preset",
            "example-pe",
            "--format",
            "csv",
            "--out",
            out.to_str().unwrap(),
        ]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(table("t1.csv"), table("t2.csv"));
}

#[test]
fn tightened_tolerance_fails_the_monte_carlo_check() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "tight.json",
        &format!(r#"{{"schema_version": 1, "checks": ["monte-carlo"], "tolerance_scale": 1e-3, {SMALL_MC}}}"#),
    );
    let out = smallball(&["verify", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    let doc: Document<CheckRecord> = parse(&out.stdout);
    assert!(!doc.records[0].pass);
    assert_eq!(doc.records[0].tolerance, 3e-3);
}

#[test]
fn adjudication_reports_both_constants() {
    let out = smallball(&["verify", "--checks", "c0-adjudication"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Document<CheckRecord> = parse(&out.stdout);
    let adj = doc.records[0].adjudication.as_ref().unwrap();
    assert_eq!(adj.verdict, "engine");
    assert!((adj.published_constant / adj.engine_constant - 3.0).abs() < 1e-12);
    assert_eq!(adj.chebyshev_bound.len(), 2);
}

#[test]
fn presets_match_closed_forms() {
    let out = smallball(&["asym", "--preset", "harmonic-oscillator"]);
    let doc: Document<AsymRecord> = parse(&out.stdout);
    let two = doc.records.iter().find(|r| r.gamma == Some(2.0)).unwrap();
    let c = two.report.as_ref().unwrap().asymptotic.constant;
    assert!((c - 1.0 / 128.0).abs() < 1e-15);

    let doc: Document<AsymRecord> = parse(&smallball(&["asym", "--preset", "finite-bm"]).stdout);
    let c = doc.records[0].report.as_ref().unwrap().asymptotic.constant;
    assert!((c - 0.5).abs() < 1e-15);

    let doc: Document<AsymRecord> = parse(&smallball(&["asym", "--preset", "sqrt-log-mean"]).stdout);
    let rep = doc.records[0].report.as_ref().unwrap();
    assert_eq!(
        (rep.asymptotic.rate, rep.asymptotic.log_power),
        (Exponent::int(3), Exponent::int(4))
    );
}

#[test]
fn table_renders_twelve_decimals() {
    let out = smallball(&["table", "--preset", "example-pe", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let row = text.lines().find(|l| l.starts_with("0.600000000000,")).unwrap();
    assert_eq!(
        row,
        "0.600000000000,1.363636363636,5.000000000000,0.000000000000,0.000000000000,subcritical,subcritical"
    );
}

#[test]
fn hard_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "bad.json",
        r#"{"schema_version": 1, "problems": [{"horizon": 1.0}]}"#,
    );
    let out = smallball(&["asym", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("problems[0]"), "{msg}");

    assert_eq!(smallball(&["asym"]).status.code(), Some(1));
    assert_eq!(smallball(&["verify", "--checks", "nope"]).status.code(), Some(1));
}
