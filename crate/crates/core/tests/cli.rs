use std::path::Path;

use muntz::cli::{read_artifacts, read_csv, run_command, Artifact, BiorthogonalReport, GramReport, HardyRun, OutputFormat, RecoveryReport};
use muntz::completeness::SweepRow;
use muntz::exponents::ExponentSequence;
use muntz::gram::DistanceReport;
use muntz::muntz_space::Projection;
use muntz::operators::{CheckStatus, SynthesisCertificate};

fn run(dir: &Path, name: &str, args: &[&str]) -> String {
    let out = dir.join(name);
    let mut argv = vec!["muntz"];
    argv.extend_from_slice(args);
    argv.extend_from_slice(&["--out", out.to_str().unwrap()]);
    assert_eq!(run_command(argv), 0, "{args:?}");
    std::fs::read_to_string(out).unwrap()
}

fn one<T: serde::de::DeserializeOwned>(text: &str) -> Artifact<T> {
    let mut v = read_artifacts::<T>(text).unwrap();
    assert_eq!(v.len(), 1);
    v.pop().unwrap()
}

#[test]
fn gen_exponents_writes_squares() {
    let dir = tempfile::tempdir().unwrap();
    let text = run(dir.path(), "lambda.json", &["gen-exponents", "--kind", "power", "--p", "2", "--n", "10"]);
    let art = one::<ExponentSequence>(&text);
    assert_eq!(art.command, "gen-exponents");
    assert_eq!(art.report.values(), &(1..=10).map(|n| (n * n) as f64).collect::<Vec<_>>()[..]);
    // a written sequence feeds back in as --lambda
    let path = dir.path().join("lambda.json");
    let text = run(dir.path(), "d.json", &["distance", "--lambda", path.to_str().unwrap(), "--n", "3"]);
    assert_eq!(read_artifacts::<DistanceReport>(&text).unwrap().len(), 3);
}

#[test]
fn certificate_for_two_monomials() {
    let dir = tempfile::tempdir().unwrap();
    let text = run(dir.path(), "cert.json", &["operator", "certify", "--rho", "0.5", "--n", "2", "--lambda", "1", "2"]);
    let art = one::<SynthesisCertificate>(&text);
    assert_eq!(art.report.status, CheckStatus::Pass);
    assert!((art.report.normality.value.to_f64() - 1.36931).abs() < 1e-4);
    assert_eq!(art.config.precision_bits, 256);
    assert!(art.config.tolerances.contains_key("normality"));
}

#[test]
fn gram_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let text = run(dir.path(), "gram.csv", &["gram", "--lambda", "{1,2}", "--n", "2"]);
    let (head, rows) = read_csv(&text).unwrap();
    assert_eq!(head.config.output_format, OutputFormat::Csv);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.25);
    let text = run(dir.path(), "gram.json", &["gram", "--lambda", "1,2", "--n", "2"]);
    let g = one::<GramReport>(&text).report;
    assert_eq!(g.inverse[0][0].parse::<f64>().unwrap(), 48.0);
    assert!((g.determinant.parse::<f64>().unwrap() - 1.0 / 240.0).abs() < 1e-18);
}

#[test]
fn hereditary_csv_has_one_row_per_partition() {
    let dir = tempfile::tempdir().unwrap();
    let text = run(dir.path(), "h.csv", &["hereditary", "--n", "6", "--partitions", "all", "--monomial", "3"]);
    let (_, rows) = read_csv(&text).unwrap();
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().all(|r| &r[3] == "true" && !r[4].is_empty()));
    let text = run(dir.path(), "h.json", &["hereditary", "--n", "4", "--partitions", "sample:5", "--seed", "7"]);
    let rows = read_artifacts::<SweepRow>(&text).unwrap();
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[0].config.seed, 7);
}

#[test]
fn project_recover_and_biorthogonal_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let text = run(dir.path(), "p.json", &["project", "--lambda", "1,2", "--n", "2", "--monomial", "3"]);
    let p = one::<Projection>(&text).report;
    assert!((p.residual.to_f64() - 0.02520).abs() < 1e-4);
    let text = run(dir.path(), "r.json", &["recover", "--n", "10", "--terms", "3@4,-5@49"]);
    let r = one::<RecoveryReport>(&text).report;
    let c: Vec<f64> = r.recovery.coefficients.iter().map(|c| c.re.to_f64()).collect();
    assert_eq!(c, vec![0.0, 3.0, 0.0, 0.0, 0.0, 0.0, -5.0, 0.0, 0.0, 0.0]);
    let text = run(dir.path(), "b.json", &["biorthogonal", "--lambda", "1,2", "--n", "2", "--epsilon", "0.5"]);
    let b = one::<BiorthogonalReport>(&text).report;
    assert_eq!(b.family.coefficients[0][0].parse::<f64>().unwrap(), 48.0);
    assert!(b.norm_growth.is_some());
}

#[test]
fn hardy_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let text = run(
        dir.path(),
        "hy.json",
        &["hardy", "--kind", "integers", "--p", "2", "--n", "1", "--rule", "inv_n", "--budget", "200", "--theta", "0,pi/2"],
    );
    let h = one::<HardyRun>(&text).report;
    assert_eq!(serde_json::to_value(h.hardy.member).unwrap(), "yes");
    assert_eq!(h.radial.len(), 2);
    assert!(h.radial.iter().all(|b| b.holds));
    let text = run(dir.path(), "hn.json", &["hardy", "--kind", "integers", "--p", "2", "--n", "1", "--rule", "inv_sqrt_n", "--budget", "200"]);
    let h = one::<HardyRun>(&text).report;
    assert_eq!(serde_json::to_value(h.hardy.member).unwrap(), "no");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["hereditary", "--n", "12", "--partitions", "sample:20", "--seed", "3", "--precision", "128"];
    let a = run(dir.path(), "a.csv", &args);
    let b = run(dir.path(), "b.csv", &args);
    assert_eq!(a, b);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = out.to_str().unwrap();
    assert_eq!(run_command(["muntz", "operator", "certify", "--rho", "1.5", "--n", "2", "--out", o]), 1);
    assert_eq!(run_command(["muntz", "operator", "frobnicate"]), 2);
    assert_eq!(run_command(["muntz", "gram", "--lambda", "1,2", "--n", "2", "--precision", "16", "--out", o]), 1);
    assert_eq!(run_command(["muntz", "eval", "--terms", "1@1", "--z", "-0.5", "--out", o]), 1);
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"precision_bits":128,"tolerances":{"quadrature":1e-12},"output_format":"csv","seed":5}"#).unwrap();
    let text = run(dir.path(), "out.txt", &["distance", "--lambda", "1,2", "--n", "2", "--config", cfg.to_str().unwrap()]);
    let (head, rows) = read_csv(&text).unwrap();
    assert_eq!(head.config.precision_bits, 128);
    assert_eq!(head.config.seed, 5);
    assert_eq!(rows.len(), 2);
    let text = run(dir.path(), "out2.txt", &["distance", "--lambda", "1,2", "--n", "2", "--config", cfg.to_str().unwrap(), "--format", "json", "--precision", "96"]);
    assert_eq!(one::<DistanceReport>(text.lines().next().unwrap()).config.precision_bits, 96);
}
