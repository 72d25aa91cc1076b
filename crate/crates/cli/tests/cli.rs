use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn billiard(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_billiard"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn header(dir: &Path, name: &str) -> String {
    read(dir, name)
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn simulate_writes_moments_fit_and_record() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = out.to_str().unwrap();
    let args = [
        "simulate",
        "--table",
        "circle",
        "--particles",
        "500",
        "--t-max",
        "300",
        "--seed",
        "7",
        "--out",
        o,
    ];
    let first = billiard(&args);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(String::from_utf8_lossy(&first.stdout).contains("z = "));
    assert_eq!(header(&out, "moments.csv"), "t,mean_n,var_n,usable,flagged");
    assert_eq!(
        header(&out, "fit.csv"),
        "exponent,stderr,intercept,t_lo,t_hi,r2,points"
    );
    let record: serde_json::Value = serde_json::from_str(&read(&out, "run.json")).unwrap();
    assert_eq!(record["config"]["seed"], 7);
    assert_eq!(record["config"]["table"]["kind"], "circle");
    assert_eq!(record["version"], env!("CARGO_PKG_VERSION"));

    let moments = read(&out, "moments.csv");
    assert_eq!(moments.lines().count(), 65);
    assert!(
        moments.lines().skip(1).all(|l| !l.contains(['e', 'E'])),
        "decimal notation only"
    );
    let fit = read(&out, "fit.csv");
    let run_json = read(&out, "run.json");
    assert_eq!(code(&billiard(&args)), 0);
    assert_eq!(read(&out, "moments.csv"), moments);
    assert_eq!(read(&out, "fit.csv"), fit);
    assert_eq!(read(&out, "run.json"), run_json);
}

#[test]
fn worker_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for workers in ["1", "8"] {
        let out = tmp.path().join(workers);
        let o = out.to_str().unwrap();
        let s = billiard(&[
            "escape",
            "--table",
            "polygon",
            "--m",
            "6",
            "--delta",
            "0.1",
            "--particles",
            "2000",
            "--workers",
            workers,
            "--out",
            o,
        ]);
        assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
        outputs.push((read(&out, "survival.csv"), read(&out, "escapes.csv")));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_file_with_flag_overrides() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    let out = tmp.path().join("out");
    fs::write(
        &cfg,
        format!(
            "table = \"sinai\"\nL = 1.0\nR = 0.25\nparticles = 300\nseed = 5\nt-max = 40.0\nout = {:?}\n",
            out.to_str().unwrap()
        ),
    )
    .unwrap();
    let s = billiard(&["simulate", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    let record: serde_json::Value = serde_json::from_str(&read(&out, "run.json")).unwrap();
    assert_eq!(record["config"]["seed"], 9);
    assert_eq!(record["config"]["particles"], 300);
    assert_eq!(record["config"]["table"]["radius"], 0.25);

    fs::write(&cfg, "tabel = \"circle\"\n").unwrap();
    assert_eq!(
        code(&billiard(&["simulate", "--config", cfg.to_str().unwrap()])),
        2
    );
}

#[test]
fn histogram_with_and_without_oracle() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().to_str().unwrap();
    let s = billiard(&[
        "histogram",
        "--table",
        "circle",
        "--particles",
        "2000",
        "--out",
        o,
    ]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    assert_eq!(header(tmp.path(), "histogram.csv"), "n,count,pmf,oracle");
    assert!(header(tmp.path(), "tv.csv").starts_with("t,total_variation"));

    let s = billiard(&["histogram", "--table", "sinai", "--R", "0.25", "--out", o]);
    assert_eq!(code(&s), 2);
    let s = billiard(&[
        "histogram",
        "--table",
        "sinai",
        "--R",
        "0.25",
        "--particles",
        "500",
        "--no-oracle",
        "--out",
        o,
    ]);
    assert_eq!(code(&s), 0);
    assert_eq!(header(tmp.path(), "histogram.csv"), "n,count,pmf");
}

#[test]
fn escape_outputs_and_validation() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().to_str().unwrap();
    // A short budget leaves censored particles.
    let s = billiard(&[
        "escape",
        "--table",
        "circle",
        "--delta",
        "0.05",
        "--particles",
        "3000",
        "--t-max",
        "2000",
        "--window",
        "100:1500",
        "--out",
        o,
    ]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    assert_eq!(header(tmp.path(), "survival.csv"), "t,N,S");
    let escapes = read(tmp.path(), "escapes.csv");
    assert_eq!(escapes.lines().next(), Some("particle,escape_time"));
    assert_eq!(escapes.lines().count(), 3001);
    assert!(escapes.lines().any(|l| l.ends_with(',')));
    assert!(read(tmp.path(), "run.json").contains("\"placement\": \"s:0\""));

    let too_wide = billiard(&["escape", "--table", "circle", "--delta", "7", "--out", o]);
    assert_eq!(code(&too_wide), 2);
    let no_width = billiard(&["escape", "--table", "circle", "--out", o]);
    assert_eq!(code(&no_width), 2);
    let bad_placement = billiard(&[
        "escape",
        "--table",
        "polygon",
        "--m",
        "5",
        "--delta",
        "0.05",
        "--placement",
        "vertex:9",
        "--out",
        o,
    ]);
    assert_eq!(code(&bad_placement), 2);
}

#[test]
fn scan_m_summary() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().to_str().unwrap();
    let s = billiard(&[
        "scan-m",
        "--ms",
        "8",
        "--delta",
        "0.2",
        "--particles",
        "2000",
        "--out",
        o,
    ]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    assert!(String::from_utf8_lossy(&s.stdout).contains("nearest 31"));
    let summary = read(tmp.path(), "summary.csv");
    assert_eq!(
        summary.lines().next(),
        Some("m,opening_width,tau_e,delta,stderr,m_alpha")
    );
    assert_eq!(summary.lines().count(), 2);
    assert!(tmp.path().join("survival_m8.csv").exists());

    let s = billiard(&[
        "scan-m",
        "--ms",
        "8,16",
        "--tau-e",
        "300",
        "--particles",
        "1000",
        "--out",
        o,
    ]);
    assert_eq!(code(&s), 0, "{}", String::from_utf8_lossy(&s.stderr));
    for row in read(tmp.path(), "summary.csv").lines().skip(1) {
        let tau: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
        assert!((tau - 300.0).abs() < 1e-9);
    }

    assert_eq!(
        code(&billiard(&[
            "scan-m", "--ms", "16,8", "--delta", "0.2", "--out", o
        ])),
        2
    );
    assert_eq!(
        code(&billiard(&[
            "scan-m", "--ms", "8", "--delta", "0.2", "--tau-e", "3", "--out", o
        ])),
        2
    );
}

#[test]
fn oracle_curves() {
    let tmp = TempDir::new().unwrap();
    let o = tmp.path().to_str().unwrap();
    assert_eq!(
        code(&billiard(&["oracle", "cb-pdf", "--nc", "1", "--out", o])),
        0
    );
    let cb = read(tmp.path(), "cb_pdf.csv");
    assert_eq!(cb.lines().next(), Some("n,density"));
    assert_eq!(cb.lines().nth(1), Some("0.7853981633974483,inf"));

    assert_eq!(
        code(&billiard(&[
            "oracle",
            "polygon-pdf",
            "--m",
            "15",
            "--nc",
            "100",
            "--out",
            o
        ])),
        0
    );
    assert_eq!(header(tmp.path(), "polygon_pdf.csv"), "n,density");
    assert_eq!(
        code(&billiard(&["oracle", "t-reg", "--m", "15", "--out", o])),
        0
    );
    assert_eq!(header(tmp.path(), "t_reg.csv"), "phi,t");
    assert_eq!(code(&billiard(&["oracle", "t-reg", "--out", o])), 2);
}

#[test]
fn fit_refits_csv_files() {
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("moments.csv");
    let rows: String = (1..=20)
        .map(|k| {
            let t = k as f64 * 10.0;
            format!("{t},{},{},10,0\n", t, t.powf(2.0 / 1.5))
        })
        .collect();
    fs::write(&csv, format!("t,mean_n,var_n,usable,flagged\n{rows}")).unwrap();
    let s = billiard(&["fit", csv.to_str().unwrap()]);
    assert_eq!(code(&s), 0);
    let stderr = String::from_utf8_lossy(&s.stderr);
    let z: f64 = stderr
        .trim_start_matches("z = ")
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((z - 1.5).abs() < 1e-9, "{stderr}");

    let out = tmp.path().join("fit");
    let s = billiard(&[
        "fit",
        csv.to_str().unwrap(),
        "--window",
        "50:200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&s), 0);
    let row = read(&out, "fit.csv");
    assert!(row.lines().nth(1).unwrap().contains(",50,200,"));

    // A shrinking variance is a numerical failure, not bad input.
    let falling: String = (1..=5)
        .map(|k| format!("{k},1,{},1,0\n", 1.0 / k as f64))
        .collect();
    fs::write(&csv, format!("t,mean_n,var_n,usable,flagged\n{falling}")).unwrap();
    assert_eq!(code(&billiard(&["fit", csv.to_str().unwrap()])), 3);
    assert_eq!(code(&billiard(&["fit", "/nonexistent.csv"])), 2);
}
