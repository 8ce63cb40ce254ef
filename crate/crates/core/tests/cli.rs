use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_multisecretary"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_documents_every_flag() {
    let expect: &[(&str, &[&str])] = &[
        (
            "run",
            &[
                "--policy", "--dist", "--budget-ratio", "--budget", "--horizons", "--reps", "--seed",
                "--threads", "--out", "--gaps", "--epsilon0", "--beta", "--delta",
            ],
        ),
        ("verify", &["--T", "--reps", "--seed", "--policy", "--tolerance"]),
        ("oracle", &["--horizons", "--reps", "--dist"]),
        ("events", &["--T", "--tau-min", "--tau-max", "--sigmas"]),
        ("martingale", &["--T", "--reps", "--sigmas"]),
        ("fit", &["--in", "--policy", "--min-t"]),
        ("report", &["--in", "--out", "--title"]),
    ];
    for (sub, flags) in expect {
        let o = cli(&[sub, "--help"]);
        assert_eq!(o.status.code(), Some(0), "{sub}");
        let text = stdout(&o);
        for flag in *flags {
            assert!(text.contains(flag), "{sub} --help lacks {flag}");
        }
    }
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_input_exits_one() {
    let o = cli(&["run", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert_eq!(cli(&[]).status.code(), Some(1));
    let o = cli(&["run", "--policy", "greedy", "--out", "/tmp/never"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("ce, cwg, static, offline"));
    let o = cli(&["run", "--dist", "normal", "--out", "/tmp/never"]);
    assert_eq!(o.status.code(), Some(1));
    let o = cli(&["martingale", "--dist", "discrete:support=0.2,0.8;mass=0.5,0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(cli(&["oracle", "--dist", "uniform"]).status.code(), Some(1));
}

#[test]
fn run_then_fit_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("out/f0");
    let o = cli(&[
        "run", "--policy", "ce,cwg", "--dist", "fbeta:beta=0", "--budget-ratio", "0.5",
        "--horizons", "geom:100:3000:5", "--reps", "40", "--seed", "42", "--threads", "2",
        "--out", prefix.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    for name in ["f0_ce.dat", "f0_cwg.dat", "f0_ce.csv", "f0_cwg.csv", "f0.csv", "f0.meta.txt"] {
        assert!(out.join(name).exists(), "{name}");
    }
    let dat = fs::read_to_string(out.join("f0_ce.dat")).unwrap();
    assert_eq!(dat.lines().next(), Some("T regret"));
    assert_eq!(dat.lines().count(), 6);
    for line in dat.lines().skip(1) {
        assert_eq!(line.split_whitespace().count(), 2);
    }
    let meta = fs::read_to_string(out.join("f0.meta.txt")).unwrap();
    assert!(meta.contains("seed 42"));
    assert!(meta.contains("budget_rule floor(0.5*T)"));
    assert_eq!(meta.lines().filter(|l| l.starts_with("blob ")).count(), 5);

    let fit = cli(&["fit", "--in", out.join("f0_ce.csv").to_str().unwrap()]);
    assert_eq!(fit.status.code(), Some(0), "{}", stderr(&fit));
    let text = stdout(&fit);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!(row[0] > 0.0 && row[0] < 1.0);
    assert_eq!(row[3], 5.0);
    let fit = cli(&["fit", "--in", out.join("f0.csv").to_str().unwrap(), "--policy", "cwg"]);
    assert_eq!(fit.status.code(), Some(0));
    assert_eq!(cli(&["fit", "--in", out.join("f0.csv").to_str().unwrap()]).status.code(), Some(1));

    let svg = dir.path().join("fig/left.svg");
    let o = cli(&[
        "report", "--in", out.join("f0.csv").to_str().unwrap(), "--out", svg.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let go = |name: &str, threads: &str| {
        let prefix = dir.path().join(name);
        let o = cli(&[
            "run", "--policy", "cwg,static", "--dist", "discrete:support=0.25,0.5,0.75;mass=0.4,0.2,0.4",
            "--horizons", "list:50,100,200", "--reps", "30", "--seed", "9", "--threads", threads,
            "--out", prefix.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(dir.path().join(format!("{name}.csv"))).unwrap()
    };
    assert_eq!(go("a", "1"), go("b", "3"));
}

#[test]
fn verify_reports_residual() {
    let o = cli(&["verify", "--dist", "fbeta:beta=0", "--policy", "cwg", "--T", "60", "--reps", "50", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("policy,paths,max_abs_residual"));
    assert!(text.contains("max |residual| = "));
}

#[test]
fn oracle_prints_csv() {
    let o = cli(&[
        "oracle", "--dist", "discrete:support=0.25,0.5,0.75;mass=0.3333333333333333,0.3333333333333334,0.3333333333333333",
        "--horizons", "list:10,20", "--reps", "200",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn diagnostics_print_tables() {
    let o = cli(&["martingale", "--dist", "uniform", "--T", "50", "--budget", "20", "--reps", "400"]);
    assert_ne!(o.status.code(), Some(1), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| !l.starts_with('#')).count(), 50);
    let o = cli(&["events", "--dist", "fbeta:beta=0", "--T", "100", "--reps", "50"]);
    assert_ne!(o.status.code(), Some(1), "{}", stderr(&o));
    // tau runs from 100 down to tau_0 + 1 = 45
    assert_eq!(stdout(&o).lines().count(), 1 + 56);
}

#[test]
fn gap_override_changes_cwg() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str], name: &str| {
        let prefix = dir.path().join(name);
        let mut args = vec![
            "run", "--policy", "cwg", "--dist", "uniform", "--horizons", "list:300,600", "--reps", "20",
            "--out", prefix.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let o = cli(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read_to_string(Path::new(&format!("{}.csv", prefix.display()))).unwrap()
    };
    let plain = run(&[], "plain");
    let gapped = run(&["--gaps", "0.5", "--epsilon0", "0.5"], "gapped");
    assert_ne!(plain, gapped);
}
