use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const GOLDEN_ARGS: [&str; 16] = [
    "--model", "heston", "--intensity", "cir", "--set", "3", "--T", "0.5", "--rho-grid", "-0.5:0.5:0.5", "--paths",
    "100", "--steps", "50", "--seed", "7",
];

fn cva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cva")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("UTF-8 output")
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn header_value(csv: &str, key: &str) -> Option<String> {
    csv.lines().find_map(|l| l.strip_prefix(&format!("# {key}=")).map(str::to_string))
}

fn golden_path() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/tiny_heston_cir3.csv"))
}

#[test]
fn tiny_run_matches_golden_file() {
    let o = cva(&GOLDEN_ARGS);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(golden_path(), &out).unwrap();
    }
    let golden = fs::read_to_string(golden_path()).expect("golden file present");
    assert_eq!(out, golden);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = cva(&GOLDEN_ARGS);
    let b = cva(&GOLDEN_ARGS);
    assert_eq!(a.stdout, b.stdout);
    let mut other = GOLDEN_ARGS.to_vec();
    *other.last_mut().unwrap() = "8";
    assert_ne!(cva(&other).stdout, a.stdout);
}

#[test]
fn csv_layout_and_line_endings() {
    let out = stdout(&cva(&GOLDEN_ARGS));
    assert!(!out.contains('\r'));
    let first_data = out.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(first_data, "rho,cva_mc,cva_mc_stderr,cv_corr,cva_first,cva_second");
    let rows = data_rows(&out);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["-0.5", "0", "0.5"]);
    assert_eq!(header_value(&out, "mc.seed").as_deref(), Some("7"));
    assert_eq!(header_value(&out, "intensity.set").as_deref(), Some("cir-3"));
}

#[test]
fn out_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let mut args = GOLDEN_ARGS.to_vec();
    args.extend(["--methods", "first", "--out", path.to_str().unwrap()]);
    let o = cva(&args);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let written = fs::read_to_string(&path).unwrap();
    let rows = data_rows(&written);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1].is_empty() && !r[4].is_empty() && r[5].is_empty()));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# comment\nmodel.kind = sabr\nintensity.kind = cir\nintensity.set = cir-1\noption.maturity = 1\n\
         sweep.rho_grid = 0\nsweep.methods = first\n",
    )
    .unwrap();
    let base = stdout(&cva(&["-c", cfg.to_str().unwrap()]));
    assert_eq!(header_value(&base, "option.maturity").as_deref(), Some("1"));
    let o = cva(&["-c", cfg.to_str().unwrap(), "--T", "0.5", "--set", "cir-2"]);
    assert!(o.status.success());
    let over = stdout(&o);
    assert_eq!(header_value(&over, "option.maturity").as_deref(), Some("0.5"));
    assert_eq!(header_value(&over, "intensity.set").as_deref(), Some("cir-2"));
    assert_eq!(header_value(&over, "model.kind").as_deref(), Some("sabr"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"));
    let mut names: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert_eq!(names.iter().filter(|p| p.to_string_lossy().contains("sweep_")).count(), 8);
    assert_eq!(names.iter().filter(|p| p.to_string_lossy().contains("sensitivity_")).count(), 2);
    for p in names {
        let o = cva(&["-c", p.to_str().unwrap(), "--print-config"]);
        assert!(o.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn minimal_flags_fill_defaults() {
    let o = cva(&["--model", "heston", "--intensity", "cir", "--set", "3", "--T", "0.5", "--print-config"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in ["mc.paths", "mc.steps", "mc.seed", "quad.dt", "sweep.rho_grid", "sweep.methods", "option.strike"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{key}="))), "{key} missing from\n{text}");
    }
    assert!(text.lines().any(|l| l == "intensity.set=cir-3"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "model.kind = sabr\nmc.pathz = 10\n").unwrap();
    let o = cva(&["-c", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.cfg:2: unknown key `mc.pathz`"), "{err}");

    let base = ["--model", "heston", "--intensity", "cir", "--set", "3", "--T", "1"];
    let o = cva(&[&base[..], &["--paths", "many"]].concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mc.paths"));

    let o = cva(&[&base[..], &["--rho-grid", "0.99", "--nu", "0.5"]].concat());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho = 0.99"));

    let o = cva(&["--model", "heston", "--intensity", "cir", "--set", "cir-9", "--T", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = cva(&["-c", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let o = cva(&["--model", "black"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_errors_exit_3() {
    let o = cva(&[
        "--model", "heston", "--intensity", "cir", "--set", "1", "--T", "0.1", "--rho-grid", "0", "--methods", "first", "-D",
        "quad.upper=5",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.lines().last().unwrap().starts_with("error: quadrature error"), "{err}");
}

#[test]
fn sensitivity_mode_is_monotone_in_mu() {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"));
    let o = cva(&["-c", dir.join("sensitivity_mu.cfg").to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("model,mu,rho,cva0,cva1,cva_first,cva_second\n"));
    for model in ["sabr", "heston"] {
        let cva1: Vec<f64> =
            data_rows(&out).iter().filter(|r| r[0] == model).map(|r| r[4].parse().unwrap()).collect();
        assert_eq!(cva1.len(), 10);
        assert!(cva1.windows(2).all(|w| w[1] > w[0]), "{model}: {cva1:?}");
    }
}

/// Counts the cells with |rho| >= 0.6 where the second-order formula is at
/// least as close to Monte Carlo as the first-order one.
fn second_order_wins(maturity: &str) -> (usize, usize, Vec<Vec<String>>) {
    let o = cva(&[
        "--model", "heston", "--intensity", "cir", "--set", "cir-3", "--T", maturity, "--rho-grid", "-0.9:0.9:0.3",
        "--methods", "mc,first,second", "--paths", "100000", "--steps", "500", "--seed", "42",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 7);
    let mut wins = 0;
    let mut extreme = 0;
    for r in &rows {
        let v: Vec<f64> = r.iter().map(|s| s.parse().unwrap()).collect();
        if v[0].abs() >= 0.6 {
            extreme += 1;
            if (v[5] - v[1]).abs() <= (v[4] - v[1]).abs() {
                wins += 1;
            }
        }
    }
    (wins, extreme, rows)
}

#[test]
fn heston_cir3_half_year_second_order_wins_in_extreme_cells() {
    let (wins, extreme, rows) = second_order_wins("0.5");
    assert_eq!(extreme, 4);
    assert!(wins >= 3, "{wins} of 4: {rows:?}");
}

#[test]
#[ignore = "fails: at T = 1 the second-order formula overshoots for rho <= -0.6 (see README, accuracy notes)"]
fn heston_cir3_one_year_second_order_wins_in_extreme_cells() {
    let (wins, extreme, rows) = second_order_wins("1");
    assert_eq!(extreme, 4);
    assert!(wins >= 3, "{wins} of 4: {rows:?}");
}
