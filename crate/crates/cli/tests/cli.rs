use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SITE: &str = r#"
[model]
kind = "bose_hubbard_site"
U = 1.0
mu = 0.5

[discretization]
beta = 10.0
n_t = [201, 401, 801]

[exact]
beta = 50.0
staircase = { start = 0.1, stop = 3.0, step = 0.2 }

[sweep]
param = "mu"
grid = [0.4, 0.5]
"#;

struct Case {
    dir: TempDir,
}

impl Case {
    fn new(config: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Self { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("run.toml")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str], out: &str) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_cspi"));
        cmd.args(args)
            .arg("--config")
            .arg(self.config())
            .arg("--out")
            .arg(self.out(out))
            .env_remove("CSPI_OUT");
        cmd.output().unwrap()
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, rows) = read_csv(path);
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn staircase_matches_half_offset_rounding() {
    let case = Case::new(SITE);
    let o = case.run(&["exact"], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let path = case.out("out").join("staircase.csv");
    let (header, rows) = read_csv(&path);
    assert_eq!(header, ["mu", "n_exact", "n_round_half", "n_round"]);
    assert_eq!(rows.len(), 15);
    let mu = column(&path, "mu");
    let n = column(&path, "n_exact");
    for (m, n) in mu.iter().zip(&n) {
        assert_eq!(n.round(), (m + 0.5).round(), "mu = {m}");
    }
}

#[test]
fn spin_one_free_energy() {
    let case = Case::new("[model]\nkind = \"uniaxial_spin\"\nS = 1.0\n[exact]\nbeta = 20.0\n");
    let o = case.run(&["exact"], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(case.out("out").join("thermal.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let f = v["f"].as_f64().unwrap();
    let want = -(1.0 + 2.0 * (-20f64).exp()).ln() / 20.0;
    assert!((f - want).abs() <= 1e-10, "{f} vs {want}");
    assert!(!case.out("out").join("staircase.csv").exists());
}

#[test]
fn missing_model_is_a_config_error() {
    let case = Case::new("[discretization]\nbeta = 10.0\nn_t = [11]\n");
    let o = case.run(&["exact"], "out");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model"), "{}", stderr(&o));
}

#[test]
fn even_step_count_is_rejected_before_computing() {
    let case = Case::new(SITE);
    let o = case.run(&["correction", "--n-t", "200"], "out");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("200"), "{}", stderr(&o));
    assert!(fs::read_dir(case.out("out")).map_or(true, |mut d| d.next().is_none()));
}

#[test]
fn step_bound_violation_names_the_bound() {
    let case = Case::new("[model]\nkind = \"bose_hubbard_site\"\nU = 1.0\nmu = 20.0\n");
    let o = case.run(&["correction"], "out");
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("mu"), "{}", stderr(&o));
}

#[test]
fn default_validation_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cspi"))
        .args(["validate", "--out"])
        .arg(out.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn flipped_fixture_fails_validation() {
    let case = Case::new(SITE);
    let o = case.run(&["correction", "--n-t", "101"], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let blocks = fs::read_to_string(case.out("out").join("blocks.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&blocks).unwrap();
    fs::write(case.dir.path().join("good.json"), &blocks).unwrap();
    for key in ["l2d_re", "l2d_im"] {
        for row in v[key].as_array_mut().unwrap() {
            for x in row.as_array_mut().unwrap() {
                *x = serde_json::json!(-x.as_f64().unwrap());
            }
        }
    }
    fs::write(case.dir.path().join("bad.json"), v.to_string()).unwrap();

    let with_fixture = |name: &str| {
        let cfg = format!("{SITE}\n[validate]\nfixture = \"{name}\"\n");
        fs::write(case.config(), cfg).unwrap();
        case.run(&["validate", "--n-t", "101"], "v")
    };
    let good = with_fixture("good.json");
    assert!(good.status.success(), "{}", stdout(&good));
    let bad = with_fixture("bad.json");
    assert_eq!(bad.status.code(), Some(1));
    let text = stdout(&bad);
    let line = text
        .lines()
        .find(|l| l.contains("block_circulant"))
        .unwrap();
    assert!(line.starts_with("FAIL"), "{line}");
    assert!(stderr(&bad).contains("block_circulant"));
}

#[test]
fn outputs_are_deterministic_and_reingest_exactly() {
    let case = Case::new(SITE);
    for out in ["a", "b"] {
        let o = case.run(&["correction"], out);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut names: Vec<_> = fs::read_dir(case.out("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 6, "{names:?}");
    for name in &names {
        let a = fs::read(case.out("a").join(name)).unwrap();
        let b = fs::read(case.out("b").join(name)).unwrap();
        assert_eq!(a, b, "{name:?} differs between runs");
    }
    // re-ingesting the printed values gives back the same bits as a rewrite
    let path = case.out("a").join("sweep.csv");
    let (_, rows) = read_csv(&path);
    for row in rows {
        for cell in &row[1..] {
            let x: f64 = cell.parse().unwrap();
            let again = if cell.contains('e') {
                format!("{x:.16e}")
            } else {
                format!("{x}")
            };
            assert_eq!(&again, cell);
        }
    }
}

#[test]
fn site_sweep_slope_extrapolates_to_minus_half() {
    let case = Case::new(SITE);
    let o = case.run(&["sweep"], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let path = case.out("out").join("sweep_extrapolated.csv");
    for d in column(&path, "derivative") {
        assert!((d + 0.5).abs() <= 1e-3, "{d}");
    }
    let rows = column(&case.out("out").join("sweep.csv"), "n_t");
    assert_eq!(rows, [201.0, 401.0, 801.0, 201.0, 401.0, 801.0]);
}

#[test]
fn spin_sweep_slope_is_minus_half() {
    let case = Case::new(
        r#"
[model]
kind = "uniaxial_spin"
S = 1.0
[discretization]
beta = 10.0
n_t = [201, 401, 801]
[sweep]
param = "S"
grid = [1.0, 1.5, 2.0, 2.5]
"#,
    );
    let o = case.run(&["sweep", "--format", "json"], "out");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(case.out("out").join("sweep_extrapolated.json")).unwrap();
    let rows: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.len(), 4);
    for r in rows {
        let d = r["derivative"].as_f64().unwrap();
        assert!((d + 0.5).abs() <= 1e-3, "{r}");
    }
}

#[test]
fn lattice_sweep_per_site_slopes() {
    let base = r#"
[model]
kind = "bose_hubbard_lattice"
U = 1.0
mu = 0.5
J = 0.05
D = 1
L = 4
[discretization]
beta = 10.0
n_t = [201, 401, 801]
"#;
    for (param, want) in [("mu", 0.5), ("J", -1.0)] {
        let case = Case::new(&format!(
            "{base}[sweep]\nparam = \"{param}\"\ngrid = [{}]\n",
            if param == "mu" { 0.5 } else { 0.05 }
        ));
        let o = case.run(&["sweep"], "out");
        assert!(o.status.success(), "{}", stderr(&o));
        let per_site = column(
            &case.out("out").join("sweep_extrapolated.csv"),
            "derivative_per_site",
        )[0];
        let got = if param == "mu" {
            per_site.abs()
        } else {
            per_site
        };
        assert!((got - want).abs() <= 1e-3, "{param}: {per_site}");
    }
}

#[test]
fn output_directory_from_environment() {
    let case = Case::new(SITE);
    let target = case.out("env");
    let o = Command::new(env!("CARGO_BIN_EXE_cspi"))
        .args(["exact", "--config"])
        .arg(case.config())
        .env("CSPI_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(target.join("thermal.json").exists());
}
