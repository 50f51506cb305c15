use std::path::Path;
use std::process::{Command, Output};

fn bsdelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bsdelab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn constants_queries() {
    let o = bsdelab(&["constants", "m-star", "--beta", "300", "--phi", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["m_star"].as_f64().unwrap() <= 0.2034);
    assert_eq!(bsdelab(&["constants", "m-star", "--beta", "1", "--phi", "0"]).status.code(), Some(2));
    let o = bsdelab(&["constants", "pi-star", "--gamma", "1", "--delta", "2", "--phi", "0"]);
    assert_eq!(json(&o)["pi_star"].as_f64(), Some(30.5));
    let o = bsdelab(&["constants", "pi-tilde", "--delta", "2", "--phi", "0"]);
    assert_eq!(json(&o)["pi_tilde_star"].as_f64(), Some(26.0));
    let o = bsdelab(&["constants", "k-star", "--beta", "300", "--phi", "0.5,0.01,0.001,0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(json(&o)["index"].as_u64(), Some(2));
}

#[test]
fn solve_round_trips_through_a_data_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = bsdelab(&["solve", "--problem", "linear-lambda", "--k", "4", "-o", out.to_str().unwrap(), "--save-data"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o);
    assert_eq!(summary["converged"], true);
    let csv = std::fs::read_to_string(out.join("solution.csv")).unwrap();
    assert!(csv.starts_with("node,level,y0,z0_0,dn0\n"));
    assert_eq!(csv.lines().count(), 1 + 31);
    let again = bsdelab(&["solve", out.join("data.json").to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(0));
    assert_eq!(stdout(&again), csv);
}

#[test]
fn experiment_writes_a_deterministic_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", "problem = \"martingale-g\"\nk_list = [4, 8, 16]\np_max = 3\nseed = 5\n");
    let mut texts = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = bsdelab(&["experiment", &cfg, "-o", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).contains("overall             PASS"));
        let mut files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        assert!(files.iter().any(|p| p.ends_with("j1.csv")));
        assert!(files.iter().any(|p| p.ends_with("metadata.json")));
        texts.push(files.iter().map(|p| std::fs::read(p).unwrap()).collect::<Vec<_>>());
    }
    assert_eq!(texts[0], texts[1]);
    let bad = write(dir.path(), "bad.toml", "problem = \"martingale-g\"\nk_list = [4]\n");
    assert_eq!(bsdelab(&["experiment", &bad]).status.code(), Some(1));
}

#[test]
fn metrics_on_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.txt", "1 2 1\n0 0\n1 1\n");
    let b = write(dir.path(), "b.txt", "1 2 1\n0 0\n1.1 1\n");
    let o = bsdelab(&["metrics", "j1", &a, &b, "--window", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let d: f64 = stdout(&o).trim().parse().unwrap();
    assert!((d - 0.1).abs() < 1e-12);
    let o = bsdelab(&["metrics", "sup", &a, &b, "--window", "2"]);
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 1.0);
    let mu = write(dir.path(), "mu.txt", "atoms: (0.5,1)\nplinear:\n");
    let nu = write(dir.path(), "nu.txt", "atoms:\nplinear: (0,0) (1,1)\n");
    let o = bsdelab(&["metrics", "ks", &mu, &nu]);
    assert!((stdout(&o).trim().parse::<f64>().unwrap() - 0.5).abs() < 1e-15);
}

#[test]
fn mo_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let table = |f: fn(f64, f64) -> f64| {
        let mut s = String::from(",p1,p2,p3,p4,p5,p6,p7,p8\n");
        for k in 1..=8 {
            s += &format!("k={k}");
            for p in 1..=8 {
                s += &format!(",{}", f(f64::from(k) * 10.0, f64::from(p) * 10.0));
            }
            s.push('\n');
        }
        s
    };
    let good = write(dir.path(), "good.csv", &table(|k, p| 1.0 / k + 1.0 / p));
    let o = bsdelab(&["mo-check", &good, "--tol", "0.1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(json(&o)["pass"], true);
    let bad = write(dir.path(), "bad.csv", &table(|k, p| k / (k + p)));
    assert_eq!(bsdelab(&["mo-check", &bad, "--tol", "0.1"]).status.code(), Some(2));
}

#[test]
fn usage_and_io_errors_exit_with_one() {
    assert_eq!(bsdelab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(bsdelab(&["solve", "/nonexistent/data.json"]).status.code(), Some(1));
    assert_eq!(bsdelab(&["solve", "--convention", "middle", "--problem", "martingale-g", "--k", "2"]).status.code(), Some(1));
    assert_eq!(bsdelab(&["--help"]).status.code(), Some(0));
}
