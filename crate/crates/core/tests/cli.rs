use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_psc-rsma"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "users = 2\ntrials = 2\nsweep_points = 2\nmessage_size = 6\n";

#[test]
fn print_config_round_trips() {
    let out = run(&["--print-config"]);
    assert!(out.status.success());
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", &String::from_utf8(out.stdout).unwrap());
    let out = run(&["feasibility", "--config", &cfg]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("feasible"));
}

#[test]
fn sweep_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
    assert!(text.starts_with("sweep_var,sweep_value,policy,trial,"));

    let c = dir.path().join("c.csv");
    let o = run(&["sweep", "--config", &cfg, "--seed", "7", "--out", c.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(text, fs::read_to_string(&c).unwrap());
}

#[test]
fn channels_can_be_replayed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.cfg", SMALL);
    let h = dir.path().join("h.csv");
    let o = run(&["channels", "--config", &cfg, "--trial", "1", "--out", h.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(fs::read_to_string(&h).unwrap().starts_with("user,antenna,re,im"));
    let o = run(&["feasibility", "--config", &cfg, "--channels", h.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.cfg", "users = 2\nno_such_key = 1\n");
    assert_eq!(run(&["feasibility", "--config", &bad]).status.code(), Some(2));

    let tight = write(dir.path(), "tight.cfg", &format!("{SMALL}t_max_s = 1e-9\n"));
    let o = run(&["feasibility", "--config", &tight]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr).unwrap().contains("infeasible"));
    let csv = dir.path().join("x.csv");
    let o = run(&["sweep", "--config", &tight, "--out", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(fs::read_to_string(&csv).unwrap().lines().skip(1).all(|l| l.ends_with(",infeasible")));

    let missing = dir.path().join("missing.cfg");
    assert_eq!(run(&["feasibility", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn compress_reports_plan() {
    let dir = tempfile::tempdir().unwrap();
    let ds = write(
        dir.path(),
        "ds.txt",
        "1: (h1,r1,t1); (h2,r3,t2)\n2: (h1,r1,t1); (h2,r3,t2)\n3: (h1,r1,t1)\n4: (h1,r2,t1)\n",
    );
    let msg = write(dir.path(), "msg.txt", "(h1,r1,t1); (h2,r3,t2)\n");
    let o = run(&["compress", "--dataset", &ds, "--message", &msg, "--rounds", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("triples       2"));
    assert!(text.contains("accuracy      1"));

    let unknown = write(dir.path(), "u.txt", "(h9,r1,t1)\n");
    assert_eq!(run(&["compress", "--dataset", &ds, "--message", &unknown]).status.code(), Some(1));
}
