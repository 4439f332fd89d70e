use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use crewpair::files::read_schedule;
use crewpair::oracle;
use crewpair::rules::{CostModel, Instance, RuleSet};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crewpair"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn oracle_prints_the_library_optimum() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(run(dir, &["gen", "--flights", "20", "--seed", "3"]).status.success());
    let out = run(dir, &["oracle", "--out", "opt.pairings"]);
    assert!(out.status.success());
    let printed: f64 = stdout(&out)
        .lines()
        .find_map(|l| l.strip_prefix("optimum "))
        .unwrap()
        .parse()
        .unwrap();
    let schedule = read_schedule(
        fs::read(dir.join("schedule.csv")).unwrap().as_slice(),
        fs::read(dir.join("airports.csv")).unwrap().as_slice(),
    )
    .unwrap();
    let inst = Instance::new(schedule, RuleSet::default(), CostModel::default());
    let want = oracle::solve_exact(&inst).unwrap().objective;
    assert!((printed - want).abs() < 1e-6);
    let rep = run(dir, &["report", "opt.pairings"]);
    assert!(stdout(&rep).contains(&format!("objective {want:.6}")));
}

#[test]
fn report_of_written_solution_matches_solve() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(run(dir, &["gen", "--flights", "60", "--seed", "2"]).status.success());
    let solve = run(dir, &["solve", "--seed", "2", "--out-dir", "out"]);
    assert!(solve.status.success());
    let rep = run(dir, &["report", "out/solution.pairings"]);
    assert!(rep.status.success());
    let saved = fs::read_to_string(dir.join("out/report.txt")).unwrap();
    assert!(stdout(&rep).starts_with(&saved));
    let z = |s: &str| s.lines().rev().find_map(|l| l.strip_prefix("objective ")).map(|v| v.split(' ').next().unwrap().to_string());
    assert_eq!(z(&stdout(&rep)), z(&stdout(&solve)));
    let trace = fs::read_to_string(dir.join("out/trace.csv")).unwrap();
    assert!(trace.starts_with("# crewpair-trace v1\n"));
}

#[test]
fn worker_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(run(dir, &["gen", "--flights", "60", "--seed", "1"]).status.success());
    assert!(run(dir, &["--threads", "1", "solve", "--out-dir", "one"]).status.success());
    assert!(run(dir, &["--threads", "3", "solve", "--out-dir", "three"]).status.success());
    for f in ["solution.pairings", "trace.csv"] {
        assert_eq!(fs::read(dir.join("one").join(f)).unwrap(), fs::read(dir.join("three").join(f)).unwrap());
    }
    let a = run(dir, &["--threads", "1", "enumerate"]);
    let b = run(dir, &["--threads", "2", "enumerate"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn config_file_and_seed_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(run(dir, &["gen", "--flights", "24", "--seed", "0"]).status.success());
    fs::write(dir.join("run.cfg"), "[ifs]\nseed = 5\n[engine]\nseed = 5\nth_t = 4\n[cg]\ntarget_size = 200\n").unwrap();
    assert!(run(dir, &["--config", "run.cfg", "solve", "--out-dir", "a"]).status.success());
    assert!(run(dir, &["--config", "run.cfg", "--seed", "5", "solve", "--out-dir", "b"]).status.success());
    assert_eq!(fs::read(dir.join("a/trace.csv")).unwrap(), fs::read(dir.join("b/trace.csv")).unwrap());
    let art = run(dir, &["solve", "--init", "artificial", "--out-dir", "c"]);
    assert!(art.status.success());
    assert!(stdout(&art).contains("Converged"));
}

#[test]
fn input_defects_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    assert!(run(dir, &["gen", "--flights", "24", "--seed", "0"]).status.success());

    fs::write(dir.join("bad.cfg"), "[engine]\nth_t = 3\nbogus = 1\n").unwrap();
    let o = run(dir, &["--config", "bad.cfg", "enumerate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let mut text = fs::read_to_string(dir.join("schedule.csv")).unwrap();
    text.push_str("25,HAA,SAB,abc,100,T9\n");
    fs::write(dir.join("broken.csv"), text).unwrap();
    let o = run(dir, &["--schedule", "broken.csv", "enumerate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 26"));

    let o = run(dir, &["report", "missing.pairings"]);
    assert_eq!(o.status.code(), Some(2));

    fs::write(dir.join("forged.pairings"), "# crewpair-pairings v1\nHAA|1|1.000000\n").unwrap();
    assert_eq!(run(dir, &["report", "forged.pairings"]).status.code(), Some(2));

    assert!(run(dir, &["gen", "--flights", "62", "--schedule", "big.csv", "--airports", "big_ap.csv"]).status.success());
    let o = run(dir, &["--schedule", "big.csv", "--airports", "big_ap.csv", "oracle"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unpairable_flight_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(
        dir.join("airports.csv"),
        "code,city,is_crew_base\nDAL,DFW,true\nAUS,AUS,false\nMEM,MEM,false\n",
    )
    .unwrap();
    fs::write(
        dir.join("schedule.csv"),
        "id,origin,destination,dep,arr,tail\n1,DAL,AUS,600,660,A\n2,AUS,DAL,720,780,A\n3,AUS,MEM,900,990,B\n",
    )
    .unwrap();
    for args in [&["enumerate"][..], &["solve"], &["oracle"], &["ifs"]] {
        let o = run(dir, args);
        assert_eq!(o.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
