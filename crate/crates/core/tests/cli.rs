use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reinsure::cli::csvio::{read_compare, read_convergence, read_simulation, read_solution, read_strategy};
use reinsure::FamilyChoice;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn cfg(name: &str) -> String {
    configs()
        .join(format!("{name}.cfg"))
        .to_string_lossy()
        .into_owned()
}

fn reinsure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reinsure"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const FAST: [&str; 4] = ["--h", "0.05", "--xmax", "4"];

#[test]
fn solve_creates_outputs_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/run");
    let out_s = out.to_str().unwrap();
    let p = cfg("example1_xl");
    let args = [
        &["solve", "--config", &p, "--out", out_s, "--at", "0,1"][..],
        &FAST,
    ]
    .concat();
    let o = reinsure(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("delta(1) ="));
    for f in ["solution.csv", "strategy.csv", "solve.manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("solve.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "solve");
    assert!(manifest["timestamp"].as_u64().unwrap() > 0);
    assert_eq!(manifest["solver"][0]["h"], 0.05);

    let families = [FamilyChoice::Xl; 3];
    let sol = read_solution(&out.join("solution.csv"), &families).unwrap();
    assert_eq!(sol.x.len(), 81);
    assert_eq!(*sol.delta.last().unwrap(), 1.0);
    read_strategy(&out.join("strategy.csv"), &families).unwrap();

    let again = reinsure(&args);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));
    let forced = reinsure(&[&args[..], &["--force"]].concat());
    assert_eq!(code(&forced), 0);
}

#[test]
fn simulate_round_trips_the_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let p = cfg("example1_proportional");
    let o = reinsure(&[&["solve", "--config", &p, "--out", out][..], &FAST].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let strategy = dir.path().join("strategy.csv");
    let solution = dir.path().join("solution.csv");
    let o = reinsure(
        &[
            &[
                "simulate",
                "--config",
                &p,
                "--out",
                out,
                "--strategy",
                strategy.to_str().unwrap(),
                "--solution",
                solution.to_str().unwrap(),
                "--paths",
                "1",
                "--at",
                "0.5,1",
            ][..],
            &FAST,
        ]
        .concat(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("levels within 3 half-widths"));
    let est = read_simulation(&dir.path().join("simulation.csv")).unwrap();
    assert_eq!(est.len(), 2);
    assert!(est
        .iter()
        .all(|e| e.n_paths == 1 && (e.estimate == 0.0 || e.estimate == 1.0)));
}

#[test]
fn simulate_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let p = cfg("example1_xl");
    let strategy = dir.path().join("strategy.csv");

    std::fs::write(&strategy, "x_start,M1,M2\n0,inf,inf\n").unwrap();
    let base = [
        "simulate",
        "--config",
        &p,
        "--out",
        out,
        "--strategy",
        strategy.to_str().unwrap(),
    ];
    let o = reinsure(&[&base[..], &["--at", "1"]].concat());
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("format error"));

    std::fs::write(&strategy, "x_start,M1,M2,M3\n0,inf,inf,inf\n").unwrap();
    let o = reinsure(&[&base[..], &["--at", "1e6"]].concat());
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(stderr(&o).contains("barrier"));

    // A time cap far below the barrier crossing time censors every path.
    let cfg_path = dir.path().join("short.cfg");
    let text = std::fs::read_to_string(&p)
        .unwrap()
        .replace("n_paths = 100000", "n_paths = 100\nmax_time = 1e-6");
    std::fs::write(&cfg_path, text).unwrap();
    let o = reinsure(&[
        "simulate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out,
        "--strategy",
        strategy.to_str().unwrap(),
        "--at",
        "1",
        "--force",
    ]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = dir.path().join("bad.cfg");
    let text = std::fs::read_to_string(cfg("example1_proportional")).unwrap();

    std::fs::write(&bad, text.replace("eta1 = 3.5", "eta1 = 2.0")).unwrap();
    let o = reinsure(&["solve", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("eta1"), "{}", stderr(&o));

    std::fs::write(&bad, text.replace("intensity = 13.0", "intensity = 0.0")).unwrap();
    let o = reinsure(&["solve", "--config", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("lines[1].intensity"), "{}", stderr(&o));

    let o = reinsure(&["solve", "--config", "does/not/exist.cfg", "--out", out]);
    assert_eq!(code(&o), 2);
    let o = reinsure(&["solve", "--out", out]);
    assert_eq!(code(&o), 2);
}

#[test]
fn solver_failure_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = reinsure(&[
        "solve",
        "--config",
        &cfg("example1_none"),
        "--out",
        dir.path().to_str().unwrap(),
        // beta*h/p = 44 * 2 / 151.7 > 0.5.
        "--h",
        "2",
        "--xmax",
        "40",
    ]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    assert!(stderr(&o).contains("reduce h"));
}

#[test]
fn compare_writes_one_column_per_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let (a, b) = (cfg("example2_state_ii"), cfg("example2_state_viii"));
    let o = reinsure(
        &[
            &[
                "compare",
                "--config",
                &a,
                &b,
                &b,
                "--out",
                out,
                "--expect-best",
                "state_viii",
            ][..],
            &FAST,
        ]
        .concat(),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let data = read_compare(&dir.path().join("compare.csv")).unwrap();
    assert_eq!(data.names, ["state_ii", "state_viii", "state_viii_3"]);
    assert_eq!(data.delta[1], data.delta[2]);

    let o = reinsure(
        &[
            &[
                "compare",
                "--config",
                &a,
                &b,
                "--out",
                out,
                "--force",
                "--expect-best",
                "state_ii",
            ][..],
            &FAST,
        ]
        .concat(),
    );
    assert_eq!(code(&o), 3, "{}", stderr(&o));

    let odd = dir.path().join("odd.cfg");
    std::fs::write(
        &odd,
        std::fs::read_to_string(&b)
            .unwrap()
            .replace("h = 0.02", "h = 0.04"),
    )
    .unwrap();
    let o = reinsure(&[
        "compare",
        "--config",
        &a,
        odd.to_str().unwrap(),
        "--out",
        out,
        "--force",
    ]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("grid mismatch"));
}

#[test]
fn refine_writes_convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = reinsure(&[
        "refine",
        "--config",
        &cfg("example1_none"),
        "--out",
        dir.path().to_str().unwrap(),
        "--h",
        "0.1",
        "--xmax",
        "5",
        "--levels",
        "3",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let levels = read_convergence(&dir.path().join("convergence.csv")).unwrap();
    assert_eq!(levels.iter().map(|l| l.h).collect::<Vec<_>>(), [0.1, 0.05, 0.025]);
    assert!(levels[0].sup_diff.is_none());
    assert!(levels[2].sup_diff.unwrap() < levels[1].sup_diff.unwrap());
}
