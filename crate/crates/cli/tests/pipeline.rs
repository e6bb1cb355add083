use std::path::Path;
use std::process::{Command, Output};

fn sivplant(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sivplant"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn data_rows(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().skip(2).map(str::to_owned).collect()
}

#[test]
fn plan_presets() {
    let dir = tempfile::tempdir().unwrap();
    let o = sivplant(dir.path(), &["plan", "--preset", "A"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(data_rows(&dir.path().join("plan.csv")).len(), 50);

    let o = sivplant(dir.path(), &["plan", "--preset", "d"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_rows(&dir.path().join("plan.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().take(5).all(|r| r.contains("1.6e10")));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&sivplant(dir.path(), &["plan", "--preset", "Q"])), 2);
    assert_eq!(code(&sivplant(dir.path(), &["plan"])), 2);
    assert_eq!(code(&sivplant(dir.path(), &["bogus"])), 2);

    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[session]\nlabel = \"x\"\nenergy_mev = 1.0\nfluences_cm2 = [1e10]\nseparation_um = 5.0\nrows = 0\ncolumns = 3\n").unwrap();
    assert_eq!(code(&sivplant(dir.path(), &["--config", cfg.to_str().unwrap(), "plan"])), 2);

    std::fs::write(&cfg, "sede = 3\n").unwrap();
    assert_eq!(code(&sivplant(dir.path(), &["--config", cfg.to_str().unwrap(), "plan"])), 2);

    assert_eq!(code(&sivplant(dir.path(), &["plan", "--preset", "D"])), 0);
    assert_eq!(code(&sivplant(dir.path(), &["--seed", "1", "transport", "--histories", "0"])), 2);
    assert_eq!(code(&sivplant(dir.path(), &["transport", "--histories", "10"])), 2, "seed is required");
}

#[test]
fn missing_inputs_name_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let o = sivplant(dir.path(), &["--seed", "1", "synth"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sivplant plan"), "{}", stderr(&o));

    assert_eq!(code(&sivplant(dir.path(), &["plan", "--preset", "D"])), 0);
    let o = sivplant(dir.path(), &["--seed", "1", "synth"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sivplant transport"), "{}", stderr(&o));

    let o = sivplant(dir.path(), &["analyze"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("sivplant synth"), "{}", stderr(&o));
}

fn run_pipeline(dir: &Path) {
    for args in [
        &["plan", "--preset", "D"][..],
        &["--seed", "11", "transport", "--histories", "2000"],
        &["--seed", "11", "synth", "--hbt-emitters", "1"],
        &["--seed", "11", "analyze"],
        &["--seed", "11", "report"],
    ] {
        let o = sivplant(dir, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn pipeline_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(a.path());
    run_pipeline(b.path());
    for name in ["plan.csv", "profile_1mm.csv", "emitters.csv", "map.bin", "hbt.csv", "spots.csv", "yields.csv"] {
        let (x, y) = (std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
        assert!(x == y, "{name} differs between identical runs");
    }

    let spots = std::fs::read_to_string(a.path().join("spots.csv")).unwrap();
    let header = spots.lines().next().unwrap();
    assert!(header.starts_with("# sivplant "), "{header}");
    assert!(header.contains(" analyze config_sha256=") && header.ends_with("seed=11"), "{header}");

    let matches = data_rows(&a.path().join("spot_matches.csv"));
    assert_eq!(matches.len(), 5);
}

#[test]
fn empty_map_analyzes_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("dark.toml");
    std::fs::write(
        &cfg,
        "seed = 2\n[session]\nlabel = \"dark\"\nenergy_mev = 0.4\nfluences_cm2 = [1e8]\nseparation_um = 5.0\nrows = 1\ncolumns = 2\n\
         [field]\ninclude_scattered = false\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    for args in [&["plan"][..], &["transport", "--histories", "500"], &["synth"], &["analyze"]] {
        let o = sivplant(dir.path(), &[&["--config", c][..], args].concat());
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    }
    assert!(data_rows(&dir.path().join("spots.csv")).is_empty());
}

#[test]
fn strict_escalates_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hot.toml");
    std::fs::write(&cfg, "[session]\nlabel = \"hot\"\nenergy_mev = 1.0\nfluences_cm2 = [1e15]\nseparation_um = 5.0\nrows = 1\ncolumns = 2\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&sivplant(dir.path(), &["--config", c, "plan"])), 0);
    assert_eq!(code(&sivplant(dir.path(), &["--config", c, "--strict", "plan"])), 3);
}
