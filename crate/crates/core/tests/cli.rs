use std::path::Path;
use std::process::{Command, Output};

use fockflow::cli::scenario::FIGURES;
use fockflow::montecarlo::read_events_csv;

fn fockflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = fockflow(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Rows of a CSV output: provenance line, column line, then numbers plus an optional label.
fn table(path: &Path) -> (Vec<String>, Vec<(Vec<f64>, String)>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let provenance = lines.next().unwrap();
    assert!(provenance.starts_with("# fockflow "), "{provenance}");
    assert!(provenance.contains("scenario hash "));
    let columns = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            let mut nums = Vec::new();
            let mut label = String::new();
            for field in l.split(',') {
                match field.parse::<f64>() {
                    Ok(v) => nums.push(v),
                    Err(_) => label = field.to_string(),
                }
            }
            (nums, label)
        })
        .collect();
    (columns, rows)
}

fn summary_value(stdout: &str, key: &str) -> f64 {
    let line = stdout
        .lines()
        .find(|l| l.contains(key))
        .unwrap_or_else(|| panic!("{key} in {stdout}"));
    let rest = &line[line.find(key).unwrap() + key.len()..];
    rest.split_whitespace()
        .next()
        .unwrap()
        .trim_end_matches(',')
        .parse()
        .unwrap()
}

fn write_scenario(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn every_bundled_figure_runs() {
    let dir = tempfile::tempdir().unwrap();
    for fig in FIGURES {
        let out = dir.path().join(fig);
        ok(&["--figure", fig, "--out", out.to_str().unwrap()]);
        let files: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).collect();
        assert!(!files.is_empty(), "{fig}");
        for f in files {
            let (columns, rows) = table(&f);
            assert!(columns.len() >= 2);
            assert!(!rows.is_empty(), "{}", f.display());
            assert!(rows.iter().all(|(v, _)| v.iter().all(|x| x.is_finite())));
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = out.to_str().unwrap();
        ok(&["--figure", "2a", "--out", o]);
        ok(&[
            "montecarlo",
            "--figure",
            "2b",
            "--pulses",
            "20000",
            "--seed",
            "9",
            "--out",
            o,
        ]);
    }
    for name in ["hom.csv", "events.fevt", "coincidences.csv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
}

#[test]
fn seed_changes_the_event_stream() {
    let dir = tempfile::tempdir().unwrap();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        ok(&[
            "montecarlo",
            "--figure",
            "2a",
            "--pulses",
            "5000",
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
    }
    let a = std::fs::read(dir.path().join("1/events.fevt")).unwrap();
    let b = std::fs::read(dir.path().join("2/events.fevt")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn transmission_scales_with_cell_length() {
    let dir = tempfile::tempdir().unwrap();
    let run = |length: f64| {
        let text = format!(
            "command = \"transmission\"\n[vapor]\ntemperature_C = 105.0\nlength_cm = {length:?}\n[transmission]\nspan_GHz = 4.0\nstep_MHz = 50.0\n"
        );
        let name = format!("t{length}");
        let file = write_scenario(dir.path(), &format!("{name}.toml"), &text);
        let out = dir.path().join(&name);
        ok(&["--scenario", &file, "--out", out.to_str().unwrap()]);
        table(&out.join("transmission.csv")).1
    };
    let empty = run(0.0);
    assert!(empty
        .iter()
        .all(|(v, _)| (v[1] - 1.0).abs() < 1e-12 && v[2].abs() < 1e-12));
    let single = run(5.0);
    let double = run(10.0);
    assert_eq!(single.len(), double.len());
    for ((a, _), (b, _)) in single.iter().zip(&double) {
        assert!((a[0] - b[0]).abs() < 1e-9);
        assert!((a[1] * a[1] - b[1]).abs() < 1e-9, "{} {}", a[1], b[1]);
        assert!((2.0 * a[2] - b[2]).abs() < 1e-6 * b[2].abs().max(1.0));
    }
    // Window maximum sits near +0.79 GHz.
    let best = single.iter().max_by(|a, b| a.0[1].total_cmp(&b.0[1])).unwrap();
    assert!((best.0[0] - 0.7935).abs() < 0.03, "{}", best.0[0]);
}

#[test]
fn visibility_follows_diffusion() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["--figure", "4a", "--out", dir.path().to_str().unwrap()]);
    assert!((summary_value(&stdout, "sigma 0.0000 GHz: visibility") - 1.0).abs() < 1e-6);
    assert!((summary_value(&stdout, "sigma 0.3888 GHz: visibility") - 0.53).abs() < 1e-3);
    let (_, rows) = table(&dir.path().join("hom.csv"));
    let zero: Vec<_> = rows
        .iter()
        .filter(|(_, l)| l == "distinct_ports/sigma=0.0000GHz")
        .collect();
    assert!(!zero.is_empty());
    let centre = zero
        .iter()
        .min_by(|a, b| a.0[0].abs().total_cmp(&b.0[0].abs()))
        .unwrap();
    assert!(centre.0[1].abs() < 1e-6, "{}", centre.0[1]);
}

#[test]
fn vapor_keeps_the_visibility() {
    let dir = tempfile::tempdir().unwrap();
    let before = ok(&["--figure", "2b", "--out", dir.path().join("b").to_str().unwrap()]);
    let after = ok(&["--figure", "2c", "--out", dir.path().join("c").to_str().unwrap()]);
    let (vb, vc) = (
        summary_value(&before, "visibility"),
        summary_value(&after, "visibility"),
    );
    assert!((vb - vc).abs() < 0.05, "{vb} {vc}");
}

#[test]
fn vapor_delays_both_traces() {
    let dir = tempfile::tempdir().unwrap();
    let peak = |fig: &str, state: &str| {
        let out = dir.path().join(fig);
        ok(&["--figure", fig, "--out", out.to_str().unwrap()]);
        let (_, rows) = table(&out.join("tcspc.csv"));
        rows.iter()
            .filter(|(_, s)| s.is_empty())
            .filter(|(v, _)| v[2] == state.parse::<f64>().unwrap())
            .max_by(|a, b| a.0[1].total_cmp(&b.0[1]))
            .map(|(v, _)| v[0])
            .unwrap()
    };
    let shift_one = peak("3b", "1") - peak("3a", "1");
    let shift_two = peak("3b", "2") - peak("3a", "2");
    assert!((shift_one - 3.0).abs() < 0.5, "{shift_one}");
    assert!((shift_two - shift_one).abs() < 0.1, "{shift_two}");
}

#[test]
fn analyzer_run_writes_traces_and_csv_events() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
command = "montecarlo"
[vapor]
enabled = true
[interferometer]
ports = "same"
[run]
pulses = 20000
analyzer = true
events = "csv"
"#;
    let file = write_scenario(dir.path(), "mc.toml", text);
    let out = dir.path().join("out");
    ok(&["--scenario", &file, "--out", out.to_str().unwrap()]);
    let events = read_events_csv(&out.join("events.csv")).unwrap();
    assert!(!events.is_empty());
    // The analyzer takes every port-3 photon.
    assert!(events.iter().all(|e| (4..=6).contains(&e.channel)));
    let (columns, rows) = table(&out.join("tcspc_events.csv"));
    assert_eq!(columns[0], "t_ns");
    assert!(rows.iter().any(|(v, _)| v[1] > 0.0));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().to_str().unwrap();
    assert_eq!(fockflow(&["--no-such-flag"]).status.code(), Some(2));
    assert_eq!(fockflow(&["--figure", "9z"]).status.code(), Some(2));
    assert_eq!(fockflow(&["hom", "--figure", "1c", "--out", o]).status.code(), Some(1));
    assert_eq!(fockflow(&["--out", o]).status.code(), Some(1));
    let bad = write_scenario(dir.path(), "bad.toml", "command = \"hom\"\n[emitter]\ntau = 1.0\n");
    let out = fockflow(&["--scenario", &bad, "--out", o]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
    let hot = write_scenario(
        dir.path(),
        "hot.toml",
        "command = \"transmission\"\n[vapor]\ntemperature_C = -300.0\n",
    );
    assert_eq!(fockflow(&["--scenario", &hot, "--out", o]).status.code(), Some(1));
    assert!(fockflow(&["--help"]).status.success());
}
