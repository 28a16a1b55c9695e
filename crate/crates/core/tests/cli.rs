use std::path::PathBuf;
use std::process::{Command, Output};

use pmdep::sim::{generate, Family, Regime, ScenarioSpec};
use tempfile::TempDir;

/// Runs the binary on a whitespace-separated argument line.
fn run(line: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmdep"))
        .env_remove("PMDEP_THREADS")
        .args(line.split_whitespace())
        .output()
        .expect("binary runs")
}

fn fixture(dir: &TempDir) -> PathBuf {
    let spec = ScenarioSpec::new(Family::B1, Regime::Null, 120, 3).with_p(6);
    let path = dir.path().join("data.csv");
    generate(&spec).unwrap().write_csv(&path).unwrap();
    path
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn pmit_output_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = fixture(&dir);
    let args = format!(
        "test-pmit --input {} --response y --z z1..z3 --w w1..w3 --xi 0.7 --B 3 \
         --regressor gbt:nrounds=20,max_depth=2 --seed 11 --quiet",
        data.display()
    );
    let a = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, run(&args).stdout);
    let v = json(&a);
    assert_eq!(v["schema"], "pmdep/1");
    assert_eq!(v["result"]["runs"].as_array().unwrap().len(), 3);
    assert_eq!(run(&format!("--threads 2 {args}")).stdout, a.stdout);
}

#[test]
fn adaptive_run_is_thread_invariant() {
    let dir = TempDir::new().unwrap();
    let data = fixture(&dir);
    let args = format!(
        "test-pmit --input {} --response y --z z1,z2,z3 --w w1..w3 --adaptive --M 20 --B 1 \
         --regressor linear --seed 4 --quiet",
        data.display()
    );
    let one = run(&args);
    assert_eq!(one.stdout, run(&format!("--threads 3 {args}")).stdout);
    let v = json(&one);
    assert!(v["result"]["adaptive"]["xi"].is_number());
}

#[test]
fn cmit_and_pgmc_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = fixture(&dir);
    let cmit = format!(
        "test-cmit --input {} --response y --w w1..w3 --xi 0.5 --B 2 --regressor linear --quiet",
        data.display()
    );
    assert_eq!(run(&cmit).stdout, run(&cmit).stdout);
    json(&run(&cmit));

    let pgmc = format!(
        "pgmc --input {} --response y --z z1..z3 --w w1..w3 --regressor linear --seed 8 --quiet",
        data.display()
    );
    let a = run(&pgmc);
    assert_eq!(a.stdout, run(&pgmc).stdout);
    let v = json(&a);
    let r = &v["result"];
    let (lo, hi, est) = (r["ci_low"].as_f64().unwrap(), r["ci_high"].as_f64().unwrap(), r["r2_hat"].as_f64().unwrap());
    assert!(lo <= est && est <= hi);
}

#[test]
fn output_flag_writes_the_same_record() {
    let dir = TempDir::new().unwrap();
    let data = fixture(&dir);
    let out = dir.path().join("out.json");
    let base = format!(
        "test-pmit --input {} --response y --z z1..z3 --w w1..w3 --xi 0.6 --B 1 --regressor linear --quiet",
        data.display()
    );
    let stdout = run(&base).stdout;
    let o = run(&format!("--output {} {base}", out.display()));
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read(&out).unwrap(), stdout);
}

#[test]
fn exit_codes_distinguish_failures() {
    let dir = TempDir::new().unwrap();
    let data = fixture(&dir);
    let common = "--response y --z z1 --w w1 --xi 0.5 --regressor linear --quiet";
    let ok = format!("test-pmit --input {} {common}", data.display());
    assert_eq!(run(&ok).status.code(), Some(0));

    let missing_col = format!("test-pmit --input {} --response nope --w w1 --xi 0.5 --quiet", data.display());
    assert_eq!(run(&missing_col).status.code(), Some(2));

    let missing_file = dir.path().join("absent.csv");
    assert_eq!(run(&format!("test-pmit --input {} {common}", missing_file.display())).status.code(), Some(2));

    assert_eq!(run("test-pmit --bogus").status.code(), Some(2));
    assert_eq!(run("frobnicate").status.code(), Some(2));
    assert_eq!(run(&format!("{ok} --adaptive")).status.code(), Some(2));

    let flat = dir.path().join("flat.csv");
    let mut text = String::from("y,z1,w1\n");
    for i in 0..20 {
        text.push_str(&format!("1.5,{},{}\n", i, (i * 7) % 5));
    }
    std::fs::write(&flat, text).unwrap();
    let out =
        run(&format!("test-cmit --input {} --response y --w w1 --xi 0.5 --regressor linear --quiet", flat.display()));
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn help(line: &str) -> String {
    String::from_utf8(run(line).stdout).unwrap()
}

#[test]
fn help_lists_every_flag() {
    let top = help("--help");
    for word in "test-pmit test-cmit pgmc simulate --threads --config --output --quiet".split(' ') {
        assert!(top.contains(word), "top-level help lacks {word}");
    }
    let pmit = help("test-pmit --help");
    let pmit_flags = "--input --response --z --w --zscore --xi --adaptive --M --candidates --fast-adaptive --B \
                      --aggregator --gamma-min --regressor --h-regressor --g-regressor --recipe --tau --alpha --seed";
    for flag in pmit_flags.split_whitespace() {
        assert!(pmit.contains(flag), "test-pmit help lacks {flag}");
    }
    let sim = help("simulate --help");
    let sim_flags = "--scenario --regime --N --p --p1 --p2 --rho --noise-sd --reps --method --oracle --adaptive-each \
                     --m-regressor --keep --csv";
    for flag in sim_flags.split_whitespace() {
        assert!(sim.contains(flag), "simulate help lacks {flag}");
    }
}

#[test]
fn config_supplies_defaults_and_flags_win() {
    let dir = TempDir::new().unwrap();
    let data = fixture(&dir);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "xi = 0.6\nB = 2\nseed = 5\nregressor = \"linear\"\n").unwrap();
    let base = format!("--input {} --response y --z z1..z3 --w w1..w3 --quiet", data.display());

    let from_cfg = format!("--config {} test-pmit {base}", cfg.display());
    let v = json(&run(&from_cfg));
    assert_eq!(v["settings"]["xi"], 0.6);
    assert_eq!(v["settings"]["B"], 2);
    assert_eq!(v["settings"]["seed"], 5);

    let v = json(&run(&format!("{from_cfg} --xi 0.8 --seed 9")));
    assert_eq!(v["settings"]["xi"], 0.8);
    assert_eq!(v["settings"]["seed"], 9);
    assert_eq!(v["settings"]["B"], 2);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "xi = [unclosed").unwrap();
    assert_eq!(run(&format!("--config {} test-pmit {base}", bad.display())).status.code(), Some(2));
}

#[test]
fn simulate_writes_a_reproducible_csv_row() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("sim.csv");
    let args = "simulate --scenario a1 --regime sparse --N 120 --reps 6 --xi 0.7 --B 1 --regressor linear \
                --seed 2 --quiet";
    let a = run(args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, run(args).stdout);
    let mut reader = csv::Reader::from_reader(a.stdout.as_slice());
    let header = reader.headers().unwrap().clone();
    assert!(header.iter().any(|h| h == "scenario"));
    assert_eq!(reader.records().count(), 1);

    let b = run(&format!("{args} --csv {}", csv_path.display()));
    assert!(b.status.success());
    assert_eq!(std::fs::read(&csv_path).unwrap(), a.stdout);

    let coverage = "simulate --scenario b2 --N 200 --reps 4 --oracle --seed 1 --quiet";
    let c = run(coverage);
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    assert_eq!(c.stdout, run(coverage).stdout);
}
