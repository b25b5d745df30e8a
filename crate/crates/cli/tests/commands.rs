use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

const TRAITS: [&str; 5] = [
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "emotional_stability",
];

fn run(dir: &Path, args: &[&str]) -> i32 {
    let mut full = vec!["perdyn".to_string()];
    full.extend(args.iter().map(|a| {
        if a.ends_with(".csv") || a.ends_with(".json") || a.ends_with(".bin") || *a == "feat" {
            dir.join(a).display().to_string()
        } else {
            a.to_string()
        }
    }));
    perdyn_cli::run(full)
}

fn json(path: PathBuf) -> Value {
    serde_json::from_slice(&fs::read(&path).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn validator(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    jsonschema::validator_for(&serde_json::from_slice(&fs::read(path).unwrap()).unwrap()).unwrap()
}

fn assert_valid(report: &Value) {
    let v = validator("report.schema.json");
    let errors: Vec<String> = v.iter_errors(report).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

/// Trait-window CSV with `value(group, participant, task, trait)` at
/// snapshots 0 and 30 s.
fn write_traits(path: &Path, groups: usize, members: usize, tasks: &[&str], value: impl Fn(usize, usize, usize, usize) -> f64) {
    let mut s = String::from("group_id,session_id,task_label,participant_id,t_start_s,");
    s.push_str(&TRAITS.join(","));
    s.push('\n');
    for g in 0..groups {
        for (ti, task) in tasks.iter().enumerate() {
            for p in 0..members {
                for t in [0.0, 30.0] {
                    s.push_str(&format!("g{g},g{g}_{task},{task},g{g}p{p},{t}"));
                    for k in 0..5 {
                        s.push_str(&format!(",{}", value(g, p, ti, k)));
                    }
                    s.push('\n');
                }
            }
        }
    }
    fs::write(path, s).unwrap();
}

#[test]
fn synth_then_reports_validate_against_schema() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(
        run(
            d,
            &[
                "synth", "--output", "t.csv", "--performance", "perf.csv", "--self-reports", "sr.csv", "--ratings",
                "r.csv", "--predictions", "p.csv", "--tasks", "a,b,c", "--n-groups", "6", "--seed", "2",
            ],
        ),
        0
    );
    assert_valid(&json(d.join("t.csv.manifest.json")));
    let cases: [&[&str]; 4] = [
        &["cluster", "-i", "t.csv", "--permutations", "199", "-o", "c.json"],
        &["tasks", "-i", "t.csv", "--posthoc", "paired", "-o", "k.json"],
        &["predict", "-i", "t.csv", "--performance", "perf.csv", "--self-reports", "sr.csv", "-o", "pr.json"],
        &["agreement", "--ratings", "r.csv", "--predictions", "p.csv", "-o", "a.json"],
    ];
    for args in cases {
        assert_eq!(run(d, args), 0, "{args:?}");
        let out = args.iter().position(|a| *a == "-o").unwrap() + 1;
        let report = json(d.join(args[out]));
        assert_valid(&report);
        assert_eq!(report["manifest"]["command"], args[0]);
        assert!(report["manifest"]["inputs"].as_array().unwrap().iter().all(|i| i["sha256"].as_str().unwrap().len() == 64));
    }
    let a = json(d.join("a.json"));
    assert_eq!(a["results"]["variables"].as_array().unwrap().len(), 7);
    assert_eq!(json(d.join("pr.json"))["results"]["comparison"]["runs"].as_array().unwrap().len(), 4);
    let k = json(d.join("k.json"));
    assert_eq!(k["results"]["variables"].as_array().unwrap().len(), 7);

    // the schema is not vacuous
    let mut broken = k.clone();
    broken["results"]["variables"][0]["anova"]["f"] = Value::String("big".into());
    assert!(!validator("report.schema.json").is_valid(&broken));
    let mut broken = a;
    broken["results"]["variables"].as_array_mut().unwrap().pop();
    assert!(!validator("report.schema.json").is_valid(&broken));
}

#[test]
fn csv_format_writes_table_and_sidecar() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_traits(&d.join("t.csv"), 4, 3, &["x", "y"], |g, p, t, k| 0.2 + 0.1 * g as f64 + 0.01 * (p + t + k) as f64);
    assert_eq!(run(d, &["cluster", "-i", "t.csv", "--format", "csv", "-o", "c.csv", "--permutations", "99"]), 0);
    let table = fs::read_to_string(d.join("c.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "task,n_points,n_groups,f,p_value,n_permutations,exact");
    assert_eq!(lines.count(), 2);
    assert_valid(&json(d.join("c.csv.manifest.json")));
}

#[test]
fn single_group_task_gives_warning_record() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_traits(&d.join("t.csv"), 1, 3, &["solo"], |_, p, _, k| 0.3 + 0.05 * (p + k) as f64);
    assert_eq!(run(d, &["cluster", "-i", "t.csv", "-o", "c.json"]), 0);
    let r = json(d.join("c.json"));
    assert_eq!(r["results"]["tasks"].as_array().unwrap().len(), 0);
    assert_eq!(r["warnings"][0]["code"], "too_few_groups");
}

#[test]
fn identical_tasks_give_null_anova() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_traits(&d.join("t.csv"), 3, 3, &["a", "b", "c"], |g, p, _, k| 0.1 + 0.07 * g as f64 + 0.03 * (p * k) as f64 % 0.5);
    for level in ["individual", "group"] {
        assert_eq!(run(d, &["tasks", "-i", "t.csv", "--posthoc", "welch", "--level", level, "-o", "k.json"]), 0);
        let r = json(d.join("k.json"));
        for v in r["results"]["variables"].as_array().unwrap() {
            assert_eq!(v["anova"]["f"], 0.0, "{v}");
            assert_eq!(v["anova"]["p_value"], 1.0);
            assert_eq!(v["gg_applied"], false);
        }
    }
}

#[test]
fn greenhouse_geisser_follows_mauchly() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // task c tracks task a closely while task b is independent and wide:
    // a strongly non-spherical contrast covariance for most variables
    let noise: Vec<[f64; 15]> = (0..30).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
    write_traits(&d.join("t.csv"), 10, 3, &["a", "b", "c"], |g, p, t, k| {
        let n = &noise[g * 3 + p];
        let v = match t {
            0 => 0.5 + 0.2 * n[k],
            1 => 0.5 + 0.02 * n[5 + k],
            _ => 0.5 + 0.2 * n[k] + 0.01 * n[10 + k],
        };
        v.clamp(0.0, 1.0)
    });
    assert_eq!(run(d, &["tasks", "-i", "t.csv", "--posthoc", "paired", "-o", "k.json"]), 0);
    let r = json(d.join("k.json"));
    let mut applied = 0;
    for v in r["results"]["variables"].as_array().unwrap() {
        let p = v["sphericity"]["p_value"].as_f64().unwrap();
        let gg = v["gg_applied"].as_bool().unwrap();
        assert_eq!(gg, p < 0.05, "{v}");
        if gg {
            applied += 1;
            let eps = v["sphericity"]["gg_epsilon"].as_f64().unwrap();
            assert!((v["anova"]["df1"].as_f64().unwrap() - 2.0 * eps).abs() < 1e-12);
            assert_eq!(v["anova"]["epsilon_applied"].as_f64().unwrap(), eps);
        } else {
            assert!(v["anova"]["epsilon_applied"].is_null());
        }
        assert_eq!(v["posthoc"].as_array().unwrap().len(), 3);
    }
    assert!(applied >= 1);
}

#[test]
fn incomplete_units_are_dropped_with_count() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    write_traits(&d.join("t.csv"), 3, 2, &["a", "b"], |g, p, t, k| 0.2 + 0.1 * (g + p + t) as f64 + 0.01 * k as f64);
    // an extra group seen only in task a
    let mut s = fs::read_to_string(d.join("t.csv")).unwrap();
    for p in 0..2 {
        s.push_str(&format!("g9,g9_a,a,g9p{p},0,0.5,0.5,0.5,0.5,0.5\n"));
    }
    fs::write(d.join("t.csv"), s).unwrap();
    assert_eq!(run(d, &["tasks", "-i", "t.csv", "--posthoc", "welch", "-o", "k.json"]), 0);
    let r = json(d.join("k.json"));
    assert_eq!(r["results"]["dropped_units"], 2);
    assert_eq!(r["warnings"][0]["code"], "incomplete_units");
    let v = &r["results"]["variables"][0];
    assert!(v["sphericity"].is_null());
    assert!(v["sphericity_note"].as_str().unwrap().contains("fewer than 3 tasks"));
}

fn write_ratings(d: &Path, raters: usize, subjects: usize, dup: bool, rng: &mut ChaCha8Rng) {
    let mut r = String::from("rater_id,subject_id,trait,score\n");
    let mut p = String::from("subject_id,trait,score\n");
    for s in 0..subjects {
        for t in TRAITS {
            let truth = rng.random_range(0.2..0.8);
            let scores: Vec<f64> = (0..raters).map(|_| truth + rng.random_range(-0.1..0.1)).collect();
            for (j, v) in scores.iter().enumerate() {
                r.push_str(&format!("r{j},s{s},{t},{v}\n"));
            }
            let mean = scores.iter().sum::<f64>() / raters as f64;
            p.push_str(&format!("s{s},{t},{mean}\n"));
        }
    }
    if dup {
        r.push_str("r0,s0,openness,0.5\n");
    }
    fs::write(d.join("r.csv"), r).unwrap();
    fs::write(d.join("p.csv"), p).unwrap();
}

#[test]
fn agreement_lists_seven_iccs_and_rejects_duplicates() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    write_ratings(d, 4, 300, false, &mut rng);
    assert_eq!(run(d, &["agreement", "--ratings", "r.csv", "--predictions", "p.csv", "-o", "a.json"]), 0);
    let r = json(d.join("a.json"));
    let vars = r["results"]["variables"].as_array().unwrap();
    let names: Vec<&str> = vars.iter().map(|v| v["variable"].as_str().unwrap()).collect();
    assert_eq!(names[5..], ["plasticity", "stability"]);
    for v in vars {
        let icc = v["icc"]["icc"].as_f64().unwrap();
        assert!(icc > 0.5 && icc <= 1.0);
        // predictions are the rater mean: raters whose own error is below the
        // bound are equivalent to the model
        let tost = &v["tost"];
        let bound = tost["bound"].as_f64().unwrap();
        for pr in tost["per_rater"].as_array().unwrap() {
            let rater_mae = -pr["result"]["mean_difference"].as_f64().unwrap();
            if rater_mae < 0.9 * bound {
                assert_eq!(pr["result"]["equivalent"], true, "{pr}");
            }
        }
    }
    write_ratings(d, 4, 10, true, &mut rng);
    assert_eq!(run(d, &["agreement", "--ratings", "r.csv", "--predictions", "p.csv", "-o", "a.json"]), 2);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_perdyn"))
}

#[test]
fn errors_are_json_on_stderr() {
    let dir = TempDir::new().unwrap();
    let out = bin().args(["cluster", "-i"]).arg(dir.path().join("missing.csv")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(validator("error.schema.json").is_valid(&err));
    assert_eq!(err["error"]["class"], "io");

    // all points identical: numeric failure
    let t = dir.path().join("t.csv");
    write_traits(&t, 2, 2, &["a"], |_, _, _, _| 0.5);
    let out = bin().args(["cluster", "-i"]).arg(&t).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["class"], "numeric");

    let out = bin().args(["tasks", "-i"]).arg(&t).args(["--posthoc", "sideways"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(validator("error.schema.json").is_valid(&serde_json::from_slice(&out.stderr).unwrap()));
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["synth", "--output", "t.csv", "--performance", "perf.csv", "--n-groups", "8"]), 0);
    let checksum = |threads: &str, cmd: &[&str]| {
        let out = bin().env("RAYON_NUM_THREADS", threads).args(cmd).output().unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        v["results_checksum"].as_str().unwrap().to_string()
    };
    let t = d.join("t.csv").display().to_string();
    let perf = d.join("perf.csv").display().to_string();
    let cluster = ["cluster", "-i", &t, "--mode", "monte-carlo", "--permutations", "500"];
    assert_eq!(checksum("1", &cluster), checksum("4", &cluster));
    let predict = ["predict", "-i", &t, "--performance", &perf];
    assert_eq!(checksum("1", &predict), checksum("3", &predict));
}

fn write_features(d: &Path, duration_s: f64, dims: [usize; 3], constant: bool) {
    let feat = d.join("feat");
    fs::create_dir_all(&feat).unwrap();
    fs::write(
        feat.join("sessions.csv"),
        "group_id,session_id,task_label,participant_id\ng1,s1,,p1\ng1,s1,,p2\n",
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(duration_s as u64);
    for p in ["p1", "p2"] {
        let pd = feat.join("s1").join(p);
        fs::create_dir_all(&pd).unwrap();
        for (m, k) in ["acoustic", "textual", "visual"].iter().zip(dims) {
            let mut s = String::from("t_s");
            for i in 0..k {
                s.push_str(&format!(",f{i}"));
            }
            s.push('\n');
            let frames = (duration_s * 2.0) as usize;
            for f in 0..frames {
                s.push_str(&format!("{}", f as f64 * 0.5));
                for _ in 0..k {
                    let v = if constant { 0.25 } else { rng.random_range(-1.0..1.0) };
                    s.push_str(&format!(",{v}"));
                }
                s.push('\n');
            }
            fs::write(pd.join(format!("{m}.csv")), s).unwrap();
        }
    }
}

#[test]
fn traits_rows_follow_duration() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    assert_eq!(
        run(d, &["init-params", "-o", "params.bin", "--d", "8", "--heads", "2", "--acoustic-dim", "3", "--textual-dim", "2", "--visual-dim", "2"]),
        0
    );
    assert_valid(&json(d.join("params.bin.manifest.json")));
    for duration in [30.0, 45.0, 61.0, 95.0] {
        write_features(d, duration, [3, 2, 2], false);
        assert_eq!(run(d, &["traits", "--features", "feat", "--params", "params.bin", "-o", "t.csv"]), 0);
        let rows = fs::read_to_string(d.join("t.csv")).unwrap().lines().count() - 1;
        let per_participant = ((duration - 30.0) / 30.0_f64).floor() as usize + 1;
        assert_eq!(rows, 2 * per_participant, "duration {duration}");
    }
    let first = json(d.join("t.csv.manifest.json"));
    assert_valid(&first);
    assert_eq!(run(d, &["traits", "--features", "feat", "--params", "params.bin", "-o", "t.csv"]), 0);
    let second = json(d.join("t.csv.manifest.json"));
    assert_eq!(first["results_checksum"], second["results_checksum"]);
    assert_eq!(first["results"]["outputs"], second["results"]["outputs"]);

    write_features(d, 90.0, [3, 2, 2], true);
    assert_eq!(run(d, &["traits", "--features", "feat", "--params", "params.bin", "-o", "t.csv"]), 0);
    let text = fs::read_to_string(d.join("t.csv")).unwrap();
    let scores: Vec<&str> = text.lines().skip(1).map(|l| l.splitn(6, ',').nth(5).unwrap()).collect();
    assert_eq!(scores.len(), 6);
    assert!(scores.iter().all(|s| *s == scores[0]), "{scores:?}");

    fs::remove_file(d.join("feat/s1/p2/textual.csv")).unwrap();
    let out = bin()
        .args(["traits", "--features"])
        .arg(d.join("feat"))
        .arg("--params")
        .arg(d.join("params.bin"))
        .arg("-o")
        .arg(d.join("t.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("session s1") && msg.contains("participant p2") && msg.contains("textual"), "{msg}");
}
