use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_pronk");
const G: f64 = 9.81;

fn pronk(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn action_file(dir: &Path, name: &str, fields: &[(&str, f64)]) -> PathBuf {
    let mut text = String::new();
    let defaults = [
        ("t_th_b", 0.5),
        ("r_p", 0.3),
        ("theta_p", std::f64::consts::FRAC_PI_2),
        ("r_v", 2.0),
        ("theta_v", std::f64::consts::FRAC_PI_2),
        ("k", 1.0),
        ("d", 0.0),
        ("roll_lo", 0.0),
        ("pitch_lo", 0.0),
        ("yaw_lo", 0.0),
        ("roll_rate_lo", 0.0),
        ("pitch_rate_lo", 0.0),
        ("yaw_rate_lo", 0.0),
    ];
    for (k, v) in defaults {
        let v = fields.iter().find(|(n, _)| *n == k).map_or(v, |f| f.1);
        text.push_str(&format!("{k} = {v:?}\n"));
    }
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn v3(v: &Value) -> [f64; 3] {
    [0, 1, 2].map(|i| v[i].as_f64().unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn in_place_plan_ends_at_commanded_liftoff() {
    let dir = tempfile::tempdir().unwrap();
    let action = action_file(dir.path(), "a.toml", &[]);
    let out = dir.path().join("plan");
    let o = pronk(&["plan", "--action", s(&action), "--target", "0,0,0", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let plan = json(&out.join("plan.json"));
    assert_eq!(plan["decision"], "accept");
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let c = v3(&plan["liftoff"]["c"]);
    let v = v3(&plan["liftoff"]["cdot"]);
    for i in 0..3 {
        assert!((last[1 + i] - c[i]).abs() < 1e-12);
        assert!((last[4 + i] - v[i]).abs() < 1e-12);
    }
    assert!(out.join("trajectory.meta.json").exists());
    assert!(out.join("plan.meta.json").exists());
}

#[test]
fn apex_below_target_exits_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let action = action_file(dir.path(), "a.toml", &[("r_v", 0.5)]);
    let out = dir.path().join("plan");
    let o = pronk(&["plan", "--action", s(&action), "--target", "0,0,0.4", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("apex-below-target"));
    let c = pronk(&["check", "--action", s(&action), "--target", "0,0,0.4"]);
    assert_eq!(c.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&c.stdout).contains("apex-below-target"));
}

/// Landing from the spherical lift-off state, solved independently.
fn forward_landing(r_p: f64, r_v: f64, theta_v: f64, z_tg: f64) -> (f64, f64) {
    let (z0, vx, vz) = (r_p, r_v * theta_v.cos(), r_v * theta_v.sin());
    // z0 + vz t - g t^2 / 2 = z_tg, later root
    let t = (vz + (vz * vz + 2.0 * G * (z0 - z_tg)).sqrt()) / G;
    (vx * t, t)
}

#[test]
fn forward_plan_matches_ballistic_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let theta_v = 1.0;
    let action = action_file(dir.path(), "a.toml", &[("r_v", 2.2), ("theta_v", theta_v)]);
    let out = dir.path().join("plan");
    let o = pronk(&["plan", "--action", s(&action), "--target", "0.4,0,0", "--out", s(&out)]);
    assert!(o.status.success());
    let plan = json(&out.join("plan.json"));
    let z_tg = v3(&plan["target"])[2];
    let (x, t) = forward_landing(0.3, 2.2, theta_v, z_tg);
    let c_td = v3(&plan["c_td"]);
    assert!((c_td[0] - x).abs() < 1e-9, "{} vs {x}", c_td[0]);
    assert!(c_td[1].abs() < 1e-12);
    assert!((plan["flight_time"].as_f64().unwrap() - t).abs() < 1e-9);
}

#[test]
fn check_agrees_with_stepped_flight() {
    let dir = tempfile::tempdir().unwrap();
    let (mut disagreements, mut accepts) = (0, 0);
    for (i, (r_v, theta_v, z)) in [(0.6, 1.5, 0.05), (1.0, 1.2, 0.02), (2.0, 1.4, 0.15), (3.0, 0.9, 0.3), (1.5, 1.5, 0.1)]
        .into_iter()
        .enumerate()
    {
        let action = action_file(dir.path(), &format!("a{i}.toml"), &[("r_v", r_v), ("theta_v", theta_v)]);
        let out = dir.path().join(format!("c{i}"));
        let o = pronk(&["check", "--action", s(&action), "--target", &format!("0,0,{z}"), "--out", s(&out)]);
        assert!(matches!(o.status.code(), Some(0) | Some(2)));
        let accepted = o.status.code() == Some(0);
        let start_z = v3(&json(&out.join("check.json"))["start"])[2];
        // highest point of the stepped vertical motion against the target COM height
        let (mut zc, mut vz, mut top) = (0.3, r_v * theta_v.sin(), 0.3f64);
        let h = 1e-5;
        while vz > 0.0 {
            zc += vz * h - 0.5 * G * h * h;
            vz -= G * h;
            top = top.max(zc);
        }
        let reachable = top + 1e-6 >= start_z + z;
        disagreements += (reachable != accepted) as usize;
        accepts += accepted as usize;
    }
    assert_eq!(disagreements, 0);
    assert!(accepts > 0 && accepts < 5, "{accepts} of 5 accepted");
}

#[test]
fn ideal_simulation_lands_on_prediction_and_repeats() {
    let dir = tempfile::tempdir().unwrap();
    let action = action_file(dir.path(), "a.toml", &[("r_v", 2.2), ("theta_v", 1.0)]);
    let plan = dir.path().join("plan");
    assert!(pronk(&["plan", "--action", s(&action), "--target", "0.4,0,0", "--out", s(&plan)]).status.success());
    let mut traces = Vec::new();
    for run in ["s1", "s2"] {
        let out = dir.path().join(run);
        let o = pronk(&[
            "simulate", "--action", s(&action), "--target", "0.4,0,0", "--mode", "ideal", "--seed", "4", "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let outcome = json(&out.join("outcome.json"));
        assert_eq!(outcome["failure"], "none");
        let predicted = v3(&json(&plan.join("plan.json"))["c_td"]);
        let landed = v3(&outcome["final_position"]);
        for i in 0..3 {
            assert!((predicted[i] - landed[i]).abs() < 1e-9);
        }
        traces.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn tracked_simulation_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let action = action_file(dir.path(), "a.toml", &[("r_v", 2.2), ("theta_v", 1.2)]);
    let files: Vec<_> = ["t1", "t2"]
        .iter()
        .map(|run| {
            let out = dir.path().join(run);
            let o = pronk(&[
                "simulate", "--action", s(&action), "--target", "0.3,0,0", "--mode", "tracked", "--out", s(&out),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            (std::fs::read(out.join("trace.csv")).unwrap(), std::fs::read(out.join("outcome.json")).unwrap())
        })
        .collect();
    assert_eq!(files[0], files[1]);
    assert!(files[0].0.len() > 1000);
}

const TINY: &str = r#"
[policy]
hidden = [16, 16]

[train]
iterations = 6
n_envs = 4
seed = 11
checkpoint_every = 2

[task]
x = [0.0, 0.6]
y = [-0.2, 0.2]
z = [0.0, 0.0]
yaw_deg = [0.0, 0.0]
roll_pitch_max_deg = 0.0

[episode]
ideal_dt = 0.005
"#;

const SMALL_SWEEP: &str = r#"
region_samples = 12
avt_samples = 3
height_grid = [2, 2]
height_step = 0.2
yaw_step_deg = 45.0
"#;

fn train_tiny(dir: &Path, out: &str, iterations: Option<&str>) -> Output {
    let cfg = dir.join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.join(out);
    let mut args = vec!["train", "--train", s(&cfg), "--out", s(&out)];
    if let Some(n) = iterations {
        args.extend(["--iterations", n]);
    }
    let args: Vec<String> = args.into_iter().map(String::from).collect();
    Command::new(BIN).args(&args).output().unwrap()
}

#[test]
fn train_writes_one_metrics_row_per_iteration_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_tiny(dir.path(), "full", None).status.success());
    let metrics = std::fs::read_to_string(dir.path().join("full/metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 6);
    assert!(metrics.starts_with("iteration,mean_reward,mean_total_penalty,"));
    assert!(dir.path().join("full/metrics.meta.json").exists());

    assert!(train_tiny(dir.path(), "split", Some("3")).status.success());
    let o = train_tiny(dir.path(), "split", None);
    assert!(String::from_utf8_lossy(&o.stdout).contains("resumed at 3"));
    for f in ["metrics.csv", "checkpoint.txt"] {
        assert_eq!(
            std::fs::read(dir.path().join("full").join(f)).unwrap(),
            std::fs::read(dir.path().join("split").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn eval_outputs_are_exact_and_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    assert!(train_tiny(dir.path(), "run", None).status.success());
    let ckpt = dir.path().join("run/checkpoint.txt");
    let sweep = dir.path().join("sweep.toml");
    std::fs::write(&sweep, SMALL_SWEEP).unwrap();

    let bad = pronk(&["eval", "--checkpoint", s(&ckpt), "--suite", "bogus", "--out", s(dir.path())]);
    assert_eq!(bad.status.code(), Some(1));

    let outs: Vec<PathBuf> = ["e1", "e2"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        let o = pronk(&[
            "eval", "--checkpoint", s(&ckpt), "--sweep", s(&sweep), "--suite", "region,avt,height,yaw,robust",
            "--runs", "3", "--damping-max", "0.2", "--seed", "5", "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let region = std::fs::read_to_string(outs[0].join("region.csv")).unwrap();
    assert_eq!(region.lines().next().unwrap(), "x,y,landing_error,pass");
    assert_eq!(region.lines().count(), 1 + 12);
    let robust = std::fs::read_to_string(outs[0].join("robust.csv")).unwrap();
    assert_eq!(robust.lines().count(), 1 + 6);
    let meta = json(&outs[0].join("robust.meta.json"));
    assert_eq!(meta["mode"], "tracked");
    assert_eq!(meta["seed"], 5);
    assert_eq!(json(&outs[0].join("yaw.meta.json"))["mode"], "ideal");
    for name in [
        "region.csv", "avt_forward.csv", "avt_backward.csv", "height_up.csv", "height_down.csv", "yaw.csv", "robust.csv",
        "region.meta.json", "robust.meta.json",
    ] {
        assert_eq!(std::fs::read(outs[0].join(name)).unwrap(), std::fs::read(outs[1].join(name)).unwrap(), "{name}");
    }
}

#[test]
fn usage_errors_exit_with_code_1() {
    assert_eq!(pronk(&["plan"]).status.code(), Some(1));
    assert_eq!(pronk(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(pronk(&["--help"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = pronk(&["train", "--train", s(&missing), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
}
