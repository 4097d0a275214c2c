//! Acceptance suite. Every criterion runs in isolation (a panic fails only
//! that criterion), prints one verdict line, and the test fails at the end if
//! any criterion did.

use std::fmt::Display;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pronk_core::ballistics::{BallisticState, Ballistics};
use pronk_core::bezier::ControlPolygon;
use pronk_core::quadruped::kinematics::{leg_fk, leg_ik, leg_jacobian, whole_body_ik, BasePose};
use pronk_core::quadruped::{QuadrupedModel, StanceState, NUM_LEGS};
use pronk_core::reward::{landing_reward_from, total_reward, Penalties, PenaltyKind, RewardParams};
use pronk_core::simulator::stance::stance_step;
use pronk_core::simulator::{start_feet, start_pose, EpisodeConfig, SimMode};
use pronk_core::thrust::{
    decode, solve_orientation_bezier, solve_position_bezier, ActionRanges, JumpAction, JumpCommand,
    LiftoffBoundary, ThrustTrajectory, UarmInterpolation, ACTION_DIM, DEFAULT_FLOOR_CLEARANCE,
};
use pronk_eval::{
    failed, linspace, position_command, position_error, robustness_matrix, yaw_error_deg, Evaluator,
    RobustnessSpec,
};
use pronk_learn::train::{CHECKPOINT_FILE, METRICS_FILE};
use pronk_learn::{ActorCritic, Checkpoint, ExperimentConfig, JumpEnv, MetricsRow, Trainer};

type Verdict = Result<String, String>;

const BIN: &str = env!("CARGO_BIN_EXE_pronk");

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn err<E: Display>(e: E) -> String {
    e.to_string()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn v3(x: Vec<f64>) -> Vector3<f64> {
    Vector3::from_column_slice(&x)
}

fn uniform3(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vector3<f64> {
    Vector3::new(r.random_range(lo..hi), r.random_range(lo..hi), r.random_range(lo..hi))
}

fn robot() -> QuadrupedModel {
    QuadrupedModel::from_file(config("go1.toml")).expect("robot config")
}

/// Bypasses the test harness capture so the verdicts always reach the log.
fn emit(line: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

struct Report {
    failed: Vec<usize>,
}

impl Report {
    fn run(&mut self, n: usize, name: &str, f: impl FnOnce() -> Verdict) {
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match &verdict {
            Ok(d) => ("PASS", d),
            Err(d) => ("FAIL", d),
        };
        emit(&format!("criterion {n:>2} {tag} {name}: {detail} ({secs:.1} s)"));
        if verdict.is_err() {
            self.failed.push(n);
        }
    }
}

fn random_action(r: &mut ChaCha8Rng) -> JumpAction {
    let unit: Vec<f64> = (0..ACTION_DIM).map(|_| r.random_range(-1.0..=1.0)).collect();
    JumpAction::from_array(&ActionRanges::default().denormalize(&unit))
}

fn bezier_cubics() -> Verdict {
    let mut r = rng(101);
    let cases: Vec<(ControlPolygon, f64)> = (0..10_000)
        .map(|_| {
            let pts: Vec<[f64; 3]> = (0..4).map(|_| uniform3(&mut r, -1.0, 1.0).into()).collect();
            let duration = r.random_range(0.2..2.0);
            let t = duration * r.random_range(0.01..0.99);
            (ControlPolygon::from_points3(&pts, duration).unwrap(), t)
        })
        .collect();

    let clock = Instant::now();
    let (mut val, mut der) = (0.0f64, 0.0f64);
    for (p, t) in &cases {
        let (x, dx) = p.eval_cubic_explicit(*t).map_err(err)?;
        let g = p.eval(*t).map_err(err)?;
        let dg = p.derivative().eval(*t).map_err(err)?;
        val = val.max((v3(x) - v3(g)).amax());
        der = der.max((v3(dx) - v3(dg)).amax());
    }
    let elapsed = clock.elapsed().as_secs_f64();

    let mut fd = 0.0f64;
    for (p, t) in &cases {
        let h = 1e-5 * p.duration();
        let d = v3(p.derivative().eval(*t).map_err(err)?);
        let num = (v3(p.eval(t + h).map_err(err)?) - v3(p.eval(t - h).map_err(err)?)) / (2.0 * h);
        fd = fd.max((num - d).norm() / d.norm().max(1.0));
    }
    ensure(val <= 1e-12 && der <= 1e-12, || format!("explicit vs generic: value {val:.2e}, derivative {der:.2e}"))?;
    ensure(fd <= 1e-6, || format!("finite-difference error {fd:.2e}"))?;
    ensure(elapsed < 1.0, || format!("took {elapsed:.3} s"))?;
    Ok(format!(
        "10^4 cubics, explicit-generic {:.1e}, derivative {der:.1e}, FD rel {fd:.1e}, {elapsed:.3} s",
        val
    ))
}

fn boundary_conditions() -> Verdict {
    let mut r = rng(102);
    let mut worst = [0.0f64; 8];
    for _ in 0..1000 {
        let a = random_action(&mut r);
        let c0 = Vector3::new(r.random_range(-0.2..0.2), r.random_range(-0.2..0.2), r.random_range(0.25..0.35));
        let cdot0 = uniform3(&mut r, -0.5, 0.5);
        let phi0 = uniform3(&mut r, -0.2, 0.2);
        let phidot0 = uniform3(&mut r, -0.5, 0.5);
        let target = c0 + Vector3::new(r.random_range(-0.6..1.2), r.random_range(-0.6..0.6), r.random_range(-0.3..0.3));
        let b = decode(&a, &c0, &phi0, &target).map_err(err)?;
        let p = solve_position_bezier(&c0, &cdot0, &b).map_err(err)?;
        let o = solve_orientation_bezier(&phi0, &phidot0, &b.phi_lo, &b.phidot_lo, b.t_th).map_err(err)?;
        let (dp, dq) = (p.derivative(), o.derivative());
        let at = |c: &ControlPolygon, t: f64| v3(c.eval(t).unwrap());
        let errs = [
            (at(&p, 0.0) - c0).norm(),
            (at(&dp, 0.0) - cdot0).norm(),
            (at(&p, b.t_th_b) - b.c_lo_b).norm(),
            (at(&dp, b.t_th_b) - b.cdot_lo_b).norm(),
            (at(&o, 0.0) - phi0).norm(),
            (at(&dq, 0.0) - phidot0).norm(),
            (at(&o, b.t_th) - b.phi_lo).norm(),
            (at(&dq, b.t_th) - b.phidot_lo).norm(),
        ];
        for (w, e) in worst.iter_mut().zip(errs) {
            *w = w.max(e);
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    ensure(max <= 1e-9, || format!("worst boundary errors {:?}", worst.map(|w| format!("{w:.2e}"))))?;
    Ok(format!("10^3 boundaries, worst of 8 boundary values {max:.1e}"))
}

/// First downward crossing of `z_tg` by RK4 integration, refined inside the
/// step by cubic Hermite interpolation.
fn rk4_landing(s: &BallisticState, z_tg: f64, g: f64, dt: f64) -> Vector3<f64> {
    let acc = Vector3::new(0.0, 0.0, -g);
    let (mut p, mut v) = (s.c_lo, s.cdot_lo);
    loop {
        let (k1p, k1v) = (v, acc);
        let (k2p, k2v) = (v + 0.5 * dt * k1v, acc);
        let (k3p, k3v) = (v + 0.5 * dt * k2v, acc);
        let (k4p, k4v) = (v + dt * k3v, acc);
        let pn = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
        let vn = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if p.z >= z_tg && pn.z < z_tg {
            let hermite = |u: f64| {
                let (u2, u3) = (u * u, u * u * u);
                (2.0 * u3 - 3.0 * u2 + 1.0) * p
                    + (u3 - 2.0 * u2 + u) * dt * v
                    + (-2.0 * u3 + 3.0 * u2) * pn
                    + (u3 - u2) * dt * vn
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if hermite(mid).z >= z_tg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return hermite(0.5 * (lo + hi));
        }
        p = pn;
        v = vn;
    }
}

fn ballistics() -> Verdict {
    let b = Ballistics::default();
    let mut r = rng(103);
    let mut landing = 0.0f64;
    for _ in 0..10_000 {
        let c = Vector3::new(r.random_range(-0.5..0.5), r.random_range(-0.5..0.5), r.random_range(0.2..0.6));
        let v = Vector3::new(r.random_range(-3.0..3.0), r.random_range(-3.0..3.0), r.random_range(-1.0..4.0));
        let s = BallisticState::new(c, v);
        let (apex, _) = b.apex(&s);
        let z_tg = r.random_range(0.0..apex);
        let pred = b.predict_landing(&s, z_tg).map_err(err)?;
        landing = landing.max((pred.c_td - rk4_landing(&s, z_tg, b.g, 1e-5)).norm());
    }

    let (mut round_trip, mut used) = (0.0f64, 0usize);
    for _ in 0..10_000 {
        let c_lo = Vector3::new(0.0, r.random_range(-0.3..0.3), r.random_range(0.2..0.5));
        let sign = if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let gap = sign * r.random_range(0.1..1.2);
        let c_tg = c_lo + Vector3::new(gap, 0.0, r.random_range(-0.3..0.3));
        let vx = sign * r.random_range(0.5..3.0);
        let vz = b.vz_of_vx(&c_lo, &c_tg, vx).map_err(err)?;
        // only arrivals while descending are landings
        if vz - b.g * gap / vx >= 0.0 {
            continue;
        }
        used += 1;
        let p = b
            .predict_landing(&BallisticState::new(c_lo, Vector3::new(vx, 0.0, vz)), c_tg.z)
            .map_err(err)?;
        round_trip = round_trip.max((p.c_td - c_tg).norm());
    }
    ensure(landing <= 1e-6, || format!("landing vs RK4 {landing:.2e} m"))?;
    ensure(round_trip <= 1e-9, || format!("round trip {round_trip:.2e} m"))?;
    Ok(format!(
        "10^4 states, landing vs RK4 {landing:.1e} m; round trip {round_trip:.1e} m over {used} descending samples"
    ))
}

/// Highest COM elevation reached, by RK4 integration until the COM descends.
fn brute_force_apex(s: &BallisticState, g: f64, dt: f64) -> f64 {
    let (mut z, mut vz, mut top) = (s.c_lo.z, s.cdot_lo.z, s.c_lo.z);
    while vz > 0.0 {
        let k = [vz, vz - 0.5 * dt * g, vz - 0.5 * dt * g, vz - dt * g];
        z += dt / 6.0 * (k[0] + 2.0 * k[1] + 2.0 * k[2] + k[3]);
        vz -= dt * g;
        top = top.max(z);
    }
    top
}

fn safety_filter() -> Verdict {
    let b = Ballistics::default();
    let mut r = rng(104);
    let (mut disagree, mut accepted, mut margin) = (0usize, 0usize, f64::INFINITY);
    for _ in 0..10_000 {
        let c = Vector3::new(r.random_range(-0.5..0.5), r.random_range(-0.5..0.5), r.random_range(0.2..0.5));
        let v = Vector3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-1.0..3.0));
        let s = BallisticState::new(c, v);
        let target = Vector3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(0.0..0.9));
        let top = brute_force_apex(&s, b.g, 1e-5);
        let reachable = top >= target.z;
        let accept = b.safety_filter(&s, &target).is_accept();
        disagree += (reachable != accept) as usize;
        accepted += accept as usize;
        margin = margin.min((top - target.z).abs());
    }
    ensure(disagree == 0, || format!("{disagree} disagreements"))?;
    ensure(accepted > 1000 && accepted < 9000, || format!("degenerate sample: {accepted} accepted"))?;
    Ok(format!("10^4 pairs, 0 disagreements ({accepted} accepted, closest apex margin {margin:.1e} m)"))
}

fn uarm_junction() -> Verdict {
    let mut r = rng(105);
    let c0 = Vector3::new(0.0, 0.0, 0.3);
    let (mut pos, mut vel, mut speed, mut arc) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let mut a = random_action(&mut r);
        a.d = r.random_range(0.01..0.3);
        let target = Vector3::new(r.random_range(-0.6..1.2), r.random_range(-0.6..0.6), 0.3);
        let b = decode(&a, &c0, &Vector3::zeros(), &target).map_err(err)?;
        let traj = ThrustTrajectory::new(&c0, &Vector3::zeros(), &Vector3::zeros(), &Vector3::zeros(), &b, UarmInterpolation::Kinematic)
            .map_err(err)?;
        let tb = b.t_th_b;
        let left = traj.sample(tb).map_err(err)?;
        // right limit from a sample just past the junction, extrapolated back
        let h = 1e-9;
        let right = traj.sample(tb + h).map_err(err)?;
        pos = pos.max((right.c - right.cdot * h - left.c).norm());
        vel = vel.max((right.cdot - right.cddot * h - left.cdot).norm());
        ensure(b.cdot_lo_e == a.k * b.cdot_lo_b, || "lift-off velocity is not k times the Bezier velocity".into())?;
        let end = traj.sample(b.t_th).map_err(err)?;
        speed = speed.max((end.cdot.norm() - a.k * b.cdot_lo_b.norm()).abs());
        arc = arc.max(((end.c - b.c_lo_b).norm() - a.d).abs());
    }
    ensure(pos <= 1e-9 && vel <= 1e-9, || format!("junction jump: position {pos:.2e}, velocity {vel:.2e}"))?;
    ensure(speed <= 1e-9, || format!("exit speed error {speed:.2e}"))?;
    ensure(arc <= 1e-9, || format!("arc length error {arc:.2e}"))?;

    // 3 m/s lift-off: explosive tail versus one cubic over the same thrust time
    let model = robot();
    let start = start_pose(&model).position;
    let deg = f64::to_radians;
    let action = JumpAction {
        t_th_b: 0.6,
        r_p: 0.3,
        theta_p: deg(75.0),
        r_v: 1.0,
        theta_v: deg(75.0),
        k: 3.0,
        d: 0.1,
        phi_lo: Vector3::zeros(),
        phidot_lo: Vector3::zeros(),
    };
    let target = start + Vector3::new(0.5, 0.0, 0.0);
    let b = decode(&action, &start, &Vector3::zeros(), &target).map_err(err)?;
    let build = |b: &LiftoffBoundary| {
        ThrustTrajectory::new(&start, &Vector3::zeros(), &Vector3::zeros(), &Vector3::zeros(), b, UarmInterpolation::Kinematic)
    };
    let explosive = build(&b).map_err(err)?;
    let pure = build(&LiftoffBoundary {
        c_lo_b: b.c_lo_e,
        cdot_lo_b: b.cdot_lo_e,
        t_th_b: b.t_th,
        t_th_e: 0.0,
        a_uarm: 0.0,
        k_effective: 1.0,
        ..b
    })
    .map_err(err)?;
    let lift_speed = b.cdot_lo_e.norm();
    let (z_uarm, z_pure) = (explosive.min_height(1e-3), pure.min_height(1e-3));
    ensure((lift_speed - 3.0).abs() < 1e-12, || format!("scenario lift-off speed {lift_speed}"))?;
    ensure(z_uarm >= DEFAULT_FLOOR_CLEARANCE, || format!("explosive reference dips to {z_uarm:.3} m"))?;
    ensure(z_pure < DEFAULT_FLOOR_CLEARANCE, || format!("pure Bezier stays at {z_pure:.3} m"))?;
    Ok(format!(
        "10^3 curves, junction {:.1e}/{vel:.1e}, speed {speed:.1e}, arc {arc:.1e}; 3 m/s lift-off over {:.3} s: min z {z_uarm:.3} m vs pure Bezier {z_pure:.3} m",
        pos, b.t_th
    ))
}

fn statics() -> Verdict {
    let model = robot();
    let cfg = EpisodeConfig {
        mode: SimMode::Tracked,
        ..EpisodeConfig::default()
    };
    let nominal = start_pose(&model);
    let feet = start_feet(&model, &nominal);
    let weight = model.mass * cfg.g;
    let mut r = rng(106);
    let (mut wrench, mut vertical) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let pose = if i == 0 {
            nominal
        } else {
            let dc = Vector3::new(r.random_range(-0.03..0.03), r.random_range(-0.03..0.03), r.random_range(-0.03..0.03));
            let de = Vector3::new(r.random_range(-0.1..0.1), r.random_range(-0.1..0.1), r.random_range(-0.3..0.3));
            BasePose::new(nominal.position + dc, de)
        };
        let q = whole_body_ik(&model, &pose, &feet).map_err(err)?;
        let zero = [Vector3::zeros(); NUM_LEGS];
        let state = StanceState {
            pose,
            cdot: Vector3::zeros(),
            omega: Vector3::zeros(),
            q,
            qdot: zero,
            foot_world: feet,
        };
        let step = stance_step(&state, &q, &zero, &model, &model, &cfg);
        let mut force = Vector3::new(0.0, 0.0, -weight);
        let mut moment = Vector3::zeros();
        for leg in 0..NUM_LEGS {
            force += step.forces[leg];
            moment += (feet[leg] - pose.position).cross(&step.forces[leg]);
        }
        wrench = wrench.max(force.norm().max(moment.norm()));
        let fz: f64 = step.forces.iter().map(|f| f.z).sum();
        vertical = vertical.max((fz - weight).abs());
    }
    ensure(wrench <= 1e-8, || format!("net wrench {wrench:.2e}"))?;
    ensure(vertical <= 1e-6, || format!("vertical force error {vertical:.2e} N"))?;
    Ok(format!("200 held stances, net wrench {wrench:.1e}, |sum fz - mg| {vertical:.1e} N"))
}

fn kinematics() -> Verdict {
    let model = robot();
    let mut r = rng(107);
    let (mut round_trip, mut jac) = (0.0f64, 0.0f64);
    for i in 0..10_000 {
        let leg = i % NUM_LEGS;
        let q = Vector3::new(r.random_range(-0.8..0.8), r.random_range(-2.5..0.6), r.random_range(0.9..2.8));
        let foot = leg_fk(&model, &q, leg);
        let back = leg_ik(&model, &foot, leg).map_err(err)?;
        round_trip = round_trip.max((leg_fk(&model, &back, leg) - foot).norm());

        let j = leg_jacobian(&model, &q, leg);
        let h = 1e-6;
        let mut fd = j;
        for k in 0..3 {
            let mut dq = Vector3::zeros();
            dq[k] = h;
            fd.set_column(k, &((leg_fk(&model, &(q + dq), leg) - leg_fk(&model, &(q - dq), leg)) / (2.0 * h)));
        }
        jac = jac.max((fd - j).norm() / j.norm());
    }
    ensure(round_trip <= 1e-10, || format!("IK/FK round trip {round_trip:.2e} m"))?;
    ensure(jac <= 1e-6, || format!("Jacobian FD error {jac:.2e}"))?;
    Ok(format!("10^4 points, round trip {round_trip:.1e} m, Jacobian FD rel {jac:.1e}"))
}

fn reward_properties() -> Verdict {
    let mut r = rng(108);
    let mut checked = 0usize;
    for file in ["reward.toml", "reward_flat.toml", "reward_omni.toml"] {
        let params = RewardParams::from_file(config(file)).map_err(err)?;
        let e = linspace(0.0, 2.0, 100);
        let dc = linspace(0.0, 2.0, 100);
        let grid: Vec<Vec<f64>> = e.iter().map(|&e| dc.iter().map(|&d| landing_reward_from(e, d, &params)).collect()).collect();
        for i in 0..100 {
            for j in 0..100 {
                let r_lt = grid[i][j];
                if i + 1 < 100 {
                    ensure(grid[i + 1][j] < r_lt, || format!("{file}: not decreasing in the error at ({i}, {j})"))?;
                }
                if j + 1 < 100 {
                    ensure(grid[i][j + 1] > r_lt, || format!("{file}: not increasing in the distance at ({i}, {j})"))?;
                }
                let mut p = Penalties::default();
                for kind in PenaltyKind::ALL {
                    if r.random_bool(0.5) {
                        p.set(kind, r.random_range(0.0..5.0));
                    }
                }
                let total = total_reward(r_lt, &p, &params.weights);
                ensure((0.0..=r_lt).contains(&total), || format!("{file}: R = {total} outside [0, {r_lt}]"))?;
                ensure(total_reward(r_lt, &Penalties::default(), &params.weights) == r_lt, || {
                    format!("{file}: zero penalties do not give R_lt")
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} grid points over 3 reward configs, monotone and 0 <= R <= R_lt"))
}

fn collect_files(dir: &Path, base: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) -> std::io::Result<()> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let path = e.path();
        if path.is_dir() {
            collect_files(&path, base, out)?;
        } else {
            out.push((path.strip_prefix(base).unwrap().to_path_buf(), std::fs::read(&path)?));
        }
    }
    Ok(())
}

fn pronk(args: &[&str]) -> Result<(), String> {
    let out = Command::new(BIN).args(args).output().map_err(err)?;
    ensure(out.status.success(), || {
        format!("`pronk {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn determinism() -> Verdict {
    let clock = Instant::now();
    let tmp = tempfile::tempdir().map_err(err)?;
    let (robot, reward, train) = (config("go1.toml"), config("reward_flat.toml"), config("train_smoke.toml"));
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let mut runs = Vec::new();
    for name in ["a", "b"] {
        let root = tmp.path().join(name);
        let (train_dir, eval_dir) = (root.join("train"), root.join("eval"));
        let common = ["--robot", &s(&robot), "--reward", &s(&reward), "--train", &s(&train)];
        pronk(&[&["train"], &common[..], &["--out", &s(&train_dir)]].concat())?;
        let ckpt = s(&train_dir.join(CHECKPOINT_FILE));
        pronk(
            &[
                &["eval"],
                &common[..],
                &["--checkpoint", &ckpt, "--suite", "region,avt,height,yaw,robust", "--out", &s(&eval_dir)],
            ]
            .concat(),
        )?;
        let mut files = Vec::new();
        collect_files(&root, &root, &mut files).map_err(err)?;
        runs.push(files);
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let (a, b) = (&runs[0], &runs[1]);
    let names = |r: &Vec<(PathBuf, Vec<u8>)>| r.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    ensure(names(a) == names(b), || "the two runs wrote different file sets".into())?;
    let differing: Vec<String> = a.iter().zip(b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.display().to_string()).collect();
    ensure(differing.is_empty(), || format!("files differ: {}", differing.join(", ")))?;
    let metrics = a.iter().find(|(p, _)| p.ends_with(METRICS_FILE)).ok_or("no metrics file")?;
    let rows = String::from_utf8_lossy(&metrics.1).lines().count() - 1;
    ensure(rows == 50, || format!("{rows} metrics rows"))?;
    let csvs = a.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "csv")).count();
    ensure(elapsed < 300.0, || format!("took {elapsed:.0} s"))?;
    Ok(format!(
        "2 x (train 50 it x 8 envs + 5 suites): {} files ({csvs} CSV) byte-identical, {elapsed:.0} s",
        a.len()
    ))
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn train_flat() -> Result<(ActorCritic, Vec<MetricsRow>), String> {
    let exp = ExperimentConfig::from_file(config("train_flat.toml")).map_err(err)?;
    let reward = RewardParams::from_file(config("reward_flat.toml")).map_err(err)?;
    let env = JumpEnv::new(robot(), reward, exp.episode.clone(), exp.task.clone());
    let mut trainer = Trainer::new(&env, &exp.policy, exp.train.clone());
    let rows = trainer.run(|_, _| true).map_err(err)?;
    Ok((trainer.policy().clone(), rows))
}

fn flat_accuracy(policy: &ActorCritic, iterations: usize) -> Verdict {
    let exp = ExperimentConfig::from_file(config("train_flat.toml")).map_err(err)?;
    let eval = Evaluator::new(policy, robot(), exp.episode.clone());
    let cmds: Vec<JumpCommand> = linspace(0.0, 1.2, 25)
        .into_iter()
        .flat_map(|x| linspace(-0.3, 0.3, 13).into_iter().map(move |y| (x, y)))
        .filter(|(x, y)| x.hypot(*y) <= 0.5 + 1e-12)
        .map(|(x, y)| position_command(x, y, 0.0))
        .collect();
    let outcomes = eval.run_all(&cmds);
    let errors: Vec<f64> = outcomes.iter().map(position_error).collect();
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let worst = errors.iter().cloned().fold(0.0, f64::max);
    let fails = outcomes.iter().filter(|o| failed(o)).count();
    let detail = format!(
        "{} targets within 0.5 m after {iterations} it: mean error {mean:.3} m, max {worst:.3} m, {fails} failed",
        cmds.len()
    );
    ensure(mean <= 0.10, || detail.clone())?;
    Ok(detail)
}

fn penalty_convergence(rows: &[MetricsRow]) -> Verdict {
    ensure(rows.len() > 250, || format!("only {} iterations", rows.len()))?;
    let early = median(rows[..10].iter().map(|r| r.mean_total_penalty).collect());
    let late = median(rows[250..].iter().map(|r| r.mean_total_penalty).collect());
    let ratio = late / early;
    let detail = format!("median penalty {late:.4} (it 250-{}) vs {early:.4} (it 0-9), ratio {ratio:.3}", rows.len() - 1);
    ensure(ratio <= 0.10, || detail.clone())?;
    Ok(detail)
}

fn in_place_yaw(deg: f64) -> JumpCommand {
    JumpCommand::new(Vector3::zeros(), Vector3::new(0.0, 0.0, deg.to_radians()))
}

/// Mean relative yaw error over in-place commands, and the per-command errors.
fn yaw_scores(eval: &Evaluator, degs: &[f64]) -> (f64, Vec<(f64, f64, bool)>) {
    let cmds: Vec<JumpCommand> = degs.iter().map(|&d| in_place_yaw(d)).collect();
    let rows: Vec<(f64, f64, bool)> = eval
        .run_all(&cmds)
        .iter()
        .zip(degs)
        .map(|(o, &d)| (d, yaw_error_deg(o), failed(o)))
        .collect();
    let score = rows
        .iter()
        .map(|&(d, e, f)| if f { 1.0 } else { e.abs() / d.abs() })
        .sum::<f64>()
        / rows.len() as f64;
    (score, rows)
}

/// Omnidirectional policy trained in ideal mode; the snapshot is chosen every
/// 25 iterations from iteration 100 on yaw commands disjoint from the test set.
fn train_omni() -> Result<(ActorCritic, usize, f64), String> {
    let exp = ExperimentConfig::from_file(config("train_omni.toml")).map_err(err)?;
    let reward = RewardParams::from_file(config("reward_omni.toml")).map_err(err)?;
    let model = robot();
    let env = JumpEnv::new(model.clone(), reward, exp.episode.clone(), exp.task.clone());
    let validation = [-40.0, -35.0, -20.0, -10.0, 10.0, 20.0, 35.0, 40.0];
    let mut best: Option<(f64, usize, ActorCritic)> = None;
    let mut trainer = Trainer::new(&env, &exp.policy, exp.train.clone());
    trainer
        .run(|t, _| {
            let it = t.iteration();
            if it >= 100 && it % 25 == 0 {
                let eval = Evaluator::new(t.policy(), model.clone(), exp.episode.clone());
                let (score, _) = yaw_scores(&eval, &validation);
                if best.as_ref().is_none_or(|b| score < b.0) {
                    best = Some((score, it, t.policy().clone()));
                }
            }
            true
        })
        .map_err(err)?;
    let (score, it, policy) = best.ok_or("no snapshot evaluated")?;
    Ok((policy, it, score))
}

fn yaw_accuracy(policy: &ActorCritic, it: usize, val: f64) -> Verdict {
    let exp = ExperimentConfig::from_file(config("train_omni.toml")).map_err(err)?;
    let eval = Evaluator::new(policy, robot(), exp.episode.clone());
    let (_, rows) = yaw_scores(&eval, &[-45.0, -30.0, -15.0, 15.0, 30.0, 45.0]);
    let cells: Vec<String> = rows
        .iter()
        .map(|(d, e, f)| format!("{d:+.0}:{e:+.2}{}", if *f { "!" } else { "" }))
        .collect();
    let detail = format!(
        "snapshot it {it} (validation {val:.3}); yaw error deg {}",
        cells.join(" ")
    );
    let bad = rows.iter().any(|&(d, e, f)| f || e.abs() > 0.1 * d.abs());
    ensure(!bad, || detail.clone())?;
    Ok(detail)
}

/// Tracked-mode fine-tuning from the selected omnidirectional policy; the
/// snapshot with the lowest validation error (FWD and DIAG excluded) is kept.
fn fine_tune(start: &ActorCritic) -> Result<(ActorCritic, usize, f64), String> {
    let exp = ExperimentConfig::from_file(config("train_omni_tracked.toml")).map_err(err)?;
    let reward = RewardParams::from_file(config("reward_omni.toml")).map_err(err)?;
    let model = robot();
    let env = JumpEnv::new(model.clone(), reward, exp.episode.clone(), exp.task.clone());
    let mut r = rng(109);
    let (fwd, diag) = (Vector3::new(0.4, 0.0, 0.0), Vector3::new(0.3, 0.2, 0.0));
    let mut validation = Vec::new();
    while validation.len() < 24 {
        let cmd = JumpCommand::from_state(&exp.task.sample(&mut r));
        if (cmd.delta_c - fwd).norm() > 0.15 && (cmd.delta_c - diag).norm() > 0.15 {
            validation.push(cmd);
        }
    }
    let score = |policy: &ActorCritic| {
        let eval = Evaluator::new(policy, model.clone(), exp.episode.clone());
        let outcomes = eval.run_all(&validation);
        outcomes.iter().map(|o| if failed(o) { 1.0 } else { position_error(o) }).sum::<f64>() / outcomes.len() as f64
    };
    let mut ckpt = Checkpoint::default();
    ckpt.put_policy(start);
    let mut trainer = Trainer::warm_start(&env, exp.train.clone(), &ckpt).map_err(err)?;
    let mut best = (score(start), 0, start.clone());
    trainer
        .run(|t, _| {
            if t.iteration() % 10 == 0 {
                let s = score(t.policy());
                if s < best.0 {
                    best = (s, t.iteration(), t.policy().clone());
                }
            }
            true
        })
        .map_err(err)?;
    Ok((best.2, best.1, best.0))
}

fn robustness(start: &ActorCritic) -> Verdict {
    let (policy, it, val) = fine_tune(start)?;
    let exp = ExperimentConfig::from_file(config("train_omni_tracked.toml")).map_err(err)?;
    let eval = Evaluator::new(&policy, robot(), exp.episode.clone());
    let spec = RobustnessSpec::default();
    let rows = robustness_matrix(&eval, &spec);
    for row in &rows {
        emit(&format!(
            "    {:<4} {:<3} e_x {:+.3} ± {:.3}  e_y {:+.3} ± {:.3}  e_psi {:+.2} ± {:.2} deg  failures {}/{}",
            row.jump.as_str(),
            row.test.as_str(),
            row.e_x_mean,
            row.e_x_std,
            row.e_y_mean,
            row.e_y_std,
            row.e_psi_mean,
            row.e_psi_std,
            row.failures,
            row.runs
        ));
    }
    ensure(rows.len() == 6, || format!("{} rows", rows.len()))?;
    ensure(rows.iter().all(|r| r.runs == spec.runs), || "a row ran the wrong number of episodes".into())?;
    let std_of = |j: &str, t: &str| {
        rows.iter().find(|r| r.jump.as_str() == j && r.test.as_str() == t).map(|r| r.e_x_std).unwrap_or(f64::NAN)
    };
    let mut cmp = Vec::new();
    for j in ["FWD", "DIAG"] {
        let (nom, dv) = (std_of(j, "NOM"), std_of(j, "DV"));
        ensure(nom <= dv, || format!("{j}: NOM e_x std {nom:.4} > DV e_x std {dv:.4}"))?;
        cmp.push(format!("{j} NOM std {nom:.3} <= DV std {dv:.3}"));
    }
    Ok(format!(
        "fine-tuned snapshot it {it} (validation {val:.3} m); 6 x {} tracked runs; {}",
        spec.runs,
        cmp.join(", ")
    ))
}

#[test]
fn acceptance_criteria() {
    let mut report = Report { failed: Vec::new() };
    report.run(1, "Bezier evaluation", bezier_cubics);
    report.run(2, "thrust boundary conditions", boundary_conditions);
    report.run(3, "ballistic landing", ballistics);
    report.run(4, "safety filter", safety_filter);
    report.run(5, "UARM junction and clearance", uarm_junction);
    report.run(6, "stance statics", statics);
    report.run(7, "leg kinematics", kinematics);
    report.run(8, "reward properties", reward_properties);
    report.run(9, "determinism", determinism);

    let mut flat = None;
    report.run(10, "flat landing accuracy", || {
        let (policy, rows) = train_flat()?;
        let verdict = flat_accuracy(&policy, rows.len());
        flat = Some(rows);
        verdict
    });
    report.run(11, "penalty convergence", || penalty_convergence(flat.as_deref().ok_or("flat training unavailable")?));

    let mut omni = None;
    report.run(12, "in-place yaw accuracy", || {
        let (policy, it, val) = train_omni()?;
        let verdict = yaw_accuracy(&policy, it, val);
        omni = Some(policy);
        verdict
    });
    report.run(13, "robustness matrix", || robustness(omni.as_ref().ok_or("omnidirectional policy unavailable")?));

    assert!(report.failed.is_empty(), "failed criteria: {:?}", report.failed);
}
