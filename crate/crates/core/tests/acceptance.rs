//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mmwave_sc::config::{LosOverride, SimulationConfig, ZenithSlope};
use mmwave_sc::drop::{ChannelSnapshot, PowerDecay};
use mmwave_sc::evolution::{compute_slopes, step, EvolutionState, AOA, AOD, ZOA, ZOD};
use mmwave_sc::field::{build_map_pair, GridSpec};
use mmwave_sc::geometry::{wrap_pi, Vec2, SPEED_OF_LIGHT};
use mmwave_sc::los::{assign_los_state, LosModel, LosState};
use mmwave_sc::output::{ANGLES_FILE, CIR_FILE, DELAYS_FILE, SUMMARY_FILE};
use mmwave_sc::rng::{stream, Stream};
use mmwave_sc::{run_simulation, write_outputs, SimulationRun};

// pinned tolerances
const PL_SYMMETRY_DB: f64 = 0.02;
const PL_SHAPE_RUNTIME_S: f64 = 1.0;
const DELAY_STEP_NS: f64 = 0.834;
const DELAY_RUNS: u64 = 100;
const LINEARITY_ABS: f64 = 1e-12;
const BEARING_DEG: f64 = 0.5;
const SLOPE_FD_DT: f64 = 0.01;
const SLOPE_ABS: f64 = 1e-3;
const SLOPE_GEOMETRIES: usize = 100;
const ACF_SEEDS: u64 = 10;
const ACF_LAGS: [usize; 4] = [0, 5, 15, 45];
const ACF_FAR_MAX: f64 = 0.2;
const ACF_ORACLE_ABS: f64 = 0.08;
const LOS_SAMPLES: usize = 10_000;
const LOS_FREQ_RANGE: (f64, f64) = (0.47, 0.57);
const POWER_REL: f64 = 1e-9;

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn record(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        let line = format!(
            "{} criterion {id:>2} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
        println!("{line}");
        self.lines.push((pass, line));
    }
}

fn fig2() -> SimulationConfig {
    SimulationConfig::with_seed(2024)
}

fn los_forced(seed: u64) -> SimulationConfig {
    let mut c = SimulationConfig::with_seed(seed);
    c.scenario.los_override = LosOverride::Los;
    c
}

/// Worst `|Σ subpath mW - total| / total` over a run.
fn power_error(snaps: &[ChannelSnapshot]) -> f64 {
    snaps
        .iter()
        .map(|s| {
            let sum: f64 = s
                .clusters
                .iter()
                .flat_map(|c| &c.subpaths)
                .map(|p| p.power_mw)
                .sum();
            (sum - s.total_received_power_mw).abs() / s.total_received_power_mw
        })
        .fold(0.0, f64::max)
}

fn criterion_1(report: &mut Report, power: &mut Vec<f64>) {
    let run = run_simulation(&fig2()).expect("run");
    power.push(power_error(&run.snapshots));
    let n = run.snapshots.len();
    let dt = run.trajectory.update_interval;
    let epoch = n as f64 * dt;
    let pass = n == 80 && (epoch - 20.0).abs() < 1e-12 && run.snapshots[n - 1].time == 19.75;
    report.record(
        1,
        "trajectory count",
        pass,
        format!("{n} snapshots, epoch {epoch} s (expected 80 over 20 s)"),
    );
}

fn criterion_2(report: &mut Report, power: &mut Vec<f64>) {
    let mut cfg = los_forced(11);
    cfg.path_loss.sf_sigma_los_db = 0.0;
    cfg.path_loss.sf_sigma_nlos_db = 0.0;
    let t0 = Instant::now();
    let run = run_simulation(&cfg).expect("run");
    let elapsed = t0.elapsed().as_secs_f64();
    power.push(power_error(&run.snapshots));
    let pl: Vec<f64> = run.snapshots.iter().map(|s| s.path_loss_db).collect();

    // nondecreasing up to the first maximum, nonincreasing after it
    let peak = pl
        .iter()
        .enumerate()
        .fold(0, |best, (k, v)| if *v > pl[best] { k } else { best });
    let rises = pl[..=peak].windows(2).all(|w| w[1] >= w[0]);
    let falls = pl[peak..].windows(2).all(|w| w[1] <= w[0]);
    // largest dip below the running maximum, i.e. the worst unimodality break
    let (mut high, mut dip, mut dip_at) = (f64::NEG_INFINITY, 0.0, 0);
    for (k, v) in pl.iter().enumerate() {
        high = high.max(*v);
        if k > peak && high - v > dip && pl[k..].iter().any(|w| *w > *v) {
            (dip, dip_at) = (high - v, k);
        }
    }

    // PL(t) against PL(T - t) with T = 20 s: samples k and 80 - k
    let n = pl.len();
    let asym = (1..n)
        .map(|k| (pl[k] - pl[n - k]).abs())
        .fold(0.0, f64::max);

    let unimodal = rises && falls;
    let pass = unimodal && asym < PL_SYMMETRY_DB && elapsed < PL_SHAPE_RUNTIME_S;
    let dip = format!("{dip:.4} dB dip before a later rise at step {dip_at}");
    report.record(
        2,
        "path-loss shape",
        pass,
        format!(
            "unimodal {unimodal} ({dip}); max |PL(t)-PL(T-t)| {asym:.2e} dB (< {PL_SYMMETRY_DB}); {elapsed:.3} s (< {PL_SHAPE_RUNTIME_S} s)"
        ),
    );
}

fn criterion_3(report: &mut Report, power: &mut Vec<f64>) {
    let mut worst: f64 = 0.0;
    let mut violations = 0usize;
    let mut checked = 0usize;
    for seed in 0..DELAY_RUNS {
        let run = run_simulation(&SimulationConfig::with_seed(seed)).expect("run");
        power.push(power_error(&run.snapshots));
        for w in run.snapshots.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            for cb in &b.clusters {
                let Some(ca) = a.clusters.iter().find(|c| c.id == cb.id) else {
                    continue;
                };
                for sb in &cb.subpaths {
                    let Some(sa) = ca.subpaths.iter().find(|s| s.id == sb.id) else {
                        continue;
                    };
                    let d = (b.reference_delay_ns + sb.excess_delay_ns)
                        - (a.reference_delay_ns + sa.excess_delay_ns);
                    worst = worst.max(d.abs());
                    checked += 1;
                    if d.abs() > DELAY_STEP_NS {
                        violations += 1;
                    }
                }
            }
        }
    }
    let bound = 1.0 * 0.25 / SPEED_OF_LIGHT * 1e9;
    report.record(
        3,
        "delay-step bound",
        violations == 0,
        format!(
            "{violations} violations over {checked} subpath steps in {DELAY_RUNS} runs; max |dtau| {worst:.4} ns (v dt/c = {bound:.4}, limit {DELAY_STEP_NS})"
        ),
    );
}

/// Steps the anchor snapshot of `run` again, keeping every intermediate state.
fn replay(run: &SimulationRun) -> Vec<(ChannelSnapshot, EvolutionState)> {
    let cfg = &run.manifest.config;
    let first = &run.snapshots[0];
    let mut state = EvolutionState::new(
        first,
        PowerDecay::for_state(cfg, first.los_state),
        &mut stream(cfg.rng_seed, Stream::ReflectionAngles),
    );
    let mut out = vec![(first.clone(), state.clone())];
    for (k, p) in run.trajectory.points.iter().enumerate().skip(1) {
        let next = step(&out[k - 1].0, &mut state, p, k, &run.environment, cfg).expect("step");
        out.push((next, state.clone()));
    }
    out
}

fn criterion_4(report: &mut Report, power: &mut Vec<f64>) {
    let run = run_simulation(&los_forced(5)).expect("run");
    power.push(power_error(&run.snapshots));
    let steps = replay(&run);
    let replay_matches = steps.iter().map(|(s, _)| s).eq(run.snapshots.iter());

    let mut worst_lin: f64 = 0.0;
    for (k, (snap, state)) in steps.iter().enumerate().skip(1) {
        let prev = &steps[k - 1].0;
        for c in &snap.clusters {
            for s in &c.subpaths {
                if state.reflected.contains(&(c.id, s.id)) {
                    continue;
                }
                let m = &state.motion[&(c.id, s.id)];
                if m.anchor_time != prev.time {
                    continue; // inserted at this step
                }
                let now = s.angles();
                let dt = snap.time - m.anchor_time;
                for a in [AOD, ZOD, AOA, ZOA] {
                    let mut r = now[a] - m.anchor_angles[a] - m.slopes[a] * dt;
                    if a == AOD || a == AOA {
                        r = wrap_pi(r);
                    }
                    worst_lin = worst_lin.max(r.abs());
                }
            }
        }
    }

    let mut worst_bearing: f64 = 0.0;
    for snap in &run.snapshots {
        let los = snap
            .clusters
            .iter()
            .flat_map(|c| &c.subpaths)
            .find(|s| s.is_los_component)
            .expect("direct path in a LOS run");
        let p = snap.ut_position;
        let bearing = (-p.y).atan2(-p.x);
        worst_bearing = worst_bearing.max(wrap_pi(los.aoa_az - bearing).abs().to_degrees());
    }
    let pass = replay_matches && worst_lin <= LINEARITY_ABS && worst_bearing < BEARING_DEG;
    report.record(
        4,
        "angle linearity",
        pass,
        format!(
            "max |theta - theta0 - S dt| {worst_lin:.2e} rad (<= {LINEARITY_ABS:e}); max LOS AOA bearing error {worst_bearing:.4} deg (< {BEARING_DEG}); replay identical {replay_matches}"
        ),
    );
}

/// Exact direct-path angles `[AOD, ZOD, AOA, ZOA]` for a BS at the origin.
fn geometric_angles(p: Vec2, h_bs: f64, h_ut: f64) -> [f64; 4] {
    let d3 = (p.x * p.x + p.y * p.y + (h_ut - h_bs).powi(2)).sqrt();
    [
        p.y.atan2(p.x),
        ((h_ut - h_bs) / d3).acos(),
        (-p.y).atan2(-p.x),
        ((h_bs - h_ut) / d3).acos(),
    ]
}

fn criterion_5(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = [0.0f64; 4];
    for _ in 0..SLOPE_GEOMETRIES {
        let d = rng.random_range(10.0..200.0);
        let phi = rng.random_range(-PI..PI);
        let p = Vec2::new(d * phi.cos(), d * phi.sin());
        let h_bs = rng.random_range(3.0..35.0);
        let h_ut = rng.random_range(1.0..3.0);
        let speed = rng.random_range(0.5..3.0);
        let heading = rng.random_range(-PI..PI);
        let v = Vec2::new(speed * heading.cos(), speed * heading.sin());

        let at = |t: f64| geometric_angles(p + v * t, h_bs, h_ut);
        let (before, after) = (at(-SLOPE_FD_DT), at(SLOPE_FD_DT));
        let angles = at(0.0);
        let d3 = (d * d + (h_ut - h_bs).powi(2)).sqrt();
        let slopes = compute_slopes(
            angles,
            [0.0; 4],
            speed,
            heading,
            d,
            d3,
            ZenithSlope::Projected,
        )
        .expect("slopes");
        for a in 0..4 {
            let fd = wrap_pi(after[a] - before[a]) / (2.0 * SLOPE_FD_DT);
            worst[a] = worst[a].max((fd - slopes[a]).abs());
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    report.record(
        5,
        "slope oracle",
        max < SLOPE_ABS,
        format!(
            "max |S - FD| over {SLOPE_GEOMETRIES} geometries: AOD {:.1e}, ZOD {:.1e}, AOA {:.1e}, ZOA {:.1e} rad/s (< {SLOPE_ABS:e})",
            worst[0], worst[1], worst[2], worst[3]
        ),
    );
}

/// Autocorrelation at an axis lag of unit white noise filtered by the
/// truncated exponential kernel, from the kernel itself.
fn analytic_acf(lag: usize, dd: f64, res: f64) -> f64 {
    let r = (3.0 * dd / res).floor() as i64;
    let h = |x: i64, y: i64| {
        let dist = res * ((x * x + y * y) as f64).sqrt();
        if dist <= 3.0 * dd + 1e-9 {
            (-dist / dd).exp()
        } else {
            0.0
        }
    };
    let (mut cross, mut energy) = (0.0, 0.0);
    for y in -r..=r {
        for x in -r..=r {
            energy += h(x, y) * h(x, y);
            cross += h(x, y) * h(x + lag as i64, y);
        }
    }
    cross / energy
}

fn criterion_6(report: &mut Report) {
    let (n, res, dd) = (100usize, 1.0, 15.0);
    let grid = GridSpec::new(Vec2::ZERO, res, n, n).expect("grid");
    // sums pooled over seeds and both axes, then normalized once; averaging
    // per-seed ratios instead is biased low on a grid this small
    let mut sums = [[0.0; 3]; ACF_LAGS.len()];
    for seed in 0..ACF_SEEDS {
        let (_, map) = build_map_pair(&grid, dd, &mut stream(seed, Stream::ShadowingMaps));
        let v = |i: usize, j: usize| map.values[j * n + i];
        for (slot, &lag) in ACF_LAGS.iter().enumerate() {
            // the field is known to be zero-mean
            for j in 0..n {
                for i in 0..n - lag {
                    for (a, b) in [(v(i, j), v(i + lag, j)), (v(j, i), v(j, i + lag))] {
                        sums[slot][0] += a * b;
                        sums[slot][1] += a * a;
                        sums[slot][2] += b * b;
                    }
                }
            }
        }
    }
    let mean: Vec<f64> = sums
        .iter()
        .map(|[ab, aa, bb]| ab / (aa * bb).sqrt())
        .collect();
    let oracle: Vec<f64> = ACF_LAGS.iter().map(|&l| analytic_acf(l, dd, res)).collect();
    let at_zero = (mean[0] - 1.0).abs() < 1e-12;
    let decreasing = mean.windows(2).all(|w| w[1] < w[0]);
    let far = mean[ACF_LAGS.len() - 1] < ACF_FAR_MAX;
    let gaps: Vec<f64> = mean
        .iter()
        .zip(&oracle)
        .map(|(e, o)| (e - o).abs())
        .collect();
    let agree = gaps.iter().all(|g| *g <= ACF_ORACLE_ABS);
    let fmt = |xs: &[f64]| {
        xs.iter()
            .map(|x| format!("{x:.3}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    report.record(
        6,
        "correlated-field statistics",
        at_zero && decreasing && far && agree,
        format!(
            "lags {ACF_LAGS:?} m: empirical [{}], oracle [{}], |gap| [{}] (<= {ACF_ORACLE_ABS}); decreasing {decreasing}; far < {ACF_FAR_MAX} {far}",
            fmt(&mean),
            fmt(&oracle),
            fmt(&gaps)
        ),
    );
}

fn gradient_variance(values: &[f64], n: usize) -> f64 {
    let mut d = Vec::new();
    for j in 0..n {
        for i in 0..n {
            if i + 1 < n {
                d.push(values[j * n + i + 1] - values[j * n + i]);
            }
            if j + 1 < n {
                d.push(values[(j + 1) * n + i] - values[j * n + i]);
            }
        }
    }
    let m = d.iter().sum::<f64>() / d.len() as f64;
    d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / d.len() as f64
}

fn criterion_7(report: &mut Report) {
    let cfg = fig2();
    let n = 50;
    let grid =
        GridSpec::new(Vec2::new(35.0, -10.0), cfg.maps.map_resolution_m, n, n).expect("grid");
    let sigma = cfg.drop.cluster_sf_sigma_db;
    let mut wins = 0;
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let (iid, corr) = build_map_pair(
            &grid,
            cfg.maps.correlation_distance_sf_m,
            &mut stream(seed, Stream::ShadowingMaps),
        );
        let scale = |v: &[f64]| v.iter().map(|x| sigma * x).collect::<Vec<_>>();
        let gi = gradient_variance(&scale(&iid.values), n);
        let gc = gradient_variance(&scale(&corr.values), n);
        ratios.push(gc / gi);
        if gc < gi {
            wins += 1;
        }
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    report.record(
        7,
        "smoothing inequality",
        wins == 10,
        format!("correlated gradient variance below uncorrelated in {wins}/10 seeds (largest ratio {worst:.4})"),
    );
}

fn criterion_8(report: &mut Report) {
    // Δd = 1 m keeps the kernel inside 3 m, so lattice cells 7 m apart are
    // independent draws.
    let (side, spacing) = (700usize, 7usize);
    let grid = GridSpec::new(Vec2::ZERO, 1.0, side, side).expect("grid");
    let (_, map) = build_map_pair(&grid, 1.0, &mut stream(8, Stream::LosMap));
    let model = LosModel::umi();
    let cells: Vec<Vec2> = (0..side / spacing)
        .flat_map(|j| {
            (0..side / spacing).map(move |i| Vec2::new((i * spacing) as f64, (j * spacing) as f64))
        })
        .collect();
    assert_eq!(cells.len(), LOS_SAMPLES);

    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let mut near_los = 0;
    for _ in 0..LOS_SAMPLES {
        let p = Vec2::new(rng.random_range(0.0..699.0), rng.random_range(0.0..699.0));
        let d = rng.random_range(0.0..=18.0);
        let phi: f64 = rng.random_range(-PI..PI);
        let bs = p - Vec2::new(d * phi.cos(), d * phi.sin());
        if assign_los_state(&map, &model, bs, p).expect("inside map") == LosState::Los {
            near_los += 1;
        }
    }
    let far_los = cells
        .iter()
        .filter(|&&p| {
            assign_los_state(&map, &model, p - Vec2::new(50.0, 0.0), p).expect("inside map")
                == LosState::Los
        })
        .count();
    let near = near_los as f64 / LOS_SAMPLES as f64;
    let far = far_los as f64 / LOS_SAMPLES as f64;
    let pass = near == 1.0 && far >= LOS_FREQ_RANGE.0 && far <= LOS_FREQ_RANGE.1;
    report.record(
        8,
        "LOS-probability calibration",
        pass,
        format!(
            "d <= 18 m: LOS frequency {near}; d = 50 m: {far:.4} in [{}, {}] (P = {:.4})",
            LOS_FREQ_RANGE.0,
            LOS_FREQ_RANGE.1,
            model.probability(50.0)
        ),
    );
}

fn criterion_9(report: &mut Report, power: &[f64]) {
    let worst = power.iter().cloned().fold(0.0, f64::max);
    report.record(
        9,
        "power conservation",
        worst < POWER_REL,
        format!(
            "max relative error {worst:.2e} over {} runs (< {POWER_REL:e})",
            power.len()
        ),
    );
}

fn criterion_10(report: &mut Report, power: &mut Vec<f64>) {
    let dirs = [
        tempfile::tempdir().expect("tmp"),
        tempfile::tempdir().expect("tmp"),
    ];
    for dir in &dirs {
        let run = run_simulation(&fig2()).expect("run");
        power.push(power_error(&run.snapshots));
        let mut manifest = run.manifest;
        write_outputs(&run.snapshots, &mut manifest, dir.path(), None).expect("write");
    }
    let same: Vec<(&str, bool)> = [CIR_FILE, SUMMARY_FILE, ANGLES_FILE, DELAYS_FILE]
        .into_iter()
        .map(|f| {
            let a = fs::read(dirs[0].path().join(f)).expect("read");
            let b = fs::read(dirs[1].path().join(f)).expect("read");
            (f, !a.is_empty() && a == b)
        })
        .collect();
    let pass = same.iter().all(|(_, s)| *s);
    let detail = same
        .iter()
        .map(|(f, s)| format!("{f} {}", if *s { "identical" } else { "differs" }))
        .collect::<Vec<_>>()
        .join(", ");
    report.record(10, "determinism", pass, detail);
}

fn main() {
    // `cargo test -- --list` and similar probes expect no output and success
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let started = Instant::now();
    let mut report = Report { lines: Vec::new() };
    let mut power = Vec::new();
    criterion_1(&mut report, &mut power);
    criterion_2(&mut report, &mut power);
    criterion_3(&mut report, &mut power);
    criterion_4(&mut report, &mut power);
    criterion_5(&mut report);
    criterion_6(&mut report);
    criterion_7(&mut report);
    criterion_8(&mut report);
    criterion_10(&mut report, &mut power);
    criterion_9(&mut report, &power);

    let failed = report.lines.iter().filter(|(p, _)| !p).count();
    println!(
        "acceptance: {} passed, {failed} failed in {:.1} s",
        report.lines.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
