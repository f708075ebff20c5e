//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the verdict lines always reach the output; exits
//! non-zero when any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carryscan::experiment::{evaluate, generate_sequences, generate_training, score_sequences, train_network, Evaluation};
use carryscan::ExperimentConfig;
use carryscan_core::classes::ObjectClass;
use carryscan_core::eval::{compute_metrics, ClassCounts, ConfusionCounts};
use carryscan_core::preprocess::{ca_cfar_1d, detect_targets, CfarParams, PreprocessParams, Preprocessor, RvMap};
use carryscan_core::radar::{derive_capabilities, ArrayGeometry, RadarConfig};
use carryscan_core::sim::{make_labeled_scene_with, polar_to_xy, simulate_trajectory, EchoSimulator, Motion, Placement, Scatterer, Scene, SubjectParams};
use carryscan_core::tracking::{hungarian, Measurement, Tracker, TrackerParams};
use carryscan_nn::gradcheck::{check_gradients, perturb_for_check};
use carryscan_nn::loss::{focal_loss, FocalParams};
use carryscan_nn::{Network, NetworkConfig, Sample};

type Verdict = (bool, String);

fn setup() -> (RadarConfig, ArrayGeometry, EchoSimulator, Preprocessor) {
    let cfg = RadarConfig::default();
    let g = ArrayGeometry::default();
    let sim = EchoSimulator::new(&cfg, &g).unwrap();
    let pre = Preprocessor::new(&cfg, &g, PreprocessParams::default()).unwrap();
    (cfg, g, sim, pre)
}

fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

fn capabilities() -> Verdict {
    let c = derive_capabilities(&RadarConfig::default(), &ArrayGeometry::default()).unwrap();
    let ok = within(c.range_resolution, 0.06, 0.0005)
        && within(c.max_range, 15.0, 0.3)
        && within(c.velocity_resolution, 0.072, 0.0005)
        && within(c.max_velocity, 1.80, 0.005)
        && within(c.azimuth_resolution_deg, 1.35, 0.1)
        && within(c.elevation_resolution_deg, 19.0, 1.0);
    (ok, c.to_string())
}

fn localization() -> Verdict {
    let (_, _, sim, pre) = setup();
    let scale = pre.scale();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut ok = 0;
    let trials = 100;
    for i in 0..trials {
        let r = rng.random_range(1.0..12.0);
        let v = rng.random_range(-1.5..1.5);
        let az = rng.random_range(-45.0..45.0);
        let scene = Scene {
            scatterers: vec![Scatterer::new(r, v, az, 0.0, 1.0)],
            noise_std: 1.0,
            rng_seed: 10_000 + i,
        };
        let dets = pre.detect(&sim.simulate_frame(&scene, 0).frame);
        let Some(best) = dets.iter().max_by(|a, b| a.amplitude.total_cmp(&b.amplitude)) else {
            continue;
        };
        let dr = (best.range_bin as f64 - scale.range_bin(r)).abs();
        let dv = (best.velocity_bin as f64 - (v / scale.velocity_bin_width + (scale.velocity_fft / 2) as f64)).abs();
        let da = (best.azimuth_bin as f64 - scale.azimuth_bin(az)).abs();
        if dr <= 1.0 && dv <= 1.0 && da <= 1.0 {
            ok += 1;
        }
    }
    (ok >= 95, format!("{ok}/{trials} scenes within one bin in range, velocity and azimuth"))
}

fn exp_noise(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand_distr::StandardNormal;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            (re * re + im * im) / 2.0
        })
        .collect()
}

fn cfar_calibration() -> Verdict {
    let params = CfarParams {
        p_fa: 1e-4,
        ..CfarParams::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut detail = Vec::new();
    let mut ok = true;
    for circular in [true, false] {
        let (mut hits, mut cells) = (0usize, 0usize);
        // 256-cell lines, as along the range axis
        while cells < 1 << 21 {
            let line = exp_noise(256, &mut rng);
            hits += ca_cfar_1d(&line, &params, circular).into_iter().filter(|&h| h).count();
            cells += line.len();
        }
        let rate = hits as f64 / cells as f64;
        ok &= (0.3e-4..=3e-4).contains(&rate);
        detail.push(format!("{} pass {rate:.2e} over {cells} cells", if circular { "circular" } else { "edge-truncated" }));
    }
    // the two-pass detector requires both passes, so its rate is lower
    let map = RvMap {
        range_bins: 256,
        velocity_bins: 64,
        values: exp_noise(256 * 64, &mut rng),
    };
    let mut two = 0;
    let mut maps = 0;
    while maps * 256 * 64 < 1 << 20 {
        let m = RvMap {
            values: exp_noise(256 * 64, &mut rng),
            ..map.clone()
        };
        two += detect_targets(&m, &params).len();
        maps += 1;
    }
    detail.push(format!("two-pass AND {:.2e} (informational)", two as f64 / (maps * 256 * 64) as f64));
    (ok, detail.join("; "))
}

fn tdm_compensation() -> Verdict {
    let (_, _, sim, pre) = setup();
    let az = 20.0;
    let run = |velocity: f64, compensate: bool| {
        let scene = Scene {
            scatterers: vec![Scatterer::new(4.0, velocity, az, 0.0, 1.0)],
            noise_std: 0.0,
            rng_seed: 0,
        };
        let (rv, map) = pre.rv_map(&sim.simulate_frame(&scene, 0).frame);
        let (r, vb) = map.argmax();
        pre.cell_azimuth(&rv, r, vb, compensate).0 as i64
    };
    let still = run(0.0, true);
    let comp = run(1.0, true);
    let raw = run(1.0, false);
    let comp_ok = (comp - still).abs() <= 1;
    let raw_ok = (raw - still).abs() > 1;
    (
        comp_ok && raw_ok,
        format!(
            "stationary bin {still}; 1 m/s compensated {comp} ({}), uncompensated {raw} ({}); the uncompensated slot phase is at most 11/12 of 1.743 rad across the row, which moves the peak by well under one bin",
            if comp_ok { "within 1" } else { "off" },
            if raw_ok { "off by >1" } else { "within 1" }
        ),
    )
}

fn network_suite() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sample = Sample {
        cube: (0..5760).map(|_| rng.random_range(0.0..1.0)).collect(),
        range_m: 3.0,
        azimuth_deg: 12.0,
    };
    let full = Network::new(NetworkConfig::full());
    let t = full.forward(&sample).unwrap();
    let shapes: Vec<_> = t.stage_outputs(&full).iter().map(|v| v.shape()).collect();
    let shapes_ok = shapes == vec![(12, 12, 5, 256), (6, 6, 3, 512), (3, 3, 2, 1024), (2, 2, 1, 2048)] && t.features().len() == 3904;
    drop(t);
    drop(full);
    let mut net = Network::new(NetworkConfig::reduced());
    perturb_for_check(&mut net, &mut rng);
    let res = check_gradients(&mut net, &sample, [true, false, true], &FocalParams::concealed(), 20, &mut rng);
    let grads_ok = res.len() == 8 && res.values().all(|r| r.checked >= 20 && r.worst_relative_error <= 1e-3);
    let worst = res.values().map(|r| r.worst_relative_error).fold(0.0, f64::max);
    (
        shapes_ok && grads_ok,
        format!(
            "stage shapes {shapes:?}; {} parameter kinds x >=20 checked, worst relative error {worst:.2e}",
            res.len()
        ),
    )
}

fn loss_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p: f64 = rng.random_range(1e-6..1.0 - 1e-6);
        let y = rng.random_bool(0.5);
        let bce = if y { -p.ln() } else { -(1.0 - p).ln() };
        worst = worst.max((focal_loss(p, y, 1.0, 1.0, 0.0).0 - bce).abs());
    }
    let mut negative = 0;
    for _ in 0..10_000 {
        let p = rng.random_range(0.0..=1.0);
        let (a, w1, w2) = (rng.random_range(0.0..5.0), rng.random_range(0.01..30.0), rng.random_range(0.01..30.0));
        if focal_loss(p, rng.random_bool(0.5), w1, w2, a).0 < 0.0 {
            negative += 1;
        }
    }
    (worst <= 1e-9 && negative == 0, format!("max |FL - BCE| = {worst:.1e} over 1000 pairs; {negative} negative losses in 10000 draws"))
}

/// Counts with the given precision and recall at a large support.
fn counts_for(precision: f64, recall: f64) -> ConfusionCounts {
    let tp = 1_000_000u64;
    ConfusionCounts {
        tp,
        fp: (tp as f64 * (1.0 / precision - 1.0)).round() as u64,
        fn_: (tp as f64 * (1.0 / recall - 1.0)).round() as u64,
        tn: 1_000_000,
    }
}

fn metric_arithmetic() -> Verdict {
    // (precision, recall, F1) reference rows
    let rows = [
        (0.6637, 0.9132, 0.7684),
        (0.6146, 0.858, 0.716),
        (0.7036, 0.7396, 0.7211),
        (0.7645, 0.809, 0.7861),
        (0.3256, 0.6915, 0.442),
        (0.5918, 0.6591, 0.6235),
        (0.5305, 0.8114, 0.6411),
    ];
    let mut bad = Vec::new();
    for (p, r, f) in rows {
        let c = counts_for(p, r);
        let m = compute_metrics(&ClassCounts([c, c, c]));
        let got = m.per_class[0].f1.unwrap();
        if (got - f).abs() > 0.001 {
            bad.push(format!("({p}, {r}) -> {got:.4} vs {f}"));
        }
    }
    (bad.is_empty(), if bad.is_empty() { format!("{} rows within 0.001", rows.len()) } else { bad.join("; ") })
}

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    let (n, m) = (cost.len(), cost[0].len());
    let k = n.min(m);
    let mut best = f64::INFINITY;
    let mut cols: Vec<usize> = (0..m).collect();
    // all injective maps of the smaller side into the larger
    fn permute(i: usize, k: usize, cols: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if i == k {
            f(&cols[..k]);
            return;
        }
        for j in i..cols.len() {
            cols.swap(i, j);
            permute(i + 1, k, cols, f);
            cols.swap(i, j);
        }
    }
    if n <= m {
        permute(0, k, &mut cols, &mut |c| best = best.min((0..k).map(|i| cost[i][c[i]]).sum()));
    } else {
        let mut rows: Vec<usize> = (0..n).collect();
        permute(0, k, &mut rows, &mut |r| best = best.min((0..k).map(|j| cost[r[j]][j]).sum()));
    }
    best
}

fn hungarian_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut bad = 0;
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let m = rng.random_range(1..=6);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random_range(0.0..10.0)).collect()).collect();
        let a = hungarian(&cost);
        if a.pairs.len() != n.min(m) || (a.cost - brute_force(&cost)).abs() > 1e-9 {
            bad += 1;
        }
    }
    (bad == 0, format!("{} of 200 random matrices up to 6x6 differ from exhaustive search", bad))
}

fn tracking_quality() -> Verdict {
    let (cfg, g, _, pre) = setup();
    let params = SubjectParams {
        range_min: 3.0,
        range_max: 3.0,
        azimuth_max_deg: 0.0,
        ..SubjectParams::default()
    };
    let labeled = make_labeled_scene_with(&[ObjectClass::Laptop], Placement::Open, 31, &params);
    let motion = Motion {
        speed: 0.5,
        heading_deg: 60.0,
    };
    let frames = 300;
    let traj = simulate_trajectory(&labeled, motion, frames, &cfg, &g).unwrap();
    let truth = traj.centers_xy().to_vec();
    let mut tracker: Tracker<usize> = Tracker::new(TrackerParams::default());
    let mut ever_confirmed = std::collections::BTreeSet::new();
    let (mut raw_se, mut raw_n, mut filt_se, mut filt_n) = (0.0, 0, 0.0, 0);
    let mut owner: Option<u64> = None;
    let mut switches = 0;
    for (k, f) in traj.frames().enumerate() {
        let out = pre.process(&f.frame, carryscan_core::preprocess::ChirpMode::AverageAll, k as u64);
        let meas: Vec<(Measurement, usize)> = out
            .clusters
            .iter()
            .map(|c| {
                (
                    Measurement {
                        range_m: c.range_m,
                        azimuth_deg: c.azimuth_deg,
                    },
                    k,
                )
            })
            .collect();
        let (tx, ty) = truth[k];
        if let Some(m) = meas.iter().map(|m| m.0.to_xy()).min_by(|a, b| (a.x - tx).hypot(a.y - ty).total_cmp(&(b.x - tx).hypot(b.y - ty))) {
            raw_se += (m.x - tx).powi(2) + (m.y - ty).powi(2);
            raw_n += 1;
        }
        let report = tracker.step(meas, cfg.frame_period).unwrap();
        ever_confirmed.extend(report.confirmed);
        for t in tracker.tracks().iter().filter(|t| t.confirmed && t.miss_count == 0) {
            let p = t.state.position();
            let d2 = (p.x - tx).powi(2) + (p.y - ty).powi(2);
            if d2.sqrt() < 1.0 {
                if owner.is_some_and(|o| o != t.id) {
                    switches += 1;
                }
                owner = Some(t.id);
                filt_se += d2;
                filt_n += 1;
            }
        }
    }
    let raw = (raw_se / raw_n.max(1) as f64).sqrt();
    let filt = (filt_se / filt_n.max(1) as f64).sqrt();
    let (rx, ry) = polar_to_xy(3.0, 0.0);
    let ok = ever_confirmed.len() == 1 && switches == 0 && filt < raw && filt_n > 250;
    (
        ok,
        format!(
            "start ({rx:.1}, {ry:.1}) m, {frames} frames: {} confirmed track(s), {switches} identity switches, RMSE filtered {filt:.4} m over {filt_n} frames vs raw {raw:.4} m",
            ever_confirmed.len()
        ),
    )
}

fn learnability(cfg: &ExperimentConfig) -> (Verdict, Option<Evaluation>) {
    let t0 = Instant::now();
    let data = generate_training(cfg).unwrap();
    let (net, report) = train_network(cfg, &data, |e| eprintln!("  {e}")).unwrap();
    let seqs = generate_sequences(cfg).unwrap();
    let scored = score_sequences(&net, &seqs).unwrap();
    let ev = evaluate(&scored, &cfg.decision, 21).unwrap();
    let f1 = ev.single.per_class.map(|m| m.f1.unwrap_or(0.0));
    let single_avg = ev.single.average.f1.unwrap_or(0.0);
    let multi_avg = ev.multi.average.f1.unwrap_or(0.0);
    let frames: usize = scored.iter().map(|s| s.probabilities.len()).sum();
    let ok = data.len() >= 600 && f1.iter().all(|&f| f >= 0.9) && multi_avg >= single_avg;
    let detail = format!(
        "{} training cubes, {} epochs, {} held-out tracked frames; single-shot F1 laptop {:.4} phone {:.4} knife {:.4} (avg {single_avg:.4}); COD-multi avg F1 {multi_avg:.4}; {:.0} s",
        data.len(),
        report.epochs.len(),
        frames,
        f1[0],
        f1[1],
        f1[2],
        t0.elapsed().as_secs_f64()
    );
    ((ok, detail), Some(ev))
}

fn threshold_monotonicity(ev: Option<&Evaluation>) -> Verdict {
    let Some(ev) = ev else {
        return (false, "no evaluation scores".into());
    };
    let mut ok = true;
    for curve in &ev.sweep {
        ok &= curve.len() == 21;
        ok &= curve.windows(2).all(|w| w[1].false_alarm <= w[0].false_alarm && w[1].missing >= w[0].missing);
        let (first, last) = (&curve[0], &curve[curve.len() - 1]);
        ok &= first.threshold == 0.0 && first.false_alarm == 1.0 && first.missing == 0.0;
        ok &= last.threshold == 1.0 && last.false_alarm == 0.0 && last.missing == 1.0;
    }
    (ok, "21-point single-shot sweeps of the held-out scores, all classes".into())
}

fn main() -> ExitCode {
    let cfg = ExperimentConfig::default();
    let mut results: Vec<(&str, Verdict, f64)> = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Verdict| {
        let t = Instant::now();
        let v = f();
        let secs = t.elapsed().as_secs_f64();
        println!("{} {name}: {} [{secs:.1} s]", if v.0 { "PASS" } else { "FAIL" }, v.1);
        results.push((name, v, secs));
    };
    run("AC1 capabilities", &mut capabilities);
    run("AC2 localization", &mut localization);
    run("AC3 cfar-calibration", &mut cfar_calibration);
    run("AC4 tdm-compensation", &mut tdm_compensation);
    run("AC5 network-shapes-gradients", &mut network_suite);
    run("AC6 loss-identities", &mut loss_identities);
    run("AC7 metric-arithmetic", &mut metric_arithmetic);
    run("AC8 hungarian-oracle", &mut hungarian_oracle);
    run("AC9 tracking-quality", &mut tracking_quality);
    let mut ev = None;
    run("AC10 learnability", &mut || {
        let (v, e) = learnability(&cfg);
        ev = e;
        v
    });
    run("AC11 threshold-monotonicity", &mut || threshold_monotonicity(ev.as_ref()));
    let failed: Vec<&str> = results.iter().filter(|r| !r.1 .0).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
