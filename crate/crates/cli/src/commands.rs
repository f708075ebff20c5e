//! File-based subcommands. Each writes its outputs under a directory and
//! returns a short summary for the terminal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use carryscan_core::classes::Labels;
use carryscan_core::decision::{multi_shot_vote, single_shot_decide, ClassProbabilities};
use carryscan_core::eval::{benchmark, format_curve, format_report, LatencyStats};
use carryscan_core::formats::{encode_cube, encode_frame, read_cube_file, read_frame_file, write_file, Manifest};
use carryscan_core::preprocess::ChirpMode;
use carryscan_core::radar::derive_capabilities;
use carryscan_core::sim::{make_labeled_scene_with, simulate_trajectory, Motion};
use carryscan_core::tracking::{Measurement, Tracker};
use carryscan_nn::checkpoint::{load_model, save_model};
use carryscan_nn::train::sample_from_cube;
use carryscan_nn::Network;

use crate::config::ExperimentConfig;
use crate::dataset::{combination, nearest_cube, LabeledCube};
use crate::error::CliError;
use crate::experiment::{evaluate, generate_sequences, preprocessor, score_sequences, train_network};

pub const FRAME_COLUMNS: [&str; 7] = ["file", "subject", "frame", "labels", "placement", "range_m", "azimuth_deg"];
pub const CUBE_COLUMNS: [&str; 5] = ["file", "frame_file", "labels", "range_m", "azimuth_deg"];
pub const TRACK_COLUMNS: [&str; 11] = [
    "frame", "track", "x", "y", "confirmed", "cube", "p_laptop", "p_phone", "p_knife", "single", "multi",
];

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn capabilities(cfg: &ExperimentConfig) -> Result<String, CliError> {
    Ok(derive_capabilities(&cfg.radar, &cfg.geometry)?.to_string())
}

/// Walks `subjects` subjects for `frames` frames each and writes every frame
/// with a manifest of labels and ground-truth centres.
pub fn simulate(cfg: &ExperimentConfig, out: &Path, subjects: usize, frames: usize) -> Result<Manifest, CliError> {
    create_dir(out)?;
    let hash = cfg.data_hash();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut manifest = Manifest::new(&FRAME_COLUMNS);
    for s in 0..subjects {
        let seed = cfg.seed.wrapping_mul(7919).wrapping_add(s as u64);
        let labeled = make_labeled_scene_with(&combination(s % 8), cfg.dataset.placement, seed, &cfg.dataset.subject);
        let motion = Motion {
            speed: rng.random_range(0.0..=cfg.dataset.max_speed),
            heading_deg: rng.random_range(0.0..360.0),
        };
        let traj = simulate_trajectory(&labeled, motion, frames, &cfg.radar, &cfg.geometry)?;
        let centers = traj.centers();
        for (k, f) in traj.frames().enumerate() {
            let name = format!("s{s:04}_f{k:04}.codf");
            write_file(&out.join(&name), &encode_frame(&f.frame, hash))?;
            manifest.push(vec![
                name,
                s.to_string(),
                k.to_string(),
                labeled.labels.code(),
                format!("{:?}", cfg.dataset.placement).to_lowercase(),
                format!("{:.6}", centers[k].0),
                format!("{:.6}", centers[k].1),
            ]);
        }
    }
    manifest.write(&out.join("manifest.tsv"))?;
    Ok(manifest)
}

fn labels_at(m: &Manifest, row: usize) -> Result<Labels, CliError> {
    let code: String = m.get(row, "labels")?;
    Labels::from_code(&code).ok_or_else(|| CliError::Usage(format!("manifest row {row}: bad label code {code:?}")))
}

/// Crops the cube nearest to each frame's ground-truth centre. With
/// `random_chirp` the image uses one seeded random chirp, otherwise all
/// chirps are averaged.
pub fn preprocess(cfg: &ExperimentConfig, frames: &Path, out: &Path, random_chirp: bool) -> Result<Manifest, CliError> {
    create_dir(out)?;
    let hash = cfg.data_hash();
    let pre = preprocessor(cfg)?;
    let input = Manifest::read(&frames.join("manifest.tsv"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xc4_1a9);
    let mut manifest = Manifest::new(&CUBE_COLUMNS);
    for row in 0..input.rows.len() {
        let file: String = input.get(row, "file")?;
        let (frame, _) = read_frame_file(&frames.join(&file), Some(hash))?;
        let mode = if random_chirp {
            ChirpMode::Single(rng.random_range(0..frame.num_chirps))
        } else {
            ChirpMode::AverageAll
        };
        let labels = labels_at(&input, row)?;
        let truth = (input.get::<f64>(row, "range_m")?, input.get::<f64>(row, "azimuth_deg")?);
        let result = pre.process(&frame, mode, row as u64);
        let Some(cube) = nearest_cube(&result, truth, cfg.dataset.association_radius) else {
            continue;
        };
        let name = file.replace(".codf", ".codc");
        write_file(&out.join(&name), &encode_cube(&cube, labels, hash))?;
        manifest.push(vec![
            name,
            file,
            labels.code(),
            format!("{:.6}", cube.center_range_m),
            format!("{:.6}", cube.center_azimuth_deg),
        ]);
    }
    manifest.write(&out.join("manifest.tsv"))?;
    Ok(manifest)
}

pub fn load_cubes(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<LabeledCube>, CliError> {
    let m = Manifest::read(&dir.join("manifest.tsv"))?;
    let hash = cfg.data_hash();
    (0..m.rows.len())
        .map(|row| {
            let file: String = m.get(row, "file")?;
            let rec = read_cube_file(&dir.join(file), Some(hash))?;
            Ok(LabeledCube {
                cube: rec.cube,
                labels: rec.labels,
                scene: row as u64,
            })
        })
        .collect()
}

/// Trains on the cubes in `cubes` and saves the model. The per-epoch log
/// goes to stderr and to `<model>.log.txt` next to the model.
pub fn train(cfg: &ExperimentConfig, cubes: &Path, model: &Path) -> Result<String, CliError> {
    let data = load_cubes(cfg, cubes)?;
    let mut log = String::new();
    let (net, report) = train_network(cfg, &data, |e| {
        eprintln!("{e}");
        let _ = writeln!(log, "{e}");
    })?;
    if let Some(dir) = model.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_model(model, &net, cfg.data_hash())?;
    write_text(&model.with_extension("log.txt"), &log)?;
    let last = report.epochs.last().map(|e| e.to_string()).unwrap_or_default();
    Ok(format!("{} cubes, {} epochs; {last}", data.len(), report.epochs.len()))
}

pub fn load_checked(cfg: &ExperimentConfig, model: &Path) -> Result<Network, CliError> {
    let (net, _) = load_model(model, Some(cfg.data_hash()))?;
    if net.config.input_dims != cfg.network.input_dims {
        return Err(CliError::Usage("model input dims differ from the configured cube shape".into()));
    }
    Ok(net)
}

/// Scores held-out tracked subjects and writes `report.tsv` with COD-single
/// and COD-multi rows plus one threshold curve per class.
pub fn eval(cfg: &ExperimentConfig, model: &Path, out: &Path) -> Result<String, CliError> {
    let net = load_checked(cfg, model)?;
    create_dir(out)?;
    let seqs = generate_sequences(cfg)?;
    let scored = score_sequences(&net, &seqs)?;
    let ev = evaluate(&scored, &cfg.decision, 21)?;
    let report = format_report(&[("COD-single", ev.single), ("COD-multi", ev.multi)]);
    write_text(&out.join("report.tsv"), &report)?;
    for (c, curve) in ev.sweep.iter().enumerate() {
        let name = carryscan_core::classes::ObjectClass::ALL[c].name();
        write_text(&out.join(format!("curve_{name}.tsv")), &format_curve(curve))?;
    }
    Ok(report)
}

/// One subject walking for `frames` frames; writes every tracked cube and a
/// log line per track and frame.
pub fn track(cfg: &ExperimentConfig, model: Option<&Path>, out: &Path, frames: usize, subject: usize) -> Result<Manifest, CliError> {
    create_dir(out)?;
    let net = model.map(|m| load_checked(cfg, m)).transpose()?;
    let pre = preprocessor(cfg)?;
    let hash = cfg.data_hash();
    let seed = cfg.seed.wrapping_mul(7919).wrapping_add(subject as u64);
    let labeled = make_labeled_scene_with(&combination(subject % 8), cfg.dataset.placement, seed, &cfg.dataset.subject);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let motion = Motion {
        speed: rng.random_range(0.0..=cfg.dataset.max_speed),
        heading_deg: rng.random_range(0.0..360.0),
    };
    let traj = simulate_trajectory(&labeled, motion, frames, &cfg.radar, &cfg.geometry)?;
    let mut tracker: Tracker<(usize, ClassProbabilities)> = Tracker::new(cfg.tracker);
    let mut log = Manifest::new(&TRACK_COLUMNS);
    for (k, f) in traj.frames().enumerate() {
        let result = pre.process(&f.frame, ChirpMode::AverageAll, k as u64);
        let mut meas = Vec::with_capacity(result.cubes.len());
        for (i, cube) in result.cubes.iter().enumerate() {
            let p = match &net {
                Some(n) => n.predict(&sample_from_cube(cube))?,
                None => [0.0; 3],
            };
            let name = format!("f{k:04}_c{i}.codc");
            write_file(&out.join(&name), &encode_cube(cube, Labels::default(), hash))?;
            let m = Measurement {
                range_m: cube.center_range_m,
                azimuth_deg: cube.center_azimuth_deg,
            };
            meas.push((m, (i, p)));
        }
        tracker.step(meas, cfg.radar.frame_period)?;
        for t in tracker.tracks() {
            if t.miss_count > 0 {
                continue;
            }
            let (i, p) = *t.history.last().expect("matched tracks have history");
            let scores: Vec<ClassProbabilities> = t.history.iter().map(|h| h.1).collect();
            let pos = t.state.position();
            let (x, y) = (pos.x, pos.y);
            log.push(vec![
                k.to_string(),
                t.id.to_string(),
                format!("{x:.4}"),
                format!("{y:.4}"),
                (t.confirmed as u8).to_string(),
                format!("f{k:04}_c{i}.codc"),
                format!("{:.4}", p[0]),
                format!("{:.4}", p[1]),
                format!("{:.4}", p[2]),
                single_shot_decide(&p, &cfg.decision).code(),
                multi_shot_vote(&scores, &cfg.decision).code(),
            ]);
        }
    }
    log.write(&out.join("tracks.tsv"))?;
    Ok(log)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub simulate: LatencyStats,
    pub preprocess: LatencyStats,
    pub predict: LatencyStats,
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "stage\tmean_ms\tmedian_ms")?;
        for (name, s) in [("simulate", &self.simulate), ("preprocess", &self.preprocess), ("predict", &self.predict)] {
            writeln!(f, "{name}\t{:.3}\t{:.3}", s.mean.as_secs_f64() * 1e3, s.median.as_secs_f64() * 1e3)?;
        }
        Ok(())
    }
}

/// Per-frame latency of simulation, preprocessing and one network
/// prediction.
pub fn bench(cfg: &ExperimentConfig, model: Option<&Path>, runs: usize) -> Result<BenchReport, CliError> {
    let net = match model {
        Some(m) => load_checked(cfg, m)?,
        None => Network::new(cfg.network.clone()),
    };
    let pre = preprocessor(cfg)?;
    let sim = carryscan_core::sim::EchoSimulator::new(&cfg.radar, &cfg.geometry)?;
    let labeled = make_labeled_scene_with(&combination(7), cfg.dataset.placement, cfg.seed, &cfg.dataset.subject);
    let frame = sim.simulate_frame(&labeled.scene, 0).frame;
    let result = pre.process(&frame, ChirpMode::AverageAll, 0);
    let sample = result.cubes.first().map(sample_from_cube).unwrap_or_else(|| carryscan_nn::Sample {
        cube: vec![0.0; cfg.preprocess.cube.len()],
        range_m: labeled.subject_center.0,
        azimuth_deg: labeled.subject_center.1,
    });
    let runs = runs.max(1);
    let stat = |s: Option<LatencyStats>| s.expect("at least one run");
    let simulate = stat(benchmark(|| drop(sim.simulate_frame(&labeled.scene, 0)), 1, runs));
    let preprocess = stat(benchmark(|| drop(pre.process(&frame, ChirpMode::AverageAll, 0)), 1, runs));
    let predict = stat(benchmark(|| drop(net.predict(&sample)), 1, runs));
    Ok(BenchReport {
        simulate,
        preprocess,
        predict,
    })
}

pub fn default_model_path(out: &Path) -> PathBuf {
    out.join("model.codm")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CliError;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.dataset.test_subjects = 8;
        cfg.dataset.frames_per_subject = 4;
        cfg.train.step1_max_epochs = 1;
        cfg.train.step2_max_epochs = 1;
        cfg.train.batch_size = 2;
        cfg
    }

    fn read(path: &Path) -> Vec<u8> {
        std::fs::read(path).unwrap()
    }

    #[test]
    fn capabilities_line() {
        let text = capabilities(&ExperimentConfig::default()).unwrap();
        assert!(text.contains("range res 0.0600 m"), "{text}");
    }

    #[test]
    fn simulate_is_deterministic() {
        let cfg = small_config();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let ma = simulate(&cfg, a.path(), 2, 2).unwrap();
        let mb = simulate(&cfg, b.path(), 2, 2).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(ma.rows.len(), 4);
        for row in &ma.rows {
            assert_eq!(read(&a.path().join(&row[0])), read(&b.path().join(&row[0])));
        }
    }

    #[test]
    fn zero_frames_writes_an_empty_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = simulate(&small_config(), dir.path(), 3, 0).unwrap();
        assert!(m.rows.is_empty());
        let back = Manifest::read(&dir.path().join("manifest.tsv")).unwrap();
        assert_eq!(back.columns, FRAME_COLUMNS);
        assert!(back.rows.is_empty());
    }

    #[test]
    fn preprocess_train_eval_round_trip() {
        let cfg = small_config();
        let root = tempfile::tempdir().unwrap();
        let (frames, cubes, out) = (root.path().join("frames"), root.path().join("cubes"), root.path().join("eval"));
        let fm = simulate(&cfg, &frames, 4, 1).unwrap();
        let cm = preprocess(&cfg, &frames, &cubes, true).unwrap();
        assert!(!cm.rows.is_empty(), "no subject produced a cube");
        let loaded = load_cubes(&cfg, &cubes).unwrap();
        assert_eq!(loaded.len(), cm.rows.len());
        for (row, c) in cm.rows.iter().zip(&loaded) {
            let src = fm.rows.iter().find(|r| r[0] == row[1]).unwrap();
            assert_eq!(Labels::from_code(&src[3]), Some(c.labels));
        }

        let model = default_model_path(&out);
        train(&cfg, &cubes, &model).unwrap();
        assert!(std::fs::read_to_string(model.with_extension("log.txt")).unwrap().contains("step=2"));
        let report = eval(&cfg, &model, &out).unwrap();
        assert!(report.contains("COD-single") && report.contains("COD-multi"));
        for class in ["laptop", "phone", "knife"] {
            let curve = std::fs::read_to_string(out.join(format!("curve_{class}.tsv"))).unwrap();
            assert_eq!(curve.lines().count(), 22);
        }

        // a model or cube from another radar setup is refused
        let mut other = cfg.clone();
        other.radar.frame_period *= 2.0;
        let err = load_checked(&other, &model).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let err = load_cubes(&other, &cubes).unwrap_err();
        assert!(matches!(err, CliError::Format(_)), "{err}");
    }

    #[test]
    fn track_logs_one_confirmed_subject() {
        let cfg = small_config();
        let dir = tempfile::tempdir().unwrap();
        let log = track(&cfg, None, dir.path(), 20, 0).unwrap();
        let back = Manifest::read(&dir.path().join("tracks.tsv")).unwrap();
        assert_eq!(back, log);
        let confirmed: std::collections::BTreeSet<&str> = log.rows.iter().filter(|r| r[4] == "1").map(|r| r[1].as_str()).collect();
        assert_eq!(confirmed.len(), 1, "{confirmed:?}");
        for row in &log.rows {
            assert!(dir.path().join(&row[5]).exists());
        }
    }
}
