//! Raw I/Q echo simulation for point-scatterer scenes.
//!
//! The signal model is the ideal de-chirped IF of an FMCW TDM-MIMO radar.
//! A scatterer at range `r`, radial velocity `v`, azimuth `θ` and elevation
//! `φ` contributes, at chirp `c`, transmitter slot `m`, virtual element
//! `(h, v_e)` and fast-time sample `k`,
//!
//! ```text
//! a · exp(j·[2π f_IF k / f_s + Δφ_v (c + m / N_T) + π (h sinθ cosφ + v_e sinφ) + 4π r / λ])
//! ```
//!
//! with `f_IF = 2 r S / c` and `Δφ_v = 4π v T_c / λ`. Range migration inside a
//! frame is ignored; between frames the range advances by `v · T_f`.

use std::f64::consts::PI;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classes::{Labels, ObjectClass};
use crate::error::SimError;
use crate::radar::{virtual_array, ArrayGeometry, RadarConfig, VirtualArray};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub range: f64,
    pub velocity: f64,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub amplitude: f64,
}

impl Scatterer {
    pub fn new(range: f64, velocity: f64, azimuth_deg: f64, elevation_deg: f64, amplitude: f64) -> Self {
        Self {
            range,
            velocity,
            azimuth_deg,
            elevation_deg,
            amplitude,
        }
    }
}

/// Scatterers observed in one frame plus receiver noise.
///
/// `noise_std` is the standard deviation of the complex noise sample, so
/// `E|n|² = noise_std²` and I and Q each carry half of that power.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub scatterers: Vec<Scatterer>,
    pub noise_std: f64,
    pub rng_seed: u64,
}

/// One frame of complex ADC samples indexed by (chirp, tx, rx, sample).
#[derive(Debug, Clone, PartialEq)]
pub struct RawFrame {
    pub num_chirps: usize,
    pub num_tx: usize,
    pub num_rx: usize,
    pub num_samples: usize,
    pub samples: Vec<Complex32>,
}

impl RawFrame {
    pub fn zeros(num_chirps: usize, num_tx: usize, num_rx: usize, num_samples: usize) -> Self {
        Self {
            num_chirps,
            num_tx,
            num_rx,
            num_samples,
            samples: vec![Complex32::new(0.0, 0.0); num_chirps * num_tx * num_rx * num_samples],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.num_chirps, self.num_tx, self.num_rx, self.num_samples)
    }

    pub fn num_channels(&self) -> usize {
        self.num_tx * self.num_rx
    }

    #[inline]
    pub fn index(&self, chirp: usize, tx: usize, rx: usize, sample: usize) -> usize {
        ((chirp * self.num_tx + tx) * self.num_rx + rx) * self.num_samples + sample
    }

    pub fn get(&self, chirp: usize, tx: usize, rx: usize, sample: usize) -> Complex32 {
        self.samples[self.index(chirp, tx, rx, sample)]
    }

    /// Fast-time samples of one chirp on one (tx, rx) channel.
    pub fn chirp(&self, chirp: usize, tx: usize, rx: usize) -> &[Complex32] {
        let start = self.index(chirp, tx, rx, 0);
        &self.samples[start..start + self.num_samples]
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr() as f64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SimWarning {
    /// Scatterer range outside `(0, max_range)`: its beat tone aliases.
    RangeAliased { scatterer: usize, range: f64 },
    /// Radial velocity beyond `±max_velocity`: its Doppler wraps.
    VelocityAliased { scatterer: usize, velocity: f64 },
}

#[derive(Debug, Clone)]
pub struct SimulatedFrame {
    pub frame: RawFrame,
    pub warnings: Vec<SimWarning>,
}

/// Simulator bound to one radar configuration and antenna layout.
#[derive(Debug, Clone)]
pub struct EchoSimulator {
    config: RadarConfig,
    array: VirtualArray,
}

impl EchoSimulator {
    pub fn new(config: &RadarConfig, geometry: &ArrayGeometry) -> Result<Self, SimError> {
        config.validate()?;
        geometry.validate_for(config)?;
        Ok(Self {
            config: config.clone(),
            array: virtual_array(geometry),
        })
    }

    pub fn config(&self) -> &RadarConfig {
        &self.config
    }

    pub fn array(&self) -> &VirtualArray {
        &self.array
    }

    /// Simulates frame `frame_index` of a scene whose scatterers move
    /// radially at constant velocity from their frame-0 ranges.
    pub fn simulate_frame(&self, scene: &Scene, frame_index: usize) -> SimulatedFrame {
        let elapsed = frame_index as f64 * self.config.frame_period;
        self.simulate_at(scene, elapsed, frame_index as u64)
    }

    /// Simulates the scene `elapsed` seconds after its reference time, with
    /// receiver noise drawn from RNG stream `stream` of the scene seed.
    pub fn simulate_at(&self, scene: &Scene, elapsed: f64, stream: u64) -> SimulatedFrame {
        let cfg = &self.config;
        let (nc, nt, nr, ns) = (cfg.chirps_per_frame, cfg.num_tx, cfg.num_rx, cfg.samples_per_chirp);
        let lambda = cfg.wavelength();
        let max_range = cfg.max_range();
        let max_velocity = cfg.max_velocity();
        let mut acc = vec![Complex64::new(0.0, 0.0); nc * nt * nr * ns];
        let mut warnings = Vec::new();

        let mut range_phasor = vec![Complex64::new(0.0, 0.0); ns];
        let mut chirp_phasor = vec![Complex64::new(0.0, 0.0); nc];
        let mut channel_phasor = vec![Complex64::new(0.0, 0.0); nt * nr];

        for (idx, s) in scene.scatterers.iter().enumerate() {
            let range = s.range + s.velocity * elapsed;
            if !(range > 0.0 && range < max_range) {
                warnings.push(SimWarning::RangeAliased { scatterer: idx, range });
            }
            if s.velocity.abs() > max_velocity {
                warnings.push(SimWarning::VelocityAliased {
                    scatterer: idx,
                    velocity: s.velocity,
                });
            }
            let f_if = cfg.beat_frequency(range);
            for (k, p) in range_phasor.iter_mut().enumerate() {
                *p = Complex64::from_polar(1.0, 2.0 * PI * f_if * k as f64 / cfg.sample_rate);
            }
            let dphi = cfg.doppler_phase_step(s.velocity);
            for (c, p) in chirp_phasor.iter_mut().enumerate() {
                *p = Complex64::from_polar(1.0, dphi * c as f64);
            }
            let (theta, phi) = (s.azimuth_deg.to_radians(), s.elevation_deg.to_radians());
            let (u_h, u_v) = (theta.sin() * phi.cos(), phi.sin());
            for e in &self.array.elements {
                let spatial = PI * (e.position.h as f64 * u_h + e.position.v as f64 * u_v);
                let tdm = dphi * e.tx as f64 / nt as f64;
                channel_phasor[e.tx * nr + e.rx] = Complex64::from_polar(1.0, spatial + tdm);
            }
            let base = Complex64::from_polar(s.amplitude, 4.0 * PI * range / lambda);

            for c in 0..nc {
                let chirp_coef = base * chirp_phasor[c];
                for ch in 0..nt * nr {
                    let coef = chirp_coef * channel_phasor[ch];
                    let start = (c * nt * nr + ch) * ns;
                    for (out, p) in acc[start..start + ns].iter_mut().zip(&range_phasor) {
                        *out += coef * p;
                    }
                }
            }
        }

        if scene.noise_std > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(scene.rng_seed);
            rng.set_stream(stream);
            let scale = scene.noise_std / std::f64::consts::SQRT_2;
            for z in acc.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z += Complex64::new(re * scale, im * scale);
            }
        }

        let samples = acc.into_iter().map(|z| Complex32::new(z.re as f32, z.im as f32)).collect();
        SimulatedFrame {
            frame: RawFrame {
                num_chirps: nc,
                num_tx: nt,
                num_rx: nr,
                num_samples: ns,
                samples,
            },
            warnings,
        }
    }
}

/// Convenience wrapper building a one-off simulator.
pub fn simulate_frame(
    scene: &Scene,
    config: &RadarConfig,
    geometry: &ArrayGeometry,
    frame_index: usize,
) -> Result<SimulatedFrame, SimError> {
    Ok(EchoSimulator::new(config, geometry)?.simulate_frame(scene, frame_index))
}

/// How a carried object is presented to the radar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Open,
    Concealed,
}

/// Point scatterer in subject-local coordinates. `lateral` is to the
/// subject's right as seen from the radar, `depth` points away from the
/// radar along the line of sight and `height` is above the floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPoint {
    pub lateral: f64,
    pub depth: f64,
    pub height: f64,
    pub amplitude: f64,
}

const fn pt(lateral: f64, depth: f64, height: f64, amplitude: f64) -> LocalPoint {
    LocalPoint {
        lateral,
        depth,
        height,
        amplitude,
    }
}

/// Pedestrian body: a vertical stack of returns from head to legs.
pub const BODY_TEMPLATE: [LocalPoint; 8] = [
    pt(0.0, 0.0, 1.65, 1.0),
    pt(0.0, 0.0, 1.35, 2.0),
    pt(0.0, 0.0, 1.10, 2.0),
    pt(0.0, 0.02, 0.90, 1.5),
    pt(-0.12, 0.0, 0.50, 1.0),
    pt(0.12, 0.0, 0.50, 1.0),
    pt(-0.25, 0.02, 1.10, 0.8),
    pt(0.25, 0.02, 1.10, 0.8),
];

/// Synthetic object signatures. These are not physical radar cross
/// sections; they only need to be distinct so the learning problem is
/// well posed.
///
/// * laptop: a broad plate of four strong returns 15 cm in front of the torso
/// * phone: one compact strong return held 35 cm in front, to the right
/// * knife: a thin vertical line of three returns 25 cm behind the left hip
///
/// Each class sits at its own depth, so the classes separate in range as
/// well as in angle.
pub fn object_template(class: ObjectClass) -> &'static [LocalPoint] {
    const LAPTOP: [LocalPoint; 4] = [
        pt(-0.15, -0.15, 1.05, 1.8),
        pt(-0.05, -0.15, 1.05, 1.8),
        pt(0.05, -0.15, 1.05, 1.8),
        pt(0.15, -0.15, 1.05, 1.8),
    ];
    const PHONE: [LocalPoint; 1] = [pt(0.30, -0.35, 1.00, 3.0)];
    const KNIFE: [LocalPoint; 3] = [
        pt(-0.35, 0.25, 0.80, 2.5),
        pt(-0.35, 0.25, 0.90, 2.5),
        pt(-0.35, 0.25, 1.00, 2.5),
    ];
    match class {
        ObjectClass::Laptop => &LAPTOP,
        ObjectClass::Phone => &PHONE,
        ObjectClass::Knife => &KNIFE,
    }
}

/// Placement and amplitude statistics for generated subjects.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SubjectParams {
    pub range_min: f64,
    pub range_max: f64,
    pub azimuth_max_deg: f64,
    pub radar_height: f64,
    pub noise_std: f64,
    /// Amplitudes scale as `(reference_range / r)^falloff_exponent`.
    pub reference_range: f64,
    pub falloff_exponent: f64,
    /// Relative one-sigma amplitude jitter per scatterer.
    pub amplitude_jitter: f64,
    /// One-sigma position jitter per scatterer, metres.
    pub position_jitter: f64,
    /// Object amplitude factor for concealed placement.
    pub concealed_attenuation: f64,
    pub clutter_points: usize,
    pub clutter_amplitude: f64,
}

impl Default for SubjectParams {
    fn default() -> Self {
        Self {
            range_min: 1.5,
            range_max: 8.0,
            azimuth_max_deg: 30.0,
            radar_height: 1.0,
            noise_std: 4.0,
            reference_range: 3.0,
            falloff_exponent: 1.0,
            amplitude_jitter: 0.15,
            position_jitter: 0.02,
            concealed_attenuation: 0.5,
            clutter_points: 3,
            clutter_amplitude: 0.5,
        }
    }
}

/// A subject carrying zero or more objects, with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub scene: Scene,
    pub labels: Labels,
    /// Subject centre as (range m, azimuth deg).
    pub subject_center: (f64, f64),
    pub placement: Placement,
    /// Scatterers in subject-local coordinates, amplitudes before range falloff.
    pub points: Vec<LocalPoint>,
    pub params: SubjectParams,
}

impl LabeledScene {
    /// Places the local points around a subject centre given in ground-plane
    /// Cartesian coordinates, with every point moving at `velocity` (m/s).
    pub fn scene_at(&self, center_xy: (f64, f64), velocity: (f64, f64)) -> Scene {
        let (cx, cy) = center_xy;
        let norm = (cx * cx + cy * cy).sqrt().max(1e-9);
        let (ux, uy) = (cx / norm, cy / norm);
        let (wx, wy) = (uy, -ux);
        let p = &self.params;
        let scatterers = self
            .points
            .iter()
            .map(|lp| {
                let x = cx + lp.lateral * wx + lp.depth * ux;
                let y = cy + lp.lateral * wy + lp.depth * uy;
                let z = lp.height - p.radar_height;
                let r = (x * x + y * y + z * z).sqrt();
                let radial = (x * velocity.0 + y * velocity.1) / r;
                let falloff = (p.reference_range / r).powf(p.falloff_exponent);
                Scatterer {
                    range: r,
                    velocity: radial,
                    azimuth_deg: x.atan2(y).to_degrees(),
                    elevation_deg: (z / r).asin().to_degrees(),
                    amplitude: lp.amplitude * falloff,
                }
            })
            .collect();
        Scene {
            scatterers,
            noise_std: self.scene.noise_std,
            rng_seed: self.scene.rng_seed,
        }
    }

    pub fn center_xy(&self) -> (f64, f64) {
        polar_to_xy(self.subject_center.0, self.subject_center.1)
    }
}

/// Ground-plane coordinates `(x, y) = (r sinθ, r cosθ)` of a polar position.
pub fn polar_to_xy(range: f64, azimuth_deg: f64) -> (f64, f64) {
    let t = azimuth_deg.to_radians();
    (range * t.sin(), range * t.cos())
}

pub fn xy_to_polar(x: f64, y: f64) -> (f64, f64) {
    ((x * x + y * y).sqrt(), x.atan2(y).to_degrees())
}

pub fn make_labeled_scene(classes: &[ObjectClass], placement: Placement, rng_seed: u64) -> LabeledScene {
    make_labeled_scene_with(classes, placement, rng_seed, &SubjectParams::default())
}

pub fn make_labeled_scene_with(
    classes: &[ObjectClass],
    placement: Placement,
    rng_seed: u64,
    params: &SubjectParams,
) -> LabeledScene {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0x5ce7_e5ce_0000_0001);
    let range = rng.random_range(params.range_min..=params.range_max);
    let azimuth = rng.random_range(-params.azimuth_max_deg..=params.azimuth_max_deg);

    let jitter = |lp: &LocalPoint, scale: f64, rng: &mut ChaCha8Rng| {
        let g = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        LocalPoint {
            lateral: lp.lateral + params.position_jitter * g(rng),
            depth: lp.depth + params.position_jitter * g(rng),
            height: lp.height + params.position_jitter * g(rng),
            amplitude: (lp.amplitude * scale * (1.0 + params.amplitude_jitter * g(rng))).max(0.0),
        }
    };

    let mut points: Vec<LocalPoint> = BODY_TEMPLATE.iter().map(|lp| jitter(lp, 1.0, &mut rng)).collect();
    let mut sorted: Vec<ObjectClass> = classes.to_vec();
    sorted.sort();
    sorted.dedup();
    let object_scale = match placement {
        Placement::Open => 1.0,
        Placement::Concealed => params.concealed_attenuation,
    };
    for class in &sorted {
        for lp in object_template(*class) {
            points.push(jitter(lp, object_scale, &mut rng));
        }
    }
    if placement == Placement::Concealed {
        for _ in 0..params.clutter_points {
            points.push(LocalPoint {
                lateral: rng.random_range(-0.3..=0.3),
                depth: rng.random_range(-0.1..=0.1),
                height: rng.random_range(0.8..=1.4),
                amplitude: params.clutter_amplitude,
            });
        }
    }

    let mut labeled = LabeledScene {
        scene: Scene {
            scatterers: Vec::new(),
            noise_std: params.noise_std,
            rng_seed,
        },
        labels: Labels::from_classes(&sorted),
        subject_center: (range, azimuth),
        placement,
        points,
        params: params.clone(),
    };
    let c = labeled.center_xy();
    labeled.scene = labeled.scene_at(c, (0.0, 0.0));
    labeled
}

/// Constant-velocity walk: `heading_deg` is measured from the radar
/// boresight (+y, walking away) towards +x.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Motion {
    pub speed: f64,
    pub heading_deg: f64,
}

impl Motion {
    pub fn velocity(&self) -> (f64, f64) {
        let h = self.heading_deg.to_radians();
        (self.speed * h.sin(), self.speed * h.cos())
    }
}

/// A walking subject, simulated lazily one frame at a time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    labeled: LabeledScene,
    velocity: (f64, f64),
    centers_xy: Vec<(f64, f64)>,
    simulator: EchoSimulator,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.centers_xy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers_xy.is_empty()
    }

    pub fn labeled(&self) -> &LabeledScene {
        &self.labeled
    }

    /// Ground-truth subject centre per frame, (range m, azimuth deg).
    pub fn centers(&self) -> Vec<(f64, f64)> {
        self.centers_xy.iter().map(|&(x, y)| xy_to_polar(x, y)).collect()
    }

    pub fn centers_xy(&self) -> &[(f64, f64)] {
        &self.centers_xy
    }

    pub fn scene(&self, frame: usize) -> Scene {
        self.labeled.scene_at(self.centers_xy[frame], self.velocity)
    }

    pub fn frame(&self, frame: usize) -> SimulatedFrame {
        self.simulator.simulate_at(&self.scene(frame), 0.0, frame as u64)
    }

    pub fn frames(&self) -> impl Iterator<Item = SimulatedFrame> + '_ {
        (0..self.len()).map(move |k| self.frame(k))
    }
}

/// Builds a trajectory of `num_frames` frames. Fails before simulating
/// anything if any scatterer would leave the unambiguous range.
pub fn simulate_trajectory(
    labeled: &LabeledScene,
    motion: Motion,
    num_frames: usize,
    config: &RadarConfig,
    geometry: &ArrayGeometry,
) -> Result<Trajectory, SimError> {
    let simulator = EchoSimulator::new(config, geometry)?;
    let velocity = motion.velocity();
    let (x0, y0) = labeled.center_xy();
    let dt = config.frame_period;
    let centers_xy: Vec<(f64, f64)> = (0..num_frames)
        .map(|k| (x0 + velocity.0 * dt * k as f64, y0 + velocity.1 * dt * k as f64))
        .collect();
    let limit = config.max_range();
    for (frame, &c) in centers_xy.iter().enumerate() {
        for s in labeled.scene_at(c, velocity).scatterers {
            if !(s.range > 0.0 && s.range < limit) {
                return Err(SimError::OutOfRange {
                    frame,
                    range: s.range,
                    limit,
                });
            }
        }
    }
    Ok(Trajectory {
        labeled: labeled.clone(),
        velocity,
        centers_xy,
        simulator,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rustfft::FftPlanner;

    fn sim() -> EchoSimulator {
        EchoSimulator::new(&RadarConfig::default(), &ArrayGeometry::default()).unwrap()
    }

    fn single(range: f64, velocity: f64, az: f64, amp: f64, noise: f64) -> Scene {
        Scene {
            scatterers: vec![Scatterer::new(range, velocity, az, 0.0, amp)],
            noise_std: noise,
            rng_seed: 7,
        }
    }

    #[test]
    fn one_metre_target_peaks_in_bin_17() {
        let cfg = RadarConfig::default();
        let f_if = cfg.beat_frequency(1.0);
        assert_relative_eq!(f_if, 527_031.27, max_relative = 1e-6);
        let expected_bin = (f_if * 256.0 / cfg.sample_rate).round() as usize;
        assert_eq!(expected_bin, 17);

        let frame = sim().simulate_frame(&single(1.0, 0.0, 0.0, 1.0, 0.0), 0).frame;
        let mut buf: Vec<num_complex::Complex<f64>> = frame
            .chirp(0, 0, 0)
            .iter()
            .map(|z| num_complex::Complex::new(z.re as f64, z.im as f64))
            .collect();
        FftPlanner::new().plan_fft_forward(256).process(&mut buf);
        let argmax = (0..256).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        assert_eq!(argmax, 17);
    }

    #[test]
    fn stationary_noise_free_chirps_are_identical() {
        let frame = sim().simulate_frame(&single(2.0, 0.0, 10.0, 1.0, 0.0), 0).frame;
        for c in 1..frame.num_chirps {
            assert_eq!(frame.chirp(c, 3, 5), frame.chirp(0, 3, 5));
        }
    }

    #[test]
    fn one_velocity_bin_advances_phase_by_two_pi_over_chirps() {
        let cfg = RadarConfig::default();
        let v = cfg.velocity_bin_width(cfg.chirps_per_frame);
        let frame = sim().simulate_frame(&single(2.0, v, 0.0, 1.0, 0.0), 0).frame;
        let a = frame.get(0, 0, 0, 0);
        let b = frame.get(1, 0, 0, 0);
        let step = (b * a.conj()).arg() as f64;
        assert!((step - 2.0 * PI / 50.0).abs() < 1e-4, "{step}");
        assert!((step - 0.1257).abs() < 1e-4);
    }

    #[test]
    fn tdm_slot_adds_fractional_doppler() {
        let cfg = RadarConfig::default();
        let v = 1.0;
        let dphi = cfg.doppler_phase_step(v);
        // Co-located TX 6 and TX 11 do not exist; compare TX 0 and TX 1 via
        // RX positions that land on the same virtual position (h = 16).
        let frame = sim().simulate_frame(&single(2.0, v, 0.0, 1.0, 0.0), 0).frame;
        let a = frame.get(0, 0, 15, 0); // h = 15
        let b = frame.get(0, 1, 0, 0); // h = 16
        let spatial = 0.0; // broadside
        let expected = dphi / 12.0 + spatial;
        let got = (b * a.conj()).arg() as f64;
        assert!((got - expected).abs() < 1e-4, "{got} vs {expected}");
    }

    #[test]
    fn energy_scales_with_amplitude_squared() {
        let s = sim();
        let cfg = s.config().clone();
        let per_unit = (cfg.chirps_per_frame * cfg.samples_per_chirp * cfg.num_tx * cfg.num_rx) as f64;
        for amp in [0.5, 1.0, 3.0] {
            let e = s.simulate_frame(&single(4.0, 0.5, -20.0, amp, 0.0), 0).frame.energy();
            assert_relative_eq!(e / (amp * amp * per_unit), 1.0, max_relative = 1e-6);
        }
    }

    #[test]
    fn same_seed_same_bits() {
        let s = sim();
        let scene = single(3.0, 0.3, 5.0, 1.0, 2.0);
        let a = s.simulate_frame(&scene, 4).frame;
        let b = s.simulate_frame(&scene, 4).frame;
        assert_eq!(a.samples, b.samples);
        let c = s.simulate_frame(&Scene { rng_seed: 8, ..scene }, 4).frame;
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn aliased_scatterers_are_flagged() {
        let s = sim();
        let out = s.simulate_frame(&single(20.0, 0.0, 0.0, 1.0, 0.0), 0);
        assert!(matches!(out.warnings[..], [SimWarning::RangeAliased { .. }]));
        let out = s.simulate_frame(&single(3.0, 2.5, 0.0, 1.0, 0.0), 0);
        assert!(matches!(out.warnings[..], [SimWarning::VelocityAliased { .. }]));
        assert!(s.simulate_frame(&single(3.0, 1.0, 0.0, 1.0, 0.0), 0).warnings.is_empty());
    }

    #[test]
    fn labeled_scene_bookkeeping() {
        let body = make_labeled_scene(&[], Placement::Open, 1);
        assert!(body.labels.none());
        assert_eq!(body.scene.scatterers.len(), BODY_TEMPLATE.len());

        let laptop = make_labeled_scene(&[ObjectClass::Laptop], Placement::Open, 1);
        assert_eq!(laptop.labels, Labels([true, false, false]));

        let other = make_labeled_scene(&[ObjectClass::Laptop], Placement::Open, 2);
        assert_eq!(other.labels, laptop.labels);
        assert_ne!(other.scene.scatterers, laptop.scene.scatterers);
        assert_eq!(make_labeled_scene(&[ObjectClass::Laptop], Placement::Open, 1), laptop);
    }

    #[test]
    fn concealed_adds_clutter_and_attenuates() {
        let open = make_labeled_scene(&[ObjectClass::Phone], Placement::Open, 3);
        let hidden = make_labeled_scene(&[ObjectClass::Phone], Placement::Concealed, 3);
        assert_eq!(hidden.points.len(), open.points.len() + SubjectParams::default().clutter_points);
        let phone_amp = |s: &LabeledScene| s.points[BODY_TEMPLATE.len()].amplitude;
        assert!(phone_amp(&hidden) < phone_amp(&open));
    }

    #[test]
    fn trajectory_motion() {
        let cfg = RadarConfig::default();
        let g = ArrayGeometry::default();
        let mut subject = make_labeled_scene(&[], Placement::Open, 11);
        subject.subject_center = (3.0, 0.0);

        let still = simulate_trajectory(&subject, Motion { speed: 0.0, heading_deg: 0.0 }, 5, &cfg, &g).unwrap();
        assert!(still.centers().windows(2).all(|w| w[0] == w[1]));

        let walk = simulate_trajectory(&subject, Motion { speed: 1.0, heading_deg: 0.0 }, 31, &cfg, &g).unwrap();
        let c = walk.centers();
        assert_relative_eq!(c[30].0 - c[0].0, 1.0, max_relative = 1e-9);
        // radial walk: every scatterer recedes.
        assert!(walk.scene(0).scatterers.iter().all(|s| s.velocity > 0.9));

        let long = simulate_trajectory(&subject, Motion { speed: 0.3, heading_deg: 90.0 }, 300, &cfg, &g).unwrap();
        assert_eq!(long.len(), 300);

        let err = simulate_trajectory(&subject, Motion { speed: 1.5, heading_deg: 0.0 }, 300, &cfg, &g);
        assert!(matches!(err, Err(SimError::OutOfRange { .. })));
    }
}
