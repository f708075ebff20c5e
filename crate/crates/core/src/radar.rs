//! Radar configuration, antenna geometry and derived capability figures.
//!
//! All frequencies are in Hz, times in seconds and distances in metres.
//! Antenna positions live on a half-wavelength lattice: a position `(h, v)`
//! sits `h·λ/2` to the right of and `v·λ/2` above the array origin.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, Violation};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Relative tolerance used when checking the chirp-period identity.
const PERIOD_TOLERANCE: f64 = 1e-6;

/// Relative tolerance between the nominal bandwidth and the swept band that
/// is actually sampled (`S · N_s / f_s`).
pub const SWEEP_TOLERANCE: f64 = 0.02;

/// Chirp timing and ADC configuration of an FMCW TDM-MIMO radar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub carrier_frequency: f64,
    pub bandwidth: f64,
    pub sweep_slope: f64,
    pub sample_rate: f64,
    pub chirps_per_frame: usize,
    pub samples_per_chirp: usize,
    /// Interval between two consecutive chirps (one TX slot).
    pub chirp_interval: f64,
    /// Time between two chirps of the same transmitter: `chirp_interval · num_tx`.
    pub chirp_period: f64,
    pub frame_period: f64,
    pub num_tx: usize,
    pub num_rx: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self::tidep_cascade()
    }
}

impl RadarConfig {
    /// 77 GHz four-chip cascade configuration: 12 TX, 16 RX, 50 chirps of
    /// 256 samples, 45 µs TX slots.
    pub fn tidep_cascade() -> Self {
        Self {
            carrier_frequency: 77e9,
            bandwidth: 2.5e9,
            sweep_slope: 79e12,
            sample_rate: 8e6,
            chirps_per_frame: 50,
            samples_per_chirp: 256,
            chirp_interval: 45e-6,
            chirp_period: 540e-6,
            frame_period: 1.0 / 30.0,
            num_tx: 12,
            num_rx: 16,
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Beat frequency produced by a point target at `range`.
    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * range * self.sweep_slope / SPEED_OF_LIGHT
    }

    /// Chirp-to-chirp Doppler phase advance `4π v T_c / λ` (same TX).
    pub fn doppler_phase_step(&self, velocity: f64) -> f64 {
        4.0 * std::f64::consts::PI * velocity * self.chirp_period / self.wavelength()
    }

    /// Width in metres of one bin of an `fft_len`-point range FFT.
    pub fn range_bin_width(&self, fft_len: usize) -> f64 {
        SPEED_OF_LIGHT * self.sample_rate / (2.0 * self.sweep_slope * fft_len as f64)
    }

    /// Width in m/s of one bin of an `fft_len`-point (possibly zero-padded)
    /// velocity FFT.
    pub fn velocity_bin_width(&self, fft_len: usize) -> f64 {
        self.wavelength() / (2.0 * fft_len as f64 * self.chirp_period)
    }

    pub fn max_range(&self) -> f64 {
        self.sample_rate * SPEED_OF_LIGHT / (2.0 * self.sweep_slope)
    }

    pub fn max_velocity(&self) -> f64 {
        self.wavelength() / (4.0 * self.chirp_period)
    }

    /// Checks every invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut violations = Vec::new();
        let positive = [
            ("carrier_frequency", self.carrier_frequency),
            ("bandwidth", self.bandwidth),
            ("sweep_slope", self.sweep_slope),
            ("sample_rate", self.sample_rate),
            ("chirp_interval", self.chirp_interval),
            ("chirp_period", self.chirp_period),
            ("frame_period", self.frame_period),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                violations.push(Violation::NotPositive { field, value });
            }
        }
        let counts = [
            ("chirps_per_frame", self.chirps_per_frame),
            ("samples_per_chirp", self.samples_per_chirp),
            ("num_tx", self.num_tx),
            ("num_rx", self.num_rx),
        ];
        for (field, value) in counts {
            if value == 0 {
                violations.push(Violation::NotPositive { field, value: 0.0 });
            }
        }
        if violations.is_empty() {
            let expected = self.chirp_interval * self.num_tx as f64;
            if (self.chirp_period - expected).abs() > PERIOD_TOLERANCE * expected {
                violations.push(Violation::ChirpPeriod {
                    chirp_period: self.chirp_period,
                    expected,
                });
            }
            let sampled = self.sweep_slope * self.samples_per_chirp as f64 / self.sample_rate;
            if (self.bandwidth - sampled).abs() > SWEEP_TOLERANCE * sampled {
                violations.push(Violation::SweepCoverage {
                    bandwidth: self.bandwidth,
                    sampled,
                });
            }
            if self.chirp_period * self.chirps_per_frame as f64 > self.frame_period {
                violations.push(Violation::FrameTooShort {
                    burst: self.chirp_period * self.chirps_per_frame as f64,
                    frame_period: self.frame_period,
                });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let config = Self::from_toml_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("radar config serializes")
    }
}

/// Antenna position on the half-wavelength lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub h: i32,
    pub v: i32,
}

impl Position {
    pub const fn new(h: i32, v: i32) -> Self {
        Self { h, v }
    }
}

impl std::ops::Add for Position {
    type Output = Position;
    fn add(self, rhs: Position) -> Position {
        Position::new(self.h + rhs.h, self.v + rhs.v)
    }
}

/// Physical TX and RX element positions. The TX order is the TDM firing
/// order: transmitter `m` fires in slot `m` of every chirp period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub tx_positions: Vec<Position>,
    pub rx_positions: Vec<Position>,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self::cascade_equivalent()
    }
}

impl ArrayGeometry {
    /// Idealized 12 TX / 16 RX layout whose virtual array has a contiguous
    /// 86-element horizontal row and six vertical rows (192 elements).
    ///
    /// The RX array is a 16-element half-wavelength line. Six transmitters on
    /// the baseline tile horizontal positions 0..=85 (the last one overlaps
    /// ten positions of its neighbour), the remaining six are raised by one
    /// to five half-wavelengths above the array centre.
    pub fn cascade_equivalent() -> Self {
        let rx_positions = (0..16).map(|h| Position::new(h, 0)).collect();
        let tx_positions = vec![
            Position::new(0, 0),
            Position::new(16, 0),
            Position::new(32, 0),
            Position::new(48, 0),
            Position::new(64, 0),
            Position::new(70, 0),
            Position::new(35, 1),
            Position::new(35, 2),
            Position::new(35, 3),
            Position::new(35, 4),
            Position::new(35, 5),
            Position::new(19, 1),
        ];
        Self {
            tx_positions,
            rx_positions,
        }
    }

    /// Checks the element counts against a radar configuration.
    pub fn validate_for(&self, config: &RadarConfig) -> Result<(), ConfigError> {
        let mut violations = Vec::new();
        if self.tx_positions.len() != config.num_tx {
            violations.push(Violation::ElementCount {
                role: "tx",
                geometry: self.tx_positions.len(),
                config: config.num_tx,
            });
        }
        if self.rx_positions.len() != config.num_rx {
            violations.push(Violation::ElementCount {
                role: "rx",
                geometry: self.rx_positions.len(),
                config: config.num_rx,
            });
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(violations))
        }
    }

    /// Parses the position-list format:
    ///
    /// ```text
    /// # comment
    /// [tx]
    /// 0 0
    /// 16 0
    /// [rx]
    /// 0 0
    /// ```
    ///
    /// Each data line holds the horizontal and vertical offset of one
    /// antenna in half-wavelength units.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut tx = Vec::new();
        let mut rx = Vec::new();
        let mut section: Option<&mut Vec<Position>> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            match line {
                "[tx]" => section = Some(&mut tx),
                "[rx]" => section = Some(&mut rx),
                _ => {
                    let err = |msg: &str| ConfigError::Parse(format!("geometry line {}: {msg}", lineno + 1));
                    let target = section.as_mut().ok_or_else(|| err("position before [tx]/[rx] header"))?;
                    let cols: Vec<&str> = line.split_whitespace().collect();
                    if cols.len() != 2 {
                        return Err(err("expected two columns `h v`"));
                    }
                    let h = cols[0].parse().map_err(|_| err("horizontal offset is not an integer"))?;
                    let v = cols[1].parse().map_err(|_| err("vertical offset is not an integer"))?;
                    target.push(Position::new(h, v));
                }
            }
        }
        if tx.is_empty() || rx.is_empty() {
            return Err(ConfigError::Parse("geometry needs at least one tx and one rx".into()));
        }
        Ok(Self {
            tx_positions: tx,
            rx_positions: rx,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# antenna offsets in half-wavelength units: h v\n[tx]\n");
        for p in &self.tx_positions {
            out.push_str(&format!("{} {}\n", p.h, p.v));
        }
        out.push_str("[rx]\n");
        for p in &self.rx_positions {
            out.push_str(&format!("{} {}\n", p.h, p.v));
        }
        out
    }
}

/// One element of the MIMO virtual array with its TX/RX provenance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VirtualElement {
    pub position: Position,
    pub tx: usize,
    pub rx: usize,
}

/// Virtual array formed by the spatial convolution of TX and RX positions.
/// Element `m * num_rx + n` comes from TX `m` and RX `n`, matching the
/// channel order of [`crate::sim::RawFrame`].
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualArray {
    pub elements: Vec<VirtualElement>,
    pub num_tx: usize,
    pub num_rx: usize,
}

impl VirtualArray {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Positions occupied by more than one element, with the indices of the
    /// elements sharing them. Overlaps are kept as separate elements.
    pub fn duplicate_positions(&self) -> Vec<(Position, Vec<usize>)> {
        let mut by_pos: BTreeMap<Position, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.elements.iter().enumerate() {
            by_pos.entry(e.position).or_default().push(i);
        }
        by_pos.into_iter().filter(|(_, idx)| idx.len() > 1).collect()
    }

    pub fn unique_positions(&self) -> usize {
        let mut positions: Vec<Position> = self.elements.iter().map(|e| e.position).collect();
        positions.sort();
        positions.dedup();
        positions.len()
    }

    /// Horizontal extent `h_max - h_min + 1` in half-wavelength cells.
    pub fn horizontal_extent(&self) -> usize {
        extent(self.elements.iter().map(|e| e.position.h))
    }

    /// Vertical extent `v_max - v_min + 1` in half-wavelength cells.
    pub fn vertical_extent(&self) -> usize {
        extent(self.elements.iter().map(|e| e.position.v))
    }

    /// Distinct vertical offsets, ascending.
    pub fn rows(&self) -> Vec<i32> {
        let mut rows: Vec<i32> = self.elements.iter().map(|e| e.position.v).collect();
        rows.sort_unstable();
        rows.dedup();
        rows
    }

    /// Vertical offset of the row with the most distinct horizontal
    /// positions (lowest offset wins ties).
    pub fn azimuth_row(&self) -> i32 {
        let mut best = (0usize, 0i32);
        for v in self.rows() {
            let mut hs: Vec<i32> = self
                .elements
                .iter()
                .filter(|e| e.position.v == v)
                .map(|e| e.position.h)
                .collect();
            hs.sort_unstable();
            hs.dedup();
            if hs.len() > best.0 {
                best = (hs.len(), v);
            }
        }
        best.1
    }

    /// Length of the longest run of consecutive horizontal positions in row `v`.
    pub fn contiguous_run(&self, v: i32) -> usize {
        let mut hs: Vec<i32> = self
            .elements
            .iter()
            .filter(|e| e.position.v == v)
            .map(|e| e.position.h)
            .collect();
        hs.sort_unstable();
        hs.dedup();
        let mut best = 0;
        let mut run = 0;
        let mut prev: Option<i32> = None;
        for h in hs {
            run = match prev {
                Some(p) if h == p + 1 => run + 1,
                _ => 1,
            };
            best = best.max(run);
            prev = Some(h);
        }
        best
    }
}

fn extent(values: impl Iterator<Item = i32>) -> usize {
    let (lo, hi) = values.fold((i32::MAX, i32::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)));
    if lo > hi {
        0
    } else {
        (hi - lo + 1) as usize
    }
}

/// Forms the virtual array: one element per (TX, RX) pair at the sum of
/// their positions.
pub fn virtual_array(geometry: &ArrayGeometry) -> VirtualArray {
    let mut elements = Vec::with_capacity(geometry.tx_positions.len() * geometry.rx_positions.len());
    for (tx, &tp) in geometry.tx_positions.iter().enumerate() {
        for (rx, &rp) in geometry.rx_positions.iter().enumerate() {
            elements.push(VirtualElement {
                position: tp + rp,
                tx,
                rx,
            });
        }
    }
    VirtualArray {
        elements,
        num_tx: geometry.tx_positions.len(),
        num_rx: geometry.rx_positions.len(),
    }
}

/// Resolution and ambiguity limits implied by a configuration and array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarCapabilities {
    pub range_resolution: f64,
    pub max_range: f64,
    pub velocity_resolution: f64,
    pub max_velocity: f64,
    pub azimuth_resolution_deg: f64,
    pub elevation_resolution_deg: f64,
}

impl fmt::Display for RadarCapabilities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "range res {:.4} m, max range {:.3} m, velocity res {:.4} m/s, max velocity {:.4} m/s, azimuth res {:.3} deg, elevation res {:.3} deg",
            self.range_resolution,
            self.max_range,
            self.velocity_resolution,
            self.max_velocity,
            self.azimuth_resolution_deg,
            self.elevation_resolution_deg
        )
    }
}

pub fn derive_capabilities(
    config: &RadarConfig,
    geometry: &ArrayGeometry,
) -> Result<RadarCapabilities, ConfigError> {
    config.validate()?;
    geometry.validate_for(config)?;
    let array = virtual_array(geometry);
    let lambda = config.wavelength();
    // Beamwidth of an N-cell half-wavelength aperture is about 2/N rad.
    let angular = |cells: usize| (2.0 / cells as f64).to_degrees();
    Ok(RadarCapabilities {
        range_resolution: SPEED_OF_LIGHT / (2.0 * config.bandwidth),
        max_range: config.max_range(),
        velocity_resolution: lambda / (2.0 * config.chirps_per_frame as f64 * config.chirp_period),
        max_velocity: config.max_velocity(),
        azimuth_resolution_deg: angular(array.horizontal_extent()),
        elevation_resolution_deg: angular(array.vertical_extent()),
    })
}

/// Stable 64-bit digest of a configuration and geometry, stored in binary
/// headers so files from different setups are never mixed.
pub fn config_hash(config: &RadarConfig, geometry: &ArrayGeometry) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(config.to_toml_string().as_bytes());
    hasher.update(geometry.to_text().as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
