//! Constant-velocity Kalman filtering of cluster centres in the ground
//! plane, Hungarian assignment and a simple track lifecycle.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::TrackingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerParams {
    /// Maximum centre distance for an assignment, m.
    pub gate: f64,
    /// Consecutive hits before a track is confirmed.
    pub confirm_hits: u32,
    /// Consecutive misses after which a track is dropped.
    pub max_misses: u32,
    /// White-acceleration standard deviation, m/s².
    pub process_noise: f64,
    /// Per-axis measurement standard deviation at `reference_range`, m.
    pub measurement_std: f64,
    pub reference_range: f64,
    /// Initial velocity standard deviation of a new track, m/s.
    pub initial_velocity_std: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            gate: 1.0,
            confirm_hits: 3,
            max_misses: 5,
            process_noise: 0.5,
            measurement_std: 0.05,
            reference_range: 3.0,
            initial_velocity_std: 1.0,
        }
    }
}

impl TrackerParams {
    /// Measurement covariance in Cartesian coordinates, inflated linearly
    /// beyond the reference range.
    pub fn measurement_noise(&self, range_m: f64) -> Matrix2<f64> {
        let s = self.measurement_std * (range_m / self.reference_range).max(1.0);
        Matrix2::identity() * (s * s)
    }

    pub fn process_covariance(&self, dt: f64) -> Matrix4<f64> {
        let q = self.process_noise * self.process_noise * dt;
        Matrix4::from_diagonal(&Vector4::new(dt * dt, dt * dt, 1.0, 1.0)) * q
    }
}

/// Polar measurement of a cluster centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub range_m: f64,
    pub azimuth_deg: f64,
}

impl Measurement {
    /// Ground-plane position, x to the right and y along boresight.
    pub fn to_xy(self) -> Vector2<f64> {
        let t = self.azimuth_deg.to_radians();
        Vector2::new(self.range_m * t.sin(), self.range_m * t.cos())
    }
}

/// Filter state (x, y, vx, vy) and covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

fn symmetrize(p: Matrix4<f64>) -> Matrix4<f64> {
    (p + p.transpose()) * 0.5
}

impl KalmanState {
    pub fn new(position: Vector2<f64>, position_cov: Matrix2<f64>, velocity_std: f64) -> Self {
        let mut p = Matrix4::zeros();
        p.fixed_view_mut::<2, 2>(0, 0).copy_from(&position_cov);
        p[(2, 2)] = velocity_std * velocity_std;
        p[(3, 3)] = velocity_std * velocity_std;
        Self {
            x: Vector4::new(position.x, position.y, 0.0, 0.0),
            p,
        }
    }

    pub fn position(&self) -> Vector2<f64> {
        Vector2::new(self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> Vector2<f64> {
        Vector2::new(self.x[2], self.x[3])
    }

    /// Constant-velocity propagation over `dt` with process covariance `q`.
    pub fn predict(&self, dt: f64, q: &Matrix4<f64>) -> Self {
        assert!(dt > 0.0, "dt must be positive");
        let mut f = Matrix4::identity();
        f[(0, 2)] = dt;
        f[(1, 3)] = dt;
        Self {
            x: f * self.x,
            p: symmetrize(f * self.p * f.transpose() + q),
        }
    }

    /// Linear update on a Cartesian position measurement (Joseph form).
    pub fn update(&self, z: Vector2<f64>, r: &Matrix2<f64>) -> Result<Self, TrackingError> {
        check_psd(r)?;
        let h = observation();
        let s = h * self.p * h.transpose() + r;
        let s_inv = s.try_inverse().ok_or(TrackingError::Singular)?;
        let k = self.p * h.transpose() * s_inv;
        let innovation = z - h * self.x;
        let ikh = Matrix4::identity() - k * h;
        Ok(Self {
            x: self.x + k * innovation,
            p: symmetrize(ikh * self.p * ikh.transpose() + k * r * k.transpose()),
        })
    }

    /// Update from a polar measurement.
    pub fn update_polar(&self, m: Measurement, r: &Matrix2<f64>) -> Result<Self, TrackingError> {
        self.update(m.to_xy(), r)
    }
}

fn check_psd(r: &Matrix2<f64>) -> Result<(), TrackingError> {
    let asym = (r[(0, 1)] - r[(1, 0)]).abs();
    let scale = r.abs().max().max(1.0);
    if asym > 1e-12 * scale || !r.iter().all(|v| v.is_finite()) {
        return Err(TrackingError::NonPsdNoise(f64::NAN));
    }
    let min_eig = r.symmetric_eigenvalues().min();
    if min_eig < 0.0 {
        return Err(TrackingError::NonPsdNoise(min_eig));
    }
    Ok(())
}

/// Result of a rectangular assignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// (row, column) pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
    /// Sum of the costs of `pairs`.
    pub cost: f64,
}

/// Minimum-cost one-to-one assignment (Kuhn-Munkres with potentials,
/// O(n²m)). Infinite entries are forbidden pairs: the solver first
/// maximizes the number of finite pairs, then minimizes their total cost.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    let m = cost.first().map_or(0, |r| r.len());
    assert!(cost.iter().all(|r| r.len() == m), "ragged cost matrix");
    if n == 0 || m == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
            cost: 0.0,
        };
    }
    let finite_sum: f64 = cost.iter().flatten().filter(|c| c.is_finite()).map(|c| c.abs()).sum();
    let big = 2.0 * finite_sum + 1.0;
    let transposed = n > m;
    let (rows, cols) = if transposed { (m, n) } else { (n, m) };
    let at = |i: usize, j: usize| -> f64 {
        let c = if transposed { cost[j][i] } else { cost[i][j] };
        if c.is_finite() {
            c
        } else {
            big
        }
    };

    // 1-based potentials; way[j] is the previous column on the
    // alternating path, p[j] the row matched to column j.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut p = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    for i in 1..=rows {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::new();
    for j in 1..=cols {
        if p[j] != 0 {
            let (r, c) = if transposed { (j - 1, p[j] - 1) } else { (p[j] - 1, j - 1) };
            if cost[r][c].is_finite() {
                pairs.push((r, c));
            }
        }
    }
    pairs.sort_unstable();
    let total = pairs.iter().map(|&(r, c)| cost[r][c]).sum();
    let unmatched_rows = (0..n).filter(|r| !pairs.iter().any(|p| p.0 == *r)).collect();
    let unmatched_cols = (0..m).filter(|c| !pairs.iter().any(|p| p.1 == *c)).collect();
    Assignment {
        pairs,
        unmatched_rows,
        unmatched_cols,
        cost: total,
    }
}

/// One subject hypothesis with its cube history.
#[derive(Debug, Clone)]
pub struct Track<T> {
    pub id: u64,
    pub state: KalmanState,
    /// Frames since creation.
    pub age: u32,
    /// Consecutive frames with an assigned detection.
    pub hit_count: u32,
    /// Consecutive frames without one.
    pub miss_count: u32,
    pub confirmed: bool,
    pub history: Vec<T>,
}

/// What happened to the track set in one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// (track id, detection index).
    pub matched: Vec<(u64, usize)>,
    pub spawned: Vec<(u64, usize)>,
    pub deleted: Vec<u64>,
    pub confirmed: Vec<u64>,
}

/// Frame-sequential multi-target tracker carrying a payload per hit.
#[derive(Debug, Clone)]
pub struct Tracker<T> {
    params: TrackerParams,
    tracks: Vec<Track<T>>,
    next_id: u64,
}

impl<T> Tracker<T> {
    pub fn new(params: TrackerParams) -> Self {
        Self {
            params,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    pub fn params(&self) -> &TrackerParams {
        &self.params
    }

    pub fn tracks(&self) -> &[Track<T>] {
        &self.tracks
    }

    pub fn track(&self, id: u64) -> Option<&Track<T>> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Predicts every track by `dt`, gates and assigns the new detections,
    /// updates matched tracks, ages unmatched ones and spawns tentative
    /// tracks for leftover detections.
    pub fn step(&mut self, detections: Vec<(Measurement, T)>, dt: f64) -> Result<StepReport, TrackingError> {
        let q = self.params.process_covariance(dt);
        for t in &mut self.tracks {
            t.state = t.state.predict(dt, &q);
            t.age += 1;
        }
        let points: Vec<Vector2<f64>> = detections.iter().map(|(m, _)| m.to_xy()).collect();
        let cost: Vec<Vec<f64>> = self
            .tracks
            .iter()
            .map(|t| {
                points
                    .iter()
                    .map(|z| {
                        let d = (t.state.position() - z).norm();
                        if d > self.params.gate {
                            f64::INFINITY
                        } else {
                            d
                        }
                    })
                    .collect()
            })
            .collect();
        let assignment = if self.tracks.is_empty() {
            Assignment {
                pairs: Vec::new(),
                unmatched_rows: Vec::new(),
                unmatched_cols: (0..detections.len()).collect(),
                cost: 0.0,
            }
        } else {
            hungarian(&cost)
        };

        let mut report = StepReport::default();
        let mut payloads: Vec<Option<(Measurement, T)>> = detections.into_iter().map(Some).collect();
        for &(ti, di) in &assignment.pairs {
            let (m, payload) = payloads[di].take().expect("detection assigned twice");
            let t = &mut self.tracks[ti];
            let r = self.params.measurement_noise(m.range_m);
            t.state = t.state.update_polar(m, &r)?;
            t.hit_count += 1;
            t.miss_count = 0;
            t.history.push(payload);
            if !t.confirmed && t.hit_count >= self.params.confirm_hits {
                t.confirmed = true;
                report.confirmed.push(t.id);
            }
            report.matched.push((t.id, di));
        }
        for &ti in &assignment.unmatched_rows {
            let t = &mut self.tracks[ti];
            t.miss_count += 1;
            t.hit_count = 0;
        }
        let max_misses = self.params.max_misses;
        self.tracks.retain(|t| {
            let keep = t.miss_count < max_misses;
            if !keep {
                report.deleted.push(t.id);
            }
            keep
        });
        for (di, slot) in payloads.into_iter().enumerate() {
            if let Some((m, payload)) = slot {
                let id = self.next_id;
                self.next_id += 1;
                let r = self.params.measurement_noise(m.range_m);
                let mut track = Track {
                    id,
                    state: KalmanState::new(m.to_xy(), r, self.params.initial_velocity_std),
                    age: 0,
                    hit_count: 1,
                    miss_count: 0,
                    confirmed: false,
                    history: vec![payload],
                };
                if self.params.confirm_hits <= 1 {
                    track.confirmed = true;
                    report.confirmed.push(id);
                }
                self.tracks.push(track);
                report.spawned.push((id, di));
            }
        }
        Ok(report)
    }
}
