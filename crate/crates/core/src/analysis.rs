//! Post-processing: swimming speed, centerline force components,
//! flagelloid curve extraction, hypotrochoid generation and fitting,
//! curvature profiles and maximum-distance metrics.
//!
//! The hypotrochoid fit follows the two-circular-motions construction:
//! the roll frequency comes from the first full rotation of the
//! recentered point, the lobe count from the mean angular separation of
//! radial minima, and the radii from the averaged minimum/maximum center
//! distances. No least-squares minimization is involved.

use crate::elasticity::PointLoads;
use crate::error::Error;
use crate::rod::{
    actual_strain_twist, phase_half_points, preferred_curvature, preferred_strain_twist,
    solve_phase, RodState, WaveParams,
};
use crate::sim::SimRecord;
use crate::Vec3;

/// Time series of positions for one material point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub positions: Vec<Vec3>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, positions: Vec<Vec3>) -> Result<Self, Error> {
        if times.len() != positions.len() || times.is_empty() {
            return Err(Error::InvalidParameters(
                "trajectory needs matching, non-empty time and position arrays".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameters(
                "trajectory timestamps must be strictly increasing".into(),
            ));
        }
        Ok(Trajectory { times, positions })
    }

    fn position_at(&self, t: f64) -> Result<Vec3, Error> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if t < t0 - 1e-12 || t > t1 + 1e-12 {
            return Err(Error::MissingData(format!(
                "time {t} outside trajectory range [{t0}, {t1}]"
            )));
        }
        let idx = self.times.partition_point(|v| *v < t);
        if idx == 0 {
            return Ok(self.positions[0]);
        }
        if idx >= self.times.len() {
            return Ok(*self.positions.last().unwrap());
        }
        let (ta, tb) = (self.times[idx - 1], self.times[idx]);
        let w = (t - ta) / (tb - ta);
        Ok(self.positions[idx - 1] * (1.0 - w) + self.positions[idx] * w)
    }
}

/// Mean displacement speed of the window endpoints (μm/s).
pub fn linear_speed(traj: &Trajectory, window: (f64, f64)) -> Result<f64, Error> {
    let (t0, t1) = window;
    if !(t1 > t0) {
        return Err(Error::InvalidParameters(
            "speed window must have positive length".into(),
        ));
    }
    let p0 = traj.position_at(t0)?;
    let p1 = traj.position_at(t1)?;
    Ok((p1 - p0).norm() / (t1 - t0))
}

/// Centerline frame: first point P1, center of mass P2, and swimming
/// direction u = P1 − P2.
pub fn centerline_frame(rod: &RodState) -> (Vec3, Vec3, Vec3) {
    let p1 = rod.points[0];
    let p2 = rod.points.iter().sum::<Vec3>() / rod.points.len() as f64;
    (p1, p2, p1 - p2)
}

/// Rod region used for centerline force averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForceRegion {
    /// First 20 points of the spatial discretization.
    Front20,
    /// Last 20 points.
    Back20,
}

/// Mean centerline component of the force the rod applies to the fluid,
/// f_c = f^r · u/|u|, over the chosen 20-point region.
pub fn centerline_force_component(
    loads: &PointLoads,
    rod: &RodState,
    region: ForceRegion,
) -> Result<f64, Error> {
    let n = loads.f.len();
    if n < 20 {
        return Err(Error::InvalidParameters(
            "need at least 20 discretization points".into(),
        ));
    }
    let (_, _, u) = centerline_frame(rod);
    let u_hat = u / u.norm();
    let range = match region {
        ForceRegion::Front20 => 0..20,
        ForceRegion::Back20 => n - 20..n,
    };
    let mut total = 0.0;
    for k in range {
        // the rod pushes -f on the fluid
        total += (-loads.f[k]).dot(&u_hat);
    }
    Ok(total / 20.0)
}

/// Planar trace of one material point on the yz-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct FCurve {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl FCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn radius(&self) -> Vec<f64> {
        self.y
            .iter()
            .zip(&self.z)
            .map(|(y, z)| (y * y + z * z).sqrt())
            .collect()
    }

    fn angles_unwrapped(&self) -> Vec<f64> {
        let raw: Vec<f64> = self
            .y
            .iter()
            .zip(&self.z)
            .map(|(y, z)| z.atan2(*y))
            .collect();
        unwrap_angles(&raw)
    }
}

/// Remove 2π jumps from an angle series.
pub fn unwrap_angles(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (i, &a) in raw.iter().enumerate() {
        if i > 0 {
            let prev = raw[i - 1];
            let mut delta = a - prev;
            while delta > std::f64::consts::PI {
                delta -= 2.0 * std::f64::consts::PI;
                offset -= 2.0 * std::f64::consts::PI;
            }
            while delta < -std::f64::consts::PI {
                delta += 2.0 * std::f64::consts::PI;
                offset += 2.0 * std::f64::consts::PI;
            }
        }
        out.push(a + offset);
    }
    out
}

fn moving_average(values: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return values.to_vec();
    }
    let half = width / 2;
    let n = values.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Project a trajectory window onto the yz-plane, optionally recentering
/// on a running mean over one roll period.
pub fn extract_fcurve(traj: &Trajectory, window: (f64, f64), recenter: bool) -> Result<FCurve, Error> {
    let (t0, t1) = window;
    let lo = traj.times.partition_point(|v| *v < t0 - 1e-12);
    let hi = traj.times.partition_point(|v| *v <= t1 + 1e-12);
    if hi <= lo + 1 {
        return Err(Error::MissingData(format!(
            "window [{t0}, {t1}] holds fewer than two samples"
        )));
    }
    let times: Vec<f64> = traj.times[lo..hi].to_vec();
    let mut y: Vec<f64> = traj.positions[lo..hi].iter().map(|p| p.y).collect();
    let mut z: Vec<f64> = traj.positions[lo..hi].iter().map(|p| p.z).collect();

    if recenter {
        // period estimate from the total rotation about the global mean
        let my = y.iter().sum::<f64>() / y.len() as f64;
        let mz = z.iter().sum::<f64>() / z.len() as f64;
        let raw: Vec<f64> = y
            .iter()
            .zip(&z)
            .map(|(yy, zz)| (zz - mz).atan2(yy - my))
            .collect();
        let unwrapped = unwrap_angles(&raw);
        let rotations =
            (unwrapped.last().unwrap() - unwrapped[0]).abs() / (2.0 * std::f64::consts::PI);
        let width = if rotations >= 1.0 {
            ((y.len() as f64 / rotations).round() as usize).max(2)
        } else {
            y.len()
        };
        let cy = moving_average(&y, width);
        let cz = moving_average(&z, width);
        for i in 0..y.len() {
            y[i] -= cy[i];
            z[i] -= cz[i];
        }
    }
    Ok(FCurve { times, y, z })
}

/// Hypotrochoid samples over one parameter turn γ ∈ [0, 2π):
/// y(γ) = R̃ cos γ + d cos(ρ γ), z(γ) = R̃ sin γ − d sin(ρ γ) with
/// ρ = ω2/ω1. Times carry the parameter γ.
pub fn gen_hypotrochoid(
    r_tilde: f64,
    d: f64,
    omega_ratio: f64,
    samples: usize,
) -> Result<FCurve, Error> {
    let min_samples = (16.0 * (omega_ratio + 1.0)).ceil() as usize;
    if samples < min_samples {
        return Err(Error::InvalidParameters(format!(
            "need at least {min_samples} samples for frequency ratio {omega_ratio}"
        )));
    }
    Ok(sample_hypotrochoid(r_tilde, d, omega_ratio, 1.0, samples, 1.0))
}

/// Hypotrochoid swept at roll frequency `omega1` for `turns` full
/// rotations; times are physical seconds.
pub fn sample_hypotrochoid(
    r_tilde: f64,
    d: f64,
    omega_ratio: f64,
    omega1: f64,
    samples: usize,
    turns: f64,
) -> FCurve {
    let mut fc = FCurve {
        times: Vec::with_capacity(samples),
        y: Vec::with_capacity(samples),
        z: Vec::with_capacity(samples),
    };
    for i in 0..samples {
        let gamma = 2.0 * std::f64::consts::PI * turns * i as f64 / samples as f64;
        fc.times.push(gamma / omega1);
        fc.y.push(r_tilde * gamma.cos() + d * (omega_ratio * gamma).cos());
        fc.z.push(r_tilde * gamma.sin() - d * (omega_ratio * gamma).sin());
    }
    fc
}

/// Result of radial minima detection on a recentered f-curve.
#[derive(Debug, Clone, PartialEq)]
pub enum RadialMinima {
    /// (time, unwrapped polar angle) of each radial minimum.
    Minima(Vec<(f64, f64)>),
    /// Radial oscillation too small or fewer than two minima; a circle
    /// fit with n = 2 imposed applies.
    CircleLike,
}

/// Locate singular points as local minima of the smoothed radial
/// distance from the rotation center. `smooth_width` is the centered
/// moving-average width in samples (one flagellar period estimate).
pub fn detect_singular_points(fc: &FCurve, smooth_width: usize) -> RadialMinima {
    let r_raw = fc.radius();
    let n = r_raw.len();
    if n < 5 {
        return RadialMinima::CircleLike;
    }
    let r_mean = r_raw.iter().sum::<f64>() / n as f64;
    let band = r_raw.iter().cloned().fold(f64::MIN, f64::max)
        - r_raw.iter().cloned().fold(f64::MAX, f64::min);
    if r_mean <= 0.0 || band < 0.005 * r_mean {
        return RadialMinima::CircleLike;
    }

    let r = moving_average(&r_raw, smooth_width);
    let angles = fc.angles_unwrapped();
    let h = smooth_width.max(2);
    let mut minima = Vec::new();
    for i in 1..n - 1 {
        let lo = i.saturating_sub(h);
        let hi = (i + h + 1).min(n);
        let is_min = (lo..hi).all(|j| r[i] <= r[j])
            && r[i] < r[lo.min(i.saturating_sub(1))].max(r[(i + 1).min(hi - 1)]);
        if is_min {
            // skip plateau duplicates
            if let Some(&(_, last_angle)) = minima.last() {
                let sep: f64 = angles[i] - last_angle;
                if sep.abs() < 1e-3 {
                    continue;
                }
            }
            minima.push((fc.times[i], angles[i]));
        }
    }
    if minima.len() < 2 {
        RadialMinima::CircleLike
    } else {
        RadialMinima::Minima(minima)
    }
}

/// Fitted hypotrochoid: outer rotation radius R̃, inner radius d, the
/// two frequencies, lobe count n, and the derived rolling-circle radii.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HypotrochoidFit {
    pub r_tilde: f64,
    pub d: f64,
    pub omega1: f64,
    pub omega2: f64,
    pub n: f64,
    /// Fixed-circle radius R = ((ω1+ω2)/ω2)(d_min + d).
    pub big_r: f64,
    /// Rolling-circle radius r = (ω1/ω2)(d_min + d).
    pub small_r: f64,
    /// Whether n = 2 was imposed for a circle-like curve.
    pub circle_like: bool,
}

/// Estimate the hypotrochoid parameters of a recentered f-curve.
///
/// ω1 comes from the first full rotation about the center, n from the
/// mean angular separation of radial minima over that rotation, ω2 from
/// the identity ω2 = ω1(n − 1), and the radii from the averaged
/// minimum/maximum center distances.
pub fn fit_hypotrochoid(fc: &FCurve, smooth_width: usize) -> Result<HypotrochoidFit, Error> {
    if fc.len() < 8 {
        return Err(Error::MissingData(
            "f-curve holds too few samples to fit".into(),
        ));
    }
    let angles = fc.angles_unwrapped();
    let two_pi = 2.0 * std::f64::consts::PI;
    let rot_idx = angles
        .iter()
        .position(|a| (a - angles[0]).abs() >= two_pi)
        .ok_or_else(|| {
            Error::MissingData("f-curve spans less than one full rotation".into())
        })?;
    let omega1 = two_pi / (fc.times[rot_idx] - fc.times[0]).abs();

    // restrict minima/maxima statistics to the first full rotation
    let turn = FCurve {
        times: fc.times[..=rot_idx].to_vec(),
        y: fc.y[..=rot_idx].to_vec(),
        z: fc.z[..=rot_idx].to_vec(),
    };
    let r = turn.radius();

    match detect_singular_points(&turn, smooth_width) {
        RadialMinima::CircleLike => {
            let r_min = r.iter().cloned().fold(f64::MAX, f64::min);
            let r_max = r.iter().cloned().fold(f64::MIN, f64::max);
            let d = 0.5 * (r_max - r_min);
            let n = 2.0;
            let omega2 = omega1 * (n - 1.0);
            let base = r_min + d;
            Ok(HypotrochoidFit {
                r_tilde: base,
                d,
                omega1,
                omega2,
                n,
                big_r: (omega1 + omega2) / omega2 * base,
                small_r: omega1 / omega2 * base,
                circle_like: true,
            })
        }
        RadialMinima::Minima(minima) => {
            let seps: Vec<f64> = minima.windows(2).map(|w| (w[1].1 - w[0].1).abs()).collect();
            let mean_sep = seps.iter().sum::<f64>() / seps.len() as f64;
            let n = two_pi / mean_sep;
            let omega2 = omega1 * (n - 1.0);

            // averaged extremal center distances over the rotation
            let smoothed = moving_average(&r, smooth_width);
            let h = smooth_width.max(2);
            let len = smoothed.len();
            let mut d_mins = Vec::new();
            let mut d_maxs = Vec::new();
            for i in 1..len - 1 {
                let lo = i.saturating_sub(h);
                let hi = (i + h + 1).min(len);
                if (lo..hi).all(|j| smoothed[i] <= smoothed[j]) {
                    d_mins.push(r[i]);
                }
                if (lo..hi).all(|j| smoothed[i] >= smoothed[j]) {
                    d_maxs.push(r[i]);
                }
            }
            if d_mins.is_empty() || d_maxs.is_empty() {
                return Err(Error::MissingData(
                    "could not locate radial extrema for the fit".into(),
                ));
            }
            let d_min = d_mins.iter().sum::<f64>() / d_mins.len() as f64;
            let d_max = d_maxs.iter().sum::<f64>() / d_maxs.len() as f64;
            let d = 0.5 * (d_max - d_min);
            let base = d_min + d;
            Ok(HypotrochoidFit {
                r_tilde: base,
                d,
                omega1,
                omega2,
                n,
                big_r: (omega1 + omega2) / omega2 * base,
                small_r: omega1 / omega2 * base,
                circle_like: false,
            })
        }
    }
}

/// Curvature and twist profiles along the rod for a sequence of records.
#[derive(Debug, Clone)]
pub struct CurvatureProfile {
    pub times: Vec<f64>,
    /// Half-point arc-length coordinates.
    pub s_half: Vec<f64>,
    /// Actual curvature Ω*(s) per record.
    pub actual_curvature: Vec<Vec<f64>>,
    /// Actual twist Ω3*(s) per record.
    pub actual_twist: Vec<Vec<f64>>,
    /// Preferred curvature Ω(s) per record.
    pub preferred_curvature: Vec<Vec<f64>>,
    /// Preferred twist Ω3(s) per record.
    pub preferred_twist: Vec<Vec<f64>>,
    /// max |Ω* − Ω| / max Ω over the whole window.
    pub normalized_max_diff: f64,
}

/// Build curvature/twist tables for the records inside `window`.
pub fn curvature_profile(
    records: &[SimRecord],
    wave: &WaveParams,
    window: (f64, f64),
) -> Result<CurvatureProfile, Error> {
    let selected: Vec<&SimRecord> = records
        .iter()
        .filter(|r| r.time >= window.0 - 1e-12 && r.time <= window.1 + 1e-12)
        .collect();
    if selected.is_empty() {
        return Err(Error::MissingData(format!(
            "no records in window [{}, {}]",
            window.0, window.1
        )));
    }
    let m = selected[0].rod.intervals();
    let ds = selected[0].rod.ds;
    let mut profile = CurvatureProfile {
        times: Vec::new(),
        s_half: (0..m).map(|i| (i as f64 + 0.5) * ds).collect(),
        actual_curvature: Vec::new(),
        actual_twist: Vec::new(),
        preferred_curvature: Vec::new(),
        preferred_twist: Vec::new(),
        normalized_max_diff: 0.0,
    };
    let mut max_diff: f64 = 0.0;
    let mut max_omega: f64 = 0.0;
    for rec in selected {
        let actual = actual_strain_twist(&rec.rod)?;
        let x = solve_phase(wave, &rec.a, &rec.b, rec.time, ds)?;
        let xh = phase_half_points(wave, &rec.a, &rec.b, rec.time, ds, &x);
        let pst = preferred_strain_twist(rec.time, &xh, &rec.a[..m], &rec.b[..m], wave.k, wave.sigma);
        let omega = preferred_curvature(&pst);
        let omega_star = actual.curvature();
        for i in 0..m {
            max_diff = max_diff.max((omega_star[i] - omega[i]).abs());
            max_omega = max_omega.max(omega[i]);
        }
        profile.times.push(rec.time);
        profile.actual_curvature.push(omega_star);
        profile.actual_twist.push(actual.omega3.clone());
        profile.preferred_curvature.push(omega);
        profile.preferred_twist.push(pst.omega3);
    }
    profile.normalized_max_diff = if max_omega > 0.0 {
        max_diff / max_omega
    } else {
        max_diff
    };
    Ok(profile)
}

/// Maximum actual curvature and maximum distance from the centerline
/// over the records inside `window`.
pub fn max_metrics(records: &[SimRecord], window: (f64, f64)) -> Result<(f64, f64), Error> {
    let mut max_curv: f64 = 0.0;
    let mut max_dist: f64 = 0.0;
    let mut seen = false;
    for rec in records {
        if rec.time < window.0 - 1e-12 || rec.time > window.1 + 1e-12 {
            continue;
        }
        seen = true;
        let actual = actual_strain_twist(&rec.rod)?;
        for c in actual.curvature() {
            max_curv = max_curv.max(c);
        }
        let (p1, _, u) = centerline_frame(&rec.rod);
        let u_hat = u / u.norm();
        for p in &rec.rod.points {
            max_dist = max_dist.max((p - p1).cross(&u_hat).norm());
        }
    }
    if !seen {
        return Err(Error::MissingData(format!(
            "no records in window [{}, {}]",
            window.0, window.1
        )));
    }
    Ok((max_curv, max_dist))
}

/// Unwrapped in-plane heading angle of a position series, smoothed by
/// taking displacement over `stride` samples.
pub fn heading_series(times: &[f64], positions: &[Vec3], stride: usize) -> Vec<(f64, f64)> {
    let stride = stride.max(1);
    let mut raw = Vec::new();
    let mut ts = Vec::new();
    let n = positions.len();
    let mut i = 0;
    while i + stride < n {
        let d = positions[i + stride] - positions[i];
        raw.push(d.y.atan2(d.x));
        ts.push(0.5 * (times[i] + times[i + stride]));
        i += stride;
    }
    let unwrapped = unwrap_angles(&raw);
    ts.into_iter().zip(unwrapped).collect()
}
