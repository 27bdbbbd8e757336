//! Rod state, initialization from the preferred reference configuration,
//! and preferred/actual strain-twist computation.
//!
//! The rod is a space curve sampled at M+1 material points with an
//! orthonormal triad (D1, D2, D3) at each point. Internal force and
//! torque live on the M half-points between them; half-point triads are
//! obtained from the principal square root of the rotation between
//! neighboring triads.

use crate::error::Error;
use crate::{Mat3, Vec3};
use nalgebra::{Rotation3, UnitQuaternion};

/// Orthonormal material frame at a rod point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triad {
    pub d1: Vec3,
    pub d2: Vec3,
    pub d3: Vec3,
}

impl Triad {
    pub fn identity() -> Self {
        Triad {
            d1: Vec3::x(),
            d2: Vec3::y(),
            d3: Vec3::z(),
        }
    }

    /// Frame as a rotation matrix with D1, D2, D3 as columns.
    pub fn matrix(&self) -> Mat3 {
        Mat3::from_columns(&[self.d1, self.d2, self.d3])
    }

    pub fn from_matrix(m: &Mat3) -> Self {
        Triad {
            d1: m.column(0).into(),
            d2: m.column(1).into(),
            d3: m.column(2).into(),
        }
    }

    /// max |Di . Dj - delta_ij| over all i, j.
    pub fn orthonormality_error(&self) -> f64 {
        let d = [self.d1, self.d2, self.d3];
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d[i].dot(&d[j]) - target).abs());
            }
        }
        worst
    }

    /// Rotate all three directors by the rotation `q`.
    pub fn rotated(&self, q: &UnitQuaternion<f64>) -> Self {
        Triad {
            d1: q * self.d1,
            d2: q * self.d2,
            d3: q * self.d3,
        }
    }

    /// Nearest right-handed orthonormal frame in the polar-decomposition
    /// sense, via the Newton iteration X <- (X + X^-T)/2. Quadratically
    /// convergent for frames within 0.1 of orthonormal.
    pub fn orthonormalized(&self) -> Self {
        let mut q = self.matrix();
        for _ in 0..20 {
            let Some(inv) = q.try_inverse() else { break };
            let next = (q + inv.transpose()) * 0.5;
            let delta = (next - q).abs().max();
            q = next;
            if delta <= 1e-15 {
                break;
            }
        }
        Triad::from_matrix(&q)
    }
}

/// Preferred traveling-wave parameters of the flagellar beat.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaveParams {
    /// Baseline amplitude in the y-direction (μm).
    pub a0: f64,
    /// Baseline amplitude in the z-direction (μm).
    pub b0: f64,
    /// Wavenumber 2π / wavelength (rad/μm).
    pub k: f64,
    /// Angular beat frequency (rad/s).
    pub sigma: f64,
    /// Rod length (μm).
    pub length: f64,
}

impl WaveParams {
    /// Chirality α = B0/A0; 0 planar, 1 helical.
    pub fn chirality(&self) -> f64 {
        if self.a0 == 0.0 {
            0.0
        } else {
            self.b0 / self.a0
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.length > 0.0) {
            return Err(Error::InvalidParameters("rod length must be > 0".into()));
        }
        if !(self.k > 0.0) {
            return Err(Error::InvalidParameters("wavenumber must be > 0".into()));
        }
        if self.a0 < 0.0 || self.b0 < 0.0 {
            return Err(Error::InvalidParameters(
                "amplitudes must be non-negative".into(),
            ));
        }
        let alpha = self.chirality();
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameters(format!(
                "chirality B0/A0 = {alpha} outside [0, 1]"
            )));
        }
        Ok(())
    }
}

/// Rod centerline and material frames at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct RodState {
    pub points: Vec<Vec3>,
    pub triads: Vec<Triad>,
    /// Material spacing Δs (μm).
    pub ds: f64,
    /// Simulation time (s).
    pub time: f64,
}

impl RodState {
    /// Number of intervals M (points.len() - 1).
    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    /// max |Di . Dj - delta_ij| over all points.
    pub fn orthonormality_drift(&self) -> f64 {
        self.triads
            .iter()
            .map(Triad::orthonormality_error)
            .fold(0.0, f64::max)
    }

    /// max | |X_{k+1}-X_k| - Δs | / Δs.
    pub fn max_segment_strain(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.points.windows(2) {
            let len = (w[1] - w[0]).norm();
            worst = worst.max((len - self.ds).abs() / self.ds);
        }
        worst
    }

    /// Jacobian |∂X/∂s| per half-segment.
    pub fn segment_jacobians(&self) -> Vec<f64> {
        self.points
            .windows(2)
            .map(|w| (w[1] - w[0]).norm() / self.ds)
            .collect()
    }
}

/// Preferred strain-twist vector (Ω1, Ω2, Ω3) sampled along the rod (1/μm).
#[derive(Debug, Clone, PartialEq)]
pub struct PreferredStrainTwist {
    pub omega1: Vec<f64>,
    pub omega2: Vec<f64>,
    pub omega3: Vec<f64>,
}

impl PreferredStrainTwist {
    pub fn zeros(n: usize) -> Self {
        PreferredStrainTwist {
            omega1: vec![0.0; n],
            omega2: vec![0.0; n],
            omega3: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.omega1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega1.is_empty()
    }
}

/// Actual strain-twist (Ω*1, Ω*2, Ω*3) on the M interior half-points (1/μm).
#[derive(Debug, Clone, PartialEq)]
pub struct StrainTwistActual {
    pub omega1: Vec<f64>,
    pub omega2: Vec<f64>,
    pub omega3: Vec<f64>,
}

impl StrainTwistActual {
    /// Actual curvature Ω* = sqrt(Ω*1² + Ω*2²) pointwise.
    pub fn curvature(&self) -> Vec<f64> {
        self.omega1
            .iter()
            .zip(&self.omega2)
            .map(|(o1, o2)| (o1 * o1 + o2 * o2).sqrt())
            .collect()
    }
}

/// d x / d s of the reference wave at phase coordinate `x`.
#[inline]
fn phase_slope(x: f64, t: f64, a: f64, b: f64, k: f64, sigma: f64) -> f64 {
    let (s, c) = (k * x - sigma * t).sin_cos();
    let ak = a * k;
    let bk = b * k;
    1.0 / (1.0 + ak * ak * c * c + bk * bk * s * s).sqrt()
}

/// One classical RK4 step of the phase ODE with A, B held constant.
#[inline]
fn phase_rk4_step(x: f64, h: f64, t: f64, a: f64, b: f64, k: f64, sigma: f64) -> f64 {
    let k1 = phase_slope(x, t, a, b, k, sigma);
    let k2 = phase_slope(x + 0.5 * h * k1, t, a, b, k, sigma);
    let k3 = phase_slope(x + 0.5 * h * k2, t, a, b, k, sigma);
    let k4 = phase_slope(x + h * k3, t, a, b, k, sigma);
    x + h * ((k1 + 2.0 * (k2 + k3) + k4) / 6.0)
}

/// Solve the arc-length phase ODE dx/ds = (1 + A²k²cos² + B²k²sin²)^-1/2
/// from x(0) = 0 with one RK4 step per material interval. `a` and `b`
/// are per-point amplitudes, held constant within each step.
pub fn solve_phase(
    wave: &WaveParams,
    a: &[f64],
    b: &[f64],
    t: f64,
    ds: f64,
) -> Result<Vec<f64>, Error> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidParameters(
            "amplitude arrays need one entry per point (M+1 >= 3)".into(),
        ));
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameters(
            "amplitudes must be finite and non-negative".into(),
        ));
    }
    let n = a.len();
    let mut x = Vec::with_capacity(n);
    x.push(0.0);
    let mut cur = 0.0;
    for i in 0..n - 1 {
        cur = phase_rk4_step(cur, ds, t, a[i], b[i], wave.k, wave.sigma);
        if !cur.is_finite() {
            return Err(Error::InvalidParameters(
                "phase integration produced non-finite value".into(),
            ));
        }
        x.push(cur);
    }
    Ok(x)
}

/// Phase coordinate at the M half-points: an RK4 half-step from each
/// whole point, with the left point's amplitudes.
pub fn phase_half_points(
    wave: &WaveParams,
    a: &[f64],
    b: &[f64],
    t: f64,
    ds: f64,
    x_whole: &[f64],
) -> Vec<f64> {
    (0..x_whole.len() - 1)
        .map(|i| phase_rk4_step(x_whole[i], 0.5 * ds, t, a[i], b[i], wave.k, wave.sigma))
        .collect()
}

/// Initialize the rod from the preferred reference configuration at t = 0.
///
/// D3 is the unit tangent, D1 = (e3 × D3)/|e3 × D3| and D2 = D3 × D1,
/// so the triads are orthonormal to machine precision by construction.
pub fn init_rod(wave: &WaveParams, m: usize) -> Result<RodState, Error> {
    wave.validate()?;
    if m < 2 {
        return Err(Error::InvalidParameters("need at least 2 intervals".into()));
    }
    let ds = wave.length / m as f64;
    let a = vec![wave.a0; m + 1];
    let b = vec![wave.b0; m + 1];
    let x = solve_phase(wave, &a, &b, 0.0, ds)?;

    let mut points = Vec::with_capacity(m + 1);
    let mut triads = Vec::with_capacity(m + 1);
    for (i, &xi) in x.iter().enumerate() {
        let (s, c) = (wave.k * xi).sin_cos();
        points.push(Vec3::new(xi, wave.a0 * s, wave.b0 * c));

        let dxds = phase_slope(xi, 0.0, wave.a0, wave.b0, wave.k, wave.sigma);
        let dyds = wave.a0 * wave.k * c * dxds;
        let dzds = -wave.b0 * wave.k * s * dxds;
        let d3 = Vec3::new(dxds, dyds, dzds);
        let planar_norm = (dxds * dxds + dyds * dyds).sqrt();
        if planar_norm < 1e-14 {
            return Err(Error::DegenerateFrame(i));
        }
        let d1 = Vec3::new(-dyds / planar_norm, dxds / planar_norm, 0.0);
        let d2 = d3.cross(&d1);
        triads.push(Triad { d1, d2, d3 });
    }
    Ok(RodState {
        points,
        triads,
        ds,
        time: 0.0,
    })
}

/// Preferred strain-twist vector at the given phase samples.
///
/// With φ = k·x − σt, K_c = 1 + A²k²cos²φ and K_s = B²k²sin²φ:
///   Ω1 =  B k² (1 + A²k²) cosφ / (√K_c (K_c + K_s)^{3/2})
///   Ω2 = −A k² sinφ / (√K_c (K_c + K_s))
///   Ω3 =  A B k³ sin²φ / (K_c (K_c + K_s))
pub fn preferred_strain_twist(
    t: f64,
    x: &[f64],
    a: &[f64],
    b: &[f64],
    k: f64,
    sigma: f64,
) -> PreferredStrainTwist {
    let n = x.len();
    let mut pst = PreferredStrainTwist::zeros(n);
    for i in 0..n {
        let (s, c) = (k * x[i] - sigma * t).sin_cos();
        let ak2 = a[i] * a[i] * k * k;
        let kc = 1.0 + ak2 * c * c;
        let ks = b[i] * b[i] * k * k * s * s;
        let tot = kc + ks;
        let sqrt_kc = kc.sqrt();
        pst.omega1[i] = b[i] * k * k * (1.0 + ak2) * c / (sqrt_kc * tot * tot.sqrt());
        pst.omega2[i] = -a[i] * k * k * s / (sqrt_kc * tot);
        pst.omega3[i] = a[i] * b[i] * k * k * k * s * s / (kc * tot);
    }
    pst
}

/// Preferred curvature Ω = sqrt(Ω1² + Ω2²) pointwise.
pub fn preferred_curvature(pst: &PreferredStrainTwist) -> Vec<f64> {
    pst.omega1
        .iter()
        .zip(&pst.omega2)
        .map(|(o1, o2)| (o1 * o1 + o2 * o2).sqrt())
        .collect()
}

/// Largest rotation angle between adjacent triads (rad).
pub fn max_adjacent_rotation(rod: &RodState) -> f64 {
    let mut worst: f64 = 0.0;
    for w in rod.triads.windows(2) {
        let r = w[1].matrix() * w[0].matrix().transpose();
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
        worst = worst.max(q.angle());
    }
    worst
}

/// Half-point triads from the principal square root of the rotation
/// between neighbors.
pub fn half_point_triads(rod: &RodState) -> Result<Vec<Triad>, Error> {
    let mut half = Vec::with_capacity(rod.triads.len() - 1);
    for (i, w) in rod.triads.windows(2).enumerate() {
        let r = w[1].matrix() * w[0].matrix().transpose();
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
        let angle = q.angle();
        if angle > std::f64::consts::PI - 1e-6 {
            return Err(Error::FrameFlip(i, i + 1, angle));
        }
        let sqrt_q = q.powf(0.5);
        half.push(w[0].rotated(&sqrt_q));
    }
    Ok(half)
}

/// Actual strain-twist on half-points by centered differences of the
/// directors against the half-point triads:
///   Ω*1 = ∂s D2 · D3,  Ω*2 = ∂s D3 · D1,  Ω*3 = ∂s D1 · D2.
pub fn actual_strain_twist(rod: &RodState) -> Result<StrainTwistActual, Error> {
    let half = half_point_triads(rod)?;
    Ok(actual_strain_twist_with(rod, &half))
}

/// Same as [`actual_strain_twist`] with precomputed half-point triads.
pub fn actual_strain_twist_with(rod: &RodState, half: &[Triad]) -> StrainTwistActual {
    let m = half.len();
    let inv_ds = 1.0 / rod.ds;
    let mut out = StrainTwistActual {
        omega1: vec![0.0; m],
        omega2: vec![0.0; m],
        omega3: vec![0.0; m],
    };
    for (i, h) in half.iter().enumerate() {
        let lo = &rod.triads[i];
        let hi = &rod.triads[i + 1];
        let dd1 = (hi.d1 - lo.d1) * inv_ds;
        let dd2 = (hi.d2 - lo.d2) * inv_ds;
        let dd3 = (hi.d3 - lo.d3) * inv_ds;
        out.omega1[i] = dd2.dot(&h.d3);
        out.omega2[i] = dd3.dot(&h.d1);
        out.omega3[i] = dd1.dot(&h.d2);
    }
    out
}

/// Replace every triad by its nearest right-handed orthonormal frame.
pub fn reorthonormalize(rod: &RodState) -> RodState {
    let mut out = rod.clone();
    reorthonormalize_in_place(&mut out);
    out
}

pub fn reorthonormalize_in_place(rod: &mut RodState) {
    for t in &mut rod.triads {
        *t = t.orthonormalized();
    }
}
