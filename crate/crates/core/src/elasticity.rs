//! Elastic energy, internal force/torque constitutive laws, and the
//! external point loads from the momentum balance.
//!
//! Internal force F and torque N live on half-points; differencing them
//! back to whole points with free-end conditions (F = N = 0 at both ends)
//! gives the external force and torque the fluid applies to the rod. The
//! cross term in the torque balance is averaged over the two adjacent
//! half-segments, which makes the total force and total torque of a free
//! rod vanish to round-off.

use crate::error::Error;
use crate::rod::{
    actual_strain_twist_with, half_point_triads, PreferredStrainTwist, RodState, Triad,
};
use crate::Vec3;

/// Bending/twist moduli a_i (g·μm³/s²) and shear/extension moduli b_i
/// (g·μm/s²) of the rod.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MaterialParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<(), Error> {
        let all = [self.a1, self.a2, self.a3, self.b1, self.b2, self.b3];
        if all.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::InvalidParameters("moduli must be positive".into()));
        }
        if (self.a1 - self.a2).abs() > 1e-12 * self.a1.abs() {
            return Err(Error::InvalidParameters(
                "axially symmetric rod requires a1 = a2".into(),
            ));
        }
        Ok(())
    }

    /// Bending and twist moduli scaled by `factor` (shear moduli fixed).
    pub fn scaled_bending(&self, factor: f64) -> Self {
        MaterialParams {
            a1: self.a1 * factor,
            a2: self.a2 * factor,
            a3: self.a3 * factor,
            ..*self
        }
    }
}

/// Per-point external force and torque (density × Δs) the fluid applies
/// to the rod; the rod applies the negation to the fluid.
#[derive(Debug, Clone, PartialEq)]
pub struct PointLoads {
    /// Point forces (g·μm/s²).
    pub f: Vec<Vec3>,
    /// Point torques (g·μm²/s²).
    pub n: Vec<Vec3>,
}

impl PointLoads {
    pub fn zeros(n_points: usize) -> Self {
        PointLoads {
            f: vec![Vec3::zeros(); n_points],
            n: vec![Vec3::zeros(); n_points],
        }
    }

    pub fn total_force(&self) -> Vec3 {
        self.f.iter().sum()
    }

    /// Total torque about the origin, Σ (n_k + X_k × f_k).
    pub fn total_torque(&self, points: &[Vec3]) -> Vec3 {
        self.n
            .iter()
            .zip(points.iter().zip(&self.f))
            .map(|(n, (x, f))| n + x.cross(f))
            .sum()
    }

    /// |Σ f_k| / Σ |f_k| (zero when loads vanish).
    pub fn total_force_relative(&self) -> f64 {
        let scale: f64 = self.f.iter().map(Vec3::norm).sum();
        if scale == 0.0 {
            0.0
        } else {
            self.total_force().norm() / scale
        }
    }

    /// |Σ (n_k + X_k × f_k)| / Σ (|n_k| + |X_k||f_k|).
    pub fn total_torque_relative(&self, points: &[Vec3]) -> f64 {
        let scale: f64 = self
            .n
            .iter()
            .zip(points.iter().zip(&self.f))
            .map(|(n, (x, f))| n.norm() + x.norm() * f.norm())
            .sum();
        if scale == 0.0 {
            0.0
        } else {
            self.total_torque(points).norm() / scale
        }
    }
}

fn tangent_half(rod: &RodState, i: usize) -> Vec3 {
    (rod.points[i + 1] - rod.points[i]) / rod.ds
}

/// Internal force on half-points: F = Σ_i b_i((∂s X)·D^i − δ_3i) D^i.
pub fn internal_force_with(rod: &RodState, half: &[Triad], mat: &MaterialParams) -> Vec<Vec3> {
    half.iter()
        .enumerate()
        .map(|(i, h)| {
            let tang = tangent_half(rod, i);
            mat.b1 * tang.dot(&h.d1) * h.d1
                + mat.b2 * tang.dot(&h.d2) * h.d2
                + mat.b3 * (tang.dot(&h.d3) - 1.0) * h.d3
        })
        .collect()
}

pub fn internal_force(rod: &RodState, mat: &MaterialParams) -> Result<Vec<Vec3>, Error> {
    let half = half_point_triads(rod)?;
    Ok(internal_force_with(rod, &half, mat))
}

/// Internal torque on half-points: N = Σ_i a_i(Ω*_i − Ω_i) D^i.
/// `pst` must be sampled at the half-points.
pub fn internal_torque_with(
    rod: &RodState,
    half: &[Triad],
    pst: &PreferredStrainTwist,
    mat: &MaterialParams,
) -> Vec<Vec3> {
    let actual = actual_strain_twist_with(rod, half);
    half.iter()
        .enumerate()
        .map(|(i, h)| {
            mat.a1 * (actual.omega1[i] - pst.omega1[i]) * h.d1
                + mat.a2 * (actual.omega2[i] - pst.omega2[i]) * h.d2
                + mat.a3 * (actual.omega3[i] - pst.omega3[i]) * h.d3
        })
        .collect()
}

pub fn internal_torque(
    rod: &RodState,
    pst: &PreferredStrainTwist,
    mat: &MaterialParams,
) -> Result<Vec<Vec3>, Error> {
    let half = half_point_triads(rod)?;
    Ok(internal_torque_with(rod, &half, pst, mat))
}

/// Discrete elastic energy by midpoint quadrature over the half-segments.
pub fn elastic_energy(
    rod: &RodState,
    pst: &PreferredStrainTwist,
    mat: &MaterialParams,
) -> Result<f64, Error> {
    let half = half_point_triads(rod)?;
    Ok(elastic_energy_with(rod, &half, pst, mat))
}

pub fn elastic_energy_with(
    rod: &RodState,
    half: &[Triad],
    pst: &PreferredStrainTwist,
    mat: &MaterialParams,
) -> f64 {
    let actual = actual_strain_twist_with(rod, half);
    let mut e = 0.0;
    for (i, h) in half.iter().enumerate() {
        let tang = tangent_half(rod, i);
        let d_omega1 = actual.omega1[i] - pst.omega1[i];
        let d_omega2 = actual.omega2[i] - pst.omega2[i];
        let d_omega3 = actual.omega3[i] - pst.omega3[i];
        let s1 = tang.dot(&h.d1);
        let s2 = tang.dot(&h.d2);
        let s3 = tang.dot(&h.d3) - 1.0;
        e += mat.a1 * d_omega1 * d_omega1
            + mat.a2 * d_omega2 * d_omega2
            + mat.a3 * d_omega3 * d_omega3
            + mat.b1 * s1 * s1
            + mat.b2 * s2 * s2
            + mat.b3 * s3 * s3;
    }
    0.5 * e * rod.ds
}

/// External point loads from the momentum balance with free ends.
///
/// f_k = −(F_{k+1/2} − F_{k−1/2}), and the torque cross term averages the
/// two adjacent half-segments so totals telescope to zero exactly.
pub fn point_loads(
    rod: &RodState,
    pst: &PreferredStrainTwist,
    mat: &MaterialParams,
) -> Result<PointLoads, Error> {
    let half = half_point_triads(rod)?;
    point_loads_with(rod, &half, pst, mat)
}

pub fn point_loads_with(
    rod: &RodState,
    half: &[Triad],
    pst: &PreferredStrainTwist,
    mat: &MaterialParams,
) -> Result<PointLoads, Error> {
    let m = half.len();
    if pst.len() != m {
        return Err(Error::ContractViolation(format!(
            "preferred strain twist has {} samples, expected {} half-points",
            pst.len(),
            m
        )));
    }
    let force = internal_force_with(rod, half, mat);
    let torque = internal_torque_with(rod, half, pst, mat);

    let n_points = rod.points.len();
    let mut loads = PointLoads::zeros(n_points);
    for k in 0..n_points {
        // free ends: F = N = 0 outside [0, M-1]
        let f_hi = if k < m { force[k] } else { Vec3::zeros() };
        let f_lo = if k > 0 { force[k - 1] } else { Vec3::zeros() };
        let n_hi = if k < m { torque[k] } else { Vec3::zeros() };
        let n_lo = if k > 0 { torque[k - 1] } else { Vec3::zeros() };

        loads.f[k] = -(f_hi - f_lo);

        let mut cross = Vec3::zeros();
        if k < m {
            cross += (rod.points[k + 1] - rod.points[k]).cross(&f_hi);
        }
        if k > 0 {
            cross += (rod.points[k] - rod.points[k - 1]).cross(&f_lo);
        }
        loads.n[k] = -(n_hi - n_lo) - 0.5 * cross;
    }
    Ok(loads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::{self, init_rod, solve_phase, WaveParams};
    use approx::assert_relative_eq;

    fn mat() -> MaterialParams {
        MaterialParams {
            a1: 1.0,
            a2: 1.0,
            a3: 1.0,
            b1: 0.6,
            b2: 0.6,
            b3: 0.6,
        }
    }

    fn straight_rod(m: usize, ds: f64) -> RodState {
        let wave = WaveParams {
            a0: 0.0,
            b0: 0.0,
            k: 2.0 * std::f64::consts::PI / 30.0,
            sigma: 0.0,
            length: m as f64 * ds,
        };
        init_rod(&wave, m).unwrap()
    }

    /// Rod bent into a circular arc with chord lengths exactly Δs and
    /// triads matching the discrete geometry; with the preferred strain
    /// twist set to the measured one, it is exactly at its preferred
    /// configuration.
    fn matched_circle_rod(m: usize) -> (RodState, PreferredStrainTwist) {
        let radius = 12.0_f64;
        let ds = 0.2_f64;
        let dphi = 2.0 * (0.5 * ds / radius).asin();
        let mut points = Vec::new();
        let mut triads = Vec::new();
        for i in 0..=m {
            let phi = i as f64 * dphi;
            points.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), 0.0));
            let d3 = Vec3::new(-phi.sin(), phi.cos(), 0.0);
            let d1 = Vec3::new(-phi.cos(), -phi.sin(), 0.0);
            let d2 = d3.cross(&d1);
            triads.push(Triad { d1, d2, d3 });
        }
        let rod = RodState {
            points,
            triads,
            ds,
            time: 0.0,
        };
        let actual = rod::actual_strain_twist(&rod).unwrap();
        let pst = PreferredStrainTwist {
            omega1: actual.omega1.clone(),
            omega2: actual.omega2.clone(),
            omega3: actual.omega3.clone(),
        };
        (rod, pst)
    }

    #[test]
    fn straight_rod_is_load_free() {
        let rod = straight_rod(100, 0.2);
        let pst = PreferredStrainTwist::zeros(100);
        let loads = point_loads(&rod, &pst, &mat()).unwrap();
        for k in 0..=100 {
            assert!(loads.f[k].norm() <= 1e-14);
            assert!(loads.n[k].norm() <= 1e-14);
        }
        let e = elastic_energy(&rod, &pst, &mat()).unwrap();
        assert!(e.abs() <= 1e-15);
    }

    #[test]
    fn preferred_configuration_is_load_free() {
        // chord lengths exactly Δs, so the rod is exactly at its
        // (matched) preferred configuration
        let (rod, pst) = matched_circle_rod(120);
        let loads = point_loads(&rod, &pst, &mat()).unwrap();
        let fmax = loads.f.iter().map(Vec3::norm).fold(0.0, f64::max);
        let nmax = loads.n.iter().map(Vec3::norm).fold(0.0, f64::max);
        assert!(fmax <= 1e-12, "max |f| = {fmax:e}");
        assert!(nmax <= 1e-12, "max |n| = {nmax:e}");
        let e = elastic_energy(&rod, &pst, &mat()).unwrap();
        assert!(e <= 1e-12);
    }

    #[test]
    fn uniform_stretch_gives_axial_force() {
        let e = 0.01;
        let mut rod = straight_rod(50, 0.2);
        for p in &mut rod.points {
            *p *= 1.0 + e;
        }
        let force = internal_force(&rod, &mat()).unwrap();
        for f in &force {
            assert_relative_eq!(f.x, 0.6 * e, max_relative = 1e-12);
            assert!(f.y.abs() < 1e-15 && f.z.abs() < 1e-15);
        }
    }

    #[test]
    fn tilted_tangent_gives_shear_force() {
        let theta: f64 = 0.3;
        let ds = 0.2;
        let dir = Vec3::new(theta.cos(), theta.sin(), 0.0);
        let m = 40;
        let points: Vec<Vec3> = (0..=m).map(|i| dir * (i as f64 * ds)).collect();
        // D3 along x, so the unit tangent is tilted by theta toward D1
        let triads = vec![
            Triad {
                d1: Vec3::y(),
                d2: Vec3::z(),
                d3: Vec3::x(),
            };
            m + 1
        ];
        let rod = RodState {
            points,
            triads,
            ds,
            time: 0.0,
        };
        let force = internal_force(&rod, &mat()).unwrap();
        for f in &force {
            assert_relative_eq!(f.dot(&Vec3::y()), 0.6 * theta.sin(), max_relative = 1e-12);
        }
    }

    #[test]
    fn straight_rod_with_preferred_curvature() {
        // N = -a2 c D2 per half-point and E = a2 c² L / 2
        let c = 0.05;
        let m = 300;
        let rod = straight_rod(m, 0.2);
        let mut pst = PreferredStrainTwist::zeros(m);
        pst.omega2.iter_mut().for_each(|o| *o = c);
        let torque = internal_torque(&rod, &pst, &mat()).unwrap();
        for n in &torque {
            // straight-rod D2 = e_z
            assert_relative_eq!(*n, -c * Vec3::z(), epsilon = 1e-14);
        }
        let e = elastic_energy(&rod, &pst, &mat()).unwrap();
        assert_relative_eq!(e, 0.5 * 1.0 * c * c * 60.0, max_relative = 1e-12);
    }

    #[test]
    fn pure_twist_mismatch_gives_axial_torque() {
        let tau = 0.02;
        let m = 50;
        let rod = straight_rod(m, 0.2);
        let mut pst = PreferredStrainTwist::zeros(m);
        // actual twist is zero, so Ω3* − Ω3 = τ with Ω3 = −τ
        pst.omega3.iter_mut().for_each(|o| *o = -tau);
        let torque = internal_torque(&rod, &pst, &mat()).unwrap();
        for n in &torque {
            assert_relative_eq!(*n, tau * Vec3::x(), epsilon = 1e-14);
        }
    }

    fn bent_rod_with_pst() -> (RodState, PreferredStrainTwist) {
        let wave = WaveParams {
            a0: 3.0,
            b0: 1.0,
            k: 2.0 * std::f64::consts::PI / 30.0,
            sigma: 40.0 * std::f64::consts::PI,
            length: 60.0,
        };
        let m = 300;
        let rod = init_rod(&wave, m).unwrap();
        // deliberately mismatched preferred configuration (later time)
        let t = 0.004;
        let a = vec![3.0; m + 1];
        let b = vec![1.0; m + 1];
        let x = solve_phase(&wave, &a, &b, t, rod.ds).unwrap();
        let xh = rod::phase_half_points(&wave, &a, &b, t, rod.ds, &x);
        let pst = rod::preferred_strain_twist(t, &xh, &a[..m], &b[..m], wave.k, wave.sigma);
        (rod, pst)
    }

    #[test]
    fn totals_telescope_to_zero() {
        let (rod, pst) = bent_rod_with_pst();
        let loads = point_loads(&rod, &pst, &mat()).unwrap();
        assert!(
            loads.total_force_relative() <= 1e-10,
            "relative total force {:e}",
            loads.total_force_relative()
        );
        assert!(
            loads.total_torque_relative(&rod.points) <= 1e-8,
            "relative total torque {:e}",
            loads.total_torque_relative(&rod.points)
        );
    }

    #[test]
    fn loads_scale_linearly_with_moduli() {
        let (rod, pst) = bent_rod_with_pst();
        let m1 = mat();
        let m2 = MaterialParams {
            a1: 2.0,
            a2: 2.0,
            a3: 2.0,
            b1: 1.2,
            b2: 1.2,
            b3: 1.2,
        };
        let l1 = point_loads(&rod, &pst, &m1).unwrap();
        let l2 = point_loads(&rod, &pst, &m2).unwrap();
        for k in 0..rod.points.len() {
            assert_relative_eq!(l2.f[k], 2.0 * l1.f[k], epsilon = 1e-13);
            assert_relative_eq!(l2.n[k], 2.0 * l1.n[k], epsilon = 1e-13);
        }
    }

    #[test]
    fn point_forces_are_energy_gradient() {
        // central finite differences of E in a random position direction
        // must match the stored point forces
        let (rod, pst) = bent_rod_with_pst();
        let loads = point_loads(&rod, &pst, &mat()).unwrap();

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let dir: Vec<Vec3> = (0..rod.points.len())
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let h = 1e-6;
        let shifted = |sign: f64| {
            let mut r = rod.clone();
            for (p, d) in r.points.iter_mut().zip(&dir) {
                *p += sign * h * d;
            }
            elastic_energy(&r, &pst, &mat()).unwrap()
        };
        let de_fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * h);
        let de_loads: f64 = loads.f.iter().zip(&dir).map(|(f, d)| f.dot(d)).sum();
        assert_relative_eq!(de_fd, de_loads, max_relative = 1e-6);
    }

    #[test]
    fn point_torques_are_rotation_gradient() {
        // rotate each triad by a small random angle vector; the energy
        // change must match Σ n_k · δθ_k. The averaged cross term matches
        // the discrete rotation gradient to O(Δs) (the position gradient
        // is exact), so the tolerance is set at the Δs = 0.2 level.
        let (rod, pst) = bent_rod_with_pst();
        let loads = point_loads(&rod, &pst, &mat()).unwrap();

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let axes: Vec<Vec3> = (0..rod.triads.len())
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect();
        let h = 1e-6;
        let rotated = |sign: f64| {
            let mut r = rod.clone();
            for (t, ax) in r.triads.iter_mut().zip(&axes) {
                let q = nalgebra::UnitQuaternion::from_scaled_axis(sign * h * ax);
                *t = t.rotated(&q);
            }
            elastic_energy(&r, &pst, &mat()).unwrap()
        };
        let de_fd = (rotated(1.0) - rotated(-1.0)) / (2.0 * h);
        let de_loads: f64 = loads.n.iter().zip(&axes).map(|(n, ax)| n.dot(ax)).sum();
        assert_relative_eq!(de_fd, de_loads, max_relative = 1e-4);
    }

    #[test]
    fn mismatched_pst_length_is_contract_violation() {
        let rod = straight_rod(50, 0.2);
        let pst = PreferredStrainTwist::zeros(49);
        assert!(matches!(
            point_loads(&rod, &pst, &mat()),
            Err(Error::ContractViolation(_))
        ));
    }
}

