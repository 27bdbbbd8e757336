//! Regularized-Stokeslet evaluation of fluid linear and angular velocity
//! from rod point loads, plus pressure and flow-field grid sampling.
//!
//! All kernels belong to the blob φ_ε(r) = 15ε⁴ / (8π (r²+ε²)^{7/2}).
//! With d = x − X₀, r = |d| and u = r² + ε², a point force g and point
//! torque q produce
//!
//!   v_S(x) = [ g (r² + 2ε²) + (g·d) d ] / (8πμ u^{3/2})
//!   v_R(x) = (q × d) (2r² + 5ε²) / (16πμ u^{5/2})
//!   w_R(x) = (g × d) (2r² + 5ε²) / (16πμ u^{5/2})
//!   w_D(x) = [ (10ε⁴ − 7ε²r² − 2r⁴) q + 3(2r² + 7ε²)(q·d) d ] / (32πμ u^{7/2})
//!   p_S(x) = (g·d) (2r² + 5ε²) / (8π u^{5/2})
//!
//! which reduce to the singular Stokeslet, rotlet and dipole at r ≫ ε.
//! The pairwise sums are the O(M²) hot path: sources are kept in flat
//! arrays, each evaluation point reduces over sources in a fixed order
//! (so results are independent of the thread count), and evaluation
//! points are distributed over threads.

use crate::elasticity::PointLoads;
use crate::error::Error;
use crate::rod::RodState;
use crate::Vec3;
use rayon::prelude::*;

/// Fluid viscosity and regularization radius.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FluidParams {
    /// Dynamic viscosity (g/(μm·s)).
    pub mu: f64,
    /// Regularization parameter / virtual rod radius (μm).
    pub epsilon: f64,
}

impl FluidParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.mu > 0.0) || !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameters(
                "viscosity and regularization parameter must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Reduction order for the pairwise kernel sums. Every mode reduces
/// sources in a fixed order per evaluation point, so all are bitwise
/// reproducible across thread counts; they differ only in rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SumMode {
    /// Straight left-to-right accumulation (fastest).
    #[default]
    Sequential,
    /// Two-level blocked summation (blocks of 64, block sums combined
    /// pairwise).
    Pairwise,
    /// Kahan-compensated accumulation.
    Compensated,
}

/// Blob (regularized delta) density at `x` for a source at `x0` (1/μm³).
pub fn blob_eval(x: &Vec3, x0: &Vec3, epsilon: f64) -> f64 {
    let r2 = (x - x0).norm_squared();
    let u = r2 + epsilon * epsilon;
    15.0 * epsilon.powi(4) / (8.0 * std::f64::consts::PI * u.powi(3) * u.sqrt())
}

/// One flow-field sample: position, velocity, regularized pressure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Pressure (g/(μm·s²)).
    pub pressure: f64,
}

#[cfg(target_arch = "x86_64")]
fn avx2_available() -> bool {
    use std::sync::OnceLock;
    static AVX2: OnceLock<bool> = OnceLock::new();
    *AVX2.get_or_init(|| {
        std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma")
    })
}

const INV_8PI: f64 = 1.0 / (8.0 * std::f64::consts::PI);
const INV_16PI: f64 = 1.0 / (16.0 * std::f64::consts::PI);
const INV_32PI: f64 = 1.0 / (32.0 * std::f64::consts::PI);

/// Sources of the kernel sums in flat arrays: positions plus the loads
/// applied to the fluid (the negated rod point loads).
pub struct StokesSources {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    fx: Vec<f64>,
    fy: Vec<f64>,
    fz: Vec<f64>,
    nx: Vec<f64>,
    ny: Vec<f64>,
    nz: Vec<f64>,
    eps2: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct PairTerms {
    v: [f64; 3],
    w: [f64; 3],
    p: f64,
}

impl StokesSources {
    /// Negates the rod loads: the rod exerts −f, −n on the fluid.
    pub fn from_rod_loads(rod: &RodState, loads: &PointLoads, fluid: &FluidParams) -> Self {
        let n = rod.points.len();
        let mut s = StokesSources {
            x: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            z: Vec::with_capacity(n),
            fx: Vec::with_capacity(n),
            fy: Vec::with_capacity(n),
            fz: Vec::with_capacity(n),
            nx: Vec::with_capacity(n),
            ny: Vec::with_capacity(n),
            nz: Vec::with_capacity(n),
            eps2: fluid.epsilon * fluid.epsilon,
        };
        for k in 0..n {
            s.x.push(rod.points[k].x);
            s.y.push(rod.points[k].y);
            s.z.push(rod.points[k].z);
            s.fx.push(-loads.f[k].x);
            s.fy.push(-loads.f[k].y);
            s.fz.push(-loads.f[k].z);
            s.nx.push(-loads.n[k].x);
            s.ny.push(-loads.n[k].y);
            s.nz.push(-loads.n[k].z);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// All kernel contributions of source `j` at the target point.
    #[inline(always)]
    fn terms(&self, j: usize, tx: f64, ty: f64, tz: f64) -> PairTerms {
        let dx = tx - self.x[j];
        let dy = ty - self.y[j];
        let dz = tz - self.z[j];
        let e2 = self.eps2;
        let r2 = dx * dx + dy * dy + dz * dz;
        let u = r2 + e2;
        let inv7 = 1.0 / (u * u * u * u.sqrt());
        let inv5 = inv7 * u;
        let inv3 = inv5 * u;

        let fx = self.fx[j];
        let fy = self.fy[j];
        let fz = self.fz[j];
        let nx = self.nx[j];
        let ny = self.ny[j];
        let nz = self.nz[j];

        let fdotd = fx * dx + fy * dy + fz * dz;
        let ndotd = nx * dx + ny * dy + nz * dz;

        // Stokeslet (velocity from force) + pressure
        let s1 = INV_8PI * (r2 + 2.0 * e2) * inv3;
        let s2 = INV_8PI * inv3 * fdotd;
        let rot = (2.0 * r2 + 5.0 * e2) * inv5;

        // rotlet appears twice: torque -> velocity and force -> vorticity
        let rc = INV_16PI * rot;
        let cx_nd = ny * dz - nz * dy;
        let cy_nd = nz * dx - nx * dz;
        let cz_nd = nx * dy - ny * dx;
        let cx_fd = fy * dz - fz * dy;
        let cy_fd = fz * dx - fx * dz;
        let cz_fd = fx * dy - fy * dx;

        // dipole (angular velocity from torque)
        let d1 = INV_32PI * (10.0 * e2 * e2 - 7.0 * e2 * r2 - 2.0 * r2 * r2) * inv7;
        let d2 = INV_32PI * 3.0 * (2.0 * r2 + 7.0 * e2) * inv7 * ndotd;

        PairTerms {
            v: [
                s1 * fx + s2 * dx + rc * cx_nd,
                s1 * fy + s2 * dy + rc * cy_nd,
                s1 * fz + s2 * dz + rc * cz_nd,
            ],
            w: [
                rc * cx_fd + d1 * nx + d2 * dx,
                rc * cy_fd + d1 * ny + d2 * dy,
                rc * cz_fd + d1 * nz + d2 * dz,
            ],
            p: INV_8PI * rot * fdotd,
        }
    }

    /// Velocity, angular velocity and pressure at one point (already
    /// scaled by 1/μ where appropriate).
    pub fn eval(&self, target: &Vec3, mu: f64, mode: SumMode) -> (Vec3, Vec3, f64) {
        let (tx, ty, tz) = (target.x, target.y, target.z);
        let acc = match mode {
            SumMode::Sequential => self.reduce_sequential(tx, ty, tz),
            SumMode::Pairwise => self.reduce_pairwise(tx, ty, tz),
            SumMode::Compensated => self.reduce_compensated(tx, ty, tz),
        };
        let inv_mu = 1.0 / mu;
        (
            Vec3::new(acc.v[0], acc.v[1], acc.v[2]) * inv_mu,
            Vec3::new(acc.w[0], acc.w[1], acc.w[2]) * inv_mu,
            acc.p,
        )
    }

    fn reduce_sequential(&self, tx: f64, ty: f64, tz: f64) -> PairTerms {
        #[cfg(target_arch = "x86_64")]
        if avx2_available() {
            // fixed lane order, bitwise reproducible across runs and
            // thread counts
            return unsafe { self.reduce_avx2(tx, ty, tz) };
        }
        self.reduce_scalar(tx, ty, tz)
    }

    fn reduce_scalar(&self, tx: f64, ty: f64, tz: f64) -> PairTerms {
        let mut acc = PairTerms::default();
        for j in 0..self.len() {
            let t = self.terms(j, tx, ty, tz);
            for c in 0..3 {
                acc.v[c] += t.v[c];
                acc.w[c] += t.w[c];
            }
            acc.p += t.p;
        }
        acc
    }

    /// Four sources per iteration with AVX2 + FMA; the O(M²) sweep is
    /// the hot path of every simulation step.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "avx2,fma")]
    unsafe fn reduce_avx2(&self, tx: f64, ty: f64, tz: f64) -> PairTerms {
        use std::arch::x86_64::*;

        let n = self.x.len();
        let chunks = n / 4;

        let e2 = _mm256_set1_pd(self.eps2);
        let two_e2 = _mm256_set1_pd(2.0 * self.eps2);
        let five_e2 = _mm256_set1_pd(5.0 * self.eps2);
        let seven_e2 = _mm256_set1_pd(7.0 * self.eps2);
        let ten_e4 = _mm256_set1_pd(10.0 * self.eps2 * self.eps2);
        let c8 = _mm256_set1_pd(INV_8PI);
        let c16 = _mm256_set1_pd(INV_16PI);
        let c32 = _mm256_set1_pd(INV_32PI);
        let three_c32 = _mm256_set1_pd(3.0 * INV_32PI);
        let one = _mm256_set1_pd(1.0);
        let two = _mm256_set1_pd(2.0);
        let txv = _mm256_set1_pd(tx);
        let tyv = _mm256_set1_pd(ty);
        let tzv = _mm256_set1_pd(tz);

        let mut vx = _mm256_setzero_pd();
        let mut vy = _mm256_setzero_pd();
        let mut vz = _mm256_setzero_pd();
        let mut wx = _mm256_setzero_pd();
        let mut wy = _mm256_setzero_pd();
        let mut wz = _mm256_setzero_pd();
        let mut pr = _mm256_setzero_pd();

        for c in 0..chunks {
            let j = c * 4;
            let dx = _mm256_sub_pd(txv, _mm256_loadu_pd(self.x.as_ptr().add(j)));
            let dy = _mm256_sub_pd(tyv, _mm256_loadu_pd(self.y.as_ptr().add(j)));
            let dz = _mm256_sub_pd(tzv, _mm256_loadu_pd(self.z.as_ptr().add(j)));
            let fx = _mm256_loadu_pd(self.fx.as_ptr().add(j));
            let fy = _mm256_loadu_pd(self.fy.as_ptr().add(j));
            let fz = _mm256_loadu_pd(self.fz.as_ptr().add(j));
            let nx = _mm256_loadu_pd(self.nx.as_ptr().add(j));
            let ny = _mm256_loadu_pd(self.ny.as_ptr().add(j));
            let nz = _mm256_loadu_pd(self.nz.as_ptr().add(j));

            let r2 = _mm256_fmadd_pd(
                dx,
                dx,
                _mm256_fmadd_pd(dy, dy, _mm256_mul_pd(dz, dz)),
            );
            let u = _mm256_add_pd(r2, e2);
            let su = _mm256_sqrt_pd(u);
            let u3 = _mm256_mul_pd(_mm256_mul_pd(u, u), u);
            let inv7 = _mm256_div_pd(one, _mm256_mul_pd(u3, su));
            let inv5 = _mm256_mul_pd(inv7, u);
            let inv3 = _mm256_mul_pd(inv5, u);

            let fdotd = _mm256_fmadd_pd(fx, dx, _mm256_fmadd_pd(fy, dy, _mm256_mul_pd(fz, dz)));
            let ndotd = _mm256_fmadd_pd(nx, dx, _mm256_fmadd_pd(ny, dy, _mm256_mul_pd(nz, dz)));

            let s1 = _mm256_mul_pd(c8, _mm256_mul_pd(_mm256_add_pd(r2, two_e2), inv3));
            let s2 = _mm256_mul_pd(c8, _mm256_mul_pd(inv3, fdotd));
            let rot = _mm256_mul_pd(_mm256_fmadd_pd(two, r2, five_e2), inv5);
            let rc = _mm256_mul_pd(c16, rot);
            // 10 e4 - 7 e2 r2 - 2 r2^2
            let poly = _mm256_sub_pd(
                ten_e4,
                _mm256_fmadd_pd(seven_e2, r2, _mm256_mul_pd(two, _mm256_mul_pd(r2, r2))),
            );
            let d1 = _mm256_mul_pd(c32, _mm256_mul_pd(poly, inv7));
            let d2 = _mm256_mul_pd(
                three_c32,
                _mm256_mul_pd(_mm256_fmadd_pd(two, r2, seven_e2), _mm256_mul_pd(inv7, ndotd)),
            );

            let cx_nd = _mm256_fmsub_pd(ny, dz, _mm256_mul_pd(nz, dy));
            let cy_nd = _mm256_fmsub_pd(nz, dx, _mm256_mul_pd(nx, dz));
            let cz_nd = _mm256_fmsub_pd(nx, dy, _mm256_mul_pd(ny, dx));
            let cx_fd = _mm256_fmsub_pd(fy, dz, _mm256_mul_pd(fz, dy));
            let cy_fd = _mm256_fmsub_pd(fz, dx, _mm256_mul_pd(fx, dz));
            let cz_fd = _mm256_fmsub_pd(fx, dy, _mm256_mul_pd(fy, dx));

            vx = _mm256_add_pd(
                vx,
                _mm256_fmadd_pd(s1, fx, _mm256_fmadd_pd(s2, dx, _mm256_mul_pd(rc, cx_nd))),
            );
            vy = _mm256_add_pd(
                vy,
                _mm256_fmadd_pd(s1, fy, _mm256_fmadd_pd(s2, dy, _mm256_mul_pd(rc, cy_nd))),
            );
            vz = _mm256_add_pd(
                vz,
                _mm256_fmadd_pd(s1, fz, _mm256_fmadd_pd(s2, dz, _mm256_mul_pd(rc, cz_nd))),
            );
            wx = _mm256_add_pd(
                wx,
                _mm256_fmadd_pd(rc, cx_fd, _mm256_fmadd_pd(d1, nx, _mm256_mul_pd(d2, dx))),
            );
            wy = _mm256_add_pd(
                wy,
                _mm256_fmadd_pd(rc, cy_fd, _mm256_fmadd_pd(d1, ny, _mm256_mul_pd(d2, dy))),
            );
            wz = _mm256_add_pd(
                wz,
                _mm256_fmadd_pd(rc, cz_fd, _mm256_fmadd_pd(d1, nz, _mm256_mul_pd(d2, dz))),
            );
            pr = _mm256_add_pd(pr, _mm256_mul_pd(c8, _mm256_mul_pd(rot, fdotd)));
        }

        #[inline(always)]
        unsafe fn hsum(v: std::arch::x86_64::__m256d) -> f64 {
            let mut lanes = [0.0f64; 4];
            _mm256_storeu_pd(lanes.as_mut_ptr(), v);
            (lanes[0] + lanes[1]) + (lanes[2] + lanes[3])
        }

        let mut acc = PairTerms {
            v: [hsum(vx), hsum(vy), hsum(vz)],
            w: [hsum(wx), hsum(wy), hsum(wz)],
            p: hsum(pr),
        };
        for j in chunks * 4..n {
            let t = self.terms(j, tx, ty, tz);
            for c in 0..3 {
                acc.v[c] += t.v[c];
                acc.w[c] += t.w[c];
            }
            acc.p += t.p;
        }
        acc
    }

    fn reduce_pairwise(&self, tx: f64, ty: f64, tz: f64) -> PairTerms {
        const BLOCK: usize = 64;
        let mut blocks: Vec<PairTerms> = Vec::with_capacity(self.len().div_ceil(BLOCK));
        let mut j = 0;
        while j < self.len() {
            let hi = (j + BLOCK).min(self.len());
            let mut acc = PairTerms::default();
            for jj in j..hi {
                let t = self.terms(jj, tx, ty, tz);
                for c in 0..3 {
                    acc.v[c] += t.v[c];
                    acc.w[c] += t.w[c];
                }
                acc.p += t.p;
            }
            blocks.push(acc);
            j = hi;
        }
        // combine block sums pairwise
        while blocks.len() > 1 {
            let mut next = Vec::with_capacity(blocks.len().div_ceil(2));
            for pair in blocks.chunks(2) {
                if pair.len() == 2 {
                    let mut acc = pair[0];
                    for c in 0..3 {
                        acc.v[c] += pair[1].v[c];
                        acc.w[c] += pair[1].w[c];
                    }
                    acc.p += pair[1].p;
                    next.push(acc);
                } else {
                    next.push(pair[0]);
                }
            }
            blocks = next;
        }
        blocks.pop().unwrap_or_default()
    }

    fn reduce_compensated(&self, tx: f64, ty: f64, tz: f64) -> PairTerms {
        #[inline(always)]
        fn kahan(sum: &mut f64, comp: &mut f64, value: f64) {
            let y = value - *comp;
            let t = *sum + y;
            *comp = (t - *sum) - y;
            *sum = t;
        }
        let mut acc = PairTerms::default();
        let mut comp = PairTerms::default();
        for j in 0..self.len() {
            let t = self.terms(j, tx, ty, tz);
            for c in 0..3 {
                kahan(&mut acc.v[c], &mut comp.v[c], t.v[c]);
                kahan(&mut acc.w[c], &mut comp.w[c], t.w[c]);
            }
            kahan(&mut acc.p, &mut comp.p, t.p);
        }
        acc
    }
}

/// Fluid linear velocity at `x` from the rod's point loads (μm/s).
pub fn velocity_at(x: &Vec3, loads: &PointLoads, rod: &RodState, fluid: &FluidParams) -> Vec3 {
    let src = StokesSources::from_rod_loads(rod, loads, fluid);
    src.eval(x, fluid.mu, SumMode::Sequential).0
}

/// Fluid angular velocity at `x`, w = ½ ∇×v (rad/s).
pub fn angular_velocity_at(
    x: &Vec3,
    loads: &PointLoads,
    rod: &RodState,
    fluid: &FluidParams,
) -> Vec3 {
    let src = StokesSources::from_rod_loads(rod, loads, fluid);
    src.eval(x, fluid.mu, SumMode::Sequential).1
}

/// Regularized pressure at `x` (g/(μm·s²)).
pub fn pressure_at(x: &Vec3, loads: &PointLoads, rod: &RodState, fluid: &FluidParams) -> f64 {
    let src = StokesSources::from_rod_loads(rod, loads, fluid);
    src.eval(x, fluid.mu, SumMode::Sequential).2
}

/// Linear and angular velocity at every rod point. Targets are
/// distributed over threads; each target reduces sources in index order,
/// so the result is bitwise independent of the thread count.
pub fn rod_velocities(
    rod: &RodState,
    loads: &PointLoads,
    fluid: &FluidParams,
    mode: SumMode,
) -> (Vec<Vec3>, Vec<Vec3>) {
    let src = StokesSources::from_rod_loads(rod, loads, fluid);
    let eval = |p: &Vec3| {
        let (v, w, _) = src.eval(p, fluid.mu, mode);
        (v, w)
    };
    // each target reduces sources in a fixed order, so threading only
    // changes who computes which target; skip the pool when it is trivial
    let results: Vec<(Vec3, Vec3)> = if rayon::current_num_threads() > 1 {
        rod.points.par_iter().map(eval).collect()
    } else {
        rod.points.iter().map(eval).collect()
    };
    results.into_iter().unzip()
}

/// A sampling plane through the centerline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaneKind {
    /// Through the centerline, normal orthogonal to the y-axis.
    Horizontal,
    /// Through the centerline, normal orthogonal to the z-axis.
    Vertical,
}

#[derive(Debug, Clone, Copy)]
pub struct PlaneSpec {
    pub center: Vec3,
    /// In-plane axis along the centerline direction.
    pub axis1: Vec3,
    /// Second in-plane axis.
    pub axis2: Vec3,
    pub half_extent1: f64,
    pub half_extent2: f64,
}

impl PlaneSpec {
    /// Plane through centerline point `p2` with direction `u`.
    pub fn centerline_plane(
        kind: PlaneKind,
        p2: Vec3,
        u: Vec3,
        half_extent1: f64,
        half_extent2: f64,
    ) -> Result<Self, Error> {
        let reference = match kind {
            PlaneKind::Horizontal => Vec3::y(),
            PlaneKind::Vertical => Vec3::z(),
        };
        let normal = u.cross(&reference);
        if normal.norm() < 1e-12 {
            return Err(Error::InvalidParameters(
                "centerline is parallel to the plane reference axis".into(),
            ));
        }
        let normal = normal.normalize();
        let axis1 = u.normalize();
        let axis2 = normal.cross(&axis1);
        Ok(PlaneSpec {
            center: p2,
            axis1,
            axis2,
            half_extent1,
            half_extent2,
        })
    }
}

/// Velocity and pressure on an (n1 × n2) grid over the plane.
pub fn flow_field_grid(
    plane: &PlaneSpec,
    resolution: (usize, usize),
    loads: &PointLoads,
    rod: &RodState,
    fluid: &FluidParams,
) -> Vec<FlowSample> {
    let (n1, n2) = resolution;
    let src = StokesSources::from_rod_loads(rod, loads, fluid);
    let coords: Vec<Vec3> = (0..n1 * n2)
        .map(|idx| {
            let i = idx / n2;
            let j = idx % n2;
            let a = if n1 > 1 {
                -plane.half_extent1 + 2.0 * plane.half_extent1 * i as f64 / (n1 - 1) as f64
            } else {
                0.0
            };
            let b = if n2 > 1 {
                -plane.half_extent2 + 2.0 * plane.half_extent2 * j as f64 / (n2 - 1) as f64
            } else {
                0.0
            };
            plane.center + a * plane.axis1 + b * plane.axis2
        })
        .collect();
    let eval = |p: &Vec3| {
        let (v, _, pr) = src.eval(p, fluid.mu, SumMode::Sequential);
        FlowSample {
            position: *p,
            velocity: v,
            pressure: pr,
        }
    };
    if rayon::current_num_threads() > 1 {
        coords.par_iter().map(eval).collect()
    } else {
        coords.iter().map(eval).collect()
    }
}
