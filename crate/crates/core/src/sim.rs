//! Orchestrates the coupled step: calcium → amplitudes → preferred
//! strain-twist → point loads → fluid velocities → rod/triad update.
//!
//! Positions advance by forward Euler with the no-slip velocity; triads
//! rotate by the exact rotation of axis w/|w| and angle |w|Δt, with a
//! periodic re-orthonormalization pass. A step aborts with a diagnostic
//! when a frame flips, a segment strains beyond 10%, or values go
//! non-finite.

use crate::calcium::{
    step_calcium_adaptive, update_amplitudes, CalciumField, CouplingParams, FluxModel,
};
use crate::elasticity::{elastic_energy_with, point_loads_with, MaterialParams, PointLoads};
use crate::error::Error;
use crate::hydro::{rod_velocities, FluidParams, SumMode};
use crate::rod::{
    half_point_triads, init_rod, phase_half_points, preferred_strain_twist, reorthonormalize_in_place,
    solve_phase, PreferredStrainTwist, RodState, WaveParams,
};
use crate::Vec3;
use std::io::Read;
use std::path::Path;

/// Numerical discretization and output cadence settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NumericsParams {
    /// Material spacing Δs (μm).
    pub ds: f64,
    /// Time step Δt (s).
    pub dt: f64,
    /// Simulated duration (s).
    pub duration: f64,
    /// Record cadence in steps.
    pub output_every: u64,
    /// Dense probe cadence in steps (first/last point and center of mass).
    pub probe_every: u64,
    /// Checkpoint cadence in steps.
    pub checkpoint_every: u64,
    /// Triad re-orthonormalization cadence in steps.
    pub reorthonormalize_every: u64,
    /// Kernel summation order.
    pub sum_mode: SumMode,
}

/// Full simulation configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub wave: WaveParams,
    pub material: MaterialParams,
    pub fluid: FluidParams,
    pub coupling: CouplingParams,
    pub flux: FluxModel,
    /// Calcium diffusion coefficient (μm²/s).
    pub d_ca: f64,
    pub numerics: NumericsParams,
}

impl SimConfig {
    /// Number of material intervals M (points = M + 1).
    pub fn intervals(&self) -> usize {
        (self.wave.length / self.numerics.ds).round() as usize
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.wave.validate()?;
        self.material.validate()?;
        self.fluid.validate()?;
        self.coupling.validate()?;
        let n = &self.numerics;
        if !(n.dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(n.duration >= 0.0) {
            return Err(Error::Config("duration must be non-negative".into()));
        }
        if !(n.ds > 0.0) {
            return Err(Error::Config("ds must be positive".into()));
        }
        let m = self.wave.length / n.ds;
        if (m - m.round()).abs() > 1e-9 || m.round() < 2.0 {
            return Err(Error::Config(format!(
                "ds = {} does not evenly divide the rod length {}",
                n.ds, self.wave.length
            )));
        }
        if n.output_every == 0 || n.probe_every == 0 || n.checkpoint_every == 0 {
            return Err(Error::Config("output cadences must be positive".into()));
        }
        if n.reorthonormalize_every == 0 {
            return Err(Error::Config(
                "reorthonormalize_every must be positive".into(),
            ));
        }
        if !(self.d_ca > 0.0) {
            return Err(Error::Config("d_ca must be positive".into()));
        }
        Ok(())
    }
}

/// Per-record health metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub energy: f64,
    pub total_force: Vec3,
    pub total_torque: Vec3,
    pub total_force_rel: f64,
    pub total_torque_rel: f64,
    pub max_strain: f64,
    pub ortho_drift: f64,
}

/// Snapshot emitted at the output cadence.
#[derive(Debug, Clone)]
pub struct SimRecord {
    pub step: u64,
    pub time: f64,
    pub rod: RodState,
    /// Calcium concentrations at the record time.
    pub ca: Vec<f64>,
    /// Per-point amplitudes driving the current loads.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub loads: PointLoads,
    pub diag: Diagnostics,
}

/// Stage products of steps 1–4, computed once per state.
struct Prepared {
    ca_next: CalciumField,
    a: Vec<f64>,
    b: Vec<f64>,
    omega2_whole: Vec<f64>,
    pst_half: PreferredStrainTwist,
    loads: PointLoads,
    diag: Diagnostics,
}

pub struct Simulation {
    pub cfg: SimConfig,
    rod: RodState,
    rod_prev: RodState,
    ca: CalciumField,
    omega2_prev: Vec<f64>,
    step_idx: u64,
    prepared: Option<Prepared>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self, Error> {
        cfg.validate()?;
        let m = cfg.intervals();
        let rod = init_rod(&cfg.wave, m)?;
        let ca = CalciumField::baseline(m + 1, cfg.wave.length, cfg.d_ca, cfg.coupling.ca_hat);
        // preferred Ω2 at t = 0 with baseline amplitudes seeds the
        // curvature-sign selection of the first step
        let a0 = vec![cfg.wave.a0; m + 1];
        let b0 = vec![cfg.wave.b0; m + 1];
        let x = solve_phase(&cfg.wave, &a0, &b0, 0.0, rod.ds)?;
        let pst = preferred_strain_twist(0.0, &x, &a0, &b0, cfg.wave.k, cfg.wave.sigma);
        Ok(Simulation {
            rod_prev: rod.clone(),
            rod,
            ca,
            omega2_prev: pst.omega2,
            step_idx: 0,
            prepared: None,
            cfg,
        })
    }

    pub fn time(&self) -> f64 {
        self.rod.time
    }

    pub fn step_index(&self) -> u64 {
        self.step_idx
    }

    pub fn rod(&self) -> &RodState {
        &self.rod
    }

    pub fn calcium(&self) -> &CalciumField {
        &self.ca
    }

    /// Steps 1–4 for the current state: advance calcium, update
    /// amplitudes, regenerate the preferred strain-twist, compute loads.
    fn prepare(&mut self) -> Result<(), Error> {
        if self.prepared.is_some() {
            return Ok(());
        }
        let cfg = &self.cfg;
        let t = self.rod.time;
        let dt = cfg.numerics.dt;
        let m = self.rod.intervals();

        // (1) calcium, skipped entirely without coupling
        let ca_next = if cfg.coupling.mode.couples_calcium() {
            step_calcium_adaptive(&self.ca, &self.rod_prev, &self.rod, &cfg.flux, t, dt, 12)?
        } else {
            self.ca.clone()
        };

        // (2) amplitudes from the new field, curvature sign lagged one step
        let (a, b) = update_amplitudes(
            &ca_next,
            cfg.wave.a0,
            cfg.wave.b0,
            &cfg.coupling,
            &self.omega2_prev,
        );

        // (3) phase + preferred strain twist at whole and half points
        let x = solve_phase(&cfg.wave, &a, &b, t, self.rod.ds)?;
        let xh = phase_half_points(&cfg.wave, &a, &b, t, self.rod.ds, &x);
        let pst_whole = preferred_strain_twist(t, &x, &a, &b, cfg.wave.k, cfg.wave.sigma);
        let pst_half = preferred_strain_twist(t, &xh, &a[..m], &b[..m], cfg.wave.k, cfg.wave.sigma);

        // (4) point loads, with the frame-flip guard
        let half = half_point_triads(&self.rod)?;
        let max_rot = crate::rod::max_adjacent_rotation(&self.rod);
        if max_rot > std::f64::consts::FRAC_PI_2 {
            return Err(Error::Instability(format!(
                "adjacent triads rotated by {max_rot:.3} rad at step {}; reduce dt",
                self.step_idx
            )));
        }
        let loads = point_loads_with(&self.rod, &half, &pst_half, &cfg.material)?;

        let energy = elastic_energy_with(&self.rod, &half, &pst_half, &cfg.material);
        let diag = Diagnostics {
            energy,
            total_force: loads.total_force(),
            total_torque: loads.total_torque(&self.rod.points),
            total_force_rel: loads.total_force_relative(),
            total_torque_rel: loads.total_torque_relative(&self.rod.points),
            max_strain: self.rod.max_segment_strain(),
            ortho_drift: self.rod.orthonormality_drift(),
        };
        if !energy.is_finite() {
            return Err(Error::Instability(format!(
                "non-finite elastic energy at step {}",
                self.step_idx
            )));
        }

        self.prepared = Some(Prepared {
            ca_next,
            a,
            b,
            omega2_whole: pst_whole.omega2,
            pst_half,
            loads,
            diag,
        });
        Ok(())
    }

    /// One full step of the coupled system.
    pub fn step(&mut self) -> Result<(), Error> {
        self.prepare()?;
        let prepared = self.prepared.take().expect("prepared stage");
        let cfg = &self.cfg;
        let dt = cfg.numerics.dt;

        // (5) no-slip velocities at every rod point
        let (v, w) = rod_velocities(&self.rod, &prepared.loads, &cfg.fluid, cfg.numerics.sum_mode);

        // (6) forward Euler positions, exact rotation for the triads
        self.rod_prev = self.rod.clone();
        for (p, vel) in self.rod.points.iter_mut().zip(&v) {
            *p += vel * dt;
        }
        for (t_frame, ang) in self.rod.triads.iter_mut().zip(&w) {
            let q = nalgebra::UnitQuaternion::from_scaled_axis(ang * dt);
            *t_frame = t_frame.rotated(&q);
        }
        self.step_idx += 1;
        self.rod.time = self.step_idx as f64 * dt;
        self.ca = prepared.ca_next;
        self.omega2_prev = prepared.omega2_whole;

        if self.step_idx.is_multiple_of(cfg.numerics.reorthonormalize_every) {
            reorthonormalize_in_place(&mut self.rod);
        }

        let strain = self.rod.max_segment_strain();
        if !strain.is_finite() || strain > 0.10 {
            return Err(Error::Instability(format!(
                "segment strain {strain:.3} exceeds 10% at step {}",
                self.step_idx
            )));
        }
        if self.rod.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite() || !p.z.is_finite())
        {
            return Err(Error::Instability(format!(
                "non-finite position at step {}",
                self.step_idx
            )));
        }
        Ok(())
    }

    /// Record for the current state (computes loads if needed).
    pub fn record(&mut self) -> Result<SimRecord, Error> {
        self.prepare()?;
        let p = self.prepared.as_ref().expect("prepared stage");
        Ok(SimRecord {
            step: self.step_idx,
            time: self.rod.time,
            rod: self.rod.clone(),
            ca: self.ca.ca.clone(),
            a: p.a.clone(),
            b: p.b.clone(),
            loads: p.loads.clone(),
            diag: p.diag,
        })
    }

    /// Preferred strain twist at half points for the current state.
    pub fn preferred_half(&mut self) -> Result<PreferredStrainTwist, Error> {
        self.prepare()?;
        Ok(self
            .prepared
            .as_ref()
            .expect("prepared stage")
            .pst_half
            .clone())
    }

    /// Serialize the full state (enough for bitwise resumption).
    pub fn save_checkpoint(&self, path: &Path) -> Result<(), Error> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&self.step_idx.to_le_bytes());
        buf.extend_from_slice(&self.rod.time.to_le_bytes());
        buf.extend_from_slice(&self.rod_prev.time.to_le_bytes());
        buf.extend_from_slice(&self.rod.ds.to_le_bytes());
        buf.extend_from_slice(&(self.rod.points.len() as u64).to_le_bytes());
        let push_vec3s = |buf: &mut Vec<u8>, vs: &[Vec3]| {
            for v in vs {
                buf.extend_from_slice(&v.x.to_le_bytes());
                buf.extend_from_slice(&v.y.to_le_bytes());
                buf.extend_from_slice(&v.z.to_le_bytes());
            }
        };
        push_vec3s(&mut buf, &self.rod.points);
        for t in &self.rod.triads {
            push_vec3s(&mut buf, &[t.d1, t.d2, t.d3]);
        }
        push_vec3s(&mut buf, &self.rod_prev.points);
        for t in &self.rod_prev.triads {
            push_vec3s(&mut buf, &[t.d1, t.d2, t.d3]);
        }
        for c in &self.ca.ca {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        for o in &self.omega2_prev {
            buf.extend_from_slice(&o.to_le_bytes());
        }
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Restore a simulation from a checkpoint written with the same config.
    pub fn restore_checkpoint(cfg: SimConfig, path: &Path) -> Result<Self, Error> {
        let mut file = std::fs::File::open(path)?;
        let mut buf = Vec::new();
        file.read_to_end(&mut buf)?;
        let mut cursor = Cursor::new(&buf);

        let magic = cursor.take_bytes(8)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic header".into()));
        }
        let version = u32::from_le_bytes(cursor.take_bytes(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::IncompatibleVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let step_idx = u64::from_le_bytes(cursor.take_bytes(8)?.try_into().unwrap());
        let time = cursor.take_f64()?;
        let prev_time = cursor.take_f64()?;
        let ds = cursor.take_f64()?;
        let n = u64::from_le_bytes(cursor.take_bytes(8)?.try_into().unwrap()) as usize;
        let m = cfg.intervals();
        if n != m + 1 {
            return Err(Error::CorruptCheckpoint(format!(
                "checkpoint has {n} points, config expects {}",
                m + 1
            )));
        }
        let points = cursor.take_vec3s(n)?;
        let triads = cursor.take_triads(n)?;
        let prev_points = cursor.take_vec3s(n)?;
        let prev_triads = cursor.take_triads(n)?;
        let mut ca_values = Vec::with_capacity(n);
        for _ in 0..n {
            ca_values.push(cursor.take_f64()?);
        }
        let mut omega2_prev = Vec::with_capacity(n);
        for _ in 0..n {
            omega2_prev.push(cursor.take_f64()?);
        }
        if !cursor.done() {
            return Err(Error::CorruptCheckpoint("trailing bytes".into()));
        }

        let mut ca =
            CalciumField::baseline(n, cfg.wave.length, cfg.d_ca, cfg.coupling.ca_hat);
        ca.ca = ca_values;
        Ok(Simulation {
            rod: RodState {
                points,
                triads,
                ds,
                time,
            },
            rod_prev: RodState {
                points: prev_points,
                triads: prev_triads,
                ds,
                time: prev_time,
            },
            ca,
            omega2_prev,
            step_idx,
            prepared: None,
            cfg,
        })
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"FLGSIMCK";
const CHECKPOINT_VERSION: u32 = 1;

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take_bytes(&mut self, n: usize) -> Result<&'a [u8], Error> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "truncated at byte {} (wanted {n} more)",
                self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn take_f64(&mut self) -> Result<f64, Error> {
        Ok(f64::from_le_bytes(self.take_bytes(8)?.try_into().unwrap()))
    }

    fn take_vec3s(&mut self, n: usize) -> Result<Vec<Vec3>, Error> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let x = self.take_f64()?;
            let y = self.take_f64()?;
            let z = self.take_f64()?;
            out.push(Vec3::new(x, y, z));
        }
        Ok(out)
    }

    fn take_triads(&mut self, n: usize) -> Result<Vec<crate::rod::Triad>, Error> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let v = self.take_vec3s(3)?;
            out.push(crate::rod::Triad {
                d1: v[0],
                d2: v[1],
                d3: v[2],
            });
        }
        Ok(out)
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

/// Run a configuration to completion, passing records at the output
/// cadence to `sink` (including the initial record).
pub fn run<F>(cfg: SimConfig, mut sink: F) -> Result<Simulation, Error>
where
    F: FnMut(&SimRecord) -> Result<(), Error>,
{
    let steps = (cfg.numerics.duration / cfg.numerics.dt).round() as u64;
    let output_every = cfg.numerics.output_every;
    let mut sim = Simulation::new(cfg)?;
    sink(&sim.record()?)?;
    for s in 1..=steps {
        sim.step()?;
        if s % output_every == 0 || s == steps {
            sink(&sim.record()?)?;
        }
    }
    Ok(sim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calcium::CouplingMode;
    use crate::rod::preferred_curvature;

    fn base_config(a0: f64, b0: f64, mode: CouplingMode) -> SimConfig {
        SimConfig {
            wave: WaveParams {
                a0,
                b0,
                k: 2.0 * std::f64::consts::PI / 30.0,
                sigma: 40.0 * std::f64::consts::PI,
                length: 60.0,
            },
            material: MaterialParams {
                a1: 1.0,
                a2: 1.0,
                a3: 1.0,
                b1: 0.6,
                b2: 0.6,
                b3: 0.6,
            },
            fluid: FluidParams {
                mu: 1e-6,
                epsilon: 2.0,
            },
            coupling: CouplingParams {
                mode,
                c1: 9.0f64.ln(),
                c2p: 0.7,
                c2n: 1.0,
                ca_hat: 0.1,
            },
            flux: FluxModel::default(),
            d_ca: 20.0,
            numerics: NumericsParams {
                ds: 0.4,
                dt: 4e-6,
                duration: 1e-3,
                output_every: 100,
                probe_every: 50,
                checkpoint_every: 1000,
                reorthonormalize_every: 100,
                sum_mode: SumMode::Sequential,
            },
        }
    }

    #[test]
    fn straight_rod_stays_put() {
        // zero amplitudes: preferred strain twist vanishes and the rod
        // sits at equilibrium up to chord-length round-off
        let cfg = base_config(0.0, 0.0, CouplingMode::NoCa);
        let mut sim = Simulation::new(cfg).unwrap();
        let before = sim.rod().clone();
        for _ in 0..5 {
            sim.step().unwrap();
        }
        for (p, q) in sim.rod().points.iter().zip(&before.points) {
            assert!((p - q).norm() <= 1e-12);
        }
        for (a, b) in sim.rod().triads.iter().zip(&before.triads) {
            assert!((a.matrix() - b.matrix()).abs().max() <= 1e-13);
        }
    }

    #[test]
    fn totals_vanish_during_stepping() {
        let cfg = base_config(3.0, 0.0, CouplingMode::NoCa);
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..20 {
            sim.step().unwrap();
            let rec = sim.record().unwrap();
            assert!(rec.diag.total_force_rel <= 1e-10);
            assert!(rec.diag.total_torque_rel <= 1e-8);
        }
    }

    #[test]
    fn energy_decays_toward_frozen_preferred_shape() {
        // time-independent preferred strain twist in quiescent fluid:
        // Stokes drag dissipates elastic energy monotonically
        use crate::elasticity::point_loads_with;
        use crate::hydro::rod_velocities;
        use crate::rod::{self, half_point_triads};

        let cfg = base_config(3.0, 3.0, CouplingMode::NoCa);
        let m = cfg.intervals();
        let mut rod = init_rod(&cfg.wave, m).unwrap();
        // freeze the preferred configuration of a slightly later time so
        // the rod is out of equilibrium
        let t_frozen = 0.002;
        let a = vec![cfg.wave.a0; m + 1];
        let b = vec![cfg.wave.b0; m + 1];
        let x = solve_phase(&cfg.wave, &a, &b, t_frozen, rod.ds).unwrap();
        let xh = phase_half_points(&cfg.wave, &a, &b, t_frozen, rod.ds, &x);
        let pst =
            preferred_strain_twist(t_frozen, &xh, &a[..m], &b[..m], cfg.wave.k, cfg.wave.sigma);

        let mut last_energy = f64::INFINITY;
        for _ in 0..200 {
            let half = half_point_triads(&rod).unwrap();
            let loads = point_loads_with(&rod, &half, &pst, &cfg.material).unwrap();
            let e = elastic_energy_with(&rod, &half, &pst, &cfg.material);
            assert!(
                e <= last_energy * (1.0 + 1e-6),
                "energy rose: {last_energy} -> {e}"
            );
            last_energy = e;
            let (v, w) = rod_velocities(&rod, &loads, &cfg.fluid, SumMode::Sequential);
            for (p, vel) in rod.points.iter_mut().zip(&v) {
                *p += vel * cfg.numerics.dt;
            }
            for (t_frame, ang) in rod.triads.iter_mut().zip(&w) {
                let q = nalgebra::UnitQuaternion::from_scaled_axis(ang * cfg.numerics.dt);
                *t_frame = t_frame.rotated(&q);
            }
            let _ = rod::actual_strain_twist(&rod).unwrap();
        }
        assert!(last_energy.is_finite());
    }

    #[test]
    fn zero_duration_emits_single_record() {
        let mut cfg = base_config(3.0, 0.0, CouplingMode::NoCa);
        cfg.numerics.duration = 0.0;
        let mut count = 0;
        run(cfg, |_| {
            count += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(count, 1);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let cfg = base_config(3.0, 1.0, CouplingMode::CaAsymA);
        let mut sim = Simulation::new(cfg.clone()).unwrap();
        for _ in 0..10 {
            sim.step().unwrap();
        }
        let dir = std::env::temp_dir().join("flagsim_ckpt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.ckpt");
        sim.save_checkpoint(&path).unwrap();
        let restored = Simulation::restore_checkpoint(cfg, &path).unwrap();
        assert_eq!(restored.step_idx, sim.step_idx);
        assert_eq!(restored.rod.time.to_bits(), sim.rod.time.to_bits());
        for k in 0..sim.rod.points.len() {
            assert_eq!(restored.rod.points[k], sim.rod.points[k]);
            assert_eq!(restored.rod.triads[k].matrix(), sim.rod.triads[k].matrix());
            assert_eq!(restored.ca.ca[k].to_bits(), sim.ca.ca[k].to_bits());
            assert_eq!(
                restored.omega2_prev[k].to_bits(),
                sim.omega2_prev[k].to_bits()
            );
        }
    }

    #[test]
    fn resume_reproduces_uninterrupted_run() {
        let cfg = base_config(3.0, 1.0, CouplingMode::CaAsymA);
        let mut full = Simulation::new(cfg.clone()).unwrap();
        for _ in 0..30 {
            full.step().unwrap();
        }

        let mut first_half = Simulation::new(cfg.clone()).unwrap();
        for _ in 0..15 {
            first_half.step().unwrap();
        }
        let dir = std::env::temp_dir().join("flagsim_resume_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mid.ckpt");
        first_half.save_checkpoint(&path).unwrap();
        let mut resumed = Simulation::restore_checkpoint(cfg, &path).unwrap();
        for _ in 0..15 {
            resumed.step().unwrap();
        }
        for k in 0..full.rod.points.len() {
            assert_eq!(resumed.rod.points[k], full.rod.points[k]);
            assert_eq!(resumed.ca.ca[k].to_bits(), full.ca.ca[k].to_bits());
        }
    }

    #[test]
    fn truncated_checkpoint_is_corrupt() {
        let cfg = base_config(3.0, 0.0, CouplingMode::NoCa);
        let sim = Simulation::new(cfg.clone()).unwrap();
        let dir = std::env::temp_dir().join("flagsim_corrupt_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.ckpt");
        sim.save_checkpoint(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            Simulation::restore_checkpoint(cfg, &path),
            Err(Error::CorruptCheckpoint(_))
        ));
    }

    #[test]
    fn version_mismatch_is_detected() {
        let cfg = base_config(3.0, 0.0, CouplingMode::NoCa);
        let sim = Simulation::new(cfg.clone()).unwrap();
        let dir = std::env::temp_dir().join("flagsim_version_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.ckpt");
        sim.save_checkpoint(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8..12].copy_from_slice(&99u32.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(
            Simulation::restore_checkpoint(cfg, &path),
            Err(Error::IncompatibleVersion {
                found: 99,
                expected: 1
            })
        ));
    }

    #[test]
    fn no_ca_mode_ignores_calcium_state() {
        // two NoCa simulations with different calcium fields must
        // produce bitwise identical rods
        let cfg = base_config(3.0, 1.0, CouplingMode::NoCa);
        let mut cold = Simulation::new(cfg.clone()).unwrap();
        let mut hot = Simulation::new(cfg).unwrap();
        hot.ca.ca.iter_mut().for_each(|c| *c = 1.7);
        for _ in 0..10 {
            cold.step().unwrap();
            hot.step().unwrap();
        }
        for k in 0..cold.rod.points.len() {
            assert_eq!(cold.rod.points[k], hot.rod.points[k]);
            assert_eq!(cold.rod.triads[k].matrix(), hot.rod.triads[k].matrix());
        }
    }

    #[test]
    fn oversized_time_step_aborts_with_instability() {
        let mut cfg = base_config(3.0, 0.0, CouplingMode::NoCa);
        cfg.numerics.dt = 5e-4;
        cfg.numerics.duration = 1.0;
        let mut sim = Simulation::new(cfg).unwrap();
        let mut failed = false;
        for _ in 0..2000 {
            match sim.step() {
                Ok(()) => {}
                Err(Error::Instability(_)) | Err(Error::FrameFlip(..)) => {
                    failed = true;
                    break;
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(failed, "expected an instability abort at dt = 5e-4");
    }

    #[test]
    fn helical_curvature_bounded_during_transient() {
        // 500 coarse steps sit mid-transient; the curvature mismatch must
        // stay bounded (the tight 1e-2 bound applies post-transient and
        // is exercised by the acceptance suite)
        let mut cfg = base_config(3.0, 3.0, CouplingMode::NoCa);
        cfg.numerics.duration = 2e-3;
        let mut sim = Simulation::new(cfg).unwrap();
        for _ in 0..500 {
            sim.step().unwrap();
        }
        let pst = sim.preferred_half().unwrap();
        let omega = preferred_curvature(&pst);
        let actual = crate::rod::actual_strain_twist(sim.rod()).unwrap();
        let omega_star = actual.curvature();
        let omega_max = omega.iter().cloned().fold(0.0, f64::max);
        let err = omega
            .iter()
            .zip(&omega_star)
            .map(|(o, os)| (o - os).abs())
            .fold(0.0, f64::max)
            / omega_max;
        assert!(err <= 0.1, "normalized curvature error {err:.3e}");
    }
}
