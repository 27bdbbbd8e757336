//! Run-directory output: CSV tables, dense probe rows, checkpoints, and
//! the readers the analysis commands use.
//!
//! All CSVs carry a header row and full-precision doubles. Snapshots of
//! every point go out at the output cadence; the dense probe keeps only
//! the first/last point and the center of mass so flagelloid curves and
//! speeds can be sampled far more often than full snapshots.

use crate::analysis::Trajectory;
use crate::config::resolved_toml;
use crate::error::Error;
use crate::rod::{RodState, Triad};
use crate::sim::{SimConfig, SimRecord, Simulation};
use crate::Vec3;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRIADS_FILE: &str = "triads.csv";
pub const CALCIUM_FILE: &str = "calcium.csv";
pub const LOADS_FILE: &str = "loads.csv";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.csv";
pub const AMPLITUDES_FILE: &str = "amplitudes.csv";
pub const PROBE_FILE: &str = "probe.csv";
pub const CONFIG_FILE: &str = "resolved_config.toml";

/// Writers for one run directory.
pub struct RunWriter {
    dir: PathBuf,
    trajectory: BufWriter<File>,
    triads: BufWriter<File>,
    calcium: BufWriter<File>,
    loads: BufWriter<File>,
    diagnostics: BufWriter<File>,
    amplitudes: BufWriter<File>,
    probe: BufWriter<File>,
    ds: f64,
    length: f64,
}

fn create(path: &Path, header: &str) -> Result<BufWriter<File>, Error> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    Ok(w)
}

impl RunWriter {
    pub fn create(dir: &Path, cfg: &SimConfig) -> Result<Self, Error> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(CONFIG_FILE), resolved_toml(cfg))?;
        Ok(RunWriter {
            trajectory: create(&dir.join(TRAJECTORY_FILE), "t,point,x,y,z")?,
            triads: create(
                &dir.join(TRIADS_FILE),
                "t,point,d1x,d1y,d1z,d2x,d2y,d2z,d3x,d3y,d3z",
            )?,
            calcium: create(&dir.join(CALCIUM_FILE), "t,s,ca,region")?,
            loads: create(&dir.join(LOADS_FILE), "t,point,fx,fy,fz,nx,ny,nz")?,
            diagnostics: create(
                &dir.join(DIAGNOSTICS_FILE),
                "t,energy,fx,fy,fz,nx,ny,nz,f_rel,n_rel,max_strain,ortho_drift",
            )?,
            amplitudes: create(&dir.join(AMPLITUDES_FILE), "t,point,a,b")?,
            probe: create(
                &dir.join(PROBE_FILE),
                "t,x_first,y_first,z_first,x_last,y_last,z_last,x_com,y_com,z_com",
            )?,
            dir: dir.to_path_buf(),
            ds: cfg.numerics.ds,
            length: cfg.wave.length,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Full snapshot at the output cadence.
    pub fn write_record(&mut self, rec: &SimRecord) -> Result<(), Error> {
        let t = rec.time;
        for (k, p) in rec.rod.points.iter().enumerate() {
            writeln!(self.trajectory, "{t:.17e},{k},{:.17e},{:.17e},{:.17e}", p.x, p.y, p.z)?;
        }
        for (k, tri) in rec.rod.triads.iter().enumerate() {
            writeln!(
                self.triads,
                "{t:.17e},{k},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                tri.d1.x, tri.d1.y, tri.d1.z, tri.d2.x, tri.d2.y, tri.d2.z, tri.d3.x, tri.d3.y,
                tri.d3.z
            )?;
        }
        for (k, ca) in rec.ca.iter().enumerate() {
            let s = k as f64 * self.ds;
            let region = crate::calcium::region_of(s, self.length);
            writeln!(self.calcium, "{t:.17e},{s:.17e},{ca:.17e},{}", region.label())?;
        }
        for k in 0..rec.loads.f.len() {
            let f = rec.loads.f[k];
            let n = rec.loads.n[k];
            writeln!(
                self.loads,
                "{t:.17e},{k},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                f.x, f.y, f.z, n.x, n.y, n.z
            )?;
        }
        for k in 0..rec.a.len() {
            writeln!(
                self.amplitudes,
                "{t:.17e},{k},{:.17e},{:.17e}",
                rec.a[k], rec.b[k]
            )?;
        }
        let d = &rec.diag;
        writeln!(
            self.diagnostics,
            "{t:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            d.energy,
            d.total_force.x,
            d.total_force.y,
            d.total_force.z,
            d.total_torque.x,
            d.total_torque.y,
            d.total_torque.z,
            d.total_force_rel,
            d.total_torque_rel,
            d.max_strain,
            d.ortho_drift
        )?;
        Ok(())
    }

    /// Dense probe row: first point, last point, center of mass.
    pub fn write_probe(&mut self, t: f64, rod: &RodState) -> Result<(), Error> {
        let first = rod.points[0];
        let last = *rod.points.last().unwrap();
        let com = rod.points.iter().sum::<Vec3>() / rod.points.len() as f64;
        writeln!(
            self.probe,
            "{t:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            first.x, first.y, first.z, last.x, last.y, last.z, com.x, com.y, com.z
        )?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), Error> {
        self.trajectory.flush()?;
        self.triads.flush()?;
        self.calcium.flush()?;
        self.loads.flush()?;
        self.diagnostics.flush()?;
        self.amplitudes.flush()?;
        self.probe.flush()?;
        Ok(())
    }
}

pub fn checkpoint_name(step: u64) -> String {
    format!("checkpoint_{step:012}.bin")
}

/// Run the configuration to completion in `dir`, writing snapshots,
/// probe rows and checkpoints. Returns the finished simulation.
pub fn run_to_dir(cfg: SimConfig, dir: &Path) -> Result<Simulation, Error> {
    cfg.validate()?;
    let mut writer = RunWriter::create(dir, &cfg)?;
    let steps = (cfg.numerics.duration / cfg.numerics.dt).round() as u64;
    let output_every = cfg.numerics.output_every;
    let probe_every = cfg.numerics.probe_every;
    let checkpoint_every = cfg.numerics.checkpoint_every;

    let mut sim = Simulation::new(cfg)?;
    writer.write_record(&sim.record()?)?;
    writer.write_probe(sim.time(), sim.rod())?;
    sim.save_checkpoint(&dir.join(checkpoint_name(0)))?;

    for s in 1..=steps {
        if let Err(e) = sim.step() {
            writer.flush()?;
            // leave a final checkpoint for post-mortem inspection
            let _ = sim.save_checkpoint(&dir.join("checkpoint_abort.bin"));
            return Err(e);
        }
        if s % probe_every == 0 || s == steps {
            writer.write_probe(sim.time(), sim.rod())?;
        }
        if s % output_every == 0 || s == steps {
            writer.write_record(&sim.record()?)?;
        }
        if s % checkpoint_every == 0 || s == steps {
            sim.save_checkpoint(&dir.join(checkpoint_name(s)))?;
        }
    }
    writer.flush()?;
    Ok(sim)
}

/// Everything the analysis commands need from a finished run.
pub struct RunData {
    pub cfg: SimConfig,
    pub records: Vec<SimRecord>,
    pub probe_times: Vec<f64>,
    pub probe_first: Vec<Vec3>,
    pub probe_last: Vec<Vec3>,
    pub probe_com: Vec<Vec3>,
}

impl RunData {
    pub fn first_point_trajectory(&self) -> Result<Trajectory, Error> {
        Trajectory::new(self.probe_times.clone(), self.probe_first.clone())
    }

    pub fn last_point_trajectory(&self) -> Result<Trajectory, Error> {
        Trajectory::new(self.probe_times.clone(), self.probe_last.clone())
    }

    pub fn com_trajectory(&self) -> Result<Trajectory, Error> {
        Trajectory::new(self.probe_times.clone(), self.probe_com.clone())
    }
}

fn parse_fields(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>, Error> {
    line.split(',')
        .map(|s| {
            s.trim().parse::<f64>().map_err(|_| {
                Error::MissingData(format!(
                    "{}:{}: cannot parse '{s}' as a number",
                    path.display(),
                    lineno
                ))
            })
        })
        .collect()
}

fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>, Error> {
    let file = File::open(path)
        .map_err(|_| Error::MissingData(format!("missing {}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if i == 0 || line.trim().is_empty() {
            continue;
        }
        rows.push(parse_fields(&line, path, i + 1)?);
    }
    Ok(rows)
}

/// Load a run directory back into memory. Loads and calcium are read
/// when present; records carry zeroed diagnostics (the diagnostics table
/// stays on disk).
pub fn read_run(dir: &Path) -> Result<RunData, Error> {
    let cfg = crate::config::load_config(&dir.join(CONFIG_FILE))?;
    let n_points = cfg.intervals() + 1;

    let probe_rows = read_csv(&dir.join(PROBE_FILE))?;
    let mut probe_times = Vec::with_capacity(probe_rows.len());
    let mut probe_first = Vec::with_capacity(probe_rows.len());
    let mut probe_last = Vec::with_capacity(probe_rows.len());
    let mut probe_com = Vec::with_capacity(probe_rows.len());
    for row in &probe_rows {
        if row.len() != 10 {
            return Err(Error::MissingData("probe row with wrong arity".into()));
        }
        probe_times.push(row[0]);
        probe_first.push(Vec3::new(row[1], row[2], row[3]));
        probe_last.push(Vec3::new(row[4], row[5], row[6]));
        probe_com.push(Vec3::new(row[7], row[8], row[9]));
    }

    let traj_rows = read_csv(&dir.join(TRAJECTORY_FILE))?;
    let triad_rows = read_csv(&dir.join(TRIADS_FILE))?;
    let amp_rows = read_csv(&dir.join(AMPLITUDES_FILE))?;
    if traj_rows.len() % n_points != 0 || triad_rows.len() != traj_rows.len() {
        return Err(Error::MissingData(
            "trajectory/triads tables truncated or inconsistent".into(),
        ));
    }
    let n_records = traj_rows.len() / n_points;
    let mut records = Vec::with_capacity(n_records);
    for r in 0..n_records {
        let base = r * n_points;
        let time = traj_rows[base][0];
        let mut points = Vec::with_capacity(n_points);
        let mut triads = Vec::with_capacity(n_points);
        let mut a = Vec::with_capacity(n_points);
        let mut b = Vec::with_capacity(n_points);
        for k in 0..n_points {
            let row = &traj_rows[base + k];
            points.push(Vec3::new(row[2], row[3], row[4]));
            let tr = &triad_rows[base + k];
            triads.push(Triad {
                d1: Vec3::new(tr[2], tr[3], tr[4]),
                d2: Vec3::new(tr[5], tr[6], tr[7]),
                d3: Vec3::new(tr[8], tr[9], tr[10]),
            });
            if let Some(amp) = amp_rows.get(base + k) {
                a.push(amp[2]);
                b.push(amp[3]);
            } else {
                a.push(cfg.wave.a0);
                b.push(cfg.wave.b0);
            }
        }
        records.push(SimRecord {
            step: (time / cfg.numerics.dt).round() as u64,
            time,
            rod: RodState {
                points,
                triads,
                ds: cfg.numerics.ds,
                time,
            },
            ca: vec![cfg.coupling.ca_hat; n_points],
            a,
            b,
            loads: crate::elasticity::PointLoads::zeros(n_points),
            diag: crate::sim::Diagnostics {
                energy: 0.0,
                total_force: Vec3::zeros(),
                total_torque: Vec3::zeros(),
                total_force_rel: 0.0,
                total_torque_rel: 0.0,
                max_strain: 0.0,
                ortho_drift: 0.0,
            },
        });
    }

    Ok(RunData {
        cfg,
        records,
        probe_times,
        probe_first,
        probe_last,
        probe_com,
    })
}

/// Checkpoints present in a run directory as (step, path), sorted.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(u64, PathBuf)>, Error> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(step_s) = name
            .strip_prefix("checkpoint_")
            .and_then(|s| s.strip_suffix(".bin"))
        {
            if let Ok(step) = step_s.parse::<u64>() {
                out.push((step, entry.path()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Write flow-field samples as the columnar text format
/// `x y z vx vy vz p` (space-delimited).
pub fn write_flow_field(path: &Path, samples: &[crate::hydro::FlowSample]) -> Result<(), Error> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x y z vx vy vz p")?;
    for s in samples {
        writeln!(
            w,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z,
            s.pressure
        )?;
    }
    w.flush()?;
    Ok(())
}
