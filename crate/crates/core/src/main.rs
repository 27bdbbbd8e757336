//! Command-line entry points: simulate, analyze, flowfield, presets.

use clap::{Parser, Subcommand};
use flagsim::analysis::{
    centerline_frame, curvature_profile, extract_fcurve, fit_hypotrochoid, heading_series,
    linear_speed, max_metrics,
};
use flagsim::config::{load_config, ExperimentPreset, Profile};
use flagsim::error::Error;
use flagsim::hydro::{flow_field_grid, PlaneKind, PlaneSpec, SumMode};
use flagsim::output::{
    checkpoint_name, list_checkpoints, read_run, run_to_dir, write_flow_field, CONFIG_FILE,
};
use flagsim::sim::{SimConfig, Simulation};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "flagsim",
    version,
    about = "Kirchhoff rod swimmer in Stokes flow with calcium-coupled preferred curvature",
    after_help = "Defaults (g-um-s units): L = 60 um, amplitudes A0,B0 in [0,3] um, \
wavelength 30 um, beat frequency 20 Hz (sigma = 40*pi rad/s), mu = 1e-6 g/(um*s), \
bending/twist moduli a1 = a2 = a3 = 1 g*um^3/s^2, shear/extension moduli \
b1 = b2 = b3 = 0.6 g*um/s^2, D_Ca = 20 um^2/s, baseline Ca = 0.1 uM, c1 = ln 9, \
c2p = 0.7 uM, c2n = 1 uM, ds = 0.2 um, dt = 1e-6 s, epsilon = 5*ds = 1 um."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a simulation from a preset or a config file.
    Simulate {
        /// Experiment preset, e.g. planar/no-ca or helical/ca-asym-a.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// TOML config file (sections [wave], [material], [fluid],
        /// [coupling], [flux], [numerics]).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Discretization profile: full (ds = 0.2 um, dt = 1e-6 s) or
        /// coarse (ds = 0.4 um, dt = 4e-6 s).
        #[arg(long, default_value = "full")]
        profile: String,
        /// Simulated duration in seconds.
        #[arg(long)]
        duration: Option<f64>,
        /// Scale factor on the bending/twist moduli a_i (e.g. 0.2 or 0.1).
        #[arg(long)]
        moduli_scale: Option<f64>,
        /// Kernel summation order: sequential, pairwise or compensated.
        #[arg(long)]
        sum_mode: Option<String>,
        /// Output directory (defaults under $FLAGSIM_OUTPUT_ROOT or ./runs).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Post-process a finished run directory.
    Analyze {
        dir: PathBuf,
        /// Analysis window as T0:T1 in seconds (default: last second,
        /// excluding the 0.1 s transient).
        #[arg(long)]
        window: Option<String>,
        /// Comma list of outputs: speed,fit,fcurve,curvature,metrics,heading
        /// (default all).
        #[arg(long, default_value = "all")]
        what: String,
        /// Material point for trajectory analyses: first or last.
        #[arg(long, default_value = "first")]
        point: String,
        /// Radial smoothing width in seconds for singular-point detection
        /// (flagellar period estimate).
        #[arg(long, default_value_t = 0.005)]
        smooth: f64,
        /// Heading stride in probe samples.
        #[arg(long, default_value_t = 250)]
        stride: usize,
    },
    /// Sample the fluid velocity and pressure on a centerline plane at a
    /// checkpointed time.
    Flowfield {
        dir: PathBuf,
        /// Requested time (s); must match a checkpoint unless --nearest.
        #[arg(long)]
        time: f64,
        /// horizontal (normal orthogonal to y) or vertical (normal
        /// orthogonal to z).
        #[arg(long, default_value = "horizontal")]
        plane: String,
        /// Grid resolution N1xN2 along/across the centerline.
        #[arg(long, default_value = "81x41")]
        res: String,
        /// Half-extents E1,E2 of the grid in um.
        #[arg(long, default_value = "40,20")]
        extent: String,
        /// Use the checkpoint closest to the requested time.
        #[arg(long)]
        nearest: bool,
        /// Output file (default <dir>/flowfield_t<time>_<plane>.txt).
        #[arg(long)]
        out_file: Option<PathBuf>,
    },
    /// List the experiment presets.
    Presets,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.cmd {
        Cmd::Simulate {
            preset,
            config,
            profile,
            duration,
            moduli_scale,
            sum_mode,
            out,
        } => cmd_simulate(preset, config, profile, duration, moduli_scale, sum_mode, out),
        Cmd::Analyze {
            dir,
            window,
            what,
            point,
            smooth,
            stride,
        } => cmd_analyze(&dir, window, &what, &point, smooth, stride),
        Cmd::Flowfield {
            dir,
            time,
            plane,
            res,
            extent,
            nearest,
            out_file,
        } => cmd_flowfield(&dir, time, &plane, &res, &extent, nearest, out_file),
        Cmd::Presets => {
            for name in ExperimentPreset::all_names() {
                let note = if name == "planar/ca-asym-a" {
                    "  (alias of planar/ca-asym-ab: B0 = 0 makes them equivalent)"
                } else {
                    ""
                };
                println!("{name}{note}");
            }
            Ok(())
        }
    }
}

fn output_dir(out: Option<PathBuf>, name: &str) -> Result<PathBuf, Error> {
    if let Some(dir) = out {
        return Ok(dir);
    }
    let root = std::env::var("FLAGSIM_OUTPUT_ROOT").unwrap_or_else(|_| "runs".into());
    let root = PathBuf::from(root);
    let base = root.join(name);
    if !base.exists() {
        return Ok(base);
    }
    for i in 1..10_000 {
        let candidate = root.join(format!("{name}-{i:03}"));
        if !candidate.exists() {
            return Ok(candidate);
        }
    }
    Err(Error::Config("cannot find a free output directory".into()))
}

fn cmd_simulate(
    preset: Option<String>,
    config: Option<PathBuf>,
    profile: String,
    duration: Option<f64>,
    moduli_scale: Option<f64>,
    sum_mode: Option<String>,
    out: Option<PathBuf>,
) -> Result<(), Error> {
    let profile = Profile::parse(&profile)?;
    let (mut cfg, name): (SimConfig, String) = if let Some(path) = config {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "config".into());
        (load_config(&path)?, stem)
    } else {
        let preset_name = preset.unwrap_or_else(|| "planar/no-ca".into());
        let preset = ExperimentPreset::parse(&preset_name)?;
        let name = format!(
            "{}_{}",
            preset_name.replace('/', "_"),
            match profile {
                Profile::Full => "full",
                Profile::Coarse => "coarse",
            }
        );
        (preset.config(profile), name)
    };
    if let Some(d) = duration {
        cfg.numerics.duration = d;
    }
    if let Some(scale) = moduli_scale {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::Config("moduli scale must be positive".into()));
        }
        cfg.material = cfg.material.scaled_bending(scale);
    }
    if let Some(mode) = sum_mode {
        cfg.numerics.sum_mode = match mode.as_str() {
            "sequential" => SumMode::Sequential,
            "pairwise" => SumMode::Pairwise,
            "compensated" => SumMode::Compensated,
            other => {
                return Err(Error::Config(format!(
                    "unknown sum mode '{other}' (sequential, pairwise, compensated)"
                )))
            }
        };
    }
    cfg.validate()?;

    let dir = output_dir(out, &name)?;
    let steps = (cfg.numerics.duration / cfg.numerics.dt).round() as u64;
    println!(
        "simulating {} steps (duration {} s, dt {} s, M = {}) -> {}",
        steps,
        cfg.numerics.duration,
        cfg.numerics.dt,
        cfg.intervals(),
        dir.display()
    );
    let started = std::time::Instant::now();
    let sim = run_to_dir(cfg, &dir)?;
    println!(
        "done: t = {:.6} s in {:.1} s wall; outputs in {}",
        sim.time(),
        started.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(())
}

fn parse_window(spec: Option<String>, t_end: f64) -> Result<(f64, f64), Error> {
    match spec {
        Some(s) => {
            let (a, b) = s
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("window '{s}' must be T0:T1")))?;
            let t0: f64 = a
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad window start '{a}'")))?;
            let t1: f64 = b
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad window end '{b}'")))?;
            if !t1.is_finite() || !t0.is_finite() || t1 <= t0 {
                return Err(Error::Config("window must have positive length".into()));
            }
            Ok((t0, t1))
        }
        None => {
            let t1 = t_end;
            let t0 = (t1 - 1.0).max(0.1_f64.min(t1 / 2.0));
            Ok((t0, t1))
        }
    }
}

fn cmd_analyze(
    dir: &Path,
    window: Option<String>,
    what: &str,
    point: &str,
    smooth: f64,
    stride: usize,
) -> Result<(), Error> {
    let data = read_run(dir)?;
    if data.probe_times.len() < 2 {
        return Err(Error::MissingData("run directory has no probe data".into()));
    }
    let t_end = *data.probe_times.last().unwrap();
    let window = parse_window(window, t_end)?;
    let wants = |key: &str| what == "all" || what.split(',').any(|w| w.trim() == key);
    let traj = match point {
        "first" => data.first_point_trajectory()?,
        "last" => data.last_point_trajectory()?,
        other => return Err(Error::Config(format!("unknown point '{other}'"))),
    };

    let analysis_dir = dir.join("analysis");
    std::fs::create_dir_all(&analysis_dir)?;
    let mut metrics = serde_json::Map::new();
    metrics.insert("window".into(), serde_json::json!([window.0, window.1]));

    if wants("speed") {
        let speed = linear_speed(&traj, window)?;
        println!("linear speed over [{:.3}, {:.3}] s: {:.3} um/s", window.0, window.1, speed);
        metrics.insert("linear_speed_um_per_s".into(), serde_json::json!(speed));
    }

    if wants("fit") || wants("fcurve") {
        let fc = extract_fcurve(&traj, window, true)?;
        let probe_dt = (data.probe_times[1] - data.probe_times[0]).max(1e-12);
        let smooth_samples = ((smooth / probe_dt).round() as usize).max(1);
        if wants("fcurve") {
            let mut w = std::io::BufWriter::new(std::fs::File::create(
                analysis_dir.join("fcurve.csv"),
            )?);
            writeln!(w, "t,y,z")?;
            for i in 0..fc.len() {
                writeln!(w, "{:.17e},{:.17e},{:.17e}", fc.times[i], fc.y[i], fc.z[i])?;
            }
        }
        if wants("fit") {
            match fit_hypotrochoid(&fc, smooth_samples) {
                Ok(fit) => {
                    println!(
                        "hypotrochoid fit: R~ = {:.3} um, d = {:.3} um, omega1 = {:.1} rad/s, omega2 = {:.1} rad/s, n = {:.2}{}",
                        fit.r_tilde,
                        fit.d,
                        fit.omega1,
                        fit.omega2,
                        fit.n,
                        if fit.circle_like { " (circle: n = 2 imposed)" } else { "" }
                    );
                    let json = serde_json::to_string_pretty(&fit)
                        .expect("fit serializes");
                    std::fs::write(analysis_dir.join("fit.json"), json)?;
                    metrics.insert("fit_n".into(), serde_json::json!(fit.n));
                }
                Err(e) => println!("hypotrochoid fit unavailable: {e}"),
            }
        }
    }

    if wants("curvature") {
        let profile = curvature_profile(&data.records, &data.cfg.wave, window)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(
            analysis_dir.join("curvature.csv"),
        )?);
        writeln!(w, "t,s,omega_star,omega3_star,omega_pref,omega3_pref")?;
        for (ti, t) in profile.times.iter().enumerate() {
            for (si, s) in profile.s_half.iter().enumerate() {
                writeln!(
                    w,
                    "{t:.17e},{s:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                    profile.actual_curvature[ti][si],
                    profile.actual_twist[ti][si],
                    profile.preferred_curvature[ti][si],
                    profile.preferred_twist[ti][si]
                )?;
            }
        }
        println!(
            "curvature: normalized max |actual - preferred| = {:.3e}",
            profile.normalized_max_diff
        );
        metrics.insert(
            "normalized_max_curvature_diff".into(),
            serde_json::json!(profile.normalized_max_diff),
        );
    }

    if wants("metrics") {
        let (max_curv, max_dist) = max_metrics(&data.records, window)?;
        println!("max curvature {:.4} 1/um, max centerline distance {:.3} um", max_curv, max_dist);
        metrics.insert("max_curvature_per_um".into(), serde_json::json!(max_curv));
        metrics.insert("max_distance_um".into(), serde_json::json!(max_dist));
    }

    if wants("heading") {
        let series = heading_series(&data.probe_times, &data.probe_com, stride);
        let mut w =
            std::io::BufWriter::new(std::fs::File::create(analysis_dir.join("heading.csv"))?);
        writeln!(w, "t,heading_rad")?;
        for (t, h) in &series {
            writeln!(w, "{t:.17e},{h:.17e}")?;
        }
        if let (Some(first), Some(last)) = (series.first(), series.last()) {
            let change = last.1 - first.1;
            println!("net heading change {:.3} rad over [{:.2}, {:.2}] s", change, first.0, last.0);
            metrics.insert("net_heading_change_rad".into(), serde_json::json!(change));
        }
    }

    std::fs::write(
        analysis_dir.join("metrics.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(metrics))
            .expect("metrics serialize"),
    )?;
    Ok(())
}

fn cmd_flowfield(
    dir: &Path,
    time: f64,
    plane: &str,
    res: &str,
    extent: &str,
    nearest: bool,
    out_file: Option<PathBuf>,
) -> Result<(), Error> {
    let cfg = load_config(&dir.join(CONFIG_FILE))?;
    let kind = match plane {
        "horizontal" => PlaneKind::Horizontal,
        "vertical" => PlaneKind::Vertical,
        other => return Err(Error::Config(format!("unknown plane '{other}'"))),
    };
    let (n1, n2) = res
        .split_once('x')
        .and_then(|(a, b)| Some((a.parse::<usize>().ok()?, b.parse::<usize>().ok()?)))
        .ok_or_else(|| Error::Config(format!("resolution '{res}' must be N1xN2")))?;
    let (e1, e2) = extent
        .split_once(',')
        .and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)))
        .ok_or_else(|| Error::Config(format!("extent '{extent}' must be E1,E2")))?;

    let checkpoints = list_checkpoints(dir)?;
    if checkpoints.is_empty() {
        return Err(Error::MissingData(format!(
            "no checkpoints in {}",
            dir.display()
        )));
    }
    let dt = cfg.numerics.dt;
    let (step, path) = checkpoints
        .iter()
        .min_by(|(a, _), (b, _)| {
            let da = (*a as f64 * dt - time).abs();
            let db = (*b as f64 * dt - time).abs();
            da.partial_cmp(&db).unwrap()
        })
        .unwrap();
    let t_found = *step as f64 * dt;
    if !nearest && (t_found - time).abs() > 0.5 * dt {
        return Err(Error::MissingData(format!(
            "no checkpoint at t = {time} s (closest is {t_found} s at {}; pass --nearest to use it)",
            path.display()
        )));
    }

    let mut sim = Simulation::restore_checkpoint(cfg.clone(), path)?;
    let rec = sim.record()?;
    let (_, p2, u) = centerline_frame(&rec.rod);
    let plane_spec = PlaneSpec::centerline_plane(kind, p2, u, e1, e2)?;
    let samples = flow_field_grid(&plane_spec, (n1, n2), &rec.loads, &rec.rod, &cfg.fluid);

    let out_path = out_file.unwrap_or_else(|| {
        dir.join(format!("flowfield_t{t_found:.6}_{plane}.txt"))
    });
    write_flow_field(&out_path, &samples)?;
    let p_min = samples.iter().map(|s| s.pressure).fold(f64::MAX, f64::min);
    let p_max = samples.iter().map(|s| s.pressure).fold(f64::MIN, f64::max);
    println!(
        "flow field at t = {t_found:.6} s ({}x{} nodes) -> {}; pressure range [{:.2}, {:.2}] g/(um s^2)",
        n1,
        n2,
        out_path.display(),
        p_min,
        p_max
    );
    let _ = checkpoint_name(*step);
    Ok(())
}
