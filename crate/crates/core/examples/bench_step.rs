//! Step-throughput probe: runs a short planar simulation at the full and
//! coarse resolutions and reports steps/s plus the first-point drift.

use flagsim::calcium::{CouplingMode, CouplingParams, FluxModel};
use flagsim::elasticity::MaterialParams;
use flagsim::hydro::{FluidParams, SumMode};
use flagsim::rod::WaveParams;
use flagsim::sim::{NumericsParams, SimConfig, Simulation};

fn config(ds: f64, dt: f64, eps: f64) -> SimConfig {
    SimConfig {
        wave: WaveParams {
            a0: 3.0,
            b0: 0.0,
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
        fluid: FluidParams { mu: 1e-6, epsilon: eps },
        coupling: CouplingParams {
            mode: CouplingMode::NoCa,
            c1: 9.0f64.ln(),
            c2p: 0.7,
            c2n: 1.0,
            ca_hat: 0.1,
        },
        flux: FluxModel::default(),
        d_ca: 20.0,
        numerics: NumericsParams {
            ds,
            dt,
            duration: 1.0,
            output_every: 1_000_000,
            probe_every: 1_000_000,
            checkpoint_every: 1_000_000,
            reorthonormalize_every: 100,
            sum_mode: SumMode::Sequential,
        },
    }
}

fn main() {
    let steps: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5000);
    for (name, ds, dt, eps) in [("full", 0.2, 1e-6, 1.0), ("coarse", 0.4, 4e-6, 2.0)] {
        let cfg = config(ds, dt, eps);
        let mut sim = Simulation::new(cfg).unwrap();
        let p0 = sim.rod().points[0];
        let start = std::time::Instant::now();
        for _ in 0..steps {
            sim.step().unwrap();
        }
        let elapsed = start.elapsed().as_secs_f64();
        let p1 = sim.rod().points[0];
        println!(
            "{name}: {steps} steps in {elapsed:.2} s ({:.0} steps/s, {:.3} ms/step); sim t={:.4} s; first point moved {:.4} um",
            steps as f64 / elapsed,
            1e3 * elapsed / steps as f64,
            sim.time(),
            (p1 - p0).norm()
        );
    }
}
