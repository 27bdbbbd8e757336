//! Configuration files, experiment presets, and the resolved-config
//! snapshot.
//!
//! Config files are TOML with sections [wave], [material], [fluid],
//! [coupling], [flux] and [numerics]; every field is optional and
//! defaults to the baseline parameter set (planar wave, no coupling,
//! full resolution). The resolved snapshot written next to run outputs
//! spells out every field, including the derived wavenumber and angular
//! frequency, so reloading it reproduces the run bitwise.

use crate::calcium::{CouplingMode, CouplingParams, FluxModel};
use crate::elasticity::MaterialParams;
use crate::error::Error;
use crate::hydro::{FluidParams, SumMode};
use crate::rod::WaveParams;
use crate::sim::{NumericsParams, SimConfig};
use std::path::Path;

/// Discretization profile: the full-resolution baseline or the coarse
/// desk profile for long-horizon runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    #[default]
    Full,
    Coarse,
}

impl Profile {
    pub fn parse(name: &str) -> Result<Self, Error> {
        match name {
            "full" => Ok(Profile::Full),
            "coarse" => Ok(Profile::Coarse),
            other => Err(Error::Config(format!(
                "unknown profile '{other}' (expected full or coarse)"
            ))),
        }
    }
}

/// Preferred-wave family of an experiment preset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavePreset {
    Planar,
    QuasiPlanar,
    Helical,
}

impl WavePreset {
    pub fn amplitudes(&self) -> (f64, f64) {
        match self {
            WavePreset::Planar => (3.0, 0.0),
            WavePreset::QuasiPlanar => (3.0, 1.0),
            WavePreset::Helical => (3.0, 3.0),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WavePreset::Planar => "planar",
            WavePreset::QuasiPlanar => "quasi-planar",
            WavePreset::Helical => "helical",
        }
    }
}

/// A named experiment preset `wave/coupling`, e.g. `helical/ca-asym-a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentPreset {
    pub wave: WavePreset,
    pub coupling: CouplingMode,
}

impl ExperimentPreset {
    /// Parse names like `planar/no-ca`. For the planar wave the two
    /// asymmetric couplings are equivalent (B0 = 0) and both names map
    /// to the combined asymmetric mode.
    pub fn parse(name: &str) -> Result<Self, Error> {
        let (wave_s, coupling_s) = name.split_once('/').ok_or_else(|| {
            Error::Config(format!(
                "preset '{name}' must look like wave/coupling, e.g. planar/no-ca"
            ))
        })?;
        let wave = match wave_s {
            "planar" => WavePreset::Planar,
            "quasi-planar" => WavePreset::QuasiPlanar,
            "helical" => WavePreset::Helical,
            other => {
                return Err(Error::Config(format!(
                    "unknown wave '{other}' (planar, quasi-planar, helical)"
                )))
            }
        };
        let coupling = match coupling_s {
            "no-ca" => CouplingMode::NoCa,
            "ca-sym" => CouplingMode::CaSym,
            "ca-asym-ab" => CouplingMode::CaAsymAb,
            "ca-asym-a" => CouplingMode::CaAsymA,
            other => {
                return Err(Error::Config(format!(
                    "unknown coupling '{other}' (no-ca, ca-sym, ca-asym-ab, ca-asym-a)"
                )))
            }
        };
        // with B0 = 0 the A-only and A&B asymmetric couplings coincide
        let coupling = if wave == WavePreset::Planar && coupling == CouplingMode::CaAsymA {
            CouplingMode::CaAsymAb
        } else {
            coupling
        };
        Ok(ExperimentPreset { wave, coupling })
    }

    pub fn all_names() -> Vec<String> {
        let waves = ["planar", "quasi-planar", "helical"];
        let couplings = ["no-ca", "ca-sym", "ca-asym-ab", "ca-asym-a"];
        waves
            .iter()
            .flat_map(|w| couplings.iter().map(move |c| format!("{w}/{c}")))
            .collect()
    }

    pub fn config(&self, profile: Profile) -> SimConfig {
        let (a0, b0) = self.wave.amplitudes();
        let mut cfg = default_config(profile);
        cfg.wave.a0 = a0;
        cfg.wave.b0 = b0;
        cfg.coupling.mode = self.coupling;
        cfg
    }
}

/// Table-default configuration for the given profile: planar amplitudes,
/// no coupling.
pub fn default_config(profile: Profile) -> SimConfig {
    let (ds, dt, epsilon, output_every, probe_every, checkpoint_every) = match profile {
        Profile::Full => (0.2, 1e-6, 1.0, 50_000, 1_000, 500_000),
        Profile::Coarse => (0.4, 4e-6, 2.0, 12_500, 250, 125_000),
    };
    SimConfig {
        wave: WaveParams {
            a0: 3.0,
            b0: 0.0,
            k: 2.0 * std::f64::consts::PI / 30.0,
            sigma: 2.0 * std::f64::consts::PI * 20.0,
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
        fluid: FluidParams { mu: 1e-6, epsilon },
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
            duration: 15.0,
            output_every,
            probe_every,
            checkpoint_every,
            reorthonormalize_every: 100,
            sum_mode: SumMode::Sequential,
        },
    }
}

#[derive(Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct WaveSection {
    a0: Option<f64>,
    b0: Option<f64>,
    /// Wavelength 2π/k (μm); ignored when `k` is given.
    wavelength: Option<f64>,
    /// Beat frequency σ/2π (Hz); ignored when `sigma` is given.
    beat_frequency_hz: Option<f64>,
    /// Wavenumber (rad/μm), takes precedence over `wavelength`.
    k: Option<f64>,
    /// Angular frequency (rad/s), takes precedence over `beat_frequency_hz`.
    sigma: Option<f64>,
    length: Option<f64>,
}

#[derive(Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct MaterialSection {
    a1: Option<f64>,
    a2: Option<f64>,
    a3: Option<f64>,
    b1: Option<f64>,
    b2: Option<f64>,
    b3: Option<f64>,
    /// Scale factor applied to the bending/twist moduli a_i.
    moduli_scale: Option<f64>,
}

#[derive(Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FluidSection {
    mu: Option<f64>,
    epsilon: Option<f64>,
}

#[derive(Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingSection {
    mode: Option<CouplingMode>,
    c1: Option<f64>,
    c2p: Option<f64>,
    c2n: Option<f64>,
    ca_hat: Option<f64>,
}

#[derive(Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FluxSection {
    d_ca: Option<f64>,
    catsper_rate: Option<f64>,
    catsper_ramp_depth: Option<f64>,
    catsper_tau: Option<f64>,
    pump_v_max: Option<f64>,
    pump_k_m: Option<f64>,
    ca_rest: Option<f64>,
    store_v_max: Option<f64>,
    store_k_ca: Option<f64>,
    store_t_on: Option<f64>,
    store_tau_rise: Option<f64>,
    store_tau_deplete: Option<f64>,
}

#[derive(Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsSection {
    profile: Option<Profile>,
    ds: Option<f64>,
    dt: Option<f64>,
    duration: Option<f64>,
    output_every: Option<u64>,
    probe_every: Option<u64>,
    checkpoint_every: Option<u64>,
    reorthonormalize_every: Option<u64>,
    sum_mode: Option<SumMode>,
}

#[derive(Debug, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    wave: Option<WaveSection>,
    material: Option<MaterialSection>,
    fluid: Option<FluidSection>,
    coupling: Option<CouplingSection>,
    flux: Option<FluxSection>,
    numerics: Option<NumericsSection>,
}

fn apply(base: &mut SimConfig, file: FileConfig) {
    if let Some(w) = file.wave {
        if let Some(v) = w.a0 {
            base.wave.a0 = v;
        }
        if let Some(v) = w.b0 {
            base.wave.b0 = v;
        }
        if let Some(v) = w.length {
            base.wave.length = v;
        }
        if let Some(v) = w.k {
            base.wave.k = v;
        } else if let Some(v) = w.wavelength {
            base.wave.k = 2.0 * std::f64::consts::PI / v;
        }
        if let Some(v) = w.sigma {
            base.wave.sigma = v;
        } else if let Some(v) = w.beat_frequency_hz {
            base.wave.sigma = 2.0 * std::f64::consts::PI * v;
        }
    }
    if let Some(m) = file.material {
        if let Some(v) = m.a1 {
            base.material.a1 = v;
        }
        if let Some(v) = m.a2 {
            base.material.a2 = v;
        }
        if let Some(v) = m.a3 {
            base.material.a3 = v;
        }
        if let Some(v) = m.b1 {
            base.material.b1 = v;
        }
        if let Some(v) = m.b2 {
            base.material.b2 = v;
        }
        if let Some(v) = m.b3 {
            base.material.b3 = v;
        }
        if let Some(v) = m.moduli_scale {
            base.material = base.material.scaled_bending(v);
        }
    }
    if let Some(f) = file.fluid {
        if let Some(v) = f.mu {
            base.fluid.mu = v;
        }
        if let Some(v) = f.epsilon {
            base.fluid.epsilon = v;
        }
    }
    if let Some(c) = file.coupling {
        if let Some(v) = c.mode {
            base.coupling.mode = v;
        }
        if let Some(v) = c.c1 {
            base.coupling.c1 = v;
        }
        if let Some(v) = c.c2p {
            base.coupling.c2p = v;
        }
        if let Some(v) = c.c2n {
            base.coupling.c2n = v;
        }
        if let Some(v) = c.ca_hat {
            base.coupling.ca_hat = v;
        }
    }
    if let Some(f) = file.flux {
        if let Some(v) = f.d_ca {
            base.d_ca = v;
        }
        if let Some(v) = f.catsper_rate {
            base.flux.catsper_rate = v;
        }
        if let Some(v) = f.catsper_ramp_depth {
            base.flux.catsper_ramp_depth = v;
        }
        if let Some(v) = f.catsper_tau {
            base.flux.catsper_tau = v;
        }
        if let Some(v) = f.pump_v_max {
            base.flux.pump_v_max = v;
        }
        if let Some(v) = f.pump_k_m {
            base.flux.pump_k_m = v;
        }
        if let Some(v) = f.ca_rest {
            base.flux.ca_rest = v;
        }
        if let Some(v) = f.store_v_max {
            base.flux.store_v_max = v;
        }
        if let Some(v) = f.store_k_ca {
            base.flux.store_k_ca = v;
        }
        if let Some(v) = f.store_t_on {
            base.flux.store_t_on = v;
        }
        if let Some(v) = f.store_tau_rise {
            base.flux.store_tau_rise = v;
        }
        if let Some(v) = f.store_tau_deplete {
            base.flux.store_tau_deplete = v;
        }
    }
    if let Some(n) = file.numerics {
        if let Some(v) = n.ds {
            base.numerics.ds = v;
        }
        if let Some(v) = n.dt {
            base.numerics.dt = v;
        }
        if let Some(v) = n.duration {
            base.numerics.duration = v;
        }
        if let Some(v) = n.output_every {
            base.numerics.output_every = v;
        }
        if let Some(v) = n.probe_every {
            base.numerics.probe_every = v;
        }
        if let Some(v) = n.checkpoint_every {
            base.numerics.checkpoint_every = v;
        }
        if let Some(v) = n.reorthonormalize_every {
            base.numerics.reorthonormalize_every = v;
        }
        if let Some(v) = n.sum_mode {
            base.numerics.sum_mode = v;
        }
    }
}

/// Parse a TOML config string into a full configuration; fields not
/// present fall back to the profile defaults ([numerics].profile, or
/// full resolution).
pub fn config_from_toml(text: &str) -> Result<SimConfig, Error> {
    let file: FileConfig =
        toml::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))?;
    let profile = file
        .numerics
        .as_ref()
        .and_then(|n| n.profile)
        .unwrap_or_default();
    let mut cfg = default_config(profile);
    apply(&mut cfg, file);
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    config_from_toml(&text)
}

/// Render every resolved field as a config file; reloading it rebuilds
/// the configuration bitwise (k and sigma are written directly).
pub fn resolved_toml(cfg: &SimConfig) -> String {
    let file = FileConfig {
        wave: Some(WaveSection {
            a0: Some(cfg.wave.a0),
            b0: Some(cfg.wave.b0),
            wavelength: Some(2.0 * std::f64::consts::PI / cfg.wave.k),
            beat_frequency_hz: Some(cfg.wave.sigma / (2.0 * std::f64::consts::PI)),
            k: Some(cfg.wave.k),
            sigma: Some(cfg.wave.sigma),
            length: Some(cfg.wave.length),
        }),
        material: Some(MaterialSection {
            a1: Some(cfg.material.a1),
            a2: Some(cfg.material.a2),
            a3: Some(cfg.material.a3),
            b1: Some(cfg.material.b1),
            b2: Some(cfg.material.b2),
            b3: Some(cfg.material.b3),
            moduli_scale: None,
        }),
        fluid: Some(FluidSection {
            mu: Some(cfg.fluid.mu),
            epsilon: Some(cfg.fluid.epsilon),
        }),
        coupling: Some(CouplingSection {
            mode: Some(cfg.coupling.mode),
            c1: Some(cfg.coupling.c1),
            c2p: Some(cfg.coupling.c2p),
            c2n: Some(cfg.coupling.c2n),
            ca_hat: Some(cfg.coupling.ca_hat),
        }),
        flux: Some(FluxSection {
            d_ca: Some(cfg.d_ca),
            catsper_rate: Some(cfg.flux.catsper_rate),
            catsper_ramp_depth: Some(cfg.flux.catsper_ramp_depth),
            catsper_tau: Some(cfg.flux.catsper_tau),
            pump_v_max: Some(cfg.flux.pump_v_max),
            pump_k_m: Some(cfg.flux.pump_k_m),
            ca_rest: Some(cfg.flux.ca_rest),
            store_v_max: Some(cfg.flux.store_v_max),
            store_k_ca: Some(cfg.flux.store_k_ca),
            store_t_on: Some(cfg.flux.store_t_on),
            store_tau_rise: Some(cfg.flux.store_tau_rise),
            store_tau_deplete: Some(cfg.flux.store_tau_deplete),
        }),
        numerics: Some(NumericsSection {
            profile: None,
            ds: Some(cfg.numerics.ds),
            dt: Some(cfg.numerics.dt),
            duration: Some(cfg.numerics.duration),
            output_every: Some(cfg.numerics.output_every),
            probe_every: Some(cfg.numerics.probe_every),
            checkpoint_every: Some(cfg.numerics.checkpoint_every),
            reorthonormalize_every: Some(cfg.numerics.reorthonormalize_every),
            sum_mode: Some(cfg.numerics.sum_mode),
        }),
    };
    toml::to_string_pretty(&file).expect("resolved config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_cover_all_combinations() {
        let names = ExperimentPreset::all_names();
        assert_eq!(names.len(), 12);
        for name in names {
            let preset = ExperimentPreset::parse(&name).unwrap();
            let cfg = preset.config(Profile::Coarse);
            cfg.validate().unwrap();
        }
    }

    #[test]
    fn planar_asym_a_aliases_to_combined() {
        let a = ExperimentPreset::parse("planar/ca-asym-a").unwrap();
        let ab = ExperimentPreset::parse("planar/ca-asym-ab").unwrap();
        assert_eq!(a, ab);
        assert_eq!(a.coupling, CouplingMode::CaAsymAb);
        // non-planar waves keep the distinction
        let hel = ExperimentPreset::parse("helical/ca-asym-a").unwrap();
        assert_eq!(hel.coupling, CouplingMode::CaAsymA);
    }

    #[test]
    fn default_config_matches_table_values() {
        let cfg = default_config(Profile::Full);
        assert_eq!(cfg.wave.length, 60.0);
        assert_eq!(cfg.wave.a0, 3.0);
        assert!((cfg.wave.k - 2.0 * std::f64::consts::PI / 30.0).abs() < 1e-15);
        assert!((cfg.wave.sigma - 40.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(cfg.material.a1, 1.0);
        assert_eq!(cfg.material.b3, 0.6);
        assert_eq!(cfg.fluid.mu, 1e-6);
        assert_eq!(cfg.fluid.epsilon, 1.0);
        assert_eq!(cfg.coupling.c2p, 0.7);
        assert_eq!(cfg.coupling.c2n, 1.0);
        assert_eq!(cfg.coupling.ca_hat, 0.1);
        assert!((cfg.coupling.c1 - 9.0f64.ln()).abs() < 1e-15);
        assert_eq!(cfg.d_ca, 20.0);
        assert_eq!(cfg.numerics.ds, 0.2);
        assert_eq!(cfg.numerics.dt, 1e-6);
        assert_eq!(cfg.intervals(), 300);
        // ε = 5Δs on both profiles
        let coarse = default_config(Profile::Coarse);
        assert_eq!(coarse.fluid.epsilon, 5.0 * coarse.numerics.ds);
        assert_eq!(coarse.intervals(), 150);
        assert_eq!(coarse.numerics.dt, 4e-6);
    }

    #[test]
    fn toml_roundtrip_is_bitwise() {
        let preset = ExperimentPreset::parse("helical/ca-asym-a").unwrap();
        let mut cfg = preset.config(Profile::Coarse);
        cfg.numerics.duration = 2.5;
        let text = resolved_toml(&cfg);
        let reloaded = config_from_toml(&text).unwrap();
        assert_eq!(cfg, reloaded);
    }

    #[test]
    fn partial_config_overrides_defaults() {
        let text = r#"
            [wave]
            a0 = 2.0
            b0 = 2.0

            [numerics]
            profile = "coarse"
            duration = 0.5

            [coupling]
            mode = "ca-sym"
        "#;
        let cfg = config_from_toml(text).unwrap();
        assert_eq!(cfg.wave.a0, 2.0);
        assert_eq!(cfg.numerics.ds, 0.4);
        assert_eq!(cfg.numerics.duration, 0.5);
        assert_eq!(cfg.coupling.mode, CouplingMode::CaSym);
        assert_eq!(cfg.material.a1, 1.0);
    }

    #[test]
    fn moduli_scale_applies_to_bending_only() {
        let text = r#"
            [material]
            moduli_scale = 0.2
        "#;
        let cfg = config_from_toml(text).unwrap();
        assert!((cfg.material.a1 - 0.2).abs() < 1e-15);
        assert!((cfg.material.a3 - 0.2).abs() < 1e-15);
        assert_eq!(cfg.material.b1, 0.6);
    }

    #[test]
    fn invalid_values_are_rejected() {
        for bad in [
            "[numerics]\ndt = 0.0",
            "[numerics]\nds = 0.7",
            "[fluid]\nmu = -1.0",
            "[coupling]\nc2p = 0.05",
            "[wave]\nb0 = 9.0",
        ] {
            assert!(
                matches!(
                    config_from_toml(bad),
                    Err(Error::Config(_)) | Err(Error::InvalidParameters(_))
                ),
                "accepted: {bad}"
            );
        }
        assert!(matches!(
            config_from_toml("[wave]\nbogus = 3"),
            Err(Error::Config(_))
        ));
    }
}
