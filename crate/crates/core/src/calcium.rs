//! One-dimensional calcium reaction–diffusion on the moving rod,
//! region-dependent flux, and the calcium-to-amplitude coupling.
//!
//! The PDE is advanced in conservative form: the unknown is Ca but the
//! conserved quantity is Ca·|∂X/∂s|, so total calcium is preserved under
//! rod deformation when the flux vanishes. A symmetric Crank–Nicolson
//! discretization with zero-flux ends gives a tridiagonal system solved
//! directly per step; the reaction flux is evaluated explicitly at the
//! half step.

use crate::error::Error;
use crate::rod::RodState;

/// Flagellar region along the rod. Boundaries as fractions of L:
/// proximal [0, 0.5)%, neck [0.5, 2.5)%, mid-piece [2.5, 20.5)%,
/// principal piece [20.5, 93)%, end piece [93, 100]%.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Proximal,
    Neck,
    MidPiece,
    Principal,
    EndPiece,
}

impl Region {
    pub fn label(&self) -> &'static str {
        match self {
            Region::Proximal => "proximal",
            Region::Neck => "neck",
            Region::MidPiece => "midpiece",
            Region::Principal => "principal",
            Region::EndPiece => "end",
        }
    }
}

/// Region of material coordinate `s` on a rod of length `length`.
pub fn region_of(s: f64, length: f64) -> Region {
    let frac = s / length;
    if frac < 0.005 {
        Region::Proximal
    } else if frac < 0.025 {
        Region::Neck
    } else if frac < 0.205 {
        Region::MidPiece
    } else if frac < 0.93 {
        Region::Principal
    } else {
        Region::EndPiece
    }
}

/// Calcium concentration on the rod grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CalciumField {
    /// Per-point concentration (μM).
    pub ca: Vec<f64>,
    /// Per-point region label.
    pub regions: Vec<Region>,
    /// Diffusion coefficient (μm²/s).
    pub d_ca: f64,
    /// Baseline concentration (μM).
    pub ca_hat: f64,
}

impl CalciumField {
    /// Uniform field at the baseline concentration.
    pub fn baseline(n_points: usize, length: f64, d_ca: f64, ca_hat: f64) -> Self {
        let ds = length / (n_points - 1) as f64;
        let regions = (0..n_points)
            .map(|k| region_of(k as f64 * ds, length))
            .collect();
        CalciumField {
            ca: vec![ca_hat; n_points],
            regions,
            d_ca,
            ca_hat,
        }
    }

    /// Total calcium mass Σ Ca_k J_k Δs with whole-point Jacobians
    /// averaged from the half-segments (the conserved discrete quantity).
    pub fn total_mass(&self, rod: &RodState) -> f64 {
        let jw = whole_point_jacobians(&rod.segment_jacobians());
        self.ca.iter().zip(&jw).map(|(c, j)| c * j * rod.ds).sum()
    }
}

/// Whole-point Jacobians from half-segment values (one-sided at ends).
fn whole_point_jacobians(half: &[f64]) -> Vec<f64> {
    let m = half.len();
    let mut out = Vec::with_capacity(m + 1);
    out.push(half[0]);
    for k in 1..m {
        out.push(0.5 * (half[k - 1] + half[k]));
    }
    out.push(half[m - 1]);
    out
}

/// Calcium–curvature coupling case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingMode {
    /// Amplitudes fixed to baseline.
    NoCa,
    /// A and B vary symmetrically (c2p = c2n = 1 μM).
    CaSym,
    /// A and B vary asymmetrically with the sign of Ω2.
    CaAsymAb,
    /// Only A varies; B stays at its baseline.
    CaAsymA,
}

impl CouplingMode {
    pub fn is_asymmetric(&self) -> bool {
        matches!(self, CouplingMode::CaAsymAb | CouplingMode::CaAsymA)
    }

    pub fn couples_calcium(&self) -> bool {
        !matches!(self, CouplingMode::NoCa)
    }
}

/// Parameters of the sigmoidal amplitude response.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CouplingParams {
    pub mode: CouplingMode,
    /// Sigmoid steepness (dimensionless); ln 9 puts f(c2) at 90% of its
    /// upper bound.
    pub c1: f64,
    /// Half-response concentration for positive normal curvature (μM).
    pub c2p: f64,
    /// Half-response concentration for non-positive normal curvature (μM).
    pub c2n: f64,
    /// Baseline concentration (μM).
    pub ca_hat: f64,
}

impl CouplingParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.c1 > 0.0) {
            return Err(Error::InvalidParameters("c1 must be positive".into()));
        }
        if self.c2p <= self.ca_hat || self.c2n <= self.ca_hat {
            return Err(Error::InvalidParameters(
                "c2p and c2n must exceed the baseline concentration".into(),
            ));
        }
        Ok(())
    }
}

/// Amplitude factor f(Ca) = 2 / (1 + exp(−c1 (Ca − ĉ)/(c2 − ĉ))),
/// equal to 1 at the baseline and approaching 2 as Ca grows.
pub fn coupling_f(ca: f64, params: &CouplingParams, c2: f64) -> f64 {
    let arg = -params.c1 * (ca - params.ca_hat) / (c2 - params.ca_hat);
    2.0 / (1.0 + arg.exp())
}

/// Select c2 from the sign of the preferred normal curvature Ω2; the
/// symmetric mode uses c2p = c2n = 1 μM.
pub fn c2_select(omega2: f64, params: &CouplingParams) -> f64 {
    match params.mode {
        CouplingMode::CaSym => 1.0,
        _ => {
            if omega2 > 0.0 {
                params.c2p
            } else {
                params.c2n
            }
        }
    }
}

/// Per-point amplitudes from the calcium field. `omega2` is the
/// preferred normal curvature of the current step (one-step lag breaks
/// the A ↔ Ω2 circular dependency).
pub fn update_amplitudes(
    ca: &CalciumField,
    a0: f64,
    b0: f64,
    params: &CouplingParams,
    omega2: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let n = ca.ca.len();
    match params.mode {
        CouplingMode::NoCa => (vec![a0; n], vec![b0; n]),
        mode => {
            let mut a = Vec::with_capacity(n);
            let mut b = Vec::with_capacity(n);
            for (ca_k, omega2_k) in ca.ca.iter().zip(omega2) {
                let c2 = c2_select(*omega2_k, params);
                let f = coupling_f(*ca_k, params, c2);
                a.push(a0 * f);
                b.push(if mode == CouplingMode::CaAsymA {
                    b0
                } else {
                    b0 * f
                });
            }
            (a, b)
        }
    }
}

/// Phenomenological region flux (μM/s): CatSper influx ramping on over
/// seconds minus saturable clearance in the principal piece, slow-gated
/// store release in the neck, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FluxModel {
    /// CatSper influx rate at full activation (μM/s).
    pub catsper_rate: f64,
    /// Fraction of the influx initially suppressed (ramp depth, 0..1).
    pub catsper_ramp_depth: f64,
    /// Influx activation time constant (s).
    pub catsper_tau: f64,
    /// Maximum clearance rate of the ATP-ase pumps (μM/s).
    pub pump_v_max: f64,
    /// Clearance half-saturation above rest (μM).
    pub pump_k_m: f64,
    /// Resting concentration below which the pumps are inactive (μM).
    pub ca_rest: f64,
    /// Peak store release rate in the neck (μM/s).
    pub store_v_max: f64,
    /// Calcium-induced-release half activation (μM).
    pub store_k_ca: f64,
    /// Release onset time (s).
    pub store_t_on: f64,
    /// First-order rise time of the release gate (s), the stand-in for
    /// the slow second-messenger dynamics.
    pub store_tau_rise: f64,
    /// Store depletion time constant (s).
    pub store_tau_deplete: f64,
}

impl Default for FluxModel {
    fn default() -> Self {
        FluxModel {
            catsper_rate: 0.55,
            catsper_ramp_depth: 0.8,
            catsper_tau: 1.0,
            pump_v_max: 1.0,
            pump_k_m: 0.8,
            ca_rest: 0.1,
            store_v_max: 1.6,
            store_k_ca: 0.4,
            store_t_on: 1.5,
            store_tau_rise: 1.5,
            store_tau_deplete: 12.0,
        }
    }
}

impl FluxModel {
    /// Model with all rates zero (J ≡ 0).
    pub fn zero() -> Self {
        FluxModel {
            catsper_rate: 0.0,
            pump_v_max: 0.0,
            store_v_max: 0.0,
            ..Default::default()
        }
    }

    /// Flux J(t, s, Ca) in μM/s.
    pub fn eval(&self, t: f64, s: f64, length: f64, ca: f64) -> f64 {
        match region_of(s, length) {
            Region::Principal => {
                let ramp = 1.0 - self.catsper_ramp_depth * (-t / self.catsper_tau).exp();
                let excess = (ca - self.ca_rest).max(0.0);
                self.catsper_rate * ramp - self.pump_v_max * excess / (self.pump_k_m + excess)
            }
            Region::Neck => {
                let dt = (t - self.store_t_on).max(0.0);
                let gate = 1.0 - (-dt / self.store_tau_rise).exp();
                let depletion = (-dt / self.store_tau_deplete).exp();
                let cicr = ca * ca / (self.store_k_ca * self.store_k_ca + ca * ca);
                self.store_v_max * gate * depletion * cicr
            }
            _ => 0.0,
        }
    }

    /// Concentration where the fully activated principal-piece flux
    /// vanishes (influx balances clearance).
    pub fn principal_steady_state(&self) -> f64 {
        if self.pump_v_max <= self.catsper_rate {
            return f64::INFINITY;
        }
        self.ca_rest
            + self.pump_k_m * self.catsper_rate / (self.pump_v_max - self.catsper_rate)
    }
}

/// Thomas algorithm for a tridiagonal system; diagonal dominance of the
/// Crank–Nicolson matrix makes it stable without pivoting.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Advance the calcium field one step of size `dt` starting at time `t`.
///
/// `rod_prev` and `rod_next` supply the Jacobians at the old and new
/// time level; zero-flux boundaries at both ends. Fails with
/// [`Error::StepSizeFailure`] if a concentration goes negative.
pub fn step_calcium(
    ca: &CalciumField,
    rod_prev: &RodState,
    rod_next: &RodState,
    flux: &FluxModel,
    t: f64,
    dt: f64,
) -> Result<CalciumField, Error> {
    let n = ca.ca.len();
    if rod_prev.points.len() != n || rod_next.points.len() != n {
        return Err(Error::ContractViolation(format!(
            "calcium grid has {} points, rods have {}/{}",
            n,
            rod_prev.points.len(),
            rod_next.points.len()
        )));
    }
    let ds = rod_next.ds;
    let length = ds * (n - 1) as f64;
    let j_old_half = rod_prev.segment_jacobians();
    let j_new_half = rod_next.segment_jacobians();
    let j_old = whole_point_jacobians(&j_old_half);
    let j_new = whole_point_jacobians(&j_new_half);

    let alpha = ca.d_ca * dt / (2.0 * ds * ds);

    let mut lower = vec![0.0; n - 1];
    let mut upper = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut rhs = vec![0.0; n];

    for k in 0..n {
        let mut d = j_new[k];
        let mut explicit = ca.ca[k] * j_old[k];
        if k < n - 1 {
            let w_new = alpha / j_new_half[k];
            let w_old = alpha / j_old_half[k];
            d += w_new;
            upper[k] = -w_new;
            explicit += w_old * (ca.ca[k + 1] - ca.ca[k]);
        }
        if k > 0 {
            let w_new = alpha / j_new_half[k - 1];
            let w_old = alpha / j_old_half[k - 1];
            d += w_new;
            lower[k - 1] = -w_new;
            explicit -= w_old * (ca.ca[k] - ca.ca[k - 1]);
        }
        let j_mid = 0.5 * (j_old[k] + j_new[k]);
        let s = k as f64 * ds;
        explicit += dt * flux.eval(t + 0.5 * dt, s, length, ca.ca[k]) * j_mid;
        diag[k] = d;
        rhs[k] = explicit;
    }

    let new_ca = solve_tridiagonal(&lower, &diag, &upper, &rhs);
    let min = new_ca.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < 0.0 {
        return Err(Error::StepSizeFailure(min));
    }
    Ok(CalciumField {
        ca: new_ca,
        regions: ca.regions.clone(),
        d_ca: ca.d_ca,
        ca_hat: ca.ca_hat,
    })
}

/// [`step_calcium`] with reject-and-halve on step-size failure, up to
/// `max_halvings` recursive subdivisions.
pub fn step_calcium_adaptive(
    ca: &CalciumField,
    rod_prev: &RodState,
    rod_next: &RodState,
    flux: &FluxModel,
    t: f64,
    dt: f64,
    max_halvings: u32,
) -> Result<CalciumField, Error> {
    match step_calcium(ca, rod_prev, rod_next, flux, t, dt) {
        Ok(next) => Ok(next),
        Err(Error::StepSizeFailure(_)) if max_halvings > 0 => {
            // substeps reuse the endpoint rods; the Jacobian change within
            // one hydrodynamic step is O(dt) and not re-interpolated
            let half = 0.5 * dt;
            let mid =
                step_calcium_adaptive(ca, rod_prev, rod_next, flux, t, half, max_halvings - 1)?;
            step_calcium_adaptive(&mid, rod_next, rod_next, flux, t + half, half, max_halvings - 1)
        }
        Err(e) => Err(e),
    }
}

/// Calcium development on a fixed straight rod: probe traces for the
/// neck (1% L), mid-piece (16% L) and principal piece (24% L).
pub struct FixedRodTraces {
    pub times: Vec<f64>,
    pub neck: Vec<f64>,
    pub mid_piece: Vec<f64>,
    pub principal: Vec<f64>,
    pub field: CalciumField,
}

pub fn develop_on_fixed_rod(
    flux: &FluxModel,
    d_ca: f64,
    ca_hat: f64,
    length: f64,
    m: usize,
    duration: f64,
    dt: f64,
) -> Result<FixedRodTraces, Error> {
    let wave = crate::rod::WaveParams {
        a0: 0.0,
        b0: 0.0,
        k: 1.0,
        sigma: 0.0,
        length,
    };
    let rod = crate::rod::init_rod(&wave, m)?;
    let mut field = CalciumField::baseline(m + 1, length, d_ca, ca_hat);
    let idx = |frac: f64| ((frac * m as f64).round() as usize).min(m);
    let (i_n, i_mp, i_pp) = (idx(0.01), idx(0.16), idx(0.24));

    let steps = (duration / dt).round() as usize;
    let mut out = FixedRodTraces {
        times: Vec::with_capacity(steps + 1),
        neck: Vec::with_capacity(steps + 1),
        mid_piece: Vec::with_capacity(steps + 1),
        principal: Vec::with_capacity(steps + 1),
        field: field.clone(),
    };
    let record = |t: f64, f: &CalciumField, out: &mut FixedRodTraces| {
        out.times.push(t);
        out.neck.push(f.ca[i_n]);
        out.mid_piece.push(f.ca[i_mp]);
        out.principal.push(f.ca[i_pp]);
    };
    record(0.0, &field, &mut out);
    for step in 0..steps {
        let t = step as f64 * dt;
        field = step_calcium_adaptive(&field, &rod, &rod, flux, t, dt, 8)?;
        record(t + dt, &field, &mut out);
    }
    out.field = field;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::{init_rod, Triad, WaveParams};
    use crate::Vec3;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(mode: CouplingMode) -> CouplingParams {
        CouplingParams {
            mode,
            c1: 9.0f64.ln(),
            c2p: 0.7,
            c2n: 1.0,
            ca_hat: 0.1,
        }
    }

    #[test]
    fn coupling_is_one_at_baseline() {
        let p = params(CouplingMode::CaSym);
        assert_eq!(coupling_f(0.1, &p, 1.0), 1.0);
    }

    #[test]
    fn coupling_reaches_ninety_percent_at_c2() {
        // c1 = ln 9 puts f(c2) = 2/(1 + 1/9) = 1.8
        let p = params(CouplingMode::CaAsymAb);
        assert_relative_eq!(coupling_f(0.7, &p, 0.7), 1.8, epsilon = 1e-12);
        assert_relative_eq!(coupling_f(1.0, &p, 1.0), 1.8, epsilon = 1e-12);
    }

    #[test]
    fn coupling_saturates_at_two() {
        let p = params(CouplingMode::CaSym);
        assert!((coupling_f(1e6, &p, 1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn c2_selection() {
        let asym = params(CouplingMode::CaAsymA);
        assert_eq!(c2_select(0.05, &asym), 0.7);
        assert_eq!(c2_select(0.0, &asym), 1.0);
        assert_eq!(c2_select(-0.02, &asym), 1.0);
        let sym = params(CouplingMode::CaSym);
        assert_eq!(c2_select(0.05, &sym), 1.0);
        assert_eq!(c2_select(-0.05, &sym), 1.0);
    }

    #[test]
    fn amplitudes_follow_mode() {
        let field = CalciumField::baseline(11, 60.0, 20.0, 0.1);
        let omega2 = vec![0.01; 11];

        let (a, b) = update_amplitudes(&field, 3.0, 1.0, &params(CouplingMode::NoCa), &omega2);
        assert!(a.iter().all(|v| *v == 3.0) && b.iter().all(|v| *v == 1.0));

        // at baseline f = 1 in every coupled mode
        let (a, b) = update_amplitudes(&field, 3.0, 1.0, &params(CouplingMode::CaAsymAb), &omega2);
        for k in 0..11 {
            assert_relative_eq!(a[k], 3.0, epsilon = 1e-14);
            assert_relative_eq!(b[k], 1.0, epsilon = 1e-14);
        }

        // saturated calcium doubles coupled amplitudes
        let mut hot = field.clone();
        hot.ca.iter_mut().for_each(|c| *c = 1e5);
        let (a, b) = update_amplitudes(&hot, 3.0, 1.0, &params(CouplingMode::CaAsymAb), &omega2);
        for k in 0..11 {
            assert_relative_eq!(a[k], 6.0, epsilon = 1e-9);
            assert_relative_eq!(b[k], 2.0, epsilon = 1e-9);
        }
        let (a, b) = update_amplitudes(&hot, 3.0, 1.0, &params(CouplingMode::CaAsymA), &omega2);
        for k in 0..11 {
            assert_relative_eq!(a[k], 6.0, epsilon = 1e-9);
            assert_eq!(b[k], 1.0);
        }
    }

    #[test]
    fn asymmetry_direction() {
        // with c2p < c2n, identical ca > baseline responds more strongly
        // where Ω2 > 0
        let p = params(CouplingMode::CaAsymAb);
        for ca in [0.15, 0.3, 0.6, 1.2] {
            let f_pos = coupling_f(ca, &p, c2_select(1.0, &p));
            let f_neg = coupling_f(ca, &p, c2_select(-1.0, &p));
            assert!(f_pos > f_neg, "ca={ca}: {f_pos} <= {f_neg}");
        }
    }

    proptest! {
        #[test]
        fn coupling_monotone_increasing(lo in 0.0f64..5.0, delta in 1e-6f64..5.0) {
            let p = params(CouplingMode::CaSym);
            let f_lo = coupling_f(lo, &p, 1.0);
            let f_hi = coupling_f(lo + delta, &p, 1.0);
            prop_assert!(f_hi > f_lo);
            prop_assert!(f_lo > 0.0 && f_hi < 2.0);
        }
    }

    #[test]
    fn region_boundaries() {
        let length = 60.0;
        assert_eq!(region_of(0.0, length), Region::Proximal);
        assert_eq!(region_of(0.29, length), Region::Proximal);
        assert_eq!(region_of(0.3, length), Region::Neck);
        assert_eq!(region_of(1.49, length), Region::Neck);
        assert_eq!(region_of(1.5, length), Region::MidPiece);
        assert_eq!(region_of(12.29, length), Region::MidPiece);
        assert_eq!(region_of(12.3, length), Region::Principal);
        assert_eq!(region_of(55.79, length), Region::Principal);
        assert_eq!(region_of(55.81, length), Region::EndPiece);
        assert_eq!(region_of(60.0, length), Region::EndPiece);
    }

    #[test]
    fn flux_zero_outside_active_regions() {
        let flux = FluxModel::default();
        for s in [0.1, 5.0, 57.0] {
            assert_eq!(flux.eval(3.0, s, 60.0, 0.5), 0.0, "s={s}");
        }
    }

    #[test]
    fn flux_positive_at_baseline_start() {
        let flux = FluxModel::default();
        assert!(flux.eval(0.0, 30.0, 60.0, 0.1) > 0.0);
    }

    #[test]
    fn flux_vanishes_at_principal_steady_state() {
        let flux = FluxModel::default();
        let ca_eq = flux.principal_steady_state();
        assert!(ca_eq.is_finite() && ca_eq > 0.1 && ca_eq < 2.0);
        let j = flux.eval(1e9, 30.0, 60.0, ca_eq);
        assert!(j.abs() < 1e-12, "J(eq) = {j:e}");
    }

    #[test]
    fn thomas_solver_matches_dense() {
        let lower = [1.0, 2.0, -0.5, 0.3];
        let diag = [4.0, 5.0, 6.0, 5.0, 4.0];
        let upper = [0.5, -1.0, 2.0, 1.0];
        let rhs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        let mut a = nalgebra::DMatrix::<f64>::zeros(5, 5);
        for i in 0..5 {
            a[(i, i)] = diag[i];
            if i < 4 {
                a[(i, i + 1)] = upper[i];
                a[(i + 1, i)] = lower[i];
            }
        }
        let b = nalgebra::DVector::from_row_slice(&rhs);
        let expect = a.lu().solve(&b).unwrap();
        for i in 0..5 {
            assert_relative_eq!(x[i], expect[i], max_relative = 1e-12);
        }
    }

    fn straight_rod(m: usize, length: f64) -> RodState {
        let wave = WaveParams {
            a0: 0.0,
            b0: 0.0,
            k: 1.0,
            sigma: 0.0,
            length,
        };
        init_rod(&wave, m).unwrap()
    }

    #[test]
    fn uniform_field_unchanged_under_rigid_translation() {
        let m = 100;
        let rod0 = straight_rod(m, 60.0);
        let mut rod1 = rod0.clone();
        for p in &mut rod1.points {
            *p += Vec3::new(0.5, -0.2, 0.1);
        }
        let field = CalciumField::baseline(m + 1, 60.0, 20.0, 0.1);
        let next = step_calcium(&field, &rod0, &rod1, &FluxModel::zero(), 0.0, 1e-3).unwrap();
        for k in 0..=m {
            assert_relative_eq!(next.ca[k], 0.1, epsilon = 1e-12);
        }
    }

    /// Kinematic rod following the reference wave shape at time t;
    /// only positions matter for the calcium Jacobians.
    fn wave_rod(t: f64, m: usize) -> RodState {
        let wave = WaveParams {
            a0: 3.0,
            b0: 1.0,
            k: 2.0 * std::f64::consts::PI / 30.0,
            sigma: 40.0 * std::f64::consts::PI,
            length: 60.0,
        };
        let ds = wave.length / m as f64;
        let a = vec![wave.a0; m + 1];
        let b = vec![wave.b0; m + 1];
        let x = crate::rod::solve_phase(&wave, &a, &b, t, ds).unwrap();
        let points = x
            .iter()
            .map(|&xi| {
                let (s, c) = (wave.k * xi - wave.sigma * t).sin_cos();
                Vec3::new(xi, wave.a0 * s, wave.b0 * c)
            })
            .collect();
        RodState {
            points,
            triads: vec![Triad::identity(); m + 1],
            ds,
            time: t,
        }
    }

    #[test]
    fn mass_conserved_on_deforming_rod() {
        let m = 150;
        let dt = 1e-4;
        let mut field = CalciumField::baseline(m + 1, 60.0, 20.0, 0.1);
        // non-uniform start
        for (k, c) in field.ca.iter_mut().enumerate() {
            *c = 0.1 + 0.4 * (-((k as f64 - 50.0) / 15.0).powi(2)).exp();
        }
        let mut rod_prev = wave_rod(0.0, m);
        let mass0 = field.total_mass(&rod_prev);
        let steps = 2000;
        for step in 0..steps {
            let t = step as f64 * dt;
            let rod_next = wave_rod(t + dt, m);
            field = step_calcium(&field, &rod_prev, &rod_next, &FluxModel::zero(), t, dt).unwrap();
            let mass = field.total_mass(&rod_next);
            assert!(
                (mass - mass0).abs() / mass0 <= 1e-10 * (step + 1) as f64,
                "step {step}: drift {:e}",
                (mass - mass0).abs() / mass0
            );
            rod_prev = rod_next;
        }
        let drift = (field.total_mass(&rod_prev) - mass0).abs() / mass0;
        assert!(drift <= 1e-8, "total drift {drift:e}");
    }

    #[test]
    fn gaussian_bump_matches_heat_kernel() {
        // straight fixed rod: conservative form reduces to the heat
        // equation; compare against the infinite-line kernel in the
        // interior before any boundary influence
        let m = 300;
        let length = 60.0;
        let d_ca = 20.0;
        let rod = straight_rod(m, length);
        let mut field = CalciumField::baseline(m + 1, length, d_ca, 0.0);
        let s0 = 30.0;
        let sig0: f64 = 1.5;
        let amp = 1.0;
        let ds = length / m as f64;
        for k in 0..=m {
            let s = k as f64 * ds;
            field.ca[k] = amp * (-(s - s0).powi(2) / (2.0 * sig0 * sig0)).exp();
        }
        let dt = 1e-4;
        let t_end = 0.1;
        let steps = (t_end / dt) as usize;
        for step in 0..steps {
            field =
                step_calcium(&field, &rod, &rod, &FluxModel::zero(), step as f64 * dt, dt).unwrap();
        }
        let sig_t2 = sig0 * sig0 + 2.0 * d_ca * t_end;
        let peak = amp * sig0 / sig_t2.sqrt();
        for k in 0..=m {
            let s = k as f64 * ds;
            if (s - s0).abs() > 10.0 {
                continue;
            }
            let exact = amp * sig0 / sig_t2.sqrt() * (-(s - s0).powi(2) / (2.0 * sig_t2)).exp();
            assert!(
                (field.ca[k] - exact).abs() / peak <= 1e-3,
                "s={s}: got {} want {exact}",
                field.ca[k]
            );
        }
    }

    #[test]
    fn fixed_rod_development_reproduces_orderings() {
        let flux = FluxModel::default();
        let traces = develop_on_fixed_rod(&flux, 20.0, 0.1, 60.0, 300, 15.0, 1e-3).unwrap();
        let last = traces.times.len() - 1;
        let at = |ts: &[f64], t: f64| ts.iter().position(|v| *v >= t).unwrap();

        // all traces start at the baseline
        assert_eq!(traces.neck[0], 0.1);
        assert_eq!(traces.mid_piece[0], 0.1);
        assert_eq!(traces.principal[0], 0.1);

        // principal piece rises first: it crosses 0.15 μM before the others
        let cross = |trace: &[f64]| traces.times[trace.iter().position(|v| *v > 0.15).unwrap()];
        assert!(cross(&traces.principal) < cross(&traces.neck));
        assert!(cross(&traces.principal) < cross(&traces.mid_piece));

        // neck ends highest, mid-piece intermediate, all within (0.1, 2]
        let (n15, mp15, pp15) = (
            traces.neck[last],
            traces.mid_piece[last],
            traces.principal[last],
        );
        assert!(n15 > mp15 && mp15 >= pp15, "N={n15} MP={mp15} PP={pp15}");
        for v in [n15, mp15, pp15] {
            assert!(v > 0.1 && v <= 2.0, "value {v} outside (0.1, 2]");
        }

        // developed by ~10 s: remaining change is a small fraction of the rise
        let i10 = at(&traces.times, 10.0);
        for trace in [&traces.neck, &traces.mid_piece, &traces.principal] {
            let rise = trace[last] - 0.1;
            assert!(
                (trace[last] - trace[i10]).abs() <= 0.25 * rise.abs().max(1e-9),
                "trace moved too much after 10 s"
            );
        }
    }

    #[test]
    fn adaptive_step_recovers_from_negative() {
        // a violent sink drives the concentration negative at large dt;
        // the adaptive wrapper must subdivide and still end non-negative
        let m = 60;
        let rod = straight_rod(m, 60.0);
        let mut flux = FluxModel::zero();
        flux.pump_v_max = 1.0e4;
        flux.pump_k_m = 0.1;
        flux.ca_rest = 0.0;
        let field = CalciumField::baseline(m + 1, 60.0, 20.0, 0.1);
        let direct = step_calcium(&field, &rod, &rod, &flux, 0.0, 1e-2);
        assert!(matches!(direct, Err(Error::StepSizeFailure(_))));
        let adaptive = step_calcium_adaptive(&field, &rod, &rod, &flux, 0.0, 1e-2, 12);
        let next = adaptive.unwrap();
        assert!(next.ca.iter().all(|c| *c >= 0.0));
    }
}
