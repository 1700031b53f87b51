//! Carr-Purcell sequences on a cone, the three continuous spin drives, the
//! drive-shape parameter `gamma`, and parallel sweeps over them.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::decomposition::{decompose, DecompositionSettings, EvolutionDecomposition};
use crate::error::{Error, Result};
use crate::hamiltonian::{FnPath, SpinHalfFieldModel};
use crate::linalg::C64;
use crate::metrics::{delta_u_err, DeltaEstimate, QuadratureSpec};
use crate::numerics::{brent_root, integrate_adaptive};
use crate::propagator::{IntegratorSettings, Pulse, PulseSequence, Scenario};

/// Drive-shape parameter that makes the half-period average of the `B_pi`
/// modulation function vanish; [`solve_gamma`] reproduces it.
pub const DEFAULT_GAMMA: f64 = 2.342_132_472_653_136_5;

/// Rotation performed by each pulse about the instantaneous field axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PulseRotation {
    /// `pi` rotations: the two levels pick up opposite quarter-turn phases.
    HalfTurn,
    /// `2 pi` rotations: both levels pick up `-1`.
    FullTurn,
}

/// Equally spaced pulses on the cone of polar angle `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpScenario {
    pub theta: f64,
    pub phi_0: f64,
    pub phi_t: f64,
    pub n: usize,
    pub rotation: PulseRotation,
}

impl CpScenario {
    pub fn new(theta: f64, n: usize) -> Self {
        Self {
            theta,
            phi_0: 0.0,
            phi_t: TAU,
            n,
            rotation: PulseRotation::HalfTurn,
        }
    }
}

/// `phi_mu = (phi_T - phi_0)(2 mu - 1)/(2N) + phi_0` for `mu = 1..=N`.
pub fn cp_positions(phi_0: f64, phi_t: f64, n: usize) -> Vec<f64> {
    (1..=n)
        .map(|mu| (phi_t - phi_0) * ((2 * mu - 1) as f64 / (2 * n) as f64) + phi_0)
        .collect()
}

/// Pulse signs `+1, -1, +1, ...`.
pub fn sign_pattern(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

/// Pulse sequence for a CP scenario.
///
/// Pulse `mu` with sign `s` applies phases `theta_+ = s pi/2`,
/// `theta_- = -s pi/2` (half turns) or `s pi`, `-s pi` (full turns), so the
/// first half-turn pulse is `exp(-i pi sigma.n / 2)` and even `N` leaves no
/// net dynamic phase.
pub fn build_cp(scenario: &CpScenario) -> Result<PulseSequence> {
    if scenario.n == 0 {
        return Err(Error::InvalidInput("a CP sequence needs at least one pulse".into()));
    }
    if !(scenario.phi_t >= scenario.phi_0) {
        return Err(Error::InvalidInput("phi_T must not precede phi_0".into()));
    }
    let turn = match scenario.rotation {
        PulseRotation::HalfTurn => PI / 2.0,
        PulseRotation::FullTurn => PI,
    };
    let pulses = cp_positions(scenario.phi_0, scenario.phi_t, scenario.n)
        .into_iter()
        .zip(sign_pattern(scenario.n))
        .map(|(phi, s)| Pulse {
            at: phi,
            params: vec![1.0, phi],
            phases: vec![s * turn, -s * turn],
        })
        .collect();
    PulseSequence::new(
        (scenario.phi_0, vec![1.0, scenario.phi_0]),
        (scenario.phi_t, vec![1.0, scenario.phi_t]),
        pulses,
    )
}

pub fn cp_scenario(scenario: &CpScenario) -> Result<Scenario> {
    Scenario::pulsed(Arc::new(SpinHalfFieldModel::new(scenario.theta)), build_cp(scenario)?)
}

/// Amplitude law of a continuous drive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DriveKind {
    /// `B(t) = (Omega/2)(1 - gamma cos(Omega t))`
    BPi,
    /// Twice `BPi`.
    B2Pi,
    /// Constant with the same mean square as `BPi`: `sqrt((2 + gamma^2)/8) Omega`.
    BConst,
}

impl DriveKind {
    pub const ALL: [DriveKind; 3] = [DriveKind::BPi, DriveKind::B2Pi, DriveKind::BConst];

    pub fn name(self) -> &'static str {
        match self {
            DriveKind::BPi => "b_pi",
            DriveKind::B2Pi => "b_2pi",
            DriveKind::BConst => "b_const",
        }
    }
}

impl fmt::Display for DriveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DriveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DriveKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown drive kind {s:?}")))
    }
}

/// A spin-1/2 field of fixed polar angle rotating as `phi = omega t` with an
/// oscillating or constant magnitude.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriveScenario {
    pub kind: DriveKind,
    /// Modulation frequency `Omega`.
    pub big_omega: f64,
    pub gamma: f64,
    pub theta: f64,
    /// Azimuthal rate `omega`.
    pub omega: f64,
    pub t_total: f64,
}

impl DriveScenario {
    /// Drive with `Omega = 2 pi N'` over `T = 1` at `omega = 2 pi`.
    pub fn with_nprime(kind: DriveKind, nprime: f64, theta: f64) -> Self {
        Self {
            kind,
            big_omega: TAU * nprime,
            gamma: DEFAULT_GAMMA,
            theta,
            omega: TAU,
            t_total: 1.0,
        }
    }

    /// `N' = Omega / 2 pi`.
    pub fn nprime(&self) -> f64 {
        self.big_omega / TAU
    }

    pub fn amplitude(&self, t: f64) -> f64 {
        drive_amplitude(self.kind, self.big_omega, self.gamma, t)
    }
}

fn drive_amplitude(kind: DriveKind, big_omega: f64, gamma: f64, t: f64) -> f64 {
    let b_pi = 0.5 * big_omega * (1.0 - gamma * (big_omega * t).cos());
    match kind {
        DriveKind::BPi => b_pi,
        DriveKind::B2Pi => 2.0 * b_pi,
        DriveKind::BConst => ((2.0 + gamma * gamma) / 8.0).sqrt() * big_omega,
    }
}

/// Model and path `R(t) = (B(t), omega t)` on `[0, T]` with period `2 pi / Omega`.
pub fn build_drive(scenario: &DriveScenario) -> Result<(SpinHalfFieldModel, FnPath)> {
    let s = *scenario;
    if !(s.big_omega > 0.0) || !s.big_omega.is_finite() {
        return Err(Error::InvalidInput(format!("Omega = {} must be positive", s.big_omega)));
    }
    if !(s.t_total > 0.0) || !s.t_total.is_finite() {
        return Err(Error::InvalidInput(format!("T = {} must be positive", s.t_total)));
    }
    if ![s.gamma, s.theta, s.omega].iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let path = FnPath::new(0.0, s.t_total, move |t| vec![s.amplitude(t), s.omega * t])?
        .with_velocity(move |t| {
            let db = match s.kind {
                DriveKind::BPi => 0.5 * s.big_omega * s.big_omega * s.gamma * (s.big_omega * t).sin(),
                DriveKind::B2Pi => s.big_omega * s.big_omega * s.gamma * (s.big_omega * t).sin(),
                DriveKind::BConst => 0.0,
            };
            vec![db, s.omega]
        })
        .with_period(TAU / s.big_omega);
    Ok((SpinHalfFieldModel::new(s.theta), path))
}

pub fn drive_scenario(scenario: &DriveScenario) -> Result<Scenario> {
    let (model, path) = build_drive(scenario)?;
    Scenario::continuous(Arc::new(model), Arc::new(path))
}

/// `int_0^{2 pi/Omega} exp(i int_0^t B_pi(s) ds) dt`, the average of the
/// `B_pi` modulation function over half its period (up to normalization).
pub fn gamma_objective(gamma: f64, big_omega: f64) -> Result<C64> {
    if !(big_omega > 0.0) {
        return Err(Error::InvalidInput(format!("Omega = {big_omega} must be positive")));
    }
    let (value, _) = integrate_adaptive(
        |t| {
            let x = big_omega * t;
            C64::from_polar(1.0, 0.5 * (x - gamma * x.sin()))
        },
        0.0,
        TAU / big_omega,
        1e-13 / big_omega,
    )?;
    Ok(value)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSolution {
    pub gamma: f64,
    /// `|objective|` at `gamma`, for `Omega = 1`.
    pub objective: f64,
}

/// Root of the half-period modulation average in `gamma in [1, 4]`.
///
/// The average is purely imaginary for every `gamma` (the integrand is
/// antisymmetric about the half period up to conjugation), so the root of
/// its imaginary part is a zero of its modulus.
pub fn solve_gamma(tol: f64) -> Result<GammaSolution> {
    if !(tol >= 1e-12) || !tol.is_finite() {
        return Err(Error::InvalidInput(format!("tolerance {tol:e} must be at least 1e-12")));
    }
    let mut failure = None;
    let f = |g: f64| match gamma_objective(g, 1.0) {
        Ok(v) => v.im,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let root = brent_root(f, 1.0, 4.0, tol);
    if let Some(e) = failure {
        return Err(e);
    }
    let gamma = root?;
    Ok(GammaSolution {
        gamma,
        objective: gamma_objective(gamma, 1.0)?.norm(),
    })
}

/// Integrator, decomposition and averaging settings for one run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunSettings {
    pub integrator: IntegratorSettings,
    pub decomposition: DecompositionSettings,
    pub quadrature: QuadratureSpec,
}

/// Propagate, decompose and average one scenario.
pub fn run_point(scenario: &Scenario, settings: &RunSettings) -> Result<(EvolutionDecomposition, DeltaEstimate)> {
    let evolution = scenario.propagate(&settings.integrator)?;
    let decomposition = decompose(scenario, &evolution, &settings.decomposition)?;
    let delta = delta_u_err(&decomposition.u_err, &settings.quadrature)?;
    Ok((decomposition, delta))
}

/// One sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub sweep_var: f64,
    /// `cp_even` / `cp_odd` (parity of `N`) or the drive kind.
    pub kind: String,
    pub delta_u_err: f64,
    pub standard_error: f64,
    pub residual: f64,
    pub n_pulses_or_nprime: f64,
    pub theta: f64,
}

/// Rows ordered by sweep variable, then by kind.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub seed: u64,
}

impl SweepResult {
    pub fn rows_of_kind<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.kind == kind)
    }
}

fn row(sweep_var: f64, kind: String, theta: f64, d: &EvolutionDecomposition, e: &DeltaEstimate) -> SweepRow {
    SweepRow {
        sweep_var,
        kind,
        delta_u_err: e.value,
        standard_error: e.standard_error,
        residual: d.reconstruction_residual,
        n_pulses_or_nprime: sweep_var,
        theta,
    }
}

/// Error of CP sequences for each pulse count in `ns`, computed in parallel.
pub fn sweep_cp(
    theta: f64,
    phi_0: f64,
    phi_t: f64,
    ns: &[usize],
    rotation: PulseRotation,
    settings: &RunSettings,
) -> Result<SweepResult> {
    if ns.is_empty() {
        return Err(Error::InvalidInput("the pulse-count range is empty".into()));
    }
    let mut rows = ns
        .par_iter()
        .map(|&n| {
            let scenario = cp_scenario(&CpScenario {
                theta,
                phi_0,
                phi_t,
                n,
                rotation,
            })?;
            let (d, e) = run_point(&scenario, settings)?;
            let parity = if n % 2 == 0 { "cp_even" } else { "cp_odd" };
            Ok(row(n as f64, parity.to_string(), theta, &d, &e))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.sweep_var.total_cmp(&b.sweep_var));
    Ok(SweepResult {
        rows,
        seed: settings.quadrature.seed(),
    })
}

/// Error of each drive kind at each `N' = Omega / 2 pi`, computed in parallel.
pub fn sweep_drive(
    kinds: &[DriveKind],
    nprimes: &[f64],
    t_total: f64,
    omega: f64,
    theta: f64,
    gamma: f64,
    settings: &RunSettings,
) -> Result<SweepResult> {
    if kinds.is_empty() || nprimes.is_empty() {
        return Err(Error::InvalidInput("the drive sweep range is empty".into()));
    }
    if !(t_total > 0.0) {
        return Err(Error::InvalidInput(format!("T = {t_total} must be positive")));
    }
    let jobs: Vec<(DriveKind, f64)> = kinds
        .iter()
        .flat_map(|&k| nprimes.iter().map(move |&n| (k, n)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(kind, nprime)| {
            let scenario = drive_scenario(&DriveScenario {
                kind,
                big_omega: TAU * nprime,
                gamma,
                theta,
                omega,
                t_total,
            })?;
            let (d, e) = run_point(&scenario, settings)?;
            Ok((kind, row(nprime, kind.name().to_string(), theta, &d, &e)))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.1.sweep_var.total_cmp(&b.1.sweep_var).then(a.0.cmp(&b.0)));
    Ok(SweepResult {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
        seed: settings.quadrature.seed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::ParameterPath;
    use crate::linalg::{distance, ComplexMatrix};
    use crate::numerics::integrate_adaptive_real;
    use crate::propagator::dyn_phase_condition_check;

    #[test]
    fn cp_positions_examples() {
        assert_eq!(cp_positions(0.0, TAU, 1), vec![PI]);
        let four = cp_positions(0.0, TAU, 4);
        for (p, e) in four.iter().zip([PI / 4.0, 3.0 * PI / 4.0, 5.0 * PI / 4.0, 7.0 * PI / 4.0]) {
            assert!((p - e).abs() < 1e-15);
        }
    }

    #[test]
    fn even_sequences_cancel_dynamic_phase() {
        for n in [2, 4, 10] {
            let seq = build_cp(&CpScenario::new(PI / 6.0, n)).unwrap();
            assert_eq!(seq.total_phases(), vec![0.0, 0.0]);
            assert!(dyn_phase_condition_check(&seq, &[0, 1]).unwrap().satisfied);
        }
        let odd = build_cp(&CpScenario::new(PI / 6.0, 3)).unwrap();
        assert_eq!(odd.total_phases(), vec![PI / 2.0, -PI / 2.0]);
    }

    #[test]
    fn empty_or_reversed_sequences_are_rejected() {
        assert!(build_cp(&CpScenario::new(1.0, 0)).is_err());
        let mut s = CpScenario::new(1.0, 2);
        s.phi_t = -1.0;
        assert!(build_cp(&s).is_err());
    }

    #[test]
    fn oscillating_drive_crosses_zero() {
        let d = DriveScenario::with_nprime(DriveKind::BPi, 4.0, PI / 2.0);
        let (_, path) = build_drive(&d).unwrap();
        let b0 = path.point(0.0)[0];
        assert!((b0 - 0.5 * d.big_omega * (1.0 - DEFAULT_GAMMA)).abs() < 1e-12);
        assert!(b0 < 0.0);
        let v = path.velocity(0.013);
        let h = 1e-6;
        let fd = (path.point(0.013 + h)[0] - path.point(0.013 - h)[0]) / (2.0 * h);
        assert!((v[0] - fd).abs() < 1e-5 * fd.abs().max(1.0));
    }

    #[test]
    fn constant_drive_has_matching_mean_square() {
        let period = 1.0;
        for kind in [DriveKind::BPi, DriveKind::BConst] {
            assert!(DriveScenario::with_nprime(kind, 1.0, 0.0).amplitude(0.3).is_finite());
        }
        let s = |k| DriveScenario::with_nprime(k, 1.0, 0.0);
        let msq = |k| integrate_adaptive_real(|t| s(k).amplitude(t).powi(2), 0.0, period, 1e-12).unwrap().0;
        assert!((msq(DriveKind::BPi) - msq(DriveKind::BConst)).abs() < 1e-9);
    }

    #[test]
    fn phase_per_period_doubles() {
        // with gamma fixed, one period accumulates pi (b_pi) and 2 pi (b_2pi)
        let per = |k| {
            let s = DriveScenario::with_nprime(k, 3.0, 0.0);
            let period = TAU / s.big_omega;
            integrate_adaptive_real(|t| s.amplitude(t), 0.0, period, 1e-13).unwrap().0
        };
        assert!((per(DriveKind::BPi) - PI).abs() < 1e-10);
        assert!((per(DriveKind::B2Pi) - TAU).abs() < 1e-10);
    }

    #[test]
    fn gamma_root_and_anchor() {
        let sol = solve_gamma(1e-12).unwrap();
        assert!((sol.gamma - 2.34213).abs() < 1e-4);
        assert!((sol.gamma - DEFAULT_GAMMA).abs() < 1e-11);
        assert!(sol.objective < 1e-9);
        // gamma = 0: |int_0^{2 pi / Omega} exp(i Omega t / 2) dt| = 4 / Omega
        for big_omega in [1.0, 3.0] {
            assert!((gamma_objective(0.0, big_omega).unwrap().norm() - 4.0 / big_omega).abs() < 1e-12);
        }
        assert!(solve_gamma(1e-13).is_err());
    }

    #[test]
    fn gamma_objective_matches_simpson_oracle() {
        let gamma = 1.7;
        let n = 20_000;
        let h = TAU / n as f64;
        let f = |x: f64| C64::from_polar(1.0, 0.5 * (x - gamma * x.sin()));
        let mut s = f(0.0) + f(TAU);
        for k in 1..n {
            s += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let simpson = s * (h / 3.0);
        assert!((gamma_objective(gamma, 1.0).unwrap() - simpson).norm() < 1e-12);
        assert!(gamma_objective(gamma, 1.0).unwrap().re.abs() < 1e-13);
    }

    #[test]
    fn gamma_is_independent_of_the_modulation_frequency() {
        for big_omega in [0.5, 7.0] {
            let scaled = gamma_objective(DEFAULT_GAMMA, big_omega).unwrap().norm() * big_omega;
            assert!(scaled < 1e-9);
        }
    }

    #[test]
    fn equatorial_cp_sweep_is_exact() {
        let settings = RunSettings::default();
        let ns: Vec<usize> = (1..=6).collect();
        let r = sweep_cp(PI / 2.0, 0.0, TAU, &ns, PulseRotation::HalfTurn, &settings).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in &r.rows {
            assert!(row.delta_u_err <= 1e-10, "{row:?}");
            assert_eq!(row.kind, if (row.sweep_var as usize).is_multiple_of(2) { "cp_even" } else { "cp_odd" });
        }
    }

    #[test]
    fn more_pulses_reduce_the_error() {
        let settings = RunSettings::default();
        let r = sweep_cp(PI / 6.0, 0.0, TAU, &[40, 4], PulseRotation::HalfTurn, &settings).unwrap();
        assert_eq!(r.rows[0].sweep_var, 4.0);
        assert!(r.rows[1].delta_u_err < r.rows[0].delta_u_err);
    }

    #[test]
    fn sweeps_reject_empty_ranges() {
        let s = RunSettings::default();
        assert!(sweep_cp(1.0, 0.0, TAU, &[], PulseRotation::HalfTurn, &s).is_err());
        assert!(sweep_drive(&[DriveKind::BPi], &[], 1.0, TAU, 1.0, DEFAULT_GAMMA, &s).is_err());
    }

    #[test]
    fn slow_constant_drive_is_adiabatic() {
        let s = drive_scenario(&DriveScenario::with_nprime(DriveKind::BConst, 200.0, PI / 2.0)).unwrap();
        let (d, _) = run_point(&s, &RunSettings::default()).unwrap();
        assert!(distance(d.u_err.matrix(), &ComplexMatrix::identity(2)).unwrap() < 0.02);
    }

    #[test]
    fn full_turn_drive_does_not_become_adiabatic() {
        let settings = RunSettings::default();
        let r = sweep_drive(&[DriveKind::B2Pi], &[10.0], 1.0, TAU, PI / 2.0, DEFAULT_GAMMA, &settings).unwrap();
        assert!(r.rows[0].delta_u_err > 0.5, "{:?}", r.rows[0]);
    }

    #[test]
    fn drive_sweep_rows_are_ordered() {
        let settings = RunSettings::default();
        let r = sweep_drive(
            &[DriveKind::BConst, DriveKind::BPi],
            &[3.0, 1.5],
            1.0,
            TAU,
            PI / 2.0,
            DEFAULT_GAMMA,
            &settings,
        )
        .unwrap();
        let keys: Vec<(f64, &str)> = r.rows.iter().map(|x| (x.sweep_var, x.kind.as_str())).collect();
        assert_eq!(keys, vec![(1.5, "b_pi"), (1.5, "b_const"), (3.0, "b_pi"), (3.0, "b_const")]);
        assert!(r.rows.iter().all(|x| x.residual <= 1e-8));
    }
}
