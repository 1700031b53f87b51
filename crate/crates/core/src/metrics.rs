//! State-averaged deviation of an error propagator from the identity.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::decomposition::EvolutionDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{distance, eigenphases, ComplexMatrix, UnitaryMatrix, C64};
use crate::numerics::gauss_legendre;

/// Default seed for Monte Carlo averages.
pub const DEFAULT_SEED: u64 = 0x5EED;

/// Samples drawn from one generator stream.
const MC_CHUNK: usize = 4096;

/// Relative change allowed when the sphere grid is refined twofold.
const GRID_REFINEMENT_TOL: f64 = 1e-6;

/// Below this distance from the interval the polar integrand is treated as a
/// true kink and the rule is split there.
const KINK_SCALE: f64 = 1e-14;

/// How the average over pure input states is evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QuadratureSpec {
    /// Gauss-Legendre in `cos(alpha)` times the trapezoid rule in `beta` over
    /// the Bloch sphere; two levels only.
    SphereGrid { polar: usize, azimuth: usize },
    /// Haar-random pure states.
    HaarMc { samples: usize, seed: u64 },
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec::SphereGrid {
            polar: 64,
            azimuth: 128,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            QuadratureSpec::SphereGrid { polar, azimuth } if polar < 8 || azimuth < 16 => Err(
                Error::InvalidInput(format!("sphere grid {polar}x{azimuth} is below the 8x16 minimum")),
            ),
            QuadratureSpec::HaarMc { samples, .. } if samples < 1000 => Err(Error::InvalidInput(format!(
                "{samples} Monte Carlo samples is below the minimum of 1000"
            ))),
            _ => Ok(()),
        }
    }

    /// Seed recorded with results; grids report the default seed.
    pub fn seed(&self) -> u64 {
        match *self {
            QuadratureSpec::HaarMc { seed, .. } => seed,
            QuadratureSpec::SphereGrid { .. } => DEFAULT_SEED,
        }
    }
}

/// Result of [`delta_u_err`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaEstimate {
    pub value: f64,
    /// Monte Carlo standard error; zero for the deterministic grid.
    pub standard_error: f64,
    /// Grid only: change of the value under twofold refinement.
    pub refinement_change: Option<f64>,
}

/// Mean of `|<psi|(U - I)|psi>|` over pure states `psi`.
///
/// Two-level inputs on a sphere grid are averaged in the eigenbasis of `U`,
/// where the integrand depends on the polar angle only through
/// `|a + b cos(alpha)|`. The polar rule is concentrated around the near zero
/// of that modulus, so near-identity inputs converge as fast as generic ones.
/// The grid is checked against one twice as fine in both directions.
pub fn delta_u_err(u: &UnitaryMatrix, quad: &QuadratureSpec) -> Result<DeltaEstimate> {
    quad.validate()?;
    match *quad {
        QuadratureSpec::SphereGrid { polar, azimuth } => {
            if u.dim() != 2 {
                return Err(Error::InvalidInput(format!(
                    "sphere grid needs two levels, got {}",
                    u.dim()
                )));
            }
            let phases = eigenphases(u)?;
            let d = [C64::from_polar(1.0, phases[0]), C64::from_polar(1.0, phases[1])];
            let coarse = sphere_average(d, polar, azimuth);
            let fine = sphere_average(d, 2 * polar, 2 * azimuth);
            let change = (coarse - fine).abs();
            if change > GRID_REFINEMENT_TOL * fine.abs() + 1e-15 {
                return Err(Error::Quadrature(format!(
                    "sphere grid {polar}x{azimuth} gives {coarse:e}, refined grid gives {fine:e}"
                )));
            }
            Ok(DeltaEstimate {
                value: coarse,
                standard_error: 0.0,
                refinement_change: Some(change),
            })
        }
        QuadratureSpec::HaarMc { samples, seed } => {
            let (value, standard_error) = haar_average(u.matrix(), samples, seed);
            Ok(DeltaEstimate {
                value,
                standard_error,
                refinement_change: None,
            })
        }
    }
}

/// Polar nodes on `[-1, 1]` adapted to the minimum of `|a + b z|`.
fn polar_rule(a: C64, b: C64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let plain = |lo: f64, hi: f64| -> Vec<(f64, f64)> {
        x.iter()
            .zip(&w)
            .map(|(xi, wi)| (0.5 * (lo + hi) + 0.5 * (hi - lo) * xi, 0.5 * (hi - lo) * wi))
            .collect()
    };
    let bb = b.norm_sqr();
    if bb == 0.0 {
        return plain(-1.0, 1.0);
    }
    let ab = a * b.conj();
    let z0 = -ab.re / bb;
    let eps = ab.im.abs() / bb;
    let centre = z0.clamp(-1.0, 1.0);
    let scale = eps.hypot(z0 - centre);
    if scale >= 0.25 {
        return plain(-1.0, 1.0);
    }
    if scale < KINK_SCALE {
        let mut nodes = Vec::with_capacity(2 * n);
        if centre > -1.0 {
            nodes.extend(plain(-1.0, centre));
        }
        if centre < 1.0 {
            nodes.extend(plain(centre, 1.0));
        }
        return nodes;
    }
    // z = centre + scale sinh(u)
    let lo = ((-1.0 - centre) / scale).asinh();
    let hi = ((1.0 - centre) / scale).asinh();
    x.iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let u = 0.5 * (lo + hi) + 0.5 * (hi - lo) * xi;
            let z = (centre + scale * u.sinh()).clamp(-1.0, 1.0);
            (z, 0.5 * (hi - lo) * wi * scale * u.cosh())
        })
        .collect()
}

fn sphere_average(d: [C64; 2], polar: usize, azimuth: usize) -> f64 {
    let one = C64::new(1.0, 0.0);
    let a = 0.5 * (d[0] + d[1]) - one;
    let b = 0.5 * (d[0] - d[1]);
    let mut total = 0.0;
    for (z, wz) in polar_rule(a, b, polar) {
        let r0 = (0.5 * (1.0 + z)).max(0.0).sqrt();
        let r1 = (0.5 * (1.0 - z)).max(0.0).sqrt();
        let mut ring = 0.0;
        for j in 0..azimuth {
            let beta = TAU * j as f64 / azimuth as f64;
            let psi = [C64::new(r0, 0.0), C64::from_polar(r1, beta)];
            let value: C64 = psi.iter().zip(&d).map(|(p, dk)| p.norm_sqr() * (dk - one)).sum();
            ring += value.norm();
        }
        total += wz * ring / azimuth as f64;
    }
    0.5 * total
}

fn haar_chunk(u: &ComplexMatrix, count: usize, seed: u64, stream: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let n = u.dim();
    let mut psi = vec![C64::new(0.0, 0.0); n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..count {
        for p in psi.iter_mut() {
            *p = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let norm = psi.iter().map(|p| p.norm_sqr()).sum::<f64>().sqrt();
        for p in psi.iter_mut() {
            *p /= norm;
        }
        let up = u.mul_vec(&psi);
        let overlap: C64 = psi.iter().zip(&up).map(|(p, q)| p.conj() * q).sum();
        let x = (overlap - C64::new(1.0, 0.0)).norm();
        sum += x;
        sum_sq += x * x;
    }
    (sum, sum_sq)
}

/// Mean and standard error over `samples` Haar-random states.
///
/// Chunk `c` always draws from stream `c` of the seeded generator, and the
/// chunk sums are combined in order, so the result does not depend on the
/// thread count.
fn haar_average(u: &ComplexMatrix, samples: usize, seed: u64) -> (f64, f64) {
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            haar_chunk(u, count, seed, c as u64)
        })
        .collect();
    let (sum, sum_sq) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = samples as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Summary numbers for one decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct AdiabaticityReport {
    pub delta_u_err: DeltaEstimate,
    /// `||U_Err - I||_F`.
    pub err_distance: f64,
    pub reconstruction_residual: f64,
    /// Eigenphases of `U_Geo`, ascending.
    pub geometric_phases: Vec<f64>,
    /// Eigenphases of the transported part `U_G2`, ascending.
    pub transport_phases: Vec<f64>,
    /// Accumulated dynamic phase per label.
    pub dynamic_phases: Vec<f64>,
    pub cross_difference: Option<f64>,
}

pub fn adiabaticity_report(decomp: &EvolutionDecomposition, quad: &QuadratureSpec) -> Result<AdiabaticityReport> {
    let identity = ComplexMatrix::identity(decomp.u_err.dim());
    Ok(AdiabaticityReport {
        delta_u_err: delta_u_err(&decomp.u_err, quad)?,
        err_distance: distance(decomp.u_err.matrix(), &identity)?,
        reconstruction_residual: decomp.reconstruction_residual,
        geometric_phases: eigenphases(&decomp.u_geo)?,
        transport_phases: eigenphases(&decomp.u_g2)?,
        dynamic_phases: decomp.dynamic_phases.clone(),
        cross_difference: decomp.cross_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_skew, HermitianMatrix};
    use proptest::prelude::*;
    use rand::Rng;

    fn grid() -> QuadratureSpec {
        QuadratureSpec::default()
    }

    fn diag(a: f64, b: f64) -> UnitaryMatrix {
        UnitaryMatrix::new(ComplexMatrix::from_diagonal(&[C64::from_polar(1.0, a), C64::from_polar(1.0, b)])).unwrap()
    }

    fn unitary_from(xs: &[f64]) -> UnitaryMatrix {
        let h = ComplexMatrix::from_rows(&[
            vec![C64::new(xs[0], 0.0), C64::new(xs[1], xs[2])],
            vec![C64::new(xs[1], -xs[2]), C64::new(xs[3], 0.0)],
        ])
        .unwrap();
        expm_skew(&HermitianMatrix::new(h).unwrap(), 1.0).unwrap()
    }

    /// `(1/2) int_{-1}^{1} |a + b z| dz` in closed form.
    fn closed_form(d1: C64, d2: C64) -> f64 {
        let one = C64::new(1.0, 0.0);
        let a = 0.5 * (d1 + d2) - one;
        let b = 0.5 * (d1 - d2);
        let bb = b.norm_sqr();
        if bb == 0.0 {
            return a.norm();
        }
        let ab = a * b.conj();
        let z0 = -ab.re / bb;
        let e = ab.im.abs() / bb;
        let f = |x: f64| {
            let y = x - z0;
            let r = (y * y + e * e).sqrt();
            let tail = if e > 0.0 { e * e * (y / e).asinh() } else { 0.0 };
            0.5 * (y * r + tail)
        };
        0.5 * bb.sqrt() * (f(1.0) - f(-1.0))
    }

    #[test]
    fn identity_gives_zero() {
        let v = delta_u_err(&UnitaryMatrix::identity(2), &grid()).unwrap();
        assert_eq!(v.value, 0.0);
        let mc = QuadratureSpec::HaarMc { samples: 2000, seed: 1 };
        assert!(delta_u_err(&UnitaryMatrix::identity(4), &mc).unwrap().value < 1e-15);
    }

    #[test]
    fn global_phase_is_state_independent() {
        for delta in [1e-6, 0.3, 2.0, 3.1] {
            let u = diag(delta, delta);
            let exact = 2.0 * (delta / 2.0).sin().abs();
            let g = delta_u_err(&u, &grid()).unwrap().value;
            assert!((g - exact).abs() < 1e-13 * exact.max(1e-3), "{delta}: {g} vs {exact}");
            let u3 = UnitaryMatrix::new(ComplexMatrix::identity(3).scale(C64::from_polar(1.0, delta))).unwrap();
            let mc = delta_u_err(&u3, &QuadratureSpec::HaarMc { samples: 5000, seed: 9 }).unwrap();
            assert!((mc.value - exact).abs() < 1e-12);
            assert!(mc.standard_error < 1e-12);
        }
    }

    #[test]
    fn small_rotation_matches_brute_force_sampling() {
        let delta = 0.05;
        let u = diag(delta, -delta);
        let g = delta_u_err(&u, &grid()).unwrap().value;
        // brute force: uniform points on the sphere from a fixed stream
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let z: f64 = rng.random_range(-1.0..1.0);
            let beta: f64 = rng.random_range(0.0..TAU);
            let psi = [
                C64::new((0.5 * (1.0 + z)).sqrt(), 0.0),
                C64::from_polar((0.5 * (1.0 - z)).sqrt(), beta),
            ];
            let up = u.matrix().mul_vec(&psi);
            let o: C64 = psi.iter().zip(&up).map(|(p, q)| p.conj() * q).sum();
            sum += (o - C64::new(1.0, 0.0)).norm();
        }
        let mc = sum / n as f64;
        assert!(((g - mc) / g).abs() < 1e-3, "{g} vs {mc}");
        assert!((g - closed_form(C64::from_polar(1.0, delta), C64::from_polar(1.0, -delta))).abs() < 1e-14);
    }

    #[test]
    fn near_identity_inputs_converge() {
        for eps in [1e-14, 1e-9, 1e-5, 1e-3] {
            let u = unitary_from(&[eps, 0.7 * eps, -0.2 * eps, -1.3 * eps]);
            let phases = eigenphases(&u).unwrap();
            let exact = closed_form(C64::from_polar(1.0, phases[0]), C64::from_polar(1.0, phases[1]));
            let g = delta_u_err(&u, &grid()).unwrap().value;
            assert!((g - exact).abs() <= 1e-10 * exact, "{eps}: {g} vs {exact}");
        }
    }

    #[test]
    fn undersized_rules_are_rejected() {
        let u = UnitaryMatrix::identity(2);
        assert!(delta_u_err(&u, &QuadratureSpec::SphereGrid { polar: 4, azimuth: 16 }).is_err());
        assert!(delta_u_err(&u, &QuadratureSpec::HaarMc { samples: 999, seed: 0 }).is_err());
        assert!(delta_u_err(&UnitaryMatrix::identity(3), &grid()).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let u = unitary_from(&[0.3, -0.4, 0.9, 0.1]);
        let q = QuadratureSpec::HaarMc { samples: 10_000, seed: 77 };
        let a = delta_u_err(&u, &q).unwrap();
        let b = delta_u_err(&u, &q).unwrap();
        assert_eq!(a, b);
        let c = delta_u_err(&u, &QuadratureSpec::HaarMc { samples: 10_000, seed: 78 }).unwrap();
        assert_ne!(a.value, c.value);
    }

    proptest! {
        // The Monte Carlo comparison is statistical: each case may miss the
        // 3-sigma band with probability 0.27%, so the case count stays small
        // and the generator seed is fixed.
        #![proptest_config(ProptestConfig {
            cases: 16,
            rng_seed: proptest::test_runner::RngSeed::Fixed(0x5EED),
            ..ProptestConfig::default()
        })]

        #[test]
        fn grid_matches_closed_form(xs in prop::collection::vec(-3.0f64..3.0, 4)) {
            let u = unitary_from(&xs);
            let phases = eigenphases(&u).unwrap();
            let exact = closed_form(C64::from_polar(1.0, phases[0]), C64::from_polar(1.0, phases[1]));
            let g = delta_u_err(&u, &grid()).unwrap();
            prop_assert!((g.value - exact).abs() <= 1e-12 + 1e-10 * exact);
            prop_assert!((0.0..=2.0).contains(&g.value));
        }

        #[test]
        fn grid_agrees_with_monte_carlo(xs in prop::collection::vec(-3.0f64..3.0, 4)) {
            let u = unitary_from(&xs);
            let g = delta_u_err(&u, &grid()).unwrap().value;
            let mc = delta_u_err(&u, &QuadratureSpec::HaarMc { samples: 20_000, seed: DEFAULT_SEED }).unwrap();
            prop_assert!((g - mc.value).abs() <= 3.0 * mc.standard_error + 1e-12,
                "grid {} mc {} se {}", g, mc.value, mc.standard_error);
        }

        #[test]
        fn conjugation_leaves_the_average_unchanged(xs in prop::collection::vec(-3.0f64..3.0, 4),
                                                   ys in prop::collection::vec(-3.0f64..3.0, 4)) {
            let u = unitary_from(&xs);
            let v = unitary_from(&ys);
            let w = v.compose(&u).unwrap().compose(&v.adjoint()).unwrap();
            let a = delta_u_err(&u, &grid()).unwrap().value;
            let b = delta_u_err(&w, &grid()).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-12 + 1e-9 * a);
        }
    }
}
