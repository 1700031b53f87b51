//! Factorization of a propagator into dynamic, geometric and error parts.
//!
//! All factors are expressed in the fixed computational basis. Projectors and
//! transition operators are built from labeled frames, never from
//! energy-sorted eigenvectors.

use crate::error::{Error, Result};
use crate::hamiltonian::{FrameField, SpectralFrame, DEGENERACY_TOL};
use crate::linalg::{distance, expm_skew, unit_phase, ComplexMatrix, HermitianMatrix, UnitaryMatrix, C64};
use crate::numerics::{integrate_adaptive_real, magnus4_exponent, ordered_exponential, GAUSS2_NODES};
use crate::propagator::{dyn_phase_condition_check, EvolutionResult, Scenario};

/// Resolution and tolerances for [`decompose`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecompositionSettings {
    /// Steps along the path for the path-ordered factors.
    pub path_steps: usize,
    /// Bound on `||U_Dyn U_Geo U_Err - U||_F`.
    pub tolerance: f64,
    /// Also integrate the error evolution directly and compare.
    pub cross_validate: bool,
    /// Bound on the Frobenius gap between direct and extracted error factors.
    pub cross_tolerance: f64,
}

impl Default for DecompositionSettings {
    fn default() -> Self {
        Self {
            path_steps: 4096,
            tolerance: 1e-8,
            cross_validate: false,
            cross_tolerance: 1e-6,
        }
    }
}

/// `U = U_Dyn U_Geo U_Err` with every factor and the reconstruction residual.
#[derive(Clone, Debug)]
pub struct EvolutionDecomposition {
    pub u_total: UnitaryMatrix,
    pub u_dyn: UnitaryMatrix,
    pub u_g1: UnitaryMatrix,
    pub u_g2: UnitaryMatrix,
    pub u_geo: UnitaryMatrix,
    /// Error factor extracted as `U_Geo^dag U_Dyn^dag U`.
    pub u_err: UnitaryMatrix,
    /// Error factor integrated from its own generator, when requested.
    pub u_err_direct: Option<UnitaryMatrix>,
    /// `||U_Dyn U_Geo U_Err - U||_F`.
    pub reconstruction_residual: f64,
    /// `||U_Err(direct) - U_Err(extracted)||_F`, when computed.
    pub cross_difference: Option<f64>,
    /// Dynamic phase per label at the end of the path.
    pub dynamic_phases: Vec<f64>,
}

/// `sum_k exp(-i Phi_k) |k_t><k_t|`.
pub fn u_dyn(frame_t: &SpectralFrame, phases: &[f64]) -> Result<UnitaryMatrix> {
    if phases.len() != frame_t.dim() {
        return Err(Error::DimensionMismatch {
            expected: frame_t.dim(),
            found: phases.len(),
        });
    }
    let v = frame_t.vectors.matrix();
    let d: Vec<C64> = phases.iter().map(|&p| unit_phase(-p)).collect();
    let diag = ComplexMatrix::from_diagonal(&d);
    UnitaryMatrix::new(&(v * &diag) * &v.adjoint())
}

/// `sum_k |k_t><k_0|`.
pub fn u_g1(frame_0: &SpectralFrame, frame_t: &SpectralFrame) -> Result<UnitaryMatrix> {
    frame_0.ensure_compatible(frame_t)?;
    UnitaryMatrix::new(frame_t.vectors.matrix() * &frame_0.vectors.matrix().adjoint())
}

/// `U_G1 U_G2`.
pub fn u_geo(g1: &UnitaryMatrix, g2: &UnitaryMatrix) -> Result<UnitaryMatrix> {
    g1.compose(g2)
}

/// `U_Geo^dag U_Dyn^dag U`.
pub fn u_err_extracted(u_total: &UnitaryMatrix, u_dyn: &UnitaryMatrix, u_geo: &UnitaryMatrix) -> Result<UnitaryMatrix> {
    u_geo.adjoint().compose(&u_dyn.adjoint())?.compose(u_total)
}

/// Frame at `s` and the matrix `M_kl = <k_s| i d/ds |l_s>` (Hermitian).
pub fn connection(field: &FrameField, s: f64, step: f64) -> Result<(SpectralFrame, HermitianMatrix)> {
    let (frame, dv) = field.frame_with_derivative(s, step)?;
    let m = (&frame.vectors.matrix().adjoint() * &dv).scale(C64::new(0.0, 1.0));
    Ok((frame, HermitianMatrix::symmetrized(&m)))
}

/// `sum_{k,l} w_kl M_kl |k_0><l_0|` over the label pairs selected by `keep`.
fn lift(
    frame_0: &SpectralFrame,
    m: &ComplexMatrix,
    phases: Option<&[f64]>,
    keep: impl Fn(usize, usize) -> bool,
) -> ComplexMatrix {
    let n = frame_0.dim();
    let masked = ComplexMatrix::from_fn(n, |k, l| {
        if !keep(frame_0.groups[k], frame_0.groups[l]) {
            return C64::new(0.0, 0.0);
        }
        let f = phases.map_or(C64::new(1.0, 0.0), |p| unit_phase(p[k] - p[l]));
        f * m[(k, l)]
    });
    let v0 = frame_0.vectors.matrix();
    &(v0 * &masked) * &v0.adjoint()
}

/// Block-diagonal generator `-sum_n sum_pq F |n_p^0><n_p| i d |n_q><n_q^0|`.
///
/// `derivative` holds `d|k>/ds` column by column and `phases` the dynamic
/// phase per label at `frame_s`.
pub fn h_g2_operator(
    frame_0: &SpectralFrame,
    frame_s: &SpectralFrame,
    derivative: &ComplexMatrix,
    phases: &[f64],
) -> Result<HermitianMatrix> {
    frame_0.ensure_compatible(frame_s)?;
    let m = (&frame_s.vectors.matrix().adjoint() * derivative).scale(C64::new(0.0, 1.0));
    HermitianMatrix::new(lift(frame_0, &m, Some(phases), |a, b| a == b).scale_real(-1.0))
}

/// Off-block generator `-sum_{n != m} sum_pq F |n_p^0><n_p| i d |m_q><m_q^0|`.
pub fn h_err_operator(
    frame_0: &SpectralFrame,
    frame_s: &SpectralFrame,
    derivative: &ComplexMatrix,
    phases: &[f64],
) -> Result<HermitianMatrix> {
    frame_0.ensure_compatible(frame_s)?;
    let m = (&frame_s.vectors.matrix().adjoint() * derivative).scale(C64::new(0.0, 1.0));
    HermitianMatrix::new(lift(frame_0, &m, Some(phases), |a, b| a != b).scale_real(-1.0))
}

/// Path grid with `steps` intervals split so that every breakpoint is a node.
pub fn path_grid(span: (f64, f64), breakpoints: &[f64], steps: usize) -> Vec<f64> {
    let (a, b) = span;
    if !(b > a) {
        return vec![a];
    }
    let mut cuts = vec![a];
    cuts.extend(breakpoints.iter().copied().filter(|&x| x > a && x < b));
    cuts.push(b);
    cuts.dedup();
    let total = b - a;
    let mut grid = vec![a];
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let count = ((steps as f64 * (hi - lo) / total).round() as usize).max(1);
        for k in 1..count {
            grid.push(lo + (hi - lo) * k as f64 / count as f64);
        }
        grid.push(hi);
    }
    grid
}

/// Grid nodes plus the two Gauss points inside every interval.
fn with_gauss_nodes(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * grid.len());
    out.push(grid[0]);
    for w in grid.windows(2) {
        let h = w[1] - w[0];
        out.push(w[0] + GAUSS2_NODES[0] * h);
        out.push(w[0] + GAUSS2_NODES[1] * h);
        out.push(w[1]);
    }
    out
}

fn derivative_step(grid: &[f64], span: (f64, f64)) -> f64 {
    let min = grid
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|h| *h > 0.0)
        .fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        min / 8.0
    } else {
        (span.1 - span.0).abs().max(1.0) * 1e-4
    }
}

fn check_degenerate_energies(frame: &SpectralFrame) -> Result<()> {
    let scale = frame.energies.iter().fold(1.0f64, |m, e| m.max(e.abs()));
    for p in 0..frame.dim() {
        for q in p + 1..frame.dim() {
            if frame.groups[p] != frame.groups[q] {
                continue;
            }
            let gap = (frame.energies[p] - frame.energies[q]).abs();
            if gap > DEGENERACY_TOL * scale {
                return Err(Error::GeometricCondition {
                    group: frame.groups[p],
                    p,
                    q,
                    at: frame.at,
                    deviation: gap,
                });
            }
        }
    }
    Ok(())
}

/// Cumulative `U_G2` at every point of `points` (ascending, starting at the
/// path start), from `i dU/ds = -A(s) U` with the same-group connection `A`
/// lifted to the initial frame.
///
/// For continuous evolution the energies inside each group must stay
/// degenerate; a split is reported with the offending labels.
pub fn u_g2(scenario: &Scenario, points: &[f64], step: f64) -> Result<Vec<ComplexMatrix>> {
    let field = scenario.field();
    let frame_0 = field.initial();
    let continuous = scenario.pulses().is_none();
    ordered_exponential(field.dim(), points, |s| {
        let (frame, m) = connection(field, s, step)?;
        if continuous {
            check_degenerate_energies(&frame)?;
        }
        HermitianMatrix::new(lift(frame_0, m.matrix(), None, |a, b| a == b).scale_real(-1.0))
    })
}

/// Dynamic phase per label at each of `points` (ascending).
pub fn dynamic_phases_at(scenario: &Scenario, points: &[f64]) -> Result<Vec<Vec<f64>>> {
    if let Some(seq) = scenario.pulses() {
        return Ok(points.iter().map(|&s| seq.phases_before(s)).collect());
    }
    let field = scenario.field();
    let dim = field.dim();
    let (a, _) = field.span();
    let mut acc = vec![0.0; dim];
    let mut last = a;
    let mut out = Vec::with_capacity(points.len());
    for &s in points {
        if s > last {
            for (k, p) in acc.iter_mut().enumerate() {
                let mut failure = None;
                let (v, _) = integrate_adaptive_real(
                    |x| match field.frame(x) {
                        Ok(f) => f.energies[k],
                        Err(e) => {
                            failure.get_or_insert(e);
                            0.0
                        }
                    },
                    last,
                    s,
                    1e-13,
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                *p += v;
            }
            last = s;
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// Error factor from its own path-ordered generator
/// `G = U_G2^dag [sum_{n != m} F_nm |n^0><n| i d |m><m^0|] U_G2`,
/// `dU/ds = i G U`, one fourth-order Magnus step per grid interval.
///
/// `g2` and `phases` must be sampled on `grid` with the interior Gauss
/// points added, as produced for [`decompose`].
pub fn u_err_direct(
    scenario: &Scenario,
    grid: &[f64],
    g2: &[ComplexMatrix],
    phases: &[Vec<f64>],
    step: f64,
) -> Result<UnitaryMatrix> {
    let field = scenario.field();
    let frame_0 = field.initial();
    let dim = field.dim();
    let expected = 3 * (grid.len() - 1) + 1;
    if g2.len() != expected || phases.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: g2.len().min(phases.len()),
        });
    }
    let generator = |s: f64, idx: usize| -> Result<HermitianMatrix> {
        let (_, m) = connection(field, s, step)?;
        let c = lift(frame_0, m.matrix(), Some(&phases[idx]), |a, b| a != b);
        let w = &g2[idx];
        Ok(HermitianMatrix::symmetrized(&(&(&w.adjoint() * &c) * w).scale_real(-1.0)))
    };
    let mut u = ComplexMatrix::identity(dim);
    for (i, pair) in grid.windows(2).enumerate() {
        let h = pair[1] - pair[0];
        let k1 = generator(pair[0] + GAUSS2_NODES[0] * h, 3 * i + 1)?;
        let k2 = generator(pair[0] + GAUSS2_NODES[1] * h, 3 * i + 2)?;
        u = expm_skew(&magnus4_exponent(&k1, &k2, h), 1.0)?.matrix() * &u;
    }
    UnitaryMatrix::new(u)
}

/// Splits `U(T)` into dynamic, geometric and error factors.
///
/// The error factor is extracted from the other two; with
/// `cross_validate` it is also integrated directly and the two must agree.
pub fn decompose(
    scenario: &Scenario,
    evolution: &EvolutionResult,
    settings: &DecompositionSettings,
) -> Result<EvolutionDecomposition> {
    let field = scenario.field();
    let span = field.span();
    let frame_0 = field.initial().clone();
    let frame_t = field.frame(span.1)?;
    let phases_t = evolution.final_phases().to_vec();

    let mut breakpoints = Vec::new();
    if let Some(seq) = scenario.pulses() {
        let report = dyn_phase_condition_check(seq, &frame_0.groups)?;
        if let Some(v) = report.violations.first() {
            return Err(Error::GeometricCondition {
                group: v.group,
                p: v.p,
                q: v.q,
                at: seq.pulses()[v.prefix - 1].at,
                deviation: v.residue,
            });
        }
        breakpoints.extend(seq.pulses().iter().map(|p| p.at));
    }

    let dyn_factor = u_dyn(&frame_t, &phases_t)?;
    let g1 = u_g1(&frame_0, &frame_t)?;
    let grid = path_grid(span, &breakpoints, settings.path_steps.max(1));
    let step = derivative_step(&grid, span);
    let points = if settings.cross_validate {
        with_gauss_nodes(&grid)
    } else {
        grid.clone()
    };
    let g2_path = u_g2(scenario, &points, step)?;
    let g2 = UnitaryMatrix::new(g2_path.last().expect("grid is never empty").clone())?;
    let geo = u_geo(&g1, &g2)?;
    let err = u_err_extracted(&evolution.u_total, &dyn_factor, &geo)?;
    let rebuilt = &(dyn_factor.matrix() * geo.matrix()) * err.matrix();
    let residual = distance(&rebuilt, evolution.u_total.matrix())?;
    if residual > settings.tolerance {
        return Err(Error::Reconstruction {
            residual,
            tolerance: settings.tolerance,
        });
    }

    let (direct, cross) = if !settings.cross_validate {
        (None, None)
    } else if grid.len() < 2 {
        let identity = UnitaryMatrix::identity(field.dim());
        let difference = distance(err.matrix(), identity.matrix())?;
        (Some(identity), Some(difference))
    } else {
        let phases = dynamic_phases_at(scenario, &points)?;
        let direct = u_err_direct(scenario, &grid, &g2_path, &phases, step)?;
        let difference = distance(direct.matrix(), err.matrix())?;
        if difference > settings.cross_tolerance {
            return Err(Error::CrossValidation {
                difference,
                tolerance: settings.cross_tolerance,
                direct: Box::new(direct.into_inner()),
                extracted: Box::new(err.into_inner()),
            });
        }
        (Some(direct), Some(difference))
    };

    Ok(EvolutionDecomposition {
        u_total: evolution.u_total.clone(),
        u_dyn: dyn_factor,
        u_g1: g1,
        u_g2: g2,
        u_geo: geo,
        u_err: err,
        u_err_direct: direct,
        reconstruction_residual: residual,
        cross_difference: cross,
        dynamic_phases: phases_t,
    })
}

/// One sample of a modulation function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModulationSample {
    /// Path parameter.
    pub s: f64,
    /// Position scaled to `[0, 1]` over the sampled window.
    pub x: f64,
    pub value: C64,
}

/// `F_kl(s) = exp(i [Phi_k(s) - Phi_l(s)])` sampled on a window of the path.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulationTrace {
    pub labels: (usize, usize),
    pub window: (f64, f64),
    pub samples: Vec<ModulationSample>,
}

/// Samples the modulation function between labels `k` and `l`.
///
/// Pulse sequences are sampled over the whole path. Continuous evolutions
/// are sampled over one path period (or the whole path when it has none).
pub fn modulation_trace(scenario: &Scenario, labels: (usize, usize), samples: usize) -> Result<ModulationTrace> {
    let field = scenario.field();
    let dim = field.dim();
    if labels.0 >= dim || labels.1 >= dim {
        return Err(Error::InvalidInput(format!("labels {labels:?} out of range for dimension {dim}")));
    }
    let (a, b) = field.span();
    let end = match (scenario.pulses(), field.path().period()) {
        (None, Some(p)) if p > 0.0 => (a + p).min(b),
        _ => b,
    };
    if !(end > a) {
        return Ok(ModulationTrace {
            labels,
            window: (a, a),
            samples: vec![ModulationSample {
                s: a,
                x: 0.0,
                value: C64::new(1.0, 0.0),
            }],
        });
    }
    let count = samples.max(2);
    let points: Vec<f64> = (0..count)
        .map(|i| if i + 1 == count { end } else { a + (end - a) * i as f64 / (count - 1) as f64 })
        .collect();
    let phases = dynamic_phases_at(scenario, &points)?;
    let samples = points
        .iter()
        .zip(&phases)
        .map(|(&s, p)| ModulationSample {
            s,
            x: (s - a) / (end - a),
            value: unit_phase(p[labels.0] - p[labels.1]),
        })
        .collect();
    Ok(ModulationTrace {
        labels,
        window: (a, end),
        samples,
    })
}
