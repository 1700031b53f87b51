//! Time-ordered propagators for continuous drives and instantaneous pulse
//! sequences, together with the accumulated dynamic phases.

use std::f64::consts::TAU;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hamiltonian::{FrameField, HamiltonianModel, ParameterPath, PolylinePath};
use crate::linalg::{distance, expm_skew, unit_phase, ComplexMatrix, UnitaryMatrix};
use crate::numerics::{magnus4_exponent, GAUSS2_NODES, GAUSS3};

/// Anchor frames laid down along a path for models without an analytic gauge.
pub const DEFAULT_ANCHORS: usize = 1024;

/// Step control for [`propagate_continuous`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorSettings {
    /// Slices per characteristic period of the path (or per whole span when
    /// the path has no period).
    pub slices_per_period: usize,
    /// Frobenius tolerance between a run and the run with twice the slices.
    pub tolerance: f64,
    /// How many times the slice count may be doubled before giving up.
    pub max_doublings: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            slices_per_period: 256,
            tolerance: 1e-8,
            max_doublings: 6,
        }
    }
}

/// One instantaneous pulse `P = sum_k exp(-i theta_k) |k><k|` in the
/// eigenframe at `params`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pulse {
    /// Position on the path parameter axis.
    pub at: f64,
    /// Parameter vector `R_mu`.
    pub params: Vec<f64>,
    /// Phase `theta_k` for every eigenlabel `k`.
    pub phases: Vec<f64>,
}

/// Ordered instantaneous pulses on a path, with zero Hamiltonian in between.
///
/// The path through the pulse points interpolates parameters linearly and is
/// pinned to explicit start and end points.
#[derive(Clone, Debug, PartialEq)]
pub struct PulseSequence {
    start: (f64, Vec<f64>),
    end: (f64, Vec<f64>),
    pulses: Vec<Pulse>,
}

impl PulseSequence {
    pub fn new(start: (f64, Vec<f64>), end: (f64, Vec<f64>), pulses: Vec<Pulse>) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::InvalidInput("pulse sequence is empty".into()));
        }
        if !(end.0 >= start.0) {
            return Err(Error::InvalidInput("pulse sequence end precedes start".into()));
        }
        let mut last = start.0;
        for p in &pulses {
            if !(p.at >= last && p.at <= end.0) {
                return Err(Error::InvalidInput(format!(
                    "pulse at {} is out of order or outside [{}, {}]",
                    p.at, start.0, end.0
                )));
            }
            if p.params.len() != start.1.len() {
                return Err(Error::DimensionMismatch {
                    expected: start.1.len(),
                    found: p.params.len(),
                });
            }
            if p.phases.iter().chain(&p.params).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
            last = p.at;
        }
        Ok(Self { start, end, pulses })
    }

    pub fn pulses(&self) -> &[Pulse] {
        &self.pulses
    }

    pub fn span(&self) -> (f64, f64) {
        (self.start.0, self.end.0)
    }

    /// Piecewise-linear path through start, pulse points and end.
    pub fn path(&self) -> Result<PolylinePath> {
        let mut knots = vec![self.start.clone()];
        knots.extend(self.pulses.iter().map(|p| (p.at, p.params.clone())));
        knots.push(self.end.clone());
        PolylinePath::new(knots)
    }

    /// Checks that every pulse carries one phase per eigenlabel.
    pub fn validate(&self, labels: usize) -> Result<()> {
        for (i, p) in self.pulses.iter().enumerate() {
            if p.phases.len() != labels {
                return Err(Error::MissingPhaseLabel {
                    pulse: i,
                    expected: labels,
                    found: p.phases.len(),
                });
            }
        }
        Ok(())
    }

    /// Accumulated phase per label from every pulse strictly before `s`.
    pub fn phases_before(&self, s: f64) -> Vec<f64> {
        let n = self.pulses[0].phases.len();
        let mut acc = vec![0.0; n];
        for p in self.pulses.iter().take_while(|p| p.at < s) {
            for (a, t) in acc.iter_mut().zip(&p.phases) {
                *a += t;
            }
        }
        acc
    }

    /// Accumulated phase per label over the whole sequence.
    pub fn total_phases(&self) -> Vec<f64> {
        let n = self.pulses[0].phases.len();
        let mut acc = vec![0.0; n];
        for p in &self.pulses {
            for (a, t) in acc.iter_mut().zip(&p.phases) {
                *a += t;
            }
        }
        acc
    }
}

/// Propagator at the end of a path and the dynamic phases along the way.
#[derive(Clone, Debug)]
pub struct EvolutionResult {
    pub u_total: UnitaryMatrix,
    /// Slice boundaries (continuous) or pulse positions preceded by the start.
    pub checkpoints: Vec<f64>,
    /// `int E_k ds` per label at every checkpoint; zero at the first one.
    pub dynamic_phase_integrals: Vec<Vec<f64>>,
    /// Slices used by the accepted run (zero for pulse sequences).
    pub slices: usize,
    /// Frobenius difference to the run with half the slices.
    pub self_difference: f64,
}

impl EvolutionResult {
    /// Dynamic phases at the last checkpoint.
    pub fn final_phases(&self) -> &[f64] {
        self.dynamic_phase_integrals
            .last()
            .expect("results always carry the initial checkpoint")
    }
}

fn slice_count(path: &dyn ParameterPath, per_period: usize) -> usize {
    let (a, b) = path.span();
    let periods = match path.period() {
        Some(p) if p > 0.0 => (b - a) / p,
        _ => 1.0,
    };
    ((per_period as f64 * periods).ceil() as usize).max(16)
}

struct Pass {
    u: ComplexMatrix,
    checkpoints: Vec<f64>,
    phases: Vec<Vec<f64>>,
}

fn run_slices(field: &FrameField, slices: usize) -> Result<Pass> {
    let model = field.model().as_ref();
    let path = field.path().as_ref();
    let (a, b) = path.span();
    let dim = model.dim();
    let hamiltonian = |s: f64| model.hamiltonian(&path.point(s));

    let mut u = ComplexMatrix::identity(dim);
    let mut acc = vec![0.0; dim];
    let mut checkpoints = Vec::with_capacity(slices + 1);
    let mut phases = Vec::with_capacity(slices + 1);
    checkpoints.push(a);
    phases.push(acc.clone());
    let node = |k: usize| a + (b - a) * k as f64 / slices as f64;
    for k in 0..slices {
        let (s0, s1) = (node(k), node(k + 1));
        let h = s1 - s0;
        let k1 = hamiltonian(s0 + GAUSS2_NODES[0] * h);
        let k2 = hamiltonian(s0 + GAUSS2_NODES[1] * h);
        let step = expm_skew(&magnus4_exponent(&k1, &k2, h), 1.0)?;
        u = step.matrix() * &u;
        for (x, w) in GAUSS3 {
            let f = field.frame(s0 + x * h)?;
            for (p, e) in acc.iter_mut().zip(&f.energies) {
                *p += w * h * e;
            }
        }
        checkpoints.push(s1);
        phases.push(acc.clone());
    }
    Ok(Pass {
        u,
        checkpoints,
        phases,
    })
}

/// Propagator of `i dU/ds = H(R(s)) U` over the whole path.
///
/// Each slice is a fourth-order Magnus step built from `H` at the two Gauss
/// points, so every step is exactly unitary. The slice count starts at
/// `slices_per_period` per path period and is doubled until two successive
/// runs agree to `tolerance` in Frobenius norm. Dynamic phases use
/// three-point Gauss quadrature of the tracked energies on every slice.
pub fn propagate_continuous(field: &FrameField, settings: &IntegratorSettings) -> Result<EvolutionResult> {
    if settings.slices_per_period < 16 {
        return Err(Error::InvalidInput(format!(
            "slices_per_period = {} is below the minimum of 16",
            settings.slices_per_period
        )));
    }
    let mut slices = slice_count(field.path().as_ref(), settings.slices_per_period);
    let mut coarse = run_slices(field, slices)?;
    for doubling in 0..=settings.max_doublings {
        let fine = run_slices(field, 2 * slices)?;
        let difference = distance(&coarse.u, &fine.u)?;
        if difference <= settings.tolerance {
            return Ok(EvolutionResult {
                u_total: UnitaryMatrix::new(fine.u)?,
                checkpoints: fine.checkpoints,
                dynamic_phase_integrals: fine.phases,
                slices: 2 * slices,
                self_difference: difference,
            });
        }
        if doubling == settings.max_doublings {
            return Err(Error::StepDoubling {
                slices,
                difference,
                tolerance: settings.tolerance,
                coarse: Box::new(coarse.u),
                fine: Box::new(fine.u),
            });
        }
        slices *= 2;
        coarse = fine;
    }
    unreachable!("the doubling loop returns or fails before running out")
}

/// The unitary `sum_k exp(-i theta_k) |k><k|` of one pulse in the given frame.
pub fn pulse_unitary(frame: &crate::hamiltonian::SpectralFrame, phases: &[f64]) -> Result<UnitaryMatrix> {
    if phases.len() != frame.dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.dim(),
            found: phases.len(),
        });
    }
    let n = frame.dim();
    let mut m = ComplexMatrix::zeros(n);
    for (k, &theta) in phases.iter().enumerate() {
        let v = frame.vector(k);
        let z = unit_phase(-theta);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += z * v[i] * v[j].conj();
            }
        }
    }
    UnitaryMatrix::new(m)
}

/// `U = P(R_N) ... P(R_2) P(R_1)` with zero Hamiltonian between pulses.
///
/// The frame at each pulse comes from `field`, which must be laid along the
/// sequence path so that labels match the phase tables.
pub fn propagate_pulses(field: &FrameField, seq: &PulseSequence) -> Result<EvolutionResult> {
    let dim = field.dim();
    seq.validate(dim)?;
    let mut u = ComplexMatrix::identity(dim);
    let mut acc = vec![0.0; dim];
    let mut checkpoints = vec![seq.span().0];
    let mut phases = vec![acc.clone()];
    for pulse in seq.pulses() {
        let frame = field.frame(pulse.at)?;
        u = pulse_unitary(&frame, &pulse.phases)?.matrix() * &u;
        for (a, t) in acc.iter_mut().zip(&pulse.phases) {
            *a += t;
        }
        checkpoints.push(pulse.at);
        phases.push(acc.clone());
    }
    Ok(EvolutionResult {
        u_total: UnitaryMatrix::new(u)?,
        checkpoints,
        dynamic_phase_integrals: phases,
        slices: 0,
        self_difference: 0.0,
    })
}

/// A same-group label pair whose accumulated phase difference leaves `2 pi Z`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseViolation {
    /// Number of pulses in the offending prefix (1-based).
    pub prefix: usize,
    pub group: usize,
    pub p: usize,
    pub q: usize,
    /// Distance of the phase difference from the nearest multiple of `2 pi`.
    pub residue: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConditionReport {
    pub satisfied: bool,
    pub violations: Vec<PhaseViolation>,
}

/// Checks that within every level group the prefix sums of pulse phases
/// differ by multiples of `2 pi` after every pulse.
///
/// `groups[k]` is the group of eigenlabel `k`.
pub fn dyn_phase_condition_check(seq: &PulseSequence, groups: &[usize]) -> Result<PhaseConditionReport> {
    seq.validate(groups.len())?;
    let mut acc = vec![0.0; groups.len()];
    let mut violations = Vec::new();
    for (i, pulse) in seq.pulses().iter().enumerate() {
        for (a, t) in acc.iter_mut().zip(&pulse.phases) {
            *a += t;
        }
        for p in 0..groups.len() {
            for q in p + 1..groups.len() {
                if groups[p] != groups[q] {
                    continue;
                }
                let diff = acc[p] - acc[q];
                let residue = (diff - TAU * (diff / TAU).round()).abs();
                if residue > 1e-9 * diff.abs().max(1.0) {
                    violations.push(PhaseViolation {
                        prefix: i + 1,
                        group: groups[p],
                        p,
                        q,
                        residue,
                    });
                }
            }
        }
    }
    Ok(PhaseConditionReport {
        satisfied: violations.is_empty(),
        violations,
    })
}

/// A model on a path, optionally driven by instantaneous pulses instead of
/// its own Hamiltonian.
#[derive(Clone, Debug)]
pub struct Scenario {
    field: FrameField,
    pulses: Option<PulseSequence>,
}

impl Scenario {
    /// Continuous evolution under `H(R(s))`.
    pub fn continuous(model: Arc<dyn HamiltonianModel>, path: Arc<dyn ParameterPath>) -> Result<Self> {
        Ok(Self {
            field: FrameField::new(model, path, DEFAULT_ANCHORS)?,
            pulses: None,
        })
    }

    /// Pulsed evolution along the interpolated path of `seq`.
    pub fn pulsed(model: Arc<dyn HamiltonianModel>, seq: PulseSequence) -> Result<Self> {
        seq.validate(model.dim())?;
        let path: Arc<dyn ParameterPath> = Arc::new(seq.path()?);
        Ok(Self {
            field: FrameField::new(model, path, DEFAULT_ANCHORS)?,
            pulses: Some(seq),
        })
    }

    pub fn field(&self) -> &FrameField {
        &self.field
    }

    pub fn pulses(&self) -> Option<&PulseSequence> {
        self.pulses.as_ref()
    }

    pub fn span(&self) -> (f64, f64) {
        self.field.span()
    }

    pub fn propagate(&self, settings: &IntegratorSettings) -> Result<EvolutionResult> {
        match &self.pulses {
            Some(seq) => propagate_pulses(&self.field, seq),
            None => propagate_continuous(&self.field, settings),
        }
    }
}
