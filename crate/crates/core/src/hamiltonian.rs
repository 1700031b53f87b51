//! Parameter paths, Hamiltonian models and labeled instantaneous eigenframes.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{
    eig_hermitian, inner, pauli, polar_unitary, ComplexMatrix, HermitianMatrix, UnitaryMatrix, C64,
};

/// Eigenvalues closer than this (relative to `max(1, ||H||_F)`) share a level group.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Minimum overlap weight for a label to be carried onto a new eigenvector.
const TRACKING_MIN_WEIGHT: f64 = 0.5;

/// A curve `s -> R(s)` through parameter space.
///
/// `s` is time for continuous drives and the sampled coordinate itself for
/// pulse sequences.
pub trait ParameterPath: Send + Sync {
    /// `(s_start, s_end)` with `s_end >= s_start`.
    fn span(&self) -> (f64, f64);

    fn point(&self, s: f64) -> Vec<f64>;

    /// `dR/ds`; central differences unless the path knows better.
    fn velocity(&self, s: f64) -> Vec<f64> {
        let (a, b) = self.span();
        let h = 1e-6 * (b - a).abs().max(1.0);
        let plus = self.point(s + h);
        let minus = self.point(s - h);
        plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect()
    }

    /// Characteristic period used to size integration steps.
    fn period(&self) -> Option<f64> {
        None
    }
}

type PointFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// A path given by closures for the point and (optionally) its velocity.
#[derive(Clone)]
pub struct FnPath {
    span: (f64, f64),
    point: Arc<PointFn>,
    velocity: Option<Arc<PointFn>>,
    period: Option<f64>,
}

impl FnPath {
    pub fn new(
        start: f64,
        end: f64,
        point: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(end >= start) || !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidInput(format!("path span [{start}, {end}] is not ordered")));
        }
        Ok(Self {
            span: (start, end),
            point: Arc::new(point),
            velocity: None,
            period: None,
        })
    }

    pub fn with_velocity(mut self, v: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.velocity = Some(Arc::new(v));
        self
    }

    pub fn with_period(mut self, period: f64) -> Self {
        self.period = Some(period);
        self
    }
}

impl ParameterPath for FnPath {
    fn span(&self) -> (f64, f64) {
        self.span
    }

    fn point(&self, s: f64) -> Vec<f64> {
        (self.point)(s)
    }

    fn velocity(&self, s: f64) -> Vec<f64> {
        match &self.velocity {
            Some(v) => v(s),
            None => {
                let h = 1e-6 * (self.span.1 - self.span.0).abs().max(1.0);
                let p = (self.point)(s + h);
                let m = (self.point)(s - h);
                p.iter().zip(&m).map(|(p, m)| (p - m) / (2.0 * h)).collect()
            }
        }
    }

    fn period(&self) -> Option<f64> {
        self.period
    }
}

impl fmt::Debug for FnPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPath")
            .field("span", &self.span)
            .field("period", &self.period)
            .finish()
    }
}

/// Piecewise-linear interpolation through knots `(s_k, R_k)`.
///
/// Evaluation outside the knot range extends the first or last segment.
#[derive(Clone, Debug)]
pub struct PolylinePath {
    knots: Vec<(f64, Vec<f64>)>,
}

impl PolylinePath {
    pub fn new(knots: Vec<(f64, Vec<f64>)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidInput("polyline needs at least one knot".into()));
        }
        let width = knots[0].1.len();
        let mut merged: Vec<(f64, Vec<f64>)> = Vec::with_capacity(knots.len());
        for knot in knots {
            match merged.last() {
                Some(last) if last.0 == knot.0 => {
                    if last.1 != knot.1 {
                        return Err(Error::InvalidInput(format!(
                            "polyline jumps at s = {}",
                            knot.0
                        )));
                    }
                }
                _ => merged.push(knot),
            }
        }
        let knots = merged;
        for w in knots.windows(2) {
            if !(w[1].0 >= w[0].0) {
                return Err(Error::InvalidInput("polyline knots must be ordered".into()));
            }
            if w[1].1.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: w[1].1.len(),
                });
            }
        }
        Ok(Self { knots })
    }

    pub fn knots(&self) -> &[(f64, Vec<f64>)] {
        &self.knots
    }

    fn segment(&self, s: f64) -> usize {
        let n = self.knots.len();
        if n < 2 {
            return 0;
        }
        let idx = self.knots.partition_point(|(k, _)| *k <= s);
        idx.clamp(1, n - 1) - 1
    }
}

impl ParameterPath for PolylinePath {
    fn span(&self) -> (f64, f64) {
        (self.knots[0].0, self.knots[self.knots.len() - 1].0)
    }

    fn point(&self, s: f64) -> Vec<f64> {
        if self.knots.len() == 1 {
            return self.knots[0].1.clone();
        }
        let i = self.segment(s);
        let (s0, r0) = &self.knots[i];
        let (s1, r1) = &self.knots[i + 1];
        if s1 == s0 {
            return r1.clone();
        }
        let x = (s - s0) / (s1 - s0);
        r0.iter().zip(r1).map(|(a, b)| a + (b - a) * x).collect()
    }

    fn velocity(&self, s: f64) -> Vec<f64> {
        if self.knots.len() == 1 {
            return vec![0.0; self.knots[0].1.len()];
        }
        let i = self.segment(s);
        let (s0, r0) = &self.knots[i];
        let (s1, r1) = &self.knots[i + 1];
        if s1 == s0 {
            return vec![0.0; r0.len()];
        }
        r0.iter().zip(r1).map(|(a, b)| (b - a) / (s1 - s0)).collect()
    }
}

/// A Hamiltonian `H(R)` on a fixed finite-dimensional space.
pub trait HamiltonianModel: Send + Sync {
    fn dim(&self) -> usize;

    fn hamiltonian(&self, r: &[f64]) -> HermitianMatrix;

    /// Closed-form eigenframe in a fixed gauge, if the model has one.
    fn analytic_frame(&self, _r: &[f64]) -> Option<SpectralFrame> {
        None
    }

    /// Group label `n` for each eigenlabel, when fixed by the model rather
    /// than by degeneracy of the first frame.
    fn level_groups(&self) -> Option<Vec<usize>> {
        None
    }
}

/// Spin-1/2 in a field `B(t) n(theta, phi)`:
/// `H = (B/2) [sigma_x sin(theta) cos(phi) + sigma_y sin(theta) sin(phi) + sigma_z cos(theta)]`.
///
/// Parameter vector is `R = (B, phi)`; the polar angle is fixed. Labels are
/// `0 = +` (energy `+B/2`) and `1 = -` (energy `-B/2`), tied to the field
/// direction so they survive sign changes of `B`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinHalfFieldModel {
    pub theta: f64,
}

impl SpinHalfFieldModel {
    pub fn new(theta: f64) -> Self {
        Self { theta }
    }

    /// Unit field direction at azimuth `phi`.
    pub fn direction(&self, phi: f64) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        [st * phi.cos(), st * phi.sin(), ct]
    }

    /// `sigma . n(theta, phi)`
    pub fn sigma_along(&self, phi: f64) -> ComplexMatrix {
        let n = self.direction(phi);
        let [sx, sy, sz] = pauli();
        &(&sx.scale_real(n[0]) + &sy.scale_real(n[1])) + &sz.scale_real(n[2])
    }
}

impl HamiltonianModel for SpinHalfFieldModel {
    fn dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, r: &[f64]) -> HermitianMatrix {
        HermitianMatrix::symmetrized(&self.sigma_along(r[1]).scale_real(0.5 * r[0]))
    }

    fn analytic_frame(&self, r: &[f64]) -> Option<SpectralFrame> {
        let mut frame = analytic_spin_frame(self.theta, r[1]);
        frame.energies = vec![0.5 * r[0], -0.5 * r[0]];
        Some(frame)
    }

    fn level_groups(&self) -> Option<Vec<usize>> {
        Some(vec![0, 1])
    }
}

/// Labeled instantaneous eigenbasis at one point of a path.
#[derive(Clone, Debug)]
pub struct SpectralFrame {
    /// Path parameter the frame belongs to.
    pub at: f64,
    /// `E_{n,j}` per eigenlabel.
    pub energies: Vec<f64>,
    /// Column `k` is `|n_j>` for eigenlabel `k`.
    pub vectors: UnitaryMatrix,
    /// Group `n` of each eigenlabel.
    pub groups: Vec<usize>,
}

impl SpectralFrame {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.matrix().column(k)
    }

    /// `(n, j)` for every eigenlabel, `j` counting within the group.
    pub fn labels(&self) -> Vec<(usize, usize)> {
        let mut seen = std::collections::HashMap::new();
        self.groups
            .iter()
            .map(|&g| {
                let j = seen.entry(g).or_insert(0usize);
                let out = (g, *j);
                *j += 1;
                out
            })
            .collect()
    }

    pub fn group_count(&self) -> usize {
        self.groups.iter().copied().max().map_or(0, |g| g + 1)
    }

    fn check_compatible(&self, other: &SpectralFrame) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        if self.groups != other.groups {
            return Err(Error::InvalidInput("frames carry different eigenlabel groups".into()));
        }
        Ok(())
    }

    pub(crate) fn ensure_compatible(&self, other: &SpectralFrame) -> Result<()> {
        self.check_compatible(other)
    }
}

/// Eigenvectors of the spin-1/2 field direction in the half-angle gauge:
/// `|+> = cos(theta/2) e^{-i phi/2} |up> + sin(theta/2) e^{i phi/2} |down>`,
/// `|-> = -sin(theta/2) e^{-i phi/2} |up> + cos(theta/2) e^{i phi/2} |down>`.
///
/// `phi` is used unwrapped, so the frame is 4 pi periodic. Energies are set
/// for a unit field.
pub fn analytic_spin_frame(theta: f64, phi: f64) -> SpectralFrame {
    let (s, c) = (0.5 * theta).sin_cos();
    let em = C64::from_polar(1.0, -0.5 * phi);
    let ep = C64::from_polar(1.0, 0.5 * phi);
    let plus = vec![em * c, ep * s];
    let minus = vec![-em * s, ep * c];
    SpectralFrame {
        at: phi,
        energies: vec![0.5, -0.5],
        vectors: UnitaryMatrix::new(ComplexMatrix::from_columns(&[plus, minus]))
            .expect("half-angle frame is orthonormal"),
        groups: vec![0, 1],
    }
}

fn degeneracy_clusters(values: &[f64], scale: f64) -> Vec<Vec<usize>> {
    let tol = DEGENERACY_TOL * scale.max(1.0);
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (k, &v) in values.iter().enumerate() {
        match clusters.last_mut() {
            Some(last) if (v - values[*last.last().unwrap()]).abs() < tol => last.push(k),
            _ => clusters.push(vec![k]),
        }
    }
    clusters
}

/// Eigenframe of `H(R(s))` computed numerically.
///
/// Without `prev`, labels follow ascending energy and groups come from the
/// model or from degeneracy. With `prev`, each degenerate cluster of the new
/// spectrum inherits the labels whose vectors overlap it most, and the new
/// vectors are rotated inside the cluster so that `<prev_k|new_k>` forms a
/// positive Hermitian block (parallel transport). Labels therefore follow
/// continuity rather than energy order and pass through level crossings.
pub fn spectral_frame_at(
    model: &dyn HamiltonianModel,
    path: &dyn ParameterPath,
    s: f64,
    prev: Option<&SpectralFrame>,
) -> Result<SpectralFrame> {
    let h = model.hamiltonian(&path.point(s));
    let scale = h.matrix().frobenius_norm();
    let eig = eig_hermitian(&h)?;
    let n = h.dim();
    let clusters = degeneracy_clusters(&eig.values, scale);

    let Some(prev) = prev else {
        let groups = match model.level_groups() {
            Some(g) if g.len() == n => g,
            _ => {
                let mut g = vec![0; n];
                for (gi, cl) in clusters.iter().enumerate() {
                    for &k in cl {
                        g[k] = gi;
                    }
                }
                g
            }
        };
        return Ok(SpectralFrame {
            at: s,
            energies: eig.values,
            vectors: eig.vectors,
            groups,
        });
    };

    if prev.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: prev.dim(),
            found: n,
        });
    }
    let v = eig.vectors.matrix();
    let prev_cols: Vec<Vec<C64>> = (0..n).map(|k| prev.vector(k)).collect();
    let mut assigned = vec![false; n];
    let mut new_cols: Vec<Option<Vec<C64>>> = vec![None; n];

    for cluster in &clusters {
        let basis: Vec<Vec<C64>> = cluster.iter().map(|&l| v.column(l)).collect();
        // weight of each previous label inside this cluster's eigenspace
        let mut weights: Vec<(usize, f64)> = (0..n)
            .filter(|k| !assigned[*k])
            .map(|k| {
                let w: f64 = basis.iter().map(|b| inner(b, &prev_cols[k]).norm_sqr()).sum();
                (k, w)
            })
            .collect();
        weights.sort_by(|a, b| b.1.total_cmp(&a.1));
        let picked: Vec<usize> = weights.iter().take(cluster.len()).map(|(k, _)| *k).collect();
        for (&k, &(_, w)) in picked.iter().zip(&weights) {
            if w < TRACKING_MIN_WEIGHT {
                return Err(Error::LabelAmbiguity { at: s, label: k, weight: w });
            }
        }
        // M_{ab} = <basis_a | prev_{picked_b}>, new = basis * polar(M)
        let d = cluster.len();
        let m = ComplexMatrix::from_fn(d, |a, b| inner(&basis[a], &prev_cols[picked[b]]));
        let w = polar_unitary(&m)?;
        for (b, &k) in picked.iter().enumerate() {
            let col: Vec<C64> = (0..n)
                .map(|i| (0..d).map(|a| basis[a][i] * w[(a, b)]).sum())
                .collect();
            new_cols[k] = Some(col);
            assigned[k] = true;
        }
    }

    let cols: Vec<Vec<C64>> = new_cols
        .into_iter()
        .enumerate()
        .map(|(k, c)| {
            c.ok_or(Error::LabelAmbiguity {
                at: s,
                label: k,
                weight: 0.0,
            })
        })
        .collect::<Result<_>>()?;
    let energies = cols.iter().map(|c| h.expectation(c)).collect();
    Ok(SpectralFrame {
        at: s,
        energies,
        vectors: UnitaryMatrix::new(ComplexMatrix::from_columns(&cols))?,
        groups: prev.groups.clone(),
    })
}

/// Frame in the model's analytic gauge when it has one, otherwise the
/// numerically tracked frame.
pub fn frame_at(
    model: &dyn HamiltonianModel,
    path: &dyn ParameterPath,
    s: f64,
    prev: Option<&SpectralFrame>,
) -> Result<SpectralFrame> {
    match model.analytic_frame(&path.point(s)) {
        Some(mut f) => {
            f.at = s;
            Ok(f)
        }
        None => spectral_frame_at(model, path, s, prev),
    }
}

/// Gauge-consistent eigenframes anywhere on a path.
///
/// Models with an analytic gauge are evaluated directly. Otherwise a chain of
/// anchor frames is transported along a uniform grid once, and any other
/// point is aligned to its nearest anchor on the left.
#[derive(Clone)]
pub struct FrameField {
    model: Arc<dyn HamiltonianModel>,
    path: Arc<dyn ParameterPath>,
    anchors: Vec<SpectralFrame>,
    anchor_step: f64,
}

impl FrameField {
    pub fn new(
        model: Arc<dyn HamiltonianModel>,
        path: Arc<dyn ParameterPath>,
        anchor_count: usize,
    ) -> Result<Self> {
        let (a, b) = path.span();
        let first = frame_at(model.as_ref(), path.as_ref(), a, None)?;
        let analytic = model.analytic_frame(&path.point(a)).is_some();
        let mut anchors = vec![first];
        let count = anchor_count.max(1);
        let anchor_step = (b - a) / count as f64;
        if !analytic && b > a {
            for k in 1..=count {
                let s = if k == count { b } else { a + anchor_step * k as f64 };
                let next = spectral_frame_at(model.as_ref(), path.as_ref(), s, anchors.last())?;
                anchors.push(next);
            }
        }
        Ok(Self {
            model,
            path,
            anchors,
            anchor_step,
        })
    }

    pub fn model(&self) -> &Arc<dyn HamiltonianModel> {
        &self.model
    }

    pub fn path(&self) -> &Arc<dyn ParameterPath> {
        &self.path
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn span(&self) -> (f64, f64) {
        self.path.span()
    }

    pub fn is_analytic(&self) -> bool {
        self.anchors.len() == 1
    }

    /// Frame at the start of the path; defines the `|n^{R_0}>` basis.
    pub fn initial(&self) -> &SpectralFrame {
        &self.anchors[0]
    }

    fn anchor_for(&self, s: f64) -> &SpectralFrame {
        let (a, _) = self.path.span();
        if self.anchor_step <= 0.0 {
            return &self.anchors[0];
        }
        let k = ((s - a) / self.anchor_step).floor();
        let k = if k.is_finite() { k.max(0.0) as usize } else { 0 };
        &self.anchors[k.min(self.anchors.len() - 1)]
    }

    pub fn frame(&self, s: f64) -> Result<SpectralFrame> {
        if self.is_analytic() {
            return frame_at(self.model.as_ref(), self.path.as_ref(), s, None);
        }
        let anchor = self.anchor_for(s);
        if anchor.at == s {
            return Ok(anchor.clone());
        }
        spectral_frame_at(self.model.as_ref(), self.path.as_ref(), s, Some(anchor))
    }

    /// Frame at `s` together with `d|n_j>/ds` for every label, by Richardson
    /// extrapolated central differences with step `h`.
    pub fn frame_with_derivative(&self, s: f64, h: f64) -> Result<(SpectralFrame, ComplexMatrix)> {
        if !(h > 0.0) || s + h == s {
            return Err(Error::DerivativeStep { step: h, at: s });
        }
        let f0 = self.frame(s)?;
        let aligned = |x: f64| -> Result<ComplexMatrix> {
            let f = if self.is_analytic() {
                frame_at(self.model.as_ref(), self.path.as_ref(), x, None)?
            } else {
                spectral_frame_at(self.model.as_ref(), self.path.as_ref(), x, Some(&f0))?
            };
            Ok(f.vectors.into_inner())
        };
        let central = |step: f64| -> Result<ComplexMatrix> {
            let p = aligned(s + step)?;
            let m = aligned(s - step)?;
            Ok((&p - &m).scale_real(1.0 / (2.0 * step)))
        };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        let d = (&fine.scale_real(4.0) - &coarse).scale_real(1.0 / 3.0);
        Ok((f0, d))
    }
}

impl fmt::Debug for FrameField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameField")
            .field("dim", &self.dim())
            .field("span", &self.span())
            .field("anchors", &self.anchors.len())
            .finish()
    }
}
