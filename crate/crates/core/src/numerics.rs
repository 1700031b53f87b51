//! Quadrature, root finding and ordered exponentials.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::linalg::{expm_skew, ComplexMatrix, HermitianMatrix, C64};

/// Gauss nodes of the two-point rule on `[0, 1]`.
pub const GAUSS2_NODES: [f64; 2] = [
    0.5 - 0.288_675_134_594_812_9,
    0.5 + 0.288_675_134_594_812_9,
];

/// Three-point Gauss-Legendre rule on `[0, 1]` as `(node, weight)`.
pub const GAUSS3: [(f64, f64); 3] = [
    (0.5 - 0.387_298_334_620_741_7, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.5 + 0.387_298_334_620_741_7, 5.0 / 18.0),
];

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// Kronrod 15-point extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &mut impl FnMut(f64) -> C64, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).norm())
}

struct Panel {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of a complex integrand.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate drops below `abs_tol`. Returns the integral and its error bound.
pub fn integrate_adaptive(
    mut f: impl FnMut(f64) -> C64,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<(C64, f64)> {
    const MAX_PANELS: usize = 20_000;
    if a == b {
        return Ok((C64::new(0.0, 0.0), 0.0));
    }
    let (value, error) = gk15(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total_err = error;
    while total_err > abs_tol {
        if heap.len() >= MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:e} above {abs_tol:e} after {MAX_PANELS} panels"
            )));
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel no longer splittable in floating point.
            heap.push(worst);
            break;
        }
        let (lv, le) = gk15(&mut f, worst.a, mid);
        let (rv, re) = gk15(&mut f, mid, worst.b);
        total_err += le + re - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Panel { a: mid, b: worst.b, value: rv, error: re });
        if total_err <= abs_tol {
            break;
        }
        // Recompute occasionally to avoid drift from incremental updates.
        if heap.len() % 64 == 0 {
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let mut panels: Vec<Panel> = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).sum();
    let error = panels.iter().map(|p| p.error).sum();
    Ok((value, error))
}

/// Real-valued convenience wrapper over [`integrate_adaptive`].
pub fn integrate_adaptive_real(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
) -> Result<(f64, f64)> {
    let (v, e) = integrate_adaptive(|x| C64::new(f(x), 0.0), a, b, abs_tol)?;
    Ok((v.re, e))
}

/// Brent's method on a sign-changing bracket.
pub fn brent_root(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoRootInBracket { lo, hi });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    Ok(b)
}

/// Fourth-order Magnus exponent for one step of `i dU/ds = K(s) U`.
///
/// Takes the generator at the two Gauss nodes and returns the Hermitian
/// `Omega` such that the step propagator is `exp(-i Omega)`.
pub fn magnus4_exponent(k1: &HermitianMatrix, k2: &HermitianMatrix, h: f64) -> HermitianMatrix {
    let sum = (k1.matrix() + k2.matrix()).scale_real(0.5 * h);
    let comm = k1
        .matrix()
        .commutator(k2.matrix())
        .scale(C64::new(0.0, 3f64.sqrt() / 12.0 * h * h));
    HermitianMatrix::symmetrized(&(&sum + &comm))
}

/// Ordered exponential of `i dU/ds = K(s) U` sampled at every point of
/// `points` (ascending), starting from `U(points[0]) = I`.
///
/// Each interval is advanced with one fourth-order Magnus step.
pub fn ordered_exponential(
    dim: usize,
    points: &[f64],
    mut generator: impl FnMut(f64) -> Result<HermitianMatrix>,
) -> Result<Vec<ComplexMatrix>> {
    let mut out = Vec::with_capacity(points.len());
    let mut u = ComplexMatrix::identity(dim);
    out.push(u.clone());
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = b - a;
        if h != 0.0 {
            let k1 = generator(a + GAUSS2_NODES[0] * h)?;
            let k2 = generator(a + GAUSS2_NODES[1] * h)?;
            let step = expm_skew(&magnus4_exponent(&k1, &k2, h), 1.0)?;
            u = step.matrix() * &u;
        }
        out.push(u.clone());
    }
    Ok(out)
}

/// `count` evenly spaced points covering `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|k| {
                if k == count - 1 {
                    b
                } else {
                    a + (b - a) * k as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
