//! One-dimensional energy profiles and their exact integrals.
//!
//! With every atom but one fixed, a weighted sum of hinge potentials becomes a
//! convex piecewise-polynomial function `f(y)` of the remaining variable on
//! `[0, 1]`: affine per piece for the linear hinge, quadratic for the squared
//! hinge. The conditional density of that variable is `exp(-f(y)) / Z`.
//!
//! Affine pieces are integrated in closed form. Quadratic pieces use 32-node
//! Gauss-Legendre quadrature. Everything is accumulated in log space.

use std::sync::OnceLock;

use crate::grounding::Exponent;
use crate::scalar::{log_sum_exp, Real};

/// `z(y) = a + b * y`, the inner expression of a hinge as a function of one
/// variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hinge<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> Hinge<T> {
    pub fn new(a: T, b: T) -> Self {
        Self { a, b }
    }

    #[inline]
    pub fn inner(&self, y: T) -> T {
        self.a + self.b * y
    }

    #[inline]
    pub fn penalty(&self, y: T, exponent: Exponent) -> T {
        exponent.apply(self.inner(y))
    }

    /// Root of the inner expression, if the slope is nonzero.
    pub fn root(&self) -> Option<T> {
        (self.b != T::zero()).then(|| -self.a / self.b)
    }
}

/// `f(y) = intercept + slope * y + curvature * y^2` on `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment<T> {
    pub lo: T,
    pub hi: T,
    pub intercept: T,
    pub slope: T,
    pub curvature: T,
}

impl<T: Real> Segment<T> {
    #[inline]
    pub fn eval(&self, y: T) -> T {
        self.intercept + y * (self.slope + y * self.curvature)
    }

    fn coefficients(&self) -> [T; 3] {
        [self.intercept, self.slope, self.curvature]
    }
}

const MERGE_TOL: f64 = 1e-12;

/// A continuous nonnegative energy on `[0, 1]`, stored as contiguous segments.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseProfile<T> {
    segments: Vec<Segment<T>>,
}

impl<T: Real> PiecewiseProfile<T> {
    /// `f == 0`.
    pub fn zero() -> Self {
        Self {
            segments: vec![Segment {
                lo: T::zero(),
                hi: T::one(),
                intercept: T::zero(),
                slope: T::zero(),
                curvature: T::zero(),
            }],
        }
    }

    /// `f(y) = sum_j w_j * max(a_j + b_j y, 0)^p`.
    pub fn from_hinges<I>(terms: I, exponent: Exponent) -> Self
    where
        I: IntoIterator<Item = (T, Hinge<T>)>,
    {
        let zero = T::zero();
        let one = T::one();
        let mut base = [zero; 3];
        let mut events: Vec<(T, [T; 3], bool)> = Vec::new();
        for (w, h) in terms {
            if w == zero {
                continue;
            }
            let poly = match exponent {
                Exponent::Linear => [w * h.a, w * h.b, zero],
                Exponent::Squared => [
                    w * h.a * h.a,
                    (T::one() + T::one()) * w * h.a * h.b,
                    w * h.b * h.b,
                ],
            };
            let Some(r) = h.root() else {
                if h.a > zero {
                    add(&mut base, &poly, true);
                }
                continue;
            };
            if h.b > zero {
                // active above the root
                if r <= zero {
                    add(&mut base, &poly, true);
                } else if r < one {
                    events.push((r, poly, true));
                }
            } else if r >= one {
                add(&mut base, &poly, true);
            } else if r > zero {
                add(&mut base, &poly, true);
                events.push((r, poly, false));
            }
        }
        events.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite roots"));

        let mut segments = Vec::with_capacity(events.len() + 1);
        let mut lo = zero;
        let mut coef = base;
        let mut i = 0;
        while i < events.len() {
            let r = events[i].0;
            segments.push(segment(lo, r, coef));
            while i < events.len() && events[i].0 == r {
                add(&mut coef, &events[i].1, events[i].2);
                i += 1;
            }
            lo = r;
        }
        segments.push(segment(lo, one, coef));
        let mut profile = Self { segments };
        profile.merge_collinear();
        profile
    }

    fn merge_collinear(&mut self) {
        let tol = T::lit(MERGE_TOL);
        let mut merged: Vec<Segment<T>> = Vec::with_capacity(self.segments.len());
        for seg in self.segments.drain(..) {
            if let Some(last) = merged.last_mut() {
                let same = last
                    .coefficients()
                    .iter()
                    .zip(seg.coefficients().iter())
                    .all(|(x, y)| (*x - *y).abs() <= tol);
                if same {
                    last.hi = seg.hi;
                    continue;
                }
            }
            merged.push(seg);
        }
        self.segments = merged;
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    /// True when no piece has a quadratic term.
    pub fn is_affine(&self) -> bool {
        self.segments.iter().all(|s| s.curvature == T::zero())
    }

    fn locate(&self, y: T) -> &Segment<T> {
        let i = self.segments.partition_point(|s| s.hi < y);
        &self.segments[i.min(self.segments.len() - 1)]
    }

    pub fn eval(&self, y: T) -> T {
        self.locate(y).eval(y)
    }

    /// Largest jump between adjacent pieces at their shared breakpoint.
    pub fn continuity_gap(&self) -> T {
        self.segments
            .windows(2)
            .map(|w| (w[0].eval(w[0].hi) - w[1].eval(w[1].lo)).abs())
            .fold(T::zero(), T::max)
    }

    /// `log of the integral over [0, 1] of exp(-f(y))`.
    pub fn log_partition(&self) -> T {
        let logs: Vec<T> = self.segments.iter().map(segment_log_mass).collect();
        log_sum_exp(&logs)
    }

    /// `E[max(a + b y, 0)^p]` under the density `exp(-f) / Z`.
    pub fn expected_penalty(&self, hinge: Hinge<T>, exponent: Exponent) -> T {
        self.expected_penalty_given(hinge, exponent, self.log_partition())
    }

    /// As [`expected_penalty`](Self::expected_penalty) with a precomputed
    /// `log Z`.
    pub fn expected_penalty_given(&self, hinge: Hinge<T>, exponent: Exponent, log_z: T) -> T {
        let mut total = T::zero();
        for seg in &self.segments {
            let mut cuts = [seg.lo, seg.hi, seg.hi];
            let mut n = 2;
            if let Some(r) = hinge.root() {
                if r > seg.lo && r < seg.hi {
                    cuts = [seg.lo, r, seg.hi];
                    n = 3;
                }
            }
            for k in 0..n - 1 {
                let (lo, hi) = (cuts[k], cuts[k + 1]);
                let mid = (lo + hi) / (T::one() + T::one());
                if hinge.inner(mid) <= T::zero() {
                    continue;
                }
                total = total
                    + if exponent == Exponent::Linear && seg.curvature == T::zero() {
                        affine_moment(seg, hinge, lo, hi, log_z)
                    } else {
                        quadrature(seg, lo, hi, log_z, |y| hinge.penalty(y, exponent))
                    };
            }
        }
        total
    }

    /// Lowest point of `f` on `[0, 1]` as `(argmin, min)`. Ties go to the
    /// smallest `y`, so a flat piece resolves to its lower endpoint.
    pub fn minimize(&self) -> (T, T) {
        let mut candidates: Vec<T> = Vec::with_capacity(2 * self.segments.len() + 1);
        for seg in &self.segments {
            candidates.push(seg.lo);
            if seg.curvature > T::zero() {
                let v = -seg.slope / ((T::one() + T::one()) * seg.curvature);
                if v > seg.lo && v < seg.hi {
                    candidates.push(v);
                }
            }
        }
        candidates.push(T::one());
        let mut best = (candidates[0], self.eval(candidates[0]));
        for &y in &candidates[1..] {
            let v = self.eval(y);
            let tol = T::lit(1e-12) * best.1.abs().max(T::one());
            if v < best.1 - tol {
                best = (y, v);
            }
        }
        best
    }
}

fn add<T: Real>(acc: &mut [T; 3], poly: &[T; 3], plus: bool) {
    for (a, p) in acc.iter_mut().zip(poly) {
        *a = if plus { *a + *p } else { *a - *p };
    }
}

fn segment<T: Real>(lo: T, hi: T, c: [T; 3]) -> Segment<T> {
    Segment {
        lo,
        hi,
        intercept: c[0],
        slope: c[1],
        curvature: c[2],
    }
}

/// `(1 - exp(-x)) / x`, continuous at 0.
fn g0<T: Real>(x: T) -> T {
    if x < T::lit(1e-12) {
        T::one() - x / (T::one() + T::one())
    } else {
        -(-x).exp_m1() / x
    }
}

/// `(1 - exp(-x) (1 + x)) / x^2`, continuous at 0.
fn g1<T: Real>(x: T) -> T {
    if x < T::lit(1e-3) {
        let c = |v: f64| T::lit(v);
        c(0.5)
            + x * (-c(1.0 / 3.0) + x * (c(1.0 / 8.0) + x * (-c(1.0 / 30.0) + x * c(1.0 / 144.0))))
    } else {
        (-(-x).exp_m1() - x * (-x).exp()) / (x * x)
    }
}

fn segment_log_mass<T: Real>(seg: &Segment<T>) -> T {
    let width = seg.hi - seg.lo;
    if width <= T::zero() {
        return T::neg_infinity();
    }
    if seg.curvature == T::zero() {
        let f_lo = seg.eval(seg.lo);
        let f_hi = seg.eval(seg.hi);
        let rise = (f_hi - f_lo).abs();
        -f_lo.min(f_hi) + width.ln() + g0(rise).ln()
    } else {
        let nodes = gauss_legendre();
        let half = width / (T::one() + T::one());
        let mid = seg.lo + half;
        let energies: Vec<T> = nodes
            .iter()
            .map(|&(x, _)| seg.eval(mid + half * T::lit(x)))
            .collect();
        let floor = energies.iter().copied().fold(T::infinity(), T::min);
        let sum: T = nodes
            .iter()
            .zip(&energies)
            .map(|(&(_, w), &e)| T::lit(w) * (floor - e).exp())
            .sum();
        -floor + (half * sum).ln()
    }
}

/// `integral over [lo, hi] of (a + b y) exp(-f(y)) dy / Z` for an affine piece,
/// expanded from the lower-energy end so the exponential decays.
fn affine_moment<T: Real>(seg: &Segment<T>, hinge: Hinge<T>, lo: T, hi: T, log_z: T) -> T {
    let width = hi - lo;
    let (reference, rate, slope) = if seg.slope >= T::zero() {
        (lo, seg.slope, hinge.b)
    } else {
        (hi, -seg.slope, -hinge.b)
    };
    let x = rate * width;
    let i0 = width * g0(x);
    let i1 = width * width * g1(x);
    let scale = (-seg.eval(reference) - log_z).exp();
    scale * (hinge.inner(reference) * i0 + slope * i1)
}

fn quadrature<T: Real, F: Fn(T) -> T>(seg: &Segment<T>, lo: T, hi: T, log_z: T, weight: F) -> T {
    let half = (hi - lo) / (T::one() + T::one());
    let mid = lo + half;
    let sum: T = gauss_legendre()
        .iter()
        .map(|&(x, w)| {
            let y = mid + half * T::lit(x);
            T::lit(w) * weight(y) * (-seg.eval(y) - log_z).exp()
        })
        .sum();
    half * sum
}

const GL_NODES: usize = 32;

/// Nodes and weights of the 32-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_NODES;
        let mut rule = Vec::with_capacity(n);
        for i in 0..n {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
        }
        rule
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn head(w: f64) -> (f64, Hinge<f64>) {
        (w, Hinge::new(1.0, -1.0))
    }

    fn prior(w: f64) -> (f64, Hinge<f64>) {
        (w, Hinge::new(0.0, 1.0))
    }

    #[test]
    fn head_clause_profile() {
        let p = PiecewiseProfile::from_hinges([head(1.0)], Exponent::Linear);
        assert_eq!(p.segments().len(), 1);
        let s = p.segments()[0];
        assert_eq!((s.intercept, s.slope), (1.0, -1.0));
    }

    #[test]
    fn prior_profile() {
        let p = PiecewiseProfile::from_hinges([prior(2.0)], Exponent::Linear);
        assert_eq!(p.segments().len(), 1);
        assert_eq!(
            (p.segments()[0].intercept, p.segments()[0].slope),
            (0.0, 2.0)
        );
    }

    #[test]
    fn head_plus_prior_is_constant() {
        let p = PiecewiseProfile::from_hinges([head(1.0), prior(1.0)], Exponent::Linear);
        for k in 0..=10 {
            let y = k as f64 / 10.0;
            let direct = (1.0 - y) + y;
            assert_abs_diff_eq!(p.eval(y), direct, epsilon = 1e-15);
        }
        assert_eq!(p.segments().len(), 1);
    }

    #[test]
    fn interior_breakpoints() {
        let p = PiecewiseProfile::from_hinges(
            [(1.0, Hinge::new(-0.3, 1.0)), (2.0, Hinge::new(0.6, -1.0))],
            Exponent::Linear,
        );
        assert_eq!(p.segments().len(), 3);
        assert!(p.continuity_gap() < 1e-12);
        for k in 0..=20 {
            let y = k as f64 / 20.0;
            let direct = (y - 0.3).max(0.0) + 2.0 * (0.6 - y).max(0.0);
            assert_abs_diff_eq!(p.eval(y), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_partition() {
        assert_eq!(PiecewiseProfile::<f64>::zero().log_partition(), 0.0);
    }

    #[test]
    fn partition_values() {
        // 1 - e^-1 and (1 - e^-2) / 2
        let p = PiecewiseProfile::from_hinges([head(1.0)], Exponent::Linear);
        assert_abs_diff_eq!(
            p.log_partition().exp(),
            0.632_120_558_828_557_7,
            epsilon = 1e-12
        );
        let p = PiecewiseProfile::from_hinges([prior(2.0)], Exponent::Linear);
        assert_abs_diff_eq!(
            p.log_partition().exp(),
            0.432_332_358_381_693_65,
            epsilon = 1e-12
        );
    }

    #[test]
    fn constant_energy_partition() {
        let p = PiecewiseProfile::from_hinges([(3.0, Hinge::new(1.0, 0.0))], Exponent::Linear);
        assert_abs_diff_eq!(p.log_partition(), -3.0, epsilon = 1e-15);
    }

    #[test]
    fn uniform_expectations() {
        let z = PiecewiseProfile::<f64>::zero();
        assert_abs_diff_eq!(
            z.expected_penalty(Hinge::new(0.0, 1.0), Exponent::Linear),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            z.expected_penalty(Hinge::new(1.0, -1.0), Exponent::Linear),
            0.5,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            z.expected_penalty(Hinge::new(0.0, 1.0), Exponent::Squared),
            1.0 / 3.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn tilted_expectation() {
        let p = PiecewiseProfile::from_hinges([prior(2.0)], Exponent::Linear);
        let e = p.expected_penalty(Hinge::new(0.0, 1.0), Exponent::Linear);
        assert_abs_diff_eq!(e, 0.343_482_357_250_334_3, epsilon = 1e-12);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = gauss_legendre();
        assert_eq!(rule.len(), 32);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert_abs_diff_eq!(total, 2.0, epsilon = 1e-14);
        let x62: f64 = rule.iter().map(|(x, w)| w * x.powi(62)).sum();
        assert_abs_diff_eq!(x62, 2.0 / 63.0, epsilon = 1e-14);
    }

    #[test]
    fn squared_profile_matches_pointwise() {
        let hinges = [(1.5, Hinge::new(-0.2, 1.0)), (0.7, Hinge::new(0.9, -1.0))];
        let p = PiecewiseProfile::from_hinges(hinges, Exponent::Squared);
        assert!(!p.is_affine());
        for k in 0..=16 {
            let y = k as f64 / 16.0;
            let direct: f64 = hinges
                .iter()
                .map(|(w, h)| w * h.penalty(y, Exponent::Squared))
                .sum();
            assert_abs_diff_eq!(p.eval(y), direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn minimize_breaks_ties_low() {
        let flat = PiecewiseProfile::from_hinges([head(1.0), prior(1.0)], Exponent::Linear);
        assert_eq!(flat.minimize().0, 0.0);
        let p = PiecewiseProfile::from_hinges([head(2.0), prior(1.0)], Exponent::Linear);
        assert_eq!(p.minimize(), (1.0, 1.0));
        let q = PiecewiseProfile::from_hinges(
            [(1.0, Hinge::new(-0.5, 1.0)), (1.0, Hinge::new(0.5, -1.0))],
            Exponent::Squared,
        );
        let (y, v) = q.minimize();
        assert_abs_diff_eq!(y, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let p =
            PiecewiseProfile::<f32>::from_hinges([(2.0, Hinge::new(0.0, 1.0))], Exponent::Linear);
        assert!((p.log_partition().exp() - 0.432_332_36).abs() < 1e-6);
        let e = p.expected_penalty(Hinge::new(0.0, 1.0), Exponent::Linear);
        assert!((e - 0.343_482_4).abs() < 1e-6);
    }
}
