//! Slow, simple reference computations. Nothing here shares code with `hlsl`;
//! tests compare the library against these.

/// Adaptive Gauss-Kronrod (7/15) quadrature of `f` over `[a, b]`, first
/// split at `breakpoints` so every piece is smooth.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, breakpoints: &[f64], tol: f64) -> f64 {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| kronrod(f, w[0], w[1], tol, 40))
        .sum()
}

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
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = WGK[7] * f(c);
    let mut g = WG[3] * f(c);
    for i in 0..7 {
        let s = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    let (k, g) = (k * h, g * h);
    if depth == 0 || (k - g).abs() <= tol {
        return k;
    }
    kronrod(f, a, c, tol / 2.0, depth - 1) + kronrod(f, c, b, tol / 2.0, depth - 1)
}

/// AUC by enumerating every positive-negative pair.
pub fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// `weight * max(constant + sum coef * y[var], 0)`.
#[derive(Clone, Debug)]
pub struct GridHinge {
    pub weight: f64,
    pub constant: f64,
    pub coefs: Vec<(usize, f64)>,
}

fn grid_energy(hinges: &[GridHinge], y: &[f64]) -> f64 {
    hinges
        .iter()
        .map(|h| {
            let z = h.coefs.iter().fold(h.constant, |s, &(k, c)| s + c * y[k]);
            h.weight * z.max(0.0)
        })
        .sum()
}

/// Minimum of a sum of linear hinges over the grid `{0, step, ..., 1}^n`
/// (`n <= 3`).
///
/// The first `n - 1` coordinates are enumerated exhaustively. Along the last
/// axis the energy is piecewise linear, so its grid minimum lies at a grid
/// point adjacent to a kink or at an endpoint; only those are evaluated.
pub fn grid_minimum(n: usize, hinges: &[GridHinge], step: f64) -> f64 {
    assert!((1..=3).contains(&n));
    let points = (1.0 / step).round() as usize;
    let coord = |i: usize| i as f64 / points as f64;
    let last = n - 1;
    let mut best = f64::INFINITY;
    let mut y = vec![0.0; n];
    let outer = (points + 1).pow(last as u32);
    for idx in 0..outer {
        let mut rest = idx;
        for slot in y.iter_mut().take(last) {
            *slot = coord(rest % (points + 1));
            rest /= points + 1;
        }
        let mut candidates = vec![0usize, points];
        for h in hinges {
            let Some(&(_, c)) = h.coefs.iter().find(|(k, _)| *k == last) else {
                continue;
            };
            let rest: f64 = h
                .coefs
                .iter()
                .filter(|(k, _)| *k != last)
                .fold(h.constant, |s, &(k, a)| s + a * y[k]);
            let kink = -rest / c * points as f64;
            if kink.is_finite() {
                let lo = kink.floor().clamp(0.0, points as f64) as usize;
                candidates.push(lo);
                candidates.push((lo + 1).min(points));
            }
        }
        for i in candidates {
            y[last] = coord(i);
            best = best.min(grid_energy(hinges, &y));
        }
    }
    best
}

/// A random instance whose exact minimum lies on the `0.001` grid: every
/// hinge touches one or two variables with coefficients `±1`, and constants are
/// multiples of `0.002`, so every vertex of the linear program is a multiple
/// of `0.001`.
pub fn grid_aligned_instance<R: rand::Rng>(rng: &mut R, n: usize) -> Vec<GridHinge> {
    let count = rng.gen_range(2..=8);
    (0..count)
        .map(|_| {
            let first = rng.gen_range(0..n);
            let mut coefs = vec![(first, if rng.gen_bool(0.5) { 1.0 } else { -1.0 })];
            if n > 1 && rng.gen_bool(0.6) {
                let mut second = rng.gen_range(0..n - 1);
                if second >= first {
                    second += 1;
                }
                coefs.push((second, if rng.gen_bool(0.5) { 1.0 } else { -1.0 }));
            }
            GridHinge {
                weight: rng.gen_range(0.1..5.0),
                constant: rng.gen_range(-500i32..=1000) as f64 * 0.002,
                coefs,
            }
        })
        .collect()
}

/// `(log Z, E[phi_k])` of the density `exp(-sum_k w_k phi_k(y))` on `[0, 1]`
/// with `phi_k(y) = max(a_k + b_k y, 0)^power`, by quadrature. Hinges are
/// `(w, a, b)`.
pub fn hinge_moments(hinges: &[(f64, f64, f64)], power: i32) -> (f64, Vec<f64>) {
    let phi = |a: f64, b: f64, y: f64| (a + b * y).max(0.0).powi(power);
    let energy = |y: f64| {
        hinges
            .iter()
            .map(|&(w, a, b)| w * phi(a, b, y))
            .sum::<f64>()
    };
    let kinks: Vec<f64> = hinges
        .iter()
        .filter(|h| h.2 != 0.0)
        .map(|&(_, a, b)| -a / b)
        .filter(|r| *r > 0.0 && *r < 1.0)
        .collect();
    // shift by the smallest energy at a kink or endpoint to avoid underflow
    let floor = kinks
        .iter()
        .chain(&[0.0, 1.0])
        .map(|&x| energy(x))
        .fold(f64::INFINITY, f64::min);
    let density = |y: f64| (floor - energy(y)).exp();
    let mass = integrate(&density, 0.0, 1.0, &kinks, 1e-13);
    let moments = hinges
        .iter()
        .map(|&(_, a, b)| {
            integrate(&|y: f64| phi(a, b, y) * density(y), 0.0, 1.0, &kinks, 1e-13) / mass
        })
        .collect();
    (mass.ln() - floor, moments)
}

/// Central finite difference of `f` at `x`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}
