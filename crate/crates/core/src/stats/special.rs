//! Special functions backing the F and studentized-range distributions.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::{Mutex, OnceLock};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper tail `P(F > f)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    incomplete_beta(d2 / (d2 + d1 * f), d2 / 2.0, d1 / 2.0).clamp(0.0, 1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

const GL_POINTS: usize = 20;

/// Gauss–Legendre nodes and weights on [−1, 1], found by Newton's method
/// on the Legendre polynomial.
fn legendre_rule() -> &'static ([f64; GL_POINTS], [f64; GL_POINTS]) {
    static RULE: OnceLock<([f64; GL_POINTS], [f64; GL_POINTS])> = OnceLock::new();
    RULE.get_or_init(|| {
        let n = GL_POINTS;
        let mut nodes = [0.0; GL_POINTS];
        let mut weights = [0.0; GL_POINTS];
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

/// Composite rule: `pieces` equal panels over [a, b], as (abscissa, weight) pairs.
fn composite_rule(a: f64, b: f64, pieces: usize) -> Vec<(f64, f64)> {
    let (nodes, weights) = legendre_rule();
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .flat_map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            nodes.iter().zip(weights).map(move |(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
        .collect()
}

/// φ(z)·weight and Φ(z) on the panels used for the range integral.
struct RangeGrid {
    points: Vec<(f64, f64, f64)>,
}

impl RangeGrid {
    fn new() -> Self {
        let points = composite_rule(-9.0, 9.0, 12)
            .into_iter()
            .map(|(z, w)| (z, w * (-0.5 * z * z).exp() / (2.0 * PI).sqrt(), normal_cdf(z)))
            .collect();
        RangeGrid { points }
    }

    /// `P(range of k standard normals < w) = k ∫ φ(z) [Φ(z) − Φ(z − w)]^(k−1) dz`.
    fn range_cdf(&self, w: f64, k: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        if w.is_infinite() {
            return 1.0;
        }
        let sum: f64 = self
            .points
            .iter()
            .map(|&(z, wphi, cdf)| {
                let inside = (cdf - normal_cdf(z - w)).max(0.0);
                wphi * inside.powf(k - 1.0)
            })
            .sum();
        (k * sum).clamp(0.0, 1.0)
    }
}

/// CDF of the studentized range for `groups` means and `df` error degrees
/// of freedom: `P(Q ≤ q)`.
///
/// Averages the range CDF at `q·s` over the density of `s = √(χ²_df / df)`,
/// both integrals by composite Gauss–Legendre. The outer weights are
/// normalised by their own sum, which keeps large `df` free of cancellation.
pub fn studentized_range_cdf(q: f64, groups: f64, df: f64) -> f64 {
    if q.is_nan() || df.is_nan() || df < 1.0 || groups < 2.0 {
        return f64::NAN;
    }
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    let grid = RangeGrid::new();
    if df.is_infinite() {
        return grid.range_cdf(q, groups);
    }
    let mode = ((df - 1.0) / df).sqrt();
    let spread = 12.0 / (2.0 * df).sqrt();
    let (lo, hi) = ((mode - spread).max(0.0), mode + spread);
    let log_density = |s: f64| (df - 1.0) * s.ln() - 0.5 * df * s * s;
    let peak = log_density(mode.max(1e-300));
    let (mut num, mut den) = (0.0, 0.0);
    for (s, w) in composite_rule(lo, hi, 16) {
        let weight = w * (log_density(s) - peak).exp();
        if weight < 1e-300 {
            continue;
        }
        den += weight;
        num += weight * grid.range_cdf(q * s, groups);
    }
    (num / den).clamp(0.0, 1.0)
}

/// Quantile of the studentized range: the `q` with `P(Q ≤ q) = p`.
/// Results are memoised since Tukey tests ask for the same critical value
/// over and over.
pub fn studentized_range_quantile(p: f64, groups: f64, df: f64) -> f64 {
    if !(0.0..1.0).contains(&p) || df.is_nan() || df < 1.0 || groups < 2.0 {
        return f64::NAN;
    }
    if p == 0.0 {
        return 0.0;
    }
    static MEMO: OnceLock<Mutex<HashMap<[u64; 3], f64>>> = OnceLock::new();
    let key = [p.to_bits(), groups.to_bits(), df.to_bits()];
    let memo = MEMO.get_or_init(Default::default);
    if let Some(&q) = memo.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
        return q;
    }

    let f = |q: f64| studentized_range_cdf(q, groups, df) - p;
    let (mut lo, mut hi) = (0.0, 1.0);
    let (mut flo, mut fhi) = (-p, f(hi));
    while fhi < 0.0 {
        (lo, flo) = (hi, fhi);
        hi *= 2.0;
        if hi > 1e6 {
            return f64::INFINITY;
        }
        fhi = f(hi);
    }
    // Illinois false position
    let mut side = 0;
    for _ in 0..100 {
        let mid = (lo * fhi - hi * flo) / (fhi - flo);
        let fm = f(mid);
        if fm.abs() < 1e-15 {
            (lo, hi) = (mid, mid);
            break;
        }
        if (fm < 0.0) == (flo < 0.0) {
            (lo, flo) = (mid, fm);
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            (hi, fhi) = (mid, fm);
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
        if hi - lo < 1e-12 * hi {
            break;
        }
    }
    let q = 0.5 * (lo + hi);
    memo.lock().unwrap_or_else(|e| e.into_inner()).insert(key, q);
    q
}
