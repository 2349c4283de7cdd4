//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use side_fd::grid::{Grid, GridFunction};

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
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
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Composite Gauss–Legendre rule over `[a, b]`, with panels graded
/// geometrically towards `a` when `grade_to_a` is set (for integrands that
/// are singular at `a`).
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, grade_to_a: bool, rule: &[(f64, f64)]) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let mut edges = Vec::with_capacity(panels + 1);
    if grade_to_a {
        // edges a + (b-a) 2^{-j}
        edges.push(a);
        for j in (0..panels).rev() {
            edges.push(a + (b - a) * 0.5f64.powi(j as i32));
        }
    } else {
        for j in 0..=panels {
            edges.push(a + (b - a) * j as f64 / panels as f64);
        }
    }
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        total += rule.iter().map(|(x, wt)| wt * f(m + r * x)).sum::<f64>() * r;
    }
    total
}

/// Tempered-stable density `c e^{-β|z|} |z|^{-1-α}` on `0 < |z| <= zmax`.
pub fn ts_density(c: f64, beta: f64, alpha: f64, zmax: f64, z: f64) -> f64 {
    let a = z.abs();
    if a == 0.0 || a > zmax {
        0.0
    } else {
        c * (-beta * a).exp() * a.powf(-1.0 - alpha)
    }
}

pub fn gaussian(s: f64, x: f64) -> f64 {
    (-x * x / (2.0 * s)).exp() / (2.0 * PI * s).sqrt()
}

pub fn gaussian_d1(s: f64, x: f64) -> f64 {
    -x / s * gaussian(s, x)
}

pub fn gaussian_d2(s: f64, x: f64) -> f64 {
    (x * x / (s * s) - 1.0 / s) * gaussian(s, x)
}

pub fn gaussian_d3(s: f64, x: f64) -> f64 {
    (3.0 * x / (s * s) - x * x * x / (s * s * s)) * gaussian(s, x)
}

pub fn gaussian_d4(s: f64, x: f64) -> f64 {
    let x2 = x * x;
    (x2 * x2 / s.powi(4) - 6.0 * x2 / s.powi(3) + 3.0 / (s * s)) * gaussian(s, x)
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < n { sup[i] / m } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Deterministic pseudo-random values in [-1, 1] (SplitMix64).
pub struct Rand(pub u64);

impl Rand {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E3779B97F4A7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
        z ^ (z >> 31)
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }
}

/// Random grid function vanishing outside `|k| <= support`.
pub fn random_interior(grid: Grid, support: i64, rng: &mut Rand) -> GridFunction {
    let mut f = GridFunction::zeros(grid);
    let half = grid.half();
    for k in -support..=support {
        f.values_mut()[(k + half) as usize] = rng.uniform();
    }
    f
}
