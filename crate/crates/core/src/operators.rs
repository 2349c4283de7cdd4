//! Discrete spatial operators of the schemes.
//!
//! Naming follows the roles in the equation: `lh` is the local second-order
//! operator, `nh` the Wiener-noise operator, `ih_delta` / `ih_deltac` the
//! small- and large-jump parts of the nonlocal drift, and `ltilde` /
//! `itilde_deltac` the regrouping used by the implicit-explicit scheme.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::levy::CellCoefficients;

/// Weight maps with more nonzero entries than this use the FFT path of [`shift_sum`].
pub const FFT_CROSSOVER: usize = 8;

/// A coefficient `(t, x) -> value`.
#[derive(Clone)]
pub enum Field {
    Constant(f64),
    Function(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl Field {
    pub fn function(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Field::Function(Arc::new(f))
    }

    #[inline]
    pub fn at(&self, t: f64, x: f64) -> f64 {
        match self {
            Field::Constant(c) => *c,
            Field::Function(f) => f(t, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Field::Constant(c) if *c == 0.0)
    }

    fn sample(&self, grid: &Grid, t: f64) -> Sampled {
        match self {
            Field::Constant(c) => Sampled::Constant(*c),
            Field::Function(f) => Sampled::Values((0..grid.count()).map(|i| f(t, grid.x(i))).collect()),
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Constant(c) => write!(f, "Constant({c})"),
            Field::Function(_) => write!(f, "Function(..)"),
        }
    }
}

impl From<f64> for Field {
    fn from(c: f64) -> Self {
        Field::Constant(c)
    }
}

enum Sampled {
    Constant(f64),
    Values(Vec<f64>),
}

impl Sampled {
    #[inline]
    fn get(&self, i: usize) -> f64 {
        match self {
            Sampled::Constant(c) => *c,
            Sampled::Values(v) => v[i],
        }
    }
}

/// One Wiener channel: `σ^{1ϱ} δ_h + σ^{0ϱ}`.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    pub first_order: Field,
    pub zero_order: Field,
}

/// Coefficients of the local operators in one space dimension.
#[derive(Debug, Clone)]
pub struct Coefficients {
    pub a11: Field,
    pub a10: Field,
    pub a01: Field,
    pub a00: Field,
    pub sigma: Vec<NoiseChannel>,
}

impl Coefficients {
    /// Constant pure diffusion `a11 ∂²` with first-order noise channels.
    pub fn constant(a11: f64, sigma_first_order: &[f64]) -> Result<Self> {
        let c = Self {
            a11: a11.into(),
            a10: 0.0.into(),
            a01: 0.0.into(),
            a00: 0.0.into(),
            sigma: sigma_first_order
                .iter()
                .map(|&s| NoiseChannel { first_order: s.into(), zero_order: 0.0.into() })
                .collect(),
        };
        let margin = c.parabolicity_margin(0.0, 0.0);
        if !(margin > 0.0) {
            return Err(Error::NotParabolic { margin, x: 0.0, t: 0.0 });
        }
        Ok(c)
    }

    #[inline]
    fn parabolicity_margin(&self, t: f64, x: f64) -> f64 {
        2.0 * self.a11.at(t, x)
            - self.sigma.iter().map(|s| s.first_order.at(t, x).powi(2)).sum::<f64>()
    }

    /// `ϰ = min (2a¹¹ - Σ_ϱ (σ^{1ϱ})²)` over the nodes of `grid` and `times`;
    /// fails unless the minimum is positive.
    pub fn kappa(&self, grid: &Grid, times: &[f64]) -> Result<f64> {
        let mut best = f64::INFINITY;
        for &t in times {
            for i in 0..grid.count() {
                let x = grid.x(i);
                let m = self.parabolicity_margin(t, x);
                if !(m > 0.0) {
                    return Err(Error::NotParabolic { margin: m, x, t });
                }
                best = best.min(m);
            }
        }
        Ok(best)
    }

    /// `sup |a¹¹|` over the nodes of `grid` and `times`.
    pub fn a11_sup(&self, grid: &Grid, times: &[f64]) -> f64 {
        let mut s: f64 = 0.0;
        for &t in times {
            for i in 0..grid.count() {
                s = s.max(self.a11.at(t, grid.x(i)).abs());
            }
        }
        s
    }

    pub fn is_time_independent(&self) -> bool {
        let c = |f: &Field| matches!(f, Field::Constant(_));
        c(&self.a11)
            && c(&self.a10)
            && c(&self.a01)
            && c(&self.a00)
            && self.sigma.iter().all(|s| c(&s.first_order) && c(&s.zero_order))
    }
}

fn check_grid(cc: &CellCoefficients, phi: &GridFunction) -> Result<()> {
    if cc.h != phi.grid().h() {
        Err(Error::GridMismatch { left: cc.h, right: phi.grid().h() })
    } else {
        Ok(())
    }
}

/// `a¹¹ δ_h δ_{-h} φ + a¹⁰ δ_h φ + a⁰¹ δ_{-h} φ + a⁰⁰ φ`
pub fn apply_lh(c: &Coefficients, t: f64, phi: &GridFunction) -> GridFunction {
    let g = *phi.grid();
    let h = g.h();
    let (a11, a10, a01, a00) = (c.a11.sample(&g, t), c.a10.sample(&g, t), c.a01.sample(&g, t), c.a00.sample(&g, t));
    let v = phi.values();
    let out = (0..v.len())
        .map(|i| {
            let (l, m, r) = (phi.at_offset(i, -1), v[i], phi.at_offset(i, 1));
            a11.get(i) * (r - 2.0 * m + l) / (h * h)
                + a10.get(i) * (r - m) / h
                + a01.get(i) * (m - l) / h
                + a00.get(i) * m
        })
        .collect();
    GridFunction::from_raw(g, out)
}

/// `σ^{1ϱ} δ_h φ + σ^{0ϱ} φ` for channel `channel`.
pub fn apply_nh(c: &Coefficients, t: f64, channel: usize, phi: &GridFunction) -> Result<GridFunction> {
    let ch = c
        .sigma
        .get(channel)
        .ok_or_else(|| Error::InvalidParams(format!("no noise channel {channel}")))?;
    let g = *phi.grid();
    let h = g.h();
    let (s1, s0) = (ch.first_order.sample(&g, t), ch.zero_order.sample(&g, t));
    let v = phi.values();
    let out = (0..v.len())
        .map(|i| s1.get(i) * (phi.at_offset(i, 1) - v[i]) / h + s0.get(i) * v[i])
        .collect();
    Ok(GridFunction::from_raw(g, out))
}

/// Large-jump drift `Σ_k [(φ(x + h k) - φ(x)) ζ̄_k - ξ̄_k δ^h φ(x)]`.
pub fn apply_ih_deltac(cc: &CellCoefficients, phi: &GridFunction) -> Result<GridFunction> {
    check_grid(cc, phi)?;
    let mut out = shift_sum(phi, &cc.zeta_bar);
    out.axpy(-cc.large_mass(), phi)?;
    out.axpy(-cc.large_drift(), &phi.symmetric_diff())?;
    Ok(out)
}

/// Small-jump drift `Σ_k Σ_l θ̄_l ζ_k δ_h δ_{-h} φ(x + h r_l)`.
pub fn apply_ih_delta(cc: &CellCoefficients, phi: &GridFunction) -> Result<GridFunction> {
    check_grid(cc, phi)?;
    if cc.zeta.is_empty() {
        return Ok(GridFunction::zeros(*phi.grid()));
    }
    Ok(shift_sum(&phi.second_diff(), &cc.small_drift_weights()))
}

/// `ℒ^h φ - π({|z|>δ}) φ - (∫_{δ<|z|<=1} z π(dz)) δ^h φ`, with both measure
/// quantities taken as sums of the cell tables so that the splitting identity
/// with [`apply_itilde_deltac`] holds to rounding.
pub fn apply_ltilde(c: &Coefficients, cc: &CellCoefficients, t: f64, phi: &GridFunction) -> Result<GridFunction> {
    check_grid(cc, phi)?;
    let mut out = apply_lh(c, t, phi);
    out.axpy(-cc.large_mass(), phi)?;
    out.axpy(-cc.large_drift(), &phi.symmetric_diff())?;
    Ok(out)
}

/// `Σ_k φ(x + h k) ζ̄_k`
pub fn apply_itilde_deltac(cc: &CellCoefficients, phi: &GridFunction) -> Result<GridFunction> {
    check_grid(cc, phi)?;
    Ok(shift_sum(phi, &cc.zeta_bar))
}

/// `Σ_l θ̃_l δ_h φ(x + h r_l)` for small-jump cell `k`; the noise stencil that
/// multiplies the increment of `∫_{B_k} z q(dt, dz)`.
pub fn jump_drift_stencil(cc: &CellCoefficients, phi: &GridFunction, k: i64) -> Result<GridFunction> {
    check_grid(cc, phi)?;
    let p = cc.partition(k)?;
    let w: BTreeMap<i64, f64> = p.indices.iter().copied().zip(p.theta_tilde.iter().copied()).collect();
    Ok(shift_sum(&phi.forward_diff(1), &w))
}

/// `Σ_k w_k φ(x + k h)` with zero extension.
///
/// Up to [`FFT_CROSSOVER`] nonzero weights are summed directly; larger maps
/// go through a zero-padded circular correlation.
pub fn shift_sum(phi: &GridFunction, weights: &BTreeMap<i64, f64>) -> GridFunction {
    let nnz = weights.values().filter(|w| **w != 0.0).count();
    if nnz <= FFT_CROSSOVER {
        shift_sum_direct(phi, weights)
    } else {
        let (lo, hi) = support(weights);
        ShiftSummer::new(phi.grid().count(), lo, hi).apply(phi, weights)
    }
}

fn support(weights: &BTreeMap<i64, f64>) -> (i64, i64) {
    let lo = weights.keys().next().copied().unwrap_or(0);
    let hi = weights.keys().next_back().copied().unwrap_or(0);
    (lo, hi)
}

/// Direct evaluation of [`shift_sum`].
pub fn shift_sum_direct(phi: &GridFunction, weights: &BTreeMap<i64, f64>) -> GridFunction {
    let n = phi.values().len() as i64;
    let v = phi.values();
    let mut out = vec![0.0; v.len()];
    for (&k, &w) in weights {
        if w == 0.0 {
            continue;
        }
        // out[i] += w * v[i + k] for 0 <= i, i + k < n
        let start = (-k).max(0);
        let end = (n - k).min(n);
        for i in start..end {
            out[i as usize] += w * v[(i + k) as usize];
        }
    }
    GridFunction::from_raw(*phi.grid(), out)
}

/// Reusable FFT plans for shift sums on a fixed grid size and weight support.
#[derive(Clone)]
pub struct ShiftSummer {
    n: usize,
    lo: i64,
    hi: i64,
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ShiftSummer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShiftSummer")
            .field("n", &self.n)
            .field("support", &(self.lo..=self.hi))
            .field("len", &self.len)
            .finish()
    }
}

impl ShiftSummer {
    /// Plans for grids of `n` nodes and weights supported in `lo..=hi`.
    pub fn new(n: usize, lo: i64, hi: i64) -> Self {
        let pad = lo.min(0).unsigned_abs() as usize + hi.max(0) as usize;
        let len = (n + pad).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(len);
        let inverse = planner.plan_fft_inverse(len);
        Self { n, lo: lo.min(0), hi: hi.max(0), len, forward, inverse }
    }

    pub fn covers(&self, n: usize, weights: &BTreeMap<i64, f64>) -> bool {
        let (lo, hi) = support(weights);
        n == self.n && lo >= self.lo && hi <= self.hi
    }

    /// FFT evaluation; weights outside the planned support fall back to the
    /// direct path.
    pub fn apply(&self, phi: &GridFunction, weights: &BTreeMap<i64, f64>) -> GridFunction {
        if !self.covers(phi.values().len(), weights) {
            return shift_sum_direct(phi, weights);
        }
        let len = self.len;
        let mut signal: Vec<Complex<f64>> = Vec::with_capacity(len);
        signal.extend(phi.values().iter().map(|&v| Complex::new(v, 0.0)));
        signal.resize(len, Complex::new(0.0, 0.0));
        // kernel[(-k) mod len] = w_k turns the convolution into a correlation
        let mut kernel = vec![Complex::new(0.0, 0.0); len];
        for (&k, &w) in weights {
            let idx = (-k).rem_euclid(len as i64) as usize;
            kernel[idx].re += w;
        }
        self.forward.process(&mut signal);
        self.forward.process(&mut kernel);
        for (s, k) in signal.iter_mut().zip(&kernel) {
            *s *= *k;
        }
        self.inverse.process(&mut signal);
        let scale = 1.0 / len as f64;
        let out = signal[..self.n].iter().map(|c| c.re * scale).collect();
        GridFunction::from_raw(*phi.grid(), out)
    }
}
