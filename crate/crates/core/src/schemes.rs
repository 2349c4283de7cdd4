//! Explicit and implicit-explicit time stepping.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::levy::{CellCoefficients, LevyMeasure};
use crate::noise::{step_count, BinnedIncrements, Jump};
use crate::operators::{apply_lh, apply_nh, shift_sum_direct, Coefficients, ShiftSummer, FFT_CROSSOVER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Explicit,
    Imex,
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::Explicit => "explicit",
            SchemeKind::Imex => "imex",
        })
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "explicit" => Ok(SchemeKind::Explicit),
            "imex" => Ok(SchemeKind::Imex),
            other => Err(Error::InvalidParams(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Nodes over which errors are measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ErrorRegion {
    FullGrid,
    /// Nodes with `|x| <= radius`.
    Inner(f64),
}

impl ErrorRegion {
    /// Array positions of the region on `grid`.
    pub fn indices(&self, grid: &Grid) -> Range<usize> {
        match *self {
            ErrorRegion::FullGrid => 0..grid.count(),
            ErrorRegion::Inner(r) => {
                let k = ((r / grid.h()) * (1.0 + 1e-12)).floor() as i64;
                let k = k.clamp(0, grid.half());
                let mid = grid.half();
                (mid - k) as usize..(mid + k + 1) as usize
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub h: f64,
    pub tau: f64,
    pub horizon: f64,
    pub delta: f64,
    pub scheme: SchemeKind,
    /// Use raw large-jump counts and drop the matching `ζ̄` drift.
    pub compensator_cancellation: bool,
    pub error_region: ErrorRegion,
}

impl SchemeConfig {
    pub fn steps(&self) -> Result<usize> {
        step_count(self.horizon, self.tau)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::InvalidParams(format!("h must be positive, got {}", self.h)));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidParams(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        self.steps().map(|_| ())
    }
}

/// `(ϰ - ς(δ)) / (2 sup|a¹¹| + ς₁(δ))²`, the bound on `d τ / h²` for the
/// explicit scheme, with `ϰ` and `sup|a¹¹|` taken over `grid` and `times`.
pub fn cfl_rhs(c: &Coefficients, m: &LevyMeasure, delta: f64, grid: &Grid, times: &[f64]) -> Result<f64> {
    let kappa = c.kappa(grid, times)?;
    let vs = m.varsigma(delta)?;
    if vs.s >= kappa {
        return Err(Error::DeltaTooLarge { varsigma: vs.s, kappa });
    }
    let denom = 2.0 * c.a11_sup(grid, times) + vs.s1;
    Ok((kappa - vs.s) / (denom * denom))
}

/// Free terms `f`, `g^ϱ` and the jump term `∫ o(x, z) q(]t_{n-1}, t_n], dz)`.
pub trait Forcing: Sync {
    fn drift(&self, _t: f64, _grid: &Grid) -> Option<GridFunction> {
        None
    }
    fn diffusion(&self, _t: f64, _channel: usize, _grid: &Grid) -> Option<GridFunction> {
        None
    }
    /// The jump integral over one step, given its jump events.
    fn jump(&self, _t: f64, _tau: f64, _events: &[Jump], _grid: &Grid) -> Option<GridFunction> {
        None
    }
}

/// `f = g = o = 0`
#[derive(Debug, Clone, Copy, Default)]
pub struct NoForcing;

impl Forcing for NoForcing {}

/// Square matrix with `b` sub- and super-diagonals, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, b: usize) -> Self {
        Self { n, b, data: vec![0.0; n * (2 * b + 1)] }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.b
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if i >= self.n || j >= self.n || i.abs_diff(j) > self.b {
            None
        } else {
            Some(i * (2 * self.b + 1) + j + self.b - i)
        }
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] = v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.b);
                let hi = (i + self.b).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Smallest `|a_ii| - Σ_{j≠i} |a_ij|` over the rows.
    pub fn diagonal_dominance_margin(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.b);
                let hi = (i + self.b).min(self.n - 1);
                let off: f64 = (lo..=hi).filter(|&j| j != i).map(|j| self.get(i, j).abs()).sum();
                self.get(i, i).abs() - off
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// LU factorization without pivoting.
    pub fn factor(&self) -> Result<BandedLu> {
        let mut a = self.clone();
        let (n, b) = (self.n, self.b);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = a.get(k, k);
            if !(pivot.abs() > 1e-13 * scale) {
                return Err(Error::SingularMatrix { row: k, pivot });
            }
            let last = (k + b).min(n - 1);
            for i in k + 1..=last {
                let l = a.get(i, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                a.set(i, k, l);
                for j in k + 1..=last {
                    let v = a.get(i, j) - l * a.get(k, j);
                    a.set(i, j, v);
                }
            }
        }
        Ok(BandedLu { lu: a })
    }
}

/// Factors of a [`BandedMatrix`]: unit lower and upper triangles in one band.
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
}

impl BandedLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, b) = (self.lu.n, self.lu.b);
        let mut x = rhs.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(b);
            let s: f64 = (lo..i).map(|j| self.lu.get(i, j) * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let hi = (i + b).min(n - 1);
            let s: f64 = (i + 1..=hi).map(|j| self.lu.get(i, j) * x[j]).sum();
            x[i] = (x[i] - s) / self.lu.get(i, i);
        }
        x
    }
}

/// Assembles the matrix of a linear grid operator whose stencil reaches at
/// most `b` nodes, by probing with interleaved unit vectors.
pub fn assemble_banded(grid: &Grid, b: usize, op: impl Fn(&GridFunction) -> Result<GridFunction>) -> Result<BandedMatrix> {
    let n = grid.count();
    let w = 2 * b + 1;
    let mut m = BandedMatrix::zeros(n, b);
    for color in 0..w.min(n) {
        let mut probe = GridFunction::zeros(*grid);
        for j in (color..n).step_by(w) {
            probe.values_mut()[j] = 1.0;
        }
        let r = op(&probe)?;
        for i in 0..n {
            let start = i as i64 - b as i64;
            let j = start + (color as i64 - start).rem_euclid(w as i64);
            if j >= 0 && (j as usize) < n {
                m.set(i, j as usize, r.values()[i]);
            }
        }
    }
    Ok(m)
}

/// The operator treated implicitly at time `t`:
/// `ℒ^h - ξ δ^h + I^h_δ`, minus `π({|z|>δ})` unless the large-jump mass is
/// cancelled against the compensator.
fn implicit_operator(
    c: &Coefficients,
    cc: &CellCoefficients,
    drift_weights: &BTreeMap<i64, f64>,
    t: f64,
    cancellation: bool,
    phi: &GridFunction,
) -> Result<GridFunction> {
    let mut out = apply_lh(c, t, phi);
    if !drift_weights.is_empty() {
        out.axpy(1.0, &shift_sum_direct(&phi.second_diff(), drift_weights))?;
    }
    out.axpy(-cc.large_drift(), &phi.symmetric_diff())?;
    if !cancellation {
        out.axpy(-cc.large_mass(), phi)?;
    }
    Ok(out)
}

fn implicit_bandwidth(drift_weights: &BTreeMap<i64, f64>) -> usize {
    1 + drift_weights.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
}

/// `D_n = I - τ (ℒ̃^h_t + I^h_δ)` on `grid`. With `cancellation` the
/// `π({|z|>δ})` term of `ℒ̃^h` is omitted, matching the raw-count form of
/// the jump noise.
pub fn imex_matrix(
    c: &Coefficients,
    cc: &CellCoefficients,
    grid: &Grid,
    tau: f64,
    t: f64,
    cancellation: bool,
) -> Result<BandedMatrix> {
    if cc.h != grid.h() {
        return Err(Error::GridMismatch { left: cc.h, right: grid.h() });
    }
    let w = cc.small_drift_weights();
    let b = implicit_bandwidth(&w);
    assemble_banded(grid, b, |phi| {
        let mut out = implicit_operator(c, cc, &w, t, cancellation, phi)?;
        for v in out.values_mut() {
            *v *= -tau;
        }
        out.axpy(1.0, phi)?;
        Ok(out)
    })
}

/// Precomputed data for stepping one `(h, τ)` configuration.
///
/// Immutable once built, so one instance serves every replication.
#[derive(Debug, Clone)]
pub struct Stepper {
    cfg: SchemeConfig,
    c: Coefficients,
    cc: CellCoefficients,
    grid: Grid,
    drift_weights: BTreeMap<i64, f64>,
    summer: ShiftSummer,
    lu: Option<BandedLu>,
}

impl Stepper {
    /// Checks the configuration and, for the explicit scheme, the CFL bound.
    pub fn new(cfg: SchemeConfig, c: &Coefficients, m: &LevyMeasure, cc: &CellCoefficients, grid: Grid) -> Result<Self> {
        Self::build(cfg, c, m, cc, grid, true)
    }

    /// Like [`Stepper::new`] but skips the CFL check, for stability experiments.
    pub fn new_unchecked(
        cfg: SchemeConfig,
        c: &Coefficients,
        m: &LevyMeasure,
        cc: &CellCoefficients,
        grid: Grid,
    ) -> Result<Self> {
        Self::build(cfg, c, m, cc, grid, false)
    }

    fn build(
        cfg: SchemeConfig,
        c: &Coefficients,
        m: &LevyMeasure,
        cc: &CellCoefficients,
        grid: Grid,
        check_cfl: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        if cc.h != cfg.h || grid.h() != cfg.h {
            return Err(Error::GridMismatch { left: cc.h, right: grid.h() });
        }
        if cc.delta != cfg.delta {
            return Err(Error::InvalidParams(format!(
                "cell tables built for delta {} but config has {}",
                cc.delta, cfg.delta
            )));
        }
        let steps = cfg.steps()?;
        let times: Vec<f64> = if c.is_time_independent() {
            vec![0.0]
        } else {
            (0..=steps).map(|n| n as f64 * cfg.tau).collect()
        };
        if cfg.scheme == SchemeKind::Explicit && check_cfl {
            let bound = cfl_rhs(c, m, cfg.delta, &grid, &times)?;
            let ratio = cfg.tau / (cfg.h * cfg.h);
            if !(ratio < bound) {
                return Err(Error::CflViolation { h: cfg.h, tau: cfg.tau, ratio, bound });
            }
        } else {
            c.kappa(&grid, &times)?;
        }
        let lo = cc.zeta_bar.keys().next().copied().unwrap_or(0);
        let hi = cc.zeta_bar.keys().next_back().copied().unwrap_or(0);
        let summer = ShiftSummer::new(grid.count(), lo, hi);
        let lu = if cfg.scheme == SchemeKind::Imex && c.is_time_independent() {
            Some(imex_matrix(c, cc, &grid, cfg.tau, 0.0, cfg.compensator_cancellation)?.factor()?)
        } else {
            None
        };
        Ok(Self {
            cfg,
            c: c.clone(),
            cc: cc.clone(),
            grid,
            drift_weights: cc.small_drift_weights(),
            summer,
            lu,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn shift_sum(&self, phi: &GridFunction, w: &BTreeMap<i64, f64>) -> GridFunction {
        let nnz = w.values().filter(|v| **v != 0.0).count();
        if nnz <= FFT_CROSSOVER {
            shift_sum_direct(phi, w)
        } else {
            self.summer.apply(phi, w)
        }
    }

    fn check_inputs(&self, n: usize, state: &GridFunction, inc: &BinnedIncrements) -> Result<()> {
        self.grid.check_compatible(state.grid())?;
        if inc.h != self.cfg.h {
            return Err(Error::GridMismatch { left: self.cfg.h, right: inc.h });
        }
        if (inc.tau - self.cfg.tau).abs() > 1e-12 * self.cfg.tau {
            return Err(Error::ResolutionMismatch { tau: self.cfg.tau, fine: inc.tau });
        }
        if n == 0 || n > inc.steps() {
            return Err(Error::InvalidParams(format!("step {n} outside 1..={}", inc.steps())));
        }
        if inc.wiener.len() < self.c.sigma.len() {
            return Err(Error::InvalidParams(format!(
                "{} noise channels but {} wiener paths",
                self.c.sigma.len(),
                inc.wiener.len()
            )));
        }
        Ok(())
    }

    /// Wiener, small-jump and large-jump terms of step `n`, evaluated on `state`.
    fn noise_terms(&self, n: usize, t: f64, state: &GridFunction, inc: &BinnedIncrements, forcing: &dyn Forcing) -> Result<GridFunction> {
        let mut out = GridFunction::zeros(self.grid);
        for ch in 0..self.c.sigma.len() {
            let dw = inc.wiener[ch][n - 1];
            out.axpy(dw, &apply_nh(&self.c, t, ch, state)?)?;
            if let Some(g) = forcing.diffusion(t, ch, &self.grid) {
                out.axpy(dw, &g)?;
            }
        }
        let w = self.cc.small_noise_weights(&inc.small[n - 1])?;
        if !w.is_empty() {
            out.axpy(1.0, &self.shift_sum(&state.forward_diff(1), &w))?;
        }
        let counts: BTreeMap<i64, f64> = if self.cfg.compensator_cancellation {
            inc.large_raw[n - 1].iter().map(|(&k, &c)| (k, c as f64)).collect()
        } else {
            inc.large_compensated(n - 1)
        };
        if !counts.is_empty() {
            let total: f64 = counts.values().sum();
            out.axpy(1.0, &self.shift_sum(state, &counts))?;
            out.axpy(-total, state)?;
        }
        Ok(out)
    }

    /// `û_n` from `û_{n-1}` for step `n >= 1`.
    pub fn step_explicit(&self, n: usize, state: &GridFunction, inc: &BinnedIncrements, forcing: &dyn Forcing) -> Result<GridFunction> {
        self.check_inputs(n, state, inc)?;
        let tau = self.cfg.tau;
        let t = (n - 1) as f64 * tau;
        let mut drift = apply_lh(&self.c, t, state);
        if !self.drift_weights.is_empty() {
            drift.axpy(1.0, &shift_sum_direct(&state.second_diff(), &self.drift_weights))?;
        }
        if !self.cfg.compensator_cancellation {
            drift.axpy(1.0, &self.shift_sum(state, &self.cc.zeta_bar))?;
            drift.axpy(-self.cc.large_mass(), state)?;
        }
        drift.axpy(-self.cc.large_drift(), &state.symmetric_diff())?;
        if let Some(f) = forcing.drift(t, &self.grid) {
            drift.axpy(1.0, &f)?;
        }
        let mut out = state.clone();
        out.axpy(tau, &drift)?;
        out.axpy(1.0, &self.noise_terms(n, t, state, inc, forcing)?)?;
        if let Some(o) = forcing.jump(t, tau, &inc.events[n - 1], &self.grid) {
            out.axpy(1.0, &o)?;
        }
        Ok(out)
    }

    /// Right-hand side `y_{n-1}` of the IMEX system `D_n v̂_n = y_{n-1}`.
    pub fn imex_rhs(&self, n: usize, state: &GridFunction, inc: &BinnedIncrements, forcing: &dyn Forcing) -> Result<GridFunction> {
        self.check_inputs(n, state, inc)?;
        let tau = self.cfg.tau;
        let t_prev = (n - 1) as f64 * tau;
        let t_n = n as f64 * tau;
        let mut rhs = state.clone();
        if let Some(f) = forcing.drift(t_n, &self.grid) {
            rhs.axpy(tau, &f)?;
        }
        if !self.cfg.compensator_cancellation {
            rhs.axpy(tau, &self.shift_sum(state, &self.cc.zeta_bar))?;
        }
        if n > 1 {
            rhs.axpy(1.0, &self.noise_terms(n, t_prev, state, inc, forcing)?)?;
            if let Some(o) = forcing.jump(t_prev, tau, &inc.events[n - 1], &self.grid) {
                rhs.axpy(1.0, &o)?;
            }
        }
        Ok(rhs)
    }

    /// `v̂_n` from `v̂_{n-1}` for step `n >= 1`.
    pub fn step_imex(&self, n: usize, state: &GridFunction, inc: &BinnedIncrements, forcing: &dyn Forcing) -> Result<GridFunction> {
        let rhs = self.imex_rhs(n, state, inc, forcing)?;
        let values = match &self.lu {
            Some(lu) => lu.solve(rhs.values()),
            None => {
                let t_n = n as f64 * self.cfg.tau;
                imex_matrix(&self.c, &self.cc, &self.grid, self.cfg.tau, t_n, self.cfg.compensator_cancellation)?
                    .factor()?
                    .solve(rhs.values())
            }
        };
        Ok(GridFunction::from_raw(self.grid, values))
    }

    pub fn step(&self, n: usize, state: &GridFunction, inc: &BinnedIncrements, forcing: &dyn Forcing) -> Result<GridFunction> {
        match self.cfg.scheme {
            SchemeKind::Explicit => self.step_explicit(n, state, inc, forcing),
            SchemeKind::Imex => self.step_imex(n, state, inc, forcing),
        }
    }

    /// Runs all `T/τ` steps, handing each state (including the initial one)
    /// to `observer`; returns the final state.
    pub fn run_with(
        &self,
        inc: &BinnedIncrements,
        initial: &GridFunction,
        forcing: &dyn Forcing,
        mut observer: impl FnMut(usize, &GridFunction) -> Result<()>,
    ) -> Result<GridFunction> {
        let steps = self.cfg.steps()?;
        if inc.steps() != steps {
            return Err(Error::InvalidParams(format!("increments cover {} steps, need {steps}", inc.steps())));
        }
        let mut state = initial.clone();
        observer(0, &state)?;
        for n in 1..=steps {
            state = self.step(n, &state, inc, forcing)?;
            observer(n, &state)?;
        }
        Ok(state)
    }

    /// The full trajectory `û_0, …, û_𝒯`.
    pub fn run(&self, inc: &BinnedIncrements, initial: &GridFunction, forcing: &dyn Forcing) -> Result<Vec<GridFunction>> {
        let mut out = Vec::new();
        self.run_with(inc, initial, forcing, |_, s| {
            out.push(s.clone());
            Ok(())
        })?;
        Ok(out)
    }
}
