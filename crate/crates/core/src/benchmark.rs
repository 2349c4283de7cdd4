//! One-dimensional test problem with a closed-form pathwise solution.
//!
//! The equation is
//! `du = ((σ̄₁² + σ̄₂²)/2) ∂²u dt + I u dt + σ̄₂ ∂u dw + ∫ (u(x+z) - u(x)) q(dt, dz)`
//! with `u₀` the centred Gaussian density of variance `σ̄₀²`. Its solution is
//! `u_t(x) = v_t(x + σ̄₂ w_t + J_t)`, where `v` is the Gaussian heat kernel
//! solution of `∂_t v = (σ̄₁²/2) ∂²v` and `J` the jump driver.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, GridFunction};
use crate::levy::LevyMeasure;
use crate::noise::{NoisePath, PathParams, DEFAULT_EPS};
use crate::operators::Coefficients;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkParams {
    pub sigma0: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub measure: LevyMeasure,
    pub horizon: f64,
    /// Domain half-width `L`.
    pub radius: f64,
    pub delta: f64,
    pub eps: f64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            sigma0: 0.5,
            sigma1: 0.5,
            sigma2: 0.25,
            measure: LevyMeasure::symmetric(1.0, 1.0, 1.1, 3.0).expect("valid default measure"),
            horizon: 1.0,
            radius: 8.0,
            delta: 0.01,
            eps: DEFAULT_EPS,
        }
    }
}

impl BenchmarkParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma0", self.sigma0),
            ("sigma1", self.sigma1),
            ("horizon", self.horizon),
            ("radius", self.radius),
            ("delta", self.delta),
            ("eps", self.eps),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.sigma2.is_finite() {
            return Err(Error::InvalidParams("sigma2 must be finite".into()));
        }
        if !(self.eps < self.delta && self.delta <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "need 0 < eps < delta <= 1, got eps {} delta {}",
                self.eps, self.delta
            )));
        }
        self.measure.validate()
    }

    pub fn measure(&self) -> LevyMeasure {
        self.measure
    }

    /// `a¹¹ = (σ̄₁² + σ̄₂²)/2` with one Wiener channel `σ¹¹ = σ̄₂`.
    pub fn coefficients(&self) -> Result<Coefficients> {
        Coefficients::constant(0.5 * (self.sigma1 * self.sigma1 + self.sigma2 * self.sigma2), &[self.sigma2])
    }

    /// `ϰ = 2a¹¹ - σ̄₂² = σ̄₁²`
    pub fn kappa(&self) -> f64 {
        self.sigma1 * self.sigma1
    }

    pub fn path_params(&self, tau_fine: f64) -> PathParams {
        PathParams { measure: self.measure, horizon: self.horizon, tau_fine, eps: self.eps, channels: 1 }
    }

    /// Variance of `v_t`.
    pub fn variance(&self, t: f64) -> f64 {
        self.sigma0 * self.sigma0 + self.sigma1 * self.sigma1 * t
    }

    /// `v_t(y)`
    pub fn heat_density(&self, t: f64, y: f64) -> f64 {
        let s = self.variance(t);
        (-y * y / (2.0 * s)).exp() / (2.0 * PI * s).sqrt()
    }

    /// `∂²_y v_t(y)`
    pub fn heat_density_dyy(&self, t: f64, y: f64) -> f64 {
        let s = self.variance(t);
        self.heat_density(t, y) * (y * y / (s * s) - 1.0 / s)
    }

    /// Drift subtracted from the simulated jump sum: `∫_{ε<=|z|<=1} z π(dz)`,
    /// zero for a symmetric measure.
    pub fn jump_drift(&self) -> Result<f64> {
        let m = &self.measure;
        let top = m.support_radius.min(1.0);
        if self.eps >= top {
            return Ok(0.0);
        }
        Ok(m.measure_integral(-top, -self.eps, 1)? + m.measure_integral(self.eps, top, 1)?)
    }

    /// `σ̄₂ w_{t_n} + J_{t_n}` for `t_n = n τ`, `n = 0..=T/τ`.
    pub fn driver_shifts(&self, path: &NoisePath, tau: f64) -> Result<Vec<f64>> {
        let (w, j) = path.cumulative(tau, 0)?;
        let b = self.jump_drift()?;
        Ok(w.iter()
            .zip(&j)
            .enumerate()
            .map(|(n, (w, j))| self.sigma2 * w + j - n as f64 * tau * b)
            .collect())
    }

    /// `u_t` on `grid` for a given driver shift `σ̄₂ w_t + J_t`.
    pub fn solution_on_grid(&self, t: f64, shift: f64, grid: &Grid) -> GridFunction {
        GridFunction::from_fn(*grid, |x| self.heat_density(t, x + shift))
    }

    pub fn initial_condition(&self, grid: &Grid) -> GridFunction {
        GridFunction::from_fn(*grid, |x| self.heat_density(0.0, x))
    }
}

/// `u_t(x)` driven by `path`; `t` must be a multiple of the path's step.
pub fn exact_solution(p: &BenchmarkParams, t: f64, x: f64, path: &NoisePath) -> Result<f64> {
    let shift = p.sigma2 * path.wiener_at(0, t)? + path.jump_sum_at(t)? - t * p.jump_drift()?;
    Ok(p.heat_density(t, x + shift))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::simulate_path;

    #[test]
    fn initial_condition_peak_symmetry_mass() {
        let p = BenchmarkParams::default();
        let g = Grid::new(2f64.powi(-5), 8.0).unwrap();
        let u = p.initial_condition(&g);
        assert!((u.at(0) - 1.0 / (2.0 * PI * 0.25).sqrt()).abs() < 1e-15);
        for k in 1..100 {
            assert_eq!(u.at(k), u.at(-k));
        }
        let mass: f64 = g.h() * u.values().iter().sum::<f64>();
        assert!((mass - 1.0).abs() < 1e-4);
    }

    #[test]
    fn exact_solution_at_zero_and_without_noise() {
        let p = BenchmarkParams::default();
        let mut path = simulate_path(&p.path_params(1.0 / 64.0), 1, 0).unwrap();
        for x in [-1.0, 0.0, 0.3] {
            assert_eq!(exact_solution(&p, 0.0, x, &path).unwrap(), p.heat_density(0.0, x));
        }
        path.jumps.clear();
        path.wiener[0].iter_mut().for_each(|v| *v = 0.0);
        path.small_jump_wiener.iter_mut().for_each(|v| *v = 0.0);
        let u = exact_solution(&p, 0.5, 0.7, &path).unwrap();
        assert_eq!(u, p.heat_density(0.5, 0.7));
        assert!(matches!(exact_solution(&p, 0.001, 0.0, &path), Err(Error::TimeNotOnGrid(_))));
    }

    #[test]
    fn heat_residual_is_first_order_in_time_step() {
        let p = BenchmarkParams::default();
        let res = |eta: f64| {
            let mut worst: f64 = 0.0;
            for &(t, x) in &[(0.1, 0.0), (0.5, 0.4), (0.9, -1.2)] {
                let dt = (p.heat_density(t + eta, x) - p.heat_density(t, x)) / eta;
                worst = worst.max((dt - 0.5 * p.sigma1 * p.sigma1 * p.heat_density_dyy(t, x)).abs());
            }
            worst
        };
        let (r1, r2) = (res(1e-3), res(5e-4));
        assert!(r1 < 1e-2);
        assert!((r1 / r2 - 2.0).abs() < 0.05, "{r1} {r2}");
    }

    #[test]
    fn peak_decreases_and_mass_constant() {
        let p = BenchmarkParams::default();
        let g = Grid::new(2f64.powi(-6), 8.0).unwrap();
        let mut last = f64::INFINITY;
        for n in 0..=10 {
            let t = n as f64 / 10.0;
            let peak = p.heat_density(t, 0.0);
            assert!(peak < last);
            last = peak;
            let u = p.solution_on_grid(t, 0.0, &g);
            assert!((g.h() * u.values().iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn benchmark_coefficients() {
        let p = BenchmarkParams::default();
        let g = Grid::new(0.25, 8.0).unwrap();
        let c = p.coefficients().unwrap();
        assert!((c.kappa(&g, &[0.0]).unwrap() - p.kappa()).abs() < 1e-15);
        assert_eq!(p.jump_drift().unwrap(), 0.0);
        p.validate().unwrap();
    }
}
