//! Two-sided tempered-stable jump measures and the per-cell data the
//! finite-difference operators are built from.
//!
//! The measure has density `c∓ exp(-β∓|z|) |z|^(-1-α∓)` on each half-line,
//! truncated to `[-Z, Z]`. Jump sizes are discretized with the cells
//! `A_k = ((k - 1/2)h, (k + 1/2)h]`, split at `|z| = δ` into a small-jump part
//! `B_k` and a large-jump part `B̄_k`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance for every measure integral.
pub const QUAD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevyMeasure {
    pub c_minus: f64,
    pub c_plus: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    /// Density vanishes for `|z| > support_radius`.
    pub support_radius: f64,
}

/// The three small-jump moment functionals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Varsigma {
    /// `∫_{|z|<=δ} z² π₁(dz)`
    pub s1: f64,
    /// `∫_{|z|<=δ} z² π₂(dz)`
    pub s2: f64,
    pub s: f64,
}

impl LevyMeasure {
    pub fn new(
        c_minus: f64,
        c_plus: f64,
        beta_minus: f64,
        beta_plus: f64,
        alpha_minus: f64,
        alpha_plus: f64,
        support_radius: f64,
    ) -> Result<Self> {
        let m = Self {
            c_minus,
            c_plus,
            beta_minus,
            beta_plus,
            alpha_minus,
            alpha_plus,
            support_radius,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn symmetric(c: f64, beta: f64, alpha: f64, support_radius: f64) -> Result<Self> {
        Self::new(c, c, beta, beta, alpha, alpha, support_radius)
    }

    /// The measure with zero density. Stability indices are irrelevant and set to 1.
    pub fn zero(support_radius: f64) -> Self {
        Self {
            c_minus: 0.0,
            c_plus: 0.0,
            beta_minus: 0.0,
            beta_plus: 0.0,
            alpha_minus: 1.0,
            alpha_plus: 1.0,
            support_radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(format!("levy measure: {what}")));
        if !(self.c_minus >= 0.0 && self.c_plus >= 0.0) {
            return bad("density scales must be nonnegative");
        }
        if !(self.beta_minus >= 0.0 && self.beta_plus >= 0.0) {
            return bad("tempering must be nonnegative");
        }
        for a in [self.alpha_minus, self.alpha_plus] {
            if !(a > 0.0 && a < 2.0) {
                return bad("stability indices must lie in (0, 2)");
            }
        }
        if !(self.support_radius > 0.0 && self.support_radius.is_finite()) {
            return bad("support radius must be positive and finite");
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.c_minus == 0.0 && self.c_plus == 0.0
    }

    pub fn is_symmetric(&self) -> bool {
        self.c_minus == self.c_plus
            && self.beta_minus == self.beta_plus
            && self.alpha_minus == self.alpha_plus
    }

    pub fn density(&self, z: f64) -> f64 {
        let a = z.abs();
        if a == 0.0 || a > self.support_radius {
            return 0.0;
        }
        let (c, beta, alpha) = self.side(z < 0.0);
        c * (-beta * a).exp() * a.powf(-1.0 - alpha)
    }

    fn side(&self, negative: bool) -> (f64, f64, f64) {
        if negative {
            (self.c_minus, self.beta_minus, self.alpha_minus)
        } else {
            (self.c_plus, self.beta_plus, self.alpha_plus)
        }
    }

    /// `∫_lo^hi z^power π(dz)` for `power` in `{0, 1, 2}`.
    pub fn measure_integral(&self, lo: f64, hi: f64, power: u32) -> Result<f64> {
        if power > 2 {
            return Err(Error::InvalidParams(format!("unsupported moment power {power}")));
        }
        if !(lo <= hi) {
            return Err(Error::InvalidParams(format!("empty interval ({lo}, {hi})")));
        }
        let z = self.support_radius;
        let (lo, hi) = (lo.max(-z), hi.min(z));
        if lo >= hi {
            return Ok(0.0);
        }
        let mut total = 0.0;
        if lo < 0.0 {
            // z = -u on the negative half-line
            let (a, b) = ((-hi).max(0.0), -lo);
            let v = self.half_line_integral(true, a, b, power, (lo, hi))?;
            total += if power % 2 == 1 { -v } else { v };
        }
        if hi > 0.0 {
            let (a, b) = (lo.max(0.0), hi);
            total += self.half_line_integral(false, a, b, power, (lo, hi))?;
        }
        Ok(total)
    }

    /// `c ∫_a^b u^(power-1-α) e^(-βu) du` for `0 <= a < b`.
    ///
    /// With `e = power - α` the substitution `t = u^e` (or `u = e^s` when
    /// `e = 0`) turns the power singularity into a bounded integrand.
    fn half_line_integral(
        &self,
        negative: bool,
        a: f64,
        b: f64,
        power: u32,
        original: (f64, f64),
    ) -> Result<f64> {
        let (c, beta, alpha) = self.side(negative);
        if c == 0.0 || a >= b {
            return Ok(0.0);
        }
        let e = power as f64 - alpha;
        if a == 0.0 && e <= 1e-12 {
            return Err(Error::NonIntegrable { lo: original.0, hi: original.1, power });
        }
        let fail = || Error::QuadratureFailure { lo: original.0, hi: original.1, tol: QUAD_TOL };
        let q = if e.abs() <= 1e-12 {
            let f = |s: f64| (-beta * s.exp()).exp();
            let q = adaptive_simpson(&f, a.ln(), b.ln(), QUAD_TOL / c);
            (q.value * c, q.converged)
        } else {
            let inv = 1.0 / e;
            let f = |t: f64| (-beta * t.powf(inv)).exp();
            let (ta, tb) = (a.powf(e), b.powf(e));
            let scale = c / e.abs();
            let (lo_t, hi_t) = if ta < tb { (ta, tb) } else { (tb, ta) };
            let q = adaptive_simpson(&f, lo_t, hi_t, QUAD_TOL / scale);
            (q.value * scale, q.converged)
        };
        if !q.1 || !q.0.is_finite() {
            return Err(fail());
        }
        Ok(q.0)
    }

    /// Small-jump second moments `ς₁(δ)`, `ς₂(δ)` and their sum, with
    /// `π₁ = π₂ = self`.
    pub fn varsigma(&self, delta: f64) -> Result<Varsigma> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParams(format!("delta must lie in (0, 1], got {delta}")));
        }
        let s1 = self.measure_integral(-delta, delta, 2)?;
        Ok(Varsigma { s1, s2: s1, s: 2.0 * s1 })
    }

    /// Mass of `{lo <= |z| <= hi}`.
    pub fn two_sided_mass(&self, lo: f64, hi: f64) -> Result<f64> {
        Ok(self.measure_integral(-hi, -lo, 0)? + self.measure_integral(lo, hi, 0)?)
    }
}

/// Index of the cell `((k - 1/2)h, (k + 1/2)h]` containing `z`.
#[inline]
pub fn cell_of(z: f64, h: f64) -> i64 {
    (z / h - 0.5).ceil() as i64
}

/// Decomposition of the segment from 0 to `k h` by the cells it crosses.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentPartition {
    pub k: i64,
    pub chi: usize,
    /// Cell indices `r_1 = 0, ..., r_chi = k`.
    pub indices: Vec<i64>,
    /// Breakpoints `0 = θ_0 <= ... <= θ_chi = 1`.
    pub theta: Vec<f64>,
    /// `∫_{θ_{l-1}}^{θ_l} (1 - θ) dθ`
    pub theta_bar: Vec<f64>,
    /// `θ_l - θ_{l-1}`
    pub theta_tilde: Vec<f64>,
}

/// The partition for cell `k`. The spacing only scales the geometry, so the
/// result does not depend on `h` in one dimension.
pub fn segment_partition(_h: f64, k: i64) -> SegmentPartition {
    if k == 0 {
        return SegmentPartition {
            k,
            chi: 1,
            indices: vec![0],
            theta: vec![0.0, 1.0],
            theta_bar: vec![0.5],
            theta_tilde: vec![1.0],
        };
    }
    let n = k.unsigned_abs() as usize;
    let nf = n as f64;
    let sign = k.signum();
    let chi = n + 1;
    let indices = (0..chi as i64).map(|l| sign * l).collect();
    let mut theta = Vec::with_capacity(chi + 1);
    theta.push(0.0);
    for l in 1..=n {
        theta.push((2 * l - 1) as f64 / (2.0 * nf));
    }
    theta.push(1.0);
    // Closed forms per leg keep each entry within an ulp of its exact value.
    let mut theta_bar = Vec::with_capacity(chi);
    let mut theta_tilde = Vec::with_capacity(chi);
    theta_bar.push((1.0 - 1.0 / (4.0 * nf)) / (2.0 * nf));
    theta_tilde.push(1.0 / (2.0 * nf));
    for l in 2..=n {
        theta_bar.push((1.0 - (l - 1) as f64 / nf) / nf);
        theta_tilde.push(1.0 / nf);
    }
    theta_bar.push(1.0 / (8.0 * nf * nf));
    theta_tilde.push(1.0 / (2.0 * nf));
    SegmentPartition { k, chi, indices, theta, theta_bar, theta_tilde }
}

/// Per-`(h, δ)` discretization tables of the jump measure.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCoefficients {
    pub h: f64,
    pub delta: f64,
    /// `ζ_k = ∫_{B_k} z² π(dz)`
    pub zeta: BTreeMap<i64, f64>,
    /// `ζ̄_k = π(B̄_k)`
    pub zeta_bar: BTreeMap<i64, f64>,
    /// `ξ̄_k = ∫_{B̄_k ∩ [-1,1]} z π(dz)`
    pub xi_bar: BTreeMap<i64, f64>,
    pub partitions: BTreeMap<i64, SegmentPartition>,
}

#[derive(Serialize, Deserialize)]
struct CellTables {
    h: f64,
    delta: f64,
    zeta: BTreeMap<i64, f64>,
    zeta_bar: BTreeMap<i64, f64>,
    xi_bar: BTreeMap<i64, f64>,
}

impl CellCoefficients {
    pub fn build(m: &LevyMeasure, h: f64, delta: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParams(format!("cell width must be positive, got {h}")));
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::InvalidParams(format!("delta must lie in (0, 1], got {delta}")));
        }
        let z = m.support_radius;
        let k_min = (-z / h - 0.5).floor() as i64 + 1;
        let k_max = (z / h + 0.5).ceil() as i64 - 1;
        let mut zeta = BTreeMap::new();
        let mut zeta_bar = BTreeMap::new();
        let mut xi_bar = BTreeMap::new();
        if !m.is_zero() {
            for k in k_min..=k_max {
                let lo = ((k as f64 - 0.5) * h).max(-z);
                let hi = ((k as f64 + 0.5) * h).min(z);
                if lo >= hi {
                    continue;
                }
                let (s_lo, s_hi) = (lo.max(-delta), hi.min(delta));
                if s_lo < s_hi {
                    let v = m.measure_integral(s_lo, s_hi, 2)?;
                    if v > 0.0 {
                        zeta.insert(k, v);
                    }
                }
                let mut mass = 0.0;
                let mut first = 0.0;
                for (a, b) in [(lo, hi.min(-delta)), (lo.max(delta), hi)] {
                    if a < b {
                        mass += m.measure_integral(a, b, 0)?;
                        let (fa, fb) = (a.max(-1.0), b.min(1.0));
                        if fa < fb {
                            first += m.measure_integral(fa, fb, 1)?;
                        }
                    }
                }
                if mass > 0.0 {
                    zeta_bar.insert(k, mass);
                    xi_bar.insert(k, first);
                }
            }
        }
        Ok(Self::from_tables(h, delta, zeta, zeta_bar, xi_bar))
    }

    fn from_tables(
        h: f64,
        delta: f64,
        zeta: BTreeMap<i64, f64>,
        zeta_bar: BTreeMap<i64, f64>,
        xi_bar: BTreeMap<i64, f64>,
    ) -> Self {
        let partitions = zeta.keys().map(|&k| (k, segment_partition(h, k))).collect();
        Self { h, delta, zeta, zeta_bar, xi_bar, partitions }
    }

    /// `Σ_k ζ̄_k = π({|z| > δ})`
    pub fn large_mass(&self) -> f64 {
        self.zeta_bar.values().sum()
    }

    /// `Σ_k ξ̄_k = ∫_{δ<|z|<=1} z π(dz)`
    pub fn large_drift(&self) -> f64 {
        self.xi_bar.values().sum()
    }

    /// `Σ_k ζ_k = ς₁(δ)`
    pub fn small_second_moment(&self) -> f64 {
        self.zeta.values().sum()
    }

    /// Cells with a nonzero small-jump moment.
    pub fn small_cells(&self) -> impl Iterator<Item = i64> + '_ {
        self.zeta.keys().copied()
    }

    pub fn partition(&self, k: i64) -> Result<&SegmentPartition> {
        self.partitions.get(&k).ok_or(Error::UnknownCell(k))
    }

    /// Shift weights `w_j = Σ_k ζ_k Σ_{l : r_l = j} θ̄_l` so that
    /// `I^h_δ φ = Σ_j w_j (δ_h δ_{-h} φ)(· + j h)`.
    pub fn small_drift_weights(&self) -> BTreeMap<i64, f64> {
        let mut w = BTreeMap::new();
        for (&k, &z) in &self.zeta {
            let p = &self.partitions[&k];
            for (&r, &tb) in p.indices.iter().zip(&p.theta_bar) {
                *w.entry(r).or_insert(0.0) += z * tb;
            }
        }
        w
    }

    /// Shift weights `w_j = Σ_k c_k Σ_{l : r_l = j} θ̃_l` for per-cell
    /// multipliers `c_k`, so that `Σ_k c_k · stencil_k(φ) = Σ_j w_j (δ_h φ)(· + j h)`.
    pub fn small_noise_weights(&self, multipliers: &BTreeMap<i64, f64>) -> Result<BTreeMap<i64, f64>> {
        let mut w = BTreeMap::new();
        for (&k, &c) in multipliers {
            if c == 0.0 {
                continue;
            }
            let p = self.partition(k)?;
            for (&r, &tt) in p.indices.iter().zip(&p.theta_tilde) {
                *w.entry(r).or_insert(0.0) += c * tt;
            }
        }
        Ok(w)
    }

    pub fn to_json(&self) -> Result<String> {
        let t = CellTables {
            h: self.h,
            delta: self.delta,
            zeta: self.zeta.clone(),
            zeta_bar: self.zeta_bar.clone(),
            xi_bar: self.xi_bar.clone(),
        };
        serde_json::to_string_pretty(&t).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: CellTables = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        Ok(Self::from_tables(t.h, t.delta, t.zeta, t.zeta_bar, t.xi_bar))
    }
}
