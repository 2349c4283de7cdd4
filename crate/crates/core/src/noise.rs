//! Noise realizations and their discretization.
//!
//! A [`NoisePath`] holds one draw of the driving noise at the finest time
//! step: Wiener increments, a Brownian surrogate for jumps below `ε`, and the
//! compound-Poisson list of jumps with `ε <= |z| <= Z`. [`bin_increments`]
//! turns it into per-cell increments for a given `(h, τ)`, and [`coarsen`]
//! sums them over coarser steps, so every resolution in a study sees the same
//! randomness.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::levy::{cell_of, CellCoefficients, LevyMeasure};

/// Default small-jump cut-off `ε = 2⁻⁸`.
pub const DEFAULT_EPS: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub measure: LevyMeasure,
    pub horizon: f64,
    pub tau_fine: f64,
    pub eps: f64,
    /// Number of independent Wiener channels.
    pub channels: usize,
}

/// The number of steps `horizon / tau`, if it is an integer.
pub fn step_count(horizon: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidParams(format!("need positive horizon and step, got {horizon}, {tau}")));
    }
    let n = (horizon / tau).round();
    if n < 1.0 || ((n * tau - horizon).abs() > 1e-10 * horizon) {
        return Err(Error::InvalidParams(format!("step {tau} does not divide horizon {horizon}")));
    }
    Ok(n as usize)
}

fn integer_ratio(coarse: f64, fine: f64) -> Option<usize> {
    let r = (coarse / fine).round();
    if r >= 1.0 && (r * fine - coarse).abs() <= 1e-10 * coarse {
        Some(r as usize)
    } else {
        None
    }
}

/// One noise realization on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub measure: LevyMeasure,
    pub horizon: f64,
    pub tau_fine: f64,
    pub eps: f64,
    pub seed: u64,
    pub stream: u64,
    /// `∫_{|z|<ε} z² π(dz)`
    pub small_variance: f64,
    /// `wiener[channel][n]`, each `N(0, tau_fine)`.
    pub wiener: Vec<Vec<f64>>,
    /// Increments of the Brownian stand-in for jumps below `ε`.
    pub small_jump_wiener: Vec<f64>,
    /// Jumps with `ε <= |size| <= Z`, ordered by time.
    pub jumps: Vec<Jump>,
}

/// Jump-size sampler for the density of `π` restricted to `ε <= |z| <= Z`.
///
/// Each half-line is sampled by proposing from a Pareto law with the side's
/// stability index and accepting with probability `e^{-β(x - ε)}`.
#[derive(Debug, Clone)]
pub struct JumpSizeSampler {
    eps: f64,
    support: f64,
    p_negative: f64,
    minus: (f64, f64),
    plus: (f64, f64),
    /// Intensity `λ = π({ε <= |z| <= Z})`.
    pub intensity: f64,
}

impl JumpSizeSampler {
    pub fn new(m: &LevyMeasure, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParams(format!("eps must be positive, got {eps}")));
        }
        let z = m.support_radius;
        let (neg, pos) = if eps < z {
            (m.measure_integral(-z, -eps, 0)?, m.measure_integral(eps, z, 0)?)
        } else {
            (0.0, 0.0)
        };
        let total = neg + pos;
        Ok(Self {
            eps,
            support: z,
            p_negative: if total > 0.0 { neg / total } else { 0.0 },
            minus: (m.alpha_minus, m.beta_minus),
            plus: (m.alpha_plus, m.beta_plus),
            intensity: total,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let negative = rng.random::<f64>() < self.p_negative;
        let (alpha, beta) = if negative { self.minus } else { self.plus };
        loop {
            // 1 - U lies in (0, 1]
            let u = 1.0 - rng.random::<f64>();
            let x = self.eps * u.powf(-1.0 / alpha);
            if x > self.support {
                continue;
            }
            let accept = (-beta * (x - self.eps)).exp();
            if rng.random::<f64>() < accept {
                return if negative { -x } else { x };
            }
        }
    }
}

/// One draw from `π` restricted to `ε <= |z| <= Z`, normalized.
pub fn sample_jump_size<R: Rng + ?Sized>(m: &LevyMeasure, eps: f64, rng: &mut R) -> Result<f64> {
    let s = JumpSizeSampler::new(m, eps)?;
    if s.intensity == 0.0 {
        return Err(Error::InvalidParams("measure has no mass above eps".into()));
    }
    Ok(s.sample(rng))
}

/// Generator for replication `stream` of a study seeded with `seed`.
pub fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Simulates one path; identical `(seed, stream)` give identical paths.
pub fn simulate_path(params: &PathParams, seed: u64, stream: u64) -> Result<NoisePath> {
    let PathParams { measure, horizon, tau_fine, eps, channels } = *params;
    measure.validate()?;
    let steps = step_count(horizon, tau_fine)?;
    if !(eps > 0.0 && eps < measure.support_radius) {
        return Err(Error::InvalidParams(format!("eps {eps} must lie in (0, Z)")));
    }
    let sampler = JumpSizeSampler::new(&measure, eps)?;
    let small_variance = measure.measure_integral(-eps, eps, 2)?;
    let mut rng = replication_rng(seed, stream);
    let sd = tau_fine.sqrt();
    let normal = |scale: f64, rng: &mut ChaCha8Rng| -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    };
    let wiener = (0..channels)
        .map(|_| (0..steps).map(|_| normal(sd, &mut rng)).collect())
        .collect();
    let small_sd = (small_variance * tau_fine).sqrt();
    let small_jump_wiener = (0..steps).map(|_| normal(small_sd, &mut rng)).collect();
    let mean = sampler.intensity * horizon;
    let count = if mean > 0.0 {
        let p = Poisson::new(mean).map_err(|e| Error::InvalidParams(e.to_string()))?;
        p.sample(&mut rng) as usize
    } else {
        0
    };
    let mut times: Vec<f64> = (0..count).map(|_| horizon * (1.0 - rng.random::<f64>())).collect();
    times.sort_by(f64::total_cmp);
    let jumps = times.into_iter().map(|time| Jump { time, size: sampler.sample(&mut rng) }).collect();
    Ok(NoisePath {
        measure,
        horizon,
        tau_fine,
        eps,
        seed,
        stream,
        small_variance,
        wiener,
        small_jump_wiener,
        jumps,
    })
}

impl NoisePath {
    pub fn steps(&self) -> usize {
        self.small_jump_wiener.len()
    }

    fn fine_index(&self, t: f64) -> Result<usize> {
        let n = t / self.tau_fine;
        let r = n.round();
        if r < 0.0 || (n - r).abs() > 1e-9 || r as usize > self.steps() {
            return Err(Error::TimeNotOnGrid(t));
        }
        Ok(r as usize)
    }

    /// `w_t` for channel `channel`.
    pub fn wiener_at(&self, channel: usize, t: f64) -> Result<f64> {
        let n = self.fine_index(t)?;
        let ch = self
            .wiener
            .get(channel)
            .ok_or_else(|| Error::InvalidParams(format!("no wiener channel {channel}")))?;
        Ok(ch[..n].iter().sum())
    }

    /// Sum of the simulated jumps in `(0, t]` plus the Brownian surrogate at `t`.
    pub fn jump_sum_at(&self, t: f64) -> Result<f64> {
        let n = self.fine_index(t)?;
        let jump_sum: f64 = self.jumps.iter().take_while(|j| j.time <= t).map(|j| j.size).sum();
        let surrogate: f64 = self.small_jump_wiener[..n].iter().sum();
        Ok(jump_sum + surrogate)
    }

    /// `w_{t_n}` and [`Self::jump_sum_at`] at `t_n = n τ` for `n = 0..=T/τ`.
    pub fn cumulative(&self, tau: f64, channel: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let factor = integer_ratio(tau, self.tau_fine)
            .ok_or(Error::ResolutionMismatch { tau, fine: self.tau_fine })?;
        if self.steps() % factor != 0 {
            return Err(Error::IndivisibleFactor { factor, steps: self.steps() });
        }
        let steps = self.steps() / factor;
        let ch = self
            .wiener
            .get(channel)
            .ok_or_else(|| Error::InvalidParams(format!("no wiener channel {channel}")))?;
        let mut w = Vec::with_capacity(steps + 1);
        let mut l = Vec::with_capacity(steps + 1);
        let (mut wsum, mut ssum) = (0.0, 0.0);
        let mut jsum = 0.0;
        let mut next_jump = 0;
        w.push(0.0);
        l.push(0.0);
        for n in 1..=steps {
            for i in (n - 1) * factor..n * factor {
                wsum += ch[i];
                ssum += self.small_jump_wiener[i];
            }
            let t = n as f64 * tau;
            while next_jump < self.jumps.len() && self.jumps[next_jump].time <= t {
                jsum += self.jumps[next_jump].size;
                next_jump += 1;
            }
            w.push(wsum);
            l.push(jsum + ssum);
        }
        Ok((w, l))
    }

    const MAGIC: &'static [u8; 8] = b"SIDENP01";

    /// Little-endian binary dump: magic, seed, stream, measure, horizon,
    /// tau_fine, eps, small variance, counts, then the arrays.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        for v in [self.seed, self.stream] {
            w.write_all(&v.to_le_bytes())?;
        }
        let m = &self.measure;
        for v in [
            m.c_minus,
            m.c_plus,
            m.beta_minus,
            m.beta_plus,
            m.alpha_minus,
            m.alpha_plus,
            m.support_radius,
            self.horizon,
            self.tau_fine,
            self.eps,
            self.small_variance,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [self.wiener.len(), self.steps(), self.jumps.len()] {
            w.write_all(&(v as u64).to_le_bytes())?;
        }
        for ch in &self.wiener {
            for v in ch {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for v in &self.small_jump_wiener {
            w.write_all(&v.to_le_bytes())?;
        }
        for j in &self.jumps {
            w.write_all(&j.time.to_le_bytes())?;
            w.write_all(&j.size.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::Format("not a noise path dump".into()));
        }
        let seed = read_u64(&mut r)?;
        let stream = read_u64(&mut r)?;
        let mut head = [0.0; 11];
        for v in head.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let measure = LevyMeasure::new(head[0], head[1], head[2], head[3], head[4], head[5], head[6])?;
        let channels = read_u64(&mut r)? as usize;
        let steps = read_u64(&mut r)? as usize;
        let njumps = read_u64(&mut r)? as usize;
        let f = |r: &mut R| read_f64(r);
        let mut wiener = Vec::with_capacity(channels);
        for _ in 0..channels {
            wiener.push((0..steps).map(|_| f(&mut r)).collect::<Result<Vec<_>>>()?);
        }
        let small_jump_wiener = (0..steps).map(|_| f(&mut r)).collect::<Result<Vec<_>>>()?;
        let mut jumps = Vec::with_capacity(njumps);
        for _ in 0..njumps {
            let time = f(&mut r)?;
            let size = f(&mut r)?;
            jumps.push(Jump { time, size });
        }
        Ok(Self {
            measure,
            horizon: head[7],
            tau_fine: head[8],
            eps: head[9],
            seed,
            stream,
            small_variance: head[10],
            wiener,
            small_jump_wiener,
            jumps,
        })
    }
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

/// Per-step, per-cell increments of one path at resolution `(h, τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedIncrements {
    pub h: f64,
    pub tau: f64,
    /// `wiener[channel][n]`
    pub wiener: Vec<Vec<f64>>,
    /// Brownian surrogate increment per step (already included in `small[n][0]`).
    pub surrogate: Vec<f64>,
    /// Compensated small-jump increments `Δp^{h,k,1}_n`.
    pub small: Vec<BTreeMap<i64, f64>>,
    /// Raw large-jump counts `Δp̂^{h,k}_n`.
    pub large_raw: Vec<BTreeMap<i64, u32>>,
    /// Jump events of each step.
    pub events: Vec<Vec<Jump>>,
    /// Large-jump cell masses, for compensation.
    pub zeta_bar: BTreeMap<i64, f64>,
    /// Small-cell compensator rates `∫_{B_k, |z|>=ε} z π(dz)`.
    pub small_compensator: BTreeMap<i64, f64>,
}

impl BinnedIncrements {
    pub fn steps(&self) -> usize {
        self.surrogate.len()
    }

    /// `Δp̄^{h,k}_n = Δp̂^{h,k}_n - ζ̄_k τ` over every large-jump cell.
    pub fn large_compensated(&self, n: usize) -> BTreeMap<i64, f64> {
        let mut out: BTreeMap<i64, f64> = self.zeta_bar.iter().map(|(&k, &z)| (k, -z * self.tau)).collect();
        for (&k, &c) in &self.large_raw[n] {
            *out.entry(k).or_insert(0.0) += c as f64;
        }
        out
    }

    /// Small-jump sums of step `n` before compensation and without the surrogate.
    pub fn small_raw(&self, n: usize) -> BTreeMap<i64, f64> {
        let mut out = self.small[n].clone();
        for (k, v) in out.iter_mut() {
            *v += self.tau * self.small_compensator.get(k).copied().unwrap_or(0.0);
            if *k == 0 {
                *v -= self.surrogate[n];
            }
        }
        out
    }
}

/// Bins `path` into the cells of `cc` at time step `tau`.
pub fn bin_increments(path: &NoisePath, cc: &CellCoefficients, tau: f64) -> Result<BinnedIncrements> {
    let factor = integer_ratio(tau, path.tau_fine).ok_or(Error::ResolutionMismatch { tau, fine: path.tau_fine })?;
    if path.steps() % factor != 0 {
        return Err(Error::IndivisibleFactor { factor, steps: path.steps() });
    }
    if !(path.eps < cc.delta) {
        return Err(Error::InvalidParams(format!("eps {} must be below delta {}", path.eps, cc.delta)));
    }
    let steps = path.steps() / factor;
    let (h, delta, eps) = (cc.h, cc.delta, path.eps);

    let mut small_compensator = BTreeMap::new();
    for k in cc.small_cells() {
        let lo = ((k as f64 - 0.5) * h).max(-delta);
        let hi = ((k as f64 + 0.5) * h).min(delta);
        let mut rate = 0.0;
        for (a, b) in [(lo, hi.min(-eps)), (lo.max(eps), hi)] {
            if a < b {
                rate += path.measure.measure_integral(a, b, 1)?;
            }
        }
        small_compensator.insert(k, rate);
    }

    let block = |v: &[f64]| -> Vec<f64> { v.chunks(factor).map(|c| c.iter().sum()).collect() };
    let wiener: Vec<Vec<f64>> = path.wiener.iter().map(|ch| block(ch)).collect();
    let surrogate = block(&path.small_jump_wiener);

    let base: BTreeMap<i64, f64> = small_compensator.iter().map(|(&k, &r)| (k, -r * tau)).collect();
    let mut small: Vec<BTreeMap<i64, f64>> = vec![base; steps];
    for (n, s) in surrogate.iter().enumerate() {
        if *s != 0.0 {
            *small[n].entry(0).or_insert(0.0) += s;
        }
    }
    let mut large_raw = vec![BTreeMap::new(); steps];
    let mut events = vec![Vec::new(); steps];
    for j in &path.jumps {
        // (t_{n-1}, t_n] is step n - 1
        let n = ((j.time / tau).ceil() as usize).clamp(1, steps) - 1;
        let k = cell_of(j.size, h);
        if j.size.abs() <= delta {
            *small[n].entry(k).or_insert(0.0) += j.size;
        } else {
            *large_raw[n].entry(k).or_insert(0u32) += 1;
        }
        events[n].push(*j);
    }
    Ok(BinnedIncrements {
        h,
        tau,
        wiener,
        surrogate,
        small,
        large_raw,
        events,
        zeta_bar: cc.zeta_bar.clone(),
        small_compensator,
    })
}

/// Sums `factor` consecutive steps.
pub fn coarsen(b: &BinnedIncrements, factor: usize) -> Result<BinnedIncrements> {
    let steps = b.steps();
    if factor == 0 || steps % factor != 0 {
        return Err(Error::IndivisibleFactor { factor, steps });
    }
    if factor == 1 {
        return Ok(b.clone());
    }
    let coarse = steps / factor;
    let block = |v: &[f64]| -> Vec<f64> { v.chunks(factor).map(|c| c.iter().sum()).collect() };
    let mut small = Vec::with_capacity(coarse);
    let mut large_raw = Vec::with_capacity(coarse);
    let mut events = Vec::with_capacity(coarse);
    for c in 0..coarse {
        let mut s = BTreeMap::new();
        let mut l = BTreeMap::new();
        let mut e = Vec::new();
        for n in c * factor..(c + 1) * factor {
            for (&k, &v) in &b.small[n] {
                *s.entry(k).or_insert(0.0) += v;
            }
            for (&k, &v) in &b.large_raw[n] {
                *l.entry(k).or_insert(0u32) += v;
            }
            e.extend_from_slice(&b.events[n]);
        }
        small.push(s);
        large_raw.push(l);
        events.push(e);
    }
    Ok(BinnedIncrements {
        h: b.h,
        tau: b.tau * factor as f64,
        wiener: b.wiener.iter().map(|ch| block(ch)).collect(),
        surrogate: block(&b.surrogate),
        small,
        large_raw,
        events,
        zeta_bar: b.zeta_bar.clone(),
        small_compensator: b.small_compensator.clone(),
    })
}
