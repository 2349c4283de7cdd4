//! Monte Carlo convergence studies on the benchmark problem.
//!
//! Each replication draws one noise path at the finest time step of the
//! sweep; every `(h, τ)` pair bins that same path, so the differences
//! between resolutions reflect discretization error rather than sampling
//! noise.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::benchmark::BenchmarkParams;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::levy::{CellCoefficients, LevyMeasure};
use crate::noise::{bin_increments, simulate_path, step_count, JumpSizeSampler};
use crate::schemes::{cfl_rhs, ErrorRegion, NoForcing, SchemeConfig, SchemeKind, Stepper};

/// How the time step is chosen for each spacing.
#[derive(Debug, Clone, PartialEq)]
pub enum TauRule {
    /// `τ = h²`
    HSquared,
    /// One `τ` per entry of the spacing list.
    List(Vec<f64>),
}

impl FromStr for TauRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("h2") {
            return Ok(TauRule::HSquared);
        }
        if let Some(rest) = s.strip_prefix("list:") {
            return Ok(TauRule::List(parse_list(rest)?));
        }
        Err(Error::InvalidParams(format!("unknown tau rule {s:?}; expected h2 or list:a,b,...")))
    }
}

/// Comma-separated reals; entries like `2^-5` are accepted.
pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',').filter(|t| !t.trim().is_empty()).map(parse_real).collect()
}

fn parse_real(t: &str) -> Result<f64> {
    let t = t.trim();
    if let Some((base, exp)) = t.split_once('^') {
        let b: f64 = base.trim().parse().map_err(|_| Error::InvalidParams(format!("bad number {t:?}")))?;
        let e: i32 = exp.trim().parse().map_err(|_| Error::InvalidParams(format!("bad number {t:?}")))?;
        return Ok(b.powi(e));
    }
    t.parse().map_err(|_| Error::InvalidParams(format!("bad number {t:?}")))
}

/// `full`, or a radius for [`ErrorRegion::Inner`].
pub fn parse_region(s: &str) -> Result<ErrorRegion> {
    if s.trim().eq_ignore_ascii_case("full") {
        Ok(ErrorRegion::FullGrid)
    } else {
        let r = parse_real(s)?;
        if !(r > 0.0) {
            return Err(Error::InvalidParams(format!("inner radius must be positive, got {r}")));
        }
        Ok(ErrorRegion::Inner(r))
    }
}

pub fn parse_schemes(s: &str) -> Result<Vec<SchemeKind>> {
    let mut out: Vec<SchemeKind> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub params: BenchmarkParams,
    /// Spacings, strictly decreasing.
    pub h_list: Vec<f64>,
    pub tau_rule: TauRule,
    pub replications: usize,
    pub schemes: Vec<SchemeKind>,
    pub base_seed: u64,
    pub error_region: ErrorRegion,
    pub compensator_cancellation: bool,
    /// Worker count; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            params: BenchmarkParams::default(),
            h_list: (2..=7).map(|e| 2f64.powi(-e)).collect(),
            tau_rule: TauRule::HSquared,
            replications: 200,
            schemes: vec![SchemeKind::Explicit, SchemeKind::Imex],
            base_seed: 20130101,
            error_region: ErrorRegion::FullGrid,
            compensator_cancellation: true,
            threads: None,
        }
    }
}

impl StudyConfig {
    /// The `τ` used with each spacing.
    pub fn taus(&self) -> Result<Vec<f64>> {
        match &self.tau_rule {
            TauRule::HSquared => Ok(self.h_list.iter().map(|h| h * h).collect()),
            TauRule::List(t) if t.len() == self.h_list.len() => Ok(t.clone()),
            TauRule::List(t) => Err(Error::InvalidParams(format!(
                "{} time steps for {} spacings",
                t.len(),
                self.h_list.len()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.h_list.is_empty() {
            return Err(Error::InvalidParams("empty spacing list".into()));
        }
        if self.h_list.iter().any(|h| !(*h > 0.0)) || self.h_list.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidParams("spacings must be positive and strictly decreasing".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParams("need at least one replication".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParams("thread count must be positive".into()));
        }
        let taus = self.taus()?;
        let fine = taus.iter().copied().fold(f64::INFINITY, f64::min);
        for &tau in &taus {
            step_count(self.params.horizon, tau)?;
            let r = (tau / fine).round();
            if (r * fine - tau).abs() > 1e-10 * tau {
                return Err(Error::ResolutionMismatch { tau, fine });
            }
        }
        Ok(())
    }

    /// Parses a TOML file with optional `[measure]`, `[coefficients]` and
    /// `[study]` tables; absent keys keep their defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        let mut cfg = StudyConfig::default();
        let p = &mut cfg.params;
        let m = file.measure;
        p.measure = LevyMeasure::new(
            m.c_minus,
            m.c_plus,
            m.beta_minus,
            m.beta_plus,
            m.alpha_minus,
            m.alpha_plus,
            m.support_radius,
        )?;
        p.sigma0 = file.coefficients.sigma0;
        p.sigma1 = file.coefficients.sigma1;
        p.sigma2 = file.coefficients.sigma2;
        let st = file.study;
        p.horizon = st.horizon.unwrap_or(p.horizon);
        p.radius = st.radius.unwrap_or(p.radius);
        p.delta = st.delta.unwrap_or(p.delta);
        p.eps = st.eps.unwrap_or(p.eps);
        if let Some(h) = st.h_list {
            cfg.h_list = h;
        }
        if let Some(t) = st.tau_rule {
            cfg.tau_rule = t.parse()?;
        }
        if let Some(m) = st.replications {
            cfg.replications = m;
        }
        if let Some(s) = st.schemes {
            cfg.schemes = parse_schemes(&s.join(","))?;
        }
        if let Some(s) = st.seed {
            cfg.base_seed = s;
        }
        if let Some(r) = st.error_region {
            cfg.error_region = parse_region(&r)?;
        }
        if let Some(c) = st.compensator_cancellation {
            cfg.compensator_cancellation = c;
        }
        cfg.threads = st.threads.or(cfg.threads);
        Ok(cfg)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    measure: MeasureSection,
    coefficients: CoefficientSection,
    study: StudySection,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct MeasureSection {
    c_minus: f64,
    c_plus: f64,
    beta_minus: f64,
    beta_plus: f64,
    alpha_minus: f64,
    alpha_plus: f64,
    support_radius: f64,
}

impl Default for MeasureSection {
    fn default() -> Self {
        let m = BenchmarkParams::default().measure;
        Self {
            c_minus: m.c_minus,
            c_plus: m.c_plus,
            beta_minus: m.beta_minus,
            beta_plus: m.beta_plus,
            alpha_minus: m.alpha_minus,
            alpha_plus: m.alpha_plus,
            support_radius: m.support_radius,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CoefficientSection {
    sigma0: f64,
    sigma1: f64,
    sigma2: f64,
}

impl Default for CoefficientSection {
    fn default() -> Self {
        let p = BenchmarkParams::default();
        Self { sigma0: p.sigma0, sigma1: p.sigma1, sigma2: p.sigma2 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct StudySection {
    h_list: Option<Vec<f64>>,
    tau_rule: Option<String>,
    replications: Option<usize>,
    schemes: Option<Vec<String>>,
    seed: Option<u64>,
    error_region: Option<String>,
    compensator_cancellation: Option<bool>,
    threads: Option<usize>,
    horizon: Option<f64>,
    radius: Option<f64>,
    delta: Option<f64>,
    eps: Option<f64>,
}

/// Monte Carlo error statistics for one scheme at one resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub scheme: SchemeKind,
    pub h: f64,
    pub tau: f64,
    /// Replications that completed.
    pub m: usize,
    /// Estimate of `E max_n sup_x |u - û|²`.
    pub mean_sq_sup: f64,
    pub se_sup: f64,
    /// Estimate of `E max_n ‖u - û‖²`.
    pub mean_sq_l2: f64,
    pub se_l2: f64,
    pub active_small_cells: usize,
    pub failures: usize,
}

impl ErrorRow {
    pub fn rms(&self, norm: Norm) -> f64 {
        match norm {
            Norm::Sup => self.mean_sq_sup.sqrt(),
            Norm::L2 => self.mean_sq_l2.sqrt(),
        }
    }

    /// Standard error of [`Self::rms`] by the delta method.
    pub fn rms_se(&self, norm: Norm) -> f64 {
        let (msq, se) = match norm {
            Norm::Sup => (self.mean_sq_sup, self.se_sup),
            Norm::L2 => (self.mean_sq_l2, self.se_l2),
        };
        if msq > 0.0 {
            se / (2.0 * msq.sqrt())
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Sup,
    L2,
}

impl Norm {
    pub fn name(&self) -> &'static str {
        match self {
            Norm::Sup => "sup",
            Norm::L2 => "l2",
        }
    }
}

/// Least-squares line through `(log₂ h, log₂ RMS)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub scheme: SchemeKind,
    pub norm: Norm,
    pub slope: f64,
    pub intercept: f64,
    /// 95% band; NaN with fewer than three points.
    pub ci_low: f64,
    pub ci_high: f64,
    pub points: usize,
}

/// A nominal benchmark constant next to our evaluation of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValue {
    pub name: String,
    pub nominal: Option<f64>,
    pub computed: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
    pub slopes: Vec<SlopeFit>,
    pub reference: Vec<ReferenceValue>,
}

/// Slope, intercept and half-width of the 95% band of the least-squares fit
/// of `y` on `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if x.len() < 3 {
        return (slope, intercept, f64::NAN);
    }
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::NAN);
    (slope, intercept, t * se)
}

/// Fits `log₂ RMS` against `log₂ h` for every scheme and norm in `rows`.
pub fn fit_slopes(rows: &[ErrorRow]) -> Vec<SlopeFit> {
    let mut schemes: Vec<SchemeKind> = rows.iter().map(|r| r.scheme).collect();
    schemes.sort();
    schemes.dedup();
    let mut out = Vec::new();
    for scheme in schemes {
        for norm in [Norm::Sup, Norm::L2] {
            let (x, y): (Vec<f64>, Vec<f64>) = rows
                .iter()
                .filter(|r| r.scheme == scheme)
                .map(|r| (r.h, r.rms(norm)))
                .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
                .map(|(h, e)| (h.log2(), e.log2()))
                .unzip();
            if x.len() < 2 {
                continue;
            }
            let (slope, intercept, half) = fit_line(&x, &y);
            out.push(SlopeFit {
                scheme,
                norm,
                slope,
                intercept,
                ci_low: slope - half,
                ci_high: slope + half,
                points: x.len(),
            });
        }
    }
    out
}

/// Printed benchmark constants set against our own evaluation.
pub fn reference_constants(p: &BenchmarkParams) -> Result<Vec<ReferenceValue>> {
    let m = p.measure;
    let vs = m.varsigma(p.delta)?;
    let c = p.coefficients()?;
    let g = Grid::new(1.0, p.radius)?;
    let lambda = JumpSizeSampler::new(&m, p.eps)?.intensity;
    let a11 = 0.5 * (p.sigma1 * p.sigma1 + p.sigma2 * p.sigma2);
    let kappa_half = (0.5 - vs.s) / (2.0 * a11 + vs.s1).powi(2);
    Ok(vec![
        ReferenceValue { name: "varsigma_1(delta)".into(), nominal: None, computed: vs.s1 },
        ReferenceValue { name: "varsigma(delta)".into(), nominal: Some(0.0082), computed: vs.s },
        ReferenceValue { name: "kappa".into(), nominal: Some(0.5), computed: p.kappa() },
        ReferenceValue { name: "cfl_rhs".into(), nominal: Some(1.0559), computed: cfl_rhs(&c, &m, p.delta, &g, &[0.0])? },
        ReferenceValue { name: "cfl_rhs(kappa=1/2)".into(), nominal: Some(1.0559), computed: kappa_half },
        ReferenceValue { name: "lambda".into(), nominal: Some(68.9676), computed: lambda },
    ])
}

struct Level {
    h: f64,
    tau: f64,
    grid: Grid,
    cc: CellCoefficients,
    steppers: Vec<Stepper>,
}

/// Per replication, per (level, scheme): maxima over `n` of the squared
/// sup and ℓ₂ errors.
type ReplicationResult = Vec<Vec<Option<(f64, f64)>>>;

fn replication(cfg: &StudyConfig, levels: &[Level], tau_fine: f64, r: usize) -> ReplicationResult {
    let p = &cfg.params;
    let failed = || levels.iter().map(|l| vec![None; l.steppers.len()]).collect();
    let path = match simulate_path(&p.path_params(tau_fine), cfg.base_seed, r as u64) {
        Ok(path) => path,
        Err(_) => return failed(),
    };
    levels
        .iter()
        .map(|level| {
            let prepared = bin_increments(&path, &level.cc, level.tau)
                .and_then(|inc| p.driver_shifts(&path, level.tau).map(|s| (inc, s)));
            let (inc, shifts) = match prepared {
                Ok(v) => v,
                Err(_) => return vec![None; level.steppers.len()],
            };
            let region = cfg.error_region.indices(&level.grid);
            let initial = p.initial_condition(&level.grid);
            level
                .steppers
                .iter()
                .map(|stepper| {
                    let (mut sup2, mut l22): (f64, f64) = (0.0, 0.0);
                    let result = stepper.run_with(&inc, &initial, &NoForcing, |n, state| {
                        let t = n as f64 * level.tau;
                        let shift = shifts[n];
                        let (mut s, mut q) = (0.0f64, 0.0);
                        for i in region.clone() {
                            let exact = p.heat_density(t, level.grid.x(i) + shift);
                            let d = state.values()[i] - exact;
                            s = s.max(d.abs());
                            q += d * d;
                        }
                        sup2 = sup2.max(s * s);
                        l22 = l22.max(level.h * q);
                        Ok(())
                    });
                    result.ok().map(|_| (sup2, l22))
                })
                .collect()
        })
        .collect()
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs the study. CFL violations are reported before any simulation.
pub fn run_study(cfg: &StudyConfig) -> Result<ErrorReport> {
    cfg.validate()?;
    let p = &cfg.params;
    let m = p.measure;
    let c = p.coefficients()?;
    let taus = cfg.taus()?;
    let tau_fine = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let mut levels = Vec::with_capacity(cfg.h_list.len());
    for (&h, &tau) in cfg.h_list.iter().zip(&taus) {
        let grid = Grid::new(h, p.radius)?;
        let cc = CellCoefficients::build(&m, h, p.delta)?;
        let steppers = cfg
            .schemes
            .iter()
            .map(|&scheme| {
                let sc = SchemeConfig {
                    h,
                    tau,
                    horizon: p.horizon,
                    delta: p.delta,
                    scheme,
                    compensator_cancellation: cfg.compensator_cancellation,
                    error_region: cfg.error_region,
                };
                Stepper::new(sc, &c, &m, &cc, grid)
            })
            .collect::<Result<Vec<_>>>()?;
        levels.push(Level { h, tau, grid, cc, steppers });
    }
    let reference = reference_constants(p)?;
    if cfg.schemes.is_empty() {
        return Ok(ErrorReport { rows: Vec::new(), slopes: Vec::new(), reference });
    }

    let work = || -> Vec<ReplicationResult> {
        (0..cfg.replications).into_par_iter().map(|r| replication(cfg, &levels, tau_fine, r)).collect()
    };
    let results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut rows = Vec::new();
    for (li, level) in levels.iter().enumerate() {
        for (si, &scheme) in cfg.schemes.iter().enumerate() {
            let ok: Vec<(f64, f64)> = results.iter().filter_map(|r| r[li][si]).collect();
            let sup: Vec<f64> = ok.iter().map(|v| v.0).collect();
            let l2: Vec<f64> = ok.iter().map(|v| v.1).collect();
            let (mean_sq_sup, se_sup) = mean_and_se(&sup);
            let (mean_sq_l2, se_l2) = mean_and_se(&l2);
            rows.push(ErrorRow {
                scheme,
                h: level.h,
                tau: level.tau,
                m: ok.len(),
                mean_sq_sup,
                se_sup,
                mean_sq_l2,
                se_l2,
                active_small_cells: level.cc.small_cells().count(),
                failures: cfg.replications - ok.len(),
            });
        }
    }
    rows.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(b.h.total_cmp(&a.h)));
    let slopes = fit_slopes(&rows);
    Ok(ErrorReport { rows, slopes, reference })
}

const ERRORS_HEADER: &str = "scheme,h,tau,M,mean_sq_sup,se_sup,mean_sq_l2,se_l2,active_small_cells";
const SLOPES_HEADER: &str = "scheme,norm,slope,ci_low,ci_high,points";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn errors_csv(report: &ErrorReport) -> String {
    let mut s = String::from(ERRORS_HEADER);
    s.push('\n');
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.scheme,
            num(r.h),
            num(r.tau),
            r.m,
            num(r.mean_sq_sup),
            num(r.se_sup),
            num(r.mean_sq_l2),
            num(r.se_l2),
            r.active_small_cells
        );
    }
    s
}

pub fn slopes_csv(report: &ErrorReport) -> String {
    let mut s = String::from(SLOPES_HEADER);
    s.push('\n');
    for f in &report.slopes {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            f.scheme,
            f.norm.name(),
            num(f.slope),
            num(f.ci_low),
            num(f.ci_high),
            f.points
        );
    }
    s
}

/// Parses the output of [`errors_csv`]; failure counts are not stored there
/// and come back as zero.
pub fn parse_errors_csv(s: &str) -> Result<Vec<ErrorRow>> {
    let mut lines = s.lines();
    if lines.next() != Some(ERRORS_HEADER) {
        return Err(Error::Format("unexpected errors.csv header".into()));
    }
    let bad = |l: &str| Error::Format(format!("bad errors.csv line {l:?}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 9 {
                return Err(bad(l));
            }
            let r = |i: usize| f[i].parse::<f64>().map_err(|_| bad(l));
            let u = |i: usize| f[i].parse::<usize>().map_err(|_| bad(l));
            Ok(ErrorRow {
                scheme: f[0].parse()?,
                h: r(1)?,
                tau: r(2)?,
                m: u(3)?,
                mean_sq_sup: r(4)?,
                se_sup: r(5)?,
                mean_sq_l2: r(6)?,
                se_l2: r(7)?,
                active_small_cells: u(8)?,
                failures: 0,
            })
        })
        .collect()
}

/// `(scheme, norm, slope)` triples from the output of [`slopes_csv`].
pub fn parse_slopes_csv(s: &str) -> Result<Vec<(SchemeKind, String, f64)>> {
    let mut lines = s.lines();
    if lines.next() != Some(SLOPES_HEADER) {
        return Err(Error::Format("unexpected slopes.csv header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Format(format!("bad slopes.csv line {l:?}")));
            }
            let slope = f[2].parse().map_err(|_| Error::Format(format!("bad slope in {l:?}")))?;
            Ok((f[0].parse()?, f[1].to_string(), slope))
        })
        .collect()
}

/// Human-readable summary: reference constants, failures, fitted slopes.
pub fn study_log(report: &ErrorReport) -> String {
    let mut s = String::from("# reference constants (nominal vs computed)\n");
    for r in &report.reference {
        let nominal = r.nominal.map_or("-".to_string(), |v| v.to_string());
        let _ = writeln!(s, "{:<22} nominal {:>10}  computed {:.10}", r.name, nominal, r.computed);
    }
    s.push_str("# rows\n");
    for r in &report.rows {
        let _ = writeln!(
            s,
            "{:<8} h={:<10} tau={:<12} M={:<5} failures={:<3} rms_sup={:.6e} rms_l2={:.6e} small_cells={}",
            r.scheme,
            r.h,
            r.tau,
            r.m,
            r.failures,
            r.rms(Norm::Sup),
            r.rms(Norm::L2),
            r.active_small_cells
        );
    }
    s.push_str("# slopes\n");
    for f in &report.slopes {
        let _ = writeln!(
            s,
            "{:<8} {:<3} slope={:.4} [{:.4}, {:.4}] points={}",
            f.scheme,
            f.norm.name(),
            f.slope,
            f.ci_low,
            f.ci_high,
            f.points
        );
    }
    s
}

/// Log-log plot of RMS error against `h` with a slope-one guide.
pub fn roc_svg(report: &ErrorReport) -> String {
    let (w, ht, pad) = (640.0, 480.0, 60.0);
    let pts: Vec<(f64, f64)> = report
        .rows
        .iter()
        .flat_map(|r| [Norm::Sup, Norm::L2].map(|n| (r.h, r.rms(n))))
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
        .map(|(h, e)| (h.log2(), e.log2()))
        .collect();
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{ht}\" viewBox=\"0 0 {w} {ht}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if pts.is_empty() {
        s.push_str("<text x=\"20\" y=\"40\">no data</text>\n</svg>\n");
        return s;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (x0, x1) = (x0.floor() - 0.5, x1.ceil() + 0.5);
    let (y0, y1) = (y0.floor() - 0.5, y1.ceil() + 0.5);
    let px = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let py = |y: f64| ht - pad - (y - y0) / (y1 - y0) * (ht - 2.0 * pad);
    let _ = writeln!(
        s,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>",
        pad, ht - pad, w - pad, ht - pad, pad, pad, pad, ht - pad
    );
    let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">log2 h</text>", w / 2.0, ht - 15.0);
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{}\" transform=\"rotate(-90 18 {})\" text-anchor=\"middle\">log2 RMS error</text>",
        ht / 2.0,
        ht / 2.0
    );
    let mut tick = x0.ceil();
    while tick <= x1 {
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">{tick}</text>", px(tick), ht - pad + 16.0);
        tick += 1.0;
    }
    let mut tick = y0.ceil();
    while tick <= y1 {
        let _ = writeln!(s, "<text x=\"{}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{tick}</text>", pad - 6.0, py(tick) + 4.0);
        tick += 1.0;
    }
    // slope-one guide through the largest error
    let (gx, gy) = pts.iter().copied().fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let (ax, bx) = (x0 + 0.5, x1 - 0.5);
    let _ = writeln!(
        s,
        "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>",
        px(ax),
        py(gy + 0.5 + (ax - gx)),
        px(bx),
        py(gy + 0.5 + (bx - gx))
    );
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let mut series = 0;
    let mut schemes: Vec<SchemeKind> = report.rows.iter().map(|r| r.scheme).collect();
    schemes.dedup();
    for scheme in schemes {
        for norm in [Norm::Sup, Norm::L2] {
            let line: Vec<(f64, f64)> = report
                .rows
                .iter()
                .filter(|r| r.scheme == scheme)
                .map(|r| (r.h, r.rms(norm)))
                .filter(|(h, e)| *h > 0.0 && *e > 0.0 && e.is_finite())
                .map(|(h, e)| (px(h.log2()), py(e.log2())))
                .collect();
            let color = colors[series % colors.len()];
            let coords: Vec<String> = line.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
            let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>", coords.join(" "));
            for (x, y) in &line {
                let _ = writeln!(s, "<circle cx=\"{x:.1}\" cy=\"{y:.1}\" r=\"3\" fill=\"{color}\"/>");
            }
            let _ = writeln!(
                s,
                "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{scheme} {}</text>",
                w - pad - 110.0,
                pad + 16.0 * series as f64,
                norm.name()
            );
            series += 1;
        }
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"gray\">slope 1</text>",
        w - pad - 110.0,
        pad + 16.0 * series as f64
    );
    s.push_str("</svg>\n");
    s
}

/// Writes errors.csv, slopes.csv, roc.svg and study.log into `dir`.
pub fn emit(report: &ErrorReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("errors.csv"), errors_csv(report))?;
    fs::write(dir.join("slopes.csv"), slopes_csv(report))?;
    fs::write(dir.join("roc.svg"), roc_svg(report))?;
    fs::write(dir.join("study.log"), study_log(report))?;
    Ok(())
}
