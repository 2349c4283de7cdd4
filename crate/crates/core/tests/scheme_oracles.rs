mod common;

use common::{gaussian, thomas};
use side_fd::benchmark::BenchmarkParams;
use side_fd::grid::{Grid, GridFunction};
use side_fd::levy::{CellCoefficients, LevyMeasure};
use side_fd::noise::{bin_increments, simulate_path, BinnedIncrements, Jump, NoisePath};
use side_fd::operators::Coefficients;
use side_fd::schemes::{ErrorRegion, Forcing, NoForcing, SchemeConfig, SchemeKind, Stepper};

struct Setup {
    bp: BenchmarkParams,
    c: Coefficients,
    m: LevyMeasure,
    cc: CellCoefficients,
    grid: Grid,
}

fn setup(h: f64) -> Setup {
    let bp = BenchmarkParams::default();
    let m = bp.measure();
    Setup {
        c: bp.coefficients().unwrap(),
        cc: CellCoefficients::build(&m, h, bp.delta).unwrap(),
        grid: Grid::new(h, bp.radius).unwrap(),
        m,
        bp,
    }
}

fn config(s: &Setup, tau: f64, horizon: f64, scheme: SchemeKind, cancel: bool) -> SchemeConfig {
    SchemeConfig {
        h: s.grid.h(),
        tau,
        horizon,
        delta: s.bp.delta,
        scheme,
        compensator_cancellation: cancel,
        error_region: ErrorRegion::FullGrid,
    }
}

fn path(s: &Setup, tau: f64, horizon: f64, seed: u64, stream: u64) -> NoisePath {
    let mut pp = s.bp.path_params(tau);
    pp.horizon = horizon;
    simulate_path(&pp, seed, stream).unwrap()
}

fn quiet(s: &Setup, tau: f64, horizon: f64) -> BinnedIncrements {
    let mut p = path(s, tau, horizon, 0, 0);
    p.jumps.clear();
    p.wiener.iter_mut().flatten().for_each(|v| *v = 0.0);
    p.small_jump_wiener.iter_mut().for_each(|v| *v = 0.0);
    bin_increments(&p, &s.cc, tau).unwrap()
}

fn rel_diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.sub(b).unwrap().norms().sup / a.norms().sup.max(b.norms().sup).max(1e-300)
}

/// One explicit step written out node by node.
fn naive_explicit(s: &Setup, inc: &BinnedIncrements, n: usize, u: &[f64], cancel: bool) -> Vec<f64> {
    let (h, tau) = (s.grid.h(), inc.tau);
    let half = s.grid.half();
    let at = |k: i64| -> f64 {
        let i = k + half;
        if i < 0 || i as usize >= u.len() {
            0.0
        } else {
            u[i as usize]
        }
    };
    let d2 = |k: i64| (at(k + 1) - 2.0 * at(k) + at(k - 1)) / (h * h);
    let dp = |k: i64| (at(k + 1) - at(k)) / h;
    let d0 = |k: i64| (at(k + 1) - at(k - 1)) / (2.0 * h);
    let a11 = s.c.a11.at(0.0, 0.0);
    let sigma = s.c.sigma[0].first_order.at(0.0, 0.0);
    let xi_total: f64 = s.cc.xi_bar.values().sum();
    let dw = inc.wiener[0][n - 1];
    (-half..=half)
        .map(|k| {
            let mut drift = a11 * d2(k) - xi_total * d0(k);
            for (&cell, &z) in &s.cc.zeta {
                let p = &s.cc.partitions[&cell];
                for (&r, &tb) in p.indices.iter().zip(&p.theta_bar) {
                    drift += z * tb * d2(k + r);
                }
            }
            if !cancel {
                for (&j, &zb) in &s.cc.zeta_bar {
                    drift += zb * (at(k + j) - at(k));
                }
            }
            let mut v = at(k) + tau * drift + sigma * dw * dp(k);
            for (&cell, &q) in &inc.small[n - 1] {
                let p = s.cc.partition(cell).unwrap();
                for (&r, &tt) in p.indices.iter().zip(&p.theta_tilde) {
                    v += q * tt * dp(k + r);
                }
            }
            let raw = &inc.large_raw[n - 1];
            for (&j, &zb) in &s.cc.zeta_bar {
                let cnt = raw.get(&j).copied().unwrap_or(0) as f64;
                let q = if cancel { cnt } else { cnt - tau * zb };
                v += q * (at(k + j) - at(k));
            }
            v
        })
        .collect()
}

#[test]
fn explicit_step_matches_naive_implementation() {
    let s = setup(0.125);
    let tau = 1.0 / 128.0;
    let p = path(&s, tau, 0.25, 11, 0);
    let inc = bin_increments(&p, &s.cc, tau).unwrap();
    let u0 = s.bp.initial_condition(&s.grid);
    for cancel in [true, false] {
        let st = Stepper::new(config(&s, tau, 0.25, SchemeKind::Explicit, cancel), &s.c, &s.m, &s.cc, s.grid).unwrap();
        let mut u = u0.clone();
        for n in 1..=inc.steps() {
            let next = st.step_explicit(n, &u, &inc, &NoForcing).unwrap();
            let mut want = GridFunction::zeros(s.grid);
            want.values_mut().copy_from_slice(&naive_explicit(&s, &inc, n, u.values(), cancel));
            assert!(rel_diff(&next, &want) <= 1e-12, "step {n}, cancel {cancel}");
            u = next;
        }
    }
}

#[test]
fn imex_heat_step_matches_tridiagonal_solve() {
    let h = 1.0 / 16.0;
    let (tau, a11) = (0.01, 0.3);
    let m = LevyMeasure::zero(3.0);
    let c = Coefficients::constant(a11, &[]).unwrap();
    let cc = CellCoefficients::build(&m, h, 0.01).unwrap();
    let grid = Grid::new(h, 4.0).unwrap();
    let cfg = SchemeConfig {
        h,
        tau,
        horizon: 0.1,
        delta: 0.01,
        scheme: SchemeKind::Imex,
        compensator_cancellation: false,
        error_region: ErrorRegion::FullGrid,
    };
    let st = Stepper::new(cfg, &c, &m, &cc, grid).unwrap();
    let pp = side_fd::noise::PathParams { measure: m, horizon: 0.1, tau_fine: tau, eps: 1.0 / 256.0, channels: 0 };
    let inc = bin_increments(&simulate_path(&pp, 1, 1).unwrap(), &cc, tau).unwrap();
    let u0 = GridFunction::from_fn(grid, |x| gaussian(0.1, x - 0.3));
    let got = st.step_imex(1, &u0, &inc, &NoForcing).unwrap();
    let n = grid.count();
    let r = tau * a11 / (h * h);
    let want = thomas(&vec![-r; n], &vec![1.0 + 2.0 * r; n], &vec![-r; n], u0.values());
    let diff = got.values().iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-12 * u0.norms().sup, "{diff}");
}

#[test]
fn schemes_agree_for_tiny_time_steps() {
    let s = setup(1.0 / 16.0);
    let (tau, horizon) = (1e-8, 1e-7);
    let inc = quiet(&s, tau, horizon);
    let u0 = s.bp.initial_condition(&s.grid);
    let ex = Stepper::new(config(&s, tau, horizon, SchemeKind::Explicit, false), &s.c, &s.m, &s.cc, s.grid).unwrap();
    let im = Stepper::new(config(&s, tau, horizon, SchemeKind::Imex, false), &s.c, &s.m, &s.cc, s.grid).unwrap();
    let a = ex.run(&inc, &u0, &NoForcing).unwrap();
    let b = im.run(&inc, &u0, &NoForcing).unwrap();
    let d = rel_diff(a.last().unwrap(), b.last().unwrap());
    assert!(d <= 1e-6, "{d}");
}

struct Source {
    scale: f64,
    centre: f64,
}

impl Forcing for Source {
    fn drift(&self, t: f64, grid: &Grid) -> Option<GridFunction> {
        Some(GridFunction::from_fn(*grid, |x| self.scale * (1.0 + t) * gaussian(0.2, x - self.centre)))
    }
    fn diffusion(&self, _t: f64, _channel: usize, grid: &Grid) -> Option<GridFunction> {
        Some(GridFunction::from_fn(*grid, |x| self.scale * gaussian(0.5, x + self.centre)))
    }
    fn jump(&self, _t: f64, _tau: f64, events: &[Jump], grid: &Grid) -> Option<GridFunction> {
        let total: f64 = events.iter().map(|j| j.size).sum();
        Some(GridFunction::from_fn(*grid, |x| self.scale * total * gaussian(0.3, x)))
    }
}

#[test]
fn schemes_are_linear_in_data() {
    let s = setup(0.125);
    let tau = 1.0 / 128.0;
    let inc = bin_increments(&path(&s, tau, 0.5, 4, 0), &s.cc, tau).unwrap();
    let u1 = s.bp.initial_condition(&s.grid);
    let u2 = GridFunction::from_fn(s.grid, |x| gaussian(0.3, x - 1.0));
    let (f1, f2) = (Source { scale: 1.0, centre: 0.5 }, Source { scale: -2.0, centre: 0.5 });
    let f12 = Source { scale: -1.0, centre: 0.5 };
    let mut u12 = u1.clone();
    u12.axpy(1.0, &u2).unwrap();
    for scheme in [SchemeKind::Explicit, SchemeKind::Imex] {
        let st = Stepper::new(config(&s, tau, 0.5, scheme, true), &s.c, &s.m, &s.cc, s.grid).unwrap();
        let mut sum = st.run(&inc, &u1, &f1).unwrap().pop().unwrap();
        sum.axpy(1.0, &st.run(&inc, &u2, &f2).unwrap().pop().unwrap()).unwrap();
        let joint = st.run(&inc, &u12, &f12).unwrap().pop().unwrap();
        assert!(rel_diff(&sum, &joint) <= 1e-10, "{scheme}");
    }
}

#[test]
fn compensator_cancellation_is_exact_for_explicit_scheme() {
    let s = setup(0.125);
    let tau = 1.0 / 64.0;
    let inc = bin_increments(&path(&s, tau, 1.0, 8, 3), &s.cc, tau).unwrap();
    let u0 = s.bp.initial_condition(&s.grid);
    let run = |cancel| {
        Stepper::new(config(&s, tau, 1.0, SchemeKind::Explicit, cancel), &s.c, &s.m, &s.cc, s.grid)
            .unwrap()
            .run(&inc, &u0, &NoForcing)
            .unwrap()
    };
    let (on, off) = (run(true), run(false));
    for (a, b) in on.iter().zip(&off) {
        assert!(rel_diff(a, b) <= 1e-10);
    }
}

#[test]
fn single_step_horizon_yields_two_states() {
    let s = setup(0.25);
    let tau = 1.0 / 16.0;
    let inc = bin_increments(&path(&s, tau, tau, 2, 0), &s.cc, tau).unwrap();
    let u0 = s.bp.initial_condition(&s.grid);
    for scheme in [SchemeKind::Explicit, SchemeKind::Imex] {
        let st = Stepper::new(config(&s, tau, tau, scheme, true), &s.c, &s.m, &s.cc, s.grid).unwrap();
        let states = st.run(&inc, &u0, &NoForcing).unwrap();
        assert_eq!(states.len(), 2);
        assert_eq!(states[0].values(), u0.values());
    }
}

#[test]
fn seeded_runs_stay_bounded() {
    let s = setup(0.125);
    let tau = 1.0 / 128.0;
    let u0 = s.bp.initial_condition(&s.grid);
    let bound = 1e3 * u0.norms().sup;
    let steppers: Vec<_> = [SchemeKind::Explicit, SchemeKind::Imex]
        .into_iter()
        .map(|k| Stepper::new(config(&s, tau, 1.0, k, true), &s.c, &s.m, &s.cc, s.grid).unwrap())
        .collect();
    for r in 0..100 {
        let inc = bin_increments(&path(&s, tau, 1.0, 77, r), &s.cc, tau).unwrap();
        for st in &steppers {
            let mut worst: f64 = 0.0;
            st.run_with(&inc, &u0, &NoForcing, |_, u| {
                worst = worst.max(u.norms().sup);
                Ok(())
            })
            .unwrap();
            assert!(worst.is_finite() && worst <= bound, "replication {r}: {worst}");
        }
    }
}

#[test]
fn scheme_gap_is_first_order_in_tau() {
    let s = setup(0.125);
    // τ π(|z| > δ) must be small for the gap to be in its asymptotic regime
    let horizon = 1.0 / 16.0;
    let u0 = s.bp.initial_condition(&s.grid);
    let gap = |tau: f64| {
        let inc = quiet(&s, tau, horizon);
        let run = |k| {
            Stepper::new(config(&s, tau, horizon, k, false), &s.c, &s.m, &s.cc, s.grid)
                .unwrap()
                .run(&inc, &u0, &NoForcing)
                .unwrap()
                .pop()
                .unwrap()
        };
        run(SchemeKind::Explicit).sub(&run(SchemeKind::Imex)).unwrap().norms().sup
    };
    let r = gap(2f64.powi(-14)) / gap(2f64.powi(-13));
    assert!((0.45..=0.55).contains(&r), "{r}");
}
