mod common;

use std::collections::BTreeMap;

use common::{gaussian, gaussian_d1, gaussian_d2, random_interior, Rand};
use side_fd::grid::{Grid, GridFunction};
use side_fd::levy::{CellCoefficients, LevyMeasure};
use side_fd::operators::{
    apply_ih_delta, apply_ih_deltac, apply_itilde_deltac, apply_lh, apply_ltilde, apply_nh, jump_drift_stencil,
    shift_sum, shift_sum_direct, Coefficients, ShiftSummer,
};

fn bench() -> (LevyMeasure, Coefficients) {
    (
        LevyMeasure::symmetric(1.0, 1.0, 1.1, 3.0).unwrap(),
        Coefficients::constant(0.15625, &[0.25]).unwrap(),
    )
}

#[test]
fn large_jump_drift_is_dissipative() {
    let (m, _) = bench();
    let mut rng = Rand(1);
    for e in [4, 6] {
        let h = 2f64.powi(-e);
        let g = Grid::new(h, 8.0).unwrap();
        let cc = CellCoefficients::build(&m, h, 0.01).unwrap();
        for _ in 0..30 {
            // support kept away from the boundary by more than Z
            let phi = random_interior(g, (4.0 / h) as i64, &mut rng);
            let q = phi.inner(&apply_ih_deltac(&cc, &phi).unwrap()).unwrap();
            assert!(q <= 1e-12 * phi.norms().l2.powi(2), "{q}");
        }
    }
}

#[test]
fn itilde_bounded_by_large_mass() {
    let (m, _) = bench();
    let h = 2f64.powi(-5);
    let g = Grid::new(h, 8.0).unwrap();
    let cc = CellCoefficients::build(&m, h, 0.01).unwrap();
    let mut rng = Rand(2);
    for _ in 0..20 {
        let phi = random_interior(g, 100, &mut rng);
        let lhs = apply_itilde_deltac(&cc, &phi).unwrap().norms().l2;
        assert!(lhs <= cc.large_mass() * phi.norms().l2 * (1.0 + 1e-12));
    }
}

#[test]
fn splitting_identity() {
    let (m, c) = bench();
    let mut rng = Rand(3);
    for e in [4, 6] {
        let h = 2f64.powi(-e);
        let g = Grid::new(h, 8.0).unwrap();
        let cc = CellCoefficients::build(&m, h, 0.01).unwrap();
        for _ in 0..10 {
            let phi = random_interior(g, 60, &mut rng);
            let mut lhs = apply_ltilde(&c, &cc, 0.0, &phi).unwrap();
            lhs.axpy(1.0, &apply_itilde_deltac(&cc, &phi).unwrap()).unwrap();
            let mut rhs = apply_lh(&c, 0.0, &phi);
            rhs.axpy(1.0, &apply_ih_deltac(&cc, &phi).unwrap()).unwrap();
            let scale = 1.0 + apply_lh(&c, 0.0, &phi).norms().sup;
            assert!(lhs.sub(&rhs).unwrap().norms().sup <= 1e-12 * scale);
        }
    }
}

#[test]
fn symmetric_measure_first_moments_cancel() {
    let (m, _) = bench();
    let h = 2f64.powi(-4);
    let cc = CellCoefficients::build(&m, h, 0.01).unwrap();
    let g = Grid::new(h, 8.0).unwrap();
    let phi = GridFunction::from_fn(g, |x| gaussian(0.25, x));
    let with = apply_ih_deltac(&cc, &phi).unwrap();
    let mut without = shift_sum(&phi, &cc.zeta_bar);
    without.axpy(-cc.large_mass(), &phi).unwrap();
    assert!(with.sub(&without).unwrap().norms().sup < 1e-13);
}

#[test]
fn fft_and_direct_shift_sums_agree() {
    let mut rng = Rand(4);
    let g = Grid::new(2f64.powi(-5), 8.0).unwrap();
    for _ in 0..20 {
        let phi = random_interior(g, 200, &mut rng);
        let mut w = BTreeMap::new();
        for _ in 0..50 {
            let k = (rng.uniform() * 96.0).round() as i64;
            w.insert(k, rng.uniform());
        }
        let l1: f64 = w.values().map(|v: &f64| v.abs()).sum();
        let d = shift_sum_direct(&phi, &w);
        let f = shift_sum(&phi, &w);
        let s = ShiftSummer::new(g.count(), -96, 96).apply(&phi, &w);
        let tol = 1e-10 * phi.norms().l2 * l1;
        assert!(d.sub(&f).unwrap().norms().l2 <= tol);
        assert!(d.sub(&s).unwrap().norms().l2 <= tol);
    }
}

#[test]
fn lh_gaussian_consistency_is_second_order() {
    let c = Coefficients::constant(0.5, &[]).unwrap();
    let err = |h: f64| {
        let g = Grid::new(h, 8.0).unwrap();
        let phi = GridFunction::from_fn(g, |x| gaussian(0.25, x));
        (apply_lh(&c, 0.0, &phi).at(0) - 0.5 * gaussian_d2(0.25, 0.0)).abs()
    };
    let r = err(2f64.powi(-4)) / err(2f64.powi(-5));
    assert!((r - 4.0).abs() < 0.1, "{r}");
}

#[test]
fn nh_consistency_is_first_order() {
    let (_, c) = bench();
    let err = |h: f64| {
        let g = Grid::new(h, 8.0).unwrap();
        let phi = GridFunction::from_fn(g, |x| gaussian(0.25, x));
        let n = apply_nh(&c, 0.0, 0, &phi).unwrap();
        (-40..=40)
            .map(|i| (n.at(i) - 0.25 * gaussian_d1(0.25, g.node(i))).abs())
            .fold(0.0, f64::max)
    };
    let r = err(2f64.powi(-6)) / err(2f64.powi(-7));
    assert!((1.8..=2.2).contains(&r), "{r}");
}

#[test]
fn discrete_coercivity() {
    let (m, c) = bench();
    let h = 2f64.powi(-6);
    let g = Grid::new(h, 8.0).unwrap();
    let delta = 0.01;
    let cc = CellCoefficients::build(&m, h, delta).unwrap();
    let vs = m.varsigma(delta).unwrap();
    let kappa = 0.25;
    let n_const = 10.0 * 4.0 * cc.large_mass();
    let mut rng = Rand(5);
    for _ in 0..100 {
        let phi = random_interior(g, 150, &mut rng);
        let mut drift = apply_lh(&c, 0.0, &phi);
        drift.axpy(1.0, &apply_ih_delta(&cc, &phi).unwrap()).unwrap();
        drift.axpy(1.0, &apply_ih_deltac(&cc, &phi).unwrap()).unwrap();
        let mut lhs = 2.0 * phi.inner(&drift).unwrap();
        lhs += apply_nh(&c, 0.0, 0, &phi).unwrap().norms().l2.powi(2);
        for (&k, &z) in &cc.zeta {
            lhs += z * jump_drift_stencil(&cc, &phi, k).unwrap().norms().l2.powi(2);
        }
        for (&k, &zb) in &cc.zeta_bar {
            lhs += zb * phi.shift(k).sub(&phi).unwrap().norms().l2.powi(2);
        }
        let grad = phi.forward_diff(1).norms().l2.powi(2);
        let rhs = -(kappa - vs.s - 0.01) * grad + n_const * phi.norms().l2.powi(2);
        assert!(lhs <= rhs, "{lhs} > {rhs}");
    }
}
