use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::hyperprior::update_variance_closed;
use crate::linalg::rel_diff;
use crate::operators::{materialize, DenseMatrix, ZeroOperator};
use crate::regularizer::{build_l, pinv_apply, LKind, Partition};

fn gaussian(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix<f64> {
    let data = (0..m * n)
        .map(|_| {
            let v: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
            v / (m as f64).sqrt()
        })
        .collect();
    DenseMatrix::from_row_major(m, n, data).unwrap()
}

fn identity_lop(n: usize, trivial: bool) -> SparsifyingOperator<f64> {
    let l = build_l(LKind::Identity { n }).unwrap();
    if trivial {
        l.with_partition(Partition::trivial(n)).unwrap()
    } else {
        l
    }
}

fn spike_problem(seed: u64, m: usize, n: usize, sigma: f64) -> (Problem<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian(&mut rng, m, n);
    let mut x = vec![0.0; n];
    x[2] = 1.0;
    x[7] = -0.7;
    x[n - 5] = 0.5;
    let mut b = a.apply(&x).unwrap();
    for v in b.iter_mut() {
        let w: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        *v += sigma * w;
    }
    (Problem::new(a, b, sigma).unwrap(), x)
}

#[test]
fn objective_at_prior_baseline() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = gaussian(&mut rng, 4, 6);
    let b = vec![1.0, -2.0, 0.5, 3.0];
    let lop = identity_lop(6, false);
    let p = GenGammaParams::uniform(1.0, 2.0, 0.7, 6);
    let g = objective(&[0.0; 6], &[0.7; 6], &a, &lop, &p, &b).unwrap();
    assert!((g - (0.5 * 14.25 + 6.0)).abs() < 1e-13);
}

#[test]
fn objective_matches_term_by_term_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a = gaussian(&mut rng, 5, 8);
    let lop = build_l::<f64>(LKind::Diff1 { n: 8 })
        .unwrap()
        .with_partition(Partition::from_groups(vec![vec![0, 1, 2], vec![3, 4], vec![5, 6, 7]], 8).unwrap())
        .unwrap();
    let p = GenGammaParams {
        r: 0.5,
        beta: vec![6.0, 5.0, 7.0],
        vartheta: vec![0.2, 0.5, 1.5],
    };
    let x: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
    let z = lop.matrix().apply(&x).unwrap();
    let theta = [0.3, 0.9, 2.0];
    let b: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
    let ax = a.apply(&x).unwrap();
    let mut want = 0.5 * ax.iter().zip(&b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    let groups = [vec![0, 1, 2], vec![3, 4], vec![5, 6, 7]];
    for (l, g) in groups.iter().enumerate() {
        let zz: f64 = g.iter().map(|&i| z[i] * z[i]).sum();
        let eta = 0.5 * p.beta[l] - (g.len() as f64 + 2.0) / 2.0;
        let q = theta[l] / p.vartheta[l];
        want += 0.5 * zz / theta[l] + q.sqrt() - eta * q.ln();
    }
    let got = objective(&z, &theta, &a, &lop, &p, &b).unwrap();
    assert!((got - want).abs() <= 1e-12 * want.abs());
}

#[test]
fn objective_reduces_to_ridge_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = gaussian(&mut rng, 5, 5);
    let lop = identity_lop(5, true);
    let p = GenGammaParams::uniform(1.0, 4.0, 2.0, 1);
    let z: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
    let b: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
    let theta = 0.25;
    let alpha = 1.0 / theta;
    let r = crate::linalg::sub(&b, &a.apply(&z).unwrap());
    let ridge = 0.5 * crate::linalg::norm_sq(&r) + 0.5 * alpha * crate::linalg::norm_sq(&z);
    let phi = crate::hyperprior::phi(&[theta], &p, &[5]).unwrap();
    let got = objective(&z, &[theta], &a, &lop, &p, &b).unwrap();
    assert!((got - ridge - phi).abs() < 1e-12);
}

#[test]
fn phase1_zero_operator() {
    let lop = identity_lop(4, false);
    let lt = scale_by_theta(&lop, &[1.0; 4]).unwrap();
    let out = phase1_update(&ZeroOperator::new(3, 4), &lt, &[1.0, 2.0, 3.0], &KrylovOptions::default()).unwrap();
    assert!(out.xi.iter().all(|&v| v == 0.0));
    assert!(out.x.iter().all(|&v| v == 0.0));
}

#[test]
fn phase1_matches_dense_ridge() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (m, n) = (6, 10);
    let a = gaussian(&mut rng, m, n);
    let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let lop = identity_lop(n, true);
    let theta = 0.3;
    let lt = scale_by_theta(&lop, &[theta]).unwrap();
    let out = phase1_update(&a, &lt, &b, &KrylovOptions::default()).unwrap();
    let na = DMatrix::from_row_slice(m, n, a.as_slice());
    let lhs = na.transpose() * &na + DMatrix::identity(n, n) / theta;
    let want = lhs.cholesky().unwrap().solve(&(na.transpose() * DVector::from_column_slice(&b)));
    assert!(rel_diff(&out.x, want.as_slice()) < 1e-8);
}

#[test]
fn phase1_solution_lies_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lop = build_l::<f64>(LKind::GridIncidence { nx: 6, ny: 6 }).unwrap();
    let (k, n) = (lop.k(), lop.n());
    let a = gaussian(&mut rng, 7, n);
    let b: Vec<f64> = (0..7).map(|_| rng.random::<f64>()).collect();
    let theta: Vec<f64> = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
    let lt = scale_by_theta(&lop, &theta).unwrap();
    let out = phase1_update(&a, &lt, &b, &KrylovOptions::default()).unwrap();
    let d = materialize(&lt);
    let nd = DMatrix::from_row_slice(k, n, d.as_slice());
    let proj = &nd * nd.clone().pseudo_inverse(1e-14).unwrap();
    let xi = DVector::from_column_slice(&out.xi);
    let off = (&xi - &proj * &xi).norm() / xi.norm();
    assert!(off <= 1e-8, "off-range fraction {off}");
}

#[test]
fn zero_data_stays_at_baseline() {
    let a = DenseMatrix::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.0, 1.0, 1.0]]).unwrap();
    let prob = Problem::new(a, vec![0.0, 0.0], 0.1).unwrap();
    let lop = identity_lop(3, false);
    let p = GenGammaParams::uniform(1.0, 2.0, 0.4, 3);
    let res = ias_solve(&prob, &lop, &p, &IasOptions::default()).unwrap();
    assert!(res.converged);
    assert!(res.z.iter().all(|&v| v == 0.0));
    for &t in &res.theta {
        assert!((t - 0.4 * 0.5).abs() < 1e-15);
    }
    assert!(res.outer_iterations <= 2);
    let r = fixed_point_residual(&res.z, &res.theta, &p, &[1, 1, 1]).unwrap();
    assert!(r < 1e-15);
}

#[test]
fn converged_state_is_a_fixed_point() {
    let a = DenseMatrix::from_rows(&[vec![1.0, 0.3], vec![0.2, 0.8], vec![0.5, -0.4]]).unwrap();
    let prob = Problem::new(a, vec![1.0, 0.4, 0.2], 1.0).unwrap();
    let lop = identity_lop(2, false);
    let p = GenGammaParams::uniform(1.0, 1.5 + 0.1, 0.5, 2);
    let opts = IasOptions {
        delta: 1e-12,
        max_outer: 5000,
        krylov: KrylovOptions::default().with_tol(1e-13),
        ..Default::default()
    };
    let res = ias_solve(&prob, &lop, &p, &opts).unwrap();
    assert!(res.converged);
    let again = ias_solve(
        &prob,
        &lop,
        &p,
        &IasOptions {
            max_outer: 1,
            initial_theta: Some(res.theta.clone()),
            ..opts.clone()
        },
    )
    .unwrap();
    assert!(rel_diff(&again.theta, &res.theta) < 1e-8);
    let r = fixed_point_residual(&res.z, &res.theta, &p, &[1, 1]).unwrap();
    assert!(r < 1e-8, "fixed-point residual {r}");
}

#[test]
fn objective_is_nonincreasing() {
    for seed in 0..6 {
        let (prob, _) = spike_problem(seed, 12, 30, 0.05);
        let lop = identity_lop(30, false);
        let r = [1.0, 0.5, -1.0][seed as usize % 3];
        let sizes = lop.partition().sizes();
        let p = GenGammaParams::with_eta(r, if r > 0.0 { 0.01 } else { -3.0 }, 0.05, &sizes);
        let res = ias_solve(&prob, &lop, &p, &IasOptions::default()).unwrap();
        for w in res.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-8 * (1.0 + w[0].abs()), "r={r}: {} -> {}", w[0], w[1]);
        }
        assert!(res.theta.iter().all(|&t| t > 0.0));
    }
}

#[test]
fn unique_minimizer_from_two_starts() {
    let (prob, _) = spike_problem(21, 15, 40, 0.02);
    let lop = identity_lop(40, false);
    let p = GenGammaParams::with_eta(1.0, 0.1, 0.05, &lop.partition().sizes());
    let opts = IasOptions {
        delta: 1e-10,
        max_outer: 5000,
        krylov: KrylovOptions::default().with_tol(1e-12),
        ..Default::default()
    };
    let a = ias_solve(&prob, &lop, &p, &opts).unwrap();
    let b = ias_solve(
        &prob,
        &lop,
        &p,
        &IasOptions {
            initial_theta: Some(vec![0.1; 40]),
            ..opts.clone()
        },
    )
    .unwrap();
    assert!(a.converged && b.converged);
    assert!(rel_diff(&a.z, &b.z) < 1e-6);
    assert!(rel_diff(&a.theta, &b.theta) < 1e-6);
}

#[test]
fn tikhonov_reduction_of_first_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = gaussian(&mut rng, 8, 5);
    let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
    let lop = identity_lop(5, true);
    let lt = scale_by_theta(&lop, &[0.5]).unwrap();
    let out = phase1_update(&a, &lt, &b, &KrylovOptions::default()).unwrap();
    let ridge = crate::classic::tikhonov_solve(&a, &lop, 2.0, &b, &KrylovOptions::default()).unwrap();
    assert!(rel_diff(&out.x, &ridge.x) < 1e-8);
    let back = pinv_apply(&lt, &out.xi).unwrap();
    assert!(rel_diff(&back, &out.x) < 1e-14);
}

#[test]
fn hybrid_fixed_zero_is_pure_second_stage() {
    let (prob, _) = spike_problem(31, 12, 30, 0.05);
    let lop = identity_lop(30, false);
    let p1 = GenGammaParams::with_eta(1.0, 0.05, 0.05, &lop.partition().sizes());
    let p2 = crate::hyperprior::hybrid_compat_solve(&p1, -1.0, &lop.partition().sizes()).unwrap();
    let opts = IasOptions {
        hybrid: Some(HybridOptions {
            switch_rule: SwitchRule::FixedIteration { count: 0 },
            r2: -1.0,
            params2: Params2::Auto,
        }),
        ..Default::default()
    };
    let h = hybrid_ias_solve(&prob, &lop, &p1, &opts).unwrap();
    let s = ias_solve(&prob, &lop, &p2, &IasOptions::default()).unwrap();
    assert_eq!(h.switch_iteration, Some(0));
    assert_eq!(h.theta, s.theta);
    assert_eq!(h.outer_iterations, s.outer_iterations);
}

#[test]
fn hybrid_without_switch_matches_first_stage() {
    let (prob, _) = spike_problem(32, 12, 30, 0.05);
    let lop = identity_lop(30, false);
    let p1 = GenGammaParams::with_eta(1.0, 0.05, 0.05, &lop.partition().sizes());
    let base = IasOptions {
        delta: 1e-14,
        max_outer: 4,
        ..Default::default()
    };
    let opts = IasOptions {
        hybrid: Some(HybridOptions {
            switch_rule: SwitchRule::FixedIteration { count: 100 },
            r2: 0.5,
            params2: Params2::Auto,
        }),
        ..base.clone()
    };
    let h = hybrid_ias_solve(&prob, &lop, &p1, &opts).unwrap();
    let s = ias_solve(&prob, &lop, &p1, &base).unwrap();
    assert_eq!(h.switch_iteration, None);
    assert_eq!(h.theta, s.theta);
    assert_eq!(h.objective_history, s.objective_history);
}

#[test]
fn hybrid_cleans_background() {
    for seed in [41, 42, 43] {
        let (prob, xt) = spike_problem(seed, 20, 60, 0.005);
        let lop = identity_lop(60, false);
        let p1 = GenGammaParams::with_eta(1.0, 0.01, 0.05, &lop.partition().sizes());
        let stage1 = ias_solve(&prob, &lop, &p1, &IasOptions::default()).unwrap();
        let opts = IasOptions {
            hybrid: Some(HybridOptions::new(-0.5, 0.01)),
            ..Default::default()
        };
        let hyb = hybrid_ias_solve(&prob, &lop, &p1, &opts).unwrap();
        assert!(hyb.switch_iteration.is_some() && hyb.converged);
        let off = |x: &[f64]| {
            x.iter()
                .zip(&xt)
                .filter(|(_, t)| **t == 0.0)
                .map(|(v, _)| v.abs())
                .sum::<f64>()
        };
        assert!(off(&hyb.x) < off(&stage1.x), "seed {seed}");
        assert!(rel_diff(&hyb.x, &xt) < rel_diff(&stage1.x, &xt), "seed {seed}");
    }
}

#[test]
fn hybrid_requires_options_and_gamma_first_stage() {
    let (prob, _) = spike_problem(1, 5, 8, 0.1);
    let lop = identity_lop(8, false);
    let p1 = GenGammaParams::with_eta(1.0, 0.05, 0.05, &lop.partition().sizes());
    assert!(hybrid_ias_solve(&prob, &lop, &p1, &IasOptions::default()).is_err());
    let p_bad = GenGammaParams::with_eta(0.5, 0.05, 0.05, &lop.partition().sizes());
    let opts = IasOptions {
        hybrid: Some(HybridOptions::new(0.5, 0.01)),
        ..Default::default()
    };
    assert!(hybrid_ias_solve(&prob, &lop, &p_bad, &opts).is_err());
    let opts = IasOptions {
        hybrid: Some(HybridOptions::new(0.3, 0.01)),
        ..Default::default()
    };
    assert!(matches!(hybrid_ias_solve(&prob, &lop, &p1, &opts), Err(Error::Unsupported(_))));
}

#[test]
fn fixed_point_residual_is_positive_before_convergence() {
    let p = GenGammaParams::uniform(1.0, 2.0, 0.5, 3);
    let r = fixed_point_residual(&[0.3, -1.0, 0.0], &[0.5, 0.5, 0.5], &p, &[1, 1, 1]).unwrap();
    assert!(r > 0.0);
    let pr = GenGammaParams::uniform(0.5, 8.0, 0.5, 3);
    assert!(fixed_point_residual(&[0.0; 3], &[1.0; 3], &pr, &[1, 1, 1]).is_err());
    let _ = update_variance_closed(0.0, 0.5, 1.0).unwrap();
}

#[test]
fn options_reject_bad_delta() {
    let (prob, _) = spike_problem(1, 5, 8, 0.1);
    let lop = identity_lop(8, false);
    let p = GenGammaParams::with_eta(1.0, 0.05, 0.05, &lop.partition().sizes());
    let opts = IasOptions { delta: 1.5, ..Default::default() };
    assert!(ias_solve(&prob, &lop, &p, &opts).is_err());
}

