use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::linalg::{norm, rel_diff};
use crate::operators::{DenseMatrix, Identity};
use crate::regularizer::{build_l, build_matrix, LKind};

fn random_dense(rng: &mut ChaCha8Rng, m: usize, n: usize) -> DenseMatrix<f64> {
    let data = (0..m * n).map(|_| rng.random::<f64>() - 0.5).collect();
    DenseMatrix::from_row_major(m, n, data).unwrap()
}

fn kopts() -> KrylovOptions<f64> {
    KrylovOptions::default().with_tol(1e-12)
}

#[test]
fn identity_shrinkage() {
    let b = vec![1.0, -2.0, 3.0, 0.5];
    let lop = build_l::<f64>(LKind::Identity { n: 4 }).unwrap();
    for alpha in [0.1, 1.0, 7.5] {
        let sol = tikhonov_solve(&Identity::new(4), &lop, alpha, &b, &kopts()).unwrap();
        let want: Vec<f64> = b.iter().map(|v| v / (1.0 + alpha)).collect();
        assert!(rel_diff(&sol.x, &want) < 1e-12);
    }
}

#[test]
fn heavy_penalty_shrinks_to_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_dense(&mut rng, 8, 6);
    let b: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
    let lop = build_l::<f64>(LKind::Identity { n: 6 }).unwrap();
    let x1 = tikhonov_solve(&a, &lop, 1.0, &b, &kopts()).unwrap().x;
    let xb = tikhonov_solve(&a, &lop, 1e8, &b, &kopts()).unwrap().x;
    assert!(norm(&xb) <= 1e-3 * norm(&x1));
}

#[test]
fn matches_dense_general_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for (m, n, kind) in [
        (10, 7, LKind::Diff2 { n: 7 }),
        (5, 9, LKind::Diff1 { n: 9 }),
        (6, 9, LKind::GridIncidence { nx: 5, ny: 5 }),
    ] {
        let a = random_dense(&mut rng, m, n);
        let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let lop = build_l::<f64>(kind).unwrap();
        let l = build_matrix::<f64>(kind).unwrap().to_dense();
        let alpha = 0.37;
        let sol = tikhonov_solve(&a, &lop, alpha, &b, &kopts()).unwrap();
        let na = DMatrix::from_row_slice(m, n, a.as_slice());
        let nl = DMatrix::from_row_slice(l.rows(), n, l.as_slice());
        let lhs = na.transpose() * &na + nl.transpose() * &nl * alpha;
        let want = lhs.lu().solve(&(na.transpose() * DVector::from_column_slice(&b))).unwrap();
        assert!(rel_diff(&sol.x, want.as_slice()) < 1e-8, "{kind:?}");
    }
}

#[test]
fn rejects_bad_alpha() {
    let lop = build_l::<f64>(LKind::Identity { n: 2 }).unwrap();
    assert!(tikhonov_solve(&Identity::new(2), &lop, 0.0, &[1.0, 1.0], &kopts()).is_err());
    assert!(tikhonov_solve(&Identity::new(2), &lop, f64::INFINITY, &[1.0, 1.0], &kopts()).is_err());
}

#[test]
fn discrepancy_values() {
    let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let x = vec![1.0, -1.0];
    let b = a.apply(&x).unwrap();
    assert_eq!(discrepancy(&a, &x, &b).unwrap(), 0.0);
    assert_eq!(discrepancy(&a, &[0.0, 0.0], &[1.0, 2.0, 2.0]).unwrap(), 9.0);
    let h: f64 = discrepancy(&a, &[0.5, 0.25], &[1.0, 2.0, 2.0]).unwrap();
    let r = [1.0 - 1.0, 2.0 - 0.25, 2.0 - 0.75];
    assert!((h - r.iter().map(|v| v * v).sum::<f64>()).abs() < 1e-15);
}

#[test]
fn alpha_from_theta_examples() {
    assert_eq!(alpha_from_theta(1.0, 1.0).unwrap(), 1.0);
    assert_eq!(alpha_from_theta(2.0, 4.0).unwrap(), 1.0);
    let a1: f64 = alpha_from_theta(0.3, 0.7).unwrap();
    let a4 = alpha_from_theta(0.3, 2.8).unwrap();
    assert!((a1 / a4 - 2.0).abs() < 1e-14);
    assert!(alpha_from_theta(1.0, 0.0).is_err());
}

#[test]
fn morozov_scalar_closed_form() {
    let b = vec![1.0, -2.0, 3.0, 0.5, 1.5, -1.0];
    let m = b.len();
    let lop = build_l::<f64>(LKind::Identity { n: m }).unwrap();
    let bb: f64 = b.iter().map(|v| v * v).sum();
    let sigma = 0.4;
    let mo = MorozovOptions::default();
    let res = morozov_bisect(&Identity::new(m), &lop, &b, sigma, m, &mo, &kopts()).unwrap();
    assert!(res.converged && !res.hit_alpha_max);
    let a = res.alpha;
    let h = bb * (a / (1.0 + a)).powi(2);
    let target = m as f64 * sigma * sigma;
    assert!((h - target).abs() <= mo.rel_tol * target * (1.0 + 1e-9));
    assert!(res.evals <= mo.max_bisect);
    assert_eq!(res.trace.len(), res.total_evals());
}

#[test]
fn morozov_unattainable_target() {
    let b = vec![0.1, 0.2];
    let lop = build_l::<f64>(LKind::Identity { n: 2 }).unwrap();
    let mo = MorozovOptions::default();
    let res = morozov_bisect(&Identity::new(2), &lop, &b, 1.0, 2, &mo, &kopts()).unwrap();
    assert!(res.hit_alpha_max && !res.converged);
    assert_eq!(res.alpha, mo.alpha_max);
}

#[test]
fn morozov_invalid_bracket() {
    let b = vec![1.0, 2.0];
    let lop = build_l::<f64>(LKind::Identity { n: 2 }).unwrap();
    let mo = MorozovOptions {
        alpha_min: 1.0,
        alpha_max: 10.0,
        ..Default::default()
    };
    let err = morozov_bisect(&Identity::new(2), &lop, &b, 1e-9, 2, &mo, &kopts()).unwrap_err();
    assert!(matches!(err, Error::InvalidBracket { .. }));
    let bad = MorozovOptions {
        alpha_min: 5.0,
        alpha_max: 1.0,
        ..Default::default()
    };
    assert!(morozov_bisect(&Identity::new(2), &lop, &b, 0.1, 2, &bad, &kopts()).is_err());
}

#[test]
fn morozov_bracket_expansion() {
    let b = vec![1.0, 2.0, -1.0];
    let lop = build_l::<f64>(LKind::Identity { n: 3 }).unwrap();
    let mo = MorozovOptions {
        alpha_min: 1e-3,
        alpha_max: 1e-2,
        ..Default::default()
    };
    let res = morozov_bisect(&Identity::new(3), &lop, &b, 0.5, 3, &mo, &kopts()).unwrap();
    assert!(res.converged);
    assert!(res.alpha > 1e-2 && res.alpha < 10.0);
    assert_eq!(res.bracket_evals, 3);
}

#[test]
fn trace_csv_round_trip() {
    let b = vec![1.0, -2.0, 3.0];
    let lop = build_l::<f64>(LKind::Identity { n: 3 }).unwrap();
    let res = morozov_bisect(&Identity::new(3), &lop, &b, 0.5, 3, &MorozovOptions::default(), &kopts()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    res.write_trace_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), res.trace.len() + 1);
    assert!(text.starts_with("alpha,h,bracket"));
}

#[test]
fn discrepancy_is_monotone_in_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_dense(&mut rng, 12, 9);
    let b: Vec<f64> = (0..12).map(|_| rng.random::<f64>()).collect();
    let lop = build_l::<f64>(LKind::Diff2 { n: 9 }).unwrap();
    let mut prev = 0.0;
    for e in -8..=6 {
        let alpha = 10f64.powi(e);
        let x = tikhonov_solve(&a, &lop, alpha, &b, &kopts()).unwrap().x;
        let h = discrepancy(&a, &x, &b).unwrap();
        assert!(h >= prev * (1.0 - 1e-9), "alpha {alpha}: {h} < {prev}");
        prev = h;
    }
}

#[test]
fn null_space_orthogonality() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (m, n) = (6, 8);
    let mut a = random_dense(&mut rng, m, n);
    let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let vv: f64 = v.iter().map(|t| t * t).sum();
    for i in 0..m {
        let row = a.row(i).to_vec();
        let c: f64 = row.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() / vv;
        for j in 0..n {
            a.set(i, j, row[j] - c * v[j]);
        }
    }
    let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    let lop = build_l::<f64>(LKind::Identity { n }).unwrap();
    for alpha in [1e-6, 1e-2, 1.0] {
        let x = tikhonov_solve(&a, &lop, alpha, &b, &kopts()).unwrap().x;
        let ip: f64 = x.iter().zip(&v).map(|(p, q)| p * q).sum::<f64>() / vv.sqrt();
        assert!(ip.abs() / norm(&x) <= 1e-8);
    }
}
