use super::*;
use crate::geometry::{Lattice, LatticeIndex};
use proptest::prelude::*;
use std::f64::consts::PI;

fn golden() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

fn zeros() -> (FourierPotential, FourierPotential) {
    (FourierPotential::zero(Lattice::line(1.0).unwrap()), FourierPotential::zero(Lattice::line(golden()).unwrap()))
}

fn benchmark() -> (FourierPotential, FourierPotential) {
    (
        FourierPotential::cosine_pair(Lattice::line(1.0).unwrap(), LatticeIndex::new(&[1]), 1.0).unwrap(),
        FourierPotential::cosine_pair(Lattice::line(golden()).unwrap(), LatticeIndex::new(&[1]), 1.0).unwrap(),
    )
}

#[test]
fn free_periodic_dispersion() {
    let (v1, v2) = zeros();
    let (l, h) = (10.0, 0.05);
    let p = RealSpaceProblem::new(l, h, Boundary::Periodic, &v1, &v2).unwrap();
    let s = realspace_spectrum(&p, 5, &SolverOptions::default()).unwrap();
    assert!(s.eigenvalues[0].abs() < 1e-10);
    let pair = 2.0 / (h * h) * (PI * h / l).sin().powi(2);
    assert!((s.eigenvalues[1] - pair).abs() < 1e-10 && (s.eigenvalues[2] - pair).abs() < 1e-10);
    assert!((pair - 0.5 * (2.0 * PI / l).powi(2)).abs() < 1e-3);
    assert_eq!(s.bulk, s.eigenvalues);
}

#[test]
fn free_dirichlet_dispersion() {
    let (v1, v2) = zeros();
    let (l, h) = (20.0, 0.02);
    let p = RealSpaceProblem::new(l, h, Boundary::Dirichlet, &v1, &v2).unwrap();
    let s = realspace_spectrum(&p, 6, &SolverOptions::default()).unwrap();
    for (j, v) in s.eigenvalues.iter().enumerate() {
        let exact = (1.0 - ((j + 1) as f64 * PI * h / l).cos()) / (h * h);
        assert!((v - exact).abs() < 1e-10 * exact.max(1.0), "{v} vs {exact}");
    }
    assert_eq!(s.edge_states, 0);
}

#[test]
fn constant_potential_shifts() {
    let (z1, z2) = zeros();
    let c1 = FourierPotential::constant(Lattice::line(1.0).unwrap(), 0.7);
    let c2 = FourierPotential::constant(Lattice::line(golden()).unwrap(), -0.2);
    for b in [Boundary::Periodic, Boundary::Dirichlet] {
        let a = realspace_spectrum(&RealSpaceProblem::new(8.0, 0.05, b, &z1, &z2).unwrap(), 6, &SolverOptions::default()).unwrap();
        let c = realspace_spectrum(&RealSpaceProblem::new(8.0, 0.05, b, &c1, &c2).unwrap(), 6, &SolverOptions::default()).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&c.eigenvalues) {
            assert!((y - x - 0.5).abs() < 1e-9);
        }
    }
}

#[test]
fn mathieu_ground_state_matches_planewaves() {
    let (v1, _) = benchmark();
    let v2 = FourierPotential::zero(Lattice::line(golden()).unwrap());
    let p = RealSpaceProblem::new(10.0, 0.02, Boundary::Periodic, &v1, &v2).unwrap();
    let s = realspace_spectrum(&p, 1, &SolverOptions::default()).unwrap();
    // oracle: −½Δ + 2cos(2πx) in planewaves at k = 0, the band minimum
    let r = 12;
    let n = (2 * r + 1) as usize;
    let mut mat = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let m = i as f64 - r as f64;
        mat[(i, i)] = 0.5 * (2.0 * PI * m).powi(2);
        if i + 1 < n {
            mat[(i, i + 1)] = 1.0;
            mat[(i + 1, i)] = 1.0;
        }
    }
    let e0 = nalgebra::SymmetricEigen::new(mat).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((s.eigenvalues[0] - e0).abs() < 1e-3, "{} vs {e0}", s.eigenvalues[0]);
}

#[test]
fn sturm_path_agrees_with_dense() {
    let (v1, v2) = benchmark();
    let p = RealSpaceProblem::new(12.0, 0.04, Boundary::Dirichlet, &v1, &v2).unwrap();
    let s = realspace_spectrum(&p, 20, &SolverOptions::default()).unwrap();
    let pot = p.potential_samples().unwrap();
    let h2 = p.spacing * p.spacing;
    let diag: Vec<f64> = pot.iter().map(|v| v + 1.0 / h2).collect();
    let op = FdOperator { p: &p, diag: &diag, off: -0.5 / h2 };
    let mut vals: Vec<f64> = nalgebra::SymmetricEigen::new(op.real_dense()).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    for (a, b) in s.eigenvalues.iter().zip(&vals) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn two_dimensional_free_periodic() {
    let l2 = |a: f64| Lattice::new(&[vec![a, 0.0], vec![0.0, a]]).unwrap();
    let z1 = FourierPotential::zero(l2(1.0));
    let z2 = FourierPotential::zero(l2(golden()));
    let (l, h) = (4.0, 0.2);
    let p = RealSpaceProblem::new(l, h, Boundary::Periodic, &z1, &z2).unwrap();
    assert_eq!(p.unknowns(), 400);
    let s = realspace_spectrum(&p, 5, &SolverOptions::default()).unwrap();
    let first = 2.0 / (h * h) * (PI * h / l).sin().powi(2);
    assert!(s.eigenvalues[0].abs() < 1e-10);
    for v in &s.eigenvalues[1..5] {
        assert!((v - first).abs() < 1e-10);
    }
}

#[test]
fn iterative_path_for_larger_grids() {
    let (v1, v2) = benchmark();
    let mut p = RealSpaceProblem::new(6.0, 0.05, Boundary::Periodic, &v1, &v2).unwrap();
    let dense = realspace_spectrum(&p, 3, &SolverOptions::default()).unwrap();
    p.dense_cap = 10;
    let opts = SolverOptions { tol: 1e-8, max_iter: 5000, ..Default::default() };
    let iter = realspace_spectrum(&p, 3, &opts).unwrap();
    for (a, b) in dense.eigenvalues.iter().zip(&iter.eigenvalues) {
        assert!((a - b).abs() < 1e-7, "{a} vs {b}");
    }
}

#[test]
fn problem_validation() {
    let (v1, v2) = zeros();
    assert!(RealSpaceProblem::new(10.0, 0.3, Boundary::Dirichlet, &v1, &v2).is_err());
    assert!(RealSpaceProblem::new(-1.0, 0.1, Boundary::Dirichlet, &v1, &v2).is_err());
    let mut p = RealSpaceProblem::new(10.0, 0.01, Boundary::Dirichlet, &v1, &v2).unwrap();
    p.memory_cap = 100;
    assert!(matches!(realspace_spectrum(&p, 1, &SolverOptions::default()), Err(Error::MemoryCap { unknowns: 999, cap: 100 })));
    assert!(p.check_resolution(3.0, 1e-3).is_ok());
    assert!(p.check_resolution(3.0, 1e-5).is_err());
}

#[test]
fn dirichlet_bulk_is_stable_under_truncation() {
    let (v1, v2) = benchmark();
    let spec = |l: f64| {
        let p = RealSpaceProblem::new(l, 0.02, Boundary::Dirichlet, &v1, &v2).unwrap();
        realspace_spectrum(&p, (l * 0.6) as usize, &SolverOptions::default()).unwrap()
    };
    let a = spec(100.0);
    let b = spec(150.0);
    let lo = a.bulk[0].min(b.bulk[0]);
    let window = (lo, lo + 0.5);
    let ivs: Vec<(f64, f64)> = b.bulk.iter().map(|&x| (x, x)).collect();
    let d = hausdorff_window(&a.bulk, &ivs, window).unwrap();
    assert!(d < 5e-2, "{d}");
}

#[test]
fn hausdorff_examples() {
    let w = (-10.0, 10.0);
    assert_eq!(hausdorff_window(&[1.0, 2.0], &[(1.0, 1.0), (2.0, 2.0)], w).unwrap(), 0.0);
    assert_eq!(hausdorff_window(&[0.0], &[(1.0, 1.0)], w).unwrap(), 1.0);
    assert_eq!(hausdorff_window(&[0.0, 2.0], &[(0.0, 0.1), (1.9, 2.0)], w).unwrap(), 0.0);
    assert_eq!(hausdorff_window(&[0.0, 2.0], &[(0.0, 0.0), (2.0, 2.0)], w).unwrap(), 0.0);
    assert_eq!(hausdorff_window(&[0.0, 4.0], &[(0.5, 1.0), (3.0, 3.5)], w).unwrap(), 0.5);
    assert!(matches!(hausdorff_window(&[20.0], &[(0.0, 1.0)], w), Err(Error::EmptyWindow { .. })));
    assert!(hausdorff_window(&[0.0], &[(20.0, 21.0)], w).is_err());
}

proptest! {
    #[test]
    fn hausdorff_properties(pts in prop::collection::vec(-5.0f64..5.0, 1..12), shift in -1.0f64..1.0) {
        let ivs: Vec<(f64, f64)> = pts.iter().map(|&x| (x, x)).collect();
        let w = (-100.0, 100.0);
        prop_assert_eq!(hausdorff_window(&pts, &ivs, w).unwrap(), 0.0);
        let moved: Vec<(f64, f64)> = pts.iter().map(|&x| (x + shift, x + shift)).collect();
        prop_assert!(hausdorff_window(&pts, &moved, w).unwrap() <= shift.abs() + 1e-12);
        let mut rev = pts.clone();
        rev.reverse();
        prop_assert_eq!(hausdorff_window(&rev, &moved, w).unwrap(), hausdorff_window(&pts, &moved, w).unwrap());
    }
}
