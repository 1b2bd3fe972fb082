use super::*;
use crate::geometry::{KPoint, Lattice, LatticeIndex, ProductCell};
use crate::operator::{monolayer_dense, PlanewaveBasis};
use crate::potential::FourierPotential;
use proptest::prelude::*;

fn golden() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

fn cell() -> ProductCell {
    ProductCell::new(Lattice::line(1.0).unwrap(), Lattice::line(golden()).unwrap()).unwrap()
}

fn benchmark_potentials() -> (FourierPotential, FourierPotential) {
    (
        FourierPotential::cosine_pair(Lattice::line(1.0).unwrap(), LatticeIndex::new(&[1]), 1.0).unwrap(),
        FourierPotential::cosine_pair(Lattice::line(golden()).unwrap(), LatticeIndex::new(&[1]), 1.0).unwrap(),
    )
}

struct Small(DMatrix<Complex64>);

impl HermitianOperator for Small {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let v = &self.0 * nalgebra::DVector::from_column_slice(x);
        y.copy_from_slice(v.as_slice());
    }
    fn preconditioner_diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }
}

fn check_invariants(res: &EigenResult, tol: f64) {
    for w in res.eigenvalues.windows(2) {
        assert!(w[0] <= w[1]);
    }
    for (i, x) in res.eigenvectors.iter().enumerate() {
        let nrm: f64 = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((nrm - 1.0).abs() <= 1e-12, "norm {nrm}");
        for y in &res.eigenvectors[i + 1..] {
            let ov: Complex64 = x.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
            assert!(ov.norm() <= 1e-10, "overlap {}", ov.norm());
        }
    }
    for &r in &res.residual_norms {
        assert!(r <= tol, "residual {r}");
    }
}

#[test]
fn free_particle_ground_state() {
    let b = PlanewaveBasis::boxed(cell(), 2, 2).unwrap();
    let z1 = FourierPotential::zero(Lattice::line(1.0).unwrap());
    let z2 = FourierPotential::zero(Lattice::line(golden()).unwrap());
    let h = BlochHamiltonian::new(&b, KPoint::gamma(1), 1.0, &z1, &z2).unwrap();
    for path in [PathHint::Dense, PathHint::Iterative] {
        let opts = SolverOptions { path, ..Default::default() };
        let res = lowest_eigenpairs(&h, 1, &opts).unwrap();
        assert!(res.eigenvalues[0].abs() <= 1e-12);
    }
}

#[test]
fn two_by_two_analytic() {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    let op = Small(DMatrix::from_row_slice(2, 2, &[zero, one, one, zero]));
    let res = lowest_eigenpairs(&op, 2, &SolverOptions::default()).unwrap();
    assert!((res.eigenvalues[0] + 1.0).abs() < 1e-14);
    assert!((res.eigenvalues[1] - 1.0).abs() < 1e-14);
    assert_eq!(res.path, SolverPath::Dense);
}

#[test]
fn mathieu_monolayer_ground_state() {
    let b = PlanewaveBasis::boxed(cell(), 6, 6).unwrap();
    let (v1, _) = benchmark_potentials();
    let v2 = FourierPotential::zero(Lattice::line(golden()).unwrap());
    let h = BlochHamiltonian::new(&b, KPoint::gamma(1), 1.0, &v1, &v2).unwrap();

    // the monolayer −Δ + 2cos(2πx) at k = 0 on the same box, plus the free
    // ground state 0 of the second layer
    let mono = monolayer_dense(&v1, &[0.0], 6);
    let (vals, _) = dense::sorted_eigen(&mono);

    let dense = lowest_eigenpairs(&h, 1, &SolverOptions { path: PathHint::Dense, ..Default::default() }).unwrap();
    let iter = lowest_eigenpairs(&h, 1, &SolverOptions { path: PathHint::Iterative, ..Default::default() }).unwrap();
    assert_eq!(iter.path, SolverPath::Iterative);
    assert!((dense.eigenvalues[0] - vals[0]).abs() <= 1e-10);
    assert!((iter.eigenvalues[0] - dense.eigenvalues[0]).abs() <= 1e-9);
}

#[test]
fn argument_errors() {
    let b = PlanewaveBasis::boxed(cell(), 1, 1).unwrap();
    let (v1, v2) = benchmark_potentials();
    let h = BlochHamiltonian::new(&b, KPoint::gamma(1), 1.0, &v1, &v2).unwrap();
    assert!(lowest_eigenpairs(&h, 0, &SolverOptions::default()).is_err());
    assert!(lowest_eigenpairs(&h, 10, &SolverOptions::default()).is_err());
    assert!(lowest_eigenpairs(&h, 1, &SolverOptions { tol: 0.0, ..Default::default() }).is_err());
}

#[test]
fn non_convergence_reports_residuals() {
    let b = PlanewaveBasis::boxed(cell(), 8, 8).unwrap();
    let (v1, v2) = benchmark_potentials();
    let h = BlochHamiltonian::new(&b, KPoint::from_fractional(&[0.3], &[0.6]).unwrap(), 0.05, &v1, &v2).unwrap();
    let opts = SolverOptions { path: PathHint::Iterative, max_iter: 2, tol: 1e-13, ..Default::default() };
    match lowest_eigenpairs(&h, 4, &opts) {
        Err(Error::NotConverged { iterations, residuals, worst }) => {
            assert_eq!(iterations, 2);
            assert_eq!(residuals.len(), 4);
            assert!(worst > 1e-13);
        }
        other => panic!("expected failure, got {other:?}"),
    }
}

#[test]
fn iterative_reproducible_for_fixed_seed() {
    let b = PlanewaveBasis::boxed(cell(), 7, 7).unwrap();
    let (v1, v2) = benchmark_potentials();
    let h = BlochHamiltonian::new(&b, KPoint::from_fractional(&[0.1], &[0.9]).unwrap(), 0.1, &v1, &v2).unwrap();
    let opts = SolverOptions { path: PathHint::Iterative, ..Default::default() };
    let a = lowest_eigenpairs(&h, 5, &opts).unwrap();
    let c = lowest_eigenpairs(&h, 5, &opts).unwrap();
    assert_eq!(a.eigenvalues, c.eigenvalues);
    assert_eq!(a.iterations, c.iterations);
}

#[test]
fn nested_boxes_are_variational() {
    let (v1, v2) = benchmark_potentials();
    let k = KPoint::from_fractional(&[0.2], &[0.7]).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for r in [3, 4, 5, 6] {
        let b = PlanewaveBasis::boxed(cell(), r, r).unwrap();
        let h = BlochHamiltonian::new(&b, k, 0.3, &v1, &v2).unwrap();
        let res = lowest_eigenpairs(&h, 6, &SolverOptions { path: PathHint::Dense, ..Default::default() }).unwrap();
        if let Some(p) = &prev {
            for (a, b) in res.eigenvalues.iter().zip(p) {
                assert!(*a <= b + 1e-12);
            }
        }
        prev = Some(res.eigenvalues);
    }
}

#[test]
fn regularization_is_monotone() {
    let (v1, v2) = benchmark_potentials();
    let b = PlanewaveBasis::boxed(cell(), 5, 5).unwrap();
    let k = KPoint::from_fractional(&[0.4], &[0.15]).unwrap();
    let mut prev: Option<Vec<f64>> = None;
    for delta in [1.0, 0.5, 0.2, 0.05, 0.01] {
        let h = BlochHamiltonian::new(&b, k, delta, &v1, &v2).unwrap();
        let res = lowest_eigenpairs(&h, 8, &SolverOptions { path: PathHint::Dense, ..Default::default() }).unwrap();
        if let Some(p) = &prev {
            for (a, b) in res.eigenvalues.iter().zip(p) {
                assert!(*a <= b + 1e-10);
            }
        }
        prev = Some(res.eigenvalues);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn dense_and_iterative_agree(
        r1 in 3i32..9, r2 in 3i32..9,
        kf in 0.0f64..1.0, kpf in 0.0f64..1.0,
        delta in 0.01f64..1.0,
        a1 in -1.5f64..1.5, a2 in -1.5f64..1.5, c in -1.0f64..1.0,
        m in 1usize..6,
        seed in any::<u64>(),
    ) {
        let v1 = FourierPotential::new(
            Lattice::line(1.0).unwrap(),
            [
                (LatticeIndex::new(&[1]), Complex64::new(a1, 0.3)),
                (LatticeIndex::new(&[-1]), Complex64::new(a1, -0.3)),
                (LatticeIndex::ZERO, Complex64::new(c, 0.0)),
            ],
        ).unwrap();
        let v2 = FourierPotential::cosine_pair(Lattice::line(golden()).unwrap(), LatticeIndex::new(&[2]), a2).unwrap();
        let b = PlanewaveBasis::boxed(cell(), r1, r2).unwrap();
        prop_assume!(b.len() <= 1024);
        let h = BlochHamiltonian::new(&b, KPoint::from_fractional(&[kf], &[kpf]).unwrap(), delta, &v1, &v2).unwrap();
        let tol = 1e-9;
        let dense = lowest_eigenpairs(&h, m, &SolverOptions { path: PathHint::Dense, ..Default::default() }).unwrap();
        let iter = lowest_eigenpairs(&h, m, &SolverOptions { path: PathHint::Iterative, tol, seed, ..Default::default() }).unwrap();
        check_invariants(&iter, tol);
        let scale = dense.eigenvalues.iter().fold(1.0f64, |s, x| s.max(x.abs()));
        check_invariants(&dense, 1e-10 * scale);
        for (a, b) in dense.eigenvalues.iter().zip(&iter.eigenvalues) {
            prop_assert!((a - b).abs() <= (1e-9f64).max(10.0 * tol), "{} vs {}", a, b);
        }
    }
}
