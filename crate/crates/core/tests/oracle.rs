use moire_core::eigensolve::SolverOptions;
use moire_core::geometry::{Lattice, LatticeIndex};
use moire_core::potential::FourierPotential;
use moire_core::reference::{hausdorff_window, realspace_spectrum, Boundary, RealSpaceProblem};
use moire_core::sweep::merge_intervals;

fn benchmark() -> (FourierPotential, FourierPotential) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    (
        FourierPotential::cosine_pair(Lattice::line(1.0).unwrap(), LatticeIndex::new(&[1]), 1.0).unwrap(),
        FourierPotential::cosine_pair(Lattice::line(phi).unwrap(), LatticeIndex::new(&[1]), 1.0).unwrap(),
    )
}

// Windowed eigenvalues barely move when the domain grows at fixed spacing.
#[test]
fn windowed_spectrum_stable_under_domain_growth() {
    let (v1, v2) = benchmark();
    let opts = SolverOptions::default();
    let spectrum = |length: f64, m: usize| {
        let p = RealSpaceProblem::new(length, 0.01, Boundary::Dirichlet, &v1, &v2).unwrap();
        realspace_spectrum(&p, m, &opts).unwrap().bulk
    };
    let small = spectrum(200.0, 260);
    let large = spectrum(300.0, 380);
    let low = small[0].min(large[0]);
    let window = (low - 0.5, low + 3.0);
    assert!(*small.last().unwrap() > window.1 && *large.last().unwrap() > window.1);
    // points of the larger domain against tiny intervals around the smaller one
    let mut ivs: Vec<(f64, f64)> = small.iter().map(|&e| (e, e)).collect();
    let ivs = merge_intervals(&mut ivs);
    let d = hausdorff_window(&large, &ivs, window).unwrap();
    assert!(d < 5e-2, "distance {d}");
}
