#![allow(dead_code)]

use demon_battery::qmath::{c, CMatrix, C64};
use demon_battery::states::DensityMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn gaussian_c<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix `A` and `ρ = AA†/tr(AA†)`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let a = CMatrix::from_fn(dim, |_, _| gaussian_c(rng));
    let aa = a * a.adjoint();
    let tr = aa.trace().re;
    DensityMatrix::new(aa.scale_real(1.0 / tr)).unwrap()
}

/// GUE-like matrix with entries of order one.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let a = CMatrix::from_fn(dim, |_, _| gaussian_c(rng));
    (a + a.adjoint()).scale_real(0.5)
}

/// Haar SU(2) element from a uniformly random unit quaternion.
pub fn haar_su2<R: Rng + ?Sized>(rng: &mut R) -> CMatrix {
    let q: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let n = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let a = c(q[0] / n, q[1] / n);
    let b = c(q[2] / n, q[3] / n);
    CMatrix::from_rows(&[&[a, -b.conj()], &[b, a.conj()]]).unwrap()
}

/// Qubit state from a Bloch vector inside the unit ball.
pub fn bloch_state(r: [f64; 3]) -> DensityMatrix {
    let m = CMatrix::from_rows(&[
        &[c((1.0 + r[2]) / 2.0, 0.0), c(r[0] / 2.0, -r[1] / 2.0)],
        &[c(r[0] / 2.0, r[1] / 2.0), c((1.0 - r[2]) / 2.0, 0.0)],
    ])
    .unwrap();
    DensityMatrix::new(m).unwrap()
}
