//! Random test instances: Ginibre matrices, states, POVMs and probability vectors.

use nalgebra::{Complex, DVector};
use rand::{Rng, RngExt};
use rand_distr::{Distribution, StandardNormal};

use crate::qmath::{self, ComplexMatrix, DensityMatrix, Povm};

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn complex_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| Complex::new(normal(rng), normal(rng)))
}

pub fn hermitian_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    qmath::hermitian_part(&complex_matrix(n, n, rng))
}

/// `G G†` for a square Ginibre `G`; full rank almost surely.
pub fn psd_matrix<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    let g = complex_matrix(n, n, rng);
    &g * g.adjoint()
}

/// Random mixed state of the given rank (Hilbert-Schmidt measure at full rank).
pub fn density_matrix<R: Rng + ?Sized>(n: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = complex_matrix(n, rank.max(1), rng);
    let m = &g * g.adjoint();
    let tr = qmath::trace_re(&m);
    DensityMatrix::new_unchecked(qmath::hermitian_part(&m.unscale(tr)))
}

pub fn pure_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DensityMatrix {
    density_matrix(n, 1, rng)
}

/// Random `d`-outcome POVM on `C^n`: `S^{-1/2} P_a S^{-1/2}` with `S = Σ P_a`.
pub fn povm<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Povm {
    let parts: Vec<ComplexMatrix> = (0..d).map(|_| psd_matrix(n, rng)).collect();
    let total = parts.iter().fold(ComplexMatrix::zeros(n, n), |acc, p| acc + p);
    let w = qmath::inv_sqrt_psd(&total, 1e-14);
    Povm::new_unchecked(parts.iter().map(|p| qmath::hermitian_part(&(&w * p * &w))).collect())
}

/// Projective qubit measurement along a uniformly random Bloch direction.
pub fn qubit_projective<R: Rng + ?Sized>(rng: &mut R) -> Povm {
    loop {
        let v = [normal(rng), normal(rng), normal(rng)];
        if v.iter().map(|x| x * x).sum::<f64>() > 1e-6 {
            return qmath::qubit_projective(v);
        }
    }
}

/// Point on the probability simplex (flat Dirichlet).
pub fn simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Unit vector in `C^n`.
pub fn unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<Complex<f64>> {
    let v = DVector::from_fn(n, |_, _| Complex::new(normal(rng), normal(rng)));
    let norm = v.norm();
    v.unscale(norm)
}
