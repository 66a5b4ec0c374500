//! Seeded random test ensembles.
//!
//! Every generator draws from [`rng`], a ChaCha8 stream keyed by a 64-bit seed, so a
//! seed fully determines the matrices produced.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::matrix::ComplexMatrix;

pub type EnsembleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> EnsembleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard complex Gaussian sample (unit variance split over real and imaginary parts).
pub fn gaussian(rng: &mut impl Rng) -> Complex64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    let r = (-u1.ln()).sqrt();
    Complex64::from_polar(r, 2.0 * std::f64::consts::PI * u2)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    let entries: Vec<Complex64> = (0..rows * cols).map(|_| gaussian(rng)).collect();
    ComplexMatrix::new(rows, cols, entries).expect("finite gaussian entries")
}

/// Random matrix rescaled to the given operator norm.
pub fn random_with_norm(rng: &mut impl Rng, rows: usize, cols: usize, norm: f64) -> ComplexMatrix {
    let m = random_matrix(rng, rows, cols);
    m.scale_real(norm / m.operator_norm())
}

/// Haar-like unitary from the QR factor of a Gaussian matrix with phase correction.
pub fn random_unitary(rng: &mut impl Rng, n: usize) -> ComplexMatrix {
    let g = random_matrix(rng, n, n).into_nalgebra();
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let phases = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let d = r[(i, i)];
            if d.norm() == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                d / d.norm()
            }
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    ComplexMatrix::from_nalgebra(q * phases)
}

/// Hermitian matrix `U diag(d) U*`.
pub fn hermitian_with_spectrum(rng: &mut impl Rng, spectrum: &[f64]) -> ComplexMatrix {
    let u = random_unitary(rng, spectrum.len());
    &(&u * &ComplexMatrix::from_real_diagonal(spectrum)) * &u.adjoint()
}

/// Random anti-Hermitian matrix with the given operator norm.
pub fn skew_hermitian(rng: &mut impl Rng, n: usize, norm: f64) -> ComplexMatrix {
    let g = random_matrix(rng, n, n);
    let s = (&g - &g.adjoint()).scale_real(0.5);
    let s_norm = s.operator_norm();
    if s_norm == 0.0 {
        s
    } else {
        s.scale_real(norm / s_norm)
    }
}

/// Accretive matrix with `H(A)` having smallest eigenvalue exactly `mu` and `||A|| <= 1`.
pub fn random_accretive(rng: &mut impl Rng, n: usize, mu: f64) -> ComplexMatrix {
    random_accretive_bounded(rng, n, mu, 1.0)
}

/// Accretive matrix with `λ_min(H(A)) = mu` and `||A|| <= max_norm`; requires `mu < max_norm`.
pub fn random_accretive_bounded(rng: &mut impl Rng, n: usize, mu: f64, max_norm: f64) -> ComplexMatrix {
    assert!(mu > 0.0 && mu < max_norm, "need 0 < mu < max_norm");
    let top = mu + (max_norm - mu) * rng.gen_range(0.3..0.7);
    let mut spec: Vec<f64> = (0..n).map(|_| rng.gen_range(mu..=top)).collect();
    spec[0] = mu;
    let h = hermitian_with_spectrum(rng, &spec);
    let h_norm = spec.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let skew_norm = (max_norm - h_norm) * rng.gen_range(0.2..1.0);
    let s = skew_hermitian(rng, n, skew_norm);
    &h + &s
}

/// Hermitian positive definite matrix with spectrum in `[lo, hi]`, `lo` attained.
pub fn random_hpd(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> ComplexMatrix {
    let mut spec: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    spec[0] = lo;
    hermitian_with_spectrum(rng, &spec)
}

/// Defective accretive matrix: a unitarily rotated single Jordan block `c I + ν N`
/// with `λ_min(H(A)) = mu` and `||A|| <= max_norm`.
pub fn jordan_accretive(rng: &mut impl Rng, n: usize, mu: f64, max_norm: f64) -> ComplexMatrix {
    let cosn = (std::f64::consts::PI / (n as f64 + 1.0)).cos();
    let room = max_norm - mu;
    let nu = room * rng.gen_range(0.25..0.45);
    let re = mu + nu * cosn;
    let im_room = (max_norm - nu).powi(2) - re * re;
    let im = if im_room > 0.0 { im_room.sqrt() * rng.gen_range(-0.5..0.5) } else { 0.0 };
    let c = Complex64::new(re, im);
    let j = ComplexMatrix::from_fn(n, n, |r, k| {
        if r == k {
            c
        } else if k == r + 1 {
            Complex64::new(nu, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let u = random_unitary(rng, n);
    &(&u * &j) * &u.adjoint()
}

/// Normal matrix with the given eigenvalues.
pub fn normal_with_spectrum(rng: &mut impl Rng, spectrum: &[Complex64]) -> ComplexMatrix {
    let u = random_unitary(rng, spectrum.len());
    &(&u * &ComplexMatrix::from_diagonal(spectrum)) * &u.adjoint()
}

/// FoV-gapped Sylvester triple with `H(A), H(B) ⪰ mu` and augmented norm `<= 1`.
///
/// `A` and `B` are kept at norm `<= 0.75` and `C` at norm `<= 0.25`.
pub fn fov_triple(rng: &mut impl Rng, n: usize, m: usize, mu: f64) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let a = random_accretive_bounded(rng, n, mu, 0.75);
    let b = random_accretive_bounded(rng, m, mu, 0.75);
    let c_norm = rng.gen_range(0.05..0.25);
    let c = random_with_norm(rng, n, m, c_norm);
    (a, b, c)
}

/// Defective variant of [`fov_triple`].
pub fn jordan_triple(rng: &mut impl Rng, n: usize, m: usize, mu: f64) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let a = jordan_accretive(rng, n, mu, 0.75);
    let b = jordan_accretive(rng, m, mu, 0.75);
    let c_norm = rng.gen_range(0.05..0.25);
    let c = random_with_norm(rng, n, m, c_norm);
    (a, b, c)
}

/// Riccati triple `(A, G, Q)` with `||A|| = 1` and full-rank PSD `G`, `Q` of norm `g`, `q`.
///
/// Full-rank weights make `(A, G)` stabilizable and `(Q, A)` detectable.
pub fn care_triple(rng: &mut impl Rng, n: usize, g: f64, q: f64) -> (ComplexMatrix, ComplexMatrix, ComplexMatrix) {
    let a = random_with_norm(rng, n, n, 1.0);
    let mut psd = |scale: f64| {
        let b = random_matrix(rng, n, n);
        let p = (&b * &b.adjoint()).shifted(Complex64::new(0.1 * n as f64, 0.0));
        let p = p.scale_real(scale / p.operator_norm());
        (&p + &p.adjoint()).scale_real(0.5)
    };
    let g = psd(g);
    let q = psd(q);
    (a, g, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::numerical_range_margin;

    #[test]
    fn accretive_generators_hit_their_margins() {
        let mut g = rng(1);
        for n in 1..6 {
            let a = random_accretive_bounded(&mut g, n, 0.2, 0.75);
            assert!((numerical_range_margin(&a, 0.0).unwrap() - 0.2).abs() < 1e-12);
            assert!(a.operator_norm() <= 0.75 + 1e-12);
            let j = jordan_accretive(&mut g, n, 0.2, 0.75);
            assert!((numerical_range_margin(&j, 0.0).unwrap() - 0.2).abs() < 1e-12);
            assert!(j.operator_norm() <= 0.75 + 1e-12);
        }
    }

    #[test]
    fn unitary_is_unitary() {
        let mut g = rng(2);
        let u = random_unitary(&mut g, 5);
        assert!((&(&u.adjoint() * &u) - &ComplexMatrix::identity(5)).max_abs() < 1e-13);
    }

    #[test]
    fn seed_determines_output() {
        let a = random_matrix(&mut rng(42), 3, 3);
        let b = random_matrix(&mut rng(42), 3, 3);
        assert_eq!(a, b);
    }
}
