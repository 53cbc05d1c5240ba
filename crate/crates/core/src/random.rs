//! Random matrices for tests and property checks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, C64, Mat};

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix with iid complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| c(standard_normal(rng), standard_normal(rng)))
}

/// Random Hermitian matrix (GUE-like, unit scale).
pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Mat {
    let g = ginibre(rng, d, d);
    (&g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Haar-ish unitary from a QR of a Ginibre matrix with phase correction.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Mat {
    let g = ginibre(rng, d, d);
    let qr = g.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let z = r[(j, j)];
        let ph = if z.norm() > 0.0 { z / z.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Random full-rank density matrix `G G† / Tr`.
pub fn density<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Mat {
    let g = ginibre(rng, d, d);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    let mut out = m / C64::new(tr, 0.0);
    // enforce exact Hermiticity
    let herm = (&out + out.adjoint()) * C64::new(0.5, 0.0);
    out = herm;
    out
}

/// Random pure state vector.
pub fn pure_state<R: Rng + ?Sized>(rng: &mut R, d: usize) -> crate::linalg::Vector {
    let g = ginibre(rng, d, 1);
    let v = g.column(0).into_owned();
    let n = v.norm();
    v / C64::new(n, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, is_hermitian, max_abs_diff};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let u = unitary(&mut rng, 6);
        assert!(max_abs_diff(&(u.adjoint() * &u), &identity(6)) < 1e-12);
    }

    #[test]
    fn density_is_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let r = density(&mut rng, 5);
        assert!(is_hermitian(&r, 0.0));
        assert!((r.trace().re - 1.0).abs() < 1e-14);
    }
}
