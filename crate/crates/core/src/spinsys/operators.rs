//! Spin operators for the electron (S = 1) and the ¹³C nuclei (I = 1/2),
//! and their embeddings into the register Hilbert space.
//!
//! Electron basis order is m_s = +1, 0, −1; nuclear basis order is ↑, ↓.
//! The register index is `electron * 2^N + nuclear_bits`, nucleus 0 being
//! the most significant bit.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

const fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Spin-1 operators S_x, S_y, S_z.
pub fn spin_one() -> [CMatrix; 3] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = c(0.0, 0.0);
    let sx = CMatrix::from_row_slice(3, 3, &[z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z, c(r, 0.0), z]);
    let sy = CMatrix::from_row_slice(3, 3, &[z, c(0.0, -r), z, c(0.0, r), z, c(0.0, -r), z, c(0.0, r), z]);
    let sz = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![c(1.0, 0.0), z, c(-1.0, 0.0)]));
    [sx, sy, sz]
}

/// Spin-1/2 operators I_x, I_y, I_z.
pub fn spin_half() -> [CMatrix; 3] {
    let z = c(0.0, 0.0);
    let h = 0.5;
    [
        CMatrix::from_row_slice(2, 2, &[z, c(h, 0.0), c(h, 0.0), z]),
        CMatrix::from_row_slice(2, 2, &[z, c(0.0, -h), c(0.0, h), z]),
        CMatrix::from_row_slice(2, 2, &[c(h, 0.0), z, z, c(-h, 0.0)]),
    ]
}

/// Nuclear operator `op` acting on nucleus `q` of `n` nuclei, identity on
/// the others (dimension 2^n).
pub fn embed_nuclear(op: &CMatrix, q: usize, n: usize) -> CMatrix {
    let mut out = identity(1);
    for k in 0..n {
        out = if k == q { out.kronecker(op) } else { out.kronecker(&identity(2)) };
    }
    out
}

/// Electron-space operator ⊗ nuclear-space operator.
pub fn electron_nuclear(e: &CMatrix, nuc: &CMatrix) -> CMatrix {
    e.kronecker(nuc)
}

/// Electron operator lifted to the full register of `n` nuclei.
pub fn electron_full(e: &CMatrix, n: usize) -> CMatrix {
    e.kronecker(&identity(1 << n))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    fn assert_close(a: &CMatrix, b: &CMatrix) {
        assert!((a - b).norm() < 1e-14, "\n{a}\n{b}");
    }

    #[test]
    fn angular_momentum_algebra() {
        let i = Complex64::i();
        for (s, ss) in [(spin_one(), 2.0), (spin_half(), 0.75)] {
            assert_close(&commutator(&s[0], &s[1]), &(s[2].clone() * i));
            assert_close(&commutator(&s[1], &s[2]), &(s[0].clone() * i));
            let casimir = &s[0] * &s[0] + &s[1] * &s[1] + &s[2] * &s[2];
            let d = casimir.nrows();
            assert_close(&casimir, &(identity(d) * Complex64::from(ss)));
        }
    }

    #[test]
    fn embedding_dimensions() {
        let iz = &spin_half()[2];
        let e = embed_nuclear(iz, 1, 3);
        assert_eq!(e.nrows(), 8);
        // nucleus 1 is the middle bit: index 0b010 is spin down on nucleus 1
        assert_eq!(e[(0b010, 0b010)].re, -0.5);
        assert_eq!(e[(0b101, 0b101)].re, 0.5);
        assert_eq!(electron_full(&spin_one()[2], 2).nrows(), 12);
    }
}
