//! Matrix exponential.
//!
//! Diagonalizable input with a well-conditioned eigenbasis goes through the
//! spectral route; everything else through scaling-and-squaring with a
//! degree-13 Padé approximant.

use crate::linalg::{identity, norm1, CMatrix, EigenDecomposition, C64};

const THETA_13: f64 = 5.371_920_351_148_152;

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// `exp(a)` for a square complex matrix.
pub fn expm(a: &CMatrix) -> CMatrix {
    match EigenDecomposition::new(a) {
        Some(eig) => eig.apply_fn(|z| z.exp()),
        None => expm_pade(a),
    }
}

/// Scaling-and-squaring with a [13/13] Padé approximant.
pub fn expm_pade(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm requires a square matrix");
    if n == 0 {
        return a.clone();
    }
    let norm = norm1(a);
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * C64::new(2f64.powi(-squarings), 0.0);

    let eye = identity(n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &eye * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &eye * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular after scaling");
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, cr, max_abs_diff, CVector};

    #[test]
    fn zero_gives_identity() {
        let z = CMatrix::zeros(3, 3);
        assert!(max_abs_diff(&expm(&z), &identity(3)) < 1e-15);
        assert!(max_abs_diff(&expm_pade(&z), &identity(3)) < 1e-15);
    }

    #[test]
    fn nilpotent_series_truncates() {
        let n = CMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(0.0), cr(0.0)]);
        let want = CMatrix::from_row_slice(2, 2, &[cr(1.0), cr(1.0), cr(0.0), cr(1.0)]);
        // Jordan block: spectral route is refused, Padé takes over.
        assert!(max_abs_diff(&expm(&n), &want) < 1e-14);
    }

    #[test]
    fn diagonal_case() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![cr(-1.0), c(-2.0, 3.0)]));
        let got = expm(&d);
        assert!((got[(0, 0)] - cr((-1.0f64).exp())).norm() < 1e-15);
        assert!((got[(1, 1)] - c(-2.0, 3.0).exp()).norm() < 1e-15);
        assert!(got[(0, 1)].norm() < 1e-15 && got[(1, 0)].norm() < 1e-15);
    }

    #[test]
    fn large_norm_needs_squaring() {
        let a = CMatrix::from_row_slice(2, 2, &[c(-20.0, 3.0), cr(15.0), cr(0.5), c(-30.0, -1.0)]);
        assert!(max_abs_diff(&expm(&a), &expm_pade(&a)) < 1e-12);
    }
}
