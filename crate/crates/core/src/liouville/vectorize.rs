//! Column-stacking vectorization and the matching Kronecker lift.
//!
//! Entry `(i, j)` of a `d x d` operator lives at position `j * d + i` of its
//! Liouville vector, so that `vec(A B C) = kron_lift(C^T, A) vec(B)`.

use crate::linalg::{CMatrix, CVector};

pub fn vec(m: &CMatrix) -> CVector {
    assert_eq!(m.nrows(), m.ncols(), "vec expects a square operator");
    // nalgebra storage is column-major, which is exactly column stacking.
    CVector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVector) -> CMatrix {
    let d = (v.len() as f64).sqrt().round() as usize;
    assert_eq!(d * d, v.len(), "Liouville vector length must be a square");
    CMatrix::from_column_slice(d, d, v.as_slice())
}

/// Kronecker product `a ⊗ b`.
pub fn kron_lift(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Vectorized identity; as a row it is the trace functional.
pub fn vec_identity(d: usize) -> CVector {
    vec(&CMatrix::identity(d, d))
}
