//! Safe row-major GEMM wrapper over the blocked kernels in `matrixmultiply`.

use crate::Real;

/// Storage order of a GEMM operand relative to its logical shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Op {
    /// Operand stored as its logical `rows × cols` row-major matrix.
    N,
    /// Operand stored transposed (`cols × rows` row-major).
    T,
}

/// `c (m×n) = alpha · op(a) (m×k) · op(b) (k×n) + beta · c`.
///
/// Panics if any slice is too short for the stated dimensions.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(
    op_a: Op,
    op_b: Op,
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    assert!(a.len() >= m * k, "gemm: lhs too short");
    assert!(b.len() >= k * n, "gemm: rhs too short");
    assert!(c.len() >= m * n, "gemm: output too short");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match op_a {
        Op::N => (k as isize, 1),
        Op::T => (1, m as isize),
    };
    let (rsb, csb) = match op_b {
        Op::N => (n as isize, 1),
        Op::T => (1, k as isize),
    };
    // SAFETY: the asserts above bound every index the kernel can touch:
    // a spans m*k elements, b spans k*n, c spans m*n under these strides.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
