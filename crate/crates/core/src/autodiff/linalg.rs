//! Matrix kernels shared by the dense and convolution ops.

/// `C = A·B` (or `C += A·B` when `accumulate`), all row-major.
///
/// `a_t` means the slice holds Aᵀ (shape `[k, m]`), `b_t` that it holds Bᵀ
/// (shape `[n, k]`).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    c: &mut [f64],
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let (rsa, csa) = if a_t {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_t {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the strides above address exactly the m×k, k×n and m×n
    // row-major buffers whose lengths are asserted on entry.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
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

/// Unfolds one `[h, w, c]` image into `[h*w, 9*c]` rows of 3×3 zero-padded
/// neighbourhoods. Column order is `(ky, kx, channel)`, matching a kernel
/// stored as `[3, 3, c_in, c_out]`.
pub(crate) fn im2col3(image: &[f64], h: usize, w: usize, c: usize, cols: &mut [f64]) {
    debug_assert_eq!(cols.len(), h * w * 9 * c);
    let row_len = 9 * c;
    for i in 0..h {
        for j in 0..w {
            let row = &mut cols[(i * w + j) * row_len..(i * w + j + 1) * row_len];
            for ky in 0..3 {
                for kx in 0..3 {
                    let dst = &mut row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c];
                    let (si, sj) = (i + ky, j + kx);
                    if si == 0 || sj == 0 || si > h || sj > w {
                        dst.iter_mut().for_each(|v| *v = 0.0);
                    } else {
                        let src = ((si - 1) * w + (sj - 1)) * c;
                        dst.copy_from_slice(&image[src..src + c]);
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col3`]: scatters column gradients back onto the image.
pub(crate) fn col2im3_add(cols: &[f64], h: usize, w: usize, c: usize, image: &mut [f64]) {
    let row_len = 9 * c;
    for i in 0..h {
        for j in 0..w {
            let row = &cols[(i * w + j) * row_len..(i * w + j + 1) * row_len];
            for ky in 0..3 {
                for kx in 0..3 {
                    let (si, sj) = (i + ky, j + kx);
                    if si == 0 || sj == 0 || si > h || sj > w {
                        continue;
                    }
                    let dst = ((si - 1) * w + (sj - 1)) * c;
                    let src = &row[(ky * 3 + kx) * c..(ky * 3 + kx + 1) * c];
                    for (d, s) in image[dst..dst + c].iter_mut().zip(src) {
                        *d += s;
                    }
                }
            }
        }
    }
}
