//! Convolution kernels on NHWC activations.
//!
//! Weights use the conventional layouts: `[out, in, k, k]` for convolutions
//! and `[in, out, k, k]` for transposed convolutions. Patch matrices order
//! their columns `(channel, ky, kx)` so both weight layouts multiply them
//! directly.

use crate::real::{gemm, MatRef, Real};

/// Sliding-window geometry of a convolution from an `in_h x in_w` grid to an
/// `out_h x out_w` grid. A transposed convolution uses the geometry of the
/// convolution it is the adjoint of (its output grid is `in_*`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub channels: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_h: usize,
    pub out_w: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Geometry {
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    #[inline]
    fn source(&self, o: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        if pos >= 0 && (pos as usize) < extent {
            Some(pos as usize)
        } else {
            None
        }
    }
}

/// Gather patches: `cols[(b, oy, ox), (c, ky, kx)] = x[b, iy, ix, c]`,
/// zero outside the image.
pub fn im2col<T: Real>(x: &[T], n: usize, g: &Geometry, cols: &mut [T]) {
    let (c_n, k) = (g.channels, g.kernel);
    let plen = g.patch_len();
    debug_assert_eq!(x.len(), n * g.in_h * g.in_w * c_n);
    debug_assert_eq!(cols.len(), n * g.out_h * g.out_w * plen);
    let mut row = 0;
    for b in 0..n {
        let img = &x[b * g.in_h * g.in_w * c_n..(b + 1) * g.in_h * g.in_w * c_n];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let dst = &mut cols[row * plen..(row + 1) * plen];
                for ky in 0..k {
                    let iy = g.source(oy, ky, g.in_h);
                    for kx in 0..k {
                        let ix = g.source(ox, kx, g.in_w);
                        match (iy, ix) {
                            (Some(iy), Some(ix)) => {
                                let src = &img[(iy * g.in_w + ix) * c_n..(iy * g.in_w + ix + 1) * c_n];
                                for (c, &v) in src.iter().enumerate() {
                                    dst[c * k * k + ky * k + kx] = v;
                                }
                            }
                            _ => {
                                for c in 0..c_n {
                                    dst[c * k * k + ky * k + kx] = T::ZERO;
                                }
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Scatter-add patches back onto the `in_h x in_w` grid; the adjoint of
/// [`im2col`]. `x` is overwritten.
pub fn col2im<T: Real>(cols: &[T], n: usize, g: &Geometry, x: &mut [T]) {
    let (c_n, k) = (g.channels, g.kernel);
    let plen = g.patch_len();
    debug_assert_eq!(x.len(), n * g.in_h * g.in_w * c_n);
    debug_assert_eq!(cols.len(), n * g.out_h * g.out_w * plen);
    x.fill(T::ZERO);
    let mut row = 0;
    for b in 0..n {
        let img = &mut x[b * g.in_h * g.in_w * c_n..(b + 1) * g.in_h * g.in_w * c_n];
        for oy in 0..g.out_h {
            for ox in 0..g.out_w {
                let src = &cols[row * plen..(row + 1) * plen];
                for ky in 0..k {
                    let Some(iy) = g.source(oy, ky, g.in_h) else { continue };
                    for kx in 0..k {
                        let Some(ix) = g.source(ox, kx, g.in_w) else { continue };
                        let dst = &mut img[(iy * g.in_w + ix) * c_n..(iy * g.in_w + ix + 1) * c_n];
                        for (c, d) in dst.iter_mut().enumerate() {
                            *d += src[c * k * k + ky * k + kx];
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

fn add_bias<T: Real>(out: &mut [T], bias: &[T]) {
    for row in out.chunks_exact_mut(bias.len()) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
}

fn bias_grad<T: Real>(dy: &[T], channels: usize, db: &mut [T]) {
    db.fill(T::ZERO);
    for row in dy.chunks_exact(channels) {
        for (d, &v) in db.iter_mut().zip(row) {
            *d += v;
        }
    }
}

/// Convolution. `g` maps the input grid to the output grid; returns the
/// output (`n x out_h x out_w x out_ch`) and fills `cols` with the patch
/// matrix needed for the weight gradient.
pub fn conv_forward<T: Real>(
    x: &[T],
    n: usize,
    g: &Geometry,
    weight: &[T],
    bias: &[T],
    cols: &mut alloc::vec::Vec<T>,
) -> alloc::vec::Vec<T> {
    let out_ch = bias.len();
    let rows = n * g.out_h * g.out_w;
    let plen = g.patch_len();
    cols.clear();
    cols.resize(rows * plen, T::ZERO);
    im2col(x, n, g, cols);
    let mut out = alloc::vec![T::ZERO; rows * out_ch];
    gemm(
        T::ONE,
        MatRef::new(cols, rows, plen),
        MatRef::new(weight, out_ch, plen).t(),
        T::ZERO,
        &mut out,
    );
    add_bias(&mut out, bias);
    out
}

/// Gradients of a convolution given the output gradient `dy`.
/// Writes `dw`, `db`, and returns the input gradient when `need_dx`.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Real>(
    dy: &[T],
    n: usize,
    g: &Geometry,
    weight: &[T],
    cols: &[T],
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Option<alloc::vec::Vec<T>> {
    let out_ch = db.len();
    let rows = n * g.out_h * g.out_w;
    let plen = g.patch_len();
    gemm(T::ONE, MatRef::new(dy, rows, out_ch).t(), MatRef::new(cols, rows, plen), T::ZERO, dw);
    bias_grad(dy, out_ch, db);
    if !need_dx {
        return None;
    }
    let mut dcols = alloc::vec![T::ZERO; rows * plen];
    gemm(T::ONE, MatRef::new(dy, rows, out_ch), MatRef::new(weight, out_ch, plen), T::ZERO, &mut dcols);
    let mut dx = alloc::vec![T::ZERO; n * g.in_h * g.in_w * g.channels];
    col2im(&dcols, n, g, &mut dx);
    Some(dx)
}

/// Transposed convolution. `g` is the adjoint geometry: `g.in_*` is this
/// layer's output grid, `g.out_*` its input grid, `g.channels` its output
/// channel count.
pub fn conv_transpose_forward<T: Real>(
    x: &[T],
    n: usize,
    in_ch: usize,
    g: &Geometry,
    weight: &[T],
    bias: &[T],
) -> alloc::vec::Vec<T> {
    let rows = n * g.out_h * g.out_w;
    let plen = g.patch_len();
    let mut cols = alloc::vec![T::ZERO; rows * plen];
    gemm(T::ONE, MatRef::new(x, rows, in_ch), MatRef::new(weight, in_ch, plen), T::ZERO, &mut cols);
    let mut out = alloc::vec![T::ZERO; n * g.in_h * g.in_w * g.channels];
    col2im(&cols, n, g, &mut out);
    add_bias(&mut out, bias);
    out
}

#[allow(clippy::too_many_arguments)]
pub fn conv_transpose_backward<T: Real>(
    dy: &[T],
    x: &[T],
    n: usize,
    in_ch: usize,
    g: &Geometry,
    weight: &[T],
    dw: &mut [T],
    db: &mut [T],
    need_dx: bool,
) -> Option<alloc::vec::Vec<T>> {
    let rows = n * g.out_h * g.out_w;
    let plen = g.patch_len();
    let mut dcols = alloc::vec![T::ZERO; rows * plen];
    im2col(dy, n, g, &mut dcols);
    gemm(T::ONE, MatRef::new(x, rows, in_ch).t(), MatRef::new(&dcols, rows, plen), T::ZERO, dw);
    bias_grad(dy, g.channels, db);
    if !need_dx {
        return None;
    }
    let mut dx = alloc::vec![T::ZERO; rows * in_ch];
    gemm(T::ONE, MatRef::new(&dcols, rows, plen), MatRef::new(weight, in_ch, plen).t(), T::ZERO, &mut dx);
    Some(dx)
}

/// Planar `n x c x h x w` to interleaved `n x h x w x c`.
pub fn nchw_to_nhwc<T: Copy>(src: &[T], n: usize, c: usize, hw: usize) -> alloc::vec::Vec<T> {
    let mut out = alloc::vec::Vec::with_capacity(src.len());
    for b in 0..n {
        let img = &src[b * c * hw..(b + 1) * c * hw];
        for p in 0..hw {
            for ch in 0..c {
                out.push(img[ch * hw + p]);
            }
        }
    }
    out
}

pub fn nhwc_to_nchw<T: Copy>(src: &[T], n: usize, c: usize, hw: usize) -> alloc::vec::Vec<T> {
    let mut out = alloc::vec::Vec::with_capacity(src.len());
    for b in 0..n {
        let img = &src[b * c * hw..(b + 1) * c * hw];
        for ch in 0..c {
            for p in 0..hw {
                out.push(img[p * c + ch]);
            }
        }
    }
    out
}
