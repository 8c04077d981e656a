//! im2col convolution kernels backed by a blocked GEMM.

#[derive(Debug, Clone, Copy)]
pub(super) struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub o: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    fn col_rows(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn col_cols(&self) -> usize {
        self.oh * self.ow
    }

    /// 1x1, stride 1, no padding: the input plane already is the column matrix.
    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.pad == 0
    }
}

/// `c = alpha * a * b + beta * c` with explicit row/column strides.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    debug_assert!(a.len() >= (m - 1) * rsa + (k - 1) * csa + 1);
    debug_assert!(b.len() >= (k - 1) * rsb + (n - 1) * csb + 1);
    debug_assert!(c.len() >= m * n);
    // SAFETY: the slices cover every element addressed by the given strides
    // (checked above in debug builds, guaranteed by ConvGeom in release).
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn im2col(input: &[f64], g: &ConvGeom, col: &mut [f64]) {
    let cols = g.col_cols();
    for ci in 0..g.c {
        let plane = &input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let dst = &mut col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, v) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        *v = if ix < 0 || ix >= g.w as isize {
                            0.0
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im(col: &[f64], g: &ConvGeom, grad_input: &mut [f64]) {
    let cols = g.col_cols();
    for ci in 0..g.c {
        let plane = &mut grad_input[ci * g.h * g.w..(ci + 1) * g.h * g.w];
        for ky in 0..g.kh {
            for kx in 0..g.kw {
                let row = (ci * g.kh + ky) * g.kw + kx;
                let src = &col[row * cols..(row + 1) * cols];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ky) as isize - g.pad as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kx) as isize - g.pad as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(super) fn forward(input: &[f64], kernel: &[f64], bias: Option<&[f64]>, g: &ConvGeom) -> Vec<f64> {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let in_stride = g.c * g.h * g.w;
    let out_stride = g.o * cols;
    let mut out = vec![0.0; g.n * out_stride];
    let mut col = if g.is_pointwise() { Vec::new() } else { vec![0.0; rows * cols] };
    for n in 0..g.n {
        let x = &input[n * in_stride..(n + 1) * in_stride];
        let colm: &[f64] = if g.is_pointwise() {
            x
        } else {
            im2col(x, g, &mut col);
            &col
        };
        let out_n = &mut out[n * out_stride..(n + 1) * out_stride];
        gemm(g.o, rows, cols, kernel, (rows, 1), colm, (cols, 1), 0.0, out_n);
        if let Some(b) = bias {
            for (o, chunk) in out_n.chunks_mut(cols).enumerate() {
                chunk.iter_mut().for_each(|v| *v += b[o]);
            }
        }
    }
    out
}

pub(super) struct ConvGrads<'a> {
    pub input: Option<&'a mut [f64]>,
    pub kernel: Option<&'a mut [f64]>,
    pub bias: Option<&'a mut [f64]>,
}

pub(super) fn backward(input: &[f64], kernel: &[f64], grad_out: &[f64], g: &ConvGeom, mut grads: ConvGrads<'_>) {
    let (rows, cols) = (g.col_rows(), g.col_cols());
    let in_stride = g.c * g.h * g.w;
    let out_stride = g.o * cols;
    let mut col = vec![0.0; rows * cols];
    let mut dcol = vec![0.0; rows * cols];
    for n in 0..g.n {
        let x = &input[n * in_stride..(n + 1) * in_stride];
        let dout = &grad_out[n * out_stride..(n + 1) * out_stride];
        if let Some(db) = grads.bias.as_deref_mut() {
            for (o, chunk) in dout.chunks(cols).enumerate() {
                db[o] += chunk.iter().sum::<f64>();
            }
        }
        if let Some(dk) = grads.kernel.as_deref_mut() {
            let colm: &[f64] = if g.is_pointwise() {
                x
            } else {
                im2col(x, g, &mut col);
                &col
            };
            // dK (o x rows) += dOut (o x cols) * col^T (cols x rows)
            gemm(g.o, cols, rows, dout, (cols, 1), colm, (1, cols), 1.0, dk);
        }
        if let Some(dx) = grads.input.as_deref_mut() {
            let dx_n = &mut dx[n * in_stride..(n + 1) * in_stride];
            if g.is_pointwise() {
                // dx (rows x cols) += K^T (rows x o) * dOut (o x cols)
                gemm(rows, g.o, cols, kernel, (1, rows), dout, (cols, 1), 1.0, dx_n);
            } else {
                gemm(rows, g.o, cols, kernel, (1, rows), dout, (cols, 1), 0.0, &mut dcol);
                col2im(&dcol, g, dx_n);
            }
        }
    }
}
