//! Forward and backward kernels for every layer kind.

use super::{Real, Tensor4};

/// Lays out the 3×3 zero-padded neighbourhoods of one `(c, h, w)` item as a
/// `(c·9) × (h·w)` matrix.
fn im2col3<T: Real>(x: &[T], c: usize, h: usize, w: usize, cols: &mut [T]) {
    let hw = h * w;
    debug_assert_eq!(cols.len(), c * 9 * hw);
    for ch in 0..c {
        let plane = &x[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ch * 9) + ky * 3 + kx) * hw..((ch * 9) + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    let dst = &mut row[y * w..(y + 1) * w];
                    if sy < 0 || sy >= h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            dst[0] = T::zero();
                            dst[1..].copy_from_slice(&src[..w - 1]);
                        }
                        1 => dst.copy_from_slice(src),
                        _ => {
                            dst[..w - 1].copy_from_slice(&src[1..]);
                            dst[w - 1] = T::zero();
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col3`]: scatters-adds columns back onto the image.
fn col2im3<T: Real>(cols: &[T], c: usize, h: usize, w: usize, dx: &mut [T]) {
    let hw = h * w;
    for ch in 0..c {
        let plane = &mut dx[ch * hw..(ch + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ch * 9) + ky * 3 + kx) * hw..((ch * 9) + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    let src = &row[y * w..(y + 1) * w];
                    let dst = &mut plane[sy as usize * w..(sy as usize + 1) * w];
                    match kx {
                        0 => {
                            for (d, s) in dst[..w - 1].iter_mut().zip(&src[1..]) {
                                *d += *s;
                            }
                        }
                        1 => {
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += *s;
                            }
                        }
                        _ => {
                            for (d, s) in dst[1..].iter_mut().zip(&src[..w - 1]) {
                                *d += *s;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Same-padded convolution with a square `kernel` of 1 or 3.
pub fn conv_forward<T: Real>(x: &Tensor4<T>, weight: &[T], bias: &[T], c_out: usize, kernel: usize) -> Tensor4<T> {
    let [batch, c_in, h, w] = x.dims;
    let hw = h * w;
    let k = c_in * kernel * kernel;
    debug_assert_eq!(weight.len(), c_out * k);
    debug_assert_eq!(bias.len(), c_out);
    let mut out = Tensor4::zeros([batch, c_out, h, w]);
    let mut cols = if kernel == 3 { vec![T::zero(); k * hw] } else { Vec::new() };
    for b in 0..batch {
        let src: &[T] = if kernel == 3 {
            im2col3(x.item(b), c_in, h, w, &mut cols);
            &cols
        } else {
            x.item(b)
        };
        let y = out.item_mut(b);
        for (co, plane) in y.chunks_mut(hw).enumerate() {
            plane.fill(bias[co]);
        }
        T::gemm(c_out, k, hw, weight, k as isize, 1, src, hw as isize, 1, T::one(), y, hw as isize, 1);
    }
    out
}

/// Accumulates weight and bias gradients; returns the input gradient when asked.
#[allow(clippy::too_many_arguments)]
pub fn conv_backward<T: Real>(
    x: &Tensor4<T>,
    weight: &[T],
    kernel: usize,
    c_out: usize,
    dy: &Tensor4<T>,
    dweight: &mut [T],
    dbias: &mut [T],
    need_dx: bool,
) -> Option<Tensor4<T>> {
    let [batch, c_in, h, w] = x.dims;
    let hw = h * w;
    let k = c_in * kernel * kernel;
    let mut cols = if kernel == 3 { vec![T::zero(); k * hw] } else { Vec::new() };
    let mut dcols = vec![T::zero(); k * hw];
    let mut dx = if need_dx { Some(Tensor4::zeros(x.dims)) } else { None };
    for b in 0..batch {
        let g = dy.item(b);
        for (co, plane) in g.chunks(hw).enumerate() {
            let mut s = T::zero();
            for &v in plane {
                s += v;
            }
            dbias[co] += s;
        }
        let src: &[T] = if kernel == 3 {
            im2col3(x.item(b), c_in, h, w, &mut cols);
            &cols
        } else {
            x.item(b)
        };
        // dW[c_out, k] += dY[c_out, hw] · colsᵀ[hw, k]
        T::gemm(c_out, hw, k, g, hw as isize, 1, src, 1, hw as isize, T::one(), dweight, k as isize, 1);
        if let Some(dx) = dx.as_mut() {
            // dcols[k, hw] = Wᵀ[k, c_out] · dY[c_out, hw]
            T::gemm(k, c_out, hw, weight, 1, k as isize, g, hw as isize, 1, T::zero(), &mut dcols, hw as isize, 1);
            let dst = dx.item_mut(b);
            if kernel == 3 {
                col2im3(&dcols, c_in, h, w, dst);
            } else {
                for (d, s) in dst.iter_mut().zip(&dcols) {
                    *d += *s;
                }
            }
        }
    }
    dx
}

pub fn relu_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        data: x.data.iter().map(|&v| if v > T::zero() { v } else { T::zero() }).collect(),
        dims: x.dims,
    }
}

/// Gradient passes where the forward output was positive.
pub fn relu_backward<T: Real>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        data: y
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
            .collect(),
        dims: y.dims,
    }
}

/// 2×2 max-pool with stride 2. Returns the output and, for every output
/// element, the flat input index it was taken from (first maximum in scan order).
pub fn maxpool2_forward<T: Real>(x: &Tensor4<T>) -> (Tensor4<T>, Vec<u32>) {
    let [batch, c, h, w] = x.dims;
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor4::zeros([batch, c, oh, ow]);
    let mut arg = vec![0u32; out.data.len()];
    let mut o = 0;
    for plane in 0..batch * c {
        let base = plane * h * w;
        for y in 0..oh {
            for xx in 0..ow {
                let mut best = base + 2 * y * w + 2 * xx;
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = base + (2 * y + dy) * w + 2 * xx + dx;
                    if x.data[idx] > x.data[best] {
                        best = idx;
                    }
                }
                out.data[o] = x.data[best];
                arg[o] = best as u32;
                o += 1;
            }
        }
    }
    (out, arg)
}

/// Max over the full height axis: `(b, c, h, w) -> (b, c, 1, w)`.
pub fn rowmax_forward<T: Real>(x: &Tensor4<T>) -> (Tensor4<T>, Vec<u32>) {
    let [batch, c, h, w] = x.dims;
    let mut out = Tensor4::zeros([batch, c, 1, w]);
    let mut arg = vec![0u32; out.data.len()];
    for plane in 0..batch * c {
        let base = plane * h * w;
        for col in 0..w {
            let mut best = base + col;
            for row in 1..h {
                let idx = base + row * w + col;
                if x.data[idx] > x.data[best] {
                    best = idx;
                }
            }
            out.data[plane * w + col] = x.data[best];
            arg[plane * w + col] = best as u32;
        }
    }
    (out, arg)
}

/// Smallest gap between the winner and the runner-up over all 2×2 windows
/// whose maximum is positive (all-zero windows cannot change winner while
/// the ReLUs feeding them stay inactive).
pub fn maxpool2_margin<T: Real>(x: &Tensor4<T>) -> T {
    let [batch, c, h, w] = x.dims;
    let mut margin = T::infinity();
    for plane in 0..batch * c {
        let base = plane * h * w;
        for y in 0..h / 2 {
            for xx in 0..w / 2 {
                let v = [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(dy, dx)| x.data[base + (2 * y + dy) * w + 2 * xx + dx]);
                margin = margin.min(top_two_gap(&v));
            }
        }
    }
    margin
}

/// As [`maxpool2_margin`] for the full-height row max.
pub fn rowmax_margin<T: Real>(x: &Tensor4<T>) -> T {
    let [batch, c, h, w] = x.dims;
    let mut margin = T::infinity();
    let mut column = vec![T::zero(); h];
    for plane in 0..batch * c {
        let base = plane * h * w;
        for col in 0..w {
            for (row, v) in column.iter_mut().enumerate() {
                *v = x.data[base + row * w + col];
            }
            margin = margin.min(top_two_gap(&column));
        }
    }
    margin
}

fn top_two_gap<T: Real>(v: &[T]) -> T {
    let mut first = T::neg_infinity();
    let mut second = T::neg_infinity();
    for &x in v {
        if x > first {
            second = first;
            first = x;
        } else if x > second {
            second = x;
        }
    }
    if first > T::zero() {
        first - second
    } else {
        T::infinity()
    }
}

/// Routes each output gradient to its recorded argmax input.
pub fn pool_backward<T: Real>(input_dims: [usize; 4], arg: &[u32], dy: &Tensor4<T>) -> Tensor4<T> {
    let mut dx = Tensor4::zeros(input_dims);
    for (&idx, &g) in arg.iter().zip(&dy.data) {
        dx.data[idx as usize] += g;
    }
    dx
}

/// Nearest-neighbour ×2 upsampling along height and width.
pub fn upsample2_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    let [batch, c, h, w] = x.dims;
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Tensor4::zeros([batch, c, oh, ow]);
    for plane in 0..batch * c {
        let src = &x.data[plane * h * w..(plane + 1) * h * w];
        let dst = &mut out.data[plane * oh * ow..(plane + 1) * oh * ow];
        for y in 0..oh {
            let srow = &src[(y / 2) * w..(y / 2 + 1) * w];
            for (xx, d) in dst[y * ow..(y + 1) * ow].iter_mut().enumerate() {
                *d = srow[xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Real>(input_dims: [usize; 4], dy: &Tensor4<T>) -> Tensor4<T> {
    let [batch, c, h, w] = input_dims;
    let (oh, ow) = (2 * h, 2 * w);
    let mut dx = Tensor4::zeros(input_dims);
    for plane in 0..batch * c {
        let src = &dy.data[plane * oh * ow..(plane + 1) * oh * ow];
        let dst = &mut dx.data[plane * h * w..(plane + 1) * h * w];
        for y in 0..oh {
            for xx in 0..ow {
                dst[(y / 2) * w + xx / 2] += src[y * ow + xx];
            }
        }
    }
    dx
}

/// Channel concatenation `[a, b]`.
pub fn concat_forward<T: Real>(a: &Tensor4<T>, b: &Tensor4<T>) -> Tensor4<T> {
    let [batch, ca, h, w] = a.dims;
    let cb = b.dims[1];
    debug_assert_eq!([b.dims[0], b.dims[2], b.dims[3]], [batch, h, w]);
    let mut out = Vec::with_capacity(batch * (ca + cb) * h * w);
    for i in 0..batch {
        out.extend_from_slice(a.item(i));
        out.extend_from_slice(b.item(i));
    }
    Tensor4 {
        data: out,
        dims: [batch, ca + cb, h, w],
    }
}

pub fn concat_backward<T: Real>(a_dims: [usize; 4], b_dims: [usize; 4], dy: &Tensor4<T>) -> (Tensor4<T>, Tensor4<T>) {
    let mut da = Tensor4::zeros(a_dims);
    let mut db = Tensor4::zeros(b_dims);
    let (la, lb) = (da.item_len(), db.item_len());
    for i in 0..a_dims[0] {
        let g = dy.item(i);
        da.item_mut(i).copy_from_slice(&g[..la]);
        db.item_mut(i).copy_from_slice(&g[la..la + lb]);
    }
    (da, db)
}

pub fn sigmoid_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        data: x.data.iter().map(|&v| T::one() / (T::one() + (-v).exp())).collect(),
        dims: x.dims,
    }
}

pub fn sigmoid_backward<T: Real>(y: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        data: y.data.iter().zip(&dy.data).map(|(&s, &g)| g * s * (T::one() - s)).collect(),
        dims: y.dims,
    }
}

pub fn clamp_forward<T: Real>(x: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        data: x.data.iter().map(|&v| v.max(T::zero()).min(T::one())).collect(),
        dims: x.dims,
    }
}

/// Gradient passes strictly inside `(0, 1)`.
pub fn clamp_backward<T: Real>(x: &Tensor4<T>, dy: &Tensor4<T>) -> Tensor4<T> {
    Tensor4 {
        data: x
            .data
            .iter()
            .zip(&dy.data)
            .map(|(&v, &g)| if v > T::zero() && v < T::one() { g } else { T::zero() })
            .collect(),
        dims: x.dims,
    }
}
