//! Dense row-major helpers shared by the neural model.

/// Strided read-only matrix view.
#[derive(Debug, Clone, Copy)]
pub(crate) struct MatRef<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub rs: usize,
    pub cs: usize,
}

impl<'a> MatRef<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        debug_assert!(data.len() >= rows * cols);
        MatRef {
            data,
            rows,
            cols,
            rs: cols,
            cs: 1,
        }
    }

    /// `cols` columns starting at `col0` of a row-major matrix with row
    /// length `stride`.
    pub fn columns(data: &'a [f64], rows: usize, stride: usize, col0: usize, cols: usize) -> Self {
        debug_assert!(col0 + cols <= stride);
        MatRef {
            data: &data[col0..],
            rows,
            cols,
            rs: stride,
            cs: 1,
        }
    }

    pub fn t(self) -> Self {
        MatRef {
            data: self.data,
            rows: self.cols,
            cols: self.rows,
            rs: self.cs,
            cs: self.rs,
        }
    }
}

/// `C = A B + beta C` where `C` is row-major with row stride `rsc`.
pub(crate) fn gemm(a: MatRef<'_>, b: MatRef<'_>, beta: f64, c: &mut [f64], rsc: usize) {
    assert_eq!(a.cols, b.rows, "gemm inner dimension");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= (m - 1) * rsc + n, "gemm output too small");
    if k == 0 {
        for i in 0..m {
            c[i * rsc..i * rsc + n].iter_mut().for_each(|v| *v *= beta);
        }
        return;
    }
    let last = |r: MatRef<'_>| (r.rows - 1) * r.rs + (r.cols - 1) * r.cs;
    assert!(
        last(a) < a.data.len() && last(b) < b.data.len(),
        "gemm view out of range"
    );
    // SAFETY: bounds of every view and of `c` are checked above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            1,
        );
    }
}

const MAGIC: f64 = 6755399441055744.0; // 1.5 · 2^52
const LN2_HI: f64 = 6.931_471_803_691_238e-1;
const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;

/// Branch-free `exp` on `[-40, 40]` (inputs are clamped), written so the
/// compiler can vectorize loops over it. Relative error is a few ulp.
#[inline(always)]
fn exp_bounded(x: f64) -> f64 {
    let x = x.clamp(-40.0, 40.0);
    let t = x * std::f64::consts::LOG2_E + MAGIC;
    let kf = t - MAGIC;
    let k = t.to_bits().wrapping_sub(MAGIC.to_bits());
    let r = (x - kf * LN2_HI) - kf * LN2_LO;
    // Taylor series to degree 13 on |r| <= ln2 / 2
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    p * f64::from_bits(k.wrapping_add(1023) << 52)
}

#[inline(always)]
fn tanh_kernel(x: f64) -> f64 {
    let e = exp_bounded(2.0 * x.clamp(-20.0, 20.0));
    (e - 1.0) / (e + 1.0)
}

#[inline(always)]
fn sigmoid_kernel(x: f64) -> f64 {
    1.0 / (1.0 + exp_bounded(-x))
}

macro_rules! dispatch_in_place {
    ($name:ident, $avx:ident, $kernel:ident) => {
        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2")]
        unsafe fn $avx(xs: &mut [f64]) {
            xs.iter_mut().for_each(|v| *v = $kernel(*v));
        }

        pub(crate) fn $name(xs: &mut [f64]) {
            #[cfg(target_arch = "x86_64")]
            {
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: the feature was detected at runtime.
                    unsafe { $avx(xs) };
                    return;
                }
            }
            xs.iter_mut().for_each(|v| *v = $kernel(*v));
        }
    };
}

dispatch_in_place!(tanh_in_place, tanh_avx2, tanh_kernel);
dispatch_in_place!(sigmoid_in_place, sigmoid_avx2, sigmoid_kernel);

#[inline(always)]
fn dot_kernel(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline(always)]
fn matvec_kernel(w: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o += dot_kernel(&w[i * cols..(i + 1) * cols], x);
    }
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx")]
unsafe fn matvec_avx(w: &[f64], x: &[f64], out: &mut [f64]) {
    matvec_kernel(w, x, out)
}

/// Dot product with a fixed summation order, identical on every code path.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    dot_kernel(a, b)
}

/// `out += W x` for a row-major `W` of shape `out.len() × x.len()`.
///
/// Uses AVX when the CPU has it; the arithmetic order is the same either
/// way, so results are bit-identical.
pub(crate) fn matvec_acc(w: &[f64], x: &[f64], out: &mut [f64]) {
    assert!(w.len() >= out.len() * x.len(), "matvec shape");
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx") {
            // SAFETY: the feature was detected at runtime.
            unsafe { matvec_avx(w, x, out) };
            return;
        }
    }
    matvec_kernel(w, x, out)
}

/// `out += Wᵀ y` for a row-major `W` of shape `y.len() × out.len()`.
pub(crate) fn matvec_t_acc(w: &[f64], y: &[f64], out: &mut [f64]) {
    let cols = out.len();
    for (i, &yi) in y.iter().enumerate() {
        if yi == 0.0 {
            continue;
        }
        axpy(yi, &w[i * cols..(i + 1) * cols], out);
    }
}

/// `y += alpha x`.
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (a, &b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    #[test]
    fn gemm_matches_naive_with_views() {
        let a: Vec<f64> = (0..12).map(|v| v as f64 * 0.5 - 2.0).collect(); // 3x4
        let b: Vec<f64> = (0..8).map(|v| (v as f64).sin()).collect(); // 4x2
        let mut c = vec![0.0; 6];
        gemm(MatRef::new(&a, 3, 4), MatRef::new(&b, 4, 2), 0.0, &mut c, 2);
        let want = naive(&a, 3, 4, &b, 2);
        for (x, y) in c.iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
        // Aᵀ(4x3) times a 3x1 column view taken from a 3x4 matrix
        let mut d = vec![1.0; 4];
        gemm(
            MatRef::new(&a, 3, 4).t(),
            MatRef::columns(&a, 3, 4, 2, 1),
            1.0,
            &mut d,
            1,
        );
        for r in 0..4 {
            let want: f64 = (0..3).map(|i| a[i * 4 + r] * a[i * 4 + 2]).sum::<f64>() + 1.0;
            assert!((d[r] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn exp_kernel_tracks_std() {
        for i in -40_000..=40_000 {
            let x = i as f64 * 1e-3;
            let (got, want) = (exp_bounded(x), x.exp());
            assert!(((got - want) / want).abs() < 1e-15, "{x}: {got} vs {want}");
        }
    }

    #[test]
    fn fast_activations_track_std() {
        let xs: Vec<f64> = (-4000..=4000).map(|i| i as f64 * 0.01).collect();
        let mut t = xs.clone();
        tanh_in_place(&mut t);
        let mut s = xs.clone();
        sigmoid_in_place(&mut s);
        for (i, &x) in xs.iter().enumerate() {
            assert!((t[i] - x.tanh()).abs() < 1e-15, "{x}");
            assert_eq!(t[i].to_bits(), tanh_kernel(x).to_bits());
            let want = 1.0 / (1.0 + (-x).exp());
            assert!((s[i] - want).abs() < 1e-15, "{x}");
            assert_eq!(s[i].to_bits(), sigmoid_kernel(x).to_bits());
        }
        assert_eq!(tanh_kernel(1e300), 1.0);
        assert_eq!(tanh_kernel(-1e300), -1.0);
        assert_eq!(tanh_kernel(0.0), 0.0);
        assert_eq!(sigmoid_kernel(0.0), 0.5);
    }

    #[test]
    fn matvec_pair() {
        let w = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let mut out = [1.0, 0.0];
        matvec_acc(&w, &[1.0, 0.0, -1.0], &mut out);
        assert_eq!(out, [-1.0, -2.0]);
        let mut back = [0.0; 3];
        matvec_t_acc(&w, &[1.0, 1.0], &mut back);
        assert_eq!(back, [5.0, 7.0, 9.0]);
        assert_eq!(dot(&[1.0; 7], &[2.0; 7]), 14.0);
        assert_eq!(dot(&[1.0; 19], &[2.0; 19]), 38.0);
        let w: Vec<f64> = (0..300).map(|v| (v as f64).sin()).collect();
        let x: Vec<f64> = (0..100).map(|v| (v as f64).cos()).collect();
        let mut fast = vec![0.0; 3];
        matvec_acc(&w, &x, &mut fast);
        let mut plain = vec![0.0; 3];
        matvec_kernel(&w, &x, &mut plain);
        assert_eq!(fast, plain);
    }
}
