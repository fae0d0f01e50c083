//! Dense row-major numeric kernels shared by the tape and the plain-value
//! decoders. Inner loops are written as contiguous `axpy`/`dot` sweeps so
//! they vectorize.

// Each public kernel has a portable body and, on x86-64, a copy compiled
// with AVX2 chosen at run time. Neither enables FMA and both perform the
// same operations in the same order, so results are bit-identical.
macro_rules! dispatch {
    ($(#[$meta:meta])* pub fn $name:ident($($arg:ident: $ty:ty),*) $(-> $ret:ty)? => $body:ident) => {
        $(#[$meta])*
        pub fn $name($($arg: $ty),*) $(-> $ret)? {
            #[cfg(target_arch = "x86_64")]
            {
                #[target_feature(enable = "avx2")]
                unsafe fn wide($($arg: $ty),*) $(-> $ret)? {
                    $body($($arg),*)
                }
                if std::arch::is_x86_feature_detected!("avx2") {
                    // SAFETY: the CPU supports AVX2.
                    return unsafe { wide($($arg),*) };
                }
            }
            $body($($arg),*)
        }
    };
}

#[inline(always)]
fn axpy_body(alpha: f64, x: &[f64], y: &mut [f64]) {
    let n = y.len().min(x.len());
    let (x, y) = (&x[..n], &mut y[..n]);
    for i in 0..n {
        y[i] += alpha * x[i];
    }
}

#[inline(always)]
fn dot_body(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let split = n / 4 * 4;
    let mut acc = [0.0f64; 4];
    for (x, y) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for (x, y) in a[split..].iter().zip(&b[split..]) {
        s += x * y;
    }
    s
}

#[inline(always)]
fn matmul_acc_body(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) {
    assert!(a.len() == m * k && b.len() == k * p && out.len() == m * p);
    for i in 0..m {
        let orow = &mut out[i * p..(i + 1) * p];
        for (kk, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            axpy_body(av, &b[kk * p..(kk + 1) * p], orow);
        }
    }
}

#[inline(always)]
fn matmul_bt_acc_body(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) {
    assert!(a.len() == m * k && b.len() == p * k && out.len() == m * p);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        for j in 0..p {
            out[i * p + j] += dot_body(arow, &b[j * k..(j + 1) * k]);
        }
    }
}

#[inline(always)]
fn matmul_tn_acc_body(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) {
    assert!(a.len() == m * k && b.len() == m * p && out.len() == k * p);
    for i in 0..m {
        let brow = &b[i * p..(i + 1) * p];
        for (kk, &av) in a[i * k..(i + 1) * k].iter().enumerate() {
            axpy_body(av, brow, &mut out[kk * p..(kk + 1) * p]);
        }
    }
}

dispatch! {
    /// `y += alpha · x`.
    pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) => axpy_body
}

dispatch! {
    /// Dot product with four independent accumulators (fixed summation order).
    pub fn dot(a: &[f64], b: &[f64]) -> f64 => dot_body
}

dispatch! {
    /// `out += a(m×k) · b(k×p)`.
    pub fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) => matmul_acc_body
}

dispatch! {
    /// `out += a(m×k) · b(p×k)ᵀ`.
    pub fn matmul_bt_acc(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) => matmul_bt_acc_body
}

dispatch! {
    /// `out += a(m×k)ᵀ · b(m×p)`, giving `k×p`.
    pub fn matmul_tn_acc(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) => matmul_tn_acc_body
}

/// `out = a(m×k) · b(k×p)`.
pub fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    matmul_acc(a, b, m, k, p, out);
}

/// `out = a(m×k) · b(p×k)ᵀ`.
pub fn matmul_bt(a: &[f64], b: &[f64], m: usize, k: usize, p: usize, out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    matmul_bt_acc(a, b, m, k, p, out);
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log Σ exp(x)`, shifted by the maximum. Empty input gives `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

/// Index of the first maximum (ties resolve to the lowest index).
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}
