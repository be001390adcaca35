//! Unitary discrete Fourier transforms.
//!
//! Power-of-two lengths use an iterative radix-2 FFT; every other length falls
//! back to a direct O(n²) evaluation against a precomputed twiddle table. The
//! m-sequence natural lengths (7, 15, 63, 255) are small enough that the direct
//! path is not a bottleneck.
//!
//! Both directions are scaled by `1/sqrt(n)`, so a forward/inverse pair is the
//! identity and every transform preserves energy.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use crate::C64;

/// A reusable transform plan for one length.
#[derive(Debug, Clone)]
pub struct Dft {
    len: usize,
    /// `exp(-j 2 pi i / len)` for `i in 0..len`.
    twiddles: Vec<C64>,
    scale: f64,
}

impl Dft {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "DFT length must be positive");
        let twiddles = (0..len)
            .map(|i| C64::from_polar(1.0, -2.0 * PI * i as f64 / len as f64))
            .collect();
        Self {
            len,
            twiddles,
            scale: 1.0 / (len as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unitary forward transform, `X[f] = n^-1/2 sum x[t] e^{-j2pi ft/n}`.
    pub fn forward(&self, buf: &mut [C64]) {
        self.transform(buf, false);
    }

    /// In-place unitary inverse transform.
    pub fn inverse(&self, buf: &mut [C64]) {
        self.transform(buf, true);
    }

    fn transform(&self, buf: &mut [C64], inverse: bool) {
        assert_eq!(buf.len(), self.len, "buffer length does not match plan");
        if self.len == 1 {
            return;
        }
        if self.len.is_power_of_two() {
            self.radix2(buf, inverse);
        } else {
            self.direct(buf, inverse);
        }
        for x in buf.iter_mut() {
            *x *= self.scale;
        }
    }

    fn twiddle(&self, i: usize, inverse: bool) -> C64 {
        let w = self.twiddles[i];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    fn direct(&self, buf: &mut [C64], inverse: bool) {
        let n = self.len;
        let input = buf.to_vec();
        for (f, out) in buf.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            let mut idx = 0usize;
            for x in &input {
                acc += x * self.twiddle(idx, inverse);
                idx += f;
                if idx >= n {
                    idx -= n;
                }
            }
            *out = acc;
        }
    }

    fn radix2(&self, buf: &mut [C64], inverse: bool) {
        let n = self.len;
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for j in 0..half {
                    let w = self.twiddle(j * stride, inverse);
                    let a = buf[start + j];
                    let b = buf[start + j + half] * w;
                    buf[start + j] = a + b;
                    buf[start + j + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

/// Cyclic cross-correlation `c[d] = sum_t conj(a[t - d]) x[t]` for every lag `d`.
///
/// Computed in the frequency domain with the supplied plan; `a_spectrum` is
/// the forward transform of `a` and may be reused across calls.
pub fn cyclic_xcorr_with(plan: &Dft, a_spectrum: &[C64], x: &[C64]) -> Vec<C64> {
    let mut buf = x.to_vec();
    plan.forward(&mut buf);
    for (v, a) in buf.iter_mut().zip(a_spectrum) {
        *v *= a.conj();
    }
    plan.inverse(&mut buf);
    let gain = (plan.len() as f64).sqrt();
    for v in buf.iter_mut() {
        *v *= gain;
    }
    buf
}

/// Convenience wrapper around [`cyclic_xcorr_with`] for one-off use.
pub fn cyclic_xcorr(a: &[C64], x: &[C64]) -> Vec<C64> {
    assert_eq!(a.len(), x.len());
    let plan = Dft::new(a.len());
    let mut spec = a.to_vec();
    plan.forward(&mut spec);
    cyclic_xcorr_with(&plan, &spec, x)
}

/// Reference O(n²) DFT used by tests; not scaled.
#[doc(hidden)]
pub fn naive_dft(x: &[C64], inverse: bool) -> Vec<C64> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (f, o) in out.iter_mut().enumerate() {
        for (t, v) in x.iter().enumerate() {
            let ang = sign * 2.0 * PI * ((f * t) % n) as f64 / n as f64;
            *o += v * C64::from_polar(1.0, ang);
        }
    }
    out
}
