//! Bessel functions of the first kind and their positive zeros.
//!
//! `J_n(x)` is evaluated with Miller's backward recurrence normalized by
//! `J_0 + 2 Σ J_2k = 1`. This is stable for every `x` and gives absolute
//! accuracy near machine epsilon; cost grows linearly with `x`.

use crate::error::{Error, Result};
use crate::scalar::{count, lit, to_f64, Real};

/// Highest Bessel order exposed by the public API.
pub const MAX_ORDER: u32 = 16;
/// Highest zero index served by [`bessel_zero`].
pub const MAX_ZERO_INDEX: u32 = 50;

/// `J_order(x)`.
pub fn bessel_j<T: Real>(order: u32, x: T) -> Result<T> {
    check_order(order)?;
    if !x.is_finite() {
        return Err(Error::NonFinite(to_f64(x)));
    }
    Ok(jn(order, x))
}

/// `J'_order(x)`.
pub fn bessel_j_prime<T: Real>(order: u32, x: T) -> Result<T> {
    check_order(order)?;
    if !x.is_finite() {
        return Err(Error::NonFinite(to_f64(x)));
    }
    Ok(jn_prime(order, x))
}

/// The `index`-th positive zero of `J_order`.
pub fn bessel_zero<T: Real>(order: u32, index: u32) -> Result<T> {
    check_order(order)?;
    if index == 0 || index > MAX_ZERO_INDEX {
        return Err(Error::UnsupportedZeroIndex {
            index,
            max: MAX_ZERO_INDEX,
        });
    }
    Ok(zero_by_scan(order, index))
}

fn check_order(order: u32) -> Result<()> {
    if order > MAX_ORDER {
        Err(Error::UnsupportedOrder { order, max: MAX_ORDER })
    } else {
        Ok(())
    }
}

/// `J_0(x) ..= J_nmax(x)` in one backward sweep.
pub(crate) fn jn_all<T: Real>(nmax: u32, x: T) -> Vec<T> {
    let nmax = nmax as usize;
    let mut out = vec![T::zero(); nmax + 1];
    if x == T::zero() {
        out[0] = T::one();
        return out;
    }
    let ax = x.abs();
    let top = ax.max(count(nmax)).ceil().to_usize().unwrap_or(usize::MAX / 4);
    let mut start = top + 30 + ((200.0 * top as f64).sqrt() as usize);
    start += start % 2;

    let big = lit::<T>(1e10);
    let two = lit::<T>(2.0);
    let mut j_next = T::zero(); // J_{k+1}
    let mut j_cur = lit::<T>(1e-30); // J_k
    let mut norm = T::zero();
    for k in (1..=start).rev() {
        let j_prev = count::<T>(2 * k) / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let idx = k - 1;
        if idx <= nmax {
            out[idx] = j_cur;
        }
        if idx % 2 == 0 && idx > 0 {
            norm = norm + two * j_cur;
        }
        if j_cur.abs() > big {
            let rescale = j_cur.abs().recip();
            j_cur = j_cur * rescale;
            j_next = j_next * rescale;
            norm = norm * rescale;
            for v in out.iter_mut() {
                *v = *v * rescale;
            }
        }
    }
    norm = norm + j_cur;
    for (n, v) in out.iter_mut().enumerate() {
        *v = *v / norm;
        if x < T::zero() && n % 2 == 1 {
            *v = -*v;
        }
    }
    out
}

pub(crate) fn jn<T: Real>(order: u32, x: T) -> T {
    jn_all(order, x)[order as usize]
}

pub(crate) fn jn_prime<T: Real>(order: u32, x: T) -> T {
    let all = jn_all(order + 1, x);
    let n = order as usize;
    if n == 0 {
        -all[1]
    } else {
        (all[n - 1] - all[n + 1]) / lit(2.0)
    }
}

/// Walks the axis in half-unit steps counting sign changes, then bisects the
/// bracket to full precision. Zeros of `J_n` are at least ~2.4 apart so no
/// pair can hide inside one step.
fn zero_by_scan<T: Real>(order: u32, index: u32) -> T {
    let step = lit::<T>(0.5);
    // J_n is positive on (0, j_{n,1}) and j_{n,1} > n.
    let mut lo = if order == 0 {
        lit(1e-3)
    } else {
        count::<T>(order as usize)
    };
    let mut f_lo = jn(order, lo);
    let mut found = 0;
    loop {
        let hi = lo + step;
        let f_hi = jn(order, hi);
        if f_hi == T::zero() {
            found += 1;
            if found == index {
                return hi;
            }
        } else if f_lo * f_hi < T::zero() {
            found += 1;
            if found == index {
                return bisect(|x| jn(order, x), lo, hi, f_lo);
            }
        }
        lo = hi;
        f_lo = f_hi;
    }
}

pub(crate) fn bisect<T: Real, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T, mut f_lo: T) -> T {
    let two = lit::<T>(2.0);
    for _ in 0..200 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid);
        if f_mid == T::zero() {
            return mid;
        }
        if (f_mid < T::zero()) == (f_lo < T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    (lo + hi) / two
}
