//! Small numerical helpers shared by the solvers.

use crate::scalar::Real;

/// `log(sum(exp(x)))` over the finite entries, ignoring `-inf` terms.
///
/// Returns `-inf` when no term contributes.
pub fn logsumexp<T: Real>(terms: impl IntoIterator<Item = T> + Clone) -> T {
    let max = terms
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |m, t| if t > m { t } else { m });
    if max == T::neg_infinity() {
        return max;
    }
    if max == T::infinity() {
        return max;
    }
    let s: T = terms
        .into_iter()
        .filter(|t| *t > T::neg_infinity())
        .map(|t| (t - max).exp())
        .sum();
    max + s.ln()
}

/// `log` that maps zero to `-inf`.
#[inline]
pub fn ln0<T: Real>(x: T) -> T {
    if x > T::zero() {
        x.ln()
    } else {
        T::neg_infinity()
    }
}

/// Sum of absolute differences.
pub fn l1_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| (*x - *y).abs()).sum()
}

/// `x log(x / y)` with the conventions `0 log(0/y) = 0` and `x log(x/0) = +inf`.
#[inline]
pub fn xlogxy<T: Real>(x: T, y: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else if y <= T::zero() {
        T::infinity()
    } else {
        x * (x / y).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive() {
        let v = [0.1f64, -2.0, 3.5];
        let naive = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert!((logsumexp(v.iter().copied()) - naive).abs() < 1e-14);
    }

    #[test]
    fn lse_skips_neg_inf() {
        let v = [f64::NEG_INFINITY, 1.0];
        assert_eq!(logsumexp(v.iter().copied()), 1.0);
        assert_eq!(logsumexp([f64::NEG_INFINITY].iter().copied()), f64::NEG_INFINITY);
    }

    #[test]
    fn lse_large_values() {
        let v = [1000.0f64, 1000.0];
        assert!((logsumexp(v.iter().copied()) - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
