//! Budget factorization for a known horizon and doubling-trick epochs for an
//! unknown one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `k` with `k^d <= t`, found by integer search.
pub fn floor_root(t: u64, d: u32) -> u64 {
    assert!(d >= 1, "root degree must be positive");
    if d == 1 || t <= 1 {
        return t;
    }
    // Float guess, then fix up with exact integer comparisons.
    let mut k = (t as f64).powf(1.0 / d as f64).round() as u64;
    while k > 0 && !pow_le(k, d, t) {
        k -= 1;
    }
    while pow_le(k + 1, d, t) {
        k += 1;
    }
    k
}

fn pow_le(k: u64, d: u32, t: u64) -> bool {
    (k as u128).checked_pow(d).is_some_and(|p| p <= t as u128)
}

/// Smallest `k` with `k^d >= t`.
pub fn ceil_root(t: u64, d: u32) -> u64 {
    let k = floor_root(t, d);
    if pow_le(k, d, t) && (k as u128).pow(d) == t as u128 {
        k
    } else {
        k + 1
    }
}

/// Splits a total budget `t` over `d` dimensions. Every factor is
/// `floor(t^(1/d))` or `ceil(t^(1/d))`, the list is nondecreasing, and the
/// number of ceiling factors is the smallest one whose product reaches `t`.
pub fn split_budget(t: u64, d: usize) -> Result<Vec<usize>> {
    if t == 0 {
        return Err(Error::domain("total budget must be positive"));
    }
    if d == 0 {
        return Err(Error::domain("dimension must be positive"));
    }
    let deg = u32::try_from(d).map_err(|_| Error::domain("dimension too large"))?;
    let lo = floor_root(t, deg);
    let hi = lo + 1;
    let target = t as u128;

    let mut product = (lo as u128).pow(deg);
    let mut ceil_count = 0;
    while product < target {
        product = product / lo as u128 * hi as u128;
        ceil_count += 1;
    }
    debug_assert!(ceil_count <= d);

    let lo = usize::try_from(lo).map_err(|_| Error::domain("budget too large"))?;
    let mut budgets = vec![lo; d - ceil_count];
    budgets.extend(std::iter::repeat_n(lo + 1, ceil_count));
    Ok(budgets)
}

/// Epoch lengths `1, 2, ..., 2^(N-1), C` of the doubling trick.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochSchedule {
    pub epochs: Vec<u64>,
    pub n_doublings: u32,
    pub remainder: u64,
}

impl EpochSchedule {
    pub fn total(&self) -> u64 {
        self.epochs.iter().sum()
    }
}

/// Writes `t = (2^N - 1) + C` with `1 <= C <= 2^N`.
pub fn doubling_epochs(t: u64) -> Result<EpochSchedule> {
    if t == 0 {
        return Err(Error::domain("horizon must be positive"));
    }
    // Largest N with 2^N - 1 < t, i.e. 2^N <= t.
    let n = 63 - t.leading_zeros();
    let full = (1u64 << n) - 1;
    let remainder = t - full;
    let mut epochs: Vec<u64> = (0..n).map(|k| 1u64 << k).collect();
    epochs.push(remainder);
    Ok(EpochSchedule {
        epochs,
        n_doublings: n,
        remainder,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_examples() {
        assert_eq!(split_budget(8, 3).unwrap(), vec![2, 2, 2]);
        assert_eq!(split_budget(10, 2).unwrap(), vec![3, 4]);
        assert_eq!(split_budget(30, 2).unwrap(), vec![5, 6]);
        assert_eq!(split_budget(7, 1).unwrap(), vec![7]);
        assert_eq!(split_budget(3, 2).unwrap(), vec![2, 2]);
        assert_eq!(split_budget(1, 4).unwrap(), vec![1, 1, 1, 1]);
    }

    #[test]
    fn split_rejects_zero() {
        assert!(split_budget(0, 2).is_err());
        assert!(split_budget(5, 0).is_err());
    }

    /// Enumerates every count of ceiling factors and keeps the smallest
    /// product that reaches `t`.
    fn split_by_enumeration(t: u64, d: usize) -> Vec<usize> {
        let lo = (1..=t).take_while(|k| k.pow(d as u32) <= t).last().unwrap();
        let hi = lo + 1;
        let mut best: Option<(u128, usize)> = None;
        for m in 0..=d {
            let p = (lo as u128).pow((d - m) as u32) * (hi as u128).pow(m as u32);
            if p >= t as u128 && best.is_none_or(|(bp, _)| p < bp) {
                best = Some((p, m));
            }
        }
        let (_, m) = best.unwrap();
        let mut v = vec![lo as usize; d - m];
        v.extend(std::iter::repeat_n(hi as usize, m));
        v
    }

    #[test]
    fn split_matches_enumeration_oracle() {
        for t in 1..=2000u64 {
            for d in 1..=4 {
                assert_eq!(
                    split_budget(t, d).unwrap(),
                    split_by_enumeration(t, d),
                    "t={t} d={d}"
                );
            }
        }
    }

    #[test]
    fn roots_are_exact_near_perfect_powers() {
        assert_eq!(floor_root(1_000_000, 3), 100);
        assert_eq!(floor_root(999_999, 3), 99);
        assert_eq!(floor_root(1 << 60, 6), 1024);
        assert_eq!(floor_root((1 << 60) - 1, 6), 1023);
        assert_eq!(floor_root(u64::MAX, 2), 4_294_967_295);
        assert_eq!(ceil_root(10, 2), 4);
        assert_eq!(ceil_root(9, 2), 3);
    }

    #[test]
    fn epoch_examples() {
        let e = doubling_epochs(1).unwrap();
        assert_eq!((e.epochs, e.n_doublings, e.remainder), (vec![1], 0, 1));
        let e = doubling_epochs(10).unwrap();
        assert_eq!(
            (e.epochs, e.n_doublings, e.remainder),
            (vec![1, 2, 4, 3], 3, 3)
        );
        let e = doubling_epochs(7).unwrap();
        assert_eq!(
            (e.epochs, e.n_doublings, e.remainder),
            (vec![1, 2, 4], 2, 4)
        );
        assert!(doubling_epochs(0).is_err());
    }
}
