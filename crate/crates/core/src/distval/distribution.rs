//! Categorical distributions over step-count bins.
//!
//! Bin `i < N` is the event "exactly `i` steps to the goal"; bin `N` catches
//! every distance of at least `N`. A distribution therefore has `N + 1` entries.

use crate::error::{Error, Result};
use crate::Scalar;

/// Lower clamp applied to predicted probabilities before taking logs.
pub const LOG_CLAMP: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct ValueDistribution<T> {
    probs: Vec<T>,
}

/// Sum-to-one tolerance: 1e-6, widened for `f32` rounding on long vectors.
fn simplex_tolerance<T: Scalar>(len: usize) -> T {
    T::of(1e-6).max(T::epsilon() * T::of_usize(8 * len))
}

impl<T: Scalar> ValueDistribution<T> {
    /// Validates that `probs` is a probability vector with at least two bins.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        check_simplex(&probs)?;
        Ok(Self { probs })
    }

    pub(crate) fn from_raw(probs: Vec<T>) -> Self {
        debug_assert!(check_simplex(&probs).is_ok());
        Self { probs }
    }

    pub fn uniform(num_bins: usize) -> Self {
        let p = T::one() / T::of_usize(num_bins + 1);
        Self { probs: vec![p; num_bins + 1] }
    }

    /// All mass on `bin`, which is clamped to the catch-all bin.
    pub fn point_mass(num_bins: usize, bin: usize) -> Self {
        let mut probs = vec![T::zero(); num_bins + 1];
        probs[bin.min(num_bins)] = T::one();
        Self { probs }
    }

    /// `N`, the index of the catch-all bin.
    pub fn num_bins(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<T> {
        self.probs
    }

    pub fn expected_distance(&self) -> T {
        expected_distance(&self.probs)
    }
}

pub fn check_simplex<T: Scalar>(probs: &[T]) -> Result<()> {
    if probs.len() < 2 {
        return Err(Error::InvalidDistribution(format!("{} bins; need at least 2", probs.len())));
    }
    if let Some(p) = probs.iter().find(|p| !(**p >= T::zero()) || !p.is_finite()) {
        return Err(Error::InvalidDistribution(format!("entry {p} is negative or not finite")));
    }
    let sum: T = probs.iter().copied().sum();
    if (sum - T::one()).abs() > simplex_tolerance::<T>(probs.len()) {
        return Err(Error::InvalidDistribution(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// `sum_i i * p_i`; the catch-all bin counts as `N`.
pub fn expected_distance<T: Scalar>(probs: &[T]) -> T {
    let mut acc = T::zero();
    let mut bin = T::zero();
    for &p in probs {
        acc = acc + bin * p;
        bin = bin + T::one();
    }
    acc
}

/// Writes the one-step backup of `src` into `dst`: bin 0 empties, every bin
/// moves up by one and the top two bins merge into the catch-all.
pub fn shift_into<T: Scalar>(src: &[T], dst: &mut [T]) {
    let n = src.len() - 1;
    debug_assert_eq!(src.len(), dst.len());
    dst[0] = T::zero();
    dst[1..n].copy_from_slice(&src[..n - 1]);
    dst[n] = src[n - 1] + src[n];
}

/// Backup target for one transition. When the current state already is the
/// goal the target is a point mass at bin 0; otherwise it is the right shift of
/// the best next-state prediction. Timeouts are not terminal and go through the
/// shift like any other step.
pub fn distributional_target<T: Scalar>(next_best: &ValueDistribution<T>, reached: bool) -> ValueDistribution<T> {
    let n = next_best.num_bins();
    if reached {
        return ValueDistribution::point_mass(n, 0);
    }
    let mut out = vec![T::zero(); n + 1];
    shift_into(&next_best.probs, &mut out);
    ValueDistribution { probs: out }
}

/// `KL(target || pred)`, with `pred` clamped below at [`LOG_CLAMP`] and `0 ln 0 = 0`.
pub fn kl_loss<T: Scalar>(pred: &[T], target: &[T]) -> T {
    let floor = T::of(LOG_CLAMP);
    pred.iter()
        .zip(target)
        .filter(|(_, &t)| t > T::zero())
        .map(|(&p, &t)| t * (t.ln() - p.max(floor).ln()))
        .sum()
}

/// Numerically stable in-place softmax.
pub fn softmax_in_place<T: Scalar>(xs: &mut [T]) {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in xs.iter_mut() {
        *x = *x / sum;
    }
}

/// Rescales nonnegative entries to sum to one.
pub fn renormalize<T: Scalar>(xs: &mut [T]) {
    let sum: T = xs.iter().copied().sum();
    if sum > T::zero() {
        for x in xs.iter_mut() {
            *x = *x / sum;
        }
    }
}

/// A two-bin distribution whose mean is `d` clamped to `[0, N]`. Used to
/// present scalar distance estimates through the distributional interface.
pub fn interpolated<T: Scalar>(num_bins: usize, d: T) -> ValueDistribution<T> {
    let d = d.max(T::zero()).min(T::of_usize(num_bins));
    let lo = d.floor();
    let frac = d - lo;
    let lo_bin = lo.to_usize().unwrap_or(0).min(num_bins);
    let mut probs = vec![T::zero(); num_bins + 1];
    probs[lo_bin] = T::one() - frac;
    if frac > T::zero() {
        probs[(lo_bin + 1).min(num_bins)] = probs[(lo_bin + 1).min(num_bins)] + frac;
    }
    ValueDistribution { probs }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn dist(p: &[f64]) -> ValueDistribution<f64> {
        ValueDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn reached_target_is_bin_zero() {
        let t = distributional_target(&dist(&[0.5, 0.3, 0.2]), true);
        assert_eq!(t.probs(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn shift_examples() {
        let t = distributional_target(&dist(&[0.5, 0.3, 0.2]), false);
        assert_eq!(t.probs(), &[0.0, 0.5, 0.5]);
        let third = 1.0 / 3.0;
        let t = distributional_target(&dist(&[third, third, third]), false);
        assert!((t.probs()[0]).abs() < 1e-15);
        assert!((t.probs()[1] - third).abs() < 1e-15);
        assert!((t.probs()[2] - 2.0 * third).abs() < 1e-15);
    }

    #[test]
    fn expected_distance_examples() {
        assert_eq!(dist(&[1.0, 0.0, 0.0]).expected_distance(), 0.0);
        assert_eq!(dist(&[0.0, 1.0, 0.0]).expected_distance(), 1.0);
        assert_eq!(dist(&[0.25, 0.25, 0.5]).expected_distance(), 1.25);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_loss(&[0.2, 0.8], &[0.2, 0.8]), 0.0);
        assert!((kl_loss(&[0.5, 0.5], &[1.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-12);
        // clamp: -ln(1e-8)
        let clamped: f64 = kl_loss(&[0.0, 1.0], &[1.0, 0.0]);
        assert!((clamped - 18.420680743952367).abs() < 1e-9, "{clamped}");
    }

    #[test]
    fn invalid_simplex_is_rejected() {
        assert!(ValueDistribution::new(vec![0.5, 0.6]).is_err());
        assert!(ValueDistribution::new(vec![-0.1, 1.1]).is_err());
        assert!(ValueDistribution::new(vec![1.0]).is_err());
        assert!(ValueDistribution::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn interpolated_keeps_the_mean() {
        let d = interpolated::<f64>(20, 3.25);
        assert!((d.expected_distance() - 3.25).abs() < 1e-12);
        assert!(check_simplex(d.probs()).is_ok());
        assert_eq!(interpolated::<f64>(20, 25.0).expected_distance(), 20.0);
        assert_eq!(interpolated::<f64>(20, -1.0).expected_distance(), 0.0);
    }

    fn simplex(len: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..1.0, len).prop_filter_map("nonzero mass", |mut v| {
            let s: f64 = v.iter().sum();
            if s <= 1e-9 {
                return None;
            }
            v.iter_mut().for_each(|x| *x /= s);
            Some(v)
        })
    }

    proptest! {
        #[test]
        fn shift_preserves_simplex(p in (2usize..30).prop_flat_map(simplex)) {
            let t = distributional_target(&dist(&p), false);
            let sum: f64 = t.probs().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(t.probs().iter().all(|x| *x >= 0.0));
        }

        #[test]
        fn kl_is_nonnegative_and_zero_on_identity(
            (p, q) in (2usize..20).prop_flat_map(|n| (simplex(n), simplex(n)))
        ) {
            prop_assert!(kl_loss(&p, &p).abs() < 1e-12);
            prop_assert!(kl_loss(&p, &q) >= -1e-12);
        }

        #[test]
        fn softmax_is_a_simplex(xs in prop::collection::vec(-50.0f64..50.0, 2..40)) {
            let mut v = xs.clone();
            softmax_in_place(&mut v);
            prop_assert!(check_simplex(&v).is_ok());
        }
    }
}
