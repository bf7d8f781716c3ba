//! Numerically stable softmax helpers.

use crate::scalar::Scalar;

/// Softmax of `temperature * scores`, computed with max-subtraction.
pub fn weights<T: Scalar>(scores: &[T], temperature: T) -> Vec<T> {
    let mut out = Vec::with_capacity(scores.len());
    weights_into(scores, temperature, &mut out);
    out
}

pub(crate) fn weights_into<T: Scalar>(scores: &[T], temperature: T, out: &mut Vec<T>) {
    out.clear();
    if scores.is_empty() {
        return;
    }
    let max = scores
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut total = T::zero();
    for &s in scores {
        let e = (temperature * (s - max)).exp();
        total = total + e;
        out.push(e);
    }
    for w in out.iter_mut() {
        *w = *w / total;
    }
}

/// Softmax-weighted average of `values` at the given temperature.
///
/// Never exceeds `max(values)`, and falls short of it by at most
/// `values.len() / (e * temperature)`.
pub fn weighted_average<T: Scalar>(values: &[T], temperature: T) -> T {
    weights(values, temperature)
        .iter()
        .zip(values)
        .fold(T::zero(), |acc, (&w, &v)| acc + w * v)
}

/// Upper bound `L / (e * Y)` on `max - weighted_average` for `L` values.
pub fn average_gap_bound<T: Scalar>(len: usize, temperature: T) -> T {
    T::lit(len as f64) / (T::E() * temperature)
}
