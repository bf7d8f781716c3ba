//! RochetNet semantics: option selection, realized price, and the
//! softmax-smoothed revenue used as a training objective.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::menu::{Mechanism, Profile, RochetMenu, Valuation};
use crate::scalar::{dot, Scalar};
use crate::softmax;

/// Softmax temperature `Y`. The default option always takes part in the
/// softmax with utility 0 and contributes price 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SoftmaxConfig<T> {
    pub temperature: T,
}

impl<T: Scalar> SoftmaxConfig<T> {
    pub fn new(temperature: T) -> Result<Self> {
        if !(temperature >= T::one()) || !temperature.is_finite() {
            return Err(Error::param(
                "temperature",
                format!("must be a finite value >= 1, got {temperature}"),
            ));
        }
        Ok(SoftmaxConfig { temperature })
    }
}

/// Gradient of the softmax revenue with respect to the regular options
/// `1..=K`; entry `k - 1` belongs to option `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RochetGradient<T> {
    pub allocation: Vec<Vec<T>>,
    pub price: Vec<T>,
}

impl<T: Scalar> RochetGradient<T> {
    pub fn zeros(k: usize, n: usize) -> Self {
        RochetGradient {
            allocation: vec![vec![T::zero(); n]; k],
            price: vec![T::zero(); k],
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.allocation.iter_mut().zip(&other.allocation) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x = *x + scale * y;
            }
        }
        for (x, &y) in self.price.iter_mut().zip(&other.price) {
            *x = *x + scale * y;
        }
    }
}

/// Buyer utility `v . x - p` of every option.
pub fn utilities<T: Scalar>(menu: &RochetMenu<T>, v: &[T]) -> Vec<T> {
    menu.options()
        .iter()
        .map(|o| dot(v, &o.allocation) - o.price)
        .collect()
}

/// Utility-maximizing option; ties go to the higher price, then the lower
/// index.
pub fn active_option<T: Scalar>(menu: &RochetMenu<T>, v: &Valuation<T>) -> usize {
    active_option_raw(menu, v.values())
}

pub(crate) fn active_option_raw<T: Scalar>(menu: &RochetMenu<T>, v: &[T]) -> usize {
    let mut best = 0;
    let mut best_u = T::neg_infinity();
    let mut best_p = T::neg_infinity();
    for (k, o) in menu.options().iter().enumerate() {
        let u = dot(v, &o.allocation) - o.price;
        if u > best_u || (u == best_u && o.price > best_p) {
            best = k;
            best_u = u;
            best_p = o.price;
        }
    }
    best
}

/// Price paid by a buyer with valuation `v`.
pub fn revenue_sample<T: Scalar>(menu: &RochetMenu<T>, v: &Valuation<T>) -> T {
    menu.option(active_option(menu, v)).price
}

/// Softmax distribution over all options, default included.
pub fn softmax_weights<T: Scalar>(
    menu: &RochetMenu<T>,
    v: &Valuation<T>,
    cfg: &SoftmaxConfig<T>,
) -> Vec<T> {
    softmax::weights(&utilities(menu, v.values()), cfg.temperature)
}

/// Expected price under [`softmax_weights`].
pub fn softmax_revenue_sample<T: Scalar>(
    menu: &RochetMenu<T>,
    v: &Valuation<T>,
    cfg: &SoftmaxConfig<T>,
) -> T {
    softmax_weights(menu, v, cfg)
        .iter()
        .zip(menu.options())
        .fold(T::zero(), |acc, (&w, o)| acc + w * o.price)
}

/// Softmax revenue on one valuation together with its analytic gradient.
///
/// With weights `w_k` and expected price `R`, the utility sensitivity is
/// `dR/du_k = Y w_k (p_k - R)`; prices also enter `R` directly with
/// coefficient `w_k`.
pub fn softmax_revenue_gradient<T: Scalar>(
    menu: &RochetMenu<T>,
    v: &Valuation<T>,
    cfg: &SoftmaxConfig<T>,
) -> (T, RochetGradient<T>) {
    let values = v.values();
    let w = softmax::weights(&utilities(menu, values), cfg.temperature);
    let value = w
        .iter()
        .zip(menu.options())
        .fold(T::zero(), |acc, (&wk, o)| acc + wk * o.price);
    let k = menu.num_regular();
    let mut grad = RochetGradient {
        allocation: Vec::with_capacity(k),
        price: Vec::with_capacity(k),
    };
    for (wk, o) in w.iter().zip(menu.options()).skip(1) {
        let du = cfg.temperature * *wk * (o.price - value);
        grad.allocation
            .push(values.iter().map(|&vj| du * vj).collect());
        grad.price.push(*wk - du);
    }
    (value, grad)
}

impl<T: Scalar> Mechanism<T> for RochetMenu<T> {
    fn revenue(&self, profile: &Profile<T>) -> T {
        self.option(active_option_raw(self, profile.buyer(0))).price
    }

    fn softmax_revenue(&self, profile: &Profile<T>, cfg: &SoftmaxConfig<T>) -> T {
        softmax_revenue_sample(self, &profile.buyers()[0], cfg)
    }

    fn selected_options(&self, profile: &Profile<T>, out: &mut Vec<usize>) {
        out.clear();
        out.push(active_option_raw(self, profile.buyer(0)));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::menu::Menu;

    fn val(x: &[f64]) -> Valuation<f64> {
        Valuation::new(x.to_vec()).unwrap()
    }

    fn cfg(y: f64) -> SoftmaxConfig<f64> {
        SoftmaxConfig::new(y).unwrap()
    }

    #[test]
    fn active_option_examples() {
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.36)]).unwrap();
        assert_eq!(active_option(&m, &val(&[0.5])), 1);
        assert_eq!(active_option(&m, &val(&[0.2])), 0);
        let tie = RochetMenu::from_pairs(1, &[(&[0.5], 0.1), (&[1.0], 0.2)]).unwrap();
        assert_eq!(active_option(&tie, &val(&[0.2])), 2);
    }

    #[test]
    fn equal_price_ties_take_lowest_index() {
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.3), (&[1.0], 0.3)]).unwrap();
        assert_eq!(active_option(&m, &val(&[0.9])), 1);
        let zero = RochetMenu::from_pairs(1, &[(&[0.0], 0.0)]).unwrap();
        assert_eq!(active_option(&zero, &val(&[0.9])), 0);
    }

    #[test]
    fn revenue_examples() {
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.36)]).unwrap();
        assert_eq!(revenue_sample(&m, &val(&[0.5])), 0.36);
        assert_eq!(revenue_sample(&m, &val(&[0.2])), 0.0);
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.6)]).unwrap();
        assert_eq!(revenue_sample(&m, &val(&[0.84])), 0.6);
    }

    #[test]
    fn softmax_weight_examples() {
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.5)]).unwrap();
        for y in [1.0, 7.0, 300.0] {
            let w = softmax_weights(&m, &val(&[0.5]), &cfg(y));
            assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
            assert!((softmax_revenue_sample(&m, &val(&[0.5]), &cfg(y)) - 0.25).abs() < 1e-15);
        }
        let e = std::f64::consts::E;
        let w = softmax_weights(&m, &val(&[1.0]), &cfg(2.0));
        assert!((w[0] - 1.0 / (1.0 + e)).abs() < 1e-12);
        assert!((w[1] - e / (1.0 + e)).abs() < 1e-12);
        assert!((w[0] - 0.26894).abs() < 1e-5);
        let r = softmax_revenue_sample(&m, &val(&[1.0]), &cfg(2.0));
        assert!((r - 0.36553).abs() < 1e-5);
    }

    #[test]
    fn large_temperature_concentrates_on_argmax() {
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.5)]).unwrap();
        let w = softmax_weights(&m, &val(&[1.0]), &cfg(1e4));
        assert!((w[1] - 1.0).abs() < 1e-3);
        let r = softmax_revenue_sample(&m, &val(&[1.0]), &cfg(1e4));
        assert!((r - revenue_sample(&m, &val(&[1.0]))).abs() < 1e-3);
    }

    #[test]
    fn temperature_below_one_is_rejected() {
        assert!(SoftmaxConfig::new(0.5_f64).is_err());
        assert!(SoftmaxConfig::new(f64::INFINITY).is_err());
    }

    #[test]
    fn gradient_vanishes_for_unreachable_option() {
        let m = RochetMenu::from_pairs(1, &[(&[0.1], 0.9)]).unwrap();
        let (_, g) = softmax_revenue_gradient(&m, &val(&[0.3]), &cfg(500.0));
        assert!(g.price[0].abs() < 1e-12);
        assert!(g.allocation[0][0].abs() < 1e-12);
    }

    #[test]
    fn duplicate_options_get_equal_gradients() {
        let m = RochetMenu::from_pairs(2, &[(&[0.4, 0.6], 0.3), (&[0.4, 0.6], 0.3)]).unwrap();
        let (_, g) = softmax_revenue_gradient(&m, &val(&[0.5, 0.4]), &cfg(20.0));
        assert_eq!(g.price[0], g.price[1]);
        assert_eq!(g.allocation[0], g.allocation[1]);
    }

    #[test]
    fn gradient_value_matches_softmax_revenue() {
        let m = RochetMenu::from_pairs(2, &[(&[0.4, 0.6], 0.3), (&[0.9, 0.1], 0.45)]).unwrap();
        let v = val(&[0.5, 0.4]);
        let (value, g) = softmax_revenue_gradient(&m, &v, &cfg(20.0));
        assert_eq!(value, softmax_revenue_sample(&m, &v, &cfg(20.0)));
        assert_eq!(g.price.len(), m.num_options() - 1);
    }

    #[test]
    fn mechanism_trait_matches_free_functions() {
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.36)]).unwrap();
        let p = Profile::single(val(&[0.5]));
        assert_eq!(m.revenue(&p), 0.36);
        let mut sel = Vec::new();
        m.selected_options(&p, &mut sel);
        assert_eq!(sel, vec![1]);
    }
}
