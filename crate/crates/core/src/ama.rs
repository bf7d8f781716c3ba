//! Affine maximizer auctions with unit buyer weights.
//!
//! The auctioneer selects the option with the largest boosted welfare
//! `sum_i v_i . x_i + beta` and charges each buyer the welfare externality it
//! imposes on the others (VCG prices). Among welfare-maximizing options the
//! one with the smallest boost is chosen, which is the choice that maximizes
//! the total payment; remaining ties go to the lowest index.

use crate::error::{Error, Result};
use crate::menu::{AmaMenu, Mechanism, Menu, Profile};
use crate::rochet::SoftmaxConfig;
use crate::scalar::{dot, Scalar};
use crate::softmax;

/// Result of running the auction on one profile.
#[derive(Clone, Debug, PartialEq)]
pub struct AmaOutcome<T> {
    /// `k(v)`.
    pub winner: usize,
    /// `k(v_{-i})` for every buyer `i`.
    pub winners_without: Vec<usize>,
    pub prices: Vec<T>,
    /// Total payment from the boosted-welfare identity; agrees with
    /// `prices.iter().sum()` up to [`Scalar::IDENTITY_TOL`].
    pub total_payment: T,
}

/// Gradient of the expected softmax payment with respect to the regular
/// options; entry `k - 1` belongs to option `k`, allocations are `m x n`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmaGradient<T> {
    pub allocation: Vec<Vec<Vec<T>>>,
    pub boost: Vec<T>,
}

impl<T: Scalar> AmaGradient<T> {
    pub fn zeros(k: usize, m: usize, n: usize) -> Self {
        AmaGradient {
            allocation: vec![vec![vec![T::zero(); n]; m]; k],
            boost: vec![T::zero(); k],
        }
    }

    pub fn add_scaled(&mut self, other: &Self, scale: T) {
        for (a, b) in self.allocation.iter_mut().zip(&other.allocation) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, &y) in ra.iter_mut().zip(rb) {
                    *x = *x + scale * y;
                }
            }
        }
        for (x, &y) in self.boost.iter_mut().zip(&other.boost) {
            *x = *x + scale * y;
        }
    }
}

/// `values[k][i] = v_i . x_i^{(k)}`.
fn buyer_values<T: Scalar>(menu: &AmaMenu<T>, profile: &Profile<T>) -> Vec<Vec<T>> {
    menu.options()
        .iter()
        .map(|o| {
            o.allocation
                .iter()
                .zip(profile.buyers())
                .map(|(row, v)| dot(v.values(), row))
                .collect()
        })
        .collect()
}

fn welfare_of<T: Scalar>(values: &[T], boost: T, exclude: Option<usize>) -> T {
    values
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .fold(T::zero(), |acc, (_, &x)| acc + x)
        + boost
}

fn argmax_welfare<T: Scalar>(
    menu: &AmaMenu<T>,
    values: &[Vec<T>],
    exclude: Option<usize>,
) -> usize {
    let mut best = 0;
    let mut best_w = T::neg_infinity();
    let mut best_b = T::infinity();
    for (k, (o, vals)) in menu.options().iter().zip(values).enumerate() {
        let w = welfare_of(vals, o.boost, exclude);
        if w > best_w || (w == best_w && o.boost < best_b) {
            best = k;
            best_w = w;
            best_b = o.boost;
        }
    }
    best
}

/// Boosted welfare `sum_{i != exclude} v_i . x_i^{(k)} + beta^{(k)}`.
pub fn boosted_welfare<T: Scalar>(
    menu: &AmaMenu<T>,
    profile: &Profile<T>,
    k: usize,
    exclude: Option<usize>,
) -> T {
    let o = menu.option(k);
    let vals: Vec<T> = o
        .allocation
        .iter()
        .zip(profile.buyers())
        .map(|(row, v)| dot(v.values(), row))
        .collect();
    welfare_of(&vals, o.boost, exclude)
}

/// Boosted-welfare maximizer, optionally with one buyer left out.
pub fn winner<T: Scalar>(menu: &AmaMenu<T>, profile: &Profile<T>, exclude: Option<usize>) -> usize {
    argmax_welfare(menu, &buyer_values(menu, profile), exclude)
}

/// Total payment written through boosted welfares:
/// `sum_i W_{-i}(k(v_{-i})) - (m - 1) W(k(v)) - beta^{(k(v))}`.
pub fn total_payment_from_welfare<T: Scalar>(
    menu: &AmaMenu<T>,
    profile: &Profile<T>,
    winner: usize,
    winners_without: &[usize],
) -> T {
    let values = buyer_values(menu, profile);
    let m = menu.num_buyers();
    let without = winners_without
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (i, &k)| {
            acc + welfare_of(&values[k], menu.option(k).boost, Some(i))
        });
    let full = welfare_of(&values[winner], menu.option(winner).boost, None);
    without - T::lit((m - 1) as f64) * full - menu.option(winner).boost
}

/// Winner, per-buyer VCG prices and the cross-checked total payment.
pub fn vcg_prices<T: Scalar>(menu: &AmaMenu<T>, profile: &Profile<T>) -> Result<AmaOutcome<T>> {
    let values = buyer_values(menu, profile);
    let m = menu.num_buyers();
    let k = argmax_welfare(menu, &values, None);
    let mut winners_without = Vec::with_capacity(m);
    let mut prices = Vec::with_capacity(m);
    for i in 0..m {
        let ki = argmax_welfare(menu, &values, Some(i));
        let p = welfare_of(&values[ki], menu.option(ki).boost, Some(i))
            - welfare_of(&values[k], menu.option(k).boost, Some(i));
        winners_without.push(ki);
        prices.push(p);
    }
    let total_payment = total_payment_from_welfare(menu, profile, k, &winners_without);
    let sum: T = prices.iter().copied().sum();
    if (sum - total_payment).abs() > T::identity_tol() {
        return Err(Error::InvariantViolation(format!(
            "sum of VCG prices {sum} disagrees with welfare identity {total_payment}"
        )));
    }
    Ok(AmaOutcome {
        winner: k,
        winners_without,
        prices,
        total_payment,
    })
}

/// Sum of prices, the realized revenue of one profile.
pub fn total_payment<T: Scalar>(menu: &AmaMenu<T>, profile: &Profile<T>) -> T {
    let values = buyer_values(menu, profile);
    let k = argmax_welfare(menu, &values, None);
    (0..menu.num_buyers()).fold(T::zero(), |acc, i| {
        let ki = argmax_welfare(menu, &values, Some(i));
        acc + (welfare_of(&values[ki], menu.option(ki).boost, Some(i))
            - welfare_of(&values[k], menu.option(k).boost, Some(i)))
    })
}

struct SoftmaxTerms<T> {
    /// Boosted welfares with buyer `i` omitted, indexed `[i][k]`.
    without: Vec<Vec<T>>,
    /// Softmax weights of `k(v_{-i})`, indexed `[i][k]`.
    w_without: Vec<Vec<T>>,
    /// Softmax weights of `k(v)`.
    w_full: Vec<T>,
}

fn softmax_terms<T: Scalar>(
    menu: &AmaMenu<T>,
    values: &[Vec<T>],
    cfg: &SoftmaxConfig<T>,
) -> SoftmaxTerms<T> {
    let m = menu.num_buyers();
    let full: Vec<T> = menu
        .options()
        .iter()
        .zip(values)
        .map(|(o, v)| welfare_of(v, o.boost, None))
        .collect();
    let without: Vec<Vec<T>> = (0..m)
        .map(|i| {
            menu.options()
                .iter()
                .zip(values)
                .map(|(o, v)| welfare_of(v, o.boost, Some(i)))
                .collect()
        })
        .collect();
    let w_without = without
        .iter()
        .map(|s| softmax::weights(s, cfg.temperature))
        .collect();
    let w_full = softmax::weights(&full, cfg.temperature);
    SoftmaxTerms {
        without,
        w_without,
        w_full,
    }
}

fn expectation<T: Scalar>(w: &[T], g: &[T]) -> T {
    w.iter().zip(g).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// `sum_i E[W_{-i}(k_soft(v_{-i}))] - E[W_{-i}(k_soft(v))]`, with both
/// expectations taken exactly over the softmax distributions.
pub fn softmax_expected_payment<T: Scalar>(
    menu: &AmaMenu<T>,
    profile: &Profile<T>,
    cfg: &SoftmaxConfig<T>,
) -> T {
    let values = buyer_values(menu, profile);
    let t = softmax_terms(menu, &values, cfg);
    t.without
        .iter()
        .zip(&t.w_without)
        .fold(T::zero(), |acc, (s, w)| {
            acc + expectation(w, s) - expectation(&t.w_full, s)
        })
}

/// Expected softmax payment with its gradient over all regular options.
pub fn softmax_payment_gradient<T: Scalar>(
    menu: &AmaMenu<T>,
    profile: &Profile<T>,
    cfg: &SoftmaxConfig<T>,
) -> (T, AmaGradient<T>) {
    let values = buyer_values(menu, profile);
    let t = softmax_terms(menu, &values, cfg);
    let (m, n) = (menu.num_buyers(), menu.num_items());
    let options = menu.num_options();
    let y = cfg.temperature;

    // Sensitivities of the payment to every welfare score:
    // coef_without[i][k] multiplies d W_{-i}(k), coef_full[k] multiplies d W(k).
    let mut coef_without = vec![vec![T::zero(); options]; m];
    let mut coef_full = vec![T::zero(); options];
    let mut value = T::zero();
    for i in 0..m {
        let s = &t.without[i];
        let w = &t.w_without[i];
        let e1 = expectation(w, s);
        let e2 = expectation(&t.w_full, s);
        value = value + e1 - e2;
        for k in 0..options {
            coef_without[i][k] = w[k] + y * w[k] * (s[k] - e1) - t.w_full[k];
            coef_full[k] = coef_full[k] - y * t.w_full[k] * (s[k] - e2);
        }
    }

    let mut grad = AmaGradient::zeros(options - 1, m, n);
    for k in 1..options {
        let mut boost = coef_full[k];
        for i in 0..m {
            boost = boost + coef_without[i][k];
        }
        grad.boost[k - 1] = boost;
        let total_without: T = (0..m).fold(T::zero(), |acc, i| acc + coef_without[i][k]);
        for l in 0..m {
            // W_{-i} depends on buyer l's allocation for every i != l.
            let coef = coef_full[k] + total_without - coef_without[l][k];
            for (j, &v) in profile.buyer(l).iter().enumerate() {
                grad.allocation[k - 1][l][j] = coef * v;
            }
        }
    }
    (value, grad)
}

impl<T: Scalar> Mechanism<T> for AmaMenu<T> {
    fn revenue(&self, profile: &Profile<T>) -> T {
        total_payment(self, profile)
    }

    fn softmax_revenue(&self, profile: &Profile<T>, cfg: &SoftmaxConfig<T>) -> T {
        softmax_expected_payment(self, profile, cfg)
    }

    fn selected_options(&self, profile: &Profile<T>, out: &mut Vec<usize>) {
        let values = buyer_values(self, profile);
        out.clear();
        out.push(argmax_welfare(self, &values, None));
        for i in 0..self.num_buyers() {
            out.push(argmax_welfare(self, &values, Some(i)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::menu::AmaOption;

    fn profile(rows: &[&[f64]]) -> Profile<f64> {
        Profile::from_rows(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn boosted_menu() -> AmaMenu<f64> {
        AmaMenu::new(
            2,
            1,
            vec![
                AmaOption::single_item(2, 1, 0, 0, 0.1),
                AmaOption::single_item(2, 1, 1, 0, 0.0),
            ],
        )
        .unwrap()
    }

    fn second_price_menu() -> AmaMenu<f64> {
        AmaMenu::new(
            2,
            1,
            vec![
                AmaOption::single_item(2, 1, 0, 0, 0.0),
                AmaOption::single_item(2, 1, 1, 0, 0.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn boosted_welfare_examples() {
        let menu = boosted_menu();
        let v = profile(&[&[0.3], &[0.35]]);
        assert_eq!(boosted_welfare(&menu, &v, 0, None), 0.0);
        assert!((boosted_welfare(&menu, &v, 1, None) - 0.4).abs() < 1e-15);
        assert!((boosted_welfare(&menu, &v, 1, Some(0)) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn winner_examples() {
        let menu = boosted_menu();
        let v = profile(&[&[0.3], &[0.35]]);
        assert_eq!(winner(&menu, &v, None), 1);
        assert_eq!(winner(&menu, &v, Some(0)), 2);
    }

    #[test]
    fn welfare_ties_prefer_smaller_boost() {
        let menu = AmaMenu::new(
            1,
            1,
            vec![
                AmaOption::new(vec![vec![0.5]], 0.2),
                AmaOption::new(vec![vec![1.0]], 0.1),
            ],
        )
        .unwrap();
        let v = profile(&[&[0.2]]);
        // both options have welfare 0.3
        assert_eq!(winner(&menu, &v, None), 2);
    }

    #[test]
    fn vcg_second_price_case() {
        let out = vcg_prices(&second_price_menu(), &profile(&[&[0.8], &[0.5]])).unwrap();
        assert_eq!(out.winner, 1);
        assert_eq!(out.prices, vec![0.5, 0.0]);
        assert!((out.total_payment - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vcg_boosted_case() {
        let out = vcg_prices(&boosted_menu(), &profile(&[&[0.3], &[0.35]])).unwrap();
        assert_eq!(out.winner, 1);
        assert_eq!(out.winners_without, vec![2, 1]);
        assert!((out.prices[0] - 0.25).abs() < 1e-12);
        assert!(out.prices[1].abs() < 1e-12);
        assert!((out.total_payment - 0.25).abs() < 1e-12);
        // 0.75 - 0.4 - 0.1
        let eq2 = total_payment_from_welfare(
            &boosted_menu(),
            &profile(&[&[0.3], &[0.35]]),
            out.winner,
            &out.winners_without,
        );
        assert!((eq2 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn single_buyer_reduces_to_rochet() {
        use crate::rochet::revenue_sample;
        let menu = AmaMenu::new(
            1,
            2,
            vec![
                AmaOption::new(vec![vec![0.5, 1.0]], -0.4),
                AmaOption::new(vec![vec![1.0, 0.2]], -0.3),
            ],
        )
        .unwrap();
        let rochet = menu.to_rochet().unwrap();
        for v in [[0.1, 0.2], [0.5, 0.5], [0.9, 0.05], [0.3, 0.6]] {
            let p = profile(&[&v]);
            let out = vcg_prices(&menu, &p).unwrap();
            assert_eq!(out.total_payment, revenue_sample(&rochet, &p.buyers()[0]));
        }
    }

    #[test]
    fn softmax_payment_limit_matches_second_price() {
        let cfg = SoftmaxConfig::new(1e4).unwrap();
        let p = profile(&[&[0.8], &[0.5]]);
        let s = softmax_expected_payment(&second_price_menu(), &p, &cfg);
        assert!((s - 0.5).abs() < 1e-3, "{s}");
    }

    #[test]
    fn softmax_payment_is_symmetric_under_relabeling() {
        let cfg = SoftmaxConfig::new(30.0).unwrap();
        let menu = second_price_menu();
        let swapped = menu.select(&[0, 2, 1]);
        let p = profile(&[&[0.6], &[0.6]]);
        let a = softmax_expected_payment(&menu, &p, &cfg);
        let b = softmax_expected_payment(&swapped, &p, &cfg);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn gradient_value_and_symmetry() {
        let cfg = SoftmaxConfig::new(15.0).unwrap();
        let menu = AmaMenu::new(
            2,
            1,
            vec![
                AmaOption::single_item(2, 1, 0, 0, -0.1),
                AmaOption::single_item(2, 1, 0, 0, -0.1),
            ],
        )
        .unwrap();
        let p = profile(&[&[0.7], &[0.4]]);
        let (value, g) = softmax_payment_gradient(&menu, &p, &cfg);
        assert_eq!(value, softmax_expected_payment(&menu, &p, &cfg));
        assert_eq!(g.boost[0], g.boost[1]);
        assert_eq!(g.allocation[0], g.allocation[1]);
    }

    #[test]
    fn gradient_vanishes_for_dominated_option() {
        let cfg = SoftmaxConfig::new(400.0).unwrap();
        let menu = AmaMenu::new(2, 1, vec![AmaOption::single_item(2, 1, 0, 0, -1.5)]).unwrap();
        let p = profile(&[&[0.7], &[0.4]]);
        let (_, g) = softmax_payment_gradient(&menu, &p, &cfg);
        assert!(g.boost[0].abs() < 1e-12);
        assert!(g.allocation[0].iter().flatten().all(|x| x.abs() < 1e-12));
    }
}
