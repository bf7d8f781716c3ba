//! Oracles and random instances shared by the integration tests. The
//! oracles recompute quantities from their definitions with plain loops and
//! never call the library routine they check.

#![allow(dead_code)]

use menuconnect_core::{AmaMenu, AmaOption, Profile, ReductionSet, RochetMenu, RochetOption};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        if v.iter().sum::<f64>() <= 1.0 {
            return v;
        }
    }
}

pub fn random_profile(rng: &mut impl Rng, m: usize, n: usize) -> Profile<f64> {
    Profile::from_rows((0..m).map(|_| uniform_simplex(rng, n)).collect()).unwrap()
}

pub fn random_rochet_option(rng: &mut impl Rng, n: usize, max_price: f64) -> RochetOption<f64> {
    RochetOption::new(
        (0..n).map(|_| rng.random::<f64>()).collect(),
        max_price * rng.random::<f64>(),
    )
}

pub fn random_rochet(
    rng: &mut impl Rng,
    n: usize,
    regular: usize,
    max_price: f64,
) -> RochetMenu<f64> {
    RochetMenu::new(
        n,
        (0..regular)
            .map(|_| random_rochet_option(rng, n, max_price))
            .collect(),
    )
    .unwrap()
}

/// Random allocation matrix with every item column summing to at most one.
pub fn random_ama_allocation(rng: &mut impl Rng, m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut x: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
        .collect();
    for j in 0..n {
        let total: f64 = x.iter().map(|r| r[j]).sum();
        let cap = rng.random::<f64>();
        if total > cap {
            for r in x.iter_mut() {
                r[j] *= cap / total;
            }
        }
    }
    x
}

pub fn random_ama(
    rng: &mut impl Rng,
    m: usize,
    n: usize,
    regular: usize,
    boost: (f64, f64),
) -> AmaMenu<f64> {
    let options = (0..regular)
        .map(|_| {
            let b = boost.0 + (boost.1 - boost.0) * rng.random::<f64>();
            AmaOption::new(random_ama_allocation(rng, m, n), b)
        })
        .collect();
    AmaMenu::new(m, n, options).unwrap()
}

/// Expected price with weights proportional to `exp(Y u_k)`, no shifting.
pub fn oracle_softmax_rochet(options: &[(Vec<f64>, f64)], v: &[f64], y: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, p) in options {
        let u: f64 = x.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - p;
        let w = (y * u).exp();
        num += w * p;
        den += w;
    }
    num / den
}

/// `(allocation[k][i][j], boost[k])` for every option including the default.
pub type AmaParams = Vec<(Vec<Vec<f64>>, f64)>;

fn welfare(option: &(Vec<Vec<f64>>, f64), v: &[Vec<f64>], skip: Option<usize>) -> f64 {
    let mut w = option.1;
    for (i, (row, vi)) in option.0.iter().zip(v).enumerate() {
        if Some(i) != skip {
            w += row.iter().zip(vi).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    w
}

/// Sum over buyers of `E_{w^-i}[W_-i] - E_{w}[W_-i]`, weights `exp(Y W)`.
pub fn oracle_softmax_ama(options: &AmaParams, v: &[Vec<f64>], y: f64) -> f64 {
    let full: Vec<f64> = options.iter().map(|o| welfare(o, v, None)).collect();
    let zf: f64 = full.iter().map(|w| (y * w).exp()).sum();
    let mut total = 0.0;
    for i in 0..v.len() {
        let wi: Vec<f64> = options.iter().map(|o| welfare(o, v, Some(i))).collect();
        let zi: f64 = wi.iter().map(|w| (y * w).exp()).sum();
        for k in 0..options.len() {
            total += (y * wi[k]).exp() / zi * wi[k] - (y * full[k]).exp() / zf * wi[k];
        }
    }
    total
}

pub fn rochet_params(menu: &RochetMenu<f64>) -> Vec<(Vec<f64>, f64)> {
    menu.options()
        .iter()
        .map(|o| (o.allocation.clone(), o.price))
        .collect()
}

pub fn ama_params(menu: &AmaMenu<f64>) -> AmaParams {
    menu.options()
        .iter()
        .map(|o| (o.allocation.clone(), o.boost))
        .collect()
}

/// Five-point central difference of `f` at 0 along one coordinate.
pub fn derivative(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    (-f(2.0 * h) + 8.0 * f(h) - 8.0 * f(-h) + f(-2.0 * h)) / (12.0 * h)
}

/// Relative error with a floor on the scale so that vanishing gradients are
/// compared absolutely.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

/// VCG payments straight from the welfare externalities, with the winner
/// chosen by maximal welfare, then minimal boost, then index.
pub fn oracle_vcg(options: &AmaParams, v: &[Vec<f64>]) -> (usize, Vec<f64>) {
    let pick = |skip: Option<usize>| {
        let mut best = 0;
        for k in 1..options.len() {
            let (wk, wb) = (
                welfare(&options[k], v, skip),
                welfare(&options[best], v, skip),
            );
            if wk > wb || (wk == wb && options[k].1 < options[best].1) {
                best = k;
            }
        }
        best
    };
    let k = pick(None);
    let prices = (0..v.len())
        .map(|i| {
            let ki = pick(Some(i));
            welfare(&options[ki], v, Some(i)) - welfare(&options[k], v, Some(i))
        })
        .collect();
    (k, prices)
}

/// Utility-maximizing option by brute force, ties to higher price then
/// lower index.
pub fn oracle_active(options: &[(Vec<f64>, f64)], v: &[f64]) -> usize {
    let util =
        |k: usize| options[k].0.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() - options[k].1;
    let mut best = 0;
    for k in 1..options.len() {
        let (uk, ub) = (util(k), util(best));
        if uk > ub || (uk == ub && options[k].1 > options[best].1) {
            best = k;
        }
    }
    best
}

/// Checks the three bijection properties by enumerating `{0..K}`.
pub fn bijection_ok(forward: &[(usize, usize)], k1: &[usize], k2: &[usize]) -> bool {
    let mut seen = std::collections::HashSet::new();
    for (k, &(a, b)) in forward.iter().enumerate() {
        if !k1.contains(&a) || !k2.contains(&b) || !seen.insert((a, b)) {
            return false;
        }
        if k1.contains(&k) && a != k {
            return false;
        }
        if k2.contains(&k) && b != k {
            return false;
        }
    }
    seen.len() == k1.len() * k2.len()
}

/// Reduction set holding 0 and `size - 1` other indices below `total`.
pub fn random_reduction_set(rng: &mut impl Rng, total: usize, size: usize) -> ReductionSet {
    let mut idx: Vec<usize> = (1..total).collect();
    for i in (1..idx.len()).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    ReductionSet::new(std::iter::once(0).chain(idx.into_iter().take(size - 1))).unwrap()
}

/// Menu with `total` options whose options outside `keep` can never be
/// selected: each is priced out of reach or is a dearer copy of a kept one.
pub fn zero_reducible_rochet(
    rng: &mut impl Rng,
    n: usize,
    total: usize,
    keep: &ReductionSet,
) -> RochetMenu<f64> {
    let kept: Vec<RochetOption<f64>> = (0..total)
        .map(|k| {
            if k == 0 {
                RochetOption::default_for(n)
            } else {
                random_rochet_option(rng, n, 1.0)
            }
        })
        .collect();
    let options = (0..total)
        .map(|k| {
            if keep.contains(k) {
                kept[k].clone()
            } else if rng.random::<bool>() {
                RochetOption::new(kept[k].allocation.clone(), 2.0)
            } else {
                let src = &kept[keep.indices()[rng.random_range(0..keep.len())]];
                RochetOption::new(
                    src.allocation.clone(),
                    src.price + 0.01 + rng.random::<f64>(),
                )
            }
        })
        .collect();
    RochetMenu::from_options(n, options)
}
