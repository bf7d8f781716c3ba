//! Piecewise-linear paths between menus.
//!
//! Two menus that are both 0-reducible are joined by a three-piece path
//! through replicated menus `M^1, M^2` whose options are indexed by a
//! bijection `phi: K -> K1 x K2`. Approximately reducible menus first move to
//! an exactly reducible menu (price inflation or boost deflation), and large
//! menus first move to a discretized menu, giving five pieces in total.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::menu::{AmaMenu, AmaOption, Menu, MenuPath, RochetMenu, RochetOption};
use crate::scalar::Scalar;

/// Option indices containing the default option `0`, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ReductionSetDoc", into = "ReductionSetDoc")]
pub struct ReductionSet {
    indices: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReductionSetDoc {
    indices: Vec<usize>,
}

impl TryFrom<ReductionSetDoc> for ReductionSet {
    type Error = String;
    fn try_from(doc: ReductionSetDoc) -> std::result::Result<Self, String> {
        ReductionSet::new(doc.indices).map_err(|e| e.to_string())
    }
}

impl From<ReductionSet> for ReductionSetDoc {
    fn from(s: ReductionSet) -> Self {
        ReductionSetDoc { indices: s.indices }
    }
}

impl ReductionSet {
    pub fn new(indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let set: BTreeSet<usize> = indices.into_iter().collect();
        if !set.contains(&0) {
            return Err(Error::Structure(
                "reduction set must contain the default option 0".into(),
            ));
        }
        Ok(ReductionSet {
            indices: set.into_iter().collect(),
        })
    }

    /// `{0, 1, ..., num_options - 1}`.
    pub fn all(num_options: usize) -> Self {
        ReductionSet {
            indices: (0..num_options.max(1)).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    /// `floor(sqrt(num_options))`.
    pub fn cap(num_options: usize) -> usize {
        isqrt(num_options)
    }

    /// Adds the smallest indices not yet present until the set has `size`
    /// members.
    pub fn extended_to(&self, size: usize) -> Self {
        let mut out = self.indices.clone();
        let mut k = 0;
        while out.len() < size {
            if !self.contains(k) {
                out.push(k);
            }
            k += 1;
        }
        out.sort_unstable();
        ReductionSet { indices: out }
    }
}

pub(crate) fn isqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn ceil_sqrt(n: usize) -> usize {
    let r = isqrt(n);
    if r * r == n {
        r
    } else {
        r + 1
    }
}

/// `forward[k] = (phi_1(k), phi_2(k))`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bijection {
    forward: Vec<(usize, usize)>,
}

/// Which coordinate of the bijection to read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

impl Bijection {
    pub fn forward(&self) -> &[(usize, usize)] {
        &self.forward
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn phi(&self, side: Side, k: usize) -> usize {
        match side {
            Side::First => self.forward[k].0,
            Side::Second => self.forward[k].1,
        }
    }

    /// Checks that `forward` is onto `k1 x k2` and respects both fibers.
    pub fn check(&self, k1: &[usize], k2: &[usize]) -> Result<()> {
        let s1: BTreeSet<usize> = k1.iter().copied().collect();
        let s2: BTreeSet<usize> = k2.iter().copied().collect();
        let image: BTreeSet<(usize, usize)> = self.forward.iter().copied().collect();
        if image.len() != self.forward.len() || self.forward.len() != s1.len() * s2.len() {
            return Err(Error::InvariantViolation(
                "phi is not injective onto K1 x K2".into(),
            ));
        }
        for (k, &(a, b)) in self.forward.iter().enumerate() {
            if !s1.contains(&a) || !s2.contains(&b) {
                return Err(Error::InvariantViolation(format!(
                    "phi({k}) = ({a}, {b}) leaves K1 x K2"
                )));
            }
            if s1.contains(&k) && a != k {
                return Err(Error::InvariantViolation(format!(
                    "phi({k}) = ({a}, {b}) but {k} is in K1"
                )));
            }
            if s2.contains(&k) && b != k {
                return Err(Error::InvariantViolation(format!(
                    "phi({k}) = ({a}, {b}) but {k} is in K2"
                )));
            }
        }
        Ok(())
    }
}

/// Explicit bijection `{0..K} -> K1 x K2` with `phi(k) in {k} x K2` for
/// `k in K1` and `phi(k) in K1 x {k}` for `k in K2`.
pub fn build_bijection(num_options: usize, k1: &[usize], k2: &[usize]) -> Result<Bijection> {
    let s = isqrt(num_options);
    if s * s != num_options {
        return Err(Error::Size(format!(
            "number of options {num_options} is not a perfect square"
        )));
    }
    let s1: BTreeSet<usize> = k1.iter().copied().collect();
    let s2: BTreeSet<usize> = k2.iter().copied().collect();
    for (name, set, raw) in [("K1", &s1, k1), ("K2", &s2, k2)] {
        if set.len() != s || raw.len() != s {
            return Err(Error::Size(format!(
                "{name} must have exactly {s} distinct members, got {:?}",
                raw
            )));
        }
        if let Some(&bad) = set.iter().find(|&&k| k >= num_options) {
            return Err(Error::Size(format!("{name} member {bad} is out of range")));
        }
    }

    let mut forward: Vec<Option<(usize, usize)>> = vec![None; num_options];
    if let Some(&star) = s1.intersection(&s2).next() {
        for &k in s1.union(&s2) {
            forward[k] = Some(match (s1.contains(&k), s2.contains(&k)) {
                (true, true) => (k, k),
                (true, false) => (k, star),
                _ => (star, k),
            });
        }
    } else {
        let mut it1 = s1.iter().copied();
        let mut it2 = s2.iter().copied();
        let (a, a2) = (it1.next().unwrap(), it1.next().unwrap());
        let (b, b2) = (it2.next().unwrap(), it2.next().unwrap());
        forward[a] = Some((a, b));
        forward[a2] = Some((a2, b2));
        forward[b] = Some((a2, b));
        forward[b2] = Some((a, b2));
        for k in it1 {
            forward[k] = Some((k, b));
        }
        for k in it2 {
            forward[k] = Some((a, k));
        }
    }

    let used: BTreeSet<(usize, usize)> = forward.iter().flatten().copied().collect();
    let mut rest = s1
        .iter()
        .flat_map(|&x| s2.iter().map(move |&y| (x, y)))
        .filter(|p| !used.contains(p));
    for slot in forward.iter_mut().filter(|f| f.is_none()) {
        *slot = rest.next();
    }
    let bij = Bijection {
        forward: forward
            .into_iter()
            .map(|p| p.expect("pair count matches"))
            .collect(),
    };
    bij.check(k1, k2)?;
    Ok(bij)
}

/// Option `k` of the result is option `phi_side(k)` of `menu`.
pub fn replicate_menu<T: Scalar, M: Menu<T>>(menu: &M, bij: &Bijection, side: Side) -> Result<M> {
    if bij.len() != menu.num_options() {
        return Err(Error::Size(format!(
            "bijection has {} entries but the menu has {} options",
            bij.len(),
            menu.num_options()
        )));
    }
    let idx: Vec<usize> = (0..bij.len()).map(|k| bij.phi(side, k)).collect();
    Ok(menu.select(&idx))
}

/// Mechanism-specific steps of the path constructions.
pub trait Connectable<T: Scalar>: Menu<T> {
    /// Makes every option outside `keep` unselectable.
    fn reduce(&self, keep: &ReductionSet) -> Self;
    /// Rounds allocations to a finite grid and discounts prices or boosts.
    fn discretize(&self, epsilon: T) -> Result<Self>;
    /// One representative per distinct allocation, plus the default.
    fn reduction_set_of_discretized(&self) -> ReductionSet;
    /// Menu size beyond which discretization alone yields a small enough
    /// reduction set; `None` if the count overflows `u128`.
    fn large_threshold(&self, epsilon: T) -> Option<u128>;
    /// Human-readable form of the threshold formula.
    fn threshold_formula(&self) -> String;
}

/// Inflated price for dropped RochetNet options; exceeds any value `v . x`.
pub const INFLATED_PRICE: f64 = 2.0;

pub fn reduce_by_price_inflation<T: Scalar>(
    menu: &RochetMenu<T>,
    keep: &ReductionSet,
) -> RochetMenu<T> {
    menu.map_options(|k, o| {
        if keep.contains(k) {
            o.clone()
        } else {
            RochetOption::new(o.allocation.clone(), T::lit(INFLATED_PRICE))
        }
    })
}

pub fn reduce_by_boost_deflation<T: Scalar>(menu: &AmaMenu<T>, keep: &ReductionSet) -> AmaMenu<T> {
    let deflated = -T::lit((menu.num_buyers() + 1) as f64);
    menu.map_options(|k, o| {
        if keep.contains(k) {
            o.clone()
        } else {
            AmaOption::new(o.allocation.clone(), deflated)
        }
    })
}

/// `step * floor(x / step)`, snapping quotients within a few ulps of an
/// integer so that grid values map to themselves. When `1 / step` is an
/// integer `N` the grid points are computed as `i / N`, which is exact for
/// every representable grid point.
fn round_down<T: Scalar>(x: T, step: T) -> T {
    let inv = (T::one() / step).round();
    let integral = ((T::one() / step) - inv).abs() <= T::lit(1e-9) * inv;
    let q = if integral { x * inv } else { x / step };
    let r = q.round();
    let slack = T::lit(8.0) * T::epsilon() * q.abs().max(T::one());
    let i = if (q - r).abs() <= slack { r } else { q.floor() };
    if integral {
        i / inv
    } else {
        i * step
    }
}

fn check_epsilon<T: Scalar>(epsilon: T, upper: f64) -> Result<()> {
    if !(epsilon > T::zero() && epsilon <= T::lit(upper)) {
        return Err(Error::param(
            "epsilon",
            format!("must lie in (0, {upper}], got {epsilon}"),
        ));
    }
    Ok(())
}

/// Grid `eps~ = eps^2 / 4`; allocations rounded down, prices scaled by
/// `1 - sqrt(eps~)`.
pub fn discretize_rochet<T: Scalar>(menu: &RochetMenu<T>, epsilon: T) -> Result<RochetMenu<T>> {
    check_epsilon(epsilon, 1.0)?;
    let step = epsilon * epsilon / T::lit(4.0);
    let discount = T::one() - step.sqrt();
    Ok(menu.map_options(|_, o| {
        RochetOption::new(
            o.allocation.iter().map(|&x| round_down(x, step)).collect(),
            discount * o.price,
        )
    }))
}

/// `eps~ = eps^2 / (16 m^2)`, grid `eps~ / m`, boosts scaled by
/// `1 - sqrt(eps~) / m`.
pub fn discretize_ama<T: Scalar>(menu: &AmaMenu<T>, epsilon: T) -> Result<AmaMenu<T>> {
    check_epsilon(epsilon, 0.25)?;
    let m = T::lit(menu.num_buyers() as f64);
    let tilde = epsilon * epsilon / (T::lit(16.0) * m * m);
    let step = tilde / m;
    let delta = tilde.sqrt() / m;
    Ok(menu.map_options(|_, o| {
        AmaOption::new(
            o.allocation
                .iter()
                .map(|row| row.iter().map(|&x| round_down(x, step)).collect())
                .collect(),
            (T::one() - delta) * o.boost,
        )
    }))
}

fn representatives<K: Ord, T: Scalar>(
    keys: impl Iterator<Item = (K, T)>,
    better: impl Fn(T, T) -> bool,
) -> ReductionSet {
    let mut best: std::collections::BTreeMap<K, (usize, T)> = Default::default();
    for (k, (key, score)) in keys.enumerate() {
        match best.get(&key) {
            Some(&(_, s)) if !better(score, s) => {}
            _ => {
                best.insert(key, (k, score));
            }
        }
    }
    ReductionSet::new(std::iter::once(0).chain(best.values().map(|&(k, _)| k))).expect("contains 0")
}

fn bits<T: Scalar>(x: T) -> u64 {
    // +0.0 and -0.0 describe the same allocation
    (x.as_f64() + 0.0).to_bits()
}

/// Cheapest option per distinct allocation (lowest index among equals).
pub fn reduction_set_of_discretized_rochet<T: Scalar>(menu: &RochetMenu<T>) -> ReductionSet {
    representatives(
        menu.options().iter().map(|o| {
            (
                o.allocation.iter().map(|&x| bits(x)).collect::<Vec<_>>(),
                o.price,
            )
        }),
        |new, old| new < old,
    )
}

/// Largest-boost option per distinct allocation (lowest index among
/// equals); it is the only one of its group that can ever be selected.
pub fn reduction_set_of_discretized_ama<T: Scalar>(menu: &AmaMenu<T>) -> ReductionSet {
    representatives(
        menu.options().iter().map(|o| {
            (
                o.allocation
                    .iter()
                    .flat_map(|r| r.iter().map(|&x| bits(x)))
                    .collect::<Vec<_>>(),
                o.boost,
            )
        }),
        |new, old| new > old,
    )
}

fn snapped_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

fn checked_power(base: f64, exp: usize) -> Option<u128> {
    if !(0.0..1e30).contains(&base) {
        return None;
    }
    (base as u128).checked_pow(u32::try_from(exp).ok()?)
}

/// `ceil(4 / eps^2)^(2n)`.
pub fn rochet_threshold(n: usize, epsilon: f64) -> Option<u128> {
    checked_power(snapped_ceil(4.0 / (epsilon * epsilon)), 2 * n)
}

/// `ceil(16 m^3 / eps^2)^(2nm)`.
pub fn ama_threshold(m: usize, n: usize, epsilon: f64) -> Option<u128> {
    let m3 = (m * m * m) as f64;
    checked_power(snapped_ceil(16.0 * m3 / (epsilon * epsilon)), 2 * n * m)
}

impl<T: Scalar> Connectable<T> for RochetMenu<T> {
    fn reduce(&self, keep: &ReductionSet) -> Self {
        reduce_by_price_inflation(self, keep)
    }
    fn discretize(&self, epsilon: T) -> Result<Self> {
        discretize_rochet(self, epsilon)
    }
    fn reduction_set_of_discretized(&self) -> ReductionSet {
        reduction_set_of_discretized_rochet(self)
    }
    fn large_threshold(&self, epsilon: T) -> Option<u128> {
        rochet_threshold(self.num_items(), epsilon.as_f64())
    }
    fn threshold_formula(&self) -> String {
        format!("ceil(4/eps^2)^(2n) with n={}", self.num_items())
    }
}

impl<T: Scalar> Connectable<T> for AmaMenu<T> {
    fn reduce(&self, keep: &ReductionSet) -> Self {
        reduce_by_boost_deflation(self, keep)
    }
    fn discretize(&self, epsilon: T) -> Result<Self> {
        discretize_ama(self, epsilon)
    }
    fn reduction_set_of_discretized(&self) -> ReductionSet {
        reduction_set_of_discretized_ama(self)
    }
    fn large_threshold(&self, epsilon: T) -> Option<u128> {
        ama_threshold(self.num_buyers(), self.num_items(), epsilon.as_f64())
    }
    fn threshold_formula(&self) -> String {
        format!(
            "ceil(16m^3/eps^2)^(2nm) with m={}, n={}",
            self.num_buyers(),
            self.num_items()
        )
    }
}

/// Padded copies of both menus and both sets, ready for [`build_bijection`].
///
/// Menus get default-option copies up to a perfect square `s^2`; each set is
/// extended to exactly `s` members. With `grow` the side `s` is enlarged to
/// fit the larger set, otherwise a set larger than `s` is an error.
pub fn pad_to_square<T: Scalar, M: Menu<T>>(
    m1: &M,
    k1: &ReductionSet,
    m2: &M,
    k2: &ReductionSet,
    grow: bool,
) -> Result<(M, ReductionSet, M, ReductionSet)> {
    m1.check_congruent(m2)?;
    let total = m1.num_options();
    for (name, k) in [("K1", k1), ("K2", k2)] {
        if let Some(&bad) = k.indices().iter().find(|&&i| i >= total) {
            return Err(Error::Size(format!(
                "{name} member {bad} exceeds the menu size {total}"
            )));
        }
    }
    let mut s = ceil_sqrt(total);
    let largest = k1.len().max(k2.len());
    if largest > s {
        if !grow {
            return Err(Error::Size(format!(
                "reduction set of size {largest} exceeds sqrt of the padded menu size {}",
                s * s
            )));
        }
        s = largest;
    }
    Ok((
        m1.pad_with_default(s * s),
        k1.extended_to(s),
        m2.pad_with_default(s * s),
        k2.extended_to(s),
    ))
}

/// `[M1, M^1, M^2, M2]` for padded inputs with sets of size exactly `s`.
fn zero_pieces<T: Scalar, M: Menu<T>>(
    m1: &M,
    k1: &ReductionSet,
    m2: &M,
    k2: &ReductionSet,
) -> Result<[M; 4]> {
    let bij = build_bijection(m1.num_options(), k1.indices(), k2.indices())?;
    let hat1 = replicate_menu(m1, &bij, Side::First)?;
    let hat2 = replicate_menu(m2, &bij, Side::Second)?;
    Ok([m1.clone(), hat1, hat2, m2.clone()])
}

/// Three-piece path between two 0-reducible menus.
pub fn connect_zero_reducible<T: Scalar, M: Menu<T>>(
    m1: &M,
    k1: &ReductionSet,
    m2: &M,
    k2: &ReductionSet,
) -> Result<MenuPath<M>> {
    let (p1, s1, p2, s2) = pad_to_square(m1, k1, m2, k2, false)?;
    MenuPath::new::<T>(zero_pieces(&p1, &s1, &p2, &s2)?.into())
}

/// Five-piece path between two approximately reducible menus.
pub fn connect_epsilon_reducible<T: Scalar, M: Connectable<T>>(
    m1: &M,
    k1: &ReductionSet,
    m2: &M,
    k2: &ReductionSet,
) -> Result<MenuPath<M>> {
    let (p1, s1, p2, s2) = pad_to_square(m1, k1, m2, k2, false)?;
    let r1 = p1.reduce(k1);
    let r2 = p2.reduce(k2);
    let [_, hat1, hat2, _] = zero_pieces(&r1, &s1, &r2, &s2)?;
    MenuPath::new::<T>(vec![p1, r1, hat1, hat2, r2, p2])
}

/// Five-piece path through the discretized menus, without a size check.
pub fn connect_discretized<T: Scalar, M: Connectable<T>>(
    m1: &M,
    m2: &M,
    epsilon: T,
) -> Result<MenuPath<M>> {
    m1.check_congruent(m2)?;
    let d1 = m1.discretize(epsilon)?;
    let d2 = m2.discretize(epsilon)?;
    let k1 = d1.reduction_set_of_discretized();
    let k2 = d2.reduction_set_of_discretized();
    let (t1, s1, t2, s2) = pad_to_square(&d1, &k1, &d2, &k2, true)?;
    let total = t1.num_options();
    let [_, hat1, hat2, _] = zero_pieces(&t1, &s1, &t2, &s2)?;
    MenuPath::new::<T>(vec![
        m1.pad_with_default(total),
        t1,
        hat1,
        hat2,
        t2,
        m2.pad_with_default(total),
    ])
}

/// Five-piece path between two menus of at least the threshold size.
pub fn connect_large<T: Scalar, M: Connectable<T>>(
    m1: &M,
    m2: &M,
    epsilon: T,
) -> Result<MenuPath<M>> {
    m1.check_congruent(m2)?;
    let size = m1.num_options() as u128;
    match m1.large_threshold(epsilon) {
        Some(required) if size >= required => connect_discretized(m1, m2, epsilon),
        Some(required) => Err(Error::Precondition(format!(
            "menu has {size} options but at least {required} are required ({}, eps={epsilon})",
            m1.threshold_formula()
        ))),
        None => Err(Error::Precondition(format!(
            "menu has {size} options but the required count {} at eps={epsilon} exceeds 2^128",
            m1.threshold_formula()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::menu::Mechanism;
    use crate::menu::Profile;

    fn rochet(pairs: &[(f64, f64)]) -> RochetMenu<f64> {
        let regular: Vec<RochetOption<f64>> = pairs
            .iter()
            .map(|&(x, p)| RochetOption::new(vec![x], p))
            .collect();
        RochetMenu::new(1, regular).unwrap()
    }

    #[test]
    fn bijection_shared_case() {
        let b = build_bijection(4, &[0, 1], &[0, 2]).unwrap();
        assert_eq!(b.forward(), &[(0, 0), (1, 0), (0, 2), (1, 2)]);
    }

    #[test]
    fn bijection_disjoint_case() {
        let b = build_bijection(4, &[0, 1], &[2, 3]).unwrap();
        assert_eq!(b.forward(), &[(0, 2), (1, 3), (1, 2), (0, 3)]);
    }

    #[test]
    fn bijection_diagonal() {
        let b = build_bijection(9, &[0, 4, 7], &[0, 4, 7]).unwrap();
        for k in [0, 4, 7] {
            assert_eq!(b.forward()[k], (k, k));
        }
    }

    #[test]
    fn bijection_errors() {
        assert!(matches!(
            build_bijection(5, &[0, 1], &[0, 2]),
            Err(Error::Size(_))
        ));
        assert!(matches!(
            build_bijection(9, &[0, 1], &[0, 2, 3]),
            Err(Error::Size(_))
        ));
        assert!(matches!(
            build_bijection(4, &[0, 0], &[0, 2]),
            Err(Error::Size(_))
        ));
    }

    #[test]
    fn bijection_check_catches_fiber_violation() {
        let b = Bijection {
            forward: vec![(0, 0), (0, 2), (1, 0), (1, 2)],
        };
        assert!(b.check(&[0, 1], &[0, 2]).is_err());
    }

    #[test]
    fn replicate_examples() {
        let m = rochet(&[(0.5, 0.1), (0.7, 0.2), (0.9, 0.3)]);
        let b = build_bijection(4, &[0, 1], &[0, 2]).unwrap();
        let r1 = replicate_menu(&m, &b, Side::First).unwrap();
        let r2 = replicate_menu(&m, &b, Side::Second).unwrap();
        let o = m.options();
        assert_eq!(
            r1.options(),
            &[o[0].clone(), o[1].clone(), o[0].clone(), o[1].clone()]
        );
        assert_eq!(
            r2.options(),
            &[o[0].clone(), o[0].clone(), o[2].clone(), o[2].clone()]
        );
        let short = rochet(&[(0.5, 0.1)]);
        assert!(replicate_menu(&short, &b, Side::First).is_err());
    }

    #[test]
    fn replicate_with_identity_is_noop() {
        let m = rochet(&[(0.5, 0.1), (0.7, 0.2), (0.9, 0.3)]);
        let b = Bijection {
            forward: vec![(0, 0), (1, 1), (2, 2), (3, 3)],
        };
        assert_eq!(replicate_menu(&m, &b, Side::First).unwrap(), m);
    }

    #[test]
    fn reduction_set_rules() {
        assert!(ReductionSet::new([1, 2]).is_err());
        let s = ReductionSet::new([3, 0, 3]).unwrap();
        assert_eq!(s.indices(), &[0, 3]);
        assert_eq!(s.extended_to(4).indices(), &[0, 1, 2, 3]);
        assert_eq!(ReductionSet::cap(10), 3);
    }

    #[test]
    fn price_inflation() {
        let m = rochet(&[(1.0, 0.36), (1.0, 0.9)]);
        let keep = ReductionSet::new([0, 1]).unwrap();
        let r = reduce_by_price_inflation(&m, &keep);
        assert_eq!(r.option(2).price, 2.0);
        assert_eq!(r.option(1), m.option(1));
        for i in 0..=100 {
            let p = Profile::from_rows(vec![vec![i as f64 / 100.0]]).unwrap();
            let mut sel = Vec::new();
            r.selected_options(&p, &mut sel);
            assert_ne!(sel[0], 2);
        }
        assert_eq!(reduce_by_price_inflation(&m, &ReductionSet::all(3)), m);
    }

    #[test]
    fn boost_deflation() {
        let m = AmaMenu::new(
            2,
            1,
            vec![
                AmaOption::single_item(2, 1, 0, 0, 0.3),
                AmaOption::single_item(2, 1, 1, 0, 0.1),
            ],
        )
        .unwrap();
        let r = reduce_by_boost_deflation(&m, &ReductionSet::new([0, 2]).unwrap());
        assert_eq!(r.option(1).boost, -3.0);
        assert_eq!(r.option(2), m.option(2));
    }

    #[test]
    fn discretize_rochet_arithmetic() {
        let m = rochet(&[(0.537, 0.5)]);
        let d = discretize_rochet(&m, 0.2).unwrap();
        assert!((d.option(1).allocation[0] - 0.53).abs() < 1e-12);
        assert!((d.option(1).price - 0.45).abs() < 1e-12);
        let grid = rochet(&[(0.25, 0.0), (1.0, 0.0)]);
        assert_eq!(discretize_rochet(&grid, 0.2).unwrap(), grid);
        assert!(discretize_rochet(&m, 0.0).is_err());
        assert!(discretize_rochet(&m, 1.5).is_err());
    }

    #[test]
    fn discretize_ama_arithmetic() {
        let m: AmaMenu<f64> =
            AmaMenu::new(2, 1, vec![AmaOption::new(vec![vec![0.5], vec![0.0]], -0.4)]).unwrap();
        let d = discretize_ama(&m, 0.2).unwrap();
        assert_eq!(d.option(1).allocation[0][0], 0.5);
        assert!((d.option(1).boost + 0.395).abs() < 1e-12);
        let zero = AmaMenu::new(2, 1, vec![AmaOption::default_for(2, 1)]).unwrap();
        assert_eq!(discretize_ama(&zero, 0.2).unwrap(), zero);
        assert!(discretize_ama(&m, 0.3).is_err());
    }

    #[test]
    fn representatives_pick_cheapest() {
        let m = rochet(&[(0.0, 0.3), (0.0, 0.2)]);
        assert_eq!(reduction_set_of_discretized_rochet(&m).indices(), &[0]);
        let m = rochet(&[(0.5, 0.3), (0.5, 0.2), (0.5, 0.2)]);
        assert_eq!(reduction_set_of_discretized_rochet(&m).indices(), &[0, 2]);
        let m = rochet(&[(0.25, 0.3), (0.5, 0.2)]);
        assert_eq!(
            reduction_set_of_discretized_rochet(&m).indices(),
            &[0, 1, 2]
        );
    }

    #[test]
    fn representatives_pick_largest_boost() {
        let m = AmaMenu::new(
            1,
            1,
            vec![
                AmaOption::new(vec![vec![0.5]], -0.3),
                AmaOption::new(vec![vec![0.5]], -0.1),
            ],
        )
        .unwrap();
        assert_eq!(reduction_set_of_discretized_ama(&m).indices(), &[0, 2]);
    }

    #[test]
    fn thresholds() {
        assert_eq!(rochet_threshold(1, 1.0), Some(16));
        assert_eq!(rochet_threshold(1, 0.5), Some(256));
        assert_eq!(ama_threshold(2, 1, 0.25), Some(2048u128.pow(4)));
        assert_eq!(rochet_threshold(40, 0.01), None);
    }

    #[test]
    fn path_shapes() {
        let m1 = rochet(&[(1.0, 0.3), (0.5, 0.1), (0.2, 0.05)]);
        let m2 = rochet(&[(0.4, 0.1), (1.0, 0.6), (0.9, 0.5)]);
        let k1 = ReductionSet::new([0, 1]).unwrap();
        let k2 = ReductionSet::new([0, 2]).unwrap();
        let p = connect_zero_reducible(&m1, &k1, &m2, &k2).unwrap();
        assert_eq!(p.num_pieces(), 3);
        let p = connect_epsilon_reducible(&m1, &k1, &m2, &k2).unwrap();
        assert_eq!(p.num_pieces(), 5);
        assert_eq!(p.breakpoints()[1].option(3).price, 2.0);
        let big = ReductionSet::new([0, 1, 2, 3]).unwrap();
        assert!(connect_zero_reducible(&m1, &big, &m2, &k2).is_err());
    }

    #[test]
    fn non_square_menus_are_padded() {
        let m1 = rochet(&[(1.0, 0.3), (0.5, 0.1), (0.2, 0.05), (0.1, 0.01)]);
        let m2 = rochet(&[(0.4, 0.1), (1.0, 0.6), (0.9, 0.5), (0.3, 0.2)]);
        let k = ReductionSet::new([0, 1]).unwrap();
        let p = connect_zero_reducible(&m1, &k, &m2, &k).unwrap();
        assert_eq!(p.first().num_options(), 9);
        assert_eq!(p.first().option(8), &RochetOption::default_for(1));
    }

    #[test]
    fn large_below_threshold_names_count() {
        let m = rochet(&[(1.0, 0.3)]);
        let err = connect_large(&m, &m, 0.5).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
        assert!(err.to_string().contains("256"), "{err}");
    }

    #[test]
    fn reduction_set_json() {
        let s = ReductionSet::new([0, 2]).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"indices":[0,2]}"#);
        assert_eq!(serde_json::from_str::<ReductionSet>(&j).unwrap(), s);
        assert!(serde_json::from_str::<ReductionSet>(r#"{"indices":[1]}"#).is_err());
    }
}
