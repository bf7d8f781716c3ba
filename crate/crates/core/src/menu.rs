//! Menus, valuation profiles and piecewise-linear paths in menu space.
//!
//! A menu always carries its default option at index 0: the all-zero
//! allocation at price (or boost) zero. Interpolation follows the convention
//! `interpolate(a, b, lambda) = lambda * a + (1 - lambda) * b`, entrywise on
//! allocations and on prices or boosts.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rochet::SoftmaxConfig;
use crate::scalar::{lerp, Scalar};

/// Additive valuation of one buyer over `n` items, normalized to the unit
/// simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation<T>(Vec<T>);

impl<T: Scalar> Valuation<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let tol = T::feasibility_tol();
        let mut sum = T::zero();
        for (j, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(Error::param(
                    "valuation",
                    format!("entry {j} = {v} outside [0, 1]"),
                ));
            }
            sum = sum + v;
        }
        if sum > T::one() + tol {
            return Err(Error::param(
                "valuation",
                format!("entries sum to {sum} > 1"),
            ));
        }
        Ok(Valuation(values))
    }

    /// Wraps values produced by a sampler that already enforces the
    /// simplex constraint.
    pub(crate) fn new_unchecked(values: Vec<T>) -> Self {
        Valuation(values)
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Valuations of all `m` buyers for one auction instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile<T> {
    buyers: Vec<Valuation<T>>,
}

impl<T: Scalar> Profile<T> {
    pub fn new(buyers: Vec<Valuation<T>>) -> Result<Self> {
        if buyers.is_empty() {
            return Err(Error::param("profile", "needs at least one buyer"));
        }
        let n = buyers[0].len();
        if buyers.iter().any(|b| b.len() != n) {
            return Err(Error::param("profile", "buyers disagree on item count"));
        }
        Ok(Profile { buyers })
    }

    pub fn single(valuation: Valuation<T>) -> Self {
        Profile {
            buyers: vec![valuation],
        }
    }

    /// Builds a profile from raw rows, checking every buyer's invariants.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let buyers = rows
            .into_iter()
            .map(Valuation::new)
            .collect::<Result<Vec<_>>>()?;
        Profile::new(buyers)
    }

    pub(crate) fn from_unchecked(buyers: Vec<Valuation<T>>) -> Self {
        Profile { buyers }
    }

    pub fn buyers(&self) -> &[Valuation<T>] {
        &self.buyers
    }

    pub fn buyer(&self, i: usize) -> &[T] {
        self.buyers[i].values()
    }

    pub fn num_buyers(&self) -> usize {
        self.buyers.len()
    }

    pub fn num_items(&self) -> usize {
        self.buyers.first().map_or(0, Valuation::len)
    }

    /// Replaces buyer `i`'s report, keeping all other buyers.
    pub fn with_buyer(&self, i: usize, valuation: Valuation<T>) -> Self {
        let mut buyers = self.buyers.clone();
        buyers[i] = valuation;
        Profile { buyers }
    }
}

/// Single-buyer option: an allocation in `[0,1]^n` sold at a price.
#[derive(Clone, Debug, PartialEq)]
pub struct RochetOption<T> {
    pub allocation: Vec<T>,
    pub price: T,
}

impl<T: Scalar> RochetOption<T> {
    pub fn new(allocation: Vec<T>, price: T) -> Self {
        RochetOption { allocation, price }
    }

    pub fn default_for(n: usize) -> Self {
        RochetOption {
            allocation: vec![T::zero(); n],
            price: T::zero(),
        }
    }
}

/// RochetNet menu: `K + 1` options with the default option at index 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MenuDoc<T>", try_from = "MenuDoc<T>", bound = "T: Scalar")]
pub struct RochetMenu<T> {
    n: usize,
    options: Vec<RochetOption<T>>,
}

impl<T: Scalar> RochetMenu<T> {
    /// Prepends the default option to `regular` and checks every invariant.
    pub fn new(n: usize, regular: Vec<RochetOption<T>>) -> Result<Self> {
        let mut options = Vec::with_capacity(regular.len() + 1);
        options.push(RochetOption::default_for(n));
        options.extend(regular);
        let menu = RochetMenu { n, options };
        menu.ensure_valid()?;
        Ok(menu)
    }

    /// Convenience constructor for `(allocation, price)` pairs.
    pub fn from_pairs(n: usize, regular: &[(&[T], T)]) -> Result<Self> {
        Self::new(
            n,
            regular
                .iter()
                .map(|(x, p)| RochetOption::new(x.to_vec(), *p))
                .collect(),
        )
    }

    /// Raw constructor; `options[0]` is taken as the default option as-is.
    /// Use [`Menu::validate`] to inspect the result.
    pub fn from_options(n: usize, options: Vec<RochetOption<T>>) -> Self {
        RochetMenu { n, options }
    }

    pub fn options(&self) -> &[RochetOption<T>] {
        &self.options
    }

    pub fn option(&self, k: usize) -> &RochetOption<T> {
        &self.options[k]
    }

    pub fn num_regular(&self) -> usize {
        self.options.len().saturating_sub(1)
    }

    pub fn max_price(&self) -> T {
        self.options.iter().map(|o| o.price).fold(T::zero(), T::max)
    }

    /// Returns a copy with each option transformed by `f(index, option)`.
    pub fn map_options(
        &self,
        mut f: impl FnMut(usize, &RochetOption<T>) -> RochetOption<T>,
    ) -> Self {
        RochetMenu {
            n: self.n,
            options: self
                .options
                .iter()
                .enumerate()
                .map(|(k, o)| f(k, o))
                .collect(),
        }
    }

    fn ensure_valid(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidMenu(join_violations(&violations)))
        }
    }
}

/// Multi-buyer AMA option: allocation matrix (row `i` = buyer `i`, column
/// `j` = item `j`) and a boost.
#[derive(Clone, Debug, PartialEq)]
pub struct AmaOption<T> {
    pub allocation: Vec<Vec<T>>,
    pub boost: T,
}

impl<T: Scalar> AmaOption<T> {
    pub fn new(allocation: Vec<Vec<T>>, boost: T) -> Self {
        AmaOption { allocation, boost }
    }

    pub fn default_for(m: usize, n: usize) -> Self {
        AmaOption {
            allocation: vec![vec![T::zero(); n]; m],
            boost: T::zero(),
        }
    }

    /// Gives all of item `item` to `buyer` (one-item-per-option shorthand).
    pub fn single_item(m: usize, n: usize, buyer: usize, item: usize, boost: T) -> Self {
        let mut o = Self::default_for(m, n);
        o.allocation[buyer][item] = T::one();
        o.boost = boost;
        o
    }
}

/// Affine maximizer auction menu with unit buyer weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MenuDoc<T>", try_from = "MenuDoc<T>", bound = "T: Scalar")]
pub struct AmaMenu<T> {
    m: usize,
    n: usize,
    options: Vec<AmaOption<T>>,
}

impl<T: Scalar> AmaMenu<T> {
    pub fn new(m: usize, n: usize, regular: Vec<AmaOption<T>>) -> Result<Self> {
        let mut options = Vec::with_capacity(regular.len() + 1);
        options.push(AmaOption::default_for(m, n));
        options.extend(regular);
        let menu = AmaMenu { m, n, options };
        let violations = menu.validate();
        if violations.is_empty() {
            Ok(menu)
        } else {
            Err(Error::InvalidMenu(join_violations(&violations)))
        }
    }

    pub fn from_options(m: usize, n: usize, options: Vec<AmaOption<T>>) -> Self {
        AmaMenu { m, n, options }
    }

    pub fn options(&self) -> &[AmaOption<T>] {
        &self.options
    }

    pub fn option(&self, k: usize) -> &AmaOption<T> {
        &self.options[k]
    }

    pub fn num_regular(&self) -> usize {
        self.options.len().saturating_sub(1)
    }

    pub fn map_options(&self, mut f: impl FnMut(usize, &AmaOption<T>) -> AmaOption<T>) -> Self {
        AmaMenu {
            m: self.m,
            n: self.n,
            options: self
                .options
                .iter()
                .enumerate()
                .map(|(k, o)| f(k, o))
                .collect(),
        }
    }

    /// Reads the menu as a single-buyer RochetNet menu with `p = -beta`.
    /// Only meaningful for `m == 1`.
    pub fn to_rochet(&self) -> Result<RochetMenu<T>> {
        if self.m != 1 {
            return Err(Error::param("m", "RochetNet reading requires one buyer"));
        }
        Ok(RochetMenu::from_options(
            self.n,
            self.options
                .iter()
                .map(|o| RochetOption::new(o.allocation[0].clone(), T::zero() - o.boost))
                .collect(),
        ))
    }

    /// Inverse of [`AmaMenu::to_rochet`].
    pub fn from_rochet(menu: &RochetMenu<T>) -> Self {
        AmaMenu {
            m: 1,
            n: menu.n,
            options: menu
                .options
                .iter()
                .map(|o| AmaOption::new(vec![o.allocation.clone()], T::zero() - o.price))
                .collect(),
        }
    }
}

/// One failed invariant of a menu.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub option: Option<usize>,
    pub kind: ViolationKind,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ViolationKind {
    EmptyMenu,
    DefaultOption,
    Shape(String),
    NonFinite,
    AllocationRange {
        buyer: Option<usize>,
        item: usize,
        value: f64,
    },
    NegativePrice(f64),
    UnitSupply {
        item: usize,
        sum: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(k) = self.option {
            write!(f, "option {k}: ")?;
        }
        match &self.kind {
            ViolationKind::EmptyMenu => write!(f, "menu has no options"),
            ViolationKind::DefaultOption => {
                write!(
                    f,
                    "default option must be the zero allocation at price/boost 0"
                )
            }
            ViolationKind::Shape(s) => write!(f, "shape: {s}"),
            ViolationKind::NonFinite => write!(f, "non-finite parameter"),
            ViolationKind::AllocationRange { buyer, item, value } => match buyer {
                Some(i) => write!(f, "allocation[{i}][{item}] = {value} outside [0, 1]"),
                None => write!(f, "allocation[{item}] = {value} outside [0, 1]"),
            },
            ViolationKind::NegativePrice(p) => write!(f, "negative price {p}"),
            ViolationKind::UnitSupply { item, sum } => {
                write!(f, "unit supply exceeded at item {item}: column sum {sum}")
            }
        }
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// Structural operations shared by both menu families.
pub trait Menu<T: Scalar>: Clone + Send + Sync + Sized {
    fn num_options(&self) -> usize;
    fn num_buyers(&self) -> usize;
    fn num_items(&self) -> usize;

    /// Errors unless both menus have the same option count and dimensions.
    fn check_congruent(&self, other: &Self) -> Result<()>;

    /// Entrywise `lambda * self + (1 - lambda) * other`.
    fn interpolate(&self, other: &Self, lambda: T) -> Result<Self>;

    /// Every broken type invariant; empty iff the menu is valid.
    fn validate(&self) -> Vec<Violation>;

    /// Menu whose option `k` is option `indices[k]` of `self`.
    fn select(&self, indices: &[usize]) -> Self;

    /// Appends copies of the default option until there are `total` options.
    fn pad_with_default(&self, total: usize) -> Self;

    /// Largest absolute difference over all parameters of congruent menus.
    fn max_param_gap(&self, other: &Self) -> T;
}

/// Revenue semantics of a menu.
pub trait Mechanism<T: Scalar>: Menu<T> {
    /// Realized revenue (price or total payment) on one profile.
    fn revenue(&self, profile: &Profile<T>) -> T;

    /// Softmax-smoothed revenue on one profile.
    fn softmax_revenue(&self, profile: &Profile<T>, cfg: &SoftmaxConfig<T>) -> T;

    /// Options selected on this profile: the active option for RochetNet,
    /// `k(v)` followed by every `k(v_{-i})` for AMA.
    fn selected_options(&self, profile: &Profile<T>, out: &mut Vec<usize>);
}

/// Entrywise interpolation `lambda * a + (1 - lambda) * b`.
pub fn interpolate<T: Scalar, M: Menu<T>>(a: &M, b: &M, lambda: T) -> Result<M> {
    a.interpolate(b, lambda)
}

pub fn validate<T: Scalar, M: Menu<T>>(menu: &M) -> Vec<Violation> {
    menu.validate()
}

fn check_lambda<T: Scalar>(lambda: T) -> Result<()> {
    if lambda >= T::zero() && lambda <= T::one() {
        Ok(())
    } else {
        Err(Error::param("lambda", format!("{lambda} outside [0, 1]")))
    }
}

fn push_alloc_range<T: Scalar>(
    out: &mut Vec<Violation>,
    k: usize,
    buyer: Option<usize>,
    row: &[T],
) {
    for (j, &x) in row.iter().enumerate() {
        if !(x >= T::zero() && x <= T::one()) {
            out.push(Violation {
                option: Some(k),
                kind: ViolationKind::AllocationRange {
                    buyer,
                    item: j,
                    value: x.as_f64(),
                },
            });
        }
    }
}

impl<T: Scalar> Menu<T> for RochetMenu<T> {
    fn num_options(&self) -> usize {
        self.options.len()
    }

    fn num_buyers(&self) -> usize {
        1
    }

    fn num_items(&self) -> usize {
        self.n
    }

    fn check_congruent(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.options.len() != other.options.len() {
            return Err(Error::Congruence(format!(
                "rochet menus with (K+1, n) = ({}, {}) vs ({}, {})",
                self.options.len(),
                self.n,
                other.options.len(),
                other.n
            )));
        }
        Ok(())
    }

    fn interpolate(&self, other: &Self, lambda: T) -> Result<Self> {
        self.check_congruent(other)?;
        check_lambda(lambda)?;
        let options = self
            .options
            .iter()
            .zip(&other.options)
            .map(|(a, b)| RochetOption {
                allocation: a
                    .allocation
                    .iter()
                    .zip(&b.allocation)
                    .map(|(&x, &y)| lerp(x, y, lambda))
                    .collect(),
                price: lerp(a.price, b.price, lambda),
            })
            .collect();
        Ok(RochetMenu { n: self.n, options })
    }

    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.options.is_empty() {
            out.push(Violation {
                option: None,
                kind: ViolationKind::EmptyMenu,
            });
            return out;
        }
        for (k, o) in self.options.iter().enumerate() {
            if o.allocation.len() != self.n {
                out.push(Violation {
                    option: Some(k),
                    kind: ViolationKind::Shape(format!(
                        "allocation has {} entries, expected {}",
                        o.allocation.len(),
                        self.n
                    )),
                });
                continue;
            }
            if !o.price.is_finite() || o.allocation.iter().any(|x| !x.is_finite()) {
                out.push(Violation {
                    option: Some(k),
                    kind: ViolationKind::NonFinite,
                });
                continue;
            }
            push_alloc_range(&mut out, k, None, &o.allocation);
            if o.price < T::zero() {
                out.push(Violation {
                    option: Some(k),
                    kind: ViolationKind::NegativePrice(o.price.as_f64()),
                });
            }
        }
        let d = &self.options[0];
        if d.price != T::zero() || d.allocation.iter().any(|&x| x != T::zero()) {
            out.push(Violation {
                option: Some(0),
                kind: ViolationKind::DefaultOption,
            });
        }
        out
    }

    fn select(&self, indices: &[usize]) -> Self {
        RochetMenu {
            n: self.n,
            options: indices.iter().map(|&k| self.options[k].clone()).collect(),
        }
    }

    fn pad_with_default(&self, total: usize) -> Self {
        let mut options = self.options.clone();
        while options.len() < total {
            options.push(RochetOption::default_for(self.n));
        }
        RochetMenu { n: self.n, options }
    }

    fn max_param_gap(&self, other: &Self) -> T {
        let mut gap = T::zero();
        for (a, b) in self.options.iter().zip(&other.options) {
            gap = gap.max((a.price - b.price).abs());
            for (&x, &y) in a.allocation.iter().zip(&b.allocation) {
                gap = gap.max((x - y).abs());
            }
        }
        gap
    }
}

impl<T: Scalar> Menu<T> for AmaMenu<T> {
    fn num_options(&self) -> usize {
        self.options.len()
    }

    fn num_buyers(&self) -> usize {
        self.m
    }

    fn num_items(&self) -> usize {
        self.n
    }

    fn check_congruent(&self, other: &Self) -> Result<()> {
        if self.m != other.m || self.n != other.n || self.options.len() != other.options.len() {
            return Err(Error::Congruence(format!(
                "ama menus with (K+1, m, n) = ({}, {}, {}) vs ({}, {}, {})",
                self.options.len(),
                self.m,
                self.n,
                other.options.len(),
                other.m,
                other.n
            )));
        }
        Ok(())
    }

    fn interpolate(&self, other: &Self, lambda: T) -> Result<Self> {
        self.check_congruent(other)?;
        check_lambda(lambda)?;
        let options = self
            .options
            .iter()
            .zip(&other.options)
            .map(|(a, b)| AmaOption {
                allocation: a
                    .allocation
                    .iter()
                    .zip(&b.allocation)
                    .map(|(ra, rb)| {
                        ra.iter()
                            .zip(rb)
                            .map(|(&x, &y)| lerp(x, y, lambda))
                            .collect()
                    })
                    .collect(),
                boost: lerp(a.boost, b.boost, lambda),
            })
            .collect();
        Ok(AmaMenu {
            m: self.m,
            n: self.n,
            options,
        })
    }

    fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.options.is_empty() {
            out.push(Violation {
                option: None,
                kind: ViolationKind::EmptyMenu,
            });
            return out;
        }
        let tol = T::feasibility_tol();
        for (k, o) in self.options.iter().enumerate() {
            if o.allocation.len() != self.m || o.allocation.iter().any(|r| r.len() != self.n) {
                out.push(Violation {
                    option: Some(k),
                    kind: ViolationKind::Shape(format!(
                        "allocation is not a {}x{} matrix",
                        self.m, self.n
                    )),
                });
                continue;
            }
            if !o.boost.is_finite() || o.allocation.iter().flatten().any(|x| !x.is_finite()) {
                out.push(Violation {
                    option: Some(k),
                    kind: ViolationKind::NonFinite,
                });
                continue;
            }
            for (i, row) in o.allocation.iter().enumerate() {
                push_alloc_range(&mut out, k, Some(i), row);
            }
            for j in 0..self.n {
                let sum = o.allocation.iter().fold(T::zero(), |s, r| s + r[j]);
                if sum > T::one() + tol {
                    out.push(Violation {
                        option: Some(k),
                        kind: ViolationKind::UnitSupply {
                            item: j,
                            sum: sum.as_f64(),
                        },
                    });
                }
            }
        }
        let d = &self.options[0];
        if d.boost != T::zero() || d.allocation.iter().flatten().any(|&x| x != T::zero()) {
            out.push(Violation {
                option: Some(0),
                kind: ViolationKind::DefaultOption,
            });
        }
        out
    }

    fn select(&self, indices: &[usize]) -> Self {
        AmaMenu {
            m: self.m,
            n: self.n,
            options: indices.iter().map(|&k| self.options[k].clone()).collect(),
        }
    }

    fn pad_with_default(&self, total: usize) -> Self {
        let mut options = self.options.clone();
        while options.len() < total {
            options.push(AmaOption::default_for(self.m, self.n));
        }
        AmaMenu {
            m: self.m,
            n: self.n,
            options,
        }
    }

    fn max_param_gap(&self, other: &Self) -> T {
        let mut gap = T::zero();
        for (a, b) in self.options.iter().zip(&other.options) {
            gap = gap.max((a.boost - b.boost).abs());
            for (ra, rb) in a.allocation.iter().zip(&b.allocation) {
                for (&x, &y) in ra.iter().zip(rb) {
                    gap = gap.max((x - y).abs());
                }
            }
        }
        gap
    }
}

/// Either menu family, as read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "MenuDoc<T>", try_from = "MenuDoc<T>", bound = "T: Scalar")]
pub enum AnyMenu<T> {
    Rochet(RochetMenu<T>),
    Ama(AmaMenu<T>),
}

impl<T: Scalar> AnyMenu<T> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            AnyMenu::Rochet(_) => "rochet",
            AnyMenu::Ama(_) => "ama",
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        match self {
            AnyMenu::Rochet(m) => m.validate(),
            AnyMenu::Ama(m) => m.validate(),
        }
    }
}

impl<T: Scalar> From<RochetMenu<T>> for AnyMenu<T> {
    fn from(m: RochetMenu<T>) -> Self {
        AnyMenu::Rochet(m)
    }
}

impl<T: Scalar> From<AmaMenu<T>> for AnyMenu<T> {
    fn from(m: AmaMenu<T>) -> Self {
        AnyMenu::Ama(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum DocKind {
    Rochet,
    Ama,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged, bound = "T: Scalar")]
enum AllocationDoc<T> {
    Vector(Vec<T>),
    Matrix(Vec<Vec<T>>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct OptionDoc<T> {
    allocation: AllocationDoc<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    price: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    boost: Option<T>,
}

/// Wire format shared by both menu families.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
struct MenuDoc<T> {
    kind: DocKind,
    options: Vec<OptionDoc<T>>,
    m: usize,
    n: usize,
}

impl<T: Scalar> From<RochetMenu<T>> for MenuDoc<T> {
    fn from(menu: RochetMenu<T>) -> Self {
        MenuDoc {
            kind: DocKind::Rochet,
            m: 1,
            n: menu.n,
            options: menu
                .options
                .into_iter()
                .map(|o| OptionDoc {
                    allocation: AllocationDoc::Vector(o.allocation),
                    price: Some(o.price),
                    boost: None,
                })
                .collect(),
        }
    }
}

impl<T: Scalar> From<AmaMenu<T>> for MenuDoc<T> {
    fn from(menu: AmaMenu<T>) -> Self {
        MenuDoc {
            kind: DocKind::Ama,
            m: menu.m,
            n: menu.n,
            options: menu
                .options
                .into_iter()
                .map(|o| OptionDoc {
                    allocation: AllocationDoc::Matrix(o.allocation),
                    price: None,
                    boost: Some(o.boost),
                })
                .collect(),
        }
    }
}

impl<T: Scalar> From<AnyMenu<T>> for MenuDoc<T> {
    fn from(menu: AnyMenu<T>) -> Self {
        match menu {
            AnyMenu::Rochet(m) => m.into(),
            AnyMenu::Ama(m) => m.into(),
        }
    }
}

fn rochet_from_doc<T: Scalar>(doc: MenuDoc<T>) -> std::result::Result<RochetMenu<T>, String> {
    if doc.m != 1 {
        return Err(format!("rochet menu must have m = 1, got {}", doc.m));
    }
    let options = doc
        .options
        .into_iter()
        .enumerate()
        .map(|(k, o)| {
            let allocation = match o.allocation {
                AllocationDoc::Vector(v) => v,
                AllocationDoc::Matrix(_) => {
                    return Err(format!("options[{k}].allocation must be a vector"))
                }
            };
            if o.boost.is_some() {
                return Err(format!(
                    "options[{k}] has `boost`; rochet options carry `price`"
                ));
            }
            let price = o
                .price
                .ok_or_else(|| format!("options[{k}].price missing"))?;
            if allocation.len() != doc.n {
                return Err(format!(
                    "options[{k}].allocation has length {}, expected n = {}",
                    allocation.len(),
                    doc.n
                ));
            }
            Ok(RochetOption { allocation, price })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if options.is_empty() {
        return Err("options must contain at least the default option".into());
    }
    Ok(RochetMenu { n: doc.n, options })
}

fn ama_from_doc<T: Scalar>(doc: MenuDoc<T>) -> std::result::Result<AmaMenu<T>, String> {
    let (m, n) = (doc.m, doc.n);
    let options = doc
        .options
        .into_iter()
        .enumerate()
        .map(|(k, o)| {
            let allocation = match o.allocation {
                AllocationDoc::Matrix(rows) => rows,
                AllocationDoc::Vector(v) if v.is_empty() && m == 0 => Vec::new(),
                AllocationDoc::Vector(_) => {
                    return Err(format!("options[{k}].allocation must be an m x n matrix"))
                }
            };
            if o.price.is_some() {
                return Err(format!(
                    "options[{k}] has `price`; ama options carry `boost`"
                ));
            }
            let boost = o
                .boost
                .ok_or_else(|| format!("options[{k}].boost missing"))?;
            if allocation.len() != m || allocation.iter().any(|r| r.len() != n) {
                return Err(format!("options[{k}].allocation is not {m} x {n}"));
            }
            Ok(AmaOption { allocation, boost })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    if options.is_empty() {
        return Err("options must contain at least the default option".into());
    }
    Ok(AmaMenu { m, n, options })
}

impl<T: Scalar> TryFrom<MenuDoc<T>> for RochetMenu<T> {
    type Error = String;
    fn try_from(doc: MenuDoc<T>) -> std::result::Result<Self, String> {
        match doc.kind {
            DocKind::Rochet => rochet_from_doc(doc),
            DocKind::Ama => Err("expected kind \"rochet\", found \"ama\"".into()),
        }
    }
}

impl<T: Scalar> TryFrom<MenuDoc<T>> for AmaMenu<T> {
    type Error = String;
    fn try_from(doc: MenuDoc<T>) -> std::result::Result<Self, String> {
        match doc.kind {
            DocKind::Ama => ama_from_doc(doc),
            DocKind::Rochet => Err("expected kind \"ama\", found \"rochet\"".into()),
        }
    }
}

impl<T: Scalar> TryFrom<MenuDoc<T>> for AnyMenu<T> {
    type Error = String;
    fn try_from(doc: MenuDoc<T>) -> std::result::Result<Self, String> {
        match doc.kind {
            DocKind::Rochet => rochet_from_doc(doc).map(AnyMenu::Rochet),
            DocKind::Ama => ama_from_doc(doc).map(AnyMenu::Ama),
        }
    }
}

/// Piecewise-linear curve through congruent breakpoint menus.
///
/// Each of the `P = breakpoints.len() - 1` pieces occupies an equal
/// `t`-interval of length `1 / P`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "M: Serialize", deserialize = "M: Deserialize<'de>"))]
pub struct MenuPath<M> {
    breakpoints: Vec<M>,
}

impl<M> MenuPath<M> {
    pub fn breakpoints(&self) -> &[M] {
        &self.breakpoints
    }

    pub fn into_breakpoints(self) -> Vec<M> {
        self.breakpoints
    }

    pub fn num_pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn first(&self) -> &M {
        &self.breakpoints[0]
    }

    pub fn last(&self) -> &M {
        &self.breakpoints[self.breakpoints.len() - 1]
    }
}

impl<M> MenuPath<M> {
    pub fn new<T: Scalar>(breakpoints: Vec<M>) -> Result<Self>
    where
        M: Menu<T>,
    {
        if breakpoints.len() < 2 {
            return Err(Error::Structure(format!(
                "a path needs at least 2 breakpoints, got {}",
                breakpoints.len()
            )));
        }
        for b in &breakpoints[1..] {
            breakpoints[0].check_congruent(b)?;
        }
        Ok(MenuPath { breakpoints })
    }

    /// Menu at parameter `t` in `[0, 1]`.
    pub fn point<T: Scalar>(&self, t: T) -> Result<M>
    where
        M: Menu<T>,
    {
        path_point(self, t)
    }

    /// Splits `t` into (piece index, local parameter in `[0, 1]`).
    pub fn locate<T: Scalar>(&self, t: T) -> (usize, T) {
        let pieces = self.num_pieces();
        let scaled = t * T::lit(pieces as f64);
        let nearest = scaled.round();
        let snapped =
            if (scaled - nearest).abs() <= T::lit(8.0) * T::epsilon() * T::lit(pieces as f64) {
                nearest
            } else {
                scaled
            };
        let q = snapped.floor().to_usize().unwrap_or(0).min(pieces - 1);
        let local = (snapped - T::lit(q as f64)).max(T::zero()).min(T::one());
        (q, local)
    }
}

/// Menu at parameter `t` along `path`.
pub fn path_point<T: Scalar, M: Menu<T>>(path: &MenuPath<M>, t: T) -> Result<M> {
    if path.breakpoints.len() < 2 {
        return Err(Error::Structure("path has fewer than 2 breakpoints".into()));
    }
    if !(t >= T::zero() && t <= T::one()) {
        return Err(Error::param("t", format!("{t} outside [0, 1]")));
    }
    let (q, s) = path.locate(t);
    let (from, to) = (&path.breakpoints[q], &path.breakpoints[q + 1]);
    if s == T::zero() {
        Ok(from.clone())
    } else if s == T::one() {
        Ok(to.clone())
    } else {
        to.interpolate(from, s)
    }
}
