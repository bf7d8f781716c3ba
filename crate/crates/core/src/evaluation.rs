//! Monte-Carlo revenue estimates, path audits, empirical reducibility and
//! softmax-gap bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connectivity::ReductionSet;
use crate::distributions::{sample_profiles, DensitySpec};
use crate::error::{Error, Result};
use crate::menu::{path_point, AmaMenu, Mechanism, Menu, MenuPath, Profile, RochetMenu};
use crate::rochet::SoftmaxConfig;
use crate::scalar::Scalar;

/// Samples per parallel work unit; partial sums are combined in unit order,
/// so results do not depend on the thread count.
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Scalar")]
pub enum Smoothing<T> {
    None,
    Softmax { temperature: T },
}

impl<T: Scalar> Smoothing<T> {
    fn evaluate<M: Mechanism<T>>(&self, menu: &M, profile: &Profile<T>) -> T {
        match *self {
            Smoothing::None => menu.revenue(profile),
            Smoothing::Softmax { temperature } => {
                menu.softmax_revenue(profile, &SoftmaxConfig { temperature })
            }
        }
    }
}

/// Sample mean with its standard error `s / sqrt(N)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    count: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn merge(mut self, other: Moments) -> Moments {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
        self
    }

    fn estimate(&self) -> Estimate {
        let n = self.count as f64;
        let mean = if self.count == 0 { 0.0 } else { self.sum / n };
        let stderr = if self.count < 2 {
            0.0
        } else {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        };
        Estimate {
            mean,
            stderr,
            samples: self.count,
        }
    }
}

/// Mean and standard error of `f` over `values`, in deterministic order.
pub fn estimate_over<P: Sync>(values: &[P], f: impl Fn(&P) -> f64 + Sync) -> Estimate {
    values
        .par_chunks(CHUNK)
        .map(|c| {
            let mut m = Moments::default();
            c.iter().for_each(|p| m.push(f(p)));
            m
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Moments::default(), Moments::merge)
        .estimate()
}

/// Monte-Carlo revenue over `samples` profiles drawn from `spec`.
pub fn mc_revenue<T: Scalar, M: Mechanism<T>>(
    menu: &M,
    spec: &DensitySpec,
    samples: usize,
    seed: u64,
    smoothing: Smoothing<T>,
) -> Result<Estimate> {
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let profiles = sample_profiles::<T>(spec, seed, samples, menu.num_buyers(), menu.num_items())?;
    Ok(mc_revenue_on(menu, &profiles, smoothing))
}

/// Same as [`mc_revenue`] on a fixed sample set.
pub fn mc_revenue_on<T: Scalar, M: Mechanism<T>>(
    menu: &M,
    profiles: &[Profile<T>],
    smoothing: Smoothing<T>,
) -> Estimate {
    estimate_over(profiles, |p| smoothing.evaluate(menu, p).as_f64())
}

/// Per-`t` revenue estimates along a path, using one sample set throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathReport {
    pub t: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// `min_s r_s(t) - (min(r_s(0), r_s(1)) - epsilon)` for each `t`.
    pub min_slack: Vec<f64>,
    pub epsilon: f64,
    /// `min(endpoint estimates) - epsilon - 3 * max stderr`.
    pub threshold: f64,
    pub pass: bool,
}

impl PathReport {
    pub fn min_estimate(&self) -> f64 {
        self.estimates
            .iter()
            .map(|e| e.mean)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest per-sample slack over every audited `(sample, t)`.
    pub fn worst_slack(&self) -> f64 {
        self.min_slack.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
struct PathAcc {
    moments: Vec<Moments>,
    slack: Vec<f64>,
}

impl PathAcc {
    fn new(points: usize) -> Self {
        PathAcc {
            moments: vec![Moments::default(); points],
            slack: vec![f64::INFINITY; points],
        }
    }

    fn merge(mut self, other: PathAcc) -> PathAcc {
        for (a, b) in self.moments.iter_mut().zip(other.moments) {
            *a = a.merge(b);
        }
        for (a, b) in self.slack.iter_mut().zip(other.slack) {
            *a = a.min(b);
        }
        self
    }
}

/// Audit on `points` evenly spaced `t`, drawing `samples` profiles.
pub fn path_audit<T: Scalar, M: Mechanism<T>>(
    path: &MenuPath<M>,
    spec: &DensitySpec,
    samples: usize,
    points: usize,
    epsilon: f64,
    seed: u64,
) -> Result<PathReport> {
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let first = path.first();
    let profiles =
        sample_profiles::<T>(spec, seed, samples, first.num_buyers(), first.num_items())?;
    path_audit_on(path, &profiles, points, epsilon)
}

/// [`path_audit`] on a fixed sample set.
pub fn path_audit_on<T: Scalar, M: Mechanism<T>>(
    path: &MenuPath<M>,
    profiles: &[Profile<T>],
    points: usize,
    epsilon: f64,
) -> Result<PathReport> {
    if points < 2 {
        return Err(Error::param(
            "points",
            format!("need at least 2 grid points, got {points}"),
        ));
    }
    let ts: Vec<f64> = (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect();
    let menus = ts
        .iter()
        .map(|&t| path_point(path, T::lit(t)))
        .collect::<Result<Vec<M>>>()?;
    let last = points - 1;
    let acc = profiles
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = PathAcc::new(points);
            let mut r = vec![0.0; points];
            for p in chunk {
                for (ri, m) in r.iter_mut().zip(&menus) {
                    *ri = m.revenue(p).as_f64();
                }
                let floor = r[0].min(r[last]) - epsilon;
                for (i, &ri) in r.iter().enumerate() {
                    acc.moments[i].push(ri);
                    acc.slack[i] = acc.slack[i].min(ri - floor);
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(PathAcc::new(points), PathAcc::merge);
    let estimates: Vec<Estimate> = acc.moments.iter().map(Moments::estimate).collect();
    let max_se = estimates.iter().map(|e| e.stderr).fold(0.0, f64::max);
    let threshold = estimates[0].mean.min(estimates[last].mean) - epsilon - 3.0 * max_se;
    let min_est = estimates
        .iter()
        .map(|e| e.mean)
        .fold(f64::INFINITY, f64::min);
    Ok(PathReport {
        t: ts,
        estimates,
        min_slack: acc.slack,
        epsilon,
        threshold,
        pass: min_est >= threshold,
    })
}

/// Greedy reduction set and the achieved miss frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducibilityReport {
    pub selected: ReductionSet,
    /// Fraction of samples with some selected option outside `selected`.
    pub epsilon_hat: f64,
    pub samples: usize,
    /// Required event frequency, `1 - epsilon / m`.
    pub target: f64,
    pub cap: usize,
    /// `epsilon_hat` after each greedy addition, starting from `{0}`.
    pub trajectory: Vec<f64>,
    /// Frequency of the event that every selected option (the winner and,
    /// for auctions, all winners without one buyer) lies in `selected`.
    pub event_frequency: f64,
}

/// Greedy set: options ordered by how often they are selected, added until
/// the event frequency reaches `1 - epsilon / m` or the set reaches
/// `floor(sqrt(K+1))` members.
pub fn estimate_reducibility<T: Scalar, M: Mechanism<T>>(
    menu: &M,
    spec: &DensitySpec,
    samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<ReducibilityReport> {
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let profiles = sample_profiles::<T>(spec, seed, samples, menu.num_buyers(), menu.num_items())?;
    Ok(estimate_reducibility_on(menu, &profiles, epsilon))
}

/// [`estimate_reducibility`] on a fixed sample set.
pub fn estimate_reducibility_on<T: Scalar, M: Mechanism<T>>(
    menu: &M,
    profiles: &[Profile<T>],
    epsilon: f64,
) -> ReducibilityReport {
    let options = menu.num_options();
    let selections: Vec<Vec<usize>> = profiles
        .par_iter()
        .map(|p| {
            let mut sel = Vec::new();
            menu.selected_options(p, &mut sel);
            sel.sort_unstable();
            sel.dedup();
            sel
        })
        .collect();
    let mut freq = vec![0usize; options];
    for sel in &selections {
        for &k in sel {
            freq[k] += 1;
        }
    }
    let mut order: Vec<usize> = (1..options).collect();
    order.sort_by(|&a, &b| freq[b].cmp(&freq[a]).then(a.cmp(&b)));
    order.insert(0, 0);
    let mut rank = vec![0usize; options];
    for (r, &k) in order.iter().enumerate() {
        rank[k] = r;
    }
    // a sample is covered by the first `s` options in `order` iff the
    // largest rank among its selections is below `s`
    let mut by_rank = vec![0usize; options];
    for sel in &selections {
        by_rank[sel.iter().map(|&k| rank[k]).max().unwrap_or(0)] += 1;
    }

    let n = profiles.len().max(1) as f64;
    let target = 1.0 - epsilon / menu.num_buyers() as f64;
    let cap = ReductionSet::cap(options).max(1);
    let mut covered = 0usize;
    let mut size = 0;
    let mut trajectory = Vec::new();
    while size < cap {
        covered += by_rank[size];
        size += 1;
        let frequency = covered as f64 / n;
        trajectory.push(1.0 - frequency);
        if frequency >= target {
            break;
        }
    }
    let event_frequency = covered as f64 / n;
    ReducibilityReport {
        selected: ReductionSet::new(order[..size].iter().copied()).expect("0 is first"),
        epsilon_hat: 1.0 - event_frequency,
        samples: profiles.len(),
        target,
        cap,
        trajectory,
        event_frequency,
    }
}

fn check_gap_inputs(temperature: f64, density_bound: f64) -> Result<()> {
    if !(temperature >= 1.0) {
        return Err(Error::param(
            "temperature",
            format!("must be >= 1, got {temperature}"),
        ));
    }
    if !(density_bound > 0.0) {
        return Err(Error::param(
            "density_bound",
            format!("must be > 0, got {density_bound}"),
        ));
    }
    if temperature < density_bound {
        return Err(Error::param(
            "temperature",
            format!("bound needs temperature >= density bound {density_bound}, got {temperature}"),
        ));
    }
    Ok(())
}

/// `(K+1)/Y * ((nX + 1 + X/Y) ln(Y/X) + X)` for a single-buyer menu.
pub fn rochet_gap_bound(
    num_options: usize,
    n: usize,
    temperature: f64,
    density_bound: f64,
) -> Result<f64> {
    check_gap_inputs(temperature, density_bound)?;
    let (k1, y, x) = (num_options as f64, temperature, density_bound);
    Ok(k1 / y * ((n as f64 * x + 1.0 + x / y) * (y / x).ln() + x))
}

/// `m(K+1)/(eY) + n m X (K+1)/Y * (1 + ln(mY/(mX)))` for an auction.
pub fn ama_gap_bound(
    num_options: usize,
    n: usize,
    m: usize,
    temperature: f64,
    density_bound: f64,
) -> Result<f64> {
    check_gap_inputs(temperature, density_bound)?;
    let (k1, y, x, m, n) = (
        num_options as f64,
        temperature,
        density_bound,
        m as f64,
        n as f64,
    );
    Ok(m * k1 / (std::f64::consts::E * y) + n * m * x * k1 / y * (1.0 + (m * y / (m * x)).ln()))
}

/// Closed-form bound on `|Rev - Rev^softmax|` for a menu's shape.
pub trait GapBound {
    fn gap_bound(&self, temperature: f64, density_bound: f64) -> Result<f64>;
}

impl<T: Scalar> GapBound for RochetMenu<T> {
    fn gap_bound(&self, temperature: f64, density_bound: f64) -> Result<f64> {
        rochet_gap_bound(
            self.num_options(),
            self.num_items(),
            temperature,
            density_bound,
        )
    }
}

impl<T: Scalar> GapBound for AmaMenu<T> {
    fn gap_bound(&self, temperature: f64, density_bound: f64) -> Result<f64> {
        ama_gap_bound(
            self.num_options(),
            self.num_items(),
            self.num_buyers(),
            temperature,
            density_bound,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub temperature: f64,
    pub density_bound: f64,
    pub bound: f64,
    /// Estimate of `Rev - Rev^softmax` on common samples.
    pub empirical: Estimate,
    /// `|empirical| <= bound + 4 * stderr`.
    pub within_bound: bool,
}

/// Closed-form bound from the density bound, next to the Monte-Carlo gap.
pub fn softmax_gap_report<T: Scalar, M: Mechanism<T> + GapBound>(
    menu: &M,
    spec: &DensitySpec,
    temperature: f64,
    samples: usize,
    seed: u64,
) -> Result<GapReport> {
    let density_bound = spec.density_bound.ok_or_else(|| {
        Error::Spec("softmax gap bound needs density_bound on the density".into())
    })?;
    let bound = menu.gap_bound(temperature, density_bound)?;
    if samples == 0 {
        return Err(Error::param("samples", "must be at least 1"));
    }
    let cfg = SoftmaxConfig::new(T::lit(temperature))?;
    let profiles = sample_profiles::<T>(spec, seed, samples, menu.num_buyers(), menu.num_items())?;
    let empirical = estimate_over(&profiles, |p| {
        (menu.revenue(p) - menu.softmax_revenue(p, &cfg)).as_f64()
    });
    Ok(GapReport {
        temperature,
        density_bound,
        bound,
        within_bound: empirical.mean.abs() <= bound + 4.0 * empirical.stderr,
        empirical,
    })
}
