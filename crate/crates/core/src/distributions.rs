//! Valuation distributions, deterministic samplers and exact 1-D revenue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::menu::{Menu, Profile, RochetMenu, RochetOption, Valuation};
use crate::rochet::active_option_raw;
use crate::scalar::Scalar;

/// One constant-density segment ending at `upto`; segments start where the
/// previous one ends (the first at 0).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub upto: f64,
    pub density: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DensityKind {
    /// iid U[0,1] per item; with `rescale` every entry is divided by `n`.
    UniformBox {
        #[serde(default)]
        rescale: bool,
    },
    /// Uniform on `{v in [0,1]^n : sum v <= 1}` by rejection, `n <= 4`.
    SimplexRejection,
    /// Piecewise-constant density on [0,1], single item only.
    #[serde(rename = "piecewise_1d")]
    Piecewise1d { pieces: Vec<Piece> },
    /// Independent buyers, one spec each.
    ProductOf { buyers: Vec<DensitySpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    #[serde(flatten)]
    pub kind: DensityKind,
    /// Upper bound on the density of one buyer's valuation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_bound: Option<f64>,
}

const SIMPLEX_MAX_ITEMS: usize = 4;
const INTEGRAL_TOL: f64 = 1e-9;

impl DensitySpec {
    pub fn new(kind: DensityKind) -> Self {
        DensitySpec {
            kind,
            density_bound: None,
        }
    }

    pub fn uniform() -> Self {
        Self::new(DensityKind::UniformBox { rescale: false })
    }

    pub fn with_density_bound(mut self, bound: f64) -> Self {
        self.density_bound = Some(bound);
        self
    }

    pub fn piecewise(pieces: Vec<Piece>) -> Result<Self> {
        let spec = Self::new(DensityKind::Piecewise1d { pieces });
        spec.validate()?;
        Ok(spec)
    }

    /// Density 1.5 on (0, 1/3 + 0.15], 0 on (1/3 + 0.15, 2/3 + 0.15] and 1.5
    /// on the rest. Revenue of a single posted price is not quasiconcave in
    /// the price under this density.
    pub fn bimodal() -> Self {
        let a = 1.0 / 3.0 + 0.15;
        let b = 2.0 / 3.0 + 0.15;
        Self::new(DensityKind::Piecewise1d {
            pieces: vec![
                Piece {
                    upto: a,
                    density: 1.5,
                },
                Piece {
                    upto: b,
                    density: 0.0,
                },
                Piece {
                    upto: 1.0,
                    density: 1.5,
                },
            ],
        })
        .with_density_bound(1.5)
    }

    /// Supremum of one buyer's valuation density on `n` items.
    pub fn max_density(&self, n: usize) -> f64 {
        match &self.kind {
            DensityKind::UniformBox { rescale: false } => 1.0,
            DensityKind::UniformBox { rescale: true } => (n as f64).powi(n as i32),
            DensityKind::SimplexRejection => (1..=n).map(|k| k as f64).product(),
            DensityKind::Piecewise1d { pieces } => {
                pieces.iter().map(|p| p.density).fold(0.0, f64::max)
            }
            DensityKind::ProductOf { buyers } => {
                buyers.iter().map(|b| b.max_density(n)).fold(0.0, f64::max)
            }
        }
    }

    /// Structural checks independent of the profile shape.
    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            DensityKind::Piecewise1d { pieces } => {
                if pieces.is_empty() {
                    return Err(Error::Spec("piecewise_1d needs at least one piece".into()));
                }
                let mut lo = 0.0;
                let mut mass = 0.0;
                for (i, p) in pieces.iter().enumerate() {
                    if !(p.upto > lo) || !(p.density >= 0.0) || !p.density.is_finite() {
                        return Err(Error::Spec(format!(
                            "piece {i} (upto {}, density {}) is not increasing or has a bad density",
                            p.upto, p.density
                        )));
                    }
                    mass += (p.upto - lo) * p.density;
                    lo = p.upto;
                }
                if (lo - 1.0).abs() > 1e-12 {
                    return Err(Error::Spec(format!("last piece ends at {lo}, expected 1")));
                }
                if (mass - 1.0).abs() > INTEGRAL_TOL {
                    return Err(Error::Spec(format!(
                        "density integrates to {mass}, expected 1"
                    )));
                }
            }
            DensityKind::ProductOf { buyers } => {
                for b in buyers {
                    if matches!(b.kind, DensityKind::ProductOf { .. }) {
                        return Err(Error::Spec("product_of cannot be nested".into()));
                    }
                    b.validate()?;
                }
            }
            _ => {}
        }
        if let Some(bound) = self.density_bound {
            if let DensityKind::Piecewise1d { .. } = self.kind {
                let sup = self.max_density(1);
                if bound < sup {
                    return Err(Error::Spec(format!(
                        "density_bound {bound} is below the supremum density {sup}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that profiles of `m` buyers and `n` items can be drawn.
    pub fn check_shape(&self, m: usize, n: usize) -> Result<()> {
        self.validate()?;
        if m == 0 || n == 0 {
            return Err(Error::Spec(format!("cannot sample {m} buyers x {n} items")));
        }
        match &self.kind {
            DensityKind::ProductOf { buyers } => {
                if buyers.len() != m {
                    return Err(Error::Spec(format!(
                        "product_of lists {} buyers but the mechanism has {m}",
                        buyers.len()
                    )));
                }
                buyers.iter().try_for_each(|b| b.check_buyer(n))
            }
            _ => self.check_buyer(n),
        }
    }

    fn check_buyer(&self, n: usize) -> Result<()> {
        match &self.kind {
            DensityKind::UniformBox { rescale: false } if n > 1 => Err(Error::Spec(format!(
                "uniform_box without rescale violates sum v <= 1 for n = {n}"
            ))),
            DensityKind::SimplexRejection if n > SIMPLEX_MAX_ITEMS => Err(Error::Spec(format!(
                "simplex_rejection supports at most {SIMPLEX_MAX_ITEMS} items, got {n}"
            ))),
            DensityKind::Piecewise1d { .. } if n != 1 => Err(Error::Spec(format!(
                "piecewise_1d is single-item, got n = {n}"
            ))),
            _ => Ok(()),
        }
    }

    fn draw_buyer<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match &self.kind {
            DensityKind::UniformBox { rescale } => {
                let scale = if *rescale { 1.0 / n as f64 } else { 1.0 };
                (0..n).map(|_| rng.random::<f64>() * scale).collect()
            }
            DensityKind::SimplexRejection => loop {
                let v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
                if v.iter().sum::<f64>() <= 1.0 {
                    break v;
                }
            },
            DensityKind::Piecewise1d { pieces } => vec![inverse_cdf(pieces, rng.random::<f64>())],
            DensityKind::ProductOf { .. } => unreachable!("checked by check_shape"),
        }
    }
}

fn inverse_cdf(pieces: &[Piece], u: f64) -> f64 {
    let mut lo = 0.0;
    let mut acc = 0.0;
    for p in pieces {
        let mass = (p.upto - lo) * p.density;
        if p.density > 0.0 && u < acc + mass {
            return (lo + (u - acc) / p.density).min(p.upto);
        }
        acc += mass;
        lo = p.upto;
    }
    // only reachable through rounding in the accumulated mass
    pieces
        .iter()
        .rev()
        .find(|p| p.density > 0.0)
        .map_or(1.0, |p| p.upto)
}

/// Counter-based sampler: profile `i` depends only on `(seed, i)`.
#[derive(Clone, Debug)]
pub struct SeededSampler {
    spec: DensitySpec,
    seed: u64,
    position: u64,
    base: ChaCha8Rng,
}

impl SeededSampler {
    pub fn new(spec: DensitySpec, seed: u64) -> Self {
        SeededSampler {
            spec,
            seed,
            position: 0,
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn spec(&self) -> &DensitySpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn set_position(&mut self, position: u64) {
        self.position = position;
    }

    /// Profile number `index`, without touching the stream position.
    pub fn profile_at<T: Scalar>(&self, index: u64, m: usize, n: usize) -> Result<Profile<T>> {
        self.spec.check_shape(m, n)?;
        Ok(self.draw(index, m, n))
    }

    fn draw<T: Scalar>(&self, index: u64, m: usize, n: usize) -> Profile<T> {
        let mut rng = self.base.clone();
        rng.set_stream(index);
        let buyers = (0..m)
            .map(|i| {
                let spec = match &self.spec.kind {
                    DensityKind::ProductOf { buyers } => &buyers[i],
                    _ => &self.spec,
                };
                let v = spec.draw_buyer(n, &mut rng);
                Valuation::new_unchecked(v.into_iter().map(T::lit).collect())
            })
            .collect();
        Profile::from_unchecked(buyers)
    }

    /// Next profile in the stream.
    pub fn sample_profile<T: Scalar>(&mut self, m: usize, n: usize) -> Result<Profile<T>> {
        let p = self.profile_at(self.position, m, n)?;
        self.position += 1;
        Ok(p)
    }

    /// `count` consecutive profiles starting at `start`, drawn in parallel.
    pub fn batch<T: Scalar>(
        &self,
        start: u64,
        count: usize,
        m: usize,
        n: usize,
    ) -> Result<Vec<Profile<T>>> {
        self.spec.check_shape(m, n)?;
        Ok((0..count as u64)
            .into_par_iter()
            .map(|i| self.draw(start + i, m, n))
            .collect())
    }
}

/// Draws `N` profiles with a fresh sampler; convenience for evaluation.
pub fn sample_profiles<T: Scalar>(
    spec: &DensitySpec,
    seed: u64,
    count: usize,
    m: usize,
    n: usize,
) -> Result<Vec<Profile<T>>> {
    SeededSampler::new(spec.clone(), seed).batch(0, count, m, n)
}

/// `F(t)` for a single-item spec; `t` is clamped to [0,1].
pub fn cdf_1d(spec: &DensitySpec, t: f64) -> Result<f64> {
    let t = t.clamp(0.0, 1.0);
    match &spec.kind {
        DensityKind::UniformBox { .. } => Ok(t),
        DensityKind::Piecewise1d { pieces } => {
            if pieces.last().is_some_and(|p| t >= p.upto) {
                return Ok(1.0);
            }
            let mut lo = 0.0;
            let mut acc = 0.0;
            for p in pieces {
                if t <= p.upto {
                    return Ok((acc + (t - lo) * p.density).min(1.0));
                }
                acc += (p.upto - lo) * p.density;
                lo = p.upto;
            }
            Ok(acc.min(1.0))
        }
        _ => Err(Error::Spec(format!(
            "cdf_1d needs a single-item spec, got {:?}",
            spec.kind
        ))),
    }
}

/// Exact expected revenue of a single-item menu: the buyer's choice is
/// constant between consecutive utility crossings, so the revenue is a sum
/// of `price * (F(b) - F(a))` over those intervals.
pub fn analytic_revenue_1d<T: Scalar>(menu: &RochetMenu<T>, spec: &DensitySpec) -> Result<f64> {
    if menu.num_items() != 1 {
        return Err(Error::Spec(format!(
            "analytic revenue needs n = 1, got n = {}",
            menu.num_items()
        )));
    }
    cdf_1d(spec, 0.0)?;
    let opts: Vec<(f64, f64)> = menu
        .options()
        .iter()
        .map(|o| (o.allocation[0].as_f64(), o.price.as_f64()))
        .collect();
    let mut cuts = vec![0.0, 1.0];
    for (a, &(xa, pa)) in opts.iter().enumerate() {
        for &(xb, pb) in &opts[a + 1..] {
            if xa != xb {
                let v = (pa - pb) / (xa - xb);
                if v > 0.0 && v < 1.0 {
                    cuts.push(v);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let as_menu: RochetMenu<f64> = RochetMenu::from_options(
        1,
        opts.iter()
            .map(|&(x, p)| RochetOption::new(vec![x], p))
            .collect(),
    );
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let mass = cdf_1d(spec, w[1])? - cdf_1d(spec, w[0])?;
        if mass > 0.0 {
            let mid = 0.5 * (w[0] + w[1]);
            total += opts[active_option_raw(&as_menu, &[mid])].1 * mass;
        }
    }
    Ok(total)
}

/// `count` evenly spaced points `i / (count - 1)` on [0,1].
pub fn unit_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| i as f64 / (count - 1) as f64).collect(),
    }
}

/// `rows[i][j]` is the revenue of the one-option menu `(xs[i], ps[j])`.
pub fn landscape_grid(spec: &DensitySpec, xs: &[f64], ps: &[f64]) -> Result<Vec<Vec<f64>>> {
    xs.iter()
        .map(|&x| {
            ps.iter()
                .map(|&p| {
                    let menu = RochetMenu::from_pairs(1, &[(&[x], p)])?;
                    analytic_revenue_1d(&menu, spec)
                })
                .collect()
        })
        .collect()
}

/// Indices `j` with `row[j-1] < row[j] > row[j+1]`.
pub fn strict_local_maxima(row: &[f64]) -> Vec<usize> {
    (1..row.len().saturating_sub(1))
        .filter(|&j| row[j] > row[j - 1] && row[j] > row[j + 1])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bimodal_cdf_values() {
        let s = DensitySpec::bimodal();
        s.validate().unwrap();
        assert!((cdf_1d(&s, 0.4).unwrap() - 0.6).abs() < 1e-12);
        assert!((cdf_1d(&s, 0.6).unwrap() - 0.725).abs() < 1e-12);
        assert_eq!(cdf_1d(&s, 1.0).unwrap(), 1.0);
        assert_eq!(cdf_1d(&s, 0.0).unwrap(), 0.0);
        assert_eq!(cdf_1d(&s, -3.0).unwrap(), 0.0);
        assert_eq!(cdf_1d(&s, 7.0).unwrap(), 1.0);
    }

    #[test]
    fn cdf_matches_quadrature() {
        let s = DensitySpec::bimodal();
        let DensityKind::Piecewise1d { pieces } = &s.kind else {
            unreachable!()
        };
        let density = |v: f64| {
            let mut lo = 0.0;
            for p in pieces {
                if v > lo && v <= p.upto {
                    return p.density;
                }
                lo = p.upto;
            }
            0.0
        };
        for t in [0.1, 0.3, 0.483, 0.5, 0.7, 0.9, 1.0] {
            let steps = 400_000;
            let h = t / steps as f64;
            // midpoint rule is exact away from the breakpoints
            let q: f64 = (0..steps).map(|i| density((i as f64 + 0.5) * h) * h).sum();
            assert!((q - cdf_1d(&s, t).unwrap()).abs() < 1e-5, "t={t}");
        }
    }

    #[test]
    fn bimodal_revenues() {
        let s = DensitySpec::bimodal();
        for (p, want) in [(0.36, 0.1656), (0.84, 0.2016), (0.6, 0.165)] {
            let m = RochetMenu::from_pairs(1, &[(&[1.0], p)]).unwrap();
            assert!(
                (analytic_revenue_1d(&m, &s).unwrap() - want).abs() < 1e-12,
                "p={p}"
            );
        }
    }

    #[test]
    fn uniform_posted_price() {
        let m = RochetMenu::from_pairs(1, &[(&[1.0], 0.5)]).unwrap();
        let r = analytic_revenue_1d(&m, &DensitySpec::uniform()).unwrap();
        assert!((r - 0.25).abs() < 1e-15);
    }

    #[test]
    fn multi_option_revenue_matches_direct_integration() {
        let m = RochetMenu::from_pairs(1, &[(&[0.5], 0.1), (&[1.0], 0.45)]).unwrap();
        // buy x=0.5 on [0.2, 0.7), x=1 above
        let want = 0.1 * 0.5 + 0.45 * 0.3;
        let r = analytic_revenue_1d(&m, &DensitySpec::uniform()).unwrap();
        assert!((r - want).abs() < 1e-12);
    }

    #[test]
    fn landscape_row_has_two_peaks() {
        let s = DensitySpec::bimodal();
        let ps = unit_grid(201);
        let rows = landscape_grid(&s, &[0.0, 1.0], &ps).unwrap();
        assert!(rows[0].iter().all(|&r| r == 0.0));
        assert_eq!(rows[1][0], 0.0);
        assert_eq!(strict_local_maxima(&rows[1]).len(), 2);
        assert!((rows[1][72] - 0.1656).abs() < 1e-12);
    }

    #[test]
    fn bad_specs() {
        assert!(DensitySpec::piecewise(vec![Piece {
            upto: 1.0,
            density: 0.5
        }])
        .is_err());
        assert!(DensitySpec::piecewise(vec![Piece {
            upto: 0.8,
            density: 1.25
        }])
        .is_err());
        assert!(DensitySpec::bimodal().check_shape(1, 2).is_err());
        assert!(DensitySpec::uniform().check_shape(1, 2).is_err());
        let simplex = DensitySpec::new(DensityKind::SimplexRejection);
        assert!(simplex.check_shape(1, 5).is_err());
        let prod = DensitySpec::new(DensityKind::ProductOf {
            buyers: vec![DensitySpec::uniform()],
        });
        assert!(prod.check_shape(2, 1).is_err());
        assert!(prod.check_shape(1, 1).is_ok());
        assert!(DensitySpec::bimodal()
            .with_density_bound(1.0)
            .validate()
            .is_err());
    }

    #[test]
    fn sampler_is_deterministic_and_counter_based() {
        let s = SeededSampler::new(DensitySpec::uniform(), 7);
        let a: Profile<f64> = s.profile_at(12, 2, 1).unwrap();
        let b: Profile<f64> = s.profile_at(12, 2, 1).unwrap();
        assert_eq!(a, b);
        let mut seq = SeededSampler::new(DensitySpec::uniform(), 7);
        seq.set_position(12);
        assert_eq!(seq.sample_profile::<f64>(2, 1).unwrap(), a);
        assert_eq!(seq.position(), 13);
        let batch: Vec<Profile<f64>> = s.batch(10, 5, 2, 1).unwrap();
        assert_eq!(batch[2], a);
        let other: Profile<f64> = SeededSampler::new(DensitySpec::uniform(), 8)
            .profile_at(12, 2, 1)
            .unwrap();
        assert_ne!(other, a);
    }

    #[test]
    fn simplex_samples_respect_budget() {
        let spec = DensitySpec::new(DensityKind::SimplexRejection);
        let ps: Vec<Profile<f64>> = sample_profiles(&spec, 3, 20_000, 1, 2).unwrap();
        assert!(ps.iter().all(|p| p.buyer(0).iter().sum::<f64>() <= 1.0));
    }

    #[test]
    fn uniform_mean() {
        let ps: Vec<Profile<f64>> =
            sample_profiles(&DensitySpec::uniform(), 1, 1_000_000, 1, 1).unwrap();
        let mean = ps.iter().map(|p| p.buyer(0)[0]).sum::<f64>() / 1e6;
        let sigma = (1.0f64 / 12.0).sqrt() / 1e3;
        assert!((mean - 0.5).abs() < 3.0 * sigma, "{mean}");
    }

    #[test]
    fn bimodal_sample_cdf() {
        let ps: Vec<Profile<f64>> =
            sample_profiles(&DensitySpec::bimodal(), 2, 1_000_000, 1, 1).unwrap();
        let freq = ps.iter().filter(|p| p.buyer(0)[0] <= 0.4).count() as f64 / 1e6;
        let sigma = (0.6f64 * 0.4).sqrt() / 1e3;
        assert!((freq - 0.6).abs() < 3.0 * sigma, "{freq}");
        // nothing lands in the empty middle piece
        let a = 1.0 / 3.0 + 0.15;
        let b = 2.0 / 3.0 + 0.15;
        assert!(ps
            .iter()
            .all(|p| !(p.buyer(0)[0] > a && p.buyer(0)[0] <= b)));
    }

    #[test]
    fn spec_json_shape() {
        let s = DensitySpec::bimodal();
        let j = serde_json::to_value(&s).unwrap();
        assert_eq!(j["kind"], "piecewise_1d");
        assert_eq!(j["pieces"].as_array().unwrap().len(), 3);
        assert_eq!(j["density_bound"], 1.5);
        let back: DensitySpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        let u: DensitySpec =
            serde_json::from_str(r#"{"kind":"uniform_box","rescale":true}"#).unwrap();
        assert_eq!(u.kind, DensityKind::UniformBox { rescale: true });
        let p: DensitySpec = serde_json::from_str(
            r#"{"kind":"product_of","buyers":[{"kind":"uniform_box"},{"kind":"simplex_rejection"}]}"#,
        )
        .unwrap();
        assert!(p.check_shape(2, 1).is_ok());
    }
}
