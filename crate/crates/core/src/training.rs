//! Stochastic gradient ascent on the softmax-smoothed revenue.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ama::{softmax_payment_gradient, AmaGradient};
use crate::distributions::{sample_profiles, DensitySpec, SeededSampler};
use crate::error::{Error, Result};
use crate::evaluation::{mc_revenue_on, Smoothing};
use crate::menu::{AmaMenu, AmaOption, AnyMenu, Menu, Profile, RochetMenu, RochetOption};
use crate::rochet::{softmax_revenue_gradient, RochetGradient, SoftmaxConfig};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MenuKind {
    Rochet,
    Ama,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Allocations and prices iid U[0,1], boosts iid U[-0.1, 0].
    #[default]
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Clip to [0,1], rescale over-supplied item columns, clamp prices at 0.
    #[default]
    ClipRescale,
}

fn default_eval_samples() -> usize {
    20_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Number of regular options `K`.
    pub options: usize,
    /// Softmax temperature `Y`.
    pub temperature: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default)]
    pub init: InitScheme,
    #[serde(default)]
    pub projection: Projection,
    /// Argmax revenue is estimated every `eval_every` steps and after the
    /// last one; 0 evaluates only at the end.
    #[serde(default)]
    pub eval_every: usize,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
}

impl TrainConfig {
    pub fn new(
        options: usize,
        temperature: f64,
        steps: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
    ) -> Self {
        TrainConfig {
            options,
            temperature,
            steps,
            batch_size,
            learning_rate,
            seed,
            init: InitScheme::Uniform,
            projection: Projection::ClipRescale,
            eval_every: 0,
            eval_samples: default_eval_samples(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.options == 0 {
            return Err(Error::param("options", "need at least one regular option"));
        }
        if !(self.temperature >= 1.0) || !self.temperature.is_finite() {
            return Err(Error::param(
                "temperature",
                format!("must be finite and >= 1, got {}", self.temperature),
            ));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::param(
                "learning_rate",
                format!("must be finite and >= 0, got {}", self.learning_rate),
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if self.eval_samples == 0 {
            return Err(Error::param("eval_samples", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub step: usize,
    /// Batch mean of the softmax revenue before the update.
    pub softmax_objective: f64,
    pub argmax_revenue: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    pub menu: AnyMenu<T>,
    pub history: Vec<HistoryRow>,
}

/// Random feasible starting menu.
pub fn init_menu<T: Scalar, R: Rng>(
    cfg: &TrainConfig,
    kind: MenuKind,
    m: usize,
    n: usize,
    rng: &mut R,
) -> Result<AnyMenu<T>> {
    let mut u = |lo: f64, hi: f64| T::lit(lo + (hi - lo) * rng.random::<f64>());
    match kind {
        MenuKind::Rochet => {
            if m != 1 {
                return Err(Error::param(
                    "buyers",
                    format!("RochetNet has one buyer, got {m}"),
                ));
            }
            let regular = (0..cfg.options)
                .map(|_| {
                    let x = (0..n).map(|_| u(0.0, 1.0)).collect();
                    RochetOption::new(x, u(0.0, 1.0))
                })
                .collect();
            Ok(RochetMenu::new(n, regular)?.into())
        }
        MenuKind::Ama => {
            let regular = (0..cfg.options)
                .map(|_| {
                    let x: Vec<Vec<T>> = (0..m)
                        .map(|_| (0..n).map(|_| u(0.0, 1.0)).collect())
                        .collect();
                    AmaOption::new(x, u(-0.1, 0.0))
                })
                .collect();
            let mut menu = AmaMenu::from_options(
                m,
                n,
                std::iter::once(AmaOption::default_for(m, n))
                    .chain::<Vec<_>>(regular)
                    .collect(),
            );
            project_ama(&mut menu);
            Ok(menu.into())
        }
    }
}

fn clip01<T: Scalar>(x: T) -> T {
    x.max(T::zero()).min(T::one())
}

/// Clip allocations to [0,1] and prices to [0, inf).
pub fn project_rochet<T: Scalar>(menu: &mut RochetMenu<T>) {
    *menu = menu.map_options(|k, o| {
        if k == 0 {
            return o.clone();
        }
        RochetOption::new(
            o.allocation.iter().map(|&x| clip01(x)).collect(),
            o.price.max(T::zero()),
        )
    });
}

/// Clip allocations to [0,1], then scale down every item column whose
/// total exceeds one.
pub fn project_ama<T: Scalar>(menu: &mut AmaMenu<T>) {
    let n = menu.num_items();
    *menu = menu.map_options(|k, o| {
        if k == 0 {
            return o.clone();
        }
        let mut x: Vec<Vec<T>> = o
            .allocation
            .iter()
            .map(|r| r.iter().map(|&v| clip01(v)).collect())
            .collect();
        for j in 0..n {
            let total: T = x.iter().map(|r| r[j]).sum();
            if total > T::one() + T::feasibility_tol() {
                for r in x.iter_mut() {
                    r[j] = r[j] / total;
                }
            }
        }
        AmaOption::new(x, o.boost)
    });
}

pub fn project<T: Scalar>(menu: &mut AnyMenu<T>) {
    match menu {
        AnyMenu::Rochet(m) => project_rochet(m),
        AnyMenu::Ama(m) => project_ama(m),
    }
}

/// Gradient type of one mechanism family.
trait Trainable<T: Scalar>: crate::menu::Mechanism<T> {
    type Grad: Send;
    fn zero_grad(&self) -> Self::Grad;
    fn sample_grad(&self, p: &Profile<T>, cfg: &SoftmaxConfig<T>) -> (T, Self::Grad);
    fn accumulate(acc: &mut Self::Grad, g: &Self::Grad, scale: T);
    fn ascend(&mut self, g: &Self::Grad, step: T);
    fn project(&mut self);
}

impl<T: Scalar> Trainable<T> for RochetMenu<T> {
    type Grad = RochetGradient<T>;
    fn zero_grad(&self) -> Self::Grad {
        RochetGradient::zeros(self.num_regular(), self.num_items())
    }
    fn sample_grad(&self, p: &Profile<T>, cfg: &SoftmaxConfig<T>) -> (T, Self::Grad) {
        softmax_revenue_gradient(self, &p.buyers()[0], cfg)
    }
    fn accumulate(acc: &mut Self::Grad, g: &Self::Grad, scale: T) {
        acc.add_scaled(g, scale);
    }
    fn ascend(&mut self, g: &Self::Grad, step: T) {
        *self = self.map_options(|k, o| {
            if k == 0 {
                return o.clone();
            }
            let x = o
                .allocation
                .iter()
                .zip(&g.allocation[k - 1])
                .map(|(&a, &d)| a + step * d)
                .collect();
            RochetOption::new(x, o.price + step * g.price[k - 1])
        });
    }
    fn project(&mut self) {
        project_rochet(self);
    }
}

impl<T: Scalar> Trainable<T> for AmaMenu<T> {
    type Grad = AmaGradient<T>;
    fn zero_grad(&self) -> Self::Grad {
        AmaGradient::zeros(self.num_regular(), self.num_buyers(), self.num_items())
    }
    fn sample_grad(&self, p: &Profile<T>, cfg: &SoftmaxConfig<T>) -> (T, Self::Grad) {
        softmax_payment_gradient(self, p, cfg)
    }
    fn accumulate(acc: &mut Self::Grad, g: &Self::Grad, scale: T) {
        acc.add_scaled(g, scale);
    }
    fn ascend(&mut self, g: &Self::Grad, step: T) {
        *self = self.map_options(|k, o| {
            if k == 0 {
                return o.clone();
            }
            let x = o
                .allocation
                .iter()
                .zip(&g.allocation[k - 1])
                .map(|(row, drow)| row.iter().zip(drow).map(|(&a, &d)| a + step * d).collect())
                .collect();
            AmaOption::new(x, o.boost + step * g.boost[k - 1])
        });
    }
    fn project(&mut self) {
        project_ama(self);
    }
}

const GRAD_CHUNK: usize = 64;

/// Batch mean of the softmax objective and of its gradient, reduced in a
/// fixed order.
fn batch_gradient<T: Scalar, M: Trainable<T>>(
    menu: &M,
    batch: &[Profile<T>],
    cfg: &SoftmaxConfig<T>,
) -> (T, M::Grad) {
    let parts: Vec<(T, M::Grad)> = batch
        .par_chunks(GRAD_CHUNK)
        .map(|chunk| {
            let mut acc = menu.zero_grad();
            let mut value = T::zero();
            for p in chunk {
                let (v, g) = menu.sample_grad(p, cfg);
                value = value + v;
                M::accumulate(&mut acc, &g, T::one());
            }
            (value, acc)
        })
        .collect();
    let scale = T::one() / T::lit(batch.len() as f64);
    let mut total = menu.zero_grad();
    let mut value = T::zero();
    for (v, g) in &parts {
        value = value + *v;
        M::accumulate(&mut total, g, scale);
    }
    (value * scale, total)
}

/// Offset separating evaluation samples from training batches.
const EVAL_STREAM_OFFSET: u64 = 1 << 62;

fn run<T: Scalar, M: Trainable<T>>(
    mut menu: M,
    cfg: &TrainConfig,
    spec: &DensitySpec,
) -> Result<(M, Vec<HistoryRow>)> {
    let (m, n) = (menu.num_buyers(), menu.num_items());
    spec.check_shape(m, n)?;
    let softmax = SoftmaxConfig::new(T::lit(cfg.temperature))?;
    let step = T::lit(cfg.learning_rate);
    let sampler = SeededSampler::new(spec.clone(), cfg.seed);
    let eval_set: Vec<Profile<T>> = sampler.batch(EVAL_STREAM_OFFSET, cfg.eval_samples, m, n)?;
    let mut history = Vec::with_capacity(cfg.steps);
    for s in 0..cfg.steps {
        let batch: Vec<Profile<T>> =
            sampler.batch((s * cfg.batch_size) as u64, cfg.batch_size, m, n)?;
        let (objective, grad) = batch_gradient(&menu, &batch, &softmax);
        let value = objective.as_f64();
        if !value.is_finite() {
            return Err(Error::Diverged { step: s, value });
        }
        menu.ascend(&grad, step);
        menu.project();
        let evaluate = s + 1 == cfg.steps || (cfg.eval_every > 0 && (s + 1) % cfg.eval_every == 0);
        history.push(HistoryRow {
            step: s + 1,
            softmax_objective: value,
            argmax_revenue: evaluate.then(|| mc_revenue_on(&menu, &eval_set, Smoothing::None).mean),
        });
    }
    Ok((menu, history))
}

/// Initializes a menu from `cfg.seed` and trains it on profiles from `spec`.
pub fn train<T: Scalar>(
    cfg: &TrainConfig,
    kind: MenuKind,
    m: usize,
    n: usize,
    spec: &DensitySpec,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    // the init stream is disjoint from the sampler's per-profile streams
    rng.set_stream(u64::MAX);
    let init = init_menu::<T, _>(cfg, kind, m, n, &mut rng)?;
    train_from(cfg, init, spec)
}

/// Trains an explicit starting menu.
pub fn train_from<T: Scalar>(
    cfg: &TrainConfig,
    init: AnyMenu<T>,
    spec: &DensitySpec,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    match init {
        AnyMenu::Rochet(m) => {
            let (menu, history) = run(m, cfg, spec)?;
            Ok(TrainOutcome {
                menu: menu.into(),
                history,
            })
        }
        AnyMenu::Ama(m) => {
            let (menu, history) = run(m, cfg, spec)?;
            Ok(TrainOutcome {
                menu: menu.into(),
                history,
            })
        }
    }
}

/// Full-batch softmax objective on a fixed sample set.
pub fn softmax_objective<T: Scalar>(
    menu: &AnyMenu<T>,
    profiles: &[Profile<T>],
    temperature: T,
) -> T {
    let s = Smoothing::Softmax { temperature };
    let e = match menu {
        AnyMenu::Rochet(m) => mc_revenue_on(m, profiles, s),
        AnyMenu::Ama(m) => mc_revenue_on(m, profiles, s),
    };
    T::lit(e.mean)
}

/// One full-batch ascent step on fixed samples, for sanity checks.
pub fn full_batch_step<T: Scalar>(
    menu: &AnyMenu<T>,
    profiles: &[Profile<T>],
    temperature: T,
    step: T,
) -> Result<AnyMenu<T>> {
    let cfg = SoftmaxConfig::new(temperature)?;
    Ok(match menu {
        AnyMenu::Rochet(m) => {
            let (_, g) = batch_gradient(m, profiles, &cfg);
            let mut next = m.clone();
            next.ascend(&g, step);
            next.project();
            next.into()
        }
        AnyMenu::Ama(m) => {
            let (_, g) = batch_gradient(m, profiles, &cfg);
            let mut next = m.clone();
            next.ascend(&g, step);
            next.project();
            next.into()
        }
    })
}

/// Profiles used by [`full_batch_step`] checks; drawn like training batches.
pub fn fixed_samples<T: Scalar>(
    spec: &DensitySpec,
    seed: u64,
    count: usize,
    m: usize,
    n: usize,
) -> Result<Vec<Profile<T>>> {
    sample_profiles(spec, seed, count, m, n)
}
