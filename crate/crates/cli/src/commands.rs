use std::path::Path;

use menuconnect_core::connectivity::{
    connect_epsilon_reducible, connect_large, connect_zero_reducible,
};
use menuconnect_core::distributions::{landscape_grid, unit_grid};
use menuconnect_core::evaluation::{
    estimate_reducibility, mc_revenue, path_audit, softmax_gap_report, GapBound, ReducibilityReport,
};
use menuconnect_core::training::train;
use menuconnect_core::{
    AmaMenu, AnyMenu, Connectable, Error, Estimate, Mechanism, MenuPath, RochetMenu, Smoothing,
};
use serde::{Deserialize, Serialize};

use crate::artifacts::Artifacts;
use crate::config::{Command, ConnectMode, RunConfig};
use crate::CliError;

/// What the commands need from a menu family.
trait Typed: Connectable<f64> + Mechanism<f64> + GapBound + Into<AnyMenu<f64>> {}

impl<M: Connectable<f64> + Mechanism<f64> + GapBound + Into<AnyMenu<f64>>> Typed for M {}

macro_rules! typed {
    ($menu:expr, $m:ident => $body:expr) => {
        match $menu {
            AnyMenu::Rochet($m) => $body,
            AnyMenu::Ama($m) => $body,
        }
    };
}

/// On-disk form of a path; same layout as [`MenuPath`].
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathDoc {
    breakpoints: Vec<AnyMenu<f64>>,
}

impl<M: Typed> From<MenuPath<M>> for PathDoc {
    fn from(p: MenuPath<M>) -> Self {
        PathDoc {
            breakpoints: p.into_breakpoints().into_iter().map(Into::into).collect(),
        }
    }
}

enum AnyPath {
    Rochet(MenuPath<RochetMenu<f64>>),
    Ama(MenuPath<AmaMenu<f64>>),
}

enum Pair {
    Rochet(RochetMenu<f64>, RochetMenu<f64>),
    Ama(AmaMenu<f64>, AmaMenu<f64>),
}

fn read_json<D: for<'de> Deserialize<'de>>(path: &Path) -> Result<D, CliError> {
    let bytes = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.into(),
        source,
    })?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).map_err(|e| CliError::Input {
        path: path.into(),
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

fn read_menu(cfg: &RunConfig) -> Result<AnyMenu<f64>, CliError> {
    read_json(cfg.menu.as_deref().expect("inputs checked"))
}

fn pair(a: AnyMenu<f64>, b: AnyMenu<f64>) -> Result<Pair, CliError> {
    match (a, b) {
        (AnyMenu::Rochet(a), AnyMenu::Rochet(b)) => Ok(Pair::Rochet(a, b)),
        (AnyMenu::Ama(a), AnyMenu::Ama(b)) => Ok(Pair::Ama(a, b)),
        (a, b) => Err(Error::Congruence(format!(
            "cannot mix a {} menu with a {} menu",
            a.kind_name(),
            b.kind_name()
        ))
        .into()),
    }
}

fn read_pair(cfg: &RunConfig) -> Result<Pair, CliError> {
    let [a, b] = cfg.menus.as_ref().expect("inputs checked");
    pair(read_json(a)?, read_json(b)?)
}

fn read_path(cfg: &RunConfig) -> Result<AnyPath, CliError> {
    let Some(file) = &cfg.path else {
        return Ok(match read_pair(cfg)? {
            Pair::Rochet(a, b) => AnyPath::Rochet(MenuPath::new(vec![a, b])?),
            Pair::Ama(a, b) => AnyPath::Ama(MenuPath::new(vec![a, b])?),
        });
    };
    let doc: PathDoc = read_json(file)?;
    let mut rochet = Vec::new();
    let mut ama = Vec::new();
    for b in doc.breakpoints {
        match b {
            AnyMenu::Rochet(m) => rochet.push(m),
            AnyMenu::Ama(m) => ama.push(m),
        }
    }
    match (rochet.is_empty(), ama.is_empty()) {
        (false, true) => Ok(AnyPath::Rochet(MenuPath::new(rochet)?)),
        (true, false) => Ok(AnyPath::Ama(MenuPath::new(ama)?)),
        (true, true) => Err(Error::Structure("path has no breakpoints".into()).into()),
        (false, false) => Err(Error::Congruence("path mixes menu families".into()).into()),
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

/// Runs `command` and collects its artifacts. The exit status is 0, or 2
/// when an audit fails.
pub fn dispatch(command: Command, cfg: &RunConfig) -> Result<(i32, Artifacts), CliError> {
    cfg.check_inputs(command)?;
    let mut art = Artifacts::new();
    let code = match command {
        Command::Train => run_train(cfg, &mut art)?,
        Command::Connect => match read_pair(cfg)? {
            Pair::Rochet(a, b) => run_connect(&a, &b, cfg, &mut art)?,
            Pair::Ama(a, b) => run_connect(&a, &b, cfg, &mut art)?,
        },
        Command::Audit => match read_path(cfg)? {
            AnyPath::Rochet(p) => run_audit(&p, cfg, &mut art)?,
            AnyPath::Ama(p) => run_audit(&p, cfg, &mut art)?,
        },
        Command::Reduce => typed!(read_menu(cfg)?, m => run_reduce(&m, cfg, &mut art)?),
        Command::Discretize => typed!(read_menu(cfg)?, m => run_discretize(&m, cfg, &mut art)?),
        Command::Eval => typed!(read_menu(cfg)?, m => run_eval(&m, cfg, &mut art)?),
        Command::Gap => typed!(read_menu(cfg)?, m => run_gap(&m, cfg, &mut art)?),
        Command::Landscape => run_landscape(cfg, &mut art)?,
    };
    Ok((code, art))
}

fn run_train(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32, CliError> {
    let t = cfg.train.as_ref().expect("inputs checked");
    let out = train::<f64>(
        &t.config(cfg.seed),
        t.mechanism,
        t.buyers,
        t.items,
        &cfg.density,
    )?;
    let last = out.history.last().and_then(|h| h.argmax_revenue);
    art.json("menu.json", &out.menu);
    art.csv(
        "history.csv",
        &["step", "softmax_objective", "argmax_revenue_estimate"],
        out.history.iter().map(|h| {
            [
                h.step.to_string(),
                num(h.softmax_objective),
                h.argmax_revenue.map(num).unwrap_or_default(),
            ]
        }),
    )?;
    if let Some(r) = last {
        println!(
            "train: {} menu after {} steps, argmax revenue {r:.6}",
            out.menu.kind_name(),
            t.steps
        );
    }
    Ok(0)
}

#[derive(Serialize)]
struct SetsDoc<'a> {
    mode: ConnectMode,
    sets: [&'a menuconnect_core::ReductionSet; 2],
    /// Present when the sets were estimated rather than given.
    reports: Option<[ReducibilityReport; 2]>,
}

fn run_connect<M: Typed>(
    a: &M,
    b: &M,
    cfg: &RunConfig,
    art: &mut Artifacts,
) -> Result<i32, CliError> {
    let mode = cfg.mode.ok_or_else(|| {
        CliError::Missing("`mode` is required for `connect` (zero, reducible or large)".into())
    })?;
    let path = match mode {
        ConnectMode::Large => connect_large(a, b, cfg.epsilon)?,
        ConnectMode::Zero | ConnectMode::Reducible => {
            let eps = if mode == ConnectMode::Zero {
                0.0
            } else {
                cfg.epsilon
            };
            let (sets, reports) = match &cfg.reduction_sets {
                Some([k1, k2]) => ([k1.clone(), k2.clone()], None),
                None => {
                    let r1 = estimate_reducibility(a, &cfg.density, cfg.samples, eps, cfg.seed)?;
                    let r2 = estimate_reducibility(b, &cfg.density, cfg.samples, eps, cfg.seed)?;
                    if mode == ConnectMode::Zero {
                        for (i, r) in [&r1, &r2].into_iter().enumerate() {
                            if r.epsilon_hat > 0.0 {
                                return Err(Error::Precondition(format!(
                                    "menu {i} is not 0-reducible: with at most {} options kept, a fraction {} of {} samples still selects others; use mode reducible",
                                    r.cap, r.epsilon_hat, r.samples
                                ))
                                .into());
                            }
                        }
                    }
                    ([r1.selected.clone(), r2.selected.clone()], Some([r1, r2]))
                }
            };
            let p = if mode == ConnectMode::Zero {
                connect_zero_reducible(a, &sets[0], b, &sets[1])?
            } else {
                connect_epsilon_reducible(a, &sets[0], b, &sets[1])?
            };
            art.json(
                "reduction_sets.json",
                &SetsDoc {
                    mode,
                    sets: [&sets[0], &sets[1]],
                    reports,
                },
            );
            p
        }
    };
    println!(
        "connect: {} pieces through menus of {} options",
        path.num_pieces(),
        path.first().num_options()
    );
    art.json("path.json", &PathDoc::from(path));
    Ok(0)
}

fn run_audit<M: Typed>(
    path: &MenuPath<M>,
    cfg: &RunConfig,
    art: &mut Artifacts,
) -> Result<i32, CliError> {
    let report = path_audit(
        path,
        &cfg.density,
        cfg.samples,
        cfg.points,
        cfg.epsilon,
        cfg.seed,
    )?;
    art.csv(
        "audit.csv",
        &["t", "rev_estimate", "stderr", "min_per_sample_slack"],
        report
            .t
            .iter()
            .zip(&report.estimates)
            .zip(&report.min_slack)
            .map(|((t, e), s)| [num(*t), num(e.mean), num(e.stderr), num(*s)]),
    )?;
    art.json("audit.json", &report);
    println!(
        "audit: {} (min estimate {:.6}, threshold {:.6})",
        if report.pass { "PASS" } else { "FAIL" },
        report.min_estimate(),
        report.threshold
    );
    Ok(if report.pass { 0 } else { 2 })
}

fn run_reduce<M: Typed>(menu: &M, cfg: &RunConfig, art: &mut Artifacts) -> Result<i32, CliError> {
    let report = estimate_reducibility(menu, &cfg.density, cfg.samples, cfg.epsilon, cfg.seed)?;
    let reduced: AnyMenu<f64> = menu.reduce(&report.selected).into();
    println!(
        "reduce: kept {} of {} options, epsilon_hat {}",
        report.selected.len(),
        menu.num_options(),
        report.epsilon_hat
    );
    art.json("reducibility.json", &report);
    art.json("reduced_menu.json", &reduced);
    Ok(0)
}

fn run_discretize<M: Typed>(
    menu: &M,
    cfg: &RunConfig,
    art: &mut Artifacts,
) -> Result<i32, CliError> {
    let d = menu.discretize(cfg.epsilon)?;
    let set = d.reduction_set_of_discretized();
    println!("discretize: {} distinct allocations kept", set.len());
    art.json("menu.json", &d.into());
    art.json("reduction_set.json", &set);
    Ok(0)
}

#[derive(Serialize)]
struct EvalDoc {
    argmax: Estimate,
    temperature: Option<f64>,
    softmax: Option<Estimate>,
}

fn run_eval<M: Typed>(menu: &M, cfg: &RunConfig, art: &mut Artifacts) -> Result<i32, CliError> {
    let argmax = mc_revenue(menu, &cfg.density, cfg.samples, cfg.seed, Smoothing::None)?;
    let softmax = cfg
        .temperature
        .map(|temperature| {
            mc_revenue(
                menu,
                &cfg.density,
                cfg.samples,
                cfg.seed,
                Smoothing::Softmax { temperature },
            )
        })
        .transpose()?;
    println!("eval: revenue {:.6} +- {:.6}", argmax.mean, argmax.stderr);
    art.json(
        "eval.json",
        &EvalDoc {
            argmax,
            temperature: cfg.temperature,
            softmax,
        },
    );
    Ok(0)
}

fn run_gap<M: Typed>(menu: &M, cfg: &RunConfig, art: &mut Artifacts) -> Result<i32, CliError> {
    let reports = cfg
        .temperatures
        .iter()
        .map(|&y| softmax_gap_report(menu, &cfg.density, y, cfg.samples, cfg.seed))
        .collect::<Result<Vec<_>, _>>()?;
    art.csv(
        "gap.csv",
        &[
            "temperature",
            "density_bound",
            "bound",
            "empirical",
            "stderr",
            "within_bound",
        ],
        reports.iter().map(|r| {
            [
                num(r.temperature),
                num(r.density_bound),
                num(r.bound),
                num(r.empirical.mean),
                num(r.empirical.stderr),
                r.within_bound.to_string(),
            ]
        }),
    )?;
    let within = reports.iter().filter(|r| r.within_bound).count();
    println!(
        "gap: {within} of {} temperatures within bound",
        reports.len()
    );
    art.json("gap.json", &reports);
    Ok(0)
}

fn run_landscape(cfg: &RunConfig, art: &mut Artifacts) -> Result<i32, CliError> {
    let xs = cfg.xs.clone().unwrap_or_else(|| unit_grid(cfg.grid_points));
    let ps = cfg.ps.clone().unwrap_or_else(|| unit_grid(cfg.grid_points));
    let grid = landscape_grid(&cfg.density, &xs, &ps)?;
    art.csv(
        "landscape.csv",
        &["x", "p", "revenue"],
        xs.iter().zip(&grid).flat_map(|(x, row)| {
            ps.iter()
                .zip(row)
                .map(move |(p, r)| [num(*x), num(*p), num(*r)])
        }),
    )?;
    println!("landscape: {} x {} grid", xs.len(), ps.len());
    Ok(0)
}
