//! Classical jammer localization baselines.
//!
//! All model-based estimators share one path-loss model: the jammer power at
//! a sample, recovered from its noise floor by removing ambient noise, is
//! `P̃ = A − 10 γ log10 d` with `A = P_t − PL0`. Only samples at least 3 dB
//! above ambient carry usable signal. Every model-based estimator falls back
//! to WCL (flagged) when it cannot run.

mod solver;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::graph::weighted_centroid;
use crate::rf::{self, dbm_to_mw, mw_to_dbm, MIN_DISTANCE_M};
use crate::scenario::{MeasurementSample, ScenarioInstance, JAMMED_MARGIN_DB};
use crate::{Error, Point, Result};

use solver::{bfgs, levenberg_marquardt, Box1};

pub const GAMMA_BOUNDS: (f64, f64) = (2.0, 6.0);
const MIN_FIT_SAMPLES: usize = 4;
const MLAT_MAX_ITER: usize = 100;
const MLAT_GRAD_TOL: f64 = 1e-8;
const RIDGE: f64 = 1e-8;
const STRONGEST_STARTS: usize = 3;
const GRID_STARTS: usize = 5;
const START_NUDGE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Wcl,
    Mlat,
    Mle,
    Lsq,
    Pl,
    Mlp,
    Gcn,
    Pna,
    Gat,
    Cage,
}

impl Estimator {
    pub const CLASSICAL: [Estimator; 5] = [
        Estimator::Wcl,
        Estimator::Mlat,
        Estimator::Mle,
        Estimator::Lsq,
        Estimator::Pl,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::Wcl => "wcl",
            Estimator::Mlat => "mlat",
            Estimator::Mle => "mle",
            Estimator::Lsq => "lsq",
            Estimator::Pl => "pl",
            Estimator::Mlp => "mlp",
            Estimator::Gcn => "gcn",
            Estimator::Pna => "pna",
            Estimator::Gat => "gat",
            Estimator::Cage => "cage",
        }
    }

    pub fn is_classical(&self) -> bool {
        Self::CLASSICAL.contains(self)
    }
}

impl std::str::FromStr for Estimator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Estimator::Wcl,
            Estimator::Mlat,
            Estimator::Mle,
            Estimator::Lsq,
            Estimator::Pl,
            Estimator::Mlp,
            Estimator::Gcn,
            Estimator::Pna,
            Estimator::Gat,
            Estimator::Cage,
        ]
        .into_iter()
        .find(|e| e.as_str() == s.to_ascii_lowercase())
        .ok_or_else(|| format!("unknown estimator '{s}'"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub gamma: f64,
    pub tx_power_dbm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub position: Point,
    pub estimator: Estimator,
    pub aux: Option<PathLossParams>,
    pub confidence: Option<[f64; 5]>,
    /// Learned estimators with a prior blend report their unblended output here.
    pub gnn_position: Option<Point>,
    pub converged: bool,
    /// Set when a model-based estimator could not run and WCL was returned.
    pub fallback: bool,
    /// Set when a singular system needed ridge damping or the geometry was rank deficient.
    pub degenerate: bool,
}

impl EstimateResult {
    pub fn plain(estimator: Estimator, position: Point) -> Self {
        Self {
            position,
            estimator,
            aux: None,
            confidence: None,
            gnn_position: None,
            converged: true,
            fallback: false,
            degenerate: false,
        }
    }
}

/// What the estimators assume known about the channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorContext {
    /// Number of coordinates estimated (2 or 3).
    pub dim: usize,
    pub pl0: f64,
    pub ambient_dbm: f64,
}

impl Default for EstimatorContext {
    fn default() -> Self {
        Self {
            dim: 2,
            pl0: rf::DEFAULT_PL0_DB,
            ambient_dbm: rf::AMBIENT_NOISE_DBM,
        }
    }
}

impl EstimatorContext {
    pub fn for_instance(instance: &ScenarioInstance) -> Self {
        Self {
            dim: instance.dimensionality as usize,
            pl0: instance.propagation.pl0,
            ambient_dbm: instance.propagation.ambient_noise_dbm,
        }
    }

    fn embed(&self, v: &DVector<f64>, base: &Point) -> Point {
        let mut p = *base;
        for a in 0..self.dim {
            p[a] = v[a];
        }
        if self.dim == 2 {
            p.z = 0.0;
        }
        p
    }
}

/// Weighted centroid with linear-power weights.
pub fn wcl(samples: &[MeasurementSample]) -> Result<EstimateResult> {
    let (p, _) = weighted_centroid(samples.iter().map(|s| (&s.position, s.noise_dbm)))
        .ok_or_else(|| Error::Infeasible("no samples".into()))?;
    Ok(EstimateResult::plain(Estimator::Wcl, p))
}

/// A sample with the ambient contribution removed.
#[derive(Debug, Clone, Copy)]
struct Obs {
    pos: Point,
    /// Jammer power at the sample (dBm).
    power: f64,
}

fn jammer_observations(samples: &[MeasurementSample], ctx: &EstimatorContext) -> Vec<Obs> {
    let ambient_mw = dbm_to_mw(ctx.ambient_dbm);
    samples
        .iter()
        .filter(|s| s.noise_dbm >= ctx.ambient_dbm + JAMMED_MARGIN_DB)
        .map(|s| Obs {
            pos: s.position,
            power: mw_to_dbm(dbm_to_mw(s.noise_dbm) - ambient_mw),
        })
        .collect()
}

fn log_distance(a: &Point, b: &Point) -> f64 {
    (a - b).norm().max(MIN_DISTANCE_M).log10()
}

/// Least-squares `(γ, A)` for a fixed jammer position.
fn linear_fit(obs: &[Obs], x: &Point) -> (f64, f64) {
    let n = obs.len() as f64;
    let (mut su, mut suu, mut sp, mut sup) = (0.0, 0.0, 0.0, 0.0);
    for o in obs {
        let u = -10.0 * log_distance(x, &o.pos);
        su += u;
        suu += u * u;
        sp += o.power;
        sup += u * o.power;
    }
    // P = A + γ u
    let det = n * suu - su * su;
    let det = if det.abs() < RIDGE { det + RIDGE } else { det };
    let gamma = (n * sup - su * sp) / det;
    let a = (sp - gamma * su) / n;
    (gamma, a)
}

fn projected_residuals(obs: &[Obs], x: &Point) -> DVector<f64> {
    let (gamma, a) = linear_fit(obs, x);
    DVector::from_iterator(
        obs.len(),
        obs.iter()
            .map(|o| o.power - (a - 10.0 * gamma * log_distance(x, &o.pos))),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossFit {
    pub gamma: f64,
    pub tx_power_dbm: f64,
    /// Position at which `(γ, P_t)` were fitted.
    pub position: Point,
    /// Starting point of the search (the WCL estimate).
    pub x_init: Point,
    pub converged: bool,
}

impl PathLossFit {
    fn a(&self, ctx: &EstimatorContext) -> f64 {
        self.tx_power_dbm - ctx.pl0
    }
}

fn usable(samples: &[MeasurementSample], ctx: &EstimatorContext) -> Result<Vec<Obs>> {
    let obs = jammer_observations(samples, ctx);
    if obs.len() < MIN_FIT_SAMPLES {
        return Err(Error::Infeasible(format!(
            "{} samples above the jamming margin, need {MIN_FIT_SAMPLES}",
            obs.len()
        )));
    }
    Ok(obs)
}

/// `(γ, P_t)` fitted with the jammer assumed at `x`.
pub fn fit_at(
    samples: &[MeasurementSample],
    ctx: &EstimatorContext,
    x: &Point,
) -> Result<PathLossParams> {
    let obs = usable(samples, ctx)?;
    let (gamma, a) = linear_fit(&obs, x);
    Ok(PathLossParams {
        gamma,
        tx_power_dbm: a + ctx.pl0,
    })
}

/// Joint path-loss fit: `(γ, P_t)` are solved in closed form for each
/// candidate position, and the position is searched from WCL.
pub fn fit_pathloss(samples: &[MeasurementSample], ctx: &EstimatorContext) -> Result<PathLossFit> {
    let obs = usable(samples, ctx)?;
    let x_init = wcl(samples)?.position;
    let mut best: Option<(f64, Point, bool)> = None;
    for start in search_starts(&obs, &x_init, ctx) {
        let x0 = DVector::from_iterator(ctx.dim, start.iter().take(ctx.dim).copied());
        let sol = levenberg_marquardt(
            |v| projected_residuals(&obs, &ctx.embed(v, &x_init)),
            x0,
            None,
            200,
        );
        let p = ctx.embed(&sol.x, &x_init);
        let cost = projected_residuals(&obs, &p).norm_squared();
        if cost.is_finite() && best.as_ref().is_none_or(|b| cost < b.0) {
            best = Some((cost, p, sol.converged));
        }
    }
    let (_, position, converged) =
        best.ok_or_else(|| Error::Infeasible("path-loss fit diverged".into()))?;
    let (gamma, a) = linear_fit(&obs, &position);
    if !gamma.is_finite() || !a.is_finite() {
        return Err(Error::Infeasible("path-loss fit diverged".into()));
    }
    Ok(PathLossFit {
        gamma,
        tx_power_dbm: a + ctx.pl0,
        position,
        x_init,
        converged,
    })
}

/// Position search starts: WCL first, then the strongest samples and a grid
/// around their bounding box.
fn search_starts(obs: &[Obs], x_init: &Point, ctx: &EstimatorContext) -> Vec<Point> {
    let mut starts = vec![*x_init];
    let mut by_power: Vec<&Obs> = obs.iter().collect();
    by_power.sort_by(|a, b| b.power.total_cmp(&a.power));
    for o in by_power.iter().take(STRONGEST_STARTS) {
        let mut p = o.pos;
        p.x += START_NUDGE_M;
        p.y += START_NUDGE_M;
        starts.push(p);
    }
    let (mut lo, mut hi) = (obs[0].pos, obs[0].pos);
    for o in obs {
        lo = lo.inf(&o.pos);
        hi = hi.sup(&o.pos);
    }
    let span = hi - lo;
    for i in 0..GRID_STARTS {
        for j in 0..GRID_STARTS {
            let f = |k: usize| -0.5 + 2.0 * k as f64 / (GRID_STARTS - 1) as f64;
            let mut p = lo + Point::new(span.x * f(i), span.y * f(j), 0.0);
            p.z = if ctx.dim == 3 {
                0.5 * (lo.z + hi.z)
            } else {
                x_init.z
            };
            starts.push(p);
        }
    }
    starts
}

fn with_fallback(
    samples: &[MeasurementSample],
    estimator: Estimator,
    run: impl FnOnce() -> Result<EstimateResult>,
) -> Result<EstimateResult> {
    match run() {
        Ok(r) if r.position.iter().all(|v| v.is_finite()) => Ok(r),
        _ => {
            let mut r = wcl(samples)?;
            r.estimator = estimator;
            r.fallback = true;
            r.converged = false;
            Ok(r)
        }
    }
}

/// Distances implied by the fitted model.
fn inverted_distances(obs: &[Obs], gamma: f64, a: f64) -> Vec<f64> {
    obs.iter()
        .map(|o| 10f64.powf((a - o.power) / (10.0 * gamma.max(1e-3))))
        .collect()
}

/// Multilateration on model-inverted ranges (damped Gauss–Newton), descended
/// from WCL and from the path-loss fit position; the lower cost wins.
pub fn mlat(samples: &[MeasurementSample], ctx: &EstimatorContext) -> Result<EstimateResult> {
    with_fallback(samples, Estimator::Mlat, || {
        let obs = usable(samples, ctx)?;
        let fit = fit_pathloss(samples, ctx)?;
        let d = inverted_distances(&obs, fit.gamma, fit.a(ctx));
        let dim = ctx.dim;
        let eval = |x: &DVector<f64>| -> (DMatrix<f64>, DVector<f64>) {
            let p = ctx.embed(x, &fit.x_init);
            let mut j = DMatrix::zeros(obs.len(), dim);
            let mut r = DVector::zeros(obs.len());
            for (i, o) in obs.iter().enumerate() {
                let v = p - o.pos;
                let n = v.norm().max(1e-12);
                r[i] = n - d[i];
                for a in 0..dim {
                    j[(i, a)] = v[a] / n;
                }
            }
            (j, r)
        };
        let descend = |mut x: DVector<f64>| {
            let (mut j, mut r) = eval(&x);
            let mut cost = r.norm_squared();
            let mut lambda = 1e-4;
            let mut converged = false;
            for _ in 0..MLAT_MAX_ITER {
                let g = j.transpose() * &r;
                if g.norm() < MLAT_GRAD_TOL {
                    converged = true;
                    break;
                }
                let jtj = j.transpose() * &j;
                let mut stepped = false;
                for _ in 0..20 {
                    let a = &jtj + DMatrix::<f64>::identity(dim, dim) * lambda;
                    let Some(step) = a.lu().solve(&(-&g)) else {
                        lambda *= 10.0;
                        continue;
                    };
                    let xn = &x + step;
                    let (jn, rn) = eval(&xn);
                    let cn = rn.norm_squared();
                    if cn < cost {
                        x = xn;
                        j = jn;
                        r = rn;
                        cost = cn;
                        lambda = (lambda * 0.3).max(1e-12);
                        stepped = true;
                        break;
                    }
                    lambda *= 10.0;
                }
                if !stepped {
                    converged = g.norm() < 1e-6;
                    break;
                }
            }
            (x, j, cost, converged)
        };
        let from = |p: &Point| DVector::from_iterator(dim, p.iter().take(dim).copied());
        let a = descend(from(&fit.x_init));
        let b = descend(from(&fit.position));
        let (x, j, _, converged) = if b.2 < a.2 { b } else { a };
        let sv = (j.transpose() * &j).singular_values();
        let degenerate = sv.min() <= 1e-10 * sv.max().max(1e-300);
        Ok(EstimateResult {
            position: ctx.embed(&x, &fit.x_init),
            estimator: Estimator::Mlat,
            aux: Some(PathLossParams {
                gamma: fit.gamma,
                tx_power_dbm: fit.tx_power_dbm,
            }),
            confidence: None,
            gnn_position: None,
            converged: converged && !degenerate,
            fallback: false,
            degenerate,
        })
    })
}

/// Linearized least squares: differences of the squared range equations
/// against their mean, solved through the normal equations.
pub fn lsq(samples: &[MeasurementSample], ctx: &EstimatorContext) -> Result<EstimateResult> {
    with_fallback(samples, Estimator::Lsq, || {
        let obs = usable(samples, ctx)?;
        let fit = fit_pathloss(samples, ctx)?;
        let d = inverted_distances(&obs, fit.gamma, fit.a(ctx));
        let dim = ctx.dim;
        let n = obs.len() as f64;
        let mean_pos = obs.iter().fold(Point::zeros(), |acc, o| acc + o.pos) / n;
        let sq: Vec<f64> = obs
            .iter()
            .map(|o| o.pos.iter().take(dim).map(|v| v * v).sum())
            .collect();
        let mean_sq = sq.iter().sum::<f64>() / n;
        let mean_d2 = d.iter().map(|v| v * v).sum::<f64>() / n;
        let a = DMatrix::from_fn(obs.len(), dim, |i, c| 2.0 * (obs[i].pos[c] - mean_pos[c]));
        let b = DVector::from_fn(obs.len(), |i, _| {
            (sq[i] - mean_sq) - (d[i] * d[i] - mean_d2)
        });
        let ata = a.transpose() * &a;
        let atb = a.transpose() * b;
        let sv = ata.singular_values();
        let degenerate = sv.min() <= 1e-12 * sv.max().max(1e-300);
        let sys = if degenerate {
            &ata + DMatrix::<f64>::identity(dim, dim) * RIDGE
        } else {
            ata
        };
        let x = sys
            .lu()
            .solve(&atb)
            .ok_or_else(|| Error::Infeasible("singular normal equations".into()))?;
        Ok(EstimateResult {
            position: ctx.embed(&x, &fit.x_init),
            estimator: Estimator::Lsq,
            aux: Some(PathLossParams {
                gamma: fit.gamma,
                tx_power_dbm: fit.tx_power_dbm,
            }),
            confidence: None,
            gnn_position: None,
            converged: !degenerate,
            fallback: false,
            degenerate,
        })
    })
}

fn joint_start(fit: &PathLossFit, at: &Point, ctx: &EstimatorContext) -> DVector<f64> {
    let mut v: Vec<f64> = at.iter().take(ctx.dim).copied().collect();
    v.push(fit.gamma.clamp(GAMMA_BOUNDS.0, GAMMA_BOUNDS.1));
    v.push(fit.tx_power_dbm);
    DVector::from_vec(v)
}

fn gamma_box(ctx: &EstimatorContext) -> Box1 {
    Box1 {
        index: ctx.dim,
        lo: GAMMA_BOUNDS.0,
        hi: GAMMA_BOUNDS.1,
    }
}

fn joint_result(
    estimator: Estimator,
    v: &DVector<f64>,
    base: &Point,
    converged: bool,
    ctx: &EstimatorContext,
) -> EstimateResult {
    EstimateResult {
        position: ctx.embed(v, base),
        estimator,
        aux: Some(PathLossParams {
            gamma: v[ctx.dim],
            tx_power_dbm: v[ctx.dim + 1],
        }),
        confidence: None,
        gnn_position: None,
        converged,
        fallback: false,
        degenerate: false,
    }
}

/// Maximum likelihood under Gaussian errors on the recovered jammer power,
/// with the noise variance profiled out (equivalently, least squares),
/// searched by quasi-Newton over position, `γ` and `P_t`.
pub fn mle(samples: &[MeasurementSample], ctx: &EstimatorContext) -> Result<EstimateResult> {
    with_fallback(samples, Estimator::Mle, || {
        let obs = usable(samples, ctx)?;
        let fit = fit_pathloss(samples, ctx)?;
        let dim = ctx.dim;
        let base = fit.x_init;
        let sse = |v: &DVector<f64>| -> f64 {
            let p = ctx.embed(v, &base);
            let (gamma, pt) = (v[dim], v[dim + 1]);
            obs.iter()
                .map(|o| o.power - (pt - ctx.pl0 - 10.0 * gamma * log_distance(&p, &o.pos)))
                .map(|r| r * r)
                .sum()
        };
        let a = bfgs(
            &sse,
            joint_start(&fit, &fit.x_init, ctx),
            Some(gamma_box(ctx)),
            1000,
            1e-10,
        );
        let b = bfgs(
            &sse,
            joint_start(&fit, &fit.position, ctx),
            Some(gamma_box(ctx)),
            1000,
            1e-10,
        );
        let sol = if sse(&b.x) < sse(&a.x) { b } else { a };
        Ok(joint_result(
            Estimator::Mle,
            &sol.x,
            &base,
            sol.converged,
            ctx,
        ))
    })
}

/// Direct nonlinear fit of the observed noise floors (ambient included).
pub fn pl(samples: &[MeasurementSample], ctx: &EstimatorContext) -> Result<EstimateResult> {
    with_fallback(samples, Estimator::Pl, || {
        usable(samples, ctx)?;
        let fit = fit_pathloss(samples, ctx)?;
        let dim = ctx.dim;
        let base = fit.x_init;
        let residuals = |v: &DVector<f64>| -> DVector<f64> {
            let p = ctx.embed(v, &base);
            let (gamma, pt) = (v[dim], v[dim + 1]);
            DVector::from_iterator(
                samples.len(),
                samples.iter().map(|s| {
                    let jam = pt - ctx.pl0 - 10.0 * gamma * log_distance(&p, &s.position);
                    s.noise_dbm - rf::noise_floor(jam, ctx.ambient_dbm)
                }),
            )
        };
        let a = levenberg_marquardt(
            &residuals,
            joint_start(&fit, &fit.x_init, ctx),
            Some(gamma_box(ctx)),
            300,
        );
        let b = levenberg_marquardt(
            &residuals,
            joint_start(&fit, &fit.position, ctx),
            Some(gamma_box(ctx)),
            300,
        );
        let sol = if residuals(&b.x).norm_squared() < residuals(&a.x).norm_squared() {
            b
        } else {
            a
        };
        Ok(joint_result(
            Estimator::Pl,
            &sol.x,
            &base,
            sol.converged,
            ctx,
        ))
    })
}

/// Runs one classical estimator.
pub fn estimate(
    estimator: Estimator,
    samples: &[MeasurementSample],
    ctx: &EstimatorContext,
) -> Result<EstimateResult> {
    match estimator {
        Estimator::Wcl => wcl(samples),
        Estimator::Mlat => mlat(samples, ctx),
        Estimator::Mle => mle(samples, ctx),
        Estimator::Lsq => lsq(samples, ctx),
        Estimator::Pl => pl(samples, ctx),
        other => Err(Error::Infeasible(format!(
            "{} is not a classical estimator",
            other.as_str()
        ))),
    }
}
