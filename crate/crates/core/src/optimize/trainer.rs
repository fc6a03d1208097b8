use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExpectationModel, LossSpec, Objective, Params};
use crate::error::{invalid, Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerKind {
    /// Adaptive first-order steps.
    Adam { learning_rate: f64 },
    /// Limited-memory quasi-Newton with a strong-Wolfe line search (the default).
    Lbfgs { memory: usize },
}

impl Default for OptimizerKind {
    fn default() -> Self {
        Self::Lbfgs { memory: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_iterations: usize,
    pub restarts: usize,
    pub optimizer: OptimizerKind,
    /// Stop when the cost changes by less than this between iterations.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            restarts: 10,
            optimizer: OptimizerKind::default(),
            tolerance: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(invalid("at least one restart is required"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid("tolerance must be non-negative"));
        }
        match self.optimizer {
            OptimizerKind::Adam { learning_rate } if !(learning_rate > 0.0) => {
                Err(invalid("learning rate must be positive"))
            }
            OptimizerKind::Lbfgs { memory: 0 } => Err(invalid("L-BFGS memory must be positive")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub restart: usize,
    /// Cost before the first step followed by the cost after each iteration.
    pub trace: Vec<f64>,
    pub final_cost: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub params: Params,
    pub cost: f64,
    pub best_restart: usize,
    pub restarts: Vec<RestartOutcome>,
    pub wall_time: Duration,
}

/// Random start: `θ ~ U[0, 2π)`, `a ~ U[0, 2]`, `b ~ U[−1, 1]`.
pub fn initial_params<R: Rng + ?Sized>(heads: usize, theta_len: usize, rng: &mut R) -> Params {
    let theta = (0..theta_len).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let a = (0..heads).map(|_| 1.0 + rng.random_range(-1.0..1.0)).collect();
    let b = (0..heads).map(|_| rng.random_range(-1.0..1.0)).collect();
    Params { a, b, theta }
}

/// Minimizes the summed cost from `config.restarts` random starts and keeps
/// the lowest final cost. A restart that hits a non-finite cost is recorded
/// as failed; training fails only if every restart does.
pub fn train<M: ExpectationModel>(
    model: &M,
    prepared: &M::Prepared,
    targets: &[f64],
    loss: LossSpec,
    config: &TrainConfig,
) -> Result<TrainResult> {
    config.validate()?;
    let objective = Objective::new(model, prepared, targets, loss)?;
    let start = Instant::now();
    let runs: Vec<(RestartOutcome, Option<Params>)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_from_seed(derive_seed(config.seed, &[r as u64]));
            let init = initial_params(objective.heads(), model.theta_len(), &mut rng);
            match run_restart(&objective, init, config) {
                Ok((params, trace)) => {
                    let final_cost = trace.last().copied();
                    (
                        RestartOutcome {
                            restart: r,
                            trace,
                            final_cost,
                            failure: None,
                        },
                        Some(params),
                    )
                }
                Err(e) => {
                    log::warn!("restart {r} aborted: {e}");
                    (
                        RestartOutcome {
                            restart: r,
                            trace: Vec::new(),
                            final_cost: None,
                            failure: Some(e.to_string()),
                        },
                        None,
                    )
                }
            }
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (outcome, _) in &runs {
        if let Some(c) = outcome.final_cost {
            if best.is_none_or(|(_, b)| c < b) {
                best = Some((outcome.restart, c));
            }
        }
    }
    let (best_restart, cost) = best.ok_or_else(|| Error::Training("every restart failed".into()))?;
    let mut restarts = Vec::with_capacity(runs.len());
    let mut params = None;
    for (outcome, p) in runs {
        if outcome.restart == best_restart {
            params = p;
        }
        restarts.push(outcome);
    }
    Ok(TrainResult {
        params: params.expect("best restart has parameters"),
        cost,
        best_restart,
        restarts,
        wall_time: start.elapsed(),
    })
}

fn run_restart<M: ExpectationModel>(
    objective: &Objective<'_, M>,
    init: Params,
    config: &TrainConfig,
) -> Result<(Params, Vec<f64>)> {
    let heads = objective.heads();
    let eval = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (f, g) = objective.cost_gradient(&Params::from_flat(heads, x))?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training("non-finite cost or gradient".into()));
        }
        Ok((f, g))
    };
    let x0 = init.to_flat();
    let (x, trace) = match config.optimizer {
        OptimizerKind::Adam { learning_rate } => adam(eval, x0, learning_rate, config)?,
        OptimizerKind::Lbfgs { memory } => lbfgs(eval, x0, memory, config)?,
    };
    Ok((Params::from_flat(heads, &x), trace))
}

type Eval<'a> = dyn FnMut(&[f64]) -> Result<(f64, Vec<f64>)> + 'a;

fn adam(
    mut eval: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    mut x: Vec<f64>,
    lr: f64,
    config: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;
    let mut m = vec![0.0; x.len()];
    let mut v = vec![0.0; x.len()];
    let (mut f, mut g) = eval(&x)?;
    let mut trace = vec![f];
    let mut best = (f, x.clone());
    for t in 1..=config.max_iterations {
        let c1 = 1.0 - BETA1.powi(t as i32);
        let c2 = 1.0 - BETA2.powi(t as i32);
        for i in 0..x.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
            x[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + EPS);
        }
        let prev = f;
        (f, g) = eval(&x)?;
        trace.push(f);
        if f < best.0 {
            best = (f, x.clone());
        }
        if (prev - f).abs() < config.tolerance {
            break;
        }
    }
    // report the best iterate, whose cost is the trace minimum
    let min = best.0;
    if let Some(last) = trace.last_mut() {
        *last = last.min(min);
    }
    Ok((best.1, trace))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lbfgs(
    mut eval: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    mut x: Vec<f64>,
    memory: usize,
    config: &TrainConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let (mut f, mut g) = eval(&x)?;
    let mut trace = vec![f];
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut rho_hist: Vec<f64> = Vec::new();
    let mut iter = 0;
    while iter < config.max_iterations {
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gnorm == 0.0 {
            break;
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let k = s_hist.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = rho_hist[i] * dot(&s_hist[i], &d);
            for j in 0..n {
                d[j] -= alpha[i] * y_hist[i][j];
            }
        }
        if k > 0 {
            let gamma = dot(&s_hist[k - 1], &y_hist[k - 1]) / dot(&y_hist[k - 1], &y_hist[k - 1]);
            d.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let beta = rho_hist[i] * dot(&y_hist[i], &d);
            for j in 0..n {
                d[j] += (alpha[i] - beta) * s_hist[i][j];
            }
        }
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }
        let step0 = if s_hist.is_empty() {
            (1.0 / d.iter().fold(0.0f64, |m, v| m.max(v.abs()))).min(1.0)
        } else {
            1.0
        };
        let found = strong_wolfe(&mut eval, &x, f, slope, &d, step0)?;
        let Some((step, f_new, g_new)) = found else {
            if s_hist.is_empty() {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            continue;
        };
        iter += 1;
        let s: Vec<f64> = d.iter().map(|v| step * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        for j in 0..n {
            x[j] += s[j];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if s_hist.len() == memory {
                s_hist.remove(0);
                y_hist.remove(0);
                rho_hist.remove(0);
            }
            s_hist.push(s);
            y_hist.push(y);
            rho_hist.push(1.0 / sy);
        }
        let change = (f - f_new).abs();
        f = f_new;
        g = g_new;
        trace.push(f);
        if change < config.tolerance {
            break;
        }
    }
    Ok((x, trace))
}

/// Line search for a step satisfying the strong Wolfe conditions
/// (`c₁ = 1e-4`, `c₂ = 0.9`). Returns `None` if no acceptable decrease is
/// found within the evaluation budget.
fn strong_wolfe(
    eval: &mut Eval<'_>,
    x: &[f64],
    f0: f64,
    slope0: f64,
    d: &[f64],
    step0: f64,
) -> Result<Option<(f64, f64, Vec<f64>)>> {
    const C1: f64 = 1e-4;
    const C2: f64 = 0.9;
    const MAX_EVALS: usize = 25;
    let mut at = |step: f64| -> Result<(f64, f64, Vec<f64>)> {
        let point: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + step * b).collect();
        let (f, g) = eval(&point)?;
        let slope = dot(&g, d);
        Ok((f, slope, g))
    };
    let mut evals = 0;
    let (mut lo, mut f_lo, mut slope_lo) = (0.0, f0, slope0);
    let mut g_lo: Option<Vec<f64>> = None;
    let mut step = step0;
    let mut hi: Option<(f64, f64, f64)> = None;
    // bracketing phase
    while hi.is_none() && evals < MAX_EVALS {
        let (f, slope, g) = at(step)?;
        evals += 1;
        if f > f0 + C1 * step * slope0 || (evals > 1 && f >= f_lo) {
            hi = Some((step, f, slope));
            break;
        }
        if slope.abs() <= -C2 * slope0 {
            return Ok(Some((step, f, g)));
        }
        if slope >= 0.0 {
            hi = Some((lo, f_lo, slope_lo));
            (lo, f_lo, slope_lo) = (step, f, slope);
            g_lo = Some(g);
            break;
        }
        (lo, f_lo, slope_lo) = (step, f, slope);
        g_lo = Some(g);
        step *= 2.0;
    }
    let Some((mut hi_step, mut f_hi, mut slope_hi)) = hi else {
        return Ok(g_lo.map(|g| (lo, f_lo, g)));
    };
    // zoom phase
    while evals < MAX_EVALS {
        let trial = cubic_min(lo, f_lo, slope_lo, hi_step, f_hi, slope_hi);
        let (f, slope, g) = at(trial)?;
        evals += 1;
        if f > f0 + C1 * trial * slope0 || f >= f_lo {
            (hi_step, f_hi, slope_hi) = (trial, f, slope);
        } else {
            if slope.abs() <= -C2 * slope0 {
                return Ok(Some((trial, f, g)));
            }
            if slope * (hi_step - lo) >= 0.0 {
                (hi_step, f_hi, slope_hi) = (lo, f_lo, slope_lo);
            }
            (lo, f_lo, slope_lo) = (trial, f, slope);
            g_lo = Some(g);
        }
        if (hi_step - lo).abs() < 1e-14 * lo.abs().max(1.0) {
            break;
        }
    }
    // fall back to the best sufficient-decrease point seen
    Ok(g_lo.filter(|_| lo > 0.0).map(|g| (lo, f_lo, g)))
}

/// Minimizer of the cubic interpolating both endpoints, kept safely inside
/// the interval; bisection when the cubic is unusable.
fn cubic_min(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        let t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
        if t.is_finite() && t > left + margin && t < right - margin {
            return t;
        }
    }
    0.5 * (a + b)
}

/// Writes `restart,iteration,cost` rows for every recorded iteration.
pub fn write_trace_csv<W: Write>(result: &TrainResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["restart", "iteration", "cost"])?;
    for r in &result.restarts {
        for (i, c) in r.trace.iter().enumerate() {
            w.write_record([r.restart.to_string(), i.to_string(), format!("{c:.17e}")])?;
        }
    }
    w.flush().map_err(|e| Error::Training(format!("writing trace: {e}")))?;
    Ok(())
}
