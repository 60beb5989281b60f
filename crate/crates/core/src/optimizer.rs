//! Box-constrained limited-memory BFGS (L-BFGS-B) and the Gaussian
//! multi-restart protocol.
//!
//! Each iteration follows Byrd, Lu, Nocedal and Zhu (1995):
//!
//! 1. the generalized Cauchy point along the projected steepest-descent path
//!    of the compact limited-memory model `B = θI - W M Wᵀ`,
//! 2. direct primal minimization of the model over the variables that are
//!    still free at the Cauchy point, truncated to stay in the box,
//! 3. a strong-Wolfe line search along the resulting direction, capped at the
//!    largest feasible step.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::CircuitSpec;
use crate::error::{Error, Result};
use crate::objective::{GateObjective, TargetGate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchConfig {
    /// Sufficient-decrease constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    pub max_evaluations: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self { c1: 1e-4, c2: 0.9, max_evaluations: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub restarts: usize,
    /// Mean of the initial Gaussian, as a fraction of Jmax.
    pub init_mean: f64,
    /// Standard deviation of the initial Gaussian, as a fraction of Jmax.
    pub init_std: f64,
    pub memory: usize,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub cost_tolerance: f64,
    pub seed: u64,
    pub line_search: LineSearchConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            restarts: 20,
            init_mean: 0.5,
            init_std: 0.1,
            memory: 10,
            max_iterations: 5000,
            grad_tolerance: 1e-12,
            cost_tolerance: 1e-15,
            seed: 0,
            line_search: LineSearchConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.memory == 0 || self.max_iterations == 0 {
            return Err(Error::Domain("restarts, memory and max_iterations must be positive".into()));
        }
        if !(self.init_std >= 0.0) || !self.init_mean.is_finite() {
            return Err(Error::Domain("init_std must be non-negative and init_mean finite".into()));
        }
        if !(self.grad_tolerance >= 0.0 && self.cost_tolerance >= 0.0) {
            return Err(Error::Domain("tolerances must be non-negative".into()));
        }
        let ls = &self.line_search;
        if !(0.0 < ls.c1 && ls.c1 < ls.c2 && ls.c2 < 1.0) || ls.max_evaluations == 0 {
            return Err(Error::Domain("line search needs 0 < c1 < c2 < 1 and a positive evaluation budget".into()));
        }
        if self.init_mean - 3.0 * self.init_std < 0.0 || self.init_mean + 3.0 * self.init_std > 1.0 {
            log::warn!(
                "initial distribution N({}, {}) reaches outside [0, Jmax] within 3 sigma; samples will be clipped",
                self.init_mean,
                self.init_std
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn uniform(n: usize, lower: f64, upper: f64) -> Self {
        Self { lower: vec![lower; n], upper: vec![upper; n] }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// `max_i |P(x - g)_i - x_i|`.
    pub fn projected_gradient_norm(&self, x: &[f64], g: &[f64]) -> f64 {
        (0..x.len()).map(|i| ((x[i] - g[i]).clamp(self.lower[i], self.upper[i]) - x[i]).abs()).fold(0.0, f64::max)
    }

    /// Largest `α` with `x + α d` inside the box.
    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        let mut alpha = f64::INFINITY;
        for i in 0..x.len() {
            if d[i] > 0.0 {
                alpha = alpha.min((self.upper[i] - x[i]) / d[i]);
            } else if d[i] < 0.0 {
                alpha = alpha.min((self.lower[i] - x[i]) / d[i]);
            }
        }
        alpha.max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    CostTolerance,
    MaxIterations,
    /// No step along the search direction decreased the cost.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimization {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
    /// Cost of every accepted iterate, starting with `f(x0)`.
    pub trace: Vec<f64>,
    pub projected_gradient: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory pairs and the compact-form matrices built from them.
struct Memory {
    capacity: usize,
    s: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    theta: f64,
    /// `W = [Y, θS]`, n × 2k.
    w: DMatrix<f64>,
    /// `M = [[-D, Lᵀ], [L, θSᵀS]]⁻¹`, 2k × 2k.
    m: DMatrix<f64>,
}

impl Memory {
    fn new(capacity: usize, n: usize) -> Self {
        Self { capacity, s: Vec::new(), y: Vec::new(), theta: 1.0, w: DMatrix::zeros(n, 0), m: DMatrix::zeros(0, 0) }
    }

    fn len(&self) -> usize {
        self.s.len()
    }

    fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
        self.theta = 1.0;
        self.w = DMatrix::zeros(self.w.nrows(), 0);
        self.m = DMatrix::zeros(0, 0);
    }

    /// Stores `(s, y)` when the curvature condition holds. Returns whether it did.
    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        let yy = dot(&y, &y);
        if !(sy > f64::EPSILON * yy) || yy == 0.0 {
            return false;
        }
        if self.s.len() == self.capacity {
            self.s.remove(0);
            self.y.remove(0);
        }
        self.s.push(s);
        self.y.push(y);
        self.theta = yy / sy;
        if !self.rebuild() {
            self.reset();
            return false;
        }
        true
    }

    fn rebuild(&mut self) -> bool {
        let k = self.len();
        let n = self.w.nrows();
        let theta = self.theta;
        self.w = DMatrix::from_fn(n, 2 * k, |r, c| if c < k { self.y[c][r] } else { theta * self.s[c - k][r] });
        let mut kmat = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            kmat[(i, i)] = -dot(&self.s[i], &self.y[i]);
            for j in 0..k {
                if i > j {
                    let l = dot(&self.s[i], &self.y[j]);
                    kmat[(k + i, j)] = l;
                    kmat[(j, k + i)] = l;
                }
                kmat[(k + i, k + j)] = theta * dot(&self.s[i], &self.s[j]);
            }
        }
        match kmat.try_inverse() {
            Some(m) if m.iter().all(|v| v.is_finite()) => {
                self.m = m;
                true
            }
            _ => false,
        }
    }
}

/// Generalized Cauchy point. Returns `(x_cp, c, free)` with `c = Wᵀ(x_cp - x)`
/// and `free[i]` true for variables not fixed at a bound.
fn cauchy_point(x: &[f64], g: &[f64], bounds: &Bounds, mem: &Memory) -> (Vec<f64>, DVector<f64>, Vec<bool>) {
    let n = x.len();
    let k2 = mem.w.ncols();
    let theta = mem.theta;
    let mut t = vec![f64::INFINITY; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        if g[i] < 0.0 {
            t[i] = (x[i] - bounds.upper[i]) / g[i];
        } else if g[i] > 0.0 {
            t[i] = (x[i] - bounds.lower[i]) / g[i];
        }
        if t[i] > 0.0 {
            d[i] = -g[i];
        } else {
            t[i] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| t[i] > 0.0 && t[i].is_finite()).collect();
    order.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(a.cmp(&b)));

    let mut xcp = x.to_vec();
    let mut free: Vec<bool> = (0..n).map(|i| t[i] > 0.0).collect();
    let dv = DVector::from_column_slice(&d);
    let mut p: DVector<f64> = mem.w.transpose() * &dv;
    let mut c = DVector::zeros(k2);
    let mut fp = -dot(&d, &d);
    let mut fpp = -theta * fp - if k2 > 0 { (p.transpose() * &mem.m * &p)[(0, 0)] } else { 0.0 };
    let fpp0 = fpp;
    if fpp <= 0.0 {
        fpp = f64::EPSILON;
    }
    let mut dt_min = -fp / fpp;
    let mut t_old = 0.0;

    for &b in &order {
        let dt = t[b] - t_old;
        if dt_min < dt {
            break;
        }
        let z_b = if d[b] > 0.0 { bounds.upper[b] } else { bounds.lower[b] } - x[b];
        xcp[b] = x[b] + z_b;
        c += &p * dt;
        let g_b = g[b];
        let (wmc, wmp, wmw) = if k2 > 0 {
            let w_b = mem.w.row(b).transpose();
            let mw = &mem.m * &w_b;
            (mw.dot(&c), mw.dot(&p), mw.dot(&w_b))
        } else {
            (0.0, 0.0, 0.0)
        };
        fp += dt * fpp + g_b * g_b + theta * g_b * z_b - g_b * wmc;
        fpp -= theta * g_b * g_b + 2.0 * g_b * wmp + g_b * g_b * wmw;
        fpp = fpp.max(f64::EPSILON * fpp0.abs());
        if k2 > 0 {
            p += mem.w.row(b).transpose() * g_b;
        }
        d[b] = 0.0;
        free[b] = false;
        dt_min = -fp / fpp;
        t_old = t[b];
    }
    let dt_min = dt_min.max(0.0);
    let t_final = t_old + dt_min;
    for i in 0..n {
        if free[i] {
            xcp[i] = (x[i] + t_final * d[i]).clamp(bounds.lower[i], bounds.upper[i]);
        }
    }
    c += &p * dt_min;
    (xcp, c, free)
}

/// Minimizes the model over the free variables starting from the Cauchy point,
/// truncating the step to keep it feasible.
fn subspace_minimization(
    x: &[f64],
    g: &[f64],
    bounds: &Bounds,
    mem: &Memory,
    xcp: &[f64],
    c: &DVector<f64>,
    free: &[bool],
) -> Vec<f64> {
    let free_idx: Vec<usize> = (0..x.len()).filter(|&i| free[i]).collect();
    if free_idx.is_empty() || mem.len() == 0 {
        return xcp.to_vec();
    }
    let theta = mem.theta;
    let k2 = mem.w.ncols();
    let mc = &mem.m * c;
    let nf = free_idx.len();
    // reduced gradient of the model at x_cp
    let mut rc = DVector::zeros(nf);
    for (a, &i) in free_idx.iter().enumerate() {
        rc[a] = g[i] + theta * (xcp[i] - x[i]) - mem.w.row(i).dot(&mc.transpose());
    }
    let wz = DMatrix::from_fn(nf, k2, |a, col| mem.w[(free_idx[a], col)]);
    let v = &mem.m * (wz.transpose() * &rc);
    let nmat = DMatrix::identity(k2, k2) - (&mem.m * (wz.transpose() * &wz)) / theta;
    let v = match nmat.lu().solve(&v) {
        Some(v) => v,
        None => return xcp.to_vec(),
    };
    let du = -(&rc / theta) - (&wz * v) / (theta * theta);

    let mut alpha: f64 = 1.0;
    for (a, &i) in free_idx.iter().enumerate() {
        let step = du[a];
        if step > 0.0 {
            alpha = alpha.min((bounds.upper[i] - xcp[i]) / step);
        } else if step < 0.0 {
            alpha = alpha.min((bounds.lower[i] - xcp[i]) / step);
        }
    }
    let alpha = alpha.max(0.0);
    let mut xbar = xcp.to_vec();
    for (a, &i) in free_idx.iter().enumerate() {
        xbar[i] = (xcp[i] + alpha * du[a]).clamp(bounds.lower[i], bounds.upper[i]);
    }
    xbar
}

struct Probe {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

struct LineSearch<'a, F> {
    f: &'a mut F,
    x: &'a [f64],
    d: &'a [f64],
    bounds: &'a Bounds,
    f0: f64,
    slope0: f64,
    cfg: LineSearchConfig,
    evaluations: usize,
    total_evaluations: &'a mut usize,
}

impl<F> LineSearch<'_, F>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    fn probe(&mut self, alpha: f64) -> Result<Probe> {
        let mut x: Vec<f64> = self.x.iter().zip(self.d).map(|(xi, di)| xi + alpha * di).collect();
        self.bounds.project(&mut x);
        self.evaluations += 1;
        *self.total_evaluations += 1;
        let (f, g) = (self.f)(&x)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "objective or gradient", evaluation: *self.total_evaluations });
        }
        let slope = dot(&g, self.d);
        Ok(Probe { alpha, x, f, g, slope })
    }

    fn armijo(&self, p: &Probe) -> bool {
        p.f <= self.f0 + self.cfg.c1 * p.alpha * self.slope0
    }

    fn curvature(&self, p: &Probe) -> bool {
        p.slope.abs() <= -self.cfg.c2 * self.slope0
    }

    /// Strong-Wolfe search on `(0, alpha_max]` starting at `alpha_init`.
    /// `None` when no trial step decreased the cost.
    fn run(&mut self, alpha_init: f64, alpha_max: f64) -> Result<Option<Probe>> {
        let mut prev = Probe { alpha: 0.0, x: self.x.to_vec(), f: self.f0, g: Vec::new(), slope: self.slope0 };
        let mut alpha = alpha_init.min(alpha_max);
        let mut first = true;
        loop {
            let cur = self.probe(alpha)?;
            if !self.armijo(&cur) || (!first && cur.f >= prev.f) {
                return self.zoom(prev, cur);
            }
            if self.curvature(&cur) {
                return Ok(Some(cur));
            }
            if cur.slope >= 0.0 {
                return self.zoom(cur, prev);
            }
            if alpha >= alpha_max || self.evaluations >= self.cfg.max_evaluations {
                // Sufficient decrease holds; the box or the budget stops further growth.
                return Ok(Some(cur));
            }
            alpha = (2.0 * alpha).min(alpha_max);
            prev = cur;
            first = false;
        }
    }

    /// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, if it exists.
    fn cubic(lo: &Probe, hi: &Probe) -> Option<f64> {
        let (a, b) = (lo.alpha, hi.alpha);
        let d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (a - b);
        let disc = d1 * d1 - lo.slope * hi.slope;
        if disc < 0.0 {
            return None;
        }
        let d2 = (b - a).signum() * disc.sqrt();
        let t = b - (b - a) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
        t.is_finite().then_some(t)
    }

    fn zoom(&mut self, mut lo: Probe, mut hi: Probe) -> Result<Option<Probe>> {
        loop {
            let width = (hi.alpha - lo.alpha).abs();
            let (left, right) = (lo.alpha.min(hi.alpha), lo.alpha.max(hi.alpha));
            let guard = 0.1 * width;
            let alpha = match Self::cubic(&lo, &hi) {
                Some(t) if t > left + guard && t < right - guard => t,
                _ => 0.5 * (lo.alpha + hi.alpha),
            };
            if self.evaluations >= self.cfg.max_evaluations || width <= f64::EPSILON * right.max(1.0) {
                return Ok((lo.alpha > 0.0 && lo.f < self.f0).then_some(lo));
            }
            let cur = self.probe(alpha)?;
            if !self.armijo(&cur) || cur.f >= lo.f {
                hi = cur;
            } else {
                if self.curvature(&cur) {
                    return Ok(Some(cur));
                }
                if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = cur;
            }
        }
    }
}

/// Settings of a single L-BFGS-B run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsbSettings {
    pub memory: usize,
    pub max_iterations: usize,
    pub grad_tolerance: f64,
    pub cost_tolerance: f64,
    pub line_search: LineSearchConfig,
}

impl From<&OptimizerConfig> for LbfgsbSettings {
    fn from(c: &OptimizerConfig) -> Self {
        Self {
            memory: c.memory,
            max_iterations: c.max_iterations,
            grad_tolerance: c.grad_tolerance,
            cost_tolerance: c.cost_tolerance,
            line_search: c.line_search,
        }
    }
}

/// Minimizes `f` (returning value and gradient) over `bounds` from `x0`.
pub fn lbfgsb_minimize<F>(mut f: F, x0: &[f64], bounds: &Bounds, settings: &LbfgsbSettings) -> Result<Minimization>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    if x0.len() != bounds.len() {
        return Err(Error::DimensionMismatch { expected: bounds.len(), found: x0.len() });
    }
    let n = x0.len();
    let mut x = x0.to_vec();
    bounds.project(&mut x);
    let mut evaluations = 1;
    let (mut fx, mut g) = f(&x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "objective or gradient", evaluation: evaluations });
    }
    let mut mem = Memory::new(settings.memory, n);
    let mut trace = vec![fx];
    let mut iterations = 0;

    let termination = loop {
        if bounds.projected_gradient_norm(&x, &g) <= settings.grad_tolerance {
            break Termination::GradientTolerance;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }

        let (xcp, c, free) = cauchy_point(&x, &g, bounds, &mem);
        let xbar = subspace_minimization(&x, &g, bounds, &mem, &xcp, &c, &free);
        let d: Vec<f64> = xbar.iter().zip(&x).map(|(a, b)| a - b).collect();
        let slope = dot(&g, &d);
        if !(slope < 0.0) {
            if mem.len() > 0 {
                mem.reset();
                continue;
            }
            // Cauchy step on the steepest-descent model must descend unless stationary.
            break Termination::GradientTolerance;
        }

        let alpha_max = bounds.max_step(&x, &d);
        let dnorm = dot(&d, &d).sqrt();
        let alpha_init = if mem.len() == 0 { (1.0 / dnorm).min(1.0) } else { 1.0 };
        let mut ls = LineSearch {
            f: &mut f,
            x: &x,
            d: &d,
            bounds,
            f0: fx,
            slope0: slope,
            cfg: settings.line_search,
            evaluations: 0,
            total_evaluations: &mut evaluations,
        };
        let accepted = ls.run(alpha_init.min(alpha_max), alpha_max)?;
        let Some(step) = accepted else {
            if mem.len() > 0 {
                mem.reset();
                continue;
            }
            break Termination::LineSearchFailed;
        };

        iterations += 1;
        let s: Vec<f64> = step.x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = step.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let f_old = fx;
        x = step.x;
        fx = step.f;
        g = step.g;
        trace.push(fx);
        mem.push(s, y);

        if (f_old - fx) / f_old.abs().max(fx.abs()).max(1.0) <= settings.cost_tolerance {
            break Termination::CostTolerance;
        }
    };

    let projected_gradient = bounds.projected_gradient_norm(&x, &g);
    Ok(Minimization { x, f: fx, iterations, evaluations, termination, trace, projected_gradient })
}

/// Restart `r` draws from `ChaCha8(seed + r)`: Normal(init_mean, init_std)·Jmax,
/// clipped into `[0, Jmax]`.
pub fn sample_initial_params(config: &OptimizerConfig, n_params: usize, restart_index: usize, jmax: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(restart_index as u64));
    let normal = Normal::new(config.init_mean * jmax, config.init_std * jmax).expect("validated std");
    (0..n_params).map(|_| normal.sample(&mut rng).clamp(0.0, jmax)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub restart: usize,
    pub seed: u64,
    pub initial_cost: Option<f64>,
    pub final_cost: Option<f64>,
    pub final_fidelity: Option<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Option<Termination>,
    /// Diagnostic for an aborted restart.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub target: String,
    pub best_restart: usize,
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub best_fidelity: f64,
    pub best_leakage: f64,
    pub per_restart: Vec<RestartSummary>,
    pub wall_time_seconds: f64,
    pub line_search: LineSearchConfig,
}

struct RestartOutcome {
    summary: RestartSummary,
    params: Option<Vec<f64>>,
    leakage: f64,
}

fn run_restart(objective: &GateObjective, config: &OptimizerConfig, r: usize) -> RestartOutcome {
    let template = objective.template();
    let n = objective.n_params();
    let bounds = Bounds::uniform(n, 0.0, template.jmax);
    let x0 = sample_initial_params(config, n, r, template.jmax);
    let settings = LbfgsbSettings::from(config);
    let mut summary = RestartSummary {
        restart: r,
        seed: config.seed.wrapping_add(r as u64),
        initial_cost: None,
        final_cost: None,
        final_fidelity: None,
        iterations: 0,
        evaluations: 0,
        termination: None,
        error: None,
    };
    let result = lbfgsb_minimize(|v| objective.cost_and_gradient(v), &x0, &bounds, &settings)
        .and_then(|m| objective.report(&m.x).map(|rep| (m, rep)));
    match result {
        Ok((m, rep)) => {
            summary.initial_cost = m.trace.first().copied();
            summary.final_cost = Some(m.f);
            summary.final_fidelity = Some(rep.fidelity);
            summary.iterations = m.iterations;
            summary.evaluations = m.evaluations;
            summary.termination = Some(m.termination);
            log::info!("restart {r}: cost {:.3e} fidelity {:.6} after {} iterations", m.f, rep.fidelity, m.iterations);
            RestartOutcome { summary, params: Some(m.x), leakage: rep.leakage }
        }
        Err(e) => {
            log::warn!("restart {r} aborted: {e}");
            summary.error = Some(e.to_string());
            RestartOutcome { summary, params: None, leakage: f64::NAN }
        }
    }
}

/// Runs `config.restarts` independent minimizations and keeps the best one
/// (lowest restart index on ties). Restarts run on the current rayon pool.
pub fn multi_restart_optimize(
    template: &CircuitSpec,
    target: &TargetGate,
    config: &OptimizerConfig,
) -> Result<OptimizationReport> {
    config.validate()?;
    let start = Instant::now();
    let objective = GateObjective::new(template.clone(), target.clone())?;
    let outcomes: Vec<RestartOutcome> =
        (0..config.restarts).into_par_iter().map(|r| run_restart(&objective, config, r)).collect();

    let mut best: Option<usize> = None;
    for (k, o) in outcomes.iter().enumerate() {
        if let Some(c) = o.summary.final_cost {
            if best.is_none_or(|b| c < outcomes[b].summary.final_cost.expect("finished")) {
                best = Some(k);
            }
        }
    }
    let Some(b) = best else {
        return Err(Error::AllRestartsAborted(
            outcomes
                .iter()
                .map(|o| format!("restart {}: {}", o.summary.restart, o.summary.error.clone().unwrap_or_default()))
                .collect(),
        ));
    };
    let winner = &outcomes[b];
    Ok(OptimizationReport {
        target: target.name.clone(),
        best_restart: b,
        best_params: winner.params.clone().expect("finished"),
        best_cost: winner.summary.final_cost.expect("finished"),
        best_fidelity: winner.summary.final_fidelity.expect("finished"),
        best_leakage: winner.leakage,
        per_restart: outcomes.into_iter().map(|o| o.summary).collect(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        line_search: config.line_search,
    })
}
