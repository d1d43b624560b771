//! Two-point geodesic connection through critical points of
//! `J(x) = ½∫₀¹ g_S(ẋ, ẋ) ds - Δt² / (2∫₀¹ β(x)⁻¹ ds)`.
//!
//! A critical curve `x(s)` lifts to the geodesic `(t(s), x(s))` with
//! `β ṫ = λ = Δt / ∫β⁻¹`, so that `t(1) - t(0) = Δt`.

mod action;
mod shooting;

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::{euclid_dist, euclid_norm, mat_vec, quad_form, seed_curves, SliceCurve};
use crate::optim::{solve_laplacian, Lbfgs, LbfgsStatus, Objective};
use crate::spacetime::{CausalCharacter, GeodesicState, StaticSpacetime, DEFAULT_NULL_EPS};
use crate::{Error, Result};

pub use action::{
    action_j, grad_action_j, lower_bound_gap, reconstruct_time, ActionEvaluation, TimeReconstruction,
};
pub(crate) use action::action_and_gradient;
pub use shooting::{shooting_connect, ShootOptions, ShootResult, ShootSolution, ShootVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConnectOptions {
    /// Number of curve segments `N`.
    pub segments: usize,
    pub max_iter: usize,
    /// Bound on the discrete geodesic defect for status `geodesic`.
    pub residual_tol: f64,
    /// Randomized seeds in addition to the chord.
    pub n_seeds: usize,
    pub seed: u64,
    /// Divergence certificate: `J` below this ...
    pub j_floor: f64,
    /// ... while the largest node norm has not decreased over this many iterations.
    pub window: usize,
    /// Interior nodes closer than this to the chart boundary certify divergence.
    pub boundary_eps: f64,
    pub null_eps: f64,
}

impl Default for ConnectOptions {
    fn default() -> Self {
        ConnectOptions {
            segments: 256,
            max_iter: 5000,
            residual_tol: 1e-6,
            n_seeds: 2,
            seed: 0,
            j_floor: -1e6,
            window: 25,
            boundary_eps: 1e-4,
            null_eps: DEFAULT_NULL_EPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectStatus {
    Geodesic,
    Diverged,
    MaxIter,
}

/// Why a run was declared divergent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergenceKind {
    /// `J` below the floor with monotone node escape.
    Escape,
    /// Nodes accumulate at the chart boundary.
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub max_node_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectResult {
    pub status: ConnectStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub divergence: Option<DivergenceKind>,
    pub lambda: f64,
    pub character: CausalCharacter,
    /// `C = -λ²/β + g_S(ẋ, ẋ)` at the middle segment.
    #[serde(rename = "C")]
    pub c: f64,
    /// Max `g_S`-norm of the discrete geodesic defect `N g⁻¹ ∂J/∂x_j` over interior nodes.
    pub residual: f64,
    /// The same defect from centered differences and the geodesic right-hand side.
    pub fd_residual: f64,
    #[serde(rename = "J")]
    pub j_value: f64,
    pub iterations: usize,
    pub seed_index: usize,
    pub t0: f64,
    pub delta_t: f64,
    pub max_node_norm: f64,
    /// Smallest Euclidean distance of an interior node to the chart boundary (absent if unbounded).
    pub min_boundary_distance: Option<f64>,
    pub history: Vec<HistoryEntry>,
    #[serde(skip)]
    pub curve: SliceCurve,
    #[serde(skip)]
    pub times: Vec<f64>,
}

impl ConnectResult {
    /// States of the lifted curve at the nodes: `ẋ` by second-order
    /// differences, `ṫ = λ/β`.
    pub fn lifted_states(&self, st: &StaticSpacetime) -> Result<Vec<(f64, GeodesicState)>> {
        let c = &self.curve;
        let n = c.segments();
        let nf = n as f64;
        (0..=n)
            .map(|i| {
                let x = c.node(i);
                let v: Vec<f64> = (0..c.dim())
                    .map(|d| {
                        if i == 0 {
                            nf * (-1.5 * c.node(0)[d] + 2.0 * c.node(1)[d] - 0.5 * c.node(2)[d])
                        } else if i == n {
                            nf * (1.5 * c.node(n)[d] - 2.0 * c.node(n - 1)[d] + 0.5 * c.node(n - 2)[d])
                        } else {
                            0.5 * nf * (c.node(i + 1)[d] - c.node(i - 1)[d])
                        }
                    })
                    .collect();
                let b = st.beta_at(x)?;
                Ok((c.param(i), GeodesicState::new(self.times[i], x.to_vec(), self.lambda / b, v)))
            })
            .collect()
    }
}

/// Max `g`-norm of `N g(x_j)⁻¹ ∂J/∂x_j` over the interior nodes.
pub fn discrete_residual(st: &StaticSpacetime, curve: &SliceCurve, delta_t: f64) -> Result<f64> {
    let dim = curve.dim();
    let mut g = vec![0.0; (curve.segments() - 1) * dim];
    action_and_gradient(st, curve, delta_t, &mut g)?;
    residual_from_gradient(st, curve, &g)
}

fn residual_from_gradient(st: &StaticSpacetime, curve: &SliceCurve, grad: &[f64]) -> Result<f64> {
    let dim = curve.dim();
    let nf = curve.segments() as f64;
    let mut worst: f64 = 0.0;
    for (j, gj) in grad.chunks(dim).enumerate() {
        if gj.iter().any(|v| !v.is_finite()) {
            return Ok(f64::INFINITY);
        }
        let ginv = st.chart().metric_inverse_at(curve.node(j + 1))?;
        let up = mat_vec(&ginv, gj);
        let r = nf * up.iter().zip(gj).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        worst = worst.max(r);
    }
    Ok(worst)
}

/// Defect of the geodesic system at interior nodes with centered
/// differences for `ẋ`, `ẍ` and `ṫ = λ/β`.
fn fd_residual(st: &StaticSpacetime, curve: &SliceCurve, lambda: f64) -> Result<f64> {
    let n = curve.segments();
    let nf = n as f64;
    let dim = curve.dim();
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let (a, x, b) = (curve.node(i - 1), curve.node(i), curve.node(i + 1));
        let v: Vec<f64> = (0..dim).map(|d| 0.5 * nf * (b[d] - a[d])).collect();
        let acc: Vec<f64> = (0..dim).map(|d| nf * nf * (b[d] - 2.0 * x[d] + a[d])).collect();
        let beta = st.beta_at(x)?;
        let d = st.geodesic_rhs(&GeodesicState::new(0.0, x.to_vec(), lambda / beta, v))?;
        let r: Vec<f64> = (0..dim).map(|k| acc[k] - d.x_ddot[k]).collect();
        let g = st.chart().metric_at(x)?;
        worst = worst.max(quad_form(&g, &r, &r).max(0.0).sqrt());
    }
    Ok(worst)
}

struct ActionObjective<'a> {
    st: &'a StaticSpacetime,
    curve: SliceCurve,
    delta_t: f64,
    opts: &'a ConnectOptions,
    last_residual: f64,
    metric_scale: Vec<f64>,
    history: Vec<HistoryEntry>,
    iter_offset: usize,
    divergence: Option<DivergenceKind>,
}

impl<'a> ActionObjective<'a> {
    fn load(&mut self, x: &[f64]) {
        let dim = self.curve.dim();
        let n = self.curve.segments();
        self.curve.flat_mut()[dim..n * dim].copy_from_slice(x);
    }

    fn update_metric_scale(&mut self) {
        let dim = self.curve.dim();
        let mut acc = vec![0.0; dim];
        let mut count = 0.0;
        for x in self.curve.nodes() {
            if let Ok(g) = self.st.chart().metric_at(x) {
                for d in 0..dim {
                    acc[d] += g[(d, d)];
                }
                count += 1.0;
            }
        }
        if count > 0.0 {
            self.metric_scale = acc.iter().map(|a| a / count).collect();
        }
    }

    fn interior_boundary_distance(&self) -> f64 {
        let n = self.curve.segments();
        (1..n)
            .map(|i| self.st.chart().boundary_distance(self.curve.node(i)))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Objective for ActionObjective<'_> {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.load(x);
        let ev = action_and_gradient(self.st, &self.curve, self.delta_t, grad)?;
        self.last_residual = residual_from_gradient(self.st, &self.curve, grad)?;
        Ok(ev.j)
    }

    fn max_step(&self, x: &[f64], d: &[f64]) -> f64 {
        // No node may move farther than `1 + |x|` in one step, so an escaping
        // run grows geometrically and stays observable instead of overflowing.
        let chart = self.st.chart();
        let dim = self.curve.dim();
        x.chunks(dim)
            .zip(d.chunks(dim))
            .map(|(p, dp)| {
                let nd = euclid_norm(dp);
                if nd == 0.0 {
                    return f64::INFINITY;
                }
                let growth = (1.0 + euclid_norm(p)) / nd;
                if chart.has_boundary() {
                    growth.min(chart.boundary_distance(p) / nd)
                } else {
                    growth
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn admissible(&self, x: &[f64]) -> bool {
        let mut c = self.curve.clone();
        let dim = c.dim();
        let n = c.segments();
        c.flat_mut()[dim..n * dim].copy_from_slice(x);
        c.is_admissible(self.st.chart())
    }

    fn precondition(&self, _x: &[f64], r: &[f64], out: &mut [f64]) {
        let dim = self.curve.dim();
        solve_laplacian(r, dim, out);
        let nf = self.curve.segments() as f64;
        for (i, v) in out.iter_mut().enumerate() {
            *v /= nf * self.metric_scale[i % dim];
        }
    }

    fn converged(&self, _x: &[f64], _grad: &[f64]) -> bool {
        self.last_residual <= 0.25 * self.opts.residual_tol
    }

    fn observe(&mut self, iter: usize, f: f64, x: &[f64]) -> ControlFlow<()> {
        self.load(x);
        self.history.push(HistoryEntry {
            iteration: self.iter_offset + iter,
            j: f,
            max_node_norm: self.curve.max_node_norm(),
        });
        if iter % 16 == 1 {
            self.update_metric_scale();
        }
        let w = self.opts.window;
        if f < self.opts.j_floor && self.history.len() > w {
            let tail = &self.history[self.history.len() - w - 1..];
            if tail.windows(2).all(|p| p[1].max_node_norm >= p[0].max_node_norm) {
                self.divergence = Some(DivergenceKind::Escape);
                return ControlFlow::Break(());
            }
        }
        if self.st.chart().has_boundary() && self.interior_boundary_distance() < self.opts.boundary_eps {
            self.divergence = Some(DivergenceKind::Boundary);
            return ControlFlow::Break(());
        }
        ControlFlow::Continue(())
    }
}

fn random_seed(
    st: &StaticSpacetime,
    chord: &SliceCurve,
    opts: &ConnectOptions,
    index: usize,
) -> Option<SliceCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(index as u64);
    let dim = chord.dim();
    let n = chord.segments();
    let span = euclid_dist(chord.node(0), chord.node(n)).max(0.1);
    const MODES: usize = 3;
    let coef: Vec<f64> = (0..MODES * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut amp = 0.25 * span;
    for _ in 0..12 {
        let mut c = chord.clone();
        for i in 1..n {
            let s = c.param(i);
            for d in 0..dim {
                let mut bump = 0.0;
                for m in 0..MODES {
                    let k = (m + 1) as f64;
                    bump += coef[m * dim + d] / k * (k * std::f64::consts::PI * s).sin();
                }
                c.node_mut(i)[d] += amp * bump;
            }
        }
        if c.is_admissible(st.chart()) {
            return Some(c);
        }
        amp *= 0.5;
    }
    None
}

fn run_seed(
    st: &StaticSpacetime,
    seed: SliceCurve,
    delta_t: f64,
    t0: f64,
    opts: &ConnectOptions,
    seed_index: usize,
) -> Result<ConnectResult> {
    let dim = seed.dim();
    let n = seed.segments();
    let mut obj = ActionObjective {
        st,
        curve: seed.clone(),
        delta_t,
        opts,
        last_residual: f64::INFINITY,
        metric_scale: vec![1.0; dim],
        history: Vec::new(),
        iter_offset: 0,
        divergence: None,
    };
    obj.update_metric_scale();
    let mut x: Vec<f64> = seed.flat()[dim..n * dim].to_vec();
    let mut restarts = 0;
    while obj.iter_offset < opts.max_iter {
        let lbfgs = Lbfgs {
            max_iter: opts.max_iter - obj.iter_offset,
            ..Lbfgs::default()
        };
        let out = lbfgs.minimize(&mut obj, &x)?;
        obj.iter_offset += out.iterations;
        x = out.x;
        match out.status {
            LbfgsStatus::Stalled if restarts < 4 => restarts += 1,
            _ => break,
        }
    }
    obj.load(&x);
    let curve = obj.curve.clone();
    let ev = action_j(st, &curve, delta_t)?;
    let residual = discrete_residual(st, &curve, delta_t)?;
    let time = reconstruct_time(st, &curve, delta_t, t0)?;
    let lambda = time.lambda;
    let mid = n / 2;
    let m = curve.midpoint(mid);
    let dx: Vec<f64> = curve.delta(mid).iter().map(|d| d * n as f64).collect();
    let beta = st.beta_at(&m)?;
    let c = -lambda * lambda / beta + st.chart().norm_sq(&m, &dx)?;
    let status = if obj.divergence.is_some() {
        ConnectStatus::Diverged
    } else if residual < opts.residual_tol {
        ConnectStatus::Geodesic
    } else {
        ConnectStatus::MaxIter
    };
    let min_bd = obj.interior_boundary_distance();
    Ok(ConnectResult {
        status,
        divergence: obj.divergence,
        lambda,
        character: CausalCharacter::from_norm(c, opts.null_eps),
        c,
        residual,
        fd_residual: fd_residual(st, &curve, lambda)?,
        j_value: ev.j,
        iterations: obj.iter_offset,
        seed_index,
        t0,
        delta_t,
        max_node_norm: curve.max_node_norm(),
        min_boundary_distance: min_bd.is_finite().then_some(min_bd),
        history: obj.history,
        curve,
        times: time.times,
    })
}

/// Seek a geodesic from `(t0, x0)` to `(t0 + Δt, x1)` by minimizing the
/// discrete `J` from the chord and `opts.n_seeds` randomized seeds.
pub fn minimize_action(
    st: &StaticSpacetime,
    x0: &[f64],
    x1: &[f64],
    t0: f64,
    delta_t: f64,
    opts: &ConnectOptions,
) -> Result<ConnectResult> {
    st.beta_at(x0)?;
    st.beta_at(x1)?;
    if opts.segments < 2 {
        return Err(Error::invalid("connect needs at least 2 segments"));
    }
    if !(opts.residual_tol > 0.0) || !delta_t.is_finite() || !t0.is_finite() {
        return Err(Error::invalid("residual_tol must be positive and times finite"));
    }
    let chart = st.chart();
    let Some(chord) = seed_curves(chart, x0, x1, opts.segments)?.into_iter().next() else {
        return Err(Error::SeedFailure);
    };
    let mut seeds = vec![chord.clone()];
    for k in 1..=opts.n_seeds {
        if let Some(c) = random_seed(st, &chord, opts, k) {
            seeds.push(c);
        }
    }
    let results: Vec<Result<ConnectResult>> = seeds
        .into_par_iter()
        .enumerate()
        .map(|(k, seed)| run_seed(st, seed, delta_t, t0, opts, k))
        .collect();
    let mut runs = Vec::new();
    let mut first_err = None;
    for r in results {
        match r {
            Ok(r) => runs.push(r),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if runs.is_empty() {
        return Err(first_err.unwrap_or(Error::SeedFailure));
    }
    let pick = |status: ConnectStatus| {
        runs.iter()
            .enumerate()
            .filter(|(_, r)| r.status == status)
            .min_by(|a, b| a.1.residual.total_cmp(&b.1.residual).then(a.0.cmp(&b.0)))
            .map(|(i, _)| i)
    };
    let best = pick(ConnectStatus::Geodesic)
        .or_else(|| runs.iter().position(|r| r.status == ConnectStatus::Diverged))
        .or_else(|| pick(ConnectStatus::MaxIter))
        .expect("non-empty");
    Ok(runs.swap_remove(best))
}
