use std::collections::VecDeque;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use super::{euclid_dist, euclid_norm, mat_vec, quad_form, Chart, SliceCurve};
use crate::optim::{solve_laplacian, Lbfgs, LbfgsStatus, Objective};
use crate::{Error, Result};

const PROGRESS_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistanceOptions {
    /// Number of curve segments `N`.
    pub segments: usize,
    /// Nearest node-to-boundary distance below which the infimum counts as not attained.
    pub boundary_eps: f64,
    /// Target bound on the barrier's contribution (`μ · #nodes`).
    pub barrier_gap: f64,
    pub max_iter: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions {
            segments: 128,
            boundary_eps: 1e-4,
            barrier_gap: 1e-8,
            max_iter: 4000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceResult {
    pub length: f64,
    pub attained: bool,
    /// The minimizing curve; present only when the infimum is attained.
    pub minimizer: Option<SliceCurve>,
    /// The best curve found, attained or not.
    pub best_curve: SliceCurve,
    pub min_boundary_distance: f64,
    pub iterations: usize,
}

/// Discrete path energy `(N/2) Σ g(m_i)(Δ_i, Δ_i)` over the interior nodes,
/// plus a logarithmic barrier `-μ Σ ln d_i` when the chart has a boundary,
/// with `d_i` the boundary distance of segment `i`. Node distances alone are
/// not enough: near a thin obstacle a segment can cross it between two safe
/// nodes, and the minimizer then jams against the admissibility check.
struct CurveEnergy<'a> {
    chart: &'a Chart,
    curve: SliceCurve,
    mu: f64,
    /// Recent objective values, for the barrier-round progress test.
    trail: VecDeque<f64>,
}

impl<'a> CurveEnergy<'a> {
    fn load(&mut self, x: &[f64]) {
        let dim = self.curve.dim();
        let n = self.curve.segments();
        self.curve.flat_mut()[dim..n * dim].copy_from_slice(x);
    }

    fn barrier_active(&self) -> bool {
        self.chart.has_boundary() && self.mu > 0.0
    }
}

impl Objective for CurveEnergy<'_> {
    fn eval(&mut self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        self.load(x);
        let dim = self.curve.dim();
        let n = self.curve.segments();
        let nf = n as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut energy = 0.0;
        for i in 0..n {
            let m = self.curve.midpoint(i);
            let g = self.chart.metric_at(&m)?;
            let dg = self.chart.metric_derivatives_at(&m)?;
            let d = self.curve.delta(i);
            energy += 0.5 * nf * quad_form(&g, &d, &d);
            let gd = mat_vec(&g, &d);
            for c in 0..dim {
                let shared = 0.25 * nf * quad_form(&dg[c], &d, &d);
                // node i+1 (interior index i), node i (interior index i-1)
                if i + 1 < n {
                    grad[i * dim + c] += nf * gd[c] + shared;
                }
                if i >= 1 {
                    grad[(i - 1) * dim + c] += -nf * gd[c] + shared;
                }
            }
        }
        if self.barrier_active() {
            for i in 0..n {
                let (a, b) = (self.curve.node(i), self.curve.node(i + 1));
                let (dist, tau) = self.chart.segment_boundary_distance(a, b);
                if dist <= 0.0 {
                    return Err(Error::OutOfDomain {
                        chart: self.chart.label().to_string(),
                        point: a.to_vec(),
                    });
                }
                energy -= self.mu * dist.ln();
                // envelope: the closest point moves with the ends in proportion (1 - τ, τ)
                let p: Vec<f64> = a.iter().zip(b).map(|(u, v)| u + tau * (v - u)).collect();
                let h = (1e-7f64).min(0.1 * dist);
                let mut q = p.clone();
                for c in 0..dim {
                    q[c] = p[c] + h;
                    let bp = self.chart.boundary_distance(&q);
                    q[c] = p[c] - h;
                    let bm = self.chart.boundary_distance(&q);
                    q[c] = p[c];
                    let db = -self.mu * (bp - bm) / (2.0 * h) / dist;
                    if i >= 1 {
                        grad[(i - 1) * dim + c] += (1.0 - tau) * db;
                    }
                    if i + 1 < n {
                        grad[i * dim + c] += tau * db;
                    }
                }
            }
        }
        Ok(energy)
    }

    fn admissible(&self, x: &[f64]) -> bool {
        let mut c = self.curve.clone();
        let dim = c.dim();
        let n = c.segments();
        c.flat_mut()[dim..n * dim].copy_from_slice(x);
        c.is_admissible(self.chart)
    }

    fn precondition(&self, _x: &[f64], r: &[f64], out: &mut [f64]) {
        solve_laplacian(r, self.curve.dim(), out);
        let nf = self.curve.segments() as f64;
        out.iter_mut().for_each(|v| *v /= nf);
    }

    fn observe(&mut self, _iter: usize, f: f64, _x: &[f64]) -> ControlFlow<()> {
        if !self.barrier_active() {
            return ControlFlow::Continue(());
        }
        // a round is done once it stops gaining on the scale of its own barrier
        self.trail.push_back(f);
        if self.trail.len() > PROGRESS_WINDOW {
            let old = self.trail.pop_front().unwrap_or(f);
            if old - f < 1e-3 * self.mu * self.curve.segments() as f64 {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    }

    fn converged(&self, _x: &[f64], grad: &[f64]) -> bool {
        // intermediate barrier rounds only need to track the central path
        let gmax = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        gmax <= (1e-10 * self.curve.segments() as f64).max(self.mu)
    }
}

pub(crate) fn seed_curves(chart: &Chart, x0: &[f64], x1: &[f64], n: usize) -> Result<Vec<SliceCurve>> {
    let chord = SliceCurve::chord(x0, x1, n)?;
    let mut seeds = vec![];
    if chord.is_admissible(chart) {
        seeds.push(chord.clone());
    }
    let dim = x0.len();
    if dim < 2 {
        return Ok(seeds);
    }
    let span = euclid_dist(x0, x1).max(1e-3);
    let dir: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| (b - a) / span).collect();
    // Normals: Gram–Schmidt of coordinate axes against the chord direction.
    let mut normals: Vec<Vec<f64>> = vec![];
    for axis in 0..dim {
        let mut e = vec![0.0; dim];
        e[axis] = 1.0;
        let p = e.iter().zip(&dir).map(|(a, b)| a * b).sum::<f64>();
        e.iter_mut().zip(&dir).for_each(|(a, b)| *a -= p * b);
        for nrm in &normals {
            let q = e.iter().zip(nrm).map(|(a, b)| a * b).sum::<f64>();
            e.iter_mut().zip(nrm).for_each(|(a, b)| *a -= q * b);
        }
        let len = euclid_norm(&e);
        if len > 1e-8 {
            e.iter_mut().for_each(|a| *a /= len);
            normals.push(e);
        }
    }
    for amp in [0.25, -0.25, 0.6, -0.6, 1.2, -1.2] {
        for nrm in &normals {
            let mut c = chord.clone();
            for i in 1..n {
                let s = i as f64 / n as f64;
                let bump = amp * span * (std::f64::consts::PI * s).sin();
                for (d, v) in c.node_mut(i).iter_mut().enumerate() {
                    *v += bump * nrm[d];
                }
            }
            if c.is_admissible(chart) {
                seeds.push(c);
            }
        }
        if seeds.len() >= 3 {
            break;
        }
    }
    if chart.has_boundary() {
        seeds.extend(detour_seeds(chart, x0, x1, &dir, &normals, span, n, 2));
    }
    Ok(seeds)
}

/// Two-leg polylines `x0 → w → x1` around obstacles, shortest first, with
/// waypoints on rings about the chord midpoint.
fn detour_seeds(
    chart: &Chart,
    x0: &[f64],
    x1: &[f64],
    dir: &[f64],
    normals: &[Vec<f64>],
    span: f64,
    n: usize,
    keep: usize,
) -> Vec<SliceCurve> {
    let mid: Vec<f64> = x0.iter().zip(x1).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut dirs: Vec<Vec<f64>> = vec![];
    if normals.len() == 1 {
        for k in 0..16 {
            let th = std::f64::consts::TAU * k as f64 / 16.0;
            dirs.push((0..2).map(|d| th.cos() * dir[d] + th.sin() * normals[0][d]).collect());
        }
    } else {
        for v in std::iter::once(dir).chain(normals.iter().map(|v| v.as_slice())) {
            dirs.push(v.to_vec());
            dirs.push(v.iter().map(|a| -a).collect());
        }
    }
    let mut cands: Vec<(f64, Vec<f64>)> = vec![];
    for r in [0.5, 1.0, 2.0, 4.0] {
        for u in &dirs {
            let w: Vec<f64> = mid.iter().zip(u).map(|(m, e)| m + r * span * e).collect();
            if chart.segment_admissible(x0, &w) && chart.segment_admissible(&w, x1) {
                cands.push((euclid_dist(x0, &w) + euclid_dist(&w, x1), w));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    cands
        .into_iter()
        .filter_map(|(len, w)| {
            let first = euclid_dist(x0, &w) / len;
            let mut flat = Vec::with_capacity((n + 1) * x0.len());
            for i in 0..=n {
                let s = i as f64 / n as f64;
                let p: Vec<f64> = if s <= first {
                    let t = s / first;
                    x0.iter().zip(&w).map(|(a, b)| a + t * (b - a)).collect()
                } else {
                    let t = (s - first) / (1.0 - first);
                    w.iter().zip(x1).map(|(a, b)| a + t * (b - a)).collect()
                };
                flat.extend(p);
            }
            SliceCurve::from_flat(x0.len(), flat).ok().filter(|c| c.is_admissible(chart))
        })
        .take(keep)
        .collect()
}

fn minimize_from(
    chart: &Chart,
    seed: SliceCurve,
    opts: &DistanceOptions,
) -> Result<(SliceCurve, usize)> {
    let dim = seed.dim();
    let n = seed.segments();
    let mut energy = CurveEnergy {
        chart,
        curve: seed.clone(),
        mu: 0.0,
        trail: VecDeque::new(),
    };
    let mut x: Vec<f64> = seed.flat()[dim..n * dim].to_vec();
    let lbfgs = Lbfgs {
        max_iter: opts.max_iter,
        ..Lbfgs::default()
    };
    let mut iterations = 0;
    if chart.has_boundary() {
        // warm-started rounds; a round stuck at a large μ is not worth finishing
        let lbfgs = Lbfgs {
            max_iter: (opts.max_iter / 10).max(50),
            ..lbfgs
        };
        let mut scratch = vec![0.0; x.len()];
        let e0 = energy.eval(&x, &mut scratch)?.abs().max(1e-6);
        energy.mu = 1e-2 * e0;
        loop {
            energy.trail.clear();
            let out = lbfgs.minimize(&mut energy, &x)?;
            iterations += out.iterations;
            x = out.x;
            if energy.mu * (n as f64) < opts.barrier_gap {
                break;
            }
            energy.mu *= 0.1;
        }
    } else {
        let out = lbfgs.minimize(&mut energy, &x)?;
        iterations += out.iterations;
        if out.status == LbfgsStatus::Stalled && out.iterations == 0 {
            return Err(Error::SeedFailure);
        }
        x = out.x;
    }
    energy.load(&x);
    Ok((energy.curve, iterations))
}

/// Estimate the `g_S`-distance between two points by minimizing discrete
/// curve energy from several seed curves.
pub fn slice_distance(
    chart: &Chart,
    x0: &[f64],
    x1: &[f64],
    opts: &DistanceOptions,
) -> Result<DistanceResult> {
    chart.check_point(x0)?;
    chart.check_point(x1)?;
    if opts.segments < 2 {
        return Err(Error::invalid("distance solver needs at least 2 segments"));
    }
    if x0 == x1 {
        let curve = SliceCurve::chord(x0, x1, opts.segments)?;
        return Ok(DistanceResult {
            length: 0.0,
            attained: true,
            minimizer: Some(curve.clone()),
            best_curve: curve,
            min_boundary_distance: chart.boundary_distance(x0),
            iterations: 0,
        });
    }
    let seeds = seed_curves(chart, x0, x1, opts.segments)?;
    if seeds.is_empty() {
        return Err(Error::Unreachable);
    }
    let mut best: Option<(f64, SliceCurve)> = None;
    let mut iterations = 0;
    for seed in seeds {
        let (curve, it) = minimize_from(chart, seed, opts)?;
        iterations += it;
        let len = curve.length(chart)?;
        if best.as_ref().map_or(true, |(l, _)| len < *l) {
            best = Some((len, curve));
        }
    }
    let (length, curve) = best.expect("at least one seed");
    let interior = curve.segments();
    let min_bd = (1..interior)
        .map(|i| chart.boundary_distance(curve.node(i)))
        .chain((1..interior.saturating_sub(1)).map(|i| chart.segment_boundary_distance(curve.node(i), curve.node(i + 1)).0))
        .fold(f64::INFINITY, f64::min);
    let attained = min_bd >= opts.boundary_eps;
    Ok(DistanceResult {
        length,
        attained,
        minimizer: attained.then(|| curve.clone()),
        best_curve: curve,
        min_boundary_distance: min_bd,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn plane_distance_is_chord() {
        let r = slice_distance(
            &Chart::euclidean(2),
            &[0.0, 0.0],
            &[2.0, 2.0],
            &DistanceOptions::default(),
        )
        .unwrap();
        assert!((r.length - 8f64.sqrt()).abs() < 1e-9);
        assert!(r.attained);
        assert!(r.minimizer.is_some());
    }

    #[test]
    fn identical_endpoints() {
        let r = slice_distance(&Chart::polar(), &[1.0, 0.3], &[1.0, 0.3], &Default::default()).unwrap();
        assert_eq!(r.length, 0.0);
        assert!(r.attained);
    }

    #[test]
    fn slit_plane_infimum_not_attained() {
        let st = catalog::spacetime("slit_plane").unwrap();
        let r = slice_distance(st.chart(), &[0.0, 0.0], &[2.0, 2.0], &Default::default()).unwrap();
        assert!((r.length - 8f64.sqrt()).abs() < 1e-3, "length {}", r.length);
        assert!(!r.attained, "min boundary distance {}", r.min_boundary_distance);
        assert!(r.minimizer.is_none());
    }

    #[test]
    fn polar_distance_matches_euclid() {
        // (1, 0) to (1, π/2) in polar coordinates: chord length √2.
        let r = slice_distance(
            &Chart::polar(),
            &[1.0, 0.0],
            &[1.0, std::f64::consts::FRAC_PI_2],
            &DistanceOptions::default(),
        )
        .unwrap();
        assert!((r.length - 2f64.sqrt()).abs() < 1e-4, "{}", r.length);
        assert!(r.attained);
    }

    #[test]
    fn across_the_slit_floor_is_unreachable_in_1d() {
        // two points of a 1-d chart with a hole between them
        let chart = Chart::euclidean(1)
            .with_domain(|x| x[0].abs() > 0.5)
            .with_boundary_distance(|x| (x[0].abs() - 0.5).max(0.0));
        assert!(matches!(
            slice_distance(&chart, &[-1.0], &[1.0], &Default::default()),
            Err(Error::Unreachable)
        ));
    }
}
