//! Shooting oracle: geodesics `γ_w` from `p0 = (t0, x0)` with initial
//! velocity `w = (ṫ, ẋ)`, solved for `γ_w(1) = p1`.
//!
//! For a one-dimensional slice the initial direction is swept on a circle of
//! `g_R`-unit vectors and every crossing of the target position is followed;
//! sign changes of the time miss are bisected. For two-dimensional slices a
//! damped Newton iteration on `γ_w(1) - p1` is started from the chord and,
//! when that fails, from the closest approaches of a direction grid.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::euclid_dist;
use crate::ode::Termination;
use crate::spacetime::{
    integrate_geodesic, CausalCharacter, GeodesicOptions, GeodesicState, GeodesicTrajectory, StaticSpacetime,
    DEFAULT_NULL_EPS,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootOptions {
    /// Angular resolution of the direction sweep (one-dimensional slices).
    pub angle_res: f64,
    /// Angular resolution of the fallback direction grid (two-dimensional slices).
    pub grid_res: f64,
    /// Parameter horizon for unit `g_R`-speed sweep geodesics.
    pub s_max: f64,
    pub tol: f64,
    /// Largest accepted endpoint miss `|γ_w(1) - p1|`.
    pub miss_tol: f64,
    pub max_newton: usize,
    pub null_eps: f64,
}

impl Default for ShootOptions {
    fn default() -> Self {
        ShootOptions {
            angle_res: 1e-3,
            grid_res: 0.05,
            s_max: 30.0,
            tol: 1e-10,
            miss_tol: 1e-8,
            max_newton: 40,
            null_eps: DEFAULT_NULL_EPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShootVerdict {
    Reached,
    NotReachedAtSweepResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShootSolution {
    /// `(ṫ, ẋ)` at `p0`.
    pub initial_velocity: Vec<f64>,
    pub miss: f64,
    pub lambda: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub character: CausalCharacter,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShootResult {
    pub verdict: ShootVerdict,
    /// Solutions ordered by the `g_R`-norm of the initial velocity.
    pub solutions: Vec<ShootSolution>,
    pub directions_swept: usize,
    /// The geodesic of the first solution on `[0, 1]`.
    #[serde(skip)]
    pub trajectory: Option<GeodesicTrajectory>,
}

struct Shooter<'a> {
    st: &'a StaticSpacetime,
    t0: f64,
    x0: Vec<f64>,
    target: Vec<f64>,
    opts: &'a ShootOptions,
    gopts: GeodesicOptions,
}

impl Shooter<'_> {
    fn initial(&self, w: &[f64]) -> GeodesicState {
        GeodesicState::new(self.t0, self.x0.clone(), w[0], w[1..].to_vec())
    }

    /// `γ_w(1)` as `(t, x)`, or `None` if the geodesic does not survive to `s = 1`.
    fn endpoint(&self, w: &[f64]) -> Option<Vec<f64>> {
        let tr = integrate_geodesic(self.st, &self.initial(w), 1.0, &self.gopts).ok()?;
        if tr.termination != Termination::ReachedSMax {
            return None;
        }
        let last = tr.last();
        let mut p = vec![last.t];
        p.extend_from_slice(&last.x);
        Some(p)
    }

    fn miss(&self, w: &[f64]) -> f64 {
        self.endpoint(w)
            .map(|p| euclid_dist(&p, &self.target))
            .unwrap_or(f64::INFINITY)
    }

    /// Unit `g_R` direction from frame angles.
    fn direction(&self, angles: &[f64]) -> Vec<f64> {
        let b = self.st.beta_raw(&self.x0).sqrt();
        let g = self.st.chart().metric_raw(&self.x0);
        let n = self.x0.len();
        // spatial g_S-orthonormal frame by Cholesky: columns of L⁻ᵀ
        let l = g.cholesky().expect("validated metric").l();
        let linv_t = l.try_inverse().expect("triangular").transpose();
        let (ct, spatial): (f64, Vec<f64>) = match n {
            1 => (angles[0].cos(), vec![angles[0].sin()]),
            _ => {
                let (th, ph) = (angles[0], angles[1]);
                (th.cos(), vec![th.sin() * ph.cos(), th.sin() * ph.sin()])
            }
        };
        let mut w = vec![ct / b];
        for i in 0..n {
            w.push((0..n).map(|j| linv_t[(i, j)] * spatial[j]).sum());
        }
        w
    }

    fn g_r_norm(&self, w: &[f64]) -> f64 {
        let b = self.st.beta_raw(&self.x0);
        let g = self.st.chart().metric_raw(&self.x0);
        let n = self.x0.len();
        let mut q = b * w[0] * w[0];
        for i in 0..n {
            for j in 0..n {
                q += g[(i, j)] * w[1 + i] * w[1 + j];
            }
        }
        q.sqrt()
    }

    fn solution(&self, w: Vec<f64>) -> Option<ShootSolution> {
        let miss = self.miss(&w);
        if !(miss <= self.opts.miss_tol) {
            return None;
        }
        let s0 = self.initial(&w);
        let lambda = self.st.lambda(&s0).ok()?;
        let c = self.st.norm_c(&s0).ok()?;
        Some(ShootSolution {
            initial_velocity: w,
            miss,
            lambda,
            c,
            character: CausalCharacter::from_norm(c, self.opts.null_eps),
        })
    }

    /// Crossings `(s, t)` of the target position along the unit-speed ray at `angle`.
    fn crossings(&self, angle: f64) -> Vec<(f64, f64)> {
        let u = self.direction(&[angle]);
        let Ok(tr) = integrate_geodesic(self.st, &self.initial(&u), self.opts.s_max, &self.gopts) else {
            return vec![];
        };
        let x1 = self.target[1];
        let mut out = vec![];
        for w in tr.samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let fa = a.state.x[0] - x1;
            let fb = b.state.x[0] - x1;
            if a.s == 0.0 && fa == 0.0 {
                continue;
            }
            if fb == 0.0 {
                out.push((b.s, b.state.t));
            } else if fa * fb < 0.0 {
                let (mut lo, mut hi) = (a.s, b.s);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let fm = tr.state_at(mid).x[0] - x1;
                    if (fm < 0.0) == (fa < 0.0) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let s = 0.5 * (lo + hi);
                out.push((s, tr.state_at(s).t));
            }
        }
        out
    }

    fn sweep_1d(&self) -> (Vec<Vec<f64>>, usize) {
        let steps = (std::f64::consts::TAU / self.opts.angle_res).ceil() as usize;
        let res = std::f64::consts::TAU / steps as f64;
        let table: Vec<Vec<(f64, f64)>> = (0..=steps)
            .into_par_iter()
            .map(|k| self.crossings(k as f64 * res))
            .collect();
        let t1 = self.target[0];
        let mut found = vec![];
        for k in 0..steps {
            let (a, b) = (&table[k], &table[k + 1]);
            for idx in 0..a.len().min(b.len()) {
                let fa = a[idx].1 - t1;
                let fb = b[idx].1 - t1;
                let (th_a, th_b) = (k as f64 * res, (k + 1) as f64 * res);
                if fa == 0.0 {
                    found.push(self.scaled(th_a, a[idx].0));
                } else if fa * fb < 0.0 {
                    if let Some(w) = self.bisect_angle(th_a, th_b, fa, idx) {
                        found.push(w);
                    }
                }
            }
        }
        (found, steps + 1)
    }

    fn scaled(&self, angle: f64, s: f64) -> Vec<f64> {
        self.direction(&[angle]).iter().map(|v| v * s).collect()
    }

    fn bisect_angle(&self, mut lo: f64, mut hi: f64, f_lo: f64, idx: usize) -> Option<Vec<f64>> {
        let t1 = self.target[0];
        let mut best = None;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let cr = self.crossings(mid);
            let (s, t) = *cr.get(idx)?;
            let fm = t - t1;
            best = Some(self.scaled(mid, s));
            if fm == 0.0 {
                break;
            }
            if (fm < 0.0) == (f_lo < 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        best
    }

    /// Damped Newton on `F(w) = γ_w(1) - p1` with a forward-difference Jacobian.
    fn newton(&self, w0: Vec<f64>) -> Option<Vec<f64>> {
        let m = w0.len();
        let mut w = w0;
        let mut p = self.endpoint(&w)?;
        let mut f: Vec<f64> = p.iter().zip(&self.target).map(|(a, b)| a - b).collect();
        let mut fnorm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        for _ in 0..self.opts.max_newton {
            if fnorm <= 0.1 * self.opts.miss_tol {
                break;
            }
            let mut jac = DMatrix::zeros(m, m);
            for j in 0..m {
                let h = 1e-7 * (1.0 + w[j].abs());
                let mut wp = w.clone();
                wp[j] += h;
                let pp = self.endpoint(&wp)?;
                for i in 0..m {
                    jac[(i, j)] = (pp[i] - p[i]) / h;
                }
            }
            let step = jac.lu().solve(&DVector::from_vec(f.clone()))?;
            let mut alpha = 1.0;
            let mut accepted = false;
            while alpha > 1e-6 {
                let wn: Vec<f64> = w.iter().zip(step.iter()).map(|(a, d)| a - alpha * d).collect();
                if let Some(pn) = self.endpoint(&wn) {
                    let fn_: Vec<f64> = pn.iter().zip(&self.target).map(|(a, b)| a - b).collect();
                    let nn = fn_.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if nn < fnorm {
                        w = wn;
                        p = pn;
                        f = fn_;
                        fnorm = nn;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (fnorm <= self.opts.miss_tol).then_some(w)
    }

    /// Closest approach of the unit-speed ray to the target, as a Newton seed.
    fn closest_approach(&self, angles: &[f64]) -> Option<(f64, Vec<f64>)> {
        let u = self.direction(angles);
        let tr = integrate_geodesic(self.st, &self.initial(&u), self.opts.s_max, &self.gopts).ok()?;
        let mut best: Option<(f64, f64)> = None;
        for p in &tr.samples {
            let mut q = vec![p.state.t];
            q.extend_from_slice(&p.state.x);
            let d = euclid_dist(&q, &self.target);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, p.s));
            }
        }
        let (d, s) = best?;
        Some((d, u.iter().map(|v| v * s).collect()))
    }

    fn solve_2d(&self) -> (Vec<Vec<f64>>, usize) {
        let mut chord = vec![self.target[0] - self.t0];
        chord.extend(self.target[1..].iter().zip(&self.x0).map(|(a, b)| a - b));
        if let Some(w) = self.newton(chord) {
            return (vec![w], 0);
        }
        let nt = (std::f64::consts::PI / self.opts.grid_res).ceil() as usize;
        let np = (std::f64::consts::TAU / self.opts.grid_res).ceil() as usize;
        let dirs: Vec<(f64, f64)> = (0..=nt)
            .flat_map(|i| {
                let th = std::f64::consts::PI * i as f64 / nt as f64;
                let count = if i == 0 || i == nt { 1 } else { np };
                (0..count).map(move |j| (th, std::f64::consts::TAU * j as f64 / np as f64))
            })
            .collect();
        let mut seeds: Vec<(f64, Vec<f64>)> = dirs
            .par_iter()
            .filter_map(|&(th, ph)| self.closest_approach(&[th, ph]))
            .collect();
        seeds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let found: Vec<Vec<f64>> = seeds
            .into_iter()
            .take(8)
            .filter_map(|(_, w)| self.newton(w))
            .collect();
        (found, dirs.len())
    }
}

/// Solve the two-point problem `p0 → p1` (points as `(t, x…)`) by shooting.
pub fn shooting_connect(
    st: &StaticSpacetime,
    p0: &[f64],
    p1: &[f64],
    opts: &ShootOptions,
) -> Result<ShootResult> {
    let n = st.dim();
    if n > 2 {
        return Err(Error::invalid("shooting needs a slice of dimension at most 2"));
    }
    if p0.len() != n + 1 || p1.len() != n + 1 {
        return Err(Error::Dimension {
            expected: n + 1,
            got: if p0.len() != n + 1 { p0.len() } else { p1.len() },
        });
    }
    st.beta_at(&p0[1..])?;
    st.beta_at(&p1[1..])?;
    if !(opts.angle_res > 0.0 && opts.grid_res > 0.0 && opts.s_max > 0.0 && opts.tol > 0.0) {
        return Err(Error::invalid("shooting resolutions, horizon and tolerance must be positive"));
    }
    let shooter = Shooter {
        st,
        t0: p0[0],
        x0: p0[1..].to_vec(),
        target: p1.to_vec(),
        opts,
        gopts: GeodesicOptions {
            tol: opts.tol,
            ..Default::default()
        },
    };
    let (raw, directions_swept) = if p0 == p1 {
        (vec![vec![0.0; n + 1]], 0)
    } else if n == 1 {
        shooter.sweep_1d()
    } else {
        shooter.solve_2d()
    };
    let mut solutions: Vec<(f64, ShootSolution)> = vec![];
    for w in raw {
        let w = match shooter.newton(w.clone()) {
            Some(polished) => polished,
            None => w,
        };
        if let Some(sol) = shooter.solution(w) {
            let norm = shooter.g_r_norm(&sol.initial_velocity);
            if solutions
                .iter()
                .all(|(_, s)| euclid_dist(&s.initial_velocity, &sol.initial_velocity) > 1e-6 * (1.0 + norm))
            {
                solutions.push((norm, sol));
            }
        }
    }
    solutions.sort_by(|a, b| a.0.total_cmp(&b.0));
    let solutions: Vec<ShootSolution> = solutions.into_iter().map(|(_, s)| s).collect();
    let trajectory = match solutions.first() {
        Some(s) => Some(integrate_geodesic(
            st,
            &shooter.initial(&s.initial_velocity),
            1.0,
            &shooter.gopts,
        )?),
        None => None,
    };
    Ok(ShootResult {
        verdict: if solutions.is_empty() {
            ShootVerdict::NotReachedAtSweepResolution
        } else {
            ShootVerdict::Reached
        },
        solutions,
        directions_swept,
        trajectory,
    })
}
