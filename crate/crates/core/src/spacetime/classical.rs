//! Reduction of geodesics to classical trajectories in the potential
//! `V = -1/β`, the converse lift, and the Jacobi-metric check.
//!
//! Normalizing `λ = √2` (reparameterize `γ̃(σ) = γ(cσ)` with `c = √2/λ0`),
//! the slice part obeys `D_σ x' = -∇V` and
//! `C̃ = -2/β + g_S(x', x') = 2E`, i.e. `E = C̃/2 = C0/λ0²`.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::{GeodesicTrajectory, StaticSpacetime};
use crate::manifold::{mat_vec, quad_form, SlicePoint};
use crate::ode::{self, OdeError, OdeOptions, OdeSample, RhsFailure, StepCheck, Termination};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalSample {
    pub s: f64,
    pub x: SlicePoint,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ClassicalTrajectory {
    pub samples: Vec<ClassicalSample>,
    /// `E = g_S(x', x')/2 + V(x)` at the first sample.
    pub energy: f64,
    /// `max |E(s) - E|` over the samples.
    pub energy_drift: f64,
    pub termination: Termination,
    dense: Vec<OdeSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub lambda0: f64,
    /// `c = √2/|λ0|`: the reduced parameter is `σ = s/c`.
    pub scale: f64,
    /// `λ0 < 0` is reduced through `t ↦ -t`.
    pub time_reversed: bool,
    /// `λ` recomputed from the rescaled data at the first sample.
    pub rescaled_lambda: f64,
    pub energy: f64,
    /// Max `g_S`-norm of `D_σ x' + ∇V`.
    pub residual: f64,
    pub energy_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    /// Max `g_R`-norm defect of the geodesic system along the lifted curve.
    pub residual: f64,
    pub lambda_drift: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobiOptions {
    /// Smallest admissible `E - V` along the curve.
    pub floor: f64,
}

impl Default for JacobiOptions {
    fn default() -> Self {
        JacobiOptions { floor: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiReport {
    pub energy: f64,
    /// Max `g_E`-norm of the `g_E`-geodesic defect after arclength reparameterization.
    pub residual: f64,
    pub min_margin: f64,
    /// `g_E`-length of the curve.
    pub length: f64,
}

fn potential(st: &StaticSpacetime, x: &[f64]) -> Result<f64> {
    Ok(-1.0 / st.beta_at(x)?)
}

/// Classical acceleration `x'' = -Γ(x', x') - ∇V`, `∇V = ∇β/β²`.
fn classical_accel(st: &StaticSpacetime, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let b = st.beta_at(x)?;
    let db = st.beta_grad_at(x)?;
    let gam = st.chart().christoffel_at(x)?;
    let ginv = st.chart().metric_inverse_at(x)?;
    let grad = mat_vec(&ginv, &db);
    let q = gam.contract(v, v);
    Ok(q.iter().zip(&grad).map(|(q, g)| -q - g / (b * b)).collect())
}

impl ClassicalTrajectory {
    fn from_dense(st: &StaticSpacetime, dense: Vec<OdeSample>, termination: Termination) -> Result<Self> {
        if dense.is_empty() {
            return Err(Error::invalid("empty classical trajectory"));
        }
        let n = dense[0].y.len() / 2;
        let mut samples = Vec::with_capacity(dense.len());
        let mut energies = Vec::with_capacity(dense.len());
        for p in &dense {
            let (x, v) = p.y.split_at(n);
            let g = st.chart().metric_at(x)?;
            energies.push(0.5 * quad_form(&g, v, v) + potential(st, x)?);
            samples.push(ClassicalSample {
                s: p.s,
                x: SlicePoint(x.to_vec()),
                v: v.to_vec(),
            });
        }
        let energy = energies[0];
        let energy_drift = energies.iter().map(|e| (e - energy).abs()).fold(0.0, f64::max);
        Ok(ClassicalTrajectory {
            samples,
            energy,
            energy_drift,
            termination,
            dense,
        })
    }

    /// Build from positions and velocities; accelerations are recomputed
    /// from the classical equation.
    pub fn from_samples(st: &StaticSpacetime, samples: Vec<ClassicalSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empty classical trajectory"));
        }
        if samples.windows(2).any(|w| !(w[1].s > w[0].s)) {
            return Err(Error::invalid("classical samples must be strictly increasing in s"));
        }
        let dense = samples
            .iter()
            .map(|p| {
                let a = classical_accel(st, &p.x, &p.v)?;
                Ok(OdeSample {
                    s: p.s,
                    y: p.x.iter().chain(&p.v).copied().collect(),
                    f: p.v.iter().chain(&a).copied().collect(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ClassicalTrajectory::from_dense(st, dense, Termination::ReachedSMax)
    }

    pub fn dim(&self) -> usize {
        self.samples[0].x.len()
    }

    pub fn s_end(&self) -> f64 {
        self.samples.last().map(|p| p.s).unwrap_or(0.0)
    }

    /// Cubic Hermite dense output of `(x, x')`, clamped to the range.
    pub fn eval(&self, s: f64) -> (Vec<f64>, Vec<f64>) {
        let pts = &self.dense;
        let y = if pts.len() == 1 || s <= pts[0].s {
            pts[0].y.clone()
        } else if s >= pts[pts.len() - 1].s {
            pts[pts.len() - 1].y.clone()
        } else {
            let i = pts.partition_point(|p| p.s <= s);
            ode::hermite(&pts[i - 1], &pts[i], s)
        };
        let n = self.dim();
        (y[..n].to_vec(), y[n..].to_vec())
    }

    fn accel(&self, i: usize) -> &[f64] {
        &self.dense[i].f[self.dim()..]
    }
}

/// Integrate `D_s x' = -∇V` from `(x0, v0)` over `[0, s_max]`.
pub fn integrate_classical(
    st: &StaticSpacetime,
    x0: &[f64],
    v0: &[f64],
    s_max: f64,
    tol: f64,
) -> Result<ClassicalTrajectory> {
    let n = st.dim();
    if v0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: v0.len(),
        });
    }
    st.beta_at(x0)?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    let chart = st.chart();
    let rhs = |_s: f64, y: &[f64], out: &mut [f64]| -> std::result::Result<(), RhsFailure> {
        let (x, v) = y.split_at(n);
        if !chart.in_domain(x) || !(st.beta_raw(x) > 0.0) {
            return Err(RhsFailure::OutOfDomain);
        }
        let a = classical_accel(st, x, v).map_err(RhsFailure::Fatal)?;
        out[..n].copy_from_slice(v);
        out[n..].copy_from_slice(&a);
        Ok(())
    };
    let monitor = |prev: &[f64], next: &[f64]| {
        if chart.has_boundary() && !chart.segment_admissible(&prev[..n], &next[..n]) {
            StepCheck::Crossed
        } else if next.iter().any(|c| !(c.abs() <= 1e100)) {
            StepCheck::BlowUp
        } else {
            StepCheck::Continue
        }
    };
    let y0: Vec<f64> = x0.iter().chain(v0).copied().collect();
    match ode::integrate(rhs, &y0, 0.0, s_max, &OdeOptions::with_tol(tol), monitor) {
        Ok(sol) => ClassicalTrajectory::from_dense(st, sol.samples, sol.termination),
        Err(OdeError::Fatal(e)) => Err(e),
        Err(OdeError::Underflow { s, step, .. }) => Err(Error::Stiffness {
            s,
            step,
            partial: None,
        }),
    }
}

/// Rescale a geodesic to `λ = √2` and read off its classical trajectory.
pub fn reduce_to_classical(
    st: &StaticSpacetime,
    traj: &GeodesicTrajectory,
) -> Result<(ClassicalTrajectory, ReductionReport)> {
    let lambda0 = traj.lambda0;
    if lambda0 == 0.0 || !lambda0.is_finite() {
        return Err(Error::NotReducible);
    }
    let n = traj.dim();
    let c = SQRT_2 / lambda0.abs();
    let dense: Vec<OdeSample> = traj
        .samples
        .iter()
        .zip(traj.derivatives())
        .map(|(p, f)| {
            let v: Vec<f64> = p.state.x_dot.iter().map(|d| d * c).collect();
            let a: Vec<f64> = f[n + 2..].iter().map(|d| d * c * c).collect();
            OdeSample {
                s: p.s / c,
                y: p.state.x.iter().chain(&v).copied().collect(),
                f: v.iter().chain(&a).copied().collect(),
            }
        })
        .collect();
    let cl = ClassicalTrajectory::from_dense(st, dense, traj.termination)?;

    let first = traj.first();
    let rescaled_lambda = st.beta_at(&first.x)? * first.t_dot.abs() * c;
    let mut residual: f64 = 0.0;
    for (i, p) in cl.samples.iter().enumerate() {
        let b = st.beta_at(&p.x)?;
        let db = st.beta_grad_at(&p.x)?;
        let gam = st.chart().christoffel_at(&p.x)?;
        let g = st.chart().metric_at(&p.x)?;
        let ginv = st.chart().metric_inverse_at(&p.x)?;
        let grad_v = mat_vec(&ginv, &db);
        let q = gam.contract(&p.v, &p.v);
        let r: Vec<f64> = (0..n)
            .map(|k| cl.accel(i)[k] + q[k] + grad_v[k] / (b * b))
            .collect();
        residual = residual.max(quad_form(&g, &r, &r).sqrt());
    }
    let report = ReductionReport {
        lambda0,
        scale: c,
        time_reversed: lambda0 < 0.0,
        rescaled_lambda,
        energy: cl.energy,
        residual,
        energy_drift: cl.energy_drift,
    };
    Ok((cl, report))
}

/// Lift a classical trajectory to the geodesic with `λ = √2` through
/// `t(s) = t0 + √2 ∫₀^s du/β(x(u))`.
pub fn lift_classical(
    st: &StaticSpacetime,
    cl: &ClassicalTrajectory,
    t0: f64,
) -> Result<(GeodesicTrajectory, LiftReport)> {
    let n = cl.dim();
    let mut t = t0;
    let mut dense = Vec::with_capacity(cl.samples.len());
    let mut prev: Option<(f64, f64, f64)> = None; // (s, f, f')
    for (i, p) in cl.samples.iter().enumerate() {
        let b = st.beta_at(&p.x)?;
        let db = st.beta_grad_at(&p.x)?;
        let dbv: f64 = db.iter().zip(&p.v).map(|(a, b)| a * b).sum();
        let f = 1.0 / b;
        let fp = -dbv / (b * b);
        if let Some((s0, f0, fp0)) = prev {
            // cubic Hermite quadrature of 1/β
            let h = p.s - s0;
            t += SQRT_2 * (0.5 * h * (f0 + f) + h * h / 12.0 * (fp0 - fp));
        }
        prev = Some((p.s, f, fp));
        let t_dot = SQRT_2 * f;
        let mut y = Vec::with_capacity(2 * n + 2);
        y.push(t);
        y.extend_from_slice(&p.x);
        y.push(t_dot);
        y.extend_from_slice(&p.v);
        let mut d = Vec::with_capacity(2 * n + 2);
        d.push(t_dot);
        d.extend_from_slice(&p.v);
        d.push(SQRT_2 * fp);
        d.extend_from_slice(cl.accel(i));
        dense.push(OdeSample { s: p.s, y, f: d });
    }
    let traj = GeodesicTrajectory::from_dense(st, dense, cl.termination)?;
    let residual = traj.geodesic_residual(st)?;
    let report = LiftReport {
        residual,
        lambda_drift: traj
            .samples
            .iter()
            .map(|p| (p.lambda - SQRT_2).abs())
            .fold(0.0, f64::max),
    };
    Ok((traj, report))
}

/// Check that the classical trajectory is a pregeodesic of the Jacobi
/// metric `g_E = (E - V) g_S`.
///
/// With `ρ = dτ/dσ = √((E - V) g_S(x', x'))` the `g_E`-arclength
/// parameterization has `x_τ = x'/ρ` and `x_ττ = x''/ρ² - x' ρ'/ρ³`; the
/// reported residual is the `g_E`-norm of `x_ττ + Γ_E(x_τ, x_τ)`.
pub fn jacobi_check(
    st: &StaticSpacetime,
    cl: &ClassicalTrajectory,
    opts: &JacobiOptions,
) -> Result<JacobiReport> {
    let e = cl.energy;
    let n = cl.dim();
    let mut min_margin = f64::INFINITY;
    for p in &cl.samples {
        let margin = e - potential(st, &p.x)?;
        if !(margin >= opts.floor) {
            return Err(Error::NearTurningPoint { s: p.s, margin });
        }
        min_margin = min_margin.min(margin);
    }
    let jac = st.jacobi_chart(e);
    let mut residual: f64 = 0.0;
    let mut rhos = Vec::with_capacity(cl.samples.len());
    for (i, p) in cl.samples.iter().enumerate() {
        let x = &p.x;
        let v = &p.v;
        let a = cl.accel(i);
        let b = st.beta_at(x)?;
        let db = st.beta_grad_at(x)?;
        let g = st.chart().metric_at(x)?;
        let gam = st.chart().christoffel_at(x)?;
        let f = e + 1.0 / b;
        let df_v: f64 = -db.iter().zip(v).map(|(d, w)| d * w).sum::<f64>() / (b * b);
        let q = gam.contract(v, v);
        let cov: Vec<f64> = (0..n).map(|k| a[k] + q[k]).collect();
        let vv = quad_form(&g, v, v);
        let rho = (f * vv).sqrt();
        rhos.push((p.s, rho));
        if !(rho > 0.0) {
            continue;
        }
        let rho_p = (df_v * vv + 2.0 * f * quad_form(&g, v, &cov)) / (2.0 * rho);
        let xt: Vec<f64> = v.iter().map(|w| w / rho).collect();
        let gam_e = jac.christoffel_at(x)?;
        let qe = gam_e.contract(&xt, &xt);
        let r: Vec<f64> = (0..n)
            .map(|k| a[k] / (rho * rho) - v[k] * rho_p / (rho * rho * rho) + qe[k])
            .collect();
        residual = residual.max((f * quad_form(&g, &r, &r)).sqrt());
    }
    let length = rhos
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    Ok(JacobiReport {
        energy: e,
        residual,
        min_margin,
        length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::spacetime::{integrate_geodesic, GeodesicOptions, GeodesicState};

    #[test]
    fn minkowski_reduction_is_free_motion() {
        let st = catalog::spacetime("minkowski").unwrap();
        let init = GeodesicState::new(0.0, vec![0.0], SQRT_2, vec![0.5]);
        let tr = integrate_geodesic(&st, &init, 3.0, &GeodesicOptions::default()).unwrap();
        let (cl, rep) = reduce_to_classical(&st, &tr).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert_eq!(rep.scale, 1.0);
        assert!((cl.energy - (0.125 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rescaled_lambda_is_root_two() {
        let st = catalog::spacetime("quad_beta").unwrap();
        // β(0.5, 0) = 1.25, λ0 = 3
        let init = GeodesicState::new(0.0, vec![0.5, 0.0], 3.0 / 1.25, vec![0.2, -0.4]);
        let tr = integrate_geodesic(&st, &init, 2.0, &GeodesicOptions::default()).unwrap();
        let (_, rep) = reduce_to_classical(&st, &tr).unwrap();
        assert!((rep.rescaled_lambda - SQRT_2).abs() < 1e-12);
        assert!((rep.energy - tr.c0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn zero_lambda_is_not_reducible() {
        let st = catalog::spacetime("quad_beta").unwrap();
        let init = GeodesicState::new(0.0, vec![0.0, 0.0], 0.0, vec![1.0, 0.0]);
        let tr = integrate_geodesic(&st, &init, 1.0, &GeodesicOptions::default()).unwrap();
        assert!(matches!(reduce_to_classical(&st, &tr), Err(Error::NotReducible)));
    }

    #[test]
    fn lift_of_rest_point() {
        let st = catalog::spacetime("quad_beta").unwrap();
        // x = 0 is a critical point of V
        let cl = integrate_classical(&st, &[0.0, 0.0], &[0.0, 0.0], 4.0, 1e-10).unwrap();
        let (tr, rep) = lift_classical(&st, &cl, 1.0).unwrap();
        assert_eq!(rep.residual, 0.0);
        let last = tr.samples.last().unwrap();
        assert!((last.state.t - (1.0 + SQRT_2 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn lift_of_flat_line() {
        let st = catalog::spacetime("minkowski").unwrap();
        let cl = integrate_classical(&st, &[0.0], &[0.7], 2.0, 1e-10).unwrap();
        let (tr, _) = lift_classical(&st, &cl, 0.0).unwrap();
        for p in &tr.samples {
            assert!((p.state.t_dot - SQRT_2).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobi_flat_straight_line() {
        let st = StaticSpacetime::new("flat", crate::manifold::Chart::euclidean(2), |_| 1.0)
            .with_beta_grad(|_| vec![0.0, 0.0]);
        // E = 0 => |v|²/2 = 1
        let cl = integrate_classical(&st, &[0.0, 0.0], &[1.0, 1.0], 3.0, 1e-10).unwrap();
        assert!(cl.energy.abs() < 1e-15);
        let rep = jacobi_check(&st, &cl, &JacobiOptions::default()).unwrap();
        assert!(rep.residual < 1e-14);
    }

    #[test]
    fn jacobi_floor_violation() {
        let st = catalog::spacetime("quad_beta").unwrap();
        // at rest at the origin: E = V(0), margin 0
        let cl = integrate_classical(&st, &[0.0, 0.0], &[0.0, 0.0], 1.0, 1e-10).unwrap();
        assert!(matches!(
            jacobi_check(&st, &cl, &JacobiOptions::default()),
            Err(Error::NearTurningPoint { .. })
        ));
    }
}
