//! The standard static spacetime `ℝ × S` with metric `-β dt² + g_S`.
//!
//! `K = ∂_t` is the static Killing field, `β = -g(K, K)`. Along a geodesic
//! `λ = β ṫ` and `C = -β ṫ² + g_S(ẋ, ẋ)` are conserved, and the auxiliary
//! Riemannian metric `g_R = β dt² + g_S` satisfies
//! `g_R(γ̇, γ̇) = C + 2λ²/β` identically.

mod classical;
mod trajectory;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::manifold::{mat_vec, quad_form, Chart, Christoffel, PointFn, SlicePoint};
use crate::{Error, Result};

pub use classical::{
    integrate_classical, jacobi_check, lift_classical, reduce_to_classical, ClassicalSample,
    ClassicalTrajectory, JacobiOptions, JacobiReport, LiftReport, ReductionReport,
};
pub use trajectory::{
    integrate_geodesic, Drift, GeodesicOptions, GeodesicTrajectory, TrajectorySample,
};

/// Default threshold on `|C|` below which a vector counts as null.
pub const DEFAULT_NULL_EPS: f64 = 1e-9;

#[derive(Clone)]
pub struct StaticSpacetime {
    label: String,
    chart: Chart,
    beta: PointFn<f64>,
    beta_grad: Option<PointFn<Vec<f64>>>,
}

impl fmt::Debug for StaticSpacetime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StaticSpacetime")
            .field("label", &self.label)
            .field("chart", &self.chart)
            .field("analytic_beta_grad", &self.beta_grad.is_some())
            .finish()
    }
}

/// A point of `ℝ × S` together with its tangent vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    pub x: SlicePoint,
    pub t_dot: f64,
    pub x_dot: Vec<f64>,
}

/// `d/ds` of a [`GeodesicState`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub t_dot: f64,
    pub x_dot: Vec<f64>,
    pub t_ddot: f64,
    pub x_ddot: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalCharacter {
    Timelike,
    Null,
    Spacelike,
}

impl CausalCharacter {
    pub fn from_norm(c: f64, null_eps: f64) -> Self {
        if c < -null_eps {
            CausalCharacter::Timelike
        } else if c <= null_eps {
            CausalCharacter::Null
        } else {
            CausalCharacter::Spacelike
        }
    }

    pub fn is_causal(self) -> bool {
        !matches!(self, CausalCharacter::Spacelike)
    }
}

impl fmt::Display for CausalCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CausalCharacter::Timelike => "timelike",
            CausalCharacter::Null => "null",
            CausalCharacter::Spacelike => "spacelike",
        })
    }
}

impl GeodesicState {
    pub fn new(t: f64, x: impl Into<Vec<f64>>, t_dot: f64, x_dot: impl Into<Vec<f64>>) -> Self {
        GeodesicState {
            t,
            x: SlicePoint(x.into()),
            t_dot,
            x_dot: x_dot.into(),
        }
    }

    /// Packs as `[t, x…, ṫ, ẋ…]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + 2 * self.x.len());
        v.push(self.t);
        v.extend_from_slice(&self.x);
        v.push(self.t_dot);
        v.extend_from_slice(&self.x_dot);
        v
    }

    pub fn from_slice(y: &[f64]) -> Self {
        let n = y.len() / 2 - 1;
        GeodesicState {
            t: y[0],
            x: SlicePoint(y[1..=n].to_vec()),
            t_dot: y[n + 1],
            x_dot: y[n + 2..].to_vec(),
        }
    }
}

impl StaticSpacetime {
    pub fn new(
        label: impl Into<String>,
        chart: Chart,
        beta: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        StaticSpacetime {
            label: label.into(),
            chart,
            beta: Arc::new(beta),
            beta_grad: None,
        }
    }

    pub fn with_beta_grad(
        mut self,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.beta_grad = Some(Arc::new(grad));
        self
    }

    pub fn without_analytic_beta_grad(mut self) -> Self {
        self.beta_grad = None;
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn beta_at(&self, x: &[f64]) -> Result<f64> {
        self.chart.check_point(x)?;
        let b = (self.beta)(x);
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::NonPositiveBeta {
                point: x.to_vec(),
                value: b,
            });
        }
        Ok(b)
    }

    pub(crate) fn beta_raw(&self, x: &[f64]) -> f64 {
        (self.beta)(x)
    }

    /// Coordinate differential `∂_i β` (analytic, else central differences).
    pub fn beta_grad_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.chart.check_point(x)?;
        if let Some(g) = &self.beta_grad {
            return Ok(g(x));
        }
        Ok(self.beta_grad_fd(x))
    }

    pub fn beta_grad_fd(&self, x: &[f64]) -> Vec<f64> {
        let mut xp = x.to_vec();
        (0..x.len())
            .map(|i| {
                let h = (self.chart.fd_step() * x[i].abs()).max(crate::manifold::FD_FLOOR);
                xp[i] = x[i] + h;
                let bp = (self.beta)(&xp);
                xp[i] = x[i] - h;
                let bm = (self.beta)(&xp);
                xp[i] = x[i];
                (bp - bm) / (2.0 * h)
            })
            .collect()
    }

    fn check_state(&self, state: &GeodesicState) -> Result<()> {
        let n = self.dim();
        if state.x.len() != n || state.x_dot.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: state.x.len().max(state.x_dot.len()),
            });
        }
        Ok(())
    }

    /// `λ = β(x) ṫ`.
    pub fn lambda(&self, state: &GeodesicState) -> Result<f64> {
        Ok(self.beta_at(&state.x)? * state.t_dot)
    }

    /// `C = g(γ̇, γ̇) = -β ṫ² + g_S(ẋ, ẋ)`.
    pub fn norm_c(&self, state: &GeodesicState) -> Result<f64> {
        self.check_state(state)?;
        let b = self.beta_at(&state.x)?;
        let g = self.chart.metric_at(&state.x)?;
        Ok(-b * state.t_dot * state.t_dot + quad_form(&g, &state.x_dot, &state.x_dot))
    }

    /// `g_R(γ̇, γ̇) = β ṫ² + g_S(ẋ, ẋ)`.
    pub fn aux_norm_sq(&self, state: &GeodesicState) -> Result<f64> {
        self.check_state(state)?;
        let b = self.beta_at(&state.x)?;
        let g = self.chart.metric_at(&state.x)?;
        Ok(b * state.t_dot * state.t_dot + quad_form(&g, &state.x_dot, &state.x_dot))
    }

    pub fn causal_character(&self, state: &GeodesicState, null_eps: f64) -> Result<CausalCharacter> {
        Ok(CausalCharacter::from_norm(self.norm_c(state)?, null_eps))
    }

    /// Right-hand side of the geodesic system:
    /// `ẍ^k = -Γ^k_{ij} ẋ^i ẋ^j - ½ ṫ² (∇β)^k`, `ẗ = -ṫ ∂_iβ ẋ^i / β`.
    pub fn geodesic_rhs(&self, state: &GeodesicState) -> Result<StateDerivative> {
        self.check_state(state)?;
        let x = &state.x;
        let b = self.beta_at(x)?;
        let db = self.beta_grad_at(x)?;
        let gam = self.chart.christoffel_at(x)?;
        let ginv = self.chart.metric_inverse_at(x)?;
        Ok(geodesic_accel(state.t_dot, &state.x_dot, b, &db, &gam, &ginv))
    }

    /// The auxiliary Riemannian metric `g_R = β dt² + g_S` on `ℝ × S`,
    /// as a chart in coordinates `(t, x)`.
    pub fn aux_chart(&self) -> Chart {
        let n = self.dim();
        let metric_st = self.clone();
        let domain_st = self.clone();
        let gam_st = self.clone();
        let bd_st = self.clone();
        let mut chart = Chart::new(format!("{}:g_R", self.label), n + 1, move |y| {
            let x = &y[1..];
            let gs = metric_st.chart.metric_raw(x);
            let mut m = DMatrix::zeros(n + 1, n + 1);
            m[(0, 0)] = metric_st.beta_raw(x);
            m.view_mut((1, 1), (n, n)).copy_from(&gs);
            m
        })
        .with_domain(move |y| domain_st.chart.in_domain(&y[1..]) && domain_st.beta_raw(&y[1..]) > 0.0)
        .with_christoffel(move |y| {
            let x = &y[1..];
            let mut out = Christoffel::zeros(n + 1);
            let (Ok(b), Ok(db), Ok(gs), Ok(ginv)) = (
                gam_st.beta_at(x),
                gam_st.beta_grad_at(x),
                gam_st.chart.christoffel_at(x),
                gam_st.chart.metric_inverse_at(x),
            ) else {
                return out;
            };
            let up = mat_vec(&ginv, &db);
            for i in 0..n {
                out.set_sym(0, 0, i + 1, db[i] / (2.0 * b));
                out.set_sym(i + 1, 0, 0, -0.5 * up[i]);
                for j in 0..n {
                    for k in 0..n {
                        out.set_sym(k + 1, i + 1, j + 1, gs.get(k, i, j));
                    }
                }
            }
            out
        })
        .with_fd_step(self.chart.fd_step());
        if self.chart.has_boundary() {
            chart = chart.with_boundary_distance(move |y| bd_st.chart.boundary_distance(&y[1..]));
        }
        chart
    }

    /// The conformal slice metric `g_S* = g_S / β`.
    pub fn conformal_slice(&self) -> Chart {
        let fb = self.clone();
        let gb = self.clone();
        self.chart.conformal(
            format!("{}:g_S*", self.label),
            Arc::new(move |x: &[f64]| 1.0 / fb.beta_raw(x)),
            Arc::new(move |x: &[f64]| {
                let b = gb.beta_raw(x);
                let db = gb.beta_grad_at(x).unwrap_or_else(|_| gb.beta_grad_fd(x));
                db.iter().map(|d| -d / (b * b)).collect()
            }),
        )
    }

    /// The Jacobi metric `g_E = (E - V) g_S` with `V = -1/β`.
    pub fn jacobi_chart(&self, energy: f64) -> Chart {
        let fb = self.clone();
        let gb = self.clone();
        self.chart.conformal(
            format!("{}:g_E", self.label),
            Arc::new(move |x: &[f64]| energy + 1.0 / fb.beta_raw(x)),
            Arc::new(move |x: &[f64]| {
                let b = gb.beta_raw(x);
                let db = gb.beta_grad_at(x).unwrap_or_else(|_| gb.beta_grad_fd(x));
                db.iter().map(|d| -d / (b * b)).collect()
            }),
        )
    }
}

pub(crate) fn geodesic_accel(
    t_dot: f64,
    x_dot: &[f64],
    beta: f64,
    dbeta: &[f64],
    gam: &Christoffel,
    ginv: &DMatrix<f64>,
) -> StateDerivative {
    let grad = mat_vec(ginv, dbeta);
    let quad = gam.contract(x_dot, x_dot);
    let x_ddot = quad
        .iter()
        .zip(&grad)
        .map(|(q, g)| -q - 0.5 * t_dot * t_dot * g)
        .collect();
    let db_xdot: f64 = dbeta.iter().zip(x_dot).map(|(a, b)| a * b).sum();
    StateDerivative {
        t_dot,
        x_dot: x_dot.to_vec(),
        t_ddot: -t_dot * db_xdot / beta,
        x_ddot,
    }
}
