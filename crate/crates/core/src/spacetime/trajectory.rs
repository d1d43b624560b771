use serde::{Deserialize, Serialize};

use super::{geodesic_accel, GeodesicState, StaticSpacetime};
use crate::manifold::quad_form;
use crate::ode::{self, OdeError, OdeOptions, OdeSample, OdeSolution, RhsFailure, StepCheck, Termination};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeodesicOptions {
    pub tol: f64,
    /// Auxiliary norm `√(g_R(γ̇, γ̇))` treated as escape to infinity.
    pub blowup_threshold: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        GeodesicOptions {
            tol: 1e-10,
            blowup_threshold: 1e8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub s: f64,
    pub state: GeodesicState,
    pub lambda: f64,
    pub c: f64,
    /// `√(g_R(γ̇, γ̇))`.
    pub aux_norm: f64,
}

/// Conservation report of a trajectory.
///
/// The relative drift of `C` is normalized by the size of its two terms,
/// `max(1 + |C0|, β ṫ² + g_S(ẋ, ẋ))`: near a blow-up both terms are huge and
/// `C` is their small difference, so absolute agreement is not representable.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drift {
    /// `max |λ(s) - λ0|`.
    pub lambda: f64,
    /// `max |C(s) - C0|`.
    pub c: f64,
    pub lambda_rel: f64,
    pub c_rel: f64,
    /// `max |g_R(γ̇, γ̇) - (C + 2λ²/β)| / max(1, g_R(γ̇, γ̇))` with the sample's own `C`, `λ`.
    pub aux_identity: f64,
    /// As `aux_identity` but with the initial `C0`, `λ0`.
    pub aux_conserved: f64,
}

#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    pub samples: Vec<TrajectorySample>,
    pub lambda0: f64,
    pub c0: f64,
    pub drift: Drift,
    pub termination: Termination,
    dense: Vec<OdeSample>,
}

impl GeodesicTrajectory {
    /// Assemble from packed states `[t, x…, ṫ, ẋ…]` and their `s`-derivatives.
    pub(crate) fn from_dense(
        st: &StaticSpacetime,
        dense: Vec<OdeSample>,
        termination: Termination,
    ) -> Result<Self> {
        if dense.is_empty() {
            return Err(Error::invalid("empty trajectory"));
        }
        let mut samples = Vec::with_capacity(dense.len());
        for p in &dense {
            let state = GeodesicState::from_slice(&p.y);
            let b = st.beta_at(&state.x)?;
            let g = st.chart().metric_at(&state.x)?;
            let kin = quad_form(&g, &state.x_dot, &state.x_dot);
            let tt = b * state.t_dot * state.t_dot;
            samples.push(TrajectorySample {
                s: p.s,
                lambda: b * state.t_dot,
                c: -tt + kin,
                aux_norm: (tt + kin).sqrt(),
                state,
            });
        }
        let lambda0 = samples[0].lambda;
        let c0 = samples[0].c;
        let mut drift = Drift::default();
        for smp in &samples {
            let b = st.beta_at(&smp.state.x)?;
            let aux = smp.aux_norm * smp.aux_norm;
            let dl = (smp.lambda - lambda0).abs();
            let dc = (smp.c - c0).abs();
            drift.lambda = drift.lambda.max(dl);
            drift.c = drift.c.max(dc);
            drift.lambda_rel = drift.lambda_rel.max(dl / (1.0 + lambda0.abs()));
            drift.c_rel = drift.c_rel.max(dc / (1.0 + c0.abs()).max(aux));
            let scale = aux.max(1.0);
            let own = (aux - (smp.c + 2.0 * smp.lambda * smp.lambda / b)).abs();
            let init = (aux - (c0 + 2.0 * lambda0 * lambda0 / b)).abs();
            drift.aux_identity = drift.aux_identity.max(own / scale);
            drift.aux_conserved = drift.aux_conserved.max(init / scale);
        }
        Ok(GeodesicTrajectory {
            samples,
            lambda0,
            c0,
            drift,
            termination,
            dense,
        })
    }

    pub fn dim(&self) -> usize {
        self.samples[0].state.x.len()
    }

    pub fn s_end(&self) -> f64 {
        self.samples.last().map(|p| p.s).unwrap_or(0.0)
    }

    pub fn first(&self) -> &GeodesicState {
        &self.samples[0].state
    }

    pub fn last(&self) -> &GeodesicState {
        &self.samples.last().expect("non-empty trajectory").state
    }

    /// Cubic Hermite dense output, clamped to the integrated range.
    pub fn state_at(&self, s: f64) -> GeodesicState {
        let sol = OdeSolutionView(&self.dense);
        GeodesicState::from_slice(&sol.eval(s))
    }

    /// Packed derivative `d/ds [t, x, ṫ, ẋ]` at each sample.
    pub fn derivatives(&self) -> impl Iterator<Item = &[f64]> {
        self.dense.iter().map(|p| p.f.as_slice())
    }

    /// Largest defect of the geodesic system at the samples, comparing each
    /// stored derivative with the right-hand side re-evaluated from the state;
    /// measured in `g_R`.
    pub fn geodesic_residual(&self, st: &StaticSpacetime) -> Result<f64> {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for p in &self.dense {
            let state = GeodesicState::from_slice(&p.y);
            let d = st.geodesic_rhs(&state)?;
            let b = st.beta_at(&state.x)?;
            let g = st.chart().metric_at(&state.x)?;
            let dt = p.f[n + 1] - d.t_ddot;
            let dx: Vec<f64> = (0..n).map(|k| p.f[n + 2 + k] - d.x_ddot[k]).collect();
            let r = (b * dt * dt + quad_form(&g, &dx, &dx)).sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

struct OdeSolutionView<'a>(&'a [OdeSample]);

impl OdeSolutionView<'_> {
    fn eval(&self, s: f64) -> Vec<f64> {
        let pts = self.0;
        if pts.len() == 1 || s <= pts[0].s {
            return pts[0].y.clone();
        }
        let last = pts.last().expect("non-empty");
        if s >= last.s {
            return last.y.clone();
        }
        let i = pts.partition_point(|p| p.s <= s);
        ode::hermite(&pts[i - 1], &pts[i], s)
    }
}

/// Integrate the geodesic system of `st` from `init` over `[0, s_max]`.
pub fn integrate_geodesic(
    st: &StaticSpacetime,
    init: &GeodesicState,
    s_max: f64,
    opts: &GeodesicOptions,
) -> Result<GeodesicTrajectory> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if !(s_max >= 0.0) || !s_max.is_finite() {
        return Err(Error::invalid("s_max must be finite and nonnegative"));
    }
    let n = st.dim();
    if init.x.len() != n || init.x_dot.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: init.x.len().max(init.x_dot.len()),
        });
    }
    st.beta_at(&init.x)?;
    if !init.t.is_finite() || !init.t_dot.is_finite() || init.x_dot.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial state must be finite"));
    }
    let chart = st.chart();
    let rhs = |_s: f64, y: &[f64], out: &mut [f64]| -> std::result::Result<(), RhsFailure> {
        let x = &y[1..=n];
        if !chart.in_domain(x) || !(st.beta_raw(x) > 0.0) {
            return Err(RhsFailure::OutOfDomain);
        }
        let t_dot = y[n + 1];
        let x_dot = &y[n + 2..];
        let b = st.beta_at(x).map_err(RhsFailure::Fatal)?;
        let db = st.beta_grad_at(x).map_err(RhsFailure::Fatal)?;
        let gam = chart.christoffel_at(x).map_err(RhsFailure::Fatal)?;
        let ginv = chart.metric_inverse_at(x).map_err(RhsFailure::Fatal)?;
        let d = geodesic_accel(t_dot, x_dot, b, &db, &gam, &ginv);
        out[0] = t_dot;
        out[1..=n].copy_from_slice(x_dot);
        out[n + 1] = d.t_ddot;
        out[n + 2..].copy_from_slice(&d.x_ddot);
        Ok(())
    };
    let monitor = |prev: &[f64], next: &[f64]| {
        let x = &next[1..=n];
        if chart.has_boundary() && !chart.segment_admissible(&prev[1..=n], x) {
            return StepCheck::Crossed;
        }
        let aux = st.beta_raw(x) * next[n + 1] * next[n + 1]
            + quad_form(&chart.metric_raw(x), &next[n + 2..], &next[n + 2..]);
        if !(aux.sqrt() <= opts.blowup_threshold) {
            return StepCheck::BlowUp;
        }
        StepCheck::Continue
    };
    // measure the ṫ error in units of λ = βṫ, so that λ stays conserved to
    // `tol` even where β is large and ṫ correspondingly small
    let scale = |y: &[f64], y_new: &[f64], tol: f64, sc: &mut [f64]| {
        ode::default_scale(y, y_new, tol, sc);
        let lam_sc = |z: &[f64]| {
            let b = st.beta_raw(&z[1..=n]);
            tol * (1.0 + (b * z[n + 1]).abs()) / b
        };
        sc[n + 1] = sc[n + 1].min(lam_sc(y)).min(lam_sc(y_new));
    };
    let y0 = init.to_vec();
    let ode_opts = OdeOptions::with_tol(opts.tol);
    match ode::integrate_scaled(rhs, scale, &y0, 0.0, s_max, &ode_opts, monitor) {
        Ok(OdeSolution {
            samples,
            termination,
            ..
        }) => GeodesicTrajectory::from_dense(st, samples, termination),
        Err(OdeError::Fatal(e)) => Err(e),
        Err(OdeError::Underflow { s, step, partial }) => {
            let partial = GeodesicTrajectory::from_dense(st, partial.samples, Termination::ReachedSMax)
                .ok()
                .map(Box::new);
            Err(Error::Stiffness { s, step, partial })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::manifold::Chart;

    #[test]
    fn minkowski_line_is_exact() {
        let st = catalog::spacetime("minkowski").unwrap();
        let init = GeodesicState::new(0.0, vec![0.0], 1.0, vec![1.0]);
        let tr = integrate_geodesic(&st, &init, 10.0, &GeodesicOptions::default()).unwrap();
        assert_eq!(tr.termination, Termination::ReachedSMax);
        for p in &tr.samples {
            assert!((p.state.t - p.s).abs() < 1e-12);
            assert!((p.state.x[0] - p.s).abs() < 1e-12);
        }
        assert_eq!(tr.drift.lambda, 0.0);
        assert_eq!(tr.drift.c, 0.0);
    }

    #[test]
    fn quadratic_beta_reaches_s_max() {
        let st = StaticSpacetime::new("q1", Chart::euclidean(1), |x| 1.0 + x[0] * x[0])
            .with_beta_grad(|x| vec![2.0 * x[0]]);
        let init = GeodesicState::new(0.0, vec![0.3], 1.7, vec![2.0]);
        let tr = integrate_geodesic(&st, &init, 100.0, &GeodesicOptions::default()).unwrap();
        assert_eq!(tr.termination, Termination::ReachedSMax);
        assert!(tr.drift.lambda_rel < 1e-7 && tr.drift.c_rel < 1e-7, "{:?}", tr.drift);
    }

    #[test]
    fn inverse_superquadratic_blows_up() {
        let st = catalog::spacetime("inv_beta_superquad").unwrap();
        // λ = 1, C = 0 at x = 0 where β = 1: ṫ = 1, ẋ = 1
        let init = GeodesicState::new(0.0, vec![0.0], 1.0, vec![1.0]);
        let tr = integrate_geodesic(&st, &init, 100.0, &GeodesicOptions::default()).unwrap();
        match tr.termination {
            Termination::BlowUp { s_exit } => assert!(s_exit < 10.0),
            t => panic!("{t:?}"),
        }
    }

    #[test]
    fn slice_geodesic_when_lambda_zero() {
        let st = catalog::spacetime("schwarzschild_exterior").unwrap();
        let init = GeodesicState::new(1.5, vec![6.0, 0.0], 0.0, vec![0.1, 0.05]);
        let tr = integrate_geodesic(&st, &init, 20.0, &GeodesicOptions::default()).unwrap();
        for p in &tr.samples {
            assert!((p.state.t - 1.5).abs() < 1e-12);
        }
        let sg = crate::manifold::integrate_slice_geodesic(
            st.chart(),
            &[6.0, 0.0],
            &[0.1, 0.05],
            &crate::manifold::SliceGeodesicOptions {
                s_max: 20.0,
                ..Default::default()
            },
        )
        .unwrap();
        let a = tr.state_at(20.0);
        let b = sg.position_at(20.0);
        assert!((a.x[0] - b[0]).abs() < 1e-8 && (a.x[1] - b[1]).abs() < 1e-8);
    }

    #[test]
    fn residual_of_integrated_geodesic_is_small() {
        let st = catalog::spacetime("quad_beta").unwrap();
        let init = GeodesicState::new(0.0, vec![0.5, -0.2], 1.2, vec![0.3, 0.7]);
        let tr = integrate_geodesic(&st, &init, 5.0, &GeodesicOptions::default()).unwrap();
        assert!(tr.geodesic_residual(&st).unwrap() < 1e-12);
    }
}
