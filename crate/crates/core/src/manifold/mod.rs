//! Riemannian slice machinery: charts, metric evaluation, Christoffel
//! symbols, discrete slice curves, slice geodesics and distance estimation.

mod curve;
mod distance;
mod geodesic;

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use curve::SliceCurve;
pub use distance::{slice_distance, DistanceOptions, DistanceResult};
pub(crate) use distance::seed_curves;
pub use geodesic::{integrate_slice_geodesic, SliceGeodesic, SliceGeodesicOptions};

pub type PointFn<T> = Arc<dyn Fn(&[f64]) -> T + Send + Sync>;

/// Default relative finite-difference step for metric derivatives.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
/// Absolute floor of the finite-difference step.
pub const FD_FLOOR: f64 = 1e-8;

/// A point of the spatial slice `S`, in chart coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlicePoint(pub Vec<f64>);

impl SlicePoint {
    pub fn new(coords: impl Into<Vec<f64>>) -> Self {
        SlicePoint(coords.into())
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for SlicePoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for SlicePoint {
    fn from(v: Vec<f64>) -> Self {
        SlicePoint(v)
    }
}

impl From<&[f64]> for SlicePoint {
    fn from(v: &[f64]) -> Self {
        SlicePoint(v.to_vec())
    }
}

/// Christoffel symbols of the second kind, `Γ^k_{ij}`, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize) -> Self {
        Christoffel {
            n,
            data: vec![0.0; n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.data[(k * self.n + i) * self.n + j]
    }

    /// Sets `Γ^k_{ij}` and `Γ^k_{ji}` together.
    #[inline]
    pub fn set_sym(&mut self, k: usize, i: usize, j: usize, v: f64) {
        let n = self.n;
        self.data[(k * n + i) * n + j] = v;
        self.data[(k * n + j) * n + i] = v;
    }

    /// `Γ^k_{ij} u^i w^j`.
    pub fn contract(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += self.get(k, i, j) * u[i] * w[j];
                    }
                }
                acc
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Build from metric derivatives `dg[c] = ∂_c g` and the inverse metric.
    pub fn from_metric_derivatives(ginv: &DMatrix<f64>, dg: &[DMatrix<f64>]) -> Self {
        let n = ginv.nrows();
        let mut out = Christoffel::zeros(n);
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut acc = 0.0;
                    for l in 0..n {
                        acc += ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
                    }
                    out.set_sym(k, i, j, 0.5 * acc);
                }
            }
        }
        out
    }
}

/// A single coordinate patch of a Riemannian manifold.
///
/// The domain is an open set described by a predicate. Charts whose domain
/// has a boundary may also supply `boundary_distance`, the Euclidean
/// coordinate distance to the complement of the domain; it drives barrier
/// terms, segment admissibility and the non-attainment test.
#[derive(Clone)]
pub struct Chart {
    dim: usize,
    label: String,
    domain: Option<PointFn<bool>>,
    metric: PointFn<DMatrix<f64>>,
    christoffel: Option<PointFn<Christoffel>>,
    boundary_distance: Option<PointFn<f64>>,
    fd_step: f64,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("analytic_christoffel", &self.christoffel.is_some())
            .field("bounded", &self.boundary_distance.is_some())
            .finish()
    }
}

impl Chart {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        metric: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        assert!(dim > 0, "chart dimension must be positive");
        Chart {
            dim,
            label: label.into(),
            domain: None,
            metric: Arc::new(metric),
            christoffel: None,
            boundary_distance: None,
            fd_step: DEFAULT_FD_STEP,
        }
    }

    pub fn with_domain(mut self, pred: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(pred));
        self
    }

    pub fn with_christoffel(
        mut self,
        f: impl Fn(&[f64]) -> Christoffel + Send + Sync + 'static,
    ) -> Self {
        self.christoffel = Some(Arc::new(f));
        self
    }

    pub fn with_boundary_distance(
        mut self,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.boundary_distance = Some(Arc::new(f));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        assert!(h > 0.0);
        self.fd_step = h;
        self
    }

    /// Drops the analytic Christoffel evaluator so the finite-difference path is used.
    pub fn without_analytic_christoffel(mut self) -> Self {
        self.christoffel = None;
        self
    }

    /// Flat `ℝⁿ`.
    pub fn euclidean(n: usize) -> Self {
        Chart::new(format!("euclidean{n}"), n, move |_| DMatrix::identity(n, n))
            .with_christoffel(move |_| Christoffel::zeros(n))
    }

    /// The Euclidean plane in polar coordinates `(r, θ)`, `r > 0`.
    pub fn polar() -> Self {
        Chart::new("polar", 2, |x| {
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, x[0] * x[0]])
        })
        .with_domain(|x| x[0] > 0.0)
        .with_boundary_distance(|x| x[0].max(0.0))
        .with_christoffel(|x| {
            let r = x[0];
            let mut c = Christoffel::zeros(2);
            c.set_sym(0, 1, 1, -r);
            c.set_sym(1, 0, 1, 1.0 / r);
            c
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn has_boundary(&self) -> bool {
        self.boundary_distance.is_some()
    }

    pub fn has_analytic_christoffel(&self) -> bool {
        self.christoffel.is_some()
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim
            && x.iter().all(|c| c.is_finite())
            && self.domain.as_ref().map_or(true, |d| d(x))
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !self.in_domain(x) {
            return Err(Error::OutOfDomain {
                chart: self.label.clone(),
                point: x.to_vec(),
            });
        }
        Ok(())
    }

    /// Euclidean coordinate distance to the complement of the domain
    /// (`+∞` for charts without a boundary, `0` outside the domain).
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        if !self.in_domain(x) {
            return 0.0;
        }
        self.boundary_distance
            .as_ref()
            .map_or(f64::INFINITY, |b| b(x).max(0.0))
    }

    /// Raw metric evaluation without domain or definiteness checks.
    pub(crate) fn metric_raw(&self, x: &[f64]) -> DMatrix<f64> {
        (self.metric)(x)
    }

    /// `g_S` at `x`: symmetric positive-definite.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        let g = (self.metric)(x);
        if g.clone().cholesky().is_none() {
            return Err(Error::DegenerateMetric { point: x.to_vec() });
        }
        Ok(g)
    }

    pub fn metric_inverse_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(x)?;
        invert_metric((self.metric)(x), x)
    }

    pub fn inner(&self, x: &[f64], u: &[f64], w: &[f64]) -> Result<f64> {
        let g = self.metric_at(x)?;
        Ok(quad_form(&g, u, w))
    }

    pub fn norm_sq(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        self.inner(x, v, v)
    }

    fn fd_h(&self, xi: f64) -> f64 {
        (self.fd_step * xi.abs()).max(FD_FLOOR)
    }

    /// Metric derivatives `∂_c g` by central differences.
    fn metric_derivatives_fd(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut xp = x.to_vec();
        (0..self.dim)
            .map(|c| {
                let h = self.fd_h(x[c]);
                xp[c] = x[c] + h;
                let gp = (self.metric)(&xp);
                xp[c] = x[c] - h;
                let gm = (self.metric)(&xp);
                xp[c] = x[c];
                (gp - gm) / (2.0 * h)
            })
            .collect()
    }

    /// Metric derivatives `∂_c g_{ab}`; taken from the analytic Christoffel
    /// symbols through metric compatibility when available.
    pub fn metric_derivatives_at(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.check_point(x)?;
        match &self.christoffel {
            Some(cf) => {
                let g = (self.metric)(x);
                let gam = cf(x);
                let n = self.dim;
                Ok((0..n)
                    .map(|c| {
                        DMatrix::from_fn(n, n, |a, b| {
                            let mut acc = 0.0;
                            for d in 0..n {
                                acc += g[(a, d)] * gam.get(d, c, b) + g[(b, d)] * gam.get(d, c, a);
                            }
                            acc
                        })
                    })
                    .collect())
            }
            None => Ok(self.metric_derivatives_fd(x)),
        }
    }

    /// `Γ^k_{ij}` at `x`: the analytic evaluator verbatim when present,
    /// otherwise central differences of the metric with the chart's `fd_step`.
    pub fn christoffel_at(&self, x: &[f64]) -> Result<Christoffel> {
        self.check_point(x)?;
        if let Some(cf) = &self.christoffel {
            return Ok(cf(x));
        }
        self.christoffel_fd(x)
    }

    /// Finite-difference Christoffel symbols, ignoring any analytic evaluator.
    pub fn christoffel_fd(&self, x: &[f64]) -> Result<Christoffel> {
        self.check_point(x)?;
        let ginv = invert_metric((self.metric)(x), x)?;
        let dg = self.metric_derivatives_fd(x);
        Ok(Christoffel::from_metric_derivatives(&ginv, &dg))
    }

    /// The gradient `g^{kl} ∂_l f` of a scalar with coordinate differential `df`.
    pub fn raise(&self, x: &[f64], df: &[f64]) -> Result<Vec<f64>> {
        let ginv = self.metric_inverse_at(x)?;
        Ok(mat_vec(&ginv, df))
    }

    /// The conformally rescaled chart `factor · g`.
    ///
    /// Its Christoffel symbols follow from the conformal transformation rule
    /// with `φ = ½ ln factor`, using the base chart's symbols.
    pub fn conformal(
        &self,
        label: impl Into<String>,
        factor: PointFn<f64>,
        factor_grad: PointFn<Vec<f64>>,
    ) -> Chart {
        let base = self.clone();
        let base_metric = self.clone();
        let f_metric = factor.clone();
        let f_domain = factor.clone();
        let base_domain = self.clone();
        let n = self.dim;
        let mut chart = Chart::new(label, n, move |x| base_metric.metric_raw(x) * f_metric(x))
            .with_domain(move |x| base_domain.in_domain(x) && f_domain(x) > 0.0)
            .with_christoffel(move |x| {
                let gam = match base.christoffel_at(x) {
                    Ok(c) => c,
                    Err(_) => return Christoffel::zeros(n),
                };
                let g = base.metric_raw(x);
                let ginv = match invert_metric(g.clone(), x) {
                    Ok(m) => m,
                    Err(_) => return Christoffel::zeros(n),
                };
                let fx = factor(x);
                let dphi: Vec<f64> = factor_grad(x).iter().map(|d| d / (2.0 * fx)).collect();
                let up = mat_vec(&ginv, &dphi);
                let mut out = Christoffel::zeros(n);
                for k in 0..n {
                    for i in 0..n {
                        for j in i..n {
                            let mut v = gam.get(k, i, j) - g[(i, j)] * up[k];
                            if k == i {
                                v += dphi[j];
                            }
                            if k == j {
                                v += dphi[i];
                            }
                            out.set_sym(k, i, j, v);
                        }
                    }
                }
                out
            })
            .with_fd_step(self.fd_step);
        if let Some(bd) = &self.boundary_distance {
            let bd = bd.clone();
            chart = chart.with_boundary_distance(move |x| bd(x));
        }
        chart
    }

    /// Whether the straight coordinate segment `[a, b]` lies in the domain.
    ///
    /// Uses the 1-Lipschitz boundary distance: the segment is covered when the
    /// balls around its ends overlap; otherwise it is bisected.
    pub fn segment_admissible(&self, a: &[f64], b: &[f64]) -> bool {
        if !self.in_domain(a) || !self.in_domain(b) {
            return false;
        }
        if self.boundary_distance.is_none() {
            return true;
        }
        let da = self.boundary_distance(a);
        let db = self.boundary_distance(b);
        self.segment_cover(a, b, da, db, 0)
    }

    fn segment_cover(&self, a: &[f64], b: &[f64], da: f64, db: f64, depth: u32) -> bool {
        let len = euclid_dist(a, b);
        if da + db > len {
            return true;
        }
        if depth > 48 {
            return false;
        }
        let m: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
        let dm = self.boundary_distance(&m);
        if dm <= 0.0 {
            return false;
        }
        self.segment_cover(a, &m, da, dm, depth + 1) && self.segment_cover(&m, b, dm, db, depth + 1)
    }

    /// Smallest boundary distance along the segment `[a, b]` and the
    /// parameter `τ ∈ [0, 1]` where it occurs (sampling, then golden section).
    pub fn segment_boundary_distance(&self, a: &[f64], b: &[f64]) -> (f64, f64) {
        let at = |tau: f64| {
            let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + tau * (q - p)).collect();
            self.boundary_distance(&x)
        };
        const SAMPLES: usize = 8;
        let (k, _) = (0..=SAMPLES)
            .map(|k| (k, at(k as f64 / SAMPLES as f64)))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
        let mut lo = (k.saturating_sub(1)) as f64 / SAMPLES as f64;
        let mut hi = ((k + 1).min(SAMPLES)) as f64 / SAMPLES as f64;
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (hi - r * (hi - lo), lo + r * (hi - lo));
        let (mut fc, mut fd) = (at(c), at(d));
        for _ in 0..30 {
            if fc < fd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - r * (hi - lo);
                fc = at(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + r * (hi - lo);
                fd = at(d);
            }
        }
        [(0.0, at(0.0)), (1.0, at(1.0)), (c, fc), (d, fd)]
            .into_iter()
            .fold((f64::INFINITY, 0.0), |best, (t, v)| if v < best.0 { (v, t) } else { best })
    }
}

pub(crate) fn invert_metric(g: DMatrix<f64>, x: &[f64]) -> Result<DMatrix<f64>> {
    g.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::DegenerateMetric { point: x.to_vec() })
}

pub(crate) fn quad_form(g: &DMatrix<f64>, u: &[f64], w: &[f64]) -> f64 {
    let n = u.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += g[(i, j)] * u[i] * w[j];
        }
    }
    acc
}

pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

pub(crate) fn euclid_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn euclid_norm(a: &[f64]) -> f64 {
    a.iter().map(|p| p * p).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn euclidean_metric_is_identity() {
        let c = Chart::euclidean(2);
        assert_eq!(c.metric_at(&[3.0, -1.0]).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn polar_metric_and_symbols() {
        let c = Chart::polar();
        let g = c.metric_at(&[2.0, 0.0]).unwrap();
        assert_eq!(g, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));
        let gam = c.christoffel_at(&[2.0, 0.0]).unwrap();
        assert_eq!(gam.get(0, 1, 1), -2.0);
        assert_eq!(gam.get(1, 0, 1), 0.5);
        assert_eq!(gam.get(1, 1, 0), 0.5);
        // the finite-difference route agrees
        let fd = c.christoffel_fd(&[2.0, 0.0]).unwrap();
        assert!(fd.max_abs_diff(&gam) < 1e-7);
    }

    #[test]
    fn flat_symbols_vanish() {
        let c = Chart::euclidean(3).without_analytic_christoffel();
        let gam = c.christoffel_at(&[0.3, -2.0, 5.0]).unwrap();
        assert_eq!(gam.max_abs_diff(&Christoffel::zeros(3)), 0.0);
    }

    #[test]
    fn schwarzschild_slice_metric() {
        let st = catalog::spacetime("schwarzschild_exterior").unwrap();
        let g = st.chart().metric_at(&[4.0, 0.0]).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn schwarzschild_fd_matches_analytic() {
        let st = catalog::spacetime("schwarzschild_exterior").unwrap();
        let x = [5.0, 0.7];
        let analytic = st.chart().christoffel_at(&x).unwrap();
        let fd = st.chart().christoffel_fd(&x).unwrap();
        assert!(analytic.max_abs_diff(&fd) < 1e-6);
    }

    #[test]
    fn out_of_domain_names_point() {
        let c = Chart::polar();
        match c.metric_at(&[-1.0, 0.0]) {
            Err(Error::OutOfDomain { point, .. }) => assert_eq!(point, vec![-1.0, 0.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn degenerate_metric_is_reported() {
        let c = Chart::new("degenerate", 2, |_| DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(matches!(
            c.christoffel_at(&[0.0, 0.0]),
            Err(Error::DegenerateMetric { .. })
        ));
    }

    #[test]
    fn conformal_symbols_match_finite_differences() {
        let base = Chart::polar();
        let factor: PointFn<f64> = Arc::new(|x: &[f64]| 1.0 / (1.0 + x[0] * x[0]));
        let grad: PointFn<Vec<f64>> = Arc::new(|x: &[f64]| {
            let d = 1.0 + x[0] * x[0];
            vec![-2.0 * x[0] / (d * d), 0.0]
        });
        let c = base.conformal("polar*", factor, grad);
        let x = [1.3, 0.4];
        let a = c.christoffel_at(&x).unwrap();
        let f = c.christoffel_fd(&x).unwrap();
        assert!(a.max_abs_diff(&f) < 1e-7);
    }

    #[test]
    fn slit_segments() {
        let st = catalog::spacetime("slit_plane").unwrap();
        let c = st.chart();
        assert!(!c.segment_admissible(&[0.9, 0.0], &[1.1, 0.0]));
        assert!(c.segment_admissible(&[0.9, 1.2], &[1.1, 1.2]));
        assert!(c.segment_admissible(&[0.0, 0.0], &[0.9, 0.5]));
    }
}
