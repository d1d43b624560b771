use serde::{Deserialize, Serialize};

use crate::manifold::{integrate_slice_geodesic, SliceGeodesicOptions, SlicePoint};
use crate::ode::Termination;
use crate::spacetime::StaticSpacetime;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthTarget {
    Beta,
    InvBeta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthClass {
    Subquadratic,
    Quadratic,
    Superquadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthOptions {
    /// Number of rays (per pair of opposite directions in one dimension: 2).
    pub n_rays: usize,
    /// Exponents below `bands.0` are subquadratic, above `bands.1` superquadratic.
    pub bands: (f64, f64),
    pub tol: f64,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions {
            n_rays: 16,
            bands: (1.9, 2.1),
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub which: GrowthTarget,
    pub exponent: f64,
    pub classification: GrowthClass,
    /// RMS residual of the log-log fit.
    pub fit_residual: f64,
    pub base_point: SlicePoint,
    pub radii: Vec<f64>,
    /// Per-radius maximum of the sampled function (absent when no ray reached the radius).
    pub max_values: Vec<Option<f64>>,
    /// `exp` of the fit intercept: `f ≈ amplitude · d^exponent`.
    pub amplitude: f64,
    pub n_rays: usize,
    pub warnings: Vec<String>,
}

impl GrowthClass {
    pub fn from_exponent(p: f64, bands: (f64, f64)) -> Self {
        if p < bands.0 {
            GrowthClass::Subquadratic
        } else if p <= bands.1 {
            GrowthClass::Quadratic
        } else {
            GrowthClass::Superquadratic
        }
    }
}

/// `g_S`-unit initial directions at `x`: evenly spaced in a plane of the
/// orthonormal frame for `n ≤ 2`, frame axes and their diagonals otherwise.
fn ray_directions(st: &StaticSpacetime, x: &[f64], n_rays: usize) -> Result<Vec<Vec<f64>>> {
    let n = st.dim();
    let g = st.chart().metric_at(x)?;
    let l = g.cholesky().ok_or_else(|| Error::DegenerateMetric { point: x.to_vec() })?.l();
    let frame = l.try_inverse().ok_or_else(|| Error::DegenerateMetric { point: x.to_vec() })?.transpose();
    let to_coords = |e: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| frame[(i, j)] * e[j]).sum()).collect() };
    let mut dirs = vec![];
    match n {
        1 => {
            dirs.push(to_coords(&[1.0]));
            dirs.push(to_coords(&[-1.0]));
        }
        2 => {
            for k in 0..n_rays.max(1) {
                let a = std::f64::consts::TAU * k as f64 / n_rays.max(1) as f64;
                dirs.push(to_coords(&[a.cos(), a.sin()]));
            }
        }
        _ => {
            for i in 0..n {
                for sgn in [1.0, -1.0] {
                    let mut e = vec![0.0; n];
                    e[i] = sgn;
                    dirs.push(to_coords(&e));
                }
            }
            let d = 1.0 / (n as f64).sqrt();
            dirs.push(to_coords(&vec![d; n]));
            dirs.push(to_coords(&vec![-d; n]));
        }
    }
    Ok(dirs)
}

/// Fit `log max f` against `log d` over the outer half of the radii.
pub fn growth_exponent(
    st: &StaticSpacetime,
    which: GrowthTarget,
    base: &[f64],
    radii: &[f64],
    opts: &GrowthOptions,
) -> Result<GrowthReport> {
    if radii.len() < 6 {
        return Err(Error::invalid("growth fit needs at least 6 radii"));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("radii must be positive, finite and strictly increasing"));
    }
    if radii[radii.len() - 1] < 10.0 * radii[0] {
        return Err(Error::invalid("radii must span at least one decade"));
    }
    if !(opts.bands.0 <= opts.bands.1) {
        return Err(Error::invalid("classification bands must be ordered"));
    }
    st.beta_at(base)?;
    let dirs = ray_directions(st, base, opts.n_rays)?;
    let r_max = radii[radii.len() - 1];
    let mut max_values: Vec<Option<f64>> = vec![None; radii.len()];
    let mut warnings = vec![];
    for (k, v) in dirs.iter().enumerate() {
        let ray = integrate_slice_geodesic(
            st.chart(),
            base,
            v,
            &SliceGeodesicOptions {
                s_max: r_max,
                tol: opts.tol,
                ..Default::default()
            },
        )?;
        if ray.termination() != Termination::ReachedSMax {
            warnings.push(format!(
                "ray {k} truncated at d = {:.6} before the largest radius {r_max}",
                ray.s_end()
            ));
        }
        for (i, &r) in radii.iter().enumerate() {
            if r > ray.s_end() {
                continue;
            }
            let x = ray.position_at(r);
            let Ok(b) = st.beta_at(&x) else { continue };
            let f = match which {
                GrowthTarget::Beta => b,
                GrowthTarget::InvBeta => 1.0 / b,
            };
            max_values[i] = Some(max_values[i].map_or(f, |m: f64| m.max(f)));
        }
    }
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&max_values)
        .skip(radii.len() / 2)
        .filter_map(|(r, f)| f.map(|f| (r.ln(), f.ln())))
        .collect();
    if pts.len() < 2 {
        return Err(Error::invalid("fewer than two outer radii were reached by any ray"));
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let fit_residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - exponent * p.0).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(GrowthReport {
        which,
        exponent,
        classification: GrowthClass::from_exponent(exponent, opts.bands),
        fit_residual,
        base_point: SlicePoint(base.to_vec()),
        radii: radii.to_vec(),
        max_values,
        amplitude: intercept.exp(),
        n_rays: dirs.len(),
        warnings,
    })
}

/// `n` log-spaced radii from `lo` to `hi`.
pub fn log_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (n - 1) as f64).exp())
        .collect()
}
