//! Named spacetimes used by the experiments.
//!
//! Every entry is validated on a sample grid when it is built: the metric
//! must be symmetric positive-definite, `β` positive, and the analytic
//! Christoffel symbols and `∂β` must agree with finite differences.

use std::f64::consts::FRAC_PI_4;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::manifold::{Chart, Christoffel};
use crate::spacetime::StaticSpacetime;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    /// Where the entry comes from and what it is used for.
    pub note: &'static str,
    pub dim: usize,
    /// Tunable parameters with their defaults.
    pub params: Vec<(&'static str, f64)>,
    /// Default base point for distances and growth fits.
    pub base_point: Vec<f64>,
    /// Coordinate box `[lo, hi]` used for validation and random sampling.
    pub sample_box: Vec<(f64, f64)>,
}

/// A catalog name plus optional parameter overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacetimeSpec {
    pub name: String,
    /// Schwarzschild mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    /// Exponent excess of the superquadratic families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Slice dimension of the flat-slice families.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl SpacetimeSpec {
    pub fn named(name: impl Into<String>) -> Self {
        SpacetimeSpec {
            name: name.into(),
            ..Default::default()
        }
    }
}

const NAMES: [&str; 9] = [
    "minkowski",
    "schwarzschild_exterior",
    "ads_strip",
    "slit_plane",
    "quad_beta",
    "superquad_beta",
    "inv_beta_superquad",
    "unit_disk",
    "flat_plane",
];

pub fn catalog_list() -> Vec<CatalogEntry> {
    NAMES.iter().map(|n| entry(n).expect("listed entry")).collect()
}

pub fn entry(name: &str) -> Result<CatalogEntry> {
    let e = match name {
        "minkowski" => CatalogEntry {
            name: "minkowski",
            description: "flat spacetime, beta = 1 on Euclidean R^n (default n = 1)",
            note: "trivial reference",
            dim: 1,
            params: vec![("dim", 1.0)],
            base_point: vec![0.0],
            sample_box: vec![(-5.0, 5.0)],
        },
        "schwarzschild_exterior" => CatalogEntry {
            name: "schwarzschild_exterior",
            description: "equatorial outer Schwarzschild, (r, phi), g_S = dr^2/(1-2m/r) + r^2 dphi^2, beta = 1-2m/r, r > 2m",
            note: "standard background metric; phi is unwrapped",
            dim: 2,
            params: vec![("m", 1.0)],
            base_point: vec![6.0, 0.0],
            sample_box: vec![(2.5, 20.0), (-3.0, 3.0)],
        },
        "ads_strip" => CatalogEntry {
            name: "ads_strip",
            description: "anti-de Sitter strip, x in (-pi/4, pi/4), g_S = dx^2/cos^2 x, beta = 1/cos^2 x",
            note: "not geodesically connected although globally hyperbolic",
            dim: 1,
            params: vec![],
            base_point: vec![0.0],
            sample_box: vec![(-0.78, 0.78)],
        },
        "slit_plane" => CatalogEntry {
            name: "slit_plane",
            description: "Euclidean plane minus the slit {(1, y): y <= 1}, beta = 1",
            note: "causally continuous but not causally simple",
            dim: 2,
            params: vec![],
            base_point: vec![0.0, 0.0],
            sample_box: vec![(-3.0, 3.0), (-3.0, 3.0)],
        },
        "quad_beta" => CatalogEntry {
            name: "quad_beta",
            description: "flat R^n with beta = 1 + |x|^2 (default n = 2)",
            note: "quadratic growth class",
            dim: 2,
            params: vec![("dim", 2.0)],
            base_point: vec![0.0, 0.0],
            sample_box: vec![(-3.0, 3.0), (-3.0, 3.0)],
        },
        "superquad_beta" => CatalogEntry {
            name: "superquad_beta",
            description: "flat R^n with beta = (1 + |x|^2)^(1+epsilon) (default n = 2, epsilon = 0.5)",
            note: "superquadratic growth class, representative of the non-connected regime",
            dim: 2,
            params: vec![("dim", 2.0), ("epsilon", 0.5)],
            base_point: vec![0.0, 0.0],
            sample_box: vec![(-3.0, 3.0), (-3.0, 3.0)],
        },
        "inv_beta_superquad" => CatalogEntry {
            name: "inv_beta_superquad",
            description: "R with beta = (1 + x^2)^-(1+epsilon) (epsilon = 0.5)",
            note: "1/beta superquadratic: geodesically incomplete",
            dim: 1,
            params: vec![("epsilon", 0.5)],
            base_point: vec![0.0],
            sample_box: vec![(-3.0, 3.0)],
        },
        "unit_disk" => CatalogEntry {
            name: "unit_disk",
            description: "open Euclidean unit disk, beta = 1",
            note: "incomplete slice; probes must find a witness",
            dim: 2,
            params: vec![],
            base_point: vec![0.0, 0.0],
            sample_box: vec![(-0.7, 0.7), (-0.7, 0.7)],
        },
        "flat_plane" => CatalogEntry {
            name: "flat_plane",
            description: "Euclidean plane, beta = 1",
            note: "obstacle-free control for slit_plane",
            dim: 2,
            params: vec![],
            base_point: vec![0.0, 0.0],
            sample_box: vec![(-3.0, 3.0), (-3.0, 3.0)],
        },
        other => return Err(Error::UnknownSpacetime(other.to_string())),
    };
    Ok(e)
}

/// Catalog entry with default parameters.
pub fn spacetime(name: &str) -> Result<StaticSpacetime> {
    build(&SpacetimeSpec::named(name))
}

fn flat_dim(spec: &SpacetimeSpec, default: usize) -> Result<usize> {
    match spec.dim {
        None => Ok(default),
        Some(d) if (1..=8).contains(&d) => Ok(d),
        Some(d) => Err(Error::invalid(format!("dim must be in 1..=8, got {d}"))),
    }
}

fn positive(v: f64, what: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("{what} must be positive and finite, got {v}")))
    }
}

fn reject_params(spec: &SpacetimeSpec, allowed: &[&str]) -> Result<()> {
    for (key, set) in [("m", spec.m.is_some()), ("epsilon", spec.epsilon.is_some()), ("dim", spec.dim.is_some())] {
        if set && !allowed.contains(&key) {
            return Err(Error::invalid(format!("parameter `{key}` does not apply to `{}`", spec.name)));
        }
    }
    Ok(())
}

fn sq_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Build and validate a spacetime from a spec.
pub fn build(spec: &SpacetimeSpec) -> Result<StaticSpacetime> {
    let base = entry(&spec.name)?;
    let st = match base.name {
        "minkowski" | "flat_plane" => {
            reject_params(spec, &["dim"])?;
            let n = flat_dim(spec, base.dim)?;
            StaticSpacetime::new(base.name, Chart::euclidean(n), |_| 1.0).with_beta_grad(move |_| vec![0.0; n])
        }
        "schwarzschild_exterior" => {
            reject_params(spec, &["m"])?;
            let m = positive(spec.m.unwrap_or(1.0), "m")?;
            schwarzschild(m)
        }
        "ads_strip" => {
            reject_params(spec, &[])?;
            ads_strip()
        }
        "slit_plane" => {
            reject_params(spec, &[])?;
            let chart = Chart::euclidean(2)
                .with_domain(|x| !(x[0] == 1.0 && x[1] <= 1.0))
                .with_boundary_distance(|x| {
                    if x[1] <= 1.0 {
                        (x[0] - 1.0).abs()
                    } else {
                        (x[0] - 1.0).hypot(x[1] - 1.0)
                    }
                });
            StaticSpacetime::new("slit_plane", chart, |_| 1.0).with_beta_grad(|_| vec![0.0, 0.0])
        }
        "quad_beta" => {
            reject_params(spec, &["dim"])?;
            let n = flat_dim(spec, base.dim)?;
            StaticSpacetime::new("quad_beta", Chart::euclidean(n), |x| 1.0 + sq_norm(x))
                .with_beta_grad(|x| x.iter().map(|v| 2.0 * v).collect())
        }
        "superquad_beta" => {
            reject_params(spec, &["dim", "epsilon"])?;
            let n = flat_dim(spec, base.dim)?;
            let eps = positive(spec.epsilon.unwrap_or(0.5), "epsilon")?;
            StaticSpacetime::new("superquad_beta", Chart::euclidean(n), move |x| {
                (1.0 + sq_norm(x)).powf(1.0 + eps)
            })
            .with_beta_grad(move |x| {
                let k = 2.0 * (1.0 + eps) * (1.0 + sq_norm(x)).powf(eps);
                x.iter().map(|v| k * v).collect()
            })
        }
        "inv_beta_superquad" => {
            reject_params(spec, &["epsilon"])?;
            let eps = positive(spec.epsilon.unwrap_or(0.5), "epsilon")?;
            StaticSpacetime::new("inv_beta_superquad", Chart::euclidean(1), move |x| {
                (1.0 + x[0] * x[0]).powf(-(1.0 + eps))
            })
            .with_beta_grad(move |x| vec![-2.0 * (1.0 + eps) * x[0] * (1.0 + x[0] * x[0]).powf(-(2.0 + eps))])
        }
        "unit_disk" => {
            reject_params(spec, &[])?;
            let chart = Chart::euclidean(2)
                .with_domain(|x| sq_norm(x) < 1.0)
                .with_boundary_distance(|x| 1.0 - sq_norm(x).sqrt());
            StaticSpacetime::new("unit_disk", chart, |_| 1.0).with_beta_grad(|_| vec![0.0, 0.0])
        }
        _ => unreachable!("entry() covers every name"),
    };
    validate(&st, &sample_box(&base, st.dim()))?;
    Ok(st)
}

/// Sample box of an entry, extended to `dim` coordinates when the family
/// dimension was overridden.
pub fn sample_box(entry: &CatalogEntry, dim: usize) -> Vec<(f64, f64)> {
    let last = *entry.sample_box.last().expect("non-empty box");
    (0..dim).map(|i| entry.sample_box.get(i).copied().unwrap_or(last)).collect()
}

/// Base point of an entry in `dim` coordinates.
pub fn base_point(entry: &CatalogEntry, dim: usize) -> Vec<f64> {
    (0..dim).map(|i| entry.base_point.get(i).copied().unwrap_or(0.0)).collect()
}

fn schwarzschild(m: f64) -> StaticSpacetime {
    let chart = Chart::new("schwarzschild_exterior", 2, move |x| {
        let r = x[0];
        DMatrix::from_row_slice(2, 2, &[1.0 / (1.0 - 2.0 * m / r), 0.0, 0.0, r * r])
    })
    .with_domain(move |x| x[0] > 2.0 * m)
    .with_boundary_distance(move |x| x[0] - 2.0 * m)
    .with_christoffel(move |x| {
        let r = x[0];
        let f = 1.0 - 2.0 * m / r;
        let mut c = Christoffel::zeros(2);
        c.set_sym(0, 0, 0, -m / (r * r * f));
        c.set_sym(0, 1, 1, -r * f);
        c.set_sym(1, 0, 1, 1.0 / r);
        c
    });
    StaticSpacetime::new("schwarzschild_exterior", chart, move |x| 1.0 - 2.0 * m / x[0])
        .with_beta_grad(move |x| vec![2.0 * m / (x[0] * x[0]), 0.0])
}

fn ads_strip() -> StaticSpacetime {
    let chart = Chart::new("ads_strip", 1, |x| {
        let c = x[0].cos();
        DMatrix::from_element(1, 1, 1.0 / (c * c))
    })
    .with_domain(|x| x[0].abs() < FRAC_PI_4)
    .with_boundary_distance(|x| FRAC_PI_4 - x[0].abs())
    .with_christoffel(|x| {
        let mut c = Christoffel::zeros(1);
        c.set_sym(0, 0, 0, x[0].tan());
        c
    });
    StaticSpacetime::new("ads_strip", chart, |x| 1.0 / x[0].cos().powi(2))
        .with_beta_grad(|x| vec![2.0 * x[0].sin() / x[0].cos().powi(3)])
}

/// Grid check of metric, `β`, and the analytic derivative evaluators.
pub fn validate(st: &StaticSpacetime, bbox: &[(f64, f64)]) -> Result<()> {
    let n = st.dim();
    let per_axis: usize = match n {
        1 => 9,
        2 => 5,
        _ => 3,
    };
    let total = per_axis.pow(n as u32);
    let chart = st.chart();
    let fail = |msg: String| Err(Error::invalid(format!("catalog entry `{}` failed validation: {msg}", st.label())));
    for idx in 0..total {
        let mut rest = idx;
        let x: Vec<f64> = bbox
            .iter()
            .map(|&(lo, hi)| {
                let k = rest % per_axis;
                rest /= per_axis;
                // offset the grid so it avoids measure-zero obstacles
                lo + (hi - lo) * (k as f64 + 0.37) / per_axis as f64
            })
            .collect();
        if !chart.in_domain(&x) {
            continue;
        }
        let g = chart.metric_at(&x)?;
        if (&g - g.transpose()).amax() >= 1e-12 {
            return fail(format!("metric not symmetric at {x:?}"));
        }
        st.beta_at(&x)?;
        if chart.has_analytic_christoffel() {
            let a = chart.christoffel_at(&x)?;
            let f = chart.christoffel_fd(&x)?;
            let scale = 1.0 + a.max_abs_diff(&Christoffel::zeros(n));
            if a.max_abs_diff(&f) > 1e-6 * scale {
                return fail(format!("Christoffel symbols disagree with finite differences at {x:?}"));
            }
        }
        let a = st.beta_grad_at(&x)?;
        let f = st.beta_grad_fd(&x);
        if a.iter().zip(&f).any(|(p, q)| (p - q).abs() > 1e-6 * (1.0 + p.abs())) {
            return fail(format!("beta gradient disagrees with finite differences at {x:?}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_builds() {
        for e in catalog_list() {
            let st = spacetime(e.name).unwrap();
            assert_eq!(st.dim(), e.dim, "{}", e.name);
            assert!(st.chart().in_domain(&e.base_point), "{}", e.name);
        }
        assert!(catalog_list().iter().any(|e| e.name == "minkowski"));
    }

    #[test]
    fn ads_domain_is_open() {
        let st = spacetime("ads_strip").unwrap();
        assert!(!st.chart().in_domain(&[FRAC_PI_4]));
        assert!(!st.chart().in_domain(&[-FRAC_PI_4]));
        assert!(st.chart().in_domain(&[0.78]));
    }

    #[test]
    fn slit_domain() {
        let st = spacetime("slit_plane").unwrap();
        assert!(!st.chart().in_domain(&[1.0, 0.5]));
        assert!(st.chart().in_domain(&[1.0, 1.5]));
    }

    #[test]
    fn overrides() {
        let st = build(&SpacetimeSpec {
            name: "quad_beta".into(),
            dim: Some(3),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(st.dim(), 3);
        let st = build(&SpacetimeSpec {
            name: "schwarzschild_exterior".into(),
            m: Some(2.0),
            ..Default::default()
        })
        .unwrap();
        assert!(!st.chart().in_domain(&[3.9, 0.0]));
        assert!(build(&SpacetimeSpec {
            name: "ads_strip".into(),
            m: Some(1.0),
            ..Default::default()
        })
        .is_err());
        assert!(matches!(spacetime("nope"), Err(Error::UnknownSpacetime(_))));
    }
}
