use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifold::{integrate_slice_geodesic, Chart, SliceGeodesicOptions};
use crate::ode::Termination;
use crate::spacetime::{integrate_geodesic, GeodesicOptions, GeodesicState, StaticSpacetime};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeMetric {
    #[serde(rename = "g")]
    G,
    #[serde(rename = "g_R")]
    GR,
    #[serde(rename = "g_S_star")]
    GSStar,
}

impl std::str::FromStr for ProbeMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "g" => Ok(ProbeMetric::G),
            "g_R" | "g_r" => Ok(ProbeMetric::GR),
            "g_S_star" | "g_s_star" => Ok(ProbeMetric::GSStar),
            other => Err(Error::Parse(format!("unknown probe metric `{other}` (g, g_R, g_S_star)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeVerdict {
    WitnessFound,
    NoWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeOptions {
    pub n_samples: usize,
    pub s_max: f64,
    pub tol: f64,
    pub seed: u64,
    /// Coordinate box for initial points; the catalog box when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_box: Option<Vec<(f64, f64)>>,
    /// Auxiliary-norm threshold for Lorentzian runs.
    pub blowup_threshold: f64,
    /// Coordinate magnitude treated as escape for Riemannian runs.
    pub coordinate_blowup: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            n_samples: 100,
            s_max: 100.0,
            tol: 1e-10,
            seed: 0,
            sample_box: None,
            blowup_threshold: 1e8,
            coordinate_blowup: 1e100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub sample_index: usize,
    /// Initial position; `(t, x)` for `g` and `g_R`, `x` for `g_S_star`.
    pub position: Vec<f64>,
    /// Unit-speed initial velocity in the probed metric (`g_R` for `g`).
    pub velocity: Vec<f64>,
    pub termination: Termination,
    /// Packed states `[position, velocity]` along the run, by parameter.
    #[serde(skip)]
    pub samples: Vec<(f64, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub verdict: ProbeVerdict,
    pub metric_probed: ProbeMetric,
    pub n_samples: usize,
    pub s_max: f64,
    pub seed: u64,
    /// Finite-parameter escapes among the samples.
    pub n_escapes: usize,
    pub witness: Option<Witness>,
}

fn sample_point(chart: &Chart, bbox: &[(f64, f64)], rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    for _ in 0..1000 {
        let x: Vec<f64> = bbox.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
        if chart.in_domain(&x) {
            return Some(x);
        }
    }
    None
}

/// Unit vector in the metric `g` from a standard normal draw.
fn unit_vector(g: &nalgebra::DMatrix<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = g.nrows();
    loop {
        // Box–Muller normals
        let z: Vec<f64> = (0..n)
            .map(|_| {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            })
            .collect();
        let q: f64 = (0..n).map(|i| (0..n).map(|j| g[(i, j)] * z[i] * z[j]).sum::<f64>()).sum();
        if q > 1e-12 {
            let s = q.sqrt();
            return z.iter().map(|v| v / s).collect();
        }
    }
}

struct Run {
    position: Vec<f64>,
    velocity: Vec<f64>,
    termination: Termination,
    samples: Vec<(f64, Vec<f64>)>,
}

fn run_sample(st: &StaticSpacetime, metric: ProbeMetric, bbox: &[(f64, f64)], opts: &ProbeOptions, k: usize) -> Result<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(k as u64);
    let x = sample_point(st.chart(), bbox, &mut rng)
        .ok_or_else(|| Error::invalid("sample box does not meet the chart domain"))?;
    match metric {
        ProbeMetric::G => {
            let aux = st.aux_chart();
            let mut y = vec![0.0];
            y.extend_from_slice(&x);
            let w = unit_vector(&aux.metric_at(&y)?, &mut rng);
            let init = GeodesicState::new(0.0, x.clone(), w[0], w[1..].to_vec());
            let gopts = GeodesicOptions {
                tol: opts.tol,
                blowup_threshold: opts.blowup_threshold,
            };
            let tr = match integrate_geodesic(st, &init, opts.s_max, &gopts) {
                Ok(tr) => tr,
                Err(Error::Stiffness { partial: Some(p), .. }) => *p,
                Err(e) => return Err(e),
            };
            let samples = tr.samples.iter().map(|p| (p.s, p.state.to_vec())).collect();
            Ok(Run {
                position: y,
                velocity: w,
                termination: tr.termination,
                samples,
            })
        }
        ProbeMetric::GR | ProbeMetric::GSStar => {
            let (chart, x0) = if metric == ProbeMetric::GR {
                let mut y = vec![0.0];
                y.extend_from_slice(&x);
                (st.aux_chart(), y)
            } else {
                (st.conformal_slice(), x)
            };
            let w = unit_vector(&chart.metric_at(&x0)?, &mut rng);
            let sg = integrate_slice_geodesic(
                &chart,
                &x0,
                &w,
                &SliceGeodesicOptions {
                    s_max: opts.s_max,
                    tol: opts.tol,
                    blowup: opts.coordinate_blowup,
                },
            )?;
            let samples = sg.solution.samples.iter().map(|p| (p.s, p.y.clone())).collect();
            Ok(Run {
                position: x0,
                velocity: w,
                termination: sg.termination(),
                samples,
            })
        }
    }
}

/// Integrate geodesics of the selected metric from random unit-speed data
/// and report the first finite-parameter escape, if any.
pub fn completeness_probe(
    st: &StaticSpacetime,
    metric: ProbeMetric,
    sample_box: &[(f64, f64)],
    opts: &ProbeOptions,
) -> Result<ProbeReport> {
    if opts.n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    if !(opts.s_max > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::invalid("s_max and tol must be positive"));
    }
    let bbox = opts.sample_box.as_deref().unwrap_or(sample_box);
    if bbox.len() != st.dim() || bbox.iter().any(|(lo, hi)| !(lo <= hi)) {
        return Err(Error::invalid("sample box must give one ordered interval per coordinate"));
    }
    let runs: Vec<Result<Run>> = (0..opts.n_samples)
        .into_par_iter()
        .map(|k| run_sample(st, metric, bbox, opts, k))
        .collect();
    let mut n_escapes = 0;
    let mut witness = None;
    for (k, run) in runs.into_iter().enumerate() {
        let run = run?;
        if run.termination.is_finite_escape() {
            n_escapes += 1;
            if witness.is_none() {
                witness = Some(Witness {
                    sample_index: k,
                    position: run.position,
                    velocity: run.velocity,
                    termination: run.termination,
                    samples: run.samples,
                });
            }
        }
    }
    Ok(ProbeReport {
        verdict: if witness.is_some() {
            ProbeVerdict::WitnessFound
        } else {
            ProbeVerdict::NoWitness
        },
        metric_probed: metric,
        n_samples: opts.n_samples,
        s_max: opts.s_max,
        seed: opts.seed,
        n_escapes,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    #[test]
    fn flat_plane_has_no_witness() {
        let st = catalog::spacetime("flat_plane").unwrap();
        let opts = ProbeOptions {
            n_samples: 10,
            s_max: 50.0,
            ..Default::default()
        };
        for m in [ProbeMetric::G, ProbeMetric::GR, ProbeMetric::GSStar] {
            let r = completeness_probe(&st, m, &[(-3.0, 3.0), (-3.0, 3.0)], &opts).unwrap();
            assert_eq!(r.verdict, ProbeVerdict::NoWitness);
        }
    }

    #[test]
    fn disk_has_witness() {
        let st = catalog::spacetime("unit_disk").unwrap();
        let opts = ProbeOptions {
            n_samples: 4,
            ..Default::default()
        };
        let r = completeness_probe(&st, ProbeMetric::G, &[(-0.5, 0.5), (-0.5, 0.5)], &opts).unwrap();
        assert_eq!(r.verdict, ProbeVerdict::WitnessFound);
        let w = r.witness.unwrap();
        assert!(matches!(w.termination, Termination::LeftDomain { .. }));
    }
}
