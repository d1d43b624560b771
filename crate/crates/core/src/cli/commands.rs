use clap::Args;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{List, Outcome, EXIT_DIVERGED, EXIT_NUMERICAL, EXIT_OK};
use crate::catalog::{self, SpacetimeSpec};
use crate::connect::{minimize_action, shooting_connect, ConnectOptions, ConnectStatus, ShootOptions, ShootVerdict};
use crate::diagnostics::{
    causal_arrival, completeness_probe, growth_exponent, log_radii, GrowthOptions, GrowthTarget, ProbeMetric,
    ProbeOptions,
};
use crate::io;
use crate::manifold::DistanceOptions;
use crate::spacetime::{
    integrate_classical, integrate_geodesic, jacobi_check, lift_classical, reduce_to_classical, GeodesicOptions,
    GeodesicState, GeodesicTrajectory, JacobiOptions, StaticSpacetime,
};
use crate::{Error, Result};

pub(super) struct Context {
    pub spec: Option<SpacetimeSpec>,
    pub seed: u64,
    pub tol: f64,
}

impl Context {
    fn spacetime(&self) -> Result<StaticSpacetime> {
        let spec = self
            .spec
            .as_ref()
            .ok_or_else(|| Error::invalid("no spacetime given (--spacetime or config `spacetime`)"))?;
        catalog::build(spec)
    }

    fn spec(&self) -> &SpacetimeSpec {
        self.spec.as_ref().expect("checked by spacetime()")
    }

    fn envelope(&self, command: &str, result: impl Serialize) -> Result<Value> {
        Ok(json!({
            "command": command,
            "spacetime": self.spec,
            "seed": self.seed,
            "result": serde_json::to_value(result)?,
        }))
    }
}

pub(super) fn operation(command: &str) -> &'static str {
    match command {
        "catalog" => "cli::catalog_list",
        "integrate" => "spacetime::integrate_geodesic",
        "connect" => "connect::minimize_action",
        "shoot" => "connect::shooting_connect",
        "growth" => "diagnostics::growth_exponent",
        "probe" => "diagnostics::completeness_probe",
        "arrival" => "diagnostics::causal_arrival",
        "reduce" => "spacetime::reduce_to_classical",
        "lift" => "spacetime::lift_classical",
        _ => "cli::run_experiment",
    }
}

pub(super) fn dispatch<P: Serialize>(
    ctx: &Context,
    params: P,
    f: fn(&Context, &P) -> Result<Outcome>,
) -> Result<(Value, Outcome)> {
    let outcome = f(ctx, &params)?;
    let mut value = serde_json::to_value(&params)?;
    if let Value::Object(m) = &mut value {
        m.retain(|_, v| !v.is_null());
    }
    Ok((value, outcome))
}

fn require<'a>(v: &'a Option<List>, name: &str) -> Result<&'a [f64]> {
    v.as_ref()
        .map(|l| l.0.as_slice())
        .ok_or_else(|| Error::invalid(format!("missing parameter `{name}`")))
}

fn event<'a>(v: &'a Option<List>, name: &str, dim: usize) -> Result<&'a [f64]> {
    let p = require(v, name)?;
    if p.len() != dim + 1 {
        return Err(Error::invalid(format!("`{name}` needs {} values (t, x), got {}", dim + 1, p.len())));
    }
    Ok(p)
}

fn slice_point<'a>(v: &'a Option<List>, name: &str, dim: usize) -> Result<&'a [f64]> {
    let p = require(v, name)?;
    if p.len() != dim {
        return Err(Error::invalid(format!("`{name}` needs {dim} values, got {}", p.len())));
    }
    Ok(p)
}

fn positive(v: f64, name: &str) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("`{name}` must be positive")))
    }
}

fn trajectory_summary(tr: &GeodesicTrajectory) -> Value {
    json!({
        "lambda0": tr.lambda0,
        "C0": tr.c0,
        "drift": tr.drift,
        "termination": tr.termination,
        "s_end": tr.s_end(),
        "n_samples": tr.samples.len(),
        "final_state": tr.last(),
    })
}

pub(super) fn catalog() -> Result<Outcome> {
    Ok(Outcome {
        report: json!({ "command": "catalog", "entries": catalog::catalog_list() }),
        artifacts: vec![],
        exit: EXIT_OK,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrateParams {
    /// Initial event `t,x0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<List>,
    /// Initial velocity `tdot,xdot0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<List>,
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Auxiliary-norm threshold treated as blow-up.
    #[arg(long)]
    pub blowup_threshold: Option<f64>,
}

pub(super) fn integrate(ctx: &Context, p: &IntegrateParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let n = st.dim();
    let x = event(&p.p, "p", n)?;
    let v = event(&p.v, "v", n)?;
    let opts = GeodesicOptions {
        tol: ctx.tol,
        blowup_threshold: positive(p.blowup_threshold.unwrap_or(1e8), "blowup_threshold")?,
    };
    let init = GeodesicState::new(x[0], x[1..].to_vec(), v[0], v[1..].to_vec());
    let tr = integrate_geodesic(&st, &init, positive(p.s_max.unwrap_or(10.0), "s_max")?, &opts)?;
    Ok(Outcome {
        report: ctx.envelope("integrate", trajectory_summary(&tr))?,
        artifacts: vec![("trajectory.csv".into(), io::trajectory_csv(n, &tr.samples))],
        exit: EXIT_OK,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectParams {
    /// Start event `t,x0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<List>,
    /// End event `t,x0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub p1: Option<List>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub residual_tol: Option<f64>,
    #[arg(long)]
    pub n_seeds: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub j_floor: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub boundary_eps: Option<f64>,
}

pub(super) fn connect(ctx: &Context, p: &ConnectParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let n = st.dim();
    let p0 = event(&p.p0, "p0", n)?;
    let p1 = event(&p.p1, "p1", n)?;
    let d = ConnectOptions::default();
    let opts = ConnectOptions {
        segments: p.segments.unwrap_or(d.segments),
        max_iter: p.max_iter.unwrap_or(d.max_iter),
        residual_tol: positive(p.residual_tol.unwrap_or(d.residual_tol), "residual_tol")?,
        n_seeds: p.n_seeds.unwrap_or(d.n_seeds),
        seed: ctx.seed,
        j_floor: p.j_floor.unwrap_or(d.j_floor),
        window: p.window.unwrap_or(d.window),
        boundary_eps: positive(p.boundary_eps.unwrap_or(d.boundary_eps), "boundary_eps")?,
        null_eps: d.null_eps,
    };
    let r = minimize_action(&st, &p0[1..], &p1[1..], p0[0], p1[0] - p0[0], &opts)?;
    let rows = io::samples_from_states(&st, &r.lifted_states(&st)?)?;
    let exit = match r.status {
        ConnectStatus::Geodesic => EXIT_OK,
        ConnectStatus::Diverged => EXIT_DIVERGED,
        ConnectStatus::MaxIter => EXIT_NUMERICAL,
    };
    Ok(Outcome {
        report: ctx.envelope("connect", &r)?,
        artifacts: vec![("curve.csv".into(), io::trajectory_csv(n, &rows))],
        exit,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShootParams {
    #[arg(long, allow_hyphen_values = true)]
    pub p0: Option<List>,
    #[arg(long, allow_hyphen_values = true)]
    pub p1: Option<List>,
    /// Direction sweep resolution (one-dimensional slices).
    #[arg(long)]
    pub angle_res: Option<f64>,
    /// Fallback direction grid resolution (two-dimensional slices).
    #[arg(long)]
    pub grid_res: Option<f64>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub miss_tol: Option<f64>,
    #[arg(long)]
    pub max_newton: Option<usize>,
}

pub(super) fn shoot(ctx: &Context, p: &ShootParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let n = st.dim();
    let p0 = event(&p.p0, "p0", n)?;
    let p1 = event(&p.p1, "p1", n)?;
    let d = ShootOptions::default();
    let opts = ShootOptions {
        angle_res: positive(p.angle_res.unwrap_or(d.angle_res), "angle_res")?,
        grid_res: positive(p.grid_res.unwrap_or(d.grid_res), "grid_res")?,
        s_max: positive(p.s_max.unwrap_or(d.s_max), "s_max")?,
        tol: ctx.tol,
        miss_tol: positive(p.miss_tol.unwrap_or(d.miss_tol), "miss_tol")?,
        max_newton: p.max_newton.unwrap_or(d.max_newton),
        null_eps: d.null_eps,
    };
    let r = shooting_connect(&st, p0, p1, &opts)?;
    let artifacts = match &r.trajectory {
        Some(tr) => vec![("trajectory.csv".into(), io::trajectory_csv(n, &tr.samples))],
        None => vec![],
    };
    let exit = match r.verdict {
        ShootVerdict::Reached => EXIT_OK,
        ShootVerdict::NotReachedAtSweepResolution => EXIT_DIVERGED,
    };
    Ok(Outcome {
        report: ctx.envelope("shoot", &r)?,
        artifacts,
        exit,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthParams {
    /// `beta` or `inv_beta`.
    #[arg(long)]
    pub which: Option<String>,
    /// Base point; the catalog default when absent.
    #[arg(long, allow_hyphen_values = true)]
    pub base: Option<List>,
    /// Explicit radii; otherwise `n_radii` log-spaced values in `[r_min, r_max]`.
    #[arg(long)]
    pub radii: Option<List>,
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub r_max: Option<f64>,
    #[arg(long)]
    pub n_radii: Option<usize>,
    #[arg(long)]
    pub n_rays: Option<usize>,
    #[arg(long)]
    pub band_lo: Option<f64>,
    #[arg(long)]
    pub band_hi: Option<f64>,
}

pub(super) fn growth(ctx: &Context, p: &GrowthParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let which = match p.which.as_deref().unwrap_or("beta") {
        "beta" => GrowthTarget::Beta,
        "inv_beta" => GrowthTarget::InvBeta,
        other => return Err(Error::invalid(format!("unknown growth target `{other}` (beta, inv_beta)"))),
    };
    let base = match &p.base {
        Some(_) => slice_point(&p.base, "base", st.dim())?.to_vec(),
        None => catalog::base_point(&catalog::entry(&ctx.spec().name)?, st.dim()),
    };
    let radii = match &p.radii {
        Some(r) => r.0.clone(),
        None => {
            let lo = positive(p.r_min.unwrap_or(1.0), "r_min")?;
            let hi = positive(p.r_max.unwrap_or(1000.0), "r_max")?;
            let n = p.n_radii.unwrap_or(13);
            if n < 2 {
                return Err(Error::invalid("n_radii must be at least 2"));
            }
            log_radii(lo, hi, n)
        }
    };
    let d = GrowthOptions::default();
    let opts = GrowthOptions {
        n_rays: p.n_rays.unwrap_or(d.n_rays),
        bands: (p.band_lo.unwrap_or(d.bands.0), p.band_hi.unwrap_or(d.bands.1)),
        tol: ctx.tol,
    };
    let r = growth_exponent(&st, which, &base, &radii, &opts)?;
    Ok(Outcome {
        report: ctx.envelope("growth", &r)?,
        artifacts: vec![("growth.csv".into(), io::growth_csv(&r.radii, &r.max_values))],
        exit: EXIT_OK,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeParams {
    /// `g`, `g_R` or `g_S_star`.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Sampling box as `lo0,hi0,lo1,hi1,..`; the catalog box when absent.
    #[arg(long = "box", allow_hyphen_values = true)]
    #[serde(rename = "box")]
    pub sample_box: Option<List>,
    #[arg(long)]
    pub blowup_threshold: Option<f64>,
}

pub(super) fn probe(ctx: &Context, p: &ProbeParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let metric: ProbeMetric = p.metric.as_deref().unwrap_or("g").parse()?;
    let bbox = match &p.sample_box {
        Some(_) => slice_point(&p.sample_box, "box", 2 * st.dim())?
            .chunks(2)
            .map(|c| (c[0], c[1]))
            .collect(),
        None => catalog::sample_box(&catalog::entry(&ctx.spec().name)?, st.dim()),
    };
    let d = ProbeOptions::default();
    let opts = ProbeOptions {
        n_samples: p.n_samples.unwrap_or(d.n_samples),
        s_max: positive(p.s_max.unwrap_or(d.s_max), "s_max")?,
        tol: ctx.tol,
        seed: ctx.seed,
        sample_box: None,
        blowup_threshold: positive(p.blowup_threshold.unwrap_or(d.blowup_threshold), "blowup_threshold")?,
        coordinate_blowup: d.coordinate_blowup,
    };
    let r = completeness_probe(&st, metric, &bbox, &opts)?;
    let artifacts = match &r.witness {
        Some(w) => vec![("witness.csv".into(), io::packed_csv(w.position.len(), &w.samples))],
        None => vec![],
    };
    Ok(Outcome {
        report: ctx.envelope("probe", &r)?,
        artifacts,
        exit: EXIT_OK,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalParams {
    /// Source event `t,x0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<List>,
    /// Target slice point `x0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub target: Option<List>,
    #[arg(long)]
    pub segments: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

pub(super) fn arrival(ctx: &Context, p: &ArrivalParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let n = st.dim();
    let src = event(&p.p, "p", n)?;
    let target = slice_point(&p.target, "target", n)?;
    let d = DistanceOptions::default();
    let opts = DistanceOptions {
        segments: p.segments.unwrap_or(d.segments),
        max_iter: p.max_iter.unwrap_or(d.max_iter),
        ..d
    };
    let r = causal_arrival(&st, src[0], &src[1..], target, &opts)?;
    let artifacts = match &r.best_curve {
        Some(c) => vec![("curve.csv".into(), io::curve_csv(c))],
        None => vec![],
    };
    Ok(Outcome {
        report: ctx.envelope("arrival", &r)?,
        artifacts,
        exit: EXIT_OK,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReduceParams {
    /// Initial event `t,x0,..` of the geodesic.
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<List>,
    /// Initial velocity `tdot,xdot0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<List>,
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Smallest `E - V` at which the Jacobi check is attempted.
    #[arg(long)]
    pub floor: Option<f64>,
}

pub(super) fn reduce(ctx: &Context, p: &ReduceParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let n = st.dim();
    let x = event(&p.p, "p", n)?;
    let v = event(&p.v, "v", n)?;
    let init = GeodesicState::new(x[0], x[1..].to_vec(), v[0], v[1..].to_vec());
    let opts = GeodesicOptions {
        tol: ctx.tol,
        ..Default::default()
    };
    let tr = integrate_geodesic(&st, &init, positive(p.s_max.unwrap_or(10.0), "s_max")?, &opts)?;
    let (cl, rep) = reduce_to_classical(&st, &tr)?;
    let jopts = JacobiOptions {
        floor: positive(p.floor.unwrap_or(JacobiOptions::default().floor), "floor")?,
    };
    let jacobi = match jacobi_check(&st, &cl, &jopts) {
        Ok(j) => json!({ "report": j }),
        Err(e @ Error::NearTurningPoint { .. }) => json!({ "skipped": e.to_string() }),
        Err(e) => return Err(e),
    };
    let result = json!({
        "geodesic": trajectory_summary(&tr),
        "reduction": rep,
        "classical_termination": cl.termination,
        "jacobi": jacobi,
    });
    Ok(Outcome {
        report: ctx.envelope("reduce", result)?,
        artifacts: vec![
            ("geodesic.csv".into(), io::trajectory_csv(n, &tr.samples)),
            ("classical.csv".into(), io::classical_csv(&st, &cl.samples)?),
        ],
        exit: EXIT_OK,
    })
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftParams {
    /// Initial classical position `x0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<List>,
    /// Initial classical velocity `v0,..`.
    #[arg(long, allow_hyphen_values = true)]
    pub v: Option<List>,
    #[arg(long)]
    pub s_max: Option<f64>,
    /// Initial time of the lifted geodesic.
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
}

pub(super) fn lift(ctx: &Context, p: &LiftParams) -> Result<Outcome> {
    let st = ctx.spacetime()?;
    let n = st.dim();
    let x = slice_point(&p.x, "x", n)?;
    let v = slice_point(&p.v, "v", n)?;
    let cl = integrate_classical(&st, x, v, positive(p.s_max.unwrap_or(10.0), "s_max")?, ctx.tol)?;
    let (tr, rep) = lift_classical(&st, &cl, p.t0.unwrap_or(0.0))?;
    let result = json!({
        "energy": cl.energy,
        "energy_drift": cl.energy_drift,
        "classical_termination": cl.termination,
        "lift": rep,
        "geodesic": trajectory_summary(&tr),
    });
    Ok(Outcome {
        report: ctx.envelope("lift", result)?,
        artifacts: vec![
            ("classical.csv".into(), io::classical_csv(&st, &cl.samples)?),
            ("trajectory.csv".into(), io::trajectory_csv(n, &tr.samples)),
        ],
        exit: EXIT_OK,
    })
}
