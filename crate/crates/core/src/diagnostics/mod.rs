//! Growth classifiers, completeness probes and causal arrival times.

mod growth;
mod probe;

use serde::{Deserialize, Serialize};

use crate::manifold::{slice_distance, DistanceOptions, SliceCurve};
use crate::spacetime::StaticSpacetime;
use crate::{Error, Result};

pub use growth::{growth_exponent, log_radii, GrowthClass, GrowthOptions, GrowthReport, GrowthTarget};
pub use probe::{completeness_probe, ProbeMetric, ProbeOptions, ProbeReport, ProbeVerdict, Witness};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalResult {
    pub infimum_t: f64,
    pub attained: bool,
    /// `g_S/β`-distance from the source to the target.
    pub conformal_distance: f64,
    /// The minimizing `g_S/β` curve, when the infimum is attained.
    pub curve: Option<SliceCurve>,
    /// Best curve found; runs along the obstacle when not attained.
    #[serde(skip)]
    pub best_curve: Option<SliceCurve>,
    pub min_boundary_distance: Option<f64>,
}

/// Earliest time at which a future causal curve from `(t_p, x_p)` can reach
/// the line over `x_target`: `t_p` plus the conformal slice distance.
pub fn causal_arrival(
    st: &StaticSpacetime,
    t_p: f64,
    x_p: &[f64],
    x_target: &[f64],
    opts: &DistanceOptions,
) -> Result<ArrivalResult> {
    if !t_p.is_finite() {
        return Err(Error::invalid("source time must be finite"));
    }
    let conf = st.conformal_slice();
    let d = slice_distance(&conf, x_p, x_target, opts)?;
    Ok(ArrivalResult {
        infimum_t: t_p + d.length,
        attained: d.attained,
        conformal_distance: d.length,
        curve: d.minimizer,
        best_curve: Some(d.best_curve),
        min_boundary_distance: d.min_boundary_distance.is_finite().then_some(d.min_boundary_distance),
    })
}
