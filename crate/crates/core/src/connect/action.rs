use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::manifold::{quad_form, SliceCurve};
use crate::spacetime::StaticSpacetime;
use crate::{Error, Result};

/// Discretized `J(x) = ½∫g_S(ẋ, ẋ) - Δt² / (2∫β⁻¹)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionEvaluation {
    #[serde(rename = "J")]
    pub j: f64,
    pub kinetic: f64,
    pub inv_beta_integral: f64,
    pub delta_t: f64,
}

/// Time component of the critical curve: `t(s)` and `λ = Δt / ∫β⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeReconstruction {
    pub times: Vec<f64>,
    pub lambda: f64,
    pub inv_beta_integral: f64,
}

struct Segment {
    delta: Vec<f64>,
    g: DMatrix<f64>,
    /// `∫β⁻¹` and `∫β` over the segment, in units of its parameter length.
    inv_beta: f64,
    beta: f64,
}

// Six-point Gauss–Legendre on [0, 1]. The midpoint rule for ∫β⁻¹ badly
// undercounts segments that leave a region where β is small, and a curve
// can exploit that to push the discrete J far below anything continuous.
const GL_NODES: [f64; 3] = [0.2386191860831969, 0.6612093864662645, 0.9324695142031521];
const GL_WEIGHTS: [f64; 3] = [0.4679139345726910, 0.3607615730481386, 0.1713244923791704];

fn gauss_points() -> impl Iterator<Item = (f64, f64)> {
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .flat_map(|(&x, w)| [(0.5 * (1.0 - x), 0.5 * w), (0.5 * (1.0 + x), 0.5 * w)])
}

fn lerp(a: &[f64], b: &[f64], tau: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + tau * (q - p)).collect()
}

/// `(∫β⁻¹, ∫β)` along the straight segment `a → b`, as fractions of its length in `s`.
fn beta_moments(st: &StaticSpacetime, a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let mut inv = 0.0;
    let mut direct = 0.0;
    for (tau, w) in gauss_points() {
        let beta = st.beta_at(&lerp(a, b, tau))?;
        inv += w / beta;
        direct += w * beta;
    }
    Ok((inv, direct))
}

/// `∂/∂a` and `∂/∂b` of `∫β⁻¹` along `a → b`.
fn inv_beta_gradient(st: &StaticSpacetime, a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = a.len();
    let mut ga = vec![0.0; dim];
    let mut gb = vec![0.0; dim];
    for (tau, w) in gauss_points() {
        let x = lerp(a, b, tau);
        let beta = st.beta_at(&x)?;
        let db = st.beta_grad_at(&x)?;
        for c in 0..dim {
            let d = -w * db[c] / (beta * beta);
            ga[c] += (1.0 - tau) * d;
            gb[c] += tau * d;
        }
    }
    Ok((ga, gb))
}

fn check_curve(st: &StaticSpacetime, curve: &SliceCurve) -> Result<()> {
    if curve.dim() != st.dim() {
        return Err(Error::Dimension {
            expected: st.dim(),
            got: curve.dim(),
        });
    }
    for x in curve.nodes() {
        st.chart().check_point(x)?;
    }
    Ok(())
}

fn segments(st: &StaticSpacetime, curve: &SliceCurve) -> Result<Vec<Segment>> {
    (0..curve.segments())
        .map(|i| {
            let (inv_beta, beta) = beta_moments(st, curve.node(i), curve.node(i + 1))?;
            Ok(Segment {
                delta: curve.delta(i),
                g: st.chart().metric_at(&curve.midpoint(i))?,
                inv_beta,
                beta,
            })
        })
        .collect()
}

fn assemble(segs: &[Segment], delta_t: f64) -> ActionEvaluation {
    let nf = segs.len() as f64;
    let kinetic = 0.5 * nf * segs.iter().map(|s| quad_form(&s.g, &s.delta, &s.delta)).sum::<f64>();
    let inv_beta_integral = segs.iter().map(|s| s.inv_beta).sum::<f64>() / nf;
    ActionEvaluation {
        j: kinetic - delta_t * delta_t / (2.0 * inv_beta_integral),
        kinetic,
        inv_beta_integral,
        delta_t,
    }
}

/// Discrete `J` on the uniform grid of `curve`: kinetic term with the metric
/// at segment midpoints, `∫β⁻¹` by Gauss–Legendre along each segment.
pub fn action_j(st: &StaticSpacetime, curve: &SliceCurve, delta_t: f64) -> Result<ActionEvaluation> {
    check_curve(st, curve)?;
    Ok(assemble(&segments(st, curve)?, delta_t))
}

/// Value and gradient with respect to the interior nodes, flattened
/// node-major into `grad` (length `(N - 1) · n`).
pub(crate) fn action_and_gradient(
    st: &StaticSpacetime,
    curve: &SliceCurve,
    delta_t: f64,
    grad: &mut [f64],
) -> Result<ActionEvaluation> {
    let dim = curve.dim();
    let n = curve.segments();
    let nf = n as f64;
    let h = 1.0 / nf;
    let mut segs = Vec::with_capacity(n);
    let mut extra = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (curve.node(i), curve.node(i + 1));
        let m = curve.midpoint(i);
        let delta = curve.delta(i);
        let g = st.chart().metric_at(&m)?;
        let dg = st.chart().metric_derivatives_at(&m)?;
        let (inv_beta, beta) = beta_moments(st, a, b)?;
        let (ia, ib) = inv_beta_gradient(st, a, b)?;
        // ½ ∂_c g(Δ, Δ) · N/2 is shared by the two ends
        let dq: Vec<f64> = dg.iter().map(|d| quad_form(d, &delta, &delta)).collect();
        let gd: Vec<f64> = (0..dim).map(|a| (0..dim).map(|b| g[(a, b)] * delta[b]).sum()).collect();
        extra.push((dq, gd, ia, ib));
        segs.push(Segment {
            delta,
            g,
            inv_beta,
            beta,
        });
    }
    let ev = assemble(&segs, delta_t);
    let coef = delta_t * delta_t / (2.0 * ev.inv_beta_integral * ev.inv_beta_integral);
    grad.iter_mut().for_each(|v| *v = 0.0);
    for (i, (dq, gd, ia, ib)) in extra.iter().enumerate() {
        for c in 0..dim {
            let shared = 0.25 * nf * dq[c];
            if i + 1 < n {
                grad[i * dim + c] += nf * gd[c] + shared + coef * h * ib[c];
            }
            if i > 0 {
                grad[(i - 1) * dim + c] += -nf * gd[c] + shared + coef * h * ia[c];
            }
        }
    }
    Ok(ev)
}

/// Gradient of the discrete `J` at each interior node `x_1 … x_{N-1}`.
pub fn grad_action_j(st: &StaticSpacetime, curve: &SliceCurve, delta_t: f64) -> Result<Vec<Vec<f64>>> {
    check_curve(st, curve)?;
    let dim = curve.dim();
    let mut g = vec![0.0; (curve.segments() - 1) * dim];
    action_and_gradient(st, curve, delta_t, &mut g)?;
    Ok(g.chunks(dim).map(|c| c.to_vec()).collect())
}

/// `t(s_i) = t0 + Δt (∫₀^{s_i} β⁻¹) / (∫₀¹ β⁻¹)` by cumulative per-segment sums.
pub fn reconstruct_time(
    st: &StaticSpacetime,
    curve: &SliceCurve,
    delta_t: f64,
    t0: f64,
) -> Result<TimeReconstruction> {
    check_curve(st, curve)?;
    let n = curve.segments();
    let w: Vec<f64> = (0..n)
        .map(|i| Ok(beta_moments(st, curve.node(i), curve.node(i + 1))?.0 / n as f64))
        .collect::<Result<_>>()?;
    let total: f64 = w.iter().sum();
    let mut times = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    times.push(t0);
    for (i, wi) in w.iter().enumerate() {
        acc += wi;
        times.push(if i + 1 == n { t0 + delta_t } else { t0 + delta_t * acc / total });
    }
    Ok(TimeReconstruction {
        times,
        lambda: delta_t / total,
        inv_beta_integral: total,
    })
}

/// `J(x) - [½∫g_S(ẋ, ẋ) - (Δt²/2)∫β]`, nonnegative by Cauchy–Schwarz.
pub fn lower_bound_gap(st: &StaticSpacetime, curve: &SliceCurve, delta_t: f64) -> Result<f64> {
    check_curve(st, curve)?;
    let segs = segments(st, curve)?;
    let ev = assemble(&segs, delta_t);
    let beta_integral = segs.iter().map(|s| s.beta).sum::<f64>() / segs.len() as f64;
    let bound = ev.kinetic - 0.5 * delta_t * delta_t * beta_integral;
    Ok(ev.j - bound)
}
