use super::Chart;
use crate::ode::{self, OdeError, OdeOptions, OdeSolution, RhsFailure, StepCheck, Termination};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SliceGeodesicOptions {
    pub s_max: f64,
    pub tol: f64,
    /// Coordinate magnitude (position or velocity) treated as escape to infinity.
    pub blowup: f64,
}

impl Default for SliceGeodesicOptions {
    fn default() -> Self {
        SliceGeodesicOptions {
            s_max: 10.0,
            tol: 1e-10,
            blowup: 1e100,
        }
    }
}

/// A geodesic of a Riemannian chart, state `(x, ẋ)`.
#[derive(Debug, Clone)]
pub struct SliceGeodesic {
    pub dim: usize,
    pub solution: OdeSolution,
}

impl SliceGeodesic {
    pub fn termination(&self) -> Termination {
        self.solution.termination
    }

    pub fn s_end(&self) -> f64 {
        self.solution.s_end()
    }

    pub fn position_at(&self, s: f64) -> Vec<f64> {
        self.solution.eval(s)[..self.dim].to_vec()
    }

    pub fn end_position(&self) -> &[f64] {
        &self.solution.samples.last().expect("non-empty").y[..self.dim]
    }
}

/// Integrate `ẍ^k = -Γ^k_{ij} ẋ^i ẋ^j` from `(x0, v0)`.
pub fn integrate_slice_geodesic(
    chart: &Chart,
    x0: &[f64],
    v0: &[f64],
    opts: &SliceGeodesicOptions,
) -> Result<SliceGeodesic> {
    chart.check_point(x0)?;
    let n = chart.dim();
    if v0.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: v0.len(),
        });
    }
    let y0: Vec<f64> = x0.iter().chain(v0).copied().collect();
    let rhs = |_s: f64, y: &[f64], out: &mut [f64]| -> std::result::Result<(), RhsFailure> {
        let (x, v) = y.split_at(n);
        if !chart.in_domain(x) {
            return Err(RhsFailure::OutOfDomain);
        }
        let gam = chart.christoffel_at(x).map_err(RhsFailure::Fatal)?;
        let acc = gam.contract(v, v);
        out[..n].copy_from_slice(v);
        for k in 0..n {
            out[n + k] = -acc[k];
        }
        Ok(())
    };
    let monitor = |prev: &[f64], next: &[f64]| {
        if next.iter().any(|c| c.abs() > opts.blowup) {
            return StepCheck::BlowUp;
        }
        if chart.has_boundary() && !chart.segment_admissible(&prev[..n], &next[..n]) {
            return StepCheck::Crossed;
        }
        StepCheck::Continue
    };
    let solution = match ode::integrate(rhs, &y0, 0.0, opts.s_max, &OdeOptions::with_tol(opts.tol), monitor) {
        Ok(sol) => sol,
        Err(OdeError::Fatal(e)) => return Err(e),
        Err(OdeError::Underflow { s, step, .. }) => {
            return Err(Error::Stiffness {
                s,
                step,
                partial: None,
            })
        }
    };
    Ok(SliceGeodesic { dim: n, solution })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_geodesic_is_a_straight_line() {
        // start at (r, θ) = (1, 0) moving in +y: the line x = 1
        let chart = Chart::polar();
        let g = integrate_slice_geodesic(
            &chart,
            &[1.0, 0.0],
            &[0.0, 1.0],
            &SliceGeodesicOptions {
                s_max: 3.0,
                ..Default::default()
            },
        )
        .unwrap();
        let p = g.end_position();
        let (x, y) = (p[0] * p[1].cos(), p[0] * p[1].sin());
        assert!((x - 1.0).abs() < 1e-8 && (y - 3.0).abs() < 1e-8, "{x} {y}");
    }

    #[test]
    fn disk_exit_parameter() {
        let chart = Chart::euclidean(2)
            .with_domain(|x| x[0] * x[0] + x[1] * x[1] < 1.0)
            .with_boundary_distance(|x| 1.0 - (x[0] * x[0] + x[1] * x[1]).sqrt());
        let g = integrate_slice_geodesic(&chart, &[0.0, 0.0], &[1.0, 0.0], &Default::default()).unwrap();
        match g.termination() {
            Termination::LeftDomain { s_exit } => assert!((s_exit - 1.0).abs() < 1e-8),
            t => panic!("{t:?}"),
        }
    }
}
