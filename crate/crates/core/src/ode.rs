//! Adaptive Dormand–Prince 5(4) integrator with cubic Hermite dense output.
//!
//! The integrator is deliberately small: forward integration only, one scalar
//! tolerance used for both the relative and absolute parts of the error norm,
//! and a user monitor that can veto a step (domain exit) or stop the run
//! (blow-up). Domain exits are localized by step halving.

use serde::{Deserialize, Serialize};

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Why an integration run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    ReachedSMax,
    LeftDomain { s_exit: f64 },
    BlowUp { s_exit: f64 },
}

impl Termination {
    pub fn is_finite_escape(&self) -> bool {
        !matches!(self, Termination::ReachedSMax)
    }

    pub fn exit_parameter(&self) -> Option<f64> {
        match *self {
            Termination::ReachedSMax => None,
            Termination::LeftDomain { s_exit } | Termination::BlowUp { s_exit } => Some(s_exit),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub tol: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Parameter resolution at which a domain exit is reported.
    pub exit_resolution: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        OdeOptions {
            tol,
            ..Default::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            tol: 1e-10,
            h_min: 1e-14,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
            exit_resolution: 1e-10,
        }
    }
}

/// Failure signalled by a right-hand side.
#[derive(Debug)]
pub enum RhsFailure {
    /// The stage point is outside the domain; the step is retried with a smaller size.
    OutOfDomain,
    Fatal(crate::Error),
}

/// Verdict of the step monitor on an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepCheck {
    Continue,
    /// The step crossed out of the domain (e.g. through a measure-zero obstacle).
    Crossed,
    BlowUp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSample {
    pub s: f64,
    pub y: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub samples: Vec<OdeSample>,
    pub termination: Termination,
    pub steps_rejected: usize,
}

#[derive(Debug)]
pub enum OdeError {
    Underflow { s: f64, step: f64, partial: OdeSolution },
    Fatal(crate::Error),
}

impl OdeSolution {
    pub fn s_end(&self) -> f64 {
        self.samples.last().map(|p| p.s).unwrap_or(0.0)
    }

    /// Cubic Hermite interpolation of the state at `s` (clamped to the integrated range).
    pub fn eval(&self, s: f64) -> Vec<f64> {
        let pts = &self.samples;
        if pts.len() == 1 || s <= pts[0].s {
            return pts[0].y.clone();
        }
        let last = pts.len() - 1;
        if s >= pts[last].s {
            return pts[last].y.clone();
        }
        let idx = pts.partition_point(|p| p.s <= s).saturating_sub(1);
        hermite(&pts[idx], &pts[idx + 1], s)
    }
}

pub(crate) fn hermite(a: &OdeSample, b: &OdeSample, s: f64) -> Vec<f64> {
    let h = b.s - a.s;
    let th = (s - a.s) / h;
    let th2 = th * th;
    let th3 = th2 * th;
    let h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
    let h10 = th3 - 2.0 * th2 + th;
    let h01 = -2.0 * th3 + 3.0 * th2;
    let h11 = th3 - th2;
    a.y.iter()
        .zip(&b.y)
        .zip(a.f.iter().zip(&b.f))
        .map(|((ya, yb), (fa, fb))| h00 * ya + h10 * h * fa + h01 * yb + h11 * h * fb)
        .collect()
}

/// Default error scale `tol · (1 + max(|y|, |y_new|))` per component.
pub fn default_scale(y: &[f64], y_new: &[f64], tol: f64, sc: &mut [f64]) {
    for ((s, a), b) in sc.iter_mut().zip(y).zip(y_new) {
        *s = tol + tol * a.abs().max(b.abs());
    }
}

fn error_norm(err: &[f64], sc: &[f64]) -> f64 {
    let sum: f64 = err.iter().zip(sc).map(|(e, s)| (e / s).powi(2)).sum();
    (sum / err.len() as f64).sqrt()
}

/// Integrate `y' = f(s, y)` from `s0` to `s_end`.
///
/// `monitor(prev, next)` is called on every candidate step after the error
/// test passes.
pub fn integrate<F, M>(
    rhs: F,
    y0: &[f64],
    s0: f64,
    s_end: f64,
    opts: &OdeOptions,
    monitor: M,
) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsFailure>,
    M: FnMut(&[f64], &[f64]) -> StepCheck,
{
    integrate_scaled(rhs, default_scale, y0, s0, s_end, opts, monitor)
}

/// As [`integrate`], with the per-component error scale supplied by
/// `scale(y, y_new, tol, sc)`.
pub fn integrate_scaled<F, S, M>(
    mut rhs: F,
    mut scale: S,
    y0: &[f64],
    s0: f64,
    s_end: f64,
    opts: &OdeOptions,
    mut monitor: M,
) -> Result<OdeSolution, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsFailure>,
    S: FnMut(&[f64], &[f64], f64, &mut [f64]),
    M: FnMut(&[f64], &[f64]) -> StepCheck,
{
    let n = y0.len();
    let mut f0 = vec![0.0; n];
    match rhs(s0, y0, &mut f0) {
        Ok(()) => {}
        Err(RhsFailure::OutOfDomain) => {
            return Err(OdeError::Fatal(crate::Error::invalid(
                "initial state outside the domain",
            )))
        }
        Err(RhsFailure::Fatal(e)) => return Err(OdeError::Fatal(e)),
    }
    let mut sol = OdeSolution {
        samples: vec![OdeSample {
            s: s0,
            y: y0.to_vec(),
            f: f0.clone(),
        }],
        termination: Termination::ReachedSMax,
        steps_rejected: 0,
    };
    if s_end <= s0 {
        return Ok(sol);
    }

    let tol = opts.tol;
    let mut h = initial_step(&mut rhs, s0, y0, &f0, tol)
        .min(opts.h_max)
        .min(s_end - s0);

    let mut s = s0;
    let mut y = y0.to_vec();
    let mut f = f0;
    let mut k = vec![vec![0.0; n]; 7];
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut sc = vec![0.0; n];
    let mut boundary_hit = false;
    let mut steps = 0usize;

    loop {
        steps += 1;
        if steps > opts.max_steps {
            return Err(OdeError::Underflow {
                s,
                step: h,
                partial: sol,
            });
        }
        let last_step = s + h >= s_end;
        if last_step {
            h = s_end - s;
        }
        k[0].copy_from_slice(&f);
        let stage = |rhs: &mut F,
                         k: &mut Vec<Vec<f64>>,
                         tmp: &mut Vec<f64>,
                         idx: usize,
                         c: f64,
                         coeffs: &[f64]|
         -> Result<(), RhsFailure> {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in coeffs.iter().enumerate() {
                    acc += h * a * k[j][i];
                }
                tmp[i] = acc;
            }
            rhs(s + c * h, tmp, &mut k[idx])
        };
        let staged = (|| -> Result<(), RhsFailure> {
            stage(&mut rhs, &mut k, &mut tmp, 1, C2, &[A21])?;
            stage(&mut rhs, &mut k, &mut tmp, 2, C3, &[A31, A32])?;
            stage(&mut rhs, &mut k, &mut tmp, 3, C4, &[A41, A42, A43])?;
            stage(&mut rhs, &mut k, &mut tmp, 4, C5, &[A51, A52, A53, A54])?;
            stage(&mut rhs, &mut k, &mut tmp, 5, 1.0, &[A61, A62, A63, A64, A65])?;
            for i in 0..n {
                y_new[i] = y[i]
                    + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            rhs(s + h, &y_new, &mut k[6])
        })();

        let domain_failure = match staged {
            Ok(()) => false,
            Err(RhsFailure::OutOfDomain) => true,
            Err(RhsFailure::Fatal(e)) => return Err(OdeError::Fatal(e)),
        };

        if !domain_failure {
            for i in 0..n {
                err[i] = h
                    * (E1 * k[0][i]
                        + E3 * k[2][i]
                        + E4 * k[3][i]
                        + E5 * k[4][i]
                        + E6 * k[5][i]
                        + E7 * k[6][i]);
            }
            scale(&y, &y_new, tol, &mut sc);
            let en = error_norm(&err, &sc);
            if !en.is_finite() {
                sol.steps_rejected += 1;
                h *= 0.2;
            } else if en <= 1.0 {
                match monitor(&y, &y_new) {
                    StepCheck::Crossed => {
                        boundary_hit = true;
                        sol.steps_rejected += 1;
                        h *= 0.5;
                    }
                    check => {
                        s = if last_step { s_end } else { s + h };
                        y.copy_from_slice(&y_new);
                        f.copy_from_slice(&k[6]);
                        sol.samples.push(OdeSample {
                            s,
                            y: y.clone(),
                            f: f.clone(),
                        });
                        if check == StepCheck::BlowUp {
                            sol.termination = Termination::BlowUp { s_exit: s };
                            return Ok(sol);
                        }
                        if last_step {
                            return Ok(sol);
                        }
                        let mut factor = 0.9 * en.powf(-0.2);
                        factor = factor.clamp(0.2, 5.0);
                        if boundary_hit {
                            factor = factor.min(1.0);
                            boundary_hit = false;
                        }
                        h = (h * factor).min(opts.h_max);
                        continue;
                    }
                }
            } else {
                sol.steps_rejected += 1;
                h *= (0.9 * en.powf(-0.2)).clamp(0.2, 1.0);
            }
        } else {
            boundary_hit = true;
            sol.steps_rejected += 1;
            h *= 0.5;
        }

        if boundary_hit && h < opts.exit_resolution * s.abs().max(1.0) {
            sol.termination = Termination::LeftDomain { s_exit: s };
            return Ok(sol);
        }
        if h < opts.h_min * s.abs().max(1.0) {
            return Err(OdeError::Underflow {
                s,
                step: h,
                partial: sol,
            });
        }
    }
}

fn initial_step<F>(rhs: &mut F, s0: f64, y0: &[f64], f0: &[f64], tol: f64) -> f64
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<(), RhsFailure>,
{
    let scaled = |v: &[f64]| -> f64 {
        let sum: f64 = v
            .iter()
            .zip(y0)
            .map(|(vi, yi)| (vi / (tol + tol * yi.abs())).powi(2))
            .sum();
        (sum / v.len() as f64).sqrt()
    };
    let d0 = scaled(y0);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    if rhs(s0 + h0, &y1, &mut f1).is_err() {
        return h0;
    }
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(_s: f64, y: &[f64], out: &mut [f64]) -> Result<(), RhsFailure> {
        out[0] = y[1];
        out[1] = -y[0];
        Ok(())
    }

    #[test]
    fn harmonic_oscillator_is_accurate() {
        let sol = integrate(
            harmonic,
            &[1.0, 0.0],
            0.0,
            20.0,
            &OdeOptions::with_tol(1e-11),
            |_, _| StepCheck::Continue,
        )
        .unwrap();
        let end = sol.samples.last().unwrap();
        assert_eq!(end.s, 20.0);
        assert!((end.y[0] - 20f64.cos()).abs() < 1e-8);
        assert!((end.y[1] + 20f64.sin()).abs() < 1e-8);
        assert_eq!(sol.termination, Termination::ReachedSMax);
    }

    #[test]
    fn dense_output_tracks_solution() {
        let sol = integrate(
            harmonic,
            &[1.0, 0.0],
            0.0,
            5.0,
            &OdeOptions::with_tol(1e-12),
            |_, _| StepCheck::Continue,
        )
        .unwrap();
        for i in 0..50 {
            let s = 0.1 * i as f64 + 0.037;
            let y = sol.eval(s);
            assert!((y[0] - s.cos()).abs() < 1e-5, "s = {s}");
        }
    }

    #[test]
    fn domain_exit_is_localized() {
        // y' = 1 on the domain y < 1: exits at s = 1.
        let sol = integrate(
            |_, y, out| {
                if y[0] >= 1.0 {
                    return Err(RhsFailure::OutOfDomain);
                }
                out[0] = 1.0;
                Ok(())
            },
            &[0.0],
            0.0,
            10.0,
            &OdeOptions::with_tol(1e-10),
            |_, _| StepCheck::Continue,
        )
        .unwrap();
        match sol.termination {
            Termination::LeftDomain { s_exit } => assert!((s_exit - 1.0).abs() < 1e-8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn blow_up_is_reported() {
        // y' = y^2, y(0) = 1 blows up at s = 1.
        let sol = integrate(
            |_, y, out| {
                out[0] = y[0] * y[0];
                Ok(())
            },
            &[1.0],
            0.0,
            2.0,
            &OdeOptions::with_tol(1e-10),
            |_, y| {
                if y[0] > 1e8 {
                    StepCheck::BlowUp
                } else {
                    StepCheck::Continue
                }
            },
        )
        .unwrap();
        let s = sol.termination.exit_parameter().unwrap();
        assert!((s - 1.0).abs() < 1e-6);
    }
}
