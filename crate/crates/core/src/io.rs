//! Report and CSV emission.
//!
//! Floats in CSV are printed with 17 significant digits (`{:.16e}`), which
//! round-trips every finite `f64`. JSON uses the shortest representation
//! that round-trips.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::manifold::{SliceCurve, SlicePoint};
use crate::spacetime::{ClassicalSample, GeodesicState, StaticSpacetime, TrajectorySample};
use crate::{Error, Result};

fn num(out: &mut String, v: f64) {
    let _ = write!(out, "{v:.16e}");
}

fn row(out: &mut String, vals: impl IntoIterator<Item = f64>) {
    for (i, v) in vals.into_iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        num(out, v);
    }
    out.push('\n');
}

fn parse_rows(text: &str, expected_header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty CSV".into()))?;
    if header.trim() != expected_header {
        return Err(Error::Parse(format!("unexpected CSV header `{header}`, expected `{expected_header}`")));
    }
    let width = expected_header.split(',').count();
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse(format!("CSV line {}: {e}", i + 2)))?;
            if vals.len() != width {
                return Err(Error::Parse(format!("CSV line {} has {} fields, expected {width}", i + 2, vals.len())));
            }
            Ok(vals)
        })
        .collect()
}

fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

pub fn trajectory_header(dim: usize) -> String {
    let mut cols = vec!["s".to_string(), "t".to_string()];
    cols.extend(indexed("x", dim));
    cols.push("tdot".into());
    cols.extend(indexed("xdot", dim));
    cols.extend(["lambda".into(), "C".into(), "auxnorm".into()]);
    cols.join(",")
}

/// Trajectory samples as CSV: `s,t,x0..,tdot,xdot0..,lambda,C,auxnorm`.
pub fn trajectory_csv(dim: usize, samples: &[TrajectorySample]) -> String {
    let mut out = trajectory_header(dim);
    out.push('\n');
    for p in samples {
        let st = &p.state;
        row(
            &mut out,
            [p.s, st.t]
                .into_iter()
                .chain(st.x.iter().copied())
                .chain([st.t_dot])
                .chain(st.x_dot.iter().copied())
                .chain([p.lambda, p.c, p.aux_norm]),
        );
    }
    out
}

pub fn parse_trajectory_csv(dim: usize, text: &str) -> Result<Vec<TrajectorySample>> {
    Ok(parse_rows(text, &trajectory_header(dim))?
        .into_iter()
        .map(|v| TrajectorySample {
            s: v[0],
            state: GeodesicState::new(v[1], v[2..2 + dim].to_vec(), v[2 + dim], v[3 + dim..3 + 2 * dim].to_vec()),
            lambda: v[3 + 2 * dim],
            c: v[4 + 2 * dim],
            aux_norm: v[5 + 2 * dim],
        })
        .collect())
}

/// Trajectory samples for bare `(s, state)` pairs, with the invariants filled in.
pub fn samples_from_states(st: &StaticSpacetime, states: &[(f64, GeodesicState)]) -> Result<Vec<TrajectorySample>> {
    states
        .iter()
        .map(|(s, state)| {
            let lambda = st.lambda(state)?;
            Ok(TrajectorySample {
                s: *s,
                lambda,
                c: st.norm_c(state)?,
                aux_norm: st.aux_norm_sq(state)?.sqrt(),
                state: state.clone(),
            })
        })
        .collect()
}

pub fn classical_header(dim: usize) -> String {
    let mut cols = vec!["s".to_string()];
    cols.extend(indexed("x", dim));
    cols.extend(indexed("v", dim));
    cols.extend(["V".into(), "energy".into()]);
    cols.join(",")
}

/// Classical samples with `V = -1/β` and `E = ½|v|² + V` per row.
pub fn classical_csv(st: &StaticSpacetime, samples: &[ClassicalSample]) -> Result<String> {
    let dim = st.dim();
    let mut out = classical_header(dim);
    out.push('\n');
    for p in samples {
        let v = -1.0 / st.beta_at(&p.x)?;
        let e = 0.5 * st.chart().norm_sq(&p.x, &p.v)? + v;
        row(
            &mut out,
            [p.s].into_iter()
                .chain(p.x.iter().copied())
                .chain(p.v.iter().copied())
                .chain([v, e]),
        );
    }
    Ok(out)
}

pub fn parse_classical_csv(dim: usize, text: &str) -> Result<Vec<ClassicalSample>> {
    Ok(parse_rows(text, &classical_header(dim))?
        .into_iter()
        .map(|v| ClassicalSample {
            s: v[0],
            x: SlicePoint(v[1..1 + dim].to_vec()),
            v: v[1 + dim..1 + 2 * dim].to_vec(),
        })
        .collect())
}

/// Growth samples `(d, f)`; radii no ray reached are written as `nan`.
pub fn growth_csv(radii: &[f64], values: &[Option<f64>]) -> String {
    let mut out = String::from("d,f\n");
    for (d, f) in radii.iter().zip(values) {
        row(&mut out, [*d, f.unwrap_or(f64::NAN)]);
    }
    out
}

pub fn parse_growth_csv(text: &str) -> Result<Vec<(f64, Option<f64>)>> {
    Ok(parse_rows(text, "d,f")?
        .into_iter()
        .map(|v| (v[0], (!v[1].is_nan()).then_some(v[1])))
        .collect())
}

/// Packed states `[q, q̇]` by parameter: `s,q0..,qdot0..`.
pub fn packed_csv(dim: usize, samples: &[(f64, Vec<f64>)]) -> String {
    let mut cols = vec!["s".to_string()];
    cols.extend(indexed("q", dim));
    cols.extend(indexed("qdot", dim));
    let mut out = cols.join(",");
    out.push('\n');
    for (s, y) in samples {
        row(&mut out, std::iter::once(*s).chain(y.iter().copied()));
    }
    out
}

/// Curve nodes by grid parameter: `s,x0..`.
pub fn curve_csv(curve: &SliceCurve) -> String {
    let mut cols = vec!["s".to_string()];
    cols.extend(indexed("x", curve.dim()));
    let mut out = cols.join(",");
    out.push('\n');
    for i in 0..curve.node_count() {
        row(&mut out, std::iter::once(curve.param(i)).chain(curve.node(i).iter().copied()));
    }
    out
}

pub fn parse_curve_csv(dim: usize, text: &str) -> Result<SliceCurve> {
    let mut cols = vec!["s".to_string()];
    cols.extend(indexed("x", dim));
    let rows = parse_rows(text, &cols.join(","))?;
    SliceCurve::from_flat(dim, rows.into_iter().flat_map(|r| r.into_iter().skip(1)).collect())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let smp = TrajectorySample {
            s: 0.1,
            state: GeodesicState::new(1.0 / 3.0, vec![2.0f64.sqrt(), -1e-300], 7.0, vec![f64::MAX, 5e-324]),
            lambda: std::f64::consts::PI,
            c: -0.0,
            aux_norm: 1e300,
        };
        let text = trajectory_csv(2, std::slice::from_ref(&smp));
        assert!(text.starts_with("s,t,x0,x1,tdot,xdot0,xdot1,lambda,C,auxnorm\n"));
        assert_eq!(parse_trajectory_csv(2, &text).unwrap(), vec![smp]);
    }

    #[test]
    fn growth_round_trip() {
        let text = growth_csv(&[1.0, 2.5], &[Some(0.1), None]);
        assert_eq!(parse_growth_csv(&text).unwrap(), vec![(1.0, Some(0.1)), (2.5, None)]);
    }

    #[test]
    fn header_mismatch() {
        assert!(parse_growth_csv("x,y\n1,2\n").is_err());
        assert!(parse_growth_csv("d,f\n1\n").is_err());
    }
}
