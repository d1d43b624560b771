use serde::{Deserialize, Serialize};

use super::{quad_form, Chart};
use crate::{Error, Result};

/// A discrete curve `x: [0,1] → S` sampled on the uniform grid `s_i = i/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCurve {
    dim: usize,
    /// Node coordinates, row-major: node `i` occupies `[i*dim, (i+1)*dim)`.
    coords: Vec<f64>,
}

impl SliceCurve {
    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::invalid("curve coordinates not a multiple of the dimension"));
        }
        let nodes = coords.len() / dim;
        if nodes < 3 {
            return Err(Error::invalid("a slice curve needs N >= 2 segments"));
        }
        Ok(SliceCurve { dim, coords })
    }

    pub fn from_nodes(nodes: &[Vec<f64>]) -> Result<Self> {
        let dim = nodes.first().map(|n| n.len()).unwrap_or(0);
        if nodes.iter().any(|n| n.len() != dim) {
            return Err(Error::invalid("ragged node list"));
        }
        SliceCurve::from_flat(dim, nodes.concat())
    }

    /// Straight coordinate chord from `x0` to `x1` with `n` segments.
    pub fn chord(x0: &[f64], x1: &[f64], n: usize) -> Result<Self> {
        if x0.len() != x1.len() {
            return Err(Error::Dimension {
                expected: x0.len(),
                got: x1.len(),
            });
        }
        let dim = x0.len();
        let mut coords = Vec::with_capacity((n + 1) * dim);
        for i in 0..=n {
            let s = i as f64 / n as f64;
            for d in 0..dim {
                coords.push(x0[d] + s * (x1[d] - x0[d]));
            }
        }
        SliceCurve::from_flat(dim, coords)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.coords.len() / self.dim - 1
    }

    pub fn node_count(&self) -> usize {
        self.segments() + 1
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn node_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.coords
    }

    pub(crate) fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.coords
    }

    pub fn param(&self, i: usize) -> f64 {
        i as f64 / self.segments() as f64
    }

    pub fn midpoint(&self, i: usize) -> Vec<f64> {
        self.node(i)
            .iter()
            .zip(self.node(i + 1))
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn delta(&self, i: usize) -> Vec<f64> {
        self.node(i)
            .iter()
            .zip(self.node(i + 1))
            .map(|(a, b)| b - a)
            .collect()
    }

    /// Every node in the domain and every segment admissible.
    pub fn is_admissible(&self, chart: &Chart) -> bool {
        self.nodes().all(|x| chart.in_domain(x))
            && (0..self.segments()).all(|i| chart.segment_admissible(self.node(i), self.node(i + 1)))
    }

    /// Discrete `g`-length `Σ |Δx_i|_{g(m_i)}` with metric at segment midpoints.
    pub fn length(&self, chart: &Chart) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.segments() {
            let m = self.midpoint(i);
            let g = chart.metric_at(&m)?;
            let d = self.delta(i);
            total += quad_form(&g, &d, &d).max(0.0).sqrt();
        }
        Ok(total)
    }

    /// Smallest boundary distance over the nodes.
    pub fn min_boundary_distance(&self, chart: &Chart) -> f64 {
        self.nodes()
            .map(|x| chart.boundary_distance(x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest Euclidean coordinate norm over the nodes.
    pub fn max_node_norm(&self) -> f64 {
        self.nodes()
            .map(super::euclid_norm)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chord_is_uniform() {
        let c = SliceCurve::chord(&[0.0, 0.0], &[2.0, 2.0], 4).unwrap();
        assert_eq!(c.segments(), 4);
        assert_eq!(c.node(2), &[1.0, 1.0]);
        let len = c.length(&Chart::euclidean(2)).unwrap();
        assert!((len - 8f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn too_few_segments_rejected() {
        assert!(SliceCurve::chord(&[0.0], &[1.0], 1).is_err());
    }
}
