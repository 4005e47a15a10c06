use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Axis-aligned box `[lo_i, hi_i]` per spatial axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Region {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Region { lo: vec![lo], hi: vec![hi] }
    }

    pub fn rectangle(lo: (f64, f64), hi: (f64, f64)) -> Self {
        Region { lo: vec![lo.0, lo.1], hi: vec![hi.0, hi.1] }
    }

    fn contains(&self, x: &[f64]) -> bool {
        let eps = 1e-12;
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (lo, hi))| *x >= lo - eps && *x <= hi + eps)
    }
}

/// Uniform tensor-product grid of interior nodes with homogeneous Dirichlet boundary.
#[derive(Debug, Clone)]
pub(crate) struct Mesh {
    pub lengths: Vec<f64>,
    pub nodes: Vec<usize>,
    pub spacing: Vec<f64>,
}

impl Mesh {
    pub fn new(lengths: &[f64], nodes: &[usize]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 2 || lengths.len() != nodes.len() {
            return Err(invalid("mesh must be one- or two-dimensional with one node count per axis"));
        }
        if lengths.iter().any(|l| !(*l > 0.0 && l.is_finite())) || nodes.iter().any(|n| *n < 2) {
            return Err(invalid("mesh lengths must be positive and each axis needs at least two interior nodes"));
        }
        let spacing = lengths.iter().zip(nodes).map(|(l, n)| l / (*n as f64 + 1.0)).collect();
        Ok(Mesh { lengths: lengths.to_vec(), nodes: nodes.to_vec(), spacing })
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn count(&self) -> usize {
        self.nodes.iter().product()
    }

    /// Volume element attached to each node.
    pub fn cell(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Node coordinates; index = iy·nx + ix.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let nx = self.nodes[0];
        let ix = index % nx;
        let mut c = vec![(ix + 1) as f64 * self.spacing[0]];
        if self.dim() == 2 {
            c.push((index / nx + 1) as f64 * self.spacing[1]);
        }
        c
    }

    pub fn mask(&self, region: &Region, name: &str) -> Result<Vec<bool>> {
        if region.lo.len() != self.dim() || region.hi.len() != self.dim() {
            return Err(invalid(format!("{name} region must have one bound per axis")));
        }
        for (axis, (lo, hi)) in region.lo.iter().zip(&region.hi).enumerate() {
            if !(lo <= hi && *lo >= 0.0 && *hi <= self.lengths[axis]) {
                return Err(invalid(format!("{name} region must lie inside the domain")));
            }
        }
        let mask: Vec<bool> = (0..self.count()).map(|i| region.contains(&self.coords(i))).collect();
        if mask.iter().filter(|m| **m).count() < 2 {
            return Err(invalid(format!("{name} region contains fewer than two interior nodes; refine the mesh")));
        }
        Ok(mask)
    }

    /// Gram matrix of the discrete Dirichlet form `∫|∇u|²`.
    pub fn stiffness(&self) -> DMatrix<f64> {
        let t = |n: usize| {
            DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
                0 => 2.0,
                1 => -1.0,
                _ => 0.0,
            })
        };
        if self.dim() == 1 {
            return t(self.nodes[0]) / self.spacing[0];
        }
        let (nx, ny) = (self.nodes[0], self.nodes[1]);
        let (hx, hy) = (self.spacing[0], self.spacing[1]);
        DMatrix::identity(ny, ny).kronecker(&t(nx)) * (hy / hx) + t(ny).kronecker(&DMatrix::identity(nx, nx)) * (hx / hy)
    }

    /// Rows of the cell-centred divergence of a `dim`-component field (components interleaved per node),
    /// scaled so that `‖D u‖²` approximates `∫|div u|²`.
    pub fn divergence(&self) -> DMatrix<f64> {
        let d = self.dim();
        if d == 1 {
            let n = self.nodes[0];
            let h = self.spacing[0];
            let mut m = DMatrix::zeros(n + 1, n);
            for c in 0..=n {
                if c < n {
                    m[(c, c)] += 1.0 / h.sqrt();
                }
                if c > 0 {
                    m[(c, c - 1)] -= 1.0 / h.sqrt();
                }
            }
            return m;
        }
        let (nx, ny) = (self.nodes[0], self.nodes[1]);
        let (hx, hy) = (self.spacing[0], self.spacing[1]);
        let w = (hx * hy).sqrt();
        let mut m = DMatrix::zeros((nx + 1) * (ny + 1), 2 * nx * ny);
        // Cell (cx, cy) has corner nodes at grid indices cx..=cx+1, cy..=cy+1 (boundary nodes are zero).
        let node = |ix: usize, iy: usize| -> Option<usize> {
            (ix >= 1 && ix <= nx && iy >= 1 && iy <= ny).then(|| (iy - 1) * nx + (ix - 1))
        };
        for cy in 0..=ny {
            for cx in 0..=nx {
                let row = cy * (nx + 1) + cx;
                let corners = [(cx, cy, -1.0, -1.0), (cx + 1, cy, 1.0, -1.0), (cx, cy + 1, -1.0, 1.0), (cx + 1, cy + 1, 1.0, 1.0)];
                for (ix, iy, sx, sy) in corners {
                    if let Some(j) = node(ix, iy) {
                        m[(row, 2 * j)] += w * sx / (2.0 * hx);
                        m[(row, 2 * j + 1)] += w * sy / (2.0 * hy);
                    }
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn stiffness_integrates_gradient_of_linear_hat() {
        // u = x(1-x) sampled on the interior; ∫u'² = 1/3, discrete form is second-order accurate
        let mesh = Mesh::new(&[1.0], &[99]).unwrap();
        let u = DVector::from_fn(99, |i, _| {
            let x = mesh.coords(i)[0];
            x * (1.0 - x)
        });
        let e = (u.transpose() * mesh.stiffness() * &u)[0];
        assert!((e - 1.0 / 3.0).abs() < 1e-4);
    }

    #[test]
    fn divergence_in_one_dimension_matches_stiffness() {
        let mesh = Mesh::new(&[2.0], &[7]).unwrap();
        let d = mesh.divergence();
        assert!((d.transpose() * d - mesh.stiffness()).amax() < 1e-12);
    }

    #[test]
    fn two_dimensional_stiffness_of_product_mode() {
        let mesh = Mesh::new(&[1.0, 1.0], &[40, 40]).unwrap();
        let pi = std::f64::consts::PI;
        let u = DVector::from_fn(1600, |i, _| {
            let c = mesh.coords(i);
            (pi * c[0]).sin() * (pi * c[1]).sin()
        });
        let e = (u.transpose() * mesh.stiffness() * &u)[0];
        // ∫|∇u|² = π²/2
        assert!((e / (pi * pi / 2.0) - 1.0).abs() < 2e-3);
    }

    #[test]
    fn regions_must_be_resolved() {
        let mesh = Mesh::new(&[1.0], &[9]).unwrap();
        assert_eq!(mesh.mask(&Region::interval(0.2, 0.4), "damping").unwrap().iter().filter(|m| **m).count(), 3);
        assert!(mesh.mask(&Region::interval(0.41, 0.49), "damping").is_err());
        assert!(mesh.mask(&Region::interval(0.5, 1.2), "damping").is_err());
    }
}
