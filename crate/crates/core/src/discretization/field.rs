use super::mesh::Grid;
use super::quadrature::{BasisAt, QuadPoint};
use crate::error::{Error, Result};
use crate::problem::{ExactSolution, Point, ScalarFn, Vector};

/// Something that can be sampled at space-time quadrature points:
/// value, spatial gradient and time derivative.
pub trait SpaceTimeFunction: Sync {
    fn eval(&self, p: &QuadPoint) -> (f64, Vector, f64);
}

/// A vector field with divergence, sampled at quadrature points.
pub trait FluxFunction: Sync {
    fn eval_flux(&self, p: &QuadPoint) -> (Vector, f64);
}

/// Piecewise linear (1D) or bilinear (2D) in space, linear in time on each
/// slab: v = v^k (t^{k+1}−t)/τ + v^{k+1} (t−t^k)/τ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub levels: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid, levels: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.mesh.n_nodes();
        if levels.len() != grid.time.n_slabs() + 1 {
            return Err(Error::SizeMismatch(format!(
                "{} levels for {} slabs",
                levels.len(),
                grid.time.n_slabs()
            )));
        }
        if let Some(l) = levels.iter().find(|l| l.len() != n) {
            return Err(Error::SizeMismatch(format!(
                "level has {} coefficients, mesh has {n} nodes",
                l.len()
            )));
        }
        Ok(Self { grid, levels })
    }

    pub fn zeros(grid: Grid) -> Self {
        let levels = vec![vec![0.0; grid.mesh.n_nodes()]; grid.time.n_slabs() + 1];
        Self { grid, levels }
    }

    /// Nodal interpolant of f at every level; Dirichlet nodes are set to 0.
    pub fn interpolate(grid: Grid, f: &ScalarFn) -> Self {
        let mask = grid.mesh.dirichlet_mask();
        let levels = grid
            .time
            .levels()
            .iter()
            .map(|&t| {
                (0..grid.mesh.n_nodes())
                    .map(|n| if mask[n] { 0.0 } else { f(&grid.mesh.node_coords(n), t) })
                    .collect()
            })
            .collect();
        Self { grid, levels }
    }

    pub fn level(&self, k: usize) -> &[f64] {
        &self.levels[k]
    }

    /// Value and gradient of level `k` at a reference point of element `e`.
    #[inline]
    pub fn level_at(&self, k: usize, e: usize, b: &BasisAt) -> (f64, Vector) {
        level_value(&self.grid, &self.levels[k], e, b)
    }

    /// Pointwise evaluation at an arbitrary (x, t).
    pub fn value_at(&self, x: &Point, t: f64) -> f64 {
        let (e, xi) = self.grid.mesh.locate(x);
        let b = BasisAt::new(self.grid.mesh.dim(), xi, 1.0, self.grid.mesh.h());
        let lv = self.grid.time.levels();
        let k = match lv.iter().position(|&tk| tk > t) {
            Some(0) => 0,
            Some(i) => i - 1,
            None => lv.len() - 2,
        };
        let s = ((t - lv[k]) / (lv[k + 1] - lv[k])).clamp(0.0, 1.0);
        let (a, _) = self.level_at(k, e, &b);
        let (c, _) = self.level_at(k + 1, e, &b);
        (1.0 - s) * a + s * c
    }
}

/// Value and gradient of a nodal coefficient vector at a reference point.
#[inline]
pub fn level_value(grid: &Grid, coeffs: &[f64], e: usize, b: &BasisAt) -> (f64, Vector) {
    let nodes = grid.mesh.element_nodes(e);
    let nb = grid.mesh.nodes_per_element();
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for i in 0..nb {
        let c = coeffs[nodes[i]];
        v += c * b.phi[i];
        g[0] += c * b.dphi[i][0];
        g[1] += c * b.dphi[i][1];
    }
    (v, g)
}

impl SpaceTimeFunction for SpaceTimeField {
    fn eval(&self, p: &QuadPoint) -> (f64, Vector, f64) {
        let (a, ga) = self.level_at(p.slab, p.elem, p.basis);
        let (b, gb) = self.level_at(p.slab + 1, p.elem, p.basis);
        let s = p.s;
        (
            (1.0 - s) * a + s * b,
            [(1.0 - s) * ga[0] + s * gb[0], (1.0 - s) * ga[1] + s * gb[1]],
            (b - a) / p.tau,
        )
    }
}

/// The exact solution used directly as an approximation.
pub struct Analytic<'a>(pub &'a ExactSolution);

impl SpaceTimeFunction for Analytic<'_> {
    fn eval(&self, p: &QuadPoint) -> (f64, Vector, f64) {
        (self.0.u(&p.x, p.t), self.0.grad(&p.x, p.t), (self.0.u_t)(&p.x, p.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_space_time_grid;
    use crate::problem::{preset_problem, scalar_fn, PresetId};

    #[test]
    fn interpolant_reproduces_bilinear_data() {
        let (spec, _) = preset_problem(PresetId::Ex4).unwrap();
        let grid = build_space_time_grid(&spec, &[4, 4], 2).unwrap();
        let f = scalar_fn(|x, t| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]) * (1.0 + t));
        let v = SpaceTimeField::interpolate(grid.clone(), &f);
        // Bilinear interpolation is exact at nodes and linear in time between levels.
        let x = [0.25, 0.5];
        assert!((v.value_at(&x, 0.25) - f(&x, 0.25)).abs() < 1e-14);
        assert!(SpaceTimeField::new(grid, vec![vec![0.0; 3]]).is_err());
    }
}
