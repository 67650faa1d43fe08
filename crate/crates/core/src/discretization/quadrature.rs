use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use super::mesh::{Grid, SpatialMesh};
use crate::error::{Error, Result};
use crate::problem::{Face, Point};

/// Index of the element bubble in basis arrays. Nodal functions occupy
/// indices 0..nodes_per_element.
pub const BUBBLE: usize = 4;

/// Gauss–Legendre rule mapped to [0,1]; weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule, exact for polynomials of degree 2n−1.
    pub fn new(n: usize) -> Result<Self> {
        let n = NonZeroUsize::new(n)
            .ok_or_else(|| Error::InvalidParameter("quadrature order must be at least 1".into()))?;
        if n.get() == 1 {
            return Ok(Self {
                nodes: vec![0.5],
                weights: vec![1.0],
            });
        }
        let rule = GaussLegendre::new(n);
        let mut pairs: Vec<(f64, f64)> = rule
            .as_node_weight_pairs()
            .into_iter()
            .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Nodal shape functions, their bubble and physical gradients at one
/// reference point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisAt {
    pub xi: [f64; 2],
    /// Reference weight (weights of a rule sum to 1).
    pub weight: f64,
    pub phi: [f64; 5],
    pub dphi: [[f64; 2]; 5],
}

impl BasisAt {
    pub fn new(dim: usize, xi: [f64; 2], weight: f64, h: [f64; 2]) -> Self {
        let mut phi = [0.0; 5];
        let mut dphi = [[0.0; 2]; 5];
        if dim == 1 {
            let x = xi[0];
            phi[0] = 1.0 - x;
            phi[1] = x;
            dphi[0] = [-1.0 / h[0], 0.0];
            dphi[1] = [1.0 / h[0], 0.0];
            phi[BUBBLE] = 4.0 * x * (1.0 - x);
            dphi[BUBBLE] = [4.0 * (1.0 - 2.0 * x) / h[0], 0.0];
        } else {
            let (x, y) = (xi[0], xi[1]);
            let lx = [1.0 - x, x];
            let ly = [1.0 - y, y];
            let dlx = [-1.0 / h[0], 1.0 / h[0]];
            let dly = [-1.0 / h[1], 1.0 / h[1]];
            for b in 0..2 {
                for a in 0..2 {
                    let i = a + 2 * b;
                    phi[i] = lx[a] * ly[b];
                    dphi[i] = [dlx[a] * ly[b], lx[a] * dly[b]];
                }
            }
            let bx = x * (1.0 - x);
            let by = y * (1.0 - y);
            phi[BUBBLE] = 16.0 * bx * by;
            dphi[BUBBLE] = [
                16.0 * (1.0 - 2.0 * x) * by / h[0],
                16.0 * bx * (1.0 - 2.0 * y) / h[1],
            ];
        }
        Self {
            xi,
            weight,
            phi,
            dphi,
        }
    }

    /// Σ cᵢ φᵢ over the listed local indices.
    #[inline]
    pub fn value(&self, local: &[(usize, f64)]) -> f64 {
        local.iter().map(|&(i, c)| c * self.phi[i]).sum()
    }
}

/// Tensor Gauss rule on the reference element with basis tables. The mesh
/// is uniform, so one table serves every element.
#[derive(Debug, Clone)]
pub struct ElementTable {
    pub dim: usize,
    pub nb: usize,
    pub volume: f64,
    pub points: Vec<BasisAt>,
}

impl ElementTable {
    pub fn new(mesh: &SpatialMesh, n: usize) -> Result<Self> {
        let g = GaussRule::new(n)?;
        let dim = mesh.dim();
        let h = mesh.h();
        let mut points = Vec::new();
        if dim == 1 {
            for (x, w) in g.nodes.iter().zip(&g.weights) {
                points.push(BasisAt::new(1, [*x, 0.0], *w, h));
            }
        } else {
            for (y, wy) in g.nodes.iter().zip(&g.weights) {
                for (x, wx) in g.nodes.iter().zip(&g.weights) {
                    points.push(BasisAt::new(2, [*x, *y], wx * wy, h));
                }
            }
        }
        Ok(Self {
            dim,
            nb: mesh.nodes_per_element(),
            volume: mesh.element_volume(),
            points,
        })
    }
}

/// Quadrature points on one face: element, basis at the point and the
/// physical surface weight.
pub fn face_points(mesh: &SpatialMesh, face: Face, n: usize) -> Result<Vec<(usize, BasisAt)>> {
    let dim = mesh.dim();
    let h = mesh.h();
    let upper = if face.is_upper() { 1.0 } else { 0.0 };
    let mut out = Vec::new();
    for e in mesh.face_elements(face) {
        if dim == 1 {
            out.push((e, BasisAt::new(1, [upper, 0.0], 1.0, h)));
        } else {
            let g = GaussRule::new(n)?;
            let along = 1 - face.axis();
            for (s, w) in g.nodes.iter().zip(&g.weights) {
                let mut xi = [0.0; 2];
                xi[face.axis()] = upper;
                xi[along] = *s;
                out.push((e, BasisAt::new(2, xi, w * h[along], h)));
            }
        }
    }
    Ok(out)
}

/// Space and time rules used on a slab.
#[derive(Debug, Clone)]
pub struct SlabRule {
    pub space: ElementTable,
    pub time: GaussRule,
}

impl SlabRule {
    pub fn new(mesh: &SpatialMesh, space_points: usize, time_points: usize) -> Result<Self> {
        Ok(Self {
            space: ElementTable::new(mesh, space_points)?,
            time: GaussRule::new(time_points)?,
        })
    }
}

/// A space-time quadrature point on slab `slab`: `s ∈ [0,1]` is the
/// relative position in the slab and `weight` the physical weight.
#[derive(Debug, Clone, Copy)]
pub struct QuadPoint<'a> {
    pub x: Point,
    pub t: f64,
    pub elem: usize,
    pub slab: usize,
    pub s: f64,
    pub tau: f64,
    pub weight: f64,
    pub basis: &'a BasisAt,
}

/// Visits every quadrature point of element `e` on slab `k`.
pub fn for_each_element_point<'a>(
    grid: &Grid,
    rule: &'a SlabRule,
    k: usize,
    e: usize,
    mut f: impl FnMut(&QuadPoint<'a>),
) {
    let t0 = grid.time.t(k);
    let tau = grid.time.tau(k);
    let vol = rule.space.volume;
    for (s, ws) in rule.time.nodes.iter().zip(&rule.time.weights) {
        let t = t0 + s * tau;
        for b in &rule.space.points {
            f(&QuadPoint {
                x: grid.mesh.map(e, &b.xi),
                t,
                elem: e,
                slab: k,
                s: *s,
                tau,
                weight: ws * tau * b.weight * vol,
                basis: b,
            });
        }
    }
}

/// Visits the spatial quadrature points of every element at time level `k`
/// (the point is attributed to slab `k` with s = 0, or to slab k−1 with
/// s = 1 at the final level).
pub fn for_each_level_point<'a>(
    grid: &Grid,
    table: &'a ElementTable,
    k: usize,
    mut f: impl FnMut(&QuadPoint<'a>),
) {
    let (slab, s) = if k < grid.time.n_slabs() {
        (k, 0.0)
    } else {
        (k - 1, 1.0)
    };
    let t = grid.time.t(k);
    let tau = grid.time.tau(slab);
    for e in 0..grid.mesh.n_elements() {
        for b in &table.points {
            f(&QuadPoint {
                x: grid.mesh.map(e, &b.xi),
                t,
                elem: e,
                slab,
                s,
                tau,
                weight: b.weight * table.volume,
                basis: b,
            });
        }
    }
}

/// ∫ over the slab Ω×(t^k, t^{k+1}) by tensor Gauss–Legendre quadrature
/// with `space_points` per direction in space and `time_points` in time.
pub fn slab_integral(
    integrand: impl Fn(&QuadPoint) -> f64,
    grid: &Grid,
    slab: usize,
    space_points: usize,
    time_points: usize,
) -> Result<f64> {
    if slab >= grid.time.n_slabs() {
        return Err(Error::InvalidParameter(format!("slab {slab} out of range")));
    }
    let rule = SlabRule::new(&grid.mesh, space_points, time_points)?;
    let mut sum = 0.0;
    for e in 0..grid.mesh.n_elements() {
        for_each_element_point(grid, &rule, slab, e, |p| sum += p.weight * integrand(p));
    }
    Ok(sum)
}
