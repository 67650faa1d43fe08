use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{BoundaryKind, BoxDomain, Face, Point, ProblemSpec};

/// Uniform tensor mesh of a box: intervals in 1D, axis-aligned
/// quadrilaterals in 2D.
///
/// Nodes are numbered x-fastest: node (i, j) has index i + j·(N₁+1).
/// Element (i, j) has index i + j·N₁ and local nodes ordered
/// (0,0), (1,0), (0,1), (1,1) in reference coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMesh {
    domain: BoxDomain,
    cells: [usize; 2],
    h: [f64; 2],
}

impl SpatialMesh {
    pub fn new(domain: &BoxDomain, cells: &[usize]) -> Result<Self> {
        let d = domain.dim;
        if cells.len() != d {
            return Err(Error::InvalidParameter(format!(
                "expected {d} cell counts, got {}",
                cells.len()
            )));
        }
        if cells.iter().any(|&c| c == 0) {
            return Err(Error::InvalidParameter("cell counts must be at least 1".into()));
        }
        let mut c = [1usize, 1];
        let mut h = [1.0, 1.0];
        for a in 0..d {
            c[a] = cells[a];
            h[a] = domain.lengths[a] / cells[a] as f64;
        }
        Ok(Self {
            domain: domain.clone(),
            cells: c,
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells[..self.dim()]
    }

    pub fn h(&self) -> [f64; 2] {
        self.h
    }

    pub fn nodes_per_axis(&self) -> [usize; 2] {
        if self.dim() == 1 {
            [self.cells[0] + 1, 1]
        } else {
            [self.cells[0] + 1, self.cells[1] + 1]
        }
    }

    pub fn n_nodes(&self) -> usize {
        let n = self.nodes_per_axis();
        n[0] * n[1]
    }

    pub fn n_elements(&self) -> usize {
        if self.dim() == 1 {
            self.cells[0]
        } else {
            self.cells[0] * self.cells[1]
        }
    }

    /// 2 in 1D, 4 in 2D.
    pub fn nodes_per_element(&self) -> usize {
        1 << self.dim()
    }

    pub fn element_volume(&self) -> f64 {
        if self.dim() == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    pub fn node_ij(&self, n: usize) -> [usize; 2] {
        let nx = self.nodes_per_axis()[0];
        [n % nx, n / nx]
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * self.nodes_per_axis()[0]
    }

    pub fn node_coords(&self, n: usize) -> Point {
        let [i, j] = self.node_ij(n);
        if self.dim() == 1 {
            [i as f64 * self.h[0], 0.0]
        } else {
            [i as f64 * self.h[0], j as f64 * self.h[1]]
        }
    }

    pub fn element_ij(&self, e: usize) -> [usize; 2] {
        [e % self.cells[0], e / self.cells[0]]
    }

    pub fn element_origin(&self, e: usize) -> Point {
        let [i, j] = self.element_ij(e);
        if self.dim() == 1 {
            [i as f64 * self.h[0], 0.0]
        } else {
            [i as f64 * self.h[0], j as f64 * self.h[1]]
        }
    }

    /// Global indices of the element's nodes; only the first
    /// `nodes_per_element()` entries are meaningful.
    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let [i, j] = self.element_ij(e);
        if self.dim() == 1 {
            [i, i + 1, 0, 0]
        } else {
            let n0 = self.node_index(i, j);
            let nx = self.nodes_per_axis()[0];
            [n0, n0 + 1, n0 + nx, n0 + nx + 1]
        }
    }

    /// Maps reference coordinates ξ ∈ [0,1]^d of element `e` to physical space.
    pub fn map(&self, e: usize, xi: &[f64; 2]) -> Point {
        let o = self.element_origin(e);
        if self.dim() == 1 {
            [o[0] + xi[0] * self.h[0], 0.0]
        } else {
            [o[0] + xi[0] * self.h[0], o[1] + xi[1] * self.h[1]]
        }
    }

    /// Element containing `x` and the reference coordinates of `x` in it.
    pub fn locate(&self, x: &Point) -> (usize, [f64; 2]) {
        let mut ij = [0usize; 2];
        let mut xi = [0.0; 2];
        for a in 0..self.dim() {
            let r = (x[a] / self.h[a]).clamp(0.0, self.cells[a] as f64);
            let c = (r.floor() as usize).min(self.cells[a] - 1);
            ij[a] = c;
            xi[a] = r - c as f64;
        }
        (ij[0] + ij[1] * self.cells[0], xi)
    }

    /// Faces the node lies on.
    pub fn node_faces(&self, n: usize) -> Vec<Face> {
        let [i, j] = self.node_ij(n);
        let mut out = Vec::new();
        if i == 0 {
            out.push(Face::Left);
        }
        if i == self.cells[0] {
            out.push(Face::Right);
        }
        if self.dim() == 2 {
            if j == 0 {
                out.push(Face::Bottom);
            }
            if j == self.cells[1] {
                out.push(Face::Top);
            }
        }
        out
    }

    /// Boundary tag of a node; nodes shared by a Dirichlet and a Neumann
    /// face are Dirichlet.
    pub fn node_boundary(&self, n: usize) -> Option<BoundaryKind> {
        let faces = self.node_faces(n);
        if faces.is_empty() {
            return None;
        }
        if faces
            .iter()
            .any(|&f| self.domain.kind(f) == BoundaryKind::Dirichlet)
        {
            Some(BoundaryKind::Dirichlet)
        } else {
            Some(BoundaryKind::Neumann)
        }
    }

    pub fn dirichlet_mask(&self) -> Vec<bool> {
        (0..self.n_nodes())
            .map(|n| self.node_boundary(n) == Some(BoundaryKind::Dirichlet))
            .collect()
    }

    /// Nodes lying on a face (including corners).
    pub fn face_nodes(&self, face: Face) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&n| self.node_faces(n).contains(&face))
            .collect()
    }

    /// Elements with a side on `face`.
    pub fn face_elements(&self, face: Face) -> Vec<usize> {
        (0..self.n_elements())
            .filter(|&e| {
                let [i, j] = self.element_ij(e);
                match face {
                    Face::Left => i == 0,
                    Face::Right => i + 1 == self.cells[0],
                    Face::Bottom => self.dim() == 2 && j == 0,
                    Face::Top => self.dim() == 2 && j + 1 == self.cells[1],
                }
            })
            .collect()
    }

    /// Elements touching each node.
    pub fn node_patches(&self) -> Vec<Vec<usize>> {
        let mut patches = vec![Vec::new(); self.n_nodes()];
        let nb = self.nodes_per_element();
        for e in 0..self.n_elements() {
            for &n in &self.element_nodes(e)[..nb] {
                patches[n].push(e);
            }
        }
        patches
    }
}

/// Time levels 0 = t⁰ < … < t^K = T.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    levels: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(t_final: f64, slabs: usize) -> Result<Self> {
        if slabs == 0 {
            return Err(Error::InvalidParameter("slab count must be at least 1".into()));
        }
        if !(t_final > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "final time must be positive, got {t_final}"
            )));
        }
        let levels = (0..=slabs)
            .map(|k| {
                if k == slabs {
                    t_final
                } else {
                    t_final * k as f64 / slabs as f64
                }
            })
            .collect();
        Ok(Self { levels })
    }

    pub fn from_levels(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 || levels[0] != 0.0 || levels.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "time levels must start at 0 and increase strictly".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn n_slabs(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn t(&self, k: usize) -> f64 {
        self.levels[k]
    }

    pub fn tau(&self, k: usize) -> f64 {
        self.levels[k + 1] - self.levels[k]
    }

    pub fn t_final(&self) -> f64 {
        *self.levels.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub mesh: SpatialMesh,
    pub time: TimeGrid,
}

pub fn build_space_time_grid(spec: &ProblemSpec, cells: &[usize], slabs: usize) -> Result<Grid> {
    Ok(Grid {
        mesh: SpatialMesh::new(&spec.domain, cells)?,
        time: TimeGrid::uniform(spec.t_final, slabs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{preset_problem, PresetId};

    #[test]
    fn unit_interval_nodes() {
        let m = SpatialMesh::new(&BoxDomain::unit_interval(), &[4]).unwrap();
        let xs: Vec<f64> = (0..m.n_nodes()).map(|n| m.node_coords(n)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.n_elements(), 4);
    }

    #[test]
    fn square_counts() {
        let m = SpatialMesh::new(&BoxDomain::unit_square(), &[50, 50]).unwrap();
        assert_eq!(m.n_elements(), 2500);
        assert_eq!(m.n_nodes(), 2601);
        let bnd = m.dirichlet_mask().iter().filter(|&&b| b).count();
        assert_eq!(bnd, 4 * 50);
    }

    #[test]
    fn time_grid_levels() {
        let g = TimeGrid::uniform(10.0, 40).unwrap();
        assert_eq!(g.tau(0), 0.25);
        for k in 0..=40 {
            assert!((g.t(k) - k as f64 / 4.0).abs() < 1e-15);
        }
        assert!(TimeGrid::uniform(1.0, 0).is_err());
    }

    #[test]
    fn zero_counts_are_rejected() {
        let (spec, _) = preset_problem(PresetId::Ex4).unwrap();
        assert!(build_space_time_grid(&spec, &[0, 3], 2).is_err());
        assert!(build_space_time_grid(&spec, &[3], 2).is_err());
    }

    #[test]
    fn mixed_corner_is_dirichlet() {
        let mut d = BoxDomain::unit_square();
        d.set_kind(Face::Top, BoundaryKind::Neumann);
        let m = SpatialMesh::new(&d, &[2, 2]).unwrap();
        let top_left = m.node_index(0, 2);
        let top_mid = m.node_index(1, 2);
        assert_eq!(m.node_boundary(top_left), Some(BoundaryKind::Dirichlet));
        assert_eq!(m.node_boundary(top_mid), Some(BoundaryKind::Neumann));
        assert_eq!(m.node_boundary(m.node_index(1, 1)), None);
    }

    #[test]
    fn locate_round_trips_map() {
        let m = SpatialMesh::new(&BoxDomain::unit_square(), &[3, 5]).unwrap();
        for e in 0..m.n_elements() {
            let x = m.map(e, &[0.3, 0.6]);
            let (e2, xi) = m.locate(&x);
            assert_eq!(e, e2);
            assert!((xi[0] - 0.3).abs() < 1e-12 && (xi[1] - 0.6).abs() < 1e-12);
        }
    }
}
