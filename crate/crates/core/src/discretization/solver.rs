use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use super::field::SpaceTimeField;
use super::mesh::{Grid, SpatialMesh};
use super::quadrature::{face_points, ElementTable};
use crate::error::{Error, Result};
use crate::linalg::{csr_mul, Assembler, SpdFactor};
use crate::problem::{BoundaryKind, ProblemSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    BackwardEuler,
    CrankNicolson,
}

/// Maps mesh nodes to unknowns; Dirichlet nodes carry no unknown.
#[derive(Debug, Clone)]
pub struct FreeDofs {
    pub map: Vec<Option<usize>>,
    pub nodes: Vec<usize>,
}

impl FreeDofs {
    pub fn new(mesh: &SpatialMesh) -> Self {
        let mask = mesh.dirichlet_mask();
        let mut map = vec![None; mask.len()];
        let mut nodes = Vec::new();
        for (n, &d) in mask.iter().enumerate() {
            if !d {
                map[n] = Some(nodes.len());
                nodes.push(n);
            }
        }
        Self { map, nodes }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn gather(&self, full: &[f64]) -> Vec<f64> {
        self.nodes.iter().map(|&n| full[n]).collect()
    }

    pub fn scatter(&self, reduced: &[f64], n_nodes: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_nodes];
        for (&n, &v) in self.nodes.iter().zip(reduced) {
            out[n] = v;
        }
        out
    }
}

/// Mass matrix on the free nodes.
pub fn assemble_mass(mesh: &SpatialMesh, table: &ElementTable, free: &FreeDofs) -> CsrMatrix<f64> {
    let nb = mesh.nodes_per_element();
    let mut asm = Assembler::new(free.len());
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        let mut loc = [[0.0; 4]; 4];
        for b in &table.points {
            let w = b.weight * table.volume;
            for i in 0..nb {
                for j in 0..nb {
                    loc[i][j] += w * b.phi[i] * b.phi[j];
                }
            }
        }
        scatter_local(&mut asm, free, &nodes[..nb], &loc);
    }
    asm.into_csr()
}

/// Stiffness (A-weighted) plus reaction (λ-weighted mass) at time t.
pub fn assemble_operator(
    spec: &ProblemSpec,
    mesh: &SpatialMesh,
    table: &ElementTable,
    free: &FreeDofs,
    t: f64,
) -> CsrMatrix<f64> {
    let nb = mesh.nodes_per_element();
    let mut asm = Assembler::new(free.len());
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        let mut loc = [[0.0; 4]; 4];
        for b in &table.points {
            let x = mesh.map(e, &b.xi);
            let w = b.weight * table.volume;
            let lam = spec.reaction(&x, t);
            for j in 0..nb {
                let adj = spec.diffusion.apply(&x, t, &b.dphi[j]);
                for i in 0..nb {
                    loc[i][j] += w
                        * (b.dphi[i][0] * adj[0] + b.dphi[i][1] * adj[1]
                            + lam * b.phi[i] * b.phi[j]);
                }
            }
        }
        scatter_local(&mut asm, free, &nodes[..nb], &loc);
    }
    asm.into_csr()
}

/// ∫ f φᵢ + ∫_{Γ_N} g φᵢ at time t, on the free nodes.
pub fn assemble_load(
    spec: &ProblemSpec,
    mesh: &SpatialMesh,
    table: &ElementTable,
    free: &FreeDofs,
    t: f64,
    face_order: usize,
) -> Result<Vec<f64>> {
    let nb = mesh.nodes_per_element();
    let mut out = vec![0.0; free.len()];
    for e in 0..mesh.n_elements() {
        let nodes = mesh.element_nodes(e);
        for b in &table.points {
            let x = mesh.map(e, &b.xi);
            let w = b.weight * table.volume * spec.source(&x, t);
            for i in 0..nb {
                if let Some(r) = free.map[nodes[i]] {
                    out[r] += w * b.phi[i];
                }
            }
        }
    }
    for &face in mesh.domain().faces() {
        if mesh.domain().kind(face) != BoundaryKind::Neumann {
            continue;
        }
        for (e, b) in face_points(mesh, face, face_order)? {
            let nodes = mesh.element_nodes(e);
            let x = mesh.map(e, &b.xi);
            let g = (spec.neumann)(&x, t);
            for i in 0..nb {
                if let Some(r) = free.map[nodes[i]] {
                    out[r] += b.weight * g * b.phi[i];
                }
            }
        }
    }
    Ok(out)
}

fn scatter_local(asm: &mut Assembler, free: &FreeDofs, nodes: &[usize], loc: &[[f64; 4]; 4]) {
    for (i, &ni) in nodes.iter().enumerate() {
        let Some(r) = free.map[ni] else { continue };
        for (j, &nj) in nodes.iter().enumerate() {
            if let Some(c) = free.map[nj] {
                asm.add(r, c, loc[i][j]);
            }
        }
    }
}

pub fn solve_parabolic(spec: &ProblemSpec, grid: &Grid, scheme: Scheme) -> Result<SpaceTimeField> {
    solve_parabolic_with(spec, grid, scheme, 3)
}

/// θ-scheme time stepping with Gauss quadrature of `quad_points` per
/// direction for assembly. v⁰ is the nodal interpolant of φ.
pub fn solve_parabolic_with(
    spec: &ProblemSpec,
    grid: &Grid,
    scheme: Scheme,
    quad_points: usize,
) -> Result<SpaceTimeField> {
    if grid.mesh.domain() != &spec.domain {
        return Err(Error::InvalidParameter("mesh does not match the problem domain".into()));
    }
    let mesh = &grid.mesh;
    let table = ElementTable::new(mesh, quad_points)?;
    let free = FreeDofs::new(mesh);
    let n_nodes = mesh.n_nodes();
    let mut levels = Vec::with_capacity(grid.time.n_slabs() + 1);
    let v0 = SpaceTimeField::interpolate(
        Grid {
            mesh: mesh.clone(),
            time: crate::discretization::TimeGrid::uniform(spec.t_final, 1)?,
        },
        &spec.initial,
    );
    levels.push(v0.levels[0].clone());
    if free.is_empty() {
        for _ in 0..grid.time.n_slabs() {
            levels.push(vec![0.0; n_nodes]);
        }
        return SpaceTimeField::new(grid.clone(), levels);
    }

    let mass = assemble_mass(mesh, &table, &free);
    let constant = !spec.diffusion.is_time_dependent() && !spec.reaction_time_dependent;
    let op_at = |t: f64| assemble_operator(spec, mesh, &table, &free, t);
    let load_at = |t: f64| assemble_load(spec, mesh, &table, &free, t, quad_points);
    let theta = match scheme {
        Scheme::BackwardEuler => 1.0,
        Scheme::CrankNicolson => 0.5,
    };

    let op_const = if constant { Some(op_at(0.0)) } else { None };
    let mut cached: Option<(f64, SpdFactor)> = None;
    let mut cur = free.gather(&levels[0]);
    let mut load_prev = load_at(grid.time.t(0))?;
    for k in 0..grid.time.n_slabs() {
        let tau = grid.time.tau(k);
        let (t0, t1) = (grid.time.t(k), grid.time.t(k + 1));
        let op1 = match &op_const {
            Some(op) => op.clone(),
            None => op_at(t1),
        };
        let load_next = load_at(t1)?;
        let mut rhs = csr_mul(&mass, &cur);
        for (r, (f0, f1)) in rhs.iter_mut().zip(load_prev.iter().zip(&load_next)) {
            *r += tau * ((1.0 - theta) * f0 + theta * f1);
        }
        if theta < 1.0 {
            let op0 = match &op_const {
                Some(op) => op.clone(),
                None => op_at(t0),
            };
            let a0 = csr_mul(&op0, &cur);
            for (r, a) in rhs.iter_mut().zip(a0) {
                *r -= tau * (1.0 - theta) * a;
            }
        }
        let reuse = constant
            && cached
                .as_ref()
                .is_some_and(|(t, _)| (t - tau).abs() <= 1e-14 * tau);
        if !reuse {
            let lhs = &mass + &(op1 * (theta * tau));
            cached = Some((tau, SpdFactor::new(&lhs)?));
        }
        cur = cached.as_ref().unwrap().1.solve(&rhs)?;
        levels.push(free.scatter(&cur, n_nodes));
        load_prev = load_next;
    }
    SpaceTimeField::new(grid.clone(), levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_space_time_grid;
    use crate::problem::{preset_problem, zero_fn, PresetId};

    #[test]
    fn zero_data_gives_zero_solution() {
        let (spec, _) = preset_problem(PresetId::Trivial).unwrap();
        let grid = build_space_time_grid(&spec, &[8], 4).unwrap();
        for scheme in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
            let v = solve_parabolic(&spec, &grid, scheme).unwrap();
            assert!(v.levels.iter().flatten().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn single_cell_dirichlet_mesh_has_no_unknowns() {
        let (spec, _) = preset_problem(PresetId::Ex1).unwrap();
        let grid = build_space_time_grid(&spec, &[1], 3).unwrap();
        let v = solve_parabolic(&spec, &grid, Scheme::BackwardEuler).unwrap();
        assert_eq!(FreeDofs::new(&grid.mesh).len(), 0);
        assert!(v.levels.iter().flatten().all(|&c| c == 0.0));
    }

    #[test]
    fn backward_euler_dissipates_without_forcing() {
        let (mut spec, _) = preset_problem(PresetId::Ex2 { rho: 1.0 }).unwrap();
        spec.source = zero_fn();
        let grid = build_space_time_grid(&spec, &[16], 20).unwrap();
        let v = solve_parabolic(&spec, &grid, Scheme::BackwardEuler).unwrap();
        let table = ElementTable::new(&grid.mesh, 3).unwrap();
        let free = FreeDofs::new(&grid.mesh);
        let m = assemble_mass(&grid.mesh, &table, &free);
        let norms: Vec<f64> = v
            .levels
            .iter()
            .map(|l| {
                let r = free.gather(l);
                csr_mul(&m, &r).iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        for w in norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }
}
