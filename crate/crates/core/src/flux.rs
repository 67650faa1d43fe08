//! Flux reconstruction: nodal averaging of A∇v, slab-wise minimization of
//! the majorant over continuous nodal vector fields, and element-bubble
//! enrichment.

use nalgebra::DMatrix;
use nalgebra_sparse::CsrMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::field::{FluxFunction, SpaceTimeField};
use crate::discretization::mesh::Grid;
use crate::discretization::quadrature::{
    for_each_element_point, BasisAt, ElementTable, QuadPoint, SlabRule, BUBBLE,
};
use crate::error::{Error, Result};
use crate::linalg::{solve_dense_spd, Assembler, SpdFactor};
use crate::majorant::{
    collect_samples, data_residual, evaluate_slab, neumann_points, residual_weight, Approximation,
    MajorantParams, MajorantSlab, MuMode,
};
use crate::problem::{BoundaryKind, EmbeddingConstants, ExactSolution, ProblemSpec, Vector};

/// One time level of a flux: a vector per node and, optionally, a vector of
/// bubble coefficients per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxLevel {
    pub nodal: Vec<[f64; 2]>,
    pub bubble: Option<Vec<[f64; 2]>>,
}

impl FluxLevel {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            nodal: vec![[0.0; 2]; grid.mesh.n_nodes()],
            bubble: None,
        }
    }

    /// Value and divergence at a reference point of element `e`.
    #[inline]
    pub fn eval(&self, grid: &Grid, e: usize, b: &BasisAt) -> (Vector, f64) {
        let nodes = grid.mesh.element_nodes(e);
        let nb = grid.mesh.nodes_per_element();
        let mut y = [0.0; 2];
        let mut div = 0.0;
        for i in 0..nb {
            let c = self.nodal[nodes[i]];
            y[0] += c[0] * b.phi[i];
            y[1] += c[1] * b.phi[i];
            div += c[0] * b.dphi[i][0] + c[1] * b.dphi[i][1];
        }
        if let Some(bub) = &self.bubble {
            let c = bub[e];
            y[0] += c[0] * b.phi[BUBBLE];
            y[1] += c[1] * b.phi[BUBBLE];
            div += c[0] * b.dphi[BUBBLE][0] + c[1] * b.dphi[BUBBLE][1];
        }
        (y, div)
    }
}

/// A flux stored per slab as (start, end) levels, linear in time inside the
/// slab. Adjacent slabs need not agree at the shared level.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub grid: Grid,
    pub slabs: Vec<(FluxLevel, FluxLevel)>,
}

impl FluxField {
    pub fn new(grid: Grid, slabs: Vec<(FluxLevel, FluxLevel)>) -> Result<Self> {
        if slabs.len() != grid.time.n_slabs() {
            return Err(Error::SizeMismatch(format!(
                "{} flux slabs for {} time slabs",
                slabs.len(),
                grid.time.n_slabs()
            )));
        }
        let (nn, ne) = (grid.mesh.n_nodes(), grid.mesh.n_elements());
        for l in slabs.iter().flat_map(|(a, b)| [a, b]) {
            if l.nodal.len() != nn || l.bubble.as_ref().is_some_and(|b| b.len() != ne) {
                return Err(Error::SizeMismatch("flux level does not match the mesh".into()));
            }
        }
        Ok(Self { grid, slabs })
    }

    /// Continuous in time: slab k uses levels k and k+1.
    pub fn from_levels(grid: Grid, levels: Vec<FluxLevel>) -> Result<Self> {
        if levels.len() != grid.time.n_slabs() + 1 {
            return Err(Error::SizeMismatch(format!(
                "{} flux levels for {} slabs",
                levels.len(),
                grid.time.n_slabs()
            )));
        }
        let slabs = levels.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect();
        Self::new(grid, slabs)
    }

    /// Value and divergence of the start (`side` 0) or end (`side` 1) level
    /// of slab `k`.
    #[inline]
    pub fn slab_level(&self, k: usize, side: usize, e: usize, b: &BasisAt) -> (Vector, f64) {
        let lvl = if side == 0 { &self.slabs[k].0 } else { &self.slabs[k].1 };
        lvl.eval(&self.grid, e, b)
    }

    pub fn has_bubbles(&self) -> bool {
        self.slabs
            .iter()
            .any(|(a, b)| a.bubble.is_some() || b.bubble.is_some())
    }
}

#[inline]
fn lerp_pair(grid: &Grid, pair: &(FluxLevel, FluxLevel), p: &QuadPoint) -> (Vector, f64) {
    let (a, da) = pair.0.eval(grid, p.elem, p.basis);
    let (b, db) = pair.1.eval(grid, p.elem, p.basis);
    let s = p.s;
    (
        [(1.0 - s) * a[0] + s * b[0], (1.0 - s) * a[1] + s * b[1]],
        (1.0 - s) * da + s * db,
    )
}

impl FluxFunction for FluxField {
    fn eval_flux(&self, p: &QuadPoint) -> (Vector, f64) {
        lerp_pair(&self.grid, &self.slabs[p.slab], p)
    }
}

/// A single slab's level pair seen as a flux; only valid on that slab.
struct SlabView<'a> {
    grid: &'a Grid,
    pair: &'a (FluxLevel, FluxLevel),
}

impl FluxFunction for SlabView<'_> {
    fn eval_flux(&self, p: &QuadPoint) -> (Vector, f64) {
        lerp_pair(self.grid, self.pair, p)
    }
}

/// y = A∇u with div y = u_t + λu − f taken from the equation.
pub struct AnalyticFlux<'a> {
    pub spec: &'a ProblemSpec,
    pub exact: &'a ExactSolution,
}

impl FluxFunction for AnalyticFlux<'_> {
    fn eval_flux(&self, p: &QuadPoint) -> (Vector, f64) {
        let g = self.exact.grad(&p.x, p.t);
        let y = self.spec.diffusion.apply(&p.x, p.t, &g);
        (y, (self.exact.div_flux)(&p.x, p.t))
    }
}

/// Neumann constraints of a node: (axis, outward sign) for every Neumann
/// face the node lies on.
fn neumann_constraints(grid: &Grid, n: usize) -> Vec<(usize, f64)> {
    let dom = grid.mesh.domain();
    grid.mesh
        .node_faces(n)
        .into_iter()
        .filter(|&f| dom.kind(f) == BoundaryKind::Neumann)
        .map(|f| (f.axis(), f.outward_normal()[f.axis()]))
        .collect()
}

/// Nodal average of A∇v at every level: y(node) = Σ∫_e A∇v / Σ|e| over the
/// elements sharing the node. On Neumann faces the normal component is set
/// so that y·n = g at the node.
pub fn patch_average_flux(v: &SpaceTimeField, spec: &ProblemSpec, space_points: usize) -> Result<FluxField> {
    let grid = &v.grid;
    let mesh = &grid.mesh;
    let table = ElementTable::new(mesh, space_points)?;
    let patches = mesh.node_patches();
    let constraints: Vec<_> = (0..mesh.n_nodes()).map(|n| neumann_constraints(grid, n)).collect();
    let levels: Vec<FluxLevel> = grid
        .time
        .levels()
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let elem: Vec<[f64; 2]> = (0..mesh.n_elements())
                .map(|e| {
                    let mut acc = [0.0; 2];
                    for b in &table.points {
                        let x = mesh.map(e, &b.xi);
                        let (_, g) = v.level_at(k, e, b);
                        let ag = spec.diffusion.apply(&x, t, &g);
                        acc[0] += b.weight * ag[0];
                        acc[1] += b.weight * ag[1];
                    }
                    acc
                })
                .collect();
            let nodal = (0..mesh.n_nodes())
                .map(|n| {
                    let p = &patches[n];
                    let mut y = [0.0; 2];
                    for &e in p {
                        y[0] += elem[e][0];
                        y[1] += elem[e][1];
                    }
                    let m = p.len() as f64;
                    y = [y[0] / m, y[1] / m];
                    for &(axis, sign) in &constraints[n] {
                        y[axis] = sign * (spec.neumann)(&mesh.node_coords(n), t);
                    }
                    y
                })
                .collect();
            FluxLevel { nodal, bubble: None }
        })
        .collect();
    FluxField::from_levels(grid.clone(), levels)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxScope {
    /// One sparse solve of the slab normal equations.
    Global,
    /// Block Gauss–Seidel over node-centred patches.
    PatchSweeps(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxOptions {
    pub scope: FluxScope,
    /// Alternations between the flux solve and the β (and μ̂) update.
    pub rounds: usize,
    pub bubbles: bool,
}

impl Default for FluxOptions {
    fn default() -> Self {
        Self {
            scope: FluxScope::Global,
            rounds: 3,
            bubbles: false,
        }
    }
}

/// Result of minimizing one slab.
#[derive(Debug, Clone)]
pub struct SlabFlux {
    pub pair: (FluxLevel, FluxLevel),
    /// Majorant slab terms of the input flux and of the returned one.
    pub before: MajorantSlab,
    pub after: MajorantSlab,
}

/// Unknown layout of one slab: node n, component c, side s maps to
/// (2n + s)·d + c; bubbles follow all nodes as N·2d + (2e + s)·d + c.
/// Neumann normal components are fixed and carry no unknown.
struct DofLayout {
    dim: usize,
    n_nodes: usize,
    bubbles: bool,
    free: Vec<Option<usize>>,
    fixed: Vec<f64>,
    n_free: usize,
}

impl DofLayout {
    fn new(grid: &Grid, spec: &ProblemSpec, k: usize, bubbles: bool) -> Self {
        let mesh = &grid.mesh;
        let dim = mesh.dim();
        let n_nodes = mesh.n_nodes();
        let total = n_nodes * 2 * dim + if bubbles { mesh.n_elements() * 2 * dim } else { 0 };
        let mut free = vec![None; total];
        let mut fixed = vec![0.0; total];
        let mut is_fixed = vec![false; total];
        for n in 0..n_nodes {
            for (axis, sign) in neumann_constraints(grid, n) {
                for s in 0..2 {
                    let t = grid.time.t(k + s);
                    let i = (2 * n + s) * dim + axis;
                    is_fixed[i] = true;
                    fixed[i] = sign * (spec.neumann)(&mesh.node_coords(n), t);
                }
            }
        }
        let mut n_free = 0;
        for i in 0..total {
            if !is_fixed[i] {
                free[i] = Some(n_free);
                n_free += 1;
            }
        }
        Self {
            dim,
            n_nodes,
            bubbles,
            free,
            fixed,
            n_free,
        }
    }

    #[inline]
    fn node(&self, n: usize, c: usize, s: usize) -> usize {
        (2 * n + s) * self.dim + c
    }

    #[inline]
    fn bubble(&self, e: usize, c: usize, s: usize) -> usize {
        self.n_nodes * 2 * self.dim + (2 * e + s) * self.dim + c
    }

    /// Full dof indices of element `e` with (local basis index, component, side).
    fn element_dofs(&self, grid: &Grid, e: usize) -> Vec<(usize, usize, usize, usize)> {
        let nodes = grid.mesh.element_nodes(e);
        let nb = grid.mesh.nodes_per_element();
        let mut out = Vec::with_capacity((nb + 1) * 2 * self.dim);
        for s in 0..2 {
            for (i, &n) in nodes[..nb].iter().enumerate() {
                for c in 0..self.dim {
                    out.push((self.node(n, c, s), i, c, s));
                }
            }
            if self.bubbles {
                for c in 0..self.dim {
                    out.push((self.bubble(e, c, s), BUBBLE, c, s));
                }
            }
        }
        out
    }

    fn to_free(&self, pair: &(FluxLevel, FluxLevel)) -> Vec<f64> {
        let mut x = vec![0.0; self.n_free];
        for s in 0..2 {
            let lvl = if s == 0 { &pair.0 } else { &pair.1 };
            for n in 0..self.n_nodes {
                for c in 0..self.dim {
                    if let Some(r) = self.free[self.node(n, c, s)] {
                        x[r] = lvl.nodal[n][c];
                    }
                }
            }
            if let (true, Some(bub)) = (self.bubbles, &lvl.bubble) {
                for (e, v) in bub.iter().enumerate() {
                    for c in 0..self.dim {
                        if let Some(r) = self.free[self.bubble(e, c, s)] {
                            x[r] = v[c];
                        }
                    }
                }
            }
        }
        x
    }

    fn value(&self, x: &[f64], i: usize) -> f64 {
        match self.free[i] {
            Some(r) => x[r],
            None => self.fixed[i],
        }
    }

    fn to_pair(&self, x: &[f64], n_elements: usize) -> (FluxLevel, FluxLevel) {
        let level = |s: usize| {
            let nodal = (0..self.n_nodes)
                .map(|n| {
                    let mut y = [0.0; 2];
                    for (c, yc) in y.iter_mut().enumerate().take(self.dim) {
                        *yc = self.value(x, self.node(n, c, s));
                    }
                    y
                })
                .collect();
            let bubble = self.bubbles.then(|| {
                (0..n_elements)
                    .map(|e| {
                        let mut y = [0.0; 2];
                        for (c, yc) in y.iter_mut().enumerate().take(self.dim) {
                            *yc = self.value(x, self.bubble(e, c, s));
                        }
                        y
                    })
                    .collect()
            });
            FluxLevel { nodal, bubble }
        };
        (level(0), level(1))
    }

    /// Node-centred blocks: the node's own unknowns plus the bubbles of the
    /// element whose first node it is.
    fn blocks(&self, grid: &Grid) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); self.n_nodes];
        for (n, blk) in blocks.iter_mut().enumerate() {
            for s in 0..2 {
                for c in 0..self.dim {
                    if let Some(r) = self.free[self.node(n, c, s)] {
                        blk.push(r);
                    }
                }
            }
        }
        if self.bubbles {
            for e in 0..grid.mesh.n_elements() {
                let n = grid.mesh.element_nodes(e)[0];
                for s in 0..2 {
                    for c in 0..self.dim {
                        if let Some(r) = self.free[self.bubble(e, c, s)] {
                            blocks[n].push(r);
                        }
                    }
                }
            }
        }
        blocks.retain(|b| !b.is_empty());
        blocks
    }
}

/// Normal equations H x = g of the slab majorant for fixed α and μ:
/// H_ab = ∫∫ α₂ ψ_a·A⁻¹ψ_b + w_f div ψ_a div ψ_b and
/// g_a = ∫∫ α₂ ψ_a·∇v − w_f r₀ div ψ_a, with r₀ = f − v_t − λv.
fn assemble_normal_equations(
    v: &SpaceTimeField,
    spec: &ProblemSpec,
    constants: &EmbeddingConstants,
    params: &MajorantParams,
    slab: &MajorantSlab,
    layout: &DofLayout,
    rule: &SlabRule,
    k: usize,
) -> (CsrMatrix<f64>, Vec<f64>) {
    let grid = &v.grid;
    let dim = grid.mesh.dim();
    let c = constants.c_f * constants.c_f / spec.diffusion.nu1;
    let (a1, a2) = (slab.alphas.a1, slab.alphas.a2);
    let mut asm = Assembler::new(layout.n_free);
    let mut rhs = vec![0.0; layout.n_free];
    let identity = spec.diffusion.is_identity();
    for e in 0..grid.mesh.n_elements() {
        let dofs = layout.element_dofs(grid, e);
        let m = dofs.len();
        let mut h = vec![0.0; m * m];
        let mut g = vec![0.0; m];
        let mut val = vec![0.0; m];
        let mut div = vec![0.0; m];
        for_each_element_point(grid, rule, k, e, |p| {
            let (vv, gv, vt) = crate::discretization::field::SpaceTimeFunction::eval(v, p);
            let ends = Approximation::end_values(v, p);
            let r0 = data_residual(spec, params.source, grid, p, vv, vt, ends);
            let lam = spec.reaction(&p.x, p.t);
            let field = match &params.mu {
                MuMode::Field(f) => f(&p.x, p.t),
                _ => 0.0,
            };
            let wf = residual_weight(&params.mu, lam, field, a1, c, params.gamma);
            let ai = if identity {
                [[1.0, 0.0], [0.0, 1.0]]
            } else {
                spec.diffusion.inverse(&p.x, p.t, dim)
            };
            for (a, &(_, i, comp, s)) in dofs.iter().enumerate() {
                let l = if s == 0 { 1.0 - p.s } else { p.s };
                val[a] = p.basis.phi[i] * l;
                div[a] = p.basis.dphi[i][comp] * l;
            }
            let w = p.weight;
            for a in 0..m {
                let ca = dofs[a].2;
                g[a] += w * (a2 * val[a] * gv[ca] - wf * r0 * div[a]);
                for b in 0..m {
                    let cb = dofs[b].2;
                    h[a * m + b] += w * (a2 * val[a] * ai[ca][cb] * val[b] + wf * div[a] * div[b]);
                }
            }
        });
        for a in 0..m {
            let Some(ra) = layout.free[dofs[a].0] else { continue };
            let mut ga = g[a];
            for b in 0..m {
                let hab = h[a * m + b];
                match layout.free[dofs[b].0] {
                    Some(rb) => asm.add(ra, rb, hab),
                    None => ga -= hab * layout.fixed[dofs[b].0],
                }
            }
            rhs[ra] += ga;
        }
    }
    (asm.into_csr(), rhs)
}

fn gauss_seidel(h: &CsrMatrix<f64>, g: &[f64], x: &mut [f64], blocks: &[Vec<usize>], sweeps: usize) -> Result<()> {
    let mut pos = vec![usize::MAX; x.len()];
    for _ in 0..sweeps {
        for blk in blocks {
            for (j, &r) in blk.iter().enumerate() {
                pos[r] = j;
            }
            let m = blk.len();
            let mut hb = DMatrix::<f64>::zeros(m, m);
            let mut rb = vec![0.0; m];
            for (j, &r) in blk.iter().enumerate() {
                let row = h.row(r);
                let mut acc = g[r];
                for (&col, &val) in row.col_indices().iter().zip(row.values()) {
                    if pos[col] != usize::MAX {
                        hb[(j, pos[col])] = val;
                    } else {
                        acc -= val * x[col];
                    }
                }
                rb[j] = acc;
            }
            let sol = solve_dense_spd(hb, &rb)?;
            for (j, &r) in blk.iter().enumerate() {
                x[r] = sol[j];
                pos[r] = usize::MAX;
            }
        }
    }
    Ok(())
}

/// Minimizes the slab majorant over the flux levels of slab `k`, starting
/// from `start`. The flux solve alternates with the β/ω (and μ̂) update of
/// the majorant; the result is never worse than the input.
#[allow(clippy::too_many_arguments)]
pub fn minimize_flux_slab(
    v: &SpaceTimeField,
    start: &(FluxLevel, FluxLevel),
    spec: &ProblemSpec,
    constants: &EmbeddingConstants,
    params: &MajorantParams,
    k: usize,
    opts: &FluxOptions,
) -> Result<SlabFlux> {
    let grid = &v.grid;
    if k >= grid.time.n_slabs() {
        return Err(Error::InvalidParameter(format!("slab {k} out of range")));
    }
    params.validate(grid.time.n_slabs())?;
    let rule = SlabRule::new(&grid.mesh, params.space_points, params.time_points)?;
    let faces = neumann_points(grid, params.space_points)?;
    let nu1 = spec.diffusion.nu1;
    let evaluate = |pair: &(FluxLevel, FluxLevel)| {
        let view = SlabView { grid, pair };
        let samples = collect_samples(v, &view, spec, grid, params, &rule, &faces, k);
        evaluate_slab(&samples, params, constants, nu1, k)
    };
    let before = evaluate(start)?;
    let layout = DofLayout::new(grid, spec, k, opts.bubbles);
    let blocks = match opts.scope {
        FluxScope::PatchSweeps(_) => layout.blocks(grid),
        FluxScope::Global => Vec::new(),
    };
    let mut best = (start.clone(), before);
    let mut x = layout.to_free(start);
    for _ in 0..opts.rounds.max(1) {
        let (h, g) = assemble_normal_equations(v, spec, constants, params, &best.1, &layout, &rule, k);
        match opts.scope {
            FluxScope::Global => x = SpdFactor::new(&h)?.solve(&g)?,
            FluxScope::PatchSweeps(n) => gauss_seidel(&h, &g, &mut x, &blocks, n)?,
        }
        let pair = layout.to_pair(&x, grid.mesh.n_elements());
        let slab = evaluate(&pair)?;
        if slab.total <= best.1.total {
            best = (pair, slab);
        } else {
            break;
        }
    }
    Ok(SlabFlux {
        pair: best.0,
        before,
        after: best.1,
    })
}

/// Minimizes every slab independently, starting from `start`.
pub fn minimize_flux(
    v: &SpaceTimeField,
    start: &FluxField,
    spec: &ProblemSpec,
    constants: &EmbeddingConstants,
    params: &MajorantParams,
    opts: &FluxOptions,
) -> Result<FluxField> {
    let slabs = (0..v.grid.time.n_slabs())
        .into_par_iter()
        .map(|k| minimize_flux_slab(v, &start.slabs[k], spec, constants, params, k, opts).map(|r| r.pair))
        .collect::<Result<Vec<_>>>()?;
    FluxField::new(v.grid.clone(), slabs)
}

/// Adds element bubbles to every slab of `y` and re-minimizes.
pub fn enrich_flux(
    y: &FluxField,
    v: &SpaceTimeField,
    spec: &ProblemSpec,
    constants: &EmbeddingConstants,
    params: &MajorantParams,
    opts: &FluxOptions,
) -> Result<FluxField> {
    let opts = FluxOptions {
        bubbles: true,
        ..*opts
    };
    minimize_flux(v, y, spec, constants, params, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_space_time_grid;
    use crate::problem::{embedding_constants, preset_problem, scalar_fn, PresetId};

    #[test]
    fn average_of_linear_field_is_its_slope() {
        let (spec, _) = preset_problem(PresetId::Trivial).unwrap();
        let grid = build_space_time_grid(&spec, &[5], 1).unwrap();
        let levels = vec![(0..6).map(|n| 3.0 * n as f64 / 5.0).collect(); 2];
        let v = SpaceTimeField::new(grid, levels).unwrap();
        let y = patch_average_flux(&v, &spec, 2).unwrap();
        assert!(y.slabs[0].0.nodal.iter().all(|c| (c[0] - 3.0).abs() < 1e-13));
    }

    #[test]
    fn average_of_x_squared_interpolant() {
        let (spec, _) = preset_problem(PresetId::Trivial).unwrap();
        let grid = build_space_time_grid(&spec, &[2], 1).unwrap();
        let f = scalar_fn(|x, _| x[0] * x[0]);
        let levels = vec![(0..3).map(|n| f(&[n as f64 / 2.0, 0.0], 0.0)).collect(); 2];
        let v = SpaceTimeField::new(grid, levels).unwrap();
        let y = patch_average_flux(&v, &spec, 2).unwrap();
        let n = &y.slabs[0].0.nodal;
        assert!((n[1][0] - 1.0).abs() < 1e-14);
        assert!((n[0][0] - 0.5).abs() < 1e-14 && (n[2][0] - 1.5).abs() < 1e-14);
    }

    #[test]
    fn minimization_is_a_fixed_point() {
        let (spec, _) = preset_problem(PresetId::Ex1).unwrap();
        let c = embedding_constants(&spec).unwrap();
        let grid = build_space_time_grid(&spec, &[8], 4).unwrap();
        let v = crate::discretization::solve_parabolic(&spec, &grid, Default::default()).unwrap();
        let y0 = patch_average_flux(&v, &spec, 3).unwrap();
        let params = MajorantParams {
            beta: crate::majorant::BetaPolicy::Fixed(0.7),
            ..Default::default()
        };
        let opts = FluxOptions {
            rounds: 1,
            ..Default::default()
        };
        let r1 = minimize_flux_slab(&v, &y0.slabs[1], &spec, &c, &params, 1, &opts).unwrap();
        assert!(r1.after.total <= r1.before.total);
        let r2 = minimize_flux_slab(&v, &r1.pair, &spec, &c, &params, 1, &opts).unwrap();
        for (a, b) in r1.pair.0.nodal.iter().zip(&r2.pair.0.nodal) {
            assert!((a[0] - b[0]).abs() < 1e-8 * (1.0 + a[0].abs()));
        }
    }
}
