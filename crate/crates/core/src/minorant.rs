//! Guaranteed lower bound of the error norm
//! (κ₁/2)|||∇e|||² + ‖√((κ₂+κ₃λ)/2) e‖² + (κ₄/2)‖e(·,T)‖²,
//! maximized slab by slab over test functions that are continuous in time.

use serde::{Deserialize, Serialize};

use crate::discretization::field::{SpaceTimeField, SpaceTimeFunction};
use crate::discretization::mesh::Grid;
use crate::discretization::quadrature::{
    face_points, for_each_element_point, for_each_level_point, BasisAt, ElementTable, QuadPoint,
    SlabRule, BUBBLE,
};
use crate::error::{Error, Result};
use crate::linalg::{Assembler, SpdFactor};
use crate::majorant::SourceMode;
use crate::problem::{BoundaryKind, NormWeights, ProblemSpec, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorantParams {
    pub kappa: [f64; 4],
    /// Add one spatial bubble per element to the test space.
    pub bubbles: bool,
    pub source: SourceMode,
    pub space_points: usize,
    pub time_points: usize,
}

impl MinorantParams {
    pub fn new(kappa: [f64; 4]) -> Self {
        Self {
            kappa,
            bubbles: true,
            source: SourceMode::Quadrature,
            space_points: 3,
            time_points: 3,
        }
    }

    /// κ₁, κ₂, κ₄ > 0 and κ₃ ≥ 0; κ₃ = 0 only when λ vanishes on the grid.
    pub fn validate(&self, spec: &ProblemSpec, grid: &Grid) -> Result<()> {
        let [k1, k2, k3, k4] = self.kappa;
        if !(k1 > 0.0 && k4 > 0.0 && k1.is_finite() && k4.is_finite()) {
            return Err(Error::InvalidParameter(format!("κ₁ and κ₄ must be positive, got {:?}", self.kappa)));
        }
        if !(k2 > 0.0 && k2.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "κ₂ must be positive for time-dependent test functions, got {k2}"
            )));
        }
        if !(k3 >= 0.0 && k3.is_finite()) {
            return Err(Error::InvalidParameter(format!("κ₃ must be nonnegative, got {k3}")));
        }
        if k3 == 0.0 && !reaction_vanishes(spec, grid) {
            return Err(Error::InvalidParameter(
                "κ₃ = 0 requires λ ≡ 0".into(),
            ));
        }
        Ok(())
    }

    pub fn norm_weights(&self) -> NormWeights {
        NormWeights::minorant(&self.kappa)
    }

    #[inline]
    fn inv_k3(&self) -> f64 {
        if self.kappa[2] > 0.0 {
            1.0 / self.kappa[2]
        } else {
            0.0
        }
    }
}

pub(crate) fn reaction_vanishes(spec: &ProblemSpec, grid: &Grid) -> bool {
    let mesh = &grid.mesh;
    let centre = BasisAt::new(mesh.dim(), [0.5, 0.5], 1.0, mesh.h());
    grid.time.levels().iter().all(|&t| {
        (0..mesh.n_nodes()).all(|n| spec.reaction(&mesh.node_coords(n), t) == 0.0)
            && (0..mesh.n_elements()).all(|e| spec.reaction(&mesh.map(e, &centre.xi), t) == 0.0)
    })
}

/// Test function η, continuous in time: η = η^k(1−s) + η^{k+1}s + α_k τ² s(1−s)
/// on slab k, where each level and each α_k lies in the nodal space (zero on
/// Dirichlet nodes) optionally enriched by element bubbles.
///
/// Coefficient vectors hold the node values followed by the bubble values.
#[derive(Debug, Clone, PartialEq)]
pub struct TestField {
    pub grid: Grid,
    pub bubbles: bool,
    pub levels: Vec<Vec<f64>>,
    pub alpha: Vec<Vec<f64>>,
}

impl TestField {
    pub fn zeros(grid: Grid, bubbles: bool) -> Self {
        let n = space_len(&grid, bubbles);
        let k = grid.time.n_slabs();
        Self {
            levels: vec![vec![0.0; n]; k + 1],
            alpha: vec![vec![0.0; n]; k],
            grid,
            bubbles,
        }
    }

    pub fn new(grid: Grid, bubbles: bool, levels: Vec<Vec<f64>>, alpha: Vec<Vec<f64>>) -> Result<Self> {
        let n = space_len(&grid, bubbles);
        let k = grid.time.n_slabs();
        if levels.len() != k + 1 || alpha.len() != k {
            return Err(Error::SizeMismatch(format!(
                "{} levels and {} bubbles for {k} slabs",
                levels.len(),
                alpha.len()
            )));
        }
        if levels.iter().chain(&alpha).any(|c| c.len() != n) {
            return Err(Error::SizeMismatch(format!("test coefficients must have length {n}")));
        }
        let mask = grid.mesh.dirichlet_mask();
        for c in levels.iter().chain(&alpha) {
            if mask.iter().zip(c).any(|(&d, &x)| d && x != 0.0) {
                return Err(Error::InvalidParameter(
                    "test function is nonzero on the Dirichlet boundary".into(),
                ));
            }
        }
        Ok(Self {
            grid,
            bubbles,
            levels,
            alpha,
        })
    }

    /// Nodal interpolant of a space-time field without α or bubbles.
    pub fn from_field(v: &SpaceTimeField, bubbles: bool) -> Self {
        let mut out = Self::zeros(v.grid.clone(), bubbles);
        for (l, src) in out.levels.iter_mut().zip(&v.levels) {
            l[..src.len()].copy_from_slice(src);
        }
        out
    }

    #[inline]
    fn space(&self, c: &[f64], e: usize, b: &BasisAt) -> (f64, Vector) {
        space_eval(&self.grid, self.bubbles, c, e, b)
    }

    /// (η, ∇η, η_t) at a slab point.
    #[inline]
    pub fn eval(&self, p: &QuadPoint) -> (f64, Vector, f64) {
        let k = p.slab;
        let (a, ga) = self.space(&self.levels[k], p.elem, p.basis);
        let (b, gb) = self.space(&self.levels[k + 1], p.elem, p.basis);
        let (c, gc) = self.space(&self.alpha[k], p.elem, p.basis);
        let (s, tau) = (p.s, p.tau);
        let bub = tau * tau * s * (1.0 - s);
        (
            (1.0 - s) * a + s * b + bub * c,
            [
                (1.0 - s) * ga[0] + s * gb[0] + bub * gc[0],
                (1.0 - s) * ga[1] + s * gb[1] + bub * gc[1],
            ],
            (b - a) / tau + c * tau * (1.0 - 2.0 * s),
        )
    }
}

fn space_len(grid: &Grid, bubbles: bool) -> usize {
    grid.mesh.n_nodes() + if bubbles { grid.mesh.n_elements() } else { 0 }
}

#[inline]
fn space_eval(grid: &Grid, bubbles: bool, c: &[f64], e: usize, b: &BasisAt) -> (f64, Vector) {
    let nodes = grid.mesh.element_nodes(e);
    let nb = grid.mesh.nodes_per_element();
    let mut v = 0.0;
    let mut g = [0.0; 2];
    for i in 0..nb {
        let x = c[nodes[i]];
        v += x * b.phi[i];
        g[0] += x * b.dphi[i][0];
        g[1] += x * b.dphi[i][1];
    }
    if bubbles {
        let x = c[grid.mesh.n_nodes() + e];
        v += x * b.phi[BUBBLE];
        g[0] += x * b.dphi[BUBBLE][0];
        g[1] += x * b.dphi[BUBBLE][1];
    }
    (v, g)
}

/// Slab contributions of the four functionals and the data term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MinorantSlab {
    /// −∫∫ ∇η·A∇v − A∇η·∇η/(2κ₁).
    pub g1: f64,
    /// ∫∫ η_t v − η_t²/(2κ₂).
    pub g2: f64,
    /// −∫∫ λ(vη + η²/(2κ₃)).
    pub g3: f64,
    /// ∫∫ fη + ∫∫_{Γ_N} gη.
    pub data: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinorantBreakdown {
    /// ∫ φ η(·,0).
    pub initial_term: f64,
    pub slabs: Vec<MinorantSlab>,
    /// −∫ v(t^k)η(t^k) − η(t^k)²/(2κ₄) for every level.
    pub final_terms: Vec<f64>,
    pub kappa: [f64; 4],
}

impl MinorantBreakdown {
    /// Lower bound for the error on (0, t^k).
    pub fn cumulative(&self, k: usize) -> f64 {
        self.initial_term + self.slabs[..k].iter().map(|s| s.total).sum::<f64>() + self.final_terms[k]
    }

    pub fn per_level(&self) -> Vec<f64> {
        (0..self.final_terms.len()).map(|k| self.cumulative(k)).collect()
    }

    pub fn total(&self) -> f64 {
        self.cumulative(self.slabs.len())
    }
}

#[inline]
fn source_at(spec: &ProblemSpec, mode: SourceMode, grid: &Grid, p: &QuadPoint) -> f64 {
    match mode {
        SourceMode::Quadrature => spec.source(&p.x, p.t),
        SourceMode::Interpolated => {
            let (t0, t1) = (grid.time.t(p.slab), grid.time.t(p.slab + 1));
            (1.0 - p.s) * spec.source(&p.x, t0) + p.s * spec.source(&p.x, t1)
        }
    }
}

#[inline]
fn neumann_at(spec: &ProblemSpec, mode: SourceMode, grid: &Grid, x: &[f64; 2], k: usize, s: f64) -> f64 {
    let (t0, t1) = (grid.time.t(k), grid.time.t(k + 1));
    match mode {
        SourceMode::Quadrature => (spec.neumann)(x, t0 + s * (t1 - t0)),
        SourceMode::Interpolated => (1.0 - s) * (spec.neumann)(x, t0) + s * (spec.neumann)(x, t1),
    }
}

fn neumann_faces(grid: &Grid, points: usize) -> Result<Vec<(usize, BasisAt)>> {
    let dom = grid.mesh.domain();
    let mut out = Vec::new();
    for &f in dom.faces() {
        if dom.kind(f) == BoundaryKind::Neumann {
            out.extend(face_points(&grid.mesh, f, points)?);
        }
    }
    Ok(out)
}

/// Σ G_i(η) + F(η) by space-time quadrature, split per slab and level.
pub fn minorant_value(
    v: &dyn SpaceTimeFunction,
    eta: &TestField,
    spec: &ProblemSpec,
    params: &MinorantParams,
) -> Result<MinorantBreakdown> {
    let grid = &eta.grid;
    params.validate(spec, grid)?;
    let rule = SlabRule::new(&grid.mesh, params.space_points, params.time_points)?;
    let faces = neumann_faces(grid, params.space_points)?;
    let [k1, k2, _, k4] = params.kappa;
    let ik3 = params.inv_k3();
    let slabs = (0..grid.time.n_slabs())
        .map(|k| {
            let mut s = MinorantSlab::default();
            for e in 0..grid.mesh.n_elements() {
                for_each_element_point(grid, &rule, k, e, |p| {
                    let (vv, gv, _) = v.eval(p);
                    let (h, gh, ht) = eta.eval(p);
                    let agv = spec.diffusion.apply(&p.x, p.t, &gv);
                    let agh = spec.diffusion.apply(&p.x, p.t, &gh);
                    let lam = spec.reaction(&p.x, p.t);
                    let w = p.weight;
                    s.g1 -= w * (gh[0] * agv[0] + gh[1] * agv[1] + (gh[0] * agh[0] + gh[1] * agh[1]) / (2.0 * k1));
                    s.g2 += w * (ht * vv - ht * ht / (2.0 * k2));
                    if lam != 0.0 {
                        s.g3 -= w * lam * (vv * h + h * h * ik3 / 2.0);
                    }
                    s.data += w * source_at(spec, params.source, grid, p) * h;
                });
            }
            let (t0, tau) = (grid.time.t(k), grid.time.tau(k));
            for (e, b) in &faces {
                for (sn, ws) in rule.time.nodes.iter().zip(&rule.time.weights) {
                    let x = grid.mesh.map(*e, &b.xi);
                    let p = QuadPoint {
                        x,
                        t: t0 + sn * tau,
                        elem: *e,
                        slab: k,
                        s: *sn,
                        tau,
                        weight: ws * tau * b.weight,
                        basis: b,
                    };
                    let (h, _, _) = eta.eval(&p);
                    s.data += p.weight * neumann_at(spec, params.source, grid, &x, k, *sn) * h;
                }
            }
            s.total = s.g1 + s.g2 + s.g3 + s.data;
            s
        })
        .collect();
    let mut initial_term = 0.0;
    for_each_level_point(grid, &rule.space, 0, |p| {
        let (h, _, _) = eta.eval(p);
        initial_term += p.weight * (spec.initial)(&p.x, 0.0) * h;
    });
    let final_terms = (0..=grid.time.n_slabs())
        .map(|k| {
            let mut acc = 0.0;
            for_each_level_point(grid, &rule.space, k, |p| {
                let (vv, _, _) = v.eval(p);
                let (h, _) = eta.space(&eta.levels[k], p.elem, p.basis);
                acc -= p.weight * (vv * h + h * h / (2.0 * k4));
            });
            acc
        })
        .collect();
    Ok(MinorantBreakdown {
        initial_term,
        slabs,
        final_terms,
        kappa: params.kappa,
    })
}

/// Spatial unknowns: free nodes then (optionally) element bubbles.
struct SpaceDofs {
    map: Vec<Option<usize>>,
    n: usize,
}

impl SpaceDofs {
    fn new(grid: &Grid, bubbles: bool) -> Self {
        let mask = grid.mesh.dirichlet_mask();
        let mut map: Vec<Option<usize>> = Vec::with_capacity(space_len(grid, bubbles));
        let mut n = 0;
        for d in mask {
            map.push(if d {
                None
            } else {
                n += 1;
                Some(n - 1)
            });
        }
        if bubbles {
            for _ in 0..grid.mesh.n_elements() {
                map.push(Some(n));
                n += 1;
            }
        }
        Self { map, n }
    }

    /// (local basis index, full coefficient index) of element `e`.
    fn element(&self, grid: &Grid, bubbles: bool, e: usize) -> Vec<(usize, usize)> {
        let nodes = grid.mesh.element_nodes(e);
        let nb = grid.mesh.nodes_per_element();
        let mut out: Vec<(usize, usize)> = (0..nb).map(|i| (i, nodes[i])).collect();
        if bubbles {
            out.push((BUBBLE, grid.mesh.n_nodes() + e));
        }
        out
    }
}

/// Maximizer of one slab with η^k either fixed (`start = Some`) or free.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabTestFunction {
    pub start: Vec<f64>,
    pub end: Vec<f64>,
    pub alpha: Vec<f64>,
}

/// Maximizes ∫_{slab}(G₁+G₂+G₃+F) + G₄(η(t^{k+1})), plus ∫φη(0) on the
/// first slab, over η^{k+1} and α (and η^k when `start` is `None`).
/// The functional is ℓ·z − ½zᵀQz with Q SPD, so the maximizer solves Qz = ℓ.
pub fn maximize_minorant_slab(
    v: &dyn SpaceTimeFunction,
    spec: &ProblemSpec,
    grid: &Grid,
    params: &MinorantParams,
    k: usize,
    start: Option<&[f64]>,
) -> Result<SlabTestFunction> {
    if k >= grid.time.n_slabs() {
        return Err(Error::InvalidParameter(format!("slab {k} out of range")));
    }
    let bubbles = params.bubbles;
    let sd = SpaceDofs::new(grid, bubbles);
    if let Some(s) = start {
        if s.len() != sd.map.len() {
            return Err(Error::SizeMismatch(format!(
                "fixed level has {} coefficients, expected {}",
                s.len(),
                sd.map.len()
            )));
        }
    }
    let rule = SlabRule::new(&grid.mesh, params.space_points, params.time_points)?;
    let faces = neumann_faces(grid, params.space_points)?;
    let [k1, k2, _, k4] = params.kappa;
    let ik3 = params.inv_k3();
    // Time functions: 0 = 1−s, 1 = s, 2 = τ²s(1−s). With η^k fixed only 1, 2 are unknown.
    let free_t: &[usize] = if start.is_some() { &[1, 2] } else { &[0, 1, 2] };
    let nt = free_t.len();
    let slot = |j: usize| free_t.iter().position(|&x| x == j);
    let n = sd.n * nt;
    let mut asm = Assembler::new(n);
    let mut rhs = vec![0.0; n];
    let tau = grid.time.tau(k);
    let t_fn = |s: f64| [1.0 - s, s, tau * tau * s * (1.0 - s)];
    let dt_fn = |s: f64| [-1.0 / tau, 1.0 / tau, tau * (1.0 - 2.0 * s)];
    let identity = spec.diffusion.is_identity();

    for e in 0..grid.mesh.n_elements() {
        let loc = sd.element(grid, bubbles, e);
        let m = loc.len() * 3;
        let mut q = vec![0.0; m * m];
        let mut l = vec![0.0; m];
        let mut val = vec![0.0; m];
        let mut grad = vec![[0.0; 2]; m];
        let mut dt = vec![0.0; m];
        for_each_element_point(grid, &rule, k, e, |p| {
            let (vv, gv, _) = v.eval(p);
            let agv = spec.diffusion.apply(&p.x, p.t, &gv);
            let lam = spec.reaction(&p.x, p.t);
            let f = source_at(spec, params.source, grid, p);
            let (tf, tdf) = (t_fn(p.s), dt_fn(p.s));
            for (a, &(i, _)) in loc.iter().enumerate() {
                for j in 0..3 {
                    let r = a * 3 + j;
                    val[r] = p.basis.phi[i] * tf[j];
                    grad[r] = [p.basis.dphi[i][0] * tf[j], p.basis.dphi[i][1] * tf[j]];
                    dt[r] = p.basis.phi[i] * tdf[j];
                }
            }
            let w = p.weight;
            for r in 0..m {
                l[r] += w * (f * val[r] - (grad[r][0] * agv[0] + grad[r][1] * agv[1]) + dt[r] * vv - lam * vv * val[r]);
                let ag = if identity {
                    grad[r]
                } else {
                    spec.diffusion.apply(&p.x, p.t, &grad[r])
                };
                for c in 0..m {
                    q[r * m + c] += w
                        * ((ag[0] * grad[c][0] + ag[1] * grad[c][1]) / k1
                            + dt[r] * dt[c] / k2
                            + lam * ik3 * val[r] * val[c]);
                }
            }
        });
        scatter(&mut asm, &mut rhs, &sd, &loc, &q, &l, start, &slot, nt);
    }

    // Neumann data and the level terms, which involve the time functions
    // 0 (at s = 0) and 1 (at s = 1) only.
    let face_rule = &rule.time;
    for (e, b) in &faces {
        let loc = sd.element(grid, bubbles, *e);
        let m = loc.len() * 3;
        let mut l = vec![0.0; m];
        let x = grid.mesh.map(*e, &b.xi);
        for (sn, ws) in face_rule.nodes.iter().zip(&face_rule.weights) {
            let g = neumann_at(spec, params.source, grid, &x, k, *sn);
            let tf = t_fn(*sn);
            for (a, &(i, _)) in loc.iter().enumerate() {
                for j in 0..3 {
                    l[a * 3 + j] += ws * tau * b.weight * g * b.phi[i] * tf[j];
                }
            }
        }
        scatter(&mut asm, &mut rhs, &sd, &loc, &vec![0.0; m * m], &l, start, &slot, nt);
    }
    let table = &rule.space;
    level_terms(grid, table, v, spec, &sd, bubbles, k + 1, k4, &mut asm, &mut rhs, &slot, nt, 1, start)?;
    if start.is_none() {
        level_terms(grid, table, v, spec, &sd, bubbles, 0, k4, &mut asm, &mut rhs, &slot, nt, 0, None)?;
    }

    let z = SpdFactor::new(&asm.into_csr())?.solve(&rhs)?;
    let unpack = |j: usize| -> Vec<f64> {
        sd.map
            .iter()
            .map(|m| match (m, slot(j)) {
                (Some(r), Some(sj)) => z[r * nt + sj],
                _ => 0.0,
            })
            .collect()
    };
    Ok(SlabTestFunction {
        start: match start {
            Some(s) => s.to_vec(),
            None => unpack(0),
        },
        end: unpack(1),
        alpha: unpack(2),
    })
}

/// Adds −∫ v η − η²/(2κ₄) at level `level` (time function `j` = 1), or
/// ∫ φ η at level 0 (time function `j` = 0).
#[allow(clippy::too_many_arguments)]
fn level_terms(
    grid: &Grid,
    table: &ElementTable,
    v: &dyn SpaceTimeFunction,
    spec: &ProblemSpec,
    sd: &SpaceDofs,
    bubbles: bool,
    level: usize,
    k4: f64,
    asm: &mut Assembler,
    rhs: &mut [f64],
    slot: &dyn Fn(usize) -> Option<usize>,
    nt: usize,
    j: usize,
    start: Option<&[f64]>,
) -> Result<()> {
    let mut per_elem: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.mesh.n_elements())
        .map(|e| {
            let m = sd.element(grid, bubbles, e).len() * 3;
            (vec![0.0; m * m], vec![0.0; m])
        })
        .collect();
    for_each_level_point(grid, table, level, |p| {
        let loc = sd.element(grid, bubbles, p.elem);
        let m = loc.len() * 3;
        let (q, l) = &mut per_elem[p.elem];
        let w = p.weight;
        if j == 0 {
            let phi0 = (spec.initial)(&p.x, 0.0);
            for (a, &(i, _)) in loc.iter().enumerate() {
                l[a * 3] += w * phi0 * p.basis.phi[i];
            }
        } else {
            let (vv, _, _) = v.eval(p);
            for (a, &(i, _)) in loc.iter().enumerate() {
                l[a * 3 + 1] -= w * vv * p.basis.phi[i];
                for (c, &(ic, _)) in loc.iter().enumerate() {
                    q[(a * 3 + 1) * m + c * 3 + 1] += w * p.basis.phi[i] * p.basis.phi[ic] / k4;
                }
            }
        }
    });
    for (e, (q, l)) in per_elem.iter().enumerate() {
        let loc = sd.element(grid, bubbles, e);
        scatter(asm, rhs, sd, &loc, q, l, start, slot, nt);
    }
    Ok(())
}

/// Moves a local (space × 3 time functions) block into the global system;
/// terms coupling to the fixed start level go to the right-hand side.
#[allow(clippy::too_many_arguments)]
fn scatter(
    asm: &mut Assembler,
    rhs: &mut [f64],
    sd: &SpaceDofs,
    loc: &[(usize, usize)],
    q: &[f64],
    l: &[f64],
    start: Option<&[f64]>,
    slot: &dyn Fn(usize) -> Option<usize>,
    nt: usize,
) {
    let m = loc.len() * 3;
    for (a, &(_, ga)) in loc.iter().enumerate() {
        let Some(ra) = sd.map[ga] else { continue };
        for ja in 0..3 {
            let Some(sa) = slot(ja) else { continue };
            let row = ra * nt + sa;
            let r = a * 3 + ja;
            let mut acc = l[r];
            for (c, &(_, gc)) in loc.iter().enumerate() {
                let Some(rc) = sd.map[gc] else { continue };
                for jc in 0..3 {
                    let qv = q[r * m + c * 3 + jc];
                    if qv == 0.0 {
                        continue;
                    }
                    match slot(jc) {
                        Some(sc) => asm.add(row, rc * nt + sc, qv),
                        None => {
                            if let Some(s) = start {
                                acc -= qv * s[gc];
                            }
                        }
                    }
                }
            }
            rhs[row] += acc;
        }
    }
}

/// Greedy slab-by-slab maximization: slab 0 chooses η⁰, η¹, α₀; slab k
/// keeps η^k and chooses η^{k+1}, α_k.
pub fn maximize_minorant(
    v: &dyn SpaceTimeFunction,
    spec: &ProblemSpec,
    grid: &Grid,
    params: &MinorantParams,
) -> Result<(TestField, MinorantBreakdown)> {
    params.validate(spec, grid)?;
    let mut eta = TestField::zeros(grid.clone(), params.bubbles);
    for k in 0..grid.time.n_slabs() {
        let start = if k == 0 { None } else { Some(eta.levels[k].clone()) };
        let s = maximize_minorant_slab(v, spec, grid, params, k, start.as_deref())?;
        if k == 0 {
            eta.levels[0] = s.start;
        }
        eta.levels[k + 1] = s.end;
        eta.alpha[k] = s.alpha;
    }
    let b = minorant_value(v, &eta, spec, params)?;
    Ok((eta, b))
}

/// Per-level cumulative minorant from the closed-form time integrals of the
/// slab ansatz. Requires A and λ independent of time; f and g are taken as
/// their linear interpolants between levels.
pub fn minorant_incremental(
    v: &SpaceTimeField,
    eta: &TestField,
    spec: &ProblemSpec,
    params: &MinorantParams,
) -> Result<Vec<f64>> {
    let grid = &eta.grid;
    if v.grid != *grid {
        return Err(Error::SizeMismatch("approximation and test function use different grids".into()));
    }
    if spec.diffusion.is_time_dependent() || spec.reaction_time_dependent {
        return Err(Error::NotIncremental("coefficients depend on time".into()));
    }
    params.validate(spec, grid)?;
    let table = ElementTable::new(&grid.mesh, params.space_points)?;
    let faces = neumann_faces(grid, params.space_points)?;
    let [k1, k2, _, k4] = params.kappa;
    let ik3 = params.inv_k3();
    let pair = |a: f64, b: f64, c: f64, x0: f64, x1: f64, tau: f64| {
        // ∫ (a(1−s) + b s + c τ²s(1−s)) (x0(1−s) + x1 s) dt
        tau / 3.0 * (a * x0 + b * x1 + 0.5 * (b * x0 + a * x1) + tau * tau / 4.0 * c * (x0 + x1))
    };
    let square = |a: f64, b: f64, c: f64, tau: f64| {
        tau / 3.0 * (a * a + b * b + a * b + tau * tau / 2.0 * c * (a + b) + tau.powi(4) / 10.0 * c * c)
    };
    let mut slabs = Vec::with_capacity(grid.time.n_slabs());
    for k in 0..grid.time.n_slabs() {
        let (t0, t1, tau) = (grid.time.t(k), grid.time.t(k + 1), grid.time.tau(k));
        let mut total = 0.0;
        for e in 0..grid.mesh.n_elements() {
            for b in &table.points {
                let x = grid.mesh.map(e, &b.xi);
                let w = b.weight * table.volume;
                let (h0, gh0) = eta.space(&eta.levels[k], e, b);
                let (h1, gh1) = eta.space(&eta.levels[k + 1], e, b);
                let (al, gal) = eta.space(&eta.alpha[k], e, b);
                let (v0, gv0) = v.level_at(k, e, b);
                let (v1, gv1) = v.level_at(k + 1, e, b);
                let a = |g: &Vector| spec.diffusion.apply(&x, t0, g);
                let (av0, av1) = (a(&gv0), a(&gv1));
                let (ah0, ah1, aal) = (a(&gh0), a(&gh1), a(&gal));
                let dot = |p: &Vector, q: &Vector| p[0] * q[0] + p[1] * q[1];
                // ∫∇η·A∇v, component-wise through the bilinear form.
                let cross = tau / 3.0
                    * (dot(&gh0, &av0) + dot(&gh1, &av1) + 0.5 * (dot(&gh1, &av0) + dot(&gh0, &av1))
                        + tau * tau / 4.0 * (dot(&gal, &av0) + dot(&gal, &av1)));
                let quad = tau / 3.0
                    * (dot(&gh0, &ah0) + dot(&gh1, &ah1) + dot(&gh0, &ah1)
                        + tau * tau / 2.0 * (dot(&gal, &ah0) + dot(&gal, &ah1))
                        + tau.powi(4) / 10.0 * dot(&gal, &aal));
                let g1 = -cross - quad / (2.0 * k1);
                let d = h1 - h0;
                let g2 = 0.5 * d * (v0 + v1) + al * tau * tau / 6.0 * (v0 - v1)
                    - (d * d / tau + al * al * tau.powi(3) / 3.0) / (2.0 * k2);
                let lam = spec.reaction(&x, t0);
                let g3 = if lam != 0.0 {
                    -lam * (pair(h0, h1, al, v0, v1, tau) + square(h0, h1, al, tau) * ik3 / 2.0)
                } else {
                    0.0
                };
                let f = pair(h0, h1, al, spec.source(&x, t0), spec.source(&x, t1), tau);
                total += w * (g1 + g2 + g3 + f);
            }
        }
        for (e, b) in &faces {
            let x = grid.mesh.map(*e, &b.xi);
            let (h0, _) = eta.space(&eta.levels[k], *e, b);
            let (h1, _) = eta.space(&eta.levels[k + 1], *e, b);
            let (al, _) = eta.space(&eta.alpha[k], *e, b);
            total += b.weight * pair(h0, h1, al, (spec.neumann)(&x, t0), (spec.neumann)(&x, t1), tau);
        }
        slabs.push(total);
    }
    let level_term = |k: usize| {
        let mut acc = 0.0;
        for e in 0..grid.mesh.n_elements() {
            for b in &table.points {
                let w = b.weight * table.volume;
                let (h, _) = eta.space(&eta.levels[k], e, b);
                let (vv, _) = v.level_at(k, e, b);
                acc -= w * (vv * h + h * h / (2.0 * k4));
            }
        }
        acc
    };
    let mut initial = 0.0;
    for e in 0..grid.mesh.n_elements() {
        for b in &table.points {
            let x = grid.mesh.map(e, &b.xi);
            let (h, _) = eta.space(&eta.levels[0], e, b);
            initial += b.weight * table.volume * (spec.initial)(&x, 0.0) * h;
        }
    }
    let mut out = Vec::with_capacity(slabs.len() + 1);
    let mut acc = initial;
    out.push(acc + level_term(0));
    for (k, s) in slabs.iter().enumerate() {
        acc += s;
        out.push(acc + level_term(k + 1));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::mesh::build_space_time_grid;
    use crate::problem::{preset_problem, PresetId};

    #[test]
    fn zero_test_function_gives_zero() {
        let (spec, _) = preset_problem(PresetId::Ex1).unwrap();
        let grid = build_space_time_grid(&spec, &[6], 3).unwrap();
        let v = SpaceTimeField::zeros(grid.clone());
        let eta = TestField::zeros(grid, true);
        let b = minorant_value(&v, &eta, &spec, &MinorantParams::new([2.0, 1.0, 0.0, 2.0])).unwrap();
        assert!(b.per_level().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn kappa_validation() {
        let (spec, _) = preset_problem(PresetId::Ex2 { rho: 1.0 }).unwrap();
        let grid = build_space_time_grid(&spec, &[4], 2).unwrap();
        assert!(MinorantParams::new([1.0, 0.0, 1.0, 1.0]).validate(&spec, &grid).is_err());
        assert!(MinorantParams::new([1.0, 1.0, 0.0, 1.0]).validate(&spec, &grid).is_err());
        assert!(MinorantParams::new([0.0, 1.0, 1.0, 1.0]).validate(&spec, &grid).is_err());
        assert!(MinorantParams::new([1.0, 1.0, 1.0, 1.0]).validate(&spec, &grid).is_ok());
    }

    #[test]
    fn dirichlet_values_are_rejected() {
        let (spec, _) = preset_problem(PresetId::Ex1).unwrap();
        let grid = build_space_time_grid(&spec, &[4], 1).unwrap();
        let mut l = vec![vec![0.0; 5]; 2];
        l[0][0] = 1.0;
        assert!(TestField::new(grid, false, l, vec![vec![0.0; 5]]).is_err());
    }
}
