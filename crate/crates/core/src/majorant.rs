//! Guaranteed upper bound of the weighted error norm
//! (2−δ)|||∇e|||² + (2−1/γ)‖√λ e‖² + ‖e(·,T)‖².

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::field::{FluxFunction, SpaceTimeField, SpaceTimeFunction};
use crate::discretization::mesh::Grid;
use crate::discretization::quadrature::{
    face_points, for_each_element_point, for_each_level_point, BasisAt, QuadPoint, SlabRule,
};
use crate::error::{Error, Result};
use crate::flux::FluxField;
use crate::problem::{BoundaryKind, EmbeddingConstants, NormWeights, ProblemSpec, ScalarFn};

/// Below this value of λ the μ/√λ channel is switched off (μ = 0).
pub const LAMBDA_FLOOR: f64 = 1e-12;
pub const BETA_MIN: f64 = 1e-8;
pub const BETA_MAX: f64 = 1e8;

/// Split of the equation residual between the reaction channel (weight μ)
/// and the Friedrichs channel (weight 1−μ).
#[derive(Clone)]
pub enum MuMode {
    Zero,
    One,
    /// Pointwise minimizer α₁cλ/(γ + α₁cλ) with c = C_F²/ν₁.
    OptimalMuHat,
    /// A user field with values in [0,1].
    Field(ScalarFn),
}

impl fmt::Debug for MuMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MuMode::Zero => "Zero",
            MuMode::One => "One",
            MuMode::OptimalMuHat => "OptimalMuHat",
            MuMode::Field(_) => "Field",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BetaPolicy {
    Fixed(f64),
    PerSlab(Vec<f64>),
    /// Balance the flux and Friedrichs terms on every slab.
    Optimal,
}

/// How the source is sampled inside a slab.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceMode {
    /// f and λv evaluated at the quadrature points.
    #[default]
    Quadrature,
    /// f and λv replaced by their linear-in-time interpolants between the
    /// slab end levels, which is what the incremental form integrates.
    Interpolated,
}

/// α₁, α₂ and (when a boundary residual is present) α₃ on one slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabAlphas {
    pub a1: f64,
    pub a2: f64,
    pub a3: Option<f64>,
}

impl SlabAlphas {
    /// α₁ = (1+1/β)/(δ(1−ω)), α₂ = (1+β)/(δ(1−ω)), α₃ = 1/(δω); without a
    /// boundary share the last is absent.
    pub fn from_beta(beta: f64, delta: f64, omega: Option<f64>) -> Self {
        let w = omega.unwrap_or(0.0);
        let s = delta * (1.0 - w);
        Self {
            a1: (1.0 + 1.0 / beta) / s,
            a2: (1.0 + beta) / s,
            a3: omega.map(|w| 1.0 / (delta * w)),
        }
    }

    pub fn check(&self, delta: f64) -> Result<()> {
        let vals = [Some(self.a1), Some(self.a2), self.a3];
        if vals.iter().flatten().any(|&a| !(a > 0.0)) {
            return Err(Error::InvalidParameter(format!("α must be positive, got {self:?}")));
        }
        let sum = 1.0 / self.a1 + 1.0 / self.a2 + self.a3.map_or(0.0, |a| 1.0 / a);
        if (sum - delta).abs() > 1e-12 * delta.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "1/α₁ + 1/α₂ + 1/α₃ = {sum} differs from δ = {delta}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MajorantParams {
    pub delta: f64,
    pub gamma: f64,
    pub mu: MuMode,
    pub beta: BetaPolicy,
    /// Explicit α triple used on every slab instead of the β rule.
    pub alphas: Option<SlabAlphas>,
    /// Boundary share ω ∈ (0,1) of δ given to α₃; chosen optimally when
    /// `None` and a boundary residual is present.
    pub boundary_share: Option<f64>,
    pub source: SourceMode,
    pub space_points: usize,
    pub time_points: usize,
    /// Alternation rounds between β and μ̂ (β-dependent μ only).
    pub rounds: usize,
}

impl Default for MajorantParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            gamma: 1.0,
            mu: MuMode::Zero,
            beta: BetaPolicy::Optimal,
            alphas: None,
            boundary_share: None,
            source: SourceMode::Quadrature,
            space_points: 3,
            time_points: 3,
            rounds: 4,
        }
    }
}

impl MajorantParams {
    pub fn validate(&self, n_slabs: usize) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 2.0) {
            return Err(Error::InvalidParameter(format!("δ must lie in (0,2], got {}", self.delta)));
        }
        if !(self.gamma >= 0.5 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!("γ must be ≥ 1/2, got {}", self.gamma)));
        }
        match &self.beta {
            BetaPolicy::Fixed(b) if !(*b > 0.0) => {
                return Err(Error::InvalidParameter(format!("β must be positive, got {b}")))
            }
            BetaPolicy::PerSlab(v) if v.len() != n_slabs => {
                return Err(Error::SizeMismatch(format!(
                    "{} β values for {n_slabs} slabs",
                    v.len()
                )))
            }
            BetaPolicy::PerSlab(v) if v.iter().any(|b| !(*b > 0.0)) => {
                return Err(Error::InvalidParameter("β must be positive".into()))
            }
            _ => {}
        }
        if let Some(w) = self.boundary_share {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::InvalidParameter(format!("ω must lie in (0,1), got {w}")));
            }
        }
        if let Some(a) = &self.alphas {
            a.check(self.delta)?;
        }
        Ok(())
    }

    /// Weights of the error norm this majorant bounds.
    pub fn norm_weights(&self) -> NormWeights {
        NormWeights::majorant(self.delta, self.gamma)
    }
}

/// The minimizer of (1+β)·d_sq + (1+1/β)·f_weighted_sq over β > 0,
/// clamped to [1e-8, 1e8].
pub fn optimal_beta(d_sq: f64, f_weighted_sq: f64) -> f64 {
    if f_weighted_sq <= 0.0 {
        return if d_sq > 0.0 { BETA_MIN } else { 1.0 };
    }
    if d_sq <= 0.0 {
        return BETA_MAX;
    }
    (f_weighted_sq / d_sq).sqrt().clamp(BETA_MIN, BETA_MAX)
}

/// Optimal boundary share for X/(1−ω) + B/ω.
fn optimal_share(x: f64, b: f64) -> f64 {
    let (sx, sb) = (x.max(0.0).sqrt(), b.max(0.0).sqrt());
    if sx + sb == 0.0 {
        0.5
    } else {
        (sb / (sx + sb)).clamp(1e-12, 1.0 - 1e-12)
    }
}

/// μ at a point for the given mode and α₁.
#[inline]
pub(crate) fn mu_at(mode: &MuMode, lam: f64, field: f64, a1c: f64, gamma: f64) -> f64 {
    if lam <= LAMBDA_FLOOR {
        return 0.0;
    }
    match mode {
        MuMode::Zero => 0.0,
        MuMode::One => 1.0,
        MuMode::OptimalMuHat => a1c * lam / (gamma + a1c * lam),
        MuMode::Field(_) => field,
    }
}

/// Pointwise weight of R_f² in the slab majorant:
/// γμ²/λ + α₁(C_F²/ν₁)(1−μ)².
#[inline]
pub(crate) fn residual_weight(mode: &MuMode, lam: f64, field: f64, a1: f64, c: f64, gamma: f64) -> f64 {
    let mu = mu_at(mode, lam, field, a1 * c, gamma);
    let react = if lam > LAMBDA_FLOOR { gamma * mu * mu / lam } else { 0.0 };
    react + a1 * c * (1.0 - mu) * (1.0 - mu)
}

/// μ̂(x,t) = cλ(1+β) / (βγ + cλ(1+β)) with c = C_F²/ν₁ (δ = 1, no boundary
/// share).
pub fn optimal_mu(spec: &ProblemSpec, constants: &EmbeddingConstants, beta: f64, gamma: f64) -> Result<ScalarFn> {
    if !(beta > 0.0 && gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "β and γ must be positive, got ({beta}, {gamma})"
        )));
    }
    let c = constants.c_f * constants.c_f / spec.diffusion.nu1;
    let reaction = spec.reaction.clone();
    Ok(std::sync::Arc::new(move |x, t| {
        let lam = reaction(x, t);
        if lam <= LAMBDA_FLOOR {
            0.0
        } else {
            c * (1.0 + beta) * lam / (beta * gamma + c * (1.0 + beta) * lam)
        }
    }))
}

/// Norm weights and minorant parameters making both bounds refer to one
/// error norm: ν̃ = √(2−δ−ϰ), θ̃² = ϰν₁/C_F², ζ̃ = 1 and
/// κ = (2(2−δ−ϰ), 2ϰν₁/C_F², 0, 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSided {
    pub weights: NormWeights,
    pub kappa: [f64; 4],
}

pub fn two_sided_weights(kappa: f64, delta: f64, constants: &EmbeddingConstants, nu1: f64) -> Result<TwoSided> {
    if !(kappa > 0.0 && kappa < 2.0 - delta) {
        return Err(Error::InvalidParameter(format!(
            "ϰ must lie in (0, 2−δ) = (0, {}), got {kappa}",
            2.0 - delta
        )));
    }
    let theta_sq = kappa * nu1 / (constants.c_f * constants.c_f);
    Ok(TwoSided {
        weights: NormWeights::new((2.0 - delta - kappa).sqrt(), theta_sq, 0.0, 1.0),
        kappa: [2.0 * (2.0 - delta - kappa), 2.0 * theta_sq, 0.0, 2.0],
    })
}

impl TwoSided {
    /// Adds the reaction part (2−1/γ)‖√λ e‖², which the majorant also
    /// controls, to both the norm and the minorant (κ₃ = 2(2−1/γ)).
    pub fn with_reaction(mut self, gamma: f64) -> Self {
        let r = (2.0 - 1.0 / gamma).max(0.0);
        self.weights.theta_sq_reaction = r;
        self.kappa[2] = 2.0 * r;
        self
    }
}

/// Terms of the majorant on one slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MajorantSlab {
    pub beta: f64,
    pub alphas: SlabAlphas,
    /// γ∫∫ μ²/λ R_f².
    pub reaction_term: f64,
    /// α₁ (C_F²/ν₁) ∫∫ (1−μ)² R_f².
    pub friedrichs_term: f64,
    /// α₂ ∫∫ |R_d|²_{A⁻¹}.
    pub flux_term: f64,
    /// α₃ (C_tr²/ν₁) ∫∫_{Γ_N} R_b².
    pub boundary_term: f64,
    /// ∫∫ |R_d|²_{A⁻¹} without weights.
    pub flux_residual_sq: f64,
    /// ∫∫ R_f² without weights.
    pub equation_residual_sq: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantBreakdown {
    /// ‖φ − v(·,0)‖².
    pub initial_term: f64,
    pub slabs: Vec<MajorantSlab>,
    pub delta: f64,
    pub gamma: f64,
    pub total: f64,
}

impl MajorantBreakdown {
    /// M̄² for the time interval (0, t^k).
    pub fn cumulative(&self, k: usize) -> f64 {
        self.initial_term + self.slabs[..k].iter().map(|s| s.total).sum::<f64>()
    }

    /// Majorant for every level 0..=K.
    pub fn per_level(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.slabs.len() + 1);
        let mut acc = self.initial_term;
        out.push(acc);
        for s in &self.slabs {
            acc += s.total;
            out.push(acc);
        }
        out
    }

    /// Cumulative (reaction, friedrichs, flux, boundary) terms up to t^k.
    pub fn cumulative_terms(&self, k: usize) -> [f64; 4] {
        let mut t = [0.0; 4];
        for s in &self.slabs[..k] {
            t[0] += s.reaction_term;
            t[1] += s.friedrichs_term;
            t[2] += s.flux_term;
            t[3] += s.boundary_term;
        }
        t
    }
}

/// Weighted residual samples of one slab from which the terms follow for
/// any α.
pub(crate) struct SlabSamples {
    /// (weight, λ, μ field value, R_f², |R_d|²_{A⁻¹})
    interior: Vec<[f64; 5]>,
    boundary_sq: f64,
}

impl SlabSamples {
    fn terms(&self, params: &MajorantParams, c: f64, a1: f64) -> (f64, f64, f64, f64) {
        let (mut react, mut fried, mut d, mut rf) = (0.0, 0.0, 0.0, 0.0);
        for &[w, lam, field, rf2, rd2] in &self.interior {
            let mu = mu_at(&params.mu, lam, field, a1 * c, params.gamma);
            if lam > LAMBDA_FLOOR {
                react += w * params.gamma * mu * mu / lam * rf2;
            }
            fried += w * c * (1.0 - mu) * (1.0 - mu) * rf2;
            d += w * rd2;
            rf += w * rf2;
        }
        (react, fried, d, rf)
    }
}

/// Data terms r₀ = f − v_t − λv (so that R_f = r₀ + div y) at a point.
#[inline]
pub(crate) fn data_residual(
    spec: &ProblemSpec,
    source: SourceMode,
    grid: &Grid,
    p: &QuadPoint,
    v: f64,
    v_t: f64,
    v_levels: Option<(f64, f64)>,
) -> f64 {
    match source {
        SourceMode::Quadrature => spec.source(&p.x, p.t) - v_t - spec.reaction(&p.x, p.t) * v,
        SourceMode::Interpolated => {
            let (t0, t1) = (grid.time.t(p.slab), grid.time.t(p.slab + 1));
            let (v0, v1) = v_levels.unwrap_or((v, v));
            let d0 = spec.source(&p.x, t0) - spec.reaction(&p.x, t0) * v0;
            let d1 = spec.source(&p.x, t1) - spec.reaction(&p.x, t1) * v1;
            (1.0 - p.s) * d0 + p.s * d1 - v_t
        }
    }
}

/// v at the slab end levels, for interpolated data. Only available for
/// fields that are linear in time.
pub trait LevelValues {
    fn end_values(&self, p: &QuadPoint) -> Option<(f64, f64)>;
}

impl LevelValues for SpaceTimeField {
    fn end_values(&self, p: &QuadPoint) -> Option<(f64, f64)> {
        Some((
            self.level_at(p.slab, p.elem, p.basis).0,
            self.level_at(p.slab + 1, p.elem, p.basis).0,
        ))
    }
}

/// Approximation accepted by the majorant: sampled values plus, optionally,
/// end-level values for interpolated data.
pub trait Approximation: SpaceTimeFunction {
    fn end_values(&self, _p: &QuadPoint) -> Option<(f64, f64)> {
        None
    }
}

impl Approximation for SpaceTimeField {
    fn end_values(&self, p: &QuadPoint) -> Option<(f64, f64)> {
        LevelValues::end_values(self, p)
    }
}

impl Approximation for crate::discretization::field::Analytic<'_> {}

/// ‖φ − v(·,0)‖² by spatial quadrature.
pub fn initial_error_sq(v: &dyn SpaceTimeFunction, spec: &ProblemSpec, grid: &Grid, points: usize) -> Result<f64> {
    let rule = SlabRule::new(&grid.mesh, points, 1)?;
    let mut acc = 0.0;
    for_each_level_point(grid, &rule.space, 0, |p| {
        let (vv, _, _) = v.eval(p);
        acc += p.weight * ((spec.initial)(&p.x, 0.0) - vv).powi(2);
    });
    Ok(acc)
}

pub(crate) fn collect_samples(
    v: &dyn Approximation,
    y: &dyn FluxFunction,
    spec: &ProblemSpec,
    grid: &Grid,
    params: &MajorantParams,
    rule: &SlabRule,
    faces: &[(usize, BasisAt, [f64; 2])],
    k: usize,
) -> SlabSamples {
    let dim = grid.mesh.dim();
    let mut interior = Vec::with_capacity(grid.mesh.n_elements() * rule.space.points.len() * rule.time.len());
    for e in 0..grid.mesh.n_elements() {
        for_each_element_point(grid, rule, k, e, |p| {
            let (vv, gv, vt) = v.eval(p);
            let (yy, dy) = y.eval_flux(p);
            let r0 = data_residual(spec, params.source, grid, p, vv, vt, v.end_values(p));
            let rf = r0 + dy;
            let agv = spec.diffusion.apply(&p.x, p.t, &gv);
            let rd = [yy[0] - agv[0], yy[1] - agv[1]];
            let rd2 = if spec.diffusion.is_identity() {
                rd[0] * rd[0] + rd[1] * rd[1]
            } else {
                let ai = spec.diffusion.inverse(&p.x, p.t, dim);
                rd[0] * (ai[0][0] * rd[0] + ai[0][1] * rd[1])
                    + rd[1] * (ai[1][0] * rd[0] + ai[1][1] * rd[1])
            };
            let lam = spec.reaction(&p.x, p.t);
            let field = match &params.mu {
                MuMode::Field(f) => f(&p.x, p.t),
                _ => 0.0,
            };
            interior.push([p.weight, lam, field, rf * rf, rd2]);
        });
    }
    let mut boundary_sq = 0.0;
    let (t0, tau) = (grid.time.t(k), grid.time.tau(k));
    for (e, b, n) in faces {
        for (s, ws) in rule.time.nodes.iter().zip(&rule.time.weights) {
            let t = t0 + s * tau;
            let p = QuadPoint {
                x: grid.mesh.map(*e, &b.xi),
                t,
                elem: *e,
                slab: k,
                s: *s,
                tau,
                weight: ws * tau * b.weight,
                basis: b,
            };
            let (yy, _) = y.eval_flux(&p);
            let rb = (spec.neumann)(&p.x, t) - (yy[0] * n[0] + yy[1] * n[1]);
            boundary_sq += p.weight * rb * rb;
        }
    }
    SlabSamples { interior, boundary_sq }
}

/// Neumann boundary quadrature points with outward normals.
pub(crate) fn neumann_points(grid: &Grid, points: usize) -> Result<Vec<(usize, BasisAt, [f64; 2])>> {
    let mut out = Vec::new();
    let dom = grid.mesh.domain();
    for &f in dom.faces() {
        if dom.kind(f) == BoundaryKind::Neumann {
            for (e, b) in face_points(&grid.mesh, f, points)? {
                out.push((e, b, f.outward_normal()));
            }
        }
    }
    Ok(out)
}

pub(crate) fn evaluate_slab(
    samples: &SlabSamples,
    params: &MajorantParams,
    constants: &EmbeddingConstants,
    nu1: f64,
    k: usize,
) -> Result<MajorantSlab> {
    let c = constants.c_f * constants.c_f / nu1;
    let has_boundary = samples.boundary_sq > 0.0;
    let b_weighted = if has_boundary {
        let ctr = constants.c_tr.ok_or_else(|| {
            Error::UnsupportedGeometry("boundary residual present but no trace constant".into())
        })?;
        ctr * ctr / nu1 * samples.boundary_sq
    } else {
        0.0
    };
    let delta = params.delta;
    let alphas = if let Some(a) = params.alphas {
        if has_boundary && a.a3.is_none() {
            return Err(Error::InvalidParameter(
                "boundary residual is nonzero but α₃ is absent".into(),
            ));
        }
        a
    } else {
        let fixed_beta = match &params.beta {
            BetaPolicy::Fixed(b) => Some(*b),
            BetaPolicy::PerSlab(v) => Some(v[k]),
            BetaPolicy::Optimal => None,
        };
        let mut beta = fixed_beta.unwrap_or(1.0);
        let mut omega = if has_boundary {
            Some(params.boundary_share.unwrap_or(0.5))
        } else {
            None
        };
        let depends_on_alpha = matches!(params.mu, MuMode::OptimalMuHat);
        let rounds = if depends_on_alpha { params.rounds.max(1) } else { 1 };
        for _ in 0..rounds {
            let a = SlabAlphas::from_beta(beta, delta, omega);
            let (_, fried, d, _) = samples.terms(params, c, a.a1);
            if fixed_beta.is_none() {
                beta = optimal_beta(d, fried);
            }
            if has_boundary && params.boundary_share.is_none() {
                let x = ((1.0 + 1.0 / beta) * fried + (1.0 + beta) * d) / delta;
                omega = Some(optimal_share(x, b_weighted / delta));
            }
        }
        SlabAlphas::from_beta(beta, delta, omega)
    };
    alphas.check(delta)?;
    let (react, fried, d, rf) = samples.terms(params, c, alphas.a1);
    let friedrichs_term = alphas.a1 * fried;
    let flux_term = alphas.a2 * d;
    let boundary_term = alphas.a3.map_or(0.0, |a| a * b_weighted);
    let beta = alphas.a2 / alphas.a1;
    Ok(MajorantSlab {
        beta,
        alphas,
        reaction_term: react,
        friedrichs_term,
        flux_term,
        boundary_term,
        flux_residual_sq: d,
        equation_residual_sq: rf,
        total: react + friedrichs_term + flux_term + boundary_term,
    })
}

/// Majorant by space-time quadrature of all residual terms.
pub fn majorant_general(
    v: &dyn Approximation,
    y: &dyn FluxFunction,
    spec: &ProblemSpec,
    grid: &Grid,
    constants: &EmbeddingConstants,
    params: &MajorantParams,
) -> Result<MajorantBreakdown> {
    params.validate(grid.time.n_slabs())?;
    if let MuMode::Field(f) = &params.mu {
        check_mu_field(f, grid)?;
    }
    let rule = SlabRule::new(&grid.mesh, params.space_points, params.time_points)?;
    let faces = neumann_points(grid, params.space_points)?;
    let initial_term = initial_error_sq(v, spec, grid, params.space_points.max(4))?;
    let nu1 = spec.diffusion.nu1;
    let slabs = (0..grid.time.n_slabs())
        .into_par_iter()
        .map(|k| {
            let samples = collect_samples(v, y, spec, grid, params, &rule, &faces, k);
            evaluate_slab(&samples, params, constants, nu1, k)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = initial_term + slabs.iter().map(|s| s.total).sum::<f64>();
    Ok(MajorantBreakdown {
        initial_term,
        slabs,
        delta: params.delta,
        gamma: params.gamma,
        total,
    })
}

fn check_mu_field(f: &ScalarFn, grid: &Grid) -> Result<()> {
    let mesh = &grid.mesh;
    for &t in grid.time.levels() {
        for n in 0..mesh.n_nodes() {
            let m = f(&mesh.node_coords(n), t);
            if !(0.0..=1.0).contains(&m) {
                return Err(Error::InvalidParameter(format!("μ = {m} outside [0,1]")));
            }
        }
    }
    Ok(())
}

/// Majorant per level from the closed-form slab formula
/// (τ/3){(1+β)∫(|R_d^k|² + R_d^k·R_d^{k+1} + |R_d^{k+1}|²)
///       + C_F²(1+1/β)∫((R_f^k)² + R_f^k R_f^{k+1} + (R_f^{k+1})²)},
/// accumulated from ‖φ − v⁰‖². Entry k is the bound on (0, t^k).
///
/// Requires A = I and a pure Dirichlet boundary; λ is sampled at the slab
/// end levels.
pub fn majorant_incremental(
    v: &SpaceTimeField,
    y: &FluxField,
    spec: &ProblemSpec,
    constants: &EmbeddingConstants,
    betas: &[f64],
    space_points: usize,
) -> Result<Vec<f64>> {
    if !spec.diffusion.is_identity() {
        return Err(Error::NotIncremental("diffusion matrix is not the identity".into()));
    }
    if spec.domain.has_neumann() {
        return Err(Error::NotIncremental("Neumann faces are present".into()));
    }
    let grid = &v.grid;
    if betas.len() != grid.time.n_slabs() || y.slabs.len() != grid.time.n_slabs() {
        return Err(Error::SizeMismatch(format!(
            "{} β values and {} flux slabs for {} slabs",
            betas.len(),
            y.slabs.len(),
            grid.time.n_slabs()
        )));
    }
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0)) {
        return Err(Error::InvalidParameter(format!("β must be positive, got {b}")));
    }
    let rule = SlabRule::new(&grid.mesh, space_points, 1)?;
    let initial = initial_error_sq(v, spec, grid, space_points.max(4))?;
    let cf2 = constants.c_f * constants.c_f;
    let slabs: Vec<f64> = (0..grid.time.n_slabs())
        .into_par_iter()
        .map(|k| {
            let tau = grid.time.tau(k);
            let (t0, t1) = (grid.time.t(k), grid.time.t(k + 1));
            let (mut dd, mut ff) = (0.0, 0.0);
            for e in 0..grid.mesh.n_elements() {
                for b in &rule.space.points {
                    let x = grid.mesh.map(e, &b.xi);
                    let w = b.weight * rule.space.volume;
                    let (v0, g0) = v.level_at(k, e, b);
                    let (v1, g1) = v.level_at(k + 1, e, b);
                    let vt = (v1 - v0) / tau;
                    let (y0, dy0) = y.slab_level(k, 0, e, b);
                    let (y1, dy1) = y.slab_level(k, 1, e, b);
                    let rd0 = [y0[0] - g0[0], y0[1] - g0[1]];
                    let rd1 = [y1[0] - g1[0], y1[1] - g1[1]];
                    let rf0 = spec.source(&x, t0) - vt - spec.reaction(&x, t0) * v0 + dy0;
                    let rf1 = spec.source(&x, t1) - vt - spec.reaction(&x, t1) * v1 + dy1;
                    dd += w
                        * (rd0[0] * rd0[0] + rd0[1] * rd0[1]
                            + rd0[0] * rd1[0] + rd0[1] * rd1[1]
                            + rd1[0] * rd1[0] + rd1[1] * rd1[1]);
                    ff += w * (rf0 * rf0 + rf0 * rf1 + rf1 * rf1);
                }
            }
            let beta = betas[k];
            tau / 3.0 * ((1.0 + beta) * dd + cf2 * (1.0 + 1.0 / beta) * ff)
        })
        .collect();
    let mut out = Vec::with_capacity(slabs.len() + 1);
    let mut acc = initial;
    out.push(acc);
    for s in slabs {
        acc += s;
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn optimal_beta_examples() {
        assert_eq!(optimal_beta(1.0, 1.0), 1.0);
        assert_eq!(optimal_beta(1.0, 4.0), 2.0);
        let obj = |b: f64| (1.0 + b) * 1.0 + (1.0 + 1.0 / b) * 4.0;
        assert_eq!(obj(2.0), 9.0);
        assert_eq!(obj(1.0), 10.0);
        assert!((obj(3.0) - 28.0 / 3.0).abs() < 1e-14);
        assert_eq!(optimal_beta(1.0, 0.0), BETA_MIN);
        assert_eq!(optimal_beta(0.0, 1.0), BETA_MAX);
    }

    #[test]
    fn alphas_from_beta_satisfy_relation() {
        for &(b, d, w) in &[(1.0, 1.0, None), (0.3, 0.5, Some(0.2)), (7.0, 1.5, Some(0.9))] {
            SlabAlphas::from_beta(b, d, w).check(d).unwrap();
        }
        let bad = SlabAlphas {
            a1: 2.0,
            a2: 3.0,
            a3: None,
        };
        assert!(bad.check(1.0).is_err());
    }

    #[test]
    fn mu_hat_example_value() {
        let c = 1.0 / (PI * PI);
        let a1 = 2.0; // β = 1, δ = 1
        let mu = mu_at(&MuMode::OptimalMuHat, 1.0, 0.0, a1 * c, 1.0);
        let expect = (2.0 / (PI * PI)) / (1.0 + 2.0 / (PI * PI));
        assert!((mu - expect).abs() < 1e-15);
        assert!((mu - 0.16852).abs() < 5e-5);
        assert_eq!(mu_at(&MuMode::OptimalMuHat, 0.0, 0.0, a1 * c, 1.0), 0.0);
        assert!(mu_at(&MuMode::OptimalMuHat, 1e12, 0.0, a1 * c, 1.0) > 1.0 - 1e-9);
    }

    #[test]
    fn two_sided_limits_and_range() {
        let c = EmbeddingConstants {
            c_f: 1.0 / PI,
            c_tr: None,
        };
        let t = two_sided_weights(1e-12, 1.0, &c, 1.0).unwrap();
        assert!((t.weights.nu - 1.0).abs() < 1e-9);
        assert!(t.weights.theta_sq_const < 1e-9);
        assert!((t.kappa[0] - 2.0).abs() < 1e-9 && t.kappa[1] < 1e-9 && t.kappa[3] == 2.0);
        assert!(two_sided_weights(1.0, 1.0, &c, 1.0).is_err());
        assert!(two_sided_weights(0.0, 1.0, &c, 1.0).is_err());
        let t = two_sided_weights(0.5, 1.0, &c, 1.0).unwrap().with_reaction(1.0);
        assert!((t.weights.nu - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((t.weights.theta_sq_const - 0.5 * PI * PI).abs() < 1e-12);
        assert_eq!(t.kappa[2], 2.0);
    }
}
