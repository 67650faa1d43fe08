//! Continuous problem data, manufactured-solution presets, embedding
//! constants and weighted error norms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in space. One-dimensional problems use `x[0]` and leave `x[1] = 0`.
pub type Point = [f64; 2];
pub type Vector = [f64; 2];
pub type Tensor = [[f64; 2]; 2];

pub type ScalarFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&Point, f64) -> Vector + Send + Sync>;
pub type TensorFn = Arc<dyn Fn(&Point, f64) -> Tensor + Send + Sync>;

pub fn scalar_fn(f: impl Fn(&Point, f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(f)
}

pub fn vector_fn(f: impl Fn(&Point, f64) -> Vector + Send + Sync + 'static) -> VectorFn {
    Arc::new(f)
}

pub fn zero_fn() -> ScalarFn {
    Arc::new(|_, _| 0.0)
}

/// Faces of the box: `Left`/`Right` are x = 0 and x = L₁, `Bottom`/`Top`
/// are y = 0 and y = L₂ (2D only).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    Left,
    Right,
    Bottom,
    Top,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::Left, Face::Right, Face::Bottom, Face::Top];

    pub fn axis(self) -> usize {
        match self {
            Face::Left | Face::Right => 0,
            Face::Bottom | Face::Top => 1,
        }
    }

    pub fn is_upper(self) -> bool {
        matches!(self, Face::Right | Face::Top)
    }

    pub fn opposite(self) -> Face {
        match self {
            Face::Left => Face::Right,
            Face::Right => Face::Left,
            Face::Bottom => Face::Top,
            Face::Top => Face::Bottom,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn outward_normal(self) -> Vector {
        match self {
            Face::Left => [-1.0, 0.0],
            Face::Right => [1.0, 0.0],
            Face::Bottom => [0.0, -1.0],
            Face::Top => [0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundaryKind {
    Dirichlet,
    Neumann,
}

/// Axis-aligned box (0,L₁) or (0,L₁)×(0,L₂) with a boundary tag per face.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lengths: [f64; 2],
    kinds: [BoundaryKind; 4],
}

impl BoxDomain {
    pub fn interval(length: f64, left: BoundaryKind, right: BoundaryKind) -> Self {
        Self {
            dim: 1,
            lengths: [length, 0.0],
            kinds: [left, right, BoundaryKind::Dirichlet, BoundaryKind::Dirichlet],
        }
    }

    pub fn unit_interval() -> Self {
        Self::interval(1.0, BoundaryKind::Dirichlet, BoundaryKind::Dirichlet)
    }

    /// Face kinds in the order left, right, bottom, top.
    pub fn rectangle(l1: f64, l2: f64, kinds: [BoundaryKind; 4]) -> Self {
        Self {
            dim: 2,
            lengths: [l1, l2],
            kinds,
        }
    }

    pub fn unit_square() -> Self {
        Self::rectangle(1.0, 1.0, [BoundaryKind::Dirichlet; 4])
    }

    pub fn faces(&self) -> &'static [Face] {
        if self.dim == 1 {
            &Face::ALL[..2]
        } else {
            &Face::ALL
        }
    }

    pub fn kind(&self, face: Face) -> BoundaryKind {
        self.kinds[face.index()]
    }

    pub fn set_kind(&mut self, face: Face, kind: BoundaryKind) {
        self.kinds[face.index()] = kind;
    }

    pub fn measure(&self) -> f64 {
        self.lengths[..self.dim].iter().product()
    }

    pub fn has_neumann(&self) -> bool {
        self.faces()
            .iter()
            .any(|&f| self.kind(f) == BoundaryKind::Neumann)
    }

    pub fn has_dirichlet(&self) -> bool {
        self.faces()
            .iter()
            .any(|&f| self.kind(f) == BoundaryKind::Dirichlet)
    }
}

/// Symmetric diffusion matrix A(x,t) with declared spectral bounds.
#[derive(Clone)]
pub struct Diffusion {
    eval: TensorFn,
    pub nu1: f64,
    pub nu2: f64,
    identity: bool,
    time_dependent: bool,
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Diffusion")
            .field("nu1", &self.nu1)
            .field("nu2", &self.nu2)
            .field("identity", &self.identity)
            .field("time_dependent", &self.time_dependent)
            .finish()
    }
}

impl Diffusion {
    pub fn identity() -> Self {
        Self {
            eval: Arc::new(|_, _| [[1.0, 0.0], [0.0, 1.0]]),
            nu1: 1.0,
            nu2: 1.0,
            identity: true,
            time_dependent: false,
        }
    }

    pub fn new(
        eval: impl Fn(&Point, f64) -> Tensor + Send + Sync + 'static,
        nu1: f64,
        nu2: f64,
        time_dependent: bool,
    ) -> Self {
        Self {
            eval: Arc::new(eval),
            nu1,
            nu2,
            identity: false,
            time_dependent,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn eval(&self, x: &Point, t: f64) -> Tensor {
        (self.eval)(x, t)
    }

    pub fn apply(&self, x: &Point, t: f64, v: &Vector) -> Vector {
        if self.identity {
            return *v;
        }
        let a = self.eval(x, t);
        [
            a[0][0] * v[0] + a[0][1] * v[1],
            a[1][0] * v[0] + a[1][1] * v[1],
        ]
    }

    /// A⁻¹ of the 2×2 matrix (1D callers only use the `[0][0]` entry).
    pub fn inverse(&self, x: &Point, t: f64, dim: usize) -> Tensor {
        let a = self.eval(x, t);
        if dim == 1 {
            return [[1.0 / a[0][0], 0.0], [0.0, 0.0]];
        }
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        [
            [a[1][1] / det, -a[0][1] / det],
            [-a[1][0] / det, a[0][0] / det],
        ]
    }
}

/// Data of u_t − div(A∇u) + λu = f in Ω×(0,T), u = 0 on the Dirichlet part,
/// A∇u·n = g on the Neumann part, u(·,0) = φ.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub domain: BoxDomain,
    pub t_final: f64,
    pub diffusion: Diffusion,
    pub reaction: ScalarFn,
    pub reaction_time_dependent: bool,
    pub source: ScalarFn,
    pub initial: ScalarFn,
    pub neumann: ScalarFn,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("t_final", &self.t_final)
            .field("diffusion", &self.diffusion)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn reaction(&self, x: &Point, t: f64) -> f64 {
        (self.reaction)(x, t)
    }

    pub fn source(&self, x: &Point, t: f64) -> f64 {
        (self.source)(x, t)
    }

    /// Checks the coefficient invariants on a tensor sample grid of
    /// `samples` points per direction (space and time).
    pub fn validate(&self, samples: usize) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidProblem(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        let d = self.domain.dim;
        if d != 1 && d != 2 {
            return Err(Error::UnsupportedGeometry(format!("dimension {d}")));
        }
        if self.domain.lengths[..d].iter().any(|&l| !(l > 0.0)) {
            return Err(Error::InvalidProblem("side lengths must be positive".into()));
        }
        if !self.domain.has_dirichlet() {
            return Err(Error::InvalidProblem(
                "at least one face must be Dirichlet".into(),
            ));
        }
        let (nu1, nu2) = (self.diffusion.nu1, self.diffusion.nu2);
        if !(nu1 > 0.0 && nu1 <= nu2 && nu2.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "spectral bounds must satisfy 0 < ν₁ ≤ ν₂ < ∞, got ({nu1}, {nu2})"
            )));
        }
        let n = samples.max(2);
        let ny = if d == 2 { n } else { 1 };
        for it in 0..n {
            let t = self.t_final * it as f64 / (n - 1) as f64;
            for iy in 0..ny {
                for ix in 0..n {
                    let x = [
                        self.domain.lengths[0] * ix as f64 / (n - 1) as f64,
                        if d == 2 {
                            self.domain.lengths[1] * iy as f64 / (n - 1) as f64
                        } else {
                            0.0
                        },
                    ];
                    let lam = self.reaction(&x, t);
                    if !(lam >= 0.0) {
                        return Err(Error::InvalidProblem(format!(
                            "reaction must be nonnegative, λ({x:?}, {t}) = {lam}"
                        )));
                    }
                    if !self.diffusion.is_identity() {
                        check_spectrum(&self.diffusion.eval(&x, t), d, nu1, nu2).map_err(
                            |msg| Error::InvalidProblem(format!("A at ({x:?}, {t}): {msg}")),
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_spectrum(a: &Tensor, d: usize, nu1: f64, nu2: f64) -> std::result::Result<(), String> {
    let tol = 1e-12 * nu2.max(1.0);
    let (lo, hi) = if d == 1 {
        (a[0][0], a[0][0])
    } else {
        if (a[0][1] - a[1][0]).abs() > tol {
            return Err("matrix is not symmetric".into());
        }
        let tr = a[0][0] + a[1][1];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        (0.5 * tr - disc, 0.5 * tr + disc)
    };
    if lo < nu1 - tol || hi > nu2 + tol {
        return Err(format!(
            "eigenvalues [{lo}, {hi}] outside declared bounds [{nu1}, {nu2}]"
        ));
    }
    Ok(())
}

/// Exact solution with hand-coded derivatives.
#[derive(Clone)]
pub struct ExactSolution {
    pub id: String,
    pub u: ScalarFn,
    pub grad: VectorFn,
    pub u_t: ScalarFn,
    /// div(A∇u), used to check the manufactured residual.
    pub div_flux: ScalarFn,
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExactSolution").field("id", &self.id).finish_non_exhaustive()
    }
}

impl ExactSolution {
    pub fn u(&self, x: &Point, t: f64) -> f64 {
        (self.u)(x, t)
    }

    pub fn grad(&self, x: &Point, t: f64) -> Vector {
        (self.grad)(x, t)
    }

    /// Pointwise u_t − div(A∇u) + λu − f.
    pub fn residual(&self, spec: &ProblemSpec, x: &Point, t: f64) -> f64 {
        (self.u_t)(x, t) - (self.div_flux)(x, t) + spec.reaction(x, t) * self.u(x, t)
            - spec.source(x, t)
    }
}

/// Preset identifiers. The textual form (`ex1`, `ex1-gaussian:0.05`,
/// `ex2:1e-3`, `ex3`, `ex3:0.1`, `ex4`, `ex5`, `trivial`) is what configs
/// and the CLI use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PresetId {
    Ex1,
    Ex1Gaussian { sigma: f64 },
    Ex2 { rho: f64 },
    Ex3 { sigma: Option<f64> },
    Ex4,
    Ex5,
    /// Zero data on the unit interval; the exact solution is u ≡ 0.
    Trivial,
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PresetId::Ex1 => write!(f, "ex1"),
            PresetId::Ex1Gaussian { sigma } => write!(f, "ex1-gaussian:{sigma}"),
            PresetId::Ex2 { rho } => write!(f, "ex2:{rho}"),
            PresetId::Ex3 { sigma: None } => write!(f, "ex3"),
            PresetId::Ex3 { sigma: Some(s) } => write!(f, "ex3:{s}"),
            PresetId::Ex4 => write!(f, "ex4"),
            PresetId::Ex5 => write!(f, "ex5"),
            PresetId::Trivial => write!(f, "trivial"),
        }
    }
}

impl FromStr for PresetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let param = |what: &str| -> Result<f64> {
            let raw = arg.ok_or_else(|| {
                Error::UnknownPreset(format!("{s} (missing {what} parameter)"))
            })?;
            raw.parse::<f64>()
                .map_err(|_| Error::UnknownPreset(format!("{s} (bad {what} `{raw}`)")))
        };
        let id = match name {
            "ex1" if arg.is_none() => PresetId::Ex1,
            "ex1-gaussian" | "ex1gaussian" => PresetId::Ex1Gaussian {
                sigma: param("sigma")?,
            },
            "ex2" => PresetId::Ex2 { rho: param("rho")? },
            "ex3" => PresetId::Ex3 {
                sigma: match arg {
                    Some(_) => Some(param("sigma")?),
                    None => None,
                },
            },
            "ex4" if arg.is_none() => PresetId::Ex4,
            "ex5" if arg.is_none() => PresetId::Ex5,
            "trivial" if arg.is_none() => PresetId::Trivial,
            _ => return Err(Error::UnknownPreset(s.clone())),
        };
        Ok(id)
    }
}

impl TryFrom<String> for PresetId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PresetId> for String {
    fn from(id: PresetId) -> String {
        id.to_string()
    }
}

impl PresetId {
    pub fn dim(&self) -> usize {
        match self {
            PresetId::Ex4 | PresetId::Ex5 => 2,
            _ => 1,
        }
    }
}

fn gaussian(sigma: f64) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
    move |x: f64| (-(x - 0.5).powi(2) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt())
}

/// Builds the problem data and exact solution for a preset.
pub fn preset_problem(id: PresetId) -> Result<(ProblemSpec, ExactSolution)> {
    match id {
        PresetId::Ex1Gaussian { sigma } | PresetId::Ex3 { sigma: Some(sigma) }
            if !(sigma > 0.0 && sigma.is_finite()) =>
        {
            return Err(Error::InvalidParameter(format!(
                "σ_λ must be positive, got {sigma}"
            )));
        }
        PresetId::Ex2 { rho } if !(rho > 0.0 && rho.is_finite()) => {
            return Err(Error::InvalidParameter(format!("ρ must be positive, got {rho}")));
        }
        _ => {}
    }
    let name = id.to_string();
    let dirichlet = BoundaryKind::Dirichlet;
    let out = match id {
        PresetId::Ex1 => {
            let p = |t: f64| t * t + t + 1.0;
            let spec = ProblemSpec {
                name: name.clone(),
                domain: BoxDomain::unit_interval(),
                t_final: 10.0,
                diffusion: Diffusion::identity(),
                reaction: zero_fn(),
                reaction_time_dependent: false,
                source: scalar_fn(|x, t| {
                    let x = x[0];
                    2.0 * t * (1.0 + t) - x * (2.0 * t + 1.0) * (x - 1.0) + 2.0
                }),
                initial: scalar_fn(|x, _| x[0] * (1.0 - x[0])),
                neumann: zero_fn(),
            };
            let exact = ExactSolution {
                id: name,
                u: scalar_fn(move |x, t| x[0] * (1.0 - x[0]) * p(t)),
                grad: vector_fn(move |x, t| [(1.0 - 2.0 * x[0]) * p(t), 0.0]),
                u_t: scalar_fn(|x, t| x[0] * (1.0 - x[0]) * (2.0 * t + 1.0)),
                div_flux: scalar_fn(move |_, t| -2.0 * p(t)),
            };
            (spec, exact)
        }
        PresetId::Ex1Gaussian { sigma } => {
            let p = |t: f64| t * t + t + 1.0;
            let lam = gaussian(sigma);
            let spec = ProblemSpec {
                name: name.clone(),
                domain: BoxDomain::unit_interval(),
                t_final: 10.0,
                diffusion: Diffusion::identity(),
                reaction: scalar_fn(move |x, _| lam(x[0])),
                reaction_time_dependent: false,
                source: scalar_fn(move |x, t| {
                    let x = x[0];
                    x * (1.0 - x) * (2.0 * t + 1.0) + (lam(x) * x * (1.0 - x) + 2.0) * p(t)
                }),
                initial: scalar_fn(|x, _| x[0] * (1.0 - x[0])),
                neumann: zero_fn(),
            };
            let exact = ExactSolution {
                id: name,
                u: scalar_fn(move |x, t| x[0] * (1.0 - x[0]) * p(t)),
                grad: vector_fn(move |x, t| [(1.0 - 2.0 * x[0]) * p(t), 0.0]),
                u_t: scalar_fn(|x, t| x[0] * (1.0 - x[0]) * (2.0 * t + 1.0)),
                div_flux: scalar_fn(move |_, t| -2.0 * p(t)),
            };
            (spec, exact)
        }
        PresetId::Ex2 { rho } => {
            let lam = move |x: f64, t: f64| rho * (t * t + 1.0) * (x + 1e-3);
            let w = 3.0 * PI;
            let spec = ProblemSpec {
                name: name.clone(),
                domain: BoxDomain::unit_interval(),
                t_final: 10.0,
                diffusion: Diffusion::identity(),
                reaction: scalar_fn(move |x, t| lam(x[0], t)),
                reaction_time_dependent: true,
                source: scalar_fn(move |x, t| {
                    let x = x[0];
                    t.exp() * (x * (1.0 + w * w) * (w * x).sin() - 2.0 * w * (w * x).cos())
                        + lam(x, t) * x * (w * x).sin() * t.exp()
                }),
                initial: scalar_fn(move |x, _| x[0] * (w * x[0]).sin()),
                neumann: zero_fn(),
            };
            let exact = ExactSolution {
                id: name,
                u: scalar_fn(move |x, t| x[0] * (w * x[0]).sin() * t.exp()),
                grad: vector_fn(move |x, t| {
                    let x = x[0];
                    [((w * x).sin() + w * x * (w * x).cos()) * t.exp(), 0.0]
                }),
                u_t: scalar_fn(move |x, t| x[0] * (w * x[0]).sin() * t.exp()),
                div_flux: scalar_fn(move |x, t| {
                    let x = x[0];
                    (2.0 * w * (w * x).cos() - w * w * x * (w * x).sin()) * t.exp()
                }),
            };
            (spec, exact)
        }
        PresetId::Ex3 { sigma } => {
            let s = |x: f64| (PI * x).sin() * ((PI * x).cos() + 1.0);
            let ds = |x: f64| PI * ((PI * x).cos() + (2.0 * PI * x).cos());
            let dds = |x: f64| -PI * PI * ((PI * x).sin() + 2.0 * (2.0 * PI * x).sin());
            let q = |t: f64| t * t.cos() + 1.0;
            let dq = |t: f64| t.cos() - t * t.sin();
            let lam: Arc<dyn Fn(f64) -> f64 + Send + Sync> = match sigma {
                Some(sg) => Arc::new(gaussian(sg)),
                None => Arc::new(|_| 0.0),
            };
            let lam_r = lam.clone();
            let lam_f = lam;
            let spec = ProblemSpec {
                name: name.clone(),
                domain: BoxDomain::interval(1.0, dirichlet, BoundaryKind::Neumann),
                t_final: 10.0,
                diffusion: Diffusion::identity(),
                reaction: scalar_fn(move |x, _| lam_r(x[0])),
                reaction_time_dependent: false,
                source: scalar_fn(move |x, t| {
                    let x = x[0];
                    s(x) * dq(t) + PI * PI * ((PI * x).sin() + 2.0 * (2.0 * PI * x).sin()) * q(t)
                        + lam_f(x) * s(x) * q(t)
                }),
                initial: scalar_fn(move |x, _| s(x[0])),
                neumann: zero_fn(),
            };
            let exact = ExactSolution {
                id: name,
                u: scalar_fn(move |x, t| s(x[0]) * q(t)),
                grad: vector_fn(move |x, t| [ds(x[0]) * q(t), 0.0]),
                u_t: scalar_fn(move |x, t| s(x[0]) * dq(t)),
                div_flux: scalar_fn(move |x, t| dds(x[0]) * q(t)),
            };
            (spec, exact)
        }
        PresetId::Ex4 => {
            let xs = |x: &Point| {
                (PI * x[0]).sin() * (3.0 * PI * x[1]).sin()
                    + (3.0 * PI * x[0]).sin() * (PI * x[1]).sin()
            };
            let gx = |x: &Point| {
                [
                    PI * (PI * x[0]).cos() * (3.0 * PI * x[1]).sin()
                        + 3.0 * PI * (3.0 * PI * x[0]).cos() * (PI * x[1]).sin(),
                    3.0 * PI * (PI * x[0]).sin() * (3.0 * PI * x[1]).cos()
                        + PI * (3.0 * PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            };
            let p = |t: f64| t.powi(3) + t.sin() + 1.0;
            let k2 = 10.0 * PI * PI;
            let spec = ProblemSpec {
                name: name.clone(),
                domain: BoxDomain::unit_square(),
                t_final: 1.0,
                diffusion: Diffusion::identity(),
                reaction: zero_fn(),
                reaction_time_dependent: false,
                source: scalar_fn(move |x, t| {
                    xs(x) * (t.cos() + k2 * t.sin() + k2 * t.powi(3) + 3.0 * t * t + k2)
                }),
                initial: scalar_fn(move |x, _| xs(x)),
                neumann: zero_fn(),
            };
            let exact = ExactSolution {
                id: name,
                u: scalar_fn(move |x, t| xs(x) * p(t)),
                grad: vector_fn(move |x, t| {
                    let g = gx(x);
                    [g[0] * p(t), g[1] * p(t)]
                }),
                u_t: scalar_fn(move |x, t| xs(x) * (3.0 * t * t + t.cos())),
                div_flux: scalar_fn(move |x, t| -k2 * xs(x) * p(t)),
            };
            (spec, exact)
        }
        PresetId::Ex5 => {
            let y1 = |x: &Point| (PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
            let y2 = |x: &Point| (2.0 * PI * x[0]).sin() * (PI * x[1]).sin();
            let g1 = |x: &Point| {
                [
                    PI * (PI * x[0]).cos() * (2.0 * PI * x[1]).sin(),
                    2.0 * PI * (PI * x[0]).sin() * (2.0 * PI * x[1]).cos(),
                ]
            };
            let g2 = |x: &Point| {
                [
                    2.0 * PI * (2.0 * PI * x[0]).cos() * (PI * x[1]).sin(),
                    PI * (2.0 * PI * x[0]).sin() * (PI * x[1]).cos(),
                ]
            };
            let p1 = |t: f64| t * t.sin() + 1.0;
            let p2 = |t: f64| t.cos() + t.sin();
            let k2 = 5.0 * PI * PI;
            let spec = ProblemSpec {
                name: name.clone(),
                domain: BoxDomain::unit_square(),
                t_final: 10.0,
                diffusion: Diffusion::identity(),
                reaction: zero_fn(),
                reaction_time_dependent: false,
                source: scalar_fn(move |x, t| {
                    let (c, s) = (t.cos(), t.sin());
                    y2(x) * (c - s + k2 * (c + s)) + y1(x) * (s + t * c + k2 * (t * s + 1.0))
                }),
                initial: scalar_fn(move |x, _| y1(x) + y2(x)),
                neumann: zero_fn(),
            };
            let exact = ExactSolution {
                id: name,
                u: scalar_fn(move |x, t| y1(x) * p1(t) + y2(x) * p2(t)),
                grad: vector_fn(move |x, t| {
                    let (a, b) = (g1(x), g2(x));
                    [a[0] * p1(t) + b[0] * p2(t), a[1] * p1(t) + b[1] * p2(t)]
                }),
                u_t: scalar_fn(move |x, t| {
                    y1(x) * (t.sin() + t * t.cos()) + y2(x) * (t.cos() - t.sin())
                }),
                div_flux: scalar_fn(move |x, t| -k2 * (y1(x) * p1(t) + y2(x) * p2(t))),
            };
            (spec, exact)
        }
        PresetId::Trivial => {
            let spec = ProblemSpec {
                name: name.clone(),
                domain: BoxDomain::unit_interval(),
                t_final: 1.0,
                diffusion: Diffusion::identity(),
                reaction: zero_fn(),
                reaction_time_dependent: false,
                source: zero_fn(),
                initial: zero_fn(),
                neumann: zero_fn(),
            };
            let exact = ExactSolution {
                id: name,
                u: zero_fn(),
                grad: vector_fn(|_, _| [0.0, 0.0]),
                u_t: zero_fn(),
                div_flux: zero_fn(),
            };
            (spec, exact)
        }
    };
    Ok(out)
}

/// Friedrichs and trace constants of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstants {
    pub c_f: f64,
    pub c_tr: Option<f64>,
}

/// User-supplied constants that take precedence over the closed forms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantOverrides {
    pub c_f: Option<f64>,
    pub c_tr: Option<f64>,
}

pub fn embedding_constants(spec: &ProblemSpec) -> Result<EmbeddingConstants> {
    embedding_constants_with(spec, ConstantOverrides::default())
}

/// Closed-form constants for boxes with per-face Dirichlet/Neumann tags.
///
/// The smallest eigenvalue of −Δ on a box separates by axis: an axis with
/// Dirichlet on both ends contributes (π/L)², Dirichlet on one end
/// (π/2L)², and Neumann on both ends 0.
///
/// For the trace constant, a Neumann face whose opposite face is Dirichlet
/// satisfies ∫_face w² ≤ L ∫|∂w|², so C_tr² = max L over Neumann faces.
pub fn embedding_constants_with(
    spec: &ProblemSpec,
    overrides: ConstantOverrides,
) -> Result<EmbeddingConstants> {
    let dom = &spec.domain;
    let c_f = match overrides.c_f {
        Some(c) if c > 0.0 => c,
        Some(c) => {
            return Err(Error::InvalidParameter(format!(
                "Friedrichs constant must be positive, got {c}"
            )))
        }
        None => {
            let mut lam_min = 0.0;
            for axis in 0..dom.dim {
                let lo = dom.kind(if axis == 0 { Face::Left } else { Face::Bottom });
                let hi = dom.kind(if axis == 0 { Face::Right } else { Face::Top });
                let l = dom.lengths[axis];
                lam_min += match (lo, hi) {
                    (BoundaryKind::Dirichlet, BoundaryKind::Dirichlet) => (PI / l).powi(2),
                    (BoundaryKind::Neumann, BoundaryKind::Neumann) => 0.0,
                    _ => (PI / (2.0 * l)).powi(2),
                };
            }
            if lam_min <= 0.0 {
                return Err(Error::UnsupportedGeometry(
                    "no Dirichlet face: Friedrichs constant does not exist".into(),
                ));
            }
            1.0 / lam_min.sqrt()
        }
    };
    let neumann: Vec<Face> = dom
        .faces()
        .iter()
        .copied()
        .filter(|&f| dom.kind(f) == BoundaryKind::Neumann)
        .collect();
    let c_tr = if neumann.is_empty() {
        None
    } else if let Some(c) = overrides.c_tr {
        if !(c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "trace constant must be positive, got {c}"
            )));
        }
        Some(c)
    } else {
        let mut l_max: f64 = 0.0;
        for f in neumann {
            if dom.kind(f.opposite()) != BoundaryKind::Dirichlet {
                return Err(Error::UnsupportedGeometry(format!(
                    "Neumann face {f:?} without a Dirichlet opposite face; supply a trace constant"
                )));
            }
            l_max = l_max.max(dom.lengths[f.axis()]);
        }
        Some(l_max.sqrt())
    };
    Ok(EmbeddingConstants { c_f, c_tr })
}

/// Weights ν, θ, ζ of the error norm. θ² is affine in λ: θ² = c0 + c1·λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormWeights {
    pub nu: f64,
    pub theta_sq_const: f64,
    pub theta_sq_reaction: f64,
    pub zeta: f64,
}

impl NormWeights {
    pub fn new(nu: f64, theta_sq_const: f64, theta_sq_reaction: f64, zeta: f64) -> Self {
        Self {
            nu,
            theta_sq_const,
            theta_sq_reaction,
            zeta,
        }
    }

    /// Weights bounded by the majorant: (√(2−δ), √(2−1/γ)·√λ, 1).
    pub fn majorant(delta: f64, gamma: f64) -> Self {
        Self::new((2.0 - delta).max(0.0).sqrt(), 0.0, (2.0 - 1.0 / gamma).max(0.0), 1.0)
    }

    /// Weights bounded by the minorant: (√(κ₁/2), √((κ₂+κ₃λ)/2), √(κ₄/2)).
    pub fn minorant(kappa: &[f64; 4]) -> Self {
        Self::new(
            (kappa[0] / 2.0).sqrt(),
            kappa[1] / 2.0,
            kappa[2] / 2.0,
            (kappa[3] / 2.0).sqrt(),
        )
    }

    pub fn theta_sq(&self, lambda: f64) -> f64 {
        self.theta_sq_const + self.theta_sq_reaction * lambda
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.nu, self.theta_sq_const, self.theta_sq_reaction, self.zeta];
        if all.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParameter(format!("negative norm weight in {self:?}")));
        }
        if all.iter().all(|&w| w == 0.0) {
            return Err(Error::InvalidParameter("all norm weights are zero".into()));
        }
        Ok(())
    }

    /// Combines raw error components: ν²·grad + c0·l2 + c1·reaction + ζ²·final.
    pub fn combine(&self, grad_sq: f64, l2_sq: f64, reaction_sq: f64, final_sq: f64) -> f64 {
        self.nu * self.nu * grad_sq
            + self.theta_sq_const * l2_sq
            + self.theta_sq_reaction * reaction_sq
            + self.zeta * self.zeta * final_sq
    }
}

/// ν²·e_grad_sq + e_l2_weighted_sq + ζ²·e_final_sq, where the middle term
/// is already θ-weighted.
pub fn weighted_error_norm(
    e_grad_sq: f64,
    e_l2_weighted_sq: f64,
    e_final_sq: f64,
    w: &NormWeights,
) -> Result<f64> {
    for (name, v) in [
        ("gradient", e_grad_sq),
        ("weighted L2", e_l2_weighted_sq),
        ("final-time", e_final_sq),
    ] {
        if !(v >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} error component must be nonnegative, got {v}"
            )));
        }
    }
    Ok(w.nu * w.nu * e_grad_sq + e_l2_weighted_sq + w.zeta * w.zeta * e_final_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyIndexes {
    pub i_maj: f64,
    pub i_min: f64,
    /// `None` when the minorant vanishes (the ratio is infinite).
    pub i_eff: Option<f64>,
}

pub fn efficiency_indexes(maj_sq: f64, min_sq: f64, err_sq: f64) -> Result<EfficiencyIndexes> {
    if err_sq == 0.0 {
        return Err(Error::ExactApproximation);
    }
    if !(err_sq > 0.0) || !(maj_sq >= 0.0) || !(min_sq >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "efficiency indexes need err² > 0 and nonnegative bounds, got ({maj_sq}, {min_sq}, {err_sq})"
        )));
    }
    Ok(EfficiencyIndexes {
        i_maj: (maj_sq / err_sq).sqrt(),
        i_min: (min_sq / err_sq).sqrt(),
        i_eff: if min_sq > 0.0 {
            Some((maj_sq / min_sq).sqrt())
        } else {
            None
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ex1_residual_vanishes_at_sample() {
        let (spec, exact) = preset_problem(PresetId::Ex1).unwrap();
        assert!(exact.residual(&spec, &[0.5, 0.0], 1.0).abs() < 1e-12);
        assert_eq!(spec.t_final, 10.0);
        assert_relative_eq!(exact.u(&[0.5, 0.0], 1.0), 0.25 * 3.0);
    }

    #[test]
    fn ex4_exact_solution_formula() {
        let (spec, exact) = preset_problem(PresetId::Ex4).unwrap();
        assert_eq!(spec.domain.dim, 2);
        assert_eq!(spec.t_final, 1.0);
        let x = [0.3, 0.7];
        let t = 0.4;
        let expect = ((PI * 0.3).sin() * (3.0 * PI * 0.7).sin()
            + (3.0 * PI * 0.3).sin() * (PI * 0.7).sin())
            * (t * t * t + f64::sin(t) + 1.0);
        assert_relative_eq!(exact.u(&x, t), expect, epsilon = 1e-14);
    }

    #[test]
    fn preset_ids_round_trip_through_text() {
        for id in [
            PresetId::Ex1,
            PresetId::Ex1Gaussian { sigma: 0.05 },
            PresetId::Ex2 { rho: 1e-3 },
            PresetId::Ex3 { sigma: None },
            PresetId::Ex3 { sigma: Some(0.1) },
            PresetId::Ex4,
            PresetId::Ex5,
            PresetId::Trivial,
        ] {
            assert_eq!(id.to_string().parse::<PresetId>().unwrap(), id);
        }
        assert!(matches!("ex9".parse::<PresetId>(), Err(Error::UnknownPreset(_))));
        assert!(matches!("ex2".parse::<PresetId>(), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn nonpositive_preset_parameters_are_rejected() {
        assert!(preset_problem(PresetId::Ex2 { rho: 0.0 }).is_err());
        assert!(preset_problem(PresetId::Ex1Gaussian { sigma: -1.0 }).is_err());
    }

    #[test]
    fn closed_form_constants() {
        let (spec, _) = preset_problem(PresetId::Ex1).unwrap();
        let c = embedding_constants(&spec).unwrap();
        assert_relative_eq!(c.c_f, 1.0 / PI, epsilon = 1e-15);
        assert!(c.c_tr.is_none());

        let (spec, _) = preset_problem(PresetId::Ex3 { sigma: None }).unwrap();
        let c = embedding_constants(&spec).unwrap();
        assert_relative_eq!(c.c_f, 2.0 / PI, epsilon = 1e-15);
        assert_relative_eq!(c.c_tr.unwrap(), 1.0);

        let (spec, _) = preset_problem(PresetId::Ex4).unwrap();
        let c = embedding_constants(&spec).unwrap();
        assert_relative_eq!(c.c_f, 1.0 / (PI * 2f64.sqrt()), epsilon = 1e-15);
    }

    #[test]
    fn trace_constant_needs_dirichlet_opposite() {
        let (mut spec, _) = preset_problem(PresetId::Ex4).unwrap();
        spec.domain.set_kind(Face::Left, BoundaryKind::Neumann);
        spec.domain.set_kind(Face::Right, BoundaryKind::Neumann);
        assert!(matches!(
            embedding_constants(&spec),
            Err(Error::UnsupportedGeometry(_))
        ));
        let c = embedding_constants_with(
            &spec,
            ConstantOverrides {
                c_f: None,
                c_tr: Some(2.0),
            },
        )
        .unwrap();
        assert_eq!(c.c_tr, Some(2.0));
        // Only the y-axis is Dirichlet on both ends.
        assert_relative_eq!(c.c_f, 1.0 / PI, epsilon = 1e-15);
    }

    #[test]
    fn weighted_norm_examples() {
        let w = NormWeights::new(1.0, 1.0, 0.0, 1.0);
        assert_eq!(weighted_error_norm(0.0, 0.0, 0.0, &w).unwrap(), 0.0);
        assert_eq!(weighted_error_norm(1.0, 1.0, 1.0, &w).unwrap(), 3.0);
        assert!(weighted_error_norm(-1.0, 0.0, 0.0, &w).is_err());
        let m = NormWeights::majorant(1.0, 1.0);
        assert_relative_eq!(m.nu, 1.0);
        assert_relative_eq!(m.theta_sq_reaction, 1.0);
        assert_relative_eq!(m.zeta, 1.0);
    }

    #[test]
    fn efficiency_index_examples() {
        let e = efficiency_indexes(4.0, 1.0, 1.0).unwrap();
        assert_eq!((e.i_maj, e.i_min, e.i_eff), (2.0, 1.0, Some(2.0)));
        assert!(matches!(
            efficiency_indexes(1.0, 1.0, 0.0),
            Err(Error::ExactApproximation)
        ));
        assert_eq!(efficiency_indexes(1.0, 0.0, 1.0).unwrap().i_eff, None);
        let e = efficiency_indexes(6.39e-4, 5.73e-4, 6.28e-4).unwrap();
        assert!((e.i_maj - 1.01).abs() < 0.01);
        assert!((e.i_min - 0.955).abs() < 0.01);
    }

    #[test]
    fn validation_catches_bad_data() {
        let (mut spec, _) = preset_problem(PresetId::Ex1).unwrap();
        spec.validate(5).unwrap();
        spec.reaction = scalar_fn(|_, _| -1.0);
        assert!(spec.validate(5).is_err());
        let (mut spec, _) = preset_problem(PresetId::Ex1).unwrap();
        spec.domain.set_kind(Face::Left, BoundaryKind::Neumann);
        spec.domain.set_kind(Face::Right, BoundaryKind::Neumann);
        assert!(spec.validate(5).is_err());
        let (mut spec, _) = preset_problem(PresetId::Ex4).unwrap();
        spec.diffusion = Diffusion::new(|_, _| [[2.0, 0.0], [0.0, 0.5]], 1.0, 2.0, false);
        assert!(spec.validate(3).is_err());
    }
}
