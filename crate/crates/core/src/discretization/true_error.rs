use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::SpaceTimeFunction;
use super::mesh::Grid;
use super::quadrature::{for_each_element_point, for_each_level_point, SlabRule};
use crate::error::Result;
use crate::problem::{ExactSolution, NormWeights, ProblemSpec};

/// Space-time integrals of one slab: ∫A∇w·∇w, ∫λw², ∫w².
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SlabNorms {
    pub grad_sq: f64,
    pub reaction_sq: f64,
    pub l2_sq: f64,
}

impl std::ops::AddAssign for SlabNorms {
    fn add_assign(&mut self, o: Self) {
        self.grad_sq += o.grad_sq;
        self.reaction_sq += o.reaction_sq;
        self.l2_sq += o.l2_sq;
    }
}

/// Error components accumulated over (0, t^k) plus the final-time term.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorComponents {
    pub grad_sq: f64,
    pub reaction_sq: f64,
    pub l2_sq: f64,
    pub final_sq: f64,
}

impl ErrorComponents {
    pub fn weighted(&self, w: &NormWeights) -> f64 {
        w.combine(self.grad_sq, self.l2_sq, self.reaction_sq, self.final_sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErrorOptions {
    pub space_points: usize,
    pub time_points: usize,
    /// Also record ∫∫ A∇e·∇e per element and slab.
    pub element_wise: bool,
}

impl Default for ErrorOptions {
    fn default() -> Self {
        Self {
            space_points: 4,
            time_points: 4,
            element_wise: false,
        }
    }
}

/// True error e = u − v and the matching norms of u itself.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueError {
    pub slabs: Vec<SlabNorms>,
    /// ‖e(·, t^k)‖² for every level.
    pub final_sq: Vec<f64>,
    pub exact_slabs: Vec<SlabNorms>,
    pub exact_final_sq: Vec<f64>,
    /// Per slab, per element ∫∫ A∇e·∇e (empty unless requested).
    pub element_grad: Vec<Vec<f64>>,
}

impl TrueError {
    pub fn n_slabs(&self) -> usize {
        self.slabs.len()
    }

    fn cum(slabs: &[SlabNorms], fin: &[f64], k: usize) -> ErrorComponents {
        let mut acc = SlabNorms::default();
        for s in &slabs[..k] {
            acc += *s;
        }
        ErrorComponents {
            grad_sq: acc.grad_sq,
            reaction_sq: acc.reaction_sq,
            l2_sq: acc.l2_sq,
            final_sq: fin[k],
        }
    }

    /// Components over (0, t^k) and at t^k.
    pub fn cumulative(&self, k: usize) -> ErrorComponents {
        Self::cum(&self.slabs, &self.final_sq, k)
    }

    /// Same norms of the exact solution, used for normalization.
    pub fn exact_cumulative(&self, k: usize) -> ErrorComponents {
        Self::cum(&self.exact_slabs, &self.exact_final_sq, k)
    }
}

pub fn true_error_components(
    v: &dyn SpaceTimeFunction,
    exact: &ExactSolution,
    spec: &ProblemSpec,
    grid: &Grid,
    opts: ErrorOptions,
) -> Result<TrueError> {
    let rule = SlabRule::new(&grid.mesh, opts.space_points, opts.time_points)?;
    let ne = grid.mesh.n_elements();
    let per_slab: Vec<(SlabNorms, SlabNorms, Vec<f64>)> = (0..grid.time.n_slabs())
        .into_par_iter()
        .map(|k| {
            let mut err = SlabNorms::default();
            let mut ex = SlabNorms::default();
            let mut elems = if opts.element_wise { vec![0.0; ne] } else { Vec::new() };
            for e in 0..ne {
                let mut eg = 0.0;
                for_each_element_point(grid, &rule, k, e, |p| {
                    let (vv, gv, _) = v.eval(p);
                    let uu = exact.u(&p.x, p.t);
                    let gu = exact.grad(&p.x, p.t);
                    let lam = spec.reaction(&p.x, p.t);
                    let de = uu - vv;
                    let ge = [gu[0] - gv[0], gu[1] - gv[1]];
                    let age = spec.diffusion.apply(&p.x, p.t, &ge);
                    let agu = spec.diffusion.apply(&p.x, p.t, &gu);
                    let g2 = ge[0] * age[0] + ge[1] * age[1];
                    eg += p.weight * g2;
                    err.reaction_sq += p.weight * lam * de * de;
                    err.l2_sq += p.weight * de * de;
                    ex.grad_sq += p.weight * (gu[0] * agu[0] + gu[1] * agu[1]);
                    ex.reaction_sq += p.weight * lam * uu * uu;
                    ex.l2_sq += p.weight * uu * uu;
                });
                err.grad_sq += eg;
                if opts.element_wise {
                    elems[e] = eg;
                }
            }
            (err, ex, elems)
        })
        .collect();
    let levels: Vec<(f64, f64)> = (0..=grid.time.n_slabs())
        .into_par_iter()
        .map(|k| {
            let mut fe = 0.0;
            let mut fu = 0.0;
            for_each_level_point(grid, &rule.space, k, |p| {
                let (vv, _, _) = v.eval(p);
                let uu = exact.u(&p.x, p.t);
                fe += p.weight * (uu - vv).powi(2);
                fu += p.weight * uu * uu;
            });
            (fe, fu)
        })
        .collect();
    let mut out = TrueError {
        slabs: Vec::with_capacity(per_slab.len()),
        final_sq: levels.iter().map(|l| l.0).collect(),
        exact_slabs: Vec::with_capacity(per_slab.len()),
        exact_final_sq: levels.iter().map(|l| l.1).collect(),
        element_grad: Vec::new(),
    };
    for (e, u, el) in per_slab {
        out.slabs.push(e);
        out.exact_slabs.push(u);
        if opts.element_wise {
            out.element_grad.push(el);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::field::{Analytic, SpaceTimeField};
    use crate::discretization::mesh::build_space_time_grid;
    use crate::problem::{preset_problem, PresetId};

    #[test]
    fn analytic_approximation_has_zero_error() {
        let (spec, exact) = preset_problem(PresetId::Ex5).unwrap();
        let grid = build_space_time_grid(&spec, &[4, 4], 3).unwrap();
        let te = true_error_components(&Analytic(&exact), &exact, &spec, &grid, Default::default())
            .unwrap();
        let c = te.cumulative(3);
        assert_eq!((c.grad_sq, c.l2_sq, c.final_sq), (0.0, 0.0, 0.0));
        assert!(te.exact_cumulative(3).grad_sq > 0.0);
    }

    #[test]
    fn exact_energy_of_ex1() {
        // ∫₀¹(1−2x)² = 1/3 and ∫₀¹⁰(t²+t+1)² = 26110.
        let (spec, exact) = preset_problem(PresetId::Ex1).unwrap();
        let grid = build_space_time_grid(&spec, &[2], 5).unwrap();
        let v = SpaceTimeField::zeros(grid.clone());
        let te = true_error_components(&v, &exact, &spec, &grid, Default::default()).unwrap();
        let u = te.exact_cumulative(5);
        assert!((u.grad_sq - 26110.0 / 3.0).abs() < 1e-9 * 26110.0);
        // ∫₀¹ x²(1−x)² = 1/30, times (100+10+1)².
        assert!((u.final_sq - 111.0f64.powi(2) / 30.0).abs() < 1e-9);
        assert!((te.cumulative(5).grad_sq - u.grad_sq).abs() < 1e-12 * u.grad_sq);
    }
}
