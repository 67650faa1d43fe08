//! Element-wise error indication from the flux residual, bulk marking and
//! measures of marking quality.

use serde::{Deserialize, Serialize};

use crate::discretization::field::SpaceTimeField;
use crate::discretization::quadrature::{for_each_element_point, SlabRule};
use crate::error::{Error, Result};
use crate::flux::FluxField;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorField {
    pub slab: usize,
    pub values: Vec<f64>,
    pub total: f64,
}

impl IndicatorField {
    pub fn new(slab: usize, values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParameter(format!("indicator values must be nonnegative, got {v}")));
        }
        let total = values.iter().sum();
        Ok(Self { slab, values, total })
    }
}

/// ∫∫ |y − A∇v|²_{A⁻¹} per element over slab `k`.
///
/// For A = I both fields are linear in time, so the time integral is the
/// closed form (τ/3)(|r⁰|² + r⁰·r¹ + |r¹|²) of the end-level residuals.
pub fn element_indicator(
    v: &SpaceTimeField,
    y: &FluxField,
    spec: &ProblemSpec,
    k: usize,
    space_points: usize,
) -> Result<IndicatorField> {
    let grid = &v.grid;
    if k >= grid.time.n_slabs() {
        return Err(Error::InvalidParameter(format!("slab {k} out of range")));
    }
    if y.grid != *grid {
        return Err(Error::SizeMismatch("flux and approximation use different grids".into()));
    }
    let dim = grid.mesh.dim();
    let tau = grid.time.tau(k);
    let values = if spec.diffusion.is_identity() {
        let rule = SlabRule::new(&grid.mesh, space_points, 1)?;
        let vol = rule.space.volume;
        (0..grid.mesh.n_elements())
            .map(|e| {
                let mut acc = 0.0;
                for b in &rule.space.points {
                    let (_, g0) = v.level_at(k, e, b);
                    let (_, g1) = v.level_at(k + 1, e, b);
                    let (y0, _) = y.slab_level(k, 0, e, b);
                    let (y1, _) = y.slab_level(k, 1, e, b);
                    let r0 = [y0[0] - g0[0], y0[1] - g0[1]];
                    let r1 = [y1[0] - g1[0], y1[1] - g1[1]];
                    acc += b.weight
                        * (r0[0] * r0[0] + r0[1] * r0[1] + r0[0] * r1[0] + r0[1] * r1[1] + r1[0] * r1[0] + r1[1] * r1[1]);
                }
                tau / 3.0 * vol * acc
            })
            .collect()
    } else {
        let rule = SlabRule::new(&grid.mesh, space_points, 3)?;
        (0..grid.mesh.n_elements())
            .map(|e| {
                let mut acc = 0.0;
                for_each_element_point(grid, &rule, k, e, |p| {
                    let (_, gv, _) = crate::discretization::field::SpaceTimeFunction::eval(v, p);
                    let (yy, _) = crate::discretization::field::FluxFunction::eval_flux(y, p);
                    let ag = spec.diffusion.apply(&p.x, p.t, &gv);
                    let r = [yy[0] - ag[0], yy[1] - ag[1]];
                    let ai = spec.diffusion.inverse(&p.x, p.t, dim);
                    acc += p.weight
                        * (r[0] * (ai[0][0] * r[0] + ai[0][1] * r[1]) + r[1] * (ai[1][0] * r[0] + ai[1][1] * r[1]));
                });
                acc
            })
            .collect()
    };
    IndicatorField::new(k, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkSet {
    pub marked: Vec<bool>,
    pub theta: f64,
    pub rule: String,
}

impl MarkSet {
    pub fn count(&self) -> usize {
        self.marked.iter().filter(|&&m| m).count()
    }
}

/// Dörfler marking: largest values first (ties by lower index) until the
/// marked sum reaches θ·total.
pub fn bulk_mark(values: &[f64], theta: f64) -> Result<MarkSet> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!("θ must lie in (0,1), got {theta}")));
    }
    let mut marked = vec![false; values.len()];
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        let mut order: Vec<usize> = (0..values.len()).collect();
        order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
        let goal = theta * total;
        let mut acc = 0.0;
        for i in order {
            if acc >= goal {
                break;
            }
            marked[i] = true;
            acc += values[i];
        }
    }
    Ok(MarkSet {
        marked,
        theta,
        rule: "bulk".into(),
    })
}

/// Fraction of elements marked differently by the two sets.
pub fn weak_measure(a: &MarkSet, b: &MarkSet) -> Result<f64> {
    if a.marked.len() != b.marked.len() {
        return Err(Error::SizeMismatch(format!(
            "mark sets of {} and {} elements",
            a.marked.len(),
            b.marked.len()
        )));
    }
    if a.marked.is_empty() {
        return Ok(0.0);
    }
    let diff = a.marked.iter().zip(&b.marked).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / a.marked.len() as f64)
}

/// |err − ind| / err.
pub fn strong_measure(err_sq: f64, ind_sq: f64) -> Result<f64> {
    if !(err_sq > 0.0) {
        return Err(Error::InvalidParameter(format!("error must be positive, got {err_sq}")));
    }
    Ok((err_sq - ind_sq).abs() / err_sq)
}

/// Element-wise strong measure; elements with zero error map to `None`.
pub fn strong_measure_elements(err: &[f64], ind: &[f64]) -> Result<Vec<Option<f64>>> {
    if err.len() != ind.len() {
        return Err(Error::SizeMismatch(format!("{} errors and {} indicators", err.len(), ind.len())));
    }
    Ok(err
        .iter()
        .zip(ind)
        .map(|(&e, &i)| strong_measure(e, i).ok())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHistogram {
    /// Element indices sorted by decreasing true error.
    pub order: Vec<usize>,
    pub err_sorted: Vec<f64>,
    pub ind_permuted: Vec<f64>,
}

pub fn ranked_histogram(err: &[f64], ind: &[f64]) -> Result<RankedHistogram> {
    if err.len() != ind.len() {
        return Err(Error::SizeMismatch(format!("{} errors and {} indicators", err.len(), ind.len())));
    }
    let mut order: Vec<usize> = (0..err.len()).collect();
    order.sort_by(|&a, &b| err[b].total_cmp(&err[a]).then(a.cmp(&b)));
    Ok(RankedHistogram {
        err_sorted: order.iter().map(|&i| err[i]).collect(),
        ind_permuted: order.iter().map(|&i| ind[i]).collect(),
        order,
    })
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let mean = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = mean;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (Pearson correlation of the ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::SizeMismatch(format!("need two equal samples of size ≥ 2, got {} and {}", a.len(), b.len())));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::InvalidParameter("constant sample has no rank correlation".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bulk_example() {
        let m = bulk_mark(&[4.0, 3.0, 2.0, 1.0], 0.5).unwrap();
        assert_eq!(m.marked, vec![true, true, false, false]);
        let m = bulk_mark(&[0.0, 2.0, 0.0], 0.9).unwrap();
        assert_eq!(m.marked, vec![false, true, false]);
        let m = bulk_mark(&[1.0, 0.0, 2.0, 3.0], 1.0 - 1e-12).unwrap();
        assert_eq!(m.marked, vec![true, false, true, true]);
        assert_eq!(bulk_mark(&[0.0; 3], 0.5).unwrap().count(), 0);
    }

    #[test]
    fn measures() {
        let a = bulk_mark(&[4.0, 3.0, 2.0, 1.0], 0.5).unwrap();
        let mut b = a.clone();
        assert_eq!(weak_measure(&a, &b).unwrap(), 0.0);
        b.marked.iter_mut().for_each(|m| *m = !*m);
        assert_eq!(weak_measure(&a, &b).unwrap(), 1.0);
        assert_eq!(strong_measure(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(strong_measure(2.0, 4.0).unwrap(), 1.0);
        assert!(strong_measure(0.0, 1.0).is_err());
    }

    #[test]
    fn histogram_order() {
        let h = ranked_histogram(&[1.0, 3.0, 2.0], &[0.1, 0.3, 0.2]).unwrap();
        assert_eq!(h.order, vec![1, 2, 0]);
        assert_eq!(h.err_sorted, vec![3.0, 2.0, 1.0]);
        assert!(h.ind_permuted.windows(2).all(|w| w[0] >= w[1]));
        assert!((spearman(&[1.0, 3.0, 2.0], &[0.1, 0.3, 0.2]).unwrap() - 1.0).abs() < 1e-15);
    }
}
