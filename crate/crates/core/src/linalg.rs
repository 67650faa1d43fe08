//! Thin wrappers around sparse assembly and SPD factorization.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::error::{Error, Result};

/// Triplet accumulator for a square matrix; duplicates are summed.
#[derive(Debug, Clone)]
pub struct Assembler {
    coo: CooMatrix<f64>,
}

impl Assembler {
    pub fn new(n: usize) -> Self {
        Self {
            coo: CooMatrix::new(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.coo.nrows()
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.coo.push(i, j, v);
        }
    }

    pub fn into_csr(self) -> CsrMatrix<f64> {
        CsrMatrix::from(&self.coo)
    }
}

/// y = A x for a CSR matrix.
pub fn csr_mul(a: &CsrMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (i, yi) in y.iter_mut().enumerate() {
        let row = a.row(i);
        *yi = row
            .col_indices()
            .iter()
            .zip(row.values())
            .map(|(&j, &v)| v * x[j])
            .sum();
    }
    y
}

/// Sparse Cholesky factor of a symmetric positive definite matrix, taken
/// after a reverse Cuthill–McKee reordering. Without it, unknowns numbered
/// after all nodes (element bubbles) fill the factor almost completely.
pub struct SpdFactor {
    chol: CscCholesky<f64>,
    /// `pos[i]` is the row of unknown `i` in the reordered system.
    pos: Vec<usize>,
    n: usize,
}

/// Σ_i (i − first column of row i) under the row positions `pos`, which
/// bounds the fill of the Cholesky factor.
fn envelope(a: &CsrMatrix<f64>, pos: impl Fn(usize) -> usize) -> usize {
    let mut first: Vec<usize> = (0..a.nrows()).map(&pos).collect();
    for (i, j, _) in a.triplet_iter() {
        let (pi, pj) = (pos(i), pos(j));
        let (hi, lo) = if pi > pj { (pi, pj) } else { (pj, pi) };
        first[hi] = first[hi].min(lo);
    }
    first.iter().enumerate().map(|(i, f)| i - f).sum()
}

/// Row positions for the factorization: reverse Cuthill–McKee when it
/// shrinks the envelope, the natural order otherwise.
fn fill_reducing_positions(a: &CsrMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    // Only the symmetrized pattern matters; assembled values can differ from
    // their transposes in the last bit, which the ordering rejects.
    let mut tri = sprs::TriMat::new((n, n));
    for (i, j, _) in a.triplet_iter() {
        tri.add_triplet(i, j, 1.0);
        tri.add_triplet(j, i, 1.0);
    }
    let csr: sprs::CsMat<f64> = tri.to_csr();
    let order = sprs::linalg::reverse_cuthill_mckee(csr.view()).perm.vec();
    let mut pos = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    if envelope(a, |i| pos[i]) < envelope(a, |i| i) {
        pos
    } else {
        (0..n).collect()
    }
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let pos = fill_reducing_positions(a);
        let mut coo = CooMatrix::new(n, n);
        for (i, j, v) in a.triplet_iter() {
            coo.push(pos[i], pos[j], *v);
        }
        let csc = CscMatrix::from(&coo);
        let chol = CscCholesky::factor(&csc)
            .map_err(|e| Error::Solver(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(Self { chol, pos, n })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::SizeMismatch(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.n
            )));
        }
        if self.n == 0 {
            return Ok(Vec::new());
        }
        let mut permuted = vec![0.0; self.n];
        for (i, &bi) in b.iter().enumerate() {
            permuted[self.pos[i]] = bi;
        }
        let x: DMatrix<f64> = self.chol.solve(&DVector::from_vec(permuted));
        let out: Vec<f64> = self.pos.iter().map(|&p| x[(p, 0)]).collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("non-finite solution".into()));
        }
        Ok(out)
    }
}

pub fn solve_spd(a: &CsrMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    SpdFactor::new(a)?.solve(b)
}

/// Dense SPD solve for small blocks.
pub fn solve_dense_spd(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Solver(format!("{n}×{n} block is not positive definite")))?;
    Ok(chol.solve(&DVector::from_column_slice(b)).iter().copied().collect())
}
