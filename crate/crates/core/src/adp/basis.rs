//! Basis matrices `X_0, …, X_{h+1}` for the regulator-equation search space.

use crate::error::{Error, Result};
use crate::linops::{rank, Matrix};

/// `X_0 = 0`, `X_1` the minimum-norm solution of `CX = −F`, and `X_2 …` an
/// orthonormal basis of `{X : CX = 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct XjBasis {
    matrices: Vec<Matrix>,
}

impl XjBasis {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// Null-space dimension `h = (n − p)·q`.
    pub fn h(&self) -> usize {
        self.matrices.len() - 2
    }

    pub fn get(&self, j: usize) -> &Matrix {
        &self.matrices[j]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Matrix> {
        self.matrices.iter()
    }

    /// `X_2, …, X_{h+1}`.
    pub fn kernel(&self) -> &[Matrix] {
        &self.matrices[2..]
    }
}

pub fn build_xj_basis(c: &Matrix, f: &Matrix) -> Result<XjBasis> {
    let (p, n) = c.shape();
    let q = f.ncols();
    if f.nrows() != p || p > n {
        return Err(Error::dim(
            "build_xj_basis",
            format!("C {:?}, F {:?}", c.shape(), f.shape()),
        ));
    }
    let r = rank(c);
    if r < p {
        return Err(Error::RankDeficient {
            rank: r,
            required: p,
            context: Some("output matrix C".into()),
        });
    }
    let gram = (c * c.transpose())
        .cholesky()
        .ok_or_else(|| Error::Numerical("C Cᵀ is not positive definite".into()))?;
    let x1 = -(c.transpose() * gram.solve(f));

    // rows of Vᵀ past the rank span ker C; pad C so the SVD returns all n
    let mut padded = Matrix::zeros(n, n);
    padded.view_mut((0, 0), (p, n)).copy_from(c);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("svd computed with v_t");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let null: Vec<_> = order[p..].iter().map(|&i| v_t.row(i).transpose()).collect();

    let mut matrices = Vec::with_capacity(2 + (n - p) * q);
    matrices.push(Matrix::zeros(n, q));
    matrices.push(x1);
    for col in 0..q {
        for basis_vec in &null {
            let mut x = Matrix::zeros(n, q);
            x.set_column(col, basis_vec);
            matrices.push(x);
        }
    }
    Ok(XjBasis { matrices })
}
