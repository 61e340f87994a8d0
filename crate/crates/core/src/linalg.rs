//! Cholesky factorization of symmetric matrices with bordered block-diagonal
//! ("arrowhead") structure:
//!
//! ```text
//!     | A_1          B_1 |
//!     |     ...      ... |
//! H = |         A_n  B_n |
//!     | B_1' .. B_n'  C  |
//! ```
//!
//! Subjects are conditionally independent given the fixed effects, so the
//! negative Hessian of the latent field always has this shape. The factor
//! costs `O(n d^3 + n d p^2 + p^3)` instead of `O((n d + p)^3)`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BorderedMatrix {
    pub blocks: Vec<DMatrix<f64>>,
    pub borders: Vec<DMatrix<f64>>,
    pub corner: DMatrix<f64>,
}

impl BorderedMatrix {
    pub fn zeros(n: usize, d: usize, p: usize) -> Self {
        Self {
            blocks: vec![DMatrix::zeros(d, d); n],
            borders: vec![DMatrix::zeros(d, p); n],
            corner: DMatrix::zeros(p, p),
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dim(&self) -> usize {
        self.blocks.first().map_or(0, |b| b.nrows())
    }

    pub fn border_dim(&self) -> usize {
        self.corner.nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_blocks() * self.block_dim() + self.border_dim()
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for a in &mut self.blocks {
            for i in 0..a.nrows() {
                a[(i, i)] += shift;
            }
        }
        for i in 0..self.corner.nrows() {
            self.corner[(i, i)] += shift;
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        self.blocks
            .iter()
            .flat_map(|a| a.diagonal().iter().copied().collect::<Vec<_>>())
            .chain(self.corner.diagonal().iter().copied())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Dense copy, for tests and small problems.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, d, p) = (self.n_blocks(), self.block_dim(), self.border_dim());
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for i in 0..n {
            m.view_mut((i * d, i * d), (d, d)).copy_from(&self.blocks[i]);
            m.view_mut((i * d, n * d), (d, p)).copy_from(&self.borders[i]);
            m.view_mut((n * d, i * d), (p, d)).copy_from(&self.borders[i].transpose());
        }
        m.view_mut((n * d, n * d), (p, p)).copy_from(&self.corner);
        m
    }

    /// `y = H x`.
    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let (n, d, p) = (self.n_blocks(), self.block_dim(), self.border_dim());
        let xf = x.rows(n * d, p).into_owned();
        let mut y = DVector::zeros(self.dim());
        let mut yf = &self.corner * &xf;
        for i in 0..n {
            let xi = x.rows(i * d, d).into_owned();
            let yi = &self.blocks[i] * &xi + &self.borders[i] * &xf;
            y.rows_mut(i * d, d).copy_from(&yi);
            yf += self.borders[i].transpose() * &xi;
        }
        y.rows_mut(n * d, p).copy_from(&yf);
        y
    }

    pub fn cholesky(&self) -> Result<BorderedCholesky> {
        let p = self.border_dim();
        let mut block_factors = Vec::with_capacity(self.n_blocks());
        let mut w = Vec::with_capacity(self.n_blocks());
        let mut schur = self.corner.clone();
        for (i, (a, b)) in self.blocks.iter().zip(&self.borders).enumerate() {
            let ch = Cholesky::new(a.clone())
                .ok_or_else(|| Error::NotPositiveDefinite(format!("diagonal block {i}")))?;
            let l = ch.l();
            let wi = l
                .solve_lower_triangular(b)
                .ok_or_else(|| Error::NotPositiveDefinite(format!("diagonal block {i}")))?;
            schur -= wi.transpose() * &wi;
            block_factors.push(l);
            w.push(wi);
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let corner = if p > 0 {
            Cholesky::new(schur).ok_or_else(|| Error::NotPositiveDefinite("Schur complement".into()))?
        } else {
            Cholesky::new(DMatrix::identity(0, 0)).expect("empty matrix")
        };
        Ok(BorderedCholesky {
            block_factors,
            w,
            corner,
        })
    }
}

/// `H = L L'` with `L = [[diag(L_i), 0], [W', L_S]]`, `W_i = L_i^{-1} B_i`.
#[derive(Debug, Clone)]
pub struct BorderedCholesky {
    block_factors: Vec<DMatrix<f64>>,
    w: Vec<DMatrix<f64>>,
    corner: Cholesky<f64, Dyn>,
}

impl BorderedCholesky {
    pub fn n_blocks(&self) -> usize {
        self.block_factors.len()
    }

    pub fn block_dim(&self) -> usize {
        self.block_factors.first().map_or(0, |b| b.nrows())
    }

    pub fn border_dim(&self) -> usize {
        self.corner.l_dirty().nrows()
    }

    pub fn dim(&self) -> usize {
        self.n_blocks() * self.block_dim() + self.border_dim()
    }

    pub fn log_det(&self) -> f64 {
        let blocks: f64 = self
            .block_factors
            .iter()
            .map(|l| l.diagonal().iter().map(|v| v.ln()).sum::<f64>())
            .sum();
        let corner: f64 = self.corner.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
        2.0 * (blocks + corner)
    }

    /// Solve `H x = rhs`.
    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let (n, d, p) = (self.n_blocks(), self.block_dim(), self.border_dim());
        let mut y = Vec::with_capacity(n);
        let mut yf = rhs.rows(n * d, p).into_owned();
        for i in 0..n {
            let yi = self.block_factors[i]
                .solve_lower_triangular(&rhs.rows(i * d, d).into_owned())
                .expect("factor has a positive diagonal");
            yf -= self.w[i].transpose() * &yi;
            y.push(yi);
        }
        let lf = self.corner.l_dirty();
        let zf = lf.solve_lower_triangular(&yf).expect("positive diagonal");
        let xf = lf.tr_solve_lower_triangular(&zf).expect("positive diagonal");
        let mut x = DVector::zeros(self.dim());
        for i in 0..n {
            let r = &y[i] - &self.w[i] * &xf;
            let xi = self.block_factors[i]
                .tr_solve_lower_triangular(&r)
                .expect("positive diagonal");
            x.rows_mut(i * d, d).copy_from(&xi);
        }
        x.rows_mut(n * d, p).copy_from(&xf);
        x
    }

    /// Solve `L' x = z`; maps standard normal `z` to a draw from `N(0, H^{-1})`.
    pub fn solve_upper(&self, z: &DVector<f64>) -> DVector<f64> {
        let (n, d, p) = (self.n_blocks(), self.block_dim(), self.border_dim());
        let lf = self.corner.l_dirty();
        let xf = lf
            .tr_solve_lower_triangular(&z.rows(n * d, p).into_owned())
            .expect("positive diagonal");
        let mut x = DVector::zeros(self.dim());
        for i in 0..n {
            let r = z.rows(i * d, d).into_owned() - &self.w[i] * &xf;
            let xi = self.block_factors[i]
                .tr_solve_lower_triangular(&r)
                .expect("positive diagonal");
            x.rows_mut(i * d, d).copy_from(&xi);
        }
        x.rows_mut(n * d, p).copy_from(&xf);
        x
    }

    /// Covariance of the border coordinates, `(H^{-1})_{ff} = S^{-1}`.
    pub fn border_covariance(&self) -> DMatrix<f64> {
        self.corner.inverse()
    }

    /// Covariance block of block `i`,
    /// `A_i^{-1} + A_i^{-1} B_i S^{-1} B_i' A_i^{-1}`.
    pub fn block_covariance(&self, i: usize) -> DMatrix<f64> {
        let d = self.block_dim();
        self.local_covariance(i, &self.border_covariance()).view((0, 0), (d, d)).into_owned()
    }

    /// Covariance of block `i` together with the border coordinates, given
    /// `border_cov` from [`Self::border_covariance`].
    pub fn local_covariance(&self, i: usize, border_cov: &DMatrix<f64>) -> DMatrix<f64> {
        let l = &self.block_factors[i];
        let (d, p) = (l.nrows(), border_cov.nrows());
        let l_inv = l
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .expect("positive diagonal");
        let a_inv = l_inv.transpose() * &l_inv;
        // A^{-1} B = L^{-T} W
        let g = l.tr_solve_lower_triangular(&self.w[i]).expect("positive diagonal");
        let cross = -(&g * border_cov);
        let mut out = DMatrix::zeros(d + p, d + p);
        out.view_mut((0, 0), (d, d)).copy_from(&(a_inv - &cross * g.transpose()));
        out.view_mut((0, d), (d, p)).copy_from(&cross);
        out.view_mut((d, 0), (p, d)).copy_from(&cross.transpose());
        out.view_mut((d, d), (p, p)).copy_from(border_cov);
        out
    }
}
