//! Dense least squares by Householder QR.
//!
//! Rank deficiency is detected column by column without pivoting: column `j`
//! is reported as dependent when the norm of its component orthogonal to the
//! preceding independent columns is at most `RANK_TOL` times its own norm.

use serde::{Serialize, Serializer};

use crate::error::{FdidError, Result};
use crate::numeric::KahanSum;

/// Column-norm-relative rank tolerance.
pub const RANK_TOL: f64 = 1e-10;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }
}

impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

/// Column-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    nrows: usize,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl Design {
    pub fn new(nrows: usize) -> Self {
        Self {
            nrows,
            columns: Vec::new(),
            names: Vec::new(),
        }
    }

    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let nrows = columns.first().map_or(0, |c| c.1.len());
        let mut d = Design::new(nrows);
        for (name, col) in columns {
            d.push(name, col)?;
        }
        Ok(d)
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> Result<()> {
        if column.len() != self.nrows {
            return Err(FdidError::InvalidArgument(format!(
                "column has {} rows, design has {}",
                column.len(),
                self.nrows
            )));
        }
        self.names.push(name.into());
        self.columns.push(column);
        Ok(())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Xβ
    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| {
                let mut acc = KahanSum::new();
                for (c, b) in self.columns.iter().zip(beta) {
                    acc.add(c[i] * b);
                }
                acc.total()
            })
            .collect()
    }

    /// Copy with every row scaled by `w[i]`.
    pub fn scale_rows(&self, w: &[f64]) -> Design {
        Design {
            nrows: self.nrows,
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().zip(w).map(|(v, wi)| v * wi).collect())
                .collect(),
            names: self.names.clone(),
        }
    }
}

/// Least-squares fit of `response` on the columns of `design`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n: usize,
    pub rank: usize,
    /// Upper-triangular R of X = QR (so (X'X)⁻¹ = R⁻¹R⁻ᵀ).
    #[serde(skip)]
    pub r_factor: Matrix,
    #[serde(skip)]
    pub design: Design,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robust_vcov: Option<Matrix>,
}

impl RegressionFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|j| self.coefficients[j])
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }

    /// R⁻¹ (upper triangular).
    pub fn r_inverse(&self) -> Matrix {
        upper_inverse(&self.r_factor)
    }

    /// (X'X)⁻¹ = R⁻¹ R⁻ᵀ.
    pub fn xtx_inverse(&self) -> Matrix {
        let ri = self.r_inverse();
        ri.mul(&ri.transpose())
    }

    pub fn fitted(&self) -> Vec<f64> {
        self.design.apply(&self.coefficients)
    }
}

fn upper_inverse(r: &Matrix) -> Matrix {
    let k = r.rows();
    let mut inv = Matrix::zeros(k, k);
    for col in 0..k {
        // solve R z = e_col
        for i in (0..=col).rev() {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for j in i + 1..=col {
                s -= r.get(i, j) * inv.get(j, col);
            }
            inv.set(i, col, s / r.get(i, i));
        }
    }
    inv
}

/// Solve min ||y − Xβ||² by Householder QR.
pub fn least_squares(design: &Design, response: &[f64]) -> Result<RegressionFit> {
    let n = design.nrows();
    let k = design.ncols();
    if response.len() != n {
        return Err(FdidError::InvalidArgument(format!(
            "response has {} rows, design has {}",
            response.len(),
            n
        )));
    }
    if n < k || k == 0 {
        return Err(FdidError::TooFewRows { rows: n, cols: k });
    }

    let mut a: Vec<Vec<f64>> = design.columns.clone();
    let mut y = response.to_vec();
    let norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let mut dependent = Vec::new();
    let mut r = Matrix::zeros(k, k);

    let mut row = 0;
    for j in 0..k {
        let sub = norm(&a[j][row..]);
        if row >= n || sub <= RANK_TOL * norms[j] || norms[j] == 0.0 {
            dependent.push(design.names[j].clone());
            continue;
        }
        let x0 = a[j][row];
        let alpha = if x0 >= 0.0 { -sub } else { sub };
        // v = x - alpha e1, stored in place
        let mut v = a[j][row..].to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        a[j][row] = alpha;
        a[j][row + 1..].iter_mut().for_each(|x| *x = 0.0);
        for col in a.iter_mut().skip(j + 1) {
            reflect(&mut col[row..], &v, vtv);
        }
        reflect(&mut y[row..], &v, vtv);
        row += 1;
    }
    if !dependent.is_empty() {
        return Err(FdidError::RankDeficient { columns: dependent });
    }

    for j in 0..k {
        for i in 0..=j {
            r.set(i, j, a[j][i]);
        }
    }
    let mut beta = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = y[i];
        for j in i + 1..k {
            s -= r.get(i, j) * beta[j];
        }
        beta[i] = s / r.get(i, i);
    }
    let fitted = design.apply(&beta);
    let residuals = response.iter().zip(&fitted).map(|(y, f)| y - f).collect();
    Ok(RegressionFit {
        names: design.names.clone(),
        coefficients: beta,
        residuals,
        n,
        rank: k,
        r_factor: r,
        design: design.clone(),
        robust_vcov: None,
    })
}

fn reflect(x: &mut [f64], v: &[f64], vtv: f64) {
    let s = 2.0 * dot(x, v) / vtv;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large columns
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}
