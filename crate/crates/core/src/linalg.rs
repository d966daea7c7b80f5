//! Dense linear algebra for small dimensions.
//!
//! Everything here operates on row-major `f64` storage and is sized for the
//! handful-to-a-few-dozen dimensions used by the dropout recursions. The
//! dropout-specific matrix calculus lives here as well: the diagonal part
//! `Diag(A)`, the off-diagonal part `A - Diag(A)` and the p-rescaling
//! `A_p = pA + (1 - p) Diag(A)`.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{check_probability, Error, Result};

/// Convergence threshold on the off-diagonal Frobenius mass, relative to `||S||_F`.
const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;
/// Pivots below this fraction of the largest absolute entry are treated as zero.
const SINGULAR_PIVOT: f64 = 1e-12;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// A dense real vector.
#[derive(Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Dimension("vector must have at least one entry".into()));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!("non-finite vector entry at {i}")));
        }
        Ok(Self { data })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self { data: vec![0.0; dim] }
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize) -> f64) -> Self {
        assert!(dim > 0, "vector dimension must be positive");
        Self { data: (0..dim).map(f).collect() }
    }

    /// The `i`-th standard basis vector.
    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.data[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dot product dimension mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector { data: self.data.iter().map(|x| x * s).collect() }
    }

    /// Outer product `self * other^T`.
    pub fn outer(&self, other: &Vector) -> Matrix {
        let mut m = Matrix::zeros(self.dim(), other.dim());
        for (i, a) in self.data.iter().enumerate() {
            for (j, b) in other.data.iter().enumerate() {
                m[(i, j)] = a * b;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector addition dimension mismatch");
        Vector { data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        assert_eq!(self.dim(), rhs.dim(), "vector subtraction dimension mismatch");
        Vector { data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

/// A dense real matrix in row-major order.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("matrix shape {rows}x{cols} is empty")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries supplied for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parameter(format!("non-finite matrix entry at {i}")));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be positive");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_diag(&vec![1.0; d])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d, d);
        for (i, v) in diag.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Column vector as an `n x 1` matrix.
    pub fn column(v: &Vector) -> Self {
        Self { rows: v.dim(), cols: 1, data: v.as_slice().to_vec() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = rhs.row(k);
                let dst = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in dst.iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.dim() {
            return Err(Error::Dimension(format!(
                "cannot apply {}x{} matrix to a {}-vector",
                self.rows,
                self.cols,
                v.dim()
            )));
        }
        Ok(Vector::from_fn(self.rows, |i| {
            self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum()
        }))
    }

    /// `A^T A` for an `n x d` matrix.
    pub fn gram(&self) -> Matrix {
        let d = self.cols;
        let mut g = Matrix::zeros(d, d);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..d {
                let a = row[i];
                for j in i..d {
                    g[(i, j)] += a * row[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g[(i, j)] = g[(j, i)];
            }
        }
        g
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::Dimension(format!("{what} needs a square matrix, got {}x{}", self.rows, self.cols)))
        }
    }

    /// `Diag(A)`: keeps the main diagonal and zeroes everything else.
    pub fn diag_part(&self) -> Result<Matrix> {
        self.require_square("diag_part")?;
        Ok(Matrix::from_diag(&self.diagonal()))
    }

    /// `A - Diag(A)`.
    pub fn off_diag(&self) -> Result<Matrix> {
        self.require_square("off_diag")?;
        let mut m = self.clone();
        for i in 0..self.rows {
            m[(i, i)] = 0.0;
        }
        Ok(m)
    }

    /// `A_p = pA + (1 - p) Diag(A)`: off-diagonal entries shrink by `p`.
    pub fn p_rescale(&self, p: f64) -> Result<Matrix> {
        self.require_square("p_rescale")?;
        check_probability(p)?;
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| {
            if i == j {
                self[(i, j)]
            } else {
                p * self[(i, j)]
            }
        }))
    }

    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix> {
        self.require_same_shape(rhs, "hadamard")?;
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a * b).collect(),
        })
    }

    /// Kronecker product: the block matrix whose `(i, j)` block is `A_ij * B`.
    pub fn kronecker(&self, rhs: &Matrix) -> Matrix {
        let (p, q, m, n) = (self.rows, self.cols, rhs.rows, rhs.cols);
        Matrix::from_fn(p * m, q * n, |r, c| self[(r / m, c / n)] * rhs[(r % m, c % n)])
    }

    /// Stacks the columns into one vector.
    pub fn vec(&self) -> Vector {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self[(i, j)]);
            }
        }
        Vector { data }
    }

    /// Inverse of [`Matrix::vec`]: fills a `rows x cols` matrix column by column.
    pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Result<Matrix> {
        if v.dim() != rows * cols {
            return Err(Error::Dimension(format!(
                "cannot reshape a {}-vector into {rows}x{cols}",
                v.dim()
            )));
        }
        Ok(Matrix::from_fn(rows, cols, |i, j| v[j * rows + i]))
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrize(&self) -> Result<Matrix> {
        self.require_square("symmetrize")?;
        Ok(Matrix::from_fn(self.rows, self.cols, |i, j| 0.5 * (self[(i, j)] + self[(j, i)])))
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let tol = rel_tol * self.max_abs();
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    fn require_same_shape(&self, rhs: &Matrix, what: &str) -> Result<()> {
        if self.rows == rhs.rows && self.cols == rhs.cols {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )))
        }
    }

    /// Eigenvalues of a symmetric matrix, sorted in descending order.
    ///
    /// Cyclic Jacobi rotations; stops once the off-diagonal Frobenius mass
    /// drops below `1e-12 * ||S||_F`.
    pub fn sym_eigenvalues(&self) -> Result<Vector> {
        self.require_square("sym_eigenvalues")?;
        if !self.is_symmetric(SYMMETRY_TOLERANCE) {
            return Err(Error::Contract("sym_eigenvalues needs a symmetric matrix".into()));
        }
        let n = self.rows;
        let mut a = self.symmetrize()?;
        let scale = a.frobenius_norm();
        let mut converged = scale == 0.0;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if converged {
                break;
            }
            let off: f64 = (0..n)
                .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[(i, j)] * a[(i, j)])
                .sum::<f64>()
                .sqrt();
            if off < JACOBI_TOLERANCE * scale {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        if !converged {
            return Err(Error::Contract(format!(
                "Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
        let mut eig = a.diagonal();
        eig.sort_by(|x, y| y.total_cmp(x));
        Ok(Vector { data: eig })
    }

    pub fn lambda_max(&self) -> Result<f64> {
        Ok(self.sym_eigenvalues()?[0])
    }

    pub fn lambda_min(&self) -> Result<f64> {
        let e = self.sym_eigenvalues()?;
        Ok(e[e.dim() - 1])
    }

    /// Spectral norm `sqrt(lambda_max(A^T A))`.
    pub fn operator_norm(&self) -> f64 {
        let ata = self.transpose().matmul(self).expect("A^T A is always conformable");
        // A^T A is symmetric by construction, so the eigen solve cannot reject it.
        let top = ata.lambda_max().expect("A^T A is symmetric");
        top.max(0.0).sqrt()
    }

    /// Solves `M x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &Vector) -> Result<Vector> {
        self.require_square("solve")?;
        if b.dim() != self.rows {
            return Err(Error::Dimension(format!(
                "right-hand side has {} entries, matrix has {} rows",
                b.dim(),
                self.rows
            )));
        }
        let n = self.rows;
        let threshold = SINGULAR_PIVOT * self.max_abs();
        let mut a = self.data.clone();
        let mut x = b.data.clone();
        for col in 0..n {
            let (pivot_row, pivot) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(Error::Singular(format!("pivot {pivot:e} in column {col}")));
            }
            if pivot_row != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot_row * n + k);
                }
                x.swap(col, pivot_row);
            }
            let diag = a[col * n + col];
            for r in col + 1..n {
                let factor = a[r * n + col] / diag;
                if factor == 0.0 {
                    continue;
                }
                for k in col..n {
                    a[r * n + k] -= factor * a[col * n + k];
                }
                x[r] -= factor * x[col];
            }
        }
        for r in (0..n).rev() {
            let tail: f64 = (r + 1..n).map(|k| a[r * n + k] * x[k]).sum();
            x[r] = (x[r] - tail) / a[r * n + r];
        }
        Ok(Vector { data: x })
    }

    /// Inverse via `n` solves against the identity columns.
    pub fn inverse(&self) -> Result<Matrix> {
        self.require_square("inverse")?;
        let n = self.rows;
        let mut inv = Matrix::zeros(n, n);
        for j in 0..n {
            let col = self.solve(&Vector::unit(n, j))?;
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// `v^T A v`.
    pub fn quadratic_form(&self, v: &Vector) -> Result<f64> {
        Ok(v.dot(&self.matvec(v)?))
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_list().entries(rows).finish()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch; the fallible methods above are the
// checked entry points.

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "matrix addition shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert!(self.rows == rhs.rows && self.cols == rhs.cols, "matrix subtraction shape mismatch");
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Mul<&Matrix> for f64 {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        rhs.scale(self)
    }
}

/// The three quantities compared by the moment inequality for `||x + y||^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentGap {
    /// `| ||x+y||^q - ||x||^q - q ||x||^(q-2) x^T y |`
    pub lhs: f64,
    /// `(||x|| + ||y||)^q - ||x||^q - q ||x||^(q-1) ||y||`
    pub rhs_i: f64,
    /// The moment-norm bound `[m_x + m_y]^q - m_x^q - q m_x^(q-1) m_y` with
    /// `m_x = (E||x||^q)^(1/q)`.
    pub rhs_ii: f64,
}

fn check_moment_order(q: f64) -> Result<()> {
    if q >= 2.0 && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("moment order must be >= 2, got {q}")))
    }
}

fn remainder(x: &[f64], y: &[f64], q: f64) -> f64 {
    let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nxy = x.iter().zip(y).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
    let xy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let lead = if nx == 0.0 { 0.0 } else { q * nx.powf(q - 2.0) * xy };
    (nxy.powf(q) - nx.powf(q) - lead).abs()
}

fn moment_bound(mx: f64, my: f64, q: f64) -> f64 {
    (mx + my).powf(q) - mx.powf(q) - q * mx.powf(q - 1.0) * my
}

/// Evaluates both sides of the deterministic moment inequality for one pair.
///
/// `lhs <= rhs_i` holds for every pair and every `q >= 2`. With single
/// observations the moment norms reduce to plain norms, so `rhs_ii` agrees
/// with `rhs_i` up to rounding.
pub fn moment_inequality_gap(x: &Vector, y: &Vector, q: f64) -> Result<MomentGap> {
    check_moment_order(q)?;
    if x.dim() != y.dim() {
        return Err(Error::Dimension(format!("{} vs {}", x.dim(), y.dim())));
    }
    let (nx, ny) = (x.norm(), y.norm());
    let lhs = remainder(x.as_slice(), y.as_slice(), q);
    let rhs_i = moment_bound(nx, ny, q);
    let rhs_ii = moment_bound(nx.powf(q).powf(1.0 / q), ny.powf(q).powf(1.0 / q), q);
    Ok(MomentGap { lhs, rhs_i, rhs_ii })
}

/// Sample-average version of the moment inequality over paired draws.
///
/// `lhs` is the mean remainder, `rhs_i` uses `E(||x|| + ||y||)^q` and
/// `E ||x||^(q-1) ||y||`, `rhs_ii` only the marginal q-th moments.
pub fn moment_inequality_sampled(xs: &[Vector], ys: &[Vector], q: f64) -> Result<MomentGap> {
    check_moment_order(q)?;
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(Error::Contract("need equally many (nonzero) x and y draws".into()));
    }
    let n = xs.len() as f64;
    let (mut lhs, mut sum_q, mut x_q, mut cross, mut y_q) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        if x.dim() != y.dim() {
            return Err(Error::Dimension(format!("{} vs {}", x.dim(), y.dim())));
        }
        let (nx, ny) = (x.norm(), y.norm());
        lhs += remainder(x.as_slice(), y.as_slice(), q);
        sum_q += (nx + ny).powf(q);
        x_q += nx.powf(q);
        y_q += ny.powf(q);
        cross += nx.powf(q - 1.0) * ny;
    }
    let (lhs, sum_q, x_q, y_q, cross) = (lhs / n, sum_q / n, x_q / n, y_q / n, cross / n);
    Ok(MomentGap {
        lhs,
        rhs_i: sum_q - x_q - q * cross,
        rhs_ii: moment_bound(x_q.powf(1.0 / q), y_q.powf(1.0 / q), q),
    })
}
