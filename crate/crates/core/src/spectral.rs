//! Dense symmetric eigensolvers and the PSD-order measurements built on them.
//!
//! Two solvers are provided. Cyclic Jacobi is the reference: slow but with
//! excellent orthogonality and small-eigenvalue accuracy. Householder
//! tridiagonalization followed by implicit QL is used for larger matrices
//! and for eigenvalue-only queries. [`EigenMethod::Auto`] switches at
//! [`JACOBI_MAX_DIM`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Largest dimension `EigenMethod::Auto` hands to Jacobi.
pub const JACOBI_MAX_DIM: usize = 96;

/// Jacobi stops once the off-diagonal Frobenius mass falls below this
/// fraction of `‖A‖_F`.
pub const JACOBI_OFF_DIAGONAL_TOL: f64 = 1e-14;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Relative asymmetry tolerated by the eigensolvers.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Default tolerance for [`psd_leq`].
pub const DEFAULT_PSD_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenMethod {
    Jacobi,
    TridiagonalQl,
    #[default]
    Auto,
}

impl EigenMethod {
    fn resolve(self, n: usize) -> EigenMethod {
        match self {
            EigenMethod::Auto if n <= JACOBI_MAX_DIM => EigenMethod::Jacobi,
            EigenMethod::Auto => EigenMethod::TridiagonalQl,
            m => m,
        }
    }
}

/// Eigenvalues in nondecreasing order with an orthonormal eigenbasis stored
/// column-wise.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    basis: Matrix,
    rank_tol: f64,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Column `j` is the eigenvector of `eigenvalues()[j]`.
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn eigenvector(&self, j: usize) -> Vec<f64> {
        self.basis.column(j)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Relative threshold below which eigenvalues count as zero.
    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn with_rank_tol(mut self, rank_tol: f64) -> Self {
        self.rank_tol = rank_tol;
        self
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    /// Largest eigenvalue magnitude.
    pub fn spectral_norm(&self) -> f64 {
        self.lambda_min().abs().max(self.lambda_max().abs())
    }

    /// Absolute cutoff `rank_tol · max|λ|`.
    pub fn zero_threshold(&self) -> f64 {
        self.rank_tol * self.spectral_norm()
    }

    pub fn rank(&self) -> usize {
        let t = self.zero_threshold();
        self.eigenvalues.iter().filter(|l| l.abs() > t).count()
    }

    /// `Q f(Λ) Qᵀ`
    pub fn map_eigenvalues(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.dim();
        let mut out = Matrix::zeros(n);
        let mapped: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        for i in 0..n {
            let qi = self.basis.row(i);
            for j in i..n {
                let qj = self.basis.row(j);
                let mut s = 0.0;
                for k in 0..n {
                    s += qi[k] * mapped[k] * qj[k];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map_eigenvalues(|l| l)
    }

    /// `‖QᵀQ − I‖_max`
    pub fn orthogonality_error(&self) -> f64 {
        let qt = self.basis.transpose();
        let prod = qt.matmul(&self.basis).expect("square");
        prod.sub(&Matrix::identity(self.dim()))
            .expect("square")
            .max_abs()
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

fn default_rank_tol(n: usize) -> f64 {
    n.max(1) as f64 * 2.2e-16
}

/// Full eigendecomposition of a symmetric matrix.
pub fn eig_sym(a: &Matrix) -> Result<SpectralDecomposition> {
    eig_sym_with(a, EigenMethod::Auto)
}

pub fn eig_sym_with(a: &Matrix, method: EigenMethod) -> Result<SpectralDecomposition> {
    check_symmetric(a)?;
    let n = a.dim();
    let (vals, vecs) = match method.resolve(n) {
        EigenMethod::Jacobi => jacobi(a),
        _ => {
            let (vals, vecs) = tridiagonal_ql(a, true);
            (vals, vecs.expect("vectors requested"))
        }
    };
    Ok(sort_decomposition(vals, vecs, default_rank_tol(n)))
}

/// Eigenvalues only, nondecreasing. Skips eigenvector accumulation in the
/// QL path, which is most of its cost.
pub fn eigvals_sym(a: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let n = a.dim();
    let mut vals = if n <= JACOBI_MAX_DIM {
        jacobi(a).0
    } else {
        tridiagonal_ql(a, false).0
    };
    vals.sort_by(|x, y| x.total_cmp(y));
    Ok(vals)
}

pub fn lambda_max(a: &Matrix) -> Result<f64> {
    Ok(eigvals_sym(a)?.last().copied().unwrap_or(0.0))
}

pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    let v = eigvals_sym(a)?;
    Ok(v.first()
        .map(|x| x.abs())
        .unwrap_or(0.0)
        .max(v.last().map(|x| x.abs()).unwrap_or(0.0)))
}

fn sort_decomposition(vals: Vec<f64>, vecs: Matrix, rank_tol: f64) -> SpectralDecomposition {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    let mut basis = Matrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            basis[(r, new_col)] = vecs[(r, old_col)];
        }
    }
    SpectralDecomposition {
        eigenvalues: order.iter().map(|&i| vals[i]).collect(),
        basis,
        rank_tol,
    }
}

/// Cyclic Jacobi rotations. Returns unsorted eigenvalues and eigenvectors
/// as columns.
fn jacobi(a_in: &Matrix) -> (Vec<f64>, Matrix) {
    let n = a_in.dim();
    let mut a = a_in.clone();
    a.symmetrize();
    let mut v = Matrix::identity(n);
    let target = JACOBI_OFF_DIAGONAL_TOL * a.frobenius_norm();
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += 2.0 * a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= target {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
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
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diagonal(), v)
}

/// Householder reduction to tridiagonal form followed by the implicit QL
/// iteration (the EISPACK tred2/tql2 pair).
fn tridiagonal_ql(a_in: &Matrix, want_vectors: bool) -> (Vec<f64>, Option<Matrix>) {
    let n = a_in.dim();
    if n == 0 {
        return (Vec::new(), want_vectors.then(|| Matrix::zeros(0)));
    }
    let mut v = a_in.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // tred2
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if want_vectors && h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;

    // tql2
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    (d, want_vectors.then_some(v))
}

/// `A^{†/2}`: eigenvalues below the rank threshold map to zero, the rest to
/// `λ^{−1/2}`.
pub fn pinv_sqrt(dec: &SpectralDecomposition) -> Result<Matrix> {
    let t = check_psd(dec)?;
    Ok(dec.map_eigenvalues(|l| if l > t { 1.0 / l.sqrt() } else { 0.0 }))
}

/// Moore–Penrose pseudoinverse of a PSD matrix.
pub fn pinv(dec: &SpectralDecomposition) -> Result<Matrix> {
    let t = check_psd(dec)?;
    Ok(dec.map_eigenvalues(|l| if l > t { 1.0 / l } else { 0.0 }))
}

fn check_psd(dec: &SpectralDecomposition) -> Result<f64> {
    let t = dec.zero_threshold();
    if dec.lambda_min() < -t {
        return Err(Error::NotPsd {
            eigenvalue: dec.lambda_min(),
        });
    }
    Ok(t)
}

fn check_annihilates_ones(l: &Matrix, what: &str) -> Result<()> {
    let scale = l.max_abs().max(f64::MIN_POSITIVE);
    for i in 0..l.dim() {
        let s: f64 = l.row(i).iter().sum();
        if s.abs() > 1e-9 * scale * (l.dim() as f64).sqrt() {
            return Err(Error::Precondition(format!(
                "{what} has row {i} summing to {s:e}; the all-ones vector must be in its null space"
            )));
        }
    }
    Ok(())
}

/// `(L^†)^{1/2}` of a connected-graph Laplacian.
///
/// The all-ones direction is shifted to a known eigenvalue before the
/// eigensolve and removed afterwards, so the result never depends on how
/// close the computed zero eigenvalue lands to zero.
pub fn laplacian_pinv_sqrt(l: &Matrix) -> Result<Matrix> {
    check_symmetric(l)?;
    check_annihilates_ones(l, "Laplacian")?;
    let n = l.dim();
    let shift = (l.trace() / n as f64).max(f64::MIN_POSITIVE);
    let mut shifted = l.clone();
    shifted.add_scaled(
        &Matrix::from_rows(&vec![vec![shift / n as f64; n]; n])?,
        1.0,
    )?;
    let dec = eig_sym(&shifted)?;
    let t = dec.zero_threshold().max(f64::MIN_POSITIVE);
    if dec.lambda_min() <= t {
        return Err(Error::Precondition(format!(
            "Laplacian has a second null direction (eigenvalue {:e}); graph is disconnected",
            dec.lambda_min()
        )));
    }
    let mut p = dec.map_eigenvalues(|x| 1.0 / x.sqrt());
    let correction = 1.0 / (shift.sqrt() * n as f64);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] -= correction;
        }
    }
    Ok(p)
}

/// `Qᵀ A Q` where the columns of `Q` are an orthonormal basis of `1^⊥`.
///
/// `Q` is the first `n − 1` columns of the Householder reflector that sends
/// `1/√n` to the last coordinate vector.
pub fn deflate_ones(a: &Matrix) -> Matrix {
    let n = a.dim();
    assert!(n >= 2, "deflation needs n >= 2");
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    v[n - 1] -= 1.0;
    let c = 2.0 / v.iter().map(|x| x * x).sum::<f64>();
    // HA = A − c v (vᵀA)
    let mut vt_a = vec![0.0; n];
    for i in 0..n {
        let vi = v[i];
        for (acc, &x) in vt_a.iter_mut().zip(a.row(i)) {
            *acc += vi * x;
        }
    }
    let mut ha = a.clone();
    for i in 0..n {
        let cvi = c * v[i];
        for (x, &y) in ha.row_mut(i).iter_mut().zip(&vt_a) {
            *x -= cvi * y;
        }
    }
    // (HA)H = HA − c (HA v) vᵀ
    let hav: Vec<f64> = (0..n)
        .map(|i| ha.row(i).iter().zip(&v).map(|(x, y)| x * y).sum())
        .collect();
    for i in 0..n {
        let s = c * hav[i];
        for (x, &vj) in ha.row_mut(i).iter_mut().zip(&v) {
            *x -= s * vj;
        }
    }
    let mut out = ha.leading_block(n - 1);
    out.symmetrize();
    out
}

/// Extreme eigenvalues of the normalized pencil on `range(L_G)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilExtremes {
    pub lambda_min_pos: f64,
    pub lambda_max: f64,
}

impl PencilExtremes {
    /// Both extremes inside `[1 − ε, 1 + ε]`.
    pub fn within(&self, eps: f64) -> bool {
        self.lambda_min_pos >= 1.0 - eps && self.lambda_max <= 1.0 + eps
    }

    /// `max(|λ_min − 1|, |λ_max − 1|)`
    pub fn deviation(&self) -> f64 {
        (1.0 - self.lambda_min_pos)
            .abs()
            .max((self.lambda_max - 1.0).abs())
    }
}

/// Conjugation by `(L_G^†)^{1/2}`, computed once per base graph and reused
/// for every candidate `L_H`.
#[derive(Clone, Debug)]
pub struct NormalizedFrame {
    pinv_sqrt: Matrix,
}

impl NormalizedFrame {
    pub fn new(l_g: &Matrix) -> Result<Self> {
        Ok(Self {
            pinv_sqrt: laplacian_pinv_sqrt(l_g)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.pinv_sqrt.dim()
    }

    pub fn pinv_sqrt(&self) -> &Matrix {
        &self.pinv_sqrt
    }

    /// `(L_G^†)^{1/2} L_H (L_G^†)^{1/2}`
    pub fn normalize(&self, l_h: &Matrix) -> Result<Matrix> {
        let mut m = self.pinv_sqrt.matmul(l_h)?.matmul(&self.pinv_sqrt)?;
        m.symmetrize();
        Ok(m)
    }

    /// `√w · (L_G^†)^{1/2} b` for the incidence vector `b = e_head − e_tail`;
    /// the normalized edge matrix is the outer product of this vector.
    pub fn edge_vector(&self, head: usize, tail: usize, weight: f64) -> Vec<f64> {
        let s = weight.sqrt();
        let n = self.dim();
        (0..n)
            .map(|i| s * (self.pinv_sqrt[(i, head)] - self.pinv_sqrt[(i, tail)]))
            .collect()
    }

    pub fn extremes(&self, l_h: &Matrix) -> Result<PencilExtremes> {
        if l_h.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: l_h.dim(),
            });
        }
        let normalized = self.normalize(l_h)?;
        let vals = eigvals_sym(&deflate_ones(&normalized))?;
        let lo = vals.first().copied().unwrap_or(0.0);
        let hi = vals.last().copied().unwrap_or(0.0);
        Ok(PencilExtremes {
            lambda_min_pos: lo.max(0.0),
            lambda_max: hi,
        })
    }

    pub fn lambda_max(&self, l_h: &Matrix) -> Result<f64> {
        Ok(self.extremes(l_h)?.lambda_max)
    }
}

/// Extreme eigenvalues of `(L_G^†)^{1/2} L_H (L_G^†)^{1/2}` on `1^⊥`.
/// A disconnected `H` yields `lambda_min_pos = 0`.
pub fn normalized_pencil(l_g: &Matrix, l_h: &Matrix) -> Result<PencilExtremes> {
    check_annihilates_ones(l_h, "L_H")?;
    NormalizedFrame::new(l_g)?.extremes(l_h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdOrderVerdict {
    pub holds: bool,
    /// Most negative eigenvalue of `B − A` off the shared null space of `A` and `B`.
    pub witness_gap: f64,
    pub tol: f64,
}

/// Decides `A ⪯ B`.
pub fn psd_leq(a: &Matrix, b: &Matrix, tol: f64) -> Result<PsdOrderVerdict> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    check_symmetric(a)?;
    check_symmetric(b)?;
    let n = a.dim();
    let norm_a = spectral_norm(a)?;
    let norm_b = spectral_norm(b)?;
    let scale = norm_a.max(norm_b).max(1.0);
    let diff = b.sub(a)?;

    // Shared null space of A and B is the null space of A² + B².
    let gram = a.square().add(&b.square())?;
    let dec = eig_sym(&gram)?;
    let cutoff = (n as f64 * 1e-13) * scale * scale;
    let keep: Vec<usize> = (0..n).filter(|&j| dec.eigenvalues()[j] > cutoff).collect();
    let witness_gap = if keep.is_empty() {
        0.0
    } else {
        let r = keep.len();
        let cols: Vec<Vec<f64>> = keep.iter().map(|&j| dec.eigenvector(j)).collect();
        let mut projected = Matrix::zeros(r);
        let dcols: Vec<Vec<f64>> = cols.iter().map(|c| diff.matvec(c).expect("dims")).collect();
        for i in 0..r {
            for j in i..r {
                let s: f64 = cols[i].iter().zip(&dcols[j]).map(|(x, y)| x * y).sum();
                projected[(i, j)] = s;
                projected[(j, i)] = s;
            }
        }
        eigvals_sym(&projected)?[0]
    };
    Ok(PsdOrderVerdict {
        holds: witness_gap >= -tol * scale,
        witness_gap,
        tol,
    })
}

/// `(A − B)² ⪯ 2A² + 2B²` for symmetric `A`, `B`.
pub fn check_symmetric_triangle(a: &Matrix, b: &Matrix) -> Result<PsdOrderVerdict> {
    let lhs = a.sub(b)?.square();
    let mut rhs = a.square().scaled(2.0);
    rhs.add_scaled(&b.square(), 2.0)?;
    psd_leq(&lhs, &rhs, DEFAULT_PSD_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, laplacian, path};

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn identity_eigenvalues() {
        let dec = eig_sym(&Matrix::identity(4)).unwrap();
        assert_close(dec.eigenvalues(), &[1.0; 4], 1e-15);
    }

    #[test]
    fn triangle_and_path_spectra() {
        let k3 = laplacian(&complete(3).unwrap());
        for method in [EigenMethod::Jacobi, EigenMethod::TridiagonalQl] {
            let dec = eig_sym_with(&k3, method).unwrap();
            assert_close(dec.eigenvalues(), &[0.0, 3.0, 3.0], 1e-13);
            // characteristic polynomial of the 3-vertex path: λ(λ−1)(λ−3)
            let p3 = laplacian(&path(3).unwrap());
            let dec = eig_sym_with(&p3, method).unwrap();
            assert_close(dec.eigenvalues(), &[0.0, 1.0, 3.0], 1e-13);
        }
    }

    #[test]
    fn rejects_asymmetric_input() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(eig_sym(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn pinv_sqrt_examples() {
        let dec = eig_sym(&Matrix::identity(3)).unwrap();
        let p = pinv_sqrt(&dec).unwrap();
        assert!(p.sub(&Matrix::identity(3)).unwrap().max_abs() < 1e-15);

        let d = Matrix::from_diagonal(&[0.0, 4.0]);
        let p = pinv_sqrt(&eig_sym(&d).unwrap()).unwrap();
        assert_close(p.as_slice(), &[0.0, 0.0, 0.0, 0.5], 1e-15);
    }

    #[test]
    fn pinv_sqrt_rejects_negative() {
        let d = Matrix::from_diagonal(&[-1.0, 4.0]);
        assert!(matches!(
            pinv_sqrt(&eig_sym(&d).unwrap()),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn complete_graph_normalizes_to_projection() {
        let n = 6;
        let l = laplacian(&complete(n).unwrap());
        let p = pinv_sqrt(&eig_sym(&l).unwrap()).unwrap();
        // nonzero eigenvalues n map to n^{-1/2}
        let vals = eigvals_sym(&p).unwrap();
        assert!(vals[0].abs() < 1e-12);
        for v in &vals[1..] {
            assert!((v - 1.0 / (n as f64).sqrt()).abs() < 1e-12);
        }
        let pi = p.matmul(&l).unwrap().matmul(&p).unwrap();
        assert!(pi.sub(&Matrix::centering_projection(n)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn shifted_route_matches_generic_pinv_sqrt() {
        let l = laplacian(&path(5).unwrap());
        let a = laplacian_pinv_sqrt(&l).unwrap();
        let b = pinv_sqrt(&eig_sym(&l).unwrap()).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn pencil_of_self_and_scaled() {
        let l = laplacian(&complete(5).unwrap());
        let e = normalized_pencil(&l, &l).unwrap();
        assert!((e.lambda_min_pos - 1.0).abs() < 1e-12 && (e.lambda_max - 1.0).abs() < 1e-12);
        let e2 = normalized_pencil(&l, &l.scaled(2.0)).unwrap();
        assert!((e2.lambda_min_pos - 2.0).abs() < 1e-12 && (e2.lambda_max - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pencil_reports_zero_for_disconnected_h() {
        let l = laplacian(&complete(4).unwrap());
        let h = crate::graph::laplacian_with_weights(4, [(0, 1, 1.0), (2, 3, 1.0)]);
        let e = normalized_pencil(&l, &h).unwrap();
        assert!(e.lambda_min_pos.abs() < 1e-12);
    }

    #[test]
    fn pencil_rejects_non_laplacian_h() {
        let l = laplacian(&complete(3).unwrap());
        assert!(normalized_pencil(&l, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn psd_leq_examples() {
        let zero = Matrix::zeros(3);
        let l = laplacian(&complete(3).unwrap());
        assert!(psd_leq(&zero, &l, DEFAULT_PSD_TOL).unwrap().holds);

        let a = Matrix::from_diagonal(&[2.0, 0.0]);
        let b = Matrix::from_diagonal(&[1.0, 1.0]);
        let v = psd_leq(&a, &b, DEFAULT_PSD_TOL).unwrap();
        assert!(!v.holds);
        assert!((v.witness_gap + 1.0).abs() < 1e-12);

        assert!(matches!(
            psd_leq(&Matrix::zeros(2), &Matrix::zeros(3), DEFAULT_PSD_TOL),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn psd_leq_ignores_shared_null_space() {
        // both annihilate 1; B − A is positive on 1^⊥ so the gap is positive
        let l = laplacian(&complete(4).unwrap());
        let v = psd_leq(&l, &l.scaled(3.0), DEFAULT_PSD_TOL).unwrap();
        assert!(v.holds);
        assert!((v.witness_gap - 8.0).abs() < 1e-10);
    }

    #[test]
    fn triangle_fact_trivial_cases() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, -3.0]]).unwrap();
        assert!(check_symmetric_triangle(&a, &a).unwrap().holds);
        assert!(
            check_symmetric_triangle(&a, &Matrix::zeros(2))
                .unwrap()
                .holds
        );
    }

    #[test]
    fn deflation_preserves_nonzero_spectrum() {
        let l = laplacian(&path(4).unwrap());
        let full = eigvals_sym(&l).unwrap();
        let defl = eigvals_sym(&deflate_ones(&l)).unwrap();
        assert_close(&defl, &full[1..], 1e-12);
    }

    #[test]
    fn large_matrix_solvers_agree() {
        // 120 > JACOBI_MAX_DIM: Auto uses QL; compare with forced Jacobi
        let g = crate::graph::Construction::ErdosRenyiConnected {
            n: 120,
            p: 0.1,
            seed: 3,
        }
        .build()
        .unwrap();
        let l = laplacian(&g);
        let ql = eig_sym(&l).unwrap();
        let jac = eig_sym_with(&l, EigenMethod::Jacobi).unwrap();
        let scale = ql.spectral_norm();
        for (a, b) in ql.eigenvalues().iter().zip(jac.eigenvalues()) {
            assert!((a - b).abs() < 1e-11 * scale);
        }
        for dec in [&ql, &jac] {
            assert!(dec.orthogonality_error() < 1e-10);
            assert!(dec.reconstruct().sub(&l).unwrap().max_abs() < 1e-10 * scale);
        }
        let vals_only = eigvals_sym(&l).unwrap();
        for (a, b) in vals_only.iter().zip(ql.eigenvalues()) {
            assert!((a - b).abs() < 1e-11 * scale);
        }
    }
}
