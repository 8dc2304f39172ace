//! Dense complex linear algebra: matrices, Kronecker products, Hermitian
//! eigendecomposition, spectral norms, span extraction, and matrix square
//! roots.
//!
//! Everything here is double precision and dense. The dimensions that show
//! up in this workbench stay in the hundreds (function spaces `M^N`,
//! database spaces `(M+1)^N`, permutation spaces `N!` up to 720), so a
//! straightforward row-major layout with cache-aware loops is fast enough
//! and keeps the numerics auditable.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex double-precision scalar used throughout the crate.
pub type C64 = Complex64;

/// Default cap on the number of entries a Kronecker product may produce.
pub const DEFAULT_KRON_CAP: usize = 1 << 20;

/// Dimension threshold below which spectral norms go through a full
/// eigendecomposition instead of power iteration.
const EIG_NORM_THRESHOLD: usize = 64;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// e^{2πι·k/m}, the primitive phase used by the Fourier transform and the
/// phase oracles.
pub fn root_of_unity(k: i64, m: usize) -> C64 {
    let angle = 2.0 * std::f64::consts::PI * (k as f64) / (m as f64);
    C64::new(angle.cos(), angle.sin())
}

// ---------------------------------------------------------------------------
// Vector helpers
// ---------------------------------------------------------------------------

/// ⟨u|v⟩, conjugate-linear in the first argument.
pub fn vec_inner(u: &[C64], v: &[C64]) -> C64 {
    debug_assert_eq!(u.len(), v.len());
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// v ← v + c·w
pub fn vec_axpy(v: &mut [C64], c: C64, w: &[C64]) {
    debug_assert_eq!(v.len(), w.len());
    for (a, b) in v.iter_mut().zip(w) {
        *a += c * b;
    }
}

/// Returns v/‖v‖, or None when ‖v‖ is numerically zero.
pub fn vec_normalize(v: &[C64]) -> Option<Vec<C64>> {
    let n = vec_norm(v);
    if n <= 1e-300 {
        return None;
    }
    Some(v.iter().map(|z| z / n).collect())
}

// ---------------------------------------------------------------------------
// CMatrix
// ---------------------------------------------------------------------------

/// Dense complex matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: Vec<Vec<C64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        CMatrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(ambient: usize, columns: &[Vec<C64>]) -> Self {
        let mut m = CMatrix::zeros(ambient, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), ambient, "column dimension mismatch");
            for i in 0..ambient {
                m.data[i * columns.len() + j] = col[i];
            }
        }
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m.data[i * n + i] = z;
        }
        m
    }

    pub fn diag_real(entries: &[f64]) -> Self {
        CMatrix::diag(&entries.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>())
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, other.rows,
            "dimension mismatch in matrix product: {}x{} times {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a_ik) in a_row.iter().enumerate() {
                if a_ik.norm_sqr() == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b_kj) in out_row.iter_mut().zip(b_row) {
                    *o += a_ik * b_kj;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in apply");
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum::<C64>()
            })
            .collect()
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    pub fn scale(&self, c: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| c * z).collect(),
        }
    }

    pub fn scale_real(&self, c: f64) -> CMatrix {
        self.scale(c64(c, 0.0))
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.get(i, j).conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn frob(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Entrywise deviation from the conjugate transpose, relative to the
    /// matrix scale. Zero matrices count as Hermitian.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let scale = self.max_abs().max(1.0);
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst / scale
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// (A + A†)/2. Used to scrub roundoff asymmetry before eigensolves.
    pub fn symmetrized(&self) -> CMatrix {
        assert!(self.is_square());
        self.add(&self.dagger()).scale_real(0.5)
    }

    /// Embeds `self` as the upper-left block of an n×n matrix.
    pub fn padded(&self, n: usize) -> CMatrix {
        assert!(n >= self.rows && n >= self.cols);
        let mut out = CMatrix::zeros(n, n);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }
}

/// Kronecker product with the default entry cap.
///
/// Entry ((i·rows_b + k),(j·cols_b + l)) equals a(i,j)·b(k,l), so the second
/// factor varies fastest, matching the register index conventions used in
/// the oracle and compressed modules.
pub fn kron(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    kron_with_cap(a, b, DEFAULT_KRON_CAP)
}

pub fn kron_with_cap(a: &CMatrix, b: &CMatrix, cap: usize) -> Result<CMatrix> {
    let rows = a.rows.checked_mul(b.rows);
    let cols = a.cols.checked_mul(b.cols);
    let (rows, cols) = match (rows, cols) {
        (Some(r), Some(c)) => (r, c),
        _ => return Err(Error::size("kronecker product dimensions overflow usize")),
    };
    match rows.checked_mul(cols) {
        Some(total) if total <= cap => {}
        _ => {
            return Err(Error::size(format!(
                "kronecker product would hold {rows}x{cols} entries, cap is {cap}"
            )))
        }
    }
    let mut out = CMatrix::zeros(rows, cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            if aij.norm_sqr() == 0.0 {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.set(i * b.rows + k, j * b.cols + l, aij * b.get(k, l));
                }
            }
        }
    }
    Ok(out)
}

/// Folds a slice of factors into one Kronecker product, left to right.
pub fn kron_all(factors: &[CMatrix]) -> Result<CMatrix> {
    let mut acc = CMatrix::identity(1);
    for f in factors {
        acc = kron(&acc, f)?;
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// Hermitian eigendecomposition (cyclic complex Jacobi)
// ---------------------------------------------------------------------------

/// Spectral decomposition of a Hermitian matrix: A = V·diag(values)·V†.
#[derive(Clone, Debug)]
pub struct HermEig {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Columns are the corresponding orthonormal eigenvectors.
    pub vectors: CMatrix,
}

impl HermEig {
    /// Reassembles V·diag(g(λ))·V† for an arbitrary spectral function g.
    pub fn apply_spectral(&self, g: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let glam = g(lam);
            if glam == 0.0 {
                continue;
            }
            let col = self.vectors.col(k);
            for i in 0..n {
                for j in 0..n {
                    let v = out.get(i, j) + glam * col[i] * col[j].conj();
                    out.set(i, j, v);
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi
/// rotations.
///
/// Each rotation annihilates one off-diagonal entry a_pq = r·e^{iθ} with the
/// unitary that is the identity outside rows/columns p, q and
///
/// ```text
///   G[p][p] = c      G[p][q] = s·e^{iθ}
///   G[q][p] = -s·e^{-iθ}   G[q][q] = c
/// ```
///
/// where τ = (a_qq − a_pp)/(2r), t = sign(τ)/(|τ| + √(1+τ²)), c = 1/√(1+t²),
/// s = t·c. Convergence is quadratic once the off-diagonal mass is small;
/// the sweep limit below has never been hit in practice.
pub fn herm_eig(a: &CMatrix) -> Result<HermEig> {
    if !a.is_square() {
        return Err(Error::param(format!(
            "herm_eig requires a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if a.hermiticity_defect() > 1e-10 {
        return Err(Error::param(
            "herm_eig requires a Hermitian matrix (defect above 1e-10)",
        ));
    }
    let n = a.rows;
    if n == 0 {
        return Ok(HermEig {
            values: vec![],
            vectors: CMatrix::zeros(0, 0),
        });
    }
    let mut m = a.symmetrized();
    let mut u = CMatrix::identity(n);
    let fnorm = m.frob();
    if fnorm > 0.0 {
        let target = 1e-14 * fnorm;
        // Entries below this are not worth a rotation on their own.
        let skip = target / (n as f64);
        for _sweep in 0..64 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m.get(p, q);
                    let r = apq.norm();
                    if r <= skip {
                        continue;
                    }
                    rotated = true;
                    let app = m.get(p, p).re;
                    let aqq = m.get(q, q).re;
                    let tau = (aqq - app) / (2.0 * r);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let phase = apq / r;
                    rotate_right(&mut m, p, q, c, s, phase);
                    rotate_left(&mut m, p, q, c, s, phase);
                    rotate_right(&mut u, p, q, c, s, phase);
                    // Pin the annihilated pair and the now-real diagonal.
                    let mpp = m.get(p, p).re;
                    let mqq = m.get(q, q).re;
                    m.set(p, p, c64(mpp, 0.0));
                    m.set(q, q, c64(mqq, 0.0));
                    m.set(p, q, c64(0.0, 0.0));
                    m.set(q, p, c64(0.0, 0.0));
                }
            }
            if !rotated {
                break;
            }
            let mut off = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off += m.get(i, j).norm_sqr();
                    }
                }
            }
            if off.sqrt() <= target {
                break;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            vectors.set(i, new_j, u.get(i, old_j));
        }
    }
    Ok(HermEig { values, vectors })
}

/// M ← M·G, touching only columns p and q.
fn rotate_right(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let se_neg = phase.conj() * s;
    let se_pos = phase * s;
    for k in 0..m.rows {
        let mp = m.get(k, p);
        let mq = m.get(k, q);
        m.set(k, p, mp * c - mq * se_neg);
        m.set(k, q, mp * se_pos + mq * c);
    }
}

/// M ← G†·M, touching only rows p and q.
fn rotate_left(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let se_pos = phase * s;
    let se_neg = phase.conj() * s;
    for k in 0..m.cols {
        let mp = m.get(p, k);
        let mq = m.get(q, k);
        m.set(p, k, mp * c - mq * se_pos);
        m.set(q, k, mp * se_neg + mq * c);
    }
}

// ---------------------------------------------------------------------------
// Spectral norm
// ---------------------------------------------------------------------------

/// Largest singular value.
///
/// The norm is extracted from the Gram matrix of the smaller side. Small
/// Gram matrices go through the Jacobi eigensolver; larger ones use squared
/// power iteration from two fixed starting vectors, falling back to the
/// eigensolver in the (never yet observed) event that the two runs
/// disagree. Deterministic by construction.
pub fn spectral_norm(a: &CMatrix) -> f64 {
    if a.rows == 0 || a.cols == 0 {
        return 0.0;
    }
    let gram = if a.rows <= a.cols {
        a.mul(&a.dagger())
    } else {
        a.dagger().mul(a)
    };
    top_eigenvalue_psd(&gram).max(0.0).sqrt()
}

fn top_eigenvalue_psd(g: &CMatrix) -> f64 {
    let n = g.rows;
    let scale = g.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    if n <= EIG_NORM_THRESHOLD {
        return top_eigenvalue_by_jacobi(g);
    }
    let est1 = power_iterate(g, |j| c64(1.0 + (1.7 * j as f64 + 0.3).sin().abs(), 0.0));
    let est2 = power_iterate(g, |j| c64((2.3 * j as f64).cos() + 1.5, 0.1));
    let (lo, hi) = if est1 <= est2 { (est1, est2) } else { (est2, est1) };
    if hi - lo > 1e-11 * scale.max(1.0) {
        return top_eigenvalue_by_jacobi(g);
    }
    hi
}

fn top_eigenvalue_by_jacobi(g: &CMatrix) -> f64 {
    let eig = herm_eig(&g.symmetrized()).expect("gram matrix must be Hermitian");
    eig.values.last().copied().unwrap_or(0.0)
}

/// Power iteration on a PSD matrix with a squared step (two mat-vecs per
/// iteration), returning the dominant eigenvalue via the Rayleigh quotient.
fn power_iterate(g: &CMatrix, start: impl Fn(usize) -> C64) -> f64 {
    let n = g.rows;
    let mut v: Vec<C64> = (0..n).map(&start).collect();
    let nv = vec_norm(&v);
    for z in v.iter_mut() {
        *z /= nv;
    }
    let mut prev = 0.0f64;
    for iter in 0..8000 {
        let w = g.apply(&g.apply(&v));
        let nw = vec_norm(&w);
        if nw <= 1e-300 {
            return 0.0;
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / nw;
        }
        if iter % 8 == 7 {
            let gv = g.apply(&v);
            let rayleigh = vec_inner(&v, &gv).re;
            if (rayleigh - prev).abs() <= 5e-14 * rayleigh.abs().max(1e-30) {
                return rayleigh;
            }
            prev = rayleigh;
        }
    }
    prev
}

/// √(‖A‖₁·‖A‖∞) with the max-column-sum and max-row-sum norms. Always an
/// upper bound on the spectral norm; tight for the bidiagonal block
/// patterns it is used on.
pub fn holder_bound(a: &CMatrix) -> f64 {
    if a.rows == 0 || a.cols == 0 {
        return 0.0;
    }
    let mut col_sums = vec![0.0f64; a.cols];
    let mut row_max = 0.0f64;
    for i in 0..a.rows {
        let mut row_sum = 0.0f64;
        for j in 0..a.cols {
            let v = a.get(i, j).norm();
            row_sum += v;
            col_sums[j] += v;
        }
        row_max = row_max.max(row_sum);
    }
    let col_max = col_sums.iter().copied().fold(0.0, f64::max);
    (col_max * row_max).sqrt()
}

// ---------------------------------------------------------------------------
// Isometries and spans
// ---------------------------------------------------------------------------

/// A matrix V with orthonormal columns, V†V = I. Projectors throughout the
/// crate are carried in this column-basis form; the dense projector VV† is
/// only materialised on request.
#[derive(Clone, Debug)]
pub struct Isometry {
    ambient: usize,
    basis: CMatrix,
}

impl Isometry {
    /// Wraps a matrix after checking V†V = I to 1e-10.
    pub fn from_matrix(basis: CMatrix) -> Result<Self> {
        let gram = basis.dagger().mul(&basis);
        let defect = gram.sub(&CMatrix::identity(basis.cols)).max_abs();
        if defect > 1e-10 {
            return Err(Error::param(format!(
                "columns are not orthonormal (defect {defect:.2e})"
            )));
        }
        Ok(Isometry {
            ambient: basis.rows,
            basis,
        })
    }

    pub fn empty(ambient: usize) -> Self {
        Isometry {
            ambient,
            basis: CMatrix::zeros(ambient, 0),
        }
    }

    /// Full identity on the ambient space.
    pub fn full(ambient: usize) -> Self {
        Isometry {
            ambient,
            basis: CMatrix::identity(ambient),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn rank(&self) -> usize {
        self.basis.cols
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// Dense projector VV†.
    pub fn projector(&self) -> CMatrix {
        self.basis.mul(&self.basis.dagger())
    }

    /// V†·w, the coordinates of a vector in the column basis.
    pub fn coords(&self, w: &[C64]) -> Vec<C64> {
        assert_eq!(w.len(), self.ambient);
        (0..self.rank())
            .map(|j| {
                (0..self.ambient)
                    .map(|i| self.basis.get(i, j).conj() * w[i])
                    .sum()
            })
            .collect()
    }

    /// Projects w onto the span, returning VV†·w.
    pub fn project_vec(&self, w: &[C64]) -> Vec<C64> {
        let c = self.coords(w);
        let mut out = vec![c64(0.0, 0.0); self.ambient];
        for (j, cj) in c.iter().enumerate() {
            for i in 0..self.ambient {
                out[i] += cj * self.basis.get(i, j);
            }
        }
        out
    }

    /// ‖(I − VV†)w‖, the distance from w to the span.
    pub fn residual_norm(&self, w: &[C64]) -> f64 {
        let p = self.project_vec(w);
        let diff: Vec<C64> = w.iter().zip(&p).map(|(a, b)| a - b).collect();
        vec_norm(&diff)
    }

    /// Extends the column basis to a full orthonormal basis of the ambient
    /// space and returns the complementary isometry, so that
    /// self·self† + result·result† = I.
    pub fn complement(&self) -> Isometry {
        let mut cols: Vec<Vec<C64>> = (0..self.rank()).map(|j| self.basis.col(j)).collect();
        let mut comp: Vec<Vec<C64>> = Vec::with_capacity(self.ambient - self.rank());
        for i in 0..self.ambient {
            if cols.len() == self.ambient {
                break;
            }
            let mut e = vec![c64(0.0, 0.0); self.ambient];
            e[i] = c64(1.0, 0.0);
            for _pass in 0..2 {
                for c in &cols {
                    let ov = vec_inner(c, &e);
                    vec_axpy(&mut e, -ov, c);
                }
            }
            if let Some(u) = vec_normalize_with_floor(&e, 1e-8) {
                cols.push(u.clone());
                comp.push(u);
            }
        }
        assert_eq!(
            comp.len(),
            self.ambient - self.rank(),
            "complement construction lost rank"
        );
        Isometry {
            ambient: self.ambient,
            basis: CMatrix::from_columns(self.ambient, &comp),
        }
    }
}

fn vec_normalize_with_floor(v: &[C64], floor: f64) -> Option<Vec<C64>> {
    let n = vec_norm(v);
    if n <= floor {
        return None;
    }
    Some(v.iter().map(|z| z / n).collect())
}

/// Orthonormal basis for the span of the given vectors.
///
/// Modified Gram-Schmidt with a second reorthogonalisation pass. A vector is
/// dropped when its residual falls to `tol` times the largest input norm, so
/// `tol` plays the role of a relative rank cutoff. An empty input yields the
/// rank-0 isometry on a 0-dimensional ambient space; use
/// [`span_isometry_in`] when the ambient dimension must survive an empty
/// spanning set.
pub fn span_isometry(vectors: &[Vec<C64>], tol: f64) -> Result<Isometry> {
    let ambient = vectors.first().map_or(0, |v| v.len());
    span_isometry_in(ambient, vectors, tol)
}

/// Same as [`span_isometry`] with an explicit ambient dimension.
pub fn span_isometry_in(ambient: usize, vectors: &[Vec<C64>], tol: f64) -> Result<Isometry> {
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut max_norm = 0.0f64;
    for v in vectors {
        if v.len() != ambient {
            return Err(Error::param(format!(
                "span vectors disagree on ambient dimension ({} vs {ambient})",
                v.len()
            )));
        }
        max_norm = max_norm.max(vec_norm(v));
    }
    let cutoff = tol * max_norm;
    for v in vectors {
        if basis.len() == ambient {
            break;
        }
        let mut w = v.clone();
        for _pass in 0..2 {
            for b in &basis {
                let ov = vec_inner(b, &w);
                vec_axpy(&mut w, -ov, b);
            }
        }
        let n = vec_norm(&w);
        if n > cutoff && n > 1e-300 {
            basis.push(w.iter().map(|z| z / n).collect());
        }
    }
    Ok(Isometry {
        ambient,
        basis: CMatrix::from_columns(ambient, &basis),
    })
}

// ---------------------------------------------------------------------------
// Matrix square roots and fidelity
// ---------------------------------------------------------------------------

fn psd_eig(a: &CMatrix, context: &str) -> Result<HermEig> {
    let eig = herm_eig(a)?;
    let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    let floor = -1e-8 * top.max(1.0);
    if let Some(&min) = eig.values.first() {
        if min < floor {
            return Err(Error::param(format!(
                "{context} requires a PSD matrix (eigenvalue {min:.3e})"
            )));
        }
    }
    Ok(eig)
}

/// Hermitian PSD square root via eigendecomposition. Eigenvalues within
/// roundoff of zero are clamped to zero.
pub fn mat_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = psd_eig(a, "mat_sqrt")?;
    Ok(eig.apply_spectral(|lam| lam.max(0.0).sqrt()))
}

/// Inverse square root of a Hermitian positive definite matrix.
pub fn mat_inv_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let eig = psd_eig(a, "mat_inv_sqrt")?;
    if let Some(&min) = eig.values.first() {
        if min <= 1e-12 {
            return Err(Error::singular(format!(
                "mat_inv_sqrt needs eigenvalues above 1e-12, found {min:.3e}"
            )));
        }
    }
    Ok(eig.apply_spectral(|lam| 1.0 / lam.sqrt()))
}

/// Uhlmann fidelity Tr√(√ρ·σ·√ρ) between two density matrices.
pub fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    for (name, m) in [("rho", rho), ("sigma", sigma)] {
        if !m.is_square() {
            return Err(Error::param(format!("fidelity argument {name} not square")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::param(format!(
                "fidelity argument {name} must have unit trace, got {tr}"
            )));
        }
    }
    let s = mat_sqrt(rho)?;
    let inner = s.mul(sigma).mul(&s);
    let eig = psd_eig(&inner.symmetrized(), "fidelity")?;
    Ok(eig.values.iter().map(|&lam| lam.max(0.0).sqrt()).sum())
}
