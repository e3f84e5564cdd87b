//! Dense complex linear algebra kernel.
//!
//! Provides exactly the primitives the channel calculus and the feasibility
//! solver need: Kronecker products, partial traces over tensor factors,
//! Hermitian eigendecomposition (cyclic complex Jacobi), projection onto the
//! PSD cone, and seeded random isometries. All matrices are dense, row-major,
//! `Complex64`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::Result;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Tolerance below which a symmetrized matrix is accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Ordered subsystem dimensions annotating a tensor-factor structure.
///
/// Factor 0 is the leftmost tensor factor; flat indices are row-major over
/// the factors, so factor 0 has the largest stride.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimTuple(pub Vec<usize>);

impl DimTuple {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(
                "subsystem dimensions must be positive".into(),
            ));
        }
        Ok(DimTuple(dims))
    }

    pub fn product(&self) -> usize {
        self.0.iter().product()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Stride of each factor in the flat row-major index.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.0.len();
        let mut s = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.0[k + 1];
        }
        s
    }
}

impl From<Vec<usize>> for DimTuple {
    fn from(dims: Vec<usize>) -> Self {
        DimTuple(dims)
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C_ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = C_ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Build from rows of (re, im) pairs; rows must have equal length.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let c = rows[0].len();
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            data.extend_from_slice(row);
        }
        Ok(CMatrix { rows: r, cols: c, data })
    }

    /// Column basis vector |i⟩ of dimension `n`.
    pub fn basis_vector(n: usize, i: usize) -> Self {
        let mut v = CMatrix::zeros(n, 1);
        v.data[i] = C_ONE;
        v
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Self {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose A†.
    pub fn dagger(&self) -> Self {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn matmul(&self, other: &CMatrix) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == C_ZERO {
                    continue;
                }
                let row_b = &other.data[k * other.cols..(k + 1) * other.cols];
                let row_o = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in row_o.iter_mut().zip(row_b) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        debug_assert!(self.is_square());
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// Real part of tr[A·B] for Hermitian inputs this is the Frobenius inner product.
    pub fn inner_re(&self, other: &CMatrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        // tr[A B] = Σ_ij A_ij B_ji; for Hermitian A: Σ_ij conj(A_ji) B_ji.
        let mut acc = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                acc += (self.get(j, i) * other.get(i, j)).re;
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |A - A†| over entries.
    pub fn hermitian_deviation(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    /// Hermitian symmetrization (A + A†)/2.
    pub fn hermitize(&self) -> Self {
        CMatrix::from_fn(self.rows, self.cols, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        })
    }

    /// Smallest eigenvalue of the symmetrized matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = eigh(self).expect("min_eigenvalue: input not Hermitian");
        *eig.values.last().unwrap_or(&0.0)
    }
}

/// |v⟩⟨w| for column vectors v, w.
pub fn outer(v: &CMatrix, w: &CMatrix) -> CMatrix {
    debug_assert_eq!(v.cols, 1);
    debug_assert_eq!(w.cols, 1);
    CMatrix::from_fn(v.rows, w.rows, |i, j| v.data[i] * w.data[j].conj())
}

/// Kronecker product: (A⊗B)[(i·rB+k),(j·cB+l)] = A[i,j]·B[k,l].
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let mut out = CMatrix::zeros(a.rows * b.rows, a.cols * b.cols);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a.get(i, j);
            if aij == C_ZERO {
                continue;
            }
            for k in 0..b.rows {
                for l in 0..b.cols {
                    out.set(i * b.rows + k, j * b.cols + l, aij * b.get(k, l));
                }
            }
        }
    }
    out
}

/// Kronecker product of a sequence of matrices, factor 0 leftmost.
pub fn kron_all(mats: &[&CMatrix]) -> CMatrix {
    assert!(!mats.is_empty());
    let mut acc = mats[0].clone();
    for m in &mats[1..] {
        acc = kron(&acc, m);
    }
    acc
}

/// Partial trace over the complement of `keep`, with the kept factors ordered
/// as listed in `keep`.
pub fn partial_trace(a: &CMatrix, dims: &DimTuple, keep: &[usize]) -> Result<CMatrix> {
    if !a.is_square() || a.rows != dims.product() {
        return Err(Error::DimensionMismatch(format!(
            "partial_trace: matrix is {}x{} but dims product is {}",
            a.rows,
            a.cols,
            dims.product()
        )));
    }
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::InvalidArgument(
            "partial_trace: keep index out of range".into(),
        ));
    }
    let strides = dims.strides();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();

    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims.0[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims.0[k]).collect();
    let d_keep: usize = kept_dims.iter().product();
    let d_tr: usize = traced_dims.iter().product::<usize>().max(1);

    // Flat offset of a multi-index over the given factor subset.
    let offset = |subset: &[usize], sub_dims: &[usize], mut flat: usize| -> usize {
        let mut off = 0;
        for pos in (0..subset.len()).rev() {
            let d = sub_dims[pos];
            off += (flat % d) * strides[subset[pos]];
            flat /= d;
        }
        off
    };

    let mut out = CMatrix::zeros(d_keep, d_keep);
    for r in 0..d_keep {
        let ro = offset(keep, &kept_dims, r);
        for c in 0..d_keep {
            let co = offset(keep, &kept_dims, c);
            let mut acc = C_ZERO;
            for t in 0..d_tr {
                let to = offset(&traced, &traced_dims, t);
                acc += a.get(ro + to, co + to);
            }
            out.set(r, c, acc);
        }
    }
    Ok(out)
}

/// Partial transpose on one factor of a bipartite operator with dims (d0, d1).
pub fn partial_transpose(a: &CMatrix, d0: usize, d1: usize, factor: usize) -> Result<CMatrix> {
    if !a.is_square() || a.rows != d0 * d1 {
        return Err(Error::DimensionMismatch(
            "partial_transpose: dims do not match matrix".into(),
        ));
    }
    let out = CMatrix::from_fn(a.rows, a.cols, |r, c| {
        let (i, m) = (r / d1, r % d1);
        let (j, n) = (c / d1, c % d1);
        match factor {
            0 => a.get(j * d1 + m, i * d1 + n),
            _ => a.get(i * d1 + n, j * d1 + m),
        }
    });
    Ok(out)
}

/// Permute tensor factors of a square operator. `perm[k]` is the old position
/// of the factor that ends up at position `k`; `dims` are the old dimensions.
pub fn permute_factors(a: &CMatrix, dims: &DimTuple, perm: &[usize]) -> Result<CMatrix> {
    if !a.is_square() || a.rows != dims.product() || perm.len() != dims.len() {
        return Err(Error::DimensionMismatch("permute_factors".into()));
    }
    let old_strides = dims.strides();
    let new_dims = DimTuple(perm.iter().map(|&p| dims.0[p]).collect());
    let new_strides = new_dims.strides();
    let n = a.rows;
    // Map new flat index -> old flat index.
    let map = |mut flat: usize| -> usize {
        let mut old = 0;
        for k in 0..perm.len() {
            let idx = flat / new_strides[k];
            flat %= new_strides[k];
            old += idx * old_strides[perm[k]];
        }
        old
    };
    let table: Vec<usize> = (0..n).map(map).collect();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            out.set(r, c, a.get(table[r], table[c]));
        }
    }
    Ok(out)
}

/// Result of a Hermitian eigendecomposition: A = V diag(values) V†,
/// eigenvalues sorted descending, eigenvectors as columns of `vectors`.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

/// Cyclic complex Jacobi eigensolver for Hermitian matrices.
///
/// Symmetrizes the input first; rejects matrices with Hermitian deviation
/// above `HERMITIAN_TOL` relative to scale.
pub fn eigh(a: &CMatrix) -> Result<Eigh> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("eigh: matrix not square".into()));
    }
    let scale = a.max_abs().max(1.0);
    let dev = a.hermitian_deviation();
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let n = a.rows;
    let mut m = a.hermitize();
    let mut v = CMatrix::identity(n);
    if n <= 1 {
        let values = if n == 1 { vec![m.get(0, 0).re] } else { vec![] };
        return Ok(Eigh { values, vectors: v });
    }

    let fro = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * fro;
    let max_sweeps = 60;

    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m.get(p, q).norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let gamma = m.get(p, q);
                let r = gamma.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = gamma / r;
                let alpha = m.get(p, p).re;
                let beta = m.get(q, q).re;
                // Zero A'[p][q]: t² + 2τt − 1 = 0 with τ = (α−β)/(2r).
                let tau = (alpha - beta) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (tau * tau + 1.0).sqrt())
                } else {
                    -1.0 / (-tau + (tau * tau + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let new_pp = alpha * c * c + 2.0 * r * s * c + beta * s * s;
                let new_qq = alpha * s * s - 2.0 * r * s * c + beta * c * c;

                // Rotation U: U[p][p]=c, U[p][q]=−s·phase, U[q][p]=s·conj(phase), U[q][q]=c.
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = m.get(k, p);
                    let akq = m.get(k, q);
                    let new_kp = akp * c + akq * s * phase.conj();
                    let new_kq = akq * c - akp * s * phase;
                    m.set(k, p, new_kp);
                    m.set(p, k, new_kp.conj());
                    m.set(k, q, new_kq);
                    m.set(q, k, new_kq.conj());
                }
                m.set(p, p, Complex64::new(new_pp, 0.0));
                m.set(q, q, Complex64::new(new_qq, 0.0));
                m.set(p, q, C_ZERO);
                m.set(q, p, C_ZERO);

                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, vkp * c + vkq * s * phase.conj());
                    v.set(k, q, vkq * c - vkp * s * phase);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| m.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| v.get(i, order[j]));
    Ok(Eigh { values, vectors })
}

/// Cyclic Jacobi for real symmetric matrices stored as flat row-major `f64`.
/// Returns eigenvalues (descending) and eigenvectors as columns.
pub(crate) fn eigh_real(a_in: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(a_in.len(), n * n);
    let mut a = a_in.to_vec();
    // Symmetrize.
    for i in 0..n {
        for j in (i + 1)..n {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n <= 1 {
        return (a, v);
    }
    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let tol = 1e-15 * fro;
    let max_sweeps = 60;

    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let alpha = a[p * n + p];
                let beta = a[q * n + q];
                let tau = (alpha - beta) / (2.0 * apq);
                // Same quadratic as the complex case with phase = sign(apq) folded in.
                let t = if tau >= 0.0 {
                    1.0 / (tau + (tau * tau + 1.0).sqrt())
                } else {
                    -1.0 / (-tau + (tau * tau + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                let new_pp = alpha * c * c + 2.0 * apq * s * c + beta * s * s;
                let new_qq = alpha * s * s - 2.0 * apq * s * c + beta * c * c;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let new_kp = akp * c + akq * s;
                    let new_kq = akq * c - akp * s;
                    a[k * n + p] = new_kp;
                    a[p * n + k] = new_kp;
                    a[k * n + q] = new_kq;
                    a[q * n + k] = new_kq;
                }
                a[p * n + p] = new_pp;
                a[q * n + q] = new_qq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * c + vkq * s;
                    v[k * n + q] = vkq * c - vkp * s;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (jn, &jo) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + jn] = v[i * n + jo];
        }
    }
    (values, vectors)
}

/// Isometric embedding of a Hermitian matrix into real symmetric space:
/// X = A + iB ↦ [[A, −B], [B, A]] (2n×2n, eigenvalues doubled in multiplicity).
pub(crate) fn embed_real(x: &CMatrix) -> Vec<f64> {
    let n = x.rows;
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let z = x.get(i, j);
            out[i * m + j] = z.re;
            out[(n + i) * m + (n + j)] = z.re;
            out[i * m + (n + j)] = -z.im;
            out[(n + i) * m + j] = z.im;
        }
    }
    out
}

pub(crate) fn unembed_real(m_data: &[f64], n: usize) -> CMatrix {
    let m = 2 * n;
    CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (m_data[i * m + j] + m_data[(n + i) * m + (n + j)]);
        let im = 0.5 * (m_data[(n + i) * m + j] - m_data[i * m + (n + j)]);
        Complex64::new(re, im)
    })
}

/// Projection of a Hermitian matrix onto the PSD cone (negative eigenvalues
/// clipped to zero), computed through the real symmetric embedding.
pub fn psd_project(x: &CMatrix) -> CMatrix {
    shifted_psd_project(x, 0.0)
}

/// Projection onto {X : X ⪰ shift·I}.
pub fn shifted_psd_project(x: &CMatrix, shift: f64) -> CMatrix {
    let n = x.rows;
    let embedded = embed_real(&x.hermitize());
    let m = 2 * n;
    let (values, vectors) = eigh_real(&embedded, m);
    let mut out = vec![0.0; m * m];
    for (k, &lam) in values.iter().enumerate() {
        let l = lam.max(shift);
        if l == 0.0 {
            continue;
        }
        for i in 0..m {
            let vik = vectors[i * m + k];
            if vik == 0.0 {
                continue;
            }
            let li = l * vik;
            for j in 0..m {
                out[i * m + j] += li * vectors[j * m + k];
            }
        }
    }
    unembed_real(&out, n).hermitize()
}

/// PSD square root via eigendecomposition; tiny negative eigenvalues clamp to 0.
pub fn sqrtm_psd(a: &CMatrix) -> Result<CMatrix> {
    let eig = eigh(a)?;
    let n = a.rows;
    let mut out = CMatrix::zeros(n, n);
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let s = lam.sqrt();
        for i in 0..n {
            let vik = eig.vectors.get(i, k);
            for j in 0..n {
                let add = vik * eig.vectors.get(j, k).conj() * s;
                out.data[i * n + j] += add;
            }
        }
    }
    Ok(out.hermitize())
}

/// Seeded standard complex Gaussian matrix (Box–Muller on ChaCha8).
pub fn random_gaussian(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = move || -> f64 {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    };
    CMatrix::from_fn(rows, cols, |_, _| Complex64::new(sample(), sample()))
}

/// Seeded Haar-style random isometry V: C^{d_from} → C^{d_to} with V†V = I,
/// obtained by Gram–Schmidt orthonormalization of a complex Gaussian matrix
/// (the positive column norms fix the QR phase convention).
pub fn random_isometry(d_from: usize, d_to: usize, seed: u64) -> Result<CMatrix> {
    if d_to < d_from {
        return Err(Error::InvalidArgument(format!(
            "random_isometry: d_to ({d_to}) must be ≥ d_from ({d_from})"
        )));
    }
    let g = random_gaussian(d_to, d_from, seed);
    let mut cols: Vec<Vec<Complex64>> = (0..d_from)
        .map(|j| (0..d_to).map(|i| g.get(i, j)).collect())
        .collect();
    for j in 0..d_from {
        // Two Gram–Schmidt passes for numerical orthogonality.
        for _ in 0..2 {
            for k in 0..j {
                let proj: Complex64 = (0..d_to).map(|i| cols[k][i].conj() * cols[j][i]).sum();
                for i in 0..d_to {
                    let ck = cols[k][i];
                    cols[j][i] -= proj * ck;
                }
            }
        }
        let norm: f64 = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            // Degenerate draw; re-seed deterministically.
            return random_isometry(d_from, d_to, seed.wrapping_add(0x9E3779B97F4A7C15));
        }
        for z in cols[j].iter_mut() {
            *z /= norm;
        }
    }
    Ok(CMatrix::from_fn(d_to, d_from, |i, j| cols[j][i]))
}

/// Seeded random density matrix (PSD, unit trace).
pub fn random_state(d: usize, seed: u64) -> CMatrix {
    let g = random_gaussian(d, d, seed);
    let m = g.matmul(&g.dagger());
    let t = m.trace().re;
    m.scale_re(1.0 / t).hermitize()
}

pub fn pauli_x() -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| {
        if i != j { C_ONE } else { C_ZERO }
    })
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => Complex64::new(0.0, -1.0),
        (1, 0) => Complex64::new(0.0, 1.0),
        _ => C_ZERO,
    })
}

pub fn pauli_z() -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => C_ONE,
        (1, 1) => -C_ONE,
        _ => C_ZERO,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "expected {b}, got {a} (tol {tol})");
    }

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        random_gaussian(n, n, seed).hermitize()
    }

    #[test]
    fn kron_identity() {
        let i2 = CMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), CMatrix::identity(4));
    }

    #[test]
    fn kron_scalar_factor() {
        let a = random_gaussian(3, 2, 7);
        let c = Complex64::new(0.5, -1.25);
        let s = CMatrix { rows: 1, cols: 1, data: vec![c] };
        let k = kron(&a, &s);
        assert!(k.sub(&a.scale(c)).max_abs() < 1e-15);
    }

    #[test]
    fn kron_pauli_x_z() {
        let k = kron(&pauli_x(), &pauli_z());
        let mut expected = CMatrix::zeros(4, 4);
        expected.set(0, 2, C_ONE);
        expected.set(1, 3, -C_ONE);
        expected.set(2, 0, C_ONE);
        expected.set(3, 1, -C_ONE);
        assert!(k.sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_product_operator() {
        let a = random_hermitian(2, 1);
        let b = random_hermitian(3, 2);
        let ab = kron(&a, &b);
        let dims = DimTuple(vec![2, 3]);
        let got = partial_trace(&ab, &dims, &[0]).unwrap();
        let expected = a.scale(b.trace());
        assert!(got.sub(&expected).max_abs() < 1e-12);
        // Trace preserved for every keep set.
        let full = partial_trace(&ab, &dims, &[]).unwrap();
        assert!((full.get(0, 0) - ab.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_maximally_entangled() {
        // Unnormalized |Ω⟩⟨Ω| with |Ω⟩ = Σ_i |ii⟩, trace 2.
        let mut omega = CMatrix::zeros(4, 1);
        omega.data[0] = C_ONE;
        omega.data[3] = C_ONE;
        let proj = outer(&omega, &omega);
        let dims = DimTuple(vec![2, 2]);
        for keep in [&[0usize][..], &[1usize][..]] {
            let red = partial_trace(&proj, &dims, keep).unwrap();
            assert!(red.sub(&CMatrix::identity(2)).max_abs() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_reorders_kept_factors() {
        let a = random_hermitian(2, 3);
        let b = random_hermitian(2, 4);
        let c = random_hermitian(2, 5);
        let abc = kron(&kron(&a, &b), &c);
        let dims = DimTuple(vec![2, 2, 2]);
        let got = partial_trace(&abc, &dims, &[2, 0]).unwrap();
        let expected = kron(&c, &a).scale(b.trace());
        assert!(got.sub(&expected).max_abs() < 1e-10);
    }

    #[test]
    fn eigh_diagonal() {
        let mut d = CMatrix::zeros(2, 2);
        d.set(0, 0, Complex64::new(3.0, 0.0));
        d.set(1, 1, C_ONE);
        let eig = eigh(&d).unwrap();
        assert_close(eig.values[0], 3.0, 1e-14);
        assert_close(eig.values[1], 1.0, 1e-14);
        assert!(eig.vectors.sub(&CMatrix::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn eigh_pauli_x() {
        let eig = eigh(&pauli_x()).unwrap();
        assert_close(eig.values[0], 1.0, 1e-13);
        assert_close(eig.values[1], -1.0, 1e-13);
        // Eigenvectors (1, ±1)/√2 up to phase.
        for (col, lam) in [(0usize, 1.0), (1usize, -1.0)] {
            let v0 = eig.vectors.get(0, col);
            let v1 = eig.vectors.get(1, col);
            assert_close(v0.norm(), std::f64::consts::FRAC_1_SQRT_2, 1e-12);
            assert_close((v1 / v0).re, lam, 1e-12);
        }
    }

    #[test]
    fn eigh_zero_matrix() {
        let eig = eigh(&CMatrix::zeros(3, 3)).unwrap();
        assert!(eig.values.iter().all(|&l| l == 0.0));
        let vhv = eig.vectors.dagger().matmul(&eig.vectors);
        assert!(vhv.sub(&CMatrix::identity(3)).max_abs() < 1e-13);
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m.set(0, 1, C_ONE);
        assert!(matches!(eigh(&m), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn eigh_reconstruction_residual() {
        for (n, seed) in [(2, 10u64), (5, 11), (16, 12), (64, 13)] {
            let a = random_hermitian(n, seed);
            let eig = eigh(&a).unwrap();
            let mut rec = CMatrix::zeros(n, n);
            for (k, &lam) in eig.values.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        let add =
                            eig.vectors.get(i, k) * eig.vectors.get(j, k).conj() * lam;
                        rec.data[i * n + j] += add;
                    }
                }
            }
            let scale = a.frobenius_norm().max(1.0);
            assert!(
                rec.sub(&a).frobenius_norm() <= 1e-9 * scale,
                "residual too large at n={n}"
            );
            let vhv = eig.vectors.dagger().matmul(&eig.vectors);
            assert!(vhv.sub(&CMatrix::identity(n)).max_abs() < 1e-10);
        }
    }

    #[test]
    fn psd_project_idempotent_and_contraction() {
        for seed in 20..26u64 {
            let a = random_hermitian(6, seed);
            let p = psd_project(&a);
            assert!(p.min_eigenvalue() > -1e-10);
            let pp = psd_project(&p);
            assert!(pp.sub(&p).frobenius_norm() < 1e-9);
            // Frobenius contraction toward any PSD matrix.
            let q = {
                let g = random_gaussian(6, 6, seed + 100);
                g.matmul(&g.dagger()).hermitize()
            };
            assert!(p.sub(&q).frobenius_norm() <= a.sub(&q).frobenius_norm() + 1e-12);
        }
    }

    #[test]
    fn random_isometry_contracts() {
        let v = random_isometry(2, 2, 42).unwrap();
        let gram = v.dagger().matmul(&v);
        assert!(gram.sub(&CMatrix::identity(2)).max_abs() < 1e-10);

        let col = random_isometry(1, 3, 7).unwrap();
        assert_close(col.frobenius_norm(), 1.0, 1e-12);

        let a = random_isometry(3, 5, 99).unwrap();
        let b = random_isometry(3, 5, 99).unwrap();
        assert_eq!(a, b);

        assert!(random_isometry(3, 2, 0).is_err());
    }

    #[test]
    fn sqrtm_psd_squares_back() {
        let a = {
            let g = random_gaussian(4, 4, 31);
            g.matmul(&g.dagger()).hermitize()
        };
        let s = sqrtm_psd(&a).unwrap();
        assert!(s.matmul(&s).sub(&a).frobenius_norm() < 1e-9 * a.frobenius_norm().max(1.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn kron_associative(sa in 0u64..1000, sb in 0u64..1000, sc in 0u64..1000) {
            let a = random_gaussian(2, 2, sa);
            let b = random_gaussian(2, 3, sb);
            let c = random_gaussian(3, 2, sc);
            let left = kron(&kron(&a, &b), &c);
            let right = kron(&a, &kron(&b, &c));
            // Index placement is exact; the scalar products (a·b)·c and
            // a·(b·c) differ by at most a few ulps.
            let scale = a.max_abs() * b.max_abs() * c.max_abs();
            prop_assert!(left.sub(&right).max_abs() <= 1e-14 * scale.max(1.0));
        }

        #[test]
        fn partial_trace_preserves_trace(seed in 0u64..1000) {
            let a = random_gaussian(12, 12, seed).hermitize();
            let dims = DimTuple(vec![2, 3, 2]);
            for keep in [vec![], vec![0], vec![1], vec![2], vec![0, 1], vec![1, 2], vec![0, 2], vec![0, 1, 2]] {
                let red = partial_trace(&a, &dims, &keep).unwrap();
                prop_assert!((red.trace() - a.trace()).norm() <= 1e-12 * a.frobenius_norm().max(1.0));
            }
        }
    }
}
