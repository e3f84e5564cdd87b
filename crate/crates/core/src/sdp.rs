//! Certified semidefinite feasibility: find `X ⪰ 0` with `tr[F_k X] = b_k`.
//!
//! The solver alternates closed-form least-squares projection onto the affine
//! subspace (constraint Gram factorization precomputed) with eigenvalue
//! clipping onto the PSD cone, carrying a Dykstra correction term on the cone
//! side. Infeasibility is detected by running the same iteration on the
//! homogenized Farkas system `Σ y_k F_k ⪯ −μI, b·y = 1` at a ladder of
//! margins μ; whichever side first produces a rigorously re-checkable
//! witness/certificate wins. Problems near the feasible/infeasible boundary
//! may return `Undecided`, which downstream code must propagate.
//!
//! Hermitian matrix variables go through an isometric embedding into real
//! symmetric space for the cone projection (see [`crate::linalg::psd_project`]).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::Write;

use crate::error::Error;
use crate::linalg::{self, shifted_psd_project, CMatrix, DimTuple};
use crate::Result;

/// Default iteration budget.
pub const DEFAULT_MAX_ITER: usize = 50_000;
/// Feasibility residual tolerance (∞-norm over constraints).
pub const EPS_FEAS: f64 = 1e-7;
/// PSD slack allowed on witnesses.
pub const PSD_SLACK: f64 = 1e-9;
/// Strictness margin required of Farkas certificates.
pub const CERT_MARGIN: f64 = 1e-9;

/// One scalar constraint `tr[F X] = b` with Hermitian `F`.
#[derive(Debug, Clone)]
pub struct ScalarConstraint {
    pub matrix: CMatrix,
    pub target: f64,
}

/// Affine-constrained PSD feasibility instance on Hermitian n×n matrices.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub n: usize,
    pub constraints: Vec<ScalarConstraint>,
    pub eps_feas: f64,
}

impl SdpProblem {
    pub fn new(n: usize) -> Self {
        SdpProblem {
            n,
            constraints: Vec::new(),
            eps_feas: EPS_FEAS,
        }
    }

    /// Add `tr[F X] = b`. The pair is stored rescaled to unit Frobenius norm
    /// of `F` (the feasible set is unchanged, the Gram system is better
    /// conditioned).
    pub fn add_constraint(&mut self, f: CMatrix, b: f64) -> Result<()> {
        if !f.is_square() || f.rows != self.n {
            return Err(Error::DimensionMismatch(format!(
                "constraint matrix is {}x{}, expected {}",
                f.rows, f.cols, self.n
            )));
        }
        let dev = f.hermitian_deviation();
        if dev > 1e-9 * f.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let norm = f.frobenius_norm();
        if norm < 1e-14 {
            if b.abs() <= 1e-12 {
                // 0 = 0 constrains nothing.
                return Ok(());
            }
            // 0 = b ≠ 0 makes the affine system empty but still participates
            // in Farkas certificates (it contributes only to b·y).
            self.constraints.push(ScalarConstraint {
                matrix: CMatrix::zeros(self.n, self.n),
                target: b.signum(),
            });
            return Ok(());
        }
        self.constraints.push(ScalarConstraint {
            matrix: f.hermitize().scale_re(1.0 / norm),
            target: b / norm,
        });
        Ok(())
    }

    /// Add the matrix-valued constraint `Tr_traced[X] = target` (kept factors
    /// listed in `keep` order), expanded over the generalized Gell-Mann basis
    /// of the kept space into scalar constraints.
    pub fn add_partial_trace_eq(
        &mut self,
        dims: &DimTuple,
        keep: &[usize],
        target: &CMatrix,
    ) -> Result<()> {
        if dims.product() != self.n {
            return Err(Error::DimensionMismatch(
                "partial-trace constraint dims do not match variable".into(),
            ));
        }
        let d_keep: usize = keep.iter().map(|&k| dims.0[k]).product();
        if target.rows != d_keep || target.cols != d_keep {
            return Err(Error::DimensionMismatch(
                "partial-trace constraint target has wrong dimension".into(),
            ));
        }
        for basis in hermitian_basis(d_keep) {
            let f = lift_operator(&basis, dims, keep)?;
            let b = basis.inner_re(target);
            self.add_constraint(f, b)?;
        }
        Ok(())
    }

    /// `max_k |tr[F_k X] − b_k|`.
    pub fn residual(&self, x: &CMatrix) -> f64 {
        self.constraints
            .iter()
            .map(|c| (c.matrix.inner_re(x) - c.target).abs())
            .fold(0.0, f64::max)
    }

    /// Debug dump of the constraint system as JSON.
    pub fn dump_json(&self, path: &std::path::Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{{")?;
        writeln!(out, "  \"n\": {},", self.n)?;
        writeln!(out, "  \"eps_feas\": {:e},", self.eps_feas)?;
        writeln!(out, "  \"constraints\": [")?;
        for (k, c) in self.constraints.iter().enumerate() {
            let entries: Vec<String> = c
                .matrix
                .data
                .iter()
                .map(|z| format!("[{:e},{:e}]", z.re, z.im))
                .collect();
            let comma = if k + 1 == self.constraints.len() { "" } else { "," };
            writeln!(
                out,
                "    {{\"target\": {:e}, \"matrix\": [{}]}}{}",
                c.target,
                entries.join(","),
                comma
            )?;
        }
        writeln!(out, "  ]")?;
        writeln!(out, "}}")?;
        Ok(())
    }
}

/// Orthonormal Hermitian basis of dimension `d` (identity, off-diagonal
/// symmetric and antisymmetric pairs, diagonal Gell-Mann family).
pub fn hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(d * d);
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    basis.push(CMatrix::identity(d).scale_re(inv_sqrt_d));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = CMatrix::zeros(d, d);
            sym.set(i, j, Complex64::new(s, 0.0));
            sym.set(j, i, Complex64::new(s, 0.0));
            basis.push(sym);
            let mut asym = CMatrix::zeros(d, d);
            asym.set(i, j, Complex64::new(0.0, s));
            asym.set(j, i, Complex64::new(0.0, -s));
            basis.push(asym);
        }
    }
    for l in 1..d {
        let w = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = CMatrix::zeros(d, d);
        for k in 0..l {
            diag.set(k, k, Complex64::new(w, 0.0));
        }
        diag.set(l, l, Complex64::new(-(l as f64) * w, 0.0));
        basis.push(diag);
    }
    basis
}

/// Adjoint of the partial trace: embed an operator on the kept factors as
/// `B ⊗ I` (up to factor ordering), so `tr[lift(B)·X] = tr[B·Tr_traced X]`.
pub fn lift_operator(b: &CMatrix, dims: &DimTuple, keep: &[usize]) -> Result<CMatrix> {
    let n = dims.product();
    let strides = dims.strides();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep.contains(k)).collect();
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims.0[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims.0[k]).collect();
    let d_keep: usize = kept_dims.iter().product();
    let d_tr: usize = traced_dims.iter().product::<usize>().max(1);
    if b.rows != d_keep {
        return Err(Error::DimensionMismatch("lift_operator".into()));
    }

    let offset = |subset: &[usize], sub_dims: &[usize], mut flat: usize| -> usize {
        let mut off = 0;
        for pos in (0..subset.len()).rev() {
            let dd = sub_dims[pos];
            off += (flat % dd) * strides[subset[pos]];
            flat /= dd;
        }
        off
    };

    let mut out = CMatrix::zeros(n, n);
    for r in 0..d_keep {
        let ro = offset(keep, &kept_dims, r);
        for c in 0..d_keep {
            let v = b.get(r, c);
            if v == linalg::C_ZERO {
                continue;
            }
            let co = offset(keep, &kept_dims, c);
            for t in 0..d_tr {
                let to = offset(&traced, &traced_dims, t);
                out.set(ro + to, co + to, v);
            }
        }
    }
    Ok(out)
}

/// Tri-state outcome with witness or certificate.
#[derive(Debug, Clone)]
pub enum SdpStatus {
    /// `X ⪰ −1e-9` with `‖A(X)−b‖∞ ≤ eps_feas`.
    Feasible { witness: CMatrix },
    /// `y` with `Σ y_k F_k ⪯ −1e-9·I` and `b·y ≥ 1e-9`.
    Infeasible { certificate: Vec<f64> },
    /// Neither tolerance met within the iteration budget.
    Undecided,
}

#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub affine_residual: f64,
    pub farkas_residual: f64,
    /// Largest per-step increase of the primal affine residual (monotonicity check).
    pub max_residual_uptick: f64,
}

#[derive(Debug, Clone)]
pub struct SdpVerdict {
    pub status: SdpStatus,
    pub diagnostics: SolveDiagnostics,
}

impl SdpVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, SdpStatus::Feasible { .. })
    }
    pub fn is_infeasible(&self) -> bool {
        matches!(self.status, SdpStatus::Infeasible { .. })
    }
    pub fn is_undecided(&self) -> bool {
        matches!(self.status, SdpStatus::Undecided)
    }
}

/// Dense symmetric pseudo-inverse through the real Jacobi eigensolver.
struct GramSolver {
    m: usize,
    /// Eigenvectors (columns) and inverted eigenvalues above the cutoff.
    vectors: Vec<f64>,
    inv_values: Vec<f64>,
}

impl GramSolver {
    fn new(gram: &[f64], m: usize) -> Self {
        let (values, vectors) = linalg::eigh_real(gram, m);
        let cutoff = values.first().copied().unwrap_or(0.0).max(0.0) * 1e-12;
        let inv_values = values
            .iter()
            .map(|&l| if l > cutoff { 1.0 / l } else { 0.0 })
            .collect();
        GramSolver {
            m,
            vectors,
            inv_values,
        }
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut coeffs = vec![0.0; m];
        for k in 0..m {
            if self.inv_values[k] == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for i in 0..m {
                dot += self.vectors[i * m + k] * rhs[i];
            }
            coeffs[k] = dot * self.inv_values[k];
        }
        let mut out = vec![0.0; m];
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, c) in coeffs.iter().enumerate() {
                acc += self.vectors[i * m + k] * c;
            }
            *o = acc;
        }
        out
    }
}

struct FarkasStream {
    margin: f64,
    y: Vec<f64>,
    p: CMatrix,
    corr: CMatrix,
    residual: f64,
}

/// Decide feasibility of `p`, returning a witness, a Farkas certificate, or
/// `Undecided`. Deterministic for a fixed seed.
pub fn solve_feasibility(p: &SdpProblem, max_iter: usize, seed: u64) -> Result<SdpVerdict> {
    let n = p.n;
    let m = p.constraints.len();
    if m == 0 {
        return Ok(SdpVerdict {
            status: SdpStatus::Feasible {
                witness: CMatrix::zeros(n, n),
            },
            diagnostics: SolveDiagnostics::default(),
        });
    }
    let b: Vec<f64> = p.constraints.iter().map(|c| c.target).collect();
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm < 1e-14 {
        // b = 0 is satisfied by X = 0.
        return Ok(SdpVerdict {
            status: SdpStatus::Feasible {
                witness: CMatrix::zeros(n, n),
            },
            diagnostics: SolveDiagnostics::default(),
        });
    }

    // Gram matrix of the (unit-normalized) constraint set.
    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let g = p.constraints[i].matrix.inner_re(&p.constraints[j].matrix);
            gram[i * m + j] = g;
            gram[j * m + i] = g;
        }
    }
    let gram_solver = GramSolver::new(&gram, m);
    // (G + I) system for the Farkas affine projection.
    let mut gram_plus = gram.clone();
    for i in 0..m {
        gram_plus[i * m + i] += 1.0;
    }
    let gram_plus_solver = GramSolver::new(&gram_plus, m);

    let affine_project = |x: &CMatrix| -> CMatrix {
        let rhs: Vec<f64> = p
            .constraints
            .iter()
            .map(|c| c.target - c.matrix.inner_re(x))
            .collect();
        let coeffs = gram_solver.solve(&rhs);
        let mut out = x.clone();
        for (c, &w) in p.constraints.iter().zip(&coeffs) {
            if w != 0.0 {
                out = out.add(&c.matrix.scale_re(w));
            }
        }
        out
    };

    // Consistency of the linear system alone. When the affine system is
    // already empty the primal loop cannot succeed and only the Farkas side
    // runs (a strict certificate may still exist, e.g. through the identity
    // direction of a trace constraint).
    let ls = affine_project(&CMatrix::zeros(n, n));
    let linear_residual = p.residual(&ls);
    let primal_enabled = linear_residual <= 1e3 * p.eps_feas;

    // Primal state: start from the least-squares affine point with a tiny
    // seeded Hermitian jitter.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = ls.frobenius_norm().max(1.0);
    let jitter = CMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
    .hermitize()
    .scale_re(1e-8 * scale);
    let mut x = affine_project(&ls.add(&jitter));
    let mut cone_corr = CMatrix::zeros(n, n);
    let mut prev_residual = f64::INFINITY;
    let mut max_uptick: f64 = 0.0;
    let mut affine_residual = p.residual(&x);

    // Farkas streams at a ladder of margins (constraints are unit-normalized,
    // so margins are absolute).
    let y0: Vec<f64> = b.iter().map(|v| v / (b_norm * b_norm)).collect();
    let mut streams: Vec<FarkasStream> = [1e-2, 1e-4, 1e-6]
        .iter()
        .map(|&margin| FarkasStream {
            margin,
            y: y0.clone(),
            p: CMatrix::zeros(n, n),
            corr: CMatrix::zeros(n, n),
            residual: f64::INFINITY,
        })
        .collect();

    let assemble = |y: &[f64]| -> CMatrix {
        let mut s = CMatrix::zeros(n, n);
        for (c, &w) in p.constraints.iter().zip(y) {
            if w != 0.0 {
                s = s.add(&c.matrix.scale_re(w));
            }
        }
        s
    };

    let bdir = gram_plus_solver.solve(&b);
    let denom: f64 = b.iter().zip(&bdir).map(|(bi, di)| bi * di).sum();

    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;

        // ---- primal Dykstra step ----
        if primal_enabled {
            let y_aff = affine_project(&x);
            let z = y_aff.add(&cone_corr);
            let x_new = linalg::psd_project(&z);
            cone_corr = z.sub(&x_new);
            x = x_new;
            affine_residual = p.residual(&x);
            if affine_residual > prev_residual {
                max_uptick = max_uptick.max(affine_residual - prev_residual);
            }
            prev_residual = affine_residual;

            if affine_residual <= p.eps_feas {
                let min_eig = x.min_eigenvalue();
                if min_eig >= -PSD_SLACK {
                    return Ok(SdpVerdict {
                        status: SdpStatus::Feasible { witness: x },
                        diagnostics: SolveDiagnostics {
                            iterations,
                            affine_residual,
                            farkas_residual: streams
                                .iter()
                                .map(|s| s.residual)
                                .fold(f64::INFINITY, f64::min),
                            max_residual_uptick: max_uptick,
                        },
                    });
                }
            }
        }

        // ---- Farkas streams ----
        if denom.abs() >= 1e-14 {
            for stream in streams.iter_mut() {
                // Affine projection onto {P + Σ y F = 0, b·y = 1}.
                let v: Vec<f64> = p
                    .constraints
                    .iter()
                    .map(|c| c.matrix.inner_re(&stream.p))
                    .collect();
                let rhs: Vec<f64> = stream
                    .y
                    .iter()
                    .zip(&v)
                    .map(|(yk, vk)| yk - vk)
                    .collect();
                let base = gram_plus_solver.solve(&rhs);
                let base_dot: f64 = b.iter().zip(&base).map(|(bi, bk)| bi * bk).sum();
                let lambda = (1.0 - base_dot) / denom;
                let y_new: Vec<f64> = base
                    .iter()
                    .zip(&bdir)
                    .map(|(bk, dk)| bk + lambda * dk)
                    .collect();
                let p_aff = assemble(&y_new).scale_re(-1.0);
                stream.residual = p_aff.sub(&stream.p).frobenius_norm();
                // Cone step with Dykstra correction: project onto {P ⪰ margin·I}.
                let zp = p_aff.add(&stream.corr);
                let p_new = shifted_psd_project(&zp, stream.margin);
                stream.corr = zp.sub(&p_new);
                stream.p = p_new;
                stream.y = y_new;
            }

            // Rigorous certificate check once a stream looks converged.
            for stream in &streams {
                if stream.residual <= (stream.margin * 0.25).max(1e-12) {
                    let s_mat = assemble(&stream.y);
                    let eig_max = linalg::eigh(&s_mat)
                        .map(|e| e.values.first().copied().unwrap_or(0.0))
                        .unwrap_or(f64::INFINITY);
                    let by: f64 = b.iter().zip(&stream.y).map(|(bi, yi)| bi * yi).sum();
                    if eig_max <= -CERT_MARGIN && by >= CERT_MARGIN {
                        return Ok(SdpVerdict {
                            status: SdpStatus::Infeasible {
                                certificate: stream.y.clone(),
                            },
                            diagnostics: SolveDiagnostics {
                                iterations,
                                affine_residual,
                                farkas_residual: stream.residual,
                                max_residual_uptick: max_uptick,
                            },
                        });
                    }
                }
            }
        }
    }

    Ok(SdpVerdict {
        status: SdpStatus::Undecided,
        diagnostics: SolveDiagnostics {
            iterations,
            affine_residual,
            farkas_residual: streams
                .iter()
                .map(|s| s.residual)
                .fold(f64::INFINITY, f64::min),
            max_residual_uptick: max_uptick,
        },
    })
}

/// Re-validate a verdict from scratch using only linalg primitives; never
/// trusts solver internals. `Undecided` verdicts carry nothing to certify.
pub fn certify(v: &SdpVerdict, p: &SdpProblem) -> bool {
    match &v.status {
        SdpStatus::Feasible { witness } => {
            if witness.rows != p.n || witness.cols != p.n {
                return false;
            }
            if witness.hermitian_deviation() > 1e-8 * witness.max_abs().max(1.0) {
                return false;
            }
            let res = p.residual(witness);
            if res > p.eps_feas {
                return false;
            }
            match linalg::eigh(witness) {
                Ok(e) => e.values.last().copied().unwrap_or(0.0) >= -PSD_SLACK,
                Err(_) => false,
            }
        }
        SdpStatus::Infeasible { certificate } => {
            if certificate.len() != p.constraints.len() {
                return false;
            }
            let mut s = CMatrix::zeros(p.n, p.n);
            for (c, &w) in p.constraints.iter().zip(certificate) {
                s = s.add(&c.matrix.scale_re(w));
            }
            let by: f64 = p
                .constraints
                .iter()
                .zip(certificate)
                .map(|(c, &y)| c.target * y)
                .sum();
            if by < CERT_MARGIN {
                return false;
            }
            match linalg::eigh(&s) {
                Ok(e) => e.values.first().copied().unwrap_or(0.0) <= -CERT_MARGIN,
                Err(_) => false,
            }
        }
        SdpStatus::Undecided => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C_ONE;

    #[test]
    fn trace_one_is_feasible() {
        let mut p = SdpProblem::new(2);
        p.add_constraint(CMatrix::identity(2), 1.0).unwrap();
        let v = solve_feasibility(&p, 1000, 0).unwrap();
        assert!(v.is_feasible());
        assert!(certify(&v, &p));
        if let SdpStatus::Feasible { witness } = &v.status {
            assert!((witness.trace().re - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn negative_trace_is_infeasible() {
        let mut p = SdpProblem::new(2);
        p.add_constraint(CMatrix::identity(2), -1.0).unwrap();
        let v = solve_feasibility(&p, 5000, 0).unwrap();
        assert!(v.is_infeasible(), "got {:?}", v.status);
        assert!(certify(&v, &p));
        if let SdpStatus::Infeasible { certificate } = &v.status {
            // Σ y F = y₀·I/√2 must be negative definite, so y₀ < 0, and
            // b·y = −y₀/√2 > 0.
            assert!(certificate[0] < 0.0);
        }
    }

    #[test]
    fn tampered_witness_fails_certification() {
        let mut p = SdpProblem::new(2);
        p.add_constraint(CMatrix::identity(2), 1.0).unwrap();
        let v = solve_feasibility(&p, 1000, 0).unwrap();
        if let SdpStatus::Feasible { witness } = &v.status {
            let mut bad = witness.clone();
            bad.set(0, 0, Complex64::new(-2.0, 0.0));
            bad.set(1, 1, Complex64::new(3.0 - bad.get(1, 1).re, 0.0));
            let forged = SdpVerdict {
                status: SdpStatus::Feasible { witness: bad },
                diagnostics: v.diagnostics.clone(),
            };
            // Still satisfies the trace constraint but is not PSD.
            assert!(!certify(&forged, &p));
        } else {
            panic!("expected feasible");
        }
    }

    #[test]
    fn off_diagonal_constraints() {
        // X PSD with X01 + X10 = 2 and tr X = 1 forces |off-diag| ≤ ½ by
        // positivity, so this must be infeasible.
        let mut p = SdpProblem::new(2);
        p.add_constraint(CMatrix::identity(2), 1.0).unwrap();
        let mut f = CMatrix::zeros(2, 2);
        f.set(0, 1, C_ONE);
        f.set(1, 0, C_ONE);
        p.add_constraint(f, 2.0).unwrap();
        let v = solve_feasibility(&p, 20000, 1).unwrap();
        assert!(v.is_infeasible(), "got {:?}", v.status);
        assert!(certify(&v, &p));

        // Same with an achievable target is feasible.
        let mut p2 = SdpProblem::new(2);
        p2.add_constraint(CMatrix::identity(2), 1.0).unwrap();
        let mut f2 = CMatrix::zeros(2, 2);
        f2.set(0, 1, C_ONE);
        f2.set(1, 0, C_ONE);
        p2.add_constraint(f2, 0.5).unwrap();
        let v2 = solve_feasibility(&p2, 20000, 1).unwrap();
        assert!(v2.is_feasible(), "got {:?}", v2.status);
        assert!(certify(&v2, &p2));
    }

    #[test]
    fn partial_trace_constraint_expansion() {
        // Tr over factor 1 of X on C²⊗C² must equal a given 2x2 Hermitian state.
        let dims = DimTuple(vec![2, 2]);
        let target = CMatrix::from_fn(2, 2, |i, j| {
            if i == j {
                Complex64::new(0.5, 0.0)
            } else {
                Complex64::new(0.1, if i < j { 0.2 } else { -0.2 })
            }
        });
        let mut p = SdpProblem::new(4);
        p.add_partial_trace_eq(&dims, &[0], &target).unwrap();
        assert_eq!(p.constraints.len(), 4);
        let v = solve_feasibility(&p, 20000, 2).unwrap();
        assert!(v.is_feasible());
        assert!(certify(&v, &p));
        if let SdpStatus::Feasible { witness } = &v.status {
            let marg = linalg::partial_trace(witness, &dims, &[0]).unwrap();
            assert!(marg.sub(&target).max_abs() < 1e-6);
        }
    }

    #[test]
    fn hermitian_basis_is_orthonormal() {
        for d in [2usize, 3, 4] {
            let basis = hermitian_basis(d);
            assert_eq!(basis.len(), d * d);
            for (i, a) in basis.iter().enumerate() {
                assert!(a.hermitian_deviation() < 1e-14);
                for (j, b) in basis.iter().enumerate() {
                    let ip = a.inner_re(b);
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (ip - expected).abs() < 1e-12,
                        "d={d} i={i} j={j} ip={ip}"
                    );
                }
            }
        }
    }

    #[test]
    fn lift_operator_is_partial_trace_adjoint() {
        let dims = DimTuple(vec![2, 3, 2]);
        let b = crate::linalg::random_gaussian(4, 4, 3).hermitize();
        let x = crate::linalg::random_gaussian(12, 12, 4).hermitize();
        let keep = vec![0usize, 2];
        let lifted = lift_operator(&b, &dims, &keep).unwrap();
        let lhs = lifted.inner_re(&x);
        let traced = linalg::partial_trace(&x, &dims, &keep).unwrap();
        let rhs = b.inner_re(&traced);
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn solver_is_deterministic() {
        let mut p = SdpProblem::new(3);
        p.add_constraint(CMatrix::identity(3), 1.0).unwrap();
        let mut f = CMatrix::zeros(3, 3);
        f.set(0, 1, C_ONE);
        f.set(1, 0, C_ONE);
        p.add_constraint(f, 0.3).unwrap();
        let a = solve_feasibility(&p, 10000, 7).unwrap();
        let b = solve_feasibility(&p, 10000, 7).unwrap();
        match (&a.status, &b.status) {
            (SdpStatus::Feasible { witness: wa }, SdpStatus::Feasible { witness: wb }) => {
                assert_eq!(wa.data, wb.data);
            }
            _ => panic!("expected feasible twice"),
        }
        assert_eq!(a.diagnostics.iterations, b.diagnostics.iterations);
    }

    #[test]
    fn dump_json_writes_structure() {
        let mut p = SdpProblem::new(2);
        p.add_constraint(CMatrix::identity(2), 1.0).unwrap();
        let path = std::env::temp_dir().join("qchan_sdp_dump_test.json");
        p.dump_json(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"n\": 2"));
        assert!(text.contains("constraints"));
        std::fs::remove_file(&path).ok();
    }
}
