//! Channel types and the calculus on them.
//!
//! A [`Channel`] is stored through its Choi matrix
//! `J = Σ_{ij} |i⟩⟨j| ⊗ Λ*(|i⟩⟨j|)` on `H_in ⊗ H_out` (input factor first,
//! unnormalized, `tr J = d_in`). Complete positivity is `J ⪰ 0`, trace
//! preservation is `Tr_out J = I_in`. Kraus and Stinespring forms are
//! interconvertible with the Choi form; conjugation goes through the minimal
//! Stinespring isometry. Tensor indices are row-major with subsystem 0
//! leftmost everywhere.

mod instrument;
mod observable;

pub use instrument::{instrument_from_joint, joint_from_instrument, Instrument};
pub(crate) use observable::renormalize_effects;
pub use observable::{
    gamma_of_observable, naimark_least_disturbing, postprocessing_channel, transform_observable,
    Naimark, Observable, StochasticMatrix,
};

use crate::error::Error;
use crate::linalg::{
    self, kron, outer, partial_trace, CMatrix, DimTuple, C_ONE, C_ZERO,
};
use crate::Result;

/// Absolute tolerance for channel invariants (PSD slack, trace preservation).
pub const CHANNEL_TOL: f64 = 1e-9;

/// Relative eigenvalue cutoff separating numerical zeros from genuine
/// environment dimensions in Kraus extraction.
pub const KRAUS_RANK_TOL: f64 = 1e-8;

/// Which side of the state/observable duality an operator lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Picture {
    Schrodinger,
    Heisenberg,
}

/// A quantum channel in Choi representation.
#[derive(Debug, Clone)]
pub struct Channel {
    d_in: usize,
    out_dims: DimTuple,
    choi: CMatrix,
}

impl Channel {
    /// Validating constructor: checks complete positivity and trace
    /// preservation within [`CHANNEL_TOL`].
    pub fn new(d_in: usize, out_dims: impl Into<DimTuple>, choi: CMatrix) -> Result<Self> {
        let c = Channel {
            d_in,
            out_dims: out_dims.into(),
            choi,
        };
        c.validate()?;
        Ok(c)
    }

    /// Internal constructor for Chois that are valid by construction.
    pub(crate) fn from_parts(d_in: usize, out_dims: impl Into<DimTuple>, choi: CMatrix) -> Self {
        let out_dims = out_dims.into();
        debug_assert_eq!(choi.rows, d_in * out_dims.product());
        Channel {
            d_in,
            out_dims,
            choi,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d_out = self.out_dims.product();
        if self.choi.rows != self.d_in * d_out || !self.choi.is_square() {
            return Err(Error::InvalidChannel(format!(
                "choi is {}x{}, expected {}",
                self.choi.rows,
                self.choi.cols,
                self.d_in * d_out
            )));
        }
        let scale = self.choi.max_abs().max(1.0);
        let dev = self.choi.hermitian_deviation();
        if dev > 1e-8 * scale {
            return Err(Error::InvalidChannel(format!(
                "choi not Hermitian (deviation {dev:.3e})"
            )));
        }
        let min_eig = self.choi.min_eigenvalue();
        if min_eig < -CHANNEL_TOL * scale {
            return Err(Error::InvalidChannel(format!(
                "choi not PSD (min eigenvalue {min_eig:.3e})"
            )));
        }
        let marg = partial_trace(
            &self.choi,
            &DimTuple(vec![self.d_in, d_out]),
            &[0],
        )?;
        let tp_dev = marg.sub(&CMatrix::identity(self.d_in)).max_abs();
        if tp_dev > 1e2 * CHANNEL_TOL * scale {
            return Err(Error::InvalidChannel(format!(
                "not trace preserving (deviation {tp_dev:.3e})"
            )));
        }
        Ok(())
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.out_dims.product()
    }

    pub fn out_dims(&self) -> &DimTuple {
        &self.out_dims
    }

    pub fn choi(&self) -> &CMatrix {
        &self.choi
    }

    /// Reinterpret the output space with a different factor structure.
    pub fn with_out_dims(mut self, out_dims: impl Into<DimTuple>) -> Result<Self> {
        let od = out_dims.into();
        if od.product() != self.d_out() {
            return Err(Error::DimensionMismatch(
                "with_out_dims: product must match output dimension".into(),
            ));
        }
        self.out_dims = od;
        Ok(self)
    }

    /// Apply the channel to an operator in the chosen picture.
    ///
    /// Schrödinger maps states on `H_in` to states on `H_out` (`Σ K X K†`);
    /// Heisenberg maps observables on `H_out` to observables on `H_in`
    /// (`Σ K† X K`). Both are evaluated by direct Choi contraction, which
    /// agrees with the Kraus sums exactly.
    pub fn apply(&self, x: &CMatrix, picture: Picture) -> Result<CMatrix> {
        let d_out = self.d_out();
        match picture {
            Picture::Schrodinger => {
                if x.rows != self.d_in || x.cols != self.d_in {
                    return Err(Error::DimensionMismatch(format!(
                        "apply: state is {}x{}, input dimension is {}",
                        x.rows, x.cols, self.d_in
                    )));
                }
                let mut out = CMatrix::zeros(d_out, d_out);
                for i in 0..self.d_in {
                    for j in 0..self.d_in {
                        let w = x.get(i, j);
                        if w == C_ZERO {
                            continue;
                        }
                        for m in 0..d_out {
                            for n in 0..d_out {
                                let jv = self.choi.get(i * d_out + m, j * d_out + n);
                                out.data[m * d_out + n] += w * jv;
                            }
                        }
                    }
                }
                Ok(out)
            }
            Picture::Heisenberg => {
                if x.rows != d_out || x.cols != d_out {
                    return Err(Error::DimensionMismatch(format!(
                        "apply: observable is {}x{}, output dimension is {}",
                        x.rows, x.cols, d_out
                    )));
                }
                // Λ(T)[j,i] = Σ_{mn} J[(i,m),(j,n)] T[n,m].
                let mut out = CMatrix::zeros(self.d_in, self.d_in);
                for i in 0..self.d_in {
                    for j in 0..self.d_in {
                        let mut acc = C_ZERO;
                        for m in 0..d_out {
                            for n in 0..d_out {
                                acc += self.choi.get(i * d_out + m, j * d_out + n) * x.get(n, m);
                            }
                        }
                        out.set(j, i, acc);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Marginal channel of a broadcast channel: keeps the listed output
    /// factors (in the listed order) and traces out the rest.
    pub fn marginal(&self, keep: &[usize]) -> Result<Channel> {
        if keep.iter().any(|&k| k >= self.out_dims.len()) {
            return Err(Error::InvalidArgument(
                "marginal: output factor index out of range".into(),
            ));
        }
        let mut dims = vec![self.d_in];
        dims.extend_from_slice(&self.out_dims.0);
        let mut keep_full = vec![0usize];
        keep_full.extend(keep.iter().map(|&k| k + 1));
        let choi = partial_trace(&self.choi, &DimTuple(dims), &keep_full)?;
        let out_dims: Vec<usize> = keep.iter().map(|&k| self.out_dims.0[k]).collect();
        Ok(Channel::from_parts(self.d_in, out_dims, choi))
    }

    pub fn kraus(&self) -> KrausForm {
        kraus_from_choi(self, KRAUS_RANK_TOL)
    }
}

/// Operator-sum representation: `Λ*(ϱ) = Σ_a K_a ϱ K_a†`.
#[derive(Debug, Clone)]
pub struct KrausForm {
    pub d_in: usize,
    pub d_out: usize,
    pub operators: Vec<CMatrix>,
}

impl KrausForm {
    pub fn new(d_in: usize, d_out: usize, operators: Vec<CMatrix>) -> Result<Self> {
        let k = KrausForm {
            d_in,
            d_out,
            operators,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.operators.is_empty() {
            return Err(Error::InvalidChannel("no Kraus operators".into()));
        }
        for op in &self.operators {
            if op.rows != self.d_out || op.cols != self.d_in {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator is {}x{}, expected {}x{}",
                    op.rows, op.cols, self.d_out, self.d_in
                )));
            }
        }
        let mut sum = CMatrix::zeros(self.d_in, self.d_in);
        for op in &self.operators {
            sum = sum.add(&op.dagger().matmul(op));
        }
        let dev = sum.sub(&CMatrix::identity(self.d_in)).max_abs();
        if dev > 1e2 * CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!(
                "Σ K†K deviates from identity by {dev:.3e}"
            )));
        }
        Ok(())
    }
}

/// Isometry representation: `V: H_in → H_out ⊗ H_env`, `Λ*(ϱ) = Tr_env[VϱV†]`.
/// Row index is `(m, a) = m · d_env + a` with `m` the output index.
#[derive(Debug, Clone)]
pub struct StinespringForm {
    pub d_in: usize,
    pub d_out: usize,
    pub d_env: usize,
    pub v: CMatrix,
}

impl StinespringForm {
    pub fn new(d_in: usize, d_out: usize, d_env: usize, v: CMatrix) -> Result<Self> {
        let s = StinespringForm {
            d_in,
            d_out,
            d_env,
            v,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.v.rows != self.d_out * self.d_env || self.v.cols != self.d_in {
            return Err(Error::DimensionMismatch(format!(
                "isometry is {}x{}, expected {}x{}",
                self.v.rows,
                self.v.cols,
                self.d_out * self.d_env,
                self.d_in
            )));
        }
        let gram = self.v.dagger().matmul(&self.v);
        let dev = gram.sub(&CMatrix::identity(self.d_in)).max_abs();
        if dev > 1e2 * CHANNEL_TOL {
            return Err(Error::InvalidChannel(format!(
                "V†V deviates from identity by {dev:.3e}"
            )));
        }
        Ok(())
    }

    /// Kraus operators indexed by the environment basis.
    pub fn kraus(&self) -> KrausForm {
        let ops = (0..self.d_env)
            .map(|a| {
                CMatrix::from_fn(self.d_out, self.d_in, |m, i| {
                    self.v.get(m * self.d_env + a, i)
                })
            })
            .collect();
        KrausForm {
            d_in: self.d_in,
            d_out: self.d_out,
            operators: ops,
        }
    }

    /// The channel `Λ*(ϱ) = Tr_env[VϱV†]`.
    pub fn channel(&self) -> Channel {
        choi_from_kraus(&self.kraus())
    }

    /// The conjugate channel `Λ̄*(ϱ) = Tr_out[VϱV†]` to the environment.
    pub fn conjugate_channel(&self) -> Channel {
        let ops = (0..self.d_out)
            .map(|m| {
                CMatrix::from_fn(self.d_env, self.d_in, |a, i| {
                    self.v.get(m * self.d_env + a, i)
                })
            })
            .collect();
        choi_from_kraus(&KrausForm {
            d_in: self.d_in,
            d_out: self.d_env,
            operators: ops,
        })
    }

    /// Enlarge the environment by `extra` unused dimensions (the resulting
    /// representation is no longer minimal).
    pub fn pad_environment(&self, extra: usize) -> StinespringForm {
        let d_env = self.d_env + extra;
        let v = CMatrix::from_fn(self.d_out * d_env, self.d_in, |r, c| {
            let (m, a) = (r / d_env, r % d_env);
            if a < self.d_env {
                self.v.get(m * self.d_env + a, c)
            } else {
                C_ZERO
            }
        });
        StinespringForm {
            d_in: self.d_in,
            d_out: self.d_out,
            d_env,
            v,
        }
    }
}

/// Assemble the Choi matrix `Σ_a w_a w_a†` with `w_a[(i,m)] = (K_a)_{m,i}`.
pub fn choi_from_kraus(k: &KrausForm) -> Channel {
    let n = k.d_in * k.d_out;
    let mut choi = CMatrix::zeros(n, n);
    for op in &k.operators {
        let mut w = CMatrix::zeros(n, 1);
        for i in 0..k.d_in {
            for m in 0..k.d_out {
                w.data[i * k.d_out + m] = op.get(m, i);
            }
        }
        choi = choi.add(&outer(&w, &w));
    }
    Channel::from_parts(k.d_in, vec![k.d_out], choi)
}

/// Extract Kraus operators from the Choi eigendecomposition, keeping
/// eigenvalues above `rank_tol` relative to the largest one.
pub fn kraus_from_choi(c: &Channel, rank_tol: f64) -> KrausForm {
    let d_in = c.d_in();
    let d_out = c.d_out();
    let eig = linalg::eigh(c.choi()).expect("choi must be Hermitian");
    let lam_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut ops = Vec::new();
    for (a, &lam) in eig.values.iter().enumerate() {
        if lam <= rank_tol * lam_max || lam <= 0.0 {
            continue;
        }
        let s = lam.sqrt();
        ops.push(CMatrix::from_fn(d_out, d_in, |m, i| {
            eig.vectors.get(i * d_out + m, a) * s
        }));
    }
    if ops.is_empty() {
        // Degenerate (zero) channel cannot occur for valid inputs; keep a
        // zero operator so downstream shapes stay consistent.
        ops.push(CMatrix::zeros(d_out, d_in));
    }
    KrausForm {
        d_in,
        d_out,
        operators: ops,
    }
}

/// Minimal Stinespring representation: environment dimension equals the Choi
/// rank, `Vψ = Σ_a (K_a ψ) ⊗ |a⟩`.
pub fn minimal_stinespring(c: &Channel) -> StinespringForm {
    let k = c.kraus();
    let d_env = k.operators.len();
    let v = CMatrix::from_fn(k.d_out * d_env, k.d_in, |r, col| {
        let (m, a) = (r / d_env, r % d_env);
        k.operators[a].get(m, col)
    });
    StinespringForm {
        d_in: k.d_in,
        d_out: k.d_out,
        d_env,
        v,
    }
}

/// Conjugate channel computed from the minimal Stinespring representation.
pub fn conjugate(c: &Channel) -> Channel {
    minimal_stinespring(c).conjugate_channel()
}

/// Concatenation in the Schrödinger picture: `result* = later* ∘ earlier*`.
///
/// The Choi is computed by the link-product contraction over the shared
/// interface (partial transpose on that interface, contract, no
/// approximation), which in entries reads
/// `J[(i,c),(j,c')] = Σ_{b,b'} J_e[(i,b),(j,b')] · J_l[(b,c),(b',c')]`.
pub fn concatenate(later: &Channel, earlier: &Channel) -> Result<Channel> {
    let d_mid = earlier.d_out();
    if later.d_in() != d_mid {
        return Err(Error::DimensionMismatch(format!(
            "concatenate: earlier output dim {} != later input dim {}",
            d_mid,
            later.d_in()
        )));
    }
    let d_in = earlier.d_in();
    let d_out = later.d_out();
    let je = earlier.choi();
    let jl = later.choi();
    let mut choi = CMatrix::zeros(d_in * d_out, d_in * d_out);
    for i in 0..d_in {
        for j in 0..d_in {
            for b in 0..d_mid {
                for bp in 0..d_mid {
                    let w = je.get(i * d_mid + b, j * d_mid + bp);
                    if w == C_ZERO {
                        continue;
                    }
                    for cc in 0..d_out {
                        for cp in 0..d_out {
                            let add = w * jl.get(b * d_out + cc, bp * d_out + cp);
                            choi.data[(i * d_out + cc) * (d_in * d_out) + (j * d_out + cp)] += add;
                        }
                    }
                }
            }
        }
    }
    Ok(Channel::from_parts(
        d_in,
        later.out_dims().clone(),
        choi,
    ))
}

/// Tensor product acting factor-wise; the output factor structure is the
/// concatenation of the two output structures (argument order).
pub fn tensor_product(c1: &Channel, c2: &Channel) -> Channel {
    let (d1, e1) = (c1.d_in(), c1.d_out());
    let (d2, e2) = (c2.d_in(), c2.d_out());
    let d_in = d1 * d2;
    let d_out = e1 * e2;
    let j1 = c1.choi();
    let j2 = c2.choi();
    let mut choi = CMatrix::zeros(d_in * d_out, d_in * d_out);
    for i1 in 0..d1 {
        for j1i in 0..d1 {
            for m1 in 0..e1 {
                for n1 in 0..e1 {
                    let a = j1.get(i1 * e1 + m1, j1i * e1 + n1);
                    if a == C_ZERO {
                        continue;
                    }
                    for i2 in 0..d2 {
                        for j2i in 0..d2 {
                            for m2 in 0..e2 {
                                for n2 in 0..e2 {
                                    let b = j2.get(i2 * e2 + m2, j2i * e2 + n2);
                                    if b == C_ZERO {
                                        continue;
                                    }
                                    let row = (i1 * d2 + i2) * d_out + (m1 * e2 + m2);
                                    let col = (j1i * d2 + j2i) * d_out + (n1 * e2 + n2);
                                    choi.data[row * (d_in * d_out) + col] += a * b;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let mut out_dims = c1.out_dims().0.clone();
    out_dims.extend_from_slice(&c2.out_dims().0);
    Channel::from_parts(d_in, out_dims, choi)
}

/// Convex mixture of channels with the given probability weights.
pub fn mix(channels: &[Channel], weights: &[f64]) -> Result<Channel> {
    if channels.is_empty() || channels.len() != weights.len() {
        return Err(Error::InvalidArgument(
            "mix: need equally many channels and weights".into(),
        ));
    }
    if weights.iter().any(|&w| w < -1e-12)
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(
            "mix: weights must be nonnegative and sum to 1".into(),
        ));
    }
    let d_in = channels[0].d_in();
    let d_out = channels[0].d_out();
    for c in channels {
        if c.d_in() != d_in || c.d_out() != d_out {
            return Err(Error::DimensionMismatch(
                "mix: all channels must share input and output dimensions".into(),
            ));
        }
    }
    let mut choi = CMatrix::zeros(d_in * d_out, d_in * d_out);
    for (c, &w) in channels.iter().zip(weights) {
        choi = choi.add(&c.choi().scale_re(w));
    }
    Ok(Channel::from_parts(
        d_in,
        channels[0].out_dims().clone(),
        choi,
    ))
}

/// The identity channel on dimension `d` (Choi is the unnormalized maximally
/// entangled projector).
pub fn identity_channel(d: usize) -> Channel {
    let mut omega = CMatrix::zeros(d * d, 1);
    for i in 0..d {
        omega.data[i * d + i] = C_ONE;
    }
    Channel::from_parts(d, vec![d], outer(&omega, &omega))
}

/// Constant channel `ϱ ↦ η` (completely depolarizing); Choi is `I_{d_in} ⊗ η`.
pub fn constant_channel(eta: &CMatrix, d_in: usize) -> Result<Channel> {
    if !eta.is_square() {
        return Err(Error::InvalidArgument("constant_channel: state must be square".into()));
    }
    let min_eig = eta.min_eigenvalue();
    if min_eig < -1e-9 || (eta.trace().re - 1.0).abs() > 1e-9 || eta.trace().im.abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "constant_channel: η must be PSD with unit trace".into(),
        ));
    }
    let choi = kron(&CMatrix::identity(d_in), &eta.hermitize());
    Ok(Channel::from_parts(d_in, vec![eta.rows], choi))
}

/// Pauli channel `Ψ_p(A) = Σ_j p_j σ_j A σ_j + (1 − Σ_j p_j) A`.
pub fn pauli_channel(p: (f64, f64, f64)) -> Result<Channel> {
    let (px, py, pz) = p;
    let sum = px + py + pz;
    if px < 0.0 || py < 0.0 || pz < 0.0 || sum > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(
            "pauli_channel: need p_j ≥ 0 and Σ p_j ≤ 1".into(),
        ));
    }
    let mut ops = Vec::new();
    let id_w = (1.0 - sum).max(0.0);
    if id_w > 0.0 {
        ops.push(CMatrix::identity(2).scale_re(id_w.sqrt()));
    }
    for (w, sigma) in [
        (px, linalg::pauli_x()),
        (py, linalg::pauli_y()),
        (pz, linalg::pauli_z()),
    ] {
        if w > 0.0 {
            ops.push(sigma.scale_re(w.sqrt()));
        }
    }
    Ok(choi_from_kraus(&KrausForm {
        d_in: 2,
        d_out: 2,
        operators: ops,
    }))
}

/// Sufficient analytic test for incompatibility of two Pauli channels.
///
/// The transformed observables `Ψ_p(X)(±1) = ½(1 ± (1−2(p_y+p_z))σx)` and
/// `Ψ_q(Y)(±1) = ½(1 ± (1−2(q_x+q_z))σy)` are jointly measurable exactly when
/// the squares of their sharpness parameters sum to at most one, so the pair
/// of channels is incompatible whenever
/// `(1−2(p_y+p_z))² + (1−2(q_x+q_z))² > 1`.
/// This is one-directional at the channel level: `false` draws no conclusion.
pub fn pauli_incompatibility_sufficient(p: (f64, f64, f64), q: (f64, f64, f64)) -> bool {
    let a = 1.0 - 2.0 * (p.1 + p.2);
    let b = 1.0 - 2.0 * (q.0 + q.2);
    a * a + b * b > 1.0
}

/// Basis-copying channel `C*_n(ϱ) = Σ_x ⟨δx|ϱδx⟩ |δx^{⊗n}⟩⟨δx^{⊗n}|`.
pub fn copying_channel(num_outcomes: usize, n: usize) -> Result<Channel> {
    if n < 1 || num_outcomes < 1 {
        return Err(Error::InvalidArgument(
            "copying_channel: need num_outcomes ≥ 1 and n ≥ 1".into(),
        ));
    }
    let d = num_outcomes;
    let d_out = d.pow(n as u32);
    let nn = d * d_out;
    let mut choi = CMatrix::zeros(nn, nn);
    for x in 0..d {
        // |δx^{⊗n}⟩ has flat index x · (d^{n-1} + ... + 1).
        let mut rep = 0usize;
        for _ in 0..n {
            rep = rep * d + x;
        }
        let idx = x * d_out + rep;
        choi.data[idx * nn + idx] = C_ONE;
    }
    Ok(Channel::from_parts(d, vec![d; n], choi))
}

/// Seeded random channel sampled through a random Stinespring isometry.
pub fn random_channel(d_in: usize, d_out: usize, d_env: usize, seed: u64) -> Result<Channel> {
    if d_env < 1 {
        return Err(Error::InvalidArgument("random_channel: d_env ≥ 1".into()));
    }
    let v = linalg::random_isometry(d_in, d_out * d_env, seed)?;
    Ok(StinespringForm {
        d_in,
        d_out,
        d_env,
        v,
    }
    .channel())
}

/// Max-abs entry distance between two Chois (dimension-checked).
pub fn choi_distance(a: &Channel, b: &Channel) -> Result<f64> {
    if a.d_in() != b.d_in() || a.d_out() != b.d_out() {
        return Err(Error::DimensionMismatch("choi_distance".into()));
    }
    Ok(a.choi().sub(b.choi()).max_abs())
}
