//! Decision procedures for the channel calculus: the concatenation preorder,
//! compatibility of pairs and n-tuples, joint measurability, channel–
//! observable compatibility, and the special channel classes (completely
//! depolarizing, entanglement breaking, self-compatible, incompatibility
//! breaking).
//!
//! Every numerical decision is reduced to a PSD feasibility problem and
//! returns a certified tri-state verdict: witnesses are re-verified against
//! the defining marginal/concatenation equations independently of the
//! solver, and `Undecided` is propagated, never collapsed into a guess.

use crate::channel::{
    concatenate, conjugate, gamma_of_observable, instrument_from_joint, Channel, Instrument,
    Observable,
};
use crate::error::Error;
use crate::linalg::{self, partial_transpose, permute_factors, CMatrix, DimTuple};
use crate::sdp::{self, SdpProblem, SdpStatus, SdpVerdict};
use crate::Result;

/// Residual allowed when re-verifying joint-channel marginals and preorder
/// witnesses against their defining equations.
pub const WITNESS_TOL: f64 = 1e-6;

/// Solver knobs shared by all decision procedures.
#[derive(Debug, Clone, Copy)]
pub struct SolveOpts {
    pub max_iter: usize,
    pub seed: u64,
    /// Override of the affine feasibility tolerance (defaults to the sdp
    /// module's 1e-7).
    pub eps_feas: Option<f64>,
}

impl Default for SolveOpts {
    fn default() -> Self {
        SolveOpts {
            max_iter: sdp::DEFAULT_MAX_ITER,
            seed: 0,
            eps_feas: None,
        }
    }
}

impl SolveOpts {
    pub fn seeded(seed: u64) -> Self {
        SolveOpts {
            seed,
            ..Default::default()
        }
    }

    fn apply(&self, p: &mut SdpProblem) {
        if let Some(eps) = self.eps_feas {
            p.eps_feas = eps;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompatStatus {
    Compatible,
    Incompatible,
    Undecided,
}

/// Outcome of a compatibility decision, with the joint channel witness when
/// compatible and the solver verdict (Farkas certificate when incompatible)
/// passed through for independent re-certification.
#[derive(Debug, Clone)]
pub struct CompatVerdict {
    pub status: CompatStatus,
    pub joint: Option<Channel>,
    /// Largest marginal reconstruction error of the joint witness.
    pub marginal_residual: Option<f64>,
    pub sdp: SdpVerdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreorderStatus {
    Leq,
    NotLeq,
    Undecided,
}

/// Outcome of `Λ1 ⪯ Λ2`, with the factoring channel Θ when it exists.
#[derive(Debug, Clone)]
pub struct PreorderVerdict {
    pub status: PreorderStatus,
    pub theta: Option<Channel>,
    /// `max |choi(Λ2 ∘ Θ) − choi(Λ1)|` for the returned witness.
    pub reconstruction_residual: Option<f64>,
    pub sdp: SdpVerdict,
}

/// Encode the joint-channel feasibility problem for an n-tuple of channels
/// sharing an input space: the variable is the Choi of the broadcast channel
/// on `H_in ⊗ H_out1 ⊗ … ⊗ H_outn` and each marginal (trace over the other
/// output groups) is pinned to the corresponding input Choi.
pub fn compat_problem(channels: &[&Channel]) -> Result<(SdpProblem, Vec<usize>)> {
    if channels.len() < 2 {
        return Err(Error::InvalidArgument(
            "compatibility needs at least two channels".into(),
        ));
    }
    let d_in = channels[0].d_in();
    for c in channels {
        if c.d_in() != d_in {
            return Err(Error::DimensionMismatch(
                "compatibility: all channels must share the input space".into(),
            ));
        }
    }
    let mut out_dims = vec![];
    let mut group_ranges = vec![];
    for c in channels {
        let start = out_dims.len();
        out_dims.extend_from_slice(&c.out_dims().0);
        group_ranges.push(start..out_dims.len());
    }
    let mut full_dims = vec![d_in];
    full_dims.extend_from_slice(&out_dims);
    let dims = DimTuple(full_dims);
    let mut problem = SdpProblem::new(dims.product());
    for (c, range) in channels.iter().zip(&group_ranges) {
        let mut keep = vec![0usize];
        keep.extend(range.clone().map(|k| k + 1));
        problem.add_partial_trace_eq(&dims, &keep, c.choi())?;
    }
    Ok((problem, out_dims))
}

/// Encode `Λ1 = Λ2 ∘ Θ` as linear constraints on the Choi of Θ: the link
/// contraction of `choi(Λ2)` with the variable must reproduce `choi(Λ1)`,
/// and Θ must be trace preserving.
pub fn preorder_problem(l1: &Channel, l2: &Channel) -> Result<SdpProblem> {
    if l1.d_in() != l2.d_in() {
        return Err(Error::DimensionMismatch(
            "preorder: channels must share the input space".into(),
        ));
    }
    let d_in = l1.d_in();
    let db = l2.d_out(); // Θ input (Schrödinger)
    let dc = l1.d_out(); // Θ output
    let n = db * dc;
    let mut problem = SdpProblem::new(n);
    let j1 = l1.choi();
    let j2 = l2.choi();

    // tr[B·L(X)] = tr[B·J1] for every Hermitian basis element B of the
    // target space H_in ⊗ H_out1, where L is the link contraction with J2:
    // F[(β,γ),(β',γ')] = Σ_{ij} B[(j,γ),(i,γ')] · J2[(i,β'),(j,β)].
    for basis in sdp::hermitian_basis(d_in * dc) {
        let mut f = CMatrix::zeros(n, n);
        for jrow in 0..d_in {
            for gamma in 0..dc {
                for irow in 0..d_in {
                    for gamma_p in 0..dc {
                        let bval = basis.get(jrow * dc + gamma, irow * dc + gamma_p);
                        if bval == linalg::C_ZERO {
                            continue;
                        }
                        for beta in 0..db {
                            for beta_p in 0..db {
                                let add = bval * j2.get(irow * db + beta_p, jrow * db + beta);
                                f.data[(beta * dc + gamma) * n + (beta_p * dc + gamma_p)] += add;
                            }
                        }
                    }
                }
            }
        }
        problem.add_constraint(f, basis.inner_re(j1))?;
    }
    // Trace preservation of Θ.
    let theta_dims = DimTuple(vec![db, dc]);
    problem.add_partial_trace_eq(&theta_dims, &[0], &CMatrix::identity(db))?;
    Ok(problem)
}

/// Largest marginal reconstruction error of `joint` against the given parts.
pub fn joint_marginal_residual(joint: &Channel, parts: &[&Channel]) -> Result<f64> {
    let mut offset = 0usize;
    let mut worst = 0.0f64;
    for part in parts {
        let glen = part.out_dims().len();
        let keep: Vec<usize> = (offset..offset + glen).collect();
        let marg = joint.marginal(&keep)?;
        worst = worst.max(marg.choi().sub(part.choi()).max_abs());
        offset += glen;
    }
    if offset != joint.out_dims().len() {
        return Err(Error::DimensionMismatch(
            "joint output factors do not match the parts".into(),
        ));
    }
    Ok(worst)
}

/// Decide compatibility of an n-tuple of channels (n ≥ 2).
pub fn are_compatible_n(channels: &[&Channel], opts: &SolveOpts) -> Result<CompatVerdict> {
    let (mut problem, out_dims) = compat_problem(channels)?;
    opts.apply(&mut problem);
    let verdict = sdp::solve_feasibility(&problem, opts.max_iter, opts.seed)?;
    let d_in = channels[0].d_in();
    match &verdict.status {
        SdpStatus::Feasible { witness } => {
            let joint = Channel::from_parts(d_in, out_dims, witness.hermitize());
            let residual = joint_marginal_residual(&joint, channels)?;
            if residual > WITNESS_TOL {
                // The solver met its tolerance but the reconstruction does
                // not: treat as inconclusive rather than overclaim.
                return Ok(CompatVerdict {
                    status: CompatStatus::Undecided,
                    joint: None,
                    marginal_residual: Some(residual),
                    sdp: verdict,
                });
            }
            Ok(CompatVerdict {
                status: CompatStatus::Compatible,
                joint: Some(joint),
                marginal_residual: Some(residual),
                sdp: verdict,
            })
        }
        SdpStatus::Infeasible { .. } => Ok(CompatVerdict {
            status: CompatStatus::Incompatible,
            joint: None,
            marginal_residual: None,
            sdp: verdict,
        }),
        SdpStatus::Undecided => Ok(CompatVerdict {
            status: CompatStatus::Undecided,
            joint: None,
            marginal_residual: None,
            sdp: verdict,
        }),
    }
}

/// Decide compatibility of a pair of channels.
pub fn are_compatible(l1: &Channel, l2: &Channel, opts: &SolveOpts) -> Result<CompatVerdict> {
    are_compatible_n(&[l1, l2], opts)
}

/// Decide `Λ1 ⪯ Λ2` in the concatenation preorder.
pub fn preorder_leq(l1: &Channel, l2: &Channel, opts: &SolveOpts) -> Result<PreorderVerdict> {
    let mut problem = preorder_problem(l1, l2)?;
    opts.apply(&mut problem);
    let verdict = sdp::solve_feasibility(&problem, opts.max_iter, opts.seed)?;
    match &verdict.status {
        SdpStatus::Feasible { witness } => {
            let theta = Channel::from_parts(l2.d_out(), vec![l1.d_out()], witness.hermitize());
            let recon = concatenate(&theta, l2)?;
            let residual = recon.choi().sub(l1.choi()).max_abs();
            if residual > WITNESS_TOL {
                return Ok(PreorderVerdict {
                    status: PreorderStatus::Undecided,
                    theta: None,
                    reconstruction_residual: Some(residual),
                    sdp: verdict,
                });
            }
            Ok(PreorderVerdict {
                status: PreorderStatus::Leq,
                theta: Some(theta),
                reconstruction_residual: Some(residual),
                sdp: verdict,
            })
        }
        SdpStatus::Infeasible { .. } => Ok(PreorderVerdict {
            status: PreorderStatus::NotLeq,
            theta: None,
            reconstruction_residual: None,
            sdp: verdict,
        }),
        SdpStatus::Undecided => Ok(PreorderVerdict {
            status: PreorderStatus::Undecided,
            theta: None,
            reconstruction_residual: None,
            sdp: verdict,
        }),
    }
}

/// Concatenation equivalence `Λ1 ≃ Λ2`: both preorder directions.
pub fn concatenation_equivalent(
    l1: &Channel,
    l2: &Channel,
    opts: &SolveOpts,
) -> Result<(PreorderVerdict, PreorderVerdict)> {
    let fwd = preorder_leq(l1, l2, opts)?;
    let bwd = preorder_leq(l2, l1, opts)?;
    Ok((fwd, bwd))
}

/// Verdict of a joint-measurability decision.
#[derive(Debug, Clone)]
pub struct JmVerdict {
    pub status: CompatStatus,
    pub joint: Option<Observable>,
    pub sdp: SdpVerdict,
}

/// Encode joint measurability as block-diagonal PSD feasibility: the variable
/// holds all candidate effects `G(x,y)` as diagonal blocks, the off-diagonal
/// blocks are pinned to zero, and the two marginal sums are pinned to `M`
/// and `N`.
pub fn jm_problem(m: &Observable, n_obs: &Observable) -> Result<SdpProblem> {
    if m.dim() != n_obs.dim() {
        return Err(Error::DimensionMismatch(
            "joint measurability: observables must share the input space".into(),
        ));
    }
    let d = m.dim();
    let km = m.num_outcomes();
    let kn = n_obs.num_outcomes();
    let blocks = km * kn;
    let nvar = blocks * d;
    let mut problem = SdpProblem::new(nvar);
    let basis = sdp::hermitian_basis(d);

    // Marginal constraints Σ_y G(x,y) = M(x).
    for x in 0..km {
        for b in &basis {
            let mut f = CMatrix::zeros(nvar, nvar);
            for y in 0..kn {
                let off = (x * kn + y) * d;
                for p in 0..d {
                    for q in 0..d {
                        f.set(off + p, off + q, b.get(p, q));
                    }
                }
            }
            problem.add_constraint(f, b.inner_re(&m.effects[x]))?;
        }
    }
    // Marginal constraints Σ_x G(x,y) = N(y).
    for y in 0..kn {
        for b in &basis {
            let mut f = CMatrix::zeros(nvar, nvar);
            for x in 0..km {
                let off = (x * kn + y) * d;
                for p in 0..d {
                    for q in 0..d {
                        f.set(off + p, off + q, b.get(p, q));
                    }
                }
            }
            problem.add_constraint(f, b.inner_re(&n_obs.effects[y]))?;
        }
    }
    // Off-diagonal blocks vanish: Re and Im of every cross-block entry.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for bi in 0..blocks {
        for bj in (bi + 1)..blocks {
            for p in 0..d {
                for q in 0..d {
                    let (r, c) = (bi * d + p, bj * d + q);
                    let mut f_re = CMatrix::zeros(nvar, nvar);
                    f_re.set(r, c, num_complex::Complex64::new(s, 0.0));
                    f_re.set(c, r, num_complex::Complex64::new(s, 0.0));
                    problem.add_constraint(f_re, 0.0)?;
                    let mut f_im = CMatrix::zeros(nvar, nvar);
                    f_im.set(r, c, num_complex::Complex64::new(0.0, s));
                    f_im.set(c, r, num_complex::Complex64::new(0.0, -s));
                    problem.add_constraint(f_im, 0.0)?;
                }
            }
        }
    }
    Ok(problem)
}

/// Decide joint measurability of two observables, returning the joint
/// observable over the product outcome set when it exists.
pub fn jointly_measurable(
    m: &Observable,
    n_obs: &Observable,
    opts: &SolveOpts,
) -> Result<JmVerdict> {
    let mut problem = jm_problem(m, n_obs)?;
    opts.apply(&mut problem);
    let verdict = sdp::solve_feasibility(&problem, opts.max_iter, opts.seed)?;
    let d = m.dim();
    let km = m.num_outcomes();
    let kn = n_obs.num_outcomes();
    match &verdict.status {
        SdpStatus::Feasible { witness } => {
            let raw: Vec<CMatrix> = (0..km * kn)
                .map(|blk| {
                    // Clip tiny negative eigenvalues the solver tolerance allows.
                    linalg::psd_project(
                        &CMatrix::from_fn(d, d, |p, q| witness.get(blk * d + p, blk * d + q))
                            .hermitize(),
                    )
                })
                .collect();
            let effects = crate::channel::renormalize_effects(raw)?;
            let joint = Observable::new(effects)?.with_shape(vec![km, kn])?;
            Ok(JmVerdict {
                status: CompatStatus::Compatible,
                joint: Some(joint),
                sdp: verdict,
            })
        }
        SdpStatus::Infeasible { .. } => Ok(JmVerdict {
            status: CompatStatus::Incompatible,
            joint: None,
            sdp: verdict,
        }),
        SdpStatus::Undecided => Ok(JmVerdict {
            status: CompatStatus::Undecided,
            joint: None,
            sdp: verdict,
        }),
    }
}

/// Verdict of an observable–channel compatibility decision.
#[derive(Debug, Clone)]
pub struct ObsChannelVerdict {
    pub status: CompatStatus,
    pub instrument: Option<Instrument>,
    pub sdp: SdpVerdict,
}

/// An observable and a channel are compatible exactly when `Γ_M` and the
/// channel admit a joint broadcast channel; the instrument implementing both
/// is read off the pointer blocks of that joint.
pub fn observable_channel_compatible(
    m: &Observable,
    l: &Channel,
    opts: &SolveOpts,
) -> Result<ObsChannelVerdict> {
    let gamma = gamma_of_observable(m);
    let verdict = are_compatible(&gamma, l, opts)?;
    let instrument = match (&verdict.status, &verdict.joint) {
        (CompatStatus::Compatible, Some(joint)) => {
            let (inst, _m_back) = instrument_from_joint(joint, m.num_outcomes())?;
            Some(inst)
        }
        _ => None,
    };
    Ok(ObsChannelVerdict {
        status: verdict.status,
        instrument,
        sdp: verdict.sdp,
    })
}

/// Analytic test for `Φ(A) = tr[ηA]·1`: the Choi must equal
/// `I_{d_in} ⊗ (Tr_in J)/d_in` up to 1e-7 in Frobenius norm.
pub fn is_completely_depolarizing(l: &Channel) -> bool {
    let d_in = l.d_in();
    let d_out = l.d_out();
    let dims = DimTuple(vec![d_in, d_out]);
    let eta = match linalg::partial_trace(l.choi(), &dims, &[1]) {
        Ok(t) => t.scale_re(1.0 / d_in as f64),
        Err(_) => return false,
    };
    let product = linalg::kron(&CMatrix::identity(d_in), &eta);
    l.choi().sub(&product).frobenius_norm() <= 1e-7
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbStatus {
    /// Choi is PPT and the dimensions are in the PPT-exact regime (≤ 2⊗3).
    Eb,
    /// The partially transposed Choi has a negative eigenvalue.
    NotEb,
    /// PPT holds but the dimensions are beyond the exact regime.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct EbVerdict {
    pub status: EbStatus,
    /// Most negative eigenvalue of the partially transposed Choi (the
    /// NotEb certificate when below −1e-9).
    pub min_pt_eigenvalue: f64,
}

/// Entanglement-breaking test by positive partial transpose of the Choi.
pub fn is_entanglement_breaking(l: &Channel) -> Result<EbVerdict> {
    let d_in = l.d_in();
    let d_out = l.d_out();
    let pt = partial_transpose(l.choi(), d_in, d_out, 0)?;
    let eig = linalg::eigh(&pt)?;
    let min_eig = eig.values.last().copied().unwrap_or(0.0);
    let status = if min_eig < -1e-9 {
        EbStatus::NotEb
    } else if d_in * d_out <= 6 {
        EbStatus::Eb
    } else {
        EbStatus::Inconclusive
    };
    Ok(EbVerdict {
        status,
        min_pt_eigenvalue: min_eig,
    })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let smaller = permutations(n - 1);
    let mut out = Vec::new();
    for p in smaller {
        for pos in 0..=p.len() {
            let mut q: Vec<usize> = p.iter().map(|&v| v).collect();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Average a joint channel for n copies over the permutations of its output
/// groups; the result is again a joint channel for the same copies.
pub fn symmetrize_joint(joint: &Channel, copies: usize) -> Result<Channel> {
    let factors = joint.out_dims().len();
    if factors % copies != 0 {
        return Err(Error::DimensionMismatch(
            "symmetrize_joint: output factors do not split into copies".into(),
        ));
    }
    let group = factors / copies;
    let mut full_dims = vec![joint.d_in()];
    full_dims.extend_from_slice(&joint.out_dims().0);
    let dims = DimTuple(full_dims);
    let n = dims.product();
    let mut acc = CMatrix::zeros(n, n);
    let perms = permutations(copies);
    let count = perms.len() as f64;
    for perm in perms {
        // Factor permutation: input stays, output group k comes from group perm[k].
        let mut factor_perm = vec![0usize];
        for &src_group in &perm {
            for g in 0..group {
                factor_perm.push(1 + src_group * group + g);
            }
        }
        let permuted = permute_factors(joint.choi(), &dims, &factor_perm)?;
        acc = acc.add(&permuted);
    }
    Ok(Channel::from_parts(
        joint.d_in(),
        joint.out_dims().clone(),
        acc.scale_re(1.0 / count).hermitize(),
    ))
}

/// Self-compatibility (`Λ` compatible with itself); the returned joint is the
/// permutation-symmetrized witness, re-verified as a joint channel.
pub fn is_self_compatible(l: &Channel, opts: &SolveOpts) -> Result<CompatVerdict> {
    is_n_self_compatible(l, 2, opts)
}

/// n-self-compatibility: n copies of `Λ` admit a joint broadcast channel.
pub fn is_n_self_compatible(l: &Channel, n: usize, opts: &SolveOpts) -> Result<CompatVerdict> {
    let copies: Vec<&Channel> = std::iter::repeat(l).take(n).collect();
    let mut verdict = are_compatible_n(&copies, opts)?;
    if let (CompatStatus::Compatible, Some(joint)) = (&verdict.status, &verdict.joint) {
        let symmetric = symmetrize_joint(joint, n)?;
        let residual = joint_marginal_residual(&symmetric, &copies)?;
        if residual <= WITNESS_TOL {
            verdict.joint = Some(symmetric);
            verdict.marginal_residual = Some(residual);
        }
    }
    Ok(verdict)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakingStatus {
    Breaking,
    NotBreaking,
    Undecided,
}

#[derive(Debug, Clone)]
pub struct BreakingVerdict {
    pub status: BreakingStatus,
    /// Indices (into the input set, with repetition) of the first tuple whose
    /// processed channels were certified incompatible.
    pub failing_tuple: Option<Vec<usize>>,
}

fn tuples_with_repetition(count: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; len];
    loop {
        out.push(current.clone());
        // Next non-decreasing tuple.
        let mut pos = len;
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            if current[pos] + 1 < count {
                let v = current[pos] + 1;
                for slot in current.iter_mut().skip(pos) {
                    *slot = v;
                }
                break;
            }
        }
    }
}

/// Is `Φ` n-incompatibility breaking on the given set: do the processed
/// channels `Φ∘Λ_{i1}, …, Φ∘Λ_{in}` stay compatible for every n-tuple drawn
/// from the set (with repetition)?
pub fn incompatibility_breaking_on(
    phi: &Channel,
    set: &[Channel],
    n: usize,
    opts: &SolveOpts,
) -> Result<BreakingVerdict> {
    if set.is_empty() || n < 2 {
        return Err(Error::InvalidArgument(
            "incompatibility_breaking_on: need a nonempty set and n ≥ 2".into(),
        ));
    }
    let processed: Vec<Channel> = set
        .iter()
        .map(|lam| concatenate(lam, phi))
        .collect::<Result<Vec<_>>>()?;
    let mut saw_undecided = false;
    for tuple in tuples_with_repetition(set.len(), n) {
        let chans: Vec<&Channel> = tuple.iter().map(|&i| &processed[i]).collect();
        let verdict = are_compatible_n(&chans, opts)?;
        match verdict.status {
            CompatStatus::Incompatible => {
                return Ok(BreakingVerdict {
                    status: BreakingStatus::NotBreaking,
                    failing_tuple: Some(tuple),
                });
            }
            CompatStatus::Undecided => saw_undecided = true,
            CompatStatus::Compatible => {}
        }
    }
    Ok(BreakingVerdict {
        status: if saw_undecided {
            BreakingStatus::Undecided
        } else {
            BreakingStatus::Breaking
        },
        failing_tuple: None,
    })
}

/// Successful three-channel factorization through the conjugate of the first
/// channel: `Λ2 = conj(Λ1) ∘ E2`, `Λ3 = conj(Λ1) ∘ E3` with `(E2, E3)`
/// compatible (they are marginals of one witness channel).
#[derive(Debug, Clone)]
pub struct ThreeFactorization {
    pub e2: Channel,
    pub e3: Channel,
    pub residual_e2: f64,
    pub residual_e3: f64,
}

#[derive(Debug, Clone)]
pub enum ThreeFactorizeOutcome {
    Factorized(ThreeFactorization),
    Incompatible,
    Undecided,
}

/// Factorize a compatible triple through the conjugate of the first channel.
pub fn three_channel_factorize(
    l1: &Channel,
    l2: &Channel,
    l3: &Channel,
    opts: &SolveOpts,
) -> Result<ThreeFactorizeOutcome> {
    let joint = are_compatible_n(&[l1, l2, l3], opts)?;
    let joint_channel = match (&joint.status, joint.joint) {
        (CompatStatus::Compatible, Some(j)) => j,
        (CompatStatus::Incompatible, _) => return Ok(ThreeFactorizeOutcome::Incompatible),
        _ => return Ok(ThreeFactorizeOutcome::Undecided),
    };
    // Λ23 keeps the output groups of Λ2 and Λ3.
    let g1 = l1.out_dims().len();
    let g2 = l2.out_dims().len();
    let g3 = l3.out_dims().len();
    let keep: Vec<usize> = (g1..g1 + g2 + g3).collect();
    let lambda23 = joint_channel.marginal(&keep)?;
    let conj1 = conjugate(l1);
    // The Λ23 marginal carries solver noise of order eps_feas, so the link
    // system for Θ is solved with a correspondingly relaxed tolerance.
    let mut pre_opts = *opts;
    pre_opts.eps_feas = Some(pre_opts.eps_feas.unwrap_or(sdp::EPS_FEAS).max(1e-6));
    let pre = preorder_leq(&lambda23, &conj1, &pre_opts)?;
    let phi = match (&pre.status, pre.theta) {
        (PreorderStatus::Leq, Some(theta)) => theta
            .with_out_dims(
                l2.out_dims()
                    .0
                    .iter()
                    .chain(l3.out_dims().0.iter())
                    .copied()
                    .collect::<Vec<_>>(),
            )?,
        _ => return Ok(ThreeFactorizeOutcome::Undecided),
    };
    let e2 = phi.marginal(&(0..g2).collect::<Vec<_>>())?;
    let e3 = phi.marginal(&(g2..g2 + g3).collect::<Vec<_>>())?;
    let rec2 = concatenate(&e2, &conj1)?;
    let rec3 = concatenate(&e3, &conj1)?;
    let residual_e2 = rec2.choi().sub(l2.choi()).max_abs();
    let residual_e3 = rec3.choi().sub(l3.choi()).max_abs();
    if residual_e2 > 1e-5 || residual_e3 > 1e-5 {
        return Ok(ThreeFactorizeOutcome::Undecided);
    }
    Ok(ThreeFactorizeOutcome::Factorized(ThreeFactorization {
        e2,
        e3,
        residual_e2,
        residual_e3,
    }))
}

/// Closed-form joint channel for the half-noisy pair
/// `(½Λ1 + ½Ξ1, ½Λ2 + ½Ξ2)` with `Ξ_j` the constant channel to `η_j`:
/// `Λ*(ϱ) = ½ Λ1*(ϱ) ⊗ η2 + ½ η1 ⊗ Λ2*(ϱ)`.
pub fn noisy_pair_joint(
    l1: &Channel,
    l2: &Channel,
    eta1: &CMatrix,
    eta2: &CMatrix,
) -> Result<Channel> {
    if l1.d_in() != l2.d_in() {
        return Err(Error::DimensionMismatch(
            "noisy_pair_joint: channels must share the input space".into(),
        ));
    }
    if eta1.rows != l1.d_out() || eta2.rows != l2.d_out() {
        return Err(Error::DimensionMismatch(
            "noisy_pair_joint: states must live on the channel outputs".into(),
        ));
    }
    let d_in = l1.d_in();
    let e1 = l1.d_out();
    let e2 = l2.d_out();
    let d_out = e1 * e2;
    let n = d_in * d_out;
    let j1 = l1.choi();
    let j2 = l2.choi();
    let mut choi = CMatrix::zeros(n, n);
    for i in 0..d_in {
        for j in 0..d_in {
            for m1 in 0..e1 {
                for n1 in 0..e1 {
                    for m2 in 0..e2 {
                        for n2 in 0..e2 {
                            let row = i * d_out + m1 * e2 + m2;
                            let col = j * d_out + n1 * e2 + n2;
                            let a = j1.get(i * e1 + m1, j * e1 + n1) * eta2.get(m2, n2);
                            let b = eta1.get(m1, n1) * j2.get(i * e2 + m2, j * e2 + n2);
                            choi.data[row * n + col] = (a + b) * 0.5;
                        }
                    }
                }
            }
        }
    }
    let mut out_dims = l1.out_dims().0.clone();
    out_dims.extend_from_slice(&l2.out_dims().0);
    Ok(Channel::from_parts(d_in, out_dims, choi))
}

#[derive(Debug, Clone)]
pub struct ThresholdBracket {
    pub lo: f64,
    pub hi: f64,
    pub lo_status: CompatStatus,
    pub hi_status: CompatStatus,
}

impl ThresholdBracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bisect a monotone one-parameter family of channel pairs for the
/// compatibility boundary. Both endpoints must be certified with opposite
/// statuses; `Undecided` probe points never move an endpoint (the bracket
/// is left wider rather than guessed), and bisection stops once the bracket
/// is narrower than `tol` or no probe in the current bracket can be
/// certified.
pub fn noise_threshold(
    family: &dyn Fn(f64) -> Result<(Channel, Channel)>,
    lo: f64,
    hi: f64,
    tol: f64,
    opts: &SolveOpts,
) -> Result<ThresholdBracket> {
    let status_at = |t: f64| -> Result<CompatStatus> {
        let (a, b) = family(t)?;
        Ok(are_compatible(&a, &b, opts)?.status)
    };
    let lo_status = status_at(lo)?;
    let hi_status = status_at(hi)?;
    if lo_status == CompatStatus::Undecided
        || hi_status == CompatStatus::Undecided
        || lo_status == hi_status
    {
        return Err(Error::InvalidArgument(format!(
            "noise_threshold: endpoints do not bracket (lo {lo_status:?}, hi {hi_status:?})"
        )));
    }
    let mut bracket = ThresholdBracket {
        lo,
        hi,
        lo_status,
        hi_status,
    };
    while bracket.width() > tol {
        // Midpoint first, then golden-ratio probes if it cannot be certified.
        let w = bracket.width();
        let probes = [
            bracket.lo + 0.5 * w,
            bracket.lo + 0.382 * w,
            bracket.lo + 0.618 * w,
        ];
        let mut moved = false;
        for &t in &probes {
            let s = status_at(t)?;
            if s == bracket.lo_status {
                bracket.lo = t;
                moved = true;
                break;
            } else if s == bracket.hi_status {
                bracket.hi = t;
                moved = true;
                break;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(bracket)
}
