//! Observables (finite-outcome POVMs), their embedding into channels, and
//! the measurement-side constructions: classical post-processing, Naimark
//! dilation, and the least disturbing channel.

use num_complex::Complex64;

use crate::error::Error;
use crate::linalg::{self, kron, CMatrix, C_ONE, C_ZERO};
use crate::Result;

use super::{choi_from_kraus, Channel, KrausForm, Picture, CHANNEL_TOL};

/// Finite-outcome POVM on the input space.
///
/// Joint observables over product outcome sets are stored flat with the
/// product structure recorded in `shape` (so a joint `G(x,y)` with `K_M·K_N`
/// outcomes has `shape = [K_M, K_N]` and outcome `(x, y)` at flat index
/// `x·K_N + y`).
#[derive(Debug, Clone)]
pub struct Observable {
    pub outcomes: Vec<i64>,
    pub effects: Vec<CMatrix>,
    pub shape: Vec<usize>,
}

impl Observable {
    pub fn new(effects: Vec<CMatrix>) -> Result<Self> {
        let outcomes = (0..effects.len() as i64).collect();
        let shape = vec![effects.len()];
        let m = Observable {
            outcomes,
            effects,
            shape,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_outcomes(outcomes: Vec<i64>, effects: Vec<CMatrix>) -> Result<Self> {
        if outcomes.len() != effects.len() {
            return Err(Error::InvalidObservable(
                "outcomes and effects must have equal length".into(),
            ));
        }
        let shape = vec![effects.len()];
        let m = Observable {
            outcomes,
            effects,
            shape,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_shape(mut self, shape: Vec<usize>) -> Result<Self> {
        if shape.iter().product::<usize>() != self.effects.len() {
            return Err(Error::InvalidObservable(
                "shape must multiply out to the number of outcomes".into(),
            ));
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.effects.is_empty() {
            return Err(Error::InvalidObservable("no effects".into()));
        }
        let d = self.effects[0].rows;
        let mut sum = CMatrix::zeros(d, d);
        for (k, e) in self.effects.iter().enumerate() {
            if !e.is_square() || e.rows != d {
                return Err(Error::InvalidObservable(format!(
                    "effect {k} has wrong dimensions"
                )));
            }
            if e.hermitian_deviation() > 1e-8 * e.max_abs().max(1.0) {
                return Err(Error::InvalidObservable(format!(
                    "effect {k} is not Hermitian"
                )));
            }
            let min_eig = e.min_eigenvalue();
            if min_eig < -CHANNEL_TOL * e.max_abs().max(1.0) {
                return Err(Error::InvalidObservable(format!(
                    "effect {k} is not PSD (min eigenvalue {min_eig:.3e})"
                )));
            }
            sum = sum.add(e);
        }
        let dev = sum.sub(&CMatrix::identity(d)).max_abs();
        if dev > 1e2 * CHANNEL_TOL {
            return Err(Error::InvalidObservable(format!(
                "effects sum deviates from identity by {dev:.3e}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows
    }

    pub fn num_outcomes(&self) -> usize {
        self.effects.len()
    }

    /// Outcome probability `tr[ϱ M(x)]`.
    pub fn probability(&self, x: usize, rho: &CMatrix) -> f64 {
        self.effects[x].matmul(rho).trace().re
    }

    /// Sharp observable of the computational basis of dimension `d`.
    pub fn sharp_basis(d: usize) -> Observable {
        let effects = (0..d)
            .map(|i| {
                CMatrix::from_fn(d, d, |r, c| if r == i && c == i { C_ONE } else { C_ZERO })
            })
            .collect();
        Observable {
            outcomes: (0..d as i64).collect(),
            effects,
            shape: vec![d],
        }
    }

    /// Two-outcome qubit observable `½(1 ± s·σ)` for a Pauli direction.
    pub fn unsharp_qubit(direction: &CMatrix, sharpness: f64) -> Result<Observable> {
        let id = CMatrix::identity(2);
        let plus = id.add(&direction.scale_re(sharpness)).scale_re(0.5);
        let minus = id.sub(&direction.scale_re(sharpness)).scale_re(0.5);
        Observable::with_outcomes(vec![1, -1], vec![plus, minus])
    }

    /// The trivial observable `M(0) = I` (a coin with one side).
    pub fn trivial(d: usize) -> Observable {
        Observable {
            outcomes: vec![0],
            effects: vec![CMatrix::identity(d)],
            shape: vec![1],
        }
    }

    /// Seeded random POVM: Gaussian Gram effects renormalized by `S^{-1/2}·S^{-1/2}`.
    pub fn random(d: usize, num_outcomes: usize, seed: u64) -> Result<Observable> {
        let raws: Vec<CMatrix> = (0..num_outcomes)
            .map(|k| {
                let g = linalg::random_gaussian(d, d, seed.wrapping_add(k as u64 * 7919));
                g.matmul(&g.dagger()).hermitize()
            })
            .collect();
        Observable::new(renormalize_effects(raws)?)
    }
}

/// Conjugate a family of PSD matrices by `S^{-1/2}` with `S` their sum, so
/// the result sums to the identity exactly (up to roundoff).
pub(crate) fn renormalize_effects(raws: Vec<CMatrix>) -> Result<Vec<CMatrix>> {
    let d = raws[0].rows;
    let mut s = CMatrix::zeros(d, d);
    for r in &raws {
        s = s.add(r);
    }
    let eig = linalg::eigh(&s)?;
    let mut inv_sqrt = CMatrix::zeros(d, d);
    for (k, &lam) in eig.values.iter().enumerate() {
        let w = 1.0 / lam.max(1e-12).sqrt();
        for i in 0..d {
            for j in 0..d {
                let add = eig.vectors.get(i, k) * eig.vectors.get(j, k).conj() * w;
                inv_sqrt.data[i * d + j] += add;
            }
        }
    }
    Ok(raws
        .into_iter()
        .map(|r| inv_sqrt.matmul(&r).matmul(&inv_sqrt).hermitize())
        .collect())
}

/// Measure-and-write channel `Γ*_M(ϱ) = Σ_x tr[ϱ M(x)] |δx⟩⟨δx|`; its Choi is
/// `Σ_x M(x)ᵀ ⊗ |δx⟩⟨δx|`.
pub fn gamma_of_observable(m: &Observable) -> Channel {
    let d = m.dim();
    let k_out = m.num_outcomes();
    let n = d * k_out;
    let mut choi = CMatrix::zeros(n, n);
    for (x, e) in m.effects.iter().enumerate() {
        for i in 0..d {
            for j in 0..d {
                // M(x)ᵀ[i,j] = M(x)[j,i]
                choi.data[(i * k_out + x) * n + (j * k_out + x)] += e.get(j, i);
            }
        }
    }
    Channel::from_parts(d, vec![k_out], choi)
}

/// Effect-wise Heisenberg transformation `Λ(M)(x) = Λ(M(x))`; satisfies
/// `Λ ∘ Γ_M = Γ_{Λ(M)}`.
pub fn transform_observable(c: &Channel, m: &Observable) -> Result<Observable> {
    if m.dim() != c.d_out() {
        return Err(Error::DimensionMismatch(format!(
            "transform_observable: observable dim {} != channel output dim {}",
            m.dim(),
            c.d_out()
        )));
    }
    let effects = m
        .effects
        .iter()
        .map(|e| c.apply(e, Picture::Heisenberg).map(|x| x.hermitize()))
        .collect::<Result<Vec<_>>>()?;
    Ok(Observable {
        outcomes: m.outcomes.clone(),
        effects,
        shape: m.shape.clone(),
    })
}

/// Column-stochastic matrix ν: rows indexed by the target outcome set Ω_N,
/// columns by the source outcome set Ω_M; every column sums to one.
#[derive(Debug, Clone)]
pub struct StochasticMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl StochasticMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::InvalidStochasticMatrix("wrong entry count".into()));
        }
        let nu = StochasticMatrix {
            rows,
            cols,
            entries,
        };
        nu.validate()?;
        Ok(nu)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.iter().any(|&v| v < -1e-10) {
            return Err(Error::InvalidStochasticMatrix(
                "negative entry".into(),
            ));
        }
        for y in 0..self.cols {
            let col_sum: f64 = (0..self.rows).map(|x| self.get(x, y)).sum();
            if (col_sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidStochasticMatrix(format!(
                    "column {y} sums to {col_sum}"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.cols + y]
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        StochasticMatrix {
            rows: n,
            cols: n,
            entries,
        }
    }

    /// Seeded random column-stochastic matrix.
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let g = linalg::random_gaussian(rows, cols, seed);
        let mut entries = vec![0.0; rows * cols];
        for y in 0..cols {
            let mut col: Vec<f64> = (0..rows).map(|x| g.get(x, y).norm_sqr()).collect();
            let s: f64 = col.iter().sum();
            for v in col.iter_mut() {
                *v /= s;
            }
            for (x, v) in col.into_iter().enumerate() {
                entries[x * cols + y] = v;
            }
        }
        StochasticMatrix {
            rows,
            cols,
            entries,
        }
    }

    /// Post-processed observable `N(x) = Σ_y ν_{xy} M(y)`.
    pub fn apply_to(&self, m: &Observable) -> Result<Observable> {
        if m.num_outcomes() != self.cols {
            return Err(Error::DimensionMismatch(
                "stochastic matrix columns must match source outcomes".into(),
            ));
        }
        let d = m.dim();
        let effects = (0..self.rows)
            .map(|x| {
                let mut e = CMatrix::zeros(d, d);
                for y in 0..self.cols {
                    let w = self.get(x, y);
                    if w != 0.0 {
                        e = e.add(&m.effects[y].scale_re(w));
                    }
                }
                e
            })
            .collect();
        Observable::new(effects)
    }

    /// Extract the stochastic action of a channel between outcome spaces:
    /// `ν_{xy} = ⟨δy|Θ(|δx⟩⟨δx|)δy⟩` (Heisenberg Θ on the target basis).
    pub fn from_channel(theta: &Channel) -> Result<StochasticMatrix> {
        let rows = theta.d_out();
        let cols = theta.d_in();
        let mut entries = vec![0.0; rows * cols];
        for x in 0..rows {
            let proj = CMatrix::from_fn(rows, rows, |i, j| {
                if i == x && j == x {
                    C_ONE
                } else {
                    C_ZERO
                }
            });
            let h = theta.apply(&proj, Picture::Heisenberg)?;
            for y in 0..cols {
                entries[x * cols + y] = h.get(y, y).re.max(0.0);
            }
        }
        StochasticMatrix::new(rows, cols, entries)
    }
}

/// Classical post-processing channel with Kraus operators
/// `K_{xy} = √ν_{xy} |δx⟩⟨δy|`; satisfies `Γ_N = Γ_M ∘ Θ` for `N = ν(M)`.
pub fn postprocessing_channel(nu: &StochasticMatrix) -> Channel {
    let mut ops = Vec::new();
    for x in 0..nu.rows {
        for y in 0..nu.cols {
            let w = nu.get(x, y);
            if w <= 0.0 {
                continue;
            }
            let mut k = CMatrix::zeros(nu.rows, nu.cols);
            k.set(x, y, Complex64::new(w.sqrt(), 0.0));
            ops.push(k);
        }
    }
    choi_from_kraus(&KrausForm {
        d_in: nu.cols,
        d_out: nu.rows,
        operators: ops,
    })
}

/// Naimark dilation data: an isometry `K: H_in → H_in ⊗ ℓ²(Ω)` and the sharp
/// observable `M̂(x) = I ⊗ |δx⟩⟨δx|` with `K† M̂(x) K = M(x)`.
#[derive(Debug, Clone)]
pub struct Naimark {
    pub dilation_dim: usize,
    pub sharp: Observable,
    pub isometry: CMatrix,
}

/// Direct-sum Naimark dilation `Kψ = Σ_x (√M(x) ψ) ⊗ δx` together with the
/// least disturbing channel `Λ*_M(ϱ) = Σ_x M̂(x) K ϱ K† M̂(x)`.
pub fn naimark_least_disturbing(m: &Observable) -> Result<(Naimark, Channel)> {
    let d = m.dim();
    let k_out = m.num_outcomes();
    let dil = d * k_out;

    let roots = m
        .effects
        .iter()
        .map(linalg::sqrtm_psd)
        .collect::<Result<Vec<_>>>()?;

    // K[(i,x), j] = √M(x)[i,j] with row index (i, x) = i·K + x.
    let isometry = CMatrix::from_fn(dil, d, |r, j| {
        let (i, x) = (r / k_out, r % k_out);
        roots[x].get(i, j)
    });

    let sharp_effects = (0..k_out)
        .map(|x| {
            let e = CMatrix::from_fn(k_out, k_out, |a, b| {
                if a == x && b == x {
                    C_ONE
                } else {
                    C_ZERO
                }
            });
            kron(&CMatrix::identity(d), &e)
        })
        .collect();
    let sharp = Observable {
        outcomes: m.outcomes.clone(),
        effects: sharp_effects,
        shape: vec![k_out],
    };

    // Kraus operators A_x = M̂(x)K, i.e. A_x ψ = (√M(x) ψ) ⊗ δx.
    let ops: Vec<CMatrix> = (0..k_out)
        .map(|x| {
            CMatrix::from_fn(dil, d, |r, j| {
                let (i, y) = (r / k_out, r % k_out);
                if y == x {
                    roots[x].get(i, j)
                } else {
                    C_ZERO
                }
            })
        })
        .collect();
    let ldc = choi_from_kraus(&KrausForm {
        d_in: d,
        d_out: dil,
        operators: ops,
    })
    .with_out_dims(vec![d, k_out])?;

    Ok((
        Naimark {
            dilation_dim: dil,
            sharp,
            isometry,
        },
        ldc,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{concatenate, identity_channel, random_channel, choi_distance, constant_channel};
    use crate::linalg::{pauli_x, random_state};

    #[test]
    fn gamma_of_trivial_observable_is_constant() {
        let m = Observable::trivial(2);
        let g = gamma_of_observable(&m);
        assert_eq!(g.d_out(), 1);
        let rho = random_state(2, 1);
        let out = g.apply(&rho, Picture::Schrodinger).unwrap();
        assert!((out.get(0, 0) - C_ONE).norm() < 1e-12);
    }

    #[test]
    fn gamma_of_sharp_basis() {
        let m = Observable::sharp_basis(2);
        let g = gamma_of_observable(&m);
        // Choi = Σ_x |x⟩⟨x| ⊗ |δx⟩⟨δx| pattern.
        let mut expected = CMatrix::zeros(4, 4);
        expected.set(0, 0, C_ONE);
        expected.set(3, 3, C_ONE);
        assert!(g.choi().sub(&expected).max_abs() < 1e-14);
        g.validate().unwrap();
    }

    #[test]
    fn gamma_writes_probabilities_into_orthogonal_states() {
        let m = Observable::random(3, 4, 7).unwrap();
        let g = gamma_of_observable(&m);
        let rho = random_state(3, 8);
        let out = g.apply(&rho, Picture::Schrodinger).unwrap();
        for x in 0..4 {
            assert!((out.get(x, x).re - m.probability(x, &rho)).abs() < 1e-10);
            for y in 0..4 {
                if x != y {
                    assert!(out.get(x, y).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn transform_observable_identity_and_constant() {
        let m = Observable::random(2, 3, 9).unwrap();
        let id = identity_channel(2);
        let same = transform_observable(&id, &m).unwrap();
        for (a, b) in same.effects.iter().zip(&m.effects) {
            assert!(a.sub(b).max_abs() < 1e-12);
        }
        let eta = random_state(2, 10);
        let konst = constant_channel(&eta, 2).unwrap();
        let trivialized = transform_observable(&konst, &m).unwrap();
        for (e, orig) in trivialized.effects.iter().zip(&m.effects) {
            let p = eta.matmul(orig).trace().re;
            assert!(e.sub(&CMatrix::identity(2).scale_re(p)).max_abs() < 1e-10);
        }
    }

    #[test]
    fn transform_observable_pauli_channel_on_x() {
        let psi = crate::channel::pauli_channel((0.1, 0.2, 0.15)).unwrap();
        let x_obs = Observable::unsharp_qubit(&pauli_x(), 1.0).unwrap();
        let moved = transform_observable(&psi, &x_obs).unwrap();
        let s = 1.0 - 2.0 * (0.2 + 0.15);
        let expected = Observable::unsharp_qubit(&pauli_x(), s).unwrap();
        for (a, b) in moved.effects.iter().zip(&expected.effects) {
            assert!(a.sub(b).max_abs() < 1e-10);
        }
    }

    #[test]
    fn gamma_transform_consistency() {
        // Λ ∘ Γ_M = Γ_{Λ(M)} as a Choi identity.
        let c = random_channel(2, 3, 2, 11).unwrap();
        let m = Observable::random(3, 3, 12).unwrap();
        let lhs = concatenate(&gamma_of_observable(&m), &c).unwrap();
        let rhs = gamma_of_observable(&transform_observable(&c, &m).unwrap());
        assert!(choi_distance(&lhs, &rhs).unwrap() < 1e-9);
    }

    #[test]
    fn postprocessing_identity_and_collapse() {
        // The identity post-processing is the basis dephasing, which acts as
        // the identity on the classical outcome states Γ_M produces.
        let theta_id = postprocessing_channel(&StochasticMatrix::identity(3));
        let m_any = Observable::random(2, 3, 40).unwrap();
        let gamma = gamma_of_observable(&m_any);
        let same = concatenate(&theta_id, &gamma).unwrap();
        assert!(choi_distance(&same, &gamma).unwrap() < 1e-12);
        let rho_diag = CMatrix::from_fn(3, 3, |i, j| {
            if i == j {
                num_complex::Complex64::new([0.2, 0.3, 0.5][i], 0.0)
            } else {
                C_ZERO
            }
        });
        let out = theta_id.apply(&rho_diag, Picture::Schrodinger).unwrap();
        assert!(out.sub(&rho_diag).max_abs() < 1e-12);

        // All mass to outcome 0 trivializes the observable channel.
        let collapse = StochasticMatrix::new(2, 3, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        let theta = postprocessing_channel(&collapse);
        let m = Observable::random(2, 3, 13).unwrap();
        let gamma_n = concatenate(&theta, &gamma_of_observable(&m)).unwrap();
        let trivial_like = gamma_of_observable(
            &collapse.apply_to(&m).unwrap(),
        );
        assert!(choi_distance(&gamma_n, &trivial_like).unwrap() < 1e-10);
    }

    #[test]
    fn postprocessing_matches_effect_arithmetic() {
        let m = Observable::random(3, 4, 14).unwrap();
        let nu = StochasticMatrix::random(3, 4, 15);
        let n = nu.apply_to(&m).unwrap();
        // Γ_N = Θ* ∘ Γ*_M in the Schrödinger picture.
        let theta = postprocessing_channel(&nu);
        let gamma_n = concatenate(&theta, &gamma_of_observable(&m)).unwrap();
        assert!(choi_distance(&gamma_n, &gamma_of_observable(&n)).unwrap() < 1e-9);
        // Reverse extraction reproduces ν.
        let back = StochasticMatrix::from_channel(&theta).unwrap();
        for x in 0..3 {
            for y in 0..4 {
                assert!((back.get(x, y) - nu.get(x, y)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn naimark_dilation_contracts() {
        let m = Observable::random(2, 3, 16).unwrap();
        let (nai, ldc) = naimark_least_disturbing(&m).unwrap();
        assert_eq!(nai.dilation_dim, 6);
        let k = &nai.isometry;
        assert!(k.dagger().matmul(k).sub(&CMatrix::identity(2)).max_abs() < 1e-9);
        for (x, e) in m.effects.iter().enumerate() {
            let pulled = k.dagger().matmul(&nai.sharp.effects[x]).matmul(k);
            assert!(pulled.sub(e).max_abs() < 1e-9);
        }
        ldc.validate().unwrap();
        // Instrument probability reproduction: tr over the pointer row blocks.
        let rho = random_state(2, 17);
        let out = ldc.apply(&rho, Picture::Schrodinger).unwrap();
        for x in 0..3 {
            let mut p = 0.0;
            for i in 0..2 {
                p += out.get(i * 3 + x, i * 3 + x).re;
            }
            assert!((p - m.probability(x, &rho)).abs() < 1e-9);
        }
    }

    #[test]
    fn least_disturbing_channel_of_trivial_observable_is_isometric() {
        let m = Observable::trivial(2);
        let (_, ldc) = naimark_least_disturbing(&m).unwrap();
        // Nothing measured, nothing disturbed: ϱ ↦ ϱ ⊗ |δ0⟩⟨δ0|.
        let rho = random_state(2, 18);
        let out = ldc.apply(&rho, Picture::Schrodinger).unwrap();
        let expected = kron(&rho, &CMatrix::identity(1));
        assert!(out.sub(&expected).max_abs() < 1e-10);
    }

    #[test]
    fn lueders_map_for_sharp_observable() {
        let m = Observable::sharp_basis(2);
        let (_, ldc) = naimark_least_disturbing(&m).unwrap();
        let rho = random_state(2, 19);
        let out = ldc.apply(&rho, Picture::Schrodinger).unwrap();
        // Embedded Lüders output: Σ_x (P_x ϱ P_x) ⊗ |δx⟩⟨δx|.
        for x in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let got = out.get(i * 2 + x, j * 2 + x);
                    let expected = if i == x && j == x {
                        rho.get(x, x)
                    } else {
                        C_ZERO
                    };
                    assert!((got - expected).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn random_observable_is_valid() {
        for seed in 0..5 {
            Observable::random(3, 4, seed).unwrap().validate().unwrap();
        }
    }
}
