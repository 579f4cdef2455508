//! Lowest-eigenpair solver: Lanczos with full reorthogonalization and
//! deflated restarts, with a dense fallback for small dimensions.
//!
//! The same code path runs in f64 for real-symmetric Hamiltonians and in
//! Complex64 for Hermitian ones; [`lowest_eigenpairs`] dispatches on the
//! storage class of the assembled matrix. A Gershgorin bound supplies both
//! the residual scale and a spectral shift that keeps the low end extremal.

use crate::hamiltonian::{self, BasisDim, HamError};
use crate::linalg::eigh_real;
use crate::modes::{BiasState, ModeSystem};
use crate::sparse::SparseMatrix;
use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("eigensolver stalled: {got} of {want} pairs converged after {restarts} restarts")]
    Stalled { got: usize, want: usize, restarts: usize },
    #[error("linear algebra backend: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
    #[error(transparent)]
    Hamiltonian(#[from] HamError),
    #[error("truncation not converged after {rounds} rounds (last shift {last:.3e} GHz)")]
    TruncationDiverged { rounds: usize, last: f64 },
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Number of lowest eigenpairs wanted.
    pub n_eig: usize,
    /// Residual tolerance relative to the Gershgorin spectral scale.
    pub tol: f64,
    /// Krylov-space cap per run.
    pub max_iter: usize,
    /// Below this dimension the dense eigensolver runs instead.
    pub dense_cutoff: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { n_eig: 6, tol: 1e-10, max_iter: 600, dense_cutoff: 512, seed: 0x6a_6a_73_69 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Ascending eigenvalues, length n_eig.
    pub values: Vec<f64>,
    /// Matching orthonormal vectors (always complex storage).
    pub vectors: Vec<Vec<Complex64>>,
    /// Total matrix applications spent.
    pub matvecs: usize,
}

/// Scalar the Lanczos recurrence is generic over.
pub trait Field:
    Copy
    + Default
    + Send
    + Sync
    + std::fmt::Debug
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::iter::Sum<Self>
{
    fn from_re(x: f64) -> Self;
    fn conj_(self) -> Self;
    fn abs_sqr(self) -> f64;
    fn scale(self, s: f64) -> Self;
    fn to_c64(self) -> Complex64;
    fn sample<R: Rng>(rng: &mut R) -> Self;
}

impl Field for f64 {
    fn from_re(x: f64) -> Self {
        x
    }
    fn conj_(self) -> Self {
        self
    }
    fn abs_sqr(self) -> f64 {
        self * self
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn sample<R: Rng>(rng: &mut R) -> Self {
        rng.gen::<f64>() * 2.0 - 1.0
    }
}

impl Field for Complex64 {
    fn from_re(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj_(self) -> Self {
        self.conj()
    }
    fn abs_sqr(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn to_c64(self) -> Complex64 {
        self
    }
    fn sample<R: Rng>(rng: &mut R) -> Self {
        Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0)
    }
}

fn dot<T: Field>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).map(|(&a, &b)| a.conj_() * b).sum()
}

fn norm<T: Field>(v: &[T]) -> f64 {
    v.iter().map(|x| x.abs_sqr()).sum::<f64>().sqrt()
}

/// w -= Σ_j ⟨basis_j, w⟩ basis_j (classical Gram–Schmidt, one sweep).
fn project_out<T: Field>(w: &mut [T], basis: &[Vec<T>]) {
    for b in basis {
        let c = dot(b, w);
        for (wi, &bi) in w.iter_mut().zip(b) {
            *wi = *wi - c * bi;
        }
    }
}

struct LanczosRun<T> {
    /// (eigenvalue, vector) pairs whose residual passed the tolerance,
    /// lowest-first contiguous prefix of the Ritz spectrum.
    pairs: Vec<(f64, Vec<T>)>,
    matvecs: usize,
}

/// One Lanczos pass against `apply`, orthogonalized against `deflate`.
fn lanczos_run<T: Field>(
    dim: usize,
    apply: &dyn Fn(&[T], &mut [T]),
    deflate: &[Vec<T>],
    want: usize,
    tol_abs: f64,
    max_iter: usize,
    rng: &mut ChaCha8Rng,
) -> LanczosRun<T> {
    let mmax = max_iter.min(dim.saturating_sub(deflate.len()).max(1));
    let mut vs: Vec<Vec<T>> = Vec::with_capacity(mmax);
    let mut alphas: Vec<f64> = Vec::with_capacity(mmax);
    let mut betas: Vec<f64> = Vec::with_capacity(mmax);
    let mut matvecs = 0usize;

    let mut v0: Vec<T> = (0..dim).map(|_| T::sample(rng)).collect();
    project_out(&mut v0, deflate);
    let n0 = norm(&v0);
    if n0 < 1e-12 {
        return LanczosRun { pairs: Vec::new(), matvecs };
    }
    for x in v0.iter_mut() {
        *x = x.scale(1.0 / n0);
    }
    vs.push(v0);

    let mut w = vec![T::default(); dim];
    let mut exhausted = false;
    loop {
        let m = vs.len();
        apply(&vs[m - 1], &mut w);
        matvecs += 1;
        let alpha = dot(&vs[m - 1], &w).to_c64().re;
        alphas.push(alpha);
        // full reorthogonalization, two sweeps, including deflated vectors
        project_out(&mut w, &vs);
        project_out(&mut w, deflate);
        project_out(&mut w, &vs);
        let beta = norm(&w);

        let at_cap = m >= mmax;
        let invariant = beta < 1e-13 * (1.0 + alpha.abs());
        // Ritz check: every few steps, at the cap, or on breakdown.
        if at_cap || invariant || m % 10 == 0 {
            let (vals, svecs) = tridiag_eig(&alphas, &betas);
            let mut accept = 0usize;
            for i in 0..m {
                let resid = if invariant { 0.0 } else { beta * svecs[[m - 1, i]].abs() };
                if resid <= tol_abs {
                    accept += 1;
                    if accept >= want {
                        break;
                    }
                } else {
                    break;
                }
            }
            if accept >= want || at_cap || invariant {
                let take = accept.min(want);
                let mut pairs = Vec::with_capacity(take);
                for i in 0..take {
                    let mut y = vec![T::default(); dim];
                    for (j, vj) in vs.iter().enumerate() {
                        let s = svecs[[j, i]];
                        for (yk, &vk) in y.iter_mut().zip(vj) {
                            *yk = *yk + vk.scale(s);
                        }
                    }
                    let ny = norm(&y);
                    if ny > 1e-8 {
                        for x in y.iter_mut() {
                            *x = x.scale(1.0 / ny);
                        }
                        pairs.push((vals[i], y));
                    }
                }
                return LanczosRun { pairs, matvecs };
            }
            if exhausted {
                return LanczosRun { pairs: Vec::new(), matvecs };
            }
        }
        if invariant {
            exhausted = true;
            continue;
        }
        betas.push(beta);
        let mut v_next = w.clone();
        for x in v_next.iter_mut() {
            *x = x.scale(1.0 / beta);
        }
        vs.push(v_next);
    }
}

/// Dense eigensolve of the symmetric tridiagonal (alphas, betas).
fn tridiag_eig(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, Array2<f64>) {
    let m = alphas.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        t[[i, i]] = alphas[i];
        if i + 1 < m {
            t[[i, i + 1]] = betas[i];
            t[[i + 1, i]] = betas[i];
        }
    }
    let (vals, vecs) = eigh_real(&t).expect("tridiagonal eigensolve");
    (vals.to_vec(), vecs)
}

/// Deterministic phase: rotate so the largest-magnitude component is
/// real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0usize;
    let mut mag = 0.0f64;
    for (i, x) in v.iter().enumerate() {
        let m = x.norm_sqr();
        if m > mag + 1e-300 {
            mag = m;
            best = i;
        }
    }
    let a = v[best];
    if a.norm() == 0.0 {
        return;
    }
    let phase = a / a.norm();
    let rot = phase.conj();
    for x in v.iter_mut() {
        *x *= rot;
    }
}

fn sparse_lowest<T: Field>(
    dim: usize,
    apply: &dyn Fn(&[T], &mut [T]),
    shift: f64,
    opts: &SolveOptions,
) -> Result<(Vec<f64>, Vec<Vec<T>>, usize), SolveError> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut values: Vec<f64> = Vec::new();
    let mut vectors: Vec<Vec<T>> = Vec::new();
    let mut matvecs = 0usize;
    let tol_abs = opts.tol * shift.abs().max(1.0);

    let max_restarts = opts.n_eig + 3;
    for restart in 0..=max_restarts {
        if values.len() >= opts.n_eig {
            break;
        }
        if restart == max_restarts {
            return Err(SolveError::Stalled {
                got: values.len(),
                want: opts.n_eig,
                restarts: restart,
            });
        }
        let need = opts.n_eig - values.len();
        let run = lanczos_run(dim, apply, &vectors, need, tol_abs, opts.max_iter, &mut rng);
        matvecs += run.matvecs;
        for (val, mut vec) in run.pairs {
            // guard orthogonality against everything accepted so far
            project_out(&mut vec, &vectors);
            let n = norm(&vec);
            if n < 0.5 {
                continue; // rediscovered an accepted state; restart hunts on
            }
            for x in vec.iter_mut() {
                *x = x.scale(1.0 / n);
            }
            values.push(val);
            vectors.push(vec);
        }
    }

    // Deflated restarts can land later pairs below earlier ones; sort together.
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let values = order.iter().map(|&i| values[i]).collect::<Vec<_>>();
    let mut tagged: Vec<(usize, Vec<T>)> = vectors.into_iter().enumerate().collect();
    tagged.sort_by_key(|(i, _)| order.iter().position(|&o| o == *i).unwrap());
    let vectors = tagged.into_iter().map(|(_, v)| v).collect();
    Ok((values, vectors, matvecs))
}

/// Lowest `opts.n_eig` eigenpairs of a Hermitian sparse matrix.
pub fn lowest_eigenpairs(h: &SparseMatrix, opts: &SolveOptions) -> Result<EigenSolution, SolveError> {
    let dim = h.dim();
    let n_eig = opts.n_eig.min(dim);
    if dim <= opts.dense_cutoff {
        return dense_lowest(h, n_eig);
    }
    let (glo, ghi) = h.gershgorin();
    let shift = ghi.max(glo.abs());
    let opts = SolveOptions { n_eig, ..opts.clone() };

    match h {
        SparseMatrix::Real(csr) => {
            let apply = |x: &[f64], y: &mut [f64]| {
                csr.matvec(x, y);
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi -= shift * xi;
                }
            };
            let (vals, vecs, matvecs) = sparse_lowest(dim, &apply, shift, &opts)?;
            let vectors = vecs
                .into_iter()
                .map(|v| {
                    let mut c: Vec<Complex64> = v.into_iter().map(Field::to_c64).collect();
                    fix_phase(&mut c);
                    c
                })
                .collect();
            Ok(EigenSolution {
                values: vals.into_iter().map(|x| x + shift).collect(),
                vectors,
                matvecs,
            })
        }
        SparseMatrix::Complex(csr) => {
            let apply = |x: &[Complex64], y: &mut [Complex64]| {
                csr.matvec(x, y);
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi -= *xi * shift;
                }
            };
            let (vals, mut vecs, matvecs) = sparse_lowest(dim, &apply, shift, &opts)?;
            for v in vecs.iter_mut() {
                fix_phase(v);
            }
            Ok(EigenSolution {
                values: vals.into_iter().map(|x| x + shift).collect(),
                vectors: vecs,
                matvecs,
            })
        }
    }
}

fn dense_lowest(h: &SparseMatrix, n_eig: usize) -> Result<EigenSolution, SolveError> {
    let a = h.to_dense_complex();
    let (vals, vecs) = crate::linalg::eigh_complex(&a)?;
    let mut values = Vec::with_capacity(n_eig);
    let mut vectors = Vec::with_capacity(n_eig);
    for i in 0..n_eig {
        values.push(vals[i]);
        let mut v: Vec<Complex64> = vecs.column(i).to_vec();
        fix_phase(&mut v);
        vectors.push(v);
    }
    Ok(EigenSolution { values, vectors, matvecs: 0 })
}

/// One growth step of the truncation ladder: oscillators ν → ⌈3ν/2⌉,
/// charge cutoffs q → q+2.
pub fn grow_dims(dims: &[BasisDim]) -> Vec<BasisDim> {
    dims.iter()
        .map(|d| match *d {
            BasisDim::Levels(nu) => BasisDim::Levels(((3 * nu) + 1) / 2),
            BasisDim::Charge(q) => BasisDim::Charge(q + 2),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TruncationStep {
    pub dims: Vec<BasisDim>,
    pub hilbert_dim: usize,
    /// Absolute energies, ascending, length n_eig.
    pub energies: Vec<f64>,
    /// Max shift of the relative spectrum vs the previous step (GHz);
    /// infinite on the first step.
    pub max_shift: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceRun {
    pub steps: Vec<TruncationStep>,
    pub converged: bool,
}

impl ConvergenceRun {
    pub fn final_step(&self) -> &TruncationStep {
        self.steps.last().expect("at least one step")
    }
}

/// Grow all mode truncations together until the relative spectrum
/// (E_i − E_0 for i < n_eig) moves less than `tol_ghz` in one step.
pub fn converge_truncation(
    ms: &ModeSystem,
    bias: &BiasState,
    start: &[BasisDim],
    tol_ghz: f64,
    max_rounds: usize,
    opts: &SolveOptions,
) -> Result<ConvergenceRun, SolveError> {
    let mut dims = start.to_vec();
    let mut steps: Vec<TruncationStep> = Vec::new();
    for _ in 0..max_rounds {
        let bases = hamiltonian::mode_bases(ms, bias, &dims)?;
        let h = hamiltonian::assemble(&bases, &hamiltonian::circuit_terms(ms, bias))?;
        let sol = lowest_eigenpairs(&h, opts)?;
        let max_shift = match steps.last() {
            None => f64::INFINITY,
            Some(prev) => {
                let n = prev.energies.len().min(sol.values.len());
                (1..n)
                    .map(|i| {
                        let now = sol.values[i] - sol.values[0];
                        let was = prev.energies[i] - prev.energies[0];
                        (now - was).abs()
                    })
                    .fold(0.0, f64::max)
            }
        };
        steps.push(TruncationStep {
            dims: dims.clone(),
            hilbert_dim: hamiltonian::hilbert_dim(&bases)?,
            energies: sol.values,
            max_shift,
        });
        if max_shift <= tol_ghz {
            return Ok(ConvergenceRun { steps, converged: true });
        }
        dims = grow_dims(&dims);
    }
    let last = steps.last().map(|s| s.max_shift).unwrap_or(f64::INFINITY);
    Err(SolveError::TruncationDiverged { rounds: max_rounds, last })
}
