//! Hamiltonian term construction and sparse tensor assembly.
//!
//! A [`Term`] is a scalar coefficient times a product of single-mode
//! [`Factor`]s; everything else is an implicit identity. Term lists are
//! truncation-independent — matrices materialize only in [`assemble`], where
//! each factor is rendered in its mode's basis and the Kronecker structure
//! is walked directly into triplets.
//!
//! Biases enter in two places, both fixed at term-build time:
//! * flux displacements are pre-compensated: oscillator quadratics stay
//!   centered and each junction cosine absorbs a static phase offset;
//! * charge offsets ride on the charge operators, (Q̂ − ΔQ), on island and
//!   Josephson modes.
//!
//! Internally every oscillator factor is conjugated by diag(i^{−n}) — a
//! gauge in which charge operators and displacements are real and flux
//! operators purely imaginary. Products of two flux factors are then real
//! again, so whenever every junction phase offset is 0 or π the whole
//! Hamiltonian assembles real and the eigensolver runs in f64.

use crate::modes::{ModeKind, ModeSystem, BiasState};
use crate::operators;
use crate::sparse::SparseMatrix;
use crate::units::{CHARGE_E, FLUX_E};
use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Hard cap on the assembled Hilbert-space dimension.
pub const MAX_DIM: usize = 1 << 26;

/// Couplings below this fraction of the largest diagonal entry are noise
/// from the transform inversion, not physics; they are dropped.
const COUPLING_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum HamError {
    #[error("hilbert space dimension {0} exceeds the {MAX_DIM} cap")]
    Dimension(usize),
    #[error("mode `{0}` is an oscillator and takes a level count, not a charge cutoff")]
    WantLevels(String),
    #[error("mode `{0}` is a charge mode and takes a charge cutoff, not a level count")]
    WantCharge(String),
    #[error("basis spec has {got} entries for {want} modes")]
    BasisCount { got: usize, want: usize },
}

/// Per-mode truncation request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BasisDim {
    /// Number-basis levels for an oscillator.
    Levels(usize),
    /// Charge cutoff q_max for an island/Josephson mode (dim = 2q_max+1).
    Charge(usize),
}

/// A mode with its basis fully specified.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub name: String,
    pub kind: ModeKind,
    pub dim: usize,
    /// Oscillator impedance (dimensionless); 0 for charge modes.
    pub z: f64,
    /// Charge cutoff; 0 for oscillators.
    pub q_max: usize,
    /// Static charge offset in 2e.
    pub dq: f64,
    /// Static flux displacement in Φ₀ (oscillators; reporting only).
    pub dphi: f64,
}

/// Single-mode operator in a product term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Factor {
    /// Q̂ − ΔQ.
    OffsetCharge,
    /// Exact projection of (Q̂ − ΔQ)².
    ChargeSq,
    /// Φ̂ (oscillator only).
    Flux,
    /// Exact projection of Φ̂².
    FluxSq,
    /// e^{i·2π·a·Φ̂} on an oscillator; the payload is a.
    Displace(f64),
    /// e^{i·n·φ̂} on a charge mode.
    JumpExp(i64),
}

#[derive(Debug, Clone, Serialize)]
pub struct Term {
    pub coeff: Complex64,
    /// (mode index, factor), ascending in mode index.
    pub factors: Vec<(usize, Factor)>,
    pub label: String,
}

impl std::fmt::Display for Term {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:+.6e}", self.coeff.re)?;
        if self.coeff.im.abs() > 0.0 {
            write!(f, "{:+.6e}i", self.coeff.im)?;
        }
        for (m, fac) in &self.factors {
            match fac {
                Factor::OffsetCharge => write!(f, " · Q[{m}]")?,
                Factor::ChargeSq => write!(f, " · Q²[{m}]")?,
                Factor::Flux => write!(f, " · Φ[{m}]")?,
                Factor::FluxSq => write!(f, " · Φ²[{m}]")?,
                Factor::Displace(a) => write!(f, " · D[{m}]({a:+.4})")?,
                Factor::JumpExp(n) => write!(f, " · E[{m}]({n:+})")?,
            }
        }
        write!(f, "   # {}", self.label)
    }
}

/// Resolve truncation requests against the mode system.
pub fn mode_bases(
    ms: &ModeSystem,
    bias: &BiasState,
    dims: &[BasisDim],
) -> Result<Vec<ModeBasis>, HamError> {
    let n = ms.transform.n_modes();
    if dims.len() != n {
        return Err(HamError::BasisCount { got: dims.len(), want: n });
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let kind = ms.transform.kinds[i];
        let name = ms.transform.names[i].clone();
        let basis = match (kind, dims[i]) {
            (ModeKind::Oscillator, BasisDim::Levels(nu)) => ModeBasis {
                name,
                kind,
                dim: nu.max(1),
                z: ms.impedance[i].expect("oscillator has impedance"),
                q_max: 0,
                dq: 0.0,
                dphi: bias.dphi[i],
            },
            (ModeKind::Island | ModeKind::Josephson, BasisDim::Charge(qm)) => ModeBasis {
                name,
                kind,
                dim: 2 * qm + 1,
                z: 0.0,
                q_max: qm,
                dq: bias.dq[i],
                dphi: 0.0,
            },
            (ModeKind::Oscillator, BasisDim::Charge(_)) => {
                return Err(HamError::WantLevels(name))
            }
            (_, BasisDim::Levels(_)) => return Err(HamError::WantCharge(name)),
        };
        out.push(basis);
    }
    Ok(out)
}

pub fn hilbert_dim(bases: &[ModeBasis]) -> Result<usize, HamError> {
    let mut dim = 1usize;
    for b in bases {
        dim = dim.checked_mul(b.dim).ok_or(HamError::Dimension(usize::MAX))?;
        if dim > MAX_DIM {
            return Err(HamError::Dimension(dim));
        }
    }
    Ok(dim)
}

/// Build the full circuit term list: charge quadratics over all mode pairs,
/// flux quadratics over oscillator pairs, one cosine pair seed per junction.
/// Truncation-independent.
pub fn circuit_terms(ms: &ModeSystem, bias: &BiasState) -> Vec<Term> {
    let n = ms.transform.n_modes();
    let names = &ms.transform.names;
    let mut terms = Vec::new();

    let diag_scale = (0..n)
        .map(|i| (CHARGE_E * ms.c_inv[[i, i]]).abs().max(FLUX_E * ms.l_inv[[i, i]].abs()))
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);

    for a in 0..n {
        let coeff = 0.5 * CHARGE_E * ms.c_inv[[a, a]];
        if coeff.abs() > COUPLING_EPS * diag_scale {
            terms.push(Term {
                coeff: Complex64::new(coeff, 0.0),
                factors: vec![(a, Factor::ChargeSq)],
                label: format!("charging {}", names[a]),
            });
        }
        for b in a + 1..n {
            let coeff = CHARGE_E * ms.c_inv[[a, b]];
            if coeff.abs() > COUPLING_EPS * diag_scale {
                terms.push(Term {
                    coeff: Complex64::new(coeff, 0.0),
                    factors: vec![(a, Factor::OffsetCharge), (b, Factor::OffsetCharge)],
                    label: format!("charge coupling {}·{}", names[a], names[b]),
                });
            }
        }
    }

    let osc = ms.transform.indices_of(ModeKind::Oscillator);
    for (ka, &a) in osc.iter().enumerate() {
        let coeff = 0.5 * FLUX_E * ms.l_inv[[a, a]];
        if coeff.abs() > COUPLING_EPS * diag_scale {
            terms.push(Term {
                coeff: Complex64::new(coeff, 0.0),
                factors: vec![(a, Factor::FluxSq)],
                label: format!("inductive {}", names[a]),
            });
        }
        for &b in osc.iter().skip(ka + 1) {
            let coeff = FLUX_E * ms.l_inv[[a, b]];
            if coeff.abs() > COUPLING_EPS * diag_scale {
                terms.push(Term {
                    coeff: Complex64::new(coeff, 0.0),
                    factors: vec![(a, Factor::Flux), (b, Factor::Flux)],
                    label: format!("inductive coupling {}·{}", names[a], names[b]),
                });
            }
        }
    }

    let jos = ms.transform.indices_of(ModeKind::Josephson);
    for (ji, j) in ms.junctions.iter().enumerate() {
        let mut factors: Vec<(usize, Factor)> = Vec::new();
        let a_scale = j.osc.iter().fold(0.0f64, |m, &x| m.max(x.abs())).max(1.0);
        for (k, &a) in osc.iter().enumerate() {
            if j.osc[k].abs() > 1e-12 * a_scale {
                factors.push((a, Factor::Displace(j.osc[k])));
            }
        }
        for (k, &m) in jos.iter().enumerate() {
            if j.jos[k] != 0 {
                factors.push((m, Factor::JumpExp(j.jos[k])));
            }
        }
        factors.sort_by_key(|&(m, _)| m);
        // −E_J·e^{iΔφ}·Πfactors; Hermitian assembly supplies the +h.c. and
        // the overall ½, leaving −E_J cos(2πΣaΦ̂ + Σnφ̂ + Δφ).
        let phase = Complex64::new(0.0, bias.junction_phase[ji]).exp();
        terms.push(Term {
            coeff: -j.e_j * phase,
            factors,
            label: format!("junction {}", j.branch),
        });
    }

    terms
}

fn ipow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Conjugate an oscillator operator by diag(i^{−n}).
fn gauge(m: &Array2<Complex64>) -> Array2<Complex64> {
    let n = m.nrows();
    let mut out = m.clone();
    for r in 0..n {
        for c in 0..n {
            out[[r, c]] *= ipow(c as i64 - r as i64);
        }
    }
    out
}

/// Render one factor in its mode's (gauged) basis.
pub fn factor_matrix(basis: &ModeBasis, factor: &Factor) -> Array2<Complex64> {
    let dim = basis.dim;
    match (basis.kind, factor) {
        (ModeKind::Oscillator, Factor::OffsetCharge) => gauge(&operators::osc_charge(dim, basis.z)),
        (ModeKind::Oscillator, Factor::ChargeSq) => gauge(&operators::osc_charge_sq(dim, basis.z)),
        (ModeKind::Oscillator, Factor::Flux) => gauge(&operators::osc_flux(dim, basis.z)),
        (ModeKind::Oscillator, Factor::FluxSq) => gauge(&operators::osc_flux_sq(dim, basis.z)),
        (ModeKind::Oscillator, Factor::Displace(a)) => {
            gauge(&operators::displacement(dim, basis.z, a * PI.sqrt()))
        }
        (_, Factor::OffsetCharge) => {
            let mut m = operators::per_charge(basis.q_max).as_ref().clone();
            for k in 0..dim {
                m[[k, k]] -= basis.dq;
            }
            m
        }
        (_, Factor::ChargeSq) => {
            let mut m = Array2::zeros((dim, dim));
            for k in 0..dim {
                let q = basis.q_max as f64 - k as f64 - basis.dq;
                m[[k, k]] = Complex64::new(q * q, 0.0);
            }
            m
        }
        (_, Factor::JumpExp(n)) => operators::phase_exp(basis.q_max, *n).as_ref().clone(),
        (k, f) => panic!("factor {f:?} undefined for mode kind {k:?}"),
    }
}

/// Row-major strides: mode 0 is the slowest axis.
pub fn strides(bases: &[ModeBasis]) -> Vec<usize> {
    let n = bases.len();
    let mut s = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        s[i] = s[i + 1] * bases[i + 1].dim;
    }
    s
}

fn nonzeros(m: &Array2<Complex64>) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[[r, c]];
            if v.norm_sqr() > 0.0 {
                out.push((r, c, v));
            }
        }
    }
    out
}

/// Offsets of the identity (non-factor) modes: all Σ index·stride values.
fn identity_offsets(bases: &[ModeBasis], strides: &[usize], skip: &[usize]) -> Vec<usize> {
    let mut offs = vec![0usize];
    for (i, b) in bases.iter().enumerate() {
        if skip.contains(&i) {
            continue;
        }
        let mut next = Vec::with_capacity(offs.len() * b.dim);
        for k in 0..b.dim {
            let add = k * strides[i];
            next.extend(offs.iter().map(|&o| o + add));
        }
        offs = next;
    }
    offs
}

/// Emit one term's triplets.
fn emit_term(
    bases: &[ModeBasis],
    strides: &[usize],
    term: &Term,
    out: &mut Vec<(usize, usize, Complex64)>,
) {
    let fmodes: Vec<usize> = term.factors.iter().map(|&(m, _)| m).collect();
    let fnz: Vec<Vec<(usize, usize, Complex64)>> = term
        .factors
        .iter()
        .map(|(m, f)| nonzeros(&factor_matrix(&bases[*m], f)))
        .collect();
    if fnz.iter().any(|v| v.is_empty()) {
        return;
    }
    let offs = identity_offsets(bases, strides, &fmodes);

    let k = fnz.len();
    let mut idx = vec![0usize; k];
    loop {
        let mut base_r = 0usize;
        let mut base_c = 0usize;
        let mut v = term.coeff;
        for (f, &i) in idx.iter().enumerate() {
            let (r, c, x) = fnz[f][i];
            base_r += r * strides[fmodes[f]];
            base_c += c * strides[fmodes[f]];
            v *= x;
        }
        if v.norm_sqr() > 0.0 {
            out.reserve(offs.len());
            for &o in &offs {
                out.push((base_r + o, base_c + o, v));
            }
        }
        // odometer
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < fnz[pos].len() {
                break;
            }
            idx[pos] = 0;
        }
    }
}

/// Assemble the Hermitian Hamiltonian (H + H†)/2 from terms.
pub fn assemble(bases: &[ModeBasis], terms: &[Term]) -> Result<SparseMatrix, HamError> {
    let dim = hilbert_dim(bases)?;
    let s = strides(bases);
    let mut trips = Vec::new();
    for t in terms {
        emit_term(bases, &s, t, &mut trips);
    }
    Ok(SparseMatrix::hermitian_from_triplets(dim, trips))
}

/// Assemble a bare operator product (no Hermitian symmetrization).
pub fn assemble_operator(
    bases: &[ModeBasis],
    factors: &[(usize, Factor)],
) -> Result<SparseMatrix, HamError> {
    let dim = hilbert_dim(bases)?;
    let term = Term {
        coeff: Complex64::new(1.0, 0.0),
        factors: factors.to_vec(),
        label: String::new(),
    };
    let mut trips = Vec::new();
    emit_term(bases, &strides(bases), &term, &mut trips);
    Ok(SparseMatrix::from_triplets(dim, trips))
}

/// ⟨ψ|A|ψ⟩, real part (exact for Hermitian A).
pub fn expectation(a: &SparseMatrix, psi: &[Complex64]) -> f64 {
    let mut y = vec![Complex64::new(0.0, 0.0); psi.len()];
    a.matvec(psi, &mut y);
    psi.iter().zip(&y).map(|(p, q)| (p.conj() * q).re).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::analyze;
    use crate::netlist::parse_netlist;
    use crate::units::{mode_frequency_ghz, CHARGE_E};
    use approx::assert_abs_diff_eq;
    use ndarray_linalg::Eigh;

    fn eigs_dense(h: &SparseMatrix) -> Vec<f64> {
        let a = h.to_dense_complex();
        let (vals, _) = a.eigh(ndarray_linalg::UPLO::Lower).unwrap();
        vals.to_vec()
    }

    #[test]
    fn lc_oscillator_is_exactly_harmonic() {
        let c = parse_netlist("ind L1 1 0 500\ncap C1 1 0 50\n").unwrap();
        let (t, ms) = analyze(&c).unwrap();
        let bias = crate::modes::bias_state(&c, &t, &ms);
        let bases = mode_bases(&ms, &bias, &[BasisDim::Levels(8)]).unwrap();
        let terms = circuit_terms(&ms, &bias);
        assert_eq!(terms.len(), 2);
        let h = assemble(&bases, &terms).unwrap();
        // With the matched impedance the ladder is exactly diagonal:
        // E_n = f·(n + ½), including the truncation edge.
        assert!(h.is_real());
        let f = mode_frequency_ghz(ms.c_inv[[0, 0]], ms.l_inv[[0, 0]]);
        let e = eigs_dense(&h);
        for (n, &en) in e.iter().enumerate() {
            assert_abs_diff_eq!(en, f * (n as f64 + 0.5), epsilon = 1e-9 * f);
        }
    }

    #[test]
    fn transmon_matches_hand_built_charge_matrix() {
        let net = "jj J1 1 0 18 cj=70\nqoff 1 0.3\n";
        let c = parse_netlist(net).unwrap();
        let (t, ms) = analyze(&c).unwrap();
        let bias = crate::modes::bias_state(&c, &t, &ms);
        let qm = 12;
        let bases = mode_bases(&ms, &bias, &[BasisDim::Charge(qm)]).unwrap();
        let terms = circuit_terms(&ms, &bias);
        let h = assemble(&bases, &terms).unwrap().to_dense_complex();

        // Independent construction: 4E_C(q−nq)² diagonal, −E_J/2 one-off.
        let dim = 2 * qm + 1;
        let ec4 = 0.5 * CHARGE_E / 70.0; // ½·(2e)²/C in GHz
        let mut want: Array2<Complex64> = Array2::zeros((dim, dim));
        for k in 0..dim {
            let q = qm as f64 - k as f64 - 0.3;
            want[[k, k]] = Complex64::new(ec4 * q * q, 0.0);
            if k + 1 < dim {
                want[[k, k + 1]] = Complex64::new(-9.0, 0.0);
                want[[k + 1, k]] = Complex64::new(-9.0, 0.0);
            }
        }
        let worst = h
            .iter()
            .zip(want.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-12, "matrix mismatch {worst}");
    }

    #[test]
    fn transmon_limit_frequency() {
        // Deep transmon: E01 ≈ √(8·E_C·E_J) − E_C within a couple percent.
        let net = "jj J1 1 0 25 cj=97\n";
        let c = parse_netlist(net).unwrap();
        let (t, ms) = analyze(&c).unwrap();
        let bias = crate::modes::bias_state(&c, &t, &ms);
        let bases = mode_bases(&ms, &bias, &[BasisDim::Charge(18)]).unwrap();
        let h = assemble(&bases, &circuit_terms(&ms, &bias)).unwrap();
        let e = eigs_dense(&h);
        let ec = CHARGE_E / 8.0 / 97.0; // e²/2C in GHz
        let e01 = e[1] - e[0];
        let approx_e01 = (8.0 * ec * 25.0f64).sqrt() - ec;
        assert!((e01 - approx_e01).abs() / approx_e01 < 0.02, "{e01} vs {approx_e01}");
    }

    #[test]
    fn rf_squid_real_at_half_quantum_and_shifted() {
        let at = |flux: f64| {
            let net = format!("ind L1 1 0 600 flux={flux}\njj J1 1 0 30 cj=2\ncap C1 1 0 40\n");
            let c = parse_netlist(&net).unwrap();
            let (t, ms) = analyze(&c).unwrap();
            let bias = crate::modes::bias_state(&c, &t, &ms);
            let bases = mode_bases(&ms, &bias, &[BasisDim::Levels(30)]).unwrap();
            let h = assemble(&bases, &circuit_terms(&ms, &bias)).unwrap();
            (h.is_real(), eigs_dense(&h))
        };
        let (real0, e0) = at(0.0);
        let (real_half, e_half) = at(0.5);
        let (real_mid, _) = at(0.23);
        assert!(real0, "Δφ = 0 must assemble real");
        assert!(real_half, "Δφ = π must assemble real");
        assert!(!real_mid, "generic phases are complex");
        // Frustration at half quantum compresses the low splitting.
        assert!(e_half[1] - e_half[0] < e0[1] - e0[0]);
    }

    #[test]
    fn assembly_is_deterministic() {
        let net = "ind L1 1 0 600 flux=0.31\njj J1 1 0 30 cj=2\ncap C1 1 0 40\n";
        let c = parse_netlist(net).unwrap();
        let (t, ms) = analyze(&c).unwrap();
        let bias = crate::modes::bias_state(&c, &t, &ms);
        let bases = mode_bases(&ms, &bias, &[BasisDim::Levels(24)]).unwrap();
        let terms = circuit_terms(&ms, &bias);
        let h1 = assemble(&bases, &terms).unwrap();
        let h2 = assemble(&bases, &terms).unwrap();
        match (h1, h2) {
            (SparseMatrix::Complex(a), SparseMatrix::Complex(b)) => {
                assert_eq!(a.indptr, b.indptr);
                assert_eq!(a.indices, b.indices);
                // bit-exact
                assert!(a.data.iter().zip(&b.data).all(|(x, y)| x == y));
            }
            (SparseMatrix::Real(a), SparseMatrix::Real(b)) => {
                assert_eq!(a.indptr, b.indptr);
                assert!(a.data.iter().zip(&b.data).all(|(x, y)| x == y));
            }
            _ => panic!("storage class must be deterministic too"),
        }
    }

    #[test]
    fn hermiticity_holds_with_generic_phase() {
        let net = "ind L1 1 0 600 flux=0.17\njj J1 1 0 30 cj=2\ncap C1 1 0 40\n";
        let c = parse_netlist(net).unwrap();
        let (t, ms) = analyze(&c).unwrap();
        let bias = crate::modes::bias_state(&c, &t, &ms);
        let bases = mode_bases(&ms, &bias, &[BasisDim::Levels(18)]).unwrap();
        let h = assemble(&bases, &circuit_terms(&ms, &bias)).unwrap();
        assert!(h.hermiticity_defect() < 1e-14 * 30.0);
    }

    #[test]
    fn floating_island_charge_offset_shifts_island_energy() {
        // Junction between two cap-grounded islands: the total island charge
        // is conserved; its offset moves the charging parabola.
        let at = |dq: f64| {
            let net =
                format!("cap C1 1 0 20\ncap C2 2 0 20\njj J1 1 2 14 cj=1\nqoff 1 {dq}\n");
            let c = parse_netlist(&net).unwrap();
            let (t, ms) = analyze(&c).unwrap();
            assert_eq!(ms.transform.counts(), (0, 1, 1));
            let bias = crate::modes::bias_state(&c, &t, &ms);
            let bases =
                mode_bases(&ms, &bias, &[BasisDim::Charge(3), BasisDim::Charge(8)]).unwrap();
            let h = assemble(&bases, &circuit_terms(&ms, &bias)).unwrap();
            eigs_dense(&h)[0]
        };
        let e0 = at(0.0);
        let e_half = at(0.5);
        assert!(e_half > e0 + 1e-3, "island charging energy must rise off the sweet spot");
    }

    #[test]
    fn expectation_of_ground_state_charge_vanishes_at_symmetry() {
        let net = "jj J1 1 0 18 cj=70\n";
        let c = parse_netlist(net).unwrap();
        let (t, ms) = analyze(&c).unwrap();
        let bias = crate::modes::bias_state(&c, &t, &ms);
        let bases = mode_bases(&ms, &bias, &[BasisDim::Charge(10)]).unwrap();
        let h = assemble(&bases, &circuit_terms(&ms, &bias)).unwrap();
        let a = h.to_dense_complex();
        let (vals, vecs) = a.eigh(ndarray_linalg::UPLO::Lower).unwrap();
        assert!(vals[0] < vals[1]);
        let psi: Vec<Complex64> = vecs.column(0).to_vec();
        let q = assemble_operator(&bases, &[(0, Factor::OffsetCharge)]).unwrap();
        assert_abs_diff_eq!(expectation(&q, &psi), 0.0, epsilon = 1e-10);
    }
}
