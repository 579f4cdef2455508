//! Truncated single-mode operator matrices.
//!
//! Oscillator modes live in the number basis with dimensionless impedance z:
//! Φ̂ = √(z/4π)(â+â†) in units of Φ₀ and Q̂ = −i√(1/4πz)(â−â†) in units of
//! 2e, so [Φ̂, Q̂] = i/2π on the untruncated space. Quadratics are offered as
//! exact projections P·(op²)·P, which keeps truncated ground-state energies
//! variational. Displacements e^{i·2π·a·Φ̂} are built from the closed-form
//! coherent-state matrix elements (associated Laguerre polynomials), i.e.
//! they are the exact projection of the untruncated displacement.
//!
//! Periodic (island/Josephson) modes live in the charge basis ordered by
//! descending charge q = q_m … −q_m. `shift(+1)` lowers the charge (ones on
//! the subdiagonal), so e^{+i n φ̂} is `shift(−n)`. The compact phase
//! operator is defined spectrally on the discrete flux states (DFT basis).
//!
//! Everything returned here is memoized behind a process-wide cache: sweeps
//! rebuild Hamiltonians with identical factors thousands of times.

use ndarray::Array2;
use num_complex::Complex64;
use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::sync::{Arc, OnceLock, RwLock};

type Matrix = Arc<Array2<Complex64>>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Key {
    Flux { dim: usize, z: u64 },
    Charge { dim: usize, z: u64 },
    FluxSq { dim: usize, z: u64 },
    ChargeSq { dim: usize, z: u64 },
    Number { dim: usize },
    Displace { dim: usize, lambda: u64 },
    PerCharge { dim: usize },
    PerChargeSq { dim: usize },
    PerFlux { dim: usize },
    PhaseExp { dim: usize, n: i64 },
}

impl Eq for Key {}
impl std::hash::Hash for Key {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Key::Flux { dim, z }
            | Key::Charge { dim, z }
            | Key::FluxSq { dim, z }
            | Key::ChargeSq { dim, z } => {
                dim.hash(state);
                z.hash(state);
            }
            Key::Number { dim } | Key::PerCharge { dim } | Key::PerChargeSq { dim }
            | Key::PerFlux { dim } => dim.hash(state),
            Key::Displace { dim, lambda } => {
                dim.hash(state);
                lambda.hash(state);
            }
            Key::PhaseExp { dim, n } => {
                dim.hash(state);
                n.hash(state);
            }
        }
    }
}

fn cache() -> &'static RwLock<HashMap<Key, Matrix>> {
    static CACHE: OnceLock<RwLock<HashMap<Key, Matrix>>> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

fn memo(key: Key, build: impl FnOnce() -> Array2<Complex64>) -> Matrix {
    if let Some(m) = cache().read().unwrap().get(&key) {
        return Arc::clone(m);
    }
    let m = Arc::new(build());
    let mut w = cache().write().unwrap();
    Arc::clone(w.entry(key).or_insert(m))
}

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn identity(dim: usize) -> Array2<Complex64> {
    Array2::eye(dim)
}

/// Φ̂ in Φ₀: √(z/4π)(â+â†).
pub fn osc_flux(dim: usize, z: f64) -> Matrix {
    memo(Key::Flux { dim, z: z.to_bits() }, || {
        let c = (z / (4.0 * PI)).sqrt();
        let mut m = Array2::zeros((dim, dim));
        for n in 0..dim.saturating_sub(1) {
            let v = re(c * ((n + 1) as f64).sqrt());
            m[[n, n + 1]] = v;
            m[[n + 1, n]] = v;
        }
        m
    })
}

/// Q̂ in 2e: −i√(1/4πz)(â−â†).
pub fn osc_charge(dim: usize, z: f64) -> Matrix {
    memo(Key::Charge { dim, z: z.to_bits() }, || {
        let d = 1.0 / (4.0 * PI * z).sqrt();
        let mut m = Array2::zeros((dim, dim));
        for n in 0..dim.saturating_sub(1) {
            let v = d * ((n + 1) as f64).sqrt();
            m[[n, n + 1]] = Complex64::new(0.0, -v);
            m[[n + 1, n]] = Complex64::new(0.0, v);
        }
        m
    })
}

/// Exact projection of Φ̂²: (z/4π)(ââ + â†â† + 2n̂ + 1).
pub fn osc_flux_sq(dim: usize, z: f64) -> Matrix {
    memo(Key::FluxSq { dim, z: z.to_bits() }, || {
        let c = z / (4.0 * PI);
        let mut m = Array2::zeros((dim, dim));
        for n in 0..dim {
            m[[n, n]] = re(c * (2 * n + 1) as f64);
            if n + 2 < dim {
                let v = re(c * (((n + 1) * (n + 2)) as f64).sqrt());
                m[[n, n + 2]] = v;
                m[[n + 2, n]] = v;
            }
        }
        m
    })
}

/// Exact projection of Q̂²: (1/4πz)(2n̂ + 1 − ââ − â†â†).
pub fn osc_charge_sq(dim: usize, z: f64) -> Matrix {
    memo(Key::ChargeSq { dim, z: z.to_bits() }, || {
        let c = 1.0 / (4.0 * PI * z);
        let mut m = Array2::zeros((dim, dim));
        for n in 0..dim {
            m[[n, n]] = re(c * (2 * n + 1) as f64);
            if n + 2 < dim {
                let v = re(-c * (((n + 1) * (n + 2)) as f64).sqrt());
                m[[n, n + 2]] = v;
                m[[n + 2, n]] = v;
            }
        }
        m
    })
}

pub fn osc_number(dim: usize) -> Matrix {
    memo(Key::Number { dim }, || {
        let mut m = Array2::zeros((dim, dim));
        for n in 0..dim {
            m[[n, n]] = re(n as f64);
        }
        m
    })
}

/// 𝒟(a) = exp(i·a·√z·(â+â†)): the exact truncation of the displacement with
/// amplitude α = i·a·√z, via ⟨m|D|n⟩ = √(n!/m!)·α^{m−n}·e^{−|α|²/2}·
/// L_n^{(m−n)}(|α|²). The matrix is complex symmetric, and 𝒟(−a) = 𝒟(a)†.
pub fn displacement(dim: usize, z: f64, a: f64) -> Matrix {
    let lambda = a * z.sqrt();
    memo(Key::Displace { dim, lambda: lambda.to_bits() }, || {
        let x = lambda * lambda;
        let pref = (-x / 2.0).exp();
        let mut m = Array2::zeros((dim, dim));
        for k in 0..dim {
            // (iλ)^k and the j-recurrence of L_j^{(k)}(x).
            let phase = Complex64::i().powu(k as u32) * lambda.powi(k as i32);
            let mut l_prev = 0.0_f64;
            let mut l_cur = 1.0_f64;
            let mut ratio = (1..=k).fold(1.0_f64, |acc, j| acc / j as f64).sqrt();
            for n in 0..dim - k {
                if n > 0 {
                    let nf = n as f64;
                    let next = (((2.0 * (nf - 1.0) + 1.0 + k as f64) - x) * l_cur
                        - (nf - 1.0 + k as f64) * l_prev)
                        / nf;
                    l_prev = l_cur;
                    l_cur = next;
                    // √(n!/(n+k)!) advances by √(n/(n+k)).
                    ratio *= (nf / (nf + k as f64)).sqrt();
                }
                let v = phase * re(pref * ratio * l_cur);
                m[[n + k, n]] = v;
                m[[n, n + k]] = v;
            }
        }
        m
    })
}

/// Charge operator of a periodic mode, in 2e: diag(q_m, …, −q_m).
pub fn per_charge(q_max: usize) -> Matrix {
    let dim = 2 * q_max + 1;
    memo(Key::PerCharge { dim }, || {
        let mut m = Array2::zeros((dim, dim));
        for k in 0..dim {
            m[[k, k]] = re(q_max as f64 - k as f64);
        }
        m
    })
}

/// Exact diagonal square of the periodic charge operator.
pub fn per_charge_sq(q_max: usize) -> Matrix {
    let dim = 2 * q_max + 1;
    memo(Key::PerChargeSq { dim }, || {
        let mut m = Array2::zeros((dim, dim));
        for k in 0..dim {
            let q = q_max as f64 - k as f64;
            m[[k, k]] = re(q * q);
        }
        m
    })
}

/// Charge-shift operator: `shift(+1)` lowers the charge by one Cooper pair
/// (ones on the subdiagonal of the descending-charge basis). `shift(0)` is
/// the identity.
pub fn shift(q_max: usize, by: i64) -> Matrix {
    let dim = 2 * q_max + 1;
    memo(Key::PhaseExp { dim, n: -by }, || phase_exp_matrix(dim, -by))
}

/// e^{+i·n·φ̂} on a periodic mode: raises the charge by n.
pub fn phase_exp(q_max: usize, n: i64) -> Matrix {
    let dim = 2 * q_max + 1;
    memo(Key::PhaseExp { dim, n }, || phase_exp_matrix(dim, n))
}

fn phase_exp_matrix(dim: usize, n: i64) -> Array2<Complex64> {
    let mut m = Array2::zeros((dim, dim));
    for col in 0..dim as i64 {
        let row = col - n; // raising charge by n moves up the descending basis
        if row >= 0 && row < dim as i64 {
            m[[row as usize, col as usize]] = re(1.0);
        }
    }
    m
}

/// Compact phase operator of a periodic mode, defined spectrally on the
/// discrete flux states: ⟨q|Φ_k⟩ = e^{i·2πkq/N}/√N with phase values
/// φ_k = 2πk/N, k = −q_m…q_m. Purely imaginary off-diagonal, zero diagonal.
pub fn per_flux(q_max: usize) -> Matrix {
    let dim = 2 * q_max + 1;
    memo(Key::PerFlux { dim }, || {
        let nf = dim as f64;
        let mut m = Array2::zeros((dim, dim));
        for r in 0..dim {
            for c in 0..dim {
                if r == c {
                    continue;
                }
                let d = (q_max as f64 - r as f64) - (q_max as f64 - c as f64);
                let mut acc = Complex64::new(0.0, 0.0);
                for k in -(q_max as i64)..=(q_max as i64) {
                    let phi = TAU * k as f64 / nf;
                    acc += re(phi) * Complex64::new(0.0, phi * d).exp();
                }
                m[[r, c]] = acc / nf;
            }
        }
        m
    })
}
