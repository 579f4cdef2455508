//! Internal unit system and physical constants.
//!
//! Everything downstream works in a fixed set of units chosen so that typical
//! superconducting-circuit numbers are O(1..1000):
//!
//! * energy: GHz (always E/h, never E/ħ)
//! * capacitance: fF
//! * inductance: pH
//! * flux: Φ₀ = h/2e
//! * charge: 2e (Cooper pairs)
//!
//! In these units the flux–charge commutator is `[Φ̂, Q̂] = i/2π`, i.e.
//! ħ = 1/(2π) because Φ₀·2e = h exactly.

/// Elementary charge, C (exact, 2019 SI).
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// Planck constant, J·s (exact, 2019 SI).
pub const H_PLANCK: f64 = 6.626_070_15e-34;

/// Superconducting flux quantum Φ₀ = h/2e, Wb.
pub const FLUX_QUANTUM: f64 = H_PLANCK / (2.0 * E_CHARGE);

/// Resistance quantum for pairs, R_Q = Φ₀/2e = h/4e², Ω.
pub const R_QUANTUM: f64 = FLUX_QUANTUM / (2.0 * E_CHARGE);

/// ħ in internal units (flux in Φ₀, charge in 2e, energy in GHz·h): 1/2π.
pub const HBAR: f64 = 1.0 / std::f64::consts::TAU;

/// Charging-energy scale: (2e)²/h expressed in GHz·fF.
///
/// A quadratic charge term ½·(C⁻¹)ᵢⱼ[1/fF]·CHARGE_E·q̂ᵢq̂ⱼ with q̂ in 2e
/// is an energy in GHz.
pub const CHARGE_E: f64 =
    (2.0 * E_CHARGE) * (2.0 * E_CHARGE) / (H_PLANCK * 1e-15 * 1e9);

/// Inductive-energy scale: Φ₀²/h expressed in GHz·pH.
///
/// A quadratic flux term ½·(L⁻¹)ᵢⱼ[1/pH]·FLUX_E·φ̂ᵢφ̂ⱼ with φ̂ in Φ₀
/// is an energy in GHz.
pub const FLUX_E: f64 =
    FLUX_QUANTUM * FLUX_QUANTUM / (H_PLANCK * 1e-12 * 1e9);

/// LC resonance frequency in GHz for L in pH and C in fF: 1/(2π√(LC)).
pub fn lc_frequency_ghz(l_ph: f64, c_ff: f64) -> f64 {
    1.0 / (std::f64::consts::TAU * (l_ph * 1e-12 * c_ff * 1e-15).sqrt()) / 1e9
}

/// Dimensionless mode impedance z = Z/R_Q from the diagonal curvatures of the
/// transformed quadratic form  (C⁻¹ in 1/fF, L⁻¹ in 1/pH).
pub fn mode_impedance(c_inv_diag: f64, l_inv_diag: f64) -> f64 {
    (c_inv_diag * CHARGE_E / (l_inv_diag * FLUX_E)).sqrt()
}

/// Mode frequency in GHz from the diagonal curvatures of the transformed
/// quadratic form.
pub fn mode_frequency_ghz(c_inv_diag: f64, l_inv_diag: f64) -> f64 {
    HBAR * (c_inv_diag * CHARGE_E * l_inv_diag * FLUX_E).sqrt()
}

/// Mode impedance in Ω (for reporting only).
pub fn impedance_ohms(z: f64) -> f64 {
    z * R_QUANTUM
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constants_cross_check() {
        // Φ₀·2e = h exactly, so the two energy scales multiply to 1e9 GHz².
        assert_relative_eq!(CHARGE_E * FLUX_E, 1e9, max_relative = 1e-12);
        assert_relative_eq!(FLUX_QUANTUM, 2.067_833_848e-15, max_relative = 1e-9);
        assert_relative_eq!(R_QUANTUM, 6453.20, max_relative = 1e-5);
        // Single-electron charging energy e²/2h·(1/C): 19.37 GHz·fF.
        assert_relative_eq!(CHARGE_E / 8.0, 19.370, max_relative = 1e-3);
    }

    #[test]
    fn lc_frequency_matches_quadratic_form() {
        let (l, c) = (500.0, 50.0);
        let f = lc_frequency_ghz(l, c);
        assert_relative_eq!(f, 31.83, max_relative = 1e-3);
        // ω from the quadratic-form route must agree.
        let f2 = mode_frequency_ghz(1.0 / c, 1.0 / l);
        assert_relative_eq!(f, f2, max_relative = 1e-12);
    }

    #[test]
    fn impedance_scale() {
        // z = √(L/C)·(31.6228 Ω)/R_Q
        let z = mode_impedance(1.0 / 50.0, 1.0 / 500.0);
        assert_relative_eq!(z, (500.0f64 / 50.0).sqrt() * 31.6227766 / 6453.20, max_relative = 1e-5);
    }
}
