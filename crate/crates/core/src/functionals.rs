//! The split functionals `J`, `K`, energy `E = J + ω²K`, charge `H = 2ωK`,
//! and the energy-per-charge ratio `Λ = E/H`.
//!
//! `J(u) = ½∫(|∇u|² + (ell²/r²) u² + m² u²) dx + ∫N(u) dx` carries the
//! frequency-independent part; `K(u) = ½∫u² dx` (or the gauge-screened
//! `K_q` when a Maxwell coupling is present) carries the ω² part. All
//! gradients are the exact gradients of the discrete functionals, so
//! finite-difference checks hold to truncation error.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, RadialGrid};
use crate::maxwell;
use crate::potential::PotentialSpec;

/// Immutable evaluation bundle: mesh, potential, and Maxwell coupling
/// (`coupling_q = 0` for the pure scalar equation).
#[derive(Debug, Clone)]
pub struct FunctionalContext {
    grid: Arc<RadialGrid>,
    potential: PotentialSpec,
    coupling_q: f64,
}

impl FunctionalContext {
    pub fn new(grid: Arc<RadialGrid>, potential: PotentialSpec, coupling_q: f64) -> Result<Self> {
        if !(coupling_q >= 0.0) || !coupling_q.is_finite() {
            return Err(Error::Precondition(format!(
                "coupling_q must be a nonnegative real, got {coupling_q}"
            )));
        }
        if coupling_q > 0.0 && (grid.dim() != 3 || grid.ell() != 0) {
            return Err(Error::Precondition(
                "the electrostatic coupling is only defined for dim = 3, ell = 0".into(),
            ));
        }
        Ok(Self { grid, potential, coupling_q })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn coupling_q(&self) -> f64 {
        self.coupling_q
    }

    /// Swaps the potential, keeping mesh and coupling.
    pub fn with_potential(&self, potential: PotentialSpec) -> Self {
        Self {
            grid: self.grid.clone(),
            potential,
            coupling_q: self.coupling_q,
        }
    }

    pub(crate) fn nonlinear_integral(&self, u: &Field) -> f64 {
        self.grid
            .weights()
            .iter()
            .zip(u.values())
            .map(|(w, &s)| w * self.potential.n_clamped(s))
            .sum()
    }

    /// `J(u) = ½<L1 u, u> + ∫N(u)`.
    pub fn j(&self, u: &Field) -> Result<f64> {
        self.grid.check(u)?;
        Ok(self.j_terms(u).sum())
    }

    fn j_terms(&self, u: &Field) -> JTerms {
        let v = u.values();
        JTerms {
            gradient: 0.5 * self.grid.dirichlet_form(v, v),
            centrifugal: 0.5 * self.grid.centrifugal_form(v, v),
            mass: 0.5 * self.potential.m2() * self.grid.pairing(v, v),
            nonlinear: self.nonlinear_integral(u),
        }
    }

    /// `K(u) = ½∫u²` for `q = 0`, the gauge-screened `K_q` otherwise.
    pub fn k(&self, u: &Field) -> Result<f64> {
        self.grid.check(u)?;
        if self.coupling_q > 0.0 {
            maxwell::k_q(self, u)
        } else {
            Ok(0.5 * self.grid.pairing(u.values(), u.values()))
        }
    }

    /// `E(u, ω) = J(u) + ω² K(u)`.
    pub fn energy(&self, u: &Field, omega: f64) -> Result<f64> {
        Ok(self.j(u)? + omega * omega * self.k(u)?)
    }

    /// `H(u, ω) = 2 ω K(u)` — the conserved charge.
    pub fn charge(&self, u: &Field, omega: f64) -> Result<f64> {
        Ok(2.0 * (omega * self.k(u)?))
    }

    /// `Λ(u, ω) = E/H = ½ (J/K · 1/ω + ω)`; needs `ω > 0` and `K(u) > 0`.
    pub fn lambda(&self, u: &Field, omega: f64) -> Result<f64> {
        if !(omega > 0.0) {
            return Err(Error::Precondition(format!("lambda needs omega > 0, got {omega}")));
        }
        let k = self.k(u)?;
        if !(k > 0.0) {
            return Err(Error::DegenerateCharge(k));
        }
        Ok(0.5 * (self.j(u)? / k / omega + omega))
    }

    /// Exact gradient of the discrete `J`: the dual field `L1 u + N'(u)`.
    pub fn grad_j(&self, u: &Field) -> Result<Field> {
        let mut g = self.grid.apply_l1(self.potential.m2(), u)?;
        for (gv, &s) in g.values_mut().iter_mut().zip(u.values()) {
            *gv += self.potential.n_prime_clamped(s);
        }
        Ok(g)
    }

    /// Exact gradient of the discrete `K`: `u` for `q = 0`,
    /// `(1 - qΦ_u)² u` for `q > 0`.
    pub fn grad_k(&self, u: &Field) -> Result<Field> {
        self.grid.check(u)?;
        if self.coupling_q > 0.0 {
            Ok(maxwell::grad_k_q(self, u)?)
        } else {
            Ok(u.clone())
        }
    }

    /// Term-by-term energy split; the terms sum to `E(u, ω)`.
    pub fn energy_breakdown(&self, u: &Field, omega: f64) -> Result<EnergyBreakdown> {
        self.grid.check(u)?;
        let t = self.j_terms(u);
        Ok(EnergyBreakdown {
            gradient_term: t.gradient,
            mass_term: t.mass,
            centrifugal_term: t.centrifugal,
            nonlinear_term: t.nonlinear,
            omega_term: omega * omega * self.k(u)?,
        })
    }
}

struct JTerms {
    gradient: f64,
    centrifugal: f64,
    mass: f64,
    nonlinear: f64,
}

impl JTerms {
    fn sum(&self) -> f64 {
        ((self.gradient + self.centrifugal) + self.mass) + self.nonlinear
    }
}

/// Energy split into its five integrals (JSON-stable key names).
#[derive(Debug, Clone, Serialize)]
pub struct EnergyBreakdown {
    pub gradient_term: f64,
    pub mass_term: f64,
    pub centrifugal_term: f64,
    pub nonlinear_term: f64,
    pub omega_term: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        ((self.gradient_term + self.centrifugal_term) + self.mass_term) + self.nonlinear_term
            + self.omega_term
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{build_test_function, TestFunctionSpec};
    use crate::grid::RadialGrid;
    use crate::potential::{builtin_wfree, builtin_wref};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use std::f64::consts::PI;

    // Closed-form integrals of the plateau-and-ramp profile (R = 10, s0 = 1,
    // dim 3, reference potential): piecewise polynomials integrated exactly.
    const GRAD_SQ: f64 = 4.0 * PI * 331.0 / 3.0; // ∫|∇u_R|²
    const U_SQ: f64 = 4.0 * PI * 11051.0 / 30.0; // ∫u_R²
    const N_INT: f64 = -4.0 * PI * 15317.0 / 84.0; // ∫N(u_R)

    fn ctx() -> (FunctionalContext, Field) {
        let grid = RadialGrid::new(3, 0, 16.0, 1600).unwrap();
        let u = build_test_function(&grid, &TestFunctionSpec::ball(10.0, 1.0)).unwrap();
        (FunctionalContext::new(grid, builtin_wref(), 0.0).unwrap(), u)
    }

    #[test]
    fn rejects_bad_coupling() {
        let grid = RadialGrid::new(2, 1, 16.0, 256).unwrap();
        assert!(FunctionalContext::new(grid.clone(), builtin_wref(), 0.1).is_err());
        assert!(FunctionalContext::new(grid, builtin_wref(), -1.0).is_err());
    }

    #[test]
    fn j_and_k_match_piecewise_oracle() {
        let (ctx, u) = ctx();
        let j_exact = 0.5 * GRAD_SQ + 0.5 * U_SQ + N_INT; // 716.23
        let k_exact = 0.5 * U_SQ; // 2314.53
        assert_relative_eq!(ctx.j(&u).unwrap(), j_exact, max_relative = 2e-2);
        assert_relative_eq!(ctx.k(&u).unwrap(), k_exact, max_relative = 1e-2);
        assert!((j_exact / k_exact - 0.3095).abs() < 2e-2);
    }

    #[test]
    fn j_vanishes_at_zero_and_is_nonnegative() {
        let (ctx, _) = ctx();
        let zero = Field::zeros(ctx.grid().clone());
        assert_eq!(ctx.j(&zero).unwrap(), 0.0);
        // W >= 0 makes the J-integrand |∇u|²/2 + W(u) >= 0.
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..100 {
            let (a, w) = (rng.gen_range(0.0..2.0), rng.gen_range(0.3..2.0));
            let u = Field::from_fn(ctx.grid().clone(), |r| a * (-w * r).exp());
            assert!(ctx.j(&u).unwrap() >= 0.0);
        }
    }

    #[test]
    fn charge_is_omega_times_mass_integral() {
        let (ctx, u) = ctx();
        let omega = 0.73;
        let h = ctx.charge(&u, omega).unwrap();
        let direct = omega * ctx.grid().pairing(u.values(), u.values());
        assert_eq!(h, direct);
    }

    #[test]
    fn lambda_identities() {
        let (ctx, u) = ctx();
        let j = ctx.j(&u).unwrap();
        let k = ctx.k(&u).unwrap();
        let omega_star = (j / k).sqrt();
        // At ω* = sqrt(J/K) the ratio equals its minimum value sqrt(J/K).
        let lam = ctx.lambda(&u, omega_star).unwrap();
        assert_relative_eq!(lam, omega_star, max_relative = 1e-12);
        for i in 1..=50 {
            let omega = 0.05 + 1.95 * (i as f64) / 50.0;
            assert!(ctx.lambda(&u, omega).unwrap() >= lam - 1e-12 * lam);
        }
        // E = Λ·H whenever the charge is positive.
        for &omega in &[0.1, 0.5563, 1.3] {
            let e = ctx.energy(&u, omega).unwrap();
            let hh = ctx.charge(&u, omega).unwrap();
            assert_relative_eq!(e, ctx.lambda(&u, omega).unwrap() * hh, max_relative = 1e-12);
        }
        // Λ < m at fixed charge forces E < m σ.
        let e = ctx.energy(&u, omega_star).unwrap();
        let sigma = ctx.charge(&u, omega_star).unwrap();
        assert!(lam < 1.0 && e < 1.0 * sigma);
        // Degenerate charge is rejected.
        let zero = Field::zeros(ctx.grid().clone());
        assert!(ctx.lambda(&zero, 0.5).is_err());
        assert!(ctx.lambda(&u, 0.0).is_err());
    }

    #[test]
    fn energy_tends_to_j_for_small_omega() {
        let (ctx, u) = ctx();
        let j = ctx.j(&u).unwrap();
        let e = ctx.energy(&u, 1e-9).unwrap();
        assert_relative_eq!(e, j, max_relative = 1e-12);
    }

    #[test]
    fn gradients_match_central_differences() {
        // Base profile is smooth so the pairing scale ‖g‖‖v‖ reflects the
        // nonlinear terms; directional values can cancel, so the error is
        // measured against that scale rather than the raw quotient.
        let grid = RadialGrid::new(3, 0, 16.0, 1600).unwrap();
        let ctx = FunctionalContext::new(grid.clone(), builtin_wref(), 0.0).unwrap();
        let u = Field::from_fn(grid.clone(), |r| 0.9 * (-0.12 * r * r).exp());
        let mut rng = StdRng::seed_from_u64(5);
        let eps = 1e-5;
        for _ in 0..5 {
            let (a, w, c) = (
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.2..1.0),
                rng.gen_range(0.0..3.0),
            );
            let v = Field::from_fn(grid.clone(), |r| a * (-w * (r - c) * (r - c)).exp());
            let up = u.axpy(eps, &v);
            let um = u.axpy(-eps, &v);

            let gj = ctx.grad_j(&u).unwrap();
            let scale_j = grid.norm_l2(gj.values()) * grid.norm_l2(v.values());
            let lhs = grid.pairing(gj.values(), v.values());
            let fd = (ctx.j(&up).unwrap() - ctx.j(&um).unwrap()) / (2.0 * eps);
            assert!((lhs - fd).abs() <= 1e-5 * fd.abs().max(1e-2 * scale_j));

            let gk = ctx.grad_k(&u).unwrap();
            let scale_k = grid.norm_l2(gk.values()) * grid.norm_l2(v.values());
            let lhs_k = grid.pairing(gk.values(), v.values());
            let fd_k = (ctx.k(&up).unwrap() - ctx.k(&um).unwrap()) / (2.0 * eps);
            assert!((lhs_k - fd_k).abs() <= 1e-5 * fd_k.abs().max(1e-2 * scale_k));
        }
    }

    #[test]
    fn grad_k_is_identity_without_coupling() {
        let (ctx, u) = ctx();
        let gk = ctx.grad_k(&u).unwrap();
        assert_eq!(gk.values(), u.values());
    }

    #[test]
    fn grad_j_vanishes_at_zero() {
        let (ctx, _) = ctx();
        let zero = Field::zeros(ctx.grid().clone());
        let g = ctx.grad_j(&zero).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn breakdown_sums_to_energy() {
        let (ctx, u) = ctx();
        let omega = 0.81;
        let b = ctx.energy_breakdown(&u, omega).unwrap();
        let e = ctx.energy(&u, omega).unwrap();
        assert_relative_eq!(b.total(), e, max_relative = 1e-12);
        // dim 3, ell = 0: no centrifugal share.
        assert_eq!(b.centrifugal_term, 0.0);
        let json = serde_json::to_value(&b).unwrap();
        for key in ["gradient_term", "mass_term", "centrifugal_term", "nonlinear_term", "omega_term"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
    }

    #[test]
    fn free_field_ratio_sits_above_mass_squared() {
        let grid = RadialGrid::new(3, 0, 16.0, 800).unwrap();
        let ctx = FunctionalContext::new(grid.clone(), builtin_wfree(), 0.0).unwrap();
        let u = Field::from_fn(grid, |r| (-0.4 * r).exp());
        let ratio = ctx.j(&u).unwrap() / ctx.k(&u).unwrap();
        assert!(ratio > ctx.potential().m2());
    }
}
