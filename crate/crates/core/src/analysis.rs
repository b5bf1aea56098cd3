//! Explicit constructions and certificates: compactly supported trial
//! profiles, the binding-ratio certificate `J/K < m²`, the unbounded-energy
//! demonstration for sign-indefinite potentials, Lorentz boosts of standing
//! waves, and the angular momentum of planar vortices.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::FunctionalContext;
use crate::grid::{Field, RadialGrid};
use crate::potential::PotentialSpec;

/// Compactly supported trial profile.
///
/// The ball shape is a plateau `s0` inside radius `R` with a unit linear
/// ramp (support `R + 1`); the annulus keeps an inner hole of radius `R - 1`
/// so that `∫u²/r²` stays bounded, as planar vortices require (support
/// `2R + 1`).
#[derive(Debug, Clone, Copy)]
pub struct TestFunctionSpec {
    pub shape: TestShape,
    pub radius: f64,
    pub s0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestShape {
    /// Plateau ball, for the three-dimensional problems.
    Ball,
    /// Plateau annulus with an inner hole, for planar vortices.
    Annulus,
}

impl TestFunctionSpec {
    pub fn ball(radius: f64, s0: f64) -> Self {
        Self { shape: TestShape::Ball, radius, s0 }
    }

    pub fn annulus(radius: f64, s0: f64) -> Self {
        Self { shape: TestShape::Annulus, radius, s0 }
    }

    fn eval(&self, r: f64) -> f64 {
        let (rad, s0) = (self.radius, self.s0);
        match self.shape {
            TestShape::Ball => {
                if r < rad {
                    s0
                } else if r <= rad + 1.0 {
                    s0 * (1.0 + rad - r)
                } else {
                    0.0
                }
            }
            TestShape::Annulus => {
                if r <= rad - 1.0 || r >= 2.0 * rad + 1.0 {
                    0.0
                } else if r <= rad {
                    s0 * (r - rad + 1.0)
                } else if r <= 2.0 * rad {
                    s0
                } else {
                    s0 * (1.0 + 2.0 * rad - r)
                }
            }
        }
    }

    fn support(&self) -> f64 {
        match self.shape {
            TestShape::Ball => self.radius + 1.0,
            TestShape::Annulus => 2.0 * self.radius + 1.0,
        }
    }
}

/// Samples the piecewise-linear trial profile on the grid nodes exactly.
pub fn build_test_function(grid: &Arc<RadialGrid>, spec: &TestFunctionSpec) -> Result<Field> {
    match spec.shape {
        TestShape::Ball if grid.dim() != 3 => {
            return Err(Error::Precondition("the ball trial profile is three-dimensional".into()))
        }
        TestShape::Annulus if grid.dim() != 2 => {
            return Err(Error::Precondition("the annulus trial profile is planar".into()))
        }
        _ => {}
    }
    if spec.shape == TestShape::Annulus && spec.radius <= 1.0 {
        return Err(Error::Precondition("annulus radius must exceed 1".into()));
    }
    if !(spec.s0 > 0.0) || !(spec.radius > 0.0) {
        return Err(Error::Precondition("trial profile needs positive radius and plateau".into()));
    }
    if spec.support() >= grid.r_max() {
        return Err(Error::Precondition(format!(
            "trial profile support {} exceeds r_max = {}",
            spec.support(),
            grid.r_max()
        )));
    }
    Ok(Field::from_fn(grid.clone(), |r| spec.eval(r)))
}

#[derive(Debug, Clone, Serialize)]
pub struct HylomorphyEntry {
    pub radius: f64,
    /// `J(u_R)/K(u_R)`.
    pub ratio: f64,
    /// `∫|∇u_R|² / K(u_R)`, the surface share that decays like `1/R`.
    pub gradient_share: f64,
}

/// Binding certificate along a doubling ladder of trial radii.
#[derive(Debug, Clone, Serialize)]
pub struct HylomorphyReport {
    pub entries: Vec<HylomorphyEntry>,
    /// First radius with `J/K < m²`, if any.
    pub first_binding_radius: Option<f64>,
    /// Volume-dominance limit of the ratio: `m² + 2 N(s0)/s0²`.
    pub limit_prediction: f64,
    pub pass: bool,
}

/// Evaluates `J(u_R)/K(u_R)` for `R, 2R, 4R, ...` while the support fits,
/// and reports the first radius certifying the binding condition.
pub fn hylomorphy_certificate(ctx: &FunctionalContext, base: &TestFunctionSpec) -> Result<HylomorphyReport> {
    let grid = ctx.grid();
    let pot = ctx.potential();
    let mut entries = Vec::new();
    let mut first = None;
    let mut spec = *base;
    loop {
        if spec.support() >= grid.r_max() {
            break;
        }
        let u = build_test_function(grid, &spec)?;
        let k = ctx.k(&u)?;
        let j = ctx.j(&u)?;
        let grad = grid.dirichlet_form(u.values(), u.values());
        let ratio = j / k;
        if ratio < pot.m2() && first.is_none() {
            first = Some(spec.radius);
        }
        entries.push(HylomorphyEntry {
            radius: spec.radius,
            ratio,
            gradient_share: grad / k,
        });
        spec.radius *= 2.0;
    }
    if entries.is_empty() {
        return Err(Error::Precondition(format!(
            "trial profile of radius {} does not fit inside r_max = {}",
            base.radius,
            grid.r_max()
        )));
    }
    Ok(HylomorphyReport {
        pass: first.is_some(),
        first_binding_radius: first,
        limit_prediction: pot.m2() + 2.0 * pot.n(pot.s0()) / (pot.s0() * pot.s0()),
        entries,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NonexistenceEntry {
    pub radius: f64,
    pub omega_r: f64,
    pub energy: f64,
    pub charge: f64,
}

/// Energy of the fixed-charge trial sequence for a potential with
/// `W(s0) < 0`: plateau states of growing radius `R` with
/// `ω_R = σ/∫u_R²` keep the charge pinned at `σ` while the negative
/// `W(s0) R^dim` bulk term drives the energy to `-∞`.
pub fn nonexistence_sequence(
    ctx: &FunctionalContext,
    sigma: f64,
    r_list: &[f64],
) -> Result<Vec<NonexistenceEntry>> {
    let grid = ctx.grid();
    let pot = ctx.potential();
    if !(sigma > 0.0) {
        return Err(Error::Precondition("sigma must be positive".into()));
    }
    let w_s0 = pot.eval_w(pot.s0())?;
    if w_s0 >= 0.0 {
        return Err(Error::Precondition(format!(
            "the unboundedness construction needs W(s0) < 0, got W({}) = {w_s0}",
            pot.s0()
        )));
    }
    let mut entries = Vec::with_capacity(r_list.len());
    for &radius in r_list {
        let u = build_test_function(grid, &TestFunctionSpec::ball(radius, pot.s0()))?;
        let v = u.values();
        let mass2 = grid.pairing(v, v);
        let omega_r = sigma / mass2;
        let energy = 0.5 * grid.dirichlet_form(v, v)
            + 0.5 * pot.m2() * mass2
            + ctx.nonlinear_integral(&u)
            + 0.5 * omega_r * sigma;
        entries.push(NonexistenceEntry {
            radius,
            omega_r,
            energy,
            charge: omega_r * mass2,
        });
    }
    Ok(entries)
}

/// Kinematics of a boosted standing wave: `ω_v = γω`, `k_v = γωv ê_1`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoostSpec {
    pub v: f64,
    pub gamma: f64,
    pub omega_v: f64,
    pub k_v: [f64; 3],
}

impl BoostSpec {
    pub fn new(v: f64, omega: f64) -> Result<Self> {
        if !(v.abs() < 1.0) {
            return Err(Error::Precondition(format!("|v| must be below 1 (units c = 1), got {v}")));
        }
        let gamma = 1.0 / (1.0 - v * v).sqrt();
        Ok(Self {
            v,
            gamma,
            omega_v: gamma * omega,
            k_v: [gamma * omega * v, 0.0, 0.0],
        })
    }

    /// `ω_v² - |k_v|²`; equals `ω²` by the relativistic dispersion relation.
    pub fn dispersion(&self) -> f64 {
        self.omega_v * self.omega_v
            - (self.k_v[0] * self.k_v[0] + self.k_v[1] * self.k_v[1] + self.k_v[2] * self.k_v[2])
    }
}

/// Spacetime evaluator for `ψ_v(t, x) = u(γ(x₁ - vt), x₂, x₃) e^{i(k_v·x - ω_v t)}`,
/// with the radial profile interpolated by a cubic (Catmull-Rom) kernel.
#[derive(Debug, Clone)]
pub struct BoostedWave {
    samples: Vec<f64>,
    h: f64,
    r_max: f64,
    pub omega: f64,
    pub spec: BoostSpec,
}

/// Boosts a converged spherical standing wave (dim 3, ell 0).
pub fn lorentz_boost(profile: &Field, omega: f64, v: f64) -> Result<BoostedWave> {
    let grid = profile.grid();
    if grid.dim() != 3 || grid.ell() != 0 {
        return Err(Error::Precondition("boosts apply to spherical (dim 3, ell 0) profiles".into()));
    }
    let spec = BoostSpec::new(v, omega)?;
    let u = profile.values();
    let m = u.len();
    let mut samples = Vec::with_capacity(m + 2);
    // r = 0 closure: parabola through the first two nodes with u'(0) = 0.
    samples.push((4.0 * u[0] - u[1]) / 3.0);
    samples.extend_from_slice(u);
    samples.push(0.0); // Dirichlet at r_max
    Ok(BoostedWave {
        samples,
        h: grid.h(),
        r_max: grid.r_max(),
        omega,
        spec,
    })
}

impl BoostedWave {
    /// Radial amplitude at the boosted argument.
    fn amplitude(&self, r: f64) -> f64 {
        if r >= self.r_max {
            return 0.0;
        }
        let x = r / self.h;
        let j = (x.floor() as usize).min(self.samples.len() - 2);
        let t = x - j as f64;
        let at = |idx: isize| -> f64 {
            if idx < 0 {
                // even reflection through the origin
                self.samples[(-idx) as usize]
            } else {
                self.samples.get(idx as usize).copied().unwrap_or(0.0)
            }
        };
        let (f0, f1, f2, f3) = (at(j as isize - 1), at(j as isize), at(j as isize + 1), at(j as isize + 2));
        0.5 * (2.0 * f1
            + (f2 - f0) * t
            + (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) * t * t
            + (3.0 * f1 - f0 - 3.0 * f2 + f3) * t * t * t)
    }

    /// Complex value `(Re ψ_v, Im ψ_v)` at a spacetime point.
    pub fn eval(&self, t: f64, x: [f64; 3]) -> (f64, f64) {
        let s = &self.spec;
        let x1b = s.gamma * (x[0] - s.v * t);
        let r = (x1b * x1b + x[1] * x[1] + x[2] * x[2]).sqrt();
        let amp = self.amplitude(r);
        let phase = s.k_v[0] * x[0] - s.omega_v * t;
        (amp * phase.cos(), amp * phase.sin())
    }
}

/// Max modulus of the field-equation defect `∂_tt ψ - Δψ + W'(ψ)` over the
/// sample points, with second-order centered stencils of step `h`. For a
/// boosted solution this decays like `h²`.
pub fn boost_residual_max(
    wave: &BoostedWave,
    potential: &PotentialSpec,
    h: f64,
    points: &[(f64, [f64; 3])],
) -> f64 {
    let h2 = h * h;
    let mut worst: f64 = 0.0;
    for &(t, x) in points {
        let (cr, ci) = wave.eval(t, x);
        let mut acc_r = 0.0;
        let mut acc_i = 0.0;
        // ∂_tt
        let (pr, pi) = wave.eval(t + h, x);
        let (mr, mi) = wave.eval(t - h, x);
        acc_r += (pr - 2.0 * cr + mr) / h2;
        acc_i += (pi - 2.0 * ci + mi) / h2;
        // -Δ
        for axis in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[axis] += h;
            xm[axis] -= h;
            let (pr, pi) = wave.eval(t, xp);
            let (mr, mi) = wave.eval(t, xm);
            acc_r -= (pr - 2.0 * cr + mr) / h2;
            acc_i -= (pi - 2.0 * ci + mi) / h2;
        }
        // W'(ψ) = (m² + N'(|ψ|)/|ψ|) ψ
        let amp = (cr * cr + ci * ci).sqrt();
        let factor = if amp > 1e-14 {
            potential.m2() + potential.n_prime_clamped(amp) / amp
        } else {
            potential.m2()
        };
        acc_r += factor * cr;
        acc_i += factor * ci;
        worst = worst.max((acc_r * acc_r + acc_i * acc_i).sqrt());
    }
    worst
}

/// Angular momentum `M = (0, 0, -ω ℓ ∫u² dx)` of a planar vortex embedded
/// in the z = 0 plane; zero for standing waves.
pub fn angular_momentum(u: &Field, omega: f64) -> [f64; 3] {
    let grid = u.grid();
    let ell = grid.ell() as f64;
    [0.0, 0.0, -omega * ell * grid.pairing(u.values(), u.values())]
}

/// Planar sup bound `½ max u² <= (1/2π) sqrt(∫u²/r² dx · ∫|∇u|² dx)`;
/// returns `(lhs, rhs)` for a vortex field.
pub fn vortex_sup_bound(u: &Field) -> Result<(f64, f64)> {
    let grid = u.grid();
    if grid.dim() != 2 || grid.ell() == 0 {
        return Err(Error::Precondition("the sup bound applies to planar vortex fields".into()));
    }
    let ell2 = (grid.ell() as f64) * (grid.ell() as f64);
    let centr = grid.centrifugal_form(u.values(), u.values()) / ell2;
    let grad = grid.dirichlet_form(u.values(), u.values());
    let lhs = 0.5 * u.max() * u.max();
    let rhs = (centr * grad).sqrt() / (2.0 * std::f64::consts::PI);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{builtin_wbad, builtin_wfree, builtin_wref};
    use approx::assert_relative_eq;

    #[test]
    fn ball_profile_pointwise() {
        let g = RadialGrid::new(3, 0, 16.0, 1600).unwrap();
        let u = build_test_function(&g, &TestFunctionSpec::ball(10.0, 1.0)).unwrap();
        let at = |r: f64| {
            let i = (r / g.h()).round() as usize - 1;
            u.values()[i]
        };
        assert_eq!(at(5.0), 1.0);
        assert_relative_eq!(at(10.5), 0.5, max_relative = 1e-12);
        assert_eq!(at(11.2), 0.0);
    }

    #[test]
    fn annulus_profile_pointwise() {
        let g = RadialGrid::new(2, 1, 24.0, 2400).unwrap();
        let u = build_test_function(&g, &TestFunctionSpec::annulus(10.0, 1.0)).unwrap();
        let at = |r: f64| {
            let i = (r / g.h()).round() as usize - 1;
            u.values()[i]
        };
        assert_relative_eq!(at(9.5), 0.5, max_relative = 1e-12);
        assert_eq!(at(15.0), 1.0);
        assert_eq!(at(21.2), 0.0);
    }

    #[test]
    fn trial_profile_preconditions() {
        let g = RadialGrid::new(3, 0, 10.0, 200).unwrap();
        assert!(build_test_function(&g, &TestFunctionSpec::ball(9.5, 1.0)).is_err());
        assert!(build_test_function(&g, &TestFunctionSpec::annulus(4.0, 1.0)).is_err()); // dim
        let g2 = RadialGrid::new(2, 1, 10.0, 200).unwrap();
        assert!(build_test_function(&g2, &TestFunctionSpec::annulus(0.8, 1.0)).is_err());
    }

    #[test]
    fn binding_certificate_for_reference_potential() {
        let g = RadialGrid::new(3, 0, 24.0, 2400).unwrap();
        let ctx = FunctionalContext::new(g, builtin_wref(), 0.0).unwrap();
        let rep = hylomorphy_certificate(&ctx, &TestFunctionSpec::ball(10.0, 1.0)).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.first_binding_radius, Some(10.0));
        assert!((rep.entries[0].ratio - 0.3095).abs() < 0.02);
        assert!(rep.entries[0].ratio < 1.0);
        assert_relative_eq!(rep.limit_prediction, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_share_halves_when_radius_doubles() {
        let g = RadialGrid::new(3, 0, 45.0, 2250).unwrap();
        let ctx = FunctionalContext::new(g, builtin_wref(), 0.0).unwrap();
        let rep = hylomorphy_certificate(&ctx, &TestFunctionSpec::ball(10.0, 1.0)).unwrap();
        assert!(rep.entries.len() >= 2);
        let ratio = rep.entries[1].gradient_share / rep.entries[0].gradient_share;
        assert!((ratio - 0.5).abs() < 0.15 * 0.5, "ratio = {ratio}");
    }

    #[test]
    fn free_potential_never_certifies() {
        let g = RadialGrid::new(3, 0, 45.0, 2250).unwrap();
        let ctx = FunctionalContext::new(g, builtin_wfree(), 0.0).unwrap();
        let rep = hylomorphy_certificate(&ctx, &TestFunctionSpec::ball(5.0, 1.0)).unwrap();
        assert!(!rep.pass);
        assert!(rep.entries.iter().all(|e| e.ratio >= 1.0));
    }

    #[test]
    fn unbounded_energy_sequence() {
        let g = RadialGrid::new(3, 0, 45.0, 2250).unwrap();
        let ctx = FunctionalContext::new(g.clone(), builtin_wbad(), 0.0).unwrap();
        let sigma = 100.0;
        let entries = nonexistence_sequence(&ctx, sigma, &[5.0, 10.0, 20.0, 40.0]).unwrap();
        assert_eq!(entries.len(), 4);
        for e in &entries {
            assert_relative_eq!(e.charge, sigma, max_relative = 1e-12);
        }
        // Eventually negative and strictly decreasing.
        assert!(entries[3].energy < 0.0);
        assert!(entries[3].energy < entries[2].energy && entries[2].energy < entries[1].energy);
        // ω_R ~ R^{-dim}: doubling R shrinks it by ~8.
        let drop = entries[1].omega_r / entries[2].omega_r;
        assert!((drop - 8.0).abs() < 2.0, "drop = {drop}");

        // A positive potential refuses the construction.
        let good = FunctionalContext::new(g, builtin_wref(), 0.0).unwrap();
        assert!(nonexistence_sequence(&good, sigma, &[5.0]).is_err());
    }

    #[test]
    fn boost_kinematics() {
        let s = BoostSpec::new(0.6, 0.8).unwrap();
        assert_eq!(s.gamma, 1.25);
        assert_eq!(s.omega_v, 1.0);
        assert_relative_eq!(s.k_v[0], 0.6, max_relative = 1e-15);
        assert!((s.dispersion() - 0.64).abs() < 1e-12);
        assert!(BoostSpec::new(1.5, 0.8).is_err());
        assert!(BoostSpec::new(-1.0, 0.8).is_err());
        for &v in &[0.0, 0.3, 0.9, -0.77] {
            let s = BoostSpec::new(v, 0.45).unwrap();
            assert!((s.dispersion() - 0.45 * 0.45).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_velocity_is_a_phase_rotation() {
        let g = RadialGrid::new(3, 0, 16.0, 800).unwrap();
        let u = Field::from_fn(g, |r| (-0.5 * r * r).exp());
        let omega = 0.8;
        let wave = lorentz_boost(&u, omega, 0.0).unwrap();
        for &(t, x) in &[(0.0, [1.0, 0.5, -0.3]), (0.7, [2.0, 0.0, 0.0])] {
            let (re, im) = wave.eval(t, x);
            let (re0, im0) = wave.eval(0.0, x);
            // amplitude preserved, phase advanced by -ωt
            let amp = (re * re + im * im).sqrt();
            let amp0 = (re0 * re0 + im0 * im0).sqrt();
            assert_relative_eq!(amp, amp0, max_relative = 1e-12);
            let expected = (re0 * (omega * t).cos() + im0 * (omega * t).sin(), im0 * (omega * t).cos() - re0 * (omega * t).sin());
            assert_relative_eq!(re, expected.0, epsilon = 1e-12);
            assert_relative_eq!(im, expected.1, epsilon = 1e-12);
        }
    }

    #[test]
    fn boost_requires_spherical_profile() {
        let g = RadialGrid::new(2, 1, 16.0, 200).unwrap();
        let u = Field::from_fn(g, |r| r * (-r).exp());
        assert!(lorentz_boost(&u, 0.8, 0.5).is_err());
    }

    #[test]
    fn angular_momentum_formula() {
        let g = RadialGrid::new(2, 1, 20.0, 400).unwrap();
        let u = Field::from_fn(g.clone(), |r| r * (-r).exp());
        let i2 = g.pairing(u.values(), u.values());
        let m = angular_momentum(&u, 0.8);
        assert_eq!(m[0], 0.0);
        assert_eq!(m[1], 0.0);
        assert_relative_eq!(m[2], -0.8 * i2, max_relative = 1e-14);

        // Sign flips with the vorticity; standing waves carry none.
        let gm = RadialGrid::new(2, -1, 20.0, 400).unwrap();
        let um = Field::from_fn(gm, |r| r * (-r).exp());
        assert!(angular_momentum(&um, 0.8)[2] > 0.0);
        let g0 = RadialGrid::new(2, 0, 20.0, 400).unwrap();
        let u0 = Field::from_fn(g0, |r| r * (-r).exp());
        assert_eq!(angular_momentum(&u0, 0.8)[2], 0.0);
    }

    #[test]
    fn sup_bound_needs_a_vortex_grid() {
        let g = RadialGrid::new(3, 0, 16.0, 200).unwrap();
        let u = Field::from_fn(g, |r| (-r).exp());
        assert!(vortex_sup_bound(&u).is_err());
    }
}
